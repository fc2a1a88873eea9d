//! Matrix exponential by scaling and squaring with Pade approximants
//! (Higham 2005 schedule: orders 3, 5, 7, 9, 13).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// (U, V) with r_m(A) = (V - U)^{-1} (V + U), for m in {3, 5, 7, 9}.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut even_power = id.clone();
    let mut u_inner = &id * b[1];
    let mut v = &id * b[0];
    let m = b.len() - 1;
    let mut k = 2;
    while k <= m {
        even_power = &even_power * &a2;
        v += &even_power * b[k];
        u_inner += &even_power * b[k + 1];
        k += 2;
    }
    (a * u_inner, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let b = &B13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_high = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_low = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = a * (&a6 * u_high + u_low);
    let v_high = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v_low = &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let v = &a6 * v_high + v_low;
    (u, v)
}

/// `exp(t A)`.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if !t.is_finite() || a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix exponential needs finite input".into()));
    }
    let ta = a * t;
    if ta.iter().all(|&x| x == 0.0) {
        return Ok(DMatrix::identity(n, n));
    }
    let norm = one_norm(&ta);
    if !norm.is_finite() {
        return Err(Error::Overflow { norm });
    }

    let (u, v, squarings) = match THETA[..4].iter().find(|(_, th)| norm <= *th) {
        Some(&(m, _)) => {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(&ta, coeffs);
            (u, v, 0u32)
        }
        None => {
            let s = (norm / THETA[4].1).log2().ceil().max(0.0) as u32;
            if s > 1023 {
                return Err(Error::Overflow { norm });
            }
            let (u, v) = pade13(&(ta / 2f64.powi(s as i32)));
            (u, v, s)
        }
    };

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or(Error::Overflow { norm })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}
