//! Chain file format shared by the library loaders and the CLI.
//!
//! ```json
//! { "labels": ["a", "b"], "P": [[0.5, 0.5], [0.3, 0.7]], "f": [1, -1] }
//! ```
//!
//! Exactly one of `P` (transition matrix) or `Q` (generator) must be present;
//! `mu`, `f` and `nu` are optional. Unknown keys are rejected.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{check_invariant_for, Distribution, GeneratorMatrix, MarkovKernel, StateSpace, TransitionMatrix};
use crate::error::{Error, Result};
use crate::simulate::Dynamics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub labels: Vec<String>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Discrete(TransitionMatrix),
    Continuous(GeneratorMatrix),
}

impl Kernel {
    pub fn space(&self) -> &StateSpace {
        match self {
            Kernel::Discrete(p) => p.space(),
            Kernel::Continuous(q) => q.space(),
        }
    }

    pub fn dynamics(&self) -> Dynamics<'_> {
        match self {
            Kernel::Discrete(p) => Dynamics::Discrete(p),
            Kernel::Continuous(q) => Dynamics::Continuous(q),
        }
    }
}

/// Validated contents of a chain file. `f` is left raw so callers decide
/// how to center it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedChain {
    pub kernel: Kernel,
    pub mu: Option<Distribution>,
    pub f: Option<Vec<f64>>,
    pub nu: Option<Distribution>,
}

fn to_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: r.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ChainFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain file serializes")
    }

    pub fn load(&self) -> Result<LoadedChain> {
        let space = StateSpace::new(self.labels.iter().cloned())?;
        let n = space.size();
        let kernel = match (&self.p, &self.q) {
            (Some(p), None) => Kernel::Discrete(TransitionMatrix::new(space.clone(), to_matrix(p, n)?)?),
            (None, Some(q)) => Kernel::Continuous(GeneratorMatrix::new(space.clone(), to_matrix(q, n)?)?),
            _ => return Err(Error::Schema("exactly one of \"P\" or \"Q\" is required".into())),
        };
        let mu = match &self.mu {
            Some(w) => {
                let mu = Distribution::new(space.clone(), w.clone())?;
                match &kernel {
                    Kernel::Discrete(p) => check_invariant_for(p, &mu)?,
                    Kernel::Continuous(q) => check_invariant_for(q, &mu)?,
                }
                Some(mu)
            }
            None => None,
        };
        if let Some(f) = &self.f {
            if f.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.len(),
                });
            }
        }
        let nu = self
            .nu
            .as_ref()
            .map(|w| Distribution::new(space.clone(), w.clone()))
            .transpose()?;
        Ok(LoadedChain {
            kernel,
            mu,
            f: self.f.clone(),
            nu,
        })
    }
}

impl LoadedChain {
    pub fn from_file(path: &Path) -> Result<Self> {
        ChainFile::read(path)?.load()
    }

    pub fn size(&self) -> usize {
        self.kernel.space().size()
    }
}
