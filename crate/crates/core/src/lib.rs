//! Iterated Poincaré gaps of Markov chains and the Bernstein-type
//! concentration bounds they drive, with exact oracles and a Monte Carlo
//! verifier.

pub mod bounds;
pub mod chain;
pub mod error;
pub mod examples;
pub mod generate;
pub mod numeric;
pub mod oracle;
pub mod schema;
pub mod simulate;
pub mod spectral;

pub use bounds::{tail_bound, BoundQuery, BoundResult, Horizon, Mode, SweepAxis, SweepRow};
pub use chain::{
    make_observable, stationary_distribution, Distribution, GeneratorMatrix, MarkovKernel, Observable,
    StateSpace, TransitionMatrix,
};
pub use error::{Error, Result};
pub use schema::{ChainFile, Kernel, LoadedChain};
pub use simulate::{Dynamics, SimConfig, SimReport};
pub use spectral::{gap_report, gap_report_generator, ip_gap, GapReport, PseudoGap};
