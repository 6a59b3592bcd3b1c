//! Driver for the bounded model checker: solver backends, the iterative
//! deepening loop, witness decoding and report rendering.

pub mod bmc;
pub mod cases;
pub mod report;
pub mod solver;
pub mod witness;

pub use bmc::{run_bmc, BmcConfig, BmcError, BmcReport, Bounds, Outcome, SemanticsChoice};
pub use solver::{QbfFormat, SolverBackend, Verdict};
