//! Scenario configs, the `verify` harness and the command line.

pub mod cli;
pub mod scenario;
pub mod suite;
pub mod verify;

pub use scenario::{Config, FactorConfig, LatticeParams, Prepared, Scenario};
pub use verify::{run_experiment, EquivalenceReport, Experiment, PairStats, Window, Windows};
