//! Monte Carlo harness: configuration, sweeps, operation counts and result files.

pub mod config;
pub mod opcount;
pub mod results;
pub mod sweep;

pub use config::{CodeSelection, CodedReceiver, Mode, OptimizedProfile, Receiver, Scheme, SimConfig};
pub use opcount::{count_operations, OpCount, OpReceiver};
pub use results::{BerCurve, Provenance, TrialRecord};
pub use sweep::{
    coded_trial, run_coded_sweep, run_sweep, run_uncoded_sweep, uncoded_trial, with_workers, TrialOutcome,
};
