//! Channel-hardening-exploiting message passing (CHEMP) receiver for large
//! multiuser MIMO uplinks.
//!
//! The crate covers the whole link: Rayleigh channel generation and the
//! real-valued system model, the Gram-domain message passing detector,
//! pilot-based estimation of `HᵀH`, baseline detectors, LDPC codes with a
//! joint detector-decoder, and a deterministic Monte Carlo harness.

pub mod analysis;
pub mod baseline;
pub mod error;
pub mod estimate;
pub mod hardening;
pub mod harness;
pub mod ldpc;
pub mod model;
pub mod mpd;
pub mod rng;

pub use error::{Error, Result};
pub use model::{ComplexChannel, RealSystemInstance, SnrSpec};
pub use mpd::{BeliefState, GramObservation, MpdConfig};
