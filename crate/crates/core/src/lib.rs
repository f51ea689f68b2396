//! Loss-tolerant characterization of quantum light through normalized
//! factorial moments.
//!
//! The crate is organized bottom-up:
//!
//! - [`fock`]: truncated photon-number distributions, source constructors,
//!   displacement matrix elements and factorial moments.
//! - [`moments`]: normalized moments, the moment generating function and the
//!   reconstruction of photon statistics from a truncated moment set.
//! - [`displaced`]: displaced single photons with an imperfect mode overlap.
//! - [`detection`]: binomial loss, time-multiplexed click detection (exact and
//!   sampled) and Klyshko efficiency calibration.
//! - [`inference`]: classicality tests, overlap fitting and reconstruction
//!   range bounds.
//! - [`cli`]: the command implementations behind the `photon-moments` binary.

pub mod cli;
pub mod detection;
pub mod displaced;
pub mod error;
pub mod fock;
pub mod inference;
pub mod moments;
mod numeric;

pub use displaced::DisplacedStateModel;
pub use error::{Error, Result};
pub use fock::{PhotonStatistics, SourceSpec};
pub use moments::{NormalizedMoments, RawMoments};
