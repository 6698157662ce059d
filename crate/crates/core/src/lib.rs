//! Two-stage digital beamforming for wideband mmWave MIMO with a mobile user.
//!
//! The UE compresses its `N_r` antenna outputs to `N_c` with a first-stage
//! combiner `Q[nu]` that is kept for a window of blocks, and separates the
//! `N_s` streams with a second-stage combiner `W[nu]` that is refreshed every
//! block from cheap pilots sent through `Q`.

pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod rate;
pub mod scenario;
pub mod selftest;

pub use error::{Error, Result};
