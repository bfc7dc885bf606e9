//! Codebook-based hybrid precoding for millimeter-wave array-of-subarrays
//! transceivers.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`geometry`]: planar array responses, closed-form inner products and
//!   subarray phase offsets.
//! - [`channel`]: sparse ray-cluster channels, static and time-evolving.
//! - [`codebook`]: RF beam codebooks, baseband codebooks and RF precoders.
//! - [`sounding`]: the per-beam-pair measurement tensor, computed by two
//!   independent routes, plus measurement noise.
//! - [`search`]: compressed channels, mutual information and the joint
//!   precoder searches (exhaustive, restricted, random subset).
//! - [`beamsel`]: effective-power beam shortlisting and the large-array
//!   dominance probe.
//! - [`aoa`]: angle-of-arrival estimation from cross-subarray correlations.
//!
//! All geometry is wavelength-normalized: distances are in carrier
//! wavelengths, so the wavenumber is `2π`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod aoa;
pub mod beamsel;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod geometry;
pub mod math;
pub mod search;
pub mod sounding;

pub use error::{Error, Result};
pub use math::{CMatrix, C64};
