//! Acoustic scattering fields (ASFs) of 3D objects, encoded as real spherical
//! harmonic coefficient vectors, learned from point clouds and coupled into a
//! Monte Carlo ray tracer that produces broadband impulse responses.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line tool and audio IO live in the `asfnet-tools` crate.
//!
//! # Feature flags
//! - **`std`**: runtime SIMD detection in the GEMM kernels and threaded batch
//!   gradients during training.
//! - **`serde`**: `Serialize`/`Deserialize` for the plain data types.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod dataset;
pub mod error;
pub mod geom;
mod gemm;
mod linalg;
pub mod oracle;
pub mod pointcloud;
pub mod propagate;
pub mod regressor;
pub mod render;
pub mod rng;
pub mod shfield;
pub mod special;
pub mod sphgeom;

pub use error::{Error, Result};
pub use geom::{Mat3, Quat, Vec3};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Octave band centres traced by the propagation engine, in Hz.
pub const BANDS: [f64; 7] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];
/// Number of traced octave bands.
pub const NUM_BANDS: usize = BANDS.len();
/// Bands for which learned scattering fields exist. Higher bands are handled
/// geometrically.
pub const ASF_BANDS: [f64; 4] = [125.0, 250.0, 500.0, 1000.0];
/// Default speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Index of `freq` in [`ASF_BANDS`], if it is one of them.
pub fn asf_band_index(freq: f64) -> Option<usize> {
    ASF_BANDS.iter().position(|&f| f == freq)
}
