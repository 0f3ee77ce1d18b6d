//! Simulation and reconstruction for a compressive FMCW LiDAR depth camera.
//!
//! The acquisition chain runs scene → balanced-heterodyne beat-note traces →
//! ±1 DMD projections → cleaned positive-frequency spectra → the two
//! measurement vectors `(y_i, y_inu)`. Reconstruction recovers an amplitude
//! image and a frequency-weighted image from those vectors and divides them
//! to obtain per-pixel depth.
//!
//! ```text
//! Scene ─► returns_from_scene ─► Acquisition (per row k: split_pattern,
//!          synthesize_trace, positive_spectrum, broaden, inject_noise,
//!          denoise_bayes_shrink, wiener_deconvolve) ─► accumulate
//!      ─► MeasurementVectors ─► reconstruct (tv_minimize, make_mask,
//!          select_support, ls_on_support ×2, extract_depth) ─► DepthMap
//! ```
//!
//! Data-parallel loops (projections, raster pixels, sweep cells) run on
//! rayon when the `parallel` feature is enabled; [`Exec::Sequential`] is
//! always available and produces bit-identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod evalbench;
pub mod fmcw;
pub mod par;
pub mod recon;
pub mod scene;
pub mod sensing;
pub mod spectral;

pub use error::{Error, Result};
pub use fmcw::{ChirpConfig, Return, ScopeTrace, Waveform};
pub use par::Exec;
pub use recon::{DepthMap, TvConfig};
pub use scene::{CollectionGeometry, IlluminationProfile, Scene};
pub use sensing::SensingMatrix;
pub use spectral::{MeasurementVectors, NoiseModel, Spectrum};
