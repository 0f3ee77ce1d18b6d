//! Evaluation harness: raster baseline, error metrics, sample-ratio sweeps
//! and photon-flux bookkeeping.

mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmcw::ChirpConfig;
use crate::par::Exec;
use crate::recon::DepthMap;
use crate::scene::{returns_from_scene, CollectionGeometry, IlluminationProfile, Scene};
use crate::spectral::{Acquirer, ChainConfig};

pub use sweep::{
    ratio_grid, run_sweep, sensing_seed, CellResult, RasterCell, RasterRow, RatioResult, SweepOptions, SweepResult, SweepRow,
    SweepSetup, SweepSpec,
};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (denominator `r − 1`); 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Standard error of the mean; 0 for a single value.
pub fn sem(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::param("spearman", "needs at least two points"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

fn check_dims(d: &DepthMap, truth: &Scene) -> Result<()> {
    if d.width != truth.width || d.height != truth.height {
        return Err(Error::param(
            "depth map",
            format!(
                "{}x{} does not match scene {}x{}",
                d.width, d.height, truth.width, truth.height
            ),
        ));
    }
    Ok(())
}

/// Mean squared depth error over every pixel. Invalid pixels count as
/// depth 0.
pub fn mse(d: &DepthMap, truth: &Scene) -> Result<f64> {
    check_dims(d, truth)?;
    let n = d.n();
    let sum: f64 = (0..n)
        .map(|i| {
            let est = if d.mask[i] { d.depths[i] } else { 0.0 };
            (est - truth.depth[i]).powi(2)
        })
        .sum();
    Ok(sum / n as f64)
}

/// Mean over the labeled pixels of the across-repetition sample standard
/// deviation of the depth error.
pub fn object_depth_uncertainty(maps: &[DepthMap], truth: &Scene, label: &str) -> Result<f64> {
    if maps.len() < 2 {
        return Err(Error::param("reconstructions", format!("need at least 2, got {}", maps.len())));
    }
    for d in maps {
        check_dims(d, truth)?;
    }
    let pixels = truth.label_pixels(label)?;
    let errs: Vec<Vec<f64>> = maps
        .iter()
        .map(|d| {
            pixels
                .iter()
                .map(|&i| if d.mask[i] { d.depths[i] } else { 0.0 } - truth.depth[i])
                .collect()
        })
        .collect();
    Ok(uncertainty_from_errors(&errs))
}

/// `errs[r][p]`: error of pixel `p` in repetition `r`.
pub(crate) fn uncertainty_from_errors(errs: &[Vec<f64>]) -> f64 {
    let Some(first) = errs.first() else {
        return 0.0;
    };
    if first.is_empty() {
        return 0.0;
    }
    let stds: Vec<f64> = (0..first.len())
        .map(|p| sample_std(&errs.iter().map(|e| e[p]).collect::<Vec<_>>()))
        .collect();
    mean(&stds)
}

/// Photons per detector for an array and for a single compressive detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    /// `Rt/α`.
    pub array_per_detector: f64,
    /// `Rt/(2m)`.
    pub compressive_per_projection: f64,
    /// Compressive over array count.
    pub ratio: f64,
}

/// `rate` photons/s returned over `time` seconds, imaged onto `alpha` lit
/// pixels of a `beta`-pixel array, versus `m` compressive projections.
pub fn flux_accounting(rate: f64, time: f64, m: usize, alpha: usize, beta: usize) -> Result<FluxReport> {
    if !(rate > 0.0) || !rate.is_finite() || !(time > 0.0) || !time.is_finite() {
        return Err(Error::param("flux", "rate and time must be finite and > 0"));
    }
    if m == 0 || alpha == 0 || beta == 0 {
        return Err(Error::param("flux", "m, alpha and beta must be >= 1"));
    }
    if alpha > beta {
        return Err(Error::param("alpha", format!("must not exceed beta ({alpha} > {beta})")));
    }
    let total = rate * time;
    let array = total / alpha as f64;
    let compressive = total / (2 * m) as f64;
    Ok(FluxReport {
        array_per_detector: array,
        compressive_per_projection: compressive,
        ratio: compressive / array,
    })
}

/// How a raster pixel's cleaned spectrum is reduced to one bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakLocator {
    /// Highest bin of the denoised spectrum.
    Argmax,
    /// Highest bin after correlating with the known Lorentzian line shape.
    /// Falls back to `Argmax` when broadening is off.
    #[default]
    Matched,
}

/// Options for [`raster_baseline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterOptions {
    /// Also apply Wiener deconvolution before peak finding.
    pub deconvolve: bool,
    pub peak: PeakLocator,
    pub exec: Exec,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            deconvolve: false,
            peak: PeakLocator::Matched,
            exec: Exec::Parallel,
        }
    }
}

/// Noise streams for raster pixels start here so they never coincide with
/// projection streams of the same seed.
const RASTER_STREAM_BASE: u64 = 1 << 40;

/// Point-by-point scan: each pixel's own spectrum is broadened, noised,
/// denoised and reduced to its peak bin.
pub fn raster_baseline(
    scene: &Scene,
    illum: &IlluminationProfile,
    geom: &CollectionGeometry,
    chirp: &ChirpConfig,
    chain: &ChainConfig,
    opts: &RasterOptions,
) -> Result<DepthMap> {
    let returns = returns_from_scene(scene, illum, geom, chirp)?;
    let raster_chain = ChainConfig {
        deconvolve: opts.deconvolve,
        ..*chain
    };
    let acq = Acquirer::new(&returns, geom.lo_amplitude(), chirp, &raster_chain)?;
    raster_with(&acq, scene, opts.peak, opts.exec)
}

pub(crate) fn raster_with(acq: &Acquirer, scene: &Scene, peak: PeakLocator, exec: Exec) -> Result<DepthMap> {
    let chirp = *acq.chirp();
    let n = scene.n();
    let range = chirp.max_range();
    let pixels: Vec<Option<f64>> = exec
        .map(n, |p| -> Result<Option<f64>> {
            let raw = acq.pixel_raw_spectrum(p)?;
            if raw.max() == 0.0 {
                return Ok(None);
            }
            let mut clean = acq.clean(&raw, RASTER_STREAM_BASE + p as u64)?;
            if peak == PeakLocator::Matched {
                clean = acq.broaden(&clean);
            }
            let (bin, &val) = clean
                .amplitudes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .expect("non-empty spectrum");
            if val <= 0.0 {
                return Ok(None);
            }
            Ok(Some(chirp.distance_from_frequency(clean.frequency(bin))?.min(range)))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let mut map = DepthMap::empty(scene.width, scene.height);
    for (i, d) in pixels.into_iter().enumerate() {
        if let Some(d) = d {
            map.depths[i] = d;
            map.mask[i] = true;
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests;
