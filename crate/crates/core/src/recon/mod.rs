//! Depth-map recovery from the two measurement vectors.
//!
//! One TV solve on `y_i` finds where the objects are; its thresholded
//! support picks a small set of Haar coefficients; two least-squares fits
//! over that set give `x̂_I` and `x̂_Iν`; their ratio is the beat frequency
//! and hence depth.

mod export;
pub mod haar;
mod lsq;
mod tv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmcw::ChirpConfig;
use crate::par::Exec;
use crate::sensing::SensingMatrix;
use crate::spectral::{FrequencyWeighting, MeasurementVectors};

pub use lsq::{ls_on_support, select_support, LsOutput, LsSolver, SupportSet, NORMAL_RESIDUAL_TOL};
pub use tv::{total_variation, tv_minimize, tv_objective, TvConfig, TvOutput};

/// Per-pixel depth in meters with a validity mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    /// 0 where `mask` is false.
    pub depths: Vec<f64>,
    pub mask: Vec<bool>,
    /// Pixels whose estimate exceeded the unambiguous range and were clamped.
    pub clamped: usize,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            depths: vec![0.0; width * height],
            mask: vec![false; width * height],
            clamped: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.width * self.height
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        (x < self.width && y < self.height && self.mask[i]).then(|| self.depths[i])
    }
}

/// `true` where `image > rel_threshold · max(image)`. An image with no
/// positive value gives an all-false mask.
pub fn make_mask(image: &[f64], rel_threshold: f64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&rel_threshold) {
        return Err(Error::param(
            "mask_threshold",
            format!("must be in [0, 1), got {rel_threshold}"),
        ));
    }
    let max = image.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Ok(vec![false; image.len()]);
    }
    let t = rel_threshold * max;
    Ok(image.iter().map(|&v| v > t).collect())
}

/// Ratio of the frequency-weighted and plain images mapped to meters.
/// Pixels with `x_i ≤ floor_rel · max(x_i)` are left invalid.
pub fn extract_depth(
    x_i: &[f64],
    x_inu: &[f64],
    width: usize,
    cfg: &ChirpConfig,
    floor_rel: f64,
    weighting: FrequencyWeighting,
) -> Result<DepthMap> {
    if x_i.len() != x_inu.len() {
        return Err(Error::LengthMismatch {
            expected: x_i.len(),
            actual: x_inu.len(),
        });
    }
    if width == 0 || !x_i.len().is_multiple_of(width) {
        return Err(Error::param("width", format!("{width} does not divide {} pixels", x_i.len())));
    }
    if !(0.0..1.0).contains(&floor_rel) {
        return Err(Error::param("depth_floor", format!("must be in [0, 1), got {floor_rel}")));
    }
    let height = x_i.len() / width;
    let mut map = DepthMap::empty(width, height);
    let max = x_i.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Ok(map);
    }
    let floor = floor_rel * max;
    let range = cfg.max_range();
    let scale = cfg.meters_per_hz();
    for i in 0..x_i.len() {
        if x_i[i] > floor && x_i[i].is_finite() && x_inu[i].is_finite() {
            let nu = weighting.invert(x_inu[i] / x_i[i], cfg.bin_width());
            let d = (nu * scale).max(0.0);
            if d > range {
                map.clamped += 1;
                map.depths[i] = range;
            } else {
                map.depths[i] = d;
            }
            map.mask[i] = true;
        }
    }
    Ok(map)
}

/// `k × k` box average over valid pixels only; the mask is kept.
pub fn smooth(d: &DepthMap, k: usize) -> Result<DepthMap> {
    if k == 0 || k > d.width || k > d.height {
        return Err(Error::param(
            "kernel",
            format!("must be in 1..={}, got {k}", d.width.min(d.height)),
        ));
    }
    let lo = (k - 1) / 2;
    let hi = k / 2;
    let mut out = d.clone();
    for y in 0..d.height {
        for x in 0..d.width {
            let i = y * d.width + x;
            if !d.mask[i] {
                continue;
            }
            let (mut sum, mut cnt) = (0.0, 0usize);
            for yy in y.saturating_sub(lo)..=(y + hi).min(d.height - 1) {
                for xx in x.saturating_sub(lo)..=(x + hi).min(d.width - 1) {
                    let j = yy * d.width + xx;
                    if d.mask[j] {
                        sum += d.depths[j];
                        cnt += 1;
                    }
                }
            }
            out.depths[i] = sum / cnt as f64;
        }
    }
    Ok(out)
}

/// Settings for [`reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    pub tv: TvConfig,
    /// Fraction of the TV image maximum below which pixels are background.
    pub mask_threshold: f64,
    /// Kept Haar coefficients as a fraction of `m`.
    pub support_fraction: f64,
    /// Fraction of `max(x̂_I)` below which no depth is reported.
    pub depth_floor: f64,
    pub solver: LsSolver,
    /// Box-smoothing kernel side applied to the final map; 0 disables.
    pub smooth_kernel: usize,
    pub exec: Exec,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            tv: TvConfig::default(),
            mask_threshold: 0.1,
            support_fraction: 1.0 / 3.0,
            depth_floor: 0.01,
            solver: LsSolver::Lbfgs,
            smooth_kernel: 0,
            exec: Exec::Parallel,
        }
    }
}

/// Depth map plus the intermediates it was computed from.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub depth: DepthMap,
    pub tv: TvOutput,
    pub mask: Vec<bool>,
    pub support: SupportSet,
    pub amplitude: LsOutput,
    pub weighted: LsOutput,
}

/// TV on `y_i` → mask → Haar support → least squares on `y_i` and `y_inu`
/// → depth.
pub fn reconstruct(
    a: &SensingMatrix,
    mv: &MeasurementVectors,
    cfg: &ReconConfig,
    chirp: &ChirpConfig,
) -> Result<Reconstruction> {
    if mv.m() != a.m() || mv.y_inu.len() != a.m() {
        return Err(Error::LengthMismatch {
            expected: a.m(),
            actual: mv.m(),
        });
    }
    let side = haar::square_side(a.n())?;
    let tv = tv_minimize(a, &mv.y_i, &cfg.tv)?;
    let mask = make_mask(&tv.image, cfg.mask_threshold)?;
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptySupport(
            "TV image has no pixel above the mask threshold; nothing to reconstruct".into(),
        ));
    }
    let support = select_support(&mask, a.m(), cfg.support_fraction)?;
    let (amp, wtd) = cfg.exec.join(
        || ls_on_support(a, &mv.y_i, &support, &mask, cfg.solver),
        || ls_on_support(a, &mv.y_inu, &support, &mask, cfg.solver),
    );
    let (amplitude, weighted) = (amp?, wtd?);
    let mut depth = extract_depth(
        &amplitude.image,
        &weighted.image,
        side,
        chirp,
        cfg.depth_floor,
        mv.weighting,
    )?;
    if cfg.smooth_kernel > 0 {
        depth = smooth(&depth, cfg.smooth_kernel)?;
    }
    Ok(Reconstruction {
        depth,
        tv,
        mask,
        support,
        amplitude,
        weighted,
    })
}
