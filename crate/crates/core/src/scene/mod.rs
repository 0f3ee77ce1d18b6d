//! Ground-truth scenes, illumination and the Lambertian return model.

mod generate;
mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmcw::{round_trip_delay, ChirpConfig, Return, EPS0_C};

pub use generate::{builtin, paper_demo, single_plane, torus_only, two_plane, BUILTIN_SCENES};
pub use io::{load_scene, parse_scene_json, parse_scene_text, save_scene_json, save_scene_text, scene_to_text};

/// Per-pixel depth (m, 0 = empty) and Lambertian albedo, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub reflectivity: Vec<f64>,
    /// Optional per-pixel object id, 0 = unlabeled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_names: BTreeMap<String, u32>,
}

impl Scene {
    pub fn empty(width: usize, height: usize) -> Self {
        Scene {
            width,
            height,
            depth: vec![0.0; width * height],
            reflectivity: vec![0.0; width * height],
            labels: None,
            label_names: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Scene(format!("dimensions must be positive, got {}x{}", self.width, self.height)));
        }
        let n = self.n();
        if self.depth.len() != n || self.reflectivity.len() != n {
            return Err(Error::Scene(format!(
                "expected {n} depth and reflectivity values, got {} and {}",
                self.depth.len(),
                self.reflectivity.len()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Scene(format!("expected {n} labels, got {}", labels.len())));
            }
        }
        for (i, (&d, &r)) in self.depth.iter().zip(&self.reflectivity).enumerate() {
            let (x, y) = (i % self.width, i / self.width);
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Scene(format!("depth at ({x}, {y}) must be finite and >= 0, got {d}")));
            }
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Scene(format!("reflectivity at ({x}, {y}) must be in [0, 1], got {r}")));
            }
            if d == 0.0 && r != 0.0 {
                return Err(Error::Scene(format!("empty pixel ({x}, {y}) has nonzero reflectivity {r}")));
            }
        }
        Ok(())
    }

    pub fn max_depth(&self) -> f64 {
        self.depth.iter().copied().fold(0.0, f64::max)
    }

    /// Pixel indices carrying `label`.
    pub fn label_pixels(&self, label: &str) -> Result<Vec<usize>> {
        let id = *self.label_names.get(label).ok_or_else(|| Error::MissingLabel(label.to_string()))?;
        let labels = self.labels.as_ref().ok_or_else(|| Error::MissingLabel(label.to_string()))?;
        let px: Vec<usize> = labels.iter().enumerate().filter(|(_, &l)| l == id).map(|(i, _)| i).collect();
        if px.is_empty() {
            return Err(Error::MissingLabel(label.to_string()));
        }
        Ok(px)
    }

    /// Distinct nonzero depths, ascending.
    pub fn distinct_depths(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.depth.iter().copied().filter(|&v| v > 0.0).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }
}

/// Per-pixel optical power on the scene (W).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationProfile {
    pub width: usize,
    pub height: usize,
    pub power: Vec<f64>,
}

impl IlluminationProfile {
    /// Centered 2D Gaussian with standard deviation `sigma_frac` of the
    /// image side, normalized to `total_power` watts.
    pub fn gaussian(width: usize, height: usize, total_power: f64, sigma_frac: f64) -> Result<Self> {
        if !(total_power > 0.0) || !(sigma_frac > 0.0) {
            return Err(Error::param("illumination", "total power and width must be > 0"));
        }
        let (sx, sy) = (sigma_frac * width as f64, sigma_frac * height as f64);
        let (cx, cy) = (0.5 * width as f64, 0.5 * height as f64);
        let mut power = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let dx = (x as f64 + 0.5 - cx) / sx;
                let dy = (y as f64 + 0.5 - cy) / sy;
                power.push((-0.5 * (dx * dx + dy * dy)).exp());
            }
        }
        let sum: f64 = power.iter().sum();
        power.iter_mut().for_each(|p| *p *= total_power / sum);
        Ok(IlluminationProfile { width, height, power })
    }

    pub fn uniform(width: usize, height: usize, total_power: f64) -> Self {
        let n = width * height;
        IlluminationProfile {
            width,
            height,
            power: vec![total_power / n as f64; n],
        }
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        IlluminationProfile {
            power: self.power.iter().map(|p| p * k).collect(),
            ..self.clone()
        }
    }
}

/// Default Gaussian width; puts 119 µW in the brightest pixel of a
/// 128×128 grid at 1 W total.
pub const DEFAULT_ILLUMINATION_SIGMA: f64 = 0.3269;

/// Receiver optic and local oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionGeometry {
    /// Collection aperture diameter (m).
    pub aperture_diameter: f64,
    /// Local-oscillator power (W).
    pub lo_power: f64,
}

impl Default for CollectionGeometry {
    fn default() -> Self {
        CollectionGeometry {
            aperture_diameter: 0.0508,
            lo_power: 100e-6,
        }
    }
}

impl CollectionGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.aperture_diameter > 0.0) || !self.aperture_diameter.is_finite() {
            return Err(Error::param("aperture_diameter", "must be finite and > 0"));
        }
        if !(self.lo_power > 0.0) || !self.lo_power.is_finite() {
            return Err(Error::param("lo_power", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn aperture_area(&self) -> f64 {
        std::f64::consts::PI * 0.25 * self.aperture_diameter * self.aperture_diameter
    }

    /// Field amplitude of the LO, with P = ε0c·A²/2.
    pub fn lo_amplitude(&self) -> f64 {
        field_amplitude(self.lo_power)
    }
}

/// Field amplitude for optical power `p` (P = ε0c·A²/2).
pub fn field_amplitude(p: f64) -> f64 {
    (2.0 * p / EPS0_C).sqrt()
}

/// Power reaching the collection optic from each pixel: a Lambertian
/// surface captured by the aperture over a hemisphere,
/// `P = illum · albedo · area / (2π d²)`.
pub fn received_power(scene: &Scene, illum: &IlluminationProfile, geom: &CollectionGeometry) -> Result<Vec<f64>> {
    scene.validate()?;
    geom.validate()?;
    if illum.width != scene.width || illum.height != scene.height || illum.power.len() != scene.n() {
        return Err(Error::Scene(format!(
            "illumination is {}x{}, scene is {}x{}",
            illum.width, illum.height, scene.width, scene.height
        )));
    }
    let area = geom.aperture_area();
    Ok(scene
        .depth
        .iter()
        .zip(&scene.reflectivity)
        .zip(&illum.power)
        .map(|((&d, &r), &p)| {
            if d > 0.0 && r > 0.0 {
                p * r * area / (std::f64::consts::TAU * d * d)
            } else {
                0.0
            }
        })
        .collect())
}

/// One [`Return`] per pixel (row-major); empty pixels carry amplitude 0.
pub fn returns_from_scene(
    scene: &Scene,
    illum: &IlluminationProfile,
    geom: &CollectionGeometry,
    cfg: &ChirpConfig,
) -> Result<Vec<Return>> {
    cfg.validate()?;
    let powers = received_power(scene, illum, geom)?;
    let max_range = cfg.max_range();
    scene
        .depth
        .iter()
        .zip(powers)
        .enumerate()
        .map(|(i, (&d, p))| {
            if d >= max_range {
                return Err(Error::BeyondRange {
                    x: i % scene.width,
                    y: i / scene.width,
                    depth: d,
                    max_range,
                });
            }
            Ok(Return::new(field_amplitude(p), round_trip_delay(d)))
        })
        .collect()
}
