//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fmcw_cs::evalbench::{RasterOptions, SweepSpec};
use fmcw_cs::recon::{haar, ReconConfig};
use fmcw_cs::scene::{self, CollectionGeometry, IlluminationProfile, Scene, BUILTIN_SCENES};
use fmcw_cs::spectral::ChainConfig;
use fmcw_cs::ChirpConfig;
use serde::{Deserialize, Serialize};

pub const OUT_ENV: &str = "FMCW_CS_OUT";
pub const DEFAULT_OUT: &str = "fmcw-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 32×32 grid with the full chirp.
    #[default]
    Desk,
    /// 128×128 grid.
    Paper,
}

impl Preset {
    pub fn side(self) -> usize {
        match self {
            Preset::Desk => 32,
            Preset::Paper => 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Illumination {
    /// Total transmitted power in watts.
    pub total_power: f64,
    /// Gaussian σ as a fraction of the grid side.
    pub sigma_fraction: f64,
}

impl Default for Illumination {
    fn default() -> Self {
        Illumination {
            total_power: 1.0,
            sigma_fraction: scene::DEFAULT_ILLUMINATION_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: Preset,
    /// Built-in scene name or a path to a scene file.
    pub scene: String,
    pub width: Option<usize>,
    pub height: Option<usize>,
    /// Seeds both the sensing matrix and the noise streams.
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub sample_ratio: Option<f64>,
    pub m: Option<usize>,
    pub chirp: ChirpConfig,
    pub illumination: Illumination,
    pub geometry: CollectionGeometry,
    pub chain: ChainConfig,
    pub recon: ReconConfig,
    pub raster: RasterOptions,
    /// Its `seed` is replaced by the top-level seed.
    pub sweep: SweepSpec,
    /// Object whose depth spread a sweep reports; empty disables.
    pub label: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: Preset::Desk,
            scene: "paper-demo".into(),
            width: None,
            height: None,
            seed: 0,
            output: None,
            sample_ratio: None,
            m: None,
            chirp: ChirpConfig::paper(),
            illumination: Illumination::default(),
            geometry: CollectionGeometry::default(),
            chain: ChainConfig::default(),
            recon: ReconConfig::default(),
            raster: RasterOptions::default(),
            sweep: SweepSpec::default(),
            label: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn side(&self) -> (usize, usize) {
        let s = self.preset.side();
        (self.width.unwrap_or(s), self.height.unwrap_or(s))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Checks every nested invariant; each failure names its field.
    pub fn validate(&self) -> Result<()> {
        self.chirp.validate().context("chirp")?;
        self.chain.validate().context("chain")?;
        self.geometry.validate().context("geometry")?;
        self.recon.tv.validate().context("recon.tv")?;
        let r = &self.recon;
        ensure!((0.0..1.0).contains(&r.mask_threshold), "recon.mask_threshold must be in [0, 1)");
        ensure!(
            r.support_fraction > 0.0 && r.support_fraction <= 1.0,
            "recon.support_fraction must be in (0, 1]"
        );
        ensure!((0.0..1.0).contains(&r.depth_floor), "recon.depth_floor must be in [0, 1)");
        let il = &self.illumination;
        ensure!(
            il.total_power.is_finite() && il.total_power > 0.0,
            "illumination.total_power must be finite and > 0"
        );
        ensure!(
            il.sigma_fraction.is_finite() && il.sigma_fraction > 0.0,
            "illumination.sigma_fraction must be finite and > 0"
        );
        if let Some(ratio) = self.sample_ratio {
            ensure!(ratio > 0.0 && ratio <= 1.0, "sample_ratio must be in (0, 1], got {ratio}");
        }
        if self.sample_ratio.is_some() && self.m.is_some() {
            bail!("give either sample_ratio or m, not both");
        }
        let (w, h) = self.side();
        ensure!(w == h, "width and height must be equal, got {w}x{h}");
        haar::square_side(w * h).context("grid size")?;
        if let Some(m) = self.m {
            ensure!(m >= 1 && m <= w * h, "m must be in 1..={}, got {m}", w * h);
        }
        Ok(())
    }

    /// Measurements for a single run: `m`, else `round(ratio·n)`, else n/4.
    pub fn measurements(&self, n: usize) -> usize {
        match (self.m, self.sample_ratio) {
            (Some(m), _) => m,
            (None, Some(r)) => ((r * n as f64).round() as usize).clamp(1, n),
            (None, None) => n / 4,
        }
    }

    /// Loads or generates the scene; a path is anything that is not a
    /// built-in name.
    pub fn load_scene(&self) -> Result<Scene> {
        let (w, h) = self.side();
        let scene = if BUILTIN_SCENES.contains(&self.scene.as_str()) || self.scene == "demo" {
            scene::builtin(&self.scene, w, h)?
        } else {
            let path = Path::new(&self.scene);
            ensure!(
                path.exists(),
                "scene `{}` is neither a built-in ({}) nor an existing file",
                self.scene,
                BUILTIN_SCENES.join(", ")
            );
            scene::load_scene(path).with_context(|| format!("loading scene {}", path.display()))?
        };
        ensure!(
            scene.width == scene.height,
            "scene must be square, got {}x{}",
            scene.width,
            scene.height
        );
        haar::square_side(scene.n()).context("scene size")?;
        Ok(scene)
    }

    pub fn illumination_for(&self, scene: &Scene) -> Result<IlluminationProfile> {
        Ok(IlluminationProfile::gaussian(
            scene.width,
            scene.height,
            self.illumination.total_power,
            self.illumination.sigma_fraction,
        )?)
    }
}
