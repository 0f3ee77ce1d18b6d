use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{mean, mse, raster_with, sem, uncertainty_from_errors, PeakLocator};
use crate::error::{Error, Result};
use crate::fmcw::ChirpConfig;
use crate::par::Exec;
use crate::recon::{reconstruct, DepthMap, ReconConfig};
use crate::scene::{returns_from_scene, CollectionGeometry, IlluminationProfile, Scene};
use crate::sensing::SensingMatrix;
use crate::spectral::{Acquirer, ChainConfig, NoiseModel};

/// `count` evenly spaced ratios ending at 1.
pub fn ratio_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / count as f64).collect()
}

/// Grid of a sample-ratio / PSNR / linewidth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub sample_ratios: Vec<f64>,
    #[serde(with = "crate::spectral::psnr_list")]
    pub psnr_levels: Vec<f64>,
    pub repetitions: usize,
    /// Beat-note FWHMs in Hz.
    pub linewidths: Vec<f64>,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            sample_ratios: ratio_grid(50),
            psnr_levels: vec![1.25, 2.5, 5.0, 10.0, 20.0, f64::INFINITY],
            repetitions: 10,
            linewidths: vec![2e6, 1e6, 1e5],
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sample_ratios.is_empty() {
            return Err(Error::param("sample_ratios", "must not be empty"));
        }
        if self.sample_ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::param("sample_ratios", "every ratio must be in (0, 1]"));
        }
        if self.sample_ratios.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("sample_ratios", "must be strictly ascending"));
        }
        if self.psnr_levels.is_empty() || self.psnr_levels.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::param("psnr_levels", "must be non-empty and each > 0 or inf"));
        }
        if self.repetitions == 0 {
            return Err(Error::param("repetitions", "must be >= 1"));
        }
        if self.linewidths.is_empty() || self.linewidths.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::param("linewidths", "must be non-empty, finite and >= 0"));
        }
        Ok(())
    }

    fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for rep in 0..self.repetitions {
            for &psnr in &self.psnr_levels {
                for &linewidth in &self.linewidths {
                    out.push(CellKey { rep, psnr, linewidth });
                }
            }
        }
        out
    }
}

/// Everything except the grid that determines a sweep's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub chirp: ChirpConfig,
    pub illumination: IlluminationProfile,
    pub geometry: CollectionGeometry,
    /// Noise fields are replaced per cell.
    pub chain: ChainConfig,
    pub recon: ReconConfig,
    /// Object whose across-repetition depth spread is reported.
    pub label: Option<String>,
    pub raster: bool,
    pub raster_deconvolve: bool,
    pub raster_peak: PeakLocator,
}

impl SweepSetup {
    pub fn for_scene(scene: &Scene) -> Result<Self> {
        Ok(SweepSetup {
            chirp: ChirpConfig::paper(),
            illumination: IlluminationProfile::gaussian(
                scene.width,
                scene.height,
                1.0,
                crate::scene::DEFAULT_ILLUMINATION_SIGMA,
            )?,
            geometry: CollectionGeometry::default(),
            chain: ChainConfig::default(),
            recon: ReconConfig::default(),
            label: scene.label_names.contains_key("toroid").then(|| "toroid".to_string()),
            raster: true,
            raster_deconvolve: false,
            raster_peak: PeakLocator::default(),
        })
    }
}

/// Execution knobs that do not change results.
#[derive(Default)]
pub struct SweepOptions<'a> {
    pub exec: Exec,
    /// JSONL file of finished cells; existing cells are reused and new
    /// ones appended.
    pub checkpoint: Option<PathBuf>,
    /// Keep full depth maps in the results.
    pub keep_maps: bool,
    /// Called with `(finished, total)` after each cell.
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CellKey {
    rep: usize,
    psnr: f64,
    linewidth: f64,
}

impl CellKey {
    fn id(&self) -> (usize, u64, u64) {
        (self.rep, self.psnr.to_bits(), self.linewidth.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioResult {
    pub ratio: f64,
    pub m: usize,
    pub mse: f64,
    /// True when reconstruction found no object and the map is empty.
    pub failed: bool,
    /// Depths (0 if invalid) of the labeled pixels, in label order.
    pub label_depths: Vec<f64>,
    pub depths: Option<Vec<f64>>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterCell {
    pub mse: f64,
    pub label_depths: Vec<f64>,
    pub depths: Option<Vec<f64>>,
    pub seconds: f64,
}

/// One repetition at one PSNR and linewidth: a full-length acquisition and
/// a reconstruction for every ratio from its row prefixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub rep: usize,
    #[serde(with = "crate::spectral::psnr_serde")]
    pub psnr: f64,
    pub linewidth: f64,
    pub acquire_seconds: f64,
    pub ratios: Vec<RatioResult>,
    pub raster: Option<RasterCell>,
}

impl CellResult {
    fn key(&self) -> CellKey {
        CellKey {
            rep: self.rep,
            psnr: self.psnr,
            linewidth: self.linewidth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    #[serde(with = "crate::spectral::psnr_serde")]
    pub psnr: f64,
    pub linewidth: f64,
    pub mean_mse: f64,
    pub sem_mse: f64,
    pub label_std: Option<f64>,
    pub failures: usize,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterRow {
    #[serde(with = "crate::spectral::psnr_serde")]
    pub psnr: f64,
    pub linewidth: f64,
    pub mean_mse: f64,
    pub sem_mse: f64,
    pub label_std: Option<f64>,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub raster: Vec<RasterRow>,
    pub cells: Vec<CellResult>,
}

fn fmt_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        p.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub fn row(&self, ratio: f64, psnr: f64, linewidth: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.ratio == ratio && r.psnr == psnr && r.linewidth == linewidth)
    }

    /// `ratio,psnr,linewidth_hz,mean_mse_m2,sem_m2`.
    pub fn mse_csv(&self) -> String {
        let mut out = String::from("ratio,psnr,linewidth_hz,mean_mse_m2,sem_m2\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.ratio,
                fmt_psnr(r.psnr),
                r.linewidth,
                r.mean_mse,
                r.sem_mse
            );
        }
        out
    }

    /// `method,ratio,psnr,linewidth_hz,std_m`; raster rows leave `ratio`
    /// empty.
    pub fn uncertainty_csv(&self) -> String {
        let mut out = String::from("method,ratio,psnr,linewidth_hz,std_m\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "compressive,{},{},{},{}",
                r.ratio,
                fmt_psnr(r.psnr),
                r.linewidth,
                fmt_opt(r.label_std)
            );
        }
        for r in &self.raster {
            let _ = writeln!(out, "raster,,{},{},{}", fmt_psnr(r.psnr), r.linewidth, fmt_opt(r.label_std));
        }
        out
    }

    /// Wall-clock statistics; kept out of the CSVs so those stay
    /// reproducible.
    pub fn timing_json(&self) -> serde_json::Value {
        let acquire: Vec<f64> = self.cells.iter().map(|c| c.acquire_seconds).collect();
        let recon: Vec<f64> = self
            .cells
            .iter()
            .flat_map(|c| c.ratios.iter().map(|r| r.seconds))
            .collect();
        let raster: Vec<f64> = self
            .cells
            .iter()
            .filter_map(|c| c.raster.as_ref().map(|r| r.seconds))
            .collect();
        serde_json::json!({
            "cells": self.cells.len(),
            "acquire_seconds_total": acquire.iter().sum::<f64>(),
            "reconstruct_seconds_total": recon.iter().sum::<f64>(),
            "reconstruct_seconds_mean": if recon.is_empty() { 0.0 } else { mean(&recon) },
            "raster_seconds_total": raster.iter().sum::<f64>(),
        })
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(seed), |h, &p| splitmix(h ^ p))
}

/// Seed of the sensing matrix used by every cell of repetition `rep`.
pub fn sensing_seed(seed: u64, rep: usize) -> u64 {
    derive_seed(seed, &[1, rep as u64])
}

fn noise_seed(seed: u64, key: &CellKey) -> u64 {
    derive_seed(seed, &[2, key.rep as u64, key.psnr.to_bits(), key.linewidth.to_bits()])
}

/// FNV-1a, used to tie a checkpoint file to its inputs.
fn fingerprint(bytes: &[u8]) -> String {
    let h = bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    format!("{h:016x}")
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    fingerprint: String,
}

fn sweep_fingerprint(spec: &SweepSpec, setup: &SweepSetup, scene: &Scene, keep_maps: bool) -> Result<String> {
    let doc = serde_json::json!({
        "spec": spec,
        "setup": setup,
        "scene": scene,
        "keep_maps": keep_maps,
    });
    Ok(fingerprint(serde_json::to_string(&doc)?.as_bytes()))
}

fn load_checkpoint(path: &PathBuf, fp: &str) -> Result<Vec<CellResult>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(format!("opening {}", path.display()), e)),
    };
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        None => return Ok(Vec::new()),
        Some(l) => l.map_err(|e| Error::io(format!("reading {}", path.display()), e))?,
    };
    let header: CheckpointHeader = serde_json::from_str(&header)?;
    if header.fingerprint != fp {
        return Err(Error::param(
            "checkpoint",
            format!("{} was written by a different sweep configuration", path.display()),
        ));
    }
    let mut cells = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from an interrupted run is dropped and recomputed.
        match serde_json::from_str::<CellResult>(&line) {
            Ok(c) => cells.push(c),
            Err(_) => break,
        }
    }
    Ok(cells)
}

fn label_depths(depths: &[f64], mask: &[bool], pixels: &[usize]) -> Vec<f64> {
    pixels.iter().map(|&i| if mask[i] { depths[i] } else { 0.0 }).collect()
}

fn run_cell(
    key: &CellKey,
    spec: &SweepSpec,
    setup: &SweepSetup,
    scene: &Scene,
    returns: &[crate::fmcw::Return],
    pixels: &[usize],
    opts: &SweepOptions,
) -> Result<CellResult> {
    let n = scene.n();
    let chain = ChainConfig {
        noise: NoiseModel {
            beat_linewidth_fwhm: key.linewidth,
            psnr: key.psnr,
            seed: noise_seed(spec.seed, key),
        },
        ..setup.chain
    };
    let lo = setup.geometry.lo_amplitude();
    let t0 = Instant::now();
    let acq = Acquirer::new(returns, lo, &setup.chirp, &chain)?;
    let full = SensingMatrix::randomized(n, n, sensing_seed(spec.seed, key.rep))?;
    let mv_full = acq.acquire(&full, opts.exec)?;
    let acquire_seconds = t0.elapsed().as_secs_f64();

    let mut ratios = Vec::with_capacity(spec.sample_ratios.len());
    for &ratio in &spec.sample_ratios {
        let t = Instant::now();
        let m = ((ratio * n as f64).round() as usize).clamp(1, n);
        let a = full.prefix(m)?;
        let mv = mv_full.prefix(m)?;
        let (map, failed) = match reconstruct(&a, &mv, &setup.recon, &setup.chirp) {
            Ok(r) => (r.depth, false),
            Err(Error::EmptySupport(_)) => (DepthMap::empty(scene.width, scene.height), true),
            Err(e) => return Err(e),
        };
        ratios.push(RatioResult {
            ratio,
            m,
            mse: mse(&map, scene)?,
            failed,
            label_depths: label_depths(&map.depths, &map.mask, pixels),
            depths: opts.keep_maps.then(|| map.depths.clone()),
            seconds: t.elapsed().as_secs_f64(),
        });
    }

    let raster = if setup.raster {
        let t = Instant::now();
        let rchain = ChainConfig {
            deconvolve: setup.raster_deconvolve,
            ..chain
        };
        let racq = Acquirer::new(returns, lo, &setup.chirp, &rchain)?;
        let map = raster_with(&racq, scene, setup.raster_peak, opts.exec)?;
        Some(RasterCell {
            mse: mse(&map, scene)?,
            label_depths: label_depths(&map.depths, &map.mask, pixels),
            depths: opts.keep_maps.then(|| map.depths.clone()),
            seconds: t.elapsed().as_secs_f64(),
        })
    } else {
        None
    };
    Ok(CellResult {
        rep: key.rep,
        psnr: key.psnr,
        linewidth: key.linewidth,
        acquire_seconds,
        ratios,
        raster,
    })
}

/// Runs every (repetition, PSNR, linewidth) cell, each with one
/// critically sampled acquisition whose row prefixes serve all ratios, and
/// aggregates per (ratio, PSNR, linewidth).
pub fn run_sweep(spec: &SweepSpec, scene: &Scene, setup: &SweepSetup, opts: &SweepOptions) -> Result<SweepResult> {
    spec.validate()?;
    scene.validate()?;
    setup.recon.tv.validate()?;
    let returns = returns_from_scene(scene, &setup.illumination, &setup.geometry, &setup.chirp)?;
    let pixels = match &setup.label {
        Some(l) => scene.label_pixels(l)?,
        None => Vec::new(),
    };
    let truth_label: Vec<f64> = pixels.iter().map(|&i| scene.depth[i]).collect();

    let fp = sweep_fingerprint(spec, setup, scene, opts.keep_maps)?;
    let mut done: Vec<CellResult> = match &opts.checkpoint {
        Some(p) => load_checkpoint(p, &fp)?,
        None => Vec::new(),
    };
    let all = spec.cells();
    done.retain(|c| all.iter().any(|k| k.id() == c.key().id()));
    let todo: Vec<CellKey> = all
        .iter()
        .filter(|k| !done.iter().any(|c| c.key().id() == k.id()))
        .copied()
        .collect();

    let writer = match &opts.checkpoint {
        Some(p) => {
            // Rewrite the retained cells so a torn tail line is dropped.
            let mut f = std::fs::File::create(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))?;
            let mut text = serde_json::to_string(&CheckpointHeader { fingerprint: fp.clone() })? + "\n";
            for c in &done {
                text += &serde_json::to_string(c)?;
                text.push('\n');
            }
            f.write_all(text.as_bytes())
                .map_err(|e| Error::io(format!("writing {}", p.display()), e))?;
            Some(Mutex::new(f))
        }
        None => None,
    };

    let total = all.len();
    let finished = AtomicUsize::new(done.len());
    let fresh: Vec<CellResult> = opts
        .exec
        .map(todo.len(), |i| -> Result<CellResult> {
            let cell = run_cell(&todo[i], spec, setup, scene, &returns, &pixels, opts)?;
            if let Some(w) = &writer {
                let line = serde_json::to_string(&cell)? + "\n";
                let mut f = w.lock().unwrap_or_else(|e| e.into_inner());
                f.write_all(line.as_bytes())
                    .and_then(|_| f.flush())
                    .map_err(|e| Error::io("appending sweep checkpoint", e))?;
            }
            let k = finished.fetch_add(1, Ordering::SeqCst) + 1;
            if let Some(cb) = opts.progress {
                cb(k, total);
            }
            Ok(cell)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    done.extend(fresh);
    done.sort_by(|a, b| {
        (a.rep, a.psnr, a.linewidth)
            .partial_cmp(&(b.rep, b.psnr, b.linewidth))
            .expect("finite keys")
    });
    Ok(aggregate(spec, done, &truth_label, setup.label.is_some()))
}

fn aggregate(spec: &SweepSpec, cells: Vec<CellResult>, truth_label: &[f64], has_label: bool) -> SweepResult {
    let mut groups: BTreeMap<(u64, u64), Vec<&CellResult>> = BTreeMap::new();
    for c in &cells {
        groups.entry((c.psnr.to_bits(), c.linewidth.to_bits())).or_default().push(c);
    }
    let errors = |depths: &[f64]| -> Vec<f64> { depths.iter().zip(truth_label).map(|(d, t)| d - t).collect() };
    let mut rows = Vec::new();
    let mut raster = Vec::new();
    for &psnr in &spec.psnr_levels {
        for &linewidth in &spec.linewidths {
            let Some(group) = groups.get(&(psnr.to_bits(), linewidth.to_bits())) else {
                continue;
            };
            for (j, &ratio) in spec.sample_ratios.iter().enumerate() {
                let results: Vec<&RatioResult> = group.iter().map(|c| &c.ratios[j]).collect();
                let mses: Vec<f64> = results.iter().map(|r| r.mse).collect();
                let errs: Vec<Vec<f64>> = results.iter().map(|r| errors(&r.label_depths)).collect();
                rows.push(SweepRow {
                    ratio,
                    psnr,
                    linewidth,
                    mean_mse: mean(&mses),
                    sem_mse: sem(&mses),
                    label_std: has_label.then(|| uncertainty_from_errors(&errs)),
                    failures: results.iter().filter(|r| r.failed).count(),
                    mean_seconds: mean(&results.iter().map(|r| r.seconds).collect::<Vec<_>>()),
                });
            }
            let rs: Vec<&RasterCell> = group.iter().filter_map(|c| c.raster.as_ref()).collect();
            if !rs.is_empty() {
                let mses: Vec<f64> = rs.iter().map(|r| r.mse).collect();
                let errs: Vec<Vec<f64>> = rs.iter().map(|r| errors(&r.label_depths)).collect();
                raster.push(RasterRow {
                    psnr,
                    linewidth,
                    mean_mse: mean(&mses),
                    sem_mse: sem(&mses),
                    label_std: has_label.then(|| uncertainty_from_errors(&errs)),
                    mean_seconds: mean(&rs.iter().map(|r| r.seconds).collect::<Vec<_>>()),
                });
            }
        }
    }
    SweepResult { rows, raster, cells }
}
