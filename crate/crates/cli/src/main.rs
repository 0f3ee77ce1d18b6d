mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{Preset, RunConfig};
use fmcw_cs::evalbench::{
    self, flux_accounting, raster_baseline, run_sweep, PeakLocator, SweepOptions, SweepSetup,
};
use fmcw_cs::recon::reconstruct;
use fmcw_cs::scene::{self, returns_from_scene, Scene};
use fmcw_cs::spectral::{parse_psnr, Acquirer};
use fmcw_cs::{par, Error, SensingMatrix};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fmcw-cs", version, about = "Compressive FMCW LiDAR depth-imaging simulator")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Grid preset: desk is 32x32, paper is 128x128.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long, global = true, env = config::OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel loops (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a built-in scene and write it to a file.
    Scene(SceneCmd),
    /// Acquire compressive measurements of a scene and reconstruct depth.
    Acquire(AcquireCmd),
    /// Run a sampling-ratio × PSNR × linewidth sweep.
    Sweep(SweepCmd),
    /// Point-by-point raster scan baseline.
    Raster(RasterCmd),
    /// Photon budget per detector: array versus compressive.
    Flux(FluxCmd),
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
}

#[derive(Args)]
struct SourceArgs {
    /// Built-in scene name or path to a .json / text scene file.
    #[arg(long)]
    scene: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    /// Seed for the sensing matrix and noise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct NoiseArgs {
    /// Peak SNR of each spectrum (number or `inf`).
    #[arg(long, value_parser = parse_psnr)]
    psnr: Option<f64>,
    /// Beat-note linewidth FWHM in Hz.
    #[arg(long)]
    linewidth: Option<f64>,
}

#[derive(Args)]
struct SceneCmd {
    /// One of paper-demo, single-plane, two-plane, torus.
    #[arg(long, default_value = "paper-demo")]
    generator: String,
    #[command(flatten)]
    grid: GridArgs,
    /// Plane or toroid depth in metres (single-plane, torus).
    #[arg(long)]
    depth: Option<f64>,
    /// Written as JSON for a .json extension, text otherwise.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct AcquireCmd {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Measurements as a fraction of the pixel count.
    #[arg(long, conflicts_with = "m")]
    ratio: Option<f64>,
    /// Number of projections.
    #[arg(long)]
    m: Option<usize>,
    /// Write the five spectrum stages of both detectors for projection K.
    #[arg(long = "dump-stages", value_name = "K")]
    dump_stages: Vec<usize>,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    scene: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Comma-separated sampling ratios.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Comma-separated PSNR levels (`inf` allowed).
    #[arg(long, value_delimiter = ',', value_parser = parse_psnr)]
    psnr: Option<Vec<f64>>,
    /// Comma-separated linewidths in Hz.
    #[arg(long, value_delimiter = ',')]
    linewidths: Option<Vec<f64>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Skip the raster baseline.
    #[arg(long)]
    no_raster: bool,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct RasterCmd {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Apply Wiener deconvolution before peak finding.
    #[arg(long)]
    deconvolve: bool,
    #[arg(long, value_parser = parse_peak)]
    peak: Option<PeakLocator>,
}

#[derive(Args)]
struct FluxCmd {
    /// Returned photon rate (1/s).
    #[arg(long)]
    rate: f64,
    /// Integration time (s).
    #[arg(long)]
    time: f64,
    /// Compressive projections.
    #[arg(long)]
    m: usize,
    /// Lit array pixels.
    #[arg(long)]
    alpha: usize,
    /// Array pixels.
    #[arg(long)]
    beta: usize,
}

fn parse_peak(s: &str) -> Result<PeakLocator, String> {
    match s {
        "argmax" => Ok(PeakLocator::Argmax),
        "matched" => Ok(PeakLocator::Matched),
        _ => Err(format!("expected `argmax` or `matched`, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match par::with_workers(cli.workers, || run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    ensure!(cli.workers != Some(0), "--workers must be >= 1");
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = cli.preset {
        cfg.preset = p;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    match &cli.command {
        Command::Scene(c) => cmd_scene(cfg, c),
        Command::Acquire(c) => cmd_acquire(cfg, c),
        Command::Sweep(c) => cmd_sweep(cfg, c),
        Command::Raster(c) => cmd_raster(cfg, c),
        Command::Flux(c) => cmd_flux(c),
    }
}

fn apply_grid(cfg: &mut RunConfig, g: &GridArgs) {
    if g.width.is_some() {
        cfg.width = g.width;
    }
    if g.height.is_some() {
        cfg.height = g.height;
    }
}

fn apply_source(cfg: &mut RunConfig, s: &SourceArgs) {
    if let Some(sc) = &s.scene {
        cfg.scene = sc.clone();
    }
    apply_grid(cfg, &s.grid);
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
}

fn apply_noise(cfg: &mut RunConfig, n: &NoiseArgs) {
    if let Some(p) = n.psnr {
        cfg.chain.noise.psnr = p;
    }
    if let Some(lw) = n.linewidth {
        cfg.chain.noise.beat_linewidth_fwhm = lw;
    }
    cfg.chain.noise.seed = cfg.seed;
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json(dir: &Path, name: &str, v: &serde_json::Value) -> Result<()> {
    write(dir, name, serde_json::to_string_pretty(v)? + "\n")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_scene(mut cfg: RunConfig, c: &SceneCmd) -> Result<()> {
    apply_grid(&mut cfg, &c.grid);
    cfg.validate()?;
    let (w, h) = cfg.side();
    let s = match (c.generator.as_str(), c.depth) {
        ("single-plane", Some(d)) => scene::single_plane(w, h, d, 0.8)?,
        ("torus", Some(d)) => scene::torus_only(w, h, d)?,
        (g, Some(_)) => bail!("--depth applies to single-plane and torus, not `{g}`"),
        (g, None) => scene::builtin(g, w, h)?,
    };
    if let Some(parent) = c.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    if c.output.extension().is_some_and(|e| e == "json") {
        scene::save_scene_json(&s, &c.output)?;
    } else {
        scene::save_scene_text(&s, &c.output)?;
    }
    eprintln!(
        "wrote {}x{} scene `{}` to {} (depths {:?})",
        w,
        h,
        c.generator,
        c.output.display(),
        s.distinct_depths()
    );
    Ok(())
}

/// Everything needed to simulate one scene, validated up front.
struct Prepared {
    scene: Scene,
    acquirer: Acquirer,
    load_seconds: f64,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let t = Instant::now();
    let scene = cfg.load_scene()?;
    let illum = cfg.illumination_for(&scene)?;
    let returns = returns_from_scene(&scene, &illum, &cfg.geometry, &cfg.chirp)?;
    let acquirer = Acquirer::new(&returns, cfg.geometry.lo_amplitude(), &cfg.chirp, &cfg.chain)?;
    Ok(Prepared {
        scene,
        acquirer,
        load_seconds: t.elapsed().as_secs_f64(),
    })
}

fn cmd_acquire(mut cfg: RunConfig, c: &AcquireCmd) -> Result<()> {
    apply_source(&mut cfg, &c.source);
    apply_noise(&mut cfg, &c.noise);
    if c.ratio.is_some() {
        cfg.sample_ratio = c.ratio;
        cfg.m = None;
    }
    if c.m.is_some() {
        cfg.m = c.m;
        cfg.sample_ratio = None;
    }
    let p = prepare(&cfg)?;
    let n = p.scene.n();
    let m = cfg.measurements(n);
    for &k in &c.dump_stages {
        ensure!(k < m, "--dump-stages {k} is out of range for m = {m}");
    }
    let a = SensingMatrix::randomized(n, m, cfg.seed)?;

    let t = Instant::now();
    let mv = p.acquirer.acquire(&a, cfg.recon.exec)?;
    let acquire_seconds = t.elapsed().as_secs_f64();
    let mut stages = Vec::new();
    for &k in &c.dump_stages {
        let (pos, neg) = p.acquirer.projection_stages(&a, k)?;
        for (det, st) in [("pos", pos), ("neg", neg)] {
            for (name, spec) in st.iter() {
                stages.push((format!("stages/k{k}_{det}_{name}.csv"), spec.to_csv()));
            }
        }
    }

    let t = Instant::now();
    let (depth, failure) = match reconstruct(&a, &mv, &cfg.recon, &cfg.chirp) {
        Ok(r) => (r.depth, None),
        Err(e @ Error::EmptySupport(_)) => (fmcw_cs::DepthMap::empty(p.scene.width, p.scene.height), Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let recon_seconds = t.elapsed().as_secs_f64();
    let mse = evalbench::mse(&depth, &p.scene)?;

    let dir = cfg.output_dir();
    create_dir(&dir)?;
    write(&dir, "measurements.csv", mv.to_csv())?;
    depth.write_all(&dir, "depth", cfg.chirp.max_range())?;
    if !stages.is_empty() {
        create_dir(&dir.join("stages"))?;
        for (name, csv) in &stages {
            write(&dir, name, csv)?;
        }
    }
    write_json(
        &dir,
        "metadata.json",
        &json!({
            "command": "acquire",
            "config": cfg,
            "seed": cfg.seed,
            "n": n,
            "m": m,
            "stored_scalars": mv.stored_scalars(),
            "mse_m2": mse,
            "valid_pixels": depth.valid_count(),
            "reconstruction_failure": failure,
            "timing": {
                "load_seconds": p.load_seconds,
                "acquire_seconds": acquire_seconds,
                "reconstruct_seconds": recon_seconds,
            },
        }),
    )?;
    eprintln!(
        "m = {m} of n = {n}, MSE {mse:.4} m^2, {} valid pixels, wrote {}",
        depth.valid_count(),
        dir.display()
    );
    if let Some(f) = failure {
        eprintln!("warning: {f}");
    }
    Ok(())
}

fn cmd_raster(mut cfg: RunConfig, c: &RasterCmd) -> Result<()> {
    apply_source(&mut cfg, &c.source);
    apply_noise(&mut cfg, &c.noise);
    if c.deconvolve {
        cfg.raster.deconvolve = true;
    }
    if let Some(pk) = c.peak {
        cfg.raster.peak = pk;
    }
    cfg.validate()?;
    let scene = cfg.load_scene()?;
    let illum = cfg.illumination_for(&scene)?;
    let t = Instant::now();
    let depth = raster_baseline(&scene, &illum, &cfg.geometry, &cfg.chirp, &cfg.chain, &cfg.raster)?;
    let seconds = t.elapsed().as_secs_f64();
    let mse = evalbench::mse(&depth, &scene)?;
    let dir = cfg.output_dir();
    create_dir(&dir)?;
    depth.write_all(&dir, "raster", cfg.chirp.max_range())?;
    write_json(
        &dir,
        "metadata.json",
        &json!({
            "command": "raster",
            "config": cfg,
            "seed": cfg.seed,
            "mse_m2": mse,
            "valid_pixels": depth.valid_count(),
            "timing": { "raster_seconds": seconds },
        }),
    )?;
    eprintln!("raster MSE {mse:.4} m^2, wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(mut cfg: RunConfig, c: &SweepCmd) -> Result<()> {
    if let Some(sc) = &c.scene {
        cfg.scene = sc.clone();
    }
    apply_grid(&mut cfg, &c.grid);
    cfg.seed = c.seed;
    let spec = &mut cfg.sweep;
    spec.seed = c.seed;
    if let Some(r) = &c.ratios {
        spec.sample_ratios = r.clone();
    }
    if let Some(p) = &c.psnr {
        spec.psnr_levels = p.clone();
    }
    if let Some(l) = &c.linewidths {
        spec.linewidths = l.clone();
    }
    if let Some(r) = c.reps {
        spec.repetitions = r;
    }
    cfg.validate()?;
    cfg.sweep.validate().context("sweep")?;
    let scene = cfg.load_scene()?;
    let label = match &cfg.label {
        Some(l) if l.is_empty() => None,
        Some(l) => Some(l.clone()),
        None => scene.label_names.contains_key("toroid").then(|| "toroid".to_string()),
    };
    if let Some(l) = &label {
        scene.label_pixels(l)?;
    }
    let setup = SweepSetup {
        chirp: cfg.chirp,
        illumination: cfg.illumination_for(&scene)?,
        geometry: cfg.geometry,
        chain: cfg.chain,
        recon: cfg.recon,
        label,
        raster: !c.no_raster,
        raster_deconvolve: cfg.raster.deconvolve,
        raster_peak: cfg.raster.peak,
    };

    let dir = cfg.output_dir();
    create_dir(&dir)?;
    let checkpoint = dir.join("cells.jsonl");
    if !c.resume && checkpoint.exists() {
        fs::remove_file(&checkpoint).with_context(|| format!("removing stale {}", checkpoint.display()))?;
    }
    let progress = |done: usize, total: usize| eprintln!("[{done}/{total}] cells done");
    let opts = SweepOptions {
        exec: cfg.recon.exec,
        checkpoint: Some(checkpoint),
        keep_maps: false,
        progress: Some(&progress),
    };
    let t = Instant::now();
    let res = run_sweep(&cfg.sweep, &scene, &setup, &opts)?;
    let seconds = t.elapsed().as_secs_f64();

    write(&dir, "sweep_mse.csv", res.mse_csv())?;
    write(&dir, "toroid_uncertainty.csv", res.uncertainty_csv())?;
    let mut timing = res.timing_json();
    timing["wall_seconds"] = json!(seconds);
    write_json(&dir, "timing.json", &timing)?;
    write_json(
        &dir,
        "metadata.json",
        &json!({
            "command": "sweep",
            "config": cfg,
            "seed": cfg.seed,
            "n": scene.n(),
            "cells": res.cells.len(),
        }),
    )?;
    eprintln!("{} rows, wrote {}", res.rows.len(), dir.display());
    Ok(())
}

fn cmd_flux(c: &FluxCmd) -> Result<()> {
    let r = flux_accounting(c.rate, c.time, c.m, c.alpha, c.beta)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}
