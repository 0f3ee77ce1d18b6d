use super::*;
use crate::scene::{builtin, single_plane, DEFAULT_ILLUMINATION_SIGMA};

fn plane_map(w: usize, h: usize, depth: f64) -> DepthMap {
    let mut d = DepthMap::empty(w, h);
    d.depths = vec![depth; w * h];
    d.mask = vec![true; w * h];
    d
}

#[test]
fn mse_examples() {
    let scene = single_plane(4, 4, 10.0, 0.5).unwrap();
    assert_eq!(mse(&plane_map(4, 4, 10.0), &scene).unwrap(), 0.0);
    assert!((mse(&plane_map(4, 4, 10.1), &scene).unwrap() - 0.01).abs() < 1e-12);
    assert!((mse(&DepthMap::empty(4, 4), &scene).unwrap() - 100.0).abs() < 1e-12);
    assert!(mse(&DepthMap::empty(2, 8), &scene).is_err());
}

#[test]
fn uncertainty_examples() {
    let scene = builtin("paper-demo", 16, 16).unwrap();
    let truth = DepthMap {
        width: 16,
        height: 16,
        depths: scene.depth.clone(),
        mask: scene.depth.iter().map(|&d| d > 0.0).collect(),
        clamped: 0,
    };
    let same = vec![truth.clone(); 3];
    assert_eq!(object_depth_uncertainty(&same, &scene, "toroid").unwrap(), 0.0);

    let e = 0.05;
    let shift = |s: f64| {
        let mut d = truth.clone();
        d.depths.iter_mut().for_each(|v| *v += s);
        d
    };
    let u = object_depth_uncertainty(&[shift(e), shift(-e)], &scene, "toroid").unwrap();
    assert!((u - e * 2f64.sqrt()).abs() < 1e-12, "{u}");
    assert!(object_depth_uncertainty(std::slice::from_ref(&truth), &scene, "toroid").is_err());
    assert!(object_depth_uncertainty(&same, &scene, "no-such").is_err());
}

#[test]
fn statistics_oracle() {
    let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
    assert_eq!(mean(&xs), 5.0);
    // sum of squared deviations is 32
    assert!((sample_std(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    assert!((sem(&xs) - (32.0f64 / 7.0).sqrt() / 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(sem(&[3.0]), 0.0);
    assert_eq!(sample_std(&[3.0]), 0.0);
}

#[test]
fn spearman_oracle() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert!((spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap() - 1.0).abs() < 1e-12);
    assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    // d = (0, 0, 1, -1, 0): 1 - 6·2/(5·24) = 0.9
    assert!((spearman(&x, &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap() - 0.9).abs() < 1e-12);
    // ties: ranks of y are (1.5, 1.5, 3, 4); Pearson of ranks by hand
    let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]).unwrap();
    assert!((r - 0.9486832980505138).abs() < 1e-12, "{r}");
    assert!(spearman(&x, &x[..4]).is_err());
}

#[test]
fn flux_examples() {
    let f = flux_accounting(1e5, 1e-3, 10, 1, 1024).unwrap();
    assert_eq!(f.array_per_detector, 100.0);
    assert_eq!(f.compressive_per_projection, 5.0);
    assert!((f.ratio - 0.05).abs() < 1e-15);

    let eq = flux_accounting(1e6, 1e-3, 50, 100, 1024).unwrap();
    assert_eq!(eq.ratio, 1.0);

    let more = flux_accounting(1e6, 1e-3, 20, 100, 1024).unwrap();
    assert!(more.compressive_per_projection > more.array_per_detector);

    assert!(flux_accounting(1e6, 1e-3, 20, 2000, 1024).is_err());
    assert!(flux_accounting(0.0, 1e-3, 20, 1, 1024).is_err());
    assert!(flux_accounting(1.0, 1e-3, 0, 1, 1024).is_err());
}

fn setup_for(scene: &Scene) -> (IlluminationProfile, CollectionGeometry, ChirpConfig) {
    (
        IlluminationProfile::gaussian(scene.width, scene.height, 1.0, DEFAULT_ILLUMINATION_SIGMA).unwrap(),
        CollectionGeometry::default(),
        ChirpConfig::paper(),
    )
}

#[test]
fn raster_noiseless_far_plane() {
    let scene = single_plane(4, 4, 24.9, 0.8).unwrap();
    let (illum, geom, chirp) = setup_for(&scene);
    let d = raster_baseline(&scene, &illum, &geom, &chirp, &ChainConfig::noiseless(), &RasterOptions::default()).unwrap();
    assert_eq!(d.valid_count(), 16);
    for &v in &d.depths {
        assert!((v - 24.9).abs() <= chirp.range_resolution(), "{v}");
    }
}

#[test]
fn raster_leaves_empty_pixels_invalid() {
    let mut scene = Scene::empty(4, 4);
    scene.depth[6] = 7.5;
    scene.reflectivity[6] = 0.6;
    let (illum, geom, chirp) = setup_for(&scene);
    let d = raster_baseline(&scene, &illum, &geom, &chirp, &ChainConfig::noiseless(), &RasterOptions::default()).unwrap();
    assert_eq!(d.valid_count(), 1);
    assert!((d.depths[6] - 7.5).abs() <= chirp.range_resolution());
}

#[test]
fn raster_is_policy_independent() {
    let scene = builtin("paper-demo", 8, 8).unwrap();
    let (illum, geom, chirp) = setup_for(&scene);
    let chain = ChainConfig::default();
    let seq = RasterOptions {
        exec: Exec::Sequential,
        ..Default::default()
    };
    let a = raster_baseline(&scene, &illum, &geom, &chirp, &chain, &seq).unwrap();
    let b = raster_baseline(&scene, &illum, &geom, &chirp, &chain, &RasterOptions::default()).unwrap();
    assert_eq!(a, b);
}

fn tiny_sweep() -> (Scene, SweepSpec, SweepSetup) {
    let scene = builtin("paper-demo", 8, 8).unwrap();
    let spec = SweepSpec {
        sample_ratios: vec![0.5, 1.0],
        psnr_levels: vec![f64::INFINITY],
        repetitions: 1,
        linewidths: vec![1e5],
        seed: 3,
    };
    let setup = SweepSetup::for_scene(&scene).unwrap();
    (scene, spec, setup)
}

#[test]
fn single_cell_sweep_has_zero_sem() {
    let (scene, spec, setup) = tiny_sweep();
    let res = run_sweep(&spec, &scene, &setup, &SweepOptions::default()).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert_eq!(res.raster.len(), 1);
    for r in &res.rows {
        assert_eq!(r.sem_mse, 0.0);
        assert_eq!(r.label_std, Some(0.0));
        assert!(r.mean_mse.is_finite());
    }
    let csv = res.mse_csv();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("0.5,inf,100000,"));
    let unc = res.uncertainty_csv();
    assert!(unc.lines().last().unwrap().starts_with("raster,,inf,100000,"));
}

#[test]
fn sweep_is_deterministic_across_policies() {
    let (scene, mut spec, setup) = tiny_sweep();
    spec.repetitions = 2;
    spec.psnr_levels = vec![5.0];
    let a = run_sweep(&spec, &scene, &setup, &SweepOptions::default()).unwrap();
    let b = run_sweep(
        &spec,
        &scene,
        &setup,
        &SweepOptions {
            exec: Exec::Sequential,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(a.mse_csv(), b.mse_csv());
    assert_eq!(a.uncertainty_csv(), b.uncertainty_csv());
}

#[test]
fn sweep_resumes_from_checkpoint() {
    let (scene, mut spec, setup) = tiny_sweep();
    spec.repetitions = 2;
    spec.psnr_levels = vec![5.0];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cells.jsonl");
    let opts = SweepOptions {
        checkpoint: Some(path.clone()),
        ..Default::default()
    };
    let full = run_sweep(&spec, &scene, &setup, &opts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);

    // Drop one cell and leave a torn line, as if the run was interrupted.
    let mut lines: Vec<&str> = text.lines().take(2).collect();
    lines.push("{\"rep\":1,\"psn");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let calls = AtomicCounter::default();
    let cb = |_: usize, _: usize| calls.bump();
    let resumed = run_sweep(
        &spec,
        &scene,
        &setup,
        &SweepOptions {
            checkpoint: Some(path.clone()),
            progress: Some(&cb),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(calls.get(), 1);
    assert_eq!(resumed.mse_csv(), full.mse_csv());
    assert_eq!(resumed.uncertainty_csv(), full.uncertainty_csv());

    // A different configuration refuses the file.
    spec.seed = 99;
    assert!(run_sweep(&spec, &scene, &setup, &opts).is_err());
}

#[derive(Default)]
struct AtomicCounter(std::sync::atomic::AtomicUsize);

impl AtomicCounter {
    fn bump(&self) {
        self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
    }
    fn get(&self) -> usize {
        self.0.load(std::sync::atomic::Ordering::SeqCst)
    }
}

#[test]
fn sweep_spec_validation_and_json() {
    let spec = SweepSpec::default();
    spec.validate().unwrap();
    assert_eq!(spec.sample_ratios.len(), 50);
    assert_eq!(spec.sample_ratios[0], 0.02);
    let json = serde_json::to_string(&spec).unwrap();
    assert!(json.contains("\"inf\""));
    let back: SweepSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back, spec);
    for bad in [
        SweepSpec {
            sample_ratios: vec![0.5, 0.2],
            ..SweepSpec::default()
        },
        SweepSpec {
            sample_ratios: vec![1.5],
            ..SweepSpec::default()
        },
        SweepSpec {
            repetitions: 0,
            ..SweepSpec::default()
        },
        SweepSpec {
            psnr_levels: vec![-1.0],
            ..SweepSpec::default()
        },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn matched_peak_beats_argmax_under_broadening() {
    let scene = single_plane(4, 4, 12.0, 0.8).unwrap();
    let (illum, geom, chirp) = setup_for(&scene);
    let chain = ChainConfig::default();
    let spread = |peak| {
        let opts = RasterOptions {
            peak,
            ..Default::default()
        };
        let d = raster_baseline(&scene, &illum, &geom, &chirp, &chain, &opts).unwrap();
        let errs: Vec<f64> = d.depths.iter().map(|v| v - 12.0).collect();
        (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
    };
    let (argmax, matched) = (spread(PeakLocator::Argmax), spread(PeakLocator::Matched));
    assert!(matched < 0.05, "{matched}");
    assert!(matched < argmax, "{matched} vs {argmax}");
}
