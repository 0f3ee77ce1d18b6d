use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fmcw_cs::recon::{reconstruct, ReconConfig};
use fmcw_cs::scene::{builtin, returns_from_scene, CollectionGeometry, IlluminationProfile, DEFAULT_ILLUMINATION_SIGMA};
use fmcw_cs::spectral::{Acquirer, ChainConfig};
use fmcw_cs::{ChirpConfig, Exec, SensingMatrix};

fn setup(side: usize) -> (Acquirer, ChirpConfig) {
    let c = ChirpConfig::paper();
    let scene = builtin("paper-demo", side, side).unwrap();
    let illum = IlluminationProfile::gaussian(side, side, 1.0, DEFAULT_ILLUMINATION_SIGMA).unwrap();
    let geom = CollectionGeometry::default();
    let r = returns_from_scene(&scene, &illum, &geom, &c).unwrap();
    (Acquirer::new(&r, geom.lo_amplitude(), &c, &ChainConfig::default()).unwrap(), c)
}

fn policies() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn acquisition(cr: &mut Criterion) {
    let (acq, _) = setup(16);
    let a = SensingMatrix::randomized(256, 64, 1).unwrap();
    let mut g = cr.benchmark_group("acquire_16x16_m64");
    g.sample_size(10);
    for (name, exec) in policies() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| acq.acquire(&a, exec).unwrap()));
    }
    g.finish();
}

fn reconstruction(cr: &mut Criterion) {
    let (acq, c) = setup(64);
    let a = SensingMatrix::randomized(4096, 1024, 1).unwrap();
    let mv = acq.acquire(&a, Exec::Parallel).unwrap();
    let mut g = cr.benchmark_group("reconstruct_64x64_ratio_0.25");
    g.sample_size(10);
    for (name, exec) in policies() {
        let cfg = ReconConfig {
            exec,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| reconstruct(&a, &mv, &cfg, &c).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, acquisition, reconstruction);
criterion_main!(benches);
