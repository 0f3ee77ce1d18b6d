use fmcw_cs::recon::{haar, ls_on_support, select_support, tv_minimize, tv_objective, LsSolver, TvConfig};
use fmcw_cs::sensing::{fwht, hadamard_entry};
use fmcw_cs::spectral::{difference, inject_noise, Acquirer, ChainConfig};
use fmcw_cs::{scene, ChirpConfig, Exec, NoiseModel, SensingMatrix, Spectrum};
use proptest::prelude::*;

fn pow2() -> impl Strategy<Value = usize> {
    (0u32..=8).prop_map(|k| 1usize << k)
}

fn square_pow2() -> impl Strategy<Value = usize> {
    (0u32..=4).prop_map(|k| 1usize << (2 * k))
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fwht_matches_dense_hadamard((n, x) in pow2().prop_flat_map(|n| (Just(n), vec_of(n)))) {
        let mut fast = x.clone();
        fwht(&mut fast);
        for (r, &v) in fast.iter().enumerate() {
            let dense: f64 = (0..n).map(|c| hadamard_entry(r, c) * x[c]).sum();
            prop_assert!((v - dense).abs() <= 1e-9 * (1.0 + dense.abs()), "row {}: {} vs {}", r, v, dense);
        }
    }

    #[test]
    fn sensing_apply_matches_dense(
        (n, x) in pow2().prop_flat_map(|n| (Just(n), vec_of(n))),
        frac in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let m = ((frac * n as f64).ceil() as usize).clamp(1, n);
        let a = SensingMatrix::randomized(n, m, seed).unwrap();
        let y = a.apply(&x).unwrap();
        let dense = a.to_dense();
        for k in 0..m {
            let want = dot(&dense[k], &x);
            prop_assert!((y[k] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn sensing_adjoint_identity(
        (n, x) in pow2().prop_flat_map(|n| (Just(n), vec_of(n))),
        ys in vec_of(256),
        frac in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let m = ((frac * n as f64).ceil() as usize).clamp(1, n);
        let a = SensingMatrix::randomized(n, m, seed).unwrap();
        let y = &ys[..m];
        let lhs = dot(&a.apply(&x).unwrap(), y);
        let rhs = dot(&x, &a.apply_adjoint(y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn haar_is_orthonormal((n, x) in square_pow2().prop_flat_map(|n| (Just(n), vec_of(n))), other in vec_of(256)) {
        let c = haar::forward(&x).unwrap();
        let back = haar::inverse(&c).unwrap();
        for (p, q) in back.iter().zip(&x) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
        let e0 = dot(&x, &x);
        prop_assert!((dot(&c, &c) - e0).abs() <= 1e-10 * (1.0 + e0));
        // ⟨Ψx, z⟩ = ⟨x, Ψᵀz⟩ with Ψᵀ = Ψ⁻¹
        let z = &other[..n];
        let lhs = dot(&c, z);
        let rhs = dot(&x, &haar::inverse(z).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn background_cancels_binwise(
        (p, q, b) in (1usize..300).prop_flat_map(|len| (
            prop::collection::vec(0.0f64..5.0, len),
            prop::collection::vec(0.0f64..5.0, len),
            prop::collection::vec(0.0f64..1e3, len),
        )),
    ) {
        let plain = difference(&Spectrum::new(p.clone(), 1e3), &Spectrum::new(q.clone(), 1e3)).unwrap();
        let add = |s: &[f64]| Spectrum::new(s.iter().zip(&b).map(|(x, y)| x + y).collect(), 1e3);
        let with_bg = difference(&add(&p), &add(&q)).unwrap();
        for (u, v) in plain.amplitudes.iter().zip(&with_bg.amplitudes) {
            prop_assert!((u - v).abs() <= 1e-9);
        }
    }

    #[test]
    fn randomized_matrix_is_seed_deterministic(n in pow2(), seed in any::<u64>()) {
        let a = SensingMatrix::randomized(n, n, seed).unwrap();
        let b = SensingMatrix::randomized(n, n, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn noise_is_seed_deterministic(seed in any::<u64>(), stream in any::<u64>(), psnr in 0.5f64..50.0) {
        let spec = Spectrum::new((0..512).map(|i| ((i as f64) / 40.0).sin().abs()).collect(), 1e3);
        let model = NoiseModel { beat_linewidth_fwhm: 0.0, psnr, seed };
        let a = inject_noise(&spec, &model, stream).unwrap();
        let b = inject_noise(&spec, &model, stream).unwrap();
        prop_assert!(a.amplitudes.iter().zip(&b.amplitudes).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tv_objective_trace_is_monotone(
        (side, img) in (2u32..=4).prop_flat_map(|k| {
            let side = 1usize << k;
            (Just(side), prop::collection::vec(0.0f64..1.0, side * side))
        }),
        frac in 0.2f64..=1.0,
        seed in any::<u64>(),
    ) {
        let n = side * side;
        let m = ((frac * n as f64) as usize).max(1);
        let a = SensingMatrix::randomized(n, m, seed).unwrap();
        let y = a.apply(&img).unwrap();
        let out = tv_minimize(&a, &y, &TvConfig::default()).unwrap();
        for w in out.objective.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", out.objective);
        }
        let at_zero = tv_objective(&a, &vec![0.0; n], &y, out.alpha).unwrap();
        let last = *out.objective.last().unwrap();
        prop_assert!(last <= at_zero * (1.0 + 1e-12));
        let direct = tv_objective(&a, &out.image, &y, out.alpha).unwrap();
        prop_assert!((direct - last).abs() <= 1e-9 * (1.0 + last.abs()));
    }

    #[test]
    fn ls_gradient_matches_finite_differences(
        (side, img, mask_bits) in (2u32..=4).prop_flat_map(|k| {
            let side = 1usize << k;
            (
                Just(side),
                prop::collection::vec(-1.0f64..1.0, side * side),
                prop::collection::vec(any::<bool>(), side * side),
            )
        }),
        seed in any::<u64>(),
        s_seed in any::<u64>(),
    ) {
        let n = side * side;
        let mut mask = mask_bits;
        mask[0] = true;
        let m = n / 2;
        let a = SensingMatrix::randomized(n, m, seed).unwrap();
        let y = a.apply(&img).unwrap();
        let support = select_support(&mask, m, 1.0 / 3.0).unwrap();
        let k = support.indices.len();

        // f(s) = ‖A Ψ⁻¹ Pᵀ s − y‖²
        let synth = |s: &[f64]| {
            let mut c = vec![0.0; n];
            for (&i, &v) in support.indices.iter().zip(s) {
                c[i] = v;
            }
            a.apply(&haar::inverse(&c).unwrap()).unwrap()
        };
        let f = |s: &[f64]| synth(s).iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        let grad = |s: &[f64]| {
            let r: Vec<f64> = synth(s).iter().zip(&y).map(|(p, q)| 2.0 * (p - q)).collect();
            let c = haar::forward(&a.apply_adjoint(&r).unwrap()).unwrap();
            support.indices.iter().map(|&i| c[i]).collect::<Vec<f64>>()
        };

        let s: Vec<f64> = (0..k)
            .map(|j| ((s_seed.wrapping_mul(j as u64 + 1) >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0)
            .collect();
        let g = grad(&s);
        let h = 1e-5;
        for j in 0..k {
            let (mut sp, mut sm) = (s.clone(), s.clone());
            sp[j] += h;
            sm[j] -= h;
            let fd = (f(&sp) - f(&sm)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * (1.0 + g[j].abs()), "coef {}: fd {} vs {}", j, fd, g[j]);
        }

        // The solver's output is a stationary point of the same objective.
        let out = ls_on_support(&a, &y, &support, &mask, LsSolver::Lbfgs).unwrap();
        let g_opt = grad(&out.coeffs);
        let scale = grad(&vec![0.0; k]).iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let gnorm = g_opt.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(gnorm <= 1e-5 * scale, "{} vs {}", gnorm, scale);
    }
}

#[test]
fn acquisition_is_bit_identical_across_runs_and_policies() {
    let s = scene::builtin("paper-demo", 8, 8).unwrap();
    let c = ChirpConfig::paper();
    let illum = scene::IlluminationProfile::gaussian(8, 8, 1.0, scene::DEFAULT_ILLUMINATION_SIGMA).unwrap();
    let geom = scene::CollectionGeometry::default();
    let r = scene::returns_from_scene(&s, &illum, &geom, &c).unwrap();
    let chain = ChainConfig::default();
    let a = SensingMatrix::randomized(64, 32, 5).unwrap();
    let run = |exec| {
        Acquirer::new(&r, geom.lo_amplitude(), &c, &chain)
            .unwrap()
            .acquire(&a, exec)
            .unwrap()
    };
    let first = run(Exec::Parallel);
    for mv in [run(Exec::Parallel), run(Exec::Sequential)] {
        assert!(first.y_i.iter().zip(&mv.y_i).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(first.y_inu.iter().zip(&mv.y_inu).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
