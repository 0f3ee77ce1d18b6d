use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::haar::square_side;
use crate::error::{Error, Result};
use crate::sensing::SensingMatrix;

/// Settings for [`tv_minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvConfig {
    /// TV weight. `None` picks `2⁻⁴·‖Aᵀy‖∞`.
    pub alpha: Option<f64>,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Relative change of `x` that ends an inner loop.
    pub inner_tolerance: f64,
    /// Initial penalty as a fraction of the data-term curvature `2n`.
    pub penalty_start: f64,
    /// Penalty multiplier applied after each outer iteration.
    pub penalty_growth: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig {
            alpha: None,
            max_outer_iters: 15,
            max_inner_iters: 60,
            inner_tolerance: 1e-5,
            penalty_start: 0.02,
            penalty_growth: 2.0,
        }
    }
}

impl TvConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::param("alpha", format!("must be finite and > 0, got {a}")));
            }
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::param("iterations", "outer and inner iteration counts must be >= 1"));
        }
        if !(self.inner_tolerance >= 0.0) {
            return Err(Error::param("inner_tolerance", "must be >= 0"));
        }
        if !(self.penalty_start > 0.0) || !self.penalty_start.is_finite() {
            return Err(Error::param("penalty_start", "must be finite and > 0"));
        }
        if !(self.penalty_growth >= 1.0) || !self.penalty_growth.is_finite() {
            return Err(Error::param("penalty_growth", "must be finite and >= 1"));
        }
        Ok(())
    }
}

/// Result of [`tv_minimize`].
#[derive(Debug, Clone)]
pub struct TvOutput {
    pub image: Vec<f64>,
    pub alpha: f64,
    /// Objective of the returned iterate after each outer iteration.
    pub objective: Vec<f64>,
    /// False when the last inner loop hit its iteration cap.
    pub converged: bool,
}

/// Periodic forward differences of a row-major `side × side` image.
pub(crate) fn gradient(x: &[f64], side: usize) -> (Vec<f64>, Vec<f64>) {
    let mut h = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    for r in 0..side {
        let rn = (r + 1) % side;
        for c in 0..side {
            let cn = (c + 1) % side;
            let i = r * side + c;
            h[i] = x[r * side + cn] - x[i];
            v[i] = x[rn * side + c] - x[i];
        }
    }
    (h, v)
}

/// Adjoint of [`gradient`].
pub(crate) fn divergence_adjoint(h: &[f64], v: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; h.len()];
    for r in 0..side {
        let rp = (r + side - 1) % side;
        for c in 0..side {
            let cp = (c + side - 1) % side;
            let i = r * side + c;
            out[i] = (h[r * side + cp] - h[i]) + (v[rp * side + c] - v[i]);
        }
    }
    out
}

/// Anisotropic periodic total variation.
pub fn total_variation(x: &[f64], side: usize) -> f64 {
    let (h, v) = gradient(x, side);
    h.iter().chain(&v).map(|d| d.abs()).sum()
}

/// `‖Ax − y‖² + α·TV(x)`.
pub fn tv_objective(a: &SensingMatrix, x: &[f64], y: &[f64], alpha: f64) -> Result<f64> {
    let side = square_side(x.len())?;
    let r = a.apply(x)?;
    let data: f64 = r.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum();
    Ok(data + alpha * total_variation(x, side))
}

/// Solves `(c·I + β·DᵀD)x = rhs` by diagonalizing DᵀD with a 2D FFT.
struct PeriodicSolver {
    side: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Eigenvalues `4sin²(πk/side)` of the 1D periodic Laplacian.
    lam: Vec<f64>,
}

impl PeriodicSolver {
    fn new(side: usize) -> Self {
        let mut p = FftPlanner::new();
        let lam = (0..side)
            .map(|k| 4.0 * (std::f64::consts::PI * k as f64 / side as f64).sin().powi(2))
            .collect();
        PeriodicSolver {
            side,
            fwd: p.plan_fft_forward(side),
            inv: p.plan_fft_inverse(side),
            lam,
        }
    }

    fn transpose(&self, buf: &mut [Complex64]) {
        let s = self.side;
        for r in 0..s {
            for c in r + 1..s {
                buf.swap(r * s + c, c * s + r);
            }
        }
    }

    fn solve(&self, rhs: &[f64], c: f64, beta: f64) -> Vec<f64> {
        let s = self.side;
        let mut buf: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        self.transpose(&mut buf);
        self.fwd.process(&mut buf);
        for (l, row) in buf.chunks_mut(s).enumerate() {
            for (k, z) in row.iter_mut().enumerate() {
                *z /= c + beta * (self.lam[l] + self.lam[k]);
            }
        }
        self.inv.process(&mut buf);
        self.transpose(&mut buf);
        self.inv.process(&mut buf);
        let scale = 1.0 / (s * s) as f64;
        buf.iter().map(|z| z.re * scale).collect()
    }
}

fn shrink(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Minimizes `‖Ax − y‖² + α·TV(x)` with a linearized augmented-Lagrangian
/// method: soft-threshold the split gradient variable, take a proximal
/// gradient step on the data term whose quadratic part is inverted by FFT,
/// update the scaled multiplier. The penalty grows geometrically across
/// outer iterations. The best iterate seen (including `x = 0`) is returned.
pub fn tv_minimize(a: &SensingMatrix, y: &[f64], tv: &TvConfig) -> Result<TvOutput> {
    tv.validate()?;
    let n = a.n();
    let side = square_side(n)?;
    if y.len() != a.m() {
        return Err(Error::LengthMismatch {
            expected: a.m(),
            actual: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurements"));
    }
    let aty = a.apply_adjoint(y)?;
    let scale = aty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let alpha = tv.alpha.unwrap_or(scale / 16.0);
    let zero = vec![0.0; n];
    if scale == 0.0 {
        return Ok(TvOutput {
            image: zero,
            alpha: tv.alpha.unwrap_or(0.0),
            objective: vec![0.0],
            converged: true,
        });
    }

    let solver = PeriodicSolver::new(side);
    // Data term curvature bound: ‖2AᵀA‖ = 2n.
    let c = 2.0 * n as f64;
    let mut beta = tv.penalty_start * c;

    let mut best = zero.clone();
    let mut best_obj = tv_objective(a, &zero, y, alpha)?;
    let mut x: Vec<f64> = aty.iter().map(|v| v / n as f64).collect();
    let mut uh = vec![0.0; n];
    let mut uv = vec![0.0; n];
    let mut history = Vec::with_capacity(tv.max_outer_iters);
    let mut converged = false;

    for _ in 0..tv.max_outer_iters {
        converged = false;
        for _ in 0..tv.max_inner_iters {
            let (h, v) = gradient(&x, side);
            let t = alpha / beta;
            let wh: Vec<f64> = h.iter().zip(&uh).map(|(d, u)| shrink(d + u, t)).collect();
            let wv: Vec<f64> = v.iter().zip(&uv).map(|(d, u)| shrink(d + u, t)).collect();
            let resid: Vec<f64> = a.apply(&x)?.iter().zip(y).map(|(p, q)| p - q).collect();
            let grad = a.apply_adjoint(&resid)?;
            let dh: Vec<f64> = wh.iter().zip(&uh).map(|(w, u)| w - u).collect();
            let dv: Vec<f64> = wv.iter().zip(&uv).map(|(w, u)| w - u).collect();
            let dtw = divergence_adjoint(&dh, &dv, side);
            let rhs: Vec<f64> = (0..n).map(|i| c * x[i] - 2.0 * grad[i] + beta * dtw[i]).collect();
            let next = solver.solve(&rhs, c, beta);

            let (h, v) = gradient(&next, side);
            for i in 0..n {
                uh[i] += h[i] - wh[i];
                uv[i] += v[i] - wv[i];
            }
            let diff: f64 = next.iter().zip(&x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = next.iter().map(|p| p * p).sum::<f64>().sqrt();
            x = next;
            if diff <= tv.inner_tolerance * norm.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        let obj = tv_objective(a, &x, y, alpha)?;
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&x);
        }
        history.push(best_obj);
        beta *= tv.penalty_growth;
        for u in uh.iter_mut().chain(uv.iter_mut()) {
            *u /= tv.penalty_growth;
        }
    }
    Ok(TvOutput {
        image: best,
        alpha,
        objective: history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn phantom(side: usize) -> Vec<f64> {
        let s = side as f64;
        let mut x = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                let (rf, cf) = (r as f64, c as f64);
                let i = r * side + c;
                if rf >= s / 8.0 && rf < s / 2.0 && cf >= s / 8.0 && cf < s / 2.0 {
                    x[i] = 1.0;
                }
                if (rf - 0.7 * s).powi(2) + (cf - 0.7 * s).powi(2) < (0.18 * s).powi(2) {
                    x[i] = 0.6;
                }
            }
        }
        x
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let e: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        e / b.iter().map(|q| q * q).sum::<f64>().sqrt()
    }

    #[test]
    fn gradient_adjoint_is_consistent() {
        let side = 8;
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 13) as f64 - 6.0).collect();
        let p: Vec<f64> = (0..64).map(|i| ((i * 11) % 7) as f64 * 0.5).collect();
        let q: Vec<f64> = (0..64).map(|i| ((i * 5) % 9) as f64 - 4.0).collect();
        let (h, v) = gradient(&x, side);
        let lhs: f64 = h.iter().zip(&p).chain(v.iter().zip(&q)).map(|(a, b)| a * b).sum();
        let dt = divergence_adjoint(&p, &q, side);
        let rhs: f64 = x.iter().zip(&dt).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn periodic_solver_inverts_operator() {
        let side = 16;
        let solver = PeriodicSolver::new(side);
        let x: Vec<f64> = (0..256).map(|i| ((i * 7) % 17) as f64).collect();
        let (h, v) = gradient(&x, side);
        let dtd = divergence_adjoint(&h, &v, side);
        let rhs: Vec<f64> = x.iter().zip(&dtd).map(|(a, b)| 3.0 * a + 0.7 * b).collect();
        let got = solver.solve(&rhs, 3.0, 0.7);
        assert!(rel_err(&got, &x) < 1e-12);
    }

    #[test]
    fn zero_measurements_give_zero_image() {
        let a = SensingMatrix::randomized(64, 20, 1).unwrap();
        let out = tv_minimize(&a, &[0.0; 20], &TvConfig::default()).unwrap();
        assert!(out.image.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_sampling_with_small_alpha_recovers_phantom() {
        let side = 16;
        let x0 = phantom(side);
        let a = SensingMatrix::randomized(side * side, side * side, 3).unwrap();
        let y = a.apply(&x0).unwrap();
        let amax = a.apply_adjoint(&y).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tv = TvConfig {
            alpha: Some(1e-3 * amax),
            ..Default::default()
        };
        let out = tv_minimize(&a, &y, &tv).unwrap();
        assert!(rel_err(&out.image, &x0) < 0.02, "{}", rel_err(&out.image, &x0));
    }

    #[test]
    fn objective_is_monotone_and_below_zero_image() {
        let side = 16;
        let x0 = phantom(side);
        let a = SensingMatrix::randomized(256, 64, 9).unwrap();
        let y = a.apply(&x0).unwrap();
        let out = tv_minimize(&a, &y, &TvConfig::default()).unwrap();
        for w in out.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        let at_zero = tv_objective(&a, &[0.0; 256], &y, out.alpha).unwrap();
        assert!(*out.objective.last().unwrap() <= at_zero);
        assert!(rel_err(&out.image, &x0) < 0.3);
    }

    #[test]
    fn rejects_bad_config_and_inputs() {
        let a = SensingMatrix::randomized(64, 8, 1).unwrap();
        let bad = TvConfig {
            alpha: Some(0.0),
            ..Default::default()
        };
        assert!(tv_minimize(&a, &[1.0; 8], &bad).is_err());
        assert!(tv_minimize(&a, &[1.0; 7], &TvConfig::default()).is_err());
        assert!(tv_minimize(&a, &[f64::NAN; 8], &TvConfig::default()).is_err());
        let rect = SensingMatrix::randomized(32, 8, 1).unwrap();
        assert!(tv_minimize(&rect, &[1.0; 8], &TvConfig::default()).is_err());
    }
}
