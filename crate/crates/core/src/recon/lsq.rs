use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::haar;
use crate::error::{Error, Result};
use crate::sensing::SensingMatrix;

/// Positions of the kept Haar coefficients, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    pub indices: Vec<usize>,
    pub n: usize,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Keeps the `⌊fraction·m⌋` Haar coefficients of the mask with the largest
/// magnitude. Ties go to the lower index.
pub fn select_support(mask: &[bool], m: usize, fraction: f64) -> Result<SupportSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param("support_fraction", format!("must be in (0, 1], got {fraction}")));
    }
    let k = (fraction * m as f64).floor() as usize;
    if k == 0 {
        return Err(Error::EmptySupport(format!("floor({fraction} * {m}) = 0 coefficients")));
    }
    let img: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let s = haar::forward(&img)?;
    if s.iter().all(|&c| c == 0.0) {
        return Err(Error::EmptySupport("mask is empty".into()));
    }
    let k = k.min(s.len());
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].abs().total_cmp(&s[i].abs()).then(i.cmp(&j)));
    let mut indices = order[..k].to_vec();
    indices.sort_unstable();
    Ok(SupportSet { indices, n: s.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsSolver {
    /// Limited-memory BFGS with exact line search.
    #[default]
    Lbfgs,
    /// Conjugate gradient on the normal equations.
    Cgls,
}

/// Result of [`ls_on_support`].
#[derive(Debug, Clone)]
pub struct LsOutput {
    /// `M ⊙ Ψ⁻¹Pᵀs`.
    pub image: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// `‖Jᵀ(Js − y)‖ / ‖Jᵀy‖` at the returned solution.
    pub normal_residual: f64,
    pub iterations: usize,
    /// `Some(true)` when `J` was found rank deficient; `None` when the
    /// problem is too large for the dense rank check.
    pub rank_deficient: Option<bool>,
}

/// Target for `‖Jᵀ(Js − y)‖ / ‖Jᵀy‖`.
pub const NORMAL_RESIDUAL_TOL: f64 = 1e-6;

/// `J = A·Ψ⁻¹·Pᵀ` restricted to a support set.
pub(crate) struct SupportOperator<'a> {
    a: &'a SensingMatrix,
    support: &'a [usize],
}

impl<'a> SupportOperator<'a> {
    pub(crate) fn new(a: &'a SensingMatrix, support: &'a SupportSet) -> Result<Self> {
        if support.n != a.n() {
            return Err(Error::LengthMismatch {
                expected: a.n(),
                actual: support.n,
            });
        }
        if let Some(&bad) = support.indices.iter().find(|&&i| i >= a.n()) {
            return Err(Error::IndexOutOfRange { index: bad, len: a.n() });
        }
        Ok(SupportOperator {
            a,
            support: &support.indices,
        })
    }

    pub(crate) fn synthesize(&self, s: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.a.n()];
        for (&i, &v) in self.support.iter().zip(s) {
            z[i] = v;
        }
        haar::inverse(&z).expect("square image")
    }

    pub(crate) fn apply(&self, s: &[f64]) -> Vec<f64> {
        self.a.apply(&self.synthesize(s)).expect("dimensions checked")
    }

    pub(crate) fn adjoint(&self, r: &[f64]) -> Vec<f64> {
        let x = self.a.apply_adjoint(r).expect("dimensions checked");
        let c = haar::forward(&x).expect("square image");
        self.support.iter().map(|&i| c[i]).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normal_residual(j: &SupportOperator, s: &[f64], y: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = j.apply(s).iter().zip(y).map(|(p, q)| p - q).collect();
    j.adjoint(&r)
}

fn cgls(j: &SupportOperator, y: &[f64], k: usize, target: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let mut s = vec![0.0; k];
    let mut r = y.to_vec();
    let mut g = j.adjoint(&r);
    let mut p = g.clone();
    let mut gamma = dot(&g, &g);
    let mut it = 0;
    while it < max_iter && gamma.sqrt() > target {
        let q = j.apply(&p);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let step = gamma / qq;
        s.iter_mut().zip(&p).for_each(|(si, pi)| *si += step * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= step * qi);
        g = j.adjoint(&r);
        let next = dot(&g, &g);
        let b = next / gamma;
        gamma = next;
        p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = gi + b * *pi);
        it += 1;
    }
    (s, it)
}

fn lbfgs(j: &SupportOperator, y: &[f64], k: usize, target: f64, max_iter: usize) -> (Vec<f64>, usize) {
    const MEMORY: usize = 10;
    let mut s = vec![0.0; k];
    let mut r: Vec<f64> = y.iter().map(|v| -v).collect();
    // Half the gradient of ‖Js − y‖².
    let mut g = j.adjoint(&r);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut it = 0;
    while it < max_iter && norm(&g) > target {
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (sk, yk, rho) in hist.iter().rev() {
            let a = rho * dot(sk, &d);
            d.iter_mut().zip(yk).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((sk, yk, _)) = hist.back() {
            let gamma = dot(sk, yk) / dot(yk, yk);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((sk, yk, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(yk, &d);
            d.iter_mut().zip(sk).for_each(|(di, si)| *di += (a - b) * si);
        }
        let jd = j.apply(&d);
        let curv = dot(&jd, &jd);
        let slope = dot(&g, &d);
        if curv == 0.0 || slope >= 0.0 {
            break;
        }
        let t = -slope / curv;
        s.iter_mut().zip(&d).for_each(|(si, di)| *si += t * di);
        r.iter_mut().zip(&jd).for_each(|(ri, ji)| *ri += t * ji);
        let g_next = j.adjoint(&r);
        let sk: Vec<f64> = d.iter().map(|v| t * v).collect();
        let yk: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sk, &yk);
        if sy > 0.0 {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((sk, yk, 1.0 / sy));
        }
        g = g_next;
        it += 1;
    }
    (s, it)
}

/// Dense rank check of `JᵀJ` by pivoted Cholesky, only for small problems.
fn rank_deficient(j: &SupportOperator, k: usize) -> Option<bool> {
    let n = j.a.n();
    let cost = (k as f64) * (n as f64) * (n as f64).log2().max(1.0) + (k as f64).powi(3);
    if cost > 2f64.powi(28) {
        return None;
    }
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut e = vec![0.0; k];
            e[c] = 1.0;
            j.apply(&e)
        })
        .collect();
    let mut g = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let v = dot(&cols[a], &cols[b]);
            g[a * k + b] = v;
            g[b * k + a] = v;
        }
    }
    let max_diag = (0..k).map(|i| g[i * k + i]).fold(0.0f64, f64::max);
    let tol = 1e-10 * max_diag;
    let mut perm: Vec<usize> = (0..k).collect();
    for step in 0..k {
        let (piv, &best) = perm[step..]
            .iter()
            .enumerate()
            .max_by(|x, y| g[x.1 * k + x.1].total_cmp(&g[y.1 * k + y.1]))
            .map(|(i, p)| (i + step, p))
            .expect("non-empty");
        if g[best * k + best] <= tol {
            return Some(true);
        }
        perm.swap(step, piv);
        let p = perm[step];
        let d = g[p * k + p].sqrt();
        for &i in &perm[step + 1..] {
            g[i * k + p] /= d;
        }
        for &i in &perm[step + 1..] {
            let lip = g[i * k + p];
            for &jx in &perm[step + 1..] {
                g[i * k + jx] -= lip * g[jx * k + p];
            }
        }
    }
    Some(false)
}

/// Least squares over the support coefficients, `min ‖A·Ψ⁻¹·Pᵀ·s − y‖²`,
/// returned as the masked image `M ⊙ Ψ⁻¹Pᵀs`. Starting from zero both
/// solvers stay in the row space of `J`, so a rank-deficient system yields
/// the minimum-norm solution.
pub fn ls_on_support(
    a: &SensingMatrix,
    y: &[f64],
    support: &SupportSet,
    mask: &[bool],
    solver: LsSolver,
) -> Result<LsOutput> {
    if y.len() != a.m() {
        return Err(Error::LengthMismatch {
            expected: a.m(),
            actual: y.len(),
        });
    }
    if mask.len() != a.n() {
        return Err(Error::LengthMismatch {
            expected: a.n(),
            actual: mask.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurements"));
    }
    let k = support.len();
    if k == 0 || k > a.m() {
        return Err(Error::param(
            "support",
            format!("size must be in 1..={} (overdetermined), got {k}", a.m()),
        ));
    }
    let j = SupportOperator::new(a, support)?;
    let jty = norm(&j.adjoint(y));
    let rank = rank_deficient(&j, k);
    if jty == 0.0 {
        return Ok(LsOutput {
            image: vec![0.0; a.n()],
            coeffs: vec![0.0; k],
            normal_residual: 0.0,
            iterations: 0,
            rank_deficient: rank,
        });
    }
    // Solve a little past the contract so accumulated recurrence drift
    // does not leave the recomputed residual just above it.
    let target = 0.1 * NORMAL_RESIDUAL_TOL * jty;
    let max_iter = 4 * k + 100;
    let (coeffs, iterations) = match solver {
        LsSolver::Cgls => cgls(&j, y, k, target, max_iter),
        LsSolver::Lbfgs => lbfgs(&j, y, k, target, max_iter),
    };
    let res = norm(&normal_residual(&j, &coeffs, y)) / jty;
    let image = j
        .synthesize(&coeffs)
        .into_iter()
        .zip(mask)
        .map(|(v, &m)| if m { v } else { 0.0 })
        .collect();
    Ok(LsOutput {
        image,
        coeffs,
        normal_residual: res,
        iterations,
        rank_deficient: rank,
    })
}
