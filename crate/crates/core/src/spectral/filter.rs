use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unit-sum Lorentzian sampled at circular bin offsets (index `i` is offset
/// `i` for `i ≤ n/2`, `i − n` above).
pub fn lorentzian_kernel(n: usize, bin_width: f64, fwhm: f64) -> Vec<f64> {
    let mut k = vec![0.0; n];
    if n == 0 {
        return k;
    }
    if fwhm <= 0.0 {
        k[0] = 1.0;
        return k;
    }
    let half = 0.5 * fwhm;
    for (i, v) in k.iter_mut().enumerate() {
        let off = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        let f = off * bin_width;
        *v = (fwhm / std::f64::consts::TAU) / (f * f + half * half);
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Circular Lorentzian blur and its Wiener inverse over a fixed length,
/// with FFT plans built once.
#[derive(Clone)]
pub struct LorentzianFilter {
    n: usize,
    fwhm: f64,
    response: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LorentzianFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LorentzianFilter")
            .field("n", &self.n)
            .field("fwhm", &self.fwhm)
            .finish_non_exhaustive()
    }
}

impl LorentzianFilter {
    pub fn new(n: usize, bin_width: f64, fwhm: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex64> = lorentzian_kernel(n, bin_width, fwhm)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        fwd.process(&mut buf);
        // The kernel is circularly even, so its transform is real.
        let response = buf.iter().map(|c| c.re).collect();
        LorentzianFilter {
            n,
            fwhm,
            response,
            fwd,
            inv,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    /// Transfer function of the kernel.
    pub fn response(&self) -> &[f64] {
        &self.response
    }

    fn filter(&self, x: &[f64], gain: impl Fn(f64) -> f64) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "filter length mismatch");
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (c, &h) in buf.iter_mut().zip(&self.response) {
            *c *= gain(h);
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        self.filter(x, |h| h)
    }

    /// `X̂ = Y·H*/(|H|² + nsr)`; H is real here.
    pub fn wiener(&self, y: &[f64], nsr: f64) -> Vec<f64> {
        self.filter(y, |h| {
            let den = h * h + nsr;
            if den == 0.0 {
                0.0
            } else {
                h / den
            }
        })
    }
}
