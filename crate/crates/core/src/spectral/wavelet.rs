//! Orthogonal 1D discrete wavelet transform with half-sample symmetric
//! boundary extension, and BayesShrink soft-threshold denoising.
//!
//! Coefficient lengths follow the usual symmetric-mode convention:
//! one level maps `N` samples to `floor((N + F − 1) / 2)` approximation and
//! detail coefficients for a filter of length `F`.

use crate::error::{Error, Result};

/// Symlet-20 decomposition low-pass filter (40 taps).
pub const SYM20_DEC_LO: [f64; 40] = [
    3.695537474835221e-07,
    -1.9015675890554106e-07,
    -7.919361411976999e-06,
    3.025666062736966e-06,
    7.992967835772481e-05,
    -1.928412300645204e-05,
    -0.0004947310915672655,
    7.215991188074035e-05,
    0.002088994708190198,
    -0.0003052628317957281,
    -0.006606585799088861,
    0.0014230873594621453,
    0.01700404902339034,
    -0.003313857383623359,
    -0.031629437144957966,
    0.008123228356009682,
    0.025579349509413946,
    -0.07899434492839816,
    -0.02981936888033373,
    0.4058314443484506,
    0.75116272842273,
    0.47199147510148703,
    -0.0510883429210674,
    -0.16057829841525254,
    0.03625095165393308,
    0.08891966802819956,
    -0.0068437019650692274,
    -0.035373336756604236,
    0.0019385970672402002,
    0.012157040948785737,
    -0.0006111263857992088,
    -0.0034716478028440734,
    0.0001254409172306726,
    0.0007476108597820572,
    -2.6615550335516086e-05,
    -0.00011739133516291466,
    4.525422209151636e-06,
    1.22872527779612e-05,
    -3.2567026420174407e-07,
    -6.329129044776395e-07,
];

/// Quadrature-mirror filter bank derived from a decomposition low-pass.
#[derive(Debug, Clone)]
pub struct Wavelet {
    dec_lo: Vec<f64>,
    dec_hi: Vec<f64>,
    rec_lo: Vec<f64>,
    rec_hi: Vec<f64>,
}

impl Wavelet {
    pub fn from_dec_lo(dec_lo: &[f64]) -> Self {
        let f = dec_lo.len();
        let dec_hi: Vec<f64> = (0..f)
            .map(|j| if j % 2 == 0 { -dec_lo[f - 1 - j] } else { dec_lo[f - 1 - j] })
            .collect();
        let rec_lo = dec_lo.iter().rev().copied().collect();
        let rec_hi = dec_hi.iter().rev().copied().collect();
        Wavelet {
            dec_lo: dec_lo.to_vec(),
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }

    pub fn sym20() -> Self {
        Self::from_dec_lo(&SYM20_DEC_LO)
    }

    pub fn haar() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_dec_lo(&[h, h])
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }

    /// Deepest useful decomposition level for a signal of length `n`.
    pub fn max_level(&self, n: usize) -> usize {
        let f = self.filter_len();
        if n < f - 1 {
            return 0;
        }
        ((n as f64) / (f - 1) as f64).log2().floor() as usize
    }

    /// One analysis step: `(approximation, detail)`.
    pub fn dwt(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let f = self.filter_len();
        let out_len = (n + f - 1) / 2;
        let pad = f - 1;
        let ext: Vec<f64> = (0..n + 2 * pad)
            .map(|i| x[reflect(i as isize - pad as isize, n)])
            .collect();
        let mut a = vec![0.0; out_len];
        let mut d = vec![0.0; out_len];
        for o in 0..out_len {
            // out[o] = Σ_j h[j] · x[2o + 1 − j]
            let base = 2 * o + 1 + pad;
            let (mut sa, mut sd) = (0.0, 0.0);
            for j in 0..f {
                let v = ext[base - j];
                sa += self.dec_lo[j] * v;
                sd += self.dec_hi[j] * v;
            }
            a[o] = sa;
            d[o] = sd;
        }
        (a, d)
    }

    /// One synthesis step; output length `2·len − F + 2`.
    pub fn idwt(&self, a: &[f64], d: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), d.len(), "approximation/detail length mismatch");
        let f = self.filter_len();
        let l = a.len();
        let n = (2 * l + 2).saturating_sub(f);
        let mut y = vec![0.0; n];
        // y[o] = Σ_k a[k]·g[o + F − 2 − 2k] + d[k]·g'[o + F − 2 − 2k]
        for k in 0..l {
            let (ak, dk) = (a[k], d[k]);
            for j in 0..f {
                let o = (2 * k + j) as isize - (f as isize - 2);
                if o >= 0 && (o as usize) < n {
                    y[o as usize] += ak * self.rec_lo[j] + dk * self.rec_hi[j];
                }
            }
        }
        y
    }

    /// Multi-level decomposition `[cA_L, cD_L, …, cD_1]`.
    pub fn wavedec(&self, x: &[f64], levels: usize) -> Vec<Vec<f64>> {
        let mut details = Vec::with_capacity(levels);
        let mut approx = x.to_vec();
        for _ in 0..levels {
            let (a, d) = self.dwt(&approx);
            details.push(d);
            approx = a;
        }
        let mut out = vec![approx];
        out.extend(details.into_iter().rev());
        out
    }

    /// Inverse of [`Wavelet::wavedec`], truncated to `len` samples.
    pub fn waverec(&self, coeffs: &[Vec<f64>], len: usize) -> Vec<f64> {
        let mut approx = coeffs[0].clone();
        for d in &coeffs[1..] {
            if approx.len() == d.len() + 1 {
                approx.pop();
            }
            approx = self.idwt(&approx, d);
        }
        approx.truncate(len);
        approx
    }
}

/// Half-sample symmetric reflection of index `i` into `0..n`.
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Φ⁻¹(3/4): converts a median absolute deviation to a Gaussian σ.
const MAD_TO_SIGMA: f64 = 0.674_489_750_196_081_7;

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if v.len() % 2 == 1 {
        m
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + m)
    }
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// BayesShrink over the full decomposition depth; returns the denoised
/// signal (not clamped) and the estimated noise σ.
pub fn bayes_shrink(x: &[f64], wavelet: &Wavelet) -> Result<(Vec<f64>, f64)> {
    if x.len() < wavelet.filter_len() {
        return Err(Error::param(
            "spectrum",
            format!("length {} is shorter than the {}-tap wavelet", x.len(), wavelet.filter_len()),
        ));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; x.len()], 0.0));
    }
    let levels = wavelet.max_level(x.len()).max(1);
    let mut coeffs = wavelet.wavedec(x, levels);
    let finest = coeffs.last().expect("at least one detail band");
    let sigma = median(finest.iter().map(|v| v.abs()).collect()) / MAD_TO_SIGMA;
    let noise_var = sigma * sigma;
    for band in coeffs.iter_mut().skip(1) {
        let var = band.iter().map(|v| v * v).sum::<f64>() / band.len() as f64;
        let signal_var = var - noise_var;
        if signal_var <= 0.0 {
            band.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let t = noise_var / signal_var.sqrt();
            band.iter_mut().for_each(|v| *v = soft(*v, t));
        }
    }
    Ok((wavelet.waverec(&coeffs, x.len()), sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let i = i as f64;
                (0.37 * i).sin() + 0.5 * (1.3 * i * i / 100.0).cos() + 4.0 * (-((i - 120.0) / 6.0).powi(2)).exp()
            })
            .collect()
    }

    // Reference coefficients computed with PyWavelets
    // (`wavedec(x, 'sym20', mode='symmetric')`) for `probe(300)`.
    #[test]
    fn wavedec_matches_reference() {
        let w = Wavelet::sym20();
        let x = probe(300);
        assert_eq!(w.max_level(300), 2);
        let c = w.wavedec(&x, 2);
        assert_eq!(c.iter().map(Vec::len).collect::<Vec<_>>(), vec![104, 104, 169]);
        let expect = [
            (&c[0], [-1.0721714432863725, -2.5097558267388345, 0.23290705437429324], -0.5231935493244916),
            (&c[1], [0.02683060223890638, 0.0448777790829057, -0.1082996540162538], 0.772195372325911),
            (&c[2], [-1.1081273346825712e-05, -1.5035016549393162e-05, 9.834137496888443e-5], 0.003991304117265529),
        ];
        for (band, head, last) in expect {
            for (a, b) in band.iter().zip(head) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            assert!((band.last().unwrap() - last).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_reconstruction() {
        for w in [Wavelet::sym20(), Wavelet::haar()] {
            for n in [40, 101, 300, 1024, 16650] {
                let x = probe(n);
                let levels = w.max_level(n).max(1);
                let back = w.waverec(&w.wavedec(&x, levels), n);
                let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-9, "n={n} err={err}");
            }
        }
    }

    #[test]
    fn max_level_matches_reference() {
        let w = Wavelet::sym20();
        assert_eq!(w.max_level(16650), 8);
        assert_eq!(w.max_level(101), 1);
        assert_eq!(w.max_level(1000), 4);
        assert_eq!(w.max_level(20), 0);
    }

    fn pseudo_noise(k: usize) -> f64 {
        let v = ((k as f64) * 12.9898 + 78.233).sin() * 43758.5453;
        v - v.floor() - 0.5
    }

    // Reference output from an independent numpy/PyWavelets BayesShrink.
    #[test]
    fn bayes_shrink_matches_reference() {
        let clean: Vec<f64> = (0..1000)
            .map(|k| {
                let k = k as f64;
                50.0 / (1.0 + ((k - 300.0) / 20.0).powi(2)) + 30.0 / (1.0 + ((k - 640.0) / 20.0).powi(2))
            })
            .collect();
        let noisy: Vec<f64> = clean.iter().enumerate().map(|(k, c)| c + 8.0 * pseudo_noise(k)).collect();
        let (out, sigma) = bayes_shrink(&noisy, &Wavelet::sym20()).unwrap();
        assert!((sigma - 2.53118082781364).abs() < 1e-6, "{sigma}");
        let out: Vec<f64> = out.into_iter().map(|v| v.max(0.0)).collect();
        for (idx, want) in [
            (0, 0.1549408221463064),
            (100, 0.7739898817265841),
            (300, 49.09116229029693),
            (450, 0.6304334595316231),
            (640, 29.57063703972386),
            (999, 0.3375043967639497),
        ] {
            assert!((out[idx] - want).abs() < 1e-6, "bin {idx}: {} vs {want}", out[idx]);
        }
        assert!((out.iter().sum::<f64>() - 5005.43211278372).abs() < 1e-5);
    }

    #[test]
    fn bayes_shrink_degenerate_inputs() {
        assert_eq!(bayes_shrink(&[0.0; 64], &Wavelet::sym20()).unwrap().0, vec![0.0; 64]);
        assert!(bayes_shrink(&[1.0; 10], &Wavelet::sym20()).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
