//! Per-projection signal chain: magnitude spectrum, Lorentzian linewidth
//! broadening, PSNR-calibrated white noise, BayesShrink denoising, Wiener
//! deconvolution, detector differencing and the two measurement sums.

mod acquire;
mod filter;
pub mod wavelet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmcw::ScopeTrace;

pub use acquire::{acquire_projection, Acquirer, ChainConfig, ProjectionSpectra, Stages};
pub use filter::{lorentzian_kernel, LorentzianFilter};
pub use wavelet::Wavelet;

/// Positive-frequency magnitude spectrum. Element `i` is the DFT bin
/// `i + 1`, centered at `(i + 1) · bin_width` Hz; DC is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub amplitudes: Vec<f64>,
    pub bin_width: f64,
}

impl Spectrum {
    pub fn new(amplitudes: Vec<f64>, bin_width: f64) -> Self {
        Spectrum { amplitudes, bin_width }
    }

    pub fn zeros(len: usize, bin_width: f64) -> Self {
        Spectrum::new(vec![0.0; len], bin_width)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Center frequency of stored element `i` (Hz).
    pub fn frequency(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.bin_width
    }

    pub fn max(&self) -> f64 {
        self.amplitudes.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.amplitudes.iter().sum()
    }

    /// `(bin_hz, amplitude)` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24 + 20);
        out.push_str("bin_hz,amplitude\n");
        for (i, a) in self.amplitudes.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.frequency(i), a));
        }
        out
    }
}

/// Taper applied to the scope record before the DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    /// Periodic Hann. Suppresses the sweep-reset transient at the start of
    /// the record and the leakage of off-bin beat notes.
    #[default]
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// How each bin is weighted when forming `y_inu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyWeighting {
    /// Bin-center frequency in Hz.
    #[default]
    Linear,
    /// Experimental: `sqrt(f)`.
    Sqrt,
    /// Experimental: `ln(1 + f / bin_width)`.
    Log,
}

impl FrequencyWeighting {
    pub fn weight(self, f: f64, bin_width: f64) -> f64 {
        match self {
            FrequencyWeighting::Linear => f,
            FrequencyWeighting::Sqrt => f.sqrt(),
            FrequencyWeighting::Log => (f / bin_width).ln_1p(),
        }
    }

    /// Maps a weighted mean back to a frequency.
    pub fn invert(self, w: f64, bin_width: f64) -> f64 {
        match self {
            FrequencyWeighting::Linear => w,
            FrequencyWeighting::Sqrt => w * w,
            FrequencyWeighting::Log => bin_width * w.exp_m1(),
        }
    }
}

fn check_finite(x: &[f64], what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `|DFT|` of bins `1..=len/2` with no taper.
pub fn positive_spectrum(trace: &ScopeTrace) -> Result<Spectrum> {
    windowed_positive_spectrum(trace, Window::Rectangular)
}

pub fn windowed_positive_spectrum(trace: &ScopeTrace, window: Window) -> Result<Spectrum> {
    let len = trace.len();
    if len < 2 {
        return Err(Error::param("trace", format!("needs at least 2 samples, got {len}")));
    }
    check_finite(&trace.samples, "scope trace")?;
    let w = window.coefficients(len);
    let mut buf: Vec<Complex64> = trace
        .samples
        .iter()
        .zip(&w)
        .map(|(&s, &w)| Complex64::new(s * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let amplitudes = buf[1..=len / 2].iter().map(|c| c.norm()).collect();
    Ok(Spectrum::new(amplitudes, trace.sample_rate / len as f64))
}

/// Circular convolution with the unit-area Lorentzian of full width `fwhm`.
pub fn broaden(spec: &Spectrum, fwhm: f64) -> Result<Spectrum> {
    if !(fwhm >= 0.0) || !fwhm.is_finite() {
        return Err(Error::param("fwhm", format!("must be finite and >= 0, got {fwhm}")));
    }
    if fwhm == 0.0 || spec.is_empty() {
        return Ok(spec.clone());
    }
    let f = LorentzianFilter::new(spec.len(), spec.bin_width, fwhm);
    Ok(Spectrum::new(f.convolve(&spec.amplitudes), spec.bin_width))
}

/// Wiener inverse of [`broaden`], clamped at zero.
pub fn wiener_deconvolve(spec: &Spectrum, kernel_fwhm: f64, nsr: f64) -> Result<Spectrum> {
    if !(kernel_fwhm > 0.0) || !kernel_fwhm.is_finite() {
        return Err(Error::param("kernel_fwhm", format!("must be finite and > 0, got {kernel_fwhm}")));
    }
    if !(nsr >= 0.0) || !nsr.is_finite() {
        return Err(Error::param("nsr", format!("must be finite and >= 0, got {nsr}")));
    }
    if spec.is_empty() {
        return Ok(spec.clone());
    }
    let f = LorentzianFilter::new(spec.len(), spec.bin_width, kernel_fwhm);
    let out = f.wiener(&spec.amplitudes, nsr).into_iter().map(|v| v.max(0.0)).collect();
    Ok(Spectrum::new(out, spec.bin_width))
}

/// BayesShrink with a symlet-20 basis at full depth, clamped at zero.
pub fn denoise_bayes_shrink(spec: &Spectrum) -> Result<Spectrum> {
    denoise_with(spec, &Wavelet::sym20())
}

pub(crate) fn denoise_with(spec: &Spectrum, wavelet: &Wavelet) -> Result<Spectrum> {
    let (out, _) = wavelet::bayes_shrink(&spec.amplitudes, wavelet)?;
    Ok(Spectrum::new(out.into_iter().map(|v| v.max(0.0)).collect(), spec.bin_width))
}

/// Beat-note linewidth and white-noise level for one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Lorentzian FWHM of the beat note (twice the laser linewidth), Hz.
    pub beat_linewidth_fwhm: f64,
    /// Brightest broadened bin divided by the noise σ; `inf` disables noise.
    #[serde(with = "crate::spectral::psnr_serde")]
    pub psnr: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            beat_linewidth_fwhm: 2e6,
            psnr: 5.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            beat_linewidth_fwhm: 0.0,
            psnr: f64::INFINITY,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beat_linewidth_fwhm >= 0.0) || !self.beat_linewidth_fwhm.is_finite() {
            return Err(Error::param("beat_linewidth_fwhm", "must be finite and >= 0"));
        }
        if !(self.psnr > 0.0) {
            return Err(Error::param("psnr", format!("must be > 0 or inf, got {}", self.psnr)));
        }
        Ok(())
    }

    /// Independent RNG for one noise stream (projection, detector).
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// PSNR values serialize as numbers, with infinity as the string `"inf"`.
pub(crate) mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => super::parse_psnr(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Lists of PSNR values, each encoded as in [`psnr_serde`].
pub(crate) mod psnr_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Psnr(#[serde(with = "super::psnr_serde")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&x| Psnr(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Psnr>::deserialize(d)?.into_iter().map(|p| p.0).collect())
    }
}

/// Parses a PSNR value; `inf`, `infinity` and `none` mean noiseless.
pub fn parse_psnr(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "none" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|e| format!("invalid psnr `{s}`: {e}")),
    }
}

/// Adds white Gaussian noise with σ = max(spec)/psnr, then clamps at zero.
pub fn inject_noise(spec: &Spectrum, noise: &NoiseModel, stream: u64) -> Result<Spectrum> {
    noise.validate()?;
    if noise.psnr.is_infinite() {
        return Ok(spec.clone());
    }
    let sigma = spec.max() / noise.psnr;
    if sigma == 0.0 {
        return Ok(spec.clone());
    }
    let mut rng = noise.rng(stream);
    let out = spec
        .amplitudes
        .iter()
        .map(|&a| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (a + sigma * z).max(0.0)
        })
        .collect();
    Ok(Spectrum::new(out, spec.bin_width))
}

/// The two stored measurement vectors: `2m` scalars plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVectors {
    pub y_i: Vec<f64>,
    pub y_inu: Vec<f64>,
    pub bin_width: f64,
    pub n_bins: usize,
    #[serde(default)]
    pub weighting: FrequencyWeighting,
}

impl MeasurementVectors {
    pub fn m(&self) -> usize {
        self.y_i.len()
    }

    pub fn stored_scalars(&self) -> usize {
        self.y_i.len() + self.y_inu.len()
    }

    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m() {
            return Err(Error::param("m", format!("prefix length must be in 1..={}, got {m}", self.m())));
        }
        Ok(MeasurementVectors {
            y_i: self.y_i[..m].to_vec(),
            y_inu: self.y_inu[..m].to_vec(),
            ..self.clone()
        })
    }

    /// `k,y_i,y_inu` rows: m rows holding exactly 2m measurement scalars.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,y_i,y_inu\n");
        for (k, (a, b)) in self.y_i.iter().zip(&self.y_inu).enumerate() {
            out.push_str(&format!("{k},{a:e},{b:e}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, bin_width: f64, n_bins: usize, weighting: FrequencyWeighting) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("k,y_i,y_inu") {
            return Err(Error::param("csv", "expected header `k,y_i,y_inu`"));
        }
        let (mut y_i, mut y_inu) = (Vec::new(), Vec::new());
        for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::param("csv", format!("row {row}: {e}")));
            if cols.len() != 3 || cols[0].parse::<usize>().ok() != Some(row) {
                return Err(Error::param("csv", format!("malformed row {row}: `{line}`")));
            }
            y_i.push(parse(cols[1])?);
            y_inu.push(parse(cols[2])?);
        }
        Ok(MeasurementVectors {
            y_i,
            y_inu,
            bin_width,
            n_bins,
            weighting,
        })
    }
}

/// Differences each `(pos, neg)` pair bin-wise and sums the result with and
/// without frequency weighting.
pub fn accumulate(pairs: &[(Spectrum, Spectrum)], weighting: FrequencyWeighting) -> Result<MeasurementVectors> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::param("spectra", "at least one projection is required"))?;
    let n_bins = first.0.len();
    let bin_width = first.0.bin_width;
    let weights: Vec<f64> = (0..n_bins)
        .map(|i| weighting.weight(first.0.frequency(i), bin_width))
        .collect();
    let mut y_i = Vec::with_capacity(pairs.len());
    let mut y_inu = Vec::with_capacity(pairs.len());
    for (pos, neg) in pairs {
        for s in [pos, neg] {
            if s.len() != n_bins {
                return Err(Error::LengthMismatch {
                    expected: n_bins,
                    actual: s.len(),
                });
            }
        }
        let (mut a, mut b) = (0.0, 0.0);
        for ((p, q), w) in pos.amplitudes.iter().zip(&neg.amplitudes).zip(&weights) {
            let diff = p - q;
            a += diff;
            b += diff * w;
        }
        y_i.push(a);
        y_inu.push(b);
    }
    Ok(MeasurementVectors {
        y_i,
        y_inu,
        bin_width,
        n_bins,
        weighting,
    })
}

/// Bin-wise `pos − neg`.
pub fn difference(pos: &Spectrum, neg: &Spectrum) -> Result<Spectrum> {
    if pos.len() != neg.len() {
        return Err(Error::LengthMismatch {
            expected: pos.len(),
            actual: neg.len(),
        });
    }
    Ok(Spectrum::new(
        pos.amplitudes.iter().zip(&neg.amplitudes).map(|(p, q)| p - q).collect(),
        pos.bin_width,
    ))
}
