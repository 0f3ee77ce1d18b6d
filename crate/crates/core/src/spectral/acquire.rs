use std::collections::BTreeMap;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{
    accumulate, denoise_with, inject_noise, FrequencyWeighting, LorentzianFilter, MeasurementVectors, NoiseModel,
    Spectrum, Wavelet, Window,
};
use crate::error::{Error, Result};
use crate::fmcw::{add_return, ChirpConfig, Return};
use crate::par::Exec;
use crate::sensing::SensingMatrix;

/// Settings of the per-detector cleaning chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub window: Window,
    pub noise: NoiseModel,
    /// Noise-to-signal regularizer of the Wiener filter.
    pub wiener_nsr: f64,
    pub denoise: bool,
    pub deconvolve: bool,
    pub weighting: FrequencyWeighting,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            window: Window::Hann,
            noise: NoiseModel::default(),
            wiener_nsr: 1e-3,
            denoise: true,
            deconvolve: true,
            weighting: FrequencyWeighting::Linear,
        }
    }
}

impl ChainConfig {
    pub fn noiseless() -> Self {
        ChainConfig {
            noise: NoiseModel::noiseless(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.wiener_nsr >= 0.0) || !self.wiener_nsr.is_finite() {
            return Err(Error::param("wiener_nsr", format!("must be finite and >= 0, got {}", self.wiener_nsr)));
        }
        Ok(())
    }
}

/// The five stages of one detector's spectrum.
#[derive(Debug, Clone)]
pub struct Stages {
    pub raw: Spectrum,
    pub broadened: Spectrum,
    pub noisy: Spectrum,
    pub denoised: Spectrum,
    pub deconvolved: Spectrum,
}

impl Stages {
    pub const NAMES: [&'static str; 5] = ["raw", "broadened", "noisy", "denoised", "deconvolved"];

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Spectrum)> {
        Self::NAMES
            .into_iter()
            .zip([&self.raw, &self.broadened, &self.noisy, &self.denoised, &self.deconvolved])
    }
}

/// Cleaned spectra of the (1,0) and (0,1) detectors for one pattern.
#[derive(Debug, Clone)]
pub struct ProjectionSpectra {
    pub pos: Spectrum,
    pub neg: Spectrum,
}

struct DelayGroup {
    delay: f64,
    pixels: Vec<(usize, f64)>,
}

enum UnitSpectra {
    /// Complex positive-frequency DFT of the windowed unit-amplitude trace
    /// of each delay group.
    Cached(Vec<Vec<Complex64>>),
    OnTheFly,
}

/// Above this many cached complex bins, traces are synthesized per
/// projection instead.
const CACHE_LIMIT_BINS: usize = 1 << 24;

/// Simulates detector spectra for a fixed scene.
///
/// Pixels sharing a round-trip delay produce identical beat notes, so the
/// trace seen through any mask is a weighted sum of one unit trace per
/// distinct delay. By linearity of the DFT the same weights apply to the
/// unit spectra, which are computed once.
pub struct Acquirer {
    chirp: ChirpConfig,
    chain: ChainConfig,
    lo_amplitude: f64,
    n_pixels: usize,
    groups: Vec<DelayGroup>,
    /// Delay group and amplitude of each lit pixel.
    pixel_group: Vec<Option<(usize, f64)>>,
    unit: UnitSpectra,
    window: Vec<f64>,
    filter: Option<LorentzianFilter>,
    wavelet: Wavelet,
}

impl Acquirer {
    pub fn new(returns: &[Return], lo_amplitude: f64, chirp: &ChirpConfig, chain: &ChainConfig) -> Result<Self> {
        Self::with_cache_limit(returns, lo_amplitude, chirp, chain, CACHE_LIMIT_BINS)
    }

    pub(crate) fn with_cache_limit(
        returns: &[Return],
        lo_amplitude: f64,
        chirp: &ChirpConfig,
        chain: &ChainConfig,
        cache_limit: usize,
    ) -> Result<Self> {
        chirp.validate()?;
        chain.validate()?;
        // Validate delays and amplitudes the same way synthesis does.
        crate::fmcw::synthesize_trace(&[], lo_amplitude, chirp, chirp.period)?;
        let mut by_delay: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
        for (i, r) in returns.iter().enumerate() {
            if !r.amplitude.is_finite() || !r.delay.is_finite() {
                return Err(Error::NonFinite("return"));
            }
            if r.amplitude < 0.0 || r.delay < 0.0 || r.delay >= chirp.period {
                return Err(Error::DelayOutOfRange {
                    delay: r.delay,
                    period: chirp.period,
                });
            }
            if r.amplitude > 0.0 {
                by_delay.entry(r.delay.to_bits()).or_default().push((i, r.amplitude));
            }
        }
        let groups: Vec<DelayGroup> = by_delay
            .into_iter()
            .map(|(bits, pixels)| DelayGroup {
                delay: f64::from_bits(bits),
                pixels,
            })
            .collect();

        let mut pixel_group = vec![None; returns.len()];
        for (gi, g) in groups.iter().enumerate() {
            for &(p, amp) in &g.pixels {
                pixel_group[p] = Some((gi, amp));
            }
        }

        let len = chirp.samples_per_sweep();
        let n_bins = chirp.positive_bins();
        let window = chain.window.coefficients(len);
        let unit = if groups.len() * n_bins <= cache_limit {
            let fft = FftPlanner::new().plan_fft_forward(len);
            let spectra = groups
                .iter()
                .map(|g| {
                    let mut trace = vec![0.0; len];
                    add_return(&mut trace, &Return::new(1.0, g.delay), lo_amplitude, chirp);
                    let mut buf: Vec<Complex64> = trace
                        .iter()
                        .zip(&window)
                        .map(|(&s, &w)| Complex64::new(s * w, 0.0))
                        .collect();
                    fft.process(&mut buf);
                    buf[1..=n_bins].to_vec()
                })
                .collect();
            UnitSpectra::Cached(spectra)
        } else {
            UnitSpectra::OnTheFly
        };
        let fwhm = chain.noise.beat_linewidth_fwhm;
        let filter = (fwhm > 0.0).then(|| LorentzianFilter::new(n_bins, chirp.bin_width(), fwhm));
        Ok(Acquirer {
            chirp: *chirp,
            chain: *chain,
            lo_amplitude,
            n_pixels: returns.len(),
            groups,
            pixel_group,
            unit,
            window,
            filter,
            wavelet: Wavelet::sym20(),
        })
    }

    pub fn chirp(&self) -> &ChirpConfig {
        &self.chirp
    }

    pub fn chain(&self) -> &ChainConfig {
        &self.chain
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    /// Number of distinct nonzero-amplitude delays in the scene.
    pub fn distinct_delays(&self) -> usize {
        self.groups.len()
    }

    fn check_mask(&self, mask: &[bool]) -> Result<()> {
        if mask.len() != self.n_pixels {
            return Err(Error::LengthMismatch {
                expected: self.n_pixels,
                actual: mask.len(),
            });
        }
        Ok(())
    }

    /// Summed field amplitude of each delay group through `mask`.
    fn group_weights(&self, mask: &[bool]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.pixels.iter().filter(|(i, _)| mask[*i]).map(|(_, a)| a).sum())
            .collect()
    }

    /// Noiseless, unbroadened magnitude spectrum of the light passed by `mask`.
    pub fn raw_spectrum(&self, mask: &[bool]) -> Result<Spectrum> {
        self.check_mask(mask)?;
        let weights = self.group_weights(mask);
        Ok(self.raw_from_weights(&weights))
    }

    /// Raw spectrum of a single pixel.
    pub fn pixel_raw_spectrum(&self, pixel: usize) -> Result<Spectrum> {
        if pixel >= self.n_pixels {
            return Err(Error::IndexOutOfRange {
                index: pixel,
                len: self.n_pixels,
            });
        }
        let mut weights = vec![0.0; self.groups.len()];
        if let Some((g, amp)) = self.pixel_group[pixel] {
            weights[g] = amp;
        }
        Ok(self.raw_from_weights(&weights))
    }

    fn raw_from_weights(&self, weights: &[f64]) -> Spectrum {
        let n_bins = self.chirp.positive_bins();
        let bin_width = self.chirp.bin_width();
        match &self.unit {
            UnitSpectra::Cached(units) => {
                let mut acc = vec![Complex64::new(0.0, 0.0); n_bins];
                for (u, &w) in units.iter().zip(weights) {
                    if w != 0.0 {
                        for (a, &b) in acc.iter_mut().zip(u) {
                            *a += b * w;
                        }
                    }
                }
                Spectrum::new(acc.iter().map(|c| c.norm()).collect(), bin_width)
            }
            UnitSpectra::OnTheFly => {
                let len = self.chirp.samples_per_sweep();
                let mut trace = vec![0.0; len];
                for (g, &w) in self.groups.iter().zip(weights) {
                    if w != 0.0 {
                        add_return(&mut trace, &Return::new(w, g.delay), self.lo_amplitude, &self.chirp);
                    }
                }
                let mut buf: Vec<Complex64> = trace
                    .iter()
                    .zip(&self.window)
                    .map(|(&s, &w)| Complex64::new(s * w, 0.0))
                    .collect();
                FftPlanner::new().plan_fft_forward(len).process(&mut buf);
                Spectrum::new(buf[1..=n_bins].iter().map(|c| c.norm()).collect(), bin_width)
            }
        }
    }

    pub fn broaden(&self, spec: &Spectrum) -> Spectrum {
        match &self.filter {
            Some(f) => Spectrum::new(f.convolve(&spec.amplitudes), spec.bin_width),
            None => spec.clone(),
        }
    }

    pub fn deconvolve(&self, spec: &Spectrum) -> Spectrum {
        match (&self.filter, self.chain.deconvolve) {
            (Some(f), true) => Spectrum::new(
                f.wiener(&spec.amplitudes, self.chain.wiener_nsr)
                    .into_iter()
                    .map(|v| v.max(0.0))
                    .collect(),
                spec.bin_width,
            ),
            _ => spec.clone(),
        }
    }

    pub fn denoise(&self, spec: &Spectrum) -> Result<Spectrum> {
        if self.chain.denoise {
            denoise_with(spec, &self.wavelet)
        } else {
            Ok(spec.clone())
        }
    }

    /// Every stage of the chain for one detector.
    pub fn stages(&self, raw: Spectrum, stream: u64) -> Result<Stages> {
        let broadened = self.broaden(&raw);
        let noisy = inject_noise(&broadened, &self.chain.noise, stream)?;
        let denoised = self.denoise(&noisy)?;
        let deconvolved = self.deconvolve(&denoised);
        Ok(Stages {
            raw,
            broadened,
            noisy,
            denoised,
            deconvolved,
        })
    }

    /// Final cleaned spectrum for one detector.
    pub fn clean(&self, raw: &Spectrum, stream: u64) -> Result<Spectrum> {
        let broadened = self.broaden(raw);
        let noisy = inject_noise(&broadened, &self.chain.noise, stream)?;
        let denoised = self.denoise(&noisy)?;
        Ok(self.deconvolve(&denoised))
    }

    /// Noise stream of detector `det` (0 = (1,0), 1 = (0,1)) for row `k`.
    pub fn stream(k: usize, det: u64) -> u64 {
        2 * k as u64 + det
    }

    pub fn projection_stages(&self, a: &SensingMatrix, k: usize) -> Result<(Stages, Stages)> {
        let (pos, neg) = self.masks(a, k)?;
        let sp = self.stages(self.raw_spectrum(&pos)?, Self::stream(k, 0))?;
        let sn = self.stages(self.raw_spectrum(&neg)?, Self::stream(k, 1))?;
        Ok((sp, sn))
    }

    fn masks(&self, a: &SensingMatrix, k: usize) -> Result<(Vec<bool>, Vec<bool>)> {
        if a.n() != self.n_pixels {
            return Err(Error::LengthMismatch {
                expected: self.n_pixels,
                actual: a.n(),
            });
        }
        a.split_pattern(k)
    }

    pub fn acquire_projection(&self, a: &SensingMatrix, k: usize) -> Result<ProjectionSpectra> {
        let (pos, neg) = self.masks(a, k)?;
        let pos = self.clean(&self.raw_spectrum(&pos)?, Self::stream(k, 0))?;
        let neg = self.clean(&self.raw_spectrum(&neg)?, Self::stream(k, 1))?;
        Ok(ProjectionSpectra { pos, neg })
    }

    /// All `m` projections of `a`, reduced to measurement vectors.
    pub fn acquire(&self, a: &SensingMatrix, exec: Exec) -> Result<MeasurementVectors> {
        let pairs: Vec<(Spectrum, Spectrum)> = exec
            .map(a.m(), |k| self.acquire_projection(a, k).map(|p| (p.pos, p.neg)))
            .into_iter()
            .collect::<Result<_>>()?;
        accumulate(&pairs, self.chain.weighting)
    }
}

/// One-shot version of [`Acquirer::acquire_projection`].
pub fn acquire_projection(
    returns: &[Return],
    lo_amplitude: f64,
    a: &SensingMatrix,
    k: usize,
    chirp: &ChirpConfig,
    chain: &ChainConfig,
) -> Result<ProjectionSpectra> {
    Acquirer::new(returns, lo_amplitude, chirp, chain)?.acquire_projection(a, k)
}
