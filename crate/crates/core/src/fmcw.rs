//! Linear-chirp FMCW physics: beat notes, range conversion and synthesis of
//! the balanced-heterodyne difference-detector trace.
//!
//! Only the difference-frequency terms are synthesized; sum-frequency terms
//! are removed by the detector bandwidth and would need petahertz sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.998e8;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Radiometric prefactor ε0·c. Cancels in the depth ratio but keeps
/// amplitudes in watts.
pub const EPS0_C: f64 = EPSILON_0 * SPEED_OF_LIGHT;

/// Shape of the optical frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    /// Ramp up over `period`, then jump back to `nu0`.
    #[default]
    Sawtooth,
    /// Ramp up over `period`, then ramp back down over the next `period`.
    Triangle,
}

/// Sweep and sampling parameters of the chirped source and the scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpConfig {
    /// Start optical frequency (Hz).
    pub nu0: f64,
    /// Sweep bandwidth Δν (Hz).
    pub delta_nu: f64,
    /// Sweep period T (s).
    pub period: f64,
    /// Scope sampling rate (Hz).
    pub sample_rate: f64,
    #[serde(default)]
    pub waveform: Waveform,
}

impl ChirpConfig {
    pub fn new(nu0: f64, delta_nu: f64, period: f64, sample_rate: f64, waveform: Waveform) -> Result<Self> {
        let cfg = ChirpConfig {
            nu0,
            delta_nu,
            period,
            sample_rate,
            waveform,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 780 nm source, 100 GHz over 1 ms, 33.3 MHz scope.
    pub fn paper() -> Self {
        ChirpConfig {
            nu0: SPEED_OF_LIGHT / 780e-9,
            delta_nu: 100e9,
            period: 1e-3,
            sample_rate: 33.3e6,
            waveform: Waveform::Sawtooth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.delta_nu) {
            return Err(Error::Chirp(format!("delta_nu must be > 0, got {}", self.delta_nu)));
        }
        if !finite_pos(self.period) {
            return Err(Error::Chirp(format!("period must be > 0, got {}", self.period)));
        }
        if !finite_pos(self.sample_rate) {
            return Err(Error::Chirp(format!("sample_rate must be > 0, got {}", self.sample_rate)));
        }
        if !self.nu0.is_finite() || self.nu0 < 0.0 {
            return Err(Error::Chirp(format!("nu0 must be finite and >= 0, got {}", self.nu0)));
        }
        if self.samples_per_sweep() < 2 {
            return Err(Error::Chirp(format!(
                "sample_rate * period must round to at least 2 samples, got {}",
                self.samples_per_sweep()
            )));
        }
        Ok(())
    }

    pub fn samples_per_sweep(&self) -> usize {
        (self.sample_rate * self.period).round() as usize
    }

    /// Number of positive-frequency bins kept (DC excluded).
    pub fn positive_bins(&self) -> usize {
        self.samples_per_sweep() / 2
    }

    /// DFT bin spacing for one sweep record (Hz).
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.samples_per_sweep() as f64
    }

    /// Meters per hertz of beat frequency, T·c/(2Δν).
    pub fn meters_per_hz(&self) -> f64 {
        self.period * SPEED_OF_LIGHT / (2.0 * self.delta_nu)
    }

    /// Depth spanned by one DFT bin.
    pub fn range_resolution(&self) -> f64 {
        self.bin_width() * self.meters_per_hz()
    }

    /// Largest depth whose beat note is below Nyquist.
    pub fn max_range(&self) -> f64 {
        0.5 * self.sample_rate * self.meters_per_hz()
    }

    /// Beat-note frequency ν = Δν·τ/T for a round-trip delay.
    pub fn beat_frequency(&self, delay: f64) -> Result<f64> {
        if !(delay >= 0.0) || delay >= self.period {
            return Err(Error::DelayOutOfRange {
                delay,
                period: self.period,
            });
        }
        Ok(self.delta_nu * delay / self.period)
    }

    /// Target distance d = ν·T·c/(2Δν).
    pub fn distance_from_frequency(&self, nu: f64) -> Result<f64> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::param("nu", format!("must be finite and >= 0, got {nu}")));
        }
        Ok(nu * self.meters_per_hz())
    }

    /// Laser coherence length c/(π·Δν_FWHM).
    pub fn coherence_length(&self, linewidth_fwhm: f64) -> Result<f64> {
        coherence_length(linewidth_fwhm)
    }

    /// Sweep phase (cycles) with the `nu0·t` term removed. Continuous in `t`,
    /// valid for `t` in `[-period, period)`.
    fn chirp_phase(&self, t: f64) -> f64 {
        let rate = self.delta_nu / (2.0 * self.period);
        if t >= 0.0 {
            return rate * t * t;
        }
        match self.waveform {
            Waveform::Sawtooth => {
                let u = t + self.period;
                rate * u * u - 0.5 * self.delta_nu * self.period
            }
            Waveform::Triangle => {
                let v = t + self.period;
                -0.5 * self.delta_nu * self.period + self.delta_nu * v - rate * v * v
            }
        }
    }

    /// Beat phase (cycles) between the LO at `t` and a copy delayed by `delay`.
    /// For `t < delay` the delayed copy still belongs to the previous sweep.
    fn beat_phase(&self, t: f64, delay: f64, offset: f64) -> f64 {
        if t >= delay {
            // Same sweep: Δν/(2T)·(2tτ − τ²), evaluated without cancellation.
            offset + self.delta_nu * delay / self.period * t - self.delta_nu * delay * delay / (2.0 * self.period)
        } else {
            offset + self.chirp_phase(t) - self.chirp_phase(t - delay)
        }
    }
}

/// c/(π·Δν_FWHM) for a Lorentzian laser linewidth.
pub fn coherence_length(linewidth_fwhm: f64) -> Result<f64> {
    if !(linewidth_fwhm > 0.0) || !linewidth_fwhm.is_finite() {
        return Err(Error::param(
            "linewidth_fwhm",
            format!("must be finite and > 0, got {linewidth_fwhm}"),
        ));
    }
    Ok(SPEED_OF_LIGHT / (std::f64::consts::PI * linewidth_fwhm))
}

/// Round-trip delay for a target at `distance` meters.
pub fn round_trip_delay(distance: f64) -> f64 {
    2.0 * distance / SPEED_OF_LIGHT
}

/// One reflected field: amplitude A_j and round-trip delay τ_j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Return {
    pub amplitude: f64,
    pub delay: f64,
}

impl Return {
    pub fn new(amplitude: f64, delay: f64) -> Self {
        Return { amplitude, delay }
    }

    pub fn at_distance(amplitude: f64, distance: f64) -> Self {
        Return::new(amplitude, round_trip_delay(distance))
    }

    /// Constant phase 2π[ν0τ − (Δν/2T)τ²] in radians, reduced to [0, 2π).
    pub fn phase(&self, cfg: &ChirpConfig) -> f64 {
        let cycles = (cfg.nu0 * self.delay).fract() - cfg.delta_nu * self.delay * self.delay / (2.0 * cfg.period);
        std::f64::consts::TAU * cycles.rem_euclid(1.0)
    }
}

/// Difference-detector samples for one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl ScopeTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn zeros(cfg: &ChirpConfig) -> Self {
        ScopeTrace {
            samples: vec![0.0; cfg.samples_per_sweep()],
            sample_rate: cfg.sample_rate,
        }
    }
}

fn check_return(r: &Return, cfg: &ChirpConfig) -> Result<()> {
    if !r.amplitude.is_finite() || !r.delay.is_finite() {
        return Err(Error::NonFinite("return"));
    }
    if r.amplitude < 0.0 {
        return Err(Error::param("amplitude", format!("must be >= 0, got {}", r.amplitude)));
    }
    if r.delay < 0.0 || r.delay >= cfg.period {
        return Err(Error::DelayOutOfRange {
            delay: r.delay,
            period: cfg.period,
        });
    }
    Ok(())
}

/// Adds `ε0c·A_LO·A·sin(beat phase)` for one return into `out`.
pub(crate) fn add_return(out: &mut [f64], r: &Return, lo_amplitude: f64, cfg: &ChirpConfig) {
    let scale = EPS0_C * lo_amplitude * r.amplitude;
    if scale == 0.0 {
        return;
    }
    let dt = 1.0 / cfg.sample_rate;
    let offset = (cfg.nu0 * r.delay).fract();
    for (i, s) in out.iter_mut().enumerate() {
        let t = i as f64 * dt;
        let cycles = cfg.beat_phase(t, r.delay, offset);
        *s += scale * (std::f64::consts::TAU * cycles.rem_euclid(1.0)).sin();
    }
}

/// Synthesizes the balanced-heterodyne scope trace for a set of returns over
/// one sweep. `duration` must equal the sweep period.
pub fn synthesize_trace(returns: &[Return], lo_amplitude: f64, cfg: &ChirpConfig, duration: f64) -> Result<ScopeTrace> {
    cfg.validate()?;
    if !lo_amplitude.is_finite() || lo_amplitude < 0.0 {
        return Err(Error::param("lo_amplitude", format!("must be finite and >= 0, got {lo_amplitude}")));
    }
    if (duration - cfg.period).abs() > 1e-9 * cfg.period {
        return Err(Error::param(
            "duration",
            format!("must equal one sweep period ({} s), got {duration} s", cfg.period),
        ));
    }
    for r in returns {
        check_return(r, cfg)?;
    }
    let mut trace = ScopeTrace::zeros(cfg);
    for r in returns {
        add_return(&mut trace.samples, r, lo_amplitude, cfg);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ChirpConfig {
        ChirpConfig::paper()
    }

    #[test]
    fn beat_frequency_25m() {
        let nu = cfg().beat_frequency(round_trip_delay(25.0)).unwrap();
        assert!((nu - 16.67e6).abs() / 16.67e6 < 1e-3, "{nu}");
    }

    #[test]
    fn beat_frequency_zero_and_errors() {
        assert_eq!(cfg().beat_frequency(0.0).unwrap(), 0.0);
        assert!(cfg().beat_frequency(-1e-9).is_err());
        assert!(cfg().beat_frequency(1e-3).is_err());
        assert!(cfg().beat_frequency(f64::NAN).is_err());
    }

    #[test]
    fn beat_frequency_roundtrip_22m() {
        let c = cfg();
        let nu = c.beat_frequency(round_trip_delay(22.0)).unwrap();
        let d = c.distance_from_frequency(nu).unwrap();
        assert!((d - 22.0).abs() < 1e-9 * 22.0);
    }

    #[test]
    fn distance_examples() {
        let c = cfg();
        assert!((c.distance_from_frequency(16.67e6).unwrap() - 25.0).abs() / 25.0 < 1e-3);
        assert!((c.distance_from_frequency(1e3).unwrap() - 1.5e-3).abs() / 1.5e-3 < 1e-3);
        assert_eq!(c.distance_from_frequency(0.0).unwrap(), 0.0);
        assert!(c.distance_from_frequency(-1.0).is_err());
    }

    #[test]
    fn coherence_length_examples() {
        let l1 = coherence_length(1e6).unwrap();
        assert!((l1 - 95.4).abs() < 0.1, "{l1}");
        assert!((coherence_length(2e6).unwrap() - l1 / 2.0).abs() < 1e-12);
        let l50k = coherence_length(50e3).unwrap();
        assert_eq!(l50k, 2.998e8 / (std::f64::consts::PI * 50e3));
        assert!(coherence_length(0.0).is_err());
        assert!(coherence_length(-1.0).is_err());
    }

    #[test]
    fn config_invariants() {
        let c = cfg();
        assert_eq!(c.samples_per_sweep(), 33_300);
        assert_eq!(c.positive_bins(), 16_650);
        assert!((c.bin_width() - 1e3).abs() < 1e-9);
        assert!(c.max_range() > 24.9 && c.max_range() < 25.0);
        assert!(ChirpConfig::new(1.0, 0.0, 1e-3, 1e6, Waveform::Sawtooth).is_err());
        assert!(ChirpConfig::new(1.0, 1e9, 1e-3, 1e3, Waveform::Sawtooth).is_err());
        assert!(ChirpConfig::new(1.0, 1e9, 1e-3, 2e3, Waveform::Sawtooth).is_ok());
    }

    #[test]
    fn empty_returns_give_zero_trace() {
        let c = cfg();
        let t = synthesize_trace(&[], 1.0, &c, c.period).unwrap();
        assert_eq!(t.len(), c.samples_per_sweep());
        assert!(t.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_rejects_bad_inputs() {
        let c = cfg();
        assert!(synthesize_trace(&[Return::new(f64::NAN, 1e-7)], 1.0, &c, c.period).is_err());
        assert!(synthesize_trace(&[Return::new(1.0, 2e-3)], 1.0, &c, c.period).is_err());
        assert!(synthesize_trace(&[], 1.0, &c, 0.5e-3).is_err());
    }

    #[test]
    fn phase_is_continuous_at_sweep_reset() {
        for wf in [Waveform::Sawtooth, Waveform::Triangle] {
            let c = ChirpConfig { waveform: wf, ..cfg() };
            let eps = 1e-12;
            let a = c.chirp_phase(-eps);
            let b = c.chirp_phase(0.0);
            // Instantaneous frequency is at most Δν at the reset.
            assert!((a - b).abs() <= c.delta_nu * eps * 1.01 + 1e-6, "{wf:?}: {a} vs {b}");
        }
    }

    #[test]
    fn wrap_region_matches_direct_phase_difference() {
        // Before the delayed copy arrives, the sawtooth beat runs at
        // Δν(τ−T)/T, the triangle beat at Δν(2t−τ)/T.
        let tau = 1e-5;
        let saw = ChirpConfig {
            nu0: 0.0,
            delta_nu: 1e6,
            period: 1e-3,
            sample_rate: 1e6,
            waveform: Waveform::Sawtooth,
        };
        let h = 1e-9;
        let t = 0.5 * tau;
        let f = (saw.beat_phase(t + h, tau, 0.0) - saw.beat_phase(t - h, tau, 0.0)) / (2.0 * h);
        let expected = saw.delta_nu * (tau - saw.period) / saw.period;
        assert!((f - expected).abs() < 1e-3 * expected.abs(), "{f} vs {expected}");

        let tri = ChirpConfig { waveform: Waveform::Triangle, ..saw };
        let f = (tri.beat_phase(t + h, tau, 0.0) - tri.beat_phase(t - h, tau, 0.0)) / (2.0 * h);
        let expected = tri.delta_nu * (2.0 * t - tau) / tri.period;
        assert!((f - expected).abs() < 1e-3 * saw.delta_nu, "{f} vs {expected}");
    }
}
