//! Spread-spectrum-clock leakage: synthesis, preprocessing and device-model
//! matching.
//!
//! A capture is rescaled to a fixed span, band-passed around each candidate
//! centre frequency, wavelet-denoised, and its power spectrum compared with
//! the noise-free spectrum of every library profile at that centre.

mod denoise;
mod io;

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signals::SampledTrace;

pub use denoise::{bandpass_taps, denoise, DenoiseOptions, ThresholdRule, DB4};
pub use io::{decode_trace, encode_trace, read_trace_csv, write_trace_csv, ProfileLibrary, TRACE_MAGIC};

/// Confidence below which a capture is reported as unknown.
pub const DEFAULT_UNKNOWN_THRESHOLD: f64 = 0.6;

/// One device model's clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SscProfile {
    pub label: String,
    /// Centre clock frequency, Hz.
    pub f0: f64,
    /// Modulation frequency, Hz.
    pub fm: f64,
    /// Fractional frequency offset.
    pub df: f64,
    /// Peak amplitude, V.
    pub amplitude: f64,
}

impl SscProfile {
    pub fn new(label: impl Into<String>, f0: f64, fm: f64, df: f64) -> Result<Self> {
        let p = Self { label: label.into(), f0, fm, df, amplitude: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fm.is_finite() && self.fm > 0.0 && self.f0.is_finite() && self.f0 > self.fm) {
            return Err(Error::invalid(format!(
                "profile '{}': need f0 > fm > 0, got f0 = {}, fm = {}",
                self.label, self.f0, self.fm
            )));
        }
        // df = 0 is the unmodulated limit
        if !(self.df.is_finite() && self.df >= 0.0) {
            return Err(Error::invalid(format!("profile '{}': df must be >= 0, got {}", self.label, self.df)));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::invalid(format!("profile '{}': amplitude must be > 0", self.label)));
        }
        Ok(())
    }

    /// Highest instantaneous frequency.
    pub fn max_frequency(&self) -> f64 {
        self.f0 * (1.0 + self.df)
    }

    /// Clean waveform at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let beta = self.df * self.f0 / self.fm;
        self.amplitude * (TAU * self.f0 * t + beta * (TAU * self.fm * t).sin()).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureConfig {
    /// Hz.
    pub sample_rate: f64,
    /// s.
    pub duration: f64,
    /// Signal-to-noise ratio of synthetic captures; `f64::INFINITY` for none.
    pub snr_db: f64,
    /// Lower and upper scaling bounds, mV.
    pub scale_a: f64,
    pub scale_b: f64,
    /// Band-pass width around each centre frequency, Hz.
    pub bandwidth_m: f64,
    pub denoise: DenoiseOptions,
    pub unknown_threshold: f64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 1e6,
            duration: 0.1,
            snr_db: 15.0,
            scale_a: 50.0,
            scale_b: 50.0,
            bandwidth_m: 40e3,
            denoise: DenoiseOptions::default(),
            unknown_threshold: DEFAULT_UNKNOWN_THRESHOLD,
        }
    }
}

impl CaptureConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be > 0, got {v}")))
            }
        };
        positive(self.sample_rate, "sample rate")?;
        positive(self.duration, "duration")?;
        positive(self.scale_a, "scale a")?;
        positive(self.scale_b, "scale b")?;
        positive(self.bandwidth_m, "bandwidth M")?;
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr must be a number or +inf"));
        }
        if !(0.0..=1.0).contains(&self.unknown_threshold) {
            return Err(Error::invalid(format!("unknown threshold must be in [0, 1], got {}", self.unknown_threshold)));
        }
        self.denoise.validate()
    }

    /// Nyquist check against one profile.
    pub fn check_profile(&self, p: &SscProfile) -> Result<()> {
        p.validate()?;
        if self.sample_rate <= 2.0 * p.max_frequency() {
            return Err(Error::invalid(format!(
                "sample rate {} Hz does not exceed twice the top frequency of '{}' ({} Hz)",
                self.sample_rate,
                p.label,
                p.max_frequency()
            )));
        }
        Ok(())
    }

    fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Cached FFT plan; planning a 100k-point transform costs more than running it.
fn fft(size: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(size)
        } else {
            p.plan_fft_forward(size)
        }
    })
}

/// Samples `profile` with white Gaussian noise at `cfg.snr_db`.
pub fn synthesize(profile: &SscProfile, cfg: &CaptureConfig, seed: u64) -> Result<SampledTrace> {
    cfg.validate()?;
    cfg.check_profile(profile)?;
    let n = cfg.sample_count();
    if n < 2 {
        return Err(Error::invalid("capture is shorter than two samples"));
    }
    let mut samples: Vec<f64> = (0..n).map(|i| profile.value_at(i as f64 / cfg.sample_rate)).collect();
    if cfg.snr_db.is_finite() {
        let signal_power = 0.5 * profile.amplitude * profile.amplitude;
        let sigma = (signal_power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
        add_noise(&mut samples, sigma, seed)?;
    }
    SampledTrace::new(cfg.sample_rate, samples, 0.0)
}

/// Gaussian noise alone, `rms` volts.
pub fn white_noise(cfg: &CaptureConfig, rms: f64, seed: u64) -> Result<SampledTrace> {
    cfg.validate()?;
    let mut samples = vec![0.0; cfg.sample_count()];
    add_noise(&mut samples, rms, seed)?;
    SampledTrace::new(cfg.sample_rate, samples, 0.0)
}

fn add_noise(samples: &mut [f64], sigma: f64, seed: u64) -> Result<()> {
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in samples.iter_mut() {
        *x += dist.sample(&mut rng);
    }
    Ok(())
}

/// Maps the trace's minimum to `-a` and its maximum to `b`.
pub fn scale(trace: &SampledTrace, a: f64, b: f64) -> Result<SampledTrace> {
    if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
        return Err(Error::invalid(format!("scale bounds must be > 0, got a = {a}, b = {b}")));
    }
    let (lo, hi) = trace.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(hi > lo) {
        return Err(Error::Degenerate("trace is constant".into()));
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("trace contains non-finite samples"));
    }
    let span = hi - lo;
    // written so u = 0 and u = 1 land exactly on the bounds
    let samples = trace
        .samples
        .iter()
        .map(|&x| {
            let u = (x - lo) / span;
            -a * (1.0 - u) + b * u
        })
        .collect();
    SampledTrace::new(trace.sample_rate, samples, trace.start_time)
}

/// Hann-windowed power spectrum, bins `0..=n/2`.
pub fn power_spectrum(trace: &SampledTrace) -> Vec<f64> {
    let n = trace.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = trace
        .samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let w = 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos();
            Complex64::new(x * w, 0.0)
        })
        .collect();
    fft(n, false).process(&mut buf);
    buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// Outcome of [`classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Best label, or `None` when every confidence is below the threshold.
    pub label: Option<String>,
    /// Confidence per library label, in library order.
    pub confidences: Vec<(String, f64)>,
}

impl Classification {
    pub fn best(&self) -> Option<(&str, f64)> {
        self.confidences
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(l, c)| (l.as_str(), *c))
    }
}

#[derive(Debug, Clone)]
struct Band {
    f0: f64,
    lo: usize,
    hi: usize,
}

/// Library templates prepared for one capture length and rate.
#[derive(Debug, Clone)]
pub struct Classifier {
    cfg: CaptureConfig,
    len: usize,
    profiles: Vec<SscProfile>,
    bands: Vec<Band>,
    /// (band index, template) per profile.
    templates: Vec<(usize, Vec<f64>)>,
}

impl Classifier {
    pub fn new(library: &[SscProfile], cfg: &CaptureConfig) -> Result<Self> {
        if library.is_empty() {
            return Err(Error::invalid("profile library is empty"));
        }
        cfg.validate()?;
        let len = cfg.sample_count();
        let mut bands: Vec<Band> = Vec::new();
        let mut templates = Vec::with_capacity(library.len());
        let clean = CaptureConfig { snr_db: f64::INFINITY, ..*cfg };
        for p in library {
            let trace = synthesize(p, &clean, 0)?;
            let band = match bands.iter().position(|b| b.f0 == p.f0) {
                Some(i) => i,
                None => {
                    let half = 0.5 * cfg.bandwidth_m;
                    let bin = |f: f64| (f * len as f64 / cfg.sample_rate).round() as usize;
                    bands.push(Band { f0: p.f0, lo: bin(p.f0 - half), hi: bin(p.f0 + half).min(len / 2) });
                    bands.len() - 1
                }
            };
            let spectrum = band_spectrum(&trace, &bands[band], cfg)?;
            templates.push((band, spectrum));
        }
        Ok(Self { cfg: *cfg, len, profiles: library.to_vec(), bands, templates })
    }

    pub fn classify(&self, trace: &SampledTrace) -> Result<Classification> {
        if trace.len() != self.len || (trace.sample_rate - self.cfg.sample_rate).abs() > 1e-9 * self.cfg.sample_rate {
            return Err(Error::invalid(format!(
                "capture has {} samples at {} Hz, templates were built for {} at {} Hz",
                trace.len(),
                trace.sample_rate,
                self.len,
                self.cfg.sample_rate
            )));
        }
        let scaled = match scale(trace, self.cfg.scale_a, self.cfg.scale_b) {
            Ok(s) => s,
            // a flat capture carries no clock at all
            Err(Error::Degenerate(_)) => return Ok(self.unknown()),
            Err(e) => return Err(e),
        };
        let spectra = self
            .bands
            .iter()
            .map(|b| band_spectrum(&scaled, b, &self.cfg))
            .collect::<Result<Vec<_>>>()?;
        let confidences: Vec<(String, f64)> = self
            .profiles
            .iter()
            .zip(&self.templates)
            .map(|(p, (band, tpl))| (p.label.clone(), cosine(&spectra[*band], tpl)))
            .collect();
        let mut out = Classification { label: None, confidences };
        if let Some((label, c)) = out.best() {
            if c >= self.cfg.unknown_threshold {
                out.label = Some(label.to_string());
            }
        }
        Ok(out)
    }

    fn unknown(&self) -> Classification {
        Classification { label: None, confidences: self.profiles.iter().map(|p| (p.label.clone(), 0.0)).collect() }
    }
}

/// One-shot classification; templates are built for the trace's own length.
pub fn classify(trace: &SampledTrace, library: &[SscProfile], cfg: &CaptureConfig) -> Result<Classification> {
    let cfg = CaptureConfig { sample_rate: trace.sample_rate, duration: trace.len() as f64 / trace.sample_rate, ..*cfg };
    Classifier::new(library, &cfg)?.classify(trace)
}

fn band_spectrum(trace: &SampledTrace, band: &Band, cfg: &CaptureConfig) -> Result<Vec<f64>> {
    let clean = denoise(trace, band.f0, cfg.bandwidth_m, &cfg.denoise)?;
    let p = power_spectrum(&clean);
    Ok(p[band.lo..=band.hi].to_vec())
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}
