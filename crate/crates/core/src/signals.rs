//! Equal-frequency sinusoid algebra.
//!
//! Every signal in the attack chain (the free oscillation, the induced
//! crystal response, surface displacement, stress) is a single-frequency
//! sinusoid `A·sin(2πf·t + β)` with `t` measured in absolute wall time.
//! Superposition is carried out on complex phasors `A·e^{iβ}`; the
//! sum-to-product closed form is kept alongside as a cross-check.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance used when comparing phases modulo 2π.
pub const PHASE_TOLERANCE: f64 = 1e-9;

/// Relative tolerance when deciding whether two frequencies are "equal".
const FREQ_REL_TOL: f64 = 1e-9;

/// Minimum oversampling accepted by [`render`].
pub const MIN_OVERSAMPLING: f64 = 16.0;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed angular difference `a − b` wrapped into `(−π, π]`.
pub fn phase_diff(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// `A·sin(2πf·t + β)`.
#[derive(Debug, Clone, Copy)]
pub struct Sinusoid {
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

impl Sinusoid {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::invalid(format!("amplitude must be finite and >= 0, got {amplitude}")));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::invalid(format!("frequency must be finite and > 0, got {frequency}")));
        }
        if !phase.is_finite() {
            return Err(Error::invalid(format!("phase must be finite, got {phase}")));
        }
        Ok(Self { amplitude, frequency, phase: wrap_phase(phase) })
    }

    /// Builds a sinusoid from a complex phasor `A·e^{iβ}`.
    pub fn from_phasor(z: Complex64, frequency: f64) -> Result<Self> {
        let amplitude = z.norm();
        let phase = if amplitude == 0.0 { 0.0 } else { z.arg() };
        Self::new(amplitude, frequency, phase)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn angular_frequency(&self) -> f64 {
        TAU * self.frequency
    }

    pub fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    pub fn with_amplitude(self, amplitude: f64) -> Result<Self> {
        Self::new(amplitude, self.frequency, self.phase)
    }

    pub fn with_phase(self, phase: f64) -> Self {
        Self { phase: wrap_phase(phase), ..self }
    }

    /// Value at absolute time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        self.amplitude * (TAU * self.frequency * t + self.phase).sin()
    }

    /// Approximate equality: amplitudes and frequencies within `tol`
    /// (relative to the larger magnitude), phases within `tol` modulo 2π.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let scale = self.amplitude.max(other.amplitude).max(1.0);
        if (self.amplitude - other.amplitude).abs() > tol * scale {
            return false;
        }
        if !same_frequency(self.frequency, other.frequency) {
            return false;
        }
        if self.amplitude <= tol * scale && other.amplitude <= tol * scale {
            return true;
        }
        phase_diff(self.phase, other.phase).abs() <= tol
    }
}

impl PartialEq for Sinusoid {
    fn eq(&self, other: &Self) -> bool {
        self.amplitude == other.amplitude
            && self.frequency == other.frequency
            && (self.amplitude == 0.0 || self.phase == other.phase)
    }
}

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQ_REL_TOL * a.abs().max(b.abs())
}

fn check_same_frequency(f: &Sinusoid, g: &Sinusoid) -> Result<()> {
    if same_frequency(f.frequency, g.frequency) {
        Ok(())
    } else {
        Err(Error::FrequencyMismatch { left: f.frequency, right: g.frequency })
    }
}

/// Sum of two equal-frequency sinusoids, computed on complex phasors.
pub fn superpose(f: &Sinusoid, g: &Sinusoid) -> Result<Sinusoid> {
    check_same_frequency(f, g)?;
    Sinusoid::from_phasor(f.phasor() + g.phasor(), f.frequency)
}

/// Sum-to-product form of [`superpose`].
///
/// `φ = √(A² + B² + 2AB·cos(β1−β2))`, phase `(β1+β2)/2 + γ` with
/// `tan γ = ((A−B)/(A+B))·tan((β1−β2)/2)`. The quadrant of γ is taken from
/// `atan2((A−B)·sin δ, (A+B)·cos δ)`, δ = (β1−β2)/2, which is the branch
/// that reproduces pointwise addition.
pub fn superpose_closed_form(f: &Sinusoid, g: &Sinusoid) -> Result<Sinusoid> {
    check_same_frequency(f, g)?;
    let (a, b) = (f.amplitude, g.amplitude);
    let (b1, b2) = (f.phase, g.phase);
    let cross = 2.0 * a * b * (b1 - b2).cos();
    let amplitude = (a * a + b * b + cross).max(0.0).sqrt();
    let half = 0.5 * (b1 - b2);
    let gamma = ((a - b) * half.sin()).atan2((a + b) * half.cos());
    Sinusoid::new(amplitude, f.frequency, 0.5 * (b1 + b2) + gamma)
}

/// Oscillator phase after superposing an injection that leads it by `delta`.
///
/// `β2′ = β2 + Δ/2 + arctan(((A−B)/(A+B))·tan(Δ/2))`, where `a` is the
/// injected amplitude and `b` the oscillation amplitude. The result is not
/// wrapped so that `β2 < β2′ < β2 + Δ` holds literally.
pub fn phase_after_superposition(beta2: f64, delta: f64, a: f64, b: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < PI) {
        return Err(Error::invalid(format!("phase offset must lie in (0, π), got {delta}")));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(format!("amplitudes must be positive, got A={a}, B={b}")));
    }
    Ok(beta2 + phase_advance(delta, a, b))
}

/// `Δ/2 + arctan(((A−B)/(A+B))·tan(Δ/2))` for `Δ ∈ [0, π)`; no validation.
pub(crate) fn phase_advance(delta: f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * delta;
    half + (((a - b) / (a + b)) * half.tan()).atan()
}

/// Uniformly sampled voltage trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub start_time: f64,
}

impl SampledTrace {
    pub fn new(sample_rate: f64, samples: Vec<f64>, start_time: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!("sample rate must be > 0, got {sample_rate}")));
        }
        if !start_time.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        Ok(Self { sample_rate, samples, start_time })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Samples `s` at `sample_rate` for `duration` seconds starting at t = 0.
pub fn render(s: &Sinusoid, sample_rate: f64, duration: f64) -> Result<SampledTrace> {
    render_from(s, sample_rate, 0.0, duration)
}

/// Like [`render`] but starting at absolute time `start`.
pub fn render_from(s: &Sinusoid, sample_rate: f64, start: f64, duration: f64) -> Result<SampledTrace> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(format!("duration must be > 0, got {duration}")));
    }
    if !(sample_rate.is_finite() && sample_rate >= MIN_OVERSAMPLING * s.frequency * (1.0 - 1e-12)) {
        return Err(Error::invalid(format!(
            "sample rate {sample_rate} Hz is below {MIN_OVERSAMPLING}x the carrier ({} Hz)",
            s.frequency
        )));
    }
    let n = (duration * sample_rate).round() as usize;
    let samples = (0..n).map(|i| s.value_at(start + i as f64 / sample_rate)).collect();
    SampledTrace::new(sample_rate, samples, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin(a: f64, phase: f64) -> Sinusoid {
        Sinusoid::new(a, 32768.0, phase).unwrap()
    }

    #[test]
    fn destructive_cancellation() {
        let s = superpose(&sin(1.0, 0.0), &sin(1.0, PI)).unwrap();
        assert!(s.amplitude() < 1e-15);
    }

    #[test]
    fn identical_phase_doubles() {
        let s = superpose(&sin(1.0, 0.3), &sin(1.0, 0.3)).unwrap();
        assert!((s.amplitude() - 2.0).abs() < 1e-15);
        assert!((s.phase() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn opposed_injection_leaves_75() {
        let s = superpose(&sin(5.0, PI + 0.56), &sin(80.0, 0.56)).unwrap();
        assert!((s.amplitude() - 75.0).abs() < 1e-12);
        assert!(phase_diff(s.phase(), 0.56).abs() < 1e-12);
    }

    #[test]
    fn mismatched_frequencies_rejected() {
        let f = Sinusoid::new(1.0, 100.0, 0.0).unwrap();
        let g = Sinusoid::new(1.0, 101.0, 0.0).unwrap();
        assert!(matches!(superpose(&f, &g), Err(Error::FrequencyMismatch { .. })));
        assert!(superpose_closed_form(&f, &g).is_err());
    }

    #[test]
    fn closed_form_agrees_in_branch_ambiguous_region() {
        // A < B with |β1 − β2| > π/2 is where a plain arctan picks the wrong branch.
        let f = sin(0.3, 2.9);
        let g = sin(1.7, 0.1);
        let a = superpose(&f, &g).unwrap();
        let b = superpose_closed_form(&f, &g).unwrap();
        assert!(a.approx_eq(&b, 1e-12), "{a:?} vs {b:?}");
    }

    #[test]
    fn zero_amplitudes_equal_regardless_of_phase() {
        assert_eq!(sin(0.0, 0.1), sin(0.0, 2.0));
        assert_ne!(sin(1.0, 0.1), sin(1.0, 2.0));
    }

    #[test]
    fn phase_is_canonical() {
        let s = sin(1.0, -0.5);
        assert!((s.phase() - (TAU - 0.5)).abs() < 1e-15);
        assert_eq!(sin(1.0, TAU).phase(), 0.0);
        assert_eq!(wrap_phase(-1e-18), 0.0);
    }

    #[test]
    fn invalid_construction() {
        assert!(Sinusoid::new(-1.0, 1.0, 0.0).is_err());
        assert!(Sinusoid::new(1.0, 0.0, 0.0).is_err());
        assert!(Sinusoid::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn phase_update_equal_amplitudes_is_midpoint() {
        let p = phase_after_superposition(0.0, PI / 2.0, 1.0, 1.0).unwrap();
        assert!((p - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn phase_update_dominant_injection() {
        let p = phase_after_superposition(0.0, PI / 2.0, 1e6, 1.0).unwrap();
        assert!((p - PI / 2.0).abs() < 1e-5);
    }

    #[test]
    fn phase_update_matches_superpose() {
        let (beta2, delta) = (1.0, PI / 3.0);
        let expected = 1.0 + PI / 6.0 + ((1.0 / 3.0) * (PI / 6.0).tan()).atan();
        let p = phase_after_superposition(beta2, delta, 2.0, 1.0).unwrap();
        assert!((p - expected).abs() < 1e-15);
        let s = superpose(&sin(2.0, beta2 + delta), &sin(1.0, beta2)).unwrap();
        assert!(phase_diff(s.phase(), p).abs() < 1e-12);
    }

    #[test]
    fn phase_update_rejects_out_of_range() {
        assert!(phase_after_superposition(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(phase_after_superposition(0.0, PI, 1.0, 1.0).is_err());
        assert!(phase_after_superposition(0.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn render_quarter_period_peak() {
        let s = Sinusoid::new(1.0, 1.0, 0.0).unwrap();
        let tr = render(&s, 64.0, 1.0).unwrap();
        assert_eq!(tr.len(), 64);
        assert!((tr.samples[16] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn render_zero_amplitude() {
        let s = Sinusoid::new(0.0, 1.0, 0.7).unwrap();
        let tr = render(&s, 64.0, 1.0).unwrap();
        assert!(tr.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn render_rtc_carrier() {
        let s = Sinusoid::new(2.0, 32768.0, PI / 2.0).unwrap();
        let tr = render(&s, 2.097152e6, 1e-3).unwrap();
        assert_eq!(tr.len(), 2097);
        assert_eq!(tr.samples[0], 2.0);
        assert!((tr.peak() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn render_rejects_undersampling() {
        let s = Sinusoid::new(1.0, 1.0, 0.0).unwrap();
        assert!(render(&s, 15.9, 1.0).is_err());
        assert!(render(&s, 64.0, 0.0).is_err());
    }
}
