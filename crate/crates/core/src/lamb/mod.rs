//! Antisymmetric Lamb waves in a plate.
//!
//! The fundamental antisymmetric (A0) branch is found by scanning the phase
//! velocity `c_s` upward from a small floor, locating the first sign change
//! of the Rayleigh–Lamb residual and bisecting it to machine resolution.
//! `α = √(ω²/c_L² − k²)` and `β = √(ω²/c_T² − k²)` are evaluated as complex
//! numbers so the sub-sonic branch (both imaginary, `tan → i·tanh`) goes
//! through the same code as the super-sonic one.

mod media;

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signals::Sinusoid;

pub use media::{MediumDb, MediumRecord};

/// Residual threshold a solved mode must meet.
pub const ROOT_TOLERANCE: f64 = 1e-9;

/// Normalised determinant above which coefficients are refused.
pub const DETERMINANT_TOLERANCE: f64 = 1e-6;

/// Default per-metre amplitude retention of the plate.
pub const DEFAULT_ATTENUATION: f64 = 0.9;

/// Solid plate the wave travels through.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumSpec {
    pub name: String,
    /// Longitudinal wave speed, m/s.
    pub c_l: f64,
    /// Transverse wave speed, m/s.
    pub c_t: f64,
    /// kg/m³.
    pub density: f64,
    /// Full plate thickness, m.
    pub thickness: f64,
    /// Amplitude retained per metre travelled, in (0, 1].
    pub attenuation_ratio: f64,
}

impl MediumSpec {
    pub fn new(
        name: impl Into<String>,
        c_l: f64,
        c_t: f64,
        density: f64,
        thickness: f64,
        attenuation_ratio: f64,
    ) -> Result<Self> {
        let m = Self { name: name.into(), c_l, c_t, density, thickness, attenuation_ratio };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be > 0, got {v}")))
            }
        };
        positive(self.c_l, "longitudinal speed")?;
        positive(self.c_t, "transverse speed")?;
        positive(self.density, "density")?;
        positive(self.thickness, "thickness")?;
        if self.c_t >= self.c_l {
            return Err(Error::invalid(format!(
                "transverse speed {} must be below longitudinal speed {}",
                self.c_t, self.c_l
            )));
        }
        if !(self.attenuation_ratio > 0.0 && self.attenuation_ratio <= 1.0) {
            return Err(Error::invalid(format!(
                "attenuation ratio must lie in (0, 1], got {}",
                self.attenuation_ratio
            )));
        }
        Ok(())
    }

    /// Amplitude factor after travelling `z` metres.
    pub fn attenuation_at(&self, z: f64) -> f64 {
        self.attenuation_ratio.powf(z)
    }
}

/// How the plate thickness enters the tangent arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThicknessConvention {
    /// `h = thickness / 2` (plate spans −h..h).
    #[default]
    HalfThickness,
    /// `h = thickness`.
    FullThickness,
}

impl ThicknessConvention {
    pub fn half_thickness(self, thickness: f64) -> f64 {
        match self {
            ThicknessConvention::HalfThickness => 0.5 * thickness,
            ThicknessConvention::FullThickness => thickness,
        }
    }
}

/// Root-search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionOptions {
    /// Lowest phase velocity scanned, m/s.
    pub scan_min: f64,
    /// Scan resolution, m/s.
    pub scan_step: f64,
    pub convention: ThicknessConvention,
}

impl Default for DispersionOptions {
    fn default() -> Self {
        Self { scan_min: 10.0, scan_step: 1.0, convention: ThicknessConvention::HalfThickness }
    }
}

/// Solved A0 mode at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct LambMode {
    /// rad/s.
    pub omega: f64,
    /// Wavenumber, rad/m.
    pub k_a: f64,
    /// Phase velocity `ω / k_a`, m/s.
    pub c_s: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
    /// Half thickness used in the tangent arguments, m.
    pub half_thickness: f64,
    pub coeff_a: Complex64,
    pub coeff_b: Complex64,
    /// Surface displacement amplitude per unit drive amplitude.
    pub lambda_amp: f64,
    /// Phase the mode shape adds to the surface displacement, rad.
    pub phi_offset: f64,
}

impl LambMode {
    pub fn frequency(&self) -> f64 {
        self.omega / TAU
    }

    /// Travel time over `z` metres.
    pub fn delay(&self, z: f64) -> f64 {
        z / self.c_s
    }
}

struct Wavenumbers {
    k: f64,
    alpha: Complex64,
    beta: Complex64,
}

fn wavenumbers(medium: &MediumSpec, omega: f64, c: f64) -> Wavenumbers {
    let k = omega / c;
    let k2 = Complex64::new(k * k, 0.0);
    let alpha = (Complex64::new((omega / medium.c_l).powi(2), 0.0) - k2).sqrt();
    let beta = (Complex64::new((omega / medium.c_t).powi(2), 0.0) - k2).sqrt();
    Wavenumbers { k, alpha, beta }
}

/// The two terms of `(k²−β²)²·sin(αh)·cos(βh) + 4k²αβ·cos(αh)·sin(βh)`.
fn residual_terms(w: &Wavenumbers, h: f64) -> (Complex64, Complex64) {
    let k2 = w.k * w.k;
    let kb = Complex64::new(k2, 0.0) - w.beta * w.beta;
    let ah = w.alpha * h;
    let bh = w.beta * h;
    let t1 = kb * kb * ah.sin() * bh.cos();
    let t2 = 4.0 * k2 * w.alpha * w.beta * ah.cos() * bh.sin();
    (t1, t2)
}

/// Dispersion residual at phase velocity `c`, rotated onto the real axis.
///
/// Below `c_L` the complex residual is purely imaginary, above it purely
/// real, so the sign of the returned value is meaningful within a regime.
pub fn residual(medium: &MediumSpec, omega: f64, c: f64, h: f64) -> f64 {
    let (t1, t2) = residual_terms(&wavenumbers(medium, omega, c), h);
    let f = t1 + t2;
    if c < medium.c_l {
        f.im
    } else {
        f.re
    }
}

/// `|T1 + T2| / (|T1| + |T2|)`: zero at a root, one when nothing cancels.
pub fn normalized_residual(medium: &MediumSpec, omega: f64, c: f64, h: f64) -> f64 {
    let (t1, t2) = residual_terms(&wavenumbers(medium, omega, c), h);
    let scale = t1.norm() + t2.norm();
    if scale == 0.0 {
        0.0
    } else {
        (t1 + t2).norm() / scale
    }
}

/// A0 mode at `f` Hz with default search settings.
pub fn solve_dispersion(medium: &MediumSpec, f: f64) -> Result<LambMode> {
    solve_dispersion_with(medium, f, &DispersionOptions::default())
}

pub fn solve_dispersion_with(medium: &MediumSpec, f: f64, opts: &DispersionOptions) -> Result<LambMode> {
    medium.validate()?;
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::invalid(format!("frequency must be > 0, got {f}")));
    }
    if !(opts.scan_step > 0.0 && opts.scan_min > 0.0 && opts.scan_min < medium.c_t) {
        return Err(Error::invalid(format!(
            "scan must start in (0, c_T = {}) with a positive step; got min {} step {}",
            medium.c_t, opts.scan_min, opts.scan_step
        )));
    }
    let omega = TAU * f;
    let h = opts.convention.half_thickness(medium.thickness);
    let g = |c: f64| residual(medium, omega, c, h);

    let mut lo = opts.scan_min;
    let mut g_lo = g(lo);
    let mut i = 1_u64;
    loop {
        let hi = (opts.scan_min + i as f64 * opts.scan_step).min(medium.c_t);
        let g_hi = g(hi);
        if g_lo == 0.0 {
            return finish(medium, omega, lo, h);
        }
        if g_lo.signum() != g_hi.signum() {
            let c = bisect(&g, lo, hi, g_lo);
            if normalized_residual(medium, omega, c, h) < ROOT_TOLERANCE {
                return finish(medium, omega, c, h);
            }
        }
        if hi >= medium.c_t {
            break;
        }
        lo = hi;
        g_lo = g_hi;
        i += 1;
    }
    Err(Error::NoRoot { lo: opts.scan_min, hi: medium.c_t })
}

/// Bisects until the bracket collapses to adjacent floats.
fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut g_lo: f64) -> f64 {
    let mut g_hi = g(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    if g_lo.abs() <= g_hi.abs() {
        lo
    } else {
        hi
    }
}

fn finish(medium: &MediumSpec, omega: f64, c: f64, h: f64) -> Result<LambMode> {
    let w = wavenumbers(medium, omega, c);
    let mut mode = LambMode {
        omega,
        k_a: w.k,
        c_s: c,
        alpha: w.alpha,
        beta: w.beta,
        half_thickness: h,
        coeff_a: Complex64::new(0.0, 0.0),
        coeff_b: Complex64::new(0.0, 0.0),
        lambda_amp: 0.0,
        phi_offset: 0.0,
    };
    let (a, b) = mode_coefficients(&mode, medium)?;
    // u_x at the surface (x = 0) is (αA − i·k·B)·V·e^{iθ}; its real part is
    // |C|·V·sin(θ + arg(i·C)).
    let surface = mode.alpha * a - Complex64::i() * mode.k_a * b;
    mode.coeff_a = a;
    mode.coeff_b = b;
    mode.lambda_amp = surface.norm();
    mode.phi_offset = (Complex64::i() * surface).arg();
    Ok(mode)
}

/// Boundary-condition matrix whose determinant vanishes on the A0 branch.
pub fn boundary_matrix(mode: &LambMode) -> [[Complex64; 2]; 2] {
    let k = mode.k_a;
    let i = Complex64::i();
    let kb = Complex64::new(k * k, 0.0) - mode.beta * mode.beta;
    let ah = mode.alpha * mode.half_thickness;
    let bh = mode.beta * mode.half_thickness;
    [
        [2.0 * i * k * mode.alpha * ah.cos(), kb * bh.cos()],
        [kb * ah.sin(), 2.0 * i * k * mode.beta * bh.sin()],
    ]
}

/// Null-space direction `(A, B)` of the boundary matrix.
///
/// Normalised so `max(|A|, |B|) = 1` with the larger component real and
/// positive, which makes the result independent of the scale of the input.
pub fn mode_coefficients(mode: &LambMode, medium: &MediumSpec) -> Result<(Complex64, Complex64)> {
    let expected_h = mode.half_thickness;
    if !(expected_h > 0.0 && expected_h <= medium.thickness) {
        return Err(Error::invalid("mode half thickness does not fit the medium"));
    }
    let m = boundary_matrix(mode);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = (m[0][0] * m[1][1]).norm() + (m[0][1] * m[1][0]).norm();
    let det_norm = if scale == 0.0 { 0.0 } else { det.norm() / scale };
    if det_norm > DETERMINANT_TOLERANCE {
        return Err(Error::InconsistentMode { determinant: det_norm });
    }
    let row0 = m[0][0].norm_sqr() + m[0][1].norm_sqr();
    let row1 = m[1][0].norm_sqr() + m[1][1].norm_sqr();
    let (a, b) = if row0 >= row1 { (m[0][1], -m[0][0]) } else { (m[1][1], -m[1][0]) };
    normalize_pair(a, b).ok_or(Error::InconsistentMode { determinant: det_norm })
}

/// Scales `(a, b)` so the larger component is 1 + 0i.
pub fn normalize_pair(a: Complex64, b: Complex64) -> Option<(Complex64, Complex64)> {
    let pivot = if a.norm() >= b.norm() { a } else { b };
    if pivot.norm() == 0.0 || !pivot.norm().is_finite() {
        return None;
    }
    Some((a / pivot, b / pivot))
}

fn check_drive(mode: &LambMode, drive: &Sinusoid) -> Result<()> {
    let f = mode.frequency();
    if (drive.frequency() - f).abs() > 1e-9 * f {
        return Err(Error::FrequencyMismatch { left: drive.frequency(), right: f });
    }
    Ok(())
}

/// Steady surface displacement at distance `z` as a sinusoid in absolute time.
///
/// Amplitude `λ = p·ε^z·|αA − i·k·B|`, phase
/// `Φ = −ω·t_T + φ − k·z + arg(i·(αA − i·k·B))`, with the drive `p·sin(ωt + φ)`
/// switched on at t = 0.
pub fn surface_wave(mode: &LambMode, medium: &MediumSpec, drive: &Sinusoid, z: f64) -> Result<Sinusoid> {
    check_drive(mode, drive)?;
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::invalid(format!("distance must be >= 0, got {z}")));
    }
    let amplitude = drive.amplitude() * medium.attenuation_at(z) * mode.lambda_amp;
    let phase = -mode.omega * mode.delay(z) + drive.phase() - mode.k_a * z + mode.phi_offset;
    Sinusoid::new(amplitude, drive.frequency(), phase)
}

/// `ξ = γ_pre + λ·sin(ωt + Φ)` at the surface, valid once the wave has arrived.
pub fn surface_displacement(
    mode: &LambMode,
    medium: &MediumSpec,
    drive: &Sinusoid,
    z: f64,
    t: f64,
    gamma_pre: f64,
) -> Result<f64> {
    let wave = surface_wave(mode, medium, drive, z)?;
    let arrival = mode.delay(z);
    if t <= arrival {
        return Err(Error::NotYetArrived { t, arrival });
    }
    Ok(gamma_pre + wave.value_at(t))
}

/// Like [`surface_displacement`] but returns the resting surface `γ_pre`
/// before the wave arrives.
pub fn surface_displacement_or_rest(
    mode: &LambMode,
    medium: &MediumSpec,
    drive: &Sinusoid,
    z: f64,
    t: f64,
    gamma_pre: f64,
) -> Result<f64> {
    match surface_displacement(mode, medium, drive, z, t, gamma_pre) {
        Err(Error::NotYetArrived { .. }) => Ok(gamma_pre),
        other => other,
    }
}

/// Time for the A0 wave at `f` to travel `z` metres.
pub fn propagation_delay(medium: &MediumSpec, f: f64, z: f64) -> Result<f64> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::invalid(format!("distance must be >= 0, got {z}")));
    }
    Ok(solve_dispersion(medium, f)?.delay(z))
}
