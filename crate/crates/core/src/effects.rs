//! What a drifting clock does downstream, and two ways to stop it.
//!
//! Oscillometric blood-pressure monitors deflate the cuff by a fixed pressure
//! step per counted clock cycle, so a faster or slower counter changes the
//! deflation rate and with it the pressures read off the oscillation envelope.
//! Countermeasures: a damping mount between the board and the surface, and a
//! PLL clock synthesizer in place of the crystal.

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, ToPrimitive};

use crate::error::{Error, Result};
use crate::rtc::RtcConfig;

/// Inputs of the deflation model. Pressures in mmHg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpScenario {
    /// Cuff pressure when deflation starts.
    pub p0: f64,
    pub systolic: f64,
    pub diastolic: f64,
    /// Nominal deflation rate, mmHg/s.
    pub v0: f64,
    /// Pressure released per counted clock cycle.
    pub dp: f64,
    /// Change in the counter's timing frequency, Hz.
    pub df: f64,
}

impl BpScenario {
    pub fn validate(&self) -> Result<()> {
        let all = [self.p0, self.systolic, self.diastolic, self.v0, self.dp, self.df];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("blood-pressure scenario values must be finite"));
        }
        if !(self.p0 > self.systolic && self.systolic > self.diastolic && self.diastolic > 0.0) {
            return Err(Error::invalid(format!(
                "need P0 > S > D > 0, got {} / {} / {}",
                self.p0, self.systolic, self.diastolic
            )));
        }
        if !(self.v0 > 0.0 && self.dp > 0.0) {
            return Err(Error::invalid("deflation rate and per-cycle step must be > 0"));
        }
        Ok(())
    }

    /// Counter frequency implied by the nominal rate.
    pub fn counter_frequency(&self) -> f64 {
        self.v0 / self.dp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpError {
    pub delta_s: f64,
    pub delta_d: f64,
    /// Deflation rate under the drifted clock, mmHg/s.
    pub new_rate: f64,
    pub systolic_reading: f64,
    pub diastolic_reading: f64,
}

/// Systolic/diastolic reading errors when the counter runs `df` fast.
pub fn bp_error(s: &BpScenario) -> Result<BpError> {
    s.validate()?;
    let step = s.dp * s.df;
    let new_rate = s.v0 + step;
    if new_rate <= 0.0 {
        return Err(Error::DeflationStall { rate: new_rate });
    }
    let delta_s = (s.p0 - s.systolic) * step / s.v0;
    let delta_d = (s.p0 - s.diastolic) * step / s.v0;
    Ok(BpError {
        delta_s,
        delta_d,
        new_rate,
        systolic_reading: s.systolic + delta_s,
        diastolic_reading: s.diastolic + delta_d,
    })
}

/// Sets `df` from a measured RTC rate (RTC seconds per wall second).
pub fn rtc_drift_to_bp(drift_rate: f64, rtc: &RtcConfig, s: &BpScenario) -> Result<BpScenario> {
    if !(drift_rate.is_finite() && drift_rate > 0.0) {
        return Err(Error::invalid(format!("drift rate must be > 0, got {drift_rate}")));
    }
    rtc.validate()?;
    let tick_frequency = 1.0 / rtc.tick_period();
    Ok(BpScenario { df: tick_frequency * (drift_rate - 1.0), ..*s })
}

/// Mass-spring-damper mount under the timing board.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingSpec {
    /// Natural frequency, rad/s.
    pub omega_n: f64,
    /// Damping ratio.
    pub zeta: f64,
}

impl DampingSpec {
    pub fn new(omega_n: f64, zeta: f64) -> Result<Self> {
        let s = Self { omega_n, zeta };
        s.validate()?;
        Ok(s)
    }

    /// From damping coefficient `c` (N·s/m), stiffness `k` (N/m) and mass `m` (kg).
    pub fn from_physical(c: f64, k: f64, m: f64) -> Result<Self> {
        if ![c, k, m].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::invalid(format!("c, k and m must be > 0, got {c}, {k}, {m}")));
        }
        Self::new((k / m).sqrt(), c / (2.0 * (k * m).sqrt()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_n.is_finite() && self.omega_n > 0.0 && self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(Error::invalid(format!(
                "damping needs omega_n > 0 and zeta > 0, got {} and {}",
                self.omega_n, self.zeta
            )));
        }
        Ok(())
    }
}

/// Transmitted fraction of vibration amplitude at `omega` (rad/s).
pub fn damping_attenuation(spec: &DampingSpec, omega: f64) -> Result<f64> {
    spec.validate()?;
    if !(omega >= 0.0) {
        return Err(Error::invalid(format!("omega must be >= 0, got {omega}")));
    }
    if omega.is_infinite() {
        return Ok(0.0);
    }
    let r = omega / spec.omega_n;
    let a = 1.0 - r * r;
    let b = 2.0 * spec.zeta * r;
    Ok(1.0 / (a * a + b * b).sqrt())
}

/// Clock synthesizer: `f_out = pll_mult · ref_freq / multisynth_div`.
/// Values are exact rationals so fractional dividers stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockSynthConfig {
    pub ref_freq: Rational64,
    pub pll_mult: Rational64,
    pub multisynth_div: Rational64,
}

/// Reference crystal of the usual synthesizer parts, Hz.
pub const DEFAULT_REF_FREQ_HZ: i64 = 25_000_000;

impl ClockSynthConfig {
    pub fn new(ref_freq: Rational64, pll_mult: Rational64, multisynth_div: Rational64) -> Result<Self> {
        let c = Self { ref_freq, pll_mult, multisynth_div };
        c.validate()?;
        Ok(c)
    }

    /// From decimal strings such as `"27465.82"`, parsed exactly.
    pub fn parse(ref_freq: &str, pll_mult: &str, multisynth_div: &str) -> Result<Self> {
        Self::new(parse_decimal(ref_freq)?, parse_decimal(pll_mult)?, parse_decimal(multisynth_div)?)
    }

    pub fn validate(&self) -> Result<()> {
        let zero = Rational64::from_integer(0);
        if self.ref_freq <= zero || self.pll_mult <= zero || self.multisynth_div <= zero {
            return Err(Error::invalid("synthesizer reference, PLL multiplier and divider must be > 0"));
        }
        Ok(())
    }

    /// PLL frequency, exact.
    pub fn pll_frequency(&self) -> Result<Rational64> {
        self.pll_mult.checked_mul(&self.ref_freq).ok_or_else(overflow)
    }

    /// Output frequency, exact.
    pub fn output_ratio(&self) -> Result<Rational64> {
        self.validate()?;
        self.pll_frequency()?.checked_div(&self.multisynth_div).ok_or_else(overflow)
    }
}

fn overflow() -> Error {
    Error::invalid("synthesizer arithmetic overflows 64-bit rationals")
}

/// Output frequency in Hz.
pub fn synth_output_freq(cfg: &ClockSynthConfig) -> Result<f64> {
    let r = cfg.output_ratio()?;
    r.to_f64().ok_or_else(overflow)
}

/// Exact value of a decimal literal (`-12.5`, `27465.82`, `2.5e7`).
pub fn parse_decimal(text: &str) -> Result<Rational64> {
    let bad = || Error::invalid(format!("'{text}' is not a decimal number"));
    let t = text.trim();
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let ten = Rational64::from_integer(10);
    let mut value = Rational64::from_integer(0);
    for b in int.bytes().chain(frac.bytes()) {
        let d = Rational64::from_integer((b - b'0') as i64);
        value = value.checked_mul(&ten).and_then(|v| v.checked_add(&d)).ok_or_else(overflow)?;
    }
    let shift = exponent - frac.len() as i32;
    let mut scale = Rational64::from_integer(1);
    for _ in 0..shift.unsigned_abs() {
        scale = scale.checked_mul(&ten).ok_or_else(overflow)?;
    }
    value = if shift >= 0 {
        value.checked_mul(&scale)
    } else {
        value.checked_div(&scale)
    }
    .ok_or_else(overflow)?;
    Ok(if negative { -value } else { value })
}
