//! Event-driven RTC emulation: oscillator waveform, edge-triggered divider
//! and tick counter.
//!
//! Between events the comparator input is `R·sin(2π·u(t))` with constant `R`
//! and `u` (phase in cycles) linear in time. Upward crossings of the trigger
//! level happen where `u ≡ asin(θ/R)/2π (mod 1)`, so they are counted with
//! floor arithmetic instead of sampling. Where the waveform jumps (an
//! injection switching on or off) one crossing is counted iff the value
//! before is below the threshold and the value after is at or above it.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::signals::{self, wrap_phase, Sinusoid, PHASE_TOLERANCE};

/// Safety cap on convergence passes within one burst.
pub const MAX_CONVERGENCE_PASSES: usize = 1_000_000;

/// Bursts this many time constants long end fully locked to the injection.
pub const LOCK_TIME_CONSTANTS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CounterMode {
    /// One tick per second of oscillation.
    #[default]
    Calendar,
    /// Millisecond-scale ticks from a short divider.
    ThirtyTwoBit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtcConfig {
    pub nominal_freq: f64,
    /// Peak oscillation amplitude at the comparator, V.
    pub nominal_amplitude: f64,
    pub trigger_threshold: f64,
    pub divider_reload: u32,
    pub mode: CounterMode,
    /// Freeze after this long without a crossing.
    pub freeze_timeout: Option<f64>,
    pub convergence_time_constant: f64,
}

impl Default for RtcConfig {
    fn default() -> Self {
        Self::calendar()
    }
}

impl RtcConfig {
    pub fn calendar() -> Self {
        Self {
            nominal_freq: 32768.0,
            nominal_amplitude: 0.080,
            trigger_threshold: 0.040,
            divider_reload: 32768,
            mode: CounterMode::Calendar,
            freeze_timeout: None,
            convergence_time_constant: 3e-6,
        }
    }

    /// 32-bit counter mode; a reload of 32 gives ticks of about 0.977 ms.
    pub fn thirty_two_bit(divider_reload: u32) -> Self {
        Self { divider_reload, mode: CounterMode::ThirtyTwoBit, ..Self::calendar() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_freq.is_finite() && self.nominal_freq > 0.0) {
            return Err(Error::invalid("nominal frequency must be > 0"));
        }
        if !(self.nominal_amplitude.is_finite() && self.nominal_amplitude > 0.0) {
            return Err(Error::invalid("nominal amplitude must be > 0"));
        }
        if !(self.trigger_threshold > 0.0 && self.trigger_threshold < self.nominal_amplitude) {
            return Err(Error::invalid(format!(
                "trigger threshold {} must lie in (0, {})",
                self.trigger_threshold, self.nominal_amplitude
            )));
        }
        if !(1..=65535).contains(&self.divider_reload) {
            return Err(Error::invalid(format!("divider reload {} outside [1, 65535]", self.divider_reload)));
        }
        if let Some(t) = self.freeze_timeout {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid("freeze timeout must be > 0"));
            }
        }
        if !(self.convergence_time_constant.is_finite() && self.convergence_time_constant > 0.0) {
            return Err(Error::invalid("convergence time constant must be > 0"));
        }
        Ok(())
    }

    /// RTC seconds per tick.
    pub fn tick_period(&self) -> f64 {
        self.divider_reload as f64 / self.nominal_freq
    }

    fn check_frequency(&self, s: &Sinusoid) -> Result<()> {
        if (s.frequency() - self.nominal_freq).abs() > 1e-9 * self.nominal_freq {
            return Err(Error::FrequencyMismatch { left: s.frequency(), right: self.nominal_freq });
        }
        Ok(())
    }

    /// Crossing offset in cycles for amplitude `r`, or `None` when the peak
    /// never exceeds the threshold.
    fn level(&self, r: f64) -> Option<f64> {
        (r > self.trigger_threshold).then(|| (self.trigger_threshold / r).asin() / TAU)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionBurst {
    /// Wall time at the crystal, s.
    pub start: f64,
    pub duration: f64,
    pub signal: Sinusoid,
}

impl InjectionBurst {
    pub fn new(start: f64, duration: f64, signal: Sinusoid) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid(format!("burst duration must be > 0, got {duration}")));
        }
        if !start.is_finite() {
            return Err(Error::invalid("burst start must be finite"));
        }
        Ok(Self { start, duration, signal })
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// One divider underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickEvent {
    pub wall_time: f64,
    pub rtc_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtcState {
    /// Free-running phase `β2` in the wall-clock frame; not wrapped.
    pub osc_phase: f64,
    pub osc_amplitude: f64,
    /// Crossings left before the next tick.
    pub counter: u32,
    pub rtc_time: f64,
    pub wall_time: f64,
    pub frozen: bool,
    pub injection: Option<Sinusoid>,
    pub ticks: u64,
    pub crossings: u64,
    pub last_crossing: f64,
    epoch: f64,
}

/// Linear piece of `u(t)` at constant amplitude.
struct Segment {
    t0: f64,
    t1: f64,
    u0: f64,
    u1: f64,
    level: Option<f64>,
}

impl RtcState {
    /// Fresh state at wall time `start`, with RTC time equal to wall time.
    pub fn new(config: &RtcConfig, start: f64, osc_phase: f64) -> Self {
        Self {
            osc_phase,
            osc_amplitude: config.nominal_amplitude,
            counter: config.divider_reload,
            rtc_time: start,
            wall_time: start,
            frozen: false,
            injection: None,
            ticks: 0,
            crossings: 0,
            last_crossing: start,
            epoch: start,
        }
    }

    /// Clears a freeze and restarts the divider.
    pub fn reset(&mut self, config: &RtcConfig) {
        self.frozen = false;
        self.counter = config.divider_reload;
        self.last_crossing = self.wall_time;
    }

    /// `rtc_time − wall_time`.
    pub fn drift(&self) -> f64 {
        self.rtc_time - self.wall_time
    }

    /// The free-running oscillation.
    pub fn oscillation(&self, config: &RtcConfig) -> Sinusoid {
        Sinusoid::new(self.osc_amplitude, config.nominal_freq, self.osc_phase)
            .expect("state holds a valid oscillation")
    }

    /// Amplitude and phase of the comparator input right now.
    pub fn waveform(&self, config: &RtcConfig) -> (f64, f64) {
        match &self.injection {
            None => (self.osc_amplitude, self.osc_phase),
            Some(inj) => {
                let s = signals::superpose(&self.oscillation(config), inj).expect("injection frequency checked");
                (s.amplitude(), s.phase())
            }
        }
    }

    /// Comparator input at the current wall time.
    pub fn output(&self, config: &RtcConfig) -> f64 {
        let (r, psi) = self.waveform(config);
        value(r, cycles(config.nominal_freq, self.wall_time, psi))
    }

    /// Switches the injected signal at the current wall time.
    pub fn set_injection(&mut self, config: &RtcConfig, injection: Option<Sinusoid>) -> Result<()> {
        self.switch_injection(config, injection, None)
    }

    fn switch_injection(
        &mut self,
        config: &RtcConfig,
        injection: Option<Sinusoid>,
        events: Option<&mut Vec<TickEvent>>,
    ) -> Result<()> {
        if let Some(s) = &injection {
            config.check_frequency(s)?;
        }
        let before = self.output(config);
        self.injection = injection;
        let after = self.output(config);
        self.boundary(config, before, after, events);
        Ok(())
    }

    /// Runs the current waveform until `until`.
    pub fn step(&mut self, config: &RtcConfig, until: f64) {
        self.step_with(config, until, None);
    }

    /// [`RtcState::step`], appending divider ticks to `events`.
    pub fn step_recording(&mut self, config: &RtcConfig, until: f64, events: &mut Vec<TickEvent>) {
        self.step_with(config, until, Some(events));
    }

    /// [`RtcState::step`] with optional tick recording.
    pub fn step_with(&mut self, config: &RtcConfig, until: f64, events: Option<&mut Vec<TickEvent>>) {
        if until <= self.wall_time {
            return;
        }
        let (r, psi) = self.waveform(config);
        let f = config.nominal_freq;
        let seg = Segment {
            t0: self.wall_time,
            t1: until,
            u0: cycles(f, self.wall_time, psi),
            u1: cycles(f, until, psi),
            level: config.level(r),
        };
        self.run(config, &seg, events);
    }

    /// Holds `burst` on the oscillator as a plain superposition, then removes it.
    pub fn inject(&mut self, config: &RtcConfig, burst: &InjectionBurst, mut events: Option<&mut Vec<TickEvent>>) -> Result<()> {
        config.check_frequency(&burst.signal)?;
        self.advance_to(config, burst.start, events.as_deref_mut())?;
        self.switch_injection(config, Some(burst.signal), events.as_deref_mut())?;
        self.step_with(config, burst.end(), events.as_deref_mut());
        self.switch_injection(config, None, events)
    }

    /// Injection-locking burst: the oscillator phase is pulled toward the
    /// injected phase and keeps whatever it reached when the burst ends.
    pub fn apply_phase_advance(
        &mut self,
        config: &RtcConfig,
        burst: &InjectionBurst,
        mut events: Option<&mut Vec<TickEvent>>,
    ) -> Result<()> {
        config.check_frequency(&burst.signal)?;
        if self.injection.is_some() {
            return Err(Error::invalid("phase advance while another injection is active"));
        }
        self.advance_to(config, burst.start, events.as_deref_mut())?;
        let delta = wrap_phase(burst.signal.phase() - self.osc_phase);
        if delta < PHASE_TOLERANCE || TAU - delta < PHASE_TOLERANCE || burst.signal.amplitude() == 0.0 {
            self.step_with(config, burst.end(), events);
            return Ok(());
        }
        if delta >= PI {
            return Err(Error::Infeasible(format!(
                "phase offset {delta} rad between injection and oscillation is outside (0, π)"
            )));
        }
        let path = convergence_path(
            delta,
            burst.signal.amplitude(),
            self.osc_amplitude,
            config.convergence_time_constant,
            burst.duration,
        )?;
        let f = config.nominal_freq;
        let level = config.level(self.osc_amplitude);
        let beta2 = self.osc_phase;
        for w in path.windows(2) {
            let (t0, t1) = (burst.start + w[0].0, burst.start + w[1].0);
            if t1 <= t0 {
                continue;
            }
            let seg = Segment {
                t0,
                t1,
                u0: cycles(f, t0, beta2 + w[0].1),
                u1: cycles(f, t1, beta2 + w[1].1),
                level,
            };
            self.run(config, &seg, events.as_deref_mut());
        }
        self.osc_phase = beta2 + path.last().map_or(0.0, |k| k.1);
        self.wall_time = burst.end();
        Ok(())
    }

    fn advance_to(&mut self, config: &RtcConfig, t: f64, events: Option<&mut Vec<TickEvent>>) -> Result<()> {
        if t < self.wall_time - 1e-12 * self.wall_time.abs().max(1.0) {
            return Err(Error::invalid(format!("burst at {t} s starts before current time {} s", self.wall_time)));
        }
        self.step_with(config, t, events);
        Ok(())
    }

    fn boundary(&mut self, config: &RtcConfig, before: f64, after: f64, events: Option<&mut Vec<TickEvent>>) {
        let now = self.wall_time;
        self.check_freeze(config, now);
        if !self.frozen && before < config.trigger_threshold && config.trigger_threshold <= after {
            self.register(config, 1, |_| now, events);
        }
    }

    fn check_freeze(&mut self, config: &RtcConfig, t: f64) {
        if let Some(timeout) = config.freeze_timeout {
            if t - self.last_crossing >= timeout {
                self.frozen = true;
            }
        }
    }

    fn run(&mut self, config: &RtcConfig, seg: &Segment, events: Option<&mut Vec<TickEvent>>) {
        self.wall_time = seg.t1;
        if self.frozen {
            return;
        }
        let Some(c) = seg.level else {
            self.check_freeze(config, seg.t1);
            return;
        };
        let m0 = (seg.u0 - c).floor();
        let m1 = (seg.u1 - c).floor();
        let mut n = (m1 - m0).max(0.0) as u64;
        let slope = (seg.t1 - seg.t0) / (seg.u1 - seg.u0);
        let time_of = |j: u64| seg.t0 + (m0 + j as f64 + c - seg.u0) * slope;
        if let Some(timeout) = config.freeze_timeout {
            if n == 0 {
                self.check_freeze(config, seg.t1);
                return;
            }
            if time_of(1) - self.last_crossing >= timeout {
                self.frozen = true;
                return;
            }
            if n > 1 && slope >= timeout {
                n = 1;
                self.frozen = true;
            }
        }
        if n > 0 {
            self.register(config, n, time_of, events);
        }
    }

    /// Feeds `n` crossings to the divider; `time_of(j)` is the time of the
    /// j-th one (1-based).
    fn register(&mut self, config: &RtcConfig, n: u64, time_of: impl Fn(u64) -> f64, events: Option<&mut Vec<TickEvent>>) {
        let reload = config.divider_reload as u64;
        let counter = self.counter as u64;
        self.crossings += n;
        self.last_crossing = time_of(n);
        if n < counter {
            self.counter = (counter - n) as u32;
            return;
        }
        let rest = n - counter;
        let ticks = 1 + rest / reload;
        self.counter = (reload - rest % reload) as u32;
        if let Some(events) = events {
            for i in 0..ticks {
                let t = time_of(counter + i * reload);
                let rtc = self.epoch + (self.ticks + i + 1) as f64 * config.tick_period();
                events.push(TickEvent { wall_time: t, rtc_time: rtc });
            }
        }
        self.ticks += ticks;
        self.rtc_time = self.epoch + self.ticks as f64 * config.tick_period();
    }
}

fn cycles(f: f64, t: f64, phase: f64) -> f64 {
    f * t + phase / TAU
}

fn value(r: f64, u: f64) -> f64 {
    r * (TAU * (u - u.floor())).sin()
}

/// Knots `(time since burst start, phase gained)` of the oscillator phase
/// during an injection-locking burst; linear between knots.
///
/// Each knot applies one superposition pass `Δr ← Δr − advance(Δr, A, B)` to
/// the remaining offset. Passes are spaced so the remaining offset decays as
/// `Δ·e^{−t/τ}`, and at `5τ` the phase ramps onto the injected phase.
pub fn convergence_path(delta: f64, a: f64, b: f64, tau: f64, duration: f64) -> Result<Vec<(f64, f64)>> {
    if !(delta > 0.0 && delta < PI) {
        return Err(Error::invalid(format!("phase offset must lie in (0, π), got {delta}")));
    }
    if !(a > 0.0 && b > 0.0 && tau > 0.0 && duration > 0.0) {
        return Err(Error::invalid("convergence needs positive amplitudes, time constant and duration"));
    }
    let lock = LOCK_TIME_CONSTANTS * tau;
    let horizon = duration.min(lock);
    let mut knots = vec![(0.0, 0.0)];
    let (mut t, mut rem) = (0.0, delta);
    loop {
        let next = rem - signals::phase_advance(rem, a, b);
        if next <= 0.0 {
            break;
        }
        let nt = t + tau * (rem / next).ln();
        if nt >= horizon {
            break;
        }
        if nt > t {
            knots.push((nt, delta - next));
        }
        t = nt;
        rem = next;
        if knots.len() > MAX_CONVERGENCE_PASSES {
            return Err(Error::Degenerate(format!(
                "injection amplitude {a} V too weak to converge from {delta} rad"
            )));
        }
    }
    // last partial interval, interpolated toward the next pass or the lock point
    let (t_last, g_last) = *knots.last().expect("starts with origin");
    let next = rem - signals::phase_advance(rem, a, b);
    let (t_next, g_next) = if next > 0.0 {
        let nt = t_last + tau * (rem / next).ln();
        if nt >= lock { (lock, delta) } else { (nt, delta - next) }
    } else {
        (t_last.max(0.0), delta)
    };
    if duration >= lock {
        knots.push((lock, delta));
        if duration > lock {
            knots.push((duration, delta));
        }
    } else if t_next > t_last {
        let frac = ((duration - t_last) / (t_next - t_last)).min(1.0);
        knots.push((duration, g_last + frac * (g_next - g_last)));
    } else {
        knots.push((duration, delta));
    }
    Ok(knots)
}

/// Pure form of [`RtcState::step`].
pub fn step(mut state: RtcState, config: &RtcConfig, until: f64) -> RtcState {
    state.step(config, until);
    state
}

/// Pure form of [`RtcState::apply_phase_advance`].
pub fn apply_phase_advance(mut state: RtcState, config: &RtcConfig, burst: &InjectionBurst) -> Result<RtcState> {
    state.apply_phase_advance(config, burst, None)?;
    Ok(state)
}

/// `rtc_time − wall_time`; positive when the RTC runs ahead.
pub fn measure_drift(state: &RtcState) -> f64 {
    state.drift()
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: f64 = 32768.0;

    fn inj(a: f64, phase: f64) -> Sinusoid {
        Sinusoid::new(a, F, phase).unwrap()
    }

    #[test]
    fn free_running_second_is_one_tick() {
        let cfg = RtcConfig::default();
        let s = step(RtcState::new(&cfg, 0.0, 0.0), &cfg, 1.0);
        assert_eq!(s.crossings, 32768);
        assert_eq!(s.ticks, 1);
        assert_eq!(s.rtc_time, 1.0);
        assert_eq!(measure_drift(&s), 0.0);
    }

    #[test]
    fn fresh_state_has_no_drift() {
        let cfg = RtcConfig::default();
        assert_eq!(measure_drift(&RtcState::new(&cfg, 3.0, 1.0)), 0.0);
    }

    #[test]
    fn opposed_injection_stalls_counter() {
        let cfg = RtcConfig::default();
        let mut s = RtcState::new(&cfg, 0.0, 0.56);
        s.set_injection(&cfg, Some(inj(0.040, 0.56 + PI))).unwrap();
        s.step(&cfg, 10.0);
        assert_eq!(s.crossings, 0);
        assert_eq!(s.rtc_time, 0.0);
        assert!((measure_drift(&s) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn small_opposed_injection_keeps_counting() {
        let cfg = RtcConfig::default();
        let mut s = RtcState::new(&cfg, 0.0, 0.56);
        s.set_injection(&cfg, Some(inj(0.005, 0.56 + PI))).unwrap();
        let (r, _) = s.waveform(&cfg);
        assert!((r - 0.075).abs() < 1e-12);
        s.step(&cfg, 1.0);
        assert_eq!(s.ticks, 1);
    }

    #[test]
    fn zero_offset_leaves_phase() {
        let cfg = RtcConfig::default();
        let s = RtcState::new(&cfg, 0.0, 1.0);
        let burst = InjectionBurst::new(0.0, 1e-3, inj(0.04, 1.0)).unwrap();
        let after = apply_phase_advance(s.clone(), &cfg, &burst).unwrap();
        let plain = step(s, &cfg, 1e-3);
        assert_eq!(after, plain);
        assert_eq!(after.osc_phase, 1.0);
    }

    #[test]
    fn offset_of_pi_is_rejected() {
        let cfg = RtcConfig::default();
        let s = RtcState::new(&cfg, 0.0, 0.0);
        let burst = InjectionBurst::new(0.0, 1e-3, inj(0.04, PI + 0.1)).unwrap();
        assert!(matches!(apply_phase_advance(s, &cfg, &burst), Err(Error::Infeasible(_))));
    }

    #[test]
    fn full_convergence_locks_exactly() {
        let cfg = RtcConfig::default();
        let s = RtcState::new(&cfg, 0.0, 0.3);
        let burst = InjectionBurst::new(0.0, 20e-6, inj(0.005, 0.3 + 2.0)).unwrap();
        let s = apply_phase_advance(s, &cfg, &burst).unwrap();
        assert!((s.osc_phase - 2.3).abs() < 1e-12);
    }

    #[test]
    fn partial_convergence_keeps_residual() {
        let cfg = RtcConfig::default();
        let s = RtcState::new(&cfg, 0.0, 0.0);
        let burst = InjectionBurst::new(0.0, 3e-6, inj(0.04, 1.0)).unwrap();
        let s = apply_phase_advance(s, &cfg, &burst).unwrap();
        assert!(s.osc_phase > 0.0 && s.osc_phase < 1.0);
        // one time constant leaves about e^{-1} of the offset
        assert!((1.0 - s.osc_phase - (-1.0f64).exp()).abs() < 0.05, "{}", s.osc_phase);
    }

    #[test]
    fn path_is_monotone_and_bounded() {
        let path = convergence_path(2.9, 0.044, 0.08, 3e-6, 40e-6).unwrap();
        assert!(path.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
        assert_eq!(path.last().unwrap(), &(40e-6, 2.9));
        assert!(path.iter().all(|k| k.1 <= 2.9));
    }

    #[test]
    fn path_envelope_is_exponential_at_knots() {
        let tau = 3e-6;
        let path = convergence_path(1.5, 0.02, 0.08, tau, 10e-6).unwrap();
        for &(t, g) in &path[..path.len() - 1] {
            assert!(((1.5 - g) - 1.5 * (-t / tau).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn freeze_after_timeout() {
        let cfg = RtcConfig { freeze_timeout: Some(0.1), ..RtcConfig::default() };
        let mut s = RtcState::new(&cfg, 0.0, 0.0);
        s.set_injection(&cfg, Some(inj(0.08, PI))).unwrap();
        s.step(&cfg, 0.2);
        assert!(s.frozen);
        s.set_injection(&cfg, None).unwrap();
        s.step(&cfg, 5.0);
        assert_eq!(s.ticks, 0);
        s.reset(&cfg);
        s.step(&cfg, 6.0);
        assert!(!s.frozen);
        assert_eq!(s.ticks, 1);
    }

    #[test]
    fn validates_config() {
        assert!(RtcConfig::default().validate().is_ok());
        assert!(RtcConfig { trigger_threshold: 0.09, ..RtcConfig::default() }.validate().is_err());
        assert!(RtcConfig::thirty_two_bit(0).validate().is_err());
        assert!(RtcConfig::thirty_two_bit(32).validate().is_ok());
        assert!((RtcConfig::thirty_two_bit(32).tick_period() - 0.9765625e-3).abs() < 1e-15);
    }

    #[test]
    fn frequency_mismatch_rejected() {
        let cfg = RtcConfig::default();
        let mut s = RtcState::new(&cfg, 0.0, 0.0);
        assert!(s.set_injection(&cfg, Some(Sinusoid::new(0.01, 32000.0, 0.0).unwrap())).is_err());
    }
}
