//! Attack schedules and their execution against the RTC model.
//!
//! Backward plans stall the divider with bursts opposed to the oscillation;
//! forward plans pull the oscillator phase ahead by a fixed step per burst.
//! Plans live in the crystal's frame (arrival time, induced phase);
//! [`emissions`] turns them into transducer commands.

mod calibration;
mod jsonl;

use std::f64::consts::{PI, TAU};

pub use calibration::{calibrate_phase_map, map_error, MIN_GRID, CalibrationContext, CalibrationOptions, PhaseMap, PhaseMapEntry};
pub use jsonl::{parse_jsonl, write_jsonl, Emission};

use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::rtc::{InjectionBurst, RtcConfig, RtcState, TickEvent};
use crate::signals::{phase_diff, Sinusoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Drift goal: `drift_b` is seconds for backward goals and oscillator cycles
/// for forward goals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftGoal {
    pub window_a: f64,
    pub drift_b: f64,
    pub direction: Direction,
}

impl DriftGoal {
    pub fn new(window_a: f64, drift_b: f64, direction: Direction) -> Result<Self> {
        let goal = Self { window_a, drift_b, direction };
        goal.validate()?;
        Ok(goal)
    }

    pub fn backward(window_a: f64, drift_seconds: f64) -> Result<Self> {
        Self::new(window_a, drift_seconds, Direction::Backward)
    }

    pub fn forward(window_a: f64, drift_cycles: f64) -> Result<Self> {
        Self::new(window_a, drift_cycles, Direction::Forward)
    }

    /// Forward goal from seconds of drift at `nominal_freq`.
    pub fn forward_seconds(window_a: f64, drift_seconds: f64, nominal_freq: f64) -> Result<Self> {
        Self::forward(window_a, drift_seconds * nominal_freq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_a.is_finite() && self.window_a > 0.0) {
            return Err(Error::invalid(format!("window a must be > 0, got {}", self.window_a)));
        }
        if !(self.drift_b.is_finite() && self.drift_b > 0.0) {
            return Err(Error::invalid(format!("drift b must be > 0, got {}", self.drift_b)));
        }
        if self.direction == Direction::Backward && self.drift_b >= self.window_a {
            return Err(Error::Infeasible(format!(
                "backward drift b = {} s must be below window a = {} s",
                self.drift_b, self.window_a
            )));
        }
        Ok(())
    }
}

/// What the attacker observes about the target before planning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub frequency: f64,
    /// Oscillator phase at plan time, wall-clock frame.
    pub beta2: f64,
    /// Induced amplitude at the crystal, V.
    pub amplitude: f64,
    /// Wall time of the first burst's arrival.
    pub start: f64,
}

impl Target {
    pub fn new(frequency: f64, beta2: f64, amplitude: f64, start: f64) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::invalid("target frequency must be > 0"));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::invalid("injection amplitude must be > 0"));
        }
        if !(beta2.is_finite() && start.is_finite()) {
            return Err(Error::invalid("target phase and start must be finite"));
        }
        Ok(Self { frequency, beta2, amplitude, start })
    }
}

/// Uniform burst schedule; bursts are generated on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPlan {
    pub direction: Direction,
    pub burst_count_k: u64,
    pub single_duration_t1: f64,
    pub pause_t2: f64,
    /// Forward phase step; zero for backward plans.
    pub phase_step_delta: f64,
    pub target: Target,
}

impl AttackPlan {
    pub fn len(&self) -> u64 {
        self.burst_count_k
    }

    pub fn is_empty(&self) -> bool {
        self.burst_count_k == 0
    }

    /// Start of burst `j` relative to the plan start.
    pub fn offset(&self, j: u64) -> f64 {
        j as f64 * (self.single_duration_t1 + self.pause_t2)
    }

    /// Induced phase burst `j` must carry.
    pub fn phase(&self, j: u64) -> f64 {
        match self.direction {
            Direction::Backward => self.target.beta2 + PI,
            Direction::Forward => self.target.beta2 + (j + 1) as f64 * self.phase_step_delta,
        }
    }

    pub fn burst(&self, j: u64) -> Result<InjectionBurst> {
        if j >= self.burst_count_k {
            return Err(Error::invalid(format!("burst {j} out of range ({} bursts)", self.burst_count_k)));
        }
        let signal = Sinusoid::new(self.target.amplitude, self.target.frequency, self.phase(j))?;
        InjectionBurst::new(self.target.start + self.offset(j), self.single_duration_t1, signal)
    }

    pub fn bursts(&self) -> impl Iterator<Item = InjectionBurst> + '_ {
        (0..self.burst_count_k).map(|j| self.burst(j).expect("index in range"))
    }

    /// First burst start to last burst end.
    pub fn span(&self) -> f64 {
        if self.burst_count_k == 0 {
            return 0.0;
        }
        self.offset(self.burst_count_k - 1) + self.single_duration_t1
    }

    /// Σ burst durations.
    pub fn total_burst_time(&self) -> f64 {
        self.burst_count_k as f64 * self.single_duration_t1
    }
}

/// Ceiling that treats values within 1e-9 relative of an integer as that integer.
fn robust_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Backward plan: `k = ⌈b/t⌉` stall bursts of length `t`.
///
/// Pauses split the rest of the window evenly, `(a − k·t)/(k − 1)`, which is
/// `(a − b)/(b/t − 1)` whenever `b/t` is a whole number.
pub fn plan_backward(goal: &DriftGoal, t: f64, freeze_timeout: Option<f64>, target: Target) -> Result<AttackPlan> {
    goal.validate()?;
    if goal.direction != Direction::Backward {
        return Err(Error::invalid("plan_backward needs a backward goal"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("burst length t must be > 0, got {t}")));
    }
    if let Some(timeout) = freeze_timeout {
        if t >= timeout {
            return Err(Error::FreezeRisk { burst: t, timeout });
        }
    }
    let (a, b) = (goal.window_a, goal.drift_b);
    let k = robust_ceil(b / t);
    let pause = if k <= 1.0 {
        0.0
    } else {
        let rest = a - k * t;
        if rest < 0.0 {
            return Err(Error::Infeasible(format!("window a = {a} s is shorter than k·t = {} s", k * t)));
        }
        rest / (k - 1.0)
    };
    Ok(AttackPlan {
        direction: Direction::Backward,
        burst_count_k: k as u64,
        single_duration_t1: t,
        pause_t2: pause,
        phase_step_delta: 0.0,
        target,
    })
}

/// Forward plan: `k = ⌈2π·b/Δ⌉` locking bursts of length `t1`, separated by
/// `t2 = (a − t1·k)/(k − 1)`.
pub fn plan_forward(goal: &DriftGoal, t1: f64, delta: f64, target: Target) -> Result<AttackPlan> {
    goal.validate()?;
    if goal.direction != Direction::Forward {
        return Err(Error::invalid("plan_forward needs a forward goal"));
    }
    if !(t1.is_finite() && t1 > 0.0) {
        return Err(Error::invalid(format!("burst length t1 must be > 0, got {t1}")));
    }
    if !(delta > 0.0 && delta < PI) {
        return Err(Error::invalid(format!("phase step Δ must lie in (0, π), got {delta}")));
    }
    let (a, b) = (goal.window_a, goal.drift_b);
    let k = robust_ceil(TAU * b / delta);
    if a <= k * t1 {
        return Err(Error::Infeasible(format!(
            "window a = {a} s must exceed k·t1 = {} s (k = ⌈2π·b/Δ⌉ = {k})",
            k * t1
        )));
    }
    let pause = if k <= 1.0 { 0.0 } else { (a - t1 * k) / (k - 1.0) };
    Ok(AttackPlan {
        direction: Direction::Forward,
        burst_count_k: k as u64,
        single_duration_t1: t1,
        pause_t2: pause,
        phase_step_delta: delta,
        target,
    })
}

/// Burst boundary seen while executing a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstMark {
    pub index: u64,
    pub start: bool,
    pub wall_time: f64,
    pub rtc_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExecutionReport {
    /// Largest |actual β2 − predicted β2| at a forward burst start, rad.
    pub max_prediction_error: f64,
}

/// Runs every burst of `plan` through `state`.
pub fn execute(
    plan: &AttackPlan,
    config: &RtcConfig,
    state: &mut RtcState,
    ticks: Option<&mut Vec<TickEvent>>,
    marks: Option<&mut Vec<BurstMark>>,
) -> Result<ExecutionReport> {
    let predicted = |j: u64| plan.target.beta2 + j as f64 * plan.phase_step_delta;
    execute_bursts(plan.bursts().map(Ok), plan.direction, config, state, ticks, marks, Some(&predicted))
}

/// Runs a stream of bursts: stall injections for backward attacks, locking
/// bursts for forward ones. `predicted(j)` is the oscillator phase the
/// attacker expects at burst `j`; deviations are reported.
pub fn execute_bursts(
    bursts: impl Iterator<Item = Result<InjectionBurst>>,
    direction: Direction,
    config: &RtcConfig,
    state: &mut RtcState,
    mut ticks: Option<&mut Vec<TickEvent>>,
    mut marks: Option<&mut Vec<BurstMark>>,
    predicted: Option<&dyn Fn(u64) -> f64>,
) -> Result<ExecutionReport> {
    let mut report = ExecutionReport::default();
    for (j, burst) in bursts.enumerate() {
        let j = j as u64;
        let burst = burst?;
        state.step_with(config, burst.start, ticks.as_deref_mut());
        if let Some(m) = marks.as_deref_mut() {
            m.push(BurstMark { index: j, start: true, wall_time: burst.start, rtc_time: state.rtc_time });
        }
        match direction {
            Direction::Backward => state.inject(config, &burst, ticks.as_deref_mut())?,
            Direction::Forward => {
                if let Some(p) = predicted {
                    let err = phase_diff(state.osc_phase, p(j)).abs();
                    report.max_prediction_error = report.max_prediction_error.max(err);
                }
                state.apply_phase_advance(config, &burst, ticks.as_deref_mut())?
            }
        }
        if let Some(m) = marks.as_deref_mut() {
            m.push(BurstMark { index: j, start: false, wall_time: burst.end(), rtc_time: state.rtc_time });
        }
    }
    Ok(report)
}

/// Bursts arriving at a crystal `z` metres away from transducer emissions.
pub fn arrivals<'a>(
    emissions: impl Iterator<Item = Emission> + 'a,
    chain: &'a Chain,
    z: f64,
) -> impl Iterator<Item = Result<InjectionBurst>> + 'a {
    let delay = chain.delay(z);
    emissions.map(move |e| {
        e.validate()?;
        let signal = chain.induced_with_drive(z, e.phase_rad, e.amplitude_v)?;
        InjectionBurst::new(e.start_s + delay, e.duration_s, signal)
    })
}

/// Transducer commands for `plan`: emission leads arrival by the travel time
/// and the excitation phase comes from the phase map.
pub fn emissions<'a>(
    plan: &'a AttackPlan,
    map: &'a PhaseMap,
    z: f64,
    delay: f64,
    drive_amplitude: f64,
) -> Result<impl Iterator<Item = Emission> + 'a> {
    let base = map
        .offset(z)
        .ok_or_else(|| Error::invalid(format!("phase map has no entry for z = {z} m")))?;
    Ok(plan.bursts().map(move |b| Emission {
        start_s: b.start - delay,
        duration_s: b.duration,
        phase_rad: crate::signals::wrap_phase(b.signal.phase() - base),
        amplitude_v: drive_amplitude,
    }))
}
