//! One function per subcommand. Every CSV starts with its header row.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rtcdrift::chain::Chain;
use rtcdrift::effects::{self, BpScenario};
use rtcdrift::fingerprint::{self, Classification, Classifier};
use rtcdrift::lamb;
use rtcdrift::planner::{self, AttackPlan, BurstMark, CalibrationContext, Direction, Emission, PhaseMap, Target};
use rtcdrift::rtc::{RtcState, TickEvent};
use rtcdrift::signals::SampledTrace;

use crate::config::Scenario;
use crate::error::CliError;
use crate::sweep::Sweep;
use crate::Command;

pub fn dispatch(cmd: Command, s: &Scenario, sweep: Option<&Sweep>, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Dispersion => dispersion(s, sweep, out),
        Command::Calibrate => calibrate(s, sweep, out),
        Command::Plan => {
            no_sweep(sweep, "plan")?;
            plan(s, out)
        }
        Command::Simulate => {
            no_sweep(sweep, "simulate")?;
            simulate(s, out)
        }
        Command::Classify => classify(s, sweep, out),
        Command::Bp => bp(s, sweep, out),
        Command::Counter => counter(s, sweep, out),
    }
}

fn no_sweep(sweep: Option<&Sweep>, name: &str) -> Result<(), CliError> {
    match sweep {
        None => Ok(()),
        Some(_) => Err(CliError::Usage(format!("{name} takes no --sweep"))),
    }
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().from_writer(out)
}

/// Shortest round-trip form; scientific outside [1e-4, 1e15).
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn dispersion(s: &Scenario, sweep: Option<&Sweep>, out: &mut dyn Write) -> Result<(), CliError> {
    let sw = s.sweep(&s.dispersion.sweep, sweep, "dispersion")?;
    sw.expect_key(&["frequency_hz", "thickness_mm"])?;
    let db = s.media()?;
    let names: Vec<String> = match s.dispersion.materials.as_slice() {
        [] => vec![s.medium.material.clone()],
        [star] if star == "*" => db.records().iter().map(|r| r.name.clone()).collect(),
        list => list.to_vec(),
    };
    let opts = s.dispersion_options();
    let mut points = Vec::new();
    for name in &names {
        for v in sw.values() {
            let (f, mm) = match sw.key.as_str() {
                "frequency_hz" => (v, s.medium.thickness_mm),
                _ => (s.dispersion.frequency_hz, v),
            };
            points.push((name.as_str(), f, mm));
        }
    }
    let rows = points
        .par_iter()
        .map(|&(name, f, mm)| -> Result<Vec<String>, CliError> {
            let medium = s.medium_spec(&db, name, mm)?;
            let mode = lamb::solve_dispersion_with(&medium, f, &opts)?;
            let res = lamb::normalized_residual(&medium, mode.omega, mode.c_s, mode.half_thickness);
            Ok(vec![name.to_string(), num(mm), num(f), num(mode.c_s), num(mode.k_a), num(res)])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv_writer(out);
    w.write_record(["material", "thickness_mm", "frequency_hz", "c_s_m_s", "k_a_rad_m", "normalized_residual"])?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn calibration_context(s: &Scenario, chain: Chain) -> CalibrationContext {
    CalibrationContext::new(chain, s.oscillator.initial_phase_rad, s.seed, s.calibration_options())
}

pub fn calibrate(s: &Scenario, sweep: Option<&Sweep>, out: &mut dyn Write) -> Result<(), CliError> {
    let positions = match sweep {
        Some(sw) => {
            sw.expect_key(&["position_m"])?;
            sw.values()
        }
        None if s.calibration.positions_m.is_empty() => vec![s.transducer.position_m],
        None => s.calibration.positions_m.clone(),
    };
    let mut ctx = calibration_context(s, s.chain()?);
    let mut map: Option<PhaseMap> = None;
    for z in positions {
        let m = planner::calibrate_phase_map(&mut ctx, z, s.calibration.grid)?;
        match map.as_mut() {
            None => map = Some(m),
            Some(acc) => acc.merge(&m),
        }
    }
    let mut w = csv_writer(out);
    w.write_record(["z_m", "phi_rad", "beta1_rad"])?;
    for e in map.iter().flat_map(|m| m.entries()) {
        w.write_record([num(e.z), num(e.phi), num(e.beta1)])?;
    }
    w.flush()?;
    Ok(())
}

/// A calibrated plan ready to emit.
pub struct Attack {
    pub chain: Chain,
    pub map: PhaseMap,
    pub plan: AttackPlan,
    pub z: f64,
}

impl Attack {
    pub fn prepare(s: &Scenario) -> Result<Self, CliError> {
        let chain = s.chain()?;
        let z = s.transducer.position_m;
        let (goal, burst, step) = s.drift_goal(chain.rtc.nominal_freq)?;
        let mut ctx = calibration_context(s, chain.clone());
        let map = planner::calibrate_phase_map(&mut ctx, z, s.calibration.grid)?;
        let amplitude = chain.induced(z, 0.0)?.amplitude();
        let target = Target::new(chain.rtc.nominal_freq, s.oscillator.initial_phase_rad, amplitude, s.oscillator.attack_start_s)?;
        let plan = match goal.direction {
            Direction::Backward => planner::plan_backward(&goal, burst, chain.rtc.freeze_timeout, target)?,
            Direction::Forward => planner::plan_forward(&goal, burst, step, target)?,
        };
        Ok(Self { chain, map, plan, z })
    }

    pub fn emissions(&self) -> Result<impl Iterator<Item = Emission> + '_, CliError> {
        Ok(planner::emissions(&self.plan, &self.map, self.z, self.chain.delay(self.z), self.chain.drive_amplitude)?)
    }
}

pub fn plan(s: &Scenario, out: &mut dyn Write) -> Result<(), CliError> {
    let attack = Attack::prepare(s)?;
    planner::write_jsonl(out, attack.emissions()?)?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Start,
    BurstStart,
    Tick,
    BurstEnd,
    End,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Start => "start",
            Kind::BurstStart => "burst_start",
            Kind::Tick => "tick",
            Kind::BurstEnd => "burst_end",
            Kind::End => "end",
        }
    }
}

/// Simulated run of the scenario's attack: drift at each event.
pub struct Simulation {
    pub rows: Vec<(f64, f64, &'static str)>,
    pub final_state: RtcState,
}

pub fn run_simulation(s: &Scenario) -> Result<Simulation, CliError> {
    let attack = Attack::prepare(s)?;
    let cfg = attack.chain.rtc;
    let mut state = RtcState::new(&cfg, 0.0, s.oscillator.initial_phase_rad);
    let mut ticks: Vec<TickEvent> = Vec::new();
    let mut marks: Vec<BurstMark> = Vec::new();
    let plan = attack.plan;
    let predicted = |j: u64| plan.target.beta2 + j as f64 * plan.phase_step_delta;
    let bursts = planner::arrivals(attack.emissions()?, &attack.chain, attack.z);
    planner::execute_bursts(
        bursts,
        plan.direction,
        &cfg,
        &mut state,
        s.simulate.tick_rows.then_some(&mut ticks),
        s.simulate.burst_rows.then_some(&mut marks),
        Some(&predicted),
    )?;
    let tail = s.oscillator.tail_s;
    if !(tail.is_finite() && tail >= 0.0) {
        return Err(CliError::Config(format!("oscillator.tail_s: must be >= 0, got {tail}")));
    }
    let end = plan.target.start + plan.span().max(s.drift_goal(cfg.nominal_freq)?.0.window_a) + tail;
    state.step_with(&cfg, end, s.simulate.tick_rows.then_some(&mut ticks));

    let mut events: Vec<(f64, Kind, f64)> = Vec::with_capacity(ticks.len() + marks.len() + 2);
    events.push((0.0, Kind::Start, 0.0));
    events.extend(ticks.iter().map(|t| (t.wall_time, Kind::Tick, t.rtc_time)));
    events.extend(marks.iter().map(|m| {
        let kind = if m.start { Kind::BurstStart } else { Kind::BurstEnd };
        (m.wall_time, kind, m.rtc_time)
    }));
    // stable: equal times keep engine order within a kind
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    events.push((state.wall_time, Kind::End, state.rtc_time));
    let rows = events.into_iter().map(|(w, k, r)| (w, r, k.name())).collect();
    Ok(Simulation { rows, final_state: state })
}

pub fn simulate(s: &Scenario, out: &mut dyn Write) -> Result<(), CliError> {
    let sim = run_simulation(s)?;
    let mut w = csv_writer(out);
    w.write_record(["event", "wall_time_s", "rtc_time_s", "drift_s"])?;
    for (wall, rtc, kind) in sim.rows {
        w.write_record([kind.to_string(), num(wall), num(rtc), num(rtc - wall)])?;
    }
    w.flush()?;
    Ok(())
}

fn load_trace(s: &Scenario, path: &std::path::Path) -> Result<SampledTrace, CliError> {
    let full = s.resolve(path);
    let read_err = |e: std::io::Error| CliError::Config(format!("fingerprint.trace_path: cannot read {}: {e}", full.display()));
    if full.extension().is_some_and(|e| e == "bin") {
        Ok(fingerprint::decode_trace(&std::fs::read(&full).map_err(read_err)?)?)
    } else {
        Ok(fingerprint::read_trace_csv(&std::fs::read_to_string(&full).map_err(read_err)?)?)
    }
}

pub fn classify(s: &Scenario, sweep: Option<&Sweep>, out: &mut dyn Write) -> Result<(), CliError> {
    let lib = s.library()?;
    let cfg = s.capture_config()?;
    let labels: Vec<String> = lib.profiles().iter().map(|p| p.label.clone()).collect();
    let mut header = vec!["snr_db", "truth", "trial", "predicted", "confidence"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend(labels.iter().cloned());

    // (snr, truth, trial, result)
    let rows: Vec<(String, String, String, Classification)> = if let Some(p) = &s.fingerprint.trace_path {
        if sweep.is_some() {
            return Err(CliError::Usage("classify of a recorded trace takes no --sweep".into()));
        }
        let trace = load_trace(s, p)?;
        let c = fingerprint::classify(&trace, lib.profiles(), &cfg)?;
        vec![(String::new(), String::new(), String::new(), c)]
    } else {
        let snrs = match sweep {
            Some(sw) => {
                sw.expect_key(&["snr_db"])?;
                sw.values()
            }
            None => vec![cfg.snr_db],
        };
        let chosen: Vec<&fingerprint::SscProfile> = if s.fingerprint.profiles.is_empty() {
            lib.profiles().iter().collect()
        } else {
            s.fingerprint
                .profiles
                .iter()
                .map(|l| {
                    lib.get(l).ok_or_else(|| CliError::Config(format!("fingerprint.profiles: unknown label {l:?}")))
                })
                .collect::<Result<_, _>>()?
        };
        let classifier = Classifier::new(lib.profiles(), &cfg)?;
        let mut jobs = Vec::new();
        for &snr in &snrs {
            for p in &chosen {
                for trial in 0..s.fingerprint.trials {
                    jobs.push((snr, *p, trial));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let seeds: Vec<u64> = jobs.iter().map(|_| rng.random()).collect();
        jobs.par_iter()
            .zip(seeds.par_iter())
            .map(|(&(snr, p, trial), &seed)| -> Result<_, CliError> {
                let capture = rtcdrift::fingerprint::CaptureConfig { snr_db: snr, ..cfg };
                let trace = fingerprint::synthesize(p, &capture, seed)?;
                Ok((num(snr), p.label.clone(), trial.to_string(), classifier.classify(&trace)?))
            })
            .collect::<Result<_, _>>()?
    };

    let mut w = csv_writer(out);
    w.write_record(&header)?;
    for (snr, truth, trial, c) in rows {
        let best = c.best().map_or(0.0, |b| b.1);
        let mut rec = vec![snr, truth, trial, c.label.clone().unwrap_or_else(|| "unknown".into()), num(best)];
        rec.extend(c.confidences.iter().map(|(_, v)| num(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn bp(s: &Scenario, sweep: Option<&Sweep>, out: &mut dyn Write) -> Result<(), CliError> {
    let sw = s.sweep(&s.bp.sweep, sweep, "bp")?;
    sw.expect_key(&["df_hz", "drift_rate"])?;
    let base = s.bp_scenario()?;
    let rtc = s.rtc_config()?;
    let mut w = csv_writer(out);
    w.write_record([
        "drift_rate",
        "df_hz",
        "new_rate_mmhg_per_s",
        "delta_systolic_mmhg",
        "delta_diastolic_mmhg",
        "systolic_reading_mmhg",
        "diastolic_reading_mmhg",
        "status",
    ])?;
    for v in sw.values() {
        let (rate, scenario) = match sw.key.as_str() {
            "drift_rate" => (num(v), effects::rtc_drift_to_bp(v, &rtc, &base)?),
            _ => (String::new(), BpScenario { df: v, ..base }),
        };
        let df = num(scenario.df);
        match effects::bp_error(&scenario) {
            Ok(e) => w.write_record([
                rate,
                df,
                num(e.new_rate),
                num(e.delta_s),
                num(e.delta_d),
                num(e.systolic_reading),
                num(e.diastolic_reading),
                "ok".into(),
            ])?,
            Err(rtcdrift::Error::DeflationStall { rate: r }) => w.write_record([
                rate,
                df,
                num(r),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "stall".into(),
            ])?,
            Err(e) => return Err(e.into()),
        }
    }
    w.flush()?;
    Ok(())
}

pub fn counter(s: &Scenario, sweep: Option<&Sweep>, out: &mut dyn Write) -> Result<(), CliError> {
    let sw = s.sweep(&s.counter.sweep, sweep, "counter")?;
    sw.expect_key(&["omega_rad_s"])?;
    let damping = s.damping()?;
    let synth = s.synth()?;
    let exact = synth.output_ratio()?;
    let freq = effects::synth_output_freq(&synth)?;
    let mut w = csv_writer(out);
    w.write_record(["record", "omega_rad_s", "value"])?;
    for omega in sw.values() {
        w.write_record(["attenuation".into(), num(omega), num(effects::damping_attenuation(&damping, omega)?)])?;
    }
    w.write_record(["synth_output_hz".into(), String::new(), num(freq)])?;
    w.write_record(["synth_output_exact_hz".into(), String::new(), exact.to_string()])?;
    w.flush()?;
    Ok(())
}
