//! Event engine against a brute-force 64×-oversampled waveform with a
//! sample-by-sample comparator and divider.

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rtcdrift::rtc::{InjectionBurst, RtcConfig, RtcState, TickEvent};
use rtcdrift::signals::Sinusoid;

const F: f64 = 32768.0;
const OVERSAMPLE: f64 = 64.0;

/// Sampled comparator + divider. Returns (crossings, tick wall times).
fn sampled_count(cfg: &RtcConfig, t_end: f64, wave: impl Fn(f64) -> f64) -> (u64, Vec<f64>) {
    let dt = 1.0 / (OVERSAMPLE * cfg.nominal_freq);
    let n = (t_end / dt).floor() as usize;
    let mut times: Vec<f64> = (1..=n).map(|i| i as f64 * dt).collect();
    if times.last().is_none_or(|&t| t < t_end) {
        times.push(t_end);
    }
    let mut prev = wave(0.0);
    let mut counter = cfg.divider_reload;
    let (mut crossings, mut ticks) = (0u64, Vec::new());
    for t in times {
        let v = wave(t);
        if prev < cfg.trigger_threshold && cfg.trigger_threshold <= v {
            crossings += 1;
            counter -= 1;
            if counter == 0 {
                ticks.push(t);
                counter = cfg.divider_reload;
            }
        }
        prev = v;
    }
    (crossings, ticks)
}

/// Like [`sampled_count`], but also samples both one-sided limits at every
/// discontinuity in `edges`. `wave(t, left)` gives the left limit when `left`.
fn sampled_count_with_edges(cfg: &RtcConfig, t_end: f64, edges: &[f64], wave: impl Fn(f64, bool) -> f64) -> (u64, Vec<f64>) {
    let dt = 1.0 / (OVERSAMPLE * cfg.nominal_freq);
    let n = (t_end / dt).floor() as usize;
    let mut times: Vec<(f64, bool)> = (1..=n).map(|i| (i as f64 * dt, false)).collect();
    if n as f64 * dt < t_end {
        times.push((t_end, false));
    }
    for &e in edges {
        times.push((e, true));
        times.push((e, false));
    }
    times.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut prev = wave(0.0, false);
    let mut counter = cfg.divider_reload;
    let (mut crossings, mut ticks) = (0u64, Vec::new());
    for (t, left) in times {
        let v = wave(t, left);
        if prev < cfg.trigger_threshold && cfg.trigger_threshold <= v {
            crossings += 1;
            counter -= 1;
            if counter == 0 {
                ticks.push(t);
                counter = cfg.divider_reload;
            }
        }
        prev = v;
    }
    (crossings, ticks)
}

/// Independent phase trajectory of one locking burst, as a function of the
/// time since burst start.
fn oracle_gain(delta: f64, a: f64, b: f64, tau: f64, duration: f64, t: f64) -> f64 {
    let lock = 5.0 * tau;
    let t = t.min(duration);
    if t >= lock {
        return delta;
    }
    let mut knots = vec![(0.0, 0.0)];
    let mut rem = delta;
    let mut now = 0.0;
    loop {
        let h = 0.5 * rem;
        let adv = h + ((a - b) / (a + b) * h.tan()).atan();
        let next = rem - adv;
        let nt = now + tau * (rem / next).ln();
        if nt >= lock {
            knots.push((lock, delta));
            break;
        }
        knots.push((nt, delta - next));
        now = nt;
        rem = next;
    }
    for w in knots.windows(2) {
        if t <= w[1].0 {
            return w[0].1 + (t - w[0].0) / (w[1].0 - w[0].0) * (w[1].1 - w[0].1);
        }
    }
    delta
}

fn short_config() -> RtcConfig {
    RtcConfig::thirty_two_bit(32)
}

#[test]
fn nominal_second_matches_oracle() {
    let cfg = short_config();
    let mut s = RtcState::new(&cfg, 0.0, 0.7);
    let mut events = Vec::new();
    s.step_recording(&cfg, 0.05, &mut events);
    let (n, ticks) = sampled_count(&cfg, 0.05, |t| 0.08 * (TAU * F * t + 0.7).sin());
    assert_eq!(s.crossings, n);
    assert_eq!(events.len(), ticks.len());
    let dt = 1.0 / (OVERSAMPLE * F);
    for (e, t) in events.iter().zip(&ticks) {
        assert!(e.wall_time <= *t && *t - e.wall_time <= dt, "{} vs {}", e.wall_time, t);
    }
}

#[test]
fn stall_and_resume_within_one_cycle() {
    let cfg = RtcConfig::default();
    let beta2 = 0.56;
    for a in [0.040, 0.05, 0.08] {
        let mut s = RtcState::new(&cfg, 0.0, beta2);
        s.step(&cfg, 0.25);
        let before = (s.crossings, s.rtc_time);
        let burst = InjectionBurst::new(0.25, 0.5, Sinusoid::new(a, F, beta2 + PI).unwrap()).unwrap();
        s.set_injection(&cfg, Some(burst.signal)).unwrap();
        s.step(&cfg, burst.end());
        assert_eq!((s.crossings, s.rtc_time), before, "A = {a}");
        s.set_injection(&cfg, None).unwrap();
        s.step(&cfg, burst.end() + 1.0 / F);
        assert!(s.last_crossing > burst.end(), "A = {a}");
        // the switch-off edge itself may count as well
        assert!((1..=2).contains(&(s.crossings - before.0)), "A = {a}");
    }
}

#[test]
fn small_opposed_injection_sampled() {
    let cfg = short_config();
    let mut s = RtcState::new(&cfg, 0.0, 0.56);
    let inj = Sinusoid::new(0.005, F, 0.56 + PI).unwrap();
    s.set_injection(&cfg, Some(inj)).unwrap();
    s.step(&cfg, 0.02);
    let (n, _) = sampled_count(&cfg, 0.02, |t| 0.08 * (TAU * F * t + 0.56).sin() + inj.value_at(t));
    assert_eq!(s.crossings, n);
    // peak of 75 mV against the 40 mV threshold
    let (r, _) = s.waveform(&cfg);
    assert!((r - 0.075).abs() < 1e-12);
}

#[test]
fn quarter_turn_bursts_add_quarter_cycles() {
    let cfg = short_config();
    let (a, b, tau) = (0.02, 0.08, cfg.convergence_time_constant);
    let (t1, period) = (16e-6, 40e-6);
    let k = 100;
    let mut s = RtcState::new(&cfg, 0.0, 0.0);
    let mut events = Vec::new();
    for j in 0..k {
        let phase = (j + 1) as f64 * PI / 2.0;
        let burst = InjectionBurst::new(j as f64 * period, t1, Sinusoid::new(a, F, phase).unwrap()).unwrap();
        s.apply_phase_advance(&cfg, &burst, Some(&mut events)).unwrap();
    }
    let end = k as f64 * period + 1e-3;
    s.step_recording(&cfg, end, &mut events);
    assert!((s.osc_phase - k as f64 * PI / 2.0).abs() < 1e-9);

    let mut nominal = RtcState::new(&cfg, 0.0, 0.0);
    nominal.step(&cfg, end);
    assert_eq!(s.crossings - nominal.crossings, (k / 4) as u64);

    let wave = |t: f64| {
        let j = ((t / period).floor() as usize).min(k - 1);
        let local = t - j as f64 * period;
        let gain = if t >= k as f64 * period { PI / 2.0 } else { oracle_gain(PI / 2.0, a, b, tau, t1, local) };
        let j_done = if t >= k as f64 * period { k } else { j };
        b * (TAU * F * t + j_done as f64 * PI / 2.0 + if t >= k as f64 * period { 0.0 } else { gain }).sin()
    };
    let (n, ticks) = sampled_count(&cfg, end, wave);
    assert_eq!(s.crossings, n);
    assert_eq!(events.len(), ticks.len());
    let dt = 1.0 / (OVERSAMPLE * F);
    for (e, t) in events.iter().zip(&ticks) {
        assert!((e.wall_time - t).abs() <= dt, "{} vs {}", e.wall_time, t);
    }
}

#[test]
fn thousandth_scale_forward_attack() {
    // 3000 locked bursts of 11π/12: 1375 extra cycles, i.e. 42 s per 3·10⁶
    let cfg = short_config();
    let delta = 11.0 * PI / 12.0;
    let (a, b, tau) = (0.044, 0.08, cfg.convergence_time_constant);
    let (t1, period, k) = (16e-6, 20e-6, 3000usize);
    let mut s = RtcState::new(&cfg, 0.0, 0.0);
    for j in 0..k {
        let phase = (j + 1) as f64 * delta;
        let burst = InjectionBurst::new(j as f64 * period, t1, Sinusoid::new(a, F, phase).unwrap()).unwrap();
        s.apply_phase_advance(&cfg, &burst, None).unwrap();
    }
    let end = k as f64 * period;
    s.step(&cfg, end);
    let mut nominal = RtcState::new(&cfg, 0.0, 0.0);
    nominal.step(&cfg, end);
    let extra = s.crossings - nominal.crossings;
    assert_eq!(extra, 1375);
    assert!((s.osc_phase / TAU - 1375.0).abs() < 1e-6);
    let full_scale = extra as f64 * 1000.0 / F;
    assert!((full_scale - 41.96).abs() < 0.01, "{full_scale}");

    let wave = |t: f64| {
        let j = ((t / period).floor() as usize).min(k - 1);
        let local = t - j as f64 * period;
        b * (TAU * F * t + j as f64 * delta + oracle_gain(delta, a, b, tau, t1, local)).sin()
    };
    let (n, _) = sampled_count(&cfg, end, wave);
    assert_eq!(s.crossings, n);
}

#[test]
fn partial_bursts_track_oracle() {
    let cfg = short_config();
    let (a, b, tau) = (0.044, 0.08, cfg.convergence_time_constant);
    let mut s = RtcState::new(&cfg, 0.0, 0.2);
    let burst = InjectionBurst::new(1e-4, 8e-6, Sinusoid::new(a, F, 0.2 + 2.8).unwrap()).unwrap();
    s.apply_phase_advance(&cfg, &burst, None).unwrap();
    let expected = oracle_gain(2.8, a, b, tau, 8e-6, 8e-6);
    assert!((s.osc_phase - 0.2 - expected).abs() < 1e-12);
    assert!(expected < 2.8);
}

fn record_injections(cfg: &RtcConfig, beta2: f64, bursts: &[InjectionBurst], end: f64) -> (RtcState, Vec<TickEvent>) {
    let mut s = RtcState::new(cfg, 0.0, beta2);
    let mut events = Vec::new();
    for b in bursts {
        s.inject(cfg, b, Some(&mut events)).unwrap();
    }
    s.step_recording(cfg, end, &mut events);
    (s, events)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn injected_scenarios_match_sampled_oracle(
        beta2 in 0.0f64..TAU,
        raw in prop::collection::vec((0.0f64..1.0, 1e-4f64..5e-3, 0.0f64..0.12, 0.0f64..TAU), 0..5),
    ) {
        let cfg = short_config();
        let end = 0.05;
        let mut bursts = Vec::new();
        let mut cursor = 0.0;
        for (gap, dur, a, phase) in raw {
            let start = cursor + gap * 4e-3 + 1e-5;
            if start + dur >= end {
                break;
            }
            bursts.push(InjectionBurst::new(start, dur, Sinusoid::new(a, F, phase).unwrap()).unwrap());
            cursor = start + dur;
        }
        let (s, events) = record_injections(&cfg, beta2, &bursts, end);
        let wave = |t: f64, left: bool| {
            let mut v = 0.08 * (TAU * F * t + beta2).sin();
            for b in &bursts {
                let active = if left { t > b.start && t <= b.end() } else { t >= b.start && t < b.end() };
                if active {
                    v += b.signal.value_at(t);
                }
            }
            v
        };
        let edges: Vec<f64> = bursts.iter().flat_map(|b| [b.start, b.end()]).collect();
        let (n, ticks) = sampled_count_with_edges(&cfg, end, &edges, wave);
        let dt = 1.0 / (OVERSAMPLE * F);
        prop_assert_eq!(s.crossings, n);
        prop_assert_eq!(events.len(), ticks.len());
        for (e, t) in events.iter().zip(&ticks) {
            prop_assert!((e.wall_time - t).abs() <= dt, "{} vs {}", e.wall_time, t);
        }
    }

    #[test]
    fn rtc_time_never_decreases(beta2 in 0.0f64..TAU, a in 0.0f64..0.12, phase in 0.0f64..TAU) {
        let cfg = short_config();
        let mut s = RtcState::new(&cfg, 0.0, beta2);
        let mut last = s.rtc_time;
        for i in 1..=20 {
            let t = i as f64 * 1e-3;
            let inj = (i % 2 == 0).then(|| Sinusoid::new(a, F, phase).unwrap());
            s.set_injection(&cfg, inj).unwrap();
            s.step(&cfg, t);
            prop_assert!(s.rtc_time >= last);
            last = s.rtc_time;
        }
    }

    #[test]
    fn counting_halts_iff_peak_below_threshold(beta2 in 0.0f64..TAU, a in 0.0f64..0.16, offset in 0.0f64..TAU) {
        let cfg = short_config();
        let mut s = RtcState::new(&cfg, 0.0, beta2);
        s.set_injection(&cfg, Some(Sinusoid::new(a, F, beta2 + offset).unwrap())).unwrap();
        let start = s.crossings;
        s.step(&cfg, 0.01);
        let (r, _) = s.waveform(&cfg);
        if r > cfg.trigger_threshold {
            prop_assert!(s.crossings - start >= 300);
        } else {
            prop_assert!(s.crossings - start <= 1);
        }
    }

    #[test]
    fn identical_runs_are_bitwise_equal(beta2 in 0.0f64..TAU, delta in 0.1f64..3.0, t1 in 1e-6f64..2e-5) {
        let cfg = short_config();
        let run = || {
            let mut s = RtcState::new(&cfg, 0.0, beta2);
            for j in 0..50 {
                let burst = InjectionBurst::new(j as f64 * 3e-5, t1, Sinusoid::new(0.03, F, beta2 + (j + 1) as f64 * delta).unwrap()).unwrap();
                let _ = s.apply_phase_advance(&cfg, &burst, None);
            }
            s.step(&cfg, 2e-3);
            s
        };
        let (x, y) = (run(), run());
        prop_assert_eq!(x.drift().to_bits(), y.drift().to_bits());
        prop_assert_eq!(x, y);
    }
}
