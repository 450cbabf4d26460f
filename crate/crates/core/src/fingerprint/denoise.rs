//! Band-pass filtering and wavelet shrinkage.

use std::f64::consts::{LN_2, PI, TAU};

use num_complex::Complex64;

use super::fft;

use crate::error::{Error, Result};
use crate::signals::SampledTrace;

/// Daubechies 4-vanishing-moment scaling filter (8 taps).
pub const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_6,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_08,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Grid used to integrate filter responses when estimating per-level noise.
const RESPONSE_GRID: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    /// `σ_j·√(2 ln n)` on every detail level.
    Universal,
    /// Universal on levels that look like noise, otherwise the smaller of
    /// the SURE-optimal and universal thresholds.
    SureHybrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseOptions {
    /// Band-pass FIR order (even; taps = order + 1).
    pub filter_order: usize,
    /// Wavelet decomposition depth.
    pub levels: usize,
    pub rule: ThresholdRule,
}

impl Default for DenoiseOptions {
    fn default() -> Self {
        Self { filter_order: 512, levels: 4, rule: ThresholdRule::SureHybrid }
    }
}

impl DenoiseOptions {
    pub fn validate(&self) -> Result<()> {
        if self.filter_order < 2 || self.filter_order % 2 != 0 {
            return Err(Error::invalid(format!("filter order must be even and >= 2, got {}", self.filter_order)));
        }
        if !(1..=12).contains(&self.levels) {
            return Err(Error::invalid(format!("wavelet levels must be in 1..=12, got {}", self.levels)));
        }
        Ok(())
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Blackman-windowed sinc band-pass of `order + 1` taps passing
/// `f0 ± m/2`, normalised to unit gain at `f0`.
pub fn bandpass_taps(f0: f64, m: f64, sample_rate: f64, order: usize) -> Result<Vec<f64>> {
    let (lo, hi) = (f0 - 0.5 * m, f0 + 0.5 * m);
    if !(m > 0.0 && lo > 0.0 && hi < 0.5 * sample_rate) {
        return Err(Error::invalid(format!(
            "band {lo}..{hi} Hz is not inside (0, {}) Hz",
            0.5 * sample_rate
        )));
    }
    if order < 2 || order % 2 != 0 {
        return Err(Error::invalid(format!("filter order must be even and >= 2, got {order}")));
    }
    let (fl, fh) = (lo / sample_rate, hi / sample_rate);
    let c = (order / 2) as f64;
    let mut taps: Vec<f64> = (0..=order)
        .map(|k| {
            let x = k as f64 - c;
            let r = k as f64 / order as f64;
            let w = 0.42 - 0.5 * (TAU * r).cos() + 0.08 * (2.0 * TAU * r).cos();
            w * (2.0 * fh * sinc(2.0 * fh * x) - 2.0 * fl * sinc(2.0 * fl * x))
        })
        .collect();
    let w0 = TAU * f0 / sample_rate;
    let gain = taps
        .iter()
        .enumerate()
        .map(|(k, &h)| Complex64::from_polar(h, -w0 * k as f64))
        .sum::<Complex64>()
        .norm();
    for h in &mut taps {
        *h /= gain;
    }
    Ok(taps)
}

/// Linear convolution with the delay of a centred odd-length FIR removed.
fn filter(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len();
    let size = (n + taps.len() - 1).next_power_of_two();
    let fwd = fft(size, false);
    let inv = fft(size, true);
    let mut xs: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    xs.resize(size, Complex64::new(0.0, 0.0));
    let mut hs: Vec<Complex64> = taps.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    hs.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut xs);
    fwd.process(&mut hs);
    for (a, b) in xs.iter_mut().zip(&hs) {
        *a *= b;
    }
    inv.process(&mut xs);
    let delay = taps.len() / 2;
    xs[delay..delay + n].iter().map(|c| c.re / size as f64).collect()
}

fn highpass() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (k, v) in g.iter_mut().enumerate() {
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        *v = s * DB4[7 - k];
    }
    g
}

/// One periodic analysis step; `x.len()` must be even.
fn analyse(x: &[f64], g: &[f64; 8]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        let at = 2 * k;
        if at + 8 <= n {
            for (m, &v) in x[at..at + 8].iter().enumerate() {
                sa += DB4[m] * v;
                sd += g[m] * v;
            }
        } else {
            for m in 0..8 {
                let v = x[(at + m) % n];
                sa += DB4[m] * v;
                sd += g[m] * v;
            }
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesise(a: &[f64], d: &[f64], g: &[f64; 8]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        let at = 2 * k;
        if at + 8 <= n {
            for (m, v) in x[at..at + 8].iter_mut().enumerate() {
                *v += DB4[m] * a[k] + g[m] * d[k];
            }
        } else {
            for m in 0..8 {
                x[(at + m) % n] += DB4[m] * a[k] + g[m] * d[k];
            }
        }
    }
    x
}

/// Multi-level periodic decomposition: (approximation, details finest first).
pub(crate) fn wavedec(x: &[f64], levels: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let g = highpass();
    let mut a = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (na, d) = analyse(&a, &g);
        details.push(d);
        a = na;
    }
    (a, details)
}

pub(crate) fn waverec(a: &[f64], details: &[Vec<f64>]) -> Vec<f64> {
    let g = highpass();
    let mut x = a.to_vec();
    for d in details.iter().rev() {
        x = synthesise(&x, d, &g);
    }
    x
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// White-noise level from the median periodogram bin across the middle of
/// the pass band; spectral lines occupy too few bins to move the median.
fn noise_sigma(y: &[f64], f0: f64, m: f64, sample_rate: f64) -> f64 {
    let n = y.len();
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(n, false).process(&mut buf);
    let bin = |f: f64| (f * n as f64 / sample_rate).round() as usize;
    let (lo, hi) = (bin(f0 - 0.4 * m), bin(f0 + 0.4 * m).min(n / 2));
    if hi <= lo {
        return 0.0;
    }
    let mut p: Vec<f64> = buf[lo..=hi].iter().map(|c| c.norm_sqr() / n as f64).collect();
    let mid = p.len() / 2;
    let (_, median, _) = p.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    (*median / LN_2).sqrt()
}

/// Standard deviation of each detail level's coefficients when white noise
/// of deviation `sigma` has passed through `taps`.
fn level_sigmas(taps: &[f64], levels: usize, sigma: f64) -> Vec<f64> {
    let k = RESPONSE_GRID.max(taps.len().next_power_of_two());
    let plan = fft(k, false);
    let response = |h: &[f64]| -> Vec<f64> {
        let mut buf: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(k, Complex64::new(0.0, 0.0));
        plan.process(&mut buf);
        buf.iter().map(|c| c.norm_sqr()).collect()
    };
    let bp = response(taps);
    let lo = response(&DB4);
    let hi = response(&highpass());
    (1..=levels)
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..k {
                let mut w = bp[i] * hi[(i << (j - 1)) % k];
                for s in 0..j - 1 {
                    w *= lo[(i << s) % k];
                }
                acc += w;
            }
            sigma * (acc / k as f64).sqrt()
        })
        .collect()
}

/// Threshold minimising Stein's unbiased risk for soft shrinkage.
fn sure_threshold(d: &[f64], sigma: f64) -> f64 {
    let n = d.len() as f64;
    let mut x: Vec<f64> = d.iter().map(|v| (v / sigma).powi(2)).collect();
    x.sort_by(|a, b| a.total_cmp(b));
    let (mut best, mut best_risk) = (0.0, 1.0);
    let mut cum = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        cum += xi;
        let k = (i + 1) as f64;
        let risk = (n - 2.0 * k + cum + (n - k) * xi) / n;
        if risk < best_risk {
            best_risk = risk;
            best = xi.sqrt();
        }
    }
    best * sigma
}

fn threshold(d: &[f64], sigma: f64, total: usize, rule: ThresholdRule) -> f64 {
    if sigma <= 0.0 || d.is_empty() {
        return 0.0;
    }
    match rule {
        ThresholdRule::Universal => sigma * (2.0 * (total as f64).ln()).sqrt(),
        ThresholdRule::SureHybrid => {
            let n = d.len() as f64;
            let universal = sigma * (2.0 * n.ln()).sqrt();
            let energy = d.iter().map(|v| (v / sigma).powi(2)).sum::<f64>();
            let eta = (energy - n) / n;
            if eta <= n.log2().powf(1.5) / n.sqrt() {
                universal
            } else {
                sure_threshold(d, sigma).min(universal)
            }
        }
    }
}

/// Band-pass around `f0` with width `m`, then wavelet shrinkage.
pub fn denoise(trace: &SampledTrace, f0: f64, m: f64, opts: &DenoiseOptions) -> Result<SampledTrace> {
    opts.validate()?;
    let taps = bandpass_taps(f0, m, trace.sample_rate, opts.filter_order)?;
    let n = trace.len();
    if n < 2 {
        return Err(Error::invalid("trace needs at least two samples"));
    }
    let mut y = filter(&trace.samples, &taps);
    let sigma = noise_sigma(&y, f0, m, trace.sample_rate);

    // mirror-pad to a multiple of 2^levels for the periodic transform
    let block = 1usize << opts.levels;
    let padded = n.div_ceil(block) * block;
    for i in n..padded {
        let back = (2 * (n - 1)).saturating_sub(i);
        y.push(if back < n { y[back] } else { 0.0 });
    }

    let sigmas = level_sigmas(&taps, opts.levels, sigma);
    let (a, mut details) = wavedec(&y, opts.levels);
    for (d, &s) in details.iter_mut().zip(&sigmas) {
        let t = threshold(d, s, padded, opts.rule);
        if t > 0.0 {
            for v in d.iter_mut() {
                *v = soft(*v, t);
            }
        }
    }
    let mut out = waverec(&a, &details);
    out.truncate(n);
    SampledTrace::new(trace.sample_rate, out, trace.start_time)
}
