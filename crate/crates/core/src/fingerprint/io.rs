//! Trace and profile-library files.
//!
//! Binary traces are little-endian:
//!
//! ```text
//! "RTCTRACE"  8 bytes
//! version     u32 (= 1)
//! count       u64
//! sample_rate f64, Hz
//! start_time  f64, s
//! samples     count × f64, V
//! ```
//!
//! CSV traces have the header `time_s,volts`; the sample rate is recovered
//! from the (uniform) time column.

use std::io::Write;

use crate::error::{Error, Result};
use crate::signals::SampledTrace;

use super::SscProfile;

pub const TRACE_MAGIC: &[u8; 8] = b"RTCTRACE";
const TRACE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8;

const BUILTIN: &str = include_str!("../../data/ssc_library.csv");

pub fn encode_trace(trace: &SampledTrace) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * trace.len());
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
    out.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    out.extend_from_slice(&trace.sample_rate.to_le_bytes());
    out.extend_from_slice(&trace.start_time.to_le_bytes());
    for x in &trace.samples {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&bytes[at..at + 8]);
    f64::from_le_bytes(b)
}

pub fn decode_trace(bytes: &[u8]) -> Result<SampledTrace> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the trace header", bytes.len())));
    }
    if &bytes[..8] != TRACE_MAGIC {
        return Err(Error::Format("missing RTCTRACE magic".into()));
    }
    let mut v = [0u8; 4];
    v.copy_from_slice(&bytes[8..12]);
    let version = u32::from_le_bytes(v);
    if version != TRACE_VERSION {
        return Err(Error::Format(format!("unsupported trace version {version}")));
    }
    let mut c = [0u8; 8];
    c.copy_from_slice(&bytes[12..20]);
    let count = u64::from_le_bytes(c);
    let body = bytes.len() - HEADER_LEN;
    if count.checked_mul(8) != Some(body as u64) {
        return Err(Error::Format(format!("header says {count} samples but {body} payload bytes follow")));
    }
    let sample_rate = f64_at(bytes, 20);
    let start_time = f64_at(bytes, 28);
    let samples: Vec<f64> = (0..count as usize).map(|i| f64_at(bytes, HEADER_LEN + 8 * i)).collect();
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::Format(format!("sample {i} is not finite")));
    }
    SampledTrace::new(sample_rate, samples, start_time).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_trace_csv<W: Write>(out: W, trace: &SampledTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::invalid(format!("writing trace: {e}"));
    w.write_record(["time_s", "volts"]).map_err(io)?;
    for (i, x) in trace.samples.iter().enumerate() {
        w.write_record([trace.time_of(i).to_string(), x.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("writing trace: {e}")))
}

pub fn read_trace_csv(text: &str) -> Result<SampledTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names != ["time_s", "volts"] {
        return Err(Error::parse(1, format!("expected header 'time_s,volts', got '{}'", names.join(","))));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            let field = row.get(i).unwrap_or("");
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(line, format!("'{field}' is not a finite number"))),
            }
        };
        times.push((line, num(0)?));
        samples.push(num(1)?);
    }
    if times.len() < 2 {
        return Err(Error::parse(times.first().map_or(1, |t| t.0), "need at least two samples to infer the rate"));
    }
    let t0 = times[0].1;
    let dt = (times[times.len() - 1].1 - t0) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::parse(times[1].0, "time column must increase"));
    }
    for (i, &(line, t)) in times.iter().enumerate() {
        if (t - (t0 + i as f64 * dt)).abs() > 1e-6 * dt {
            return Err(Error::parse(line, "time column is not uniformly spaced"));
        }
    }
    SampledTrace::new(1.0 / dt, samples, t0)
}

/// Profiles keyed by label. Columns `label,f0_hz,fm_hz,df` with an optional
/// `amplitude_v` (default 1 V); `#` starts a comment line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileLibrary {
    profiles: Vec<SscProfile>,
}

impl ProfileLibrary {
    /// The synthetic 15-model library.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled profile library is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
        let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (Some(label), Some(f0), Some(fm), Some(df)) = (find("label"), find("f0_hz"), find("fm_hz"), find("df")) else {
            return Err(Error::parse(1, "need label, f0_hz, fm_hz and df columns"));
        };
        let amplitude = find("amplitude_v");
        if headers.len() != 4 + amplitude.is_some() as usize {
            return Err(Error::parse(1, "unexpected extra column"));
        }

        let mut profiles: Vec<SscProfile> = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let num = |i: usize| -> Result<f64> {
                let field = row.get(i).unwrap_or("");
                field.parse().map_err(|_| Error::parse(line, format!("'{field}' is not a number")))
            };
            let p = SscProfile {
                label: row.get(label).unwrap_or("").to_string(),
                f0: num(f0)?,
                fm: num(fm)?,
                df: num(df)?,
                amplitude: amplitude.map(num).transpose()?.unwrap_or(1.0),
            };
            if p.label.is_empty() {
                return Err(Error::parse(line, "empty label"));
            }
            p.validate().map_err(|e| Error::parse(line, e.to_string()))?;
            if profiles.iter().any(|q| q.label == p.label) {
                return Err(Error::parse(line, format!("duplicate label '{}'", p.label)));
            }
            profiles.push(p);
        }
        Ok(Self { profiles })
    }

    pub fn profiles(&self) -> &[SscProfile] {
        &self.profiles
    }

    pub fn get(&self, label: &str) -> Option<&SscProfile> {
        self.profiles.iter().find(|p| p.label == label)
    }

    /// Distinct centre frequencies, in first-seen order.
    pub fn centres(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.profiles {
            if !out.contains(&p.f0) {
                out.push(p.f0);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}
