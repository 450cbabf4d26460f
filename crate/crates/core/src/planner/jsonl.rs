//! Plan export: one transducer emission per line.
//!
//! ```text
//! {"start_s":0.0,"duration_s":0.5,"phase_rad":2.71,"amplitude_v":20.0}
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One transducer burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emission {
    /// Emission time at the transducer, s.
    pub start_s: f64,
    pub duration_s: f64,
    /// Excitation phase, rad.
    pub phase_rad: f64,
    /// Drive amplitude, V.
    pub amplitude_v: f64,
}

impl Emission {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_s.is_finite() && self.phase_rad.is_finite()) {
            return Err(Error::invalid("emission start and phase must be finite"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid(format!("emission duration must be > 0, got {}", self.duration_s)));
        }
        if !(self.amplitude_v.is_finite() && self.amplitude_v >= 0.0) {
            return Err(Error::invalid(format!("emission amplitude must be >= 0, got {}", self.amplitude_v)));
        }
        Ok(())
    }
}

pub fn write_jsonl<W: Write + ?Sized>(out: &mut W, emissions: impl IntoIterator<Item = Emission>) -> std::io::Result<()> {
    for e in emissions {
        serde_json::to_writer(&mut *out, &e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses JSON-lines; blank lines are skipped, bursts must be sorted and
/// non-overlapping.
pub fn parse_jsonl(text: &str) -> Result<Vec<Emission>> {
    let mut out: Vec<Emission> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let e: Emission = serde_json::from_str(line).map_err(|err| Error::parse(line_no, err.to_string()))?;
        e.validate().map_err(|err| Error::parse(line_no, err.to_string()))?;
        if let Some(prev) = out.last() {
            if e.start_s < prev.start_s + prev.duration_s {
                return Err(Error::parse(line_no, "emission overlaps the previous one"));
            }
        }
        out.push(e);
    }
    Ok(out)
}
