//! `key=start:stop:steps` sweeps, inclusive of both ends.

use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let n = (self.steps - 1) as f64;
        // endpoints exact
        (0..self.steps).map(|i| {
            let u = i as f64 / n;
            self.start * (1.0 - u) + self.stop * u
        })
        .collect()
    }

    /// Rejects keys outside `allowed`.
    pub fn expect_key(&self, allowed: &[&str]) -> Result<(), CliError> {
        if allowed.contains(&self.key.as_str()) {
            Ok(())
        } else {
            Err(CliError::Usage(format!("sweep key {:?} not one of {}", self.key, allowed.join(", "))))
        }
    }
}

impl FromStr for Sweep {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("sweep {s:?} is not key=start:stop:steps"));
        let (key, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [start, stop, steps] = parts[..] else { return Err(bad()) };
        let start: f64 = start.trim().parse().map_err(|_| bad())?;
        let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
        let steps: usize = steps.trim().parse().map_err(|_| bad())?;
        if key.trim().is_empty() || steps == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        Ok(Self { key: key.trim().to_string(), start, stop, steps })
    }
}
