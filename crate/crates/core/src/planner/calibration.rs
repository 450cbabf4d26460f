//! Excitation phase → induced phase calibration.
//!
//! With the transducer fixed at `z`, the attacker sweeps the excitation phase
//! and watches the oscillation amplitude. The dip marks the excitation whose
//! induced signal sits exactly opposite the oscillation; every other grid
//! point follows by the shift property.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::rtc::RtcState;
use crate::signals::{phase_diff, wrap_phase};

/// Minimum grid size accepted by [`calibrate_phase_map`].
pub const MIN_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub grid: usize,
    /// Quadratic refinement around the grid minimum.
    pub refine: bool,
    /// Amplitude variation below this fails the sweep, V.
    pub noise_floor: f64,
    /// Standard deviation of the amplitude probe's noise, V.
    pub probe_noise: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { grid: 64, refine: true, noise_floor: 1e-6, probe_noise: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMapEntry {
    pub z: f64,
    pub phi: f64,
    pub beta1: f64,
}

/// `(z, φ) → β1` table. Each distance stores the induced phase at `φ = 0`;
/// other phases follow from `β1(z, φ + x) = β1(z, φ) + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub grid_resolution: f64,
    entries: Vec<PhaseMapEntry>,
    offsets: Vec<(f64, f64)>,
}

impl PhaseMap {
    /// Map for one distance from the induced phase at `φ = 0`.
    pub fn from_offset(z: f64, beta1_at_zero: f64, grid: usize) -> Result<Self> {
        if grid == 0 {
            return Err(Error::invalid("phase map grid must be non-empty"));
        }
        let step = TAU / grid as f64;
        let base = wrap_phase(beta1_at_zero);
        let entries = (0..grid)
            .map(|i| {
                let phi = i as f64 * step;
                PhaseMapEntry { z, phi, beta1: wrap_phase(base + phi) }
            })
            .collect();
        Ok(Self { grid_resolution: step, entries, offsets: vec![(z, base)] })
    }

    pub fn entries(&self) -> &[PhaseMapEntry] {
        &self.entries
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.offsets.iter().map(|o| o.0)
    }

    /// Induced phase at `φ = 0` for distance `z`.
    pub fn offset(&self, z: f64) -> Option<f64> {
        self.offsets.iter().find(|o| (o.0 - z).abs() <= 1e-12 * z.abs().max(1.0)).map(|o| o.1)
    }

    pub fn beta1(&self, z: f64, phi: f64) -> Option<f64> {
        self.offset(z).map(|b| wrap_phase(b + phi))
    }

    /// Excitation phase producing induced phase `beta1` at `z`.
    pub fn excitation_phase(&self, z: f64, beta1: f64) -> Option<f64> {
        self.offset(z).map(|b| wrap_phase(beta1 - b))
    }

    /// Adds the distances of `other`, replacing any already present.
    pub fn merge(&mut self, other: &PhaseMap) {
        for &(z, b) in &other.offsets {
            self.entries.retain(|e| (e.z - z).abs() > 1e-12 * z.abs().max(1.0));
            self.offsets.retain(|o| (o.0 - z).abs() > 1e-12 * z.abs().max(1.0));
            self.offsets.push((z, b));
        }
        self.entries.extend(other.entries.iter().copied());
    }
}

/// Private simulation a calibration sweep runs against.
#[derive(Debug, Clone)]
pub struct CalibrationContext {
    chain: Chain,
    state: RtcState,
    rng: ChaCha8Rng,
    pub options: CalibrationOptions,
}

impl CalibrationContext {
    /// `beta2` is the target oscillator phase in the wall-clock frame.
    pub fn new(chain: Chain, beta2: f64, seed: u64, options: CalibrationOptions) -> Self {
        let state = RtcState::new(&chain.rtc, 0.0, beta2);
        Self { chain, state, rng: ChaCha8Rng::seed_from_u64(seed), options }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn beta2(&self) -> f64 {
        self.state.osc_phase
    }

    /// Oscillation amplitude seen by the probe while driving at `phi`.
    pub fn probe(&mut self, z: f64, phi: f64) -> Result<f64> {
        let induced = self.chain.induced(z, phi)?;
        let mut probe = self.state.clone();
        probe.set_injection(&self.chain.rtc, Some(induced))?;
        let (amplitude, _) = probe.waveform(&self.chain.rtc);
        let noise = if self.options.probe_noise > 0.0 {
            Normal::new(0.0, self.options.probe_noise)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(&mut self.rng)
        } else {
            0.0
        };
        Ok(amplitude + noise)
    }
}

/// Sweeps `grid` excitation phases at distance `z` and builds the map.
pub fn calibrate_phase_map(ctx: &mut CalibrationContext, z: f64, grid: usize) -> Result<PhaseMap> {
    if grid < MIN_GRID {
        return Err(Error::invalid(format!("phase grid must be >= {MIN_GRID}, got {grid}")));
    }
    let step = TAU / grid as f64;
    let amps = (0..grid).map(|i| ctx.probe(z, i as f64 * step)).collect::<Result<Vec<f64>>>()?;

    let (mut best, mut lo, mut hi) = (0usize, f64::INFINITY, f64::NEG_INFINITY);
    for (i, &a) in amps.iter().enumerate() {
        if a < lo {
            lo = a;
            best = i;
        }
        hi = hi.max(a);
    }
    if hi - lo < ctx.options.noise_floor {
        return Err(Error::CalibrationFailed { variation: hi - lo, floor: ctx.options.noise_floor });
    }
    let mut at = best as f64;
    if ctx.options.refine {
        let y0 = amps[(best + grid - 1) % grid];
        let y2 = amps[(best + 1) % grid];
        let curvature = y0 - 2.0 * lo + y2;
        if curvature > 0.0 {
            at += (0.5 * (y0 - y2) / curvature).clamp(-0.5, 0.5);
        }
    }
    let phi_star = at * step;
    PhaseMap::from_offset(z, ctx.beta2() + PI - phi_star, grid)
}

/// Largest |β1 error| of `map` at `z` against the chain's true induced phase.
pub fn map_error(ctx: &CalibrationContext, map: &PhaseMap, z: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in map.entries().iter().filter(|e| e.z == z) {
        let truth = ctx.chain.induced(z, e.phi)?.phase();
        worst = worst.max(phase_diff(e.beta1, truth).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::CrystalSpec;
    use crate::lamb::{MediumDb, DEFAULT_ATTENUATION};
    use crate::rtc::RtcConfig;

    fn context(offset: f64, options: CalibrationOptions) -> CalibrationContext {
        let medium = MediumDb::builtin().get("Acrylic glass").unwrap().plate(0.005, DEFAULT_ATTENUATION).unwrap();
        let crystal = CrystalSpec { circuit_phase_offset: offset, ..CrystalSpec::default() };
        let chain = Chain::new(medium, crystal, RtcConfig::default(), 20.0).unwrap();
        CalibrationContext::new(chain, 0.56, 7, options)
    }

    #[test]
    fn recovers_zero_offset() {
        let mut ctx = context(0.0, CalibrationOptions::default());
        let map = calibrate_phase_map(&mut ctx, 0.055, 64).unwrap();
        assert!(map_error(&ctx, &map, 0.055).unwrap() < TAU / 64.0);
        assert_eq!(map.entries().len(), 64);
    }

    #[test]
    fn shift_property_is_exact() {
        let mut ctx = context(1.0, CalibrationOptions::default());
        let map = calibrate_phase_map(&mut ctx, 0.1, 32).unwrap();
        let b0 = map.beta1(0.1, 0.3).unwrap();
        let b1 = map.beta1(0.1, 0.3 + 1.7).unwrap();
        assert!(phase_diff(b1, b0 + 1.7).abs() < 1e-12);
        for w in map.entries().windows(2) {
            assert!(phase_diff(w[1].beta1, w[0].beta1 + map.grid_resolution).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_small_grid_and_flat_sweep() {
        let mut ctx = context(0.0, CalibrationOptions::default());
        assert!(calibrate_phase_map(&mut ctx, 0.055, 4).is_err());
        let mut flat = context(0.0, CalibrationOptions { noise_floor: 1.0, ..CalibrationOptions::default() });
        assert!(matches!(calibrate_phase_map(&mut flat, 0.055, 16), Err(Error::CalibrationFailed { .. })));
    }

    #[test]
    fn excitation_phase_inverts_map() {
        let map = PhaseMap::from_offset(0.2, 1.0, 16).unwrap();
        let phi = map.excitation_phase(0.2, 4.0).unwrap();
        assert!(phase_diff(map.beta1(0.2, phi).unwrap(), 4.0).abs() < 1e-12);
        assert!(map.beta1(0.3, 0.0).is_none());
    }

    #[test]
    fn merge_keeps_both_distances() {
        let mut a = PhaseMap::from_offset(0.1, 1.0, 8).unwrap();
        let b = PhaseMap::from_offset(0.2, 2.0, 8).unwrap();
        a.merge(&b);
        assert_eq!(a.entries().len(), 16);
        assert_eq!(a.offset(0.2), Some(2.0));
        a.merge(&PhaseMap::from_offset(0.2, 3.0, 8).unwrap());
        assert_eq!(a.entries().len(), 16);
        assert_eq!(a.offset(0.2), Some(3.0));
    }
}
