//! Transducer → plate → crystal: the induced signal for a given drive.

use crate::crystal::{self, CrystalSpec};
use crate::error::{Error, Result};
use crate::lamb::{self, LambMode, MediumSpec};
use crate::rtc::RtcConfig;
use crate::signals::Sinusoid;

/// A solved propagation chain at the RTC's nominal frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub medium: MediumSpec,
    pub mode: LambMode,
    pub crystal: CrystalSpec,
    pub rtc: RtcConfig,
    /// Transducer drive amplitude, V.
    pub drive_amplitude: f64,
}

impl Chain {
    pub fn new(medium: MediumSpec, crystal: CrystalSpec, rtc: RtcConfig, drive_amplitude: f64) -> Result<Self> {
        medium.validate()?;
        crystal.validate()?;
        rtc.validate()?;
        if !(drive_amplitude.is_finite() && drive_amplitude > 0.0) {
            return Err(Error::invalid(format!("drive amplitude must be > 0, got {drive_amplitude}")));
        }
        let mode = lamb::solve_dispersion(&medium, rtc.nominal_freq)?;
        Ok(Self { medium, mode, crystal, rtc, drive_amplitude })
    }

    /// Electrical signal induced at a crystal `z` metres away by a drive of
    /// excitation phase `phi`.
    pub fn induced(&self, z: f64, phi: f64) -> Result<Sinusoid> {
        self.induced_with_drive(z, phi, self.drive_amplitude)
    }

    /// [`Chain::induced`] at drive amplitude `volts`.
    pub fn induced_with_drive(&self, z: f64, phi: f64, volts: f64) -> Result<Sinusoid> {
        let drive = Sinusoid::new(volts, self.rtc.nominal_freq, phi)?;
        let xi = lamb::surface_wave(&self.mode, &self.medium, &drive, z)?;
        let accel = crystal::acceleration_of(&xi)?;
        let stress = crystal::steady_state_stress(&self.crystal, &accel)?;
        crystal::induced_signal(&self.crystal, &stress)
    }

    /// Wave travel time to distance `z`.
    pub fn delay(&self, z: f64) -> f64 {
        self.mode.delay(z)
    }
}
