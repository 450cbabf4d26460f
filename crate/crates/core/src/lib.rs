//! Desk-scale simulation of acoustic timing-drift attacks on real-time clocks.
//!
//! The chain modelled here runs from a transducer driving a solid plate,
//! through antisymmetric Lamb-wave propagation ([`lamb`]), the quartz
//! crystal's piezoelectric response ([`crystal`]) and signal superposition
//! inside the oscillator loop ([`signals`]), to the RTC divider and counters
//! ([`rtc`]). On top of it sit attack planning and phase-map calibration
//! ([`planner`]), spread-spectrum-clock device fingerprinting
//! ([`fingerprint`]) and downstream effect and countermeasure models
//! ([`effects`]).

pub mod chain;
pub mod crystal;
pub mod effects;
pub mod fingerprint;
pub mod lamb;
pub mod planner;
pub mod rtc;
pub mod signals;

mod error;

pub use error::{Error, Result};
