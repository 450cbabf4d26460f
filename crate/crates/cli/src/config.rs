//! Scenario files.
//!
//! JSON with a `schema_version` field. Every physical quantity carries its
//! unit in the key name. Sections and keys may be omitted; unknown keys are
//! rejected with the path of the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rtcdrift::chain::Chain;
use rtcdrift::crystal::CrystalSpec;
use rtcdrift::effects::{BpScenario, ClockSynthConfig, DampingSpec};
use rtcdrift::fingerprint::{CaptureConfig, DenoiseOptions, ProfileLibrary, ThresholdRule};
use rtcdrift::lamb::{DispersionOptions, MediumDb, MediumSpec, ThicknessConvention};
use rtcdrift::planner::{CalibrationOptions, DriftGoal};
use rtcdrift::rtc::{CounterMode, RtcConfig};

use crate::error::CliError;
use crate::sweep::Sweep;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub medium: MediumSection,
    #[serde(default)]
    pub crystal: CrystalSection,
    #[serde(default)]
    pub rtc: RtcSection,
    #[serde(default)]
    pub transducer: TransducerSection,
    #[serde(default)]
    pub oscillator: OscillatorSection,
    #[serde(default)]
    pub goal: Option<GoalSection>,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub dispersion: DispersionSection,
    #[serde(default)]
    pub fingerprint: FingerprintSection,
    #[serde(default)]
    pub bp: BpSection,
    #[serde(default)]
    pub counter: CounterSection,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            medium: MediumSection::default(),
            crystal: CrystalSection::default(),
            rtc: RtcSection::default(),
            transducer: TransducerSection::default(),
            oscillator: OscillatorSection::default(),
            goal: None,
            calibration: CalibrationSection::default(),
            simulate: SimulateSection::default(),
            dispersion: DispersionSection::default(),
            fingerprint: FingerprintSection::default(),
            bp: BpSection::default(),
            counter: CounterSection::default(),
            base_dir: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumSection {
    pub material: String,
    /// Material table replacing the built-in one.
    pub database_path: Option<PathBuf>,
    pub thickness_mm: f64,
    pub attenuation_per_m: f64,
    pub thickness_convention: Convention,
}

impl Default for MediumSection {
    fn default() -> Self {
        Self {
            material: "Acrylic glass".into(),
            database_path: None,
            thickness_mm: 5.0,
            attenuation_per_m: rtcdrift::lamb::DEFAULT_ATTENUATION,
            thickness_convention: Convention::Half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Half,
    Full,
}

/// Overrides of the default crystal; omitted keys keep the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalSection {
    pub mass_kg: Option<f64>,
    pub damping_n_s_per_m: Option<f64>,
    pub stiffness_n_per_m: Option<f64>,
    pub width_m: Option<f64>,
    pub thickness_m: Option<f64>,
    pub mu33_c_per_n: Option<f64>,
    pub eps33_f_per_m: Option<f64>,
    pub gain_v_per_c_m2: Option<f64>,
    pub circuit_phase_offset_rad: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtcSection {
    pub mode: Mode,
    pub nominal_freq_hz: f64,
    pub nominal_amplitude_v: f64,
    /// Half the nominal amplitude when omitted.
    pub trigger_threshold_v: Option<f64>,
    /// 32768 in calendar mode, 32 in 32-bit mode when omitted.
    pub divider_reload: Option<u32>,
    pub freeze_timeout_s: Option<f64>,
    pub convergence_time_constant_s: f64,
}

impl Default for RtcSection {
    fn default() -> Self {
        let c = RtcConfig::calendar();
        Self {
            mode: Mode::Calendar,
            nominal_freq_hz: c.nominal_freq,
            nominal_amplitude_v: c.nominal_amplitude,
            trigger_threshold_v: None,
            divider_reload: None,
            freeze_timeout_s: None,
            convergence_time_constant_s: c.convergence_time_constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Calendar,
    ThirtyTwoBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransducerSection {
    pub position_m: f64,
    pub drive_amplitude_v: f64,
}

impl Default for TransducerSection {
    fn default() -> Self {
        Self { position_m: 0.055, drive_amplitude_v: 20.0 }
    }
}

/// The target oscillator as the attacker observed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorSection {
    pub initial_phase_rad: f64,
    /// Wall time the first burst reaches the crystal.
    pub attack_start_s: f64,
    /// Simulated time after the last burst.
    pub tail_s: f64,
}

impl Default for OscillatorSection {
    fn default() -> Self {
        Self { initial_phase_rad: 0.0, attack_start_s: 0.01, tail_s: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "direction", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalSection {
    Backward {
        window_s: f64,
        drift_s: f64,
        burst_s: f64,
    },
    Forward {
        window_s: f64,
        /// Extra oscillator cycles; give this or `drift_s`.
        #[serde(default)]
        drift_cycles: Option<f64>,
        /// Seconds of drift, converted at the nominal frequency.
        #[serde(default)]
        drift_s: Option<f64>,
        burst_s: f64,
        phase_step_rad: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub grid: usize,
    pub refine: bool,
    pub noise_floor_v: f64,
    pub probe_noise_v: f64,
    /// Distances to calibrate; the transducer position when empty.
    pub positions_m: Vec<f64>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let c = CalibrationOptions::default();
        Self {
            grid: c.grid,
            refine: c.refine,
            noise_floor_v: c.noise_floor,
            probe_noise_v: c.probe_noise,
            positions_m: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Emit a row at each burst start and end.
    pub burst_rows: bool,
    /// Emit a row at each divider tick.
    pub tick_rows: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { burst_rows: true, tick_rows: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionSection {
    /// Material names; the scenario medium when empty, every table row for `["*"]`.
    pub materials: Vec<String>,
    /// `frequency_hz=...` or `thickness_mm=...`.
    pub sweep: String,
    /// Fixed frequency while sweeping thickness.
    pub frequency_hz: f64,
}

impl Default for DispersionSection {
    fn default() -> Self {
        Self { materials: Vec::new(), sweep: "frequency_hz=4096:65536:16".into(), frequency_hz: 32768.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerprintSection {
    pub library_path: Option<PathBuf>,
    /// Classify this capture (CSV or `.bin`) instead of synthesizing.
    pub trace_path: Option<PathBuf>,
    /// Profiles to synthesize; the whole library when empty.
    pub profiles: Vec<String>,
    pub trials: u64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub snr_db: f64,
    pub scale_a_mv: f64,
    pub scale_b_mv: f64,
    pub bandwidth_hz: f64,
    pub filter_order: usize,
    pub wavelet_levels: usize,
    pub threshold_rule: Rule,
    pub unknown_threshold: f64,
}

impl Default for FingerprintSection {
    fn default() -> Self {
        let c = CaptureConfig::default();
        Self {
            library_path: None,
            trace_path: None,
            profiles: Vec::new(),
            trials: 1,
            sample_rate_hz: c.sample_rate,
            duration_s: c.duration,
            snr_db: c.snr_db,
            scale_a_mv: c.scale_a,
            scale_b_mv: c.scale_b,
            bandwidth_hz: c.bandwidth_m,
            filter_order: c.denoise.filter_order,
            wavelet_levels: c.denoise.levels,
            threshold_rule: Rule::SureHybrid,
            unknown_threshold: c.unknown_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Universal,
    #[default]
    SureHybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpSection {
    pub initial_pressure_mmhg: f64,
    pub systolic_mmhg: f64,
    pub diastolic_mmhg: f64,
    pub deflation_rate_mmhg_per_s: f64,
    pub pressure_step_mmhg_per_cycle: f64,
    /// `df_hz=...` or `drift_rate=...` (RTC seconds per wall second).
    pub sweep: String,
}

impl Default for BpSection {
    fn default() -> Self {
        Self {
            initial_pressure_mmhg: 180.0,
            systolic_mmhg: 120.0,
            diastolic_mmhg: 80.0,
            deflation_rate_mmhg_per_s: 3.0,
            pressure_step_mmhg_per_cycle: 0.003,
            sweep: "drift_rate=0.5:2:7".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterSection {
    pub natural_freq_rad_s: Option<f64>,
    pub damping_ratio: Option<f64>,
    /// Physical form: ζ = c / (2√(k·m)), ωn = √(k/m).
    pub damping_n_s_per_m: Option<f64>,
    pub stiffness_n_per_m: Option<f64>,
    pub mass_kg: Option<f64>,
    /// `omega_rad_s=...`.
    pub sweep: String,
    /// Decimal strings, kept exact.
    pub ref_freq_hz: String,
    pub pll_mult: String,
    pub multisynth_div: String,
}

impl Default for CounterSection {
    fn default() -> Self {
        Self {
            natural_freq_rad_s: Some(1000.0),
            damping_ratio: Some(0.5),
            damping_n_s_per_m: None,
            stiffness_n_per_m: None,
            mass_kg: None,
            sweep: "omega_rad_s=0:400000:41".into(),
            ref_freq_hz: rtcdrift::effects::DEFAULT_REF_FREQ_HZ.to_string(),
            pll_mult: "36".into(),
            multisynth_div: "27465.82".into(),
        }
    }
}

impl Scenario {
    /// Parses a scenario; `base_dir` anchors relative paths.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("{path}: {}", e.into_inner()))
        })?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                s.schema_version
            )));
        }
        s.base_dir = base_dir.to_path_buf();
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn read(&self, p: &Path, field: &str) -> Result<String, CliError> {
        let path = self.resolve(p);
        std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{field}: cannot read {}: {e}", path.display())))
    }

    pub fn media(&self) -> Result<MediumDb, CliError> {
        match &self.medium.database_path {
            None => Ok(MediumDb::builtin()),
            Some(p) => MediumDb::parse(&self.read(p, "medium.database_path")?).map_err(|e| field("medium.database_path", e)),
        }
    }

    pub fn medium_spec(&self, db: &MediumDb, name: &str, thickness_mm: f64) -> Result<MediumSpec, CliError> {
        let rec = db
            .get(name)
            .ok_or_else(|| CliError::Config(format!("medium.material: unknown material {name:?}")))?;
        rec.plate(thickness_mm * 1e-3, self.medium.attenuation_per_m).map_err(|e| field("medium", e))
    }

    pub fn dispersion_options(&self) -> DispersionOptions {
        DispersionOptions {
            convention: match self.medium.thickness_convention {
                Convention::Half => ThicknessConvention::HalfThickness,
                Convention::Full => ThicknessConvention::FullThickness,
            },
            ..DispersionOptions::default()
        }
    }

    pub fn crystal_spec(&self) -> Result<CrystalSpec, CliError> {
        let c = &self.crystal;
        let d = CrystalSpec::default();
        let spec = CrystalSpec {
            mass: c.mass_kg.unwrap_or(d.mass),
            damping: c.damping_n_s_per_m.unwrap_or(d.damping),
            stiffness: c.stiffness_n_per_m.unwrap_or(d.stiffness),
            width: c.width_m.unwrap_or(d.width),
            thickness: c.thickness_m.unwrap_or(d.thickness),
            mu33: c.mu33_c_per_n.unwrap_or(d.mu33),
            eps33: c.eps33_f_per_m.unwrap_or(d.eps33),
            volts_per_displacement: c.gain_v_per_c_m2.unwrap_or(d.volts_per_displacement),
            circuit_phase_offset: c.circuit_phase_offset_rad.unwrap_or(d.circuit_phase_offset),
        };
        spec.validate().map_err(|e| field("crystal", e))?;
        Ok(spec)
    }

    pub fn rtc_config(&self) -> Result<RtcConfig, CliError> {
        let r = &self.rtc;
        let (mode, reload) = match r.mode {
            Mode::Calendar => (CounterMode::Calendar, 32768),
            Mode::ThirtyTwoBit => (CounterMode::ThirtyTwoBit, 32),
        };
        let cfg = RtcConfig {
            nominal_freq: r.nominal_freq_hz,
            nominal_amplitude: r.nominal_amplitude_v,
            trigger_threshold: r.trigger_threshold_v.unwrap_or(0.5 * r.nominal_amplitude_v),
            divider_reload: r.divider_reload.unwrap_or(reload),
            mode,
            freeze_timeout: r.freeze_timeout_s,
            convergence_time_constant: r.convergence_time_constant_s,
        };
        cfg.validate().map_err(|e| field("rtc", e))?;
        Ok(cfg)
    }

    pub fn chain(&self) -> Result<Chain, CliError> {
        let db = self.media()?;
        let medium = self.medium_spec(&db, &self.medium.material, self.medium.thickness_mm)?;
        let t = &self.transducer;
        if !(t.position_m.is_finite() && t.position_m >= 0.0) {
            return Err(CliError::Config(format!("transducer.position_m: must be >= 0, got {}", t.position_m)));
        }
        let mut chain = Chain::new(medium, self.crystal_spec()?, self.rtc_config()?, t.drive_amplitude_v)
            .map_err(|e| field("scenario", e))?;
        chain.mode = rtcdrift::lamb::solve_dispersion_with(&chain.medium, chain.rtc.nominal_freq, &self.dispersion_options())?;
        Ok(chain)
    }

    pub fn calibration_options(&self) -> CalibrationOptions {
        let c = &self.calibration;
        CalibrationOptions { grid: c.grid, refine: c.refine, noise_floor: c.noise_floor_v, probe_noise: c.probe_noise_v }
    }

    pub fn drift_goal(&self, nominal_freq: f64) -> Result<(DriftGoal, f64, f64), CliError> {
        let goal = self.goal.ok_or_else(|| CliError::Config("goal: section required".into()))?;
        let wrap = |e| field("goal", e);
        match goal {
            GoalSection::Backward { window_s, drift_s, burst_s } => {
                Ok((DriftGoal::backward(window_s, drift_s).map_err(wrap)?, burst_s, 0.0))
            }
            GoalSection::Forward { window_s, drift_cycles, drift_s, burst_s, phase_step_rad } => {
                let g = match (drift_cycles, drift_s) {
                    (Some(c), None) => DriftGoal::forward(window_s, c),
                    (None, Some(s)) => DriftGoal::forward_seconds(window_s, s, nominal_freq),
                    _ => return Err(CliError::Config("goal: give exactly one of drift_cycles and drift_s".into())),
                }
                .map_err(wrap)?;
                Ok((g, burst_s, phase_step_rad))
            }
        }
    }

    pub fn library(&self) -> Result<ProfileLibrary, CliError> {
        match &self.fingerprint.library_path {
            None => Ok(ProfileLibrary::builtin()),
            Some(p) => {
                ProfileLibrary::parse(&self.read(p, "fingerprint.library_path")?).map_err(|e| field("fingerprint.library_path", e))
            }
        }
    }

    pub fn capture_config(&self) -> Result<CaptureConfig, CliError> {
        let f = &self.fingerprint;
        let cfg = CaptureConfig {
            sample_rate: f.sample_rate_hz,
            duration: f.duration_s,
            snr_db: f.snr_db,
            scale_a: f.scale_a_mv,
            scale_b: f.scale_b_mv,
            bandwidth_m: f.bandwidth_hz,
            denoise: DenoiseOptions {
                filter_order: f.filter_order,
                levels: f.wavelet_levels,
                rule: match f.threshold_rule {
                    Rule::Universal => ThresholdRule::Universal,
                    Rule::SureHybrid => ThresholdRule::SureHybrid,
                },
            },
            unknown_threshold: f.unknown_threshold,
        };
        cfg.validate().map_err(|e| field("fingerprint", e))?;
        Ok(cfg)
    }

    pub fn bp_scenario(&self) -> Result<BpScenario, CliError> {
        let b = &self.bp;
        let s = BpScenario {
            p0: b.initial_pressure_mmhg,
            systolic: b.systolic_mmhg,
            diastolic: b.diastolic_mmhg,
            v0: b.deflation_rate_mmhg_per_s,
            dp: b.pressure_step_mmhg_per_cycle,
            df: 0.0,
        };
        s.validate().map_err(|e| field("bp", e))?;
        Ok(s)
    }

    pub fn damping(&self) -> Result<DampingSpec, CliError> {
        let c = &self.counter;
        let spec = match (c.damping_n_s_per_m, c.stiffness_n_per_m, c.mass_kg) {
            (Some(damp), Some(k), Some(m)) => DampingSpec::from_physical(damp, k, m),
            (None, None, None) => match (c.natural_freq_rad_s, c.damping_ratio) {
                (Some(w), Some(z)) => DampingSpec::new(w, z),
                _ => return Err(CliError::Config("counter: natural_freq_rad_s and damping_ratio are both required".into())),
            },
            _ => {
                return Err(CliError::Config(
                    "counter: damping_n_s_per_m, stiffness_n_per_m and mass_kg go together".into(),
                ))
            }
        };
        spec.map_err(|e| field("counter", e))
    }

    pub fn synth(&self) -> Result<ClockSynthConfig, CliError> {
        let c = &self.counter;
        ClockSynthConfig::parse(&c.ref_freq_hz, &c.pll_mult, &c.multisynth_div).map_err(|e| field("counter", e))
    }

    /// The section's own sweep, or the command-line one.
    pub fn sweep(&self, default: &str, cli: Option<&Sweep>, section: &str) -> Result<Sweep, CliError> {
        match cli {
            Some(s) => Ok(s.clone()),
            None => default.parse().map_err(|e: CliError| CliError::Config(format!("{section}.sweep: {e}"))),
        }
    }
}

fn field(name: &str, e: rtcdrift::Error) -> CliError {
    match e {
        rtcdrift::Error::InvalidInput(m) | rtcdrift::Error::Parse { message: m, .. } => {
            CliError::Config(format!("{name}: {m}"))
        }
        other => CliError::from(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_needs_schema_version() {
        let err = Scenario::from_json("{}", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("schema_version"), "{err}");
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = Scenario::from_json(r#"{"schema_version":1,"medium":{"thickness_m":0.005}}"#, Path::new("."))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("medium") && msg.contains("thickness_m"), "{msg}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let err = Scenario::from_json(r#"{"schema_version":2}"#, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn forward_goal_needs_one_drift_unit() {
        let s = Scenario::from_json(
            r#"{"schema_version":1,"goal":{"direction":"forward","window_s":1,"burst_s":1e-5,"phase_step_rad":1.5}}"#,
            Path::new("."),
        )
        .unwrap();
        assert!(s.drift_goal(32768.0).is_err());
    }

    #[test]
    fn defaults_build_a_chain() {
        let s = Scenario::default();
        let chain = s.chain().unwrap();
        assert_eq!(chain.rtc.divider_reload, 32768);
        assert_eq!(chain.rtc.trigger_threshold, 0.04);
    }

    #[test]
    fn thirty_two_bit_defaults_to_short_divider() {
        let s = Scenario::from_json(r#"{"schema_version":1,"rtc":{"mode":"thirty_two_bit"}}"#, Path::new(".")).unwrap();
        assert_eq!(s.rtc_config().unwrap().divider_reload, 32);
    }
}
