//! `key = value` scenario files with dotted section prefixes, e.g.
//! `channel.fibre_length_km = 300`. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use tfqkd_core::channel::{ChannelParams, IntensitySchedule, NU3_RATIO};
use tfqkd_core::decoy::{CombinationReading, RelaxPolicy, DEFAULT_CUTOFF};
use tfqkd_core::keyrate::DEFAULT_EC_EFFICIENCY;
use tfqkd_core::phasesim::{Phase, SessionSetup};
use tfqkd_core::Probability;

use crate::error::{CliError, Result};
use crate::fixtures;

pub const KEYS: &[&str] = &[
    "channel.fibre_length_km",
    "channel.loss_coeff_db_per_km",
    "channel.device_efficiency",
    "channel.dark_per_pulse",
    "channel.misalignment",
    "schedule.mu",
    "schedule.nu1",
    "schedule.nu2",
    "schedule.nu3",
    "leakage.backend",
    "leakage.anchors",
    "lp.cutoff",
    "lp.relax",
    "lp.reading",
    "keyrate.ec_efficiency",
    "sweep.from_km",
    "sweep.to_km",
    "sweep.step_km",
    "sweep.mu",
    "phasesim.preset",
    "phasesim.duration_s",
    "phasesim.feedback",
    "phasesim.initial_phase_rad",
    "phasesim.drift_diffusion",
    "phasesim.max_drift_rate",
    "phasesim.residual_lock_std",
    "phasesim.jump_rate_hz",
    "phasesim.jump_std",
    "phasesim.reference_intensity",
    "phasesim.signal_intensity",
    "phasesim.fibre_loss_db_per_arm",
    "phasesim.pm_insertion_loss_db",
    "phasesim.other_loss_db",
    "phasesim.sspd_efficiency",
    "phasesim.dark_rate_hz",
    "phasesim.contrast",
    "phasesim.dither",
    "phasesim.gain",
    "phasesim.visibility_hint",
    "timing.pulse_rate",
    "timing.pulse_width",
    "timing.part_duration",
    "timing.feedback_window",
    "timing.controller_clock",
    "timing.actuation_delay",
    "data.path",
    "run.seed",
];

/// Parsed entries with the line each came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(head, _)| head).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{source}:{line}: expected key = value"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!("{source}:{line}: unknown key {key:?}")));
            }
            if entries.insert(key.to_string(), (value.to_string(), line)).is_some() {
                return Err(CliError::Config(format!("{source}:{line}: duplicate key {key:?}")));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(source: &str) -> Result<Self> {
        Self::parse(source, &fixtures::load(source)?)
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, line)) => value.parse().map(Some).map_err(|_| {
                CliError::Config(format!("line {line}: {key} = {value:?} is not valid"))
            }),
        }
    }

    fn apply<T: FromStr>(&self, key: &str, target: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *target = v;
        }
        Ok(())
    }

    /// Canonical `key=value` lines, sorted by key.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, (v, _))| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of [`canonical`](Self::canonical), so comments, spacing and
    /// ordering do not change it.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Calibration,
    Analytic,
}

impl FromStr for BackendChoice {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calibration" => Ok(BackendChoice::Calibration),
            "analytic" => Ok(BackendChoice::Analytic),
            _ => Err(CliError::Config(format!(
                "backend must be 'calibration' or 'analytic', got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendChoice::Calibration => "calibration",
            BackendChoice::Analytic => "analytic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMu {
    Fixed,
    Optimize,
}

impl FromStr for SweepMu {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(SweepMu::Fixed),
            "optimize" => Ok(SweepMu::Optimize),
            _ => Err(CliError::Config(format!("sweep.mu must be 'fixed' or 'optimize', got {s:?}"))),
        }
    }
}

/// `on`/`off` (also `true`/`false`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Switch(pub bool);

impl FromStr for Switch {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" | "true" => Ok(Switch(true)),
            "off" | "false" => Ok(Switch(false)),
            _ => Err(CliError::Config(format!("expected on/off, got {s:?}"))),
        }
    }
}

/// Everything a command needs, after defaults and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub channel: ChannelParams,
    pub schedule: IntensitySchedule,
    pub backend: BackendChoice,
    pub anchors: String,
    pub data: String,
    pub cutoff: u32,
    pub relax: RelaxPolicy,
    pub reading: CombinationReading,
    pub ec_efficiency: f64,
    pub sweep_from_km: f64,
    pub sweep_to_km: f64,
    pub sweep_step_km: f64,
    pub sweep_mu: SweepMu,
    pub session: SessionSetup,
    pub duration_s: f64,
    pub seed: u64,
    pub hash: String,
}

impl Settings {
    pub fn from_config(config: &ConfigFile) -> Result<Self> {
        let mut channel = ChannelParams::at_distance(100.0);
        config.apply("channel.fibre_length_km", &mut channel.fibre_length_km)?;
        config.apply("channel.loss_coeff_db_per_km", &mut channel.loss_coeff_db_per_km)?;
        config.apply("channel.device_efficiency", &mut channel.device_efficiency)?;
        config.apply("channel.misalignment", &mut channel.misalignment)?;
        if let Some(d) = config.get::<f64>("channel.dark_per_pulse")? {
            channel.dark_per_pulse = Probability::new(d)
                .map_err(|_| CliError::Config(format!("channel.dark_per_pulse {d} outside [0, 1]")))?;
        }
        channel
            .validate()
            .map_err(|e| CliError::Config(format!("channel: {e}")))?;

        let (mut mu, mut nu1, mut nu2) = (0.026, 0.005, 0.002);
        config.apply("schedule.mu", &mut mu)?;
        config.apply("schedule.nu1", &mut nu1)?;
        config.apply("schedule.nu2", &mut nu2)?;
        let nu3 = config.get::<f64>("schedule.nu3")?.unwrap_or(mu * NU3_RATIO);
        let schedule = IntensitySchedule::new(mu, nu1, nu2, nu3)
            .map_err(|e| CliError::Config(format!("schedule: {e}")))?;

        let mut session = match config.get::<String>("phasesim.preset")? {
            None => SessionSetup::field_300km(),
            Some(name) => SessionSetup::preset(&name)
                .ok_or_else(|| CliError::Config(format!("unknown phasesim preset {name:?}")))?,
        };
        {
            let n = &mut session.noise;
            config.apply("phasesim.drift_diffusion", &mut n.drift_diffusion)?;
            config.apply("phasesim.max_drift_rate", &mut n.max_drift_rate)?;
            config.apply("phasesim.residual_lock_std", &mut n.residual_lock_std)?;
            config.apply("phasesim.jump_rate_hz", &mut n.jump_rate_hz)?;
            config.apply("phasesim.jump_std", &mut n.jump_std)?;
            let d = &mut session.detection;
            config.apply("phasesim.reference_intensity", &mut d.reference_intensity)?;
            config.apply("phasesim.signal_intensity", &mut d.signal_intensity)?;
            config.apply("phasesim.fibre_loss_db_per_arm", &mut d.fibre_loss_db_per_arm)?;
            config.apply("phasesim.pm_insertion_loss_db", &mut d.pm_insertion_loss_db)?;
            config.apply("phasesim.other_loss_db", &mut d.other_loss_db)?;
            config.apply("phasesim.sspd_efficiency", &mut d.sspd_efficiency)?;
            config.apply("phasesim.dark_rate_hz", &mut d.dark_rate_hz)?;
            config.apply("phasesim.contrast", &mut d.contrast)?;
            let c = &mut session.controller;
            config.apply("phasesim.dither", &mut c.dither)?;
            config.apply("phasesim.gain", &mut c.gain)?;
            config.apply("phasesim.visibility_hint", &mut c.visibility_hint)?;
            let t = &mut session.timing;
            config.apply("timing.pulse_rate", &mut t.pulse_rate)?;
            config.apply("timing.pulse_width", &mut t.pulse_width)?;
            config.apply("timing.part_duration", &mut t.part_duration)?;
            config.apply("timing.feedback_window", &mut t.feedback_window)?;
            config.apply("timing.controller_clock", &mut t.controller_clock)?;
            config.apply("timing.actuation_delay", &mut t.actuation_delay)?;
        }
        if let Some(Switch(on)) = config.get("phasesim.feedback")? {
            session.feedback_on = on;
        }
        if let Some(phi) = config.get::<f64>("phasesim.initial_phase_rad")? {
            session.initial_phase = Phase::from_radians(phi);
        }
        session
            .validate()
            .map_err(|e| CliError::Config(format!("phasesim: {e}")))?;
        if !session.noise.within_drift_bound() {
            log::warn!(
                "drift diffusion {} rad^2/s exceeds {} rad/ms at the 99th percentile",
                session.noise.drift_diffusion,
                session.noise.max_drift_rate
            );
        }

        let mut settings = Settings {
            channel,
            schedule,
            backend: BackendChoice::Calibration,
            anchors: fixtures::ANCHORS.to_string(),
            data: fixtures::TABLES.to_string(),
            cutoff: DEFAULT_CUTOFF,
            relax: RelaxPolicy::Auto,
            reading: CombinationReading::Corrected,
            ec_efficiency: DEFAULT_EC_EFFICIENCY,
            sweep_from_km: 50.0,
            sweep_to_km: 350.0,
            sweep_step_km: 25.0,
            sweep_mu: SweepMu::Fixed,
            session,
            duration_s: 100.0,
            seed: 0,
            hash: config.hash(),
        };
        config.apply("leakage.backend", &mut settings.backend)?;
        config.apply("leakage.anchors", &mut settings.anchors)?;
        config.apply("data.path", &mut settings.data)?;
        config.apply("lp.cutoff", &mut settings.cutoff)?;
        config.apply("lp.relax", &mut settings.relax)?;
        config.apply("lp.reading", &mut settings.reading)?;
        config.apply("keyrate.ec_efficiency", &mut settings.ec_efficiency)?;
        config.apply("sweep.from_km", &mut settings.sweep_from_km)?;
        config.apply("sweep.to_km", &mut settings.sweep_to_km)?;
        config.apply("sweep.step_km", &mut settings.sweep_step_km)?;
        config.apply("sweep.mu", &mut settings.sweep_mu)?;
        config.apply("phasesim.duration_s", &mut settings.duration_s)?;
        config.apply("run.seed", &mut settings.seed)?;
        if settings.ec_efficiency < 1.0 {
            return Err(CliError::Config(format!(
                "keyrate.ec_efficiency {} is below 1",
                settings.ec_efficiency
            )));
        }
        Ok(settings)
    }
}
