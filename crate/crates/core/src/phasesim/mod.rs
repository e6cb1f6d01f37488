//! Time-domain model of the interferometer phase: Wiener drift between the
//! two fibre arms, reference windows that feed a phase controller, and
//! quantum parts whose code-mode bits are sifted at whatever phase error
//! the loop leaves behind.

mod controller;

pub use controller::{Controller, DitherController, FeedbackState, OpenLoop};

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::channel::code_mode_at;
use crate::error::{Error, Result};
use crate::photonics::{click_probability, CountPair, PhotonIntensity, Probability};

/// Wraps an angle to `(−π, π]`.
pub fn wrap(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// A phase stored as a fraction of a turn in 32-bit fixed point, so that
/// accumulation wraps exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Phase(pub u32);

impl Phase {
    pub const ZERO: Phase = Phase(0);

    pub fn from_radians(phase: f64) -> Self {
        let turns = (phase / TAU).rem_euclid(1.0);
        Phase((turns * 4_294_967_296.0).round() as u64 as u32)
    }

    /// The angle in `(−π, π]`.
    pub fn radians(self) -> f64 {
        let signed = self.0 as i32;
        if signed == i32::MIN {
            PI
        } else {
            signed as f64 * (TAU / 4_294_967_296.0)
        }
    }

    pub fn add(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_add(other.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pub pulse_rate: f64,
    pub pulse_width: f64,
    /// Length of one reference part, and of one quantum part.
    pub part_duration: f64,
    pub feedback_window: f64,
    pub controller_clock: f64,
    pub actuation_delay: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            pulse_rate: 1e9,
            pulse_width: 130e-12,
            part_duration: 50e-6,
            feedback_window: 48e-6,
            controller_clock: 40e6,
            actuation_delay: 0.2e-6,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pulse_rate", self.pulse_rate),
            ("part_duration", self.part_duration),
            ("feedback_window", self.feedback_window),
            ("controller_clock", self.controller_clock),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Configuration(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.pulse_width >= 0.0 && self.actuation_delay >= 0.0) {
            return Err(Error::Configuration("negative pulse width or actuation delay".into()));
        }
        if self.feedback_window > self.part_duration {
            return Err(Error::Configuration(format!(
                "feedback window {} s exceeds part duration {} s",
                self.feedback_window, self.part_duration
            )));
        }
        if self.actuation_delay >= self.part_duration - self.feedback_window {
            return Err(Error::Configuration(format!(
                "actuation delay {} s does not fit in the {} s guard",
                self.actuation_delay,
                self.part_duration - self.feedback_window
            )));
        }
        Ok(())
    }

    pub fn pulses_per_window(&self) -> f64 {
        (self.feedback_window * self.pulse_rate).round()
    }

    pub fn cycle_duration(&self) -> f64 {
        2.0 * self.part_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Variance rate of the arm phase difference, rad²/s.
    pub drift_diffusion: f64,
    /// Bound on the drift over one millisecond, rad/ms.
    pub max_drift_rate: f64,
    /// Standard deviation of the locked-laser residual added at every step, rad.
    pub residual_lock_std: f64,
    /// Rate of sudden phase kicks, Hz.
    pub jump_rate_hz: f64,
    pub jump_std: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            drift_diffusion: 0.0,
            max_drift_rate: PI,
            residual_lock_std: 0.0,
            jump_rate_hz: 0.0,
            jump_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("drift_diffusion", self.drift_diffusion),
            ("max_drift_rate", self.max_drift_rate),
            ("residual_lock_std", self.residual_lock_std),
            ("jump_rate_hz", self.jump_rate_hz),
            ("jump_std", self.jump_std),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Configuration(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// 99th percentile of `|Δφ|` over one millisecond of pure drift.
    pub fn drift_p99_per_ms(&self) -> f64 {
        2.575_829_303_549 * (self.drift_diffusion * 1e-3).sqrt()
    }

    pub fn within_drift_bound(&self) -> bool {
        self.drift_p99_per_ms() <= self.max_drift_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// Reference pulse intensity leaving each user.
    pub reference_intensity: f64,
    /// Code-mode signal intensity used in the quantum parts.
    pub signal_intensity: f64,
    pub fibre_loss_db_per_arm: f64,
    pub pm_insertion_loss_db: f64,
    pub other_loss_db: f64,
    pub sspd_efficiency: f64,
    /// Dark counts of both detectors together.
    pub dark_rate_hz: f64,
    pub contrast: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig::field_300km()
    }
}

impl DetectionConfig {
    /// Operating point of the 300 km reference measurement: 150 km per arm.
    pub fn field_300km() -> Self {
        DetectionConfig {
            reference_intensity: 2.9,
            signal_intensity: 0.016,
            fibre_loss_db_per_arm: 26.65,
            pm_insertion_loss_db: 2.2,
            other_loss_db: 0.74,
            sspd_efficiency: 0.6,
            dark_rate_hz: 200.0,
            contrast: 0.985,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("reference_intensity", self.reference_intensity),
            ("signal_intensity", self.signal_intensity),
            ("fibre_loss_db_per_arm", self.fibre_loss_db_per_arm),
            ("pm_insertion_loss_db", self.pm_insertion_loss_db),
            ("other_loss_db", self.other_loss_db),
            ("dark_rate_hz", self.dark_rate_hz),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Configuration(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.sspd_efficiency > 0.0 && self.sspd_efficiency <= 1.0) {
            return Err(Error::Configuration(format!(
                "sspd_efficiency {} outside (0, 1]",
                self.sspd_efficiency
            )));
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(Error::Configuration(format!("contrast {} outside [0, 1]", self.contrast)));
        }
        Ok(())
    }

    /// Source-to-click transmittance of one arm, detector efficiency included.
    pub fn arm_transmittance(&self) -> f64 {
        let db = self.fibre_loss_db_per_arm + self.pm_insertion_loss_db + self.other_loss_db;
        10f64.powf(-db / 10.0) * self.sspd_efficiency
    }

    /// Dark-count probability of one detector in one pulse slot.
    pub fn dark_per_pulse(&self, timing: &TimingConfig) -> Probability {
        Probability::saturating(0.5 * self.dark_rate_hz / timing.pulse_rate)
    }

    /// Per-pulse click probabilities of D0 and D1 for reference pulses at
    /// relative phase `phase`.
    pub fn reference_click_probabilities(&self, phase: f64, timing: &TimingConfig) -> (f64, f64) {
        let a = self.reference_intensity * self.arm_transmittance();
        let k = self.contrast * phase.cos();
        let dark = self.dark_per_pulse(timing);
        let p = |x: f64| {
            click_probability(PhotonIntensity::new(x.max(0.0)).unwrap_or(PhotonIntensity::VACUUM), dark).get()
        };
        (p(a * (1.0 + k)), p(a * (1.0 - k)))
    }
}

/// Expected D0/D1 counts of one reference window.
pub fn expected_window_counts(phase: f64, detection: &DetectionConfig, timing: &TimingConfig) -> CountPair {
    let n = timing.pulses_per_window();
    let (p0, p1) = detection.reference_click_probabilities(phase, timing);
    CountPair {
        constructive: n * p0,
        destructive: n * p1,
    }
}

/// Advances the arm phase difference by one Wiener step of length `dt` plus
/// an independent lock residual, wrapped to `(−π, π]`.
pub fn drift_step<R: Rng + ?Sized>(phase: f64, dt: f64, noise: &NoiseModel, rng: &mut R) -> f64 {
    wrap(phase + drift_increment(dt, noise, rng))
}

fn drift_increment<R: Rng + ?Sized>(dt: f64, noise: &NoiseModel, rng: &mut R) -> f64 {
    let mut delta = 0.0;
    if noise.drift_diffusion > 0.0 {
        delta += gaussian(rng, (noise.drift_diffusion * dt).sqrt());
    }
    if noise.residual_lock_std > 0.0 {
        delta += gaussian(rng, noise.residual_lock_std);
    }
    if noise.jump_rate_hz > 0.0 && noise.jump_std > 0.0 {
        let p = -(-noise.jump_rate_hz * dt).exp_m1();
        if rng.random::<f64>() < p {
            delta += gaussian(rng, noise.jump_std);
        }
    }
    delta
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = rand_distr::StandardNormal.sample(rng);
    z * sd
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(0.0)
}

/// Counts of one reference window at relative phase `phase`. Each detector
/// total is a single Poisson draw with the window's expected count.
pub fn window_counts<R: Rng + ?Sized>(
    phase: f64,
    detection: &DetectionConfig,
    timing: &TimingConfig,
    rng: &mut R,
) -> CountPair {
    let mean = expected_window_counts(phase, detection, timing);
    CountPair {
        constructive: poisson(rng, mean.constructive),
        destructive: poisson(rng, mean.destructive),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Click {
    D0,
    D1,
    None,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiftOutcome {
    KeepCorrect,
    KeepError,
    Discard,
}

/// Code-mode sifting. A D1 click makes Bob flip his bit.
pub fn sift(alice_bit: u8, bob_bit: u8, click: Click) -> SiftOutcome {
    let same = (alice_bit & 1) == (bob_bit & 1);
    let correct = match click {
        Click::None | Click::Both => return SiftOutcome::Discard,
        Click::D0 => same,
        Click::D1 => !same,
    };
    if correct {
        SiftOutcome::KeepCorrect
    } else {
        SiftOutcome::KeepError
    }
}

/// Everything a session needs besides its length and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionSetup {
    pub timing: TimingConfig,
    pub noise: NoiseModel,
    pub detection: DetectionConfig,
    pub controller: DitherController,
    pub feedback_on: bool,
    pub initial_phase: Phase,
}

impl SessionSetup {
    pub fn new(timing: TimingConfig, noise: NoiseModel, detection: DetectionConfig) -> Self {
        SessionSetup {
            timing,
            noise,
            detection,
            controller: DitherController::default(),
            feedback_on: true,
            initial_phase: Phase::ZERO,
        }
    }

    /// Ideal interferometer, no drift, dark counts only.
    pub fn noiseless() -> Self {
        let detection = DetectionConfig {
            contrast: 1.0,
            ..DetectionConfig::field_300km()
        };
        SessionSetup::new(TimingConfig::default(), NoiseModel::noiseless(), detection)
    }

    /// Drift and residual noise matched to the 300 km reference run.
    pub fn field_300km() -> Self {
        let noise = NoiseModel {
            drift_diffusion: 100.0,
            max_drift_rate: PI,
            residual_lock_std: 0.02,
            jump_rate_hz: 0.0,
            jump_std: 0.0,
        };
        SessionSetup::new(TimingConfig::default(), noise, DetectionConfig::field_300km())
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "noiseless" => Some(Self::noiseless()),
            "field-300km" => Some(Self::field_300km()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        self.noise.validate()?;
        self.detection.validate()?;
        let c = &self.controller;
        if !(c.dither > 0.0 && c.dither < PI / 2.0) {
            return Err(Error::Configuration(format!("dither {} outside (0, π/2)", c.dither)));
        }
        if !(c.gain > 0.0 && c.gain <= 2.0) {
            return Err(Error::Configuration(format!("gain {} outside (0, 2]", c.gain)));
        }
        if !(c.visibility_hint > 0.0 && c.visibility_hint <= 1.0) {
            return Err(Error::Configuration(format!(
                "visibility hint {} outside (0, 1]",
                c.visibility_hint
            )));
        }
        Ok(())
    }
}

/// One row per simulated second (the last row may cover less).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// End of the interval, s.
    pub time_s: f64,
    /// Visibility of the summed reference counts; NaN if there were none.
    pub visibility: f64,
    /// Sifted error rate of the quantum parts; NaN if nothing was kept.
    pub qber: f64,
    pub correction_rad: f64,
    /// Mean D0 counts per reference window.
    pub d0_counts: f64,
    pub d1_counts: f64,
    pub kept_correct: u64,
    pub kept_error: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub controller: String,
    pub rows: Vec<TraceRow>,
    /// Windows in which no reference count arrived.
    pub signal_loss_windows: u64,
}

impl SessionTrace {
    pub fn mean_visibility(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.visibility))
    }

    pub fn mean_qber(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.qber))
    }

    pub fn mean_counts(&self) -> CountPair {
        CountPair {
            constructive: mean(self.rows.iter().map(|r| r.d0_counts)),
            destructive: mean(self.rows.iter().map(|r| r.d1_counts)),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,visibility,qber,correction_rad,d0_counts,d1_counts\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.time_s, r.visibility, r.qber, r.correction_rad, r.d0_counts, r.d1_counts
            );
        }
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Runs the stabilization loop with the default dither controller.
pub fn run_session(
    timing: &TimingConfig,
    noise: &NoiseModel,
    detection: &DetectionConfig,
    duration: f64,
    feedback_on: bool,
    seed: u64,
) -> Result<SessionTrace> {
    let setup = SessionSetup {
        feedback_on,
        ..SessionSetup::new(*timing, *noise, *detection)
    };
    simulate(&setup, duration, seed)
}

/// Runs `setup` for `duration` seconds. Drift and detection draw from
/// separate streams of the same seed, so sessions that differ only in the
/// controller see the same drift path.
pub fn simulate(setup: &SessionSetup, duration: f64, seed: u64) -> Result<SessionTrace> {
    setup.validate()?;
    let mut controller: Box<dyn Controller> = if setup.feedback_on {
        Box::new(setup.controller)
    } else {
        Box::new(OpenLoop)
    };
    simulate_with(setup, controller.as_mut(), duration, seed)
}

pub fn simulate_with(
    setup: &SessionSetup,
    controller: &mut dyn Controller,
    duration: f64,
    seed: u64,
) -> Result<SessionTrace> {
    let timing = &setup.timing;
    timing.validate()?;
    setup.noise.validate()?;
    setup.detection.validate()?;
    let cycle = timing.cycle_duration();
    if !(duration.is_finite() && duration >= cycle) {
        return Err(Error::Configuration(format!(
            "duration {duration} s is shorter than one {cycle} s cycle"
        )));
    }

    let mut drift_rng = ChaCha8Rng::seed_from_u64(seed);
    drift_rng.set_stream(1);
    let mut count_rng = ChaCha8Rng::seed_from_u64(seed);
    count_rng.set_stream(2);

    let total_cycles = (duration / cycle).round() as u64;
    let cycles_per_row = ((1.0 / cycle).round() as u64).max(1);
    let pulses = timing.pulses_per_window();
    let signal = setup.detection.signal_intensity * setup.detection.arm_transmittance();
    let dark = setup.detection.dark_per_pulse(timing);
    let contrast = setup.detection.contrast;

    let mut state = FeedbackState::new();
    let mut theta = setup.initial_phase;
    let mut rows = Vec::with_capacity((total_cycles / cycles_per_row + 1) as usize);
    let mut signal_loss_windows = 0;

    let mut acc = RowAccumulator::default();
    for cycle_index in 0..total_cycles {
        theta = theta.add(Phase::from_radians(drift_increment(
            timing.part_duration,
            &setup.noise,
            &mut drift_rng,
        )));
        let probe = controller.probe_offset(&state);
        let phi = theta.radians() + state.applied_correction + probe;
        let counts = window_counts(phi, &setup.detection, timing, &mut count_rng);
        acc.d0 += counts.constructive;
        acc.d1 += counts.destructive;
        acc.windows += 1;
        // Loaded within the guard interval, ahead of the quantum part.
        controller.estimate_correction(counts, &mut state);
        if state.signal_lost {
            signal_loss_windows += 1;
        }

        theta = theta.add(Phase::from_radians(drift_increment(
            timing.part_duration,
            &setup.noise,
            &mut drift_rng,
        )));
        let error = theta.radians() + state.applied_correction;
        if let Ok((gain, qber)) = code_mode_at(signal, contrast, error, dark) {
            let kept = poisson(&mut count_rng, pulses * gain.get()) as u64;
            let wrong = if kept > 0 {
                Binomial::new(kept, qber.get())
                    .map(|b| b.sample(&mut count_rng))
                    .unwrap_or(0)
            } else {
                0
            };
            acc.kept_error += wrong;
            acc.kept_correct += kept - wrong;
        }

        let done = cycle_index + 1;
        if done % cycles_per_row == 0 || done == total_cycles {
            rows.push(acc.finish(done as f64 * cycle, wrap(state.applied_correction)));
            acc = RowAccumulator::default();
        }
    }

    Ok(SessionTrace {
        controller: controller.name(),
        rows,
        signal_loss_windows,
    })
}

#[derive(Default)]
struct RowAccumulator {
    d0: f64,
    d1: f64,
    windows: u64,
    kept_correct: u64,
    kept_error: u64,
}

impl RowAccumulator {
    fn finish(&self, time_s: f64, correction_rad: f64) -> TraceRow {
        let total = self.d0 + self.d1;
        let kept = self.kept_correct + self.kept_error;
        TraceRow {
            time_s,
            visibility: if total > 0.0 {
                (self.d0 - self.d1) / total
            } else {
                f64::NAN
            },
            qber: if kept > 0 {
                self.kept_error as f64 / kept as f64
            } else {
                f64::NAN
            },
            correction_rad,
            d0_counts: self.d0 / self.windows as f64,
            d1_counts: self.d1 / self.windows as f64,
            kept_correct: self.kept_correct,
            kept_error: self.kept_error,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap(PI), PI);
        assert!((wrap(-PI) - PI).abs() < 1e-15);
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap(0.0), 0.0);
    }

    #[test]
    fn fixed_point_phase() {
        assert_eq!(Phase::from_radians(PI).radians(), PI);
        assert_eq!(Phase::from_radians(0.25), Phase::from_radians(0.25 + TAU));
        assert!((Phase::from_radians(-1.0).radians() + 1.0).abs() < 2e-9);
        let a = Phase::from_radians(3.0);
        let b = Phase::from_radians(1.0);
        assert!((a.add(b).radians() - wrap(4.0)).abs() < 4e-9);
    }

    #[test]
    fn sift_truth_table() {
        assert_eq!(sift(0, 0, Click::D0), SiftOutcome::KeepCorrect);
        assert_eq!(sift(0, 1, Click::D1), SiftOutcome::KeepCorrect);
        assert_eq!(sift(0, 0, Click::D1), SiftOutcome::KeepError);
        assert_eq!(sift(1, 0, Click::D0), SiftOutcome::KeepError);
        assert_eq!(sift(1, 1, Click::None), SiftOutcome::Discard);
        assert_eq!(sift(0, 1, Click::Both), SiftOutcome::Discard);
    }

    #[test]
    fn timing_defaults_are_valid() {
        let t = TimingConfig::default();
        t.validate().unwrap();
        assert_eq!(t.pulses_per_window(), 48_000.0);
        let bad = TimingConfig {
            actuation_delay: 3e-6,
            ..t
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn presets_respect_drift_bound() {
        for name in ["noiseless", "field-300km"] {
            let s = SessionSetup::preset(name).unwrap();
            s.validate().unwrap();
            assert!(s.noise.within_drift_bound());
        }
    }

    #[test]
    fn short_duration_is_rejected() {
        let s = SessionSetup::noiseless();
        assert!(simulate(&s, 1e-5, 0).is_err());
    }
}
