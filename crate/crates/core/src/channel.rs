//! Forward model of the twin-field optical layer: two senders at equal
//! distance from a 50/50 beam splitter followed by two threshold detectors.
//!
//! Code mode interferes the phase-encoded signal states at a fixed relative
//! phase; decoy mode averages the same interference over a uniformly random
//! relative phase. Misalignment enters as reduced interference contrast,
//! `contrast = 1 - 2·e_mis`, so that the error rate of weak signals tends to
//! `e_mis`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::photonics::{joint_tail, PhotonIntensity, PoissonSeries, Probability};

/// Total loss of the measurement station, dB.
pub const DEVICE_LOSS_DB: f64 = 5.16;

/// Default ratio `ν₃ / μ`.
pub const NU3_RATIO: f64 = 0.003_162_277_660_168_379_5; // 10^{-2.5}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Alice-to-Bob fibre length; each sender sits at half of it.
    pub fibre_length_km: f64,
    pub loss_coeff_db_per_km: f64,
    /// Overall efficiency of the measurement station including detectors.
    pub device_efficiency: f64,
    /// Per-pulse dark-count probability of each detector.
    pub dark_per_pulse: Probability,
    pub misalignment: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            fibre_length_km: 0.0,
            loss_coeff_db_per_km: 0.18,
            device_efficiency: 0.305,
            dark_per_pulse: Probability::new(1e-7).expect("valid"),
            misalignment: 0.03,
        }
    }
}

impl ChannelParams {
    pub fn at_distance(fibre_length_km: f64) -> Self {
        ChannelParams {
            fibre_length_km,
            ..Default::default()
        }
    }

    pub fn with_length(mut self, fibre_length_km: f64) -> Self {
        self.fibre_length_km = fibre_length_km;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fibre_length_km >= 0.0 && self.fibre_length_km.is_finite()) {
            return Err(Error::domain("fibre length must be finite and non-negative"));
        }
        if !(self.loss_coeff_db_per_km > 0.0 && self.loss_coeff_db_per_km.is_finite()) {
            return Err(Error::domain("loss coefficient must be positive"));
        }
        if !(self.device_efficiency > 0.0 && self.device_efficiency <= 1.0) {
            return Err(Error::domain("device efficiency must lie in (0, 1]"));
        }
        if !(0.0..0.5).contains(&self.misalignment) {
            return Err(Error::domain("misalignment must lie in [0, 0.5)"));
        }
        Ok(())
    }

    pub fn contrast(&self) -> f64 {
        1.0 - 2.0 * self.misalignment
    }
}

/// The four intensity levels of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Mu,
    Nu1,
    Nu2,
    Nu3,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Mu, Level::Nu1, Level::Nu2, Level::Nu3];

    pub fn label(self) -> &'static str {
        match self {
            Level::Mu => "mu",
            Level::Nu1 => "nu1",
            Level::Nu2 => "nu2",
            Level::Nu3 => "nu3",
        }
    }
}

/// Ordered `(Alice, Bob)` intensity pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntensityPair(pub Level, pub Level);

impl IntensityPair {
    pub fn swapped(self) -> Self {
        IntensityPair(self.1, self.0)
    }

    pub fn label(self) -> String {
        format!("{}_{}", self.0.label(), self.1.label())
    }
}

impl fmt::Display for IntensityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// The ten decoy pairs whose gains are recorded.
pub const DATA_PAIRS: [IntensityPair; 10] = [
    IntensityPair(Level::Mu, Level::Mu),
    IntensityPair(Level::Nu1, Level::Nu1),
    IntensityPair(Level::Nu2, Level::Nu2),
    IntensityPair(Level::Nu3, Level::Nu3),
    IntensityPair(Level::Mu, Level::Nu3),
    IntensityPair(Level::Nu1, Level::Nu3),
    IntensityPair(Level::Nu2, Level::Nu3),
    IntensityPair(Level::Nu3, Level::Mu),
    IntensityPair(Level::Nu3, Level::Nu1),
    IntensityPair(Level::Nu3, Level::Nu2),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensitySchedule {
    pub mu: PhotonIntensity,
    pub nu1: PhotonIntensity,
    pub nu2: PhotonIntensity,
    pub nu3: PhotonIntensity,
}

impl IntensitySchedule {
    /// Requires `μ > ν₁ > ν₂ > ν₃ ≥ 0`. The all-vacuum schedule is accepted
    /// as a degenerate case.
    pub fn new(mu: f64, nu1: f64, nu2: f64, nu3: f64) -> Result<Self> {
        let s = IntensitySchedule {
            mu: PhotonIntensity::new(mu)?,
            nu1: PhotonIntensity::new(nu1)?,
            nu2: PhotonIntensity::new(nu2)?,
            nu3: PhotonIntensity::new(nu3)?,
        };
        let vacuum = mu == 0.0 && nu1 == 0.0 && nu2 == 0.0 && nu3 == 0.0;
        if !vacuum && !(mu > nu1 && nu1 > nu2 && nu2 > nu3) {
            return Err(Error::domain(format!(
                "intensities must satisfy mu > nu1 > nu2 > nu3 >= 0, got ({mu}, {nu1}, {nu2}, {nu3})"
            )));
        }
        Ok(s)
    }

    /// Schedule with `ν₃ = 10^{-2.5}·μ`.
    pub fn with_default_nu3(mu: f64, nu1: f64, nu2: f64) -> Result<Self> {
        IntensitySchedule::new(mu, nu1, nu2, mu * NU3_RATIO)
    }

    pub fn vacuum() -> Self {
        IntensitySchedule {
            mu: PhotonIntensity::VACUUM,
            nu1: PhotonIntensity::VACUUM,
            nu2: PhotonIntensity::VACUUM,
            nu3: PhotonIntensity::VACUUM,
        }
    }

    pub fn get(&self, level: Level) -> PhotonIntensity {
        match level {
            Level::Mu => self.mu,
            Level::Nu1 => self.nu1,
            Level::Nu2 => self.nu2,
            Level::Nu3 => self.nu3,
        }
    }
}

/// Code-mode gain and error rate plus the decoy gain table.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoyYields {
    pub q_code: Probability,
    pub e_code: Probability,
    pub q_decoy: BTreeMap<IntensityPair, Probability>,
}

impl DecoyYields {
    pub fn get(&self, pair: IntensityPair) -> Option<Probability> {
        self.q_decoy.get(&pair).copied()
    }

    pub fn missing_pairs(&self) -> Vec<IntensityPair> {
        DATA_PAIRS
            .iter()
            .copied()
            .filter(|p| !self.q_decoy.contains_key(p))
            .collect()
    }

    /// Pairs `(p, p')` with `p'` dominating `p` in both intensities but a
    /// strictly smaller gain. Always empty for simulated data; measured data
    /// may show violations from statistical fluctuation.
    pub fn monotonicity_violations(
        &self,
        schedule: &IntensitySchedule,
    ) -> Vec<(IntensityPair, IntensityPair)> {
        let mut out = Vec::new();
        for (&lo, &q_lo) in &self.q_decoy {
            for (&hi, &q_hi) in &self.q_decoy {
                if lo == hi {
                    continue;
                }
                let dominates = schedule.get(hi.0) >= schedule.get(lo.0)
                    && schedule.get(hi.1) >= schedule.get(lo.1);
                if dominates && q_hi < q_lo {
                    out.push((lo, hi));
                }
            }
        }
        out
    }
}

/// Per-arm intensity transmittance: half the fibre plus the measurement
/// station, `10^{-loss·l/20}·η_D`.
pub fn arm_intensity_transmittance(params: &ChannelParams) -> f64 {
    let arm_db = params.loss_coeff_db_per_km * params.fibre_length_km / 2.0;
    10f64.powf(-arm_db / 10.0) * params.device_efficiency
}

/// Output intensities of a 50/50 beam splitter fed with coherent pulses of
/// means `a` and `b` at relative phase `phase`.
pub fn interference_intensities(
    a: PhotonIntensity,
    b: PhotonIntensity,
    phase: f64,
    contrast: f64,
) -> Result<(PhotonIntensity, PhotonIntensity)> {
    if !(0.0..=1.0).contains(&contrast) {
        return Err(Error::domain(format!("contrast {contrast} outside [0, 1]")));
    }
    let (i0, i1) = port_intensities(a.get(), b.get(), contrast * phase.cos());
    Ok((PhotonIntensity::new(i0)?, PhotonIntensity::new(i1)?))
}

/// `((a+b)/2 ± √(ab)·k)` with `k = contrast·cos(phase)`, clamped at zero
/// against rounding.
#[inline]
fn port_intensities(a: f64, b: f64, k: f64) -> (f64, f64) {
    let mean = 0.5 * (a + b);
    let cross = (a * b).sqrt() * k;
    ((mean + cross).max(0.0), (mean - cross).max(0.0))
}

#[inline]
fn click(arriving: f64, dark: f64) -> f64 {
    -(-arriving).exp_m1() + dark * (-arriving).exp()
}

/// Probabilities that only port 0, respectively only port 1, clicks.
#[inline]
fn one_click(i0: f64, i1: f64, dark: Probability) -> (f64, f64) {
    let d = dark.get();
    let (p0, p1) = (click(i0, d), click(i1, d));
    (p0 * (1.0 - p1), p1 * (1.0 - p0))
}

/// Gain and error rate of code mode for equal signal intensity `mu`.
/// Success is exactly one click; the error is a click on the port that is
/// dark for perfect interference.
pub fn code_mode_stats(
    params: &ChannelParams,
    mu: PhotonIntensity,
) -> Result<(Probability, Probability)> {
    params.validate()?;
    let a = mu.get() * arm_intensity_transmittance(params);
    code_mode_at(a, params.contrast(), 0.0, params.dark_per_pulse)
}

/// Code-mode gain and error rate for arriving intensity `a` per arm and a
/// residual phase error `phase_error` between the two fields.
pub(crate) fn code_mode_at(
    a: f64,
    contrast: f64,
    phase_error: f64,
    dark: Probability,
) -> Result<(Probability, Probability)> {
    let (i0, i1) = port_intensities(a, a, contrast * phase_error.cos());
    let (right, wrong) = one_click(i0, i1, dark);
    let q = right + wrong;
    if q <= 0.0 {
        return Err(Error::ErrorRateUndefined);
    }
    Ok((Probability::saturating(q), Probability::saturating(wrong / q)))
}

/// Trapezoidal rule over one period of the relative phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    pub nodes: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { nodes: 4096 }
    }
}

impl Quadrature {
    /// Phase randomization restricted to `levels` equally spaced values, as
    /// produced by a DAC of `log2(levels)` bits. Averaging over the discrete
    /// set is the same computation as the trapezoidal rule with that many
    /// nodes.
    pub fn discrete_phase(levels: usize) -> Self {
        Quadrature { nodes: levels }
    }
}

/// Decoy-mode gain for phase-randomized intensities `x` (Alice) and `y` (Bob).
pub fn decoy_yield(params: &ChannelParams, x: PhotonIntensity, y: PhotonIntensity) -> Probability {
    decoy_yield_with(params, x, y, Quadrature::default())
}

pub fn decoy_yield_with(
    params: &ChannelParams,
    x: PhotonIntensity,
    y: PhotonIntensity,
    quadrature: Quadrature,
) -> Probability {
    let eta = arm_intensity_transmittance(params);
    let (a, b) = (x.get() * eta, y.get() * eta);
    let contrast = params.contrast();
    let dark = params.dark_per_pulse;
    if a * b == 0.0 {
        // No cross term: the integrand does not depend on the phase.
        let (i0, i1) = port_intensities(a, b, 0.0);
        let (r, w) = one_click(i0, i1, dark);
        return Probability::saturating(r + w);
    }
    let n = quadrature.nodes.max(1);
    let step = TAU / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let (i0, i1) = port_intensities(a, b, contrast * (step * k as f64).cos());
        let (r, w) = one_click(i0, i1, dark);
        sum += r + w;
    }
    Probability::saturating(sum / n as f64)
}

/// Largest photon number supported by [`FockYieldOracle`].
pub const ORACLE_MAX_PHOTONS: usize = 10;

/// Fock-state yields `Y_{n,m}` of the channel model, obtained as Taylor
/// coefficients: `Q_d(x,y) = Σ P_n^x P_m^y Y_{n,m}` gives
/// `Y_{n,m} = n!·m!·[xⁿyᵐ] e^{x+y}·Q_d(x,y)`.
///
/// The phase average of the one-click probability is
/// `2(1-d)e^{-(a+b)/2}·I₀(c√(ab)) - 2(1-d)²e^{-(a+b)}` with `a = ηx`,
/// `b = ηy`, so `e^{x+y}Q_d` expands as a finite double power series whose
/// coefficients are summed directly here. The table is checked by
/// reconstructing `Q_d` at a probe point against the quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct FockYieldOracle {
    yields: [[f64; ORACLE_MAX_PHOTONS + 1]; ORACLE_MAX_PHOTONS + 1],
    pub residual: f64,
}

impl FockYieldOracle {
    pub const PROBE_INTENSITY: f64 = 0.03;
    pub const TOLERANCE: f64 = 1e-6;

    pub fn new(params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        let eta = arm_intensity_transmittance(params);
        let d = params.dark_per_pulse.get();
        let c = params.contrast();
        let alpha = 1.0 - eta / 2.0;
        let beta = 1.0 - eta;
        let bessel = (c * eta / 2.0).powi(2);

        let mut fact = [1.0f64; ORACLE_MAX_PHOTONS + 1];
        for k in 1..=ORACLE_MAX_PHOTONS {
            fact[k] = fact[k - 1] * k as f64;
        }
        let mut yields = [[0.0; ORACLE_MAX_PHOTONS + 1]; ORACLE_MAX_PHOTONS + 1];
        for n in 0..=ORACLE_MAX_PHOTONS {
            for m in 0..=ORACLE_MAX_PHOTONS {
                // n!m! Σ_k bessel^k/(k!)² · α^{n-k}/(n-k)! · α^{m-k}/(m-k)!
                let mut s = 0.0;
                for k in 0..=n.min(m) {
                    s += bessel.powi(k as i32) / (fact[k] * fact[k])
                        * alpha.powi((n + m - 2 * k) as i32)
                        * (fact[n] / fact[n - k])
                        * (fact[m] / fact[m - k]);
                }
                let b = beta.powi((n + m) as i32);
                let y = 2.0 * (1.0 - d) * ((s - b) + d * b);
                yields[n][m] = y.clamp(0.0, 1.0);
            }
        }
        let mut oracle = FockYieldOracle {
            yields,
            residual: 0.0,
        };
        let probe = PhotonIntensity::new(Self::PROBE_INTENSITY)?;
        let q = decoy_yield(params, probe, probe).get();
        let (sum, tail) = oracle.reconstruct(probe, probe);
        let excess = (sum - q).max(q - (sum + tail)).max(0.0);
        oracle.residual = if q > 0.0 { excess / q } else { excess };
        if oracle.residual > Self::TOLERANCE {
            return Err(Error::OracleUnstable {
                residual: oracle.residual,
                tolerance: Self::TOLERANCE,
            });
        }
        Ok(oracle)
    }

    pub fn yield_nm(&self, n: usize, m: usize) -> Result<Probability> {
        if n > ORACLE_MAX_PHOTONS || m > ORACLE_MAX_PHOTONS {
            return Err(Error::domain(format!(
                "oracle supports photon numbers up to {ORACLE_MAX_PHOTONS}"
            )));
        }
        Ok(Probability::saturating(self.yields[n][m]))
    }

    /// `(Σ_{n,m≤10} P_n^x P_m^y Y_{n,m}, 1 - Σ_{n,m≤10} P_n^x P_m^y)`.
    pub fn reconstruct(&self, x: PhotonIntensity, y: PhotonIntensity) -> (f64, f64) {
        let px = PoissonSeries::new(x, ORACLE_MAX_PHOTONS as u32);
        let py = PoissonSeries::new(y, ORACLE_MAX_PHOTONS as u32);
        let mut sum = 0.0;
        for (n, pn) in px.terms.iter().enumerate() {
            for (m, pm) in py.terms.iter().enumerate() {
                sum += pn * pm * self.yields[n][m];
            }
        }
        (sum, joint_tail(&px, &py))
    }
}

/// Convenience form of [`FockYieldOracle`] for a single entry.
pub fn fock_yield_oracle(params: &ChannelParams, n: usize, m: usize) -> Result<Probability> {
    FockYieldOracle::new(params)?.yield_nm(n, m)
}

/// Simulated code-mode statistics and the ten decoy gains.
pub fn simulate_scenario(
    params: &ChannelParams,
    schedule: &IntensitySchedule,
) -> Result<DecoyYields> {
    params.validate()?;
    let (q_code, e_code) = match code_mode_stats(params, schedule.mu) {
        Ok(stats) => stats,
        // Nothing detected, so nothing is in error either.
        Err(Error::ErrorRateUndefined) => (Probability::ZERO, Probability::ZERO),
        Err(e) => return Err(e),
    };
    let mut q_decoy = BTreeMap::new();
    for pair in DATA_PAIRS {
        let q = decoy_yield(params, schedule.get(pair.0), schedule.get(pair.1));
        q_decoy.insert(pair, q);
    }
    Ok(DecoyYields {
        q_code,
        e_code,
        q_decoy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pi(x: f64) -> PhotonIntensity {
        PhotonIntensity::new(x).unwrap()
    }

    #[test]
    fn device_efficiency_matches_station_loss() {
        let from_db = 10f64.powf(-DEVICE_LOSS_DB / 10.0);
        assert!((from_db / ChannelParams::default().device_efficiency - 1.0).abs() < 0.005);
    }

    #[test]
    fn arm_transmittance_examples() {
        let p = ChannelParams::at_distance(100.0);
        assert!((arm_intensity_transmittance(&p) - 0.03840).abs() < 1e-4);
        let lossless = ChannelParams {
            device_efficiency: 1.0,
            ..ChannelParams::at_distance(0.0)
        };
        assert_eq!(arm_intensity_transmittance(&lossless), 1.0);
        let p = ChannelParams::at_distance(300.0);
        assert!((arm_intensity_transmittance(&p) - 10f64.powf(-2.7) * 0.305).abs() < 1e-12);
        assert!((arm_intensity_transmittance(&p) - 6.085e-4).abs() < 1e-6);
    }

    #[test]
    fn interference_examples() {
        let (i0, i1) = interference_intensities(pi(1.0), pi(1.0), 0.0, 1.0).unwrap();
        assert_eq!((i0.get(), i1.get()), (2.0, 0.0));
        let (i0, i1) =
            interference_intensities(pi(1.0), pi(1.0), std::f64::consts::FRAC_PI_2, 1.0).unwrap();
        assert_relative_eq!(i0.get(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(i1.get(), 1.0, epsilon = 1e-15);
        let (i0, i1) = interference_intensities(pi(9.98e-4), pi(9.98e-4), 0.0, 0.94).unwrap();
        assert_relative_eq!(i0.get(), 1.936e-3, max_relative = 1e-3);
        assert_relative_eq!(i1.get(), 5.99e-5, max_relative = 1e-3);
        assert!(interference_intensities(pi(1.0), pi(1.0), 0.0, 1.1).is_err());
    }

    #[test]
    fn code_mode_examples() {
        let p = ChannelParams::at_distance(100.0);
        let (q, e) = code_mode_stats(&p, pi(0.026)).unwrap();
        assert!((q.get() / 2.02e-3 - 1.0).abs() < 0.35);
        assert!((e.get() - 0.030).abs() < 0.005);

        let p = ChannelParams::at_distance(300.0);
        let (q, e) = code_mode_stats(&p, pi(0.016)).unwrap();
        assert!((q.get() / 1.95e-5 - 1.0).abs() < 0.35);
        assert!((e.get() - 0.040).abs() < 0.01);

        let dark_free = ChannelParams {
            dark_per_pulse: Probability::ZERO,
            ..ChannelParams::at_distance(50.0)
        };
        assert_eq!(
            code_mode_stats(&dark_free, pi(0.0)),
            Err(Error::ErrorRateUndefined)
        );
    }

    #[test]
    fn weak_signal_error_tends_to_misalignment() {
        let p = ChannelParams {
            dark_per_pulse: Probability::ZERO,
            ..ChannelParams::at_distance(100.0)
        };
        let (_, e) = code_mode_stats(&p, pi(1e-9)).unwrap();
        assert!((e.get() - p.misalignment).abs() < 1e-6);
    }

    #[test]
    fn decoy_yield_examples() {
        let p = ChannelParams::at_distance(100.0);
        let q = decoy_yield(&p, pi(0.026), pi(0.026)).get();
        assert!((q / 2.02e-3 - 1.0).abs() < 0.35);
        let p = ChannelParams::at_distance(300.0);
        let q = decoy_yield(&p, pi(5e-5), pi(5e-5)).get();
        assert!((q / 2.55e-7 - 1.0).abs() < 0.35);
        let dark_free = ChannelParams {
            dark_per_pulse: Probability::ZERO,
            ..ChannelParams::at_distance(10.0)
        };
        assert_eq!(decoy_yield(&dark_free, pi(0.0), pi(0.0)).get(), 0.0);
    }

    #[test]
    fn dark_floor_is_exact() {
        let p = ChannelParams::at_distance(200.0);
        let d = p.dark_per_pulse.get();
        assert_eq!(decoy_yield(&p, pi(0.0), pi(0.0)).get(), 2.0 * d * (1.0 - d));
    }

    #[test]
    fn ten_bit_phase_randomization_is_indistinguishable() {
        for &l in &[100.0, 200.0, 300.0] {
            let p = ChannelParams::at_distance(l);
            for &(x, y) in &[(0.026, 0.026), (0.005, 8e-5), (0.016, 0.002)] {
                let cont = decoy_yield(&p, pi(x), pi(y)).get();
                let disc = decoy_yield_with(&p, pi(x), pi(y), Quadrature::discrete_phase(1024)).get();
                assert!(((disc - cont) / cont).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let dark_free = ChannelParams {
            dark_per_pulse: Probability::ZERO,
            ..ChannelParams::at_distance(100.0)
        };
        assert_eq!(fock_yield_oracle(&dark_free, 0, 0).unwrap().get(), 0.0);
        let p = ChannelParams::at_distance(100.0);
        let y00 = fock_yield_oracle(&p, 0, 0).unwrap().get();
        assert!((y00 / 2e-7 - 1.0).abs() < 0.05);
        // A single photon clicks exactly one detector with probability η.
        let d = dark_free;
        let y10 = fock_yield_oracle(&d, 1, 0).unwrap().get();
        assert_relative_eq!(y10, arm_intensity_transmittance(&d), max_relative = 1e-12);
        assert!(fock_yield_oracle(&p, 11, 0).is_err());
    }

    #[test]
    fn simulate_vacuum_schedule() {
        let p = ChannelParams {
            dark_per_pulse: Probability::ZERO,
            ..ChannelParams::at_distance(100.0)
        };
        let y = simulate_scenario(&p, &IntensitySchedule::vacuum()).unwrap();
        assert_eq!(y.q_code.get(), 0.0);
        assert!(y.q_decoy.values().all(|q| q.get() == 0.0));
        assert_eq!(y.q_decoy.len(), 10);
    }

    #[test]
    fn schedule_validation() {
        assert!(IntensitySchedule::new(0.026, 0.005, 0.002, 8e-5).is_ok());
        assert!(IntensitySchedule::new(0.004, 0.005, 0.002, 8e-5).is_err());
        let s = IntensitySchedule::with_default_nu3(0.02, 0.005, 0.002).unwrap();
        assert_relative_eq!(s.nu3.get(), 0.02 * 10f64.powf(-2.5), max_relative = 1e-15);
    }
}
