//! Secret key rate `R = Q_μμ(1 − f·h₂(e) − I_AE^u)` per pulse pair, the
//! repeaterless linear bound `−log₂(1 − η)`, transmittance bookkeeping,
//! signal-intensity optimization and rate-distance sweeps.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::channel::{simulate_scenario, ChannelParams, DecoyYields, IntensitySchedule, DEVICE_LOSS_DB};
use crate::decoy::{build_lp, yield_bounds_with_policy, CombinationReading, RelaxPolicy, DEFAULT_CUTOFF};
use crate::error::{Error, Result};
use crate::leakage::{leakage_upper_bound, LeakageBackend, LeakageInputs};
use crate::photonics::{binary_entropy, Probability};

pub const DEFAULT_EC_EFFICIENCY: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateInputs {
    pub q_code: Probability,
    pub e_code: Probability,
    pub leakage: f64,
    pub ec_efficiency: f64,
}

impl KeyRateInputs {
    pub fn new(q_code: Probability, e_code: Probability, leakage: f64) -> Self {
        KeyRateInputs {
            q_code,
            e_code,
            leakage,
            ec_efficiency: DEFAULT_EC_EFFICIENCY,
        }
    }
}

/// `Q(1 − f·h₂(e) − I)`, possibly negative.
pub fn raw_key_rate(inputs: &KeyRateInputs) -> f64 {
    inputs.q_code.get()
        * (1.0 - inputs.ec_efficiency * binary_entropy(inputs.e_code) - inputs.leakage)
}

pub fn secret_key_rate(inputs: &KeyRateInputs) -> f64 {
    raw_key_rate(inputs).max(0.0)
}

/// `−log₂(1 − η)`; infinite at `η = 1`.
pub fn linear_bound(total_transmittance: f64) -> Result<f64> {
    let eta = total_transmittance;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("transmittance {eta} outside (0, 1]")));
    }
    if eta == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-(-eta).ln_1p() / LN_2)
}

/// `10^{−loss/10}`.
pub fn transmittance_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Fibre loss plus the measurement-station loss.
pub fn total_loss_db(fibre_loss_db: f64) -> f64 {
    fibre_loss_db + DEVICE_LOSS_DB
}

/// `10^{−α·l/10}·η_D`.
pub fn total_transmittance(params: &ChannelParams) -> f64 {
    transmittance_from_loss_db(params.loss_coeff_db_per_km * params.fibre_length_km)
        * params.device_efficiency
}

/// Fibre length with the same loss as `measured_loss_db`.
pub fn equivalent_distance(measured_loss_db: f64, loss_coeff: f64) -> Result<f64> {
    if !(measured_loss_db > 0.0 && loss_coeff > 0.0) {
        return Err(Error::domain("loss and loss coefficient must be positive"));
    }
    Ok(measured_loss_db / loss_coeff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    pub distance_km: f64,
    pub loss_db: f64,
    pub inputs: KeyRateInputs,
    pub rate: f64,
    /// Before clamping at zero.
    pub raw_rate: f64,
    pub linear_bound: f64,
    pub beats_bound: bool,
    pub leakage_provenance: String,
    /// Relative widening of the decoy data rows that was applied.
    pub relaxation: f64,
    pub combination_lower: f64,
}

/// Settings shared by every point of an analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub cutoff: u32,
    pub reading: CombinationReading,
    pub relax: RelaxPolicy,
    pub ec_efficiency: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            cutoff: DEFAULT_CUTOFF,
            reading: CombinationReading::Corrected,
            relax: RelaxPolicy::Auto,
            ec_efficiency: DEFAULT_EC_EFFICIENCY,
        }
    }
}

/// A scenario ready for analysis: decoy data plus the channel loss that sets
/// the linear bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub distance_km: f64,
    /// Total Alice-to-Bob loss including the measurement station.
    pub loss_db: f64,
    pub schedule: IntensitySchedule,
    pub yields: DecoyYields,
}

/// LP bounds, leakage, key rate and linear bound for one scenario.
pub fn analyze(
    scenario: &Scenario,
    backend: &dyn LeakageBackend,
    options: &PipelineOptions,
) -> Result<KeyRateReport> {
    let lp = build_lp(&scenario.yields, &scenario.schedule, options.cutoff)?;
    let bounds = yield_bounds_with_policy(&lp, options.reading, options.relax)?;
    let (relaxation, combination_lower) = (bounds.relaxation, bounds.combination_lower.get());
    let q_code = scenario.yields.q_code;
    let leakage = if q_code.get() > 0.0 {
        leakage_upper_bound(
            backend,
            &LeakageInputs {
                q_code,
                e_code: scenario.yields.e_code,
                bounds,
                schedule: scenario.schedule,
                scenario_km: Some(scenario.distance_km),
            },
        )?
    } else {
        // Nothing detected: the rate is zero whatever the leakage.
        1.0
    };
    let inputs = KeyRateInputs {
        q_code,
        e_code: scenario.yields.e_code,
        leakage,
        ec_efficiency: options.ec_efficiency,
    };
    let raw_rate = raw_key_rate(&inputs);
    let rate = raw_rate.max(0.0);
    let lb = linear_bound(transmittance_from_loss_db(scenario.loss_db))?;
    Ok(KeyRateReport {
        distance_km: scenario.distance_km,
        loss_db: scenario.loss_db,
        inputs,
        rate,
        raw_rate,
        linear_bound: lb,
        beats_bound: rate > lb,
        leakage_provenance: backend.provenance(),
        relaxation,
        combination_lower,
    })
}

/// Forward-simulated scenario at the params' fibre length.
pub fn simulated_scenario(params: &ChannelParams, schedule: &IntensitySchedule) -> Result<Scenario> {
    let yields = simulate_scenario(params, schedule)?;
    let loss_db = params.loss_coeff_db_per_km * params.fibre_length_km
        - 10.0 * params.device_efficiency.log10();
    Ok(Scenario {
        distance_km: params.fibre_length_km,
        loss_db,
        schedule: *schedule,
        yields,
    })
}

/// Result of the signal-intensity search.
#[derive(Debug, Clone, PartialEq)]
pub struct MuOptimum {
    pub mu: f64,
    /// Clamped rate at `mu`; zero when no intensity gives a positive rate.
    pub rate: f64,
    pub raw_rate: f64,
    pub positive: bool,
    pub schedule: IntensitySchedule,
}

pub const MU_BRACKET: (f64, f64) = (1e-4, 0.2);
const MU_GRID_POINTS: usize = 40;
const MU_TOLERANCE: f64 = 1e-4;

/// Maximizes the simulated raw rate over `μ` with `ν₃ = 10^{−2.5}μ`: a
/// logarithmic grid over [`MU_BRACKET`], then golden-section refinement to
/// `1e-4`. Intensities that cannot be ordered above `ν₁` are skipped.
pub fn optimize_mu(
    params: &ChannelParams,
    nu1: f64,
    nu2: f64,
    backend: &dyn LeakageBackend,
    options: &PipelineOptions,
) -> Result<MuOptimum> {
    params.validate()?;
    let objective = |mu: f64| -> Option<(f64, IntensitySchedule)> {
        let schedule = IntensitySchedule::with_default_nu3(mu, nu1, nu2).ok()?;
        let scenario = simulated_scenario(params, &schedule).ok()?;
        analyze(&scenario, backend, options)
            .ok()
            .map(|r| (r.raw_rate, schedule))
    };
    let (lo, hi) = MU_BRACKET;
    let ratio = (hi / lo).powf(1.0 / (MU_GRID_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..MU_GRID_POINTS).map(|k| lo * ratio.powi(k as i32)).collect();
    let values: Vec<Option<(f64, IntensitySchedule)>> = grid.par_iter().map(|&mu| objective(mu)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|(r, _)| (k, r)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Numerical("no valid intensity in the search bracket".into()))?;
    let k = best.0;
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let eval = |mu: f64| objective(mu).map_or(f64::NEG_INFINITY, |v| v.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    while b - a > MU_TOLERANCE {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        }
    }
    let mut candidates = vec![(grid[k], best.1)];
    candidates.push((c, fc));
    candidates.push((d, fd));
    let (mu, raw) = candidates
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let schedule = IntensitySchedule::with_default_nu3(mu, nu1, nu2)?;
    Ok(MuOptimum {
        mu,
        rate: raw.max(0.0),
        raw_rate: raw,
        positive: raw > 0.0,
        schedule,
    })
}

/// How each sweep point chooses its intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    Fixed(IntensitySchedule),
    Optimize { nu1: f64, nu2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub distance_km: f64,
    pub mu: Option<f64>,
    pub report: Result<KeyRateReport>,
}

/// Simulate → bound → leakage → rate at each distance, in parallel, with
/// results in input order. Failures are recorded per point.
pub fn sweep(
    template: &ChannelParams,
    distances: &[f64],
    policy: MuPolicy,
    backend: &dyn LeakageBackend,
    options: &PipelineOptions,
) -> Result<Vec<SweepPoint>> {
    if distances.is_empty() {
        return Err(Error::domain("sweep needs at least one distance"));
    }
    Ok(distances
        .par_iter()
        .map(|&km| {
            let params = template.with_length(km);
            let schedule = match policy {
                MuPolicy::Fixed(s) => Ok(s),
                MuPolicy::Optimize { nu1, nu2 } => {
                    optimize_mu(&params, nu1, nu2, backend, options).map(|o| o.schedule)
                }
            };
            let mu = schedule.as_ref().ok().map(|s| s.mu.get());
            let report = schedule.and_then(|s| {
                let scenario = simulated_scenario(&params, &s)?;
                analyze(&scenario, backend, options)
            });
            SweepPoint {
                distance_km: km,
                mu,
                report,
            }
        })
        .collect())
}

/// Where the rate first exceeds the linear bound along a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    /// First swept distance with `R > R_LB`.
    pub first_beating_km: f64,
    /// Linear interpolation of `log(R / R_LB)` between that point and the
    /// previous successful one, when the latter does not beat the bound.
    pub interpolated_km: Option<f64>,
}

pub fn crossover(points: &[SweepPoint]) -> Option<Crossover> {
    let ok: Vec<&KeyRateReport> = points.iter().filter_map(|p| p.report.as_ref().ok()).collect();
    let k = ok.iter().position(|r| r.beats_bound)?;
    let here = ok[k];
    let interpolated_km = (k > 0).then(|| ok[k - 1]).and_then(|prev| {
        if prev.rate <= 0.0 {
            return None;
        }
        let f0 = (prev.rate / prev.linear_bound).ln();
        let f1 = (here.rate / here.linear_bound).ln();
        (f1 > f0).then(|| {
            prev.distance_km + (here.distance_km - prev.distance_km) * (-f0) / (f1 - f0)
        })
    });
    Some(Crossover {
        first_beating_km: here.distance_km,
        interpolated_km,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    #[test]
    fn key_rate_examples() {
        let r = secret_key_rate(&KeyRateInputs::new(pr(2.02e-3), pr(0.0186), 0.4074));
        assert!((r / 8.87e-4 - 1.0).abs() < 5e-3, "{r}");
        let r = secret_key_rate(&KeyRateInputs::new(pr(2.11e-5), pr(0.0359), 0.4372));
        assert!((r / 6.46e-6 - 1.0).abs() < 5e-3, "{r}");
        assert_eq!(secret_key_rate(&KeyRateInputs::new(pr(0.3), pr(0.1), 1.0)), 0.0);
        assert!(raw_key_rate(&KeyRateInputs::new(pr(0.3), pr(0.1), 1.0)) < 0.0);
    }

    #[test]
    fn linear_bound_examples() {
        let lb = linear_bound(transmittance_from_loss_db(23.06)).unwrap();
        assert!((lb / 7.15e-3 - 1.0).abs() < 0.01, "{lb}");
        let lb = linear_bound(transmittance_from_loss_db(58.46)).unwrap();
        assert!((lb / 2.06e-6 - 1.0).abs() < 0.01, "{lb}");
        let eta = 1e-9;
        assert!((linear_bound(eta).unwrap() / eta * LN_2 - 1.0).abs() < 1e-6);
        assert_eq!(linear_bound(1.0).unwrap(), f64::INFINITY);
        assert!(linear_bound(0.0).is_err());
        assert!(linear_bound(1.5).is_err());
    }

    #[test]
    fn transmittance_examples() {
        let p = ChannelParams::at_distance(300.0);
        assert!((total_transmittance(&p) - 1.214e-6).abs() < 1e-9);
        let p = ChannelParams::at_distance(100.0);
        assert!((total_transmittance(&p) - 4.834e-3).abs() < 1e-6);
        let p = ChannelParams {
            device_efficiency: 1.0,
            ..ChannelParams::at_distance(0.0)
        };
        assert_eq!(total_transmittance(&p), 1.0);
    }

    #[test]
    fn equivalent_distance_examples() {
        assert!((equivalent_distance(53.3, 0.18).unwrap() - 296.1).abs() < 0.5);
        assert!((equivalent_distance(17.9, 0.18).unwrap() - 99.44).abs() < 0.01);
        assert_eq!(equivalent_distance(0.18, 0.18).unwrap(), 1.0);
        assert!(equivalent_distance(0.0, 0.18).is_err());
    }
}
