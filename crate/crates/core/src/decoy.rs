//! Linear-programming bounds on the Fock-state yields `Y_{n,m}` from observed
//! decoy gains.
//!
//! Every gain satisfies `Q^{xy} = Σ P_n^x P_m^y Y_{n,m}` with all yields in
//! `[0, 1]`. Truncating at `n, m ≤ N` turns this into the two-sided row
//! `Q − tail ≤ Σ_{n,m≤N} P_n^x P_m^y Y_{n,m} ≤ Q`, with `tail` the exact
//! Poisson mass outside the square, so the bounds stay rigorous.

use rayon::prelude::*;

use crate::channel::{DecoyYields, IntensityPair, IntensitySchedule, DATA_PAIRS};
use crate::error::{Error, Result};
use crate::photonics::{joint_tail, PhotonIntensity, PoissonSeries, Probability};
use crate::simplex::{LinearProgram, Sense, Solution};

pub const DEFAULT_CUTOFF: u32 = 10;

/// Relative width given to every recorded gain. Gains arrive as `f64`
/// values, and an exact solver otherwise rejects data that are consistent
/// only up to their last bits.
pub const DATA_PRECISION: f64 = 1e-14;

/// Yields bounded individually for the leakage analysis.
pub const TARGETS: [(u32, u32); 6] = [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Lower,
    Upper,
}

/// How to read the six-term combination whose lower bound enters the
/// leakage analysis. `Literal` weights `Y_{2,0}` twice and omits `Y_{0,2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombinationReading {
    #[default]
    Corrected,
    Literal,
}

impl std::str::FromStr for CombinationReading {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(CombinationReading::Corrected),
            "literal" => Ok(CombinationReading::Literal),
            _ => Err(Error::Configuration(format!(
                "combination reading must be 'corrected' or 'literal', got '{s}'"
            ))),
        }
    }
}

/// What to do when measured data admit no yield vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RelaxPolicy {
    /// Report infeasibility.
    Off,
    /// Widen every data row by the minimal relative slack that restores
    /// feasibility, plus a small margin.
    #[default]
    Auto,
    /// Always widen by this relative amount.
    Fixed(f64),
}

impl std::str::FromStr for RelaxPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(RelaxPolicy::Off),
            "auto" => Ok(RelaxPolicy::Auto),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|e| *e >= 0.0 && e.is_finite())
                .map(RelaxPolicy::Fixed)
                .ok_or_else(|| {
                    Error::Configuration(format!(
                        "relaxation must be 'off', 'auto' or a non-negative number, got '{s}'"
                    ))
                }),
        }
    }
}

/// One observed gain and the Poisson coefficients of its data row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRow {
    pub pair: IntensityPair,
    pub gain: f64,
    pub tail: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cutoff: u32,
    pub schedule: IntensitySchedule,
    pub rows: Vec<DataRow>,
    /// Relative widening applied to every data row.
    pub relaxation: f64,
}

impl LpProblem {
    /// Problem using only the listed pairs; used to compare constraint sets.
    pub fn from_pairs(
        yields: &DecoyYields,
        schedule: &IntensitySchedule,
        cutoff: u32,
        pairs: &[IntensityPair],
    ) -> Result<Self> {
        if cutoff < 3 {
            return Err(Error::domain(format!("photon-number cutoff {cutoff} below 3")));
        }
        let missing: Vec<String> = pairs
            .iter()
            .filter(|p| yields.get(**p).is_none())
            .map(|p| p.label())
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteData(missing));
        }
        let rows = pairs
            .iter()
            .map(|&pair| {
                let px = PoissonSeries::new(schedule.get(pair.0), cutoff);
                let py = PoissonSeries::new(schedule.get(pair.1), cutoff);
                let mut coeffs = Vec::with_capacity(px.terms.len() * py.terms.len());
                for pn in &px.terms {
                    for pm in &py.terms {
                        coeffs.push(pn * pm);
                    }
                }
                DataRow {
                    pair,
                    gain: yields.get(pair).expect("checked above").get(),
                    tail: joint_tail(&px, &py),
                    coeffs,
                }
            })
            .collect();
        Ok(LpProblem {
            cutoff,
            schedule: *schedule,
            rows,
            relaxation: 0.0,
        })
    }

    pub fn variables(&self) -> usize {
        let k = self.cutoff as usize + 1;
        k * k
    }

    /// Each pair contributes an upper and a lower data constraint.
    pub fn data_constraints(&self) -> usize {
        2 * self.rows.len()
    }

    pub fn index(&self, n: u32, m: u32) -> usize {
        (n * (self.cutoff + 1) + m) as usize
    }

    pub fn relaxed(&self, relative_slack: f64) -> Self {
        LpProblem {
            relaxation: relative_slack,
            ..self.clone()
        }
    }

    /// The program with a zero objective and `0 ≤ Y ≤ 1`.
    pub fn program(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.variables());
        lp.col_hi = vec![1.0; self.variables()];
        let eps = self.relaxation + DATA_PRECISION;
        for row in &self.rows {
            lp.add_row(
                row.pair.label(),
                row.coeffs.clone(),
                row.gain * (1.0 - eps) - row.tail,
                row.gain * (1.0 + eps),
            );
        }
        lp
    }

    /// Optimizes `objective · Y` and returns the full simplex solution with
    /// its certificate. Infeasibility is reported with the minimal relative
    /// slack that would restore feasibility.
    pub fn optimize(&self, objective: &[f64], direction: Direction) -> Result<Solution> {
        let mut lp = self.program();
        lp.objective = objective.to_vec();
        let sense = match direction {
            Direction::Lower => Sense::Minimize,
            Direction::Upper => Sense::Maximize,
        };
        match lp.solve(sense) {
            Err(Error::Infeasible { constraint, .. }) => Err(Error::Infeasible {
                constraint,
                min_relative_slack: self.min_relative_slack().ok(),
            }),
            other => other,
        }
    }

    /// Smallest `ε ≥ 0` such that `Q(1−ε) − tail ≤ Σ P P Y ≤ Q(1+ε)` is
    /// feasible for every row, on top of any relaxation already applied and
    /// of [`DATA_PRECISION`].
    pub fn min_relative_slack(&self) -> Result<f64> {
        let nv = self.variables();
        let mut lp = LinearProgram::new(nv + 1);
        for j in 0..nv {
            lp.col_hi[j] = 1.0;
        }
        lp.objective[nv] = 1.0;
        let eps = self.relaxation + DATA_PRECISION;
        for row in &self.rows {
            let mut lower = row.coeffs.clone();
            lower.push(row.gain);
            lp.add_row(
                format!("{} lower", row.pair),
                lower,
                row.gain * (1.0 - eps) - row.tail,
                f64::INFINITY,
            );
            let mut upper = row.coeffs.clone();
            upper.push(-row.gain);
            lp.add_row(
                format!("{} upper", row.pair),
                upper,
                f64::NEG_INFINITY,
                row.gain * (1.0 + eps),
            );
        }
        Ok(lp.minimize()?.objective.max(0.0))
    }
}

/// LP over the ten recorded pairs.
pub fn build_lp(
    yields: &DecoyYields,
    schedule: &IntensitySchedule,
    cutoff: u32,
) -> Result<LpProblem> {
    LpProblem::from_pairs(yields, schedule, cutoff, &DATA_PAIRS)
}

/// Minimum or maximum of `Y_{n,m}` over the feasible set.
pub fn bound_yield(lp: &LpProblem, n: u32, m: u32, direction: Direction) -> Result<Probability> {
    if n > lp.cutoff || m > lp.cutoff {
        return Err(Error::domain(format!(
            "Y_({n},{m}) outside the cutoff {}",
            lp.cutoff
        )));
    }
    let mut c = vec![0.0; lp.variables()];
    c[lp.index(n, m)] = 1.0;
    Ok(Probability::saturating(lp.optimize(&c, direction)?.objective))
}

/// Weights of the six-term combination in `Y` index order.
pub fn combination_weights(
    lp: &LpProblem,
    mu: PhotonIntensity,
    reading: CombinationReading,
) -> Vec<f64> {
    let p = PoissonSeries::new(mu, 2).terms;
    let mut c = vec![0.0; lp.variables()];
    let second = match reading {
        CombinationReading::Corrected => (0, 2),
        CombinationReading::Literal => (2, 0),
    };
    for (n, m) in [(0, 0), (0, 1), (1, 0), (2, 0), second, (1, 1)] {
        c[lp.index(n, m)] += p[n as usize] * p[m as usize];
    }
    c
}

/// Lower bound of `P₀P₀Y₀₀ + P₀P₁Y₀₁ + P₁P₀Y₁₀ + P₂P₀Y₂₀ + P₀P₂Y₀₂ + P₁P₁Y₁₁`
/// with Poisson weights at `mu`, minimized jointly.
pub fn bound_combination(
    lp: &LpProblem,
    mu: PhotonIntensity,
    reading: CombinationReading,
) -> Result<Probability> {
    let c = combination_weights(lp, mu, reading);
    Ok(Probability::saturating(lp.optimize(&c, Direction::Lower)?.objective))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldInterval {
    pub lower: Probability,
    pub upper: Probability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YieldBounds {
    /// In the order of [`TARGETS`].
    pub intervals: [YieldInterval; 6],
    pub combination_lower: Probability,
    /// Relative widening of the data rows that was needed, if any.
    pub relaxation: f64,
}

impl YieldBounds {
    pub fn get(&self, n: u32, m: u32) -> Option<YieldInterval> {
        TARGETS
            .iter()
            .position(|&t| t == (n, m))
            .map(|i| self.intervals[i])
    }

    pub fn lower(&self, n: u32, m: u32) -> f64 {
        self.get(n, m).map_or(0.0, |b| b.lower.get())
    }

    pub fn upper(&self, n: u32, m: u32) -> f64 {
        self.get(n, m).map_or(1.0, |b| b.upper.get())
    }
}

/// All six intervals and the combination bound. The thirteen programs are
/// independent and solved in parallel.
pub fn yield_bounds(lp: &LpProblem, reading: CombinationReading) -> Result<YieldBounds> {
    let jobs: Vec<Option<((u32, u32), Direction)>> = TARGETS
        .iter()
        .flat_map(|&t| [Some((t, Direction::Lower)), Some((t, Direction::Upper))])
        .chain(std::iter::once(None))
        .collect();
    let values: Vec<Result<Probability>> = jobs
        .par_iter()
        .map(|job| match job {
            Some(((n, m), dir)) => bound_yield(lp, *n, *m, *dir),
            None => bound_combination(lp, lp.schedule.mu, reading),
        })
        .collect();
    let mut values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let combination_lower = values.pop().expect("combination job");
    let mut intervals = [YieldInterval {
        lower: Probability::ZERO,
        upper: Probability::ONE,
    }; 6];
    for (k, iv) in intervals.iter_mut().enumerate() {
        let (lower, upper) = (values[2 * k], values[2 * k + 1]);
        if lower.get() > upper.get() + 1e-12 {
            return Err(Error::Numerical(format!(
                "bounds for Y{:?} out of order: {} > {}",
                TARGETS[k],
                lower.get(),
                upper.get()
            )));
        }
        *iv = YieldInterval {
            lower: if lower > upper { upper } else { lower },
            upper,
        };
    }
    Ok(YieldBounds {
        intervals,
        combination_lower,
        relaxation: lp.relaxation,
    })
}

/// [`yield_bounds`] under a relaxation policy. With [`RelaxPolicy::Auto`],
/// infeasible data are widened by the minimal slack times `1 + 1e-6`.
pub fn yield_bounds_with_policy(
    lp: &LpProblem,
    reading: CombinationReading,
    policy: RelaxPolicy,
) -> Result<YieldBounds> {
    match policy {
        RelaxPolicy::Off => yield_bounds(lp, reading),
        RelaxPolicy::Fixed(eps) => yield_bounds(&lp.relaxed(eps), reading),
        RelaxPolicy::Auto => match yield_bounds(lp, reading) {
            Err(Error::Infeasible {
                constraint,
                min_relative_slack: Some(eps),
            }) => {
                let eps = eps * (1.0 + 1e-6) + 1e-15;
                log::warn!(
                    "decoy data infeasible at {constraint}; widening all rows by relative {eps:.4e}"
                );
                yield_bounds(&lp.relaxed(lp.relaxation + eps), reading)
            }
            other => other,
        },
    }
}
