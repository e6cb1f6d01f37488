//! Upper bound `I_AE^u` on the information an eavesdropper holds per sifted
//! code-mode bit:
//!
//! `I_AE^u = max_x h(x00/Q, x10/Q) + h(x11/Q, x01/Q)`
//!
//! over non-negative `x` constrained by the decoy yield bounds. The binding
//! constraints are supplied by a [`ConstraintProvider`]; a
//! [`CalibrationBackend`] bypasses the optimization with per-distance values.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::IntensitySchedule;
use crate::decoy::YieldBounds;
use crate::error::{Error, Result};
use crate::photonics::{binary_entropy, poisson_tail, poisson_term, Probability};
use crate::simplex::LinearProgram;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeakageVariables {
    pub x00: f64,
    pub x10: f64,
    pub x11: f64,
    pub x01: f64,
}

impl LeakageVariables {
    pub fn to_array(self) -> [f64; 4] {
        [self.x00, self.x10, self.x11, self.x01]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        LeakageVariables {
            x00: a[0],
            x10: a[1],
            x11: a[2],
            x01: a[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageInputs {
    pub q_code: Probability,
    pub e_code: Probability,
    pub bounds: YieldBounds,
    pub schedule: IntensitySchedule,
    /// Total fibre length of the scenario, used to look up calibration anchors.
    pub scenario_km: Option<f64>,
}

/// The two-argument entropy `h(a, b)` of the leakage objective.
#[derive(Clone, Copy)]
pub struct BivariateEntropyForm {
    pub name: &'static str,
    pub evaluator: fn(f64, f64) -> f64,
    /// Partial derivatives, where they exist.
    pub gradient: fn(f64, f64) -> Option<(f64, f64)>,
}

impl fmt::Debug for BivariateEntropyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BivariateEntropyForm")
            .field("name", &self.name)
            .finish()
    }
}

impl BivariateEntropyForm {
    /// `h(a, b) = (a + b) · h₂(a / (a + b))`: the Holevo information of a sign
    /// encoded between two orthogonal components of weights `a` and `b`,
    /// scaled by the weight of the pair. Concave, symmetric, `h(0, 0) = 0`.
    pub fn grouped_binary() -> Self {
        BivariateEntropyForm {
            name: "grouped-binary",
            evaluator: grouped_binary,
            gradient: grouped_binary_gradient,
        }
    }

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        (self.evaluator)(a, b)
    }
}

fn grouped_binary(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s <= 0.0 {
        return 0.0;
    }
    s * binary_entropy(Probability::saturating(a / s))
}

fn grouped_binary_gradient(a: f64, b: f64) -> Option<(f64, f64)> {
    if a <= 0.0 || b <= 0.0 {
        return None;
    }
    let s = a + b;
    Some(((s / a).log2(), (s / b).log2()))
}

/// `coeffs · x ≤ rhs` over `(x00, x10, x11, x01)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: [f64; 4],
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn upper(index: usize, value: f64) -> Self {
        let mut coeffs = [0.0; 4];
        coeffs[index] = 1.0;
        LinearConstraint { coeffs, rhs: value }
    }

    fn eval(&self, x: &[f64; 4]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

pub trait ConstraintProvider: Send + Sync {
    fn provenance(&self) -> String;

    /// Constraints on the unnormalized `x`, in addition to `x ≥ 0`.
    fn constraints(&self, inputs: &LeakageInputs) -> Result<Vec<LinearConstraint>>;
}

/// `x00 + x10 + x11 + x01 ≤ Q_μμ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexSumProvider;

impl ConstraintProvider for SimplexSumProvider {
    fn provenance(&self) -> String {
        "simplex-sum: x00+x10+x11+x01 <= Q".into()
    }

    fn constraints(&self, inputs: &LeakageInputs) -> Result<Vec<LinearConstraint>> {
        Ok(vec![LinearConstraint {
            coeffs: [1.0; 4],
            rhs: inputs.q_code.get(),
        }])
    }
}

/// A fixed list of constraints, independent of the inputs.
#[derive(Debug, Clone)]
pub struct ExplicitProvider {
    pub label: String,
    pub constraints: Vec<LinearConstraint>,
}

impl ConstraintProvider for ExplicitProvider {
    fn provenance(&self) -> String {
        format!("explicit: {}", self.label)
    }

    fn constraints(&self, _inputs: &LeakageInputs) -> Result<Vec<LinearConstraint>> {
        Ok(self.constraints.clone())
    }
}

/// Bounds each `x` by the detection probability of one photon-number parity
/// sector of the code-mode state `|±√μ⟩|±√μ⟩`.
///
/// Sector `(a, b)` collects the Fock components with Alice's photon number
/// of parity `a` and Bob's of parity `b`; `x00` is even/even, `x10`
/// odd/even, `x01` even/odd and `x11` odd/odd. Since a detection operator is
/// a contraction, the triangle inequality gives
/// `x_ab ≤ (Σ_{(n,m) ∈ targets} √(P_n P_m Y^u_{n,m}) + √(remaining mass))²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParitySectorProvider;

/// Photon numbers summed per party when computing sector masses.
const SECTOR_SUM_LIMIT: u32 = 60;

impl ParitySectorProvider {
    /// Upper bounds on `(x00, x10, x11, x01)`.
    pub fn sector_bounds(inputs: &LeakageInputs) -> [f64; 4] {
        let mu = inputs.schedule.mu;
        let p: Vec<f64> = (0..=SECTOR_SUM_LIMIT)
            .map(|n| poisson_term(n, mu.get()))
            .collect();
        let tail = poisson_tail(SECTOR_SUM_LIMIT, mu);
        let joint_tail = 2.0 * tail;
        let sectors = [(0u32, 0u32), (1, 0), (1, 1), (0, 1)];
        sectors.map(|(a, b)| {
            let mut known = 0.0;
            let mut rest = joint_tail;
            for n in (a..=SECTOR_SUM_LIMIT).step_by(2) {
                for m in (b..=SECTOR_SUM_LIMIT).step_by(2) {
                    let w = p[n as usize] * p[m as usize];
                    match inputs.bounds.get(n, m) {
                        Some(interval) => known += (w * interval.upper.get()).sqrt(),
                        None => rest += w,
                    }
                }
            }
            let root = known + rest.sqrt();
            root * root
        })
    }
}

impl ConstraintProvider for ParitySectorProvider {
    fn provenance(&self) -> String {
        "parity-sector: triangle-inequality sector bounds from LP yield upper bounds".into()
    }

    fn constraints(&self, inputs: &LeakageInputs) -> Result<Vec<LinearConstraint>> {
        Ok(Self::sector_bounds(inputs)
            .iter()
            .enumerate()
            .map(|(i, &u)| LinearConstraint::upper(i, u))
            .collect())
    }
}

pub trait LeakageBackend: Send + Sync {
    fn provenance(&self) -> String;

    /// `I_AE^u` before clamping.
    fn evaluate(&self, inputs: &LeakageInputs) -> Result<f64>;
}

/// `I_AE^u` clamped to `[0, 1]`. Values outside the range are logged as
/// provider defects.
pub fn leakage_upper_bound(backend: &dyn LeakageBackend, inputs: &LeakageInputs) -> Result<f64> {
    if inputs.q_code.get() <= 0.0 {
        return Err(Error::domain("leakage requires a positive code-mode gain"));
    }
    let raw = backend.evaluate(inputs)?;
    if !raw.is_finite() {
        return Err(Error::Numerical(format!("leakage evaluated to {raw}")));
    }
    if !(-1e-12..=1.0 + 1e-12).contains(&raw) {
        log::warn!(
            "leakage {raw} outside [0, 1] from {}; clamping",
            backend.provenance()
        );
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// `I = 1 − f·h₂(e) − R/Q`, the leakage that makes a published key rate
/// consistent with its gain and error rate.
pub fn invert_key_rate(q_code: f64, e_code: Probability, rate: f64, ec_efficiency: f64) -> f64 {
    1.0 - ec_efficiency * binary_entropy(e_code) - rate / q_code
}

/// Per-distance leakage values, returned only for exactly matching scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBackend {
    anchors: Vec<(f64, f64)>,
}

/// Distances closer than this are the same scenario.
const ANCHOR_MATCH_KM: f64 = 1e-6;

impl CalibrationBackend {
    pub fn new(anchors: &BTreeMap<u64, f64>) -> Result<Self> {
        Self::from_pairs(anchors.iter().map(|(&k, &v)| (k as f64, v)))
    }

    pub fn from_pairs(anchors: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut anchors: Vec<(f64, f64)> = anchors.into_iter().collect();
        if anchors.is_empty() {
            return Err(Error::Configuration(
                "calibration backend needs at least one anchor".into(),
            ));
        }
        for &(km, value) in &anchors {
            if !km.is_finite() || km < 0.0 || !value.is_finite() {
                return Err(Error::Configuration(format!(
                    "invalid calibration anchor {km} km -> {value}"
                )));
            }
        }
        anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(CalibrationBackend { anchors })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn lookup(&self, km: f64) -> Option<f64> {
        self.anchors
            .iter()
            .find(|a| (a.0 - km).abs() <= ANCHOR_MATCH_KM)
            .map(|a| a.1)
    }
}

pub fn calibration_backend(anchors: impl IntoIterator<Item = (f64, f64)>) -> Result<CalibrationBackend> {
    CalibrationBackend::from_pairs(anchors)
}

impl LeakageBackend for CalibrationBackend {
    fn provenance(&self) -> String {
        let km: Vec<String> = self.anchors.iter().map(|a| format!("{}", a.0)).collect();
        format!("calibration anchors at {} km", km.join("/"))
    }

    fn evaluate(&self, inputs: &LeakageInputs) -> Result<f64> {
        let km = inputs.scenario_km.ok_or_else(|| {
            Error::Configuration("calibration backend needs a scenario distance".into())
        })?;
        self.lookup(km).ok_or_else(|| {
            Error::Configuration(format!("no calibration anchor for {km} km"))
        })
    }
}

/// Deterministic global maximization of the entropy form over the provider's
/// polytope (normalized by `Q_μμ`): all vertices are enumerated, then
/// Frank-Wolfe ascent runs from 64 seeded starts.
pub struct AnalyticBackend {
    provider: Box<dyn ConstraintProvider>,
    form: BivariateEntropyForm,
    starts: usize,
    seed: u64,
}

impl fmt::Debug for AnalyticBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticBackend")
            .field("provider", &self.provider.provenance())
            .field("form", &self.form)
            .finish()
    }
}

pub fn analytic_backend(
    provider: impl ConstraintProvider + 'static,
    form: BivariateEntropyForm,
) -> AnalyticBackend {
    AnalyticBackend {
        provider: Box::new(provider),
        form,
        starts: 64,
        seed: 0x7f4a_7c15,
    }
}

/// A maximizer together with its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageOptimum {
    pub value: f64,
    pub argmax: LeakageVariables,
}

const FW_ITERATIONS: usize = 400;
const FW_GAP_TOL: f64 = 1e-12;
const VERTEX_TOL: f64 = 1e-12;

impl AnalyticBackend {
    pub fn optimize(&self, inputs: &LeakageInputs) -> Result<LeakageOptimum> {
        let q = inputs.q_code.get();
        if q <= 0.0 {
            return Err(Error::domain("leakage requires a positive code-mode gain"));
        }
        let mut rows = self.provider.constraints(inputs)?;
        for r in &mut rows {
            r.rhs /= q;
        }
        check_bounded(&rows)?;
        let vertices = enumerate_vertices(&rows);
        if vertices.is_empty() {
            return Err(Error::Numerical("no vertex found on a bounded polytope".into()));
        }

        let f = |y: &[f64; 4]| self.form.eval(y[0], y[1]) + self.form.eval(y[2], y[3]);
        let mut best = vertices[0];
        for v in &vertices {
            if f(v) > f(&best) {
                best = *v;
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for s in 0..self.starts {
            let mut weights: Vec<f64> = if s == 0 {
                vec![1.0; vertices.len()]
            } else {
                (0..vertices.len()).map(|_| rng.random::<f64>()).collect()
            };
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let y = self.pairwise_frank_wolfe(weights, &vertices, &f);
            if f(&y) > f(&best) {
                best = y;
            }
        }
        let argmax = best.map(|v| v * q);
        Ok(LeakageOptimum {
            value: f(&best),
            argmax: LeakageVariables::from_array(argmax),
        })
    }

    /// Pairwise Frank-Wolfe: weight moves from the worst active vertex to
    /// the best vertex along the current supergradient.
    fn pairwise_frank_wolfe(
        &self,
        mut weights: Vec<f64>,
        vertices: &[[f64; 4]],
        f: &dyn Fn(&[f64; 4]) -> f64,
    ) -> [f64; 4] {
        let point = |w: &[f64]| {
            let mut y = [0.0; 4];
            for (v, &wi) in vertices.iter().zip(w) {
                for k in 0..4 {
                    y[k] += wi * v[k];
                }
            }
            y
        };
        let mut y = point(&weights);
        for _ in 0..FW_ITERATIONS {
            let g = self.gradient(&y);
            let score = |v: &[f64; 4]| -> f64 { (0..4).map(|k| g[k] * v[k]).sum() };
            let toward = (0..vertices.len())
                .max_by(|&i, &j| score(&vertices[i]).total_cmp(&score(&vertices[j])))
                .unwrap_or(0);
            let Some(away) = (0..vertices.len())
                .filter(|&i| weights[i] > 0.0)
                .min_by(|&i, &j| score(&vertices[i]).total_cmp(&score(&vertices[j])))
            else {
                break;
            };
            let gap = score(&vertices[toward]) - score(&vertices[away]);
            if toward == away || gap <= FW_GAP_TOL {
                break;
            }
            let dir: [f64; 4] = std::array::from_fn(|k| vertices[toward][k] - vertices[away][k]);
            let step = |t: f64| -> [f64; 4] { std::array::from_fn(|k| y[k] + t * dir[k]) };
            let t_max = weights[away];
            let t = golden_max(|t| f(&step(t)), 0.0, t_max, 80);
            if f(&step(t)) <= f(&y) {
                break;
            }
            weights[toward] += t;
            weights[away] = if t >= t_max { 0.0 } else { weights[away] - t };
            y = point(&weights);
        }
        y
    }

    /// Supergradient of the concave objective; at faces where a partial
    /// derivative diverges the direction into the face is used.
    fn gradient(&self, y: &[f64; 4]) -> [f64; 4] {
        const CAP: f64 = 64.0;
        let part = |a: f64, b: f64| match (self.form.gradient)(a, b) {
            Some(g) => g,
            None if a <= 0.0 && b <= 0.0 => (1.0, 1.0),
            None if a <= 0.0 => (CAP, 0.0),
            None => (0.0, CAP),
        };
        let (g0, g1) = part(y[0], y[1]);
        let (g2, g3) = part(y[2], y[3]);
        [g0, g1, g2, g3]
    }
}

impl LeakageBackend for AnalyticBackend {
    fn provenance(&self) -> String {
        format!("{}; form {}", self.provider.provenance(), self.form.name)
    }

    fn evaluate(&self, inputs: &LeakageInputs) -> Result<f64> {
        Ok(self.optimize(inputs)?.value)
    }
}

/// Golden-section search for the maximum of a unimodal function on
/// `[lo, hi]`; the endpoints themselves are candidates.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iterations: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut l, mut h) = (lo, hi);
    let mut a = h - r * (h - l);
    let mut b = l + r * (h - l);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iterations {
        if fa < fb {
            l = a;
            a = b;
            fa = fb;
            b = l + r * (h - l);
            fb = f(b);
        } else {
            h = b;
            b = a;
            fb = fa;
            a = h - r * (h - l);
            fa = f(a);
        }
    }
    let mut best = (lo, f(lo));
    for t in [0.5 * (l + h), hi] {
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    best.0
}

/// Rejects empty and unbounded regions by maximizing every coordinate.
fn check_bounded(rows: &[LinearConstraint]) -> Result<()> {
    let mut lp = LinearProgram::new(4);
    for (i, r) in rows.iter().enumerate() {
        lp.add_row(format!("leakage constraint {i}"), r.coeffs.to_vec(), f64::NEG_INFINITY, r.rhs);
    }
    for k in 0..4 {
        lp.objective = vec![0.0; 4];
        lp.objective[k] = 1.0;
        match lp.maximize() {
            Ok(_) => {}
            Err(Error::Unbounded(_)) => {
                return Err(Error::Unbounded(format!(
                    "leakage region is unbounded along variable {}",
                    ["x00", "x10", "x11", "x01"][k]
                )))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Every basic feasible point of `{y ≥ 0, rows}`, deduplicated.
fn enumerate_vertices(rows: &[LinearConstraint]) -> Vec<[f64; 4]> {
    let mut all: Vec<LinearConstraint> = rows.to_vec();
    for k in 0..4 {
        let mut coeffs = [0.0; 4];
        coeffs[k] = -1.0;
        all.push(LinearConstraint { coeffs, rhs: 0.0 });
    }
    let scale = all
        .iter()
        .fold(0.0f64, |a, r| a.max(r.rhs.abs()))
        .max(1e-300);
    let mut vertices: Vec<[f64; 4]> = Vec::new();
    let n = all.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let pick = [all[a], all[b], all[c], all[d]];
                    let Some(y) = solve4(&pick) else { continue };
                    let feasible = all
                        .iter()
                        .all(|r| r.eval(&y) <= r.rhs + VERTEX_TOL * scale.max(r.rhs.abs()));
                    if !feasible {
                        continue;
                    }
                    let y = y.map(|v| v.max(0.0));
                    let duplicate = vertices.iter().any(|v| {
                        v.iter().zip(&y).all(|(p, q)| (p - q).abs() <= VERTEX_TOL * scale)
                    });
                    if !duplicate {
                        vertices.push(y);
                    }
                }
            }
        }
    }
    vertices
}

/// Solves the 4×4 system with the given rows as equalities.
fn solve4(rows: &[LinearConstraint; 4]) -> Option<[f64; 4]> {
    let mut m = [[0.0; 5]; 4];
    for (i, r) in rows.iter().enumerate() {
        m[i][..4].copy_from_slice(&r.coeffs);
        m[i][4] = r.rhs;
    }
    for col in 0..4 {
        let p = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[p][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, p);
        for i in 0..4 {
            if i != col {
                let f = m[i][col] / m[col][col];
                for k in col..5 {
                    m[i][k] -= f * m[col][k];
                }
            }
        }
    }
    Some([
        m[0][4] / m[0][0],
        m[1][4] / m[1][1],
        m[2][4] / m[2][2],
        m[3][4] / m[3][3],
    ])
}
