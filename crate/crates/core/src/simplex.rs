//! Dense bounded-variable primal simplex in double-double arithmetic.
//!
//! Decoy-state programs are nearly degenerate: the ten data rows pin the
//! low-order yields to within a few parts in 10⁸ while their coefficients span
//! forty orders of magnitude. Plain `f64` simplex codes routinely return bounds
//! in the wrong order on such input, so every tableau operation here carries
//! about 32 significant digits. Problems are tiny (tens of rows, a few hundred
//! columns), which keeps a dense tableau cheap.
//!
//! Rows have the form `lo ≤ a·x ≤ hi` and columns `l ≤ x ≤ u`, where any bound
//! may be infinite. Each solution comes with duals and reduced costs from
//! which [`Solution::verify`] recomputes a weak-duality bound independently
//! of the tableau.

use twofloat::TwoFloat;

use crate::error::{Error, Result};

type Dd = TwoFloat;

/// Pivots smaller than this fraction of the largest entry in the entering
/// column are skipped; nearly parallel columns otherwise make the basis
/// close to singular.
const PIVOT_REL_TOL: f64 = 1e-18;
const PIVOT_TOL: f64 = 1e-30;
/// Bound violation tolerated by the ratio test, in scaled units.
const FEAS_TOL: f64 = 1e-26;
/// Reduced costs are compared against this multiple of `1 + max |y|`.
const COST_TOL: f64 = 1e-20;
/// A column whose full move changes the objective by less than this
/// (relative) is not worth entering.
const IMPACT_TOL: f64 = 1e-18;
const PHASE1_TOL: f64 = 1e-26;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;
const REFACTOR_EVERY: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
    pub rows: Vec<Row>,
}

/// Position of a variable in the final basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub sense: Sense,
    pub objective: f64,
    pub x: Vec<f64>,
    pub row_activity: Vec<f64>,
    /// Row multipliers of the minimization of `±c`, with `+` for
    /// [`Sense::Minimize`].
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Full-precision duals; multipliers can be large enough that rounding
    /// them to `f64` alone spoils the duality gap.
    row_duals_dd: Vec<Dd>,
    pub col_status: Vec<VarStatus>,
    pub row_status: Vec<VarStatus>,
    pub iterations: usize,
}

/// Independent check of a [`Solution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    /// Largest violation of any row or column bound.
    pub primal_violation: f64,
    /// Largest reduced cost pointing toward an infinite bound.
    pub dual_violation: f64,
    /// Primal objective minus the weak-duality bound built from the duals.
    pub duality_gap: f64,
}

impl Verification {
    pub fn certified(&self, tol: f64) -> bool {
        self.primal_violation <= tol && self.dual_violation <= tol && self.duality_gap.abs() <= tol
    }
}

impl LinearProgram {
    /// `cols` variables in `[0, ∞)`, zero objective, no rows.
    pub fn new(cols: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; cols],
            col_lo: vec![0.0; cols],
            col_hi: vec![f64::INFINITY; cols],
            rows: Vec::new(),
        }
    }

    pub fn cols(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, label: impl Into<String>, coeffs: Vec<f64>, lo: f64, hi: f64) {
        assert_eq!(coeffs.len(), self.cols(), "row length must match column count");
        self.rows.push(Row {
            label: label.into(),
            coeffs,
            lo,
            hi,
        });
    }

    pub fn minimize(&self) -> Result<Solution> {
        self.solve(Sense::Minimize)
    }

    pub fn maximize(&self) -> Result<Solution> {
        self.solve(Sense::Maximize)
    }

    pub fn solve(&self, sense: Sense) -> Result<Solution> {
        self.check()?;
        let mut tab = Tableau::build(self);
        tab.phase_one(self)?;
        let cost: Vec<Dd> = (0..tab.ncols)
            .map(|j| {
                if j < tab.n {
                    Dd::from(sense.sign() * self.objective[j]) * tab.col_scale[j]
                } else {
                    Dd::from(0.0)
                }
            })
            .collect();
        tab.run(&cost)?;
        let solution = tab.extract(self, sense, &cost);
        let check = solution.verify(self);
        let scale = 1.0 + solution.objective.abs();
        if check.primal_violation > 1e-12 {
            return Err(Error::Numerical(format!(
                "simplex solution violates constraints by {:.3e}",
                check.primal_violation
            )));
        }
        if check.duality_gap.abs() > 1e-12 * scale {
            return Err(Error::Numerical(format!(
                "simplex duality gap {:.3e} too large (max |y| {:.3e})",
                check.duality_gap,
                solution.row_duals.iter().fold(0.0f64, |a, y| a.max(y.abs()))
            )));
        }
        Ok(solution)
    }

    fn check(&self) -> Result<()> {
        let n = self.cols();
        if self.col_lo.len() != n || self.col_hi.len() != n {
            return Err(Error::Numerical("column bound arrays have wrong length".into()));
        }
        for j in 0..n {
            if self.col_lo[j] > self.col_hi[j] || self.col_lo[j].is_nan() || self.col_hi[j].is_nan() {
                return Err(Error::Infeasible {
                    constraint: format!("column {j} bounds"),
                    min_relative_slack: None,
                });
            }
            if !self.objective[j].is_finite() {
                return Err(Error::Numerical(format!("objective coefficient {j} not finite")));
            }
        }
        for row in &self.rows {
            if row.lo > row.hi || row.lo.is_nan() || row.hi.is_nan() {
                return Err(Error::Infeasible {
                    constraint: row.label.clone(),
                    min_relative_slack: None,
                });
            }
            if row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::Numerical(format!("row {} has non-finite coefficients", row.label)));
            }
        }
        Ok(())
    }
}

fn dd_bound(v: f64) -> Option<Dd> {
    v.is_finite().then(|| Dd::from(v))
}

/// Columns are ordered: structural `x` (n), row activities `r` (m),
/// artificials (m). Every row reads `A'x − r + σ·a = 0` in scaled units.
struct Tableau {
    n: usize,
    m: usize,
    ncols: usize,
    t: Vec<Dd>,
    /// The initial tableau, kept for refactorization.
    t0: Vec<Dd>,
    basis0: Vec<usize>,
    lo: Vec<Option<Dd>>,
    hi: Vec<Option<Dd>>,
    value: Vec<Dd>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    row_scale: Vec<Dd>,
    col_scale: Vec<Dd>,
    iterations: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.cols();
        let m = lp.rows.len();
        let ncols = n + 2 * m;

        let row_scale: Vec<f64> = lp
            .rows
            .iter()
            .map(|r| {
                let mx = r.coeffs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
                if mx > 0.0 {
                    1.0 / mx
                } else {
                    1.0
                }
            })
            .collect();
        let col_scale: Vec<f64> = (0..n)
            .map(|j| {
                let mx = lp
                    .rows
                    .iter()
                    .zip(&row_scale)
                    .fold(0.0f64, |a, (r, &s)| a.max((r.coeffs[j] * s).abs()));
                if mx > 0.0 {
                    1.0 / mx
                } else {
                    1.0
                }
            })
            .collect();
        let row_scale: Vec<Dd> = row_scale.into_iter().map(Dd::from).collect();
        let col_scale: Vec<Dd> = col_scale.into_iter().map(Dd::from).collect();

        let mut lo = vec![None; ncols];
        let mut hi = vec![None; ncols];
        let mut value = vec![Dd::from(0.0); ncols];
        let mut status = vec![VarStatus::Zero; ncols];
        for j in 0..n {
            lo[j] = dd_bound(lp.col_lo[j]).map(|v| v / col_scale[j]);
            hi[j] = dd_bound(lp.col_hi[j]).map(|v| v / col_scale[j]);
            (value[j], status[j]) = match (lo[j], hi[j]) {
                (Some(l), _) => (l, VarStatus::AtLower),
                (None, Some(h)) => (h, VarStatus::AtUpper),
                (None, None) => (Dd::from(0.0), VarStatus::Zero),
            };
        }

        let mut t = vec![Dd::from(0.0); m * ncols];
        let mut basis = vec![0; m];
        for (i, row) in lp.rows.iter().enumerate() {
            let r = n + i;
            let a = n + m + i;
            lo[r] = dd_bound(row.lo).map(|v| v * row_scale[i]);
            hi[r] = dd_bound(row.hi).map(|v| v * row_scale[i]);
            let mut w = Dd::from(0.0);
            for j in 0..n {
                let c = Dd::from(row.coeffs[j]) * row_scale[i] * col_scale[j];
                t[i * ncols + j] = c;
                w += c * value[j];
            }
            lo[a] = Some(Dd::from(0.0));
            let below = lo[r].is_some_and(|l| w < l);
            let above = hi[r].is_some_and(|h| w > h);
            let (sigma, pivot) = if below || above {
                // r sits at the violated bound; the artificial covers the gap.
                let target = if below { lo[r].unwrap() } else { hi[r].unwrap() };
                value[r] = target;
                status[r] = if below { VarStatus::AtLower } else { VarStatus::AtUpper };
                let sigma = if below { 1.0 } else { -1.0 };
                status[a] = VarStatus::Basic;
                basis[i] = a;
                (sigma, sigma)
            } else {
                hi[a] = Some(Dd::from(0.0));
                status[a] = VarStatus::AtLower;
                status[r] = VarStatus::Basic;
                basis[i] = r;
                (1.0, -1.0)
            };
            t[i * ncols + r] = Dd::from(-1.0);
            t[i * ncols + a] = Dd::from(sigma);
            let inv = Dd::from(1.0 / pivot);
            for j in 0..ncols {
                t[i * ncols + j] *= inv;
            }
        }
        let mut tab = Tableau {
            n,
            m,
            ncols,
            t0: t.clone(),
            basis0: basis.clone(),
            t,
            lo,
            hi,
            value,
            status,
            basis,
            row_scale,
            col_scale,
            iterations: 0,
        };
        tab.refresh_basic_values();
        tab
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Dd {
        self.t[i * self.ncols + j]
    }

    /// `x_B = −Σ_{j ∉ B} T_j x_j`, recomputed from the tableau so that basic
    /// values never drift from the nonbasic ones.
    fn refresh_basic_values(&mut self) {
        for i in 0..self.m {
            let mut s = Dd::from(0.0);
            for j in 0..self.ncols {
                if self.status[j] != VarStatus::Basic {
                    let v = self.value[j];
                    if v != 0.0 {
                        s -= self.at(i, j) * v;
                    }
                }
            }
            self.value[self.basis[i]] = s;
        }
        // Iterative refinement against the exact rows `t0 · value = 0`.
        let (m, nc) = (self.m, self.ncols);
        for _ in 0..2 {
            let residual: Vec<Dd> = (0..m)
                .map(|i| {
                    let mut r = Dd::from(0.0);
                    for j in 0..nc {
                        let v = self.value[j];
                        if v != 0.0 {
                            r += self.t0[i * nc + j] * v;
                        }
                    }
                    r
                })
                .collect();
            for k in 0..m {
                let mut dx = Dd::from(0.0);
                for (i, &r) in residual.iter().enumerate() {
                    dx += self.t[k * nc + self.basis0[i]] * r;
                }
                let b = self.basis[k];
                self.value[b] -= dx;
            }
        }
    }

    /// Recomputes `B⁻¹M` from the initial tableau by Gauss-Jordan elimination
    /// with partial pivoting, discarding rounding accumulated by pivots.
    fn refactor(&mut self) {
        let (m, nc) = (self.m, self.ncols);
        let mut t = self.t0.clone();
        let mut order: Vec<usize> = self.basis.clone();
        for k in 0..m {
            let col = order[k];
            let mut p = k;
            for i in k + 1..m {
                if t[i * nc + col].abs() > t[p * nc + col].abs() {
                    p = i;
                }
            }
            if p != k {
                for j in 0..nc {
                    t.swap(k * nc + j, p * nc + j);
                }
            }
            let inv = Dd::from(1.0) / t[k * nc + col];
            for j in 0..nc {
                t[k * nc + j] *= inv;
            }
            t[k * nc + col] = Dd::from(1.0);
            let pivot_row: Vec<Dd> = t[k * nc..(k + 1) * nc].to_vec();
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = t[i * nc + col];
                if f == 0.0 {
                    continue;
                }
                for (x, &pv) in t[i * nc..(i + 1) * nc].iter_mut().zip(&pivot_row) {
                    if pv != 0.0 {
                        *x -= f * pv;
                    }
                }
                t[i * nc + col] = Dd::from(0.0);
            }
        }
        // Row k now holds basic variable order[k].
        order.truncate(m);
        self.basis = order;
        self.t = t;
        self.refresh_basic_values();
    }

    fn objective(&self, cost: &[Dd]) -> Dd {
        let mut s = Dd::from(0.0);
        for (c, v) in cost.iter().zip(&self.value) {
            if *c != 0.0 {
                s += *c * *v;
            }
        }
        s
    }

    fn phase_one(&mut self, lp: &LinearProgram) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let cost: Vec<Dd> = (0..self.ncols)
            .map(|j| Dd::from(if j >= n + m { 1.0 } else { 0.0 }))
            .collect();
        self.run(&cost)?;
        let mut worst: Option<(usize, f64)> = None;
        let mut total = 0.0;
        for i in 0..m {
            let a = f64::from(self.value[n + m + i]);
            total += a;
            if a > worst.map_or(0.0, |w| w.1) {
                worst = Some((i, a));
            }
        }
        if total > PHASE1_TOL {
            let (i, _) = worst.expect("positive infeasibility has a worst row");
            let row = &lp.rows[i];
            let side = if self.status[n + i] == VarStatus::AtUpper {
                "upper"
            } else {
                "lower"
            };
            return Err(Error::Infeasible {
                constraint: format!("{} ({side} side)", row.label),
                min_relative_slack: None,
            });
        }
        for i in 0..m {
            let a = n + m + i;
            self.lo[a] = Some(Dd::from(0.0));
            self.hi[a] = Some(Dd::from(0.0));
            if self.status[a] != VarStatus::Basic {
                self.status[a] = VarStatus::AtLower;
                self.value[a] = Dd::from(0.0);
            }
        }
        self.refresh_basic_values();
        Ok(())
    }

    fn run(&mut self, cost: &[Dd]) -> Result<()> {
        let limit = 50 * (self.ncols + self.m) + 1000;
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations > limit {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let d = self.refined_reduced_costs(cost);
            let Some((j, dir)) = self.price(&d, f64::from(self.objective(cost)), bland) else {
                if since_refactor == 0 {
                    return Ok(());
                }
                // Confirm optimality on a freshly factored tableau.
                self.refactor();
                since_refactor = 0;
                continue;
            };
            let Some((row, step)) = self.ratio(j, dir, bland) else {
                return Err(Error::Unbounded(format!("objective unbounded along column {j}")));
            };
            self.iterations += 1;
            // A step whose objective gain is lost in rounding counts as
            // degenerate; repeated ones would otherwise cycle.
            let gain = f64::from(d[j].abs() * step);
            let stalled = gain <= 1e-30 * (1.0 + f64::from(self.objective(cost)).abs());
            degenerate_run = if stalled { degenerate_run + 1 } else { 0 };
            match row {
                None => {
                    // Bound flip: the entering variable crosses its whole range.
                    let (st, v) = if dir > 0.0 {
                        (VarStatus::AtUpper, self.hi[j].unwrap())
                    } else {
                        (VarStatus::AtLower, self.lo[j].unwrap())
                    };
                    self.status[j] = st;
                    self.value[j] = v;
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    self.pivot(r, j);
                    self.status[leaving] = if to_upper {
                        self.value[leaving] = self.hi[leaving].unwrap();
                        VarStatus::AtUpper
                    } else {
                        self.value[leaving] = self.lo[leaving].unwrap();
                        VarStatus::AtLower
                    };
                    self.status[j] = VarStatus::Basic;
                    self.basis[r] = j;
                }
            }
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor();
                since_refactor = 0;
            } else {
                self.refresh_basic_values();
            }
        }
    }

    /// Entering column and direction (+1 increase, −1 decrease).
    fn price(&self, d: &[Dd], objective: f64, bland: bool) -> Option<(usize, f64)> {
        let ymax = d[self.n..self.n + self.m]
            .iter()
            .fold(0.0f64, |a, y| a.max(f64::from(y.abs())));
        let tol = COST_TOL * (1.0 + ymax);
        let impact_tol = IMPACT_TOL * (1.0 + objective.abs());
        let mut best: Option<(usize, f64, Dd)> = None;
        for j in 0..self.ncols {
            let st = self.status[j];
            if st == VarStatus::Basic {
                continue;
            }
            if let (Some(l), Some(h)) = (self.lo[j], self.hi[j]) {
                if l == h {
                    continue;
                }
            }
            let dj = d[j];
            if let (Some(l), Some(h)) = (self.lo[j], self.hi[j]) {
                if f64::from(dj.abs() * (h - l)) <= impact_tol {
                    continue;
                }
            }
            let dir = match st {
                VarStatus::AtLower if dj < -tol => 1.0,
                VarStatus::AtUpper if dj > tol => -1.0,
                VarStatus::Zero if dj < -tol => 1.0,
                VarStatus::Zero if dj > tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let mag = dj.abs();
            if best.map_or(true, |b| mag > b.2) {
                best = Some((j, dir, mag));
            }
        }
        best.map(|b| (b.0, b.1))
    }

    /// Harris two-pass ratio test. Pass one finds the longest step that
    /// keeps every basic variable within `FEAS_TOL` of its bounds; pass two
    /// picks, among rows blocking within that step, the largest pivot.
    /// Returns the blocking row (and whether the leaving variable ends at its
    /// upper bound) or `None` for a bound flip, plus the step length.
    #[allow(clippy::type_complexity)]
    fn ratio(&self, j: usize, dir: f64, bland: bool) -> Option<(Option<(usize, bool)>, Dd)> {
        let flip: Option<Dd> = match (self.lo[j], self.hi[j]) {
            (Some(l), Some(h)) => Some(h - l),
            _ => None,
        };
        let colmax = (0..self.m).fold(0.0f64, |acc, i| acc.max(f64::from(self.at(i, j).abs())));
        let piv_tol = PIVOT_TOL.max(PIVOT_REL_TOL * colmax);
        let feas = Dd::from(FEAS_TOL);
        let zero = Dd::from(0.0);

        // (row, exact ratio, pivot magnitude, leaves at upper)
        let mut cand: Vec<(usize, Dd, Dd, bool)> = Vec::new();
        let mut t_max = flip;
        for i in 0..self.m {
            let a = self.at(i, j);
            if a.abs() <= piv_tol {
                continue;
            }
            // Basic variable moves at rate −dir·a per unit step.
            let rate = -a * dir;
            let b = self.basis[i];
            let v = self.value[b];
            let (slack, to_upper) = if rate < 0.0 {
                (self.lo[b].map(|l| v - l), false)
            } else {
                (self.hi[b].map(|h| h - v), true)
            };
            let Some(slack) = slack else { continue };
            let slack = if slack < zero { zero } else { slack };
            let r = rate.abs();
            let relaxed = (slack + feas) / r;
            if t_max.map_or(true, |t| relaxed < t) {
                t_max = Some(relaxed);
            }
            cand.push((i, slack / r, a.abs(), to_upper));
        }
        let t_max = t_max?;
        if let Some(f) = flip {
            if f <= t_max {
                return Some((None, f));
            }
        }
        let mut best: Option<(usize, Dd, Dd, bool)> = None;
        for c in cand.into_iter().filter(|c| c.1 <= t_max) {
            let better = match best {
                None => true,
                Some(b) => {
                    let (bi, ci) = (self.basis[b.0], self.basis[c.0]);
                    if bland {
                        c.1 < b.1 || (c.1 == b.1 && ci < bi)
                    } else {
                        c.2 > b.2 || (c.2 == b.2 && ci < bi)
                    }
                }
            };
            if better {
                best = Some(c);
            }
        }
        best.map(|(i, t, _, up)| (Some((i, up)), t))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let inv = Dd::from(1.0) / self.at(r, j);
        for k in 0..nc {
            self.t[r * nc + k] *= inv;
        }
        self.t[r * nc + j] = Dd::from(1.0);
        let pivot_row: Vec<Dd> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.at(i, j);
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                if p != 0.0 {
                    *x -= f * p;
                }
            }
            row[j] = Dd::from(0.0);
        }
    }

    /// Reduced costs from multipliers `π` on the rows of `t0`, polished by
    /// iterative refinement: `t0` is exact, and the columns of the current
    /// tableau under the initial basis hold the inverse of the basis matrix.
    fn refined_reduced_costs(&self, cost: &[Dd]) -> Vec<Dd> {
        let (m, nc) = (self.m, self.ncols);
        let t0 = |i: usize, j: usize| self.t0[i * nc + j];
        let inverse = |k: usize, i: usize| self.t[k * nc + self.basis0[i]];
        let mut pi: Vec<Dd> = (0..m)
            .map(|i| {
                let mut v = Dd::from(0.0);
                for k in 0..m {
                    v += cost[self.basis[k]] * inverse(k, i);
                }
                v
            })
            .collect();
        for _ in 0..2 {
            let residual: Vec<Dd> = (0..m)
                .map(|k| {
                    let j = self.basis[k];
                    let mut r = cost[j];
                    for (i, &p) in pi.iter().enumerate() {
                        r -= p * t0(i, j);
                    }
                    r
                })
                .collect();
            for (i, p) in pi.iter_mut().enumerate() {
                for (k, &r) in residual.iter().enumerate() {
                    *p += r * inverse(k, i);
                }
            }
        }
        (0..nc)
            .map(|j| {
                let mut d = cost[j];
                for (i, &p) in pi.iter().enumerate() {
                    d -= p * t0(i, j);
                }
                d
            })
            .collect()
    }

    fn extract(&self, lp: &LinearProgram, sense: Sense, cost: &[Dd]) -> Solution {
        let (n, m) = (self.n, self.m);
        let d = self.refined_reduced_costs(cost);
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let v = f64::from(self.value[j] * self.col_scale[j]);
                v.clamp(lp.col_lo[j], lp.col_hi[j])
            })
            .collect();
        let row_activity: Vec<f64> = lp
            .rows
            .iter()
            .map(|r| {
                let mut s = Dd::from(0.0);
                for (a, xj) in r.coeffs.iter().zip(&x) {
                    s += Dd::from(*a) * *xj;
                }
                f64::from(s)
            })
            .collect();
        let row_duals_dd: Vec<Dd> = (0..m).map(|i| d[n + i] * self.row_scale[i]).collect();
        let row_duals: Vec<f64> = row_duals_dd.iter().map(|&y| f64::from(y)).collect();
        let reduced_costs: Vec<f64> = (0..n).map(|j| f64::from(d[j] / self.col_scale[j])).collect();
        let mut obj = Dd::from(0.0);
        for (c, xj) in lp.objective.iter().zip(&x) {
            obj += Dd::from(*c) * *xj;
        }
        Solution {
            sense,
            objective: f64::from(obj),
            x,
            row_activity,
            row_duals,
            reduced_costs,
            row_duals_dd,
            col_status: self.status[..n].to_vec(),
            row_status: self.status[n..n + m].to_vec(),
            iterations: self.iterations,
        }
    }
}

impl Solution {
    /// Recomputes primal feasibility and the weak-duality bound
    /// `Σᵢ min_{r∈[lo,hi]} yᵢ r + Σⱼ min_{x∈[l,u]} dⱼ x` with `d = c − Aᵀy`,
    /// using only the problem data, `x` and the row duals.
    pub fn verify(&self, lp: &LinearProgram) -> Verification {
        let s = self.sense.sign();
        let mut primal_violation = 0.0f64;
        for (j, &xj) in self.x.iter().enumerate() {
            primal_violation = primal_violation
                .max(lp.col_lo[j] - xj)
                .max(xj - lp.col_hi[j]);
        }
        for row in &lp.rows {
            let mut a = Dd::from(0.0);
            for (c, xj) in row.coeffs.iter().zip(&self.x) {
                a += Dd::from(*c) * *xj;
            }
            let a = f64::from(a);
            primal_violation = primal_violation.max(row.lo - a).max(a - row.hi);
        }

        let mut dual_violation = 0.0f64;
        let mut bound = Dd::from(0.0);
        let mut term = |v: Dd, lo: f64, hi: f64, at: f64| {
            let lim = if v > 0.0 { lo } else { hi };
            if v == 0.0 {
                return Dd::from(0.0);
            }
            if lim.is_finite() {
                v * lim
            } else {
                dual_violation = dual_violation.max(f64::from(v.abs()));
                v * at
            }
        };
        for (i, row) in lp.rows.iter().enumerate() {
            let y = self.row_duals_dd[i];
            bound += term(y, row.lo, row.hi, self.row_activity[i]);
        }
        for j in 0..lp.cols() {
            let mut d = Dd::from(s * lp.objective[j]);
            for (i, row) in lp.rows.iter().enumerate() {
                d -= self.row_duals_dd[i] * row.coeffs[j];
            }
            bound += term(d, lp.col_lo[j], lp.col_hi[j], self.x[j]);
        }
        let primal = s * self.objective;
        Verification {
            primal_violation: primal_violation.max(0.0),
            dual_violation,
            duality_gap: primal - f64::from(bound),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_textbook_problem() {
        // max 3x + 2y s.t. x + y ≤ 4, x + 3y ≤ 6, x ≤ 3.
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 2.0];
        lp.col_hi = vec![3.0, f64::INFINITY];
        lp.add_row("a", vec![1.0, 1.0], f64::NEG_INFINITY, 4.0);
        lp.add_row("b", vec![1.0, 3.0], f64::NEG_INFINITY, 6.0);
        let s = lp.maximize().unwrap();
        assert!((s.objective - 11.0).abs() < 1e-14);
        assert!((s.x[0] - 3.0).abs() < 1e-14 && (s.x[1] - 1.0).abs() < 1e-14);
        assert!(s.verify(&lp).certified(1e-12));
    }

    #[test]
    fn equality_and_ranged_rows() {
        // min x - y s.t. x + y = 1, 0.2 ≤ x - y ≤ 0.6, x,y ∈ [0,1].
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, -1.0];
        lp.col_hi = vec![1.0, 1.0];
        lp.add_row("sum", vec![1.0, 1.0], 1.0, 1.0);
        lp.add_row("diff", vec![1.0, -1.0], 0.2, 0.6);
        let s = lp.minimize().unwrap();
        assert!((s.objective - 0.2).abs() < 1e-15);
        assert!(s.verify(&lp).certified(1e-14));
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new(1);
        lp.col_hi = vec![1.0];
        lp.add_row("too-big", vec![1.0], 2.0, 3.0);
        match lp.minimize() {
            Err(Error::Infeasible { constraint, .. }) => assert!(constraint.contains("too-big")),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.add_row("r", vec![1.0, -1.0], f64::NEG_INFINITY, 1.0);
        assert!(matches!(lp.minimize(), Err(Error::Unbounded(_))));
    }

    #[test]
    fn resolves_tiny_differences() {
        // Two nearly parallel constraints whose intersection needs more than
        // double precision to locate.
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![0.0, 1.0];
        lp.col_hi = vec![1.0, 1.0];
        let e = 2f64.powi(-40);
        lp.add_row("a", vec![1.0, 1.0], 1.0, 1.0);
        lp.add_row("b", vec![1.0, 1.0 + e], 1.0 + 0.5 * e, f64::INFINITY);
        let s = lp.minimize().unwrap();
        assert!((s.x[1] - 0.5).abs() < 1e-15, "{}", s.x[1]);
        assert!(s.verify(&lp).certified(1e-12));
    }
}
