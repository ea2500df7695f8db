//! Dense bounded-variable dual simplex.
//!
//! Problems have the form `min c'x  s.t.  A x = b,  lo <= x <= hi` with every
//! bound finite. The start basis is one artificial variable per row with
//! bounds `[0, 0]`; since every structural variable is boxed, placing each
//! nonbasic variable at the bound matching the sign of its cost makes that
//! basis dual feasible, so a single dual simplex loop covers both phases.
//! The same property lets branch-and-bound change bounds and re-optimise the
//! current tableau in place.
//!
//! The tableau carries `B^-1` explicitly. It is rebuilt from an LU
//! factorisation of the basis every `m` pivots and whenever a result fails
//! its check: optima must satisfy `A x = b` to a small residual, and
//! infeasibility is only reported with a Farkas-type certificate taken from
//! a row of `B^-1`. The ratio test is the two-pass Harris test, which keeps
//! pivots well away from roundoff.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Smallest admissible pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-10;
/// Pivots below this fraction of the largest entry of the pivot row are
/// treated as roundoff.
const STABLE_PIVOT: f64 = 1e-7;
/// Reduced costs within this of zero count as dual feasible.
const DUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LpProblem {
    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.a.ncols() != n {
            return Err(Error::dim("lp_solve columns", n, self.a.ncols()));
        }
        if self.a.nrows() != self.b.len() {
            return Err(Error::dim("lp_solve rows", self.a.nrows(), self.b.len()));
        }
        if self.lo.len() != n || self.hi.len() != n {
            return Err(Error::dim("lp_solve bounds", n, self.lo.len().min(self.hi.len())));
        }
        for j in 0..n {
            if !self.lo[j].is_finite() || !self.hi[j].is_finite() {
                return Err(Error::InvalidInput(format!("variable {j} has an infinite bound")));
            }
        }
        if self.a.iter().chain(self.b.iter()).chain(self.objective.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("LP data contains non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
}

/// Solve one LP from scratch.
pub fn lp_solve(p: &LpProblem) -> Result<LpResult> {
    let mut s = Simplex::new(p)?;
    let status = s.solve()?;
    Ok(LpResult {
        status,
        value: if status == LpStatus::Optimal { s.objective_value() } else { f64::NAN },
        point: s.point(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    /// The basic variable of this row cannot be brought within its bounds.
    Infeasible(usize),
}

impl From<Outcome> for LpStatus {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Infeasible(_) => LpStatus::Infeasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// Reusable simplex state, re-optimised after bound changes.
#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    n: usize,
    // Original data for residual checks and refactoring.
    a: DMatrix<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    // Row-major [B^-1 A | B^-1] with row width `n + m`, plus B^-1 b.
    tab: Vec<f64>,
    beta: Vec<f64>,
    // Reduced costs of the structural variables.
    d: Vec<f64>,
    // Basic variable of each row; `n + i` is the artificial of row `i`.
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    refactors: usize,
    since_refresh: usize,
}

impl Simplex {
    pub fn new(p: &LpProblem) -> Result<Self> {
        p.validate()?;
        let m = p.a.nrows();
        let n = p.objective.len();
        let w = n + m;
        let mut tab = vec![0.0; m * w];
        for i in 0..m {
            for j in 0..n {
                tab[i * w + j] = p.a[(i, j)];
            }
            tab[i * w + n + i] = 1.0;
        }
        let mut s = Simplex {
            m,
            n,
            a: p.a.clone(),
            b: p.b.clone(),
            cost: p.objective.clone(),
            lo: p.lo.clone(),
            hi: p.hi.clone(),
            tab,
            beta: p.b.clone(),
            d: p.objective.clone(),
            basis: (n..n + m).collect(),
            state: vec![VarState::AtLower; n],
            x: vec![0.0; n],
            xb: vec![0.0; m],
            pivots: 0,
            refactors: 0,
            since_refresh: 0,
        };
        for j in 0..n {
            s.place_nonbasic(j);
        }
        s.recompute_basics();
        Ok(s)
    }

    /// Total pivots and tableau rebuilds so far.
    pub fn work(&self) -> (usize, usize) {
        (self.pivots, self.refactors)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Change the bounds of structural variable `j`; takes effect at the next
    /// [`Simplex::solve`].
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.state[j] != VarState::Basic {
            self.place_nonbasic(j);
        }
    }

    fn place_nonbasic(&mut self, j: usize) {
        let st = if self.lo[j] == self.hi[j] {
            VarState::AtLower
        } else if self.d[j] > DUAL_TOL {
            VarState::AtLower
        } else if self.d[j] < -DUAL_TOL {
            VarState::AtUpper
        } else {
            self.state[j]
        };
        let st = if st == VarState::Basic { VarState::AtLower } else { st };
        self.state[j] = st;
        let value = if st == VarState::AtLower { self.lo[j] } else { self.hi[j] };
        let delta = value - self.x[j];
        if delta != 0.0 {
            // Keep the basic values in step with the move.
            let w = self.width();
            for (i, xb) in self.xb.iter_mut().enumerate() {
                let t = self.tab[i * w + j];
                if t != 0.0 {
                    *xb -= t * delta;
                }
            }
            self.x[j] = value;
        }
    }

    fn place_all_nonbasic(&mut self) {
        for j in 0..self.n {
            if self.state[j] != VarState::Basic {
                self.place_nonbasic(j);
            }
        }
    }

    fn var_bounds(&self, v: usize) -> (f64, f64) {
        if v < self.n {
            (self.lo[v], self.hi[v])
        } else {
            (0.0, 0.0)
        }
    }

    fn width(&self) -> usize {
        self.n + self.m
    }

    fn recompute_basics(&mut self) {
        let n = self.n;
        let w = self.width();
        for i in 0..self.m {
            let row = &self.tab[i * w..i * w + n];
            let mut v = self.beta[i];
            for j in 0..n {
                if self.state[j] != VarState::Basic {
                    let t = row[j];
                    if t != 0.0 {
                        v -= t * self.x[j];
                    }
                }
            }
            self.xb[i] = v;
        }
        for i in 0..self.m {
            let v = self.basis[i];
            if v < n {
                self.x[v] = self.xb[i];
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.width();
        let inv = 1.0 / self.tab[r * n + q];
        let (before, rest) = self.tab.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for v in prow.iter_mut() {
            *v *= inv;
        }
        prow[q] = 1.0;
        self.beta[r] *= inv;
        let beta_r = self.beta[r];
        let rows = before
            .chunks_mut(n)
            .enumerate()
            .chain(after.chunks_mut(n).enumerate().map(|(k, row)| (r + 1 + k, row)));
        for (i, row) in rows {
            let f = row[q];
            if f != 0.0 {
                for (a, p) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
                row[q] = 0.0;
                self.beta[i] -= f * beta_r;
            }
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for (dj, p) in self.d.iter_mut().zip(prow[..self.n].iter()) {
                *dj -= dq * p;
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refresh += 1;
    }

    /// Run the dual simplex from the current basis.
    ///
    /// An optimum is accepted when the equality residual is small, an
    /// infeasibility when row `r` of `B^-1` certifies it against the original
    /// data. Otherwise the tableau is rebuilt from the current basis and the
    /// loop rerun; a second failure restarts from the artificial basis.
    pub fn solve(&mut self) -> Result<LpStatus> {
        let mut last = None;
        for attempt in 0..3 {
            match self.dual_loop() {
                Ok(status) => {
                    // Infeasibility is only reported with a certificate.
                    let trusted = match status {
                        Outcome::Optimal => self.residual_ok(),
                        Outcome::Infeasible(_) => true,
                    };
                    if trusted {
                        return Ok(status.into());
                    }
                }
                Err(e) => last = Some(e),
            }
            log::debug!("simplex drift after {} pivots, rebuilding", self.pivots);
            if attempt == 0 {
                self.refresh()?;
            } else {
                self.restart()?;
            }
        }
        Err(last.unwrap_or_else(|| {
            Error::SolverFailure("equality residual above tolerance after refactoring".into())
        }))
    }

    /// With `y` row `r` of `B^-1`, every feasible `x` satisfies
    /// `y'A x = y'b`; infeasibility is certified when `y'b` lies outside the
    /// range of `y'A x` over the bounds.
    fn certifies_infeasibility(&self, r: usize) -> bool {
        let (n, w) = (self.n, self.width());
        let y = &self.tab[r * w + n..(r + 1) * w];
        let rhs: f64 = y.iter().zip(&self.b).map(|(yi, bi)| yi * bi).sum();
        let (mut lo, mut hi, mut scale) = (0.0, 0.0, rhs.abs());
        for j in 0..n {
            let g: f64 = (0..self.m).map(|i| y[i] * self.a[(i, j)]).sum();
            let (a, b) = (g * self.lo[j], g * self.hi[j]);
            lo += a.min(b);
            hi += a.max(b);
            scale += a.abs().max(b.abs());
        }
        let tol = FEAS_TOL * (1.0 + scale);
        rhs < lo - tol || rhs > hi + tol
    }

    fn residual_ok(&self) -> bool {
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..self.m {
            let mut r = -self.b[i];
            for j in 0..self.n {
                r += self.a[(i, j)] * self.x[j];
            }
            if r.abs() > 1e3 * FEAS_TOL * scale {
                return false;
            }
        }
        true
    }

    /// Pivots between tableau rebuilds; a rebuild costs about as much as
    /// `m` pivots.
    fn refresh_interval(&self) -> usize {
        self.m.max(64)
    }

    /// Recompute the tableau and reduced costs from an LU factorisation of
    /// the current basis. Returns `false` if the basis is numerically
    /// singular.
    fn reinvert(&mut self) -> bool {
        let (m, n, w) = (self.m, self.n, self.width());
        let mut basis_mat = DMatrix::zeros(m, m);
        for (i, &v) in self.basis.iter().enumerate() {
            if v < n {
                basis_mat.set_column(i, &self.a.column(v));
            } else {
                basis_mat[(v - n, i)] = 1.0;
            }
        }
        // A failed rebuild is not retried until the next interval.
        self.since_refresh = 0;
        let Some(inv) = basis_mat.lu().try_inverse() else {
            return false;
        };
        if inv.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            return false;
        }
        let ba = &inv * &self.a;
        for i in 0..m {
            let row = &mut self.tab[i * w..(i + 1) * w];
            for j in 0..n {
                row[j] = ba[(i, j)];
            }
            for k in 0..m {
                row[n + k] = inv[(i, k)];
            }
        }
        for i in 0..m {
            self.beta[i] = (0..m).map(|k| inv[(i, k)] * self.b[k]).sum();
        }
        let cb: Vec<f64> = self
            .basis
            .iter()
            .map(|&v| if v < n { self.cost[v] } else { 0.0 })
            .collect();
        for j in 0..n {
            self.d[j] = if self.state[j] == VarState::Basic {
                0.0
            } else {
                self.cost[j] - (0..m).map(|i| cb[i] * ba[(i, j)]).sum::<f64>()
            };
        }
        self.recompute_basics();
        true
    }

    fn refresh(&mut self) -> Result<()> {
        self.refactors += 1;
        if self.reinvert() {
            Ok(())
        } else {
            self.restart()
        }
    }

    /// Restart from the artificial basis, keeping the current bounds.
    fn restart(&mut self) -> Result<()> {
        let p = LpProblem {
            objective: self.cost.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        };
        let (pivots, refactors) = (self.pivots, self.refactors + 1);
        *self = Simplex::new(&p)?;
        self.pivots = pivots;
        self.refactors = refactors;
        Ok(())
    }

    fn dual_loop(&mut self) -> Result<Outcome> {
        let (m, n) = (self.m, self.n);
        let w = self.width();
        self.place_all_nonbasic();
        let bland_after = 2 * (m + n) + 50;
        let max_iter = 50 * (m + n) + 1000;
        let mut iter = 0usize;
        // Rows whose tiny violation has no admissible pivot; reset after
        // every pivot.
        let mut tolerated = vec![false; m];
        loop {
            if self.since_refresh >= self.refresh_interval() && self.reinvert() {
                self.place_all_nonbasic();
            }
            let bland = iter >= bland_after;
            // Leaving row.
            let mut leave: Option<(usize, f64, bool)> = None;
            for i in 0..m {
                if tolerated[i] {
                    continue;
                }
                let (l, u) = self.var_bounds(self.basis[i]);
                let v = self.xb[i];
                let (viol, below) = if v < l - FEAS_TOL {
                    (l - v, true)
                } else if v > u + FEAS_TOL {
                    (v - u, false)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((bi, bv, _)) => {
                        if bland {
                            self.basis[i] < self.basis[bi]
                        } else {
                            viol > bv
                        }
                    }
                };
                if better {
                    leave = Some((i, viol, below));
                }
            }
            let Some((r, viol, below)) = leave else {
                for i in 0..m {
                    if self.basis[i] < n {
                        self.x[self.basis[i]] = self.xb[i];
                    }
                }
                return Ok(Outcome::Optimal);
            };
            if iter >= max_iter {
                return Err(Error::SolverFailure(format!(
                    "dual simplex stalled after {iter} iterations"
                )));
            }
            // Entering column by a two-pass (Harris) dual ratio test: bound
            // the step with a small dual tolerance, then take the largest
            // pivot among columns within that step.
            let row = &self.tab[r * w..r * w + n];
            let row_max = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let stable = STABLE_PIVOT * row_max.max(1.0);
            let candidates: Vec<(usize, f64, f64)> = (0..n)
                .filter_map(|j| {
                    let st = self.state[j];
                    if st == VarState::Basic || self.lo[j] == self.hi[j] {
                        return None;
                    }
                    let t = row[j];
                    if t.abs() <= PIVOT_TOL.max(stable) {
                        return None;
                    }
                    // Moving x_j up changes x_r by -t per unit.
                    let eligible = match (below, st) {
                        (true, VarState::AtLower) | (false, VarState::AtUpper) => t < 0.0,
                        (true, VarState::AtUpper) | (false, VarState::AtLower) => t > 0.0,
                        _ => false,
                    };
                    if !eligible {
                        return None;
                    }
                    let dj = match st {
                        VarState::AtLower => self.d[j].max(0.0),
                        _ => (-self.d[j]).max(0.0),
                    };
                    Some((j, dj, t.abs()))
                })
                .collect();
            let enter = if bland {
                candidates
                    .iter()
                    .map(|&(j, dj, t)| (j, dj / t, t))
                    .fold(None, |best: Option<(usize, f64, f64)>, c| match best {
                        Some(b) if c.1 >= b.1 - 1e-12 => Some(b),
                        _ => Some(c),
                    })
            } else {
                let bound = candidates
                    .iter()
                    .map(|&(_, dj, t)| (dj + DUAL_TOL) / t)
                    .fold(f64::INFINITY, f64::min);
                candidates
                    .iter()
                    .filter(|&&(_, dj, t)| dj / t <= bound)
                    .fold(None, |best: Option<(usize, f64, f64)>, &(j, dj, t)| match best {
                        Some(b) if t <= b.2 => Some(b),
                        _ => Some((j, dj / t, t)),
                    })
            };
            let Some((q, _, _)) = enter else {
                // No stable pivot: either row `r` proves infeasibility, or
                // the tableau is stale, or the violation is within what the
                // certificate can resolve and the row counts as feasible.
                if self.certifies_infeasibility(r) {
                    return Ok(Outcome::Infeasible(r));
                }
                if self.since_refresh > 0 && self.reinvert() {
                    self.place_all_nonbasic();
                } else {
                    log::trace!("row {r} tolerated at violation {viol:e}");
                    tolerated[r] = true;
                }
                continue;
            };
            let (l, u) = self.var_bounds(self.basis[r]);
            let target = if below { l } else { u };
            let t_rq = self.tab[r * w + q];
            let delta = (self.xb[r] - target) / t_rq;
            for i in 0..m {
                let t = self.tab[i * w + q];
                if t != 0.0 {
                    self.xb[i] -= t * delta;
                }
            }
            tolerated.fill(false);
            let xq = self.x[q] + delta;
            let leaving = self.basis[r];
            self.pivot(r, q);
            self.state[q] = VarState::Basic;
            self.xb[r] = xq;
            self.x[q] = xq;
            if leaving < n {
                self.state[leaving] = if below { VarState::AtLower } else { VarState::AtUpper };
                self.x[leaving] = target;
            }
            iter += 1;
        }
    }

    pub fn point(&self) -> Vec<f64> {
        self.x.clone()
    }

    pub fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub fn objective_value(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    /// Replace the objective. Reduced costs are recomputed from the current
    /// basis and dual feasibility restored by bound flips at the next solve.
    pub fn set_objective(&mut self, c: &[f64]) -> Result<()> {
        assert_eq!(c.len(), self.n);
        self.cost = c.to_vec();
        self.refresh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(c: &[f64], a: &[&[f64]], b: &[f64], lo: &[f64], hi: &[f64]) -> LpProblem {
        let m = a.len();
        let n = c.len();
        LpProblem {
            objective: c.to_vec(),
            a: DMatrix::from_fn(m, n, |i, j| a[i][j]),
            b: b.to_vec(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    #[test]
    fn minimize_over_interval() {
        let r = lp_solve(&problem(&[1.0], &[], &[], &[-1.0], &[1.0])).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.value, -1.0);
    }

    #[test]
    fn infeasible_equality() {
        let r = lp_solve(&problem(&[0.0], &[&[1.0]], &[2.0], &[-1.0], &[1.0])).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
    }

    #[test]
    fn coupled_vertex() {
        let r = lp_solve(&problem(
            &[1.0, 1.0],
            &[&[1.0, -1.0]],
            &[0.0],
            &[-1.0, -1.0],
            &[1.0, 1.0],
        ))
        .unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value + 2.0).abs() < 1e-12);
        assert!((r.point[0] + 1.0).abs() < 1e-12 && (r.point[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_row_is_infeasible_unless_rhs_zero() {
        let r = lp_solve(&problem(&[0.0], &[&[0.0]], &[1.0], &[-1.0], &[1.0])).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
        let r = lp_solve(&problem(&[0.0], &[&[0.0]], &[0.0], &[-1.0], &[1.0])).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
    }

    #[test]
    fn rejects_infinite_bounds() {
        assert!(lp_solve(&problem(&[1.0], &[], &[], &[f64::NEG_INFINITY], &[1.0])).is_err());
    }

    #[test]
    fn reoptimise_after_bound_change() {
        // max x1 + x2 s.t. x1 + x2 + x3 = 1, x in [0, 1]^3
        let p = problem(&[-1.0, -1.0, 0.0], &[&[1.0, 1.0, 1.0]], &[1.0], &[0.0; 3], &[1.0; 3]);
        let mut s = Simplex::new(&p).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective_value() + 1.0).abs() < 1e-12);
        s.set_bounds(2, 1.0, 1.0);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!(s.objective_value().abs() < 1e-12);
        s.set_bounds(0, 1.0, 1.0);
        assert_eq!(s.solve().unwrap(), LpStatus::Infeasible);
        s.set_bounds(2, 0.0, 1.0);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective_value() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let p = problem(
            &[1.0, -2.0, 0.5, 0.0],
            &[&[1.0, 1.0, 1.0, 1.0], &[1.0, -1.0, 2.0, 0.0]],
            &[0.5, 0.25],
            &[-1.0; 4],
            &[1.0; 4],
        );
        let a = lp_solve(&p).unwrap();
        let b = lp_solve(&p).unwrap();
        assert_eq!(a.point, b.point);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
