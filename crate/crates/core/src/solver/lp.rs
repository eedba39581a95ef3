//! Dense bounded-variable primal simplex.
//!
//! Solves `min c^T x  s.t.  A x = b,  lower <= x <= upper` where bounds may be
//! infinite. Nonbasic variables sit at one of their bounds (or at zero when
//! free). Phase one minimizes the sum of one artificial per row; phase two
//! optimizes the real cost. Entering and leaving choices follow Bland's
//! rule (lowest index), so the method terminates on degenerate problems.
//!
//! The tableau `B^{-1} [A | D]` is kept explicitly and rebuilt from the
//! original data every [`REFACTOR_EVERY`] pivots and before declaring
//! optimality.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;
const RATIO_TIE_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// Program over `c.len()` variables with bounds `[0, +inf)`.
    pub fn nonnegative(c: DVector<f64>, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        let n = c.len();
        LinearProgram {
            c,
            a_eq,
            b_eq,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.a_eq.ncols() != n && self.a_eq.nrows() > 0 {
            return Err(Error::Shape(format!(
                "constraint matrix has {} columns for {n} variables",
                self.a_eq.ncols()
            )));
        }
        if self.a_eq.nrows() != self.b_eq.len() {
            return Err(Error::Shape(format!(
                "constraint matrix has {} rows but rhs has {}",
                self.a_eq.nrows(),
                self.b_eq.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Shape("bound vectors must match the variable count".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "variable {j} has invalid bounds [{l}, {u}]"
                )));
            }
        }
        if self.c.iter().chain(self.a_eq.iter()).chain(self.b_eq.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("LP data must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `max |A x - b|` at the returned point.
    pub primal_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub max_iter: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { max_iter: 200_000 }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let mut tab = Tableau::new(lp);
    let mut iterations = 0;

    // Phase one.
    let phase1_cost: Vec<f64> = (0..tab.ncols)
        .map(|j| if j >= tab.nstruct { 1.0 } else { 0.0 })
        .collect();
    tab.set_cost(phase1_cost)?;
    match tab.run(opts.max_iter, &mut iterations)? {
        Outcome::Optimal => {}
        // The phase-one objective is bounded below by zero.
        Outcome::Unbounded => return Err(Error::Lp("phase one reported unbounded".into())),
    }
    let infeasibility: f64 = (tab.nstruct..tab.ncols).map(|j| tab.x[j]).sum();
    let scale = 1.0 + lp.b_eq.amax();
    if infeasibility > FEAS_TOL * scale {
        return Ok(tab.solution(lp, LpStatus::Infeasible, iterations));
    }
    tab.retire_artificials()?;

    // Phase two.
    let mut cost = vec![0.0; tab.ncols];
    cost[..tab.nstruct].copy_from_slice(lp.c.as_slice());
    tab.set_cost(cost)?;
    let status = match tab.run(opts.max_iter, &mut iterations)? {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    Ok(tab.solution(lp, status, iterations))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    nstruct: usize,
    ncols: usize,
    /// Original `[A | D]`, where `D` holds the signed artificial columns.
    a_full: DMatrix<f64>,
    b: DVector<f64>,
    /// `B^{-1} [A | D]`, row-major.
    t: Vec<f64>,
    /// Reduced costs for the current phase.
    d: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Variables that may not enter the basis.
    frozen: Vec<bool>,
    pivots_since_refactor: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let rows = lp.a_eq.nrows();
        let nstruct = lp.c.len();
        let ncols = nstruct + rows;
        let mut x = vec![0.0; ncols];
        let mut state = vec![VarState::Zero; ncols];
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        for j in 0..nstruct {
            if lo[j].is_finite() {
                x[j] = lo[j];
                state[j] = VarState::AtLower;
            } else if hi[j].is_finite() {
                x[j] = hi[j];
                state[j] = VarState::AtUpper;
            }
        }
        // Residual of the starting point decides the artificial signs.
        let mut a_full = DMatrix::zeros(rows, ncols);
        if rows > 0 {
            a_full.columns_mut(0, nstruct).copy_from(&lp.a_eq);
        }
        let xs = DVector::from_column_slice(&x[..nstruct]);
        let r = if rows > 0 { &lp.b_eq - &lp.a_eq * xs } else { DVector::zeros(0) };
        let mut basis = Vec::with_capacity(rows);
        for i in 0..rows {
            let j = nstruct + i;
            let sign = if r[i] < 0.0 { -1.0 } else { 1.0 };
            a_full[(i, j)] = sign;
            x[j] = r[i].abs();
            state[j] = VarState::Basic;
            basis.push(j);
        }
        lo.extend(std::iter::repeat_n(0.0, rows));
        hi.extend(std::iter::repeat_n(f64::INFINITY, rows));
        Tableau {
            rows,
            nstruct,
            ncols,
            a_full,
            b: lp.b_eq.clone(),
            t: vec![0.0; rows * ncols],
            d: vec![0.0; ncols],
            cost: vec![0.0; ncols],
            basis,
            state,
            x,
            lo,
            hi,
            frozen: vec![false; ncols],
            pivots_since_refactor: 0,
        }
    }

    fn set_cost(&mut self, cost: Vec<f64>) -> Result<()> {
        self.cost = cost;
        self.refactor()
    }

    /// Rebuilds `B^{-1}[A|D]`, the basic values and the reduced costs from
    /// the original data.
    fn refactor(&mut self) -> Result<()> {
        self.pivots_since_refactor = 0;
        if self.rows == 0 {
            self.d.copy_from_slice(&self.cost);
            return Ok(());
        }
        let bmat = DMatrix::from_fn(self.rows, self.rows, |i, k| self.a_full[(i, self.basis[k])]);
        let lu = bmat.lu();
        let tmat = lu
            .solve(&self.a_full)
            .ok_or_else(|| Error::Lp("basis matrix became singular".into()))?;
        for i in 0..self.rows {
            for j in 0..self.ncols {
                self.t[i * self.ncols + j] = tmat[(i, j)];
            }
        }
        let mut rhs = self.b.clone();
        for j in 0..self.ncols {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for i in 0..self.rows {
                    rhs[i] -= self.a_full[(i, j)] * self.x[j];
                }
            }
        }
        let xb = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Lp("basis matrix became singular".into()))?;
        for (i, &bv) in self.basis.iter().enumerate() {
            self.x[bv] = xb[i];
        }
        for j in 0..self.ncols {
            let mut dj = self.cost[j];
            for i in 0..self.rows {
                dj -= self.cost[self.basis[i]] * self.t[i * self.ncols + j];
            }
            self.d[j] = dj;
        }
        for &bv in &self.basis {
            self.d[bv] = 0.0;
        }
        Ok(())
    }

    /// Lowest-index improving nonbasic variable and its direction.
    fn entering(&self) -> Option<(usize, f64)> {
        (0..self.ncols).find_map(|j| {
            if self.frozen[j] {
                return None;
            }
            let dj = self.d[j];
            match self.state[j] {
                VarState::Basic => None,
                VarState::AtLower if dj < -DUAL_TOL && self.hi[j] > self.lo[j] => Some((j, 1.0)),
                VarState::AtUpper if dj > DUAL_TOL && self.hi[j] > self.lo[j] => Some((j, -1.0)),
                VarState::Zero if dj < -DUAL_TOL => Some((j, 1.0)),
                VarState::Zero if dj > DUAL_TOL => Some((j, -1.0)),
                _ => None,
            }
        })
    }

    fn run(&mut self, max_iter: usize, iterations: &mut usize) -> Result<Outcome> {
        loop {
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let Some((j, dir)) = self.entering() else {
                if self.pivots_since_refactor > 0 {
                    self.refactor()?;
                    if self.entering().is_some() {
                        continue;
                    }
                }
                return Ok(Outcome::Optimal);
            };
            if *iterations >= max_iter {
                return Err(Error::Lp(format!("iteration limit {max_iter} reached")));
            }
            *iterations += 1;

            // Ratio test; `None` means the entering variable hits its own bound.
            let mut theta = self.hi[j] - self.lo[j];
            let mut leave: Option<usize> = None;
            for i in 0..self.rows {
                let alpha = dir * self.t[i * self.ncols + j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let bv = self.basis[i];
                let limit = if alpha > 0.0 {
                    if self.lo[bv].is_finite() {
                        (self.x[bv] - self.lo[bv]) / alpha
                    } else {
                        continue;
                    }
                } else if self.hi[bv].is_finite() {
                    (self.hi[bv] - self.x[bv]) / -alpha
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = if limit < theta - RATIO_TIE_TOL {
                    true
                } else if limit <= theta + RATIO_TIE_TOL {
                    matches!(leave, Some(r) if bv < self.basis[r])
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leave = Some(i);
                }
            }
            if !theta.is_finite() {
                return Ok(Outcome::Unbounded);
            }

            if theta != 0.0 {
                self.x[j] += dir * theta;
                for i in 0..self.rows {
                    let bv = self.basis[i];
                    self.x[bv] -= dir * theta * self.t[i * self.ncols + j];
                }
            }
            match leave {
                None => {
                    if dir > 0.0 {
                        self.x[j] = self.hi[j];
                        self.state[j] = VarState::AtUpper;
                    } else {
                        self.x[j] = self.lo[j];
                        self.state[j] = VarState::AtLower;
                    }
                }
                Some(r) => {
                    let bv = self.basis[r];
                    if dir * self.t[r * self.ncols + j] > 0.0 {
                        self.x[bv] = self.lo[bv];
                        self.state[bv] = VarState::AtLower;
                    } else {
                        self.x[bv] = self.hi[bv];
                        self.state[bv] = VarState::AtUpper;
                    }
                    self.pivot(r, j);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let piv = self.t[r * nc + j];
        for k in 0..nc {
            self.t[r * nc + k] /= piv;
        }
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        for row in before.chunks_mut(nc).chain(after.chunks_mut(nc)) {
            let f = row[j];
            if f != 0.0 {
                for k in 0..nc {
                    row[k] -= f * prow[k];
                }
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for k in 0..nc {
                self.d[k] -= f * prow[k];
            }
        }
        self.d[j] = 0.0;
        self.basis[r] = j;
        self.state[j] = VarState::Basic;
        self.pivots_since_refactor += 1;
    }

    /// Pivots zero-valued artificials out of the basis where possible and
    /// fixes every artificial at zero for phase two.
    fn retire_artificials(&mut self) -> Result<()> {
        for r in 0..self.rows {
            let bv = self.basis[r];
            if bv < self.nstruct {
                continue;
            }
            let row = &self.t[r * self.ncols..r * self.ncols + self.nstruct];
            let best = (0..self.nstruct)
                .filter(|&k| self.state[k] != VarState::Basic)
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            if let Some(k) = best {
                if row[k].abs() > PIVOT_TOL {
                    self.state[bv] = VarState::AtLower;
                    self.x[bv] = 0.0;
                    self.pivot(r, k);
                }
            }
            // Otherwise the row is redundant; the artificial stays basic at zero.
        }
        for j in self.nstruct..self.ncols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            self.frozen[j] = true;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::AtLower;
                self.x[j] = 0.0;
            }
        }
        self.refactor()
    }

    fn solution(&self, lp: &LinearProgram, status: LpStatus, iterations: usize) -> LpSolution {
        let x = DVector::from_column_slice(&self.x[..self.nstruct]);
        let primal_residual = if self.rows > 0 {
            (&lp.a_eq * &x - &lp.b_eq).amax()
        } else {
            0.0
        };
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => lp.c.dot(&x),
        };
        LpSolution {
            status,
            x,
            objective,
            iterations,
            primal_residual,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn single_bounded_variable() {
        let lp = LinearProgram {
            c: dvector![1.0],
            a_eq: DMatrix::zeros(0, 1),
            b_eq: DVector::zeros(0),
            lower: vec![1.0],
            upper: vec![f64::INFINITY],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.x[0], 1.0);
        assert_eq!(sol.objective, 1.0);
    }

    #[test]
    fn forced_objective() {
        let lp = LinearProgram::nonnegative(dvector![1.0, 1.0], dmatrix![1.0, 1.0], dvector![1.0]);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!(sol.primal_residual < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // x1 + x2 = -1 with x >= 0
        let lp = LinearProgram::nonnegative(dvector![1.0, 1.0], dmatrix![1.0, 1.0], dvector![-1.0]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // min -x1 s.t. x1 - x2 = 0, x >= 0
        let lp = LinearProgram::nonnegative(dvector![-1.0, 0.0], dmatrix![1.0, -1.0], dvector![0.0]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);

        let free = LinearProgram {
            c: dvector![1.0],
            a_eq: DMatrix::zeros(0, 1),
            b_eq: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY],
            upper: vec![f64::INFINITY],
        };
        assert_eq!(solve_lp(&free).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn upper_bounds_and_free_variables() {
        // min -x - 2y + z  s.t. x + y + z = 3, 0<=x<=1, 0<=y<=1, z free
        let lp = LinearProgram {
            c: dvector![-1.0, -2.0, 1.0],
            a_eq: dmatrix![1.0, 1.0, 1.0],
            b_eq: dvector![3.0],
            lower: vec![0.0, 0.0, f64::NEG_INFINITY],
            upper: vec![1.0, 1.0, f64::INFINITY],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - (-2.0)).abs() < 1e-12, "{sol:?}");
    }

    #[test]
    fn redundant_rows() {
        let lp = LinearProgram::nonnegative(
            dvector![1.0, 2.0],
            dmatrix![1.0, 1.0; 2.0, 2.0],
            dvector![1.0, 2.0],
        );
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_input_errors() {
        let lp = LinearProgram::nonnegative(dvector![1.0, 1.0], dmatrix![1.0], dvector![1.0]);
        assert!(solve_lp(&lp).is_err());
        let mut lp = LinearProgram::nonnegative(dvector![1.0], dmatrix![1.0], dvector![1.0]);
        lp.lower[0] = 2.0;
        lp.upper[0] = 1.0;
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling example (converted to equality form).
        let a = dmatrix![
            0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0;
            0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0;
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0
        ];
        let lp = LinearProgram::nonnegative(
            dvector![-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0],
            a,
            dvector![0.0, 0.0, 1.0],
        );
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - (-1.25)).abs() < 1e-10, "{sol:?}");
    }
}
