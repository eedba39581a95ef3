//! Two-block proximal splitting for `min_A phi(Y - A X)`.
//!
//! The problem is rewritten with a residual variable `R` and the constraint
//! `A X + R = Y`. Each sweep does a least-squares update of `A`, a
//! column-wise proximal update of `R` and a scaled dual update of `U`. The
//! penalty `rho` is balanced against the residual ratio, and the final
//! iterate is polished by refitting on the columns the loss treats as exact.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::crossover::lad_vertex_descent;
use super::prox::prox_in_place;
use crate::data::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::linalg::{least_squares_rows, numerical_rank, select_columns, singular_values};
use crate::loss::{phi_unchecked, InnerNorm, LossSpec};

/// Iterations between attempts to certify an interpolating point.
const CERTIFY_EVERY: usize = 20;
/// Residual balancing runs every `BALANCE_EVERY` iterations and is frozen
/// after `BALANCE_UNTIL` so that the iteration settles.
const BALANCE_EVERY: usize = 10;
const BALANCE_UNTIL: usize = 2000;
/// Residual columns below this (relative to the data column) count as fitted.
const ZERO_RESIDUAL_RTOL: f64 = 1e-9;
const DUAL_FEAS_TOL: f64 = 1e-9;

/// Splitting-solver settings, serialized as
/// `{"max_iter": 20000, "tol_abs": 1e-9, "tol_rel": 1e-8, "seed": 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOpts {
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Initial penalty parameter; the proximal step is its inverse.
    pub step: f64,
    /// Seed for the second start used by the uniqueness diagnostic.
    pub seed: u64,
    pub check_uniqueness: bool,
    /// Residual columns whose loss norm exceeds `eps0 + outlier_tol` are
    /// reported as estimated outliers.
    pub outlier_tol: f64,
    pub polish: bool,
    /// Keep a per-iteration record of residuals and the fixed-point merit.
    pub record_trace: bool,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            max_iter: 20_000,
            tol_abs: 1e-9,
            tol_rel: 1e-8,
            step: 1.0,
            seed: 0,
            check_uniqueness: true,
            outlier_tol: 1e-6,
            polish: true,
            record_trace: false,
        }
    }
}

impl SolverOpts {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tol_abs) || !positive(self.tol_rel) {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        if !positive(self.step) {
            return Err(Error::InvalidArgument("solver step must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.outlier_tol >= 0.0) {
            return Err(Error::InvalidArgument("outlier_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One sweep of the splitting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub rho: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `rho * (||R_k - R_{k-1}||^2 + ||U_k - U_{k-1}||^2)`; non-increasing
    /// while `rho` is held fixed.
    pub merit: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    #[serde(serialize_with = "ser_matrix")]
    pub a_star: DMatrix<f64>,
    pub objective: f64,
    #[serde(skip)]
    pub residuals: DMatrix<f64>,
    pub outlier_estimate: IndexSet,
    pub converged: bool,
    pub iterations: usize,
    pub polished: bool,
    /// The returned point passed an exact subgradient optimality check.
    pub certified_optimal: bool,
    /// Largest entry-wise gap to a minimizer computed from a random start.
    pub uniqueness_gap: Option<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    #[serde(skip)]
    pub trace: Vec<IterRecord>,
}

pub(crate) fn ser_matrix<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

/// Minimizes `phi(Y - A X)` over `A`.
pub fn solve_regression(d: &Dataset, spec: &LossSpec, opts: &SolverOpts) -> Result<EstimatorResult> {
    spec.validate()?;
    opts.validate()?;
    check_regressor_rank(d.x())?;
    let problem = Problem::new(d, spec)?;

    let a_ls = least_squares_rows(d.y(), d.x())
        .ok_or_else(|| Error::Rank("X X^T is not positive definite".into()))?;
    let mut run = problem.run(a_ls.clone(), opts);

    if opts.check_uniqueness {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let scale = a_ls.amax().max(1.0);
        let start = DMatrix::from_fn(d.m(), d.n(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        });
        let other = problem.run(start, &SolverOpts { record_trace: false, ..opts.clone() });
        run.uniqueness_gap = Some((&run.a_star - &other.a_star).amax());
    }
    Ok(run)
}

/// Rejects regressor matrices whose column-normalized version has a
/// smallest singular value at or below `1e-10`.
pub fn check_regressor_rank(x: &DMatrix<f64>) -> Result<()> {
    let (n, big_n) = x.shape();
    if big_n < n {
        return Err(Error::Rank(format!("X has {big_n} columns for {n} rows")));
    }
    let mut xn = x.clone();
    for mut c in xn.column_iter_mut() {
        let nrm = c.norm();
        if nrm > 0.0 {
            c.unscale_mut(nrm);
        }
    }
    let sv = singular_values(&xn);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if sv.len() < n || !(smin > 1e-10) {
        return Err(Error::Rank(format!(
            "regressor matrix is rank deficient (smallest singular value {smin:e} after column normalization)"
        )));
    }
    Ok(())
}

struct Problem<'a> {
    y: &'a DMatrix<f64>,
    x: &'a DMatrix<f64>,
    spec: LossSpec,
    /// `X^T (X X^T)^{-1}`, so that the `A` update is `(Y - R - U) * proj`.
    proj: DMatrix<f64>,
}

impl<'a> Problem<'a> {
    fn new(d: &'a Dataset, spec: &LossSpec) -> Result<Self> {
        let x = d.x();
        let chol = (x * x.transpose())
            .cholesky()
            .ok_or_else(|| Error::Rank("X X^T is not positive definite".into()))?;
        let proj = chol.solve(x).transpose();
        Ok(Problem {
            y: d.y(),
            x,
            spec: *spec,
            proj,
        })
    }

    fn objective(&self, a: &DMatrix<f64>) -> f64 {
        phi_unchecked(&self.spec, &(self.y - a * self.x))
    }

    fn run(&self, a_init: DMatrix<f64>, opts: &SolverOpts) -> EstimatorResult {
        let (m, big_n) = self.y.shape();
        let n = self.x.nrows();
        let y = self.y;
        let x = self.x;

        let mut a = a_init;
        let mut ax = &a * x;
        let mut r = y - &ax;
        let mut u = DMatrix::<f64>::zeros(m, big_n);
        let mut rho = opts.step;
        let mut zero_cols = vec![false; big_n];
        let mut converged = false;
        let mut certified: Option<DMatrix<f64>> = None;
        let try_certify = opts.polish && self.spec.eps0 == 0.0;
        let mut iterations = 0;
        let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
        let mut trace = Vec::new();
        let y_norm = y.norm();
        let sqrt_mn_big = ((m * big_n) as f64).sqrt();
        let sqrt_mn = ((m * n) as f64).sqrt();

        let mut w = DMatrix::<f64>::zeros(m, big_n);
        let mut col = nalgebra::DVector::<f64>::zeros(m);
        for k in 0..opts.max_iter {
            iterations = k + 1;
            // A-update
            w.copy_from(y);
            w -= &r;
            w -= &u;
            w.mul_to(&self.proj, &mut a);
            a.mul_to(x, &mut ax);

            // R-update: column-wise prox of Y - AX - U with step 1/rho
            let r_old = r.clone();
            for t in 0..big_n {
                for i in 0..m {
                    col[i] = y[(i, t)] - ax[(i, t)] - u[(i, t)];
                }
                zero_cols[t] = prox_in_place(&self.spec, &mut col, 1.0 / rho);
                r.set_column(t, &col);
            }

            // U-update
            let u_old = u.clone();
            u += &ax;
            u += &r;
            u -= y;

            let primal = &u - &u_old;
            r_norm = primal.norm();
            let dr = &r - &r_old;
            s_norm = rho * (&dr * x.transpose()).norm();
            if opts.record_trace {
                trace.push(IterRecord {
                    iteration: k,
                    rho,
                    primal_residual: r_norm,
                    dual_residual: s_norm,
                    merit: rho * (dr.norm_squared() + primal.norm_squared()),
                    objective: self.objective(&a),
                });
            }

            let eps_pri = sqrt_mn_big * opts.tol_abs
                + opts.tol_rel * ax.norm().max(r.norm()).max(y_norm);
            let eps_dual = sqrt_mn * opts.tol_abs + opts.tol_rel * rho * (&u * x.transpose()).norm();
            if r_norm <= eps_pri && s_norm <= eps_dual {
                converged = true;
                break;
            }
            if try_certify && (k + 1) % CERTIFY_EVERY == 0 {
                if let Some(c) = self.certified_vertex(&a, &zero_cols) {
                    certified = Some(c);
                    converged = true;
                    break;
                }
            }

            if k % BALANCE_EVERY != 0 || k >= BALANCE_UNTIL {
                continue;
            }
            if r_norm > 10.0 * s_norm {
                rho *= 2.0;
                u /= 2.0;
            } else if s_norm > 10.0 * r_norm {
                rho /= 2.0;
                u *= 2.0;
            }
        }

        let mut best = a;
        let mut best_obj = self.objective(&best);
        let mut polished = false;
        let mut optimal = false;
        if let Some(c) = certified {
            best_obj = self.objective(&c);
            best = c;
            polished = true;
            optimal = true;
        } else if opts.polish {
            if let Some((cand, obj)) = self.polish(&best, &zero_cols) {
                if obj <= best_obj {
                    best = cand;
                    best_obj = obj;
                    polished = true;
                }
            }
            optimal = try_certify && self.vertex_is_optimal(&best);
            if !optimal && self.rows_decouple() {
                if let Some((cand, obj, exact)) = self.crossover(&best) {
                    if obj <= best_obj {
                        best = cand;
                        best_obj = obj;
                        polished = true;
                        optimal = exact;
                    }
                }
            }
        }

        let residuals = y - &best * x;
        let objective = phi_unchecked(&self.spec, &residuals);
        debug_assert!((objective - best_obj).abs() <= 1e-12 * objective.max(1.0));
        let threshold = self.spec.eps0 + opts.outlier_tol;
        let outlier_estimate = IndexSet::from_indices(
            residuals
                .column_iter()
                .enumerate()
                .filter(|(_, c)| self.spec.inner.norm(c.as_view()) > threshold)
                .map(|(t, _)| t)
                .collect(),
        );
        EstimatorResult {
            a_star: best,
            objective,
            residuals,
            outlier_estimate,
            converged,
            iterations,
            polished,
            certified_optimal: optimal,
            uniqueness_gap: None,
            primal_residual: r_norm,
            dual_residual: s_norm,
            trace,
        }
    }

    /// Interpolates `n` columns that look exact at `a` and returns the fit if
    /// it passes [`Self::vertex_is_optimal`].
    fn certified_vertex(&self, a: &DMatrix<f64>, zero_cols: &[bool]) -> Option<DMatrix<f64>> {
        let n = self.x.nrows();
        let mut sets: Vec<Vec<usize>> = Vec::with_capacity(2);
        let zeros: Vec<usize> = (0..zero_cols.len()).filter(|&t| zero_cols[t]).collect();
        if zeros.len() == n {
            sets.push(zeros);
        }
        let resid = self.y - a * self.x;
        let norms: Vec<f64> = resid.column_iter().map(|c| self.spec.inner.norm(c)).collect();
        let mut order: Vec<usize> = (0..norms.len()).collect();
        order.sort_by(|&i, &j| norms[i].total_cmp(&norms[j]));
        order.truncate(n);
        order.sort_unstable();
        if sets.first() != Some(&order) {
            sets.push(order);
        }
        sets.into_iter().find_map(|cols| {
            let xz = select_columns(self.x, &cols);
            let cand = xz.transpose().lu().solve(&select_columns(self.y, &cols).transpose())?;
            let cand = cand.transpose();
            self.vertex_is_optimal(&cand).then_some(cand)
        })
    }

    /// Exact optimality test for a point fitting exactly `n` columns `Z` with
    /// invertible `X_Z`, when every other residual is nonzero and the norm is
    /// differentiable there. The subgradients on `Z` are then forced to
    /// `G = -S X_Z^{-T}` with `S = sum_{t not in Z} grad ||r_t|| x_t^T`, and
    /// the point is a minimizer iff every column of `G` has dual norm at most one.
    fn vertex_is_optimal(&self, a: &DMatrix<f64>) -> bool {
        let (n, m) = (self.x.nrows(), self.y.nrows());
        let resid = self.y - a * self.x;
        let mut zeros = Vec::with_capacity(n);
        let mut s = DMatrix::<f64>::zeros(m, n);
        for (t, r) in resid.column_iter().enumerate() {
            let h = self.spec.inner.norm(r);
            let scale = self.spec.inner.norm(self.y.column(t)).max(1.0);
            if h <= ZERO_RESIDUAL_RTOL * scale {
                zeros.push(t);
                if zeros.len() > n {
                    return false;
                }
                continue;
            }
            let Some(g) = norm_gradient(self.spec.inner, &r.into_owned()) else {
                return false;
            };
            s += g * self.x.column(t).transpose();
        }
        if zeros.len() != n {
            return false;
        }
        let xz = select_columns(self.x, &zeros);
        let Some(gt) = xz.lu().solve(&(-s.transpose())) else {
            return false;
        };
        gt.row_iter()
            .all(|g| dual_norm(self.spec.inner, &g.transpose()) <= 1.0 + DUAL_FEAS_TOL)
    }

    /// With `eps0 = 0` the objective splits into independent least absolute
    /// deviation problems, one per row of `A`, when `m = 1` or `p = 1`.
    fn rows_decouple(&self) -> bool {
        self.spec.eps0 == 0.0 && (self.y.nrows() == 1 || self.spec.inner == InnerNorm::L1)
    }

    /// Runs the vertex descent on every row of `A`, starting from the `n`
    /// independent columns with the smallest residuals in that row.
    fn crossover(&self, a: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64, bool)> {
        let (n, big_n) = self.x.shape();
        let resid = self.y - a * self.x;
        let mut out = a.clone();
        let mut exact = true;
        for i in 0..self.y.nrows() {
            let mut order: Vec<usize> = (0..big_n).collect();
            order.sort_by(|&s, &t| resid[(i, s)].abs().total_cmp(&resid[(i, t)].abs()));
            let mut basis: Vec<usize> = Vec::with_capacity(n);
            for t in order {
                basis.push(t);
                if numerical_rank(&select_columns(self.x, &basis)) < basis.len() {
                    basis.pop();
                } else if basis.len() == n {
                    break;
                }
            }
            if basis.len() < n {
                return None;
            }
            let v = lad_vertex_descent(&self.y.row(i).into_owned(), self.x, &basis, 20 * big_n)?;
            debug_assert!(v.objective.is_finite());
            exact &= v.optimal;
            out.set_row(i, &v.theta);
        }
        let obj = self.objective(&out);
        obj.is_finite().then_some((out, obj, exact))
    }

    /// Refits `A` exactly on candidate sets of columns the loss should fit
    /// perfectly and returns the best candidate.
    fn polish(&self, a: &DMatrix<f64>, zero_cols: &[bool]) -> Option<(DMatrix<f64>, f64)> {
        let n = self.x.nrows();
        let mut candidates: Vec<Vec<usize>> = Vec::new();

        let zeros: Vec<usize> = (0..zero_cols.len()).filter(|&t| zero_cols[t]).collect();
        if zeros.len() >= n {
            candidates.push(zeros);
        }

        // The n columns with the smallest residuals, grown until X_Z has full rank.
        let resid = self.y - a * self.x;
        let mut order: Vec<usize> = (0..resid.ncols()).collect();
        let norms: Vec<f64> = resid.column_iter().map(|c| self.spec.inner.norm(c)).collect();
        order.sort_by(|&i, &j| norms[i].total_cmp(&norms[j]));
        let mut take = n;
        while take <= order.len() {
            let cols = &order[..take];
            if numerical_rank(&select_columns(self.x, cols)) == n {
                candidates.push(cols.to_vec());
                break;
            }
            take += 1;
        }

        candidates
            .into_iter()
            .filter_map(|cols| {
                let xz = select_columns(self.x, &cols);
                let yz = select_columns(self.y, &cols);
                let cand = svd_fit(&yz, &xz)?;
                let obj = self.objective(&cand);
                obj.is_finite().then_some((cand, obj))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn norm_gradient(p: InnerNorm, r: &DVector<f64>) -> Option<DVector<f64>> {
    match p {
        InnerNorm::L2 => Some(r / r.norm()),
        InnerNorm::L1 => r
            .iter()
            .all(|v| *v != 0.0)
            .then(|| r.map(f64::signum)),
        InnerNorm::LInf => {
            let top = r.amax();
            let mut hits = r.iter().enumerate().filter(|(_, v)| v.abs() >= top * (1.0 - 1e-12));
            let (i, v) = hits.next()?;
            if hits.next().is_some() {
                return None;
            }
            let mut g = DVector::zeros(r.len());
            g[i] = v.signum();
            Some(g)
        }
    }
}

fn dual_norm(p: InnerNorm, g: &DVector<f64>) -> f64 {
    match p {
        InnerNorm::L1 => g.amax(),
        InnerNorm::L2 => g.norm(),
        InnerNorm::LInf => g.lp_norm(1),
    }
}

/// Least-squares fit of `A X_Z = Y_Z` through an SVD of `X_Z^T`, which
/// avoids squaring the condition number on nearly square subsets.
fn svd_fit(yz: &DMatrix<f64>, xz: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = xz.transpose().svd(true, true);
    let tol = crate::linalg::RANK_RTOL * svd.singular_values.max();
    svd.solve(&yz.transpose(), tol).ok().map(|at| at.transpose())
}
