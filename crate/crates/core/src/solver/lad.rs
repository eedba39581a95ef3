//! Least absolute deviations through its linear-programming form.
//!
//! For a single output, `min_theta sum_t |y_t - theta^T x_t|` becomes
//!
//! ```text
//! min  sum_t (u_t + v_t)
//! s.t. theta^T x_t + u_t - v_t = y_t,   u, v >= 0,   theta free.
//! ```

use nalgebra::{DMatrix, DVector};

use super::lp::{solve_lp, LinearProgram, LpStatus};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LadSolution {
    pub theta: DVector<f64>,
    pub objective: f64,
}

/// Solves the single-output LAD problem exactly with the simplex solver.
pub fn lad_lp(d: &Dataset) -> Result<LadSolution> {
    if d.m() != 1 {
        return Err(Error::Shape(format!("LAD needs a single output row, got {}", d.m())));
    }
    let (n, big_n) = (d.n(), d.len());
    let nv = n + 2 * big_n;
    let mut a = DMatrix::<f64>::zeros(big_n, nv);
    for t in 0..big_n {
        for i in 0..n {
            a[(t, i)] = d.x()[(i, t)];
        }
        a[(t, n + t)] = 1.0;
        a[(t, n + big_n + t)] = -1.0;
    }
    let mut c = DVector::<f64>::from_element(nv, 1.0);
    c.rows_mut(0, n).fill(0.0);
    let mut lp = LinearProgram::nonnegative(c, a, d.y().row(0).transpose());
    for i in 0..n {
        lp.lower[i] = f64::NEG_INFINITY;
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("LAD program ended with status {:?}", sol.status)));
    }
    Ok(LadSolution {
        theta: sol.x.rows(0, n).into_owned(),
        objective: sol.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn median() {
        let d = Dataset::new(dmatrix![1.0, 2.0, 10.0], dmatrix![1.0, 1.0, 1.0]).unwrap();
        let sol = lad_lp(&d).unwrap();
        assert!((sol.theta[0] - 2.0).abs() < 1e-12);
        assert!((sol.objective - 9.0).abs() < 1e-12);
    }

    #[test]
    fn line_through_inliers() {
        // y = 2 x + 1 on four points, one gross outlier.
        let d = Dataset::new(
            dmatrix![1.0, 3.0, 5.0, 7.0, 100.0],
            dmatrix![0.0, 1.0, 2.0, 3.0, 4.0; 1.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let sol = lad_lp(&d).unwrap();
        assert!((sol.theta[0] - 2.0).abs() < 1e-10);
        assert!((sol.theta[1] - 1.0).abs() < 1e-10);
        assert!((sol.objective - 91.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_multi_output() {
        let d = Dataset::new(dmatrix![1.0, 2.0; 3.0, 4.0], dmatrix![1.0, 1.0]).unwrap();
        assert!(lad_lp(&d).is_err());
    }
}
