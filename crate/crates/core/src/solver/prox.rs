//! Proximal map of `step * max(0, ||z||_p - eps0)`.
//!
//! Writing `g(z) = max(0, h(z) - eps0)` for a norm `h`, the minimizer of
//! `0.5 ||z - v||^2 + step * g(z)` is
//!
//! * `v` itself when `h(v) <= eps0`,
//! * `prox_{step h}(v)` when that point still satisfies `h >= eps0`,
//! * otherwise the projection of `v` onto the ball `{h <= eps0}`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::loss::{InnerNorm, LossSpec};

/// Exact proximal point of the column loss described by `spec`.
pub fn prox_column_loss(spec: &LossSpec, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("prox step must be positive, got {step}")));
    }
    spec.validate()?;
    let mut out = v.clone();
    prox_in_place(spec, &mut out, step);
    Ok(out)
}

/// In-place variant used by the splitting solver. Returns true when the
/// result is exactly zero.
pub(crate) fn prox_in_place(spec: &LossSpec, v: &mut DVector<f64>, step: f64) -> bool {
    let eps = spec.eps0;
    let h = spec.inner.norm(v.as_view());
    if h <= eps {
        return h == 0.0;
    }
    match spec.inner {
        InnerNorm::L2 => {
            let target = if h > eps + step { h - step } else { eps };
            if target <= 0.0 {
                v.fill(0.0);
                return true;
            }
            v.scale_mut(target / h);
            false
        }
        InnerNorm::L1 => {
            let mut w = v.clone();
            soft_threshold(&mut w, step);
            if InnerNorm::L1.norm(w.as_view()) >= eps {
                v.copy_from(&w);
            } else {
                project_l1_ball(v, eps);
            }
            v.iter().all(|x| *x == 0.0)
        }
        InnerNorm::LInf => {
            // prox of step*||.||_inf is v minus its projection on the l1 ball of radius step.
            let mut w = v.clone();
            let mut p = v.clone();
            project_l1_ball(&mut p, step);
            w -= &p;
            if w.amax() >= eps {
                v.copy_from(&w);
            } else {
                v.apply(|x| *x = x.clamp(-eps, eps));
            }
            v.iter().all(|x| *x == 0.0)
        }
    }
}

fn soft_threshold(v: &mut DVector<f64>, t: f64) {
    v.apply(|x| *x = x.signum() * (x.abs() - t).max(0.0));
}

/// Euclidean projection onto `{z : ||z||_1 <= radius}` (sort-based).
pub(crate) fn project_l1_ball(v: &mut DVector<f64>, radius: f64) {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return;
    }
    if radius <= 0.0 {
        v.fill(0.0);
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if m > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    soft_threshold(v, theta);
}
