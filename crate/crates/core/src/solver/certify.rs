//! Independent re-evaluation of a candidate point.
//!
//! Log-determinants here go through [`linalg::log2_det`] (realified
//! factorization) rather than the barrier's complex factorization.

use super::{Constraint, DcSubproblem, Point};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Largest relative violation over all constraints and matrix floors.
    pub max_violation: f64,
    pub objective: f64,
    /// Index of the most violated constraint, if any is violated.
    pub worst: Option<usize>,
}

fn check_shapes(prob: &DcSubproblem, point: &Point) -> Result<()> {
    if point.scalars.len() != prob.num_scalars || point.matrices.len() != prob.matrices.len() {
        return Err(Error::DimensionMismatch("point does not match the variable catalog".into()));
    }
    for (m, var) in point.matrices.iter().zip(&prob.matrices) {
        if m.shape() != (var.dim, var.dim) {
            return Err(Error::DimensionMismatch(format!("matrix variable of shape {:?}, expected {}", m.shape(), var.dim)));
        }
    }
    Ok(())
}

/// Log-det argument `base + Σ K X K†` at `point`.
pub(crate) fn logdet_argument(base: &CMat, terms: &[super::LogDetTerm], point: &Point) -> CMat {
    let mut a = base.clone();
    for t in terms {
        a += linalg::congruence(&t.map, &point.matrices[t.var]);
    }
    linalg::hermitize(&a)
}

pub fn certify(prob: &DcSubproblem, point: &Point) -> Result<Certificate> {
    check_shapes(prob, point)?;
    let mut worst = None;
    let mut max_violation: f64 = 0.0;
    for (idx, c) in prob.constraints.iter().enumerate() {
        let (value, scale) = match c {
            Constraint::Linear { form, .. } => (form.eval(point), form.constant.abs().max(1.0)),
            Constraint::LogDet { affine, base, terms, .. } => {
                let arg = logdet_argument(base, terms, point);
                let ld = linalg::log2_det(&arg).unwrap_or(f64::NEG_INFINITY);
                let lhs = affine.eval(point);
                (lhs - ld, lhs.abs().max(ld.abs()).max(1.0))
            }
        };
        let v = if value.is_nan() { f64::INFINITY } else { value.max(0.0) / scale };
        if v > max_violation {
            max_violation = v;
            worst = Some(idx);
        }
    }
    for (m, var) in point.matrices.iter().zip(&prob.matrices) {
        let (lo, hi) = linalg::eigen_range(m);
        let scale = hi.abs().max(var.floor).max(1e-300);
        let v = (var.floor - lo).max(0.0) / scale;
        if v > 1e-9 && v > max_violation {
            max_violation = v;
            worst = None;
        }
    }
    Ok(Certificate { max_violation, objective: prob.objective.eval(point), worst })
}
