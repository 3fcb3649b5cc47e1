//! Log-barrier interior-point solver for the convex subproblems produced by
//! the concave-convex procedure.
//!
//! A [`DcSubproblem`] maximizes a linear objective over real scalars and
//! Hermitian matrix variables `X ⪰ floor·I`, subject to linear inequalities
//! and log-det inequalities `affine(x) − log2 det(A0 + Σ_t K_t X_t K_t†) ≤ 0`.

mod barrier;
mod certify;

pub use barrier::{solve, solve_with};
pub use certify::{certify, Certificate};

use crate::linalg::CMat;

/// Hermitian matrix variable constrained to `X ⪰ floor·I` (strictly, inside
/// the barrier).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixVar {
    pub dim: usize,
    pub floor: f64,
}

/// `constant + Σ a_j x_j + Σ Re tr(C_v X_v)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub constant: f64,
    pub scalars: Vec<(usize, f64)>,
    pub matrices: Vec<(usize, CMat)>,
}

impl LinearForm {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Default::default() }
    }

    pub fn scalar(mut self, index: usize, coef: f64) -> Self {
        self.scalars.push((index, coef));
        self
    }

    pub fn matrix(mut self, var: usize, coef: CMat) -> Self {
        self.matrices.push((var, coef));
        self
    }

    pub fn add_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, point: &Point) -> f64 {
        let mut v = self.constant;
        for &(j, a) in &self.scalars {
            v += a * point.scalars[j];
        }
        for (var, c) in &self.matrices {
            v += (c * &point.matrices[*var]).trace().re;
        }
        v
    }
}

/// `K X_var K†` inside a log-det argument.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDetTerm {
    pub var: usize,
    pub map: CMat,
}

/// What a constraint models, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Epigraph,
    RateCap,
    NonNegative,
    Rate,
    Fronthaul,
    Power,
    Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `form ≤ 0`.
    Linear { form: LinearForm, kind: ConstraintKind },
    /// `affine − log2 det(base + Σ K_t X_t K_t†) ≤ 0`.
    LogDet { affine: LinearForm, base: CMat, terms: Vec<LogDetTerm>, kind: ConstraintKind },
}

impl Constraint {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            Constraint::Linear { kind, .. } | Constraint::LogDet { kind, .. } => *kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcSubproblem {
    pub num_scalars: usize,
    pub matrices: Vec<MatrixVar>,
    /// Maximized.
    pub objective: LinearForm,
    pub constraints: Vec<Constraint>,
}

/// Values of all scalar and matrix variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub scalars: Vec<f64>,
    pub matrices: Vec<CMat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub status: SolveStatus,
    /// Newton steps including the feasibility phase.
    pub iterations: usize,
    pub objective: f64,
    pub max_violation: f64,
    /// Duality-gap bound `ν·μ` of the final barrier stage.
    pub gap: f64,
    /// One line per Newton step when tracing is enabled.
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub mu_initial: f64,
    pub mu_final: f64,
    pub mu_factor: f64,
    pub max_newton_per_stage: usize,
    /// Centering stops once half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    pub armijo_c: f64,
    pub armijo_beta: f64,
    pub trace: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            mu_initial: 1.0,
            mu_final: 1e-8,
            mu_factor: 10.0,
            max_newton_per_stage: 100,
            newton_tol: 1e-10,
            armijo_c: 0.01,
            armijo_beta: 0.5,
            trace: false,
        }
    }
}

impl DcSubproblem {
    /// Every matrix at `(floor + δ)·I`, every scalar at zero.
    pub fn default_start(&self, delta: f64) -> Point {
        Point {
            scalars: vec![0.0; self.num_scalars],
            matrices: self.matrices.iter().map(|m| crate::linalg::scaled_identity(m.dim, m.floor + delta)).collect(),
        }
    }
}

#[cfg(test)]
mod tests;
