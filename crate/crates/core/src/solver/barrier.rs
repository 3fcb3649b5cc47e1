//! Primal log-barrier path following with damped Newton steps.
//!
//! Matrix variables are carried in a flat real vector through the orthonormal
//! Hermitian basis of [`linalg::hermitian_basis`], so every Newton system is
//! real symmetric.

use super::{
    certify, Constraint, DcSubproblem, LinearForm, Point, SolveStatus, SolverReport, SolverSettings,
};
use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_basis, CMat};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::LN_2;

/// Half-width of the feasibility-phase box, relative to the start.
const PHASE_ONE_BOX: f64 = 1e3;

struct Layout {
    num_scalars: usize,
    offsets: Vec<usize>,
    dims: Vec<usize>,
    len: usize,
}

impl Layout {
    fn new(prob: &DcSubproblem) -> Self {
        let mut offsets = Vec::with_capacity(prob.matrices.len());
        let mut at = prob.num_scalars;
        for m in &prob.matrices {
            offsets.push(at);
            at += hermitian_basis::len(m.dim);
        }
        Self { num_scalars: prob.num_scalars, offsets, dims: prob.matrices.iter().map(|m| m.dim).collect(), len: at }
    }

    fn flatten(&self, p: &Point) -> DVector<f64> {
        let mut x = DVector::zeros(self.len);
        for (j, &v) in p.scalars.iter().enumerate() {
            x[j] = v;
        }
        for (v, m) in p.matrices.iter().enumerate() {
            for (j, a) in hermitian_basis::to_params(m).into_iter().enumerate() {
                x[self.offsets[v] + j] = a;
            }
        }
        x
    }

    fn unflatten(&self, x: &DVector<f64>) -> Point {
        Point {
            scalars: x.rows(0, self.num_scalars).iter().copied().collect(),
            matrices: self
                .dims
                .iter()
                .zip(&self.offsets)
                .map(|(&m, &off)| {
                    let params: Vec<f64> = x.rows(off, hermitian_basis::len(m)).iter().copied().collect();
                    hermitian_basis::from_params(&params, m)
                })
                .collect(),
        }
    }

    /// Sparse flat coefficients of a linear form.
    fn linear(&self, form: &LinearForm) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = form.scalars.clone();
        for (var, c) in &form.matrices {
            let coefs = hermitian_basis::functional(c);
            out.extend(coefs.into_iter().enumerate().map(|(j, a)| (self.offsets[*var] + j, a)));
        }
        merge(out)
    }
}

fn merge(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (j, a) in entries {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

/// `x ↦ base + Σ_j x_{idx[j]} M_j` restricted to the coordinates in `idx`.
struct AffineHermitian {
    base: CMat,
    idx: Vec<usize>,
    mats: Vec<CMat>,
    /// Real scalar entries when the matrices are 1×1.
    scalar: Option<(f64, Vec<f64>)>,
}

impl AffineHermitian {
    fn new(base: CMat, mut pairs: Vec<(usize, CMat)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut idx: Vec<usize> = Vec::new();
        let mut mats: Vec<CMat> = Vec::new();
        for (j, m) in pairs {
            if idx.last() == Some(&j) {
                *mats.last_mut().expect("paired with idx") += m;
            } else {
                idx.push(j);
                mats.push(m);
            }
        }
        let scalar = (base.nrows() == 1).then(|| (base[(0, 0)].re, mats.iter().map(|m| m[(0, 0)].re).collect()));
        Self { base, idx, mats, scalar }
    }

    fn value(&self, x: &DVector<f64>) -> CMat {
        let mut a = self.base.clone();
        for (j, m) in self.idx.iter().zip(&self.mats) {
            let xj = x[*j];
            if xj != 0.0 {
                a += m * Complex64::new(xj, 0.0);
            }
        }
        a
    }

    fn scalar_value(&self, x: &DVector<f64>) -> Option<f64> {
        self.scalar.as_ref().map(|(b, m)| b + self.idx.iter().zip(m).map(|(j, mj)| x[*j] * mj).sum::<f64>())
    }

    /// `ln det` of the value, `None` unless positive definite.
    fn ln_det(&self, x: &DVector<f64>) -> Option<f64> {
        if let Some(v) = self.scalar_value(x) {
            return (v > 0.0 && v.is_finite()).then(|| v.ln());
        }
        let chol = linalg::hermitian_cholesky(&self.value(x))?;
        let l = chol.l_dirty();
        let mut acc = 0.0;
        for i in 0..l.nrows() {
            let d = l[(i, i)].re;
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            acc += d.ln();
        }
        Some(2.0 * acc)
    }

    /// `(ln det, ∇ ln det, −∇² ln det)` over the local coordinates `idx`.
    fn derivatives(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let p = self.idx.len();
        if let Some(v) = self.scalar_value(x) {
            if !(v > 0.0) {
                return None;
            }
            let m = &self.scalar.as_ref().expect("scalar map").1;
            let g = DVector::from_iterator(p, m.iter().map(|mj| mj / v));
            let h = &g * g.transpose();
            return Some((v.ln(), g, h));
        }
        let a = self.value(x);
        let n = a.nrows();
        let chol = linalg::hermitian_cholesky(&a)?;
        let l = chol.l_dirty();
        let mut ld = 0.0;
        for i in 0..n {
            let d = l[(i, i)].re;
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            ld += 2.0 * d.ln();
        }
        let ginv = linalg::hermitize(&chol.inverse());
        let mut u = DMatrix::<Complex64>::zeros(p, n * n);
        let mut v = DMatrix::<Complex64>::zeros(n * n, p);
        let mut grad = DVector::zeros(p);
        for (j, m) in self.mats.iter().enumerate() {
            let pj = &ginv * m;
            grad[j] = pj.trace().re;
            for r in 0..n {
                for c in 0..n {
                    u[(j, r * n + c)] = pj[(r, c)];
                    v[(c * n + r, j)] = pj[(r, c)];
                }
            }
        }
        let h = (u * v).map(|z| z.re);
        Some((ld, grad, h))
    }
}

struct LinearRow {
    coefs: Vec<(usize, f64)>,
    constant: f64,
}

impl LinearRow {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.constant + self.coefs.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

struct LogDetRow {
    affine: LinearRow,
    map: AffineHermitian,
    /// Union of the affine and log-det coordinates.
    support: Vec<usize>,
    affine_local: Vec<(usize, f64)>,
    map_local: Vec<usize>,
}

impl LogDetRow {
    /// Slack `log2 det(A) − affine`.
    fn slack(&self, x: &DVector<f64>) -> Option<f64> {
        self.map.ln_det(x).map(|ld| ld / LN_2 - self.affine.value(x))
    }
}

struct Compiled {
    len: usize,
    objective: Vec<(usize, f64)>,
    objective_constant: f64,
    linear: Vec<LinearRow>,
    logdet: Vec<LogDetRow>,
    /// `X_v − floor·I` for every matrix variable.
    cones: Vec<AffineHermitian>,
    nu: f64,
}

fn basis_pairs(offset: usize, dim: usize, left: Option<&CMat>) -> Vec<(usize, CMat)> {
    (0..hermitian_basis::len(dim))
        .map(|j| {
            let b = hermitian_basis::matrix(dim, j);
            let m = match left {
                Some(k) => linalg::hermitize(&linalg::congruence(k, &b)),
                None => b,
            };
            (offset + j, m)
        })
        .collect()
}

fn compile(prob: &DcSubproblem, layout: &Layout) -> Compiled {
    let mut linear = Vec::new();
    let mut logdet = Vec::new();
    for c in &prob.constraints {
        match c {
            Constraint::Linear { form, .. } => {
                linear.push(LinearRow { coefs: layout.linear(form), constant: form.constant });
            }
            Constraint::LogDet { affine, base, terms, .. } => {
                let mut pairs = Vec::new();
                for t in terms {
                    let dim = prob.matrices[t.var].dim;
                    pairs.extend(basis_pairs(layout.offsets[t.var], dim, Some(&t.map)));
                }
                let map = AffineHermitian::new(linalg::hermitize(base), pairs);
                let affine = LinearRow { coefs: layout.linear(affine), constant: affine.constant };
                logdet.push(build_logdet_row(affine, map));
            }
        }
    }
    let cones = prob
        .matrices
        .iter()
        .enumerate()
        .map(|(v, m)| AffineHermitian::new(linalg::scaled_identity(m.dim, -m.floor), basis_pairs(layout.offsets[v], m.dim, None)))
        .collect::<Vec<_>>();
    let nu = (linear.len() + logdet.len()) as f64 + prob.matrices.iter().map(|m| m.dim as f64).sum::<f64>();
    Compiled {
        len: layout.len,
        objective: layout.linear(&prob.objective),
        objective_constant: prob.objective.constant,
        linear,
        logdet,
        cones,
        nu,
    }
}

fn build_logdet_row(affine: LinearRow, map: AffineHermitian) -> LogDetRow {
    let mut support: Vec<usize> = affine.coefs.iter().map(|e| e.0).chain(map.idx.iter().copied()).collect();
    support.sort_unstable();
    support.dedup();
    let local = |j: usize| support.binary_search(&j).expect("index in support");
    let affine_local = affine.coefs.iter().map(|&(j, a)| (local(j), a)).collect();
    let map_local = map.idx.iter().map(|&j| local(j)).collect();
    LogDetRow { affine, map, support, affine_local, map_local }
}

impl Compiled {
    fn objective_value(&self, x: &DVector<f64>) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }

    /// Barrier value `−t·obj − Σ ln slack − Σ ln det cone`; `None` outside the
    /// strict interior.
    fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut f = -t * self.objective_value(x);
        for row in &self.linear {
            let s = -row.value(x);
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        for row in &self.logdet {
            let s = row.slack(x)?;
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        for cone in &self.cones {
            f -= cone.ln_det(x)?;
        }
        f.is_finite().then_some(f)
    }

    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.value(x, 0.0).is_some()
    }

    fn derivatives(&self, x: &DVector<f64>, t: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.len;
        let mut grad = DVector::<f64>::zeros(n);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        let mut f = -t * self.objective_value(x);
        for &(j, a) in &self.objective {
            grad[j] -= t * a;
        }
        for row in &self.linear {
            let s = -row.value(x);
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
            for &(j, a) in &row.coefs {
                grad[j] += a / s;
                for &(k, b) in &row.coefs {
                    hess[(j, k)] += a * b / (s * s);
                }
            }
        }
        for row in &self.logdet {
            let (ld, lgrad, lhess) = row.map.derivatives(x)?;
            let s = ld / LN_2 - row.affine.value(x);
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
            let p = row.support.len();
            let mut ds = DVector::<f64>::zeros(p);
            for (loc, g) in row.map_local.iter().zip(lgrad.iter()) {
                ds[*loc] += g / LN_2;
            }
            for &(loc, a) in &row.affine_local {
                ds[loc] -= a;
            }
            for (a, &ja) in row.support.iter().enumerate() {
                grad[ja] -= ds[a] / s;
                for (b, &jb) in row.support.iter().enumerate() {
                    hess[(ja, jb)] += ds[a] * ds[b] / (s * s);
                }
            }
            let w = 1.0 / (s * LN_2);
            for (a, &la) in row.map_local.iter().enumerate() {
                let ja = row.support[la];
                for (b, &lb) in row.map_local.iter().enumerate() {
                    hess[(ja, row.support[lb])] += w * lhess[(a, b)];
                }
            }
        }
        for cone in &self.cones {
            let (ld, cgrad, chess) = cone.derivatives(x)?;
            f -= ld;
            for (a, &ja) in cone.idx.iter().enumerate() {
                grad[ja] -= cgrad[a];
                for (b, &jb) in cone.idx.iter().enumerate() {
                    hess[(ja, jb)] += chess[(a, b)];
                }
            }
        }
        f.is_finite().then_some((f, grad, hess))
    }
}

/// Solves `H d = −g`, adding a growing ridge if the factorization fails.
fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let hess = (&hess + hess.transpose()) * 0.5;
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(&(-grad)));
    }
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 1e-12 * scale;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            return Some(ch.solve(&(-grad)));
        }
        ridge *= 10.0;
    }
    None
}

struct PathResult {
    x: DVector<f64>,
    newton_steps: usize,
    completed: bool,
    failures: usize,
    mu: f64,
}

/// Follows the central path from the strictly feasible `x`. `stop` is checked
/// after every accepted step.
fn follow_path(
    comp: &Compiled,
    mut x: DVector<f64>,
    settings: &SolverSettings,
    log: &mut Vec<String>,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> PathResult {
    let mut mu = settings.mu_initial;
    let mut steps = 0;
    let mut failures = 0;
    loop {
        let t = 1.0 / mu;
        for _ in 0..settings.max_newton_per_stage {
            let Some((f, grad, hess)) = comp.derivatives(&x, t) else {
                failures += 1;
                break;
            };
            let Some(dir) = newton_direction(hess, &grad) else {
                failures += 1;
                break;
            };
            let slope = grad.dot(&dir);
            let decrement = -slope;
            if !(decrement.is_finite()) {
                failures += 1;
                break;
            }
            if decrement / 2.0 <= settings.newton_tol {
                break;
            }
            let mut alpha = 1.0;
            let mut trial = &x + &dir * alpha;
            let mut value = comp.value(&trial, t);
            while value.is_none() && alpha > 1e-16 {
                alpha *= 0.5;
                trial = &x + &dir * alpha;
                value = comp.value(&trial, t);
            }
            let mut accepted = false;
            while let Some(v) = value {
                if v <= f + settings.armijo_c * alpha * slope {
                    accepted = true;
                    break;
                }
                alpha *= settings.armijo_beta;
                if alpha < 1e-16 {
                    break;
                }
                trial = &x + &dir * alpha;
                value = comp.value(&trial, t);
            }
            steps += 1;
            if settings.trace {
                log.push(format!("mu {mu:.3e} obj {:.9} decrement {decrement:.3e} step {alpha:.3e}", comp.objective_value(&x)));
            }
            if !accepted {
                if decrement > 1e-6 {
                    failures += 1;
                }
                break;
            }
            x = trial;
            if stop(&x) {
                return PathResult { x, newton_steps: steps, completed: false, failures, mu };
            }
        }
        if mu <= settings.mu_final * (1.0 + 1e-12) {
            return PathResult { x, newton_steps: steps, completed: true, failures, mu };
        }
        mu = (mu / settings.mu_factor).max(settings.mu_final);
    }
}

/// Phase I: minimizes a common slack `u` added to every constraint until the
/// original problem is strictly feasible.
fn find_interior(prob: &DcSubproblem, layout: &Layout, comp: &Compiled, start: &Point, settings: &SolverSettings, log: &mut Vec<String>) -> Result<(DVector<f64>, usize)> {
    let mut repaired = start.clone();
    for (m, var) in repaired.matrices.iter_mut().zip(&prob.matrices) {
        let (lo, hi) = linalg::eigen_range(m);
        if !(lo > var.floor) {
            *m = linalg::scaled_identity(var.dim, var.floor + 1e-3 * hi.abs().max(var.floor).max(1e-6));
        }
    }
    let x0 = layout.flatten(&repaired);
    if comp.strictly_feasible(&x0) {
        return Ok((x0, 0));
    }
    let n = comp.len;
    let u = n;
    let max_violation = comp
        .linear
        .iter()
        .map(|r| Some(r.value(&x0)))
        .chain(comp.logdet.iter().map(|r| r.slack(&x0).map(|s| -s)))
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
        .ok_or_else(|| Error::Solver("log-det argument singular at the feasibility start".into()))?;

    let mut linear: Vec<LinearRow> = comp
        .linear
        .iter()
        .map(|r| {
            let mut coefs = r.coefs.clone();
            coefs.push((u, -1.0));
            LinearRow { coefs, constant: r.constant }
        })
        .collect();
    linear.push(LinearRow { coefs: vec![(u, -1.0)], constant: -1.0 });
    // A box around the start keeps coordinates that only loosen constraints
    // from drifting without bound while the slack is driven down.
    let radius = PHASE_ONE_BOX * (1.0 + x0.amax());
    for j in 0..n {
        linear.push(LinearRow { coefs: vec![(j, 1.0)], constant: -x0[j] - radius });
        linear.push(LinearRow { coefs: vec![(j, -1.0)], constant: x0[j] - radius });
    }
    let logdet = comp
        .logdet
        .iter()
        .map(|r| {
            let mut coefs = r.affine.coefs.clone();
            coefs.push((u, -1.0));
            let map = AffineHermitian::new(r.map.base.clone(), r.map.idx.iter().copied().zip(r.map.mats.iter().cloned()).collect());
            build_logdet_row(LinearRow { coefs, constant: r.affine.constant }, map)
        })
        .collect::<Vec<_>>();
    let cones = comp
        .cones
        .iter()
        .map(|c| AffineHermitian::new(c.base.clone(), c.idx.iter().copied().zip(c.mats.iter().cloned()).collect()))
        .collect();
    let aux = Compiled {
        len: n + 1,
        objective: vec![(u, -1.0)],
        objective_constant: 0.0,
        nu: comp.nu + 1.0 + 2.0 * n as f64,
        linear,
        logdet,
        cones,
    };
    let mut x = DVector::zeros(n + 1);
    x.rows_mut(0, n).copy_from(&x0);
    x[u] = max_violation.max(0.0) + 1.0;
    let stop = |y: &DVector<f64>| y[u] < 0.0 && comp.strictly_feasible(&y.rows(0, n).into_owned());
    let res = follow_path(&aux, x, settings, log, &stop);
    let inner = res.x.rows(0, n).into_owned();
    if comp.strictly_feasible(&inner) {
        Ok((inner, res.newton_steps))
    } else {
        Err(Error::Solver(format!("no strictly feasible point found (slack {:.3e})", res.x[u])))
    }
}

/// Solves with default settings.
pub fn solve(prob: &DcSubproblem, start: Option<&Point>) -> Result<(Point, SolverReport)> {
    solve_with(prob, start, &SolverSettings::default())
}

/// Maximizes the objective of `prob`. A strictly feasible `start` skips the
/// feasibility phase.
pub fn solve_with(prob: &DcSubproblem, start: Option<&Point>, settings: &SolverSettings) -> Result<(Point, SolverReport)> {
    let layout = Layout::new(prob);
    let comp = compile(prob, &layout);
    let mut log = Vec::new();
    let default;
    let start = match start {
        Some(p) => p,
        None => {
            default = prob.default_start(1e-3);
            &default
        }
    };
    let (x0, phase_one_steps) = find_interior(prob, &layout, &comp, start, settings, &mut log)?;
    let res = follow_path(&comp, x0, settings, &mut log, &|_| false);
    let point = layout.unflatten(&res.x);
    let cert = certify(prob, &point)?;
    let status = if res.failures > 0 && !res.completed {
        SolveStatus::NumericalFailure
    } else if !res.completed {
        SolveStatus::MaxIter
    } else if cert.max_violation > 1e-7 {
        SolveStatus::NumericalFailure
    } else {
        SolveStatus::Optimal
    };
    let report = SolverReport {
        status,
        iterations: res.newton_steps + phase_one_steps,
        objective: comp.objective_value(&res.x),
        max_violation: cert.max_violation,
        gap: comp.nu * res.mu,
        log,
    };
    Ok((point, report))
}
