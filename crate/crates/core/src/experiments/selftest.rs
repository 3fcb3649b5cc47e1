//! Quick in-process property checks exposed through the CLI.

use super::results::{read_csv, round_sig, to_csv_string, ResultRow};
use super::trial::sample_instance;
use crate::cccp::{self, CccpSettings};
use crate::linalg::{self, CMat};
use crate::model::{Instance, Mode, SystemConfig};
use crate::prefetch::Prefetcher;
use crate::rates::{self, LinearizationPoint};
use crate::scenario::{complex_normal, RngSeed, Stream};
use crate::solver::{self, Constraint, ConstraintKind, DcSubproblem, LinearForm, LogDetTerm, MatrixVar};
use crate::validation::validate_solution;
use num_complex::Complex64;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Random PSD covariances of total power about `scale` per subfile and
/// quantization noise with eigenvalues in `[0.01, 1]·scale`.
pub fn random_covariances<R: Rng + ?Sized>(inst: &Instance, scale: f64, rng: &mut R) -> (Vec<CMat>, Vec<CMat>) {
    let n_r = inst.cfg.total_errh_antennas();
    let w = (0..inst.num_requested_subfiles())
        .map(|_| {
            let g = CMat::from_fn(n_r, n_r, |_, _| complex_normal(rng));
            linalg::hermitize(&(&g * g.adjoint())) * Complex64::new(scale / n_r as f64, 0.0)
        })
        .collect();
    let omega = inst
        .cfg
        .antennas_errh
        .iter()
        .map(|&n| {
            let g = CMat::from_fn(n, n, |_, _| complex_normal(rng));
            let a = &g * g.adjoint() / Complex64::new(n as f64, 0.0);
            linalg::hermitize(&(a + linalg::scaled_identity(n, 0.01))) * Complex64::new(scale * rng.random_range(0.01..1.0), 0.0)
        })
        .collect();
    (w, omega)
}

/// Largest violation of `surrogate ≤ exact` (rates) and `surrogate ≥ exact`
/// (fronthaul) at `(w, omega)`, and the largest mismatch at `lin` itself.
pub fn majorization_gaps(inst: &Instance, mode: Mode, w: &[CMat], omega: &[CMat], lin: &LinearizationPoint) -> (f64, f64) {
    let mut off = 0.0f64;
    let mut at_lin = 0.0f64;
    let scale = |x: f64| x.abs().max(1.0);
    let om = mode.uses_quantization().then_some(omega);
    let lin_om = mode.uses_quantization().then_some(lin.quant_covariances.as_slice());
    for k in 0..inst.cfg.num_ue {
        for l in 0..inst.num_subfiles() {
            let exact = rates::sic_rate(inst, k, l, w, om);
            let sur = rates::surrogate_rate(inst, mode, k, l, w, omega, lin).unwrap_or(f64::NAN);
            off = off.max((sur - exact) / scale(exact));
            let q_lin = rates::sic_rate(inst, k, l, &lin.covariances, lin_om);
            let s_lin = rates::surrogate_rate(inst, mode, k, l, &lin.covariances, &lin.quant_covariances, lin).unwrap_or(f64::NAN);
            at_lin = at_lin.max((s_lin - q_lin).abs() / scale(q_lin));
        }
    }
    if mode.uses_quantization() {
        for i in 0..inst.cfg.num_errh {
            if rates::quantized_subfiles(inst, mode, i).is_empty() {
                continue;
            }
            let exact = rates::fronthaul_usage(inst, mode, i, w, omega).unwrap_or(f64::NAN);
            let sur = rates::surrogate_fronthaul(inst, mode, i, w, omega, lin).unwrap_or(f64::NAN);
            off = off.max((exact - sur) / scale(exact));
            let e_lin = rates::fronthaul_usage(inst, mode, i, &lin.covariances, &lin.quant_covariances).unwrap_or(f64::NAN);
            let s_lin = rates::surrogate_fronthaul(inst, mode, i, &lin.covariances, &lin.quant_covariances, lin).unwrap_or(f64::NAN);
            at_lin = at_lin.max((s_lin - e_lin).abs() / scale(e_lin));
        }
    }
    (if off.is_nan() { f64::INFINITY } else { off }, if at_lin.is_nan() { f64::INFINITY } else { at_lin })
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn surrogate_check(seed: u64) -> CheckResult {
    let cfg = SystemConfig::symmetric(2, 2, 3, 1.0, 0.5, 1.0 / 3.0, 1.0, 1.0, 0.01);
    let mut rng = RngSeed(seed).rng(Stream::Init);
    let mut worst = (0.0f64, 0.0f64);
    for t in 0..20 {
        let inst = match sample_instance(&cfg, Prefetcher::Cmp, seed.wrapping_add(t)) {
            Ok(i) => i,
            Err(e) => return check("surrogate majorization", false, e.to_string()),
        };
        let (w, om) = random_covariances(&inst, 0.5, &mut rng);
        let (lw, lom) = random_covariances(&inst, 0.5, &mut rng);
        let lin = LinearizationPoint { covariances: lw, quant_covariances: lom };
        for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
            let (a, b) = majorization_gaps(&inst, mode, &w, &om, &lin);
            worst = (worst.0.max(a), worst.1.max(b));
        }
    }
    check("surrogate majorization", worst.0 <= 1e-9 && worst.1 <= 1e-9, format!("violation {:.2e}, mismatch at anchor {:.2e}", worst.0, worst.1))
}

fn solver_check() -> CheckResult {
    let c1 = |v: f64| CMat::from_element(1, 1, Complex64::new(v, 0.0));
    let p = 3.0;
    let prob = DcSubproblem {
        num_scalars: 1,
        matrices: vec![MatrixVar { dim: 1, floor: 0.0 }],
        objective: LinearForm::default().scalar(0, 1.0),
        constraints: vec![
            Constraint::LogDet {
                affine: LinearForm::default().scalar(0, 1.0),
                base: c1(1.0),
                terms: vec![LogDetTerm { var: 0, map: c1(1.0) }],
                kind: ConstraintKind::Rate,
            },
            Constraint::Linear { form: LinearForm::constant(-p).matrix(0, c1(1.0)), kind: ConstraintKind::Power },
        ],
    };
    match solver::solve(&prob, None) {
        Ok((x, rep)) => {
            let err = (x.scalars[0] - 2.0).abs();
            check("solver capacity", err < 1e-5 && rep.status == solver::SolveStatus::Optimal, format!("|R − 2| = {err:.2e}"))
        }
        Err(e) => check("solver capacity", false, e.to_string()),
    }
}

fn cccp_check(seed: u64) -> CheckResult {
    let cfg = SystemConfig::symmetric(3, 3, 3, 1.0, 0.5, 1.0 / 3.0, 0.5, 1.0, 0.01);
    let mut details = Vec::new();
    let mut ok = true;
    for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
        let inst = match sample_instance(&cfg, Prefetcher::Cmp, seed) {
            Ok(i) => i.with_assignment(cccp::assign_fronthaul_nf(&i.channel, &i.cache, &i.requests, 1)).expect("heuristic respects caches"),
            Err(e) => return check("cccp monotone and feasible", false, e.to_string()),
        };
        match cccp::run_cccp(&inst, mode, &CccpSettings { seed, ..Default::default() }) {
            Ok(sol) => {
                let monotone = sol.trace.windows(2).all(|w| w[1] >= w[0] - 1e-8);
                let feasible = validate_solution(&sol, &inst).map(|r| r.is_feasible()).unwrap_or(false);
                ok &= monotone && feasible;
                details.push(format!("{mode} R_min {:.4} ({} iters)", sol.min_rate, sol.diagnostics.outer_iterations));
            }
            Err(e) => {
                ok = false;
                details.push(format!("{mode}: {e}"));
            }
        }
    }
    check("cccp monotone and feasible", ok, details.join(", "))
}

fn csv_check() -> CheckResult {
    let rows = vec![ResultRow {
        sweep_param: "mu".into(),
        value: round_sig(1.0 / 3.0),
        mode: Mode::Hybrid,
        prefetcher: Prefetcher::Fcd,
        nf: 2,
        mean_rmin: round_sig(0.123456789123),
        stderr: round_sig(1e-7 / 3.0),
        trials: 20,
        failures: 0,
    }];
    let back = read_csv(to_csv_string(&rows).as_bytes());
    check("csv round trip", back.as_ref().ok() == Some(&rows), format!("{back:?}"))
}

/// Runs every check; all are deterministic given `seed`.
pub fn selftest(seed: u64) -> Vec<CheckResult> {
    vec![surrogate_check(seed), solver_check(), cccp_check(seed), csv_check()]
}
