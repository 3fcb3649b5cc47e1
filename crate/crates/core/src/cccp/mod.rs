//! Outer convex-concave iterations for the hard, soft and hybrid delivery
//! problems, plus the assignment heuristic, initialization and precoder
//! extraction around them.

mod assign;
mod extract;
mod init;
mod structure;

pub use assign::assign_fronthaul_nf;
pub use extract::{extract_precoders, stream_count, truncate};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::{DeliverySolution, Instance, Mode, RunDiagnostics};
use crate::rates;
use crate::scenario::{RngSeed, Stream};
use crate::solver::{self, SolveStatus, SolverSettings};
use crate::validation::validate_solution;
use structure::{Iterate, Structure};

#[derive(Debug, Clone, PartialEq)]
pub struct CccpSettings {
    pub max_outer_iters: usize,
    /// Stop once one iteration improves the exact `R_min` by less than this
    /// fraction.
    pub rel_improvement_tol: f64,
    pub restarts: usize,
    /// Quantization-noise floor as a fraction of the eRRH power budget.
    pub omega_floor: f64,
    pub seed: u64,
    pub solver: SolverSettings,
    /// Record one line per outer iteration in the diagnostics.
    pub trace: bool,
}

impl Default for CccpSettings {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            rel_improvement_tol: 1e-4,
            restarts: 1,
            omega_floor: 1e-8,
            seed: 0,
            solver: SolverSettings::default(),
            trace: false,
        }
    }
}

impl CccpSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig("iteration and restart counts must be positive".into()));
        }
        if !(self.rel_improvement_tol > 0.0) || !(self.omega_floor > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Random feasible covariances and quantization noise for `mode`, strictly
/// inside the power and exact fronthaul constraints.
pub fn init_feasible(inst: &Instance, mode: Mode, settings: &CccpSettings) -> (Vec<CMat>, Vec<CMat>) {
    let st = Structure::new(inst, mode, settings.omega_floor);
    let it = init::random_start(&st, &mut RngSeed(settings.seed).rng(Stream::Init));
    (it.w, it.omega)
}

/// Cold-started runs (best of `settings.restarts`) for the assignment held
/// by `inst`.
pub fn run_cccp(inst: &Instance, mode: Mode, settings: &CccpSettings) -> Result<DeliverySolution> {
    settings.validate()?;
    let st = Structure::new(inst, mode, settings.omega_floor);
    if st.trivially_zero() {
        return Ok(DeliverySolution::zero(mode, &st.inst));
    }
    let mut best: Option<DeliverySolution> = None;
    let mut last_err = None;
    for r in 0..settings.restarts {
        let mut rng = RngSeed(settings.seed.wrapping_add(r as u64)).rng(Stream::Init);
        let start = init::random_start(&st, &mut rng);
        match iterate(&st, start, settings) {
            Ok(sol) => best = Some(better(best, sol)),
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Solver("no restart succeeded".into())))
}

/// Run started from another solution, e.g. one computed in a different
/// mode. The start itself is kept when it is feasible for `mode` and the
/// iterations do not beat it.
pub fn run_cccp_from(inst: &Instance, mode: Mode, settings: &CccpSettings, start: &DeliverySolution) -> Result<DeliverySolution> {
    settings.validate()?;
    let st = Structure::new(inst, mode, settings.omega_floor);
    if st.trivially_zero() {
        return Ok(DeliverySolution::zero(mode, &st.inst));
    }
    let candidate = reinterpret(&st, start);
    let run = iterate(&st, init::from_solution(&st, start), settings);
    match (run, candidate) {
        (Ok(sol), Some(c)) => Ok(better(Some(c), sol)),
        (Ok(sol), None) => Ok(sol),
        (Err(_), Some(c)) => Ok(c),
        (Err(e), None) => Err(e),
    }
}

/// Hybrid mode with the assignment of `inst`: best of a cold run, a run
/// started from the hard solution and the transfer-free branch started from
/// the soft solution.
pub fn run_hybrid(
    inst: &Instance,
    settings: &CccpSettings,
    hard: Option<&DeliverySolution>,
    soft: Option<&DeliverySolution>,
) -> Result<DeliverySolution> {
    let mut best: Option<DeliverySolution> = None;
    let mut last_err = None;
    let mut offer = |res: Result<DeliverySolution>| match res {
        Ok(sol) => best = Some(better(best.take(), sol)),
        Err(e) => last_err = Some(e),
    };
    offer(run_cccp(inst, Mode::Hybrid, settings));
    if let Some(h) = hard {
        let with_d = inst.with_assignment(h.assignment.clone())?;
        offer(run_cccp_from(&with_d, Mode::Hybrid, settings, h));
    }
    if let Some(s) = soft {
        let no_d = inst.with_assignment(inst.no_transfer())?;
        offer(run_cccp_from(&no_d, Mode::Hybrid, settings, s));
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Solver("no hybrid candidate".into())))
}

fn better(current: Option<DeliverySolution>, candidate: DeliverySolution) -> DeliverySolution {
    match current {
        Some(c) if c.min_rate >= candidate.min_rate => c,
        _ => candidate,
    }
}

/// `sol` read as a solution of `st.mode`, if it is feasible there.
fn reinterpret(st: &Structure, sol: &DeliverySolution) -> Option<DeliverySolution> {
    let cfg = &st.inst.cfg;
    let mut c = sol.clone();
    c.mode = st.mode;
    c.assignment = st.inst.assignment.clone();
    if !st.mode.uses_quantization() {
        c.quant_covariances = cfg.antennas_errh.iter().map(|&n| crate::linalg::zeros(n, n)).collect();
    }
    c.soft_budget = soft_budget(st, &c.covariances, &c.quant_covariances);
    if sol.mode.uses_quantization() && !st.mode.uses_quantization() {
        return None;
    }
    let report = validate_solution(&c, &st.inst).ok()?;
    report.is_feasible().then_some(c)
}

fn soft_budget(st: &Structure, w: &[CMat], omega: &[CMat]) -> Vec<f64> {
    if st.mode != Mode::Hybrid {
        return Vec::new();
    }
    (0..st.inst.cfg.num_errh)
        .map(|i| rates::fronthaul_usage(&st.inst, st.mode, i, w, omega).unwrap_or(0.0))
        .collect()
}

fn relative_gain(new: f64, old: f64) -> f64 {
    (new - old) / old.abs().max(1e-12)
}

/// The outer loop: linearize at the current iterate, solve the convex
/// subproblem warm-started at the previous solver point, and accept the
/// new iterate while the exact `R_min` does not decrease.
fn iterate(st: &Structure, start: Iterate, settings: &CccpSettings) -> Result<DeliverySolution> {
    let l_count = st.inst.num_subfiles();
    let mut current = start;
    let mut tight = current.clone();
    let mut value = st.tighten(&mut tight);
    let mut point = st.encode(&current, init::epigraph_start(&current, l_count));
    let mut trace = vec![value];
    let mut diag = RunDiagnostics::default();
    let mut log = Vec::new();
    let mut accepted_any = false;
    let mut first_err = None;

    for t in 0..settings.max_outer_iters {
        let prob = st.subproblem(&st.linearization(&current));
        let (p, report) = match solver::solve_with(&prob, Some(&point), &settings.solver) {
            Ok(res) => res,
            Err(e) => {
                diag.solver_failures += 1;
                first_err.get_or_insert(e);
                break;
            }
        };
        diag.newton_steps += report.iterations;
        diag.outer_iterations = t + 1;
        if report.status != SolveStatus::Optimal {
            diag.solver_failures += 1;
        }
        let (candidate, _) = st.decode(&p);
        let mut cand_tight = candidate.clone();
        let cand_value = st.tighten(&mut cand_tight);
        if settings.trace {
            log.push(format!(
                "iter {} rmin {:.9e} surrogate {:.9e} newton {} status {:?}",
                t + 1,
                cand_value,
                report.objective,
                report.iterations,
                report.status
            ));
        }
        if !(cand_value >= value) || report.status == SolveStatus::NumericalFailure {
            diag.converged = report.status == SolveStatus::Optimal;
            if cand_value < value {
                diag.rejected_decrease = value - cand_value;
            }
            break;
        }
        let gain = relative_gain(cand_value, value);
        current = candidate;
        tight = cand_tight;
        value = cand_value;
        point = p;
        trace.push(value);
        accepted_any = true;
        if gain < settings.rel_improvement_tol {
            diag.converged = true;
            break;
        }
    }
    if !accepted_any {
        if let Some(e) = first_err {
            return Err(e);
        }
        if !start_is_feasible(st, &tight) {
            return Err(Error::Solver("no feasible iterate was produced".into()));
        }
    }
    diag.log = log;
    let omega = if st.mode.uses_quantization() {
        tight.omega.clone()
    } else {
        st.inst.cfg.antennas_errh.iter().map(|&n| crate::linalg::zeros(n, n)).collect()
    };
    Ok(DeliverySolution {
        mode: st.mode,
        assignment: st.inst.assignment.clone(),
        soft_budget: soft_budget(st, &tight.w, &omega),
        covariances: tight.w,
        quant_covariances: omega,
        rates: tight.rates,
        min_rate: value,
        relaxed_min_rate: value,
        precoders: Vec::new(),
        trace,
        diagnostics: diag,
    })
}

fn start_is_feasible(st: &Structure, it: &Iterate) -> bool {
    let cfg = &st.inst.cfg;
    (0..cfg.num_errh).all(|i| {
        let power: f64 = it.w.iter().map(|m| cfg.antenna_rows(i).map(|r| m[(r, r)].re).sum::<f64>()).sum::<f64>()
            + crate::linalg::trace_re(&it.omega[i]);
        power <= cfg.power_budget[i] && st.usage(it, i) + st.load(it, i) <= cfg.fronthaul_capacity[i]
    })
}

#[cfg(test)]
mod tests;
