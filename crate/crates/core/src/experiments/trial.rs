//! One Monte Carlo trial: sample, pre-fetch, assign, optimize, extract.

use crate::cccp::{self, CccpSettings};
use crate::error::{Error, Result};
use crate::model::{DeliverySolution, FronthaulAssignment, Instance, Mode, SystemConfig};
use crate::prefetch::{prefetch, Prefetcher};
use crate::scenario::{sample_scenario, RngSeed, Stream};
use crate::validation::validate_solution;

/// Everything a trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub instance: Instance,
    /// Relaxed solution of the optimizer.
    pub relaxed: DeliverySolution,
    /// Solution after precoder extraction; its `min_rate` is the trial result.
    pub extracted: DeliverySolution,
}

impl TrialOutcome {
    pub fn min_rate(&self) -> f64 {
        self.extracted.min_rate
    }
}

/// Random instance for `seed` with the caches of `policy` and no transfers.
pub fn sample_instance(cfg: &SystemConfig, policy: Prefetcher, seed: u64) -> Result<Instance> {
    let mut cfg = cfg.clone();
    if let Some(mu) = policy.forced_mu() {
        cfg.fractional_cache = vec![mu; cfg.num_errh];
    }
    let seed = RngSeed(seed);
    let (channel, requests) = sample_scenario(&cfg, seed)?;
    let (split, cache) = prefetch(policy, &cfg, &mut seed.rng(Stream::Prefetch))?;
    let assignment = FronthaulAssignment::none(cfg.library_size, split.num_subfiles(), cfg.num_errh);
    Instance::new(cfg, split, cache, channel, requests, assignment)
}

/// Optimizes `inst` in `mode`; hard and hybrid use the `N_F` assignment.
pub fn solve_instance(inst: &Instance, mode: Mode, nf: usize, settings: &CccpSettings) -> Result<DeliverySolution> {
    let with_nf = || inst.with_assignment(cccp::assign_fronthaul_nf(&inst.channel, &inst.cache, &inst.requests, nf));
    match mode {
        Mode::Soft => cccp::run_cccp(&inst.with_assignment(inst.no_transfer())?, Mode::Soft, settings),
        Mode::Hard => cccp::run_cccp(&with_nf()?, Mode::Hard, settings),
        Mode::Hybrid => {
            let d = with_nf()?;
            let hard = cccp::run_cccp(&d, Mode::Hard, settings).ok();
            let soft = cccp::run_cccp(inst, Mode::Soft, settings).ok();
            cccp::run_hybrid(&d, settings, hard.as_ref(), soft.as_ref())
        }
    }
}

/// Full trial. A solver error or a solution failing validation is an error.
pub fn run_trial_outcome(
    cfg: &SystemConfig,
    mode: Mode,
    policy: Prefetcher,
    nf: usize,
    seed: u64,
    settings: &CccpSettings,
) -> Result<TrialOutcome> {
    let instance = sample_instance(cfg, policy, seed)?;
    let settings = CccpSettings { seed, ..settings.clone() };
    let relaxed = solve_instance(&instance, mode, nf, &settings)?;
    let extracted = cccp::extract_precoders(&relaxed, &instance);
    for sol in [&relaxed, &extracted] {
        let report = validate_solution(sol, &instance)?;
        if !report.is_feasible() {
            return Err(Error::Solver(format!("infeasible solution: {report}")));
        }
    }
    Ok(TrialOutcome { instance, relaxed, extracted })
}

/// Post-extraction exact `R_min` of one trial.
pub fn run_trial(cfg: &SystemConfig, mode: Mode, policy: Prefetcher, nf: usize, seed: u64) -> Result<f64> {
    run_trial_outcome(cfg, mode, policy, nf, seed, &CccpSettings::default()).map(|o| o.min_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_result() {
        let cfg = SystemConfig::symmetric(2, 2, 3, 1.0, 0.5, 1.0 / 3.0, 0.5, 1.0, 0.01);
        let a = run_trial(&cfg, Mode::Hybrid, Prefetcher::Cmp, 1, 11).unwrap();
        let b = run_trial(&cfg, Mode::Hybrid, Prefetcher::Cmp, 1, 11).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn no_cache_no_fronthaul_delivers_nothing() {
        let cfg = SystemConfig::symmetric(3, 3, 3, 1.0, 0.5, 0.0, 0.0, 1.0, 0.01);
        assert!(run_trial(&cfg, Mode::Soft, Prefetcher::None, 0, 2).unwrap() <= 1e-6);
    }

    #[test]
    fn forced_policies_override_mu() {
        let cfg = SystemConfig::symmetric(2, 2, 2, 1.0, 0.5, 0.0, 0.1, 1.0, 0.01);
        let inst = sample_instance(&cfg, Prefetcher::Full, 1).unwrap();
        assert_eq!(inst.cfg.fractional_cache, vec![1.0; 2]);
        assert!((0..2).all(|f| (0..2).all(|i| inst.cache.is_cached(f, 0, i))));
    }
}
