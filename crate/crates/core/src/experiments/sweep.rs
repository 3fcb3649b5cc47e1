//! Parameter sweeps over grid × modes × prefetchers × trials.

use super::config::SweepSpec;
use super::results::{round_sig, ResultRow};
use super::trial::{run_trial_outcome, TrialOutcome};
use crate::cccp::CccpSettings;
use crate::error::Result;
use crate::model::Mode;
use crate::prefetch::Prefetcher;
use rayon::prelude::*;

/// Seed of trial `trial`: FNV-1a over `(base, trial)` finished with a
/// splitmix64 mix. Every cell uses the same seed for a given trial, so all
/// grid values, modes and pre-fetchers are compared on the same draws.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in base.to_le_bytes().into_iter().chain((trial as u64).to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One sweep cell with its per-trial seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub mode: Mode,
    pub prefetcher: Prefetcher,
    pub nf: Option<usize>,
    pub seeds: Vec<u64>,
}

pub fn cells(spec: &SweepSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for &value in &spec.grid {
        for (mode, nf) in spec.mode_variants() {
            for &prefetcher in &spec.prefetchers {
                let seeds = (0..spec.trials).map(|t| trial_seed(spec.base_seed, t)).collect();
                out.push(Cell { value, mode, prefetcher, nf, seeds });
            }
        }
    }
    out
}

/// Mean and standard error of the successful trials.
pub fn aggregate(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs the sweep; `observe` sees every trial outcome (e.g. for tracing).
/// Rows come out in grid order whatever the completion order.
pub fn run_sweep_with<F>(spec: &SweepSpec, settings: &CccpSettings, observe: F) -> Result<Vec<ResultRow>>
where
    F: Fn(&Cell, usize, &Result<TrialOutcome>) + Sync,
{
    spec.validate()?;
    let cells = cells(spec);
    let jobs: Vec<(usize, usize)> = cells.iter().enumerate().flat_map(|(c, cell)| (0..cell.seeds.len()).map(move |t| (c, t))).collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let cell = &cells[c];
            let cfg = spec.swept_parameter.apply(&spec.fixed_parameters, cell.value)?;
            let outcome = run_trial_outcome(&cfg, cell.mode, cell.prefetcher, cell.nf.unwrap_or(0), cell.seeds[t], settings);
            observe(cell, t, &outcome);
            outcome.map(|o| o.min_rate())
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut at = 0;
    for cell in &cells {
        let chunk = &results[at..at + cell.seeds.len()];
        at += cell.seeds.len();
        let ok: Vec<f64> = chunk.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let (mean, stderr) = aggregate(&ok);
        rows.push(ResultRow {
            sweep_param: spec.swept_parameter.label().to_string(),
            value: round_sig(cell.value),
            mode: cell.mode,
            prefetcher: cell.prefetcher,
            nf: cell.nf.map_or(-1, |n| n as i64),
            mean_rmin: round_sig(mean.max(0.0)),
            stderr: round_sig(stderr),
            trials: ok.len(),
            failures: chunk.len() - ok.len(),
        });
    }
    Ok(rows)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    run_sweep_with(spec, &CccpSettings::default(), |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::SweptParameter;
    use crate::experiments::trial::run_trial;
    use crate::model::SystemConfig;

    fn spec(grid: Vec<f64>, trials: usize) -> SweepSpec {
        SweepSpec {
            swept_parameter: SweptParameter::Mu,
            grid,
            fixed_parameters: SystemConfig::symmetric(2, 2, 3, 1.0, 0.5, 0.0, 0.3, 1.0, 0.01),
            modes: vec![Mode::Soft, Mode::Hard],
            hard_nf: vec![1],
            prefetchers: vec![Prefetcher::Cmp],
            trials,
            base_seed: 99,
        }
    }

    #[test]
    fn trials_share_draws_across_cells() {
        let a = cells(&spec(vec![0.0, 1.0], 3));
        let b = cells(&spec(vec![1.0, 0.0], 3));
        assert_eq!(a.len(), 4);
        for c in a.iter().chain(&b) {
            assert_eq!(c.seeds, a[0].seeds);
        }
        let s = &a[0].seeds;
        assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
        assert_ne!(trial_seed(99, 0), trial_seed(98, 0));
    }

    #[test]
    fn single_cell_reproduces_the_trial() {
        let mut s = spec(vec![1.0 / 3.0], 1);
        s.modes = vec![Mode::Soft];
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows.len(), 1);
        let seed = trial_seed(99, 0);
        let cfg = SweptParameter::Mu.apply(&s.fixed_parameters, 1.0 / 3.0).unwrap();
        let r = run_trial(&cfg, Mode::Soft, Prefetcher::Cmp, 0, seed).unwrap();
        assert_eq!(rows[0].mean_rmin, round_sig(r));
        assert_eq!((rows[0].trials, rows[0].failures, rows[0].nf), (1, 0, -1));
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[]), (0.0, 0.0));
        assert_eq!(aggregate(&[2.0]), (2.0, 0.0));
        let (m, se) = aggregate(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
