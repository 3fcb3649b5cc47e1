//! TOML configuration files for single solves and parameter sweeps.
//!
//! System parameters live in a `[fixed_parameters]` table whose keys are the
//! [`SystemConfig`] field names. Per-eRRH and per-UE fields accept either one
//! value, applied to every node, or a list with one entry per node. Missing
//! keys take the [`SystemConfig::default`] values.

use crate::error::{Error, Result};
use crate::model::{Mode, SystemConfig};
use crate::prefetch::Prefetcher;
use serde::Deserialize;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, name: &str, n: usize) -> Result<Vec<T>> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(Error::InvalidConfig(format!("{name} has {} entries, expected {n}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemParams {
    num_errh: Option<usize>,
    num_ue: Option<usize>,
    antennas_errh: Option<OneOrMany<usize>>,
    antennas_ue: Option<OneOrMany<usize>>,
    library_size: Option<usize>,
    file_size: Option<f64>,
    zipf_exponent: Option<f64>,
    fronthaul_capacity: Option<OneOrMany<f64>>,
    power_budget: Option<OneOrMany<f64>>,
    fractional_cache: Option<OneOrMany<f64>>,
    noise_level: Option<f64>,
    cell_radius: Option<f64>,
    pathloss_ref: Option<f64>,
    pathloss_exp: Option<f64>,
}

impl SystemParams {
    fn build(&self) -> Result<SystemConfig> {
        let d = SystemConfig::default();
        let num_errh = self.num_errh.unwrap_or(d.num_errh);
        let num_ue = self.num_ue.unwrap_or(d.num_ue);
        let per = |v: &Option<OneOrMany<f64>>, name: &str, fallback: f64, n: usize| match v {
            Some(v) => v.expand(name, n),
            None => Ok(vec![fallback; n]),
        };
        let count = |v: &Option<OneOrMany<usize>>, name: &str, n: usize| match v {
            Some(v) => v.expand(name, n),
            None => Ok(vec![1; n]),
        };
        let cfg = SystemConfig {
            num_errh,
            num_ue,
            antennas_errh: count(&self.antennas_errh, "antennas_errh", num_errh)?,
            antennas_ue: count(&self.antennas_ue, "antennas_ue", num_ue)?,
            library_size: self.library_size.unwrap_or(d.library_size),
            file_size: self.file_size.unwrap_or(d.file_size),
            zipf_exponent: self.zipf_exponent.unwrap_or(d.zipf_exponent),
            fronthaul_capacity: per(&self.fronthaul_capacity, "fronthaul_capacity", d.fronthaul_capacity[0], num_errh)?,
            power_budget: per(&self.power_budget, "power_budget", d.power_budget[0], num_errh)?,
            fractional_cache: per(&self.fractional_cache, "fractional_cache", d.fractional_cache[0], num_errh)?,
            noise_level: self.noise_level.unwrap_or(d.noise_level),
            cell_radius: self.cell_radius.unwrap_or(d.cell_radius),
            pathloss_ref: self.pathloss_ref.unwrap_or(d.pathloss_ref),
            pathloss_exp: self.pathloss_exp.unwrap_or(d.pathloss_exp),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweptParameter {
    /// Zipf exponent γ.
    Gamma,
    /// Fractional cache size μ of every eRRH.
    Mu,
    /// Fronthaul capacity C of every eRRH.
    Capacity,
    /// File size S.
    FileSize,
    /// `max_i P_i / N_0` in dB, applied through the noise level.
    Snr,
}

impl SweptParameter {
    pub fn label(self) -> &'static str {
        match self {
            SweptParameter::Gamma => "gamma",
            SweptParameter::Mu => "mu",
            SweptParameter::Capacity => "C",
            SweptParameter::FileSize => "S",
            SweptParameter::Snr => "snr",
        }
    }

    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = cfg.clone();
        let n = cfg.num_errh;
        match self {
            SweptParameter::Gamma => cfg.zipf_exponent = value,
            SweptParameter::Mu => cfg.fractional_cache = vec![value; n],
            SweptParameter::Capacity => cfg.fronthaul_capacity = vec![value; n],
            SweptParameter::FileSize => cfg.file_size = value,
            SweptParameter::Snr => {
                let p = cfg.power_budget.iter().copied().fold(0.0, f64::max);
                cfg.noise_level = p / 10f64.powf(value / 10.0);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SweptParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gamma" | "zipf_exponent" => Ok(SweptParameter::Gamma),
            "mu" | "fractional_cache" => Ok(SweptParameter::Mu),
            "C" | "c" | "fronthaul_capacity" => Ok(SweptParameter::Capacity),
            "S" | "s" | "file_size" => Ok(SweptParameter::FileSize),
            "snr" | "SNR" => Ok(SweptParameter::Snr),
            other => Err(Error::InvalidConfig(format!("unknown swept parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    swept_parameter: String,
    grid: Vec<f64>,
    modes: Vec<String>,
    #[serde(default)]
    hard_nf: Vec<usize>,
    prefetchers: Vec<String>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    base_seed: u64,
    #[serde(default)]
    fixed_parameters: SystemParams,
}

fn default_trials() -> usize {
    20
}

/// A full sweep: grid × modes × prefetchers × trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub swept_parameter: SweptParameter,
    pub grid: Vec<f64>,
    pub fixed_parameters: SystemConfig,
    pub modes: Vec<Mode>,
    /// `N_F` values for hard and hybrid rows.
    pub hard_nf: Vec<usize>,
    pub prefetchers: Vec<Prefetcher>,
    pub trials: usize,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawSweep = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let spec = Self {
            swept_parameter: raw.swept_parameter.parse()?,
            grid: raw.grid,
            fixed_parameters: raw.fixed_parameters.build()?,
            modes: raw.modes.iter().map(|m| m.parse()).collect::<Result<_>>()?,
            hard_nf: raw.hard_nf,
            prefetchers: raw.prefetchers.iter().map(|p| p.parse()).collect::<Result<_>>()?,
            trials: raw.trials,
            base_seed: raw.base_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("grid must not be empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.modes.is_empty() || self.prefetchers.is_empty() {
            return Err(Error::InvalidConfig("modes and prefetchers must not be empty".into()));
        }
        let needs_nf = self.modes.iter().any(|m| m.uses_hard_transfer());
        if needs_nf && self.hard_nf.is_empty() {
            return Err(Error::InvalidConfig("hard and hybrid modes need at least one hard_nf value".into()));
        }
        if let Some(&n) = self.hard_nf.iter().find(|&&n| n > self.fixed_parameters.num_errh) {
            return Err(Error::InvalidConfig(format!("hard_nf {n} exceeds the number of eRRHs")));
        }
        for &v in &self.grid {
            self.swept_parameter.apply(&self.fixed_parameters, v)?;
        }
        Ok(())
    }

    /// `(mode, N_F)` pairs in row order; soft rows carry no `N_F`.
    pub fn mode_variants(&self) -> Vec<(Mode, Option<usize>)> {
        let mut out = Vec::new();
        for &m in &self.modes {
            if m.uses_hard_transfer() {
                out.extend(self.hard_nf.iter().map(|&n| (m, Some(n))));
            } else {
                out.push((m, None));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolve {
    mode: String,
    prefetcher: String,
    #[serde(default)]
    nf: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    fixed_parameters: SystemParams,
}

/// One instance: system parameters, policy and the random seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSpec {
    pub fixed_parameters: SystemConfig,
    pub mode: Mode,
    pub prefetcher: Prefetcher,
    pub nf: usize,
    pub seed: u64,
}

impl SolveSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawSolve = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let spec = Self {
            fixed_parameters: raw.fixed_parameters.build()?,
            mode: raw.mode.parse()?,
            prefetcher: raw.prefetcher.parse()?,
            nf: raw.nf,
            seed: raw.seed,
        };
        if spec.nf > spec.fixed_parameters.num_errh {
            return Err(Error::InvalidConfig("nf exceeds the number of eRRHs".into()));
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
swept_parameter = "gamma"
grid = [0.1, 2.0]
modes = ["hard", "soft", "hybrid"]
hard_nf = [0, 3]
prefetchers = ["cmp", "cd"]
trials = 4
base_seed = 7

[fixed_parameters]
num_errh = 3
fronthaul_capacity = 0.2
fractional_cache = [0.3333333333, 0.3333333333, 0.3333333333]
"#;

    #[test]
    fn sweep_parses_with_defaults_and_lists() {
        let spec = SweepSpec::from_toml(SWEEP).unwrap();
        assert_eq!(spec.swept_parameter, SweptParameter::Gamma);
        assert_eq!(spec.fixed_parameters.fronthaul_capacity, vec![0.2; 3]);
        assert_eq!(spec.fixed_parameters.noise_level, 0.01);
        assert_eq!(spec.trials, 4);
        assert_eq!(
            spec.mode_variants(),
            vec![(Mode::Hard, Some(0)), (Mode::Hard, Some(3)), (Mode::Soft, None), (Mode::Hybrid, Some(0)), (Mode::Hybrid, Some(3))]
        );
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        assert!(SweepSpec::from_toml(&SWEEP.replace("grid = [0.1, 2.0]", "grid = []")).is_err());
        assert!(SweepSpec::from_toml(&SWEEP.replace("trials = 4", "trials = 0")).is_err());
        assert!(SweepSpec::from_toml(&SWEEP.replace("hard_nf = [0, 3]", "hard_nf = [4]")).is_err());
        assert!(SweepSpec::from_toml(&SWEEP.replace("num_errh = 3", "num_errh = 3\nbogus = 1")).is_err());
        assert!(SweepSpec::from_toml(&SWEEP.replace("fronthaul_capacity = 0.2", "fronthaul_capacity = [0.2]")).is_err());
        assert!(SweepSpec::from_toml(&SWEEP.replace("\"gamma\"", "\"delta\"")).is_err());
    }

    #[test]
    fn swept_parameters_apply() {
        let cfg = SystemConfig::default();
        assert_eq!(SweptParameter::Mu.apply(&cfg, 0.5).unwrap().fractional_cache, vec![0.5; 3]);
        assert_eq!(SweptParameter::Capacity.apply(&cfg, 2.0).unwrap().fronthaul_capacity, vec![2.0; 3]);
        assert!((SweptParameter::Snr.apply(&cfg, 20.0).unwrap().noise_level - 0.01).abs() < 1e-15);
        assert!(SweptParameter::Mu.apply(&cfg, 1.5).is_err());
    }

    #[test]
    fn solve_spec_parses() {
        let spec = SolveSpec::from_toml("mode = \"soft\"\nprefetcher = \"fcd\"\nseed = 3\n[fixed_parameters]\nlibrary_size = 6\n").unwrap();
        assert_eq!(spec.mode, Mode::Soft);
        assert_eq!(spec.prefetcher, Prefetcher::Fcd);
        assert_eq!(spec.fixed_parameters.library_size, 6);
    }
}
