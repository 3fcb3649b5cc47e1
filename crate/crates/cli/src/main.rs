//! Command-line front end: solve one instance, run a sweep, or self-check.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fran_core::experiments::{self, SolveSpec, SweepSpec};
use fran_core::model::display_index;
use fran_core::CccpSettings;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "fran", version, about = "Delivery-phase optimization for cache-aided fog radio access networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one random instance described by a config file.
    Solve {
        config: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print one line per outer iteration.
        #[arg(long)]
        trace: bool,
    },
    /// Run a parameter sweep and write CSV.
    Sweep {
        config: PathBuf,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `trials`.
        #[arg(long)]
        trials: Option<usize>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the trial fan-out.
        #[arg(long)]
        threads: Option<usize>,
        /// Print per-run iteration dumps to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Run the built-in property checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    })
}

fn solve(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, trace: bool) -> Result<()> {
    let mut spec = SolveSpec::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let settings = CccpSettings { trace, ..Default::default() };
    let o = experiments::run_trial_outcome(&spec.fixed_parameters, spec.mode, spec.prefetcher, spec.nf, spec.seed, &settings)?;
    let mut w = output(&out)?;
    let inst = &o.instance;
    let sol = &o.extracted;
    writeln!(w, "mode {} prefetcher {} nf {} seed {}", spec.mode, spec.prefetcher, spec.nf, spec.seed)?;
    writeln!(w, "R_min {}", experiments::format_sig(sol.min_rate))?;
    writeln!(w, "relaxed R_min {}", experiments::format_sig(sol.relaxed_min_rate))?;
    let d = &o.relaxed.diagnostics;
    writeln!(w, "outer iterations {} newton steps {} solver failures {} converged {}", d.outer_iterations, d.newton_steps, d.solver_failures, d.converged)?;
    let requested: Vec<String> = inst.requests.requested().iter().map(|&f| display_index(f).to_string()).collect();
    writeln!(w, "requested files by UE: {}", requested.join(" "))?;
    for (s, f, l) in inst.requested_subfiles() {
        writeln!(w, "file {} subfile {} size {} rate {}", display_index(f), display_index(l), experiments::format_sig(inst.split.size(l)), experiments::format_sig(sol.rates[s]))?;
    }
    for i in 0..inst.cfg.num_errh {
        writeln!(w, "eRRH {} power {}", display_index(i), experiments::format_sig(sol.power_used(&inst.cfg, i)))?;
    }
    for line in &d.log {
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn sweep(config: PathBuf, seed: Option<u64>, trials: Option<usize>, out: Option<PathBuf>, threads: Option<usize>, trace: bool) -> Result<()> {
    let mut spec = SweepSpec::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    if let Some(t) = trials {
        spec.trials = t;
    }
    let settings = CccpSettings { trace, ..Default::default() };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let rows = pool.install(|| {
        experiments::run_sweep_with(&spec, &settings, |cell, t, res| {
            if !trace {
                return;
            }
            let mut lines = format!("# value {} mode {} prefetcher {} nf {:?} trial {t}\n", cell.value, cell.mode, cell.prefetcher, cell.nf);
            match res {
                Ok(o) => o.relaxed.diagnostics.log.iter().for_each(|l| lines.push_str(&format!("{l}\n"))),
                Err(e) => lines.push_str(&format!("failed: {e}\n")),
            }
            eprint!("{lines}");
        })
    })?;
    experiments::write_csv(&rows, output(&out)?)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { config, seed, out, trace } => solve(config, seed, out, trace),
        Command::Sweep { config, seed, trials, out, threads, trace } => sweep(config, seed, trials, out, threads, trace),
        Command::Selftest { seed } => {
            let results = experiments::selftest(seed);
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().any(|r| !r.passed) {
                bail!("self-test failed");
            }
            Ok(())
        }
    }
}
