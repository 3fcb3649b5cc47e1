//! Checks a delivery solution against the exact (non-convexified) constraints.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DeliverySolution, Instance, Mode};
use crate::rates;
use std::fmt;

/// Relative residual above which a constraint counts as violated.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintFamily {
    Structure,
    Psd,
    Power,
    Rate,
    SubfileCap,
    NonNegative,
    Fronthaul,
    MinRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family: ConstraintFamily,
    /// Largest relative residual within the family.
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.violations.iter().map(|v| v.residual).fold(0.0, f64::max)
    }

    fn record(&mut self, family: ConstraintFamily, residual: f64, detail: impl FnOnce() -> String) {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        if residual <= FEASIBILITY_TOL {
            return;
        }
        match self.violations.iter_mut().find(|v| v.family == family) {
            Some(v) if v.residual >= residual => {}
            Some(v) => {
                v.residual = residual;
                v.detail = detail();
            }
            None => self.violations.push(Violation { family, residual, detail: detail() }),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_feasible() {
            return write!(f, "feasible");
        }
        for v in &self.violations {
            writeln!(f, "{:?}: {:.3e} ({})", v.family, v.residual, v.detail)?;
        }
        Ok(())
    }
}

fn check_dims(sol: &DeliverySolution, inst: &Instance) -> Result<()> {
    let n_r = inst.cfg.total_errh_antennas();
    let subs = inst.num_requested_subfiles();
    if sol.covariances.len() != subs || sol.rates.len() != subs {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} covariances and {} rates, expected {subs}",
            sol.covariances.len(),
            sol.rates.len()
        )));
    }
    if sol.covariances.iter().any(|w| w.shape() != (n_r, n_r)) {
        return Err(Error::DimensionMismatch("covariance shape".into()));
    }
    if sol.quant_covariances.len() != inst.cfg.num_errh
        || sol.quant_covariances.iter().zip(&inst.cfg.antennas_errh).any(|(o, &n)| o.shape() != (n, n))
    {
        return Err(Error::DimensionMismatch("quantization covariance shape".into()));
    }
    if sol.assignment.transfer.dims() != inst.assignment.transfer.dims() {
        return Err(Error::DimensionMismatch("assignment shape".into()));
    }
    Ok(())
}

/// Evaluates the exact constraints of `sol.mode` at `sol`, using the fronthaul
/// assignment stored in the solution.
pub fn validate_solution(sol: &DeliverySolution, inst: &Instance) -> Result<ValidationReport> {
    check_dims(sol, inst)?;
    let inst = inst.with_assignment(sol.assignment.clone())?;
    let cfg = &inst.cfg;
    let mode = sol.mode;
    let mut report = ValidationReport::default();
    let power_scale = cfg.power_budget.iter().copied().fold(0.0, f64::max);

    for (s, w) in sol.covariances.iter().enumerate() {
        let scale = power_scale.max(linalg::trace_re(w).abs());
        report.record(ConstraintFamily::Structure, linalg::hermitian_defect(w) / scale, || format!("W[{s}] not Hermitian"));
        let (lo, hi) = linalg::eigen_range(w);
        if !linalg::is_psd(w) {
            report.record(ConstraintFamily::Psd, -lo / hi.abs().max(f64::MIN_POSITIVE), || format!("W[{s}] min eigenvalue {lo:.3e}"));
        }
        if mode == Mode::Hard {
            let (f, l) = inst.sub_file(s);
            for i in 0..cfg.num_errh {
                if inst.cache.is_cached(f, l, i) || inst.assignment.is_transferred(f, l, i) {
                    continue;
                }
                let leak = cfg
                    .antenna_rows(i)
                    .flat_map(|r| w.row(r).iter().map(|z| z.norm()).collect::<Vec<_>>())
                    .fold(0.0, f64::max);
                report.record(ConstraintFamily::Structure, leak / power_scale, || {
                    format!("W[{s}] has signal at eRRH {i} without the subfile")
                });
            }
        }
    }
    for (i, om) in sol.quant_covariances.iter().enumerate() {
        let scale = cfg.power_budget[i];
        report.record(ConstraintFamily::Structure, linalg::hermitian_defect(om) / scale, || format!("Ω[{i}] not Hermitian"));
        if !linalg::is_psd(om) {
            let (lo, hi) = linalg::eigen_range(om);
            report.record(ConstraintFamily::Psd, -lo / hi.abs().max(f64::MIN_POSITIVE), || format!("Ω[{i}] min eigenvalue {lo:.3e}"));
        }
        if mode == Mode::Hard && om.iter().any(|z| z.norm() > 0.0) {
            report.record(ConstraintFamily::Structure, trace_norm(om) / scale, || format!("Ω[{i}] nonzero in hard mode"));
        }
    }

    for i in 0..cfg.num_errh {
        let used = sol.power_used(cfg, i);
        let p = cfg.power_budget[i];
        report.record(ConstraintFamily::Power, (used - p) / p, || format!("eRRH {i} uses {used:.6} of {p}"));
    }

    let omega = mode.uses_quantization().then_some(sol.quant_covariances.as_slice());
    for k in 0..cfg.num_ue {
        let slot = inst.requests.slot_of(inst.requests.file_of(k)).expect("requested file has a slot");
        for l in 0..inst.num_subfiles() {
            let s = inst.sub_index(slot, l);
            let q = rates::sic_rate(&inst, k, l, &sol.covariances, omega);
            let r = sol.rates[s];
            report.record(ConstraintFamily::Rate, (r - q) / q.abs().max(1.0), || format!("UE {k} subfile {l}: R = {r:.6} > q = {q:.6}"));
        }
    }
    for (s, _, l) in inst.requested_subfiles() {
        let r = sol.rates[s];
        let cap = inst.split.size(l);
        report.record(ConstraintFamily::SubfileCap, (r - cap) / cap, || format!("R[{s}] = {r:.6} exceeds S_l = {cap}"));
        report.record(ConstraintFamily::NonNegative, -r, || format!("R[{s}] = {r:.3e}"));
    }

    for i in 0..cfg.num_errh {
        let c = cfg.fronthaul_capacity[i];
        let load = if mode.uses_hard_transfer() { rates::hard_fronthaul_load(&inst, i, &sol.rates) } else { 0.0 };
        let soft = if mode.uses_quantization() {
            rates::fronthaul_usage(&inst, mode, i, &sol.covariances, &sol.quant_covariances).unwrap_or(f64::INFINITY)
        } else {
            0.0
        };
        let used = load + soft;
        report.record(ConstraintFamily::Fronthaul, (used - c) / c.max(1.0), || format!("eRRH {i} fronthaul {used:.6} > C = {c}"));
    }

    let achieved = sol.exact_min_rate(inst.num_subfiles());
    report.record(ConstraintFamily::MinRate, (sol.min_rate - achieved) / achieved.abs().max(1.0), || {
        format!("reported R_min {:.6} above achieved {achieved:.6}", sol.min_rate)
    });
    Ok(report)
}

fn trace_norm(a: &linalg::CMat) -> f64 {
    a.iter().map(|z| z.norm()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use num_complex::Complex64;

    fn instance() -> Instance {
        let cfg = SystemConfig::symmetric(2, 2, 2, 1.0, 0.0, 0.0, 1.0, 1.0, 0.01);
        let blocks = vec![
            vec![scalar(0.8, 0.1), scalar(0.2, -0.3)],
            vec![scalar(-0.1, 0.4), scalar(0.9, 0.0)],
        ];
        let channel = ChannelRealization::new(&cfg, blocks, None).unwrap();
        Instance::new(
            cfg,
            SplitScheme::whole(1.0),
            CacheState::empty(2, 1, 2),
            channel,
            RequestProfile::new(vec![0, 1], 2).unwrap(),
            FronthaulAssignment::none(2, 1, 2),
        )
        .unwrap()
    }

    fn scalar(re: f64, im: f64) -> linalg::CMat {
        linalg::CMat::from_element(1, 1, Complex64::new(re, im))
    }

    #[test]
    fn zero_point_is_feasible() {
        let inst = instance();
        for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
            let sol = DeliverySolution::zero(mode, &inst);
            assert!(validate_solution(&sol, &inst).unwrap().is_feasible());
        }
    }

    #[test]
    fn excess_power_is_reported() {
        let inst = instance();
        let mut sol = DeliverySolution::zero(Mode::Soft, &inst);
        sol.covariances[0] = linalg::scaled_identity(2, 0.6);
        sol.covariances[1] = linalg::scaled_identity(2, 0.6);
        sol.quant_covariances = vec![linalg::scaled_identity(1, 1e3); 2];
        let report = validate_solution(&sol, &inst).unwrap();
        let power = report.violations.iter().find(|v| v.family == ConstraintFamily::Power).unwrap();
        assert!(power.residual > 0.0);
    }

    #[test]
    fn hard_mode_signal_without_subfile_is_structural() {
        let inst = instance();
        let mut sol = DeliverySolution::zero(Mode::Hard, &inst);
        sol.covariances[0] = linalg::scaled_identity(2, 0.1);
        let report = validate_solution(&sol, &inst).unwrap();
        assert!(report.violations.iter().any(|v| v.family == ConstraintFamily::Structure));
    }

    #[test]
    fn wrong_dimensions_are_an_error() {
        let inst = instance();
        let mut sol = DeliverySolution::zero(Mode::Hard, &inst);
        sol.rates.pop();
        assert!(validate_solution(&sol, &inst).is_err());
    }
}
