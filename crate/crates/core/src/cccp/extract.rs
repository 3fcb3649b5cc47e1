//! Rank truncation of the relaxed covariances into precoders.

use crate::linalg::{self, CMat};
use crate::model::{DeliverySolution, Instance};
use crate::rates;
use num_complex::Complex64;

/// Streams carried by a subfile: at most the dimension of its support and
/// the largest receive dimension among its requesters.
pub fn stream_count(inst: &Instance, w: &CMat, f: usize) -> usize {
    let support = (0..w.nrows()).filter(|&r| w[(r, r)].re > 0.0).count();
    let receive = inst.requesters(f).map(|k| inst.cfg.antennas_ue[k]).max().unwrap_or(0);
    support.min(receive)
}

/// Top-`n` eigenvectors scaled by the square roots of their eigenvalues.
pub fn truncate(w: &CMat, n: usize) -> CMat {
    let (vals, vecs) = linalg::hermitian_eigen_desc(w);
    let mut v = linalg::zeros(w.nrows(), n);
    for j in 0..n.min(vals.len()) {
        let scale = Complex64::new(vals[j].max(0.0).sqrt(), 0.0);
        v.set_column(j, &(vecs.column(j) * scale));
    }
    v
}

/// Replaces each covariance by its truncation `V̄ V̄†`, rescales all
/// precoders by a common factor if power is exceeded, and recomputes the
/// rates. `relaxed_min_rate` keeps the value before truncation.
pub fn extract_precoders(sol: &DeliverySolution, inst: &Instance) -> DeliverySolution {
    let inst = inst.with_assignment(sol.assignment.clone()).expect("solution assignment matches the instance");
    let cfg = &inst.cfg;
    let mut precoders: Vec<CMat> = inst
        .requested_subfiles()
        .map(|(s, f, _)| truncate(&sol.covariances[s], stream_count(&inst, &sol.covariances[s], f)))
        .collect();
    let mut out = sol.clone();
    out.covariances = precoders.iter().map(|v| linalg::hermitize(&(v * v.adjoint()))).collect();
    let factor = (0..cfg.num_errh)
        .map(|i| {
            let signal = out.power_used(cfg, i) - linalg::trace_re(&sol.quant_covariances[i]);
            let room = cfg.power_budget[i] - linalg::trace_re(&sol.quant_covariances[i]);
            if signal > room && signal > 0.0 {
                (room.max(0.0) / signal).min(1.0)
            } else {
                1.0
            }
        })
        .fold(1.0, f64::min);
    if factor < 1.0 {
        let amp = Complex64::new(factor.sqrt(), 0.0);
        for v in &mut precoders {
            *v *= amp;
        }
        for w in &mut out.covariances {
            *w *= Complex64::new(factor, 0.0);
        }
    }
    let q = rates::deliverable_rates(&inst, sol.mode, &out.covariances, &sol.quant_covariances);
    for (s, _, l) in inst.requested_subfiles() {
        out.rates[s] = sol.rates[s].min(inst.split.size(l)).min(q[s]).max(0.0);
    }
    out.precoders = precoders;
    out.relaxed_min_rate = sol.min_rate;
    out.min_rate = out.exact_min_rate(inst.num_subfiles());
    if !out.soft_budget.is_empty() {
        out.soft_budget = (0..cfg.num_errh)
            .map(|i| rates::fronthaul_usage(&inst, sol.mode, i, &out.covariances, &out.quant_covariances).unwrap_or(0.0))
            .collect();
    }
    out
}
