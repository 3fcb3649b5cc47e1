//! Strictly feasible starting points for the outer iterations.

use super::structure::{Iterate, Structure};
use crate::linalg::{self, CMat};
use crate::model::{DeliverySolution, Mode};
use crate::scenario::complex_normal;
use num_complex::Complex64;
use rand::Rng;

/// Random PSD covariances on the available rows, power-scaled to half the
/// budget, quantization noise at a quarter of the budget, then quantized
/// rows shrunk until the exact fronthaul usage is below its target.
pub(crate) fn random_start<R: Rng + ?Sized>(st: &Structure, rng: &mut R) -> Iterate {
    let cfg = &st.inst.cfg;
    let n_r = cfg.total_errh_antennas();
    let subs = st.live.len();
    let mut w = vec![linalg::zeros(n_r, n_r); subs];
    for s in 0..subs {
        if !st.live[s] {
            continue;
        }
        let a = st.selectors[s].ncols();
        let g = CMat::from_fn(a, a, |_, _| complex_normal(rng));
        let x = (&g * g.adjoint()) / Complex64::new(a as f64, 0.0) + linalg::scaled_identity(a, 0.1);
        w[s] = linalg::hermitize(&linalg::congruence(&st.selectors[s], &x));
    }
    for i in 0..cfg.num_errh {
        let signal = signal_power(&w, cfg.antenna_rows(i));
        if signal > 0.0 {
            scale_rows(&mut w, 0..subs, cfg.antenna_rows(i), (0.5 * cfg.power_budget[i] / signal).sqrt());
        }
    }
    let omega = (0..cfg.num_errh)
        .map(|i| {
            let n = cfg.antennas_errh[i];
            match st.omega_var[i] {
                Some(_) => linalg::scaled_identity(n, 0.25 * cfg.power_budget[i] / n as f64),
                None => linalg::zeros(n, n),
            }
        })
        .collect();
    let mut it = Iterate { w, omega, rates: vec![0.0; subs] };
    let share = if st.mode == Mode::Hybrid { 0.5 } else { 0.95 };
    for i in 0..cfg.num_errh {
        if st.omega_var[i].is_some() {
            shrink_quantized(st, &mut it, i, share * cfg.fronthaul_capacity[i]);
        }
    }
    choose_rates(st, &mut it, 0.5, 0.9);
    it
}

/// Boundary solution of another run moved into the interior of this mode's
/// feasible set; the solver's feasibility phase finishes the job.
pub(crate) fn from_solution(st: &Structure, sol: &DeliverySolution) -> Iterate {
    let cfg = &st.inst.cfg;
    let n_r = cfg.total_errh_antennas();
    let subs = st.live.len();
    let w: Vec<CMat> = (0..subs)
        .map(|s| {
            if st.live[s] {
                let k = &st.selectors[s];
                linalg::hermitize(&(k * (k.adjoint() * &sol.covariances[s] * k) * k.adjoint()))
            } else {
                linalg::zeros(n_r, n_r)
            }
        })
        .collect();
    let omega = (0..cfg.num_errh)
        .map(|i| {
            let n = cfg.antennas_errh[i];
            match st.omega_var[i] {
                Some(_) => {
                    let base = if st.mode.uses_quantization() && sol.mode.uses_quantization() {
                        linalg::hermitize(&sol.quant_covariances[i])
                    } else {
                        linalg::zeros(n, n)
                    };
                    base + linalg::scaled_identity(n, 2.0 * st.omega_floor(i))
                }
                None => linalg::zeros(n, n),
            }
        })
        .collect();
    let mut it = Iterate { w, omega, rates: vec![0.0; subs] };
    for i in 0..cfg.num_errh {
        let rows = cfg.antenna_rows(i);
        let room = cfg.power_budget[i] * (1.0 - 1e-7) - linalg::trace_re(&it.omega[i]);
        let signal = signal_power(&it.w, rows.clone());
        if signal > room && signal > 0.0 {
            scale_rows(&mut it.w, 0..subs, rows, (room.max(0.0) / signal).sqrt());
        }
    }
    let q = st.deliverable(&it);
    for s in 0..subs {
        if st.live[s] {
            it.rates[s] = sol.rates[s].min(q[s]).max(0.0);
        }
    }
    it
}

/// Rates at `frac` of what is deliverable, scaled so the hard loads use at
/// most `load_frac` of the fronthaul left after quantized signals.
pub(crate) fn choose_rates(st: &Structure, it: &mut Iterate, frac: f64, load_frac: f64) {
    let inst = &st.inst;
    let q = st.deliverable(it);
    for (s, _, l) in inst.requested_subfiles() {
        it.rates[s] = if st.live[s] { frac * q[s].min(inst.split.size(l)) } else { 0.0 };
    }
    let mut factor: f64 = 1.0;
    for i in 0..inst.cfg.num_errh {
        let load = st.load(it, i);
        if load > 0.0 {
            let room = (inst.cfg.fronthaul_capacity[i] - st.usage(it, i)).max(0.0);
            factor = factor.min(load_frac * room / load);
        }
    }
    for r in &mut it.rates {
        *r *= factor;
    }
}

/// Epigraph variable strictly below the achieved minimum.
pub(crate) fn epigraph_start(it: &Iterate, num_subfiles: usize) -> f64 {
    let m = it.rates.chunks(num_subfiles).map(|c| c.iter().sum::<f64>()).fold(f64::INFINITY, f64::min);
    m - (0.1 * m.abs() + 1e-3)
}

fn signal_power(w: &[CMat], rows: std::ops::Range<usize>) -> f64 {
    w.iter().map(|m| rows.clone().map(|r| m[(r, r)].re).sum::<f64>()).sum()
}

/// `W ← D W D` with `D` scaling `rows` by `a`, for the covariances in `subs`.
fn scale_rows<I: IntoIterator<Item = usize>>(w: &mut [CMat], subs: I, rows: std::ops::Range<usize>, a: f64) {
    for s in subs {
        let m = &mut w[s];
        for r in rows.clone() {
            m.row_mut(r).scale_mut(a);
            m.column_mut(r).scale_mut(a);
        }
    }
}

/// Bisection on the amplitude of the quantized signals at eRRH `i` until
/// the exact fronthaul usage drops to `target`.
fn shrink_quantized(st: &Structure, it: &mut Iterate, i: usize, target: f64) {
    if st.usage(it, i) <= target {
        return;
    }
    let rows = st.inst.cfg.antenna_rows(i);
    let quantized = st.quantized[i].clone();
    let original = it.w.clone();
    let usage_at = |a: f64, it: &mut Iterate| {
        for &s in &quantized {
            it.w[s] = original[s].clone();
        }
        scale_rows(&mut it.w, quantized.iter().copied(), rows.clone(), a);
        st.usage(it, i)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if usage_at(mid, it) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    usage_at(lo, it);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use crate::rates;
    use crate::scenario::{sample_scenario, RngSeed, Stream};

    fn instance(mu: f64, c: f64, l: usize) -> Instance {
        let cfg = SystemConfig::symmetric(3, 3, 3, 1.0, 0.0, mu, c, 1.0, 0.01);
        let (channel, requests) = sample_scenario(&cfg, RngSeed(17)).unwrap();
        let (split, _) = SplitScheme::new(vec![1.0 / l as f64; l], 1.0).unwrap();
        let cache = CacheState::empty(3, l, 3);
        let assignment = FronthaulAssignment::none(3, l, 3);
        Instance::new(cfg, split, cache, channel, requests, assignment).unwrap()
    }

    fn check_strict(st: &Structure, it: &Iterate) {
        let cfg = &st.inst.cfg;
        for i in 0..cfg.num_errh {
            let power: f64 = it.w.iter().map(|m| cfg.antenna_rows(i).map(|r| m[(r, r)].re).sum::<f64>()).sum::<f64>()
                + linalg::trace_re(&it.omega[i]);
            assert!(power < cfg.power_budget[i], "power {power}");
            let used = st.usage(it, i) + st.load(it, i);
            assert!(used < cfg.fronthaul_capacity[i], "fronthaul {used}");
        }
        let q = st.deliverable(it);
        for s in 0..it.rates.len() {
            assert!(it.rates[s] < q[s] || !st.live[s]);
        }
    }

    #[test]
    fn soft_start_under_huge_capacity_is_power_bound() {
        let inst = instance(0.0, 1e6, 1);
        let st = Structure::new(&inst, Mode::Soft, 1e-8);
        let it = random_start(&st, &mut RngSeed(1).rng(Stream::Init));
        for i in 0..3 {
            let signal = signal_power(&it.w, inst.cfg.antenna_rows(i));
            assert!((signal - 0.5).abs() < 1e-12);
        }
        check_strict(&st, &it);
    }

    #[test]
    fn tight_capacity_triggers_shrinking() {
        let inst = instance(0.0, 0.05, 2);
        let st = Structure::new(&inst, Mode::Soft, 1e-8);
        let it = random_start(&st, &mut RngSeed(2).rng(Stream::Init));
        for i in 0..3 {
            let g = rates::fronthaul_usage(&st.inst, Mode::Soft, i, &it.w, &it.omega).unwrap();
            assert!(g <= 0.95 * 0.05 + 1e-12 && g > 0.9 * 0.05 * 0.95, "g = {g}");
        }
        check_strict(&st, &it);
    }

    #[test]
    fn hard_start_respects_availability_and_load() {
        let base = instance(0.0, 0.3, 2);
        let assign = crate::cccp::assign_fronthaul_nf(&base.channel, &base.cache, &base.requests, 1);
        let inst = base.with_assignment(assign).unwrap();
        let st = Structure::new(&inst, Mode::Hard, 1e-8);
        let it = random_start(&st, &mut RngSeed(3).rng(Stream::Init));
        check_strict(&st, &it);
        for (s, f, l) in st.inst.requested_subfiles() {
            for i in 0..3 {
                if !st.inst.assignment.is_transferred(f, l, i) {
                    assert!(it.w[s].row(i).iter().all(|z| z.norm() == 0.0));
                }
            }
        }
    }

    #[test]
    fn unavailable_subfile_is_pinned() {
        let inst = instance(0.0, 1.0, 1);
        let st = Structure::new(&inst, Mode::Hard, 1e-8);
        assert!(st.live.iter().all(|&b| !b));
        assert!(st.trivially_zero());
    }
}
