use super::*;
use crate::linalg;
use crate::model::*;
use crate::prefetch::{prefetch, Prefetcher};
use crate::scenario::{sample_scenario, RngSeed, Stream};
use num_complex::Complex64;

fn random_instance(seed: u64, policy: Prefetcher, cfg: SystemConfig, n_f: usize) -> Instance {
    let (channel, requests) = sample_scenario(&cfg, RngSeed(seed)).unwrap();
    let (split, cache) = prefetch(policy, &cfg, &mut RngSeed(seed).rng(Stream::Prefetch)).unwrap();
    let l = split.num_subfiles();
    let base = Instance::new(cfg.clone(), split, cache, channel, requests, FronthaulAssignment::none(cfg.library_size, l, cfg.num_errh))
        .unwrap();
    let assign = assign_fronthaul_nf(&base.channel, &base.cache, &base.requests, n_f);
    base.with_assignment(assign).unwrap()
}

fn small_cfg(mu: f64, c: f64) -> SystemConfig {
    SystemConfig::symmetric(2, 2, 3, 1.0, 0.0, mu, c, 1.0, 0.01)
}

fn assert_monotone(sol: &DeliverySolution) {
    for w in sol.trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-8, "trace {:?}", sol.trace);
    }
}

fn assert_valid(sol: &DeliverySolution, inst: &Instance) {
    let report = validate_solution(sol, inst).unwrap();
    assert!(report.is_feasible(), "{report}");
}

#[test]
fn single_link_reaches_capacity() {
    // One eRRH caching the only file, one UE: R = min(S, log2(1 + P|h|²/N0)).
    let cfg = SystemConfig::symmetric(1, 1, 1, 1.0, 0.0, 1.0, 0.0, 1.0, 0.01);
    let h = Complex64::new(0.3, -0.4);
    let channel = ChannelRealization::new(&cfg, vec![vec![CMat::from_element(1, 1, h)]], None).unwrap();
    for (file_size, want) in [(10.0, (1.0f64 + 25.0).log2()), (2.0, 2.0)] {
        let cfg = SystemConfig { file_size, ..cfg.clone() };
        let split = SplitScheme::whole(file_size);
        let mut cache = CacheState::empty(1, 1, 1);
        cache.cached.set(0, 0, 0, true);
        let inst = Instance::new(
            cfg,
            split,
            cache,
            channel.clone(),
            RequestProfile::new(vec![0], 1).unwrap(),
            FronthaulAssignment::none(1, 1, 1),
        )
        .unwrap();
        for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
            let sol = run_cccp(&inst, mode, &CccpSettings::default()).unwrap();
            assert!((sol.min_rate - want).abs() < 1e-4, "{mode}: {} vs {want}", sol.min_rate);
            assert_valid(&sol, &inst);
        }
    }
}

#[test]
fn nothing_reaches_the_edge_without_cache_or_fronthaul() {
    let inst = random_instance(3, Prefetcher::None, small_cfg(0.0, 0.0), 0);
    for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
        let sol = run_cccp(&inst, mode, &CccpSettings::default()).unwrap();
        assert!(sol.min_rate <= 1e-6);
        assert_valid(&sol, &inst);
    }
}

#[test]
fn runs_are_monotone_feasible_and_deterministic() {
    for seed in 0..3 {
        let inst = random_instance(seed, Prefetcher::Cmp, small_cfg(1.0 / 3.0, 0.5), 1);
        for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
            let settings = CccpSettings { seed, ..Default::default() };
            let sol = run_cccp(&inst, mode, &settings).unwrap();
            assert_monotone(&sol);
            assert_valid(&sol, &inst);
            assert_eq!(sol.min_rate, *sol.trace.last().unwrap());
            let again = run_cccp(&inst, mode, &settings).unwrap();
            assert_eq!(sol.min_rate.to_bits(), again.min_rate.to_bits());
        }
    }
}

#[test]
fn full_caching_ignores_fronthaul() {
    let seed = 5;
    let mut rates = Vec::new();
    for c in [0.1, 10.0] {
        let inst = random_instance(seed, Prefetcher::Full, small_cfg(1.0, c), 1);
        for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
            let sol = run_cccp(&inst, mode, &CccpSettings::default()).unwrap();
            assert_valid(&sol, &inst);
            rates.push(sol.min_rate);
        }
    }
    for r in &rates {
        assert!((r - rates[0]).abs() < 1e-3, "{rates:?}");
    }
}

#[test]
fn hybrid_from_soft_does_not_lose() {
    let inst = random_instance(8, Prefetcher::Cd, small_cfg(0.5, 0.8), 1);
    let settings = CccpSettings::default();
    let soft = run_cccp(&inst, Mode::Soft, &settings).unwrap();
    let hard = run_cccp(&inst, Mode::Hard, &settings).unwrap();
    let hybrid = run_hybrid(&inst, &settings, Some(&hard), Some(&soft)).unwrap();
    assert!(hybrid.min_rate >= soft.min_rate.max(hard.min_rate) - 1e-6);
    assert_valid(&hybrid, &inst);
}

#[test]
fn extraction_never_gains_and_stays_feasible() {
    let inst = random_instance(2, Prefetcher::Cmp, small_cfg(1.0 / 3.0, 1.0), 1);
    let sol = run_cccp(&inst, Mode::Soft, &CccpSettings::default()).unwrap();
    let out = extract_precoders(&sol, &inst);
    assert!(out.min_rate <= out.relaxed_min_rate + 1e-12);
    assert_eq!(out.relaxed_min_rate, sol.min_rate);
    assert_valid(&out, &inst);
    for (v, w) in out.precoders.iter().zip(&out.covariances) {
        assert!(v.ncols() <= 1);
        assert!((v * v.adjoint() - w).norm() < 1e-12);
    }
}

#[test]
fn rank_one_relaxation_extracts_exactly() {
    let cfg = SystemConfig::symmetric(2, 1, 1, 1.0, 0.0, 1.0, 0.0, 1.0, 0.01);
    let (channel, _) = sample_scenario(&cfg, RngSeed(4)).unwrap();
    let mut cache = CacheState::empty(1, 1, 2);
    cache.cached.set(0, 0, 0, true);
    cache.cached.set(0, 0, 1, true);
    let inst = Instance::new(
        SystemConfig { file_size: 100.0, ..cfg },
        SplitScheme::whole(100.0),
        cache,
        channel,
        RequestProfile::new(vec![0], 1).unwrap(),
        FronthaulAssignment::none(1, 1, 2),
    )
    .unwrap();
    let sol = run_cccp(&inst, Mode::Hard, &CccpSettings::default()).unwrap();
    let (vals, _) = linalg::hermitian_eigen_desc(&sol.covariances[0]);
    let out = extract_precoders(&sol, &inst);
    assert!(vals[1] <= 1e-6 * vals[0]);
    assert!((out.min_rate - sol.min_rate).abs() < 1e-6, "{} vs {}", out.min_rate, sol.min_rate);
}

#[test]
fn initialization_is_strictly_feasible() {
    let inst = random_instance(6, Prefetcher::Cmp, small_cfg(1.0 / 3.0, 0.3), 1);
    for mode in [Mode::Hard, Mode::Soft, Mode::Hybrid] {
        let (w, omega) = init_feasible(&inst, mode, &CccpSettings::default());
        let st = Structure::new(&inst, mode, 1e-8);
        let it = Iterate { w, omega, rates: vec![0.0; inst.num_requested_subfiles()] };
        assert!(start_is_feasible(&st, &it));
        let cfg = &inst.cfg;
        for i in 0..cfg.num_errh {
            let p: f64 = it.w.iter().map(|m| cfg.antenna_rows(i).map(|r| m[(r, r)].re).sum::<f64>()).sum();
            assert!(p + linalg::trace_re(&it.omega[i]) < cfg.power_budget[i]);
            if mode.uses_quantization() {
                let g = crate::rates::fronthaul_usage(&st.inst, mode, i, &it.w, &it.omega).unwrap();
                assert!(g < cfg.fronthaul_capacity[i]);
            }
        }
    }
}

#[test]
fn settings_are_validated() {
    assert!(CccpSettings::default().validate().is_ok());
    assert!(CccpSettings { restarts: 0, ..Default::default() }.validate().is_err());
    assert!(CccpSettings { omega_floor: 0.0, ..Default::default() }.validate().is_err());
}
