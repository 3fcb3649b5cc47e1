//! Pre-fetching policies that fill the eRRH caches before delivery.

use crate::error::{Error, Result};
use crate::model::{CacheState, FronthaulAssignment, SplitScheme, SystemConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Cache placement policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prefetcher {
    /// Cache Most Popular.
    Cmp,
    /// Cache Distinct.
    Cd,
    /// Fractional Cache Distinct.
    Fcd,
    /// Empty caches.
    None,
    /// Every file cached everywhere.
    Full,
}

impl Prefetcher {
    pub fn label(self) -> &'static str {
        match self {
            Prefetcher::Cmp => "cmp",
            Prefetcher::Cd => "cd",
            Prefetcher::Fcd => "fcd",
            Prefetcher::None => "none",
            Prefetcher::Full => "full",
        }
    }

    /// Fractional cache size implied by the policy, if it fixes one.
    pub fn forced_mu(self) -> Option<f64> {
        match self {
            Prefetcher::None => Some(0.0),
            Prefetcher::Full => Some(1.0),
            _ => None,
        }
    }
}

impl fmt::Display for Prefetcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Prefetcher {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cmp" => Ok(Prefetcher::Cmp),
            "cd" => Ok(Prefetcher::Cd),
            "fcd" => Ok(Prefetcher::Fcd),
            "none" => Ok(Prefetcher::None),
            "full" => Ok(Prefetcher::Full),
            other => Err(Error::InvalidConfig(format!("unknown prefetcher '{other}'"))),
        }
    }
}

fn common_mu(cfg: &SystemConfig) -> Result<f64> {
    let mu = cfg.fractional_cache[0];
    if cfg.fractional_cache.iter().any(|&m| (m - mu).abs() > 1e-12) {
        return Err(Error::InvalidConfig("pre-fetching policies require equal fractional cache sizes".into()));
    }
    Ok(mu)
}

/// Number of whole files that fit in a cache of fractional size μ.
fn whole_files(mu: f64, num_files: usize) -> usize {
    ((mu * num_files as f64 + 1e-9).floor() as usize).min(num_files)
}

pub fn prefetch_cmp(cfg: &SystemConfig) -> Result<(SplitScheme, CacheState)> {
    let n_c = whole_files(common_mu(cfg)?, cfg.library_size);
    let mut cache = CacheState::empty(cfg.library_size, 1, cfg.num_errh);
    for f in 0..n_c {
        for i in 0..cfg.num_errh {
            cache.cached.set(f, 0, i, true);
        }
    }
    Ok((SplitScheme::whole(cfg.file_size), cache))
}

pub fn prefetch_cd(cfg: &SystemConfig) -> Result<(SplitScheme, CacheState)> {
    let n_c = whole_files(common_mu(cfg)?, cfg.library_size);
    let mut cache = CacheState::empty(cfg.library_size, 1, cfg.num_errh);
    for i in 0..cfg.num_errh {
        for f in (i..cfg.library_size).step_by(cfg.num_errh).take(n_c) {
            cache.cached.set(f, 0, i, true);
        }
    }
    Ok((SplitScheme::whole(cfg.file_size), cache))
}

pub fn prefetch_fcd<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<(SplitScheme, CacheState)> {
    let mu = common_mu(cfg)?;
    let n_r = cfg.num_errh;
    let files = cfg.library_size;
    let s = cfg.file_size;
    if mu <= 1.0 / n_r as f64 + 1e-12 {
        let mut sizes = vec![mu * s; n_r];
        let head: f64 = sizes.iter().sum();
        sizes.push((s - head).max(0.0));
        let mut raw = CacheState::empty(files, n_r + 1, n_r);
        let mut perm: Vec<usize> = (0..n_r).collect();
        for f in 0..files {
            perm.shuffle(rng);
            for (l, &i) in perm.iter().enumerate() {
                raw.cached.set(f, l, i, true);
            }
        }
        let (split, keep) = SplitScheme::new(sizes, s)?;
        return Ok((split, CacheState { cached: raw.cached.select_subfiles(&keep) }));
    }
    let rounds = ((mu * n_r as f64 + 1e-9).floor() as usize).min(n_r);
    let (split, _) = SplitScheme::new(vec![s / n_r as f64; n_r], s)?;
    let mut cache = CacheState::empty(files, n_r, n_r);
    let mut perm: Vec<usize> = (0..n_r).collect();
    for f in 0..files {
        for _ in 0..rounds {
            loop {
                perm.shuffle(rng);
                if perm.iter().enumerate().all(|(l, &i)| !cache.cached.get(f, l, i)) {
                    break;
                }
            }
            for (l, &i) in perm.iter().enumerate() {
                cache.cached.set(f, l, i, true);
            }
        }
    }
    Ok((split, cache))
}

/// Runs `policy`. `none` and `full` ignore the configured μ.
pub fn prefetch<R: Rng + ?Sized>(policy: Prefetcher, cfg: &SystemConfig, rng: &mut R) -> Result<(SplitScheme, CacheState)> {
    match policy {
        Prefetcher::Cmp => prefetch_cmp(cfg),
        Prefetcher::Cd => prefetch_cd(cfg),
        Prefetcher::Fcd => prefetch_fcd(cfg, rng),
        Prefetcher::None => Ok((SplitScheme::whole(cfg.file_size), CacheState::empty(cfg.library_size, 1, cfg.num_errh))),
        Prefetcher::Full => {
            let mut cache = CacheState::empty(cfg.library_size, 1, cfg.num_errh);
            for f in 0..cfg.library_size {
                for i in 0..cfg.num_errh {
                    cache.cached.set(f, 0, i, true);
                }
            }
            Ok((SplitScheme::whole(cfg.file_size), cache))
        }
    }
}

/// eRRHs holding subfile `(f, l)` after the fronthaul transfer.
pub fn availability(cache: &CacheState, assign: &FronthaulAssignment, f: usize, l: usize) -> Vec<usize> {
    let (_, _, n_r) = cache.cached.dims();
    (0..n_r).filter(|&i| cache.is_cached(f, l, i) || assign.is_transferred(f, l, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{RngSeed, Stream};
    use proptest::prelude::*;

    fn cfg(n_r: usize, files: usize, mu: f64) -> SystemConfig {
        SystemConfig::symmetric(n_r, 1, files, 1.0, 0.5, mu, 1.0, 1.0, 0.01)
    }

    fn cached_files(cache: &CacheState, i: usize) -> Vec<usize> {
        let (nf, nl, _) = cache.cached.dims();
        (0..nf).filter(|&f| (0..nl).any(|l| cache.is_cached(f, l, i))).collect()
    }

    fn rng() -> rand_chacha::ChaCha20Rng {
        RngSeed(7).rng(Stream::Prefetch)
    }

    #[test]
    fn cmp_examples() {
        let (_, c) = prefetch_cmp(&cfg(3, 4, 0.5)).unwrap();
        for i in 0..3 {
            assert_eq!(cached_files(&c, i), vec![0, 1]);
        }
        assert_eq!(prefetch_cmp(&cfg(3, 4, 0.0)).unwrap().1.cached.count(), 0);
        assert_eq!(prefetch_cmp(&cfg(3, 4, 1.0)).unwrap().1.cached.count(), 12);
    }

    #[test]
    fn cd_examples() {
        let (_, c) = prefetch_cd(&cfg(3, 6, 1.0 / 3.0)).unwrap();
        assert_eq!(cached_files(&c, 0), vec![0, 3]);
        assert_eq!(cached_files(&c, 1), vec![1, 4]);
        assert_eq!(cached_files(&c, 2), vec![2, 5]);
        assert_eq!(prefetch_cd(&cfg(3, 6, 0.0)).unwrap().1.cached.count(), 0);
        let (_, c) = prefetch_cd(&cfg(3, 3, 1.0)).unwrap();
        for i in 0..3 {
            assert_eq!(cached_files(&c, i), vec![i]);
        }
    }

    #[test]
    fn fcd_boundary_prunes_empty_tail() {
        let (split, c) = prefetch_fcd(&cfg(3, 4, 1.0 / 3.0), &mut rng()).unwrap();
        assert_eq!(split.num_subfiles(), 3);
        for i in 0..3 {
            assert!((c.memory_used(i, &split) - 4.0 / 3.0).abs() < 1e-12);
            for f in 0..4 {
                assert_eq!((0..3).filter(|&l| c.is_cached(f, l, i)).count(), 1);
            }
        }
    }

    #[test]
    fn fcd_redundant_two_thirds() {
        let (split, c) = prefetch_fcd(&cfg(3, 5, 2.0 / 3.0), &mut rng()).unwrap();
        assert_eq!(split.num_subfiles(), 3);
        for f in 0..5 {
            for i in 0..3 {
                assert_eq!((0..3).filter(|&l| c.is_cached(f, l, i)).count(), 2);
            }
            for l in 0..3 {
                assert_eq!((0..3).filter(|&i| c.is_cached(f, l, i)).count(), 2);
            }
        }
    }

    #[test]
    fn fcd_full() {
        let (split, c) = prefetch_fcd(&cfg(3, 4, 1.0), &mut rng()).unwrap();
        assert_eq!(c.cached.count(), 4 * split.num_subfiles() * 3);
    }

    #[test]
    fn availability_examples() {
        let cache = CacheState::empty(2, 1, 3);
        let none = FronthaulAssignment::none(2, 1, 3);
        assert!(availability(&cache, &none, 0, 0).is_empty());
        let mut cache = cache;
        cache.cached.set(0, 0, 0, true);
        let mut assign = none.clone();
        assign.transfer.set(0, 0, 1, true);
        assert_eq!(availability(&cache, &assign, 0, 0), vec![0, 1]);

        let (split, c) = prefetch_fcd(&cfg(3, 2, 0.25), &mut rng()).unwrap();
        assert_eq!(split.num_subfiles(), 4);
        assert!(availability(&c, &FronthaulAssignment::none(2, 4, 3), 0, 3).is_empty());
    }

    #[test]
    fn unequal_mu_is_rejected() {
        let mut c = cfg(2, 3, 0.5);
        c.fractional_cache[1] = 0.2;
        assert!(prefetch_cmp(&c).is_err());
    }

    proptest! {
        #[test]
        fn caches_respect_memory(n_r in 1usize..=4, files in 1usize..=8, step in 0usize..=10, seed in any::<u64>()) {
            let c = cfg(n_r, files, step as f64 / 10.0);
            let mut r = RngSeed(seed).rng(Stream::Prefetch);
            for policy in [Prefetcher::Cmp, Prefetcher::Cd, Prefetcher::Fcd] {
                let (split, cache) = prefetch(policy, &c, &mut r).unwrap();
                prop_assert!(cache.check_memory(&c, &split).is_ok());
                prop_assert!(split.sizes().iter().all(|&s| s > 0.0));
            }
        }

        #[test]
        fn fcd_structure(n_r in 1usize..=4, files in 1usize..=6, step in 0usize..=10, seed in any::<u64>()) {
            let mu = step as f64 / 10.0;
            let c = cfg(n_r, files, mu);
            let (split, cache) = prefetch_fcd(&c, &mut RngSeed(seed).rng(Stream::Prefetch)).unwrap();
            if mu <= 1.0 / n_r as f64 + 1e-12 {
                if mu > 0.0 {
                    for f in 0..files {
                        for l in 0..n_r {
                            prop_assert_eq!((0..n_r).filter(|&i| cache.is_cached(f, l, i)).count(), 1);
                        }
                        if split.num_subfiles() > n_r {
                            prop_assert!((0..n_r).all(|i| !cache.is_cached(f, n_r, i)));
                        }
                    }
                }
            } else {
                let rounds = (mu * n_r as f64 + 1e-9).floor() as usize;
                for f in 0..files {
                    for i in 0..n_r {
                        prop_assert_eq!((0..n_r).filter(|&l| cache.is_cached(f, l, i)).count(), rounds);
                    }
                }
            }
        }

        #[test]
        fn cmp_equals_cd_for_single_errh(files in 1usize..=8, step in 0usize..=10) {
            let c = cfg(1, files, step as f64 / 10.0);
            let (_, a) = prefetch_cmp(&c).unwrap();
            let (_, b) = prefetch_cd(&c).unwrap();
            prop_assert_eq!(cached_files(&a, 0), cached_files(&b, 0));
        }
    }
}
