//! Random instance generation: Zipf popularity, requests, geometry and fading.

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::{ChannelRealization, Positions, RequestProfile, SystemConfig};
use num_complex::Complex64;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Zipf file popularity `P(f) = c·f^{−γ}`, most popular file first.
#[derive(Debug, Clone, PartialEq)]
pub struct Popularity {
    pmf: Vec<f64>,
}

impl Popularity {
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn num_files(&self) -> usize {
        self.pmf.len()
    }
}

pub fn zipf_pmf(num_files: usize, gamma: f64) -> Result<Popularity> {
    if num_files == 0 {
        return Err(Error::InvalidConfig("library must contain at least one file".into()));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidConfig("zipf exponent must be finite and non-negative".into()));
    }
    let weights: Vec<f64> = (1..=num_files).map(|f| (f as f64).powf(-gamma)).collect();
    let total: f64 = weights.iter().sum();
    Ok(Popularity { pmf: weights.into_iter().map(|w| w / total).collect() })
}

/// Independent random streams, one per sampling purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Geometry,
    Fading,
    Requests,
    Prefetch,
    Init,
}

/// Base seed from which per-purpose ChaCha streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self, stream: Stream) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(stream as u64 + 1);
        rng
    }
}

pub fn sample_requests<R: Rng + ?Sized>(pop: &Popularity, num_ue: usize, rng: &mut R) -> RequestProfile {
    let dist = WeightedIndex::new(pop.pmf()).expect("popularity weights are positive");
    let requested = (0..num_ue).map(|_| dist.sample(rng)).collect();
    RequestProfile::new(requested, pop.num_files()).expect("sampled files lie inside the library")
}

fn uniform_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// eRRH and UE positions drawn uniformly on the cell disc centred at the origin.
pub fn sample_geometry<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Positions {
    let errh = (0..cfg.num_errh).map(|_| uniform_disc(cfg.cell_radius, rng)).collect();
    let ue = (0..cfg.num_ue).map(|_| uniform_disc(cfg.cell_radius, rng)).collect();
    Positions { errh, ue }
}

/// `ρ = 1 / (1 + (d/d0)^α)`.
pub fn pathloss(d: f64, d0: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + (d / d0).powf(alpha))
}

/// One CN(0, 1) draw.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rayleigh fading scaled by the distance-dependent pathloss.
pub fn sample_channel<R: Rng + ?Sized>(cfg: &SystemConfig, positions: &Positions, rng: &mut R) -> ChannelRealization {
    let blocks = (0..cfg.num_ue)
        .map(|k| {
            (0..cfg.num_errh)
                .map(|i| {
                    let rho = pathloss(positions.distance(k, i), cfg.pathloss_ref, cfg.pathloss_exp);
                    let amp = rho.sqrt();
                    CMat::from_fn(cfg.antennas_ue[k], cfg.antennas_errh[i], |_, _| complex_normal(rng) * amp)
                })
                .collect()
        })
        .collect();
    ChannelRealization::new(cfg, blocks, Some(positions.clone())).expect("sampled channel matches the configuration")
}

/// Geometry, fading and requests drawn from their own streams of `seed`.
pub fn sample_scenario(cfg: &SystemConfig, seed: RngSeed) -> Result<(ChannelRealization, RequestProfile)> {
    cfg.validate()?;
    let positions = sample_geometry(cfg, &mut seed.rng(Stream::Geometry));
    let channel = sample_channel(cfg, &positions, &mut seed.rng(Stream::Fading));
    let pop = zipf_pmf(cfg.library_size, cfg.zipf_exponent)?;
    let requests = sample_requests(&pop, cfg.num_ue, &mut seed.rng(Stream::Requests));
    Ok((channel, requests))
}
