//! Exact and linearized rate and fronthaul functions, all in bits per symbol.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{Instance, Mode};

/// Point at which the concave parts of the DC constraints are linearized.
#[derive(Debug, Clone)]
pub struct LinearizationPoint {
    pub covariances: Vec<CMat>,
    pub quant_covariances: Vec<CMat>,
}

/// `φ(A, B) = log2 det B + tr(B⁻¹(A − B)) / ln 2`, the tangent of `log2 det`
/// at `B` evaluated at `A`.
pub fn phi(a: &CMat, b: &CMat) -> Result<f64> {
    let ld = linalg::log2_det(b).ok_or(Error::NotPositiveDefinite("linearization point"))?;
    let inv = linalg::hermitian_inverse(b).ok_or(Error::NotPositiveDefinite("linearization point"))?;
    let diff = a - b;
    Ok(ld + linalg::nats_to_bits((&inv * diff).trace().re))
}

/// Σ_i H_{k,i} Ω_i H_{k,i}†.
fn quantization_noise_at(inst: &Instance, omega: &[CMat], k: usize) -> CMat {
    let n_u = inst.cfg.antennas_ue[k];
    let mut acc = linalg::zeros(n_u, n_u);
    for (i, om) in omega.iter().enumerate() {
        if om.iter().any(|z| z.re != 0.0 || z.im != 0.0) {
            acc += linalg::congruence(inst.channel.block(k, i), om);
        }
    }
    acc
}

/// Interference-plus-noise matrix seen by UE `k` while decoding subfile `l`:
/// noise, quantization noise, every other requested file, and the own-file
/// subfiles `l, …, L−1`. `l = L` leaves only interference and noise.
pub fn interference_plus_noise(inst: &Instance, w: &[CMat], omega: Option<&[CMat]>, k: usize, l: usize) -> CMat {
    let n_u = inst.cfg.antennas_ue[k];
    let h = inst.channel.stacked(k);
    let own = inst.requests.slot_of(inst.requests.file_of(k)).expect("requested file has a slot");
    let l_count = inst.num_subfiles();
    let mut sum = linalg::zeros(inst.cfg.total_errh_antennas(), inst.cfg.total_errh_antennas());
    for (s, wm) in w.iter().enumerate() {
        let (slot, m) = (s / l_count, s % l_count);
        if slot != own || m >= l {
            sum += wm;
        }
    }
    let mut ipn = linalg::congruence(h, &sum) + linalg::scaled_identity(n_u, inst.cfg.noise_level);
    if let Some(om) = omega {
        ipn += quantization_noise_at(inst, om, k);
    }
    linalg::hermitize(&ipn)
}

fn ld(a: &CMat) -> f64 {
    linalg::log2_det(a).expect("interference-plus-noise matrices contain the noise floor")
}

/// SIC rate `q_{k,l}`; hard mode when `omega` is `None`.
pub fn sic_rate(inst: &Instance, k: usize, l: usize, w: &[CMat], omega: Option<&[CMat]>) -> f64 {
    let upper = interference_plus_noise(inst, w, omega, k, l);
    let lower = interference_plus_noise(inst, w, omega, k, l + 1);
    (ld(&upper) - ld(&lower)).max(0.0)
}

pub fn hard_rate(inst: &Instance, k: usize, l: usize, w: &[CMat]) -> f64 {
    sic_rate(inst, k, l, w, None)
}

pub fn soft_rate(inst: &Instance, k: usize, l: usize, w: &[CMat], omega: &[CMat]) -> f64 {
    sic_rate(inst, k, l, w, Some(omega))
}

/// Rate for `mode`: hard mode ignores quantization noise.
pub fn mode_rate(inst: &Instance, mode: Mode, k: usize, l: usize, w: &[CMat], omega: &[CMat]) -> f64 {
    sic_rate(inst, k, l, w, mode.uses_quantization().then_some(omega))
}

/// Largest rate of each requested subfile decodable by all of its requesters.
pub fn deliverable_rates(inst: &Instance, mode: Mode, w: &[CMat], omega: &[CMat]) -> Vec<f64> {
    inst.requested_subfiles()
        .map(|(_, f, l)| {
            inst.requesters(f)
                .map(|k| mode_rate(inst, mode, k, l, w, omega))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Requested subfiles whose precoded signal is quantized on the fronthaul to
/// eRRH `i`: uncached in soft mode, uncached and not hard-transferred in
/// hybrid mode, none in hard mode.
pub fn quantized_subfiles(inst: &Instance, mode: Mode, i: usize) -> Vec<usize> {
    if !mode.uses_quantization() {
        return Vec::new();
    }
    inst.requested_subfiles()
        .filter(|&(_, f, l)| {
            !inst.cache.is_cached(f, l, i) && !(mode == Mode::Hybrid && inst.assignment.is_transferred(f, l, i))
        })
        .map(|(s, _, _)| s)
        .collect()
}

/// Σ over quantized subfiles of E_i† W E_i.
pub fn quantized_signal(inst: &Instance, mode: Mode, i: usize, w: &[CMat]) -> CMat {
    let rows = inst.cfg.antenna_rows(i);
    let n = rows.len();
    let mut acc = linalg::zeros(n, n);
    for s in quantized_subfiles(inst, mode, i) {
        acc += w[s].view((rows.start, rows.start), (n, n));
    }
    acc
}

/// `g_i`: fronthaul bits per symbol spent on quantized signals at eRRH `i`.
pub fn fronthaul_usage(inst: &Instance, mode: Mode, i: usize, w: &[CMat], omega: &[CMat]) -> Result<f64> {
    let signal = quantized_signal(inst, mode, i, w);
    if quantized_subfiles(inst, mode, i).is_empty() || signal.iter().all(|z| z.norm() == 0.0) {
        return Ok(0.0);
    }
    let num = linalg::log2_det(&(&signal + &omega[i])).ok_or(Error::NotPositiveDefinite("quantized signal"))?;
    let den = linalg::log2_det(&omega[i]).ok_or(Error::NotPositiveDefinite("quantization noise"))?;
    Ok((num - den).max(0.0))
}

pub fn fronthaul_usage_soft(inst: &Instance, i: usize, w: &[CMat], omega: &[CMat]) -> Result<f64> {
    fronthaul_usage(inst, Mode::Soft, i, w, omega)
}

pub fn fronthaul_usage_hybrid(inst: &Instance, i: usize, w: &[CMat], omega: &[CMat]) -> Result<f64> {
    fronthaul_usage(inst, Mode::Hybrid, i, w, omega)
}

/// Σ_{f,l} d_{f,l}^i R_{f,l}.
pub fn hard_fronthaul_load(inst: &Instance, i: usize, rates: &[f64]) -> f64 {
    inst.requested_subfiles()
        .filter(|&(_, f, l)| inst.assignment.is_transferred(f, l, i))
        .map(|(s, _, _)| rates[s])
        .sum()
}

/// Concave minorant of the SIC rate.
pub fn surrogate_rate(
    inst: &Instance,
    mode: Mode,
    k: usize,
    l: usize,
    w: &[CMat],
    omega: &[CMat],
    lin: &LinearizationPoint,
) -> Result<f64> {
    let om = mode.uses_quantization().then_some(omega);
    let lin_om = mode.uses_quantization().then_some(lin.quant_covariances.as_slice());
    let upper = interference_plus_noise(inst, w, om, k, l);
    let lower = interference_plus_noise(inst, w, om, k, l + 1);
    let anchor = interference_plus_noise(inst, &lin.covariances, lin_om, k, l + 1);
    Ok(ld(&upper) - phi(&lower, &anchor)?)
}

/// Convex majorant of `g_i`.
pub fn surrogate_fronthaul(
    inst: &Instance,
    mode: Mode,
    i: usize,
    w: &[CMat],
    omega: &[CMat],
    lin: &LinearizationPoint,
) -> Result<f64> {
    if quantized_subfiles(inst, mode, i).is_empty() {
        return Ok(0.0);
    }
    let current = quantized_signal(inst, mode, i, w) + &omega[i];
    let anchor = quantized_signal(inst, mode, i, &lin.covariances) + &lin.quant_covariances[i];
    let den = linalg::log2_det(&omega[i]).ok_or(Error::NotPositiveDefinite("quantization noise"))?;
    Ok(phi(&current, &anchor)? - den)
}
