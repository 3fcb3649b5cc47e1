//! Scenario configuration, caches, requests, channels and delivery solutions.
//!
//! Indexing: files, subfiles, eRRHs and UEs are 0-based throughout the crate.
//! File `f` is the `(f + 1)`-th most popular file; [`display_index`] is the one
//! conversion used when printing indices for humans.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// 1-based label for a 0-based index.
pub fn display_index(idx: usize) -> usize {
    idx + 1
}

/// Scenario parameters. Per-eRRH and per-UE quantities are stored as lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_errh: usize,
    pub num_ue: usize,
    pub antennas_errh: Vec<usize>,
    pub antennas_ue: Vec<usize>,
    pub library_size: usize,
    /// Normalized file size S in bits per symbol.
    pub file_size: f64,
    pub zipf_exponent: f64,
    pub fronthaul_capacity: Vec<f64>,
    pub power_budget: Vec<f64>,
    pub fractional_cache: Vec<f64>,
    pub noise_level: f64,
    pub cell_radius: f64,
    pub pathloss_ref: f64,
    pub pathloss_exp: f64,
}

impl Default for SystemConfig {
    /// Three single-antenna eRRHs and UEs in a 500 m cell, P/N0 = 20 dB.
    fn default() -> Self {
        Self::symmetric(3, 3, 3, 1.0, 1.0, 0.0, 1.0, 1.0, 0.01)
    }
}

impl SystemConfig {
    /// Single-antenna configuration with identical eRRHs.
    #[allow(clippy::too_many_arguments)]
    pub fn symmetric(
        num_errh: usize,
        num_ue: usize,
        library_size: usize,
        file_size: f64,
        zipf_exponent: f64,
        fractional_cache: f64,
        fronthaul_capacity: f64,
        power_budget: f64,
        noise_level: f64,
    ) -> Self {
        Self {
            num_errh,
            num_ue,
            antennas_errh: vec![1; num_errh],
            antennas_ue: vec![1; num_ue],
            library_size,
            file_size,
            zipf_exponent,
            fronthaul_capacity: vec![fronthaul_capacity; num_errh],
            power_budget: vec![power_budget; num_errh],
            fractional_cache: vec![fractional_cache; num_errh],
            noise_level,
            cell_radius: 500.0,
            pathloss_ref: 50.0,
            pathloss_exp: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_errh == 0 || self.num_ue == 0 || self.library_size == 0 {
            return bad("node and library counts must be at least 1".into());
        }
        let lists = [
            ("antennas_errh", self.antennas_errh.len(), self.num_errh),
            ("antennas_ue", self.antennas_ue.len(), self.num_ue),
            ("fronthaul_capacity", self.fronthaul_capacity.len(), self.num_errh),
            ("power_budget", self.power_budget.len(), self.num_errh),
            ("fractional_cache", self.fractional_cache.len(), self.num_errh),
        ];
        for (name, got, want) in lists {
            if got != want {
                return bad(format!("{name} has {got} entries, expected {want}"));
            }
        }
        if self.antennas_errh.iter().chain(&self.antennas_ue).any(|&n| n == 0) {
            return bad("antenna counts must be at least 1".into());
        }
        if !(self.file_size > 0.0 && self.file_size.is_finite()) {
            return bad("file_size must be positive".into());
        }
        if !(self.zipf_exponent >= 0.0) {
            return bad("zipf_exponent must be non-negative".into());
        }
        if self.fractional_cache.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return bad("fractional_cache must lie in [0, 1]".into());
        }
        if self.fronthaul_capacity.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return bad("fronthaul_capacity must be non-negative".into());
        }
        if self.power_budget.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return bad("power_budget must be positive".into());
        }
        if !(self.noise_level > 0.0) {
            return bad("noise_level must be positive".into());
        }
        if !(self.cell_radius > 0.0) || !(self.pathloss_ref > 0.0) {
            return bad("cell_radius and pathloss_ref must be positive".into());
        }
        Ok(())
    }

    /// n_R, total eRRH antennas.
    pub fn total_errh_antennas(&self) -> usize {
        self.antennas_errh.iter().sum()
    }

    /// n_U, total UE antennas.
    pub fn total_ue_antennas(&self) -> usize {
        self.antennas_ue.iter().sum()
    }

    /// First antenna row of eRRH `i` in the stacked transmit vector.
    pub fn antenna_offset(&self, i: usize) -> usize {
        self.antennas_errh[..i].iter().sum()
    }

    /// Antenna rows of eRRH `i`.
    pub fn antenna_rows(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.antenna_offset(i);
        start..start + self.antennas_errh[i]
    }

    /// eRRH owning antenna row `row`.
    pub fn errh_of_row(&self, row: usize) -> usize {
        let mut acc = 0;
        for (i, &n) in self.antennas_errh.iter().enumerate() {
            acc += n;
            if row < acc {
                return i;
            }
        }
        panic!("antenna row {row} out of range");
    }

    /// Memory budget μ_i·F·S in bits per symbol.
    pub fn cache_budget(&self, i: usize) -> f64 {
        self.fractional_cache[i] * self.library_size as f64 * self.file_size
    }

    /// A fronthaul link with `C_i = 0` carries nothing.
    pub fn link_active(&self, i: usize) -> bool {
        self.fronthaul_capacity[i] > 1e-12
    }
}

/// Selector `E_i` (n_R × n_{R,i}) picking the antenna rows of eRRH `i`.
pub fn build_selector(i: usize, cfg: &SystemConfig) -> Result<CMat> {
    if i >= cfg.num_errh {
        return Err(Error::IndexOutOfRange { what: "eRRH", index: i, len: cfg.num_errh });
    }
    let mut e = linalg::zeros(cfg.total_errh_antennas(), cfg.antennas_errh[i]);
    for (col, row) in cfg.antenna_rows(i).enumerate() {
        e[(row, col)] = Complex64::new(1.0, 0.0);
    }
    Ok(e)
}

/// Subfile sizes S_l of a split of every file into L parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitScheme {
    sizes: Vec<f64>,
}

impl SplitScheme {
    /// Builds a split, dropping zero-size parts. `keep` receives the indices of
    /// the retained parts so callers can prune dependent tensors.
    pub fn new(sizes: Vec<f64>, file_size: f64) -> Result<(Self, Vec<usize>)> {
        if sizes.iter().any(|&s| !(s >= -1e-12 * file_size)) {
            return Err(Error::InvalidSplit("negative subfile size".into()));
        }
        let total: f64 = sizes.iter().sum();
        if (total - file_size).abs() > 1e-12 * file_size.max(1.0) {
            return Err(Error::InvalidSplit(format!(
                "subfile sizes sum to {total}, expected {file_size}"
            )));
        }
        let keep: Vec<usize> = (0..sizes.len()).filter(|&l| sizes[l] > 1e-12 * file_size).collect();
        if keep.is_empty() {
            return Err(Error::InvalidSplit("no subfile of positive size".into()));
        }
        let kept = keep.iter().map(|&l| sizes[l]).collect();
        Ok((Self { sizes: kept }, keep))
    }

    pub fn whole(file_size: f64) -> Self {
        Self { sizes: vec![file_size] }
    }

    pub fn num_subfiles(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, l: usize) -> f64 {
        self.sizes[l]
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn file_size(&self) -> f64 {
        self.sizes.iter().sum()
    }
}

/// Dense binary tensor indexed by (file, subfile, eRRH).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubfileTensor {
    num_files: usize,
    num_subfiles: usize,
    num_errh: usize,
    bits: Vec<bool>,
}

impl SubfileTensor {
    pub fn new(num_files: usize, num_subfiles: usize, num_errh: usize) -> Self {
        Self { num_files, num_subfiles, num_errh, bits: vec![false; num_files * num_subfiles * num_errh] }
    }

    fn at(&self, f: usize, l: usize, i: usize) -> usize {
        debug_assert!(f < self.num_files && l < self.num_subfiles && i < self.num_errh);
        (f * self.num_subfiles + l) * self.num_errh + i
    }

    pub fn get(&self, f: usize, l: usize, i: usize) -> bool {
        self.bits[self.at(f, l, i)]
    }

    pub fn set(&mut self, f: usize, l: usize, i: usize, value: bool) {
        let idx = self.at(f, l, i);
        self.bits[idx] = value;
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.num_files, self.num_subfiles, self.num_errh)
    }

    /// Keeps only the listed subfile indices.
    pub fn select_subfiles(&self, keep: &[usize]) -> Self {
        let mut out = Self::new(self.num_files, keep.len(), self.num_errh);
        for f in 0..self.num_files {
            for (new_l, &l) in keep.iter().enumerate() {
                for i in 0..self.num_errh {
                    out.set(f, new_l, i, self.get(f, l, i));
                }
            }
        }
        out
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Caching variables c_{f,l}^i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    pub cached: SubfileTensor,
}

impl CacheState {
    pub fn empty(num_files: usize, num_subfiles: usize, num_errh: usize) -> Self {
        Self { cached: SubfileTensor::new(num_files, num_subfiles, num_errh) }
    }

    pub fn is_cached(&self, f: usize, l: usize, i: usize) -> bool {
        self.cached.get(f, l, i)
    }

    /// Σ_f Σ_l c_{f,l}^i S_l.
    pub fn memory_used(&self, i: usize, split: &SplitScheme) -> f64 {
        let (nf, nl, _) = self.cached.dims();
        (0..nf)
            .flat_map(|f| (0..nl).map(move |l| (f, l)))
            .filter(|&(f, l)| self.is_cached(f, l, i))
            .map(|(_, l)| split.size(l))
            .sum()
    }

    /// Checks the memory constraint at every eRRH.
    pub fn check_memory(&self, cfg: &SystemConfig, split: &SplitScheme) -> Result<()> {
        for i in 0..cfg.num_errh {
            let used = self.memory_used(i, split);
            let budget = cfg.cache_budget(i);
            if used > budget + 1e-9 * (cfg.library_size as f64 * cfg.file_size) {
                return Err(Error::CacheOverflow { errh: i, used, budget });
            }
        }
        Ok(())
    }
}

/// Files requested by each UE, plus the de-duplicated requested set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestProfile {
    requested: Vec<usize>,
    files: Vec<usize>,
}

impl RequestProfile {
    pub fn new(requested: Vec<usize>, library_size: usize) -> Result<Self> {
        if let Some(&f) = requested.iter().find(|&&f| f >= library_size) {
            return Err(Error::IndexOutOfRange { what: "file", index: f, len: library_size });
        }
        let mut files = requested.clone();
        files.sort_unstable();
        files.dedup();
        Ok(Self { requested, files })
    }

    /// f_k for UE `k`.
    pub fn file_of(&self, k: usize) -> usize {
        self.requested[k]
    }

    pub fn requested(&self) -> &[usize] {
        &self.requested
    }

    /// F_req in increasing file order.
    pub fn files(&self) -> &[usize] {
        &self.files
    }

    /// Position of file `f` inside F_req.
    pub fn slot_of(&self, f: usize) -> Option<usize> {
        self.files.binary_search(&f).ok()
    }

    pub fn num_ue(&self) -> usize {
        self.requested.len()
    }
}

/// Node coordinates in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Positions {
    pub errh: Vec<[f64; 2]>,
    pub ue: Vec<[f64; 2]>,
}

impl Positions {
    pub fn distance(&self, k: usize, i: usize) -> f64 {
        let [ux, uy] = self.ue[k];
        let [ex, ey] = self.errh[i];
        (ux - ex).hypot(uy - ey)
    }
}

/// Channel matrices H_{k,i} and their stacked rows H_k = [H_{k,1} … H_{k,N_R}].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    num_errh: usize,
    blocks: Vec<CMat>,
    stacked: Vec<CMat>,
    pub positions: Option<Positions>,
}

impl ChannelRealization {
    /// `blocks[k][i]` is H_{k,i} with shape n_{U,k} × n_{R,i}.
    pub fn new(cfg: &SystemConfig, blocks: Vec<Vec<CMat>>, positions: Option<Positions>) -> Result<Self> {
        if blocks.len() != cfg.num_ue {
            return Err(Error::DimensionMismatch(format!("{} UE channel rows, expected {}", blocks.len(), cfg.num_ue)));
        }
        let n_r = cfg.total_errh_antennas();
        let mut flat = Vec::with_capacity(cfg.num_ue * cfg.num_errh);
        let mut stacked = Vec::with_capacity(cfg.num_ue);
        for (k, row) in blocks.into_iter().enumerate() {
            if row.len() != cfg.num_errh {
                return Err(Error::DimensionMismatch(format!("UE {k} has {} channel blocks", row.len())));
            }
            let n_u = cfg.antennas_ue[k];
            let mut h = linalg::zeros(n_u, n_r);
            for (i, block) in row.iter().enumerate() {
                if block.shape() != (n_u, cfg.antennas_errh[i]) {
                    return Err(Error::DimensionMismatch(format!("H[{k}][{i}] has shape {:?}", block.shape())));
                }
                if block.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::DimensionMismatch(format!("H[{k}][{i}] has non-finite entries")));
                }
                h.view_mut((0, cfg.antenna_offset(i)), block.shape()).copy_from(block);
            }
            flat.extend(row);
            stacked.push(h);
        }
        Ok(Self { num_errh: cfg.num_errh, blocks: flat, stacked, positions })
    }

    pub fn block(&self, k: usize, i: usize) -> &CMat {
        &self.blocks[k * self.num_errh + i]
    }

    pub fn stacked(&self, k: usize) -> &CMat {
        &self.stacked[k]
    }

    /// ‖H_{k,i}‖_F².
    pub fn gain(&self, k: usize, i: usize) -> f64 {
        self.block(k, i).iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Hard-transfer indicators d_{f,l}^i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FronthaulAssignment {
    pub transfer: SubfileTensor,
}

impl FronthaulAssignment {
    pub fn none(num_files: usize, num_subfiles: usize, num_errh: usize) -> Self {
        Self { transfer: SubfileTensor::new(num_files, num_subfiles, num_errh) }
    }

    pub fn is_transferred(&self, f: usize, l: usize, i: usize) -> bool {
        self.transfer.get(f, l, i)
    }

    /// Fails if a cached subfile is also marked for transfer.
    pub fn check_against(&self, cache: &CacheState) -> Result<()> {
        let (nf, nl, nr) = self.transfer.dims();
        if cache.cached.dims() != (nf, nl, nr) {
            return Err(Error::DimensionMismatch("assignment and cache shapes differ".into()));
        }
        for f in 0..nf {
            for l in 0..nl {
                for i in 0..nr {
                    if self.is_transferred(f, l, i) && cache.is_cached(f, l, i) {
                        return Err(Error::InvalidAssignment { file: f, subfile: l, errh: i });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fronthaul usage mode of the delivery phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hard,
    Soft,
    Hybrid,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Hard => "hard",
            Mode::Soft => "soft",
            Mode::Hybrid => "hybrid",
        }
    }

    pub fn uses_quantization(self) -> bool {
        !matches!(self, Mode::Hard)
    }

    pub fn uses_hard_transfer(self) -> bool {
        !matches!(self, Mode::Soft)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hard" => Ok(Mode::Hard),
            "soft" => Ok(Mode::Soft),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

/// Everything the delivery-phase optimizer needs for one transmission interval.
#[derive(Debug, Clone)]
pub struct Instance {
    pub cfg: SystemConfig,
    pub split: SplitScheme,
    pub cache: CacheState,
    pub channel: ChannelRealization,
    pub requests: RequestProfile,
    pub assignment: FronthaulAssignment,
}

impl Instance {
    pub fn new(
        cfg: SystemConfig,
        split: SplitScheme,
        cache: CacheState,
        channel: ChannelRealization,
        requests: RequestProfile,
        assignment: FronthaulAssignment,
    ) -> Result<Self> {
        cfg.validate()?;
        let dims = (cfg.library_size, split.num_subfiles(), cfg.num_errh);
        if cache.cached.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "cache shape {:?}, expected {dims:?}",
                cache.cached.dims()
            )));
        }
        if requests.num_ue() != cfg.num_ue {
            return Err(Error::DimensionMismatch("request profile size differs from num_ue".into()));
        }
        cache.check_memory(&cfg, &split)?;
        assignment.check_against(&cache)?;
        Ok(Self { cfg, split, cache, channel, requests, assignment })
    }

    pub fn with_assignment(&self, assignment: FronthaulAssignment) -> Result<Self> {
        assignment.check_against(&self.cache)?;
        Ok(Self { assignment, ..self.clone() })
    }

    pub fn no_transfer(&self) -> FronthaulAssignment {
        FronthaulAssignment::none(self.cfg.library_size, self.split.num_subfiles(), self.cfg.num_errh)
    }

    pub fn num_subfiles(&self) -> usize {
        self.split.num_subfiles()
    }

    /// Number of requested subfiles |F_req|·L.
    pub fn num_requested_subfiles(&self) -> usize {
        self.requests.files().len() * self.num_subfiles()
    }

    /// Flat index of requested subfile (slot, l).
    pub fn sub_index(&self, slot: usize, l: usize) -> usize {
        slot * self.num_subfiles() + l
    }

    /// (file, subfile) of a flat requested-subfile index.
    pub fn sub_file(&self, s: usize) -> (usize, usize) {
        let l_count = self.num_subfiles();
        (self.requests.files()[s / l_count], s % l_count)
    }

    /// Requested subfiles as `(flat index, file, subfile)`.
    pub fn requested_subfiles(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.num_requested_subfiles()).map(move |s| {
            let (f, l) = self.sub_file(s);
            (s, f, l)
        })
    }

    /// UEs requesting file `f`.
    pub fn requesters(&self, f: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.cfg.num_ue).filter(move |&k| self.requests.file_of(k) == f)
    }
}

/// Solver-side bookkeeping attached to a delivery solution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunDiagnostics {
    pub outer_iterations: usize,
    pub newton_steps: usize,
    pub solver_failures: usize,
    pub converged: bool,
    /// Decrease of the exact `R_min` proposed by a rejected iterate, 0 if none.
    pub rejected_decrease: f64,
    /// Per-iteration trace lines when tracing is enabled.
    pub log: Vec<String>,
}

/// Output of the delivery-phase optimizer.
///
/// Covariances and rates are indexed by the flat requested-subfile index of
/// [`Instance::sub_index`]; quantization covariances by eRRH.
#[derive(Debug, Clone)]
pub struct DeliverySolution {
    pub mode: Mode,
    /// Hard-transfer indicators the solution was computed with.
    pub assignment: FronthaulAssignment,
    pub covariances: Vec<CMat>,
    pub quant_covariances: Vec<CMat>,
    pub rates: Vec<f64>,
    pub min_rate: f64,
    /// Minimum rate of the rank-relaxed solution before precoder extraction.
    pub relaxed_min_rate: f64,
    /// Precoders V̄_{f,l}; empty until extraction.
    pub precoders: Vec<CMat>,
    /// Soft fronthaul budget C̃_i per eRRH (hybrid mode only).
    pub soft_budget: Vec<f64>,
    /// Exact minimum rate after each accepted outer iteration.
    pub trace: Vec<f64>,
    pub diagnostics: RunDiagnostics,
}

impl DeliverySolution {
    /// All-zero transmission: no signal, no quantization noise.
    pub fn zero(mode: Mode, inst: &Instance) -> Self {
        let n_r = inst.cfg.total_errh_antennas();
        let subs = inst.num_requested_subfiles();
        Self {
            mode,
            assignment: inst.assignment.clone(),
            covariances: vec![linalg::zeros(n_r, n_r); subs],
            quant_covariances: inst.cfg.antennas_errh.iter().map(|&n| linalg::zeros(n, n)).collect(),
            rates: vec![0.0; subs],
            min_rate: 0.0,
            relaxed_min_rate: 0.0,
            precoders: Vec::new(),
            soft_budget: if mode == Mode::Hybrid { vec![0.0; inst.cfg.num_errh] } else { Vec::new() },
            trace: vec![0.0],
            diagnostics: RunDiagnostics { converged: true, ..Default::default() },
        }
    }

    /// R_f = Σ_l R_{f,l} for each requested slot.
    pub fn file_rates(&self, num_subfiles: usize) -> Vec<f64> {
        self.rates.chunks(num_subfiles).map(|c| c.iter().sum()).collect()
    }

    /// min_f Σ_l R_{f,l}.
    pub fn exact_min_rate(&self, num_subfiles: usize) -> f64 {
        self.file_rates(num_subfiles).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Power drawn at eRRH `i`: Σ tr(E_i† W E_i) + tr(Ω_i).
    pub fn power_used(&self, cfg: &SystemConfig, i: usize) -> f64 {
        let rows = cfg.antenna_rows(i);
        let signal: f64 = self
            .covariances
            .iter()
            .map(|w| rows.clone().map(|r| w[(r, r)].re).sum::<f64>())
            .sum();
        signal + linalg::trace_re(&self.quant_covariances[i])
    }
}
