//! Variable layout of the convexified delivery problem and construction of
//! the per-iteration subproblems.

use crate::linalg::{self, CMat};
use crate::model::{FronthaulAssignment, Instance, Mode};
use crate::rates::{self, LinearizationPoint};
use crate::solver::{Constraint, ConstraintKind, DcSubproblem, LinearForm, LogDetTerm, MatrixVar, Point};
use num_complex::Complex64;
use std::f64::consts::LN_2;

/// Index of the `R_min` epigraph variable.
pub(crate) const RMIN: usize = 0;

/// Full-size covariances, quantization noise and subfile rates.
#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub w: Vec<CMat>,
    pub omega: Vec<CMat>,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Structure {
    pub mode: Mode,
    /// Instance carrying the effective fronthaul assignment.
    pub inst: Instance,
    /// Selector of the antenna rows allowed to carry each requested subfile.
    pub selectors: Vec<CMat>,
    pub live: Vec<bool>,
    pub w_var: Vec<Option<usize>>,
    pub r_var: Vec<Option<usize>>,
    pub omega_var: Vec<Option<usize>>,
    /// Effectively quantized requested subfiles per eRRH.
    pub quantized: Vec<Vec<usize>>,
    /// Hard-transferred requested subfiles per eRRH.
    pub transferred: Vec<Vec<usize>>,
    pub matrices: Vec<MatrixVar>,
    pub num_scalars: usize,
}

/// Transfers on links without capacity carry nothing and are dropped.
pub(crate) fn effective_assignment(inst: &Instance, mode: Mode) -> FronthaulAssignment {
    let mut assign = inst.assignment.clone();
    let (nf, nl, nr) = assign.transfer.dims();
    for i in 0..nr {
        let keep = mode.uses_hard_transfer() && inst.cfg.link_active(i);
        if keep {
            continue;
        }
        for f in 0..nf {
            for l in 0..nl {
                assign.transfer.set(f, l, i, false);
            }
        }
    }
    assign
}

fn selector_for_rows(n_r: usize, rows: &[usize]) -> CMat {
    let mut k = linalg::zeros(n_r, rows.len());
    for (col, &r) in rows.iter().enumerate() {
        k[(r, col)] = Complex64::new(1.0, 0.0);
    }
    k
}

impl Structure {
    pub fn new(inst: &Instance, mode: Mode, omega_floor: f64) -> Self {
        let assignment = effective_assignment(inst, mode);
        let inst = inst.with_assignment(assignment).expect("dropping transfers keeps the assignment valid");
        let cfg = &inst.cfg;
        let n_r = cfg.total_errh_antennas();
        let subs = inst.num_requested_subfiles();

        let mut selectors = Vec::with_capacity(subs);
        let mut live = Vec::with_capacity(subs);
        for (_, f, l) in inst.requested_subfiles() {
            let rows: Vec<usize> = (0..cfg.num_errh)
                .filter(|&i| {
                    inst.cache.is_cached(f, l, i)
                        || match mode {
                            Mode::Hard => inst.assignment.is_transferred(f, l, i),
                            Mode::Soft | Mode::Hybrid => cfg.link_active(i),
                        }
                })
                .flat_map(|i| cfg.antenna_rows(i))
                .collect();
            let k = selector_for_rows(n_r, &rows);
            let reachable = !rows.is_empty()
                && inst.requesters(f).all(|ue| (inst.channel.stacked(ue) * &k).iter().any(|z| z.norm() > 0.0));
            live.push(reachable);
            selectors.push(k);
        }

        let mut matrices = Vec::new();
        let mut w_var = vec![None; subs];
        let mut r_var = vec![None; subs];
        let mut num_scalars = 1;
        for s in 0..subs {
            if live[s] {
                r_var[s] = Some(num_scalars);
                num_scalars += 1;
                w_var[s] = Some(matrices.len());
                matrices.push(MatrixVar { dim: selectors[s].ncols(), floor: 0.0 });
            }
        }

        let mut quantized = Vec::with_capacity(cfg.num_errh);
        let mut transferred = Vec::with_capacity(cfg.num_errh);
        let mut omega_var = vec![None; cfg.num_errh];
        for i in 0..cfg.num_errh {
            let q: Vec<usize> = if cfg.link_active(i) {
                rates::quantized_subfiles(&inst, mode, i).into_iter().filter(|&s| live[s]).collect()
            } else {
                Vec::new()
            };
            if !q.is_empty() {
                omega_var[i] = Some(matrices.len());
                matrices.push(MatrixVar { dim: cfg.antennas_errh[i], floor: omega_floor * cfg.power_budget[i] });
            }
            quantized.push(q);
            let d: Vec<usize> = inst
                .requested_subfiles()
                .filter(|&(s, f, l)| live[s] && inst.assignment.is_transferred(f, l, i))
                .map(|(s, _, _)| s)
                .collect();
            transferred.push(d);
        }
        Self { mode, inst, selectors, live, w_var, r_var, omega_var, quantized, transferred, matrices, num_scalars }
    }

    /// Some requested file cannot receive any rate.
    pub fn trivially_zero(&self) -> bool {
        let l_count = self.inst.num_subfiles();
        self.live.chunks(l_count).any(|slot| slot.iter().all(|&b| !b))
    }

    pub fn omega_floor(&self, i: usize) -> f64 {
        self.omega_var[i].map_or(0.0, |v| self.matrices[v].floor)
    }

    /// Quantization noise is part of the received signal in soft and hybrid mode.
    fn omega_terms(&self, k: usize) -> Vec<LogDetTerm> {
        if !self.mode.uses_quantization() {
            return Vec::new();
        }
        self.omega_var
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|var| LogDetTerm { var, map: self.inst.channel.block(k, i).clone() }))
            .collect()
    }

    fn omega_slice<'a>(&self, omega: &'a [CMat]) -> Option<&'a [CMat]> {
        self.mode.uses_quantization().then_some(omega)
    }

    /// Terms `H_k K_s X_s K_s† H_k†` of every variable in `IPN_{k,l}`.
    fn ipn_terms(&self, k: usize, l: usize) -> Vec<LogDetTerm> {
        let inst = &self.inst;
        let own = inst.requests.slot_of(inst.requests.file_of(k)).expect("requested file has a slot");
        let l_count = inst.num_subfiles();
        let h = inst.channel.stacked(k);
        let mut terms: Vec<LogDetTerm> = (0..inst.num_requested_subfiles())
            .filter(|&s| s / l_count != own || s % l_count >= l)
            .filter_map(|s| self.w_var[s].map(|var| LogDetTerm { var, map: h * &self.selectors[s] }))
            .collect();
        terms.extend(self.omega_terms(k));
        terms
    }

    pub fn subproblem(&self, lin: &LinearizationPoint) -> DcSubproblem {
        let inst = &self.inst;
        let cfg = &inst.cfg;
        let l_count = inst.num_subfiles();
        let mut constraints = Vec::new();

        for slot in 0..inst.requests.files().len() {
            let mut form = LinearForm::default().scalar(RMIN, 1.0);
            for l in 0..l_count {
                if let Some(r) = self.r_var[inst.sub_index(slot, l)] {
                    form = form.scalar(r, -1.0);
                }
            }
            constraints.push(Constraint::Linear { form, kind: ConstraintKind::Epigraph });
        }
        for (s, _, l) in inst.requested_subfiles() {
            if let Some(r) = self.r_var[s] {
                constraints.push(Constraint::Linear { form: LinearForm::default().scalar(r, -1.0), kind: ConstraintKind::NonNegative });
                constraints.push(Constraint::Linear {
                    form: LinearForm::constant(-inst.split.size(l)).scalar(r, 1.0),
                    kind: ConstraintKind::RateCap,
                });
            }
        }

        let lin_omega = self.omega_slice(&lin.quant_covariances);
        for k in 0..cfg.num_ue {
            let slot = inst.requests.slot_of(inst.requests.file_of(k)).expect("requested file has a slot");
            let n_u = cfg.antennas_ue[k];
            for l in 0..l_count {
                let Some(r) = self.r_var[inst.sub_index(slot, l)] else { continue };
                let anchor = rates::interference_plus_noise(inst, &lin.covariances, lin_omega, k, l + 1);
                let binv = linalg::hermitian_inverse(&anchor).expect("interference-plus-noise is positive definite");
                let mut affine = LinearForm::constant(
                    linalg::log2_det(&anchor).expect("interference-plus-noise is positive definite")
                        + (cfg.noise_level * linalg::trace_re(&binv) - n_u as f64) / LN_2,
                )
                .scalar(r, 1.0);
                for t in self.ipn_terms(k, l + 1) {
                    affine = affine.matrix(t.var, tangent(&t.map, &binv));
                }
                constraints.push(Constraint::LogDet {
                    affine,
                    base: linalg::scaled_identity(n_u, cfg.noise_level),
                    terms: self.ipn_terms(k, l),
                    kind: ConstraintKind::Rate,
                });
            }
        }

        for i in 0..cfg.num_errh {
            let c = cfg.fronthaul_capacity[i];
            let mut load = LinearForm::constant(-c);
            for &s in &self.transferred[i] {
                load = load.scalar(self.r_var[s].expect("transferred subfiles are live"), 1.0);
            }
            match self.omega_var[i] {
                Some(ov) => {
                    let rows = cfg.antenna_rows(i);
                    let n = rows.len();
                    let mut anchor = lin.quant_covariances[i].clone();
                    for &s in &self.quantized[i] {
                        anchor += lin.covariances[s].view((rows.start, rows.start), (n, n));
                    }
                    let anchor = linalg::hermitize(&anchor);
                    let binv = linalg::hermitian_inverse(&anchor).expect("quantization noise keeps the anchor positive definite");
                    let mut affine = load.add_constant(linalg::log2_det(&anchor).expect("positive definite anchor") - n as f64 / LN_2);
                    let e = crate::model::build_selector(i, cfg).expect("eRRH index in range");
                    for &s in &self.quantized[i] {
                        let map = e.adjoint() * &self.selectors[s];
                        affine = affine.matrix(self.w_var[s].expect("quantized subfiles are live"), tangent(&map, &binv));
                    }
                    affine = affine.matrix(ov, linalg::hermitize(&binv) * Complex64::new(1.0 / LN_2, 0.0));
                    constraints.push(Constraint::LogDet {
                        affine,
                        base: linalg::zeros(n, n),
                        terms: vec![LogDetTerm { var: ov, map: linalg::identity(n) }],
                        kind: ConstraintKind::Fronthaul,
                    });
                }
                None if !self.transferred[i].is_empty() => {
                    constraints.push(Constraint::Linear { form: load, kind: ConstraintKind::Fronthaul });
                }
                None => {}
            }

            let e = crate::model::build_selector(i, cfg).expect("eRRH index in range");
            let mut power = LinearForm::constant(-cfg.power_budget[i]);
            let mut touched = false;
            for s in 0..inst.num_requested_subfiles() {
                if let Some(v) = self.w_var[s] {
                    let m = e.adjoint() * &self.selectors[s];
                    if m.iter().any(|z| z.norm() > 0.0) {
                        power = power.matrix(v, linalg::hermitize(&(m.adjoint() * &m)));
                        touched = true;
                    }
                }
            }
            if let Some(ov) = self.omega_var[i] {
                power = power.matrix(ov, linalg::identity(cfg.antennas_errh[i]));
                touched = true;
            }
            if touched {
                constraints.push(Constraint::Linear { form: power, kind: ConstraintKind::Power });
            }
        }

        DcSubproblem {
            num_scalars: self.num_scalars,
            matrices: self.matrices.clone(),
            objective: LinearForm::default().scalar(RMIN, 1.0),
            constraints,
        }
    }

    pub fn encode(&self, it: &Iterate, r_min: f64) -> Point {
        let mut scalars = vec![0.0; self.num_scalars];
        scalars[RMIN] = r_min;
        let mut matrices = vec![CMat::zeros(0, 0); self.matrices.len()];
        for s in 0..self.live.len() {
            if let (Some(r), Some(v)) = (self.r_var[s], self.w_var[s]) {
                scalars[r] = it.rates[s];
                let k = &self.selectors[s];
                matrices[v] = linalg::hermitize(&(k.adjoint() * &it.w[s] * k));
            }
        }
        for (i, v) in self.omega_var.iter().enumerate() {
            if let Some(v) = v {
                matrices[*v] = linalg::hermitize(&it.omega[i]);
            }
        }
        Point { scalars, matrices }
    }

    pub fn decode(&self, p: &Point) -> (Iterate, f64) {
        let cfg = &self.inst.cfg;
        let n_r = cfg.total_errh_antennas();
        let subs = self.live.len();
        let mut w = vec![linalg::zeros(n_r, n_r); subs];
        let mut rates = vec![0.0; subs];
        for s in 0..subs {
            if let (Some(r), Some(v)) = (self.r_var[s], self.w_var[s]) {
                rates[s] = p.scalars[r];
                w[s] = linalg::hermitize(&linalg::congruence(&self.selectors[s], &p.matrices[v]));
            }
        }
        let omega = (0..cfg.num_errh)
            .map(|i| match self.omega_var[i] {
                Some(v) => linalg::hermitize(&p.matrices[v]),
                None => linalg::zeros(cfg.antennas_errh[i], cfg.antennas_errh[i]),
            })
            .collect();
        (Iterate { w, omega, rates }, p.scalars[RMIN])
    }

    /// Exact rates evaluated for the mode, ignoring quantization in hard mode.
    pub fn deliverable(&self, it: &Iterate) -> Vec<f64> {
        rates::deliverable_rates(&self.inst, self.mode, &it.w, &it.omega)
    }

    /// Clamps the rates to `[0, min(S_l, q)]` and returns the exact `R_min`.
    pub fn tighten(&self, it: &mut Iterate) -> f64 {
        let q = self.deliverable(it);
        for (s, _, l) in self.inst.requested_subfiles() {
            it.rates[s] = if self.live[s] { it.rates[s].min(q[s]).min(self.inst.split.size(l)).max(0.0) } else { 0.0 };
        }
        it.rates
            .chunks(self.inst.num_subfiles())
            .map(|c| c.iter().sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn linearization(&self, it: &Iterate) -> LinearizationPoint {
        LinearizationPoint { covariances: it.w.clone(), quant_covariances: it.omega.clone() }
    }

    /// `g_i` at the iterate.
    pub fn usage(&self, it: &Iterate, i: usize) -> f64 {
        if self.omega_var[i].is_none() {
            return 0.0;
        }
        rates::fronthaul_usage(&self.inst, self.mode, i, &it.w, &it.omega).unwrap_or(f64::INFINITY)
    }

    pub fn load(&self, it: &Iterate, i: usize) -> f64 {
        self.transferred[i].iter().map(|&s| it.rates[s]).sum()
    }
}

/// Coefficient `K† B⁻¹ K / ln 2` of the tangent of `log2 det(B + K X K†)`.
fn tangent(k: &CMat, binv: &CMat) -> CMat {
    linalg::hermitize(&(k.adjoint() * binv * k)) * Complex64::new(1.0 / LN_2, 0.0)
}
