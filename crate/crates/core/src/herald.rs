//! Heralding problems and the exact unit-fidelity constraint set.
//!
//! A heralding problem fixes an input Fock state (pinned to basis index 0),
//! a measurement pattern on the trailing modes and a target state on the
//! leading modes. Unit fidelity is the linear constraint that the heralded
//! components of the first column of the Fock unitary stay aligned with the
//! target amplitudes. This module knows the symmetries of that constraint:
//! the admissible first-column directions, the tangent projector, and the
//! finite update that moves along the constraint manifold exactly.

use crate::error::{CoreError, Result};
use crate::fock::{enumerate_basis, FockSpace, FockUnitary, Occupation};
use crate::linalg::{self, Lu};
use crate::C64;
use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Input state, measurement pattern and target amplitudes of one heralding
/// design task.
#[derive(Debug, Clone)]
pub struct HeraldingProblem {
    space: Arc<FockSpace>,
    input: Occupation,
    pattern: Occupation,
    /// Basis indices of the heralded states (k, pattern), in the
    /// enumeration order of the k-substates.
    mu: Vec<usize>,
    /// Heralded occupation of the leading modes for each mu entry.
    outputs: Vec<Occupation>,
    /// Target amplitudes a_alpha, unit norm.
    target: Array1<C64>,
}

impl HeraldingProblem {
    /// Build a problem. `target` lists (leading-mode occupation, amplitude)
    /// pairs; unlisted heralded states get amplitude zero. The target is
    /// normalized on construction (zero norm is an error).
    pub fn new(
        modes: usize,
        photons: usize,
        input: &[u32],
        pattern: &[u32],
        target: &[(Occupation, C64)],
    ) -> Result<Self> {
        if input.len() != modes {
            return Err(CoreError::InvalidArgument(format!(
                "input occupation has {} modes, expected {modes}",
                input.len()
            )));
        }
        if input.iter().map(|&c| c as usize).sum::<usize>() != photons {
            return Err(CoreError::InvalidArgument(format!(
                "input occupation carries {} photons, expected {photons}",
                input.iter().sum::<u32>()
            )));
        }
        let measured = pattern.len();
        if measured >= modes {
            return Err(CoreError::InvalidArgument(
                "measurement pattern must leave at least one output mode".into(),
            ));
        }
        let m_photons: u32 = pattern.iter().sum();
        if m_photons as usize > photons {
            return Err(CoreError::InvalidArgument(format!(
                "pattern detects {m_photons} photons, more than the {photons} available"
            )));
        }
        let out_modes = modes - measured;
        let out_photons = photons - m_photons as usize;
        let space = Arc::new(enumerate_basis(modes, photons, Some(input))?);
        let ksub = enumerate_basis(out_modes, out_photons, None)?;
        let mut mu = Vec::with_capacity(ksub.dim());
        let mut outputs = Vec::with_capacity(ksub.dim());
        for k in ksub.basis() {
            let mut full = k.clone();
            full.extend_from_slice(pattern);
            let idx = space
                .index_of(&full)
                .expect("(k, pattern) states live in the sector");
            mu.push(idx);
            outputs.push(k.clone());
        }
        let mut a = Array1::<C64>::zeros(mu.len());
        for (occ, amp) in target {
            if occ.len() != out_modes {
                return Err(CoreError::InvalidArgument(format!(
                    "target occupation {} has {} modes, expected {out_modes}",
                    crate::fock::occupation_string(occ),
                    occ.len()
                )));
            }
            let pos = outputs.iter().position(|k| k == occ).ok_or_else(|| {
                CoreError::InvalidArgument(format!(
                    "target occupation {} does not carry {out_photons} photons",
                    crate::fock::occupation_string(occ)
                ))
            })?;
            a[pos] += *amp;
        }
        let norm = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(CoreError::InvalidArgument("target state has zero norm".into()));
        }
        a.mapv_inplace(|x| x / norm);
        Ok(HeraldingProblem {
            space,
            input: input.to_vec(),
            pattern: pattern.to_vec(),
            mu,
            outputs,
            target: a,
        })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    /// The input state is always pinned to basis index 0.
    pub fn input_index(&self) -> usize {
        0
    }

    pub fn input(&self) -> &[u32] {
        &self.input
    }

    pub fn pattern(&self) -> &[u32] {
        &self.pattern
    }

    pub fn mu(&self) -> &[usize] {
        &self.mu
    }

    /// Leading-mode occupations matching `mu`, in order.
    pub fn outputs(&self) -> &[Occupation] {
        &self.outputs
    }

    pub fn target(&self) -> &Array1<C64> {
        &self.target
    }

    pub fn output_dim(&self) -> usize {
        self.mu.len()
    }

    /// Heralded components of the first column: c_alpha = U[mu_alpha, 0].
    pub fn heralded_column(&self, u: &FockUnitary) -> Array1<C64> {
        Array1::from_iter(self.mu.iter().map(|&idx| u.matrix()[[idx, 0]]))
    }
}

/// Residual of the unit-fidelity constraint: (1 - a a^dagger) c with
/// c the heralded part of the first column. Zero iff heralding is exact.
pub fn fidelity_residual(u: &FockUnitary, prob: &HeraldingProblem) -> Array1<C64> {
    let c = prob.heralded_column(u);
    let overlap: C64 = prob
        .target
        .iter()
        .zip(c.iter())
        .map(|(a, x)| a.conj() * x)
        .sum();
    Array1::from_iter(
        c.iter()
            .zip(prob.target.iter())
            .map(|(x, a)| x - a * overlap),
    )
}

pub fn fidelity_residual_norm(u: &FockUnitary, prob: &HeraldingProblem) -> f64 {
    fidelity_residual(u, prob)
        .iter()
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Success amplitude z (and probability |z|^2) of the target heralding.
#[derive(Debug, Clone, Copy)]
pub struct SuccessAmplitude {
    pub z: C64,
    pub probability: f64,
    /// Set when the fidelity residual was not negligible, in which case z is
    /// the least-squares projection of the heralded column onto the target.
    pub approximate: bool,
}

pub fn success_amplitude(u: &FockUnitary, prob: &HeraldingProblem) -> SuccessAmplitude {
    let c = prob.heralded_column(u);
    let z: C64 = prob
        .target
        .iter()
        .zip(c.iter())
        .map(|(a, x)| a.conj() * x)
        .sum();
    let res_sq: f64 = c
        .iter()
        .zip(prob.target.iter())
        .map(|(x, a)| (x - a * z).norm_sqr())
        .sum();
    SuccessAmplitude {
        z,
        probability: z.norm_sqr(),
        approximate: res_sq.sqrt() > 1e-8,
    }
}

/// (F, P) of the raw heralded column: P is the total pattern probability,
/// F the normalized overlap with the target (F = 1 when P vanishes).
pub fn fidelity_diagnostic(u: &FockUnitary, prob: &HeraldingProblem) -> (f64, f64) {
    let c = prob.heralded_column(u);
    let p: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    if p < 1e-30 {
        return (1.0, p);
    }
    let overlap: C64 = prob
        .target
        .iter()
        .zip(c.iter())
        .map(|(a, x)| a.conj() * x)
        .sum();
    (overlap.norm_sqr() / p, p)
}

/// Cached geometry of the fidelity constraint at a particular U.
///
/// `h` is the distinguished admissible direction that changes |z| at first
/// order; `v_basis` an orthonormal basis of V = Span{e^(alpha)} with
/// e^(alpha)_n = conj(U[mu_alpha, n]), n >= 1. The complement projector is
/// P_u q = q - V (V^dagger q).
#[derive(Debug, Clone)]
pub struct FidelityFrame {
    pub z: C64,
    /// Length d-1 (first-column rows 1..d).
    pub h: Array1<C64>,
    pub h_norm_sqr: f64,
    /// Raw e^(alpha) vectors as columns, (d-1) x output_dim.
    pub e_basis: Array2<C64>,
    /// Orthonormalized basis of V, (d-1) x rank.
    pub v_basis: Array2<C64>,
    pub rank: usize,
    /// Set when Span{e^(alpha)} had lower dimension than output_dim.
    pub rank_deficient: bool,
}

pub fn build_frame(u: &FockUnitary, prob: &HeraldingProblem) -> FidelityFrame {
    let d = u.dim();
    let amp = success_amplitude(u, prob);
    let z = amp.z;
    let phase = if z.norm() < 1e-300 {
        C64::new(1.0, 0.0)
    } else {
        z / z.norm()
    };
    let out_dim = prob.output_dim();
    let mut e = Array2::<C64>::zeros((d - 1, out_dim));
    for (alpha, &idx) in prob.mu.iter().enumerate() {
        for n in 1..d {
            e[[n - 1, alpha]] = u.matrix()[[idx, n]].conj();
        }
    }
    let mut h = Array1::<C64>::zeros(d - 1);
    for (alpha, a) in prob.target.iter().enumerate() {
        let coeff = C64::new(0.0, -1.0) * phase * a;
        for n in 0..(d - 1) {
            h[n] += coeff * e[[n, alpha]];
        }
    }
    let h_norm_sqr: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    let mut v = e.clone();
    let rank = linalg::mgs_orthonormalize(&mut v, 1e-10);
    let v_basis = v.slice(s![.., 0..rank]).to_owned();
    FidelityFrame {
        z,
        h,
        h_norm_sqr,
        e_basis: e,
        v_basis,
        rank,
        rank_deficient: rank < out_dim,
    }
}

impl FidelityFrame {
    /// xi = <h, t> / <h, h>; zero when h degenerates (|z| = 1 exactly).
    pub fn xi(&self, t: &Array1<C64>) -> C64 {
        if self.h_norm_sqr < 1e-30 {
            return C64::new(0.0, 0.0);
        }
        let dot: C64 = self.h.iter().zip(t.iter()).map(|(a, b)| a.conj() * b).sum();
        dot / self.h_norm_sqr
    }

    /// Admissible part of a first-column direction: xi h + P_u t.
    pub fn admissible_column(&self, t: &Array1<C64>) -> Array1<C64> {
        let xi = self.xi(t);
        // P_u t = t - V (V^dagger t)
        let mut out = t.clone();
        let coeffs: Vec<C64> = (0..self.rank)
            .map(|k| {
                self.v_basis
                    .column(k)
                    .iter()
                    .zip(t.iter())
                    .map(|(v, x)| v.conj() * x)
                    .sum()
            })
            .collect();
        for (k, coeff) in coeffs.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.v_basis.column(k).iter()) {
                *o -= coeff * v;
            }
        }
        if self.h_norm_sqr >= 1e-30 {
            for (o, hv) in out.iter_mut().zip(self.h.iter()) {
                *o += xi * hv;
            }
        }
        out
    }

    /// In-place tangent projector of the fidelity constraint: keeps the
    /// diagonal block, replaces the first-column block by its admissible
    /// part (and mirrors it to the first row).
    pub fn project_tangent_inplace(&self, x: &mut Array2<C64>) {
        let d = x.nrows();
        let t = Array1::from_iter((1..d).map(|r| x[[r, 0]]));
        let t_adm = self.admissible_column(&t);
        for r in 1..d {
            x[[r, 0]] = t_adm[r - 1];
            x[[0, r]] = t_adm[r - 1].conj();
        }
    }
}

/// Orthogonal projector onto the tangent space of the fidelity constraint.
/// Builds the frame at U; use [`FidelityFrame::project_tangent_inplace`]
/// when a frame is already available.
pub fn project_tangent(
    u: &FockUnitary,
    prob: &HeraldingProblem,
    x: &Array2<C64>,
) -> Array2<C64> {
    let frame = build_frame(u, prob);
    let mut out = x.clone();
    frame.project_tangent_inplace(&mut out);
    out
}

/// How the trailing (d-1)-block of the update is applied.
#[derive(Debug, Clone)]
pub enum OmegaOp {
    Identity,
    /// Exact Cayley transform (1 + i w/2)(1 - i w/2)^{-1} of a Hermitian w.
    Cayley { omega: Array2<C64> },
    /// Low-rank proxy from a Lanczos pass: Omega = I + Q (Cay(T) - I) Q^dagger
    /// with Q orthonormal (d-1) x r and T Hermitian r x r.
    LowRank { q: Array2<C64>, t: Array2<C64> },
}

/// One constraint-preserving manifold step. All parts are already scaled by
/// the line-search step length.
#[derive(Debug, Clone)]
pub struct UpdateStep {
    /// Admissible first-column direction (length d-1): xi h + P_u q.
    pub t_column: Array1<C64>,
    /// Diagonal phase on the first column.
    pub phi: f64,
    pub omega: OmegaOp,
}

impl UpdateStep {
    pub fn identity(d: usize) -> Self {
        UpdateStep {
            t_column: Array1::zeros(d - 1),
            phi: 0.0,
            omega: OmegaOp::Identity,
        }
    }
}

/// U' = U exp(i H(t)) diag(e^{i phi}, Omega).
///
/// H(t) lives on the first row/column only, so exp(i H) is the identity plus
/// a rank-2 correction on Span{e_0, (0, t/|t|)} and costs O(d^2) to apply.
/// Unitarity is monitored and the result re-orthonormalized if the drift
/// exceeds 1e-10.
pub fn apply_update(
    u: &FockUnitary,
    prob: &HeraldingProblem,
    step: &UpdateStep,
) -> Result<FockUnitary> {
    let d = u.dim();
    if step.t_column.len() != d - 1 {
        return Err(CoreError::InvalidArgument(format!(
            "t-column has length {}, expected {}",
            step.t_column.len(),
            d - 1
        )));
    }
    let mut m = u.matrix().clone();

    // Rank-2 rotation mixing the first column with the t-direction.
    let t_norm = step.t_column.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if t_norm > 0.0 {
        let cos_t = t_norm.cos();
        let sin_t = t_norm.sin();
        let that: Vec<C64> = step.t_column.iter().map(|x| x / t_norm).collect();
        // uv = U * (0, that); u0 = U e_0
        let mut uv = Array1::<C64>::zeros(d);
        for (j, tv) in that.iter().enumerate() {
            if tv.norm_sqr() == 0.0 {
                continue;
            }
            for r in 0..d {
                uv[r] += m[[r, j + 1]] * tv;
            }
        }
        let u0: Array1<C64> = m.column(0).to_owned();
        // new col 0 = cos * u0 + i sin * uv
        for r in 0..d {
            m[[r, 0]] = cos_t * u0[r] + C64::new(0.0, 1.0) * sin_t * uv[r];
        }
        // cols j >= 1: add ((cos-1) uv + i sin u0) * conj(that_j)
        let mix: Vec<C64> = (0..d)
            .map(|r| (cos_t - 1.0) * uv[r] + C64::new(0.0, 1.0) * sin_t * u0[r])
            .collect();
        for (j, tv) in that.iter().enumerate() {
            let w = tv.conj();
            if w.norm_sqr() == 0.0 {
                continue;
            }
            for r in 0..d {
                m[[r, j + 1]] += mix[r] * w;
            }
        }
    }

    // Block-diagonal tail: phase on the first column, Omega on the rest.
    if step.phi != 0.0 {
        let ph = C64::from_polar(1.0, step.phi);
        for r in 0..d {
            m[[r, 0]] *= ph;
        }
    }
    match &step.omega {
        OmegaOp::Identity => {}
        OmegaOp::Cayley { omega } => {
            apply_cayley_right(&mut m, omega)?;
        }
        OmegaOp::LowRank { q, t } => {
            apply_lowrank_right(&mut m, q, t)?;
        }
    }

    let mut out = FockUnitary::new(m, Arc::clone(u.space()))?;
    if sampled_unitarity_defect(&out) > 1e-10 {
        out.reunitarize();
    }
    debug_assert!(fidelity_residual_norm(&out, prob) < 1e-10);
    let _ = prob;
    Ok(out)
}

/// Cheap drift probe: exact defect restricted to a few columns.
fn sampled_unitarity_defect(u: &FockUnitary) -> f64 {
    let m = u.matrix();
    let d = m.nrows();
    let cols = [0usize, d / 2, d - 1];
    let mut worst = 0.0f64;
    for &c in &cols {
        for c2 in [c, (c + 1) % d] {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..d {
                acc += m[[r, c]].conj() * m[[r, c2]];
            }
            let target = if c == c2 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((acc - target).norm());
        }
    }
    worst
}

/// B[:, 1..] <- B[:, 1..] * (1 + i w/2)(1 - i w/2)^{-1}.
fn apply_cayley_right(m: &mut Array2<C64>, omega: &Array2<C64>) -> Result<()> {
    let d = m.nrows();
    let k = d - 1;
    if omega.dim() != (k, k) {
        return Err(CoreError::InvalidArgument(format!(
            "omega block is {:?}, expected ({k},{k})",
            omega.dim()
        )));
    }
    let half_i = C64::new(0.0, 0.5);
    let tail = m.slice(s![.., 1..]).to_owned();
    // M = B (1 + i w / 2)
    let mut rhs = tail.clone();
    linalg::gemm(
        half_i,
        &tail.view(),
        false,
        &omega.view(),
        false,
        C64::new(1.0, 0.0),
        &mut rhs,
    );
    // Solve X (1 - i w/2) = M  <=>  (1 - i w/2)^T X^T = M^T.
    let mut a = Array2::<C64>::eye(k);
    for p in 0..k {
        for q in 0..k {
            a[[p, q]] -= half_i * omega[[q, p]];
        }
    }
    match Lu::factor(&a) {
        Some(lu) => {
            let mut xt = rhs.t().to_owned();
            lu.solve_in_place(&mut xt);
            m.slice_mut(s![.., 1..]).assign(&xt.t());
            Ok(())
        }
        None => {
            // Singular Cayley denominator cannot happen for Hermitian omega,
            // but the exact small-block exponential is a safe fallback.
            let expw = linalg::exp_i_hermitian(omega);
            let mut out = Array2::zeros((d, k));
            linalg::gemm(
                C64::new(1.0, 0.0),
                &tail.view(),
                false,
                &expw.view(),
                false,
                C64::new(0.0, 0.0),
                &mut out,
            );
            m.slice_mut(s![.., 1..]).assign(&out);
            Ok(())
        }
    }
}

/// B[:, 1..] <- B[:, 1..] * (I + Q (Cay(T) - I) Q^dagger).
fn apply_lowrank_right(m: &mut Array2<C64>, q: &Array2<C64>, t: &Array2<C64>) -> Result<()> {
    let d = m.nrows();
    let k = d - 1;
    let r = q.ncols();
    if q.nrows() != k || t.dim() != (r, r) {
        return Err(CoreError::InvalidArgument("low-rank proxy has wrong shape".into()));
    }
    if r == 0 {
        return Ok(());
    }
    // Cay(T) on the small block.
    let half_i = C64::new(0.0, 0.5);
    let mut num = Array2::<C64>::eye(r);
    let mut den = Array2::<C64>::eye(r);
    for p in 0..r {
        for s_ in 0..r {
            num[[p, s_]] += half_i * t[[p, s_]];
            den[[p, s_]] -= half_i * t[[p, s_]];
        }
    }
    // num * den^{-1}: solve den^T X^T = num^T.
    let cay = {
        let mut dent = Array2::<C64>::zeros((r, r));
        for p in 0..r {
            for s_ in 0..r {
                dent[[p, s_]] = den[[s_, p]];
            }
        }
        match Lu::factor(&dent) {
            Some(lut) => {
                let mut xt = num.t().to_owned();
                lut.solve_in_place(&mut xt);
                xt.t().to_owned()
            }
            None => linalg::exp_i_hermitian(t),
        }
    };
    let mut corr = cay;
    for p in 0..r {
        corr[[p, p]] -= C64::new(1.0, 0.0);
    }
    let tail = m.slice(s![.., 1..]).to_owned();
    // BQ (d x r)
    let mut bq = Array2::<C64>::zeros((d, r));
    linalg::gemm(
        C64::new(1.0, 0.0),
        &tail.view(),
        false,
        &q.view(),
        false,
        C64::new(0.0, 0.0),
        &mut bq,
    );
    // BQ * corr
    let mut bqc = Array2::<C64>::zeros((d, r));
    linalg::gemm(
        C64::new(1.0, 0.0),
        &bq.view(),
        false,
        &corr.view(),
        false,
        C64::new(0.0, 0.0),
        &mut bqc,
    );
    // tail += BQC * Q^dagger
    let qconj = q.mapv(|x| x.conj());
    let mut upd = tail;
    linalg::gemm(
        C64::new(1.0, 0.0),
        &bqc.view(),
        false,
        &qconj.t(),
        false,
        C64::new(1.0, 0.0),
        &mut upd,
    );
    m.slice_mut(s![.., 1..]).assign(&upd);
    Ok(())
}

/// Snap a slightly drifted unitary back onto the constraint manifold: the
/// heralded part of the first column is realigned with the target (keeping
/// the projected amplitude), the column renormalized and the trailing
/// columns reorthonormalized. Returns the residual after restoration.
pub fn restore_fidelity(u: &mut FockUnitary, prob: &HeraldingProblem) -> f64 {
    let amp = success_amplitude(u, prob);
    let m = u.matrix_mut();
    for (alpha, &idx) in prob.mu().iter().enumerate() {
        m[[idx, 0]] = amp.z * prob.target()[alpha];
    }
    let norm = m.column(0).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in m.column_mut(0).iter_mut() {
            *v /= norm;
        }
    }
    u.reunitarize();
    fidelity_residual_norm(u, prob)
}

/// Random unitary satisfying the fidelity constraint exactly: the heralded
/// part of the first column is z0 * a with |z0| uniform in (0.1, 0.9), the
/// rest of the column Haar-like, and the remaining columns completed by
/// orthonormalizing a Gaussian frame.
pub fn initial_feasible_unitary(prob: &HeraldingProblem, seed: u64) -> FockUnitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = prob.space().dim();
    let rho: f64 = rng.gen_range(0.1..0.9);
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let z0 = C64::from_polar(rho, theta);
    let mut col = Array1::<C64>::zeros(d);
    for (alpha, &idx) in prob.mu().iter().enumerate() {
        col[idx] = z0 * prob.target()[alpha];
    }
    let mut in_mu = vec![false; d];
    for &idx in prob.mu() {
        in_mu[idx] = true;
    }
    let free: Vec<usize> = (0..d).filter(|&i| !in_mu[i]).collect();
    if free.is_empty() {
        let norm = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|x| x / norm);
    } else {
        let noise = linalg::random_gaussian(&mut rng, free.len(), 1);
        let noise_norm = noise.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let scale = (1.0 - rho * rho).sqrt() / noise_norm;
        for (slot, &idx) in free.iter().enumerate() {
            col[idx] = noise[[slot, 0]] * scale;
        }
    }
    let mut frame = linalg::random_gaussian(&mut rng, d, d);
    frame.column_mut(0).assign(&col);
    let rank = linalg::mgs_orthonormalize(&mut frame, 1e-12);
    debug_assert_eq!(rank, d);
    FockUnitary::new(frame, Arc::clone(prob.space())).expect("shape is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob_inner, haar_unitary, random_hermitian};

    fn toy_problem() -> HeraldingProblem {
        // 4 modes, 3 photons, herald |011> from |1110> on pattern |1>.
        HeraldingProblem::new(
            4,
            3,
            &[1, 1, 1, 0],
            &[1],
            &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
        )
        .unwrap()
    }

    fn bell5_problem() -> HeraldingProblem {
        let r = C64::new(1.0 / f64::sqrt(2.0), 0.0);
        HeraldingProblem::new(
            5,
            4,
            &[1, 1, 1, 1, 0],
            &[2],
            &[(vec![1, 0, 1, 0], r), (vec![0, 1, 0, 1], r)],
        )
        .unwrap()
    }

    #[test]
    fn problem_construction() {
        let prob = toy_problem();
        assert_eq!(prob.space().dim(), 20);
        assert_eq!(prob.space().state(0).as_slice(), &[1, 1, 1, 0]);
        // heralded states: (k, 1) with k over 3 modes, 2 photons
        assert_eq!(prob.output_dim(), 6);
        let norm: f64 = prob.target().iter().map(|x| x.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        // mu entries are distinct, valid, and all end in the pattern
        let mut seen = std::collections::HashSet::new();
        for &idx in prob.mu() {
            assert!(idx < prob.space().dim());
            assert!(seen.insert(idx));
            let occ = prob.space().state(idx);
            assert_eq!(occ[3], 1);
        }
    }

    #[test]
    fn problem_rejects_bad_targets() {
        assert!(HeraldingProblem::new(
            4,
            3,
            &[1, 1, 1, 0],
            &[1],
            &[(vec![0, 1], C64::new(1.0, 0.0))],
        )
        .is_err());
        assert!(HeraldingProblem::new(
            4,
            3,
            &[1, 1, 1, 0],
            &[1],
            &[(vec![1, 1, 1], C64::new(1.0, 0.0))],
        )
        .is_err());
    }

    #[test]
    fn identity_is_degenerate_feasible() {
        let prob = toy_problem();
        let u = FockUnitary::identity(Arc::clone(prob.space()));
        let res = fidelity_residual(&u, &prob);
        assert!(res.iter().all(|x| x.norm() == 0.0));
        let amp = success_amplitude(&u, &prob);
        assert_eq!(amp.z, C64::new(0.0, 0.0));
        let (f, p) = fidelity_diagnostic(&u, &prob);
        assert_eq!(f, 1.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn random_unitary_is_generically_infeasible() {
        let prob = toy_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = haar_unitary(&mut rng, prob.space().dim());
        let u = FockUnitary::new(m, Arc::clone(prob.space())).unwrap();
        let res = fidelity_residual(&u, &prob);
        let norm: f64 = res.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-3);
        // cross-check against a direct loop over the definition
        let c = prob.heralded_column(&u);
        let z: C64 = prob
            .target()
            .iter()
            .zip(c.iter())
            .map(|(a, x)| a.conj() * x)
            .sum();
        for (alpha, r) in res.iter().enumerate() {
            let direct = c[alpha] - prob.target()[alpha] * z;
            assert!((r - direct).norm() < 1e-14);
        }
        assert!(success_amplitude(&u, &prob).approximate);
    }

    #[test]
    fn initial_unitary_is_feasible_and_seed_sensitive() {
        let prob = bell5_problem();
        for seed in [0u64, 1, 2] {
            let u = initial_feasible_unitary(&prob, seed);
            assert!(fidelity_residual_norm(&u, &prob) <= 1e-13);
            assert!(u.unitarity_defect() <= 1e-12);
            let amp = success_amplitude(&u, &prob);
            assert!(amp.z.norm() > 0.1 - 1e-9 && amp.z.norm() < 0.9 + 1e-9);
            assert!(!amp.approximate);
        }
        let u0 = initial_feasible_unitary(&prob, 0);
        let u1 = initial_feasible_unitary(&prob, 1);
        assert!(linalg::max_abs_diff(u0.matrix(), u1.matrix()) > 1e-3);
    }

    #[test]
    fn frame_solves_inhomogeneous_equation() {
        let prob = toy_problem();
        let u = initial_feasible_unitary(&prob, 11);
        let frame = build_frame(&u, &prob);
        let d = u.dim();
        // U[mu_a, n] h_n proportional to a_alpha
        let mut lhs = Array1::<C64>::zeros(prob.output_dim());
        for (alpha, &idx) in prob.mu().iter().enumerate() {
            for n in 1..d {
                lhs[alpha] += u.matrix()[[idx, n]] * frame.h[n - 1];
            }
        }
        // proportionality: lhs = lambda * a
        let lambda: C64 = prob
            .target()
            .iter()
            .zip(lhs.iter())
            .map(|(a, x)| a.conj() * x)
            .sum();
        for (alpha, x) in lhs.iter().enumerate() {
            assert!((x - prob.target()[alpha] * lambda).norm() < 1e-10);
        }
        // P_u annihilates every e^(alpha): U[mu_a, n] (P_u q)_n = 0
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = linalg::random_gaussian(&mut rng, d - 1, 1);
        let q1 = Array1::from_iter(q.column(0).iter().cloned());
        let zero_xi_frame = FidelityFrame {
            h_norm_sqr: 0.0,
            ..frame.clone()
        };
        let pu_q = zero_xi_frame.admissible_column(&q1);
        for &idx in prob.mu() {
            let mut acc = C64::new(0.0, 0.0);
            for n in 1..d {
                acc += u.matrix()[[idx, n]] * pu_q[n - 1];
            }
            assert!(acc.norm() < 1e-10);
        }
        // V dimension bounded by output_dim
        assert!(frame.rank <= prob.output_dim());
        // P_u e^(alpha) = 0
        for alpha in 0..prob.output_dim() {
            let e_a = Array1::from_iter(frame.e_basis.column(alpha).iter().cloned());
            let pu_e = zero_xi_frame.admissible_column(&e_a);
            let norm: f64 = pu_e.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm < 1e-10);
        }
    }

    #[test]
    fn projector_is_idempotent_and_self_adjoint() {
        let prob = toy_problem();
        let u = initial_feasible_unitary(&prob, 5);
        let d = u.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_hermitian(&mut rng, d);
        let y = random_hermitian(&mut rng, d);
        let px = project_tangent(&u, &prob, &x);
        let ppx = project_tangent(&u, &prob, &px);
        assert!(linalg::max_abs_diff(&px, &ppx) < 1e-12);
        // output Hermitian
        assert!(linalg::max_abs_diff(&px, &linalg::dagger(&px.view())) < 1e-13);
        // self-adjoint under the Frobenius inner product
        let py = project_tangent(&u, &prob, &y);
        let lhs = frob_inner(&y, &px);
        let rhs = frob_inner(&py, &x);
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn projector_kills_v_components_and_keeps_h() {
        let prob = toy_problem();
        let u = initial_feasible_unitary(&prob, 7);
        let d = u.dim();
        let frame = build_frame(&u, &prob);
        // t in V, orthogonal to h
        let e0 = Array1::from_iter(frame.e_basis.column(0).iter().cloned());
        let xi = frame.xi(&e0);
        let mut t_perp = e0.clone();
        if frame.h_norm_sqr > 0.0 {
            for (tp, hv) in t_perp.iter_mut().zip(frame.h.iter()) {
                *tp -= xi * hv;
            }
        }
        let mut x = Array2::<C64>::zeros((d, d));
        for r in 1..d {
            x[[r, 0]] = t_perp[r - 1];
            x[[0, r]] = t_perp[r - 1].conj();
        }
        let px = project_tangent(&u, &prob, &x);
        for r in 1..d {
            assert!(px[[r, 0]].norm() < 1e-10);
        }
        // t = h passes through unchanged
        let mut xh = Array2::<C64>::zeros((d, d));
        for r in 1..d {
            xh[[r, 0]] = frame.h[r - 1];
            xh[[0, r]] = frame.h[r - 1].conj();
        }
        let pxh = project_tangent(&u, &prob, &xh);
        assert!(linalg::max_abs_diff(&pxh, &xh) < 1e-12);
    }

    #[test]
    fn null_update_is_identity() {
        let prob = toy_problem();
        let u = initial_feasible_unitary(&prob, 9);
        let step = UpdateStep::identity(u.dim());
        let u2 = apply_update(&u, &prob, &step).unwrap();
        assert!(linalg::max_abs_diff(u.matrix(), u2.matrix()) < 1e-15);
    }

    #[test]
    fn random_admissible_updates_preserve_fidelity() {
        let prob = toy_problem();
        let u0 = initial_feasible_unitary(&prob, 13);
        let d = u0.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut worst: f64 = 0.0;
        let mut u = u0;
        for step_no in 0..100 {
            let frame = build_frame(&u, &prob);
            let raw = linalg::random_gaussian(&mut rng, d - 1, 1);
            let raw1 = Array1::from_iter(raw.column(0).iter().cloned());
            let mut t = frame.admissible_column(&raw1);
            // keep steps O(0.3) so the walk stays generic
            let tn = t.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if tn > 0.3 {
                t.mapv_inplace(|x| x * (0.3 / tn));
            }
            let omega = if step_no % 3 == 0 {
                let mut w = random_hermitian(&mut rng, d - 1);
                w.mapv_inplace(|x| x * 0.2);
                OmegaOp::Cayley { omega: w }
            } else {
                OmegaOp::Identity
            };
            let step = UpdateStep {
                t_column: t,
                phi: rng.gen_range(-0.3..0.3),
                omega,
            };
            u = apply_update(&u, &prob, &step).unwrap();
            worst = worst.max(fidelity_residual_norm(&u, &prob));
        }
        assert!(worst <= 1e-11, "max residual along walk: {worst:.3e}");
        assert!(u.unitarity_defect() < 1e-9);
    }

    #[test]
    fn finite_xi_step_keeps_constraint() {
        // |xi| = 0.5, distinctly non-infinitesimal.
        let prob = bell5_problem();
        let u = initial_feasible_unitary(&prob, 17);
        let frame = build_frame(&u, &prob);
        let t = frame.h.mapv(|x| x * C64::new(0.5, 0.0));
        let step = UpdateStep {
            t_column: t,
            phi: 0.0,
            omega: OmegaOp::Identity,
        };
        let u2 = apply_update(&u, &prob, &step).unwrap();
        assert!(fidelity_residual_norm(&u2, &prob) <= 1e-12);
    }

    #[test]
    fn amplitude_derivative_along_h() {
        // d z / d xi = z (1 - |z|^2) / |z| at xi = 0, along t = xi h.
        let prob = bell5_problem();
        let u = initial_feasible_unitary(&prob, 23);
        let frame = build_frame(&u, &prob);
        let z0 = frame.z;
        let eps = 1e-5;
        let z_at = |xi: f64| {
            let step = UpdateStep {
                t_column: frame.h.mapv(|x| x * C64::new(xi, 0.0)),
                phi: 0.0,
                omega: OmegaOp::Identity,
            };
            success_amplitude(&apply_update(&u, &prob, &step).unwrap(), &prob).z
        };
        let fd = (z_at(eps) - z_at(-eps)) / (2.0 * eps);
        let predicted = z0 * (1.0 - z0.norm_sqr()) / z0.norm();
        assert!(
            (fd - predicted).norm() < 1e-6 * predicted.norm().max(1.0),
            "finite difference {fd}, predicted {predicted}"
        );
    }

    #[test]
    fn lowrank_update_is_unitary_and_feasible() {
        let prob = toy_problem();
        let u = initial_feasible_unitary(&prob, 31);
        let d = u.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut q = linalg::random_gaussian(&mut rng, d - 1, 4);
        let rank = linalg::mgs_orthonormalize(&mut q, 1e-12);
        assert_eq!(rank, 4);
        let q = q.slice(s![.., 0..4]).to_owned();
        let mut t = random_hermitian(&mut rng, 4);
        t.mapv_inplace(|x| x * 0.3);
        let step = UpdateStep {
            t_column: Array1::zeros(d - 1),
            phi: 0.0,
            omega: OmegaOp::LowRank { q, t },
        };
        let u2 = apply_update(&u, &prob, &step).unwrap();
        assert!(u2.unitarity_defect() < 1e-10);
        assert!(fidelity_residual_norm(&u2, &prob) < 1e-12);
    }
}
