//! Linear-optics realizability machinery.
//!
//! A Fock-space unitary U is realizable by a passive interferometer exactly
//! when the rotated operators U^dagger (a_i^dagger a_j) U stay inside the
//! span of the bare ones. This module builds the normalized traceless
//! gamma-basis of that span, measures the optical residual R in [0, 1],
//! applies the Gauss-Newton operator of the residual least squares, and
//! extracts the underlying N x N scattering matrix at feasible points.
//!
//! Everything expressed in the rotated basis is kept in the factored form
//! gamma_bar^{nm} = (W_n^dagger W_m - (n/N) delta^{nm}) / sqrt(2K) with
//! W_j = a_j U mapping the n-photon sector to the (n-1)-photon sector.
//! All frame-level products then run through d x d' panels instead of
//! N_st^2 commutator matrices, which is what keeps the solver affordable.

use crate::error::{CoreError, Result};
use crate::fock::{
    enumerate_basis, ladder_generator, lift_unitary, FockSpace, FockUnitary, ScatteringMatrix,
    SparseLadder,
};
use crate::linalg::{self, Lu};
use crate::C64;
use ndarray::{Array1, Array2};
use std::sync::Arc;

/// Bare gamma-basis: gamma^{ij} = (a_i^dagger a_j - (n/N) delta^{ij}) / sqrt(2K),
/// K = n (N + n) N_st / (2 N (N + 1)).
#[derive(Debug, Clone)]
pub struct GammaBasis {
    space: Arc<FockSpace>,
    lower_space: Arc<FockSpace>,
    /// Per mode j: entries of a_j as (row-in-lower-sector, col-in-sector,
    /// value); exactly one entry per lower-sector row.
    lowering: Vec<Vec<(usize, usize, f64)>>,
    /// Ladder generators a_i^dagger a_j, index i * N + j.
    ladders: Vec<SparseLadder>,
    k_const: f64,
    /// sqrt(2K)
    s: f64,
    /// n / N
    c: f64,
}

pub fn build_gamma(space: &Arc<FockSpace>) -> Result<GammaBasis> {
    let n_modes = space.modes();
    let n_phot = space.photons();
    if n_phot == 0 {
        return Err(CoreError::InvalidArgument(
            "gamma basis needs at least one photon".into(),
        ));
    }
    let d = space.dim();
    let k_const = (n_phot * (n_modes + n_phot) * d) as f64 / (2 * n_modes * (n_modes + 1)) as f64;
    let lower_space = Arc::new(enumerate_basis(n_modes, n_phot - 1, None)?);
    let mut lowering = Vec::with_capacity(n_modes);
    for j in 0..n_modes {
        let mut entries = Vec::with_capacity(lower_space.dim());
        for (col, occ) in space.basis().iter().enumerate() {
            if occ[j] == 0 {
                continue;
            }
            let mut target = occ.clone();
            target[j] -= 1;
            let row = lower_space
                .index_of(&target)
                .expect("lowering stays in the (n-1)-sector");
            entries.push((row, col, (occ[j] as f64).sqrt()));
        }
        lowering.push(entries);
    }
    let mut ladders = Vec::with_capacity(n_modes * n_modes);
    for i in 0..n_modes {
        for j in 0..n_modes {
            ladders.push(ladder_generator(space, i, j)?);
        }
    }
    Ok(GammaBasis {
        space: Arc::clone(space),
        lower_space,
        lowering,
        ladders,
        k_const,
        s: (2.0 * k_const).sqrt(),
        c: n_phot as f64 / n_modes as f64,
    })
}

impl GammaBasis {
    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn modes(&self) -> usize {
        self.space.modes()
    }

    pub fn k_const(&self) -> f64 {
        self.k_const
    }

    /// sqrt(2K), the normalization of the gamma matrices.
    pub fn norm_factor(&self) -> f64 {
        self.s
    }

    pub fn ladder(&self, i: usize, j: usize) -> &SparseLadder {
        &self.ladders[i * self.modes() + j]
    }

    /// Dense gamma^{ij}, mainly for tests and small problems.
    pub fn gamma_dense(&self, i: usize, j: usize) -> Array2<C64> {
        let d = self.space.dim();
        let mut m = self.ladder(i, j).to_dense();
        if i == j {
            for p in 0..d {
                m[[p, p]] -= C64::new(self.c, 0.0);
            }
        }
        m.mapv_inplace(|x| x / self.s);
        m
    }

    /// Tr[gamma^{ij} gamma^{nm}] from the closed form
    /// delta^{im} delta^{jn} - delta^{ij} delta^{nm} / N.
    pub fn bare_overlap(&self, i: usize, j: usize, n: usize, m: usize) -> f64 {
        let mut v = 0.0;
        if i == m && j == n {
            v += 1.0;
        }
        if i == j && n == m {
            v -= 1.0 / self.modes() as f64;
        }
        v
    }

    /// sum_{ij} gamma^{ij} X gamma^{ji}, through the lowering maps:
    /// sum_{ij} g^{ij} X g^{ji} = sum_i L_i^dagger (sum_j L_j X L_j^dagger) L_i.
    fn casimir_sandwich(&self, x: &Array2<C64>) -> Array2<C64> {
        let d = self.space.dim();
        let dl = self.lower_space.dim();
        let n_modes = self.modes();
        let mut y = Array2::<C64>::zeros((dl, dl));
        let mut scratch = Array2::<C64>::zeros((dl, d));
        for j in 0..n_modes {
            scratch.fill(C64::new(0.0, 0.0));
            // L_j X: row q' gets v * X[q, :]
            for &(row, col, v) in &self.lowering[j] {
                let src = x.row(col).to_owned();
                let mut dst = scratch.row_mut(row);
                for (o, s_) in dst.iter_mut().zip(src.iter()) {
                    *o += v * s_;
                }
            }
            // y += (L_j X) L_j^dagger: column q' gets v * scratch[:, q]
            for &(row, col, v) in &self.lowering[j] {
                for r in 0..dl {
                    let val = scratch[[r, col]];
                    y[[r, row]] += v * val;
                }
            }
        }
        let mut z = Array2::<C64>::zeros((d, d));
        let mut scratch2 = Array2::<C64>::zeros((d, dl));
        for i in 0..n_modes {
            scratch2.fill(C64::new(0.0, 0.0));
            // L_i^dagger y: row q gets v * y[q', :]
            for &(row, col, v) in &self.lowering[i] {
                let src = y.row(row).to_owned();
                let mut dst = scratch2.row_mut(col);
                for (o, s_) in dst.iter_mut().zip(src.iter()) {
                    *o += v * s_;
                }
            }
            // z += scratch2 L_i: column q gets v * scratch2[:, q']
            for &(row, col, v) in &self.lowering[i] {
                for r in 0..d {
                    let val = scratch2[[r, row]];
                    z[[r, col]] += v * val;
                }
            }
        }
        // sum gamma X gamma = (sandwich - (n^2/N) X) / 2K
        let n_phot = self.space.photons() as f64;
        let shift = n_phot * n_phot / self.modes() as f64;
        let scale = 1.0 / (2.0 * self.k_const);
        let mut out = z;
        for p in 0..d {
            for q in 0..d {
                out[[p, q]] = (out[[p, q]] - shift * x[[p, q]]) * scale;
            }
        }
        out
    }
}

/// Rotated frame at a particular U: the factored gamma_bar basis, the
/// overlap matrix G' and the optical residual.
#[derive(Debug, Clone)]
pub struct RotatedFrame {
    /// wt[j] is (d x d'): row q holds column q of W_j = a_j U.
    wt: Vec<Array2<C64>>,
    /// Elementwise conjugates of wt, kept for adjoint-side products.
    wc: Vec<Array2<C64>>,
    /// G'[(ij),(nm)] = Tr[gamma^{ij} gamma_bar^{nm}], N^2 x N^2.
    overlaps: Array2<C64>,
    residual: f64,
}

impl RotatedFrame {
    pub fn build(u: &FockUnitary, gb: &GammaBasis) -> RotatedFrame {
        let d = gb.space.dim();
        let dl = gb.lower_space.dim();
        let n_modes = gb.modes();
        let um = u.matrix();
        let mut wt = Vec::with_capacity(n_modes);
        for j in 0..n_modes {
            let mut w = Array2::<C64>::zeros((d, dl));
            for &(row, col, v) in &gb.lowering[j] {
                // W_j[row, :] = v * U[col, :]  ->  wt[:, row] = v * U[col, :]
                for c_ in 0..d {
                    w[[c_, row]] = v * um[[col, c_]];
                }
            }
            wt.push(w);
        }
        let wc: Vec<Array2<C64>> = wt.iter().map(|w| w.mapv(|x| x.conj())).collect();
        let (overlaps, residual) = compute_overlaps(gb, &wt);
        RotatedFrame {
            wt,
            wc,
            overlaps,
            residual,
        }
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Overlap matrix G'[(ij),(nm)] = Tr[gamma^{ij} gamma_bar^{nm}].
    pub fn overlaps(&self) -> &Array2<C64> {
        &self.overlaps
    }

    /// Dense gamma_bar^{nm} = (W_n^dagger W_m - (n/N) delta^{nm}) / sqrt(2K).
    pub fn gamma_bar(&self, gb: &GammaBasis, n: usize, m: usize) -> Array2<C64> {
        let d = gb.space.dim();
        let mut out = Array2::<C64>::zeros((d, d));
        // (W_n^dagger W_m)[q, p] = conj-dot(wt_n.row(q), wt_m.row(p))
        linalg::gemm(
            C64::new(1.0, 0.0),
            &self.wc[n].view(),
            false,
            &self.wt[m].t(),
            false,
            C64::new(0.0, 0.0),
            &mut out,
        );
        if n == m {
            for p in 0..d {
                out[[p, p]] -= C64::new(gb.c, 0.0);
            }
        }
        out.mapv_inplace(|x| x / gb.s);
        out
    }

    /// First column of gamma_bar^{nm} (length d).
    pub fn gamma_bar_column0(&self, gb: &GammaBasis, n: usize, m: usize) -> Array1<C64> {
        let d = gb.space.dim();
        let w0 = self.wt[m].row(0);
        let mut col = Array1::<C64>::zeros(d);
        for q in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in self.wc[n].row(q).iter().zip(w0.iter()) {
                acc += a * b;
            }
            col[q] = acc;
        }
        if n == m {
            col[0] -= C64::new(gb.c, 0.0);
        }
        col.mapv_inplace(|x| x / gb.s);
        col
    }

    /// H = sum_{nm} alpha[(n,m)] gamma_bar^{nm}, assembled through the W
    /// factors; Hermitian when alpha is (alpha[m][n] = conj(alpha[n][m])).
    pub fn assemble_tangent(&self, gb: &GammaBasis, alpha: &Array2<C64>) -> Array2<C64> {
        let d = gb.space.dim();
        let dl = gb.lower_space.dim();
        let n_modes = gb.modes();
        let mut out = Array2::<C64>::zeros((d, d));
        for n in 0..n_modes {
            // combo = sum_m alpha[n,m] W_m (transposed storage)
            let mut combo = Array2::<C64>::zeros((d, dl));
            for m in 0..n_modes {
                let a = alpha[[n, m]];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                combo.scaled_add(a, &self.wt[m]);
            }
            // out += W_n^dagger * combo = wc[n] * combo^T
            linalg::gemm(
                C64::new(1.0, 0.0),
                &self.wc[n].view(),
                false,
                &combo.t(),
                false,
                C64::new(1.0, 0.0),
                &mut out,
            );
        }
        let mut diag_shift = C64::new(0.0, 0.0);
        for n in 0..n_modes {
            diag_shift += alpha[[n, n]];
        }
        diag_shift *= gb.c;
        for p in 0..d {
            out[[p, p]] -= diag_shift;
        }
        out.mapv_inplace(|x| x / gb.s);
        out
    }

    /// Coefficients Phi[(nm),(ij)] = Tr([gamma_bar^{nm}, gamma^{ij}] X)
    /// = (Tr[g^{ij} X W_n^dagger W_m] - Tr[g^{ij} W_n^dagger W_m X]) / 2K.
    ///
    /// `vt[m]` must hold (W_m X)^T.
    fn phi_coefficients(&self, gb: &GammaBasis, vt: &[Array2<C64>]) -> Array2<C64> {
        let n_modes = gb.modes();
        let nn = n_modes * n_modes;
        let inv_s2 = 1.0 / (gb.s * gb.s);
        let mut phi = Array2::<C64>::zeros((nn, nn));
        for n in 0..n_modes {
            for m in n..n_modes {
                for i in 0..n_modes {
                    for j in 0..n_modes {
                        let ladder = gb.ladder(i, j);
                        let mut acc = C64::new(0.0, 0.0);
                        for &(p, q, v) in ladder.entries() {
                            // Tr[g X W_n^d W_m] term: (V_n^dagger W_m)[q, p]
                            // Tr[g W_n^d W_m X] term: (W_n^dagger V_m)[q, p]
                            let mut ta = C64::new(0.0, 0.0);
                            let mut tb = C64::new(0.0, 0.0);
                            for ((vn, wm), (wn, vm)) in vt[n]
                                .row(q)
                                .iter()
                                .zip(self.wt[m].row(p).iter())
                                .zip(self.wc[n].row(q).iter().zip(vt[m].row(p).iter()))
                            {
                                ta += vn.conj() * wm;
                                tb += wn * vm;
                            }
                            acc += v * (ta - tb);
                        }
                        phi[[n * n_modes + m, i * n_modes + j]] = acc * inv_s2;
                    }
                }
            }
        }
        // Fill n > m from Phi[(mn),(ij)] = -conj(Phi[(nm),(ji)]).
        for n in 0..n_modes {
            for m in 0..n {
                for i in 0..n_modes {
                    for j in 0..n_modes {
                        let v = phi[[m * n_modes + n, j * n_modes + i]];
                        phi[[n * n_modes + m, i * n_modes + j]] = -v.conj();
                    }
                }
            }
        }
        phi
    }

    /// sum_{nm,ij} coeff[(nm),(ij)] [gamma_bar^{nm}, gamma^{ij}]
    /// = (1/2K) sum_{nm} [W_n^dagger W_m, A^{nm}] with
    /// A^{nm} = sum_{ij} coeff[(nm),(ij)] g^{ij}.
    fn accumulate_commutators(&self, gb: &GammaBasis, coeff: &Array2<C64>) -> Array2<C64> {
        let d = gb.space.dim();
        let dl = gb.lower_space.dim();
        let n_modes = gb.modes();
        let inv_s2 = 1.0 / (gb.s * gb.s);
        let mut t1 = Array2::<C64>::zeros((d, d));
        let mut t2 = Array2::<C64>::zeros((d, d));
        let mut bt = Array2::<C64>::zeros((d, dl));
        let mut cm = vec![Array2::<C64>::zeros((d, dl)); n_modes];
        for n in 0..n_modes {
            bt.fill(C64::new(0.0, 0.0));
            for m in 0..n_modes {
                for i in 0..n_modes {
                    for j in 0..n_modes {
                        let w = coeff[[n * n_modes + m, i * n_modes + j]];
                        if w.norm_sqr() == 0.0 {
                            continue;
                        }
                        let ladder = gb.ladder(i, j);
                        for &(p, q, v) in ladder.entries() {
                            let wv = w * v;
                            // B_n = sum_m W_m A^{nm}: B_n^T[q, :] += wv * wt_m.row(p)
                            {
                                let src = self.wt[m].row(p);
                                let mut dst = bt.row_mut(q);
                                for (o, s_) in dst.iter_mut().zip(src.iter()) {
                                    *o += wv * s_;
                                }
                            }
                            // C_m = sum_n A^{nm} W_n^dagger: C_m[p, :] += wv * wc_n.row(q)
                            {
                                let src = self.wc[n].row(q);
                                let mut dst = cm[m].row_mut(p);
                                for (o, s_) in dst.iter_mut().zip(src.iter()) {
                                    *o += wv * s_;
                                }
                            }
                        }
                    }
                }
            }
            // T1 += W_n^dagger B_n = wc[n] * (B_n^T)^T
            linalg::gemm(
                C64::new(1.0, 0.0),
                &self.wc[n].view(),
                false,
                &bt.t(),
                false,
                C64::new(1.0, 0.0),
                &mut t1,
            );
        }
        for m in 0..n_modes {
            // T2 += C_m W_m = C_m * wt[m]^T
            linalg::gemm(
                C64::new(1.0, 0.0),
                &cm[m].view(),
                false,
                &self.wt[m].t(),
                false,
                C64::new(1.0, 0.0),
                &mut t2,
            );
        }
        let mut out = t1;
        out.scaled_add(C64::new(-1.0, 0.0), &t2);
        out.mapv_inplace(|x| x * inv_s2);
        out
    }

    /// Gradient of the optical residual at U, as a Hermitian matrix:
    /// d/dtau R(U e^{i tau X}) = Tr(grad * X).
    pub fn grad_residual(&self, gb: &GammaBasis) -> Array2<C64> {
        let n_modes = gb.modes();
        let nn = n_modes * n_modes;
        // coeff[(nm),(ij)] = i * conj(G'[(ij),(nm)])
        let mut coeff = Array2::<C64>::zeros((nn, nn));
        for a in 0..nn {
            for b in 0..nn {
                coeff[[b, a]] = C64::new(0.0, 1.0) * self.overlaps[[a, b]].conj();
            }
        }
        let mut g = self.accumulate_commutators(gb, &coeff);
        let scale = 2.0 / (nn as f64 - 1.0);
        g.mapv_inplace(|x| x * scale);
        linalg::hermitize(&mut g);
        g
    }

    /// The Gauss-Newton operator of the optical residuals applied to a
    /// Hermitian X:
    /// ((N^2-1)/N_st) X - sum_{ij} gamma^{ij} X gamma^{ji}
    ///   - (1/2) sum (Tr([gamma_bar^{nm}, gamma^{ij}] X))^* [gamma_bar^{nm}, gamma^{ij}].
    pub fn gauss_newton_apply(&self, gb: &GammaBasis, x: &Array2<C64>) -> Array2<C64> {
        let d = gb.space.dim();
        let n_modes = gb.modes();
        let nn = (n_modes * n_modes) as f64;
        // vt[m] = (W_m X)^T = X^T wt[m]
        let vt: Vec<Array2<C64>> = (0..n_modes)
            .map(|m| {
                let mut v = Array2::<C64>::zeros((d, gb.lower_space.dim()));
                linalg::gemm(
                    C64::new(1.0, 0.0),
                    &x.t(),
                    false,
                    &self.wt[m].view(),
                    false,
                    C64::new(0.0, 0.0),
                    &mut v,
                );
                v
            })
            .collect();
        let phi = self.phi_coefficients(gb, &vt);
        let phi_conj = phi.mapv(|x_| x_.conj());
        let comm = self.accumulate_commutators(gb, &phi_conj);
        let sandwich = gb.casimir_sandwich(x);
        let lead = (nn - 1.0) / d as f64;
        let mut out = Array2::<C64>::zeros((d, d));
        for p in 0..d {
            for q in 0..d {
                out[[p, q]] = lead * x[[p, q]] - sandwich[[p, q]] - 0.5 * comm[[p, q]];
            }
        }
        linalg::hermitize(&mut out);
        out
    }
}

/// G'[(ij),(nm)] = Tr[gamma^{ij} gamma_bar^{nm}] and the optical residual
/// R = 1 - ||G'||_F^2 / (N^2 - 1).
fn compute_overlaps(gb: &GammaBasis, wt: &[Array2<C64>]) -> (Array2<C64>, f64) {
    let n_modes = gb.modes();
    let nn = n_modes * n_modes;
    let d = gb.space.dim();
    let mut gp = Array2::<C64>::zeros((nn, nn));
    let mut ladder_traces = vec![0.0f64; n_modes];
    for i in 0..n_modes {
        for &(_, _, v_sq) in gb.ladder(i, i).entries() {
            // diagonal ladder entries hold the occupation number itself
            ladder_traces[i] += v_sq;
        }
    }
    let mut w_traces = Array2::<C64>::zeros((n_modes, n_modes));
    for n in 0..n_modes {
        for m in 0..n_modes {
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in wt[n].iter().zip(wt[m].iter()) {
                acc += a.conj() * b;
            }
            w_traces[[n, m]] = acc;
        }
    }
    let inv_s2 = 1.0 / (gb.s * gb.s);
    for n in 0..n_modes {
        for m in n..n_modes {
            for i in 0..n_modes {
                for j in 0..n_modes {
                    // Tr(g^{ij} W_n^dagger W_m) = sum_q v_q (W_n^dagger W_m)[q, p(q)]
                    let ladder = gb.ladder(i, j);
                    let mut acc = C64::new(0.0, 0.0);
                    for &(p, q, v) in ladder.entries() {
                        let mut dot = C64::new(0.0, 0.0);
                        for (a, b) in wt[n].row(q).iter().zip(wt[m].row(p).iter()) {
                            dot += a.conj() * b;
                        }
                        acc += v * dot;
                    }
                    if i == j {
                        acc -= C64::new(gb.c, 0.0) * w_traces[[n, m]];
                        if n == m {
                            acc -= C64::new(gb.c * ladder_traces[i], 0.0);
                            acc += C64::new(gb.c * gb.c * d as f64, 0.0);
                        }
                    }
                    gp[[i * n_modes + j, n * n_modes + m]] = acc * inv_s2;
                }
            }
        }
    }
    // G'[(ij),(mn)] = conj(G'[(ji),(nm)])
    for n in 0..n_modes {
        for m in 0..n {
            for i in 0..n_modes {
                for j in 0..n_modes {
                    let v = gp[[j * n_modes + i, m * n_modes + n]];
                    gp[[i * n_modes + j, n * n_modes + m]] = v.conj();
                }
            }
        }
    }
    let frob: f64 = gp.iter().map(|x| x.norm_sqr()).sum();
    let r = 1.0 - frob / (nn as f64 - 1.0);
    (gp, r)
}

/// Optical residual R and the overlap matrix at U.
pub fn optical_residual(u: &FockUnitary, gb: &GammaBasis) -> (f64, Array2<C64>) {
    let frame = RotatedFrame::build(u, gb);
    (frame.residual, frame.overlaps)
}

/// Residual matrices R^{nm}: the component of each rotated gamma outside the
/// bare span. sum ||R^{nm}||_F^2 = (N^2 - 1) R.
pub fn residual_vector(u: &FockUnitary, gb: &GammaBasis) -> Vec<Array2<C64>> {
    let frame = RotatedFrame::build(u, gb);
    let n_modes = gb.modes();
    let d = gb.space.dim();
    let mut out = Vec::with_capacity(n_modes * n_modes);
    for n in 0..n_modes {
        for m in 0..n_modes {
            let mut r = frame.gamma_bar(gb, n, m);
            // subtract the projection sum_ij gamma^{ij} G'[(ji),(nm)]
            for i in 0..n_modes {
                for j in 0..n_modes {
                    let coeff = frame.overlaps[[j * n_modes + i, n * n_modes + m]];
                    if coeff.norm_sqr() == 0.0 {
                        continue;
                    }
                    let ladder = gb.ladder(i, j);
                    for &(p, q, v) in ladder.entries() {
                        r[[p, q]] -= coeff * v / gb.s;
                    }
                    if i == j {
                        let shift = coeff * gb.c / gb.s;
                        for p in 0..d {
                            r[[p, p]] += shift;
                        }
                    }
                }
            }
            out.push(r);
        }
    }
    out
}

/// Spec-level entry point for the Gauss-Newton operator.
pub fn gauss_newton_apply(gb: &GammaBasis, frame: &RotatedFrame, x: &Array2<C64>) -> Array2<C64> {
    frame.gauss_newton_apply(gb, x)
}

/// Extract the scattering matrix realizing a feasible U.
///
/// Builds G^{(nm),(ij)} = Tr[gamma^{ij} gamma_bar^{mn}] + delta^{nm} delta^{ij}/N,
/// which at feasible points equals S_{ni} S*_{mj}; reshaped over (n,i)(m,j)
/// it is the rank-1 Hermitian form vec(S) vec(S)^dagger. The dominant
/// eigenvector gives S up to a global phase, fixed so that S[0,0] (or the
/// first non-small entry when S[0,0] vanishes) is real nonnegative. Returns
/// the matrix and whether the default S[0,0] anchor was usable.
pub fn extract_scattering(u: &FockUnitary, gb: &GammaBasis) -> Result<(ScatteringMatrix, bool)> {
    let tol_r = 1e-8;
    let frame = RotatedFrame::build(u, gb);
    if frame.residual > tol_r {
        return Err(CoreError::InfeasibleInput {
            residual: frame.residual,
            tolerance: tol_r,
        });
    }
    let n_modes = gb.modes();
    let nn = n_modes * n_modes;
    let mut big = Array2::<C64>::zeros((nn, nn));
    for n in 0..n_modes {
        for m in 0..n_modes {
            for i in 0..n_modes {
                for j in 0..n_modes {
                    let mut v = frame.overlaps[[i * n_modes + j, m * n_modes + n]];
                    if n == m && i == j {
                        v += C64::new(1.0 / n_modes as f64, 0.0);
                    }
                    big[[n * n_modes + i, m * n_modes + j]] = v;
                }
            }
        }
    }
    let (lambda, w) = linalg::power_dominant(&big, 500);
    // rank-1 closure check
    let mut resid = 0.0f64;
    let mut total = 0.0f64;
    for p in 0..nn {
        for q in 0..nn {
            let model = lambda * w[p] * w[q].conj();
            resid += (big[[p, q]] - model).norm_sqr();
            total += big[[p, q]].norm_sqr();
        }
    }
    let rel = (resid / total.max(1e-300)).sqrt();
    if rel > 1e-6 {
        return Err(CoreError::ExtractionFailed(format!(
            "rank-1 factorization residual {rel:.3e} exceeds 1e-6"
        )));
    }
    let scale = lambda.sqrt();
    let mut s_raw = Array2::<C64>::zeros((n_modes, n_modes));
    for n in 0..n_modes {
        for i in 0..n_modes {
            s_raw[[n, i]] = w[n * n_modes + i] * scale;
        }
    }
    // global phase gauge
    let max_mag = s_raw.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut anchor = s_raw[[0, 0]];
    let mut anchored_default = true;
    if anchor.norm() <= 1e-6 * max_mag {
        anchored_default = false;
        anchor = *s_raw
            .iter()
            .find(|x| x.norm() > 1e-6 * max_mag)
            .expect("a unitary matrix has nonzero entries");
    }
    let phase = anchor.conj() / anchor.norm();
    s_raw.mapv_inplace(|x| x * phase);
    // polish to the nearest unitary (Newton iteration for the polar factor)
    for _ in 0..12 {
        let defect = linalg::unitarity_defect(&s_raw.view());
        if defect < 1e-13 {
            break;
        }
        let sd = linalg::dagger(&s_raw.view());
        let lu = Lu::factor(&sd).ok_or_else(|| {
            CoreError::ExtractionFailed("singular factor while polishing unitarity".into())
        })?;
        let mut inv = Array2::<C64>::eye(n_modes);
        lu.solve_in_place(&mut inv);
        for p in 0..n_modes {
            for q in 0..n_modes {
                s_raw[[p, q]] = 0.5 * (s_raw[[p, q]] + inv[[p, q]]);
            }
        }
    }
    let s = ScatteringMatrix::new(s_raw)
        .map_err(|e| CoreError::ExtractionFailed(format!("polished matrix not unitary: {e}")))?;
    // round trip: lift(S) must match U up to a global Fock-space phase
    let lifted = lift_unitary(&s, gb.space())?;
    let mut best = 0.0f64;
    let mut ratio = C64::new(1.0, 0.0);
    for (a, b) in lifted.matrix().iter().zip(u.matrix().iter()) {
        if b.norm() > best {
            best = b.norm();
            ratio = a / b;
        }
    }
    let phase = ratio / ratio.norm();
    let mut worst = 0.0f64;
    for (a, b) in lifted.matrix().iter().zip(u.matrix().iter()) {
        worst = worst.max((a - b * phase).norm());
    }
    if worst > 1e-6 {
        return Err(CoreError::ExtractionFailed(format!(
            "lifted scattering matrix deviates from U by {worst:.3e}"
        )));
    }
    Ok((s, anchored_default))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herald::{initial_feasible_unitary, HeraldingProblem};
    use crate::linalg::{haar_unitary, max_abs_diff, random_hermitian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feasible_u(space: &Arc<FockSpace>, rng: &mut ChaCha8Rng) -> FockUnitary {
        let s = ScatteringMatrix::new(haar_unitary(rng, space.modes())).unwrap();
        lift_unitary(&s, space).unwrap()
    }

    #[test]
    fn k_constant_matches_formula() {
        // (N, n) = (4, 3): K = 3 * 7 * 20 / (2 * 4 * 5) = 10.5
        let sp = Arc::new(enumerate_basis(4, 3, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        assert!((gb.k_const() - 10.5).abs() < 1e-14);
    }

    #[test]
    fn gamma_21_matches_hand_computation() {
        // (N, n) = (2, 1): K = 1*3*2/(2*2*3) = 0.5, sqrt(2K) = 1,
        // gamma^{00} = diag(1,0) - diag(1/2,1/2) = diag(1/2, -1/2).
        let sp = Arc::new(enumerate_basis(2, 1, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let g00 = gb.gamma_dense(0, 0);
        assert!((g00[[0, 0]] - C64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((g00[[1, 1]] - C64::new(-0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn trace_and_commutator_identities_small_grid() {
        for (n_modes, n_phot) in [(2usize, 1usize), (2, 3), (3, 2), (4, 2)] {
            let sp = Arc::new(enumerate_basis(n_modes, n_phot, None).unwrap());
            let gb = build_gamma(&sp).unwrap();
            let dense: Vec<Vec<Array2<C64>>> = (0..n_modes)
                .map(|i| (0..n_modes).map(|j| gb.gamma_dense(i, j)).collect())
                .collect();
            for i in 0..n_modes {
                for j in 0..n_modes {
                    let tr: C64 = (0..sp.dim()).map(|p| dense[i][j][[p, p]]).sum();
                    assert!(tr.norm() < 1e-12, "gamma^{{{i}{j}}} not traceless");
                    for n in 0..n_modes {
                        for m in 0..n_modes {
                            let prod = linalg::matmul(&dense[i][j].view(), &dense[n][m].view());
                            let tr: C64 = (0..sp.dim()).map(|p| prod[[p, p]]).sum();
                            let expect = gb.bare_overlap(i, j, n, m);
                            assert!(
                                (tr - C64::new(expect, 0.0)).norm() < 1e-12,
                                "trace identity failed at ({i}{j},{n}{m})"
                            );
                            // sqrt(2K) [g^{ij}, g^{nm}] = d_{jn} g^{im} - d_{im} g^{nj}
                            let mut comm = prod;
                            let back = linalg::matmul(&dense[n][m].view(), &dense[i][j].view());
                            comm.scaled_add(C64::new(-1.0, 0.0), &back);
                            comm.mapv_inplace(|x| x * gb.norm_factor());
                            let mut expect_m = Array2::<C64>::zeros((sp.dim(), sp.dim()));
                            if j == n {
                                expect_m.scaled_add(C64::new(1.0, 0.0), &dense[i][m]);
                            }
                            if i == m {
                                expect_m.scaled_add(C64::new(-1.0, 0.0), &dense[n][j]);
                            }
                            assert!(
                                max_abs_diff(&comm, &expect_m) < 1e-12,
                                "commutator identity failed at ({i}{j},{n}{m})"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_bar_matches_dense_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let m = haar_unitary(&mut rng, sp.dim());
        let u = FockUnitary::new(m, Arc::clone(&sp)).unwrap();
        let frame = RotatedFrame::build(&u, &gb);
        for n in 0..3 {
            for mm in 0..3 {
                let gbar = frame.gamma_bar(&gb, n, mm);
                let dense = gb.gamma_dense(n, mm);
                let ud = linalg::dagger(&u.matrix().view());
                let tmp = linalg::matmul(&ud.view(), &dense.view());
                let expect = linalg::matmul(&tmp.view(), &u.matrix().view());
                assert!(max_abs_diff(&gbar, &expect) < 1e-12);
            }
        }
    }

    #[test]
    fn overlaps_match_dense_traces_and_r_vanishes_at_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let m = haar_unitary(&mut rng, sp.dim());
        let u = FockUnitary::new(m, Arc::clone(&sp)).unwrap();
        let frame = RotatedFrame::build(&u, &gb);
        for i in 0..3 {
            for j in 0..3 {
                for n in 0..3 {
                    for mm in 0..3 {
                        let gbar = frame.gamma_bar(&gb, n, mm);
                        let prod = linalg::matmul(&gb.gamma_dense(i, j).view(), &gbar.view());
                        let tr: C64 = (0..sp.dim()).map(|p| prod[[p, p]]).sum();
                        assert!(
                            (tr - frame.overlaps()[[i * 3 + j, n * 3 + mm]]).norm() < 1e-11,
                            "overlap mismatch at ({i}{j},{n}{mm})"
                        );
                    }
                }
            }
        }
        let uf = feasible_u(&sp, &mut rng);
        let (r, _) = optical_residual(&uf, &gb);
        assert!(r.abs() <= 1e-12, "feasible residual {r:.3e}");
        let id = FockUnitary::identity(Arc::clone(&sp));
        let (r_id, _) = optical_residual(&id, &gb);
        assert!(r_id.abs() <= 1e-12);
    }

    #[test]
    fn haar_unitaries_are_infeasible() {
        // N_st > N^2 so generic unitaries cannot be lifts.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = Arc::new(enumerate_basis(4, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let mut min_r = f64::INFINITY;
        for _ in 0..20 {
            let m = haar_unitary(&mut rng, sp.dim());
            let u = FockUnitary::new(m, Arc::clone(&sp)).unwrap();
            let (r, _) = optical_residual(&u, &gb);
            min_r = min_r.min(r);
        }
        assert!(min_r > 0.1, "Haar floor {min_r:.3e}");
    }

    #[test]
    fn residual_vector_norm_matches_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        for trial in 0..3 {
            let u = if trial == 0 {
                feasible_u(&sp, &mut rng)
            } else {
                FockUnitary::new(haar_unitary(&mut rng, sp.dim()), Arc::clone(&sp)).unwrap()
            };
            let (r, _) = optical_residual(&u, &gb);
            let rs = residual_vector(&u, &gb);
            let total: f64 = rs
                .iter()
                .map(|m| m.iter().map(|x| x.norm_sqr()).sum::<f64>())
                .sum();
            let nn = 9.0;
            assert!(
                (total - (nn - 1.0) * r).abs() < 1e-10 * (1.0 + total),
                "sum ||R^a||^2 = {total:.6e} vs (N^2-1) R = {:.6e}",
                (nn - 1.0) * r
            );
            if trial == 0 {
                assert!(rs.iter().all(|m| m.iter().all(|x| x.norm() < 1e-10)));
            }
        }
    }

    #[test]
    fn residual_scales_linearly_near_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let u0 = feasible_u(&sp, &mut rng);
        let x = random_hermitian(&mut rng, sp.dim());
        let mut norms = Vec::new();
        for &eps in &[1e-3, 1e-4, 1e-5] {
            let step = x.mapv(|v| v * eps);
            let rot = linalg::exp_i_hermitian(&step);
            let um = linalg::matmul(&u0.matrix().view(), &rot.view());
            let u = FockUnitary::new(um, Arc::clone(&sp)).unwrap();
            let rs = residual_vector(&u, &gb);
            let total: f64 = rs
                .iter()
                .map(|m| m.iter().map(|v| v.norm_sqr()).sum::<f64>())
                .sum();
            norms.push(total.sqrt());
        }
        // ||R^a|| = O(eps)
        let slope1 = norms[0] / norms[1];
        let slope2 = norms[1] / norms[2];
        assert!((slope1 - 10.0).abs() < 1.0, "slope {slope1}");
        assert!((slope2 - 10.0).abs() < 1.0, "slope {slope2}");
    }

    #[test]
    fn gauss_newton_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let u = FockUnitary::new(haar_unitary(&mut rng, sp.dim()), Arc::clone(&sp)).unwrap();
        let frame = RotatedFrame::build(&u, &gb);
        let x = random_hermitian(&mut rng, sp.dim());
        let fast = frame.gauss_newton_apply(&gb, &x);

        // dense reference, straight from the formula
        let d = sp.dim();
        let nn = 9usize;
        let ud = linalg::dagger(&u.matrix().view());
        let mut bars = Vec::new();
        let mut bares = Vec::new();
        for n in 0..3 {
            for m in 0..3 {
                let dense = gb.gamma_dense(n, m);
                let tmp = linalg::matmul(&ud.view(), &dense.view());
                bars.push(linalg::matmul(&tmp.view(), &u.matrix().view()));
                bares.push(dense);
            }
        }
        let mut expect = x.mapv(|v| v * ((nn as f64 - 1.0) / d as f64));
        for i in 0..3 {
            for j in 0..3 {
                let gij = &bares[i * 3 + j];
                let gji = &bares[j * 3 + i];
                let tmp = linalg::matmul(&gij.view(), &x.view());
                let prod = linalg::matmul(&tmp.view(), &gji.view());
                expect.scaled_add(C64::new(-1.0, 0.0), &prod);
            }
        }
        for a in 0..nn {
            for b in 0..nn {
                let fwd = linalg::matmul(&bars[a].view(), &bares[b].view());
                let bwd = linalg::matmul(&bares[b].view(), &bars[a].view());
                let mut comm = fwd;
                comm.scaled_add(C64::new(-1.0, 0.0), &bwd);
                let prod = linalg::matmul(&comm.view(), &x.view());
                let tr: C64 = (0..d).map(|p| prod[[p, p]]).sum();
                expect.scaled_add(C64::new(-0.5, 0.0) * tr.conj(), &comm);
            }
        }
        linalg::hermitize(&mut expect);
        assert!(
            max_abs_diff(&fast, &expect) < 1e-10,
            "GN mismatch {:.3e}",
            max_abs_diff(&fast, &expect)
        );
    }

    #[test]
    fn gauss_newton_is_self_adjoint_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let u = FockUnitary::new(haar_unitary(&mut rng, sp.dim()), Arc::clone(&sp)).unwrap();
        let frame = RotatedFrame::build(&u, &gb);
        let zero = Array2::<C64>::zeros((sp.dim(), sp.dim()));
        let out = frame.gauss_newton_apply(&gb, &zero);
        assert!(out.iter().all(|x| x.norm() == 0.0));
        for _ in 0..10 {
            let x = random_hermitian(&mut rng, sp.dim());
            let y = random_hermitian(&mut rng, sp.dim());
            let gx = frame.gauss_newton_apply(&gb, &x);
            let gy = frame.gauss_newton_apply(&gb, &y);
            let lhs = linalg::frob_inner(&y, &gx);
            let rhs = linalg::frob_inner(&gy, &x);
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
            let quad = linalg::frob_inner(&x, &gx);
            assert!(quad.re >= -1e-10, "not PSD: {quad}");
        }
    }

    #[test]
    fn grad_residual_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        for trial in 0..4 {
            let u = if trial % 2 == 0 {
                FockUnitary::new(haar_unitary(&mut rng, sp.dim()), Arc::clone(&sp)).unwrap()
            } else {
                let u0 = feasible_u(&sp, &mut rng);
                let x = random_hermitian(&mut rng, sp.dim()).mapv(|v| v * 0.05);
                let rot = linalg::exp_i_hermitian(&x);
                FockUnitary::new(
                    linalg::matmul(&u0.matrix().view(), &rot.view()),
                    Arc::clone(&sp),
                )
                .unwrap()
            };
            let frame = RotatedFrame::build(&u, &gb);
            let grad = frame.grad_residual(&gb);
            let x = random_hermitian(&mut rng, sp.dim());
            let predicted = {
                let prod = linalg::matmul(&grad.view(), &x.view());
                (0..sp.dim()).map(|p| prod[[p, p]]).sum::<C64>().re
            };
            let eps = 1e-5;
            let r_at = |t: f64| {
                let rot = linalg::exp_i_hermitian(&x.mapv(|v| v * t));
                let um = linalg::matmul(&u.matrix().view(), &rot.view());
                let uu = FockUnitary::new(um, Arc::clone(&sp)).unwrap();
                optical_residual(&uu, &gb).0
            };
            let fd = (r_at(eps) - r_at(-eps)) / (2.0 * eps);
            assert!(
                (fd - predicted).abs() <= 1e-5 * fd.abs().max(1e-6),
                "gradient mismatch: fd {fd:.8e} vs analytic {predicted:.8e}"
            );
        }
    }

    #[test]
    fn tangent_assembly_matches_dense_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sp = Arc::new(enumerate_basis(3, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let u = FockUnitary::new(haar_unitary(&mut rng, sp.dim()), Arc::clone(&sp)).unwrap();
        let frame = RotatedFrame::build(&u, &gb);
        let mut alpha = Array2::<C64>::zeros((3, 3));
        for n in 0..3 {
            for m in 0..3 {
                alpha[[n, m]] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let ac = alpha.clone();
        for n in 0..3 {
            for m in 0..3 {
                alpha[[n, m]] = 0.5 * (ac[[n, m]] + ac[[m, n]].conj());
            }
        }
        let fast = frame.assemble_tangent(&gb, &alpha);
        let mut expect = Array2::<C64>::zeros((sp.dim(), sp.dim()));
        for n in 0..3 {
            for m in 0..3 {
                expect.scaled_add(alpha[[n, m]], &frame.gamma_bar(&gb, n, m));
            }
        }
        assert!(max_abs_diff(&fast, &expect) < 1e-11);
        assert!(max_abs_diff(&fast, &linalg::dagger(&fast.view())) < 1e-11);
        for n in 0..3 {
            for m in 0..3 {
                let col = frame.gamma_bar_column0(&gb, n, m);
                let dense = frame.gamma_bar(&gb, n, m);
                for q in 0..sp.dim() {
                    assert!((col[q] - dense[[q, 0]]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn residual_invariant_under_feasible_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let sp = Arc::new(enumerate_basis(3, 3, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let u = FockUnitary::new(haar_unitary(&mut rng, sp.dim()), Arc::clone(&sp)).unwrap();
        let v = feasible_u(&sp, &mut rng);
        let w = feasible_u(&sp, &mut rng);
        let (r0, _) = optical_residual(&u, &gb);
        let vu = linalg::matmul(&v.matrix().view(), &u.matrix().view());
        let vuw = linalg::matmul(&vu.view(), &w.matrix().view());
        let u2 = FockUnitary::new(vuw, Arc::clone(&sp)).unwrap();
        let (r1, _) = optical_residual(&u2, &gb);
        assert!((r0 - r1).abs() < 1e-10, "R not invariant: {r0} vs {r1}");
    }

    #[test]
    fn g_matrix_unitary_at_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sp = Arc::new(enumerate_basis(4, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let s = ScatteringMatrix::new(haar_unitary(&mut rng, 4)).unwrap();
        let u = lift_unitary(&s, &sp).unwrap();
        let frame = RotatedFrame::build(&u, &gb);
        let n_modes = 4usize;
        let nn = n_modes * n_modes;
        let mut g = Array2::<C64>::zeros((nn, nn));
        for n in 0..n_modes {
            for m in 0..n_modes {
                for i in 0..n_modes {
                    for j in 0..n_modes {
                        let mut v = frame.overlaps()[[i * n_modes + j, m * n_modes + n]];
                        if n == m && i == j {
                            v += C64::new(1.0 / n_modes as f64, 0.0);
                        }
                        g[[n * n_modes + m, i * n_modes + j]] = v;
                    }
                }
            }
        }
        assert!(linalg::unitarity_defect(&g.view()) < 1e-8);
        // and G equals S_{ni} S*_{mj}
        for n in 0..n_modes {
            for m in 0..n_modes {
                for i in 0..n_modes {
                    for j in 0..n_modes {
                        let expect = s.matrix()[[n, i]] * s.matrix()[[m, j]].conj();
                        let got = g[[n * n_modes + m, i * n_modes + j]];
                        assert!((got - expect).norm() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn extraction_round_trips_random_scatterings() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for (n_modes, n_phot) in [(2usize, 2usize), (3, 2), (4, 3)] {
            let sp = Arc::new(enumerate_basis(n_modes, n_phot, None).unwrap());
            let gb = build_gamma(&sp).unwrap();
            let s0 = ScatteringMatrix::new(haar_unitary(&mut rng, n_modes)).unwrap();
            let u = lift_unitary(&s0, &sp).unwrap();
            let (s1, _) = extract_scattering(&u, &gb).unwrap();
            let mut best = 0.0f64;
            let mut ratio = C64::new(1.0, 0.0);
            for (a, b) in s1.matrix().iter().zip(s0.matrix().iter()) {
                if b.norm() > best {
                    best = b.norm();
                    ratio = a / b;
                }
            }
            let phase = ratio / ratio.norm();
            let mut worst = 0.0f64;
            for (a, b) in s1.matrix().iter().zip(s0.matrix().iter()) {
                worst = worst.max((a - b * phase).norm());
            }
            assert!(worst < 1e-8, "round trip off by {worst:.3e}");
        }
    }

    #[test]
    fn extraction_rejects_infeasible_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let sp = Arc::new(enumerate_basis(4, 2, None).unwrap());
        let gb = build_gamma(&sp).unwrap();
        let u = FockUnitary::new(haar_unitary(&mut rng, sp.dim()), Arc::clone(&sp)).unwrap();
        match extract_scattering(&u, &gb) {
            Err(CoreError::InfeasibleInput { .. }) => {}
            other => panic!("expected infeasible-input error, got {other:?}"),
        }
    }

    #[test]
    fn frame_respects_problem_pinned_basis() {
        let prob = HeraldingProblem::new(
            4,
            3,
            &[1, 1, 1, 0],
            &[1],
            &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
        )
        .unwrap();
        let gb = build_gamma(prob.space()).unwrap();
        let u = initial_feasible_unitary(&prob, 3);
        let (r, _) = optical_residual(&u, &gb);
        assert!(r > 1e-3, "random feasible-fidelity start should be optically infeasible");
        let id = FockUnitary::identity(Arc::clone(prob.space()));
        let (r_id, _) = optical_residual(&id, &gb);
        assert!(r_id.abs() <= 1e-12);
    }
}
