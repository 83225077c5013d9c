//! Normal and tangent step construction.

use crate::feasibility::{GammaBasis, RotatedFrame};
use crate::herald::{FidelityFrame, OmegaOp, UpdateStep};
use crate::linalg;
use crate::C64;
use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SolverConfig;

fn frob_re_inner(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x.conj() * y).re)
        .sum()
}

/// Gauss-Newton normal step: CG on Pi (J^dagger J) Pi X = -Pi J^dagger R^a,
/// restricted to the fidelity-tangent subspace by projecting around every
/// operator application. The right-hand side is -((N^2-1)/4) Pi grad R,
/// matching the normalization of the Gauss-Newton operator.
pub(super) fn normal_step(
    gb: &GammaBasis,
    frame_r: &RotatedFrame,
    frame_f: &FidelityFrame,
    grad_r: &Array2<C64>,
    cfg: &SolverConfig,
    d: usize,
    tol_scale: f64,
) -> (Array2<C64>, usize) {
    let nn = (gb.modes() * gb.modes()) as f64;
    let mut b = grad_r.mapv(|x| x * (-(nn - 1.0) / 4.0));
    frame_f.project_tangent_inplace(&mut b);
    let b_norm = linalg::frob_norm(&b);
    if b_norm < 1e-16 {
        return (Array2::zeros((d, d)), 0);
    }
    let tol = cfg.cg_tolerance(frame_r.residual()) * tol_scale;
    let max_iters = cfg.cg_cap(d);
    let apply = |x: &Array2<C64>| -> Array2<C64> {
        let mut v = x.clone();
        frame_f.project_tangent_inplace(&mut v);
        let mut out = frame_r.gauss_newton_apply(gb, &v);
        frame_f.project_tangent_inplace(&mut out);
        out
    };
    let mut x = Array2::<C64>::zeros((d, d));
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs_old = frob_re_inner(&r, &r);
    let mut iters = 0usize;
    for _ in 0..max_iters {
        iters += 1;
        let ap = apply(&p);
        let curvature = frob_re_inner(&p, &ap);
        if curvature <= 1e-14 * rs_old.max(1e-300) {
            // non-positive curvature beyond roundoff: keep the best iterate
            break;
        }
        let alpha = rs_old / curvature;
        x.scaled_add(C64::new(alpha, 0.0), &p);
        r.scaled_add(C64::new(-alpha, 0.0), &ap);
        let rs_new = frob_re_inner(&r, &r);
        if rs_new.sqrt() <= tol * b_norm {
            break;
        }
        let beta = rs_new / rs_old;
        let mut p_next = r.clone();
        p_next.scaled_add(C64::new(beta, 0.0), &p);
        p = p_next;
        rs_old = rs_new;
    }
    frame_f.project_tangent_inplace(&mut x);
    (x, iters)
}

/// Real parameterization of Hermitian alpha-coefficient matrices: modes are
/// (i,i) diagonal entries, then (Re, Im) pairs for i < j.
fn alpha_basis_matrix(n_modes: usize, k: usize) -> Array2<C64> {
    let mut alpha = Array2::<C64>::zeros((n_modes, n_modes));
    if k < n_modes {
        alpha[[k, k]] = C64::new(1.0, 0.0);
        return alpha;
    }
    let mut idx = n_modes;
    for i in 0..n_modes {
        for j in (i + 1)..n_modes {
            if idx == k {
                alpha[[i, j]] = C64::new(1.0, 0.0);
                alpha[[j, i]] = C64::new(1.0, 0.0);
                return alpha;
            }
            if idx + 1 == k {
                alpha[[i, j]] = C64::new(0.0, 1.0);
                alpha[[j, i]] = C64::new(0.0, -1.0);
                return alpha;
            }
            idx += 2;
        }
    }
    unreachable!("alpha index out of range")
}

/// Tangent step: the ascent direction of |z|^2 inside the subspace of
/// H = alpha_{ij} gamma_bar^{ij} that also satisfies the fidelity-tangent
/// constraint (1 - Pi) H = 0, solved in closed form as a metric-weighted
/// projected gradient and capped at unit Frobenius norm.
///
/// Returns the step and the dimension of the admissible subspace (numerical
/// rank at threshold 1e-8, with directions that generate no motion removed).
pub(super) fn tangent_step(
    gb: &GammaBasis,
    frame_r: &RotatedFrame,
    frame_f: &FidelityFrame,
    _r: f64,
) -> (Array2<C64>, usize) {
    let d = gb.space().dim();
    let n_modes = gb.modes();
    let nn = n_modes * n_modes;
    // First columns (rows 1..d) of all gamma_bar^{nm}.
    let mut cols0 = Vec::with_capacity(nn);
    for n in 0..n_modes {
        for m in 0..n_modes {
            let col = frame_r.gamma_bar_column0(gb, n, m);
            cols0.push(Array1::from_iter(col.iter().skip(1).cloned()));
        }
    }
    // t_k for each real alpha-basis direction (at most two nonzero coeffs).
    let mut t_vecs: Vec<Array1<C64>> = Vec::with_capacity(nn);
    for k in 0..nn {
        let alpha = alpha_basis_matrix(n_modes, k);
        let mut t = Array1::<C64>::zeros(d - 1);
        for n in 0..n_modes {
            for m in 0..n_modes {
                let a = alpha[[n, m]];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for (o, v) in t.iter_mut().zip(cols0[n * n_modes + m].iter()) {
                    *o += a * v;
                }
            }
        }
        t_vecs.push(t);
    }
    // Constraint rows: an orthonormal basis of V with the h-line removed.
    let forbidden = forbidden_directions(frame_f, d);
    let n_con = forbidden.ncols();
    // Real constraint matrix C (2 n_con x nn).
    let mut c = Array2::<f64>::zeros((2 * n_con, nn));
    for (k, t) in t_vecs.iter().enumerate() {
        for l in 0..n_con {
            let dot: C64 = forbidden
                .column(l)
                .iter()
                .zip(t.iter())
                .map(|(w, x)| w.conj() * x)
                .sum();
            c[[2 * l, k]] = dot.re;
            c[[2 * l + 1, k]] = dot.im;
        }
    }
    // Nullspace of C through the spectral decomposition of C^T C.
    let mut ctc = Array2::<C64>::zeros((nn, nn));
    for a in 0..nn {
        for b in 0..nn {
            let mut acc = 0.0;
            for row in 0..2 * n_con {
                acc += c[[row, a]] * c[[row, b]];
            }
            ctc[[a, b]] = C64::new(acc, 0.0);
        }
    }
    let (vals, vecs) = linalg::eigh(&ctc);
    let sigma_max = vals.iter().cloned().fold(0.0f64, f64::max).sqrt().max(1.0);
    let rank_tol = 1e-8 * sigma_max;
    let null_idx: Vec<usize> = (0..nn)
        .filter(|&k| vals[k].max(0.0).sqrt() <= rank_tol)
        .collect();
    if null_idx.is_empty() {
        return (Array2::zeros((d, d)), 0);
    }
    let n_null = null_idx.len();
    // Z: nn x n_null real matrix of admissible alpha directions.
    let mut z_basis = Array2::<f64>::zeros((nn, n_null));
    for (col, &k) in null_idx.iter().enumerate() {
        for row in 0..nn {
            z_basis[[row, col]] = vecs[[row, k]].re;
        }
    }
    // Objective: the overlap of the step's first column with the h-mode,
    // Re<h_hat, t(u)>. Its constrained maximizer is the steepest-ascent
    // direction of |z|^2 on the feasible set, but the magnitude stays O(1)
    // at small |z| (where the success rate grows at second order), so
    // transient near-zero amplitudes do not masquerade as converged points.
    //
    // At |z| ~ 0 the phase convention of h is noise and |z| grows along any
    // overlap quadrature, so both Re and Im parts are kept as candidate
    // objectives there.
    if frame_f.h_norm_sqr < 1e-30 {
        return (Array2::zeros((d, d)), 0);
    }
    let h_norm = frame_f.h_norm_sqr.sqrt();
    let degenerate_z = frame_f.z.norm() < 1e-6;
    let mut g = vec![0.0f64; nn];
    let mut g_im = vec![0.0f64; nn];
    for (k, t) in t_vecs.iter().enumerate() {
        let dot: C64 = frame_f
            .h
            .iter()
            .zip(t.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        g[k] = dot.re / h_norm;
        g_im[k] = dot.im / h_norm;
    }
    // Metric M_kl = Tr(H_k H_l) from the invariant Gram of the gamma basis.
    let mut metric = Array2::<f64>::zeros((nn, nn));
    let alphas: Vec<Array2<C64>> = (0..nn).map(|k| alpha_basis_matrix(n_modes, k)).collect();
    for k in 0..nn {
        for l in k..nn {
            let mut acc = C64::new(0.0, 0.0);
            let mut tr_k = C64::new(0.0, 0.0);
            let mut tr_l = C64::new(0.0, 0.0);
            for n in 0..n_modes {
                tr_k += alphas[k][[n, n]];
                tr_l += alphas[l][[n, n]];
                for m in 0..n_modes {
                    acc += alphas[k][[n, m]] * alphas[l][[m, n]];
                }
            }
            let val = (acc - tr_k * tr_l / n_modes as f64).re;
            metric[[k, l]] = val;
            metric[[l, k]] = val;
        }
    }
    // Reduced system on the nullspace: maximize g^T v - 1/2 v^T (Z^T M Z) v.
    let mut zmz = Array2::<C64>::zeros((n_null, n_null));
    for a in 0..n_null {
        for b in 0..n_null {
            let mut acc = 0.0;
            for row in 0..nn {
                let mut inner = 0.0;
                for col in 0..nn {
                    inner += metric[[row, col]] * z_basis[[col, b]];
                }
                acc += z_basis[[row, a]] * inner;
            }
            zmz[[a, b]] = C64::new(acc, 0.0);
        }
    }
    let (mvals, mvecs) = linalg::eigh(&zmz);
    let m_max = mvals.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let m_tol = 1e-12 * m_max;
    // Degrees of freedom: admissible directions that actually move U.
    let n_dof = mvals.iter().filter(|&&v| v > 1e-8 * m_max).count();
    // v = pinv(Z^T M Z) Z^T g
    let pinv_solve = |zg: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0f64; n_null];
        for k in 0..n_null {
            if mvals[k] <= m_tol {
                continue;
            }
            let mut proj = 0.0;
            for row in 0..n_null {
                proj += mvecs[[row, k]].re * zg[row];
            }
            let scale = proj / mvals[k];
            for row in 0..n_null {
                v[row] += scale * mvecs[[row, k]].re;
            }
        }
        v
    };
    let project = |g_full: &[f64]| -> Vec<f64> {
        let mut zg = vec![0.0f64; n_null];
        for (a, out) in zg.iter_mut().enumerate() {
            for row in 0..nn {
                *out += z_basis[[row, a]] * g_full[row];
            }
        }
        zg
    };
    let zg = project(&g);
    let v = if !degenerate_z {
        pinv_solve(&zg)
    } else {
        // 2x2 eigenproblem over the (Re, Im) overlap quadratures.
        let zg_im = project(&g_im);
        let v_re = pinv_solve(&zg);
        let v_im = pinv_solve(&zg_im);
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b.iter()).map(|(x, y)| x * y).sum() };
        let a = dot(&zg, &v_re);
        let b = dot(&zg, &v_im);
        let c = dot(&zg_im, &v_im);
        let half_gap = 0.5 * (a - c);
        let lam = 0.5 * (a + c) + (half_gap * half_gap + b * b).sqrt();
        let (wa, wb) = if b.abs() > 1e-300 {
            (b, lam - a)
        } else if a >= c {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let wn = (wa * wa + wb * wb).sqrt().max(1e-300);
        v_re.iter()
            .zip(v_im.iter())
            .map(|(x, y)| (wa * x + wb * y) / wn)
            .collect()
    };
    // alpha = Z v, assembled into the tangent matrix.
    let mut alpha_total = Array2::<C64>::zeros((n_modes, n_modes));
    for (col, vv) in v.iter().enumerate() {
        if *vv == 0.0 {
            continue;
        }
        for row in 0..nn {
            let w = z_basis[[row, col]] * vv;
            if w == 0.0 {
                continue;
            }
            alpha_total.scaled_add(C64::new(w, 0.0), &alphas[row]);
        }
    }
    let mut h_t = frame_r.assemble_tangent(gb, &alpha_total);
    linalg::hermitize(&mut h_t);
    // The nullspace was found at a finite rank threshold; make the
    // fidelity-tangency exact so large swings cannot leak constraint error.
    frame_f.project_tangent_inplace(&mut h_t);
    let grad_norm = linalg::frob_norm(&h_t);
    if grad_norm < 1e-14 {
        return (Array2::zeros((d, d)), n_dof);
    }
    // Single-argument maximization of |z| along this direction: the
    // first-column block rotates by theta = tau |t|, and only the h-aligned
    // fraction kappa/|t| feeds the amplitude, so the model
    // |z(theta)| = |z| cos(theta) + |h| (kappa/|t|) sin(theta)
    // peaks at theta* = atan2(|h| kappa, |z| |t|). The step is scaled to
    // that maximizer and trust-capped at unit Frobenius norm; its length
    // vanishes with the projected gradient, which is the termination signal.
    let t_raw: Vec<C64> = (1..d).map(|q| h_t[[q, 0]]).collect();
    let t_norm = t_raw.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if t_norm < 1e-14 {
        return (Array2::zeros((d, d)), n_dof);
    }
    let h_dot: C64 = frame_f
        .h
        .iter()
        .zip(t_raw.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let kappa = if degenerate_z {
        let k = h_dot.norm() / h_norm;
        if k < 1e-6 {
            // the component carries no usable overlap with the success mode:
            // |z|^2 is locally identically zero and there is nothing to climb
            return (Array2::zeros((d, d)), n_dof);
        }
        k
    } else {
        (h_dot.re / h_norm).max(0.0)
    };
    let zmag = frame_f.z.norm();
    let theta_star = (h_norm * kappa).atan2(zmag * t_norm);
    let mut step_len = theta_star / t_norm * grad_norm; // per unit direction
    if step_len > 1.0 {
        step_len = 1.0;
    }
    let scale = step_len / grad_norm;
    h_t.mapv_inplace(|x| x * scale);
    (h_t, n_dof)
}

/// Orthonormal basis of V with the h-line removed: the forbidden directions
/// of the first-column block (components along these must vanish for a
/// tangent direction).
fn forbidden_directions(frame_f: &FidelityFrame, d: usize) -> Array2<C64> {
    let has_h = frame_f.h_norm_sqr >= 1e-30;
    let extra = usize::from(has_h);
    let mut stack = Array2::<C64>::zeros((d - 1, extra + frame_f.v_basis.ncols()));
    if has_h {
        let hn = frame_f.h_norm_sqr.sqrt();
        for (o, hv) in stack.column_mut(0).iter_mut().zip(frame_f.h.iter()) {
            *o = hv / hn;
        }
    }
    for c in 0..frame_f.v_basis.ncols() {
        stack
            .column_mut(extra + c)
            .assign(&frame_f.v_basis.column(c));
    }
    let rank = linalg::mgs_orthonormalize(&mut stack, 1e-10);
    // drop the leading h-direction itself; the rest spans V minus the h-line
    stack.slice(s![.., extra..rank]).to_owned()
}

/// Scale the Hermitian step pieces by tau and package them for the update.
pub(super) fn assemble_step(
    t_col: &Array1<C64>,
    phi: f64,
    omega: &Array2<C64>,
    lanczos: Option<&(Array2<C64>, Array2<C64>)>,
    tau: f64,
) -> UpdateStep {
    let omega_op = match lanczos {
        Some((q, t)) => OmegaOp::LowRank {
            q: q.clone(),
            t: t.mapv(|x| x * tau),
        },
        None => OmegaOp::Cayley {
            omega: omega.mapv(|x| x * tau),
        },
    };
    UpdateStep {
        t_column: t_col.mapv(|x| x * tau),
        phi: phi * tau,
        omega: omega_op,
    }
}

/// Lanczos tridiagonalization of a Hermitian matrix from a seeded random
/// start, with full reorthogonalization. Returns (Q, T) with Q orthonormal
/// (k x r) and T real-symmetric tridiagonal (r x r), omega ~ Q T Q^dagger.
pub(super) fn lanczos_basis(
    omega: &Array2<C64>,
    rank: usize,
    seed: u64,
) -> (Array2<C64>, Array2<C64>) {
    let k = omega.nrows();
    let r = rank.min(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c61_6e63);
    let start = linalg::random_gaussian(&mut rng, k, 1);
    let mut q = Array2::<C64>::zeros((k, r));
    let mut alphas = Vec::with_capacity(r);
    let mut betas = Vec::with_capacity(r.saturating_sub(1));
    let mut v: Array1<C64> = Array1::from_iter(start.column(0).iter().cloned());
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|x| x / norm);
    let mut actual = 0usize;
    for step in 0..r {
        q.column_mut(step).assign(&v);
        actual += 1;
        // w = omega v
        let mut w = Array1::<C64>::zeros(k);
        for p in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..k {
                acc += omega[[p, c]] * v[c];
            }
            w[p] = acc;
        }
        let alpha: f64 = w
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (b.conj() * a).re)
            .sum();
        alphas.push(alpha);
        if step + 1 == r {
            break;
        }
        // full reorthogonalization against all previous vectors
        for _ in 0..2 {
            for prev in 0..=step {
                let qp = q.column(prev);
                let proj: C64 = qp.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
                for (o, qv) in w.iter_mut().zip(qp.iter()) {
                    *o -= proj * qv;
                }
            }
        }
        let beta = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if beta < 1e-12 {
            break;
        }
        betas.push(beta);
        v = w.mapv(|x| x / beta);
    }
    let q = q.slice(s![.., 0..actual]).to_owned();
    let mut t = Array2::<C64>::zeros((actual, actual));
    for (i, &a) in alphas.iter().take(actual).enumerate() {
        t[[i, i]] = C64::new(a, 0.0);
    }
    for (i, &b) in betas.iter().take(actual.saturating_sub(1)).enumerate() {
        t[[i, i + 1]] = C64::new(b, 0.0);
        t[[i + 1, i]] = C64::new(b, 0.0);
    }
    (q, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::build_gamma;
    use crate::herald::{build_frame, initial_feasible_unitary, HeraldingProblem};
    use crate::linalg::random_hermitian;

    fn toy_problem() -> HeraldingProblem {
        HeraldingProblem::new(
            4,
            3,
            &[1, 1, 1, 0],
            &[1],
            &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
        )
        .unwrap()
    }

    #[test]
    fn alpha_basis_spans_hermitian_coefficients() {
        let n = 3;
        for k in 0..n * n {
            let a = alpha_basis_matrix(n, k);
            for p in 0..n {
                for q in 0..n {
                    assert!((a[[p, q]] - a[[q, p]].conj()).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn normal_step_lives_in_projected_subspace() {
        let prob = toy_problem();
        let gb = build_gamma(prob.space()).unwrap();
        let u = initial_feasible_unitary(&prob, 3);
        let frame_r = crate::feasibility::RotatedFrame::build(&u, &gb);
        let frame_f = build_frame(&u, &prob);
        let grad = frame_r.grad_residual(&gb);
        let cfg = SolverConfig::default();
        let (h_n, iters) = normal_step(&gb, &frame_r, &frame_f, &grad, &cfg, u.dim(), 1.0);
        assert!(iters > 0);
        // Pi-consistency: (1 - Pi) H_N = 0
        let mut projected = h_n.clone();
        frame_f.project_tangent_inplace(&mut projected);
        assert!(linalg::max_abs_diff(&projected, &h_n) < 1e-12);
        // Hermitian
        assert!(linalg::max_abs_diff(&h_n, &linalg::dagger(&h_n.view())) < 1e-12);
        // descent for R: <grad, H_N> < 0
        let prod = linalg::matmul(&grad.view(), &h_n.view());
        let slope: f64 = (0..u.dim()).map(|q| prod[[q, q]]).sum::<C64>().re;
        assert!(slope < 0.0, "normal step is not a descent direction");
    }

    #[test]
    fn tangent_step_respects_both_constraint_sets() {
        let prob = toy_problem();
        let gb = build_gamma(prob.space()).unwrap();
        // walk a couple of normal steps to get close enough to feasibility
        let cfg = SolverConfig {
            seed: 5,
            ..Default::default()
        };
        let res = super::super::optimize(&prob, &cfg).unwrap();
        let u = res.u_final;
        let frame_r = crate::feasibility::RotatedFrame::build(&u, &gb);
        let frame_f = build_frame(&u, &prob);
        let (h_t, n_dof) = tangent_step(&gb, &frame_r, &frame_f, frame_r.residual());
        if linalg::frob_norm(&h_t) == 0.0 {
            return; // converged to an isolated point; nothing to check
        }
        assert!(n_dof > 0);
        // (1 - Pi) H_T = 0
        let mut projected = h_t.clone();
        frame_f.project_tangent_inplace(&mut projected);
        assert!(linalg::max_abs_diff(&projected, &h_t) < 1e-10);
        // R invariance along the rotated span: R(U e^{i tau H_T}) = R(U)
        let r0 = frame_r.residual();
        for &tau in &[1e-2, 1e-3] {
            let rot = linalg::exp_i_hermitian(&h_t.mapv(|x| x * tau));
            let um = linalg::matmul(&u.matrix().view(), &rot.view());
            let u2 = crate::fock::FockUnitary::new(um, std::sync::Arc::clone(prob.space()))
                .unwrap();
            let (r1, _) = crate::feasibility::optical_residual(&u2, &gb);
            assert!(
                (r1 - r0).abs() <= 1e-10 + 1e-6 * tau * tau,
                "R moved by {:.3e} at tau = {tau}",
                (r1 - r0).abs()
            );
        }
    }

    #[test]
    fn lanczos_reproduces_small_hermitian_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let omega = random_hermitian(&mut rng, 12);
        let (q, t) = lanczos_basis(&omega, 12, 3);
        // full rank: Q T Q^dagger = omega on the Krylov space = everything
        assert_eq!(q.ncols(), 12);
        let qt = linalg::matmul(&q.view(), &t.view());
        let qd = linalg::dagger(&q.view());
        let recon = linalg::matmul(&qt.view(), &qd.view());
        assert!(linalg::max_abs_diff(&recon, &omega) < 1e-9);
        assert!(linalg::unitarity_defect(&q.view()) < 1e-12);
        // truncated basis stays orthonormal
        let (q4, t4) = lanczos_basis(&omega, 4, 3);
        assert_eq!(q4.ncols(), 4);
        assert_eq!(t4.nrows(), 4);
        let g = linalg::adjoint_matmul(&q4.view(), &q4.view());
        assert!(linalg::max_abs_diff(&g, &Array2::eye(4)) < 1e-12);
    }
}
