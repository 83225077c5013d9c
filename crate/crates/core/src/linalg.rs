//! Small dense complex linear algebra used by the rest of the crate.
//!
//! Everything here operates on `ndarray` arrays of `Complex<f64>` and is
//! self-contained: a GEMM wrapper around `matrixmultiply`, a cyclic Jacobi
//! eigensolver for Hermitian matrices, LU with partial pivoting, modified
//! Gram-Schmidt orthonormalization and the principal logarithm of a unitary
//! matrix. Problem sizes stay in the low hundreds, where these routines are
//! entirely adequate.

use crate::C64;
use matrixmultiply::{zgemm, CGemmOption};
use ndarray::{Array1, Array2, ArrayView2, Axis, CowArray, Ix2};
use rand::Rng;
use rand_distr::StandardNormal;

/// C = alpha * op(A) * op(B) + beta * C, where op is optional elementwise
/// conjugation (combine with `.t()` views for adjoints).
///
/// `matrixmultiply` has no conjugation flag, so conjugated operands are
/// materialized into scratch copies; hot paths keep pre-conjugated buffers
/// around instead of setting these flags.
pub fn gemm(
    alpha: C64,
    a: &ArrayView2<C64>,
    conj_a: bool,
    b: &ArrayView2<C64>,
    conj_b: bool,
    beta: C64,
    c: &mut Array2<C64>,
) {
    let (m, k) = a.dim();
    let (k2, n) = b.dim();
    assert_eq!(k, k2, "gemm inner dimension mismatch");
    assert_eq!(c.dim(), (m, n), "gemm output dimension mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.mapv_inplace(|x| beta * x);
        return;
    }
    let a_eff: CowArray<C64, Ix2> = if conj_a {
        CowArray::from(a.mapv(|x| x.conj()))
    } else {
        CowArray::from(*a)
    };
    let b_eff: CowArray<C64, Ix2> = if conj_b {
        CowArray::from(b.mapv(|x| x.conj()))
    } else {
        CowArray::from(*b)
    };
    let (rsa, csa) = (a_eff.strides()[0], a_eff.strides()[1]);
    let (rsb, csb) = (b_eff.strides()[0], b_eff.strides()[1]);
    let (rsc, csc) = (c.strides()[0], c.strides()[1]);
    unsafe {
        zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a_eff.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b_eff.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            rsc,
            csc,
        );
    }
}

/// Convenience product A * B.
pub fn matmul(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    gemm(C64::new(1.0, 0.0), a, false, b, false, C64::new(0.0, 0.0), &mut c);
    c
}

/// Convenience product A^dagger * B.
pub fn adjoint_matmul(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let at = a.t();
    let mut c = Array2::zeros((at.nrows(), b.ncols()));
    gemm(C64::new(1.0, 0.0), &at, true, b, false, C64::new(0.0, 0.0), &mut c);
    c
}

/// Conjugate transpose.
pub fn dagger(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|x| x.conj())
}

/// (A + A^dagger) / 2, in place.
pub fn hermitize(a: &mut Array2<C64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for p in 0..n {
        let d = a[[p, p]];
        a[[p, p]] = C64::new(d.re, 0.0);
        for q in (p + 1)..n {
            let avg = 0.5 * (a[[p, q]] + a[[q, p]].conj());
            a[[p, q]] = avg;
            a[[q, p]] = avg.conj();
        }
    }
}

/// Frobenius norm.
pub fn frob_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius inner product <A, B> = Tr(A^dagger B).
pub fn frob_inner(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    debug_assert_eq!(a.dim(), b.dim());
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

/// Max elementwise |a - b|.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Max |(A^dagger A - I)_{pq}|.
pub fn unitarity_defect(a: &ArrayView2<C64>) -> f64 {
    let g = adjoint_matmul(a, a);
    let n = g.nrows();
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            let target = if p == q { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((g[[p, q]] - target).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(values, vectors)` with `A = V diag(values) V^dagger`, columns of
/// `V` orthonormal. Eigenvalues are sorted ascending.
pub fn eigh(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    hermitize(&mut m);
    let mut v: Array2<C64> = Array2::eye(n);
    let scale = frob_norm(&m).max(1.0);
    let tol = 1e-15 * scale;
    let max_sweeps = 60;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotation G: G[p,p]=c, G[p,q]=s*phase, G[q,p]=-s*conj(phase), G[q,q]=c
                // applied as M <- G^dagger M G, V <- V G.
                let gp = s * phase;
                let gq = s * phase.conj();
                for r in 0..n {
                    let mrp = m[[r, p]];
                    let mrq = m[[r, q]];
                    m[[r, p]] = c * mrp - gq * mrq;
                    m[[r, q]] = gp * mrp + c * mrq;
                }
                for r in 0..n {
                    let mpr = m[[p, r]];
                    let mqr = m[[q, r]];
                    m[[p, r]] = c * mpr - gp * mqr;
                    m[[q, r]] = gq * mpr + c * mqr;
                }
                for r in 0..n {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = c * vrp - gq * vrq;
                    v[[r, q]] = gp * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted_vals = Array1::from_iter(order.iter().map(|&i| vals[i]));
    let mut sorted_vecs = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.column_mut(dst).assign(&v.column(src));
    }
    (sorted_vals, sorted_vecs)
}

/// exp(i * H) for Hermitian H, via eigendecomposition. Exactly unitary up to
/// the orthonormality of the Jacobi eigenbasis.
pub fn exp_i_hermitian(h: &Array2<C64>) -> Array2<C64> {
    let (vals, vecs) = eigh(h);
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
        let ph = C64::from_polar(1.0, vals[j]);
        col.mapv_inplace(|x| x * ph);
    }
    let vt = vecs.t();
    let mut out = Array2::zeros((n, n));
    gemm(C64::new(1.0, 0.0), &scaled.view(), false, &vt, true, C64::new(0.0, 0.0), &mut out);
    out
}

/// LU factorization with partial pivoting. Returns permutation as row swaps.
pub struct Lu {
    lu: Array2<C64>,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Array2<C64>) -> Option<Lu> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut lu = a.clone();
        let mut piv = Vec::with_capacity(n);
        for k in 0..n {
            let mut best = k;
            let mut best_mag = lu[[k, k]].norm_sqr();
            for r in (k + 1)..n {
                let mag = lu[[r, k]].norm_sqr();
                if mag > best_mag {
                    best = r;
                    best_mag = mag;
                }
            }
            if best_mag == 0.0 {
                return None;
            }
            piv.push(best);
            if best != k {
                for c in 0..n {
                    let tmp = lu[[k, c]];
                    lu[[k, c]] = lu[[best, c]];
                    lu[[best, c]] = tmp;
                }
            }
            let pivot = lu[[k, k]];
            for r in (k + 1)..n {
                let factor = lu[[r, k]] / pivot;
                lu[[r, k]] = factor;
                for c in (k + 1)..n {
                    let lkc = lu[[k, c]];
                    lu[[r, c]] -= factor * lkc;
                }
            }
        }
        Some(Lu { lu, piv })
    }

    /// Solve A X = B, overwriting B with X.
    pub fn solve_in_place(&self, b: &mut Array2<C64>) {
        let n = self.lu.nrows();
        assert_eq!(b.nrows(), n);
        let ncols = b.ncols();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                for c in 0..ncols {
                    let tmp = b[[k, c]];
                    b[[k, c]] = b[[p, c]];
                    b[[p, c]] = tmp;
                }
            }
        }
        // forward: L y = P b
        for k in 0..n {
            for r in (k + 1)..n {
                let f = self.lu[[r, k]];
                if f.norm_sqr() != 0.0 {
                    for c in 0..ncols {
                        let bk = b[[k, c]];
                        b[[r, c]] -= f * bk;
                    }
                }
            }
        }
        // backward: U x = y
        for k in (0..n).rev() {
            let d = self.lu[[k, k]];
            for c in 0..ncols {
                b[[k, c]] /= d;
            }
            for r in 0..k {
                let f = self.lu[[r, k]];
                if f.norm_sqr() != 0.0 {
                    for c in 0..ncols {
                        let bk = b[[k, c]];
                        b[[r, c]] -= f * bk;
                    }
                }
            }
        }
    }
}

/// Orthonormalize the columns of `a` in place by modified Gram-Schmidt with
/// one reorthogonalization pass. Columns whose remainder falls below `tol`
/// times their original norm are dropped; returns the retained rank.
pub fn mgs_orthonormalize(a: &mut Array2<C64>, tol: f64) -> usize {
    let ncols = a.ncols();
    let mut rank = 0;
    for j in 0..ncols {
        let col = a.column(j).to_owned();
        let orig_norm = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let mut v = col;
        for _pass in 0..2 {
            for k in 0..rank {
                let qk = a.column(k);
                let proj: C64 = qk.iter().zip(v.iter()).map(|(q, x)| q.conj() * x).sum();
                for (x, q) in v.iter_mut().zip(qk.iter()) {
                    *x -= proj * q;
                }
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > tol * orig_norm.max(1e-300) && norm > 0.0 {
            let inv = 1.0 / norm;
            for (dst, x) in a.column_mut(rank).iter_mut().zip(v.iter()) {
                *dst = x * inv;
            }
            rank += 1;
        }
    }
    rank
}

/// Draw a Haar-random unitary of size n.
pub fn haar_unitary<R: Rng>(rng: &mut R, n: usize) -> Array2<C64> {
    let mut z = random_gaussian(rng, n, n);
    let rank = mgs_orthonormalize(&mut z, 1e-12);
    assert_eq!(rank, n, "Gaussian matrix was numerically rank-deficient");
    z
}

/// Matrix of iid standard complex Gaussians.
pub fn random_gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) / f64::sqrt(2.0)
    })
}

/// Random Hermitian matrix with O(1) entries.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> Array2<C64> {
    let mut a = random_gaussian(rng, n, n);
    hermitize(&mut a);
    a
}

/// Principal logarithm generator of a unitary matrix: Hermitian `h` with
/// `S = exp(i h)` and eigenphases in (-pi, pi].
///
/// Works through the commuting Hermitian parts `B = (S + S^dagger)/2` and
/// `A = (S - S^dagger)/(2i)`: the eigenbasis of `B`, refined inside
/// degenerate clusters by diagonalizing the restriction of `A`, jointly
/// diagonalizes both, hence `S` itself.
pub fn principal_log_unitary(s: &Array2<C64>) -> Result<Array2<C64>, String> {
    let n = s.nrows();
    assert_eq!(n, s.ncols());
    let sd = dagger(&s.view());
    let mut b = Array2::zeros((n, n));
    let mut a = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            let x = s[[p, q]];
            let y = sd[[p, q]];
            b[[p, q]] = 0.5 * (x + y);
            a[[p, q]] = C64::new(0.0, -0.5) * (x - y);
        }
    }
    let (bvals, mut vecs) = eigh(&b);
    // Refine within clusters of (near-)degenerate B eigenvalues.
    let cluster_tol = 1e-7;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (bvals[end] - bvals[end - 1]).abs() <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let k = end - start;
            let sub = vecs.slice(ndarray::s![.., start..end]).to_owned();
            let av = matmul(&a.view(), &sub.view());
            let asub = adjoint_matmul(&sub.view(), &av.view());
            let (_, w) = eigh(&asub);
            let refined = matmul(&sub.view(), &w.view());
            vecs.slice_mut(ndarray::s![.., start..end]).assign(&refined);
            let _ = k;
        }
        start = end;
    }
    // Eigenphase per joint eigenvector via Rayleigh quotients.
    let mut phases = Array1::<f64>::zeros(n);
    for j in 0..n {
        let v = vecs.column(j);
        let mut bq = C64::new(0.0, 0.0);
        let mut aq = C64::new(0.0, 0.0);
        for p in 0..n {
            let mut brow = C64::new(0.0, 0.0);
            let mut arow = C64::new(0.0, 0.0);
            for q in 0..n {
                brow += b[[p, q]] * v[q];
                arow += a[[p, q]] * v[q];
            }
            bq += v[p].conj() * brow;
            aq += v[p].conj() * arow;
        }
        phases[j] = aq.re.atan2(bq.re);
    }
    // Validate the reconstruction.
    let mut recon = Array2::zeros((n, n));
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
        let ph = C64::from_polar(1.0, phases[j]);
        col.mapv_inplace(|x| x * ph);
    }
    gemm(
        C64::new(1.0, 0.0),
        &scaled.view(),
        false,
        &vecs.t(),
        true,
        C64::new(0.0, 0.0),
        &mut recon,
    );
    let err = max_abs_diff(&recon, s);
    if err > 1e-9 {
        return Err(format!("unitary eigendecomposition failed to close (error {err:.3e})"));
    }
    let mut h = Array2::zeros((n, n));
    let mut scaled2 = vecs.clone();
    for (j, mut col) in scaled2.axis_iter_mut(Axis(1)).enumerate() {
        let lam = C64::new(phases[j], 0.0);
        col.mapv_inplace(|x| x * lam);
    }
    gemm(
        C64::new(1.0, 0.0),
        &scaled2.view(),
        false,
        &vecs.t(),
        true,
        C64::new(0.0, 0.0),
        &mut h,
    );
    hermitize(&mut h);
    Ok(h)
}

/// Eigenphases of a unitary matrix (principal branch), without the generator.
pub fn unitary_eigenphases(s: &Array2<C64>) -> Result<Vec<f64>, String> {
    let h = principal_log_unitary(s)?;
    let (vals, _) = eigh(&h);
    Ok(vals.to_vec())
}

/// Dominant eigenpair of a Hermitian PSD matrix by power iteration.
pub fn power_dominant(m: &Array2<C64>, max_iter: usize) -> (f64, Array1<C64>) {
    let n = m.nrows();
    let mut v = Array1::from_shape_fn(n, |i| C64::new(1.0 + (i as f64) * 1e-3, 0.0));
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|x| x / norm);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let mut w = Array1::<C64>::zeros(n);
        for p in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..n {
                acc += m[[p, q]] * v[q];
            }
            w[p] = acc;
        }
        let wnorm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if wnorm == 0.0 {
            return (0.0, v);
        }
        let new_lambda = wnorm;
        w.mapv_inplace(|x| x / wnorm);
        let drift: f64 = w
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        v = w;
        let converged = (new_lambda - lambda).abs() <= 1e-15 * new_lambda.max(1.0) && drift <= 1e-13;
        lambda = new_lambda;
        if converged {
            break;
        }
    }
    (lambda, v)
}
