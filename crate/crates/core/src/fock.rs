//! Multimode Fock bases, photon-number-preserving operators and the lift of
//! mode-level scattering matrices to Fock-space unitaries.

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::C64;
use ndarray::Array2;
use std::collections::HashMap;
use std::sync::Arc;

/// Occupation vector: photon count per mode.
pub type Occupation = Vec<u32>;

/// Render an occupation vector as a digit string, e.g. `[1,1,0]` -> "110".
/// Counts above 9 are bracketed to stay unambiguous.
pub fn occupation_string(occ: &[u32]) -> String {
    if occ.iter().all(|&c| c <= 9) {
        occ.iter().map(|c| char::from(b'0' + *c as u8)).collect()
    } else {
        let parts: Vec<String> = occ.iter().map(|c| c.to_string()).collect();
        format!("[{}]", parts.join(","))
    }
}

/// Enumerated basis of the n-photon sector of N modes, with a fixed ordering.
///
/// States are listed in descending lexicographic order of the occupation
/// vector; an optional hint state is pinned to index 0 so that downstream
/// code can treat "the input state" and "the first basis vector" as synonyms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSpace {
    modes: usize,
    photons: usize,
    basis: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

fn compositions(total: u32, slots: usize, prefix: &mut Occupation, out: &mut Vec<Occupation>) {
    if slots == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in (0..=total).rev() {
        prefix.push(k);
        compositions(total - k, slots - 1, prefix, out);
        prefix.pop();
    }
}

/// Binomial coefficient in exact integer arithmetic (small arguments).
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Enumerate the n-photon basis of N modes.
///
/// With `ordering_hint` the given state is pinned to index 0 and the rest
/// keep their descending-lexicographic order.
pub fn enumerate_basis(
    modes: usize,
    photons: usize,
    ordering_hint: Option<&[u32]>,
) -> Result<FockSpace> {
    if modes == 0 {
        return Err(CoreError::InvalidArgument("need at least one mode".into()));
    }
    let mut basis = Vec::with_capacity(binomial((modes + photons - 1) as u64, photons as u64) as usize);
    let mut prefix = Vec::with_capacity(modes);
    compositions(photons as u32, modes, &mut prefix, &mut basis);
    if let Some(hint) = ordering_hint {
        if hint.len() != modes {
            return Err(CoreError::InvalidArgument(format!(
                "ordering hint has {} modes, space has {}",
                hint.len(),
                modes
            )));
        }
        if hint.iter().map(|&c| c as usize).sum::<usize>() != photons {
            return Err(CoreError::InvalidArgument(format!(
                "ordering hint carries {} photons, space has {}",
                hint.iter().sum::<u32>(),
                photons
            )));
        }
        let pos = basis
            .iter()
            .position(|b| b.as_slice() == hint)
            .expect("every valid occupation is enumerated");
        let pinned = basis.remove(pos);
        basis.insert(0, pinned);
    }
    let index = basis
        .iter()
        .enumerate()
        .map(|(i, b)| (b.clone(), i))
        .collect();
    Ok(FockSpace {
        modes,
        photons,
        basis,
        index,
    })
}

impl FockSpace {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    /// Sector dimension N_st.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Occupation] {
        &self.basis
    }

    pub fn state(&self, i: usize) -> &Occupation {
        &self.basis[i]
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }
}

/// Sparse matrix of a single a_i^dagger a_j in a fixed basis: at most one
/// entry per column.
#[derive(Debug, Clone)]
pub struct SparseLadder {
    dim: usize,
    /// (row, col, value) triplets, sorted by column.
    entries: Vec<(usize, usize, f64)>,
}

impl SparseLadder {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for &(r, c, v) in &self.entries {
            m[[r, c]] += C64::new(v, 0.0);
        }
        m
    }

    /// Y += alpha * L * X (rows of X gathered into rows of Y).
    pub fn scaled_apply_left(&self, alpha: f64, x: &Array2<C64>, y: &mut Array2<C64>) {
        for &(r, c, v) in &self.entries {
            let src = x.row(c).to_owned();
            let mut dst = y.row_mut(r);
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += alpha * v * s;
            }
        }
    }
}

/// Matrix of a_i^dagger a_j in the basis of `space`.
///
/// <n'|a_i^dagger a_j|n> = sqrt((n_i + 1) n_j) with n' = n - e_j + e_i for
/// i != j, and n_i on the diagonal for i = j.
pub fn ladder_generator(space: &FockSpace, i: usize, j: usize) -> Result<SparseLadder> {
    let n_modes = space.modes();
    if i >= n_modes || j >= n_modes {
        return Err(CoreError::InvalidArgument(format!(
            "mode index ({i},{j}) out of range for {n_modes} modes"
        )));
    }
    let mut entries = Vec::new();
    for (col, occ) in space.basis().iter().enumerate() {
        if i == j {
            if occ[i] > 0 {
                entries.push((col, col, occ[i] as f64));
            }
            continue;
        }
        if occ[j] == 0 {
            continue;
        }
        let mut target = occ.clone();
        target[j] -= 1;
        target[i] += 1;
        let row = space
            .index_of(&target)
            .expect("photon-number-preserving hop stays in the sector");
        let value = (((occ[i] + 1) as f64) * (occ[j] as f64)).sqrt();
        entries.push((row, col, value));
    }
    Ok(SparseLadder {
        dim: space.dim(),
        entries,
    })
}

/// N x N unitary describing a passive interferometer at the mode level.
#[derive(Debug, Clone)]
pub struct ScatteringMatrix {
    entries: Array2<C64>,
}

impl ScatteringMatrix {
    /// Unitarity is checked to 1e-12 on construction.
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(CoreError::InvalidArgument("scattering matrix must be square".into()));
        }
        let defect = linalg::unitarity_defect(&entries.view());
        if defect > 1e-12 {
            return Err(CoreError::InvalidArgument(format!(
                "scattering matrix is not unitary (defect {defect:.3e})"
            )));
        }
        Ok(ScatteringMatrix { entries })
    }

    pub fn modes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }
}

/// Dense N_st x N_st unitary on one photon-number sector.
#[derive(Debug, Clone)]
pub struct FockUnitary {
    entries: Array2<C64>,
    space: Arc<FockSpace>,
}

impl FockUnitary {
    pub fn new(entries: Array2<C64>, space: Arc<FockSpace>) -> Result<Self> {
        if entries.nrows() != space.dim() || entries.ncols() != space.dim() {
            return Err(CoreError::InvalidArgument(format!(
                "matrix is {}x{}, space dimension is {}",
                entries.nrows(),
                entries.ncols(),
                space.dim()
            )));
        }
        Ok(FockUnitary { entries, space })
    }

    pub fn identity(space: Arc<FockSpace>) -> Self {
        FockUnitary {
            entries: Array2::eye(space.dim()),
            space,
        }
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<C64> {
        &mut self.entries
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Max |(U^dagger U - I)_{pq}|; manifold updates must keep this tiny.
    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.entries.view())
    }

    /// Re-orthonormalize columns (first column first, so that heralding
    /// amplitudes keep their direction).
    pub fn reunitarize(&mut self) {
        let rank = linalg::mgs_orthonormalize(&mut self.entries, 1e-14);
        debug_assert_eq!(rank, self.space.dim());
    }
}

/// Lift a scattering matrix to its Fock-space unitary: U = exp(i H) with
/// H the one-body generator carried through the ladder operators.
///
/// If S has an eigenvalue within 1e-8 of -1 (the principal-log branch cut),
/// S is multiplied by a global phase, lifted, and the phase removed from U
/// as exp(-i * alpha * n).
pub fn lift_unitary(s: &ScatteringMatrix, space: &Arc<FockSpace>) -> Result<FockUnitary> {
    if s.modes() != space.modes() {
        return Err(CoreError::InvalidArgument(format!(
            "scattering matrix has {} modes, space has {}",
            s.modes(),
            space.modes()
        )));
    }
    // Branch-cut guard: fixed ladder of detunings, first that clears wins.
    let phases = [0.0f64, 0.37, 0.93, 1.61];
    for (attempt, &alpha) in phases.iter().enumerate() {
        let rotated = if alpha == 0.0 {
            s.matrix().clone()
        } else {
            s.matrix().mapv(|x| x * C64::from_polar(1.0, alpha))
        };
        match linalg::principal_log_unitary(&rotated) {
            Ok(h) => {
                let phases_ok = {
                    let (vals, _) = linalg::eigh(&h);
                    vals.iter().all(|&th| {
                        (C64::from_polar(1.0, th) + C64::new(1.0, 0.0)).norm() > 1e-8
                    })
                };
                if !phases_ok && attempt + 1 < phases.len() {
                    continue;
                }
                let mut lifted = lift_generator(&h, space)?;
                if alpha != 0.0 {
                    let back = C64::from_polar(1.0, -alpha * space.photons() as f64);
                    lifted.mapv_inplace(|x| x * back);
                }
                let u = FockUnitary::new(lifted, Arc::clone(space))?;
                debug_assert!(u.unitarity_defect() < 1e-10);
                return Ok(u);
            }
            Err(e) => {
                if attempt + 1 == phases.len() {
                    return Err(CoreError::InvalidArgument(format!(
                        "failed to take the matrix logarithm of S: {e}"
                    )));
                }
            }
        }
    }
    unreachable!()
}

/// exp(i * sum_ij h_ij a_i^dagger a_j) on the sector of `space`.
fn lift_generator(h: &Array2<C64>, space: &Arc<FockSpace>) -> Result<Array2<C64>> {
    let d = space.dim();
    let n_modes = space.modes();
    let mut big = Array2::<C64>::zeros((d, d));
    for i in 0..n_modes {
        for j in 0..n_modes {
            let coeff = h[[i, j]];
            if coeff.norm_sqr() == 0.0 {
                continue;
            }
            let ladder = ladder_generator(space, i, j)?;
            for &(r, c, v) in ladder.entries() {
                big[[r, c]] += coeff * v;
            }
        }
    }
    linalg::hermitize(&mut big);
    Ok(linalg::exp_i_hermitian(&big))
}

const PERMANENT_LIMIT: usize = 16;

/// Permanent of a k x k complex matrix by Ryser's inclusion-exclusion
/// formula with Gray-code subset updates, O(2^k * k).
pub fn permanent(a: &Array2<C64>) -> Result<C64> {
    let k = a.nrows();
    if k != a.ncols() {
        return Err(CoreError::InvalidArgument("permanent needs a square matrix".into()));
    }
    if k > PERMANENT_LIMIT {
        return Err(CoreError::SizeLimit(k, PERMANENT_LIMIT));
    }
    if k == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut row_sums = vec![C64::new(0.0, 0.0); k];
    let mut total = C64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for step in 1u64..(1u64 << k) {
        let next = step ^ (step >> 1);
        let flipped = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << flipped) != 0;
        for (r, sum) in row_sums.iter_mut().enumerate() {
            let v = a[[r, flipped]];
            if added {
                *sum += v;
            } else {
                *sum -= v;
            }
        }
        gray = next;
        let mut prod = C64::new(1.0, 0.0);
        for sum in &row_sums {
            prod *= *sum;
        }
        let sign = if (next.count_ones() as usize + k) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        total += sign * prod;
    }
    Ok(total)
}

fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|x| x as f64).product()
}

/// Transition amplitude <out|U(S)|in> from the permanent of the
/// row/column-repeated scattering matrix. Independent of `lift_unitary`.
pub fn amplitude_oracle(s: &ScatteringMatrix, input: &[u32], output: &[u32]) -> Result<C64> {
    let n_modes = s.modes();
    if input.len() != n_modes || output.len() != n_modes {
        return Err(CoreError::InvalidArgument(format!(
            "occupations must have {n_modes} modes"
        )));
    }
    let n_in: u32 = input.iter().sum();
    let n_out: u32 = output.iter().sum();
    if n_in != n_out {
        return Err(CoreError::InvalidArgument(format!(
            "photon number mismatch: input carries {n_in}, output {n_out}"
        )));
    }
    let k = n_in as usize;
    if k > PERMANENT_LIMIT {
        return Err(CoreError::SizeLimit(k, PERMANENT_LIMIT));
    }
    let mut rows = Vec::with_capacity(k);
    for (mode, &count) in output.iter().enumerate() {
        for _ in 0..count {
            rows.push(mode);
        }
    }
    let mut cols = Vec::with_capacity(k);
    for (mode, &count) in input.iter().enumerate() {
        for _ in 0..count {
            cols.push(mode);
        }
    }
    let sub = Array2::from_shape_fn((k, k), |(r, c)| s.matrix()[[rows[r], cols[c]]]);
    let perm = permanent(&sub)?;
    let norm: f64 = input.iter().map(|&c| factorial(c)).product::<f64>()
        * output.iter().map(|&c| factorial(c)).product::<f64>();
    Ok(perm / norm.sqrt())
}
