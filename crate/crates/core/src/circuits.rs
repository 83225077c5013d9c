//! Closed-form analysis of the six-mode Bell generator and decomposition of
//! scattering matrices into nearest-neighbor splitters and phase shifters.

use crate::error::{CoreError, Result};
use crate::fock::{amplitude_oracle, occupation_string, Occupation, ScatteringMatrix};
use crate::herald::HeraldingProblem;
use crate::linalg;
use crate::C64;
use ndarray::Array2;
use std::fmt::Write as _;

/// One-parameter family of 6-mode interferometers heralding the dual-rail
/// Bell pair from |111100> on single-photon detection of the last two modes.
///
/// The free angle is phi in (0, pi/4); the companion angles follow from
/// tan(2 psi) = 2 tan(2 phi) and cos^2 theta = sin(2 phi), which kill the
/// doubly-occupied heralded components and equalize the two Bell amplitudes.
/// All seven matrix parameters come out real positive on this branch.
#[derive(Debug, Clone, Copy)]
pub struct BellAnsatz {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    /// x = sin(2 phi), the single argument of the success-rate curve.
    pub x: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub mu: f64,
    pub nu: f64,
}

impl BellAnsatz {
    pub fn from_phi(phi: f64) -> Result<BellAnsatz> {
        let x = (2.0 * phi).sin();
        if !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_4) || !(x > 0.0 && x < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "phi = {phi} is outside the admissible branch (0, pi/4)"
            )));
        }
        // cos^2 theta = sin(2 phi), theta in (0, pi/2)
        let cos_theta = x.sqrt();
        let sin_theta = (1.0 - x).sqrt();
        let theta = cos_theta.acos();
        // tan(2 psi) = 2 tan(2 phi), 2 psi in (0, pi/2)
        let psi = 0.5 * (2.0 * (2.0 * phi).tan()).atan();
        let sq2 = std::f64::consts::SQRT_2;
        let alpha = phi.cos() * cos_theta / sq2;
        let beta = phi.sin() * cos_theta / sq2;
        let delta = psi.cos() * sin_theta / sq2;
        let sigma = psi.sin() * sin_theta / sq2;
        let gamma = sin_theta;
        // Row orthonormality pins the remaining column:
        // nu = 2 (delta alpha - sigma beta) / gamma, mu = 2 (delta beta + sigma alpha) / gamma.
        let nu = 2.0 * (delta * alpha - sigma * beta) / gamma;
        let mu = 2.0 * (delta * beta + sigma * alpha) / gamma;
        Ok(BellAnsatz {
            phi,
            theta,
            psi,
            x,
            alpha,
            beta,
            delta,
            sigma,
            gamma,
            mu,
            nu,
        })
    }

    /// The inverse map of x = sin(2 phi) on the admissible branch.
    pub fn from_x(x: f64) -> Result<BellAnsatz> {
        if !(x > 0.0 && x < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "x = {x} is outside (0, 1)"
            )));
        }
        BellAnsatz::from_phi(0.5 * x.asin())
    }

    pub fn matrix(&self) -> Result<ScatteringMatrix> {
        let (a, b, d, s) = (self.alpha, self.beta, self.delta, self.sigma);
        let (g, m, n) = (self.gamma, self.mu, self.nu);
        let h = 0.5;
        let rows: [[f64; 6]; 6] = [
            [h, -h, h, -h, 0.0, 0.0],
            [h, -h, -h, h, 0.0, 0.0],
            [a, a, b, b, -g, 0.0],
            [b, b, -a, -a, 0.0, -g],
            [d, d, -s, -s, n, m],
            [s, s, d, d, m, -n],
        ];
        let entries = Array2::from_shape_fn((6, 6), |(r, c)| C64::new(rows[r][c], 0.0));
        ScatteringMatrix::new(entries)
    }
}

/// The 6x6 interferometer of the ansatz at angle phi.
pub fn ansatz_matrix(phi: f64) -> Result<ScatteringMatrix> {
    BellAnsatz::from_phi(phi)?.matrix()
}

/// Closed-form heralding probability of the ansatz family:
/// P(x) = 2 (1 - x)^2 x^2 / (1 + 3 x^2), x = sin(2 phi).
pub fn success_curve(x: f64) -> f64 {
    2.0 * (1.0 - x) * (1.0 - x) * x * x / (1.0 + 3.0 * x * x)
}

/// The maximizer of the success curve: the real root of 3 x^3 + 2 x - 1 = 0,
/// x* = ((sqrt(113) + 9) / 2)^(1/3) / 3 - ((sqrt(113) - 9) / 2)^(1/3) / 3.
pub fn optimal_x() -> f64 {
    let s = 113.0f64.sqrt();
    let a = ((s + 9.0) / 2.0).cbrt();
    let b = ((s - 9.0) / 2.0).cbrt();
    let x = (a - b) / 3.0;
    // stationarity sanity: central finite differences at machine-level step
    let eps = 1e-5;
    let slope = (success_curve(x + eps) - success_curve(x - eps)) / (2.0 * eps);
    assert!(slope.abs() <= 1e-9, "dP/dx at x* is {slope:.3e}");
    x
}

/// The standard 6-mode, 4-photon Bell heralding task: input |111100>,
/// pattern |11> on the last two modes, target (|0011> - |1100>) / sqrt(2).
pub fn bell6_problem() -> HeraldingProblem {
    let r = 1.0 / f64::sqrt(2.0);
    HeraldingProblem::new(
        6,
        4,
        &[1, 1, 1, 1, 0, 0],
        &[1, 1],
        &[
            (vec![0, 0, 1, 1], C64::new(r, 0.0)),
            (vec![1, 1, 0, 0], C64::new(-r, 0.0)),
        ],
    )
    .expect("static problem definition is valid")
}

/// Heralded-state summary of a scattering matrix against a problem, through
/// the permanent oracle: every amplitude <(k, m)|U(S)|input>, the pattern
/// probability P and the fidelity F with the target.
#[derive(Debug, Clone)]
pub struct VerifiedHeralding {
    pub fidelity: f64,
    pub probability: f64,
    /// (leading-mode occupation, amplitude), in mu order.
    pub amplitudes: Vec<(Occupation, C64)>,
}

pub fn verify_heralded_state(
    s: &ScatteringMatrix,
    prob: &HeraldingProblem,
) -> Result<VerifiedHeralding> {
    let mut amplitudes = Vec::with_capacity(prob.output_dim());
    let mut p = 0.0;
    let mut overlap = C64::new(0.0, 0.0);
    for (alpha, k_occ) in prob.outputs().iter().enumerate() {
        let mut full = k_occ.clone();
        full.extend_from_slice(prob.pattern());
        let amp = amplitude_oracle(s, prob.input(), &full)?;
        p += amp.norm_sqr();
        overlap += prob.target()[alpha].conj() * amp;
        amplitudes.push((k_occ.clone(), amp));
    }
    let fidelity = if p < 1e-30 {
        1.0
    } else {
        overlap.norm_sqr() / p
    };
    Ok(VerifiedHeralding {
        fidelity,
        probability: p,
        amplitudes,
    })
}

/// A placed element of a rectangular interferometer mesh. The decomposition
/// is an ordered list; multiplying the element matrices in list order
/// reproduces the decomposed scattering matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshElement {
    /// T(theta) of the real rotation form [[cos, -sin], [sin, cos]] acting on
    /// modes (mode, mode + 1).
    Splitter { mode: usize, theta: f64 },
    /// diag(..., e^{i phase}, ...) on one mode.
    Phase { mode: usize, phase: f64 },
}

#[derive(Debug, Clone)]
pub struct MeshDecomposition {
    modes: usize,
    elements: Vec<MeshElement>,
}

impl MeshDecomposition {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn elements(&self) -> &[MeshElement] {
        &self.elements
    }

    pub fn splitter_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, MeshElement::Splitter { .. }))
            .count()
    }

    /// Product of the element matrices, in list order.
    pub fn recompose(&self) -> Array2<C64> {
        let n = self.modes;
        let mut acc: Array2<C64> = Array2::eye(n);
        for el in &self.elements {
            match *el {
                MeshElement::Splitter { mode, theta } => {
                    let (c, s) = (theta.cos(), theta.sin());
                    // acc <- acc * T embedded on (mode, mode+1): mixes columns
                    for r in 0..n {
                        let x = acc[[r, mode]];
                        let y = acc[[r, mode + 1]];
                        acc[[r, mode]] = x * c + y * s;
                        acc[[r, mode + 1]] = -x * s + y * c;
                    }
                }
                MeshElement::Phase { mode, phase } => {
                    let ph = C64::from_polar(1.0, phase);
                    for r in 0..n {
                        acc[[r, mode]] *= ph;
                    }
                }
            }
        }
        acc
    }

    /// Text export: one element per line, angles in degrees.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        let deg = 180.0 / std::f64::consts::PI;
        for el in &self.elements {
            match *el {
                MeshElement::Splitter { mode, theta } => {
                    let _ = writeln!(
                        out,
                        "splitter, modes ({},{}), theta {:.6} deg",
                        mode,
                        mode + 1,
                        theta * deg
                    );
                }
                MeshElement::Phase { mode, phase } => {
                    let _ = writeln!(out, "phase, mode {}, {:.6} deg", mode, phase * deg);
                }
            }
        }
        out
    }
}

const PRUNE_TOL: f64 = 1e-12;

fn push_phase(elements: &mut Vec<MeshElement>, mode: usize, phase: f64) {
    if phase.abs() > PRUNE_TOL {
        elements.push(MeshElement::Phase { mode, phase });
    }
}

fn push_splitter(elements: &mut Vec<MeshElement>, mode: usize, theta: f64) {
    if theta.abs() > PRUNE_TOL {
        elements.push(MeshElement::Splitter { mode, theta });
    }
}

/// Rectangular-mesh decomposition: nulls the strict lower triangle along
/// anti-diagonals, alternating column ops (from the right) and row ops (from
/// the left); a triangular unitary is diagonal, so the sweep leaves residual
/// single-mode phases. Recomposition reproduces the input to 1e-10.
pub fn clements_decompose(s: &ScatteringMatrix) -> Result<MeshDecomposition> {
    let n = s.modes();
    let defect = linalg::unitarity_defect(&s.matrix().view());
    if defect > 1e-10 {
        return Err(CoreError::InvalidArgument(format!(
            "matrix is not unitary (defect {defect:.3e})"
        )));
    }
    let mut a = s.matrix().clone();
    // (mode, theta, phi) with element B = T(theta) P(phi), P on the first mode
    let mut rights: Vec<(usize, f64, f64)> = Vec::new();
    let mut lefts: Vec<(usize, f64, f64)> = Vec::new();
    let arg = |z: C64| if z.norm() < 1e-300 { 0.0 } else { z.arg() };
    for i in 1..n {
        if i % 2 == 1 {
            // right ops along the anti-diagonal, mixing columns (col, col+1)
            for j in 0..i {
                let row = n - 1 - j;
                let col = i - 1 - j;
                let target = a[[row, col]];
                let pivot = a[[row, col + 1]];
                let theta = target.norm().atan2(pivot.norm());
                let phi = arg(target) - arg(pivot);
                // A <- A * B^{-1}, B^{-1} = [[e^{-i phi} c, e^{-i phi} s], [-s, c]]
                let (c, sn) = (theta.cos(), theta.sin());
                let e = C64::from_polar(1.0, -phi);
                for r in 0..n {
                    let x = a[[r, col]];
                    let y = a[[r, col + 1]];
                    a[[r, col]] = e * c * x - sn * y;
                    a[[r, col + 1]] = e * sn * x + c * y;
                }
                debug_assert!(a[[row, col]].norm() < 1e-10);
                rights.push((col, theta, phi));
            }
        } else {
            // left ops, mixing rows (row-1, row)
            for j in 1..=i {
                let row = n + j - i - 1;
                let col = j - 1;
                let target = a[[row, col]];
                let pivot = a[[row - 1, col]];
                let theta = target.norm().atan2(pivot.norm());
                let phi = arg(-target) - arg(pivot);
                // A <- B * A on rows (row-1, row): B = [[e^{i phi} c, -s], [e^{i phi} s, c]]
                let (c, sn) = (theta.cos(), theta.sin());
                let e = C64::from_polar(1.0, phi);
                for q in 0..n {
                    let x = a[[row - 1, q]];
                    let y = a[[row, q]];
                    a[[row - 1, q]] = e * c * x - sn * y;
                    a[[row, q]] = e * sn * x + c * y;
                }
                debug_assert!(a[[row, col]].norm() < 1e-10);
                lefts.push((row - 1, theta, phi));
            }
        }
    }
    // a is now diagonal (triangular unitary); collect its phases.
    let mut elements = Vec::new();
    // S = L_1^{-1} ... L_q^{-1} D B_p ... B_1 with L, B = T(theta) P(phi);
    // inverse factors expand as P(-phi) T(-theta).
    for &(mode, theta, phi) in &lefts {
        push_phase(&mut elements, mode, -phi);
        push_splitter(&mut elements, mode, -theta);
    }
    for m in 0..n {
        push_phase(&mut elements, m, a[[m, m]].arg());
    }
    for &(mode, theta, phi) in rights.iter().rev() {
        push_splitter(&mut elements, mode, theta);
        push_phase(&mut elements, mode, phi);
    }
    let mesh = MeshDecomposition { modes: n, elements };
    let recon = mesh.recompose();
    let err = linalg::max_abs_diff(&recon, s.matrix());
    if err > 1e-10 {
        return Err(CoreError::ExtractionFailed(format!(
            "mesh recomposition off by {err:.3e}"
        )));
    }
    Ok(mesh)
}

/// Human-readable amplitude table of a heralding verification.
pub fn format_amplitude_table(v: &VerifiedHeralding) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>24} {:>14}", "output", "amplitude (re, im)", "|amp|^2");
    for (occ, amp) in &v.amplitudes {
        let _ = writeln!(
            out,
            "{:<12} {:>11.8}, {:>11.8} {:>14.10}",
            occupation_string(occ),
            amp.re,
            amp.im,
            amp.norm_sqr()
        );
    }
    let _ = writeln!(out, "P = {:.10}", v.probability);
    let _ = writeln!(out, "F = {:.10}", v.fidelity);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn curve_known_values() {
        // x = 1/3: P = 2 * (2/3)^2 * (1/9) / (4/3) = 2/27 exactly
        let p = success_curve(1.0 / 3.0);
        assert!((p - 2.0 / 27.0).abs() < 1e-16);
        assert!(success_curve(1e-12) < 1e-20);
        assert!(success_curve(1.0 - 1e-12) < 1e-20);
    }

    #[test]
    fn optimum_matches_closed_form() {
        let x = optimal_x();
        assert!((x - 0.40231994).abs() < 1e-8, "x* = {x:.10}");
        let p = success_curve(x);
        assert!((p - 0.07784190).abs() < 1e-8, "P(x*) = {p:.10}");
        assert!(p > 2.0 / 27.0);
        // global max on a dense grid
        for k in 1..10_000 {
            let xg = k as f64 / 10_000.0;
            assert!(success_curve(xg) <= p + 1e-15);
        }
    }

    #[test]
    fn ansatz_is_unitary_across_branch() {
        for k in 1..1000 {
            let phi = std::f64::consts::FRAC_PI_4 * (k as f64) / 1000.0;
            let ans = BellAnsatz::from_phi(phi).unwrap();
            let m = ans.matrix().unwrap();
            assert!(linalg::unitarity_defect(&m.matrix().view()) < 1e-12);
            for v in [ans.alpha, ans.beta, ans.delta, ans.sigma, ans.gamma, ans.mu, ans.nu] {
                assert!(v > 0.0, "parameter not positive at phi = {phi}");
            }
        }
        assert!(BellAnsatz::from_phi(0.0).is_err());
        assert!(BellAnsatz::from_phi(std::f64::consts::FRAC_PI_4).is_err());
    }

    #[test]
    fn ansatz_heralds_the_bell_pair() {
        let prob = bell6_problem();
        for &x in &[0.15, 1.0 / 3.0, optimal_x(), 0.7] {
            let ans = BellAnsatz::from_x(x).unwrap();
            let s = ans.matrix().unwrap();
            let v = verify_heralded_state(&s, &prob).unwrap();
            assert!(
                (v.fidelity - 1.0).abs() < 1e-10,
                "fidelity {} at x = {x}",
                v.fidelity
            );
            assert!(
                (v.probability - success_curve(x)).abs() < 1e-12,
                "P = {} vs curve {} at x = {x}",
                v.probability,
                success_curve(x)
            );
            // doubly-occupied heralded components vanish under the angle
            // constraints
            for (occ, amp) in &v.amplitudes {
                if occ.iter().any(|&c| c > 1) {
                    assert!(amp.norm() < 1e-12, "doubly-occupied leak at {occ:?}");
                }
            }
        }
    }

    #[test]
    fn ansatz_probability_at_known_points() {
        let prob = bell6_problem();
        // x = 1/3 reproduces the conventional 2/27
        let v = verify_heralded_state(
            &BellAnsatz::from_x(1.0 / 3.0).unwrap().matrix().unwrap(),
            &prob,
        )
        .unwrap();
        assert!((v.probability - 2.0 / 27.0).abs() < 1e-10);
        // the optimum reaches the improved rate
        let v = verify_heralded_state(
            &BellAnsatz::from_x(optimal_x()).unwrap().matrix().unwrap(),
            &prob,
        )
        .unwrap();
        assert!((v.probability - 0.07784190).abs() < 1e-7);
    }

    #[test]
    fn curve_matches_oracle_on_grid() {
        let prob = bell6_problem();
        for k in 1..100 {
            let x = k as f64 / 100.0;
            let s = BellAnsatz::from_x(x).unwrap().matrix().unwrap();
            let v = verify_heralded_state(&s, &prob).unwrap();
            assert!(
                (v.probability - success_curve(x)).abs() < 1e-9,
                "curve mismatch at x = {x}"
            );
        }
    }

    #[test]
    fn decompose_round_trips_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &n in &[2usize, 3, 4, 5, 6] {
            for _ in 0..10 {
                let s = ScatteringMatrix::new(haar_unitary(&mut rng, n)).unwrap();
                let mesh = clements_decompose(&s).unwrap();
                let recon = mesh.recompose();
                assert!(linalg::max_abs_diff(&recon, s.matrix()) < 1e-10);
                assert!(mesh.splitter_count() <= n * (n - 1) / 2);
            }
        }
    }

    #[test]
    fn decompose_embedded_splitter_is_single_element() {
        let n = 6;
        let theta: f64 = 0.7;
        let mut m = Array2::<C64>::eye(n);
        m[[2, 2]] = C64::new(theta.cos(), 0.0);
        m[[2, 3]] = C64::new(-theta.sin(), 0.0);
        m[[3, 2]] = C64::new(theta.sin(), 0.0);
        m[[3, 3]] = C64::new(theta.cos(), 0.0);
        let s = ScatteringMatrix::new(m).unwrap();
        let mesh = clements_decompose(&s).unwrap();
        assert_eq!(mesh.splitter_count(), 1);
        match mesh
            .elements()
            .iter()
            .find(|e| matches!(e, MeshElement::Splitter { .. }))
            .unwrap()
        {
            MeshElement::Splitter { mode, theta: t } => {
                assert_eq!(*mode, 2);
                assert!((t.abs() - theta).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        assert!(linalg::max_abs_diff(&mesh.recompose(), s.matrix()) < 1e-12);
    }

    #[test]
    fn decompose_ansatz_within_mesh_capacity() {
        let s = BellAnsatz::from_x(optimal_x()).unwrap().matrix().unwrap();
        let mesh = clements_decompose(&s).unwrap();
        assert!(mesh.splitter_count() <= 15);
        assert!(linalg::max_abs_diff(&mesh.recompose(), s.matrix()) < 1e-10);
        // real input: phases collapse to sign flips (multiples of pi)
        for el in mesh.elements() {
            if let MeshElement::Phase { phase, .. } = el {
                let folded = (phase / std::f64::consts::PI).rem_euclid(1.0);
                let dist = folded.min(1.0 - folded);
                assert!(dist < 1e-9, "non-sign-flip phase {phase}");
            }
        }
        // the recomposed mesh heralds the improved rate
        let prob = bell6_problem();
        let recomposed = ScatteringMatrix::new(mesh.recompose()).unwrap();
        let v = verify_heralded_state(&recomposed, &prob).unwrap();
        assert!((v.probability - 0.07784190).abs() < 1e-6);
        assert!((v.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decompose_rejects_non_unitary() {
        let m = Array2::<C64>::from_elem((3, 3), C64::new(0.5, 0.0));
        assert!(ScatteringMatrix::new(m).is_err());
    }

    #[test]
    fn table_is_printable() {
        let prob = bell6_problem();
        let s = BellAnsatz::from_x(0.4).unwrap().matrix().unwrap();
        let v = verify_heralded_state(&s, &prob).unwrap();
        let text = format_amplitude_table(&v);
        assert!(text.contains("P ="));
        assert!(text.lines().count() >= prob.output_dim() + 2);
    }
}
