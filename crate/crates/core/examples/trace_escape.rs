use herald_core::feasibility::{build_gamma, optical_residual, RotatedFrame};
use herald_core::herald::*;
use herald_core::solver::*;
use herald_core::linalg;
use herald_core::C64;
use ndarray::{Array1, Array2};
use std::sync::Arc;

fn main() {
    let prob = HeraldingProblem::new(
        4, 3, &[1, 1, 1, 0], &[1],
        &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
    ).unwrap();
    let gb = build_gamma(prob.space()).unwrap();
    let cfg = SolverConfig { seed: 0, lanczos_rank: 0, ..Default::default() };
    let res = optimize(&prob, &cfg).unwrap();
    let u = res.u_final;
    let d = u.dim();
    let frame_r = RotatedFrame::build(&u, &gb);
    let frame_f = build_frame(&u, &prob);
    println!("endpoint: R = {:.3e}, |z| = {:.3e}", frame_r.residual(), frame_f.z.norm());
    // overlaps of h with ALL admissible-projected gamma_bar columns, Re and Im
    for n in 0..4 { for m in 0..4 {
        let col = frame_r.gamma_bar_column0(&gb, n, m);
        let t = Array1::from_iter(col.iter().skip(1).cloned());
        let adm = frame_f.admissible_column(&t);
        let dot: C64 = frame_f.h.iter().zip(adm.iter()).map(|(a,b)| a.conj()*b).sum();
        if dot.norm() > 1e-8 {
            println!("  gbar({n},{m}): admissible overlap re {:+.4e} im {:+.4e}", dot.re, dot.im);
        }
    }}
    // try a finite rotation along the Hermitian combination of (0,1):
    let mut alpha = Array2::<C64>::zeros((4,4));
    alpha[[0,1]] = C64::new(1.0, 0.0); alpha[[1,0]] = C64::new(1.0, 0.0);
    let h01 = frame_r.assemble_tangent(&gb, &alpha);
    let mut alpha_i = Array2::<C64>::zeros((4,4));
    alpha_i[[0,1]] = C64::new(0.0, 1.0); alpha_i[[1,0]] = C64::new(0.0, -1.0);
    let h01i = frame_r.assemble_tangent(&gb, &alpha_i);
    for (label, hmat) in [("re-combo", &h01), ("im-combo", &h01i)] {
        for theta in [0.1f64, 0.5, 1.0] {
            let rot = linalg::exp_i_hermitian(&hmat.mapv(|x| x * theta));
            let um = linalg::matmul(&u.matrix().view(), &rot.view());
            let u2 = herald_core::fock::FockUnitary::new(um, Arc::clone(prob.space())).unwrap();
            let (r2, _) = optical_residual(&u2, &gb);
            let amp = success_amplitude(&u2, &prob);
            let fid = fidelity_residual_norm(&u2, &prob);
            println!("{label} theta {theta}: R = {:.3e}, |z| = {:.4e}, fid-res = {:.3e}", r2, amp.z.norm(), fid);
        }
    }
}
