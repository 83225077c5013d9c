use herald_core::feasibility::{build_gamma, RotatedFrame};
use herald_core::herald::*;
use herald_core::solver::*;
use herald_core::linalg;
use herald_core::C64;
use ndarray::s;

fn main() {
    let prob = HeraldingProblem::new(
        4, 3, &[1, 1, 1, 0], &[1],
        &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
    ).unwrap();
    let gb = build_gamma(prob.space()).unwrap();
    // drive to the failing point with the real solver
    let cfg = SolverConfig { seed: 0, lanczos_rank: 0, max_outer_iters: 15, ..Default::default() };
    let res = optimize(&prob, &cfg).unwrap();
    let u = res.u_final;
    let d = u.dim();
    let frame_r = RotatedFrame::build(&u, &gb);
    let frame_f = build_frame(&u, &prob);
    let grad_r = frame_r.grad_residual(&gb);
    println!("R = {:.6e}, |z| = {:.6}", frame_r.residual(), frame_f.z.norm());

    // rebuild H_N the same way the solver does (via public pieces): CG by hand
    let nn = 16.0;
    let mut b = grad_r.mapv(|x| x * (-(nn - 1.0) / 4.0));
    frame_f.project_tangent_inplace(&mut b);
    let apply = |x: &ndarray::Array2<C64>| {
        let mut v = x.clone();
        frame_f.project_tangent_inplace(&mut v);
        let mut out = frame_r.gauss_newton_apply(&gb, &v);
        frame_f.project_tangent_inplace(&mut out);
        out
    };
    let inner = |a: &ndarray::Array2<C64>, bb: &ndarray::Array2<C64>| -> f64 {
        a.iter().zip(bb.iter()).map(|(x, y)| (x.conj() * y).re).sum()
    };
    let mut x = ndarray::Array2::<C64>::zeros((d, d));
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = inner(&r, &r);
    for _ in 0..50 {
        let ap = apply(&p);
        let curv = inner(&p, &ap);
        if curv <= 0.0 { println!("negative curvature!"); break; }
        let alpha = rs / curv;
        x.scaled_add(C64::new(alpha, 0.0), &p);
        r.scaled_add(C64::new(-alpha, 0.0), &ap);
        let rs2 = inner(&r, &r);
        if rs2.sqrt() < 1e-3 * rs.sqrt() { break; }
        let beta = rs2 / rs;
        let mut pn = r.clone(); pn.scaled_add(C64::new(beta, 0.0), &p);
        p = pn; rs = rs2;
    }
    let h_n = x;
    println!("|H_N| = {:.4e}", linalg::frob_norm(&h_n));

    // analytic slope pieces
    let d_r = { let prod = linalg::matmul(&grad_r.view(), &h_n.view()); (0..d).map(|q| prod[[q,q]]).sum::<C64>().re };
    let t = h_n.slice(s![1.., 0]);
    let dot: C64 = frame_f.h.iter().zip(t.iter()).map(|(a, bb)| a.conj() * bb).sum();
    let dz2 = 2.0 * frame_f.z.norm() * dot.re;
    println!("analytic dR = {d_r:.6e}, analytic dz2 = {dz2:.6e}");

    // realized curve via apply_update (exact Cayley)
    let t_col = ndarray::Array1::from_iter((1..d).map(|q| h_n[[q, 0]]));
    let phi = h_n[[0, 0]].re;
    let omega = h_n.slice(s![1.., 1..]).to_owned();
    for tau in [1e-3, 1e-4, 1e-5, 1e-6] {
        let step = UpdateStep { t_column: t_col.mapv(|v| v * tau), phi: phi * tau, omega: OmegaOp::Cayley { omega: omega.mapv(|v| v * tau) } };
        let u2 = apply_update(&u, &prob, &step).unwrap();
        let fr2 = RotatedFrame::build(&u2, &gb);
        let amp2 = success_amplitude(&u2, &prob);
        let fd_r = (fr2.residual() - frame_r.residual()) / tau;
        let fd_z = (amp2.probability - frame_f.z.norm_sqr()) / tau;
        println!("tau {tau:-9.1e}: fd dR = {fd_r:.6e}, fd dz2 = {fd_z:.6e}");
    }
    // also the pure rotation exp(i tau X) for comparison
    for tau in [1e-4f64, 1e-5] {
        let rot = linalg::exp_i_hermitian(&h_n.mapv(|v| v * tau));
        let um = linalg::matmul(&u.matrix().view(), &rot.view());
        let u2 = herald_core::fock::FockUnitary::new(um, std::sync::Arc::clone(prob.space())).unwrap();
        let fr2 = RotatedFrame::build(&u2, &gb);
        let fd_r = (fr2.residual() - frame_r.residual()) / tau;
        println!("exp path tau {tau:-9.1e}: fd dR = {fd_r:.6e}");
    }
}
