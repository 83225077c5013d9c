use herald_core::feasibility::{build_gamma, RotatedFrame};
use herald_core::herald::*;
use herald_core::linalg;
use herald_core::C64;
use ndarray::s;

fn main() {
    let prob = HeraldingProblem::new(
        4, 3, &[1, 1, 1, 0], &[1],
        &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
    ).unwrap();
    let gb = build_gamma(prob.space()).unwrap();
    let u = initial_feasible_unitary(&prob, 0);
    let d = u.dim();
    let frame_r = RotatedFrame::build(&u, &gb);
    let frame_f = build_frame(&u, &prob);
    let grad_r = frame_r.grad_residual(&gb);
    println!("R0 = {:.6e}", frame_r.residual());
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
    let bn = inner(&b, &b).sqrt();
    let mut x = ndarray::Array2::<C64>::zeros((d, d));
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = inner(&r, &r);
    for it in 0..400 {
        let ap = apply(&p);
        let curv = inner(&p, &ap);
        if curv <= 1e-16 * rs { println!("curvature breakdown at {it}, curv {curv:.3e}"); break; }
        let alpha = rs / curv;
        x.scaled_add(C64::new(alpha, 0.0), &p);
        r.scaled_add(C64::new(-alpha, 0.0), &ap);
        let rs2 = inner(&r, &r);
        if [1usize, 3, 10, 30, 100, 200, 399].contains(&it) {
            // evaluate R at tau = 1 along current x
            let t_col = ndarray::Array1::from_iter((1..d).map(|q| x[[q, 0]]));
            let phi = x[[0, 0]].re;
            let omega = x.slice(s![1.., 1..]).to_owned();
            let step = UpdateStep { t_column: t_col, phi, omega: OmegaOp::Cayley { omega } };
            let u2 = apply_update(&u, &prob, &step).unwrap();
            let fr2 = RotatedFrame::build(&u2, &gb);
            println!("cg it {it:3}: relres {:.2e} |X| {:.3e}  R(tau=1) = {:.6e}", rs2.sqrt()/bn, linalg::frob_norm(&x), fr2.residual());
        }
        if rs2.sqrt() < 1e-10 * bn { println!("converged at {it}"); break; }
        let beta = rs2 / rs;
        let mut pn = r.clone(); pn.scaled_add(C64::new(beta, 0.0), &p);
        p = pn; rs = rs2;
    }
}
