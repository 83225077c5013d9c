use herald_core::feasibility::{build_gamma, RotatedFrame};
use herald_core::herald::*;
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
    for _ in 0..40 {
        let ap = apply(&p);
        let curv = inner(&p, &ap);
        if curv <= 0.0 { break; }
        let alpha = rs / curv;
        x.scaled_add(C64::new(alpha, 0.0), &p);
        r.scaled_add(C64::new(-alpha, 0.0), &ap);
        let rs2 = inner(&r, &r);
        if rs2.sqrt() < 1e-8 * rs.sqrt() { break; }
        p = { let mut pn = r.clone(); pn.scaled_add(C64::new(rs2/rs, 0.0), &p); pn };
        rs = rs2;
    }
    let t_col = ndarray::Array1::from_iter((1..d).map(|q| x[[q, 0]]));
    let phi = x[[0, 0]].re;
    let omega = x.slice(s![1.., 1..]).to_owned();
    for tau in [1.0f64, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
        let step = UpdateStep { t_column: t_col.mapv(|v| v * tau), phi: phi * tau, omega: OmegaOp::Cayley { omega: omega.mapv(|v| v * tau) } };
        let u2 = apply_update(&u, &prob, &step).unwrap();
        let fr2 = RotatedFrame::build(&u2, &gb);
        let p2 = success_amplitude(&u2, &prob).probability;
        println!("tau {tau:6.1}: R = {:.6e}   P = {:.6}", fr2.residual(), p2);
    }
}
