use herald_core::circuits::bell6_problem;
use herald_core::feasibility::{build_gamma, RotatedFrame};
use herald_core::herald::*;
use herald_core::solver::*;
use std::time::Instant;

fn main() {
    let prob = bell6_problem();
    let gb = build_gamma(prob.space()).unwrap();
    let u = initial_feasible_unitary(&prob, 0);
    // time the pieces
    let t = Instant::now();
    let frame = RotatedFrame::build(&u, &gb);
    println!("frame build: {:?}", t.elapsed());
    let t = Instant::now();
    let g = frame.grad_residual(&gb);
    println!("grad_residual: {:?}", t.elapsed());
    let t = Instant::now();
    let gn = frame.gauss_newton_apply(&gb, &g);
    println!("gauss_newton_apply: {:?}", t.elapsed());
    let t = Instant::now();
    let _eig = herald_core::linalg::eigh(&gn);
    println!("eigh(126): {:?}", t.elapsed());
    let cfg = SolverConfig { seed: 0, ..Default::default() };
    let t = Instant::now();
    let (hn, ht, dof) = compute_steps(&prob, &gb, &u, &cfg);
    println!("compute_steps (cg+tangent): {:?}  |hn| {:.3} |ht| {:.3} dof {}", t.elapsed(), herald_core::linalg::frob_norm(&hn), herald_core::linalg::frob_norm(&ht), dof);
    // one full run with short budget
    let cfg2 = SolverConfig { seed: 0, max_outer_iters: 30, ..Default::default() };
    let t = Instant::now();
    let res = optimize(&prob, &cfg2).unwrap();
    println!("30 iters: {:?} -> R {:.2e} P {:.4} ({} iters)", t.elapsed(), res.r_final, res.p_final, res.iterations);
}
