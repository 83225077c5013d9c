use herald_core::feasibility::{build_gamma, optical_residual, RotatedFrame};
use herald_core::herald::*;
use herald_core::solver::*;
use herald_core::linalg;
use herald_core::C64;
use std::sync::Arc;

fn main() {
    let r = C64::new(1.0/f64::sqrt(2.0), 0.0);
    let bell5 = HeraldingProblem::new(5, 4, &[1,1,1,1,0], &[2], &[(vec![1,0,1,0], r), (vec![0,1,0,1], r)]).unwrap();
    let gb = build_gamma(bell5.space()).unwrap();
    // drive to feasibility first
    let cfg = SolverConfig { seed: 3, max_outer_iters: 120, ..Default::default() };
    let res = optimize(&bell5, &cfg).unwrap();
    let u = res.u_final;
    println!("base: R = {:.3e}, P = {:.6}, fid = {:.3e}", res.r_final, res.p_final, fidelity_residual_norm(&u, &bell5));
    let (_, h_t, _) = compute_steps(&bell5, &gb, &u, &cfg);
    println!("|H_T| = {:.3e}", linalg::frob_norm(&h_t));
    for tau in [0.03f64, 0.1, 0.3, 1.0] {
        let rot = linalg::exp_i_hermitian(&h_t.mapv(|x| x * tau));
        let um = linalg::matmul(&u.matrix().view(), &rot.view());
        let u2 = herald_core::fock::FockUnitary::new(um, Arc::clone(bell5.space())).unwrap();
        let fid = fidelity_residual_norm(&u2, &bell5);
        let (r2, _) = optical_residual(&u2, &gb);
        let p2 = success_amplitude(&u2, &bell5).probability;
        println!("exp path tau {tau}: fid-res = {fid:.3e}, R = {r2:.3e}, P = {p2:.6}");
    }
}
