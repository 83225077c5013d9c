use herald_core::feasibility::build_gamma;
use herald_core::herald::*;
use herald_core::solver::*;
use herald_core::linalg;
use herald_core::C64;

fn main() {
    let prob = HeraldingProblem::new(
        4, 3, &[1, 1, 1, 0], &[1],
        &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
    ).unwrap();
    let gb = build_gamma(prob.space()).unwrap();
    let cfg = SolverConfig { seed: 0, lanczos_rank: 0, ..Default::default() };
    let res = optimize(&prob, &cfg).unwrap();
    let (h_n, h_t, dof) = compute_steps(&prob, &gb, &res.u_final, &cfg);
    println!("|H_N| = {:.3e}  |H_T| = {:.3e}  dof = {dof}", linalg::frob_norm(&h_n), linalg::frob_norm(&h_t));
}
