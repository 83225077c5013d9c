use herald_core::feasibility::{build_gamma, RotatedFrame};
use herald_core::herald::*;
use herald_core::solver::*;
use herald_core::C64;

fn main() {
    let prob = HeraldingProblem::new(
        4, 3, &[1, 1, 1, 0], &[1],
        &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
    ).unwrap();
    for seed in [0u64, 1, 2, 3] {
        let cfg = SolverConfig { seed, lanczos_rank: 0, ..Default::default() };
        let res = optimize(&prob, &cfg).unwrap();
        println!("seed {seed}: status {:?} iters {} R {:.3e} P {:.8}", res.status, res.iterations, res.r_final, res.p_final);
        for (i, rec) in res.history.iter().enumerate() {
            if i % 10 == 0 || i + 3 > res.history.len() {
                println!("  it {i:3}  R {:.3e}  P {:.6e}  |HN| {:.3e}  |HT| {:.3e}  tau {:.3e}", rec.residual, rec.probability, rec.normal_norm, rec.tangent_norm, rec.step_length);
            }
        }
    }
    // direction check: does a tangent step increase |z|?
    let gb = build_gamma(prob.space()).unwrap();
    let cfg = SolverConfig { seed: 0, lanczos_rank: 0, max_outer_iters: 60, ..Default::default() };
    let res = optimize(&prob, &cfg).unwrap();
    let u = res.u_final;
    let fr = RotatedFrame::build(&u, &gb);
    println!("final R {:.3e} z {:.3e}", fr.residual(), success_amplitude(&u, &prob).z.norm());
}
