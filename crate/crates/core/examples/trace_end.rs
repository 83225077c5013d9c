use herald_core::herald::*;
use herald_core::solver::*;
use herald_core::C64;

fn main() {
    let prob = HeraldingProblem::new(
        4, 3, &[1, 1, 1, 0], &[1],
        &[(vec![0, 1, 1], C64::new(1.0, 0.0))],
    ).unwrap();
    let cfg = SolverConfig { seed: 0, lanczos_rank: 0, ..Default::default() };
    let res = optimize(&prob, &cfg).unwrap();
    println!("status {:?} iters {} P {:.3e}", res.status, res.iterations, res.p_final);
    for (i, rec) in res.history.iter().enumerate() {
        println!("it {i:3}  R { : >9.3e}  P {:.3e}  |HN| {:.3e}  |HT| {:.3e}  tau {:.3e}", rec.residual, rec.probability, rec.normal_norm, rec.tangent_norm, rec.step_length);
    }
}
