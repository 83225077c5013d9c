use herald_core::circuits::bell6_problem;
use herald_core::solver::*;

fn main() {
    let prob = bell6_problem();
    let cfg = SolverConfig { seed: 0, max_outer_iters: 40, ..Default::default() };
    let res = optimize(&prob, &cfg).unwrap();
    for (i, rec) in res.history.iter().enumerate() {
        println!("it {i:3}  R {:9.3e}  P {:.3e}  |HN| {:.3e}  |HT| {:.3e}  tau {:.3e}", rec.residual, rec.probability, rec.normal_norm, rec.tangent_norm, rec.step_length);
    }
}
