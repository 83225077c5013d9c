use herald_core::circuits::bell6_problem;
use herald_core::solver::*;
use std::time::Instant;

fn main() {
    let prob = bell6_problem();
    let t0 = Instant::now();
    for seed in 0..8u64 {
        let cfg = SolverConfig { seed, ..Default::default() };
        let res = optimize(&prob, &cfg).unwrap();
        println!("seed {seed}: {:22} iters {:3}  R {:9.2e}  P {:.6}  dof {}  {}ms",
            format!("{:?}", res.status), res.iterations, res.r_final, res.p_final, res.tangent_dof, res.wall_ms);
    }
    println!("total {:?}", t0.elapsed());
}
