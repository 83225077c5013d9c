use herald_core::circuits::bell6_problem;
use herald_core::solver::*;
use std::time::Instant;

fn main() {
    let prob = bell6_problem();
    for gate in [f64::INFINITY, 0.5, 0.05] {
        let cfg = SolverConfig { seed: 0, max_outer_iters: 60, tangent_gate: gate, ..Default::default() };
        let t = Instant::now();
        let res = optimize(&prob, &cfg).unwrap();
        println!("gate {gate:8.2e}: {:?} iters {} R {:.3e} P {:.4} in {:?}", res.status, res.iterations, res.r_final, res.p_final, t.elapsed());
        for (i, rec) in res.history.iter().enumerate() {
            if i % 15 == 0 { println!("   it {i:3}: R {:.3e} P {:.3e} tau {:.2e}", rec.residual, rec.probability, rec.step_length); }
        }
    }
}
