use herald_core::herald::HeraldingProblem;
use herald_core::solver::*;
use herald_core::C64;
use std::time::Instant;

fn main() {
    let toy = HeraldingProblem::new(4, 3, &[1,1,1,0], &[1], &[(vec![0,1,1], C64::new(1.0,0.0))]).unwrap();
    let r = C64::new(1.0/f64::sqrt(2.0), 0.0);
    let bell5 = HeraldingProblem::new(5, 4, &[1,1,1,1,0], &[2], &[(vec![1,0,1,0], r), (vec![0,1,0,1], r)]).unwrap();
    for gate in [f64::INFINITY, 0.05] {
        let t = Instant::now();
        let mut feas = 0; let mut hi = 0; let mut third = 0; let mut iters_tot = 0;
        for seed in 0..16u64 {
            let cfg = SolverConfig { seed, tangent_gate: gate, ..Default::default() };
            let res = optimize(&toy, &cfg).unwrap();
            if res.r_final <= 1e-12 { feas += 1; }
            if res.p_final >= 0.999 { hi += 1; }
            if (res.p_final - 1.0/3.0).abs() < 1e-3 { third += 1; }
            iters_tot += res.iterations;
        }
        println!("toy gate {gate:8.2e}: feas {feas}/16 hi {hi} third {third} avg-iters {} in {:?}", iters_tot/16, t.elapsed());
        let t = Instant::now();
        let mut feas = 0; let mut ninth = 0; let mut zero = 0; let mut iters_tot = 0;
        for seed in 0..10u64 {
            let cfg = SolverConfig { seed, tangent_gate: gate, ..Default::default() };
            let res = optimize(&bell5, &cfg).unwrap();
            if res.r_final <= 1e-12 { feas += 1; }
            if (res.p_final - 1.0/9.0).abs() < 1e-4 { ninth += 1; }
            if res.p_final < 1e-4 { zero += 1; }
            iters_tot += res.iterations;
        }
        println!("bell5 gate {gate:8.2e}: feas {feas}/10 ninth {ninth} zero {zero} avg-iters {} in {:?}", iters_tot/10, t.elapsed());
    }
}
