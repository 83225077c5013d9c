use herald_core::herald::*;
use herald_core::solver::*;
use herald_core::C64;
use std::time::Instant;

fn main() {
    let toy = HeraldingProblem::new(4, 3, &[1,1,1,0], &[1], &[(vec![0,1,1], C64::new(1.0,0.0))]).unwrap();
    let r = C64::new(1.0/f64::sqrt(2.0), 0.0);
    let bell5 = HeraldingProblem::new(5, 4, &[1,1,1,1,0], &[2], &[(vec![1,0,1,0], r), (vec![0,1,0,1], r)]).unwrap();
    println!("=== toy4, 16 seeds ===");
    let t0 = Instant::now();
    let mut feas = 0; let mut p_hi = 0; let mut third = 0;
    for seed in 0..16u64 {
        let cfg = SolverConfig { seed, ..Default::default() };
        let res = optimize(&toy, &cfg).unwrap();
        if res.r_final <= 1e-12 { feas += 1; }
        if res.p_final >= 0.999 { p_hi += 1; }
        if (res.p_final - 1.0/3.0).abs() < 1e-3 { third += 1; }
        println!("seed {seed:2}: {:22} iters {:3}  R {:9.2e}  P {:.6}  {}ms", format!("{:?}", res.status), res.iterations, res.r_final, res.p_final, res.wall_ms);
    }
    println!("toy: feasible {feas}/16, P>=0.999: {p_hi}, near 1/3: {third}, total {:?}", t0.elapsed());
    println!("=== bell5, 6 seeds ===");
    let t0 = Instant::now();
    for seed in 0..6u64 {
        let cfg = SolverConfig { seed, ..Default::default() };
        let res = optimize(&bell5, &cfg).unwrap();
        println!("seed {seed}: {:22} iters {:3}  R {:9.2e}  P {:.6}  {}ms", format!("{:?}", res.status), res.iterations, res.r_final, res.p_final, res.wall_ms);
    }
    println!("bell5 total {:?}", t0.elapsed());
}
