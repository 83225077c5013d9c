use herald_core::herald::HeraldingProblem;
use herald_core::solver::{baseline_pfp, BaselineConfig};
use herald_core::C64;

fn main() {
    let prob = HeraldingProblem::new(2, 1, &[1, 0], &[], &[(vec![1, 0], C64::new(1.0, 0.0))]).unwrap();
    let cfg = BaselineConfig { seed: 3, ..Default::default() };
    let res = baseline_pfp(&prob, &cfg).unwrap();
    println!("identity toy: F = {:.8}, P = {:.8}, iters {}, |grad| {:.3e}, converged {}", res.fidelity, res.probability, res.iterations, res.grad_norm, res.converged);
    let toy = HeraldingProblem::new(4, 3, &[1,1,1,0], &[1], &[(vec![0,1,1], C64::new(1.0,0.0))]).unwrap();
    for seed in 100..104u64 {
        let cfg = BaselineConfig { seed, ..Default::default() };
        let res = baseline_pfp(&toy, &cfg).unwrap();
        println!("toy seed {seed}: F = {:.8}, P = {:.8}, iters {}, |grad| {:.3e}", res.fidelity, res.probability, res.iterations, res.grad_norm);
    }
}
