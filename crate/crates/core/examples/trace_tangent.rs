use herald_core::feasibility::{build_gamma, RotatedFrame};
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
    let u = res.u_final;
    let frame_r = RotatedFrame::build(&u, &gb);
    let frame_f = build_frame(&u, &prob);
    println!("R = {:.3e}  |z| = {:.3e}  h_norm2 = {:.6}", frame_r.residual(), frame_f.z.norm(), frame_f.h_norm_sqr);
    println!("rank V = {}, out_dim = {}", frame_f.rank, prob.output_dim());
    // manual: overlap of each gamma_bar column-0 with h
    let d = u.dim();
    let n = 4;
    let mut max_overlap = 0.0f64;
    for nn in 0..n { for mm in 0..n {
        let col = frame_r.gamma_bar_column0(&gb, nn, mm);
        let dot: C64 = frame_f.h.iter().zip(col.iter().skip(1)).map(|(a,b)| a.conj()*b).sum();
        max_overlap = max_overlap.max(dot.norm());
    }}
    println!("max |<h, gamma_bar col0>| = {:.3e}", max_overlap);
    // admissibility: how much of the gamma_bar col0 lies in forbidden V\h?
    // project a sample col onto v_basis
    let col = frame_r.gamma_bar_column0(&gb, 0, 1);
    let t = ndarray::Array1::from_iter(col.iter().skip(1).cloned());
    let adm = frame_f.admissible_column(&t);
    let t_norm = t.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut diff = 0.0;
    for (a, b) in adm.iter().zip(t.iter()) { diff += (a - b).norm_sqr(); }
    println!("gamma_bar(0,1) col0: |t| = {:.3e}, |(1-Pi)t| = {:.3e}", t_norm, diff.sqrt());
    let _ = (d, linalg::frob_norm(u.matrix()));
}
