use crossimpact::linalg::*;
use crossimpact::kyle::*;
use nalgebra::{DMatrix, DVector};

fn main() {
    let sigma = SymMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
    let omega = SymMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.8]));
    let params = KyleParams::new(1.0, 1e-20).unwrap();
    let e2 = DVector::from_vec(vec![0.0, 1.0]);
    let eps: Vec<f64> = vec![1e-2, 1e-3, 1e-4, 1e-5];
    let report = check_cross_stability(&sigma, &omega, &[e2], &eps, &params).unwrap();
    for p in &report.points {
        println!("eps={:e} off={:.3e} conv={:.3e}", p.eps, p.off_block_norm, p.convergence_error);
    }
    println!("limit_norm={:.3e}", report.limit_norm);
    // direct lambda at eps=1e-4
    let e = 1e-4f64;
    let omega_eps = SymMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.8*e*e]));
    let lam = kyle_lambda(&sigma, &omega_eps, &params).unwrap();
    println!("lambda = {:?}", lam.as_matrix().as_slice());
}
