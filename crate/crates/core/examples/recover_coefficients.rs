//! End to end: recover constant nonlinear coefficient tensors from
//! simulated partial boundary measurements by pairing linearized
//! measurement differences against biharmonic test functions.
//!
//! Run with `cargo run --release --example recover_coefficients`.

use bihlab::cgo::CutoffSpec;
use bihlab::experiment::standard_test_pool;
use bihlab::forward::{CoefficientModel, PicardOptions, SemilinearDn};
use bihlab::grid::GridDomain;
use bihlab::reconstruct::{recover_w, taylor_cascade, CoefficientBasis, RecoverySettings};
use bihlab::solver::ClampedBilaplacian;
use bihlab::tensor::SymTensor;
use num_complex::Complex64;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn main() -> bihlab::Result<()> {
    let grid = GridDomain::new(31)?;
    let op = ClampedBilaplacian::assemble(&grid)?;
    let options = PicardOptions::default();
    let basis = CoefficientBasis::constants(&grid, &[0, 1, 2, 3])?;
    let cutoff = CutoffSpec::for_gamma(&grid, 0.25)?;
    let tests = standard_test_pool(&op, &cutoff, 16, 6, 43)?;
    let settings = RecoverySettings {
        tuple_count: 80,
        ..Default::default()
    };

    // truth: quadratic scalar and vector perturbations; reference: zero
    let mut truth = CoefficientModel::zero(&grid);
    truth.push_constant(0, 1, SymTensor::scalar(2, c(1.0)))?;
    truth.push_constant(1, 1, SymTensor::basis_vector(2, 0).scale(c(0.5)))?;
    let reference = CoefficientModel::zero(&grid);
    let dn_true = SemilinearDn { op: &op, model: &truth, options };
    let dn_ref = SemilinearDn { op: &op, model: &reference, options };

    println!("single-stage recovery (order-1 Taylor coefficients):");
    let (w, report) = recover_w(&dn_true, &dn_ref, 2, &basis, &tests, &settings)?;
    let mean = w.mean_tensors();
    let a0 = mean[0].as_ref().unwrap().get(&[]);
    let a1 = mean[1].as_ref().unwrap();
    println!("  scalar: {:.4} (truth 1.0)", a0.re);
    println!(
        "  vector: ({:.4}, {:.4}) (truth (0.5, 0))",
        a1.get(&[0]).re,
        a1.get(&[1]).re
    );
    println!(
        "  fit residual {:.2e}, condition {:.1e}, lambda {:.1e}",
        report.residual_rel, report.condition, report.lambda
    );

    println!("\ntwo-stage cascade (quadratic + cubic scalar truth):");
    let mut truth2 = CoefficientModel::zero(&grid);
    truth2.push_constant(0, 1, SymTensor::scalar(2, c(1.0)))?;
    truth2.push_constant(0, 2, SymTensor::scalar(2, c(1.0)))?;
    let dn_true2 = SemilinearDn { op: &op, model: &truth2, options };
    let stages = taylor_cascade(
        &dn_true2,
        &op,
        CoefficientModel::zero(&grid),
        options,
        3,
        &basis,
        &tests,
        &settings,
    )?;
    for (k, (w, rep)) in stages.iter().enumerate() {
        let mean = w.mean_tensors();
        let a0 = mean[0].as_ref().unwrap().get(&[]);
        println!(
            "  order {}: scalar {:.4} (truth 1.0), residual {:.2e}",
            k + 1,
            a0.re,
            rep.residual_rel
        );
    }
    Ok(())
}
