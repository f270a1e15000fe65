//! The semilinear forward problem and its partial boundary measurements:
//! fixed-point solve, contraction log, agreement with a full Newton
//! solve, and measurement extraction on the accessible boundary part.
//!
//! Run with `cargo run --release --example forward_dn`.

use bihlab::forward::{dn_map, oracle, solve_semilinear, CoefficientModel, PicardOptions};
use bihlab::grid::GridDomain;
use bihlab::reconstruct::{RandomDataParams, TestFunctionSet};
use bihlab::solver::ClampedBilaplacian;
use bihlab::tensor::SymTensor;
use num_complex::Complex64;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn main() -> bihlab::Result<()> {
    let grid = GridDomain::new(15)?;
    let op = ClampedBilaplacian::assemble(&grid)?;
    let mut model = CoefficientModel::zero(&grid);
    model.push_constant(0, 1, SymTensor::scalar(2, c(1.0)))?;
    model.push_constant(1, 1, SymTensor::basis_vector(2, 1))?;

    // admissible data supported on the accessible part
    let pool = TestFunctionSet::random(&op, 1, 11, &RandomDataParams::default())?;
    let data = pool.members[0].cauchy.scale(c(1e-2));

    let options = PicardOptions::default();
    let (u, log) = solve_semilinear(&op, &model, &data, &options)?;
    println!("fixed-point solve:");
    println!("  iterations {}  contraction ratio {:.3e}", log.iterations, log.contraction_ratio);
    for (k, d) in log.updates.iter().enumerate() {
        println!("    update {k}: {d:.3e}");
    }

    let newton = oracle::newton_solve(&op, &model, &data, 1e-12, 12)?;
    println!("  gap to the Newton oracle: {:.3e}", u.sub(&newton).norm_inf());

    let dn = dn_map(&op, &model, &data, &options)?;
    println!("\nmeasurements on the accessible part ({} samples):", dn.samples.len());
    for s in dn.samples.iter().step_by(dn.samples.len() / 6) {
        println!(
            "  {:>6} s={:.3}: d2 = {:+.3e}{:+.3e}i, d3 = {:+.3e}{:+.3e}i",
            s.edge.name(),
            s.arclength,
            s.d2.re,
            s.d2.im,
            s.d3.re,
            s.d3.im
        );
    }
    Ok(())
}
