//! Symmetric tensor algebra: trace-free decomposition and pairings with
//! null directions.
//!
//! Run with `cargo run --example tensor_algebra`.

use bihlab::null_variety::NullVector;
use bihlab::tensor::{i_delta, j_delta, trace_free_decompose, SymTensor};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bihlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("trace-free decomposition round trips, A = A_tf + i_delta(a):");
    for n in 2..=6 {
        for rank in [2usize, 3] {
            let mut a = SymTensor::zeros(n, rank);
            for idx in bihlab::tensor::sorted_multi_indices(n, rank) {
                a.set(&idx, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
            }
            let (tf, iso) = trace_free_decompose(&a)?;
            let rebuilt = tf.add(&i_delta(&iso)?);
            println!(
                "  n={n} rank={rank}: reassembly {: <9.2e} trace of A_tf {:.2e}",
                rebuilt.sub(&a).norm_inf(),
                j_delta(&tf).norm_inf()
            );
        }
    }

    println!("\nisotropic tensors are invisible along null directions:");
    let a = SymTensor::basis_vector(3, 1);
    let iso = i_delta(&a)?;
    for (label, aa, bb) in [
        ("i e1 + e2", vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]),
        ("i e1 + e3", vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]),
        (
            "i e2 + (e1+e3)/sqrt2",
            vec![0.0, 1.0, 0.0],
            vec![std::f64::consts::FRAC_1_SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2],
        ),
    ] {
        let xi = NullVector::from_orthogonal_pair(&aa, &bb)?;
        let p = iso.eval_pairing(xi.components());
        println!("  <i_delta(e2), xi^3> at xi = {label}: {:.2e}", p.norm());
    }

    println!("\na generic tensor is not:");
    let mut f = SymTensor::zeros(3, 3);
    f.set(&[0, 1, 2], Complex64::new(1.0, 0.0));
    let xi = NullVector::from_orthogonal_pair(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])?;
    println!(
        "  <E_123, xi^3> at xi = i e1 + e2: {:.3}",
        f.eval_pairing(xi.components()).norm()
    );
    Ok(())
}
