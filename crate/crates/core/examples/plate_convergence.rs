//! Manufactured-solution study of the clamped bilaplacian solver: two
//! smooth solutions converge at second order; a quartic with vanishing
//! scheme truncation is reproduced to solver accuracy.
//!
//! Run with `cargo run --release --example plate_convergence`.

use std::f64::consts::PI;

use bihlab::grid::{CauchyData, GridDomain, ScalarField};
use bihlab::solver::ClampedBilaplacian;
use num_complex::Complex64;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn max_err(
    n: usize,
    exact: impl Fn(f64, f64) -> f64,
    source: impl Fn(f64, f64) -> f64,
    g: impl Fn(f64, f64) -> f64,
) -> bihlab::Result<f64> {
    let grid = GridDomain::new(n)?;
    let op = ClampedBilaplacian::assemble(&grid)?;
    let src = ScalarField::from_fn(&grid, |x, y| c(source(x, y)));
    let data = CauchyData::from_fns(&grid, |x, y| c(exact(x, y)), |x, y| c(g(x, y)));
    let u = op.solve(Some(&src), &data)?;
    let mut err = 0.0f64;
    for iy in 1..=n as isize {
        for ix in 1..=n as isize {
            let (x, y) = grid.coords(ix as usize, iy as usize);
            err = err.max((u.at(ix, iy) - c(exact(x, y))).norm());
        }
    }
    Ok(err)
}

fn main() -> bihlab::Result<()> {
    let sizes = [15usize, 31, 63];

    println!("u = sin^2(pi x) sin^2(pi y), homogeneous clamped data:");
    let mut prev = None;
    for &n in &sizes {
        let e = max_err(
            n,
            |x, y| (PI * x).sin().powi(2) * (PI * y).sin().powi(2),
            |x, y| {
                let (a, b) = (2.0 * PI * x, 2.0 * PI * y);
                4.0 * PI.powi(4) * (4.0 * a.cos() * b.cos() - a.cos() - b.cos())
            },
            |_, _| 0.0,
        )?;
        let order = prev.map(|p: f64| (p / e).log2());
        println!(
            "  N={n:>3}: max error {e:.3e}{}",
            order.map(|o| format!("  order {o:.2}")).unwrap_or_default()
        );
        prev = Some(e);
    }

    println!("u = sin(pi x) sin(pi y), nonzero normal-derivative data:");
    prev = None;
    for &n in &sizes {
        let e = max_err(
            n,
            |x, y| (PI * x).sin() * (PI * y).sin(),
            |x, y| 4.0 * PI.powi(4) * (PI * x).sin() * (PI * y).sin(),
            |x, y| {
                let dx = PI * (PI * x).cos() * (PI * y).sin();
                let dy = PI * (PI * x).sin() * (PI * y).cos();
                if x == 0.0 {
                    -dx
                } else if x == 1.0 {
                    dx
                } else if y == 0.0 {
                    -dy
                } else {
                    dy
                }
            },
        )?;
        let order = prev.map(|p: f64| (p / e).log2());
        println!(
            "  N={n:>3}: max error {e:.3e}{}",
            order.map(|o| format!("  order {o:.2}")).unwrap_or_default()
        );
        prev = Some(e);
    }

    println!("u = x^2 y^2 (zero scheme truncation, reproduced exactly):");
    for &n in &sizes {
        let e = max_err(
            n,
            |x, y| x * x * y * y,
            |_, _| 8.0,
            |x, y| {
                if x == 0.0 {
                    0.0
                } else if x == 1.0 {
                    2.0 * y * y
                } else if y == 0.0 {
                    0.0
                } else {
                    2.0 * x * x
                }
            },
        )?;
        println!("  N={n:>3}: max error {e:.3e}");
    }
    Ok(())
}
