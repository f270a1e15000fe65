//! Batch experiment driver behind the command-line interface: each
//! subcommand wires a module pipeline to a config, writes machine-readable
//! results (JSON/CSV) plus a reproducibility manifest, and reports
//! pass/fail for its built-in checks.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::cgo::{
    build_cgo, remainder_decay_profile, symbol_cascade, CutoffSpec, PointCoefficients,
};
use crate::config::{config_hash, ExperimentConfig};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::forward::{
    solution_mixed_difference, CoefficientModel, DiffScheme, ModelSpec, PicardOptions,
    SemilinearDn, oracle,
};
use crate::grid::{CauchyData, GridDomain, ScalarField};
use crate::null_variety::{
    nullspace_certificate, recover_general, NullVector, ProbeSet,
};
use crate::reconstruct::{
    boundary_functional, taylor_cascade, CoefficientBasis, RandomDataParams,
    RecoverySettings, TestFunctionSet, WDifference,
};
use crate::solver::ClampedBilaplacian;
use crate::tensor::{
    i_delta, sym_len, trace_free_decompose, SymTensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    TensorSelftest,
    Solve,
    CgoDecay,
    LocalExtract,
    Linearize,
    Invert,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::TensorSelftest => "tensor-selftest",
            Subcommand::Solve => "solve",
            Subcommand::CgoDecay => "cgo-decay",
            Subcommand::LocalExtract => "local-extract",
            Subcommand::Linearize => "linearize",
            Subcommand::Invert => "invert",
        }
    }
}

pub struct RunContext {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub verbose: bool,
}

/// Outcome of a run: `pass` reflects the subcommand's built-in checks.
pub struct RunOutcome {
    pub pass: bool,
    pub results: serde_json::Value,
}

fn say(ctx: &RunContext, msg: &str) {
    if ctx.verbose {
        println!("[bihlab] {msg}");
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Run one subcommand end to end; results and the manifest land in the
/// output directory.
pub fn run(cmd: Subcommand, ctx: &RunContext) -> Result<RunOutcome> {
    ctx.config.validate()?;
    std::fs::create_dir_all(&ctx.out_dir)?;
    let started = Instant::now();
    let outcome = dispatch(cmd, ctx)?;
    let elapsed = started.elapsed();
    let manifest = json!({
        "subcommand": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": ctx.config.seed,
        "config_hash": config_hash(&ctx.config),
        "config": serde_json::to_value(&ctx.config)?,
        "pass": outcome.pass,
        "timing_seconds": elapsed.as_secs_f64(),
    });
    write_json(&ctx.out_dir.join("manifest.json"), &manifest)?;
    write_json(&ctx.out_dir.join("results.json"), &outcome.results)?;
    Ok(outcome)
}

fn dispatch(cmd: Subcommand, ctx: &RunContext) -> Result<RunOutcome> {
    match cmd {
        Subcommand::TensorSelftest => tensor_selftest(ctx),
        Subcommand::Solve => solve_study(ctx),
        Subcommand::CgoDecay => cgo_decay(ctx),
        Subcommand::LocalExtract => local_extract(ctx),
        Subcommand::Linearize => linearize(ctx),
        Subcommand::Invert => invert(ctx),
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymTensor {
    let entries = (0..sym_len(n, rank))
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    SymTensor::from_entries(n, rank, entries).expect("sized entries")
}

fn tensor_selftest(ctx: &RunContext) -> Result<RunOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    let cases = 200usize;
    let mut suites = Vec::new();

    say(ctx, "decomposition round trips");
    let mut worst = 0.0f64;
    for n in 2..=6 {
        for rank in [2usize, 3] {
            for _ in 0..cases {
                let a = random_tensor(&mut rng, n, rank);
                let (tf, iso) = trace_free_decompose(&a)?;
                let rebuilt = tf.add(&i_delta(&iso)?);
                worst = worst.max(rebuilt.sub(&a).norm_inf());
                worst = worst.max(crate::tensor::j_delta(&tf).norm_inf());
                let (_, iso2) = trace_free_decompose(&tf)?;
                worst = worst.max(iso2.norm_inf());
            }
        }
    }
    suites.push(json!({
        "name": "decomposition_round_trip",
        "cases": cases * 10,
        "worst": worst,
        "tolerance": 1e-12,
        "pass": worst < 1e-12,
    }));

    say(ctx, "null-variety recovery round trips");
    let mut worst_rec = 0.0f64;
    for n in 2..=6 {
        for m in 1..=3usize {
            // the factorized probe set is shared across samples for rank 3
            let ps3 = (m == 3).then(|| ProbeSet::standard(n, 3)).transpose()?;
            for _ in 0..cases {
                let t = random_tensor(&mut rng, n, m);
                let tf = if m == 1 {
                    t
                } else {
                    trace_free_decompose(&t)?.0
                };
                let rec = match &ps3 {
                    Some(ps) => {
                        let values = ps.evaluate(|xi| tf.eval_pairing(xi.components()));
                        ps.recover(&values)?
                    }
                    None => recover_general(|xi| tf.eval_pairing(xi.components()), n, m)?,
                };
                worst_rec = worst_rec
                    .max(rec.sub(&tf).norm_inf() / tf.norm_inf().max(f64::MIN_POSITIVE));
            }
        }
    }
    suites.push(json!({
        "name": "recovery_round_trip",
        "cases": cases * 15,
        "worst_relative": worst_rec,
        "tolerance": 1e-10,
        "pass": worst_rec < 1e-10,
    }));

    say(ctx, "nullspace certificates");
    let mut nullspace_ok = true;
    for n in 2..=6 {
        for m in 2..=3usize {
            let rep = nullspace_certificate(&ProbeSet::standard(n, m)?);
            nullspace_ok &= rep.nullity == rep.isotropic_dim;
            nullspace_ok &= rep.max_isotropic_residual < 1e-12;
        }
    }
    suites.push(json!({
        "name": "nullspace_certificate",
        "pass": nullspace_ok,
    }));

    say(ctx, "isotropic invisibility");
    let mut worst_inv = 0.0f64;
    for _ in 0..2000 {
        let n = rng.gen_range(2..=6);
        let a = random_tensor(&mut rng, n, 1);
        let iso = i_delta(&a)?;
        // random admissible direction from a Gram-Schmidt pair
        let raw_a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let raw_b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let na2: f64 = raw_a.iter().map(|v| v * v).sum();
        let dot: f64 = raw_a.iter().zip(&raw_b).map(|(x, y)| x * y).sum();
        let mut ortho: Vec<f64> = raw_b
            .iter()
            .zip(&raw_a)
            .map(|(y, x)| y - dot / na2 * x)
            .collect();
        let nb2: f64 = ortho.iter().map(|v| v * v).sum();
        if nb2 < 1e-12 {
            continue;
        }
        let s = (na2 / nb2).sqrt();
        for v in ortho.iter_mut() {
            *v *= s;
        }
        let mut dir_a = raw_a;
        if dir_a[0] < 0.0 {
            for v in dir_a.iter_mut() {
                *v = -*v;
            }
        }
        let xi = NullVector::from_orthogonal_pair(&dir_a, &ortho)?;
        let xi_norm: f64 = xi
            .components()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let p = iso.eval_pairing(xi.components()).norm();
        worst_inv = worst_inv.max(p / (iso.norm() * xi_norm.powi(3)));
    }
    suites.push(json!({
        "name": "isotropic_invisibility",
        "worst_scaled": worst_inv,
        "tolerance": 1e-12,
        "pass": worst_inv < 1e-12,
    }));

    let pass = suites.iter().all(|s| s["pass"].as_bool().unwrap_or(false));
    Ok(RunOutcome {
        pass,
        results: json!({ "suites": suites }),
    })
}

fn manufactured_errors(n: usize) -> Result<(f64, f64, f64)> {
    use std::f64::consts::PI;
    let grid = GridDomain::new(n)?;
    let op = ClampedBilaplacian::assemble(&grid)?;
    let c = |re: f64| Complex64::new(re, 0.0);

    // oscillatory solution with homogeneous data
    let sin2 = |x: f64, y: f64| (PI * x).sin().powi(2) * (PI * y).sin().powi(2);
    let src1 = ScalarField::from_fn(&grid, |x, y| {
        let (a, b) = (2.0 * PI * x, 2.0 * PI * y);
        c(4.0 * PI.powi(4) * (4.0 * a.cos() * b.cos() - a.cos() - b.cos()))
    });
    let u1 = op.solve(Some(&src1), &CauchyData::zeros(&grid))?;
    let mut e1 = 0.0f64;
    for iy in 1..=n as isize {
        for ix in 1..=n as isize {
            let (x, y) = grid.coords(ix as usize, iy as usize);
            e1 = e1.max((u1.at(ix, iy) - c(sin2(x, y))).norm());
        }
    }

    // product solution exercising the normal-derivative data path
    let ss = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let src2 = ScalarField::from_fn(&grid, |x, y| c(4.0 * PI.powi(4) * ss(x, y)));
    let data2 = CauchyData::from_fns(
        &grid,
        |_, _| c(0.0),
        |x, y| {
            let dx = PI * (PI * x).cos() * (PI * y).sin();
            let dy = PI * (PI * x).sin() * (PI * y).cos();
            if x == 0.0 {
                c(-dx)
            } else if x == 1.0 {
                c(dx)
            } else if y == 0.0 {
                c(-dy)
            } else {
                c(dy)
            }
        },
    );
    let u2 = op.solve(Some(&src2), &data2)?;
    let mut e2 = 0.0f64;
    for iy in 1..=n as isize {
        for ix in 1..=n as isize {
            let (x, y) = grid.coords(ix as usize, iy as usize);
            e2 = e2.max((u2.at(ix, iy) - c(ss(x, y))).norm());
        }
    }

    // quartic with zero scheme truncation: reproduced to solver accuracy
    let src3 = ScalarField::from_fn(&grid, |_, _| c(8.0));
    let data3 = CauchyData::from_fns(
        &grid,
        |x, y| c(x * x * y * y),
        |x, y| {
            let gx = 2.0 * x * y * y;
            let gy = 2.0 * x * x * y;
            if x == 0.0 {
                c(-gx)
            } else if x == 1.0 {
                c(gx)
            } else if y == 0.0 {
                c(-gy)
            } else {
                c(gy)
            }
        },
    );
    let u3 = op.solve(Some(&src3), &data3)?;
    let mut e3 = 0.0f64;
    for iy in 1..=n as isize {
        for ix in 1..=n as isize {
            let (x, y) = grid.coords(ix as usize, iy as usize);
            e3 = e3.max((u3.at(ix, iy) - c(x * x * y * y)).norm());
        }
    }
    Ok((e1, e2, e3))
}

fn solve_study(ctx: &RunContext) -> Result<RunOutcome> {
    let sizes = [15usize, 31, 63];
    let mut rows = Vec::new();
    for &n in &sizes {
        say(ctx, &format!("manufactured solves at N={n}"));
        rows.push((n, manufactured_errors(n)?));
    }
    let mut csv = String::from("N,err_oscillatory,err_product,err_quartic\n");
    for (n, (e1, e2, e3)) in &rows {
        csv.push_str(&format!("{n},{e1:?},{e2:?},{e3:?}\n"));
    }
    std::fs::write(ctx.out_dir.join("convergence.csv"), csv)?;

    let order = |a: f64, b: f64| (a / b).log2();
    let orders1 = [
        order(rows[0].1 .0, rows[1].1 .0),
        order(rows[1].1 .0, rows[2].1 .0),
    ];
    let orders2 = [
        order(rows[0].1 .1, rows[1].1 .1),
        order(rows[1].1 .1, rows[2].1 .1),
    ];
    let quartic_worst = rows.iter().map(|r| r.1 .2).fold(0.0, f64::max);
    let in_band = |o: f64| (1.7..=2.3).contains(&o);
    let pass = orders1.iter().chain(&orders2).all(|&o| in_band(o)) && quartic_worst < 1e-8;
    Ok(RunOutcome {
        pass,
        results: json!({
            "orders_oscillatory": orders1,
            "orders_product": orders2,
            "quartic_exactness_worst": quartic_worst,
            "order_band": [1.7, 2.3],
        }),
    })
}

fn cgo_decay(ctx: &RunContext) -> Result<RunOutcome> {
    let grid = ctx.config.build_grid()?;
    let op = ClampedBilaplacian::assemble(&grid)?;
    let cutoff = CutoffSpec::for_gamma(&grid, ctx.config.grid.margin)?;
    let base = NullVector::new(vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)])?;
    let mut profiles = Vec::new();
    let mut pass = true;
    for &tau in &ctx.config.probe.tau {
        say(ctx, &format!("decay profile for tau={tau}"));
        let xi = base.scaled(tau);
        let profile = match remainder_decay_profile(
            &op,
            &xi,
            ctx.config.amplitude(),
            &cutoff,
            &ctx.config.h_list(),
            ctx.config.probe.probe_margin,
        ) {
            Ok(p) => p,
            Err(e) => {
                // structured failure entry, e.g. when the resolution clip
                // empties the h list on a coarse grid
                say(ctx, &format!("tau={tau}: {e}"));
                profiles.push(json!({ "tau": tau, "error": e.to_string() }));
                pass = false;
                continue;
            }
        };
        profile.write_csv(&ctx.out_dir.join(format!("decay_tau{tau}.csv")))?;
        let sol = build_cgo(&op, &xi, ctx.config.h_list()[0], ctx.config.amplitude(), &cutoff)?;
        let (tv, td) = sol.gamma_trace_imposed();
        pass &= profile.monotone && profile.slope < 0.0 && profile.r_squared > 0.9;
        pass &= tv < 1e-6 && td < 1e-6;
        profiles.push(json!({
            "tau": tau,
            "slope": profile.slope,
            "r_squared": profile.r_squared,
            "monotone": profile.monotone,
            "gamma_trace_value": tv,
            "gamma_trace_derivative": td,
            "rows": profile.rows.len(),
        }));
        if let Err(e) = profile.certificate() {
            say(ctx, &format!("decay violation: {e}"));
            pass = false;
        }
    }
    Ok(RunOutcome {
        pass,
        results: json!({ "profiles": profiles }),
    })
}

fn local_extract(ctx: &RunContext) -> Result<RunOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    let n = 2usize;
    let h_list = ctx.config.h_list();
    let mut checks = Vec::new();
    let mut pass = true;

    // one random constant tensor per rank, plus the isotropic rank-3 case
    let coeffs = PointCoefficients::new(
        n,
        [
            Some(random_tensor(&mut rng, n, 0)),
            Some(random_tensor(&mut rng, n, 1)),
            Some(random_tensor(&mut rng, n, 2)),
            Some(random_tensor(&mut rng, n, 3)),
        ],
    )?;
    let cascade = symbol_cascade(&coeffs, &h_list)?;
    let (tf3, a1) = trace_free_decompose(coeffs.tensor(3))?;
    let (tf2, a0) = trace_free_decompose(coeffs.tensor(2))?;
    let rel = |err: f64, scale: f64| err / scale.max(f64::MIN_POSITIVE);
    let entries = [
        ("tracefree3", rel(cascade.tracefree3.sub(&tf3).norm_inf(), tf3.norm_inf())),
        ("tracefree2", rel(cascade.tracefree2.sub(&tf2).norm_inf(), tf2.norm_inf())),
        (
            "vector1",
            rel(
                cascade.vector1.sub(coeffs.tensor(1)).norm_inf(),
                coeffs.tensor(1).norm_inf(),
            ),
        ),
        (
            "scalar0",
            rel(
                (cascade.scalar0 - coeffs.tensor(0).get(&[])).norm(),
                coeffs.tensor(0).get(&[]).norm(),
            ),
        ),
        ("iso_vector", rel(cascade.iso_vector.sub(&a1).norm_inf(), a1.norm_inf())),
        (
            "iso_scalar",
            rel((cascade.iso_scalar - a0.get(&[])).norm(), a0.get(&[]).norm()),
        ),
    ];
    for (name, err) in entries {
        pass &= err < 0.01;
        checks.push(json!({ "name": name, "relative_error": err, "tolerance": 0.01 }));
    }

    // purely isotropic rank-3 input: invisible to unit-amplitude fits,
    // recovered by the coordinate-amplitude pass
    let iso3 = i_delta(&SymTensor::basis_vector(n, 0))?;
    let iso_coeffs = PointCoefficients::new(n, [None, None, None, Some(iso3)])?;
    let iso_cascade = symbol_cascade(&iso_coeffs, &h_list)?;
    let tf_leak = iso_cascade.tracefree3.norm_inf();
    let iso_err = iso_cascade
        .iso_vector
        .sub(&SymTensor::basis_vector(n, 0))
        .norm_inf();
    pass &= tf_leak < 1e-8 && iso_err < 0.01;
    checks.push(json!({
        "name": "isotropic_rank3_two_pass",
        "tracefree_leak": tf_leak,
        "iso_vector_error": iso_err,
    }));

    Ok(RunOutcome {
        pass,
        results: json!({ "checks": checks, "h_list": h_list }),
    })
}

fn load_model(path: &str, grid: &GridDomain, fallback: ModelKind) -> Result<CoefficientModel> {
    if path.is_empty() {
        let mut model = CoefficientModel::zero(grid);
        match fallback {
            ModelKind::Zero => {}
            ModelKind::QuadraticScalar => {
                model.push_constant(0, 1, SymTensor::scalar(2, Complex64::new(1.0, 0.0)))?;
            }
            ModelKind::QuadraticPlusCubic => {
                model.push_constant(0, 1, SymTensor::scalar(2, Complex64::new(1.0, 0.0)))?;
                // the strong cubic Taylor term lifts the divided-difference
                // truncation signal well above the solver floor
                model.push_constant(0, 2, SymTensor::scalar(2, Complex64::new(300.0, 0.0)))?;
            }
        }
        return Ok(model);
    }
    let text = std::fs::read_to_string(path)?;
    ModelSpec::from_json(&text)?.materialize(grid)
}

enum ModelKind {
    Zero,
    QuadraticScalar,
    QuadraticPlusCubic,
}

fn linearize(ctx: &RunContext) -> Result<RunOutcome> {
    let grid = ctx.config.build_grid()?;
    let op = ClampedBilaplacian::assemble(&grid)?;
    let options = PicardOptions::default();
    let model = load_model(&ctx.config.model.true_path, &grid, ModelKind::QuadraticPlusCubic)?;
    let params = RandomDataParams::default();
    let tests = TestFunctionSet::random(&op, 4, ctx.config.seed, &params)?;
    let dirs = [tests.members[0].cauchy.clone(), tests.members[1].cauchy.clone()];
    let v1 = op.solve(None, &dirs[0])?;
    let v2 = op.solve(None, &dirs[1])?;
    let direct = oracle::solve_linearized_direct(&op, &model, &[v1, v2])?;

    say(ctx, "eps-halving ratios against the direct linearized solve");
    let defect = |eps: f64, scheme: DiffScheme| -> Result<f64> {
        let dd = solution_mixed_difference(&op, &model, &dirs, eps, scheme, &options)?;
        Ok(dd.sub(&direct).norm_inf())
    };
    let eps = ctx.config.linearize.eps;
    let f_ratio = defect(2.0 * eps, DiffScheme::Forward)? / defect(eps, DiffScheme::Forward)?;
    let s_ratio =
        defect(20.0 * eps, DiffScheme::Symmetric)? / defect(10.0 * eps, DiffScheme::Symmetric)?;

    say(ctx, "equal-model boundary functionals");
    let ref_model = load_model(&ctx.config.model.true_path, &grid, ModelKind::QuadraticPlusCubic)?;
    let dn_a = SemilinearDn { op: &op, model: &model, options };
    let dn_b = SemilinearDn { op: &op, model: &ref_model, options };
    let pool = TestFunctionSet::random(&op, 8, ctx.config.seed ^ 0x5a5a, &params)?;
    let mut worst_equal = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    for _ in 0..50 {
        let i0 = rng.gen_range(0..pool.len());
        let mut i1 = rng.gen_range(0..pool.len());
        let mut i2 = rng.gen_range(0..pool.len());
        if i1 == i0 {
            i1 = (i1 + 1) % pool.len();
        }
        if i2 == i0 || i2 == i1 {
            i2 = (i2 + 2) % pool.len();
        }
        let dirs = [
            pool.members[i1].cauchy.clone(),
            pool.members[i2].cauchy.clone(),
        ];
        let mut dd = crate::forward::dn_mixed_difference(&dn_a, &dirs, eps, ctx.config.scheme())?;
        dd.axpy(
            Complex64::new(-1.0, 0.0),
            &crate::forward::dn_mixed_difference(&dn_b, &dirs, eps, ctx.config.scheme())?,
        );
        worst_equal = worst_equal.max(boundary_functional(&dd, &pool.members[i0])?.norm());
    }

    let pass = (1.7..=2.3).contains(&f_ratio)
        && (3.5..=4.5).contains(&s_ratio)
        && worst_equal < 1e-8;
    Ok(RunOutcome {
        pass,
        results: json!({
            "forward_halving_ratio": f_ratio,
            "symmetric_halving_ratio": s_ratio,
            "equal_model_worst_boundary_functional": worst_equal,
        }),
    })
}

fn invert(ctx: &RunContext) -> Result<RunOutcome> {
    let grid = ctx.config.build_grid()?;
    let op = ClampedBilaplacian::assemble(&grid)?;
    let options = PicardOptions::default();
    let true_model = load_model(&ctx.config.model.true_path, &grid, ModelKind::QuadraticScalar)?;
    let ref_model = load_model(&ctx.config.model.ref_path, &grid, ModelKind::Zero)?;

    let basis = CoefficientBasis::constants(&grid, &ctx.config.recover.basis_ranks)?;
    let cutoff = CutoffSpec::for_gamma(&grid, ctx.config.grid.margin)?;
    let tests = standard_test_pool(
        &op,
        &cutoff,
        ctx.config.recover.test_count,
        ctx.config.recover.cgo_count,
        ctx.config.seed,
    )?;
    let settings = RecoverySettings {
        eps: ctx.config.linearize.eps,
        scheme: ctx.config.scheme(),
        lambda_rel: ctx.config.recover.lambda_rel,
        tuple_count: ctx.config.recover.tuple_count,
        seed: ctx.config.seed ^ 0xabcd,
    };

    say(ctx, "running the recovery cascade");
    let dn_true = SemilinearDn { op: &op, model: &true_model, options };
    let stages = taylor_cascade(
        &dn_true,
        &op,
        ref_model,
        options,
        ctx.config.recover.m_max,
        &basis,
        &tests,
        &settings,
    )?;

    let mut reports = Vec::new();
    for (k, (_, report)) in stages.iter().enumerate() {
        let mut csv = String::from("boundary_re,boundary_im,fitted_re,fitted_im\n");
        for row in &report.functional_pairs {
            csv.push_str(&format!("{:?},{:?},{:?},{:?}\n", row[0], row[1], row[2], row[3]));
        }
        std::fs::write(
            ctx.out_dir.join(format!("functional_pairs_order{}.csv", k + 1)),
            csv,
        )?;
        reports.push(serde_json::to_value(report)?);
    }
    let pass = stages
        .iter()
        .all(|(_, r)| r.residual_rel.is_finite() && r.condition.is_finite());
    Ok(RunOutcome {
        pass,
        results: json!({
            "stages": reports,
            "parameters": serde_json::to_value(settings)?,
        }),
    })
}

/// The default test pool of the inversion pipeline: random members plus
/// oscillatory probes along a few null directions.
pub fn standard_test_pool(
    op: &ClampedBilaplacian,
    cutoff: &CutoffSpec,
    random_count: usize,
    cgo_count: usize,
    seed: u64,
) -> Result<TestFunctionSet> {
    let dirs = [
        NullVector::new(vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)])?,
        NullVector::new(vec![Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0)])?,
        NullVector::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)])?,
    ];
    let hs = [0.4, 0.25];
    let mut probes = Vec::new();
    'outer: for h in hs {
        for d in &dirs {
            if probes.len() >= cgo_count {
                break 'outer;
            }
            probes.push((d.clone(), h));
        }
    }
    TestFunctionSet::random_with_cgo(
        op,
        random_count,
        seed,
        &RandomDataParams::default(),
        cutoff,
        &probes,
    )
}

/// Convenience used by the binary: format an error into the documented
/// exit code (1 config, 2 numerical).
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Format(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

/// Volume functional of an all-ones constant rank-0 difference against a
/// tuple of ones; kept for smoke-testing quadrature from the CLI tests.
pub fn quadrature_smoke(grid: &GridDomain) -> Result<f64> {
    let op = ClampedBilaplacian::assemble(grid)?;
    let polys = TestFunctionSet::polynomials(&op)?;
    let one = &polys.members[0];
    let w = WDifference::single(TensorField::constant(
        grid,
        SymTensor::scalar(2, Complex64::new(1.0, 0.0)),
    ));
    Ok(crate::reconstruct::volume_functional(&w, one, &[one, one]).re)
}
