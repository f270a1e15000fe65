//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//! Tolerances are pinned in the assertions.

use std::time::Instant;

use bihlab::cgo::{
    build_cgo, default_h_list, remainder_decay_profile, symbol_cascade, Amplitude, CutoffSpec,
    PointCoefficients,
};
use bihlab::forward::{
    dn_mixed_difference, oracle, solution_mixed_difference, CoefficientModel, DiffScheme,
    PicardOptions, SemilinearDn,
};
use bihlab::grid::{CauchyData, GridDomain, ScalarField};
use bihlab::null_variety::{
    nullspace_certificate, recover_general, NullVector, ProbeSet,
};
use bihlab::reconstruct::{
    boundary_functional, recover_w, taylor_cascade, CoefficientBasis, RandomDataParams,
    RecoverySettings, TestFunctionSet,
};
use bihlab::experiment::standard_test_pool;
use bihlab::solver::ClampedBilaplacian;
use bihlab::tensor::{
    i_delta, j_delta, sorted_multi_indices, sym_len, trace_free_decompose, SymTensor,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_tensor(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymTensor {
    let entries = (0..sym_len(n, rank))
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    SymTensor::from_entries(n, rank, entries).unwrap()
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn criterion_1_tensor_algebra() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_round = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut worst_unique = 0.0f64;
    for n in 2..=6 {
        for rank in [2usize, 3] {
            for _ in 0..1000 {
                let a = random_tensor(&mut rng, n, rank);
                let (tf, iso) = trace_free_decompose(&a).unwrap();
                let rebuilt = tf.add(&i_delta(&iso).unwrap());
                worst_round = worst_round.max(rebuilt.sub(&a).norm_inf());
                worst_trace = worst_trace.max(j_delta(&tf).norm_inf());
                let (_, iso2) = trace_free_decompose(&tf).unwrap();
                worst_unique = worst_unique.max(iso2.norm_inf());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass =
        worst_round < 1e-12 && worst_trace < 1e-12 && worst_unique < 1e-12 && elapsed < 5.0;
    verdict(
        "1 (tensor algebra)",
        pass,
        &format!(
            "10x1000 decompositions: round-trip {worst_round:.2e}, residual trace {worst_trace:.2e}, re-decomposition {worst_unique:.2e}, {elapsed:.2} s"
        ),
    );
}

#[test]
fn criterion_2_null_variety_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst_rel = 0.0f64;
    for n in 2..=6 {
        for m in 1..=3usize {
            let ps3 = if m == 3 {
                Some(ProbeSet::standard(n, 3).unwrap())
            } else {
                None
            };
            for _ in 0..1000 {
                let raw = random_tensor(&mut rng, n, m);
                let tf = if m == 1 {
                    raw
                } else {
                    trace_free_decompose(&raw).unwrap().0
                };
                let rec = match &ps3 {
                    Some(ps) => {
                        let values = ps.evaluate(|xi| tf.eval_pairing(xi.components()));
                        ps.recover(&values).unwrap()
                    }
                    None => {
                        recover_general(|xi| tf.eval_pairing(xi.components()), n, m).unwrap()
                    }
                };
                worst_rel = worst_rel
                    .max(rec.sub(&tf).norm_inf() / tf.norm_inf().max(f64::MIN_POSITIVE));
            }
        }
    }
    let mut nullspace_ok = true;
    let mut detail = String::new();
    for n in 2..=6 {
        for m in 2..=3usize {
            let rep = nullspace_certificate(&ProbeSet::standard(n, m).unwrap());
            let expect = if m == 2 { 1 } else { n };
            nullspace_ok &= rep.nullity == expect && rep.max_isotropic_residual < 1e-12;
            if rep.nullity != expect {
                detail = format!("n={n} m={m}: nullity {} != {expect}", rep.nullity);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_rel < 1e-10 && nullspace_ok && elapsed < 10.0;
    verdict(
        "2 (null-variety recovery)",
        pass,
        &format!(
            "15x1000 round trips: worst relative {worst_rel:.2e}; kernel = isotropic span: {nullspace_ok} {detail}; {elapsed:.2} s"
        ),
    );
}

#[test]
fn criterion_3_isotropic_invisibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    let mut count = 0usize;
    while count < 10_000 {
        let n = rng.gen_range(2..=6);
        let a = random_tensor(&mut rng, n, 1);
        let iso = i_delta(&a).unwrap();
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
        if nb2 < 1e-10 {
            continue;
        }
        let s = (na2 / nb2).sqrt();
        for v in ortho.iter_mut() {
            *v *= s;
        }
        let mut dir = raw_a;
        if dir[0] < 0.0 {
            for v in dir.iter_mut() {
                *v = -*v;
            }
        }
        let xi = NullVector::from_orthogonal_pair(&dir, &ortho).unwrap();
        let xi_norm: f64 = xi
            .components()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let p = iso.eval_pairing(xi.components()).norm();
        worst = worst.max(p / (a.norm() * xi_norm.powi(3)));
        count += 1;
    }
    verdict(
        "3 (isotropic invisibility)",
        worst < 1e-12,
        &format!("10^4 pairs: worst scaled pairing {worst:.2e} < 1e-12"),
    );
}

#[test]
fn criterion_4_biharmonic_solver() {
    use std::f64::consts::PI;
    let err_sin2 = |n: usize| {
        let grid = GridDomain::new(n).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let src = ScalarField::from_fn(&grid, |x, y| {
            let (a, b) = (2.0 * PI * x, 2.0 * PI * y);
            c(4.0 * PI.powi(4) * (4.0 * a.cos() * b.cos() - a.cos() - b.cos()))
        });
        let u = op.solve(Some(&src), &CauchyData::zeros(&grid)).unwrap();
        let mut e = 0.0f64;
        for iy in 1..=n as isize {
            for ix in 1..=n as isize {
                let (x, y) = grid.coords(ix as usize, iy as usize);
                let exact = (PI * x).sin().powi(2) * (PI * y).sin().powi(2);
                e = e.max((u.at(ix, iy) - c(exact)).norm());
            }
        }
        e
    };
    let err_product = |n: usize| {
        let grid = GridDomain::new(n).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let src = ScalarField::from_fn(&grid, |x, y| {
            c(4.0 * PI.powi(4) * (PI * x).sin() * (PI * y).sin())
        });
        let data = CauchyData::from_fns(
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
        let u = op.solve(Some(&src), &data).unwrap();
        let mut e = 0.0f64;
        for iy in 1..=n as isize {
            for ix in 1..=n as isize {
                let (x, y) = grid.coords(ix as usize, iy as usize);
                e = e.max((u.at(ix, iy) - c((PI * x).sin() * (PI * y).sin())).norm());
            }
        }
        e
    };
    let orders = |errs: [f64; 3]| [(errs[0] / errs[1]).log2(), (errs[1] / errs[2]).log2()];
    let o1 = orders([err_sin2(15), err_sin2(31), err_sin2(63)]);
    let o2 = orders([err_product(15), err_product(31), err_product(63)]);

    let grid = GridDomain::new(31).unwrap();
    let op = ClampedBilaplacian::assemble(&grid).unwrap();
    let zero = op.solve(None, &CauchyData::zeros(&grid)).unwrap().norm_inf();

    let in_band = |o: f64| (1.7..=2.3).contains(&o);
    let pass = o1.iter().chain(&o2).all(|&o| in_band(o)) && zero <= 1e-12;
    verdict(
        "4 (biharmonic solver)",
        pass,
        &format!(
            "orders {:.2}/{:.2} and {:.2}/{:.2} in [1.7, 2.3]; zero data -> {zero:.1e}",
            o1[0], o1[1], o2[0], o2[1]
        ),
    );
}

#[test]
fn criterion_5_cgo_traces_and_decay() {
    let grid = GridDomain::new(63).unwrap();
    let op = ClampedBilaplacian::assemble(&grid).unwrap();
    let cutoff = CutoffSpec::for_gamma(&grid, 0.25).unwrap();
    let base = NullVector::new(vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)]).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for tau in [1.0f64, 2.0] {
        let xi = base.scaled(tau);
        let sol = build_cgo(&op, &xi, 0.4, Amplitude::One, &cutoff).unwrap();
        let (tv, td) = sol.gamma_trace_imposed();
        let profile =
            remainder_decay_profile(&op, &xi, Amplitude::One, &cutoff, &default_h_list(), 0.5)
                .unwrap();
        let ok = tv < 1e-6
            && td < 1e-6
            && profile.monotone
            && profile.slope < 0.0
            && profile.r_squared > 0.9;
        pass &= ok;
        detail.push_str(&format!(
            "tau={tau}: traces ({tv:.1e}, {td:.1e}), slope {:.3}, R^2 {:.3}, monotone {}; ",
            profile.slope, profile.r_squared, profile.monotone
        ));
    }
    verdict("5 (oscillatory solutions)", pass, &detail);
}

#[test]
fn criterion_6_pointwise_symbol_cascade() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let n = 2usize;
    let hs = default_h_list();
    let real_tensor = |rng: &mut ChaCha8Rng, rank: usize| {
        let mut t = SymTensor::zeros(n, rank);
        for idx in sorted_multi_indices(n, rank) {
            t.set(&idx, c(rng.gen_range(-1.0..1.0)));
        }
        t
    };
    let coeffs = PointCoefficients::new(
        n,
        [
            Some(real_tensor(&mut rng, 0)),
            Some(real_tensor(&mut rng, 1)),
            Some(real_tensor(&mut rng, 2)),
            Some(real_tensor(&mut rng, 3)),
        ],
    )
    .unwrap();
    let cas = symbol_cascade(&coeffs, &hs).unwrap();
    let (tf3, a1) = trace_free_decompose(coeffs.tensor(3)).unwrap();
    let (tf2, a0) = trace_free_decompose(coeffs.tensor(2)).unwrap();
    let rel = |e: f64, s: f64| e / s.max(f64::MIN_POSITIVE);
    let errs = [
        rel(cas.tracefree3.sub(&tf3).norm_inf(), tf3.norm_inf()),
        rel(cas.tracefree2.sub(&tf2).norm_inf(), tf2.norm_inf()),
        rel(
            cas.vector1.sub(coeffs.tensor(1)).norm_inf(),
            coeffs.tensor(1).norm_inf(),
        ),
        rel(
            (cas.scalar0 - coeffs.tensor(0).get(&[])).norm(),
            coeffs.tensor(0).get(&[]).norm(),
        ),
        rel(cas.iso_vector.sub(&a1).norm_inf(), a1.norm_inf()),
        rel((cas.iso_scalar - a0.get(&[])).norm(), a0.get(&[]).norm()),
    ];

    // the purely isotropic rank-3 case exercises the coordinate pass
    let iso3 = i_delta(&SymTensor::basis_vector(n, 0)).unwrap();
    let iso_coeffs = PointCoefficients::new(n, [None, None, None, Some(iso3)]).unwrap();
    let iso_cas = symbol_cascade(&iso_coeffs, &hs).unwrap();
    let iso_err = iso_cas
        .iso_vector
        .sub(&SymTensor::basis_vector(n, 0))
        .norm_inf();

    let worst = errs.iter().cloned().fold(iso_err, f64::max);
    verdict(
        "6 (symbol-extraction cascade)",
        worst < 0.01,
        &format!("worst relative error {worst:.2e} < 1%"),
    );
}

#[test]
fn criterion_7_linearization() {
    let grid = GridDomain::new(31).unwrap();
    let op = ClampedBilaplacian::assemble(&grid).unwrap();
    let options = PicardOptions::default();
    let mut model = CoefficientModel::zero(&grid);
    model.push_constant(0, 1, SymTensor::scalar(2, c(1.0))).unwrap();
    model
        .push_constant(0, 2, SymTensor::scalar(2, c(300.0)))
        .unwrap();
    let params = RandomDataParams::default();
    let tests = TestFunctionSet::random(&op, 4, 107, &params).unwrap();
    let dirs = [
        tests.members[0].cauchy.clone(),
        tests.members[1].cauchy.clone(),
    ];
    let v1 = op.solve(None, &dirs[0]).unwrap();
    let v2 = op.solve(None, &dirs[1]).unwrap();
    let direct = oracle::solve_linearized_direct(&op, &model, &[v1, v2]).unwrap();
    let defect = |eps: f64, scheme: DiffScheme| {
        solution_mixed_difference(&op, &model, &dirs, eps, scheme, &options)
            .unwrap()
            .sub(&direct)
            .norm_inf()
    };
    let ratio_f = defect(2e-3, DiffScheme::Forward) / defect(1e-3, DiffScheme::Forward);
    let ratio_s = defect(2e-2, DiffScheme::Symmetric) / defect(1e-2, DiffScheme::Symmetric);

    // identical models: the measured difference is identically zero and so
    // is every boundary functional
    let model_b = {
        let mut m = CoefficientModel::zero(&grid);
        m.push_constant(0, 1, SymTensor::scalar(2, c(1.0))).unwrap();
        m.push_constant(0, 2, SymTensor::scalar(2, c(300.0))).unwrap();
        m
    };
    let dn_a = SemilinearDn { op: &op, model: &model, options };
    let dn_b = SemilinearDn { op: &op, model: &model_b, options };
    let pool = TestFunctionSet::random(&op, 8, 1077, &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst_equal = 0.0f64;
    for _ in 0..50 {
        let mut pick = Vec::new();
        while pick.len() < 3 {
            let k = rng.gen_range(0..pool.len());
            if !pick.contains(&k) {
                pick.push(k);
            }
        }
        let dirs = [
            pool.members[pick[1]].cauchy.clone(),
            pool.members[pick[2]].cauchy.clone(),
        ];
        let mut dd = dn_mixed_difference(&dn_a, &dirs, 1e-3, DiffScheme::Symmetric).unwrap();
        dd.axpy(
            c(-1.0),
            &dn_mixed_difference(&dn_b, &dirs, 1e-3, DiffScheme::Symmetric).unwrap(),
        );
        worst_equal =
            worst_equal.max(boundary_functional(&dd, &pool.members[pick[0]]).unwrap().norm());
    }

    let pass = (1.7..=2.3).contains(&ratio_f)
        && (3.5..=4.5).contains(&ratio_s)
        && worst_equal < 1e-8;
    verdict(
        "7 (multi-linearization)",
        pass,
        &format!(
            "halving ratios: forward {ratio_f:.2} in [1.7, 2.3], symmetric {ratio_s:.2} in [3.5, 4.5]; equal-model functionals {worst_equal:.1e} < 1e-8"
        ),
    );
}

#[test]
fn criterion_8_end_to_end_recovery() {
    let start = Instant::now();
    let grid = GridDomain::new(31).unwrap();
    let op = ClampedBilaplacian::assemble(&grid).unwrap();
    let options = PicardOptions::default();
    let basis = CoefficientBasis::constants(&grid, &[0, 1, 2, 3]).unwrap();
    let cutoff = CutoffSpec::for_gamma(&grid, 0.25).unwrap();
    let tests = standard_test_pool(&op, &cutoff, 16, 6, 43).unwrap();
    let settings = RecoverySettings {
        eps: 1e-3,
        tuple_count: 80,
        ..Default::default()
    };
    let zero_model = CoefficientModel::zero(&grid);
    let dn_zero = SemilinearDn { op: &op, model: &zero_model, options };

    // constant quadratic scalar coefficient within 5%
    let mut m_scalar = CoefficientModel::zero(&grid);
    m_scalar
        .push_constant(0, 1, SymTensor::scalar(2, c(1.0)))
        .unwrap();
    let dn_scalar = SemilinearDn { op: &op, model: &m_scalar, options };
    let (w, _) = recover_w(&dn_scalar, &dn_zero, 2, &basis, &tests, &settings).unwrap();
    let mean = w.mean_tensors();
    let scalar_err = (mean[0].as_ref().unwrap().get(&[]) - c(1.0)).norm();

    // constant quadratic vector coefficient within 10%
    let mut m_vector = CoefficientModel::zero(&grid);
    m_vector
        .push_constant(1, 1, SymTensor::basis_vector(2, 0))
        .unwrap();
    let dn_vector = SemilinearDn { op: &op, model: &m_vector, options };
    let (w, _) = recover_w(&dn_vector, &dn_zero, 2, &basis, &tests, &settings).unwrap();
    let mean = w.mean_tensors();
    let vector_err = mean[1]
        .as_ref()
        .unwrap()
        .sub(&SymTensor::basis_vector(2, 0))
        .norm_inf();

    // second-order coefficient after first-order substitution within 10%
    let mut m_cubic = CoefficientModel::zero(&grid);
    m_cubic
        .push_constant(0, 1, SymTensor::scalar(2, c(1.0)))
        .unwrap();
    m_cubic
        .push_constant(0, 2, SymTensor::scalar(2, c(1.0)))
        .unwrap();
    let dn_cubic = SemilinearDn { op: &op, model: &m_cubic, options };
    let stages = taylor_cascade(
        &dn_cubic,
        &op,
        CoefficientModel::zero(&grid),
        options,
        3,
        &basis,
        &tests,
        &settings,
    )
    .unwrap();
    let mean2 = stages[1].0.mean_tensors();
    let cascade_err = (mean2[0].as_ref().unwrap().get(&[]) - c(1.0)).norm();

    let elapsed = start.elapsed().as_secs_f64();
    let pass =
        scalar_err < 0.05 && vector_err < 0.10 && cascade_err < 0.10 && elapsed < 600.0;
    verdict(
        "8 (end-to-end recovery)",
        pass,
        &format!(
            "scalar {:.2}% < 5%, vector {:.2}% < 10%, second order {:.2}% < 10%; {elapsed:.1} s < 600 s",
            scalar_err * 100.0,
            vector_err * 100.0,
            cascade_err * 100.0
        ),
    );
}
