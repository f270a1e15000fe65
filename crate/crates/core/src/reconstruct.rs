//! From boundary-measurement differences to coefficient differences.
//!
//! The bridge is an integral identity: pairing the m-th linearized
//! difference field against a biharmonic test function with vanishing
//! Cauchy data on the inaccessible part turns interior coefficient
//! differences into a boundary integral of measured second/third normal
//! traces. Assembling many such pairings over a finite coefficient basis
//! yields a regularized least-squares system for the Taylor-coefficient
//! differences, order by order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cgo::CgoSolution;
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::forward::{
    dn_mixed_difference, multilinear_combination, CoefficientModel, DerivBundle, DiffScheme,
    DnOracle, SemilinearDn, PicardOptions,
};
use crate::grid::{CauchyData, DnData, GridDomain, ScalarField};
use crate::solver::{apply_bilaplacian, ClampedBilaplacian};
use crate::tensor::{sorted_multi_indices, SymTensor};

/// How a test function was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Cgo,
    Polynomial,
    RandomBoundary,
}

/// A discrete biharmonic field with vanishing Cauchy data on the
/// inaccessible part, its generating boundary data and cached
/// derivatives.
pub struct TestFunction {
    pub field: ScalarField,
    pub cauchy: CauchyData,
    pub provenance: Provenance,
    bundle: DerivBundle,
}

impl TestFunction {
    /// Validate and wrap a candidate: the field must satisfy the discrete
    /// equation (checked through the ghost-aware stencil) and its data
    /// must vanish on the inaccessible nodes.
    pub fn new(
        field: ScalarField,
        cauchy: CauchyData,
        provenance: Provenance,
    ) -> Result<TestFunction> {
        let grid = field.grid().clone();
        let scale = field.norm_inf().max(1.0);
        let h4 = grid.h().powi(4);
        let residual = apply_bilaplacian(&field).norm_inf_interior() * h4;
        if residual > 1e-7 * scale {
            return Err(Error::InvalidTestFunction(format!(
                "discrete biharmonic residual {residual:.3e} exceeds tolerance"
            )));
        }
        if cauchy.max_on_gamma() > 1e-12 * scale {
            return Err(Error::InvalidTestFunction(
                "Cauchy data does not vanish on the inaccessible part".into(),
            ));
        }
        let bundle = DerivBundle::new(&field);
        Ok(TestFunction {
            field,
            cauchy,
            provenance,
            bundle,
        })
    }

    /// Solve the clamped problem for the given admissible data.
    pub fn from_boundary_data(
        op: &ClampedBilaplacian,
        cauchy: CauchyData,
        provenance: Provenance,
    ) -> Result<TestFunction> {
        let field = op.solve(None, &cauchy)?;
        TestFunction::new(field, cauchy, provenance)
    }

    /// Re-solve an oscillatory solution from its imposed total data: the
    /// result is exactly discretely biharmonic and keeps the oscillatory
    /// probing behaviour to stencil accuracy.
    pub fn from_cgo(op: &ClampedBilaplacian, sol: &CgoSolution) -> Result<TestFunction> {
        TestFunction::from_boundary_data(op, sol.cauchy.clone(), Provenance::Cgo)
    }

    pub fn bundle(&self) -> &DerivBundle {
        &self.bundle
    }
}

/// Parameters of the random boundary-data generator.
#[derive(Debug, Clone, Copy)]
pub struct RandomDataParams {
    /// number of cosine/sine modes per edge
    pub modes: usize,
    /// taper width near corners and inaccessible segments
    pub taper: f64,
    /// target amplitude `|f|_inf + |g|_inf`
    pub amplitude: f64,
}

impl Default for RandomDataParams {
    fn default() -> Self {
        RandomDataParams {
            modes: 3,
            taper: 0.2,
            amplitude: 1.0,
        }
    }
}

fn quintic(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Smooth random Cauchy data supported on the accessible part, tapered
/// to zero near every corner and near the inaccessible segments.
pub fn random_sigma_data(
    grid: &GridDomain,
    rng: &mut ChaCha8Rng,
    params: &RandomDataParams,
) -> CauchyData {
    let mut coeffs_f = Vec::new();
    let mut coeffs_g = Vec::new();
    for _ in 0..4 {
        let cf: Vec<(f64, f64)> = (0..params.modes)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let cg: Vec<(f64, f64)> = (0..params.modes)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        coeffs_f.push(cf);
        coeffs_g.push(cg);
    }
    let edge_index = |edge: crate::grid::Edge| match edge {
        crate::grid::Edge::Left => 0usize,
        crate::grid::Edge::Right => 1,
        crate::grid::Edge::Bottom => 2,
        crate::grid::Edge::Top => 3,
    };
    let window = |grid: &GridDomain, edge: crate::grid::Edge, s: f64| -> f64 {
        let mut w = quintic(s / params.taper) * quintic((1.0 - s) / params.taper);
        for seg in grid.gamma() {
            if seg.edge == edge {
                let dist = if s < seg.lo {
                    seg.lo - s
                } else if s > seg.hi {
                    s - seg.hi
                } else {
                    0.0
                };
                w *= quintic(dist / params.taper);
            }
        }
        w
    };
    let mut data = CauchyData::zeros(grid);
    for (ix, iy) in grid.boundary_nodes() {
        if grid.is_corner(ix, iy) || grid.in_gamma(ix, iy) {
            continue;
        }
        let edge = grid.edges_of(ix, iy)[0];
        let s = grid.arclength(edge, ix, iy);
        let w = window(grid, edge, s);
        if w == 0.0 {
            continue;
        }
        let e = edge_index(edge);
        let mut fv = 0.0;
        let mut gv = 0.0;
        for (k, ((af, bf), (ag, bg))) in coeffs_f[e].iter().zip(&coeffs_g[e]).enumerate() {
            let arg = (k + 1) as f64 * std::f64::consts::PI * s;
            fv += af * arg.cos() + bf * arg.sin();
            gv += ag * arg.cos() + bg * arg.sin();
        }
        data.set(
            ix,
            iy,
            Complex64::new(w * fv, 0.0),
            Complex64::new(w * gv, 0.0),
        );
    }
    let amp = data.amplitude();
    if amp > 0.0 {
        data = data.scale(Complex64::new(params.amplitude / amp, 0.0));
    }
    data
}

/// Pool of admissible test functions.
pub struct TestFunctionSet {
    grid: GridDomain,
    pub members: Vec<TestFunction>,
}

impl TestFunctionSet {
    /// Generate `count` members from random smooth boundary data on the
    /// accessible part; membership in the discrete admissible class holds
    /// by construction.
    pub fn random(
        op: &ClampedBilaplacian,
        count: usize,
        seed: u64,
        params: &RandomDataParams,
    ) -> Result<TestFunctionSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut members = Vec::with_capacity(count);
        for _ in 0..count {
            let data = random_sigma_data(op.grid(), &mut rng, params);
            members.push(TestFunction::from_boundary_data(
                op,
                data,
                Provenance::RandomBoundary,
            )?);
        }
        Ok(TestFunctionSet {
            grid: op.grid().clone(),
            members,
        })
    }

    /// Random pool supplemented with oscillatory members for targeted
    /// directional probing: a few null directions and semiclassical
    /// parameters, each re-solved from its imposed total data.
    pub fn random_with_cgo(
        op: &ClampedBilaplacian,
        random_count: usize,
        seed: u64,
        params: &RandomDataParams,
        cutoff: &crate::cgo::CutoffSpec,
        probes: &[(crate::null_variety::NullVector, f64)],
    ) -> Result<TestFunctionSet> {
        let mut set = TestFunctionSet::random(op, random_count, seed, params)?;
        for (xi, h) in probes {
            let sol = crate::cgo::build_cgo(op, xi, *h, crate::cgo::Amplitude::One, cutoff)?;
            // normalize: scaling stays inside the admissible class and
            // keeps divided-difference amplitudes within the contraction
            // threshold
            let amp = sol.cauchy.amplitude();
            let data = sol.cauchy.scale(Complex64::new(params.amplitude / amp, 0.0));
            set.push(TestFunction::from_boundary_data(op, data, Provenance::Cgo)?);
        }
        Ok(set)
    }

    /// Low-degree polynomial members (1, x1, x2). They are biharmonic but
    /// carry nonzero Cauchy data everywhere, so they are admissible only
    /// when the inaccessible set is empty; useful as quadrature smoke
    /// tests.
    pub fn polynomials(op: &ClampedBilaplacian) -> Result<TestFunctionSet> {
        let grid = op.grid().clone();
        if !grid.gamma_nodes().is_empty() {
            return Err(Error::InvalidTestFunction(
                "polynomial members need an empty inaccessible set".into(),
            ));
        }
        let mut members = Vec::new();
        type Value = Box<dyn Fn(f64, f64) -> f64>;
        type Gradient = Box<dyn Fn(f64, f64) -> (f64, f64)>;
        let fields: [(Value, Gradient); 3] = [
            (Box::new(|_, _| 1.0), Box::new(|_, _| (0.0, 0.0))),
            (Box::new(|x, _| x), Box::new(|_, _| (1.0, 0.0))),
            (Box::new(|_, y| y), Box::new(|_, _| (0.0, 1.0))),
        ];
        for (value, gradient) in fields {
            let data = CauchyData::from_fns(
                &grid,
                |x, y| Complex64::new(value(x, y), 0.0),
                |x, y| {
                    let (gx, gy) = gradient(x, y);
                    let nu = if x == 0.0 {
                        (-1.0, 0.0)
                    } else if x == 1.0 {
                        (1.0, 0.0)
                    } else if y == 0.0 {
                        (0.0, -1.0)
                    } else {
                        (0.0, 1.0)
                    };
                    Complex64::new(nu.0 * gx + nu.1 * gy, 0.0)
                },
            );
            let field = ScalarField::from_fn_with_ghosts(&grid, |x, y| {
                Complex64::new(value(x, y), 0.0)
            });
            members.push(TestFunction::new(field, data, Provenance::Polynomial)?);
        }
        Ok(TestFunctionSet { grid, members })
    }

    pub fn push(&mut self, tf: TestFunction) {
        self.members.push(tf);
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }
}

/// Finite coefficient basis: tensor fields per rank.
pub struct CoefficientBasis {
    pub elements: Vec<(usize, TensorField, String)>,
}

impl CoefficientBasis {
    /// Constant tensors for each requested rank, one per symmetric
    /// component.
    pub fn constants(grid: &GridDomain, ranks: &[usize]) -> Result<CoefficientBasis> {
        let mut elements = Vec::new();
        for &rank in ranks {
            if rank > 3 {
                return Err(Error::UnsupportedRank {
                    rank,
                    supported: "0..=3",
                });
            }
            for idx in sorted_multi_indices(2, rank) {
                let t = SymTensor::unit(2, rank, &idx);
                let label = format!(
                    "l{rank}_{}",
                    idx.iter()
                        .map(|i| (i + 1).to_string())
                        .collect::<Vec<_>>()
                        .join("")
                );
                elements.push((rank, TensorField::constant(grid, t), label));
            }
        }
        let basis = CoefficientBasis { elements };
        basis.check_independence(grid)?;
        Ok(basis)
    }

    /// Per-component monomials in x up to the given degree for each rank;
    /// degree 0 reproduces the constant basis.
    pub fn polynomial(grid: &GridDomain, ranks: &[usize], degree: usize) -> Result<CoefficientBasis> {
        if degree > 2 {
            return Err(Error::Config(
                "polynomial basis degree is capped at 2".into(),
            ));
        }
        let mut elements = Vec::new();
        for spec in crate::field::polynomial_field_specs(ranks, degree) {
            let rank = spec.rank();
            let field = spec.materialize(grid)?;
            let label = match &spec {
                crate::field::TensorFieldSpec::Polynomial { components, .. } => {
                    let c = &components[0];
                    format!(
                        "l{rank}_{}_x{}y{}",
                        c.index
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join(""),
                        c.terms[0].powers[0],
                        c.terms[0].powers[1]
                    )
                }
                _ => unreachable!("polynomial specs only"),
            };
            elements.push((rank, field, label));
        }
        let basis = CoefficientBasis { elements };
        basis.check_independence(grid)?;
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Gram-matrix rank check in the nodewise tensor inner product;
    /// elements of different ranks are orthogonal by convention.
    fn check_independence(&self, grid: &GridDomain) -> Result<()> {
        let k = self.elements.len();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let w = grid.nodes_per_axis();
        for i in 0..k {
            for j in 0..=i {
                if self.elements[i].0 != self.elements[j].0 {
                    continue;
                }
                let mut acc = 0.0;
                for iy in 0..w {
                    for ix in 0..w {
                        acc += self.elements[i]
                            .1
                            .at(ix, iy)
                            .dot(self.elements[j].1.at(ix, iy))
                            .re;
                    }
                }
                gram[(i, j)] = acc;
                gram[(j, i)] = acc;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(gram);
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        if min <= 1e-12 * max {
            return Err(Error::UnderDetermined(format!(
                "basis Gram matrix is numerically singular ({min:.3e} vs {max:.3e})"
            )));
        }
        Ok(())
    }
}

/// Per-rank coefficient-difference fields.
#[derive(Clone)]
pub struct WDifference {
    pub fields: [Option<TensorField>; 4],
}

impl WDifference {
    pub fn empty() -> Self {
        WDifference {
            fields: [None, None, None, None],
        }
    }

    pub fn single(field: TensorField) -> Self {
        let mut out = Self::empty();
        let rank = field.rank();
        out.fields[rank] = Some(field);
        out
    }

    pub fn as_refs(&self) -> [Option<&TensorField>; 4] {
        [
            self.fields[0].as_ref(),
            self.fields[1].as_ref(),
            self.fields[2].as_ref(),
            self.fields[3].as_ref(),
        ]
    }

    /// Node-averaged tensor per rank (the recovered constant for a
    /// constant basis).
    pub fn mean_tensors(&self) -> [Option<SymTensor>; 4] {
        let mut out = [None, None, None, None];
        for (rank, f) in self.fields.iter().enumerate() {
            if let Some(f) = f {
                let w = f.grid().nodes_per_axis();
                let mut acc = SymTensor::zeros(f.dim(), rank);
                for iy in 0..w {
                    for ix in 0..w {
                        acc = acc.add(f.at(ix, iy));
                    }
                }
                out[rank] = Some(acc.scale(Complex64::new(1.0 / (w * w) as f64, 0.0)));
            }
        }
        out
    }
}

/// Trapezoidal weight of a node on the unit square.
fn quad_weight(grid: &GridDomain, ix: usize, iy: usize) -> f64 {
    let m = grid.nodes_per_axis() - 1;
    let wx = if ix == 0 || ix == m { 0.5 } else { 1.0 };
    let wy = if iy == 0 || iy == m { 0.5 } else { 1.0 };
    wx * wy * grid.h() * grid.h()
}

fn volume_functional_raw(
    w: [Option<&TensorField>; 4],
    v0: &ScalarField,
    bundles: &[&DerivBundle],
) -> Complex64 {
    let grid = v0.grid().clone();
    let combo = multilinear_combination(w, bundles);
    let width = grid.nodes_per_axis();
    let mut acc = Complex64::new(0.0, 0.0);
    for iy in 0..width {
        for ix in 0..width {
            acc += quad_weight(&grid, ix, iy)
                * combo.at(ix as isize, iy as isize)
                * v0.at(ix as isize, iy as isize);
        }
    }
    acc
}

/// Volume pairing of coefficient-difference fields with one test tuple:
/// trapezoidal quadrature of
/// `sum_l <W_l, sum_j D^l v_j prod_{r != j} v_r> v_0`.
pub fn volume_functional(w: &WDifference, v0: &TestFunction, vs: &[&TestFunction]) -> Complex64 {
    let bundles: Vec<&DerivBundle> = vs.iter().map(|t| t.bundle()).collect();
    volume_functional_raw(w.as_refs(), &v0.field, &bundles)
}

fn sharp_functional_raw(
    a: [Option<&TensorField>; 4],
    v0: &DerivBundle,
    others: &[&ScalarField],
) -> Complex64 {
    let grid = v0.u.grid().clone();
    let m = others.len();
    let width = grid.nodes_per_axis();
    let mut acc = Complex64::new(0.0, 0.0);
    for iy in 0..width {
        for ix in 0..width {
            let mut val = Complex64::new(0.0, 0.0);
            for field in a.iter().flatten() {
                let tensor = field.at(ix, iy);
                let pairing = v0.pairing_at(tensor, ix, iy);
                if tensor.rank() == 0 {
                    // the zeroth-order coefficient enters with weight 1/m
                    val += pairing / m as f64;
                } else {
                    val += pairing;
                }
            }
            let mut prod = val;
            for o in others {
                prod *= o.at(ix as isize, iy as isize);
            }
            acc += quad_weight(&grid, ix, iy) * prod;
        }
    }
    acc
}

/// All-derivatives-on-one-function variant: quadrature of
/// `(sum_{l>=1} <A_l, D^l v_0> + (1/m) A_0 v_0) v_1 ... v_m`.
pub fn sharp_functional(a: &WDifference, v0: &TestFunction, vs: &[&TestFunction]) -> Complex64 {
    let fields: Vec<&ScalarField> = vs.iter().map(|t| &t.field).collect();
    sharp_functional_raw(a.as_refs(), v0.bundle(), &fields)
}

/// Boundary pairing of a measured trace difference with one test
/// function: `sum over accessible nodes of h (d3 v0 - d2 d_nu v0)`,
/// corners excluded. The test function's Cauchy data is prescribed, so
/// its value and normal derivative enter exactly rather than through a
/// trace stencil. The sign convention matches the volume functional
/// (frozen by the reconstruction self-consistency tests).
pub fn boundary_functional(dn_diff: &DnData, v0: &TestFunction) -> Result<Complex64> {
    let grid = v0.field.grid().clone();
    if dn_diff.n_interior != grid.n_interior() {
        return Err(Error::DimensionMismatch(
            "trace data and test function live on different grids".into(),
        ));
    }
    let scale = v0.field.norm_inf().max(1.0);
    if v0.cauchy.max_on_gamma() > 1e-12 * scale {
        return Err(Error::InvalidTestFunction(
            "test function carries data on the inaccessible part".into(),
        ));
    }
    let h = grid.h();
    let mut acc = Complex64::new(0.0, 0.0);
    for s in &dn_diff.samples {
        let v = v0.cauchy.f_at(s.ix, s.iy);
        let dnu_v = v0.cauchy.g_at(s.ix, s.iy);
        acc += h * (s.d3 * v - s.d2 * dnu_v);
    }
    Ok(acc)
}

/// Measurement-difference oracle: reference minus true, so that the
/// mixed difference carries the traces of the linearized difference
/// field matching `W = A_true - A_ref`.
struct DnDifference<'a> {
    truth: &'a dyn DnOracle,
    reference: &'a dyn DnOracle,
}

impl DnOracle for DnDifference<'_> {
    fn eval(&self, data: &CauchyData) -> Result<DnData> {
        let mut out = self.reference.eval(data)?;
        out.axpy(Complex64::new(-1.0, 0.0), &self.truth.eval(data)?);
        Ok(out)
    }
}

/// Settings of one recovery stage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecoverySettings {
    pub eps: f64,
    pub scheme: DiffScheme,
    /// Tikhonov parameter relative to the largest singular value
    pub lambda_rel: f64,
    pub tuple_count: usize,
    pub seed: u64,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        RecoverySettings {
            eps: 1e-3,
            scheme: DiffScheme::Symmetric,
            lambda_rel: 1e-8,
            tuple_count: 32,
            seed: 7,
        }
    }
}

/// Outcome report of one recovery stage.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub order: usize,
    pub basis_size: usize,
    pub tuple_count: usize,
    pub lambda: f64,
    pub condition: f64,
    /// `|M x - b| / |b|`
    pub residual_rel: f64,
    pub coefficients: Vec<CoefficientEntry>,
    /// node-averaged recovered tensor per rank (serialized tensor JSON)
    pub mean_tensors: Vec<serde_json::Value>,
    /// per-tuple functional pairs for diagnostics: (boundary, fitted volume)
    pub functional_pairs: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientEntry {
    pub rank: usize,
    pub label: String,
    pub re: f64,
    pub im: f64,
}

/// Deterministic test tuples: `count` draws of `m + 1` distinct member
/// indices.
pub fn make_tuples(pool: usize, m: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick: Vec<usize> = Vec::with_capacity(m + 1);
        while pick.len() < m + 1 {
            let k = rng.gen_range(0..pool);
            if !pick.contains(&k) {
                pick.push(k);
            }
        }
        out.push(pick);
    }
    out
}

/// One multi-linearization stage: assemble the volume-functional matrix
/// over the basis, measure the boundary functionals of the mixed
/// difference of the measurement difference, and solve the regularized
/// least-squares system for the order-(m-1) coefficient differences.
pub fn recover_w(
    dn_true: &dyn DnOracle,
    dn_ref: &dyn DnOracle,
    m: usize,
    basis: &CoefficientBasis,
    tests: &TestFunctionSet,
    settings: &RecoverySettings,
) -> Result<(WDifference, RecoveryReport)> {
    if m < 2 {
        return Err(Error::Config("linearization order m must be at least 2".into()));
    }
    if tests.len() < m + 1 {
        return Err(Error::UnderDetermined(format!(
            "need at least {} test functions, have {}",
            m + 1,
            tests.len()
        )));
    }
    if settings.tuple_count < basis.len() {
        return Err(Error::UnderDetermined(format!(
            "{} tuples cannot determine {} basis coefficients",
            settings.tuple_count,
            basis.len()
        )));
    }
    let tuples = make_tuples(tests.len(), m, settings.tuple_count, settings.seed);
    let rows = tuples.len();
    let cols = basis.len();
    let diff = DnDifference {
        truth: dn_true,
        reference: dn_ref,
    };
    // rows are independent; results land in indexed slots so the outcome
    // does not depend on scheduling
    let assembled: Result<Vec<(Vec<Complex64>, Complex64)>> = tuples
        .par_iter()
        .map(|tuple| {
            let v0 = &tests.members[tuple[0]];
            let vs: Vec<&TestFunction> = tuple[1..].iter().map(|&i| &tests.members[i]).collect();
            let mut row = Vec::with_capacity(cols);
            for (_, field, _) in &basis.elements {
                let w = WDifference::single(field.clone());
                row.push(volume_functional(&w, v0, &vs));
            }
            let dirs: Vec<CauchyData> = vs.iter().map(|v| v.cauchy.clone()).collect();
            let dd = dn_mixed_difference(&diff, &dirs, settings.eps, settings.scheme)?;
            Ok((row, boundary_functional(&dd, v0)?))
        })
        .collect();
    let assembled = assembled?;
    let mut matrix = DMatrix::<Complex64>::zeros(rows, cols);
    let mut rhs = DVector::<Complex64>::zeros(rows);
    for (t, (row, b)) in assembled.into_iter().enumerate() {
        for (bidx, v) in row.into_iter().enumerate() {
            matrix[(t, bidx)] = v;
        }
        rhs[t] = b;
    }

    // column equilibration keeps weakly excited basis directions from
    // being drowned by the regularization
    let mut col_scale = vec![1.0f64; cols];
    for (b, cs) in col_scale.iter_mut().enumerate() {
        let norm = matrix.column(b).norm();
        if norm > 0.0 {
            *cs = norm;
        }
    }
    let mut scaled = matrix.clone();
    for b in 0..cols {
        let inv = Complex64::new(1.0 / col_scale[b], 0.0);
        for t in 0..rows {
            scaled[(t, b)] *= inv;
        }
    }

    let svd = nalgebra::linalg::SVD::new(scaled, true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::MAX, f64::min);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < cols {
        // describe the near-null directions by their dominant basis labels
        let vt = svd.v_t.as_ref().unwrap();
        let mut desc = Vec::new();
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s <= 1e-10 * smax {
                let row = vt.row(i);
                let mut best = 0;
                for j in 0..cols {
                    if row[j].norm() > row[best].norm() {
                        best = j;
                    }
                }
                desc.push(basis.elements[best].2.clone());
            }
        }
        return Err(Error::UnderDetermined(format!(
            "volume-functional matrix rank {rank} < {cols}; near-null directions around {{{}}}",
            desc.join(", ")
        )));
    }
    let lambda = settings.lambda_rel * smax;
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut y = u.adjoint() * &rhs;
    for (i, s) in svd.singular_values.iter().enumerate() {
        let filt = s / (s * s + lambda * lambda);
        y[i] *= Complex64::new(filt, 0.0);
    }
    let mut x = vt.adjoint() * y.rows(0, svd.singular_values.len()).clone_owned();
    for b in 0..cols {
        x[b] /= Complex64::new(col_scale[b], 0.0);
    }
    let fitted = &matrix * &x;
    let residual = (&fitted - &rhs).norm();
    let rhs_norm = rhs.norm();

    let mut w = WDifference::empty();
    for ((rank_b, field, _), c) in basis.elements.iter().zip(x.iter()) {
        let scaled = field.scale(*c);
        match &mut w.fields[*rank_b] {
            Some(acc) => acc.axpy(Complex64::new(1.0, 0.0), &scaled),
            slot => *slot = Some(scaled),
        }
    }
    let mean = w.mean_tensors();
    let report = RecoveryReport {
        order: m - 1,
        basis_size: cols,
        tuple_count: rows,
        lambda,
        condition: smax / smin.max(f64::MIN_POSITIVE),
        residual_rel: residual / rhs_norm.max(f64::MIN_POSITIVE),
        coefficients: basis
            .elements
            .iter()
            .zip(x.iter())
            .map(|((rank, _, label), c)| CoefficientEntry {
                rank: *rank,
                label: label.clone(),
                re: c.re,
                im: c.im,
            })
            .collect(),
        mean_tensors: mean
            .iter()
            .flatten()
            .map(|t| t.to_json_value())
            .collect(),
        functional_pairs: rhs
            .iter()
            .zip(fitted.iter())
            .map(|(b, v)| [b.re, b.im, v.re, v.im])
            .collect(),
    };
    Ok((w, report))
}

/// Sequential recovery of the Taylor-coefficient differences for orders
/// `1 ..= m_max - 1`: after each stage the recovered difference is
/// substituted into the reference model so that the lower-order history
/// matches before the next linearization runs.
#[allow(clippy::too_many_arguments)]
pub fn taylor_cascade(
    dn_true: &dyn DnOracle,
    op: &ClampedBilaplacian,
    mut ref_model: CoefficientModel,
    options: PicardOptions,
    m_max: usize,
    basis: &CoefficientBasis,
    tests: &TestFunctionSet,
    settings: &RecoverySettings,
) -> Result<Vec<(WDifference, RecoveryReport)>> {
    let mut out = Vec::new();
    for m in 2..=m_max {
        let (w, report) = {
            let dn_ref = SemilinearDn {
                op,
                model: &ref_model,
                options,
            };
            recover_w(dn_true, &dn_ref, m, basis, tests, settings)?
        };
        // a near-zero coefficient difference leaves a pure-noise right side
        // (relative residual near 1 with tiny recovered coefficients), which
        // is fine; abort only on genuine blow-up
        if !report.residual_rel.is_finite() || report.residual_rel > 5.0 {
            return Err(Error::InconsistentOracle(format!(
                "cascade aborted at order {}: relative residual {:.3e}",
                m - 1,
                report.residual_rel
            )));
        }
        for (rank, field) in w.fields.iter().enumerate() {
            if let Some(field) = field {
                ref_model.push_term(rank, m - 1, field.clone())?;
            }
        }
        out.push((w, report));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;
    use crate::tensor::i_delta;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn smooth_bundle(grid: &GridDomain, fx: f64, fy: f64) -> DerivBundle {
        let u = ScalarField::from_fn_with_ghosts(grid, |x, y| {
            Complex64::new((fx * x).sin() * (fy * y).cos(), (fx * x - fy * y).cos())
        });
        DerivBundle::new(&u)
    }

    #[test]
    fn volume_functional_of_zero_w_vanishes() {
        let grid = GridDomain::new(9).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let tests = TestFunctionSet::random(&op, 3, 5, &RandomDataParams::default()).unwrap();
        let w = WDifference::empty();
        let val = volume_functional(&w, &tests.members[0], &[&tests.members[1], &tests.members[2]]);
        assert_eq!(val.norm(), 0.0);
    }

    #[test]
    fn volume_functional_constant_smoke_case() {
        // W_0 = 1 constant, v0 = v1 = v2 = 1 on an all-accessible domain:
        // the integrand is exactly 2, so the value is 2 |Omega| = 2
        let grid = GridDomain::with_gamma(9, Vec::new()).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let polys = TestFunctionSet::polynomials(&op).unwrap();
        let one = &polys.members[0];
        let w = WDifference::single(TensorField::constant(&grid, SymTensor::scalar(2, c(1.0))));
        let val = volume_functional(&w, one, &[one, one]);
        assert!((val - c(2.0)).norm() < 1e-12, "value {val}");
    }

    #[test]
    fn volume_functional_symmetric_in_the_tuple() {
        let grid = GridDomain::new(9).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let tests = TestFunctionSet::random(&op, 3, 11, &RandomDataParams::default()).unwrap();
        let mut w = WDifference::single(TensorField::constant(
            &grid,
            SymTensor::basis_vector(2, 0),
        ));
        w.fields[0] = Some(TensorField::constant(&grid, SymTensor::scalar(2, c(0.7))));
        let v0 = &tests.members[0];
        let a = volume_functional(&w, v0, &[&tests.members[1], &tests.members[2]]);
        let b = volume_functional(&w, v0, &[&tests.members[2], &tests.members[1]]);
        assert!((a - b).norm() < 1e-13 * a.norm().max(1.0));
    }

    #[test]
    fn sharp_functional_zero_coefficients() {
        let grid = GridDomain::new(9).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let tests = TestFunctionSet::random(&op, 3, 13, &RandomDataParams::default()).unwrap();
        let val = sharp_functional(
            &WDifference::empty(),
            &tests.members[0],
            &[&tests.members[1], &tests.members[2]],
        );
        assert_eq!(val.norm(), 0.0);
    }

    #[test]
    fn equivalence_of_volume_and_sharp_combinations() {
        // the intertwined form equals the symmetrized combination of
        // all-derivatives-on-one forms; for rank 0 the bookkeeping factor
        // between the two conventions is m (volume) vs 1/m (sharp)
        let grid = GridDomain::new(11).unwrap();
        let mut w = WDifference::empty();
        let mut a2 = SymTensor::zeros(2, 2);
        a2.set(&[0, 1], c(0.8));
        a2.set(&[1, 1], c(-0.3));
        let mut a3 = SymTensor::zeros(2, 3);
        a3.set(&[0, 0, 1], c(0.5));
        w.fields[0] = Some(TensorField::constant(&grid, SymTensor::scalar(2, c(0.9))));
        w.fields[1] = Some(TensorField::constant(&grid, SymTensor::basis_vector(2, 1)));
        w.fields[2] = Some(TensorField::constant(&grid, a2));
        w.fields[3] = Some(TensorField::constant(&grid, a3));

        let b0 = smooth_bundle(&grid, 1.3, 0.7);
        let b1 = smooth_bundle(&grid, 0.4, 2.1);
        let b2 = smooth_bundle(&grid, 1.9, 1.1);
        let m = 2.0;

        // intertwined functional with the rank-0 term counted once: scale
        // the rank-0 part of the volume form (which carries the factor m)
        // by 1/m
        let mut w_once = w.clone();
        w_once.fields[0] = Some(
            w.fields[0]
                .as_ref()
                .unwrap()
                .scale(Complex64::new(1.0 / m, 0.0)),
        );
        let lhs = volume_functional_raw(w_once.as_refs(), &b0.u, &[&b1, &b2]);

        // symmetrized combination: derivatives land on each v_k in turn
        let rhs = sharp_functional_raw(w.as_refs(), &b1, &[&b2.u, &b0.u])
            + sharp_functional_raw(w.as_refs(), &b2, &[&b1.u, &b0.u]);
        assert!(
            (lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0),
            "lhs {lhs}, rhs {rhs}"
        );
    }

    #[test]
    fn sharp_rank0_weight_ratio() {
        // A_0-only coefficients: the intertwined form carries m copies,
        // the sharp form 1/m, so their ratio is m^2
        let grid = GridDomain::new(9).unwrap();
        let w = WDifference::single(TensorField::constant(&grid, SymTensor::scalar(2, c(1.0))));
        let b0 = smooth_bundle(&grid, 0.9, 1.4);
        let b1 = smooth_bundle(&grid, 1.7, 0.3);
        let b2 = smooth_bundle(&grid, 0.2, 1.0);
        let vol = volume_functional_raw(w.as_refs(), &b0.u, &[&b1, &b2]);
        let sharp = sharp_functional_raw(w.as_refs(), &b0, &[&b1.u, &b2.u]);
        let ratio = vol / sharp;
        assert!((ratio - c(4.0)).norm() < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn boundary_functional_of_zero_traces_vanishes() {
        let grid = GridDomain::new(9).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let tests = TestFunctionSet::random(&op, 1, 3, &RandomDataParams::default()).unwrap();
        let u = ScalarField::from_fn_with_ghosts(&grid, |x, y| Complex64::new(x * y, 0.0));
        let dn = crate::solver::dn_data(&u, crate::solver::TraceLocation::Sigma).unwrap();
        let zero = dn.zeroed();
        let val = boundary_functional(&zero, &tests.members[0]).unwrap();
        assert_eq!(val.norm(), 0.0);
    }

    #[test]
    fn test_functions_are_admissible_by_construction() {
        let grid = GridDomain::new(15).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let tests = TestFunctionSet::random(&op, 5, 77, &RandomDataParams::default()).unwrap();
        assert_eq!(tests.len(), 5);
        for t in &tests.members {
            assert_eq!(t.provenance, Provenance::RandomBoundary);
            assert_eq!(t.cauchy.max_on_gamma(), 0.0);
        }
    }

    #[test]
    fn cgo_members_pass_validation() {
        let grid = GridDomain::new(15).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let cut = crate::cgo::CutoffSpec::for_gamma(&grid, 0.25).unwrap();
        let xi = crate::null_variety::NullVector::new(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        let sol = crate::cgo::build_cgo(&op, &xi, 0.5, crate::cgo::Amplitude::One, &cut).unwrap();
        let tf = TestFunction::from_cgo(&op, &sol).unwrap();
        assert_eq!(tf.provenance, Provenance::Cgo);
        // the re-solved member stays close to the oscillatory solution
        let gap = tf.field.sub(&sol.field).norm_inf();
        assert!(gap < 0.05 * sol.field.norm_inf(), "gap {gap:.3e}");
    }

    #[test]
    fn non_biharmonic_candidates_are_rejected() {
        let grid = GridDomain::new(9).unwrap();
        let field = ScalarField::from_fn_with_ghosts(&grid, |x, y| {
            Complex64::new((3.0 * x).sin() * y, 0.0)
        });
        let data = CauchyData::zeros(&grid);
        assert!(matches!(
            TestFunction::new(field, data, Provenance::RandomBoundary),
            Err(Error::InvalidTestFunction(_))
        ));
    }

    #[test]
    fn isotropic_rank3_is_visible_to_volume_functionals() {
        // i_delta(a) pairs to zero along null directions but couples to
        // generic test tuples through D(-Lap), so the basis keeps it
        let grid = GridDomain::new(11).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let tests = TestFunctionSet::random(&op, 4, 21, &RandomDataParams::default()).unwrap();
        let iso = i_delta(&SymTensor::basis_vector(2, 0)).unwrap();
        let w = WDifference::single(TensorField::constant(&grid, iso));
        let val = volume_functional(&w, &tests.members[0], &[&tests.members[1], &tests.members[2]]);
        assert!(val.norm() > 1e-6, "functional unexpectedly tiny: {val}");
    }

    #[test]
    fn polynomial_basis_is_independent_and_larger() {
        let grid = GridDomain::new(9).unwrap();
        let constants = CoefficientBasis::constants(&grid, &[0, 1]).unwrap();
        let poly = CoefficientBasis::polynomial(&grid, &[0, 1], 1).unwrap();
        assert_eq!(poly.len(), 3 * constants.len());
        assert!(CoefficientBasis::polynomial(&grid, &[0], 3).is_err());
    }

    #[test]
    fn recover_w_rejects_underdetermined_setups() {
        let grid = GridDomain::new(9).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let model = CoefficientModel::zero(&grid);
        let dn = SemilinearDn {
            op: &op,
            model: &model,
            options: PicardOptions::default(),
        };
        let basis = CoefficientBasis::constants(&grid, &[0, 1, 2, 3]).unwrap();
        let tests = TestFunctionSet::random(&op, 5, 1, &RandomDataParams::default()).unwrap();
        let starved = RecoverySettings {
            tuple_count: basis.len() - 1,
            ..Default::default()
        };
        assert!(matches!(
            recover_w(&dn, &dn, 2, &basis, &tests, &starved),
            Err(Error::UnderDetermined(_))
        ));
        // and a pool smaller than a tuple
        let tiny = TestFunctionSet::random(&op, 2, 1, &RandomDataParams::default()).unwrap();
        assert!(matches!(
            recover_w(&dn, &dn, 2, &basis, &tiny, &RecoverySettings::default()),
            Err(Error::UnderDetermined(_))
        ));
    }

    #[test]
    fn boundary_functional_rejects_gamma_supported_test_functions() {
        // a candidate carrying data on the inaccessible part must fail
        let grid = GridDomain::new(9).unwrap();
        let u = ScalarField::from_fn_with_ghosts(&grid, |x, y| Complex64::new(x * y, 0.0));
        let dn = crate::solver::dn_data(&u, crate::solver::TraceLocation::Sigma).unwrap();
        // fabricate an inadmissible candidate directly: constant one field
        let field = ScalarField::from_fn_with_ghosts(&grid, |_, _| Complex64::new(1.0, 0.0));
        let cauchy = CauchyData::from_fns(&grid, |_, _| Complex64::new(1.0, 0.0), |_, _| {
            Complex64::new(0.0, 0.0)
        });
        let bad = TestFunction {
            field,
            cauchy,
            provenance: Provenance::Polynomial,
            bundle: DerivBundle::new(&ScalarField::zeros(&grid)),
        };
        assert!(matches!(
            boundary_functional(&dn, &bad),
            Err(Error::InvalidTestFunction(_))
        ));
    }

    #[test]
    fn identical_oracles_recover_zero() {
        let grid = GridDomain::new(9).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let mut model = CoefficientModel::zero(&grid);
        model
            .push_constant(0, 1, SymTensor::scalar(2, c(0.6)))
            .unwrap();
        let oracle_a = SemilinearDn {
            op: &op,
            model: &model,
            options: PicardOptions::default(),
        };
        let oracle_b = SemilinearDn {
            op: &op,
            model: &model,
            options: PicardOptions::default(),
        };
        let basis = CoefficientBasis::constants(&grid, &[0]).unwrap();
        let tests = TestFunctionSet::random(&op, 5, 31, &RandomDataParams::default()).unwrap();
        let settings = RecoverySettings {
            tuple_count: 6,
            ..Default::default()
        };
        let (w, report) = recover_w(&oracle_a, &oracle_b, 2, &basis, &tests, &settings).unwrap();
        let mean = w.mean_tensors();
        let rec = mean[0].as_ref().unwrap().get(&[]);
        assert!(rec.norm() < 1e-10, "recovered {rec} from equal oracles");
        assert_eq!(report.basis_size, 1);
    }
}
