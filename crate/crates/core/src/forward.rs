//! Semilinear forward problem, partial boundary-measurement simulation
//! and multi-linearization by mixed divided differences.
//!
//! The operator is the bilaplacian plus tensorial perturbations
//! `sum_l <A_l(x, u), D^l u>` with `D = -i grad` and coefficients that
//! are entire in the solution value with `A_l(x, 0) = 0` (each Taylor
//! term carries `z^k / k!`, `k >= 1`). Fields stay complex end to end:
//! odd-order derivative terms make real data produce complex responses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{TensorField, TensorFieldSpec};
use crate::grid::{fd, CauchyData, DnData, GridDomain, ScalarField};
use crate::solver::{apply_bilaplacian, dn_data, ClampedBilaplacian, TraceLocation};
use crate::tensor::{multiplicity, SymTensor};

/// `1 / i^l`
fn d_factor(l: usize) -> Complex64 {
    match l % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// All first- to third-order partial derivatives of a field, computed
/// once and shared by every pairing that needs them.
pub struct DerivBundle {
    pub u: ScalarField,
    slots: Vec<Option<ScalarField>>,
}

#[inline]
fn slot_of(px: usize, py: usize) -> usize {
    px * 4 + py
}

impl DerivBundle {
    pub fn new(u: &ScalarField) -> Self {
        let mut slots: Vec<Option<ScalarField>> = (0..16).map(|_| None).collect();
        for total in 1..=3usize {
            for px in 0..=total {
                let py = total - px;
                slots[slot_of(px, py)] = Some(fd::derivative(u, px, py));
            }
        }
        DerivBundle {
            u: u.clone(),
            slots,
        }
    }

    /// Derivative field for the given per-axis orders; `(0, 0)` is the
    /// field itself.
    pub fn d(&self, px: usize, py: usize) -> &ScalarField {
        if px == 0 && py == 0 {
            &self.u
        } else {
            self.slots[slot_of(px, py)].as_ref().expect("order <= 3")
        }
    }

    /// `<T, D^l u>(x)` at one node for a rank-`l` coefficient tensor:
    /// the full multiplicity-weighted sum with the `1/i^l` convention.
    pub fn pairing_at(&self, t: &SymTensor, ix: usize, iy: usize) -> Complex64 {
        let l = t.rank();
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, v) in t.iter() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let px = idx.iter().filter(|&&i| i == 0).count();
            let py = l - px;
            acc += v
                * multiplicity(&idx) as f64
                * self.d(px, py).at(ix as isize, iy as isize);
        }
        acc * d_factor(l)
    }
}

/// Taylor term `z^k / k! * field` of the rank-`l` coefficient.
#[derive(Debug, Clone)]
pub struct ModelTerm {
    pub rank: usize,
    pub order: usize,
    pub field: TensorField,
}

/// Coefficient family `A_l(x, z) = sum_k z^k / k! A_{l,k}(x)`,
/// `l = 0..=3`, with no `k = 0` term.
#[derive(Debug, Clone)]
pub struct CoefficientModel {
    grid: GridDomain,
    terms: Vec<ModelTerm>,
}

impl CoefficientModel {
    pub fn zero(grid: &GridDomain) -> Self {
        CoefficientModel {
            grid: grid.clone(),
            terms: Vec::new(),
        }
    }

    pub fn push_term(&mut self, rank: usize, order: usize, field: TensorField) -> Result<()> {
        if rank > 3 {
            return Err(Error::UnsupportedRank {
                rank,
                supported: "0..=3",
            });
        }
        if order == 0 {
            return Err(Error::Config(
                "Taylor orders start at 1: the coefficients vanish at z = 0".into(),
            ));
        }
        if field.grid() != &self.grid || field.dim() != 2 || field.rank() != rank {
            return Err(Error::DimensionMismatch(
                "model term field must be a rank-matching 2D field on the model grid".into(),
            ));
        }
        // merge with an existing (rank, order) slot if present
        for t in self.terms.iter_mut() {
            if t.rank == rank && t.order == order {
                t.field.axpy(Complex64::new(1.0, 0.0), &field);
                return Ok(());
            }
        }
        self.terms.push(ModelTerm { rank, order, field });
        Ok(())
    }

    /// Convenience: a spatially constant Taylor term.
    pub fn push_constant(&mut self, rank: usize, order: usize, tensor: SymTensor) -> Result<()> {
        let field = TensorField::constant(&self.grid.clone(), tensor);
        self.push_term(rank, order, field)
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn terms(&self) -> &[ModelTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }

    /// Taylor coefficient field `A_{l,k}` if present.
    pub fn taylor_field(&self, rank: usize, order: usize) -> Option<&TensorField> {
        self.terms
            .iter()
            .find(|t| t.rank == rank && t.order == order)
            .map(|t| &t.field)
    }

    /// The perturbation part `sum_l <A_l(x, u), D^l u>` on all non-ghost
    /// nodes; the bilaplacian itself lives in the linear solver.
    pub fn apply_nonlinear_operator(&self, u: &ScalarField) -> ScalarField {
        assert_eq!(u.grid(), &self.grid);
        let bundle = DerivBundle::new(u);
        self.apply_with_bundle(&bundle)
    }

    fn apply_with_bundle(&self, bundle: &DerivBundle) -> ScalarField {
        let w = self.grid.nodes_per_axis();
        let mut out = ScalarField::zeros(&self.grid);
        for term in &self.terms {
            let kfact: f64 = (2..=term.order).product::<usize>().max(1) as f64;
            for iy in 0..w {
                for ix in 0..w {
                    let z = bundle.u.at(ix as isize, iy as isize);
                    let zk = z.powu(term.order as u32) / kfact;
                    if zk.norm_sqr() == 0.0 {
                        continue;
                    }
                    let pairing = bundle.pairing_at(term.field.at(ix, iy), ix, iy);
                    *out.at_mut(ix as isize, iy as isize) += zk * pairing;
                }
            }
        }
        out
    }
}

/// Serializable model description: one field spec per Taylor term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub terms: Vec<ModelTermSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelTermSpec {
    pub l: usize,
    pub k: usize,
    pub spec: TensorFieldSpec,
}

impl ModelSpec {
    pub fn empty() -> Self {
        ModelSpec { terms: Vec::new() }
    }

    pub fn materialize(&self, grid: &GridDomain) -> Result<CoefficientModel> {
        let mut model = CoefficientModel::zero(grid);
        for t in &self.terms {
            model.push_term(t.l, t.k, t.spec.materialize(grid)?)?;
        }
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Iteration record of the fixed-point solve.
#[derive(Debug, Clone, Serialize)]
pub struct PicardLog {
    pub iterations: usize,
    /// successive update sizes in the max norm
    pub updates: Vec<f64>,
    /// geometric mean of successive update ratios (empty log: 1.0)
    pub contraction_ratio: f64,
}

/// Options for the fixed-point solve. `delta_max` is the admissible
/// boundary-data amplitude; the default is empirical and reported, not
/// derived.
#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub delta_max: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-12,
            max_iter: 60,
            delta_max: 0.5,
        }
    }
}

/// Fixed-point solve of the semilinear problem: start from the linear
/// solution and iterate `u <- solve(-perturbation(u), f, g)` until the
/// update stalls below `tol`.
pub fn solve_semilinear(
    op: &ClampedBilaplacian,
    model: &CoefficientModel,
    data: &CauchyData,
    options: &PicardOptions,
) -> Result<(ScalarField, PicardLog)> {
    if data.amplitude() >= options.delta_max {
        return Err(Error::BoundaryData(format!(
            "amplitude {:.3e} is not below the contraction threshold {:.3e}",
            data.amplitude(),
            options.delta_max
        )));
    }
    let mut u = op.solve(None, data)?;
    if model.is_empty() {
        return Ok((
            u,
            PicardLog {
                iterations: 1,
                updates: Vec::new(),
                contraction_ratio: 1.0,
            },
        ));
    }
    let mut updates = Vec::new();
    for it in 0..options.max_iter {
        let mut src = model.apply_nonlinear_operator(&u);
        src.scale_in_place(Complex64::new(-1.0, 0.0));
        if !src.norm_inf().is_finite() {
            return Err(Error::Divergence {
                max_iter: it,
                last: updates.last().copied().unwrap_or(f64::INFINITY),
            });
        }
        let next = op.solve(Some(&src), data)?;
        let dist = next.sub(&u).norm_inf();
        if !dist.is_finite() || dist > 1e8 {
            return Err(Error::Divergence {
                max_iter: it,
                last: dist,
            });
        }
        updates.push(dist);
        u = next;
        if dist < options.tol {
            let ratios: Vec<f64> = updates
                .windows(2)
                .filter(|w| w[0] > 0.0)
                .map(|w| w[1] / w[0])
                .collect();
            let contraction_ratio = if ratios.is_empty() {
                1.0
            } else {
                ratios.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).sum::<f64>()
                    / ratios.len() as f64
            }
            .exp();
            return Ok((
                u,
                PicardLog {
                    iterations: it + 1,
                    updates,
                    contraction_ratio,
                },
            ));
        }
    }
    Err(Error::Divergence {
        max_iter: options.max_iter,
        last: updates.last().copied().unwrap_or(f64::NAN),
    })
}

/// Partial boundary measurement: solve and extract the second and third
/// normal traces on the accessible part. The Cauchy data must vanish on
/// the inaccessible set.
pub fn dn_map(
    op: &ClampedBilaplacian,
    model: &CoefficientModel,
    data: &CauchyData,
    options: &PicardOptions,
) -> Result<DnData> {
    if data.max_on_gamma() > 1e-14 {
        return Err(Error::BoundaryData(
            "measurement data must vanish on the inaccessible boundary part".into(),
        ));
    }
    let (u, _) = solve_semilinear(op, model, data, options)?;
    dn_data(&u, TraceLocation::Sigma)
}

/// Anything that maps Cauchy data to partial boundary measurements.
/// Evaluations against distinct data are independent, so oracles must be
/// shareable across threads.
pub trait DnOracle: Sync {
    fn eval(&self, data: &CauchyData) -> Result<DnData>;
}

/// Measurement oracle backed by the semilinear solver.
pub struct SemilinearDn<'a> {
    pub op: &'a ClampedBilaplacian,
    pub model: &'a CoefficientModel,
    pub options: PicardOptions,
}

impl DnOracle for SemilinearDn<'_> {
    fn eval(&self, data: &CauchyData) -> Result<DnData> {
        dn_map(self.op, self.model, data, &self.options)
    }
}

/// Divided-difference scheme for the m-th mixed derivative in the data
/// amplitudes: one-sided (`O(eps)`) or symmetric (`O(eps^2)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffScheme {
    Forward,
    Symmetric,
}

/// Weighted evaluation points of the mixed divided difference: a list of
/// (weight, per-direction amplitude multipliers), plus the global scale.
fn mixed_stencil(m: usize, eps: f64, scheme: DiffScheme) -> (Vec<(f64, Vec<f64>)>, f64) {
    match scheme {
        DiffScheme::Forward => {
            let mut pts = Vec::with_capacity(1 << m);
            for mask in 0u32..(1 << m) {
                let mut coeffs = vec![0.0; m];
                let mut ones = 0;
                for (k, c) in coeffs.iter_mut().enumerate() {
                    if mask >> k & 1 == 1 {
                        *c = eps;
                        ones += 1;
                    }
                }
                let weight = if (m - ones).is_multiple_of(2) { 1.0 } else { -1.0 };
                pts.push((weight, coeffs));
            }
            (pts, eps.powi(m as i32))
        }
        DiffScheme::Symmetric => {
            let mut pts = Vec::with_capacity(1 << m);
            for mask in 0u32..(1 << m) {
                let mut coeffs = vec![0.0; m];
                let mut weight = 1.0;
                for (k, c) in coeffs.iter_mut().enumerate() {
                    if mask >> k & 1 == 1 {
                        *c = eps;
                    } else {
                        *c = -eps;
                        weight = -weight;
                    }
                }
                pts.push((weight, coeffs));
            }
            (pts, (2.0 * eps).powi(m as i32))
        }
    }
}

fn combine_data(base: &GridDomain, dirs: &[CauchyData], coeffs: &[f64]) -> CauchyData {
    let mut out = CauchyData::zeros(base);
    for (c, d) in coeffs.iter().zip(dirs) {
        out.axpy(Complex64::new(*c, 0.0), d);
    }
    out
}

/// m-th mixed divided difference of a measurement oracle in the given
/// boundary-data directions.
pub fn dn_mixed_difference(
    oracle: &dyn DnOracle,
    dirs: &[CauchyData],
    eps: f64,
    scheme: DiffScheme,
) -> Result<DnData> {
    assert!(!dirs.is_empty() && dirs.len() <= 4, "1 <= m <= 4 directions");
    let grid = dirs[0].grid().clone();
    let (pts, scale) = mixed_stencil(dirs.len(), eps, scheme);
    let mut acc: Option<DnData> = None;
    for (w, coeffs) in pts {
        let value = oracle.eval(&combine_data(&grid, dirs, &coeffs))?;
        match acc.as_mut() {
            None => {
                let mut first = value.zeroed();
                first.axpy(Complex64::new(w, 0.0), &value);
                acc = Some(first);
            }
            Some(a) => a.axpy(Complex64::new(w, 0.0), &value),
        }
    }
    let mut out = acc.expect("at least one stencil point");
    out.scale_in_place(Complex64::new(1.0 / scale, 0.0));
    Ok(out)
}

/// m-th mixed divided difference of the solution field itself.
pub fn solution_mixed_difference(
    op: &ClampedBilaplacian,
    model: &CoefficientModel,
    dirs: &[CauchyData],
    eps: f64,
    scheme: DiffScheme,
    options: &PicardOptions,
) -> Result<ScalarField> {
    assert!(!dirs.is_empty() && dirs.len() <= 4, "1 <= m <= 4 directions");
    let (pts, scale) = mixed_stencil(dirs.len(), eps, scheme);
    let mut acc = ScalarField::zeros(op.grid());
    for (w, coeffs) in pts {
        let data = combine_data(op.grid(), dirs, &coeffs);
        let (u, _) = solve_semilinear(op, model, &data, options)?;
        acc.axpy(Complex64::new(w, 0.0), &u);
    }
    acc.scale_in_place(Complex64::new(1.0 / scale, 0.0));
    Ok(acc)
}

/// The multilinear source `sum_l <W_l(x), sum_j D^l v_j prod_{r!=j} v_r>`
/// evaluated on all non-ghost nodes; rank-0 coefficients contribute
/// through `D^0 v_j = v_j` and therefore pick up the factor `m`.
pub fn multilinear_combination(
    w: [Option<&TensorField>; 4],
    bundles: &[&DerivBundle],
) -> ScalarField {
    let grid = bundles[0].u.grid().clone();
    let m = bundles.len();
    let width = grid.nodes_per_axis();
    let mut out = ScalarField::zeros(&grid);
    for iy in 0..width {
        for ix in 0..width {
            let vals: Vec<Complex64> = bundles
                .iter()
                .map(|b| b.u.at(ix as isize, iy as isize))
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for field in w.iter().flatten() {
                let tensor = field.at(ix, iy);
                for j in 0..m {
                    let mut prod = bundles[j].pairing_at(tensor, ix, iy);
                    for (r, v) in vals.iter().enumerate() {
                        if r != j {
                            prod *= v;
                        }
                    }
                    acc += prod;
                }
            }
            *out.at_mut(ix as isize, iy as isize) = acc;
        }
    }
    out
}

/// Independent reference implementations used to cross-check the solver
/// and the divided differences.
pub mod oracle {
    use super::*;
    use nalgebra::DMatrix;

    /// Residual of the discrete semilinear system at interior nodes for a
    /// field carrying the boundary data and mirror ghosts.
    fn residual(model: &CoefficientModel, u: &ScalarField) -> Vec<Complex64> {
        let grid = u.grid().clone();
        let n = grid.n_interior();
        let lin = apply_bilaplacian(u);
        let pert = model.apply_nonlinear_operator(u);
        let mut out = Vec::with_capacity(n * n);
        for iy in 1..=n as isize {
            for ix in 1..=n as isize {
                out.push(lin.at(ix, iy) + pert.at(ix, iy));
            }
        }
        out
    }

    fn field_from_unknowns(
        op: &ClampedBilaplacian,
        data: &CauchyData,
        x: &[Complex64],
    ) -> ScalarField {
        // reuse the linear solver's boundary/ghost conventions by solving
        // nothing: assemble the field directly
        let grid = op.grid().clone();
        let n = grid.n_interior();
        let mut u = ScalarField::zeros(&grid);
        for iy in 1..=n {
            for ix in 1..=n {
                *u.at_mut(ix as isize, iy as isize) = x[(iy - 1) * n + (ix - 1)];
            }
        }
        for (bx, by) in grid.boundary_nodes() {
            *u.at_mut(bx as isize, by as isize) = data.f_at(bx, by);
        }
        super::fill_ghosts_for_tests(&mut u, data);
        u
    }

    /// Full Newton solve of the assembled discrete system, with a
    /// complex-step numerical Jacobian. Dense; intended for small grids.
    pub fn newton_solve(
        op: &ClampedBilaplacian,
        model: &CoefficientModel,
        data: &CauchyData,
        tol: f64,
        max_iter: usize,
    ) -> Result<ScalarField> {
        let grid = op.grid().clone();
        let n = grid.n_interior();
        let dofs = n * n;
        let start = op.solve(None, data)?;
        let mut x: Vec<Complex64> = Vec::with_capacity(dofs);
        for iy in 1..=n {
            for ix in 1..=n {
                x.push(start.at(ix as isize, iy as isize));
            }
        }
        let delta = 1e-7;
        for _ in 0..max_iter {
            let u = field_from_unknowns(op, data, &x);
            let r0 = residual(model, &u);
            let rnorm = r0.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let mut jac = DMatrix::<Complex64>::zeros(dofs, dofs);
            for k in 0..dofs {
                let mut xk = x.clone();
                xk[k] += Complex64::new(delta, 0.0);
                let uk = field_from_unknowns(op, data, &xk);
                let rk = residual(model, &uk);
                for i in 0..dofs {
                    jac[(i, k)] = (rk[i] - r0[i]) / delta;
                }
            }
            let rhs = nalgebra::DVector::from_iterator(dofs, r0.iter().map(|v| -v));
            let step = jac
                .lu()
                .solve(&rhs)
                .ok_or(Error::SingularSystem { row: 0, pivot: 0.0 })?;
            let step_norm = step.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (xk, s) in x.iter_mut().zip(step.iter()) {
                *xk += s;
            }
            if step_norm < tol && rnorm < tol.max(1e-9) {
                return Ok(field_from_unknowns(op, data, &x));
            }
        }
        Err(Error::Divergence {
            max_iter,
            last: f64::NAN,
        })
    }

    /// Directly assembled m-th linearized solve (m = 2 or 3): the source
    /// combines the order-(m-1) Taylor fields with the first
    /// linearizations, plus, for m = 3, the lower-order interaction term
    /// built from the pairwise second linearizations.
    pub fn solve_linearized_direct(
        op: &ClampedBilaplacian,
        model: &CoefficientModel,
        firsts: &[ScalarField],
    ) -> Result<ScalarField> {
        let m = firsts.len();
        if !(2..=3).contains(&m) {
            return Err(Error::Config(
                "direct linearized solves are implemented for m = 2, 3".into(),
            ));
        }
        let grid = op.grid().clone();
        let bundles: Vec<DerivBundle> = firsts.iter().map(DerivBundle::new).collect();
        let refs: Vec<&DerivBundle> = bundles.iter().collect();
        let w_fields = |order: usize| {
            [
                model.taylor_field(0, order),
                model.taylor_field(1, order),
                model.taylor_field(2, order),
                model.taylor_field(3, order),
            ]
        };
        let mut src = multilinear_combination(w_fields(m - 1), &refs);
        if m == 3 {
            // second linearizations of each pair feed the interaction term
            for c in 0..3usize {
                let (a, b) = match c {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let w_ab = solve_linearized_direct(op, model, &[firsts[a].clone(), firsts[b].clone()])?;
                let pair = [DerivBundle::new(&firsts[c]), DerivBundle::new(&w_ab)];
                let pair_refs: Vec<&DerivBundle> = pair.iter().collect();
                let h_term = multilinear_combination(w_fields(1), &pair_refs);
                src.axpy(Complex64::new(1.0, 0.0), &h_term);
            }
        }
        src.scale_in_place(Complex64::new(-1.0, 0.0));
        op.solve(Some(&src), &CauchyData::zeros(&grid))
    }
}

/// Ghost fill shared with the solver (mirror rule); exposed for the
/// Newton oracle which assembles candidate fields directly.
fn fill_ghosts_for_tests(u: &mut ScalarField, data: &CauchyData) {
    let grid = u.grid().clone();
    let m = grid.n_interior() as isize + 1;
    let h = grid.h();
    for iy in 0..=m {
        let g = data.g_at(0, iy as usize);
        *u.at_mut(-1, iy) = u.at(1, iy) + 2.0 * h * g;
        let g = data.g_at(m as usize, iy as usize);
        *u.at_mut(m + 1, iy) = u.at(m - 1, iy) + 2.0 * h * g;
    }
    for ix in 0..=m {
        let g = data.g_at(ix as usize, 0);
        *u.at_mut(ix, -1) = u.at(ix, 1) + 2.0 * h * g;
        let g = data.g_at(ix as usize, m as usize);
        *u.at_mut(ix, m + 1) = u.at(ix, m - 1) + 2.0 * h * g;
    }
}
