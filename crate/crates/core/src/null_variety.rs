//! Recovery of symmetric tensors from their pairings with powers of
//! complex null vectors.
//!
//! The probe directions are complex vectors with vanishing bilinear
//! square, `xi . xi = 0` and `Im(xi_1) >= 0`. Pairings along such
//! directions annihilate every isotropic part `i_delta(a)`, so only the
//! trace-free part of a tensor is recoverable here; the closed-form
//! recipes for ranks 1 and 2 and the least-squares inversion for rank 3
//! reproduce it exactly from a small explicit probe family.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{i_delta, sorted_multi_indices, sym_len, SymTensor};

const ONE_I: Complex64 = Complex64::new(0.0, 1.0);

/// A complex direction with `xi . xi = 0` (bilinear, no conjugation) and
/// `Im(xi_1) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullVector {
    xi: Vec<Complex64>,
}

impl NullVector {
    pub fn new(xi: Vec<Complex64>) -> Result<Self> {
        if xi.len() < 2 {
            return Err(Error::NullVectorConstraint(
                "dimension must be at least 2".into(),
            ));
        }
        let norm2: f64 = xi.iter().map(|z| z.norm_sqr()).sum();
        let square: Complex64 = xi.iter().map(|z| z * z).sum();
        if square.norm() > 1e-12 * norm2.max(1.0) {
            return Err(Error::NullVectorConstraint(format!(
                "bilinear square is {:.3e}, not zero",
                square.norm()
            )));
        }
        if xi[0].im < -1e-12 * norm2.sqrt().max(1.0) {
            return Err(Error::NullVectorConstraint(
                "Im(xi_1) must be nonnegative".into(),
            ));
        }
        Ok(NullVector { xi })
    }

    /// Build `xi = i a + b` from a real orthogonal pair with `|a| = |b| != 0`
    /// and `a_1 >= 0`; such vectors exhaust the admissible directions.
    pub fn from_orthogonal_pair(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::NullVectorConstraint(
                "a and b must have the same dimension".into(),
            ));
        }
        let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let scale = (na * nb).max(1.0);
        if dot.abs() > 1e-12 * scale {
            return Err(Error::NullVectorConstraint(format!(
                "a . b = {dot:.3e}, the pair is not orthogonal"
            )));
        }
        if na == 0.0 || nb == 0.0 {
            return Err(Error::NullVectorConstraint("a and b must be nonzero".into()));
        }
        if (na - nb).abs() > 1e-12 * na.max(nb) {
            return Err(Error::NullVectorConstraint(format!(
                "|a| = {na:.6e} and |b| = {nb:.6e} differ"
            )));
        }
        if a[0] < 0.0 {
            return Err(Error::NullVectorConstraint(
                "a_1 must be nonnegative so that Im(xi_1) >= 0".into(),
            ));
        }
        NullVector::new(
            a.iter()
                .zip(b)
                .map(|(x, y)| Complex64::new(*y, *x))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn components(&self) -> &[Complex64] {
        &self.xi
    }

    /// Bilinear square `xi . xi`.
    pub fn bilinear_square(&self) -> Complex64 {
        self.xi.iter().map(|z| z * z).sum()
    }

    /// Scale by a positive real factor (stays on the null variety).
    pub fn scaled(&self, tau: f64) -> NullVector {
        assert!(tau > 0.0);
        NullVector {
            xi: self.xi.iter().map(|z| z * tau).collect(),
        }
    }
}

fn e_probe(n: usize, entries: &[(usize, Complex64)]) -> NullVector {
    let mut xi = vec![Complex64::new(0.0, 0.0); n];
    for &(i, v) in entries {
        xi[i] = v;
    }
    xi[0] = ONE_I;
    NullVector { xi }
}

/// The explicit probe family used by the constructive recovery:
///
/// - rank 1: `i e_1 +/- e_j`;
/// - rank 2: additionally `i e_1 + (e_j + e_k)/sqrt(2)`;
/// - rank 3: additionally `i e_1 + a e_l + b e_m` with
///   `(a, b) in {(c, c), (-c, -c), (c, -c)}`, `c = 1/sqrt(2)`, and
///   `i e_1 + (e_i + e_j + e_k)/sqrt(3)`.
fn standard_vectors(n: usize, m: usize) -> Vec<NullVector> {
    let one = Complex64::new(1.0, 0.0);
    let mut out = Vec::new();
    for j in 1..n {
        out.push(e_probe(n, &[(j, one)]));
        out.push(e_probe(n, &[(j, -one)]));
    }
    if m >= 2 {
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for j in 1..n {
            for k in (j + 1)..n {
                out.push(e_probe(n, &[(j, c), (k, c)]));
            }
        }
    }
    if m >= 3 {
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for j in 1..n {
            for k in (j + 1)..n {
                out.push(e_probe(n, &[(j, -c), (k, -c)]));
                out.push(e_probe(n, &[(j, -c), (k, c)]));
            }
        }
        let t = Complex64::new(1.0 / 3.0_f64.sqrt(), 0.0);
        for i in 1..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    out.push(e_probe(n, &[(i, t), (j, t), (k, t)]));
                }
            }
        }
    }
    out
}

/// Orthonormal basis of the trace-free subspace of symmetric rank-`m`
/// tensors, built by projecting the unit tensors against the isotropic
/// generators in the multiplicity-weighted inner product.
pub fn trace_free_basis(n: usize, m: usize) -> Vec<SymTensor> {
    assert!((1..=3).contains(&m));
    if m == 1 {
        return (0..n).map(|i| SymTensor::basis_vector(n, i)).collect();
    }
    let iso: Vec<SymTensor> = if m == 2 {
        vec![SymTensor::kron_delta(n)]
    } else {
        (0..n)
            .map(|i| i_delta(&SymTensor::basis_vector(n, i)).expect("rank 1 input"))
            .collect()
    };
    // modified Gram-Schmidt with one re-orthogonalization pass
    let mut ortho: Vec<SymTensor> = Vec::new();
    let push_orthogonalized = |t: &SymTensor, out: &mut Vec<SymTensor>| -> bool {
        let mut v = t.clone();
        for _ in 0..2 {
            for q in out.iter() {
                let c = v.dot(q);
                v = v.sub(&q.scale(c));
            }
        }
        let norm = v.norm();
        if norm > 1e-10 {
            out.push(v.scale(Complex64::new(1.0 / norm, 0.0)));
            true
        } else {
            false
        }
    };
    for g in &iso {
        let accepted = push_orthogonalized(g, &mut ortho);
        debug_assert!(accepted, "isotropic generators are independent");
    }
    let iso_dim = ortho.len();
    let mut basis = Vec::new();
    for idx in sorted_multi_indices(n, m) {
        let unit = SymTensor::unit(n, m, &idx);
        if push_orthogonalized(&unit, &mut ortho) {
            basis.push(ortho.last().unwrap().clone());
        }
    }
    debug_assert_eq!(basis.len(), sym_len(n, m) - iso_dim);
    basis
}

/// A validated probe family for rank `m` together with the factorized
/// evaluation matrix on the trace-free subspace.
pub struct ProbeSet {
    n: usize,
    m: usize,
    vectors: Vec<NullVector>,
    tf_basis: Vec<SymTensor>,
    matrix: DMatrix<Complex64>,
    svd: nalgebra::linalg::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    rank: usize,
}

impl ProbeSet {
    /// The proof-backed probe family; its evaluation matrix always has
    /// full column rank on the trace-free subspace.
    pub fn standard(n: usize, m: usize) -> Result<ProbeSet> {
        if n < 2 {
            return Err(Error::DimensionMismatch(
                "probe sets need dimension >= 2".into(),
            ));
        }
        ProbeSet::new(n, m, standard_vectors(n, m))
    }

    /// Validate an arbitrary probe family: the evaluation map restricted
    /// to trace-free tensors must be injective.
    pub fn new(n: usize, m: usize, vectors: Vec<NullVector>) -> Result<ProbeSet> {
        if !(1..=3).contains(&m) {
            return Err(Error::UnsupportedRank {
                rank: m,
                supported: "1..=3",
            });
        }
        let tf_basis = trace_free_basis(n, m);
        let matrix = DMatrix::from_fn(vectors.len(), tf_basis.len(), |p, b| {
            tf_basis[b].eval_pairing(vectors[p].components())
        });
        let svd = nalgebra::linalg::SVD::new(matrix.clone(), true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-10 * smax)
            .count();
        if rank < tf_basis.len() {
            return Err(Error::RankDeficientProbe {
                rank,
                expected: tf_basis.len(),
            });
        }
        Ok(ProbeSet {
            n,
            m,
            vectors,
            tf_basis,
            matrix,
            svd,
            rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank_m(&self) -> usize {
        self.m
    }

    pub fn vectors(&self) -> &[NullVector] {
        &self.vectors
    }

    pub fn trace_free_dim(&self) -> usize {
        self.tf_basis.len()
    }

    pub fn probe_matrix_rank(&self) -> usize {
        self.rank
    }

    pub fn evaluate(&self, p: impl FnMut(&NullVector) -> Complex64) -> Vec<Complex64> {
        self.vectors.iter().map(p).collect()
    }

    /// Least-squares inversion of the probe evaluations over the
    /// trace-free basis, with a residual consistency check.
    pub fn recover(&self, values: &[Complex64]) -> Result<SymTensor> {
        assert_eq!(values.len(), self.vectors.len());
        let b = DVector::from_column_slice(values);
        let u = self.svd.u.as_ref().expect("SVD with U");
        let vt = self.svd.v_t.as_ref().expect("SVD with V^H");
        let mut y = u.adjoint() * &b;
        let smax = self.svd.singular_values.iter().cloned().fold(0.0, f64::max);
        for (i, s) in self.svd.singular_values.iter().enumerate() {
            let inv = if *s > 1e-10 * smax { 1.0 / s } else { 0.0 };
            y[i] *= Complex64::new(inv, 0.0);
        }
        let x = vt.adjoint() * y.rows(0, self.svd.singular_values.len()).clone_owned();
        let residual = (&self.matrix * &x - &b).norm();
        let scale = b.norm();
        if residual > 1e-8 * scale.max(1.0) {
            return Err(Error::InconsistentOracle(format!(
                "probe residual {residual:.3e} against evaluation scale {scale:.3e}"
            )));
        }
        let mut out = SymTensor::zeros(self.n, self.m);
        for (c, t) in x.iter().zip(&self.tf_basis) {
            out = out.add(&t.scale(*c));
        }
        Ok(out)
    }

    /// Evaluation matrix over the full monomial symmetric basis (used by
    /// the kernel certificate below).
    pub fn full_matrix(&self) -> DMatrix<Complex64> {
        let idxs = sorted_multi_indices(self.n, self.m);
        DMatrix::from_fn(self.vectors.len(), idxs.len(), |p, b| {
            SymTensor::unit(self.n, self.m, &idxs[b]).eval_pairing(self.vectors[p].components())
        })
    }
}

/// Rank-nullity certificate of the probe matrix over the full symmetric
/// space: its kernel must be exactly the span of the isotropic tensors.
#[derive(Debug, Clone)]
pub struct NullspaceReport {
    pub full_dim: usize,
    pub rank: usize,
    pub nullity: usize,
    pub isotropic_dim: usize,
    /// Largest probe-matrix image norm over unit isotropic generators.
    pub max_isotropic_residual: f64,
}

pub fn nullspace_certificate(ps: &ProbeSet) -> NullspaceReport {
    let full = ps.full_matrix();
    let svd = nalgebra::linalg::SVD::new(full.clone(), false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    let (iso_dim, gens): (usize, Vec<SymTensor>) = match ps.rank_m() {
        1 => (0, Vec::new()),
        2 => (1, vec![SymTensor::kron_delta(ps.dim())]),
        _ => (
            ps.dim(),
            (0..ps.dim())
                .map(|i| i_delta(&SymTensor::basis_vector(ps.dim(), i)).expect("rank 1"))
                .collect(),
        ),
    };
    let mut max_res = 0.0f64;
    for g in &gens {
        let coords = DVector::from_iterator(g.entries().len(), g.entries().iter().cloned());
        let image = &full * coords;
        max_res = max_res.max(image.norm() / g.norm());
    }
    NullspaceReport {
        full_dim: full.ncols(),
        rank,
        nullity: full.ncols() - rank,
        isotropic_dim: iso_dim,
        max_isotropic_residual: max_res,
    }
}

/// Recover a vector `H` from `p(xi) = <H, xi>`. The first component comes
/// from the symmetric combination over `+/- e_j` probes (checked for
/// consistency across `j`), the rest from the antisymmetric one.
pub fn recover_vector(mut p: impl FnMut(&NullVector) -> Complex64, n: usize) -> Result<SymTensor> {
    let one = Complex64::new(1.0, 0.0);
    let mut h = SymTensor::zeros(n, 1);
    let mut h1_candidates = Vec::with_capacity(n - 1);
    let mut scale = 0.0f64;
    let mut values = Vec::new();
    for j in 1..n {
        let plus = p(&e_probe(n, &[(j, one)]));
        let minus = p(&e_probe(n, &[(j, -one)]));
        scale = scale.max(plus.norm()).max(minus.norm());
        h1_candidates.push((plus + minus) / (2.0 * ONE_I));
        h.set(&[j], (plus - minus) / 2.0);
        values.push((j, plus, minus));
    }
    let mean: Complex64 = h1_candidates.iter().sum::<Complex64>() / h1_candidates.len() as f64;
    for cand in &h1_candidates {
        if (cand - mean).norm() > 1e-8 * scale.max(1.0) {
            return Err(Error::InconsistentOracle(format!(
                "first-component estimates disagree by {:.3e}",
                (cand - mean).norm()
            )));
        }
    }
    h.set(&[0], mean);
    for (j, plus, minus) in values {
        let rp = h.get(&[0]) * ONE_I + h.get(&[j]);
        let rm = h.get(&[0]) * ONE_I - h.get(&[j]);
        if (rp - plus).norm().max((rm - minus).norm()) > 1e-10 * scale.max(1.0) {
            return Err(Error::InconsistentOracle(
                "recovered vector does not reproduce the probe values".into(),
            ));
        }
    }
    Ok(h)
}

/// Recover a trace-free symmetric 2-tensor `G` from `p(xi) = <G, xi^(.2)>`
/// by the closed-form elimination over the standard probes.
pub fn recover_tracefree2(
    mut p: impl FnMut(&NullVector) -> Complex64,
    n: usize,
) -> Result<SymTensor> {
    let one = Complex64::new(1.0, 0.0);
    let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut g = SymTensor::zeros(n, 2);
    let mut diag_gap = vec![Complex64::new(0.0, 0.0); n];
    let mut scale = 0.0f64;
    for j in 1..n {
        let plus = p(&e_probe(n, &[(j, one)]));
        let minus = p(&e_probe(n, &[(j, -one)]));
        scale = scale.max(plus.norm()).max(minus.norm());
        g.set(&[0, j], (plus - minus) / (4.0 * ONE_I));
        diag_gap[j] = (plus + minus) / 2.0; // G_jj - G_11
    }
    let g11 = -diag_gap.iter().skip(1).sum::<Complex64>() / n as f64;
    g.set(&[0, 0], g11);
    for j in 1..n {
        g.set(&[j, j], g11 + diag_gap[j]);
    }
    for j in 1..n {
        for k in (j + 1)..n {
            let xi = e_probe(n, &[(j, c), (k, c)]);
            let pv = p(&xi);
            scale = scale.max(pv.norm());
            // <G, xi^(.2)> = -G_11 + (G_jj + G_kk)/2 + i sqrt(2)(G_1j + G_1k) + G_jk
            let known = -g.get(&[0, 0])
                + (g.get(&[j, j]) + g.get(&[k, k])) / 2.0
                + ONE_I * std::f64::consts::SQRT_2 * (g.get(&[0, j]) + g.get(&[0, k]));
            g.set(&[j, k], pv - known);
        }
    }
    for xi in standard_vectors(n, 2) {
        let pv = p(&xi);
        if (g.eval_pairing(xi.components()) - pv).norm() > 1e-8 * scale.max(1.0) {
            return Err(Error::InconsistentOracle(
                "2-tensor evaluations are not of the assumed trace-free form".into(),
            ));
        }
    }
    Ok(g)
}

/// Recover a trace-free symmetric 3-tensor from `p(xi) = <F, xi^(.3)>` by
/// least squares over the standard probe family.
pub fn recover_tracefree3(p: impl FnMut(&NullVector) -> Complex64, n: usize) -> Result<SymTensor> {
    let ps = ProbeSet::standard(n, 3)?;
    let values = {
        let mut p = p;
        ps.evaluate(&mut p)
    };
    ps.recover(&values)
}

/// Recover the trace-free part of an arbitrary symmetric tensor of rank
/// `m` from its probe evaluations; the isotropic part is invisible on the
/// null variety and is not recovered.
pub fn recover_general(
    p: impl FnMut(&NullVector) -> Complex64,
    n: usize,
    m: usize,
) -> Result<SymTensor> {
    match m {
        1 => recover_vector(p, n),
        2 => recover_tracefree2(p, n),
        3 => recover_tracefree3(p, n),
        rank => Err(Error::UnsupportedRank {
            rank,
            supported: "1..=3",
        }),
    }
}
