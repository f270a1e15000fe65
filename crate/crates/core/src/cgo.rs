//! Oscillatory biharmonic solutions `u = a(x) e^{-i x.xi/h} + r(x; h)`
//! vanishing with their normal derivative on the inaccessible boundary
//! part, plus the two asymptotic tools built on them: a decay certificate
//! for the weighted remainder and polynomial-in-`1/h` symbol fits.
//!
//! The admissible amplitudes are `a = 1` and `a = x_l`; both have
//! constant Laplacian and Hessian annihilated by `xi (x) xi`, so the
//! oscillatory part is exactly biharmonic whenever `xi . xi = 0`.

use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fd, CauchyData, Edge, GridDomain, ScalarField};
use crate::null_variety::{recover_general, recover_vector, NullVector, ProbeSet};
use crate::solver::ClampedBilaplacian;
use crate::tensor::{trace_free_decompose, SymTensor};

const ONE_I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitude factor of the oscillatory part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Amplitude {
    One,
    /// The coordinate function `x_l` (zero-based axis).
    Coordinate(usize),
}

impl Amplitude {
    fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Amplitude::One => 1.0,
            Amplitude::Coordinate(0) => x,
            Amplitude::Coordinate(1) => y,
            Amplitude::Coordinate(_) => unreachable!("2D amplitudes only"),
        }
    }

    fn gradient(self) -> (f64, f64) {
        match self {
            Amplitude::One => (0.0, 0.0),
            Amplitude::Coordinate(0) => (1.0, 0.0),
            Amplitude::Coordinate(1) => (0.0, 1.0),
            Amplitude::Coordinate(_) => unreachable!("2D amplitudes only"),
        }
    }
}

fn quintic_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

fn quintic_step_deriv(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// Smooth cutoff equal to 1 near the inaccessible edges and supported in
/// a band of width `margin` around them: a quintic smoothstep in the
/// coordinate normal to each edge, blended smoothly across edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSpec {
    margin: f64,
    edges: Vec<Edge>,
}

impl CutoffSpec {
    /// Cutoff adapted to the grid's inaccessible set: one profile per
    /// edge that carries a closed segment.
    pub fn for_gamma(grid: &GridDomain, margin: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&margin) || margin <= 2.0 * grid.h() {
            return Err(Error::InvalidDomain(format!(
                "cutoff margin {margin} must lie in (2h, 0.5)"
            )));
        }
        let mut edges: Vec<Edge> = grid.gamma().iter().map(|s| s.edge).collect();
        edges.dedup();
        if edges.is_empty() {
            return Err(Error::InvalidDomain(
                "no inaccessible segments; use CutoffSpec::zero instead".into(),
            ));
        }
        Ok(CutoffSpec { margin, edges })
    }

    /// The trivial cutoff (zero boundary data for the remainder).
    pub fn zero() -> Self {
        CutoffSpec {
            margin: 0.0,
            edges: Vec::new(),
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    fn edge_distance(edge: Edge, x: f64, y: f64) -> f64 {
        match edge {
            Edge::Left => x,
            Edge::Right => 1.0 - x,
            Edge::Bottom => y,
            Edge::Top => 1.0 - y,
        }
    }

    fn profile(&self, d: f64) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        1.0 - quintic_step((d - 0.5 * self.margin) / (0.5 * self.margin))
    }

    fn profile_deriv(&self, d: f64) -> f64 {
        -quintic_step_deriv((d - 0.5 * self.margin) / (0.5 * self.margin)) / (0.5 * self.margin)
    }

    /// Cutoff value at a point; 1 near the inaccessible edges, 0 outside
    /// the margin band.
    pub fn chi(&self, x: f64, y: f64) -> f64 {
        let mut one_minus = 1.0;
        for &e in &self.edges {
            one_minus *= 1.0 - self.profile(Self::edge_distance(e, x, y));
        }
        1.0 - one_minus
    }

    pub fn grad_chi(&self, x: f64, y: f64) -> (f64, f64) {
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (k, &e) in self.edges.iter().enumerate() {
            let d = Self::edge_distance(e, x, y);
            let dp = self.profile_deriv(d);
            let (ddx, ddy) = match e {
                Edge::Left => (1.0, 0.0),
                Edge::Right => (-1.0, 0.0),
                Edge::Bottom => (0.0, 1.0),
                Edge::Top => (0.0, -1.0),
            };
            let mut rest = 1.0;
            for (j, &e2) in self.edges.iter().enumerate() {
                if j != k {
                    rest *= 1.0 - self.profile(Self::edge_distance(e2, x, y));
                }
            }
            gx += dp * ddx * rest;
            gy += dp * ddy * rest;
        }
        (gx, gy)
    }

    /// Materialize the cutoff on a grid (diagnostics and plotting).
    pub fn field(&self, grid: &GridDomain) -> ScalarField {
        ScalarField::from_fn_with_ghosts(grid, |x, y| Complex64::new(self.chi(x, y), 0.0))
    }

    /// Support function `H_K(y) = sup { x . y : x in K }` of the boundary
    /// support `K = supp(chi) on the boundary`, evaluated over grid nodes.
    pub fn support_function(&self, grid: &GridDomain, dir: (f64, f64)) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (ix, iy) in grid.boundary_nodes() {
            let (x, y) = grid.coords(ix, iy);
            if self.chi(x, y) > 0.0 {
                best = best.max(x * dir.0 + y * dir.1);
            }
        }
        best
    }

    /// Check compatibility with a grid's inaccessible set: the cutoff
    /// must be identically 1 (with vanishing gradient) on its nodes.
    pub fn validate(&self, grid: &GridDomain) -> Result<()> {
        for (ix, iy) in grid.gamma_nodes() {
            let (x, y) = grid.coords(ix, iy);
            if self.chi(x, y) != 1.0 {
                return Err(Error::InvalidDomain(format!(
                    "cutoff is {} (not 1) at inaccessible node ({ix}, {iy})",
                    self.chi(x, y)
                )));
            }
            let (gx, gy) = self.grad_chi(x, y);
            if gx != 0.0 || gy != 0.0 {
                return Err(Error::InvalidDomain(format!(
                    "cutoff gradient does not vanish at inaccessible node ({ix}, {iy})"
                )));
            }
        }
        Ok(())
    }
}

/// Oscillatory solution data: direction, semiclassical parameter,
/// amplitude tag, the solved remainder and the assembled total field.
pub struct CgoSolution {
    pub xi: NullVector,
    pub h: f64,
    pub amplitude: Amplitude,
    pub cutoff: CutoffSpec,
    /// remainder solving the clamped problem with the cutoff data
    pub remainder: ScalarField,
    /// total field `a e^{-i x.xi/h} + r` (ghosts: analytic oscillatory
    /// part plus mirror-consistent remainder)
    pub field: ScalarField,
    /// imposed Cauchy data of the total field
    pub cauchy: CauchyData,
}

fn phase(xi: &NullVector, h: f64, x: f64, y: f64) -> Complex64 {
    let c = xi.components();
    let dot = c[0] * x + c[1] * y;
    (-ONE_I * dot / h).exp()
}

fn oscillatory(amplitude: Amplitude, xi: &NullVector, h: f64, x: f64, y: f64) -> Complex64 {
    amplitude.eval(x, y) * phase(xi, h, x, y)
}

/// Outward normal derivative of the oscillatory part at a boundary point.
fn oscillatory_normal_deriv(
    amplitude: Amplitude,
    xi: &NullVector,
    h: f64,
    edge: Edge,
    x: f64,
    y: f64,
) -> Complex64 {
    let (nx, ny) = edge.normal();
    let (ax, ay) = amplitude.gradient();
    let c = xi.components();
    let nu_dot_xi = c[0] * nx + c[1] * ny;
    let da = Complex64::new(nx * ax + ny * ay, 0.0);
    (da - ONE_I / h * nu_dot_xi * amplitude.eval(x, y)) * phase(xi, h, x, y)
}

/// Build the oscillatory solution: solve the clamped problem for the
/// remainder with boundary data `(-(a e)chi, -d_nu((a e)chi))` and add
/// the analytic oscillatory part.
pub fn build_cgo(
    op: &ClampedBilaplacian,
    xi: &NullVector,
    h: f64,
    amplitude: Amplitude,
    cutoff: &CutoffSpec,
) -> Result<CgoSolution> {
    if h <= 0.0 {
        return Err(Error::Config("semiclassical parameter must be positive".into()));
    }
    if xi.dim() != 2 {
        return Err(Error::DimensionMismatch(
            "the discrete domain is two-dimensional".into(),
        ));
    }
    if let Amplitude::Coordinate(l) = amplitude {
        if l >= 2 {
            return Err(Error::Config("coordinate amplitude index out of range".into()));
        }
    }
    let grid = op.grid().clone();
    let mut data_r = CauchyData::zeros(&grid);
    let mut cauchy_total = CauchyData::zeros(&grid);
    for (ix, iy) in grid.boundary_nodes() {
        let (x, y) = grid.coords(ix, iy);
        let edge = grid.edges_of(ix, iy)[0];
        let chi = cutoff.chi(x, y);
        let (gcx, gcy) = cutoff.grad_chi(x, y);
        let (nx, ny) = edge.normal();
        let dnu_chi = Complex64::new(nx * gcx + ny * gcy, 0.0);
        let p = oscillatory(amplitude, xi, h, x, y);
        let dp = oscillatory_normal_deriv(amplitude, xi, h, edge, x, y);
        data_r.set(ix, iy, -(p * chi), -(dp * chi + p * dnu_chi));
        cauchy_total.set(ix, iy, p * (1.0 - chi), dp * (1.0 - chi) - p * dnu_chi);
    }
    let remainder = op.solve(None, &data_r)?;
    let mut field = ScalarField::from_fn_with_ghosts(&grid, |x, y| {
        oscillatory(amplitude, xi, h, x, y)
    });
    field.axpy(Complex64::new(1.0, 0.0), &remainder);
    Ok(CgoSolution {
        xi: xi.clone(),
        h,
        amplitude,
        cutoff: cutoff.clone(),
        remainder,
        field,
        cauchy: cauchy_total,
    })
}

impl CgoSolution {
    /// Residual of the imposed Cauchy data on the inaccessible nodes:
    /// the stored trace of the field and the analytically imposed normal
    /// derivative. Both vanish identically when the cutoff is 1 there;
    /// nonzero values flag a cutoff/margin misconfiguration.
    pub fn gamma_trace_imposed(&self) -> (f64, f64) {
        let grid = self.field.grid().clone();
        let mut value = 0.0f64;
        let mut deriv = 0.0f64;
        for (ix, iy) in grid.gamma_nodes() {
            value = value.max(self.field.at(ix as isize, iy as isize).norm());
            deriv = deriv.max(self.cauchy.g_at(ix, iy).norm());
        }
        (value, deriv)
    }

    /// Measured traces on the inaccessible nodes: the stored field value
    /// and the one-sided first normal derivative. The derivative carries
    /// the O(h_grid^2) truncation of the trace stencil and shrinks at
    /// second order under grid refinement.
    pub fn gamma_trace_measured(&self) -> (f64, f64) {
        let grid = self.field.grid().clone();
        let mut value = 0.0f64;
        let mut deriv = 0.0f64;
        for (ix, iy) in grid.gamma_nodes() {
            if grid.is_corner(ix, iy) {
                continue;
            }
            let edge = grid.edges_of(ix, iy)[0];
            value = value.max(self.field.at(ix as isize, iy as isize).norm());
            deriv = deriv.max(fd::normal_derivative(&self.field, edge, ix, iy, 1).norm());
        }
        (value, deriv)
    }

    /// Max-norm of the 13-point bilaplacian applied to the total field
    /// over deep-interior nodes (at least two nodes from the boundary).
    pub fn interior_biharmonic_residual(&self) -> f64 {
        let grid = self.field.grid().clone();
        let n = grid.n_interior() as isize;
        let h4 = grid.h().powi(4);
        let mut acc = 0.0f64;
        for iy in 2..=(n - 1) {
            for ix in 2..=(n - 1) {
                let u = |dx: isize, dy: isize| self.field.at(ix + dx, iy + dy);
                let v = 20.0 * u(0, 0)
                    - 8.0 * (u(1, 0) + u(-1, 0) + u(0, 1) + u(0, -1))
                    + 2.0 * (u(1, 1) + u(1, -1) + u(-1, 1) + u(-1, -1))
                    + u(2, 0)
                    + u(-2, 0)
                    + u(0, 2)
                    + u(0, -2);
                acc = acc.max((v / h4).norm());
            }
        }
        acc
    }

    /// Weighted remainder sup over the probe region `{x1 > x_min}`:
    /// `sup |r(x) e^{i x.xi/h}| = sup |r(x)| e^{-x.Im(xi)/h}`.
    pub fn weighted_remainder_sup(&self, x_min: f64) -> f64 {
        let grid = self.remainder.grid().clone();
        let n = grid.n_interior() as isize;
        let im: Vec<f64> = self.xi.components().iter().map(|z| z.im).collect();
        let mut acc = 0.0f64;
        for iy in 1..=n {
            for ix in 1..=n {
                let (x, y) = grid.coords(ix as usize, iy as usize);
                if x <= x_min {
                    continue;
                }
                let w = (-(x * im[0] + y * im[1]) / self.h).exp();
                acc = acc.max(self.remainder.at(ix, iy).norm() * w);
            }
        }
        acc
    }
}

/// Default semiclassical sequence `0.4 * 0.8^k`, `k = 0..8`.
pub fn default_h_list() -> Vec<f64> {
    (0..8).map(|k| 0.4 * 0.8f64.powi(k)).collect()
}

/// Drop values that under-resolve the oscillation: keep `h >= 4 h_grid |xi|`.
pub fn clip_h_list(h_list: &[f64], grid: &GridDomain, xi: &NullVector) -> Vec<f64> {
    let xi_norm: f64 = xi
        .components()
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let floor = 4.0 * grid.h() * xi_norm;
    h_list.iter().copied().filter(|&h| h >= floor).collect()
}

/// Weighted-remainder profile over a decreasing `h` sequence with a
/// linear fit of `log W` against `1/h`.
#[derive(Debug, Clone)]
pub struct DecayProfile {
    /// `(h, weighted sup, fit residual)` rows
    pub rows: Vec<(f64, f64, f64)>,
    /// slope of `log W` in `1/h` (negative means decay)
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub monotone: bool,
}

impl DecayProfile {
    /// Error out on the first monotonicity violation, as a coarse-grid flag.
    pub fn certificate(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if w[1].1 >= w[0].1 {
                return Err(Error::DecayViolation {
                    h_coarse: w[0].0,
                    h_fine: w[1].0,
                    w_coarse: w[0].1,
                    w_fine: w[1].1,
                });
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "h,weighted_sup,fit_residual")?;
        for (h, w, r) in &self.rows {
            writeln!(file, "{h:?},{w:?},{r:?}")?;
        }
        Ok(())
    }
}

/// Build one solution per `h` (after resolution clipping) and certify the
/// decay of the weighted remainder on `{x1 > probe_margin}`.
pub fn remainder_decay_profile(
    op: &ClampedBilaplacian,
    xi: &NullVector,
    amplitude: Amplitude,
    cutoff: &CutoffSpec,
    h_list: &[f64],
    probe_margin: f64,
) -> Result<DecayProfile> {
    if xi.components()[0].im <= 0.0 {
        return Err(Error::Config(
            "decay profiles need Im(xi_1) > 0".into(),
        ));
    }
    let mut hs = clip_h_list(h_list, op.grid(), xi);
    hs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if hs.len() < 2 {
        return Err(Error::GridTooSmall(
            "fewer than two h values survive the resolution clip".into(),
        ));
    }
    let mut rows = Vec::with_capacity(hs.len());
    for &h in &hs {
        let sol = build_cgo(op, xi, h, amplitude, cutoff)?;
        rows.push((h, sol.weighted_remainder_sup(probe_margin)));
    }
    let monotone = rows.windows(2).all(|w| w[1].1 < w[0].1);
    // linear fit log W = intercept + slope / h
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(h, w)| (1.0 / h, w.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayProfile {
        rows: rows
            .iter()
            .zip(&pts)
            .map(|(&(h, w), p)| (h, w, p.1 - intercept - slope * p.0))
            .collect(),
        slope,
        intercept,
        r_squared,
        monotone,
    })
}

/// Least-squares fit of samples `P(h_j)` by `sum_k c_k h^{-k}`,
/// `k = 0..=degree`.
#[derive(Debug, Clone)]
pub struct SymbolFit {
    pub coefficients: Vec<Complex64>,
    pub condition: f64,
    pub residual: f64,
}

pub fn leading_symbol_fit(
    h_values: &[f64],
    samples: &[Complex64],
    degree: usize,
) -> Result<SymbolFit> {
    if degree > 3 {
        return Err(Error::UnsupportedRank {
            rank: degree,
            supported: "0..=3",
        });
    }
    if h_values.len() != samples.len() || h_values.len() < degree + 1 {
        return Err(Error::DimensionMismatch(format!(
            "need at least {} distinct h samples, got {}",
            degree + 1,
            h_values.len()
        )));
    }
    let rows = h_values.len();
    let cols = degree + 1;
    let m = nalgebra::DMatrix::<f64>::from_fn(rows, cols, |i, j| h_values[i].powi(-(j as i32)));
    let svd = nalgebra::linalg::SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
    let condition = smax / smin.max(f64::MIN_POSITIVE);
    if condition > 1e12 {
        return Err(Error::IllConditionedFit { cond: condition });
    }
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let solve_real = |b: nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
        let mut y = u.transpose() * b;
        for (i, s) in svd.singular_values.iter().enumerate() {
            y[i] /= s;
        }
        vt.transpose() * y
    };
    let re = solve_real(nalgebra::DVector::from_iterator(
        rows,
        samples.iter().map(|z| z.re),
    ));
    let im = solve_real(nalgebra::DVector::from_iterator(
        rows,
        samples.iter().map(|z| z.im),
    ));
    let coefficients: Vec<Complex64> = (0..cols).map(|k| Complex64::new(re[k], im[k])).collect();
    let mut res2 = 0.0f64;
    let mut scale2 = 0.0f64;
    for (i, &h) in h_values.iter().enumerate() {
        let mut fit = Complex64::new(0.0, 0.0);
        for (k, c) in coefficients.iter().enumerate() {
            fit += c * h.powi(-(k as i32));
        }
        res2 += (fit - samples[i]).norm_sqr();
        scale2 += samples[i].norm_sqr();
    }
    Ok(SymbolFit {
        coefficients,
        condition,
        residual: (res2 / scale2.max(1.0)).sqrt(),
    })
}

/// Coefficient tensors frozen at one probe point, ranks 0..=3.
#[derive(Debug, Clone)]
pub struct PointCoefficients {
    tensors: [SymTensor; 4],
}

impl PointCoefficients {
    pub fn new(n: usize, tensors: [Option<SymTensor>; 4]) -> Result<Self> {
        let mut out: Vec<SymTensor> = Vec::with_capacity(4);
        for (rank, t) in tensors.into_iter().enumerate() {
            match t {
                Some(t) => {
                    if t.rank() != rank || t.dim() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "slot {rank} holds a rank-{} tensor in dimension {}",
                            t.rank(),
                            t.dim()
                        )));
                    }
                    out.push(t);
                }
                None => out.push(SymTensor::zeros(n, rank)),
            }
        }
        Ok(PointCoefficients {
            tensors: [
                out[0].clone(),
                out[1].clone(),
                out[2].clone(),
                out[3].clone(),
            ],
        })
    }

    pub fn dim(&self) -> usize {
        self.tensors[0].dim()
    }

    pub fn tensor(&self, rank: usize) -> &SymTensor {
        &self.tensors[rank]
    }

    /// Left side of the pointwise oscillatory identity:
    /// `sum_{l=1..3} (-1/h)^l <A_l, xi^(.l)> + A_0`.
    pub fn symbol_value(&self, xi: &NullVector, h: f64) -> Complex64 {
        let mut acc = self.tensors[0].eval_pairing(xi.components());
        for l in 1..=3 {
            let pairing = self.tensors[l].eval_pairing(xi.components());
            acc += (-1.0f64 / h).powi(l as i32) * pairing;
        }
        acc
    }
}

/// Fit the pointwise identity over the `h` sequence and unwind the sign
/// pattern: returns the per-rank pairings `<A_l, xi^(.l)>` for `l = 0..3`.
pub fn local_symbol_extraction(
    coeffs: &PointCoefficients,
    xi: &NullVector,
    h_list: &[f64],
) -> Result<[Complex64; 4]> {
    let samples: Vec<Complex64> = h_list.iter().map(|&h| coeffs.symbol_value(xi, h)).collect();
    let fit = leading_symbol_fit(h_list, &samples, 3)?;
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for l in 0..4 {
        out[l] = fit.coefficients[l] * (-1.0f64).powi(l as i32);
    }
    Ok(out)
}

/// Full recovery of one set of point coefficients from fits alone.
#[derive(Debug, Clone)]
pub struct SymbolCascade {
    pub tracefree3: SymTensor,
    pub tracefree2: SymTensor,
    pub vector1: SymTensor,
    pub scalar0: Complex64,
    /// isotropic residue of the rank-3 slot, from the coordinate-amplitude pass
    pub iso_vector: SymTensor,
    /// isotropic residue of the rank-2 slot, from the coordinate-amplitude pass
    pub iso_scalar: Complex64,
}

impl SymbolCascade {
    /// Reassembled rank-3 tensor `tracefree3 + i_delta(iso_vector)`.
    pub fn full_rank3(&self) -> SymTensor {
        self.tracefree3
            .add(&crate::tensor::i_delta(&self.iso_vector).expect("rank 1"))
    }

    pub fn full_rank2(&self) -> SymTensor {
        let iso = SymTensor::scalar(self.tracefree2.dim(), self.iso_scalar);
        self.tracefree2
            .add(&crate::tensor::i_delta(&iso).expect("rank 0"))
    }
}

/// Run the order-by-order extraction at one point on synthetic data:
/// unit-amplitude fits feed the null-variety recovery of the trace-free
/// parts, then coordinate-amplitude fits recover the isotropic residues
/// from `(i/h^2) <a1, xi> xi_l - (i/h) a0 xi_l`.
pub fn symbol_cascade(coeffs: &PointCoefficients, h_list: &[f64]) -> Result<SymbolCascade> {
    let n = coeffs.dim();
    // first pass: amplitude 1
    let ps3 = ProbeSet::standard(n, 3)?;
    let mut values3 = Vec::with_capacity(ps3.vectors().len());
    for xi in ps3.vectors() {
        values3.push(local_symbol_extraction(coeffs, xi, h_list)?[3]);
    }
    let tracefree3 = ps3.recover(&values3)?;

    let extract = |rank: usize| {
        move |xi: &NullVector| -> Complex64 {
            local_symbol_extraction(coeffs, xi, h_list).expect("fit on interior probe")[rank]
        }
    };
    let tracefree2 = recover_general(extract(2), n, 2)?;
    let vector1 = recover_vector(extract(1), n)?;
    // rank-0: consistent across probes by construction; average over the
    // rank-1 probe family
    let ps1 = ProbeSet::standard(n, 1)?;
    let mut scalar0 = Complex64::new(0.0, 0.0);
    for xi in ps1.vectors() {
        scalar0 += local_symbol_extraction(coeffs, xi, h_list)?[0];
    }
    scalar0 /= ps1.vectors().len() as f64;

    // second pass: coordinate amplitudes see only the isotropic residues
    let (_, a1) = trace_free_decompose(coeffs.tensor(3))?;
    let (_, a0t) = trace_free_decompose(coeffs.tensor(2))?;
    let a0 = a0t.get(&[]);
    // synthesized left side for amplitude x_l, fitted in 1/h of degree 2:
    // c2 = i <a1, xi> xi_l, c1 = -i a0 xi_l
    let pairing_a1 = |xi: &NullVector| -> Result<Complex64> {
        let l = 0usize; // xi_1 = i never vanishes on the probe family
        let xil = xi.components()[l];
        let a1_pair: Complex64 = a1
            .entries()
            .iter()
            .zip(xi.components())
            .map(|(a, x)| a * x)
            .sum();
        let samples: Vec<Complex64> = h_list
            .iter()
            .map(|&h| ONE_I / (h * h) * a1_pair * xil - ONE_I / h * a0 * xil)
            .collect();
        let fit = leading_symbol_fit(h_list, &samples, 2)?;
        Ok(fit.coefficients[2] * (-ONE_I) / xil)
    };
    let iso_vector = recover_vector(|xi| pairing_a1(xi).expect("degree-2 fit"), n)?;
    let mut iso_scalar = Complex64::new(0.0, 0.0);
    for xi in ps1.vectors() {
        let xil = xi.components()[0];
        let a1_pair: Complex64 = a1
            .entries()
            .iter()
            .zip(xi.components())
            .map(|(a, x)| a * x)
            .sum();
        let samples: Vec<Complex64> = h_list
            .iter()
            .map(|&h| ONE_I / (h * h) * a1_pair * xil - ONE_I / h * a0 * xil)
            .collect();
        let fit = leading_symbol_fit(h_list, &samples, 2)?;
        iso_scalar += fit.coefficients[1] * ONE_I / xil;
    }
    iso_scalar /= ps1.vectors().len() as f64;

    Ok(SymbolCascade {
        tracefree3,
        tracefree2,
        vector1,
        scalar0,
        iso_vector,
        iso_scalar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::i_delta;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xi_standard(tau: f64) -> NullVector {
        NullVector::new(vec![Complex64::new(0.0, tau), Complex64::new(tau, 0.0)]).unwrap()
    }

    #[test]
    fn cutoff_shape_and_validation() {
        let grid = GridDomain::new(15).unwrap();
        let cut = CutoffSpec::for_gamma(&grid, 0.25).unwrap();
        assert_eq!(cut.chi(0.0, 0.5), 1.0);
        assert_eq!(cut.chi(0.1, 0.9), 1.0);
        assert_eq!(cut.chi(0.3, 0.5), 0.0);
        let mid = cut.chi(0.1875, 0.5); // halfway through the band
        assert_relative_eq!(mid, 0.5, epsilon = 1e-12);
        cut.validate(&grid).unwrap();
        // support function of the band: max x1 over supp(chi) boundary nodes
        let hk = cut.support_function(&grid, (1.0, 0.0));
        assert!(hk <= 0.25 + 1e-12);
    }

    #[test]
    fn zero_cutoff_gives_pure_oscillatory_solution() {
        let grid = GridDomain::new(9).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let sol = build_cgo(&op, &xi_standard(1.0), 0.5, Amplitude::One, &CutoffSpec::zero())
            .unwrap();
        assert_eq!(sol.remainder.norm_inf(), 0.0);
        let (x, y) = grid.coords(4, 6);
        let want = phase(&sol.xi, 0.5, x, y);
        assert!((sol.field.at(4, 6) - want).norm() < 1e-15);
    }

    #[test]
    fn imposed_gamma_traces_vanish() {
        let grid = GridDomain::new(15).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let cut = CutoffSpec::for_gamma(&grid, 0.25).unwrap();
        for amp in [Amplitude::One, Amplitude::Coordinate(1)] {
            let sol = build_cgo(&op, &xi_standard(1.0), 0.5, amp, &cut).unwrap();
            let (v, d) = sol.gamma_trace_imposed();
            assert!(v < 1e-12, "field trace {v:.3e}");
            assert!(d < 1e-12, "imposed derivative trace {d:.3e}");
        }
    }

    #[test]
    fn measured_gamma_traces_refine_at_second_order() {
        let xi = xi_standard(1.0);
        let mut errs = Vec::new();
        for n in [15usize, 31] {
            let grid = GridDomain::new(n).unwrap();
            let op = ClampedBilaplacian::assemble(&grid).unwrap();
            let cut = CutoffSpec::for_gamma(&grid, 0.25).unwrap();
            let sol = build_cgo(&op, &xi, 0.5, Amplitude::One, &cut).unwrap();
            let (v, d) = sol.gamma_trace_measured();
            assert!(v < 1e-12);
            errs.push(d);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.5, "trace refinement order {order:.2}");
    }

    #[test]
    fn oscillatory_part_is_discretely_biharmonic_to_stencil_accuracy() {
        let grid = GridDomain::new(31).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let xi = xi_standard(1.0);
        let h = 0.5;
        let sol = build_cgo(
            &op,
            &xi,
            h,
            Amplitude::Coordinate(1),
            &CutoffSpec::for_gamma(&grid, 0.25).unwrap(),
        )
        .unwrap();
        let res = sol.interior_biharmonic_residual();
        // bound C (1 + |xi|/h)^4 h_grid^2 with a modest constant
        let xi_norm = 2.0f64.sqrt();
        let bound = 10.0 * (1.0 + xi_norm / h).powi(4) * grid.h() * grid.h();
        assert!(res < bound, "residual {res:.3e} vs bound {bound:.3e}");
    }

    #[test]
    fn decay_profile_is_monotone_with_negative_slope() {
        let grid = GridDomain::new(31).unwrap();
        let op = ClampedBilaplacian::assemble(&grid).unwrap();
        let cut = CutoffSpec::for_gamma(&grid, 0.25).unwrap();
        let profile = remainder_decay_profile(
            &op,
            &xi_standard(1.0),
            Amplitude::One,
            &cut,
            &default_h_list(),
            0.5,
        )
        .unwrap();
        profile.certificate().unwrap();
        assert!(profile.monotone);
        assert!(profile.slope < 0.0, "slope {}", profile.slope);
        assert!(profile.r_squared > 0.9, "R^2 {}", profile.r_squared);
    }

    #[test]
    fn clipping_respects_resolution_floor() {
        let grid = GridDomain::new(15).unwrap();
        let xi = xi_standard(2.0);
        let hs = clip_h_list(&default_h_list(), &grid, &xi);
        let floor = 4.0 * grid.h() * 8.0f64.sqrt();
        assert!(hs.iter().all(|&h| h >= floor));
        assert!(hs.len() < default_h_list().len());
    }

    #[test]
    fn symbol_fit_exact_polynomial() {
        let hs: Vec<f64> = vec![0.4, 0.32, 0.256, 0.2048];
        let samples: Vec<Complex64> = hs
            .iter()
            .map(|&h| Complex64::new(5.0 / h.powi(3) - 2.0 / h + 1.0, 0.0))
            .collect();
        let fit = leading_symbol_fit(&hs, &samples, 3).unwrap();
        let want = [1.0, -2.0, 0.0, 5.0];
        for (k, w) in want.iter().enumerate() {
            assert_relative_eq!(fit.coefficients[k].re, *w, epsilon = 1e-10);
            assert!(fit.coefficients[k].im.abs() < 1e-10);
        }
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn symbol_fit_zero_samples() {
        let hs = default_h_list();
        let samples = vec![Complex64::new(0.0, 0.0); hs.len()];
        let fit = leading_symbol_fit(&hs, &samples, 3).unwrap();
        for c in fit.coefficients {
            assert_eq!(c.norm(), 0.0);
        }
    }

    #[test]
    fn symbol_fit_survives_exponential_contamination() {
        let hs = default_h_list();
        let samples: Vec<Complex64> = hs
            .iter()
            .map(|&h| {
                Complex64::new(
                    5.0 / h.powi(3) - 2.0 / h + 1.0 + (-1.0 / h).exp(),
                    0.0,
                )
            })
            .collect();
        let fit = leading_symbol_fit(&hs, &samples, 3).unwrap();
        let rel = (fit.coefficients[3].re - 5.0).abs() / 5.0;
        assert!(rel < 0.01, "cubic coefficient off by {:.3}%", rel * 100.0);
    }

    #[test]
    fn symbol_fit_flags_ill_conditioning() {
        // nearly coincident h values make the fit matrix numerically singular
        let hs = vec![0.4, 0.4 + 1e-15, 0.4 + 2e-15, 0.4 + 3e-15];
        let samples = vec![Complex64::new(1.0, 0.0); 4];
        assert!(matches!(
            leading_symbol_fit(&hs, &samples, 3),
            Err(Error::IllConditionedFit { .. })
        ));
    }

    #[test]
    fn extraction_zero_coefficients() {
        let coeffs = PointCoefficients::new(2, [None, None, None, None]).unwrap();
        let out =
            local_symbol_extraction(&coeffs, &xi_standard(1.0), &default_h_list()).unwrap();
        for v in out {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn extraction_constant_vector_coefficient() {
        // A1 = e1 only: the fit must place -<e1, xi> at order one and
        // nothing elsewhere
        let coeffs = PointCoefficients::new(
            2,
            [None, Some(SymTensor::basis_vector(2, 0)), None, None],
        )
        .unwrap();
        let xi = xi_standard(1.0);
        let out = local_symbol_extraction(&coeffs, &xi, &default_h_list()).unwrap();
        let want = SymTensor::basis_vector(2, 0).eval_pairing(xi.components());
        assert!((out[1] - want).norm() < 1e-9);
        assert!(out[0].norm() < 1e-9);
        assert!(out[2].norm() < 1e-9);
        assert!(out[3].norm() < 1e-9);
    }

    #[test]
    fn cascade_recovers_random_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 3;
        let rand_tensor = |rng: &mut ChaCha8Rng, rank: usize| {
            let mut t = SymTensor::zeros(n, rank);
            for idx in crate::tensor::sorted_multi_indices(n, rank) {
                t.set(&idx, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
            }
            t
        };
        let a = [
            Some(rand_tensor(&mut rng, 0)),
            Some(rand_tensor(&mut rng, 1)),
            Some(rand_tensor(&mut rng, 2)),
            Some(rand_tensor(&mut rng, 3)),
        ];
        let coeffs = PointCoefficients::new(n, a).unwrap();
        let cas = symbol_cascade(&coeffs, &default_h_list()).unwrap();
        let (tf3, a1) = trace_free_decompose(coeffs.tensor(3)).unwrap();
        let (tf2, a0) = trace_free_decompose(coeffs.tensor(2)).unwrap();
        assert!(cas.tracefree3.sub(&tf3).norm_inf() < 1e-8);
        assert!(cas.tracefree2.sub(&tf2).norm_inf() < 1e-8);
        assert!(cas.vector1.sub(coeffs.tensor(1)).norm_inf() < 1e-8);
        assert!((cas.scalar0 - coeffs.tensor(0).get(&[])).norm() < 1e-8);
        assert!(cas.iso_vector.sub(&a1).norm_inf() < 1e-8);
        assert!((cas.iso_scalar - a0.get(&[])).norm() < 1e-8);
        assert!(cas.full_rank3().sub(coeffs.tensor(3)).norm_inf() < 1e-8);
        assert!(cas.full_rank2().sub(coeffs.tensor(2)).norm_inf() < 1e-8);
    }

    #[test]
    fn cascade_sees_isotropic_rank3_only_through_coordinate_pass() {
        // A3 = i_delta(e1): every rank-3 pairing on the null variety is
        // zero, yet the coordinate-amplitude pass recovers e1
        let iso3 = i_delta(&SymTensor::basis_vector(2, 0)).unwrap();
        let coeffs = PointCoefficients::new(2, [None, None, None, Some(iso3)]).unwrap();
        let ps = ProbeSet::standard(2, 3).unwrap();
        for xi in ps.vectors() {
            let out = local_symbol_extraction(&coeffs, xi, &default_h_list()).unwrap();
            assert!(out[3].norm() < 1e-9, "rank-3 pairing should vanish");
        }
        let cas = symbol_cascade(&coeffs, &default_h_list()).unwrap();
        assert!(cas.tracefree3.norm_inf() < 1e-8);
        assert!(
            cas.iso_vector
                .sub(&SymTensor::basis_vector(2, 0))
                .norm_inf()
                < 1e-8
        );
    }
}
