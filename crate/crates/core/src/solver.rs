//! Direct solver for the clamped bilaplacian on the unit square.
//!
//! The interior operator is the standard 13-point stencil for the
//! squared Laplacian. Dirichlet values enter the right-hand side
//! directly; normal-derivative data are imposed by eliminating the ghost
//! ring through the mirror rule `u_ghost = u_mirror + 2 h g` (outward
//! normal), which keeps the eliminated system symmetric positive
//! definite. The matrix is factored once per grid by a banded Cholesky
//! decomposition and reused across right-hand sides.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fd, CauchyData, DnData, DnSample, Edge, GridDomain, ScalarField};

/// 13-point stencil of `h^4 (-Laplacian)^2`: offsets and integer weights.
const STENCIL: [(isize, isize, f64); 13] = [
    (0, 0, 20.0),
    (1, 0, -8.0),
    (-1, 0, -8.0),
    (0, 1, -8.0),
    (0, -1, -8.0),
    (1, 1, 2.0),
    (1, -1, 2.0),
    (-1, 1, 2.0),
    (-1, -1, 2.0),
    (2, 0, 1.0),
    (-2, 0, 1.0),
    (0, 2, 1.0),
    (0, -2, 1.0),
];

/// Symmetric banded matrix in lower-band storage together with its
/// Cholesky factor.
struct BandedSpd {
    n: usize,
    kb: usize,
    /// assembled lower band, row-major: entry (i, j) at `i*(kb+1) + j-i+kb`
    a: Vec<f64>,
    /// Cholesky factor in the same layout
    l: Vec<f64>,
}

impl BandedSpd {
    fn new(n: usize, kb: usize) -> Self {
        BandedSpd {
            n,
            kb,
            a: vec![0.0; n * (kb + 1)],
            l: Vec::new(),
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.kb);
        i * (self.kb + 1) + (j + self.kb - i)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            let k = self.idx(i, j);
            self.a[k] += v;
        }
        // upper-triangle contributions arrive again from the mirrored row
    }

    fn factor(&mut self) -> Result<()> {
        let (n, kb) = (self.n, self.kb);
        let mut l = self.a.clone();
        for i in 0..n {
            let lo = i.saturating_sub(kb);
            for j in lo..=i {
                let mut sum = l[i * (kb + 1) + (j + kb - i)];
                let t0 = lo.max(j.saturating_sub(kb));
                for t in t0..j {
                    sum -= l[i * (kb + 1) + (t + kb - i)] * l[j * (kb + 1) + (t + kb - j)];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::SingularSystem { row: i, pivot: sum });
                    }
                    l[i * (kb + 1) + kb] = sum.sqrt();
                } else {
                    l[i * (kb + 1) + (j + kb - i)] = sum / l[j * (kb + 1) + kb];
                }
            }
        }
        self.l = l;
        Ok(())
    }

    /// Solve `A x = b` in place for a complex right-hand side using the
    /// real factor.
    fn solve(&self, b: &mut [Complex64]) {
        let (n, kb) = (self.n, self.kb);
        let l = &self.l;
        for i in 0..n {
            let lo = i.saturating_sub(kb);
            let mut sum = b[i];
            for j in lo..i {
                sum -= l[i * (kb + 1) + (j + kb - i)] * b[j];
            }
            b[i] = sum / l[i * (kb + 1) + kb];
        }
        for i in (0..n).rev() {
            let hi = (i + kb).min(n - 1);
            let mut sum = b[i];
            for j in (i + 1)..=hi {
                sum -= l[j * (kb + 1) + (i + kb - j)] * b[j];
            }
            b[i] = sum / l[i * (kb + 1) + kb];
        }
    }

    /// `y = A x` through the symmetric band.
    fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (n, kb) = (self.n, self.kb);
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let lo = i.saturating_sub(kb);
            for j in lo..=i {
                let v = self.a[i * (kb + 1) + (j + kb - i)];
                if v != 0.0 {
                    y[i] += v * x[j];
                    if i != j {
                        y[j] += v * x[i];
                    }
                }
            }
        }
        y
    }

    fn row_norm_inf(&self) -> f64 {
        let (n, kb) = (self.n, self.kb);
        let mut best = 0.0f64;
        for i in 0..n {
            let mut acc = 0.0;
            let lo = i.saturating_sub(kb);
            for j in lo..=i {
                acc += self.a[i * (kb + 1) + (j + kb - i)].abs();
            }
            let hi = (i + kb).min(n - 1);
            for j in (i + 1)..=hi {
                acc += self.a[j * (kb + 1) + (i + kb - j)].abs();
            }
            best = best.max(acc);
        }
        best
    }
}

/// Assembled and factored clamped-plate operator for one grid.
///
/// Concurrent solves against a shared instance are safe; assembly itself
/// is single-threaded.
pub struct ClampedBilaplacian {
    grid: GridDomain,
    band: BandedSpd,
    /// per row: Dirichlet couplings `(boundary id, stencil weight)`
    f_contrib: Vec<Vec<(u32, f64)>>,
    /// per row: normal-derivative couplings `(boundary id, weight)`
    /// already scaled by `2h`
    g_contrib: Vec<Vec<(u32, f64)>>,
}

impl ClampedBilaplacian {
    pub fn assemble(grid: &GridDomain) -> Result<Self> {
        let nn = grid.n_interior();
        if nn < 5 {
            return Err(Error::GridTooSmall(
                "the 13-point stencil needs at least 5 interior nodes per axis".into(),
            ));
        }
        let n = nn * nn;
        let kb = 2 * nn;
        let h = grid.h();
        let mut band = BandedSpd::new(n, kb);
        let mut f_contrib = vec![Vec::new(); n];
        let mut g_contrib = vec![Vec::new(); n];
        let row_of = |ix: usize, iy: usize| (iy - 1) * nn + (ix - 1);
        let m = nn as isize + 1;

        for iy in 1..=nn {
            for ix in 1..=nn {
                let row = row_of(ix, iy);
                for &(dx, dy, c) in &STENCIL {
                    let jx = ix as isize + dx;
                    let jy = iy as isize + dy;
                    let x_out = jx < 0 || jx > m;
                    let y_out = jy < 0 || jy > m;
                    if x_out || y_out {
                        // ghost node: reached only straight across an edge,
                        // so its mirror is the row's own node
                        debug_assert!(x_out ^ y_out);
                        let (bx, by, mx, my) = if jx < 0 {
                            (0, jy as usize, 1, jy as usize)
                        } else if jx > m {
                            (m as usize, jy as usize, nn, jy as usize)
                        } else if jy < 0 {
                            (jx as usize, 0, jx as usize, 1)
                        } else {
                            (jx as usize, m as usize, jx as usize, nn)
                        };
                        debug_assert_eq!((mx, my), (ix, iy));
                        band.add(row, row_of(mx, my), c);
                        g_contrib[row].push((grid.boundary_id(bx, by) as u32, c * 2.0 * h));
                    } else if grid.is_boundary(jx as usize, jy as usize) {
                        f_contrib[row]
                            .push((grid.boundary_id(jx as usize, jy as usize) as u32, c));
                    } else {
                        let col = row_of(jx as usize, jy as usize);
                        band.add(row, col, c);
                    }
                }
            }
        }
        band.factor()?;
        Ok(ClampedBilaplacian {
            grid: grid.clone(),
            band,
            f_contrib,
            g_contrib,
        })
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    /// Solve `(-Laplacian)^2 u = source` with clamped data `(f, g)`.
    ///
    /// The returned field carries the Dirichlet values on the boundary
    /// ring and mirror-consistent ghost values.
    pub fn solve(&self, source: Option<&ScalarField>, data: &CauchyData) -> Result<ScalarField> {
        assert_eq!(data.grid(), &self.grid, "boundary data grid mismatch");
        let nn = self.grid.n_interior();
        let h = self.grid.h();
        let h4 = h.powi(4);
        let mut rhs = vec![Complex64::new(0.0, 0.0); nn * nn];
        if let Some(s) = source {
            assert_eq!(s.grid(), &self.grid, "source grid mismatch");
            for iy in 1..=nn {
                for ix in 1..=nn {
                    rhs[(iy - 1) * nn + (ix - 1)] = h4 * s.at(ix as isize, iy as isize);
                }
            }
        }
        for (row, rv) in rhs.iter_mut().enumerate() {
            for &(bid, c) in &self.f_contrib[row] {
                *rv -= c * data.f[bid as usize];
            }
            for &(bid, c) in &self.g_contrib[row] {
                *rv -= c * data.g[bid as usize];
            }
        }
        let b_norm = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut x = rhs.clone();
        self.band.solve(&mut x);

        // backward-stability check of the direct solve
        let ax = self.band.matvec(&x);
        let resid = ax
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let x_norm = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let scale = self.band.row_norm_inf() * x_norm + b_norm;
        if resid > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::ResidualTooLarge {
                residual: resid,
                tol: 1e-10 * scale,
            });
        }

        let mut u = ScalarField::zeros(&self.grid);
        for iy in 1..=nn {
            for ix in 1..=nn {
                *u.at_mut(ix as isize, iy as isize) = x[(iy - 1) * nn + (ix - 1)];
            }
        }
        for (ix, iy) in self.grid.boundary_nodes() {
            *u.at_mut(ix as isize, iy as isize) = data.f_at(ix, iy);
        }
        fill_ghosts(&mut u, data);
        Ok(u)
    }

    /// Dense copy of the eliminated system (test and diagnostics use).
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.band.n;
        let kb = self.band.kb;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let lo = i.saturating_sub(kb);
            for j in lo..=i {
                let v = self.band.a[i * (kb + 1) + (j + kb - i)];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

/// Fill the ghost ring of a solved field from the mirror rule
/// `u_ghost = u_mirror + 2 h g`. Edges are written in the order left,
/// right, bottom, top, so at corner-adjacent ghost slots the horizontal
/// edges win.
fn fill_ghosts(u: &mut ScalarField, data: &CauchyData) {
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

/// Apply the 13-point bilaplacian to a field at every interior node,
/// consuming boundary values and the ghost ring near the edges.
pub fn apply_bilaplacian(u: &ScalarField) -> ScalarField {
    let grid = u.grid().clone();
    let n = grid.n_interior() as isize;
    let h4 = grid.h().powi(4);
    let mut out = ScalarField::zeros(&grid);
    for iy in 1..=n {
        for ix in 1..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(dx, dy, c) in &STENCIL {
                acc += c * u.at(ix + dx, iy + dy);
            }
            *out.at_mut(ix, iy) = acc / h4;
        }
    }
    out
}

/// Which boundary nodes to sample when extracting traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLocation {
    /// Accessible part only (non-corner nodes outside the closed set).
    Sigma,
    /// Every non-corner boundary node.
    FullBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub edge: Edge,
    pub arclength: f64,
    pub ix: usize,
    pub iy: usize,
    pub value: Complex64,
}

fn trace_nodes(grid: &GridDomain, loc: TraceLocation) -> Vec<(Edge, f64, usize, usize)> {
    match loc {
        TraceLocation::Sigma => grid.sigma_nodes(),
        TraceLocation::FullBoundary => grid
            .boundary_nodes()
            .into_iter()
            .filter(|&(ix, iy)| !grid.is_corner(ix, iy))
            .map(|(ix, iy)| {
                let edge = grid.edges_of(ix, iy)[0];
                (edge, grid.arclength(edge, ix, iy), ix, iy)
            })
            .collect(),
    }
}

/// One-sided normal-derivative trace of the given order (1..=3) at the
/// requested boundary nodes, second-order accurate.
pub fn normal_trace(
    u: &ScalarField,
    order: usize,
    loc: TraceLocation,
) -> Result<Vec<TraceSample>> {
    if !(1..=3).contains(&order) {
        return Err(Error::UnsupportedRank {
            rank: order,
            supported: "1..=3",
        });
    }
    let grid = u.grid();
    // the widest trace stencil reaches 7 nodes into the interior
    if grid.nodes_per_axis() < 7 {
        return Err(Error::GridTooSmall(
            "one-sided trace stencil exits the grid".into(),
        ));
    }
    Ok(trace_nodes(grid, loc)
        .into_iter()
        .map(|(edge, s, ix, iy)| TraceSample {
            edge,
            arclength: s,
            ix,
            iy,
            value: fd::normal_derivative(u, edge, ix, iy, order),
        })
        .collect())
}

/// Second and third normal-derivative traces bundled as one dataset.
pub fn dn_data(u: &ScalarField, loc: TraceLocation) -> Result<DnData> {
    let d2 = normal_trace(u, 2, loc)?;
    let d3 = normal_trace(u, 3, loc)?;
    let samples = d2
        .into_iter()
        .zip(d3)
        .map(|(a, b)| {
            debug_assert_eq!((a.ix, a.iy), (b.ix, b.iy));
            DnSample {
                edge: a.edge,
                arclength: a.arclength,
                ix: a.ix,
                iy: a.iy,
                d2: a.value,
                d3: b.value,
            }
        })
        .collect();
    Ok(DnData {
        n_interior: u.grid().n_interior(),
        samples,
    })
}
