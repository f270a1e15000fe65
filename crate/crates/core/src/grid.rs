//! Discretized unit square with a partitioned boundary.
//!
//! Nodes live at `(ix, iy) * h` for `ix, iy in 0..=N+1` with spacing
//! `h = 1/(N+1)`; scalar fields carry one extra ghost ring used by the
//! clamped solver to impose normal-derivative data. The boundary splits
//! into an inaccessible closed part (a union of closed edge segments,
//! by default the whole left edge) and its accessible complement.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four edges of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    /// Outward unit normal.
    pub fn normal(self) -> (f64, f64) {
        match self {
            Edge::Left => (-1.0, 0.0),
            Edge::Right => (1.0, 0.0),
            Edge::Bottom => (0.0, -1.0),
            Edge::Top => (0.0, 1.0),
        }
    }

    /// Step from a boundary node one node into the interior.
    pub fn inward_step(self) -> (isize, isize) {
        match self {
            Edge::Left => (1, 0),
            Edge::Right => (-1, 0),
            Edge::Bottom => (0, 1),
            Edge::Top => (0, -1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Bottom => "bottom",
            Edge::Top => "top",
        }
    }
}

/// Closed sub-segment of an edge in arclength coordinates `[lo, hi]`,
/// with `0 <= lo <= hi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub edge: Edge,
    pub lo: f64,
    pub hi: f64,
}

impl EdgeSegment {
    pub fn full(edge: Edge) -> Self {
        EdgeSegment { edge, lo: 0.0, hi: 1.0 }
    }
}

/// Discretized unit square `[0,1]^2` with `n_interior` interior nodes per
/// axis and a boundary partition into an inaccessible closed set and its
/// open complement.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    n_interior: usize,
    gamma: Vec<EdgeSegment>,
}

impl GridDomain {
    /// Grid with the default inaccessible set: the full left edge.
    pub fn new(n_interior: usize) -> Result<Self> {
        Self::with_gamma(n_interior, vec![EdgeSegment::full(Edge::Left)])
    }

    pub fn with_gamma(n_interior: usize, gamma: Vec<EdgeSegment>) -> Result<Self> {
        if n_interior < 5 {
            return Err(Error::GridTooSmall(format!(
                "need at least 5 interior nodes per axis, got {n_interior}"
            )));
        }
        for seg in &gamma {
            if !(0.0..=1.0).contains(&seg.lo) || !(0.0..=1.0).contains(&seg.hi) || seg.lo > seg.hi
            {
                return Err(Error::InvalidDomain(format!(
                    "bad segment [{}, {}] on {} edge",
                    seg.lo,
                    seg.hi,
                    seg.edge.name()
                )));
            }
        }
        let grid = GridDomain { n_interior, gamma };
        if grid.sigma_nodes().is_empty() {
            return Err(Error::InvalidDomain(
                "the accessible boundary part is empty".into(),
            ));
        }
        Ok(grid)
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Node spacing.
    pub fn h(&self) -> f64 {
        1.0 / (self.n_interior as f64 + 1.0)
    }

    /// Nodes per axis including the two boundary nodes.
    pub fn nodes_per_axis(&self) -> usize {
        self.n_interior + 2
    }

    pub fn gamma(&self) -> &[EdgeSegment] {
        &self.gamma
    }

    pub fn coords(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = self.h();
        (ix as f64 * h, iy as f64 * h)
    }

    pub fn is_boundary(&self, ix: usize, iy: usize) -> bool {
        let m = self.n_interior + 1;
        ix == 0 || iy == 0 || ix == m || iy == m
    }

    pub fn is_corner(&self, ix: usize, iy: usize) -> bool {
        let m = self.n_interior + 1;
        (ix == 0 || ix == m) && (iy == 0 || iy == m)
    }

    pub fn is_interior(&self, ix: usize, iy: usize) -> bool {
        let m = self.n_interior + 1;
        ix > 0 && iy > 0 && ix < m && iy < m
    }

    /// Edges a boundary node lies on (two for corners).
    pub fn edges_of(&self, ix: usize, iy: usize) -> Vec<Edge> {
        let m = self.n_interior + 1;
        let mut edges = Vec::with_capacity(2);
        if ix == 0 {
            edges.push(Edge::Left);
        }
        if ix == m {
            edges.push(Edge::Right);
        }
        if iy == 0 {
            edges.push(Edge::Bottom);
        }
        if iy == m {
            edges.push(Edge::Top);
        }
        edges
    }

    /// Arclength coordinate of a boundary node along the given edge.
    pub fn arclength(&self, edge: Edge, ix: usize, iy: usize) -> f64 {
        match edge {
            Edge::Left | Edge::Right => iy as f64 * self.h(),
            Edge::Bottom | Edge::Top => ix as f64 * self.h(),
        }
    }

    /// Whether a boundary node belongs to the inaccessible closed set.
    pub fn in_gamma(&self, ix: usize, iy: usize) -> bool {
        const TOL: f64 = 1e-12;
        for edge in self.edges_of(ix, iy) {
            let s = self.arclength(edge, ix, iy);
            for seg in &self.gamma {
                if seg.edge == edge && s >= seg.lo - TOL && s <= seg.hi + TOL {
                    return true;
                }
            }
        }
        false
    }

    /// Sequential index of a boundary node in the canonical enumeration
    /// (row-major over the grid). Total count is `4 n_interior + 4`.
    pub fn boundary_id(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(self.is_boundary(ix, iy));
        let m = self.n_interior + 1;
        if iy == 0 {
            ix
        } else if iy < m {
            (m + 1) + 2 * (iy - 1) + usize::from(ix != 0)
        } else {
            (m + 1) + 2 * self.n_interior + ix
        }
    }

    pub fn boundary_len(&self) -> usize {
        4 * self.n_interior + 4
    }

    /// All boundary nodes in canonical order.
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        let m = self.n_interior + 1;
        let mut out = Vec::with_capacity(self.boundary_len());
        for iy in 0..=m {
            for ix in 0..=m {
                if self.is_boundary(ix, iy) {
                    out.push((ix, iy));
                }
            }
        }
        out
    }

    /// Non-corner boundary nodes on the accessible part, each with its
    /// unique edge and arclength coordinate.
    pub fn sigma_nodes(&self) -> Vec<(Edge, f64, usize, usize)> {
        let mut out = Vec::new();
        for (ix, iy) in self.boundary_nodes() {
            if self.is_corner(ix, iy) || self.in_gamma(ix, iy) {
                continue;
            }
            let edge = self.edges_of(ix, iy)[0];
            out.push((edge, self.arclength(edge, ix, iy), ix, iy));
        }
        out
    }

    /// All boundary nodes (corners included) on the inaccessible part.
    pub fn gamma_nodes(&self) -> Vec<(usize, usize)> {
        self.boundary_nodes()
            .into_iter()
            .filter(|&(ix, iy)| self.in_gamma(ix, iy))
            .collect()
    }
}

/// Complex scalar field on the grid, including boundary nodes and one
/// ghost ring (indices -1 and N+2 on each axis).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridDomain,
    data: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridDomain) -> Self {
        let w = grid.nodes_per_axis() + 2;
        ScalarField {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); w * w],
        }
    }

    /// Fill every node, ghosts included, from an analytic function of the
    /// physical coordinates.
    pub fn from_fn_with_ghosts(grid: &GridDomain, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        let m = grid.nodes_per_axis() as isize;
        let h = grid.h();
        for iy in -1..=m {
            for ix in -1..=m {
                *out.at_mut(ix, iy) = f(ix as f64 * h, iy as f64 * h);
            }
        }
        out
    }

    /// Fill boundary and interior nodes only; ghosts stay zero.
    pub fn from_fn(grid: &GridDomain, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        let m = grid.nodes_per_axis() as isize - 1;
        let h = grid.h();
        for iy in 0..=m {
            for ix in 0..=m {
                *out.at_mut(ix, iy) = f(ix as f64 * h, iy as f64 * h);
            }
        }
        out
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    #[inline]
    fn flat(&self, ix: isize, iy: isize) -> usize {
        let w = self.grid.nodes_per_axis() as isize + 2;
        debug_assert!(ix >= -1 && ix <= w - 2 && iy >= -1 && iy <= w - 2);
        ((iy + 1) * w + (ix + 1)) as usize
    }

    #[inline]
    pub fn at(&self, ix: isize, iy: isize) -> Complex64 {
        self.data[self.flat(ix, iy)]
    }

    #[inline]
    pub fn at_mut(&mut self, ix: isize, iy: isize) -> &mut Complex64 {
        let k = self.flat(ix, iy);
        &mut self.data[k]
    }

    /// Max-norm over boundary and interior nodes (ghosts excluded).
    pub fn norm_inf(&self) -> f64 {
        let m = self.grid.nodes_per_axis() as isize - 1;
        let mut acc = 0.0f64;
        for iy in 0..=m {
            for ix in 0..=m {
                acc = acc.max(self.at(ix, iy).norm());
            }
        }
        acc
    }

    /// Max-norm over interior nodes only.
    pub fn norm_inf_interior(&self) -> f64 {
        let n = self.grid.n_interior() as isize;
        let mut acc = 0.0f64;
        for iy in 1..=n {
            for ix in 1..=n {
                acc = acc.max(self.at(ix, iy).norm());
            }
        }
        acc
    }

    /// In-place `self += c * other` over all stored nodes.
    pub fn axpy(&mut self, c: Complex64, other: &ScalarField) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale_in_place(&mut self, c: Complex64) {
        for a in self.data.iter_mut() {
            *a *= c;
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// Write the field as a self-describing file: one JSON header line
    /// followed by CSV rows `ix,iy,re,im` over non-ghost nodes.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            file,
            "{}",
            serde_json::json!({
                "N": self.grid.n_interior(),
                "domain": "unit_square",
                "complex": true,
            })
        )?;
        let m = self.grid.nodes_per_axis() as isize - 1;
        for iy in 0..=m {
            for ix in 0..=m {
                let v = self.at(ix, iy);
                writeln!(file, "{ix},{iy},{:?},{:?}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// Read a field written by [`ScalarField::write`]. Ghost values are
    /// left at zero.
    pub fn read(path: &Path) -> Result<Self> {
        let file = BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let header: serde_json::Value = serde_json::from_str(
            &lines
                .next()
                .ok_or_else(|| Error::Format("empty field file".into()))??,
        )?;
        let n = header
            .get("N")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Format("field header missing 'N'".into()))? as usize;
        let grid = GridDomain::new(n)?;
        let mut out = ScalarField::zeros(&grid);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Format(format!("bad field row: {line}")));
            }
            let ix: isize = parts[0].trim().parse().map_err(|_| Error::Format(format!("bad index in row: {line}")))?;
            let iy: isize = parts[1].trim().parse().map_err(|_| Error::Format(format!("bad index in row: {line}")))?;
            let re: f64 = parts[2].trim().parse().map_err(|_| Error::Format(format!("bad value in row: {line}")))?;
            let im: f64 = parts[3].trim().parse().map_err(|_| Error::Format(format!("bad value in row: {line}")))?;
            *out.at_mut(ix, iy) = Complex64::new(re, im);
        }
        Ok(out)
    }
}

/// Dirichlet pair `(f, g)` on the boundary nodes: the trace and the
/// outward normal derivative, indexed by the canonical boundary ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    grid: GridDomain,
    pub f: Vec<Complex64>,
    pub g: Vec<Complex64>,
}

impl CauchyData {
    pub fn zeros(grid: &GridDomain) -> Self {
        CauchyData {
            grid: grid.clone(),
            f: vec![Complex64::new(0.0, 0.0); grid.boundary_len()],
            g: vec![Complex64::new(0.0, 0.0); grid.boundary_len()],
        }
    }

    /// Build from analytic functions of the physical boundary point.
    pub fn from_fns(
        grid: &GridDomain,
        f: impl Fn(f64, f64) -> Complex64,
        g: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let mut out = Self::zeros(grid);
        for (ix, iy) in grid.boundary_nodes() {
            let (x, y) = grid.coords(ix, iy);
            let id = grid.boundary_id(ix, iy);
            out.f[id] = f(x, y);
            out.g[id] = g(x, y);
        }
        out
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn f_at(&self, ix: usize, iy: usize) -> Complex64 {
        self.f[self.grid.boundary_id(ix, iy)]
    }

    pub fn g_at(&self, ix: usize, iy: usize) -> Complex64 {
        self.g[self.grid.boundary_id(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, f: Complex64, g: Complex64) {
        let id = self.grid.boundary_id(ix, iy);
        self.f[id] = f;
        self.g[id] = g;
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &CauchyData) {
        assert_eq!(self.grid, other.grid);
        for (a, b) in self.f.iter_mut().zip(&other.f) {
            *a += c * b;
        }
        for (a, b) in self.g.iter_mut().zip(&other.g) {
            *a += c * b;
        }
    }

    pub fn scale(&self, c: Complex64) -> CauchyData {
        let mut out = self.clone();
        for a in out.f.iter_mut() {
            *a *= c;
        }
        for a in out.g.iter_mut() {
            *a *= c;
        }
        out
    }

    /// Amplitude in the max norm: `|f|_inf + |g|_inf`.
    pub fn amplitude(&self) -> f64 {
        let fmax = self.f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let gmax = self.g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        fmax + gmax
    }

    /// Largest modulus of `(f, g)` over nodes of the inaccessible set.
    pub fn max_on_gamma(&self) -> f64 {
        let mut acc = 0.0f64;
        for (ix, iy) in self.grid.gamma_nodes() {
            let id = self.grid.boundary_id(ix, iy);
            acc = acc.max(self.f[id].norm()).max(self.g[id].norm());
        }
        acc
    }
}

/// Sampled second and third normal-derivative traces on the accessible
/// boundary part (corners excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct DnData {
    pub n_interior: usize,
    pub samples: Vec<DnSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnSample {
    pub edge: Edge,
    pub arclength: f64,
    pub ix: usize,
    pub iy: usize,
    pub d2: Complex64,
    pub d3: Complex64,
}

impl DnData {
    /// `self += c * other`; sample sets must coincide.
    pub fn axpy(&mut self, c: Complex64, other: &DnData) {
        assert_eq!(self.n_interior, other.n_interior);
        assert_eq!(self.samples.len(), other.samples.len());
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            debug_assert_eq!((a.ix, a.iy), (b.ix, b.iy));
            a.d2 += c * b.d2;
            a.d3 += c * b.d3;
        }
    }

    pub fn scale_in_place(&mut self, c: Complex64) {
        for s in self.samples.iter_mut() {
            s.d2 *= c;
            s.d3 *= c;
        }
    }

    pub fn zeroed(&self) -> DnData {
        let mut out = self.clone();
        for s in out.samples.iter_mut() {
            s.d2 = Complex64::new(0.0, 0.0);
            s.d3 = Complex64::new(0.0, 0.0);
        }
        out
    }

    pub fn norm_inf(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.d2.norm().max(s.d3.norm()))
            .fold(0.0, f64::max)
    }

    /// Write one CSV per trace order: `<stem>_d2.csv` and `<stem>_d3.csv`
    /// with rows `edge,arclength,re,im`.
    pub fn write_csv(&self, stem: &Path) -> Result<()> {
        for (suffix, pick) in [
            ("d2", 0usize),
            ("d3", 1usize),
        ] {
            let path = stem.with_file_name(format!(
                "{}_{suffix}.csv",
                stem.file_name()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| "dn".into())
            ));
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            writeln!(file, "edge,arclength,re,im")?;
            for s in &self.samples {
                let v = if pick == 0 { s.d2 } else { s.d3 };
                writeln!(file, "{},{:?},{:?},{:?}", s.edge.name(), s.arclength, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Finite-difference stencils of second-order accuracy, centered in the
/// interior and one-sided near the edges.
pub mod fd {
    use super::{Edge, ScalarField};
    use num_complex::Complex64;

    /// (offsets, coefficients) pairs for interior nodes.
    const C1: ([isize; 3], [f64; 3]) = ([-1, 0, 1], [-0.5, 0.0, 0.5]);
    const C2: ([isize; 3], [f64; 3]) = ([-1, 0, 1], [1.0, -2.0, 1.0]);
    const C3: ([isize; 5], [f64; 5]) = ([-2, -1, 0, 1, 2], [-0.5, 1.0, 0.0, -1.0, 0.5]);

    /// One-sided stencils at distance 0 / 1 from the low end.
    const L1_0: ([isize; 3], [f64; 3]) = ([0, 1, 2], [-1.5, 2.0, -0.5]);
    const L2_0: ([isize; 4], [f64; 4]) = ([0, 1, 2, 3], [2.0, -5.0, 4.0, -1.0]);
    const L3_0: ([isize; 5], [f64; 5]) = ([0, 1, 2, 3, 4], [-2.5, 9.0, -12.0, 7.0, -1.5]);
    const L3_1: ([isize; 5], [f64; 5]) = ([-1, 0, 1, 2, 3], [-1.5, 5.0, -6.0, 3.0, -0.5]);

    /// Fourth-order-accurate one-sided stencils used for boundary traces,
    /// where the extraction error feeds measured data directly.
    const T2: ([isize; 6], [f64; 6]) = (
        [0, 1, 2, 3, 4, 5],
        [
            15.0 / 4.0,
            -77.0 / 6.0,
            107.0 / 6.0,
            -13.0,
            61.0 / 12.0,
            -5.0 / 6.0,
        ],
    );
    const T3: ([isize; 7], [f64; 7]) = (
        [0, 1, 2, 3, 4, 5, 6],
        [
            -49.0 / 8.0,
            29.0,
            -461.0 / 8.0,
            62.0,
            -307.0 / 8.0,
            13.0,
            -15.0 / 8.0,
        ],
    );

    fn stencil_1d(order: usize, pos: usize, len: usize) -> (Vec<isize>, Vec<f64>) {
        let flip = |(offs, coef): (Vec<isize>, Vec<f64>), sign: f64| {
            (
                offs.iter().map(|o| -o).collect(),
                coef.iter().map(|c| sign * c).collect(),
            )
        };
        let near_low = pos;
        let near_high = len - 1 - pos;
        match order {
            1 => {
                if near_low == 0 {
                    (L1_0.0.to_vec(), L1_0.1.to_vec())
                } else if near_high == 0 {
                    flip((L1_0.0.to_vec(), L1_0.1.to_vec()), -1.0)
                } else {
                    (C1.0.to_vec(), C1.1.to_vec())
                }
            }
            2 => {
                if near_low == 0 {
                    (L2_0.0.to_vec(), L2_0.1.to_vec())
                } else if near_high == 0 {
                    flip((L2_0.0.to_vec(), L2_0.1.to_vec()), 1.0)
                } else {
                    (C2.0.to_vec(), C2.1.to_vec())
                }
            }
            3 => {
                if near_low == 0 {
                    (L3_0.0.to_vec(), L3_0.1.to_vec())
                } else if near_low == 1 {
                    (L3_1.0.to_vec(), L3_1.1.to_vec())
                } else if near_high == 0 {
                    flip((L3_0.0.to_vec(), L3_0.1.to_vec()), -1.0)
                } else if near_high == 1 {
                    flip((L3_1.0.to_vec(), L3_1.1.to_vec()), -1.0)
                } else {
                    (C3.0.to_vec(), C3.1.to_vec())
                }
            }
            _ => panic!("derivative order must be 1..=3"),
        }
    }

    fn axis_pass(u: &ScalarField, order: usize, axis: usize) -> ScalarField {
        let grid = u.grid().clone();
        let len = grid.nodes_per_axis();
        let h = grid.h();
        let hp = h.powi(order as i32);
        let mut out = ScalarField::zeros(&grid);
        for iy in 0..len {
            for ix in 0..len {
                let pos = if axis == 0 { ix } else { iy };
                let (offsets, coeffs) = stencil_1d(order, pos, len);
                let mut acc = Complex64::new(0.0, 0.0);
                for (&o, &cf) in offsets.iter().zip(&coeffs) {
                    let (jx, jy) = if axis == 0 {
                        (ix as isize + o, iy as isize)
                    } else {
                        (ix as isize, iy as isize + o)
                    };
                    acc += cf * u.at(jx, jy);
                }
                *out.at_mut(ix as isize, iy as isize) = acc / hp;
            }
        }
        out
    }

    /// Partial derivative `d^(px+py) u / dx^px dy^py` on all non-ghost
    /// nodes, `px, py <= 3`, each axis handled by a single-order stencil.
    pub fn derivative(u: &ScalarField, px: usize, py: usize) -> ScalarField {
        assert!(px <= 3 && py <= 3 && px + py >= 1 && px + py <= 3);
        match (px, py) {
            (p, 0) => axis_pass(u, p, 0),
            (0, p) => axis_pass(u, p, 1),
            (p, q) => axis_pass(&axis_pass(u, p, 0), q, 1),
        }
    }

    /// Five-point Laplacian on all non-ghost nodes; boundary rows consume
    /// the ghost ring.
    pub fn laplacian_with_ghosts(u: &ScalarField) -> ScalarField {
        let grid = u.grid().clone();
        let len = grid.nodes_per_axis() as isize;
        let h2 = grid.h() * grid.h();
        let mut out = ScalarField::zeros(&grid);
        for iy in 0..len {
            for ix in 0..len {
                let acc = u.at(ix - 1, iy) + u.at(ix + 1, iy) + u.at(ix, iy - 1)
                    + u.at(ix, iy + 1)
                    - 4.0 * u.at(ix, iy);
                *out.at_mut(ix, iy) = acc / h2;
            }
        }
        out
    }

    /// One-sided derivative of `u` along the outward normal at a boundary
    /// node, of the given order (1..=3). Orders 2 and 3 use fourth-order
    /// stencils since their extraction error enters measured data.
    pub fn normal_derivative(
        u: &ScalarField,
        edge: Edge,
        ix: usize,
        iy: usize,
        order: usize,
    ) -> Complex64 {
        let h = u.grid().h();
        let (sx, sy) = edge.inward_step();
        let (offsets, coeffs): (Vec<isize>, Vec<f64>) = match order {
            1 => (L1_0.0.to_vec(), L1_0.1.to_vec()),
            2 => (T2.0.to_vec(), T2.1.to_vec()),
            3 => (T3.0.to_vec(), T3.1.to_vec()),
            _ => panic!("trace order must be 1..=3"),
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (&o, &cf) in offsets.iter().zip(&coeffs) {
            acc += cf * u.at(ix as isize + sx * o, iy as isize + sy * o);
        }
        // the one-sided stencil runs inward; flip sign for odd orders
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * acc / h.powi(order as i32)
    }
}
