//! Tensor-valued fields on the grid and their serializable specs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::tensor::{sym_len, SymTensor};

/// One symmetric tensor per non-ghost grid node, uniform rank and
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: GridDomain,
    dim: usize,
    rank: usize,
    values: Vec<SymTensor>,
}

impl TensorField {
    pub fn constant(grid: &GridDomain, tensor: SymTensor) -> Self {
        let count = grid.nodes_per_axis() * grid.nodes_per_axis();
        TensorField {
            grid: grid.clone(),
            dim: tensor.dim(),
            rank: tensor.rank(),
            values: vec![tensor; count],
        }
    }

    pub fn from_fn(
        grid: &GridDomain,
        dim: usize,
        rank: usize,
        f: impl Fn(f64, f64) -> SymTensor,
    ) -> Self {
        let w = grid.nodes_per_axis();
        let mut values = Vec::with_capacity(w * w);
        for iy in 0..w {
            for ix in 0..w {
                let (x, y) = grid.coords(ix, iy);
                let t = f(x, y);
                assert_eq!(t.dim(), dim);
                assert_eq!(t.rank(), rank);
                values.push(t);
            }
        }
        TensorField {
            grid: grid.clone(),
            dim,
            rank,
            values,
        }
    }

    pub fn zeros(grid: &GridDomain, dim: usize, rank: usize) -> Self {
        Self::constant(grid, SymTensor::zeros(dim, rank))
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn at(&self, ix: usize, iy: usize) -> &SymTensor {
        &self.values[iy * self.grid.nodes_per_axis() + ix]
    }

    pub fn at_mut(&mut self, ix: usize, iy: usize) -> &mut SymTensor {
        &mut self.values[iy * self.grid.nodes_per_axis() + ix]
    }

    /// `self += c * other` nodewise.
    pub fn axpy(&mut self, c: Complex64, other: &TensorField) {
        assert_eq!(self.grid, other.grid);
        assert_eq!((self.dim, self.rank), (other.dim, other.rank));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = a.add(&b.scale(c));
        }
    }

    pub fn scale(&self, c: Complex64) -> TensorField {
        let mut out = self.clone();
        for t in out.values.iter_mut() {
            *t = t.scale(c);
        }
        out
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|t| t.norm_inf()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from another field.
    pub fn distance_inf(&self, other: &TensorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.sub(b).norm_inf())
            .fold(0.0, f64::max)
    }
}

/// Serializable recipe for a tensor field: either one constant tensor or
/// polynomial-in-x entries per component.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TensorFieldSpec {
    Constant {
        tensor: SymTensor,
    },
    Polynomial {
        n: usize,
        rank: usize,
        components: Vec<PolyComponent>,
    },
}

/// Polynomial entries of one tensor component, identified by its
/// one-based sorted multi-index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyComponent {
    pub index: Vec<usize>,
    pub terms: Vec<PolyTerm>,
}

/// A single monomial `coeff * x1^p1 * x2^p2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolyTerm {
    pub powers: [usize; 2],
    pub coeff: f64,
}

impl TensorFieldSpec {
    pub fn constant(tensor: SymTensor) -> Self {
        TensorFieldSpec::Constant { tensor }
    }

    pub fn rank(&self) -> usize {
        match self {
            TensorFieldSpec::Constant { tensor } => tensor.rank(),
            TensorFieldSpec::Polynomial { rank, .. } => *rank,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TensorFieldSpec::Constant { tensor } => tensor.dim(),
            TensorFieldSpec::Polynomial { n, .. } => *n,
        }
    }

    /// Evaluate the spec on every node of a grid.
    pub fn materialize(&self, grid: &GridDomain) -> Result<TensorField> {
        match self {
            TensorFieldSpec::Constant { tensor } => Ok(TensorField::constant(grid, tensor.clone())),
            TensorFieldSpec::Polynomial { n, rank, components } => {
                if *rank > 3 {
                    return Err(Error::UnsupportedRank {
                        rank: *rank,
                        supported: "0..=3",
                    });
                }
                for c in components {
                    if c.index.len() != *rank
                        || c.index.iter().any(|&i| i == 0 || i > *n)
                    {
                        return Err(Error::Format(format!(
                            "bad component index {:?} for rank {rank}, n {n}",
                            c.index
                        )));
                    }
                }
                let (n, rank) = (*n, *rank);
                Ok(TensorField::from_fn(grid, n, rank, |x, y| {
                    let mut t = SymTensor::zeros(n, rank);
                    for c in components {
                        let idx: Vec<usize> = c.index.iter().map(|&i| i - 1).collect();
                        let mut v = 0.0;
                        for term in &c.terms {
                            v += term.coeff
                                * x.powi(term.powers[0] as i32)
                                * y.powi(term.powers[1] as i32);
                        }
                        t.set(&idx, Complex64::new(v, 0.0));
                    }
                    t
                }))
            }
        }
    }
}

/// Basis of polynomial tensor fields in 2D: for each rank in `ranks` and
/// each symmetric component, all monomials in x up to `degree`.
pub fn polynomial_field_specs(ranks: &[usize], degree: usize) -> Vec<TensorFieldSpec> {
    let n = 2usize;
    let mut out = Vec::new();
    for &rank in ranks {
        let count = sym_len(n, rank);
        let indices = crate::tensor::sorted_multi_indices(n, rank);
        for comp in 0..count {
            for total in 0..=degree {
                for px in 0..=total {
                    let py = total - px;
                    out.push(TensorFieldSpec::Polynomial {
                        n,
                        rank,
                        components: vec![PolyComponent {
                            index: indices[comp].iter().map(|&i| i + 1).collect(),
                            terms: vec![PolyTerm {
                                powers: [px, py],
                                coeff: 1.0,
                            }],
                        }],
                    });
                }
            }
        }
    }
    out
}
