use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::Serialize;

use crate::numerics::Grid;
use crate::C64;

/// Subinterval on which an operator's input or output lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Support {
    /// [−1, 0]
    Left,
    /// [0, 1]
    Right,
    /// [−1, 1]
    Whole,
}

impl Support {
    pub fn union(self, other: Support) -> Support {
        if self == other {
            self
        } else {
            Support::Whole
        }
    }

    pub fn contains(self, x: f64) -> bool {
        match self {
            Support::Left => x <= 0.0,
            Support::Right => x >= 0.0,
            Support::Whole => true,
        }
    }
}

/// A grid together with the majorant weights `wᵢ|r(xᵢ)|` and signs of `r`.
#[derive(Debug, Clone)]
pub struct WeightedGrid {
    pub grid: Grid,
    pub r: Vec<f64>,
    pub weights: Vec<f64>,
    pub sign: Vec<f64>,
}

impl WeightedGrid {
    pub fn new(grid: Grid, r: impl Fn(f64) -> f64) -> Self {
        let r: Vec<f64> = grid.nodes().iter().map(|&x| r(x)).collect();
        let weights = grid.weights().iter().zip(&r).map(|(w, r)| w * r.abs()).collect();
        let sign = r.iter().map(|r| r.signum()).collect();
        WeightedGrid { grid, r, weights, sign }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `⟨f, g⟩ = ∫ f ḡ |r|`.
    pub fn inner(&self, f: &DVector<C64>, g: &DVector<C64>) -> C64 {
        f.iter().zip(g.iter()).zip(&self.weights).map(|((a, b), w)| a * b.conj() * *w).sum()
    }

    /// `[f, g] = ∫ f ḡ r`.
    pub fn krein(&self, f: &DVector<C64>, g: &DVector<C64>) -> C64 {
        f.iter().zip(g.iter()).zip(self.weights.iter().zip(&self.sign)).map(|((a, b), (w, s))| a * b.conj() * (w * s)).sum()
    }

    pub fn norm(&self, f: &DVector<C64>) -> f64 {
        self.inner(f, f).re.max(0.0).sqrt()
    }

    pub fn apply_j(&self, f: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(f.len(), f.iter().zip(&self.sign).map(|(v, s)| v * *s))
    }
}

/// Sparse matrix acting on node values.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorGrid {
    pub matrix: CsrMatrix<C64>,
    pub domain: Support,
    pub codomain: Support,
}

impl OperatorGrid {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, C64)], domain: Support, codomain: Support) -> Self {
        let mut coo = CooMatrix::new(n, n);
        for &(i, j, v) in triplets {
            coo.push(i, j, v);
        }
        OperatorGrid { matrix: CsrMatrix::from(&coo), domain, codomain }
    }

    pub fn zeros(n: usize) -> Self {
        OperatorGrid { matrix: CsrMatrix::zeros(n, n), domain: Support::Whole, codomain: Support::Whole }
    }

    pub fn identity(n: usize) -> Self {
        OperatorGrid { matrix: CsrMatrix::identity(n), domain: Support::Whole, codomain: Support::Whole }
    }

    /// Multiplication by `values` on the nodes in `support`.
    pub fn multiplication(grid: &Grid, support: Support, values: impl Fn(f64) -> f64) -> Self {
        let t: Vec<_> = grid
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, &x)| support.contains(x))
            .map(|(i, &x)| (i, i, C64::new(values(x), 0.0)))
            .filter(|t| t.2.re != 0.0)
            .collect();
        Self::from_triplets(grid.len(), &t, support, support)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, f: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.matrix.nrows());
        for (i, row) in self.matrix.row_iter().enumerate() {
            out[i] = row.col_indices().iter().zip(row.values()).map(|(&j, v)| v * f[j]).sum();
        }
        out
    }

    /// Adjoint with respect to `⟨f, g⟩ = Σ wᵢ|rᵢ| fᵢ ḡᵢ`: `D⁻¹ Aᴴ D`.
    pub fn adjoint(&self, wg: &WeightedGrid) -> OperatorGrid {
        let d = &wg.weights;
        let t: Vec<_> = self.matrix.triplet_iter().map(|(i, j, v)| (j, i, v.conj() * (d[i] / d[j]))).collect();
        Self::from_triplets(self.dim(), &t, self.codomain, self.domain)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &OperatorGrid) -> OperatorGrid {
        OperatorGrid { matrix: &self.matrix * &other.matrix, domain: other.domain, codomain: self.codomain }
    }

    pub fn add(&self, other: &OperatorGrid) -> OperatorGrid {
        OperatorGrid {
            matrix: &self.matrix + &other.matrix,
            domain: self.domain.union(other.domain),
            codomain: self.codomain.union(other.codomain),
        }
    }

    pub fn scale(&self, a: C64) -> OperatorGrid {
        let mut m = self.matrix.clone();
        m.values_mut().iter_mut().for_each(|v| *v *= a);
        OperatorGrid { matrix: m, domain: self.domain, codomain: self.codomain }
    }

    /// Row scaling by the sign of r, i.e. `J₀ ∘ self`.
    pub fn apply_j(&self, wg: &WeightedGrid) -> OperatorGrid {
        let t: Vec<_> = self.matrix.triplet_iter().map(|(i, j, v)| (i, j, v * wg.sign[i])).collect();
        Self::from_triplets(self.dim(), &t, self.domain, self.codomain)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.matrix.triplet_iter() {
            m[(i, j)] += *v;
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }
}

/// `D^{1/2} A D^{-1/2}` for a dense `A`, so that majorant forms become Euclidean.
pub fn similarity(a: &DMatrix<C64>, weights: &[f64]) -> DMatrix<C64> {
    let s: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (s[i] / s[j]))
}
