//! The Krein space `L₂,r ⊕ ℂ²_Δ` sampled on a composite grid.

use nalgebra::{DVector, Matrix2, Vector2};
use thiserror::Error;

use crate::boundary_algebra::DeltaInfo;
use crate::numerics::Grid;
use crate::problem::ProblemSpec;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KreinError {
    #[error("element sampled on {found} nodes, space grid has {expected}")]
    GridMismatch { expected: usize, found: usize },
}

/// `(f; u)` with `f` sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceElement {
    pub fun: DVector<C64>,
    pub vec: Vector2<C64>,
}

impl SpaceElement {
    pub fn new(fun: DVector<C64>, vec: Vector2<C64>) -> Self {
        SpaceElement { fun, vec }
    }

    pub fn zero(n: usize) -> Self {
        SpaceElement { fun: DVector::zeros(n), vec: Vector2::zeros() }
    }

    pub fn scale(&self, a: C64) -> Self {
        SpaceElement { fun: &self.fun * a, vec: self.vec * a }
    }

    pub fn axpy(&self, a: C64, other: &SpaceElement) -> Self {
        SpaceElement { fun: &self.fun + &other.fun * a, vec: self.vec + other.vec * a }
    }
}

/// Weights, signs and Δ needed for both inner products.
#[derive(Debug, Clone)]
pub struct KreinSpace {
    grid: Grid,
    /// wᵢ·r(xᵢ).
    wr: Vec<f64>,
    sign_r: Vec<f64>,
    delta: DeltaInfo,
}

impl KreinSpace {
    pub fn new(problem: &ProblemSpec, grid: Grid, delta: DeltaInfo) -> Self {
        let wr = grid.nodes().iter().zip(grid.weights()).map(|(&x, &w)| w * problem.r.value(x)).collect();
        // x·r(x) > 0, and 0 is never a node
        let sign_r = grid.nodes().iter().map(|x| x.signum()).collect();
        KreinSpace { grid, wr, sign_r, delta }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn delta(&self) -> &DeltaInfo {
        &self.delta
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// Quadrature weights wᵢ|r(xᵢ)|.
    pub fn abs_weights(&self) -> Vec<f64> {
        self.wr.iter().map(|w| w.abs()).collect()
    }

    pub fn signed_weights(&self) -> &[f64] {
        &self.wr
    }

    pub fn sign_r(&self) -> &[f64] {
        &self.sign_r
    }

    fn check(&self, x: &SpaceElement) -> Result<(), KreinError> {
        if x.fun.len() != self.grid.len() {
            return Err(KreinError::GridMismatch { expected: self.grid.len(), found: x.fun.len() });
        }
        Ok(())
    }

    fn pairing(&self, x: &SpaceElement, y: &SpaceElement, weights: &[f64], m: &Matrix2<C64>) -> Result<C64, KreinError> {
        self.check(x)?;
        self.check(y)?;
        let fun: C64 = x.fun.iter().zip(y.fun.iter()).zip(weights).map(|((f, g), w)| f * g.conj() * *w).sum();
        Ok(fun + y.vec.dotc(&(m * x.vec)))
    }

    /// `[x, y] = ∫ f ḡ r + v*Δu`.
    pub fn inner_krein(&self, x: &SpaceElement, y: &SpaceElement) -> Result<C64, KreinError> {
        self.pairing(x, y, &self.wr, &self.delta.delta)
    }

    /// `⟨x, y⟩ = ∫ f ḡ |r| + v*|Δ|u`.
    pub fn inner_hilbert(&self, x: &SpaceElement, y: &SpaceElement) -> Result<C64, KreinError> {
        self.pairing(x, y, &self.abs_weights(), &self.delta.abs_delta)
    }

    pub fn norm(&self, x: &SpaceElement) -> Result<f64, KreinError> {
        Ok(self.inner_hilbert(x, x)?.re.max(0.0).sqrt())
    }

    pub fn apply_j(&self, x: &SpaceElement) -> Result<SpaceElement, KreinError> {
        self.check(x)?;
        let fun = DVector::from_iterator(x.fun.len(), x.fun.iter().zip(&self.sign_r).map(|(f, s)| f * *s));
        Ok(SpaceElement { fun, vec: self.delta.sign_delta * x.vec })
    }
}
