use crate::coefficients::{EndPoint, SmoothConnection};
use crate::numerics::{AffineMap, Grid, Side};
use crate::C64;

use super::operator::{OperatorGrid, Support, WeightedGrid};
use super::WError;

/// Cubic smoothstep `s²(3 − 2s)` clamped to [0, 1].
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// C¹ cutoff in the connection parameter: 1 at `t = 0`, 0 for `t ≥ width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub width: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { width: 1.0 / 16.0 }
    }
}

impl Cutoff {
    /// The default width, halved until it fits inside `ε/2`.
    pub fn for_connection(conn: &SmoothConnection) -> Cutoff {
        let mut width = Cutoff::default().width;
        while width > 0.5 * conn.eps {
            width *= 0.5;
        }
        Cutoff { width }
    }

    pub fn value(&self, t: f64) -> f64 {
        1.0 - smoothstep(t / self.width)
    }
}

pub(crate) fn half_support(p: EndPoint) -> Support {
    match p {
        EndPoint::MinusOne | EndPoint::ZeroMinus => Support::Left,
        EndPoint::ZeroPlus | EndPoint::PlusOne => Support::Right,
    }
}

/// S and its majorant adjoint for one connection.
#[derive(Debug, Clone)]
pub struct Transplant {
    pub connection: SmoothConnection,
    pub cutoff: Cutoff,
    pub s: OperatorGrid,
    pub s_adj: OperatorGrid,
}

impl Transplant {
    pub fn kappa_alpha(&self) -> f64 {
        self.connection.kappa_alpha()
    }

    pub fn kappa_beta(&self) -> f64 {
        self.connection.kappa_beta()
    }
}

/// Breakpoints and maps a grid needs so that `build_transplantation` is exact
/// on piecewise polynomials: the cutoff kinks, and closure under the expanding
/// map between the two half-neighborhoods.
pub fn grid_requirements(conn: &SmoothConnection, cutoff: Cutoff) -> (Vec<f64>, AffineMap) {
    let w = cutoff.width;
    let points = vec![conn.alpha(w), conn.beta(w)];
    let (a0, b0) = (conn.from.location(), conn.to.location());
    let map = if conn.beta_slope.abs() >= conn.alpha_slope.abs() {
        let scale = conn.beta_slope / conn.alpha_slope;
        let (lo, hi) = minmax(a0, conn.alpha(w));
        AffineMap { lo, hi, scale, shift: b0 - scale * a0 }
    } else {
        let scale = conn.alpha_slope / conn.beta_slope;
        let (lo, hi) = minmax(b0, conn.beta(w));
        AffineMap { lo, hi, scale, shift: a0 - scale * b0 }
    };
    (points, map)
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12 && x.round() >= 1.0
}

/// Interpolation rows `f ↦ scale(t)·f(source(t))` for every node `z` with
/// `t = param(z) ∈ [0, width)`.
fn interpolation_triplets(
    grid: &Grid,
    param: impl Fn(f64) -> f64,
    source: impl Fn(f64) -> f64,
    source_side: Side,
    scale: impl Fn(f64) -> f64,
    width: f64,
) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for (i, &z) in grid.nodes().iter().enumerate() {
        let t = param(z);
        if !(0.0..width).contains(&t) {
            continue;
        }
        let x = source(t);
        let k = grid.locate(x, source_side);
        let start = grid.panels()[k].start;
        let a = scale(t);
        for (j, l) in grid.panel_weights(k, x).into_iter().enumerate() {
            if l != 0.0 {
                out.push((i, start + j, C64::new(a * l, 0.0)));
            }
        }
    }
    out
}

/// Transplantation `(Sf)(y) = |α′| c(t) f(α(t))` for `y = β(t)`, with the
/// adjoint `(S*g)(α(t)) = c(t) |β′| ρ(t) g(β(t))`.
///
/// Whichever of the two maps contracts is built by panel interpolation; the
/// other is its discrete majorant adjoint, so the pair is exactly adjoint on
/// the grid.
pub fn build_transplantation(conn: &SmoothConnection, wg: &WeightedGrid, cutoff: Cutoff) -> Result<Transplant, WError> {
    if !(conn.tau.is_finite() && conn.tau > 0.0) {
        return Err(WError::InvalidConnection(format!("p ratio bound τ = {} is not finite", conn.tau)));
    }
    if cutoff.width > 0.5 * conn.eps + 1e-15 {
        return Err(WError::InvalidConnection(format!("cutoff width {} exceeds ε/2 = {}", cutoff.width, 0.5 * conn.eps)));
    }
    for k in 0..=32 {
        let rho = conn.rho(cutoff.width * k as f64 / 32.0);
        if !rho.is_finite() {
            return Err(WError::InvalidConnection("ρ is unbounded on the cutoff support".into()));
        }
    }
    let (ka, kb) = (conn.alpha_slope.abs(), conn.beta_slope.abs());
    let n = wg.len();
    let (dom, cod) = (half_support(conn.from), half_support(conn.to));
    let grid = &wg.grid;
    let width = cutoff.width;
    if is_integer(kb / ka) || !is_integer(ka / kb) {
        let t = interpolation_triplets(grid, |y| conn.beta_inv(y), |t| conn.alpha(t), conn.from.side(), |t| ka * cutoff.value(t), width);
        let s = OperatorGrid::from_triplets(n, &t, dom, cod);
        let s_adj = s.adjoint(wg);
        Ok(Transplant { connection: conn.clone(), cutoff, s, s_adj })
    } else {
        let t = interpolation_triplets(grid, |x| conn.alpha_inv(x), |t| conn.beta(t), conn.to.side(), |t| kb * conn.rho(t) * cutoff.value(t), width);
        let s_adj = OperatorGrid::from_triplets(n, &t, cod, dom);
        let s = s_adj.adjoint(wg);
        Ok(Transplant { connection: conn.clone(), cutoff, s, s_adj })
    }
}
