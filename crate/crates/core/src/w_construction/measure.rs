use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::numerics::{herm_eigenvalues, Side};
use crate::C64;

use super::operator::{similarity, OperatorGrid, WeightedGrid};
use super::WError;

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub(crate) fn matrix_pairs(m: &Matrix2<C64>) -> [[[f64; 2]; 2]; 2] {
    [[pair(m[(0, 0)]), pair(m[(0, 1)])], [pair(m[(1, 0)]), pair(m[(1, 1)])]]
}

/// Traces at −1 and 1 extrapolated from the end panels.
pub fn end_traces(wg: &WeightedGrid, f: &DVector<C64>) -> [C64; 2] {
    let v = f.as_slice();
    [wg.grid.trace(v, -1.0, Side::Right), wg.grid.trace(v, 1.0, Side::Left)]
}

/// Boundary functions used to measure actions: the two hat profiles, the
/// constant, and smooth functions with generic end values.
pub fn boundary_family(wg: &WeightedGrid) -> Vec<DVector<C64>> {
    let g = &wg.grid;
    let i = C64::new(0.0, 1.0);
    vec![
        g.sample(|x| C64::new(0.5 * (1.0 - x), 0.0)),
        g.sample(|x| C64::new(0.5 * (1.0 + x), 0.0)),
        g.sample(|_| C64::new(1.0, 0.0)),
        g.sample(|x| C64::new(x * x + 0.3 * x - 0.2, 0.0) + i * (0.5 * x).sin()),
        g.sample(|x| C64::new((1.3 * x).cos(), 0.7 * x.powi(3))),
    ]
}

/// Measured `B̂` with `[(Wf)(−1); (Wf)(1)] = B̂ [f(−1); f(1)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryActionReport {
    pub measured: [[[f64; 2]; 2]; 2],
    pub target: [[[f64; 2]; 2]; 2],
    /// Largest deviation from the target over the test family.
    pub deviation: f64,
}

pub fn measure_action(w: &OperatorGrid, wg: &WeightedGrid, target: Matrix2<C64>) -> BoundaryActionReport {
    let family = boundary_family(wg);
    let images: Vec<[C64; 2]> = family.iter().map(|f| end_traces(wg, &w.apply(f))).collect();
    let measured = Matrix2::new(images[0][0], images[1][0], images[0][1], images[1][1]);
    let mut deviation = (measured - target).iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (f, img) in family.iter().zip(&images).skip(2) {
        let t = end_traces(wg, f);
        let expect = target * nalgebra::Vector2::new(t[0], t[1]);
        deviation = deviation.max((img[0] - expect[0]).norm()).max((img[1] - expect[1]).norm());
    }
    BoundaryActionReport { measured: matrix_pairs(&measured), target: matrix_pairs(&target), deviation }
}

/// Smallest eigenvalue of the majorant form of `a`, i.e. of `D^{1/2} a D^{-1/2}`
/// symmetrized.
pub fn min_form_eig(a: &OperatorGrid, wg: &WeightedGrid) -> Result<f64, WError> {
    let n = a.dim();
    let mut active = vec![false; n];
    for (i, j, v) in a.matrix.triplet_iter() {
        let off = if i == j { *v - 1.0 } else { *v };
        if off.norm() > 0.0 {
            active[i] = true;
            active[j] = true;
        }
    }
    let idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let mut dense = DMatrix::zeros(idx.len(), idx.len());
    for (i, j, v) in a.matrix.triplet_iter() {
        if active[i] && active[j] {
            dense[(pos[i], pos[j])] += *v;
        }
    }
    let w: Vec<f64> = idx.iter().map(|&i| wg.weights[i]).collect();
    let h = similarity(&dense, &w);
    let (eigs, inert) = split_spectrum(&(&h + h.adjoint()).scale(0.5), 1.0)?;
    Ok(extremes(&eigs, inert, 1.0).0)
}

/// Smallest eigenvalue of the symmetrized `D^{1/2} a D^{-1/2}`.
pub fn dense_form_min_eig(a: &DMatrix<C64>, weights: &[f64]) -> Result<f64, WError> {
    let h = similarity(a, weights);
    let (eigs, inert) = split_spectrum(&(&h + h.adjoint()).scale(0.5), 1.0)?;
    Ok(extremes(&eigs, inert, 1.0).0)
}

/// Eigenvalues of a Hermitian `h` after splitting off the indices whose row
/// and column agree with `fill·I`; returns those eigenvalues and the number
/// of split-off indices, each of which carries the eigenvalue `fill`.
pub fn split_spectrum(h: &DMatrix<C64>, fill: f64) -> Result<(Vec<f64>, usize), WError> {
    let n = h.nrows();
    let mut active = vec![false; n];
    for j in 0..n {
        for i in 0..n {
            let off = if i == j { h[(i, j)] - fill } else { h[(i, j)] };
            if off.norm() > 0.0 {
                active[i] = true;
                active[j] = true;
            }
        }
    }
    let idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    if idx.is_empty() {
        return Ok((Vec::new(), n));
    }
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])]);
    Ok((herm_eigenvalues(&sub, f64::INFINITY)?, n - idx.len()))
}

/// `(min, max)` over split eigenvalues and the inert value.
pub fn extremes(eigs: &[f64], inert: usize, fill: f64) -> (f64, f64) {
    let init = if inert > 0 { (fill, fill) } else { (f64::INFINITY, f64::NEG_INFINITY) };
    eigs.iter().fold(init, |(lo, hi), &e| (lo.min(e), hi.max(e)))
}

/// Relative non-Hermitian part of the majorant form of `a`.
pub fn form_asymmetry(a: &DMatrix<C64>, weights: &[f64]) -> f64 {
    let h = similarity(a, weights);
    (&h - h.adjoint()).norm() / h.norm().max(f64::MIN_POSITIVE)
}

/// Continuity and energy of a sampled function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FmaxReport {
    /// Largest jump of the panel interpolants across interior breakpoints.
    pub max_jump: f64,
    /// `∫ p |f′|²` from differentiated panel interpolants.
    pub energy: f64,
}

pub fn fmax_report(wg: &WeightedGrid, f: &DVector<C64>, p: impl Fn(f64) -> f64) -> FmaxReport {
    let g = &wg.grid;
    let v = f.as_slice();
    let mut max_jump: f64 = 0.0;
    for bp in g.breakpoints() {
        if bp > -1.0 && bp < 1.0 {
            let jump = (g.eval(v, bp, Side::Left) - g.eval(v, bp, Side::Right)).norm();
            max_jump = max_jump.max(jump);
        }
    }
    let order = g.order();
    let mut energy = 0.0;
    for panel in g.panels() {
        let xs = &g.nodes()[panel.start..panel.start + order];
        let d = differentiation_matrix(xs);
        for i in 0..order {
            let df: C64 = (0..order).map(|j| v[panel.start + j] * d[(i, j)]).sum();
            energy += g.weights()[panel.start + i] * p(xs[i]) * df.norm_sqr();
        }
    }
    FmaxReport { max_jump, energy }
}

/// `D[i][j] = ℓⱼ′(xᵢ)` for the Lagrange basis on `xs`.
fn differentiation_matrix(xs: &[f64]) -> DMatrix<f64> {
    let n = xs.len();
    let bary: Vec<f64> = (0..n).map(|j| 1.0 / (0..n).filter(|&k| k != j).map(|k| xs[j] - xs[k]).product::<f64>()).collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[(i, j)] = bary[j] / bary[i] / (xs[i] - xs[j]);
                diag -= d[(i, j)];
            }
        }
        d[(i, i)] = diag;
    }
    d
}
