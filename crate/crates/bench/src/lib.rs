//! Fixed inputs shared by the benchmarks.

use kreinspec_core::w_construction::{build_psi, construction_grid, positivity_constants, PsiSystem, WeightedGrid};
use kreinspec_core::{Grid, GridSpec, NumericsError, ProblemSpec, WError, C64};

/// `count` points on the segment from `a` to `b`, endpoints included.
pub fn segment(a: C64, b: C64, count: usize) -> Vec<C64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count).map(|k| a + (b - a) * (k as f64 / (count - 1) as f64)).collect(),
    }
}

/// Spectral parameters mixing the oscillatory and growing regimes.
pub fn spectral_parameters() -> Vec<C64> {
    let mut out = segment(C64::new(-200.0, 0.0), C64::new(200.0, 0.0), 9);
    out.extend(segment(C64::new(-50.0, 5.0), C64::new(50.0, 5.0), 3));
    out
}

/// The panel grid used for eigenfunctions and Lagrange checks.
pub fn eigen_grid() -> Result<Grid, NumericsError> {
    Grid::new(GridSpec::uniform(1.0 / 16.0, 12))
}

/// The ψ system of P1 on an `n_nodes` construction grid, ready for kernel assembly.
pub fn p1_kernel_input(n_nodes: usize) -> Result<(PsiSystem, WeightedGrid), WError> {
    let p = ProblemSpec::p1();
    let delta = p.boundary.compute_delta(1e-10)?;
    let class = p.boundary.classify(1e-10)?;
    let k = positivity_constants(&delta, &p);
    let wg = construction_grid(&p, &[], &[-k.gamma, k.gamma], n_nodes)?;
    let psi = build_psi(&p, &wg, &k, &class, &delta)?;
    Ok((psi, wg))
}
