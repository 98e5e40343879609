//! Finite-section Gram diagnostics for root vectors and the dispatcher that
//! decides whether the hypotheses of a Riesz-basis theorem hold.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::boundary_algebra::{BoundaryError, Definiteness};
use crate::coefficients::{check_condition, ConditionKind, Verdict};
use crate::krein_space::{KreinError, KreinSpace, SpaceElement};
use crate::numerics::{herm_eigenvalues, Grid, NumericsError};
use crate::problem::ProblemSpec;
use crate::spectral_solver::{eigenfunctions, find_real_eigenvalues, jordan_chain, multiplicity, root_vector_embed, SpectralError};
use crate::w_construction::GluingCase;
use crate::C64;

/// Largest accepted `ratio(N)/ratio(N/2)` for an empirically bounded family.
pub const PLATEAU_LIMIT: f64 = 1.5;
/// Smallest accepted `λ_min(G_N)`.
pub const LAMBDA_MIN_FLOOR: f64 = 1e-3;
/// Accepted `|⟨x, x⟩ − 1|` for normalized input.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Scan density for the eigenvalue search, in points per unit of `sgn(λ)√|λ|`.
const SCAN_DENSITY: f64 = 8.0;
/// Nodes of the default diagnostic grid.
pub const DEFAULT_NODES: usize = 1024;
const INITIAL_WINDOW: f64 = 500.0;
const MAX_WINDOW: f64 = 1e7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RieszError {
    #[error("vector {index} has majorant norm² {norm_sq}, expected 1")]
    NotNormalized { index: usize, norm_sq: f64 },
    #[error("{available} root vectors available, {needed} needed")]
    TooFewVectors { available: usize, needed: usize },
    #[error(transparent)]
    Krein(#[from] KreinError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

/// `G[i][j] = ⟨xⱼ, xᵢ⟩` for majorant-normalized vectors.
pub fn gram_matrix(space: &KreinSpace, vectors: &[SpaceElement]) -> Result<DMatrix<C64>, RieszError> {
    for (index, x) in vectors.iter().enumerate() {
        let norm_sq = space.inner_hilbert(x, x)?.re;
        if (norm_sq - 1.0).abs() > NORMALIZATION_TOL {
            return Err(RieszError::NotNormalized { index, norm_sq });
        }
    }
    let n = vectors.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = space.inner_hilbert(&vectors[j], &vectors[i])?;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramLevel {
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `λ_max/λ_min`; infinite when `G_N` is singular.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramReport {
    pub levels: Vec<GramLevel>,
    /// `ratio(N)/ratio(N/2)` at the largest N.
    pub plateau: f64,
}

impl GramReport {
    pub fn last(&self) -> &GramLevel {
        self.levels.last().expect("at least one level")
    }

    pub fn bounded(&self) -> bool {
        self.plateau <= PLATEAU_LIMIT && self.last().lambda_min >= LAMBDA_MIN_FLOOR
    }
}

/// Gram extremes of the leading sections `N ∈ sizes` of `vectors`.
pub fn riesz_ratio(space: &KreinSpace, vectors: &[SpaceElement], sizes: &[usize]) -> Result<GramReport, RieszError> {
    let needed = sizes.iter().copied().max().unwrap_or(0);
    if needed > vectors.len() || sizes.is_empty() {
        return Err(RieszError::TooFewVectors { available: vectors.len(), needed: needed.max(1) });
    }
    let g = gram_matrix(space, &vectors[..needed])?;
    let mut levels = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let eig = herm_eigenvalues(&g.view((0, 0), (n, n)).into_owned(), f64::INFINITY)?;
        let (lo, hi) = (eig[0], eig[n - 1]);
        let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        levels.push(GramLevel { n, lambda_min: lo, lambda_max: hi, ratio });
    }
    let top = levels[levels.len() - 1];
    let half = levels.iter().rev().find(|l| l.n <= top.n / 2).copied().unwrap_or(levels[0]);
    let plateau = if top.ratio.is_finite() { top.ratio / half.ratio } else { f64::INFINITY };
    Ok(GramReport { levels, plateau })
}

/// Root vectors at one eigenvalue, orthonormal in the majorant.
#[derive(Debug, Clone)]
pub struct RootGroup {
    pub lambda: f64,
    pub vectors: Vec<SpaceElement>,
}

/// Largest `|[xᵢ, xⱼ]|/(‖xᵢ‖‖xⱼ‖)` over vectors from different groups.
pub fn j_orthogonality_report(space: &KreinSpace, groups: &[RootGroup]) -> Result<f64, RieszError> {
    let mut worst: f64 = 0.0;
    for (a, ga) in groups.iter().enumerate() {
        for gb in &groups[a + 1..] {
            for x in &ga.vectors {
                for y in &gb.vectors {
                    let scale = space.norm(x)? * space.norm(y)?;
                    worst = worst.max(space.inner_krein(x, y)?.norm() / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// Gram–Schmidt in the majorant; vectors that vanish numerically are dropped.
pub fn orthonormalize(space: &KreinSpace, vectors: &[SpaceElement]) -> Result<Vec<SpaceElement>, RieszError> {
    let mut out: Vec<SpaceElement> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let start = space.norm(v)?;
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                w = w.axpy(-space.inner_hilbert(&w, q)?, q);
            }
        }
        let norm = space.norm(&w)?;
        if norm > 1e-8 * start {
            out.push(w.scale(C64::new(1.0 / norm, 0.0)));
        }
    }
    Ok(out)
}

/// Root groups of the real eigenvalues in `window`, in order of increasing
/// `|λ|`, until `count` vectors are collected.
pub fn root_system(problem: &ProblemSpec, space: &KreinSpace, window: (f64, f64), count: usize) -> Result<Vec<RootGroup>, RieszError> {
    let mut roots = find_real_eigenvalues(problem, window.0, window.1, SCAN_DENSITY)?;
    roots.sort_by(|a, b| a.lambda.abs().total_cmp(&b.lambda.abs()).then(a.lambda.total_cmp(&b.lambda)));
    let grid = space.grid();
    let mut groups = Vec::new();
    let mut total = 0;
    for root in roots {
        if total >= count {
            break;
        }
        // chain solvability alone is unreliable once C(λ) is badly scaled, so
        // chains are capped by the order of the zero of D
        let order = multiplicity(problem, grid, root.lambda)?.algebraic_order.max(1);
        let efs = eigenfunctions(problem, grid, root.lambda)?;
        let depth = if efs.len() > 1 { 1 } else { order };
        let mut raw = Vec::new();
        for ef in efs {
            let chain = jordan_chain(problem, grid, root.lambda, &ef, depth)?;
            raw.extend(root_vector_embed(&chain, problem));
        }
        let mut vectors = orthonormalize(space, &raw)?;
        vectors.truncate(count - total);
        total += vectors.len();
        groups.push(RootGroup { lambda: root.lambda, vectors });
    }
    if total < count {
        return Err(RieszError::TooFewVectors { available: total, needed: count });
    }
    Ok(groups)
}

pub fn flatten(groups: &[RootGroup]) -> Vec<SpaceElement> {
    groups.iter().flat_map(|g| g.vectors.iter().cloned()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    RieszBasisGuaranteed,
    NoConclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub condition: ConditionKind,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub problem: String,
    /// Number of essential boundary conditions.
    pub k: usize,
    pub definiteness: Definiteness,
    /// `(u, v)` of the essential condition when `k = 1`.
    pub coupling: Option<[[f64; 2]; 2]>,
    /// The applicable theorem case, or `None` when no case matches.
    pub case: Option<GluingCase>,
    pub checks: Vec<HypothesisCheck>,
    pub conclusion: Conclusion,
}

pub fn hypothesis_report(problem: &ProblemSpec) -> Result<HypothesisReport, RieszError> {
    let tol = problem.tolerances.eig_tol;
    let class = problem.boundary.classify(tol)?;
    let delta = problem.boundary.compute_delta(tol)?;
    let case = GluingCase::candidates(&class, &delta).first().copied();
    let checks: Vec<HypothesisCheck> = case
        .map(|c| c.required())
        .unwrap_or_default()
        .into_iter()
        .map(|condition| HypothesisCheck { condition, verdict: check_condition(&problem.p, &problem.r, condition).verdict })
        .collect();
    let all = case.is_some() && checks.iter().all(|c| c.verdict == Verdict::Satisfied);
    let coupling = class.coupling.filter(|_| class.k == 1).map(|c| [[c.u.re, c.u.im], [c.v.re, c.v.im]]);
    Ok(HypothesisReport {
        problem: problem.name.clone(),
        k: class.k,
        definiteness: delta.definiteness,
        coupling,
        case,
        checks,
        conclusion: if all { Conclusion::RieszBasisGuaranteed } else { Conclusion::NoConclusion },
    })
}

/// Theorem verdict next to the empirical surrogate; the two are never merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RieszDiagnostics {
    pub hypotheses: HypothesisReport,
    pub gram: GramReport,
    pub j_orthogonality: f64,
    pub eigenvalues: Vec<f64>,
    /// Plateau and `λ_min` thresholds met; these thresholds are conventions.
    pub empirically_bounded: bool,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub plateau: f64,
    pub lambda_min: f64,
}

/// Section sizes `nmax/4, nmax/2, nmax`.
pub fn section_sizes(nmax: usize) -> Vec<usize> {
    let mut s = vec![nmax / 4, nmax / 2, nmax];
    s.retain(|&n| n > 0);
    s.dedup();
    s
}

/// Composite grid of about `n_nodes` nodes with the coefficient breakpoints.
pub fn diagnostic_space(problem: &ProblemSpec, n_nodes: usize) -> Result<KreinSpace, RieszError> {
    let grid = Grid::with_nodes(n_nodes, 16, &problem.breakpoints(), &[])?;
    let delta = problem.boundary.compute_delta(problem.tolerances.eig_tol)?;
    Ok(KreinSpace::new(problem, grid, delta))
}

/// Root groups for the `count` eigenvalues of smallest modulus; the search
/// window grows by 4× until it holds enough of them.
pub fn leading_root_system(problem: &ProblemSpec, space: &KreinSpace, count: usize) -> Result<Vec<RootGroup>, RieszError> {
    let mut w = INITIAL_WINDOW;
    loop {
        match root_system(problem, space, (-w, w), count) {
            Err(RieszError::TooFewVectors { .. }) if w < MAX_WINDOW => w *= 4.0,
            other => return other,
        }
    }
}

pub fn diagnose(problem: &ProblemSpec, space: &KreinSpace, nmax: usize) -> Result<RieszDiagnostics, RieszError> {
    if nmax < 10 {
        return Err(RieszError::TooFewVectors { available: nmax, needed: 10 });
    }
    let hypotheses = hypothesis_report(problem)?;
    let groups = leading_root_system(problem, space, nmax)?;
    let vectors = flatten(&groups);
    let gram = riesz_ratio(space, &vectors, &section_sizes(nmax))?;
    let j_orthogonality = j_orthogonality_report(space, &groups)?;
    let empirically_bounded = gram.bounded();
    Ok(RieszDiagnostics {
        hypotheses,
        gram,
        j_orthogonality,
        eigenvalues: groups.iter().map(|g| g.lambda).collect(),
        empirically_bounded,
        thresholds: Thresholds { plateau: PLATEAU_LIMIT, lambda_min: LAMBDA_MIN_FLOOR },
    })
}
