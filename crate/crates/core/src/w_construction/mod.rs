//! Grid realizations of the positive operators W used to certify Riesz bases:
//! transplantation operators, the blocks X and their gluings, and for one
//! essential condition the kernel perturbation K and coupling Z.

mod blocks;
mod kernel;
mod measure;
mod operator;
mod transplant;

pub use blocks::{
    assemble_ws1, build_diagonal_x, build_offdiagonal_x, build_w0, build_w01, build_w_minus1, build_w_plus1, centre_profile,
    diagonal_coefficients, endpoint_profile, profile_operator, w0_x, w_from_x, BoundaryPlan, DiagonalX, OffDiagonal, WPart, Witnesses,
    W01,
};
pub use kernel::{
    assemble_k, assemble_w_full, assemble_z, build_psi, constants_from, coupling_residual, kernel_value, positivity_constants,
    prefix_weights, traces_at_zero, FullW, KOperator, PositivityConstants, PsiSystem, ZOperator, GAMMA_LATTICE,
};
pub use measure::{boundary_family, dense_form_min_eig, end_traces, fmax_report, measure_action, min_form_eig, BoundaryActionReport, FmaxReport};
pub use operator::{similarity, OperatorGrid, Support, WeightedGrid};
pub use transplant::{build_transplantation, grid_requirements, smoothstep, Cutoff, Transplant};

use nalgebra::{DVector, Matrix2};
use serde::Serialize;
use thiserror::Error;

use crate::boundary_algebra::{BoundaryError, Classification, DeltaInfo, Definiteness};
use crate::coefficients::{ConditionKind, SmoothConnection};
use crate::numerics::{Grid, NumericsError};
use crate::problem::ProblemSpec;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WError {
    #[error("invalid connection: {0}")]
    InvalidConnection(String),
    #[error("degenerate connection: |α′| = |β′|ρ(0) = {kappa}")]
    DegenerateConnection { kappa: f64 },
    #[error("mixed-condition determinant {upsilon:e} is too small")]
    DegenerateMixedCondition { upsilon: f64 },
    #[error("certification failed ({clause}): {detail}")]
    CertificationFailure { clause: String, detail: String },
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error("construction needs one essential condition, found k = {k}")]
    WrongCase { k: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

/// Node count of the construction grid.
pub const DEFAULT_NODES: usize = 2048;
/// Gauss points per panel of the construction grid.
pub const PANEL_ORDER: usize = 16;

/// Grid whose breakpoints contain the coefficient breakpoints, `extra`, the
/// cutoff kinks of every connection and are closed under their maps.
pub fn construction_grid(problem: &ProblemSpec, connections: &[&SmoothConnection], extra: &[f64], n_nodes: usize) -> Result<WeightedGrid, WError> {
    let mut points = problem.breakpoints();
    points.extend_from_slice(extra);
    let mut maps = Vec::new();
    for conn in connections {
        let (p, m) = grid_requirements(conn, Cutoff::for_connection(conn));
        points.extend(p);
        maps.push(m);
    }
    let grid = Grid::with_nodes(n_nodes, PANEL_ORDER, &points, &maps)?;
    let r = problem.r.clone();
    Ok(WeightedGrid::new(grid, move |x| r.value(x)))
}

/// Which gluing realizes the boundary behavior a Riesz-basis theorem needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GluingCase {
    /// No essential conditions: the operator at 0 alone.
    NoEssential,
    /// Two essential conditions, Δ > 0.
    TwoPositive,
    /// Two essential conditions, Δ < 0.
    TwoNegative,
    /// Two essential conditions, both ends coupled by Δ⁻¹.
    TwoMixed,
    /// One essential condition `f(−1)`.
    OneMinus,
    /// One essential condition `f(1)`.
    OnePlus,
    /// One essential condition `u f(−1) + v f(1)` with `uv ≠ 0`.
    OneBoth,
}

impl GluingCase {
    pub fn label(self) -> &'static str {
        match self {
            GluingCase::NoEssential => "k0",
            GluingCase::TwoPositive => "k2-positive",
            GluingCase::TwoNegative => "k2-negative",
            GluingCase::TwoMixed => "k2-mixed",
            GluingCase::OneMinus => "k1-left",
            GluingCase::OnePlus => "k1-right",
            GluingCase::OneBoth => "k1-both",
        }
    }

    pub const ALL: [GluingCase; 7] = [
        GluingCase::NoEssential,
        GluingCase::TwoPositive,
        GluingCase::TwoNegative,
        GluingCase::TwoMixed,
        GluingCase::OneMinus,
        GluingCase::OnePlus,
        GluingCase::OneBoth,
    ];

    pub fn from_label(label: &str) -> Option<GluingCase> {
        Self::ALL.into_iter().find(|c| c.label() == label)
    }

    /// Boundary plan; `None` when only the operator at 0 is needed.
    pub fn plan(self, delta: &DeltaInfo) -> Option<BoundaryPlan> {
        let z = [0.0, 0.0];
        match self {
            GluingCase::NoEssential => None,
            GluingCase::TwoPositive => Some(BoundaryPlan::MinusEnd { b: [1.0, 0.0] }),
            GluingCase::TwoNegative => Some(BoundaryPlan::PlusEnd { b: [-1.0, 0.0] }),
            GluingCase::TwoMixed => Some(BoundaryPlan::both(delta.delta_inv)),
            GluingCase::OneMinus => Some(BoundaryPlan::MinusEnd { b: z }),
            GluingCase::OnePlus => Some(BoundaryPlan::PlusEnd { b: z }),
            GluingCase::OneBoth => Some(BoundaryPlan::both(Matrix2::zeros())),
        }
    }

    pub fn required(self) -> Vec<ConditionKind> {
        use ConditionKind::*;
        match self {
            GluingCase::NoEssential => vec![At0],
            GluingCase::TwoPositive | GluingCase::OneMinus => vec![At0, AtMinus1],
            GluingCase::TwoNegative | GluingCase::OnePlus => vec![At0, AtPlus1],
            GluingCase::TwoMixed | GluingCase::OneBoth => vec![At0, AtMinus1, AtPlus1, Mixed],
        }
    }

    /// Candidates in order of preference for a classified problem.
    pub fn candidates(class: &Classification, delta: &DeltaInfo) -> Vec<GluingCase> {
        match class.k {
            0 => vec![GluingCase::NoEssential],
            2 => match delta.definiteness {
                Definiteness::Positive => vec![GluingCase::TwoPositive, GluingCase::TwoMixed],
                Definiteness::Negative => vec![GluingCase::TwoNegative, GluingCase::TwoMixed],
                Definiteness::Indefinite => vec![GluingCase::TwoMixed],
            },
            _ => match class.coupling {
                Some(cp) if cp.v_zero() => vec![GluingCase::OneMinus],
                Some(cp) if cp.u_zero() => vec![GluingCase::OnePlus],
                _ => vec![GluingCase::OneBoth],
            },
        }
    }
}

/// One certified inequality or identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Clause {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Clause { name: name.into(), value, bound, pass: value <= bound }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Clause { name: name.into(), value, bound, pass: value >= bound }
    }
}

/// Everything `wverify` reports.
#[derive(Debug, Clone, Serialize)]
pub struct WReport {
    pub problem: String,
    pub case: Option<GluingCase>,
    pub nodes: usize,
    pub constants: Option<PositivityConstants>,
    pub boundary_action: Option<BoundaryActionReport>,
    pub clauses: Vec<Clause>,
    pub pass: bool,
}

/// Deterministic C¹ test functions with generic boundary values.
pub fn test_functions(count: usize) -> Vec<Box<dyn Fn(f64) -> C64 + Send + Sync>> {
    (0..count)
        .map(|k| {
            let kf = k as f64;
            let (a, b, c, d) = (0.3 + 0.17 * kf, -0.4 + 0.11 * kf, 0.9 - 0.07 * kf, 0.25 * (kf % 3.0) - 0.2);
            Box::new(move |x: f64| C64::new(a + b * x + c * x * x + d * x * x * x, (0.5 + 0.1 * kf) * (1.7 * x + 0.3 * kf).sin()))
                as Box<dyn Fn(f64) -> C64 + Send + Sync>
        })
        .collect()
}

/// Builds and certifies W for `problem`, refining the grid once if a clause
/// fails on the first attempt.
pub fn verify(problem: &ProblemSpec, n_nodes: usize) -> Result<WReport, WError> {
    verify_case(problem, n_nodes, None)
}

/// As [`verify`], restricted to one gluing case when `only` is given.
pub fn verify_case(problem: &ProblemSpec, n_nodes: usize, only: Option<GluingCase>) -> Result<WReport, WError> {
    let first = verify_with(problem, n_nodes, only)?;
    if first.pass {
        return Ok(first);
    }
    let second = verify_with(problem, 2 * n_nodes, only)?;
    match second.clauses.iter().find(|c| !c.pass) {
        None => Ok(second),
        Some(c) => Err(WError::CertificationFailure {
            clause: c.name.clone(),
            detail: format!("{:e} against bound {:e} after refinement to {} nodes", c.value, c.bound, second.nodes),
        }),
    }
}

/// Builds W on a grid of about `n_nodes` nodes and reports every clause.
pub fn verify_once(problem: &ProblemSpec, n_nodes: usize) -> Result<WReport, WError> {
    verify_with(problem, n_nodes, None)
}

fn verify_with(problem: &ProblemSpec, n_nodes: usize, only: Option<GluingCase>) -> Result<WReport, WError> {
    let tol = problem.tolerances.eig_tol;
    let class = problem.boundary.classify(tol)?;
    let delta = problem.boundary.compute_delta(tol)?;
    let all = [ConditionKind::At0, ConditionKind::AtMinus1, ConditionKind::AtPlus1, ConditionKind::Mixed];
    let witnesses = Witnesses::compute(problem, &all);
    let mut candidates = GluingCase::candidates(&class, &delta);
    if let Some(c) = only {
        if !candidates.contains(&c) {
            return Err(WError::HypothesisNotMet(format!("case {} does not apply; candidates are {candidates:?}", c.label())));
        }
        candidates = vec![c];
    }
    let case = candidates
        .iter()
        .copied()
        .find(|c| c.required().iter().all(|k| witnesses.get(*k).is_some_and(|v| v.satisfied())))
        .ok_or_else(|| WError::HypothesisNotMet(format!("no gluing among {candidates:?} has all required conditions")))?;
    let needed: Vec<&SmoothConnection> = case
        .required()
        .iter()
        .flat_map(|k| witnesses.get(*k).map(|v| v.witnesses.iter().collect::<Vec<_>>()).unwrap_or_default())
        .collect();
    let constants = (class.k == 1).then(|| positivity_constants(&delta, problem));
    let extra: Vec<f64> = constants.map(|k| vec![-k.gamma, k.gamma]).unwrap_or_default();
    let wg = construction_grid(problem, &needed, &extra, n_nodes)?;
    let mut clauses = Vec::new();
    let (w01, action) = match case.plan(&delta) {
        Some(plan) => {
            let w = build_w01(&wg, &witnesses, plan)?;
            clauses.push(Clause::at_least("J0 W01 >= I", w.min_eig, 1.0 - 1e-6));
            clauses.push(Clause::at_most("W01 boundary action", w.action.deviation, 1e-6));
            (w.w, Some(w.action))
        }
        None => {
            let v = witnesses.get(ConditionKind::At0).expect("checked above");
            let tr = build_transplantation(&v.witnesses[0], &wg, Cutoff::for_connection(&v.witnesses[0]))?;
            let w = build_w0(&wg, &tr)?;
            clauses.push(Clause::at_least("J0 W0 >= I", w.min_eig, 1.0 - 1e-6));
            (w.w, Some(w.action))
        }
    };
    let jump = test_functions(5)
        .iter()
        .map(|f| fmax_report(&wg, &w01.apply(&wg.grid.sample(f)), |x| problem.p.value(x)).max_jump)
        .fold(0.0, f64::max);
    clauses.push(Clause::at_most("W01 image continuity", jump, 1e-6));
    if let Some(k) = constants {
        certify_one_essential(problem, &wg, &class, &delta, &k, &w01, &mut clauses)?;
    }
    let pass = clauses.iter().all(|c| c.pass);
    Ok(WReport { problem: problem.name.clone(), case: Some(case), nodes: wg.len(), constants, boundary_action: action, clauses, pass })
}

fn certify_one_essential(
    problem: &ProblemSpec,
    wg: &WeightedGrid,
    class: &Classification,
    delta: &DeltaInfo,
    k: &PositivityConstants,
    w01: &OperatorGrid,
    clauses: &mut Vec<Clause>,
) -> Result<(), WError> {
    clauses.push(Clause::at_most("1 - kappa - alpha/delta2", k.identity_residual.abs(), 1e-14));
    let psi = build_psi(problem, wg, k, class, delta)?;
    let psi_c = DVector::from_iterator(psi.psi.len(), psi.psi.iter().map(|&x| C64::new(x, 0.0)));
    clauses.push(Clause::at_most("|psi|^2 <= (c/(alpha eta))^2", wg.inner(&psi_c, &psi_c).re, k.psi_bound_sq()));
    let kop = assemble_k(&psi, wg)?;
    clauses.push(Clause::at_most("|K| <= kappa", kop.norm, k.kappa * (1.0 + 1e-3)));
    clauses.push(Clause::at_most("kernel symmetry", kop.kernel_symmetry, 1e-12));
    clauses.push(Clause::at_most("kernel bound", kop.kernel_max, k.kappa / k.r_norm1 + 1e-12));
    clauses.push(Clause::at_most("K self-adjoint", kop.asymmetry, 1e-8));
    let tests: Vec<DVector<C64>> = test_functions(20).iter().map(|f| wg.grid.sample(f)).collect();
    let (u, v) = (psi.u, psi.v);
    let mut zero: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for f in &tests {
        let kf = kop.apply(f);
        let t0 = traces_at_zero(wg, &kf);
        zero = zero.max(t0[0].norm()).max(t0[1].norm());
        let t = end_traces(wg, &kf);
        let rhs = psi.eta11 * wg.krein(f, &psi.psi1) + psi.eta12 * wg.krein(f, &psi.psi2);
        boundary = boundary.max((u * t[0] + v * t[1] - rhs).norm());
    }
    clauses.push(Clause::at_most("(Kf)(0) = 0", zero, 1e-8));
    clauses.push(Clause::at_most("K boundary identity", boundary, 1e-6));
    let z = assemble_z(&psi, delta, wg)?;
    clauses.push(Clause::at_most("|Z| <= alpha/(2 delta2)", z.norm, k.lower_bound() * (1.0 + 1e-3)));
    let full = assemble_w_full(w01, &kop, &z, k, delta, wg)?;
    clauses.push(Clause::at_least("min eig JW >= alpha/(2 delta2)", full.min_eig, full.lower_bound - 1e-6));
    let coupling = tests
        .iter()
        .enumerate()
        .map(|(i, f)| coupling_residual(&full, wg, u, v, f, C64::new(0.3 * i as f64 - 1.0, 0.2)))
        .fold(0.0, f64::max);
    clauses.push(Clause::at_most("form-domain coupling", coupling, 1e-6));
    Ok(())
}
