use nalgebra::Matrix2;
use serde::Serialize;

use crate::coefficients::{check_condition, ConditionKind, ConditionVerdict, EndPoint, MixedCase};
use crate::problem::ProblemSpec;
use crate::C64;

use super::measure::{measure_action, min_form_eig, BoundaryActionReport};
use super::operator::{OperatorGrid, Support, WeightedGrid};
use super::transplant::{build_transplantation, half_support, smoothstep, Cutoff, Transplant};
use super::WError;

/// Even profile equal to 1 at ±1 and 0 on [−1/2, 1/2].
pub fn endpoint_profile(x: f64) -> f64 {
    smoothstep(2.0 * x.abs() - 1.0)
}

/// Even profile equal to 1 at 0 and 0 outside (−1/2, 1/2).
pub fn centre_profile(x: f64) -> f64 {
    1.0 - smoothstep(2.0 * x.abs())
}

/// Multiplication by the profile belonging to `point`, on its side of 0.
pub fn profile_operator(wg: &WeightedGrid, point: EndPoint) -> OperatorGrid {
    let support = half_support(point);
    match point {
        EndPoint::MinusOne | EndPoint::PlusOne => OperatorGrid::multiplication(&wg.grid, support, endpoint_profile),
        EndPoint::ZeroMinus | EndPoint::ZeroPlus => OperatorGrid::multiplication(&wg.grid, support, centre_profile),
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `γ₁S + γ₂P` with trace `t₁` and adjoint trace 1 at the anchor.
#[derive(Debug, Clone)]
pub struct DiagonalX {
    pub x: OperatorGrid,
    pub gamma: [C64; 2],
}

/// Solves `γ₁κ_α + γ₂ = t₁`, `γ̄₁κ_β + γ̄₂ = 1`.
pub fn diagonal_coefficients(kappa_alpha: f64, kappa_beta: f64, t1: C64) -> Result<[C64; 2], WError> {
    if (kappa_alpha - kappa_beta).abs() <= 1e-12 * kappa_alpha.max(kappa_beta) {
        return Err(WError::DegenerateConnection { kappa: kappa_alpha });
    }
    let g1 = (t1 - 1.0) / (kappa_alpha - kappa_beta);
    Ok([g1, c(1.0) - g1 * kappa_beta])
}

pub fn build_diagonal_x(tr: &Transplant, p: &OperatorGrid, t1: C64) -> Result<DiagonalX, WError> {
    let conn = &tr.connection;
    if conn.from != conn.to {
        return Err(WError::InvalidConnection(format!("{:?} → {:?} is not a self-connection", conn.from, conn.to)));
    }
    let gamma = diagonal_coefficients(tr.kappa_alpha(), tr.kappa_beta(), t1)?;
    let x = tr.s.scale(gamma[0]).add(&p.scale(gamma[1]));
    Ok(DiagonalX { x, gamma })
}

#[derive(Debug, Clone)]
pub struct OffDiagonal {
    pub case: MixedCase,
    pub upsilon: f64,
    pub x12: OperatorGrid,
    pub x21: OperatorGrid,
}

/// Off-diagonal blocks with `(X₁₂f)(−1) = −b₁₂f(1)`, `(X₂₁f)(1) = b₂₁f(−1)` and
/// vanishing adjoint traces.
pub fn build_offdiagonal_x(case: MixedCase, s1: &Transplant, s2: &Transplant, b12: C64, b21: C64) -> Result<OffDiagonal, WError> {
    use EndPoint::{MinusOne as M, PlusOne as P};
    let dirs = [(s1.connection.from, s1.connection.to), (s2.connection.from, s2.connection.to)];
    let expected = match case {
        MixedCase::A => [(M, P), (M, P)],
        MixedCase::B => [(P, M), (P, M)],
        MixedCase::C => [(M, P), (P, M)],
    };
    if dirs != expected {
        return Err(WError::InvalidConnection(format!("case {case:?} needs connections {expected:?}, got {dirs:?}")));
    }
    let (a1, a2, k1, k2) = (s1.kappa_alpha(), s2.kappa_alpha(), s1.kappa_beta(), s2.kappa_beta());
    let upsilon = match case {
        MixedCase::A | MixedCase::B => a1 * k2 - a2 * k1,
        MixedCase::C => a1 * a2 - k1 * k2,
    };
    if upsilon.abs() < 1e-10 {
        return Err(WError::DegenerateMixedCondition { upsilon });
    }
    let lin = |x: &OperatorGrid, cx: f64, y: &OperatorGrid, cy: f64| x.scale(c(cx)).add(&y.scale(c(-cy)));
    let (f12, f21) = (-b12 / upsilon, b21 / upsilon);
    let (x12, x21) = match case {
        MixedCase::A => (lin(&s2.s_adj, a1, &s1.s_adj, a2).scale(f12), lin(&s1.s, k2, &s2.s, k1).scale(f21)),
        MixedCase::B => (lin(&s1.s, k2, &s2.s, k1).scale(f12), lin(&s2.s_adj, a1, &s1.s_adj, a2).scale(f21)),
        MixedCase::C => (lin(&s2.s, a1, &s1.s_adj, k2).scale(f12), lin(&s1.s, a2, &s2.s_adj, k1).scale(f21)),
    };
    Ok(OffDiagonal { case, upsilon, x12, x21 })
}

/// `J₀(X^♯X + I)`.
pub fn w_from_x(x: &OperatorGrid, wg: &WeightedGrid) -> OperatorGrid {
    let n = wg.len();
    let y = x.adjoint(wg).compose(x).add(&OperatorGrid::identity(n));
    y.apply_j(wg)
}

/// An operator of the form `J₀(X^♯X + I)` with its certificate.
#[derive(Debug, Clone)]
pub struct WPart {
    pub w: OperatorGrid,
    pub x: OperatorGrid,
    /// Smallest eigenvalue of the majorant form of `J₀W`.
    pub min_eig: f64,
    pub action: BoundaryActionReport,
}

fn certify(x: OperatorGrid, wg: &WeightedGrid, target: Matrix2<C64>) -> Result<WPart, WError> {
    let w = w_from_x(&x, wg);
    let min_eig = min_form_eig(&w.apply_j(wg), wg)?;
    if min_eig < 1.0 - 1e-6 {
        return Err(WError::CertificationFailure { clause: "J0 W >= I".into(), detail: format!("minimum eigenvalue {min_eig}") });
    }
    let action = measure_action(&w, wg, target);
    Ok(WPart { w, x, min_eig, action })
}

/// `W_{s1}` with boundary action `b`.
pub fn assemble_ws1(
    wg: &WeightedGrid,
    minus: &Transplant,
    plus: &Transplant,
    mixed: (MixedCase, &Transplant, &Transplant),
    b: Matrix2<C64>,
) -> Result<WPart, WError> {
    let x = ws1_x(wg, minus, plus, mixed, b)?;
    certify(x, wg, b)
}

fn ws1_x(wg: &WeightedGrid, minus: &Transplant, plus: &Transplant, mixed: (MixedCase, &Transplant, &Transplant), b: Matrix2<C64>) -> Result<OperatorGrid, WError> {
    let x11 = build_diagonal_x(minus, &profile_operator(wg, EndPoint::MinusOne), -b[(0, 0)] - 1.0)?;
    let x22 = build_diagonal_x(plus, &profile_operator(wg, EndPoint::PlusOne), b[(1, 1)] - 1.0)?;
    let off = build_offdiagonal_x(mixed.0, mixed.1, mixed.2, b[(0, 1)], b[(1, 0)])?;
    Ok(x11.x.add(&x22.x).add(&off.x12).add(&off.x21))
}

/// `X` of the operator equal to `J₀` near ±1 and continuity-preserving at 0.
pub fn w0_x(wg: &WeightedGrid, tr: &Transplant) -> Result<OperatorGrid, WError> {
    let conn = &tr.connection;
    let near_zero = |p: EndPoint| matches!(p, EndPoint::ZeroMinus | EndPoint::ZeroPlus);
    if !near_zero(conn.from) || !near_zero(conn.to) {
        return Err(WError::InvalidConnection(format!("{:?} → {:?} is not a connection at 0", conn.from, conn.to)));
    }
    let p = profile_operator(wg, conn.from);
    if conn.from == conn.to {
        return Ok(build_diagonal_x(tr, &p, c(-2.0))?.x);
    }
    let (ka, kb) = (tr.kappa_alpha(), tr.kappa_beta());
    if (ka - kb).abs() <= 1e-12 * ka.max(kb) {
        return Err(WError::DegenerateConnection { kappa: ka });
    }
    // 2 + a² + (κα + κβ)ac + κακβc² = 0 along a = μc, μ = −(κα + κβ)/2
    let cc = 8f64.sqrt() / (ka - kb).abs();
    let a = -0.5 * (ka + kb) * cc;
    Ok(p.scale(c(a)).add(&tr.s_adj.scale(c(cc))))
}

pub fn build_w0(wg: &WeightedGrid, tr: &Transplant) -> Result<WPart, WError> {
    certify(w0_x(wg, tr)?, wg, Matrix2::new(c(-1.0), c(0.0), c(0.0), c(1.0)))
}

/// Equal to `J₀` away from −1, `(Wf)(−1) = b f(−1)`.
pub fn build_w_minus1(wg: &WeightedGrid, tr: &Transplant, b: C64) -> Result<WPart, WError> {
    let x = build_diagonal_x(tr, &profile_operator(wg, EndPoint::MinusOne), -b - 1.0)?.x;
    certify(x, wg, Matrix2::new(b, c(0.0), c(0.0), c(1.0)))
}

/// Equal to `J₀` away from 1, `(Wf)(1) = b f(1)`.
pub fn build_w_plus1(wg: &WeightedGrid, tr: &Transplant, b: C64) -> Result<WPart, WError> {
    let x = build_diagonal_x(tr, &profile_operator(wg, EndPoint::PlusOne), b - 1.0)?.x;
    certify(x, wg, Matrix2::new(c(-1.0), c(0.0), c(0.0), b))
}

/// The boundary part of a gluing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoundaryPlan {
    /// Modified at −1 only: action `diag(b, 1)`.
    MinusEnd { b: [f64; 2] },
    /// Modified at 1 only: action `diag(−1, b)`.
    PlusEnd { b: [f64; 2] },
    /// Both ends coupled: action `b`.
    Both { b: [[[f64; 2]; 2]; 2] },
}

fn cx(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

impl BoundaryPlan {
    pub fn both(b: Matrix2<C64>) -> Self {
        BoundaryPlan::Both { b: [[[b[(0, 0)].re, b[(0, 0)].im], [b[(0, 1)].re, b[(0, 1)].im]], [[b[(1, 0)].re, b[(1, 0)].im], [b[(1, 1)].re, b[(1, 1)].im]]] }
    }

    pub fn target(&self) -> Matrix2<C64> {
        match *self {
            BoundaryPlan::MinusEnd { b } => Matrix2::new(cx(b), c(0.0), c(0.0), c(1.0)),
            BoundaryPlan::PlusEnd { b } => Matrix2::new(c(-1.0), c(0.0), c(0.0), cx(b)),
            BoundaryPlan::Both { b } => Matrix2::new(cx(b[0][0]), cx(b[0][1]), cx(b[1][0]), cx(b[1][1])),
        }
    }

    pub fn required(&self) -> Vec<ConditionKind> {
        match self {
            BoundaryPlan::MinusEnd { .. } => vec![ConditionKind::At0, ConditionKind::AtMinus1],
            BoundaryPlan::PlusEnd { .. } => vec![ConditionKind::At0, ConditionKind::AtPlus1],
            BoundaryPlan::Both { .. } => vec![ConditionKind::At0, ConditionKind::AtMinus1, ConditionKind::AtPlus1, ConditionKind::Mixed],
        }
    }
}

/// Condition verdicts with their witness connections.
#[derive(Debug, Clone)]
pub struct Witnesses {
    pub verdicts: Vec<ConditionVerdict>,
}

impl Witnesses {
    pub fn compute(problem: &ProblemSpec, kinds: &[ConditionKind]) -> Self {
        Witnesses { verdicts: kinds.iter().map(|&k| check_condition(&problem.p, &problem.r, k)).collect() }
    }

    pub fn get(&self, kind: ConditionKind) -> Option<&ConditionVerdict> {
        self.verdicts.iter().find(|v| v.which == kind)
    }

    /// Witness connections of every satisfied verdict.
    pub fn connections(&self) -> Vec<&crate::coefficients::SmoothConnection> {
        self.verdicts.iter().filter(|v| v.satisfied()).flat_map(|v| v.witnesses.iter()).collect()
    }

    fn require(&self, kind: ConditionKind) -> Result<&ConditionVerdict, WError> {
        match self.get(kind) {
            Some(v) if v.satisfied() => Ok(v),
            Some(v) => Err(WError::HypothesisNotMet(format!("{kind:?} is {:?}", v.verdict))),
            None => Err(WError::HypothesisNotMet(format!("{kind:?} was not checked"))),
        }
    }
}

/// Glued operator `W₀ on |x| < 1/2`, boundary operator elsewhere.
#[derive(Debug, Clone)]
pub struct W01 {
    pub plan: BoundaryPlan,
    pub w: OperatorGrid,
    pub x: OperatorGrid,
    pub min_eig: f64,
    pub action: BoundaryActionReport,
}

fn transplant(wg: &WeightedGrid, v: &ConditionVerdict, k: usize) -> Result<Transplant, WError> {
    let conn = &v.witnesses[k];
    build_transplantation(conn, wg, Cutoff::for_connection(conn))
}

pub fn build_w01(wg: &WeightedGrid, witnesses: &Witnesses, plan: BoundaryPlan) -> Result<W01, WError> {
    let mut verdicts = Vec::new();
    for kind in plan.required() {
        verdicts.push(witnesses.require(kind)?);
    }
    let x0 = w0_x(wg, &transplant(wg, verdicts[0], 0)?)?;
    let w0 = w_from_x(&x0, wg);
    let target = plan.target();
    let xb = match plan {
        BoundaryPlan::MinusEnd { .. } => {
            build_diagonal_x(&transplant(wg, verdicts[1], 0)?, &profile_operator(wg, EndPoint::MinusOne), -target[(0, 0)] - 1.0)?.x
        }
        BoundaryPlan::PlusEnd { .. } => {
            build_diagonal_x(&transplant(wg, verdicts[1], 0)?, &profile_operator(wg, EndPoint::PlusOne), target[(1, 1)] - 1.0)?.x
        }
        BoundaryPlan::Both { .. } => {
            let mixed = verdicts[3];
            let case = mixed.mixed_case.ok_or_else(|| WError::HypothesisNotMet("mixed condition has no case".into()))?;
            let (s1, s2) = (transplant(wg, mixed, 0)?, transplant(wg, mixed, 1)?);
            ws1_x(wg, &transplant(wg, verdicts[1], 0)?, &transplant(wg, verdicts[2], 0)?, (case, &s1, &s2), target)?
        }
    };
    let wb = w_from_x(&xb, wg);
    let inner = OperatorGrid::multiplication(&wg.grid, Support::Whole, |x| if x.abs() < 0.5 { 1.0 } else { 0.0 });
    let outer = OperatorGrid::multiplication(&wg.grid, Support::Whole, |x| if x.abs() < 0.5 { 0.0 } else { 1.0 });
    let w = w0.compose(&inner).add(&wb.compose(&outer));
    let x = x0.add(&xb);
    let min_eig = min_form_eig(&w.apply_j(wg), wg)?;
    if min_eig < 1.0 - 1e-6 {
        return Err(WError::CertificationFailure { clause: "J0 W01 >= I".into(), detail: format!("minimum eigenvalue {min_eig}") });
    }
    let action = measure_action(&w, wg, target);
    Ok(W01 { plan, w, x, min_eig, action })
}
