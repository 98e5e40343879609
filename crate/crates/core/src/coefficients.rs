//! Piecewise power-times-polynomial coefficients and the smooth-connection
//! conditions built on their local orders.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{quad_weighted, NumericsError, Side, Singularity, Weight};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoefficientError {
    #[error("coefficient {role:?} is singular at x = {x}")]
    SingularPoint { role: Role, x: f64 },
    #[error("coefficient {role:?}: {reason}")]
    InvalidDescriptor { role: Role, reason: String },
    #[error("unsupported descriptor for connections: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    P,
    Q,
    R,
}

/// `sign · |x − anchor|^exponent · Σ poly[k] xᵏ` on `interval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub interval: [f64; 2],
    #[serde(default = "one")]
    pub sign: f64,
    #[serde(default)]
    pub anchor: f64,
    #[serde(default)]
    pub exponent: f64,
    #[serde(default = "unit_poly")]
    pub poly: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn unit_poly() -> Vec<f64> {
    vec![1.0]
}

fn horner(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn derivative(poly: &[f64]) -> Vec<f64> {
    poly.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// Coefficients of x ↦ poly(−x).
fn mirrored(poly: &[f64]) -> Vec<f64> {
    poly.iter().enumerate().map(|(k, &c)| if k % 2 == 1 { -c } else { c }).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl Piece {
    pub fn constant(a: f64, b: f64, value: f64) -> Piece {
        Piece { interval: [a, b], sign: value.signum(), anchor: 0.0, exponent: 0.0, poly: vec![value.abs()] }
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = (x - self.anchor).abs();
        let pw = if self.exponent == 0.0 { 1.0 } else { d.powf(self.exponent) };
        self.sign * pw * horner(&self.poly, x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let poly = horner(&self.poly, x);
        let dpoly = horner(&derivative(&self.poly), x);
        if self.exponent == 0.0 {
            return self.sign * dpoly;
        }
        let d = (x - self.anchor).abs();
        let s = (x - self.anchor).signum();
        self.sign * (self.exponent * d.powf(self.exponent - 1.0) * s * poly + d.powf(self.exponent) * dpoly)
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.interval[0] && x <= self.interval[1]
    }

    fn anchored_at(&self, x: f64) -> bool {
        self.exponent != 0.0 && self.anchor == x
    }

    /// Local behaviour `value ≈ coeff·|x − point|^order` as x → point from inside the piece.
    fn germ(&self, point: f64) -> Option<Germ> {
        let mut order = 0.0;
        let mut factor = self.sign;
        if self.anchored_at(point) {
            order += self.exponent;
        } else if self.exponent != 0.0 {
            factor *= (point - self.anchor).abs().powf(self.exponent);
        }
        let scale = self.poly.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return None;
        }
        let mut d = self.poly.clone();
        let mut mult = 0usize;
        let mut fact = 1.0;
        loop {
            let v = horner(&d, point);
            if v.abs() > 1e-13 * scale * (1.0 + point.abs()).powi(self.poly.len() as i32) {
                // value ≈ v/k! (x − point)^k; orient (x − point) by the side the piece lies on
                let inside = if self.interval[0] >= point { 1.0 } else { -1.0 };
                let oriented = if mult % 2 == 1 { inside } else { 1.0 };
                return Some(Germ { order: order + mult as f64, coeff: factor * v / fact * oriented });
            }
            if d.len() <= 1 {
                return None;
            }
            d = derivative(&d);
            mult += 1;
            fact *= mult as f64;
        }
    }

    /// Polynomial normal form on the piece's interval when the power factor is a non-negative integer power.
    fn as_polynomial(&self) -> Option<Vec<f64>> {
        if self.exponent == 0.0 {
            return Some(self.poly.iter().map(|c| c * self.sign).collect());
        }
        if self.exponent > 0.0 && self.exponent.fract() == 0.0 {
            let mid = 0.5 * (self.interval[0] + self.interval[1]);
            let s = if mid >= self.anchor { 1.0 } else { -1.0 };
            let lin = [-s * self.anchor, s];
            let mut acc = vec![self.sign];
            for _ in 0..self.exponent as usize {
                acc = poly_mul(&acc, &lin);
            }
            return Some(poly_mul(&acc, &self.poly));
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Germ {
    order: f64,
    coeff: f64,
}

/// Half-neighborhoods used by the connection conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EndPoint {
    /// Right half-neighborhood of −1.
    MinusOne,
    /// Left half-neighborhood of 0.
    ZeroMinus,
    /// Right half-neighborhood of 0.
    ZeroPlus,
    /// Left half-neighborhood of 1.
    PlusOne,
}

impl EndPoint {
    pub fn location(self) -> f64 {
        match self {
            EndPoint::MinusOne => -1.0,
            EndPoint::ZeroMinus | EndPoint::ZeroPlus => 0.0,
            EndPoint::PlusOne => 1.0,
        }
    }

    pub fn side(self) -> Side {
        match self {
            EndPoint::MinusOne | EndPoint::ZeroPlus => Side::Right,
            EndPoint::ZeroMinus | EndPoint::PlusOne => Side::Left,
        }
    }

    /// +1 if the half-neighborhood lies to the right of the point.
    pub fn direction(self) -> f64 {
        match self.side() {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub role: Role,
    pub pieces: Vec<Piece>,
}

impl Coefficient {
    pub fn new(role: Role, pieces: Vec<Piece>) -> Result<Coefficient, CoefficientError> {
        let c = Coefficient { role, pieces };
        c.check()?;
        Ok(c)
    }

    pub fn constant(role: Role, value: f64) -> Coefficient {
        Coefficient { role, pieces: vec![Piece::constant(-1.0, 1.0, value)] }
    }

    /// r = sgn x.
    pub fn sign_weight() -> Coefficient {
        Coefficient { role: Role::R, pieces: vec![Piece::constant(-1.0, 0.0, -1.0), Piece::constant(0.0, 1.0, 1.0)] }
    }

    fn invalid(&self, reason: impl Into<String>) -> CoefficientError {
        CoefficientError::InvalidDescriptor { role: self.role, reason: reason.into() }
    }

    /// Checks coverage of [−1, 1], integrability and the sign requirements of the role.
    pub fn check(&self) -> Result<(), CoefficientError> {
        if self.pieces.is_empty() {
            return Err(self.invalid("no pieces"));
        }
        let mut at = -1.0;
        for p in &self.pieces {
            let [a, b] = p.interval;
            if !(a.is_finite() && b.is_finite() && p.exponent.is_finite() && p.sign.is_finite()) {
                return Err(self.invalid("non-finite piece data"));
            }
            if a != at || b <= a {
                return Err(self.invalid(format!("pieces must cover [-1, 1] in order with disjoint interiors (gap or overlap at {at})")));
            }
            if ![-1.0, 0.0, 1.0].contains(&p.anchor) {
                return Err(self.invalid(format!("anchor {} is not one of -1, 0, 1", p.anchor)));
            }
            if p.sign.abs() != 1.0 {
                return Err(self.invalid("sign must be +1 or -1"));
            }
            if p.poly.is_empty() || p.poly.iter().any(|c| !c.is_finite()) {
                return Err(self.invalid("polynomial must have finite coefficients"));
            }
            at = b;
        }
        if at != 1.0 {
            return Err(self.invalid("pieces must end at 1"));
        }
        for p in &self.pieces {
            let mut points = p.interval.to_vec();
            if p.anchor > p.interval[0] && p.anchor < p.interval[1] {
                points.push(p.anchor);
            }
            for end in points {
                let germ = p.germ(end);
                let order = germ.map(|g| g.order).unwrap_or(f64::INFINITY);
                match self.role {
                    Role::Q | Role::R if order <= -1.0 => {
                        return Err(self.invalid(format!("not integrable at {end} (order {order})")));
                    }
                    Role::P if order >= 1.0 => {
                        return Err(self.invalid(format!("1/p not integrable at {end} (order {order})")));
                    }
                    _ => {}
                }
            }
            let samples = interior_samples(p.interval[0], p.interval[1]);
            for x in samples {
                let v = p.value(x);
                match self.role {
                    Role::P if !(v > 0.0) => return Err(self.invalid(format!("p must be positive (p({x}) = {v})"))),
                    Role::R if !(x * v > 0.0) => return Err(self.invalid(format!("x·r(x) > 0 fails at x = {x}"))),
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn piece_at(&self, x: f64, side: Side) -> Option<&Piece> {
        match side {
            Side::Right => self.pieces.iter().find(|p| x >= p.interval[0] && x < p.interval[1]).or_else(|| self.pieces.last().filter(|p| p.contains(x))),
            Side::Left => self.pieces.iter().find(|p| x > p.interval[0] && x <= p.interval[1]).or_else(|| self.pieces.first().filter(|p| p.contains(x))),
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64, CoefficientError> {
        let piece = self.piece_at(x, Side::Right).ok_or(CoefficientError::SingularPoint { role: self.role, x })?;
        let v = piece.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CoefficientError::SingularPoint { role: self.role, x })
        }
    }

    /// Evaluation for interior points, where no anchor singularity can be hit.
    pub fn value(&self, x: f64) -> f64 {
        self.piece_at(x, Side::Right).map(|p| p.value(x)).unwrap_or(f64::NAN)
    }

    /// Derivative at a point where the coefficient is differentiable.
    pub fn derivative(&self, x: f64) -> f64 {
        self.piece_at(x, Side::Right).map(|p| p.derivative(x)).unwrap_or(f64::NAN)
    }

    pub fn value_sided(&self, x: f64, side: Side) -> f64 {
        self.piece_at(x, side).map(|p| p.value(x)).unwrap_or(f64::NAN)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pieces.iter().map(|p| p.interval[0]).collect();
        v.push(1.0);
        v
    }

    pub fn integrate(&self, a: f64, b: f64, tol: f64) -> Result<f64, CoefficientError> {
        Ok(quad_weighted(|_| 1.0, self, a, b, tol)?.value)
    }

    pub fn integrate_abs(&self, a: f64, b: f64, tol: f64) -> Result<f64, CoefficientError> {
        Ok(quad_weighted(|_| 1.0, &Abs(self), a, b, tol)?.value)
    }

    /// Order ν of the coefficient on a half-neighborhood, with the germ constant.
    fn germ_at(&self, point: EndPoint) -> Option<Germ> {
        self.piece_at(point.location(), point.side())?.germ(point.location())
    }

    pub fn detect_order(&self, point: EndPoint) -> Option<f64> {
        self.germ_at(point).map(|g| g.order)
    }

    /// Length of the piece adjacent to the half-neighborhood.
    fn adjacent_length(&self, point: EndPoint) -> f64 {
        self.piece_at(point.location(), point.side()).map(|p| p.interval[1] - p.interval[0]).unwrap_or(0.0)
    }

    /// `c` with g(−x) = c·g(x) for x ∈ (0, 1], decided from the piece data.
    fn mirror_ratio(&self) -> Option<f64> {
        let mut cuts: Vec<f64> = self.breakpoints().into_iter().flat_map(|b| [b.abs()]).filter(|&b| b > 0.0).collect();
        cuts.push(0.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut ratio: Option<f64> = None;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let pos = self.piece_at(mid, Side::Right)?;
            let neg = self.piece_at(-mid, Side::Right)?;
            let c = proportional(pos, neg)?;
            match ratio {
                None => ratio = Some(c),
                Some(r) if (r - c).abs() <= 1e-12 * r.abs().max(1.0) => {}
                Some(_) => return None,
            }
        }
        ratio
    }
}

/// `c` with `neg(−x) = c·pos(x)` identically, if the piece data make it evident.
fn proportional(pos: &Piece, neg: &Piece) -> Option<f64> {
    let (a, b) = match (pos.as_polynomial(), neg.as_polynomial()) {
        (Some(a), Some(b)) => (a, mirrored(&b)),
        _ => {
            let anchors_match = pos.exponent == neg.exponent && pos.anchor == -neg.anchor;
            if !anchors_match {
                return None;
            }
            let a: Vec<f64> = pos.poly.iter().map(|c| c * pos.sign).collect();
            let b: Vec<f64> = mirrored(&neg.poly).iter().map(|c| c * neg.sign).collect();
            (a, b)
        }
    };
    let n = a.len().max(b.len());
    let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    let k = (0..n).max_by(|&i, &j| get(&a, i).abs().partial_cmp(&get(&a, j).abs()).unwrap())?;
    if get(&a, k) == 0.0 {
        return None;
    }
    let c = get(&b, k) / get(&a, k);
    let scale = (0..n).map(|i| get(&a, i).abs().max(get(&b, i).abs())).fold(0.0, f64::max);
    (0..n).all(|i| (get(&b, i) - c * get(&a, i)).abs() <= 1e-13 * scale).then_some(c)
}

fn interior_samples(a: f64, b: f64) -> Vec<f64> {
    (0..64).map(|k| a + (b - a) * (k as f64 + 0.5) / 64.0).collect()
}

impl Weight for Coefficient {
    fn value(&self, x: f64) -> f64 {
        Coefficient::value(self, x)
    }

    fn singularities(&self) -> Vec<Singularity> {
        self.pieces
            .iter()
            .filter(|p| p.exponent < 0.0)
            .map(|p| Singularity { at: p.anchor, exponent: p.exponent })
            .collect()
    }

    fn breakpoints(&self) -> Vec<f64> {
        Coefficient::breakpoints(self)
    }
}

struct Abs<'a>(&'a Coefficient);

impl Weight for Abs<'_> {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x).abs()
    }
    fn singularities(&self) -> Vec<Singularity> {
        self.0.singularities()
    }
    fn breakpoints(&self) -> Vec<f64> {
        Coefficient::breakpoints(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderTable {
    pub minus_one: Option<f64>,
    pub zero_minus: Option<f64>,
    pub zero_plus: Option<f64>,
    pub plus_one: Option<f64>,
}

impl OrderTable {
    fn of(c: &Coefficient) -> OrderTable {
        OrderTable {
            minus_one: c.detect_order(EndPoint::MinusOne),
            zero_minus: c.detect_order(EndPoint::ZeroMinus),
            zero_plus: c.detect_order(EndPoint::ZeroPlus),
            plus_one: c.detect_order(EndPoint::PlusOne),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureFlags {
    pub even_p: bool,
    pub odd_r: bool,
    /// Constant c ≠ 1 with p(−x) = c·p(x).
    pub nearly_even_p: Option<f64>,
    /// Constant c ≠ 1 with r(−x) = −c·r(x).
    pub nearly_odd_r: Option<f64>,
    pub p_orders: OrderTable,
    pub r_orders: OrderTable,
}

pub fn structure_flags(p: &Coefficient, r: &Coefficient) -> StructureFlags {
    let pr = p.mirror_ratio();
    let rr = r.mirror_ratio();
    let near = |c: f64| (c > 0.0 && (c - 1.0).abs() > 1e-12).then_some(c);
    StructureFlags {
        even_p: pr.is_some_and(|c| (c - 1.0).abs() <= 1e-12),
        odd_r: rr.is_some_and(|c| (c + 1.0).abs() <= 1e-12),
        nearly_even_p: pr.and_then(near),
        nearly_odd_r: rr.map(|c| -c).and_then(near),
        p_orders: OrderTable::of(p),
        r_orders: OrderTable::of(r),
    }
}

/// An affine smooth connection between two half-neighborhoods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothConnection {
    pub from: EndPoint,
    pub to: EndPoint,
    /// Signed slopes α′, β′.
    pub alpha_slope: f64,
    pub beta_slope: f64,
    pub eps: f64,
    pub tau: f64,
    pub rho0: f64,
    /// Exponent of ρ(t) ~ t^gap near 0.
    pub rho_gap: f64,
    #[serde(skip)]
    p: Coefficient,
    #[serde(skip)]
    r: Coefficient,
}

impl SmoothConnection {
    pub fn alpha(&self, t: f64) -> f64 {
        self.from.location() + self.alpha_slope * t
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.to.location() + self.beta_slope * t
    }

    pub fn beta_inv(&self, y: f64) -> f64 {
        (y - self.to.location()) / self.beta_slope
    }

    pub fn alpha_inv(&self, x: f64) -> f64 {
        (x - self.from.location()) / self.alpha_slope
    }

    /// ρ(t) = |r(β(t))| / |r(α(t))|, with ρ(0) at t = 0.
    pub fn rho(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.rho0;
        }
        self.r.value(self.beta(t)).abs() / self.r.value(self.alpha(t)).abs()
    }

    /// ϖ(t) = p(β(t)) / p(α(t)).
    pub fn varpi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            let pb = self.p.germ_at(self.to).map(|g| g.coeff).unwrap_or(f64::NAN);
            let pa = self.p.germ_at(self.from).map(|g| g.coeff).unwrap_or(f64::NAN);
            return pb / pa;
        }
        self.p.value(self.beta(t)) / self.p.value(self.alpha(t))
    }

    /// |α′|.
    pub fn kappa_alpha(&self) -> f64 {
        self.alpha_slope.abs()
    }

    /// |β′|·ρ(0).
    pub fn kappa_beta(&self) -> f64 {
        self.beta_slope.abs() * self.rho0
    }
}

/// Affine connection from `from` to `to` with slope magnitudes `(a, b)`.
pub fn connection_witness(p: &Coefficient, r: &Coefficient, from: EndPoint, to: EndPoint, slopes: (f64, f64)) -> Result<Option<SmoothConnection>, CoefficientError> {
    let (a, b) = slopes;
    let pa = p.germ_at(from).ok_or_else(|| CoefficientError::Unsupported(format!("p has no order at {from:?}")))?;
    let pb = p.germ_at(to).ok_or_else(|| CoefficientError::Unsupported(format!("p has no order at {to:?}")))?;
    if pa.order != 0.0 || pb.order != 0.0 {
        return Err(CoefficientError::Unsupported("p must be of order 0 at both ends".into()));
    }
    let ra = r.germ_at(from).ok_or_else(|| CoefficientError::Unsupported(format!("r has no order at {from:?}")))?;
    let rb = r.germ_at(to).ok_or_else(|| CoefficientError::Unsupported(format!("r has no order at {to:?}")))?;
    let gap = rb.order - ra.order;
    let rho0 = if gap == 0.0 {
        (b / a).powf(ra.order) * rb.coeff.abs() / ra.coeff.abs()
    } else if gap > 0.5 {
        0.0
    } else {
        return Ok(None);
    };
    let eps = 0.5 * (p.adjacent_length(from).min(r.adjacent_length(from)) / a).min(p.adjacent_length(to).min(r.adjacent_length(to)) / b);
    let mut conn = SmoothConnection {
        from,
        to,
        alpha_slope: from.direction() * a,
        beta_slope: to.direction() * b,
        eps,
        tau: 1.0,
        rho0,
        rho_gap: gap,
        p: p.clone(),
        r: r.clone(),
    };
    let mut lo = conn.varpi(0.0);
    let mut hi = lo;
    for k in 1..=256 {
        let w = conn.varpi(eps * k as f64 / 256.0);
        lo = lo.min(w);
        hi = hi.max(w);
    }
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(CoefficientError::Unsupported("p ratio is not bounded away from 0 and ∞".into()));
    }
    conn.tau = 2.0 * hi.max(1.0 / lo);
    Ok(Some(conn))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionKind {
    /// Connection at 0.
    At0,
    /// Right half-neighborhood of −1 to itself.
    AtMinus1,
    /// Left half-neighborhood of 1 to itself.
    AtPlus1,
    /// Two connections between ±1.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MixedCase {
    A,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated { justification: String },
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub which: ConditionKind,
    pub verdict: Verdict,
    pub witnesses: Vec<SmoothConnection>,
    pub mixed_case: Option<MixedCase>,
    /// |α′| − |β′|ρ(0) for single connections, the determinant for the mixed condition.
    pub margin: Option<f64>,
}

impl ConditionVerdict {
    pub fn satisfied(&self) -> bool {
        self.verdict == Verdict::Satisfied
    }

    fn unknown(which: ConditionKind) -> Self {
        ConditionVerdict { which, verdict: Verdict::Unknown, witnesses: Vec::new(), mixed_case: None, margin: None }
    }
}

const MARGIN: f64 = 1e-6;

fn single(p: &Coefficient, r: &Coefficient, which: ConditionKind, pairs: &[(EndPoint, EndPoint)]) -> ConditionVerdict {
    for slopes in [(1.0, 2.0), (1.0, 3.0)] {
        for &(from, to) in pairs {
            if let Ok(Some(conn)) = connection_witness(p, r, from, to, slopes) {
                let margin = conn.kappa_alpha() - conn.kappa_beta();
                if margin.abs() >= MARGIN {
                    return ConditionVerdict { which, verdict: Verdict::Satisfied, witnesses: vec![conn], mixed_case: None, margin: Some(margin) };
                }
            }
        }
    }
    ConditionVerdict::unknown(which)
}

fn mixed_pair(p: &Coefficient, r: &Coefficient, case: MixedCase) -> Option<(SmoothConnection, SmoothConnection, f64)> {
    use EndPoint::{MinusOne, PlusOne};
    let w = |from, to, s| connection_witness(p, r, from, to, s).ok().flatten();
    let (c1, c2) = match case {
        MixedCase::A => (w(MinusOne, PlusOne, (1.0, 1.0))?, w(MinusOne, PlusOne, (2.0, 1.0))?),
        MixedCase::B => (w(PlusOne, MinusOne, (1.0, 1.0))?, w(PlusOne, MinusOne, (2.0, 1.0))?),
        MixedCase::C => (w(MinusOne, PlusOne, (2.0, 1.0))?, w(PlusOne, MinusOne, (1.0, 1.0))?),
    };
    let det = mixed_determinant(case, &c1, &c2);
    (det.abs() >= MARGIN).then_some((c1, c2, det))
}

/// The determinant of the mixed condition for the given case.
pub fn mixed_determinant(case: MixedCase, c1: &SmoothConnection, c2: &SmoothConnection) -> f64 {
    match case {
        MixedCase::A | MixedCase::B => c1.kappa_alpha() * c2.kappa_beta() - c2.kappa_alpha() * c1.kappa_beta(),
        MixedCase::C => c1.kappa_alpha() * c2.kappa_alpha() - c2.kappa_beta() * c1.kappa_beta(),
    }
}

pub fn check_condition(p: &Coefficient, r: &Coefficient, which: ConditionKind) -> ConditionVerdict {
    use EndPoint::*;
    match which {
        ConditionKind::At0 => single(p, r, which, &[(ZeroMinus, ZeroPlus), (ZeroPlus, ZeroMinus), (ZeroMinus, ZeroMinus), (ZeroPlus, ZeroPlus)]),
        ConditionKind::AtMinus1 => single(p, r, which, &[(MinusOne, MinusOne)]),
        ConditionKind::AtPlus1 => single(p, r, which, &[(PlusOne, PlusOne)]),
        ConditionKind::Mixed => check_mixed(p, r),
    }
}

fn check_mixed(p: &Coefficient, r: &Coefficient) -> ConditionVerdict {
    let which = ConditionKind::Mixed;
    let nu_m = r.detect_order(EndPoint::MinusOne);
    let nu_p = r.detect_order(EndPoint::PlusOne);
    let p_regular = p.detect_order(EndPoint::MinusOne) == Some(0.0) && p.detect_order(EndPoint::PlusOne) == Some(0.0);
    let satisfied = |case: MixedCase| {
        mixed_pair(p, r, case).map(|(c1, c2, det)| ConditionVerdict {
            which,
            verdict: Verdict::Satisfied,
            witnesses: vec![c1, c2],
            mixed_case: Some(case),
            margin: Some(det),
        })
    };
    if let (Some(a), Some(b)) = (nu_m, nu_p) {
        if p_regular && a == b {
            if let Some(v) = satisfied(MixedCase::A) {
                return v;
            }
        }
    }
    let flags = structure_flags(p, r);
    if flags.even_p && flags.odd_r {
        let plus = check_condition(p, r, ConditionKind::AtPlus1);
        if !plus.satisfied() {
            return ConditionVerdict { verdict: plus.verdict, ..ConditionVerdict::unknown(which) };
        }
        if let Some(v) = satisfied(MixedCase::B).or_else(|| satisfied(MixedCase::A)) {
            return v;
        }
    }
    if flags.nearly_even_p.is_some() && flags.nearly_odd_r.is_some() {
        if let Some(v) = [MixedCase::A, MixedCase::B, MixedCase::C].into_iter().find_map(satisfied) {
            return v;
        }
        return ConditionVerdict { verdict: Verdict::Satisfied, ..ConditionVerdict::unknown(which) };
    }
    if let (Some(a), Some(b)) = (nu_m, nu_p) {
        if p_regular && a != b {
            return ConditionVerdict {
                verdict: Verdict::Violated { justification: "affine-exhaustion".into() },
                ..ConditionVerdict::unknown(which)
            };
        }
    }
    ConditionVerdict::unknown(which)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn amended_r() -> Coefficient {
        Coefficient::new(Role::R, vec![Piece::constant(-1.0, 0.0, -1.0), Piece { interval: [0.0, 1.0], sign: 1.0, anchor: 0.0, exponent: 0.0, poly: vec![1.0, -1.0] }]).unwrap()
    }

    fn unit_p() -> Coefficient {
        Coefficient::constant(Role::P, 1.0)
    }

    #[test]
    fn evaluation_and_integration() {
        let r = Coefficient::sign_weight();
        assert_eq!(r.evaluate(0.3).unwrap(), 1.0);
        assert_eq!(amended_r().evaluate(0.5).unwrap(), 0.5);
        assert!((r.integrate_abs(-1.0, 1.0, 1e-12).unwrap() - 2.0).abs() < 1e-14);
        assert!(r.integrate(-1.0, 1.0, 1e-12).unwrap().abs() < 1e-14);
        let sing = Coefficient::new(Role::R, vec![
            Piece { interval: [-1.0, 0.0], sign: -1.0, anchor: 0.0, exponent: -0.5, poly: vec![1.0] },
            Piece { interval: [0.0, 1.0], sign: 1.0, anchor: 0.0, exponent: -0.5, poly: vec![1.0] },
        ])
        .unwrap();
        assert!((sing.integrate(0.0, 1.0, 1e-11).unwrap() - 2.0).abs() < 1e-9);
        assert!(matches!(sing.evaluate(0.0), Err(CoefficientError::SingularPoint { .. })));
    }

    #[test]
    fn descriptor_invariants_are_enforced() {
        let neg = Coefficient::new(Role::R, vec![Piece::constant(-1.0, 0.0, 1.0), Piece::constant(0.0, 1.0, -1.0)]);
        assert!(matches!(neg, Err(CoefficientError::InvalidDescriptor { .. })));
        let gap = Coefficient::new(Role::P, vec![Piece::constant(-1.0, 0.2, 1.0), Piece::constant(0.3, 1.0, 1.0)]);
        assert!(gap.is_err());
        let nonint = Coefficient::new(Role::Q, vec![Piece { interval: [-1.0, 1.0], sign: 1.0, anchor: 0.0, exponent: -1.0, poly: vec![1.0] }]);
        assert!(nonint.is_err());
        let bad_p = Coefficient::new(Role::P, vec![Piece { interval: [-1.0, 1.0], sign: 1.0, anchor: 0.0, exponent: 1.0, poly: vec![1.0] }]);
        assert!(bad_p.is_err());
    }

    #[test]
    fn orders_of_examples() {
        let r = Coefficient::sign_weight();
        assert_eq!(r.detect_order(EndPoint::ZeroPlus), Some(0.0));
        let a = amended_r();
        assert_eq!(a.detect_order(EndPoint::PlusOne), Some(1.0));
        assert_eq!(a.detect_order(EndPoint::MinusOne), Some(0.0));
        let anchored = Coefficient::new(Role::R, vec![
            Piece::constant(-1.0, 0.0, -1.0),
            Piece { interval: [0.0, 1.0], sign: 1.0, anchor: 1.0, exponent: 1.0, poly: vec![1.0] },
        ])
        .unwrap();
        assert_eq!(anchored.detect_order(EndPoint::PlusOne), Some(1.0));
        let cube = Coefficient::new(Role::R, vec![Piece { interval: [-1.0, 1.0], sign: 1.0, anchor: 0.0, exponent: 0.0, poly: vec![0.0, 0.0, 0.0, 1.0] }]).unwrap();
        assert_eq!(cube.detect_order(EndPoint::ZeroMinus), Some(3.0));
    }

    #[test]
    fn symmetry_flags() {
        let f = structure_flags(&unit_p(), &Coefficient::sign_weight());
        assert!(f.even_p && f.odd_r);
        assert_eq!(f.nearly_odd_r, None);
        let skew = Coefficient::new(Role::R, vec![Piece::constant(-1.0, 0.0, -2.0), Piece::constant(0.0, 1.0, 1.0)]).unwrap();
        let f = structure_flags(&unit_p(), &skew);
        assert!(!f.odd_r);
        assert_eq!(f.nearly_odd_r, Some(2.0));
        let f = structure_flags(&unit_p(), &amended_r());
        assert!(!f.odd_r && f.nearly_odd_r.is_none());
        let x = Coefficient::new(Role::R, vec![Piece { interval: [-1.0, 1.0], sign: 1.0, anchor: 0.0, exponent: 0.0, poly: vec![0.0, 1.0] }]).unwrap();
        assert!(structure_flags(&unit_p(), &x).odd_r);
    }

    #[test]
    fn connection_witnesses() {
        let r = Coefficient::sign_weight();
        let c = connection_witness(&unit_p(), &r, EndPoint::ZeroMinus, EndPoint::ZeroPlus, (1.0, 2.0)).unwrap().unwrap();
        assert_eq!(c.rho0, 1.0);
        assert_eq!((c.alpha(0.1), c.beta(0.1)), (-0.1, 0.2));
        let a = amended_r();
        let c = connection_witness(&unit_p(), &a, EndPoint::MinusOne, EndPoint::PlusOne, (1.0, 1.0)).unwrap().unwrap();
        assert_eq!(c.rho0, 0.0);
        assert!((c.rho(1e-3) - 1e-3).abs() < 1e-15);
        assert!(connection_witness(&unit_p(), &a, EndPoint::PlusOne, EndPoint::MinusOne, (1.0, 1.0)).unwrap().is_none());
    }

    #[test]
    fn condition_verdicts() {
        let p = unit_p();
        let r = Coefficient::sign_weight();
        for which in [ConditionKind::At0, ConditionKind::AtMinus1, ConditionKind::AtPlus1, ConditionKind::Mixed] {
            assert!(check_condition(&p, &r, which).satisfied(), "{which:?}");
        }
        let a = amended_r();
        assert!(check_condition(&p, &a, ConditionKind::AtPlus1).satisfied());
        assert!(check_condition(&p, &a, ConditionKind::AtMinus1).satisfied());
        assert!(check_condition(&p, &a, ConditionKind::At0).satisfied());
        let m = check_condition(&p, &a, ConditionKind::Mixed);
        assert_eq!(m.verdict, Verdict::Violated { justification: "affine-exhaustion".into() });
        let skew = Coefficient::new(Role::R, vec![Piece::constant(-1.0, 0.0, -2.0), Piece::constant(0.0, 1.0, 1.0)]).unwrap();
        assert!(check_condition(&p, &skew, ConditionKind::Mixed).satisfied());
        let wavy_p = Coefficient::new(Role::P, vec![Piece { interval: [-1.0, 1.0], sign: 1.0, anchor: 1.0, exponent: 0.5, poly: vec![1.0] }]).unwrap();
        assert_eq!(check_condition(&wavy_p, &a, ConditionKind::Mixed).verdict, Verdict::Unknown);
    }

    fn order_type_r() -> impl Strategy<Value = Coefficient> {
        (-0.9f64..3.0, -0.9f64..3.0, 0.2f64..5.0, 0.2f64..5.0, -0.9f64..2.0, -0.9f64..2.0).prop_map(|(nl, nr, cl, cr, e1, e2)| {
            Coefficient::new(Role::R, vec![
                Piece { interval: [-1.0, -0.5], sign: -1.0, anchor: -1.0, exponent: e1, poly: vec![cl] },
                Piece { interval: [-0.5, 0.0], sign: -1.0, anchor: 0.0, exponent: nl, poly: vec![cl] },
                Piece { interval: [0.0, 0.5], sign: 1.0, anchor: 0.0, exponent: nr, poly: vec![cr] },
                Piece { interval: [0.5, 1.0], sign: 1.0, anchor: 1.0, exponent: e2, poly: vec![cr] },
            ])
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn satisfied_witnesses_meet_definition(r in order_type_r()) {
            let p = unit_p();
            for which in [ConditionKind::At0, ConditionKind::AtMinus1, ConditionKind::AtPlus1, ConditionKind::Mixed] {
                let v = check_condition(&p, &r, which);
                if v.satisfied() && !v.witnesses.is_empty() {
                    prop_assert!(v.margin.unwrap().abs() >= 1e-6);
                    for w in &v.witnesses {
                        for k in 1..=50 {
                            let t = w.eps * k as f64 / 50.0;
                            let vp = w.varpi(t);
                            prop_assert!(vp > 1.0 / w.tau && vp < w.tau);
                            let direct = r.value(w.beta(t)).abs() / r.value(w.alpha(t)).abs();
                            prop_assert!((w.rho(t) - direct).abs() <= 1e-8 * direct.max(1.0));
                        }
                    }
                }
            }
        }

        #[test]
        fn self_connection_with_equal_slopes_has_unit_ratio(r in order_type_r(), s in 0.5f64..3.0) {
            for pt in [EndPoint::MinusOne, EndPoint::ZeroMinus, EndPoint::ZeroPlus, EndPoint::PlusOne] {
                let c = connection_witness(&unit_p(), &r, pt, pt, (s, s)).unwrap().unwrap();
                prop_assert_eq!(c.rho0, 1.0);
            }
        }

        #[test]
        fn even_odd_never_violated_when_endpoint_holds(c in 0.2f64..5.0, nu in -0.9f64..2.0) {
            let r = Coefficient::new(Role::R, vec![
                Piece { interval: [-1.0, 0.0], sign: -1.0, anchor: -1.0, exponent: nu, poly: vec![c] },
                Piece { interval: [0.0, 1.0], sign: 1.0, anchor: 1.0, exponent: nu, poly: vec![c] },
            ]).unwrap();
            let p = unit_p();
            let flags = structure_flags(&p, &r);
            prop_assert!(flags.even_p && flags.odd_r);
            prop_assert!(check_condition(&p, &r, ConditionKind::AtPlus1).satisfied());
            let violated = matches!(check_condition(&p, &r, ConditionKind::Mixed).verdict, Verdict::Violated { .. });
            prop_assert!(!violated);
        }
    }
}
