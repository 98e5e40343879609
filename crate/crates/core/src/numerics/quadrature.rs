use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::f64::consts::PI;

use super::NumericsError;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Power-law singular point `|x - at|^exponent` of a weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub at: f64,
    pub exponent: f64,
}

/// A weight function with known breakpoints and power-law singular points.
pub trait Weight {
    fn value(&self, x: f64) -> f64;
    fn singularities(&self) -> Vec<Singularity> {
        Vec::new()
    }
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// The constant weight 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitWeight;

impl Weight for UnitWeight {
    fn value(&self, _x: f64) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.a.partial_cmp(&self.a).unwrap_or(Ordering::Equal))
    }
}

const HI: usize = 20;
const LO: usize = 10;
const MAX_SEGMENTS: usize = 20_000;

struct Rules {
    hi: (Vec<f64>, Vec<f64>),
    lo: (Vec<f64>, Vec<f64>),
}

fn rule_on<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> Result<f64, NumericsError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        let xx = c + h * x;
        let v = f(xx);
        if !v.is_finite() {
            return Err(NumericsError::EvaluationError { x: xx });
        }
        s += w * v;
    }
    Ok(s * h)
}

fn segment<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rules: &Rules) -> Result<Segment, NumericsError> {
    let value = rule_on(f, a, b, &rules.hi)?;
    let coarse = rule_on(f, a, b, &rules.lo)?;
    Ok(Segment { a, b, value, error: (value - coarse).abs() })
}

/// Adaptive composite Gauss–Legendre integration of `f·weight` over `[a, b]`.
///
/// Breakpoints and singular points of the weight are forced to be segment
/// boundaries; bisection then grades segments geometrically toward power-law
/// singularities.
pub fn quad_weighted<F, W>(f: F, weight: &W, a: f64, b: f64, tol: f64) -> Result<QuadResult, NumericsError>
where
    F: Fn(f64) -> f64,
    W: Weight + ?Sized,
{
    if !(tol > 0.0) {
        return Err(NumericsError::InvalidTolerance("quadrature tolerance must be positive"));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    if b < a {
        let r = quad_weighted(f, weight, b, a, tol)?;
        return Ok(QuadResult { value: -r.value, error: r.error });
    }
    let mut cuts = vec![a, b];
    for s in weight.singularities() {
        if s.at >= a && s.at <= b {
            if s.exponent <= -1.0 {
                return Err(NumericsError::NonIntegrable { at: s.at, exponent: s.exponent });
            }
            cuts.push(s.at);
        }
    }
    cuts.extend(weight.breakpoints().into_iter().filter(|&x| x > a && x < b));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));

    let rules = Rules { hi: gauss_legendre(HI), lo: gauss_legendre(LO) };
    let g = |x: f64| f(x) * weight.value(x);
    let mut heap = BinaryHeap::new();
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            heap.push(segment(&g, w[0], w[1], &rules)?);
        }
    }
    loop {
        let total: f64 = heap.iter().map(|s| s.value).sum();
        let err: f64 = heap.iter().map(|s| s.error).sum();
        if err <= tol * (1.0 + total.abs()) || heap.len() >= MAX_SEGMENTS {
            return Ok(QuadResult { value: total, error: err });
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        heap.push(segment(&g, worst.a, m, &rules)?);
        heap.push(segment(&g, m, worst.b, &rules)?);
    }
}

/// Fixed composite rule with `panels` equal panels of `order` Gauss points.
/// The error estimate compares against the same rule on twice as many panels.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> QuadResult {
    let rule = gauss_legendre(order);
    let sum = |k: usize| -> f64 {
        let h = (b - a) / k as f64;
        (0..k)
            .map(|i| {
                let lo = a + i as f64 * h;
                rule_on(&f, lo, lo + h, &rule).unwrap_or(f64::NAN)
            })
            .sum()
    };
    let coarse = sum(panels);
    let fine = sum(2 * panels);
    QuadResult { value: coarse, error: (coarse - fine).abs() }
}
