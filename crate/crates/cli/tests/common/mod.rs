#![allow(dead_code)]

use kreinspec_cli::{run_with, RunResult};
use kreinspec_core::C64;

pub fn run(args: &[&str]) -> RunResult {
    run_threads(args, None)
}

pub fn run_threads(args: &[&str], threads: Option<&str>) -> RunResult {
    let mut all = vec!["kreinspec"];
    all.extend_from_slice(args);
    run_with(all, threads)
}

pub fn json(r: &RunResult) -> serde_json::Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", r.stdout))
}

/// Closed-form characteristic determinant of `−f″ = λ sgn(x) f`,
/// `f′(1) = λf(−1)`, `−f′(−1) = λf(1)` in `s = √λ`, from the explicit
/// trigonometric and hyperbolic solutions on each half.
pub fn d_oracle(l: C64) -> C64 {
    let s = l.sqrt();
    l * 2.0 + s * s * s * (s.cos() * s.sinh() + s.sin() * s.cosh()) - s * (s.cos() * s.sinh() - s.sin() * s.cosh())
}

fn d_real(l: f64) -> f64 {
    d_oracle(C64::new(l, 0.0)).re
}

/// Real zeros of the closed form in `[lo, hi]` by a sign scan uniform in
/// sgn(λ)√|λ| followed by bisection.
pub fn oracle_real_roots(lo: f64, hi: f64) -> Vec<f64> {
    let to_l = |u: f64| u * u.abs();
    let (u0, u1) = (lo.signum() * lo.abs().sqrt(), hi.signum() * hi.abs().sqrt());
    let n = ((u1 - u0) * 200.0).ceil() as usize;
    let mut roots = Vec::new();
    let mut prev = (to_l(u0), d_real(to_l(u0)));
    for k in 1..=n {
        let l = to_l(u0 + (u1 - u0) * k as f64 / n as f64);
        let v = d_real(l);
        if prev.1 == 0.0 {
            roots.push(prev.0);
        } else if prev.1.signum() != v.signum() && v != 0.0 {
            let (mut a, mut b, fa) = (prev.0, l, prev.1);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                if d_real(m).signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = (l, v);
    }
    if prev.1 == 0.0 {
        roots.push(prev.0);
    }
    roots
}
