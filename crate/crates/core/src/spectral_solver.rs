//! Shooting solver: characteristic determinant, real and complex root
//! location, multiplicities and Jordan chains.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, SMatrix, Vector2};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::boundary_algebra::{concomitant_q, BoundaryData, Mat24, Vec4};
use crate::krein_space::SpaceElement;
use crate::numerics::{ode_integrate, smallest_singular, transfer, Grid, NumericsError};
use crate::problem::ProblemSpec;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("adjacent sign changes near λ = {near}; rescan with a finer grid")]
    RefineRequested { near: f64 },
    #[error("|D| = {value:e} at λ = {at} on the contour")]
    ContourTooClose { at: C64, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type BMatrix = SMatrix<C64, 4, 2>;

const fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Boundary vectors of the solutions with initial data (1, 0) and (0, 1) at x = −1.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSystem {
    pub lambda: C64,
    pub b: BMatrix,
    /// Φ(1); columns are the states (f, pf′) at x = 1.
    pub phi_end: Matrix2<C64>,
}

fn b_matrix(phi: &Matrix2<C64>) -> BMatrix {
    BMatrix::new(c(1.0), c(0.0), phi[(0, 0)], phi[(0, 1)], c(0.0), c(1.0), phi[(1, 0)], phi[(1, 1)])
}

pub fn fundamental_b_vectors(problem: &ProblemSpec, lambda: C64) -> Result<FundamentalSystem, SpectralError> {
    let phi = transfer(&problem.system(lambda), -1.0, 1.0, &problem.tolerances)?;
    Ok(FundamentalSystem { lambda, b: b_matrix(&phi), phi_end: phi })
}

/// Φ(x) at ascending points `xs`, from a single dense trajectory.
pub fn fundamental_matrix_at(problem: &ProblemSpec, lambda: C64, xs: &[f64]) -> Result<Vec<Matrix2<C64>>, SpectralError> {
    let sys = problem.system(lambda);
    let traj = ode_integrate(&sys, -1.0, Vector2::new(c(1.0), c(0.0)), 1.0, &problem.tolerances)?;
    Ok(xs.iter().map(|&x| traj.fundamental_at(x)).collect())
}

fn pencil(bd: &BoundaryData, lambda: C64) -> Mat24 {
    bd.m - bd.n * lambda
}

/// det((M − λN)B) written as det L₀ + det L₁ + tr(adj(L₀)L₁Φ), using det Φ = 1.
/// Returns the value and the magnitude of the terms, the scale of its rounding error.
fn det_from_transfer(bd: &BoundaryData, lambda: C64, phi: &Matrix2<C64>) -> (C64, f64) {
    let k = pencil(bd, lambda);
    let l0 = Matrix2::new(k[(0, 0)], k[(0, 2)], k[(1, 0)], k[(1, 2)]);
    let l1 = Matrix2::new(k[(0, 1)], k[(0, 3)], k[(1, 1)], k[(1, 3)]);
    let adj0 = Matrix2::new(l0[(1, 1)], -l0[(0, 1)], -l0[(1, 0)], l0[(0, 0)]);
    let g = adj0 * l1;
    let mut tr = c(0.0);
    let mut mag = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            tr += g[(i, j)] * phi[(j, i)];
            mag += g[(i, j)].norm() * phi[(j, i)].norm();
        }
    }
    let d0 = l0.determinant();
    let d1 = l1.determinant();
    (d0 + d1 + tr, d0.norm() + d1.norm() + mag)
}

/// D(λ) and its rounding scale.
pub fn char_det(problem: &ProblemSpec, lambda: C64) -> Result<(C64, f64), SpectralError> {
    let phi = transfer(&problem.system(lambda), -1.0, 1.0, &problem.tolerances)?;
    Ok(det_from_transfer(&problem.boundary, lambda, &phi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicValue {
    pub lambda: C64,
    pub b: BMatrix,
    pub c: Matrix2<C64>,
    pub d: C64,
    pub d_prime: C64,
    pub scale: f64,
}

fn derivative_radius(lambda: C64) -> f64 {
    0.05 * lambda.norm().sqrt().max(1.0)
}

/// D′(λ) by the trapezoidal Cauchy integral on a circle of 16 points.
pub fn char_derivative(problem: &ProblemSpec, lambda: C64) -> Result<C64, SpectralError> {
    let n = 16;
    let rho = derivative_radius(lambda);
    let vals: Vec<Result<C64, SpectralError>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let w = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            char_det(problem, lambda + w * rho).map(|(d, _)| d * w.conj())
        })
        .collect();
    let mut s = c(0.0);
    for v in vals {
        s += v?;
    }
    Ok(s / (n as f64 * rho))
}

pub fn characteristic(problem: &ProblemSpec, lambda: C64) -> Result<CharacteristicValue, SpectralError> {
    let fs = fundamental_b_vectors(problem, lambda)?;
    let (d, scale) = det_from_transfer(&problem.boundary, lambda, &fs.phi_end);
    let cm = pencil(&problem.boundary, lambda) * fs.b;
    let d_prime = char_derivative(problem, lambda)?;
    Ok(CharacteristicValue { lambda, b: fs.b, c: cm, d, d_prime, scale })
}

/// A function with its samples, ℓ-values and boundary vector, for the Lagrange identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub values: DVector<C64>,
    pub ell: DVector<C64>,
    pub b: Vec4,
}

fn poly_eval(coeffs: &[C64], x: f64) -> (C64, C64, C64) {
    let mut v = c(0.0);
    let mut d = c(0.0);
    let mut dd = c(0.0);
    for (k, &a) in coeffs.iter().enumerate().rev() {
        dd = dd * x + d * 2.0;
        d = d * x + v;
        v = v * x + a;
        let _ = k;
    }
    (v, d, dd)
}

impl TestFunction {
    /// A complex polynomial `Σ coeffs[k] xᵏ` with `ℓf = −p′f′ − pf″ + qf`.
    pub fn polynomial(problem: &ProblemSpec, grid: &Grid, coeffs: &[C64]) -> TestFunction {
        let ell_at = |x: f64| {
            let (v, d, dd) = poly_eval(coeffs, x);
            -(d * problem.p.derivative(x)) - dd * problem.p.value(x) + v * problem.q.value(x)
        };
        let (fm, dm, _) = poly_eval(coeffs, -1.0);
        let (fp, dp, _) = poly_eval(coeffs, 1.0);
        let b = Vec4::new(fm, fp, dm * problem.p.value(-1.0), dp * problem.p.value(1.0));
        TestFunction { values: grid.sample(|x| poly_eval(coeffs, x).0), ell: grid.sample(ell_at), b }
    }
}

/// `∫(ℓf·ḡ − f·conj(ℓg)) − i·b(g)*Q b(f)`.
pub fn lagrange_residual(grid: &Grid, f: &TestFunction, g: &TestFunction) -> C64 {
    let integrand: Vec<C64> = (0..grid.len()).map(|i| f.ell[i] * g.values[i].conj() - f.values[i] * g.ell[i].conj()).collect();
    let lhs = grid.integrate(&integrand);
    let rhs = g.b.dotc(&(concomitant_q() * f.b)) * C64::new(0.0, 1.0);
    lhs - rhs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealRoot {
    pub lambda: f64,
    pub d_abs: f64,
    pub d_prime: f64,
    /// |D(λ̂)| ≤ root_tol·max(1, |D′(λ̂)|).
    pub certified: bool,
    /// Found as a touching minimum of |D| rather than a sign change.
    pub even_order: bool,
}

fn sqrt_coord(l: f64) -> f64 {
    l.signum() * l.abs().sqrt()
}

fn from_sqrt_coord(u: f64) -> f64 {
    u * u.abs()
}

fn real_det(problem: &ProblemSpec, l: f64) -> Result<(f64, f64), SpectralError> {
    let (d, s) = char_det(problem, c(l))?;
    Ok((d.re, s))
}

/// Brent's method on a bracketing interval.
fn brent<F: FnMut(f64) -> Result<f64, SpectralError>>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64, SpectralError> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut cc, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            cc = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = cc;
            cc = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs().max(1.0);
        let m = 0.5 * (cc - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == cc {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                (s * (2.0 * m * q0 * (q0 - r) - (b - a) * (r - 1.0)), (q0 - 1.0) * (r - 1.0) * (s - 1.0))
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b)?;
    }
    Ok(b)
}

fn golden_min<F: FnMut(f64) -> Result<f64, SpectralError>>(mut f: F, mut a: f64, mut b: f64) -> Result<f64, SpectralError> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..100 {
        if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Real roots of D in `[lo, hi]`, ascending. The scan is uniform in sgn(λ)√|λ| with
/// `density` points per unit.
pub fn find_real_eigenvalues(problem: &ProblemSpec, lo: f64, hi: f64, density: f64) -> Result<Vec<RealRoot>, SpectralError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || !(density > 0.0) {
        return Err(SpectralError::InvalidInput(format!("window [{lo}, {hi}] with density {density}")));
    }
    let (u0, u1) = (sqrt_coord(lo), sqrt_coord(hi));
    let n = ((u1 - u0) * density).ceil().max(2.0) as usize;
    let lambdas: Vec<f64> = (0..=n).map(|k| from_sqrt_coord(u0 + (u1 - u0) * k as f64 / n as f64)).collect();
    let vals: Vec<(f64, f64)> = lambdas.par_iter().map(|&l| real_det(problem, l)).collect::<Result<_, _>>()?;
    let tol = problem.tolerances.root_tol;
    let mut found: Vec<(f64, bool)> = Vec::new();
    let mut last_bracket: Option<usize> = None;
    for i in 0..n {
        let (fa, fb) = (vals[i].0, vals[i + 1].0);
        if fa == 0.0 {
            found.push((lambdas[i], false));
            continue;
        }
        if fa.signum() != fb.signum() && fb != 0.0 {
            if last_bracket == Some(i.wrapping_sub(1)) {
                return Err(SpectralError::RefineRequested { near: lambdas[i] });
            }
            last_bracket = Some(i);
            let root = brent(|l| real_det(problem, l).map(|v| v.0), lambdas[i], lambdas[i + 1], fa, fb)?;
            found.push((root, false));
        }
    }
    if vals[n].0 == 0.0 {
        found.push((lambdas[n], false));
    }
    for i in 1..n {
        let (fl, fm, fr) = (vals[i - 1].0, vals[i].0, vals[i + 1].0);
        let touching = fl.signum() == fm.signum() && fm.signum() == fr.signum() && fm.abs() < fl.abs() && fm.abs() < fr.abs();
        if touching && fm.abs() < 1e-3 * fl.abs().min(fr.abs()) {
            let x = golden_min(|l| real_det(problem, l).map(|v| v.0.abs()), lambdas[i - 1], lambdas[i + 1])?;
            let (d, s) = real_det(problem, x)?;
            if d.abs() <= 1e3 * problem.tolerances.ode_rel * s {
                found.push((x, true));
            }
        }
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    found
        .into_par_iter()
        .map(|(l, even_order)| {
            let (d, _) = char_det(problem, c(l))?;
            let dp = char_derivative(problem, c(l))?;
            Ok(RealRoot { lambda: l, d_abs: d.norm(), d_prime: dp.re, certified: d.norm() <= tol * dp.norm().max(1.0) || even_order, even_order })
        })
        .collect()
}

/// Axis-parallel rectangle `[re₀, re₁] × [im₀, im₁]` in ℂ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroCount {
    pub count: i64,
    /// Total change of arg D divided by 2π.
    pub raw: f64,
}

fn contour_value(problem: &ProblemSpec, z: C64) -> Result<C64, SpectralError> {
    let (d, s) = char_det(problem, z)?;
    if d.norm() < 1e-7 * s.max(f64::MIN_POSITIVE) {
        return Err(SpectralError::ContourTooClose { at: z, value: d.norm() });
    }
    Ok(d)
}

fn arg_change(problem: &ProblemSpec, z0: C64, z1: C64, d0: C64, d1: C64, depth: usize) -> Result<f64, SpectralError> {
    let step = (d1 / d0).arg();
    if step.abs() < PI / 4.0 || depth == 0 {
        return Ok(step);
    }
    let zm = (z0 + z1) * 0.5;
    let dm = contour_value(problem, zm)?;
    Ok(arg_change(problem, z0, zm, d0, dm, depth - 1)? + arg_change(problem, zm, z1, dm, d1, depth - 1)?)
}

/// Winding number of D along the boundary of `rect` (argument principle).
pub fn count_zeros_rect(problem: &ProblemSpec, rect: Rect, points_per_side: usize) -> Result<ZeroCount, SpectralError> {
    let n = points_per_side.max(4);
    let corners = [
        C64::new(rect.re[0], rect.im[0]),
        C64::new(rect.re[1], rect.im[0]),
        C64::new(rect.re[1], rect.im[1]),
        C64::new(rect.re[0], rect.im[1]),
    ];
    let mut pts = Vec::with_capacity(4 * n + 1);
    for s in 0..4 {
        let (a, b) = (corners[s], corners[(s + 1) % 4]);
        for k in 0..n {
            pts.push(a + (b - a) * (k as f64 / n as f64));
        }
    }
    pts.push(corners[0]);
    let vals: Vec<C64> = pts.par_iter().map(|&z| contour_value(problem, z)).collect::<Result<_, _>>()?;
    let changes: Vec<f64> = (0..pts.len() - 1)
        .into_par_iter()
        .map(|i| arg_change(problem, pts[i], pts[i + 1], vals[i], vals[i + 1], 24))
        .collect::<Result<_, _>>()?;
    let raw = changes.iter().sum::<f64>() / (2.0 * PI);
    Ok(ZeroCount { count: raw.round() as i64, raw })
}

/// Zeros in a window, split into rectangles of aspect ratio at most 4; split lines
/// that pass too close to a zero are shifted.
pub fn count_zeros_window(problem: &ProblemSpec, rect: Rect, points_per_side: usize) -> Result<ZeroCount, SpectralError> {
    let width = rect.re[1] - rect.re[0];
    let height = rect.im[1] - rect.im[0];
    let parts = (width / (4.0 * height)).ceil().max(1.0) as usize;
    let mut cuts: Vec<f64> = (0..=parts).map(|k| rect.re[0] + width * k as f64 / parts as f64).collect();
    let mut total = ZeroCount { count: 0, raw: 0.0 };
    let mut k = 0;
    let mut shifts = 0;
    while k < parts {
        let sub = Rect { re: [cuts[k], cuts[k + 1]], im: rect.im };
        match count_zeros_rect(problem, sub, points_per_side) {
            Ok(z) => {
                total.count += z.count;
                total.raw += z.raw;
                k += 1;
                shifts = 0;
            }
            Err(SpectralError::ContourTooClose { at, value }) if k + 1 < parts && (at.re - cuts[k + 1]).abs() < 1e-12 * width.max(1.0) && shifts < 8 => {
                let _ = value;
                cuts[k + 1] += 0.0123 * width / parts as f64;
                shifts += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

/// An eigenfunction sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFunction {
    pub lambda: f64,
    pub values: DVector<C64>,
    /// pf′ at the nodes.
    pub flux: DVector<C64>,
    pub b: Vec4,
}

/// Eigenfunctions at an eigenvalue by multiple shooting over the grid panels.
///
/// The unknowns are the states at all panel ends; the null space of the
/// continuity-plus-boundary system gives the eigenfunctions without propagating
/// exponentially growing solutions across the whole interval.
pub fn eigenfunctions(problem: &ProblemSpec, grid: &Grid, lambda: f64) -> Result<Vec<EigenFunction>, SpectralError> {
    let panels = grid.panels();
    let kp = panels.len();
    let sys = problem.system(c(lambda));
    let tol = problem.tolerances;
    let per_panel: Vec<(Matrix2<C64>, Vec<Matrix2<C64>>)> = panels
        .par_iter()
        .map(|p| {
            let traj = ode_integrate(&sys, p.a, Vector2::new(c(1.0), c(0.0)), p.b, &tol)?;
            let inner = (0..grid.order()).map(|j| traj.fundamental_at(grid.nodes()[p.start + j])).collect();
            Ok((traj.final_fundamental(), inner))
        })
        .collect::<Result<_, NumericsError>>()?;
    let dim = 2 * (kp + 1);
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    for (k, (t, _)) in per_panel.iter().enumerate() {
        let s = 1.0 / t.norm().max(1.0);
        for i in 0..2 {
            a[(2 * k + i, 2 * (k + 1) + i)] = c(s);
            for j in 0..2 {
                a[(2 * k + i, 2 * k + j)] = -t[(i, j)] * s;
            }
        }
    }
    let kmat = pencil(&problem.boundary, c(lambda));
    let ks = 1.0 / kmat.norm().max(1.0);
    let last = 2 * kp;
    for i in 0..2 {
        let row = 2 * kp + i;
        a[(row, 0)] = kmat[(i, 0)] * ks;
        a[(row, last)] = kmat[(i, 1)] * ks;
        a[(row, 1)] = kmat[(i, 2)] * ks;
        a[(row, last + 1)] = kmat[(i, 3)] * ks;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| SpectralError::Numerics(NumericsError::EigenFailure("SVD failed".into())))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    let smax = svd.singular_values.max();
    let g = order.iter().take(2).filter(|&&i| svd.singular_values[i] <= 1e-7 * smax).count().max(1);
    let mut out = Vec::with_capacity(g);
    for &idx in order.iter().take(g) {
        let y = v_t.row(idx).adjoint();
        let mut values = DVector::zeros(grid.len());
        let mut flux = DVector::zeros(grid.len());
        for (k, p) in panels.iter().enumerate() {
            let yk = Vector2::new(y[2 * k], y[2 * k + 1]);
            for (j, phi) in per_panel[k].1.iter().enumerate() {
                let s = phi * yk;
                values[p.start + j] = s[0];
                flux[p.start + j] = s[1];
            }
        }
        let b = Vec4::new(y[0], y[last], y[1], y[last + 1]);
        let mut ef = EigenFunction { lambda, values, flux, b };
        normalize_eigenfunction(&mut ef);
        out.push(ef);
    }
    Ok(out)
}

fn normalize_eigenfunction(ef: &mut EigenFunction) {
    let (i, _) = ef.values.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
    let z = ef.values[i];
    if z.norm() == 0.0 {
        return;
    }
    let ph = z.conj() / z.norm() / z.norm();
    ef.values *= ph;
    ef.flux *= ph;
    ef.b *= ph;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootChain {
    pub lambda: f64,
    pub functions: Vec<DVector<C64>>,
    pub b_vectors: Vec<Vec4>,
    /// Relative least-squares residual of each boundary system attempted.
    pub residuals: Vec<f64>,
}

impl RootChain {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

const CHAIN_TOL: f64 = 1e-6;
/// Inflation of the integration error bound when judging the rank of C(λ).
pub const RANK_SAFETY: f64 = 10.0;

/// Extends an eigenfunction to a Jordan chain by variation of parameters.
pub fn jordan_chain(problem: &ProblemSpec, grid: &Grid, lambda: f64, f0: &EigenFunction, max_depth: usize) -> Result<RootChain, SpectralError> {
    if f0.values.norm() == 0.0 || f0.b.norm() == 0.0 && f0.values.iter().all(|v| v.norm() == 0.0) {
        return Err(SpectralError::InvalidInput("eigenfunction is zero".into()));
    }
    let phis = fundamental_matrix_at(problem, c(lambda), grid.nodes())?;
    let fs = fundamental_b_vectors(problem, c(lambda))?;
    let k = pencil(&problem.boundary, c(lambda));
    let cm = k * fs.b;
    let n = &problem.boundary.n;
    let r: Vec<f64> = grid.nodes().iter().map(|&x| problem.r.value(x)).collect();
    let mut chain = RootChain { lambda, functions: vec![f0.values.clone()], b_vectors: vec![f0.b], residuals: Vec::new() };
    let cmat = DMatrix::from_fn(2, 2, |i, j| cm[(i, j)]);
    let svd = cmat.clone().svd(true, true);
    let smax = svd.singular_values.max();
    while chain.len() < max_depth {
        let prev = chain.functions.last().unwrap();
        let prev_b = chain.b_vectors.last().unwrap();
        // y′ = A y + (0, −r f_{j−1})ᵀ; y_p = Φ ∫ adj(Φ) source
        let h: Vec<Vector2<C64>> = (0..grid.len())
            .map(|i| {
                let p = phis[i];
                let adj = Matrix2::new(p[(1, 1)], -p[(0, 1)], -p[(1, 0)], p[(0, 0)]);
                adj * Vector2::new(c(0.0), -prev[i] * r[i])
            })
            .collect();
        let comp = |j: usize| -> Vec<C64> { h.iter().map(|v| v[j]).collect() };
        let (h0, h1) = (comp(0), comp(1));
        let (c0, c1) = (grid.cumulative(&h0), grid.cumulative(&h1));
        let total = Vector2::new(grid.integrate(&h0), grid.integrate(&h1));
        let y_end = fs.phi_end * total;
        let b_p = Vec4::new(c(0.0), y_end[0], c(0.0), y_end[1]);
        let rhs = n * prev_b - k * b_p;
        let rhs_d = DVector::from_vec(vec![rhs[0], rhs[1]]);
        let eps = CHAIN_TOL * smax;
        let coef = svd.solve(&rhs_d, eps).map_err(|e| SpectralError::InvalidInput(e.to_string()))?;
        let resid = (&cmat * &coef - &rhs_d).norm();
        let scale = rhs.norm().max(f64::MIN_POSITIVE);
        let rel = resid / scale;
        chain.residuals.push(rel);
        if rel > CHAIN_TOL {
            break;
        }
        let cv = Vector2::new(coef[0], coef[1]);
        let values = DVector::from_fn(grid.len(), |i, _| {
            let yp = phis[i] * Vector2::new(c0[i], c1[i]);
            yp[0] + (phis[i] * cv)[0]
        });
        let b = b_p + fs.b * cv;
        chain.functions.push(values);
        chain.b_vectors.push(b);
    }
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub lambda: f64,
    pub geometric: usize,
    pub singular_values: [f64; 2],
    /// Order of the zero of D from the winding number on a small circle.
    pub algebraic_order: usize,
    pub winding_raw: f64,
    /// Length of the Jordan chain built from the first eigenfunction.
    pub chain_length: usize,
    pub consistent: bool,
}

/// Entrywise error bound of C(λ) = (M − λN)B: `ode_rel` on the propagated
/// rows of B, machine precision on the others.
pub fn c_error_bound(problem: &ProblemSpec, lambda: C64, b: &BMatrix) -> Matrix2<f64> {
    let k = pencil(&problem.boundary, lambda);
    let rel = problem.tolerances.ode_rel.max(f64::EPSILON);
    Matrix2::from_fn(|r, j| {
        (0..4)
            .map(|i| {
                let w = if i == 1 || i == 3 { rel } else { f64::EPSILON };
                k[(r, i)].norm() * b[(i, j)].norm() * w
            })
            .sum()
    })
}

/// Geometric multiplicity as 2 − rank C(λ₀), with rank judged against the
/// error bound `err` inflated by `RANK_SAFETY`: C counts as zero when every
/// entry is within its bound, and as singular when the smallest singular
/// value is within the Frobenius norm of the bound.
pub fn geometric_multiplicity(cm: &Matrix2<C64>, err: &Matrix2<f64>) -> (usize, [f64; 2]) {
    let d = DMatrix::from_fn(2, 2, |i, j| cm[(i, j)]);
    let (sv, _) = smallest_singular(&d);
    let s = [sv[0], sv[1]];
    let zero = cm.iter().zip(err.iter()).all(|(x, e)| x.norm() <= RANK_SAFETY * e);
    let g = if zero {
        2
    } else if s[1] <= RANK_SAFETY * err.norm() {
        1
    } else {
        0
    };
    (g, s)
}

pub fn multiplicity(problem: &ProblemSpec, grid: &Grid, lambda: f64) -> Result<MultiplicityReport, SpectralError> {
    let cv = characteristic(problem, c(lambda))?;
    let (geometric, singular_values) = geometric_multiplicity(&cv.c, &c_error_bound(problem, c(lambda), &cv.b));
    let rho = 1e-2 * lambda.abs().sqrt().max(1.0);
    let npts = 64;
    let pts: Vec<C64> = (0..=npts).map(|k| c(lambda) + C64::from_polar(rho, 2.0 * PI * k as f64 / npts as f64)).collect();
    let vals: Vec<C64> = pts.par_iter().map(|&z| contour_value(problem, z)).collect::<Result<_, _>>()?;
    let mut total = 0.0;
    for i in 0..npts {
        total += arg_change(problem, pts[i], pts[i + 1], vals[i], vals[i + 1], 24)?;
    }
    let winding_raw = total / (2.0 * PI);
    let algebraic_order = winding_raw.round().max(0.0) as usize;
    let efs = eigenfunctions(problem, grid, lambda)?;
    let chain = jordan_chain(problem, grid, lambda, &efs[0], algebraic_order + 2)?;
    let chain_length = chain.len();
    let consistent = geometric <= 1 && chain_length == algebraic_order || geometric == 2;
    Ok(MultiplicityReport { lambda, geometric, singular_values, algebraic_order, winding_raw, chain_length, consistent })
}

/// Root vectors `(fⱼ; N b(fⱼ))`.
pub fn root_vector_embed(chain: &RootChain, problem: &ProblemSpec) -> Vec<SpaceElement> {
    chain
        .functions
        .iter()
        .zip(&chain.b_vectors)
        .map(|(f, b)| SpaceElement::new(f.clone(), problem.boundary.n * b))
        .collect()
}
