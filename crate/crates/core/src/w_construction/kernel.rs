use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary_algebra::{Classification, DeltaInfo};
use crate::numerics::{composite_gauss, gauss_legendre, herm_eig, herm_eigenvalues, Grid, Side};
use crate::problem::ProblemSpec;
use crate::C64;

use super::measure::{end_traces, extremes, form_asymmetry, split_spectrum};
use super::operator::{similarity, OperatorGrid, WeightedGrid};
use super::WError;

/// Lattice on which γ is searched.
pub const GAMMA_LATTICE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityConstants {
    pub alpha: f64,
    pub c: f64,
    pub kappa: f64,
    pub eta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub r_norm1: f64,
    pub gamma: f64,
    /// `1 − κ − α/δ₂`.
    pub identity_residual: f64,
}

/// `(α, c, κ)` from `‖r‖₁`, `δ₁ ≤ δ₂` and `η`.
pub fn constants_from(r_norm1: f64, delta1: f64, delta2: f64, eta: f64) -> (f64, f64, f64) {
    let alpha = delta2 / (1.0 + 2.0 * r_norm1 * delta2 * eta * eta);
    let c = alpha / (2.0 * delta2) * (delta1 / 2.0).sqrt();
    let kappa = 2.0 * alpha * eta * eta * r_norm1;
    (alpha, c, kappa)
}

impl PositivityConstants {
    /// `(c/(αη))² = δ₁/(8δ₂²η²)`.
    pub fn psi_bound_sq(&self) -> f64 {
        self.delta1 / (8.0 * self.delta2 * self.delta2 * self.eta * self.eta)
    }

    /// `α/(2δ₂)`.
    pub fn lower_bound(&self) -> f64 {
        self.alpha / (2.0 * self.delta2)
    }
}

/// `∫_{|x| > γ} |r|`.
fn tail_mass(problem: &ProblemSpec, gamma: f64) -> f64 {
    let tol = problem.tolerances.quad_tol * 1e-2;
    if gamma >= 1.0 {
        return 0.0;
    }
    let left = problem.r.integrate_abs(-1.0, -gamma, tol).unwrap_or(f64::INFINITY);
    let right = problem.r.integrate_abs(gamma, 1.0, tol).unwrap_or(f64::INFINITY);
    left + right
}

pub fn positivity_constants(delta: &DeltaInfo, problem: &ProblemSpec) -> PositivityConstants {
    let r_norm1 = problem.r_norm1();
    let (alpha, c, kappa) = constants_from(r_norm1, delta.delta1, delta.delta2, delta.eta);
    let mut k = PositivityConstants {
        alpha,
        c,
        kappa,
        eta: delta.eta,
        delta1: delta.delta1,
        delta2: delta.delta2,
        r_norm1,
        gamma: 1.0,
        identity_residual: 1.0 - kappa - alpha / delta.delta2,
    };
    let bound = k.psi_bound_sq() * (1.0 + 1e-12);
    let ok = |i: usize| tail_mass(problem, i as f64 / GAMMA_LATTICE as f64) <= bound;
    let (mut lo, mut hi) = (0usize, GAMMA_LATTICE);
    if ok(lo) {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    k.gamma = hi as f64 / GAMMA_LATTICE as f64;
    k
}

/// ψ, ψ₁, ψ₂ and ω sampled on the construction grid.
#[derive(Debug, Clone)]
pub struct PsiSystem {
    pub gamma: f64,
    pub u: C64,
    pub v: C64,
    pub eta11: f64,
    pub eta12: C64,
    pub alpha: f64,
    /// `φ(1)`, the normalization of ψ.
    pub phi1: f64,
    pub psi: DVector<f64>,
    pub psi1: DVector<C64>,
    pub psi2: DVector<C64>,
    pub omega: DVector<C64>,
}

impl PsiSystem {
    /// `k(xᵢ, tⱼ)` from the sampled ω.
    pub fn kernel(&self, grid: &Grid, i: usize, j: usize) -> C64 {
        let (x, t) = (grid.nodes()[i], grid.nodes()[j]);
        kernel_value(x, t, self.omega[i], self.omega[j], self.u, self.v)
    }
}

/// The kernel given `ω(x)` and `ω(t)`.
pub fn kernel_value(x: f64, t: f64, wx: C64, wt: C64, u: C64, v: C64) -> C64 {
    if t <= -x.abs() {
        u * wx.conj()
    } else if t >= x.abs() {
        v * wx.conj()
    } else if x > 0.0 {
        v.conj() * wt
    } else {
        u.conj() * wt
    }
}

pub fn build_psi(problem: &ProblemSpec, wg: &WeightedGrid, k: &PositivityConstants, class: &Classification, delta: &DeltaInfo) -> Result<PsiSystem, WError> {
    if class.k != 1 {
        return Err(WError::WrongCase { k: class.k });
    }
    let cp = class.coupling.ok_or(WError::WrongCase { k: class.k })?;
    let scale = (cp.u.norm_sqr() + cp.v.norm_sqr()).sqrt();
    let (u, v) = (cp.u / scale, cp.v / scale);
    let gamma = k.gamma;
    let phi = |s: f64| -> f64 {
        if s <= gamma {
            0.0
        } else {
            composite_gauss(|t| 1.0 / problem.p.value(t).sqrt(), gamma, s, 4, 16).value
        }
    };
    let phi1 = phi(1.0);
    if !(phi1 > 0.0) {
        return Err(WError::CertificationFailure { clause: "psi normalization".into(), detail: format!("φ(1) = {phi1}") });
    }
    let psi = DVector::from_iterator(wg.len(), wg.grid.nodes().iter().map(|&x| phi(x.abs()) / phi1));
    let eta1 = [C64::new(delta.eta11, 0.0), delta.eta12];
    let psij = |e: C64| {
        DVector::from_iterator(
            wg.len(),
            wg.grid.nodes().iter().zip(psi.iter()).map(|(&x, &p)| e * k.alpha * if x < 0.0 { u.conj() } else { v.conj() } * p),
        )
    };
    let psi1 = psij(eta1[0]);
    let psi2 = psij(eta1[1]);
    let omega = DVector::from_iterator(wg.len(), psi1.iter().zip(psi2.iter()).map(|(a, b)| eta1[0] * a.conj() + eta1[1] * b.conj()));
    Ok(PsiSystem { gamma, u, v, eta11: delta.eta11, eta12: delta.eta12, alpha: k.alpha, phi1, psi, psi1, psi2, omega })
}

/// Weights `Pⱼ` with `∫₋₁^c g ≈ Σⱼ Pⱼ gⱼ`, exact for panel polynomials.
pub fn prefix_weights(grid: &Grid, c: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    let order = grid.order();
    let (rx, rw) = gauss_legendre(order);
    for (k, p) in grid.panels().iter().enumerate() {
        if p.b <= c {
            out[p.start..p.start + order].copy_from_slice(&grid.weights()[p.start..p.start + order]);
        } else if p.a < c {
            let (m, h) = (0.5 * (p.a + c), 0.5 * (c - p.a));
            for (s, w) in rx.iter().zip(&rw) {
                for (j, l) in grid.panel_weights(k, m + h * s).into_iter().enumerate() {
                    out[p.start + j] += h * w * l;
                }
            }
            break;
        } else {
            break;
        }
    }
    out
}

/// Nyström matrix of `(Kf)(x) = ∫ k(x, t) f(t) r(t) dt` with its certificate.
#[derive(Debug, Clone)]
pub struct KOperator {
    pub matrix: DMatrix<C64>,
    /// Majorant operator norm.
    pub norm: f64,
    /// Relative non-Hermitian part of the majorant form of `J₀K`.
    pub asymmetry: f64,
    /// `max |k(x, t) − conj k(t, x)|` over the grid.
    pub kernel_symmetry: f64,
    pub kernel_max: f64,
}

pub fn assemble_k(psi: &PsiSystem, wg: &WeightedGrid) -> Result<KOperator, WError> {
    let grid = &wg.grid;
    let n = wg.len();
    let (u, v) = (psi.u, psi.v);
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = grid.nodes()[i];
            let a = x.abs();
            let lo = prefix_weights(grid, -a);
            let hi = prefix_weights(grid, a);
            let wx = psi.omega[i].conj();
            let zeta = if x > 0.0 { v.conj() } else { u.conj() };
            (0..n)
                .map(|j| {
                    let outer = wx * (u * lo[j] + v * (grid.weights()[j] - hi[j]));
                    let inner = zeta * psi.omega[j] * (hi[j] - lo[j]);
                    (outer + inner) * wg.r[j]
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let mut kernel_symmetry: f64 = 0.0;
    let mut kernel_max: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let kij = psi.kernel(grid, i, j);
            kernel_max = kernel_max.max(kij.norm());
            kernel_symmetry = kernel_symmetry.max((kij - psi.kernel(grid, j, i).conj()).norm());
        }
    }
    let jk = DMatrix::from_fn(n, n, |i, j| matrix[(i, j)] * wg.sign[i]);
    let asymmetry = form_asymmetry(&jk, &wg.weights);
    let h = similarity(&jk, &wg.weights);
    let (eigs, inert) = split_spectrum(&(&h + h.adjoint()).scale(0.5), 0.0)?;
    let (lo, hi) = extremes(&eigs, inert, 0.0);
    let norm = lo.abs().max(hi.abs());
    Ok(KOperator { matrix, norm, asymmetry, kernel_symmetry, kernel_max })
}

impl KOperator {
    pub fn apply(&self, f: &DVector<C64>) -> DVector<C64> {
        &self.matrix * f
    }
}

/// `Za = a₁ψ₁ + a₂ψ₂` and its Krein adjoint `Z^{[*]}f = Δ⁻¹([f,ψ₁]; [f,ψ₂])`.
#[derive(Debug, Clone)]
pub struct ZOperator {
    pub psi1: DVector<C64>,
    pub psi2: DVector<C64>,
    pub delta_inv: Matrix2<C64>,
    /// Norm from `(ℂ², |Δ|)` to `L₂,|r|`.
    pub norm: f64,
}

impl ZOperator {
    pub fn apply(&self, a: &Vector2<C64>) -> DVector<C64> {
        &self.psi1 * a[0] + &self.psi2 * a[1]
    }

    pub fn adjoint(&self, f: &DVector<C64>, wg: &WeightedGrid) -> Vector2<C64> {
        self.delta_inv * Vector2::new(wg.krein(f, &self.psi1), wg.krein(f, &self.psi2))
    }
}

/// Hermitian square root of a positive 2×2 matrix raised to `power`.
fn herm_power(m: &Matrix2<C64>, power: f64) -> Result<Matrix2<C64>, WError> {
    let d = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    let (vals, vecs) = herm_eig(&d, 1e-10)?;
    let mut out = Matrix2::zeros();
    for k in 0..2 {
        let v = Vector2::new(vecs[(0, k)], vecs[(1, k)]);
        out += v * v.adjoint() * C64::new(vals[k].powf(power), 0.0);
    }
    Ok(out)
}

pub fn assemble_z(psi: &PsiSystem, delta: &DeltaInfo, wg: &WeightedGrid) -> Result<ZOperator, WError> {
    let g = Matrix2::new(
        wg.inner(&psi.psi1, &psi.psi1),
        wg.inner(&psi.psi2, &psi.psi1),
        wg.inner(&psi.psi1, &psi.psi2),
        wg.inner(&psi.psi2, &psi.psi2),
    );
    // ‖Za‖² = a*Ga with G[k][j] = ⟨ψⱼ, ψₖ⟩
    let s = herm_power(&delta.abs_delta, -0.5)?;
    let m = s * g * s;
    let d = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    let top = herm_eigenvalues(&d, 1e-8)?[1];
    Ok(ZOperator { psi1: psi.psi1.clone(), psi2: psi.psi2.clone(), delta_inv: delta.delta_inv, norm: top.max(0.0).sqrt() })
}

/// `W = [[W₀₁ + K, Z], [Z^{[*]}, αΔ⁻¹]]` on `(f; a)` and its certificate.
#[derive(Debug, Clone)]
pub struct FullW {
    /// Dense matrix of W on `ℂⁿ ⊕ ℂ²`.
    pub w: DMatrix<C64>,
    pub min_eig: f64,
    pub lower_bound: f64,
    pub asymmetry: f64,
}

pub fn assemble_w_full(w01: &OperatorGrid, k: &KOperator, z: &ZOperator, consts: &PositivityConstants, delta: &DeltaInfo, wg: &WeightedGrid) -> Result<FullW, WError> {
    let n = wg.len();
    let mut w = DMatrix::zeros(n + 2, n + 2);
    w.view_mut((0, 0), (n, n)).copy_from(&(w01.to_dense() + &k.matrix));
    for i in 0..n {
        w[(i, n)] = z.psi1[i];
        w[(i, n + 1)] = z.psi2[i];
    }
    for j in 0..n {
        let pair = Vector2::new(z.psi1[j].conj(), z.psi2[j].conj()) * C64::new(wg.weights[j] * wg.sign[j], 0.0);
        let row = z.delta_inv * pair;
        w[(n, j)] = row[0];
        w[(n + 1, j)] = row[1];
    }
    let corner = delta.delta_inv * C64::new(consts.alpha, 0.0);
    for a in 0..2 {
        for b in 0..2 {
            w[(n + a, n + b)] = corner[(a, b)];
        }
    }
    let jw = apply_block_j(&w, wg, &delta.sign_delta);
    let half = herm_power(&delta.abs_delta, 0.5)?;
    let half_inv = herm_power(&delta.abs_delta, -0.5)?;
    // G^{1/2} (JW) G^{-1/2} with G = diag(w|r|, |Δ|), applied blockwise.
    let root: Vec<f64> = wg.weights.iter().map(|w| w.sqrt()).collect();
    let mut h = jw;
    for j in 0..n {
        for i in 0..n {
            h[(i, j)] *= C64::new(root[i] / root[j], 0.0);
        }
        let tail = half * Vector2::new(h[(n, j)], h[(n + 1, j)]) * C64::new(1.0 / root[j], 0.0);
        h[(n, j)] = tail[0];
        h[(n + 1, j)] = tail[1];
    }
    for i in 0..n {
        let row = Vector2::new(h[(i, n)], h[(i, n + 1)]).transpose() * half_inv * C64::new(root[i], 0.0);
        h[(i, n)] = row[0];
        h[(i, n + 1)] = row[1];
    }
    let corner = half * Matrix2::new(h[(n, n)], h[(n, n + 1)], h[(n + 1, n)], h[(n + 1, n + 1)]) * half_inv;
    for a in 0..2 {
        for b in 0..2 {
            h[(n + a, n + b)] = corner[(a, b)];
        }
    }
    let asymmetry = (&h - h.adjoint()).norm() / h.norm();
    let (eigs, inert) = split_spectrum(&(&h + h.adjoint()).scale(0.5), 1.0)?;
    let min_eig = extremes(&eigs, inert, 1.0).0;
    Ok(FullW { w, min_eig, lower_bound: consts.lower_bound(), asymmetry })
}

fn apply_block_j(w: &DMatrix<C64>, wg: &WeightedGrid, sign_delta: &Matrix2<C64>) -> DMatrix<C64> {
    let n = wg.len();
    let mut out = w.clone();
    for i in 0..n {
        let s = wg.sign[i];
        out.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    let tail = sign_delta * w.rows(n, 2);
    out.rows_mut(n, 2).copy_from(&tail);
    out
}

impl FullW {
    pub fn apply(&self, f: &DVector<C64>, a: &Vector2<C64>) -> (DVector<C64>, Vector2<C64>) {
        let n = f.len();
        let mut x = DVector::zeros(n + 2);
        x.rows_mut(0, n).copy_from(f);
        x[n] = a[0];
        x[n + 1] = a[1];
        let y = &self.w * x;
        (y.rows(0, n).into_owned(), Vector2::new(y[n], y[n + 1]))
    }
}

/// `|u g(−1) + v g(1) − b₁|` for the image `(g; b)` of `(f; u f(−1) + v f(1); z)`.
pub fn coupling_residual(w: &FullW, wg: &WeightedGrid, u: C64, v: C64, f: &DVector<C64>, z: C64) -> f64 {
    let t = end_traces(wg, f);
    let a = Vector2::new(u * t[0] + v * t[1], z);
    let (g, b) = w.apply(f, &a);
    let tg = end_traces(wg, &g);
    (u * tg[0] + v * tg[1] - b[0]).norm()
}

/// `(Kf)(0±)`.
pub fn traces_at_zero(wg: &WeightedGrid, f: &DVector<C64>) -> [C64; 2] {
    let v = f.as_slice();
    [wg.grid.trace(v, 0.0, Side::Left), wg.grid.trace(v, 0.0, Side::Right)]
}
