//! Boundary data `M b(f) = λ N b(f)`: validation, the Hermitian matrix Δ and
//! the echelon classification by the number of essential conditions.

use nalgebra::{Matrix2, Matrix4, SMatrix, Vector2};
use serde::Serialize;
use thiserror::Error;

use crate::numerics::{herm_eig, normalize_phase, NumericsError};
use crate::C64;

pub type Mat24 = SMatrix<C64, 2, 4>;
pub type Vec4 = nalgebra::Vector4<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("boundary data fails {clause}: {detail}")]
    InvalidBoundaryData { clause: &'static str, detail: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The concomitant matrix Q with `∫(ℓf·ḡ − f·conj(ℓg)) = i·b(g)*Q b(f)`.
pub fn concomitant_q() -> Matrix4<C64> {
    let z = c(0.0, 0.0);
    let i = c(0.0, 1.0);
    Matrix4::new(z, z, -i, z, z, z, z, i, i, z, z, z, z, -i, z, z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub m: Mat24,
    pub n: Mat24,
}

pub const NONSINGULARITY: &str = "nonsingularity: [M; N] must be nonsingular";
pub const NEUTRALITY: &str = "neutrality: MQM* and NQN* must vanish";
pub const DEFINITENESS: &str = "definiteness: iMQN* must be self-adjoint and invertible";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClauseReport {
    pub pass: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `[M; N]` nonsingular; residual is its smallest singular value.
    pub nonsingular: ClauseReport,
    /// `MQM* = 0`.
    pub m_neutral: ClauseReport,
    /// `NQN* = 0`.
    pub n_neutral: ClauseReport,
    /// `iMQN*` self-adjoint; residual is `‖iMQN* − (iMQN*)*‖`.
    pub self_adjoint: ClauseReport,
    /// `iMQN*` invertible; residual is its smallest singular value.
    pub invertible: ClauseReport,
    pub pass: bool,
}

impl ValidationReport {
    /// Name of the first failing clause, if any.
    pub fn first_failure(&self) -> Option<&'static str> {
        self.failures().first().copied()
    }

    /// Names of all failing clauses, in order.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.nonsingular.pass {
            out.push(NONSINGULARITY);
        }
        if !self.m_neutral.pass || !self.n_neutral.pass {
            out.push(NEUTRALITY);
        }
        if !self.self_adjoint.pass || !self.invertible.pass {
            out.push(DEFINITENESS);
        }
        out
    }
}

fn min_singular<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>) -> f64 {
    let d = nalgebra::DMatrix::from_fn(R, C, |i, j| a[(i, j)]);
    d.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

impl BoundaryData {
    pub fn new(m: Mat24, n: Mat24) -> Self {
        BoundaryData { m, n }
    }

    pub fn stacked(&self) -> Matrix4<C64> {
        let mut s = Matrix4::zeros();
        s.fixed_view_mut::<2, 4>(0, 0).copy_from(&self.m);
        s.fixed_view_mut::<2, 4>(2, 0).copy_from(&self.n);
        s
    }

    /// `iMQN*`.
    pub fn imqn(&self) -> Matrix2<C64> {
        self.m * concomitant_q() * self.n.adjoint() * c(0.0, 1.0)
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let q = concomitant_q();
        let scale_m = self.m.norm().max(1.0);
        let scale_n = self.n.norm().max(1.0);
        let clause = |residual: f64, limit: f64, small_is_good: bool| ClauseReport {
            pass: if small_is_good { residual <= limit } else { residual > limit },
            residual,
        };
        let sv = min_singular(&self.stacked());
        let mqm = (self.m * q * self.m.adjoint()).norm();
        let nqn = (self.n * q * self.n.adjoint()).norm();
        let a = self.imqn();
        let sa = (a - a.adjoint()).norm();
        let inv = min_singular(&a);
        let nonsingular = clause(sv, tol * scale_m.max(scale_n), false);
        let m_neutral = clause(mqm, tol * scale_m * scale_m, true);
        let n_neutral = clause(nqn, tol * scale_n * scale_n, true);
        let self_adjoint = clause(sa, tol * scale_m * scale_n, true);
        let invertible = clause(inv, tol * scale_m * scale_n, false);
        let pass = nonsingular.pass && m_neutral.pass && n_neutral.pass && self_adjoint.pass && invertible.pass;
        ValidationReport { nonsingular, m_neutral, n_neutral, self_adjoint, invertible, pass }
    }

    fn require_valid(&self, tol: f64) -> Result<(), BoundaryError> {
        let report = self.validate(tol);
        match report.first_failure() {
            None => Ok(()),
            Some(clause) => Err(BoundaryError::InvalidBoundaryData { clause, detail: format!("{report:?}") }),
        }
    }

    /// Δ = −i(MQN*)⁻¹, symmetrized.
    pub fn delta_matrix(&self, tol: f64) -> Result<Matrix2<C64>, BoundaryError> {
        self.require_valid(tol)?;
        let mqn = self.m * concomitant_q() * self.n.adjoint();
        let inv = mqn.try_inverse().ok_or(BoundaryError::InvalidBoundaryData {
            clause: DEFINITENESS,
            detail: "MQN* is singular".into(),
        })?;
        let d = inv * c(0.0, -1.0);
        Ok((d + d.adjoint()) * c(0.5, 0.0))
    }

    pub fn compute_delta(&self, tol: f64) -> Result<DeltaInfo, BoundaryError> {
        DeltaInfo::from_delta(self.delta_matrix(tol)?)
    }

    /// Row-echelon classification, reducing `[M N]` from the bottom right corner.
    pub fn classify(&self, tol: f64) -> Result<Classification, BoundaryError> {
        self.require_valid(tol)?;
        let mut a = SMatrix::<C64, 2, 8>::zeros();
        a.fixed_view_mut::<2, 4>(0, 0).copy_from(&self.m);
        a.fixed_view_mut::<2, 4>(0, 4).copy_from(&self.n);
        let scale = a.norm();
        let mut free = vec![0usize, 1];
        for col in (0..8).rev() {
            if free.is_empty() {
                break;
            }
            let (best, val) = free
                .iter()
                .map(|&r| (r, a[(r, col)].norm()))
                .fold((usize::MAX, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if val <= 1e-12 * scale {
                continue;
            }
            let target = *free.last().unwrap();
            if best != target {
                a.swap_rows(best, target);
            }
            let piv = a[(target, col)];
            let row = a.row(target) / piv;
            a.set_row(target, &row);
            for r in 0..2 {
                if r != target {
                    let f = a[(r, col)];
                    let new = a.row(r) - row * f;
                    a.set_row(r, &new);
                }
            }
            free.pop();
        }
        let m: Mat24 = a.fixed_view::<2, 4>(0, 0).into_owned();
        let n: Mat24 = a.fixed_view::<2, 4>(0, 4).into_owned();
        let essential: Vec<bool> = (0..2).map(|r| n[(r, 2)].norm().max(n[(r, 3)].norm()) < 1e-12).collect();
        let k = essential.iter().filter(|&&e| e).count();
        let case = match k {
            0 => FormCase::A,
            1 => FormCase::B,
            _ => FormCase::C,
        };
        let coupling = if k == 1 {
            let r = essential.iter().position(|&e| e).unwrap();
            let mut uv = [n[(r, 0)], n[(r, 1)]];
            let norm = (uv[0].norm_sqr() + uv[1].norm_sqr()).sqrt();
            for z in uv.iter_mut() {
                *z /= norm;
            }
            normalize_phase(&mut uv);
            Some(Coupling { u: uv[0], v: uv[1] })
        } else {
            None
        };
        let n_e: Vec<[C64; 2]> = (0..2).filter(|&r| essential[r]).map(|r| [n[(r, 0)], n[(r, 1)]]).collect();
        let n_n: Vec<[C64; 2]> = (0..2).filter(|&r| !essential[r]).map(|r| [n[(r, 2)], n[(r, 3)]]).collect();
        Ok(Classification { k, case, n_e, n_n, coupling, reduced: BoundaryData { m, n } })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Definiteness {
    Positive,
    Negative,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaInfo {
    pub delta: Matrix2<C64>,
    pub delta_inv: Matrix2<C64>,
    pub eta11: f64,
    pub eta12: C64,
    pub eta22: f64,
    pub eta: f64,
    /// Eigenvalues of Δ, ascending.
    pub eigenvalues: [f64; 2],
    /// Eigenvalues of |Δ|: δ₁ ≤ δ₂.
    pub delta1: f64,
    pub delta2: f64,
    pub sign_delta: Matrix2<C64>,
    pub abs_delta: Matrix2<C64>,
    pub definiteness: Definiteness,
}

impl DeltaInfo {
    pub fn from_delta(delta: Matrix2<C64>) -> Result<DeltaInfo, BoundaryError> {
        let d = nalgebra::DMatrix::from_fn(2, 2, |i, j| delta[(i, j)]);
        let (vals, vecs) = herm_eig(&d, 1e-10)?;
        if vals.iter().any(|v| v.abs() <= 1e-14 * d.norm()) {
            return Err(BoundaryError::InvalidBoundaryData { clause: DEFINITENESS, detail: "Δ singular".into() });
        }
        let mut sign = Matrix2::zeros();
        let mut abs = Matrix2::zeros();
        for k in 0..2 {
            let v = Vector2::new(vecs[(0, k)], vecs[(1, k)]);
            let p = v * v.adjoint();
            sign += p * c(vals[k].signum(), 0.0);
            abs += p * c(vals[k].abs(), 0.0);
        }
        let delta_inv = delta.try_inverse().expect("nonsingular Δ");
        let eta11 = delta_inv[(0, 0)].re;
        let eta12 = delta_inv[(0, 1)];
        let eta22 = delta_inv[(1, 1)].re;
        let mut abs_vals = [vals[0].abs(), vals[1].abs()];
        abs_vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let definiteness = if vals[0] > 0.0 {
            Definiteness::Positive
        } else if vals[1] < 0.0 {
            Definiteness::Negative
        } else {
            Definiteness::Indefinite
        };
        Ok(DeltaInfo {
            delta,
            delta_inv,
            eta11,
            eta12,
            eta22,
            eta: eta11.abs().max(eta12.norm()),
            eigenvalues: [vals[0], vals[1]],
            delta1: abs_vals[0],
            delta2: abs_vals[1],
            sign_delta: sign,
            abs_delta: abs,
            definiteness,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormCase {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c")]
    C,
}

/// Normalized coefficients of the essential condition `u f(−1) + v f(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub u: C64,
    pub v: C64,
}

impl Coupling {
    pub fn u_zero(&self) -> bool {
        self.u.norm() < 1e-12
    }

    pub fn v_zero(&self) -> bool {
        self.v.norm() < 1e-12
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub k: usize,
    pub case: FormCase,
    /// Essential rows, first two columns of the reduced N.
    pub n_e: Vec<[C64; 2]>,
    /// Natural rows, derivative columns of the reduced N.
    pub n_n: Vec<[C64; 2]>,
    pub coupling: Option<Coupling>,
    /// The reduced `[M N]`, equivalent to the input.
    pub reduced: BoundaryData,
}

impl Classification {
    pub fn form_domain(&self) -> FormDomain {
        match self.case {
            FormCase::A => FormDomain::Free,
            FormCase::B => {
                let cp = self.coupling.expect("case (b) carries a coupling");
                FormDomain::Coupled { u: cp.u, v: cp.v }
            }
            FormCase::C => FormDomain::Traces,
        }
    }
}

/// Second component of form-domain elements `(f; w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormDomain {
    /// `w ∈ ℂ²` free.
    Free,
    /// `w₁ = u f(−1) + v f(1)`, `w₂` free.
    Coupled { u: C64, v: C64 },
    /// `w = (f(−1), f(1))`.
    Traces,
}

impl FormDomain {
    pub fn contains(&self, f_left: C64, f_right: C64, w: [C64; 2], tol: f64) -> bool {
        match *self {
            FormDomain::Free => true,
            FormDomain::Coupled { u, v } => (w[0] - (u * f_left + v * f_right)).norm() <= tol,
            FormDomain::Traces => (w[0] - f_left).norm() <= tol && (w[1] - f_right).norm() <= tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real24(rows: [[f64; 4]; 2]) -> Mat24 {
        Mat24::from_fn(|i, j| c(rows[i][j], 0.0))
    }

    fn p0() -> BoundaryData {
        BoundaryData::new(real24([[0., 0., 0., 1.], [0., 0., -1., 0.]]), real24([[1., 0., 0., 0.], [0., 1., 0., 0.]]))
    }

    fn p1() -> BoundaryData {
        BoundaryData::new(real24([[0., 0., 1., 0.], [0., 1., 0., 0.]]), real24([[1., 0., 0., 0.], [0., 0., 0., 1.]]))
    }

    fn p2() -> BoundaryData {
        BoundaryData::new(real24([[0., 0., -1., 0.], [0., 0., 0., 1.]]), real24([[1., 0., 0., 0.], [0., 1., 0., 0.]]))
    }

    fn close(a: &Matrix2<C64>, b: [[f64; 2]; 2], tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[(i, j)] - c(b[i][j], 0.0)).norm() <= tol))
    }

    #[test]
    fn q_is_hermitian_involution() {
        let q = concomitant_q();
        assert_eq!(q * q, Matrix4::identity());
        assert_eq!(q.adjoint(), q);
    }

    #[test]
    fn example_problems_validate() {
        for bd in [p0(), p1(), p2()] {
            let r = bd.validate(1e-10);
            assert!(r.pass, "{r:?}");
            assert!(r.m_neutral.residual < 1e-12 && r.n_neutral.residual < 1e-12 && r.self_adjoint.residual < 1e-12);
        }
        assert!(close(&p1().imqn(), [[-1.0, 0.0], [0.0, -1.0]], 0.0));
    }

    #[test]
    fn zero_n_fails_definiteness() {
        let bd = BoundaryData::new(p0().m, Mat24::zeros());
        let r = bd.validate(1e-10);
        assert!(!r.invertible.pass && !r.pass);
        assert!(r.failures().contains(&DEFINITENESS));
        assert!(matches!(bd.compute_delta(1e-10), Err(BoundaryError::InvalidBoundaryData { .. })));
    }

    #[test]
    fn delta_of_examples() {
        let d0 = p0().compute_delta(1e-10).unwrap();
        assert!(close(&d0.delta, [[0.0, 1.0], [1.0, 0.0]], 1e-12));
        assert_eq!(d0.definiteness, Definiteness::Indefinite);
        assert!((d0.delta1 - 1.0).abs() < 1e-12 && (d0.delta2 - 1.0).abs() < 1e-12);
        assert!((d0.eta - 1.0).abs() < 1e-12);
        assert!(close(&d0.abs_delta, [[1.0, 0.0], [0.0, 1.0]], 1e-12));
        let d2 = p2().compute_delta(1e-10).unwrap();
        assert!(close(&d2.delta, [[1.0, 0.0], [0.0, 1.0]], 1e-12));
        assert_eq!(d2.definiteness, Definiteness::Positive);
        let d1 = p1().compute_delta(1e-10).unwrap();
        assert!(close(&d1.delta, [[-1.0, 0.0], [0.0, -1.0]], 1e-12));
        assert_eq!(d1.definiteness, Definiteness::Negative);
    }

    #[test]
    fn classification_of_examples() {
        let c0 = p0().classify(1e-10).unwrap();
        assert_eq!((c0.k, c0.case), (2, FormCase::C));
        assert_eq!(c0.n_e, vec![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
        let c1 = p1().classify(1e-10).unwrap();
        assert_eq!((c1.k, c1.case), (1, FormCase::B));
        let cp = c1.coupling.unwrap();
        assert!((cp.u - c(1.0, 0.0)).norm() < 1e-15 && cp.v_zero());
        let natural = BoundaryData::new(
            real24([[1., 0., 0., 0.], [0., 1., 0., 0.]]),
            real24([[0., 0., 1., 0.], [0., 0., 0., 1.]]),
        );
        let ca = natural.classify(1e-10).unwrap();
        assert_eq!((ca.k, ca.case), (0, FormCase::A));
        assert_eq!(ca.n_n, vec![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    }

    #[test]
    fn form_domain_membership() {
        let one = c(1.0, 0.0);
        assert!(FormDomain::Traces.contains(one, one, [one, one], 1e-12));
        assert!(!FormDomain::Traces.contains(one, one, [one, c(2.0, 0.0)], 1e-12));
        let b = FormDomain::Coupled { u: one, v: c(0.0, 0.0) };
        assert!(b.contains(c(3.0, 0.0), c(-4.0, 0.0), [c(3.0, 0.0), c(17.0, 0.0)], 1e-12));
        assert!(FormDomain::Free.contains(one, one, [c(5.0, 0.0), c(-2.0, 0.0)], 1e-12));
    }

    fn row_op() -> impl Strategy<Value = Matrix2<C64>> {
        prop::array::uniform8(-2.0f64..2.0).prop_filter_map("singular", |a| {
            let t = Matrix2::new(c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7]));
            (t.determinant().norm() > 0.1).then_some(t)
        })
    }

    proptest! {
        #[test]
        fn classification_invariant_under_row_operations(t in row_op(), which in 0usize..3) {
            let bd = [p0(), p1(), p2()][which].clone();
            let moved = BoundaryData::new(t * bd.m, t * bd.n);
            let a = bd.classify(1e-10).unwrap();
            let b = moved.classify(1e-10).unwrap();
            prop_assert_eq!(a.k, b.k);
            prop_assert_eq!(a.case, b.case);
            if let (Some(x), Some(y)) = (a.coupling, b.coupling) {
                prop_assert!((x.u.norm() - y.u.norm()).abs() < 1e-10);
                prop_assert!((x.v.norm() - y.v.norm()).abs() < 1e-10);
            }
        }

        #[test]
        fn delta_is_hermitian_and_factored(t in row_op(), which in 0usize..3) {
            let bd = [p0(), p1(), p2()][which].clone();
            let moved = BoundaryData::new(t * bd.m, t * bd.n);
            let raw = (moved.m * concomitant_q() * moved.n.adjoint()).try_inverse().unwrap() * c(0.0, -1.0);
            let info = moved.compute_delta(1e-10).unwrap();
            prop_assert!((raw - info.delta).norm() <= 1e-12 * raw.norm().max(1.0));
            prop_assert!((info.sign_delta * info.abs_delta - info.delta).norm() <= 1e-12 * raw.norm().max(1.0));
            prop_assert!((info.sign_delta * info.sign_delta - Matrix2::identity()).norm() < 1e-12);
            prop_assert!(info.delta1 > 0.0 && info.delta1 <= info.delta2 && info.eta > 0.0);
        }
    }
}
