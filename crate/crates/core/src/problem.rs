use nalgebra::Matrix2;
use thiserror::Error;

use crate::boundary_algebra::{BoundaryData, BoundaryError, Mat24};
use crate::coefficients::{Coefficient, CoefficientError, Piece, Role};
use crate::numerics::{LinearSystem, Tolerances};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("coefficient {0:?} was given with the wrong role")]
    RoleMismatch(Role),
    #[error("invalid tolerances: {0}")]
    Tolerances(String),
}

/// `−(pf′)′ + qf = λrf` on [−1, 1] with `M b(f) = λ N b(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub p: Coefficient,
    pub q: Coefficient,
    pub r: Coefficient,
    pub boundary: BoundaryData,
    pub tolerances: Tolerances,
}

fn real24(rows: [[f64; 4]; 2]) -> Mat24 {
    Mat24::from_fn(|i, j| C64::new(rows[i][j], 0.0))
}

impl ProblemSpec {
    pub fn new(name: impl Into<String>, p: Coefficient, q: Coefficient, r: Coefficient, boundary: BoundaryData, tolerances: Tolerances) -> Result<Self, ProblemError> {
        for (c, role) in [(&p, Role::P), (&q, Role::Q), (&r, Role::R)] {
            if c.role != role {
                return Err(ProblemError::RoleMismatch(c.role));
            }
            c.check()?;
        }
        tolerances.validate().map_err(|e| ProblemError::Tolerances(e.to_string()))?;
        boundary.compute_delta(1e-10)?;
        Ok(ProblemSpec { name: name.into(), p, q, r, boundary, tolerances })
    }

    fn model(name: &str, r: Coefficient, m: [[f64; 4]; 2], n: [[f64; 4]; 2]) -> Self {
        ProblemSpec::new(
            name,
            Coefficient::constant(Role::P, 1.0),
            Coefficient::constant(Role::Q, 0.0),
            r,
            BoundaryData::new(real24(m), real24(n)),
            Tolerances::default(),
        )
        .expect("built-in example is valid")
    }

    /// `−f″ = λ sgn(x) f`, `f′(1) = λf(−1)`, `−f′(−1) = λf(1)`.
    pub fn p0() -> Self {
        Self::model("example_p0", Coefficient::sign_weight(), [[0., 0., 0., 1.], [0., 0., -1., 0.]], [[1., 0., 0., 0.], [0., 1., 0., 0.]])
    }

    /// One essential condition, Δ = −I.
    pub fn p1() -> Self {
        Self::model("example_p1", Coefficient::sign_weight(), [[0., 0., 1., 0.], [0., 1., 0., 0.]], [[1., 0., 0., 0.], [0., 0., 0., 1.]])
    }

    /// Two essential conditions, Δ = I.
    pub fn p2() -> Self {
        Self::model("example_p2", Coefficient::sign_weight(), [[0., 0., -1., 0.], [0., 0., 0., 1.]], [[1., 0., 0., 0.], [0., 1., 0., 0.]])
    }

    /// P0 with r = −1 on [−1, 0) and r = 1 − x on [0, 1].
    pub fn p0_amended() -> Self {
        let r = Coefficient::new(
            Role::R,
            vec![Piece::constant(-1.0, 0.0, -1.0), Piece { interval: [0.0, 1.0], sign: 1.0, anchor: 0.0, exponent: 0.0, poly: vec![1.0, -1.0] }],
        )
        .expect("valid weight");
        let base = Self::p0();
        Self { name: "example_p0_amended".into(), r, ..base }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "example_p0" | "p0" => Some(Self::p0()),
            "example_p1" | "p1" => Some(Self::p1()),
            "example_p2" | "p2" => Some(Self::p2()),
            "example_p0_amended" | "p0_amended" => Some(Self::p0_amended()),
            _ => None,
        }
    }

    /// Union of coefficient breakpoints in (−1, 1).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [&self.p, &self.q, &self.r]
            .iter()
            .flat_map(|c| c.breakpoints())
            .filter(|&x| x > -1.0 && x < 1.0)
            .collect();
        v.push(0.0);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    pub fn system(&self, lambda: C64) -> SlSystem<'_> {
        SlSystem { problem: self, lambda, breakpoints: self.breakpoints() }
    }

    /// ‖r‖₁.
    pub fn r_norm1(&self) -> f64 {
        self.r.integrate_abs(-1.0, 1.0, self.tolerances.quad_tol * 1e-2).expect("integrable weight")
    }
}

/// First-order form in the state (f, pf′): y′ = [[0, 1/p], [q − λr, 0]] y.
pub struct SlSystem<'a> {
    problem: &'a ProblemSpec,
    lambda: C64,
    breakpoints: Vec<f64>,
}

impl LinearSystem for SlSystem<'_> {
    fn matrix(&self, x: f64) -> Matrix2<C64> {
        let pr = self.problem;
        let z = C64::new(0.0, 0.0);
        let lower = C64::new(pr.q.value(x), 0.0) - self.lambda * pr.r.value(x);
        Matrix2::new(z, C64::new(1.0 / pr.p.value(x), 0.0), lower, z)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in ["p0", "p1", "p2", "p0_amended"] {
            let p = ProblemSpec::builtin(name).unwrap();
            assert!(p.boundary.validate(1e-10).pass);
        }
        assert!((ProblemSpec::p0().r_norm1() - 2.0).abs() < 1e-13);
        assert!((ProblemSpec::p0_amended().r_norm1() - 1.5).abs() < 1e-13);
    }

    #[test]
    fn role_mismatch_is_rejected() {
        let p0 = ProblemSpec::p0();
        let e = ProblemSpec::new("x", p0.r.clone(), p0.q.clone(), p0.r.clone(), p0.boundary.clone(), Tolerances::default());
        assert!(matches!(e, Err(ProblemError::RoleMismatch(Role::R))));
    }
}
