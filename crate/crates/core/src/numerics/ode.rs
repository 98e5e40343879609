use nalgebra::{Matrix2, Vector2};

use super::{NumericsError, Tolerances};
use crate::C64;

/// A linear system y′ = A(x)·y with traceless 2×2 coefficient matrix.
pub trait LinearSystem {
    fn matrix(&self, x: f64) -> Matrix2<C64>;
    /// Points where A is discontinuous or singular; integration steps never straddle them.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

fn comm(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix2<C64> {
    a * b - b * a
}

/// exp(Ω) for traceless 2×2 Ω via Ω² = -det(Ω)·I.
pub fn expm_traceless(omega: &Matrix2<C64>) -> Matrix2<C64> {
    let mu2 = -omega.determinant();
    let mu = mu2.sqrt();
    let (c, s) = if mu.norm() < 1e-4 {
        let c = C64::new(1.0, 0.0) + mu2 / 2.0 + mu2 * mu2 / 24.0 + mu2 * mu2 * mu2 / 720.0;
        let s = C64::new(1.0, 0.0) + mu2 / 6.0 + mu2 * mu2 / 120.0 + mu2 * mu2 * mu2 / 5040.0;
        (c, s)
    } else {
        (mu.cosh(), mu.sinh() / mu)
    };
    Matrix2::identity() * c + omega * s
}

/// Sixth-order Magnus propagator over [x, x + h] from three Gauss–Legendre samples.
pub fn magnus_step<S: LinearSystem + ?Sized>(sys: &S, x: f64, h: f64) -> Matrix2<C64> {
    let r15 = 15f64.sqrt();
    let a1 = sys.matrix(x + h * (0.5 - r15 / 10.0));
    let a2 = sys.matrix(x + h * 0.5);
    let a3 = sys.matrix(x + h * (0.5 + r15 / 10.0));
    let hc = C64::new(h, 0.0);
    let al1 = a2 * hc;
    let al2 = (a3 - a1) * (hc * (r15 / 3.0));
    let al3 = (a3 - a2 * C64::new(2.0, 0.0) + a1) * (hc * (10.0 / 3.0));
    let c1 = comm(&al1, &al2);
    let c2 = comm(&al1, &(al3 * C64::new(2.0, 0.0) + c1)) * C64::new(-1.0 / 60.0, 0.0);
    let inner = comm(&(al1 * C64::new(-20.0, 0.0) - al3 + c1), &(al2 + c2));
    let omega = al1 + al3 * C64::new(1.0 / 12.0, 0.0) + inner * C64::new(1.0 / 240.0, 0.0);
    expm_traceless(&omega)
}

fn max_abs(m: &Matrix2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn step_limit(x: f64) -> f64 {
    8.0 * f64::EPSILON * x.abs().max(1e-300)
}

struct Stepper<'a, S: ?Sized> {
    sys: &'a S,
    tol: Tolerances,
}

impl<S: LinearSystem + ?Sized> Stepper<'_, S> {
    /// Accepted step from `x` toward `end`, returning (h, propagator, next trial h).
    fn step(&self, x: f64, end: f64, mut h: f64) -> Result<(f64, Matrix2<C64>, f64), NumericsError> {
        loop {
            if end - x <= h * (1.0 + 1e-12) {
                h = end - x;
            }
            if h <= step_limit(x).max(step_limit(x + h)) {
                return Err(NumericsError::StiffnessError { x, h });
            }
            let full = magnus_step(self.sys, x, h);
            let half1 = magnus_step(self.sys, x, 0.5 * h);
            let half2 = magnus_step(self.sys, x + 0.5 * h, 0.5 * h);
            let fine = half2 * half1;
            let err = max_abs(&(full - fine)) / (self.tol.ode_abs + self.tol.ode_rel * max_abs(&fine));
            if !err.is_finite() {
                h *= 0.25;
                continue;
            }
            if err <= 1.0 {
                let grow = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 7.0)).clamp(1.0, 4.0) };
                return Ok((h, fine, h * grow));
            }
            h *= (0.9 * err.powf(-1.0 / 7.0)).clamp(0.1, 0.5);
        }
    }
}

fn segments<S: LinearSystem + ?Sized>(sys: &S, x0: f64, x1: f64) -> Vec<f64> {
    let mut pts = vec![x0];
    let mut bps: Vec<f64> = sys.breakpoints().into_iter().filter(|&b| b > x0 && b < x1).collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.extend(bps);
    pts.push(x1);
    pts.dedup();
    pts
}

/// Dense trajectory of the fundamental matrix Φ(x) (Φ(x₀) = I) and of one initial state.
#[derive(Debug, Clone)]
pub struct Trajectory<'a, S: ?Sized> {
    sys: &'a S,
    xs: Vec<f64>,
    phis: Vec<Matrix2<C64>>,
    y0: Vector2<C64>,
}

impl<'a, S: LinearSystem + ?Sized> Trajectory<'a, S> {
    pub fn start(&self) -> f64 {
        self.xs[0]
    }

    pub fn end(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn steps(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn mesh(&self) -> &[f64] {
        &self.xs
    }

    /// Fundamental matrix at `x`, re-stepping from the last accepted mesh point.
    pub fn fundamental_at(&self, x: f64) -> Matrix2<C64> {
        let x = x.clamp(self.start(), self.end());
        let k = self.xs.partition_point(|&xi| xi <= x).saturating_sub(1).min(self.xs.len() - 1);
        let dx = x - self.xs[k];
        if dx <= 0.0 {
            return self.phis[k];
        }
        magnus_step(self.sys, self.xs[k], dx) * self.phis[k]
    }

    pub fn state_at(&self, x: f64) -> Vector2<C64> {
        self.fundamental_at(x) * self.y0
    }

    pub fn final_fundamental(&self) -> Matrix2<C64> {
        *self.phis.last().unwrap()
    }

    pub fn final_state(&self) -> Vector2<C64> {
        self.final_fundamental() * self.y0
    }
}

/// Integrates y′ = A(x)y from `x0` to `x1 ≥ x0` with step-doubling error control.
pub fn ode_integrate<'a, S: LinearSystem + ?Sized>(
    sys: &'a S,
    x0: f64,
    y0: Vector2<C64>,
    x1: f64,
    tol: &Tolerances,
) -> Result<Trajectory<'a, S>, NumericsError> {
    assert!(x1 >= x0, "integration runs forward only");
    let stepper = Stepper { sys, tol: *tol };
    let mut xs = vec![x0];
    let mut phis = vec![Matrix2::identity()];
    let mut h = (x1 - x0).max(f64::MIN_POSITIVE);
    for seg in segments(sys, x0, x1).windows(2) {
        let (mut x, end) = (seg[0], seg[1]);
        h = h.min(end - x);
        while x < end {
            let (taken, prop, next) = stepper.step(x, end, h)?;
            let phi = prop * phis.last().unwrap();
            x = if end - x - taken <= 0.0 { end } else { x + taken };
            xs.push(x);
            phis.push(phi);
            h = next;
        }
        h = h.max((end - seg[0]) * 0.25);
    }
    Ok(Trajectory { sys, xs, phis, y0 })
}

/// Transfer matrix Φ(x1)Φ(x0)⁻¹ without storing the trajectory.
pub fn transfer<S: LinearSystem + ?Sized>(sys: &S, x0: f64, x1: f64, tol: &Tolerances) -> Result<Matrix2<C64>, NumericsError> {
    let stepper = Stepper { sys, tol: *tol };
    let mut phi = Matrix2::identity();
    let mut h = (x1 - x0).max(f64::MIN_POSITIVE);
    for seg in segments(sys, x0, x1).windows(2) {
        let (mut x, end) = (seg[0], seg[1]);
        h = h.min(end - x);
        while x < end {
            let (taken, prop, next) = stepper.step(x, end, h)?;
            phi = prop * phi;
            x = if end - x - taken <= 0.0 { end } else { x + taken };
            h = next;
        }
        h = h.max((end - seg[0]) * 0.25);
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Sl {
        lambda: f64,
    }

    impl LinearSystem for Sl {
        fn matrix(&self, x: f64) -> Matrix2<C64> {
            let r = if x < 0.0 { -1.0 } else { 1.0 };
            Matrix2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-self.lambda * r, 0.0), C64::new(0.0, 0.0))
        }
        fn breakpoints(&self) -> Vec<f64> {
            vec![0.0]
        }
    }

    struct Airy;
    impl LinearSystem for Airy {
        fn matrix(&self, x: f64) -> Matrix2<C64> {
            Matrix2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(x, 0.0), C64::new(0.0, 0.0))
        }
    }

    fn v(a: f64, b: f64) -> Vector2<C64> {
        Vector2::new(C64::new(a, 0.0), C64::new(b, 0.0))
    }

    #[test]
    fn constant_solution_at_zero() {
        let tol = Tolerances::default();
        let t = ode_integrate(&Sl { lambda: 0.0 }, -1.0, v(1.0, 0.0), 1.0, &tol).unwrap();
        for x in [-0.7, 0.0, 0.4, 1.0] {
            assert!((t.state_at(x) - v(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn linear_solution_at_zero() {
        let tol = Tolerances::default();
        let t = ode_integrate(&Sl { lambda: 0.0 }, -1.0, v(0.0, 1.0), 1.0, &tol).unwrap();
        assert!((t.final_state() - v(2.0, 1.0)).norm() < 1e-13);
        assert!((t.state_at(-0.25) - v(0.75, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn hyperbolic_cosine_on_left_half() {
        let tol = Tolerances::default();
        let t = ode_integrate(&Sl { lambda: 4.0 }, -1.0, v(1.0, 0.0), 1.0, &tol).unwrap();
        assert!((t.state_at(0.0)[0].re - 2f64.cosh()).abs() < 1e-10);
    }

    #[test]
    fn abel_identity_holds_along_trajectory() {
        let tol = Tolerances::default();
        let t = ode_integrate(&Airy, -1.0, v(1.0, 0.0), 1.0, &tol).unwrap();
        for k in 0..=20 {
            let x = -1.0 + 0.1 * k as f64;
            assert!((t.fundamental_at(x).determinant() - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_output_matches_tighter_integration() {
        let tol = Tolerances::default();
        let t = ode_integrate(&Airy, -1.0, v(1.0, 0.0), 1.0, &tol).unwrap();
        let tight = ode_integrate(&Airy, -1.0, v(1.0, 0.0), 1.0, &tol.scaled(0.5)).unwrap();
        for x in [-1.0, 0.33, 1.0] {
            let a = t.state_at(x);
            let b = tight.state_at(x);
            assert!((a - b).norm() <= 10.0 * tol.ode_rel * b.norm().max(1.0));
        }
        let direct = transfer(&Airy, -1.0, 1.0, &tol).unwrap();
        assert!((direct - t.final_fundamental()).norm() < 1e-9);
    }

    #[test]
    fn singular_coefficient_is_integrated() {
        struct Sing;
        impl LinearSystem for Sing {
            fn matrix(&self, x: f64) -> Matrix2<C64> {
                Matrix2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-x.abs().powf(-0.5), 0.0), C64::new(0.0, 0.0))
            }
            fn breakpoints(&self) -> Vec<f64> {
                vec![0.0]
            }
        }
        let tol = Tolerances::default();
        let t = ode_integrate(&Sing, -1.0, v(1.0, 0.0), 1.0, &tol).unwrap();
        assert!((t.final_fundamental().determinant() - C64::new(1.0, 0.0)).norm() < 1e-8);
    }
}
