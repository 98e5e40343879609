use std::sync::OnceLock;

use kreinspec_core::coefficients::Verdict;
use kreinspec_core::krein_space::{KreinSpace, SpaceElement};
use kreinspec_core::problem::ProblemSpec;
use kreinspec_core::riesz_diagnostics::*;
use kreinspec_core::w_construction::GluingCase;
use kreinspec_core::C64;
use nalgebra::{DVector, Matrix2, Vector2};
use proptest::prelude::*;

fn space() -> KreinSpace {
    diagnostic_space(&ProblemSpec::p0(), 256).unwrap()
}

/// Normalized node indicators: an orthonormal family in the majorant.
fn spikes(space: &KreinSpace, count: usize) -> Vec<SpaceElement> {
    let w = space.abs_weights();
    (0..count)
        .map(|k| {
            let mut f = DVector::zeros(space.dim());
            f[3 * k] = C64::new(1.0 / w[3 * k].sqrt(), 0.0);
            SpaceElement::new(f, Vector2::zeros())
        })
        .collect()
}

#[test]
fn orthonormal_family_has_identity_gram() {
    let s = space();
    let family = spikes(&s, 40);
    let g = gram_matrix(&s, &family).unwrap();
    assert!((g - nalgebra::DMatrix::identity(40, 40)).norm() < 1e-13);
    let report = riesz_ratio(&s, &family, &[10, 20, 40]).unwrap();
    for level in &report.levels {
        assert!((level.ratio - 1.0).abs() < 1e-12);
    }
    assert!((report.plateau - 1.0).abs() < 1e-12);
}

#[test]
fn single_and_duplicated_vectors() {
    let s = space();
    let one = spikes(&s, 1);
    let g = gram_matrix(&s, &one).unwrap();
    assert!((g[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
    let twice = vec![one[0].clone(), one[0].clone()];
    let report = riesz_ratio(&s, &twice, &[2]).unwrap();
    assert!(report.last().lambda_min.abs() < 1e-10);
    let mut family = spikes(&s, 20);
    family.push(family[0].clone());
    let report = riesz_ratio(&s, &family, &[10, 21]).unwrap();
    assert!(report.last().ratio > 1e10);
    assert!(!report.bounded());
}

#[test]
fn unnormalized_input_is_rejected() {
    let s = space();
    let x = spikes(&s, 2);
    let bad = vec![x[0].clone(), x[1].scale(C64::new(2.0, 0.0))];
    assert!(matches!(gram_matrix(&s, &bad), Err(RieszError::NotNormalized { index: 1, .. })));
}

#[test]
fn j_orthogonality_trivial_cases() {
    let s = space();
    let x = spikes(&s, 4);
    let single = [RootGroup { lambda: 1.0, vectors: x.clone() }];
    assert_eq!(j_orthogonality_report(&s, &single).unwrap(), 0.0);
    // a function on r < 0 and one on r > 0 carry no Krein pairing
    let n = s.dim();
    let w = s.abs_weights();
    let mut left = DVector::zeros(n);
    left[1] = C64::new(1.0 / w[1].sqrt(), 0.0);
    let mut right = DVector::zeros(n);
    right[n - 2] = C64::new(0.0, 1.0 / w[n - 2].sqrt());
    let pair = [
        RootGroup { lambda: -1.0, vectors: vec![SpaceElement::new(left, Vector2::zeros())] },
        RootGroup { lambda: 1.0, vectors: vec![SpaceElement::new(right, Vector2::zeros())] },
    ];
    assert!(j_orthogonality_report(&s, &pair).unwrap() < 1e-12);
}

#[test]
fn orthonormalize_drops_dependent_vectors() {
    let s = space();
    let x = spikes(&s, 2);
    let mixed = x[0].axpy(C64::new(0.5, 0.5), &x[1]);
    let out = orthonormalize(&s, &[x[0].clone(), mixed, x[1].clone()]).unwrap();
    assert_eq!(out.len(), 2);
    let g = gram_matrix(&s, &out).unwrap();
    assert!((g - nalgebra::DMatrix::identity(2, 2)).norm() < 1e-14);
}

#[test]
fn dispatcher() {
    let cases = [
        ("p0", Some(GluingCase::TwoMixed), Conclusion::RieszBasisGuaranteed),
        ("p0_amended", Some(GluingCase::TwoMixed), Conclusion::NoConclusion),
        ("p2", Some(GluingCase::TwoPositive), Conclusion::RieszBasisGuaranteed),
        ("p1", Some(GluingCase::OneMinus), Conclusion::RieszBasisGuaranteed),
    ];
    for (name, case, conclusion) in cases {
        let r = hypothesis_report(&ProblemSpec::builtin(name).unwrap()).unwrap();
        assert_eq!((r.case, r.conclusion), (case, conclusion), "{name}");
        let all = r.checks.iter().all(|c| c.verdict == Verdict::Satisfied);
        assert_eq!(all, conclusion == Conclusion::RieszBasisGuaranteed);
    }
    let p1 = hypothesis_report(&ProblemSpec::p1()).unwrap();
    assert_eq!(p1.k, 1);
    assert_eq!(p1.coupling.map(|c| c[1]), Some([0.0, 0.0]));
}

struct P0Roots {
    space: KreinSpace,
    groups: Vec<RootGroup>,
}

fn p0_roots() -> &'static P0Roots {
    static CELL: OnceLock<P0Roots> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = ProblemSpec::p0();
        let space = diagnostic_space(&p, DEFAULT_NODES).unwrap();
        let groups = leading_root_system(&p, &space, 40).unwrap();
        P0Roots { space, groups }
    })
}

#[test]
fn p0_root_vectors_are_bounded_and_j_orthogonal() {
    let r = p0_roots();
    let vectors = flatten(&r.groups);
    assert_eq!(vectors.len(), 40);
    let report = riesz_ratio(&r.space, &vectors, &section_sizes(40)).unwrap();
    assert_eq!(report.levels.iter().map(|l| l.n).collect::<Vec<_>>(), vec![10, 20, 40]);
    assert!(report.last().lambda_min >= LAMBDA_MIN_FLOOR, "{report:?}");
    assert!(report.plateau <= PLATEAU_LIMIT, "{report:?}");
    assert!(report.levels.iter().all(|l| l.ratio >= 1.0 && l.ratio.is_finite()));
    let first20 = r.groups.iter().take(20).cloned().collect::<Vec<_>>();
    assert!(j_orthogonality_report(&r.space, &first20).unwrap() < 1e-6);
    assert!(j_orthogonality_report(&r.space, &r.groups).unwrap() < 1e-6);
    let mut mods: Vec<f64> = r.groups.iter().map(|g| g.lambda.abs()).collect();
    let sorted = mods.clone();
    mods.sort_by(f64::total_cmp);
    assert_eq!(mods, sorted);
}

#[test]
fn diagnose_keeps_theorem_and_surrogate_apart() {
    let p = ProblemSpec::p0();
    let r = p0_roots();
    let d = diagnose(&p, &r.space, 20).unwrap();
    assert_eq!(d.hypotheses.conclusion, Conclusion::RieszBasisGuaranteed);
    assert_eq!(d.gram.last().n, 20);
    assert_eq!(d.empirically_bounded, d.gram.bounded());
    assert!(matches!(diagnose(&p, &r.space, 5), Err(RieszError::TooFewVectors { .. })));
}

#[test]
fn j_residual_does_not_outgrow_ode_tolerance() {
    let tight = ProblemSpec::p0();
    let mut loose = ProblemSpec::p0();
    loose.tolerances = loose.tolerances.scaled(10.0);
    let residual = |p: &ProblemSpec| {
        let s = diagnostic_space(p, 512).unwrap();
        j_orthogonality_report(&s, &leading_root_system(p, &s, 12).unwrap()).unwrap()
    };
    let (a, b) = (residual(&tight), residual(&loose));
    assert!(b <= 10.0 * a + 1e-12, "tight {a:e}, loose {b:e}");
}

fn unitary(theta: f64, phi: f64, psi: f64) -> Matrix2<C64> {
    let (c, s) = (theta.cos(), theta.sin());
    let e = |a: f64| C64::from_polar(1.0, a);
    Matrix2::new(e(phi) * c, e(psi) * s, -e(-psi) * s, e(-phi) * c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_ratio_is_unitarily_invariant(i in 0usize..39, theta in 0.0f64..6.3, phi in 0.0f64..6.3, psi in 0.0f64..6.3, phases in proptest::collection::vec(0.0f64..6.3, 40)) {
        let r = p0_roots();
        // treat the pair (i, i + 1) as one orthonormal two-dimensional root subspace
        let mut base = flatten(&r.groups);
        let pair = orthonormalize(&r.space, &base[i..i + 2]).unwrap();
        base[i] = pair[0].clone();
        base[i + 1] = pair[1].clone();
        let mut mixed: Vec<SpaceElement> = base.iter().zip(&phases).map(|(x, &a)| x.scale(C64::from_polar(1.0, a))).collect();
        let u = unitary(theta, phi, psi);
        let (x, y) = (mixed[i].clone(), mixed[i + 1].clone());
        mixed[i] = x.scale(u[(0, 0)]).axpy(u[(1, 0)], &y);
        mixed[i + 1] = x.scale(u[(0, 1)]).axpy(u[(1, 1)], &y);
        let sizes = [40];
        let a = riesz_ratio(&r.space, &base, &sizes).unwrap().last().ratio;
        let b = riesz_ratio(&r.space, &mixed, &sizes).unwrap().last().ratio;
        let rel = (a - b).abs() / a;
        prop_assert!(rel < 1e-8, "{} vs {}", a, b);
    }
}
