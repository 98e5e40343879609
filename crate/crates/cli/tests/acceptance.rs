//! Acceptance suite. Each criterion runs under a shared lock so its timing is
//! not polluted by the others, and writes one PASS/FAIL line to stderr
//! directly so the line shows even when test output is captured.

mod common;

use std::io::Write;
use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use common::{d_oracle, json, oracle_real_roots, run, run_threads};
use kreinspec_core::coefficients::{connection_witness, Coefficient, ConditionKind, EndPoint, MixedCase, Role, SmoothConnection};
use kreinspec_core::numerics::{Grid, GridSpec};
use kreinspec_core::riesz_diagnostics::{diagnose, diagnostic_space, hypothesis_report, Conclusion, DEFAULT_NODES};
use kreinspec_core::spectral_solver::{char_det, find_real_eigenvalues, lagrange_residual, multiplicity, TestFunction};
use kreinspec_core::w_construction::*;
use kreinspec_core::{ProblemSpec, C64};
use nalgebra::{DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Published algebraic multiplicity of λ = 0 for the model problem.
const PUBLISHED_ALGEBRAIC_MULTIPLICITY_AT_ZERO: usize = 2;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn criterion(number: usize, title: &str, limit: Option<Duration>, body: impl FnOnce() -> Verdict) {
    let _guard = serial();
    let start = Instant::now();
    let v = body();
    let elapsed = start.elapsed();
    let in_time = !limit.is_some_and(|l| elapsed >= l);
    let pass = v.pass && in_time;
    let limit_text = limit.map_or("no limit".to_string(), |l| format!("limit {:.0} s", l.as_secs_f64()));
    let line = format!(
        "acceptance criterion {number:>2} [{}] {title}: {} ({:.2} s, {limit_text})\n",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[test]
fn criterion_01_boundary_algebra() {
    criterion(1, "P0 delta and classification", Some(Duration::from_secs(1)), || {
        let r = run(&["classify", "example_p0"]);
        let v = json(&r);
        let expect = [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]];
        let mut err: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    err = err.max((v["delta"][i][j][k].as_f64().unwrap() - expect[i][j][k]).abs());
                }
            }
        }
        let pass = r.code == 0 && err <= 1e-12 && v["k"] == 2 && v["case"] == "c";
        Verdict { pass, detail: format!("|delta - [[0,1],[1,0]]| = {err:e}, k = {}, case {}", v["k"], v["case"]) }
    });
}

#[test]
fn criterion_02_boundary_clauses() {
    criterion(2, "boundary-data clause residuals and N = 0", Some(Duration::from_secs(1)), || {
        let mut worst: f64 = 0.0;
        let mut all_pass = true;
        for name in ["example_p0", "example_p1", "example_p2"] {
            let r = run(&["validate", name]);
            let v = json(&r);
            all_pass &= r.code == 0 && v["pass"] == true;
            for clause in v["clauses"].as_array().unwrap() {
                if ["neutrality_m", "neutrality_n", "self_adjointness"].contains(&clause["clause"].as_str().unwrap()) {
                    worst = worst.max(clause["residual"].as_f64().unwrap());
                }
            }
        }
        let p0 = ProblemSpec::p0();
        let zero_n = kreinspec_core::BoundaryData::new(p0.boundary.m, kreinspec_core::Mat24::zeros());
        let failures = zero_n.validate(1e-10).failures();
        let rejected = failures.contains(&kreinspec_core::boundary_algebra::DEFINITENESS);
        Verdict { pass: all_pass && worst < 1e-12 && rejected, detail: format!("largest residual {worst:e}; N = 0 fails {failures:?}") }
    });
}

#[test]
fn criterion_03_shooting_vs_closed_form() {
    criterion(3, "shooting determinant against the closed form", Some(Duration::from_secs(10)), || {
        let p = ProblemSpec::p0();
        let mut worst: f64 = 0.0;
        for k in 0..200 {
            let l = -50.0 + 100.0 * k as f64 / 199.0;
            let (d, _) = char_det(&p, c(l)).unwrap();
            let o = d_oracle(c(l));
            worst = worst.max((d - o).norm() / (1.0 + o.norm()));
        }
        Verdict { pass: worst <= 1e-8, detail: format!("max |D_shoot - D_oracle|/(1 + |D_oracle|) = {worst:e} on 200 points") }
    });
}

#[test]
fn criterion_04_spectrum_window() {
    criterion(4, "P0 eigenvalues in [-400, 400]", Some(Duration::from_secs(30)), || {
        let p = ProblemSpec::p0();
        let roots = find_real_eigenvalues(&p, -400.0, 400.0, 16.0).unwrap();
        let oracle = oracle_real_roots(-400.0, 400.0);
        let pos = roots.iter().filter(|r| r.lambda > 0.0).count();
        let neg = roots.iter().filter(|r| r.lambda < 0.0).count();
        let matched = roots.len() == oracle.len() && roots.iter().zip(&oracle).all(|(r, o)| (r.lambda - o).abs() < 1e-7);
        let worst = roots.iter().zip(&oracle).map(|(r, o)| (r.lambda - o).abs()).fold(0.0, f64::max);
        Verdict {
            pass: pos >= 10 && neg >= 10 && matched,
            detail: format!(
                "{pos} positive, {neg} negative (need 10 each); {} computed vs {} oracle roots, max deviation {worst:e}",
                roots.len(),
                oracle.len()
            ),
        }
    });
}

#[test]
fn criterion_05_multiplicity_at_zero() {
    criterion(5, "multiplicity of lambda = 0 for P0", Some(Duration::from_secs(5)), || {
        let p = ProblemSpec::p0();
        let grid = Grid::new(GridSpec::uniform(1.0 / 16.0, 12)).unwrap();
        let rep = multiplicity(&p, &grid, 0.0).unwrap();
        // order of the zero of the closed form: D(0) = 0 and D'(0) from central differences
        let h = 1e-4;
        let slope = ((d_oracle(c(h)) - d_oracle(c(-h))) / (2.0 * h)).norm();
        let oracle_order = if d_oracle(c(0.0)).norm() == 0.0 && slope > 1e-3 { 1 } else { 2 };
        let agree = rep.algebraic_order == rep.chain_length && rep.consistent;
        let published = PUBLISHED_ALGEBRAIC_MULTIPLICITY_AT_ZERO;
        let flag = if published == rep.algebraic_order { "AGREES" } else { "MISMATCH" };
        Verdict {
            pass: rep.geometric == 1 && agree && oracle_order == rep.algebraic_order,
            detail: format!(
                "geometric {}, order of zero {} (winding {:.6}), chain length {}, closed-form order {oracle_order}; published value {published}: {flag}",
                rep.geometric, rep.algebraic_order, rep.winding_raw, rep.chain_length
            ),
        }
    });
}

#[test]
fn criterion_06_lagrange_identity() {
    criterion(6, "Lagrange identity on random polynomial pairs", Some(Duration::from_secs(5)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let grid = Grid::new(GridSpec::uniform(1.0 / 16.0, 12)).unwrap();
        let mut worst: f64 = 0.0;
        for p in [ProblemSpec::p0(), ProblemSpec::p1()] {
            for _ in 0..100 {
                let mut poly = || (0..5).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect::<Vec<_>>();
                let (a, b) = (poly(), poly());
                let f = TestFunction::polynomial(&p, &grid, &a);
                let g = TestFunction::polynomial(&p, &grid, &b);
                worst = worst.max(lagrange_residual(&grid, &f, &g).norm());
            }
        }
        Verdict { pass: worst < 1e-8, detail: format!("max residual {worst:e} over 200 pairs") }
    });
}

#[test]
fn criterion_07_constants() {
    criterion(7, "positivity constants for P0 data", Some(Duration::from_secs(1)), || {
        let p = ProblemSpec::p0();
        let delta = p.boundary.compute_delta(1e-10).unwrap();
        let k = positivity_constants(&delta, &p);
        let consts_ok = (k.alpha - 0.2).abs() < 1e-14
            && (k.kappa - 0.8).abs() < 1e-14
            && (k.c - 1.0 / (10.0 * 2f64.sqrt())).abs() < 1e-14
            && k.gamma == 15.0 / 16.0
            && (k.psi_bound_sq() - 0.125).abs() < 1e-14;
        // ψ is built for one essential condition; P1 has the same weight and |Δ|
        let p1 = ProblemSpec::p1();
        let d1 = p1.boundary.compute_delta(1e-10).unwrap();
        let k1 = positivity_constants(&d1, &p1);
        let class = p1.boundary.classify(1e-10).unwrap();
        let wg = construction_grid(&p1, &[], &[-k1.gamma, k1.gamma], 512).unwrap();
        let psi = build_psi(&p1, &wg, &k1, &class, &d1).unwrap();
        let v = DVector::from_iterator(psi.psi.len(), psi.psi.iter().map(|&x| c(x)));
        let norm_sq = wg.inner(&v, &v).re;
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let mut identity: f64 = 0.0;
        for _ in 0..100 {
            let r_norm1 = rng.gen_range(0.05..20.0);
            let delta2 = rng.gen_range(0.05..20.0);
            let delta1 = delta2 * rng.gen_range(0.01..1.0);
            let eta = rng.gen_range(0.1..5.0);
            let (alpha, _, kappa) = constants_from(r_norm1, delta1, delta2, eta);
            identity = identity.max((1.0 - kappa - alpha / delta2).abs());
        }
        let pass = consts_ok && (norm_sq - 1.0 / 24.0).abs() < 1e-12 && norm_sq <= 0.125 && identity < 1e-14;
        Verdict {
            pass,
            detail: format!(
                "alpha {}, kappa {}, c {}, gamma {}, |psi|^2 {norm_sq} (bound {}), identity residual {identity:e}",
                k.alpha,
                k.kappa,
                k.c,
                k.gamma,
                k.psi_bound_sq()
            ),
        }
    });
}

#[test]
fn criterion_08_operator_certificates() {
    criterion(8, "k = 1 operator certificates on a 2000-node grid", Some(Duration::from_secs(60)), || {
        let report = verify_once(&ProblemSpec::p1(), DEFAULT_NODES.max(2048)).unwrap();
        let wanted = [
            "|K| <= kappa",
            "kernel symmetry",
            "(Kf)(0) = 0",
            "K boundary identity",
            "|Z| <= alpha/(2 delta2)",
            "min eig JW >= alpha/(2 delta2)",
            "form-domain coupling",
        ];
        let mut parts = Vec::new();
        let mut pass = report.nodes >= 2000;
        for name in wanted {
            match report.clauses.iter().find(|c| c.name == name) {
                Some(c) => {
                    pass &= c.pass;
                    parts.push(format!("{name}: {:.3e}/{:.3e}", c.value, c.bound));
                }
                None => {
                    pass = false;
                    parts.push(format!("{name}: missing"));
                }
            }
        }
        Verdict { pass, detail: format!("{} nodes; {}", report.nodes, parts.join("; ")) }
    });
}

fn sgn_connection(from: EndPoint, to: EndPoint, slopes: (f64, f64)) -> SmoothConnection {
    let p = Coefficient::constant(Role::P, 1.0);
    let r = Coefficient::sign_weight();
    connection_witness(&p, &r, from, to, slopes).unwrap().unwrap()
}

#[test]
fn criterion_09_boundary_action() {
    criterion(9, "boundary action of the gluing and off-diagonal traces", Some(Duration::from_secs(30)), || {
        let problem = ProblemSpec::p0();
        let w = Witnesses::compute(&problem, &[ConditionKind::AtMinus1, ConditionKind::AtPlus1, ConditionKind::Mixed]);
        let wg = construction_grid(&problem, &w.connections(), &[], 1024).unwrap();
        let tr = |k: ConditionKind, i: usize| {
            let conn = &w.get(k).unwrap().witnesses[i];
            build_transplantation(conn, &wg, Cutoff::for_connection(conn)).unwrap()
        };
        let case = w.get(ConditionKind::Mixed).unwrap().mixed_case.unwrap();
        let (minus, plus, s1, s2) = (tr(ConditionKind::AtMinus1, 0), tr(ConditionKind::AtPlus1, 0), tr(ConditionKind::Mixed, 0), tr(ConditionKind::Mixed, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let mut action: f64 = 0.0;
        for _ in 0..5 {
            let b = Matrix2::from_fn(|_, _| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
            let part = assemble_ws1(&wg, &minus, &plus, (case, &s1, &s2), b).unwrap();
            action = action.max(part.action.deviation);
        }
        use EndPoint::{MinusOne as M, PlusOne as P};
        let pairs = [
            (MixedCase::A, sgn_connection(M, P, (1.0, 1.0)), sgn_connection(M, P, (2.0, 1.0))),
            (MixedCase::B, sgn_connection(P, M, (1.0, 1.0)), sgn_connection(P, M, (2.0, 1.0))),
            (MixedCase::C, sgn_connection(M, P, (2.0, 1.0)), sgn_connection(P, M, (1.0, 1.0))),
        ];
        let conns: Vec<&SmoothConnection> = pairs.iter().flat_map(|(_, a, b)| [a, b]).collect();
        let mg = construction_grid(&problem, &conns, &[], 1024).unwrap();
        let smooth = |x: f64| C64::new((1.3 * x).cos() + 0.2 * x, x * x - 0.4);
        let f = mg.grid.sample(smooth);
        let at = |g: &DVector<C64>, p: EndPoint| mg.grid.trace(g.as_slice(), p.location(), p.side());
        let mut traces: f64 = 0.0;
        for (case, a, b) in &pairs {
            let t1 = build_transplantation(a, &mg, Cutoff::for_connection(a)).unwrap();
            let t2 = build_transplantation(b, &mg, Cutoff::for_connection(b)).unwrap();
            for _ in 0..3 {
                let (b12, b21) = (C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)), C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)));
                let off = build_offdiagonal_x(*case, &t1, &t2, b12, b21).unwrap();
                let d = [
                    (at(&off.x12.apply(&f), M) + b12 * smooth(1.0)).norm(),
                    at(&off.x12.adjoint(&mg).apply(&f), P).norm(),
                    (at(&off.x21.apply(&f), P) - b21 * smooth(-1.0)).norm(),
                    at(&off.x21.adjoint(&mg).apply(&f), M).norm(),
                ];
                traces = d.iter().fold(traces, |m, &x| m.max(x));
            }
        }
        Verdict {
            pass: action < 1e-6 && traces < 1e-6,
            detail: format!("max action deviation {action:e} over 5 random b (mixed case {case:?}); max trace defect {traces:e} over cases A, B, C"),
        }
    });
}

#[test]
fn criterion_10_dispatcher() {
    criterion(10, "hypothesis dispatcher", Some(Duration::from_secs(1)), || {
        let expect = [
            ("example_p0", Some(GluingCase::TwoMixed), Conclusion::RieszBasisGuaranteed),
            ("example_p0_amended", Some(GluingCase::TwoMixed), Conclusion::NoConclusion),
            ("example_p2", Some(GluingCase::TwoPositive), Conclusion::RieszBasisGuaranteed),
            ("example_p1", Some(GluingCase::OneMinus), Conclusion::RieszBasisGuaranteed),
        ];
        let mut pass = true;
        let mut parts = Vec::new();
        for (name, case, conclusion) in expect {
            let r = hypothesis_report(&ProblemSpec::builtin(name).unwrap()).unwrap();
            pass &= r.case == case && r.conclusion == conclusion;
            parts.push(format!("{name}: {} {:?}", r.case.map_or("none", |c| c.label()), r.conclusion));
        }
        Verdict { pass, detail: parts.join("; ") }
    });
}

#[test]
fn criterion_11_riesz_surrogate() {
    criterion(11, "Gram sections of 40 P0 root vectors", Some(Duration::from_secs(60)), || {
        let p = ProblemSpec::p0();
        let space = diagnostic_space(&p, DEFAULT_NODES).unwrap();
        let d = diagnose(&p, &space, 40).unwrap();
        let last = d.gram.last();
        let pass = last.n == 40 && last.lambda_min >= 1e-3 && d.gram.plateau <= 1.5 && d.j_orthogonality < 1e-6;
        Verdict {
            pass,
            detail: format!(
                "lambda_min(G_40) {:.4}, ratios {:?}, plateau {:.4}, J-orthogonality {:e}",
                last.lambda_min,
                d.gram.levels.iter().map(|l| (l.ratio * 100.0).round() / 100.0).collect::<Vec<_>>(),
                d.gram.plateau,
                d.j_orthogonality
            ),
        }
    });
}

fn read_dir_sorted(dir: &PathBuf) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_determinism() {
    criterion(12, "report output across thread counts", None, || {
        let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_determinism");
        let _ = std::fs::remove_dir_all(&base);
        let many = std::thread::available_parallelism().map_or(4, |n| n.get().max(4)).to_string();
        let mut pass = true;
        let mut parts = Vec::new();
        for problem in ["example_p0", "example_p1"] {
            let (d1, dn) = (base.join(format!("{problem}_1")), base.join(format!("{problem}_n")));
            let a = run_threads(&["report", problem, "--out", d1.to_str().unwrap()], Some("1"));
            let b = run_threads(&["report", problem, "--out", dn.to_str().unwrap()], Some(&many));
            let (fa, fb) = (read_dir_sorted(&d1), read_dir_sorted(&dn));
            let same = a == b && fa == fb && !fa.is_empty();
            pass &= same;
            parts.push(format!("{problem}: {} files, exit {}, {}", fa.len(), a.code, if same { "identical" } else { "DIFFERENT" }));
        }
        Verdict { pass, detail: format!("1 vs {many} threads; {}", parts.join("; ")) }
    });
}
