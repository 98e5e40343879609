//! Subcommand bodies. Each returns the stdout summary, the files for
//! `--out`, and whether every clause it certifies passed.

use kreinspec_core::boundary_algebra::DeltaInfo;
use kreinspec_core::coefficients::{check_condition, ConditionKind, Verdict};
use kreinspec_core::riesz_diagnostics::{self, diagnose, diagnostic_space};
use kreinspec_core::spectral_solver::{count_zeros_window, eigenfunctions, find_real_eigenvalues, jordan_chain, multiplicity, Rect, ZeroCount};
use kreinspec_core::w_construction::{self, verify_case, GluingCase};
use kreinspec_core::{ProblemSpec, C64};
use serde_json::{json, Value};

use crate::output::{num, to_value, tolerance_note, Artifact, Csv};
use crate::problem_file::{Loaded, BOUNDARY_TOL};

/// Largest J-orthogonality residual the `riesz` surrogate accepts.
pub const J_ORTHOGONALITY_TOL: f64 = 1e-6;
/// Contour points per rectangle side for the non-real zero count.
pub const CONTOUR_POINTS: usize = 64;
/// Lower edge of the non-real search rectangles, clear of the real axis.
pub const CONTOUR_GAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: Value,
    pub artifacts: Vec<Artifact>,
    pub pass: bool,
}

/// A computation that could not produce a result.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn new(kind: &'static str, e: impl std::fmt::Display) -> Self {
        Failure { kind, message: e.to_string() }
    }

    pub fn to_json(&self, command: &str, problem: &str) -> Value {
        json!({ "command": command, "problem": problem, "error": { "kind": self.kind, "message": self.message } })
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn note(problem: &ProblemSpec, what: &str) -> String {
    format!("kreinspec problem={} {what}; {}", problem.name, tolerance_note(&problem.tolerances))
}

fn flag(b: bool) -> String {
    b.to_string()
}

fn chain_nodes(loaded: &Loaded) -> usize {
    loaded.grid.map_or(riesz_diagnostics::DEFAULT_NODES, |g| g.nodes)
}

fn w_nodes(loaded: &Loaded) -> usize {
    loaded.grid.map_or(w_construction::DEFAULT_NODES, |g| g.nodes)
}

pub fn validate(loaded: &Loaded) -> Result<Outcome, Failure> {
    let p = &loaded.spec;
    let r = p.boundary.validate(BOUNDARY_TOL);
    let clauses = [
        ("nonsingularity", "smallest singular value of [M; N]", r.nonsingular),
        ("neutrality_m", "|MQM*|", r.m_neutral),
        ("neutrality_n", "|NQN*|", r.n_neutral),
        ("self_adjointness", "|iMQN* - (iMQN*)*|", r.self_adjoint),
        ("invertibility", "smallest singular value of iMQN*", r.invertible),
    ];
    let mut csv = Csv::new(note(p, &format!("boundary clauses; residuals dimensionless; clause tolerance {}", num(BOUNDARY_TOL))), vec!["clause", "residual", "pass"]);
    let mut list = Vec::new();
    for (name, measure, c) in clauses {
        csv.push(vec![name.into(), num(c.residual), flag(c.pass)]);
        list.push(json!({ "clause": name, "measure": measure, "residual": c.residual, "pass": c.pass }));
    }
    let summary = json!({ "problem": p.name, "clauses": list, "coefficients_valid": true, "tolerance": BOUNDARY_TOL, "pass": r.pass });
    Ok(Outcome { artifacts: vec![Artifact::json("validate.json", &summary), Artifact::csv("validate.csv", &csv)], summary, pass: r.pass })
}

fn delta_of(p: &ProblemSpec) -> Result<DeltaInfo, Failure> {
    p.boundary.compute_delta(p.tolerances.eig_tol).map_err(|e| Failure::new("boundary", e))
}

pub fn classify(loaded: &Loaded) -> Result<Outcome, Failure> {
    let p = &loaded.spec;
    let class = p.boundary.classify(p.tolerances.eig_tol).map_err(|e| Failure::new("boundary", e))?;
    let d = delta_of(p)?;
    let e = |i: usize, j: usize| pair(d.delta[(i, j)]);
    let candidates: Vec<&str> = GluingCase::candidates(&class, &d).iter().map(|c| c.label()).collect();
    let summary = json!({
        "problem": p.name,
        "k": class.k,
        "case": to_value(&class.case),
        "delta": [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]],
        "delta_eigenvalues": d.eigenvalues,
        "definiteness": to_value(&d.definiteness),
        "delta1": d.delta1,
        "delta2": d.delta2,
        "eta": d.eta,
        "coupling": class.coupling.map(|c| [pair(c.u), pair(c.v)]),
        "gluing_candidates": candidates,
    });
    Ok(Outcome { artifacts: vec![Artifact::json("classify.json", &summary)], summary, pass: true })
}

const KINDS: [(ConditionKind, &str); 4] = [
    (ConditionKind::At0, "at_0"),
    (ConditionKind::AtMinus1, "at_minus_1"),
    (ConditionKind::AtPlus1, "at_plus_1"),
    (ConditionKind::Mixed, "mixed"),
];

pub fn conditions(loaded: &Loaded) -> Result<Outcome, Failure> {
    let p = &loaded.spec;
    let mut csv = Csv::new(note(p, "smooth-connection conditions; margins dimensionless"), vec!["condition", "verdict", "mixed_case", "margin", "justification"]);
    let mut list = Vec::new();
    for (kind, name) in KINDS {
        let v = check_condition(&p.p, &p.r, kind);
        let (verdict, why) = match &v.verdict {
            Verdict::Satisfied => ("satisfied", String::new()),
            Verdict::Violated { justification } => ("violated", justification.replace(',', ";")),
            Verdict::Unknown => ("unknown", String::new()),
        };
        let case = v.mixed_case.map(|c| format!("{c:?}")).unwrap_or_default();
        csv.push(vec![name.into(), verdict.into(), case, v.margin.map(num).unwrap_or_default(), why]);
        list.push(json!({ "condition": name, "result": to_value(&v) }));
    }
    let summary = json!({ "problem": p.name, "conditions": list });
    Ok(Outcome { artifacts: vec![Artifact::json("conditions.json", &summary), Artifact::csv("conditions.csv", &csv)], summary, pass: true })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumArgs {
    pub lmin: f64,
    pub lmax: f64,
    /// Height of the rectangles searched for non-real zeros.
    pub complex_window: Option<f64>,
    /// Scan points per unit of sgn(λ)√|λ|.
    pub density: f64,
}

fn zero_count(p: &ProblemSpec, rect: Rect) -> Result<ZeroCount, Failure> {
    count_zeros_window(p, rect, CONTOUR_POINTS).map_err(|e| Failure::new("spectral", e))
}

pub fn spectrum(loaded: &Loaded, args: SpectrumArgs) -> Result<Outcome, Failure> {
    let p = &loaded.spec;
    let roots = find_real_eigenvalues(p, args.lmin, args.lmax, args.density).map_err(|e| Failure::new("spectral", e))?;
    let mut csv = Csv::new(
        note(p, &format!("real eigenvalues in [{}, {}]; lambda dimensionless; |D| and D' in determinant units", num(args.lmin), num(args.lmax))),
        vec!["index", "lambda", "abs_D", "D_prime", "certified", "even_order"],
    );
    for (i, r) in roots.iter().enumerate() {
        csv.push(vec![i.to_string(), num(r.lambda), num(r.d_abs), num(r.d_prime), flag(r.certified), flag(r.even_order)]);
    }
    let complex = match args.complex_window {
        Some(h) if !(h > CONTOUR_GAP) => return Err(Failure::new("usage", format!("complex window height {h} must exceed {CONTOUR_GAP}"))),
        Some(h) => {
            let upper = Rect { re: [args.lmin, args.lmax], im: [CONTOUR_GAP, h] };
            let lower = Rect { re: [args.lmin, args.lmax], im: [-h, -CONTOUR_GAP] };
            let (u, l) = (zero_count(p, upper)?, zero_count(p, lower)?);
            json!({ "upper": { "rect": to_value(&upper), "count": u.count, "winding": u.raw }, "lower": { "rect": to_value(&lower), "count": l.count, "winding": l.raw } })
        }
        None => Value::Null,
    };
    let pass = roots.iter().all(|r| r.certified);
    let summary = json!({
        "problem": p.name,
        "window": [args.lmin, args.lmax],
        "density": args.density,
        "count": roots.len(),
        "positive": roots.iter().filter(|r| r.lambda > 0.0).count(),
        "negative": roots.iter().filter(|r| r.lambda < 0.0).count(),
        "roots": to_value(&roots),
        "non_real": complex,
        "pass": pass,
    });
    Ok(Outcome { artifacts: vec![Artifact::json("spectrum.json", &summary), Artifact::csv("spectrum.csv", &csv)], summary, pass })
}

pub fn chain(loaded: &Loaded, lambda: f64) -> Result<Outcome, Failure> {
    let p = &loaded.spec;
    let space = diagnostic_space(p, chain_nodes(loaded)).map_err(|e| Failure::new("numerics", e))?;
    let grid = space.grid();
    let rep = multiplicity(p, grid, lambda).map_err(|e| Failure::new("spectral", e))?;
    if rep.geometric == 0 {
        return Err(Failure::new("not_an_eigenvalue", format!("C(λ) has full rank at λ = {lambda}; singular values {:?}", rep.singular_values)));
    }
    let ef = eigenfunctions(p, grid, lambda).map_err(|e| Failure::new("spectral", e))?;
    let chain = jordan_chain(p, grid, lambda, &ef[0], rep.algebraic_order + 1).map_err(|e| Failure::new("spectral", e))?;
    let columns: Vec<&'static str> = ["x", "f0_re", "f0_im", "f1_re", "f1_im", "f2_re", "f2_im", "f3_re", "f3_im"].into_iter().take(1 + 2 * chain.len().min(4)).collect();
    let mut csv = Csv::new(note(p, &format!("root chain at lambda={}; x on [-1, 1]; functions normalized to max |f0| = 1", num(lambda))), columns);
    for (i, &x) in grid.nodes().iter().enumerate() {
        let mut row = vec![num(x)];
        for f in chain.functions.iter().take(4) {
            row.push(num(f[i].re));
            row.push(num(f[i].im));
        }
        csv.push(row);
    }
    let summary = json!({
        "problem": p.name,
        "lambda": lambda,
        "nodes": grid.len(),
        "multiplicity": to_value(&rep),
        "chain_length": chain.len(),
        "chain_residuals": chain.residuals,
        "pass": rep.consistent,
    });
    Ok(Outcome { artifacts: vec![Artifact::json("chain.json", &summary), Artifact::csv("chain.csv", &csv)], summary, pass: rep.consistent })
}

pub fn riesz(loaded: &Loaded, nmax: usize) -> Result<Outcome, Failure> {
    let p = &loaded.spec;
    let space = diagnostic_space(p, chain_nodes(loaded)).map_err(|e| Failure::new("numerics", e))?;
    let d = diagnose(p, &space, nmax).map_err(|e| Failure::new("riesz", e))?;
    let mut csv = Csv::new(
        note(p, &format!("Gram sections of normalized root vectors; eigenvalues dimensionless; plateau limit {} and lambda_min floor {} are conventions", num(d.thresholds.plateau), num(d.thresholds.lambda_min))),
        vec!["n", "lambda_min", "lambda_max", "ratio"],
    );
    for l in &d.gram.levels {
        csv.push(vec![l.n.to_string(), num(l.lambda_min), num(l.lambda_max), num(l.ratio)]);
    }
    let pass = d.empirically_bounded && d.j_orthogonality < J_ORTHOGONALITY_TOL;
    let mut summary = to_value(&d);
    summary["problem"] = json!(p.name);
    summary["nodes"] = json!(space.dim());
    summary["j_orthogonality_tolerance"] = json!(J_ORTHOGONALITY_TOL);
    summary["pass"] = json!(pass);
    Ok(Outcome { artifacts: vec![Artifact::json("riesz.json", &summary), Artifact::csv("riesz.csv", &csv)], summary, pass })
}

pub fn wverify(loaded: &Loaded, case: Option<GluingCase>) -> Result<Outcome, Failure> {
    let p = &loaded.spec;
    let report = verify_case(p, w_nodes(loaded), case).map_err(|e| Failure::new("certification", e))?;
    let mut csv = Csv::new(note(p, &format!("certified clauses on {} nodes; values and bounds dimensionless", report.nodes)), vec!["clause", "value", "bound", "pass"]);
    for c in &report.clauses {
        csv.push(vec![c.name.replace(',', ";"), num(c.value), num(c.bound), flag(c.pass)]);
    }
    let summary = to_value(&report);
    Ok(Outcome { artifacts: vec![Artifact::json("wverify.json", &summary), Artifact::csv("wverify.csv", &csv)], summary, pass: report.pass })
}

/// Defaults used by `report`.
pub const REPORT_WINDOW: [f64; 2] = [-100.0, 100.0];
pub const REPORT_COMPLEX_HEIGHT: f64 = 10.0;
pub const REPORT_DENSITY: f64 = 16.0;
pub const REPORT_NMAX: usize = 20;

/// Runs every stage; a failing stage is recorded and the rest still run.
pub fn report(loaded: &Loaded) -> Outcome {
    let p = &loaded.spec;
    let mut artifacts = Vec::new();
    let mut stages = serde_json::Map::new();
    let mut pass = true;
    let mut record = |name: &str, result: Result<Outcome, Failure>| -> Option<Value> {
        match result {
            Ok(o) => {
                pass &= o.pass;
                artifacts.extend(o.artifacts);
                stages.insert(name.into(), json!({ "pass": o.pass, "summary": o.summary.clone() }));
                Some(o.summary)
            }
            Err(f) => {
                pass = false;
                stages.insert(name.into(), json!({ "pass": false, "error": { "kind": f.kind, "message": f.message } }));
                None
            }
        }
    };
    record("validate", validate(loaded));
    record("classify", classify(loaded));
    record("conditions", conditions(loaded));
    let args = SpectrumArgs { lmin: REPORT_WINDOW[0], lmax: REPORT_WINDOW[1], complex_window: Some(REPORT_COMPLEX_HEIGHT), density: REPORT_DENSITY };
    let spec = record("spectrum", spectrum(loaded, args));
    let smallest = spec.and_then(|s| {
        s["roots"].as_array().and_then(|roots| {
            roots.iter().filter_map(|r| r["lambda"].as_f64()).min_by(|a, b| a.abs().total_cmp(&b.abs()))
        })
    });
    match smallest {
        Some(l) => {
            record("chain", chain(loaded, l));
        }
        None => {
            record("chain", Err(Failure::new("not_an_eigenvalue", "no real eigenvalue in the report window")));
        }
    }
    record("riesz", riesz(loaded, REPORT_NMAX));
    record("wverify", wverify(loaded, None));
    let summary = json!({ "problem": p.name, "stages": Value::Object(stages), "pass": pass });
    artifacts.push(Artifact::json("report.json", &summary));
    Outcome { summary, artifacts, pass }
}
