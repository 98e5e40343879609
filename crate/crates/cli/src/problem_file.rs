//! The JSON problem-file format and its canonical form.

use std::path::Path;

use kreinspec_core::boundary_algebra::{BoundaryData, Mat24};
use kreinspec_core::coefficients::{Coefficient, CoefficientError, Piece, Role};
use kreinspec_core::{ProblemError, ProblemSpec, Tolerances, C64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the boundary-data clauses.
pub const BOUNDARY_TOL: f64 = 1e-10;

const SHIPPED: [(&str, &str); 4] = [
    ("example_p0", include_str!("../../../problems/example_p0.json")),
    ("example_p1", include_str!("../../../problems/example_p1.json")),
    ("example_p2", include_str!("../../../problems/example_p2.json")),
    ("example_p0_amended", include_str!("../../../problems/example_p0_amended.json")),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InputError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{source_name}:{line}:{column}: {message}")]
    Syntax { source_name: String, line: usize, column: usize, message: String },
    #[error("{source_name}: invalid {location}: {clause}")]
    Invariant { source_name: String, location: String, clause: String },
    #[error("no problem file or shipped example named {0}")]
    Unknown(String),
}

impl InputError {
    pub fn kind(&self) -> &'static str {
        match self {
            InputError::Read { .. } => "read",
            InputError::Syntax { .. } => "syntax",
            InputError::Invariant { .. } => "invariant",
            InputError::Unknown(_) => "unknown_problem",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Target node count for the discretized operators.
    pub nodes: usize,
}

/// `[re, im]` entries, two rows of four.
pub type ComplexRows = [[[f64; 2]; 4]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    pub p: Descriptor,
    pub q: Descriptor,
    pub r: Descriptor,
    #[serde(rename = "M")]
    pub m: ComplexRows,
    #[serde(rename = "N")]
    pub n: ComplexRows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

/// A validated problem with the optional grid request from its file.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub spec: ProblemSpec,
    pub grid: Option<GridConfig>,
}

fn to_mat(rows: &ComplexRows) -> Mat24 {
    Mat24::from_fn(|i, j| C64::new(rows[i][j][0], rows[i][j][1]))
}

fn from_mat(m: &Mat24) -> ComplexRows {
    let mut out = [[[0.0; 2]; 4]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, z) in row.iter_mut().enumerate() {
            *z = [m[(i, j)].re, m[(i, j)].im];
        }
    }
    out
}

impl ProblemFile {
    pub fn from_spec(spec: &ProblemSpec, grid: Option<GridConfig>) -> Self {
        let d = |c: &Coefficient| Descriptor { pieces: c.pieces.clone() };
        ProblemFile {
            name: spec.name.clone(),
            p: d(&spec.p),
            q: d(&spec.q),
            r: d(&spec.r),
            m: from_mat(&spec.boundary.m),
            n: from_mat(&spec.boundary.n),
            tolerances: Some(spec.tolerances),
            grid,
        }
    }

    /// Checks every invariant and builds the problem.
    pub fn into_loaded(self, source_name: &str) -> Result<Loaded, InputError> {
        let invariant = |location: &str, clause: String| InputError::Invariant { source_name: source_name.into(), location: location.into(), clause };
        let mut coefficients = Vec::with_capacity(3);
        for (key, role, d) in [("p", Role::P, self.p), ("q", Role::Q, self.q), ("r", Role::R, self.r)] {
            let c = Coefficient::new(role, d.pieces).map_err(|e| match e {
                CoefficientError::InvalidDescriptor { reason, .. } => invariant(key, reason),
                other => invariant(key, other.to_string()),
            })?;
            coefficients.push(c);
        }
        let tolerances = self.tolerances.unwrap_or_default();
        tolerances.validate().map_err(|e| invariant("tolerances", e.to_string()))?;
        if let Some(g) = self.grid {
            if g.nodes < 64 {
                return Err(invariant("grid", format!("nodes = {} is below the minimum of 64", g.nodes)));
            }
        }
        let boundary = BoundaryData::new(to_mat(&self.m), to_mat(&self.n));
        let failures = boundary.validate(BOUNDARY_TOL).failures();
        if !failures.is_empty() {
            return Err(invariant("M, N", failures.join("; ")));
        }
        let [p, q, r]: [Coefficient; 3] = coefficients.try_into().expect("three coefficients");
        let spec = ProblemSpec::new(self.name, p, q, r, boundary, tolerances).map_err(|e| match e {
            ProblemError::Boundary(b) => invariant("M, N", b.to_string()),
            other => invariant("problem", other.to_string()),
        })?;
        Ok(Loaded { spec, grid: self.grid })
    }
}

pub fn parse_problem_str(text: &str, source_name: &str) -> Result<Loaded, InputError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| InputError::Syntax {
        source_name: source_name.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_loaded(source_name)
}

pub fn parse_problem_file(path: &Path) -> Result<Loaded, InputError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| InputError::Read { path: name.clone(), message: e.to_string() })?;
    parse_problem_str(&text, &name)
}

/// Text of a shipped example, by name with or without the `example_` prefix.
pub fn shipped(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name || n.strip_prefix("example_") == Some(name)).map(|(_, t)| *t)
}

pub fn shipped_names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

/// A path to a problem file, or the name of a shipped example.
pub fn resolve(arg: &str) -> Result<Loaded, InputError> {
    let path = Path::new(arg);
    if path.is_file() {
        return parse_problem_file(path);
    }
    match shipped(arg) {
        Some(text) => parse_problem_str(text, arg),
        None => Err(InputError::Unknown(arg.into())),
    }
}

/// Canonical text: pretty JSON with shortest round-trip floats and a trailing newline.
pub fn canonical(loaded: &Loaded) -> String {
    let file = ProblemFile::from_spec(&loaded.spec, loaded.grid);
    let mut s = serde_json::to_string_pretty(&file).expect("problem files serialize");
    s.push('\n');
    s
}
