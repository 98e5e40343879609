//! Spectral analysis of indefinite Sturm–Liouville problems in Krein spaces.

pub type C64 = num_complex::Complex64;

pub mod boundary_algebra;
pub mod coefficients;
pub mod krein_space;
pub mod numerics;
pub mod problem;
pub mod riesz_diagnostics;
pub mod spectral_solver;
pub mod w_construction;

pub use boundary_algebra::{BoundaryData, BoundaryError, Classification, DeltaInfo, Definiteness, FormCase, Mat24, ValidationReport};
pub use coefficients::{Coefficient, CoefficientError, ConditionKind, ConditionVerdict, MixedCase, Piece, Role, Verdict};
pub use krein_space::{KreinError, KreinSpace, SpaceElement};
pub use numerics::{Grid, GridSpec, NumericsError, Tolerances};
pub use problem::{ProblemError, ProblemSpec};
pub use riesz_diagnostics::{Conclusion, GramReport, HypothesisReport, RieszDiagnostics, RieszError};
pub use spectral_solver::{MultiplicityReport, RealRoot, RootChain, SpectralError};
pub use w_construction::{GluingCase, WError, WReport};
