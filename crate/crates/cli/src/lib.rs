//! Command-line front end: problem files, subcommands and report files.

pub mod commands;
pub mod output;
pub mod problem_file;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use kreinspec_core::w_construction::GluingCase;

use commands::{Failure, Outcome, SpectrumArgs};
use output::{json_text, write_atomic, Artifact};
use problem_file::{canonical, resolve};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "KREINSPEC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kreinspec", version, about = "Spectral analysis of indefinite Sturm-Liouville problems with eigenparameter-dependent boundary conditions")]
pub struct Cli {
    /// Directory for JSON and CSV output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the boundary-data clauses and coefficient invariants.
    Validate { problem: String },
    /// Number of essential conditions, form-domain case and Δ.
    Classify { problem: String },
    /// Smooth-connection conditions at 0, −1, 1 and between the ends.
    Conditions { problem: String },
    /// Real eigenvalues in a window, optionally counting non-real zeros.
    Spectrum {
        problem: String,
        #[arg(long, allow_hyphen_values = true)]
        lmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        lmax: f64,
        /// Height H of the rectangles [lmin, lmax] × ±[0.5, H] searched for non-real zeros.
        #[arg(long)]
        complex_window: Option<f64>,
        /// Scan points per unit of sgn(λ)√|λ|.
        #[arg(long, default_value_t = 16.0)]
        density: f64,
    },
    /// Multiplicities and the root chain at an eigenvalue.
    Chain {
        problem: String,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
    },
    /// Riesz-basis hypotheses and Gram-matrix diagnostics.
    Riesz {
        problem: String,
        #[arg(long, default_value_t = 40)]
        nmax: usize,
    },
    /// Build and certify the positive homeomorphism W.
    Wverify {
        problem: String,
        /// Gluing case label, e.g. k2-mixed or k1-left.
        #[arg(long, value_parser = parse_case)]
        case: Option<GluingCase>,
    },
    /// Every stage above with default settings.
    Report { problem: String },
    /// Print the canonical form of a problem file.
    Canonical { problem: String },
}

fn parse_case(s: &str) -> Result<GluingCase, String> {
    GluingCase::from_label(s).ok_or_else(|| {
        let labels: Vec<&str> = GluingCase::ALL.iter().map(|c| c.label()).collect();
        format!("unknown case {s}; expected one of {}", labels.join(", "))
    })
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Classify { .. } => "classify",
            Command::Conditions { .. } => "conditions",
            Command::Spectrum { .. } => "spectrum",
            Command::Chain { .. } => "chain",
            Command::Riesz { .. } => "riesz",
            Command::Wverify { .. } => "wverify",
            Command::Report { .. } => "report",
            Command::Canonical { .. } => "canonical",
        }
    }

    pub fn problem(&self) -> &str {
        match self {
            Command::Validate { problem }
            | Command::Classify { problem }
            | Command::Conditions { problem }
            | Command::Spectrum { problem, .. }
            | Command::Chain { problem, .. }
            | Command::Riesz { problem, .. }
            | Command::Wverify { problem, .. }
            | Command::Report { problem }
            | Command::Canonical { problem } => problem,
        }
    }

    fn usage_check(&self) -> Result<(), String> {
        match *self {
            Command::Spectrum { lmin, lmax, complex_window, density, .. } => {
                if !(lmin.is_finite() && lmax.is_finite() && lmin < lmax) {
                    return Err(format!("--lmin {lmin} must be below --lmax {lmax}"));
                }
                if !(density > 0.0 && density.is_finite()) {
                    return Err(format!("--density {density} must be positive"));
                }
                match complex_window {
                    Some(h) if !(h > commands::CONTOUR_GAP && h.is_finite()) => Err(format!("--complex-window {h} must exceed {}", commands::CONTOUR_GAP)),
                    _ => Ok(()),
                }
            }
            Command::Chain { lambda, .. } if !lambda.is_finite() => Err("--lambda must be finite".into()),
            Command::Riesz { nmax, .. } if nmax < 10 => Err(format!("--nmax {nmax} must be at least 10")),
            _ => Ok(()),
        }
    }
}

/// Thread cap from `KREINSPEC_THREADS`; `None` leaves the default.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, String> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_VAR}={s} is not a positive integer")),
        },
    }
}

/// What a run printed and wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn failure(command: &Command, f: &Failure) -> (String, Vec<Artifact>) {
    let v = f.to_json(command.name(), command.problem());
    (json_text(&v), vec![Artifact::json("error.json", &v)])
}

fn execute(cli: &Cli) -> (i32, String, Vec<Artifact>) {
    let command = &cli.command;
    let loaded = match resolve(command.problem()) {
        Ok(l) => l,
        Err(e) => {
            let f = Failure { kind: e.kind(), message: e.to_string() };
            let (text, files) = failure(command, &f);
            return (EXIT_FAILURE, text, files);
        }
    };
    let result: Result<Outcome, Failure> = match command {
        Command::Canonical { .. } => return (EXIT_OK, canonical(&loaded), Vec::new()),
        Command::Validate { .. } => commands::validate(&loaded),
        Command::Classify { .. } => commands::classify(&loaded),
        Command::Conditions { .. } => commands::conditions(&loaded),
        Command::Spectrum { lmin, lmax, complex_window, density, .. } => {
            commands::spectrum(&loaded, SpectrumArgs { lmin: *lmin, lmax: *lmax, complex_window: *complex_window, density: *density })
        }
        Command::Chain { lambda, .. } => commands::chain(&loaded, *lambda),
        Command::Riesz { nmax, .. } => commands::riesz(&loaded, *nmax),
        Command::Wverify { case, .. } => commands::wverify(&loaded, *case),
        Command::Report { .. } => Ok(commands::report(&loaded)),
    };
    match result {
        Ok(o) => (if o.pass { EXIT_OK } else { EXIT_FAILURE }, json_text(&o.summary), o.artifacts),
        Err(f) => {
            let (text, files) = failure(command, &f);
            (EXIT_FAILURE, text, files)
        }
    }
}

/// Parses `args`, runs the command under the thread cap `threads`, and writes
/// any files to `--out`.
pub fn run_with<I, T>(args: I, threads: Option<&str>) -> RunResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let usage = |stderr: String| RunResult { code: EXIT_USAGE, stdout: String::new(), stderr };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK { RunResult { code, stdout: text, stderr: String::new() } } else { usage(text) };
        }
    };
    if let Err(msg) = cli.command.usage_check() {
        return usage(format!("error: {msg}\n"));
    }
    let cap = match thread_cap(threads) {
        Ok(c) => c,
        Err(msg) => return usage(format!("error: {msg}\n")),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cap.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return RunResult { code: EXIT_FAILURE, stdout: String::new(), stderr: format!("error: thread pool: {e}\n") },
    };
    let (code, stdout, files) = pool.install(|| execute(&cli));
    let mut stderr = String::new();
    if let Some(dir) = &cli.out {
        for f in &files {
            if let Err(e) = write_atomic(dir, f) {
                stderr.push_str(&format!("error: writing {}: {e}\n", dir.join(&f.name).display()));
                return RunResult { code: EXIT_FAILURE, stdout, stderr };
            }
        }
    }
    RunResult { code, stdout, stderr }
}

/// Entry point for the binary.
pub fn main_with_env() -> i32 {
    let threads = std::env::var(THREADS_VAR).ok();
    let r = run_with(std::env::args_os(), threads.as_deref());
    print!("{}", r.stdout);
    eprint!("{}", r.stderr);
    let _ = std::io::stdout().flush();
    r.code
}
