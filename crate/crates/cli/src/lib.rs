//! Batch front end for `gaugekit`: problem specs in, reports out.

pub mod generate;
pub mod pgm;
pub mod report;
pub mod spec;
pub mod verify;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use gaugekit::Error;

pub use report::{run, RunReport};
pub use spec::{load_spec, parse_spec, ProblemSpec, SpecError};
pub use verify::{run_suite, Suite, Summary};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    /// Bound not met, verification failed, or the solver gave up.
    NumericFailure = 1,
    /// Bad arguments or an invalid spec.
    Usage = 2,
}

#[derive(Debug)]
pub enum CliError {
    Spec(SpecError),
    Solver(Error),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn outcome(&self) -> Outcome {
        match self {
            CliError::Spec(_) | CliError::Io(..) => Outcome::Usage,
            CliError::Solver(e) => match e {
                Error::CapActive { .. }
                | Error::NoProgress { .. }
                | Error::InfeasibleStep
                | Error::QuotientRankDeficiency { .. }
                | Error::UnboundedWithoutRays
                | Error::Infeasible => Outcome::NumericFailure,
                _ => Outcome::Usage,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Spec(e) => write!(f, "invalid spec: {e}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for CliError {}

/// `--seed` replaces the data-generation seed and regenerates `y`.
fn reseed(spec: &mut ProblemSpec, seed: Option<u64>) -> Result<(), CliError> {
    if let Some(seed) = seed {
        let Some(gen) = spec.fit.y_gen.as_mut() else {
            return Err(CliError::Spec(SpecError::new("fit.y_gen", "--seed needs a generated `y`")));
        };
        gen.seed = seed;
        spec.fit.y = None;
        spec.u_true = None;
    }
    spec.resolve().map_err(CliError::Spec)
}

pub fn cmd_solve(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<(RunReport, Outcome), CliError> {
    let mut spec = load_spec(spec_path).map_err(CliError::Spec)?;
    reseed(&mut spec, seed)?;
    let (report, rep) = run(&spec)?;
    report::write_outputs(out, &report, &rep).map_err(|e| CliError::Io(out.to_path_buf(), e))?;
    let outcome = report::outcome(&report);
    Ok((report, outcome))
}

/// Writes `count` resolved specs with consecutive data seeds.
pub fn cmd_generate(spec_path: &Path, out: &Path, seed: u64, count: u64) -> Result<Vec<PathBuf>, CliError> {
    let template = load_spec(spec_path).map_err(CliError::Spec)?;
    if template.fit.y_gen.is_none() {
        return Err(CliError::Spec(SpecError::new("fit.y_gen", "missing: nothing to generate")));
    }
    fs::create_dir_all(out).map_err(|e| CliError::Io(out.to_path_buf(), e))?;
    let mut written = Vec::new();
    for i in 0..count {
        let s = seed.wrapping_add(i);
        let mut spec = template.clone();
        reseed(&mut spec, Some(s))?;
        let path = out.join(format!("spec_{s}.json"));
        let text = serde_json::to_string_pretty(&spec).expect("specs serialize");
        report::write_atomic(&path, text.as_bytes()).map_err(|e| CliError::Io(path.clone(), e))?;
        written.push(path);
    }
    Ok(written)
}
