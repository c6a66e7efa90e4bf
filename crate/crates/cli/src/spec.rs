//! Problem spec files.
//!
//! ```json
//! {
//!   "family": { "tag": "L1Ball", "n": 40 },
//!   "phi": { "kind": "gaussian", "m": 5, "seed": 7 },
//!   "fit": { "kind": "squared_l2", "y_gen": { ... } },
//!   "reg_weight": 0.1,
//!   "solver": { "max_iters": 1000 }
//! }
//! ```

use std::fmt;
use std::path::Path;

use gaugekit::{build_family, DataFit, FamilySpec, Problem, SensingOperator, SolverConfig};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::generate::{synthesize, YGen};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub family: FamilySpec,
    pub phi: PhiSpec,
    pub fit: FitSpec,
    #[serde(default = "one")]
    pub reg_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOverrides>,
    /// Ground truth behind `y`, filled in when `y_gen` is resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_true: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    Dense { rows: Vec<Vec<f64>> },
    Gaussian { m: usize, seed: u64 },
    PointSamples { indices: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    SquaredL2,
    Equality,
    TruncatedQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub kind: FitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_gen: Option<YGen>,
    /// Only for the truncated quadratic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iters: Option<usize>,
    pub dual_gap_tol: Option<f64>,
    pub master_tol: Option<f64>,
    pub conic_radius: Option<f64>,
    pub prune_tol: Option<f64>,
    pub seed: Option<u64>,
}

impl SolverOverrides {
    pub fn config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            dual_gap_tol: self.dual_gap_tol.unwrap_or(d.dual_gap_tol),
            master_tol: self.master_tol.unwrap_or(d.master_tol),
            conic_radius: self.conic_radius.or(d.conic_radius),
            prune_tol: self.prune_tol.unwrap_or(d.prune_tol),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

/// Malformed or inconsistent spec, with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub path: String,
    pub message: String,
}

impl SpecError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SpecError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for SpecError {}

pub fn parse_spec(text: &str) -> Result<ProblemSpec, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ProblemSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        let msg = format!("{inner}");
        SpecError::new(e.path().to_string(), msg)
    })?;
    spec.check_shape()?;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<ProblemSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::new("", format!("{}: {e}", path.display())))?;
    let mut spec = parse_spec(&text)?;
    // image paths are relative to the spec file
    if let Some(gen) = spec.fit.y_gen.as_mut() {
        gen.rebase(path.parent().unwrap_or(Path::new(".")));
    }
    Ok(spec)
}

impl ProblemSpec {
    fn check_shape(&self) -> Result<(), SpecError> {
        if !(self.reg_weight > 0.0 && self.reg_weight.is_finite()) {
            return Err(SpecError::new("reg_weight", "must be positive and finite"));
        }
        match (&self.fit.y, &self.fit.y_gen) {
            (None, None) => return Err(SpecError::new("fit.y", "missing: give either `y` or `y_gen`")),
            (Some(y), _) if y.iter().any(|v| !v.is_finite()) => {
                return Err(SpecError::new("fit.y", "non-finite entry"));
            }
            _ => {}
        }
        match (self.fit.kind, self.fit.cap) {
            (FitKind::TruncatedQuadratic, None) => {
                return Err(SpecError::new("fit.cap", "missing: the truncated quadratic needs a cap"))
            }
            (FitKind::TruncatedQuadratic, Some(c)) if !(c > 0.0 && c.is_finite()) => {
                return Err(SpecError::new("fit.cap", "must be positive and finite"))
            }
            (FitKind::SquaredL2 | FitKind::Equality, Some(_)) => {
                return Err(SpecError::new("fit.cap", "only used by the truncated quadratic"))
            }
            _ => {}
        }
        if let PhiSpec::Dense { rows } = &self.phi {
            if rows.is_empty() {
                return Err(SpecError::new("phi.rows", "no rows"));
            }
            let n = rows[0].len();
            if let Some(i) = rows.iter().position(|r| r.len() != n) {
                return Err(SpecError::new(format!("phi.rows[{i}]"), format!("length differs from row 0 ({n})")));
            }
        }
        if let Some(s) = &self.solver {
            if let Err(e) = s.config().validate() {
                return Err(SpecError::new("solver", e.to_string()));
            }
        }
        Ok(())
    }

    /// Fills `fit.y` (and `u_true`) from `fit.y_gen` if needed.
    pub fn resolve(&mut self) -> Result<(), SpecError> {
        if self.fit.y.is_some() {
            return Ok(());
        }
        let gen = self.fit.y_gen.clone().expect("checked by check_shape");
        let gauge = build_family(&self.family).map_err(|e| SpecError::new("family", e.to_string()))?;
        let phi = self.operator(gauge.ambient_dim())?;
        let (u, y) = synthesize(&gen, &self.family, &gauge, &phi)?;
        self.fit.y = Some(y.iter().cloned().collect());
        self.u_true = Some(u.iter().cloned().collect());
        Ok(())
    }

    pub fn operator(&self, n: usize) -> Result<SensingOperator, SpecError> {
        let op = match &self.phi {
            PhiSpec::Dense { rows } => {
                if rows[0].len() != n {
                    return Err(SpecError::new(
                        "phi.rows",
                        format!("{} columns, but the family lives in dimension {n}", rows[0].len()),
                    ));
                }
                SensingOperator::from_rows(rows)
            }
            PhiSpec::Gaussian { m, seed } => SensingOperator::gaussian(*m, n, *seed),
            PhiSpec::PointSamples { indices } => SensingOperator::point_samples(indices, n),
        };
        op.map_err(|e| SpecError::new("phi", e.to_string()))
    }

    pub fn config(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default().config()
    }

    /// Builds the problem from a resolved spec.
    pub fn problem(&self) -> Result<Problem, SpecError> {
        let gauge = build_family(&self.family).map_err(|e| SpecError::new("family", e.to_string()))?;
        let phi = self.operator(gauge.ambient_dim())?;
        let y = self.fit.y.as_ref().ok_or_else(|| SpecError::new("fit.y", "unresolved"))?;
        if y.len() != phi.m() {
            return Err(SpecError::new("fit.y", format!("length {} but phi has {} rows", y.len(), phi.m())));
        }
        let y = DVector::from_column_slice(y);
        let fit = match self.fit.kind {
            FitKind::SquaredL2 => DataFit::SquaredL2 { y },
            FitKind::Equality => DataFit::EqualityIndicator { y },
            FitKind::TruncatedQuadratic => DataFit::truncated(y, self.fit.cap.unwrap_or(1.0))
                .map_err(|e| SpecError::new("fit.cap", e.to_string()))?,
        };
        Problem::new(gauge, phi, fit, self.reg_weight).map_err(|e| SpecError::new("", e.to_string()))
    }
}
