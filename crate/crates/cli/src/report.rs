//! `solve`: spec in, report, atom table and images out.

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use gaugekit::caratheodory::{certify_bound, Diagnostic, Pivot};
use gaugekit::{solve, solve_tiny_nonconvex, AtomKind, AtomLabel, AtomicRepresentation, FamilySpec, GridSpec};
use serde::{Deserialize, Serialize};

use crate::pgm::{Encoding, Gray};
use crate::spec::{PhiSpec, ProblemSpec};
use crate::{CliError, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub phi: Option<u64>,
    pub y_gen: Option<u64>,
    pub solver: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRow {
    pub label: String,
    pub kind: AtomKind,
    pub alpha: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_ms: f64,
    pub sparsify_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Resolved spec: `fit.y` is always present.
    pub spec: ProblemSpec,
    pub seeds: Seeds,
    pub objective: f64,
    pub dual_gap: f64,
    pub converged: bool,
    pub iterations: usize,
    pub t_star: f64,
    pub delta: u8,
    pub d: usize,
    pub m: usize,
    pub rays_only: bool,
    pub r_before: usize,
    pub r_after: usize,
    pub bound: i64,
    pub bound_met: bool,
    pub objective_after: f64,
    pub phi_residual: f64,
    pub atoms: Vec<AtomRow>,
    pub u_k: Vec<f64>,
    pub u: Vec<f64>,
    /// `|u - u_true| / max(1, |u_true|)` when the ground truth is known.
    pub recovery_error: Option<f64>,
    pub pivot_log: Vec<Pivot>,
    pub diagnostics: Vec<Diagnostic>,
    pub timings: Timings,
}

impl RunReport {
    /// `r_after <= m - d + δ` (minus one for ray-only tables), recomputed
    /// from the table rather than trusted.
    pub fn recheck_bound(&self) -> bool {
        let bound = self.m as i64 - self.d as i64 + i64::from(self.delta) - i64::from(self.rays_only);
        bound == self.bound && (self.atoms.len() as i64 <= bound) == self.bound_met
    }

    /// Same report with timings zeroed, for replay comparisons.
    pub fn without_timings(&self) -> RunReport {
        RunReport { timings: Timings { solve_ms: 0.0, sparsify_ms: 0.0 }, ..self.clone() }
    }
}

/// Solves a spec and certifies the bound. `spec` must be resolved.
pub fn run(spec: &ProblemSpec) -> Result<(RunReport, AtomicRepresentation), CliError> {
    let p = spec.problem().map_err(CliError::Spec)?;
    let cfg = spec.config();
    let t0 = Instant::now();
    let res = if p.fit.is_convex() { solve(&p, &cfg) } else { solve_tiny_nonconvex(&p, &GridSpec::default()) }
        .map_err(CliError::Solver)?;
    let solve_ms = t0.elapsed().as_secs_f64() * 1e3;
    let t1 = Instant::now();
    let (rep, sp) = certify_bound(&res, &p).map_err(CliError::Solver)?;
    let sparsify_ms = t1.elapsed().as_secs_f64() * 1e3;

    let u = rep.assemble().map_err(CliError::Solver)?;
    let recovery_error = spec.u_true.as_ref().map(|t| {
        let diff: f64 = t.iter().zip(u.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = t.iter().map(|a| a * a).sum::<f64>().sqrt();
        diff / norm.max(1.0)
    });
    let seeds = Seeds {
        phi: match spec.phi {
            PhiSpec::Gaussian { seed, .. } => Some(seed),
            _ => None,
        },
        y_gen: spec.fit.y_gen.as_ref().map(|g| g.seed),
        solver: cfg.seed,
    };
    let report = RunReport {
        spec: spec.clone(),
        seeds,
        objective: res.objective,
        dual_gap: res.dual_gap,
        converged: res.converged,
        iterations: res.iterations,
        t_star: res.t_star,
        delta: sp.delta,
        d: sp.d,
        m: p.m(),
        rays_only: sp.rays_only,
        r_before: sp.r_in,
        r_after: sp.r_out,
        bound: sp.bound,
        bound_met: sp.bound_met,
        objective_after: sp.objective_out,
        phi_residual: sp.phi_residual,
        atoms: rep
            .terms
            .iter()
            .map(|t| AtomRow { label: t.atom.label.to_string(), kind: t.atom.kind, alpha: t.alpha, cost: t.atom.cost })
            .collect(),
        u_k: rep.u_k.iter().cloned().collect(),
        u: u.iter().cloned().collect(),
        recovery_error,
        pivot_log: sp.pivot_log,
        diagnostics: sp.diagnostics,
        timings: Timings { solve_ms, sparsify_ms },
    };
    Ok((report, rep))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn atom_csv(report: &RunReport) -> String {
    let mut out = String::from("index,label,kind,alpha,cost\n");
    for (i, a) in report.atoms.iter().enumerate() {
        let kind = match a.kind {
            AtomKind::ExtremePoint => "extreme_point",
            AtomKind::RayDirection => "ray",
        };
        out.push_str(&format!("{i},{},{kind},{:e},{}\n", csv_field(&a.label), a.alpha, a.cost));
    }
    out
}

/// Writes through a temporary name so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// `report.json`, `atoms.csv`, and for pixel grids `u.pgm` plus one
/// `atom_NNN.pgm` mask per atom.
pub fn write_outputs(dir: &Path, report: &RunReport, rep: &AtomicRepresentation) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    write_atomic(&dir.join("report.json"), json.as_bytes())?;
    write_atomic(&dir.join("atoms.csv"), atom_csv(report).as_bytes())?;
    if let FamilySpec::TVGradient2D { h, w } = report.spec.family {
        let img = Gray::from_values(&report.u, w, h, 255);
        write_atomic(&dir.join("u.pgm"), &img.encode(Encoding::Raw))?;
        for (k, t) in rep.terms.iter().enumerate() {
            if let AtomLabel::Indicator { cells, .. } = &t.atom.label {
                let mut data = vec![0u16; h * w];
                for &c in cells {
                    data[c] = 1;
                }
                let mask = Gray { width: w, height: h, maxval: 1, data };
                write_atomic(&dir.join(format!("atom_{k:03}.pgm")), &mask.encode(Encoding::Plain))?;
            }
        }
    }
    Ok(())
}

/// Exit status for a finished run.
pub fn outcome(report: &RunReport) -> Outcome {
    if report.bound_met {
        Outcome::Success
    } else {
        Outcome::NumericFailure
    }
}
