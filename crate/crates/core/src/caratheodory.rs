//! Carathéodory-style reduction of an atomic representation.
//!
//! Phase A moves `α` along kernel vectors of the stacked matrix
//! `[QΦψ_k; cost_k]`, which keeps `QΦu` and `Σ α_k cost_k` fixed, until the
//! columns are independent (at most `m - d + 1` atoms). Phase B, for inputs
//! known to be optimal, drops the cost row and walks along kernel vectors of
//! `QΦψ_k` that do not increase the cost, reaching `m - d + δ` (or
//! `m - 1 - d + δ` when only rays survive). The lineality component is
//! re-solved after every pivot so that `Φu` is restored exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{compute_delta, evaluate_objective, AtomLabel, AtomicRepresentation, Problem, Signal, Term};
use crate::solver::{Reduced, SolveResult};

/// Allowed objective increase in Phase B and the threshold for reporting a
/// strictly improving step.
pub const OBJ_TOL: f64 = 1e-8;
/// Relative rank tolerance for kernel vectors.
pub const KERNEL_RTOL: f64 = 1e-10;
/// Relative dual gap below which [`certify_bound`] treats the input as
/// optimal.
pub const CERTIFY_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    pub phase: Phase,
    pub gamma: Vec<f64>,
    pub step: f64,
    pub removed: Vec<AtomLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// A Phase B step lowered `Σ α cost` by more than [`OBJ_TOL`]; the input
    /// was not optimal.
    SuboptimalInput { decrease: f64 },
    /// The objective went up by more than [`OBJ_TOL`] after Phase B.
    ObjectiveIncrease { increase: f64 },
    /// Phase B found a kernel direction with strictly negative cost and no
    /// blocking atom.
    UnboundedDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsifyReport {
    pub r_in: usize,
    pub r_out: usize,
    pub bound: i64,
    pub bound_met: bool,
    pub d: usize,
    pub delta: u8,
    /// Every surviving atom is a ray, so the ray bound applies.
    pub rays_only: bool,
    pub phi_residual: f64,
    pub cost_change: f64,
    pub objective_in: f64,
    pub objective_out: f64,
    pub pivot_log: Vec<Pivot>,
    pub diagnostics: Vec<Diagnostic>,
}

impl SparsifyReport {
    pub fn objective_change(&self) -> f64 {
        if self.objective_in.is_infinite() && self.objective_out.is_infinite() {
            return 0.0;
        }
        self.objective_out - self.objective_in
    }
}

/// `m - d + δ`, or `m - 1 - d + δ` for ray-only representations.
pub fn theorem_bound(m: usize, d: usize, delta: u8, rays_only: bool) -> i64 {
    m as i64 - d as i64 + i64::from(delta) - i64::from(rays_only)
}

struct Work<'a> {
    p: &'a Problem,
    red: Reduced,
    terms: Vec<Term>,
    cols: Vec<DVector<f64>>,
    u_k_in: Signal,
    z_in: DVector<f64>,
    u_k: Signal,
}

impl Work<'_> {
    fn matrix(&self, with_cost: bool) -> DMatrix<f64> {
        let rows = self.red.lin.quotient.nrows() + usize::from(with_cost);
        DMatrix::from_fn(rows, self.terms.len(), |r, c| {
            if r < self.red.lin.quotient.nrows() {
                self.cols[c][r]
            } else {
                self.terms[c].atom.cost
            }
        })
    }

    fn atom_part(&self) -> Signal {
        let mut u = DVector::zeros(self.p.n());
        for t in &self.terms {
            u.axpy(t.alpha, &t.atom.vector, 1.0);
        }
        u
    }

    fn refit_lineality(&mut self) {
        let target = &self.z_in - self.p.phi.matrix() * self.atom_part();
        self.u_k = self.red.fit_lineality(self.p, &self.u_k_in, &target);
    }

    fn cost(&self) -> f64 {
        self.terms.iter().map(|t| t.alpha * t.atom.cost).sum()
    }

    fn rays_only(&self) -> bool {
        self.p.gauge.is_conic() || (!self.terms.is_empty() && self.terms.iter().all(|t| t.atom.is_ray()))
    }

    /// Largest step along `±γ` keeping `α >= 0`. Chooses the sign whose
    /// blocking ratio is smaller; equal ratios zero the highest-index atom.
    /// `fixed_sign` restricts the search to one direction.
    fn step(&mut self, phase: Phase, gamma: &DVector<f64>, fixed_sign: Option<f64>) -> Result<Option<Pivot>> {
        let mut best: Option<(f64, f64, usize)> = None; // (t, sign, index)
        let signs: &[f64] = match fixed_sign {
            Some(s) if s > 0.0 => &[1.0],
            Some(_) => &[-1.0],
            None => &[1.0, -1.0],
        };
        for &s in signs {
            for (k, t) in self.terms.iter().enumerate() {
                let g = s * gamma[k];
                if g < 0.0 {
                    let ratio = t.alpha / -g;
                    let better = match best {
                        None => true,
                        Some((bt, _, bk)) => {
                            let tie = (ratio - bt).abs() <= 1e-12 * bt.max(ratio);
                            (tie && k > bk) || (!tie && ratio < bt)
                        }
                    };
                    if better {
                        best = Some((ratio, s, k));
                    }
                }
            }
        }
        let Some((t, s, idx)) = best else {
            return Ok(None);
        };
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InfeasibleStep);
        }
        let amax = self.terms.iter().map(|t| t.alpha).fold(0.0, f64::max);
        for (k, term) in self.terms.iter_mut().enumerate() {
            term.alpha += t * s * gamma[k];
            if k == idx || term.alpha <= 1e-14 * amax {
                term.alpha = 0.0;
            }
        }
        let removed = self.terms.iter().filter(|t| t.alpha == 0.0).map(|t| t.atom.label.clone()).collect();
        let keep: Vec<bool> = self.terms.iter().map(|t| t.alpha > 0.0).collect();
        let mut i = 0;
        self.terms.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        let mut i = 0;
        self.cols.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        self.refit_lineality();
        Ok(Some(Pivot { phase, gamma: (gamma * s).iter().cloned().collect(), step: t, removed }))
    }
}

/// Reduces `rep` without changing `Φu` or increasing `Σ α cost`.
/// `optimal` asserts that `rep` minimises the objective (globally, for
/// non-convex fits) and enables Phase B.
pub fn sparsify(
    rep: &AtomicRepresentation,
    p: &Problem,
    optimal: bool,
) -> Result<(AtomicRepresentation, SparsifyReport)> {
    let red = Reduced::new(p);
    let m = p.m();
    let d = red.lin.d;
    if red.lin.quotient.nrows() != m - d || (d > 0 && red.phi_b.ncols() == 0) {
        return Err(Error::QuotientRankDeficiency { d });
    }
    let u_in = rep.assemble()?;
    let z_in = p.phi.apply(&u_in)?;
    let t_star = p.gauge.evaluate(&u_in)?;
    let delta = compute_delta(&p.gauge, t_star);
    let objective_in = evaluate_objective(p, &u_in)?;
    let terms: Vec<Term> = rep.terms.iter().filter(|t| t.alpha > 0.0).cloned().collect();
    let cols = terms.iter().map(|t| red.column(p, &t.atom)).collect();
    let mut w = Work { p, red, terms, cols, u_k_in: rep.u_k.clone(), z_in: z_in.clone(), u_k: rep.u_k.clone() };
    let r_in = rep.r();
    let cost_in = rep.cost();
    let mut log = Vec::new();
    let mut diagnostics = Vec::new();

    // Phase A
    while let Some(gamma) = linalg::kernel_vector(&w.matrix(true), KERNEL_RTOL) {
        match w.step(Phase::A, &gamma, None)? {
            Some(pivot) => log.push(pivot),
            None => return Err(Error::InfeasibleStep),
        }
    }

    // Phase B
    if optimal {
        while (w.terms.len() as i64) > theorem_bound(m, d, delta, w.rays_only()) {
            let Some(gamma) = linalg::kernel_vector(&w.matrix(false), KERNEL_RTOL) else {
                break;
            };
            let costs = DVector::from_iterator(w.terms.len(), w.terms.iter().map(|t| t.atom.cost));
            let slope = gamma.dot(&costs);
            let scale = costs.amax().max(1.0);
            let pivot = if slope.abs() <= 1e-12 * scale {
                w.step(Phase::B, &gamma, None)?
            } else {
                let sign = if slope < 0.0 { 1.0 } else { -1.0 };
                let pivot = w.step(Phase::B, &gamma, Some(sign))?;
                match &pivot {
                    Some(pv) => {
                        let decrease = pv.step * slope.abs();
                        if decrease > OBJ_TOL * objective_in.abs().max(1.0) {
                            diagnostics.push(Diagnostic::SuboptimalInput { decrease });
                        }
                    }
                    None => diagnostics.push(Diagnostic::UnboundedDescent),
                }
                pivot
            };
            match pivot {
                Some(pv) => log.push(pv),
                None => break,
            }
        }
    }

    let out = AtomicRepresentation::new(w.u_k.clone(), w.terms.clone());
    let u_out = out.assemble()?;
    let objective_out = evaluate_objective(p, &u_out)?;
    if optimal && objective_out - objective_in > OBJ_TOL * objective_in.abs().max(1.0) {
        diagnostics.push(Diagnostic::ObjectiveIncrease { increase: objective_out - objective_in });
    }
    let rays_only = w.rays_only();
    let bound = theorem_bound(m, d, delta, rays_only);
    let report = SparsifyReport {
        r_in,
        r_out: out.r(),
        bound,
        bound_met: (out.r() as i64) <= bound,
        d,
        delta,
        rays_only,
        phi_residual: (p.phi.apply(&u_out)? - z_in).norm(),
        cost_change: w.cost() - cost_in,
        objective_in,
        objective_out,
        pivot_log: log,
        diagnostics,
    };
    Ok((out, report))
}

/// Sparsifies a solver result, treating it as optimal when the fit is
/// convex and the dual gap is small (or when it came from the exhaustive
/// non-convex search, which always reports convergence).
pub fn certify_bound(result: &SolveResult, p: &Problem) -> Result<(AtomicRepresentation, SparsifyReport)> {
    let gap_ok = result.dual_gap <= CERTIFY_GAP_TOL * result.objective.abs().max(1.0);
    let optimal = result.converged && (gap_ok || !p.fit.is_convex());
    sparsify(&result.rep, p, optimal)
}
