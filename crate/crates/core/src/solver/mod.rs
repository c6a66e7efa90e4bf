//! Fully corrective conditional gradient (Frank–Wolfe) for
//! `min_u f(Φu) + reg_weight · J_C(u)`.
//!
//! Each iteration calls the family LMO on `Φ^T ∇f(Φu)`, appends the atom
//! and re-solves the restricted master over every atom kept so far (see
//! [`master`]). The iterate is always an explicit [`AtomicRepresentation`].
//! Equality-constrained fits (`min J_C(u)` s.t. `Φu = y`) run a decreasing
//! penalty path followed by an exact feasibility polish on the final
//! support.

mod master;
mod nonconvex;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    compute_delta, evaluate_objective, Atom, AtomicRepresentation, DataFit, Family, Problem, Signal, Term, EQUALITY_TOL,
};
use crate::tvgrad::{self, TvGrid};

pub(crate) use master::{nnls_linear, Reduced};
pub use master::{solve_master, MasterSolution};
pub use nonconvex::{solve_tiny_nonconvex, GridSpec};

/// Penalty path used for equality fits: `λ_k = λ_max · 10^{-k}`.
const PATH_STEPS: i32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub dual_gap_tol: f64,
    pub master_tol: f64,
    /// Cone-section radius; `None` picks `10 |y| / σ_min` over the used atoms.
    pub conic_radius: Option<f64>,
    pub prune_tol: f64,
    /// Echoed into reports; the solver itself draws no random numbers.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 500,
            dual_gap_tol: 1e-9,
            master_tol: 1e-12,
            conic_radius: None,
            prune_tol: 1e-10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.dual_gap_tol) && ok(self.master_tol) && ok(self.prune_tol)) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if let Some(r) = self.conic_radius {
            if !ok(r) {
                return Err(Error::InvalidParameter("conic_radius must be positive".into()));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub rep: AtomicRepresentation,
    pub objective: f64,
    /// FW duality gap (for equality fits: atom cost minus the dual value of
    /// the rescaled path residual; for the tiny non-convex search: the
    /// final grid spacing).
    pub dual_gap: f64,
    pub t_star: f64,
    pub delta: u8,
    pub d: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Restricted master objective after each iteration of the last FW run.
    pub trace: Vec<f64>,
    /// Cone-section radius used (conic gauges only).
    pub conic_radius: Option<f64>,
}

impl SolveResult {
    pub(crate) fn finish(p: &Problem, rep: AtomicRepresentation, d: usize, stats: RunStats) -> Result<Self> {
        let u = rep.assemble()?;
        let objective = evaluate_objective(p, &u)?;
        let t_star = p.gauge.evaluate(&u)?;
        Ok(SolveResult {
            delta: compute_delta(&p.gauge, t_star),
            rep,
            objective,
            dual_gap: stats.gap,
            t_star,
            d,
            iterations: stats.iterations,
            converged: stats.converged,
            trace: stats.trace,
            conic_radius: stats.radius,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct RunStats {
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub radius: Option<f64>,
}

/// Atoms kept by the fully corrective loop, with their `QΦψ` columns.
struct ActiveSet {
    atoms: Vec<Atom>,
    cols: Vec<DVector<f64>>,
    alpha: Vec<f64>,
    u_k: Signal,
}

impl ActiveSet {
    fn new(n: usize) -> Self {
        ActiveSet { atoms: vec![], cols: vec![], alpha: vec![], u_k: DVector::zeros(n) }
    }

    fn push(&mut self, p: &Problem, red: &Reduced, atom: Atom) {
        self.cols.push(red.column(p, &atom));
        self.atoms.push(atom);
        self.alpha.push(0.0);
    }

    fn contains(&self, atom: &Atom) -> bool {
        self.atoms.iter().any(|a| a.label == atom.label)
    }

    fn keep(&mut self, keep: impl Fn(usize) -> bool) {
        let idx: Vec<usize> = (0..self.atoms.len()).filter(|&k| keep(k)).collect();
        self.atoms = idx.iter().map(|&k| self.atoms[k].clone()).collect();
        self.cols = idx.iter().map(|&k| self.cols[k].clone()).collect();
        self.alpha = idx.iter().map(|&k| self.alpha[k]).collect();
    }

    fn atom_part(&self, n: usize) -> Signal {
        let mut u = DVector::zeros(n);
        for (a, &w) in self.atoms.iter().zip(&self.alpha) {
            u.axpy(w, &a.vector, 1.0);
        }
        u
    }

    fn representation(&self) -> AtomicRepresentation {
        let terms =
            self.atoms.iter().zip(&self.alpha).map(|(atom, &alpha)| Term { alpha, atom: atom.clone() }).collect();
        AtomicRepresentation::new(self.u_k.clone(), terms)
    }
}

fn default_radius(p: &Problem, red: &Reduced, active: &ActiveSet) -> f64 {
    let ynorm = p.fit.y().norm().max(f64::MIN_POSITIVE);
    let used: Vec<_> = active.cols.clone();
    let smin = if used.is_empty() {
        let qphi = &red.lin.quotient * p.phi.matrix();
        qphi.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
    } else {
        let a = linalg::hstack(&used, red.lin.quotient.nrows());
        a.svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    10.0 * ynorm / smin.max(1e-300)
}

/// One fully corrective FW run on `½|Φu - y|² + λ Σ α_k cost_k`, warm
/// started from `active`.
fn fcfw(p: &Problem, red: &Reduced, lambda: f64, cfg: &SolverConfig, active: &mut ActiveSet) -> Result<RunStats> {
    let n = p.n();
    let y = p.fit.y();
    let conic = p.gauge.is_conic();
    let gscale = 1.0_f64.max(p.phi.adjoint(y)?.amax());
    let violation_tol = 10.0 * cfg.master_tol * gscale;
    let mut stats = RunStats::default();
    let mut last_obj = f64::INFINITY;
    for it in 0..cfg.max_iters {
        stats.iterations = it + 1;
        let sol = master::master(p, red, &active.atoms, &active.cols, lambda, cfg.master_tol)?;
        active.alpha = sol.alpha.clone();
        active.u_k = sol.u_k.clone();
        if active.alpha.iter().any(|&a| a > 0.0 && a <= cfg.prune_tol) {
            active.keep(|k| sol.alpha[k] > cfg.prune_tol);
            let sol = master::master(p, red, &active.atoms, &active.cols, lambda, cfg.master_tol)?;
            active.alpha = sol.alpha;
            active.u_k = sol.u_k;
        }
        let alpha = active.alpha.clone();
        active.keep(|k| alpha[k] > 0.0);

        let u_atoms = active.atom_part(n);
        let u = &active.u_k + &u_atoms;
        let resid = p.phi.apply(&u)? - y;
        let grad = p.phi.adjoint(&resid)?;
        let cost: f64 = active.atoms.iter().zip(&active.alpha).map(|(a, w)| w * a.cost).sum();
        let obj = 0.5 * resid.norm_squared() + lambda * cost;
        if obj > last_obj + 1e3 * cfg.master_tol * last_obj.abs().max(1.0) {
            return Err(Error::NoProgress { iteration: it, gap: obj - last_obj });
        }
        last_obj = obj;
        stats.trace.push(obj);

        let lmo = p.gauge.lmo(&grad)?;
        let lin_term = grad.dot(&u_atoms) + lambda * cost;
        let (gap, descent) = if conic {
            let radius = cfg.conic_radius.unwrap_or_else(|| default_radius(p, red, active));
            stats.radius = Some(radius);
            let v = (-lmo.value - violation_tol).max(0.0);
            (lin_term + radius * v, v > 0.0)
        } else {
            let tau = obj / lambda;
            let v = (-(lambda + lmo.value) - violation_tol).max(0.0);
            (lin_term + tau * v, v > 0.0)
        };
        stats.gap = gap;
        if !descent || gap <= cfg.dual_gap_tol * obj.max(1.0) {
            stats.converged = true;
            break;
        }
        let mut added = false;
        for atom in std::iter::once(lmo.atom).chain(lmo.extra) {
            if !atom.is_zero() && !active.contains(&atom) {
                active.push(p, red, atom);
                added = true;
            }
        }
        if !added {
            return Err(Error::NoProgress { iteration: it, gap });
        }
    }
    if conic {
        let mass: f64 = active.alpha.iter().sum();
        if let Some(radius) = stats.radius {
            if mass >= radius {
                return Err(Error::CapActive { radius, used: mass });
            }
        }
    }
    Ok(stats)
}

/// Moves `α` on the current support to satisfy `QΦu = Qy` exactly when the
/// correction keeps every weight positive.
fn polish_equality(p: &Problem, red: &Reduced, active: &mut ActiveSet) -> bool {
    let y = p.fit.y();
    let qy = &red.lin.quotient * y;
    if !active.atoms.is_empty() {
        let a = linalg::hstack(&active.cols, red.lin.quotient.nrows());
        let alpha = DVector::from_column_slice(&active.alpha);
        let corr = linalg::lstsq(&a, &(&qy - &a * &alpha));
        let next = alpha + corr;
        if next.iter().all(|&v| v > 0.0) {
            active.alpha = next.iter().cloned().collect();
        }
    }
    let u_atoms = active.atom_part(p.n());
    active.u_k = red.fit_lineality(p, &DVector::zeros(p.n()), &(y - p.phi.matrix() * &u_atoms));
    let u = &active.u_k + u_atoms;
    (p.phi.matrix() * u - y).norm() <= EQUALITY_TOL * (1.0 + y.norm())
}

/// Solves the convex problem. Squared-ℓ2 fits run one FW pass; equality
/// fits follow a penalty path then polish the final support.
pub fn solve(p: &Problem, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if !p.fit.is_convex() {
        return Err(Error::NonConvexFit);
    }
    let red = Reduced::new(p);
    let d = red.lin.d;
    let mut active = ActiveSet::new(p.n());
    let stats = match &p.fit {
        DataFit::SquaredL2 { .. } => fcfw(p, &red, p.reg_weight, cfg, &mut active)?,
        DataFit::EqualityIndicator { .. } => solve_equality(p, &red, cfg, &mut active)?,
        DataFit::TruncatedQuadratic { .. } => unreachable!("rejected above"),
    };
    let rep = match p.gauge.family() {
        Family::TVGradient2D(grid) => level_set_representation(grid, &active.representation())?,
        _ => active.representation(),
    };
    SolveResult::finish(p, rep, d, stats)
}

/// Rewrites a TV representation over the level sets of its signal. The
/// signal is unchanged and the cost drops to `TV(u)`; the level sets are
/// nested or disjoint, so any subset of them yields at most `r + 1`
/// distinct values.
fn level_set_representation(grid: &TvGrid, rep: &AtomicRepresentation) -> Result<AtomicRepresentation> {
    let u = rep.assemble()?;
    let terms = tvgrad::level_set_atoms(grid, u.as_slice())?
        .into_iter()
        .map(|(alpha, atom)| Term { alpha, atom: atom.into_atom() })
        .collect();
    Ok(AtomicRepresentation::new(rep.u_k.clone(), terms))
}

fn solve_equality(p: &Problem, red: &Reduced, cfg: &SolverConfig, active: &mut ActiveSet) -> Result<RunStats> {
    let n = p.n();
    let y = p.fit.y();
    if p.gauge.is_conic() {
        let mut stats = fcfw(p, red, 1.0, cfg, active)?;
        stats.converged &= polish_equality(p, red, active);
        return Ok(stats);
    }
    let u0 = red.fit_lineality(p, &DVector::zeros(n), y);
    let grad0 = p.phi.adjoint(&(p.phi.apply(&u0)? - y))?;
    let lambda_max = -p.gauge.lmo(&grad0)?.value;
    if lambda_max <= 0.0 {
        active.u_k = u0;
        let feasible = (p.phi.apply(&active.u_k)? - y).norm() <= EQUALITY_TOL * (1.0 + y.norm());
        return Ok(RunStats { gap: 0.0, iterations: 0, converged: feasible, trace: vec![], radius: None });
    }
    let mut last = RunStats::default();
    let mut total = 0;
    let mut all_converged = true;
    let mut lambda = lambda_max;
    for k in 1..=PATH_STEPS {
        lambda = lambda_max * 10f64.powi(-k);
        last = fcfw(p, red, lambda, cfg, active)?;
        total += last.iterations;
        all_converged &= last.converged;
    }
    // dual certificate: the scaled path residual, made polar-feasible
    let u = &active.u_k + active.atom_part(n);
    let eta = (y - p.phi.apply(&u)?) / lambda;
    let polar = -p.gauge.lmo(&-p.phi.adjoint(&eta)?)?.value;
    let dual = eta.dot(y) / polar.max(1.0);
    let feasible = polish_equality(p, red, active);
    let cost: f64 = active.atoms.iter().zip(&active.alpha).map(|(a, w)| w * a.cost).sum();
    last.gap = (cost - dual).max(0.0);
    last.iterations = total;
    last.converged = all_converged && feasible;
    Ok(last)
}
