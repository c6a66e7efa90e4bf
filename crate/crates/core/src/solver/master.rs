//! Restricted master problem over a fixed atom set.
//!
//! With `Q` the projector onto the complement of `Φ(C_K)`, the lineality
//! component is eliminated exactly and the master reduces to
//!
//! ```text
//! min_{α >= 0}  ½ |Ã α - ỹ|² + <c, α>,   Ã = QΦA,  ỹ = Qy
//! ```
//!
//! solved by a Lawson–Hanson active-set method extended with the linear
//! term. Passive columns stay linearly independent, so the solution has at
//! most `rank(Ã)` nonzeros.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{compute_d, Atom, AtomicRepresentation, LinealityImage, Problem, Signal, Term};

/// Quantities shared by every master solve and sparsification pivot.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub lin: LinealityImage,
    /// `Φ B`, `m × k`.
    pub phi_b: DMatrix<f64>,
    /// `B`, `n × k`.
    pub b: DMatrix<f64>,
}

impl Reduced {
    pub fn new(p: &Problem) -> Self {
        let lin = compute_d(&p.gauge, &p.phi);
        let b = p.gauge.lineality_matrix();
        let phi_b = p.phi.matrix() * &b;
        Reduced { lin, phi_b, b }
    }

    /// `QΦψ`.
    pub fn column(&self, p: &Problem, atom: &Atom) -> DVector<f64> {
        &self.lin.quotient * (p.phi.matrix() * &atom.vector)
    }

    /// Lineality component `u_K` with `Φ u_K` matching `target` on `Φ(C_K)`,
    /// as a minimum-norm correction of `base`.
    pub fn fit_lineality(&self, p: &Problem, base: &Signal, target: &DVector<f64>) -> Signal {
        if self.b.ncols() == 0 {
            return base.clone();
        }
        let resid = target - p.phi.matrix() * base;
        let beta = linalg::lstsq(&self.phi_b, &resid);
        base + &self.b * beta
    }
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, passive: &[usize]) -> Option<DVector<f64>> {
    let ap = DMatrix::from_fn(a.nrows(), passive.len(), |r, k| a[(r, passive[k])]);
    if passive.len() > a.nrows() {
        return None;
    }
    let cp = DVector::from_fn(passive.len(), |k, _| c[passive[k]]);
    let qr = ap.qr();
    let r = qr.r();
    // R^T R s = A_P^T b - c_P  <=>  R s = Q^T b - R^{-T} c_P
    let z = r.tr_solve_upper_triangular(&cp)?;
    let rhs = qr.q().tr_mul(b) - z;
    let s = r.solve_upper_triangular(&rhs)?;
    s.iter().all(|x| x.is_finite()).then_some(s)
}

/// Coefficients `β` with `a_j = A_P β` when column `j` lies in the span of
/// the passive columns, `None` otherwise.
fn dependence(a: &DMatrix<f64>, passive: &[usize], j: usize) -> Option<DVector<f64>> {
    let aj = a.column(j).into_owned();
    let nj = aj.norm();
    if nj == 0.0 {
        return Some(DVector::zeros(passive.len()));
    }
    if passive.is_empty() {
        return None;
    }
    let ap = DMatrix::from_fn(a.nrows(), passive.len(), |r, k| a[(r, passive[k])]);
    let beta = linalg::lstsq(&ap, &aj);
    ((&ap * &beta - &aj).norm() <= 1e-9 * nj).then_some(beta)
}

/// `argmin_{x >= 0} ½ |A x - b|² + <c, x>`.
pub(crate) fn nnls_linear(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, tol: f64) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = 1.0_f64.max(a.tr_mul(b).amax()).max(c.amax());
    let wtol = tol * scale;
    let mut passive: Vec<usize> = Vec::new();
    let mut rejected = vec![false; n];
    for _ in 0..(5 * n + 100) {
        let w = a.tr_mul(&(b - a * &x)) - c;
        let mut enter = None;
        let mut wbest = wtol;
        for k in 0..n {
            if !passive.contains(&k) && !rejected[k] && w[k] > wbest {
                wbest = w[k];
                enter = Some(k);
            }
        }
        let Some(j) = enter else { break };
        let mut first = true;
        if let Some(beta) = dependence(a, &passive, j) {
            // a_j = A_P β is a cheaper way to produce the same image: trade
            // the passive weights for x_j until one of them hits zero
            let mut step = f64::INFINITY;
            let mut blocking = None;
            for (k, &idx) in passive.iter().enumerate() {
                if beta[k] > 0.0 && x[idx] / beta[k] < step {
                    step = x[idx] / beta[k];
                    blocking = Some(idx);
                }
            }
            let Some(bi) = blocking.filter(|_| step > 0.0 && step.is_finite()) else {
                rejected[j] = true;
                continue;
            };
            for (k, &idx) in passive.iter().enumerate() {
                x[idx] -= step * beta[k];
            }
            x[bi] = 0.0;
            x[j] = step;
            passive.retain(|&idx| idx != bi && x[idx] > 0.0);
            for k in 0..n {
                if !passive.contains(&k) && k != j {
                    x[k] = 0.0;
                }
            }
            first = false;
        }
        passive.push(j);
        loop {
            let Some(s) = solve_passive(a, b, c, &passive) else {
                passive.retain(|&k| k != j);
                x[j] = 0.0;
                rejected[j] = true;
                break;
            };
            if s.iter().all(|&v| v > 0.0) {
                for (k, &idx) in passive.iter().enumerate() {
                    x[idx] = s[k];
                }
                rejected.iter_mut().for_each(|r| *r = false);
                break;
            }
            if first && s[s.len() - 1] <= 0.0 {
                passive.pop();
                rejected[j] = true;
                break;
            }
            first = false;
            let mut step = 1.0;
            let mut blocking = None;
            for (k, &idx) in passive.iter().enumerate() {
                if s[k] <= 0.0 {
                    let t = x[idx] / (x[idx] - s[k]);
                    if t < step {
                        step = t;
                        blocking = Some(idx);
                    }
                }
            }
            for (k, &idx) in passive.iter().enumerate() {
                x[idx] += step * (s[k] - x[idx]);
            }
            if let Some(bi) = blocking {
                x[bi] = 0.0;
            }
            passive.retain(|&idx| x[idx] > 0.0);
            for k in 0..n {
                if !passive.contains(&k) {
                    x[k] = 0.0;
                }
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    x
}

/// Solution of the restricted master.
#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub alpha: Vec<f64>,
    pub u_k: Signal,
    /// `½ |Φu - y|² + λ Σ α_k cost_k`.
    pub objective: f64,
    /// Projected-gradient norm at the solution.
    pub stationarity: f64,
}

pub(crate) fn master(
    p: &Problem,
    red: &Reduced,
    atoms: &[Atom],
    cols: &[DVector<f64>],
    lambda: f64,
    tol: f64,
) -> Result<MasterSolution> {
    let y = p.fit.y();
    let rows = red.lin.quotient.nrows();
    let a = linalg::hstack(cols, rows);
    let qy = &red.lin.quotient * y;
    let c = DVector::from_fn(atoms.len(), |k, _| lambda * atoms[k].cost);
    let alpha = nnls_linear(&a, &qy, &c, tol);
    let mut u_atoms = DVector::zeros(p.n());
    for (k, atom) in atoms.iter().enumerate() {
        if alpha[k] != 0.0 {
            u_atoms.axpy(alpha[k], &atom.vector, 1.0);
        }
    }
    let u_k = red.fit_lineality(p, &DVector::zeros(p.n()), &(y - p.phi.matrix() * &u_atoms));
    let z = p.phi.matrix() * (&u_k + &u_atoms);
    let objective = 0.5 * (&z - y).norm_squared() + c.dot(&alpha);
    if !objective.is_finite() {
        return Err(Error::NonFinite("master objective"));
    }
    let grad = a.tr_mul(&(&a * &alpha - &qy)) + &c;
    let stationarity =
        (0..alpha.len()).map(|k| if alpha[k] > 0.0 { grad[k].abs() } else { (-grad[k]).max(0.0) }).fold(0.0, f64::max);
    Ok(MasterSolution { alpha: alpha.iter().cloned().collect(), u_k, objective, stationarity })
}

/// Minimises `½ |Φ(u_K + Σ α_k ψ_k) - y|² + reg_weight Σ α_k cost_k` over
/// `α >= 0` and `u_K ∈ C_K`, using `y` from the problem's data fit.
pub fn solve_master(atoms: &[Atom], p: &Problem, master_tol: f64) -> Result<(AtomicRepresentation, MasterSolution)> {
    let red = Reduced::new(p);
    let cols: Vec<_> = atoms.iter().map(|a| red.column(p, a)).collect();
    let sol = master(p, &red, atoms, &cols, p.reg_weight, master_tol)?;
    let terms = atoms
        .iter()
        .zip(&sol.alpha)
        .filter(|(_, &a)| a > 0.0)
        .map(|(atom, &alpha)| Term { alpha, atom: atom.clone() })
        .collect();
    Ok((AtomicRepresentation::new(sol.u_k.clone(), terms), sol))
}
