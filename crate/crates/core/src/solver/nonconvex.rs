//! Global search for tiny problems with the truncated quadratic fit.
//!
//! `u` is parametrized by one signed coefficient per `±ψ` atom pair plus
//! the lineality coordinates. A coarse grid is refined around the best
//! cells, then each saturation pattern `T` (rows where the fit sits at its
//! cap) is solved as a convex restricted problem. Since
//! `min(q, cap) = min over {q, cap}`, the best pattern gives the global
//! optimum; the grid serves as a cross-check.

use nalgebra::{DMatrix, DVector};

use super::{solve, RunStats, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{
    compute_d, evaluate_objective, AtomicRepresentation, DataFit, Family, Problem, SensingOperator, Term,
};

const MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Final per-axis spacing.
    pub resolution: f64,
    /// Points per axis in the first pass.
    pub coarse_points: usize,
    /// Candidates refined at each zoom level.
    pub keep: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { resolution: 1e-3, coarse_points: 21, keep: 8 }
    }
}

struct Search<'a> {
    p: &'a Problem,
    /// `Φψ⁺_k` columns followed by `ΦB` columns.
    phi_cols: DMatrix<f64>,
    pairs: usize,
    y: DVector<f64>,
    cap: f64,
}

impl Search<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let mut fit = 0.0;
        for i in 0..self.y.len() {
            let z: f64 = (0..x.len()).map(|k| self.phi_cols[(i, k)] * x[k]).sum();
            let r = z - self.y[i];
            fit += (0.5 * r * r).min(self.cap);
        }
        let j: f64 = x[..self.pairs].iter().map(|c| c.abs()).sum();
        fit + self.p.reg_weight * j
    }
}

fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize, mut visit: impl FnMut(&[f64])) {
    let dim = lo.len();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    loop {
        for k in 0..dim {
            let t = if per_axis == 1 { 0.5 } else { idx[k] as f64 / (per_axis - 1) as f64 };
            x[k] = lo[k] + t * (hi[k] - lo[k]);
        }
        visit(&x);
        let mut k = 0;
        while k < dim {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == dim {
            return;
        }
    }
}

fn keep_best(cands: &mut Vec<(f64, Vec<f64>)>, keep: usize, v: f64, x: &[f64]) {
    if cands.len() < keep || v < cands[cands.len() - 1].0 {
        let pos = cands.partition_point(|(w, _)| *w <= v);
        cands.insert(pos, (v, x.to_vec()));
        cands.truncate(keep);
    }
}

/// Multi-level zoom grid. Returns the best point and the final spacing.
fn grid_search(s: &Search, lo: &[f64], hi: &[f64], spec: &GridSpec) -> (f64, Vec<f64>, f64) {
    let dim = lo.len();
    let mut cands = Vec::new();
    grid_points(lo, hi, spec.coarse_points, |x| keep_best(&mut cands, spec.keep, s.value(x), x));
    let mut spacing: Vec<f64> = (0..dim).map(|k| (hi[k] - lo[k]) / (spec.coarse_points - 1) as f64).collect();
    while spacing.iter().cloned().fold(0.0, f64::max) > spec.resolution {
        let centres = std::mem::take(&mut cands);
        for (v, c) in &centres {
            keep_best(&mut cands, spec.keep, *v, c);
        }
        for (_, c) in &centres {
            let l: Vec<f64> = (0..dim).map(|k| c[k] - spacing[k]).collect();
            let h: Vec<f64> = (0..dim).map(|k| c[k] + spacing[k]).collect();
            grid_points(&l, &h, 5, |x| keep_best(&mut cands, spec.keep, s.value(x), x));
        }
        spacing.iter_mut().for_each(|h| *h /= 2.0);
    }
    let (v, x) = cands.swap_remove(0);
    (v, x, spacing.iter().cloned().fold(0.0, f64::max))
}

/// Global minimiser of a tiny truncated-quadratic problem over a finite
/// `±ψ` family (ℓ1, measure mass, generalized TV in 1-D).
pub fn solve_tiny_nonconvex(p: &Problem, spec: &GridSpec) -> Result<SolveResult> {
    let DataFit::TruncatedQuadratic { y, cap } = &p.fit else {
        return Err(Error::InvalidParameter("tiny non-convex search needs a truncated quadratic fit".into()));
    };
    if !(spec.resolution > 0.0 && spec.coarse_points >= 2 && spec.keep >= 1) {
        return Err(Error::InvalidParameter("invalid grid spec".into()));
    }
    if !matches!(p.gauge.family(), Family::L1Ball { .. } | Family::MeasureMass { .. } | Family::GeneralizedTV1D { .. })
    {
        return Err(Error::NotEnumerable("tiny non-convex search needs a finite ±ψ family"));
    }
    let n = p.n();
    let m = p.m();
    let b = p.gauge.lineality_matrix();
    let phi_b = p.phi.matrix() * &b;
    let use_b = phi_b.amax() > 0.0;
    let plus: Vec<_> = p.gauge.atoms().unwrap_or_default().iter().step_by(2).cloned().collect();
    let dim = plus.len() + if use_b { b.ncols() } else { 0 };
    if n > MAX_DIM || dim > MAX_DIM {
        return Err(Error::TooLarge(format!("ambient dimension {n} exceeds {MAX_DIM}")));
    }

    let mut cols: Vec<DVector<f64>> = plus.iter().map(|a| p.phi.matrix() * &a.vector).collect();
    if use_b {
        cols.extend(phi_b.column_iter().map(|c| c.into_owned()));
    }
    let search = Search { p, phi_cols: crate::linalg::hstack(&cols, m), pairs: plus.len(), y: y.clone(), cap: *cap };

    let f0 = search.value(&vec![0.0; dim]);
    let radius = f0 / p.reg_weight;
    let mut hi = vec![radius; plus.len()];
    if use_b {
        for k in 0..b.ncols() {
            let mut beta = 0.0_f64;
            for i in 0..m {
                let coeff = phi_b[(i, k)].abs();
                if coeff > 0.0 {
                    let reach: f64 = (0..plus.len()).map(|j| search.phi_cols[(i, j)].abs()).sum::<f64>() * radius;
                    beta = beta.max((y[i].abs() + (2.0 * cap).sqrt() + reach) / coeff);
                }
            }
            hi.push(beta);
        }
    }
    let lo: Vec<f64> = hi.iter().map(|h| -h).collect();
    let (_, x, spacing) = grid_search(&search, &lo, &hi, spec);

    let atoms = p.gauge.atoms().unwrap_or_default();
    let terms = (0..plus.len())
        .filter(|&k| x[k] != 0.0)
        .map(|k| Term { alpha: x[k].abs(), atom: atoms[2 * k + usize::from(x[k] < 0.0)].clone() })
        .collect();
    let beta = DVector::from_iterator(dim - plus.len(), x[plus.len()..].iter().cloned());
    let u_k = if use_b { &b * beta } else { DVector::zeros(n) };
    let grid_rep = AtomicRepresentation::new(u_k, terms);
    let grid_value = evaluate_objective(p, &grid_rep.assemble()?)?;
    let mut best_rep = grid_rep.clone();
    let mut best = f64::INFINITY;

    // exact polish over saturation patterns
    let cfg = SolverConfig { dual_gap_tol: 1e-12, ..SolverConfig::default() };
    for mask in 0u32..(1 << m) {
        let free: Vec<usize> = (0..m).filter(|i| mask & (1 << i) == 0).collect();
        let rep = if free.is_empty() {
            AtomicRepresentation::empty(n)
        } else {
            let rows: Vec<Vec<f64>> = free.iter().map(|&i| p.phi.matrix().row(i).iter().cloned().collect()).collect();
            let ys = DVector::from_iterator(free.len(), free.iter().map(|&i| y[i]));
            let sub = Problem::new(
                p.gauge.clone(),
                SensingOperator::from_rows(&rows)?,
                DataFit::SquaredL2 { y: ys },
                p.reg_weight,
            )?;
            solve(&sub, &cfg)?.rep
        };
        let value = evaluate_objective(p, &rep.assemble()?)?;
        if value < best {
            best = value;
            best_rep = rep;
        }
    }
    if grid_value < best - 1e-9 * best.abs().max(1.0) {
        best = grid_value;
        best_rep = grid_rep;
    }
    let d = compute_d(&p.gauge, &p.phi).d;
    let stats = RunStats { gap: spacing, iterations: 1 << m, converged: true, trace: vec![best], radius: None };
    SolveResult::finish(p, best_rep, d, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_family, FamilySpec};

    fn tiny(rows: &[Vec<f64>], y: &[f64], cap: f64, lambda: f64) -> Problem {
        let n = rows[0].len();
        Problem::new(
            build_family(&FamilySpec::L1Ball { n }).unwrap(),
            SensingOperator::from_rows(rows).unwrap(),
            DataFit::truncated(DVector::from_column_slice(y), cap).unwrap(),
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn inactive_cap_matches_convex_solve() {
        let p = tiny(&[vec![1.0]], &[2.0], 100.0, 1.0);
        let res = solve_tiny_nonconvex(&p, &GridSpec::default()).unwrap();
        assert!((res.rep.assemble().unwrap()[0] - 1.0).abs() < 1e-9);
        assert!((res.objective - 1.5).abs() < 1e-9);
    }

    #[test]
    fn saturated_fit_gives_zero() {
        let p = tiny(&[vec![1.0, 0.0]], &[100.0], 0.01, 1.0);
        let res = solve_tiny_nonconvex(&p, &GridSpec::default()).unwrap();
        assert_eq!(res.rep.r(), 0);
        assert!((res.objective - 0.01).abs() < 1e-12);
    }

    #[test]
    fn matches_grid_oracle_on_three_dims() {
        let p = tiny(&[vec![1.0, -0.5, 0.3], vec![0.2, 0.8, -1.0]], &[1.2, -0.7], 0.3, 0.2);
        let spec = GridSpec::default();
        let res = solve_tiny_nonconvex(&p, &spec).unwrap();
        // plain fine grid on [-2, 2]^3
        let mut best = f64::INFINITY;
        let steps = 81;
        for a in 0..steps {
            for b in 0..steps {
                for c in 0..steps {
                    let t = |i: usize| -2.0 + 4.0 * i as f64 / (steps - 1) as f64;
                    let u = DVector::from_vec(vec![t(a), t(b), t(c)]);
                    best = best.min(evaluate_objective(&p, &u).unwrap());
                }
            }
        }
        assert!(res.objective <= best + 1e-12);
        assert!(best - res.objective < 0.05 * 3.0 * 0.2 + 0.05);
    }

    #[test]
    fn rejects_large_problems() {
        let p = tiny(&[vec![1.0; 5]], &[1.0], 1.0, 1.0);
        assert!(matches!(solve_tiny_nonconvex(&p, &GridSpec::default()), Err(Error::TooLarge(_))));
    }
}
