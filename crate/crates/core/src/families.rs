//! Concrete gauges and their linear minimisation oracles (LMOs): the ℓ1
//! ball, the total mass of a measure on a grid, the nonnegative orthant,
//! the PSD cone, 1-D generalized total variation and the 2-D total
//! gradient variation of [`crate::tvgrad`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{unvec, vec_of, Atom, AtomLabel, Family, GaugeModel, Sign, Signal};
use crate::tvgrad::{self, TvGrid};

/// PSD membership: `λ_min >= -TOL_PSD · |X|_F`.
pub const TOL_PSD: f64 = 1e-9;
/// PSD LMO returns a ray only when `λ_min < -TOL_EIG`.
pub const TOL_EIG: f64 = 1e-9;
/// Symmetry tolerance for LMO inputs, relative to `max(1, max |G_ij|)`.
pub const TOL_SYM: f64 = 1e-10;

/// Family constructor parameters (also the on-disk form in problem specs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum FamilySpec {
    L1Ball { n: usize },
    MeasureMass { grid: Vec<f64> },
    NonnegOrthant { n: usize },
    PsdCone { p: usize },
    GeneralizedTV1D { n: usize },
    TVGradient2D { h: usize, w: usize },
}

/// Result of a linear minimisation `min_ψ <g, ψ>` over the atoms.
#[derive(Debug, Clone)]
pub struct Lmo {
    pub atom: Atom,
    /// Further atoms worth adding (other min-cut components for TV).
    pub extra: Vec<Atom>,
    /// `<g, atom>`; `0` for the zero atom.
    pub value: f64,
    pub degenerate: bool,
}

pub fn build_family(spec: &FamilySpec) -> Result<GaugeModel> {
    let positive = |name: &str, v: usize| {
        if v == 0 {
            Err(Error::InvalidParameter(format!("{name} must be positive")))
        } else {
            Ok(())
        }
    };
    match spec {
        FamilySpec::L1Ball { n } => {
            positive("n", *n)?;
            let atoms = (0..*n)
                .flat_map(|i| {
                    [Sign::Plus, Sign::Minus]
                        .map(|s| Atom::extreme(unit(*n, i) * s.value(), AtomLabel::Coordinate { index: i, sign: s }))
                })
                .collect();
            Ok(GaugeModel { family: Family::L1Ball { n: *n }, ambient_dim: *n, lineality: vec![], atoms })
        }
        FamilySpec::MeasureMass { grid } => {
            let n = grid.len();
            positive("grid size", n)?;
            if grid.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("measure grid"));
            }
            let atoms = (0..n)
                .flat_map(|i| {
                    [Sign::Plus, Sign::Minus].map(|s| {
                        Atom::extreme(unit(n, i) * s.value(), AtomLabel::Node { index: i, position: grid[i], sign: s })
                    })
                })
                .collect();
            Ok(GaugeModel {
                family: Family::MeasureMass { grid: grid.clone() },
                ambient_dim: n,
                lineality: vec![],
                atoms,
            })
        }
        FamilySpec::NonnegOrthant { n } => {
            positive("n", *n)?;
            let atoms = (0..*n).map(|i| Atom::ray(unit(*n, i), AtomLabel::Ray { index: i })).collect();
            Ok(GaugeModel { family: Family::NonnegOrthant { n: *n }, ambient_dim: *n, lineality: vec![], atoms })
        }
        FamilySpec::PsdCone { p } => {
            positive("p", *p)?;
            Ok(GaugeModel { family: Family::PsdCone { p: *p }, ambient_dim: p * p, lineality: vec![], atoms: vec![] })
        }
        FamilySpec::GeneralizedTV1D { n } => {
            if *n < 2 {
                return Err(Error::InvalidParameter("GeneralizedTV1D needs n >= 2".into()));
            }
            let steps = gtv1d_steps(*n)?;
            let atoms = steps
                .into_iter()
                .enumerate()
                .flat_map(|(j, s)| {
                    [Sign::Plus, Sign::Minus]
                        .map(|sg| Atom::extreme(&s * sg.value(), AtomLabel::Step { jump: j, sign: sg }))
                })
                .collect();
            let constant = DVector::from_element(*n, 1.0 / (*n as f64).sqrt());
            Ok(GaugeModel {
                family: Family::GeneralizedTV1D { n: *n },
                ambient_dim: *n,
                lineality: vec![constant],
                atoms,
            })
        }
        FamilySpec::TVGradient2D { h, w } => {
            let grid = TvGrid::new(*h, *w)?;
            Ok(GaugeModel {
                family: Family::TVGradient2D(grid),
                ambient_dim: grid.len(),
                lineality: vec![],
                atoms: vec![],
            })
        }
    }
}

fn unit(n: usize, i: usize) -> Signal {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// Forward-difference operator `(Lu)_j = u_{j+1} - u_j`, `(n-1) × n`.
pub fn forward_difference(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n, |r, c| {
        if c == r + 1 {
            1.0
        } else if c == r {
            -1.0
        } else {
            0.0
        }
    })
}

/// Unit-gauge steps `L^+ δ_j` (minimum-norm pseudoinverse via `L^T (L L^T)^{-1}`).
fn gtv1d_steps(n: usize) -> Result<Vec<Signal>> {
    let l = forward_difference(n);
    let llt = &l * l.transpose();
    let chol = llt.cholesky().ok_or_else(|| Error::InvalidParameter("L L^T is not positive definite".into()))?;
    let mut steps = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let z = chol.solve(&unit(n - 1, j));
        let mut s = l.tr_mul(&z);
        let ls = &l * &s;
        s /= ls.lp_norm(1);
        let ls = &l * &s;
        let err = (0..n - 1).map(|k| (ls[k] - if k == j { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max);
        if err > 1e-12 || s.sum().abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("step atom {j} failed its unit-gauge check ({err:.2e})")));
        }
        steps.push(s);
    }
    Ok(steps)
}

/// `argmin_{a ∈ {±e_i}} <g, a>`: `-sign(g_i*) e_i*` with `i* = argmax |g_i|`,
/// smallest index on ties; `+e_1` flagged degenerate when `g = 0`.
pub fn lmo_l1(g: &Signal) -> Lmo {
    let (index, sign, value, degenerate) = l1_argmin(g);
    let n = g.len();
    Lmo {
        atom: Atom::extreme(unit(n, index) * sign.value(), AtomLabel::Coordinate { index, sign }),
        extra: vec![],
        value,
        degenerate,
    }
}

fn l1_argmin(g: &Signal) -> (usize, Sign, f64, bool) {
    let mut best = 0;
    for i in 1..g.len() {
        if g[i].abs() > g[best].abs() {
            best = i;
        }
    }
    let gi = g[best];
    if gi == 0.0 {
        (best, Sign::Plus, 0.0, true)
    } else if gi > 0.0 {
        (best, Sign::Minus, -gi, false)
    } else {
        (best, Sign::Plus, gi, false)
    }
}

/// Over the cone section `{u >= 0, Σu <= 1}`: `e_i*` for `i* = argmin g_i`
/// if `g_i* < 0`, else the zero atom.
pub fn lmo_nonneg(g: &Signal) -> Lmo {
    let n = g.len();
    let mut best = 0;
    for i in 1..n {
        if g[i] < g[best] {
            best = i;
        }
    }
    if n > 0 && g[best] < 0.0 {
        Lmo {
            atom: Atom::ray(unit(n, best), AtomLabel::Ray { index: best }),
            extra: vec![],
            value: g[best],
            degenerate: false,
        }
    } else {
        Lmo { atom: Atom::zero(n), extra: vec![], value: 0.0, degenerate: false }
    }
}

/// Minimum eigenpair of the symmetric matrix `G`; the ray `v v^T` when
/// `λ_min < -TOL_EIG`, else the zero atom. Eigenvector sign is fixed so
/// its largest-magnitude entry is positive.
pub fn lmo_psd(g: &DMatrix<f64>) -> Result<Lmo> {
    let p = g.nrows();
    if g.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, found: g.ncols() });
    }
    let scale = g.iter().fold(1.0_f64, |a, &x| a.max(x.abs()));
    let asym = (g - g.transpose()).amax();
    if asym > TOL_SYM * scale {
        return Err(Error::NonSymmetric(asym));
    }
    let (lmin, v) = min_eigenpair(g);
    if lmin < -TOL_EIG {
        Ok(Lmo { atom: rank1_atom(&v), extra: vec![], value: lmin, degenerate: false })
    } else {
        Ok(Lmo { atom: Atom::zero(p * p), extra: vec![], value: 0.0, degenerate: false })
    }
}

pub(crate) fn min_eigenpair(g: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut k = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let mut v = eig.eigenvectors.column(k).into_owned();
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v = -v;
    }
    (eig.eigenvalues[k], v)
}

/// Smallest eigenvalue of the symmetric part of `x`.
pub fn min_eigenpair_value(x: &DMatrix<f64>) -> f64 {
    min_eigenpair(x).0
}

/// Ray atom `vec(v v^T)` for a unit vector `v`.
pub fn rank1_atom(v: &DVector<f64>) -> Atom {
    let m = v * v.transpose();
    Atom::ray(vec_of(&m), AtomLabel::Rank1 { v: v.iter().cloned().collect() })
}

/// Symmetric and `λ_min >= -tol |X|_F`.
pub fn is_psd(x: &DMatrix<f64>, tol: f64) -> bool {
    let fro = x.norm();
    if fro == 0.0 {
        return true;
    }
    let asym = (x - x.transpose()).amax();
    if asym > TOL_SYM * x.amax().max(1.0) {
        return false;
    }
    min_eigenpair(x).0 >= -tol * fro
}

/// `X = Σ α_k v_k v_k^T` over the nonnegative eigenvalues.
pub fn psd_decompose(x: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let sym = (x + x.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut out: Vec<(f64, DVector<f64>)> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 0.0)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    out.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Relative margin (against `|g|_1`) a step atom must beat the incumbent by.
pub const GTV_TIE_RTOL: f64 = 1e-12;

/// Exhaustive scan over stored step atoms, strict improvement only; the
/// first atom flagged degenerate when `g` is orthogonal to all of them.
pub fn lmo_gtv1d(atoms: &[Atom], g: &Signal) -> Lmo {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    let mut max_abs = 0.0_f64;
    let tie = GTV_TIE_RTOL * g.lp_norm(1);
    for (k, a) in atoms.iter().enumerate() {
        let v = g.dot(&a.vector);
        max_abs = max_abs.max(v.abs());
        if v < best_val - tie {
            best_val = v;
            best = k;
        }
    }
    if max_abs <= 1e-14 * g.norm().max(f64::MIN_POSITIVE) {
        return Lmo { atom: atoms[0].clone(), extra: vec![], value: 0.0, degenerate: true };
    }
    Lmo { atom: atoms[best].clone(), extra: vec![], value: best_val, degenerate: false }
}

impl GaugeModel {
    /// Linear minimisation of `<g, ψ>` over the family's atoms.
    pub fn lmo(&self, g: &Signal) -> Result<Lmo> {
        check_dim(self.ambient_dim, g.len())?;
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        match &self.family {
            Family::L1Ball { .. } | Family::MeasureMass { .. } => {
                let (index, sign, value, degenerate) = l1_argmin(g);
                let k = 2 * index + usize::from(sign == Sign::Minus);
                Ok(Lmo { atom: self.atoms[k].clone(), extra: vec![], value, degenerate })
            }
            Family::NonnegOrthant { .. } => Ok(lmo_nonneg(g)),
            Family::PsdCone { p } => {
                let gm = unvec(g, *p);
                lmo_psd(&((&gm + gm.transpose()) * 0.5))
            }
            Family::GeneralizedTV1D { .. } => Ok(lmo_gtv1d(&self.atoms, g)),
            Family::TVGradient2D(grid) => {
                let res = tvgrad::lmo_tv(grid, g.as_slice())?;
                let extra = res.components.iter().skip(1).cloned().map(|a| a.into_atom()).collect();
                Ok(Lmo { atom: res.atom.into_atom(), extra, value: res.value, degenerate: res.degenerate })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Signal {
        DVector::from_column_slice(x)
    }

    #[test]
    fn l1_examples() {
        let a = lmo_l1(&v(&[3.0, -5.0, 1.0]));
        assert_eq!(a.atom.label, AtomLabel::Coordinate { index: 1, sign: Sign::Plus });
        assert_eq!(a.value, -5.0);
        let a = lmo_l1(&v(&[-1.0, 0.0, 0.0]));
        assert_eq!(a.atom.label, AtomLabel::Coordinate { index: 0, sign: Sign::Plus });
        let a = lmo_l1(&v(&[2.0, 2.0]));
        assert_eq!(a.atom.label, AtomLabel::Coordinate { index: 0, sign: Sign::Minus });
        let a = lmo_l1(&v(&[0.0, 0.0]));
        assert!(a.degenerate);
        assert_eq!(a.atom.label, AtomLabel::Coordinate { index: 0, sign: Sign::Plus });
    }

    #[test]
    fn nonneg_examples() {
        assert_eq!(lmo_nonneg(&v(&[1.0, -2.0])).atom.label, AtomLabel::Ray { index: 1 });
        assert!(lmo_nonneg(&v(&[1.0, 2.0])).atom.is_zero());
        assert_eq!(lmo_nonneg(&v(&[-1.0, -1.0])).atom.label, AtomLabel::Ray { index: 0 });
    }

    #[test]
    fn psd_examples() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let a = lmo_psd(&g).unwrap();
        assert!((a.value + 2.0).abs() < 1e-12);
        assert!((a.atom.vector.clone() - v(&[0.0, 0.0, 0.0, 1.0])).norm() < 1e-12);

        assert!(lmo_psd(&DMatrix::identity(2, 2)).unwrap().atom.is_zero());

        let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a = lmo_psd(&g).unwrap();
        assert!((a.value + 1.0).abs() < 1e-12);
        match &a.atom.label {
            AtomLabel::Rank1 { v } => {
                let s = 1.0 / 2f64.sqrt();
                assert!((v[0] - s).abs() < 1e-12 && (v[1] + s).abs() < 1e-12);
            }
            other => panic!("unexpected label {other:?}"),
        }

        let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(lmo_psd(&g), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn gtv1d_examples() {
        let gauge = build_family(&FamilySpec::GeneralizedTV1D { n: 3 }).unwrap();
        let atoms = gauge.atoms().unwrap();
        let g = -atoms[0].vector.clone();
        let r = lmo_gtv1d(atoms, &g);
        assert_eq!(r.atom.label, AtomLabel::Step { jump: 0, sign: Sign::Plus });

        let r = lmo_gtv1d(atoms, &v(&[1.0, 1.0, 1.0]));
        assert!(r.degenerate);
        assert_eq!(r.atom.label, atoms[0].label);
    }

    #[test]
    fn build_counts() {
        assert_eq!(build_family(&FamilySpec::L1Ball { n: 3 }).unwrap().atoms().unwrap().len(), 6);
        let orth = build_family(&FamilySpec::NonnegOrthant { n: 4 }).unwrap();
        assert_eq!(orth.atoms().unwrap().len(), 4);
        assert!(orth.atoms().unwrap().iter().all(|a| a.is_ray() && a.cost == 0.0));
        assert!(lmo_nonneg(&v(&[1.0; 4])).atom.is_zero());
        let gtv = build_family(&FamilySpec::GeneralizedTV1D { n: 5 }).unwrap();
        assert_eq!(gtv.atoms().unwrap().len(), 8);
        assert_eq!(gtv.lineality_basis().len(), 1);
        assert!(build_family(&FamilySpec::L1Ball { n: 0 }).is_err());
        assert!(build_family(&FamilySpec::GeneralizedTV1D { n: 1 }).is_err());
    }

    #[test]
    fn gtv1d_steps_are_shifted_heavisides() {
        let n = 5;
        let gauge = build_family(&FamilySpec::GeneralizedTV1D { n }).unwrap();
        let l = forward_difference(n);
        for (k, a) in gauge.atoms().unwrap().iter().enumerate() {
            let j = k / 2;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            // n * atom is an integer vector: sign * (n * 1_{i > j} - (n - j - 1))
            let scaled: Vec<i64> = a.vector.iter().map(|x| (x * n as f64).round() as i64).collect();
            for (i, &s) in scaled.iter().enumerate() {
                assert!((a.vector[i] * n as f64 - s as f64).abs() < 1e-9);
                let expect = sign as i64 * (if i > j { n as i64 } else { 0 } - (n - j - 1) as i64);
                assert_eq!(s, expect);
            }
            let jumps: Vec<i64> = (0..n - 1).map(|r| scaled[r + 1] - scaled[r]).collect();
            for (r, d) in jumps.iter().enumerate() {
                assert_eq!(*d, if r == j { sign as i64 * n as i64 } else { 0 });
            }
            assert!(((&l * &a.vector).lp_norm(1) - 1.0).abs() < 1e-12);
            assert!((gauge.evaluate(&a.vector).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn psd_membership_and_decomposition() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 1.0]);
        let x = &b * b.transpose();
        assert!(is_psd(&x, TOL_PSD));
        let parts = psd_decompose(&x);
        let mut rebuilt = DMatrix::zeros(3, 3);
        for (a, v) in &parts {
            assert!(*a >= 0.0);
            rebuilt += v * v.transpose() * *a;
        }
        assert!((rebuilt - &x).amax() < 1e-8);
        assert!(!is_psd(&(-x), TOL_PSD));
    }
}
