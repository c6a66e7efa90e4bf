//! Brute-force references for small instances: exhaustive LMOs, optimal
//! face enumeration for polyhedral gauges, and vertex/ray reconstruction
//! and face checks for explicit polyhedra.
//!
//! Nothing here reuses the solver or the family atom tables; atoms are
//! rebuilt from their closed forms.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, RANK_RTOL};
use crate::model::{vec_of, Atom, AtomLabel, DataFit, Family, GaugeModel, Problem, Sign, Signal};
use crate::solver::nnls_linear;
use crate::tvgrad::{self, IndicatorAtom};

/// Feasibility and equality tolerance for the enumeration oracles.
pub const ORACLE_TOL: f64 = 1e-9;
pub const MAX_FACE_N: usize = 8;
pub const MAX_FACE_M: usize = 4;
pub const MAX_TV_CELLS: usize = 16;
pub const PSD_SAMPLES: usize = 10_000;
const PSD_REFINE_ITERS: usize = 5_000;

fn for_each_subset(n: usize, max_k: usize, mut f: impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, max_k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        f(cur);
        if cur.len() == max_k {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, max_k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, max_k, &mut Vec::new(), &mut f);
}

fn columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])])
}

fn expand(k: usize, idx: &[usize], vals: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(k);
    for (i, &j) in idx.iter().enumerate() {
        out[j] = vals[i];
    }
    out
}

// ---------------------------------------------------------------------------
// closed-form dictionaries

struct Dictionary {
    atoms: Vec<Atom>,
    /// Orthonormal columns spanning `C_K`.
    lineality: DMatrix<f64>,
    /// Operator whose kernel is `C_K`.
    kernel_op: DMatrix<f64>,
}

fn unit(n: usize, i: usize) -> Signal {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// `1[i > j] - (n - 1 - j) / n`: the zero-mean preimage of `e_j` under the
/// forward difference.
fn step(n: usize, j: usize) -> Signal {
    let shift = (n - 1 - j) as f64 / n as f64;
    DVector::from_fn(n, |i, _| if i > j { 1.0 - shift } else { -shift })
}

fn dictionary(gauge: &GaugeModel) -> Result<Dictionary> {
    let n = gauge.ambient_dim();
    let signed = |make: &dyn Fn(usize, Sign) -> AtomLabel, vecs: Vec<Signal>| -> Vec<Atom> {
        vecs.into_iter()
            .enumerate()
            .flat_map(|(i, v)| [Sign::Plus, Sign::Minus].map(|s| Atom::extreme(&v * s.value(), make(i, s))))
            .collect()
    };
    let identity = DMatrix::identity(n, n);
    Ok(match gauge.family() {
        Family::L1Ball { .. } => Dictionary {
            atoms: signed(&|index, sign| AtomLabel::Coordinate { index, sign }, (0..n).map(|i| unit(n, i)).collect()),
            lineality: DMatrix::zeros(n, 0),
            kernel_op: identity,
        },
        Family::MeasureMass { grid } => Dictionary {
            atoms: signed(
                &|index, sign| AtomLabel::Node { index, position: grid[index], sign },
                (0..n).map(|i| unit(n, i)).collect(),
            ),
            lineality: DMatrix::zeros(n, 0),
            kernel_op: identity,
        },
        Family::NonnegOrthant { .. } => Dictionary {
            atoms: (0..n).map(|i| Atom::ray(unit(n, i), AtomLabel::Ray { index: i })).collect(),
            lineality: DMatrix::zeros(n, 0),
            kernel_op: identity,
        },
        Family::GeneralizedTV1D { .. } => Dictionary {
            atoms: signed(&|jump, sign| AtomLabel::Step { jump, sign }, (0..n - 1).map(|j| step(n, j)).collect()),
            lineality: DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt()),
            kernel_op: DMatrix::from_fn(n - 1, n, |r, c| {
                if c == r + 1 {
                    1.0
                } else if c == r {
                    -1.0
                } else {
                    0.0
                }
            }),
        },
        Family::PsdCone { .. } => return Err(Error::NotPolyhedral("PsdCone")),
        Family::TVGradient2D(_) => return Err(Error::NotEnumerable("TVGradient2D")),
    })
}

// ---------------------------------------------------------------------------
// brute-force LMO

#[derive(Debug, Clone)]
pub struct BruteForceLmo {
    pub atom: Atom,
    /// `<g, atom>`.
    pub value: f64,
    /// `false` for the sampled PSD fallback.
    pub exact: bool,
}

/// Exhaustive LMO with the same tie-breaks as the fast oracles: atoms are
/// scanned in family order (`+ψ_0, -ψ_0, +ψ_1, …`) and only a strict
/// improvement replaces the incumbent. PSD falls back to sampling
/// [`PSD_SAMPLES`] unit vectors and refining the best one (approximate).
pub fn brute_force_lmo(gauge: &GaugeModel, g: &Signal, seed: u64) -> Result<BruteForceLmo> {
    let n = gauge.ambient_dim();
    check_dim(n, g.len())?;
    match gauge.family() {
        Family::PsdCone { p } => {
            let p = *p;
            let gm = crate::model::unvec(g, p);
            let gs = (&gm + gm.transpose()) * 0.5;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best: Option<(f64, DVector<f64>)> = None;
            for _ in 0..PSD_SAMPLES {
                let mut v = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                let nv = v.norm();
                if nv == 0.0 {
                    continue;
                }
                v /= nv;
                let val = (v.transpose() * &gs * &v)[0];
                if best.as_ref().is_none_or(|b| val < b.0) {
                    best = Some((val, v));
                }
            }
            let (_, mut v) = best.ok_or(Error::EmptySet)?;
            // projected gradient on the sphere; the Rayleigh quotient has no
            // spurious local minima there
            let step = 0.5 / gs.norm().max(f64::MIN_POSITIVE);
            for _ in 0..PSD_REFINE_ITERS {
                let gv = &gs * &v;
                let rq = v.dot(&gv);
                v -= (gv - &v * rq) * step;
                v /= v.norm();
            }
            let value = v.dot(&(&gs * &v));
            let atom = Atom::ray(vec_of(&(&v * v.transpose())), AtomLabel::Rank1 { v: v.iter().cloned().collect() });
            Ok(BruteForceLmo { atom, value, exact: false })
        }
        Family::TVGradient2D(grid) => {
            if grid.len() > MAX_TV_CELLS {
                return Err(Error::TooLarge(format!("{} cells for subset enumeration", grid.len())));
            }
            let (sign, set, ratio) = tvgrad::brute_force_ratio(grid, g.as_slice())?;
            let atom = IndicatorAtom::new(set, sign)?.into_atom();
            Ok(BruteForceLmo { value: g.dot(&atom.vector), atom, exact: ratio > 0.0 })
        }
        Family::NonnegOrthant { .. } => {
            let dict = dictionary(gauge)?;
            let mut best: Option<(f64, &Atom)> = None;
            for a in &dict.atoms {
                let v = g.dot(&a.vector);
                if best.is_none_or(|b| v < b.0) {
                    best = Some((v, a));
                }
            }
            match best {
                Some((v, a)) if v < 0.0 => Ok(BruteForceLmo { atom: a.clone(), value: v, exact: true }),
                _ => Ok(BruteForceLmo { atom: Atom::zero(n), value: 0.0, exact: true }),
            }
        }
        _ => {
            let dict = dictionary(gauge)?;
            let tie = match gauge.family() {
                Family::GeneralizedTV1D { .. } => crate::families::GTV_TIE_RTOL * g.lp_norm(1),
                _ => 0.0,
            };
            let mut best = (g.dot(&dict.atoms[0].vector), 0);
            let mut max_abs = 0.0_f64;
            for (k, a) in dict.atoms.iter().enumerate() {
                let v = g.dot(&a.vector);
                max_abs = max_abs.max(v.abs());
                if v < best.0 - tie {
                    best = (v, k);
                }
            }
            if matches!(gauge.family(), Family::GeneralizedTV1D { .. })
                && max_abs <= 1e-14 * g.norm().max(f64::MIN_POSITIVE)
            {
                best = (0.0, 0);
            }
            Ok(BruteForceLmo { atom: dict.atoms[best.1].clone(), value: best.0, exact: true })
        }
    }
}

// ---------------------------------------------------------------------------
// optimal face enumeration

#[derive(Debug, Clone, Serialize)]
pub struct FaceDecomposition {
    pub point: Vec<f64>,
    /// Dimension of the smallest face of `S_B★` containing the point.
    pub j: usize,
    pub atoms: Vec<AtomLabel>,
    pub weights: Vec<f64>,
    pub count: usize,
    pub bound: i64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FaceReport {
    pub optimal_value: f64,
    pub t_star: f64,
    pub m: usize,
    pub d: usize,
    pub delta: u8,
    /// Dimension of `S_B★`.
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
    /// Columns spanning `S_K★ = C_K ∩ ker Φ`.
    #[serde(skip)]
    pub s_k_basis: DMatrix<f64>,
    /// The two nullspace computations of `S_K★` agree.
    pub s_k_ok: bool,
    pub vertex_decompositions: Vec<FaceDecomposition>,
    pub samples: Vec<FaceDecomposition>,
    pub bounds_ok: bool,
}

struct FaceSetup {
    atoms: Vec<Atom>,
    /// `[QΦA; c^T]`.
    stacked: DMatrix<f64>,
    rhs: DVector<f64>,
    m: usize,
    d: usize,
    delta: u8,
    conic: bool,
}

impl FaceSetup {
    fn decompose(&self, alpha: &DVector<f64>, gauge: &GaugeModel, t_star: f64) -> Result<FaceDecomposition> {
        let n = gauge.ambient_dim();
        let support: Vec<usize> = (0..alpha.len()).filter(|&k| alpha[k] > ORACLE_TOL).collect();
        let ms = columns(&self.stacked, &support);
        let j = support.len() - linalg::rank(&ms, RANK_RTOL);
        let mut point = DVector::zeros(n);
        for &k in &support {
            point.axpy(alpha[k], &self.atoms[k].vector, 1.0);
        }
        let rays_only = self.conic || (!support.is_empty() && support.iter().all(|&k| self.atoms[k].is_ray()));
        let bound = self.m as i64 + j as i64 - self.d as i64 + i64::from(self.delta) - i64::from(rays_only);
        let scale = 1.0 + self.rhs.amax();
        let feasible = (&self.stacked * alpha - &self.rhs).amax() <= 1e3 * ORACLE_TOL * scale;
        let gauge_ok = (gauge.evaluate(&point)? - t_star).abs() <= 1e3 * ORACLE_TOL * (1.0 + t_star);
        Ok(FaceDecomposition {
            point: point.iter().cloned().collect(),
            j,
            atoms: support.iter().map(|&k| self.atoms[k].label.clone()).collect(),
            weights: support.iter().map(|&k| alpha[k]).collect(),
            count: support.len(),
            bound,
            ok: feasible && gauge_ok && (support.len() as i64) <= bound,
        })
    }
}

/// Optimal value of the reduced problem by enumerating independent
/// supports. Returns `(objective, cost, Ãα)` of the best candidate.
fn optimal_by_enumeration(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &DVector<f64>,
    lambda: f64,
    equality: bool,
) -> Result<(f64, f64, DVector<f64>)> {
    let k = a.ncols();
    let rmax = linalg::rank(a, RANK_RTOL);
    let scale = 1.0 + y.amax();
    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    for_each_subset(k, rmax, |s| {
        let as_ = columns(a, s);
        if linalg::rank(&as_, RANK_RTOL) < s.len() {
            return;
        }
        let alpha = if s.is_empty() {
            DVector::zeros(0)
        } else if equality {
            linalg::lstsq(&as_, y)
        } else {
            let cs = DVector::from_fn(s.len(), |i, _| lambda * c[s[i]]);
            match (as_.tr_mul(&as_)).lu().solve(&(as_.tr_mul(y) - cs)) {
                Some(x) => x,
                None => return,
            }
        };
        if alpha.iter().any(|&x| x < -ORACLE_TOL) {
            return;
        }
        let z = &as_ * &alpha;
        if equality && (&z - y).amax() > ORACLE_TOL * scale {
            return;
        }
        let cost: f64 = (0..s.len()).map(|i| c[s[i]] * alpha[i].max(0.0)).sum();
        let value = if equality { lambda * cost } else { 0.5 * (&z - y).norm_squared() + lambda * cost };
        if best.as_ref().is_none_or(|b| value < b.0 - 1e-13 * scale) {
            best = Some((value, cost, if s.is_empty() { DVector::zeros(y.len()) } else { z }));
        }
    });
    best.ok_or(Error::Infeasible)
}

/// `C_K ∩ ker Φ` as `B · null(ΦB)`, checked against `null([Φ; D])` where
/// `ker D = C_K`.
fn lineality_kernel(phi: &DMatrix<f64>, dict: &Dictionary) -> (DMatrix<f64>, bool) {
    let n = phi.ncols();
    let b = &dict.lineality;
    let via_b = if b.ncols() == 0 {
        DMatrix::zeros(n, 0)
    } else {
        let nb = linalg::null_space(&(phi * b), RANK_RTOL);
        b * nb
    };
    let mut stacked = DMatrix::zeros(phi.nrows() + dict.kernel_op.nrows(), n);
    stacked.view_mut((0, 0), (phi.nrows(), n)).copy_from(phi);
    stacked.view_mut((phi.nrows(), 0), (dict.kernel_op.nrows(), n)).copy_from(&dict.kernel_op);
    let direct = linalg::null_space(&stacked, RANK_RTOL);
    let same_dim = via_b.ncols() == direct.ncols();
    let spans = (0..via_b.ncols()).all(|k| {
        let v = via_b.column(k).into_owned();
        let proj = &direct * direct.tr_mul(&v);
        (proj - &v).amax() <= 1e-10 * v.amax().max(1.0)
    });
    (via_b, same_dim && spans)
}

/// Enumerates the optimal set of a tiny polyhedral instance and checks the
/// decomposition bound `m + j - d + δ` (one less for ray-only points) at
/// every vertex (`j = 0`), at points on edges (`j = 1`) and at a relative
/// interior point (`j = dim S_B★`).
pub fn enumerate_optimal_face(p: &Problem) -> Result<FaceReport> {
    let n = p.n();
    let m = p.m();
    if n > MAX_FACE_N || m > MAX_FACE_M {
        return Err(Error::TooLarge(format!("face enumeration needs n <= {MAX_FACE_N}, m <= {MAX_FACE_M}")));
    }
    if !p.gauge.is_polyhedral() {
        return Err(Error::NotPolyhedral(p.gauge.tag().name()));
    }
    let equality = match &p.fit {
        DataFit::SquaredL2 { .. } => false,
        DataFit::EqualityIndicator { .. } => true,
        DataFit::TruncatedQuadratic { .. } => return Err(Error::NonConvexFit),
    };
    let dict = dictionary(&p.gauge)?;
    let phi = p.phi.matrix();
    let y = p.fit.y();
    let lambda = p.reg_weight;

    let image = phi * &dict.lineality;
    let basis = linalg::column_space(&image, RANK_RTOL);
    let d = basis.ncols();
    let q = linalg::orthogonal_complement_rows(&basis, m);
    let a = &q * phi * linalg::hstack(&dict.atoms.iter().map(|x| x.vector.clone()).collect::<Vec<_>>(), n);
    let qy = &q * y;
    let k = dict.atoms.len();
    let c = DVector::from_fn(k, |i, _| dict.atoms[i].cost);

    let (optimal_value, t_star, z) = optimal_by_enumeration(&a, &qy, &c, lambda, equality)?;
    let delta = u8::from(t_star.abs() <= crate::model::TOL_DELTA);

    // atoms that can carry weight at an optimum
    let candidates: Vec<usize> = if equality {
        (0..k).collect()
    } else {
        let w = a.tr_mul(&(&qy - &z)) - &c * lambda;
        let scale = 1.0 + lambda + a.amax() * (1.0 + qy.amax());
        (0..k).filter(|&i| w[i].abs() <= 1e-7 * scale).collect()
    };
    let rows = a.nrows() + 1;
    let mut stacked = DMatrix::zeros(rows, k);
    stacked.view_mut((0, 0), (a.nrows(), k)).copy_from(&a);
    for i in 0..k {
        stacked[(a.nrows(), i)] = c[i];
    }
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, a.nrows()).copy_from(&z);
    rhs[a.nrows()] = t_star;
    let setup = FaceSetup {
        atoms: dict.atoms.clone(),
        stacked: stacked.clone(),
        rhs: rhs.clone(),
        m,
        d,
        delta,
        conic: p.gauge.is_conic(),
    };

    let sub = columns(&stacked, &candidates);
    let r = linalg::rank(&sub, RANK_RTOL);
    let scale = 1.0 + rhs.amax();
    let mut vertex_supports: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut vertex_alphas = Vec::new();
    let mut ray_supports: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut ray_alphas = Vec::new();
    for_each_subset(candidates.len(), (r + 1).min(candidates.len()), |s| {
        let idx: Vec<usize> = s.iter().map(|&i| candidates[i]).collect();
        let ms = columns(&stacked, &idx);
        let rk = linalg::rank(&ms, RANK_RTOL);
        if rk == idx.len() {
            let alpha = if idx.is_empty() { DVector::zeros(0) } else { linalg::lstsq(&ms, &rhs) };
            if (&ms * &alpha - &rhs).amax() > ORACLE_TOL * scale || alpha.iter().any(|&x| x < -ORACLE_TOL) {
                return;
            }
            let full = expand(k, &idx, &alpha.map(|x| x.max(0.0)));
            let support: Vec<usize> = (0..k).filter(|&i| full[i] > ORACLE_TOL).collect();
            if vertex_supports.insert(support) {
                vertex_alphas.push(full);
            }
        } else if rk + 1 == idx.len() {
            let ns = linalg::null_space(&ms, RANK_RTOL);
            if ns.ncols() != 1 {
                return;
            }
            let mut g = ns.column(0).into_owned();
            if g.sum() < 0.0 {
                g = -g;
            }
            if g.iter().all(|&x| x > ORACLE_TOL) {
                let g = &g / g.sum();
                if ray_supports.insert(idx.clone()) {
                    ray_alphas.push(expand(k, &idx, &g));
                }
            }
        }
    });
    if vertex_alphas.is_empty() {
        return Err(Error::EmptySet);
    }

    let union: BTreeSet<usize> = vertex_supports.iter().chain(ray_supports.iter()).flatten().cloned().collect();
    let union: Vec<usize> = union.into_iter().collect();
    let dim = union.len() - linalg::rank(&columns(&stacked, &union), RANK_RTOL);

    let atom_matrix = linalg::hstack(&dict.atoms.iter().map(|x| x.vector.clone()).collect::<Vec<_>>(), n);
    let mut vertex_decompositions = Vec::new();
    for alpha in &vertex_alphas {
        let mut dec = setup.decompose(alpha, &p.gauge, t_star)?;
        dec.ok &= dec.j == 0;
        vertex_decompositions.push(dec);
    }
    let mut samples = Vec::new();
    for i in 0..vertex_alphas.len() {
        for jx in i + 1..vertex_alphas.len() {
            let mid = (&vertex_alphas[i] + &vertex_alphas[jx]) * 0.5;
            let dec = setup.decompose(&mid, &p.gauge, t_star)?;
            if dec.j == 1 {
                samples.push(dec);
            }
        }
        for g in &ray_alphas {
            let dec = setup.decompose(&(&vertex_alphas[i] + g), &p.gauge, t_star)?;
            if dec.j == 1 {
                samples.push(dec);
            }
        }
    }
    let mut interior = vertex_alphas.iter().fold(DVector::zeros(k), |acc, v| acc + v) / vertex_alphas.len() as f64;
    for g in &ray_alphas {
        interior += g;
    }
    let mut dec = setup.decompose(&interior, &p.gauge, t_star)?;
    dec.ok &= dec.j == dim;
    samples.push(dec);

    let (s_k_basis, s_k_ok) = lineality_kernel(phi, &dict);
    let bounds_ok = s_k_ok && vertex_decompositions.iter().chain(&samples).all(|x| x.ok);
    Ok(FaceReport {
        optimal_value,
        t_star,
        m,
        d,
        delta,
        dim,
        vertices: vertex_alphas.iter().map(|a| (&atom_matrix * a).iter().cloned().collect()).collect(),
        rays: ray_alphas.iter().map(|a| (&atom_matrix * a).iter().cloned().collect()).collect(),
        s_k_basis,
        s_k_ok,
        vertex_decompositions,
        samples,
        bounds_ok,
    })
}

// ---------------------------------------------------------------------------
// explicit polyhedra

/// `{x : A x <= b, E x = e}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub e_mat: DMatrix<f64>,
    pub e: DVector<f64>,
}

/// Vertices and extreme rays of a line-free polyhedron.
#[derive(Debug, Clone)]
pub struct VRep {
    pub vertices: Vec<DVector<f64>>,
    pub rays: Vec<DVector<f64>>,
}

/// Smallest face containing a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceInfo {
    pub active: Vec<usize>,
    pub dim: usize,
}

pub const MAX_POLY_DIM: usize = 6;
const MAX_POLY_ROWS: usize = 24;

impl Polyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, e_mat: DMatrix<f64>, e: DVector<f64>) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        check_dim(e_mat.nrows(), e.len())?;
        if e_mat.nrows() > 0 {
            check_dim(a.ncols(), e_mat.ncols())?;
        }
        Ok(Polyhedron { a, b, e_mat, e })
    }

    pub fn inequalities(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.ncols();
        Polyhedron::new(a, b, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    /// `{x : |x|_1 <= 1}` via its `2^n` facets.
    pub fn l1_ball(n: usize) -> Result<Self> {
        let rows = 1usize << n;
        let a = DMatrix::from_fn(rows, n, |r, c| if r >> c & 1 == 1 { -1.0 } else { 1.0 });
        Polyhedron::inequalities(a, DVector::from_element(rows, 1.0))
    }

    pub fn orthant(n: usize) -> Result<Self> {
        Polyhedron::inequalities(-DMatrix::identity(n, n), DVector::zeros(n))
    }

    /// `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = -1.0;
            b[2 * i] = -lo;
            a[(2 * i + 1, i)] = 1.0;
            b[2 * i + 1] = hi;
        }
        Polyhedron::inequalities(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn scale(&self) -> f64 {
        1.0 + self.b.amax().max(self.e.amax())
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let s = tol * self.scale();
        (&self.a * x - &self.b).iter().all(|&v| v <= s) && (&self.e_mat * x - &self.e).iter().all(|&v| v.abs() <= s)
    }

    fn active(&self, x: &DVector<f64>) -> Vec<usize> {
        let s = ORACLE_TOL * self.scale();
        let r = &self.a * x - &self.b;
        (0..r.len()).filter(|&i| r[i].abs() <= s).collect()
    }

    fn stacked_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let n = self.dim();
        let q = self.e_mat.nrows();
        DMatrix::from_fn(q + rows.len(), n, |r, c| if r < q { self.e_mat[(r, c)] } else { self.a[(rows[r - q], c)] })
    }

    /// Vertices and extreme rays by active-set enumeration.
    pub fn enumerate(&self) -> Result<VRep> {
        let n = self.dim();
        if n > MAX_POLY_DIM || self.a.nrows() > MAX_POLY_ROWS {
            return Err(Error::TooLarge(format!("polyhedron with {n} dims and {} rows", self.a.nrows())));
        }
        let all: Vec<usize> = (0..self.a.nrows()).collect();
        if linalg::rank(&self.stacked_rows(&all), RANK_RTOL) < n {
            return Err(Error::ContainsLine);
        }
        let req = self.e_mat.nrows();
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        let mut rays: Vec<DVector<f64>> = Vec::new();
        let push_unique = |list: &mut Vec<DVector<f64>>, v: DVector<f64>| {
            if !list.iter().any(|w| (w - &v).amax() <= 1e-8 * (1.0 + v.amax())) {
                list.push(v);
            }
        };
        for_each_subset(self.a.nrows(), n, |s| {
            let m = self.stacked_rows(s);
            let rk = linalg::rank(&m, RANK_RTOL);
            if rk == n {
                let mut rhs = DVector::zeros(req + s.len());
                rhs.rows_mut(0, req).copy_from(&self.e);
                for (i, &row) in s.iter().enumerate() {
                    rhs[req + i] = self.b[row];
                }
                let x = linalg::lstsq(&m, &rhs);
                if (&m * &x - &rhs).amax() <= ORACLE_TOL * self.scale() && self.contains(&x, ORACLE_TOL) {
                    push_unique(&mut vertices, x);
                }
            }
            if rk == n - 1 {
                let ns = linalg::null_space(&m, RANK_RTOL);
                if ns.ncols() == 1 {
                    let d = ns.column(0).into_owned();
                    for dir in [d.clone(), -d] {
                        let ad = &self.a * &dir;
                        if ad.iter().all(|&v| v <= ORACLE_TOL) {
                            let dir = &dir / dir.amax();
                            push_unique(&mut rays, dir);
                        }
                    }
                }
            }
        });
        Ok(VRep { vertices, rays })
    }

    /// Smallest face containing `x`: its active inequality set and the
    /// dimension of its affine hull.
    pub fn minimal_face(&self, x: &DVector<f64>) -> FaceInfo {
        let active = self.active(x);
        let dim = self.dim() - linalg::rank(&self.stacked_rows(&active), RANK_RTOL);
        FaceInfo { active, dim }
    }
}

/// Is `x` a convex combination of `vertices` plus a conic combination of
/// `rays`? Exact nonnegative least squares on `[V R; 1 0]`.
pub fn in_hull(x: &DVector<f64>, vrep: &VRep) -> bool {
    let n = x.len();
    let cols: Vec<DVector<f64>> = vrep
        .vertices
        .iter()
        .map(|v| v.clone().insert_row(n, 1.0))
        .chain(vrep.rays.iter().map(|r| r.clone().insert_row(n, 0.0)))
        .collect();
    if cols.is_empty() {
        return false;
    }
    let m = linalg::hstack(&cols, n + 1);
    let target = x.clone().insert_row(n, 1.0);
    let w = nnls_linear(&m, &target, &DVector::zeros(cols.len()), 1e-14);
    (&m * w - target).amax() <= 1e-8 * (1.0 + x.amax())
}

/// Samples points of the polyhedron (uniformly in its affine hull, inside a
/// box around the vertices) and checks each against the vertex/ray
/// reconstruction.
pub fn check_klee_reconstruction(poly: &Polyhedron, samples: usize, seed: u64) -> Result<bool> {
    let vrep = poly.enumerate()?;
    if vrep.vertices.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = poly.dim();
    let x0 = vrep.vertices[0].clone();
    // implicit equalities: rows tight at every vertex and flat along every ray
    let s = ORACLE_TOL * poly.scale();
    let implicit: Vec<usize> = (0..poly.a.nrows())
        .filter(|&i| {
            let row = poly.a.row(i);
            vrep.vertices.iter().all(|v| ((row * v)[0] - poly.b[i]).abs() <= s)
                && vrep.rays.iter().all(|r| (row * r)[0].abs() <= s)
        })
        .collect();
    let hull_rows = poly.stacked_rows(&implicit);
    let basis =
        if hull_rows.nrows() == 0 { DMatrix::identity(n, n) } else { linalg::null_space(&hull_rows, RANK_RTOL) };
    let k = basis.ncols();
    if k == 0 {
        return Ok(in_hull(&x0, &vrep));
    }
    // box in affine coordinates covering the vertices with a margin
    let coords: Vec<DVector<f64>> = vrep.vertices.iter().map(|v| basis.tr_mul(&(v - &x0))).collect();
    let mut lo = DVector::from_element(k, f64::INFINITY);
    let mut hi = DVector::from_element(k, f64::NEG_INFINITY);
    for c in &coords {
        lo = lo.inf(c);
        hi = hi.sup(c);
    }
    let span = (&hi - &lo).amax().max(1.0);
    lo.add_scalar_mut(-0.5 * span);
    hi.add_scalar_mut(0.5 * span);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = 0;
    let mut tries = 0;
    while found < samples && tries < 10_000 * samples.max(1) {
        tries += 1;
        let z = DVector::from_fn(k, |i, _| rng.gen_range(lo[i]..=hi[i]));
        let x = &x0 + &basis * z;
        if !poly.contains(&x, ORACLE_TOL) {
            continue;
        }
        found += 1;
        if !in_hull(&x, &vrep) {
            if vrep.rays.is_empty() {
                return Err(Error::UnboundedWithoutRays);
            }
            return Ok(false);
        }
    }
    Ok(found == samples)
}

/// Checks that minimal faces behave as a partition on the sample points:
/// each point lies in the relative interior of its face (an open segment
/// through it in every face direction), equal active sets share a face
/// (their midpoint keeps the active set), and distinct faces are disjoint
/// (the midpoint of two points has exactly the common active set).
pub fn check_face_partition(poly: &Polyhedron, points: &[DVector<f64>]) -> bool {
    if poly.dim() > 4 {
        return false;
    }
    let faces: Vec<FaceInfo> = points.iter().map(|p| poly.minimal_face(p)).collect();
    for (p, face) in points.iter().zip(&faces) {
        if !poly.contains(p, ORACLE_TOL) {
            return false;
        }
        let dirs = linalg::null_space(&poly.stacked_rows(&face.active), RANK_RTOL);
        if dirs.ncols() != face.dim {
            return false;
        }
        let slack = (0..poly.a.nrows())
            .filter(|i| !face.active.contains(i))
            .map(|i| poly.b[i] - (poly.a.row(i) * p)[0])
            .fold(f64::INFINITY, f64::min);
        let eps = if slack.is_finite() { 0.5 * slack / (1.0 + poly.a.amax() * n_sqrt(poly.dim())) } else { 1.0 };
        for c in dirs.column_iter() {
            for s in [1.0, -1.0] {
                let q = p + c * (s * eps);
                if !poly.contains(&q, ORACLE_TOL) || poly.minimal_face(&q).active != face.active {
                    return false;
                }
            }
        }
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let mid = (&points[i] + &points[j]) * 0.5;
            let common: Vec<usize> = faces[i].active.iter().filter(|x| faces[j].active.contains(x)).cloned().collect();
            if poly.minimal_face(&mid).active != common {
                return false;
            }
        }
    }
    true
}

fn n_sqrt(n: usize) -> f64 {
    (n as f64).sqrt()
}
