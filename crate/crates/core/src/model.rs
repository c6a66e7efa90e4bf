//! Data model: signals, atoms, gauges, sensing operators, data-fit terms
//! and the quantities `d` (dimension of the measured lineality space) and
//! `delta` (whether the optimal gauge value is the global infimum).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::tvgrad::TvGrid;

/// A discretised signal `u` in `R^n`.
pub type Signal = DVector<f64>;

/// Absolute tolerance on `t_star` for the `delta` test.
pub const TOL_DELTA: f64 = 1e-9;

/// Relative tolerance for `EqualityIndicator` feasibility: `|Φu - y|_2 <= tol (1 + |y|_2)`.
pub const EQUALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomKind {
    ExtremePoint,
    RayDirection,
}

/// Family-specific identifier of an atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AtomLabel {
    /// `±e_i`
    Coordinate { index: usize, sign: Sign },
    /// `±δ_x` on a grid node
    Node { index: usize, position: f64, sign: Sign },
    /// `e_i` spanning an extreme ray of the orthant
    Ray { index: usize },
    /// `v v^T` spanning an extreme ray of the PSD cone
    Rank1 { v: Vec<f64> },
    /// `±` unit step jumping between samples `jump` and `jump + 1`
    Step { jump: usize, sign: Sign },
    /// `±1_F / Per(F)` for a set of grid cells
    Indicator { cells: Vec<usize>, sign: Sign },
    /// the extreme point `0` of a cone
    Zero,
}

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomLabel::Coordinate { index, sign } => write!(f, "{sign}e{index}"),
            AtomLabel::Node { index, position, sign } => write!(f, "{sign}delta[{index}@{position}]"),
            AtomLabel::Ray { index } => write!(f, "ray{index}"),
            AtomLabel::Rank1 { v } => {
                write!(f, "vvT[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x:.6}")?;
                }
                f.write_str("]")
            }
            AtomLabel::Step { jump, sign } => write!(f, "{sign}step{jump}"),
            AtomLabel::Indicator { cells, sign } => {
                write!(f, "{sign}1F[")?;
                for (i, c) in cells.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("]")
            }
            AtomLabel::Zero => f.write_str("zero"),
        }
    }
}

/// An extreme point (cost 1) or ray direction (cost 0) of `C_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub vector: Signal,
    pub kind: AtomKind,
    pub cost: f64,
    pub label: AtomLabel,
}

impl Atom {
    pub fn extreme(vector: Signal, label: AtomLabel) -> Self {
        Atom { vector, kind: AtomKind::ExtremePoint, cost: 1.0, label }
    }

    pub fn ray(vector: Signal, label: AtomLabel) -> Self {
        Atom { vector, kind: AtomKind::RayDirection, cost: 0.0, label }
    }

    /// The extreme point `0` of a cone.
    pub fn zero(n: usize) -> Self {
        Atom { vector: DVector::zeros(n), kind: AtomKind::ExtremePoint, cost: 0.0, label: AtomLabel::Zero }
    }

    pub fn is_zero(&self) -> bool {
        self.label == AtomLabel::Zero
    }

    pub fn is_ray(&self) -> bool {
        self.kind == AtomKind::RayDirection
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    L1Ball,
    MeasureMass,
    NonnegOrthant,
    PsdCone,
    GeneralizedTV1D,
    TVGradient2D,
}

impl FamilyTag {
    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::L1Ball => "L1Ball",
            FamilyTag::MeasureMass => "MeasureMass",
            FamilyTag::NonnegOrthant => "NonnegOrthant",
            FamilyTag::PsdCone => "PsdCone",
            FamilyTag::GeneralizedTV1D => "GeneralizedTV1D",
            FamilyTag::TVGradient2D => "TVGradient2D",
        }
    }
}

/// Family parameters, including the discretisation grid where relevant.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    L1Ball { n: usize },
    MeasureMass { grid: Vec<f64> },
    NonnegOrthant { n: usize },
    PsdCone { p: usize },
    GeneralizedTV1D { n: usize },
    TVGradient2D(TvGrid),
}

impl Family {
    pub fn tag(&self) -> FamilyTag {
        match self {
            Family::L1Ball { .. } => FamilyTag::L1Ball,
            Family::MeasureMass { .. } => FamilyTag::MeasureMass,
            Family::NonnegOrthant { .. } => FamilyTag::NonnegOrthant,
            Family::PsdCone { .. } => FamilyTag::PsdCone,
            Family::GeneralizedTV1D { .. } => FamilyTag::GeneralizedTV1D,
            Family::TVGradient2D(_) => FamilyTag::TVGradient2D,
        }
    }
}

/// A regularizer described by its atoms. Built through
/// [`crate::families::build_family`].
#[derive(Debug, Clone)]
pub struct GaugeModel {
    pub(crate) family: Family,
    pub(crate) ambient_dim: usize,
    /// Orthonormal basis of `C_K`.
    pub(crate) lineality: Vec<Signal>,
    /// Eagerly enumerated atoms of `C_B` (empty for procedural families).
    pub(crate) atoms: Vec<Atom>,
}

impl GaugeModel {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn tag(&self) -> FamilyTag {
        self.family.tag()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn lineality_basis(&self) -> &[Signal] {
        &self.lineality
    }

    /// `n × k` matrix whose columns span `C_K`.
    pub fn lineality_matrix(&self) -> DMatrix<f64> {
        linalg::hstack(&self.lineality, self.ambient_dim)
    }

    /// Enumerated atoms, or `None` for procedural families (PSD, TV).
    pub fn atoms(&self) -> Option<&[Atom]> {
        match self.family {
            Family::PsdCone { .. } | Family::TVGradient2D(_) => None,
            _ => Some(&self.atoms),
        }
    }

    /// Conic gauges are indicators: all atoms are cost-0 rays.
    pub fn is_conic(&self) -> bool {
        matches!(self.family, Family::NonnegOrthant { .. } | Family::PsdCone { .. })
    }

    pub fn is_polyhedral(&self) -> bool {
        !matches!(self.family, Family::PsdCone { .. })
    }

    /// `inf_u J_C(u)`; zero for every built-in family since `J_C(0) = 0`.
    pub fn infimum(&self) -> f64 {
        0.0
    }

    /// `J_C(u) = inf { λ >= 0 : u ∈ λC }`.
    pub fn evaluate(&self, u: &Signal) -> Result<f64> {
        check_dim(self.ambient_dim, u.len())?;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("signal"));
        }
        Ok(match &self.family {
            Family::L1Ball { .. } | Family::MeasureMass { .. } => u.lp_norm(1),
            Family::NonnegOrthant { .. } => {
                if u.iter().all(|&x| x >= 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Family::PsdCone { p } => {
                if crate::families::is_psd(&unvec(u, *p), crate::families::TOL_PSD) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Family::GeneralizedTV1D { .. } => u.as_slice().windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
            Family::TVGradient2D(grid) => grid.tv(u.as_slice()),
        })
    }

    /// Membership test `u ∈ τ C`.
    pub fn contains(&self, u: &Signal, tau: f64) -> Result<bool> {
        let j = self.evaluate(u)?;
        Ok(j <= tau + 1e-12 * tau.max(1.0))
    }
}

/// Free-function form of [`GaugeModel::evaluate`].
pub fn evaluate_gauge(gauge: &GaugeModel, u: &Signal) -> Result<f64> {
    gauge.evaluate(u)
}

/// Reshapes a column-major vectorised `p × p` matrix.
pub fn unvec(u: &Signal, p: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(p, p, u.as_slice())
}

/// Column-major vectorisation.
pub fn vec_of(m: &DMatrix<f64>) -> Signal {
    DVector::from_column_slice(m.as_slice())
}

/// Sensing operator `Φ : R^n -> R^m` stored as a dense `m × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOperator {
    matrix: DMatrix<f64>,
}

impl SensingOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidParameter("sensing operator needs m >= 1 and n >= 1".into()));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sensing operator"));
        }
        Ok(SensingOperator { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidParameter("sensing operator needs at least one row".into()));
        }
        let n = rows[0].len();
        for r in rows {
            check_dim(n, r.len())?;
        }
        Self::new(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
    }

    /// i.i.d. `N(0, 1/m)` entries from a seeded ChaCha stream (row-major draw order).
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (m.max(1) as f64).sqrt();
        let mut data = vec![0.0; m * n];
        for v in data.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = z * scale;
        }
        Self::new(DMatrix::from_row_slice(m, n, &data))
    }

    /// Rows `e_i^T` sampling the signal at `indices`.
    pub fn point_samples(indices: &[usize], n: usize) -> Result<Self> {
        let mut mat = DMatrix::zeros(indices.len(), n);
        for (r, &i) in indices.iter().enumerate() {
            if i >= n {
                return Err(Error::InvalidParameter(format!("sample index {i} out of range for n = {n}")));
            }
            mat[(r, i)] = 1.0;
        }
        Self::new(mat)
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, u: &Signal) -> Result<DVector<f64>> {
        check_dim(self.n(), u.len())?;
        Ok(&self.matrix * u)
    }

    pub fn adjoint(&self, r: &DVector<f64>) -> Result<Signal> {
        check_dim(self.m(), r.len())?;
        Ok(self.matrix.tr_mul(r))
    }
}

/// Data-fit term `f` applied to `z = Φu`.
#[derive(Debug, Clone, PartialEq)]
pub enum DataFit {
    /// `½ |z - y|²`
    SquaredL2 { y: DVector<f64> },
    /// `0` if `z = y`, `+∞` otherwise
    EqualityIndicator { y: DVector<f64> },
    /// `Σ_i min(½ (z_i - y_i)², cap)`
    TruncatedQuadratic { y: DVector<f64>, cap: f64 },
}

impl DataFit {
    pub fn truncated(y: DVector<f64>, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::InvalidParameter(format!("truncation cap must be positive, got {cap}")));
        }
        Ok(DataFit::TruncatedQuadratic { y, cap })
    }

    pub fn y(&self) -> &DVector<f64> {
        match self {
            DataFit::SquaredL2 { y } | DataFit::EqualityIndicator { y } | DataFit::TruncatedQuadratic { y, .. } => y,
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, DataFit::TruncatedQuadratic { .. })
    }

    pub fn value(&self, z: &DVector<f64>) -> Result<f64> {
        let y = self.y();
        check_dim(y.len(), z.len())?;
        Ok(match self {
            DataFit::SquaredL2 { .. } => 0.5 * (z - y).norm_squared(),
            DataFit::EqualityIndicator { .. } => {
                if (z - y).norm() <= EQUALITY_TOL * (1.0 + y.norm()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            DataFit::TruncatedQuadratic { cap, .. } => {
                z.iter().zip(y.iter()).map(|(a, b)| (0.5 * (a - b) * (a - b)).min(*cap)).sum()
            }
        })
    }

    /// Gradient of `f` at `z`; the equality indicator has none.
    pub fn gradient(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            DataFit::SquaredL2 { y } => Some(z - y),
            DataFit::EqualityIndicator { .. } => None,
            DataFit::TruncatedQuadratic { y, cap } => Some(DVector::from_fn(z.len(), |i, _| {
                let r = z[i] - y[i];
                if 0.5 * r * r < *cap {
                    r
                } else {
                    0.0
                }
            })),
        }
    }
}

/// `min_u f(Φu) + reg_weight · J_C(u)`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub gauge: GaugeModel,
    pub phi: SensingOperator,
    pub fit: DataFit,
    pub reg_weight: f64,
}

impl Problem {
    pub fn new(gauge: GaugeModel, phi: SensingOperator, fit: DataFit, reg_weight: f64) -> Result<Self> {
        check_dim(gauge.ambient_dim(), phi.n())?;
        check_dim(phi.m(), fit.y().len())?;
        if fit.y().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("measurements"));
        }
        if !(reg_weight > 0.0 && reg_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("reg_weight must be positive, got {reg_weight}")));
        }
        Ok(Problem { gauge, phi, fit, reg_weight })
    }

    pub fn m(&self) -> usize {
        self.phi.m()
    }

    pub fn n(&self) -> usize {
        self.phi.n()
    }
}

/// `f(Φu) + reg_weight · J_C(u)`, with `+∞` propagating.
pub fn evaluate_objective(p: &Problem, u: &Signal) -> Result<f64> {
    let z = p.phi.apply(u)?;
    let fit = p.fit.value(&z)?;
    let j = p.gauge.evaluate(u)?;
    if fit.is_infinite() || j.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(fit + p.reg_weight * j)
}

/// `Φ(C_K)`: its dimension `d`, an orthonormal basis, and the rows `Q`
/// spanning its orthogonal complement in `R^m`.
#[derive(Debug, Clone)]
pub struct LinealityImage {
    pub d: usize,
    /// `m × d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// `(m - d) × m`, orthonormal rows, `Q · basis = 0`.
    pub quotient: DMatrix<f64>,
}

pub fn compute_d(gauge: &GaugeModel, phi: &SensingOperator) -> LinealityImage {
    let m = phi.m();
    let basis = if gauge.lineality_basis().is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        let image = phi.matrix() * gauge.lineality_matrix();
        linalg::column_space(&image, linalg::RANK_RTOL)
    };
    let quotient = linalg::orthogonal_complement_rows(&basis, m);
    LinealityImage { d: basis.ncols(), basis, quotient }
}

/// `1` iff `t_star` equals `inf_u J_C(u)` up to [`TOL_DELTA`].
pub fn compute_delta(gauge: &GaugeModel, t_star: f64) -> u8 {
    u8::from((t_star - gauge.infimum()).abs() <= TOL_DELTA)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub alpha: f64,
    pub atom: Atom,
}

/// `u = u_K + Σ α_k ψ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicRepresentation {
    pub u_k: Signal,
    pub terms: Vec<Term>,
}

impl AtomicRepresentation {
    pub fn new(u_k: Signal, terms: Vec<Term>) -> Self {
        AtomicRepresentation { u_k, terms }
    }

    pub fn empty(n: usize) -> Self {
        AtomicRepresentation { u_k: DVector::zeros(n), terms: Vec::new() }
    }

    pub fn r(&self) -> usize {
        self.terms.len()
    }

    pub fn assemble(&self) -> Result<Signal> {
        let mut u = self.u_k.clone();
        for t in &self.terms {
            check_dim(u.len(), t.atom.vector.len())?;
            u.axpy(t.alpha, &t.atom.vector, 1.0);
        }
        Ok(u)
    }

    /// `Σ α_k cost_k`.
    pub fn cost(&self) -> f64 {
        self.terms.iter().map(|t| t.alpha * t.atom.cost).sum()
    }

    /// Invariant violations: non-positive weights, dimension mismatches,
    /// atoms with a lineality component, and gauge/cost mismatch (which
    /// flags cancelling atoms such as `e_1` and `-e_1` together).
    pub fn check_invariants(&self, gauge: &GaugeModel) -> Vec<String> {
        let mut issues = Vec::new();
        let n = gauge.ambient_dim();
        if self.u_k.len() != n {
            issues.push(format!("u_K has dimension {} instead of {n}", self.u_k.len()));
            return issues;
        }
        for (k, t) in self.terms.iter().enumerate() {
            if t.alpha.is_nan() || t.alpha <= 0.0 {
                issues.push(format!("term {k}: alpha {} is not positive", t.alpha));
            }
            if t.atom.vector.len() != n {
                issues.push(format!("term {k}: atom dimension {}", t.atom.vector.len()));
                return issues;
            }
            for b in gauge.lineality_basis() {
                let c = b.dot(&t.atom.vector);
                if c.abs() > 1e-10 {
                    issues.push(format!("term {k}: atom has lineality component {c:.3e}"));
                }
            }
        }
        if self.terms.iter().all(|t| !t.atom.is_ray()) {
            if let Ok(u) = self.assemble() {
                if let Ok(j) = gauge.evaluate(&u) {
                    let c = self.cost();
                    if j < c - 1e-9 * c.max(1.0) {
                        issues.push(format!("gauge {j:.6e} below representation cost {c:.6e} (cancelling atoms)"));
                    }
                }
            }
        }
        issues
    }
}
