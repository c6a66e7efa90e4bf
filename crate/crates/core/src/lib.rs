//! Gauge-regularized inverse problems
//!
//! ```text
//! min_u  f(Φu) + λ J_C(u)
//! ```
//!
//! with `J_C` the gauge of a closed convex set `C` described by its atoms
//! (extreme points and extreme rays). The crate provides the atom families
//! (ℓ1 ball, measures on a grid, nonnegative orthant, PSD cone, generalized
//! TV in 1-D, total gradient variation on pixel grids), a fully corrective
//! Frank–Wolfe solver that keeps an explicit atomic representation,
//! Carathéodory-style sparsification down to `m - d + δ` atoms, and
//! brute-force oracles for small instances.

pub mod caratheodory;
pub mod error;
pub mod families;
pub mod linalg;
pub mod maxflow;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod tvgrad;

pub use caratheodory::{certify_bound, sparsify, theorem_bound, Diagnostic, Pivot, SparsifyReport};
pub use error::{Error, Result};
pub use families::{build_family, FamilySpec, Lmo};
pub use model::{
    compute_d, compute_delta, evaluate_gauge, evaluate_objective, Atom, AtomKind, AtomLabel, AtomicRepresentation,
    DataFit, Family, FamilyTag, GaugeModel, LinealityImage, Problem, SensingOperator, Sign, Signal, Term,
};
pub use oracle::{
    brute_force_lmo, check_face_partition, check_klee_reconstruction, enumerate_optimal_face, FaceReport, Polyhedron,
};
pub use solver::{solve, solve_master, solve_tiny_nonconvex, GridSpec, SolveResult, SolverConfig};
