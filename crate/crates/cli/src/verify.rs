//! Randomized oracle suites. Instance `i` of a run uses seed `seed + i`,
//! so any failure replays with `--seed <failing seed> --count 1`.

use std::fmt;
use std::str::FromStr;

use gaugekit::caratheodory::certify_bound;
use gaugekit::oracle::{brute_force_lmo, enumerate_optimal_face, Polyhedron};
use gaugekit::tvgrad::{brute_force_ratio, lmo_tv, TvGrid};
use gaugekit::{
    build_family, check_face_partition, check_klee_reconstruction, solve, DataFit, FamilySpec, Problem,
    SensingOperator, SolverConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lmo,
    Faces,
    Klee,
    Bounds,
    Tv,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lmo, Suite::Faces, Suite::Klee, Suite::Bounds, Suite::Tv];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lmo => "lmo",
            Suite::Faces => "faces",
            Suite::Klee => "klee",
            Suite::Bounds => "bounds",
            Suite::Tv => "tv",
        }
    }

    fn check(self, seed: u64) -> Result<(), String> {
        match self {
            Suite::Lmo => lmo_case(seed),
            Suite::Faces => faces_case(seed),
            Suite::Klee => klee_case(seed),
            Suite::Bounds => bounds_case(seed),
            Suite::Tv => tv_case(seed),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            format!("unknown suite {s:?} (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub suite: Suite,
    pub first_seed: u64,
    pub count: u64,
    pub passed: u64,
    /// Sorted by seed.
    pub failures: Vec<Failure>,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `count` instances on the current rayon pool.
pub fn run_suite(suite: Suite, seed: u64, count: u64) -> Summary {
    let mut failures: Vec<Failure> = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let s = seed.wrapping_add(i);
            suite.check(s).err().map(|reason| Failure { seed: s, reason })
        })
        .collect();
    failures.sort_by_key(|f| f.seed);
    Summary { suite, first_seed: seed, count, passed: count - failures.len() as u64, failures }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn small_int(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-2i32..=2) as f64
}

/// Tiny integer polyhedral instance; every fifth one duplicates a column
/// of `Φ` with the opposite sign to create rays and larger faces.
pub fn tiny_polyhedral(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=8);
    let m = rng.gen_range(1..=4).min(n - 1);
    let spec = match seed % 3 {
        0 => FamilySpec::L1Ball { n },
        1 => FamilySpec::NonnegOrthant { n },
        _ => FamilySpec::GeneralizedTV1D { n },
    };
    let mut phi = DMatrix::from_fn(m, n, |_, _| small_int(&mut rng));
    if seed.is_multiple_of(5) {
        let src = phi.column(0).into_owned();
        phi.set_column(n - 1, &(-src));
    }
    let equality = seed.is_multiple_of(2);
    let u0 = DVector::from_fn(n, |_, _| if rng.gen_bool(0.4) { rng.gen_range(0i32..=2) as f64 } else { 0.0 });
    let y = if equality { &phi * &u0 } else { DVector::from_fn(m, |_, _| small_int(&mut rng)) };
    let fit = if equality { DataFit::EqualityIndicator { y } } else { DataFit::SquaredL2 { y } };
    let lambda = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
    Problem::new(build_family(&spec).expect("valid family"), SensingOperator::new(phi).expect("finite"), fit, lambda)
        .expect("consistent sizes")
}

fn lmo_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = match seed % 5 {
        0 => FamilySpec::L1Ball { n: 10 },
        1 => FamilySpec::MeasureMass { grid: (0..10).map(|i| i as f64 / 9.0).collect() },
        2 => FamilySpec::NonnegOrthant { n: 10 },
        3 => FamilySpec::GeneralizedTV1D { n: 10 },
        _ => FamilySpec::PsdCone { p: 3 },
    };
    let gauge = build_family(&spec).map_err(|e| e.to_string())?;
    let n = gauge.ambient_dim();
    let g = if let FamilySpec::PsdCone { p } = spec {
        let a = DMatrix::from_fn(p, p, |_, _| normal(&mut rng));
        DVector::from_column_slice(((&a + a.transpose()) * 0.5).as_slice())
    } else if seed.is_multiple_of(2) {
        DVector::from_fn(n, |_, _| normal(&mut rng))
    } else {
        // integer gradients exercise the tie-breaks
        DVector::from_fn(n, |_, _| small_int(&mut rng))
    };
    let fast = gauge.lmo(&g).map_err(|e| e.to_string())?;
    let slow = brute_force_lmo(&gauge, &g, seed).map_err(|e| e.to_string())?;
    if slow.exact {
        if fast.atom.label != slow.atom.label {
            return Err(format!("{}: atom {} vs brute force {}", gauge.tag().name(), fast.atom.label, slow.atom.label));
        }
    } else if (fast.value - slow.value.min(0.0)).abs() > 1e-6 {
        return Err(format!("{}: value {} vs sampled {}", gauge.tag().name(), fast.value, slow.value));
    }
    Ok(())
}

fn faces_case(seed: u64) -> Result<(), String> {
    let p = tiny_polyhedral(seed);
    let face = enumerate_optimal_face(&p).map_err(|e| e.to_string())?;
    if !face.s_k_ok {
        return Err("the two kernel computations of S_K disagree".into());
    }
    if let Some(bad) = face.vertex_decompositions.iter().chain(&face.samples).find(|s| !s.ok) {
        return Err(format!("point {:?} on a {}-face uses {} atoms, bound {}", bad.point, bad.j, bad.count, bad.bound));
    }
    if !face.bounds_ok {
        return Err("bound check failed".into());
    }
    Ok(())
}

fn bounds_case(seed: u64) -> Result<(), String> {
    let p = tiny_polyhedral(seed);
    let face = enumerate_optimal_face(&p).map_err(|e| e.to_string())?;
    let res = solve(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let scale = face.optimal_value.abs().max(1.0);
    if (res.objective - face.optimal_value).abs() > 1e-6 * scale {
        return Err(format!("solver objective {} vs enumerated optimum {}", res.objective, face.optimal_value));
    }
    let (_, report) = certify_bound(&res, &p).map_err(|e| e.to_string())?;
    if !report.bound_met {
        return Err(format!("{} atoms after sparsification, bound {}", report.r_out, report.bound));
    }
    if !face.bounds_ok {
        return Err("bound fails on the enumerated face".into());
    }
    Ok(())
}

fn random_polyhedron(seed: u64) -> Polyhedron {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=3);
    let extra = rng.gen_range(1..=4);
    // x_i >= -1 keeps the polyhedron line-free; b >= 0 keeps 0 inside
    let rows = n + extra;
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for i in 0..n {
        a[(i, i)] = -1.0;
        b[i] = 1.0;
    }
    for r in n..rows {
        for c in 0..n {
            a[(r, c)] = small_int(&mut rng);
        }
        b[r] = rng.gen_range(0i32..=3) as f64;
    }
    Polyhedron::inequalities(a, b).expect("consistent sizes")
}

fn klee_case(seed: u64) -> Result<(), String> {
    let poly = random_polyhedron(seed);
    if !check_klee_reconstruction(&poly, 20, seed).map_err(|e| e.to_string())? {
        return Err("sampled point outside conv(vertices) + cone(rays)".into());
    }
    let vrep = poly.enumerate().map_err(|e| e.to_string())?;
    let mut points = vrep.vertices.clone();
    for i in 0..vrep.vertices.len() {
        for j in i + 1..vrep.vertices.len() {
            points.push((&vrep.vertices[i] + &vrep.vertices[j]) * 0.5);
        }
        for r in &vrep.rays {
            points.push(&vrep.vertices[i] + r);
        }
    }
    if !check_face_partition(&poly, &points) {
        return Err("minimal faces do not partition the sample points".into());
    }
    Ok(())
}

fn tv_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = [(3, 3), (2, 4), (4, 4), (1, 5)][(seed % 4) as usize];
    let grid = TvGrid::new(h, w).map_err(|e| e.to_string())?;
    let g: Vec<f64> =
        (0..grid.len()).map(|_| if seed.is_multiple_of(2) { normal(&mut rng) } else { small_int(&mut rng) }).collect();
    let fast = lmo_tv(&grid, &g).map_err(|e| e.to_string())?;
    let (_, _, ratio) = brute_force_ratio(&grid, &g).map_err(|e| e.to_string())?;
    if (fast.ratio - ratio).abs() > 1e-9 * (1.0 + ratio) {
        return Err(format!("{h}x{w}: ratio {} vs brute force {ratio}", fast.ratio));
    }
    Ok(())
}
