//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers or arrays and returns a JSON string,
//! so the page needs no generated TypeScript types.

use gaugekit::caratheodory::certify_bound;
use gaugekit::tvgrad::{lmo_tv, TvGrid};
use gaugekit::{build_family, solve, AtomLabel, DataFit, FamilySpec, Problem, SensingOperator, Sign, SolverConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct TvLmoView {
    /// `+1` when the set carries `g`'s negative mass, `-1` otherwise.
    pub sign: i8,
    pub cells: Vec<usize>,
    pub components: Vec<Vec<usize>>,
    pub ratio: f64,
    pub perimeter: u64,
    pub degenerate: bool,
}

#[derive(Debug, Serialize)]
pub struct Jump {
    /// The step sits between samples `at` and `at + 1`.
    pub at: usize,
    pub height: f64,
}

#[derive(Debug, Serialize)]
pub struct FitView {
    pub u: Vec<f64>,
    pub jumps: Vec<Jump>,
    pub objective: f64,
    pub r_before: usize,
    pub r_after: usize,
    pub bound: i64,
    pub bound_met: bool,
}

#[derive(Debug, Serialize)]
pub struct Spike {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct RepresenterView {
    pub truth: Vec<f64>,
    pub u: Vec<f64>,
    pub spikes: Vec<Spike>,
    pub objective: f64,
    pub r_before: usize,
    pub r_after: usize,
    pub bound: i64,
    pub bound_met: bool,
}

fn sign_value(s: Sign) -> i8 {
    match s {
        Sign::Plus => 1,
        Sign::Minus => -1,
    }
}

/// Best `±1_F / Per(F)` against the gradient `g` on an `h × w` grid.
pub fn tv_lmo_view(h: usize, w: usize, g: &[f64]) -> Result<TvLmoView, String> {
    let grid = TvGrid::new(h, w).map_err(|e| e.to_string())?;
    let lmo = lmo_tv(&grid, g).map_err(|e| e.to_string())?;
    Ok(TvLmoView {
        sign: sign_value(lmo.atom.sign),
        cells: lmo.atom.set.cells(),
        components: lmo.components.iter().map(|c| c.set.cells()).collect(),
        ratio: lmo.ratio,
        perimeter: lmo.atom.perimeter,
        degenerate: lmo.degenerate,
    })
}

/// Generalized-TV fit of point samples `(indices[k], values[k])` on
/// `n` positions.
pub fn gtv1d_fit_view(n: usize, indices: &[usize], values: &[f64], lambda: f64) -> Result<FitView, String> {
    if indices.len() != values.len() {
        return Err(format!("{} indices but {} values", indices.len(), values.len()));
    }
    let gauge = build_family(&FamilySpec::GeneralizedTV1D { n }).map_err(|e| e.to_string())?;
    let phi = SensingOperator::point_samples(indices, n).map_err(|e| e.to_string())?;
    let fit = DataFit::SquaredL2 { y: DVector::from_column_slice(values) };
    let p = Problem::new(gauge, phi, fit, lambda).map_err(|e| e.to_string())?;
    let res = solve(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let (rep, report) = certify_bound(&res, &p).map_err(|e| e.to_string())?;
    let u = rep.assemble().map_err(|e| e.to_string())?;
    let jumps = rep
        .terms
        .iter()
        .filter_map(|t| match t.atom.label {
            AtomLabel::Step { jump, sign } => Some(Jump { at: jump, height: f64::from(sign_value(sign)) * t.alpha }),
            _ => None,
        })
        .collect();
    Ok(FitView {
        u: u.iter().cloned().collect(),
        jumps,
        objective: report.objective_out,
        r_before: report.r_in,
        r_after: report.r_out,
        bound: report.bound,
        bound_met: report.bound_met,
    })
}

/// ℓ1-regularized recovery of a `k`-sparse spike train from `m` Gaussian
/// measurements; `seed` fixes both `Φ` and the spikes.
pub fn l1_representer_view(m: usize, n: usize, k: usize, lambda: f64, seed: u64) -> Result<RepresenterView, String> {
    if k > n {
        return Err(format!("{k} spikes do not fit in {n} positions"));
    }
    let phi = SensingOperator::gaussian(m, n, seed).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut truth = DVector::zeros(n);
    let mut placed = 0;
    while placed < k {
        let i = rng.gen_range(0..n);
        if truth[i] == 0.0 {
            let v: f64 = rng.gen_range(0.5..2.0);
            truth[i] = if rng.gen_bool(0.5) { v } else { -v };
            placed += 1;
        }
    }
    let y = phi.apply(&truth).map_err(|e| e.to_string())?;
    let gauge = build_family(&FamilySpec::L1Ball { n }).map_err(|e| e.to_string())?;
    let p = Problem::new(gauge, phi, DataFit::SquaredL2 { y }, lambda).map_err(|e| e.to_string())?;
    let res = solve(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let (rep, report) = certify_bound(&res, &p).map_err(|e| e.to_string())?;
    let u = rep.assemble().map_err(|e| e.to_string())?;
    let spikes = rep
        .terms
        .iter()
        .filter_map(|t| match t.atom.label {
            AtomLabel::Coordinate { index, sign } => {
                Some(Spike { index, value: f64::from(sign_value(sign)) * t.alpha })
            }
            _ => None,
        })
        .collect();
    Ok(RepresenterView {
        truth: truth.iter().cloned().collect(),
        u: u.iter().cloned().collect(),
        spikes,
        objective: report.objective_out,
        r_before: report.r_in,
        r_after: report.r_out,
        bound: report.bound,
        bound_met: report.bound_met,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn tv_lmo(h: usize, w: usize, g: Vec<f64>) -> Result<String, JsValue> {
    to_js(tv_lmo_view(h, w, &g))
}

#[wasm_bindgen]
pub fn gtv1d_fit(n: usize, indices: Vec<usize>, values: Vec<f64>, lambda: f64) -> Result<String, JsValue> {
    to_js(gtv1d_fit_view(n, &indices, &values, lambda))
}

#[wasm_bindgen]
pub fn l1_representer(m: usize, n: usize, k: usize, lambda: f64, seed: u32) -> Result<String, JsValue> {
    to_js(l1_representer_view(m, n, k, lambda, u64::from(seed)))
}
