//! Discrete total gradient variation on an `H × W` pixel grid.
//!
//! The gauge is the anisotropic (4-connected) total variation of a signal
//! with compact support: every edge between neighbouring cells contributes
//! `|u_a - u_b|`, and every edge between a cell and the grid exterior
//! (where the signal is 0) contributes `|u_a|`. On indicators this is the
//! integer perimeter, and the extreme points of the unit ball are the
//! normalised indicators `±1_F / Per(F)`.
//!
//! The linear minimisation oracle maximises `|<g, 1_F>| / Per(F)` with
//! Dinkelbach's method; each parametric subproblem
//! `max_F <w, 1_F> - ρ Per(F)` is one s-t min-cut on the grid graph.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::maxflow::FlowGraph;
use crate::model::{Atom, AtomLabel, Sign, Signal};

/// Dinkelbach stops once the ratio improves by less than this.
pub const TOL_RATIO: f64 = 1e-10;

/// Capacities are normalised by `max |w|` and scaled by this before rounding.
const CAPACITY_SCALE: f64 = (1u64 << 40) as f64;

const MAX_DINKELBACH_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TvGrid {
    pub h: usize,
    pub w: usize,
}

impl TvGrid {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidParameter(format!("grid must be nonempty, got {h}x{w}")));
        }
        Ok(TvGrid { h, w })
    }

    pub fn len(&self) -> usize {
        self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of edges from `cell` to the grid exterior.
    pub fn exterior_edges(&self, cell: usize) -> u32 {
        let (r, c) = (cell / self.w, cell % self.w);
        u32::from(r == 0) + u32::from(r + 1 == self.h) + u32::from(c == 0) + u32::from(c + 1 == self.w)
    }

    /// Each interior 4-neighbour pair once, `(a, b)` with `a < b`.
    pub fn neighbor_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |a| {
            let (r, c) = (a / self.w, a % self.w);
            let right = (c + 1 < self.w).then_some((a, a + 1));
            let down = (r + 1 < self.h).then_some((a, a + self.w));
            right.into_iter().chain(down)
        })
    }

    fn neighbors(&self, a: usize) -> impl Iterator<Item = usize> {
        let (h, w) = (self.h, self.w);
        let (r, c) = (a / w, a % w);
        let up = (r > 0).then(|| a - w);
        let down = (r + 1 < h).then(|| a + w);
        let left = (c > 0).then(|| a - 1);
        let right = (c + 1 < w).then(|| a + 1);
        up.into_iter().chain(down).chain(left).chain(right)
    }

    /// Anisotropic TV including exterior edges.
    pub fn tv(&self, u: &[f64]) -> f64 {
        let inner: f64 = self.neighbor_pairs().map(|(a, b)| (u[a] - u[b]).abs()).sum();
        let outer: f64 = (0..self.len()).map(|a| f64::from(self.exterior_edges(a)) * u[a].abs()).sum();
        inner + outer
    }

    fn perimeter_of_mask(&self, mask: &[bool]) -> u64 {
        let cut = self.neighbor_pairs().filter(|&(a, b)| mask[a] != mask[b]).count() as u64;
        let ext: u64 = (0..self.len()).filter(|&a| mask[a]).map(|a| u64::from(self.exterior_edges(a))).sum();
        cut + ext
    }
}

/// A set of grid cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridSet {
    grid: TvGrid,
    mask: Vec<bool>,
}

impl GridSet {
    pub fn from_mask(grid: TvGrid, mask: Vec<bool>) -> Result<Self> {
        check_dim(grid.len(), mask.len())?;
        Ok(GridSet { grid, mask })
    }

    pub fn from_cells(grid: TvGrid, cells: &[usize]) -> Result<Self> {
        let mut mask = vec![false; grid.len()];
        for &c in cells {
            if c >= grid.len() {
                return Err(Error::InvalidParameter(format!("cell {c} outside {}x{} grid", grid.h, grid.w)));
            }
            mask[c] = true;
        }
        Ok(GridSet { grid, mask })
    }

    pub fn grid(&self) -> TvGrid {
        self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cells(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn indicator(&self) -> Signal {
        Signal::from_iterator(self.mask.len(), self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }))
    }

    /// 4-connected components, ordered by their smallest cell.
    pub fn components(&self) -> Vec<GridSet> {
        let n = self.mask.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if !self.mask[start] || seen[start] {
                continue;
            }
            let mut comp = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(a) = stack.pop() {
                comp[a] = true;
                for b in self.grid.neighbors(a) {
                    if self.mask[b] && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
            out.push(GridSet { grid: self.grid, mask: comp });
        }
        out
    }

    fn dot(&self, w: &[f64]) -> f64 {
        self.mask.iter().zip(w).filter(|(m, _)| **m).map(|(_, x)| *x).sum()
    }
}

/// Number of cut edges between `F` and its complement, exterior included.
pub fn perimeter(f: &GridSet) -> Result<u64> {
    if f.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(f.grid.perimeter_of_mask(&f.mask))
}

pub fn tv_gauge(grid: &TvGrid, u: &Signal) -> Result<f64> {
    check_dim(grid.len(), u.len())?;
    Ok(grid.tv(u.as_slice()))
}

/// `sign · 1_F / Per(F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorAtom {
    pub set: GridSet,
    pub sign: Sign,
    pub perimeter: u64,
}

impl IndicatorAtom {
    pub fn new(set: GridSet, sign: Sign) -> Result<Self> {
        let perimeter = perimeter(&set)?;
        Ok(IndicatorAtom { set, sign, perimeter })
    }

    pub fn vector(&self) -> Signal {
        self.set.indicator() * (self.sign.value() / self.perimeter as f64)
    }

    pub fn into_atom(self) -> Atom {
        let vector = self.vector();
        Atom::extreme(vector, AtomLabel::Indicator { cells: self.set.cells(), sign: self.sign })
    }

    /// `<w, 1_F> / Per(F)` for the unsigned set.
    fn ratio(&self, w: &[f64]) -> f64 {
        self.set.dot(w) / self.perimeter as f64
    }
}

#[derive(Debug, Clone)]
pub struct TvLmo {
    /// Best connected component.
    pub atom: IndicatorAtom,
    /// Every connected component of the min-cut set with positive ratio, best first.
    pub components: Vec<IndicatorAtom>,
    /// `|<g, 1_F>| / Per(F)` of `atom`.
    pub ratio: f64,
    /// `<g, atom>`, equal to `-ratio`.
    pub value: f64,
    /// Dinkelbach iterations summed over both signs.
    pub iterations: usize,
    /// Ratios visited by the winning sign, nondecreasing.
    pub rho_trace: Vec<f64>,
    pub degenerate: bool,
}

/// Solves `max_F <w, 1_F> - ρ Per(F)` by one min-cut. Returns the
/// inclusion-minimal maximiser (possibly empty).
fn parametric_cut(grid: &TvGrid, w: &[f64], rho: f64, scale: f64) -> Vec<bool> {
    let n = grid.len();
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2);
    let pair = (rho * scale).round() as i64;
    for (a, &wa) in w.iter().enumerate().take(n) {
        // cost of putting `a` on the source side (inside F)
        let unary = (-wa * scale).round() as i64 + i64::from(grid.exterior_edges(a)) * pair;
        if unary < 0 {
            g.add_edge(s, a, -unary);
        } else if unary > 0 {
            g.add_edge(a, t, unary);
        }
    }
    if pair > 0 {
        for (a, b) in grid.neighbor_pairs() {
            g.add_edge(a, b, pair);
            g.add_edge(b, a, pair);
        }
    }
    let (_, side) = g.min_cut(s, t);
    side[..n].to_vec()
}

struct RatioSearch {
    mask: Vec<bool>,
    ratio: f64,
    iterations: usize,
    trace: Vec<f64>,
}

/// Dinkelbach iteration for `max_{F ≠ ∅} <w, 1_F> / Per(F)`, restricted to
/// positive ratios. `None` when no set has a positive ratio.
fn dinkelbach(grid: &TvGrid, w: &[f64]) -> Option<RatioSearch> {
    let wmax = w.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if wmax == 0.0 {
        return None;
    }
    let scale = CAPACITY_SCALE / wmax;
    let mut rho = 0.0;
    let mut best: Option<(Vec<bool>, f64)> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_DINKELBACH_ITERS {
        iterations += 1;
        let mask = parametric_cut(grid, w, rho, scale);
        if !mask.iter().any(|&b| b) {
            break;
        }
        let per = grid.perimeter_of_mask(&mask) as f64;
        let dot: f64 = mask.iter().zip(w).filter(|(m, _)| **m).map(|(_, x)| *x).sum();
        let ratio = dot / per;
        if ratio > rho + TOL_RATIO * wmax.max(1.0) || best.is_none() {
            if ratio <= 0.0 {
                break;
            }
            trace.push(ratio);
            rho = ratio;
            best = Some((mask, ratio));
        } else {
            break;
        }
    }
    best.map(|(mask, ratio)| RatioSearch { mask, ratio, iterations, trace })
}

/// Linear minimisation over the indicator atoms `±1_F / Per(F)`.
pub fn lmo_tv(grid: &TvGrid, g: &[f64]) -> Result<TvLmo> {
    check_dim(grid.len(), g.len())?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let mut iterations = 0;
    let mut best: Option<(Sign, RatioSearch, Vec<f64>)> = None;
    for sign in [Sign::Plus, Sign::Minus] {
        // <g, sign 1_F> is minimised by maximising <w, 1_F> with w = -sign g
        let w: Vec<f64> = g.iter().map(|x| -sign.value() * x).collect();
        if let Some(found) = dinkelbach(grid, &w) {
            iterations += found.iterations;
            let better = match &best {
                None => true,
                Some((_, b, _)) => found.ratio > b.ratio,
            };
            if better {
                best = Some((sign, found, w));
            }
        }
    }
    let Some((sign, found, w)) = best else {
        let full = GridSet { grid: *grid, mask: vec![true; grid.len()] };
        let atom = IndicatorAtom::new(full, Sign::Plus)?;
        return Ok(TvLmo {
            components: vec![atom.clone()],
            atom,
            ratio: 0.0,
            value: 0.0,
            iterations,
            rho_trace: Vec::new(),
            degenerate: true,
        });
    };
    let set = GridSet { grid: *grid, mask: found.mask };
    let mut comps: Vec<(f64, IndicatorAtom)> = set
        .components()
        .into_iter()
        .map(|c| {
            let a = IndicatorAtom::new(c, sign).expect("components are nonempty");
            (a.ratio(&w), a)
        })
        .filter(|(r, _)| *r > 0.0)
        .collect();
    // stable: ties keep the component with the smallest cell first
    comps.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let (ratio, atom) = comps[0].clone();
    Ok(TvLmo {
        atom,
        components: comps.into_iter().map(|(_, a)| a).collect(),
        ratio,
        value: -ratio,
        iterations,
        rho_trace: found.trace,
        degenerate: false,
    })
}

/// Best `(sign, set, ratio)` by enumerating every nonempty subset; only
/// for small grids. Ties keep the first in (sign, subset bitmask) order.
pub fn brute_force_ratio(grid: &TvGrid, g: &[f64]) -> Result<(Sign, GridSet, f64)> {
    let n = grid.len();
    if n > 20 {
        return Err(Error::TooLarge(format!("{n} cells for subset enumeration")));
    }
    check_dim(n, g.len())?;
    let mut best: Option<(Sign, u32, f64)> = None;
    for sign in [Sign::Plus, Sign::Minus] {
        for bits in 1u32..(1u32 << n) {
            let mask: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            let per = grid.perimeter_of_mask(&mask) as f64;
            let dot: f64 = (0..n).filter(|&i| mask[i]).map(|i| -sign.value() * g[i]).sum();
            let ratio = dot / per;
            if best.is_none_or(|b| ratio > b.2) {
                best = Some((sign, bits, ratio));
            }
        }
    }
    let (sign, bits, ratio) = best.expect("grid has at least one cell");
    let mask = (0..n).map(|i| bits >> i & 1 == 1).collect();
    Ok((sign, GridSet { grid: *grid, mask }, ratio))
}

/// Level-set decomposition `u = Σ_k Δ_k (±1_{F_k})` over the connected
/// components of the superlevel sets `{u >= v}` (positive values) and
/// sublevel sets `{u <= -v}` (negative values). The sets form a laminar
/// family and, by the coarea formula, `Σ_k Δ_k Per(F_k) = TV(u)`.
/// Returns `(weight, atom)` pairs with `weight = Δ_k Per(F_k)`.
pub fn level_set_atoms(grid: &TvGrid, u: &[f64]) -> Result<Vec<(f64, IndicatorAtom)>> {
    check_dim(grid.len(), u.len())?;
    let mut out = Vec::new();
    for sign in [Sign::Plus, Sign::Minus] {
        let v: Vec<f64> = u.iter().map(|x| sign.value() * x).collect();
        let mut levels: Vec<f64> = v.iter().cloned().filter(|&x| x > 0.0).collect();
        levels.sort_by(|a, b| a.partial_cmp(b).expect("finite signal"));
        levels.dedup();
        let mut below = 0.0;
        for level in levels {
            let mask: Vec<bool> = v.iter().map(|&x| x >= level).collect();
            let set = GridSet { grid: *grid, mask };
            for comp in set.components() {
                let atom = IndicatorAtom::new(comp, sign)?;
                out.push(((level - below) * atom.perimeter as f64, atom));
            }
            below = level;
        }
    }
    Ok(out)
}
