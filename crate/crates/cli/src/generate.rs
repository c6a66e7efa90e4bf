//! Synthetic measurements `y = P(Φ u_true)`.

use std::path::{Path, PathBuf};

use gaugekit::families::rank1_atom;
use gaugekit::{FamilySpec, GaugeModel, SensingOperator};
use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::pgm::Gray;
use crate::spec::SpecError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YGen {
    pub ground_truth: GroundTruth,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundTruth {
    /// Explicit sparse combination.
    Atoms { atoms: Vec<AtomSpec> },
    /// `count` atoms drawn from the family with weights `1 + |N(0,1)|`.
    Random { count: usize },
    /// Graymap scaled to `[0, 1]`, for pixel-grid families.
    Image { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomSpec {
    /// Entry of the family's stored atom list.
    Index { index: usize, weight: f64 },
    /// `weight · v v^T / |v|²` for the PSD cone.
    Rank1 { v: Vec<f64>, weight: f64 },
    /// `weight` on a rectangle of pixels.
    Rect { top: usize, left: usize, height: usize, width: usize, weight: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    #[default]
    None,
    Gaussian {
        sigma: f64,
    },
    /// Midrise quantizer with an even number of levels.
    Quantize {
        levels: u32,
        #[serde(default = "unit")]
        step: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl YGen {
    pub(crate) fn rebase(&mut self, dir: &Path) {
        if let GroundTruth::Image { path } = &mut self.ground_truth {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
    }
}

/// Midrise quantizer: `step (k + 1/2)` with `k = floor(x / step)` clamped
/// to `-levels/2 ..= levels/2 - 1`.
pub fn quantize(x: f64, levels: u32, step: f64) -> f64 {
    let half = f64::from(levels / 2);
    let k = (x / step).floor().clamp(-half, half - 1.0);
    step * (k + 0.5)
}

pub fn apply_noise(z: &DVector<f64>, noise: &Noise, rng: &mut ChaCha8Rng) -> Result<DVector<f64>, SpecError> {
    match noise {
        Noise::None => Ok(z.clone()),
        Noise::Gaussian { sigma } => {
            if !(*sigma >= 0.0 && sigma.is_finite()) {
                return Err(SpecError::new("fit.y_gen.noise.sigma", "must be nonnegative and finite"));
            }
            if *sigma == 0.0 {
                return Ok(z.clone());
            }
            Ok(z.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
        }
        Noise::Quantize { levels, step } => {
            if *levels < 2 || levels % 2 != 0 {
                return Err(SpecError::new("fit.y_gen.noise.levels", "must be even and at least 2"));
            }
            if !(*step > 0.0 && step.is_finite()) {
                return Err(SpecError::new("fit.y_gen.noise.step", "must be positive and finite"));
            }
            Ok(z.map(|v| quantize(v, *levels, *step)))
        }
    }
}

fn ground_truth(
    gt: &GroundTruth,
    family: &FamilySpec,
    gauge: &GaugeModel,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>, SpecError> {
    let n = gauge.ambient_dim();
    let path = "fit.y_gen.ground_truth";
    let mut u = DVector::zeros(n);
    match gt {
        GroundTruth::Atoms { atoms } => {
            for (i, a) in atoms.iter().enumerate() {
                let at = format!("{path}.atoms[{i}]");
                match a {
                    AtomSpec::Index { index, weight } => {
                        let list =
                            gauge.atoms().ok_or_else(|| SpecError::new(&at, "family has no stored atom list"))?;
                        let atom = list.get(*index).ok_or_else(|| {
                            SpecError::new(&at, format!("index {index} out of range ({})", list.len()))
                        })?;
                        u.axpy(*weight, &atom.vector, 1.0);
                    }
                    AtomSpec::Rank1 { v, weight } => {
                        let FamilySpec::PsdCone { p } = family else {
                            return Err(SpecError::new(&at, "rank-1 atoms need the PSD cone"));
                        };
                        if v.len() != *p || v.iter().all(|x| *x == 0.0) {
                            return Err(SpecError::new(&at, format!("v must be a nonzero vector of length {p}")));
                        }
                        if *weight < 0.0 {
                            return Err(SpecError::new(&at, "weight must be nonnegative"));
                        }
                        let v = DVector::from_column_slice(v);
                        u.axpy(*weight, &rank1_atom(&(&v / v.norm())).vector, 1.0);
                    }
                    AtomSpec::Rect { top, left, height, width, weight } => {
                        let FamilySpec::TVGradient2D { h, w } = family else {
                            return Err(SpecError::new(&at, "rectangles need a pixel-grid family"));
                        };
                        if *height == 0 || *width == 0 || top + height > *h || left + width > *w {
                            return Err(SpecError::new(&at, format!("rectangle does not fit the {h}x{w} grid")));
                        }
                        for r in *top..top + height {
                            for c in *left..left + width {
                                u[r * w + c] += weight;
                            }
                        }
                    }
                }
            }
        }
        GroundTruth::Random { count } => match family {
            FamilySpec::PsdCone { p } => {
                for _ in 0..*count {
                    let v = DVector::from_fn(*p, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let weight = 1.0 + rng.sample::<f64, _>(StandardNormal).abs();
                    u.axpy(weight, &rank1_atom(&(&v / v.norm())).vector, 1.0);
                }
            }
            FamilySpec::TVGradient2D { h, w } => {
                for _ in 0..*count {
                    let (r0, r1) = ordered(rng, *h);
                    let (c0, c1) = ordered(rng, *w);
                    let mag = 1.0 + rng.sample::<f64, _>(StandardNormal).abs();
                    let weight = if rng.gen_bool(0.5) { mag } else { -mag };
                    for r in r0..=r1 {
                        for c in c0..=c1 {
                            u[r * w + c] += weight;
                        }
                    }
                }
            }
            _ => {
                let list = gauge.atoms().unwrap_or_default();
                if *count > list.len() {
                    return Err(SpecError::new(
                        format!("{path}.count"),
                        format!("{count} exceeds the {} available atoms", list.len()),
                    ));
                }
                for k in sample(rng, list.len(), *count).into_iter() {
                    let weight = 1.0 + rng.sample::<f64, _>(StandardNormal).abs();
                    u.axpy(weight, &list[k].vector, 1.0);
                }
            }
        },
        GroundTruth::Image { path: file } => {
            let FamilySpec::TVGradient2D { h, w } = family else {
                return Err(SpecError::new(path, "images need a pixel-grid family"));
            };
            let bytes = std::fs::read(file).map_err(|e| SpecError::new(path, format!("{}: {e}", file.display())))?;
            let img = Gray::decode(&bytes).map_err(|e| SpecError::new(path, format!("{}: {e}", file.display())))?;
            if img.height != *h || img.width != *w {
                return Err(SpecError::new(
                    path,
                    format!("image is {}x{}, family grid is {h}x{w}", img.height, img.width),
                ));
            }
            u = DVector::from_vec(img.values());
        }
    }
    Ok(u)
}

fn ordered(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let a = rng.gen_range(0..n);
    let b = rng.gen_range(0..n);
    (a.min(b), a.max(b))
}

/// `(u_true, y)`.
pub fn synthesize(
    gen: &YGen,
    family: &FamilySpec,
    gauge: &GaugeModel,
    phi: &SensingOperator,
) -> Result<(DVector<f64>, DVector<f64>), SpecError> {
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    let u = ground_truth(&gen.ground_truth, family, gauge, &mut rng)?;
    let z = phi.apply(&u).map_err(|e| SpecError::new("phi", e.to_string()))?;
    let y = apply_noise(&z, &gen.noise, &mut rng)?;
    Ok((u, y))
}
