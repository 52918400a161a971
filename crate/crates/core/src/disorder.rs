//! I.i.d. site potentials and their reproducible sampling.
//!
//! Sampling is counter-based: the value at a site depends only on
//! `(seed, realization index, site coordinates)`, so a realization drawn on Λ
//! and one drawn on W ⊂ Λ agree on W without storing anything.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Region, Site};

/// Shape of the single-site distribution of V(x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
    /// Piecewise-linear density through `(knots[i], density[i])`, zero outside
    /// `[knots[0], knots[last]]`. Normalised on construction.
    Tabulated { knots: Vec<f64>, density: Vec<f64> },
}

/// Random potential model: V(x) i.i.d. with the given distribution, scaled
/// by the coupling λ in the Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisorderModel {
    pub distribution: Distribution,
    pub lambda: f64,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl DisorderModel {
    pub fn uniform(a: f64, b: f64, lambda: f64) -> Result<Self> {
        Self::new(Distribution::Uniform { a, b }, lambda)
    }

    /// Uniform on [−1/2, 1/2].
    pub fn standard(lambda: f64) -> Result<Self> {
        Self::uniform(-0.5, 0.5, lambda)
    }

    pub fn tabulated(knots: Vec<f64>, density: Vec<f64>, lambda: f64) -> Result<Self> {
        Self::new(Distribution::Tabulated { knots, density }, lambda)
    }

    pub fn new(distribution: Distribution, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidModel(format!("coupling must be positive, got {lambda}")));
        }
        let (distribution, cdf) = match distribution {
            Distribution::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidModel(format!("uniform support [{a}, {b}] is empty")));
                }
                (Distribution::Uniform { a, b }, Vec::new())
            }
            Distribution::Tabulated { knots, density } => normalize_table(knots, density)?,
        };
        Ok(DisorderModel {
            distribution,
            lambda,
            cdf,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.distribution.clone(), lambda)
    }

    /// Closed support interval of V.
    pub fn support(&self) -> (f64, f64) {
        match &self.distribution {
            Distribution::Uniform { a, b } => (*a, *b),
            Distribution::Tabulated { knots, .. } => (knots[0], knots[knots.len() - 1]),
        }
    }

    /// Supremum of the density of V.
    pub fn density_bound(&self) -> f64 {
        match &self.distribution {
            Distribution::Uniform { a, b } => 1.0 / (b - a),
            Distribution::Tabulated { density, .. } => density.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn pdf(&self, v: f64) -> f64 {
        match &self.distribution {
            Distribution::Uniform { a, b } => {
                if v >= *a && v <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Distribution::Tabulated { knots, density } => {
                if v < knots[0] || v > knots[knots.len() - 1] {
                    return 0.0;
                }
                let k = knots.partition_point(|&x| x <= v).clamp(1, knots.len() - 1);
                let (x0, x1) = (knots[k - 1], knots[k]);
                let t = (v - x0) / (x1 - x0);
                density[k - 1] + t * (density[k] - density[k - 1])
            }
        }
    }

    /// Inverse CDF; `u` in [0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.distribution {
            Distribution::Uniform { a, b } => a + (b - a) * u,
            Distribution::Tabulated { knots, density } => {
                let k = self.cdf.partition_point(|&c| c <= u).clamp(1, knots.len() - 1);
                let (x0, x1) = (knots[k - 1], knots[k]);
                let (f0, f1) = (density[k - 1], density[k]);
                let h = x1 - x0;
                let need = u - self.cdf[k - 1];
                if need <= 0.0 {
                    return x0;
                }
                // solve f0·t + (f1−f0)·t²/(2h) = need for t ∈ [0, h]
                let slope = (f1 - f0) / h;
                let t = if slope.abs() < 1e-14 * (f0 + f1).max(1e-300) / h {
                    need / f0
                } else {
                    let disc = (f0 * f0 + 2.0 * slope * need).max(0.0);
                    // numerically stable root of slope/2·t² + f0·t − need = 0
                    2.0 * need / (f0 + disc.sqrt())
                };
                (x0 + t.clamp(0.0, h)).clamp(x0, x1)
            }
        }
    }

    /// Short human-readable identifier recorded in outputs.
    pub fn tag(&self) -> String {
        self.to_string()
    }

    /// Draw V(x) for every site of `region` under stream `(seed, index)`.
    pub fn sample(&self, region: &Arc<Region>, seed: u64, index: u64) -> Result<Realization> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let values = region
            .sites()
            .iter()
            .map(|s| {
                rng.set_word_pos(site_block(s)? * 16);
                Ok(self.quantile(rng.random::<f64>()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Realization {
            region: Arc::clone(region),
            values,
            seed,
            index,
            model_tag: self.tag(),
        })
    }
}

impl fmt::Display for DisorderModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.distribution {
            Distribution::Uniform { a, b } => write!(f, "uniform({a},{b});lambda={}", self.lambda),
            Distribution::Tabulated { knots, .. } => write!(
                f,
                "tabulated({} knots on [{},{}]);lambda={}",
                knots.len(),
                knots[0],
                knots[knots.len() - 1],
                self.lambda
            ),
        }
    }
}

/// Draw V(x) on `region` for realization 0 of `seed`.
pub fn sample_realization(model: &DisorderModel, region: &Arc<Region>, seed: u64) -> Result<Realization> {
    model.sample(region, seed, 0)
}

/// Pack site coordinates into a 64-bit ChaCha block counter.
fn site_block(site: &Site) -> Result<u128> {
    let d = site.dim();
    let bits = 64 / d as u32;
    if bits < 2 {
        return Err(Error::InvalidParameter(format!("dimension {d} too large for site-keyed sampling")));
    }
    let mut packed: u64 = 0;
    for &c in site.coords() {
        let zz = ((c << 1) ^ (c >> 31)) as u32 as u64;
        if bits < 64 && zz >> bits != 0 {
            return Err(Error::InvalidParameter(format!("coordinate {c} out of range for d={d}")));
        }
        packed = if bits < 64 { (packed << bits) | zz } else { zz };
    }
    Ok(packed as u128)
}

fn normalize_table(knots: Vec<f64>, density: Vec<f64>) -> Result<(Distribution, Vec<f64>)> {
    if knots.len() < 2 || knots.len() != density.len() {
        return Err(Error::InvalidModel(
            "tabulated density needs ≥ 2 knots and one value per knot".into(),
        ));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel("knots must be finite and strictly increasing".into()));
    }
    if density.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::InvalidModel("density values must be finite and nonnegative".into()));
    }
    let mass: f64 = knots
        .windows(2)
        .zip(density.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum();
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidModel("tabulated density is not normalizable".into()));
    }
    let density: Vec<f64> = density.into_iter().map(|f| f / mass).collect();
    let mut cdf = Vec::with_capacity(knots.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for (x, f) in knots.windows(2).zip(density.windows(2)) {
        acc += 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
        cdf.push(acc);
    }
    debug_assert!((acc - 1.0).abs() < 1e-9);
    Ok((Distribution::Tabulated { knots, density }, cdf))
}

/// One draw ω of the potential over a region.
#[derive(Clone, Debug)]
pub struct Realization {
    region: Arc<Region>,
    values: Vec<f64>,
    pub seed: u64,
    pub index: u64,
    pub model_tag: String,
}

impl Realization {
    /// Build a realization from explicit values, in region index order.
    pub fn from_values(region: Arc<Region>, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a region of {} sites",
                values.len(),
                region.len()
            )));
        }
        Ok(Realization {
            region,
            values,
            seed: 0,
            index: 0,
            model_tag: "explicit".into(),
        })
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, site: &Site) -> Option<f64> {
        self.region.index_of(site).map(|i| self.values[i])
    }
}
