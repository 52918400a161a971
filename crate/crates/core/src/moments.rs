//! Monte Carlo estimation of fractional moments E(|G(x, y; z)|^s).
//!
//! Per-realization values are reduced by median-of-means: equal consecutive
//! blocks are averaged, and the point estimate is the median of block means.
//! The 95% interval is the binomial order-statistic interval for that median.
//! Heavy tails of |G|^s near resonances (infinite variance for s ≥ 1/2 at
//! η = 0) do not invalidate this interval.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderModel, Realization};
use crate::error::{Error, Result};
use crate::lattice::{Region, Site};
use crate::operator::{assemble, LaplacianConvention, OperatorSample};
use crate::resolvent::{green_row_index, SolverOptions, SpectralPoint};

/// Replacement draws allowed per realization before a solver failure aborts.
const MAX_ATTEMPTS: u64 = 8;

/// Number of realizations, their grouping, and the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n_samples: usize,
    pub n_blocks: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub const DEFAULT_BLOCKS: usize = 20;

    pub fn new(n_samples: usize, seed: u64) -> Self {
        SamplingPlan {
            n_samples,
            n_blocks: Self::DEFAULT_BLOCKS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::InvalidParameter(format!(
                "n_samples = {} below the minimum of 100",
                self.n_samples
            )));
        }
        if self.n_blocks < 10 || !self.n_samples.is_multiple_of(self.n_blocks) {
            return Err(Error::InvalidParameter(format!(
                "n_samples = {} must split into ≥ 10 equal blocks (n_blocks = {})",
                self.n_samples, self.n_blocks
            )));
        }
        Ok(())
    }
}

/// Operator-level settings shared by every solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub convention: LaplacianConvention,
    pub solver: SolverOptions,
}

#[derive(Clone, Debug)]
pub struct MomentQuery {
    pub region: Arc<Region>,
    pub x: Site,
    pub y: Site,
    pub z: SpectralPoint,
    pub s: f64,
    /// Evaluate on H_W for this W ⊆ region instead of H_region.
    pub restrict_to: Option<Arc<Region>>,
}

/// Robust estimate of an expectation from independent realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
    pub n_blocks: usize,
    /// Realizations redrawn after a solver failure.
    pub resample_events: usize,
    /// Realizations kept despite a condition estimate above 1e14.
    pub near_singular: usize,
    /// Block means in block order.
    pub block_means: Vec<f64>,
}

impl MomentEstimate {
    /// An exact value with a degenerate interval.
    pub fn exact(value: f64) -> Self {
        MomentEstimate {
            value,
            ci_low: value,
            ci_high: value,
            n_samples: 0,
            n_blocks: 0,
            resample_events: 0,
            near_singular: 0,
            block_means: Vec::new(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        debug_assert!(c >= 0.0);
        MomentEstimate {
            value: self.value * c,
            ci_low: self.ci_low * c,
            ci_high: self.ci_high * c,
            block_means: self.block_means.iter().map(|b| b * c).collect(),
            ..self.clone()
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

/// Median-of-means over `n_blocks` equal consecutive blocks of `samples`.
pub fn median_of_means(samples: &[f64], n_blocks: usize) -> Result<MomentEstimate> {
    if n_blocks == 0 || samples.len() < n_blocks || !samples.len().is_multiple_of(n_blocks) {
        return Err(Error::InvalidParameter(format!(
            "{} samples cannot be split into {n_blocks} equal blocks",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    let per = samples.len() / n_blocks;
    let block_means: Vec<f64> = samples.chunks(per).map(|c| c.iter().sum::<f64>() / per as f64).collect();
    Ok(from_block_means(block_means, samples.len()))
}

pub(crate) fn from_block_means(block_means: Vec<f64>, n_samples: usize) -> MomentEstimate {
    let mut sorted = block_means.clone();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    let value = if b % 2 == 1 {
        sorted[b / 2]
    } else {
        0.5 * (sorted[b / 2 - 1] + sorted[b / 2])
    };
    let k = median_ci_rank(b, 0.05);
    MomentEstimate {
        value,
        ci_low: sorted[k - 1],
        ci_high: sorted[b - k],
        n_samples,
        n_blocks: b,
        resample_events: 0,
        near_singular: 0,
        block_means,
    }
}

/// Rank k (1-based) such that (x_(k), x_(b−k+1)) covers the median with
/// probability ≥ 1 − alpha.
pub(crate) fn median_ci_rank(b: usize, alpha: f64) -> usize {
    let mut cdf = 0.0;
    let mut pmf = 0.5f64.powi(b as i32);
    let mut k = 1;
    for j in 0..b {
        cdf += pmf;
        if cdf > alpha / 2.0 {
            break;
        }
        k = j + 1;
        pmf *= (b - j) as f64 / (j + 1) as f64;
    }
    k.min(b.div_ceil(2)).max(1)
}

/// Per-realization values of a vector-valued functional of the sample.
#[derive(Clone, Debug)]
pub struct RealizationSamples {
    /// `values[i][k]`: component `k` at realization `i`.
    pub values: Vec<Vec<f64>>,
    pub n_blocks: usize,
    pub resample_events: usize,
    pub near_singular: usize,
}

impl RealizationSamples {
    pub fn estimate(&self, k: usize) -> Result<MomentEstimate> {
        let col: Vec<f64> = self.values.iter().map(|row| row[k]).collect();
        self.finish(median_of_means(&col, self.n_blocks)?)
    }

    /// Estimate of `scale · Σ_{k ∈ cols} X_k`, summed per realization.
    pub fn estimate_sum(&self, cols: &[usize], scale: f64) -> Result<MomentEstimate> {
        let col: Vec<f64> = self
            .values
            .iter()
            .map(|row| scale * cols.iter().map(|&k| row[k]).sum::<f64>())
            .collect();
        self.finish(median_of_means(&col, self.n_blocks)?)
    }

    fn finish(&self, mut est: MomentEstimate) -> Result<MomentEstimate> {
        est.resample_events = self.resample_events;
        est.near_singular = self.near_singular;
        Ok(est)
    }
}

/// Outcome of evaluating one realization.
pub struct Evaluated {
    pub values: Vec<f64>,
    pub near_singular: bool,
}

/// Stream index for attempt `attempt` of realization `i`.
pub fn stream_index(i: u64, attempt: u64) -> u64 {
    i | (attempt << 48)
}

/// Run `f` on realizations `0..n_samples` of `model` over `region`, redrawing
/// a realization whenever the solver reports a singular system.
pub fn sample_realizations<F>(
    model: &DisorderModel,
    region: &Arc<Region>,
    plan: &SamplingPlan,
    f: F,
) -> Result<RealizationSamples>
where
    F: Fn(&Realization) -> Result<Evaluated> + Sync,
{
    plan.validate()?;
    let per: Vec<(Vec<f64>, usize, bool)> = (0..plan.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut last = None;
            for attempt in 0..MAX_ATTEMPTS {
                let real = model.sample(region, plan.seed, stream_index(i, attempt))?;
                match f(&real) {
                    Ok(ev) => {
                        if ev.values.iter().any(|v| !v.is_finite()) {
                            return Err(Error::NonFinite { realization: i });
                        }
                        return Ok((ev.values, attempt as usize, ev.near_singular));
                    }
                    Err(e @ Error::Singular { .. }) => {
                        log::debug!("realization {i} attempt {attempt}: {e}");
                        last = Some(e);
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("at least one attempt"))
        })
        .collect::<Result<Vec<_>>>()?;
    let resample_events = per.iter().map(|p| p.1).sum();
    let near_singular = per.iter().filter(|p| p.2).count();
    Ok(RealizationSamples {
        values: per.into_iter().map(|p| p.0).collect(),
        n_blocks: plan.n_blocks,
        resample_events,
        near_singular,
    })
}

/// |G(x, u; z)|^s for every `u` in `targets`, one solve per realization.
pub fn sample_row_moments(
    model: &DisorderModel,
    region: &Arc<Region>,
    x: &Site,
    targets: &[Site],
    z: SpectralPoint,
    s: f64,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<RealizationSamples> {
    check_s(s)?;
    let xi = region.require_index(x)?;
    let cols = targets
        .iter()
        .map(|t| region.require_index(t))
        .collect::<Result<Vec<_>>>()?;
    sample_realizations(model, region, plan, |real| {
        let h = assemble(region, real, model.lambda, opts.convention)?;
        row_powers(&h, xi, &cols, z, s, opts)
    })
}

pub(crate) fn row_powers(
    h: &OperatorSample,
    xi: usize,
    cols: &[usize],
    z: SpectralPoint,
    s: f64,
    opts: &EvalOptions,
) -> Result<Evaluated> {
    let row = green_row_index(h, xi, z, &opts.solver)?;
    Ok(Evaluated {
        values: cols.iter().map(|&k| row.values[k].norm().powf(s)).collect(),
        near_singular: row.near_singular(),
    })
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("fractional power s = {s} outside (0, 1)")))
    }
}

/// Median-of-means estimate of E(|G(x, y; z)|^s).
pub fn estimate_moment(
    model: &DisorderModel,
    query: &MomentQuery,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<MomentEstimate> {
    let region = match &query.restrict_to {
        Some(w) => {
            if !w.is_subset_of(&query.region) {
                return Err(Error::NotSubset);
            }
            w
        }
        None => &query.region,
    };
    let samples = sample_row_moments(model, region, &query.x, std::slice::from_ref(&query.y), query.z, query.s, plan, opts)?;
    samples.estimate(0)
}

/// Shell {y : L/2 ≤ ‖y‖ ≤ L} of Λ_L, in region index order.
pub fn shell_sites(region: &Region, l: u32) -> Vec<Site> {
    region
        .sites()
        .iter()
        .filter(|y| {
            let n = y.norm1();
            2 * n >= l as u64 && n <= l as u64
        })
        .cloned()
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShellSupremum {
    pub site: Site,
    pub estimate: MomentEstimate,
    pub shell: Vec<(Site, MomentEstimate)>,
}

/// Largest estimated E(|G(O, y; z)|^s) over the shell L/2 ≤ ‖y‖ ≤ L of Λ_L
/// (or of `region` when given, e.g. a larger proxy box).
pub fn estimate_shell_supremum(
    model: &DisorderModel,
    dim: usize,
    l: u32,
    region: Option<Arc<Region>>,
    z: SpectralPoint,
    s: f64,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<ShellSupremum> {
    if l < 2 {
        return Err(Error::InvalidParameter(format!("shell radius L = {l} must be at least 2")));
    }
    let region = match region {
        Some(r) => r,
        None => Arc::new(Region::cube(dim, l)?),
    };
    let shell = shell_sites(&region, l);
    let origin = Site::origin(dim);
    let samples = sample_row_moments(model, &region, &origin, &shell, z, s, plan, opts)?;
    let estimates = (0..shell.len())
        .map(|k| samples.estimate(k))
        .collect::<Result<Vec<_>>>()?;
    let best = estimates
        .iter()
        .enumerate()
        .fold(0, |b, (k, e)| if e.value > estimates[b].value { k } else { b });
    Ok(ShellSupremum {
        site: shell[best].clone(),
        estimate: estimates[best].clone(),
        shell: shell.into_iter().zip(estimates).collect(),
    })
}
