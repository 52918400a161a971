//! Finite-volume localization criteria.
//!
//! Three tests are provided:
//!
//! - the single-site test
//!   `2d²(2d+1)·C_s/λ^s · E(|λV − E|^{−s}) < 1`, evaluated in closed form;
//! - the bulk test
//!   `(1 + C_s/λ^s·|Γ(Λ)|)² · Σ_{⟨u,u′⟩∈Γ(Λ)} E|⟨O|(H_Λ − E)⁻¹|u⟩|^s < 1`;
//! - the all-subsets test
//!   `max_{W⊆Λ} |Γ(Λ⁺)|·C̃_s/λ^s · Σ_{⟨u,u′⟩∈Γ(Λ)} E|⟨O|(H_W − E)⁻¹|u⟩|^s < 1`.
//!
//! The constants C_s and C̃_s are inputs. Every report records the values
//! used and where they came from; a verdict is only as rigorous as those
//! constants and the 95% Monte Carlo interval behind it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderModel, Distribution};
use crate::error::{Error, Result};
use crate::lattice::{Region, RegionSpec, Site};
use crate::moments::{
    check_s, row_powers, sample_row_moments, stream_index, EvalOptions, MomentEstimate, RealizationSamples,
    SamplingPlan,
};
use crate::operator::assemble;
use crate::resolvent::SpectralPoint;

const MAX_ATTEMPTS: u64 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionConstants {
    pub c_s: f64,
    pub c_tilde_s: f64,
    pub s: f64,
    /// Where the constants came from; `None` means unverified defaults.
    pub source: Option<String>,
}

impl CriterionConstants {
    pub fn new(c_s: f64, c_tilde_s: f64, s: f64) -> Result<Self> {
        let c = CriterionConstants {
            c_s,
            c_tilde_s,
            s,
            source: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_s(self.s)?;
        for (name, v) in [("C_s", self.c_s), ("C~_s", self.c_tilde_s)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetKind {
    Exhaustive,
    Subboxes,
    UserList(Vec<RegionSpec>),
}

/// Which subsets W ⊆ Λ enter the maximum of the all-subsets test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetStrategy {
    pub kind: SubsetKind,
    pub max_exhaustive_sites: usize,
}

impl SubsetStrategy {
    pub const DEFAULT_MAX_EXHAUSTIVE: usize = 16;

    pub fn exhaustive() -> Self {
        SubsetStrategy {
            kind: SubsetKind::Exhaustive,
            max_exhaustive_sites: Self::DEFAULT_MAX_EXHAUSTIVE,
        }
    }

    pub fn subboxes() -> Self {
        SubsetStrategy {
            kind: SubsetKind::Subboxes,
            max_exhaustive_sites: Self::DEFAULT_MAX_EXHAUSTIVE,
        }
    }

    /// Exhaustive when Λ is small enough, sub-boxes otherwise.
    pub fn automatic(region: &Region) -> Self {
        if region.len() <= Self::DEFAULT_MAX_EXHAUSTIVE {
            Self::exhaustive()
        } else {
            Self::subboxes()
        }
    }

    /// The subsets W ⊆ Λ containing `origin`, in a fixed order.
    pub fn family(&self, region: &Region, origin: &Site) -> Result<Vec<Region>> {
        match &self.kind {
            SubsetKind::Exhaustive => {
                if region.len() > self.max_exhaustive_sites || region.len() > 63 {
                    return Err(Error::TooLarge {
                        sites: region.len(),
                        limit: self.max_exhaustive_sites.min(63),
                    });
                }
                let o = region.require_index(origin)?;
                Ok((1u64..1 << region.len())
                    .filter(|m| m >> o & 1 == 1)
                    .filter_map(|m| region.subset_from_mask(m))
                    .collect())
            }
            SubsetKind::Subboxes => Ok(region.sub_boxes_containing(origin)),
            SubsetKind::UserList(list) => list
                .iter()
                .map(|spec| {
                    let w = spec.build()?;
                    if w.is_subset_of(region) {
                        Ok(w)
                    } else {
                        Err(Error::NotSubset)
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
    Inconclusive,
}

impl Verdict {
    /// Decision on the interval for the left-hand side against threshold 1.
    pub fn from_interval(ci_low: f64, ci_high: f64) -> Self {
        if ci_high < 1.0 {
            Verdict::Certified
        } else if ci_low >= 1.0 {
            Verdict::NotCertified
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::NotCertified => "not_certified",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rigor {
    FullSubsetMax,
    PartialSubsetMax,
    Analytic,
}

impl Rigor {
    pub fn as_str(self) -> &'static str {
        match self {
            Rigor::FullSubsetMax => "full_subset_max",
            Rigor::PartialSubsetMax => "partial_subset_max",
            Rigor::Analytic => "analytic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[serde(rename = "theorem1")]
    Bulk,
    #[serde(rename = "theorem2")]
    AllSubsets,
    SingleSite,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Bulk => "theorem1",
            Criterion::AllSubsets => "theorem2",
            Criterion::SingleSite => "single_site",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "theorem1" | "thm1" => Ok(Criterion::Bulk),
            "2" | "theorem2" | "thm2" => Ok(Criterion::AllSubsets),
            "single-site" | "single_site" => Ok(Criterion::SingleSite),
            other => Err(Error::Config(format!("unknown criterion '{other}'"))),
        }
    }
}

/// One bond's contribution to a criterion's sum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BondTerm {
    pub inside: Site,
    pub outside: Site,
    pub estimate: MomentEstimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub lhs: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub rigor: Rigor,
    pub energy: SpectralPoint,
    pub lambda: f64,
    pub dim: usize,
    pub region_sites: usize,
    /// |Γ(Λ)|.
    pub boundary_bonds: usize,
    /// The factor multiplying the bond sum.
    pub prefactor: f64,
    pub sub_terms: Vec<BondTerm>,
    /// For the all-subsets test: the W attaining the maximum.
    pub maximizing_subset: Option<Vec<Site>>,
    pub subsets_evaluated: usize,
    pub constants: CriterionConstants,
    pub n_samples: usize,
    pub seed: u64,
    pub resample_events: usize,
    pub near_singular: usize,
}

impl CriterionReport {
    fn new(criterion: Criterion, lhs: MomentEstimate, rigor: Rigor, constants: &CriterionConstants) -> Self {
        CriterionReport {
            criterion,
            lhs: lhs.value,
            ci_low: lhs.ci_low,
            ci_high: lhs.ci_high,
            threshold: 1.0,
            verdict: Verdict::from_interval(lhs.ci_low, lhs.ci_high),
            rigor,
            energy: SpectralPoint::real(0.0),
            lambda: 0.0,
            dim: 0,
            region_sites: 0,
            boundary_bonds: 0,
            prefactor: 0.0,
            sub_terms: Vec::new(),
            maximizing_subset: None,
            subsets_evaluated: 0,
            constants: constants.clone(),
            n_samples: lhs.n_samples,
            seed: 0,
            resample_events: lhs.resample_events,
            near_singular: lhs.near_singular,
        }
    }
}

/// E(|λV − E|^{−s}), exactly.
///
/// Uniform V uses the antiderivative of |t|^{−s}; tabulated (piecewise-linear)
/// densities integrate `(α + βt)|t|^{−s}` segment by segment in closed form.
pub fn inverse_moment_closed_form(model: &DisorderModel, energy: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    let lambda = model.lambda;
    let f0 = |t: f64| t.signum() * t.abs().powf(1.0 - s) / (1.0 - s);
    let f1 = |t: f64| t.abs().powf(2.0 - s) / (2.0 - s);
    match &model.distribution {
        Distribution::Uniform { a, b } => Ok((f0(lambda * b - energy) - f0(lambda * a - energy)) / (lambda * (b - a))),
        Distribution::Tabulated { knots, density } => {
            let singular = energy / lambda;
            let last = knots.len() - 1;
            if (singular == knots[0] && density[0] > 0.0) || (singular == knots[last] && density[last] > 0.0) {
                log::warn!("singular point {singular} sits on a density discontinuity; integral is still finite");
            }
            let mut total = 0.0;
            for (x, f) in knots.windows(2).zip(density.windows(2)) {
                let slope = (f[1] - f[0]) / (x[1] - x[0]);
                let alpha = f[0] + slope * (singular - x[0]);
                let beta = slope / lambda;
                let (t0, t1) = (lambda * x[0] - energy, lambda * x[1] - energy);
                total += (alpha * (f0(t1) - f0(t0)) + beta * (f1(t1) - f1(t0))) / lambda;
            }
            Ok(total)
        }
    }
}

/// `2d²(2d+1)·C_s/λ^s · E(|λV − E|^{−s})`, analytic.
pub fn single_site_test(
    model: &DisorderModel,
    energy: f64,
    dim: usize,
    constants: &CriterionConstants,
) -> Result<CriterionReport> {
    constants.validate()?;
    let d = dim as f64;
    let prefactor = 2.0 * d * d * (2.0 * d + 1.0) * constants.c_s / model.lambda.powf(constants.s);
    let lhs = prefactor * inverse_moment_closed_form(model, energy, constants.s)?;
    let mut r = CriterionReport::new(Criterion::SingleSite, MomentEstimate::exact(lhs), Rigor::Analytic, constants);
    r.energy = SpectralPoint::real(energy);
    r.lambda = model.lambda;
    r.dim = dim;
    r.region_sites = 1;
    r.boundary_bonds = 2 * dim;
    r.prefactor = prefactor;
    Ok(r)
}

/// Bulk criterion on Λ with the Monte Carlo bond sum.
pub fn theorem1_lhs(
    model: &DisorderModel,
    region: &Arc<Region>,
    z: SpectralPoint,
    constants: &CriterionConstants,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<CriterionReport> {
    constants.validate()?;
    let origin = Site::origin(region.dim());
    region.require_index(&origin)?;
    let bonds = region.boundary_bonds();
    let mut targets: Vec<Site> = bonds.iter().map(|b| b.inside.clone()).collect();
    targets.dedup();
    let cols: Vec<usize> = bonds
        .iter()
        .map(|b| targets.iter().position(|t| *t == b.inside).expect("target present"))
        .collect();
    let samples = sample_row_moments(model, region, &origin, &targets, z, constants.s, plan, opts)?;

    let g = bonds.len() as f64;
    let prefactor = (1.0 + constants.c_s / model.lambda.powf(constants.s) * g).powi(2);
    let lhs = samples.estimate_sum(&cols, prefactor)?;
    let per_target = (0..targets.len())
        .map(|k| samples.estimate(k))
        .collect::<Result<Vec<_>>>()?;

    // no subset maximum is involved, so nothing is left out of the evaluation
    let mut r = CriterionReport::new(Criterion::Bulk, lhs, Rigor::FullSubsetMax, constants);
    r.energy = z;
    r.lambda = model.lambda;
    r.dim = region.dim();
    r.region_sites = region.len();
    r.boundary_bonds = bonds.len();
    r.prefactor = prefactor;
    r.seed = plan.seed;
    r.sub_terms = bonds
        .iter()
        .zip(&cols)
        .map(|(b, &k)| BondTerm {
            inside: b.inside.clone(),
            outside: b.outside.clone(),
            estimate: per_target[k].clone(),
        })
        .collect();
    Ok(r)
}

/// All-subsets criterion: max over the strategy's family of W ⊆ Λ.
///
/// Each W is evaluated on the same realization stream as Λ; bonds whose
/// inside site is not in W contribute zero, and W not containing O is
/// skipped (its contribution is zero).
pub fn theorem2_lhs(
    model: &DisorderModel,
    region: &Arc<Region>,
    z: SpectralPoint,
    constants: &CriterionConstants,
    strategy: &SubsetStrategy,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<CriterionReport> {
    constants.validate()?;
    plan.validate()?;
    let origin = Site::origin(region.dim());
    region.require_index(&origin)?;
    let family: Vec<Arc<Region>> = strategy
        .family(region, &origin)?
        .into_iter()
        .filter(|w| w.contains(&origin))
        .map(Arc::new)
        .collect();
    let bonds = region.boundary_bonds();
    let gamma_plus = region.extend_plus().boundary_bonds().len() as f64;
    let prefactor = gamma_plus * constants.c_tilde_s / model.lambda.powf(constants.s);

    // For each W: origin index and the W-index of each bond's inside site.
    let layout: Vec<(usize, Vec<Option<usize>>)> = family
        .iter()
        .map(|w| {
            let o = w.index_of(&origin).expect("filtered");
            (o, bonds.iter().map(|b| w.index_of(&b.inside)).collect())
        })
        .collect();

    // per realization, per W: (bond values, attempts used, near singular)
    type PerW = (Vec<f64>, usize, bool);
    let per_realization: Vec<Vec<PerW>> = (0..plan.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let base = model.sample(region, plan.seed, stream_index(i, 0))?;
            family
                .iter()
                .zip(&layout)
                .map(|(w, (o, slots))| {
                    let cols: Vec<usize> = slots.iter().flatten().copied().collect();
                    let mut last = None;
                    for attempt in 0..MAX_ATTEMPTS {
                        let real = if attempt == 0 {
                            base.clone()
                        } else {
                            model.sample(region, plan.seed, stream_index(i, attempt))?
                        };
                        let h = assemble(w, &real, model.lambda, opts.convention)?;
                        match row_powers(&h, *o, &cols, z, constants.s, opts) {
                            Ok(ev) => {
                                if ev.values.iter().any(|v| !v.is_finite()) {
                                    return Err(Error::NonFinite { realization: i });
                                }
                                let mut it = ev.values.into_iter();
                                let full = slots
                                    .iter()
                                    .map(|slot| if slot.is_some() { it.next().unwrap_or(0.0) } else { 0.0 })
                                    .collect();
                                return Ok((full, attempt as usize, ev.near_singular));
                            }
                            Err(e @ Error::Singular { .. }) => last = Some(e),
                            Err(e) => return Err(e),
                        }
                    }
                    Err(last.expect("at least one attempt"))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let all_bonds: Vec<usize> = (0..bonds.len()).collect();
    let mut best: Option<(usize, MomentEstimate, RealizationSamples)> = None;
    let (mut max_low, mut max_high) = (0.0f64, 0.0f64);
    for k in 0..family.len() {
        let samples = RealizationSamples {
            values: per_realization.iter().map(|row| row[k].0.clone()).collect(),
            n_blocks: plan.n_blocks,
            resample_events: per_realization.iter().map(|row| row[k].1).sum(),
            near_singular: per_realization.iter().filter(|row| row[k].2).count(),
        };
        let est = samples.estimate_sum(&all_bonds, prefactor)?;
        max_low = max_low.max(est.ci_low);
        max_high = max_high.max(est.ci_high);
        if best.as_ref().is_none_or(|b| est.value > b.1.value) {
            best = Some((k, est, samples));
        }
    }

    let rigor = match strategy.kind {
        SubsetKind::Exhaustive => Rigor::FullSubsetMax,
        _ => Rigor::PartialSubsetMax,
    };
    let (lhs, sub_terms, maximizing) = match best {
        Some((k, est, samples)) => {
            let terms = bonds
                .iter()
                .enumerate()
                .map(|(b, bond)| {
                    Ok(BondTerm {
                        inside: bond.inside.clone(),
                        outside: bond.outside.clone(),
                        estimate: samples.estimate(b)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let lhs = MomentEstimate {
                ci_low: max_low,
                ci_high: max_high,
                resample_events: per_realization.iter().map(|row| row.iter().map(|w| w.1).sum::<usize>()).sum(),
                near_singular: samples.near_singular,
                ..est
            };
            (lhs, terms, Some(family[k].sites().to_vec()))
        }
        None => {
            let mut zero = MomentEstimate::exact(0.0);
            zero.n_samples = plan.n_samples;
            (zero, Vec::new(), None)
        }
    };

    let mut r = CriterionReport::new(Criterion::AllSubsets, lhs, rigor, constants);
    r.energy = z;
    r.lambda = model.lambda;
    r.dim = region.dim();
    r.region_sites = region.len();
    r.boundary_bonds = bonds.len();
    r.prefactor = prefactor;
    r.seed = plan.seed;
    r.sub_terms = sub_terms;
    r.maximizing_subset = maximizing;
    r.subsets_evaluated = family.len();
    Ok(r)
}

/// Reports along an energy grid, with contiguous certified runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntervalReport {
    pub reports: Vec<CriterionReport>,
    /// Candidate localization intervals `(first, last)` energy of each
    /// maximal run of consecutive certified grid points.
    pub certified_runs: Vec<(f64, f64)>,
}

/// Evaluate a criterion at each energy of `grid` (same seed at every point).
#[allow(clippy::too_many_arguments)]
pub fn certify_interval(
    model: &DisorderModel,
    region: &Arc<Region>,
    grid: &[f64],
    eta: f64,
    constants: &CriterionConstants,
    which: Criterion,
    strategy: &SubsetStrategy,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<IntervalReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("energy grid is empty".into()));
    }
    let reports = grid
        .iter()
        .map(|&e| {
            let z = SpectralPoint::new(e, eta);
            match which {
                Criterion::Bulk => theorem1_lhs(model, region, z, constants, plan, opts),
                Criterion::AllSubsets => theorem2_lhs(model, region, z, constants, strategy, plan, opts),
                Criterion::SingleSite => single_site_test(model, e, region.dim(), constants),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut certified_runs = Vec::new();
    let mut start: Option<f64> = None;
    let mut prev = 0.0;
    for r in &reports {
        let e = r.energy.energy;
        if r.verdict == Verdict::Certified {
            start.get_or_insert(e);
        } else if let Some(a) = start.take() {
            certified_runs.push((a, prev));
        }
        prev = e;
    }
    if let Some(a) = start {
        certified_runs.push((a, prev));
    }
    Ok(IntervalReport {
        reports,
        certified_runs,
    })
}
