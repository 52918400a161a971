//! Decay-law fits and the asymptotic tests built on shell suprema.

use std::io::Read;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::lattice::{Region, Site};
use crate::moments::{
    estimate_moment, estimate_shell_supremum, sample_row_moments, EvalOptions, MomentEstimate, MomentQuery,
    SamplingPlan, ShellSupremum,
};
use crate::operator::LaplacianConvention;
use crate::resolvent::SpectralPoint;

const BOOTSTRAP_REPS: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x00de_ca75;
const CURVATURE_FLAG: f64 = 3.0;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub s: Option<f64>,
    pub energy: Option<f64>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub l: Option<u32>,
    pub convention: Option<LaplacianConvention>,
}

/// Moment estimates indexed by strictly increasing distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    points: Vec<(f64, MomentEstimate)>,
    pub meta: SeriesMeta,
}

impl DecaySeries {
    pub fn new(points: Vec<(f64, MomentEstimate)>, meta: SeriesMeta) -> Result<Self> {
        for (r, _) in &points {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::InvalidParameter(format!("distance {r} must be finite and nonnegative")));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("distances must be strictly increasing".into()));
        }
        Ok(DecaySeries { points, meta })
    }

    /// Exact values without intervals, e.g. synthetic data.
    pub fn from_values(distances: &[f64], values: &[f64]) -> Result<Self> {
        if distances.len() != values.len() {
            return Err(Error::InvalidParameter("distance and value counts differ".into()));
        }
        let pts = distances
            .iter()
            .zip(values)
            .map(|(&r, &v)| (r, MomentEstimate::exact(v)))
            .collect();
        Self::new(pts, SeriesMeta::default())
    }

    /// Reads `distance,moment,ci_low,ci_high` rows (with header).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            distance: f64,
            moment: f64,
            ci_low: f64,
            ci_high: f64,
        }
        let mut pts = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            let mut est = MomentEstimate::exact(row.moment);
            est.ci_low = row.ci_low;
            est.ci_high = row.ci_high;
            pts.push((row.distance, est));
        }
        Self::new(pts, SeriesMeta::default())
    }

    pub fn points(&self) -> &[(f64, MomentEstimate)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps points whose estimate is at least `floor`.
    pub fn above(&self, floor: f64) -> Self {
        DecaySeries {
            points: self.points.iter().filter(|(_, m)| m.value >= floor).cloned().collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        DecaySeries {
            points: self.points.iter().map(|(r, m)| (*r, m.scaled(c))).collect(),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// A e^{−μ r}
    Exponential,
    /// A r^{−μ}
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Goodness {
    /// Weighted residual sum of squares of the log fit.
    pub rss: f64,
    /// t-statistic of the quadratic term in a quadratic log fit.
    pub curvature_t: f64,
    /// |curvature_t| above 3: the model shape does not match.
    pub curvature_flag: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub mu: f64,
    pub mu_ci: (f64, f64),
    pub model: FitModel,
    /// "block_bootstrap" or "normal".
    pub ci_method: String,
    pub goodness: Goodness,
    pub n_points: usize,
}

/// Weighted least squares of log(moment) on distance.
pub fn fit_exponential(series: &DecaySeries) -> Result<DecayFit> {
    fit(series, FitModel::Exponential)
}

/// Weighted least squares of log(moment) on log(distance).
pub fn fit_power_law(series: &DecaySeries) -> Result<DecayFit> {
    if series.points.iter().any(|(r, _)| *r <= 0.0) {
        return Err(Error::InvalidParameter("power-law fit needs positive distances".into()));
    }
    fit(series, FitModel::PowerLaw)
}

fn fit(series: &DecaySeries, model: FitModel) -> Result<DecayFit> {
    let n = series.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} points; need at least 3")));
    }
    if let Some((r, m)) = series.points.iter().find(|(_, m)| !(m.value > 0.0)) {
        return Err(Error::InvalidParameter(format!("nonpositive moment {} at distance {r}", m.value)));
    }
    let x: Vec<f64> = series
        .points
        .iter()
        .map(|(r, _)| match model {
            FitModel::Exponential => *r,
            FitModel::PowerLaw => r.ln(),
        })
        .collect();
    let y: Vec<f64> = series.points.iter().map(|(_, m)| m.value.ln()).collect();
    let w = log_weights(&series.points);

    let (beta, cov, rss) = wls(&x, &y, &w, 1)?;
    let mu = -beta[1];
    let mu_se = cov[(1, 1)].sqrt();

    let bootstrap = bootstrap_mu(series, &x, &w);
    let (mu_ci, ci_method) = match bootstrap {
        Some(ci) => (ci, "block_bootstrap"),
        None => ((mu - Z95 * mu_se, mu + Z95 * mu_se), "normal"),
    };

    let curvature_t = if n >= 4 {
        let (b2, c2, _) = wls(&x, &y, &w, 2)?;
        b2[2] / c2[(2, 2)].sqrt()
    } else {
        0.0
    };

    Ok(DecayFit {
        a: beta[0].exp(),
        mu,
        mu_ci,
        model,
        ci_method: ci_method.into(),
        goodness: Goodness {
            rss,
            curvature_t,
            curvature_flag: curvature_t.abs() > CURVATURE_FLAG,
        },
        n_points: n,
    })
}

/// Inverse variances of log(moment) read off the CI widths; uniform when
/// no interval carries information.
fn log_weights(points: &[(f64, MomentEstimate)]) -> Vec<f64> {
    let sd: Vec<f64> = points
        .iter()
        .map(|(_, m)| {
            if m.ci_low > 0.0 && m.ci_high > m.ci_low {
                (m.ci_high.ln() - m.ci_low.ln()) / (2.0 * Z95)
            } else {
                0.0
            }
        })
        .collect();
    let min_pos = sd.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return vec![1.0; points.len()];
    }
    sd.iter().map(|&v| 1.0 / v.max(min_pos).powi(2)).collect()
}

/// Polynomial WLS of the given degree. Returns coefficients, their
/// covariance scaled by the residual variance, and the weighted RSS.
fn wls(x: &[f64], y: &[f64], w: &[f64], degree: usize) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let n = x.len();
    let p = degree + 1;
    let design = DMatrix::from_fn(n, p, |i, j| x[i].powi(j as i32));
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwy = DVector::zeros(p);
    for i in 0..n {
        let row = design.row(i);
        xtwx += w[i] * row.transpose() * row;
        xtwy += w[i] * y[i] * row.transpose();
    }
    let inv = xtwx
        .try_inverse()
        .ok_or_else(|| Error::InsufficientData("degenerate distances for fit".into()))?;
    let beta = &inv * xtwy;
    let rss: f64 = (0..n)
        .map(|i| w[i] * (y[i] - (design.row(i) * &beta)[0]).powi(2))
        .sum();
    let dof = (n - p).max(1) as f64;
    let sigma2 = (rss / dof).max(1e-24);
    Ok((beta, inv * sigma2, rss))
}

fn bootstrap_mu(series: &DecaySeries, x: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let b = series.points[0].1.block_means.len();
    if b < 2 || series.points.iter().any(|(_, m)| m.block_means.len() != b) {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut mus = Vec::with_capacity(BOOTSTRAP_REPS);
    let mut pick = vec![0usize; b];
    let mut buf = vec![0.0; b];
    for _ in 0..BOOTSTRAP_REPS {
        pick.iter_mut().for_each(|p| *p = rng.random_range(0..b));
        let mut y = Vec::with_capacity(series.len());
        for (_, m) in &series.points {
            for (slot, &k) in buf.iter_mut().zip(&pick) {
                *slot = m.block_means[k];
            }
            let med = median(&mut buf);
            if !(med > 0.0) {
                return None;
            }
            y.push(med.ln());
        }
        let (beta, _, _) = wls(x, &y, w, 1).ok()?;
        mus.push(-beta[1]);
    }
    mus.sort_by(f64::total_cmp);
    let q = |p: f64| mus[((p * (BOOTSTRAP_REPS - 1) as f64).round()) as usize];
    Some((q(0.025), q(0.975)))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// E|G(x, y; z)|^s for each target, as a series in ‖x − y‖₁.
/// Targets must have strictly increasing distance from `x`.
pub fn decay_series(
    model: &DisorderModel,
    region: &Arc<Region>,
    x: &Site,
    targets: &[Site],
    z: SpectralPoint,
    s: f64,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<DecaySeries> {
    let samples = sample_row_moments(model, region, x, targets, z, s, plan, opts)?;
    let points = targets
        .iter()
        .enumerate()
        .map(|(k, y)| Ok((x.dist1(y) as f64, samples.estimate(k)?)))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = region.bounding_box();
    DecaySeries::new(
        points,
        SeriesMeta {
            s: Some(s),
            energy: Some(z.energy),
            eta: Some(z.eta),
            lambda: Some(model.lambda),
            l: Some(((hi[0] - lo[0]) / 2) as u32),
            convention: Some(opts.convention),
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerLawVariant {
    /// Shell of Λ_L against B / L^{3(d−1)}.
    FiniteVolume,
    /// Shell of L inside the box [−2L, 2L]^d against B / L^{4(d−1)}.
    InfiniteVolumeProxy,
}

impl PowerLawVariant {
    pub fn exponent(self, dim: usize) -> i32 {
        let k = match self {
            PowerLawVariant::FiniteVolume => 3,
            PowerLawVariant::InfiniteVolumeProxy => 4,
        };
        k * (dim as i32 - 1)
    }

    pub fn threshold(self, dim: usize, l: u32, b: f64) -> f64 {
        b / (l as f64).powi(self.exponent(dim))
    }

    pub fn region(self, dim: usize, l: u32) -> Result<Region> {
        match self {
            PowerLawVariant::FiniteVolume => Region::cube(dim, l),
            PowerLawVariant::InfiniteVolumeProxy => Region::cube(dim, 2 * l),
        }
    }
}

impl std::str::FromStr for PowerLawVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite_volume" | "finite-volume" => Ok(PowerLawVariant::FiniteVolume),
            "infinite_volume_proxy" | "infinite-volume-proxy" | "proxy" => Ok(PowerLawVariant::InfiniteVolumeProxy),
            other => Err(Error::InvalidParameter(format!("unknown power-law variant {other:?}"))),
        }
    }
}

/// B and L_o are not known for any concrete model; they are user inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawOptions {
    pub b: f64,
    pub l_o: u32,
}

impl Default for PowerLawOptions {
    fn default() -> Self {
        PowerLawOptions { b: 1.0, l_o: 4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerLawReport {
    pub variant: PowerLawVariant,
    pub dim: usize,
    pub l: u32,
    pub s: f64,
    pub energy: f64,
    pub b: f64,
    pub l_o: u32,
    pub exponent: i32,
    pub threshold: f64,
    pub supremum: MomentEstimate,
    pub sup_site: Option<Site>,
    /// Point estimate below the threshold.
    pub pass: bool,
    /// Upper confidence bound below the threshold.
    pub pass_at_ci: bool,
}

/// Compares a shell supremum with B / L^k.
pub fn power_law_verdict(
    supremum: &MomentEstimate,
    dim: usize,
    l: u32,
    variant: PowerLawVariant,
    opts: &PowerLawOptions,
) -> Result<(f64, bool, bool)> {
    if l < opts.l_o {
        return Err(Error::InvalidParameter(format!("L = {l} below L_o = {}", opts.l_o)));
    }
    if !(opts.b > 0.0) {
        return Err(Error::InvalidParameter("B must be positive".into()));
    }
    let t = variant.threshold(dim, l, opts.b);
    Ok((t, supremum.value < t, supremum.ci_high < t))
}

pub fn power_law_test(
    model: &DisorderModel,
    dim: usize,
    energy: f64,
    l: u32,
    s: f64,
    variant: PowerLawVariant,
    opts: &PowerLawOptions,
    plan: &SamplingPlan,
    eval: &EvalOptions,
) -> Result<PowerLawReport> {
    if l < opts.l_o {
        return Err(Error::InvalidParameter(format!("L = {l} below L_o = {}", opts.l_o)));
    }
    let region = Arc::new(variant.region(dim, l)?);
    let sup = estimate_shell_supremum(model, dim, l, Some(region), SpectralPoint::real(energy), s, plan, eval)?;
    let (threshold, pass, pass_at_ci) = power_law_verdict(&sup.estimate, dim, l, variant, opts)?;
    Ok(PowerLawReport {
        variant,
        dim,
        l,
        s,
        energy,
        b: opts.b,
        l_o: opts.l_o,
        exponent: variant.exponent(dim),
        threshold,
        supremum: sup.estimate,
        sup_site: Some(sup.site),
        pass,
        pass_at_ci,
    })
}

/// Shell suprema at increasing L, as produced by `estimate_shell_supremum`.
pub fn shell_series(
    model: &DisorderModel,
    dim: usize,
    energy: f64,
    ls: &[u32],
    s: f64,
    variant: PowerLawVariant,
    plan: &SamplingPlan,
    eval: &EvalOptions,
) -> Result<Vec<(u32, ShellSupremum)>> {
    ls.iter()
        .map(|&l| {
            let region = Arc::new(variant.region(dim, l)?);
            let sup =
                estimate_shell_supremum(model, dim, l, Some(region), SpectralPoint::real(energy), s, plan, eval)?;
            Ok((l, sup))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeRow {
    pub l: u32,
    pub supremum: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MobilityEdgeReport {
    pub variant: PowerLawVariant,
    pub dim: usize,
    pub b: f64,
    pub rows: Vec<EdgeRow>,
    /// Every row satisfies the lower bound.
    pub consistent: bool,
    pub note: String,
}

/// Checks sup-shell moments against the lower bound B L^{−k} that any
/// mobility edge must obey. `b` is B₁ (finite volume) or B₂ (proxy).
pub fn mobility_edge_bound_check(
    series: &[(u32, MomentEstimate)],
    dim: usize,
    variant: PowerLawVariant,
    b: f64,
) -> Result<MobilityEdgeReport> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter("bound constant must be positive".into()));
    }
    let rows: Vec<EdgeRow> = series
        .iter()
        .map(|(l, m)| {
            let bound = variant.threshold(dim, *l, b);
            EdgeRow {
                l: *l,
                supremum: m.value,
                bound,
                satisfied: m.value >= bound,
            }
        })
        .collect();
    let consistent = rows.iter().all(|r| r.satisfied);
    let note = if consistent {
        "lower bound holds at every L".to_string()
    } else {
        "inconsistent with E being a mobility edge at these constants".to_string()
    };
    Ok(MobilityEdgeReport {
        variant,
        dim,
        b,
        rows,
        consistent,
        note,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OffAxisScan {
    pub points: Vec<(f64, MomentEstimate)>,
    pub max_eta: f64,
    pub max_value: f64,
    /// The maximum sits at the grid point of smallest |η|.
    pub max_at_real_axis: bool,
}

/// E|G(x, y; E + iη)|^s along an η grid, every point using the same seed.
pub fn off_axis_scan(
    model: &DisorderModel,
    region: &Arc<Region>,
    x: &Site,
    y: &Site,
    energy: f64,
    eta_grid: &[f64],
    s: f64,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<OffAxisScan> {
    if !eta_grid.contains(&0.0) {
        return Err(Error::InvalidParameter("η grid must contain 0".into()));
    }
    let points = eta_grid
        .iter()
        .map(|&eta| {
            let q = MomentQuery {
                region: Arc::clone(region),
                x: x.clone(),
                y: y.clone(),
                z: SpectralPoint::new(energy, eta),
                s,
                restrict_to: None,
            };
            Ok((eta, estimate_moment(model, &q, plan, opts)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = points
        .iter()
        .enumerate()
        .fold(0, |b, (k, p)| if p.1.value > points[b].1.value { k } else { b });
    let min_abs = eta_grid.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    Ok(OffAxisScan {
        max_eta: points[best].0,
        max_value: points[best].1.value,
        max_at_real_axis: points[best].0.abs() == min_abs,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::median_of_means;

    fn normal<R: Rng>(rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    fn rs() -> Vec<f64> {
        (1..=10).map(f64::from).collect()
    }

    #[test]
    fn noiseless_exponential_exact() {
        let r = rs();
        let v: Vec<f64> = r.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        let f = fit_exponential(&DecaySeries::from_values(&r, &v).unwrap()).unwrap();
        assert!((f.a - 3.0).abs() < 1e-12);
        assert!((f.mu - 0.7).abs() < 1e-12);
        assert!(!f.goodness.curvature_flag);
        assert_eq!(f.ci_method, "normal");
    }

    #[test]
    fn scaling_equivariance() {
        let r = rs();
        let v: Vec<f64> = r.iter().map(|x| (-0.4 * x).exp() * (1.0 + 0.1 * (x * 7.0).sin())).collect();
        let s = DecaySeries::from_values(&r, &v).unwrap();
        let f1 = fit_exponential(&s).unwrap();
        let f2 = fit_exponential(&s.scaled(5.0)).unwrap();
        assert!((f2.a / f1.a - 5.0).abs() < 1e-10);
        assert!((f2.mu - f1.mu).abs() < 1e-12);
    }

    #[test]
    fn power_law_data_is_flagged() {
        let r = rs();
        let v: Vec<f64> = r.iter().map(|x| x.powi(-3)).collect();
        let s = DecaySeries::from_values(&r, &v).unwrap();
        assert!(fit_exponential(&s).unwrap().goodness.curvature_flag);
        let p = fit_power_law(&s).unwrap();
        assert!((p.mu - 3.0).abs() < 1e-12);
        assert!(!p.goodness.curvature_flag);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(DecaySeries::from_values(&[1.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
        let s = DecaySeries::from_values(&[1.0, 2.0], &[1.0, 0.5]).unwrap();
        assert!(fit_exponential(&s).is_err());
        let s = DecaySeries::from_values(&[1.0, 2.0, 3.0], &[1.0, 0.0, 0.5]).unwrap();
        assert!(fit_exponential(&s).is_err());
    }

    #[test]
    fn bootstrap_coverage_under_multiplicative_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mu = 0.7;
        let mut covered = 0;
        for _ in 0..100 {
            let pts = rs()
                .into_iter()
                .map(|r| {
                    let xs: Vec<f64> = (0..200)
                        .map(|_| 3.0 * (-mu * r).exp() * (1.0 + 0.05 * normal(&mut rng)))
                        .collect();
                    (r, median_of_means(&xs, 20).unwrap())
                })
                .collect();
            let f = fit_exponential(&DecaySeries::new(pts, SeriesMeta::default()).unwrap()).unwrap();
            assert_eq!(f.ci_method, "block_bootstrap");
            if f.mu_ci.0 <= mu && mu <= f.mu_ci.1 {
                covered += 1;
            }
        }
        assert!(covered >= 90, "coverage {covered}/100");
    }

    #[test]
    fn csv_input() {
        let text = "distance,moment,ci_low,ci_high\n1,0.5,0.4,0.6\n2,0.25,0.2,0.3\n3,0.125,0.1,0.15\n";
        let s = DecaySeries::from_csv(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        let f = fit_exponential(&s).unwrap();
        assert!((f.mu - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn power_law_thresholds() {
        let opts = PowerLawOptions::default();
        assert_eq!(PowerLawVariant::FiniteVolume.threshold(1, 50, 0.3), 0.3);
        assert_eq!(PowerLawVariant::InfiniteVolumeProxy.threshold(1, 50, 0.3), 0.3);
        assert_eq!(PowerLawVariant::FiniteVolume.exponent(2), 3);
        assert_eq!(PowerLawVariant::InfiniteVolumeProxy.exponent(3), 8);
        // e^{−μL} eventually beats L^{−k}
        let sup = MomentEstimate::exact((-0.5f64 * 200.0).exp());
        for v in [PowerLawVariant::FiniteVolume, PowerLawVariant::InfiniteVolumeProxy] {
            let (_, pass, pass_ci) = power_law_verdict(&sup, 3, 200, v, &PowerLawOptions { b: 1e-3, l_o: 4 }).unwrap();
            assert!(pass && pass_ci);
        }
        assert!(power_law_verdict(&sup, 1, 3, PowerLawVariant::FiniteVolume, &opts).is_err());
    }

    #[test]
    fn mobility_edge_cases() {
        let slow: Vec<(u32, MomentEstimate)> = (4..20).map(|l| (l, MomentEstimate::exact(1.0 / l as f64))).collect();
        let r = mobility_edge_bound_check(&slow, 2, PowerLawVariant::FiniteVolume, 1.0).unwrap();
        assert!(r.consistent);
        let fast: Vec<(u32, MomentEstimate)> =
            (4..40).map(|l| (l, MomentEstimate::exact((-(l as f64)).exp()))).collect();
        let r = mobility_edge_bound_check(&fast, 2, PowerLawVariant::FiniteVolume, 1.0).unwrap();
        assert!(!r.consistent);
        assert!(r.note.contains("inconsistent"));
        // d = 1: constant bound
        let r = mobility_edge_bound_check(&slow, 1, PowerLawVariant::InfiniteVolumeProxy, 0.1).unwrap();
        assert!(r.rows.iter().all(|row| row.bound == 0.1));
    }

    #[test]
    fn upper_pass_and_lower_satisfied_are_exclusive() {
        let opts = PowerLawOptions { b: 0.02, l_o: 4 };
        for l in 4..12u32 {
            let m = MomentEstimate::exact(0.5 / l.pow(3) as f64);
            for v in [PowerLawVariant::FiniteVolume, PowerLawVariant::InfiniteVolumeProxy] {
                let (_, pass, _) = power_law_verdict(&m, 2, l, v, &opts).unwrap();
                let edge = mobility_edge_bound_check(&[(l, m.clone())], 2, v, opts.b).unwrap();
                assert!(!(pass && edge.consistent));
            }
        }
    }

    #[test]
    fn off_axis_requires_zero_and_is_consistent() {
        let m = DisorderModel::standard(30.0).unwrap();
        let region = Arc::new(Region::boxed(&[0], &[9]).unwrap());
        let (x, y) = (Site::new(vec![0]), Site::new(vec![9]));
        let plan = SamplingPlan::new(200, 4);
        let opts = EvalOptions::default();
        assert!(off_axis_scan(&m, &region, &x, &y, 0.0, &[0.1, 1.0], 1.0 / 3.0, &plan, &opts).is_err());

        let scan = off_axis_scan(&m, &region, &x, &y, 0.0, &[0.0, 0.1, 1.0, 10.0], 1.0 / 3.0, &plan, &opts).unwrap();
        let q = MomentQuery {
            region: Arc::clone(&region),
            x: x.clone(),
            y: y.clone(),
            z: SpectralPoint::real(0.0),
            s: 1.0 / 3.0,
            restrict_to: None,
        };
        assert_eq!(scan.points[0].1, estimate_moment(&m, &q, &plan, &opts).unwrap());
        assert!(scan.max_at_real_axis && scan.max_eta == 0.0);

        let span = 4.0 + 30.0;
        let far = off_axis_scan(&m, &region, &x, &x, 0.0, &[0.0, 2.0 * span], 0.5, &plan, &opts).unwrap();
        assert!(far.points[1].1.value <= (2.0 * span).powf(-0.5) + 1e-12);
    }

    #[test]
    fn eta_symmetry() {
        let m = DisorderModel::standard(3.0).unwrap();
        let region = Arc::new(Region::boxed(&[0], &[5]).unwrap());
        let (x, y) = (Site::new(vec![0]), Site::new(vec![3]));
        let plan = SamplingPlan::new(200, 9);
        let scan =
            off_axis_scan(&m, &region, &x, &y, 0.2, &[-0.5, 0.0, 0.5], 0.5, &plan, &EvalOptions::default()).unwrap();
        // same realizations, conjugate resolvents: identical moduli
        assert!((scan.points[0].1.value - scan.points[2].1.value).abs() < 1e-12);
    }
}
