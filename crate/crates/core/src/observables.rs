//! Spectral diagnostics on finite volumes: eigen-decompositions, the
//! density-of-states input condition, Lifschitz-tail probes, adjacent-gap
//! ratios, the Fermi projection kernel and the dynamical-localization bound.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::lattice::{Region, Site};
use crate::moments::{sample_realizations, EvalOptions, Evaluated, RealizationSamples, SamplingPlan};
use crate::operator::{assemble, LaplacianConvention, OperatorSample};

/// Largest region for dense decompositions.
pub const DENSE_MAX_SITES: usize = 4000;

/// Poisson value of the mean adjacent-gap ratio, 2 ln 2 − 1.
pub const POISSON_GAP_RATIO: f64 = 0.386_294_361_119_890_6;

/// Full decomposition H = Σ_n E_n ψ_n ψ_nᵀ with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    region: Arc<Region>,
    pub eigenvalues: Vec<f64>,
    /// Column `n` is ψ_n, rows follow the region's site index.
    pub eigenvectors: DMatrix<f64>,
}

pub fn eigensystem(sample: &OperatorSample) -> Result<EigenSystem> {
    if sample.len() > DENSE_MAX_SITES {
        return Err(Error::TooLarge {
            sites: sample.len(),
            limit: DENSE_MAX_SITES,
        });
    }
    let eig = SymmetricEigen::new(sample.to_dense());
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(sample.len(), sample.len(), |i, n| eig.eigenvectors[(i, order[n])]);
    Ok(EigenSystem {
        region: Arc::clone(sample.region()),
        eigenvalues,
        eigenvectors,
    })
}

impl EigenSystem {
    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// ψ_n(x).
    pub fn amplitude(&self, n: usize, x: usize) -> f64 {
        self.eigenvectors[(x, n)]
    }

    /// P_{H ≤ E_F} as a dense matrix.
    pub fn projection_matrix(&self, e_fermi: f64) -> DMatrix<f64> {
        let k = self.eigenvalues.partition_point(|&e| e <= e_fermi);
        let v = self.eigenvectors.columns(0, k);
        v * v.transpose()
    }

    /// |⟨x| e^{−itH} P_{(a,b)} |y⟩|.
    pub fn evolved_amplitude(&self, window: (f64, f64), x: &Site, y: &Site, t: f64) -> Result<f64> {
        let (xi, yi) = (self.region.require_index(x)?, self.region.require_index(y)?);
        let amp: Complex64 = self
            .in_window(window)
            .map(|n| Complex64::from_polar(self.amplitude(n, xi) * self.amplitude(n, yi), -t * self.eigenvalues[n]))
            .sum();
        Ok(amp.norm())
    }

    fn in_window(&self, (a, b): (f64, f64)) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&n| self.eigenvalues[n] > a && self.eigenvalues[n] < b)
    }
}

/// Eigenvalues only, ascending. Contiguous 1-D chains use implicit QL on the
/// tridiagonal matrix; other regions a dense symmetric solver.
pub fn spectrum(sample: &OperatorSample) -> Result<Vec<f64>> {
    let region = sample.region();
    let (lo, hi) = region.bounding_box();
    let mut eig = if region.dim() == 1 && (hi[0] - lo[0] + 1) as usize == region.len() {
        tridiagonal_eigenvalues(sample.diagonal().to_vec(), vec![-1.0; region.len().saturating_sub(1)])?
    } else {
        if sample.len() > DENSE_MAX_SITES {
            return Err(Error::TooLarge {
                sites: sample.len(),
                limit: DENSE_MAX_SITES,
            });
        }
        sample.to_dense().symmetric_eigenvalues().iter().copied().collect()
    };
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` by the implicit QL method with Wilkinson shifts.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    let mut e = off;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Singular {
                    condition: f64::NAN,
                    reason: "tridiagonal QL did not converge".into(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Adjacent-gap ratios min(g_n, g_{n+1}) / max(g_n, g_{n+1}) for eigenvalues
/// inside the open window `(a, b)`. Pairs of zero gaps are skipped.
pub fn gap_ratios(eigenvalues: &[f64], (a, b): (f64, f64)) -> Result<Vec<f64>> {
    let inside: Vec<f64> = eigenvalues.iter().copied().filter(|&e| e > a && e < b).collect();
    if inside.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} eigenvalues in ({a}, {b}); need at least 3",
            inside.len()
        )));
    }
    let gaps: Vec<f64> = inside.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(gaps
        .windows(2)
        .filter(|g| g[0].max(g[1]) > 0.0)
        .map(|g| g[0].min(g[1]) / g[0].max(g[1]))
        .collect())
}

/// Mean adjacent-gap ratio in the window.
pub fn gap_statistics(eigenvalues: &[f64], window: (f64, f64)) -> Result<f64> {
    let r = gap_ratios(eigenvalues, window)?;
    if r.is_empty() {
        return Err(Error::InsufficientData("all gaps in window are zero".into()));
    }
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

/// |⟨x| P_{H ≤ E_F} |y⟩| = |Σ_{E_n ≤ E_F} ψ_n(x) ψ_n(y)|.
pub fn projection_kernel(eigs: &EigenSystem, e_fermi: f64, x: &Site, y: &Site) -> Result<f64> {
    let (xi, yi) = (eigs.region.require_index(x)?, eigs.region.require_index(y)?);
    let k = eigs.eigenvalues.partition_point(|&e| e <= e_fermi);
    Ok((0..k).map(|n| eigs.amplitude(n, xi) * eigs.amplitude(n, yi)).sum::<f64>().abs())
}

/// Σ_{E_n ∈ (a,b)} |ψ_n(x)||ψ_n(y)|, which bounds
/// sup_t |⟨x| e^{−itH} P_{(a,b)} |y⟩|.
pub fn dynamical_bound(eigs: &EigenSystem, window: (f64, f64), x: &Site, y: &Site) -> Result<f64> {
    let (xi, yi) = (eigs.region.require_index(x)?, eigs.region.require_index(y)?);
    Ok(eigs
        .in_window(window)
        .map(|n| (eigs.amplitude(n, xi) * eigs.amplitude(n, yi)).abs())
        .sum())
}

/// A binomial proportion with a 95% Wilson score interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: usize,
    pub n_samples: usize,
}

impl ProbabilityEstimate {
    pub fn from_counts(hits: usize, n: usize) -> Self {
        let z = 1.959_963_984_540_054;
        let nf = n as f64;
        let p = hits as f64 / nf;
        let denom = 1.0 + z * z / nf;
        let centre = (p + z * z / (2.0 * nf)) / denom;
        let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
        ProbabilityEstimate {
            probability: p,
            ci_low: if hits == 0 { 0.0 } else { (centre - half).max(0.0) },
            ci_high: if hits == n { 1.0 } else { (centre + half).min(1.0) },
            hits,
            n_samples: n,
        }
    }
}

/// Parameters of the density-of-states input condition
/// Prob[dist(σ(H_{Λ_L}), E) ≤ δ_L] < P_L.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosProbe {
    pub energy: f64,
    pub delta_l: f64,
    pub p_l: f64,
    pub l: u32,
    pub dim: usize,
    /// Scaling exponent with L^β δ_L bounded below; recorded, not enforced.
    pub beta: f64,
    /// Scaling exponent with L^ξ P_L bounded below; must exceed 3(d − 1).
    pub xi: f64,
}

impl DosProbe {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_l > 0.0) {
            return Err(Error::InvalidParameter("δ_L must be positive".into()));
        }
        if !(self.p_l > 0.0 && self.p_l < 1.0) {
            return Err(Error::InvalidParameter("P_L must lie in (0, 1)".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter("β must lie in (0, 1)".into()));
        }
        if !(self.xi > 3.0 * (self.dim as f64 - 1.0)) {
            return Err(Error::InvalidParameter(format!("ξ must exceed 3(d − 1) = {}", 3 * (self.dim - 1))));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DosReport {
    pub probe: DosProbe,
    pub estimate: ProbabilityEstimate,
    /// Upper confidence bound below P_L.
    pub pass: bool,
}

/// Does dist(σ, E) ≤ δ hold for this spectrum?
pub fn spectrum_within(eigenvalues: &[f64], energy: f64, delta: f64) -> bool {
    eigenvalues.iter().any(|e| (e - energy).abs() <= delta)
}

/// Fraction of realizations of H_{Λ_L} with an eigenvalue within δ_L of E.
pub fn dos_condition_probability(
    model: &DisorderModel,
    probe: &DosProbe,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<DosReport> {
    probe.validate()?;
    let region = Arc::new(Region::cube(probe.dim, probe.l)?);
    let hits = count_realizations(model, &region, plan, opts, |eig| spectrum_within(eig, probe.energy, probe.delta_l))?;
    let estimate = ProbabilityEstimate::from_counts(hits, plan.n_samples);
    Ok(DosReport {
        probe: probe.clone(),
        pass: estimate.ci_high < probe.p_l,
        estimate,
    })
}

fn count_realizations<F>(
    model: &DisorderModel,
    region: &Arc<Region>,
    plan: &SamplingPlan,
    opts: &EvalOptions,
    event: F,
) -> Result<usize>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    if plan.n_samples < 100 {
        return Err(Error::InvalidParameter("n_samples must be at least 100".into()));
    }
    let flags = (0..plan.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let real = model.sample(region, plan.seed, i)?;
            let h = assemble(region, &real, model.lambda, opts.convention)?;
            Ok(event(&spectrum(&h)?))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(flags.into_iter().filter(|&b| b).count())
}

/// Bottom of the spectrum of −Δ on Λ_L under the given convention.
pub fn kinetic_infimum(dim: usize, l: u32, convention: LaplacianConvention) -> f64 {
    let n = 2.0 * l as f64 + 1.0;
    convention.diagonal_shift(dim) - 2.0 * dim as f64 * (std::f64::consts::PI / (n + 1.0)).cos()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LifschitzReport {
    pub l: u32,
    pub dim: usize,
    pub delta_e: f64,
    /// inf σ(−Δ_{Λ_L}) + λ·inf supp V under the active convention.
    pub e0: f64,
    /// −λ·inf supp V, the value quoted without the kinetic term.
    pub e0_literal: f64,
    pub estimate: ProbabilityEstimate,
    /// L^d · exp(−ΔE^{−d/2}) with unit constant; a non-rigorous guide.
    pub reference_bound: f64,
}

/// Prob[inf σ(H_{Λ_L}) ≤ E₀ + ΔE].
pub fn lifschitz_probe(
    model: &DisorderModel,
    dim: usize,
    l: u32,
    delta_e: f64,
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<LifschitzReport> {
    let region = Arc::new(Region::cube(dim, l)?);
    let (v0, _) = model.support();
    let e0 = kinetic_infimum(dim, l, opts.convention) + model.lambda * v0;
    let threshold = e0 + delta_e;
    let hits = count_realizations(model, &region, plan, opts, |eig| eig[0] <= threshold)?;
    let reference_bound = if delta_e > 0.0 {
        (l as f64).powi(dim as i32) * (-delta_e.powf(-(dim as f64) / 2.0)).exp()
    } else {
        0.0
    };
    Ok(LifschitzReport {
        l,
        dim,
        delta_e,
        e0,
        e0_literal: -model.lambda * v0,
        estimate: ProbabilityEstimate::from_counts(hits, plan.n_samples),
        reference_bound,
    })
}

/// Per-realization |⟨O|P_{H ≤ E_F}|y⟩| for every `y` in `targets`.
pub fn projection_kernel_samples(
    model: &DisorderModel,
    region: &Arc<Region>,
    e_fermi: f64,
    targets: &[Site],
    plan: &SamplingPlan,
    opts: &EvalOptions,
) -> Result<RealizationSamples> {
    let origin = Site::origin(region.dim());
    sample_realizations(model, region, plan, |real| {
        let h = assemble(region, real, model.lambda, opts.convention)?;
        let eigs = eigensystem(&h)?;
        let values = targets
            .iter()
            .map(|y| projection_kernel(&eigs, e_fermi, &origin, y))
            .collect::<Result<Vec<_>>>()?;
        Ok(Evaluated {
            values,
            near_singular: false,
        })
    })
}

/// Spectra and pooled gap ratios for a set of realizations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectraSummary {
    pub n_realizations: usize,
    pub window: (f64, f64),
    pub mean_gap_ratio: f64,
    pub n_ratios: usize,
    pub poisson_reference: f64,
}

/// Eigenvalues of realizations `0..n` of H_{Λ} (in realization order).
pub fn sample_spectra(
    model: &DisorderModel,
    region: &Arc<Region>,
    n: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<Vec<f64>>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let real = model.sample(region, seed, i)?;
            spectrum(&assemble(region, &real, model.lambda, opts.convention)?)
        })
        .collect()
}

pub fn summarize_spectra(spectra: &[Vec<f64>], window: (f64, f64)) -> Result<SpectraSummary> {
    let mut all = Vec::new();
    for eig in spectra {
        all.extend(gap_ratios(eig, window)?);
    }
    if all.is_empty() {
        return Err(Error::InsufficientData("no gap ratios in window".into()));
    }
    Ok(SpectraSummary {
        n_realizations: spectra.len(),
        window,
        mean_gap_ratio: all.iter().sum::<f64>() / all.len() as f64,
        n_ratios: all.len(),
        poisson_reference: POISSON_GAP_RATIO,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::disorder::Realization;

    fn sample(region: Region, lambda: f64, seed: u64) -> OperatorSample {
        let r = Arc::new(region);
        let m = DisorderModel::standard(lambda).unwrap();
        let real = m.sample(&r, seed, 0).unwrap();
        assemble(&r, &real, lambda, LaplacianConvention::HoppingOnly).unwrap()
    }

    fn free_chain(n: i32) -> OperatorSample {
        let r = Arc::new(Region::boxed(&[1], &[n]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.0; n as usize]).unwrap();
        assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap()
    }

    #[test]
    fn single_site_decomposition() {
        let r = Arc::new(Region::from_sites(1, [Site::origin(1)]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.4]).unwrap();
        let h = assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap();
        let e = eigensystem(&h).unwrap();
        assert_eq!(e.eigenvalues, vec![0.4]);
        assert_eq!(e.amplitude(0, 0).abs(), 1.0);
        let o = Site::origin(1);
        assert_eq!(projection_kernel(&e, 1.0, &o, &o).unwrap(), 1.0);
        assert_eq!(dynamical_bound(&e, (0.0, 1.0), &o, &o).unwrap(), 1.0);
        assert_eq!(dynamical_bound(&e, (0.5, 0.6), &o, &o).unwrap(), 0.0);
    }

    #[test]
    fn free_chain_spectrum_both_routes() {
        let h = free_chain(5);
        let dense = eigensystem(&h).unwrap().eigenvalues;
        let ql = spectrum(&h).unwrap();
        let mut expect: Vec<f64> = (1..=5)
            .map(|k| -2.0 * (std::f64::consts::PI * k as f64 / 6.0).cos())
            .collect();
        expect.sort_by(f64::total_cmp);
        for ((a, b), c) in dense.iter().zip(&ql).zip(&expect) {
            assert!((a - c).abs() < 1e-10 && (b - c).abs() < 1e-10);
        }
    }

    #[test]
    fn ql_matches_dense_on_random_chains() {
        for seed in 0..5 {
            let h = sample(Region::cube(1, 60).unwrap(), 3.0, seed);
            let ql = spectrum(&h).unwrap();
            let dense = eigensystem(&h).unwrap().eigenvalues;
            for (a, b) in ql.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn decomposition_invariants() {
        let h = sample(Region::cube(2, 3).unwrap(), 2.0, 7);
        let e = eigensystem(&h).unwrap();
        let dense = h.to_dense();
        let trace: f64 = h.diagonal().iter().sum();
        assert!((e.eigenvalues.iter().sum::<f64>() - trace).abs() < 1e-9);
        let norm = h.norm_inf();
        for n in 0..e.len() {
            let v = e.eigenvectors.column(n);
            let r = &dense * v - v * e.eigenvalues[n];
            assert!(r.amax() < 1e-9 * norm);
        }
        let gram = e.eigenvectors.transpose() * &e.eigenvectors;
        assert!((gram - DMatrix::identity(e.len(), e.len())).amax() < 1e-9);
        // Parseval on every site
        for x in 0..e.len() {
            let s: f64 = (0..e.len()).map(|n| e.amplitude(n, x).powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_properties() {
        let h = free_chain(2);
        let e = eigensystem(&h).unwrap();
        let k = projection_kernel(&e, 0.0, &Site::new(vec![1]), &Site::new(vec![2])).unwrap();
        assert!((k - 0.5).abs() < 1e-12);

        let h = sample(Region::cube(2, 2).unwrap(), 1.0, 3);
        let e = eigensystem(&h).unwrap();
        let p = e.projection_matrix(0.1);
        assert!((&p * &p - &p).amax() < 1e-9);
        let id = e.projection_matrix(1e9);
        assert!((id - DMatrix::identity(e.len(), e.len())).amax() < 1e-9);
    }

    #[test]
    fn dynamical_bound_dominates_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample(Region::cube(1, 20).unwrap(), 4.0, 2);
        let e = eigensystem(&h).unwrap();
        let (x, y) = (Site::new(vec![-3]), Site::new(vec![2]));
        let window = (-1.0, 1.5);
        let bound = dynamical_bound(&e, window, &x, &y).unwrap();
        for _ in 0..1000 {
            let t = rng.random_range(-100.0..100.0);
            assert!(e.evolved_amplitude(window, &x, &y, t).unwrap() <= bound + 1e-10);
        }
        let wider = dynamical_bound(&e, (-2.0, 2.0), &x, &y).unwrap();
        assert!(wider >= bound);
    }

    #[test]
    fn gap_ratio_cases() {
        let even: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!((gap_statistics(&even, (-1.0, 100.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(gap_statistics(&even, (0.5, 2.5)).is_err());
    }

    #[test]
    fn poisson_gap_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(f64::total_cmp);
        let r = gap_statistics(&xs, (-1.0, 2.0)).unwrap();
        assert!((r - POISSON_GAP_RATIO).abs() < 0.01, "{r}");
    }

    #[test]
    fn dos_probability_edge_cases() {
        let m = DisorderModel::standard(1.0).unwrap();
        let plan = SamplingPlan::new(100, 1);
        let opts = EvalOptions::default();
        let probe = |energy, delta_l| DosProbe {
            energy,
            delta_l,
            p_l: 0.5,
            l: 10,
            dim: 1,
            beta: 0.5,
            xi: 1.0,
        };
        // below the Gershgorin bound −2d + λ·inf V − δ
        let low = dos_condition_probability(&m, &probe(-2.5 - 0.2, 0.1), &plan, &opts).unwrap();
        assert_eq!(low.estimate.hits, 0);
        assert!(low.pass);
        let wide = dos_condition_probability(&m, &probe(0.0, 10.0), &plan, &opts).unwrap();
        assert_eq!(wide.estimate.probability, 1.0);
        assert!(!wide.pass);
        let mut bad = probe(0.0, 1.0);
        bad.dim = 2;
        bad.xi = 3.0;
        assert!(bad.validate().is_err());
    }

    /// Number of eigenvalues below t of a symmetric tridiagonal matrix with
    /// off-diagonal −1 (Sturm sequence / LDLᵀ inertia).
    fn sturm_count(diag: &[f64], t: f64) -> usize {
        let mut q = 1.0f64;
        let mut count = 0;
        for (k, d) in diag.iter().enumerate() {
            q = d - t - if k == 0 { 0.0 } else { 1.0 / q };
            if q == 0.0 {
                q = 1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn dos_probability_matches_sturm_oracle() {
        let m = DisorderModel::standard(1.0).unwrap();
        let probe = DosProbe {
            energy: 0.0,
            delta_l: 0.01,
            p_l: 0.5,
            l: 20,
            dim: 1,
            beta: 0.5,
            xi: 1.0,
        };
        let n = 10_000;
        let plan = SamplingPlan::new(n, 77);
        let report = dos_condition_probability(&m, &probe, &plan, &EvalOptions::default()).unwrap();
        let region = Arc::new(Region::cube(1, 20).unwrap());
        let oracle = (0..n as u64)
            .filter(|&i| {
                let real = m.sample(&region, 77, i).unwrap();
                let diag: Vec<f64> = real.values().iter().map(|v| v * m.lambda).collect();
                sturm_count(&diag, 0.01) > sturm_count(&diag, -0.01)
            })
            .count();
        assert_eq!(report.estimate.hits, oracle);
    }

    #[test]
    fn lifschitz_edges_and_monotonicity() {
        let m = DisorderModel::standard(2.0).unwrap();
        let plan = SamplingPlan::new(200, 5);
        let opts = EvalOptions::default();
        let neg = lifschitz_probe(&m, 1, 8, -0.01, &plan, &opts).unwrap();
        assert_eq!(neg.estimate.hits, 0);
        let span = 2.0 * 2.0 + m.lambda;
        let all = lifschitz_probe(&m, 1, 8, span + 1.0, &plan, &opts).unwrap();
        assert_eq!(all.estimate.hits, 200);
        let ps: Vec<usize> = [0.2, 0.5, 0.9]
            .iter()
            .map(|&d| lifschitz_probe(&m, 1, 8, d, &plan, &opts).unwrap().estimate.hits)
            .collect();
        assert!(ps[0] <= ps[1] && ps[1] <= ps[2]);
        assert_eq!(all.e0_literal, 1.0);
    }

    #[test]
    fn wilson_interval() {
        let p = ProbabilityEstimate::from_counts(0, 100);
        assert_eq!(p.ci_low, 0.0);
        assert!(p.ci_high > 0.0 && p.ci_high < 0.05);
        let p = ProbabilityEstimate::from_counts(50, 100);
        assert!(p.ci_low < 0.5 && p.ci_high > 0.5);
    }
}
