//! Green function entries G(x, y; z) = ⟨x|(H − z)⁻¹|y⟩.
//!
//! Finite-volume solves use a banded LU factorization with partial pivoting
//! (real arithmetic when η = 0) up to a configurable size and restarted GMRES
//! above it. Whatever the route, a returned row satisfies
//! ‖(H − z)g − e_x‖_∞ < tol·(1 + ‖g‖_∞).

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Region, Site};
use crate::operator::OperatorSample;

/// A point z = E + iη of the complex energy plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub energy: f64,
    pub eta: f64,
}

impl SpectralPoint {
    pub fn new(energy: f64, eta: f64) -> Self {
        SpectralPoint { energy, eta }
    }

    pub fn real(energy: f64) -> Self {
        SpectralPoint { energy, eta: 0.0 }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.energy, self.eta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Largest region handled by the direct banded factorization.
    pub direct_max_sites: usize,
    /// Relative residual target.
    pub residual_tol: f64,
    pub gmres_restart: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            direct_max_sites: 20_000,
            residual_tol: 1e-10,
            gmres_restart: 60,
            max_iterations: 20_000,
        }
    }
}

/// Condition estimates above this mark a sample as near-singular.
pub const NEAR_SINGULAR_CONDITION: f64 = 1e14;

/// A full row (equivalently column, since H − z is complex symmetric) of the
/// resolvent.
#[derive(Clone, Debug)]
pub struct GreenRow {
    pub values: Vec<Complex64>,
    /// Lower bound on κ_∞(H − z): ‖H − z‖_∞ · ‖g‖_1.
    pub condition: f64,
    pub residual: f64,
}

impl GreenRow {
    pub fn get(&self, region: &Region, y: &Site) -> Result<Complex64> {
        Ok(self.values[region.require_index(y)?])
    }

    pub fn near_singular(&self) -> bool {
        self.condition > NEAR_SINGULAR_CONDITION
    }
}

/// G(x, y; z).
pub fn green_entry(
    sample: &OperatorSample,
    x: &Site,
    y: &Site,
    z: SpectralPoint,
    opts: &SolverOptions,
) -> Result<Complex64> {
    let row = green_row(sample, x, z, opts)?;
    row.get(sample.region(), y)
}

/// All entries G(x, ·; z) from one solve.
pub fn green_row(sample: &OperatorSample, x: &Site, z: SpectralPoint, opts: &SolverOptions) -> Result<GreenRow> {
    let xi = sample.region().require_index(x)?;
    green_row_index(sample, xi, z, opts)
}

pub(crate) fn green_row_index(
    sample: &OperatorSample,
    xi: usize,
    z: SpectralPoint,
    opts: &SolverOptions,
) -> Result<GreenRow> {
    if !(z.energy.is_finite() && z.eta.is_finite()) {
        return Err(Error::InvalidParameter("spectral point must be finite".into()));
    }
    let n = sample.len();
    let values = if n <= opts.direct_max_sites {
        if z.eta == 0.0 {
            let lu = BandedLu::factor(sample, z.energy)?;
            let mut rhs = vec![0.0; n];
            rhs[xi] = 1.0;
            lu.solve_refined(sample, z.energy, rhs)?
                .into_iter()
                .map(|v| Complex64::new(v, 0.0))
                .collect()
        } else {
            let lu = BandedLu::factor(sample, z.z())?;
            let mut rhs = vec![Complex64::new(0.0, 0.0); n];
            rhs[xi] = Complex64::new(1.0, 0.0);
            lu.solve_refined(sample, z.z(), rhs)?
        }
    } else {
        gmres(sample, xi, z.z(), opts)?
    };

    let g_inf = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let g_one: f64 = values.iter().map(|v| v.norm()).sum();
    if !g_one.is_finite() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
            reason: "non-finite solution".into(),
        });
    }
    let a_norm = sample
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, d)| (Complex64::new(*d, 0.0) - z.z()).norm() + sample.region().neighbors(i).len() as f64)
        .fold(0.0, f64::max);
    let condition = a_norm * g_one;
    let residual = residual_inf(sample, z.z(), &values, xi);
    if residual >= opts.residual_tol * (1.0 + g_inf) {
        return Err(Error::Singular {
            condition,
            reason: format!("residual {residual:.3e} above target"),
        });
    }
    Ok(GreenRow {
        values,
        condition,
        residual,
    })
}

fn residual_inf(sample: &OperatorSample, z: Complex64, g: &[Complex64], xi: usize) -> f64 {
    let hg = sample.apply(g);
    hg.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (h, v))| {
            let e = if i == xi { 1.0 } else { 0.0 };
            (h - z * v - e).norm()
        })
        .fold(0.0, f64::max)
}

/// Field operations needed by the banded factorization.
pub(crate) trait Field:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + PartialEq
{
    fn zero() -> Self;
    fn from_real(v: f64) -> Self;
    fn modulus(self) -> f64;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(v: f64) -> Self {
        v
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Field for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// LU factorization of H − z in band storage, with row interchanges.
///
/// Row `i` stores the absolute columns `[i − kl, i + kl + ku]`; partial
/// pivoting keeps every row inside that window.
pub(crate) struct BandedLu<T> {
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Field> BandedLu<T> {
    pub(crate) fn factor(sample: &OperatorSample, z: T) -> Result<Self> {
        let n = sample.len();
        let kl = sample.bandwidth();
        let width = 3 * kl + 1;
        let mut lu = BandedLu {
            n,
            kl,
            width,
            data: vec![T::zero(); n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            *lu.at_mut(i, i) = T::from_real(sample.diagonal()[i]) - z;
            for &j in sample.region().neighbors(i) {
                *lu.at_mut(i, j) = T::from_real(-1.0);
            }
        }
        let hi_col = |k: usize| (k + 2 * kl).min(n - 1);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let (mut p, mut best) = (k, lu.at(k, k).modulus());
            for i in k + 1..=last_row {
                let m = lu.at(i, k).modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                    reason: format!("zero pivot at column {k}"),
                });
            }
            lu.pivots[k] = p;
            if p != k {
                for c in k..=hi_col(k) {
                    let a = lu.at(k, c);
                    let b = lu.at(p, c);
                    *lu.at_mut(k, c) = b;
                    *lu.at_mut(p, c) = a;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l == T::zero() {
                    continue;
                }
                for c in k + 1..=hi_col(k) {
                    let u = lu.at(k, c);
                    *lu.at_mut(i, c) = lu.at(i, c) - l * u;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn slot(&self, i: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= i && col <= i + 2 * self.kl);
        i * self.width + (col + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, col: usize) -> T {
        self.data[self.slot(i, col)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, col: usize) -> &mut T {
        let s = self.slot(i, col);
        &mut self.data[s]
    }

    pub(crate) fn solve(&self, mut b: Vec<T>) -> Vec<T> {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] = b[i] - self.at(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for c in k + 1..=(k + 2 * kl).min(n - 1) {
                acc = acc - self.at(k, c) * b[c];
            }
            b[k] = acc / self.at(k, k);
        }
        b
    }

    /// Solve, then apply one step of iterative refinement.
    fn solve_refined(&self, sample: &OperatorSample, z: T, rhs: Vec<T>) -> Result<Vec<T>> {
        let mut x = self.solve(rhs.clone());
        let hx = sample.apply(&x);
        let r: Vec<T> = rhs
            .iter()
            .zip(hx.iter().zip(&x))
            .map(|(b, (h, xi))| *b - (*h - z * *xi))
            .collect();
        let dx = self.solve(r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi = *xi + d;
        }
        if x.iter().any(|v| !v.modulus().is_finite()) {
            return Err(Error::Singular {
                condition: f64::INFINITY,
                reason: "non-finite solution".into(),
            });
        }
        Ok(x)
    }
}

/// Restarted GMRES for (H − z) g = e_x.
fn gmres(sample: &OperatorSample, xi: usize, z: Complex64, opts: &SolverOptions) -> Result<Vec<Complex64>> {
    let n = sample.len();
    let m = opts.gmres_restart.max(1);
    let zero = Complex64::new(0.0, 0.0);
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let norm = |a: &[Complex64]| -> f64 { a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() };
    let op = |v: &[Complex64]| -> Vec<Complex64> {
        let hv = sample.apply(v);
        hv.into_iter().zip(v).map(|(h, x)| h - z * x).collect()
    };

    let mut x = vec![zero; n];
    let mut b = vec![zero; n];
    b[xi] = Complex64::new(1.0, 0.0);
    let mut iterations = 0;
    loop {
        let ax = op(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let g_inf = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let r_inf = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if r_inf < 0.5 * opts.residual_tol * (1.0 + g_inf) {
            return Ok(x);
        }
        if iterations >= opts.max_iterations {
            return Err(Error::Singular {
                condition: f64::NAN,
                reason: format!("GMRES stalled at residual {r_inf:.3e} after {iterations} iterations"),
            });
        }
        let beta = norm(&r);
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![zero; m]; m + 1];
        let mut cs = vec![zero; m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            iterations += 1;
            let mut w = op(&basis[k]);
            for (j, v) in basis.iter().enumerate() {
                let hjk = dot(v, &w);
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hjk * vi;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = Complex64::new(hn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k].norm_sqr() + h[k + 1][k].norm_sqr()).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = Complex64::new(denom, 0.0);
            h[k + 1][k] = zero;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            if hn == 0.0 || g[k + 1].norm() < 0.1 * opts.residual_tol {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xv, bv) in x.iter_mut().zip(&basis[j]) {
                *xv += yj * bv;
            }
        }
    }
}

/// G(x, y; z) on a contiguous 1-D chain by continued-fraction (transfer
/// matrix) recursions, with products accumulated in log form.
pub fn green_1d_transfer(sample: &OperatorSample, x: &Site, y: &Site, z: SpectralPoint) -> Result<Complex64> {
    let region = sample.region();
    if region.dim() != 1 {
        return Err(Error::InvalidRegion("transfer-matrix Green function needs d = 1".into()));
    }
    let (lo, hi) = region.bounding_box();
    if (hi[0] - lo[0] + 1) as usize != region.len() {
        return Err(Error::InvalidRegion("transfer-matrix Green function needs a contiguous chain".into()));
    }
    let i = region.require_index(x)?;
    let j = region.require_index(y)?;
    let (i, j) = (i.min(j), i.max(j));
    let n = region.len();
    let a: Vec<Complex64> = sample
        .diagonal()
        .iter()
        .map(|d| Complex64::new(*d, 0.0) - z.z())
        .collect();

    // left[k]: diagonal Green function of the chain [0, k] at site k
    let mut left = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let prev = if k == 0 { Complex64::new(0.0, 0.0) } else { left[k - 1] };
        left[k] = (a[k] - prev).inv();
    }
    // right[k]: diagonal Green function of the chain [k, n−1] at site k
    let mut right = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let next = if k + 1 == n { Complex64::new(0.0, 0.0) } else { right[k + 1] };
        right[k] = (a[k] - next).inv();
    }
    let sl = if i == 0 { Complex64::new(0.0, 0.0) } else { left[i - 1] };
    let sr = if i + 1 == n { Complex64::new(0.0, 0.0) } else { right[i + 1] };
    let gii = (a[i] - sl - sr).inv();
    let mut log_g = gii.ln();
    for r in &right[i + 1..=j] {
        log_g += r.ln();
    }
    let g = log_g.exp();
    if !(g.re.is_finite() && g.im.is_finite()) || left.iter().chain(&right).any(|v| !v.norm().is_finite()) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
            reason: "transfer recursion hit an exact resonance".into(),
        });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::disorder::{DisorderModel, Realization};
    use crate::operator::{assemble, LaplacianConvention};

    fn sample_on(region: Region, lambda: f64, seed: u64) -> OperatorSample {
        let r = Arc::new(region);
        let model = DisorderModel::standard(lambda).unwrap();
        let real = model.sample(&r, seed, 0).unwrap();
        assemble(&r, &real, lambda, LaplacianConvention::HoppingOnly).unwrap()
    }

    fn dense_inverse(sample: &OperatorSample, z: Complex64) -> DMatrix<Complex64> {
        let m = sample.to_dense().map(|v| Complex64::new(v, 0.0)) - DMatrix::identity(sample.len(), sample.len()) * z;
        m.try_inverse().unwrap()
    }

    #[test]
    fn single_site() {
        let r = Arc::new(Region::from_sites(1, [Site::origin(1)]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.7]).unwrap();
        let h = assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap();
        let z = SpectralPoint::new(0.2, 0.3);
        let g = green_entry(&h, &Site::origin(1), &Site::origin(1), z, &SolverOptions::default()).unwrap();
        let expect = (Complex64::new(0.7, 0.0) - z.z()).inv();
        assert!((g - expect).norm() < 1e-15);
    }

    #[test]
    fn two_site_free_chain_at_i() {
        let r = Arc::new(Region::boxed(&[1], &[2]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.0, 0.0]).unwrap();
        let h = assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap();
        let g = green_entry(
            &h,
            &Site::new(vec![1]),
            &Site::new(vec![2]),
            SpectralPoint::new(0.0, 1.0),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((g - Complex64::new(-0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn symmetric_in_x_and_y() {
        let h = sample_on(Region::cube(2, 3).unwrap(), 3.0, 8);
        let opts = SolverOptions::default();
        let z = SpectralPoint::new(0.4, 0.05);
        let sites = h.region().sites().to_vec();
        let x = &sites[3];
        for y in sites.iter().step_by(7) {
            let a = green_entry(&h, x, y, z, &opts).unwrap();
            let b = green_entry(&h, y, x, z, &opts).unwrap();
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn row_matches_dense_inverse_on_box() {
        let h = sample_on(Region::boxed(&[0, 0], &[9, 9]).unwrap(), 2.0, 3);
        let opts = SolverOptions::default();
        for z in [SpectralPoint::real(0.3), SpectralPoint::new(-1.0, 0.2)] {
            let inv = dense_inverse(&h, z.z());
            let row = green_row(&h, h.region().site(45), z, &opts).unwrap();
            for (k, v) in row.values.iter().enumerate() {
                assert!((v - inv[(45, k)]).norm() < 1e-10, "{v} vs {}", inv[(45, k)]);
            }
        }
    }

    #[test]
    fn row_matches_entries() {
        let h = sample_on(Region::cube(1, 5).unwrap(), 1.0, 1);
        let opts = SolverOptions::default();
        let z = SpectralPoint::real(0.1);
        let x = Site::origin(1);
        let row = green_row(&h, &x, z, &opts).unwrap();
        for y in h.region().sites() {
            let e = green_entry(&h, &x, y, z, &opts).unwrap();
            assert!((row.get(h.region(), y).unwrap() - e).norm() < 1e-12);
        }
    }

    #[test]
    fn gmres_path_matches_direct() {
        let h = sample_on(Region::cube(2, 5).unwrap(), 2.0, 12);
        let z = SpectralPoint::new(0.5, 0.3);
        let direct = green_row(&h, &Site::origin(2), z, &SolverOptions::default()).unwrap();
        let iterative = green_row(
            &h,
            &Site::origin(2),
            z,
            &SolverOptions {
                direct_max_sites: 10,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        for (a, b) in direct.values.iter().zip(&iterative.values) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn transfer_matches_two_by_two() {
        let r = Arc::new(Region::boxed(&[0], &[1]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.3, -0.8]).unwrap();
        let h = assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap();
        let z = SpectralPoint::new(0.1, 0.2);
        let inv = dense_inverse(&h, z.z());
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let g = green_1d_transfer(&h, &Site::new(vec![i]), &Site::new(vec![j]), z).unwrap();
            assert!((g - inv[(i as usize, j as usize)]).norm() < 1e-14);
        }
    }

    #[test]
    fn transfer_matches_solver_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let opts = SolverOptions::default();
        for t in 0..20 {
            let lambda = rng.random_range(0.5..20.0);
            let h = sample_on(Region::boxed(&[0], &[49]).unwrap(), lambda, t);
            let z = SpectralPoint::new(rng.random_range(-3.0..3.0), rng.random_range(-0.5..0.5));
            let x = Site::new(vec![rng.random_range(0..50)]);
            let y = Site::new(vec![rng.random_range(0..50)]);
            let a = green_entry(&h, &x, &y, z, &opts).unwrap();
            let b = green_1d_transfer(&h, &x, &y, z).unwrap();
            assert!((a - b).norm() <= 1e-8 * a.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn transfer_matches_free_chain_chebyshev() {
        // (T⁻¹)_{xy} = U_{x−1}(t) U_{N−y}(t) / U_N(t), x ≤ y (1-based), for
        // T = tridiag(−1, 2t, −1); here 2t = −z.
        let n = 12;
        let r = Arc::new(Region::boxed(&[1], &[n]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.0; n as usize]).unwrap();
        let h = assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap();
        for e in [-3.5, 2.7, 6.0] {
            let t = -e / 2.0;
            let mut u = vec![1.0, 2.0 * t];
            for k in 2..=n as usize {
                let next = 2.0 * t * u[k - 1] - u[k - 2];
                u.push(next);
            }
            for (x, y) in [(1, 1), (2, 7), (5, 12), (12, 12)] {
                let expect = u[x - 1] * u[n as usize - y] / u[n as usize];
                let g = green_1d_transfer(&h, &Site::new(vec![x as i32]), &Site::new(vec![y as i32]), SpectralPoint::real(e))
                    .unwrap();
                assert!((g.re - expect).abs() < 1e-12 * expect.abs().max(1e-300), "{g} vs {expect}");
                assert!(g.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transfer_rejects_non_chain() {
        let h = sample_on(Region::cube(2, 1).unwrap(), 1.0, 0);
        assert!(green_1d_transfer(&h, &Site::origin(2), &Site::origin(2), SpectralPoint::real(0.0)).is_err());
        let gap = Region::from_sites(1, [Site::new(vec![0]), Site::new(vec![2])]).unwrap();
        let h = sample_on(gap, 1.0, 0);
        assert!(green_1d_transfer(&h, &Site::new(vec![0]), &Site::new(vec![0]), SpectralPoint::real(0.0)).is_err());
    }

    #[test]
    fn exact_resonance_is_reported() {
        let r = Arc::new(Region::from_sites(1, [Site::origin(1)]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.25]).unwrap();
        let h = assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap();
        let err = green_row(&h, &Site::origin(1), SpectralPoint::real(0.25), &SolverOptions::default());
        assert!(matches!(err, Err(Error::Singular { .. })));
    }

    #[test]
    fn first_resolvent_identity() {
        let h = sample_on(Region::cube(2, 2).unwrap(), 1.5, 21);
        let opts = SolverOptions::default();
        let (z1, z2) = (SpectralPoint::new(0.2, 0.4), SpectralPoint::new(-0.7, 0.1));
        let n = h.len();
        // columns of G(z2)
        let g2: Vec<Vec<Complex64>> = (0..n)
            .map(|k| green_row_index(&h, k, z2, &opts).unwrap().values)
            .collect();
        let g1_row = green_row_index(&h, 0, z1, &opts).unwrap().values;
        let g2_row = &g2[0];
        let dz = z1.z() - z2.z();
        for y in 0..n {
            let prod: Complex64 = (0..n).map(|k| g1_row[k] * g2[k][y]).sum();
            let lhs = g1_row[y] - g2_row[y];
            assert!((lhs - dz * prod).norm() < 1e-9);
        }
    }
}
