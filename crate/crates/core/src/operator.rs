//! Finite-volume Hamiltonians H_{Λ;ω} = −Δ + λV with truncation boundary
//! conditions.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::disorder::Realization;
use crate::error::{Error, Result};
use crate::lattice::Region;

/// How the discrete Laplacian enters the diagonal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianConvention {
    /// −Δ is minus the adjacency matrix: off-diagonal −1, zero diagonal.
    #[default]
    HoppingOnly,
    /// −Δ = 2d − adjacency.
    WithDiagonal,
}

impl LaplacianConvention {
    /// Diagonal shift contributed by the kinetic term in dimension `d`.
    pub fn diagonal_shift(self, d: usize) -> f64 {
        match self {
            LaplacianConvention::HoppingOnly => 0.0,
            LaplacianConvention::WithDiagonal => 2.0 * d as f64,
        }
    }
}

impl fmt::Display for LaplacianConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaplacianConvention::HoppingOnly => "hopping_only",
            LaplacianConvention::WithDiagonal => "with_diagonal",
        })
    }
}

impl FromStr for LaplacianConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hopping_only" => Ok(LaplacianConvention::HoppingOnly),
            "with_diagonal" => Ok(LaplacianConvention::WithDiagonal),
            other => Err(Error::Config(format!("unknown operator convention '{other}'"))),
        }
    }
}

/// One realization of H_{Λ;ω}. Off-diagonal entries are implicit: −1
/// between nearest neighbours of the region, 0 otherwise.
#[derive(Clone, Debug)]
pub struct OperatorSample {
    region: Arc<Region>,
    diag: Vec<f64>,
    lambda: f64,
    realization: Realization,
    convention: LaplacianConvention,
}

/// Assemble H_{Λ;ω} on `region` from a realization covering it.
pub fn assemble(
    region: &Arc<Region>,
    realization: &Realization,
    lambda: f64,
    convention: LaplacianConvention,
) -> Result<OperatorSample> {
    let shift = convention.diagonal_shift(region.dim());
    let diag = region
        .sites()
        .iter()
        .map(|s| {
            realization
                .value(s)
                .map(|v| lambda * v + shift)
                .ok_or_else(|| Error::MissingSite(s.0.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorSample {
        region: Arc::clone(region),
        diag,
        lambda,
        realization: realization.clone(),
        convention,
    })
}

impl OperatorSample {
    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn convention(&self) -> LaplacianConvention {
        self.convention
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    /// H_{W;ω}: the same potential values on W ⊆ Λ.
    pub fn restrict(&self, w: &Arc<Region>) -> Result<OperatorSample> {
        if !w.is_subset_of(&self.region) {
            return Err(Error::NotSubset);
        }
        assemble(w, &self.realization, self.lambda, self.convention)
    }

    /// y = H x.
    pub fn apply<T>(&self, x: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T>,
    {
        (0..self.len())
            .map(|i| {
                self.region
                    .neighbors(i)
                    .iter()
                    .fold(x[i] * self.diag[i], |acc, &j| acc - x[j])
            })
            .collect()
    }

    /// ‖H‖_∞ (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.len())
            .map(|i| self.diag[i].abs() + self.region.neighbors(i).len() as f64)
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for &j in self.region.neighbors(i) {
                m[(i, j)] = -1.0;
            }
        }
        m
    }

    /// Nonzero entries as `(row, col, value)`, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let mut row: Vec<(usize, f64)> = self.region.neighbors(i).iter().map(|&j| (j, -1.0)).collect();
            row.push((i, self.diag[i]));
            row.sort_by_key(|e| e.0);
            out.extend(row.into_iter().map(|(j, v)| (i, j, v)));
        }
        out
    }

    /// Coordinate-triplet text export: a header line with the dimension, then
    /// one `i j value` line per nonzero (0-based).
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "% {} {} {}", self.len(), self.len(), self.convention);
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{i} {j} {v}");
        }
        s
    }

    /// Index distance of the farthest off-diagonal entry from the diagonal.
    pub fn bandwidth(&self) -> usize {
        (0..self.len())
            .flat_map(|i| self.region.neighbors(i).iter().map(move |&j| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderModel;
    use crate::lattice::Site;

    fn single(v: f64, dim: usize, conv: LaplacianConvention) -> OperatorSample {
        let r = Arc::new(Region::from_sites(dim, [Site::origin(dim)]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![v]).unwrap();
        assemble(&r, &real, 1.0, conv).unwrap()
    }

    #[test]
    fn single_site_matrix() {
        let h = single(0.3, 1, LaplacianConvention::HoppingOnly);
        assert_eq!(h.to_dense()[(0, 0)], 0.3);
        let h = single(0.3, 1, LaplacianConvention::WithDiagonal);
        assert!((h.to_dense()[(0, 0)] - 2.3).abs() < 1e-15);
    }

    #[test]
    fn free_chain_spectrum() {
        let r = Arc::new(Region::boxed(&[1], &[5]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.0; 5]).unwrap();
        let h = assemble(&r, &real, 1.0, LaplacianConvention::HoppingOnly).unwrap();
        let mut eig: Vec<f64> = h.to_dense().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let mut expect: Vec<f64> = (1..=5)
            .map(|k| -2.0 * (std::f64::consts::PI * k as f64 / 6.0).cos())
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn restrict_examples() {
        let model = DisorderModel::standard(2.0).unwrap();
        let r = Arc::new(Region::boxed(&[-1], &[1]).unwrap());
        let real = model.sample(&r, 4, 0).unwrap();
        let h = assemble(&r, &real, 2.0, LaplacianConvention::HoppingOnly).unwrap();
        assert_eq!(h.restrict(&r).unwrap().to_dense(), h.to_dense());
        let mid = Arc::new(Region::from_sites(1, [Site::new(vec![0])]).unwrap());
        let hm = h.restrict(&mid).unwrap();
        assert_eq!(hm.to_dense()[(0, 0)], 2.0 * real.value(&Site::new(vec![0])).unwrap());
        let outside = Arc::new(Region::boxed(&[0], &[2]).unwrap());
        assert!(matches!(h.restrict(&outside), Err(Error::NotSubset)));
    }

    #[test]
    fn missing_site_is_error() {
        let small = Arc::new(Region::boxed(&[0], &[1]).unwrap());
        let big = Arc::new(Region::boxed(&[0], &[2]).unwrap());
        let real = Realization::from_values(Arc::clone(&small), vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            assemble(&big, &real, 1.0, LaplacianConvention::HoppingOnly),
            Err(Error::MissingSite(_))
        ));
    }

    #[test]
    fn triplet_export() {
        let r = Arc::new(Region::boxed(&[0], &[1]).unwrap());
        let real = Realization::from_values(Arc::clone(&r), vec![0.5, -0.5]).unwrap();
        let h = assemble(&r, &real, 2.0, LaplacianConvention::HoppingOnly).unwrap();
        assert_eq!(h.to_triplet_text(), "% 2 2 hopping_only\n0 0 1\n0 1 -1\n1 0 -1\n1 1 -1\n");
    }
}
