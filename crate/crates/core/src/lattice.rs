//! Finite regions of the hypercubic lattice ℤ^d.
//!
//! Distances are 1-norm throughout. The boundary ∂Ω of a region is the set of
//! sites *outside* Ω that are adjacent to Ω, so an interior site always sits
//! at distance at least 1 from the boundary.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point, in lattice units.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i32>);

impl Site {
    pub fn new(coords: impl Into<Vec<i32>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    /// ‖x‖ = Σ_j |x_j|.
    pub fn norm1(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    pub fn dist1(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (*a as i64 - *b as i64).unsigned_abs())
            .sum()
    }

    /// The 2d nearest neighbours, ordered by axis and then by `-1, +1`.
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1, 1].into_iter().map(move |step| {
                let mut c = self.0.clone();
                c[axis] += step;
                Site(c)
            })
        })
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A nearest-neighbour bond crossing the boundary of a region.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub inside: Site,
    pub outside: Site,
}

/// Γ(Λ): the bonds joining Λ to its complement.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondSet {
    pub bonds: Vec<Bond>,
}

impl BondSet {
    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Bond> {
        self.bonds.iter()
    }
}

/// A finite, nonempty set of lattice sites with a fixed indexing.
///
/// Sites are indexed in lexicographic order of their coordinates, which keeps
/// the bandwidth of operators on boxes equal to the size of a hyperplane slice.
#[derive(Clone, PartialEq, Eq)]
pub struct Region {
    dim: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    neighbors: Vec<Vec<usize>>,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Region")
            .field("dim", &self.dim)
            .field("sites", &self.sites.len())
            .finish()
    }
}

impl Region {
    pub fn from_sites(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRegion("dimension must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for s in sites {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
            set.insert(s);
        }
        if set.is_empty() {
            return Err(Error::InvalidRegion("region must contain at least one site".into()));
        }
        let sites: Vec<Site> = set.into_iter().collect();
        let index: HashMap<Site, usize> =
            sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let neighbors = sites
            .iter()
            .map(|s| s.neighbors().filter_map(|n| index.get(&n).copied()).collect())
            .collect();
        Ok(Region {
            dim,
            sites,
            index,
            neighbors,
        })
    }

    /// Λ_L = [−L, L]^d.
    pub fn cube(dim: usize, half_width: u32) -> Result<Self> {
        let l = half_width as i32;
        Self::boxed(&vec![-l; dim], &vec![l; dim])
    }

    /// The box ∏_j [lo_j, hi_j].
    pub fn boxed(lo: &[i32], hi: &[i32]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidRegion("box with lo > hi".into()));
        }
        Self::from_sites(lo.len(), box_sites(lo, hi))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub(crate) fn require_index(&self, s: &Site) -> Result<usize> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: s.dim(),
            });
        }
        self.index_of(s).ok_or_else(|| Error::SiteOutsideRegion(s.0.clone()))
    }

    /// In-region neighbours of site `i`, as indices.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.dim == other.dim && self.sites.iter().all(|s| other.contains(s))
    }

    /// Γ(Λ), enumerated by inside site (index order), then axis, then direction.
    pub fn boundary_bonds(&self) -> BondSet {
        let bonds = self
            .sites
            .iter()
            .flat_map(|s| {
                s.neighbors()
                    .filter(|n| !self.contains(n))
                    .map(|n| Bond {
                        inside: s.clone(),
                        outside: n,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        BondSet { bonds }
    }

    /// Exterior vertex boundary ∂Λ: sites outside Λ adjacent to Λ.
    pub fn outer_boundary(&self) -> Vec<Site> {
        let set: BTreeSet<Site> = self
            .sites
            .iter()
            .flat_map(|s| s.neighbors().filter(|n| !self.contains(n)).collect::<Vec<_>>())
            .collect();
        set.into_iter().collect()
    }

    /// Λ⁺ = Λ together with all its nearest neighbours.
    pub fn extend_plus(&self) -> Region {
        let all = self
            .sites
            .iter()
            .cloned()
            .chain(self.outer_boundary());
        Region::from_sites(self.dim, all).expect("extension of a nonempty region is nonempty")
    }

    /// dist(x, ∂Λ) in the 1-norm.
    pub fn dist_to_boundary(&self, x: &Site) -> Result<u64> {
        self.require_index(x)?;
        Ok(self
            .outer_boundary()
            .iter()
            .map(|b| x.dist1(b))
            .min()
            .expect("finite regions have a nonempty boundary"))
    }

    /// dist_Λ(x, y) = min{‖x−y‖, dist(x,∂Λ) + dist(y,∂Λ)}.
    pub fn dist_region(&self, x: &Site, y: &Site) -> Result<u64> {
        self.require_index(x)?;
        self.require_index(y)?;
        if x == y {
            return Ok(0);
        }
        let boundary = self.outer_boundary();
        let to_boundary = |s: &Site| boundary.iter().map(|b| s.dist1(b)).min().unwrap_or(0);
        Ok(x.dist1(y).min(to_boundary(x) + to_boundary(y)))
    }

    /// All axis-aligned boxes contained in this region that contain `anchor`.
    pub fn sub_boxes_containing(&self, anchor: &Site) -> Vec<Region> {
        let (lo, hi) = self.bounding_box();
        let d = self.dim;
        let mut out = Vec::new();
        let mut cur_lo = vec![0; d];
        let mut cur_hi = vec![0; d];
        fn rec(
            axis: usize,
            lo: &[i32],
            hi: &[i32],
            anchor: &[i32],
            cur_lo: &mut Vec<i32>,
            cur_hi: &mut Vec<i32>,
            region: &Region,
            out: &mut Vec<Region>,
        ) {
            if axis == lo.len() {
                if box_sites(cur_lo, cur_hi).all(|s| region.contains(&s)) {
                    out.push(Region::boxed(cur_lo, cur_hi).expect("valid box"));
                }
                return;
            }
            for a in lo[axis]..=anchor[axis] {
                for b in anchor[axis]..=hi[axis] {
                    cur_lo[axis] = a;
                    cur_hi[axis] = b;
                    rec(axis + 1, lo, hi, anchor, cur_lo, cur_hi, region, out);
                }
            }
        }
        if !self.contains(anchor) {
            return out;
        }
        rec(0, &lo, &hi, anchor.coords(), &mut cur_lo, &mut cur_hi, self, &mut out);
        out
    }

    pub fn bounding_box(&self) -> (Vec<i32>, Vec<i32>) {
        let mut lo = self.sites[0].0.clone();
        let mut hi = lo.clone();
        for s in &self.sites {
            for j in 0..self.dim {
                lo[j] = lo[j].min(s.0[j]);
                hi[j] = hi[j].max(s.0[j]);
            }
        }
        (lo, hi)
    }

    /// Sub-region induced by a bitmask over site indices (bit i ↔ site i).
    pub fn subset_from_mask(&self, mask: u64) -> Option<Region> {
        let picked = self
            .sites
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, s)| s.clone());
        Region::from_sites(self.dim, picked).ok()
    }
}

fn box_sites<'a>(lo: &'a [i32], hi: &'a [i32]) -> impl Iterator<Item = Site> + 'a {
    let d = lo.len();
    let total: usize = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (b - a + 1).max(0) as usize)
        .product();
    (0..total).map(move |mut k| {
        let mut c = vec![0; d];
        for j in (0..d).rev() {
            let w = (hi[j] - lo[j] + 1) as usize;
            c[j] = lo[j] + (k % w) as i32;
            k /= w;
        }
        Site(c)
    })
}

/// Region literal as accepted in configuration: either a centred box or an
/// explicit site list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    #[serde(rename = "box")]
    Cube {
        d: usize,
        #[serde(rename = "L")]
        l: u32,
    },
    Sites(Vec<Vec<i32>>),
}

impl RegionSpec {
    pub fn build(&self) -> Result<Region> {
        match self {
            RegionSpec::Cube { d, l } => Region::cube(*d, *l),
            RegionSpec::Sites(list) => {
                let d = list
                    .first()
                    .map(Vec::len)
                    .ok_or_else(|| Error::InvalidRegion("empty site list".into()))?;
                Region::from_sites(d, list.iter().cloned().map(Site))
            }
        }
    }
}

impl FromStr for RegionSpec {
    type Err = Error;

    /// `box:d=2,L=3` or `sites:0,0;1,0;0,1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidRegion(format!("cannot parse region literal '{s}'"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "box" => {
                let mut d = None;
                let mut l = None;
                for kv in rest.split(',') {
                    let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                    match k.trim() {
                        "d" => d = v.trim().parse().ok(),
                        "L" | "l" => l = v.trim().parse().ok(),
                        _ => return Err(bad()),
                    }
                }
                Ok(RegionSpec::Cube {
                    d: d.ok_or_else(bad)?,
                    l: l.ok_or_else(bad)?,
                })
            }
            "sites" => {
                let sites = rest
                    .split(';')
                    .map(|p| {
                        p.split(',')
                            .map(|c| c.trim().parse::<i32>().map_err(|_| bad()))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(RegionSpec::Sites(sites))
            }
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1(x: i32) -> Site {
        Site::new(vec![x])
    }

    #[test]
    fn single_site_bonds() {
        let r = Region::from_sites(1, [s1(0)]).unwrap();
        let g = r.boundary_bonds();
        assert_eq!(g.len(), 2);
        assert_eq!(g.bonds[0].outside, s1(-1));
        assert_eq!(g.bonds[1].outside, s1(1));
    }

    #[test]
    fn interval_bonds() {
        for l in 1..5 {
            let r = Region::cube(1, l).unwrap();
            let g = r.boundary_bonds();
            let pairs: Vec<_> = g.iter().map(|b| (b.inside.0[0], b.outside.0[0])).collect();
            let l = l as i32;
            assert_eq!(pairs, vec![(-l, -l - 1), (l, l + 1)]);
        }
    }

    #[test]
    fn square_bonds_brute_force() {
        for l in 1..=3u32 {
            let r = Region::cube(2, l).unwrap();
            // brute force over all pairs in a window one larger than the box
            let w = l as i32 + 1;
            let outer = Region::cube(2, w as u32).unwrap();
            let mut count = 0;
            for a in outer.sites() {
                for b in outer.sites() {
                    if a.dist1(b) == 1 && r.contains(a) && !r.contains(b) {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, 4 * (2 * l as usize + 1));
            assert_eq!(r.boundary_bonds().len(), count);
        }
    }

    #[test]
    fn extend_plus_examples() {
        let r = Region::from_sites(2, [Site::origin(2)]).unwrap();
        assert_eq!(r.extend_plus().len(), 5);
        let r = Region::cube(1, 3).unwrap();
        assert_eq!(r.extend_plus(), Region::cube(1, 4).unwrap());

        let r = Region::boxed(&[0, 0], &[1, 1]).unwrap();
        let plus = r.extend_plus();
        // closure oracle: every site within a 1-norm ball of radius 1 of some site
        let window = Region::boxed(&[-2, -2], &[3, 3]).unwrap();
        let expected: Vec<Site> = window
            .sites()
            .iter()
            .filter(|s| r.sites().iter().any(|t| s.dist1(t) <= 1))
            .cloned()
            .collect();
        assert_eq!(plus.sites(), expected.as_slice());
        assert_eq!(plus.len(), 12);
    }

    #[test]
    fn dist_region_examples() {
        let r = Region::boxed(&[0], &[10]).unwrap();
        assert_eq!(r.dist_region(&s1(5), &s1(9)).unwrap(), 4);
        assert_eq!(r.dist_region(&s1(3), &s1(3)).unwrap(), 0);
        assert_eq!(r.dist_region(&s1(0), &s1(10)).unwrap(), 2);
        assert!(matches!(
            r.dist_region(&s1(0), &s1(11)),
            Err(Error::SiteOutsideRegion(_))
        ));
    }

    #[test]
    fn sub_boxes_of_interval() {
        let r = Region::boxed(&[-1], &[2]).unwrap();
        let boxes = r.sub_boxes_containing(&s1(0));
        // left end in {-1,0}, right end in {0,1,2}
        assert_eq!(boxes.len(), 6);
        assert!(boxes.iter().all(|b| b.contains(&s1(0)) && b.is_subset_of(&r)));
    }

    #[test]
    fn region_literals() {
        assert_eq!(
            "box:d=2,L=3".parse::<RegionSpec>().unwrap(),
            RegionSpec::Cube { d: 2, l: 3 }
        );
        let r = "sites:0,0;1,0".parse::<RegionSpec>().unwrap().build().unwrap();
        assert_eq!(r.len(), 2);
        assert!("circle:r=1".parse::<RegionSpec>().is_err());
    }

    #[test]
    fn empty_and_mismatched_regions_rejected() {
        assert!(Region::from_sites(1, Vec::<Site>::new()).is_err());
        assert!(Region::from_sites(2, [s1(0)]).is_err());
    }
}
