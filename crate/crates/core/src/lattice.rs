//! Hypercubic site sets, Euclidean distances, shells, and power-law cost matrices.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest lattice we are willing to materialize; cost matrices are dense.
pub const MAX_SITES: usize = 4096;

/// Tolerance used by [`CostMatrix::verify_triangle`].
pub const TRIANGLE_TOL: f64 = 1e-12;

/// Shell-counting caps for the infinite lattices in one, two and three dimensions.
///
/// These are `max_l |{v in Z^D : l <= |v| < l + 1}| / max(l, 1)^(D - 1)`. The maximum is
/// reached at `l = 1` (D = 2 also ties at `l = 2`); the ratio tends to the sphere area
/// `2π` and `4π` for large `l`. Brute-force counts out to radius 64 are in the tests.
pub const INFINITE_SHELL_CAPS: [f64; 3] = [2.0, 8.0, 26.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    dim: usize,
    extents: Vec<usize>,
    coords: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl Lattice {
    /// All integer points of the box `[0, extent_0) x ... x [0, extent_{D-1})`, row-major.
    pub fn hypercubic(dim: usize, extents: &[usize]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Lattice("dimension must be positive".into()));
        }
        if extents.len() != dim {
            return Err(Error::Lattice(format!(
                "{} extents given for dimension {dim}",
                extents.len()
            )));
        }
        if extents.iter().any(|&e| e == 0) {
            return Err(Error::Lattice("empty lattice: every extent must be at least 1".into()));
        }
        let total = extents
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .filter(|&n| n <= MAX_SITES)
            .ok_or_else(|| Error::LatticeTooLarge {
                sites: extents.iter().fold(1usize, |a, &e| a.saturating_mul(e)),
                cap: MAX_SITES,
            })?;

        let mut coords = Vec::with_capacity(total);
        let mut cur = vec![0i64; dim];
        for _ in 0..total {
            coords.push(cur.clone());
            // Row-major: last axis varies fastest.
            for axis in (0..dim).rev() {
                cur[axis] += 1;
                if (cur[axis] as usize) < extents[axis] {
                    break;
                }
                cur[axis] = 0;
            }
        }
        let index = coords.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Self { dim, extents: extents.to_vec(), coords, index })
    }

    /// One-dimensional chain of `len` sites.
    pub fn chain(len: usize) -> Result<Self> {
        Self::hypercubic(1, &[len])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, site: usize) -> &[i64] {
        &self.coords[site]
    }

    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site < self.len() {
            Ok(())
        } else {
            Err(Error::SiteIndex { index: site, sites: self.len() })
        }
    }

    /// Squared Euclidean distance; exact in integers.
    pub fn distance_sq(&self, i: usize, j: usize) -> i64 {
        self.coords[i]
            .iter()
            .zip(&self.coords[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.distance_sq(i, j) as f64).sqrt()
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let sq: i64 = self.extents.iter().map(|&e| ((e - 1) * (e - 1)) as i64).sum();
        (sq as f64).sqrt()
    }

    pub fn region(&self, sites: impl IntoIterator<Item = usize>) -> Result<Region> {
        let region = Region::new(sites);
        if let Some(&bad) = region.sites().iter().find(|&&s| s >= self.len()) {
            return Err(Error::SiteIndex { index: bad, sites: self.len() });
        }
        Ok(region)
    }

    /// Minimum Euclidean distance between two disjoint nonempty regions.
    pub fn set_distance(&self, x: &Region, y: &Region) -> Result<f64> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::Region("set distance needs nonempty regions".into()));
        }
        if !x.is_disjoint(y) {
            return Err(Error::Region("regions are not disjoint".into()));
        }
        for &s in x.sites().iter().chain(y.sites()) {
            self.check_site(s)?;
        }
        let best = x
            .sites()
            .iter()
            .flat_map(|&i| y.sites().iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.distance_sq(i, j))
            .min()
            .expect("nonempty");
        Ok((best as f64).sqrt())
    }

    /// Sites `j` with `l <= |i - j| < l + 1`. Shell 0 is `{i}`.
    pub fn shell(&self, site: usize, l: usize) -> Result<Vec<usize>> {
        self.check_site(site)?;
        let lo = (l * l) as i64;
        let hi = ((l + 1) * (l + 1)) as i64;
        Ok((0..self.len())
            .filter(|&j| {
                let d = self.distance_sq(site, j);
                d >= lo && d < hi
            })
            .collect())
    }

    /// The constant bounding shell sizes, `|shell(i, l)| <= gamma * max(l, 1)^(D-1)`.
    ///
    /// For D <= 3 this is the size-independent value of the infinite lattice; finite
    /// boxes only lose boundary shell members. Higher dimensions fall back to counting
    /// the finite lattice and flag the result.
    pub fn shell_constant(&self) -> ShellConstant {
        let finite = self.finite_shell_constant();
        match INFINITE_SHELL_CAPS.get(self.dim - 1) {
            Some(&cap) => ShellConstant { value: cap.max(finite), finite_only: false },
            None => ShellConstant { value: finite, finite_only: true },
        }
    }

    fn finite_shell_constant(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 1.0;
        for i in 0..n {
            let mut counts: HashMap<usize, usize> = HashMap::new();
            for j in 0..n {
                let l = isqrt(self.distance_sq(i, j) as u64) as usize;
                *counts.entry(l).or_default() += 1;
            }
            for (l, c) in counts {
                let scale = (l.max(1) as f64).powi(self.dim as i32 - 1);
                best = best.max(c as f64 / scale);
            }
        }
        best
    }

    /// `c_ij = |i - j|^exponent`; exponent must lie in (0, 1] for the triangle inequality.
    pub fn cost_matrix(&self, exponent: f64) -> Result<CostMatrix> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::CostExponent(exponent));
        }
        Ok(self.power_costs(exponent))
    }

    /// Power-law costs without the exponent check. Used to build counterexamples.
    pub fn power_costs(&self, exponent: f64) -> CostMatrix {
        let n = self.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    data[i * n + j] = self.distance(i, j).powf(exponent);
                }
            }
        }
        CostMatrix { n, data, exponent: Some(exponent) }
    }
}

/// Floor of the square root of a nonnegative integer.
pub fn isqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Brute-force shell-size ratio over the infinite lattice `Z^dim`, for shells `l < radius`.
pub fn infinite_shell_ratio(dim: usize, radius: usize) -> f64 {
    assert!(dim >= 1);
    let r = radius as i64;
    let mut counts = vec![0usize; radius];
    let mut cur = vec![-r; dim];
    loop {
        let sq: i64 = cur.iter().map(|c| c * c).sum();
        let l = isqrt(sq as u64) as usize;
        if l < radius {
            counts[l] += 1;
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return counts
                    .iter()
                    .enumerate()
                    .map(|(l, &c)| c as f64 / (l.max(1) as f64).powi(dim as i32 - 1))
                    .fold(0.0, f64::max);
            }
            cur[axis] += 1;
            if cur[axis] <= r {
                break;
            }
            cur[axis] = -r;
            axis += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellConstant {
    pub value: f64,
    /// Set when only the finite lattice could be counted (D > 3).
    pub finite_only: bool,
}

/// A set of site indices, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Region(Vec<usize>);

impl Region {
    pub fn new(sites: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = sites.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Region(v)
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        !self.0.iter().any(|s| other.contains(*s))
    }

    /// `Λ \ X` for a lattice of `n_sites` sites.
    pub fn complement(&self, n_sites: usize) -> Region {
        Region((0..n_sites).filter(|s| !self.contains(*s)).collect())
    }
}

/// Dense symmetric cost table with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
    exponent: Option<f64>,
}

impl CostMatrix {
    /// Arbitrary table in row-major order. Validity is checked by [`Self::verify_triangle`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Distribution("cost table must be square".into()));
        }
        if rows.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Distribution("costs must be finite and nonnegative".into()));
        }
        Ok(Self { n, data: rows.concat(), exponent: None })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Power-law exponent this matrix was built with, if any.
    pub fn exponent(&self) -> Option<f64> {
        self.exponent
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|c| c * factor).collect(),
            exponent: None,
        }
    }

    /// Symmetry, zero diagonal, and every triple satisfying `c_ij + c_jk >= c_ik`.
    pub fn verify_triangle(&self) -> bool {
        let n = self.n;
        for i in 0..n {
            if self.get(i, i).abs() > TRIANGLE_TOL {
                return false;
            }
            for j in 0..n {
                if (self.get(i, j) - self.get(j, i)).abs() > TRIANGLE_TOL {
                    return false;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let cij = self.get(i, j);
                for k in 0..n {
                    if cij + self.get(j, k) < self.get(i, k) - TRIANGLE_TOL {
                        return false;
                    }
                }
            }
        }
        true
    }
}
