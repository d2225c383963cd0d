//! Input distributions, Monte-Carlo and Latin Hypercube designs, and the
//! pick-freeze construction.
//!
//! Dimension indices are 0-based in the API. The textual index-set grammar
//! ([`IndexSet::parse`], [`parse_index_sets`]) and [`IndexSet`]'s `Display`
//! use 1-based indices, which is what users see on the command line and in
//! exported file names.
//!
//! Random streams: a user seed drives a ChaCha8 generator. Stream 0 produces
//! the `X` sample of a pick-freeze design and stream 1 the independent `Z`
//! sample, so both derive from one seed without sharing any draws.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream index of the `X` sample in a pick-freeze design.
pub const X_STREAM: u64 = 0;
/// Stream index of the `Z` sample in a pick-freeze design.
pub const Z_STREAM: u64 = 1;

/// Seeded generator on a given substream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniform {
    pub lower: f64,
    pub upper: f64,
}

impl Uniform {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Config(format!(
                "uniform bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn variance(&self) -> f64 {
        self.width() * self.width() / 12.0
    }

    /// Maps a unit-interval value onto the support, clamped so rounding
    /// never leaves `[lower, upper]`.
    pub fn from_unit(&self, u: f64) -> f64 {
        (self.lower + u * self.width()).clamp(self.lower, self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Product of independent uniform marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpace {
    marginals: Vec<Uniform>,
}

impl InputSpace {
    pub fn new(marginals: Vec<Uniform>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::Config("input space needs at least one dimension".into()));
        }
        for m in &marginals {
            Uniform::new(m.lower, m.upper)?;
        }
        Ok(Self { marginals })
    }

    /// `dims` copies of `uniform(lower, upper)`.
    pub fn uniform_cube(dims: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![Uniform::new(lower, upper)?; dims])
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Uniform] {
        &self.marginals
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims() && self.marginals.iter().zip(point).all(|(m, &v)| m.contains(v))
    }
}

/// Which Sobol' quantity an index set asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexKind {
    Closed,
    Total,
    SecondOrder,
}

impl IndexKind {
    pub fn label(self) -> &'static str {
        match self {
            IndexKind::Closed => "closed",
            IndexKind::Total => "total",
            IndexKind::SecondOrder => "second-order",
        }
    }
}

/// A set of input dimensions together with the kind of index requested.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    members: Vec<usize>,
    kind: IndexKind,
}

impl IndexSet {
    /// Builds a set from 0-based members; duplicates are merged.
    pub fn new(members: impl IntoIterator<Item = usize>, kind: IndexKind, dims: usize) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::Config("index set must not be empty".into()));
        }
        if let Some(&bad) = members.iter().find(|&&j| j >= dims) {
            return Err(Error::Config(format!(
                "index {} exceeds the input dimension {dims}",
                bad + 1
            )));
        }
        if kind == IndexKind::SecondOrder && members.len() != 2 {
            return Err(Error::Config("second-order index sets need exactly two members".into()));
        }
        Ok(Self { members, kind })
    }

    pub fn closed(members: impl IntoIterator<Item = usize>, dims: usize) -> Result<Self> {
        Self::new(members, IndexKind::Closed, dims)
    }

    pub fn total(members: impl IntoIterator<Item = usize>, dims: usize) -> Result<Self> {
        Self::new(members, IndexKind::Total, dims)
    }

    pub fn pair(i: usize, j: usize, dims: usize) -> Result<Self> {
        if i == j {
            return Err(Error::Config("second-order pair needs two distinct members".into()));
        }
        Self::new([i, j], IndexKind::SecondOrder, dims)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    /// Parses one entry of the 1-based grammar: `"1"`, `"1,3"`, `"total:2"`, `"pair:1,2"`.
    pub fn parse(text: &str, dims: usize) -> Result<Self> {
        let text = text.trim();
        let (kind, list) = match text.split_once(':') {
            Some(("total", rest)) => (IndexKind::Total, rest),
            Some(("pair", rest)) => (IndexKind::SecondOrder, rest),
            Some(("closed", rest)) => (IndexKind::Closed, rest),
            Some((prefix, _)) => {
                return Err(Error::Config(format!("unknown index-set prefix '{prefix}'")))
            }
            None => (IndexKind::Closed, text),
        };
        let mut members = Vec::new();
        for tok in list.split(',') {
            let v: usize = tok
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid index '{}' in '{text}'", tok.trim())))?;
            if v == 0 {
                return Err(Error::Config(format!("indices are 1-based, got 0 in '{text}'")));
            }
            members.push(v - 1);
        }
        if kind == IndexKind::SecondOrder {
            if members.len() != 2 || members[0] == members[1] {
                return Err(Error::Config(format!("'{text}': pair needs two distinct indices")));
            }
        }
        Self::new(members, kind, dims)
    }

    /// Dimensions left out of `members`.
    pub fn complement(&self, dims: usize) -> Vec<usize> {
        (0..dims).filter(|j| !self.members.contains(j)).collect()
    }

    /// Frozen sets of the pick-freeze designs this index needs, all sharing
    /// one `(X, Z)` pair of samples.
    ///
    /// * closed `I`: one design frozen on `I`;
    /// * total `I`: one design frozen on the complement of `I`;
    /// * pair `{i, j}`: designs frozen on `{i, j}`, `{i}` and `{j}`, in that order.
    pub fn frozen_sets(&self, dims: usize) -> Vec<Vec<usize>> {
        match self.kind {
            IndexKind::Closed => vec![self.members.clone()],
            IndexKind::Total => vec![self.complement(dims)],
            IndexKind::SecondOrder => vec![
                self.members.clone(),
                vec![self.members[0]],
                vec![self.members[1]],
            ],
        }
    }

    /// File-name friendly label, e.g. `total_2` or `pair_1-2`.
    pub fn file_label(&self) -> String {
        let list = one_based(&self.members, "-");
        match self.kind {
            IndexKind::Closed => format!("closed_{list}"),
            IndexKind::Total => format!("total_{list}"),
            IndexKind::SecondOrder => format!("pair_{list}"),
        }
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = one_based(&self.members, ",");
        match self.kind {
            IndexKind::Closed => write!(f, "{list}"),
            IndexKind::Total => write!(f, "total:{list}"),
            IndexKind::SecondOrder => write!(f, "pair:{list}"),
        }
    }
}

pub(crate) fn one_based(members: &[usize], sep: &str) -> String {
    members
        .iter()
        .map(|j| (j + 1).to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

/// Parses a semicolon-separated batch such as `"1;total:2;pair:1,2"`.
pub fn parse_index_sets(text: &str, dims: usize) -> Result<Vec<IndexSet>> {
    let sets: Vec<IndexSet> = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| IndexSet::parse(s, dims))
        .collect::<Result<_>>()?;
    if sets.is_empty() {
        return Err(Error::Config("empty index-set list".into()));
    }
    Ok(sets)
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    Ok(())
}

/// I.i.d. Monte-Carlo sample, `n` rows by `d` columns.
pub fn sample_mc<R: Rng + ?Sized>(space: &InputSpace, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    check_count(n)?;
    let d = space.dims();
    let mut out = DMatrix::zeros(n, d);
    // Row-major draw order keeps row k independent of n.
    for i in 0..n {
        for (j, m) in space.marginals().iter().enumerate() {
            out[(i, j)] = m.from_unit(rng.random::<f64>());
        }
    }
    Ok(out)
}

/// Monte-Carlo sample from `seed` on stream [`X_STREAM`].
pub fn sample_mc_seeded(space: &InputSpace, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    sample_mc(space, n, &mut stream_rng(seed, X_STREAM))
}

/// Latin Hypercube sample: each column holds exactly one point per stratum
/// `[(k-1)/n, k/n)`, jittered uniformly inside the stratum and randomly
/// permuted across rows.
pub fn sample_lhs<R: Rng + ?Sized>(space: &InputSpace, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    check_count(n)?;
    let d = space.dims();
    let mut out = DMatrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for (j, m) in space.marginals().iter().enumerate() {
        perm.shuffle(rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u = (stratum as f64 + rng.random::<f64>()) / n as f64;
            // Guard the upper stratum edge against rounding up to k/n.
            let u = u.min(((stratum + 1) as f64 / n as f64).next_down());
            out[(i, j)] = m.from_unit(u);
        }
    }
    Ok(out)
}

pub fn sample_lhs_seeded(space: &InputSpace, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    sample_lhs(space, n, &mut stream_rng(seed, X_STREAM))
}

/// Row-wise pick-freeze: column `j` of the result is taken from `x` when `j`
/// is frozen and from `z` otherwise. An empty `frozen` set returns `z`.
pub fn build_pick_freeze(x: &DMatrix<f64>, z: &DMatrix<f64>, frozen: &[usize]) -> Result<DMatrix<f64>> {
    if x.shape() != z.shape() {
        return Err(Error::shape(
            "pick-freeze samples",
            format!("{:?}", x.shape()),
            format!("{:?}", z.shape()),
        ));
    }
    if let Some(&bad) = frozen.iter().find(|&&j| j >= x.ncols()) {
        return Err(Error::Config(format!(
            "frozen index {} exceeds the input dimension {}",
            bad + 1,
            x.ncols()
        )));
    }
    let mut out = z.clone();
    for &j in frozen {
        out.set_column(j, &x.column(j));
    }
    Ok(out)
}

/// Identifies the `(X, Z)` pair a pick-freeze output sample was produced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignTag(pub u64);

/// Paired Monte-Carlo samples `X` and `Z` drawn from one seed.
#[derive(Debug, Clone)]
pub struct PickFreezeDesign {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    seed: u64,
}

impl PickFreezeDesign {
    pub fn new(space: &InputSpace, n: usize, seed: u64) -> Result<Self> {
        let x = sample_mc(space, n, &mut stream_rng(seed, X_STREAM))?;
        let z = sample_mc(space, n, &mut stream_rng(seed, Z_STREAM))?;
        Ok(Self { x, z, seed })
    }

    /// Wraps externally generated samples.
    pub fn from_samples(x: DMatrix<f64>, z: DMatrix<f64>, seed: u64) -> Result<Self> {
        if x.shape() != z.shape() {
            return Err(Error::shape(
                "pick-freeze samples",
                format!("{:?}", x.shape()),
                format!("{:?}", z.shape()),
            ));
        }
        Ok(Self { x, z, seed })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dims(&self) -> usize {
        self.x.ncols()
    }

    /// The mixed sample `(X_I, Z_~I)` for a frozen set `I`.
    pub fn x_star(&self, frozen: &[usize]) -> Result<DMatrix<f64>> {
        build_pick_freeze(&self.x, &self.z, frozen)
    }

    /// Fingerprint of both samples.
    pub fn tag(&self) -> DesignTag {
        let mut h = DefaultHasher::new();
        self.x.shape().hash(&mut h);
        for v in self.x.iter().chain(self.z.iter()) {
            v.to_bits().hash(&mut h);
        }
        DesignTag(h.finish())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc_within_bounds_and_deterministic() {
        let space = InputSpace::uniform_cube(2, 0.0, 1.0).unwrap();
        let a = sample_mc_seeded(&space, 3, 7).unwrap();
        let b = sample_mc_seeded(&space, 3, 7).unwrap();
        assert_eq!(a.shape(), (3, 2));
        assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(a, b);
        assert_ne!(a, sample_mc_seeded(&space, 3, 8).unwrap());
    }

    #[test]
    fn mc_column_means_follow_the_law_of_large_numbers() {
        let space = InputSpace::uniform_cube(2, -1.0, 5.0).unwrap();
        let s = sample_mc_seeded(&space, 100_000, 1).unwrap();
        for j in 0..2 {
            let mean = s.column(j).mean();
            assert!((mean - 2.0).abs() < 0.02, "column {j} mean {mean}");
        }
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(Uniform::new(1.0, 1.0).is_err());
        assert!(Uniform::new(2.0, 1.0).is_err());
        assert!(Uniform::new(0.0, f64::INFINITY).is_err());
        assert!(InputSpace::new(vec![]).is_err());
        let space = InputSpace::uniform_cube(1, 0.0, 1.0).unwrap();
        assert!(sample_mc_seeded(&space, 0, 1).is_err());
        assert!(sample_lhs_seeded(&space, 0, 1).is_err());
    }

    fn strata_of(col: &[f64], lower: f64, upper: f64) -> Vec<usize> {
        let n = col.len();
        let mut s: Vec<usize> = col
            .iter()
            .map(|&v| (((v - lower) / (upper - lower)) * n as f64).floor() as usize)
            .collect();
        s.sort_unstable();
        s
    }

    #[test]
    fn lhs_quarters() {
        let space = InputSpace::uniform_cube(1, 0.0, 1.0).unwrap();
        let s = sample_lhs_seeded(&space, 4, 3).unwrap();
        let mut v: Vec<f64> = s.column(0).iter().copied().collect();
        v.sort_by(f64::total_cmp);
        for (k, &x) in v.iter().enumerate() {
            assert!(x >= k as f64 / 4.0 && x < (k + 1) as f64 / 4.0, "{v:?}");
        }
    }

    #[test]
    fn lhs_one_point_per_stratum_in_every_marginal() {
        let space = InputSpace::uniform_cube(8, -1.0, 5.0).unwrap();
        for seed in 0..5 {
            let s = sample_lhs_seeded(&space, 200, seed).unwrap();
            for j in 0..8 {
                let col: Vec<f64> = s.column(j).iter().copied().collect();
                assert_eq!(strata_of(&col, -1.0, 5.0), (0..200).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn lhs_columns_weakly_correlated() {
        let space = InputSpace::uniform_cube(2, 0.0, 1.0).unwrap();
        let s = sample_lhs_seeded(&space, 1000, 11).unwrap();
        let (a, b) = (s.column(0), s.column(1));
        let (ma, mb) = (a.mean(), b.mean());
        let cov: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let rho = cov / (va * vb).sqrt();
        assert!(rho.abs() < 0.1, "rho = {rho}");
    }

    #[test]
    fn pick_freeze_rule() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let z = DMatrix::from_row_slice(1, 3, &[10.0, 20.0, 30.0]);
        let xs = build_pick_freeze(&x, &z, &[1]).unwrap();
        assert_eq!(xs, DMatrix::from_row_slice(1, 3, &[10.0, 2.0, 30.0]));
        assert_eq!(build_pick_freeze(&x, &z, &[0, 1, 2]).unwrap(), x);
        assert_eq!(build_pick_freeze(&x, &z, &[]).unwrap(), z);
        let bad = DMatrix::zeros(2, 3);
        assert!(build_pick_freeze(&x, &bad, &[0]).is_err());
        assert!(build_pick_freeze(&x, &z, &[3]).is_err());
    }

    #[test]
    fn design_streams_are_independent_and_reproducible() {
        let space = InputSpace::uniform_cube(3, 0.0, 1.0).unwrap();
        let a = PickFreezeDesign::new(&space, 50, 5).unwrap();
        let b = PickFreezeDesign::new(&space, 50, 5).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(a.z(), b.z());
        assert_ne!(a.x(), a.z());
        assert_eq!(a.tag(), b.tag());
        let c = PickFreezeDesign::new(&space, 50, 6).unwrap();
        assert_ne!(a.tag(), c.tag());
    }

    #[test]
    fn index_set_grammar() {
        let s = IndexSet::parse("1,3", 4).unwrap();
        assert_eq!(s.members(), &[0, 2]);
        assert_eq!(s.kind(), IndexKind::Closed);
        assert_eq!(s.to_string(), "1,3");
        let t = IndexSet::parse("total:2", 4).unwrap();
        assert_eq!((t.members(), t.kind()), (&[1usize][..], IndexKind::Total));
        assert_eq!(t.frozen_sets(4), vec![vec![0, 2, 3]]);
        let p = IndexSet::parse("pair:1,2", 4).unwrap();
        assert_eq!(p.frozen_sets(4), vec![vec![0, 1], vec![0], vec![1]]);
        assert_eq!(p.file_label(), "pair_1-2");
        let all = parse_index_sets("1; total:2 ;pair:1,2", 4).unwrap();
        assert_eq!(all.len(), 3);
        for bad in ["0", "5", "pair:1", "pair:1,1", "x:1", "a", ""] {
            assert!(IndexSet::parse(bad, 4).is_err(), "{bad}");
        }
        assert!(IndexSet::closed(Vec::<usize>::new(), 3).is_err());
    }
}
