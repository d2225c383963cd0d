//! Nonparametric pairs bootstrap for sensitivity maps and GSI values.
//!
//! A replicate draws `N` pair indices with replacement and applies the same
//! index vector to `Y` and `Y*` (and to every pair sample of a second-order
//! index), then recomputes numerators and variances through the
//! basis-derived route. Replicate `r` uses the ChaCha8 stream `r` of the
//! bootstrap seed, so replicates are independent of execution order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisExpansion;
use crate::error::{Error, Result};
use crate::sampling::stream_rng;
use crate::sensmap::{gsi_for_sample, sensitivity_map_bd, IndexSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Summary {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    /// Draw pair indices with replacement.
    Pairs,
    /// Reuse the original sample in every replicate (test hook).
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub seed: u64,
    pub summary: Summary,
    pub resampling: Resampling,
}

impl BootstrapSpec {
    pub fn new(replicates: usize, seed: u64) -> Result<Self> {
        if replicates < 2 {
            return Err(Error::Config(format!("bootstrap needs at least 2 replicates, got {replicates}")));
        }
        Ok(Self {
            replicates,
            seed,
            summary: Summary::Mean,
            resampling: Resampling::Pairs,
        })
    }

    pub fn with_summary(mut self, summary: Summary) -> Self {
        self.summary = summary;
        self
    }

    pub fn with_resampling(mut self, resampling: Resampling) -> Self {
        self.resampling = resampling;
        self
    }

    /// Row indices of replicate `r` for a sample of `n` pairs.
    pub fn resample_indices(&self, r: usize, n: usize) -> Vec<usize> {
        match self.resampling {
            Resampling::Identity => (0..n).collect(),
            Resampling::Pairs => {
                let mut rng = stream_rng(self.seed, r as u64);
                (0..n).map(|_| rng.random_range(0..n)).collect()
            }
        }
    }
}

/// Per-dimension bootstrap summaries. `center` is the mean or the median,
/// depending on [`BootstrapSpec::summary`]; both are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBands {
    pub center: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
    pub std: Vec<f64>,
    pub replicates_used: usize,
    pub dropped: usize,
}

/// Bootstrap summary of one scalar statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBands {
    pub center: f64,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub std: f64,
    pub replicates_used: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Stats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub std: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn summarize(values: &mut [f64]) -> Stats {
    if values.is_empty() {
        return Stats {
            mean: f64::NAN,
            median: f64::NAN,
            q1: f64::NAN,
            q3: f64::NAN,
            std: f64::NAN,
        };
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stats {
        mean,
        median: quantile(values, 0.5),
        q1: quantile(values, 0.25),
        q3: quantile(values, 0.75),
        std,
    }
}

fn check_dropped(dropped: usize, total: usize) -> Result<()> {
    if dropped * 10 > total {
        return Err(Error::TooManyDropped { dropped, total });
    }
    Ok(())
}

/// Bootstrap bands of the basis-derived sensitivity map of `sample`.
///
/// A replicate is dropped when it turns a dimension that is regular in the
/// full-sample map into a degenerate one; more than 10% dropped replicates is
/// an error.
pub fn bootstrap_sm(sample: &IndexSample, basis: &BasisExpansion, spec: &BootstrapSpec) -> Result<BootstrapBands> {
    if sample.n() < 2 {
        return Err(Error::Config("bootstrap needs N >= 2".into()));
    }
    BootstrapSpec::new(spec.replicates, spec.seed)?;
    let base = sensitivity_map_bd(basis, sample)?;
    let n = sample.n();
    let replicates: Vec<Option<Vec<f64>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let resampled = sample.select_rows(&spec.resample_indices(r, n));
            let map = sensitivity_map_bd(basis, &resampled).ok()?;
            let regressed = map
                .flags()
                .iter()
                .zip(base.flags())
                .any(|(&now, &before)| now && !before);
            (!regressed).then(|| map.values().to_vec())
        })
        .collect();
    let kept: Vec<Vec<f64>> = replicates.into_iter().flatten().collect();
    let dropped = spec.replicates - kept.len();
    check_dropped(dropped, spec.replicates)?;

    let l = basis.l();
    let mut bands = BootstrapBands {
        center: vec![f64::NAN; l],
        mean: vec![f64::NAN; l],
        median: vec![f64::NAN; l],
        q1: vec![f64::NAN; l],
        q3: vec![f64::NAN; l],
        std: vec![f64::NAN; l],
        replicates_used: kept.len(),
        dropped,
    };
    let mut column = Vec::with_capacity(kept.len());
    for px in 0..l {
        if base.flags()[px] {
            continue;
        }
        column.clear();
        column.extend(kept.iter().map(|v| v[px]));
        let s = summarize(&mut column);
        bands.mean[px] = s.mean;
        bands.median[px] = s.median;
        bands.center[px] = match spec.summary {
            Summary::Mean => s.mean,
            Summary::Median => s.median,
        };
        bands.q1[px] = s.q1;
        bands.q3[px] = s.q3;
        bands.std[px] = s.std;
    }
    Ok(bands)
}

/// Bootstrap bands of the GSI of `sample`.
pub fn bootstrap_gsi(sample: &IndexSample, basis: &BasisExpansion, spec: &BootstrapSpec) -> Result<ScalarBands> {
    if sample.n() < 2 {
        return Err(Error::Config("bootstrap needs N >= 2".into()));
    }
    BootstrapSpec::new(spec.replicates, spec.seed)?;
    let n = sample.n();
    let values: Vec<Option<f64>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let resampled = sample.select_rows(&spec.resample_indices(r, n));
            gsi_for_sample(basis, &resampled).ok().filter(|v| v.is_finite())
        })
        .collect();
    let mut kept: Vec<f64> = values.into_iter().flatten().collect();
    let dropped = spec.replicates - kept.len();
    check_dropped(dropped, spec.replicates)?;
    let s = summarize(&mut kept);
    Ok(ScalarBands {
        center: match spec.summary {
            Summary::Mean => s.mean,
            Summary::Median => s.median,
        },
        mean: s.mean,
        median: s.median,
        q1: s.q1,
        q3: s.q3,
        std: s.std,
        replicates_used: kept.len(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pf::PairedOutputSample;
    use crate::sampling::IndexSet;
    use nalgebra::{DMatrix, DVector};

    fn sample(n: usize, same: bool) -> IndexSample {
        let y = DMatrix::from_fn(n, 2, |i, j| ((i * 13 + j * 5) % 17) as f64 - 8.0);
        let ys = if same {
            y.clone()
        } else {
            DMatrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 + 0.3 * y[(i, j)])
        };
        IndexSample::single(IndexSet::closed([0], 3).unwrap(), PairedOutputSample::new(y, ys).unwrap()).unwrap()
    }

    fn basis() -> BasisExpansion {
        BasisExpansion::new(
            DVector::from_element(4, 1.0),
            DMatrix::from_row_slice(2, 4, &[1.0, 0.5, 0.0, 0.3, 0.0, 0.5, 1.0, -0.3]),
            vec![2.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn quantiles_and_summary() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0, 5.0];
        let s = summarize(&mut v);
        assert_eq!((s.mean, s.median, s.q1, s.q3), (3.0, 3.0, 2.0, 4.0));
        assert!((s.std - 2.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_resampling_has_zero_spread() {
        let spec = BootstrapSpec::new(5, 1).unwrap().with_resampling(Resampling::Identity);
        let s = sample(40, false);
        let bands = bootstrap_sm(&s, &basis(), &spec).unwrap();
        assert!(bands.std.iter().all(|&v| v == 0.0));
        let g = bootstrap_gsi(&s, &basis(), &spec).unwrap();
        assert_eq!(g.std, 0.0);
    }

    #[test]
    fn identical_samples_collapse_to_one() {
        let spec = BootstrapSpec::new(20, 3).unwrap();
        let bands = bootstrap_sm(&sample(40, true), &basis(), &spec).unwrap();
        for l in 0..4 {
            assert!((bands.center[l] - 1.0).abs() < 1e-12);
            assert!((bands.q1[l] - 1.0).abs() < 1e-12 && (bands.q3[l] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn replicates_are_reproducible_and_ordered() {
        let spec = BootstrapSpec::new(10, 9).unwrap().with_summary(Summary::Median);
        let s = sample(60, false);
        let a = bootstrap_sm(&s, &basis(), &spec).unwrap();
        let b = bootstrap_sm(&s, &basis(), &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.center, a.median);
        for l in 0..4 {
            assert!(a.q1[l] <= a.q3[l]);
        }
        assert_eq!(spec.resample_indices(3, 60), spec.resample_indices(3, 60));
        assert_ne!(spec.resample_indices(3, 60), spec.resample_indices(4, 60));
    }

    #[test]
    fn too_few_replicates_rejected() {
        assert!(BootstrapSpec::new(1, 0).is_err());
    }
}
