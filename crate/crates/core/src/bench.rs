//! Wall-clock comparison of the two map routes on synthetic coefficient pairs.
//!
//! Only the estimation phase is timed: pair samples and the basis are built
//! beforehand, as the operation counts in [`crate::cost`] assume.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisExpansion;
use crate::cost::{CostModel, CostReport};
use crate::error::{Error, Result};
use crate::pf::PairedOutputSample;
use crate::sampling::{stream_rng, IndexSet};
use crate::sensmap::{max_relative_difference, sensitivity_map_bd, sm_dimension_wise, IndexSample};

/// Random basis and closed-index coefficient pairs of shape `n x m`.
pub fn synthetic_cell(n: usize, m: usize, l: usize, seed: u64) -> Result<(BasisExpansion, IndexSample)> {
    if n < 2 || m == 0 || l == 0 {
        return Err(Error::Config(format!("benchmark cell needs N >= 2, m, L >= 1, got ({n}, {m}, {l})")));
    }
    let mut rng = stream_rng(seed, 0);
    let spectrum: Vec<f64> = (0..m).map(|k| 1.0 / (k + 1) as f64).collect();
    let components = DMatrix::from_fn(m, l, |_, _| rng.random_range(-1.0..1.0));
    let mean = DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0));
    let basis = BasisExpansion::new(mean, components, spectrum.clone())?;

    let y = DMatrix::from_fn(n, m, |_, k| spectrum[k].sqrt() * rng.random_range(-1.0..1.0));
    let y_star = DMatrix::from_fn(n, m, |i, k| 0.6 * y[(i, k)] + 0.8 * spectrum[k].sqrt() * rng.random_range(-1.0..1.0));
    let sample = IndexSample::single(IndexSet::closed([0], 1)?, PairedOutputSample::new(y, y_star)?)?;
    Ok((basis, sample))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub repetitions: usize,
    pub dw_seconds: Vec<f64>,
    pub bd_seconds: Vec<f64>,
    pub dw_median_seconds: f64,
    pub bd_median_seconds: f64,
    pub measured_ratio: f64,
    pub max_relative_difference: f64,
    pub cost: CostReport,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Median wall-clock times of `reps >= 5` timed runs per route, after one
/// discarded warm-up run each.
pub fn time_cell(n: usize, m: usize, l: usize, reps: usize, seed: u64) -> Result<CellTiming> {
    if reps < 5 {
        return Err(Error::Config(format!("benchmark needs at least 5 repetitions, got {reps}")));
    }
    let cost = CostReport::new(&CostModel::new(n as u64, m as u64, l as u64)?)?;
    let (basis, sample) = synthetic_cell(n, m, l, seed)?;

    let dw_ref = sm_dimension_wise(&basis, &sample)?;
    let bd_ref = sensitivity_map_bd(&basis, &sample)?;
    let diff = max_relative_difference(&dw_ref, &bd_ref)?;

    let mut dw_seconds = Vec::with_capacity(reps);
    let mut bd_seconds = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(sm_dimension_wise(&basis, &sample)?);
        dw_seconds.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        std::hint::black_box(sensitivity_map_bd(&basis, &sample)?);
        bd_seconds.push(t.elapsed().as_secs_f64());
    }
    let dw_median_seconds = median(&dw_seconds);
    let bd_median_seconds = median(&bd_seconds);
    Ok(CellTiming {
        n,
        m,
        l,
        repetitions: reps,
        dw_seconds,
        bd_seconds,
        dw_median_seconds,
        bd_median_seconds,
        measured_ratio: dw_median_seconds / bd_median_seconds,
        max_relative_difference: diff,
        cost,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub worker_threads: usize,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            worker_threads: rayon::current_num_threads(),
        }
    }
}
