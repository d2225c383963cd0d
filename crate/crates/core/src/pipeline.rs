//! From a pick-freeze design to the paired output samples of each index set.
//!
//! `Y = f(X)` is evaluated once and shared by every index set; each distinct
//! frozen set costs one further evaluation of the mixed sample.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::BasisExpansion;
use crate::error::{Error, Result};
use crate::pf::PairedOutputSample;
use crate::sampling::{IndexSet, PickFreezeDesign};
use crate::sensmap::IndexSample;
use crate::testbed::AnalyticModel;

/// Anything mapping an `n x d` input sample to an `n x p` output sample.
pub trait CoefficientSource: Sync {
    fn dims(&self) -> usize;

    fn width(&self) -> usize;

    fn outputs(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

/// Raw model outputs.
pub struct ModelOutputs<'a>(pub &'a dyn AnalyticModel);

impl CoefficientSource for ModelOutputs<'_> {
    fn dims(&self) -> usize {
        self.0.dims()
    }

    fn width(&self) -> usize {
        self.0.output_len()
    }

    fn outputs(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.0.evaluate_batch(xs)
    }
}

/// Basis coefficients of model outputs, computed row by row so the full
/// `n x L` output matrix is never materialized.
pub struct ProjectedModel<'a> {
    model: &'a dyn AnalyticModel,
    basis: &'a BasisExpansion,
    /// `L x m`, so each component is a contiguous column.
    directions: DMatrix<f64>,
}

impl<'a> ProjectedModel<'a> {
    pub fn new(model: &'a dyn AnalyticModel, basis: &'a BasisExpansion) -> Result<Self> {
        if model.output_len() != basis.l() {
            return Err(Error::shape("model output length vs basis", basis.l(), model.output_len()));
        }
        Ok(Self {
            model,
            basis,
            directions: basis.components().transpose(),
        })
    }
}

impl CoefficientSource for ProjectedModel<'_> {
    fn dims(&self) -> usize {
        self.model.dims()
    }

    fn width(&self) -> usize {
        self.basis.m()
    }

    fn outputs(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xs.ncols() != self.dims() {
            return Err(Error::shape("model input width", self.dims(), xs.ncols()));
        }
        let (l, m) = (self.basis.l(), self.basis.m());
        let mean = self.basis.mean();
        let rows: Vec<Vec<f64>> = (0..xs.nrows())
            .into_par_iter()
            .map_init(
                || vec![0.0; l],
                |y, i| {
                    let x: Vec<f64> = xs.row(i).iter().copied().collect();
                    self.model.evaluate_into(&x, y)?;
                    for (v, mu) in y.iter_mut().zip(mean.iter()) {
                        *v -= mu;
                    }
                    Ok((0..m)
                        .map(|k| self.directions.column(k).iter().zip(y.iter()).map(|(a, b)| a * b).sum())
                        .collect())
                },
            )
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(xs.nrows(), m, |i, k| rows[i][k]))
    }
}

/// Paired samples of every index set in `sets`, all tagged with the design.
pub fn build_index_samples(
    design: &PickFreezeDesign,
    source: &dyn CoefficientSource,
    sets: &[IndexSet],
) -> Result<Vec<IndexSample>> {
    let d = design.dims();
    if source.dims() != d {
        return Err(Error::shape("design dimension", source.dims(), d));
    }
    let tag = design.tag();
    let y = source.outputs(design.x())?;
    let mut mixed: HashMap<Vec<usize>, DMatrix<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        let mut pairs = Vec::new();
        for frozen in set.frozen_sets(d) {
            if !mixed.contains_key(&frozen) {
                let ys = source.outputs(&design.x_star(&frozen)?)?;
                mixed.insert(frozen.clone(), ys);
            }
            pairs.push(PairedOutputSample::new(y.clone(), mixed[&frozen].clone())?.with_tag(tag));
        }
        out.push(IndexSample::new(set.clone(), pairs)?);
    }
    Ok(out)
}
