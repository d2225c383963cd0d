//! Sensitivity maps by the dimension-wise and basis-derived routes.
//!
//! The dimension-wise route decodes the coefficient pairs to every output
//! dimension `l` and runs the scalar pick-freeze estimator pixel by pixel.
//! The basis-derived route computes the `m x m` pick-freeze matrices of the
//! coefficients once and evaluates, for every `l`,
//!
//! ```text
//! S_l = (v_l^T D v_l) / (v_l^T Cov v_l)
//! ```
//!
//! with `D` the closed, total (Jansen) or second-order numerator matrix. Both
//! estimators are quadratic forms in the paired samples, so the two routes
//! return the same numbers up to rounding.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisExpansion;
use crate::bootstrap::BootstrapBands;
use crate::error::{Error, Result};
use crate::pf::{self, is_degenerate, pf_vector, quadratic_form, PairedOutputSample, SobolMatrixSet};
use crate::sampling::{IndexKind, IndexSet};

/// Output dimensions decoded together by the dimension-wise route.
const DW_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DimensionWise,
    BasisDerived,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::DimensionWise => "dw",
            Method::BasisDerived => "bd",
        }
    }
}

/// Per-output-dimension index estimates. Degenerate dimensions (variance
/// under the threshold) are flagged and hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMap {
    values: Vec<f64>,
    flags: Vec<bool>,
    kind: IndexKind,
    index_set: Option<IndexSet>,
    method: Method,
    bands: Option<BootstrapBands>,
}

impl SensitivityMap {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    pub fn index_set(&self) -> Option<&IndexSet> {
        self.index_set.as_ref()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn bands(&self) -> Option<&BootstrapBands> {
        self.bands.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn with_index_set(mut self, set: IndexSet) -> Self {
        self.index_set = Some(set);
        self
    }

    pub fn with_bands(mut self, bands: BootstrapBands) -> Result<Self> {
        if bands.center.len() != self.len() {
            return Err(Error::shape("bootstrap bands length", self.len(), bands.center.len()));
        }
        self.bands = Some(bands);
        Ok(self)
    }

    fn from_parts(entries: Vec<Option<f64>>, kind: IndexKind, method: Method) -> Self {
        let flags = entries.iter().map(Option::is_none).collect();
        let values = entries.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Self {
            values,
            flags,
            kind,
            index_set: None,
            method,
            bands: None,
        }
    }
}

/// Largest pixelwise `|a - b| / max(|a|, |b|)` over dimensions flagged in
/// neither map. A dimension flagged in exactly one map counts as infinite.
pub fn max_relative_difference(a: &SensitivityMap, b: &SensitivityMap) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("map lengths", a.len(), b.len()));
    }
    let mut worst = 0.0_f64;
    for l in 0..a.len() {
        match (a.flags[l], b.flags[l]) {
            (true, true) => {}
            (false, false) => {
                let (x, y) = (a.values[l], b.values[l]);
                let scale = x.abs().max(y.abs());
                if scale > 0.0 {
                    worst = worst.max((x - y).abs() / scale);
                }
            }
            _ => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

/// Coefficient pick-freeze pairs for one index set: a single sample for
/// closed and total indices, or the `{i, j}`, `{i}`, `{j}` samples (in that
/// order, sharing one design) for second-order pairs.
#[derive(Debug, Clone)]
pub struct IndexSample {
    index_set: IndexSet,
    pairs: Vec<PairedOutputSample>,
}

impl IndexSample {
    pub fn new(index_set: IndexSet, pairs: Vec<PairedOutputSample>) -> Result<Self> {
        let expected = if index_set.kind() == IndexKind::SecondOrder { 3 } else { 1 };
        if pairs.len() != expected {
            return Err(Error::shape("pair samples for index set", expected, pairs.len()));
        }
        let (n, w) = (pairs[0].n(), pairs[0].width());
        for p in &pairs[1..] {
            if p.n() != n || p.width() != w {
                return Err(Error::shape(
                    "pair samples of one index set",
                    format!("{n}x{w}"),
                    format!("{}x{}", p.n(), p.width()),
                ));
            }
            if p.tag() != pairs[0].tag() {
                return Err(Error::ProvenanceMismatch);
            }
        }
        Ok(Self { index_set, pairs })
    }

    /// Closed or total sample from a single pair.
    pub fn single(index_set: IndexSet, pair: PairedOutputSample) -> Result<Self> {
        Self::new(index_set, vec![pair])
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn kind(&self) -> IndexKind {
        self.index_set.kind()
    }

    pub fn pairs(&self) -> &[PairedOutputSample] {
        &self.pairs
    }

    pub fn n(&self) -> usize {
        self.pairs[0].n()
    }

    pub fn width(&self) -> usize {
        self.pairs[0].width()
    }

    /// The same rows of every pair sample.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            index_set: self.index_set.clone(),
            pairs: self.pairs.iter().map(|p| p.select_rows(rows)).collect(),
        }
    }

    /// Matrix set whose numerator for [`Self::kind`] is ready for projection.
    /// For second-order pairs `d_closed` holds `D_ij - D_i - D_j`.
    pub fn matrices(&self) -> Result<SobolMatrixSet> {
        match self.kind() {
            IndexKind::SecondOrder => {
                let sets = self.pairs.iter().map(pf_vector).collect::<Result<Vec<_>>>()?;
                SobolMatrixSet::second_order(&sets[0], &sets[1], &sets[2])
            }
            _ => pf_vector(&self.pairs[0]),
        }
    }
}

fn numerator(set: &SobolMatrixSet, kind: IndexKind) -> &DMatrix<f64> {
    match kind {
        IndexKind::Total => set.d_total(),
        _ => set.d_closed(),
    }
}

/// Basis-derived map from precomputed coefficient matrices.
pub fn sm_basis_derived(basis: &BasisExpansion, set: &SobolMatrixSet, kind: IndexKind) -> Result<SensitivityMap> {
    if set.width() != basis.m() {
        return Err(Error::shape("coefficient matrix size", basis.m(), set.width()));
    }
    let num = numerator(set, kind);
    let cov = set.cov();
    let comps = basis.components();
    let m = basis.m();
    let entries: Vec<Option<f64>> = (0..basis.l())
        .into_par_iter()
        .map(|l| {
            let v = &comps.as_slice()[l * m..(l + 1) * m];
            let var = quadratic_form(cov, v);
            let level = basis.mean()[l] + v.iter().zip(set.f0().iter()).map(|(a, b)| a * b).sum::<f64>();
            let scale = (level * level + var.max(0.0)).sqrt();
            if is_degenerate(var, scale) {
                None
            } else {
                Some(quadratic_form(num, v) / var)
            }
        })
        .collect();
    Ok(SensitivityMap::from_parts(entries, kind, Method::BasisDerived))
}

/// Basis-derived map for an index sample.
pub fn sensitivity_map_bd(basis: &BasisExpansion, sample: &IndexSample) -> Result<SensitivityMap> {
    let set = sample.matrices()?;
    Ok(sm_basis_derived(basis, &set, sample.kind())?.with_index_set(sample.index_set.clone()))
}

/// Dimension-wise map: decode every pair sample to the output space and run
/// the scalar estimators at each output dimension.
pub fn sm_dimension_wise(basis: &BasisExpansion, sample: &IndexSample) -> Result<SensitivityMap> {
    if sample.width() != basis.m() {
        return Err(Error::shape("coefficient width", basis.m(), sample.width()));
    }
    if sample.n() < 2 {
        return Err(Error::Config(format!("pick-freeze needs N >= 2, got {}", sample.n())));
    }
    let kind = sample.kind();
    let l_total = basis.l();
    let chunks: Vec<(usize, usize)> = (0..l_total)
        .step_by(DW_CHUNK)
        .map(|start| (start, DW_CHUNK.min(l_total - start)))
        .collect();

    let per_chunk: Vec<Vec<Option<f64>>> = chunks
        .par_iter()
        .map(|&(start, width)| {
            let comps = basis.components().columns(start, width);
            let mean = basis.mean().rows(start, width);
            let decode = |c: &DMatrix<f64>| {
                let mut out = c * comps;
                for (j, mut col) in out.column_iter_mut().enumerate() {
                    col.add_scalar_mut(mean[j]);
                }
                out
            };
            let decoded: Vec<(DMatrix<f64>, DMatrix<f64>)> = sample
                .pairs
                .iter()
                .map(|p| (decode(p.y()), decode(p.y_star())))
                .collect();
            let cols: Vec<(Vec<&[f64]>, Vec<&[f64]>)> = decoded
                .iter()
                .map(|(y, ys)| (pf::column_slices(y), pf::column_slices(ys)))
                .collect();
            (0..width)
                .map(|j| {
                    let mom: Vec<pf::Moments> = cols
                        .iter()
                        .map(|(y, ys)| pf::moments(&[y[j]], &[ys[j]]))
                        .collect();
                    let var = mom[0].cov[0];
                    if is_degenerate(var, mom[0].scale) {
                        return None;
                    }
                    let num = match kind {
                        IndexKind::Closed => mom[0].closed[0],
                        IndexKind::Total => mom[0].total[0],
                        IndexKind::SecondOrder => mom[0].closed[0] - mom[1].closed[0] - mom[2].closed[0],
                    };
                    Some(num / var)
                })
                .collect()
        })
        .collect();

    let entries = per_chunk.into_iter().flatten().collect();
    Ok(SensitivityMap::from_parts(entries, kind, Method::DimensionWise).with_index_set(sample.index_set.clone()))
}

/// Per-coefficient indices `D[k,k] / Cov[k,k]` of the requested kind.
pub fn coefficient_indices(set: &SobolMatrixSet, kind: IndexKind) -> Vec<f64> {
    (0..set.width()).map(|k| pf::column_value(set, kind, k)).collect()
}

/// Eigenvalue-weighted average of per-coefficient indices.
pub fn gsi(eigenvalues: &[f64], coefficient_indices: &[f64]) -> Result<f64> {
    if eigenvalues.len() != coefficient_indices.len() {
        return Err(Error::shape("GSI inputs", eigenvalues.len(), coefficient_indices.len()));
    }
    let mass: f64 = eigenvalues.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Config("GSI needs positive total eigenvalue mass".into()));
    }
    let weighted: f64 = eigenvalues.iter().zip(coefficient_indices).map(|(l, s)| l * s).sum();
    Ok(weighted / mass)
}

/// GSI of an index sample, with the basis eigenvalues as weights.
pub fn gsi_for_sample(basis: &BasisExpansion, sample: &IndexSample) -> Result<f64> {
    let set = sample.matrices()?;
    gsi(basis.eigenvalues(), &coefficient_indices(&set, sample.kind()))
}

/// Predictivity coefficient
/// `1 - mean_l(mean_k (y - yhat)^2) / mean_l(Var_k y)`.
///
/// Both the squared error and the variance average over the `n` validation
/// rows (population variance), so the column-mean predictor scores exactly 0.
pub fn q_squared(truth: &DMatrix<f64>, predictions: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != predictions.shape() {
        return Err(Error::shape(
            "Q2 inputs",
            format!("{:?}", truth.shape()),
            format!("{:?}", predictions.shape()),
        ));
    }
    let (n, l) = truth.shape();
    if n < 2 || l == 0 {
        return Err(Error::Config("Q2 needs at least 2 rows and 1 column".into()));
    }
    let nf = n as f64;
    let mut mse = 0.0;
    let mut var = 0.0;
    for j in 0..l {
        let t = truth.column(j);
        let p = predictions.column(j);
        let mu = t.mean();
        mse += t.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / nf;
        var += t.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / nf;
    }
    if !(var > 0.0) {
        return Err(Error::Config("Q2 undefined for constant truth".into()));
    }
    Ok(1.0 - mse / var)
}
