//! Pick-freeze estimators for scalar and vector outputs.
//!
//! For paired samples `Y_(k)`, `Y*_(k)` (`k = 1..N`) with the shared mean
//! `f0 = (1/N) sum (Y + Y*)/2`:
//!
//! ```text
//! D_closed = (1/N)  sum Y (Y*)^T - f0 f0^T                 (Janon-Monod)
//! D_total  = (1/2N) sum (Y - Y*)(Y - Y*)^T                  (Jansen)
//! Cov      = (1/N)  sum (Y Y^T + Y* (Y*)^T)/2 - f0 f0^T
//! ```
//!
//! The closed and covariance terms are accumulated on samples centered at
//! `f0`, which is algebraically identical (`mean(Y + Y*) = 2 f0`) and avoids
//! cancellation when outputs carry a large mean. All sums over `k` are
//! pairwise with a fixed tree (see [`crate::summation`]).
//!
//! Scalar estimators run the exact same accumulation as [`pf_vector`] with
//! one column, so `pf_vector` on `p = 1` reproduces them bit for bit.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{DesignTag, IndexKind, IndexSet};
use crate::summation::pairwise_reduce;

/// Variances below `DEGENERACY_REL * scale^2` are treated as zero, with
/// `scale` the largest absolute output value in the sample.
pub const DEGENERACY_REL: f64 = 1e-12;

/// Aligned evaluations `Y_(k)` and `Y*_(k)`, stored as `N x p` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedOutputSample {
    y: DMatrix<f64>,
    y_star: DMatrix<f64>,
    tag: Option<DesignTag>,
}

impl PairedOutputSample {
    pub fn new(y: DMatrix<f64>, y_star: DMatrix<f64>) -> Result<Self> {
        if y.shape() != y_star.shape() {
            return Err(Error::shape(
                "paired output sample",
                format!("{:?}", y.shape()),
                format!("{:?}", y_star.shape()),
            ));
        }
        if y.ncols() == 0 {
            return Err(Error::Config("paired output sample has no columns".into()));
        }
        Ok(Self { y, y_star, tag: None })
    }

    /// Scalar-output pair.
    pub fn scalar(y: &[f64], y_star: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_column_slice(y.len(), 1, y),
            DMatrix::from_column_slice(y_star.len(), 1, y_star),
        )
    }

    /// Records which `(X, Z)` design produced the sample.
    pub fn with_tag(mut self, tag: DesignTag) -> Self {
        self.tag = Some(tag);
        self
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn y_star(&self) -> &DMatrix<f64> {
        &self.y_star
    }

    pub fn tag(&self) -> Option<DesignTag> {
        self.tag
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn width(&self) -> usize {
        self.y.ncols()
    }

    /// Rows `rows[0], rows[1], ...` of both samples, kept paired.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            y: self.y.select_rows(rows),
            y_star: self.y_star.select_rows(rows),
            tag: self.tag,
        }
    }

    /// Samples with `y` and `y_star` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            y: self.y_star.clone(),
            y_star: self.y.clone(),
            tag: self.tag,
        }
    }

    pub(crate) fn columns(&self) -> (Vec<&[f64]>, Vec<&[f64]>) {
        (column_slices(&self.y), column_slices(&self.y_star))
    }
}

pub(crate) fn column_slices(m: &DMatrix<f64>) -> Vec<&[f64]> {
    let n = m.nrows();
    m.as_slice().chunks_exact(n.max(1)).take(m.ncols()).collect()
}

/// Unnormalized pick-freeze quantities, flattened `p x p` in column order.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub p: usize,
    pub n: usize,
    pub f0: Vec<f64>,
    pub closed: Vec<f64>,
    pub total: Vec<f64>,
    pub cov: Vec<f64>,
    pub scale: f64,
}

struct Sums {
    closed: Vec<f64>,
    total: Vec<f64>,
    cov: Vec<f64>,
}

impl Sums {
    fn zeros(p: usize) -> Self {
        Self {
            closed: vec![0.0; p * p],
            total: vec![0.0; p * p],
            cov: vec![0.0; p * p],
        }
    }

    fn merge(mut self, other: Sums) -> Sums {
        for (a, b) in self.closed.iter_mut().zip(&other.closed) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
        for (a, b) in self.cov.iter_mut().zip(&other.cov) {
            *a += b;
        }
        self
    }
}

/// Shared accumulation behind every estimator in this module.
pub(crate) fn moments(y: &[&[f64]], ys: &[&[f64]]) -> Moments {
    let p = y.len();
    let n = y.first().map_or(0, |c| c.len());
    let nf = n as f64;

    let f0: Vec<f64> = (0..p)
        .map(|i| {
            let (a, b) = (y[i], ys[i]);
            let s = pairwise_reduce(
                0..n,
                &|r: Range<usize>| {
                    let mut acc = 0.0;
                    for k in r {
                        acc += 0.5 * (a[k] + b[k]);
                    }
                    acc
                },
                &|u, v| u + v,
            );
            s / nf
        })
        .collect();

    let leaf = |r: Range<usize>| {
        let mut s = Sums::zeros(p);
        let mut a = vec![0.0; p];
        let mut b = vec![0.0; p];
        let mut diff = vec![0.0; p];
        for k in r {
            for i in 0..p {
                a[i] = y[i][k] - f0[i];
                b[i] = ys[i][k] - f0[i];
                diff[i] = y[i][k] - ys[i][k];
            }
            for j in 0..p {
                for i in 0..p {
                    s.closed[i + j * p] += a[i] * b[j];
                }
                for i in 0..=j {
                    s.cov[i + j * p] += 0.5 * (a[i] * a[j] + b[i] * b[j]);
                    s.total[i + j * p] += diff[i] * diff[j];
                }
            }
        }
        s
    };
    let sums = pairwise_reduce(0..n, &leaf, &|u: Sums, v: Sums| u.merge(v));

    let mut closed = vec![0.0; p * p];
    let mut total = vec![0.0; p * p];
    let mut cov = vec![0.0; p * p];
    for j in 0..p {
        for i in 0..p {
            closed[i + j * p] = 0.5 * (sums.closed[i + j * p] + sums.closed[j + i * p]) / nf;
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            cov[i + j * p] = sums.cov[lo + hi * p] / nf;
            total[i + j * p] = sums.total[lo + hi * p] / (2.0 * nf);
        }
    }

    let scale = y
        .iter()
        .chain(ys)
        .flat_map(|c| c.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));

    Moments {
        p,
        n,
        f0,
        closed,
        total,
        cov,
        scale,
    }
}

/// `true` when `variance` is indistinguishable from zero at output scale `scale`.
pub fn is_degenerate(variance: f64, scale: f64) -> bool {
    !(variance > DEGENERACY_REL * scale * scale) || !variance.is_finite()
}

/// Normalized estimate of a single Sobol' index, together with the
/// unnormalized numerator and the variance estimate it was divided by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarIndexEstimate {
    pub value: f64,
    pub numerator: f64,
    pub variance: f64,
    pub kind: IndexKind,
    pub index_set: Option<IndexSet>,
    pub design: Option<DesignTag>,
}

impl ScalarIndexEstimate {
    pub fn with_index_set(mut self, set: IndexSet) -> Self {
        self.index_set = Some(set);
        self
    }
}

fn scalar_moments(s: &PairedOutputSample) -> Result<Moments> {
    if s.width() != 1 {
        return Err(Error::shape("scalar pick-freeze sample width", 1, s.width()));
    }
    if s.n() < 2 {
        return Err(Error::Config(format!("pick-freeze needs N >= 2, got {}", s.n())));
    }
    let (y, ys) = s.columns();
    let m = moments(&y, &ys);
    let threshold = DEGENERACY_REL * m.scale * m.scale;
    if is_degenerate(m.cov[0], m.scale) {
        return Err(Error::DegenerateVariance {
            variance: m.cov[0],
            threshold,
        });
    }
    Ok(m)
}

/// Janon-Monod estimator of the closed index of the frozen set.
pub fn pf_scalar_closed(s: &PairedOutputSample) -> Result<ScalarIndexEstimate> {
    let m = scalar_moments(s)?;
    Ok(ScalarIndexEstimate {
        value: m.closed[0] / m.cov[0],
        numerator: m.closed[0],
        variance: m.cov[0],
        kind: IndexKind::Closed,
        index_set: None,
        design: s.tag(),
    })
}

/// Jansen estimator `(1/2N) sum (Y - Y*)^2 / Var`.
///
/// With `Y*` frozen on `J`, this estimates the total index of the
/// complement of `J`.
pub fn pf_scalar_total_jansen(s: &PairedOutputSample) -> Result<ScalarIndexEstimate> {
    let m = scalar_moments(s)?;
    Ok(ScalarIndexEstimate {
        value: m.total[0] / m.cov[0],
        numerator: m.total[0],
        variance: m.cov[0],
        kind: IndexKind::Total,
        index_set: None,
        design: s.tag(),
    })
}

/// Total index of `I` as `1 - S_closed(~I)`.
pub fn pf_scalar_total_complement(closed_complement: &ScalarIndexEstimate) -> ScalarIndexEstimate {
    ScalarIndexEstimate {
        value: 1.0 - closed_complement.value,
        numerator: closed_complement.variance - closed_complement.numerator,
        variance: closed_complement.variance,
        kind: IndexKind::Total,
        index_set: None,
        design: closed_complement.design,
    }
}

/// Second-order index `(D_ij - D_i - D_j) / Var` from the closed estimates of
/// `{i, j}`, `{i}` and `{j}`. The unnormalized numerators are combined and
/// divided by the variance of the `{i, j}` estimate, so all three must come
/// from the same design.
pub fn pf_scalar_second_order(
    c_ij: &ScalarIndexEstimate,
    c_i: &ScalarIndexEstimate,
    c_j: &ScalarIndexEstimate,
) -> Result<ScalarIndexEstimate> {
    if c_ij.design != c_i.design || c_ij.design != c_j.design {
        return Err(Error::ProvenanceMismatch);
    }
    let numerator = c_ij.numerator - c_i.numerator - c_j.numerator;
    Ok(ScalarIndexEstimate {
        value: numerator / c_ij.variance,
        numerator,
        variance: c_ij.variance,
        kind: IndexKind::SecondOrder,
        index_set: None,
        design: c_ij.design,
    })
}

/// Matrix-valued pick-freeze estimates for a `p`-dimensional output.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolMatrixSet {
    d_closed: DMatrix<f64>,
    d_total: DMatrix<f64>,
    cov: DMatrix<f64>,
    f0: DVector<f64>,
    n: usize,
    design: Option<DesignTag>,
}

impl SobolMatrixSet {
    fn from_moments(m: Moments, design: Option<DesignTag>) -> Self {
        let p = m.p;
        Self {
            d_closed: DMatrix::from_vec(p, p, m.closed),
            d_total: DMatrix::from_vec(p, p, m.total),
            cov: DMatrix::from_vec(p, p, m.cov),
            f0: DVector::from_vec(m.f0),
            n: m.n,
            design,
        }
    }

    /// Assembles a set from precomputed matrices. `d_closed` is symmetrized.
    pub fn from_parts(
        d_closed: DMatrix<f64>,
        d_total: DMatrix<f64>,
        cov: DMatrix<f64>,
        f0: DVector<f64>,
        n: usize,
    ) -> Result<Self> {
        let p = f0.len();
        for (name, mat) in [("d_closed", &d_closed), ("d_total", &d_total), ("cov", &cov)] {
            if mat.shape() != (p, p) {
                return Err(Error::Shape {
                    context: "sobol matrix set",
                    expected: format!("{p}x{p} {name}"),
                    actual: format!("{:?}", mat.shape()),
                });
            }
        }
        let d_closed = (&d_closed + d_closed.transpose()) * 0.5;
        Ok(Self {
            d_closed,
            d_total,
            cov,
            f0,
            n,
            design: None,
        })
    }

    pub fn d_closed(&self) -> &DMatrix<f64> {
        &self.d_closed
    }

    pub fn d_total(&self) -> &DMatrix<f64> {
        &self.d_total
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn f0(&self) -> &DVector<f64> {
        &self.f0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.f0.len()
    }

    pub fn design(&self) -> Option<DesignTag> {
        self.design
    }

    /// Matrix-level second-order combination: `d_closed` becomes
    /// `D_ij - D_i - D_j` and the covariance of the `{i, j}` design is kept.
    pub fn second_order(joint: &Self, first: &Self, second: &Self) -> Result<Self> {
        if joint.design != first.design || joint.design != second.design || joint.n != first.n || joint.n != second.n {
            return Err(Error::ProvenanceMismatch);
        }
        if joint.width() != first.width() || joint.width() != second.width() {
            return Err(Error::shape("second-order matrix sets", joint.width(), first.width()));
        }
        Ok(Self {
            d_closed: &joint.d_closed - &first.d_closed - &second.d_closed,
            d_total: joint.d_total.clone(),
            cov: joint.cov.clone(),
            f0: joint.f0.clone(),
            n: joint.n,
            design: joint.design,
        })
    }
}

/// Matrix-valued estimates of the closed, total and covariance quantities.
pub fn pf_vector(s: &PairedOutputSample) -> Result<SobolMatrixSet> {
    if s.n() < 2 {
        return Err(Error::Config(format!("pick-freeze needs N >= 2, got {}", s.n())));
    }
    let (y, ys) = s.columns();
    Ok(SobolMatrixSet::from_moments(moments(&y, &ys), s.tag()))
}

/// `x^T A x` for symmetric `A`, using the upper triangle only.
pub fn quadratic_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let p = x.len();
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..p {
        let xj = x[j];
        diag += a[(j, j)] * xj * xj;
        let mut row = 0.0;
        for i in 0..j {
            row += a[(i, j)] * x[i];
        }
        off += row * xj;
    }
    diag + 2.0 * off
}

/// Estimates of `kind` for a pair sample, per output column.
pub(crate) fn column_value(set: &SobolMatrixSet, kind: IndexKind, k: usize) -> f64 {
    let num = match kind {
        IndexKind::Total => set.d_total[(k, k)],
        _ => set.d_closed[(k, k)],
    };
    num / set.cov[(k, k)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn janon_monod_hand_value() {
        let s = PairedOutputSample::scalar(&[0.0, 2.0], &[2.0, 0.0]).unwrap();
        let e = pf_scalar_closed(&s).unwrap();
        assert_eq!(e.numerator, -1.0);
        assert_eq!(e.variance, 1.0);
        assert_eq!(e.value, -1.0);
    }

    #[test]
    fn jansen_hand_value() {
        let s = PairedOutputSample::scalar(&[0.0, 2.0], &[2.0, 0.0]).unwrap();
        let e = pf_scalar_total_jansen(&s).unwrap();
        assert_eq!(e.numerator, 2.0);
        assert_eq!(e.value, 2.0);
    }

    #[test]
    fn identical_samples() {
        let y = [0.3, 1.2, -0.7, 2.5];
        let s = PairedOutputSample::scalar(&y, &y).unwrap();
        assert_eq!(pf_scalar_closed(&s).unwrap().value, 1.0);
        assert_eq!(pf_scalar_total_jansen(&s).unwrap().value, 0.0);
    }

    #[test]
    fn constant_output_is_degenerate() {
        let s = PairedOutputSample::scalar(&[3.0; 5], &[3.0; 5]).unwrap();
        assert!(matches!(pf_scalar_closed(&s), Err(Error::DegenerateVariance { .. })));
        assert!(matches!(pf_scalar_total_jansen(&s), Err(Error::DegenerateVariance { .. })));
        let z = PairedOutputSample::scalar(&[0.0; 5], &[0.0; 5]).unwrap();
        assert!(pf_scalar_closed(&z).is_err());
    }

    #[test]
    fn requires_two_rows_and_one_column() {
        let s = PairedOutputSample::scalar(&[1.0], &[2.0]).unwrap();
        assert!(pf_scalar_closed(&s).is_err());
        assert!(pf_vector(&s).is_err());
        let wide = PairedOutputSample::new(DMatrix::zeros(3, 2), DMatrix::zeros(3, 2)).unwrap();
        assert!(pf_scalar_closed(&wide).is_err());
        assert!(PairedOutputSample::new(DMatrix::zeros(3, 2), DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn complement_route() {
        let mk = |value| ScalarIndexEstimate {
            value,
            numerator: value,
            variance: 1.0,
            kind: IndexKind::Closed,
            index_set: None,
            design: None,
        };
        assert_eq!(pf_scalar_total_complement(&mk(1.0)).value, 0.0);
        assert_eq!(pf_scalar_total_complement(&mk(0.3)).value, 0.7);
        assert_eq!(pf_scalar_total_complement(&mk(0.3)).kind, IndexKind::Total);
    }

    #[test]
    fn second_order_arithmetic_and_provenance() {
        let mk = |value, tag| ScalarIndexEstimate {
            value,
            numerator: value * 4.0,
            variance: 4.0,
            kind: IndexKind::Closed,
            index_set: None,
            design: Some(DesignTag(tag)),
        };
        let s = pf_scalar_second_order(&mk(0.5, 1), &mk(0.2, 1), &mk(0.1, 1)).unwrap();
        assert!((s.value - 0.2).abs() < 1e-15);
        assert_eq!(s.kind, IndexKind::SecondOrder);
        assert!(matches!(
            pf_scalar_second_order(&mk(0.5, 1), &mk(0.2, 2), &mk(0.1, 1)),
            Err(Error::ProvenanceMismatch)
        ));
    }

    #[test]
    fn matrix_hand_example() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let ys = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let set = pf_vector(&PairedOutputSample::new(y, ys).unwrap()).unwrap();
        assert_eq!(set.f0().as_slice(), &[0.5, 0.5]);
        assert_eq!(set.d_closed(), &DMatrix::from_row_slice(2, 2, &[-0.25, 0.25, 0.25, -0.25]));
        // (Y - Y*) rows are (1,-1) and (-1,1): (1/4) * 2 * [[1,-1],[-1,1]].
        assert_eq!(set.d_total(), &DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        assert_eq!(set.cov(), &DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]));
    }

    #[test]
    fn identical_vector_samples() {
        let y = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 * 0.37 - 1.0);
        let set = pf_vector(&PairedOutputSample::new(y.clone(), y).unwrap()).unwrap();
        assert!(set.d_total().iter().all(|&v| v == 0.0));
        assert_eq!(set.d_closed(), set.cov());
    }

    #[test]
    fn vector_p1_is_bit_identical_to_scalar() {
        let y: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.731).sin() * 3.0 + 10.0).collect();
        let ys: Vec<f64> = (0..1000).map(|k| (k as f64 * 1.113).cos() * 2.0 + 10.0).collect();
        let s = PairedOutputSample::scalar(&y, &ys).unwrap();
        let set = pf_vector(&s).unwrap();
        let c = pf_scalar_closed(&s).unwrap();
        let t = pf_scalar_total_jansen(&s).unwrap();
        assert_eq!(set.d_closed()[(0, 0)].to_bits(), c.numerator.to_bits());
        assert_eq!(set.d_total()[(0, 0)].to_bits(), t.numerator.to_bits());
        assert_eq!(set.cov()[(0, 0)].to_bits(), c.variance.to_bits());
    }

    #[test]
    fn quadratic_form_matches_dense_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -1.0, 0.5, 3.0, 0.25, -1.0, 0.25, 1.0]);
        let x = [1.0, -2.0, 0.5];
        let v = DVector::from_row_slice(&x);
        let dense = (v.transpose() * &a * &v)[(0, 0)];
        assert!((quadratic_form(&a, &x) - dense).abs() < 1e-14);
    }
}
