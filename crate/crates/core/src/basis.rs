//! Basis expansions `y = mean + sum_i c_i v_i` and PCA fitting.
//!
//! Components are stored row-wise in an `m x L` matrix, so the column `l`
//! holds the vector `v_{., l}` used by the basis-derived quadratic forms.
//! PCA bases are fitted with an SVD of the centered snapshot matrix; each
//! component is oriented so its entry of largest magnitude is positive.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::{self, Meta, MetaKind, FORMAT_VERSION};

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaTarget {
    /// Smallest `m` whose explained variance reaches the fraction, in `(0, 1]`.
    VarianceFraction(f64),
    /// A fixed number of components.
    Components(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisExpansion {
    mean: DVector<f64>,
    components: DMatrix<f64>,
    spectrum: Vec<f64>,
    n_snapshots: Option<usize>,
}

/// Coefficients of a set of outputs in a given basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSample {
    pub coeffs: DMatrix<f64>,
    pub basis_id: u64,
}

impl BasisExpansion {
    /// Direct construction, e.g. for bases not fitted by PCA. `spectrum` holds
    /// the variance carried by each basis direction, at least `m` entries,
    /// nonincreasing and nonnegative.
    pub fn new(mean: DVector<f64>, components: DMatrix<f64>, spectrum: Vec<f64>) -> Result<Self> {
        if components.ncols() != mean.len() {
            return Err(Error::shape("basis component width", mean.len(), components.ncols()));
        }
        if components.nrows() == 0 {
            return Err(Error::Config("basis needs at least one component".into()));
        }
        if spectrum.len() < components.nrows() {
            return Err(Error::shape("basis spectrum length", components.nrows(), spectrum.len()));
        }
        if spectrum.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config("eigenvalues must be finite and nonnegative".into()));
        }
        if spectrum.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("eigenvalues must be sorted nonincreasing".into()));
        }
        Ok(Self {
            mean,
            components,
            spectrum,
            n_snapshots: None,
        })
    }

    /// Principal component basis of the rows of `snapshots` (`n x L`).
    ///
    /// Eigenvalues are `s_k^2 / (n - 1)` for the singular values `s_k` of the
    /// centered matrix; the full spectrum up to the numerical rank is kept.
    pub fn fit_pca(snapshots: &DMatrix<f64>, target: PcaTarget) -> Result<Self> {
        let (n, l) = snapshots.shape();
        if n < 2 || l == 0 {
            return Err(Error::Config(format!(
                "PCA needs at least 2 snapshots and 1 output dimension, got {n}x{l}"
            )));
        }
        if let PcaTarget::VarianceFraction(f) = target {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("variance target {f} not in (0, 1]")));
            }
        }
        let mean = snapshots.row_mean().transpose();
        let mut centered = snapshots.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }

        // Thin SVD of the L x n transpose: its left singular vectors are the
        // right singular vectors of the centered snapshots.
        let svd = centered.transpose().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let s_max = order.first().map_or(0.0, |&k| svd.singular_values[k]);
        let tol = s_max * (n.max(l) as f64) * f64::EPSILON;
        let rank_order: Vec<usize> = order
            .into_iter()
            .filter(|&k| svd.singular_values[k] > tol)
            .take(n - 1)
            .collect();
        let rank = rank_order.len();
        if rank == 0 {
            return Err(Error::RankDeficient {
                requested: 1,
                achievable: 0,
            });
        }
        let spectrum: Vec<f64> = rank_order
            .iter()
            .map(|&k| svd.singular_values[k].powi(2) / (n - 1) as f64)
            .collect();

        let m = match target {
            PcaTarget::Components(m) => {
                if m == 0 || m > rank {
                    return Err(Error::RankDeficient {
                        requested: m,
                        achievable: rank,
                    });
                }
                m
            }
            PcaTarget::VarianceFraction(f) => {
                let total: f64 = spectrum.iter().sum();
                let mut acc = 0.0;
                let mut m = rank;
                for (k, lam) in spectrum.iter().enumerate() {
                    acc += lam;
                    if acc >= f * total * (1.0 - 1e-12) {
                        m = k + 1;
                        break;
                    }
                }
                m
            }
        };

        let mut components = DMatrix::zeros(m, l);
        for (i, &k) in rank_order.iter().take(m).enumerate() {
            let col = u.column(k);
            let pivot = col
                .iter()
                .copied()
                .fold((0.0_f64, 0.0_f64), |(best, val), v| {
                    if v.abs() > best {
                        (v.abs(), v)
                    } else {
                        (best, val)
                    }
                })
                .1;
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..l {
                components[(i, j)] = sign * col[j];
            }
        }
        Ok(Self {
            mean,
            components,
            spectrum,
            n_snapshots: Some(n),
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `m x L`, one component per row.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Eigenvalues of the retained components.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum[..self.m()]
    }

    /// Full spectrum, including truncated directions.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn m(&self) -> usize {
        self.components.nrows()
    }

    pub fn l(&self) -> usize {
        self.components.ncols()
    }

    pub fn n_snapshots(&self) -> Option<usize> {
        self.n_snapshots
    }

    /// Fingerprint of the mean and components.
    pub fn id(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.components.shape().hash(&mut h);
        for v in self.mean.iter().chain(self.components.iter()) {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Same basis restricted to the leading `m` components.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m() {
            return Err(Error::Config(format!("cannot truncate {} components to {m}", self.m())));
        }
        Ok(Self {
            mean: self.mean.clone(),
            components: self.components.rows(0, m).into_owned(),
            spectrum: self.spectrum.clone(),
            n_snapshots: self.n_snapshots,
        })
    }

    /// Coefficients `components * (y - mean)` of each snapshot row.
    pub fn encode(&self, snapshots: &DMatrix<f64>) -> Result<CoefficientSample> {
        if snapshots.ncols() != self.l() {
            return Err(Error::shape("snapshot width", self.l(), snapshots.ncols()));
        }
        let mut centered = snapshots.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(CoefficientSample {
            coeffs: centered * self.components.transpose(),
            basis_id: self.id(),
        })
    }

    /// Outputs `mean + coeffs * components`, one row per coefficient row.
    pub fn decode(&self, coeffs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if coeffs.ncols() != self.m() {
            return Err(Error::shape("coefficient width", self.m(), coeffs.ncols()));
        }
        let mut out = coeffs * &self.components;
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }

    /// Share of the total variance carried by the leading `m_prime` directions.
    pub fn explained_variance(&self, m_prime: usize) -> Result<f64> {
        if m_prime == 0 || m_prime > self.spectrum.len() {
            return Err(Error::Config(format!(
                "m' = {m_prime} outside 1..={}",
                self.spectrum.len()
            )));
        }
        let total: f64 = self.spectrum.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("basis spectrum carries no variance".into()));
        }
        Ok(self.spectrum[..m_prime].iter().sum::<f64>() / total)
    }

    /// Writes `meta.json`, `mean.csv` (one row) and `components.csv` (one row per component).
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::store_matrix(&dir.join("mean.csv"), &DMatrix::from_row_slice(1, self.l(), self.mean.as_slice()), None)?;
        io::store_matrix(&dir.join("components.csv"), &self.components, None)?;
        io::write_json(
            &dir.join("meta.json"),
            &Meta {
                version: FORMAT_VERSION,
                kind: MetaKind::Basis,
                n: self.n_snapshots.unwrap_or(0),
                l_or_m: self.l(),
                labels: None,
                l: Some(self.l()),
                m: Some(self.m()),
                eigenvalues: Some(self.spectrum.clone()),
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: Meta = io::read_json(&dir.join("meta.json"))?;
        if meta.kind != MetaKind::Basis {
            return Err(Error::Config(format!("{}: not a basis directory", dir.display())));
        }
        let mean = io::load_matrix(&dir.join("mean.csv"))?;
        let components = io::load_matrix(&dir.join("components.csv"))?;
        if mean.nrows() != 1 {
            return Err(Error::shape("mean.csv rows", 1, mean.nrows()));
        }
        let l = meta.l.unwrap_or(meta.l_or_m);
        if mean.ncols() != l {
            return Err(Error::shape("mean.csv width", l, mean.ncols()));
        }
        if let Some(m) = meta.m {
            if components.nrows() != m {
                return Err(Error::shape("components.csv rows", m, components.nrows()));
            }
        }
        let spectrum = meta
            .eigenvalues
            .ok_or_else(|| Error::Config("basis meta.json lacks eigenvalues".into()))?;
        let mut basis = Self::new(mean.row(0).transpose(), components, spectrum)?;
        basis.n_snapshots = (meta.n > 0).then_some(meta.n);
        Ok(basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn rank_one_data_explained_by_one_component() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let scales = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let data = DMatrix::from_fn(5, 4, |i, j| scales[i] * v[j]);
        let b = BasisExpansion::fit_pca(&data, PcaTarget::VarianceFraction(0.999)).unwrap();
        assert_eq!(b.m(), 1);
        assert_eq!(b.spectrum().len(), 1);
        assert!((b.explained_variance(1).unwrap() - 1.0).abs() < 1e-15);
        // Largest entry positive.
        assert!(b.components()[(0, 3)] > 0.0);
    }

    #[test]
    fn spectrum_trace_identity() {
        let data = random_matrix(10, 5, 1);
        let b = BasisExpansion::fit_pca(&data, PcaTarget::VarianceFraction(1.0)).unwrap();
        let mut total = 0.0;
        for j in 0..5 {
            let col = data.column(j);
            let mu = col.mean();
            total += col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 9.0;
        }
        let sum: f64 = b.spectrum().iter().sum();
        assert!(((sum - total) / total).abs() < 1e-10);
        assert!(b.spectrum().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn orthonormal_components_and_centered_coefficients() {
        let data = random_matrix(30, 12, 2);
        let b = BasisExpansion::fit_pca(&data, PcaTarget::Components(6)).unwrap();
        let gram = b.components() * b.components().transpose();
        assert!((gram - DMatrix::<f64>::identity(6, 6)).amax() < 1e-10);
        let c = b.encode(&data).unwrap().coeffs;
        for k in 0..6 {
            let col = c.column(k);
            let mu = col.mean();
            assert!(mu.abs() < 1e-10);
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 29.0;
            assert!(((var - b.eigenvalues()[k]) / b.eigenvalues()[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn encode_decode() {
        let data = random_matrix(8, 20, 3);
        let full = BasisExpansion::fit_pca(&data, PcaTarget::Components(7)).unwrap();
        let back = full.decode(&full.encode(&data).unwrap().coeffs).unwrap();
        assert!((&back - &data).amax() / data.amax() < 1e-9);

        let mean_row = DMatrix::from_row_slice(1, 20, full.mean().as_slice());
        assert!(full.encode(&mean_row).unwrap().coeffs.amax() < 1e-12);
        let zero = DMatrix::zeros(1, 7);
        assert_eq!(full.decode(&zero).unwrap(), mean_row);

        let shifted = &mean_row + full.components().rows(0, 1);
        let c = full.encode(&shifted).unwrap().coeffs;
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(c.columns(1, 6).amax() < 1e-12);

        assert!(full.encode(&DMatrix::zeros(1, 19)).is_err());
        assert!(full.decode(&DMatrix::zeros(1, 6)).is_err());
    }

    #[test]
    fn explained_variance_arithmetic() {
        let b = BasisExpansion::new(
            DVector::zeros(2),
            DMatrix::identity(2, 2),
            vec![3.0, 1.0],
        )
        .unwrap();
        assert_eq!(b.explained_variance(1).unwrap(), 0.75);
        assert_eq!(b.explained_variance(2).unwrap(), 1.0);
        assert!(b.explained_variance(0).is_err());
        assert!(b.explained_variance(3).is_err());
    }

    #[test]
    fn rank_request_too_large() {
        let data = random_matrix(4, 10, 4);
        match BasisExpansion::fit_pca(&data, PcaTarget::Components(5)) {
            Err(Error::RankDeficient { requested, achievable }) => {
                assert_eq!((requested, achievable), (5, 3))
            }
            other => panic!("{other:?}"),
        }
        assert!(BasisExpansion::fit_pca(&DMatrix::zeros(1, 3), PcaTarget::Components(1)).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let data = random_matrix(12, 9, 5);
        let b = BasisExpansion::fit_pca(&data, PcaTarget::Components(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let back = BasisExpansion::load(dir.path()).unwrap();
        assert_eq!(back, b);
    }
}
