//! Analytical models with known or quadrature-computable Sobol' indices.
//!
//! * [`Campbell2d`]: eight inputs in `[-1, 5]`, a spatial map on a regular
//!   grid over `[-90, 90]^2`. Formula from Marrel, Iooss, Jullien, Laurent
//!   and Volkova (2011), "Global sensitivity analysis for models with
//!   spatially dependent outputs", Environmetrics 22(3):
//!
//!   ```text
//!   y(x, z) = x1 exp(-(0.8 z1 + 0.2 z2 - 10 x2)^2 / (60 x1^2))
//!           + (x2 + x4) exp((0.5 z1 + 0.5 z2) x1 / 500)
//!           + x5 (x3 - 2) exp(-(0.4 z1 + 0.6 z2 - 20 x6)^2 / (40 x5^2))
//!           + (x6 + x8) exp((0.3 z1 + 0.7 z2) x7 / 250)
//!   ```
//!
//!   The Gaussian bumps vanish in the limit `x1 -> 0` (resp. `x5 -> 0`) and
//!   are set to zero there.
//! * [`AdditiveModel`]: `y_l = sum_j w_j g_jl X_j`, with exact indices.
//! * [`ProductModel`]: `prod_j X_j` on `[-1, 1]^d`; all variance is in the
//!   top-order interaction.
//! * [`brute_force_sobol`]: tensorized Gauss-Legendre evaluation of
//!   `Var(E[f | X_I]) / Var(f)` for models with at most three inputs.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::{InputSpace, Uniform};

/// A deterministic map from `d` inputs to `L` outputs.
pub trait AnalyticModel: Send + Sync {
    fn name(&self) -> String;

    fn input_space(&self) -> &InputSpace;

    fn output_len(&self) -> usize;

    /// Writes the `L` outputs for input `x` into `out`.
    fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_len()];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    /// Exact closed indices of the set `members` (0-based), per output.
    fn exact_closed(&self, _members: &[usize]) -> Option<Vec<f64>> {
        None
    }

    fn dims(&self) -> usize {
        self.input_space().dims()
    }

    /// Evaluates every row of `xs`, giving an `n x L` matrix.
    fn evaluate_batch(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xs.ncols() != self.dims() {
            return Err(Error::shape("model input width", self.dims(), xs.ncols()));
        }
        let l = self.output_len();
        let rows: Vec<Vec<f64>> = (0..xs.nrows())
            .into_par_iter()
            .map(|i| {
                let x: Vec<f64> = xs.row(i).iter().copied().collect();
                self.evaluate(&x)
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(xs.nrows(), l, |i, j| rows[i][j]))
    }
}

fn check_len(model: &dyn AnalyticModel, x: &[f64], out: &[f64]) -> Result<()> {
    if x.len() != model.dims() {
        return Err(Error::shape("model input length", model.dims(), x.len()));
    }
    if out.len() != model.output_len() {
        return Err(Error::shape("model output length", model.output_len(), out.len()));
    }
    Ok(())
}

/// Regular grid over a square, flattened row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lower: -90.0,
            upper: 90.0,
            resolution: 64,
        }
    }
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, resolution: usize) -> Result<Self> {
        if !(lower < upper) || resolution < 2 {
            return Err(Error::Config(format!(
                "grid needs lower < upper and resolution >= 2, got [{lower}, {upper}] x {resolution}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            resolution,
        })
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    /// Coordinates along one axis, endpoints included.
    pub fn axis(&self) -> Vec<f64> {
        let step = (self.upper - self.lower) / (self.resolution - 1) as f64;
        (0..self.resolution)
            .map(|k| {
                if k == self.resolution - 1 {
                    self.upper
                } else {
                    self.lower + step * k as f64
                }
            })
            .collect()
    }

    /// `(z1, z2)` of flattened index `l = i * resolution + j`, with `z1` taken
    /// from row `i` and `z2` from column `j`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let axis = self.axis();
        let mut pts = Vec::with_capacity(self.len());
        for &z1 in &axis {
            for &z2 in &axis {
                pts.push((z1, z2));
            }
        }
        pts
    }
}

/// Campbell2D spatial test function.
#[derive(Debug, Clone)]
pub struct Campbell2d {
    space: InputSpace,
    grid: GridSpec,
    points: Vec<(f64, f64)>,
}

impl Campbell2d {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            space: InputSpace::uniform_cube(8, -1.0, 5.0).expect("valid bounds"),
            points: grid.points(),
            grid,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

impl Default for Campbell2d {
    fn default() -> Self {
        Self::new(GridSpec::default())
    }
}

fn bump(amplitude: f64, offset: f64, width: f64) -> f64 {
    if width == 0.0 {
        0.0
    } else {
        amplitude * (-(offset * offset) / width).exp()
    }
}

impl AnalyticModel for Campbell2d {
    fn name(&self) -> String {
        "campbell2d".into()
    }

    fn input_space(&self) -> &InputSpace {
        &self.space
    }

    fn output_len(&self) -> usize {
        self.points.len()
    }

    fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self, x, out)?;
        for (dim, (&v, m)) in x.iter().zip(self.space.marginals()).enumerate() {
            if !m.contains(v) {
                return Err(Error::Domain {
                    dim: dim + 1,
                    value: v,
                    lower: m.lower,
                    upper: m.upper,
                });
            }
        }
        let [x1, x2, x3, x4, x5, x6, x7, x8] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]];
        let w1 = 60.0 * x1 * x1;
        let w5 = 40.0 * x5 * x5;
        for (y, &(z1, z2)) in out.iter_mut().zip(&self.points) {
            *y = bump(x1, 0.8 * z1 + 0.2 * z2 - 10.0 * x2, w1)
                + (x2 + x4) * ((0.5 * z1 + 0.5 * z2) * x1 / 500.0).exp()
                + bump(x5 * (x3 - 2.0), 0.4 * z1 + 0.6 * z2 - 20.0 * x6, w5)
                + (x6 + x8) * ((0.3 * z1 + 0.7 * z2) * x7 / 250.0).exp();
        }
        Ok(())
    }
}

/// `y_l = sum_j w_j g_jl X_j` on independent uniform inputs.
#[derive(Debug, Clone)]
pub struct AdditiveModel {
    weights: Vec<f64>,
    space: InputSpace,
    /// `d x L` profile matrix `g`.
    profiles: DMatrix<f64>,
}

impl AdditiveModel {
    /// Scalar output `sum_j w_j X_j`.
    pub fn new(weights: Vec<f64>, space: InputSpace) -> Result<Self> {
        let d = weights.len();
        Self::with_profiles(weights, space, DMatrix::from_element(d, 1, 1.0))
    }

    pub fn with_profiles(weights: Vec<f64>, space: InputSpace, profiles: DMatrix<f64>) -> Result<Self> {
        if weights.len() != space.dims() {
            return Err(Error::shape("additive weights", space.dims(), weights.len()));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::Config("additive model needs a nonzero weight".into()));
        }
        if profiles.nrows() != weights.len() || profiles.ncols() == 0 {
            return Err(Error::shape("additive profiles rows", weights.len(), profiles.nrows()));
        }
        Ok(Self {
            weights,
            space,
            profiles,
        })
    }

    /// Every input shares the profile `1 + l / L`: every output dimension has
    /// the same indices as the scalar model.
    pub fn uniform_profile(weights: Vec<f64>, space: InputSpace, l: usize) -> Result<Self> {
        let d = weights.len();
        let profiles = DMatrix::from_fn(d, l, |_, k| 1.0 + k as f64 / l as f64);
        Self::with_profiles(weights, space, profiles)
    }

    /// Input-specific profiles `1.5 + sin(2 pi (j + 1) l / L + j)`, so the
    /// indices vary across output dimensions.
    pub fn varied_profiles(weights: Vec<f64>, space: InputSpace, l: usize) -> Result<Self> {
        let d = weights.len();
        let profiles = DMatrix::from_fn(d, l, |j, k| {
            1.5 + (2.0 * PI * (j + 1) as f64 * k as f64 / l as f64 + j as f64).sin()
        });
        Self::with_profiles(weights, space, profiles)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl AnalyticModel for AdditiveModel {
    fn name(&self) -> String {
        let w: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        format!("additive:w={}", w.join(","))
    }

    fn input_space(&self) -> &InputSpace {
        &self.space
    }

    fn output_len(&self) -> usize {
        self.profiles.ncols()
    }

    fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self, x, out)?;
        for (l, y) in out.iter_mut().enumerate() {
            *y = (0..x.len()).map(|j| self.weights[j] * self.profiles[(j, l)] * x[j]).sum();
        }
        Ok(())
    }

    fn exact_closed(&self, members: &[usize]) -> Option<Vec<f64>> {
        let marg = self.space.marginals();
        Some(
            (0..self.output_len())
                .map(|l| {
                    let part = |j: usize| {
                        let a = self.weights[j] * self.profiles[(j, l)];
                        a * a * marg[j].variance()
                    };
                    let total: f64 = (0..self.weights.len()).map(part).sum();
                    members.iter().map(|&j| part(j)).sum::<f64>() / total
                })
                .collect(),
        )
    }
}

/// `prod_j X_j` with `X_j ~ uniform(-1, 1)`.
#[derive(Debug, Clone)]
pub struct ProductModel {
    space: InputSpace,
}

impl ProductModel {
    pub fn new(d: usize) -> Result<Self> {
        Ok(Self {
            space: InputSpace::uniform_cube(d, -1.0, 1.0)?,
        })
    }
}

impl AnalyticModel for ProductModel {
    fn name(&self) -> String {
        format!("product:d={}", self.dims())
    }

    fn input_space(&self) -> &InputSpace {
        &self.space
    }

    fn output_len(&self) -> usize {
        1
    }

    fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self, x, out)?;
        out[0] = x.iter().product();
        Ok(())
    }

    /// Conditional expectations of the product vanish unless every input is
    /// conditioned on, because each factor has zero mean.
    fn exact_closed(&self, members: &[usize]) -> Option<Vec<f64>> {
        let all = (0..self.dims()).all(|j| members.contains(&j));
        Some(vec![if all { 1.0 } else { 0.0 }])
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// three-term recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Quadrature rule for one uniform marginal, weights summing to one.
fn marginal_rule(m: &Uniform, q: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(q);
    (
        x.iter().map(|&t| m.mean() + 0.5 * m.width() * t).collect(),
        w.iter().map(|&v| 0.5 * v).collect(),
    )
}

/// Quadrature value of closed indices and output variances.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureIndices {
    pub closed: Vec<f64>,
    pub variance: Vec<f64>,
    pub points: usize,
    /// Largest change of any closed index over the last doubling.
    pub change: f64,
}

/// Largest brute-force grid, in model evaluations.
const MAX_GRID: usize = 1 << 24;

fn quadrature_closed(model: &dyn AnalyticModel, frozen: &[usize], q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = model.dims();
    let l = model.output_len();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = model.input_space().marginals().iter().map(|m| marginal_rule(m, q)).collect();
    let outer_dims: Vec<usize> = frozen.to_vec();
    let inner_dims: Vec<usize> = (0..d).filter(|j| !frozen.contains(j)).collect();
    let outer_count = q.pow(outer_dims.len() as u32);
    let inner_count = q.pow(inner_dims.len() as u32);

    let digits = |mut idx: usize, dims: &[usize], x: &mut [f64]| -> f64 {
        let mut w = 1.0;
        for &j in dims {
            let k = idx % q;
            idx /= q;
            x[j] = rules[j].0[k];
            w *= rules[j].1[k];
        }
        w
    };

    // For each outer node: weight, conditional mean E[f | X_I] and the
    // weighted inner sum of f^2 centered later.
    let outer: Vec<(f64, Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> = (0..outer_count)
        .into_par_iter()
        .map(|o| {
            let mut x = vec![0.0; d];
            let wo = digits(o, &outer_dims, &mut x);
            let mut cond = vec![0.0; l];
            let mut values = Vec::with_capacity(inner_count);
            let mut inner_w = Vec::with_capacity(inner_count);
            let mut y = vec![0.0; l];
            for i in 0..inner_count {
                let wi = digits(i, &inner_dims, &mut x);
                model.evaluate_into(&x, &mut y)?;
                for (c, v) in cond.iter_mut().zip(&y) {
                    *c += wi * v;
                }
                values.push(y.clone());
                inner_w.push(wi);
            }
            Ok((wo, cond, values, inner_w))
        })
        .collect::<Result<_>>()?;

    let mut mean = vec![0.0; l];
    for (wo, cond, _, _) in &outer {
        for (m, c) in mean.iter_mut().zip(cond) {
            *m += wo * c;
        }
    }
    let mut closed_var = vec![0.0; l];
    let mut total_var = vec![0.0; l];
    for (wo, cond, values, inner_w) in &outer {
        for k in 0..l {
            closed_var[k] += wo * (cond[k] - mean[k]).powi(2);
        }
        for (v, wi) in values.iter().zip(inner_w) {
            for k in 0..l {
                total_var[k] += wo * wi * (v[k] - mean[k]).powi(2);
            }
        }
    }
    Ok((closed_var, total_var))
}

/// Closed Sobol' indices of `frozen` by nested tensor Gauss-Legendre
/// quadrature: inner integral over the complement, outer variance over the
/// frozen inputs. Starts at `quad_points` nodes per dimension and doubles
/// until the indices change by at most `1e-6`.
pub fn brute_force_sobol(model: &dyn AnalyticModel, frozen: &[usize], quad_points: usize) -> Result<QuadratureIndices> {
    let d = model.dims();
    if d > 3 {
        return Err(Error::Config(format!("brute-force quadrature supports d <= 3, got {d}")));
    }
    if frozen.iter().any(|&j| j >= d) {
        return Err(Error::Config("frozen index exceeds the input dimension".into()));
    }
    if quad_points == 0 {
        return Err(Error::Config("quadrature needs at least one point".into()));
    }
    let indices = |(c, v): (Vec<f64>, Vec<f64>)| -> (Vec<f64>, Vec<f64>) {
        (c.iter().zip(&v).map(|(c, v)| c / v).collect(), v)
    };
    let mut q = quad_points;
    let (mut prev, _) = indices(quadrature_closed(model, frozen, q)?);
    loop {
        let next_q = 2 * q;
        if next_q.pow(d as u32) > MAX_GRID {
            return Err(Error::NonConvergence {
                change: f64::NAN,
                points: q,
            });
        }
        let (cur, var) = indices(quadrature_closed(model, frozen, next_q)?);
        let change = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change.is_nan() {
            return Err(Error::DegenerateVariance {
                variance: var.iter().copied().fold(f64::INFINITY, f64::min),
                threshold: 0.0,
            });
        }
        if change <= 1e-6 {
            return Ok(QuadratureIndices {
                closed: cur,
                variance: var,
                points: next_q,
                change,
            });
        }
        prev = cur;
        q = next_q;
    }
}

/// Model from its command-line name:
///
/// * `campbell2d[:grid=R]` — Campbell2D on an `R x R` grid (default 64);
/// * `additive:w=W1,W2,...[:l=L][:profile=uniform|varied]` — additive model
///   on `uniform(0, 1)` inputs, scalar unless `l` is given (default profile
///   `varied`);
/// * `product[:d=D]` — product of `D` (default 2) `uniform(-1, 1)` inputs.
pub fn parse_model(spec: &str) -> Result<Box<dyn AnalyticModel>> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default().trim();
    let mut opts = std::collections::BTreeMap::new();
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("model option `{part}` is not key=value")))?;
        opts.insert(k.trim().to_string(), v.trim().to_string());
    }
    let bad = |what: &str| Error::Config(format!("invalid {what} in model `{spec}`"));
    let count = |key: &str, default: usize| -> Result<usize> {
        opts.get(key).map_or(Ok(default), |v| v.parse().map_err(|_| bad(key)))
    };
    let allow = |keys: &[&str]| -> Result<()> {
        match opts.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("unknown option `{k}` for model `{name}`"))),
            None => Ok(()),
        }
    };
    match name {
        "campbell2d" => {
            allow(&["grid"])?;
            Ok(Box::new(Campbell2d::new(GridSpec::new(-90.0, 90.0, count("grid", 64)?)?)))
        }
        "additive" => {
            allow(&["w", "l", "profile"])?;
            let weights = opts
                .get("w")
                .ok_or_else(|| bad("weights (w=...)"))?
                .split(',')
                .map(|w| w.trim().parse::<f64>().map_err(|_| bad("weight")))
                .collect::<Result<Vec<_>>>()?;
            let space = InputSpace::uniform_cube(weights.len(), 0.0, 1.0)?;
            match (opts.get("l"), opts.get("profile").map(String::as_str)) {
                (None, None) => Ok(Box::new(AdditiveModel::new(weights, space)?)),
                (None, Some(_)) => Err(bad("profile without l")),
                (Some(_), profile) => {
                    let l = count("l", 1)?;
                    match profile.unwrap_or("varied") {
                        "uniform" => Ok(Box::new(AdditiveModel::uniform_profile(weights, space, l)?)),
                        "varied" => Ok(Box::new(AdditiveModel::varied_profiles(weights, space, l)?)),
                        _ => Err(bad("profile")),
                    }
                }
            }
        }
        "product" => {
            allow(&["d"])?;
            Ok(Box::new(ProductModel::new(count("d", 2)?)?))
        }
        _ => Err(Error::Config(format!("unknown model `{name}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            // Exact up to degree 2n - 1.
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-12, "n={n} deg={deg} got {got}");
            }
        }
        let (x, _) = gauss_legendre(64);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn campbell_reference_inputs() {
        let c = Campbell2d::default();
        assert_eq!(c.output_len(), 4096);
        let lo = c.evaluate(&[-1.0; 8]).unwrap();
        let hi = c.evaluate(&[5.0; 8]).unwrap();
        let mixed = c.evaluate(&[5.0, 3.0, 1.0, -1.0, 5.0, 3.0, 1.0, -1.0]).unwrap();
        assert!(lo.iter().chain(&hi).chain(&mixed).all(|v| v.is_finite()));
        let differ = lo.iter().zip(&hi).filter(|(a, b)| a != b).count();
        assert!(differ > 2048);
        assert_ne!(mixed, lo);
        assert_ne!(mixed, hi);
        assert_eq!(c.evaluate(&[5.0; 8]).unwrap(), hi);
    }

    #[test]
    fn campbell_hand_value_at_origin_pixel() {
        // Grid point (z1, z2) = (-90, -90) is l = 0.
        let c = Campbell2d::default();
        let x = [1.0, 2.0, 3.0, 0.5, 2.0, 1.0, 0.5, 1.5];
        let (z1, z2): (f64, f64) = (-90.0, -90.0);
        let want = 1.0 * (-(0.8 * z1 + 0.2 * z2 - 20.0).powi(2) / 60.0).exp()
            + 2.5 * ((0.5 * z1 + 0.5 * z2) / 500.0).exp()
            + 2.0 * 1.0 * (-(0.4 * z1 + 0.6 * z2 - 20.0).powi(2) / 160.0).exp()
            + 2.5 * ((0.3 * z1 + 0.7 * z2) * 0.5 / 250.0).exp();
        assert!((c.evaluate(&x).unwrap()[0] - want).abs() < 1e-14);
    }

    #[test]
    fn campbell_zero_width_bumps_vanish() {
        let c = Campbell2d::default();
        let y = c.evaluate(&[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn campbell_domain_error() {
        let c = Campbell2d::default();
        assert!(matches!(c.evaluate(&[6.0; 8]), Err(Error::Domain { dim: 1, .. })));
        assert!(c.evaluate(&[0.0; 7]).is_err());
    }

    #[test]
    fn additive_exact_indices() {
        let unit = InputSpace::uniform_cube(2, 0.0, 1.0).unwrap();
        let sym = AdditiveModel::new(vec![1.0, 1.0], unit.clone()).unwrap();
        assert_eq!(sym.exact_closed(&[0]).unwrap(), vec![0.5]);
        let m = AdditiveModel::new(vec![1.0, 2.0], unit.clone()).unwrap();
        assert!((m.exact_closed(&[0]).unwrap()[0] - 0.2).abs() < 1e-15);
        assert!((m.exact_closed(&[1]).unwrap()[0] - 0.8).abs() < 1e-15);
        let w = AdditiveModel::varied_profiles(vec![0.3, -1.2], unit.clone(), 10).unwrap();
        let (a, b) = (w.exact_closed(&[0]).unwrap(), w.exact_closed(&[1]).unwrap());
        for l in 0..10 {
            assert!((a[l] + b[l] - 1.0).abs() < 1e-14);
        }
        assert!(AdditiveModel::new(vec![0.0, 0.0], unit.clone()).is_err());
        assert!(AdditiveModel::new(vec![1.0], unit).is_err());
    }

    #[test]
    fn quadrature_reproduces_additive_oracle() {
        let m = AdditiveModel::new(vec![1.0, 2.0], InputSpace::uniform_cube(2, 0.0, 1.0).unwrap()).unwrap();
        let s1 = brute_force_sobol(&m, &[0], 8).unwrap();
        let s2 = brute_force_sobol(&m, &[1], 8).unwrap();
        assert!((s1.closed[0] - 0.2).abs() < 1e-8);
        assert!((s2.closed[0] - 0.8).abs() < 1e-8);
        assert!((s1.variance[0] - 5.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_on_product() {
        let m = ProductModel::new(2).unwrap();
        let s1 = brute_force_sobol(&m, &[0], 8).unwrap();
        let s12 = brute_force_sobol(&m, &[0, 1], 8).unwrap();
        assert!(s1.closed[0].abs() < 1e-12);
        assert!((s12.closed[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_full_set_is_one_for_smooth_nonlinear_model() {
        struct Ishigami(InputSpace);
        impl AnalyticModel for Ishigami {
            fn name(&self) -> String {
                "ishigami".into()
            }
            fn input_space(&self) -> &InputSpace {
                &self.0
            }
            fn output_len(&self) -> usize {
                1
            }
            fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
                out[0] = x[0].sin() + 7.0 * x[1].sin().powi(2) + 0.1 * x[2].powi(4) * x[0].sin();
                Ok(())
            }
        }
        let m = Ishigami(InputSpace::uniform_cube(3, -PI, PI).unwrap());
        let all = brute_force_sobol(&m, &[0, 1, 2], 16).unwrap();
        assert!((all.closed[0] - 1.0).abs() < 1e-10);
        // Published first-order indices: S1 = 0.3139, S2 = 0.4424, S3 = 0.
        let s1 = brute_force_sobol(&m, &[0], 16).unwrap();
        let s2 = brute_force_sobol(&m, &[1], 16).unwrap();
        let s3 = brute_force_sobol(&m, &[2], 16).unwrap();
        assert!((s1.closed[0] - 0.3139).abs() < 1e-4, "{}", s1.closed[0]);
        assert!((s2.closed[0] - 0.4424).abs() < 1e-4, "{}", s2.closed[0]);
        assert!(s3.closed[0].abs() < 1e-10);
    }

    #[test]
    fn model_names() {
        assert_eq!(parse_model("campbell2d").unwrap().output_len(), 4096);
        assert_eq!(parse_model("campbell2d:grid=8").unwrap().output_len(), 64);
        let a = parse_model("additive:w=1,2").unwrap();
        assert_eq!((a.dims(), a.output_len()), (2, 1));
        assert_eq!(parse_model("additive:w=1,2,3:l=10:profile=uniform").unwrap().output_len(), 10);
        assert_eq!(parse_model("product:d=3").unwrap().dims(), 3);
        for bad in ["nope", "additive", "additive:w=1,x", "campbell2d:size=3", "product:d", "additive:w=0,0"] {
            assert!(parse_model(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn quadrature_rejects_large_models() {
        let c = Campbell2d::default();
        assert!(brute_force_sobol(&c, &[0], 8).is_err());
    }
}
