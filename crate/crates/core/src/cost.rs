//! Operation counts of the two sensitivity-map routes.
//!
//! Additions and multiplications cost one unit each. For `N` pick-freeze
//! pairs, `m` basis components and `L` output dimensions:
//!
//! ```text
//! dimension-wise:  4 (m + 2) N L
//! basis-derived:   2 m (3m + 1) N + 3 m (m + 1) L
//! ```
//!
//! The dimension-wise count is decoding (`4mN` per dimension) plus the three
//! scalar sums (`8N` per dimension). The basis-derived count is the three
//! `m x m` accumulations over `N` rows plus two symmetric quadratic forms of
//! `3m(m+1)/2` operations per dimension; the `3m^2` matrix subtractions are
//! neglected. Their ratio always exceeds `H(2N, L) / (3m)`, with `H` the
//! harmonic mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub n: u64,
    pub m: u64,
    pub l: u64,
}

impl CostModel {
    pub fn new(n: u64, m: u64, l: u64) -> Result<Self> {
        if n == 0 || m == 0 || l == 0 {
            return Err(Error::Config(format!("cost model needs N, m, L >= 1, got ({n}, {m}, {l})")));
        }
        Ok(Self { n, m, l })
    }
}

fn mul(a: u64, b: u64) -> Result<u64> {
    a.checked_mul(b).ok_or(Error::Overflow)
}

fn add(a: u64, b: u64) -> Result<u64> {
    a.checked_add(b).ok_or(Error::Overflow)
}

pub fn cost_dw(c: &CostModel) -> Result<u64> {
    mul(mul(mul(4, add(c.m, 2)?)?, c.n)?, c.l)
}

pub fn cost_bd(c: &CostModel) -> Result<u64> {
    let accumulate = mul(mul(mul(2, c.m)?, add(mul(3, c.m)?, 1)?)?, c.n)?;
    let project = mul(mul(mul(3, c.m)?, add(c.m, 1)?)?, c.l)?;
    add(accumulate, project)
}

pub fn cost_ratio(c: &CostModel) -> Result<f64> {
    Ok(cost_dw(c)? as f64 / cost_bd(c)? as f64)
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// `H(2N, L) / (3m)`.
pub fn ratio_lower_bound(c: &CostModel) -> f64 {
    harmonic_mean(2.0 * c.n as f64, c.l as f64) / (3.0 * c.m as f64)
}

/// JSON cost report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: u64,
    pub m: u64,
    pub l: u64,
    pub cost_dw: u64,
    pub cost_bd: u64,
    pub ratio: f64,
    pub bound: f64,
}

impl CostReport {
    pub fn new(c: &CostModel) -> Result<Self> {
        Ok(Self {
            n: c.n,
            m: c.m,
            l: c.l,
            cost_dw: cost_dw(c)?,
            cost_bd: cost_bd(c)?,
            ratio: cost_ratio(c)?,
            bound: ratio_lower_bound(c),
        })
    }
}
