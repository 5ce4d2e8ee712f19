//! Exact counts of damped and undamped words over the alphabet {1, 2}.
//!
//! A word of length `N0` is damped when at least `ceil(α·N0)` of its letters are 1.
//! Long words of length `8·N0` split into eight blocks; `x_count` counts those whose
//! blocks are all undamped.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest block length handled by the binomial sums.
pub const MAX_N0: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WordParameters {
    pub h: f64,
    pub rho: f64,
    pub alpha: f64,
    pub n0: u64,
    pub n1: u64,
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl WordParameters {
    /// `N0 = ceil((ρ/4)·ln(1/h))`, at least 1.
    pub fn new(h: f64, rho: f64, alpha: f64) -> Result<Self> {
        open_unit("h", h)?;
        open_unit("rho", rho)?;
        open_unit("alpha", alpha)?;
        let raw = (rho / 4.0 * (1.0 / h).ln()).ceil();
        if raw > MAX_N0 as f64 {
            return Err(Error::Argument(format!(
                "N0 = {raw} exceeds the cap {MAX_N0}"
            )));
        }
        let n0 = (raw as u64).max(1);
        Ok(Self {
            h,
            rho,
            alpha,
            n0,
            n1: 4 * n0,
        })
    }

    /// Parameters with an explicit block length.
    pub fn with_n0(n0: u64, alpha: f64) -> Result<Self> {
        open_unit("alpha", alpha)?;
        if n0 == 0 || n0 > MAX_N0 {
            return Err(Error::Argument(format!("N0 = {n0} outside 1..={MAX_N0}")));
        }
        Ok(Self {
            h: f64::NAN,
            rho: f64::NAN,
            alpha,
            n0,
            n1: 4 * n0,
        })
    }

    /// Minimum number of 1-letters in a damped word.
    pub fn threshold(&self) -> u64 {
        ((self.alpha * self.n0 as f64).ceil() as u64).min(self.n0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WordCounts {
    pub total: BigUint,
    pub z_count: BigUint,
    pub q_count: BigUint,
    pub x_count: BigUint,
    pub y_count: BigUint,
}

/// Row `N` of Pascal's triangle.
fn binomial_row(n: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * BigUint::from(n - k) / BigUint::from(k + 1);
        row.push(c.clone());
    }
    row
}

pub fn count_words(p: &WordParameters) -> Result<WordCounts> {
    if p.n0 == 0 || p.n0 > MAX_N0 {
        return Err(Error::Argument(format!("N0 = {} outside 1..={MAX_N0}", p.n0)));
    }
    let row = binomial_row(p.n0);
    let t = p.threshold() as usize;
    let z_count: BigUint = row[t..].iter().sum();
    let total = BigUint::one() << p.n0;
    let q_count = &total - &z_count;
    let x_count = q_count.pow(8);
    let y_count = (BigUint::one() << (8 * p.n0)) - &x_count;
    Ok(WordCounts {
        total,
        z_count,
        q_count,
        x_count,
        y_count,
    })
}

/// Natural logarithm of a big integer (−∞ for zero).
pub fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits < 1000 {
        x.to_f64().unwrap_or(f64::INFINITY).ln()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub h: f64,
    pub n0: u64,
    pub z_count: String,
    pub q_count: String,
    pub x_count: String,
    /// `x_count · h^{4√α}`.
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub rho: f64,
    pub alpha: f64,
    pub rows: Vec<BoundRow>,
    pub first: f64,
    pub max: f64,
    /// `max / first`, the empirical constant relative to the coarsest grid point.
    pub ratio_to_first: f64,
}

/// Evaluates `x_count(h)·h^{4√α}` over a grid of `h` values.
pub fn verify_count_bound(h_grid: &[f64], rho: f64, alpha: f64) -> Result<BoundReport> {
    if h_grid.is_empty() {
        return Err(Error::Argument("empty h grid".into()));
    }
    let rows: Vec<BoundRow> = h_grid
        .par_iter()
        .map(|&h| {
            let p = WordParameters::new(h, rho, alpha)?;
            let c = count_words(&p)?;
            let scaled = (big_ln(&c.x_count) + 4.0 * alpha.sqrt() * h.ln()).exp();
            Ok(BoundRow {
                h,
                n0: p.n0,
                z_count: c.z_count.to_string(),
                q_count: c.q_count.to_string(),
                x_count: c.x_count.to_string(),
                scaled,
            })
        })
        .collect::<Result<_>>()?;
    let first = rows[0].scaled;
    let max = rows.iter().map(|r| r.scaled).fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundReport {
        rho,
        alpha,
        first,
        max,
        ratio_to_first: max / first,
        rows,
    })
}

/// The dyadic grid `{2^{−k} : k = kmin..=kmax}`.
pub fn dyadic_grid(kmin: u32, kmax: u32) -> Result<Vec<f64>> {
    if kmin == 0 || kmin > kmax || kmax > 1000 {
        return Err(Error::Argument(format!("invalid exponent range {kmin}..={kmax}")));
    }
    Ok((kmin..=kmax).map(|k| 2f64.powi(-(k as i32))).collect())
}
