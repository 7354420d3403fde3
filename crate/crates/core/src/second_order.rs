//! Finite-`n` second-order terms of the variational smooth entropy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::FiniteDistribution;
use crate::error::{Error, Result};
use crate::gaussian::q_inv;
use crate::grouped::{iid_power_with_cap, DEFAULT_TYPECLASS_CAP};
use crate::measures::{check_delta, entropy, varentropy};
use crate::smooth::h_delta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderPoint {
    pub n: u32,
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderSeries {
    pub delta: f64,
    pub rate: f64,
    pub points: Vec<SecondOrderPoint>,
    pub gaussian_limit: f64,
    pub varentropy: f64,
    pub q_inv: f64,
}

/// `−√(V/2π) · exp(−Q⁻¹(δ)²/2)`.
pub fn gaussian_limit(varentropy: f64, delta: f64) -> f64 {
    if varentropy == 0.0 {
        return 0.0;
    }
    let q = q_inv(delta);
    -(varentropy / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * q * q).exp()
}

/// `(H_[δ](X^n) − nR)/√n` for each `n`, evaluated in parallel.
pub fn second_order_series(
    base: &FiniteDistribution,
    delta: f64,
    rate: f64,
    n_list: &[u32],
) -> Result<SecondOrderSeries> {
    second_order_series_with_cap(base, delta, rate, n_list, DEFAULT_TYPECLASS_CAP)
}

pub fn second_order_series_with_cap(
    base: &FiniteDistribution,
    delta: f64,
    rate: f64,
    n_list: &[u32],
    cap: u64,
) -> Result<SecondOrderSeries> {
    check_delta(delta)?;
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::OutOfRange {
            name: "n_list",
            value: f64::NAN,
            expected: "strictly increasing blocklengths",
        });
    }
    let points = n_list
        .par_iter()
        .map(|&n| {
            let g = iid_power_with_cap(base, n, cap)?;
            let h = h_delta(&g, delta)?.value;
            let nf = f64::from(n);
            Ok(SecondOrderPoint {
                n,
                term: (h - nf * rate) / nf.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let v = varentropy(base);
    Ok(SecondOrderSeries {
        delta,
        rate,
        points,
        gaussian_limit: gaussian_limit(v, delta),
        varentropy: v,
        q_inv: q_inv(delta),
    })
}

/// The first-order rate `(1 − δ) H(X)`.
pub fn first_order_rate(base: &FiniteDistribution, delta: f64) -> f64 {
    (1.0 - delta) * entropy(base)
}
