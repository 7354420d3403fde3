//! Checks a built slice code against every bound of its construction.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::dist::{log_k, log_k_e, FiniteDistribution};
use crate::encoder::{expected_length, induced_distribution, ratio_f64, SliceCode, Variant};
use crate::error::{Error, Result};
use crate::measures::{entropy, kl_divergence, variational_distance};

/// Slack on comparisons between computed quantities and their bounds.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub variant: Variant,
    pub induced: FiniteDistribution,
    pub expected_length: f64,
    pub length_bound: f64,
    pub length_ok: bool,
    pub per_atom_dev_ok: bool,
    /// `γ₀`, mass of the target outside the threshold set.
    pub tail_mass: f64,
    /// `γ₀ <= γ` (required by the divergence bounds).
    pub tail_ok: bool,
    pub distance_to_v: f64,
    pub distance_bound: f64,
    pub distance_ok: bool,
    /// `d(P_X, P_X̃)` and its bound, applicable when `d(P_X, P_V) <= δ + γ`.
    pub distance_to_target: f64,
    pub target_distance_bound: f64,
    pub target_premise: bool,
    pub target_distance_ok: bool,
    pub divergence_to_target: Option<f64>,
    pub divergence_bound: Option<f64>,
    /// `D(V‖X) <= δ + γ`.
    pub divergence_premise: Option<bool>,
    pub divergence_ok: Option<bool>,
    pub pointwise_ratio_ok: Option<bool>,
    pub pass: bool,
}

fn leq(x: f64, bound: f64) -> bool {
    x <= bound + BOUND_TOL * bound.abs().max(1.0)
}

/// `d(P_X̃, P_V) <= ½K^{−s} + γ`.
pub fn distance_bound(base: u32, s: f64, gamma: f64) -> f64 {
    0.5 * f64::from(base).powf(-s) + gamma
}

/// `(1 + K^{−s})(H(V) + s + 1)`, times `1 + 2γ` for the divergence code.
pub fn length_bound(variant: Variant, base: u32, s: f64, gamma: f64, h_v: f64) -> f64 {
    let b = (1.0 + f64::from(base).powf(-s)) * (h_v + s + 1.0);
    match variant {
        Variant::Variational => b,
        Variant::Divergence => (1.0 + 2.0 * gamma) * b,
    }
}

/// `δ + γ(2δ + 5)`.
pub fn divergence_bound(delta: f64, gamma: f64) -> f64 {
    delta + gamma * (2.0 * delta + 5.0)
}

/// The explicit finite-`s` estimate of `D(X̃‖X)` for a target with
/// `D(V‖X) <= δ + γ`:
/// `2γ log_K e + log_K(1 + K^{−s}) + (1 + 2γ)(1 + K^{−s})(δ + γ)`.
pub fn divergence_estimate(delta: f64, gamma: f64, base: u32, s: f64) -> f64 {
    let t = f64::from(base).powf(-s);
    2.0 * gamma * log_k_e(base)
        + log_k(1.0 + t, base)
        + (1.0 + 2.0 * gamma) * (1.0 + t) * (delta + gamma)
}

/// Smallest offset `s` at which [`divergence_estimate`] falls under
/// [`divergence_bound`], or `None` if no offset does.
pub fn divergence_offset(delta: f64, gamma: f64, base: u32) -> Option<f64> {
    let target = divergence_bound(delta, gamma);
    let f = |s: f64| divergence_estimate(delta, gamma, base, s);
    let (mut lo, mut hi) = (0.0, 256.0);
    if f(hi) > target {
        return None;
    }
    if f(lo) <= target {
        return Some(0.0);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn check_universe(v: &FiniteDistribution, x: &FiniteDistribution) -> Result<()> {
    v.check_base(x)?;
    for a in v.atoms().iter().filter(|a| a.p > 0.0) {
        if x.prob(&a.label).is_none() {
            return Err(Error::UniverseMismatch(format!(
                "label {:?} of the code target is missing from the source",
                a.label
            )));
        }
    }
    Ok(())
}

fn per_atom_deviation_ok(code: &SliceCode) -> bool {
    let scale = match code.variant {
        Variant::Variational => 1.0,
        Variant::Divergence => 1.0 / (1.0 - code.gamma0),
    };
    code.slices.values().all(|s| {
        let total = BigUint::from(code.base()).pow(s.m);
        let unit = ratio_f64(&BigUint::from(1u32), &total);
        let bound = s.mass * unit * scale;
        s.allocations.iter().all(|a| {
            let got = ratio_f64(&a.cells(), &total) * s.pmf;
            let want = code.target.prob(&a.label).unwrap_or(0.0) * scale;
            (got - want).abs() <= bound + 1e-12 * want.max(bound)
        })
    })
}

/// Evaluates the code against the source `x` it was built for, at smoothing
/// radius `delta` and slack `gamma`.
pub fn verify_code(
    code: &SliceCode,
    x: &FiniteDistribution,
    delta: f64,
    gamma: f64,
) -> Result<VerificationReport> {
    let v = &code.target;
    check_universe(v, x)?;
    let base = code.base();
    let s = f64::from(code.n) * gamma;
    let induced = induced_distribution(code)?;
    let el = expected_length(code);
    let lb = length_bound(code.variant, base, s, gamma, entropy(v));
    let length_ok = leq(el, lb);
    let per_atom_dev_ok = per_atom_deviation_ok(code);

    let d_v = variational_distance(&induced, v)?;
    let d_bound = distance_bound(base, s, gamma);
    let d_x = variational_distance(x, &induced)?;
    let t_bound = delta + 2.0 * gamma + 0.5 * f64::from(base).powf(-s);
    let target_premise = leq(variational_distance(x, v)?, delta + gamma);
    let tail_ok = leq(code.gamma0, gamma);

    let mut report = VerificationReport {
        variant: code.variant,
        induced: induced.clone(),
        expected_length: el,
        length_bound: lb,
        length_ok,
        per_atom_dev_ok,
        tail_mass: code.gamma0,
        tail_ok,
        distance_to_v: d_v,
        distance_bound: d_bound,
        distance_ok: leq(d_v, d_bound),
        distance_to_target: d_x,
        target_distance_bound: t_bound,
        target_premise,
        target_distance_ok: !target_premise || leq(d_x, t_bound),
        divergence_to_target: None,
        divergence_bound: None,
        divergence_premise: None,
        divergence_ok: None,
        pointwise_ratio_ok: None,
        pass: false,
    };

    match code.variant {
        Variant::Variational => {
            report.pass = report.length_ok
                && report.per_atom_dev_ok
                && report.distance_ok
                && report.target_distance_ok;
        }
        Variant::Divergence => {
            let factor = (1.0 + 2.0 * gamma) * (1.0 + f64::from(base).powf(-s));
            let ratio_ok = induced
                .align(v)?
                .iter()
                .all(|&(_, xt, pv)| xt <= factor * pv + 1e-12 * xt);
            let div = kl_divergence(&induced, x)?;
            let premise = leq(kl_divergence(v, x)?, delta + gamma);
            let bound = divergence_bound(delta, gamma);
            let div_ok = !premise || leq(div, bound);
            report.divergence_to_target = Some(div);
            report.divergence_bound = Some(bound);
            report.divergence_premise = Some(premise);
            report.divergence_ok = Some(div_ok);
            report.pointwise_ratio_ok = Some(ratio_ok);
            report.pass =
                report.length_ok && report.per_atom_dev_ok && report.tail_ok && ratio_ok && div_ok;
        }
    }
    Ok(report)
}
