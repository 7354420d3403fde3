//! I.i.d. powers represented by type classes.
//!
//! Every sequence in a type class has the same probability, so `X^n` is
//! stored as a list of `(per-sequence probability, multiplicity)` levels.
//! Probabilities are carried in the log domain because `p^n` underflows long
//! before `n = 10^4`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::dist::FiniteDistribution;
use crate::error::{Error, Result};
use crate::MASS_TOL;

/// Default cap on the number of type classes enumerated by [`iid_power`].
pub const DEFAULT_TYPECLASS_CAP: u64 = 2_000_000;

/// Natural log of a big integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap_or(u64::MAX) as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// One probability level of a spectrum: `count` atoms, each of probability
/// `p` (which may underflow to zero; `ln_p` and `info` stay exact).
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub ln_p: f64,
    pub p: f64,
    /// `log_K(1/p)`.
    pub info: f64,
    pub count: BigUint,
    /// `count * p`.
    pub mass: f64,
}

impl Level {
    pub fn new(ln_p: f64, p: f64, count: BigUint, base: u32) -> Self {
        let info = -ln_p / f64::from(base).ln();
        let info = if base == 2 && p >= f64::MIN_POSITIVE {
            -p.log2()
        } else {
            info
        };
        let mass = level_mass(ln_p, p, &count);
        Level {
            ln_p,
            p,
            info,
            count,
            mass,
        }
    }

    pub fn single(p: f64, base: u32) -> Self {
        Level::new(p.ln(), p, BigUint::one(), base)
    }

    /// Partial entropy contribution `count * p * log_K(1/p)`.
    pub fn plogp(&self) -> f64 {
        if self.mass == 0.0 {
            0.0
        } else {
            self.mass * self.info
        }
    }
}

/// `k * p` for a count `k`, accurate when either factor is out of `f64` range.
pub(crate) fn level_mass(ln_p: f64, p: f64, count: &BigUint) -> f64 {
    if count.is_zero() {
        return 0.0;
    }
    if count.bits() <= 53 && p >= f64::MIN_POSITIVE {
        return count.to_u64().unwrap_or(0) as f64 * p;
    }
    (ln_biguint(count) + ln_p).exp()
}

/// Anything whose information spectrum can be listed as levels.
pub trait Spectrum {
    fn log_base(&self) -> u32;

    /// Positive-probability levels in descending probability order.
    fn levels(&self) -> Vec<Level>;
}

impl Spectrum for FiniteDistribution {
    fn log_base(&self) -> u32 {
        self.base()
    }

    fn levels(&self) -> Vec<Level> {
        self.atoms()
            .iter()
            .filter(|a| a.p > 0.0)
            .map(|a| Level::single(a.p, self.base()))
            .collect()
    }
}

/// `X^n` for i.i.d. `X`, one level per distinct sequence probability.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDistribution {
    base: FiniteDistribution,
    n: u32,
    groups: Vec<Level>,
}

impl GroupedDistribution {
    pub fn base(&self) -> &FiniteDistribution {
        &self.base
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn groups(&self) -> &[Level] {
        &self.groups
    }

    pub fn total_mass(&self) -> f64 {
        self.groups.iter().map(|g| g.mass).sum()
    }
}

impl Spectrum for GroupedDistribution {
    fn log_base(&self) -> u32 {
        self.base.base()
    }

    fn levels(&self) -> Vec<Level> {
        self.groups.clone()
    }
}

/// Number of type classes of a `k`-letter alphabet at blocklength `n`,
/// saturating at `u128::MAX`.
pub fn type_class_count(k: usize, n: u32) -> u128 {
    if k == 0 {
        return 0;
    }
    // C(n + k - 1, k - 1)
    let r = (k - 1) as u128;
    let mut acc: u128 = 1;
    for i in 1..=r {
        let num = n as u128 + i;
        acc = match acc.checked_mul(num) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

pub fn iid_power(base: &FiniteDistribution, n: u32) -> Result<GroupedDistribution> {
    iid_power_with_cap(base, n, DEFAULT_TYPECLASS_CAP)
}

pub fn iid_power_with_cap(
    base: &FiniteDistribution,
    n: u32,
    cap: u64,
) -> Result<GroupedDistribution> {
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "n",
            value: 0.0,
            expected: "n >= 1",
        });
    }
    let probs: Vec<f64> = base
        .atoms()
        .iter()
        .map(|a| a.p)
        .filter(|&p| p > 0.0)
        .collect();
    let classes = type_class_count(probs.len(), n);
    if classes > cap as u128 {
        return Err(Error::TypeClassCap {
            count: classes,
            cap,
        });
    }

    let ln_probs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut raw: Vec<(f64, f64, BigUint)> = Vec::with_capacity(classes as usize);
    let mut composition = vec![0u32; probs.len()];
    enumerate(
        &probs,
        &ln_probs,
        0,
        n,
        &BigUint::one(),
        &mut composition,
        &mut raw,
    );

    raw.sort_by(|a, b| b.0.total_cmp(&a.0));
    let k = base.base();
    let mut groups: Vec<Level> = Vec::with_capacity(raw.len());
    let mut pending: Option<(f64, f64, BigUint)> = None;
    for (ln_p, p, count) in raw {
        match pending.as_mut() {
            Some((lp, _, c)) if (*lp - ln_p).abs() <= 1e-12 * lp.abs().max(1.0) => {
                *c += count;
            }
            _ => {
                if let Some((lp, pp, c)) = pending.take() {
                    groups.push(Level::new(lp, pp, c, k));
                }
                pending = Some((ln_p, p, count));
            }
        }
    }
    if let Some((lp, pp, c)) = pending {
        groups.push(Level::new(lp, pp, c, k));
    }

    let out = GroupedDistribution {
        base: base.clone(),
        n,
        groups,
    };
    let total = out.total_mass();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::NotNormalized { sum: total });
    }
    Ok(out)
}

fn enumerate(
    probs: &[f64],
    ln_probs: &[f64],
    idx: usize,
    remaining: u32,
    coeff: &BigUint,
    composition: &mut [u32],
    out: &mut Vec<(f64, f64, BigUint)>,
) {
    if idx + 1 == probs.len() {
        composition[idx] = remaining;
        let ln_p: f64 = composition
            .iter()
            .zip(ln_probs)
            .map(|(&c, lp)| f64::from(c) * lp)
            .sum();
        let direct: f64 = composition
            .iter()
            .zip(probs)
            .map(|(&c, p)| p.powi(c as i32))
            .product();
        let p = if direct >= 1e-290 { direct } else { ln_p.exp() };
        out.push((ln_p, p, coeff.clone()));
        return;
    }
    // C(remaining, t), updated incrementally
    let mut binom = BigUint::one();
    for t in 0..=remaining {
        if t > 0 {
            binom *= remaining - t + 1;
            binom /= t;
        }
        composition[idx] = t;
        let next = coeff * &binom;
        enumerate(
            probs,
            ln_probs,
            idx + 1,
            remaining - t,
            &next,
            composition,
            out,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_coin_cube_is_one_group() {
        let b = FiniteDistribution::from_probs(2, &[0.5, 0.5]).unwrap();
        let g = iid_power(&b, 3).unwrap();
        assert_eq!(g.groups().len(), 1);
        assert_eq!(g.groups()[0].p, 0.125);
        assert_eq!(g.groups()[0].count, BigUint::from(8u32));
    }

    #[test]
    fn bernoulli_square_enumerates_classes() {
        let b = FiniteDistribution::from_probs(2, &[0.2, 0.8]).unwrap();
        let g = iid_power(&b, 2).unwrap();
        let got: Vec<(f64, u32)> = g
            .groups()
            .iter()
            .map(|l| (l.p, l.count.to_u32().unwrap()))
            .collect();
        let want = [(0.64, 1), (0.16, 2), (0.04, 1)];
        assert_eq!(got.len(), 3);
        for ((p, c), (wp, wc)) in got.iter().zip(want) {
            assert!((p - wp).abs() < 1e-15);
            assert_eq!(*c, wc);
        }
    }

    #[test]
    fn n_one_mirrors_base() {
        let b = FiniteDistribution::from_probs(3, &[0.5, 0.3, 0.2]).unwrap();
        let g = iid_power(&b, 1).unwrap();
        let ps: Vec<f64> = g.groups().iter().map(|l| l.p).collect();
        assert_eq!(ps, vec![0.5, 0.3, 0.2]);
        assert!(g.groups().iter().all(|l| l.count == BigUint::one()));
    }

    #[test]
    fn cap_is_enforced() {
        let b = FiniteDistribution::from_probs(2, &[0.2, 0.3, 0.5]).unwrap();
        let err = iid_power_with_cap(&b, 100, 1000).unwrap_err();
        assert!(matches!(err, Error::TypeClassCap { count: 5151, .. }));
    }

    #[test]
    fn large_n_keeps_unit_mass() {
        let b = FiniteDistribution::from_probs(2, &[0.2, 0.8]).unwrap();
        let g = iid_power(&b, 10_000).unwrap();
        assert_eq!(g.groups().len(), 10_001);
        assert!((g.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ln_biguint_matches_float_for_huge_values() {
        let x = BigUint::from(3u32).pow(1000);
        let want = 1000.0 * 3f64.ln();
        assert!((ln_biguint(&x) - want).abs() < 1e-9 * want);
    }

    #[test]
    fn type_class_count_small_cases() {
        assert_eq!(type_class_count(2, 10), 11);
        assert_eq!(type_class_count(3, 2), 6);
        assert_eq!(type_class_count(1, 7), 1);
    }
}
