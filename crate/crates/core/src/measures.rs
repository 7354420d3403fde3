//! Entropies, distances and the per-blocklength spectral quantile.

use serde::{Deserialize, Serialize};

use crate::dist::{log_k, FiniteDistribution};
use crate::error::{Error, Result};
use crate::grouped::Spectrum;
use crate::CUM_TOL;

/// Shannon entropy in base-`K` units.
pub fn entropy<S: Spectrum + ?Sized>(d: &S) -> f64 {
    d.levels().iter().map(|l| l.plogp()).sum()
}

/// Variance of the self-information `log_K 1/p(X)`, in base-`K` units squared.
pub fn varentropy<S: Spectrum + ?Sized>(d: &S) -> f64 {
    let levels = d.levels();
    let h: f64 = levels.iter().map(|l| l.plogp()).sum();
    levels
        .iter()
        .map(|l| {
            let dev = l.info - h;
            l.mass * dev * dev
        })
        .sum()
}

pub fn renyi_entropy(d: &FiniteDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            expected: "alpha > 0, alpha != 1",
        });
    }
    let s: f64 = d
        .atoms()
        .iter()
        .filter(|a| a.p > 0.0)
        .map(|a| a.p.powf(alpha))
        .sum();
    Ok(log_k(s, d.base()) / (1.0 - alpha))
}

/// `½ Σ |p − q|` over the union of labels.
pub fn variational_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    let joint = p.align(q)?;
    Ok(tv_aligned(joint.iter().map(|&(_, a, b)| (a, b))))
}

pub(crate) fn tv_aligned(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    0.5 * pairs.map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `D(p‖q)` in base-`K` units; `+inf` when `p` charges an atom `q` does not.
pub fn kl_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    let joint = p.align(q)?;
    Ok(kl_aligned(joint.iter().map(|&(_, a, b)| (a, b)), p.base()))
}

pub(crate) fn kl_aligned(pairs: impl Iterator<Item = (f64, f64)>, base: u32) -> f64 {
    let mut acc = 0.0;
    for (a, b) in pairs {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        acc += a * log_k(a / b, base);
    }
    acc
}

/// The finite-`n` information-spectrum quantile: the smallest `a` with
/// `Pr[log_K 1/p(X) > a] <= delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralQuantile {
    pub delta: f64,
    pub value: f64,
}

pub fn info_quantile<S: Spectrum + ?Sized>(d: &S, delta: f64) -> Result<SpectralQuantile> {
    check_delta(delta)?;
    // Levels come in ascending information order.
    let levels = d.levels();
    let mut tail = vec![0.0; levels.len() + 1];
    for i in (0..levels.len()).rev() {
        tail[i] = tail[i + 1] + levels[i].mass;
    }
    let mut i = 0;
    while i < levels.len() {
        let mut j = i + 1;
        while j < levels.len() && levels[j].info == levels[i].info {
            j += 1;
        }
        // mass strictly above levels[i].info
        if tail[j] <= delta + CUM_TOL {
            return Ok(SpectralQuantile {
                delta,
                value: levels[i].info.max(0.0),
            });
        }
        i = j;
    }
    let value = levels.last().map(|l| l.info.max(0.0)).unwrap_or(0.0);
    Ok(SpectralQuantile { delta, value })
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "0 <= delta < 1",
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouped::iid_power;

    fn fd(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_probs(2, p).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&fd(&[0.5, 0.5])), 1.0);
        assert_eq!(entropy(&fd(&[1.0])), 0.0);
        assert_eq!(entropy(&fd(&[0.5, 0.25, 0.25])), 1.5);
        assert_eq!(entropy(&fd(&[0.5, 0.5, 0.0])), 1.0);
    }

    #[test]
    fn renyi_examples() {
        let u4 = fd(&[0.25; 4]);
        for alpha in [0.3, 0.999, 2.0, 7.5] {
            assert!((renyi_entropy(&u4, alpha).unwrap() - 2.0).abs() < 1e-12);
        }
        assert!((renyi_entropy(&fd(&[0.5, 0.5]), 2.0).unwrap() - 1.0).abs() < 1e-15);
        let d = fd(&[0.6, 0.3, 0.1]);
        assert!((renyi_entropy(&d, 0.999).unwrap() - entropy(&d)).abs() < 1e-2);
        assert!(renyi_entropy(&d, 1.0).is_err());
        assert!(renyi_entropy(&d, 0.0).is_err());
        assert!(renyi_entropy(&d, -1.0).is_err());
    }

    #[test]
    fn distance_examples() {
        let p = fd(&[0.5, 0.5]);
        assert_eq!(variational_distance(&p, &p).unwrap(), 0.0);
        let a = FiniteDistribution::from_pairs(2, [("a", 0.3), ("b", 0.7)]).unwrap();
        let b = FiniteDistribution::from_pairs(2, [("c", 1.0)]).unwrap();
        assert_eq!(variational_distance(&a, &b).unwrap(), 1.0);
        let q = fd(&[0.75, 0.25]);
        assert_eq!(variational_distance(&p, &q).unwrap(), 0.25);
    }

    #[test]
    fn base_mismatch_is_an_error() {
        let a = FiniteDistribution::from_probs(2, &[1.0]).unwrap();
        let b = FiniteDistribution::from_probs(3, &[1.0]).unwrap();
        assert!(matches!(
            variational_distance(&a, &b),
            Err(Error::BaseMismatch { .. })
        ));
        assert!(kl_divergence(&a, &b).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = fd(&[0.75, 0.25]);
        let q = fd(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let d = kl_divergence(&p, &q).unwrap();
        assert!((d - 0.188_721_875_540_867).abs() < 1e-12);
        let r = FiniteDistribution::from_pairs(2, [("x0", 1.0)]).unwrap();
        assert_eq!(kl_divergence(&p, &r).unwrap(), f64::INFINITY);
        let back = kl_divergence(&r, &p).unwrap();
        assert!((back - (4.0f64 / 3.0).log2()).abs() < 1e-15);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(info_quantile(&fd(&[1.0]), 0.3).unwrap().value, 0.0);
        let d = fd(&[0.5, 0.25, 0.25]);
        assert_eq!(info_quantile(&d, 0.0).unwrap().value, 2.0);
        assert_eq!(info_quantile(&d, 0.5).unwrap().value, 1.0);
        assert_eq!(info_quantile(&d, 0.49).unwrap().value, 2.0);
        assert!(info_quantile(&d, 1.0).is_err());
    }

    #[test]
    fn grouped_entropy_scales_with_n() {
        let b = fd(&[0.2, 0.8]);
        let h1 = entropy(&b);
        for n in [1, 2, 10, 100] {
            let g = iid_power(&b, n).unwrap();
            assert!((entropy(&g) - f64::from(n) * h1).abs() < 1e-6);
        }
    }

    #[test]
    fn varentropy_of_bernoulli() {
        assert_eq!(varentropy(&fd(&[0.5, 0.5])), 0.0);
        assert!((varentropy(&fd(&[0.2, 0.8])) - 0.64).abs() < 1e-12);
    }
}
