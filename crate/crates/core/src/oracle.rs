//! Brute-force oracles: subset enumeration for `G_[δ]` and simplex grid
//! search for the ball-based smooth entropies on tiny supports.

use crate::dist::{plogp, Atom, FiniteDistribution};
use crate::error::{Error, Result};
use crate::measures::{check_delta, kl_aligned, tv_aligned};
use crate::smooth::{Method, SmoothEntropyResult, Witness};
use crate::CUM_TOL;

pub const SUBSET_ORACLE_LIMIT: usize = 20;
pub const GRID_ORACLE_LIMIT: usize = 3;

/// Exact `G_[δ]` by enumerating every subset of the support.
pub fn g_delta_subset_oracle(d: &FiniteDistribution, delta: f64) -> Result<SmoothEntropyResult> {
    check_delta(delta)?;
    if d.len() > SUBSET_ORACLE_LIMIT {
        return Err(Error::SupportTooLarge {
            what: "subset oracle",
            size: d.len(),
            limit: SUBSET_ORACLE_LIMIT,
        });
    }
    let base = d.base();
    let atoms = d.atoms();
    let k = atoms.len();
    let need = 1.0 - delta - CUM_TOL;
    let mut best: Option<(f64, f64, u32)> = None;
    for mask in 0u32..(1u32 << k) {
        let mut mass = 0.0;
        let mut value = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if mask & (1 << i) != 0 {
                mass += a.p;
                value += plogp(a.p, base);
            }
        }
        if mass < need {
            continue;
        }
        if best.is_none_or(|(v, _, _)| value < v) {
            best = Some((value, mass, mask));
        }
    }
    let (value, mass, mask) = best.expect("the full support always qualifies");
    let labels = atoms
        .iter()
        .enumerate()
        .filter(|(i, a)| mask & (1 << i) != 0 && a.p > 0.0)
        .map(|(_, a)| a.label.clone())
        .collect();
    Ok(SmoothEntropyResult {
        delta,
        value,
        witness: Witness::Subset(labels),
        achieved_radius: (1.0 - mass).max(0.0),
        method: Method::SubsetOracle,
    })
}

/// A grid minimiser's answer: probabilities in the order of the labels the
/// search was run over, and the entropy there.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub probs: Vec<f64>,
    pub value: f64,
}

fn entropy_of(v: &[f64], base: u32) -> f64 {
    v.iter().map(|&p| plogp(p, base)).sum()
}

fn check_step(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::OutOfRange {
            name: "grid_step",
            value: step,
            expected: "0 < grid_step <= 0.5",
        });
    }
    Ok((1.0 / step).round() as usize)
}

/// Visits every lattice point `c / n` of the `k`-simplex whose coordinates
/// lie in the box `lo..=hi` (per coordinate, ignoring the last), in
/// lexicographic order.
fn for_each_lattice(k: usize, n: usize, lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize])) {
    let mut c = vec![0usize; k];
    fn rec(
        idx: usize,
        left: usize,
        k: usize,
        lo: &[usize],
        hi: &[usize],
        c: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if idx + 1 == k {
            c[idx] = left;
            f(c);
            return;
        }
        let top = hi[idx].min(left);
        if lo[idx] > top {
            return;
        }
        for t in lo[idx]..=top {
            c[idx] = t;
            rec(idx + 1, left - t, k, lo, hi, c, f);
        }
    }
    rec(0, n, k, lo, hi, &mut c, &mut f);
}

/// Minimum entropy over simplex grid points accepted by `feasible`, followed
/// by one refinement pass at a tenth of the step within one coarse step of
/// the best point. `fallback` (always feasible) competes with the grid so
/// the search never comes back empty. Ties go to the lexicographically
/// smallest coordinates.
pub fn grid_minimize(
    k: usize,
    base: u32,
    step: f64,
    fallback: &[f64],
    feasible: impl Fn(&[f64]) -> bool,
) -> Result<GridPoint> {
    let n = check_step(step)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut buf = vec![0.0; k];
    let mut visit = |c: &[usize], scale: usize, best: &mut Option<(f64, Vec<usize>)>| {
        for (b, &ci) in buf.iter_mut().zip(c) {
            *b = ci as f64 / scale as f64;
        }
        if !feasible(&buf) {
            return;
        }
        let v = entropy_of(&buf, base);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            *best = Some((v, c.to_vec()));
        }
    };

    let full_hi = vec![n; k];
    for_each_lattice(k, n, &vec![0; k], &full_hi, |c| visit(c, n, &mut best));

    let fine = 10 * n;
    let mut fine_best: Option<(f64, Vec<usize>)> = None;
    if let Some((_, c)) = &best {
        let lo: Vec<usize> = c.iter().map(|&x| (10 * x).saturating_sub(10)).collect();
        let hi: Vec<usize> = c.iter().map(|&x| (10 * x + 10).min(fine)).collect();
        for_each_lattice(k, fine, &lo, &hi, |c| visit(c, fine, &mut fine_best));
    }

    let fallback_value = entropy_of(fallback, base);
    let out = match fine_best {
        Some((v, c)) if v < fallback_value => GridPoint {
            probs: c.iter().map(|&x| x as f64 / fine as f64).collect(),
            value: v,
        },
        _ => GridPoint {
            probs: fallback.to_vec(),
            value: fallback_value,
        },
    };
    Ok(out)
}

/// Atoms of `d` in ascending label order.
pub(crate) fn label_sorted(d: &FiniteDistribution) -> (Vec<String>, Vec<f64>) {
    let by = d.by_label();
    (
        by.keys().map(|s| s.to_string()).collect(),
        by.values().copied().collect(),
    )
}

pub(crate) fn grid_universe_check(what: &'static str, size: usize) -> Result<()> {
    if size > GRID_ORACLE_LIMIT {
        return Err(Error::SupportTooLarge {
            what,
            size,
            limit: GRID_ORACLE_LIMIT,
        });
    }
    Ok(())
}

pub(crate) fn distribution_on(
    base: u32,
    labels: &[String],
    probs: &[f64],
) -> Result<FiniteDistribution> {
    FiniteDistribution::new(
        base,
        labels
            .iter()
            .zip(probs)
            .map(|(l, &p)| Atom::new(l.clone(), p))
            .collect(),
    )
}

fn ball_oracle(
    d: &FiniteDistribution,
    delta: f64,
    step: f64,
    divergence: bool,
) -> Result<SmoothEntropyResult> {
    grid_universe_check("grid oracle", d.len())?;
    let base = d.base();
    let (labels, target) = label_sorted(d);
    let radius = |v: &[f64]| {
        let pairs = v.iter().copied().zip(target.iter().copied());
        if divergence {
            kl_aligned(pairs, base)
        } else {
            tv_aligned(pairs)
        }
    };
    let best = grid_minimize(labels.len(), base, step, &target, |v| {
        radius(v) <= delta + CUM_TOL
    })?;
    let achieved = radius(&best.probs);
    let witness = distribution_on(base, &labels, &best.probs)?;
    Ok(SmoothEntropyResult {
        delta,
        value: best.value,
        witness: Witness::Distribution(witness),
        achieved_radius: achieved,
        method: Method::GridOracle,
    })
}

/// Minimum entropy over grid points of the variational `δ`-ball.
pub fn h_delta_grid_oracle(
    d: &FiniteDistribution,
    delta: f64,
    grid_step: f64,
) -> Result<SmoothEntropyResult> {
    check_delta(delta)?;
    ball_oracle(d, delta, grid_step, false)
}

/// Minimum entropy over grid points of the divergence `δ`-ball.
pub fn h_div_grid_oracle(
    d: &FiniteDistribution,
    delta: f64,
    grid_step: f64,
) -> Result<SmoothEntropyResult> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "delta >= 0",
        });
    }
    ball_oracle(d, delta, grid_step, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::entropy;
    use crate::smooth::{g_delta, h_delta, h_div_upper};

    fn fd(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_probs(2, p).unwrap()
    }

    #[test]
    fn subset_oracle_examples() {
        let d = fd(&[0.5, 0.25, 0.25]);
        let r = g_delta_subset_oracle(&d, 0.25).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.value, g_delta(&d, 0.25).unwrap().value);
        assert_eq!(g_delta_subset_oracle(&d, 0.0).unwrap().value, 1.5);
        let u = fd(&[0.25; 4]);
        assert_eq!(g_delta_subset_oracle(&u, 0.25).unwrap().value, 1.5);
        let big = FiniteDistribution::uniform(2, 21).unwrap();
        assert!(matches!(
            g_delta_subset_oracle(&big, 0.1),
            Err(Error::SupportTooLarge { .. })
        ));
    }

    #[test]
    fn h_grid_examples() {
        let d = fd(&[0.5, 0.25, 0.25]);
        let r = h_delta_grid_oracle(&d, 0.25, 0.005).unwrap();
        assert!((r.value - 0.811_278_124_459_132_8).abs() < 0.02);
        assert!(r.value + 1e-9 >= h_delta(&d, 0.25).unwrap().value);
        assert!(r.achieved_radius <= 0.25 + 1e-9);

        let z = h_delta_grid_oracle(&d, 0.0, 0.005).unwrap();
        assert!((z.value - 1.5).abs() < 1e-12);

        let c = h_delta_grid_oracle(&fd(&[0.5, 0.5]), 0.5, 0.005).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(h_delta_grid_oracle(&fd(&[0.25; 4]), 0.1, 0.005).is_err());
    }

    #[test]
    fn div_grid_examples() {
        let d = fd(&[0.5, 0.25, 0.25]);
        assert!((h_div_grid_oracle(&d, 0.0, 0.005).unwrap().value - entropy(&d)).abs() < 1e-12);
        assert_eq!(
            h_div_grid_oracle(&fd(&[0.5, 0.5]), 1.0, 0.005)
                .unwrap()
                .value,
            0.0
        );
        let up = h_div_upper(&d, 0.41504).unwrap().value;
        let g = h_div_grid_oracle(&d, 0.41504, 0.005).unwrap();
        assert!(g.value <= up + 1e-9);
        assert!(g.achieved_radius <= 0.41504 + 1e-9);
    }

    #[test]
    fn lattice_enumeration_counts() {
        let mut count = 0;
        for_each_lattice(3, 4, &[0, 0, 0], &[4, 4, 4], |_| count += 1);
        assert_eq!(count, 15);
    }
}
