//! Smooth entropies of order one: `G_[δ]`, the variational-ball `H_[δ]`, and
//! the divergence-ball upper construction.

use num_bigint::BigUint;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::{info, log_k, plogp, Atom, FiniteDistribution};
use crate::error::{Error, Result};
use crate::grouped::{level_mass, GroupedDistribution, Level, Spectrum};
use crate::measures::{check_delta, entropy, kl_divergence, variational_distance};
use crate::CUM_TOL;

/// Node budget for the exact `G_[δ]` search on finite distributions.
pub const G_SEARCH_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GreedySet,
    HoYeung,
    Conditional,
    GridOracle,
    SubsetOracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::GreedySet => "greedy-set",
            Method::HoYeung => "ho-yeung",
            Method::Conditional => "conditional",
            Method::GridOracle => "grid-oracle",
            Method::SubsetOracle => "subset-oracle",
        }
    }
}

/// What realises a smooth-entropy value.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// A distribution in the ball (ball-based quantities on finite inputs).
    Distribution(FiniteDistribution),
    /// The retained set `A` of a `G_[δ]` computation, canonical order.
    Subset(Vec<String>),
    /// Level list for grouped inputs: a distribution for ball quantities,
    /// the retained sub-measure for `G_[δ]`.
    Levels(Vec<Level>),
}

impl Witness {
    pub fn distribution(&self) -> Option<&FiniteDistribution> {
        match self {
            Witness::Distribution(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEntropyResult {
    pub delta: f64,
    pub value: f64,
    pub witness: Witness,
    /// Distance (or divergence) of the witness to the target; for `G_[δ]`
    /// the discarded mass.
    pub achieved_radius: f64,
    pub method: Method,
}

/// Inputs the smooth-entropy constructions accept.
pub trait SmoothSource: Spectrum {
    fn g_delta_impl(&self, delta: f64) -> Result<SmoothEntropyResult>;
    fn h_delta_impl(&self, delta: f64) -> Result<SmoothEntropyResult>;
}

/// `G_[δ]`: minimum partial entropy `Σ_A p log 1/p` over sets carrying mass
/// at least `1 − δ`.
pub fn g_delta<D: SmoothSource + ?Sized>(d: &D, delta: f64) -> Result<SmoothEntropyResult> {
    check_delta(delta)?;
    d.g_delta_impl(delta)
}

/// `H_[δ]` via the majorizing distribution of the variational `δ`-ball.
pub fn h_delta<D: SmoothSource + ?Sized>(d: &D, delta: f64) -> Result<SmoothEntropyResult> {
    check_delta(delta)?;
    d.h_delta_impl(delta)
}

/// Index of the first position whose cumulative mass reaches `1 − δ`.
fn boundary_index(masses: &[f64], delta: f64) -> usize {
    let target = 1.0 - delta - CUM_TOL;
    let mut cum = 0.0;
    for (i, m) in masses.iter().enumerate() {
        cum += m;
        if cum >= target {
            return i;
        }
    }
    masses.len().saturating_sub(1)
}

fn positive_atoms(d: &FiniteDistribution) -> &[Atom] {
    let k = d.support_size();
    &d.atoms()[..k]
}

impl SmoothSource for FiniteDistribution {
    fn g_delta_impl(&self, delta: f64) -> Result<SmoothEntropyResult> {
        let atoms = positive_atoms(self);
        let base = self.base();
        let probs: Vec<f64> = atoms.iter().map(|a| a.p).collect();
        let excluded = max_excluded_cost(&probs, base, delta);
        let mut keep = vec![true; probs.len()];
        for &i in &excluded {
            keep[i] = false;
        }
        let value: f64 = probs
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&p, _)| plogp(p, base))
            .sum();
        let radius: f64 = excluded.iter().map(|&i| probs[i]).sum();
        let labels = atoms
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(a, _)| a.label.clone())
            .collect();
        Ok(SmoothEntropyResult {
            delta,
            value,
            witness: Witness::Subset(labels),
            achieved_radius: radius,
            method: Method::GreedySet,
        })
    }

    fn h_delta_impl(&self, delta: f64) -> Result<SmoothEntropyResult> {
        if delta == 0.0 {
            return Ok(SmoothEntropyResult {
                delta,
                value: entropy(self),
                witness: Witness::Distribution(self.clone()),
                achieved_radius: 0.0,
                method: Method::HoYeung,
            });
        }
        let atoms = self.atoms();
        let k = self.support_size();
        let probs: Vec<f64> = atoms[..k].iter().map(|a| a.p).collect();
        let j = boundary_index(&probs, delta);
        let tail: f64 = probs[j + 1..].iter().rev().sum();
        let eps = (delta - tail).clamp(0.0, probs[j]);

        let mut v: Vec<f64> = atoms.iter().map(|a| a.p).collect();
        v[0] += delta;
        v[j] -= eps;
        for x in &mut v[j + 1..] {
            *x = 0.0;
        }
        for x in &mut v {
            *x = x.clamp(0.0, 1.0);
        }
        let witness = FiniteDistribution::new(
            self.base(),
            atoms
                .iter()
                .zip(&v)
                .map(|(a, &p)| Atom::new(a.label.clone(), p))
                .collect(),
        )?;
        let radius = variational_distance(self, &witness)?;
        Ok(SmoothEntropyResult {
            delta,
            value: entropy(&witness),
            witness: Witness::Distribution(witness),
            achieved_radius: radius,
            method: Method::HoYeung,
        })
    }
}

/// Number of atoms of a level needed to cover `need` mass, and the surplus
/// `r·q − need` (zero when `q` is negligible next to `need`).
fn atoms_to_cover(level: &Level, need: f64) -> (BigUint, f64) {
    let ln_ratio = need.ln() - level.ln_p;
    if ln_ratio < 52.0 * std::f64::consts::LN_2 && level.p > 0.0 {
        let q = level.p;
        let r = ((need - CUM_TOL) / q).ceil().max(1.0);
        let r = BigUint::from_f64(r).unwrap_or_else(BigUint::one);
        let r = r.min(level.count.clone());
        let covered = r.to_f64().unwrap_or(f64::INFINITY) * q;
        (r, (covered - need).clamp(0.0, q))
    } else {
        (ceil_exp(ln_ratio).min(level.count.clone()), 0.0)
    }
}

/// `⌈e^x⌉` as a big integer for `x` beyond the `f64` range, accurate to the
/// leading 53 bits.
fn ceil_exp(x: f64) -> BigUint {
    let bits = x / std::f64::consts::LN_2;
    if bits < 60.0 {
        return BigUint::from_f64(x.exp().ceil()).unwrap_or_else(BigUint::one);
    }
    let whole = bits.floor();
    let mantissa = (bits - whole + 52.0).exp2().ceil();
    let m = BigUint::from_f64(mantissa).unwrap_or_else(BigUint::one);
    (m << (whole as u64 - 52)) + 1u32
}

fn sub_level(level: &Level, count: BigUint, base: u32) -> Option<Level> {
    if count.is_zero() {
        None
    } else {
        Some(Level::new(level.ln_p, level.p, count, base))
    }
}

fn boundary_level(levels: &[Level], delta: f64) -> (usize, f64) {
    let target = 1.0 - delta - CUM_TOL;
    let mut cum = 0.0;
    for (i, l) in levels.iter().enumerate() {
        if cum + l.mass >= target {
            return (i, (1.0 - delta) - cum);
        }
        cum += l.mass;
    }
    let last = levels.len() - 1;
    (last, levels[last].mass)
}

impl SmoothSource for GroupedDistribution {
    fn g_delta_impl(&self, delta: f64) -> Result<SmoothEntropyResult> {
        let base = self.log_base();
        let levels = self.groups();
        let (j, need) = boundary_level(levels, delta);
        let (r, _) = atoms_to_cover(&levels[j], need);
        let mut kept: Vec<Level> = levels[..j].to_vec();
        let rest = &levels[j].count - &r;
        kept.extend(sub_level(&levels[j], r, base));
        let value: f64 = kept.iter().map(Level::plogp).sum();
        let discarded = level_mass(levels[j].ln_p, levels[j].p, &rest)
            + levels[j + 1..].iter().map(|l| l.mass).sum::<f64>();
        Ok(SmoothEntropyResult {
            delta,
            value,
            witness: Witness::Levels(kept),
            achieved_radius: discarded,
            method: Method::GreedySet,
        })
    }

    fn h_delta_impl(&self, delta: f64) -> Result<SmoothEntropyResult> {
        let base = self.log_base();
        let levels = self.groups();
        if delta == 0.0 {
            return Ok(SmoothEntropyResult {
                delta,
                value: entropy(self),
                witness: Witness::Levels(levels.to_vec()),
                achieved_radius: 0.0,
                method: Method::HoYeung,
            });
        }
        let (j, need) = boundary_level(levels, delta);
        let (r, eps) = atoms_to_cover(&levels[j], need);
        let later: f64 = levels[j + 1..].iter().map(|l| l.mass).sum();
        let cut = &levels[j].count - &r;
        let tail = level_mass(levels[j].ln_p, levels[j].p, &cut) + later;

        let single = |p: f64| Level::single(p, base);
        let mut out: Vec<Level> = Vec::with_capacity(j + 4);
        let (added, removed);
        let top = &levels[0];
        if j == 0 {
            if r.is_one() {
                out.push(single(top.p + delta - eps));
                added = delta - eps;
                removed = tail;
            } else {
                out.push(single(top.p + delta));
                out.extend(sub_level(top, &r - 2u32, base));
                if top.p - eps > 0.0 {
                    out.push(single(top.p - eps));
                }
                added = delta;
                removed = eps + tail;
            }
        } else {
            out.push(single(top.p + delta));
            out.extend(sub_level(top, &top.count - 1u32, base));
            out.extend(levels[1..j].iter().cloned());
            let lj = &levels[j];
            out.extend(sub_level(lj, &r - 1u32, base));
            if lj.p - eps > 0.0 {
                out.push(single(lj.p - eps));
            }
            added = delta;
            removed = eps + tail;
        }
        let value: f64 = out.iter().map(Level::plogp).sum();
        Ok(SmoothEntropyResult {
            delta,
            value,
            witness: Witness::Levels(out),
            achieved_radius: 0.5 * (added + removed),
            method: Method::HoYeung,
        })
    }
}

/// Branch and bound for the complement of the optimal `G_[δ]` set: pick
/// excluded atoms maximising `Σ p log 1/p` with `Σ p <= δ`. Returns indices
/// into `probs` (descending order).
fn max_excluded_cost(probs: &[f64], base: u32, delta: f64) -> Vec<usize> {
    let n = probs.len();
    // Highest cost-per-mass first: smallest probabilities.
    let order: Vec<usize> = (0..n).rev().collect();
    let w: Vec<f64> = order.iter().map(|&i| probs[i]).collect();
    let ratio: Vec<f64> = w.iter().map(|&p| info(p, base)).collect();
    let cap = delta + CUM_TOL;

    // Incumbent: the greedy tail beyond the boundary index.
    let j = boundary_index(probs, delta);
    let greedy: Vec<usize> = (j + 1..n).collect();
    let greedy_val: f64 = greedy.iter().map(|&i| plogp(probs[i], base)).sum();
    let greedy_mass: f64 = greedy.iter().map(|&i| probs[i]).sum();
    if greedy_mass > cap {
        return Vec::new();
    }

    struct Search<'a> {
        w: &'a [f64],
        ratio: &'a [f64],
        best: f64,
        best_set: Vec<usize>,
        chosen: Vec<usize>,
        nodes: u64,
    }

    impl Search<'_> {
        fn bound(&self, idx: usize, mut cap_left: f64) -> f64 {
            let mut b = 0.0;
            for k in idx..self.w.len() {
                if self.w[k] <= cap_left {
                    cap_left -= self.w[k];
                    b += self.w[k] * self.ratio[k];
                } else {
                    b += cap_left * self.ratio[k];
                    break;
                }
            }
            b
        }

        fn run(&mut self, idx: usize, cap_left: f64, val: f64) {
            self.nodes += 1;
            if val > self.best {
                self.best = val;
                self.best_set = self.chosen.clone();
            }
            if idx == self.w.len() || self.nodes > G_SEARCH_BUDGET {
                return;
            }
            let slack = 1e-12 * self.best.abs().max(1e-300);
            if val + self.bound(idx, cap_left) <= self.best + slack {
                return;
            }
            if self.w[idx] <= cap_left {
                self.chosen.push(idx);
                self.run(
                    idx + 1,
                    cap_left - self.w[idx],
                    val + self.w[idx] * self.ratio[idx],
                );
                self.chosen.pop();
            }
            self.run(idx + 1, cap_left, val);
        }
    }

    let mut search = Search {
        w: &w,
        ratio: &ratio,
        best: greedy_val,
        best_set: Vec::new(),
        chosen: Vec::new(),
        nodes: 0,
    };
    search.run(0, cap, 0.0);
    if search.best_set.is_empty() && search.best <= greedy_val {
        return greedy;
    }
    search.best_set.iter().map(|&k| order[k]).collect()
}

/// Upper construction for the divergence-ball smooth entropy: the best
/// conditional distribution `d(· | A)` over descending-probability prefixes
/// `A` with `log_K 1/Pr(A) <= δ`.
pub fn h_div_upper(d: &FiniteDistribution, delta: f64) -> Result<SmoothEntropyResult> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "delta >= 0",
        });
    }
    let base = d.base();
    let atoms = d.atoms();
    let k = d.support_size();
    let mut best: Option<(f64, usize)> = None;
    let mut tail = 0.0;
    let mut tails = vec![0.0; k];
    for j in (0..k).rev() {
        tails[j] = tail;
        tail += atoms[j].p;
    }
    for j in 0..k {
        let alpha = if j + 1 == k { 1.0 } else { 1.0 - tails[j] };
        if alpha <= 0.0 || log_k(1.0 / alpha, base) > delta + CUM_TOL {
            continue;
        }
        let h: f64 = atoms[..=j].iter().map(|a| plogp(a.p / alpha, base)).sum();
        match best {
            Some((bh, _)) if bh <= h => {}
            _ => best = Some((h, j)),
        }
    }
    let (_, j) = best.expect("the full support always qualifies");
    let witness = if j + 1 == k {
        d.clone()
    } else {
        let alpha = 1.0 - tails[j];
        FiniteDistribution::new(
            base,
            atoms
                .iter()
                .enumerate()
                .map(|(i, a)| Atom::new(a.label.clone(), if i <= j { a.p / alpha } else { 0.0 }))
                .collect(),
        )?
    };
    let radius = kl_divergence(&witness, d)?;
    Ok(SmoothEntropyResult {
        delta,
        value: entropy(&witness),
        witness: Witness::Distribution(witness),
        achieved_radius: radius,
        method: Method::Conditional,
    })
}

/// `g(δ) = 2δ²/ln K`: a divergence radius whose ball sits inside the
/// variational `δ`-ball.
pub fn pinsker_radius(delta: f64, base: u32) -> f64 {
    2.0 * delta * delta / f64::from(base).ln()
}

/// `h(δ) = log_K 1/(1 − δ)`: divergence of the conditional construction.
pub fn conditional_radius(delta: f64, base: u32) -> f64 {
    log_k(1.0 / (1.0 - delta), base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouped::iid_power;

    fn fd(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_probs(2, p).unwrap()
    }

    #[test]
    fn g_delta_examples() {
        let d = fd(&[0.5, 0.25, 0.25]);
        assert_eq!(g_delta(&d, 0.0).unwrap().value, 1.5);
        assert_eq!(g_delta(&d, 0.25).unwrap().value, 1.0);
        assert_eq!(g_delta(&fd(&[1.0]), 0.7).unwrap().value, 0.0);
    }

    #[test]
    fn g_delta_beats_greedy_prefix_when_it_should() {
        // Need 0.55 of the mass: {0.5, 0.2} is cheaper than the prefix {0.5, 0.3}.
        let d = fd(&[0.5, 0.3, 0.2]);
        let r = g_delta(&d, 0.45).unwrap();
        let want = plogp(0.5, 2) + plogp(0.2, 2);
        assert!((r.value - want).abs() < 1e-15);
        assert_eq!(r.witness, Witness::Subset(vec!["x0".into(), "x2".into()]));
        assert!((r.achieved_radius - 0.3).abs() < 1e-15);
    }

    #[test]
    fn h_delta_examples() {
        let d = fd(&[0.5, 0.25, 0.25]);
        let r0 = h_delta(&d, 0.0).unwrap();
        assert_eq!(r0.value, 1.5);
        assert_eq!(r0.witness.distribution(), Some(&d));

        let r = h_delta(&d, 0.25).unwrap();
        assert!((r.value - 0.811_278_124_459_132_8).abs() < 1e-12);
        assert_eq!(
            r.witness.distribution().unwrap().probs(),
            vec![0.75, 0.25, 0.0]
        );
        assert!((r.achieved_radius - 0.25).abs() < 1e-15);

        let c = h_delta(&fd(&[0.5, 0.5]), 0.5).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.achieved_radius, 0.5);
    }

    #[test]
    fn h_delta_splits_the_boundary_atom() {
        let d = fd(&[0.4, 0.3, 0.2, 0.1]);
        let r = h_delta(&d, 0.15).unwrap();
        // j* = 2 (cum 0.9 >= 0.85), tail 0.1, eps 0.05
        let v = r.witness.distribution().unwrap().probs();
        let want = [0.55, 0.3, 0.15, 0.0];
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((r.achieved_radius - 0.15).abs() < 1e-15);
    }

    #[test]
    fn grouped_h_delta_matches_finite_on_n_one() {
        let b = fd(&[0.4, 0.3, 0.2, 0.1]);
        let g = iid_power(&b, 1).unwrap();
        for delta in [0.0, 0.05, 0.15, 0.35, 0.7, 0.95] {
            let a = h_delta(&b, delta).unwrap();
            let c = h_delta(&g, delta).unwrap();
            assert!((a.value - c.value).abs() < 1e-12, "delta {delta}");
            assert!((a.achieved_radius - c.achieved_radius).abs() < 1e-12);
        }
    }

    #[test]
    fn grouped_h_delta_matches_expanded_power() {
        // X^3 for a ternary source expanded atom by atom.
        let b = fd(&[0.5, 0.3, 0.2]);
        let g = iid_power(&b, 3).unwrap();
        let mut probs = Vec::new();
        for x in b.probs() {
            for y in b.probs() {
                for z in b.probs() {
                    probs.push(x * y * z);
                }
            }
        }
        let full = fd(&probs);
        for delta in [0.0, 0.01, 0.1, 0.33, 0.6, 0.9] {
            let a = h_delta(&full, delta).unwrap();
            let c = h_delta(&g, delta).unwrap();
            assert!((a.value - c.value).abs() < 1e-9, "delta {delta}");
            let ga = g_delta(&g, delta).unwrap();
            // the grouped G is the greedy prefix: never below the exact minimum
            assert!(ga.value + 1e-9 >= g_delta(&full, delta).unwrap().value);
        }
    }

    #[test]
    fn grouped_witness_masses_sum_to_one() {
        let b = fd(&[0.2, 0.8]);
        let g = iid_power(&b, 2000).unwrap();
        for delta in [0.1, 0.5, 0.9] {
            let r = h_delta(&g, delta).unwrap();
            let Witness::Levels(ls) = &r.witness else {
                panic!()
            };
            let total: f64 = ls.iter().map(|l| l.mass).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!((r.achieved_radius - delta).abs() < 1e-9);
        }
    }

    #[test]
    fn h_div_upper_examples() {
        let d = fd(&[0.5, 0.25, 0.25]);
        assert_eq!(h_div_upper(&d, 0.0).unwrap().value, 1.5);
        assert_eq!(h_div_upper(&fd(&[1.0]), 0.3).unwrap().value, 0.0);
        let r = h_div_upper(&d, 0.41504).unwrap();
        assert!((r.value - 0.918_295_834_054_489_6).abs() < 1e-12);
        assert!((r.achieved_radius - (4.0f64 / 3.0).log2()).abs() < 1e-12);
        assert_eq!(r.method, Method::Conditional);
        assert!(h_div_upper(&d, -0.1).is_err());
    }

    #[test]
    fn radii_helpers() {
        assert!((pinsker_radius(0.5, 2) - 0.5 / std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(conditional_radius(0.5, 2), 1.0);
    }
}
