//! Information-spectrum slicing encoders.
//!
//! Each atom `x` of the target `V` inside the threshold set `T_n` gets a coin
//! length `ℓ(x) = ⌈log_K 1/V(x) + s⌉`. Atoms sharing a length form a slice;
//! within slice `m` the `K^m` coin strings are read as base-`K` numerals
//! ("cells") and split into contiguous intervals, one per atom, of size
//! roughly proportional to `V(x)`.

use std::collections::BTreeMap;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{info, Atom, FiniteDistribution};
use crate::error::{Error, Result};
use crate::CUM_TOL;

/// Default ceiling on the size of one cell index, in bits.
pub const DEFAULT_CELL_BUDGET_BITS: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Variational,
    Divergence,
}

/// Big integers travel as decimal strings.
pub mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10)
            .ok_or_else(|| D::Error::custom(format!("not a decimal integer: {s:?}")))
    }
}

/// Cells `[lo, hi)` of one slice assigned to `label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub label: String,
    #[serde(with = "decimal")]
    pub lo: BigUint,
    #[serde(with = "decimal")]
    pub hi: BigUint,
}

impl Allocation {
    pub fn cells(&self) -> BigUint {
        &self.hi - &self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub m: u32,
    /// Atoms in slice order with their cell intervals, tiling `0..K^m`.
    pub allocations: Vec<Allocation>,
    /// `Pr{V ∈ S_n(m)}`.
    pub mass: f64,
    /// `Pr{L_n = m}`.
    pub pmf: f64,
    /// Atoms that received one leftover cell.
    pub grants: usize,
}

/// The atom reached by the empty coin string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullAtom {
    pub label: String,
    pub pmf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCode {
    pub target: FiniteDistribution,
    pub n: u32,
    pub gamma: f64,
    /// Slice offset `s = n·γ`.
    pub offset: f64,
    /// Spectrum threshold per symbol.
    pub c_n: f64,
    /// `⌈n(c_n + γ)⌉`, an upper bound on every occupied length.
    pub beta: u32,
    pub variant: Variant,
    /// Mass of `V` outside `T_n`.
    pub gamma0: f64,
    pub slices: BTreeMap<u32, Slice>,
    pub null: Option<NullAtom>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeParams {
    pub n: u32,
    pub gamma: f64,
    /// Threshold per symbol; `None` keeps the whole support.
    pub c_n: Option<f64>,
    pub cell_budget_bits: u64,
}

impl CodeParams {
    pub fn new(n: u32, gamma: f64) -> Self {
        CodeParams {
            n,
            gamma,
            c_n: None,
            cell_budget_bits: DEFAULT_CELL_BUDGET_BITS,
        }
    }

    pub fn with_threshold(mut self, c_n: f64) -> Self {
        self.c_n = Some(c_n);
        self
    }
}

/// Variational-distance code.
pub fn build_slice_code(
    v: &FiniteDistribution,
    n: u32,
    gamma: f64,
    c_n: Option<f64>,
) -> Result<SliceCode> {
    let mut p = CodeParams::new(n, gamma);
    p.c_n = c_n;
    build(v, p, Variant::Variational)
}

/// Divergence code: no null string; slice masses renormalised by `1 − γ₀`.
pub fn build_slice_code_div(
    v: &FiniteDistribution,
    n: u32,
    gamma: f64,
    c_n: Option<f64>,
) -> Result<SliceCode> {
    let mut p = CodeParams::new(n, gamma);
    p.c_n = c_n;
    build(v, p, Variant::Divergence)
}

pub fn build_with(
    v: &FiniteDistribution,
    params: CodeParams,
    variant: Variant,
) -> Result<SliceCode> {
    build(v, params, variant)
}

/// `⌈x⌉`, treating values within rounding noise of an integer as that integer.
fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `p = mantissa · 2^exp` exactly.
fn dyadic(p: f64) -> (u64, i32) {
    let bits = p.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

/// `floor(p_i · total / Σ p)` for each `i`, exactly.
fn proportional_cells(probs: &[f64], total: &BigUint) -> Vec<BigUint> {
    let parts: Vec<(u64, i32)> = probs.iter().map(|&p| dyadic(p)).collect();
    let e_min = parts.iter().map(|&(_, e)| e).min().unwrap_or(0);
    let scaled: Vec<BigUint> = parts
        .iter()
        .map(|&(m, e)| BigUint::from(m) << (e - e_min) as u32)
        .collect();
    let sum: BigUint = scaled.iter().sum();
    scaled.iter().map(|x| (x * total) / &sum).collect()
}

fn build(v: &FiniteDistribution, params: CodeParams, variant: Variant) -> Result<SliceCode> {
    let CodeParams {
        n,
        gamma,
        c_n,
        cell_budget_bits,
    } = params;
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "n",
            value: 0.0,
            expected: "n >= 1",
        });
    }
    let gamma_ok = match variant {
        Variant::Variational => gamma > 0.0 && gamma.is_finite(),
        Variant::Divergence => gamma > 0.0 && gamma <= 0.5,
    };
    if !gamma_ok {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            expected: match variant {
                Variant::Variational => "gamma > 0",
                Variant::Divergence => "0 < gamma <= 0.5",
            },
        });
    }
    let base = v.base();
    let nf = f64::from(n);
    let s = nf * gamma;
    let positive: Vec<&Atom> = v.atoms().iter().filter(|a| a.p > 0.0).collect();
    let max_info = positive
        .iter()
        .map(|a| info(a.p, base))
        .fold(0.0f64, f64::max);
    let c_n = match c_n {
        Some(c) if c >= 0.0 && c.is_finite() => c,
        Some(c) => {
            return Err(Error::OutOfRange {
                name: "c_n",
                value: c,
                expected: "c_n >= 0",
            })
        }
        None => max_info / nf,
    };
    let beta = snapped_ceil(nf * (c_n + gamma)).max(1.0) as u32;

    let mut members: BTreeMap<u32, Vec<&Atom>> = BTreeMap::new();
    let mut outside: Vec<&Atom> = Vec::new();
    for a in &positive {
        let i = info(a.p, base);
        if i / nf <= c_n + CUM_TOL {
            let m = snapped_ceil(i + s).max(1.0) as u32;
            members.entry(m).or_default().push(a);
        } else {
            outside.push(a);
        }
    }
    let gamma0: f64 = outside.iter().rev().map(|a| a.p).sum();
    if members.is_empty() && variant == Variant::Divergence {
        return Err(Error::OutOfRange {
            name: "c_n",
            value: c_n,
            expected: "a threshold keeping some mass",
        });
    }
    let norm = match variant {
        Variant::Variational => 1.0,
        Variant::Divergence => 1.0 - gamma0,
    };

    let log2k = f64::from(base).log2();
    let mut slices = BTreeMap::new();
    for (m, atoms) in members {
        let bits = (f64::from(m) * log2k).ceil() as u64;
        if bits > cell_budget_bits {
            return Err(Error::CellBudget {
                m,
                bits,
                budget: cell_budget_bits,
            });
        }
        let total = BigUint::from(base).pow(m);
        let probs: Vec<f64> = atoms.iter().map(|a| a.p).collect();
        let mut cells = proportional_cells(&probs, &total);
        let used: BigUint = cells.iter().sum();
        let leftover = (&total - used)
            .to_usize()
            .expect("leftover is below the slice size");
        debug_assert!(leftover < atoms.len().max(1));
        for c in cells.iter_mut().take(leftover) {
            *c += 1u32;
        }
        let mut lo = BigUint::zero();
        let allocations = atoms
            .iter()
            .zip(cells)
            .map(|(a, c)| {
                let hi = &lo + c;
                Allocation {
                    label: a.label.clone(),
                    lo: std::mem::replace(&mut lo, hi.clone()),
                    hi,
                }
            })
            .collect();
        let mass: f64 = probs.iter().sum();
        slices.insert(
            m,
            Slice {
                m,
                allocations,
                mass,
                pmf: mass / norm,
                grants: leftover,
            },
        );
    }

    let null = match variant {
        Variant::Variational if gamma0 > 0.0 => outside.first().map(|a| NullAtom {
            label: a.label.clone(),
            pmf: gamma0,
        }),
        _ => None,
    };

    Ok(SliceCode {
        target: v.clone(),
        n,
        gamma,
        offset: s,
        c_n,
        beta,
        variant,
        gamma0,
        slices,
        null,
    })
}

/// `num / den` rounded to `f64`, for arbitrarily large operands.
pub fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits() as i64 + 64 - num.bits() as i64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        (num >> (-shift) as u64) / den
    };
    let q = q.to_f64().unwrap_or(f64::INFINITY);
    // split the scaling so intermediate powers of two stay finite
    let mut out = q;
    let mut k = shift;
    while k > 1000 {
        out *= 2f64.powi(-1000);
        k -= 1000;
    }
    while k < -1000 {
        out *= 2f64.powi(1000);
        k += 1000;
    }
    out * 2f64.powi(-(k as i32))
}

impl SliceCode {
    pub fn base(&self) -> u32 {
        self.target.base()
    }

    /// `Pr{L_n = m}` in ascending `m`, including the empty string.
    pub fn length_pmf(&self) -> Vec<(u32, f64)> {
        let mut out = Vec::with_capacity(self.slices.len() + 1);
        if let Some(z) = &self.null {
            out.push((0, z.pmf));
        }
        out.extend(self.slices.values().map(|s| (s.m, s.pmf)));
        out
    }

    /// `P_{X̃}(x)` for every atom that a coin string reaches, in slice order.
    pub fn induced_masses(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        if let Some(z) = &self.null {
            out.push((z.label.clone(), z.pmf));
        }
        for s in self.slices.values() {
            let total = BigUint::from(self.base()).pow(s.m);
            for a in &s.allocations {
                out.push((a.label.clone(), ratio_f64(&a.cells(), &total) * s.pmf));
            }
        }
        out
    }
}

/// The output distribution `P_{X̃}` of the code, over the target's universe.
pub fn induced_distribution(code: &SliceCode) -> Result<FiniteDistribution> {
    let mut masses: BTreeMap<String, f64> = code
        .target
        .atoms()
        .iter()
        .map(|a| (a.label.clone(), 0.0))
        .collect();
    for (l, p) in code.induced_masses() {
        *masses.entry(l).or_default() += p;
    }
    FiniteDistribution::new(
        code.base(),
        masses.into_iter().map(|(l, p)| Atom::new(l, p)).collect(),
    )
}

/// `E[L_n]`.
pub fn expected_length(code: &SliceCode) -> f64 {
    code.length_pmf()
        .iter()
        .map(|&(m, p)| f64::from(m) * p)
        .sum()
}

/// The atom a length-`m` coin string decodes to; the string is given as its
/// base-`K` numeral.
pub fn decode_cell<'a>(code: &'a SliceCode, m: u32, cell: &BigUint) -> Result<&'a str> {
    if m == 0 {
        return match &code.null {
            Some(z) if cell.is_zero() => Ok(&z.label),
            Some(_) => Err(Error::CellOutOfRange {
                cell: cell.to_string(),
                base: code.base(),
                m,
            }),
            None => Err(Error::UnoccupiedSlice(0)),
        };
    }
    let slice = code.slices.get(&m).ok_or(Error::UnoccupiedSlice(m))?;
    let last = slice
        .allocations
        .last()
        .expect("occupied slices are non-empty");
    if cell >= &last.hi {
        return Err(Error::CellOutOfRange {
            cell: cell.to_string(),
            base: code.base(),
            m,
        });
    }
    let i = slice.allocations.partition_point(|a| &a.hi <= cell);
    Ok(&slice.allocations[i].label)
}

/// Decodes `draws` uniform coin strings of random length, seeded.
pub fn sample(code: &SliceCode, draws: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pmf = code.length_pmf();
    let total: f64 = pmf.iter().map(|&(_, p)| p).sum();
    let sizes: Vec<BigUint> = pmf
        .iter()
        .map(|&(m, _)| BigUint::from(code.base()).pow(m))
        .collect();
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = pmf.len() - 1;
        for (i, &(_, p)) in pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = i;
                break;
            }
        }
        let m = pmf[pick].0;
        let cell = if sizes[pick].is_one() {
            BigUint::zero()
        } else {
            rng.gen_biguint_below(&sizes[pick])
        };
        let label = decode_cell(code, m, &cell).expect("sampled cells are in range");
        out.push(label.to_string());
    }
    out
}

/// Per-label counts of [`sample`].
pub fn sample_counts(code: &SliceCode, draws: usize, seed: u64) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for l in sample(code, draws, seed) {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_probs(2, p).unwrap()
    }

    #[test]
    fn uniform_four() {
        let v = fd(&[0.25; 4]);
        let code = build_slice_code(&v, 1, 0.5, None).unwrap();
        assert_eq!(code.slices.len(), 1);
        let s = &code.slices[&3];
        assert!(s
            .allocations
            .iter()
            .all(|a| a.cells() == BigUint::from(2u32)));
        assert_eq!(induced_distribution(&code).unwrap(), v);
        assert_eq!(expected_length(&code), 3.0);
        assert_eq!(decode_cell(&code, 3, &BigUint::from(0u32)).unwrap(), "x0");
        assert_eq!(decode_cell(&code, 3, &BigUint::from(7u32)).unwrap(), "x3");
        assert!(decode_cell(&code, 3, &BigUint::from(8u32)).is_err());
        assert!(matches!(
            decode_cell(&code, 2, &BigUint::zero()),
            Err(Error::UnoccupiedSlice(2))
        ));
    }

    #[test]
    fn point_mass() {
        let v = fd(&[1.0]);
        let code = build_slice_code(&v, 1, 0.5, None).unwrap();
        assert_eq!(code.slices.keys().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(expected_length(&code), 1.0);
        assert_eq!(induced_distribution(&code).unwrap(), v);
        for c in 0..2u32 {
            assert_eq!(decode_cell(&code, 1, &BigUint::from(c)).unwrap(), "x0");
        }
        let d = build_slice_code_div(&v, 1, 0.5, None).unwrap();
        assert_eq!(expected_length(&d), 1.0);
    }

    #[test]
    fn two_slices_synthesise_exactly() {
        let v = fd(&[0.6, 0.4]);
        let code = build_slice_code(&v, 1, 1.0, None).unwrap();
        assert_eq!(code.slices.keys().copied().collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(code.slices[&2].allocations[0].cells(), BigUint::from(4u32));
        assert_eq!(code.slices[&3].allocations[0].cells(), BigUint::from(8u32));
        assert_eq!(induced_distribution(&code).unwrap().probs(), vec![0.6, 0.4]);
        assert!((expected_length(&code) - 2.4).abs() < 1e-15);
    }

    #[test]
    fn one_slice_rounding() {
        let v = fd(&[0.6, 0.4]);
        let code = build_slice_code(&v, 1, 0.5, None).unwrap();
        assert_eq!(code.slices.keys().copied().collect::<Vec<_>>(), vec![2]);
        let s = &code.slices[&2];
        assert_eq!(s.grants, 1);
        assert_eq!(s.allocations[0].cells(), BigUint::from(3u32));
        assert_eq!(
            induced_distribution(&code).unwrap().probs(),
            vec![0.75, 0.25]
        );
        assert_eq!(decode_cell(&code, 2, &BigUint::from(2u32)).unwrap(), "x0");
        assert_eq!(decode_cell(&code, 2, &BigUint::from(3u32)).unwrap(), "x1");
    }

    #[test]
    fn divergence_truncation() {
        let v = fd(&[0.5, 0.25, 0.125, 0.125]);
        let code = build_slice_code_div(&v, 1, 0.5, Some(3.0)).unwrap();
        assert_eq!(code.gamma0, 0.0);
        let code = build_slice_code_div(&v, 1, 0.5, Some(2.0)).unwrap();
        assert_eq!(code.gamma0, 0.25);
        assert!(code.null.is_none());
        let x = induced_distribution(&code).unwrap();
        assert_eq!(x.prob("x2"), Some(0.0));
        assert_eq!(x.prob("x3"), Some(0.0));
        assert!((x.prob("x0").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let total: f64 = code.length_pmf().iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variational_truncation_uses_null_string() {
        let v = fd(&[0.5, 0.25, 0.125, 0.125]);
        let code = build_slice_code(&v, 1, 0.5, Some(2.0)).unwrap();
        let z = code.null.as_ref().unwrap();
        assert_eq!(z.label, "x2");
        assert_eq!(z.pmf, 0.25);
        assert_eq!(decode_cell(&code, 0, &BigUint::zero()).unwrap(), "x2");
        let x = induced_distribution(&code).unwrap();
        assert_eq!(x.prob("x2"), Some(0.25));
        assert_eq!(x.prob("x3"), Some(0.0));
    }

    #[test]
    fn full_threshold_div_matches_variational() {
        let v = fd(&[0.25; 4]);
        let a = build_slice_code(&v, 1, 0.5, None).unwrap();
        let b = build_slice_code_div(&v, 1, 0.5, None).unwrap();
        assert_eq!(a.slices, b.slices);
        assert_eq!(
            induced_distribution(&a).unwrap(),
            induced_distribution(&b).unwrap()
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let v = fd(&[0.5, 0.5]);
        assert!(build_slice_code(&v, 1, 0.0, None).is_err());
        assert!(build_slice_code_div(&v, 1, 0.6, None).is_err());
        let mut p = CodeParams::new(1, 0.5);
        p.cell_budget_bits = 1;
        assert!(matches!(
            build_with(&v, p, Variant::Variational),
            Err(Error::CellBudget { .. })
        ));
    }

    #[test]
    fn ratio_handles_huge_operands() {
        let den = BigUint::from(3u32).pow(5000);
        let num = &den / 7u32;
        assert!((ratio_f64(&num, &den) - 1.0 / 7.0).abs() < 1e-15);
        let tiny = BigUint::one();
        let r = ratio_f64(&tiny, &BigUint::from(2u32).pow(1100));
        assert_eq!(r, 0.0);
        let r = ratio_f64(&tiny, &BigUint::from(2u32).pow(1000));
        assert_eq!(r, 2f64.powi(-1000));
    }

    #[test]
    fn json_round_trip() {
        let v = fd(&[0.5, 0.25, 0.125, 0.125]);
        let code = build_slice_code(&v, 3, 0.7, Some(0.6)).unwrap();
        let s = serde_json::to_string(&code).unwrap();
        let back: SliceCode = serde_json::from_str(&s).unwrap();
        assert_eq!(back, code);
    }

    #[test]
    fn sampling_is_seeded() {
        let v = fd(&[0.5, 0.3, 0.2]);
        let code = build_slice_code(&v, 2, 0.4, None).unwrap();
        assert_eq!(sample(&code, 100, 9), sample(&code, 100, 9));
        assert_ne!(sample(&code, 100, 9), sample(&code, 100, 10));
    }
}
