//! Finite-support probability vectors with a canonical atom order.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CUM_TOL, MASS_TOL};

/// `log_K(x)`. Base 2 goes through `log2` so dyadic inputs stay exact.
pub fn log_k(x: f64, base: u32) -> f64 {
    if base == 2 {
        x.log2()
    } else {
        x.ln() / f64::from(base).ln()
    }
}

/// Self-information `log_K(1/p)`; `+inf` for `p = 0`.
pub fn info(p: f64, base: u32) -> f64 {
    if p <= 0.0 {
        f64::INFINITY
    } else {
        -log_k(p, base)
    }
}

/// `p log_K(1/p)` with the `0 log 0 = 0` convention.
pub fn plogp(p: f64, base: u32) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * log_k(p, base)
    }
}

/// `log_K(e)`.
pub fn log_k_e(base: u32) -> f64 {
    1.0 / f64::from(base).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub label: String,
    pub p: f64,
}

impl Atom {
    pub fn new(label: impl Into<String>, p: f64) -> Self {
        Atom {
            label: label.into(),
            p,
        }
    }
}

fn canonical_cmp(a: &Atom, b: &Atom) -> Ordering {
    b.p.total_cmp(&a.p).then_with(|| a.label.cmp(&b.label))
}

/// A probability vector over labelled atoms.
///
/// Atoms are always held in canonical order: descending probability, ties
/// broken by ascending label. Zero-probability atoms are kept (smoothing
/// produces them) and are reported by [`FiniteDistribution::has_zero_atoms`].
/// Mass off by more than `1e-12` (but within the `1e-9` tolerance) is
/// renormalised on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct FiniteDistribution {
    atoms: Vec<Atom>,
    base: u32,
}

/// Wire form: `{"base": K, "atoms": [{"label": .., "p": ..}, ..]}`.
#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    base: u32,
    atoms: Vec<Atom>,
}

impl TryFrom<DistributionRepr> for FiniteDistribution {
    type Error = Error;

    fn try_from(r: DistributionRepr) -> Result<Self> {
        FiniteDistribution::new(r.base, r.atoms)
    }
}

impl From<FiniteDistribution> for DistributionRepr {
    fn from(d: FiniteDistribution) -> Self {
        DistributionRepr {
            base: d.base,
            atoms: d.atoms,
        }
    }
}

impl FiniteDistribution {
    pub fn new(base: u32, atoms: Vec<Atom>) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidBase(base));
        }
        if atoms.is_empty() {
            return Err(Error::Empty);
        }
        let mut seen = std::collections::HashSet::with_capacity(atoms.len());
        for a in &atoms {
            if !a.p.is_finite() || a.p < 0.0 || a.p > 1.0 + MASS_TOL {
                return Err(Error::InvalidProbability {
                    label: a.label.clone(),
                    p: a.p,
                });
            }
            if !seen.insert(a.label.as_str()) {
                return Err(Error::DuplicateLabel(a.label.clone()));
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.p).sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized { sum });
        }
        let mut atoms = atoms;
        // Leave rounding-level error alone so that re-wrapping a vector is
        // bit-for-bit stable.
        if (sum - 1.0).abs() > CUM_TOL {
            for a in &mut atoms {
                a.p /= sum;
            }
        }
        atoms.sort_by(canonical_cmp);
        Ok(FiniteDistribution { atoms, base })
    }

    /// Builds from `(label, p)` pairs.
    pub fn from_pairs<S: Into<String>>(
        base: u32,
        pairs: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self> {
        Self::new(
            base,
            pairs.into_iter().map(|(l, p)| Atom::new(l, p)).collect(),
        )
    }

    /// Builds from a probability vector, labelling atoms `x0, x1, ...`.
    pub fn from_probs(base: u32, probs: &[f64]) -> Result<Self> {
        Self::from_pairs(
            base,
            probs.iter().enumerate().map(|(i, &p)| (format!("x{i}"), p)),
        )
    }

    pub fn uniform(base: u32, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Empty);
        }
        Self::from_probs(base, &vec![1.0 / k as f64; k])
    }

    pub fn point_mass(base: u32, label: impl Into<String>) -> Result<Self> {
        Self::new(base, vec![Atom::new(label, 1.0)])
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// Atoms in canonical order.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.p).collect()
    }

    pub fn support_size(&self) -> usize {
        self.atoms.iter().filter(|a| a.p > 0.0).count()
    }

    pub fn has_zero_atoms(&self) -> bool {
        self.atoms.iter().any(|a| a.p == 0.0)
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.atoms.iter().find(|a| a.label == label).map(|a| a.p)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(|a| a.label.as_str())
    }

    /// Label → probability, iterated in ascending label order.
    pub fn by_label(&self) -> BTreeMap<&str, f64> {
        self.atoms.iter().map(|a| (a.label.as_str(), a.p)).collect()
    }

    pub fn check_base(&self, other: &FiniteDistribution) -> Result<()> {
        if self.base != other.base {
            return Err(Error::BaseMismatch {
                left: self.base,
                right: other.base,
            });
        }
        Ok(())
    }

    /// Aligns two distributions over the union of their labels, ascending
    /// label order, filling absent atoms with zero.
    pub fn align<'a>(&'a self, other: &'a FiniteDistribution) -> Result<Vec<(&'a str, f64, f64)>> {
        self.check_base(other)?;
        let mut joint: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for a in &self.atoms {
            joint.entry(a.label.as_str()).or_default().0 = a.p;
        }
        for a in &other.atoms {
            joint.entry(a.label.as_str()).or_default().1 = a.p;
        }
        Ok(joint.into_iter().map(|(l, (p, q))| (l, p, q)).collect())
    }

    /// Same atoms and probabilities over a different label set: used to
    /// re-express a distribution on an extended universe.
    pub fn extend_universe<'a>(
        &self,
        labels: impl IntoIterator<Item = &'a str>,
    ) -> Result<FiniteDistribution> {
        let mut atoms = self.atoms.clone();
        for l in labels {
            if !atoms.iter().any(|a| a.label == l) {
                atoms.push(Atom::new(l, 0.0));
            }
        }
        FiniteDistribution::new(self.base, atoms)
    }
}
