//! Discrete memoryless channels and resolvability through them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dist::{Atom, FiniteDistribution};
use crate::encoder::{build_slice_code, build_slice_code_div, SliceCode};
use crate::error::{Error, Result};
use crate::measures::{kl_aligned, kl_divergence, tv_aligned, variational_distance};
use crate::oracle::{distribution_on, grid_minimize, grid_universe_check};
use crate::smooth::{Method, SmoothEntropyResult, Witness};
use crate::verify::{divergence_bound, verify_code, VerificationReport, BOUND_TOL};
use crate::{CUM_TOL, MASS_TOL};

/// Which ball a smoothing radius refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Variational distance.
    Vd,
    /// Divergence.
    Div,
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vd" => Ok(Measure::Vd),
            "div" => Ok(Measure::Div),
            _ => Err(Error::Parse(format!(
                "unknown measure {s:?} (expected vd or div)"
            ))),
        }
    }
}

/// A row-stochastic transition matrix `W(y|x)`.
///
/// Inputs and outputs are kept in ascending label order; row `i` holds
/// `W(·|inputs[i])` in output order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct Channel {
    base: u32,
    inputs: Vec<String>,
    outputs: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    base: u32,
    inputs: Vec<String>,
    outputs: Vec<String>,
    rows: BTreeMap<String, BTreeMap<String, f64>>,
}

impl TryFrom<ChannelRepr> for Channel {
    type Error = Error;

    fn try_from(r: ChannelRepr) -> Result<Self> {
        Channel::new(r.base, r.inputs, r.outputs, r.rows)
    }
}

impl From<Channel> for ChannelRepr {
    fn from(c: Channel) -> Self {
        let rows = c
            .inputs
            .iter()
            .zip(&c.matrix)
            .map(|(x, row)| {
                let r = c
                    .outputs
                    .iter()
                    .zip(row)
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(y, &p)| (y.clone(), p))
                    .collect();
                (x.clone(), r)
            })
            .collect();
        ChannelRepr {
            base: c.base,
            inputs: c.inputs,
            outputs: c.outputs,
            rows,
        }
    }
}

fn unique_sorted(labels: Vec<String>, what: &str) -> Result<Vec<String>> {
    let set: BTreeSet<String> = labels.iter().cloned().collect();
    if set.len() != labels.len() {
        return Err(Error::Parse(format!("duplicate {what} label")));
    }
    if set.is_empty() {
        return Err(Error::Empty);
    }
    Ok(set.into_iter().collect())
}

impl Channel {
    pub fn new(
        base: u32,
        inputs: Vec<String>,
        outputs: Vec<String>,
        rows: BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidBase(base));
        }
        let inputs = unique_sorted(inputs, "input")?;
        let outputs = unique_sorted(outputs, "output")?;
        if let Some(x) = rows.keys().find(|x| inputs.binary_search(x).is_err()) {
            return Err(Error::UnknownLabel(x.clone()));
        }
        let mut matrix = Vec::with_capacity(inputs.len());
        for x in &inputs {
            let row = rows
                .get(x)
                .ok_or_else(|| Error::Parse(format!("missing row for input {x:?}")))?;
            let mut dense = vec![0.0; outputs.len()];
            for (y, &p) in row {
                let j = outputs
                    .binary_search(y)
                    .map_err(|_| Error::UnknownLabel(y.clone()))?;
                if !p.is_finite() || !(0.0..=1.0 + MASS_TOL).contains(&p) {
                    return Err(Error::InvalidProbability {
                        label: format!("{x}->{y}"),
                        p,
                    });
                }
                dense[j] = p;
            }
            let sum: f64 = dense.iter().sum();
            if (sum - 1.0).abs() > MASS_TOL {
                return Err(Error::NotNormalized { sum });
            }
            matrix.push(dense);
        }
        Ok(Channel {
            base,
            inputs,
            outputs,
            matrix,
        })
    }

    /// Builds from a dense matrix, rows indexed like `inputs`.
    pub fn from_matrix(
        base: u32,
        inputs: &[&str],
        outputs: &[&str],
        matrix: &[Vec<f64>],
    ) -> Result<Self> {
        if matrix.len() != inputs.len() || matrix.iter().any(|r| r.len() != outputs.len()) {
            return Err(Error::Parse("matrix shape does not match labels".into()));
        }
        let rows = inputs
            .iter()
            .zip(matrix)
            .map(|(x, r)| {
                let row = outputs
                    .iter()
                    .zip(r)
                    .map(|(y, &p)| (y.to_string(), p))
                    .collect();
                (x.to_string(), row)
            })
            .collect();
        Channel::new(
            base,
            inputs.iter().map(|s| s.to_string()).collect(),
            outputs.iter().map(|s| s.to_string()).collect(),
            rows,
        )
    }

    pub fn identity(base: u32, labels: &[&str]) -> Result<Self> {
        let m: Vec<Vec<f64>> = (0..labels.len())
            .map(|i| {
                (0..labels.len())
                    .map(|j| if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Channel::from_matrix(base, labels, labels, &m)
    }

    /// Binary symmetric channel on labels `0`, `1` with crossover `eps`.
    pub fn bsc(base: u32, eps: f64) -> Result<Self> {
        Channel::from_matrix(
            base,
            &["0", "1"],
            &["0", "1"],
            &[vec![1.0 - eps, eps], vec![eps, 1.0 - eps]],
        )
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// `W(·|x)`.
    pub fn row(&self, x: &str) -> Option<&[f64]> {
        self.inputs
            .binary_search_by(|l| l.as_str().cmp(x))
            .ok()
            .map(|i| self.matrix[i].as_slice())
    }

    /// `Σ_x v(x) W(·|x)` for a vector in input order.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs.len()];
        for (row, &px) in self.matrix.iter().zip(v) {
            for (o, &w) in out.iter_mut().zip(row) {
                *o += px * w;
            }
        }
        out
    }

    /// `d` as a vector in input order; labels outside the input universe are
    /// an error.
    pub fn input_vector(&self, d: &FiniteDistribution) -> Result<Vec<f64>> {
        if d.base() != self.base {
            return Err(Error::BaseMismatch {
                left: d.base(),
                right: self.base,
            });
        }
        let mut v = vec![0.0; self.inputs.len()];
        for a in d.atoms() {
            match self.inputs.binary_search(&a.label) {
                Ok(i) => v[i] = a.p,
                Err(_) => {
                    return Err(Error::UniverseMismatch(format!(
                        "label {:?} is not a channel input",
                        a.label
                    )))
                }
            }
        }
        Ok(v)
    }

    fn output_distribution(&self, w: &[f64]) -> Result<FiniteDistribution> {
        FiniteDistribution::new(
            self.base,
            self.outputs
                .iter()
                .zip(w)
                .map(|(y, &p)| Atom::new(y.clone(), p))
                .collect(),
        )
    }
}

/// The output distribution `W d`.
pub fn push_forward(w: &Channel, d: &FiniteDistribution) -> Result<FiniteDistribution> {
    let v = w.input_vector(d)?;
    w.output_distribution(&w.apply(&v))
}

/// Minimum input entropy over grid inputs `V` whose output lies within
/// `delta` of the output of `x`.
pub fn channel_smooth_entropy_oracle(
    w: &Channel,
    x: &FiniteDistribution,
    delta: f64,
    measure: Measure,
    grid_step: f64,
) -> Result<SmoothEntropyResult> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "delta >= 0",
        });
    }
    grid_universe_check("channel oracle", w.inputs.len())?;
    let base = w.base;
    let xv = w.input_vector(x)?;
    let wx = w.apply(&xv);
    let radius = |v: &[f64]| {
        let wv = w.apply(v);
        let pairs = wv.iter().copied().zip(wx.iter().copied());
        match measure {
            Measure::Vd => tv_aligned(pairs),
            Measure::Div => kl_aligned(pairs, base),
        }
    };
    let best = grid_minimize(w.inputs.len(), base, grid_step, &xv, |v| {
        radius(v) <= delta + CUM_TOL
    })?;
    Ok(SmoothEntropyResult {
        delta,
        value: best.value,
        achieved_radius: radius(&best.probs),
        witness: Witness::Distribution(distribution_on(base, &w.inputs, &best.probs)?),
        method: Method::GridOracle,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    pub n: u32,
    pub grid_step: f64,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions {
            n: 1,
            grid_step: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub measure: Measure,
    /// Entropy of the smoothed input the code synthesises.
    pub witness_entropy: f64,
    pub code: SliceCode,
    /// Input-side verification of the code against `X`.
    pub source: VerificationReport,
    pub output_target: FiniteDistribution,
    pub output_induced: FiniteDistribution,
    /// `d(WX, WX̃)` or `D(WX̃‖WX)`.
    pub output_distance: f64,
    pub output_bound: f64,
    pub output_ok: bool,
    pub pass: bool,
}

/// Smooths `x` through the channel at radius `delta + gamma`, synthesises
/// the smoothed input with a slice code, and checks the channel output.
pub fn resolve_channel(
    w: &Channel,
    x: &FiniteDistribution,
    delta: f64,
    gamma: f64,
    measure: Measure,
    opts: ResolveOptions,
) -> Result<ChannelReport> {
    let smoothed = channel_smooth_entropy_oracle(w, x, delta + gamma, measure, opts.grid_step)?;
    let v = match smoothed.witness {
        Witness::Distribution(v) => v,
        _ => unreachable!("grid oracles return distributions"),
    };
    let code = match measure {
        Measure::Vd => build_slice_code(&v, opts.n, gamma, None)?,
        Measure::Div => build_slice_code_div(&v, opts.n, gamma, None)?,
    };
    let x_full = x.extend_universe(w.inputs.iter().map(String::as_str))?;
    let source = verify_code(&code, &x_full, delta, gamma)?;
    let output_target = push_forward(w, &x_full)?;
    let output_induced = push_forward(w, &source.induced)?;
    let s = f64::from(opts.n) * gamma;
    let (dist, bound) = match measure {
        Measure::Vd => (
            variational_distance(&output_target, &output_induced)?,
            delta + 2.0 * gamma + 0.5 * f64::from(w.base).powf(-s),
        ),
        Measure::Div => (
            kl_divergence(&output_induced, &output_target)?,
            divergence_bound(delta, gamma) + BOUND_TOL,
        ),
    };
    let output_ok = dist <= bound + BOUND_TOL;
    Ok(ChannelReport {
        measure,
        witness_entropy: smoothed.value,
        pass: source.pass && output_ok,
        code,
        source,
        output_target,
        output_induced,
        output_distance: dist,
        output_bound: bound,
        output_ok,
    })
}
