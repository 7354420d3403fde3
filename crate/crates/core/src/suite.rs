//! Seeded property suites over random instances, shared by the command-line
//! `verify-suite` and the test harnesses.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_smooth_entropy_oracle, push_forward, Channel, Measure};
use crate::dist::{log_k_e, FiniteDistribution};
use crate::encoder::{build_slice_code, build_slice_code_div, induced_distribution, sample_counts};
use crate::error::{Error, Result};
use crate::measures::{info_quantile, kl_divergence, renyi_entropy, variational_distance};
use crate::oracle::{g_delta_subset_oracle, h_delta_grid_oracle, h_div_grid_oracle};
use crate::smooth::{g_delta, h_delta, h_div_upper, pinsker_radius};
use crate::verify::{divergence_offset, verify_code};

/// Random probability vector of length `k`. Weights are powers of
/// exponential variates, so some draws are nearly uniform and others very
/// skewed.
pub fn random_probs<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let shape = rng.gen_range(0.5..4.0);
    let w: Vec<f64> = (0..k)
        .map(|_| (-(1.0 - rng.gen::<f64>()).ln()).powf(shape) + 1e-12)
        .collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Random distribution on `k` atoms labelled `x0..`.
pub fn random_distribution<R: Rng>(rng: &mut R, k: usize, base: u32) -> FiniteDistribution {
    FiniteDistribution::from_probs(base, &random_probs(rng, k)).expect("normalised weights")
}

fn random_distribution_sized<R: Rng>(
    rng: &mut R,
    sizes: std::ops::RangeInclusive<usize>,
    base: u32,
) -> FiniteDistribution {
    let k = rng.gen_range(sizes);
    random_distribution(rng, k, base)
}

/// Random channel with inputs `x0..` and outputs `y0..`.
pub fn random_channel<R: Rng>(rng: &mut R, k_in: usize, k_out: usize, base: u32) -> Channel {
    let matrix: Vec<Vec<f64>> = (0..k_in).map(|_| random_probs(rng, k_out)).collect();
    let inputs: Vec<String> = (0..k_in).map(|i| format!("x{i}")).collect();
    let outputs: Vec<String> = (0..k_out).map(|i| format!("y{i}")).collect();
    let ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    Channel::from_matrix(base, &ins, &outs, &matrix).expect("stochastic rows")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Description of the first failing case, if any.
    pub first_failure: Option<String>,
}

type Case = fn(&mut ChaCha8Rng) -> Result<std::result::Result<(), String>>;

pub const SUITES: &[(&str, usize, Case)] = &[
    ("pinsker", 500, pinsker),
    ("triangle", 500, triangle),
    ("renyi-monotone", 300, renyi_monotone),
    ("quantile-monotone", 300, quantile_monotone),
    ("gap-bounds", 200, gap_bounds),
    ("ho-yeung", 40, ho_yeung),
    ("lemma2", 30, lemma2),
    ("theorem4", 100, theorem4),
    ("theorem5", 100, theorem5),
    ("data-processing", 500, data_processing),
    ("channel-inclusion", 20, channel_inclusion),
    ("sampling", 5, sampling),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

/// Runs `cases` seeded cases of one suite (its default count if `None`).
pub fn run_suite(name: &str, cases: Option<usize>, seed: u64) -> Result<SuiteResult> {
    let &(name, default, case) = SUITES
        .iter()
        .find(|s| s.0 == name)
        .ok_or_else(|| Error::Parse(format!("unknown suite {name:?}")))?;
    let cases = cases.unwrap_or(default);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut first_failure = None;
    for i in 0..cases {
        if let Err(msg) = case(&mut rng)? {
            failures += 1;
            first_failure.get_or_insert_with(|| format!("case {i}: {msg}"));
        }
    }
    Ok(SuiteResult {
        name: name.to_string(),
        cases,
        failures,
        first_failure,
    })
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pick<T: Copy, R: Rng>(rng: &mut R, xs: &[T]) -> T {
    xs[rng.gen_range(0..xs.len())]
}

fn pinsker(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let base = rng.gen_range(2..=4);
    let k = rng.gen_range(1..=8);
    let p = random_distribution(rng, k, base);
    let q = random_distribution(rng, k, base);
    let d = variational_distance(&p, &q)?;
    let div = kl_divergence(&q, &p)?;
    Ok(check(
        2.0 * d * d / f64::from(base).ln() <= div + 1e-12,
        || format!("d={d} D={div} K={base}"),
    ))
}

fn triangle(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let k = rng.gen_range(1..=10);
    let p = random_distribution(rng, k, 2);
    let q = random_distribution_sized(rng, 1..=10, 2);
    let r = random_distribution(rng, k, 2);
    let pq = variational_distance(&p, &q)?;
    let qp = variational_distance(&q, &p)?;
    let pr = variational_distance(&p, &r)?;
    let qr = variational_distance(&q, &r)?;
    Ok(check(pq == qp && pr <= pq + qr + 1e-12, || {
        format!("d(p,q)={pq} d(q,p)={qp} d(p,r)={pr} d(q,r)={qr}")
    }))
}

fn renyi_monotone(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let base = rng.gen_range(2..=3);
    let d = random_distribution_sized(rng, 1..=10, base);
    let alphas = [0.1, 0.3, 0.7, 0.999, 1.001, 1.5, 2.0, 4.0, 10.0];
    let vals: Vec<f64> = alphas
        .iter()
        .map(|&a| renyi_entropy(&d, a))
        .collect::<Result<_>>()?;
    Ok(check(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12), || {
        format!("{vals:?}")
    }))
}

fn quantile_monotone(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let d = random_distribution_sized(rng, 1..=10, 2);
    let deltas = [0.0, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
    let vals: Vec<f64> = deltas
        .iter()
        .map(|&x| info_quantile(&d, x).map(|q| q.value))
        .collect::<Result<_>>()?;
    Ok(check(vals.windows(2).all(|w| w[1] <= w[0]), || {
        format!("{vals:?}")
    }))
}

fn gap_bounds(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let base = rng.gen_range(2..=3);
    let k = rng.gen_range(1..=20);
    let d = random_distribution(rng, k, base);
    let gap = log_k_e(base) / std::f64::consts::E;
    for delta in [0.0, 0.1, 0.3, 0.6] {
        let g = g_delta(&d, delta)?.value;
        let h = h_delta(&d, delta)?.value;
        if h > g + gap + 1e-9 || g > h + 2.0 * gap + 1e-9 {
            return Ok(Err(format!("k={k} delta={delta} g={g} h={h}")));
        }
        if k <= 12 {
            let exact = g_delta_subset_oracle(&d, delta)?.value;
            if (exact - g).abs() > 1e-9 {
                return Ok(Err(format!(
                    "k={k} delta={delta} g={g} subset oracle={exact}"
                )));
            }
        }
    }
    Ok(Ok(()))
}

fn ho_yeung(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let d = random_distribution_sized(rng, 1..=3, 2);
    let delta = rng.gen_range(0.0..0.95);
    let h = h_delta(&d, delta)?.value;
    let grid = h_delta_grid_oracle(&d, delta, 0.005)?.value;
    Ok(check(h <= grid + 1e-9 && grid - h <= 0.02, || {
        format!("delta={delta} h={h} grid={grid}")
    }))
}

fn lemma2(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let base = rng.gen_range(2..=3);
    let d = random_distribution(rng, 3, base);
    let delta = rng.gen_range(0.0..0.9);
    let h = h_delta(&d, delta)?.value;
    let div = h_div_grid_oracle(&d, pinsker_radius(delta, base), 0.005)?.value;
    Ok(check(h <= div + 1e-9, || {
        format!("delta={delta} h={h} div-ball grid={div}")
    }))
}

fn theorem4(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let base = rng.gen_range(2..=3);
    let x = random_distribution_sized(rng, 1..=12, base);
    let delta = pick(rng, &[0.0, 0.1, 0.3]);
    let gamma = pick(rng, &[0.2, 0.5]);
    let n = rng.gen_range(1..=6);
    let v = h_delta(&x, delta + gamma)?;
    let v = v.witness.distribution().expect("finite input");
    let code = build_slice_code(v, n, gamma, None)?;
    let r = verify_code(&code, &x, delta, gamma)?;
    Ok(check(r.pass, || {
        format!("delta={delta} gamma={gamma} n={n}: {r:?}")
    }))
}

/// A divergence-code configuration: source, smoothed target, threshold and
/// blocklength chosen so that the finite-offset estimate is within bound.
pub struct DivergenceCase {
    pub x: FiniteDistribution,
    pub delta: f64,
    pub gamma: f64,
    pub n: u32,
    pub c_n: f64,
    pub v: FiniteDistribution,
}

pub fn random_divergence_case<R: Rng>(rng: &mut R) -> Result<DivergenceCase> {
    let base = rng.gen_range(2..=3);
    let x = random_distribution_sized(rng, 1..=10, base);
    let delta = pick(rng, &[0.0, 0.1, 0.3]);
    let gamma = rng.gen_range(0.05..=0.5);
    let v = h_div_upper(&x, delta + gamma)?
        .witness
        .distribution()
        .expect("finite input")
        .clone();
    let s = divergence_offset(delta, gamma, base).expect("offset exists for gamma <= 1/2");
    let n = ((s / gamma).ceil() as u32).max(1);
    // truncate up to a random share of the γ budget
    let t = rng.gen_range(0.0..=gamma);
    let c_n = info_quantile(&v, t)?.value / f64::from(n);
    Ok(DivergenceCase {
        x,
        delta,
        gamma,
        n,
        c_n,
        v,
    })
}

fn theorem5(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let c = random_divergence_case(rng)?;
    let code = build_slice_code_div(&c.v, c.n, c.gamma, Some(c.c_n))?;
    let r = verify_code(&code, &c.x, c.delta, c.gamma)?;
    Ok(check(r.pass, || {
        format!("delta={} gamma={} n={}: {r:?}", c.delta, c.gamma, c.n)
    }))
}

fn data_processing(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let base = rng.gen_range(2..=3);
    let k_in = rng.gen_range(1..=5);
    let k_out = rng.gen_range(1..=5);
    let p = random_distribution(rng, k_in, base);
    let q = random_distribution(rng, k_in, base);
    let w = random_channel(rng, k_in, k_out, base);
    let (wp, wq) = (push_forward(&w, &p)?, push_forward(&w, &q)?);
    let tv = (
        variational_distance(&wp, &wq)?,
        variational_distance(&p, &q)?,
    );
    let kl = (kl_divergence(&wp, &wq)?, kl_divergence(&p, &q)?);
    Ok(check(tv.0 <= tv.1 + 1e-12 && kl.0 <= kl.1 + 1e-12, || {
        format!("tv {tv:?} kl {kl:?}")
    }))
}

fn channel_inclusion(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let k_in = rng.gen_range(1..=3);
    let k_out = rng.gen_range(1..=4);
    let w = random_channel(rng, k_in, k_out, 2);
    let x = random_distribution(rng, k_in, 2);
    let delta = rng.gen_range(0.0..0.6);
    let step = 0.01;
    let through = channel_smooth_entropy_oracle(&w, &x, delta, Measure::Vd, step)?.value;
    let direct = h_delta_grid_oracle(&x, delta, step)?.value;
    let through_d = channel_smooth_entropy_oracle(&w, &x, delta, Measure::Div, step)?.value;
    let direct_d = h_div_grid_oracle(&x, delta, step)?.value;
    Ok(check(
        through <= direct + 1e-9 && through_d <= direct_d + 1e-9,
        || format!("vd {through} vs {direct}; div {through_d} vs {direct_d}"),
    ))
}

/// Whether empirical counts sit inside `z`-sigma multinomial bands.
pub fn within_bands(
    induced: &FiniteDistribution,
    counts: &std::collections::BTreeMap<String, u64>,
    draws: u64,
    z: f64,
) -> std::result::Result<(), String> {
    let nf = draws as f64;
    for a in induced.atoms() {
        let c = counts.get(&a.label).copied().unwrap_or(0) as f64;
        let mean = nf * a.p;
        let sd = (nf * a.p * (1.0 - a.p)).sqrt();
        if (c - mean).abs() > z * sd + 1e-9 {
            return Err(format!(
                "{}: count {c}, expected {mean:.1} ± {:.1}",
                a.label,
                z * sd
            ));
        }
    }
    if let Some(l) = counts.keys().find(|l| induced.prob(l).is_none()) {
        return Err(format!("decoded unknown label {l:?}"));
    }
    Ok(())
}

fn sampling(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let v = random_distribution_sized(rng, 1..=6, 2);
    let n = rng.gen_range(1..=4);
    let gamma = rng.gen_range(0.1..0.6);
    let code = build_slice_code(&v, n, gamma, None)?;
    let induced = induced_distribution(&code)?;
    let draws = 20_000;
    let counts = sample_counts(&code, draws, rng.gen());
    Ok(within_bands(&induced, &counts, draws as u64, 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_channel_rows_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_channel(&mut rng, 3, 12, 2);
        assert_eq!(w.outputs().len(), 12);
        for x in w.inputs() {
            let s: f64 = w.row(x).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_suite_runs_a_few_cases() {
        for name in suite_names() {
            let r = run_suite(name, Some(2), 3).unwrap();
            assert_eq!(r.cases, 2);
            assert_eq!(r.failures, 0, "{r:?}");
        }
        assert!(run_suite("nope", None, 0).is_err());
    }
}
