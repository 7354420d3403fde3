//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resolv_core::channel::{push_forward, resolve_channel, Channel, Measure, ResolveOptions};
use resolv_core::dist::log_k_e;
use resolv_core::encoder::{
    build_slice_code, build_slice_code_div, induced_distribution, sample_counts,
};
use resolv_core::oracle::{g_delta_subset_oracle, h_delta_grid_oracle, h_div_grid_oracle};
use resolv_core::second_order::{first_order_rate, second_order_series};
use resolv_core::smooth::{g_delta, h_delta, pinsker_radius};
use resolv_core::suite::{
    random_channel, random_distribution, random_divergence_case, within_bands,
};
use resolv_core::verify::verify_code;
use resolv_core::{entropy, iid_power, kl_divergence, variational_distance, FiniteDistribution};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ho_yeung_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_gap = 0.0f64;
    for i in 0..500 {
        let k = rng.gen_range(1..=3);
        let d = random_distribution(&mut rng, k, 2);
        let delta = rng.gen_range(0.0..0.95);
        let h = h_delta(&d, delta).unwrap().value;
        let grid = h_delta_grid_oracle(&d, delta, 0.005).unwrap().value;
        if h > grid + 1e-9 {
            return Err(format!("case {i}: h={h} above grid oracle {grid}"));
        }
        if grid - h > 0.02 {
            return Err(format!(
                "case {i}: grid oracle {grid} is {} above h",
                grid - h
            ));
        }
        worst_gap = worst_gap.max(grid - h);
    }
    Ok(format!(
        "500 instances, largest oracle - h = {worst_gap:.2e}"
    ))
}

fn gap_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut certified = 0;
    for i in 0..1000 {
        let base = rng.gen_range(2..=3);
        let k = rng.gen_range(1..=20);
        let d = random_distribution(&mut rng, k, base);
        let gap = log_k_e(base) / std::f64::consts::E;
        for delta in [0.0, 0.1, 0.3, 0.6] {
            let g = g_delta(&d, delta).unwrap().value;
            let h = h_delta(&d, delta).unwrap().value;
            if h > g + gap + 1e-9 {
                return Err(format!("case {i}, delta {delta}: h={h} > g={g} + gap"));
            }
            if g > h + 2.0 * gap + 1e-9 {
                return Err(format!("case {i}, delta {delta}: g={g} > h={h} + 2 gap"));
            }
            if k <= 15 {
                let exact = g_delta_subset_oracle(&d, delta).unwrap().value;
                if (exact - g).abs() > 1e-9 {
                    return Err(format!(
                        "case {i}, delta {delta}: g={g}, subset oracle {exact}"
                    ));
                }
                certified += 1;
            }
        }
    }
    Ok(format!(
        "4000 (d, delta) pairs, {certified} certified by subset enumeration"
    ))
}

fn variational_code_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for i in 0..200 {
        let base = rng.gen_range(2..=3);
        let k = rng.gen_range(1..=12);
        let x = random_distribution(&mut rng, k, base);
        let delta = [0.0, 0.1, 0.3][rng.gen_range(0..3)];
        let gamma = [0.2, 0.5][rng.gen_range(0..2)];
        let n = rng.gen_range(1..=8);
        let v = h_delta(&x, delta + gamma).unwrap();
        let v = v.witness.distribution().unwrap();
        let code = build_slice_code(v, n, gamma, None).unwrap();
        let r = verify_code(&code, &x, delta, gamma).unwrap();
        let ok = r.per_atom_dev_ok
            && r.distance_ok
            && r.target_premise
            && r.target_distance_ok
            && r.length_ok;
        if !ok {
            return Err(format!(
                "case {i} (n={n}, delta={delta}, gamma={gamma}): {r:?}"
            ));
        }
    }
    Ok("200 codes: per-atom deviation, d(X~,V), d(X,X~) and E[L] within bounds".into())
}

fn divergence_code_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut premised = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..200 {
        let c = random_divergence_case(&mut rng).unwrap();
        let code = build_slice_code_div(&c.v, c.n, c.gamma, Some(c.c_n)).unwrap();
        let r = verify_code(&code, &c.x, c.delta, c.gamma).unwrap();
        if r.pointwise_ratio_ok != Some(true) {
            return Err(format!("case {i}: pointwise ratio bound violated: {r:?}"));
        }
        if r.divergence_premise == Some(true) {
            premised += 1;
            let d = r.divergence_to_target.unwrap();
            let b = r.divergence_bound.unwrap();
            worst = worst.max(d - b);
            if r.divergence_ok != Some(true) {
                return Err(format!("case {i}: D(X~||X)={d} above bound {b}"));
            }
        }
    }
    Ok(format!(
        "200 codes, {premised} with D(V||X) <= delta+gamma; max D - bound = {worst:.3}"
    ))
}

fn example_one() -> Outcome {
    let b = FiniteDistribution::from_probs(2, &[0.2, 0.8]).unwrap();
    let g = iid_power(&b, 4096).unwrap();
    let h1 = entropy(&b);
    let mut devs = Vec::new();
    for delta in [0.1, 0.25, 0.5] {
        let rate = h_delta(&g, delta).unwrap().value / 4096.0;
        let dev = (rate - (1.0 - delta) * h1).abs();
        if dev > 0.05 {
            return Err(format!(
                "delta {delta}: rate {rate} vs {}",
                (1.0 - delta) * h1
            ));
        }
        devs.push(format!("{delta}: {dev:.4}"));
    }
    Ok(format!("n=4096 deviations {}", devs.join(", ")))
}

fn second_order_constant() -> Outcome {
    let b = FiniteDistribution::from_probs(2, &[0.2, 0.8]).unwrap();
    let delta = 0.5;
    let s =
        second_order_series(&b, delta, first_order_rate(&b, delta), &[400, 1600, 6400]).unwrap();
    let gaps: Vec<f64> = s
        .points
        .iter()
        .map(|p| (p.term - s.gaussian_limit).abs())
        .collect();
    let last = gaps[2];
    if (s.gaussian_limit + 0.31915).abs() > 1e-5 {
        return Err(format!("limit {}", s.gaussian_limit));
    }
    if last > 0.05 {
        return Err(format!(
            "n=6400 term {} is {last} from the limit",
            s.points[2].term
        ));
    }
    if gaps.windows(2).any(|w| w[1] > w[0]) {
        return Err(format!("|term - limit| not nonincreasing: {gaps:?}"));
    }
    Ok(format!(
        "limit {:.5}; |term - limit| = {:.4}, {:.4}, {:.4}",
        s.gaussian_limit, gaps[0], gaps[1], gaps[2]
    ))
}

fn lemma2_inclusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for i in 0..200 {
        let base = rng.gen_range(2..=3);
        let d = random_distribution(&mut rng, 3, base);
        let delta = rng.gen_range(0.0..0.9);
        let h = h_delta(&d, delta).unwrap().value;
        let div = h_div_grid_oracle(&d, pinsker_radius(delta, base), 0.005)
            .unwrap()
            .value;
        if h > div + 1e-9 {
            return Err(format!(
                "case {i}: h={h} above divergence-ball grid value {div}"
            ));
        }
    }
    Ok("200 three-atom instances".into())
}

fn channel_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for i in 0..500 {
        let base = rng.gen_range(2..=3);
        let k_in = rng.gen_range(1..=6);
        let k_out = rng.gen_range(1..=6);
        let p = random_distribution(&mut rng, k_in, base);
        let q = random_distribution(&mut rng, k_in, base);
        let w = random_channel(&mut rng, k_in, k_out, base);
        let (wp, wq) = (push_forward(&w, &p).unwrap(), push_forward(&w, &q).unwrap());
        let tv = variational_distance(&wp, &wq).unwrap()
            <= variational_distance(&p, &q).unwrap() + 1e-12;
        let kl = kl_divergence(&wp, &wq).unwrap() <= kl_divergence(&p, &q).unwrap() + 1e-12;
        if !(tv && kl) {
            return Err(format!(
                "triple {i}: data processing violated (tv {tv}, kl {kl})"
            ));
        }
    }
    for i in 0..20 {
        let k = rng.gen_range(1..=3);
        let x = random_distribution(&mut rng, k, 2);
        let labels: Vec<String> = x.labels().map(String::from).collect();
        let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
        let id = Channel::identity(2, &labels).unwrap();
        let delta = rng.gen_range(0.0..0.4);
        let gamma = rng.gen_range(0.1..0.5);
        let n = rng.gen_range(1..=4);
        let opts = ResolveOptions {
            n,
            grid_step: 0.005,
        };
        for measure in [Measure::Vd, Measure::Div] {
            let r = resolve_channel(&id, &x, delta, gamma, measure, opts).unwrap();
            let (src, out_bits) = match measure {
                Measure::Vd => {
                    let v = h_delta_grid_oracle(&x, delta + gamma, 0.005).unwrap();
                    let code = build_slice_code(v.witness.distribution().unwrap(), n, gamma, None)
                        .unwrap();
                    let src = verify_code(&code, &x, delta, gamma).unwrap();
                    let bits = src.distance_to_target.to_bits();
                    (src, bits)
                }
                Measure::Div => {
                    let v = h_div_grid_oracle(&x, delta + gamma, 0.005).unwrap();
                    let code =
                        build_slice_code_div(v.witness.distribution().unwrap(), n, gamma, None)
                            .unwrap();
                    let src = verify_code(&code, &x, delta, gamma).unwrap();
                    let bits = src.divergence_to_target.unwrap().to_bits();
                    (src, bits)
                }
            };
            if r.source != src || r.output_distance.to_bits() != out_bits {
                return Err(format!(
                    "identity instance {i} ({measure:?}) differs from the source pipeline"
                ));
            }
        }
    }
    Ok("500 data-processing triples; 40 identity-channel runs bit-identical".into())
}

fn sampling_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let draws = 100_000u64;
    for i in 0..10 {
        let k = rng.gen_range(2..=8);
        let v = random_distribution(&mut rng, k, 2);
        let n = rng.gen_range(1..=4);
        let gamma = rng.gen_range(0.1..0.6);
        let code = build_slice_code(&v, n, gamma, None).unwrap();
        let induced = induced_distribution(&code).unwrap();
        let counts = sample_counts(&code, draws as usize, 9000 + i);
        within_bands(&induced, &counts, draws, 3.0).map_err(|e| format!("code {i}: {e}"))?;
    }
    Ok("10 codes x 1e5 draws within 3-sigma bands".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "1 majorizing construction vs grid oracle",
            Duration::from_secs(60),
            ho_yeung_exactness,
        ),
        ("2 G/H gap bounds", Duration::from_secs(120), gap_bounds),
        (
            "3 variational code bounds",
            Duration::from_secs(60),
            variational_code_bounds,
        ),
        (
            "4 divergence code bounds",
            Duration::from_secs(60),
            divergence_code_bounds,
        ),
        (
            "5 Bernoulli(0.2) smooth-entropy rate",
            Duration::from_secs(30),
            example_one,
        ),
        (
            "6 second-order Gaussian constant",
            Duration::from_secs(120),
            second_order_constant,
        ),
        (
            "7 divergence-ball inclusion",
            Duration::from_secs(120),
            lemma2_inclusion,
        ),
        (
            "8 channel data processing and identity reduction",
            Duration::from_secs(60),
            channel_reduction,
        ),
        (
            "9 sampling consistency",
            Duration::from_secs(60),
            sampling_consistency,
        ),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let t = Instant::now();
        let outcome = run();
        let took = t.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if took <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over time budget {budget:?}")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "acceptance {name}: {status} ({:.2}s) {detail}",
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
