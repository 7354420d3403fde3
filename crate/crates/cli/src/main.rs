#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use resolv_core::channel::{resolve_channel, Measure, ResolveOptions};
use resolv_core::encoder::{build_with, induced_distribution, sample_counts, CodeParams, Variant};
use resolv_core::io::{
    num, parse_channel, parse_source, result_record, round_json, second_order_csv,
    typeclass_cap_from_env, Source,
};
use resolv_core::measures::{entropy, info_quantile};
use resolv_core::oracle::{g_delta_subset_oracle, h_delta_grid_oracle, h_div_grid_oracle};
use resolv_core::second_order::{first_order_rate, second_order_series_with_cap};
use resolv_core::smooth::{g_delta, h_delta, h_div_upper, Method, SmoothEntropyResult, Witness};
use resolv_core::suite::{run_suite, suite_names, within_bands};
use resolv_core::verify::verify_code;
use resolv_core::FiniteDistribution;

#[derive(Parser)]
#[command(
    name = "resolv",
    version,
    about = "Smooth entropies and resolvability codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    Vd,
    Div,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Vd => Measure::Vd,
            MeasureArg::Div => Measure::Div,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    /// Variational-ball smooth entropy.
    H,
    /// Minimum partial entropy over high-probability sets.
    G,
    /// Subset-enumeration oracle for `g`.
    GOracle,
    /// Grid oracle for `h`.
    HOracle,
    /// Conditional-distribution upper bound on the divergence-ball entropy.
    HdivUpper,
    /// Grid oracle for the divergence-ball entropy.
    HdivOracle,
    /// Shannon entropy (ignores delta).
    Entropy,
    /// Information-spectrum quantile.
    Quantile,
}

impl Quantity {
    fn name(self) -> &'static str {
        match self {
            Quantity::H => "h",
            Quantity::G => "g",
            Quantity::GOracle => "g-oracle",
            Quantity::HOracle => "h-oracle",
            Quantity::HdivUpper => "hdiv-upper",
            Quantity::HdivOracle => "hdiv-oracle",
            Quantity::Entropy => "entropy",
            Quantity::Quantile => "quantile",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Smooth-entropy quantities of a distribution.
    Smooth {
        #[arg(long)]
        dist: PathBuf,
        /// One or more radii, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "h")]
        quantity: Vec<Quantity>,
        #[arg(long, default_value_t = 0.005)]
        grid_step: f64,
        /// Include the witness in each record.
        #[arg(long)]
        witness: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a slice code for the smoothed source and verify it.
    Code {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, value_enum, default_value = "vd")]
        measure: MeasureArg,
        /// Spectrum threshold per symbol (default keeps the full support).
        #[arg(long)]
        c_n: Option<f64>,
        /// Decode this many seeded coin draws.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolvability through a channel.
    Channel {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "vd")]
        measure: MeasureArg,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, default_value_t = 0.005)]
        grid_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalised second-order terms over blocklengths.
    SecondOrder {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        delta: f64,
        /// First-order rate; defaults to (1 - delta) H(X).
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        n_list: Vec<u32>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded property suites.
    VerifySuite {
        /// Suites to run (default: all).
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
        /// Cases per suite (default: each suite's own count).
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Bad flags, unreadable or malformed input.
enum Failure {
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl From<resolv_core::Error> for Failure {
    fn from(e: resolv_core::Error) -> Self {
        Failure::Input(e.into())
    }
}

/// `Ok(false)`: the command ran but a checked bound failed.
type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_source(path: &Path) -> anyhow::Result<Source> {
    let cap = typeclass_cap_from_env()?;
    parse_source(&read(path)?, cap).with_context(|| format!("loading {}", path.display()))
}

fn load_finite(path: &Path) -> anyhow::Result<FiniteDistribution> {
    match load_source(path)? {
        Source::Finite(d) => Ok(d),
        Source::Grouped(_) => bail!(
            "{}: this command needs an explicit distribution",
            path.display()
        ),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, mut v: Value) -> anyhow::Result<()> {
    round_json(&mut v);
    emit(out, &format!("{}\n", serde_json::to_string_pretty(&v)?))
}

fn check_unit(name: &str, x: f64) -> anyhow::Result<()> {
    if !(0.0..1.0).contains(&x) {
        bail!("--{name} must lie in [0, 1), got {x}");
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> anyhow::Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        bail!("--{name} must be positive, got {x}");
    }
    Ok(())
}

fn check_step(x: f64) -> anyhow::Result<()> {
    if !(x > 0.0 && x <= 0.5) {
        bail!("--grid-step must lie in (0, 0.5], got {x}");
    }
    Ok(())
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Smooth {
            dist,
            delta,
            quantity,
            grid_step,
            witness,
            format,
            out,
        } => cmd_smooth(
            &dist,
            &delta,
            &quantity,
            grid_step,
            witness,
            format,
            out.as_deref(),
        ),
        Command::Code {
            dist,
            delta,
            gamma,
            n,
            measure,
            c_n,
            samples,
            seed,
            out,
        } => cmd_code(
            &dist,
            delta,
            gamma,
            n,
            measure.into(),
            c_n,
            samples,
            seed,
            out.as_deref(),
        ),
        Command::Channel {
            channel,
            dist,
            delta,
            gamma,
            measure,
            n,
            grid_step,
            out,
        } => {
            check_unit("delta", delta)?;
            check_positive("gamma", gamma)?;
            check_step(grid_step)?;
            let w = parse_channel(&read(&channel)?)
                .with_context(|| format!("loading {}", channel.display()))?;
            let x = load_finite(&dist)?;
            let r = resolve_channel(
                &w,
                &x,
                delta,
                gamma,
                measure.into(),
                ResolveOptions { n, grid_step },
            )?;
            let pass = r.pass;
            emit_json(
                out.as_deref(),
                serde_json::to_value(&r).map_err(anyhow::Error::from)?,
            )?;
            Ok(pass)
        }
        Command::SecondOrder {
            dist,
            delta,
            rate,
            n_list,
            format,
            out,
        } => {
            check_unit("delta", delta)?;
            if n_list.contains(&0) {
                return Err(anyhow!("--n-list entries must be positive").into());
            }
            if n_list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(anyhow!("--n-list must be strictly increasing").into());
            }
            let base = load_finite(&dist)?;
            let rate = rate.unwrap_or_else(|| first_order_rate(&base, delta));
            let cap = typeclass_cap_from_env()?;
            let s = second_order_series_with_cap(&base, delta, rate, &n_list, cap)?;
            match format {
                Format::Csv => emit(out.as_deref(), &second_order_csv(&s))?,
                Format::Json => emit_json(
                    out.as_deref(),
                    serde_json::to_value(&s).map_err(anyhow::Error::from)?,
                )?,
            }
            Ok(true)
        }
        Command::VerifySuite {
            suite,
            cases,
            seed,
            out,
        } => {
            let names: Vec<String> = if suite.is_empty() {
                suite_names().into_iter().map(String::from).collect()
            } else {
                suite
            };
            let known = suite_names();
            if let Some(bad) = names.iter().find(|n| !known.contains(&n.as_str())) {
                return Err(anyhow!("unknown suite {bad:?}; known: {}", known.join(", ")).into());
            }
            let mut results = Vec::new();
            for name in &names {
                results.push(run_suite(name, cases, seed)?);
            }
            let pass = results.iter().all(|r| r.failures == 0);
            emit_json(
                out.as_deref(),
                json!({ "seed": seed, "pass": pass, "suites": results }),
            )?;
            Ok(pass)
        }
    }
}

fn smooth_one(
    src: &Source,
    q: Quantity,
    delta: f64,
    step: f64,
) -> anyhow::Result<SmoothEntropyResult> {
    let needs_finite = || match src {
        Source::Finite(d) => Ok(d),
        Source::Grouped(_) => Err(anyhow!(
            "quantity {} needs an explicit distribution, not an i.i.d. power",
            q.name()
        )),
    };
    let in_unit = || check_unit("delta", delta);
    let r = match q {
        Quantity::H => {
            in_unit()?;
            match src {
                Source::Finite(d) => h_delta(d, delta)?,
                Source::Grouped(g) => h_delta(g, delta)?,
            }
        }
        Quantity::G => {
            in_unit()?;
            match src {
                Source::Finite(d) => g_delta(d, delta)?,
                Source::Grouped(g) => g_delta(g, delta)?,
            }
        }
        Quantity::GOracle => {
            in_unit()?;
            g_delta_subset_oracle(needs_finite()?, delta)?
        }
        Quantity::HOracle => {
            in_unit()?;
            h_delta_grid_oracle(needs_finite()?, delta, step)?
        }
        Quantity::HdivUpper => h_div_upper(needs_finite()?, delta)?,
        Quantity::HdivOracle => h_div_grid_oracle(needs_finite()?, delta, step)?,
        Quantity::Entropy => {
            let (value, witness) = match src {
                Source::Finite(d) => (entropy(d), Witness::Distribution(d.clone())),
                Source::Grouped(g) => (entropy(g), Witness::Levels(g.groups().to_vec())),
            };
            SmoothEntropyResult {
                delta,
                value,
                witness,
                achieved_radius: 0.0,
                method: Method::HoYeung,
            }
        }
        Quantity::Quantile => {
            in_unit()?;
            let value = match src {
                Source::Finite(d) => info_quantile(d, delta)?.value,
                Source::Grouped(g) => info_quantile(g, delta)?.value,
            };
            SmoothEntropyResult {
                delta,
                value,
                witness: Witness::Subset(Vec::new()),
                achieved_radius: 0.0,
                method: Method::GreedySet,
            }
        }
    };
    Ok(r)
}

fn cmd_smooth(
    dist: &Path,
    deltas: &[f64],
    quantities: &[Quantity],
    step: f64,
    witness: bool,
    format: Format,
    out: Option<&Path>,
) -> Outcome {
    if deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(anyhow!("--delta values must be finite and nonnegative").into());
    }
    check_step(step)?;
    let src = load_source(dist)?;
    let mut records = Vec::new();
    for &q in quantities {
        for &delta in deltas {
            let r = smooth_one(&src, q, delta, step)?;
            let mut rec = result_record(q.name(), &r, witness);
            if matches!(q, Quantity::Entropy | Quantity::Quantile) {
                let m = rec.as_object_mut().expect("records are objects");
                m.remove("method");
                m.remove("achieved_radius");
                if !witness || q == Quantity::Quantile {
                    m.remove("witness");
                }
            }
            records.push(rec);
        }
    }
    match format {
        Format::Json => emit_json(out, Value::Array(records))?,
        Format::Csv => {
            let mut text = String::from("quantity,delta,value,method,achieved_radius\n");
            for r in &mut records {
                round_json(r);
                let f = |k: &str| match &r[k] {
                    Value::Null => String::new(),
                    Value::String(s) => s.clone(),
                    v => v.to_string(),
                };
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    f("quantity"),
                    f("delta"),
                    f("value"),
                    f("method"),
                    f("achieved_radius")
                ));
            }
            emit(out, &text)?;
        }
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_code(
    dist: &Path,
    delta: f64,
    gamma: f64,
    n: u32,
    measure: Measure,
    c_n: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Outcome {
    check_positive("gamma", gamma)?;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(anyhow!("--delta must be nonnegative").into());
    }
    if n == 0 {
        return Err(anyhow!("--n must be positive").into());
    }
    if samples.is_some() && seed.is_none() {
        return Err(anyhow!("--samples needs --seed").into());
    }
    let x = load_finite(dist)?;
    let (v, variant) = match measure {
        Measure::Vd => {
            check_unit("delta + gamma", delta + gamma)?;
            let r = h_delta(&x, delta + gamma)?;
            (r.witness, Variant::Variational)
        }
        Measure::Div => (h_div_upper(&x, delta + gamma)?.witness, Variant::Divergence),
    };
    let v = v
        .distribution()
        .expect("finite inputs give distributions")
        .clone();
    let mut params = CodeParams::new(n, gamma);
    params.c_n = c_n;
    let code = build_with(&v, params, variant)?;
    let report = verify_code(&code, &x, delta, gamma)?;
    let mut report_json = serde_json::to_value(&report).map_err(anyhow::Error::from)?;
    round_json(&mut report_json);
    let mut doc = json!({
        "code": serde_json::to_value(&code).map_err(anyhow::Error::from)?,
        "report": report_json,
    });
    if let (Some(draws), Some(seed)) = (samples, seed) {
        let counts = sample_counts(&code, draws, seed);
        let induced = induced_distribution(&code)?;
        let bands = within_bands(&induced, &counts, draws as u64, 3.0);
        doc["samples"] = json!({
            "seed": seed,
            "draws": draws,
            "counts": counts,
            "within_3_sigma": bands.is_ok(),
        });
    }
    doc["expected_length"] = num(report.expected_length);
    emit(
        out,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)?
        ),
    )?;
    Ok(report.pass)
}
