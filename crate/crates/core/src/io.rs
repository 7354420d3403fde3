//! File formats: distribution and channel JSON, result records, CSV series.

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::channel::Channel;
use crate::dist::{Atom, FiniteDistribution};
use crate::error::{Error, Result};
use crate::grouped::{iid_power_with_cap, GroupedDistribution, Level, DEFAULT_TYPECLASS_CAP};
use crate::second_order::{SecondOrderPoint, SecondOrderSeries};
use crate::smooth::{SmoothEntropyResult, Witness};

pub const TYPECLASS_CAP_ENV: &str = "RESOLV_TYPECLASS_CAP";

/// A loaded distribution file.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Finite(FiniteDistribution),
    Grouped(GroupedDistribution),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistFile {
    base: Option<u32>,
    atoms: Option<Vec<Atom>>,
    iid: Option<Box<DistFile>>,
    n: Option<u32>,
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn finite_from(f: DistFile, inherited: Option<u32>) -> Result<FiniteDistribution> {
    let base = f
        .base
        .or(inherited)
        .ok_or_else(|| Error::Parse("missing \"base\"".into()))?;
    if f.iid.is_some() || f.n.is_some() {
        return Err(Error::Parse(
            "nested i.i.d. powers are not supported".into(),
        ));
    }
    let atoms = f
        .atoms
        .ok_or_else(|| Error::Parse("missing \"atoms\"".into()))?;
    FiniteDistribution::new(base, atoms)
}

/// Reads `{"base": K, "atoms": [...]}` or `{"base": K, "iid": {...}, "n": N}`.
/// The `iid` body is a single-letter distribution; its `base` may be omitted.
pub fn parse_source(text: &str, cap: u64) -> Result<Source> {
    let f: DistFile = serde_json::from_str(text).map_err(parse_err)?;
    match (f.iid, f.n) {
        (None, None) => Ok(Source::Finite(finite_from(
            DistFile {
                base: f.base,
                atoms: f.atoms,
                iid: None,
                n: None,
            },
            None,
        )?)),
        (Some(inner), Some(n)) => {
            if f.atoms.is_some() {
                return Err(Error::Parse("\"atoms\" and \"iid\" are exclusive".into()));
            }
            let base = finite_from(*inner, f.base)?;
            if let Some(b) = f.base {
                if b != base.base() {
                    return Err(Error::BaseMismatch {
                        left: b,
                        right: base.base(),
                    });
                }
            }
            Ok(Source::Grouped(iid_power_with_cap(&base, n, cap)?))
        }
        _ => Err(Error::Parse(
            "\"iid\" and \"n\" must be given together".into(),
        )),
    }
}

pub fn parse_distribution(text: &str) -> Result<FiniteDistribution> {
    match parse_source(text, DEFAULT_TYPECLASS_CAP)? {
        Source::Finite(d) => Ok(d),
        Source::Grouped(_) => Err(Error::Parse(
            "expected an explicit distribution, found an i.i.d. power".into(),
        )),
    }
}

pub fn distribution_json(d: &FiniteDistribution) -> String {
    serde_json::to_string_pretty(d).expect("distributions serialize")
}

pub fn parse_channel(text: &str) -> Result<Channel> {
    serde_json::from_str(text).map_err(|e| {
        // surface validation errors raised while building the channel
        Error::Parse(e.to_string())
    })
}

/// The type-class cap, from the environment if set.
pub fn typeclass_cap_from_env() -> Result<u64> {
    match std::env::var(TYPECLASS_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{TYPECLASS_CAP_ENV}={v:?} is not a count"))),
        Err(_) => Ok(DEFAULT_TYPECLASS_CAP),
    }
}

/// Rounds to 9 significant digits; non-finite values pass through.
pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Formats with 9 significant digits, shortest form.
pub fn fmt9(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{}", sig9(x))
    }
}

/// Applies [`sig9`] to every floating-point number in a JSON tree.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(sig9(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// JSON has no infinities; they are written as strings.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(fmt9(x)))
}

fn levels_json(levels: &[Level]) -> Value {
    Value::Array(
        levels
            .iter()
            .map(|l| {
                json!({
                    "ln_p": num(l.ln_p),
                    "count": l.count.to_str_radix(10),
                    "mass": num(l.mass),
                })
            })
            .collect(),
    )
}

pub fn witness_json(w: &Witness) -> Value {
    match w {
        Witness::Distribution(d) => serde_json::to_value(d).expect("distributions serialize"),
        Witness::Subset(labels) => json!({ "subset": labels }),
        Witness::Levels(levels) => json!({ "levels": levels_json(levels) }),
    }
}

/// `{quantity, delta, value, method, achieved_radius, witness?}`.
pub fn result_record(quantity: &str, r: &SmoothEntropyResult, with_witness: bool) -> Value {
    let mut m = Map::new();
    m.insert("quantity".into(), json!(quantity));
    m.insert("delta".into(), num(r.delta));
    m.insert("value".into(), num(r.value));
    m.insert("method".into(), json!(r.method.as_str()));
    m.insert("achieved_radius".into(), num(r.achieved_radius));
    if with_witness {
        m.insert("witness".into(), witness_json(&r.witness));
    }
    Value::Object(m)
}

pub const SECOND_ORDER_HEADER: &str = "n,term,gaussian_limit";

/// CSV with one row per blocklength and a closing `inf` row holding the limit.
pub fn second_order_csv(s: &SecondOrderSeries) -> String {
    let mut out = String::from(SECOND_ORDER_HEADER);
    out.push('\n');
    let lim = fmt9(s.gaussian_limit);
    for p in &s.points {
        out.push_str(&format!("{},{},{}\n", p.n, fmt9(p.term), lim));
    }
    out.push_str(&format!("inf,{lim},{lim}\n"));
    out
}

/// Parses [`second_order_csv`] output back into points and the limit.
pub fn parse_second_order_csv(text: &str) -> Result<(Vec<SecondOrderPoint>, f64)> {
    let mut lines = text.lines();
    if lines.next() != Some(SECOND_ORDER_HEADER) {
        return Err(Error::Parse("missing second-order CSV header".into()));
    }
    let mut points = Vec::new();
    let mut limit = None;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!("bad CSV row {line:?}")));
        }
        let f = |s: &str| s.parse::<f64>().map_err(parse_err);
        if cols[0] == "inf" {
            limit = Some(f(cols[2])?);
        } else {
            points.push(SecondOrderPoint {
                n: cols[0].parse().map_err(parse_err)?,
                term: f(cols[1])?,
            });
        }
    }
    let limit = limit.ok_or_else(|| Error::Parse("missing limit row".into()))?;
    Ok((points, limit))
}
