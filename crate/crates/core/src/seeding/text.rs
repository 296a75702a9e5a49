//! Line-oriented text form of instances and plans.
//!
//! ```text
//! raal-seeding-instance v1
//! bins <E>
//! costs <λ_0> … <λ_{M-1}>
//! capacities <β_0> … <β_{G-1}>
//! upsilon <Υ>
//! candidate <e_1>,…,<e_d> <a_0> … <a_{M-1}>      (one line per candidate)
//! ```
//!
//! ```text
//! raal-seeding-plan v1
//! objective <value>
//! nodes <count>
//! optimal <true|false>
//! select <candidate> <level> <worker>             (one line per selection)
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! bits. Blank lines and lines starting with `#` are ignored.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use super::{SeedingInstance, SeedingPlan, Selection, SolverStats};
use crate::gridding::BinEncoding;
use crate::{Error, Result};

const INSTANCE_HEADER: &str = "raal-seeding-instance v1";
const PLAN_HEADER: &str = "raal-seeding-plan v1";

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn write_instance(instance: &SeedingInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{INSTANCE_HEADER}");
    let _ = writeln!(out, "bins {}", instance.total_bins());
    let _ = writeln!(out, "costs {}", join(instance.costs(), " "));
    let _ = writeln!(out, "capacities {}", join(instance.capacities(), " "));
    let _ = writeln!(out, "upsilon {}", instance.upsilon());
    let m = instance.levels();
    for (i, enc) in instance.encodings().iter().enumerate() {
        let _ = writeln!(
            out,
            "candidate {} {}",
            join(enc.active(), ","),
            join(&instance.values()[i * m..(i + 1) * m], " ")
        );
    }
    out
}

pub fn write_plan(plan: &SeedingPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PLAN_HEADER}");
    let _ = writeln!(out, "objective {}", plan.objective());
    let _ = writeln!(out, "nodes {}", plan.stats().nodes);
    let _ = writeln!(out, "optimal {}", plan.stats().proven_optimal);
    for s in plan.selections() {
        let _ = writeln!(out, "select {} {} {}", s.candidate, s.level, s.worker);
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_num<T: FromStr>(line: usize, token: &str) -> Result<T> {
    token.parse().map_err(|_| parse_err(line, format!("cannot parse `{token}`")))
}

fn parse_list<T: FromStr>(line: usize, tokens: &[&str]) -> Result<Vec<T>> {
    tokens.iter().map(|t| parse_num(line, t)).collect()
}

/// Meaningful lines with their 1-based numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| (n, l.split_whitespace().collect()))
}

fn expect_header<'a>(
    lines: &mut impl Iterator<Item = (usize, Vec<&'a str>)>,
    header: &str,
) -> Result<()> {
    match lines.next() {
        Some((_, tokens)) if tokens.join(" ") == header => Ok(()),
        Some((n, _)) => Err(parse_err(n, format!("expected `{header}`"))),
        None => Err(parse_err(0, "empty input")),
    }
}

pub fn parse_instance(text: &str) -> Result<SeedingInstance> {
    let mut lines = records(text);
    expect_header(&mut lines, INSTANCE_HEADER)?;
    let mut bins = None;
    let mut costs = None;
    let mut capacities = None;
    let mut upsilon = None;
    let mut encodings = Vec::new();
    let mut values = Vec::new();
    let mut last = 0;
    for (n, tokens) in lines {
        last = n;
        match tokens[0] {
            "bins" if tokens.len() == 2 => bins = Some(parse_num::<usize>(n, tokens[1])?),
            "costs" => costs = Some(parse_list::<f64>(n, &tokens[1..])?),
            "capacities" => capacities = Some(parse_list::<f64>(n, &tokens[1..])?),
            "upsilon" if tokens.len() == 2 => upsilon = Some(parse_num::<f64>(n, tokens[1])?),
            "candidate" => {
                let total = bins.ok_or_else(|| parse_err(n, "candidate before `bins`"))?;
                let m = costs.as_ref().map(Vec::len).ok_or_else(|| parse_err(n, "candidate before `costs`"))?;
                if tokens.len() != 2 + m {
                    return Err(parse_err(n, format!("candidate needs bins and {m} values")));
                }
                let active = parse_list::<usize>(n, &tokens[1].split(',').collect::<Vec<_>>())?;
                let enc = BinEncoding::from_active(active, total).map_err(|e| parse_err(n, e.to_string()))?;
                encodings.push(enc);
                values.extend(parse_list::<f64>(n, &tokens[2..])?);
            }
            other => return Err(parse_err(n, format!("unexpected record `{other}`"))),
        }
    }
    let costs = costs.ok_or_else(|| parse_err(last, "missing `costs`"))?;
    let capacities = capacities.ok_or_else(|| parse_err(last, "missing `capacities`"))?;
    let upsilon = upsilon.ok_or_else(|| parse_err(last, "missing `upsilon`"))?;
    SeedingInstance::new(encodings, values, costs, capacities, upsilon)
}

/// Parses a plan; the objective is recomputed from `instance` and must
/// match the recorded one bit for bit.
pub fn parse_plan(text: &str, instance: &SeedingInstance) -> Result<SeedingPlan> {
    let mut lines = records(text);
    expect_header(&mut lines, PLAN_HEADER)?;
    let mut objective = None;
    let mut stats = SolverStats::default();
    let mut selections = Vec::new();
    let mut last = 0;
    for (n, tokens) in lines {
        last = n;
        match (tokens[0], tokens.len()) {
            ("objective", 2) => objective = Some((n, parse_num::<f64>(n, tokens[1])?)),
            ("nodes", 2) => stats.nodes = parse_num(n, tokens[1])?,
            ("optimal", 2) => stats.proven_optimal = parse_num(n, tokens[1])?,
            ("select", 4) => selections.push(Selection {
                candidate: parse_num(n, tokens[1])?,
                level: parse_num(n, tokens[2])?,
                worker: parse_num(n, tokens[3])?,
            }),
            (other, _) => return Err(parse_err(n, format!("unexpected record `{other}`"))),
        }
    }
    let (n, recorded) = objective.ok_or_else(|| parse_err(last, "missing `objective`"))?;
    let plan = SeedingPlan::new(instance, selections, stats);
    if plan.objective().to_bits() != recorded.to_bits() {
        return Err(parse_err(n, "objective does not match the selections"));
    }
    Ok(plan)
}
