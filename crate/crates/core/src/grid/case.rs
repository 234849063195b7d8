//! Native sectioned-text case format.
//!
//! ```text
//! # comment
//! [meta]
//! name = toy6
//! base_mva = 1
//! v_ref = 1
//! [bus]
//! # id region slack pd_mw qd_mvar
//! 1 1 1 0 0
//! [branch]
//! # from to r_pu x_pu
//! 1 2 0.02 0.04
//! [pv]
//! # bus s_mva p_max_mw p_min_mw beta
//! [regions]
//! 1: 1 2
//! ```
//!
//! Numbers are written with the shortest decimal representation that parses
//! back to the same `f64`, so emit/parse round-trips are bit-exact.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Branch, Bus, CaseError, InverterConfig, NetworkModel, Region};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Meta,
    Bus,
    Branch,
    Pv,
    Regions,
}

fn schema(line: usize, msg: impl Into<String>) -> CaseError {
    CaseError::Schema {
        line,
        msg: msg.into(),
    }
}

fn num<T: FromStr>(tok: &str, line: usize, field: &str) -> Result<T, CaseError> {
    tok.parse::<T>()
        .map_err(|_| schema(line, format!("{field}: cannot parse '{tok}'")))
}

fn columns<'a>(
    text: &'a str,
    line: usize,
    n: usize,
    section: &str,
) -> Result<Vec<&'a str>, CaseError> {
    let cols: Vec<&str> = text.split_whitespace().collect();
    if cols.len() != n {
        return Err(schema(
            line,
            format!("[{section}] expects {n} columns, found {}", cols.len()),
        ));
    }
    Ok(cols)
}

/// Parses and structurally validates a case file. Region coverage and
/// inverter placement are checked separately by
/// [`validate_partition`](super::validate_partition).
pub fn parse_case(text: &str) -> Result<NetworkModel, CaseError> {
    let mut section = Section::None;
    let mut name = None;
    let mut base_mva = None;
    let mut v_ref = 1.0;
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut inverters = Vec::new();
    let mut regions = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if content.starts_with('[') {
            section = match content {
                "[meta]" => Section::Meta,
                "[bus]" => Section::Bus,
                "[branch]" => Section::Branch,
                "[pv]" => Section::Pv,
                "[regions]" => Section::Regions,
                other => return Err(schema(line, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(schema(line, "data before first section")),
            Section::Meta => {
                let (key, value) = content
                    .split_once('=')
                    .ok_or_else(|| schema(line, "expected key = value"))?;
                let value = value.trim();
                match key.trim() {
                    "name" => name = Some(value.to_string()),
                    "base_mva" => base_mva = Some(num::<f64>(value, line, "base_mva")?),
                    "v_ref" => v_ref = num::<f64>(value, line, "v_ref")?,
                    other => return Err(schema(line, format!("unknown meta key {other}"))),
                }
            }
            Section::Bus => {
                let c = columns(content, line, 5, "bus")?;
                let slack = match c[2] {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(schema(
                            line,
                            format!("slack flag must be 0 or 1, found '{other}'"),
                        ))
                    }
                };
                let id = num::<usize>(c[0], line, "id")?;
                if buses.iter().any(|b: &Bus| b.id == id) {
                    return Err(CaseError::DuplicateBus(id));
                }
                buses.push(Bus {
                    id,
                    region: num(c[1], line, "region")?,
                    slack,
                    pd_mw: num(c[3], line, "pd_mw")?,
                    qd_mvar: num(c[4], line, "qd_mvar")?,
                });
            }
            Section::Branch => {
                let c = columns(content, line, 4, "branch")?;
                branches.push(Branch {
                    from: num(c[0], line, "from")?,
                    to: num(c[1], line, "to")?,
                    r: num(c[2], line, "r_pu")?,
                    x: num(c[3], line, "x_pu")?,
                });
            }
            Section::Pv => {
                let c = columns(content, line, 5, "pv")?;
                inverters.push(InverterConfig {
                    bus: num(c[0], line, "bus")?,
                    s_mva: num(c[1], line, "s_mva")?,
                    p_max_mw: num(c[2], line, "p_max_mw")?,
                    p_min_mw: num(c[3], line, "p_min_mw")?,
                    beta: num(c[4], line, "beta")?,
                });
            }
            Section::Regions => {
                let (id, list) = content
                    .split_once(':')
                    .ok_or_else(|| schema(line, "expected region_id: bus list"))?;
                let buses = list
                    .split_whitespace()
                    .map(|t| num::<usize>(t, line, "region bus"))
                    .collect::<Result<Vec<_>, _>>()?;
                regions.push(Region {
                    id: num(id.trim(), line, "region id")?,
                    buses,
                });
            }
        }
    }

    let base_mva = base_mva.ok_or_else(|| schema(0, "[meta] base_mva is required"))?;
    if !(base_mva > 0.0) {
        return Err(schema(0, "base_mva must be positive"));
    }
    if buses.is_empty() {
        return Err(schema(0, "no buses declared"));
    }
    if regions.is_empty() {
        return Err(schema(0, "no regions declared"));
    }
    buses.sort_by_key(|b| b.id);
    let model = NetworkModel {
        name: name.unwrap_or_default(),
        base_mva,
        v_ref,
        buses,
        branches,
        inverters,
        regions,
    };
    model.check_structure()?;
    Ok(model)
}

/// Writes a model back into the native case format.
pub fn emit_case(model: &NetworkModel) -> String {
    let mut out = String::new();
    // writing into a String cannot fail
    let _ = writeln!(out, "[meta]");
    let _ = writeln!(out, "name = {}", model.name);
    let _ = writeln!(out, "base_mva = {}", model.base_mva);
    let _ = writeln!(out, "v_ref = {}", model.v_ref);
    let _ = writeln!(out, "\n[bus]\n# id region slack pd_mw qd_mvar");
    for b in &model.buses {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            b.id,
            b.region,
            u8::from(b.slack),
            b.pd_mw,
            b.qd_mvar
        );
    }
    let _ = writeln!(out, "\n[branch]\n# from to r_pu x_pu");
    for br in &model.branches {
        let _ = writeln!(out, "{} {} {} {}", br.from, br.to, br.r, br.x);
    }
    let _ = writeln!(out, "\n[pv]\n# bus s_mva p_max_mw p_min_mw beta");
    for inv in &model.inverters {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            inv.bus, inv.s_mva, inv.p_max_mw, inv.p_min_mw, inv.beta
        );
    }
    let _ = writeln!(out, "\n[regions]");
    for r in &model.regions {
        let list: Vec<String> = r.buses.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(out, "{}: {}", r.id, list.join(" "));
    }
    out
}
