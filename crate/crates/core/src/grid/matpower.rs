//! Bridge from MATPOWER-style numeric tables to the native case format.
//!
//! Bus rows are either the full MATPOWER layout (`bus_i type Pd Qd ...`,
//! slack where `type == 3`) or a reduced `id Pd Qd` layout whose first row is
//! the slack. Branch rows start with `f t r x`; trailing columns are ignored.
//! `%` and `#` start comments, `;` and `[`/`]` are treated as whitespace so
//! matrix literals pasted from an `.m` file are accepted.

use super::{emit_case, parse_case, Branch, Bus, CaseError, InverterConfig, NetworkModel, Region};

#[derive(Debug, Clone, Default)]
pub struct ImportOptions {
    pub name: String,
    pub v_ref: Option<f64>,
    pub inverters: Vec<InverterConfig>,
    /// Region bus lists; when empty every bus lands in region 1.
    pub regions: Vec<Vec<usize>>,
}

fn rows(table: &str) -> Vec<(usize, Vec<&str>)> {
    table
        .lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let data = raw.split(['%', '#']).next().unwrap_or("");
            let cols: Vec<&str> = data
                .split(|c: char| c.is_whitespace() || c == ';' || c == '[' || c == ']' || c == ',')
                .filter(|t| !t.is_empty())
                .collect();
            (!cols.is_empty()).then_some((i + 1, cols))
        })
        .collect()
}

fn cell(tok: &str, line: usize, table: &str) -> Result<f64, CaseError> {
    tok.parse::<f64>().map_err(|_| {
        CaseError::Import(format!(
            "{table} table line {line}: non-numeric cell '{tok}'"
        ))
    })
}

fn id(tok: &str, line: usize, table: &str) -> Result<usize, CaseError> {
    let v = cell(tok, line, table)?;
    if v < 1.0 || v.fract() != 0.0 {
        return Err(CaseError::Import(format!(
            "{table} table line {line}: invalid bus id '{tok}'"
        )));
    }
    Ok(v as usize)
}

/// Converts bus and branch tables into native case text. The output is
/// re-parsed before returning so a successful import always round-trips.
pub fn import_matpower_tables(
    bus_table: &str,
    branch_table: &str,
    base_mva: f64,
    options: &ImportOptions,
) -> Result<String, CaseError> {
    let bus_rows = rows(bus_table);
    let branch_rows = rows(branch_table);
    if bus_rows.is_empty() {
        return Err(CaseError::Import("empty bus table".into()));
    }
    if branch_rows.is_empty() {
        return Err(CaseError::Import("empty branch table".into()));
    }

    let mut region_of = std::collections::HashMap::new();
    for (k, list) in options.regions.iter().enumerate() {
        for &b in list {
            region_of.entry(b).or_insert(k + 1);
        }
    }

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (pos, (line, cols)) in bus_rows.iter().enumerate() {
        let (bus_id, slack, pd, qd) = match cols.len() {
            3 => (
                id(cols[0], *line, "bus")?,
                pos == 0,
                cell(cols[1], *line, "bus")?,
                cell(cols[2], *line, "bus")?,
            ),
            n if n >= 4 => (
                id(cols[0], *line, "bus")?,
                cell(cols[1], *line, "bus")? == 3.0,
                cell(cols[2], *line, "bus")?,
                cell(cols[3], *line, "bus")?,
            ),
            n => {
                return Err(CaseError::Import(format!(
                    "bus table line {line}: missing columns (found {n})"
                )))
            }
        };
        buses.push(Bus {
            id: bus_id,
            region: region_of.get(&bus_id).copied().unwrap_or(1),
            slack,
            pd_mw: pd,
            qd_mvar: qd,
        });
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (line, cols) in &branch_rows {
        if cols.len() < 4 {
            return Err(CaseError::Import(format!(
                "branch table line {line}: missing columns (found {})",
                cols.len()
            )));
        }
        branches.push(Branch {
            from: id(cols[0], *line, "branch")?,
            to: id(cols[1], *line, "branch")?,
            r: cell(cols[2], *line, "branch")?,
            x: cell(cols[3], *line, "branch")?,
        });
    }

    let regions = if options.regions.is_empty() {
        vec![Region {
            id: 1,
            buses: buses.iter().map(|b| b.id).collect(),
        }]
    } else {
        options
            .regions
            .iter()
            .enumerate()
            .map(|(k, list)| Region {
                id: k + 1,
                buses: list.clone(),
            })
            .collect()
    };

    let model = NetworkModel {
        name: options.name.clone(),
        base_mva,
        v_ref: options.v_ref.unwrap_or(1.0),
        buses,
        branches,
        inverters: options.inverters.clone(),
        regions,
    };
    let text = emit_case(&model);
    parse_case(&text)?;
    Ok(text)
}
