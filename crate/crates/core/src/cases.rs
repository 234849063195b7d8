//! Feeders shipped with the crate.

use crate::grid::{parse_case, NetworkModel};

pub const IEEE33: &str = include_str!("../cases/ieee33.case");
pub const TWO_BUS: &str = include_str!("../cases/two_bus.case");
pub const TOY6: &str = include_str!("../cases/toy6.case");
pub const IEEE33_BUS_TABLE: &str = include_str!("../cases/ieee33_bus.tbl");
pub const IEEE33_BRANCH_TABLE: &str = include_str!("../cases/ieee33_branch.tbl");

pub fn ieee33() -> NetworkModel {
    parse_case(IEEE33).expect("shipped case parses")
}

pub fn two_bus() -> NetworkModel {
    parse_case(TWO_BUS).expect("shipped case parses")
}

pub fn toy6() -> NetworkModel {
    parse_case(TOY6).expect("shipped case parses")
}

/// Resolves `builtin:<name>` references, otherwise reads the file.
pub fn load(path: &str) -> Result<NetworkModel, crate::Error> {
    let text = match path.strip_prefix("builtin:") {
        Some("ieee33") => IEEE33.to_string(),
        Some("two_bus") => TWO_BUS.to_string(),
        Some("toy6") => TOY6.to_string(),
        Some(other) => {
            return Err(crate::Error::Config(format!(
                "unknown builtin case '{other}'"
            )))
        }
        None => std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?,
    };
    Ok(parse_case(&text)?)
}
