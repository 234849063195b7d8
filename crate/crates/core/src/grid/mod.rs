//! Feeder data model: buses, series branches, PV inverters and the region
//! partition used to assign inverters to agents.
//!
//! Everything electrical is kept in per unit on `base_mva` except the bus
//! loads and inverter ratings, which stay in MW / MVAr / MVA as written in the
//! case file. [`NetworkModel::to_pu`] converts.

mod case;
mod matpower;

pub use case::{emit_case, parse_case};
pub use matpower::{import_matpower_tables, ImportOptions};

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
    #[error("bus ids must be dense 1..{expected}, found {found}")]
    SparseIds { expected: usize, found: usize },
    #[error("missing slack bus")]
    MissingSlack,
    #[error("more than one slack bus ({0} and {1})")]
    MultipleSlack(usize, usize),
    #[error("unknown bus {bus} referenced by {what}")]
    UnknownBus { bus: usize, what: String },
    #[error("degenerate impedance on branch {from}-{to}")]
    DegenerateBranch { from: usize, to: usize },
    #[error("disconnected graph: bus {0} unreachable from slack")]
    Disconnected(usize),
    #[error("network is not radial: {branches} branches for {buses} buses")]
    NotRadial { buses: usize, branches: usize },
    #[error("invalid inverter at bus {bus}: {msg}")]
    Inverter { bus: usize, msg: String },
    #[error("overlapping regions: bus {bus} in regions {first} and {second}")]
    OverlappingRegions {
        bus: usize,
        first: usize,
        second: usize,
    },
    #[error("bus {0} is not covered by any region")]
    UncoveredBus(usize),
    #[error("bus {bus} declares region {declared} but is listed in region {listed}")]
    RegionMismatch {
        bus: usize,
        declared: usize,
        listed: usize,
    },
    #[error("region {0} has no inverter")]
    RegionWithoutInverter(usize),
    #[error("import: {0}")]
    Import(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub region: usize,
    pub slack: bool,
    pub pd_mw: f64,
    pub qd_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

impl Branch {
    /// Series conductance r / (r² + x²).
    pub fn g(&self) -> f64 {
        self.r / (self.r * self.r + self.x * self.x)
    }

    /// Series susceptance −x / (r² + x²).
    pub fn b(&self) -> f64 {
        -self.x / (self.r * self.r + self.x * self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverterConfig {
    pub bus: usize,
    pub s_mva: f64,
    pub p_max_mw: f64,
    pub p_min_mw: f64,
    pub beta: f64,
}

impl InverterConfig {
    /// Largest |q| the inverter may dispatch while producing `p_mw`:
    /// min(β·s, √(s² − p²)).
    pub fn q_limit(&self, p_mw: f64) -> f64 {
        let p = p_mw.clamp(0.0, self.s_mva);
        let headroom = (self.s_mva * self.s_mva - p * p).max(0.0).sqrt();
        headroom.min(self.beta * self.s_mva)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub buses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub name: String,
    pub base_mva: f64,
    pub v_ref: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub inverters: Vec<InverterConfig>,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: usize,
    pub buses: usize,
    pub branches: usize,
    pub inverters: usize,
}

impl NetworkModel {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Zero-based index of the slack bus.
    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.slack)
            .expect("validated network has a slack bus")
    }

    pub fn to_pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    /// Inverters located in `region`, in ascending bus order.
    pub fn region_inverters(&self, region: &Region) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .inverters
            .iter()
            .enumerate()
            .filter(|(_, inv)| region.buses.contains(&inv.bus))
            .map(|(i, _)| i)
            .collect();
        idx.sort_by_key(|&i| self.inverters[i].bus);
        idx
    }

    /// Structural checks applied by the parser: dense ids, one slack bus,
    /// known endpoints, non-degenerate impedances, connected radial topology
    /// and sane inverter ratings.
    pub(crate) fn check_structure(&self) -> Result<(), CaseError> {
        let n = self.buses.len();
        let mut seen = vec![false; n + 1];
        for bus in &self.buses {
            if bus.id == 0 || bus.id > n {
                return Err(CaseError::SparseIds {
                    expected: n,
                    found: bus.id,
                });
            }
            if seen[bus.id] {
                return Err(CaseError::DuplicateBus(bus.id));
            }
            seen[bus.id] = true;
        }
        let mut slack = self.buses.iter().filter(|b| b.slack);
        let first = slack.next().ok_or(CaseError::MissingSlack)?;
        if let Some(second) = slack.next() {
            return Err(CaseError::MultipleSlack(first.id, second.id));
        }
        for br in &self.branches {
            for end in [br.from, br.to] {
                if end == 0 || end > n {
                    return Err(CaseError::UnknownBus {
                        bus: end,
                        what: format!("branch {}-{}", br.from, br.to),
                    });
                }
            }
            if br.r < 0.0 || (br.r == 0.0 && br.x == 0.0) || !br.r.is_finite() || !br.x.is_finite()
            {
                return Err(CaseError::DegenerateBranch {
                    from: br.from,
                    to: br.to,
                });
            }
        }
        for (k, inv) in self.inverters.iter().enumerate() {
            if self.inverters[..k].iter().any(|o| o.bus == inv.bus) {
                return Err(CaseError::Inverter {
                    bus: inv.bus,
                    msg: "more than one inverter on the bus".into(),
                });
            }
            if inv.bus == 0 || inv.bus > n {
                return Err(CaseError::UnknownBus {
                    bus: inv.bus,
                    what: "pv entry".into(),
                });
            }
            if !(inv.beta > 0.0 && inv.beta <= 1.0) {
                return Err(CaseError::Inverter {
                    bus: inv.bus,
                    msg: format!("beta {} outside (0, 1]", inv.beta),
                });
            }
            if inv.p_min_mw > inv.p_max_mw {
                return Err(CaseError::Inverter {
                    bus: inv.bus,
                    msg: "p_min exceeds p_max".into(),
                });
            }
            if inv.s_mva <= 0.0 {
                return Err(CaseError::Inverter {
                    bus: inv.bus,
                    msg: "non-positive apparent capacity".into(),
                });
            }
        }
        for region in &self.regions {
            for &b in &region.buses {
                if b == 0 || b > n {
                    return Err(CaseError::UnknownBus {
                        bus: b,
                        what: format!("region {}", region.id),
                    });
                }
            }
        }
        // connectivity from the slack bus
        let adj = self.adjacency();
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([first.id - 1]);
        visited[first.id - 1] = true;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &adj[i] {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return Err(CaseError::Disconnected(i + 1));
        }
        if self.branches.len() + 1 != n {
            return Err(CaseError::NotRadial {
                buses: n,
                branches: self.branches.len(),
            });
        }
        Ok(())
    }

    /// Zero-based adjacency lists of (neighbour, branch index).
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (k, br) in self.branches.iter().enumerate() {
            adj[br.from - 1].push((br.to - 1, k));
            adj[br.to - 1].push((br.from - 1, k));
        }
        adj
    }

    /// For each bus (zero-based), the branch feeding it from the slack side.
    pub fn parent_branches(&self) -> Vec<Option<usize>> {
        let adj = self.adjacency();
        let root = self.slack_index();
        let mut parent = vec![None; self.buses.len()];
        let mut visited = vec![false; self.buses.len()];
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for &(j, k) in &adj[i] {
                if !visited[j] {
                    visited[j] = true;
                    parent[j] = Some(k);
                    queue.push_back(j);
                }
            }
        }
        parent
    }
}

/// Checks that the regions partition the bus set, agree with each bus's
/// declared region and each hold at least one inverter. Branches are counted
/// in the region of their downstream bus.
pub fn validate_partition(network: &NetworkModel) -> Result<Vec<RegionSummary>, CaseError> {
    let n = network.n_buses();
    let mut owner: Vec<Option<usize>> = vec![None; n + 1];
    for region in &network.regions {
        let unique: BTreeSet<usize> = region.buses.iter().copied().collect();
        for &b in &unique {
            if let Some(first) = owner[b] {
                return Err(CaseError::OverlappingRegions {
                    bus: b,
                    first,
                    second: region.id,
                });
            }
            owner[b] = Some(region.id);
        }
    }
    for bus in &network.buses {
        match owner[bus.id] {
            None => return Err(CaseError::UncoveredBus(bus.id)),
            Some(listed) if listed != bus.region => {
                return Err(CaseError::RegionMismatch {
                    bus: bus.id,
                    declared: bus.region,
                    listed,
                })
            }
            _ => {}
        }
    }
    let parents = network.parent_branches();
    let mut summaries = Vec::with_capacity(network.regions.len());
    for region in &network.regions {
        let inverters = network
            .inverters
            .iter()
            .filter(|inv| owner[inv.bus] == Some(region.id))
            .count();
        if inverters == 0 {
            return Err(CaseError::RegionWithoutInverter(region.id));
        }
        let branches = region
            .buses
            .iter()
            .filter(|&&b| parents[b - 1].is_some())
            .count();
        summaries.push(RegionSummary {
            region: region.id,
            buses: region.buses.len(),
            branches,
            inverters,
        });
    }
    Ok(summaries)
}
