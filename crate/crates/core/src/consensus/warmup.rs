use log::warn;

use super::table::{check_unique, NodeId, WeightTable};
use crate::error::{Error, Result};
use crate::simulator::{Network, NetworkSim};

/// Table change below which the automatic rule stops.
pub const DEFAULT_WARMUP_TOLERANCE: f64 = 1e-13;

/// How long the warm-up runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarmupRounds {
    /// Exactly this many rounds.
    Fixed(usize),
    /// Until every node's table moved by less than `tolerance` in one round,
    /// but at most `cap` rounds (`10·N·(1 + max delay)` when `None`).
    Auto { tolerance: f64, cap: Option<usize> },
}

impl Default for WarmupRounds {
    fn default() -> Self {
        WarmupRounds::Auto {
            tolerance: DEFAULT_WARMUP_TOLERANCE,
            cap: None,
        }
    }
}

/// What one node learned from its table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEstimate {
    pub id: NodeId,
    /// Number of keys in the table.
    pub network_size: usize,
    /// Value stored under the node's own id.
    pub weight: f64,
    /// `1 / (network_size · weight)`
    pub correction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmupResult {
    pub nodes: Vec<NodeEstimate>,
    pub rounds: usize,
    /// Largest per-node table change in the last round.
    pub last_change: f64,
    /// False when the automatic rule hit its cap.
    pub converged: bool,
}

impl WarmupResult {
    /// True when every node counted the same number of ids.
    pub fn sizes_agree(&self) -> bool {
        self.nodes
            .windows(2)
            .all(|w| w[0].network_size == w[1].network_size)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }

    pub fn corrections(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.correction).collect()
    }
}

/// Simulator loaded with the initial `{id_n: 1}` tables.
pub fn warmup_sim(network: Network, ids: &[NodeId]) -> Result<NetworkSim<WeightTable>> {
    check_unique(ids)?;
    let tables = ids.iter().map(|&id| WeightTable::unit(id)).collect();
    NetworkSim::new(network, tables)
}

/// Runs the id-table gossip and reads off each node's estimates.
pub fn run_warmup(
    sim: &mut NetworkSim<WeightTable>,
    ids: &[NodeId],
    rounds: WarmupRounds,
) -> Result<WarmupResult> {
    check_unique(ids)?;
    let n = sim.network().node_count();
    if ids.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} ids for {n} nodes",
            ids.len()
        )));
    }
    let (limit, tolerance) = match rounds {
        WarmupRounds::Fixed(k) => (k, None),
        WarmupRounds::Auto { tolerance, cap } => {
            let default_cap = 10 * n * (1 + sim.network().delays().max_delay());
            (cap.unwrap_or(default_cap), Some(tolerance))
        }
    };
    let mut last_change = f64::INFINITY;
    let mut done = 0;
    let mut converged = tolerance.is_none();
    while done < limit {
        let mut change = 0.0f64;
        sim.step(|inbox| {
            let next = inbox.mix();
            change = change.max(next.max_abs_diff(inbox.own));
            next
        });
        done += 1;
        last_change = change;
        if let Some(tol) = tolerance {
            if change < tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        warn!("warm-up stopped at its cap of {limit} rounds (last change {last_change:e})");
    }
    let nodes: Vec<NodeEstimate> = sim
        .states()
        .iter()
        .zip(ids)
        .map(|(table, &id)| {
            let network_size = table.len();
            let weight = table.get(id);
            NodeEstimate {
                id,
                network_size,
                weight,
                correction: 1.0 / (network_size as f64 * weight),
            }
        })
        .collect();
    if let Some((node, est)) = nodes.iter().enumerate().find(|(_, e)| !(e.weight > 0.0)) {
        return Err(Error::NonPositiveWeight {
            node,
            value: est.weight,
        });
    }
    let result = WarmupResult {
        nodes,
        rounds: done,
        last_change,
        converged,
    };
    if !result.sizes_agree() {
        warn!("nodes disagree on the network size after {done} warm-up rounds");
    }
    Ok(result)
}
