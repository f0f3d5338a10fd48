use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::digraph::{tarjan, Digraph};
use crate::error::{Error, Result};

/// Row sums must match one to this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Per-link integer delays in rounds, keyed by `(from, to)`.
///
/// Only positive delays are stored; a missing key means the link delivers
/// in the same round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DelaySpec {
    delays: BTreeMap<(usize, usize), usize>,
}

impl DelaySpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the delay of `from -> to`; zero removes any previous entry.
    pub fn insert(&mut self, from: usize, to: usize, delay: usize) {
        if delay == 0 {
            self.delays.remove(&(from, to));
        } else {
            self.delays.insert((from, to), delay);
        }
    }

    pub fn get(&self, from: usize, to: usize) -> usize {
        self.delays.get(&(from, to)).copied().unwrap_or(0)
    }

    /// Delayed links in ascending `(from, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        self.delays.iter().map(|(&e, &d)| (e, d))
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    /// Largest delay over all links (B1); zero when undelayed.
    pub fn max_delay(&self) -> usize {
        self.delays.values().copied().max().unwrap_or(0)
    }

    /// Number of relay nodes the delays expand into.
    pub fn total_delay(&self) -> usize {
        self.delays.values().sum()
    }

    /// Every delayed link must be an existing, non-self-loop edge of `g`.
    pub fn check_against(&self, g: &Digraph) -> Result<()> {
        for &(from, to) in self.delays.keys() {
            if from == to {
                return Err(Error::InvalidDelays(format!(
                    "self-loop {from} cannot be delayed"
                )));
            }
            if from >= g.node_count() || to >= g.node_count() || !g.has_edge(from, to) {
                return Err(Error::InvalidDelays(format!(
                    "no edge {from} -> {to} in the graph"
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<((usize, usize), usize)> for DelaySpec {
    fn from_iter<I: IntoIterator<Item = ((usize, usize), usize)>>(iter: I) -> Self {
        let mut spec = Self::new();
        for ((from, to), delay) in iter {
            spec.insert(from, to, delay);
        }
        spec
    }
}

/// A chain of relay nodes standing in for one delayed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayChain {
    pub from: usize,
    pub to: usize,
    /// Index of the first relay; the chain occupies `first..first + len`.
    pub first: usize,
    pub len: usize,
}

/// A row-stochastic gossip matrix, `W[(n, m)]` being the weight node `n`
/// puts on what it receives from `m`.
///
/// Indices `0..real_count` are computing nodes; anything above is a relay
/// introduced by [`GossipMatrix::extend_with_delays`].
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix {
    entries: DMatrix<f64>,
    real_count: usize,
    chains: Vec<RelayChain>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    RealCountOutOfRange { real_count: usize, size: usize },
    NonFinite { row: usize, col: usize },
    Negative { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    NonPositiveDiagonal { node: usize, value: f64 },
    EdgeNotInGraph { row: usize, col: usize },
    NotStronglyConnected,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            Violation::RealCountOutOfRange { real_count, size } => {
                write!(f, "real node count {real_count} not in 1..={size}")
            }
            Violation::NonFinite { row, col } => write!(f, "entry ({row}, {col}) is not finite"),
            Violation::Negative { row, col, value } => {
                write!(f, "entry ({row}, {col}) = {value} is negative")
            }
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Violation::NonPositiveDiagonal { node, value } => {
                write!(f, "diagonal of real node {node} is {value}")
            }
            Violation::EdgeNotInGraph { row, col } => {
                write!(
                    f,
                    "entry ({row}, {col}) is positive but edge {col} -> {row} is absent"
                )
            }
            Violation::NotStronglyConnected => write!(f, "support graph is not strongly connected"),
        }
    }
}

impl GossipMatrix {
    /// Wraps a dense matrix, rejecting it if [`GossipMatrix::validate`] finds
    /// anything wrong.
    pub fn from_dense(entries: DMatrix<f64>, real_count: usize) -> Result<Self> {
        let w = Self {
            entries,
            real_count,
            chains: Vec::new(),
        };
        let violations = w.validate();
        if let Some(first) = violations.first() {
            return Err(Error::InvalidMatrix(format!(
                "{first} ({} violation(s) in total)",
                violations.len()
            )));
        }
        Ok(w)
    }

    /// `W[(n, m)] = 1 / in_degree(n)` for every in-neighbour `m` of `n`,
    /// the node itself included.
    pub fn inverse_indegree(g: &Digraph) -> Result<Self> {
        let n = g.node_count();
        if let Some(v) = (0..n).find(|&v| !g.has_edge(v, v)) {
            return Err(Error::InvalidGraph(format!("node {v} has no self-loop")));
        }
        if !g.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        let mut entries = DMatrix::zeros(n, n);
        for row in 0..n {
            let weight = 1.0 / g.in_degree(row) as f64;
            for &col in g.in_neighbors(row) {
                entries[(row, col)] = weight;
            }
        }
        Ok(Self {
            entries,
            real_count: n,
            chains: Vec::new(),
        })
    }

    /// Total node count, relays included.
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn real_count(&self) -> usize {
        self.real_count
    }

    pub fn is_extended(&self) -> bool {
        self.size() > self.real_count
    }

    pub fn chains(&self) -> &[RelayChain] {
        &self.chains
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// Smallest strictly positive entry.
    pub fn min_positive_entry(&self) -> f64 {
        self.entries
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// `W^k`, computed by repeated squaring.
    pub fn power(&self, k: usize) -> DMatrix<f64> {
        let n = self.size();
        let mut result = DMatrix::identity(n, n);
        let mut base = self.entries.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Checks every structural invariant. Relay nodes are exempt from the
    /// positive-diagonal rule since they only forward.
    pub fn validate(&self) -> Vec<Violation> {
        let (rows, cols) = self.entries.shape();
        if rows != cols {
            return vec![Violation::NotSquare { rows, cols }];
        }
        let mut out = Vec::new();
        if self.real_count == 0 || self.real_count > rows {
            out.push(Violation::RealCountOutOfRange {
                real_count: self.real_count,
                size: rows,
            });
        }
        for row in 0..rows {
            let mut sum = 0.0;
            for col in 0..cols {
                let v = self.entries[(row, col)];
                if !v.is_finite() {
                    out.push(Violation::NonFinite { row, col });
                } else if v < 0.0 {
                    out.push(Violation::Negative { row, col, value: v });
                }
                sum += v;
            }
            if !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
                out.push(Violation::RowSum { row, sum });
            }
        }
        for node in 0..self.real_count.min(rows) {
            let v = self.entries[(node, node)];
            if !(v > 0.0) {
                out.push(Violation::NonPositiveDiagonal { node, value: v });
            }
        }
        if !self.support_strongly_connected() {
            out.push(Violation::NotStronglyConnected);
        }
        out
    }

    /// [`GossipMatrix::validate`] plus the requirement that every positive
    /// entry sits on an edge of `g`. Only meaningful for unextended matrices.
    pub fn validate_on(&self, g: &Digraph) -> Vec<Violation> {
        let mut out = self.validate();
        if self.size() != g.node_count() {
            out.push(Violation::RealCountOutOfRange {
                real_count: g.node_count(),
                size: self.size(),
            });
            return out;
        }
        for row in 0..self.size() {
            for col in 0..self.size() {
                if self.entries[(row, col)] > 0.0 && !g.has_edge(col, row) {
                    out.push(Violation::EdgeNotInGraph { row, col });
                }
            }
        }
        out
    }

    fn support_strongly_connected(&self) -> bool {
        let n = self.size();
        let mut adj = vec![Vec::new(); n];
        for row in 0..n {
            for col in 0..n {
                if self.entries[(row, col)] > 0.0 {
                    adj[col].push(row);
                }
            }
        }
        tarjan(&adj).len() == 1
    }

    /// Replaces every delayed link `m -> n` (delay `k`) by a chain of `k`
    /// relay nodes `m -> v1 -> … -> vk -> n`. Relay links carry weight one,
    /// the last hop inherits `W[(n, m)]`, and the direct entry is zeroed.
    ///
    /// Chains are appended in ascending `(from, to)` order.
    pub fn extend_with_delays(&self, delays: &DelaySpec) -> Result<Self> {
        if self.is_extended() {
            return Err(Error::InvalidMatrix(
                "matrix already has relay nodes".into(),
            ));
        }
        let n = self.size();
        for ((from, to), _) in delays.iter() {
            if from == to {
                return Err(Error::InvalidDelays(format!(
                    "self-loop {from} cannot be delayed"
                )));
            }
            if from >= n || to >= n || !(self.entries[(to, from)] > 0.0) {
                return Err(Error::InvalidDelays(format!(
                    "no edge {from} -> {to} in the matrix"
                )));
            }
        }
        let size = n + delays.total_delay();
        let mut entries = DMatrix::zeros(size, size);
        entries.view_mut((0, 0), (n, n)).copy_from(&self.entries);
        let mut chains = Vec::with_capacity(delays.len());
        let mut next = n;
        for ((from, to), len) in delays.iter() {
            let chain = RelayChain {
                from,
                to,
                first: next,
                len,
            };
            entries[(chain.first, from)] = 1.0;
            for i in 1..len {
                entries[(chain.first + i, chain.first + i - 1)] = 1.0;
            }
            entries[(to, chain.first + len - 1)] = self.entries[(to, from)];
            entries[(to, from)] = 0.0;
            next += len;
            chains.push(chain);
        }
        Ok(Self {
            entries,
            real_count: n,
            chains,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{five_node_example, five_node_example_delays};
    use crate::digraph::complete_graph;

    #[test]
    fn example_rows_use_inverse_indegree() {
        let w = GossipMatrix::inverse_indegree(&five_node_example()).unwrap();
        for col in [0, 1, 2, 4] {
            assert_eq!(w.get(2, col), 0.25);
        }
        assert_eq!(w.get(2, 3), 0.0);
        assert!(w.validate().is_empty());
        assert!(w.validate_on(&five_node_example()).is_empty());
        assert_eq!(w.min_positive_entry(), 0.25);
    }

    #[test]
    fn complete_and_two_node() {
        let w = GossipMatrix::inverse_indegree(&complete_graph(7).unwrap()).unwrap();
        assert!(w.entries().iter().all(|&v| v == 1.0 / 7.0));
        let w = GossipMatrix::inverse_indegree(&complete_graph(2).unwrap()).unwrap();
        assert!(w.entries().iter().all(|&v| v == 0.5));
        let t = w.entries().transpose();
        assert_eq!(&t, w.entries());
    }

    #[test]
    fn inverse_indegree_rejects_disconnected() {
        let g = Digraph::with_self_loops(3, [(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            GossipMatrix::inverse_indegree(&g),
            Err(Error::NotStronglyConnected)
        ));
    }

    #[test]
    fn validate_reports_each_violation() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, -0.1, 1.1]);
        let w = GossipMatrix {
            entries: bad,
            real_count: 2,
            chains: Vec::new(),
        };
        let v = w.validate();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::RowSum { row: 0, .. })));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::Negative { row: 1, col: 0, .. })));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::NotStronglyConnected)));

        let no_diag = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.5]);
        let err = GossipMatrix::from_dense(no_diag, 2).unwrap_err();
        assert!(err.to_string().contains("diagonal"));

        let w = GossipMatrix::inverse_indegree(&complete_graph(3).unwrap()).unwrap();
        let g = Digraph::with_self_loops(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(w
            .validate_on(&g)
            .iter()
            .any(|x| matches!(x, Violation::EdgeNotInGraph { .. })));
    }

    #[test]
    fn example_delay_extension() {
        let w = GossipMatrix::inverse_indegree(&five_node_example()).unwrap();
        let wv = w.extend_with_delays(&five_node_example_delays()).unwrap();
        assert_eq!(wv.size(), 7);
        assert_eq!(wv.real_count(), 5);
        // Relays 6 and 7 in 1-based labels are indices 5 and 6.
        assert_eq!(wv.get(5, 3), 1.0);
        assert_eq!(wv.get(6, 5), 1.0);
        assert_eq!(wv.get(1, 6), 0.5);
        assert_eq!(wv.get(1, 3), 0.0);
        assert!(wv.validate().is_empty(), "{:?}", wv.validate());
        assert_eq!(
            wv.chains(),
            &[RelayChain {
                from: 3,
                to: 1,
                first: 5,
                len: 2
            }]
        );
        assert!(wv.extend_with_delays(&DelaySpec::new()).is_err());
    }

    #[test]
    fn empty_and_unit_delay_extension() {
        let w = GossipMatrix::inverse_indegree(&five_node_example()).unwrap();
        assert_eq!(w.extend_with_delays(&DelaySpec::new()).unwrap(), w);

        let w = GossipMatrix::inverse_indegree(&complete_graph(2).unwrap()).unwrap();
        let d: DelaySpec = [((0, 1), 1)].into_iter().collect();
        let wv = w.extend_with_delays(&d).unwrap();
        // Hand-applied construction.
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 1.0, 0.0, 0.0]);
        assert_eq!(wv.entries(), &expected);
        assert!(wv.validate().is_empty());
    }

    #[test]
    fn delays_on_missing_edges_rejected() {
        let w = GossipMatrix::inverse_indegree(&five_node_example()).unwrap();
        let d: DelaySpec = [((0, 4), 1)].into_iter().collect();
        assert!(matches!(
            w.extend_with_delays(&d),
            Err(Error::InvalidDelays(_))
        ));
        assert!(d.check_against(&five_node_example()).is_err());
        let ok = five_node_example_delays();
        assert!(ok.check_against(&five_node_example()).is_ok());
        let mut spec = DelaySpec::new();
        spec.insert(1, 1, 2);
        assert!(spec.check_against(&five_node_example()).is_err());
    }

    #[test]
    fn delay_spec_bookkeeping() {
        let mut d = DelaySpec::new();
        d.insert(0, 1, 3);
        d.insert(2, 1, 1);
        d.insert(1, 2, 0);
        assert_eq!(d.len(), 2);
        assert_eq!(d.max_delay(), 3);
        assert_eq!(d.total_delay(), 4);
        assert_eq!(d.get(1, 2), 0);
        d.insert(0, 1, 0);
        assert_eq!(d.max_delay(), 1);
    }

    #[test]
    fn power_matches_repeated_product() {
        let w = GossipMatrix::inverse_indegree(&five_node_example()).unwrap();
        let mut acc = DMatrix::identity(5, 5);
        for k in 0..9 {
            let p = w.power(k);
            assert!((&p - &acc).abs().max() < 1e-15);
            acc = &acc * w.entries();
        }
    }
}
