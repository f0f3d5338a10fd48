use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::simulator::Mixable;

/// Identifier a node draws for itself at start-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Draws one uniform 64-bit id per node, failing if two nodes collide.
pub fn draw_ids<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Vec<NodeId>> {
    let ids: Vec<NodeId> = (0..count).map(|_| NodeId(rng.random())).collect();
    check_unique(&ids)?;
    Ok(ids)
}

pub(crate) fn check_unique(ids: &[NodeId]) -> Result<()> {
    let mut seen = BTreeMap::new();
    for (node, id) in ids.iter().enumerate() {
        if let Some(&first) = seen.get(id) {
            return Err(Error::IdCollision {
                id: id.0,
                first,
                second: node,
            });
        }
        seen.insert(*id, node);
    }
    Ok(())
}

/// Node id → weight dictionary exchanged during warm-up. Keys iterate in
/// ascending id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightTable(BTreeMap<NodeId, f64>);

impl WeightTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// `{id: 1}`
    pub fn unit(id: NodeId) -> Self {
        let mut t = Self::new();
        t.0.insert(id, 1.0);
        t
    }

    /// Missing keys read as zero.
    pub fn get(&self, id: NodeId) -> f64 {
        self.0.get(&id).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    /// Largest absolute entry-wise difference over the union of keys.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self.0.iter().map(|(k, v)| (v - other.get(*k)).abs());
        let b = other
            .0
            .iter()
            .filter(|(k, _)| !self.0.contains_key(k))
            .map(|(_, v)| v.abs());
        a.chain(b).fold(0.0, f64::max)
    }
}

impl Mixable for WeightTable {
    fn zero_like(&self) -> Self {
        Self::new()
    }

    fn add_scaled(&mut self, weight: f64, other: &Self) {
        for (&k, &v) in &other.0 {
            *self.0.entry(k).or_insert(0.0) += weight * v;
        }
    }
}

impl FromIterator<(NodeId, f64)> for WeightTable {
    fn from_iter<I: IntoIterator<Item = (NodeId, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Weighted average of the receiver's own table and the tables it received.
pub fn merge_tables(
    own: &WeightTable,
    own_weight: f64,
    received: &[(&WeightTable, f64)],
) -> Result<WeightTable> {
    if own_weight < 0.0 {
        return Err(Error::NegativeWeight(own_weight));
    }
    if let Some(&(_, w)) = received.iter().find(|(_, w)| *w < 0.0) {
        return Err(Error::NegativeWeight(w));
    }
    let mut out = WeightTable::new();
    out.add_scaled(own_weight, own);
    for (table, w) in received {
        out.add_scaled(*w, table);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::five_node_example;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_source_is_identity() {
        let t: WeightTable = [(NodeId(3), 0.25), (NodeId(9), 0.75)].into_iter().collect();
        assert_eq!(merge_tables(&t, 1.0, &[]).unwrap(), t);
    }

    #[test]
    fn two_unit_tables_average() {
        let a = WeightTable::unit(NodeId(1));
        let b = WeightTable::unit(NodeId(2));
        let m = merge_tables(&a, 0.5, &[(&b, 0.5)]).unwrap();
        assert_eq!(m.get(NodeId(1)), 0.5);
        assert_eq!(m.get(NodeId(2)), 0.5);
        assert_eq!(m.total(), 1.0);
    }

    #[test]
    fn example_node_merges_four_tables() {
        // Node 3 (label) has in-neighbours {1, 2, 3, 5}, each weight 1/4.
        let g = five_node_example();
        let tables: Vec<_> = (0..5)
            .map(|n| WeightTable::unit(NodeId(n as u64 + 10)))
            .collect();
        let received: Vec<_> = g
            .in_neighbors(2)
            .iter()
            .filter(|&&m| m != 2)
            .map(|&m| (&tables[m], 0.25))
            .collect();
        let merged = merge_tables(&tables[2], 0.25, &received).unwrap();
        assert_eq!(merged.len(), 4);
        for m in [0, 1, 2, 4] {
            assert_eq!(merged.get(NodeId(m + 10)), 0.25);
        }
        assert_eq!(merged.get(NodeId(13)), 0.0);
    }

    #[test]
    fn negative_weights_rejected() {
        let a = WeightTable::unit(NodeId(1));
        assert!(merge_tables(&a, -0.1, &[]).is_err());
        assert!(matches!(
            merge_tables(&a, 1.1, &[(&a, -0.1)]),
            Err(Error::NegativeWeight(_))
        ));
    }

    #[test]
    fn ids_are_seeded_and_collisions_detected() {
        let a = draw_ids(100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = draw_ids(100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let dup = [NodeId(5), NodeId(7), NodeId(5)];
        assert!(matches!(
            check_unique(&dup),
            Err(Error::IdCollision {
                id: 5,
                first: 0,
                second: 2
            })
        ));
        assert_eq!(NodeId(255).to_string(), "00000000000000ff");
    }

    #[test]
    fn diff_covers_key_union() {
        let a: WeightTable = [(NodeId(1), 0.5)].into_iter().collect();
        let b: WeightTable = [(NodeId(1), 0.25), (NodeId(2), 0.75)].into_iter().collect();
        assert_eq!(a.max_abs_diff(&b), 0.75);
        assert_eq!(b.max_abs_diff(&a), 0.75);
    }
}
