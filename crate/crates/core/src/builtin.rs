//! Small named instances used by demos, the CLI and tests.

use crate::digraph::Digraph;
use crate::gossip::DelaySpec;

/// The five-node directed example topology.
///
/// With nodes labelled 1..=5 the edges are 3→4, 4→2, 2→3, 2→1, 1→3, 5→3
/// and 3→5 plus self-loops; here every label is shifted down by one.
pub fn five_node_example() -> Digraph {
    let edges = [(2, 3), (3, 1), (1, 2), (1, 0), (0, 2), (4, 2), (2, 4)];
    Digraph::with_self_loops(5, edges).expect("builtin edges are in range")
}

/// A two-round delay on the link from node 4 to node 2 (labels 1..=5),
/// i.e. `3 -> 1` in dense indices.
pub fn five_node_example_delays() -> DelaySpec {
    let mut delays = DelaySpec::new();
    delays.insert(3, 1, 2);
    delays
}

/// Graph and delays by name: `fig1`, `fig3` (the example with its delay)
/// or `complete:N`.
pub fn named(name: &str) -> Option<(Digraph, DelaySpec)> {
    match name {
        "fig1" => Some((five_node_example(), DelaySpec::new())),
        "fig3" => Some((five_node_example(), five_node_example_delays())),
        _ => {
            let n: usize = name.strip_prefix("complete:")?.parse().ok()?;
            Some((crate::digraph::complete_graph(n).ok()?, DelaySpec::new()))
        }
    }
}
