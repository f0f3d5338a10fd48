//! Synchronous round-based message passing with per-link integer delays.
//!
//! A round has four phases: every node broadcasts its current payload on
//! all out-links, payloads due this round are delivered, every node
//! combines what arrived using its gossip row, and the clock advances.
//! A payload sent on a link with delay `k` at round `t` is consumed by the
//! receiver's combination at round `t + k`; until the first payload of a
//! delayed link arrives, that slot contributes nothing (the zero payload).
//! This is exactly the gossip iteration on the matrix extended with relay
//! nodes whose states start at zero.

use std::collections::VecDeque;
use std::io::Write;

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::gossip::{DelaySpec, GossipMatrix};

/// Payloads that can be linearly combined by gossip.
pub trait Mixable: Clone {
    /// Additive identity of the payload space.
    fn zero_like(&self) -> Self;
    /// `self += weight * other`
    fn add_scaled(&mut self, weight: f64, other: &Self);
}

impl Mixable for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }

    fn add_scaled(&mut self, weight: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += weight * b;
        }
    }
}

/// Immutable description of a network: topology, base gossip weights and
/// link delays.
#[derive(Debug, Clone)]
pub struct Network {
    topology: Digraph,
    weights: GossipMatrix,
    delays: DelaySpec,
}

impl Network {
    pub fn new(topology: Digraph, weights: GossipMatrix, delays: DelaySpec) -> Result<Self> {
        if weights.is_extended() {
            return Err(Error::InvalidMatrix(
                "network weights must not contain relay nodes".into(),
            ));
        }
        if let Some(v) = weights.validate_on(&topology).first() {
            return Err(Error::InvalidMatrix(v.to_string()));
        }
        delays.check_against(&topology)?;
        Ok(Self {
            topology,
            weights,
            delays,
        })
    }

    /// Inverse in-degree weights over `topology`.
    pub fn with_delays(topology: Digraph, delays: DelaySpec) -> Result<Self> {
        let weights = GossipMatrix::inverse_indegree(&topology)?;
        Self::new(topology, weights, delays)
    }

    pub fn undelayed(topology: Digraph) -> Result<Self> {
        Self::with_delays(topology, DelaySpec::new())
    }

    pub fn topology(&self) -> &Digraph {
        &self.topology
    }

    pub fn weights(&self) -> &GossipMatrix {
        &self.weights
    }

    pub fn delays(&self) -> &DelaySpec {
        &self.delays
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Node count of the relay-extended system.
    pub fn extended_size(&self) -> usize {
        self.node_count() + self.delays.total_delay()
    }

    /// The dense relay-extended matrix.
    pub fn extended_matrix(&self) -> Result<GossipMatrix> {
        self.weights.extend_with_delays(&self.delays)
    }
}

/// A payload travelling on a link.
#[derive(Debug, Clone, PartialEq)]
pub struct InFlight<P> {
    pub payload: P,
    pub sender: usize,
    pub sent_round: u64,
    pub due_round: u64,
}

#[derive(Debug, Clone)]
struct Link<P> {
    from: usize,
    to: usize,
    weight: f64,
    delay: usize,
    queue: VecDeque<InFlight<P>>,
}

/// Read-only view of one non-self link.
#[derive(Debug)]
pub struct LinkView<'a, P> {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    pub delay: usize,
    /// Oldest first.
    pub in_flight: &'a VecDeque<InFlight<P>>,
}

/// A payload delivered to a node this round.
#[derive(Debug, Clone, Copy)]
pub struct Arrival<'a, P> {
    pub from: usize,
    pub weight: f64,
    pub sent_round: u64,
    pub payload: &'a P,
}

/// Everything a node sees when it updates.
#[derive(Debug)]
pub struct Inbox<'a, P> {
    pub node: usize,
    pub round: u64,
    pub own: &'a P,
    pub self_weight: f64,
    /// Arrivals in ascending sender order; links whose first payload has not
    /// arrived yet are absent.
    pub arrivals: Vec<Arrival<'a, P>>,
}

impl<P: Mixable> Inbox<'_, P> {
    /// `W_nn·own + Σ W_nm·arrival_m`
    pub fn mix(&self) -> P {
        let mut out = self.own.zero_like();
        out.add_scaled(self.self_weight, self.own);
        for a in &self.arrivals {
            out.add_scaled(a.weight, a.payload);
        }
        out
    }
}

/// Running state of a [`Network`]: node payloads and in-flight queues.
#[derive(Debug, Clone)]
pub struct NetworkSim<P> {
    network: Network,
    states: Vec<P>,
    links: Vec<Link<P>>,
    incoming: Vec<Vec<usize>>,
    round: u64,
}

impl<P: Clone> NetworkSim<P> {
    pub fn new(network: Network, states: Vec<P>) -> Result<Self> {
        let n = network.node_count();
        if states.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} initial states for {n} nodes",
                states.len()
            )));
        }
        let mut links = Vec::new();
        let mut incoming = vec![Vec::new(); n];
        for to in 0..n {
            for &from in network.topology.in_neighbors(to) {
                if from == to {
                    continue;
                }
                incoming[to].push(links.len());
                links.push(Link {
                    from,
                    to,
                    weight: network.weights.get(to, from),
                    delay: network.delays.get(from, to),
                    queue: VecDeque::new(),
                });
            }
        }
        Ok(Self {
            network,
            states,
            links,
            incoming,
            round: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn states(&self) -> &[P] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [P] {
        &mut self.states
    }

    pub fn into_states(self) -> Vec<P> {
        self.states
    }

    /// Non-self links in receiver-major order.
    pub fn links(&self) -> impl Iterator<Item = LinkView<'_, P>> {
        self.links.iter().map(|l| LinkView {
            from: l.from,
            to: l.to,
            weight: l.weight,
            delay: l.delay,
            in_flight: &l.queue,
        })
    }

    pub fn in_flight_count(&self) -> usize {
        self.links.iter().map(|l| l.queue.len()).sum()
    }

    /// Starts a new phase with fresh payloads: every queue is flushed and the
    /// round counter keeps running.
    pub fn into_phase<Q: Clone>(self, states: Vec<Q>) -> Result<NetworkSim<Q>> {
        let round = self.round;
        let mut sim = NetworkSim::new(self.network, states)?;
        sim.round = round;
        Ok(sim)
    }

    /// One synchronous round; `update` computes each node's next payload.
    pub fn step<F>(&mut self, mut update: F)
    where
        F: FnMut(Inbox<'_, P>) -> P,
    {
        let round = self.round;
        for link in self.links.iter_mut().filter(|l| l.delay > 0) {
            link.queue.push_back(InFlight {
                payload: self.states[link.from].clone(),
                sender: link.from,
                sent_round: round,
                due_round: round + link.delay as u64,
            });
        }
        let delivered: Vec<Option<InFlight<P>>> = self
            .links
            .iter_mut()
            .map(|link| {
                if link.delay > 0 && link.queue.front().is_some_and(|f| f.due_round == round) {
                    link.queue.pop_front()
                } else {
                    None
                }
            })
            .collect();

        let states = &self.states;
        let links = &self.links;
        let weights = self.network.weights();
        let next: Vec<P> = (0..states.len())
            .map(|node| {
                let arrivals = self.incoming[node]
                    .iter()
                    .filter_map(|&li| {
                        let link = &links[li];
                        if link.delay == 0 {
                            Some(Arrival {
                                from: link.from,
                                weight: link.weight,
                                sent_round: round,
                                payload: &states[link.from],
                            })
                        } else {
                            delivered[li].as_ref().map(|f| Arrival {
                                from: link.from,
                                weight: link.weight,
                                sent_round: f.sent_round,
                                payload: &f.payload,
                            })
                        }
                    })
                    .collect();
                update(Inbox {
                    node,
                    round,
                    own: &states[node],
                    self_weight: weights.get(node, node),
                    arrivals,
                })
            })
            .collect();
        self.states = next;
        self.round += 1;
    }

    pub fn run_rounds<F>(&mut self, rounds: usize, mut update: F)
    where
        F: FnMut(Inbox<'_, P>) -> P,
    {
        for _ in 0..rounds {
            self.step(&mut update);
        }
    }
}

impl<P: Mixable> NetworkSim<P> {
    /// One round of plain gossip averaging.
    pub fn gossip_round(&mut self) {
        self.step(|inbox| inbox.mix());
    }

    pub fn gossip_rounds(&mut self, rounds: usize) {
        for _ in 0..rounds {
            self.gossip_round();
        }
    }

    /// States of the relay-extended system: real nodes first, then each
    /// relay chain in the layout of [`GossipMatrix::extend_with_delays`].
    /// Relay `i` (1-based) of a chain holds the payload sent `i` rounds ago,
    /// or zero if nothing was sent yet.
    pub fn extended_states(&self) -> Vec<P> {
        let mut out = self.states.clone();
        let zero = self.states[0].zero_like();
        for ((from, to), delay) in self.network.delays.iter() {
            let link = self
                .links
                .iter()
                .find(|l| l.from == from && l.to == to)
                .expect("every delayed edge has a link");
            for i in 1..=delay {
                let slot = link
                    .queue
                    .len()
                    .checked_sub(i)
                    .map(|k| link.queue[k].payload.clone());
                out.push(slot.unwrap_or_else(|| zero.clone()));
            }
        }
        out
    }
}

impl NetworkSim<Vec<f64>> {
    /// Current states as CSV rows `round,node,v0,v1,…`.
    pub fn write_round_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (node, state) in self.states.iter().enumerate() {
            write!(out, "{},{}", self.round, node)?;
            for v in state {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
