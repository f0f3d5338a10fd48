use std::io::Write;

use crate::consensus::WarmupResult;
use crate::gossip::Contraction;

/// Everything recorded by one optimisation run. Iteration `t` runs from 0
/// (initial state) to `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub node_count: usize,
    pub dim: usize,
    /// Real-node states, `states[t]` flattened node-major (`N·d` values).
    pub states: Vec<Vec<f64>>,
    /// `x̃(t)`: the stationary-weighted network average, including the mass
    /// still in flight on delayed links.
    pub weighted_avg: Vec<Vec<f64>>,
    /// The in-flight part of `weighted_avg`.
    pub in_flight: Vec<Vec<f64>>,
    pub cost: Vec<f64>,
    pub consensus: Vec<f64>,
    /// `η_t` for `t = 0..T`.
    pub etas: Vec<f64>,
    /// `Σ_n ∇F_n(x_n(t), ξ_n(t))` for `t = 0..T`.
    pub grad_sums: Vec<Vec<f64>>,
    /// Largest realised stochastic-gradient norm.
    pub max_grad_norm: f64,
    /// Correction factors the nodes used.
    pub corrections: Vec<f64>,
    pub tau_g: usize,
    pub contraction: Option<Contraction>,
    pub warmup: Option<WarmupResult>,
}

impl Trace {
    pub(crate) fn new(node_count: usize, dim: usize, iterations: usize) -> Self {
        Self {
            node_count,
            dim,
            states: Vec::with_capacity(iterations + 1),
            weighted_avg: Vec::with_capacity(iterations + 1),
            in_flight: Vec::with_capacity(iterations + 1),
            cost: Vec::with_capacity(iterations + 1),
            consensus: Vec::with_capacity(iterations + 1),
            etas: Vec::with_capacity(iterations),
            grad_sums: Vec::with_capacity(iterations),
            max_grad_norm: 0.0,
            corrections: Vec::new(),
            tau_g: 0,
            contraction: None,
            warmup: None,
        }
    }

    /// Number of optimisation steps `T`.
    pub fn iterations(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn state(&self, t: usize, node: usize) -> &[f64] {
        &self.states[t][node * self.dim..(node + 1) * self.dim]
    }

    pub fn node_states(&self, t: usize) -> Vec<&[f64]> {
        self.states[t].chunks(self.dim).collect()
    }

    pub fn final_states(&self) -> Vec<&[f64]> {
        self.node_states(self.iterations())
    }

    /// `Σ_n ‖x̃(t) − x_n(t)‖²`
    pub fn deviation_sq(&self, t: usize) -> f64 {
        let avg = &self.weighted_avg[t];
        self.node_states(t)
            .iter()
            .map(|x| x.iter().zip(avg).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum()
    }

    /// `max_k |x̃(t+1) − x̃(t) + (η_t/N)·Σ_n ∇F_n|` for each step.
    pub fn preservation_residuals(&self) -> Vec<f64> {
        let n = self.node_count as f64;
        (0..self.iterations())
            .map(|t| {
                (0..self.dim)
                    .map(|k| {
                        let lhs = self.weighted_avg[t + 1][k] - self.weighted_avg[t][k];
                        (lhs + self.etas[t] / n * self.grad_sums[t][k]).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// CSV `iteration,node,x_0,…,x_{d-1},cost,consensus`; the last two
    /// columns are network-wide and repeat for every node.
    pub fn write_states_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "iteration,node")?;
        for k in 0..self.dim {
            write!(out, ",x_{k}")?;
        }
        writeln!(out, ",cost,consensus")?;
        for t in 0..self.states.len() {
            for (node, x) in self.node_states(t).iter().enumerate() {
                write!(out, "{t},{node}")?;
                for v in x.iter() {
                    write!(out, ",{v}")?;
                }
                writeln!(out, ",{},{}", self.cost[t], self.consensus[t])?;
            }
        }
        Ok(())
    }

    /// CSV `iteration,cost,consensus,eta,avg_0,…`; `eta` is empty on the last row.
    pub fn write_summary_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "iteration,cost,consensus,eta")?;
        for k in 0..self.dim {
            write!(out, ",avg_{k}")?;
        }
        writeln!(out)?;
        for t in 0..self.states.len() {
            write!(out, "{t},{},{},", self.cost[t], self.consensus[t])?;
            if let Some(eta) = self.etas.get(t) {
                write!(out, "{eta}")?;
            }
            for v in &self.weighted_avg[t] {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
