use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::gossip::{correction_factors, delayed_stationary_weights, stationary_weights};
use crate::simulator::{Network, NetworkSim};

/// Variance of the demo's initial node values.
pub const DEMO_VARIANCE: f64 = 5.0;

/// Seeded draw of `n` values from a normal with mean zero and variance
/// [`DEMO_VARIANCE`].
pub fn normal_initial_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, DEMO_VARIANCE.sqrt()).expect("finite parameters");
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

/// Node values of a scalar gossip run.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoTrace {
    pub corrected: bool,
    /// `values[t][n]` for `t = 0..=rounds`.
    pub values: Vec<Vec<f64>>,
    /// Where every node should end up: `Σ π_n x_n(0)` uncorrected, the plain
    /// mean of `x(0)` corrected.
    pub predicted_limit: f64,
}

impl DemoTrace {
    pub fn last(&self) -> &[f64] {
        self.values.last().expect("at least the initial round")
    }

    /// CSV with header `round,node,value,corrected`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "round,node,value,corrected")?;
        for (round, row) in self.values.iter().enumerate() {
            for (node, v) in row.iter().enumerate() {
                writeln!(out, "{round},{node},{v},{}", self.corrected)?;
            }
        }
        Ok(())
    }
}

/// Scalar gossip averaging from `x0`. With `corrected`, each node first
/// scales its value by `1/(N·π_n)` so the network agrees on the plain mean
/// instead of the `π`-weighted one.
pub fn gossip_average_demo(
    network: &Network,
    x0: &[f64],
    corrected: bool,
    rounds: usize,
) -> Result<DemoTrace> {
    let base = stationary_weights(network.weights())?;
    let info = delayed_stationary_weights(network.weights(), &base, network.delays())?;
    let pi = info.real_pi();
    let scales = if corrected {
        correction_factors(&info)?
    } else {
        vec![1.0; info.size()]
    };
    let start: Vec<Vec<f64>> = x0.iter().zip(&scales).map(|(x, d)| vec![x * d]).collect();
    let predicted_limit = if corrected {
        x0.iter().sum::<f64>() / x0.len() as f64
    } else {
        // With relays, the weights of the real nodes sum to less than one
        // because part of the mass is always in flight.
        pi.iter().zip(x0).map(|(p, x)| p * x).sum()
    };
    let mut sim = NetworkSim::new(network.clone(), start)?;
    let mut values = Vec::with_capacity(rounds + 1);
    values.push(sim.states().iter().map(|s| s[0]).collect());
    for _ in 0..rounds {
        sim.gossip_round();
        values.push(sim.states().iter().map(|s| s[0]).collect());
    }
    Ok(DemoTrace {
        corrected,
        values,
        predicted_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{five_node_example, five_node_example_delays};

    #[test]
    fn constants_stay_put() {
        let net = Network::undelayed(five_node_example()).unwrap();
        let trace = gossip_average_demo(&net, &[1.5; 5], false, 50).unwrap();
        for row in &trace.values {
            assert!(row.iter().all(|&v| (v - 1.5).abs() < 1e-15));
        }
    }

    #[test]
    fn corrected_reaches_mean_uncorrected_does_not() {
        let net = Network::undelayed(five_node_example()).unwrap();
        let x0 = normal_initial_values(5, 7);
        let mean = x0.iter().sum::<f64>() / 5.0;
        let fixed = gossip_average_demo(&net, &x0, true, 500).unwrap();
        assert!(fixed.last().iter().all(|v| (v - mean).abs() < 1e-9));
        let plain = gossip_average_demo(&net, &x0, false, 500).unwrap();
        assert!(plain
            .last()
            .iter()
            .all(|v| (v - plain.predicted_limit).abs() < 1e-9));
        assert!((plain.predicted_limit - mean).abs() > 1e-6);
    }

    #[test]
    fn delayed_correction_reaches_mean() {
        let net = Network::with_delays(five_node_example(), five_node_example_delays()).unwrap();
        let x0 = normal_initial_values(5, 11);
        let mean = x0.iter().sum::<f64>() / 5.0;
        let fixed = gossip_average_demo(&net, &x0, true, 800).unwrap();
        assert!(fixed.last().iter().all(|v| (v - mean).abs() < 1e-9));
    }

    #[test]
    fn csv_layout() {
        let net = Network::undelayed(five_node_example()).unwrap();
        let trace = gossip_average_demo(&net, &[0.0; 5], true, 1).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 5);
        assert_eq!(lines[0], "round,node,value,corrected");
        assert_eq!(lines[1], "0,0,0,true");
    }
}
