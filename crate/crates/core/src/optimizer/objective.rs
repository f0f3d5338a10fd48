use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Local objectives `f_n` of a network, one per real node.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn node_count(&self) -> usize;
    /// `f_n(x)`
    fn value(&self, node: usize, x: &[f64]) -> f64;
    /// `∇f_n(x)`, written into `out`.
    fn gradient(&self, node: usize, x: &[f64], out: &mut [f64]);
    /// Smoothness constant L shared by every `f_n`.
    fn smoothness(&self) -> f64;
    /// Standard deviation of the additive gradient noise at `node`.
    fn noise_std(&self, _node: usize) -> f64 {
        0.0
    }
}

/// `f_n(x) = ‖x − a_n‖²` with per-node targets `a_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    targets: Vec<Vec<f64>>,
    noise: Vec<f64>,
}

impl Quadratic {
    pub fn new(targets: Vec<Vec<f64>>) -> Result<Self> {
        let dim = targets.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || targets.iter().any(|t| t.len() != dim) {
            return Err(Error::DimensionMismatch(
                "quadratic targets must be non-empty and share one dimension".into(),
            ));
        }
        let noise = vec![0.0; targets.len()];
        Ok(Self { targets, noise })
    }

    /// Scalar targets `1, 2, …, n`: node `i` (0-based) minimises `(x − (i+1))²`.
    pub fn integer_targets(n: usize) -> Self {
        Self::new((1..=n).map(|t| vec![t as f64]).collect()).expect("n > 0")
    }

    /// Same additive Gaussian gradient noise at every node.
    pub fn with_noise(mut self, std: f64) -> Self {
        self.noise = vec![std; self.targets.len()];
        self
    }

    pub fn with_node_noise(mut self, std: Vec<f64>) -> Result<Self> {
        if std.len() != self.targets.len() || std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig(
                "one non-negative noise level per node".into(),
            ));
        }
        self.noise = std;
        Ok(self)
    }

    /// Minimiser of the average objective: the mean target.
    pub fn minimizer(&self) -> Vec<f64> {
        let n = self.targets.len() as f64;
        let mut out = vec![0.0; self.dim()];
        for t in &self.targets {
            for (o, v) in out.iter_mut().zip(t) {
                *o += v / n;
            }
        }
        out
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.targets[0].len()
    }

    fn node_count(&self) -> usize {
        self.targets.len()
    }

    fn value(&self, node: usize, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.targets[node])
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    }

    fn gradient(&self, node: usize, x: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.targets[node]) {
            *o = 2.0 * (a - b);
        }
    }

    fn smoothness(&self) -> f64 {
        2.0
    }

    fn noise_std(&self, node: usize) -> f64 {
        self.noise[node]
    }
}

/// Stochastic gradients `∇F_n(x, ξ_n) = ∇f_n(x) + σ_n·ξ`, one random stream
/// per node. Node `n` always uses stream `n` of the seed, so two samplers
/// built from the same seed produce the same noise for the same node.
pub struct GradientSampler<'a> {
    objective: &'a dyn Objective,
    streams: Vec<ChaCha8Rng>,
}

impl<'a> GradientSampler<'a> {
    pub fn new(objective: &'a dyn Objective, seed: u64) -> Self {
        let streams = (0..objective.node_count())
            .map(|n| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(n as u64);
                rng
            })
            .collect();
        Self { objective, streams }
    }

    pub fn sample(&mut self, node: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.objective.gradient(node, x, &mut g);
        let std = self.objective.noise_std(node);
        if std > 0.0 {
            let rng = &mut self.streams[node];
            for v in g.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += std * z;
            }
        }
        g
    }
}
