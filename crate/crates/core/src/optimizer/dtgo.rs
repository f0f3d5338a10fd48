use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{consensus_metric, cost_metric};
use super::objective::{GradientSampler, Objective};
use super::schedule::StepSchedule;
use super::trace::Trace;
use crate::consensus::{draw_ids, run_warmup, warmup_sim, WarmupResult, WarmupRounds};
use crate::error::{Error, Result};
use crate::gossip::{
    contraction_factor, correction_factors, delayed_stationary_weights, stationary_weights,
    SpectralInfo,
};
use crate::simulator::{Network, NetworkSim};

/// States beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Contraction is only checked when the extended matrix is at most this big.
const CONTRACTION_CHECK_MAX_SIZE: usize = 600;

/// Stream used for id draws, away from the per-node gradient streams.
const ID_STREAM: u64 = u64::MAX;

/// Where the correction factors come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionSource {
    /// Computed from the true stationary weights.
    Oracle,
    /// Estimated by the id-table warm-up on the same network.
    Protocol(WarmupRounds),
}

/// How the iterations are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Message passing through the round simulator.
    Network,
    /// Dense products with the relay-extended matrix; only for small networks.
    Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Every node starts at the origin.
    Zeros,
    Common(Vec<f64>),
    PerNode(Vec<Vec<f64>>),
}

impl InitialState {
    fn materialize(&self, n: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
        let states = match self {
            InitialState::Zeros => vec![vec![0.0; dim]; n],
            InitialState::Common(x) => vec![x.clone(); n],
            InitialState::PerNode(xs) => xs.clone(),
        };
        if states.len() != n || states.iter().any(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "initial state must be {n} vectors of length {dim}"
            )));
        }
        Ok(states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtgoConfig {
    pub iterations: usize,
    /// Gossip rounds per iteration.
    pub tau_g: usize,
    pub schedule: StepSchedule,
    /// Seeds the gradient noise and the warm-up ids.
    pub seed: u64,
    pub correction: CorrectionSource,
    pub engine: Engine,
    pub initial: InitialState,
    /// Compute `‖W_v^τ − W_v^∞‖₂²` and warn when it is not below one.
    pub check_contraction: bool,
}

impl Default for DtgoConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            tau_g: 1,
            schedule: StepSchedule::default(),
            seed: 0,
            correction: CorrectionSource::Oracle,
            engine: Engine::Network,
            initial: InitialState::Zeros,
            check_contraction: false,
        }
    }
}

impl DtgoConfig {
    fn validate(&self) -> Result<()> {
        if self.tau_g == 0 {
            return Err(Error::InvalidConfig("tau_g must be at least 1".into()));
        }
        if !self.schedule.is_valid() {
            return Err(Error::InvalidConfig(format!(
                "bad stepsize schedule {:?}",
                self.schedule
            )));
        }
        Ok(())
    }
}

/// One step in matrix form: `X(t+1) = W^τ·(X(t) − η·D·G(t))`, where `G` is
/// zero on relay rows.
pub fn dtgo_matrix_step(
    w_pow: &DMatrix<f64>,
    x: &DMatrix<f64>,
    corrections: &[f64],
    grads: &DMatrix<f64>,
    eta: f64,
) -> DMatrix<f64> {
    let mut z = x.clone();
    for (row, d) in corrections.iter().enumerate() {
        for col in 0..z.ncols() {
            z[(row, col)] -= eta * d * grads[(row, col)];
        }
    }
    w_pow * z
}

/// Oracle stationary weights over real nodes and relays.
fn oracle_weights(network: &Network) -> Result<SpectralInfo> {
    let base = stationary_weights(network.weights())?;
    delayed_stationary_weights(network.weights(), &base, network.delays())
}

struct Recorder<'a> {
    trace: Trace,
    objective: &'a dyn Objective,
    pi: Vec<f64>,
}

impl Recorder<'_> {
    /// Stores one iteration; `in_flight` is the relay part of `x̃`.
    fn record(&mut self, t: usize, states: &[&[f64]], in_flight: Vec<f64>) -> Result<()> {
        for (node, x) in states.iter().enumerate() {
            if let Some(&bad) = x.iter().find(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
                return Err(Error::Diverged {
                    iteration: t,
                    node,
                    value: bad,
                });
            }
        }
        let mut avg = in_flight.clone();
        for (x, p) in states.iter().zip(&self.pi) {
            for (a, v) in avg.iter_mut().zip(x.iter()) {
                *a += p * v;
            }
        }
        self.trace.cost.push(cost_metric(states, self.objective));
        self.trace.consensus.push(consensus_metric(states));
        self.trace.states.push(states.concat());
        self.trace.weighted_avg.push(avg);
        self.trace.in_flight.push(in_flight);
        Ok(())
    }

    fn gradients(
        &mut self,
        t: usize,
        eta: f64,
        sampler: &mut GradientSampler,
        states: &[&[f64]],
    ) -> Vec<Vec<f64>> {
        let grads: Vec<Vec<f64>> = states
            .iter()
            .enumerate()
            .map(|(n, x)| sampler.sample(n, x))
            .collect();
        let mut sum = vec![0.0; self.trace.dim];
        for g in &grads {
            for (s, v) in sum.iter_mut().zip(g) {
                *s += v;
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            self.trace.max_grad_norm = self.trace.max_grad_norm.max(norm);
        }
        debug_assert_eq!(self.trace.etas.len(), t);
        self.trace.etas.push(eta);
        self.trace.grad_sums.push(sum);
        grads
    }
}

/// Runs DT-GO: every iteration each node takes a corrected local SGD step
/// `z_n = x_n + d_n·(y_n − x_n)` with `y_n = x_n − η_t·∇F_n(x_n, ξ_n)`, then
/// the network runs `τ_g` gossip rounds on the `z`.
pub fn dtgo_run(
    network: &Network,
    objective: &dyn Objective,
    config: &DtgoConfig,
) -> Result<Trace> {
    config.validate()?;
    let n = network.node_count();
    if objective.node_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "objective has {} nodes, network has {n}",
            objective.node_count()
        )));
    }
    let dim = objective.dim();
    let x0 = config.initial.materialize(n, dim)?;
    let info = oracle_weights(network)?;

    let mut trace = Trace::new(n, dim, config.iterations);
    trace.tau_g = config.tau_g;
    if config.check_contraction && network.extended_size() <= CONTRACTION_CHECK_MAX_SIZE {
        let w_v = network.extended_matrix()?;
        let c = contraction_factor(&w_v, &info, config.tau_g)?;
        if c >= 1.0 {
            warn!(
                "‖W^τ − W^∞‖² = {c:.4} is not below one for tau_g = {}",
                config.tau_g
            );
        }
        trace.contraction = Some(crate::gossip::Contraction {
            tau_g: config.tau_g,
            contraction_sq: c,
            c: 1.0 - c,
        });
    }

    // Warm-up and optimisation share one simulator so the round counter
    // keeps running between the phases.
    let (sim, corrections) = match config.correction {
        CorrectionSource::Oracle => {
            let sim = NetworkSim::new(network.clone(), x0.clone())?;
            (sim, correction_factors(&info)?[..n].to_vec())
        }
        CorrectionSource::Protocol(rounds) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(ID_STREAM);
            let ids = draw_ids(n, &mut rng)?;
            let mut warm = warmup_sim(network.clone(), &ids)?;
            let result: WarmupResult = run_warmup(&mut warm, &ids, rounds)?;
            let corrections = result.corrections();
            trace.warmup = Some(result);
            (warm.into_phase(x0.clone())?, corrections)
        }
    };
    trace.corrections = corrections.clone();

    let mut rec = Recorder {
        trace,
        objective,
        pi: info.real_pi().to_vec(),
    };
    let mut sampler = GradientSampler::new(objective, config.seed);
    match config.engine {
        Engine::Network => run_network(sim, &info, &corrections, config, &mut rec, &mut sampler)?,
        Engine::Matrix => run_matrix(
            network,
            &info,
            &corrections,
            x0,
            config,
            &mut rec,
            &mut sampler,
        )?,
    }
    Ok(rec.trace)
}

fn run_network(
    mut sim: NetworkSim<Vec<f64>>,
    info: &SpectralInfo,
    corrections: &[f64],
    config: &DtgoConfig,
    rec: &mut Recorder,
    sampler: &mut GradientSampler,
) -> Result<()> {
    let dim = rec.trace.dim;
    let pi = info.real_pi();
    let in_flight = |sim: &NetworkSim<Vec<f64>>| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for link in sim.links() {
            let relay_weight = pi[link.to] * link.weight;
            for msg in link.in_flight {
                for (o, v) in out.iter_mut().zip(&msg.payload) {
                    *o += relay_weight * v;
                }
            }
        }
        out
    };
    {
        let states: Vec<&[f64]> = sim.states().iter().map(|s| s.as_slice()).collect();
        rec.record(0, &states, vec![0.0; dim])?;
    }
    for t in 0..config.iterations {
        let eta = config.schedule.eta(t);
        let grads = {
            let states: Vec<&[f64]> = sim.states().iter().map(|s| s.as_slice()).collect();
            rec.gradients(t, eta, sampler, &states)
        };
        for ((x, g), d) in sim.states_mut().iter_mut().zip(&grads).zip(corrections) {
            for (xk, gk) in x.iter_mut().zip(g) {
                let y = *xk - eta * gk;
                *xk += d * (y - *xk);
            }
        }
        sim.gossip_rounds(config.tau_g);
        let flight = in_flight(&sim);
        let states: Vec<&[f64]> = sim.states().iter().map(|s| s.as_slice()).collect();
        rec.record(t + 1, &states, flight)?;
    }
    Ok(())
}

fn run_matrix(
    network: &Network,
    info: &SpectralInfo,
    corrections: &[f64],
    x0: Vec<Vec<f64>>,
    config: &DtgoConfig,
    rec: &mut Recorder,
    sampler: &mut GradientSampler,
) -> Result<()> {
    let n = network.node_count();
    let dim = rec.trace.dim;
    let w_v = network.extended_matrix()?;
    let size = w_v.size();
    let w_pow = w_v.power(config.tau_g);
    let mut d = vec![1.0; size];
    d[..n].copy_from_slice(corrections);
    let mut x = DMatrix::<f64>::zeros(size, dim);
    for (row, v) in x0.iter().enumerate() {
        for (col, val) in v.iter().enumerate() {
            x[(row, col)] = *val;
        }
    }
    let rows = |x: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..n).map(|r| x.row(r).iter().copied().collect()).collect()
    };
    let relay_part = |x: &DMatrix<f64>| -> Vec<f64> {
        (0..dim)
            .map(|col| (n..size).map(|r| info.pi[r] * x[(r, col)]).sum())
            .collect()
    };
    {
        let real = rows(&x);
        let refs: Vec<&[f64]> = real.iter().map(|s| s.as_slice()).collect();
        rec.record(0, &refs, relay_part(&x))?;
    }
    for t in 0..config.iterations {
        let eta = config.schedule.eta(t);
        let real = rows(&x);
        let refs: Vec<&[f64]> = real.iter().map(|s| s.as_slice()).collect();
        let grads = rec.gradients(t, eta, sampler, &refs);
        let mut g = DMatrix::<f64>::zeros(size, dim);
        for (row, v) in grads.iter().enumerate() {
            for (col, val) in v.iter().enumerate() {
                g[(row, col)] = *val;
            }
        }
        x = dtgo_matrix_step(&w_pow, &x, &d, &g, eta);
        let real = rows(&x);
        let refs: Vec<&[f64]> = real.iter().map(|s| s.as_slice()).collect();
        rec.record(t + 1, &refs, relay_part(&x))?;
    }
    Ok(())
}

/// Centralized minibatch SGD on the average objective:
/// `x(t+1) = x(t) − (η_t/N)·Σ_n ∇F_n(x(t), ξ_n(t))`. The trace repeats the
/// single iterate for every node so its metrics compare directly with
/// [`dtgo_run`]. Uses the same per-node noise streams as [`dtgo_run`].
pub fn centralized_sgd_run(objective: &dyn Objective, config: &DtgoConfig) -> Result<Trace> {
    if !config.schedule.is_valid() {
        return Err(Error::InvalidConfig(format!(
            "bad stepsize schedule {:?}",
            config.schedule
        )));
    }
    let n = objective.node_count();
    let dim = objective.dim();
    let x0 = config.initial.materialize(n, dim)?;
    if x0.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InvalidConfig(
            "centralized SGD needs one common initial state".into(),
        ));
    }
    let mut x = x0[0].clone();
    let mut rec = Recorder {
        trace: Trace::new(n, dim, config.iterations),
        objective,
        pi: vec![1.0 / n as f64; n],
    };
    rec.trace.corrections = vec![1.0; n];
    let mut sampler = GradientSampler::new(objective, config.seed);
    let copies = |x: &[f64]| vec![x.to_vec(); n];
    {
        let c = copies(&x);
        let refs: Vec<&[f64]> = c.iter().map(|s| s.as_slice()).collect();
        rec.record(0, &refs, vec![0.0; dim])?;
    }
    for t in 0..config.iterations {
        let eta = config.schedule.eta(t);
        let c = copies(&x);
        let refs: Vec<&[f64]> = c.iter().map(|s| s.as_slice()).collect();
        rec.gradients(t, eta, &mut sampler, &refs);
        let sum = rec.trace.grad_sums[t].clone();
        for (xk, s) in x.iter_mut().zip(&sum) {
            *xk -= eta / n as f64 * s;
        }
        let c = copies(&x);
        let refs: Vec<&[f64]> = c.iter().map(|s| s.as_slice()).collect();
        rec.record(t + 1, &refs, vec![0.0; dim])?;
    }
    Ok(rec.trace)
}
