use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digraph::{complete_graph, sample_strongly_connected, DEFAULT_MAX_ATTEMPTS};
use crate::error::{Error, Result};
use crate::gossip::DelaySpec;
use crate::optimizer::{centralized_sgd_run, dtgo_run, DtgoConfig, Quadratic, StepSchedule, Trace};
use crate::simulator::Network;

/// Iteration at which the monotonicity checks compare sweep points.
pub const CHECK_ITERATION: usize = 30;

/// How Poisson delays are attached to the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMode {
    /// One independent draw per directed non-self edge.
    #[default]
    Edge,
    /// One draw per node, shared by all of its out-edges.
    Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nodes: usize,
    pub replications: usize,
    pub p_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    /// Defaults to 500 for the p-sweep and 30 for the λ-sweep.
    pub iterations: Option<usize>,
    /// Replication `r` draws its graph, delays and noise from `base_seed + r`.
    pub base_seed: u64,
    pub eta0: f64,
    pub tau_g: usize,
    pub noise_std: f64,
    pub delay_mode: DelayMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nodes: 100,
            replications: 100,
            p_values: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            lambda_values: vec![0.0, 1.0, 2.0, 4.0],
            iterations: None,
            base_seed: 0,
            eta0: 0.1,
            tau_g: 1,
            noise_std: 0.0,
            delay_mode: DelayMode::Edge,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::InvalidConfig("need at least two nodes".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("need at least one replication".into()));
        }
        if self.tau_g == 0 {
            return Err(Error::InvalidConfig("tau_g must be at least 1".into()));
        }
        if !(self.eta0.is_finite() && self.eta0 >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad eta0 {}", self.eta0)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad noise_std {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    fn dtgo(&self, iterations: usize, seed: u64) -> DtgoConfig {
        DtgoConfig {
            iterations,
            tau_g: self.tau_g,
            schedule: StepSchedule::InverseSqrt { eta0: self.eta0 },
            seed,
            ..Default::default()
        }
    }

    fn objective(&self) -> Quadratic {
        Quadratic::integer_targets(self.nodes).with_noise(self.noise_std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    EdgeProbability,
    PoissonDelay,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::EdgeProbability => "p_sweep",
            Sweep::PoissonDelay => "lambda_sweep",
        }
    }
}

/// Mean curves of one sweep value over all replications.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub value: f64,
    pub mean_cost_subopt: Vec<f64>,
    pub mean_consensus_subopt: Vec<f64>,
    /// Set when the point could not be run; the curves are then empty.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub sweep: Sweep,
    pub config: ExperimentConfig,
    pub iterations: usize,
    pub points: Vec<PointResult>,
    /// Baseline means over replications.
    pub baseline_cost: Vec<f64>,
    pub baseline_consensus: Vec<f64>,
    /// Largest state gap between the baseline and centralized SGD, over all
    /// replications and iterations.
    pub baseline_sgd_gap: f64,
}

/// Poisson draw by inversion of the cumulative distribution.
pub fn poisson_inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0;
    // The tail guard stops at the point where the remaining mass is below
    // double precision.
    while u > cdf && p > 0.0 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Independent Poisson(λ) delays for a graph, drawn in ascending edge order.
pub fn poisson_delays<R: Rng + ?Sized>(
    g: &crate::digraph::Digraph,
    lambda: f64,
    mode: DelayMode,
    rng: &mut R,
) -> DelaySpec {
    let mut spec = DelaySpec::new();
    match mode {
        DelayMode::Edge => {
            for (from, to) in g.edges().filter(|(f, t)| f != t) {
                spec.insert(from, to, poisson_inversion(lambda, rng));
            }
        }
        DelayMode::Node => {
            let per_node: Vec<usize> = (0..g.node_count())
                .map(|_| poisson_inversion(lambda, rng))
                .collect();
            for (from, to) in g.edges().filter(|(f, t)| f != t) {
                spec.insert(from, to, per_node[from]);
            }
        }
    }
    spec
}

struct Replication {
    cost: Vec<f64>,
    consensus: Vec<f64>,
}

impl From<Trace> for Replication {
    fn from(t: Trace) -> Self {
        Self {
            cost: t.cost,
            consensus: t.consensus,
        }
    }
}

struct Baseline {
    runs: Vec<Replication>,
    gap: f64,
}

/// DT-GO on the complete undelayed graph, which coincides with centralized
/// SGD; using it as the reference makes the `p = 1` and `λ = 0` points
/// exactly zero instead of zero up to rounding.
fn baseline(cfg: &ExperimentConfig, iterations: usize) -> Result<Baseline> {
    let objective = cfg.objective();
    let net = Network::undelayed(complete_graph(cfg.nodes)?)?;
    let runs: Vec<Result<(Replication, f64)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let dt = cfg.dtgo(iterations, cfg.base_seed + r as u64);
            let trace = dtgo_run(&net, &objective, &dt)?;
            let sgd = centralized_sgd_run(&objective, &dt)?;
            let gap = trace
                .states
                .iter()
                .zip(&sgd.states)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            Ok((trace.into(), gap))
        })
        .collect();
    let mut out = Baseline {
        runs: Vec::with_capacity(cfg.replications),
        gap: 0.0,
    };
    for run in runs {
        let (rep, gap) = run?;
        out.runs.push(rep);
        out.gap = out.gap.max(gap);
    }
    Ok(out)
}

fn mean_curve(curves: impl Iterator<Item = Vec<f64>>, len: usize, count: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    // Sequential in replication order, so the result does not depend on
    // the thread schedule.
    for c in curves {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / count as f64).collect()
}

fn sweep<F>(
    cfg: &ExperimentConfig,
    sweep: Sweep,
    values: &[f64],
    iterations: usize,
    build: F,
) -> Result<ExperimentResult>
where
    F: Fn(f64, &mut ChaCha8Rng) -> Result<Network> + Sync,
{
    cfg.validate()?;
    let base = baseline(cfg, iterations)?;
    let objective = cfg.objective();
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|i| (0..cfg.replications).map(move |r| (i, r)))
        .collect();
    let runs: Vec<Result<Replication>> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let seed = cfg.base_seed + r as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = build(values[i], &mut rng)?;
            Ok(dtgo_run(&net, &objective, &cfg.dtgo(iterations, seed))?.into())
        })
        .collect();
    let mut runs = runs.into_iter();
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let reps: Vec<Result<Replication>> = runs.by_ref().take(cfg.replications).collect();
        let point = match reps.into_iter().collect::<Result<Vec<_>>>() {
            Ok(reps) => {
                let len = iterations + 1;
                let subopt = |pick: fn(&Replication) -> &Vec<f64>| {
                    mean_curve(
                        reps.iter().zip(&base.runs).map(|(a, b)| {
                            pick(a).iter().zip(pick(b)).map(|(x, y)| x - y).collect()
                        }),
                        len,
                        cfg.replications,
                    )
                };
                PointResult {
                    value,
                    mean_cost_subopt: subopt(|r| &r.cost),
                    mean_consensus_subopt: subopt(|r| &r.consensus),
                    failure: None,
                }
            }
            Err(e) => {
                log::error!("{} point {value}: {e}", sweep.name());
                PointResult {
                    value,
                    mean_cost_subopt: Vec::new(),
                    mean_consensus_subopt: Vec::new(),
                    failure: Some(e.to_string()),
                }
            }
        };
        points.push(point);
    }
    let len = iterations + 1;
    Ok(ExperimentResult {
        sweep,
        config: cfg.clone(),
        iterations,
        points,
        baseline_cost: mean_curve(
            base.runs.iter().map(|r| r.cost.clone()),
            len,
            cfg.replications,
        ),
        baseline_consensus: mean_curve(
            base.runs.iter().map(|r| r.consensus.clone()),
            len,
            cfg.replications,
        ),
        baseline_sgd_gap: base.gap,
    })
}

/// DT-GO on random strongly connected digraphs for each edge probability.
pub fn p_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if let Some(p) = cfg.p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidConfig(format!(
            "edge probability {p} outside (0, 1]"
        )));
    }
    let n = cfg.nodes;
    sweep(
        cfg,
        Sweep::EdgeProbability,
        &cfg.p_values,
        cfg.iterations.unwrap_or(500),
        |p, rng| Network::undelayed(sample_strongly_connected(n, p, rng, DEFAULT_MAX_ATTEMPTS)?),
    )
}

/// DT-GO on the complete graph with random Poisson delays for each rate.
pub fn lambda_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if let Some(l) = cfg
        .lambda_values
        .iter()
        .find(|l| !(**l >= 0.0 && l.is_finite()))
    {
        return Err(Error::InvalidConfig(format!(
            "delay rate {l} must be finite and non-negative"
        )));
    }
    let g = complete_graph(cfg.nodes)?;
    let mode = cfg.delay_mode;
    sweep(
        cfg,
        Sweep::PoissonDelay,
        &cfg.lambda_values,
        cfg.iterations.unwrap_or(30),
        |lambda, rng| {
            let delays = poisson_delays(&g, lambda, mode, rng);
            Network::with_delays(g.clone(), delays)
        },
    )
}

impl ExperimentResult {
    pub fn point(&self, value: f64) -> Option<&PointResult> {
        self.points.iter().find(|p| p.value == value)
    }

    /// The sweep's qualitative claims; returns one message per violation.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut failures = Vec::new();
        for p in &self.points {
            if let Some(e) = &p.failure {
                failures.push(format!("point {} failed: {e}", p.value));
            }
        }
        let reference = match self.sweep {
            Sweep::EdgeProbability => 1.0,
            Sweep::PoissonDelay => 0.0,
        };
        if let Some(p) = self.point(reference) {
            if p.mean_cost_subopt
                .iter()
                .chain(&p.mean_consensus_subopt)
                .any(|v| *v != 0.0)
            {
                failures.push(format!(
                    "reference point {reference} is not identically zero"
                ));
            }
        }
        let mut ok: Vec<&PointResult> =
            self.points.iter().filter(|p| p.failure.is_none()).collect();
        ok.sort_by(|a, b| a.value.total_cmp(&b.value));
        if self.iterations >= CHECK_ITERATION {
            let at: Vec<f64> = ok
                .iter()
                .map(|p| p.mean_consensus_subopt[CHECK_ITERATION])
                .collect();
            let monotone = match self.sweep {
                Sweep::EdgeProbability => at.windows(2).all(|w| w[1] <= w[0]),
                Sweep::PoissonDelay => at.windows(2).all(|w| w[1] >= w[0]),
            };
            if !monotone {
                failures.push(format!(
                    "consensus suboptimality at iteration {CHECK_ITERATION} not monotone: {at:?}"
                ));
            }
        }
        if self.sweep == Sweep::EdgeProbability {
            if let Some(p) = ok.first() {
                if !p.mean_cost_subopt.iter().any(|v| *v < 0.0) {
                    failures.push(format!("no negative cost suboptimality at p = {}", p.value));
                }
            }
        }
        failures
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("sweep_value,iteration,mean_cost_subopt,mean_consensus_subopt\n");
        for p in self.points.iter().filter(|p| p.failure.is_none()) {
            for (t, (c, s)) in p
                .mean_cost_subopt
                .iter()
                .zip(&p.mean_consensus_subopt)
                .enumerate()
            {
                writeln!(out, "{},{t},{c},{s}", p.value).unwrap();
            }
        }
        out
    }

    pub fn baseline_csv(&self) -> String {
        let mut out = String::from("iteration,mean_cost,mean_consensus\n");
        for (t, (c, s)) in self
            .baseline_cost
            .iter()
            .zip(&self.baseline_consensus)
            .enumerate()
        {
            writeln!(out, "{t},{c},{s}").unwrap();
        }
        out
    }

    pub fn metadata(&self) -> String {
        let mut out = String::new();
        writeln!(out, "version = \"{}\"", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "sweep = \"{}\"", self.sweep.name()).unwrap();
        writeln!(out, "iterations = {}", self.iterations).unwrap();
        let seeds: Vec<String> = (0..self.config.replications)
            .map(|r| (self.config.base_seed + r as u64).to_string())
            .collect();
        writeln!(out, "seeds = [{}]", seeds.join(", ")).unwrap();
        writeln!(out, "baseline_sgd_gap = {:e}", self.baseline_sgd_gap).unwrap();
        for p in &self.points {
            if let Some(e) = &p.failure {
                writeln!(out, "# point {} failed: {e}", p.value).unwrap();
            }
        }
        writeln!(out, "\n[config]").unwrap();
        out.push_str(&self.config.to_toml());
        out
    }
}

/// Writes `<sweep>.csv`, `<sweep>_baseline.csv` and `<sweep>.meta` into `dir`.
pub fn emit_results(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let name = result.sweep.name();
    let files = [
        (dir.join(format!("{name}.csv")), result.to_csv()),
        (
            dir.join(format!("{name}_baseline.csv")),
            result.baseline_csv(),
        ),
        (dir.join(format!("{name}.meta")), result.metadata()),
    ];
    let mut paths = Vec::new();
    for (path, text) in files {
        fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}
