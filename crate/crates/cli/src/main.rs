use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dtgo::consensus::{
    gossip_average_demo, normal_initial_values, WarmupRounds, DEFAULT_WARMUP_TOLERANCE,
};
use dtgo::digraph::Digraph;
use dtgo::experiments::{emit_results, lambda_sweep, p_sweep, ExperimentConfig};
use dtgo::gossip::{
    contraction_factor, correction_factors, delay_mixing_bound, delayed_stationary_weights,
    deviation_frobenius_sq, stationary_weights, DelaySpec, GossipMatrix,
};
use dtgo::io::{load_delays, load_graph, parse_matrix, read_text, write_matrix};
use dtgo::optimizer::{
    dtgo_run, CorrectionSource, DtgoConfig, Engine, InitialState, Quadratic, StepSchedule,
};
use dtgo::simulator::Network;
use dtgo::Error;

/// Extended matrices above this size skip the dense contraction estimate.
const DENSE_LIMIT: usize = 2000;
/// ...and the measured deviation curve, which needs every power up to t.
const MEASURED_LIMIT: usize = 300;

#[derive(Parser, Debug)]
#[command(
    name = "dtgo",
    version,
    about = "Decentralized SGD over delayed directed graphs"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write outputs and a `.meta` file here instead of stdout/stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// -v for info, -vv for debug logging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plain or corrected gossip averaging of Normal(0, 5) node values.
    DemoGossip {
        #[arg(long, default_value = "builtin:fig1")]
        graph: String,
        #[arg(long, action = clap::ArgAction::Set, default_value_t = false)]
        corrected: bool,
        #[arg(long, default_value_t = 500)]
        rounds: usize,
    },
    /// Stationary weights, contraction and delay-bound parameters.
    Spectral {
        #[command(flatten)]
        net: NetArgs,
        /// Dense gossip matrix to analyse instead of inverse in-degree weights.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long = "tau-g", default_value_t = 1)]
        tau_g: usize,
        /// Iterations at which to sample the geometric bound.
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        bound_t: Vec<usize>,
        /// Also write the (extended) matrix as dense text.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Warm-up plus DT-GO on the quadratic objectives.
    Run(RunArgs),
    /// Parameter sweeps against the centralized baseline.
    Experiment {
        #[arg(value_enum)]
        sweep: SweepKind,
        /// TOML file with experiment settings; defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long = "T")]
        iterations: Option<usize>,
        /// Sweep grid (p or λ values), comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Exit nonzero when a qualitative invariant of the sweep fails.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args, Debug)]
struct NetArgs {
    /// Edge-list file or `builtin:fig1`, `builtin:fig3`, `builtin:complete:N`.
    #[arg(long, default_value = "builtin:fig1")]
    graph: String,
    /// `from to delay` file; replaces any builtin delays.
    #[arg(long)]
    delays: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Quadratic)]
    objective: ObjectiveKind,
    #[arg(long = "T", default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    eta0: f64,
    #[arg(long, value_enum, default_value_t = ScheduleKind::InverseSqrt)]
    schedule: ScheduleKind,
    #[arg(long = "tau-g", default_value_t = 1)]
    tau_g: usize,
    /// `auto` or a fixed number of warm-up rounds.
    #[arg(long, default_value = "auto")]
    warmup: String,
    #[arg(long, value_enum, default_value_t = Mode::Protocol)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = EngineKind::Network)]
    engine: EngineKind,
    /// Standard deviation of additive gradient noise.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Common initial state of every node.
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepKind {
    PSweep,
    LambdaSweep,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ObjectiveKind {
    Quadratic,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScheduleKind {
    InverseSqrt,
    Constant,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Protocol,
    Oracle,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EngineKind {
    Network,
    Matrix,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
enum Failure {
    Lib(Error),
    Invariants(Vec<String>),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib(e) => match e {
                Error::InvalidGraph(_) | Error::Parse { .. } => 3,
                Error::NotStronglyConnected | Error::SamplingExhausted { .. } => 4,
                Error::InvalidConfig(_)
                | Error::InvalidDelays(_)
                | Error::InvalidMatrix(_)
                | Error::DimensionMismatch(_)
                | Error::NegativeWeight(_) => 5,
                Error::Diverged { .. } => 6,
                Error::NoConvergence { .. }
                | Error::NonPositiveWeight { .. }
                | Error::IdCollision { .. } => 7,
                Error::Io(_) => 9,
            },
            Failure::Invariants(_) => 8,
        }
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Invariants(v) => write!(f, "invariant checks failed:\n  {}", v.join("\n  ")),
        }
    }
}

/// Key-value echo of the resolved configuration.
#[derive(Default)]
struct Meta(Vec<(String, String)>);

impl Meta {
    fn new(command: &str, seed: u64) -> Self {
        let mut m = Meta::default();
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m.set("seed", seed);
        m
    }

    fn set(&mut self, key: &str, value: impl Display) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Sends the main output and its metadata to `--out` files or to
/// stdout/stderr.
struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    fn emit(&self, files: &[(&str, String)], meta: &Meta, meta_name: &str) -> Result<(), Failure> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                for (name, text) in files {
                    fs::write(dir.join(name), text)?;
                }
                fs::write(dir.join(format!("{meta_name}.meta")), meta.render())?;
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                for (_, text) in files {
                    stdout.write_all(text.as_bytes())?;
                }
                eprint!("{}", meta.render());
            }
        }
        Ok(())
    }
}

fn load_network(args: &NetArgs, meta: &mut Meta) -> Result<(Digraph, DelaySpec), Failure> {
    let (g, mut delays) = load_graph(&args.graph)?;
    if let Some(path) = &args.delays {
        delays = load_delays(path)?;
        meta.set("delays", path.display());
    }
    meta.set("graph", &args.graph);
    meta.set("nodes", g.node_count());
    meta.set("max_delay", delays.max_delay());
    Ok((g, delays))
}

fn demo_gossip(cli: &Cli, graph: &str, corrected: bool, rounds: usize) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let mut meta = Meta::new("demo-gossip", seed);
    let (g, delays) = load_network(
        &NetArgs {
            graph: graph.to_string(),
            delays: None,
        },
        &mut meta,
    )?;
    let net = Network::with_delays(g, delays)?;
    let x0 = normal_initial_values(net.node_count(), seed);
    let trace = gossip_average_demo(&net, &x0, corrected, rounds)?;
    meta.set("corrected", corrected);
    meta.set("rounds", rounds);
    meta.set("initial_values", list(&x0));
    meta.set("sample_mean", x0.iter().sum::<f64>() / x0.len() as f64);
    meta.set("predicted_limit", trace.predicted_limit);
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    Sink {
        out: cli.out.clone(),
    }
    .emit(
        &[("demo_gossip.csv", String::from_utf8(csv).expect("ascii"))],
        &meta,
        "demo_gossip",
    )
}

/// Builds the network from a dense matrix: the support defines the links.
fn network_from_matrix(path: &std::path::Path, delays: DelaySpec) -> Result<Network, Failure> {
    let m = parse_matrix(&read_text(path)?)?;
    let n = m.nrows();
    let edges = (0..n)
        .flat_map(|to| (0..n).map(move |from| (from, to)))
        .filter(|&(from, to)| m[(to, from)] != 0.0);
    let g = Digraph::new(n, edges.collect::<Vec<_>>())?;
    let w = GossipMatrix::from_dense(m, n)?;
    Ok(Network::new(g, w, delays)?)
}

fn spectral(
    cli: &Cli,
    net_args: &NetArgs,
    matrix: Option<&PathBuf>,
    tau_g: usize,
    bound_t: &[usize],
    dump: bool,
) -> Result<(), Failure> {
    let mut meta = Meta::new("spectral", cli.seed.unwrap_or(0));
    let (g, delays) = load_network(net_args, &mut meta)?;
    let net = match matrix {
        Some(path) => {
            meta.set("matrix", path.display());
            network_from_matrix(path, delays.clone())?
        }
        None => Network::with_delays(g, delays.clone())?,
    };
    meta.set("tau_g", tau_g);
    let base = stationary_weights(net.weights())?;
    let info = delayed_stationary_weights(net.weights(), &base, &delays)?;
    let mut report = Meta::default();
    report.set("nodes", net.node_count());
    report.set("extended_nodes", net.extended_size());
    report.set("pi", list(info.real_pi()));
    if info.size() > info.real_count {
        report.set("relay_pi", list(&info.pi[info.real_count..]));
    }
    report.set(
        "correction",
        list(&correction_factors(&info)?[..info.real_count]),
    );
    report.set("stationary_residual", format!("{:e}", base.residual));
    report.set("tau_g", tau_g);
    let mut files = Vec::new();
    if net.extended_size() <= DENSE_LIMIT {
        let w_v = net.extended_matrix()?;
        let contraction = contraction_factor(&w_v, &info, tau_g)?;
        report.set("contraction_sq", contraction);
        report.set("c", 1.0 - contraction);
        let bound = delay_mixing_bound(&w_v, &delays);
        report.set("B1", bound.max_delay);
        report.set("B2", bound.horizon);
        report.set("eta_min", bound.eta_min);
        let ts: Vec<f64> = bound_t.iter().map(|&t| t as f64).collect();
        report.set("bound_t", list(&ts));
        let values: Vec<f64> = bound_t.iter().map(|&t| bound.bound(t)).collect();
        report.set("bound", list(&values));
        let ln_values: Vec<f64> = bound_t.iter().map(|&t| bound.ln_bound(t)).collect();
        report.set("ln_bound", list(&ln_values));
        if net.extended_size() <= MEASURED_LIMIT {
            let t_max = bound_t.iter().copied().max().unwrap_or(0);
            let curve = deviation_frobenius_sq(&w_v, &info, t_max)?;
            let measured: Vec<f64> = bound_t
                .iter()
                .map(|&t| if t == 0 { f64::NAN } else { curve[t - 1] })
                .collect();
            report.set("measured_frobenius_sq", list(&measured));
        }
        if dump {
            files.push(("matrix.txt", write_matrix(w_v.entries())));
        }
    } else {
        log::warn!(
            "extended matrix has {} nodes; skipping dense diagnostics",
            net.extended_size()
        );
    }
    files.insert(0, ("spectral.txt", report.render()));
    Sink {
        out: cli.out.clone(),
    }
    .emit(&files, &meta, "spectral")
}

fn parse_warmup(text: &str) -> Result<WarmupRounds, Failure> {
    if text == "auto" {
        return Ok(WarmupRounds::Auto {
            tolerance: DEFAULT_WARMUP_TOLERANCE,
            cap: None,
        });
    }
    text.parse().map(WarmupRounds::Fixed).map_err(|_| {
        Failure::Lib(Error::InvalidConfig(format!(
            "--warmup must be `auto` or a round count, got {text:?}"
        )))
    })
}

fn run(cli: &Cli, args: &RunArgs) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let mut meta = Meta::new("run", seed);
    let (g, delays) = load_network(&args.net, &mut meta)?;
    let net = Network::with_delays(g, delays)?;
    let objective = match args.objective {
        ObjectiveKind::Quadratic => {
            Quadratic::integer_targets(net.node_count()).with_noise(args.sigma)
        }
    };
    let schedule = match args.schedule {
        ScheduleKind::InverseSqrt => StepSchedule::InverseSqrt { eta0: args.eta0 },
        ScheduleKind::Constant => StepSchedule::Constant { eta: args.eta0 },
    };
    let correction = match args.mode {
        Mode::Protocol => CorrectionSource::Protocol(parse_warmup(&args.warmup)?),
        Mode::Oracle => CorrectionSource::Oracle,
    };
    let cfg = DtgoConfig {
        iterations: args.iterations,
        tau_g: args.tau_g,
        schedule,
        seed,
        correction,
        engine: match args.engine {
            EngineKind::Network => Engine::Network,
            EngineKind::Matrix => Engine::Matrix,
        },
        initial: InitialState::Common(vec![args.x0]),
        check_contraction: true,
    };
    meta.set("objective", "quadratic");
    meta.set("T", args.iterations);
    meta.set("eta0", args.eta0);
    meta.set("schedule", format!("{:?}", args.schedule));
    meta.set("tau_g", args.tau_g);
    meta.set("mode", format!("{:?}", args.mode));
    meta.set("warmup", &args.warmup);
    meta.set("engine", format!("{:?}", args.engine));
    meta.set("sigma", args.sigma);
    meta.set("x0", args.x0);
    let trace = dtgo_run(&net, &objective, &cfg)?;
    if let Some(w) = &trace.warmup {
        meta.set("warmup_rounds", w.rounds);
        meta.set("warmup_converged", w.converged);
        meta.set("warmup_sizes_agree", w.sizes_agree());
    }
    meta.set("corrections", list(&trace.corrections));
    if let Some(c) = &trace.contraction {
        meta.set("contraction_sq", c.contraction_sq);
    }
    meta.set("max_grad_norm", trace.max_grad_norm);
    let residual = trace
        .preservation_residuals()
        .into_iter()
        .fold(0.0, f64::max);
    meta.set("max_preservation_residual", format!("{residual:e}"));
    meta.set("final_cost", trace.cost[trace.iterations()]);
    meta.set("final_consensus", trace.consensus[trace.iterations()]);
    let mut states = Vec::new();
    trace.write_states_csv(&mut states)?;
    let mut summary = Vec::new();
    trace.write_summary_csv(&mut summary)?;
    let mut files = vec![("run_trace.csv", String::from_utf8(states).expect("ascii"))];
    // On stdout only the per-node trace is printed.
    if cli.out.is_some() {
        files.push((
            "run_summary.csv",
            String::from_utf8(summary).expect("ascii"),
        ));
    }
    Sink {
        out: cli.out.clone(),
    }
    .emit(&files, &meta, "run")
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    cli: &Cli,
    sweep: SweepKind,
    config: Option<&PathBuf>,
    replications: Option<usize>,
    nodes: Option<usize>,
    iterations: Option<usize>,
    values: Option<&Vec<f64>>,
    check: bool,
) -> Result<(), Failure> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::from_toml(&read_text(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    if let Some(n) = nodes {
        cfg.nodes = n;
    }
    if iterations.is_some() {
        cfg.iterations = iterations;
    }
    if let Some(v) = values {
        match sweep {
            SweepKind::PSweep => cfg.p_values = v.clone(),
            SweepKind::LambdaSweep => cfg.lambda_values = v.clone(),
        }
    }
    info!("running {sweep:?} with {} replications", cfg.replications);
    let result = match sweep {
        SweepKind::PSweep => p_sweep(&cfg)?,
        SweepKind::LambdaSweep => lambda_sweep(&cfg)?,
    };
    match &cli.out {
        Some(dir) => {
            emit_results(&result, dir)?;
        }
        None => {
            print!("{}", result.to_csv());
            eprint!("{}", result.metadata());
        }
    }
    if check {
        let failures = result.check_invariants();
        if !failures.is_empty() {
            return Err(Failure::Invariants(failures));
        }
    } else if result.points.iter().any(|p| p.failure.is_some()) {
        log::warn!("some sweep points failed; see the metadata");
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::DemoGossip {
            graph,
            corrected,
            rounds,
        } => demo_gossip(cli, graph, *corrected, *rounds),
        Command::Spectral {
            net,
            matrix,
            tau_g,
            bound_t,
            dump_matrix,
        } => {
            if *tau_g == 0 {
                return Err(Failure::Usage("--tau-g must be at least 1".into()));
            }
            spectral(cli, net, matrix.as_ref(), *tau_g, bound_t, *dump_matrix)
        }
        Command::Run(args) => run(cli, args),
        Command::Experiment {
            sweep,
            config,
            replications,
            nodes,
            iterations,
            values,
            check,
        } => experiment(
            cli,
            *sweep,
            config.as_ref(),
            *replications,
            *nodes,
            *iterations,
            values.as_ref(),
            *check,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
