//! `chordcorr`: synthetic data, offline diagrams, sampling benchmarks,
//! estimator validation and the HTTP server.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 validation failure.

mod validate;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chordcorr_core::ensemble::{gen_synthetic, load_ensemble, save_ensemble, EnsembleGrid, SyntheticSpec};
use chordcorr_core::layout::{export_svg, Filters, Palette};
use chordcorr_core::pipeline::{
    compute_context, compute_matrix, context_partition, dataset_fingerprint, BrickSpec, ComputeConfig, Control,
    DatasetOracle,
};
use chordcorr_core::sampling::{bench_strategies, rows_to_csv, summarize, BenchOracle, BenchSummary, Gaussian6Oracle};
use chordcorr_core::{EnsembleStore, MeasureKind, Strategy, StrategyConfig};
use chordcorr_service::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "chordcorr", version, about = "Sampled brick correlations and chord diagrams for 3D ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic ensemble file.
    GenSynth(GenSynthArgs),
    /// Compute a context chord diagram (or matrix) and write JSON and SVG.
    Context(ContextArgs),
    /// Benchmark sampling strategies and write a convergence CSV.
    Bench(BenchArgs),
    /// Run the estimator validation suite.
    Validate(ValidateArgs),
    /// Start the HTTP/JSON server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    /// TOML spec; without it the two-cluster layout is generated.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Grid dims for the two-cluster layout.
    #[arg(long, value_delimiter = ',', default_values_t = [64, 64, 8])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    members: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

/// Where the ensemble comes from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// Ensemble file.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Synthetic TOML spec, generated in memory.
    #[arg(long)]
    synth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SamplingArgs {
    /// auto, uniform, halton, plastic, bos or exhaustive.
    #[arg(long, default_value = "auto")]
    strategy: String,
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    acq_budget: usize,
}

impl SamplingArgs {
    fn config(&self) -> Result<StrategyConfig, CliError> {
        let mut c = StrategyConfig { budget: self.budget, seed: self.seed, acq_budget: self.acq_budget, ..StrategyConfig::default() };
        if self.strategy != "auto" {
            c.strategy = Some(self.strategy.parse::<Strategy>().map_err(CliError::Usage)?);
        }
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct ContextArgs {
    #[command(flatten)]
    input: InputArgs,
    /// One or two variable names; defaults to the first variable.
    #[arg(long, value_delimiter = ',')]
    variables: Vec<String>,
    #[arg(long, default_value = "ppmcc")]
    measure: MeasureKind,
    /// Brick edge in voxels.
    #[arg(long, conflicts_with = "bricks")]
    brick_edge: Option<usize>,
    /// Target brick count (default 128).
    #[arg(long)]
    bricks: Option<usize>,
    /// Mean-tree level (0 = raw voxels).
    #[arg(long, default_value_t = 0)]
    level: usize,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Inter-variable matrix over the context bricks (needs two variables).
    #[arg(long)]
    matrix: bool,
    #[arg(long)]
    value_min: Option<f64>,
    #[arg(long)]
    value_max: Option<f64>,
    #[arg(long)]
    distance_min: Option<f64>,
    #[arg(long)]
    distance_max: Option<f64>,
    /// JSON output; stdout when neither output is given.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// SVG side length in pixels.
    #[arg(long, default_value_t = 800)]
    size: u32,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// gaussian6 or dataset.
    #[arg(long, default_value = "gaussian6")]
    oracle: String,
    /// Brick extents of the gaussian6 oracle.
    #[arg(long, value_delimiter = ',', default_values_t = [32, 32, 32])]
    brick: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [25, 50, 100])]
    budgets: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = ["uniform_random".to_string(), "halton".into(), "plastic".into(), "bos".into()])]
    strategies: Vec<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    acq_budget: usize,
    /// Dataset oracle input (ensemble file).
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    brick_edge: usize,
    #[arg(long, default_value_t = 0)]
    level: usize,
    #[arg(long)]
    variable: Option<String>,
    #[arg(long, default_value = "ppmcc")]
    measure: MeasureKind,
    /// CSV output; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// JSON report.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Replace the digamma function with a wrong one (negative control).
    #[arg(long)]
    perturb_digamma: bool,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 200)]
    knn_instances: usize,
    #[arg(long, default_value_t = 50)]
    fidelity_pairs: usize,
    #[arg(long, default_value_t = 3)]
    fidelity_runs: usize,
    #[arg(long, default_value = "bos")]
    fidelity_strategy: Strategy,
    #[arg(long, default_value_t = 100)]
    fidelity_budget: usize,
    #[arg(long, default_value_t = 200)]
    fidelity_members: usize,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Bytes of raw data analysed without aggregation.
    #[arg(long, default_value_t = 4 << 30)]
    memory_budget: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Validation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_input(input: &InputArgs) -> Result<EnsembleGrid, CliError> {
    match (&input.input, &input.synth) {
        (Some(p), _) => load_ensemble(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        (None, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            let spec = SyntheticSpec::from_toml(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            gen_synthetic(&spec).map_err(data)
        }
        (None, None) => Err(CliError::Usage("give --input or --synth".into())),
    }
}

fn triple(name: &str, v: &[usize]) -> Result<[usize; 3], CliError> {
    <[usize; 3]>::try_from(v).map_err(|_| CliError::Usage(format!("--{name} takes three comma-separated values")))
}

fn gen_synth(a: GenSynthArgs) -> Result<(), CliError> {
    let dims = triple("dims", &a.dims)?;
    let spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            SyntheticSpec::from_toml(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
        }
        None => SyntheticSpec::two_cluster(dims, a.members, a.seed),
    };
    let grid = gen_synthetic(&spec).map_err(data)?;
    save_ensemble(&grid, &a.out).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
    eprintln!("wrote {} ({:?}, {} members, {} bytes)", a.out.display(), spec.dims, spec.members, grid.byte_size());
    Ok(())
}

fn context(a: ContextArgs) -> Result<(), CliError> {
    let sampling = a.sampling.config()?;
    let grid = load_input(&a.input)?;
    let key = dataset_fingerprint(&grid);
    let store = EnsembleStore::new(grid);
    let variables =
        if a.variables.is_empty() { vec![store.grid().variables()[0].name.clone()] } else { a.variables.clone() };
    let range = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
        (None, None) => None,
        (lo, hi) => Some([lo.unwrap_or(f64::MIN), hi.unwrap_or(f64::MAX)]),
    };
    let config = ComputeConfig {
        measure: a.measure,
        variables,
        level: a.level,
        bricks: match (a.brick_edge, a.bricks) {
            (Some(e), _) => BrickSpec::Edge(e),
            (None, Some(n)) => BrickSpec::Count(n),
            (None, None) => BrickSpec::default(),
        },
        sampling,
        filters: Filters {
            value_range: range(a.value_min, a.value_max),
            distance_range: range(a.distance_min, a.distance_max),
            color_range: None,
        },
        ..ComputeConfig::default()
    };
    let matrix = a.matrix && config.variables.len() == 2;
    if a.matrix && !matrix {
        eprintln!("warning: matrix mode needs two variables; writing the chord diagram");
    }
    let model = if matrix {
        let regions = context_partition(&store, config.bricks).bricks_in_zorder();
        compute_matrix(&store, &key, &regions, &config, Control::default())
    } else {
        compute_context(&store, &key, &config, Control::default())
    }
    .map_err(|e| match e {
        chordcorr_core::pipeline::PipelineError::InvalidConfig(m) => CliError::Usage(m),
        other => data(other),
    })?;
    let json = model.to_json();
    if let Some(p) = &a.json {
        write_out(p, &json)?;
    }
    if let Some(p) = &a.svg {
        write_out(p, &export_svg(&model, a.size, &Palette::default()).map_err(data)?)?;
    }
    if a.json.is_none() && a.svg.is_none() {
        println!("{json}");
    }
    eprintln!("{} nodes, {} of {} edges shown", model.nodes.len(), model.edges.len(), model.candidate_edges);
    Ok(())
}

fn print_summary(summary: &[BenchSummary]) {
    eprintln!("{:<16} {:>7} {:>12} {:>12} {:>8}", "strategy", "budget", "mean_error", "mean_ms", "samples");
    for s in summary {
        eprintln!(
            "{:<16} {:>7} {:>12.6} {:>12.3} {:>8}",
            s.strategy.name(),
            s.budget,
            s.mean_error,
            s.mean_elapsed_ms,
            s.samples
        );
    }
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    let strategies =
        a.strategies.iter().map(|s| s.parse::<Strategy>()).collect::<Result<Vec<_>, _>>().map_err(CliError::Usage)?;
    if a.budgets.contains(&0) || a.runs == 0 || a.pairs == 0 {
        return Err(CliError::Usage("budgets, runs and pairs must be positive".into()));
    }
    let base = StrategyConfig { seed: a.seed, acq_budget: a.acq_budget, ..StrategyConfig::default() };
    let rows = match a.oracle.as_str() {
        "gaussian6" => {
            let oracle = Gaussian6Oracle::new(triple("brick", &a.brick)?, a.pairs, a.seed);
            bench_strategies(&oracle, &strategies, &a.budgets, a.runs, &base)
        }
        "dataset" => {
            let path = a.input.as_ref().ok_or_else(|| CliError::Usage("--oracle dataset needs --input".into()))?;
            let store = EnsembleStore::new(load_ensemble(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?);
            let variable = match &a.variable {
                Some(v) => store.grid().variable_index(v).map_err(data)?,
                None => 0,
            };
            let partition = context_partition(&store, BrickSpec::Edge(a.brick_edge));
            let oracle =
                DatasetOracle::new(&store, &partition, variable, a.level, a.measure, a.pairs, a.seed).map_err(data)?;
            if oracle.pairs() == 0 {
                return Err(CliError::Data("no brick pair with a defined measure".into()));
            }
            bench_strategies(&oracle, &strategies, &a.budgets, a.runs, &base)
        }
        other => return Err(CliError::Usage(format!("unknown oracle {other:?} (expected gaussian6 or dataset)"))),
    };
    let csv = rows_to_csv(&rows);
    match &a.out {
        Some(p) => write_out(p, &csv)?,
        None => print!("{csv}"),
    }
    print_summary(&summarize(&rows));
    Ok(())
}

fn run_validate(a: ValidateArgs) -> Result<(), CliError> {
    let opts = validate::ValidateOptions {
        perturb_digamma: a.perturb_digamma,
        seeds: a.seeds,
        samples: a.samples,
        knn_instances: a.knn_instances,
        fidelity_pairs: a.fidelity_pairs,
        fidelity_runs: a.fidelity_runs,
        fidelity_strategy: a.fidelity_strategy,
        fidelity_budget: a.fidelity_budget,
        fidelity_members: a.fidelity_members,
        ..validate::ValidateOptions::default()
    };
    if opts.seeds == 0 || opts.samples < 4 {
        return Err(CliError::Usage("need at least one seed and four samples".into()));
    }
    let report = validate::run(&opts).map_err(CliError::Data)?;
    for c in &report.criteria {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(p) = &a.out {
        write_out(p, &serde_json::to_string_pretty(&report).map_err(data)?)?;
    }
    if report.passed {
        Ok(())
    } else {
        let failed = report.criteria.iter().filter(|c| !c.passed).count();
        Err(CliError::Validation(format!("{failed} criteria failed")))
    }
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    if a.memory_budget == 0 {
        return Err(CliError::Usage("memory budget must be positive".into()));
    }
    let config = ServiceConfig { memory_budget: a.memory_budget, default_seed: a.seed };
    let rt = tokio::runtime::Runtime::new().map_err(data)?;
    eprintln!("listening on http://{}", a.addr);
    rt.block_on(chordcorr_service::serve(a.addr, config)).map_err(data)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynth(a) => gen_synth(a),
        Command::Context(a) => context(a),
        Command::Bench(a) => bench(a),
        Command::Validate(a) => run_validate(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(m) | CliError::Data(m) | CliError::Validation(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}
