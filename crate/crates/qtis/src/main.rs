//! Command-line front end: benchmark grid runs, reference-table checks,
//! single-instance solves, and circuit text dumps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use qtis::circuits::{
    build_ansatz, standalone_conflict_circuit, AnsatzConfig, ConflictVariant, ZetaMode,
};
use qtis::harness::{
    decode_solution, export_results, modal_assignment_bits, run_batch, verify_tables,
    ExperimentConfig, ExportFormat, Strategy, DEFAULT_BASE_SEED,
};
use qtis::model::{builtin_test_set, load_instance, SchedulingInstance};
use qtis::optimize::{
    strategy_htqaoa, strategy_standard, strategy_tqaoa, Estimator, OptimizerOptions, ParameterVector,
    ScoreMode,
};
use qtis::sim::bitstring;
use qtis::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qtis",
    version,
    about = "Conflict-aware variational scheduling of fixed-interval tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark grid and export results.
    Run(RunArgs),
    /// Check the built-in sets against their reference values.
    Verify,
    /// Optimize one instance and print the decoded schedule.
    Solve(SolveArgs),
    /// Print a circuit as text.
    DumpCircuit(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Test sets: a range like `1..6` (inclusive) or a comma list like `1,4`.
    #[arg(long, default_value = "1..6")]
    sets: String,
    /// Comma list of `standard`, `tqaoa`, `htqaoa`.
    #[arg(long, default_value = "standard,tqaoa,htqaoa")]
    strategies: String,
    /// `independent`, `shared`, or `both`.
    #[arg(long, default_value = "independent")]
    zeta_mode: String,
    /// Conflict front end: `classical` or `quantum`.
    #[arg(long, default_value = "classical")]
    variant: ConflictVariant,
    /// Ansatz depth L.
    #[arg(long, default_value_t = 10)]
    depth: usize,
    /// Independent runs per cell.
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Energy estimator: `exact` or `sampled`.
    #[arg(long, default_value = "exact")]
    estimator: String,
    /// Shots per estimate in sampled mode.
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    /// Base seed; run seeds derive from it per cell and run.
    #[arg(long, default_value_t = DEFAULT_BASE_SEED)]
    seed: u64,
    /// Score energies from the measured ancillas instead of ground truth.
    #[arg(long)]
    score_from_ancilla: bool,
    /// Drop conflict gates of pairs the instance shows never overlap.
    #[arg(long)]
    prune: bool,
    /// Output directory for result files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Export format: `csv`, `json`, or `both`.
    #[arg(long, default_value = "both")]
    format: String,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance document (JSON with tasks, resources, optional penalty).
    #[arg(long, conflicts_with = "set")]
    instance: Option<PathBuf>,
    /// Built-in test set id (1–6).
    #[arg(long)]
    set: Option<usize>,
    #[arg(long, default_value = "standard")]
    strategy: Strategy,
    #[arg(long, default_value = "independent")]
    zeta_mode: ZetaMode,
    #[arg(long, default_value = "classical")]
    variant: ConflictVariant,
    #[arg(long, default_value_t = 10)]
    depth: usize,
    #[arg(long, default_value_t = DEFAULT_BASE_SEED)]
    seed: u64,
    #[arg(long, default_value = "exact")]
    estimator: String,
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    #[arg(long)]
    score_from_ancilla: bool,
    #[arg(long)]
    prune: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, conflicts_with = "set")]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    set: usize,
    #[arg(long, default_value = "classical")]
    variant: ConflictVariant,
    #[arg(long, default_value = "independent")]
    zeta_mode: ZetaMode,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// Dump only the conflict-detection front end.
    #[arg(long)]
    conflict_only: bool,
    /// Angle replicated across the `γ` block.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Angle replicated across the `ζ` block (independent mode).
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    /// Angle replicated across the `β` block.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
}

fn parse_sets(text: &str) -> Result<Vec<usize>> {
    let parse_one = |s: &str| -> Result<usize> {
        s.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad set id '{s}'")))
    };
    if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (parse_one(lo)?, parse_one(hi)?);
        if lo > hi {
            return Err(Error::Config(format!("empty set range '{text}'")));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',').map(parse_one).collect()
}

fn parse_strategies(text: &str) -> Result<Vec<Strategy>> {
    text.split(',').map(|s| s.trim().parse()).collect()
}

fn parse_zeta_modes(text: &str) -> Result<Vec<ZetaMode>> {
    if text == "both" {
        return Ok(vec![ZetaMode::Independent, ZetaMode::Shared]);
    }
    Ok(vec![text.parse()?])
}

fn parse_estimator(text: &str, shots: u64) -> Result<Estimator> {
    match text {
        "exact" => Ok(Estimator::Exact),
        "sampled" => Ok(Estimator::Sampled { shots }),
        other => Err(Error::Config(format!(
            "unknown estimator '{other}' (exact|sampled)"
        ))),
    }
}

fn score_mode(from_ancilla: bool) -> ScoreMode {
    if from_ancilla {
        ScoreMode::FromAncilla
    } else {
        ScoreMode::GroundTruth
    }
}

fn load_from(path: &PathBuf) -> Result<SchedulingInstance> {
    let document = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_instance(&document)
}

fn resolve_instance(instance: &Option<PathBuf>, set: Option<usize>) -> Result<SchedulingInstance> {
    match (instance, set) {
        (Some(path), _) => load_from(path),
        (None, Some(id)) => builtin_test_set(id),
        (None, None) => Err(Error::Config(
            "pass --instance <file> or --set <id>".into(),
        )),
    }
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let config = ExperimentConfig {
        sets: parse_sets(&args.sets)?,
        strategies: parse_strategies(&args.strategies)?,
        zeta_modes: parse_zeta_modes(&args.zeta_mode)?,
        variant: args.variant,
        depth: args.depth,
        runs: args.runs,
        estimator: parse_estimator(&args.estimator, args.shots)?,
        score_mode: score_mode(args.score_from_ancilla),
        prune: args.prune,
        base_seed: args.seed,
    };
    let batches = run_batch(&config)?;
    for b in &batches {
        match &b.error {
            Some(message) => println!(
                "set {} {} {}: FAILED: {message}",
                b.set_id, b.strategy, b.zeta_mode
            ),
            None => println!(
                "set {} {} {}: mean E_norm {:.6}, min {:.6}, mean wall {:.3}s",
                b.set_id,
                b.strategy,
                b.zeta_mode,
                b.mean_e_norm().unwrap_or(f64::NAN),
                b.min_e_norm().unwrap_or(f64::NAN),
                b.mean_wall_s().unwrap_or(f64::NAN),
            ),
        }
    }
    let formats: &[ExportFormat] = match args.format.as_str() {
        "csv" => &[ExportFormat::Csv],
        "json" => &[ExportFormat::Json],
        "both" => &[ExportFormat::Csv, ExportFormat::Json],
        other => {
            return Err(Error::Config(format!(
                "unknown export format '{other}' (csv|json|both)"
            )))
        }
    };
    for &format in formats {
        for path in export_results(&config, &batches, format, &args.out)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(batches.iter().all(|b| b.error.is_none()))
}

fn cmd_verify() -> bool {
    let report = verify_tables();
    for check in &report.checks {
        println!(
            "{} {} — {}",
            if check.passed { "ok  " } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    report.all_passed()
}

fn cmd_solve(args: &SolveArgs) -> Result<bool> {
    let instance = resolve_instance(&args.instance, args.set)?;
    let ansatz = AnsatzConfig {
        depth: args.depth,
        zeta_mode: args.zeta_mode,
        variant: args.variant,
        prune: args.prune,
    };
    let options = OptimizerOptions {
        rng_seed: args.seed,
        estimator: parse_estimator(&args.estimator, args.shots)?,
        score_mode: score_mode(args.score_from_ancilla),
        ..Default::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let run = match args.strategy {
        Strategy::Standard => strategy_standard(&instance, &ansatz, &options, &mut rng)?,
        Strategy::Tqaoa => strategy_tqaoa(&instance, &ansatz, &options, &mut rng)?,
        Strategy::Htqaoa => strategy_htqaoa(&instance, &ansatz, &options, &mut rng)?,
    };
    println!(
        "E_norm {:.6} (raw energy {:.6}) after {} evaluations in {:.3}s{}",
        run.e_norm,
        run.raw_energy,
        run.evaluations,
        run.wall_time,
        if run.converged { "" } else { " (not converged)" },
    );
    println!(
        "modal outcome {}",
        bitstring(run.modal_outcome(), run.distribution.n_bits())
    );
    let schedule = decode_solution(&modal_assignment_bits(&run, &instance), &instance)?;
    println!("{schedule}");
    Ok(true)
}

fn cmd_dump(args: &DumpArgs) -> Result<bool> {
    let instance = match &args.instance {
        Some(path) => load_from(path)?,
        None => builtin_test_set(args.set)?,
    };
    let circuit = if args.conflict_only {
        standalone_conflict_circuit(&instance, args.variant)?.0
    } else {
        let params = ParameterVector::new(
            vec![args.gamma; args.depth],
            matches!(args.zeta_mode, ZetaMode::Independent)
                .then(|| vec![args.zeta; args.depth]),
            vec![args.beta; args.depth],
        )?;
        let config = AnsatzConfig {
            depth: args.depth,
            zeta_mode: args.zeta_mode,
            variant: args.variant,
            prune: false,
        };
        build_ansatz(&instance, &config, &params)?.circuit
    };
    print!("{}", circuit.dump());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify => Ok(cmd_verify()),
        Command::Solve(args) => cmd_solve(args),
        Command::DumpCircuit(args) => cmd_dump(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}
