//! `raking`: data balancing of discrete joint measures from the command
//! line.
//!
//! Subcommands: `balance` (raking a measure toward target marginals),
//! `spectrum` (singular values and variance table), `gen` (synthetic
//! instances), `simulate` (Monte Carlo MSE grid), `clip-loss` (contrastive
//! loss family), `curate` (keyword-marginal corpus curation), `repro` (the
//! full benchmark grid with ordering assertions), and `replay` (re-run a
//! recorded manifest).

mod manifest;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::ManifestBuilder;
use raking::balancing::{
    balance_k_via, balance_to_convergence_via, BalanceOrder, ConvergenceError, Divergence,
};
use raking::contrastive::{balanced_clip_loss, clip_balance_diagnostics, standard_clip_loss};
use raking::curation::{plan_with_threshold, match_keywords, resample, Corpus, MatchMode};
use raking::estimation::{
    evaluate_cell, grid_ordering_violations, EstimatorKind, GridConfig, MseRecord,
};
use raking::io;
use raking::measure::{JointMeasure, TargetMarginals};
use raking::rng::derive_seed;
use raking::spectral::{decompose, predict_variances, sigma_k_direct};
use raking::synthetic::{
    corrupt_marginals, random_test_function, spectrum_controlled_measure, CorruptionSpec,
};
use std::path::{Path, PathBuf};

/// Library version plus the output-format version manifests are stamped
/// with.
const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+format.1");

#[derive(Parser)]
#[command(name = "raking", version = VERSION, about = "Data balancing for discrete joint measures")]
struct Cli {
    /// Output directory (defaults to $RAKING_OUT_DIR, then the working
    /// directory)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Balance a measure toward target marginals
    Balance(BalanceArgs),
    /// Singular values and the variance table of a measure
    Spectrum(SpectrumArgs),
    /// Generate a synthetic instance (measure, marginals, test function)
    Gen(GenArgs),
    /// Monte Carlo MSE benchmark over a dependence/misspecification grid
    Simulate(SimulateArgs),
    /// Contrastive losses of a score matrix via balancing
    ClipLoss(ClipLossArgs),
    /// Keyword-marginal curation of a text corpus
    Curate(CurateArgs),
    /// Run the benchmark grid at its reference configuration and assert the
    /// expected orderings (nonzero exit on violation)
    Repro(ReproArgs),
    /// Re-execute the invocation recorded in a manifest
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderArg {
    XFirst,
    YFirst,
}

impl From<OrderArg> for BalanceOrder {
    fn from(value: OrderArg) -> Self {
        match value {
            OrderArg::XFirst => BalanceOrder::XFirst,
            OrderArg::YFirst => BalanceOrder::YFirst,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DivergenceArg {
    Kl,
    ReverseKl,
    Chi2,
}

impl From<DivergenceArg> for Divergence {
    fn from(value: DivergenceArg) -> Self {
        match value {
            DivergenceArg::Kl => Divergence::Kl,
            DivergenceArg::ReverseKl => Divergence::ReverseKl,
            DivergenceArg::Chi2 => Divergence::Chi2,
        }
    }
}

#[derive(Args)]
struct BalanceArgs {
    /// Joint measure CSV
    #[arg(long)]
    measure: PathBuf,
    /// Target X marginal (vector CSV)
    #[arg(long)]
    marginal_x: PathBuf,
    /// Target Y marginal (vector CSV)
    #[arg(long)]
    marginal_y: PathBuf,
    /// Fixed number of balancing steps; without it, run to convergence
    #[arg(long)]
    k: Option<usize>,
    /// Sup-norm marginal tolerance for convergence mode
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = OrderArg::XFirst)]
    order: OrderArg,
    /// Divergence whose marginal projection realizes each step (all three
    /// coincide up to roundoff)
    #[arg(long, value_enum, default_value_t = DivergenceArg::Kl)]
    divergence: DivergenceArg,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Joint measure CSV
    #[arg(long)]
    measure: PathBuf,
    /// Optional test function (matrix CSV) for the sigma_k^2 table
    #[arg(long)]
    test_function: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    k_max: usize,
}

#[derive(Args)]
struct GenArgs {
    /// Support size (m x m instance)
    #[arg(long)]
    m: usize,
    /// Dependence level in (0, 1): the nontrivial singular values
    #[arg(long)]
    s: f64,
    /// Misspecification level for corrupted target marginals
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 300)]
    n: u64,
    /// Balancing steps of the balanced estimator
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Comma-separated dependence levels
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    s_grid: String,
    /// Comma-separated misspecification levels (at most 0.5 each)
    #[arg(long, default_value = "0.0,0.25,0.5")]
    epsilon_grid: String,
    /// Monte Carlo repetitions per cell
    #[arg(long, default_value_t = 200)]
    seeds: u64,
    #[arg(long, default_value_t = 7)]
    master_seed: u64,
    /// Comma-separated subset of empirical,ipwi,balanced
    #[arg(long, default_value = "empirical,ipwi,balanced")]
    estimators: String,
    /// Worker threads for fanning out over grid cells
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ClipLossArgs {
    /// Score matrix CSV (n x n)
    #[arg(long)]
    scores: PathBuf,
    /// Balancing iterations of the balanced loss
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Also write the per-iteration marginal-deviation trace CSV
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct CurateArgs {
    /// Corpus file: JSONL records {"id": ..., "text": ...} or CSV with
    /// header id,text (format inferred from the extension)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Keyword list, one per line
    #[arg(long)]
    keywords: PathBuf,
    /// Count-truncation threshold defining the target marginal
    #[arg(long)]
    threshold: u64,
    /// Where to write the per-record weights (default <out-dir>/weights.csv)
    #[arg(long)]
    output_weights: Option<PathBuf>,
    /// Also draw this many ids from the resampling distribution
    #[arg(long)]
    resample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact byte substring matching instead of normalized case-insensitive
    #[arg(long)]
    exact_match: bool,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(long, default_value_t = 200)]
    seeds: u64,
    #[arg(long, default_value_t = 7)]
    master_seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReplayArgs {
    /// Path to a manifest.json written by a previous run
    manifest: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    run(cli, None)
}

fn run(cli: Cli, recorded_argv: Option<Vec<String>>) -> Result<()> {
    let out_dir = resolve_out_dir(cli.out_dir.as_deref())?;
    match cli.command {
        Command::Balance(args) => cmd_balance(args, &out_dir, recorded_argv),
        Command::Spectrum(args) => cmd_spectrum(args, &out_dir, recorded_argv),
        Command::Gen(args) => cmd_gen(args, &out_dir, recorded_argv),
        Command::Simulate(args) => cmd_simulate(args, &out_dir, recorded_argv),
        Command::ClipLoss(args) => cmd_clip_loss(args, &out_dir, recorded_argv),
        Command::Curate(args) => cmd_curate(args, &out_dir, recorded_argv),
        Command::Repro(args) => cmd_repro(args, &out_dir, recorded_argv),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn resolve_out_dir(flag: Option<&Path>) -> Result<PathBuf> {
    let dir = match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os("RAKING_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn builder(command: &str, master_seed: Option<u64>, argv: Option<Vec<String>>) -> ManifestBuilder {
    let b = ManifestBuilder::start(command, master_seed);
    match argv {
        Some(argv) => b.with_argv(argv),
        None => b,
    }
}

fn cmd_balance(args: BalanceArgs, out_dir: &Path, argv: Option<Vec<String>>) -> Result<()> {
    let mut manifest = builder("balance", None, argv);
    let measure: JointMeasure<f64> = io::read_measure_csv_path(&args.measure)
        .with_context(|| format!("reading {}", args.measure.display()))?;
    let (_, p_x): (Vec<String>, Vec<f64>) = io::read_vector_csv_path(&args.marginal_x)?;
    let (_, p_y): (Vec<String>, Vec<f64>) = io::read_vector_csv_path(&args.marginal_y)?;
    let targets = TargetMarginals::new(p_x, p_y)?;
    let order: BalanceOrder = args.order.into();
    let divergence: Divergence = args.divergence.into();

    let steps = match args.k {
        Some(k) => k,
        None => {
            match balance_to_convergence_via(
                &measure,
                &targets,
                args.tol,
                args.max_iter,
                order,
                Some(divergence),
            ) {
                Ok((_, iterations)) => iterations,
                Err(ConvergenceError::NotConverged(info)) => {
                    let last = out_dir.join("last_iterate.csv");
                    io::write_measure_csv_path(&last, &info.last_iterate)?;
                    manifest.record(&last);
                    manifest.write(out_dir)?;
                    bail!(
                        "no convergence after {} iterations (max marginal deviation {:e}); last iterate written to {}",
                        info.iterations,
                        info.max_deviation,
                        last.display()
                    );
                }
                Err(ConvergenceError::Other(e)) => return Err(e.into()),
            }
        }
    };

    let trace = balance_k_via(&measure, &targets, steps, order, Some(divergence))?;
    let balanced_path = out_dir.join("balanced.csv");
    io::write_measure_csv_path(&balanced_path, trace.final_measure())?;
    manifest.record(&balanced_path);
    let trace_path = out_dir.join("trace.csv");
    io::write_trace_csv_path(&trace_path, &trace)?;
    manifest.record(&trace_path);
    manifest.write(out_dir)?;
    println!(
        "balanced in {steps} step(s) ({order}); wrote {} and {}",
        balanced_path.display(),
        trace_path.display()
    );
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs, out_dir: &Path, argv: Option<Vec<String>>) -> Result<()> {
    let mut manifest = builder("spectrum", None, argv);
    let measure: JointMeasure<f64> = io::read_measure_csv_path(&args.measure)?;
    let decomposition = decompose(&measure)?;
    let labels: Vec<String> = (1..=decomposition.rank()).map(|j| format!("s{j}")).collect();
    let sv_path = out_dir.join("singular_values.csv");
    io::write_vector_csv_path(&sv_path, &labels, decomposition.singular_values())?;
    manifest.record(&sv_path);
    println!(
        "rank {}; s_2 = {:.6}",
        decomposition.rank(),
        decomposition.spectral_gap_rate()
    );

    if let Some(h_path) = &args.test_function {
        let h = io::read_test_function_csv_path::<f64>(h_path)?;
        let table_path = out_dir.join("sigma_table.csv");
        let mut w = csv::Writer::from_path(&table_path)?;
        w.write_record(["k", "sigma_sq", "predicted_sigma_sq"])?;
        let predicted = predict_variances(&measure, &h, args.k_max).ok();
        for k in 0..=args.k_max {
            let direct = sigma_k_direct(&measure, &h, k)?;
            let pred = match (&predicted, k) {
                (_, 0) => predicted.as_ref().map(|p| p.sigma0_sq),
                (Some(p), _) => Some(p.sigma_k_sq[k - 1]),
                (None, _) => None,
            };
            w.write_record([
                k.to_string(),
                io::format_float(direct),
                pred.map(io::format_float).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        manifest.record(&table_path);
        if let Some(p) = &predicted {
            let summary_path = out_dir.join("variance_summary.csv");
            io::write_vector_csv_path(
                &summary_path,
                &[
                    "sigma0_sq".to_string(),
                    "sigma_gap_sq".to_string(),
                    "sigma_limit_sq".to_string(),
                ],
                &[p.sigma0_sq, p.sigma_gap_sq, p.sigma_limit_sq],
            )?;
            manifest.record(&summary_path);
        } else {
            eprintln!("no spectral gap: variance summary skipped (sigma_k table is exact)");
        }
    }
    manifest.write(out_dir)?;
    Ok(())
}

fn cmd_gen(args: GenArgs, out_dir: &Path, argv: Option<Vec<String>>) -> Result<()> {
    let mut manifest = builder("gen", Some(args.seed), argv);
    let measure = spectrum_controlled_measure::<f64>(args.m, args.s)?;
    let targets = TargetMarginals::from_measure(&measure)?;
    let h = random_test_function::<f64>(args.m, args.m, derive_seed(args.seed, 1))?;

    let measure_path = out_dir.join("measure.csv");
    io::write_measure_csv_path(&measure_path, &measure)?;
    manifest.record(&measure_path);

    let mx_path = out_dir.join("marginal_x.csv");
    io::write_vector_csv_path(&mx_path, measure.x_labels(), targets.p_x())?;
    manifest.record(&mx_path);
    let my_path = out_dir.join("marginal_y.csv");
    io::write_vector_csv_path(&my_path, measure.y_labels(), targets.p_y())?;
    manifest.record(&my_path);

    let h_path = out_dir.join("test_function.csv");
    io::write_test_function_csv_path(&h_path, &h)?;
    manifest.record(&h_path);

    if args.epsilon > 0.0 {
        let spec = CorruptionSpec::new(args.epsilon, derive_seed(args.seed, 2))?;
        let corrupted = corrupt_marginals(&targets, &spec)?;
        let cx_path = out_dir.join("corrupted_x.csv");
        io::write_vector_csv_path(&cx_path, measure.x_labels(), corrupted.p_x())?;
        manifest.record(&cx_path);
        let cy_path = out_dir.join("corrupted_y.csv");
        io::write_vector_csv_path(&cy_path, measure.y_labels(), corrupted.p_y())?;
        manifest.record(&cy_path);
    }
    manifest.write(out_dir)?;
    println!("wrote instance (m={}, s={}, epsilon={}) to {}", args.m, args.s, args.epsilon, out_dir.display());
    Ok(())
}

fn parse_grid(raw: &str, name: &str) -> Result<Vec<f64>> {
    let values: Result<Vec<f64>> = raw
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("bad value {tok:?} in --{name}"))
        })
        .collect();
    let values = values?;
    if values.is_empty() {
        bail!("--{name} must be nonempty");
    }
    Ok(values)
}

fn parse_estimators(raw: &str, k: usize) -> Result<Vec<EstimatorKind>> {
    raw.split(',')
        .map(|tok| match tok.trim() {
            "empirical" => Ok(EstimatorKind::Empirical),
            "ipwi" => Ok(EstimatorKind::Ipwi),
            "balanced" => Ok(EstimatorKind::Balanced { k }),
            other => bail!("unknown estimator {other:?} (expected empirical, ipwi, balanced)"),
        })
        .collect()
}

fn run_cells(config: &GridConfig, jobs: usize) -> Result<Vec<MseRecord>> {
    let cells: Vec<(f64, f64)> = config
        .s_grid
        .iter()
        .flat_map(|&s| config.epsilon_grid.iter().map(move |&e| (s, e)))
        .collect();
    let results: Vec<raking::Result<Vec<MseRecord>>> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building worker pool")?;
        pool.install(|| {
            cells
                .par_iter()
                .map(|&(s, e)| evaluate_cell(config, s, e))
                .collect()
        })
    } else {
        cells
            .iter()
            .map(|&(s, e)| evaluate_cell(config, s, e))
            .collect()
    };
    let mut records = Vec::new();
    for cell in results {
        records.extend(cell?);
    }
    Ok(records)
}

fn cmd_simulate(args: SimulateArgs, out_dir: &Path, argv: Option<Vec<String>>) -> Result<()> {
    let mut manifest = builder("simulate", Some(args.master_seed), argv);
    let s_grid = parse_grid(&args.s_grid, "s-grid")?;
    let epsilon_grid = parse_grid(&args.epsilon_grid, "epsilon-grid")?;
    for &e in &epsilon_grid {
        if !(0.0..=0.5).contains(&e) {
            bail!("epsilon {e} outside the supported experiment range [0, 0.5]");
        }
    }
    let estimators = parse_estimators(&args.estimators, args.k)?;
    let config = GridConfig {
        m: args.m,
        n: args.n,
        k: args.k,
        s_grid,
        epsilon_grid,
        seeds: args.seeds,
        master_seed: args.master_seed,
        estimators,
    };
    let records = run_cells(&config, args.jobs)?;
    let mse_path = out_dir.join("mse.csv");
    io::write_mse_csv_path(&mse_path, &records)?;
    manifest.record(&mse_path);
    manifest.write(out_dir)?;
    println!("wrote {} rows to {}", records.len(), mse_path.display());
    Ok(())
}

fn cmd_clip_loss(args: ClipLossArgs, out_dir: &Path, argv: Option<Vec<String>>) -> Result<()> {
    let mut manifest = builder("clip-loss", None, argv);
    let scores = io::read_score_matrix_csv_path::<f64>(&args.scores)?;
    let n = scores.n() as f64;
    let balanced = balanced_clip_loss(&scores, args.k)?;
    let standard = standard_clip_loss(&scores);
    println!("L_balanced(k={}) = {}", args.k, io::format_float(balanced));
    println!("L_standard      = {}", io::format_float(standard));
    println!(
        "L_standard - L_balanced = {} (-n log n = {})",
        io::format_float(standard - balanced),
        io::format_float(-n * n.ln())
    );
    if args.trace {
        let rows = clip_balance_diagnostics(&scores, args.k)?;
        let trace_path = out_dir.join("clip_trace.csv");
        let mut w = csv::Writer::from_path(&trace_path)?;
        w.write_record(["iteration", "q_dev_x", "q_dev_y", "r_dev_x", "r_dev_y"])?;
        for row in rows {
            w.write_record([
                row.iteration.to_string(),
                io::format_float(row.q_dev_x),
                io::format_float(row.q_dev_y),
                io::format_float(row.r_dev_x),
                io::format_float(row.r_dev_y),
            ])?;
        }
        w.flush()?;
        manifest.record(&trace_path);
    }
    manifest.write(out_dir)?;
    Ok(())
}

fn read_corpus(path: &Path, format: Option<InputFormat>) -> Result<Corpus> {
    let format = format.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    });
    let mut records = Vec::new();
    match format {
        InputFormat::Jsonl => {
            let raw = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            for (lineno, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                #[derive(serde::Deserialize)]
                struct Row {
                    id: String,
                    text: String,
                }
                let row: Row = serde_json::from_str(line)
                    .with_context(|| format!("line {} of {}", lineno + 1, path.display()))?;
                records.push((row.id, row.text));
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::Reader::from_path(path)?;
            let headers = reader.headers()?.clone();
            let id_idx = headers.iter().position(|h| h == "id");
            let text_idx = headers.iter().position(|h| h == "text");
            let (id_idx, text_idx) = match (id_idx, text_idx) {
                (Some(i), Some(t)) => (i, t),
                _ => bail!("corpus CSV must have id and text columns"),
            };
            for record in reader.records() {
                let record = record?;
                records.push((record[id_idx].to_string(), record[text_idx].to_string()));
            }
        }
    }
    Ok(Corpus::new(records)?)
}

fn cmd_curate(args: CurateArgs, out_dir: &Path, argv: Option<Vec<String>>) -> Result<()> {
    let mut manifest = builder("curate", Some(args.seed), argv);
    let corpus = read_corpus(&args.input, args.format)?;
    let raw = std::fs::read_to_string(&args.keywords)
        .with_context(|| format!("reading {}", args.keywords.display()))?;
    let keywords: Vec<String> = raw
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    let mode = if args.exact_match {
        MatchMode::ExactBytes
    } else {
        MatchMode::Normalized
    };
    let assignment = match_keywords(&corpus, &keywords, mode)?;
    let plan = plan_with_threshold(&assignment, args.threshold)?;

    let observed_path = out_dir.join("observed_marginal.csv");
    io::write_vector_csv_path(&observed_path, &keywords, &plan.observed_marginal)?;
    manifest.record(&observed_path);
    let target_path = out_dir.join("target_marginal.csv");
    io::write_vector_csv_path(&target_path, &keywords, &plan.target_marginal)?;
    manifest.record(&target_path);

    let weights_path = args
        .output_weights
        .clone()
        .unwrap_or_else(|| out_dir.join("weights.csv"));
    let mut w = csv::Writer::from_path(&weights_path)?;
    w.write_record(["id", "keyword", "weight"])?;
    for ((id, label), weight) in plan
        .record_ids
        .iter()
        .zip(plan.labels.iter())
        .zip(plan.weights.iter())
    {
        let keyword = label.map(|y| keywords[y].as_str()).unwrap_or("");
        w.write_record([id.as_str(), keyword, &io::format_float(*weight)])?;
    }
    w.flush()?;
    manifest.record(&weights_path);

    if let Some(size) = args.resample {
        let ids = resample(&plan, size, args.seed)?;
        let resample_path = out_dir.join("resample.txt");
        std::fs::write(&resample_path, ids.join("\n") + "\n")?;
        manifest.record(&resample_path);
    }
    manifest.write(out_dir)?;
    println!(
        "curated {} records ({} matched) over {} keywords; threshold {}",
        corpus.len(),
        assignment.matched(),
        keywords.len(),
        args.threshold
    );
    Ok(())
}

fn cmd_repro(args: ReproArgs, out_dir: &Path, argv: Option<Vec<String>>) -> Result<()> {
    let mut manifest = builder("repro", Some(args.master_seed), argv);
    let mut config = GridConfig::benchmark_default(args.master_seed);
    config.seeds = args.seeds;
    let records = run_cells(&config, args.jobs)?;

    let mse_path = out_dir.join("mse.csv");
    io::write_mse_csv_path(&mse_path, &records)?;
    manifest.record(&mse_path);

    let violations = grid_ordering_violations(&config, &records);
    let mut summary = String::new();
    summary.push_str(&format!(
        "benchmark grid: m={} n={} k={} seeds={} master_seed={}\n",
        config.m, config.n, config.k, config.seeds, config.master_seed
    ));
    summary.push_str("estimator,s,epsilon,mse\n");
    for r in &records {
        summary.push_str(&format!("{},{},{},{:e}\n", r.estimator, r.s, r.epsilon, r.mse));
    }
    summary.push('\n');
    if violations.is_empty() {
        summary.push_str("orderings: all expected orderings hold\n");
    } else {
        summary.push_str(&format!("orderings: {} violations\n", violations.len()));
        for v in &violations {
            summary.push_str(&format!("  {v}\n"));
        }
    }
    let summary_path = out_dir.join("summary.txt");
    std::fs::write(&summary_path, &summary)?;
    manifest.record(&summary_path);
    manifest.write(out_dir)?;

    if !violations.is_empty() {
        eprintln!("{summary}");
        bail!("{} ordering violations (see summary.txt)", violations.len());
    }
    println!(
        "all orderings hold; wrote {} and {}",
        mse_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let recorded = manifest::read_manifest(&args.manifest)?;
    if recorded.format_version != manifest::FORMAT_VERSION {
        bail!(
            "manifest format {} not supported (expected {})",
            recorded.format_version,
            manifest::FORMAT_VERSION
        );
    }
    let mut argv = vec!["raking".to_string()];
    argv.extend(recorded.argv.iter().cloned());
    let cli = Cli::try_parse_from(&argv)
        .with_context(|| format!("parsing recorded invocation {:?}", recorded.argv))?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!("manifest records a replay; refusing to recurse");
    }
    println!("replaying: raking {}", recorded.argv.join(" "));
    run(cli, Some(recorded.argv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_string_carries_the_manifest_format() {
        assert!(VERSION.ends_with(&format!("format.{}", manifest::FORMAT_VERSION)));
    }
}
