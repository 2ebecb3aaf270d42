use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ckptmerge::merge::{merge_files, MergeMethod, MergeRecipe, OutputDtype};
use ckptmerge::metrics::{corpus_mean, ingest_external_scores, score_pair, GenerationMetrics};
use ckptmerge::pareto::{select, DEFAULT_EPSILON};
use ckptmerge::report::{emit_tradeoff_svg, read_points, write_manifest, write_sweep_csv, ParetoReport};
use ckptmerge::store::{read_checkpoint, write_checkpoint, Checkpoint};
use ckptmerge::sweep::{generate_grid, run_sweep, Evaluator, ExternalScores, SweepGrid, SweepOptions, SweepStatus};
use ckptmerge::synth::{make_synthetic_world, Sigma, SyntheticWorld, WorldDescriptor};

#[derive(Parser)]
#[command(name = "ckptmerge", version, about = "Merge two checkpoints and pick trade-off recipes")]
struct Cli {
    /// Worker threads for sweeps
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    /// Keep every merged checkpoint of a sweep under <out>/checkpoints
    #[arg(long, global = true)]
    persist_checkpoints: bool,
    /// Margin for near-frontier recipes
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON, value_parser = non_negative)]
    epsilon: f64,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge two checkpoints with one recipe
    Merge(MergeArgs),
    /// Merge and score a grid of weights
    Sweep(SweepArgs),
    /// Select Pareto-optimal recipes from a sweep manifest or CSV
    Pareto(InputArgs),
    /// ROUGE and BLEU for line-aligned candidate and reference files
    ScoreText(ScoreTextArgs),
    /// Write a synthetic checkpoint pair and its world descriptor
    Synth(SynthArgs),
    /// Draw trade-off and trajectory charts from a sweep manifest or CSV
    Report(InputArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Linear,
    Slerp,
}

impl From<Method> for MergeMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Linear => MergeMethod::Linear,
            Method::Slerp => MergeMethod::Slerp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeChoice {
    /// Keep the first checkpoint's dtype per tensor
    First,
    F32,
}

#[derive(Args)]
struct MergeArgs {
    /// Checkpoint selected by weight 0
    #[arg(long)]
    first: PathBuf,
    /// Checkpoint selected by weight 1
    #[arg(long)]
    second: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, value_parser = unit_interval)]
    weight: f64,
    #[arg(long, value_enum, default_value = "first")]
    output_dtype: DtypeChoice,
    #[arg(long)]
    degeneracy_eps: Option<f64>,
    /// Output file; defaults to <out>/<method>-<weight>.safetensors
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Defaults to the world's first checkpoint with --world
    #[arg(long)]
    first: Option<PathBuf>,
    #[arg(long)]
    second: Option<PathBuf>,
    /// Methods to sweep; repeat for both
    #[arg(long, value_enum, default_values = ["linear"])]
    method: Vec<Method>,
    #[arg(long, default_value_t = 0.0, value_parser = unit_interval)]
    start: f64,
    #[arg(long, default_value_t = 1.0, value_parser = unit_interval)]
    stop: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// World descriptor written by `synth`; scores with the synthetic evaluator
    #[arg(long, conflicts_with = "scores", required_unless_present = "scores")]
    world: Option<PathBuf>,
    /// External score file keyed by checkpoint name
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Sweep manifest (JSON) or sweep CSV
    input: PathBuf,
}

#[derive(Args)]
struct ScoreTextArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    references: PathBuf,
    /// JSON object supplying at least meteor and bertscore
    #[arg(long)]
    external: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    n_tensors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.4, value_parser = unit_interval)]
    beta_med: f64,
    #[arg(long, default_value_t = 0.9, value_parser = unit_interval)]
    beta_ins: f64,
    /// Absolute score width; defaults to half the distance between the checkpoints
    #[arg(long)]
    sigma: Option<f64>,
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn cmd_merge(cli: &Cli, args: &MergeArgs) -> Result<()> {
    let mut recipe = MergeRecipe::new(args.method.into(), args.weight)?;
    if let Some(eps) = args.degeneracy_eps {
        recipe = recipe.with_degeneracy_eps(eps)?;
    }
    if let DtypeChoice::F32 = args.output_dtype {
        recipe = recipe.with_output_dtype(OutputDtype::F32);
    }
    let output = match &args.output {
        Some(p) => p.clone(),
        None => {
            create_out(&cli.out)?;
            cli.out.join(format!("{}.safetensors", recipe.checkpoint_name()))
        }
    };
    let summary = merge_files(&args.first, &args.second, &recipe, &output).with_context(|| {
        format!(
            "merging {} and {}",
            args.first.display(),
            args.second.display()
        )
    })?;
    println!(
        "{} weight {}: {} tensors, {} fallbacks -> {}",
        recipe.method,
        recipe.weight,
        summary.tensor_count(),
        summary.fallback_count(),
        output.display()
    );
    Ok(())
}

fn load(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(path).with_context(|| format!("reading {}", path.display()))
}

fn read_world(path: &Path) -> Result<SyntheticWorld> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let desc: WorldDescriptor =
        serde_json::from_str(&text).with_context(|| format!("parsing world descriptor {}", path.display()))?;
    Ok(SyntheticWorld::from_descriptor(&desc)?)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let mut recipes = Vec::new();
    for &m in &args.method {
        recipes.extend(generate_grid(&SweepGrid {
            method: m.into(),
            start: args.start,
            stop: args.stop,
            step: args.step,
        })?);
    }
    let world = args.world.as_deref().map(read_world).transpose()?;
    let pick = |given: &Option<PathBuf>, from_world: fn(&SyntheticWorld) -> &Checkpoint, flag: &str| -> Result<Checkpoint> {
        match (given, &world) {
            (Some(p), _) => load(p),
            (None, Some(w)) => Ok(from_world(w).clone()),
            (None, None) => bail!("--{flag} is required unless --world is given"),
        }
    };
    let first = pick(&args.first, |w| &w.ckpt_c, "first")?;
    let second = pick(&args.second, |w| &w.ckpt_i, "second")?;
    let external;
    let evaluator: &dyn Evaluator = match (&world, &args.scores) {
        (Some(w), _) => w,
        (None, Some(path)) => {
            external = ExternalScores::new(
                ingest_external_scores(path).with_context(|| format!("reading scores {}", path.display()))?,
            );
            &external
        }
        (None, None) => bail!("either --world or --scores is required"),
    };

    create_out(&cli.out)?;
    let persist_dir = cli.persist_checkpoints.then(|| cli.out.join("checkpoints"));
    if let Some(dir) = &persist_dir {
        create_out(dir)?;
    }
    let options = SweepOptions {
        workers: cli.workers as usize,
        persist_dir,
    };
    let entries = run_sweep(&first, &second, &recipes, evaluator, &options)?;

    let manifest = cli.out.join("sweep.json");
    let csv = cli.out.join("sweep.csv");
    write_manifest(&entries, &manifest)?;
    write_sweep_csv(&entries, &csv)?;
    let failed: Vec<_> = entries.iter().filter(|e| e.status == SweepStatus::Failed).collect();
    for e in &failed {
        eprintln!(
            "warning: {} failed: {}",
            e.name,
            e.error.as_deref().unwrap_or("unknown error")
        );
    }
    println!(
        "{} recipes, {} failed -> {}, {}",
        entries.len(),
        failed.len(),
        manifest.display(),
        csv.display()
    );
    Ok(())
}

fn cmd_pareto(cli: &Cli, args: &InputArgs) -> Result<()> {
    let points = read_points(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let result = select(&points, cli.epsilon);
    let report = ParetoReport::new(&points, &result);
    create_out(&cli.out)?;
    let path = cli.out.join("pareto.json");
    fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    for r in &report.frontier {
        println!(
            "frontier {}: instruction {:.6}, medical {:.6}",
            r.name, r.instruction_score, r.medical_avg
        );
    }
    for r in report.near_frontier.iter().filter(|r| !result.frontier.contains(&r.index)) {
        println!(
            "near {}: instruction {:.6}, medical {:.6}",
            r.name, r.instruction_score, r.medical_avg
        );
    }
    println!(
        "{} of {} recipes on the frontier, {} within epsilon {} -> {}",
        report.frontier.len(),
        points.len(),
        report.near_frontier.len(),
        cli.epsilon,
        path.display()
    );
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn cmd_score_text(args: &ScoreTextArgs) -> Result<()> {
    let cands = read_lines(&args.candidates)?;
    let refs = read_lines(&args.references)?;
    ensure!(
        cands.len() == refs.len(),
        "line count mismatch: {} has {} lines, {} has {} lines",
        args.candidates.display(),
        cands.len(),
        args.references.display(),
        refs.len()
    );
    ensure!(!cands.is_empty(), "no text pairs to score");
    let scores: Vec<_> = cands.iter().zip(&refs).map(|(c, r)| score_pair(c, r)).collect();
    for (i, s) in scores.iter().enumerate() {
        println!(
            "pair {}: rouge1 {:.6} rouge2 {:.6} rougeL {:.6} bleu {:.6}",
            i + 1,
            s.rouge1,
            s.rouge2,
            s.rouge_l,
            s.bleu
        );
    }
    let mean = corpus_mean(&scores).expect("non-empty corpus");
    println!(
        "mean: rouge1 {:.6} rouge2 {:.6} rougeL {:.6} bleu {:.6}",
        mean.rouge1, mean.rouge2, mean.rouge_l, mean.bleu
    );
    if let Some(path) = &args.external {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let ext: GenerationMetrics =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        ext.validate("")?;
        let c = ext.with_native(&mean).composite()?;
        println!(
            "composite {:.6}: bleu {:.6} meteor {:.6} rouge1 {:.6} rouge2 {:.6} rougeL {:.6} bertscore {:.6}",
            c.overall, c.bleu, c.meteor, c.rouge1, c.rouge2, c.rouge_l, c.bertscore
        );
    }
    Ok(())
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let sigma = args.sigma.map_or(Sigma::default(), Sigma::Absolute);
    let world = make_synthetic_world(args.dim, args.n_tensors, args.seed, args.beta_med, args.beta_ins, sigma)?;
    create_out(&cli.out)?;
    let first = cli.out.join("first.safetensors");
    let second = cli.out.join("second.safetensors");
    let desc = cli.out.join("world.json");
    write_checkpoint(&world.ckpt_c, &first)?;
    write_checkpoint(&world.ckpt_i, &second)?;
    let mut json = serde_json::to_string_pretty(&world.descriptor())?;
    json.push('\n');
    fs::write(&desc, json).with_context(|| format!("writing {}", desc.display()))?;
    println!(
        "synthetic world: {} tensors of {} values, sigma {:.6} -> {}, {}, {}",
        args.n_tensors,
        args.dim,
        world.descriptor().sigma,
        first.display(),
        second.display(),
        desc.display()
    );
    Ok(())
}

fn cmd_report(cli: &Cli, args: &InputArgs) -> Result<()> {
    let points = read_points(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let result = select(&points, cli.epsilon);
    create_out(&cli.out)?;
    let path = cli.out.join("tradeoff.svg");
    let trajectory = emit_tradeoff_svg(&points, &result, &path)?;
    println!("{} points -> {}, {}", points.len(), path.display(), trajectory.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Merge(a) => cmd_merge(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Pareto(a) => cmd_pareto(cli, a),
        Command::ScoreText(a) => cmd_score_text(a),
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

/// The error chain joined by ": ", skipping causes whose text the previous
/// message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
