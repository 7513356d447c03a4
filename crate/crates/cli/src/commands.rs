use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mrhd::io::{self, FeatureFile};
use mrhd::losses::{check_gradients, GRAD_TOLERANCE};
use mrhd::metrics::{evaluate, EvalConfig};
use mrhd::predict::ConfidenceRule;
use mrhd::similarity::{Aggregation, ProfileConfig};
use mrhd::{QueryBundle, QueryPrediction, SaliencyScale, SimilarityProfile, VideoFeatureSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stages::{self, ThresholdScope};
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "mrhd",
    version,
    about = "Training-free moment retrieval and highlight detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every frame of each video against each query.
    Score(ScoreArgs),
    /// Extract span anchors from similarity profiles.
    Anchors(AnchorArgs),
    /// Turn anchors and profiles into moment and highlight predictions.
    Predict(PredictArgs),
    /// Evaluate predictions against annotations.
    Eval(EvalArgs),
    /// Compare analytic loss gradients with finite differences.
    LossCheck(LossCheckArgs),
    /// Run score, anchors and predict (and eval, given annotations) in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct Parallelism {
    /// Worker threads
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
}

#[derive(Debug, Args)]
pub struct ScoringOptions {
    /// Video feature files, or directories of *.jsonl files
    #[arg(long, required = true, num_args = 1..)]
    pub video_features: Vec<PathBuf>,
    /// Query feature files, or directories of *.jsonl files
    #[arg(long, required = true, num_args = 1..)]
    pub query_features: Vec<PathBuf>,
    /// Pool aggregation over query embeddings, mean or max
    #[arg(long, default_value = "mean")]
    pub agg: Aggregation,
    /// Score only the rewrites, leaving the original query out of the pool [default: off]
    #[arg(long)]
    pub rewrites_only: bool,
    /// Histogram bin width for threshold selection
    #[arg(long, default_value_t = mrhd::anchors::DEFAULT_QUANTIZATION)]
    pub quant: f64,
    /// Share one threshold histogram per query-video pair or per video
    #[arg(long, value_enum, default_value_t = ThresholdScope::Pair)]
    pub threshold_scope: ThresholdScope,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub scoring: ScoringOptions,
    /// Output profiles file
    #[arg(long, default_value = "profiles.jsonl")]
    pub out: PathBuf,
    #[command(flatten)]
    pub parallel: Parallelism,
}

#[derive(Debug, Args)]
pub struct AnchorArgs {
    /// Profiles file written by `score`
    #[arg(long)]
    pub profiles: PathBuf,
    /// Largest run of unmarked frames bridged inside one anchor
    #[arg(long, default_value_t = mrhd::anchors::DEFAULT_MAX_GAP)]
    pub max_gap: usize,
    /// Histogram bin width for threshold selection
    #[arg(long, default_value_t = mrhd::anchors::DEFAULT_QUANTIZATION)]
    pub quant: f64,
    /// Share one threshold histogram per query-video pair or per video
    #[arg(long, value_enum, default_value_t = ThresholdScope::Pair)]
    pub threshold_scope: ThresholdScope,
    /// Output anchors file
    #[arg(long, default_value = "anchors.jsonl")]
    pub out: PathBuf,
    #[command(flatten)]
    pub parallel: Parallelism,
}

#[derive(Debug, Args)]
pub struct PredictOptions {
    /// Moments kept per query
    #[arg(long, default_value_t = mrhd::predict::DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Moment confidence: mean, max or length-weighted
    #[arg(long, default_value = "mean")]
    pub confidence: ConfidenceRule,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Anchors file written by `anchors`
    #[arg(long)]
    pub anchors: PathBuf,
    /// Profiles file the anchors came from
    #[arg(long)]
    pub profiles: PathBuf,
    #[command(flatten)]
    pub options: PredictOptions,
    /// Output predictions file
    #[arg(long, default_value = "predictions.jsonl")]
    pub out: PathBuf,
    #[command(flatten)]
    pub parallel: Parallelism,
}

#[derive(Debug, Args)]
pub struct ScaleOptions {
    /// Highest saliency label
    #[arg(long, default_value_t = 4)]
    pub max_level: u32,
    /// Lowest saliency label counted as relevant
    #[arg(long, default_value_t = 3)]
    pub very_good_cut: u32,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions file
    #[arg(long)]
    pub preds: PathBuf,
    /// Ground-truth annotations file
    #[arg(long)]
    pub annotations: PathBuf,
    /// Write the metrics as JSON to this path [default: print only]
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub scale: ScaleOptions,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    /// Random points checked
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Seed for the point sampler
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub scoring: ScoringOptions,
    /// Largest run of unmarked frames bridged inside one anchor
    #[arg(long, default_value_t = mrhd::anchors::DEFAULT_MAX_GAP)]
    pub max_gap: usize,
    #[command(flatten)]
    pub options: PredictOptions,
    /// Ground-truth annotations; when given, metrics.json is written too [default: none]
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[command(flatten)]
    pub scale: ScaleOptions,
    /// Directory for profiles.jsonl, anchors.jsonl, predictions.jsonl and metrics.json
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub parallel: Parallelism,
}

/// Parses `args` (program name first) and runs the command. Usage errors
/// come back as validation failures; `--help` and `--version` print and
/// succeed.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            return Err(CliError::Validation(
                e.render().to_string().trim_end().to_owned(),
            ))
        }
    };
    match cli.command {
        Command::Score(a) => score(a),
        Command::Anchors(a) => anchors(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::LossCheck(a) => loss_check(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn with_pool<T: Send>(jobs: u16, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn context(path: &Path) -> impl Fn(mrhd::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Expands directories into their `*.jsonl` files, sorted by name.
fn expand(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn load_inputs(opts: &ScoringOptions) -> CliResult<(Vec<VideoFeatureSet>, Vec<QueryBundle>)> {
    let mut videos = Vec::new();
    for path in expand(&opts.video_features)? {
        match io::load_features(&path).map_err(context(&path))? {
            FeatureFile::Video(v) => videos.push(v),
            FeatureFile::Query(_) => {
                return Err(CliError::Validation(format!(
                    "{}: expected a video feature file, found a query",
                    path.display()
                )))
            }
        }
    }
    let mut queries = Vec::new();
    for path in expand(&opts.query_features)? {
        match io::load_features(&path).map_err(context(&path))? {
            FeatureFile::Query(q) => queries.push(q),
            FeatureFile::Video(_) => {
                return Err(CliError::Validation(format!(
                    "{}: expected a query feature file, found a video",
                    path.display()
                )))
            }
        }
    }
    Ok((videos, queries))
}

fn check_quant(q: f64) -> CliResult<()> {
    if q.is_finite() && q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "--quant must lie in (0, 1], got {q}"
        )))
    }
}

fn run_score(opts: &ScoringOptions, jobs: u16) -> CliResult<Vec<SimilarityProfile>> {
    check_quant(opts.quant)?;
    let (videos, queries) = load_inputs(opts)?;
    let config = ProfileConfig {
        aggregation: opts.agg,
        include_original: !opts.rewrites_only,
    };
    Ok(with_pool(jobs, || {
        stages::score_pairs(&videos, &queries, config, opts.quant, opts.threshold_scope)
    })??)
}

fn scale(opts: &ScaleOptions) -> CliResult<SaliencyScale> {
    Ok(SaliencyScale::new(opts.max_level, opts.very_good_cut)?)
}

fn score(a: ScoreArgs) -> CliResult<()> {
    let profiles = run_score(&a.scoring, a.parallel.jobs)?;
    io::save_profiles(&a.out, &profiles)?;
    eprintln!("wrote {} profiles to {}", profiles.len(), a.out.display());
    Ok(())
}

fn anchors(a: AnchorArgs) -> CliResult<()> {
    check_quant(a.quant)?;
    let profiles = io::load_profiles(&a.profiles).map_err(context(&a.profiles))?;
    let sets = with_pool(a.parallel.jobs, || {
        stages::anchor_sets(&profiles, a.quant, a.threshold_scope, a.max_gap)
    })??;
    io::save_anchor_sets(&a.out, &sets)?;
    let total: usize = sets.iter().map(|s| s.anchors.len()).sum();
    eprintln!(
        "wrote {total} anchors for {} profiles to {}",
        sets.len(),
        a.out.display()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let sets = io::load_anchor_sets(&a.anchors).map_err(context(&a.anchors))?;
    let profiles = io::load_profiles(&a.profiles).map_err(context(&a.profiles))?;
    let preds = with_pool(a.parallel.jobs, || {
        stages::predictions(&sets, &profiles, a.options.top_k, a.options.confidence)
    })??;
    io::save_predictions(&a.out, &preds)?;
    eprintln!("wrote {} predictions to {}", preds.len(), a.out.display());
    Ok(())
}

fn report(
    preds: &[QueryPrediction],
    annotations: &Path,
    scale: SaliencyScale,
    json_out: Option<&Path>,
) -> CliResult<()> {
    let gts = io::load_annotations(annotations).map_err(context(annotations))?;
    let config = EvalConfig {
        scale,
        ..EvalConfig::default()
    };
    let metrics = evaluate(preds, &gts, &config)?;
    if let Some(path) = json_out {
        fs::write(path, metrics.to_json() + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    print!("{}", metrics.to_text());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let preds = io::load_predictions(&a.preds).map_err(context(&a.preds))?;
    report(
        &preds,
        &a.annotations,
        scale(&a.scale)?,
        a.report.as_deref(),
    )
}

fn loss_check(a: LossCheckArgs) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let result = check_gradients(a.trials, &mut || rng.gen::<f64>());
    println!("trials {}", result.trials);
    println!("moment_max_rel_err {:e}", result.moment);
    println!("bce_max_rel_err {:e}", result.bce);
    println!("hinge_max_rel_err {:e}", result.hinge);
    println!("max_rel_err {:e}", result.max_deviation());
    if result.passed() {
        Ok(())
    } else {
        Err(CliError::SelfCheck(format!(
            "max relative error {:e} exceeds {GRAD_TOLERANCE:e}",
            result.max_deviation()
        )))
    }
}

fn pipeline(a: PipelineArgs) -> CliResult<()> {
    let scale = scale(&a.scale)?;
    let profiles = run_score(&a.scoring, a.parallel.jobs)?;
    let quant = a.scoring.quant;
    let (sets, preds) = with_pool(a.parallel.jobs, || -> mrhd::Result<_> {
        let sets = stages::anchor_sets(&profiles, quant, a.scoring.threshold_scope, a.max_gap)?;
        let preds = stages::predictions(&sets, &profiles, a.options.top_k, a.options.confidence)?;
        Ok((sets, preds))
    })??;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", a.out_dir.display())))?;
    io::save_profiles(a.out_dir.join("profiles.jsonl"), &profiles)?;
    io::save_anchor_sets(a.out_dir.join("anchors.jsonl"), &sets)?;
    io::save_predictions(a.out_dir.join("predictions.jsonl"), &preds)?;
    eprintln!(
        "wrote {} profiles, {} predictions to {}",
        profiles.len(),
        preds.len(),
        a.out_dir.display()
    );
    if let Some(ann) = &a.annotations {
        report(&preds, ann, scale, Some(&a.out_dir.join("metrics.json")))?;
    }
    Ok(())
}
