//! Command-line front end for the face-manifold pipeline.
//!
//! Subcommands mirror the workflow end to end: build a toy morphable model,
//! sample and corrupt parameter datasets, train the denoising autoencoder,
//! generate synthetic datasets by denoising uniform draws, and run the
//! evaluation analyses. All randomness in a command flows from its `--seed`
//! flag through tagged, index-derived streams, so identical invocations
//! produce bitwise-identical artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use face_manifold_core::autoencoder::{build, load_weights, save_weights};
use face_manifold_core::dataset::{
    build_dataset, load_dataset, normalize_shape, save_dataset, split, CorruptionConfig,
    ParamDataset, SamplePair, SHAPE_NORMALIZATION,
};
use face_manifold_core::evaluator::{
    default_sigma_grid, diversity_report, generate_synthetic, noise_sweep, scatter_csv, sweep_csv,
    DEFAULT_DIVERSITY_SAMPLES, DEFAULT_K_EXP, DEFAULT_K_SHAPE,
};
use face_manifold_core::morphable::{
    export_obj, load_model, make_toy_model_cfg, sample_normal, save_model, synthesize_face,
    MorphableModel, ParamGroup, ParamVector, ToyModelConfig, DEFAULT_SCALE_DECAY, EXP_SCALE_0,
    ID_SCALE_0,
};
use face_manifold_core::rng::stream;
use face_manifold_core::trainer::{evaluate_mse, train, TrainConfig};
use face_manifold_core::AutoencoderWeights;
use rand::Rng;

#[derive(Parser)]
#[command(
    name = "face-manifold",
    version,
    about = "Face-manifold learning pipeline: toy 3D morphable model, denoising autoencoder, dataset synthesis and evaluation"
)]
struct Cli {
    /// Worker thread count (falls back to all cores when unset)
    #[arg(long, global = true, env = "FACE_MANIFOLD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a procedural toy morphable model and write it as .fmm
    MakeModel(MakeModelArgs),
    /// Sample clean parameters, corrupt them, split, and write .fds files
    MakeDataset(MakeDatasetArgs),
    /// Train the denoising autoencoder on a pair dataset
    Train(TrainArgs),
    /// Generate synthetic datasets by denoising uniform parameter draws
    Generate(GenerateArgs),
    /// Run noise sweeps, scatter projections, or the diversity criterion
    Evaluate(EvaluateArgs),
    /// Denoise the noisy side of a .fds file through a trained network
    Denoise(DenoiseArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupArg {
    /// Identity (shape) parameters
    Shape,
    /// Expression parameters
    Expression,
}

impl GroupArg {
    fn to_group(self) -> ParamGroup {
        match self {
            GroupArg::Shape => ParamGroup::Identity,
            GroupArg::Expression => ParamGroup::Expression,
        }
    }
}

fn parse_decay(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("decay must lie in (0, 1], got {v}"))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("fraction must lie strictly between 0 and 1, got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("value must be > 0, got {v}"))
    }
}

#[derive(Args)]
struct MakeModelArgs {
    /// Minimum vertex count; the smallest sufficient icosphere is used
    #[arg(long, default_value_t = 162, value_parser = clap::value_parser!(u64).range(4..))]
    vertices: u64,
    /// Identity (shape) parameter count
    #[arg(long = "p-id", default_value_t = 199, value_parser = clap::value_parser!(u64).range(1..))]
    p_id: u64,
    /// Expression parameter count
    #[arg(long = "p-exp", default_value_t = 29, value_parser = clap::value_parser!(u64).range(1..))]
    p_exp: u64,
    /// Geometric decay of the per-parameter scale sequence
    #[arg(long, default_value_t = DEFAULT_SCALE_DECAY, value_parser = parse_decay)]
    decay: f64,
    /// First identity scale (raw parameter units)
    #[arg(long = "id-scale0", default_value_t = ID_SCALE_0, value_parser = parse_positive)]
    id_scale_0: f64,
    /// First expression scale
    #[arg(long = "exp-scale0", default_value_t = EXP_SCALE_0, value_parser = parse_positive)]
    exp_scale_0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.fmm")]
    out: PathBuf,
}

#[derive(Args)]
struct MakeDatasetArgs {
    /// Morphable model supplying parameter dimensions and scales
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    group: GroupArg,
    /// Number of clean parameter samples to draw
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    /// Noise standard deviation in raw units (default: 2 expression, 500000 shape)
    #[arg(long, value_parser = parse_positive)]
    sigma: Option<f64>,
    /// Noisy copies per clean sample (default: 50 expression, 100 shape)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    copies: Option<u64>,
    #[arg(long = "test-fraction", default_value_t = 0.1, value_parser = parse_fraction)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-train", default_value = "train.fds")]
    out_train: PathBuf,
    #[arg(long = "out-test", default_value = "test.fds")]
    out_test: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "train")]
    train_path: PathBuf,
    #[arg(long = "test")]
    test_path: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long = "learning-rate", default_value_t = 0.001, value_parser = parse_positive)]
    learning_rate: f64,
    #[arg(long = "batch-size", default_value_t = 128, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "weights.fwt")]
    out: PathBuf,
    #[arg(long, default_value = "metrics.json")]
    metrics: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "shape-weights")]
    shape_weights: PathBuf,
    #[arg(long = "exp-weights")]
    exp_weights: PathBuf,
    /// Synthetic samples per group
    #[arg(long, default_value_t = 2000)]
    count: u64,
    /// Uniform interval multiplier for shape draws
    #[arg(long = "k-shape", default_value_t = DEFAULT_K_SHAPE, value_parser = parse_positive)]
    k_shape: f64,
    /// Uniform interval multiplier for expression draws
    #[arg(long = "k-exp", default_value_t = DEFAULT_K_EXP, value_parser = parse_positive)]
    k_exp: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-shape", default_value = "generated_shape.fds")]
    out_shape: PathBuf,
    #[arg(long = "out-exp", default_value = "generated_exp.fds")]
    out_exp: PathBuf,
    /// Export the first N faces per group as OBJ meshes (noisy + denoised)
    #[arg(long = "export-obj", default_value_t = 0)]
    export_obj: u64,
    #[arg(long = "obj-dir", default_value = "objs")]
    obj_dir: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["sweep", "scatter", "diversity"])))]
struct EvaluateArgs {
    /// Sweep noise levels around --sigma-train and measure input/output MSE
    #[arg(long)]
    sweep: bool,
    /// Project datasets onto shared top-2 principal components (CSV)
    #[arg(long)]
    scatter: bool,
    /// Covariance-trace diversity criterion with pairwise ratios (JSON)
    #[arg(long)]
    diversity: bool,

    /// Trained weights (.fwt), required by --sweep
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Pair dataset (.fds) whose distinct clean vectors seed the sweep
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Training noise level, in the dataset's stored units (sweep grid anchor)
    #[arg(long = "sigma-train", value_parser = parse_positive)]
    sigma_train: Option<f64>,
    /// Noisy copies per clean vector and sigma during the sweep
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    copies: u64,

    /// Labeled dataset for --scatter/--diversity (repeatable): NAME=PATH
    #[arg(long = "dataset", value_name = "NAME=PATH")]
    datasets: Vec<String>,
    /// Samples per dataset (default: 70 scatter, 2000 diversity)
    #[arg(long)]
    samples: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (default: sweep.csv, scatter.csv, or diversity.json)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "denoised.fds")]
    output: PathBuf,
}

/// Reproducibility record echoed into every JSON output.
#[derive(Serialize)]
struct RunManifest {
    subcommand: &'static str,
    tool_version: &'static str,
    seed: u64,
    threads: Option<usize>,
    config: serde_json::Value,
    inputs: BTreeMap<&'static str, String>,
    outputs: BTreeMap<&'static str, String>,
}

impl RunManifest {
    fn new(subcommand: &'static str, seed: u64, threads: Option<usize>) -> Self {
        RunManifest {
            subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            threads,
            config: json!({}),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn input(mut self, key: &'static str, path: &Path) -> Self {
        self.inputs.insert(key, path.display().to_string());
        self
    }

    fn output(mut self, key: &'static str, path: &Path) -> Self {
        self.outputs.insert(key, path.display().to_string());
        self
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: failed to configure {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::MakeModel(args) => cmd_make_model(args),
        Command::MakeDataset(args) => cmd_make_dataset(args),
        Command::Train(args) => cmd_train(args, threads),
        Command::Generate(args) => cmd_generate(args),
        Command::Evaluate(args) => cmd_evaluate(args, threads),
        Command::Denoise(args) => cmd_denoise(args),
    }
}

fn cmd_make_model(args: MakeModelArgs) -> Result<()> {
    let cfg = ToyModelConfig {
        vertex_count: args.vertices as usize,
        p_id: args.p_id as usize,
        p_exp: args.p_exp as usize,
        scale_decay: args.decay,
        id_scale_0: args.id_scale_0,
        exp_scale_0: args.exp_scale_0,
        seed: args.seed,
    };
    let model = make_toy_model_cfg(&cfg).context("building toy model")?;
    save_model(&model, &args.out)
        .with_context(|| format!("writing model to {}", args.out.display()))?;
    println!(
        "wrote model: {} vertices, {} identity + {} expression parameters -> {}",
        model.vertex_count,
        model.p_id(),
        model.p_exp(),
        args.out.display()
    );
    Ok(())
}

/// Draw `count` clean vectors with per-index derived sampling seeds.
fn sample_clean_set(model: &MorphableModel, group: ParamGroup, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut seeder = stream(seed, "clean-set", &[group.tag()]);
    (0..count)
        .map(|_| sample_normal(model, group, seeder.random()).values)
        .collect()
}

fn cmd_make_dataset(args: MakeDatasetArgs) -> Result<()> {
    let group = args.group.to_group();
    let sigma = args.sigma.unwrap_or(match args.group {
        GroupArg::Shape => 500_000.0,
        GroupArg::Expression => 2.0,
    });
    let copies = args.copies.unwrap_or(match args.group {
        GroupArg::Shape => 100,
        GroupArg::Expression => 50,
    }) as usize;

    let model = load_model(&args.model)
        .with_context(|| format!("loading model from {}", args.model.display()))?;
    let clean_set = sample_clean_set(&model, group, args.count as usize, args.seed);
    let config = CorruptionConfig { sigma, copies, seed: args.seed };
    let mut dataset = build_dataset(group, &clean_set, &config).context("building pair dataset")?;
    if group == ParamGroup::Identity {
        dataset = normalize_shape(dataset).context("normalizing shape dataset")?;
    }
    let (train_set, test_set) =
        split(&dataset, args.test_fraction, args.seed).context("splitting dataset")?;
    save_dataset(&train_set, &args.out_train)
        .with_context(|| format!("writing {}", args.out_train.display()))?;
    save_dataset(&test_set, &args.out_test)
        .with_context(|| format!("writing {}", args.out_test.display()))?;
    println!(
        "wrote {} train pairs -> {} and {} test pairs -> {} ({} group, sigma {}, {} copies)",
        train_set.len(),
        args.out_train.display(),
        test_set.len(),
        args.out_test.display(),
        group.name(),
        sigma,
        copies
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, threads: Option<usize>) -> Result<()> {
    let train_set = load_dataset(&args.train_path)
        .with_context(|| format!("loading train set from {}", args.train_path.display()))?;
    let test_set = load_dataset(&args.test_path)
        .with_context(|| format!("loading test set from {}", args.test_path.display()))?;
    let spec = build(train_set.param_count).context("sizing the network")?;
    let config = TrainConfig {
        epochs: args.epochs as usize,
        learning_rate: args.learning_rate,
        batch_size: args.batch_size as usize,
        seed: args.seed,
        shuffle: true,
    };

    println!(
        "training on {} pairs (test {}), {} epochs, batch {}, learning rate {}",
        train_set.len(),
        test_set.len(),
        config.epochs,
        config.batch_size,
        config.learning_rate
    );
    let started = std::time::Instant::now();
    let (weights, history) = train(&spec, &train_set, &test_set, &config)?;
    let wall_clock = started.elapsed().as_secs_f64();
    for (epoch, (tr, te)) in history.train_loss.iter().zip(&history.test_loss).enumerate() {
        println!("epoch {:>2}: train mse {tr:.6e}, test mse {te:.6e}", epoch + 1);
    }
    let (test_output_mse, test_input_mse) = evaluate_mse(&weights, &test_set)?;

    save_weights(&weights, &args.out)
        .with_context(|| format!("writing weights to {}", args.out.display()))?;

    let mut manifest = RunManifest::new("train", args.seed, threads)
        .input("train", &args.train_path)
        .input("test", &args.test_path)
        .output("weights", &args.out)
        .output("metrics", &args.metrics);
    manifest.config = json!({
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
    });
    let metrics = json!({
        "manifest": manifest,
        "history": {
            "train_loss": history.train_loss,
            "test_loss": history.test_loss,
            "epoch_seconds": history.epoch_seconds,
        },
        "final": {
            "test_output_mse": test_output_mse,
            "test_input_mse": test_input_mse,
        },
        "wall_clock_seconds": wall_clock,
    });
    std::fs::write(&args.metrics, serde_json::to_string_pretty(&metrics)?)
        .with_context(|| format!("writing metrics to {}", args.metrics.display()))?;
    println!(
        "final test mse: output {test_output_mse:.6e}, input {test_input_mse:.6e} -> {}",
        args.out.display()
    );
    Ok(())
}

fn zero_vector(group: ParamGroup, len: usize) -> ParamVector {
    ParamVector::zeros(group, len)
}

fn export_meshes(
    model: &MorphableModel,
    dataset: &ParamDataset,
    group: ParamGroup,
    count: usize,
    dir: &Path,
) -> Result<usize> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating OBJ directory {}", dir.display()))?;
    let label = match group {
        ParamGroup::Identity => "shape",
        ParamGroup::Expression => "exp",
    };
    let mut written = 0usize;
    for (i, pair) in dataset.pairs.iter().take(count).enumerate() {
        for (variant, values) in [("noisy", &pair.noisy), ("denoised", &pair.clean)] {
            let vector = ParamVector { group, values: values.clone() };
            let (id, exp) = match group {
                ParamGroup::Identity => (vector, zero_vector(ParamGroup::Expression, model.p_exp())),
                ParamGroup::Expression => (zero_vector(ParamGroup::Identity, model.p_id()), vector),
            };
            let mesh = synthesize_face(model, &id, &exp)?;
            let path = dir.join(format!("face_{i:03}_{label}_{variant}.obj"));
            std::fs::write(&path, export_obj(&mesh))
                .with_context(|| format!("writing {}", path.display()))?;
            written += 1;
        }
    }
    Ok(written)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    if args.export_obj > args.count {
        bail!(
            "--export-obj {} exceeds --count {}; nothing to export",
            args.export_obj,
            args.count
        );
    }
    let model = load_model(&args.model)
        .with_context(|| format!("loading model from {}", args.model.display()))?;
    let shape_weights = load_weights(&args.shape_weights)
        .with_context(|| format!("loading shape weights from {}", args.shape_weights.display()))?;
    let exp_weights = load_weights(&args.exp_weights)
        .with_context(|| format!("loading expression weights from {}", args.exp_weights.display()))?;

    let (shape_set, exp_set) = generate_synthetic(
        &model,
        &shape_weights,
        &exp_weights,
        args.count as usize,
        args.k_shape,
        args.k_exp,
        args.seed,
    )?;
    save_dataset(&shape_set, &args.out_shape)
        .with_context(|| format!("writing {}", args.out_shape.display()))?;
    save_dataset(&exp_set, &args.out_exp)
        .with_context(|| format!("writing {}", args.out_exp.display()))?;
    println!(
        "wrote {} shape pairs -> {} and {} expression pairs -> {}",
        shape_set.len(),
        args.out_shape.display(),
        exp_set.len(),
        args.out_exp.display()
    );

    if args.export_obj > 0 {
        let n = args.export_obj as usize;
        let mut written = export_meshes(&model, &shape_set, ParamGroup::Identity, n, &args.obj_dir)?;
        written += export_meshes(&model, &exp_set, ParamGroup::Expression, n, &args.obj_dir)?;
        println!("wrote {written} OBJ meshes -> {}", args.obj_dir.display());
    }
    Ok(())
}

/// Distinct clean vectors of a pair dataset, preserving first-seen order.
/// Copies of one clean sample are consecutive, so one linear scan suffices.
fn distinct_cleans(dataset: &ParamDataset) -> Vec<Vec<f64>> {
    let mut cleans: Vec<Vec<f64>> = Vec::new();
    for pair in &dataset.pairs {
        let same = cleans.last().is_some_and(|prev: &Vec<f64>| {
            prev.iter().zip(&pair.clean).all(|(a, b)| a.to_bits() == b.to_bits())
        });
        if !same {
            cleans.push(pair.clean.clone());
        }
    }
    cleans
}

fn parse_labeled_datasets(specs: &[String]) -> Result<Vec<(String, ParamDataset)>> {
    let mut result = Vec::with_capacity(specs.len());
    for spec in specs {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("--dataset expects NAME=PATH, got {spec:?}"))?;
        let dataset = load_dataset(Path::new(path))
            .with_context(|| format!("loading dataset {name} from {path}"))?;
        result.push((name.to_string(), dataset));
    }
    Ok(result)
}

fn cmd_evaluate(args: EvaluateArgs, threads: Option<usize>) -> Result<()> {
    if args.sweep {
        let weights_path = args.weights.as_ref().context("--sweep requires --weights")?;
        let pairs_path = args.pairs.as_ref().context("--sweep requires --pairs")?;
        let sigma_train = args.sigma_train.context("--sweep requires --sigma-train")?;
        let out = args.out.unwrap_or_else(|| PathBuf::from("sweep.csv"));

        let weights = load_weights(weights_path)
            .with_context(|| format!("loading weights from {}", weights_path.display()))?;
        let dataset = load_dataset(pairs_path)
            .with_context(|| format!("loading pairs from {}", pairs_path.display()))?;
        let cleans = distinct_cleans(&dataset);
        let sigmas = default_sigma_grid(sigma_train);
        let result = noise_sweep(&weights, &cleans, &sigmas, args.copies as usize, args.seed)?;
        std::fs::write(&out, sweep_csv(&result))
            .with_context(|| format!("writing {}", out.display()))?;
        println!(
            "swept {} noise levels over {} clean vectors -> {}",
            sigmas.len(),
            cleans.len(),
            out.display()
        );
        return Ok(());
    }

    let labeled = parse_labeled_datasets(&args.datasets)?;
    if labeled.is_empty() {
        bail!("--scatter/--diversity require at least one --dataset NAME=PATH");
    }
    let refs: Vec<(&str, &ParamDataset)> =
        labeled.iter().map(|(n, d)| (n.as_str(), d)).collect();

    if args.scatter {
        let samples = args.samples.unwrap_or(70);
        let out = args.out.unwrap_or_else(|| PathBuf::from("scatter.csv"));
        let report = diversity_report(&refs, samples)?;
        std::fs::write(&out, scatter_csv(&report))
            .with_context(|| format!("writing {}", out.display()))?;
        println!("projected {} datasets ({} samples each) -> {}", refs.len(), samples, out.display());
        return Ok(());
    }

    let samples = args.samples.unwrap_or(DEFAULT_DIVERSITY_SAMPLES);
    let out = args.out.unwrap_or_else(|| PathBuf::from("diversity.json"));
    let report = diversity_report(&refs, samples)?;

    let mut manifest = RunManifest::new("evaluate", args.seed, threads).output("report", &out);
    manifest.config = json!({ "mode": "diversity", "samples": samples });
    manifest.inputs.insert("datasets", args.datasets.join(","));
    let traces: Vec<_> = report
        .entries
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "trace": e.trace,
                "samples_used": e.samples_used,
                "used_all_available": e.used_all_available,
            })
        })
        .collect();
    let ratios: Vec<_> = report
        .ratios
        .iter()
        .map(|(pair, ratio)| json!({ "pair": pair, "ratio": ratio }))
        .collect();
    let payload = json!({ "manifest": manifest, "traces": traces, "ratios": ratios });
    std::fs::write(&out, serde_json::to_string_pretty(&payload)?)
        .with_context(|| format!("writing {}", out.display()))?;
    for e in &report.entries {
        println!("trace[{}] = {:.6e} over {} samples", e.name, e.trace, e.samples_used);
    }
    for (pair, ratio) in &report.ratios {
        println!("ratio {pair} = {ratio:.3}");
    }
    println!("wrote diversity report -> {}", out.display());
    Ok(())
}

/// Feed a dataset's noisy vectors through the network in the units it was
/// trained on: raw shape data is normalized on the way in and restored on
/// the way out, so the output file keeps the input's units.
fn denoise_dataset(weights: &AutoencoderWeights, dataset: &ParamDataset) -> Result<ParamDataset> {
    let needs_scaling =
        dataset.group == ParamGroup::Identity && dataset.normalization == 1.0;
    let inputs: Vec<Vec<f64>> = dataset
        .pairs
        .iter()
        .map(|p| {
            if needs_scaling {
                p.noisy.iter().map(|v| v * SHAPE_NORMALIZATION).collect()
            } else {
                p.noisy.clone()
            }
        })
        .collect();
    let denoised = face_manifold_core::autoencoder::denoise_batch(weights, &inputs)?;
    let pairs = denoised
        .into_iter()
        .zip(&dataset.pairs)
        .map(|(mut clean, original)| {
            if needs_scaling {
                for v in clean.iter_mut() {
                    *v /= SHAPE_NORMALIZATION;
                }
            }
            SamplePair { clean, noisy: original.noisy.clone() }
        })
        .collect();
    Ok(ParamDataset {
        group: dataset.group,
        param_count: dataset.param_count,
        normalization: dataset.normalization,
        pairs,
    })
}

fn cmd_denoise(args: DenoiseArgs) -> Result<()> {
    let weights = load_weights(&args.weights)
        .with_context(|| format!("loading weights from {}", args.weights.display()))?;
    let dataset = load_dataset(&args.input)
        .with_context(|| format!("loading dataset from {}", args.input.display()))?;
    let denoised = denoise_dataset(&weights, &dataset)?;
    save_dataset(&denoised, &args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("denoised {} pairs -> {}", denoised.len(), args.output.display());
    Ok(())
}
