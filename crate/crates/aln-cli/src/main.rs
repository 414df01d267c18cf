//! `aln` command-line interface.
//!
//! Subcommands: `gen-data`, `train`, `eval`, `ablate`, `gradcheck`,
//! `export-embeddings`. Every command is deterministic given identical flags
//! and inputs.
//!
//! Exit codes: 0 success, 1 I/O or validation failure, 2 usage error,
//! 3 numeric fault.
//!
//! Option precedence: built-in defaults < `--config` file < explicit flags.
//! The config file holds `key=value` lines keyed by long flag names (without
//! the leading dashes); `#` starts a comment. If `ALN_OUT_DIR` is set,
//! relative output paths are placed under it.

mod opts;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aln::{
    ablation_summary, cosine_diagnostic, evaluate, export_embeddings, generate, load_checkpoint,
    load_dataset, run_ablation, save_checkpoint, save_dataset, write_ablation_report, Dataset,
    GeneratorConfig, GradCheckOptions, ModelConfig, TrainConfig, Variant,
};

use opts::{ConfigFile, Failure};

#[derive(Parser)]
#[command(name = "aln", version, about = "Acoustic-linguistic intent classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate paired synthetic train/test datasets.
    GenData(GenDataArgs),
    /// Train one model variant and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset file.
    Eval(EvalArgs),
    /// Train and evaluate a grid of (variant, alpha) cells.
    Ablate(AblateArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Export teacher/student embeddings with PCA coordinates.
    ExportEmbeddings(ExportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Output directory; receives train.alnd and test.alnd.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    train_n: Option<usize>,
    #[arg(long)]
    test_n: Option<usize>,
    #[arg(long)]
    d_acoustic: Option<usize>,
    #[arg(long, value_name = "D_LINGUISTIC")]
    d_ling: Option<usize>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    teacher_noise: Option<f64>,
    #[arg(long)]
    acoustic_noise: Option<f64>,
    #[arg(long)]
    keyword_prob: Option<f64>,
    #[arg(long)]
    centroid_scale: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (as written by gen-data).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint output path.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// baseline2 | aln-linguistic | aln.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Seed for both initialization and epoch shuffling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gru_hidden: Option<usize>,
    /// Attention width; defaults to the dataset's acoustic width.
    #[arg(long)]
    d_attn: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Metrics file, written incrementally (one record per epoch).
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint path.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset file path.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Dataset directory (as written by gen-data).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Report output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated variant list.
    #[arg(long)]
    variants: Option<String>,
    /// Comma-separated alpha list.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gru_hidden: Option<usize>,
    #[arg(long)]
    d_attn: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Maximum allowed per-parameter relative error.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Central-difference step.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Elements checked per tensor (larger tensors are stride-sampled).
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset file path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Embedding export output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::ExportEmbeddings(args) => cmd_export(args),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

/// Relative output paths land under ALN_OUT_DIR when it is set.
fn out_path(path: PathBuf) -> PathBuf {
    if path.is_relative() {
        if let Some(base) = std::env::var_os("ALN_OUT_DIR") {
            return PathBuf::from(base).join(path);
        }
    }
    path
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Failure::runtime(e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_gen_data(args: GenDataArgs) -> Result<ExitCode, Failure> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let defaults = GeneratorConfig::default();
    let gen = GeneratorConfig {
        seed: cfg.resolve("seed", args.seed, defaults.seed)?,
        num_classes: cfg.resolve("classes", args.classes, defaults.num_classes)?,
        train_count: cfg.resolve("train-n", args.train_n, defaults.train_count)?,
        test_count: cfg.resolve("test-n", args.test_n, defaults.test_count)?,
        d_acoustic: cfg.resolve("d-acoustic", args.d_acoustic, defaults.d_acoustic)?,
        d_linguistic: cfg.resolve("d-ling", args.d_ling, defaults.d_linguistic)?,
        min_len: cfg.resolve("min-len", args.min_len, defaults.min_len)?,
        max_len: cfg.resolve("max-len", args.max_len, defaults.max_len)?,
        teacher_noise: cfg.resolve("teacher-noise", args.teacher_noise, defaults.teacher_noise)?,
        acoustic_noise: cfg.resolve(
            "acoustic-noise",
            args.acoustic_noise,
            defaults.acoustic_noise,
        )?,
        keyword_prob: cfg.resolve("keyword-prob", args.keyword_prob, defaults.keyword_prob)?,
        centroid_scale: cfg.resolve(
            "centroid-scale",
            args.centroid_scale,
            defaults.centroid_scale,
        )?,
    };
    gen.validate().map_err(Failure::usage_from)?;
    let out_dir = out_path(cfg.resolve_required("out", args.out)?);

    fs::create_dir_all(&out_dir).map_err(|e| Failure::runtime(e.to_string()))?;
    let (train_ds, test_ds) = generate(&gen)?;
    save_dataset(&train_ds, &out_dir.join("train.alnd"))?;
    save_dataset(&test_ds, &out_dir.join("test.alnd"))?;
    println!(
        "gen-data seed={} classes={} train_count={} test_count={} d_acoustic={} d_linguistic={} out={}",
        gen.seed,
        gen.num_classes,
        gen.train_count,
        gen.test_count,
        gen.d_acoustic,
        gen.d_linguistic,
        out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_split_dir(dir: &Path) -> Result<(Dataset, Dataset), Failure> {
    let train = load_dataset(&dir.join("train.alnd"))?;
    let test = load_dataset(&dir.join("test.alnd"))?;
    Ok((train, test))
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode, Failure> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let defaults = TrainConfig::default();
    let tcfg = TrainConfig {
        alpha: cfg.resolve("alpha", args.alpha, defaults.alpha)?,
        epochs: cfg.resolve("epochs", args.epochs, defaults.epochs)?,
        batch_size: cfg.resolve("batch-size", args.batch_size, defaults.batch_size)?,
        learning_rate: cfg.resolve("lr", args.lr, defaults.learning_rate)?,
        shuffle_seed: cfg.resolve("seed", args.seed, 0)?,
        eval_every: cfg.resolve("eval-every", args.eval_every, defaults.eval_every)?,
        nan_policy: defaults.nan_policy,
    };
    tcfg.validate().map_err(Failure::usage_from)?;
    let variant: Variant = cfg
        .resolve("variant", args.variant, "aln".to_string())?
        .parse()
        .map_err(Failure::usage_from)?;
    let gru_hidden = cfg.resolve("gru-hidden", args.gru_hidden, 128)?;
    let d_attn_flag: Option<usize> = cfg.resolve_opt("d-attn", args.d_attn)?;
    if gru_hidden == 0 {
        return Err(Failure::usage("gru-hidden must be >= 1"));
    }
    if d_attn_flag == Some(0) {
        return Err(Failure::usage("d-attn must be >= 1"));
    }
    let data_dir = cfg.resolve_required("data", args.data)?;
    let model_out = out_path(cfg.resolve_required("model-out", args.model_out)?);
    let metrics_out = cfg
        .resolve_opt::<PathBuf>("metrics-out", args.metrics_out)?
        .map(out_path);

    let (train_ds, test_ds) = load_split_dir(&data_dir)?;
    let mcfg = ModelConfig {
        variant,
        d_acoustic: train_ds.d_acoustic,
        d_linguistic: train_ds.d_linguistic,
        d_attn: d_attn_flag.unwrap_or(train_ds.d_acoustic),
        gru_hidden,
        num_classes: train_ds.num_classes,
        init_seed: tcfg.shuffle_seed,
    };

    let mut metrics_file = match &metrics_out {
        Some(path) => {
            ensure_parent(path)?;
            Some(fs::File::create(path).map_err(|e| Failure::runtime(e.to_string()))?)
        }
        None => None,
    };
    let (params, history) =
        aln::train_with_observer(&train_ds, &test_ds, &mcfg, &tcfg, |metrics| {
            if let Some(file) = metrics_file.as_mut() {
                writeln!(file, "{}", aln::format_metrics_record(metrics))?;
                file.flush()?;
            }
            Ok(())
        })?;

    ensure_parent(&model_out)?;
    save_checkpoint(&params, &model_out)?;
    let final_accuracy = history
        .last()
        .and_then(|m| m.test_accuracy)
        .expect("final epoch is always evaluated");
    println!("final test accuracy: {final_accuracy:.4}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, Failure> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let model_path = cfg.resolve_required("model", args.model)?;
    let data_path = cfg.resolve_required("data", args.data)?;
    let params = load_checkpoint(&model_path)?;
    let ds = load_dataset(&data_path)?;
    let accuracy = evaluate(&params, &ds)?;
    println!("{accuracy:.4}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(args: AblateArgs) -> Result<ExitCode, Failure> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let defaults = TrainConfig::default();
    let tcfg = TrainConfig {
        alpha: defaults.alpha,
        epochs: cfg.resolve("epochs", args.epochs, defaults.epochs)?,
        batch_size: cfg.resolve("batch-size", args.batch_size, defaults.batch_size)?,
        learning_rate: cfg.resolve("lr", args.lr, defaults.learning_rate)?,
        shuffle_seed: cfg.resolve("seed", args.seed, 0)?,
        eval_every: defaults.eval_every,
        nan_policy: defaults.nan_policy,
    };
    tcfg.validate().map_err(Failure::usage_from)?;
    let gru_hidden = cfg.resolve("gru-hidden", args.gru_hidden, 128)?;
    if gru_hidden == 0 {
        return Err(Failure::usage("gru-hidden must be >= 1"));
    }
    let variants_text = cfg.resolve(
        "variants",
        args.variants,
        "baseline2,aln-linguistic,aln".to_string(),
    )?;
    let alphas_text = cfg.resolve("alphas", args.alphas, "0.5,0.8".to_string())?;
    let variants = parse_variants(&variants_text)?;
    let alphas = parse_alphas(&alphas_text)?;
    let d_attn_flag: Option<usize> = cfg.resolve_opt("d-attn", args.d_attn)?;
    if d_attn_flag == Some(0) {
        return Err(Failure::usage("d-attn must be >= 1"));
    }
    let data_dir = cfg.resolve_required("data", args.data)?;
    let report_out = out_path(cfg.resolve_required("out", args.out)?);

    let (train_ds, test_ds) = load_split_dir(&data_dir)?;
    let base = ModelConfig {
        variant: Variant::Aln,
        d_acoustic: train_ds.d_acoustic,
        d_linguistic: train_ds.d_linguistic,
        d_attn: d_attn_flag.unwrap_or(train_ds.d_acoustic),
        gru_hidden,
        num_classes: train_ds.num_classes,
        init_seed: tcfg.shuffle_seed,
    };
    let report = run_ablation(&train_ds, &test_ds, &variants, &alphas, &base, &tcfg)?;
    ensure_parent(&report_out)?;
    write_ablation_report(&report, &report_out)?;
    print!("{}", ablation_summary(&report));
    Ok(ExitCode::SUCCESS)
}

fn parse_variants(text: &str) -> Result<Vec<Variant>, Failure> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|tok| tok.trim().parse().map_err(Failure::usage_from))
        .collect()
}

fn parse_alphas(text: &str) -> Result<Vec<f64>, Failure> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|tok| {
            let alpha: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("invalid alpha {tok:?}")))?;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Failure::usage(format!(
                    "alpha must lie in [0, 1], got {alpha}"
                )));
            }
            Ok(alpha)
        })
        .collect()
}

/// The gradcheck profile: small enough that exhaustive finite differences
/// finish in seconds.
fn gradcheck_fixture() -> Result<(Vec<aln::Utterance>, ModelConfig), Failure> {
    let gen = GeneratorConfig {
        seed: 5,
        num_classes: 3,
        train_count: 3,
        test_count: 3,
        d_acoustic: 4,
        d_linguistic: 6,
        min_len: 3,
        max_len: 3,
        teacher_noise: 0.3,
        acoustic_noise: 0.5,
        keyword_prob: 0.6,
        centroid_scale: 1.0,
    };
    let (train_ds, _) = generate(&gen)?;
    let mcfg = ModelConfig {
        variant: Variant::Aln,
        d_acoustic: 4,
        d_linguistic: 6,
        d_attn: 4,
        gru_hidden: 5,
        num_classes: 3,
        init_seed: 11,
    };
    Ok((train_ds.utterances, mcfg))
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<ExitCode, Failure> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let defaults = GradCheckOptions::default();
    let opts = GradCheckOptions {
        epsilon: cfg.resolve("epsilon", args.epsilon, defaults.epsilon)?,
        max_elements_per_tensor: cfg.resolve(
            "sample",
            args.sample,
            defaults.max_elements_per_tensor,
        )?,
        tolerance: cfg.resolve("tolerance", args.tolerance, defaults.tolerance)?,
    };
    if opts.tolerance.is_nan() || opts.tolerance <= 0.0 {
        return Err(Failure::usage("tolerance must be > 0"));
    }
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 {
        return Err(Failure::usage("epsilon must be > 0"));
    }

    let (batch, base_cfg) = gradcheck_fixture()?;
    let mut worst: f64 = 0.0;
    let mut failed = false;
    for variant in Variant::all() {
        let mcfg = ModelConfig {
            variant,
            ..base_cfg.clone()
        };
        let params = aln::init_model(&mcfg)?;
        for alpha in [0.0, 0.5, 0.8, 1.0] {
            let report = aln::gradcheck(&params, &batch, alpha, &opts)?;
            for check in &report.checks {
                println!(
                    "variant={variant} alpha={alpha} param={} max_rel_err={:.3e} checked={}",
                    check.name, check.max_relative_error, check.elements_checked
                );
            }
            worst = worst.max(report.max_relative_error());
            failed |= !report.passed();
        }
    }
    if failed {
        println!(
            "gradcheck: FAIL (max relative error {worst:.3e}, tolerance {:.1e})",
            opts.tolerance
        );
        Ok(ExitCode::FAILURE)
    } else {
        println!(
            "gradcheck: PASS (max relative error {worst:.3e}, tolerance {:.1e})",
            opts.tolerance
        );
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_export(args: ExportArgs) -> Result<ExitCode, Failure> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let model_path = cfg.resolve_required("model", args.model)?;
    let data_path = cfg.resolve_required("data", args.data)?;
    let out = out_path(cfg.resolve_required("out", args.out)?);
    let params = load_checkpoint(&model_path)?;
    let ds = load_dataset(&data_path)?;
    ensure_parent(&out)?;
    export_embeddings(&params, &ds, &out)?;
    if params.config.variant != Variant::Baseline2 {
        let cosine = cosine_diagnostic(&params, &ds)?;
        println!(
            "export-embeddings rows={} mean_student_teacher_cosine={cosine:.4} out={}",
            2 * ds.len(),
            out.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}
