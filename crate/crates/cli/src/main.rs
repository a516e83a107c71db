//! Command-line frontend: `generate`, `evaluate`, `baseline`, and `inspect`.
//!
//! Exit codes: 0 ok, 2 config error, 3 I/O error, 4 evaluation-undefined.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use blurgen::baseline::{sharpness_map, DEFAULT_SCALES};
use blurgen::evaluation::{
    evaluate_dataset, flattened_vectors, load_type_map, pr_points, roc_points, tta_average,
    BlurType, EvalSummary,
};
use blurgen::io::{load_image, save_gray16, save_image, OutputFormat};
use blurgen::kernel::realize_kernel;
use blurgen::pipeline::{generate_dataset, read_manifest, stream_samples};
use blurgen::{Error, GeneratorConfig, MaskMode};

// Keep in sync with CONFIG_SCHEMA_VERSION (checked by a test below).
const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema v1)");

#[derive(Parser)]
#[command(name = "blurgen", about = "Synthesize partially blurred images with exact blur masks, and score blur-map predictions", version = VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset (or stream records to stdout with --stream).
    Generate(GenerateArgs),
    /// Score a directory of prediction maps against ground-truth masks.
    Evaluate(EvaluateArgs),
    /// Write gradient-based blurriness maps for a directory of images.
    Baseline(BaselineArgs),
    /// Dump one manifest record and re-realize its blur kernel.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML config file; explicit flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    samples_per_image: Option<u32>,
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// proposals | labels
    #[arg(long)]
    mask_mode: Option<String>,
    #[arg(long)]
    proposals: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    p_inv: Option<f64>,
    #[arg(long)]
    motion_ratio: Option<f64>,
    #[arg(long)]
    output_size: Option<u32>,
    /// Emit length-prefixed records on stdout instead of writing a tree;
    /// without --count this runs until the consumer closes the pipe.
    #[arg(long)]
    stream: bool,
    /// Maximum records in stream mode.
    #[arg(long)]
    count: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Manifest (.jsonl) or CSV `id,defocus|motion` mapping ids to blur type.
    #[arg(long)]
    type_map: Option<PathBuf>,
    /// Also compute the flattened all-pixels AP.
    #[arg(long)]
    flattened: bool,
    /// Write per-image records as CSV.
    #[arg(long)]
    per_image_csv: Option<PathBuf>,
    /// Write flattened-protocol ROC/PR curve points as CSV into this directory.
    #[arg(long)]
    curves_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Average the map with its horizontal-flip counterpart.
    #[arg(long)]
    tta: bool,
    /// Comma-separated smoothing sigmas.
    #[arg(long)]
    scales: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    id: String,
    /// Save the re-realized kernel as a normalized grayscale PNG.
    #[arg(long)]
    kernel_png: Option<PathBuf>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Argument(_) => 2,
        Error::Io { .. } | Error::Decode { .. } | Error::Format { .. } => 3,
        Error::UndefinedMetric => 4,
        _ => 1,
    }
}

// println! panics on EPIPE; a consumer like `head` closing the pipe is a
// normal way for a run to end.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
    }};
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e);
        std::process::exit(exit_code(&e));
    }
}

fn config_hash(cfg: &GeneratorConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg.canonical_json().as_bytes());
    hasher.finalize().iter().map(|b| format!("{:02x}", b)).collect()
}

fn resolve_config(args: &GenerateArgs) -> Result<GeneratorConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => GeneratorConfig::from_toml_file(path)?,
        None => GeneratorConfig::default(),
    };
    if let Some(v) = &args.source {
        cfg.source_dir = v.clone();
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.samples_per_image {
        cfg.samples_per_image = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = &args.mask_mode {
        cfg.mask_mode = match v.as_str() {
            "proposals" => MaskMode::Proposals,
            "labels" => MaskMode::Labels,
            other => return Err(Error::Config(format!("unknown mask mode {:?}", other))),
        };
    }
    if let Some(v) = &args.proposals {
        cfg.proposal_dir = Some(v.clone());
    }
    if let Some(v) = &args.labels {
        cfg.label_dir = Some(v.clone());
    }
    if let Some(v) = args.p_inv {
        cfg.p_inv = v;
    }
    if let Some(v) = args.motion_ratio {
        cfg.blur.motion_ratio = v;
    }
    if let Some(v) = args.output_size {
        cfg.output_size = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Error> {
    let cfg = resolve_config(&args)?;
    let hash = config_hash(&cfg);
    if args.stream {
        eprintln!("config hash {}", hash);
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        stream_samples(&cfg, &mut lock, args.count)?;
        match lock.flush() {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            Err(e) => return Err(Error::Io { context: "flushing stdout".into(), source: e }),
        }
        return Ok(());
    }
    let manifest = generate_dataset(&cfg)?;
    outln!("manifest {}", manifest.path.display());
    outln!("config hash {}", hash);
    outln!("records {}", manifest.records.len());
    if !manifest.skipped.is_empty() {
        eprintln!("skipped {} degenerate sample(s):", manifest.skipped.len());
        for (id, why) in &manifest.skipped {
            eprintln!("  {} ({})", id, why);
        }
    }
    Ok(())
}

fn print_summary(summary: &EvalSummary) {
    outln!("{:<10} {:>6} {:>10} {:>10}", "subset", "n", "AUC", "AP");
    for (name, group) in [
        ("defocus", &summary.defocus),
        ("motion", &summary.motion),
        ("unknown", &summary.unknown),
    ] {
        if group.count > 0 {
            outln!("{:<10} {:>6} {:>10.6} {:>10.6}", name, group.count, group.auc, group.ap);
        }
    }
    outln!(
        "{:<10} {:>6} {:>10.6} {:>10.6}",
        "all",
        summary.overall.count,
        summary.overall.auc,
        summary.overall.ap
    );
    if let Some(ap) = summary.flattened_ap {
        outln!("flattened AP {:.6}", ap);
    }
    if !summary.skipped.is_empty() {
        outln!("skipped (single-class ground truth): {}", summary.skipped.len());
    }
    if !summary.omissions.is_empty() {
        outln!("missing predictions: {}", summary.omissions.len());
        for id in &summary.omissions {
            outln!("  {}", id);
        }
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let type_map: Option<HashMap<String, BlurType>> = match &args.type_map {
        Some(path) => Some(load_type_map(path)?),
        None => None,
    };
    let (records, summary) =
        evaluate_dataset(&args.pred, &args.gt, type_map.as_ref(), args.flattened)?;
    if summary.overall.count == 0 {
        return Err(Error::UndefinedMetric);
    }
    print_summary(&summary);

    if let Some(path) = &args.per_image_csv {
        let mut out = String::from("id,blur_type,auc,ap\n");
        for rec in &records {
            out.push_str(&format!(
                "{},{},{:.9},{:.9}\n",
                rec.id,
                rec.blur_type.name(),
                rec.auc,
                rec.ap
            ));
        }
        std::fs::write(path, out)
            .map_err(|e| Error::Io { context: format!("writing {}", path.display()), source: e })?;
    }
    if let Some(dir) = &args.curves_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Io { context: format!("creating {}", dir.display()), source: e })?;
        let (scores, labels) = flattened_vectors(&args.pred, &args.gt)?;
        let mut roc = String::from("fpr,tpr\n");
        for (fpr, tpr) in roc_points(&scores, &labels)? {
            roc.push_str(&format!("{:.9},{:.9}\n", fpr, tpr));
        }
        let roc_path = dir.join("roc.csv");
        std::fs::write(&roc_path, roc).map_err(|e| Error::Io {
            context: format!("writing {}", roc_path.display()),
            source: e,
        })?;
        let mut pr = String::from("recall,precision\n");
        for (recall, precision) in pr_points(&scores, &labels)? {
            pr.push_str(&format!("{:.9},{:.9}\n", recall, precision));
        }
        let pr_path = dir.join("pr.csv");
        std::fs::write(&pr_path, pr).map_err(|e| Error::Io {
            context: format!("writing {}", pr_path.display()),
            source: e,
        })?;
    }
    Ok(())
}

fn parse_scales(text: &str) -> Result<Vec<f64>, Error> {
    let scales: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let scales = scales.map_err(|_| Error::Config(format!("bad --scales value {:?}", text)))?;
    if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config("scales must be positive".into()));
    }
    Ok(scales)
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), Error> {
    let scales = match &args.scales {
        Some(text) => parse_scales(text)?,
        None => DEFAULT_SCALES.to_vec(),
    };
    let inputs = blurgen::pipeline::list_source_images(&args.input)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        context: format!("creating {}", args.out.display()),
        source: e,
    })?;
    if inputs.is_empty() {
        eprintln!("warning: no images found in {}", args.input.display());
        return Ok(());
    }
    for path in &inputs {
        let img = load_image(path)?;
        let map = if args.tta {
            tta_average(|i| sharpness_map(i, &scales), &img)?
        } else {
            sharpness_map(&img, &scales)?
        };
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        save_gray16(&map, args.out.join(format!("{}.png", stem)))?;
    }
    outln!("wrote {} prediction(s) to {}", inputs.len(), args.out.display());
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), Error> {
    let records = read_manifest(&args.manifest)?;
    let record = records.iter().find(|r| r.id == args.id).ok_or_else(|| Error::Format {
        path: args.manifest.clone(),
        reason: format!("no record with id {:?}", args.id),
    })?;
    outln!("{}", serde_json::to_string_pretty(record).expect("record serializes"));
    let spec = record.blur_spec()?;
    let kernel = realize_kernel(&spec)?;
    let mass: f64 = kernel.data().iter().sum();
    let nonzero = kernel.data().iter().filter(|v| **v > 0.0).count();
    let peak = kernel.data().iter().cloned().fold(0.0, f64::max);
    outln!(
        "kernel: {0}x{0}, mass {1:.12}, nonzero {2}, peak {3:.6}",
        kernel.size(),
        mass,
        nonzero,
        peak
    );
    if let Some(path) = &args.kernel_png {
        let scaled: Vec<f64> = kernel.data().iter().map(|v| v / peak).collect();
        let img = blurgen::Image::new(kernel.size(), kernel.size(), 1, scaled)
            .expect("kernel data is a valid raster");
        save_image(&img, path, OutputFormat::Png)?;
        outln!("kernel png {}", path.display());
    }
    Ok(())
}
