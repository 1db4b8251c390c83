use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use wavecnet::complexity::model_madds;
use wavecnet::denoise::{denoise_image, DenoiseConfig};
use wavecnet::io::synth::{generate, SynthConfig};
use wavecnet::io::{load_idx_dataset, load_pgm_dir, read_pgm, read_wtn_any, write_idx_images, write_idx_labels, write_pgm, write_wtn, GrayImage};
use wavecnet::nn::{evaluate, load_checkpoint, save_checkpoint, train_with_progress, AnyModel, Dataset, DownsampleMode, EpochStats, Hyper, Model, ModelConfig};
use wavecnet::robustness::{evaluate_noise, shift_consistency, ErrorMatrix, NoiseEvalConfig, RobustnessReport, SeverityTable, ShiftSampling, ShiftTrialConfig};
use wavecnet::transform::{dwt2d, idwt2d, Decomposition2D};
use wavecnet::{get_wavelet, validate_filterbank, ElementType, Matrix, Scalar, Tensor};

#[derive(Parser)]
#[command(name = "wavecnet", version, about = "Wavelet transforms, wavelet CNNs and noise-robustness metrics")]
struct Cli {
    /// Seed for every random choice (initialisation, shuffling, noise, shifts).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Floating-point precision; defaults to f64 for transforms and f32 for training.
    #[arg(long, global = true)]
    precision: Option<ElementType>,
    /// Worker threads for evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a wavelet's filter coefficients and their validation checks.
    Filters(FiltersArgs),
    /// One-level 2D DWT of an image into four subband files.
    Transform(TransformArgs),
    /// Inverse 2D DWT from four subband files.
    Idwt(IdwtArgs),
    /// Soft-threshold wavelet denoising.
    Denoise(DenoiseArgs),
    /// Train a model and write a checkpoint plus a per-epoch CSV report.
    Train(TrainArgs),
    /// Top-1 error of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Noise error matrix, CE and mCE against a reference matrix.
    Robustness(RobustnessArgs),
    /// Prediction consistency under random image shifts.
    Shift(ShiftArgs),
    /// Multiply-add counts of a model.
    Flops(FlopsArgs),
    /// Write a synthetic ten-class digit dataset in IDX format.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args)]
struct FiltersArgs {
    /// Registry name, e.g. `haar`, `db4`, `ch2.2`.
    #[arg(long)]
    wavelet: String,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Also print the filter-bank validation checks (to stderr).
    #[arg(long)]
    validate: bool,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long, default_value = "haar")]
    wavelet: String,
    /// Input image (.pgm) or rank-2 tensor (.wtn).
    #[arg(long = "in")]
    input: PathBuf,
    /// Subbands are written to `<prefix>_{ll,lh,hl,hh}.wtn`.
    #[arg(long)]
    out_prefix: String,
}

#[derive(Args)]
struct IdwtArgs {
    #[arg(long, default_value = "haar")]
    wavelet: String,
    /// Reads `<prefix>_{ll,lh,hl,hh}.wtn`.
    #[arg(long)]
    in_prefix: String,
    /// Output size as HxW.
    #[arg(long)]
    shape: String,
    /// Output image (.pgm, quantized) or tensor (.wtn).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long, default_value = "haar")]
    wavelet: String,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Input image (.pgm) or rank-2 tensor (.wtn).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output image (.pgm, quantized) or tensor (.wtn).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct DataArgs {
    /// IDX image file.
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX label file.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory of PGM files with a labels.csv.
    #[arg(long)]
    dir: Option<PathBuf>,
}

/// Keys accepted in a `train --config` file; flags given on the command line
/// take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainFile {
    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    train_dir: Option<PathBuf>,
    val_images: Option<PathBuf>,
    val_labels: Option<PathBuf>,
    val_dir: Option<PathBuf>,
    mode: Option<String>,
    model: Option<ModelConfig>,
    epochs: Option<usize>,
    lr: Option<f64>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    batch_size: Option<usize>,
    lr_milestones: Option<Vec<f64>>,
    lr_decay: Option<f64>,
    limit: Option<usize>,
    seed: Option<u64>,
    precision: Option<ElementType>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// IDX training images.
    #[arg(long)]
    train_images: Option<PathBuf>,
    /// IDX training labels.
    #[arg(long)]
    train_labels: Option<PathBuf>,
    /// Training directory of PGM files with a labels.csv.
    #[arg(long)]
    train_dir: Option<PathBuf>,
    /// IDX validation images.
    #[arg(long)]
    val_images: Option<PathBuf>,
    /// IDX validation labels.
    #[arg(long)]
    val_labels: Option<PathBuf>,
    /// Validation directory of PGM files with a labels.csv.
    #[arg(long)]
    val_dir: Option<PathBuf>,
    /// Down-sampling of the built-in mini network, e.g. `dwt_ll:haar` or
    /// `max_pool2` (default `dwt_ll:haar`); ignored when the config file
    /// carries a full `model`.
    #[arg(long)]
    mode: Option<String>,
    /// Number of passes over the training set [default: 10].
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate [default: 0.1].
    #[arg(long)]
    lr: Option<f64>,
    /// SGD momentum [default: 0.9].
    #[arg(long)]
    momentum: Option<f64>,
    /// L2 weight decay [default: 0].
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Mini-batch size [default: 32].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Use only the first N training samples.
    #[arg(long)]
    limit: Option<usize>,
    /// Checkpoint path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch CSV report path (stdout when absent).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct RobustnessArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Reference error matrix (.json or .csv) used as the CE denominator.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// JSON severity table overriding the defaults.
    #[arg(long)]
    severity_table: Option<PathBuf>,
    /// Name stored in the emitted error matrix.
    #[arg(long, default_value = "model")]
    name: String,
    /// Write this model's error matrix (JSON) here.
    #[arg(long)]
    matrix_out: Option<PathBuf>,
    /// Full CE/mCE report as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Full CE/mCE report as CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ShiftArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Largest shift, in pixels, along each axis.
    #[arg(long, default_value_t = 8)]
    range: usize,
    /// Shift pairs drawn per image.
    #[arg(long, default_value_t = 64)]
    pairs: usize,
}

#[derive(Args)]
struct FlopsArgs {
    /// Model configuration JSON.
    #[arg(long, conflicts_with = "mini")]
    config: Option<PathBuf>,
    /// Use the built-in mini network with this down-sampling mode.
    #[arg(long)]
    mini: Option<String>,
    /// Input shape as NxCxHxW.
    #[arg(long, default_value = "1x1x28x28")]
    input: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of images; labels cycle through 0..10.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 28)]
    side: usize,
    /// Standard deviation of the background noise.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// IDX image file to write.
    #[arg(long)]
    out_images: PathBuf,
    /// IDX label file to write.
    #[arg(long)]
    out_labels: PathBuf,
}

/// An error in how the command was invoked (exit code 1) rather than in
/// running it (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

macro_rules! usage {
    ($($arg:tt)*) => {
        return Err(Usage(format!($($arg)*)).into())
    };
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|d| d.trim().parse::<usize>().map_err(|_| Usage(format!("bad dimension '{d}' in '{s}'")).into()))
        .collect()
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn read_image<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    if is_pgm(path) {
        return Ok(read_pgm(path)?.to_matrix());
    }
    let t: Tensor<T> = read_wtn_any(path)?.to_precision();
    Matrix::try_from(t).with_context(|| format!("{} is not a rank-2 tensor", path.display()))
}

fn write_image<T: Scalar>(path: &Path, m: &Matrix<T>) -> Result<()> {
    if is_pgm(path) {
        write_pgm(path, &GrayImage::from_matrix(m))?;
    } else {
        write_wtn(path, &Tensor::from(m.clone()))?;
    }
    Ok(())
}

fn band_path(prefix: &str, band: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{band}.wtn"))
}

const BANDS: [&str; 4] = ["ll", "lh", "hl", "hh"];

fn run_filters(a: &FiltersArgs) -> Result<()> {
    let w = get_wavelet(&a.wavelet)?;
    match a.format {
        Format::Csv => {
            let mut s = String::from("k,analysis_low,analysis_high,synthesis_low,synthesis_high\n");
            for k in 0..w.len() {
                s.push_str(&format!(
                    "{k},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    w.analysis_low[k], w.analysis_high[k], w.synthesis_low[k], w.synthesis_high[k]
                ));
            }
            emit(&s, None)?;
        }
        Format::Json => emit(&(serde_json::to_string_pretty(&w)? + "\n"), None)?,
    }
    if a.validate {
        let report = validate_filterbank(&w);
        for c in &report.checks {
            eprintln!("{:<32} residual {:.3e} {}", c.name, c.residual, if c.passed { "ok" } else { "FAIL" });
        }
        if !report.all_passed() {
            bail!("filter bank {} failed validation", w.name);
        }
    }
    Ok(())
}

fn transform_as<T: Scalar>(a: &TransformArgs) -> Result<()> {
    let w = get_wavelet(&a.wavelet)?;
    let x: Matrix<T> = read_image(&a.input)?;
    let d = dwt2d(&x, &w)?;
    for (band, m) in BANDS.iter().zip(d.subbands()) {
        write_wtn(band_path(&a.out_prefix, band), &Tensor::from(m.clone()))?;
    }
    eprintln!("wrote {}x{} subbands to {}_*.wtn", d.ll.rows(), d.ll.cols(), a.out_prefix);
    Ok(())
}

fn idwt_as<T: Scalar>(a: &IdwtArgs) -> Result<()> {
    let w = get_wavelet(&a.wavelet)?;
    let dims = parse_dims(&a.shape)?;
    let &[h, wd] = dims.as_slice() else {
        usage!("--shape must be HxW, got '{}'", a.shape);
    };
    let mut d = Decomposition2D::<T>::zeros((h, wd));
    for (band, slot) in BANDS.iter().zip(d.subbands_mut()) {
        let path = band_path(&a.in_prefix, band);
        let t: Tensor<T> = read_wtn_any(&path)
            .with_context(|| format!("reading {}", path.display()))?
            .to_precision();
        *slot = Matrix::try_from(t).with_context(|| format!("{} is not a rank-2 tensor", path.display()))?;
    }
    let x = idwt2d(&d, &w)?;
    write_image(&a.out, &x)
}

fn denoise_as<T: Scalar>(a: &DenoiseArgs) -> Result<()> {
    let cfg = DenoiseConfig::new(&a.wavelet, a.lambda)?;
    let x: Matrix<T> = read_image(&a.input)?;
    let out = denoise_image(&Tensor::from(x), &cfg)?;
    write_image(&a.out, &Matrix::try_from(out)?)
}

fn load_data<T: Scalar>(images: Option<&Path>, labels: Option<&Path>, dir: Option<&Path>, what: &str) -> Result<Dataset<T>> {
    match (images, labels, dir) {
        (Some(i), Some(l), None) => Ok(load_idx_dataset(i, l).with_context(|| format!("loading {what} IDX data"))?),
        (None, None, Some(d)) => Ok(load_pgm_dir(d).with_context(|| format!("loading {what} PGM directory"))?),
        _ => usage!("{what} data needs either images+labels (IDX) or a PGM directory"),
    }
}

/// Centre-pads samples smaller than the model input.
fn fit<T: Scalar>(data: Dataset<T>, input: [usize; 3]) -> Result<Dataset<T>> {
    let [_, h, w] = input;
    let [_, dh, dw] = data.sample_shape();
    if (dh, dw) == (h, w) {
        Ok(data)
    } else {
        Ok(data.pad_to(h, w)?)
    }
}

struct TrainPlan {
    file: TrainFile,
    hyper: Hyper,
    precision: ElementType,
}

fn plan_train(cli: &Cli, a: &TrainArgs) -> Result<TrainPlan> {
    let mut f: TrainFile = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            match serde_json::from_str(&text) {
                Ok(f) => f,
                Err(e) => usage!("run config {}: {e}", p.display()),
            }
        }
        None => TrainFile::default(),
    };
    macro_rules! over {
        ($($field:ident),*) => {$(if a.$field.is_some() { f.$field = a.$field.clone(); })*};
    }
    over!(train_images, train_labels, train_dir, val_images, val_labels, val_dir, mode, epochs, lr, momentum, weight_decay, batch_size, limit, out, report);
    let seed = if cli.seed != 0 || f.seed.is_none() { cli.seed } else { f.seed.unwrap_or(0) };
    f.seed = Some(seed);
    let precision = cli.precision.or(f.precision).unwrap_or(ElementType::F32);
    let d = Hyper::default();
    let hyper = Hyper {
        lr: f.lr.unwrap_or(d.lr),
        momentum: f.momentum.unwrap_or(d.momentum),
        weight_decay: f.weight_decay.unwrap_or(d.weight_decay),
        batch_size: f.batch_size.unwrap_or(d.batch_size),
        epochs: f.epochs.unwrap_or(d.epochs),
        lr_milestones: f.lr_milestones.clone().unwrap_or(d.lr_milestones),
        lr_decay: f.lr_decay.unwrap_or(d.lr_decay),
        seed,
    };
    Ok(TrainPlan { file: f, hyper, precision })
}

fn train_as<T: Scalar>(plan: &TrainPlan) -> Result<()> {
    let f = &plan.file;
    let mut data: Dataset<T> = load_data(f.train_images.as_deref(), f.train_labels.as_deref(), f.train_dir.as_deref(), "training")?;
    if let Some(n) = f.limit {
        data = data.subset(&(0..n.min(data.len())).collect::<Vec<_>>());
    }
    let config = match &f.model {
        Some(m) => ModelConfig {
            seed: plan.hyper.seed,
            ..m.clone()
        },
        None => {
            let mode: DownsampleMode = f.mode.as_deref().unwrap_or("dwt_ll:haar").parse()?;
            let [_, h, _] = data.sample_shape();
            let side = h.div_ceil(8) * 8;
            ModelConfig::wavecnet_mini(side, data.classes.max(2), mode, plan.hyper.seed)
        }
    };
    let data = fit(data, config.input)?;
    let val = match (&f.val_images, &f.val_labels, &f.val_dir) {
        (None, None, None) => None,
        (i, l, d) => Some(fit(load_data::<T>(i.as_deref(), l.as_deref(), d.as_deref(), "validation")?, config.input)?),
    };
    let mut model = Model::<T>::build(&config)?;
    let progress = |e: &EpochStats| {
        eprintln!(
            "epoch {:>3}  lr {:.4}  loss {:.5}{}",
            e.epoch,
            e.lr,
            e.train_loss,
            e.val_accuracy.map(|a| format!("  val acc {:.4}", a)).unwrap_or_default()
        )
    };
    let report = train_with_progress(&mut model, &data, val.as_ref(), &plan.hyper, progress)?;
    if let Some(out) = &f.out {
        save_checkpoint(&model, out).with_context(|| format!("writing checkpoint {}", out.display()))?;
    }
    emit(&report.to_csv(), f.report.as_deref())
}

fn with_model<R>(path: &Path, f32_run: impl FnOnce(&Model<f32>) -> Result<R>, f64_run: impl FnOnce(&Model<f64>) -> Result<R>) -> Result<R> {
    match load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))? {
        AnyModel::F32(m) => f32_run(&m),
        AnyModel::F64(m) => f64_run(&m),
    }
}

fn eval_as<T: Scalar>(model: &Model<T>, a: &EvalArgs, threads: usize) -> Result<()> {
    let data = fit(load_data::<T>(a.data.images.as_deref(), a.data.labels.as_deref(), a.data.dir.as_deref(), "evaluation")?, model.config().input)?;
    let err = evaluate(model, &data, threads)?;
    emit(&format!("samples,top1_error,accuracy\n{},{},{}\n", data.len(), err, 1.0 - err), None)
}

fn robustness_as<T: Scalar>(model: &Model<T>, a: &RobustnessArgs, seed: u64, threads: usize) -> Result<()> {
    let data = load_data::<T>(a.data.images.as_deref(), a.data.labels.as_deref(), a.data.dir.as_deref(), "evaluation")?;
    let [_, h, w] = model.config().input;
    let cfg = NoiseEvalConfig {
        table: match &a.severity_table {
            Some(p) => SeverityTable::from_json_file(p)?,
            None => SeverityTable::default(),
        },
        seed,
        threads,
        pad_to: (data.sample_shape()[1..] != [h, w]).then_some((h, w)),
        ..NoiseEvalConfig::default()
    };
    let matrix = evaluate_noise(model, &a.name, &data, &cfg)?;
    if let Some(p) = &a.matrix_out {
        emit(&(matrix.to_json()? + "\n"), Some(p))?;
    }
    let Some(reference) = &a.reference else {
        eprintln!("no --reference given; emitting the error matrix only");
        return emit(&matrix.to_csv(), a.out_csv.as_deref());
    };
    let reference = ErrorMatrix::load(reference)?;
    let report = RobustnessReport::build(&matrix, &reference)?;
    emit(&report.to_csv(), a.out_csv.as_deref())?;
    if let Some(p) = &a.out_json {
        emit(&(report.to_json()? + "\n"), Some(p))?;
    }
    Ok(())
}

fn shift_as<T: Scalar>(model: &Model<T>, a: &ShiftArgs, seed: u64, threads: usize) -> Result<()> {
    let data = load_data::<T>(a.data.images.as_deref(), a.data.labels.as_deref(), a.data.dir.as_deref(), "evaluation")?;
    let [_, h, w] = model.config().input;
    let cfg = ShiftTrialConfig {
        range: a.range,
        pairs: a.pairs,
        seed,
        sampling: ShiftSampling::Random,
        threads,
        pad_to: (data.sample_shape()[1..] != [h, w]).then_some((h, w)),
    };
    let c = shift_consistency(model, &data, &cfg)?;
    emit(&format!("samples,pairs,range,consistency\n{},{},{},{}\n", data.len(), a.pairs, a.range, c), None)
}

fn run_flops(a: &FlopsArgs) -> Result<()> {
    let config = match (&a.config, &a.mini) {
        (Some(p), None) => serde_json::from_str::<ModelConfig>(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing model config {}", p.display()))?,
        (None, Some(mode)) => ModelConfig::wavecnet_mini(ModelConfig::MINI_SIDE, 10, mode.parse()?, 0),
        _ => usage!("flops needs --config or --mini"),
    };
    let report = model_madds(&config, &parse_dims(&a.input)?)?;
    match a.format {
        Format::Json => emit(&(serde_json::to_string_pretty(&report)? + "\n"), None),
        Format::Csv => emit(&report.to_csv(), None),
    }
}

fn run_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let cfg = SynthConfig {
        count: a.count,
        side: a.side,
        seed,
        noise: a.noise,
    };
    let (pixels, labels) = generate(&cfg)?;
    write_idx_images(&a.out_images, a.count, a.side, a.side, &pixels)?;
    write_idx_labels(&a.out_labels, &labels)?;
    Ok(())
}

fn dispatch<F32: FnOnce() -> Result<()>, F64: FnOnce() -> Result<()>>(p: ElementType, f32_run: F32, f64_run: F64) -> Result<()> {
    match p {
        ElementType::F32 => f32_run(),
        ElementType::F64 => f64_run(),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let p64 = cli.precision.unwrap_or(ElementType::F64);
    let threads = cli.threads.max(1);
    match &cli.command {
        Command::Filters(a) => run_filters(a),
        Command::Transform(a) => dispatch(p64, || transform_as::<f32>(a), || transform_as::<f64>(a)),
        Command::Idwt(a) => dispatch(p64, || idwt_as::<f32>(a), || idwt_as::<f64>(a)),
        Command::Denoise(a) => dispatch(p64, || denoise_as::<f32>(a), || denoise_as::<f64>(a)),
        Command::Train(a) => {
            let plan = plan_train(cli, a)?;
            dispatch(plan.precision, || train_as::<f32>(&plan), || train_as::<f64>(&plan))
        }
        Command::Eval(a) => with_model(&a.model, |m| eval_as(m, a, threads), |m| eval_as(m, a, threads)),
        Command::Robustness(a) => with_model(
            &a.model,
            |m| robustness_as(m, a, cli.seed, threads),
            |m| robustness_as(m, a, cli.seed, threads),
        ),
        Command::Shift(a) => with_model(&a.model, |m| shift_as(m, a, cli.seed, threads), |m| shift_as(m, a, cli.seed, threads)),
        Command::Flops(a) => run_flops(a),
        Command::Synth(a) => run_synth(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<Usage>().is_some() { 1 } else { 2 })
        }
    }
}
