//! Command implementations behind the `hypernn` binary.
//!
//! Exit codes: 0 success, 1 quality gate failed (or training diverged),
//! 2 usage or validation error.

pub mod synth;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hypernn::algebra::{AlgebraFile, PREDEFINED_NAMES};
use hypernn::fsutil::write_atomic;
use hypernn::layers::{Activation, Dense, HyperConv, HyperDense, Layer};
use hypernn::training::{evaluate, fit, format_g, FitConfig, Optimizer, OptimizerKind};
use hypernn::{predefined, Sequential, StructureConstants, Tensor};

pub const DEFAULT_SEED: u64 = 42;
const SGD_LR: f64 = 0.015;

#[derive(Debug, Parser)]
#[command(
    name = "hypernn",
    version,
    about = "Hypercomplex layer demos and algebra tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect, check and export algebras.
    #[command(subcommand)]
    Algebra(AlgebraCommand),
    /// Train HyperDense(4) -> tanh -> Dense(1) -> sigmoid on XOR.
    TrainXor(TrainXorArgs),
    /// Train HyperConv2D -> global max pool -> Dense(1) -> sigmoid on
    /// synthetic four-channel images.
    TrainSynth(TrainSynthArgs),
    /// Compare weight counts of a hyper layer and its real counterpart.
    ParamReport(ParamReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum AlgebraCommand {
    /// List the predefined algebras.
    List,
    /// Print the multiplication table.
    Show {
        /// Predefined name or path to an algebra file.
        algebra: String,
    },
    /// Report unit, associative, commutative and alternative laws.
    /// Exits 1 if the unit law fails.
    Check {
        /// Path to an algebra file, or a predefined name.
        algebra: String,
    },
    /// Write an algebra as a JSON file.
    Export {
        algebra: String,
        /// Output path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct TrainOpts {
    /// Learning rate [default: 0.001 for adam, 0.015 for sgd].
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    pub optimizer: OptimizerKind,
    #[arg(long, env = "KHNN_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Mini-batch size [default: the whole training set].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainXorArgs {
    /// Predefined name or path to an algebra file.
    #[arg(long, default_value = "quaternions")]
    pub algebra: String,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[command(flatten)]
    pub train: TrainOpts,
}

#[derive(Debug, Clone, Args)]
pub struct TrainSynthArgs {
    #[arg(long, default_value = "quaternions")]
    pub algebra: String,
    /// Number of hypercomplex filters.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub filters: u64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    /// Zero the unit channel of every image.
    #[arg(long)]
    pub zero_unit: bool,
    #[command(flatten)]
    pub train: TrainOpts,
}

#[derive(Debug, Clone, Args)]
pub struct ParamReportArgs {
    #[arg(long, default_value = "quaternions")]
    pub algebra: String,
    /// Dense layer with this many hypercomplex units.
    #[arg(long, conflicts_with = "filters")]
    pub units: Option<usize>,
    /// Convolution with this many hypercomplex filters.
    #[arg(long)]
    pub filters: Option<usize>,
    /// Convolution kernel extents, e.g. 3,3.
    #[arg(long, value_delimiter = ',', default_value = "3,3")]
    pub kernel: Vec<usize>,
    /// Real input width (features, or channels for convolutions).
    #[arg(long, default_value_t = 4)]
    pub width: usize,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e: hypernn::Error| e.to_string())
}

/// Maps a failed command to its exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<hypernn::Error>() {
        Some(hypernn::Error::Divergence { .. }) => 1,
        _ => 2,
    }
}

/// Runs a parsed command, writing its report to `out`. Returns the exit code
/// for commands that completed.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8> {
    match &cli.command {
        Command::Algebra(cmd) => algebra(cmd, out),
        Command::TrainXor(args) => train_xor(args, out).map(|r| r.exit_code()),
        Command::TrainSynth(args) => train_synth(args, out).map(|_| 0),
        Command::ParamReport(args) => param_report(args, out).map(|_| 0),
    }
}

/// Resolves an existing file path or a predefined algebra name.
pub fn resolve_algebra(name_or_path: &str) -> Result<StructureConstants> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        return StructureConstants::load(path).with_context(|| format!("loading {name_or_path}"));
    }
    Ok(predefined(name_or_path)?)
}

fn algebra(cmd: &AlgebraCommand, out: &mut dyn Write) -> Result<u8> {
    match cmd {
        AlgebraCommand::List => {
            for name in PREDEFINED_NAMES {
                let alg = predefined(name)?;
                writeln!(out, "{name:<14} n = {}", alg.dim())?;
            }
            Ok(0)
        }
        AlgebraCommand::Show { algebra } => {
            let alg = resolve_algebra(algebra)?;
            writeln!(
                out,
                "{} (n = {})",
                alg.name().unwrap_or("unnamed"),
                alg.dim()
            )?;
            write!(out, "{alg}")?;
            Ok(0)
        }
        AlgebraCommand::Check { algebra } => {
            let alg = resolve_algebra(algebra)?;
            let unit = alg.check_unit();
            writeln!(
                out,
                "algebra: {} (n = {})",
                alg.name().unwrap_or("unnamed"),
                alg.dim()
            )?;
            writeln!(out, "unit: {unit}")?;
            writeln!(out, "associative: {}", alg.check_associative())?;
            writeln!(out, "commutative: {}", alg.check_commutative())?;
            writeln!(out, "alternative: {}", alg.check_alternative())?;
            Ok(if unit { 0 } else { 1 })
        }
        AlgebraCommand::Export { algebra, out: path } => {
            let alg = resolve_algebra(algebra)?;
            match path {
                Some(p) => {
                    write_atomic(p, AlgebraFile::from_algebra(&alg).to_json().as_bytes())?;
                    writeln!(out, "wrote {}", p.display())?;
                }
                None => write!(out, "{}", alg.to_json())?,
            }
            Ok(0)
        }
    }
}

fn optimizer(opts: &TrainOpts) -> Result<Optimizer> {
    let lr = opts.lr.unwrap_or(match opts.optimizer {
        OptimizerKind::Adam => Optimizer::ADAM_LR,
        OptimizerKind::Sgd => SGD_LR,
    });
    if !(lr.is_finite() && lr > 0.0) {
        bail!("learning rate must be positive, got {lr}");
    }
    Ok(Optimizer::new(opts.optimizer, lr))
}

fn fit_config(epochs: u64, opts: &TrainOpts) -> FitConfig {
    FitConfig {
        batch_size: opts.batch_size.map(|b| b as usize),
        ..FitConfig::new(epochs as usize).with_seed(sub_seed(opts.seed, 2))
    }
}

/// Per-purpose seeds derived from the run seed.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub const XOR_WIDTH: usize = 4;

/// One-hot inputs and XOR targets.
pub fn xor_data() -> (Tensor, Tensor) {
    let mut x = vec![0.0; XOR_WIDTH * XOR_WIDTH];
    for i in 0..XOR_WIDTH {
        x[i * XOR_WIDTH + i] = 1.0;
    }
    (
        Tensor::new(&[4, XOR_WIDTH], x).expect("shape matches buffer"),
        Tensor::new(&[4, 1], vec![0.0, 1.0, 1.0, 0.0]).expect("shape matches buffer"),
    )
}

pub fn xor_model(alg: StructureConstants, seed: u64) -> Result<Sequential> {
    let mut model = Sequential::with_seed(seed);
    model
        .add(HyperDense::new(4, alg)?)
        .add(Activation::Tanh)
        .add(Dense::new(1)?)
        .add(Activation::Sigmoid);
    Ok(model)
}

#[derive(Debug)]
pub struct XorReport {
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    pub correct: usize,
    pub model: Sequential,
}

impl XorReport {
    pub fn exit_code(&self) -> u8 {
        if self.correct == self.targets.len() {
            0
        } else {
            1
        }
    }
}

pub fn train_xor(args: &TrainXorArgs, out: &mut dyn Write) -> Result<XorReport> {
    let alg = resolve_algebra(&args.algebra)?;
    let n = alg.dim();
    if !XOR_WIDTH.is_multiple_of(n) {
        bail!(
            "algebra {} has dimension {n}, which does not divide the input width {XOR_WIDTH}",
            alg.name().unwrap_or("unnamed")
        );
    }
    let opt = &args.train;
    let (x, y) = xor_data();
    let mut model = xor_model(alg, sub_seed(opt.seed, 1))?;
    model.build(&[XOR_WIDTH])?;
    let mut optimizer = optimizer(opt)?;
    let config = fit_config(args.epochs, opt);
    prepare_out_dir(&opt.out)?;
    let history = fit(&mut model, &x, &y, &mut optimizer, &config)?;
    let history_path = opt.out.join("history.csv");
    history.save_csv(&history_path)?;
    model.save(opt.out.join("model.json"))?;

    let predictions = model.predict(&x)?.to_vec();
    let targets = y.to_vec();
    let rounded: Vec<f64> = predictions
        .iter()
        .map(|&p| if p >= 0.5 { 1.0 } else { 0.0 })
        .collect();
    let correct = rounded.iter().zip(&targets).filter(|(r, t)| r == t).count();

    writeln!(out, "{}", model.summary()?)?;
    writeln!(
        out,
        "{:<14} {:>6} {:>12} {:>8}",
        "input", "target", "prediction", "rounded"
    )?;
    let xs = x.to_vec();
    for (i, row) in xs.chunks(XOR_WIDTH).enumerate() {
        let input: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(
            out,
            "{:<14} {:>6} {:>12.6} {:>8}",
            format!("[{}]", input.join(", ")),
            targets[i],
            predictions[i],
            rounded[i]
        )?;
    }
    let last = history.last().expect("at least one epoch");
    writeln!(
        out,
        "final loss {} accuracy {}",
        format_g(last.loss, 6),
        format_g(last.accuracy, 6)
    )?;
    writeln!(out, "correct: {correct}/{}", targets.len())?;
    writeln!(out, "wrote {}", history_path.display())?;
    Ok(XorReport {
        predictions,
        targets,
        correct,
        model,
    })
}

pub fn synth_model(alg: StructureConstants, filters: usize, seed: u64) -> Result<Sequential> {
    let mut model = Sequential::with_seed(seed);
    model
        .add(HyperConv::new(filters, &[3, 3], alg)?.with_activation(Activation::Tanh))
        .add(Layer::GlobalMaxPool)
        .add(Dense::new(1)?)
        .add(Activation::Sigmoid);
    Ok(model)
}

#[derive(Debug)]
pub struct SynthReport {
    pub history: hypernn::training::TrainHistory,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

pub fn train_synth(args: &TrainSynthArgs, out: &mut dyn Write) -> Result<SynthReport> {
    let alg = resolve_algebra(&args.algebra)?;
    if !synth::CHANNELS.is_multiple_of(alg.dim()) {
        bail!(
            "algebra dimension {} does not divide the {} image channels",
            alg.dim(),
            synth::CHANNELS
        );
    }
    let opt = &args.train;
    let data = synth::generate(&synth::SynthConfig {
        seed: sub_seed(opt.seed, 3),
        zero_unit: args.zero_unit,
        ..synth::SynthConfig::default()
    });
    let mut model = synth_model(alg, args.filters as usize, sub_seed(opt.seed, 1))?;
    model.build(&data.train.x.shape()[1..])?;
    writeln!(out, "{}", model.summary()?)?;

    let mut optimizer = optimizer(opt)?;
    let config =
        fit_config(args.epochs, opt).with_validation(data.val.x.clone(), data.val.y.clone());
    prepare_out_dir(&opt.out)?;
    let history = fit(
        &mut model,
        &data.train.x,
        &data.train.y,
        &mut optimizer,
        &config,
    )?;
    history.save_csv(opt.out.join("history.csv"))?;
    model.save(opt.out.join("model.json"))?;

    let (test_loss, test_accuracy) = evaluate(&mut model, &data.test.x, &data.test.y)?;
    let eval = format!(
        "test_loss,test_accuracy\n{},{}\n",
        format_g(test_loss, 9),
        format_g(test_accuracy, 9)
    );
    write_atomic(&opt.out.join("eval.csv"), eval.as_bytes())?;

    let last = history.last().expect("at least one epoch");
    writeln!(
        out,
        "epoch {}: loss {} accuracy {} val_loss {} val_accuracy {}",
        last.epoch,
        format_g(last.loss, 6),
        format_g(last.accuracy, 6),
        format_g(last.val_loss.unwrap_or(f64::NAN), 6),
        format_g(last.val_accuracy.unwrap_or(f64::NAN), 6)
    )?;
    writeln!(
        out,
        "test loss {} accuracy {}",
        format_g(test_loss, 6),
        format_g(test_accuracy, 6)
    )?;
    writeln!(out, "wrote {}", opt.out.display())?;
    Ok(SynthReport {
        history,
        test_loss,
        test_accuracy,
    })
}

#[derive(Debug, PartialEq)]
pub struct ParamCounts {
    pub hyper_weights: usize,
    pub real_weights: usize,
    pub bias: usize,
}

impl ParamCounts {
    /// Real weights per hyper weight; equals the algebra dimension.
    pub fn ratio(&self) -> f64 {
        self.real_weights as f64 / self.hyper_weights as f64
    }
}

pub fn param_counts(args: &ParamReportArgs) -> Result<(String, ParamCounts)> {
    let alg = resolve_algebra(&args.algebra)?;
    let mut rng = hypernn::layers::init_rng(0);
    let (label, hyper, real, bias) = match args.filters {
        Some(filters) => {
            let mut layer = HyperConv::new(filters, &args.kernel, alg)?;
            let mut input: Vec<usize> = args.kernel.clone();
            input.push(args.width);
            layer.build(&input, &mut rng)?;
            let bias = layer.bias().map_or(0, Tensor::numel);
            let kernel: Vec<String> = args.kernel.iter().map(usize::to_string).collect();
            (
                format!(
                    "conv {} x {filters} filters on {} channels",
                    kernel.join("x"),
                    args.width
                ),
                layer.weight_count(),
                layer.real_weight_count(),
                bias,
            )
        }
        None => {
            let units = args.units.unwrap_or(10);
            let mut layer = HyperDense::new(units, alg)?;
            layer.build(&[args.width], &mut rng)?;
            let bias = layer.bias().map_or(0, Tensor::numel);
            (
                format!("dense {units} units on width {}", args.width),
                layer.weight_count(),
                layer.real_weight_count(),
                bias,
            )
        }
    };
    Ok((
        label,
        ParamCounts {
            hyper_weights: hyper.expect("built layer"),
            real_weights: real.expect("built layer"),
            bias,
        },
    ))
}

fn param_report(args: &ParamReportArgs, out: &mut dyn Write) -> Result<()> {
    let alg = resolve_algebra(&args.algebra)?;
    let (label, c) = param_counts(args)?;
    writeln!(
        out,
        "algebra: {} (n = {})",
        alg.name().unwrap_or("unnamed"),
        alg.dim()
    )?;
    writeln!(out, "layer: {label}")?;
    writeln!(out, "{:<12} {:>14} {:>14}", "", "hypercomplex", "real")?;
    writeln!(
        out,
        "{:<12} {:>14} {:>14}",
        "weights", c.hyper_weights, c.real_weights
    )?;
    writeln!(out, "{:<12} {:>14} {:>14}", "bias", c.bias, c.bias)?;
    writeln!(
        out,
        "{:<12} {:>14} {:>14}",
        "total",
        c.hyper_weights + c.bias,
        c.real_weights + c.bias
    )?;
    writeln!(
        out,
        "weight ratio (real / hypercomplex): {}",
        format_g(c.ratio(), 9)
    )?;
    Ok(())
}
