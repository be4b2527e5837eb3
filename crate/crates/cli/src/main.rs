//! `badacost` command-line tool: train, predict, eval and calibrate.

mod cost;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use badacost::booster::TrainParams;
use badacost::cascade::{self, CalibrationMode};
use badacost::data_io;
use badacost::eval::{self, CostSource, CvConfig, CvReport};
use badacost::{CostMatrix, Dataset, Ensemble, Error, Label};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cost::CostSpec;

#[derive(Parser)]
#[command(name = "badacost", version, about = "Multi-class cost-sensitive boosting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Predict labels and detection scores for every row of a CSV file.
    Predict(PredictArgs),
    /// Stratified cross-validation report.
    Eval(EvalArgs),
    /// Set cascade thresholds from a file of positive samples.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    label_col: String,
}

#[derive(Args)]
struct BoostArgs {
    /// file:PATH | zero-one[:SCALE] | samme | detection:BETA | circular:FP,FN,VIEW | imbalance-auto
    #[arg(long)]
    cost: CostSpec,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 1.0)]
    shrinkage: f64,
    #[arg(long, default_value_t = 1.0)]
    feature_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl BoostArgs {
    fn params(&self) -> Result<TrainParams, CliError> {
        let p = TrainParams {
            rounds: self.rounds,
            depth_limit: self.depth,
            shrinkage: self.shrinkage,
            feature_fraction: self.feature_fraction,
            seed: self.seed,
            ..TrainParams::default()
        };
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    boost: BoostArgs,
    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,
    /// Per-round training report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Input CSV. A column named by --label-col is ignored if present.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long)]
    model: PathBuf,
    /// Stop early using the model's calibrated thresholds.
    #[arg(long)]
    pruned: bool,
    /// Background label for the detection score (defaults to the calibrated one, else 1).
    #[arg(long)]
    background: Option<usize>,
    /// Prediction CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-member partial scores of every row.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Samme,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    boost: BoostArgs,
    /// Matrix the predictions are scored with. Defaults to --cost, or zero-one
    /// with imbalance-auto.
    #[arg(long)]
    eval_cost: Option<CostSpec>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Also cross-validate a baseline with the same folds and settings.
    #[arg(long, value_enum)]
    compare: Option<Baseline>,
    /// Multiplier applied to reported costs.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Report CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    PerStage,
    Single,
}

impl From<Mode> for CalibrationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::PerStage => CalibrationMode::PerStage,
            Mode::Single => CalibrationMode::Single,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV of positive samples; rows with the background label are skipped.
    #[arg(long)]
    positives: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, value_enum, default_value = "per-stage")]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    background: usize,
    /// Output model; the input model is rewritten if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                Error::DimensionMismatch { .. }
                | Error::InvalidArgument(_)
                | Error::InvalidCostMatrix(_)
                | Error::LabelOutOfRange { .. }
                | Error::ClassTooSmall { .. }
                | Error::Parse { .. }
                | Error::EmptyData => 2,
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} file not found: {}", path.display())))
    }
}

fn load_data(args: &DataArgs) -> CliResult<Dataset> {
    require_file(&args.data, "data")?;
    let (data, warnings) = data_io::load_csv(&args.data, &args.label_col, None)?;
    for w in &warnings {
        log::warn!("{}: {w}", args.data.display());
    }
    Ok(data)
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn training_cost(spec: &CostSpec, data: &Dataset, params: &TrainParams) -> CliResult<CostMatrix> {
    match spec.matrix(data.k())? {
        Some(c) => Ok(c),
        None => Ok(eval::auto_imbalance_matrix(data, params)?),
    }
}

fn label_arg(value: usize, k: usize) -> CliResult<Label> {
    match Label::new(value) {
        Some(l) if value <= k => Ok(l),
        _ => Err(CliError::Usage(format!("background label {value} is outside 1..={k}"))),
    }
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let params = args.boost.params()?;
    let data = load_data(&args.data)?;
    let cost = training_cost(&args.boost.cost, &data, &params)?;
    let (ensemble, report) = badacost::train(&data, &cost, &params)?;
    data_io::save_model(&ensemble, None, &args.model)?;
    if let Some(out) = &args.out {
        report.write_csv(out)?;
    }
    eprintln!(
        "trained {} members on {} samples ({:?})",
        ensemble.len(),
        data.n(),
        report.stop
    );
    Ok(())
}

fn check_columns(features: &badacost::FeatureTable, e: &Ensemble, path: &Path) -> CliResult<()> {
    if features.d() != e.n_features() {
        return Err(CliError::Usage(format!(
            "{}: {} feature columns ({}), but the model expects {}",
            path.display(),
            features.d(),
            features.names().join(","),
            e.n_features()
        )));
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    require_file(&args.model, "model")?;
    require_file(&args.data, "data")?;
    let saved = data_io::load_model(&args.model)?;
    let e = &saved.ensemble;
    let features = data_io::load_features(&args.data, Some(&args.label_col))?;
    check_columns(&features, e, &args.data)?;

    let thresholds = if args.pruned {
        let t = saved.thresholds.as_ref().ok_or_else(|| {
            CliError::Usage(format!(
                "{} has no cascade thresholds; run calibrate first",
                args.model.display()
            ))
        })?;
        Some(match args.background {
            Some(b) if label_arg(b, e.k())? != t.background() => {
                return Err(CliError::Usage(format!(
                    "--background {b} differs from the calibrated background {}",
                    t.background().get()
                )))
            }
            _ => t.clone(),
        })
    } else {
        None
    };
    let background = match (args.background, &saved.thresholds) {
        (Some(b), _) => label_arg(b, e.k())?,
        (None, Some(t)) => t.background(),
        (None, None) => cascade::DEFAULT_BACKGROUND,
    };

    let mut out = String::from("row,label,score,members_evaluated\n");
    for (i, x) in features.rows().enumerate() {
        let (label, score, used) = match &thresholds {
            Some(t) => {
                let p = cascade::predict_pruned(e, t, x)?;
                (p.label, p.score, p.members_evaluated)
            }
            None => (e.predict(x)?, cascade::detection_score(e, x, background)?, e.len()),
        };
        let _ = writeln!(out, "{},{},{},{}", i + 1, label.get(), score, used);
    }
    write_output(args.out.as_deref(), &out)?;

    if let Some(path) = &args.trace {
        let mut trace = String::from("row,member,score\n");
        for (i, x) in features.rows().enumerate() {
            for (m, s) in cascade::score_trace(e, x, background)?.scores.iter().enumerate() {
                let _ = writeln!(trace, "{},{},{}", i + 1, m + 1, s);
            }
        }
        std::fs::write(path, trace)?;
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let params = args.boost.params()?;
    if args.folds < 2 {
        return Err(CliError::Usage(format!("--folds must be at least 2, got {}", args.folds)));
    }
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(CliError::Usage(format!("--scale must be positive, got {}", args.scale)));
    }
    let data = load_data(&args.data)?;
    let k = data.k();
    let train_cost = args.boost.cost.matrix(k)?;
    let eval_cost = match &args.eval_cost {
        Some(CostSpec::ImbalanceAuto) => {
            return Err(CliError::Usage("--eval-cost needs a fixed matrix".into()))
        }
        Some(spec) => spec.matrix(k)?.expect("fixed cost spec"),
        None => match &train_cost {
            Some(c) => c.clone(),
            None => CostMatrix::zero_one(k, 1.0)?,
        },
    };
    let source = match train_cost {
        Some(c) => CostSource::Matrix(c),
        None => CostSource::AutoImbalance,
    };
    let run = |cost: CostSource| -> CliResult<CvReport> {
        let cfg = CvConfig {
            folds: args.folds,
            cost,
            eval_cost: eval_cost.clone(),
            train: params.clone(),
        };
        Ok(eval::cross_validate(&data, &cfg)?)
    };

    let main = run(source)?;
    let mut reports: Vec<(&str, &CvReport)> = vec![("badacost", &main)];
    let baseline;
    if args.compare == Some(Baseline::Samme) {
        baseline = run(CostSource::Matrix(CostMatrix::samme(k)?))?;
        reports.push(("samme", &baseline));
    }
    write_output(args.out.as_deref(), &eval::cv_csv(&reports, args.scale))?;
    eprint!("{}", eval::cv_summary(&reports, args.scale));
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<()> {
    require_file(&args.model, "model")?;
    require_file(&args.positives, "positives")?;
    let saved = data_io::load_model(&args.model)?;
    let e = &saved.ensemble;
    let background = label_arg(args.background, e.k())?;
    let (positives, _) = data_io::load_csv(&args.positives, &args.label_col, Some(e.k()))?;
    check_columns(positives.features(), e, &args.positives)?;
    let cal = cascade::calibrate(e, &positives, args.mode.into(), background)?;
    let out = args.out.as_ref().unwrap_or(&args.model);
    data_io::save_model(e, Some(&cal.thresholds), out)?;
    eprintln!(
        "calibrated on {} positives ({} excluded)",
        cal.retained, cal.excluded
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
