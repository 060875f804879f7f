//! The `emoreg` command line: `cv`, `strategies`, `sweep`, `ttest`,
//! `validate` and `embed-info`.
//!
//! Settings resolve as flag, then `--config` file entry (`key = value`),
//! then built-in default. Exit codes: 0 success, 2 configuration error,
//! 3 invalid data, 4 failure while running.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fmt::{self, Display};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::data::{parse_tsv, read_tsv_file, validate, AnnotationSchema, Dataset};
use crate::embeddings::{self, EmbeddingFormat, EmbeddingTable};
use crate::error::Error;
use crate::eval::{
    default_sweep_grid, fmt_sig, one_sample_t_test, plan_repeated_cv, run_repeated_cv, training_size_sweep, Cell,
    EvalReport, Regressor,
};
use crate::eval::report::CELLS_HEADER;
use crate::models::{Hyperparams, ModelKind};
use crate::pipeline::{dataset_vocabulary, ModelRegressor, PipelineConfig};
use crate::text::DEFAULT_MAX_LEN;
use crate::training::{Strategy, TrainConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(m: impl Display) -> Self {
        Self { code: EXIT_CONFIG, message: m.to_string() }
    }

    fn data(m: impl Display) -> Self {
        Self { code: EXIT_DATA, message: m.to_string() }
    }

    fn runtime(m: impl Display) -> Self {
        Self { code: EXIT_RUNTIME, message: m.to_string() }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse and format problems in input files are data errors, the rest are
/// runtime failures.
fn input_error(e: Error) -> CliError {
    match e {
        Error::Parse { .. } | Error::OutOfRange { .. } => CliError::data(e),
        _ => CliError::runtime(e),
    }
}

#[derive(Debug, Parser)]
#[command(name = "emoreg", version, about = "Emotion regression experiments: cross-validation, strategy ablation, training-size sweeps")]
pub struct Cli {
    /// Upper bound on parallel training runs (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated k-fold cross-validation of one or more model kinds.
    Cv(CvArgs),
    /// Frozen, tuned and learned embeddings compared under one plan.
    Strategies(StrategiesArgs),
    /// Performance against the number of training examples.
    Sweep(SweepArgs),
    /// One-sample t-test of per-repetition means against a reference value.
    Ttest(TtestArgs),
    /// Check a dataset against its schema.
    Validate(ValidateArgs),
    /// Summarize an embedding file.
    EmbedInfo(EmbedInfoArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset TSV (`text` column then one column per variable).
    #[arg(long)]
    pub data: Option<String>,
    /// Schema preset (vad, be4, be5, be6, vad+be5, se07, anpst, mas,
    /// wassa:<emotion>) or `name=lo..hi,...`.
    #[arg(long)]
    pub schema: Option<String>,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    #[arg(long)]
    pub embeddings: Option<String>,
    /// word2vec (binary) or fasttext (text); inferred from a `.bin`
    /// extension otherwise.
    #[arg(long)]
    pub format: Option<String>,
    /// Load only vectors for tokens that occur in the dataset.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub vocab_filter: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Set every layer width to this value (smoke runs).
    #[arg(long)]
    pub units: Option<usize>,
    /// One network per variable instead of one multi-output network.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub per_variable: Option<bool>,
    /// Directory receiving one `epoch,loss` CSV per training run.
    #[arg(long)]
    pub trace: Option<String>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated model kinds.
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Aggregate CSV; cells and repetition means go next to it.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct StrategiesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub strategies: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// Comma-separated training sizes.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    /// A `.reps.csv` or `.cells.csv` written by `cv` or `strategies`.
    #[arg(long)]
    pub results: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu0: Option<f64>,
    /// Which model's rows to test when the file holds several.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct EmbedInfoArgs {
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    /// Report how many dataset tokens the table covers.
    #[command(flatten)]
    pub data: DataArgs,
}

/// Merges flags, config-file entries and defaults, remembering every
/// resolved value for the CSV header.
struct Resolver {
    file: HashMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    fn load(path: Option<&str>) -> CliResult<Self> {
        let mut file = HashMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| CliError::config(format!("config file {p}: {e}")))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::config(format!("{p}:{}: expected `key = value`", i + 1)))?;
                file.insert(k.trim().replace('_', "-"), v.trim().to_string());
            }
        }
        Ok(Self { file, resolved: Vec::new() })
    }

    fn lookup<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::config(format!("config key `{key}` = `{v}`: {e}"))),
            None => Ok(None),
        }
    }

    fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?;
        if let Some(v) = &v {
            self.resolved.push((key.to_string(), v.to_string()));
        }
        Ok(v)
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<T>
    where
        T::Err: Display,
    {
        self.opt(key, flag)?
            .ok_or_else(|| CliError::config(format!("missing required --{key}")))
    }

    fn header(&self, command: &str) -> String {
        let mut s = format!("# emoreg {} {command}", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.resolved {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push('\n');
        s
    }

    fn warn_unused(&self) {
        let mut used: HashSet<&str> = self.resolved.iter().map(|(k, _)| k.as_str()).collect();
        used.insert("jobs");
        let mut unused: Vec<&String> = self.file.keys().filter(|k| !used.contains(k.as_str())).collect();
        unused.sort();
        for k in unused {
            log::warn!("config key `{k}` is not used by this command");
        }
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>>
where
    T::Err: Display,
{
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|e| CliError::config(format!("{what}: {e}"))))
        .collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::config(format!("{what}: empty list")));
    }
    Ok(items)
}

fn existing_file(path: &str, what: &str) -> CliResult<PathBuf> {
    let p = PathBuf::from(path);
    if !p.is_file() {
        return Err(CliError::config(format!("{what} file not found: {path}")));
    }
    Ok(p)
}

struct Inputs {
    dataset: Dataset,
    table: Option<EmbeddingTable>,
}

fn load_data(r: &mut Resolver, args: &DataArgs) -> CliResult<Dataset> {
    let path = r.require("data", args.data.clone())?;
    let schema_text = r.require("schema", args.schema.clone())?;
    let schema: AnnotationSchema = schema_text.parse().map_err(CliError::config)?;
    let path = existing_file(&path, "data")?;
    crate::data::load_dataset(&path, &schema).map_err(input_error)
}

fn embedding_format(r: &mut Resolver, args: &EmbeddingArgs, path: &str) -> CliResult<EmbeddingFormat> {
    let inferred = if Path::new(path).extension().is_some_and(|e| e == "bin") {
        EmbeddingFormat::Word2VecBin
    } else {
        EmbeddingFormat::FastTextText
    };
    let fmt = r.get("format", args.format.clone(), inferred.to_string())?;
    fmt.parse().map_err(CliError::config)
}

fn load_table(r: &mut Resolver, args: &EmbeddingArgs, dataset: Option<&Dataset>, needed: bool) -> CliResult<Option<EmbeddingTable>> {
    let path = r.opt("embeddings", args.embeddings.clone())?;
    let Some(path) = path else {
        return if needed {
            Err(CliError::config("missing required --embeddings"))
        } else {
            Ok(None)
        };
    };
    let format = embedding_format(r, args, &path)?;
    let filter_on = r.get("vocab-filter", args.vocab_filter, true)?;
    let file = existing_file(&path, "embeddings")?;
    let vocab = dataset.filter(|_| filter_on).map(dataset_vocabulary);
    let table = embeddings::load(&file, format, vocab.as_ref()).map_err(input_error)?;
    log::info!("loaded {} vectors of dim {} from {path}", table.vocab_len(), table.dim());
    Ok(Some(table))
}

fn pipeline_config(r: &mut Resolver, args: &TrainArgs, strategy: Strategy) -> CliResult<PipelineConfig> {
    let d = TrainConfig::default();
    let train = TrainConfig {
        epochs: r.get("epochs", args.epochs, d.epochs)?,
        batch_size: r.get("batch-size", args.batch_size, d.batch_size)?,
        learning_rate: r.get("lr", args.lr, d.learning_rate)?,
        strategy,
        ..d
    };
    train.validate().map_err(CliError::config)?;
    let max_len = r.get("max-len", args.max_len, DEFAULT_MAX_LEN)?;
    let hyper = match r.opt("units", args.units)? {
        Some(0) => return Err(CliError::config("--units must be at least 1")),
        Some(u) => Hyperparams::uniform_width(u),
        None => Hyperparams::default(),
    };
    Ok(PipelineConfig {
        max_len,
        train,
        hyper,
        per_variable: r.get("per-variable", args.per_variable, false)?,
        trace_dir: r.opt("trace", args.trace.clone())?.map(PathBuf::from),
        ..PipelineConfig::default()
    })
}

fn model_list(r: &mut Resolver, flag: Option<String>, default: &[ModelKind]) -> CliResult<Vec<ModelKind>> {
    let default = default.iter().map(|k| k.name()).collect::<Vec<_>>().join(",");
    let s = r.get("models", flag, default)?;
    let kinds: Vec<ModelKind> = parse_list(&s, "--models")?;
    let mut seen = HashSet::new();
    if let Some(dup) = kinds.iter().find(|k| !seen.insert(**k)) {
        return Err(CliError::config(format!("--models lists {dup} twice")));
    }
    Ok(kinds)
}

fn write_out(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// `<stem>.<suffix>.csv` next to the main output.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_report_files(out: &Path, header: &str, reports: &[EvalReport]) -> CliResult<()> {
    let mut cells = format!("{header}{CELLS_HEADER}\n");
    let mut reps = format!("{header}model,repetition,mean_r\n");
    for rep in reports {
        cells.push_str(&rep.cells_csv_rows());
        for (i, m) in rep.repetition_means() {
            reps.push_str(&format!("{},{i},{}\n", rep.model, fmt_sig(m)));
        }
    }
    write_out(&sibling(out, "cells"), &cells)?;
    write_out(&sibling(out, "reps"), &reps)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        Some(0) => Err(CliError::config("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(CliError::runtime)?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn prepare(r: &mut Resolver, data: &DataArgs, emb: &EmbeddingArgs, kinds: &[ModelKind]) -> CliResult<Inputs> {
    let dataset = load_data(r, data)?;
    let needed = kinds.iter().any(|&k| k != ModelKind::RidgeNgram);
    let table = load_table(r, emb, Some(&dataset), needed)?;
    Ok(Inputs { dataset, table })
}

fn cmd_cv(r: &mut Resolver, a: &CvArgs, jobs: Option<usize>) -> CliResult<()> {
    let kinds = model_list(r, a.models.clone(), &ModelKind::ALL)?;
    let out = PathBuf::from(r.require("out", a.out.clone())?);
    let strategy: Strategy = r.get("strategy", a.strategy.clone(), "frozen".into())?.parse().map_err(CliError::config)?;
    let folds = r.get("folds", a.folds, 10)?;
    let reps = r.get("reps", a.reps, 10)?;
    let seed = r.get("seed", a.train.seed, 0)?;
    let config = pipeline_config(r, &a.train, strategy)?;
    let inputs = prepare(r, &a.data, &a.emb, &kinds)?;
    let header = r.header("cv");
    r.warn_unused();

    let plan = plan_repeated_cv(inputs.dataset.len(), folds, reps, seed).map_err(CliError::config)?;
    let regs: Vec<ModelRegressor> = kinds
        .iter()
        .map(|&k| ModelRegressor::new(k, inputs.table.as_ref(), config.clone()))
        .collect::<Result<_, _>>()
        .map_err(CliError::config)?;
    let dyn_regs: Vec<&dyn Regressor> = regs.iter().map(|m| m as &dyn Regressor).collect();
    let reports = with_pool(jobs, || run_repeated_cv(&plan, &dyn_regs, &inputs.dataset))?.map_err(CliError::runtime)?;

    let hash = plan.split_hash();
    let mut body = format!("{header}model,variable,mean_r,degenerate_cells,split_hash\n");
    for rep in &reports {
        let means = rep.per_variable_means();
        let degenerate = rep.degenerate_counts();
        for (v, name) in rep.variables.iter().enumerate() {
            body.push_str(&format!("{},{name},{},{},{hash}\n", rep.model, fmt_sig(means[v]), degenerate[v]));
        }
        let total: usize = degenerate.iter().sum();
        body.push_str(&format!("{},mean,{},{total},{hash}\n", rep.model, fmt_sig(rep.grand_mean())));
    }
    write_out(&out, &body)?;
    write_report_files(&out, &header, &reports)?;
    for rep in &reports {
        println!("{}\t{}", rep.model, fmt_sig(rep.grand_mean()));
    }
    Ok(())
}

fn cmd_strategies(r: &mut Resolver, a: &StrategiesArgs, jobs: Option<usize>) -> CliResult<()> {
    let kinds = model_list(r, a.models.clone(), &ModelKind::NEURAL)?;
    if let Some(k) = kinds.iter().find(|k| !k.is_neural()) {
        return Err(CliError::config(format!(
            "{k} has no embedding layer; strategies apply to neural models only"
        )));
    }
    let default = Strategy::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(",");
    let strategies: Vec<Strategy> = parse_list(&r.get("strategies", a.strategies.clone(), default)?, "--strategies")?;
    let out = PathBuf::from(r.require("out", a.out.clone())?);
    let folds = r.get("folds", a.folds, 10)?;
    let reps = r.get("reps", a.reps, 10)?;
    let seed = r.get("seed", a.train.seed, 0)?;
    let base = pipeline_config(r, &a.train, Strategy::Frozen)?;
    let inputs = prepare(r, &a.data, &a.emb, &kinds)?;
    let header = r.header("strategies");
    r.warn_unused();

    let plan = plan_repeated_cv(inputs.dataset.len(), folds, reps, seed).map_err(CliError::config)?;
    let mut regs = Vec::new();
    for &s in &strategies {
        for &k in &kinds {
            let mut cfg = base.clone();
            cfg.train.strategy = s;
            let reg = ModelRegressor::new(k, inputs.table.as_ref(), cfg).map_err(CliError::config)?;
            regs.push(reg.with_label(format!("{k}/{s}")));
        }
    }
    let dyn_regs: Vec<&dyn Regressor> = regs.iter().map(|m| m as &dyn Regressor).collect();
    let reports = with_pool(jobs, || run_repeated_cv(&plan, &dyn_regs, &inputs.dataset))?.map_err(CliError::runtime)?;

    let mut body = header.clone();
    body.push_str("strategy");
    for k in &kinds {
        body.push_str(&format!(",{k}"));
    }
    body.push_str(",mean\n");
    for (s, row) in strategies.iter().zip(reports.chunks(kinds.len())) {
        let means: Vec<f64> = row.iter().map(EvalReport::grand_mean).collect();
        body.push_str(s.name());
        for m in &means {
            body.push_str(&format!(",{}", fmt_sig(*m)));
        }
        body.push_str(&format!(",{}\n", fmt_sig(means.iter().sum::<f64>() / means.len() as f64)));
    }
    write_out(&out, &body)?;
    write_report_files(&out, &header, &reports)?;
    print!("{}", body.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    Ok(())
}

fn cmd_sweep(r: &mut Resolver, a: &SweepArgs, jobs: Option<usize>) -> CliResult<()> {
    let kinds = model_list(r, a.models.clone(), &ModelKind::ALL)?;
    let out = PathBuf::from(r.require("out", a.out.clone())?);
    let strategy: Strategy = r.get("strategy", a.strategy.clone(), "frozen".into())?.parse().map_err(CliError::config)?;
    let grid: Vec<usize> = match r.opt("grid", a.grid.clone())? {
        Some(g) => parse_list(&g, "--grid")?,
        None => default_sweep_grid(),
    };
    let reps = r.get("reps", a.reps, 100)?;
    let seed = r.get("seed", a.train.seed, 0)?;
    let config = pipeline_config(r, &a.train, strategy)?;
    let inputs = prepare(r, &a.data, &a.emb, &kinds)?;
    let header = r.header("sweep");
    r.warn_unused();

    let n = inputs.dataset.len();
    if let Some(bad) = grid.iter().find(|&&g| g == 0 || g >= n) {
        return Err(CliError::config(format!(
            "training size {bad} must lie in 1..{n} for a dataset of {n} examples"
        )));
    }
    if reps == 0 {
        return Err(CliError::config("--reps must be at least 1"));
    }
    let regs: Vec<ModelRegressor> = kinds
        .iter()
        .map(|&k| ModelRegressor::new(k, inputs.table.as_ref(), config.clone()))
        .collect::<Result<_, _>>()
        .map_err(CliError::config)?;
    let dyn_regs: Vec<&dyn Regressor> = regs.iter().map(|m| m as &dyn Regressor).collect();
    let points = with_pool(jobs, || training_size_sweep(&inputs.dataset, &grid, reps, seed, &dyn_regs))?
        .map_err(CliError::runtime)?;

    let mut body = format!("{header}model,n,mean_r,reps,degenerate_cells\n");
    for p in &points {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            p.model,
            p.n_train,
            fmt_sig(p.mean_r),
            p.reps,
            p.degenerate_cells
        ));
    }
    write_out(&out, &body)?;
    print!("{}", body.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    Ok(())
}

/// Per-model repetition means from a `.reps.csv` or a `.cells.csv`.
fn read_repetition_means(text: &str) -> CliResult<BTreeMap<String, Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::config("results file is empty"))?
        .split(',')
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let bad = |l: &str| CliError::data(format!("malformed results row `{l}`"));
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    match (col("model"), col("repetition"), col("mean_r"), col("fold"), col("variable"), col("r")) {
        (Some(m), Some(_), Some(v), ..) => {
            for l in lines {
                let f: Vec<&str> = l.split(',').collect();
                let value: f64 = f.get(v).and_then(|x| x.parse().ok()).ok_or_else(|| bad(l))?;
                out.entry(f.get(m).ok_or_else(|| bad(l))?.to_string()).or_default().push(value);
            }
        }
        (Some(m), Some(rep), None, Some(fold), Some(var), Some(rc)) => {
            let mut per_model: BTreeMap<String, (Vec<String>, Vec<Cell>)> = BTreeMap::new();
            for l in lines {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != header.len() {
                    return Err(bad(l));
                }
                let entry = per_model.entry(f[m].to_string()).or_default();
                let vi = match entry.0.iter().position(|x| x == f[var]) {
                    Some(i) => i,
                    None => {
                        entry.0.push(f[var].to_string());
                        entry.0.len() - 1
                    }
                };
                entry.1.push(Cell {
                    repetition: f[rep].parse().map_err(|_| bad(l))?,
                    fold: f[fold].parse().map_err(|_| bad(l))?,
                    variable: vi,
                    r: f[rc].parse().map_err(|_| bad(l))?,
                    degenerate: false,
                });
            }
            for (model, (vars, cells)) in per_model {
                let report = EvalReport::new(model.clone(), vars, cells);
                out.insert(model, report.repetition_means().into_iter().map(|(_, m)| m).collect());
            }
        }
        _ => {
            return Err(CliError::config(
                "results file has no per-repetition values (expected a .reps.csv or .cells.csv)",
            ))
        }
    }
    Ok(out)
}

fn cmd_ttest(r: &mut Resolver, a: &TtestArgs) -> CliResult<()> {
    let path = r.require("results", a.results.clone())?;
    let mu0 = r
        .opt("mu0", a.mu0)?
        .ok_or_else(|| CliError::config("missing required --mu0\n\nusage: emoreg ttest --results <CSV> --mu0 <VALUE> [--model <NAME>]"))?;
    let wanted = r.opt("model", a.model.clone())?;
    let file = existing_file(&path, "results")?;
    let text = fs::read_to_string(&file).map_err(|e| CliError::runtime(format!("{path}: {e}")))?;
    let by_model = read_repetition_means(&text)?;
    let (model, samples) = match wanted {
        Some(m) => {
            let s = by_model
                .get(&m)
                .ok_or_else(|| CliError::config(format!("model `{m}` not in {path}")))?;
            (m, s.clone())
        }
        None if by_model.len() == 1 => by_model.into_iter().next().expect("one entry"),
        None => {
            let names: Vec<&String> = by_model.keys().collect();
            return Err(CliError::config(format!("{path} holds several models {names:?}; pick one with --model")));
        }
    };
    if samples.len() < 2 {
        return Err(CliError::config(format!(
            "t-test needs at least 2 repetitions, {path} has {} for {model}",
            samples.len()
        )));
    }
    let (t, df, p) = if samples.iter().all(|&x| x == mu0) {
        (0.0, samples.len() - 1, 1.0)
    } else {
        let res = one_sample_t_test(&samples, mu0).map_err(CliError::runtime)?;
        (res.t, res.df, res.p)
    };
    let line = format!("# ttest model={model} mu0={} n={} t={} df={df} p={}", fmt_sig(mu0), samples.len(), fmt_sig(t), fmt_sig(p));
    println!("{}", line.trim_start_matches("# "));
    let mut f = fs::OpenOptions::new()
        .append(true)
        .open(&file)
        .map_err(|e| CliError::runtime(format!("{path}: {e}")))?;
    let sep = if text.ends_with('\n') || text.is_empty() { "" } else { "\n" };
    writeln!(f, "{sep}{line}").map_err(|e| CliError::runtime(format!("{path}: {e}")))?;
    Ok(())
}

fn cmd_validate(r: &mut Resolver, a: &ValidateArgs) -> CliResult<()> {
    let path = r.require("data", a.data.data.clone())?;
    let schema: AnnotationSchema = r.require::<String>("schema", a.data.schema.clone())?.parse().map_err(CliError::config)?;
    let file = existing_file(&path, "data")?;
    let src = read_tsv_file(&file).map_err(input_error)?;
    let ds = parse_tsv(&src, &schema, &path).map_err(input_error)?;
    let violations = validate(&ds);
    for v in &violations {
        println!("{v}");
    }
    if violations.is_empty() {
        println!("ok: {} records, {} variables", ds.len(), ds.n_targets());
        Ok(())
    } else {
        Err(CliError::data(format!("{path}: {} violation(s)", violations.len())))
    }
}

fn cmd_embed_info(r: &mut Resolver, a: &EmbedInfoArgs) -> CliResult<()> {
    let dataset = match &a.data.data {
        Some(_) => Some(load_data(r, &a.data)?),
        None => None,
    };
    let table = load_table(r, &a.emb, dataset.as_ref(), true)?.expect("required");
    println!("source\t{}", table.source());
    println!("dim\t{}", table.dim());
    println!("vocab\t{}", table.vocab_len());
    let norms: Vec<f64> = (1..table.n_rows())
        .map(|i| table.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if !norms.is_empty() {
        println!("mean_norm\t{}", fmt_sig(norms.iter().sum::<f64>() / norms.len() as f64));
    }
    if let Some(ds) = dataset {
        let vocab = dataset_vocabulary(&ds);
        let covered = vocab.iter().filter(|t| table.id(t).is_some()).count();
        println!("dataset_types\t{}", vocab.len());
        println!("covered_types\t{covered}");
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut r = Resolver::load(cli.config.as_deref())?;
    let jobs = r.lookup("jobs", cli.jobs)?;
    match &cli.command {
        Command::Cv(a) => cmd_cv(&mut r, a, jobs),
        Command::Strategies(a) => cmd_strategies(&mut r, a, jobs),
        Command::Sweep(a) => cmd_sweep(&mut r, a, jobs),
        Command::Ttest(a) => cmd_ttest(&mut r, a),
        Command::Validate(a) => cmd_validate(&mut r, a),
        Command::EmbedInfo(a) => cmd_embed_info(&mut r, a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
