//! The `og` command line: workflow triggers over one data directory.
//!
//! Exit codes: 0 success, 1 domain failure (including violations found),
//! 2 usage error. With `--json` the final stdout line is one JSON object.

mod commands;
mod demo;
pub mod probe;
pub mod report;
mod validate;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::store::{DataDir, LockOptions, DATA_DIR_ENV, DEFAULT_DATA_DIR};

pub use report::{aggregate, EndpointStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "og", version, about = "Maritime anomaly detection workflows")]
struct Cli {
    /// Installation root holding every store.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = DEFAULT_DATA_DIR)]
    data_dir: PathBuf,
    /// Machine output: one JSON object on the final line.
    #[arg(long, global = true)]
    json: bool,
    /// Remove writer locks older than the stale threshold before giving up.
    #[arg(long, global = true)]
    break_stale_lock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one ingestion cycle, or load a snapshot into the serving stores.
    Ingest(IngestArgs),
    /// Generate a seeded synthetic snapshot with injected anomalies.
    Generate(GenerateArgs),
    /// Derive a snapshot by jitter and/or resampling.
    Augment(AugmentArgs),
    /// Train (calibrate) the rule detector on a snapshot.
    TrainRule(TrainArgs),
    /// Fit the kinematic outlier model on a snapshot.
    TrainMl(TrainArgs),
    /// Run a registered model over a snapshot or the raw store.
    BatchPredict(BatchArgs),
    /// Serve the investigator API over HTTP until interrupted.
    Serve(ServeArgs),
    /// Check stores, registry entries, snapshots and captures against contracts.
    ValidateContracts(ValidateArgs),
    /// Per-endpoint request counts, errors and latency percentiles.
    TelemetryReport(ReportArgs),
    /// generate, augment, train, predict, serve and probe in a fresh data dir.
    #[command(name = "demo-end-to-end", alias = "demo_end_to_end")]
    DemoEndToEnd(DemoArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// JSON array of source configurations (or an object with `sources`).
    #[arg(long, required_unless_present = "snapshot", conflicts_with = "snapshot")]
    sources: Option<PathBuf>,
    /// Root for provider and crawler endpoints; defaults to the sources file's directory.
    #[arg(long, requires = "sources")]
    fixtures: Option<PathBuf>,
    /// Append a snapshot's fixes and labels to the raw and label stores.
    #[arg(long)]
    snapshot: Option<String>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    objects: usize,
    /// Seconds.
    #[arg(long, default_value_t = 86_400)]
    duration: i64,
    /// Injection rate per track, `kind=rate` (repeatable).
    #[arg(long = "rate", value_name = "KIND=RATE")]
    rates: Vec<String>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    snapshot: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian position jitter, degrees.
    #[arg(long, default_value_t = 0.0)]
    jitter_deg: f64,
    /// Resample each track to this period, seconds.
    #[arg(long)]
    resample_s: Option<i64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    snapshot: String,
    /// Hyperparameter `key=value`; values parse as JSON, else as strings.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Register under this name instead of the default.
    #[arg(long)]
    name: Option<String>,
    /// Fixed creation time for manifests and run records.
    #[arg(long, env = "SOURCE_DATE_EPOCH")]
    created_ts: Option<i64>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// `name[:version|latest]`.
    #[arg(long, default_value = "rule-detector")]
    model: String,
    #[arg(long, required_unless_present = "raw", conflicts_with = "raw")]
    snapshot: Option<String>,
    /// Predict over everything in the raw store.
    #[arg(long)]
    raw: bool,
    /// `minLat,minLon,maxLat,maxLon`.
    #[arg(long)]
    bbox: Option<String>,
    /// The bbox crosses the antimeridian.
    #[arg(long, requires = "bbox")]
    wrap: bool,
    #[arg(long)]
    from: Option<i64>,
    #[arg(long)]
    to: Option<i64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Explain {
    Full,
    Summary,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "OG_PORT", default_value_t = crate::api::core::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Bearer token required on every endpoint but health.
    #[arg(long, env = "OG_TOKEN")]
    token: Option<String>,
    /// Default model, `name[:version]`.
    #[arg(long, env = "OG_MODEL", default_value = crate::api::core::DEFAULT_MODEL)]
    model: String,
    /// Response cache lifetime; 0 disables the cache.
    #[arg(long, env = "OG_CACHE_TTL", default_value_t = 30)]
    cache_ttl: u64,
    #[arg(long, env = "OG_EXPLAIN", value_enum, default_value = "full")]
    explain: Explain,
    /// Fixture directory of provider records used as object reference data.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Record every exchange to `captures/<NAME>.jsonl` on shutdown.
    #[arg(long, value_name = "NAME")]
    capture: Option<String>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// `store:<kind>`, `registry`, `model:<name[:version]>`, `snapshot:<id>`,
    /// `snapshots`, `capture:<file>` or `captures` (repeatable; all by default).
    #[arg(long = "against", value_name = "TARGET")]
    targets: Vec<String>,
    /// Contract files to check against instead of the built-in set.
    #[arg(long)]
    contracts: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    from: Option<i64>,
    #[arg(long)]
    to: Option<i64>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    objects: usize,
    #[arg(long, default_value_t = 86_400)]
    duration: i64,
}

/// What a verb failed with.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain { stage: Option<String>, message: String },
}

impl CliError {
    pub fn domain(message: impl ToString) -> Self {
        CliError::Domain { stage: None, message: message.to_string() }
    }

    pub fn at(stage: &str, message: impl ToString) -> Self {
        CliError::Domain { stage: Some(stage.to_string()), message: message.to_string() }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain { .. } => EXIT_DOMAIN,
        }
    }
}

/// A finished verb: text lines, the JSON summary, and whether it found
/// problems (exit 1 without being an error, e.g. violations).
pub(crate) struct Outcome {
    lines: Vec<String>,
    json: Value,
    failed: bool,
}

impl Outcome {
    fn ok(lines: Vec<String>, json: Value) -> Self {
        Self { lines, json, failed: false }
    }
}

/// Shared by every verb.
pub(crate) struct Ctx<'a> {
    dir: DataDir,
    lock: LockOptions,
    json: bool,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    /// Intermediate output; suppressed in JSON mode.
    fn progress(&mut self, line: &str) {
        if !self.json {
            let _ = writeln!(self.out, "{line}");
        }
    }

    /// A JSON object line emitted before the final one.
    fn event(&mut self, value: &Value) {
        if self.json {
            let _ = writeln!(self.out, "{value}");
        }
    }
}

fn verb_list() -> String {
    Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect::<Vec<_>>().join(", ")
}

/// Parse `args` (program name first) and run the verb.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(err, "{e}");
                    let _ = writeln!(err, "verbs: {}", verb_list());
                    EXIT_USAGE
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let json_mode = cli.json;
    let mut ctx = Ctx {
        dir: DataDir::new(&cli.data_dir),
        lock: LockOptions { break_stale: cli.break_stale_lock },
        json: json_mode,
        out,
    };
    let result = dispatch(cli.command, &mut ctx);
    let out = ctx.out;
    match result {
        Ok(outcome) => {
            if json_mode {
                let mut body = outcome.json;
                if let Value::Object(map) = &mut body {
                    map.insert("ok".into(), json!(!outcome.failed));
                }
                let _ = writeln!(out, "{body}");
            } else {
                for line in &outcome.lines {
                    let _ = writeln!(out, "{line}");
                }
            }
            if outcome.failed {
                EXIT_DOMAIN
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            let (stage, message) = match &e {
                CliError::Usage(m) => (None, m.clone()),
                CliError::Domain { stage, message } => (stage.clone(), message.clone()),
            };
            match &stage {
                Some(s) => {
                    let _ = writeln!(err, "error: stage {s} failed: {message}");
                }
                None => {
                    let _ = writeln!(err, "error: {message}");
                }
            }
            if json_mode {
                let _ = writeln!(out, "{}", json!({"ok": false, "stage": stage, "error": message, "exit": e.exit_code()}));
            }
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    match command {
        Command::Ingest(a) => match (a.sources, a.snapshot) {
            (Some(sources), _) => commands::ingest_sources(ctx, &sources, a.fixtures.as_deref()),
            (None, Some(snapshot)) => commands::ingest_snapshot(ctx, &snapshot),
            (None, None) => Err(CliError::Usage("ingest needs --sources or --snapshot".into())),
        },
        Command::Generate(a) => commands::generate(ctx, a.seed, a.objects, a.duration, &a.rates),
        Command::Augment(a) => commands::augment(ctx, &a.snapshot, a.seed, a.jitter_deg, a.resample_s),
        Command::TrainRule(a) => commands::train(ctx, commands::Trainer::Rule, &a.snapshot, &a.params, a.name, a.created_ts),
        Command::TrainMl(a) => commands::train(ctx, commands::Trainer::Ml, &a.snapshot, &a.params, a.name, a.created_ts),
        Command::BatchPredict(a) => {
            let aoi = commands::parse_aoi(a.bbox.as_deref(), a.wrap, a.from, a.to)?;
            commands::batch(ctx, &a.model, a.snapshot, a.raw, aoi)
        }
        Command::Serve(a) => {
            let verbosity = match a.explain {
                Explain::Full => crate::api::core::Verbosity::Full,
                Explain::Summary => crate::api::core::Verbosity::Summary,
            };
            let settings = commands::ServeSettings {
                port: a.port,
                bind: a.bind,
                token: a.token,
                model: a.model,
                cache_ttl_s: a.cache_ttl,
                verbosity,
                reference: a.reference,
                capture: a.capture,
            };
            commands::serve(ctx, settings)
        }
        Command::ValidateContracts(a) => validate::run(ctx, &a.targets, a.contracts.as_deref()),
        Command::TelemetryReport(a) => report::run(ctx, a.from, a.to),
        Command::DemoEndToEnd(a) => demo::run(ctx, a.seed, a.objects, a.duration),
    }
}
