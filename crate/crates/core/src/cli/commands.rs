use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{CliError, Ctx, Outcome};
use crate::api::adapters::http::serve_blocking;
use crate::api::adapters::{NoReference, ProviderReference};
use crate::api::core::{ApiConfig, ReferenceDataPort, Verbosity};
use crate::api::store_web_adapter;
use crate::contract::Exchange;
use crate::domain::{AnomalyKind, AreaOfInterest, MarineObject};
use crate::ingestion::{run_ingestion_cycle, FixtureFetcher, SourceConfig, SourceKind, StoreTarget};
use crate::pipelines::{self, AugmentOps, BatchInput, Hyperparams, SynthParams, TrainOptions};
use crate::store::{DataDir, LockOptions, MetadataRecord, ModelRef, StoreKind};

#[derive(Deserialize)]
#[serde(untagged)]
enum SourcesFile {
    List(Vec<SourceConfig>),
    Wrapped { sources: Vec<SourceConfig> },
}

pub(crate) fn ingest_sources(ctx: &mut Ctx, path: &Path, fixtures: Option<&Path>) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))?;
    let configs = match serde_json::from_str::<SourcesFile>(&text) {
        Ok(SourcesFile::List(c)) | Ok(SourcesFile::Wrapped { sources: c }) => c,
        Err(e) => return Err(CliError::domain(format!("{}: {e}", path.display()))),
    };
    let root = match fixtures {
        Some(f) => f.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut target = StoreTarget::open(&ctx.dir, ctx.lock).map_err(CliError::domain)?;
    let report = run_ingestion_cycle(&configs, &FixtureFetcher::new(root), &mut target);
    drop(target);

    let mut lines = Vec::new();
    for s in &report.sources {
        let mut line = format!(
            "{}\tfetched={} appended={} dropped={} failed={} labels={}/{}",
            s.source_id,
            s.fetched,
            s.appended,
            s.dropped,
            s.failed,
            s.labels_appended,
            s.labels_appended + s.labels_dropped
        );
        if let Some(e) = &s.error {
            line.push_str(&format!(" error={e}"));
        }
        lines.push(line);
    }
    lines.push(format!(
        "ingested {} fix(es) from {} source(s); {} dropped, {} source(s) failed",
        report.appended(),
        report.sources.len(),
        report.dropped(),
        report.failed_sources()
    ));
    let failed = report.failed_sources() > 0;
    Ok(Outcome { lines, json: json!({ "report": report }), failed })
}

/// Append a snapshot (and optional object metadata) to the stores the
/// service reads from. Returns `(fixes, labels)` appended.
pub(crate) fn load_snapshot(
    dir: &DataDir,
    lock: LockOptions,
    snapshot_id: &str,
    objects: &[MarineObject],
) -> Result<(usize, usize), CliError> {
    let snapshot = dir.data_store().read(snapshot_id).map_err(CliError::domain)?;
    let fixes = dir.open_append(StoreKind::Raw, lock).and_then(|mut h| h.append(&snapshot.fixes)).map_err(CliError::domain)?;
    let labels = dir.open_append(StoreKind::Label, lock).and_then(|mut h| h.append(&snapshot.labels)).map_err(CliError::domain)?;
    if !objects.is_empty() {
        let records: Vec<_> = objects.iter().cloned().map(MetadataRecord::Object).collect();
        dir.open_append(StoreKind::Metadata, lock).and_then(|mut h| h.append(&records)).map_err(CliError::domain)?;
    }
    Ok((fixes, labels))
}

pub(crate) fn ingest_snapshot(ctx: &mut Ctx, snapshot_id: &str) -> Result<Outcome, CliError> {
    let (fixes, labels) = load_snapshot(&ctx.dir, ctx.lock, snapshot_id, &[])?;
    Ok(Outcome::ok(
        vec![format!("loaded snapshot {snapshot_id}: {fixes} fix(es) to raw, {labels} label(s) to label")],
        json!({ "snapshot_id": snapshot_id, "fixes": fixes, "labels": labels }),
    ))
}

fn split_pair<'a>(raw: &'a str, what: &str) -> Result<(&'a str, &'a str), CliError> {
    raw.split_once('=').ok_or_else(|| CliError::Usage(format!("{what} must look like key=value, got `{raw}`")))
}

pub(crate) fn generate(ctx: &mut Ctx, seed: u64, objects: usize, duration: i64, rates: &[String]) -> Result<Outcome, CliError> {
    let mut params = SynthParams::new(seed, objects, duration);
    for raw in rates {
        let (kind, rate) = split_pair(raw, "--rate")?;
        let kind: AnomalyKind = kind.parse().map_err(|e: crate::domain::DomainError| CliError::Usage(e.to_string()))?;
        let rate: f64 = rate.parse().map_err(|_| CliError::Usage(format!("bad rate `{rate}`")))?;
        params.rates.set(kind, rate);
    }
    let out = pipelines::synth_generate(&params, &ctx.dir.data_store()).map_err(CliError::domain)?;
    let manifest = out.manifest.ok_or_else(|| CliError::domain("generator wrote no snapshot"))?;
    Ok(Outcome::ok(
        vec![
            format!("snapshot {}", manifest.snapshot_id),
            format!("{} fix(es), {} label(s), {} object(s)", manifest.record_count, manifest.label_count, out.objects.len()),
        ],
        json!({ "snapshot_id": manifest.snapshot_id, "manifest": manifest }),
    ))
}

pub(crate) fn augment(ctx: &mut Ctx, snapshot: &str, seed: u64, jitter_deg: f64, resample_s: Option<i64>) -> Result<Outcome, CliError> {
    let ops = AugmentOps { jitter_sigma_deg: jitter_deg, resample_period_s: resample_s };
    let manifest = pipelines::augment(&ctx.dir.data_store(), snapshot, &ops, seed).map_err(CliError::domain)?;
    Ok(Outcome::ok(
        vec![
            format!("snapshot {}", manifest.snapshot_id),
            format!("{} fix(es) derived from {snapshot}", manifest.record_count),
        ],
        json!({ "snapshot_id": manifest.snapshot_id, "manifest": manifest }),
    ))
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Trainer {
    Rule,
    Ml,
}

pub(crate) fn parse_params(raw: &[String]) -> Result<Hyperparams, CliError> {
    let mut out = Hyperparams::new();
    for p in raw {
        let (k, v) = split_pair(p, "--param")?;
        let value = serde_json::from_str::<Value>(v).unwrap_or_else(|_| Value::String(v.to_string()));
        out.insert(k.to_string(), value);
    }
    Ok(out)
}

pub(crate) fn train(
    ctx: &mut Ctx,
    trainer: Trainer,
    snapshot: &str,
    params: &[String],
    name: Option<String>,
    created_ts: Option<i64>,
) -> Result<Outcome, CliError> {
    let hyper = parse_params(params)?;
    let opts = TrainOptions { created_ts, lock: ctx.lock, model_name: name };
    let outcome = match trainer {
        Trainer::Rule => pipelines::train_rule(&ctx.dir, snapshot, &hyper, &opts),
        Trainer::Ml => pipelines::train_ml(&ctx.dir, snapshot, &hyper, &opts),
    }
    .map_err(CliError::domain)?;
    let mut lines = vec![format!("registered {}", outcome.model_id)];
    for (k, v) in &outcome.run.metrics {
        lines.push(format!("{k}\t{v}"));
    }
    Ok(Outcome::ok(
        lines,
        json!({ "model_id": outcome.model_id.to_string(), "run": outcome.run, "manifest": outcome.manifest }),
    ))
}

pub(crate) fn parse_aoi(bbox: Option<&str>, wrap: bool, from: Option<i64>, to: Option<i64>) -> Result<Option<AreaOfInterest>, CliError> {
    if bbox.is_none() && from.is_none() && to.is_none() {
        return Ok(None);
    }
    let mut aoi = match bbox {
        Some(b) => {
            let parts: Vec<f64> = b
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("--bbox must be four numbers, got `{b}`")))?;
            let [min_lat, min_lon, max_lat, max_lon] = parts[..] else {
                return Err(CliError::Usage(format!("--bbox must be four numbers, got `{b}`")));
            };
            AreaOfInterest::bbox(min_lat, min_lon, max_lat, max_lon)
        }
        None => AreaOfInterest::global(),
    };
    aoi.wraps_antimeridian = wrap;
    let aoi = aoi.with_time(from, to);
    aoi.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Some(aoi))
}

pub(crate) fn batch(
    ctx: &mut Ctx,
    model: &str,
    snapshot: Option<String>,
    raw: bool,
    aoi: Option<AreaOfInterest>,
) -> Result<Outcome, CliError> {
    let model: ModelRef = model.parse().map_err(|e: crate::store::StoreError| CliError::Usage(e.to_string()))?;
    let input = match (snapshot, raw) {
        (Some(id), _) => BatchInput::Snapshot(id),
        (None, true) => BatchInput::Raw,
        (None, false) => return Err(CliError::Usage("batch-predict needs --snapshot or --raw".into())),
    };
    let report = pipelines::batch_predict(&ctx.dir, &model, &input, aoi.as_ref(), ctx.lock).map_err(CliError::domain)?;
    Ok(Outcome::ok(
        vec![format!(
            "{}: {} fix(es) over {} object(s), {} anomaly(ies) detected, {} written",
            report.model_id, report.fixes, report.objects, report.detected, report.written
        )],
        json!({ "report": report }),
    ))
}

pub(crate) struct ServeSettings {
    pub port: u16,
    pub bind: String,
    pub token: Option<String>,
    pub model: String,
    pub cache_ttl_s: u64,
    pub verbosity: Verbosity,
    pub reference: Option<PathBuf>,
    pub capture: Option<String>,
}

pub(crate) fn reference_port(fixtures: Option<&Path>) -> Arc<dyn ReferenceDataPort> {
    match fixtures {
        Some(root) => Arc::new(ProviderReference::new(
            FixtureFetcher::new(root),
            SourceConfig::new("reference", SourceKind::Crawler),
        )),
        None => Arc::new(NoReference),
    }
}

pub(crate) fn capture_name_ok(name: &str) -> bool {
    !name.is_empty() && !name.starts_with('.') && !name.contains(['/', '\\'])
}

/// Write exchanges as JSON lines under the captures directory.
pub(crate) fn write_capture(dir: &DataDir, name: &str, exchanges: &[Exchange]) -> Result<PathBuf, CliError> {
    let captures = dir.captures_dir();
    fs::create_dir_all(&captures).map_err(CliError::domain)?;
    let path = captures.join(format!("{name}.jsonl"));
    let mut bytes = Vec::new();
    for x in exchanges {
        serde_json::to_writer(&mut bytes, x).map_err(CliError::domain)?;
        bytes.push(b'\n');
    }
    let mut file = fs::File::create(&path).map_err(CliError::domain)?;
    file.write_all(&bytes).map_err(CliError::domain)?;
    Ok(path)
}

pub(crate) fn serve(ctx: &mut Ctx, s: ServeSettings) -> Result<Outcome, CliError> {
    if let Some(name) = &s.capture {
        if !capture_name_ok(name) {
            return Err(CliError::Usage(format!("--capture takes a plain name, got `{name}`")));
        }
    }
    let config = ApiConfig {
        port: s.port,
        data_dir: ctx.dir.root().to_path_buf(),
        default_model: Some(s.model.clone()),
        cache_ttl_s: s.cache_ttl_s,
        token: s.token.filter(|t| !t.is_empty()),
        verbosity: s.verbosity,
    };
    config.validate().map_err(CliError::Usage)?;
    let addr: SocketAddr = format!("{}:{}", s.bind, s.port)
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot bind `{}:{}`", s.bind, s.port)))?;
    let mut web = store_web_adapter(&config, ctx.lock, reference_port(s.reference.as_deref()));
    if s.capture.is_some() {
        web = web.capturing();
    }
    let web = Arc::new(web);
    serve_blocking(addr, web.clone(), |bound| {
        ctx.progress(&format!("listening on http://{bound} (model {}, Ctrl-C to stop)", s.model));
        ctx.event(&json!({ "event": "listening", "addr": bound.to_string() }));
        let _ = ctx.out.flush();
    })
    .map_err(|e| CliError::domain(format!("{addr}: {e}")))?;

    let exchanges = web.captured();
    let mut lines = vec![format!("stopped after {} captured exchange(s)", exchanges.len())];
    let mut capture_path = None;
    if let Some(name) = &s.capture {
        let path = write_capture(&ctx.dir, name, &exchanges)?;
        lines.push(format!("capture written to {}", path.display()));
        capture_path = Some(path.display().to_string());
    }
    Ok(Outcome::ok(lines, json!({ "stopped": true, "captured": exchanges.len(), "capture": capture_path })))
}
