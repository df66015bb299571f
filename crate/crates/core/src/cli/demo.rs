//! One-command reproduction: every workflow run in order against a fresh
//! data directory, ending with a live probe of the service.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use super::commands::{load_snapshot, write_capture};
use super::probe::request;
use super::{CliError, Ctx, Outcome};
use crate::api::adapters::http::serve;
use crate::api::adapters::NoReference;
use crate::api::core::ApiConfig;
use crate::api::store_web_adapter;
use crate::contract::validate_http_exchange;
use crate::domain::{Anomaly, AnomalyKind, Label, Verdict};
use crate::pipelines::batch::load_detector;
use crate::pipelines::eval::pooled_recall;
use crate::pipelines::train::CALIBRATE;
use crate::pipelines::{
    self, ml_false_positive_rate, precision, recall_by_kind, AugmentOps, BatchInput, Hyperparams, KindRecall, SynthParams,
    TrainOptions,
};
use crate::store::{DataDir, ModelKind, ModelRef, ScanFilter, StoreKind};

/// Creation time stamped on demo models so reruns are byte-identical.
pub const DEMO_EPOCH: i64 = 1_700_000_000;
/// Position jitter for the augmented training snapshot, about a metre.
pub const DEMO_JITTER_DEG: f64 = 1e-5;
pub const DEMO_CAPTURE: &str = "demo-session";

#[derive(Debug, Clone, Serialize)]
pub struct ModelMetrics {
    pub model_id: String,
    pub anomalies: usize,
    pub per_kind: Vec<KindRecall>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    /// ML only: detector firing rate on windows clear of anomalous labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_window_rate: Option<f64>,
}

fn stage<T, E: ToString>(name: &str, r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::at(name, e))
}

/// Recall and precision per model, from what the prediction and label
/// stores hold now.
fn store_metrics(dir: &DataDir, snapshot_id: &str) -> Result<Vec<ModelMetrics>, String> {
    let read = |kind| dir.open_read(kind).and_then(|h| h.scan(&ScanFilter::all())).map_err(|e| e.to_string());
    let anomalies: Vec<Anomaly> = read(StoreKind::Prediction)?.typed().map_err(|e| e.to_string())?;
    let labels: Vec<Label> = read(StoreKind::Label)?.typed().map_err(|e| e.to_string())?;
    let mut by_model: BTreeMap<String, Vec<Anomaly>> = BTreeMap::new();
    for a in anomalies {
        by_model.entry(a.model_id.clone()).or_default().push(a);
    }
    let snapshot = dir.data_store().read(snapshot_id).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (model_id, found) in by_model {
        let model: ModelRef = model_id.parse().map_err(|e: crate::store::StoreError| e.to_string())?;
        let (entry, detector) = load_detector(dir, &model).map_err(|e| e.to_string())?;
        let (kinds, fp) = match entry.manifest.kind {
            ModelKind::Rule => (AnomalyKind::RULE_KINDS.to_vec(), None),
            ModelKind::Ml => {
                let rate = ml_false_positive_rate(&detector, &snapshot.fixes, &snapshot.labels).map_err(|e| e.to_string())?;
                (vec![AnomalyKind::KinematicOutlier], Some(rate.rate()))
            }
        };
        let per_kind = recall_by_kind(&found, &labels, &kinds);
        out.push(ModelMetrics {
            model_id,
            anomalies: found.len(),
            recall: pooled_recall(&per_kind),
            precision: precision(&found, &labels),
            per_kind,
            fp_window_rate: fp,
        });
    }
    Ok(out)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("n/a".to_string(), |v| format!("{v:.4}"))
}

struct Probe {
    addr: SocketAddr,
    log: Vec<Value>,
    unexpected: Vec<String>,
}

impl Probe {
    fn call(&mut self, method: &str, target: &str, body: Option<&Value>, expect: u16) -> Result<Value, String> {
        let (status, value) = request(self.addr, method, target, None, body).map_err(|e| format!("{method} {target}: {e}"))?;
        self.log.push(json!({ "request": format!("{method} {target}"), "status": status }));
        if status != expect {
            self.unexpected.push(format!("{method} {target}: status {status}, expected {expect}"));
        }
        Ok(value)
    }
}

/// The scripted investigator session.
fn probe_session(p: &mut Probe, labels: &[Label]) -> Result<(), String> {
    p.call("GET", "/api/v1/health", None, 200)?;
    let page = p.call("GET", "/api/v1/geolocations?limit=200", None, 200)?;
    if let Some(cursor) = page["next_cursor"].as_str() {
        p.call("GET", &format!("/api/v1/geolocations?limit=200&cursor={cursor}"), None, 200)?;
    }
    let anomalies = p.call("GET", "/api/v1/anomalies?limit=50", None, 200)?;
    if let Some(id) = anomalies["items"].get(0).and_then(|a| a["anomaly_id"].as_str()) {
        p.call("GET", &format!("/api/v1/anomalies/{id}/explanation"), None, 200)?;
    }
    p.call("GET", "/api/v1/anomalies/no-such-anomaly/explanation", None, 404)?;

    let flagged = labels.iter().find(|l| l.verdict == Verdict::Anomalous).or(labels.first());
    if let Some(l) = flagged {
        let (from, to) = (l.window.start_ts - 1_800, l.window.end_ts + 1_800);
        p.call("GET", &format!("/api/v1/objects/{}", l.object_id), None, 200)?;
        p.call("GET", &format!("/api/v1/objects/{}/trajectory?from={from}&to={to}", l.object_id), None, 200)?;
        p.call("POST", "/api/v1/detect", Some(&json!({ "object_id": l.object_id, "from": from, "to": to })), 200)?;
        let label = json!({
            "object_id": l.object_id,
            "start_ts": from,
            "end_ts": from + 600,
            "verdict": "normal",
            "annotator": "investigator",
            "note": "reviewed in demo session",
        });
        p.call("POST", "/api/v1/labels", Some(&label), 201)?;
    }
    Ok(())
}

pub(crate) fn run(ctx: &mut Ctx, seed: u64, objects: usize, duration: i64) -> Result<Outcome, CliError> {
    if !ctx.dir.is_empty() {
        return Err(CliError::at(
            "preflight",
            format!("data dir {} is not empty; the demo needs a fresh one", ctx.dir.root().display()),
        ));
    }
    let dir = ctx.dir.clone();
    let lock = ctx.lock;
    let opts = TrainOptions { created_ts: Some(DEMO_EPOCH), lock, model_name: None };

    let generated = stage("generate", pipelines::synth_generate(&SynthParams::new(seed, objects, duration), &dir.data_store()))?;
    let snapshot = stage("generate", generated.manifest.clone().ok_or("generator wrote no snapshot"))?.snapshot_id;
    ctx.progress(&format!("generate\tsnapshot {snapshot}: {} fixes, {} labels", generated.fixes.len(), generated.labels.len()));

    let ops = AugmentOps { jitter_sigma_deg: DEMO_JITTER_DEG, resample_period_s: None };
    let augmented = stage("augment", pipelines::augment(&dir.data_store(), &snapshot, &ops, seed))?.snapshot_id;
    ctx.progress(&format!("augment\tsnapshot {augmented} (jitter {DEMO_JITTER_DEG} deg)"));

    let rule_hyper = Hyperparams::from([("max_speed_kn".to_string(), json!(CALIBRATE))]);
    let rule = stage("train-rule", pipelines::train_rule(&dir, &augmented, &rule_hyper, &opts))?;
    ctx.progress(&format!("train-rule\tregistered {}", rule.model_id));
    let ml = stage("train-ml", pipelines::train_ml(&dir, &augmented, &Hyperparams::new(), &opts))?;
    ctx.progress(&format!("train-ml\tregistered {}", ml.model_id));

    let mut batches = Vec::new();
    for model_id in [&rule.model_id, &ml.model_id] {
        let model = ModelRef { name: model_id.name.clone(), version: Some(model_id.version) };
        let report = stage("batch-predict", pipelines::batch_predict(&dir, &model, &BatchInput::Snapshot(snapshot.clone()), None, lock))?;
        ctx.progress(&format!("batch-predict\t{}: {} anomalies written", report.model_id, report.written));
        batches.push(report);
    }

    let (fixes, labels) = load_snapshot(&dir, lock, &snapshot, &generated.objects).map_err(|e| match e {
        CliError::Domain { message, .. } => CliError::at("ingest", message),
        other => other,
    })?;
    ctx.progress(&format!("ingest\t{fixes} fixes and {labels} labels loaded for serving"));

    let probe = stage("serve-and-probe", serve_and_probe(&dir, lock, &generated.labels))?;
    ctx.progress(&format!(
        "serve-and-probe\t{} requests, {} contract violations, capture {}",
        probe.requests, probe.violations, probe.capture
    ));
    if probe.violations > 0 || !probe.unexpected.is_empty() {
        return Err(CliError::at(
            "serve-and-probe",
            format!("{} violation(s); unexpected: {}", probe.violations, probe.unexpected.join("; ")),
        ));
    }

    let metrics = stage("metrics", store_metrics(&dir, &snapshot))?;
    let mut lines = vec![format!("metrics (seed {seed}, snapshot {snapshot})")];
    for m in &metrics {
        let mut line = format!(
            "{}\tanomalies={}\trecall={}\tprecision={}",
            m.model_id,
            m.anomalies,
            fmt_rate(m.recall),
            fmt_rate(m.precision)
        );
        if let Some(fp) = m.fp_window_rate {
            line.push_str(&format!("\tfp_window_rate={fp:.4}"));
        }
        lines.push(line);
        for k in &m.per_kind {
            lines.push(format!("  {}\t{}/{}", k.kind, k.recovered, k.labeled));
        }
    }
    Ok(Outcome::ok(
        lines,
        json!({
            "seed": seed,
            "snapshot_id": snapshot,
            "augmented_snapshot_id": augmented,
            "models": [rule.model_id.to_string(), ml.model_id.to_string()],
            "batch": batches,
            "probe": { "requests": probe.requests, "violations": probe.violations, "capture": probe.capture, "log": probe.log },
            "metrics": metrics,
        }),
    ))
}

struct ProbeReport {
    requests: usize,
    violations: usize,
    unexpected: Vec<String>,
    capture: String,
    log: Vec<Value>,
}

fn serve_and_probe(dir: &DataDir, lock: crate::store::LockOptions, labels: &[Label]) -> Result<ProbeReport, String> {
    let config = ApiConfig { data_dir: dir.root().to_path_buf(), ..ApiConfig::default() };
    let web = Arc::new(store_web_adapter(&config, lock, Arc::new(NoReference)).capturing());
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().map_err(|e| e.to_string())?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = rt.spawn(serve(listener, web.clone(), async {
        let _ = stopped.await;
    }));

    let mut p = Probe { addr, log: vec![], unexpected: vec![] };
    let session = probe_session(&mut p, labels);
    let _ = stop.send(());
    let served = rt.block_on(server);
    session?;
    served.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;

    let exchanges = web.captured();
    let violations: usize = exchanges.iter().map(|x| validate_http_exchange(web.contract(), &x.request, &x.response).len()).sum();
    let path = write_capture(dir, DEMO_CAPTURE, &exchanges).map_err(|e| match e {
        CliError::Domain { message, .. } | CliError::Usage(message) => message,
    })?;
    Ok(ProbeReport { requests: exchanges.len(), violations, unexpected: p.unexpected, capture: path.display().to_string(), log: p.log })
}
