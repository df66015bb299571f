use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{CliError, Ctx, Outcome};
use crate::contract::{
    builtin, validate_http_exchange, validate_model_dir, validate_records, ContractSet, Exchange, Violation, ViolationKind,
    MANIFEST_FILE,
};
use crate::store::{DataDir, ModelRef, ScanFilter, StoreError, StoreKind};

#[derive(Debug, Clone, PartialEq)]
enum Target {
    Store(StoreKind),
    Registry,
    Model(ModelRef),
    Snapshot(String),
    Snapshots,
    Capture(PathBuf),
    Captures,
}

impl Target {
    fn label(&self) -> String {
        match self {
            Target::Store(k) => format!("store:{k}"),
            Target::Registry => "registry".into(),
            Target::Model(r) => format!("model:{r}"),
            Target::Snapshot(id) => format!("snapshot:{id}"),
            Target::Snapshots => "snapshots".into(),
            Target::Capture(p) => format!("capture:{}", p.display()),
            Target::Captures => "captures".into(),
        }
    }
}

fn parse_target(dir: &DataDir, raw: &str) -> Result<Target, CliError> {
    let bad = || CliError::Usage(format!("unknown validation target `{raw}`"));
    let (head, rest) = match raw.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (raw, None),
    };
    Ok(match (head, rest) {
        ("registry", None) => Target::Registry,
        ("snapshots", None) => Target::Snapshots,
        ("captures", None) => Target::Captures,
        ("store", Some(kind)) => match StoreKind::parse(kind).ok_or_else(bad)? {
            StoreKind::Registry => Target::Registry,
            StoreKind::Data => Target::Snapshots,
            k => Target::Store(k),
        },
        ("model", Some(r)) => Target::Model(r.parse().map_err(|e: StoreError| CliError::Usage(e.to_string()))?),
        ("snapshot", Some(id)) if !id.is_empty() => Target::Snapshot(id.to_string()),
        ("capture", Some(file)) if !file.is_empty() => {
            let direct = PathBuf::from(file);
            let named = dir.captures_dir().join(file);
            Target::Capture(if direct.is_file() || !named.is_file() { direct } else { named })
        }
        _ => return Err(bad()),
    })
}

fn default_targets() -> Vec<Target> {
    let mut out: Vec<Target> = StoreKind::ALL.iter().filter(|k| k.file_name().is_some()).map(|&k| Target::Store(k)).collect();
    out.extend([Target::Registry, Target::Snapshots, Target::Captures]);
    out
}

fn protocol(contract: &str, location: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation::new(contract, location, ViolationKind::Protocol, message)
}

/// `(items checked, violations)` for one target.
fn check(dir: &DataDir, set: &ContractSet, target: &Target) -> Result<(usize, Vec<Violation>), CliError> {
    let def = |e: crate::contract::ContractError| CliError::domain(e);
    match target {
        Target::Store(kind) => {
            let name = kind.contract().map(|c| c.name).ok_or_else(|| CliError::domain(format!("{kind} has no data contract")))?;
            let contract = set.data(&name).map_err(def)?;
            let scan = dir.open_read(*kind).and_then(|h| h.scan(&ScanFilter::all())).map_err(CliError::domain)?;
            let (corrupt, truncated) = (scan.corrupt_lines, scan.truncated_tail);
            let records: Vec<Value> = scan.collect();
            let mut v = validate_records(contract, &records).map_err(def)?;
            let reference = contract.reference();
            if corrupt > 0 {
                v.push(protocol(&reference, "lines", format!("{corrupt} line(s) are not JSON objects")));
            }
            if truncated {
                v.push(protocol(&reference, "tail", "final line has no terminating newline (skipped)"));
            }
            Ok((records.len(), v))
        }
        Target::Registry => {
            let registry = dir.registry();
            let mut checked = 0;
            let mut out = Vec::new();
            for name in registry.names().map_err(CliError::domain)? {
                let versions = registry.versions(&name).map_err(CliError::domain)?;
                let expected: Vec<u32> = (1..=versions.len() as u32).collect();
                if versions != expected {
                    out.push(protocol("registry", &name, format!("versions {versions:?} are not gapless from 1")));
                }
                for v in versions {
                    checked += 1;
                    let entry_dir = registry.root().join(&name).join(v.to_string());
                    out.extend(check_model_dir(set, &entry_dir, &name)?.into_iter().map(|x| x.prefixed(&format!("{name}:{v}"))));
                }
            }
            Ok((checked, out))
        }
        Target::Model(r) => {
            let registry = dir.registry();
            let versions = registry.versions(&r.name).map_err(CliError::domain)?;
            let version = match r.version {
                Some(v) if versions.contains(&v) => v,
                None if !versions.is_empty() => *versions.last().unwrap_or(&0),
                _ => return Err(CliError::domain(format!("model {r} not found"))),
            };
            let entry_dir = registry.root().join(&r.name).join(version.to_string());
            Ok((1, check_model_dir(set, &entry_dir, &r.name)?))
        }
        Target::Snapshot(id) => check_snapshot(dir, set, id).map(|v| (1, v)),
        Target::Snapshots => {
            let ids = dir.data_store().list().map_err(CliError::domain)?;
            let mut out = Vec::new();
            for id in &ids {
                out.extend(check_snapshot(dir, set, id)?.into_iter().map(|v| v.prefixed(id)));
            }
            Ok((ids.len(), out))
        }
        Target::Capture(path) => check_capture(set, path),
        Target::Captures => {
            let mut files: Vec<PathBuf> = match fs::read_dir(dir.captures_dir()) {
                Ok(entries) => entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                    .collect(),
                Err(_) => vec![],
            };
            files.sort();
            let mut checked = 0;
            let mut out = Vec::new();
            for f in &files {
                let (n, v) = check_capture(set, f)?;
                checked += n;
                let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                out.extend(v.into_iter().map(|x| x.prefixed(&name)));
            }
            Ok((checked, out))
        }
    }
}

/// The manifest names the contract it was written against; fall back to
/// the model name when the manifest cannot say.
fn check_model_dir(set: &ContractSet, entry_dir: &Path, name: &str) -> Result<Vec<Violation>, CliError> {
    let declared = fs::read(entry_dir.join(MANIFEST_FILE))
        .ok()
        .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
        .and_then(|m| m.get("contract").and_then(|c| c.get("name")).and_then(Value::as_str).map(str::to_string));
    let contract_name = match declared {
        Some(n) if set.model(&n).is_ok() => n,
        _ if name.starts_with("ml") => builtin::ML_MODEL.to_string(),
        _ => builtin::RULE_MODEL.to_string(),
    };
    let contract = set.model(&contract_name).map_err(CliError::domain)?;
    validate_model_dir(contract, entry_dir).map_err(CliError::domain)
}

fn check_snapshot(dir: &DataDir, set: &ContractSet, id: &str) -> Result<Vec<Violation>, CliError> {
    let fix_contract = set.data(builtin::SNAPSHOT_FIX).map_err(CliError::domain)?;
    let label_contract = set.data(builtin::LABEL).map_err(CliError::domain)?;
    match dir.data_store().read(id) {
        Ok(snapshot) => {
            let fixes: Vec<Value> = snapshot.fixes.iter().map(serde_json::to_value).collect::<Result<_, _>>().map_err(CliError::domain)?;
            let labels: Vec<Value> = snapshot.labels.iter().map(serde_json::to_value).collect::<Result<_, _>>().map_err(CliError::domain)?;
            let mut out: Vec<Violation> = validate_records(fix_contract, &fixes).map_err(CliError::domain)?;
            out.extend(validate_records(label_contract, &labels).map_err(CliError::domain)?.into_iter().map(|v| v.prefixed("labels")));
            Ok(out)
        }
        Err(StoreError::NotFound(what)) => Err(CliError::domain(format!("snapshot not found: {what}"))),
        Err(e) => Ok(vec![protocol(&fix_contract.reference(), "", e.to_string())]),
    }
}

fn check_capture(set: &ContractSet, path: &Path) -> Result<(usize, Vec<Violation>), CliError> {
    let contract = set.code(builtin::API_SERVICE).map_err(CliError::domain)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))?;
    let mut checked = 0;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        checked += 1;
        let location = format!("exchange[{i}]");
        match serde_json::from_str::<Exchange>(line) {
            Ok(x) => out.extend(
                validate_http_exchange(contract, &x.request, &x.response).into_iter().map(|v| v.prefixed(&location)),
            ),
            Err(e) => out.push(protocol(&contract.reference(), location, format!("not an exchange: {e}"))),
        }
    }
    Ok((checked, out))
}

pub(crate) fn run(ctx: &mut Ctx, raw_targets: &[String], contracts: Option<&Path>) -> Result<Outcome, CliError> {
    let set = match contracts {
        Some(d) => ContractSet::load_dir(d).map_err(CliError::domain)?,
        None => ContractSet::builtin(),
    };
    let targets = if raw_targets.is_empty() {
        default_targets()
    } else {
        raw_targets.iter().map(|t| parse_target(&ctx.dir, t)).collect::<Result<Vec<_>, _>>()?
    };
    let mut lines = Vec::new();
    let mut reports = Vec::new();
    let mut total = 0;
    for target in &targets {
        let label = target.label();
        let (checked, violations) = check(&ctx.dir, &set, target)?;
        let violations: Vec<Violation> = violations.into_iter().map(|v| v.prefixed(&label)).collect();
        lines.extend(violations.iter().map(Violation::to_line));
        lines.push(format!("{label}\tchecked {checked}\t{} violation(s)", violations.len()));
        total += violations.len();
        reports.push(json!({ "target": label, "checked": checked, "violations": violations }));
    }
    lines.push(if total == 0 { "ok: zero violations".to_string() } else { format!("FAILED: {total} violation(s)") });
    Ok(Outcome { lines, json: json!({ "targets": reports, "violations": total }), failed: total > 0 })
}
