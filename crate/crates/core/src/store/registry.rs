use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::lock::{LockOptions, WriterLock};
use super::snapshot::write_synced;
use super::StoreError;
use crate::contract::checksum::fnv1a64_hex;
use crate::contract::{validate_model_dir, FeatureSpec, ModelContract, ModelFileFormat, MANIFEST_FILE, PARAMS_FILE};

/// `name:version`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelId {
    pub name: String,
    pub version: u32,
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.version)
    }
}

impl FromStr for ModelId {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match ModelRef::from_str(s)? {
            ModelRef { name, version: Some(version) } => Ok(ModelId { name, version }),
            _ => Err(StoreError::Invalid(format!("model id `{s}` lacks a version"))),
        }
    }
}

/// `name[:version]`; no version means latest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRef {
    pub name: String,
    pub version: Option<u32>,
}

impl ModelRef {
    pub fn latest(name: &str) -> Self {
        Self { name: name.to_string(), version: None }
    }
}

impl FromStr for ModelRef {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, version) = match s.split_once(':') {
            Some((n, "latest")) => (n, None),
            Some((n, v)) => {
                let v: u32 = v.parse().map_err(|_| StoreError::Invalid(format!("bad model version in `{s}`")))?;
                (n, Some(v))
            }
            None => (s, None),
        };
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(StoreError::Invalid(format!("bad model name in `{s}`")));
        }
        Ok(Self { name: name.to_string(), version })
    }
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.version {
            Some(v) => write!(f, "{}:{v}", self.name),
            None => write!(f, "{}:latest", self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rule,
    Ml,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractRef {
    pub name: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: ModelFileFormat,
    pub name: String,
    pub version: u32,
    pub kind: ModelKind,
    pub contract: ContractRef,
    pub features: Vec<FeatureSpec>,
    pub hyperparameters: BTreeMap<String, Value>,
    pub params_checksum: String,
    pub training_run_id: String,
    pub data_snapshot_id: String,
    pub created_ts: i64,
}

impl ModelManifest {
    /// Draft manifest for a model about to be registered; version and
    /// checksum are assigned by the registry.
    pub fn draft(
        name: &str,
        kind: ModelKind,
        contract: &ModelContract,
        hyperparameters: BTreeMap<String, Value>,
        training_run_id: &str,
        data_snapshot_id: &str,
        created_ts: i64,
    ) -> Self {
        Self {
            format: contract.file_format,
            name: name.to_string(),
            version: 0,
            kind,
            contract: ContractRef { name: contract.name.clone(), version: contract.version },
            features: contract.input_features.clone(),
            hyperparameters,
            params_checksum: String::new(),
            training_run_id: training_run_id.to_string(),
            data_snapshot_id: data_snapshot_id.to_string(),
            created_ts,
        }
    }

    pub fn model_id(&self) -> ModelId {
        ModelId { name: self.name.clone(), version: self.version }
    }
}

#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub model_id: ModelId,
    pub dir: PathBuf,
    pub manifest: ModelManifest,
    pub params: Vec<u8>,
}

impl ModelEntry {
    pub fn params_json<T: serde::de::DeserializeOwned>(&self) -> Result<T, StoreError> {
        Ok(serde_json::from_slice(&self.params)?)
    }
}

/// The Model Registry: `<root>/<name>/<version>/{manifest.json, params.json}`.
#[derive(Debug, Clone)]
pub struct Registry {
    root: PathBuf,
}

/// A registration written to a staging directory and not yet visible.
/// Committing verifies it; dropping without commit discards it.
#[derive(Debug)]
pub struct StagedModel {
    staging: PathBuf,
    target: PathBuf,
    manifest: ModelManifest,
    contract: ModelContract,
    committed: bool,
    _lock: WriterLock,
}

impl StagedModel {
    pub fn params_path(&self) -> PathBuf {
        self.staging.join(PARAMS_FILE)
    }

    pub fn model_id(&self) -> ModelId {
        self.manifest.model_id()
    }

    /// Re-read the staged files and move them into place only if the
    /// parameter checksum and model contract still hold.
    pub fn commit(mut self) -> Result<ModelId, StoreError> {
        let outcome = (|| {
            let params = fs::read(self.params_path())?;
            if fnv1a64_hex(&params) != self.manifest.params_checksum {
                return Err(StoreError::Integrity(format!(
                    "{}: params.json changed before verification",
                    self.manifest.model_id()
                )));
            }
            let violations = validate_model_dir(&self.contract, &self.staging)?;
            if !violations.is_empty() {
                return Err(StoreError::Contract(violations));
            }
            fs::rename(&self.staging, &self.target)?;
            Ok(())
        })();
        match outcome {
            Ok(()) => {
                self.committed = true;
                Ok(self.manifest.model_id())
            }
            Err(e) => Err(e),
        }
    }
}

impl Drop for StagedModel {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

impl Registry {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn names(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    /// Committed versions of `name`, ascending.
    pub fn versions(&self, name: &str) -> Result<Vec<u32>, StoreError> {
        let mut out = Vec::new();
        let entries = match fs::read_dir(self.root.join(name)) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            if let Ok(v) = entry?.file_name().to_string_lossy().parse::<u32>() {
                out.push(v);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Write a new version to staging under the registry lock. The
    /// version is the previous maximum plus one.
    pub fn stage(
        &self,
        mut manifest: ModelManifest,
        params: &[u8],
        contract: &ModelContract,
    ) -> Result<StagedModel, StoreError> {
        ModelRef::from_str(&manifest.name)?;
        if manifest.training_run_id.is_empty() || manifest.data_snapshot_id.is_empty() {
            return Err(StoreError::Invalid("model lineage requires training_run_id and data_snapshot_id".into()));
        }
        let dir = self.root.join(&manifest.name);
        fs::create_dir_all(&dir)?;
        let lock = WriterLock::acquire(&dir, LockOptions::default())?;
        let version = self.versions(&manifest.name)?.last().copied().unwrap_or(0) + 1;
        manifest.version = version;
        manifest.params_checksum = fnv1a64_hex(params);

        let staging = dir.join(format!(".staging-{version}"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        let staged = StagedModel {
            target: dir.join(version.to_string()),
            staging,
            manifest,
            contract: contract.clone(),
            committed: false,
            _lock: lock,
        };
        write_synced(&staged.params_path(), params)?;
        let mut m = serde_json::to_vec_pretty(&staged.manifest)?;
        m.push(b'\n');
        write_synced(&staged.staging.join(MANIFEST_FILE), &m)?;
        Ok(staged)
    }

    pub fn register(&self, manifest: ModelManifest, params: &[u8], contract: &ModelContract) -> Result<ModelId, StoreError> {
        self.stage(manifest, params, contract)?.commit()
    }

    /// Exact version, or the highest one when `version` is `None`. The
    /// parameter checksum is re-verified on every load.
    pub fn resolve(&self, name: &str, version: Option<u32>) -> Result<ModelEntry, StoreError> {
        let versions = self.versions(name)?;
        let version = match version {
            Some(v) if versions.contains(&v) => v,
            Some(v) => return Err(StoreError::NotFound(format!("model {name}:{v}"))),
            None => *versions.last().ok_or_else(|| StoreError::NotFound(format!("model {name}")))?,
        };
        let dir = self.root.join(name).join(version.to_string());
        let manifest: ModelManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        let params = fs::read(dir.join(PARAMS_FILE))?;
        if fnv1a64_hex(&params) != manifest.params_checksum {
            return Err(StoreError::Integrity(format!("model {name}:{version} params checksum mismatch")));
        }
        if manifest.name != name || manifest.version != version {
            return Err(StoreError::Integrity(format!(
                "registry entry {name}/{version} holds manifest for {}",
                manifest.model_id()
            )));
        }
        Ok(ModelEntry { model_id: manifest.model_id(), dir, manifest, params })
    }

    pub fn resolve_ref(&self, r: &ModelRef) -> Result<ModelEntry, StoreError> {
        self.resolve(&r.name, r.version)
    }

    /// Every committed entry, by name then version.
    pub fn entries(&self) -> Result<Vec<ModelEntry>, StoreError> {
        let mut out = Vec::new();
        for name in self.names()? {
            for v in self.versions(&name)? {
                out.push(self.resolve(&name, Some(v))?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::builtin;

    fn draft(name: &str) -> ModelManifest {
        let contract = builtin::ml_model();
        ModelManifest::draft(name, ModelKind::Ml, &contract, contract.hyperparameters.clone(), "run-1", "synth-abc", 5)
    }

    #[test]
    fn versions_are_monotonic_and_latest_resolves() {
        let tmp = tempfile::tempdir().unwrap();
        let reg = Registry::new(tmp.path());
        let c = builtin::ml_model();
        for i in 1..=3 {
            let id = reg.register(draft("ml-detector"), format!("{{\"i\":{i}}}").as_bytes(), &c).unwrap();
            assert_eq!(id.version, i);
        }
        assert_eq!(reg.versions("ml-detector").unwrap(), vec![1, 2, 3]);
        assert_eq!(reg.resolve("ml-detector", None).unwrap().model_id.version, 3);
        let two = reg.resolve("ml-detector", Some(2)).unwrap();
        assert_eq!(two.params, b"{\"i\":2}");
        assert!(validate_model_dir(&c, &two.dir).unwrap().is_empty());
        assert!(matches!(reg.resolve("nobody", None), Err(StoreError::NotFound(_))));
        assert!(matches!(reg.resolve("ml-detector", Some(9)), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn tamper_before_verification_rolls_back() {
        let tmp = tempfile::tempdir().unwrap();
        let reg = Registry::new(tmp.path());
        let c = builtin::ml_model();
        let staged = reg.stage(draft("ml-detector"), b"{}", &c).unwrap();
        fs::write(staged.params_path(), b"{\"evil\":1}").unwrap();
        assert!(matches!(staged.commit(), Err(StoreError::Integrity(_))));
        assert!(reg.versions("ml-detector").unwrap().is_empty());
        let leftovers: Vec<_> = fs::read_dir(tmp.path().join("ml-detector")).unwrap().collect();
        assert!(leftovers.is_empty());
        assert_eq!(reg.register(draft("ml-detector"), b"{}", &c).unwrap().version, 1);
    }

    #[test]
    fn tampered_entry_fails_resolve() {
        let tmp = tempfile::tempdir().unwrap();
        let reg = Registry::new(tmp.path());
        let id = reg.register(draft("m"), b"{}", &builtin::ml_model()).unwrap();
        fs::write(tmp.path().join("m/1").join(PARAMS_FILE), b"{\"x\":2}").unwrap();
        assert!(matches!(reg.resolve(&id.name, None), Err(StoreError::Integrity(_))));
    }

    #[test]
    fn lineage_required() {
        let tmp = tempfile::tempdir().unwrap();
        let mut d = draft("m");
        d.training_run_id.clear();
        assert!(Registry::new(tmp.path()).register(d, b"{}", &builtin::ml_model()).is_err());
    }

    #[test]
    fn contract_mismatch_blocks_commit() {
        let tmp = tempfile::tempdir().unwrap();
        let reg = Registry::new(tmp.path());
        let err = reg.register(draft("m"), b"{}", &builtin::rule_model()).unwrap_err();
        assert!(matches!(err, StoreError::Contract(_)));
        assert!(reg.versions("m").unwrap().is_empty());
    }

    #[test]
    fn model_refs_parse() {
        assert_eq!("a:3".parse::<ModelRef>().unwrap(), ModelRef { name: "a".into(), version: Some(3) });
        assert_eq!("a".parse::<ModelRef>().unwrap(), ModelRef::latest("a"));
        assert_eq!("a:latest".parse::<ModelRef>().unwrap(), ModelRef::latest("a"));
        assert!("a:x".parse::<ModelRef>().is_err());
        assert!("../a".parse::<ModelRef>().is_err());
        assert_eq!("a:2".parse::<ModelId>().unwrap().to_string(), "a:2");
    }
}
