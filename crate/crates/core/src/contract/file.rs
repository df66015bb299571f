use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::builtin;
use super::code::CodeContract;
use super::data::DataContract;
use super::model::ModelContract;
use super::ContractError;

pub const ENVELOPE_SCHEMA: &str = "og-contract/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    Data,
    Model,
    Code,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Contract {
    Data(DataContract),
    Model(ModelContract),
    Code(CodeContract),
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    schema: String,
    kind: ContractKind,
    name: String,
    version: u32,
    body: Value,
}

fn split_body(mut value: Value) -> Value {
    if let Some(map) = value.as_object_mut() {
        map.remove("name");
        map.remove("version");
    }
    value
}

fn join_body(body: Value, name: &str, version: u32) -> Result<Value, ContractError> {
    let Value::Object(mut map) = body else {
        return Err(ContractError::Malformed(format!("{name}: body is not an object")));
    };
    map.insert("name".into(), Value::from(name));
    map.insert("version".into(), Value::from(version));
    Ok(Value::Object(map))
}

impl Contract {
    pub fn name(&self) -> &str {
        match self {
            Contract::Data(c) => &c.name,
            Contract::Model(c) => &c.name,
            Contract::Code(c) => &c.name,
        }
    }

    pub fn version(&self) -> u32 {
        match self {
            Contract::Data(c) => c.version,
            Contract::Model(c) => c.version,
            Contract::Code(c) => c.version,
        }
    }

    pub fn kind(&self) -> ContractKind {
        match self {
            Contract::Data(_) => ContractKind::Data,
            Contract::Model(_) => ContractKind::Model,
            Contract::Code(_) => ContractKind::Code,
        }
    }

    pub fn check_well_formed(&self) -> Result<(), ContractError> {
        match self {
            Contract::Data(c) => c.check_well_formed(),
            Contract::Model(c) => c.check_well_formed(),
            Contract::Code(c) => c.check_well_formed(),
        }
    }

    /// Pretty-printed envelope document, newline terminated.
    pub fn to_file_string(&self) -> String {
        let body = match self {
            Contract::Data(c) => serde_json::to_value(c),
            Contract::Model(c) => serde_json::to_value(c),
            Contract::Code(c) => serde_json::to_value(c),
        }
        .expect("contracts serialize");
        let envelope = Envelope {
            schema: ENVELOPE_SCHEMA.into(),
            kind: self.kind(),
            name: self.name().into(),
            version: self.version(),
            body: split_body(body),
        };
        let mut s = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
        s.push('\n');
        s
    }

    pub fn from_file_str(text: &str) -> Result<Self, ContractError> {
        let envelope: Envelope = serde_json::from_str(text).map_err(|e| ContractError::Malformed(e.to_string()))?;
        if envelope.schema != ENVELOPE_SCHEMA {
            return Err(ContractError::Malformed(format!(
                "{}: unknown envelope schema `{}`",
                envelope.name, envelope.schema
            )));
        }
        let full = join_body(envelope.body, &envelope.name, envelope.version)?;
        let parse_err = |e: serde_json::Error| ContractError::Malformed(format!("{}: {e}", envelope.name));
        let contract = match envelope.kind {
            ContractKind::Data => Contract::Data(serde_json::from_value(full).map_err(parse_err)?),
            ContractKind::Model => Contract::Model(serde_json::from_value(full).map_err(parse_err)?),
            ContractKind::Code => Contract::Code(serde_json::from_value(full).map_err(parse_err)?),
        };
        contract.check_well_formed()?;
        Ok(contract)
    }
}

/// All contracts of an installation, by name.
#[derive(Debug, Clone, Default)]
pub struct ContractSet {
    contracts: BTreeMap<String, Contract>,
}

impl ContractSet {
    /// Load every `*.json` contract document in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ContractError> {
        let entries = fs::read_dir(dir).map_err(|e| ContractError::Io(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut set = Self::default();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| ContractError::Io(format!("{}: {e}", path.display())))?;
            let contract = Contract::from_file_str(&text)
                .map_err(|e| ContractError::Malformed(format!("{}: {e}", path.display())))?;
            set.insert(contract)?;
        }
        Ok(set)
    }

    pub fn builtin() -> Self {
        let mut set = Self::default();
        for contract in builtin::all() {
            set.insert(contract).expect("builtin contract names are unique");
        }
        set
    }

    pub fn insert(&mut self, contract: Contract) -> Result<(), ContractError> {
        let name = contract.name().to_string();
        if self.contracts.contains_key(&name) {
            return Err(ContractError::Malformed(format!("duplicate contract `{name}`")));
        }
        self.contracts.insert(name, contract);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Contract> {
        self.contracts.get(name)
    }

    pub fn data(&self, name: &str) -> Result<&DataContract, ContractError> {
        match self.get(name) {
            Some(Contract::Data(c)) => Ok(c),
            _ => Err(ContractError::NotFound(format!("data contract `{name}`"))),
        }
    }

    pub fn model(&self, name: &str) -> Result<&ModelContract, ContractError> {
        match self.get(name) {
            Some(Contract::Model(c)) => Ok(c),
            _ => Err(ContractError::NotFound(format!("model contract `{name}`"))),
        }
    }

    pub fn code(&self, name: &str) -> Result<&CodeContract, ContractError> {
        match self.get(name) {
            Some(Contract::Code(c)) => Ok(c),
            _ => Err(ContractError::NotFound(format!("code contract `{name}`"))),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contract> {
        self.contracts.values()
    }

    /// Write one file per contract, `<name>.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), ContractError> {
        fs::create_dir_all(dir).map_err(|e| ContractError::Io(e.to_string()))?;
        for contract in self.iter() {
            let path = dir.join(format!("{}.json", contract.name()));
            fs::write(&path, contract.to_file_string()).map_err(|e| ContractError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}
