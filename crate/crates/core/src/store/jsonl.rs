use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::lock::{LockOptions, WriterLock};
use super::{StoreError, StoreKind};
use crate::contract::{validate_records, DataContract};
use crate::domain::{point_in_aoi, AreaOfInterest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Read,
    Append,
}

/// Optional predicates applied during a scan.
#[derive(Debug, Clone, Default)]
pub struct ScanFilter {
    /// Matches records with top-level `lat`, `lon` and `timestamp` inside the AOI.
    pub aoi: Option<AreaOfInterest>,
    pub object_id: Option<String>,
}

impl ScanFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn object(id: &str) -> Self {
        Self { object_id: Some(id.to_string()), ..Self::default() }
    }

    pub fn area(aoi: AreaOfInterest) -> Self {
        Self { aoi: Some(aoi), ..Self::default() }
    }

    fn matches(&self, record: &Value) -> bool {
        if let Some(id) = &self.object_id {
            if record.get("object_id").and_then(Value::as_str) != Some(id.as_str()) {
                return false;
            }
        }
        if let Some(aoi) = &self.aoi {
            let lat = record.get("lat").and_then(Value::as_f64);
            let lon = record.get("lon").and_then(Value::as_f64);
            let ts = record.get("timestamp").and_then(Value::as_i64);
            match (lat, lon, ts) {
                (Some(lat), Some(lon), Some(ts)) => return point_in_aoi(lat, lon, ts, aoi),
                _ => return false,
            }
        }
        true
    }
}

/// Records yielded by a scan, plus what was skipped along the way.
#[derive(Debug)]
pub struct Scan {
    records: std::vec::IntoIter<Value>,
    /// Complete lines that were not JSON objects.
    pub corrupt_lines: usize,
    /// A final line without its terminating newline was ignored.
    pub truncated_tail: bool,
}

impl Scan {
    pub fn skipped(&self) -> usize {
        self.corrupt_lines + usize::from(self.truncated_tail)
    }

    /// Deserialize every remaining record; the first mismatch is an error.
    pub fn typed<T: DeserializeOwned>(self) -> Result<Vec<T>, StoreError> {
        self.records.map(|v| serde_json::from_value(v).map_err(StoreError::from)).collect()
    }
}

impl Iterator for Scan {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        self.records.next()
    }
}

/// Parse the complete lines of a JSONL byte buffer.
pub(crate) fn parse_lines(bytes: &[u8], filter: &ScanFilter) -> Scan {
    let (complete, tail) = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(i) => (&bytes[..=i], &bytes[i + 1..]),
        None => (&bytes[..0], bytes),
    };
    let mut records = Vec::new();
    let mut corrupt = 0;
    for line in complete.split(|&b| b == b'\n') {
        if line.is_empty() {
            continue;
        }
        match serde_json::from_slice::<Value>(line) {
            Ok(v @ Value::Object(_)) => {
                if filter.matches(&v) {
                    records.push(v);
                }
            }
            _ => corrupt += 1,
        }
    }
    Scan { records: records.into_iter(), corrupt_lines: corrupt, truncated_tail: !tail.is_empty() }
}

/// An opened JSON Lines store file fronted by its data contract.
#[derive(Debug)]
pub struct StoreHandle {
    path: PathBuf,
    kind: StoreKind,
    mode: Mode,
    contract: DataContract,
    _lock: Option<WriterLock>,
}

impl StoreHandle {
    pub fn open_read(path: impl Into<PathBuf>, kind: StoreKind, contract: DataContract) -> Self {
        Self { path: path.into(), kind, mode: Mode::Read, contract, _lock: None }
    }

    /// Take the writer lock and prepare the file for appends. A trailing
    /// partial line left by a crash is terminated so it stays an isolated
    /// corrupt line instead of merging with the next record.
    pub fn open_append(
        path: impl Into<PathBuf>,
        kind: StoreKind,
        contract: DataContract,
        opts: LockOptions,
    ) -> Result<Self, StoreError> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let lock = WriterLock::acquire(&path, opts)?;
        if let Ok(bytes) = fs::read(&path) {
            if bytes.last().is_some_and(|&b| b != b'\n') {
                let mut f = OpenOptions::new().append(true).open(&path)?;
                f.write_all(b"\n")?;
                f.sync_data()?;
            }
        }
        Ok(Self { path, kind, mode: Mode::Append, contract, _lock: Some(lock) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn kind(&self) -> StoreKind {
        self.kind
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn contract(&self) -> &DataContract {
        &self.contract
    }

    /// All-or-nothing append: every record must satisfy the contract,
    /// then the batch is written with a single write and fsync.
    pub fn append_values(&mut self, records: &[Value]) -> Result<usize, StoreError> {
        if self.mode != Mode::Append {
            return Err(StoreError::ReadOnly(self.path.display().to_string()));
        }
        let violations = validate_records(&self.contract, records)?;
        if !violations.is_empty() {
            return Err(StoreError::Contract(violations));
        }
        if records.is_empty() {
            return Ok(0);
        }
        let mut buf = Vec::new();
        for record in records {
            serde_json::to_writer(&mut buf, record)?;
            buf.push(b'\n');
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(&buf)?;
        file.sync_data()?;
        Ok(records.len())
    }

    pub fn append<T: Serialize>(&mut self, records: &[T]) -> Result<usize, StoreError> {
        let values = records.iter().map(serde_json::to_value).collect::<Result<Vec<_>, _>>()?;
        self.append_values(&values)
    }

    /// Records in append order. Sees a consistent prefix while a writer is
    /// active: only newline-terminated lines are parsed.
    pub fn scan(&self, filter: &ScanFilter) -> Result<Scan, StoreError> {
        match fs::read(&self.path) {
            Ok(bytes) => Ok(parse_lines(&bytes, filter)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(parse_lines(&[], filter)),
            Err(e) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::builtin;
    use serde_json::json;

    fn fix(i: i64) -> Value {
        json!({"object_id": format!("v{}", i % 2), "lat": i as f64, "lon": 1.0, "timestamp": 100 + i,
               "source": "sensor", "object_type": "vessel"})
    }

    fn raw(dir: &Path) -> StoreHandle {
        StoreHandle::open_append(dir.join("raw.jsonl"), StoreKind::Raw, builtin::raw_fix(), LockOptions::default()).unwrap()
    }

    #[test]
    fn append_then_scan() {
        let tmp = tempfile::tempdir().unwrap();
        let mut h = raw(tmp.path());
        let records: Vec<_> = (0..5).map(fix).collect();
        assert_eq!(h.append_values(&records).unwrap(), 5);
        let got: Vec<_> = h.scan(&ScanFilter::all()).unwrap().collect();
        assert_eq!(got, records);
    }

    #[test]
    fn batch_is_atomic() {
        let tmp = tempfile::tempdir().unwrap();
        let mut h = raw(tmp.path());
        let mut records: Vec<_> = (0..4).map(fix).collect();
        records.push(json!({"object_id": "x", "lat": 95.0, "lon": 0.0, "timestamp": 1, "source": "sensor", "object_type": "vessel"}));
        let err = h.append_values(&records).unwrap_err();
        match err {
            StoreError::Contract(v) => assert_eq!(v[0].location, "record[4].lat"),
            other => panic!("{other:?}"),
        }
        assert_eq!(h.scan(&ScanFilter::all()).unwrap().count(), 0);
    }

    #[test]
    fn second_writer_is_busy() {
        let tmp = tempfile::tempdir().unwrap();
        let _h = raw(tmp.path());
        let second = StoreHandle::open_append(tmp.path().join("raw.jsonl"), StoreKind::Raw, builtin::raw_fix(), LockOptions::default());
        assert!(matches!(second, Err(StoreError::Busy { .. })));
    }

    #[test]
    fn read_handle_cannot_append() {
        let tmp = tempfile::tempdir().unwrap();
        let mut h = StoreHandle::open_read(tmp.path().join("raw.jsonl"), StoreKind::Raw, builtin::raw_fix());
        assert!(matches!(h.append_values(&[fix(1)]), Err(StoreError::ReadOnly(_))));
        assert_eq!(h.scan(&ScanFilter::all()).unwrap().count(), 0);
    }

    #[test]
    fn predicates() {
        let tmp = tempfile::tempdir().unwrap();
        let mut h = raw(tmp.path());
        let records: Vec<_> = (0..10).map(fix).collect();
        h.append_values(&records).unwrap();
        assert_eq!(h.scan(&ScanFilter::object("nobody")).unwrap().count(), 0);
        assert_eq!(h.scan(&ScanFilter::object("v1")).unwrap().count(), 5);
        let aoi = AreaOfInterest::bbox(2.0, 0.0, 5.0, 2.0);
        let got: Vec<_> = h.scan(&ScanFilter::area(aoi)).unwrap().collect();
        let brute: Vec<_> = records
            .iter()
            .filter(|r| {
                let lat = r["lat"].as_f64().unwrap();
                (2.0..=5.0).contains(&lat)
            })
            .cloned()
            .collect();
        assert_eq!(got, brute);
    }

    #[test]
    fn truncated_tail_is_skipped_then_isolated() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("raw.jsonl");
        {
            let mut h = raw(tmp.path());
            h.append_values(&[fix(1), fix(2)]).unwrap();
        }
        let mut bytes = fs::read(&path).unwrap();
        let full_len = bytes.len();
        let line = serde_json::to_vec(&fix(3)).unwrap();
        bytes.extend_from_slice(&line[..line.len() / 2]);
        fs::write(&path, &bytes).unwrap();
        assert!(fs::read(&path).unwrap().len() > full_len);

        let reader = StoreHandle::open_read(&path, StoreKind::Raw, builtin::raw_fix());
        let scan = reader.scan(&ScanFilter::all()).unwrap();
        assert!(scan.truncated_tail);
        assert_eq!(scan.count(), 2);

        let mut h = raw(tmp.path());
        h.append_values(&[fix(4)]).unwrap();
        let scan = reader.scan(&ScanFilter::all()).unwrap();
        assert_eq!((scan.corrupt_lines, scan.truncated_tail), (1, false));
        let got: Vec<_> = scan.collect();
        assert_eq!(got, vec![fix(1), fix(2), fix(4)]);
    }

    #[test]
    fn unknown_fields_survive_copy() {
        let tmp = tempfile::tempdir().unwrap();
        let mut h = raw(tmp.path());
        let mut r = fix(1);
        r["vendor_extra"] = json!({"x": 1});
        h.append_values(std::slice::from_ref(&r)).unwrap();
        let copied: Vec<_> = h.scan(&ScanFilter::all()).unwrap().collect();
        let tmp2 = tempfile::tempdir().unwrap();
        let mut h2 = raw(tmp2.path());
        h2.append_values(&copied).unwrap();
        assert_eq!(h2.scan(&ScanFilter::all()).unwrap().next().unwrap()["vendor_extra"]["x"], 1);
    }
}
