use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::StoreError;

/// Locks older than this may be broken, but only when asked to.
pub const STALE_AFTER_S: i64 = 600;

#[derive(Debug, Clone, Copy, Default)]
pub struct LockOptions {
    pub break_stale: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LockOwner {
    pub pid: u32,
    pub acquired_ts: i64,
}

pub(crate) fn now_ts() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0)
}

/// Exclusive writer lock: a `<target>.lock` file created with `create_new`,
/// removed on drop.
#[derive(Debug)]
pub struct WriterLock {
    path: PathBuf,
}

impl WriterLock {
    pub fn lock_path(target: &Path) -> PathBuf {
        let mut name = target.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".lock");
        target.with_file_name(name)
    }

    pub fn acquire(target: &Path, opts: LockOptions) -> Result<Self, StoreError> {
        let path = Self::lock_path(target);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        for attempt in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut file) => {
                    let owner = LockOwner { pid: std::process::id(), acquired_ts: now_ts() };
                    file.write_all(serde_json::to_string(&owner)?.as_bytes())?;
                    file.sync_all()?;
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let owner: Option<LockOwner> =
                        fs::read_to_string(&path).ok().and_then(|s| serde_json::from_str(&s).ok());
                    let stale = owner.as_ref().is_none_or(|o| now_ts() - o.acquired_ts > STALE_AFTER_S);
                    if attempt == 0 && stale && opts.break_stale {
                        fs::remove_file(&path)?;
                        continue;
                    }
                    return Err(StoreError::Busy {
                        lock: path.display().to_string(),
                        owner_pid: owner.as_ref().map(|o| o.pid),
                        acquired_ts: owner.map(|o| o.acquired_ts),
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        unreachable!("second attempt either acquires or reports busy")
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for WriterLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
