//! Append-only response cache, one JSON object per line.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatOutcome, GatewayError, GatewayResult};

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    model: String,
    #[serde(flatten)]
    outcome: ChatOutcome,
}

/// Keyed completion store. Entries are only ever appended; a reloaded cache
/// replays every line. A truncated final line (interrupted write) is ignored.
pub struct Cache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

struct Inner {
    entries: HashMap<String, ChatOutcome>,
    writer: Option<File>,
}

impl Cache {
    /// Cache with no backing file; entries live for the process.
    pub fn in_memory() -> Cache {
        Cache {
            path: None,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                writer: None,
            }),
        }
    }

    /// Opens (or creates) a cache file and loads its entries.
    pub fn open(path: &Path) -> GatewayResult<Cache> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| GatewayError::Cache(e.to_string()))?;
            let mut lines = BufReader::new(file).lines().peekable();
            while let Some(line) = lines.next() {
                let line = line.map_err(|e| GatewayError::Cache(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(parsed) => {
                        entries.insert(parsed.key, parsed.outcome);
                    }
                    Err(e) if lines.peek().is_none() => {
                        // A torn final line is dropped; it will be refetched.
                        let _ = e;
                    }
                    Err(e) => {
                        return Err(GatewayError::Cache(format!(
                            "corrupt cache line in {}: {e}",
                            path.display()
                        )));
                    }
                }
            }
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| GatewayError::Cache(e.to_string()))?;
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Cache(e.to_string()))?;
        Ok(Cache {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner {
                entries,
                writer: Some(writer),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<ChatOutcome> {
        self.inner.lock().unwrap().entries.get(key).cloned()
    }

    pub fn put(&self, key: &str, model: &str, outcome: &ChatOutcome) -> GatewayResult<()> {
        let mut inner = self.inner.lock().unwrap();
        if inner.entries.contains_key(key) {
            return Ok(());
        }
        if let Some(writer) = inner.writer.as_mut() {
            let line = CacheLine {
                key: key.to_string(),
                model: model.to_string(),
                outcome: outcome.clone(),
            };
            let mut buf = serde_json::to_string(&line)
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
            buf.push('\n');
            writer
                .write_all(buf.as_bytes())
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
            writer
                .flush()
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        inner.entries.insert(key.to_string(), outcome.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(text: &str) -> ChatOutcome {
        ChatOutcome {
            text: text.to_string(),
            first_token: Some("Yes".into()),
            top_logprobs: Some(vec![("Yes".into(), -0.1), ("No".into(), -2.3)]),
        }
    }

    #[test]
    fn survives_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = Cache::open(&path).unwrap();
            cache.put("k1", "m", &outcome("hello")).unwrap();
            cache.put("k2", "m", &outcome("world")).unwrap();
        }
        let cache = Cache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("k1").unwrap().text, "hello");
        assert_eq!(cache.get("k2").unwrap().top_logprobs, outcome("x").top_logprobs);
    }

    #[test]
    fn appends_do_not_rewrite(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = Cache::open(&path).unwrap();
        cache.put("k1", "m", &outcome("one")).unwrap();
        let after_one = std::fs::read_to_string(&path).unwrap();
        cache.put("k2", "m", &outcome("two")).unwrap();
        let after_two = std::fs::read_to_string(&path).unwrap();
        assert!(after_two.starts_with(&after_one));
        assert_eq!(after_two.lines().count(), 2);
    }

    #[test]
    fn duplicate_put_is_a_no_op() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = Cache::open(&path).unwrap();
        cache.put("k", "m", &outcome("first")).unwrap();
        cache.put("k", "m", &outcome("second")).unwrap();
        assert_eq!(cache.get("k").unwrap().text, "first");
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    }

    #[test]
    fn torn_final_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = Cache::open(&path).unwrap();
            cache.put("k1", "m", &outcome("one")).unwrap();
        }
        let mut raw = std::fs::read_to_string(&path).unwrap();
        raw.push_str("{\"key\":\"k2\",\"model\":\"m\",\"tex");
        std::fs::write(&path, raw).unwrap();
        let cache = Cache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert!(cache.get("k2").is_none());
    }

    #[test]
    fn corrupt_interior_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "garbage\n{\"key\":\"k\",\"model\":\"m\",\"text\":\"t\",\"first_token\":null,\"top_logprobs\":null}\n").unwrap();
        assert!(Cache::open(&path).is_err());
    }

    #[test]
    fn in_memory_has_no_file() {
        let cache = Cache::in_memory();
        cache.put("k", "m", &outcome("v")).unwrap();
        assert_eq!(cache.get("k").unwrap().text, "v");
        assert!(cache.path().is_none());
    }
}
