//! Spot checks against the public elliptic curve database.
//!
//! Lookups go through a [`Transport`] so tests can replay recorded
//! responses. Every answer is cached on disk; offline clients read the
//! cache and never touch the transport.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread::sleep;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::localdensity::default_cache_dir;

pub const API_BASE: &str = "https://www.lmfdb.org/api/ec_curvedata/";

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("not found")]
    NotFound,
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Error)]
pub enum LmfdbError {
    #[error("no cached record for {0} and offline mode is on")]
    NotCached(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("unexpected response: {0}")]
    Response(String),
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<String, TransportError>;
}

/// Blocking HTTPS transport.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        UreqTransport { agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<String, TransportError> {
        match self.agent.get(url).call() {
            Ok(resp) => resp.into_string().map_err(|e| TransportError::Failed(e.to_string())),
            Err(ureq::Error::Status(404, _)) => Err(TransportError::NotFound),
            Err(e) => Err(TransportError::Failed(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveLookup {
    /// `[a1, a2, a3, a4, a6]` as decimal strings.
    pub ainvs: Vec<String>,
    /// Cremona label.
    pub label: Option<String>,
    pub lmfdb_label: Option<String>,
    /// Mod-`l` image labels.
    pub galois_images: Option<Vec<String>>,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
}

/// What the cache holds for one key: a record, or the fact that the
/// database has none.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct CacheFile {
    found: Option<CurveLookup>,
}

/// `[0, 0, 0, A, B]`
pub fn short_ainvs(a: &BigInt, b: &BigInt) -> [BigInt; 5] {
    [BigInt::from(0), BigInt::from(0), BigInt::from(0), a.clone(), b.clone()]
}

pub fn cache_key(ainvs: &[BigInt; 5]) -> String {
    ainvs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("_")
}

pub fn query_url(ainvs: &[BigInt; 5]) -> String {
    let list = ainvs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    format!("{API_BASE}?_format=json&ainvs=li{list}")
}

/// Pulls the first curve out of an API response; `None` when the result
/// list is empty.
pub fn parse_response(body: &str, ainvs: &[BigInt; 5], fetched_at: u64) -> Result<Option<CurveLookup>, LmfdbError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LmfdbError::Response(e.to_string()))?;
    let data = v.get("data").and_then(Value::as_array).ok_or_else(|| LmfdbError::Response("no data array".into()))?;
    let Some(rec) = data.first() else {
        return Ok(None);
    };
    let text = |k: &str| rec.get(k).and_then(Value::as_str).map(str::to_string);
    let images = rec
        .get("modell_images")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect());
    Ok(Some(CurveLookup {
        ainvs: ainvs.iter().map(|x| x.to_string()).collect(),
        label: text("Clabel"),
        lmfdb_label: text("lmfdb_label"),
        galois_images: images,
        fetched_at,
    }))
}

pub struct LmfdbClient<T> {
    transport: T,
    cache_dir: PathBuf,
    offline: bool,
    min_interval: Duration,
    retries: u32,
    backoff: Duration,
    last_request: Mutex<Option<Instant>>,
}

impl<T: Transport> LmfdbClient<T> {
    /// Client caching under `cache_root/lmfdb`, at most one request a second.
    pub fn new(transport: T, cache_root: &Path, offline: bool) -> Self {
        LmfdbClient {
            transport,
            cache_dir: cache_root.join("lmfdb"),
            offline,
            min_interval: Duration::from_secs(1),
            retries: 3,
            backoff: Duration::from_secs(2),
            last_request: Mutex::new(None),
        }
    }

    pub fn with_timing(mut self, min_interval: Duration, retries: u32, backoff: Duration) -> Self {
        self.min_interval = min_interval;
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    fn cache_path(&self, key: &str) -> PathBuf {
        self.cache_dir.join(format!("{key}.json"))
    }

    fn read_cache(&self, key: &str) -> Result<Option<CacheFile>, LmfdbError> {
        match std::fs::read_to_string(self.cache_path(key)) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| LmfdbError::Cache(e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(LmfdbError::Cache(e.to_string())),
        }
    }

    fn write_cache(&self, key: &str, entry: &CacheFile) -> Result<(), LmfdbError> {
        let io = |e: std::io::Error| LmfdbError::Cache(e.to_string());
        std::fs::create_dir_all(&self.cache_dir).map_err(io)?;
        let path = self.cache_path(key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let text = serde_json::to_string_pretty(entry).map_err(|e| LmfdbError::Cache(e.to_string()))?;
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)
    }

    fn throttled_get(&self, url: &str) -> Result<String, TransportError> {
        let mut last = self.last_request.lock().unwrap();
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < self.min_interval {
                sleep(self.min_interval - since);
            }
        }
        let out = self.transport.get(url);
        *last = Some(Instant::now());
        out
    }

    /// Looks the curve up, cache first. A missing curve, or a network
    /// failure after all retries, gives `Ok(None)`.
    pub fn lookup_by_ainvs(&self, ainvs: &[BigInt; 5]) -> Result<Option<CurveLookup>, LmfdbError> {
        let key = cache_key(ainvs);
        if let Some(hit) = self.read_cache(&key)? {
            return Ok(hit.found);
        }
        if self.offline {
            return Err(LmfdbError::NotCached(key));
        }
        let url = query_url(ainvs);
        let mut delay = self.backoff;
        for attempt in 0..=self.retries {
            match self.throttled_get(&url) {
                Ok(body) => {
                    let found = parse_response(&body, ainvs, now_secs())?;
                    self.write_cache(&key, &CacheFile { found: found.clone() })?;
                    return Ok(found);
                }
                Err(TransportError::NotFound) => {
                    self.write_cache(&key, &CacheFile { found: None })?;
                    return Ok(None);
                }
                Err(TransportError::Failed(_)) if attempt < self.retries => {
                    sleep(delay);
                    delay *= 2;
                }
                Err(TransportError::Failed(_)) => {}
            }
        }
        Ok(None)
    }
}

impl LmfdbClient<UreqTransport> {
    pub fn from_env(offline: bool) -> Self {
        Self::new(UreqTransport::default(), &default_cache_dir(), offline)
    }
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
