//! HTTP access for the fetchers, with a replayable on-disk recording format
//! so fetches can run offline and deterministically.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ForgeError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lowercased header names.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: String,
}

impl HttpResponse {
    pub fn ok(body: impl Into<String>) -> Self {
        HttpResponse {
            status: 200,
            headers: BTreeMap::new(),
            body: body.into(),
        }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    /// Target of the `rel="next"` entry of a `Link` header.
    pub fn next_link(&self) -> Option<String> {
        let link = self.header("link")?;
        link.split(',').find_map(|part| {
            let mut pieces = part.split(';');
            let url = pieces.next()?.trim();
            let is_next = pieces.any(|p| p.trim() == "rel=\"next\"");
            (is_next && url.starts_with('<') && url.ends_with('>'))
                .then(|| url[1..url.len() - 1].to_string())
        })
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub url: String,
    #[serde(flatten)]
    pub response: HttpResponse,
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpResponse>;
}

/// Live HTTPS transport.
pub struct LiveTransport {
    agent: ureq::Agent,
}

impl LiveTransport {
    pub fn new() -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .user_agent("prszz")
            .build()
            .into();
        LiveTransport { agent }
    }
}

impl Default for LiveTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for LiveTransport {
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpResponse> {
        let mut req = self.agent.get(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req
            .call()
            .map_err(|e| ForgeError::NetworkError(e.to_string()))?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| {
                v.to_str()
                    .ok()
                    .map(|v| (k.as_str().to_ascii_lowercase(), v.to_string()))
            })
            .collect();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ForgeError::NetworkError(e.to_string()))?;
        Ok(HttpResponse {
            status,
            headers,
            body,
        })
    }
}

/// Serves recorded exchanges. Several recordings of one URL are served in
/// order; the last one repeats.
pub struct ReplayTransport {
    exchanges: HashMap<String, Vec<HttpResponse>>,
    served: Mutex<HashMap<String, usize>>,
}

impl ReplayTransport {
    pub fn from_exchanges(exchanges: impl IntoIterator<Item = Exchange>) -> Self {
        let mut map: HashMap<String, Vec<HttpResponse>> = HashMap::new();
        for e in exchanges {
            map.entry(e.url).or_default().push(e.response);
        }
        ReplayTransport {
            exchanges: map,
            served: Mutex::new(HashMap::new()),
        }
    }

    /// Loads every `*.json` exchange file of a directory, in file-name order.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
            .collect();
        files.sort();
        let mut exchanges = Vec::with_capacity(files.len());
        for f in files {
            let text = fs::read_to_string(&f)?;
            let e: Exchange = serde_json::from_str(&text).map_err(|err| ForgeError::Malformed {
                url: f.display().to_string(),
                message: err.to_string(),
            })?;
            exchanges.push(e);
        }
        Ok(Self::from_exchanges(exchanges))
    }
}

impl Transport for ReplayTransport {
    fn get(&self, url: &str, _headers: &[(String, String)]) -> Result<HttpResponse> {
        let responses = self
            .exchanges
            .get(url)
            .ok_or_else(|| ForgeError::NotRecorded(url.to_string()))?;
        let mut served = self.served.lock().expect("replay lock");
        let n = served.entry(url.to_string()).or_insert(0);
        let resp = responses[(*n).min(responses.len() - 1)].clone();
        *n += 1;
        Ok(resp)
    }
}

/// Wraps a transport and writes every exchange into a directory that
/// [`ReplayTransport::from_dir`] can load.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
    counter: Mutex<u64>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(RecordingTransport {
            inner,
            dir,
            counter: Mutex::new(0),
        })
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpResponse> {
        let response = self.inner.get(url, headers)?;
        let digest = hex::encode(Sha256::digest(url.as_bytes()));
        let seq = {
            let mut c = self.counter.lock().expect("recorder lock");
            *c += 1;
            *c
        };
        let exchange = Exchange {
            url: url.to_string(),
            response: response.clone(),
        };
        let name = format!("{seq:06}-{}.json", &digest[..16]);
        fs::write(self.dir.join(name), super::to_canonical_json(&exchange))?;
        Ok(response)
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, secs: u64);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, secs: u64) {
        std::thread::sleep(Duration::from_secs(secs));
    }
}

/// Records requested waits instead of sleeping.
#[derive(Default)]
pub struct NoSleep {
    pub waits: Mutex<Vec<u64>>,
}

impl Sleeper for NoSleep {
    fn sleep(&self, secs: u64) {
        self.waits.lock().expect("sleep lock").push(secs);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub max_wait_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            max_wait_secs: 900,
        }
    }
}

/// Shared request plumbing of the fetchers: authentication, rate-limit
/// backoff and bounded retry.
pub struct Client<'a> {
    pub transport: &'a dyn Transport,
    pub token: Option<String>,
    pub policy: RetryPolicy,
    pub sleeper: &'a dyn Sleeper,
    pub parallelism: usize,
    /// Current epoch seconds, used to compute rate-limit reset waits.
    pub now: fn() -> i64,
}

fn system_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

impl<'a> Client<'a> {
    pub fn new(transport: &'a dyn Transport, token: Option<String>, sleeper: &'a dyn Sleeper) -> Self {
        Client {
            transport,
            token,
            policy: RetryPolicy::default(),
            sleeper,
            parallelism: 4,
            now: system_now,
        }
    }

    pub fn get(&self, url: &str) -> Result<HttpResponse> {
        let mut headers = vec![("Accept".to_string(), "application/json".to_string())];
        if let Some(t) = &self.token {
            headers.push(("Authorization".into(), format!("Bearer {t}")));
        }
        let mut attempt = 0;
        loop {
            let resp = self.transport.get(url, &headers)?;
            match resp.status {
                200..=299 => return Ok(resp),
                401 => return Err(ForgeError::AuthFailure(url.to_string())),
                403 | 429 if is_rate_limited(&resp) => {
                    if attempt >= self.policy.max_retries {
                        return Err(ForgeError::RateLimitExhausted {
                            url: url.to_string(),
                            retries: attempt,
                        });
                    }
                    self.sleeper.sleep(self.rate_limit_wait(&resp));
                }
                403 => return Err(ForgeError::AuthFailure(url.to_string())),
                500..=599 if attempt < self.policy.max_retries => {
                    self.sleeper.sleep(1u64 << attempt.min(6));
                }
                status => {
                    return Err(ForgeError::Http {
                        url: url.to_string(),
                        status,
                    })
                }
            }
            attempt += 1;
        }
    }

    pub fn get_json(&self, url: &str) -> Result<(serde_json::Value, HttpResponse)> {
        let resp = self.get(url)?;
        let value = serde_json::from_str(&resp.body).map_err(|e| ForgeError::Malformed {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        Ok((value, resp))
    }

    fn rate_limit_wait(&self, resp: &HttpResponse) -> u64 {
        let wait = if let Some(s) = resp.header("retry-after").and_then(|s| s.parse::<u64>().ok()) {
            s
        } else if let Some(reset) = resp.header("x-ratelimit-reset").and_then(|s| s.parse::<i64>().ok()) {
            (reset - (self.now)()).max(1) as u64
        } else {
            60
        };
        wait.clamp(1, self.policy.max_wait_secs.max(1))
    }

    /// Maps `f` over `items` with at most `parallelism` concurrent workers,
    /// preserving order.
    pub fn map_bounded<T, R, F>(&self, items: &[T], f: F) -> Vec<Result<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync,
    {
        let workers = self.parallelism.max(1).min(items.len().max(1));
        if workers == 1 {
            return items.iter().map(&f).collect();
        }
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<R>>>> =
            Mutex::new((0..items.len()).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= items.len() {
                        break;
                    }
                    let r = f(&items[i]);
                    results.lock().expect("results lock")[i] = Some(r);
                });
            }
        });
        results
            .into_inner()
            .expect("results lock")
            .into_iter()
            .map(|r| r.expect("every item processed"))
            .collect()
    }
}

fn is_rate_limited(resp: &HttpResponse) -> bool {
    resp.status == 429
        || resp.header("x-ratelimit-remaining") == Some("0")
        || resp.header("retry-after").is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limited(reset: i64) -> HttpResponse {
        let mut r = HttpResponse::ok("");
        r.status = 403;
        r.headers.insert("x-ratelimit-remaining".into(), "0".into());
        r.headers.insert("x-ratelimit-reset".into(), reset.to_string());
        r
    }

    #[test]
    fn parses_next_link() {
        let mut r = HttpResponse::ok("[]");
        r.headers.insert(
            "link".into(),
            r#"<https://x/a?page=2>; rel="next", <https://x/a?page=5>; rel="last""#.into(),
        );
        assert_eq!(r.next_link().as_deref(), Some("https://x/a?page=2"));
    }

    #[test]
    fn rate_limit_waits_then_succeeds() {
        let t = ReplayTransport::from_exchanges([
            Exchange { url: "u".into(), response: limited(130) },
            Exchange { url: "u".into(), response: HttpResponse::ok("{}") },
        ]);
        let sleeper = NoSleep::default();
        let mut c = Client::new(&t, None, &sleeper);
        c.now = || 100;
        assert_eq!(c.get("u").unwrap().status, 200);
        assert_eq!(*sleeper.waits.lock().unwrap(), vec![30]);
    }

    #[test]
    fn rate_limit_retries_are_bounded() {
        let t = ReplayTransport::from_exchanges([Exchange { url: "u".into(), response: limited(0) }]);
        let sleeper = NoSleep::default();
        let mut c = Client::new(&t, None, &sleeper);
        c.policy.max_retries = 3;
        assert!(matches!(
            c.get("u"),
            Err(ForgeError::RateLimitExhausted { retries: 3, .. })
        ));
        assert_eq!(sleeper.waits.lock().unwrap().len(), 3);
    }

    #[test]
    fn unauthorized_is_auth_failure() {
        let mut r = HttpResponse::ok("");
        r.status = 401;
        let t = ReplayTransport::from_exchanges([Exchange { url: "u".into(), response: r }]);
        let sleeper = NoSleep::default();
        let c = Client::new(&t, Some("bad".into()), &sleeper);
        assert!(matches!(c.get("u"), Err(ForgeError::AuthFailure(_))));
    }

    #[test]
    fn recording_then_replay_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let source = ReplayTransport::from_exchanges([Exchange {
            url: "https://api/x".into(),
            response: HttpResponse::ok("[1]"),
        }]);
        let rec = RecordingTransport::new(source, dir.path()).unwrap();
        rec.get("https://api/x", &[]).unwrap();
        let replay = ReplayTransport::from_dir(dir.path()).unwrap();
        assert_eq!(replay.get("https://api/x", &[]).unwrap().body, "[1]");
    }
}
