use std::fmt;
use std::io::Read;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wire::Provider;
use super::{ChatRequest, ChatResponse, GatewayError, ResponseStatus, API_KEY_ENV};

const MAX_BODY_BYTES: u64 = 16 * 1024 * 1024;

/// An API key. Never printed, serialized or logged.
#[derive(Clone, PartialEq, Eq)]
pub struct Credentials(String);

impl Credentials {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    /// Reads the key from the environment. Empty values count as absent.
    pub fn from_env() -> Option<Self> {
        std::env::var(API_KEY_ENV).ok().filter(|k| !k.trim().is_empty()).map(Self)
    }

    fn bearer(&self) -> String {
        format!("Bearer {}", self.0)
    }
}

impl fmt::Debug for Credentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Credentials(<redacted>)")
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    slept: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.slept.lock().expect("sleeper lock").clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.slept.lock().expect("sleeper lock").push(d);
    }
}

/// Exponential backoff: retry `k` (0-based) waits `base_delay_ms * factor^k * j`,
/// with `j` drawn uniformly from `[0.5, 1.0)` by a generator seeded per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    pub base_delay_ms: u64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { base_delay_ms: 500, factor: 2.0 }
    }
}

impl RetryPolicy {
    fn delay(&self, k: u32, rng: &mut ChaCha8Rng) -> Duration {
        let jitter = 0.5 + 0.5 * rng.gen::<f64>();
        let ms = self.base_delay_ms as f64 * self.factor.powi(k as i32) * jitter;
        Duration::from_micros((ms * 1000.0).round() as u64)
    }

    /// The delays before retries `0..retries` for a given seed.
    pub fn schedule(&self, retries: u32, seed: u64) -> Vec<Duration> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..retries).map(|k| self.delay(k, &mut rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewayConfig {
    pub endpoint: String,
    pub provider: Provider,
    /// In-flight requests allowed at once against this endpoint.
    pub max_concurrency: usize,
    pub retry: RetryPolicy,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080/v1/chat".into(),
            provider: Provider::Generic,
            max_concurrency: 4,
            retry: RetryPolicy::default(),
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking chat client with retries and a per-endpoint concurrency cap.
#[derive(Clone)]
pub struct GatewayClient {
    config: GatewayConfig,
    credentials: Option<Credentials>,
    agent: ureq::Agent,
    sleeper: Arc<dyn Sleeper>,
    permits: Arc<Semaphore>,
}

impl fmt::Debug for GatewayClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GatewayClient").field("config", &self.config).field("credentials", &self.credentials).finish()
    }
}

impl GatewayClient {
    pub fn new(config: GatewayConfig, credentials: Option<Credentials>) -> Self {
        Self {
            permits: Arc::new(Semaphore::new(config.max_concurrency)),
            agent: ureq::AgentBuilder::new().build(),
            sleeper: Arc::new(ThreadSleeper),
            config,
            credentials,
        }
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Sends `req`, retrying rate limits and transport failures up to `req.max_retries`
    /// times. `jitter_seed` fixes the backoff schedule.
    pub fn send_chat(&self, req: &ChatRequest, jitter_seed: u64) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let body = self.config.provider.encode(req);
        let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
        let mut attempt = 0;
        loop {
            let resp = self.attempt(&body, Duration::from_millis(req.timeout_ms));
            attempt += 1;
            if resp.status == ResponseStatus::Ok {
                return Ok(resp);
            }
            let retries_used = attempt - 1;
            if !resp.status.is_retryable() || retries_used >= req.max_retries {
                return Err(GatewayError::Failed { status: resp.status, attempts: attempt, detail: resp.content });
            }
            self.sleeper.sleep(self.config.retry.delay(retries_used, &mut rng));
        }
    }

    fn attempt(&self, body: &[u8], timeout: Duration) -> ChatResponse {
        let _permit = self.permits.acquire();
        let mut request =
            self.agent.post(&self.config.endpoint).timeout(timeout).set("Content-Type", "application/json");
        if let Some(c) = &self.credentials {
            request = request.set("Authorization", &c.bearer());
        }
        match request.send_bytes(body) {
            Ok(resp) => {
                let mut bytes = Vec::new();
                match resp.into_reader().take(MAX_BODY_BYTES).read_to_end(&mut bytes) {
                    Ok(_) => self.config.provider.decode(&bytes),
                    Err(e) => ChatResponse::failed(ResponseStatus::TransportError, format!("reading body: {e}")),
                }
            }
            Err(ureq::Error::Status(code, _)) => {
                let status = match code {
                    429 => ResponseStatus::RateLimited,
                    500..=599 => ResponseStatus::TransportError,
                    _ => ResponseStatus::Malformed,
                };
                ChatResponse::failed(status, format!("HTTP {code}"))
            }
            Err(ureq::Error::Transport(t)) => ChatResponse::failed(
                ResponseStatus::TransportError,
                format!("{:?}: {}", t.kind(), t.message().unwrap_or("")),
            ),
        }
    }
}
