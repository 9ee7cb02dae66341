//! JSON-over-HTTP POST with bounded retries, shared by the embedding and
//! generation clients.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, including the first one.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): base * 2^(attempt-1), capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("authentication rejected (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("rate limited after {attempts} attempts: {body}")]
    RateLimited { attempts: u32, body: String },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("response is not valid JSON: {0}")]
    Decode(String),
}

fn retriable(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS
        || status == StatusCode::REQUEST_TIMEOUT
        || status.is_server_error()
}

fn retry_after(resp: &reqwest::blocking::Response) -> Option<Duration> {
    resp.headers()
        .get(reqwest::header::RETRY_AFTER)?
        .to_str()
        .ok()?
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|s| s.is_finite() && *s >= 0.0)
        .map(Duration::from_secs_f64)
}

pub fn build_client(timeout: Duration) -> Client {
    Client::builder()
        .timeout(timeout)
        .build()
        .expect("http client configuration is static")
}

/// POSTs `body` as JSON with a bearer token; retries 429/408/5xx and transport
/// failures with exponential backoff. 401/403 fail immediately.
pub fn post_json(
    client: &Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    policy: &RetryPolicy,
) -> Result<Value, HttpError> {
    let attempts = policy.max_attempts.max(1);
    let mut last_err = HttpError::Transport("no attempt made".into());
    for attempt in 1..=attempts {
        let mut req = client.post(url).json(body);
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        let mut wait = policy.backoff(attempt);
        match req.send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    let text = resp.text().map_err(|e| HttpError::Transport(e.to_string()))?;
                    return serde_json::from_str(&text).map_err(|e| HttpError::Decode(e.to_string()));
                }
                if let Some(d) = retry_after(&resp) {
                    wait = d.min(policy.max_delay);
                }
                let body = resp.text().unwrap_or_default();
                if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
                    return Err(HttpError::Auth { status: status.as_u16(), body });
                }
                if !retriable(status) {
                    return Err(HttpError::Status { status: status.as_u16(), body });
                }
                tracing::debug!(%status, attempt, "retriable http failure");
                last_err = if status == StatusCode::TOO_MANY_REQUESTS {
                    HttpError::RateLimited { attempts: attempt, body }
                } else {
                    HttpError::Status { status: status.as_u16(), body }
                };
            }
            Err(e) => {
                tracing::debug!(error = %e, attempt, "http transport failure");
                last_err = HttpError::Transport(e.to_string());
            }
        }
        if attempt < attempts {
            std::thread::sleep(wait);
        }
    }
    Err(last_err)
}
