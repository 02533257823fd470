//! Blocking JSON-over-HTTP with bounded retry, shared by the remote backends.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
    retries: u32,
    backoff: Duration,
}

impl JsonClient {
    pub fn new(url: &str, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient { agent, url: url.to_string(), token, retries: 2, backoff: Duration::from_millis(200) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        self
    }

    pub fn with_retry(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// POST `body`; transport failures and 5xx responses are retried with
    /// exponential backoff.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            let mut req = self.agent.post(&self.url);
            if let Some(token) = &self.token {
                req = req.header("Authorization", &format!("Bearer {token}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status >= 500 {
                        last = format!("{} returned status {status}", self.url);
                        continue;
                    }
                    if status >= 400 {
                        return Err(Error::BackendProtocol(format!("{} returned status {status}", self.url)));
                    }
                    return resp
                        .body_mut()
                        .read_json::<Resp>()
                        .map_err(|e| Error::BackendProtocol(format!("bad response from {}: {e}", self.url)));
                }
                Err(e) => last = format!("{}: {e}", self.url),
            }
        }
        Err(Error::BackendUnavailable(last))
    }
}

pub fn env_url(var: &str) -> Result<String> {
    std::env::var(var)
        .ok()
        .filter(|v| !v.trim().is_empty())
        .ok_or_else(|| Error::BackendUnavailable(format!("{var} is not set")))
}
