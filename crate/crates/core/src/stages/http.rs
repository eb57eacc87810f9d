use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::Agent;

use crate::error::{Error, Result};

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
const MAX_RESPONSE_BYTES: u64 = 64 * 1024 * 1024;

/// Credential that never shows up in `Debug` output.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Debug for Secret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    base_url: String,
    credential: Option<Secret>,
    timeout: Duration,
}

impl HttpEndpoint {
    pub fn new(base_url: impl Into<String>, credential: Option<Secret>) -> Result<Self> {
        let base_url: String = base_url.into();
        let trimmed = base_url.trim().trim_end_matches('/').to_owned();
        if trimmed.is_empty() {
            return Err(Error::Config("http backend requires a non-empty endpoint".into()));
        }
        Ok(Self {
            base_url: trimmed,
            credential,
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn agent(&self) -> Agent {
        Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into()
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url, path)
    }

    fn bearer(&self) -> Option<String> {
        self.credential
            .as_ref()
            .map(|c| format!("Bearer {}", c.expose()))
    }

    fn check(stage: &'static str, resp: &ureq::http::Response<ureq::Body>) -> Result<()> {
        let status = resp.status();
        if status.is_success() {
            Ok(())
        } else {
            Err(Error::upstream(stage, format!("HTTP {status}")))
        }
    }

    pub(crate) fn post_bytes_for_json<R: DeserializeOwned>(
        &self,
        stage: &'static str,
        path: &str,
        content_type: &str,
        body: &[u8],
    ) -> Result<R> {
        let mut req = self
            .agent()
            .post(self.url(path))
            .header("Content-Type", content_type);
        if let Some(b) = self.bearer() {
            req = req.header("Authorization", b);
        }
        let mut resp = req.send(body).map_err(|e| Error::upstream(stage, e))?;
        Self::check(stage, &resp)?;
        resp.body_mut()
            .read_json::<R>()
            .map_err(|e| Error::upstream(stage, e))
    }

    pub(crate) fn post_json_for_json<B: Serialize, R: DeserializeOwned>(
        &self,
        stage: &'static str,
        path: &str,
        body: &B,
    ) -> Result<R> {
        let mut req = self.agent().post(self.url(path));
        if let Some(b) = self.bearer() {
            req = req.header("Authorization", b);
        }
        let mut resp = req.send_json(body).map_err(|e| Error::upstream(stage, e))?;
        Self::check(stage, &resp)?;
        resp.body_mut()
            .read_json::<R>()
            .map_err(|e| Error::upstream(stage, e))
    }

    pub(crate) fn post_json_for_bytes<B: Serialize>(
        &self,
        stage: &'static str,
        path: &str,
        body: &B,
    ) -> Result<Vec<u8>> {
        let mut req = self.agent().post(self.url(path));
        if let Some(b) = self.bearer() {
            req = req.header("Authorization", b);
        }
        let mut resp = req.send_json(body).map_err(|e| Error::upstream(stage, e))?;
        Self::check(stage, &resp)?;
        resp.body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(|e| Error::upstream(stage, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_endpoint_rejected() {
        assert!(matches!(HttpEndpoint::new("  ", None), Err(Error::Config(_))));
    }

    #[test]
    fn trailing_slash_trimmed() {
        let e = HttpEndpoint::new("http://example.test/api/", None).unwrap();
        assert_eq!(e.url("complete"), "http://example.test/api/complete");
    }

    #[test]
    fn secret_is_redacted() {
        let e = HttpEndpoint::new("http://x", Some(Secret::new("hunter2"))).unwrap();
        assert!(!format!("{e:?}").contains("hunter2"));
    }
}
