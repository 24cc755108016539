use std::io::Read;
use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::rate_limit::RateLimiter;

/// Where filing bytes come from. Both variants expose the same path layout
/// (`submissions/CIK…json`, `Archives/edgar/data/…`), so the rest of the
/// client is transport-agnostic and fixture trees mirror the live endpoint.
pub enum Transport {
    Http {
        agent: ureq::Agent,
        base_url: String,
        limiter: Arc<RateLimiter>,
    },
    Local {
        root: PathBuf,
    },
}

impl Transport {
    pub fn http(base_url: &str, user_agent: &str, limiter: Arc<RateLimiter>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .user_agent(user_agent)
            .timeout(std::time::Duration::from_secs(30))
            .build();
        Transport::Http {
            agent,
            base_url: base_url.trim_end_matches('/').to_string(),
            limiter,
        }
    }

    pub fn local(root: impl Into<PathBuf>) -> Self {
        Transport::Local { root: root.into() }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, Transport::Http { .. })
    }

    /// Fetches one resource by endpoint-relative path.
    pub fn get(&self, path: &str) -> Result<Vec<u8>> {
        let path = path.trim_start_matches('/');
        match self {
            Transport::Http {
                agent,
                base_url,
                limiter,
            } => {
                limiter.acquire();
                let url = format!("{base_url}/{path}");
                match agent.get(&url).call() {
                    Ok(resp) => {
                        let mut body = Vec::new();
                        resp.into_reader()
                            .read_to_end(&mut body)
                            .map_err(|e| Error::Network(format!("reading {url}: {e}")))?;
                        Ok(body)
                    }
                    Err(ureq::Error::Status(404, _)) => Err(Error::NotFound(url)),
                    Err(e) => Err(Error::Network(format!("GET {url}: {e}"))),
                }
            }
            Transport::Local { root } => {
                let file = root.join(path);
                match std::fs::read(&file) {
                    Ok(bytes) => Ok(bytes),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                        Err(Error::NotFound(file.display().to_string()))
                    }
                    Err(e) => Err(e.into()),
                }
            }
        }
    }
}
