//! Client for a shell server exposing `GET /shells` (JSON array of shell
//! ids) and `GET /shells/{id}` (canonical shell document).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use url::Url;

use super::IngestError;
use crate::aas::{parse_shell, AdministrationShell};

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// Attempts per request, including the first.
    pub attempts: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub initial_backoff: Duration,
    pub parallelism: usize,
    pub timeout: Duration,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            attempts: 3,
            initial_backoff: Duration::from_millis(100),
            parallelism: 4,
            timeout: Duration::from_secs(10),
        }
    }
}

#[derive(Debug)]
pub struct ShellFailure {
    pub id: String,
    pub error: IngestError,
}

/// Shells that were fetched and parsed, in listing order, plus the ids
/// that failed.
#[derive(Debug, Default)]
pub struct FetchOutcome {
    pub shells: Vec<AdministrationShell>,
    pub failures: Vec<ShellFailure>,
}

impl FetchOutcome {
    /// Fails with every per-shell error when any shell failed.
    pub fn into_result(self) -> Result<Vec<AdministrationShell>, IngestError> {
        if self.failures.is_empty() {
            Ok(self.shells)
        } else {
            Err(IngestError::Partial(self.failures))
        }
    }
}

pub fn fetch_shells(endpoint: &str, config: &FetchConfig) -> Result<FetchOutcome, IngestError> {
    let base = Url::parse(endpoint).map_err(|e| IngestError::Transport {
        url: endpoint.to_string(),
        message: format!("invalid endpoint: {e}"),
    })?;
    let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();

    let list_url = shell_url(&base, None)?;
    let listing = get_with_retry(&agent, &list_url, config)?;
    let ids: Vec<String> = serde_json::from_str(&listing).map_err(|e| IngestError::Transport {
        url: list_url.to_string(),
        message: format!("shell listing is not a JSON array of ids: {e}"),
    })?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let workers = config.parallelism.max(1).min(ids.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (agent, ids, next, base) = (&agent, &ids, &next, &base);
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some(id) = ids.get(index) else { break };
                let result = shell_url(base, Some(id))
                    .and_then(|url| get_with_retry(agent, &url, config))
                    .and_then(|text| {
                        parse_shell(&text).map_err(|source| IngestError::Shell {
                            id: id.clone(),
                            source,
                        })
                    });
                if tx.send((index, result)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut results: Vec<_> = rx.into_iter().collect();
    results.sort_by_key(|(index, _)| *index);
    let mut outcome = FetchOutcome::default();
    for (index, result) in results {
        match result {
            Ok(shell) => outcome.shells.push(shell),
            Err(error) => outcome.failures.push(ShellFailure {
                id: ids[index].clone(),
                error,
            }),
        }
    }
    Ok(outcome)
}

fn shell_url(base: &Url, id: Option<&str>) -> Result<Url, IngestError> {
    let mut url = base.clone();
    {
        let mut segments = url
            .path_segments_mut()
            .map_err(|_| IngestError::Transport {
                url: base.to_string(),
                message: "endpoint cannot be a base URL".into(),
            })?;
        segments.pop_if_empty().push("shells");
        if let Some(id) = id {
            segments.push(id);
        }
    }
    Ok(url)
}

fn get_with_retry(
    agent: &ureq::Agent,
    url: &Url,
    config: &FetchConfig,
) -> Result<String, IngestError> {
    let mut delay = config.initial_backoff;
    let mut attempt = 1;
    loop {
        let (retryable, message) = match agent.get(url.as_str()).call() {
            Ok(response) => match response.into_string() {
                Ok(body) => return Ok(body),
                Err(e) => (true, format!("reading body: {e}")),
            },
            Err(ureq::Error::Status(code, _)) => (code >= 500, format!("HTTP status {code}")),
            Err(ureq::Error::Transport(t)) => (true, t.to_string()),
        };
        if !retryable || attempt >= config.attempts {
            return Err(IngestError::Transport {
                url: url.to_string(),
                message: format!("{message} (after {attempt} attempt(s))"),
            });
        }
        thread::sleep(delay);
        delay *= 2;
        attempt += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_building_encodes_ids() {
        let base = Url::parse("http://localhost:8081/api/").unwrap();
        assert_eq!(
            shell_url(&base, None).unwrap().as_str(),
            "http://localhost:8081/api/shells"
        );
        assert_eq!(
            shell_url(&base, Some("urn:ptx/asset 1")).unwrap().as_str(),
            "http://localhost:8081/api/shells/urn:ptx%2Fasset%201"
        );
    }

    #[test]
    fn unreachable_server_fails_after_retries() {
        let config = FetchConfig {
            attempts: 2,
            initial_backoff: Duration::from_millis(1),
            ..FetchConfig::default()
        };
        // port 9 (discard) on localhost is normally closed
        let err = fetch_shells("http://127.0.0.1:9", &config).unwrap_err();
        assert!(
            matches!(err, IngestError::Transport { ref message, .. } if message.contains("2 attempt"))
        );
    }
}
