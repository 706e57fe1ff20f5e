//! Delivery to the cloud sink: content-addressed filesystem drops or HTTP
//! POST with retry, exponential backoff and an idempotency key derived from
//! the payload digest, so at-least-once delivery stays receiver-side
//! idempotent.

use std::path::PathBuf;
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::artifact::ContentKind;

#[derive(Debug, Error)]
pub enum UplinkError {
    #[error("rejected by sink: HTTP {status}")]
    RejectedBySink { status: u16 },
    #[error("delivery failed after {attempts} attempts: {}", trace.join("; "))]
    DeliveryFailed { attempts: u32, trace: Vec<String> },
    #[error("sink I/O failure: {0}")]
    Io(String),
    #[error("invalid sink uri: {0}")]
    BadUri(String),
}

/// Where artifacts go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sink {
    /// Content-addressed drop directory.
    Filesystem(PathBuf),
    /// POST endpoint; 2xx means accepted.
    Http(String),
}

impl Sink {
    /// `file:<dir>`, `http(s)://...`, or a bare path.
    pub fn parse(uri: &str) -> Result<Sink, UplinkError> {
        if let Some(rest) = uri.strip_prefix("file:") {
            if rest.is_empty() {
                return Err(UplinkError::BadUri(uri.into()));
            }
            return Ok(Sink::Filesystem(PathBuf::from(rest)));
        }
        if uri.starts_with("http://") || uri.starts_with("https://") {
            return Ok(Sink::Http(uri.to_string()));
        }
        if uri.is_empty() {
            return Err(UplinkError::BadUri(uri.into()));
        }
        Ok(Sink::Filesystem(PathBuf::from(uri)))
    }
}

/// Backoff schedule for transient sink failures.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub base_delay_ms: u64,
    pub factor: f64,
    pub max_attempts: u32,
    pub request_timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base_delay_ms: 1000,
            factor: 2.0,
            max_attempts: 5,
            request_timeout_ms: 10_000,
        }
    }
}

impl RetryPolicy {
    fn delay_before(&self, next_attempt: u32) -> Duration {
        // next_attempt is 2-based: the wait before the k-th retry
        let exp = (next_attempt.saturating_sub(2)) as i32;
        let ms = self.base_delay_ms as f64 * self.factor.powi(exp);
        Duration::from_millis(ms as u64)
    }
}

/// Proof of delivery.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryReceipt {
    pub destination: String,
    pub idempotency_key: String,
    pub attempts: u32,
    pub bytes_sent: u64,
    /// Idempotency key echoed by an HTTP sink, when it does.
    pub server_echo: Option<String>,
}

/// Hex SHA-256 of the payload; used as idempotency key and as the
/// content-addressed file name. Integrity only, not authentication.
pub fn payload_digest(payload: &[u8]) -> String {
    let digest = Sha256::digest(payload);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Delivers a serialized artifact to a sink.
///
/// Filesystem sinks write `<digest>.art` and return the path. HTTP sinks
/// POST `application/octet-stream` with idempotency-key, content-kind and
/// source-id headers; 5xx and transport errors retry with exponential
/// backoff, 4xx is a permanent rejection.
pub fn upload(
    payload: &[u8],
    content_kind: ContentKind,
    source_id: &str,
    sink: &Sink,
    policy: &RetryPolicy,
) -> Result<DeliveryReceipt, UplinkError> {
    let key = payload_digest(payload);
    match sink {
        Sink::Filesystem(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| UplinkError::Io(e.to_string()))?;
            let path = dir.join(format!("{key}.art"));
            std::fs::write(&path, payload).map_err(|e| UplinkError::Io(e.to_string()))?;
            Ok(DeliveryReceipt {
                destination: path.to_string_lossy().into_owned(),
                idempotency_key: key,
                attempts: 1,
                bytes_sent: payload.len() as u64,
                server_echo: None,
            })
        }
        Sink::Http(url) => {
            let mut trace = Vec::new();
            for attempt in 1..=policy.max_attempts {
                if attempt > 1 {
                    std::thread::sleep(policy.delay_before(attempt));
                }
                let response = ureq::post(url)
                    .timeout(Duration::from_millis(policy.request_timeout_ms))
                    .set("content-type", "application/octet-stream")
                    .set("idempotency-key", &key)
                    .set("x-content-kind", content_kind.as_str())
                    .set("x-source-id", source_id)
                    .send_bytes(payload);
                match response {
                    Ok(resp) if (200..300).contains(&resp.status()) => {
                        return Ok(DeliveryReceipt {
                            destination: url.clone(),
                            idempotency_key: key,
                            attempts: attempt,
                            bytes_sent: payload.len() as u64,
                            server_echo: resp.header("idempotency-key").map(str::to_string),
                        });
                    }
                    Ok(resp) => {
                        return Err(UplinkError::RejectedBySink {
                            status: resp.status(),
                        })
                    }
                    Err(ureq::Error::Status(code, _)) if (400..500).contains(&code) => {
                        return Err(UplinkError::RejectedBySink { status: code });
                    }
                    Err(ureq::Error::Status(code, _)) => {
                        trace.push(format!("attempt {attempt}: HTTP {code}"));
                    }
                    Err(ureq::Error::Transport(t)) => {
                        trace.push(format!("attempt {attempt}: {t}"));
                    }
                }
            }
            Err(UplinkError::DeliveryFailed {
                attempts: policy.max_attempts,
                trace,
            })
        }
    }
}

/// Work item for the background uploader.
#[derive(Debug)]
pub struct QueuedArtifact {
    pub payload: Vec<u8>,
    pub content_kind: ContentKind,
    pub source_id: String,
    /// Staged copy to remove once the sink issues a receipt.
    pub staged_path: Option<PathBuf>,
}

/// Bounded hand-off queue so the next reduction can overlap the current
/// upload. A full queue blocks the producer; artifacts are never dropped.
pub struct UploadQueue {
    tx: Option<SyncSender<QueuedArtifact>>,
    worker: Option<JoinHandle<Vec<Result<DeliveryReceipt, UplinkError>>>>,
}

impl UploadQueue {
    pub fn start(sink: Sink, policy: RetryPolicy, capacity: usize) -> UploadQueue {
        let (tx, rx) = sync_channel::<QueuedArtifact>(capacity.max(1));
        let worker = std::thread::spawn(move || {
            let mut results = Vec::new();
            while let Ok(item) = rx.recv() {
                let r = upload(
                    &item.payload,
                    item.content_kind,
                    &item.source_id,
                    &sink,
                    &policy,
                );
                if r.is_ok() {
                    if let Some(p) = &item.staged_path {
                        let _ = std::fs::remove_file(p);
                    }
                }
                results.push(r);
            }
            results
        });
        UploadQueue {
            tx: Some(tx),
            worker: Some(worker),
        }
    }

    /// Blocks when the queue is at capacity (back-pressure, not loss).
    pub fn submit(&self, item: QueuedArtifact) {
        self.tx
            .as_ref()
            .expect("queue not finished")
            .send(item)
            .expect("uploader thread alive");
    }

    /// Closes the queue and waits for every pending delivery.
    pub fn finish(mut self) -> Vec<Result<DeliveryReceipt, UplinkError>> {
        drop(self.tx.take());
        self.worker
            .take()
            .expect("finish called once")
            .join()
            .expect("uploader thread must not panic")
    }
}
