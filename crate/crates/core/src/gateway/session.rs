//! Reduction sessions: one logical thread of control that ingests, reduces,
//! logs and uplinks, with a tab-separated session log file that spreadsheet
//! tools open directly.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::uplink::{upload, DeliveryReceipt, QueuedArtifact, RetryPolicy, Sink};
use super::{reduce, GatewayError, ReductionReport, ReductionStrategy};
use crate::gateway::artifact::serialize_artifact;
use crate::ingest::SourceDescriptor;

/// Session log event taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEvent {
    Ingest,
    Reduce,
    Upload,
    Error,
}

impl LogEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            LogEvent::Ingest => "ingest",
            LogEvent::Reduce => "reduce",
            LogEvent::Upload => "upload",
            LogEvent::Error => "error",
        }
    }
}

/// One line of the session log.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLogEntry {
    pub timestamp_ms: u64,
    pub event: LogEvent,
    pub source_id: String,
    pub bytes_in: u64,
    pub bytes_out: u64,
    /// Absent on desk-class gateways; written as an empty field, not zero.
    pub battery_percent: Option<u8>,
    pub detail: String,
}

impl SessionLogEntry {
    /// Seven tab-separated fields, ISO-8601 timestamp first. Tabs and
    /// newlines inside detail are flattened so one entry stays one line.
    pub fn to_tsv_line(&self) -> String {
        let battery = self
            .battery_percent
            .map(|b| b.to_string())
            .unwrap_or_default();
        let detail = self.detail.replace(['\t', '\n', '\r'], " ");
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            iso8601_utc_ms(self.timestamp_ms),
            self.event.as_str(),
            self.source_id,
            self.bytes_in,
            self.bytes_out,
            battery,
            detail
        )
    }
}

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// ISO-8601 UTC with millisecond precision, e.g. `2026-08-08T12:00:00.000Z`.
pub fn iso8601_utc_ms(unix_ms: u64) -> String {
    let days = (unix_ms / 86_400_000) as i64;
    let rem = unix_ms % 86_400_000;
    let (h, min, s, ms) = (
        rem / 3_600_000,
        rem / 60_000 % 60,
        rem / 1000 % 60,
        rem % 1000,
    );
    // Gregorian civil date from days since epoch
    let z = days + 719_468;
    let era = z / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if m <= 2 { y + 1 } else { y };
    format!("{y:04}-{m:02}-{d:02}T{h:02}:{min:02}:{s:02}.{ms:03}Z")
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(0);

/// A reduction session: owns its log file and staging directory and runs
/// ingest -> reduce -> log -> upload in order. Log write failures are
/// counted but never abort the pipeline.
#[derive(Debug)]
pub struct Session {
    id: String,
    log_path: PathBuf,
    staging_dir: PathBuf,
    last_timestamp_ms: u64,
    battery_percent: Option<u8>,
    log_failures: usize,
    bytes_uplinked: u64,
    artifact_seq: u64,
}

impl Session {
    pub fn new(log_dir: &Path, staging_dir: &Path) -> Result<Session, GatewayError> {
        std::fs::create_dir_all(log_dir)?;
        std::fs::create_dir_all(staging_dir)?;
        let seq = SESSION_COUNTER.fetch_add(1, Ordering::Relaxed);
        let id = format!("{}-{}-{}", now_ms(), std::process::id(), seq);
        let log_path = log_dir.join(format!("{id}.log.tsv"));
        let battery_percent = std::env::var("BIOGATE_BATTERY_PERCENT")
            .ok()
            .and_then(|v| v.parse::<u8>().ok())
            .filter(|v| *v <= 100);
        Ok(Session {
            id,
            log_path,
            staging_dir: staging_dir.to_path_buf(),
            last_timestamp_ms: 0,
            battery_percent,
            log_failures: 0,
            bytes_uplinked: 0,
            artifact_seq: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn set_battery_percent(&mut self, value: Option<u8>) {
        self.battery_percent = value;
    }

    pub fn log_failures(&self) -> usize {
        self.log_failures
    }

    /// Total payload bytes delivered over this session; the bandwidth (and
    /// hence transmit-energy) proxy.
    pub fn bytes_uplinked(&self) -> u64 {
        self.bytes_uplinked
    }

    /// Appends one entry. Timestamps are clamped to be non-decreasing
    /// within the file.
    pub fn write_log(&mut self, entry: &SessionLogEntry) -> Result<(), GatewayError> {
        let mut entry = entry.clone();
        entry.timestamp_ms = entry.timestamp_ms.max(self.last_timestamp_ms);
        self.last_timestamp_ms = entry.timestamp_ms;
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.log_path)
            .map_err(|e| GatewayError::LogIo(e.to_string()))?;
        file.write_all(entry.to_tsv_line().as_bytes())
            .map_err(|e| GatewayError::LogIo(e.to_string()))
    }

    fn log_event(
        &mut self,
        event: LogEvent,
        source_id: &str,
        bytes_in: u64,
        bytes_out: u64,
        detail: impl Into<String>,
    ) {
        let entry = SessionLogEntry {
            timestamp_ms: now_ms(),
            event,
            source_id: source_id.to_string(),
            bytes_in,
            bytes_out,
            battery_percent: self.battery_percent,
            detail: detail.into(),
        };
        if self.write_log(&entry).is_err() {
            self.log_failures += 1;
        }
    }

    /// Ingest + reduce + stage, leaving delivery to an external uploader
    /// (the bounded hand-off queue in watch mode). The staged path travels
    /// with the work item so the uploader can release it after the receipt.
    pub fn reduce_and_stage(
        &mut self,
        desc: &SourceDescriptor,
        strategy: &ReductionStrategy,
    ) -> Result<(ReductionReport, QueuedArtifact), GatewayError> {
        let source_id = desc.source_id();
        let source_bytes = std::fs::metadata(&desc.path).map(|m| m.len()).unwrap_or(0);
        self.log_event(
            LogEvent::Ingest,
            &source_id,
            source_bytes,
            0,
            desc.kind.as_str(),
        );
        let (artifact, report) = match reduce(desc, strategy) {
            Ok(v) => v,
            Err(e) => {
                self.log_event(LogEvent::Error, &source_id, source_bytes, 0, e.to_string());
                return Err(e);
            }
        };
        self.log_event(
            LogEvent::Reduce,
            &source_id,
            report.original_bytes,
            report.reduced_bytes,
            format!(
                "{} {:.2}%",
                report.strategy.as_str(),
                report.reduction_percent
            ),
        );
        let payload = serialize_artifact(&artifact);
        self.artifact_seq += 1;
        let staged = self
            .staging_dir
            .join(format!("{}-{:06}.art", self.id, self.artifact_seq));
        std::fs::write(&staged, &payload)?;
        Ok((
            report,
            QueuedArtifact {
                payload,
                content_kind: artifact.content_kind(),
                source_id,
                staged_path: Some(staged),
            },
        ))
    }

    /// Records a delivery that an external uploader completed.
    pub fn log_upload_receipt(&mut self, source_id: &str, receipt: &DeliveryReceipt) {
        self.bytes_uplinked += receipt.bytes_sent;
        self.log_event(
            LogEvent::Upload,
            source_id,
            0,
            receipt.bytes_sent,
            format!("{} attempts={}", receipt.destination, receipt.attempts),
        );
    }

    /// Records a failure against the session log.
    pub fn log_error(&mut self, source_id: &str, detail: &str) {
        self.log_event(LogEvent::Error, source_id, 0, 0, detail);
    }

    /// One full reduction: ingest, reduce, stage, deliver, then release the
    /// staged artifact. The staged copy is removed only after the sink has
    /// issued a receipt.
    pub fn run(
        &mut self,
        desc: &SourceDescriptor,
        strategy: &ReductionStrategy,
        sink: &Sink,
        policy: &RetryPolicy,
    ) -> Result<(ReductionReport, DeliveryReceipt), GatewayError> {
        let source_id = desc.source_id();
        let source_bytes = std::fs::metadata(&desc.path).map(|m| m.len()).unwrap_or(0);
        self.log_event(
            LogEvent::Ingest,
            &source_id,
            source_bytes,
            0,
            desc.kind.as_str(),
        );

        let (artifact, report) = match reduce(desc, strategy) {
            Ok(v) => v,
            Err(e) => {
                self.log_event(LogEvent::Error, &source_id, source_bytes, 0, e.to_string());
                return Err(e);
            }
        };
        self.log_event(
            LogEvent::Reduce,
            &source_id,
            report.original_bytes,
            report.reduced_bytes,
            format!(
                "{} {:.2}%",
                report.strategy.as_str(),
                report.reduction_percent
            ),
        );

        let payload = serialize_artifact(&artifact);
        self.artifact_seq += 1;
        let staged = self
            .staging_dir
            .join(format!("{}-{:06}.art", self.id, self.artifact_seq));
        if let Err(e) = std::fs::write(&staged, &payload) {
            let err = GatewayError::Io(e);
            self.log_event(LogEvent::Error, &source_id, 0, 0, err.to_string());
            return Err(err);
        }

        match upload(&payload, artifact.content_kind(), &source_id, sink, policy) {
            Ok(receipt) => {
                // delivered: the gateway keeps no copy
                let _ = std::fs::remove_file(&staged);
                self.bytes_uplinked += payload.len() as u64;
                self.log_event(
                    LogEvent::Upload,
                    &source_id,
                    0,
                    payload.len() as u64,
                    format!("{} attempts={}", receipt.destination, receipt.attempts),
                );
                Ok((report, receipt))
            }
            Err(e) => {
                self.log_event(LogEvent::Error, &source_id, 0, 0, e.to_string());
                Err(GatewayError::Uplink(e))
            }
        }
    }
}
