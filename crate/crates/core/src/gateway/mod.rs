//! Reduction session machinery: strategies, byte accounting, the gzip
//! codec, artifact serialization, session logs and the uplink.

pub mod artifact;
pub mod session;
pub mod uplink;

use std::io::{Read, Write};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::clip::{clip_process, ClipError, PitchConfig};
use crate::dtw::{
    best_subsequence_distance, subsequence_search, window_dedup, Band, DtwConfig, DtwError, Pruning,
};
use crate::ingest::{read_series, IngestError, SourceDescriptor, SourceKind};
use crate::qrs::{pan_tompkins, rr_intervals, QrsError};
use crate::timeseries::{frame, rms, Frame};

pub use artifact::{
    decode_artifact, serialize_artifact, ArtifactBody, ArtifactError, ContentKind,
    ReductionArtifact,
};
pub use session::{LogEvent, Session, SessionLogEntry};
pub use uplink::{DeliveryReceipt, RetryPolicy, Sink, UplinkError};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("strategy/source mismatch: {strategy} cannot apply to a {kind} source")]
    StrategySourceMismatch { strategy: String, kind: String },
    #[error("empty source")]
    EmptySource,
    #[error("corrupt gzip stream: {0}")]
    CorruptGzip(String),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Clip(#[from] ClipError),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error(transparent)]
    Qrs(#[from] QrsError),
    #[error(transparent)]
    Signal(#[from] crate::timeseries::SignalError),
    #[error(transparent)]
    Uplink(#[from] UplinkError),
    #[error("log I/O failure: {0}")]
    LogIo(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Strategy discriminant used in reports, logs and file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Clip,
    DtwIndex,
    QrsEvents,
    Gzip,
    Passthrough,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Clip => "clip",
            StrategyKind::DtwIndex => "dtw_index",
            StrategyKind::QrsEvents => "qrs_events",
            StrategyKind::Gzip => "gzip",
            StrategyKind::Passthrough => "passthrough",
        }
    }

    pub fn parse(s: &str) -> Option<StrategyKind> {
        match s {
            "clip" => Some(StrategyKind::Clip),
            "dtw_index" | "dtw-index" | "dtw" => Some(StrategyKind::DtwIndex),
            "qrs_events" | "qrs-events" | "qrs" => Some(StrategyKind::QrsEvents),
            "gzip" => Some(StrategyKind::Gzip),
            "passthrough" => Some(StrategyKind::Passthrough),
            _ => None,
        }
    }
}

/// Subsequence-index reduction settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwIndexConfig {
    /// Where the reference pattern starts in the stream; if absent, the
    /// loudest query-length frame is chosen.
    pub query_offset_ms: Option<f64>,
    pub query_len_ms: f64,
    /// Sakoe-Chiba radius as a fraction of the query length.
    pub band_fraction: f64,
    pub normalize: bool,
    /// Match threshold = this factor times the best non-overlapping
    /// in-stream distance.
    pub threshold_factor: f64,
    /// Waiting-window length in samples; defaults to one query length.
    pub dedup_window: Option<usize>,
    pub query_id: Option<String>,
}

impl Default for DtwIndexConfig {
    fn default() -> Self {
        DtwIndexConfig {
            query_offset_ms: None,
            query_len_ms: 40.0,
            band_fraction: 0.05,
            normalize: true,
            threshold_factor: 2.0,
            dedup_window: None,
            query_id: None,
        }
    }
}

/// How a source gets reduced before uplink.
#[derive(Debug, Clone, PartialEq)]
pub enum ReductionStrategy {
    Clip(PitchConfig),
    DtwIndex(DtwIndexConfig),
    QrsEvents,
    Gzip,
    Passthrough,
}

impl ReductionStrategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            ReductionStrategy::Clip(_) => StrategyKind::Clip,
            ReductionStrategy::DtwIndex(_) => StrategyKind::DtwIndex,
            ReductionStrategy::QrsEvents => StrategyKind::QrsEvents,
            ReductionStrategy::Gzip => StrategyKind::Gzip,
            ReductionStrategy::Passthrough => StrategyKind::Passthrough,
        }
    }

    pub fn default_for(kind: StrategyKind) -> ReductionStrategy {
        match kind {
            StrategyKind::Clip => ReductionStrategy::Clip(PitchConfig::default()),
            StrategyKind::DtwIndex => ReductionStrategy::DtwIndex(DtwIndexConfig::default()),
            StrategyKind::QrsEvents => ReductionStrategy::QrsEvents,
            StrategyKind::Gzip => ReductionStrategy::Gzip,
            StrategyKind::Passthrough => ReductionStrategy::Passthrough,
        }
    }
}

/// One row of the reduction accounting: bytes before, bytes after, the
/// percentage reduction and the processing wall clock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub source_id: String,
    pub strategy: StrategyKind,
    pub original_bytes: u64,
    pub reduced_bytes: u64,
    pub reduction_percent: f64,
    pub processing_seconds: f64,
}

/// 100 * (1 - reduced/original). Negative when a strategy expanded the
/// data, which is reported honestly rather than clamped.
pub fn reduction_percent(original_bytes: u64, reduced_bytes: u64) -> Result<f64, GatewayError> {
    if original_bytes == 0 {
        return Err(GatewayError::EmptySource);
    }
    Ok(100.0 * (1.0 - reduced_bytes as f64 / original_bytes as f64))
}

/// RFC 1952 single-member compression, default level.
pub fn gzip_compress(bytes: &[u8]) -> Vec<u8> {
    let mut enc = flate2::write::GzEncoder::new(
        Vec::with_capacity(bytes.len() / 2 + 64),
        flate2::Compression::default(),
    );
    enc.write_all(bytes).expect("writing to a Vec cannot fail");
    enc.finish()
        .expect("finishing an in-memory stream cannot fail")
}

/// Inverse of `gzip_compress`; any framing or CRC problem is an error.
pub fn gzip_decompress(bytes: &[u8]) -> Result<Vec<u8>, GatewayError> {
    let mut dec = flate2::read::GzDecoder::new(bytes);
    let mut out = Vec::new();
    dec.read_to_end(&mut out)
        .map_err(|e| GatewayError::CorruptGzip(e.to_string()))?;
    Ok(out)
}

fn audio_like(kind: SourceKind) -> bool {
    matches!(kind, SourceKind::Wav | SourceKind::RawPcm16)
}

fn ecg_like(kind: SourceKind) -> bool {
    matches!(kind, SourceKind::Mitbih212 | SourceKind::Csv)
}

/// Applies a strategy to a source and measures the outcome.
///
/// `original_bytes` is the exact on-disk size of the source;
/// `reduced_bytes` is the length of the serialized artifact, so the report
/// always recomputes from what actually travels to the sink.
/// `processing_seconds` covers the reduction work, not the source decode.
pub fn reduce(
    desc: &SourceDescriptor,
    strategy: &ReductionStrategy,
) -> Result<(ReductionArtifact, ReductionReport), GatewayError> {
    let source_id = desc.source_id();
    let mismatch = || GatewayError::StrategySourceMismatch {
        strategy: strategy.kind().as_str().into(),
        kind: desc.kind.as_str().into(),
    };

    let (artifact, original_bytes, processing_seconds) = match strategy {
        ReductionStrategy::Clip(cfg) => {
            if !audio_like(desc.kind) {
                return Err(mismatch());
            }
            let ingested = read_series(desc)?;
            let clock = Instant::now();
            let mut record = clip_process(&ingested.series, cfg)?;
            record.source_id = source_id.clone();
            let artifact = ReductionArtifact::new(ArtifactBody::Features(record), &source_id);
            (
                artifact,
                ingested.source_bytes,
                clock.elapsed().as_secs_f64(),
            )
        }
        ReductionStrategy::DtwIndex(cfg) => {
            let ingested = read_series(desc)?;
            let clock = Instant::now();
            let body = dtw_index_body(&ingested.series, cfg, &source_id)?;
            let artifact = ReductionArtifact::new(body, &source_id);
            (
                artifact,
                ingested.source_bytes,
                clock.elapsed().as_secs_f64(),
            )
        }
        ReductionStrategy::QrsEvents => {
            if !ecg_like(desc.kind) {
                return Err(mismatch());
            }
            let ingested = read_series(desc)?;
            let clock = Instant::now();
            let annotations = pan_tompkins(&ingested.series)?;
            let rr_ms = if annotations.len() >= 2 {
                rr_intervals(&annotations)?.intervals_ms
            } else {
                Vec::new()
            };
            let body = ArtifactBody::QrsEvents {
                sample_rate_hz: annotations.sample_rate_hz(),
                fiducials: annotations.fiducials().iter().map(|&f| f as u64).collect(),
                rr_ms,
            };
            let artifact = ReductionArtifact::new(body, &source_id);
            (
                artifact,
                ingested.source_bytes,
                clock.elapsed().as_secs_f64(),
            )
        }
        ReductionStrategy::Gzip => {
            let bytes = std::fs::read(&desc.path)?;
            if bytes.is_empty() {
                return Err(GatewayError::EmptySource);
            }
            let clock = Instant::now();
            let compressed = gzip_compress(&bytes);
            let artifact = ReductionArtifact::new(ArtifactBody::GzipMember(compressed), &source_id);
            (artifact, bytes.len() as u64, clock.elapsed().as_secs_f64())
        }
        ReductionStrategy::Passthrough => {
            let bytes = std::fs::read(&desc.path)?;
            if bytes.is_empty() {
                return Err(GatewayError::EmptySource);
            }
            let clock = Instant::now();
            let n = bytes.len() as u64;
            let artifact = ReductionArtifact::new(ArtifactBody::Raw(bytes), &source_id);
            (artifact, n, clock.elapsed().as_secs_f64())
        }
    };

    let reduced_bytes = serialize_artifact(&artifact).len() as u64;
    let report = ReductionReport {
        source_id,
        strategy: strategy.kind(),
        original_bytes,
        reduced_bytes,
        reduction_percent: reduction_percent(original_bytes, reduced_bytes)?,
        processing_seconds,
    };
    Ok((artifact, report))
}

fn dtw_index_body(
    series: &crate::timeseries::TimeSeries,
    cfg: &DtwIndexConfig,
    source_id: &str,
) -> Result<ArtifactBody, GatewayError> {
    let rate = series.sample_rate_hz();
    let m = ((cfg.query_len_ms / 1000.0 * rate).round() as usize).max(2);
    if series.len() < m {
        return Err(GatewayError::Dtw(DtwError::QueryTooLong {
            query: m,
            stream: series.len(),
        }));
    }

    let query_offset = match cfg.query_offset_ms {
        Some(ms) => ((ms / 1000.0 * rate).round() as usize).min(series.len() - m),
        None => loudest_frame_offset(series, m)?,
    };
    let query = Frame {
        start_index: query_offset,
        values: series.samples()[query_offset..query_offset + m].to_vec(),
        sample_rate_hz: rate,
    };
    let dtw_cfg = DtwConfig {
        band: Band::Radius(((m as f64) * cfg.band_fraction).ceil() as usize),
        normalize: cfg.normalize,
        pruning: Pruning::all(),
    };

    // threshold: a multiple of the best distance among windows that do not
    // overlap the reference pattern itself
    let exclude = query_offset.saturating_sub(m - 1)..(query_offset + m).min(series.len());
    let best = best_subsequence_distance(&query, series, &dtw_cfg, Some(exclude))?;
    let threshold = match best {
        Some((_, d)) => (cfg.threshold_factor * d).max(1e-12),
        None => 1e-12,
    };

    let query_id = cfg
        .query_id
        .clone()
        .unwrap_or_else(|| format!("{source_id}:q{query_offset}"));
    let matches = subsequence_search(&query, series, &dtw_cfg, threshold, &query_id)?;
    let kept = window_dedup(&matches, cfg.dedup_window.unwrap_or(m));
    Ok(ArtifactBody::MatchIndex {
        query_id,
        query_len: m as u32,
        events: kept,
    })
}

fn loudest_frame_offset(
    series: &crate::timeseries::TimeSeries,
    m: usize,
) -> Result<usize, GatewayError> {
    let hop = (m / 2).max(1);
    let frames = frame(series, m, hop)?;
    let mut best_off = 0;
    let mut best_rms = f64::NEG_INFINITY;
    for f in &frames {
        let r = rms(&f.values).expect("frames are non-empty");
        if r > best_rms {
            best_rms = r;
            best_off = f.start_index;
        }
    }
    Ok(best_off)
}
