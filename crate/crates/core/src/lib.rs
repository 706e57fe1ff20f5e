//! biogate: an edge gateway library for wearable biosignal telemetry.
//!
//! Raw sensor streams (speech audio, ECG) are expensive to ship upstream;
//! the clinically useful part usually is not. This crate reduces signals
//! locally and uplinks only the reduced artifacts:
//!
//! - **DTW pattern indices** — subsequence search for a reference pattern
//!   with banded DP, envelope lower bounds, early abandoning and a
//!   waiting-window rule that keeps only the best match per window
//!   ([`dtw`]).
//! - **Clinical speech features** — per-recording average loudness (RMS)
//!   and average fundamental frequency from a multiplication-free AMDF
//!   pitch chain with median refinement ([`clip`]).
//! - **QRS event streams** — real-time Pan-Tompkins detection with RR
//!   intervals, streaming and chunk-invariant ([`qrs`]).
//! - **gzip / passthrough** — the lossless baselines ([`gateway`]).
//!
//! [`ingest`] decodes WAV, CSV, raw PCM and MIT-BIH format-212 sources;
//! [`gateway`] measures every reduction (bytes in, bytes out, percent,
//! wall clock), writes TSV session logs and delivers artifacts to
//! filesystem or HTTP sinks with retry and idempotency keys. The `bench`
//! module reproduces the reduction tables over a whole corpus, and [`synth`]
//! builds deterministic stand-in recordings when no corpus is at hand.
//!
//! The `examples/` directory is the tour: one runnable program per
//! capability. The `biogate` binary wraps the same code as subcommands.

pub mod bench;
pub mod cli;
pub mod clip;
pub mod dtw;
pub mod gateway;
pub mod ingest;
pub mod qrs;
pub mod synth;
pub mod timeseries;

pub use clip::{clip_process, FeatureRecord, PitchConfig};
pub use dtw::{
    dtw_distance, lb_keogh, subsequence_search, window_dedup, Band, DtwConfig, MatchEvent,
};
pub use gateway::{
    gzip_compress, gzip_decompress, reduce, reduction_percent, GatewayError, ReductionArtifact,
    ReductionReport, ReductionStrategy, Session, Sink, StrategyKind,
};
pub use ingest::{read_series, SourceDescriptor, SourceKind};
pub use qrs::{pan_tompkins, rr_intervals, QrsAnnotationSet, QrsDetector, RrSeries};
pub use timeseries::{Frame, TimeSeries};
