//! Corpus benchmark: every strategy over every file, with per-file rows and
//! a per-strategy summary table. Output order is deterministic regardless
//! of the worker count; only the timing columns vary between runs.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::clip::PitchConfig;
use crate::gateway::{reduce, DtwIndexConfig, GatewayError, ReductionStrategy, StrategyKind};
use crate::ingest::{SourceDescriptor, SourceKind};

/// One (file, strategy) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub file: String,
    pub strategy: StrategyKind,
    pub original_bytes: u64,
    pub reduced_bytes: u64,
    pub reduction_percent: f64,
    pub processing_seconds: f64,
}

/// Per-strategy aggregate; `total_reduced_bytes` is the bytes-transmitted
/// proxy that stands in for transmit-power measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub strategy: StrategyKind,
    pub files: usize,
    pub mean_reduction_percent: f64,
    pub min_reduction_percent: f64,
    pub max_reduction_percent: f64,
    pub total_original_bytes: u64,
    pub total_reduced_bytes: u64,
    pub total_processing_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<BenchSummary>,
}

/// Settings shared by every bench run.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Declared rate for csv and raw sources, which carry none themselves.
    pub csv_rate_hz: f64,
    pub jobs: usize,
    pub clip: PitchConfig,
    pub dtw: DtwIndexConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            csv_rate_hz: 360.0,
            jobs: 1,
            clip: PitchConfig::default(),
            dtw: DtwIndexConfig::default(),
        }
    }
}

/// Collects decodable files of a corpus directory in name order.
/// Companion `.hea` headers are not sources themselves.
pub fn discover_corpus(
    dir: &Path,
    opts: &BenchOptions,
) -> Result<Vec<SourceDescriptor>, GatewayError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let Some(kind) = SourceKind::from_extension(&p) else {
            continue;
        };
        let mut desc = SourceDescriptor::new(kind, &p);
        if matches!(kind, SourceKind::Csv | SourceKind::RawPcm16) {
            desc = desc.with_rate(opts.csv_rate_hz);
        }
        out.push(desc);
    }
    Ok(out)
}

fn strategy_for(kind: StrategyKind, opts: &BenchOptions) -> ReductionStrategy {
    match kind {
        StrategyKind::Clip => ReductionStrategy::Clip(opts.clip.clone()),
        StrategyKind::DtwIndex => ReductionStrategy::DtwIndex(opts.dtw.clone()),
        other => ReductionStrategy::default_for(other),
    }
}

/// Runs every strategy on every corpus file. Files may be processed in
/// parallel up to `opts.jobs`; rows come back in (file, strategy) order.
pub fn run_bench(
    corpus: &[SourceDescriptor],
    strategies: &[StrategyKind],
    opts: &BenchOptions,
) -> Result<BenchOutput, GatewayError> {
    let tasks: Vec<(usize, &SourceDescriptor, StrategyKind)> = corpus
        .iter()
        .flat_map(|d| strategies.iter().map(move |s| (d, *s)))
        .enumerate()
        .map(|(i, (d, s))| (i, d, s))
        .collect();

    let slots: Mutex<Vec<Option<Result<BenchRow, String>>>> = Mutex::new(vec![None; tasks.len()]);
    let next = AtomicUsize::new(0);
    let workers = opts.jobs.max(1).min(tasks.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let (slot, desc, kind) = tasks[i];
                let result = reduce(desc, &strategy_for(kind, opts))
                    .map(|(_, report)| BenchRow {
                        file: desc
                            .path
                            .file_name()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_default(),
                        strategy: kind,
                        original_bytes: report.original_bytes,
                        reduced_bytes: report.reduced_bytes,
                        reduction_percent: report.reduction_percent,
                        processing_seconds: report.processing_seconds,
                    })
                    .map_err(|e| format!("{}: {e}", desc.path.display()));
                slots.lock().expect("no poisoned workers")[slot] = Some(result);
            });
        }
    });

    let mut rows = Vec::with_capacity(tasks.len());
    for r in slots.into_inner().expect("workers joined") {
        match r.expect("every task ran") {
            Ok(row) => rows.push(row),
            Err(msg) => return Err(GatewayError::Config(format!("bench task failed: {msg}"))),
        }
    }

    let summaries = summarize(&rows, strategies);
    Ok(BenchOutput { rows, summaries })
}

fn summarize(rows: &[BenchRow], strategies: &[StrategyKind]) -> Vec<BenchSummary> {
    strategies
        .iter()
        .map(|&strategy| {
            let picked: Vec<&BenchRow> = rows.iter().filter(|r| r.strategy == strategy).collect();
            let files = picked.len();
            let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            let (mut tot_in, mut tot_out, mut tot_s) = (0u64, 0u64, 0.0);
            for r in &picked {
                min = min.min(r.reduction_percent);
                max = max.max(r.reduction_percent);
                sum += r.reduction_percent;
                tot_in += r.original_bytes;
                tot_out += r.reduced_bytes;
                tot_s += r.processing_seconds;
            }
            BenchSummary {
                strategy,
                files,
                mean_reduction_percent: if files > 0 { sum / files as f64 } else { 0.0 },
                min_reduction_percent: if files > 0 { min } else { 0.0 },
                max_reduction_percent: if files > 0 { max } else { 0.0 },
                total_original_bytes: tot_in,
                total_reduced_bytes: tot_out,
                total_processing_seconds: tot_s,
            }
        })
        .collect()
}

/// Per-file table. Floats use shortest round-trip formatting so the
/// percentage column recomputes exactly from the byte columns.
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "file,strategy,original_bytes,reduced_bytes,reduction_percent,processing_seconds\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.file,
            r.strategy.as_str(),
            r.original_bytes,
            r.reduced_bytes,
            r.reduction_percent,
            r.processing_seconds
        ));
    }
    out
}

/// Per-strategy summary table.
pub fn summaries_to_csv(summaries: &[BenchSummary]) -> String {
    let mut out = String::from(
        "strategy,files,mean_reduction_percent,min_reduction_percent,max_reduction_percent,total_original_bytes,total_reduced_bytes,total_processing_seconds\n",
    );
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.strategy.as_str(),
            s.files,
            s.mean_reduction_percent,
            s.min_reduction_percent,
            s.max_reduction_percent,
            s.total_original_bytes,
            s.total_reduced_bytes,
            s.total_processing_seconds
        ));
    }
    out
}
