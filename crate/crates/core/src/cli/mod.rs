//! Command-line surface. Exit codes: 0 success, 1 usage error,
//! 2 processing error, 3 delivery failure.

pub mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use crate::bench::{discover_corpus, rows_to_csv, run_bench, summaries_to_csv};
use crate::clip::clip_process;
use crate::dtw::{
    best_subsequence_distance, subsequence_search, window_dedup, Band, DtwConfig, Pruning,
};
use crate::gateway::uplink::UploadQueue;
use crate::gateway::{GatewayError, ReductionStrategy, Session, Sink, StrategyKind};
use crate::ingest::{read_series, SourceDescriptor, SourceKind};
use crate::qrs::{pan_tompkins, rr_intervals};
use crate::timeseries::{Frame, TimeSeries};
pub use config::FileConfig;

const USAGE: &str = "usage: biogate <command> [flags]

commands:
  reduce      --input <path> --strategy <kind> --sink <uri>
              [--config <path>] [--kind <source-kind>] [--rate <hz>]
              [--channel <n>] [--column <n>]
              run one reduction session and print the report as JSON

  bench       --corpus <dir> --strategies <a,b,c> [--out <dir>]
              [--jobs <n>] [--config <path>] [--rate <hz>]
              run every strategy on every corpus file; print summary CSV

  qrs         --input <path> [--start <sample>] [--length <samples>]
              [--rate <hz>] [--channel <n>] [--column <n>] [--kind <k>]
              print detected fiducials and RR intervals as CSV

  clip        --input <path> [--config <path>] [--channel <n>]
              [--rate <hz>] [--kind <k>]
              print the speech feature record as JSON

  dtw-search  --input <path> [--query <path>] [--query-offset-ms <ms>]
              [--query-len-ms <ms>] [--threshold <d>]
              [--threshold-factor <f>] [--dedup-window <samples>]
              [--rate <hz>] [--channel <n>] [--column <n>] [--config <path>]
              print matching offsets and distances as CSV

  serve       --watch <dir> --sink <uri> [--strategy <kind>]
              [--poll-ms <ms>] [--max-files <n>] [--queue-capacity <n>]
              [--config <path>] [--rate <hz>]
              process files as they appear until interrupted

strategy kinds: clip, dtw_index, qrs_events, gzip, passthrough
source kinds:   wav, csv, mitbih212, raw-pcm16 (inferred from extension)
sink uris:      file:<dir> or http(s)://host/path";

enum CliError {
    Usage(String),
    Processing(String),
    Delivery(String),
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> CliError {
        match e {
            GatewayError::Uplink(u) => CliError::Delivery(u.to_string()),
            other => CliError::Processing(other.to_string()),
        }
    }
}

/// Entry point behind the binary; returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            if msg.is_empty() {
                eprintln!("{USAGE}");
            } else {
                eprintln!("error: {msg}\n\n{USAGE}");
            }
            1
        }
        Err(CliError::Processing(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Delivery(msg)) => {
            eprintln!("delivery failed: {msg}");
            3
        }
    }
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let Some(command) = args.first() else {
        return Err(CliError::Usage(String::new()));
    };
    if command == "--help" || command == "-h" || command == "help" {
        println!("{USAGE}");
        return Ok(());
    }
    let rest = &args[1..];
    match command.as_str() {
        "reduce" => cmd_reduce(rest),
        "bench" => cmd_bench(rest),
        "qrs" => cmd_qrs(rest),
        "clip" => cmd_clip(rest),
        "dtw-search" => cmd_dtw_search(rest),
        "serve" => cmd_serve(rest),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

struct Flags(HashMap<String, String>);

impl Flags {
    fn parse(args: &[String], allowed: &[&str]) -> Result<Flags, CliError> {
        let mut map = HashMap::new();
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(name) = arg.strip_prefix("--") else {
                return Err(CliError::Usage(format!("unexpected argument {arg:?}")));
            };
            if !allowed.contains(&name) {
                return Err(CliError::Usage(format!("unknown flag --{name}")));
            }
            let value = it
                .next()
                .ok_or_else(|| CliError::Usage(format!("flag --{name} needs a value")))?;
            map.insert(name.to_string(), value.clone());
        }
        Ok(Flags(map))
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    fn required(&self, name: &str) -> Result<&str, CliError> {
        self.get(name)
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{name}")))
    }

    fn parse_num<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, CliError> {
        match self.get(name) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("flag --{name}: cannot parse {v:?}"))),
        }
    }
}

fn load_config(flags: &Flags) -> Result<FileConfig, CliError> {
    match flags.get("config") {
        None => Ok(FileConfig::default()),
        Some(p) => FileConfig::load(Path::new(p)).map_err(CliError::from),
    }
}

fn resolve_kind(path: &Path, flag: Option<&str>) -> Result<SourceKind, CliError> {
    if let Some(k) = flag {
        return match k {
            "wav" => Ok(SourceKind::Wav),
            "csv" => Ok(SourceKind::Csv),
            "mitbih212" | "212" => Ok(SourceKind::Mitbih212),
            "raw-pcm16" | "raw" => Ok(SourceKind::RawPcm16),
            other => Err(CliError::Usage(format!("unknown source kind {other:?}"))),
        };
    }
    SourceKind::from_extension(path).ok_or_else(|| {
        CliError::Usage(format!(
            "cannot infer source kind from {:?}; pass --kind",
            path.display()
        ))
    })
}

fn descriptor_from_flags(flags: &Flags, input: &str) -> Result<SourceDescriptor, CliError> {
    let path = PathBuf::from(input);
    let kind = resolve_kind(&path, flags.get("kind"))?;
    let mut desc = SourceDescriptor::new(kind, path);
    if let Some(rate) = flags.parse_num::<f64>("rate")? {
        desc = desc.with_rate(rate);
    }
    if let Some(ch) = flags.parse_num::<usize>("channel")? {
        desc = desc.with_channel(ch);
    }
    if let Some(col) = flags.parse_num::<usize>("column")? {
        desc = desc.with_csv_column(col);
    }
    Ok(desc)
}

fn strategy_from_flags(kind_text: &str, cfg: &FileConfig) -> Result<ReductionStrategy, CliError> {
    let kind = StrategyKind::parse(kind_text)
        .ok_or_else(|| CliError::Usage(format!("unknown strategy {kind_text:?}")))?;
    Ok(match kind {
        StrategyKind::Clip => ReductionStrategy::Clip(cfg.pitch_config()),
        StrategyKind::DtwIndex => ReductionStrategy::DtwIndex(cfg.dtw_config()),
        other => ReductionStrategy::default_for(other),
    })
}

fn session_dirs(cfg: &FileConfig) -> (PathBuf, PathBuf) {
    let log_dir = cfg
        .session
        .log_dir
        .as_deref()
        .unwrap_or("biogate-logs")
        .into();
    let staging = cfg
        .session
        .staging_dir
        .as_deref()
        .unwrap_or("biogate-staging")
        .into();
    (log_dir, staging)
}

fn cmd_reduce(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(
        args,
        &[
            "input", "strategy", "sink", "config", "kind", "rate", "channel", "column",
        ],
    )?;
    let cfg = load_config(&flags)?;
    let desc = descriptor_from_flags(&flags, flags.required("input")?)?;
    let strategy = strategy_from_flags(flags.required("strategy")?, &cfg)?;
    let sink = Sink::parse(flags.required("sink")?).map_err(|e| CliError::Usage(e.to_string()))?;
    let (log_dir, staging_dir) = session_dirs(&cfg);
    let mut session = Session::new(&log_dir, &staging_dir).map_err(CliError::from)?;
    if let Some(b) = cfg.session.battery_percent {
        session.set_battery_percent(Some(b));
    }
    let policy = cfg.retry_policy();
    let (report, receipt) = session
        .run(&desc, &strategy, &sink, &policy)
        .map_err(CliError::from)?;
    let line = serde_json::json!({
        "schema": "biogate.report.v1",
        "source_id": report.source_id,
        "strategy": report.strategy.as_str(),
        "original_bytes": report.original_bytes,
        "reduced_bytes": report.reduced_bytes,
        "reduction_percent": report.reduction_percent,
        "processing_seconds": report.processing_seconds,
        "delivered_to": receipt.destination,
        "attempts": receipt.attempts,
        "idempotency_key": receipt.idempotency_key,
        "session_log": session.log_path().to_string_lossy(),
    });
    println!("{line}");
    Ok(())
}

fn cmd_bench(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(
        args,
        &["corpus", "strategies", "out", "jobs", "config", "rate"],
    )?;
    let cfg = load_config(&flags)?;
    let corpus_dir = PathBuf::from(flags.required("corpus")?);
    let mut opts = cfg.bench_options();
    if let Some(rate) = flags.parse_num::<f64>("rate")? {
        opts.csv_rate_hz = rate;
    }
    if let Some(jobs) = flags.parse_num::<usize>("jobs")? {
        opts.jobs = jobs;
    }
    let strategies: Vec<StrategyKind> = flags
        .required("strategies")?
        .split(',')
        .map(|s| {
            StrategyKind::parse(s.trim())
                .ok_or_else(|| CliError::Usage(format!("unknown strategy {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if strategies.is_empty() {
        return Err(CliError::Usage("no strategies given".into()));
    }

    let corpus = discover_corpus(&corpus_dir, &opts).map_err(CliError::from)?;
    if corpus.is_empty() {
        return Err(CliError::Processing(format!(
            "no corpus files in {}",
            corpus_dir.display()
        )));
    }
    let output = run_bench(&corpus, &strategies, &opts).map_err(CliError::from)?;
    let rows_csv = rows_to_csv(&output.rows);
    let summary_csv = summaries_to_csv(&output.summaries);
    if let Some(out_dir) = flags.get("out") {
        let out_dir = PathBuf::from(out_dir);
        std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Processing(e.to_string()))?;
        std::fs::write(out_dir.join("per_file.csv"), &rows_csv)
            .map_err(|e| CliError::Processing(e.to_string()))?;
        std::fs::write(out_dir.join("summary.csv"), &summary_csv)
            .map_err(|e| CliError::Processing(e.to_string()))?;
    }
    print!("{summary_csv}");
    for s in &output.summaries {
        eprintln!(
            "{}: {} files, mean reduction {:.2}%, bytes transmitted {} of {}",
            s.strategy.as_str(),
            s.files,
            s.mean_reduction_percent,
            s.total_reduced_bytes,
            s.total_original_bytes
        );
    }
    Ok(())
}

fn sliced_series(series: TimeSeries, flags: &Flags) -> Result<TimeSeries, CliError> {
    let start = flags.parse_num::<usize>("start")?.unwrap_or(0);
    let length = flags.parse_num::<usize>("length")?;
    if start == 0 && length.is_none() {
        return Ok(series);
    }
    let end = match length {
        Some(l) => (start + l).min(series.len()),
        None => series.len(),
    };
    if start >= end {
        return Err(CliError::Processing(format!(
            "empty slice: start {start} beyond {} samples",
            series.len()
        )));
    }
    let rate = series.sample_rate_hz();
    let label = series.channel_label().to_string();
    let slice = series.samples()[start..end].to_vec();
    TimeSeries::new(slice, rate, label).map_err(|e| CliError::Processing(e.to_string()))
}

fn cmd_qrs(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(
        args,
        &[
            "input", "start", "length", "rate", "channel", "column", "kind",
        ],
    )?;
    let desc = descriptor_from_flags(&flags, flags.required("input")?)?;
    let ingested = read_series(&desc)
        .map_err(GatewayError::from)
        .map_err(CliError::from)?;
    let series = sliced_series(ingested.series, &flags)?;
    let annotations = pan_tompkins(&series)
        .map_err(GatewayError::from)
        .map_err(CliError::from)?;
    let rr = if annotations.len() >= 2 {
        rr_intervals(&annotations)
            .map_err(GatewayError::from)
            .map_err(CliError::from)?
            .intervals_ms
    } else {
        Vec::new()
    };
    let rate = annotations.sample_rate_hz();
    println!("fiducial_sample,time_s,rr_ms_to_next");
    for (i, &f) in annotations.fiducials().iter().enumerate() {
        let rr_text = rr.get(i).map(|v| v.to_string()).unwrap_or_default();
        println!("{},{},{}", f, f as f64 / rate, rr_text);
    }
    Ok(())
}

fn cmd_clip(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(args, &["input", "config", "channel", "rate", "kind"])?;
    let cfg = load_config(&flags)?;
    let desc = descriptor_from_flags(&flags, flags.required("input")?)?;
    let ingested = read_series(&desc)
        .map_err(GatewayError::from)
        .map_err(CliError::from)?;
    let mut record = clip_process(&ingested.series, &cfg.pitch_config())
        .map_err(GatewayError::from)
        .map_err(CliError::from)?;
    record.source_id = desc.source_id();
    let line = serde_json::json!({
        "schema": "biogate.features.v1",
        "record": record,
        "source_bytes": ingested.source_bytes,
    });
    println!("{line}");
    Ok(())
}

fn cmd_dtw_search(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(
        args,
        &[
            "input",
            "query",
            "query-offset-ms",
            "query-len-ms",
            "threshold",
            "threshold-factor",
            "dedup-window",
            "rate",
            "channel",
            "column",
            "config",
        ],
    )?;
    let cfg = load_config(&flags)?;
    let dtw_defaults = cfg.dtw_config();
    let desc = descriptor_from_flags(&flags, flags.required("input")?)?;
    let ingested = read_series(&desc)
        .map_err(GatewayError::from)
        .map_err(CliError::from)?;
    let stream = ingested.series;
    let rate = stream.sample_rate_hz();

    let query_len_ms = flags
        .parse_num::<f64>("query-len-ms")?
        .unwrap_or(dtw_defaults.query_len_ms);
    let m = ((query_len_ms / 1000.0 * rate).round() as usize).max(2);

    let (query, self_range) = match flags.get("query") {
        Some(qpath) => {
            let qdesc = descriptor_from_flags(&flags, qpath)?;
            let q = read_series(&qdesc)
                .map_err(GatewayError::from)
                .map_err(CliError::from)?;
            if (q.series.sample_rate_hz() - rate).abs() > 1e-9 {
                return Err(CliError::Processing(format!(
                    "query rate {} Hz differs from stream rate {rate} Hz",
                    q.series.sample_rate_hz()
                )));
            }
            let frame = Frame {
                start_index: 0,
                values: q.series.samples().to_vec(),
                sample_rate_hz: q.series.sample_rate_hz(),
            };
            (frame, None)
        }
        None => {
            let offset = match flags.parse_num::<f64>("query-offset-ms")? {
                Some(ms) => {
                    ((ms / 1000.0 * rate).round() as usize).min(stream.len().saturating_sub(m))
                }
                None => 0,
            };
            if stream.len() < m {
                return Err(CliError::Processing(format!(
                    "stream of {} samples shorter than query of {m}",
                    stream.len()
                )));
            }
            let frame = Frame {
                start_index: offset,
                values: stream.samples()[offset..offset + m].to_vec(),
                sample_rate_hz: rate,
            };
            let lo = offset.saturating_sub(m - 1);
            (frame, Some(lo..(offset + m).min(stream.len())))
        }
    };

    let dtw_cfg = DtwConfig {
        band: Band::Radius(((query.len() as f64) * dtw_defaults.band_fraction).ceil() as usize),
        normalize: dtw_defaults.normalize,
        pruning: Pruning::all(),
    };
    let threshold = match flags.parse_num::<f64>("threshold")? {
        Some(t) => t,
        None => {
            let factor = flags
                .parse_num::<f64>("threshold-factor")?
                .unwrap_or(dtw_defaults.threshold_factor);
            let best = best_subsequence_distance(&query, &stream, &dtw_cfg, self_range)
                .map_err(GatewayError::from)
                .map_err(CliError::from)?;
            match best {
                Some((_, d)) => (factor * d).max(1e-12),
                None => 1e-12,
            }
        }
    };

    let matches = subsequence_search(&query, &stream, &dtw_cfg, threshold, &desc.source_id())
        .map_err(GatewayError::from)
        .map_err(CliError::from)?;
    let matches = match flags.parse_num::<usize>("dedup-window")? {
        Some(w) => window_dedup(&matches, w),
        None => matches,
    };
    println!("offset,time_s,distance");
    for m in &matches {
        println!("{},{},{}", m.offset, m.offset as f64 / rate, m.distance);
    }
    Ok(())
}

static STOP: AtomicBool = AtomicBool::new(false);

extern "C" fn on_interrupt(_sig: libc::c_int) {
    STOP.store(true, Ordering::SeqCst);
}

fn install_interrupt_handler() {
    unsafe {
        libc::signal(libc::SIGINT, on_interrupt as *const () as usize);
        libc::signal(libc::SIGTERM, on_interrupt as *const () as usize);
    }
}

fn infer_serve_strategy(kind: SourceKind, cfg: &FileConfig) -> ReductionStrategy {
    match kind {
        SourceKind::Wav | SourceKind::RawPcm16 => ReductionStrategy::Clip(cfg.pitch_config()),
        SourceKind::Csv | SourceKind::Mitbih212 => ReductionStrategy::QrsEvents,
    }
}

fn cmd_serve(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(
        args,
        &[
            "watch",
            "sink",
            "strategy",
            "poll-ms",
            "max-files",
            "queue-capacity",
            "config",
            "rate",
        ],
    )?;
    let cfg = load_config(&flags)?;
    let watch_dir = PathBuf::from(flags.required("watch")?);
    let sink = Sink::parse(flags.required("sink")?).map_err(|e| CliError::Usage(e.to_string()))?;
    let poll_ms = flags.parse_num::<u64>("poll-ms")?.unwrap_or(500);
    let max_files = flags.parse_num::<usize>("max-files")?;
    let capacity = flags.parse_num::<usize>("queue-capacity")?.unwrap_or(8);
    let fixed_strategy = flags
        .get("strategy")
        .map(|s| strategy_from_flags(s, &cfg))
        .transpose()?;
    let declared_rate = flags.parse_num::<f64>("rate")?;

    let (log_dir, staging_dir) = session_dirs(&cfg);
    let mut session = Session::new(&log_dir, &staging_dir).map_err(CliError::from)?;
    if let Some(b) = cfg.session.battery_percent {
        session.set_battery_percent(Some(b));
    }
    let queue = UploadQueue::start(sink, cfg.retry_policy(), capacity);
    install_interrupt_handler();

    let mut sizes: HashMap<PathBuf, u64> = HashMap::new();
    let mut processed: Vec<PathBuf> = Vec::new();
    let mut submitted: Vec<String> = Vec::new();
    let mut failures = 0usize;
    eprintln!(
        "watching {} (session log {})",
        watch_dir.display(),
        session.log_path().display()
    );
    'outer: loop {
        if STOP.load(Ordering::SeqCst) {
            break;
        }
        let entries = std::fs::read_dir(&watch_dir)
            .map_err(|e| CliError::Processing(format!("{}: {e}", watch_dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file() && SourceKind::from_extension(p).is_some())
            .collect();
        paths.sort();
        for path in paths {
            if processed.contains(&path) {
                continue;
            }
            let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
            match sizes.get(&path) {
                // wait until the writer finished: size stable across polls
                Some(&prev) if prev == size && size > 0 => {
                    let kind = SourceKind::from_extension(&path).expect("filtered");
                    let mut desc = SourceDescriptor::new(kind, &path);
                    if let Some(r) = declared_rate {
                        desc = desc.with_rate(r);
                    }
                    let strategy = fixed_strategy
                        .clone()
                        .unwrap_or_else(|| infer_serve_strategy(kind, &cfg));
                    let source_id = desc.source_id();
                    match session.reduce_and_stage(&desc, &strategy) {
                        Ok((report, item)) => {
                            eprintln!(
                                "reduced {} with {}: {:.2}%",
                                source_id,
                                report.strategy.as_str(),
                                report.reduction_percent
                            );
                            queue.submit(item);
                            submitted.push(source_id);
                        }
                        Err(e) => {
                            eprintln!("failed on {}: {e}", path.display());
                            failures += 1;
                        }
                    }
                    processed.push(path.clone());
                    if let Some(max) = max_files {
                        if processed.len() >= max {
                            break 'outer;
                        }
                    }
                }
                _ => {
                    sizes.insert(path, size);
                }
            }
            if STOP.load(Ordering::SeqCst) {
                break 'outer;
            }
        }
        std::thread::sleep(std::time::Duration::from_millis(poll_ms));
    }

    // drain pending uploads before exiting
    let results = queue.finish();
    let mut delivery_failures = 0usize;
    for (result, source_id) in results.iter().zip(&submitted) {
        match result {
            Ok(receipt) => session.log_upload_receipt(source_id, receipt),
            Err(e) => {
                session.log_error(source_id, &e.to_string());
                delivery_failures += 1;
            }
        }
    }
    eprintln!(
        "served {} files, {} bytes uplinked, stopping cleanly",
        processed.len(),
        session.bytes_uplinked()
    );
    if delivery_failures > 0 {
        return Err(CliError::Delivery(format!(
            "{delivery_failures} artifacts undelivered"
        )));
    }
    if failures > 0 {
        return Err(CliError::Processing(format!(
            "{failures} files failed to reduce"
        )));
    }
    Ok(())
}
