//! Source decoding: 16-bit PCM WAV, numeric CSV, MIT-BIH format-212 pairs
//! and raw PCM, all into `TimeSeries`, plus a pull-based chunk stream that
//! stands in for a live sensor feed.
//!
//! Every reader records the exact on-disk byte count of its source; those
//! bytes are the denominator of every reduction percentage downstream.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::timeseries::{SignalError, TimeSeries};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt container: {0}")]
    CorruptContainer(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("parse error at line {line}: {detail}")]
    ParseError { line: usize, detail: String },
    #[error("no samples in source")]
    NoSamples,
    #[error("sample rate must be declared for this source kind")]
    MissingSampleRate,
    #[error("truncated record: {0} bytes is not a multiple of 3")]
    TruncatedRecord(u64),
    #[error("header parse failure: {0}")]
    HeaderParse(String),
    #[error("channel {requested} not available ({available} channels)")]
    BadChannel { requested: usize, available: usize },
    #[error("decode failure in chunk starting at sample {start_offset}: {detail}")]
    ChunkFailure { start_offset: usize, detail: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What a source is and how to decode it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Wav,
    Csv,
    Mitbih212,
    RawPcm16,
}

impl SourceKind {
    pub fn from_extension(path: &Path) -> Option<SourceKind> {
        match path.extension()?.to_str()? {
            "wav" => Some(SourceKind::Wav),
            "csv" | "txt" => Some(SourceKind::Csv),
            "dat" => Some(SourceKind::Mitbih212),
            "pcm" | "raw" => Some(SourceKind::RawPcm16),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Wav => "wav",
            SourceKind::Csv => "csv",
            SourceKind::Mitbih212 => "mitbih212",
            SourceKind::RawPcm16 => "raw-pcm16",
        }
    }
}

/// A decodable source: kind, location and the parameters the container
/// itself does not carry.
#[derive(Debug, Clone)]
pub struct SourceDescriptor {
    pub kind: SourceKind,
    pub path: PathBuf,
    /// Required for csv and raw-pcm16; wav and mitbih212 read it from
    /// their own headers.
    pub declared_rate_hz: Option<f64>,
    pub channel: usize,
    pub csv_column: usize,
}

impl SourceDescriptor {
    pub fn new(kind: SourceKind, path: impl Into<PathBuf>) -> Self {
        SourceDescriptor {
            kind,
            path: path.into(),
            declared_rate_hz: None,
            channel: 0,
            csv_column: 0,
        }
    }

    pub fn with_rate(mut self, rate_hz: f64) -> Self {
        self.declared_rate_hz = Some(rate_hz);
        self
    }

    pub fn with_channel(mut self, channel: usize) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_csv_column(mut self, column: usize) -> Self {
        self.csv_column = column;
        self
    }

    /// Source identifier used in artifacts and logs: the file stem.
    pub fn source_id(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.to_string_lossy().into_owned())
    }
}

/// A decoded series together with its exact on-disk byte count.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub series: TimeSeries,
    pub source_bytes: u64,
}

/// Decodes a descriptor into a single-channel series.
pub fn read_series(desc: &SourceDescriptor) -> Result<Ingested, IngestError> {
    match desc.kind {
        SourceKind::Wav => read_wav(&desc.path, desc.channel),
        SourceKind::Csv => {
            let rate = desc
                .declared_rate_hz
                .ok_or(IngestError::MissingSampleRate)?;
            read_csv(&desc.path, desc.csv_column, rate)
        }
        SourceKind::Mitbih212 => {
            let rec = read_mitbih_212(&desc.path)?;
            let available = rec.channels.len();
            let series =
                rec.channels
                    .into_iter()
                    .nth(desc.channel)
                    .ok_or(IngestError::BadChannel {
                        requested: desc.channel,
                        available,
                    })?;
            Ok(Ingested {
                series,
                source_bytes: rec.source_bytes,
            })
        }
        SourceKind::RawPcm16 => {
            let rate = desc
                .declared_rate_hz
                .ok_or(IngestError::MissingSampleRate)?;
            read_raw_pcm16(&desc.path, rate)
        }
    }
}

// --- WAV -------------------------------------------------------------

struct WavFormat {
    channels: u16,
    sample_rate: u32,
    data_offset: usize,
    data_len: usize,
}

fn parse_wav_header(bytes: &[u8], path: &Path) -> Result<WavFormat, IngestError> {
    let corrupt = |d: &str| IngestError::CorruptContainer(format!("{}: {d}", path.display()));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt("not a RIFF/WAVE file"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<(usize, usize)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if body + 16 > bytes.len() {
                    return Err(corrupt("fmt chunk truncated"));
                }
                let audio_format = u16::from_le_bytes([bytes[body], bytes[body + 1]]);
                let channels = u16::from_le_bytes([bytes[body + 2], bytes[body + 3]]);
                let sample_rate = u32::from_le_bytes(bytes[body + 4..body + 8].try_into().unwrap());
                let bits = u16::from_le_bytes([bytes[body + 14], bytes[body + 15]]);
                fmt = Some((audio_format, channels, sample_rate, bits));
            }
            b"data" => {
                if body + size > bytes.len() {
                    return Err(corrupt("data chunk declares more bytes than present"));
                }
                data = Some((body, size));
            }
            _ => {}
        }
        // chunks are word-aligned
        pos = body + size + (size & 1);
    }
    let (audio_format, channels, sample_rate, bits) =
        fmt.ok_or_else(|| corrupt("missing fmt chunk"))?;
    if audio_format != 1 {
        return Err(IngestError::UnsupportedEncoding(format!(
            "audio format {audio_format}, only PCM (1) is supported"
        )));
    }
    if bits != 16 {
        return Err(IngestError::UnsupportedEncoding(format!(
            "{bits}-bit samples, only 16-bit PCM is supported"
        )));
    }
    if channels == 0 {
        return Err(corrupt("zero channels"));
    }
    let (data_offset, data_len) = data.ok_or_else(|| corrupt("missing data chunk"))?;
    Ok(WavFormat {
        channels,
        sample_rate,
        data_offset,
        data_len,
    })
}

/// Reads 16-bit PCM WAV, mapping integers to [-1, 1) by dividing by 32768.
pub fn read_wav(path: &Path, channel: usize) -> Result<Ingested, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let fmt = parse_wav_header(&bytes, path)?;
    if channel >= fmt.channels as usize {
        return Err(IngestError::BadChannel {
            requested: channel,
            available: fmt.channels as usize,
        });
    }
    let frame_bytes = 2 * fmt.channels as usize;
    let n_frames = fmt.data_len / frame_bytes;
    let data = &bytes[fmt.data_offset..fmt.data_offset + fmt.data_len];
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let off = f * frame_bytes + channel * 2;
        let v = i16::from_le_bytes([data[off], data[off + 1]]);
        samples.push(v as f64 / 32768.0);
    }
    let series = TimeSeries::new(samples, fmt.sample_rate as f64, format!("ch{channel}"))?;
    Ok(Ingested {
        series,
        source_bytes: bytes.len() as u64,
    })
}

/// Writes a series as canonical mono 16-bit PCM WAV (44-byte header).
/// Values are clamped to [-1, 1) and scaled by 32768, the exact inverse of
/// `read_wav`, so a read-write round trip reproduces the PCM payload.
pub fn write_wav(path: &Path, series: &TimeSeries) -> Result<(), IngestError> {
    let n = series.len();
    let rate = series.sample_rate_hz().round() as u32;
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in series.samples() {
        let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

// --- CSV -------------------------------------------------------------

fn parse_csv_cell(line: &str, column: usize) -> Option<f64> {
    line.split(',').nth(column)?.trim().parse::<f64>().ok()
}

/// Reads one numeric column. A non-numeric first row is treated as a
/// header; anything non-numeric later is a parse error naming the line.
pub fn read_csv(path: &Path, column: usize, rate_hz: f64) -> Result<Ingested, IngestError> {
    let meta = std::fs::metadata(path).map_err(|e| io_err(path, e))?;
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_csv_cell(&line, column) {
            Some(v) if v.is_finite() => samples.push(v),
            Some(v) => {
                return Err(IngestError::ParseError {
                    line: i + 1,
                    detail: format!("non-finite value {v}"),
                })
            }
            None if i == 0 => continue, // optional header row
            None => {
                return Err(IngestError::ParseError {
                    line: i + 1,
                    detail: format!("cannot parse column {column} of {line:?}"),
                })
            }
        }
    }
    if samples.is_empty() {
        return Err(IngestError::NoSamples);
    }
    let series = TimeSeries::new(samples, rate_hz, format!("col{column}"))?;
    Ok(Ingested {
        series,
        source_bytes: meta.len(),
    })
}

/// Writes one value per line with three decimals. The inverse of
/// `read_csv` for display-precision data.
pub fn write_csv(path: &Path, series: &TimeSeries) -> Result<(), IngestError> {
    let mut out = String::with_capacity(series.len() * 8);
    for v in series.samples() {
        out.push_str(&format!("{v:.3}\n"));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes integer ADC units, one per line: round(v * gain + baseline).
/// This is the shape of database text exports, which quantize to the
/// converter grid instead of printing fractional physical units.
pub fn write_adc_csv(
    path: &Path,
    series: &TimeSeries,
    gain: f64,
    baseline: f64,
) -> Result<(), IngestError> {
    let mut out = String::with_capacity(series.len() * 6);
    for v in series.samples() {
        out.push_str(&format!("{}\n", (v * gain + baseline).round() as i64));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

// --- raw PCM ----------------------------------------------------------

pub fn read_raw_pcm16(path: &Path, rate_hz: f64) -> Result<Ingested, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() % 2 != 0 {
        return Err(IngestError::CorruptContainer(
            "odd byte count for 16-bit PCM".into(),
        ));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    if samples.is_empty() {
        return Err(IngestError::NoSamples);
    }
    let series = TimeSeries::new(samples, rate_hz, "pcm")?;
    Ok(Ingested {
        series,
        source_bytes: bytes.len() as u64,
    })
}

// --- MIT-BIH format 212 ------------------------------------------------

/// Per-signal calibration from the companion header.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub gain: f64,
    pub baseline: f64,
    pub description: String,
}

/// Minimal header: record name, channel count, rate and per-signal
/// calibration. Everything else in the header does not affect the decode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mitbih212Header {
    pub record_name: String,
    pub n_signals: usize,
    pub sample_rate_hz: f64,
    pub signals: Vec<SignalSpec>,
}

/// Parses a WFDB-style `.hea` companion file.
pub fn parse_mitbih_header(text: &str) -> Result<Mitbih212Header, IngestError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let first = lines
        .next()
        .ok_or_else(|| IngestError::HeaderParse("empty header".into()))?;
    let fields: Vec<&str> = first.split_whitespace().collect();
    if fields.len() < 3 {
        return Err(IngestError::HeaderParse(format!(
            "record line needs name, signal count and rate: {first:?}"
        )));
    }
    let record_name = fields[0].split('/').next().unwrap_or(fields[0]).to_string();
    let n_signals: usize = fields[1]
        .parse()
        .map_err(|_| IngestError::HeaderParse(format!("bad signal count {:?}", fields[1])))?;
    // the rate field may carry counter frequency after a slash
    let rate_str = fields[2].split('/').next().unwrap_or(fields[2]);
    let sample_rate_hz: f64 = rate_str
        .parse()
        .map_err(|_| IngestError::HeaderParse(format!("bad sample rate {rate_str:?}")))?;

    let mut signals = Vec::with_capacity(n_signals);
    for _ in 0..n_signals {
        let line = lines
            .next()
            .ok_or_else(|| IngestError::HeaderParse("missing signal line".into()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 3 {
            return Err(IngestError::HeaderParse(format!(
                "signal line too short: {line:?}"
            )));
        }
        if !f[1].starts_with("212") {
            return Err(IngestError::UnsupportedEncoding(format!(
                "signal format {} (only 212 is supported)",
                f[1]
            )));
        }
        // gain spec: GAIN, GAIN(BASELINE) or GAIN(BASELINE)/UNITS
        let gain_spec = f[2];
        let (gain_part, baseline_in_parens) = match gain_spec.find('(') {
            Some(open) => {
                let close = gain_spec.find(')').ok_or_else(|| {
                    IngestError::HeaderParse(format!("unclosed baseline in {gain_spec:?}"))
                })?;
                (
                    &gain_spec[..open],
                    Some(gain_spec[open + 1..close].to_string()),
                )
            }
            None => (gain_spec.split('/').next().unwrap_or(gain_spec), None),
        };
        let mut gain: f64 = gain_part
            .parse()
            .map_err(|_| IngestError::HeaderParse(format!("bad gain {gain_part:?}")))?;
        if gain == 0.0 {
            gain = 200.0; // WFDB default when unspecified
        }
        let adc_zero: f64 = f.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.0);
        let baseline = match baseline_in_parens {
            Some(b) => b
                .parse()
                .map_err(|_| IngestError::HeaderParse(format!("bad baseline {b:?}")))?,
            None => adc_zero,
        };
        let description = if f.len() > 8 {
            f[8..].join(" ")
        } else {
            String::new()
        };
        signals.push(SignalSpec {
            gain,
            baseline,
            description,
        });
    }
    Ok(Mitbih212Header {
        record_name,
        n_signals,
        sample_rate_hz,
        signals,
    })
}

/// Unpacks format-212 byte triplets into two 12-bit two's-complement
/// sample streams.
pub fn decode_format_212(bytes: &[u8]) -> Result<(Vec<i32>, Vec<i32>), IngestError> {
    if !bytes.len().is_multiple_of(3) {
        return Err(IngestError::TruncatedRecord(bytes.len() as u64));
    }
    let n = bytes.len() / 3;
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for g in bytes.chunks_exact(3) {
        let s1 = (((g[1] & 0x0F) as i32) << 8) | g[0] as i32;
        let s2 = (((g[1] >> 4) as i32) << 8) | g[2] as i32;
        first.push(sign_extend_12(s1));
        second.push(sign_extend_12(s2));
    }
    Ok((first, second))
}

fn sign_extend_12(v: i32) -> i32 {
    if v & 0x800 != 0 {
        v - 4096
    } else {
        v
    }
}

/// A decoded two-channel (or single-channel) format-212 record in
/// millivolts.
#[derive(Debug, Clone)]
pub struct Mitbih212Record {
    pub header: Mitbih212Header,
    pub channels: Vec<TimeSeries>,
    /// Raw ADC units per channel, before gain and baseline.
    pub adc: Vec<Vec<i32>>,
    pub source_bytes: u64,
}

/// Reads `<record>.dat` together with its `.hea` companion and converts
/// to millivolts: (adc - baseline) / gain.
pub fn read_mitbih_212(dat_path: &Path) -> Result<Mitbih212Record, IngestError> {
    let hea_path = dat_path.with_extension("hea");
    let hea_text = std::fs::read_to_string(&hea_path).map_err(|e| io_err(&hea_path, e))?;
    let header = parse_mitbih_header(&hea_text)?;
    if header.n_signals == 0 || header.n_signals > 2 {
        return Err(IngestError::UnsupportedEncoding(format!(
            "{} signals in one 212 file",
            header.n_signals
        )));
    }
    let bytes = std::fs::read(dat_path).map_err(|e| io_err(dat_path, e))?;
    let (first, second) = decode_format_212(&bytes)?;

    let adc: Vec<Vec<i32>> = if header.n_signals == 2 {
        vec![first, second]
    } else {
        // single signal: the pair holds consecutive samples
        let mut merged = Vec::with_capacity(first.len() * 2);
        for (a, b) in first.iter().zip(&second) {
            merged.push(*a);
            merged.push(*b);
        }
        vec![merged]
    };

    let mut channels = Vec::with_capacity(adc.len());
    for (ch, raw) in adc.iter().enumerate() {
        let spec = &header.signals[ch];
        let mv: Vec<f64> = raw
            .iter()
            .map(|&v| (v as f64 - spec.baseline) / spec.gain)
            .collect();
        let label = if spec.description.is_empty() {
            format!("ch{ch}")
        } else {
            spec.description.clone()
        };
        channels.push(TimeSeries::new(mv, header.sample_rate_hz, label)?);
    }
    Ok(Mitbih212Record {
        header,
        channels,
        adc,
        source_bytes: bytes.len() as u64,
    })
}

// --- chunked streaming --------------------------------------------------

/// One chunk of a streamed source with its running sample offset.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub start_offset: usize,
    pub series: TimeSeries,
}

/// Pull-based chunk iterator over any source kind. Concatenating every
/// chunk reproduces the whole-file read exactly.
pub struct ChunkStream {
    inner: ChunkSource,
    chunk_samples: usize,
    offset: usize,
    rate: f64,
    label: String,
    done: bool,
}

enum ChunkSource {
    Wav {
        reader: BufReader<File>,
        remaining_frames: usize,
        channels: usize,
        channel: usize,
    },
    Csv {
        lines: std::io::Lines<BufReader<File>>,
        line_no: usize,
        column: usize,
        first_line_checked: bool,
    },
    Mitbih {
        reader: BufReader<File>,
        n_signals: usize,
        channel: usize,
        gain: f64,
        baseline: f64,
        /// leftover sample from a single-channel pair
        carry: Option<f64>,
        /// bytes left in the data file; a torn trailing triplet must fail
        /// loudly instead of vanishing at EOF
        remaining_bytes: u64,
    },
    Raw {
        reader: BufReader<File>,
        remaining_bytes: u64,
    },
}

/// Opens a source for chunked reading; each pulled chunk carries its
/// running sample offset and decode errors name the failing chunk.
pub fn chunk_stream(
    desc: &SourceDescriptor,
    chunk_samples: usize,
) -> Result<ChunkStream, IngestError> {
    assert!(chunk_samples >= 1, "chunk_samples must be at least 1");
    let path = &desc.path;
    match desc.kind {
        SourceKind::Wav => {
            // parse the container once for the data offset, then stream
            let all = std::fs::read(path).map_err(|e| io_err(path, e))?;
            let fmt = parse_wav_header(&all, path)?;
            if desc.channel >= fmt.channels as usize {
                return Err(IngestError::BadChannel {
                    requested: desc.channel,
                    available: fmt.channels as usize,
                });
            }
            let mut reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
            std::io::copy(
                &mut reader.by_ref().take(fmt.data_offset as u64),
                &mut std::io::sink(),
            )
            .map_err(|e| io_err(path, e))?;
            Ok(ChunkStream {
                inner: ChunkSource::Wav {
                    reader,
                    remaining_frames: fmt.data_len / (2 * fmt.channels as usize),
                    channels: fmt.channels as usize,
                    channel: desc.channel,
                },
                chunk_samples,
                offset: 0,
                rate: fmt.sample_rate as f64,
                label: format!("ch{}", desc.channel),
                done: false,
            })
        }
        SourceKind::Csv => {
            let rate = desc
                .declared_rate_hz
                .ok_or(IngestError::MissingSampleRate)?;
            let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
            Ok(ChunkStream {
                inner: ChunkSource::Csv {
                    lines: reader.lines(),
                    line_no: 0,
                    column: desc.csv_column,
                    first_line_checked: false,
                },
                chunk_samples,
                offset: 0,
                rate,
                label: format!("col{}", desc.csv_column),
                done: false,
            })
        }
        SourceKind::Mitbih212 => {
            let hea_path = path.with_extension("hea");
            let hea = std::fs::read_to_string(&hea_path).map_err(|e| io_err(&hea_path, e))?;
            let header = parse_mitbih_header(&hea)?;
            if desc.channel >= header.n_signals {
                return Err(IngestError::BadChannel {
                    requested: desc.channel,
                    available: header.n_signals,
                });
            }
            let spec = header.signals[desc.channel].clone();
            let remaining_bytes = std::fs::metadata(path).map_err(|e| io_err(path, e))?.len();
            let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
            Ok(ChunkStream {
                inner: ChunkSource::Mitbih {
                    reader,
                    n_signals: header.n_signals,
                    channel: desc.channel,
                    gain: spec.gain,
                    baseline: spec.baseline,
                    carry: None,
                    remaining_bytes,
                },
                chunk_samples,
                offset: 0,
                rate: header.sample_rate_hz,
                label: if spec.description.is_empty() {
                    format!("ch{}", desc.channel)
                } else {
                    spec.description
                },
                done: false,
            })
        }
        SourceKind::RawPcm16 => {
            let rate = desc
                .declared_rate_hz
                .ok_or(IngestError::MissingSampleRate)?;
            let remaining_bytes = std::fs::metadata(path).map_err(|e| io_err(path, e))?.len();
            let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
            Ok(ChunkStream {
                inner: ChunkSource::Raw {
                    reader,
                    remaining_bytes,
                },
                chunk_samples,
                offset: 0,
                rate,
                label: "pcm".into(),
                done: false,
            })
        }
    }
}

impl ChunkStream {
    fn fill(&mut self, out: &mut Vec<f64>) -> Result<(), IngestError> {
        let want = self.chunk_samples;
        match &mut self.inner {
            ChunkSource::Wav {
                reader,
                remaining_frames,
                channels,
                channel,
            } => {
                let mut frame = vec![0u8; 2 * *channels];
                while out.len() < want && *remaining_frames > 0 {
                    reader.read_exact(&mut frame).map_err(|_| {
                        IngestError::CorruptContainer("data chunk ended early".into())
                    })?;
                    let off = *channel * 2;
                    out.push(i16::from_le_bytes([frame[off], frame[off + 1]]) as f64 / 32768.0);
                    *remaining_frames -= 1;
                }
                Ok(())
            }
            ChunkSource::Csv {
                lines,
                line_no,
                column,
                first_line_checked,
            } => {
                while out.len() < want {
                    let Some(line) = lines.next() else { break };
                    *line_no += 1;
                    let line = line.map_err(|e| IngestError::ParseError {
                        line: *line_no,
                        detail: e.to_string(),
                    })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match parse_csv_cell(&line, *column) {
                        Some(v) if v.is_finite() => out.push(v),
                        None if *line_no == 1 && !*first_line_checked => {}
                        _ => {
                            return Err(IngestError::ParseError {
                                line: *line_no,
                                detail: format!("cannot parse column {column} of {line:?}"),
                            })
                        }
                    }
                    *first_line_checked = true;
                }
                Ok(())
            }
            ChunkSource::Mitbih {
                reader,
                n_signals,
                channel,
                gain,
                baseline,
                carry,
                remaining_bytes,
            } => {
                let mut group = [0u8; 3];
                while out.len() < want {
                    if let Some(v) = carry.take() {
                        out.push(v);
                        continue;
                    }
                    if *remaining_bytes == 0 {
                        break;
                    }
                    if *remaining_bytes < 3 {
                        return Err(IngestError::TruncatedRecord(*remaining_bytes));
                    }
                    reader
                        .read_exact(&mut group)
                        .map_err(|e| IngestError::CorruptContainer(e.to_string()))?;
                    *remaining_bytes -= 3;
                    let s1 = sign_extend_12((((group[1] & 0x0F) as i32) << 8) | group[0] as i32);
                    let s2 = sign_extend_12((((group[1] >> 4) as i32) << 8) | group[2] as i32);
                    let to_mv = |adc: i32| (adc as f64 - *baseline) / *gain;
                    if *n_signals == 2 {
                        out.push(to_mv(if *channel == 0 { s1 } else { s2 }));
                    } else {
                        out.push(to_mv(s1));
                        *carry = Some(to_mv(s2));
                    }
                }
                Ok(())
            }
            ChunkSource::Raw {
                reader,
                remaining_bytes,
            } => {
                let mut pair = [0u8; 2];
                while out.len() < want {
                    if *remaining_bytes == 0 {
                        break;
                    }
                    if *remaining_bytes < 2 {
                        return Err(IngestError::CorruptContainer(
                            "odd byte count for 16-bit PCM".into(),
                        ));
                    }
                    reader
                        .read_exact(&mut pair)
                        .map_err(|e| IngestError::CorruptContainer(e.to_string()))?;
                    *remaining_bytes -= 2;
                    out.push(i16::from_le_bytes(pair) as f64 / 32768.0);
                }
                Ok(())
            }
        }
    }
}

impl Iterator for ChunkStream {
    type Item = Result<Chunk, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut values = Vec::with_capacity(self.chunk_samples);
        if let Err(e) = self.fill(&mut values) {
            self.done = true;
            return Some(Err(IngestError::ChunkFailure {
                start_offset: self.offset,
                detail: e.to_string(),
            }));
        }
        if values.is_empty() {
            self.done = true;
            return None;
        }
        if values.len() < self.chunk_samples {
            self.done = true;
        }
        let start_offset = self.offset;
        self.offset += values.len();
        match TimeSeries::new(values, self.rate, self.label.clone()) {
            Ok(series) => Some(Ok(Chunk {
                start_offset,
                series,
            })),
            Err(e) => {
                self.done = true;
                Some(Err(IngestError::ChunkFailure {
                    start_offset,
                    detail: e.to_string(),
                }))
            }
        }
    }
}
