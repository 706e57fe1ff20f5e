//! Core signal types and the small DSP toolbox the processing chains share:
//! framing, RMS, z-normalization, a Butterworth low-pass and a median filter.

use thiserror::Error;

/// Errors from signal primitives.
#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("input too short: need at least {needed} samples, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error("empty frame")]
    EmptyFrame,
    #[error("degenerate series: need at least 2 samples, got {0}")]
    DegenerateSeries(usize),
    #[error("invalid cutoff {cutoff_hz} Hz for sample rate {sample_rate_hz} Hz")]
    InvalidCutoff { cutoff_hz: f64, sample_rate_hz: f64 },
    #[error("window must be odd, got {0}")]
    WindowMustBeOdd(usize),
    #[error("window {window} exceeds input length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("invalid hop: hop and frame length must be >= 1")]
    InvalidHop,
}

/// A uniformly sampled signal. The universal currency of the pipeline.
///
/// Samples are stored as `f64` regardless of the source bit depth; ingestion
/// defines the integer-to-real mapping. Construction validates the
/// invariants (positive rate, finite samples), so a `TimeSeries` in hand is
/// always well-formed.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    channel_label: String,
    origin_timestamp_ms: Option<u64>,
}

impl TimeSeries {
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: f64,
        channel_label: impl Into<String>,
    ) -> Result<Self, SignalError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(SignalError::BadSampleRate(sample_rate_hz));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            channel_label: channel_label.into(),
            origin_timestamp_ms: None,
        })
    }

    /// Sets the UTC acquisition timestamp (unix epoch milliseconds).
    pub fn with_origin_timestamp_ms(mut self, unix_ms: u64) -> Self {
        self.origin_timestamp_ms = Some(unix_ms);
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_label(&self) -> &str {
        &self.channel_label
    }

    pub fn origin_timestamp_ms(&self) -> Option<u64> {
        self.origin_timestamp_ms
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// A fixed-length segment of a series, carrying its offset into the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub start_index: usize,
    pub values: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Splits a series into frames of `frame_len` samples every `hop` samples.
/// Frame `k` starts at `k * hop`; a trailing partial frame is discarded.
pub fn frame(series: &TimeSeries, frame_len: usize, hop: usize) -> Result<Vec<Frame>, SignalError> {
    if frame_len < 1 || hop < 1 {
        return Err(SignalError::InvalidHop);
    }
    if series.len() < frame_len {
        return Err(SignalError::InputTooShort {
            needed: frame_len,
            got: series.len(),
        });
    }
    let n_frames = (series.len() - frame_len) / hop + 1;
    let mut frames = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let start = k * hop;
        frames.push(Frame {
            start_index: start,
            values: series.samples[start..start + frame_len].to_vec(),
            sample_rate_hz: series.sample_rate_hz,
        });
    }
    Ok(frames)
}

/// Root mean square of a sample block.
pub fn rms(values: &[f64]) -> Result<f64, SignalError> {
    if values.is_empty() {
        return Err(SignalError::EmptyFrame);
    }
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    Ok((sum_sq / values.len() as f64).sqrt())
}

/// Z-normalizes to mean 0 and population standard deviation 1.
///
/// Zero-variance input maps to all zeros instead of erroring, so search
/// loops can skip flat candidates rather than unwind.
pub fn z_normalize(values: &[f64]) -> Result<Vec<f64>, SignalError> {
    if values.len() < 2 {
        return Err(SignalError::DegenerateSeries(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

/// Second-order (biquad) Butterworth low-pass section, bilinear-transform
/// design. One multiply-accumulate pass per sample, which is what a
/// constrained gateway processor can afford.
#[derive(Debug, Clone, Copy)]
pub struct LowpassBiquad {
    // Transfer function H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl LowpassBiquad {
    pub fn design(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, SignalError> {
        if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
            return Err(SignalError::InvalidCutoff {
                cutoff_hz,
                sample_rate_hz,
            });
        }
        let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / sample_rate_hz;
        let q = std::f64::consts::FRAC_1_SQRT_2; // Butterworth
        let alpha = w0.sin() / (2.0 * q);
        let cos_w0 = w0.cos();
        let a0 = 1.0 + alpha;
        Ok(Self {
            b0: (1.0 - cos_w0) / 2.0 / a0,
            b1: (1.0 - cos_w0) / a0,
            b2: (1.0 - cos_w0) / 2.0 / a0,
            a1: -2.0 * cos_w0 / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        })
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// Magnitude of the frequency response at `freq_hz`, directly from the
    /// designed coefficients. Used as the algebraic check against measured
    /// steady-state attenuation.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let (re_n, im_n) = eval_poly(&[self.b0, self.b1, self.b2], w);
        let (re_d, im_d) = eval_poly(&[1.0, self.a1, self.a2], w);
        ((re_n * re_n + im_n * im_n) / (re_d * re_d + im_d * im_d)).sqrt()
    }
}

fn eval_poly(coeffs: &[f64], w: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for (k, c) in coeffs.iter().enumerate() {
        re += c * (w * k as f64).cos();
        im -= c * (w * k as f64).sin();
    }
    (re, im)
}

/// Low-pass filters a series, preserving length and rate.
pub fn lowpass(series: &TimeSeries, cutoff_hz: f64) -> Result<TimeSeries, SignalError> {
    let mut biquad = LowpassBiquad::design(cutoff_hz, series.sample_rate_hz())?;
    let filtered: Vec<f64> = series
        .samples()
        .iter()
        .map(|&x| biquad.process(x))
        .collect();
    let mut out = TimeSeries::new(filtered, series.sample_rate_hz(), series.channel_label())?;
    if let Some(ts) = series.origin_timestamp_ms() {
        out = out.with_origin_timestamp_ms(ts);
    }
    Ok(out)
}

/// Sliding median with an odd window. At the boundaries the window shrinks
/// symmetrically (no invented samples), so every output value is a member
/// of the input multiset.
pub fn median_filter(values: &[f64], window: usize) -> Result<Vec<f64>, SignalError> {
    if window.is_multiple_of(2) || window == 0 {
        return Err(SignalError::WindowMustBeOdd(window));
    }
    if window > values.len() {
        return Err(SignalError::WindowTooLarge {
            window,
            len: values.len(),
        });
    }
    let half = window / 2;
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(window);
    for i in 0..n {
        let k = half.min(i).min(n - 1 - i);
        scratch.clear();
        scratch.extend_from_slice(&values[i - k..=i + k]);
        scratch.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        out.push(scratch[k]);
    }
    Ok(out)
}
