//! Clinical speech processing: per-frame loudness (RMS) and AMDF pitch,
//! refined with a median filter and aggregated into the two per-recording
//! features that get uplinked instead of the audio.

use serde::Serialize;
use thiserror::Error;

use crate::timeseries::{frame, lowpass, median_filter, rms, Frame, SignalError, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum ClipError {
    #[error("invalid lag {lag} for frame of {len} samples")]
    InvalidLag { lag: usize, len: usize },
    #[error("frame too short for f0_min: need > {needed} samples, got {got}")]
    FrameTooShortForF0 { needed: usize, got: usize },
    #[error("invalid pitch config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Pitch-chain configuration. Defaults follow the speech-exercise setup:
/// 40 ms frames, 20 ms hop, speech band 60-400 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchConfig {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub lowpass_cutoff_hz: f64,
    pub median_window: usize,
    /// A frame is voiced when its AMDF minimum is at most this fraction of
    /// the mean AMDF over the lag range. Scale-invariant by construction.
    pub voicing_ratio: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f0_min_hz: 60.0,
            f0_max_hz: 400.0,
            frame_ms: 40.0,
            hop_ms: 20.0,
            lowpass_cutoff_hz: 900.0,
            median_window: 5,
            voicing_ratio: 0.35,
        }
    }
}

impl PitchConfig {
    fn validate(&self, sample_rate_hz: f64) -> Result<(), ClipError> {
        if !(self.f0_min_hz > 0.0 && self.f0_min_hz < self.f0_max_hz) {
            return Err(ClipError::InvalidConfig(format!(
                "need 0 < f0_min < f0_max, got {} and {}",
                self.f0_min_hz, self.f0_max_hz
            )));
        }
        if self.f0_max_hz >= sample_rate_hz / 2.0 {
            return Err(ClipError::InvalidConfig(format!(
                "f0_max {} must stay below Nyquist of rate {}",
                self.f0_max_hz, sample_rate_hz
            )));
        }
        if !(self.lowpass_cutoff_hz > 0.0 && self.lowpass_cutoff_hz < sample_rate_hz / 2.0) {
            return Err(ClipError::InvalidConfig(format!(
                "lowpass cutoff {} out of range for rate {}",
                self.lowpass_cutoff_hz, sample_rate_hz
            )));
        }
        if self.median_window.is_multiple_of(2) || self.median_window == 0 {
            return Err(ClipError::InvalidConfig(format!(
                "median window must be odd, got {}",
                self.median_window
            )));
        }
        if !(self.voicing_ratio > 0.0 && self.voicing_ratio < 1.0) {
            return Err(ClipError::InvalidConfig(format!(
                "voicing ratio must be in (0,1), got {}",
                self.voicing_ratio
            )));
        }
        if self.frame_ms <= 0.0 || self.hop_ms <= 0.0 {
            return Err(ClipError::InvalidConfig(
                "frame and hop must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The two clinically relevant features plus bookkeeping, per recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRecord {
    /// Mean of per-frame RMS over the unfiltered signal. This is a
    /// frame-mean, not a whole-file RMS.
    pub avg_loudness: f64,
    /// Mean refined F0 over voiced frames; absent when nothing is voiced.
    pub avg_f0_hz: Option<f64>,
    pub n_frames: u32,
    pub n_voiced: u32,
    pub source_id: String,
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
}

/// Average magnitude difference at `lag`: mean of `|x[n] - x[n-lag]|` over
/// the overlap. Zero exactly when the frame is periodic with period `lag`.
/// No multiplications, which is the point.
pub fn amdf(frame: &[f64], lag: usize) -> Result<f64, ClipError> {
    if lag == 0 || lag >= frame.len() {
        return Err(ClipError::InvalidLag {
            lag,
            len: frame.len(),
        });
    }
    let sum: f64 = (lag..frame.len())
        .map(|n| (frame[n] - frame[n - lag]).abs())
        .sum();
    Ok(sum / (frame.len() - lag) as f64)
}

/// AMDF pitch estimate for one frame. Returns `Some(f0_hz)` for a voiced
/// frame, `None` for unvoiced. F0 is quantized to integer lags.
pub fn estimate_pitch(frame: &Frame, config: &PitchConfig) -> Result<Option<f64>, ClipError> {
    config.validate(frame.sample_rate_hz)?;
    let rate = frame.sample_rate_hz;
    let lag_min = ((rate / config.f0_max_hz).ceil() as usize).max(1);
    let lag_max = (rate / config.f0_min_hz).floor() as usize;
    if lag_max >= frame.len() || lag_min > lag_max {
        return Err(ClipError::FrameTooShortForF0 {
            needed: lag_max,
            got: frame.len(),
        });
    }

    let mut values = Vec::with_capacity(lag_max - lag_min + 1);
    let mut best = f64::INFINITY;
    let mut sum = 0.0;
    for lag in lag_min..=lag_max {
        let v = amdf(&frame.values, lag)?;
        sum += v;
        best = best.min(v);
        values.push(v);
    }
    let mean = sum / values.len() as f64;
    // silence has zero AMDF everywhere; call it unvoiced, not 400 Hz
    if mean <= 0.0 {
        return Ok(None);
    }
    let credible = config.voicing_ratio * mean;
    if best > credible {
        return Ok(None);
    }
    // a periodic frame dips at every multiple of its period, and with
    // integer lags a sub-harmonic multiple can even dip deeper than the
    // quantized fundamental; take the smallest-lag local minimum among the
    // credible dips so the estimate cannot halve
    let mut best_lag = lag_min;
    for (i, &v) in values.iter().enumerate() {
        if v > credible {
            continue;
        }
        let falling_into = i == 0 || values[i - 1] >= v;
        let rising_out = i + 1 == values.len() || values[i + 1] >= v;
        if falling_into && rising_out {
            best_lag = lag_min + i;
            break;
        }
    }
    Ok(Some(rate / best_lag as f64))
}

/// Full chain: low-pass feeds pitch only; loudness is computed on the
/// unfiltered samples. Voiced-frame pitch estimates are median-refined in
/// frame order before averaging.
pub fn clip_process(series: &TimeSeries, config: &PitchConfig) -> Result<FeatureRecord, ClipError> {
    config.validate(series.sample_rate_hz())?;
    let rate = series.sample_rate_hz();
    let frame_len = ((config.frame_ms / 1000.0 * rate).round() as usize).max(1);
    let hop = ((config.hop_ms / 1000.0 * rate).round() as usize).max(1);

    let raw_frames = frame(series, frame_len, hop)?;
    let loudness_sum: f64 = raw_frames
        .iter()
        .map(|f| rms(&f.values).expect("frames are non-empty"))
        .sum();
    let avg_loudness = loudness_sum / raw_frames.len() as f64;

    let filtered = lowpass(series, config.lowpass_cutoff_hz)?;
    let filt_frames = frame(&filtered, frame_len, hop)?;
    let mut voiced_track = Vec::new();
    for f in &filt_frames {
        if let Some(f0) = estimate_pitch(f, config)? {
            voiced_track.push(f0);
        }
    }

    let avg_f0_hz = if voiced_track.is_empty() {
        None
    } else {
        let mut w = config.median_window.min(voiced_track.len());
        if w % 2 == 0 {
            w -= 1;
        }
        let refined = median_filter(&voiced_track, w)?;
        Some(refined.iter().sum::<f64>() / refined.len() as f64)
    };

    let start_ms = series.origin_timestamp_ms();
    let end_ms = start_ms.map(|s| s + (series.duration_seconds() * 1000.0).round() as u64);
    Ok(FeatureRecord {
        avg_loudness,
        avg_f0_hz,
        n_frames: raw_frames.len() as u32,
        n_voiced: voiced_track.len() as u32,
        source_id: series.channel_label().to_string(),
        start_ms,
        end_ms,
    })
}
