//! Gateway configuration file: one TOML document in which every default of
//! the processing chains, the uplink and the bench harness can be
//! overridden. Unknown keys are rejected so typos fail loudly.

use std::path::Path;

use serde::Deserialize;

use crate::bench::BenchOptions;
use crate::clip::PitchConfig;
use crate::gateway::{DtwIndexConfig, GatewayError, RetryPolicy};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub clip: ClipSection,
    #[serde(default)]
    pub dtw: DtwSection,
    #[serde(default)]
    pub uplink: UplinkSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub session: SessionSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipSection {
    pub f0_min_hz: Option<f64>,
    pub f0_max_hz: Option<f64>,
    pub frame_ms: Option<f64>,
    pub hop_ms: Option<f64>,
    pub lowpass_cutoff_hz: Option<f64>,
    pub median_window: Option<usize>,
    pub voicing_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtwSection {
    pub query_offset_ms: Option<f64>,
    pub query_len_ms: Option<f64>,
    pub band_fraction: Option<f64>,
    pub normalize: Option<bool>,
    pub threshold_factor: Option<f64>,
    pub dedup_window: Option<usize>,
    pub query_id: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UplinkSection {
    pub base_delay_ms: Option<u64>,
    pub factor: Option<f64>,
    pub max_attempts: Option<u32>,
    pub request_timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub csv_rate_hz: Option<f64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub log_dir: Option<String>,
    pub staging_dir: Option<String>,
    pub battery_percent: Option<u8>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, GatewayError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))
    }

    pub fn pitch_config(&self) -> PitchConfig {
        let d = PitchConfig::default();
        PitchConfig {
            f0_min_hz: self.clip.f0_min_hz.unwrap_or(d.f0_min_hz),
            f0_max_hz: self.clip.f0_max_hz.unwrap_or(d.f0_max_hz),
            frame_ms: self.clip.frame_ms.unwrap_or(d.frame_ms),
            hop_ms: self.clip.hop_ms.unwrap_or(d.hop_ms),
            lowpass_cutoff_hz: self.clip.lowpass_cutoff_hz.unwrap_or(d.lowpass_cutoff_hz),
            median_window: self.clip.median_window.unwrap_or(d.median_window),
            voicing_ratio: self.clip.voicing_ratio.unwrap_or(d.voicing_ratio),
        }
    }

    pub fn dtw_config(&self) -> DtwIndexConfig {
        let d = DtwIndexConfig::default();
        DtwIndexConfig {
            query_offset_ms: self.dtw.query_offset_ms.or(d.query_offset_ms),
            query_len_ms: self.dtw.query_len_ms.unwrap_or(d.query_len_ms),
            band_fraction: self.dtw.band_fraction.unwrap_or(d.band_fraction),
            normalize: self.dtw.normalize.unwrap_or(d.normalize),
            threshold_factor: self.dtw.threshold_factor.unwrap_or(d.threshold_factor),
            dedup_window: self.dtw.dedup_window.or(d.dedup_window),
            query_id: self.dtw.query_id.clone().or(d.query_id),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        let d = RetryPolicy::default();
        RetryPolicy {
            base_delay_ms: self.uplink.base_delay_ms.unwrap_or(d.base_delay_ms),
            factor: self.uplink.factor.unwrap_or(d.factor),
            max_attempts: self.uplink.max_attempts.unwrap_or(d.max_attempts),
            request_timeout_ms: self
                .uplink
                .request_timeout_ms
                .unwrap_or(d.request_timeout_ms),
        }
    }

    pub fn bench_options(&self) -> BenchOptions {
        let d = BenchOptions::default();
        BenchOptions {
            csv_rate_hz: self.bench.csv_rate_hz.unwrap_or(d.csv_rate_hz),
            jobs: self.bench.jobs.unwrap_or(d.jobs),
            clip: self.pitch_config(),
            dtw: self.dtw_config(),
        }
    }
}
