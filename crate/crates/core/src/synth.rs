//! Deterministic synthetic signals: voiced speech-like utterances and
//! ECG-like beat trains with known ground truth. These stand in for patient
//! recordings, which cannot ship with the repository.

use std::f64::consts::PI;

use crate::timeseries::TimeSeries;

/// xorshift64* generator. Deterministic across platforms and releases, which
/// keeps every seeded test reproducible without an external RNG crate.
#[derive(Debug, Clone)]
pub struct XorShift(u64);

impl XorShift {
    pub fn new(seed: u64) -> Self {
        // zero state would be a fixed point
        XorShift(seed.wrapping_mul(2685821657736338717).max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(2685821657736338717)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Approximately standard normal (Irwin-Hall with 12 uniforms).
    pub fn next_gaussian(&mut self) -> f64 {
        (0..12).map(|_| self.next_f64()).sum::<f64>() - 6.0
    }
}

/// Pure sine tone.
pub fn sine(freq_hz: f64, sample_rate_hz: f64, n: usize, amplitude: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sample_rate_hz).sin())
        .collect()
}

/// Band-limited pulse train at `f0_hz`: every harmonic below 90% of Nyquist
/// with equal weight. Strong harmonics make it the worst case for
/// period-doubling and halving errors in pitch trackers.
pub fn pulse_train(f0_hz: f64, sample_rate_hz: f64, n: usize, amplitude: f64) -> Vec<f64> {
    let k_max = ((0.9 * sample_rate_hz / 2.0) / f0_hz).floor().max(1.0) as usize;
    let norm = amplitude / k_max as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate_hz;
            (1..=k_max)
                .map(|k| (2.0 * PI * k as f64 * f0_hz * t).cos())
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Vowel-like voiced tone: harmonics of `f0_hz` with 1/k rolloff.
pub fn voiced_tone(f0_hz: f64, sample_rate_hz: f64, n: usize, amplitude: f64) -> Vec<f64> {
    let k_max = ((0.9 * sample_rate_hz / 2.0) / f0_hz).floor().max(1.0) as usize;
    let norm: f64 = (1..=k_max).map(|k| 1.0 / k as f64).sum();
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate_hz;
            (1..=k_max)
                .map(|k| (2.0 * PI * k as f64 * f0_hz * t).sin() / k as f64)
                .sum::<f64>()
                * amplitude
                / norm
        })
        .collect()
}

/// White noise in [-amplitude, amplitude).
pub fn white_noise(n: usize, amplitude: f64, rng: &mut XorShift) -> Vec<f64> {
    (0..n)
        .map(|_| (rng.next_f64() * 2.0 - 1.0) * amplitude)
        .collect()
}

/// Parameters for a speech-like utterance.
#[derive(Debug, Clone)]
pub struct SpeechParams {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Fundamental of the primary syllable.
    pub f0_hz: f64,
    pub syllable_s: f64,
    pub gap_s: f64,
    pub amplitude: f64,
}

impl Default for SpeechParams {
    fn default() -> Self {
        SpeechParams {
            sample_rate_hz: 8000.0,
            duration_s: 3.2,
            f0_hz: 150.0,
            syllable_s: 0.30,
            gap_s: 0.12,
            amplitude: 0.5,
        }
    }
}

/// A repeated-exercise utterance: two alternating vowel-like syllables with
/// Hann envelopes, separated by low-level breath noise. Repetitions of each
/// syllable are sample-exact copies, the way a reference pattern recurs in a
/// speech exercise.
pub fn speech_like(params: &SpeechParams, seed: u64) -> TimeSeries {
    let rate = params.sample_rate_hz;
    let n_total = (params.duration_s * rate).round() as usize;
    let syllable_n = (params.syllable_s * rate).round() as usize;
    let gap_n = (params.gap_s * rate).round() as usize;
    let mut rng = XorShift::new(seed);

    let envelope = |i: usize, n: usize| {
        let x = i as f64 / (n - 1) as f64;
        0.5 - 0.5 * (2.0 * PI * x).cos()
    };
    let make_syllable = |f0: f64| -> Vec<f64> {
        voiced_tone(f0, rate, syllable_n, params.amplitude)
            .iter()
            .enumerate()
            .map(|(i, v)| v * envelope(i, syllable_n))
            .collect()
    };
    let syllable_a = make_syllable(params.f0_hz);
    let syllable_b = make_syllable(params.f0_hz * 1.3);

    let mut samples = Vec::with_capacity(n_total);
    let mut use_a = true;
    while samples.len() + syllable_n + gap_n <= n_total {
        samples.extend_from_slice(if use_a { &syllable_a } else { &syllable_b });
        samples.extend(white_noise(gap_n, 1e-3, &mut rng));
        use_a = !use_a;
    }
    samples.extend(white_noise(n_total - samples.len(), 1e-3, &mut rng));

    TimeSeries::new(samples, rate, "synthetic-speech").expect("finite synthetic samples")
}

/// Parameters for an ECG-like beat train.
#[derive(Debug, Clone)]
pub struct EcgParams {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub bpm: f64,
    /// Fractional beat-to-beat period jitter (0 = metronomic).
    pub rr_jitter: f64,
    /// Additive noise standard deviation in mV.
    pub noise_mv: f64,
    /// Baseline wander amplitude in mV.
    pub wander_mv: f64,
}

impl Default for EcgParams {
    fn default() -> Self {
        EcgParams {
            sample_rate_hz: 360.0,
            duration_s: 30.0,
            bpm: 60.0,
            rr_jitter: 0.02,
            noise_mv: 0.01,
            wander_mv: 0.05,
        }
    }
}

fn gaussian_bump(t: f64, center: f64, width: f64, amp: f64) -> f64 {
    let d = (t - center) / width;
    amp * (-0.5 * d * d).exp()
}

/// One P-QRS-T complex in mV, `t` in seconds relative to the R peak.
fn pqrst(t: f64) -> f64 {
    gaussian_bump(t, -0.20, 0.025, 0.12)
        + gaussian_bump(t, -0.028, 0.008, -0.12)
        + gaussian_bump(t, 0.0, 0.012, 1.0)
        + gaussian_bump(t, 0.030, 0.009, -0.22)
        + gaussian_bump(t, 0.22, 0.050, 0.30)
}

/// Synthesizes a beat train and returns the signal together with the true
/// R-peak sample indices.
pub fn ecg_like(params: &EcgParams, seed: u64) -> (TimeSeries, Vec<usize>) {
    let rate = params.sample_rate_hz;
    let n = (params.duration_s * rate).round() as usize;
    let mut rng = XorShift::new(seed);

    // beat centers, jittered around the nominal period
    let nominal_rr = 60.0 / params.bpm;
    let mut centers_s = Vec::new();
    let mut t = nominal_rr / 2.0;
    while t < params.duration_s - 0.05 {
        centers_s.push(t);
        let jitter = 1.0 + params.rr_jitter * (rng.next_f64() * 2.0 - 1.0);
        t += nominal_rr * jitter;
    }

    let mut samples = vec![0.0; n];
    for &c in &centers_s {
        let lo = (((c - 0.35) * rate).floor().max(0.0)) as usize;
        let hi = (((c + 0.45) * rate).ceil() as usize).min(n);
        for (i, s) in samples.iter_mut().enumerate().take(hi).skip(lo) {
            *s += pqrst(i as f64 / rate - c);
        }
    }
    for (i, s) in samples.iter_mut().enumerate() {
        let t = i as f64 / rate;
        *s += params.wander_mv * (2.0 * PI * 0.3 * t).sin();
        *s += params.noise_mv * rng.next_gaussian();
    }

    let fiducials: Vec<usize> = centers_s
        .iter()
        .map(|c| (c * rate).round() as usize)
        .collect();
    let series = TimeSeries::new(samples, rate, "synthetic-ecg").expect("finite synthetic samples");
    (series, fiducials)
}

/// Writes a corpus of voiced speech-like WAV recordings, each a little over
/// three seconds, fundamentals spread across the speech range.
pub fn write_speech_corpus(
    dir: &std::path::Path,
    count: usize,
    seed: u64,
) -> Result<Vec<std::path::PathBuf>, crate::ingest::IngestError> {
    std::fs::create_dir_all(dir).map_err(|e| crate::ingest::IngestError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let params = SpeechParams {
            f0_hz: 110.0 + 11.0 * i as f64,
            ..SpeechParams::default()
        };
        let series = speech_like(&params, seed.wrapping_add(i as u64));
        let path = dir.join(format!("speech{i:02}.wav"));
        crate::ingest::write_wav(&path, &series)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes ECG excerpts as ADC-unit CSV files (gain 200, baseline 1024)
/// spanning roughly 16 to 37 kB, with the true beat positions returned per
/// file.
pub fn write_ecg_csv_corpus(
    dir: &std::path::Path,
    count: usize,
    seed: u64,
) -> Result<Vec<(std::path::PathBuf, Vec<usize>)>, crate::ingest::IngestError> {
    std::fs::create_dir_all(dir).map_err(|e| crate::ingest::IngestError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let duration_s = 10.0 + 10.0 * i as f64 / (count.max(2) - 1) as f64;
        let params = EcgParams {
            duration_s,
            noise_mv: 0.001,
            ..EcgParams::default()
        };
        let (series, beats) = ecg_like(&params, seed.wrapping_add(i as u64));
        let path = dir.join(format!("ecg{i:02}.csv"));
        crate::ingest::write_adc_csv(&path, &series, 200.0, 1024.0)?;
        out.push((path, beats));
    }
    Ok(out)
}
