//! Real-time QRS detection (Pan-Tompkins) and RR-interval extraction.
//!
//! The detector is a stateful, push-based consumer: feed it chunks of any
//! size and the emitted fiducials are identical to a whole-record pass.
//! Internally everything runs at 200 Hz, where the classic difference
//! equations are defined; input is linearly resampled on the way in and
//! fiducials are mapped back to the original sampling grid on the way out.

use thiserror::Error;

use crate::timeseries::TimeSeries;

#[derive(Debug, Error, PartialEq)]
pub enum QrsError {
    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),
    #[error("not enough beats: need at least 2 fiducials, got {0}")]
    NotEnoughBeats(usize),
    #[error("invalid fiducials: {0}")]
    InvalidFiducials(String),
}

/// Detected R-peak locations on the original sampling grid.
///
/// Invariants (validated at construction): strictly increasing indices with
/// at least 200 ms between consecutive fiducials.
#[derive(Debug, Clone, PartialEq)]
pub struct QrsAnnotationSet {
    fiducials: Vec<usize>,
    sample_rate_hz: f64,
    source_id: String,
}

impl QrsAnnotationSet {
    pub fn new(
        fiducials: Vec<usize>,
        sample_rate_hz: f64,
        source_id: impl Into<String>,
    ) -> Result<Self, QrsError> {
        let refractory = (0.2 * sample_rate_hz).ceil() as usize;
        for pair in fiducials.windows(2) {
            if pair[1] <= pair[0] || pair[1] - pair[0] < refractory {
                return Err(QrsError::InvalidFiducials(format!(
                    "fiducials {} and {} violate the 200 ms refractory at {} Hz",
                    pair[0], pair[1], sample_rate_hz
                )));
            }
        }
        Ok(Self {
            fiducials,
            sample_rate_hz,
            source_id: source_id.into(),
        })
    }

    pub fn fiducials(&self) -> &[usize] {
        &self.fiducials
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.fiducials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fiducials.is_empty()
    }
}

/// RR intervals in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RrSeries {
    pub intervals_ms: Vec<f64>,
}

/// Pairwise fiducial differences in milliseconds.
pub fn rr_intervals(qrs: &QrsAnnotationSet) -> Result<RrSeries, QrsError> {
    if qrs.len() < 2 {
        return Err(QrsError::NotEnoughBeats(qrs.len()));
    }
    let rate = qrs.sample_rate_hz();
    let intervals_ms = qrs
        .fiducials()
        .windows(2)
        .map(|p| (p[1] - p[0]) as f64 / rate * 1000.0)
        .collect();
    Ok(RrSeries { intervals_ms })
}

/// Whole-series detection. Requires at least 100 Hz and 2 s of signal.
pub fn pan_tompkins(series: &TimeSeries) -> Result<QrsAnnotationSet, QrsError> {
    let mut det = QrsDetector::new(series.sample_rate_hz())?;
    if series.duration_seconds() < 2.0 {
        return Err(QrsError::InsufficientSignal(format!(
            "need at least 2 s of signal, got {:.3} s",
            series.duration_seconds()
        )));
    }
    det.push(series.samples());
    QrsAnnotationSet::new(
        det.finish(),
        series.sample_rate_hz(),
        series.channel_label(),
    )
}

// All of the following run on the 200 Hz internal grid.
const OUT_RATE: f64 = 200.0;
const REFRACTORY: usize = 40; // 200 ms
const TWAVE_WINDOW: usize = 72; // 360 ms
const MWI_LEN: usize = 30; // 150 ms
const LEARN_SAMPLES: usize = 400; // 2 s initialization
const TRANSIENT_SKIP: usize = 80; // filter settling excluded from learning
const SEARCHBACK_FACTOR: f64 = 1.66;
const RING: usize = 4096;
const R_SEARCH_BACK: usize = 45;
const R_REFINE: usize = 8; // 40 ms
const BANDPASS_DELAY: usize = 21; // low-pass 5 + high-pass 16

#[derive(Debug, Clone, Copy)]
struct Candidate {
    k: usize,
    value: f64,
    is_twave: bool,
}

/// Streaming Pan-Tompkins detector. One feed-forward consumer pushes
/// chunks; distinct instances are independent.
#[derive(Debug)]
pub struct QrsDetector {
    source_rate: f64,
    // resampler
    in_count: usize,
    prev_in: f64,
    out_count: usize,
    // band-pass: cascaded recursive low- and high-pass
    lp_x: [f64; 13],
    lp_y: [f64; 2],
    hp_x: [f64; 33],
    hp_y: f64,
    deriv_x: [f64; 4],
    mwi_window: [f64; MWI_LEN],
    mwi_sum: f64,
    // histories addressed by absolute 200 Hz index modulo RING
    bp_ring: Vec<f64>,
    deriv_ring: Vec<f64>,
    // peak picking on the integrated waveform
    prev_mwi: f64,
    rising: bool,
    run_peak_k: usize,
    run_peak_v: f64,
    // learning
    learn_max: f64,
    learn_sum: f64,
    learn_n: usize,
    learned: bool,
    pending_learning_candidates: Vec<(usize, f64)>,
    // adaptive state
    spki: f64,
    npki: f64,
    threshold1: f64,
    threshold2: f64,
    last_qrs_k: Option<usize>,
    last_qrs_slope: f64,
    rr_history: Vec<f64>,
    rr_avg: f64,
    candidates: Vec<Candidate>,
    searchback_defer_until: usize,
    // output
    fiducials: Vec<usize>,
    last_emitted: Option<usize>,
}

impl QrsDetector {
    pub fn new(source_rate_hz: f64) -> Result<Self, QrsError> {
        if !(source_rate_hz.is_finite() && source_rate_hz >= 100.0) {
            return Err(QrsError::InsufficientSignal(format!(
                "sample rate must be at least 100 Hz, got {source_rate_hz}"
            )));
        }
        Ok(Self {
            source_rate: source_rate_hz,
            in_count: 0,
            prev_in: 0.0,
            out_count: 0,
            lp_x: [0.0; 13],
            lp_y: [0.0; 2],
            hp_x: [0.0; 33],
            hp_y: 0.0,
            deriv_x: [0.0; 4],
            mwi_window: [0.0; MWI_LEN],
            mwi_sum: 0.0,
            bp_ring: vec![0.0; RING],
            deriv_ring: vec![0.0; RING],
            prev_mwi: 0.0,
            rising: false,
            run_peak_k: 0,
            run_peak_v: 0.0,
            learn_max: 0.0,
            learn_sum: 0.0,
            learn_n: 0,
            learned: false,
            pending_learning_candidates: Vec::new(),
            spki: 0.0,
            npki: 0.0,
            threshold1: f64::INFINITY,
            threshold2: f64::INFINITY,
            last_qrs_k: None,
            last_qrs_slope: 0.0,
            rr_history: Vec::new(),
            rr_avg: 0.0,
            candidates: Vec::new(),
            searchback_defer_until: 0,
            fiducials: Vec::new(),
            last_emitted: None,
        })
    }

    /// Feeds a chunk. Chunk boundaries have no observable effect.
    pub fn push(&mut self, samples: &[f64]) {
        for &x in samples {
            self.push_input(x);
        }
    }

    /// Fiducials emitted so far, on the original sampling grid.
    pub fn fiducials(&self) -> &[usize] {
        &self.fiducials
    }

    /// Consumes the detector, returning every emitted fiducial.
    pub fn finish(self) -> Vec<usize> {
        self.fiducials
    }

    fn push_input(&mut self, x: f64) {
        let idx = self.in_count;
        self.in_count += 1;
        if idx == 0 {
            self.prev_in = x;
            return;
        }
        // emit every 200 Hz sample that falls in ((idx-1), idx]
        let ratio = self.source_rate / OUT_RATE;
        loop {
            let pos = self.out_count as f64 * ratio;
            if pos > idx as f64 {
                break;
            }
            let y = if pos <= (idx - 1) as f64 {
                self.prev_in
            } else {
                let frac = pos - (idx - 1) as f64;
                self.prev_in + (x - self.prev_in) * frac
            };
            self.process_200hz(y);
        }
        self.prev_in = x;
    }

    fn process_200hz(&mut self, x: f64) {
        let k = self.out_count;
        self.out_count += 1;

        // low-pass: y(n) = 2y(n-1) - y(n-2) + x(n) - 2x(n-6) + x(n-12), gain 36
        for i in (1..13).rev() {
            self.lp_x[i] = self.lp_x[i - 1];
        }
        self.lp_x[0] = x;
        let lp =
            2.0 * self.lp_y[0] - self.lp_y[1] + self.lp_x[0] - 2.0 * self.lp_x[6] + self.lp_x[12];
        self.lp_y[1] = self.lp_y[0];
        self.lp_y[0] = lp;
        let lp_out = lp / 36.0;

        // high-pass: y(n) = y(n-1) - x(n)/32 + x(n-16) - x(n-17) + x(n-32)/32
        for i in (1..33).rev() {
            self.hp_x[i] = self.hp_x[i - 1];
        }
        self.hp_x[0] = lp_out;
        let hp =
            self.hp_y - self.hp_x[0] / 32.0 + self.hp_x[16] - self.hp_x[17] + self.hp_x[32] / 32.0;
        self.hp_y = hp;
        let bp = hp;
        self.bp_ring[k % RING] = bp;

        // five-point derivative: y(n) = (2x(n) + x(n-1) - x(n-3) - 2x(n-4)) / 8
        let deriv = (2.0 * bp + self.deriv_x[0] - self.deriv_x[2] - 2.0 * self.deriv_x[3]) / 8.0;
        for i in (1..4).rev() {
            self.deriv_x[i] = self.deriv_x[i - 1];
        }
        self.deriv_x[0] = bp;
        self.deriv_ring[k % RING] = deriv;

        // squaring + 150 ms moving-window integration
        let sq = deriv * deriv;
        let slot = k % MWI_LEN;
        self.mwi_sum += sq - self.mwi_window[slot];
        self.mwi_window[slot] = sq;
        let mwi = (self.mwi_sum / MWI_LEN as f64).max(0.0);

        if k >= TRANSIENT_SKIP {
            if !self.learned {
                self.learn_max = self.learn_max.max(mwi);
                self.learn_sum += mwi;
                self.learn_n += 1;
            }
            self.track_peaks(k, mwi);
        }
        self.prev_mwi = mwi;

        if !self.learned && k + 1 >= LEARN_SAMPLES {
            self.finish_learning();
        }
        if self.learned {
            self.maybe_search_back(k);
        }
    }

    fn track_peaks(&mut self, k: usize, mwi: f64) {
        if mwi > self.prev_mwi {
            self.rising = true;
            self.run_peak_k = k;
            self.run_peak_v = mwi;
        } else if mwi < self.prev_mwi && self.rising {
            self.rising = false;
            let (pk, pv) = (self.run_peak_k, self.run_peak_v);
            if self.learned {
                self.classify_candidate(pk, pv);
            } else {
                self.pending_learning_candidates.push((pk, pv));
            }
        }
    }

    fn finish_learning(&mut self) {
        self.learned = true;
        self.spki = self.learn_max;
        self.npki = if self.learn_n > 0 {
            self.learn_sum / self.learn_n as f64
        } else {
            0.0
        };
        self.update_thresholds();
        let pending = std::mem::take(&mut self.pending_learning_candidates);
        for (k, v) in pending {
            self.classify_candidate(k, v);
        }
    }

    fn update_thresholds(&mut self) {
        self.threshold1 = self.npki + 0.25 * (self.spki - self.npki);
        self.threshold2 = 0.5 * self.threshold1;
    }

    fn max_slope_near(&self, k: usize) -> f64 {
        let lo = k.saturating_sub(MWI_LEN).max(k.saturating_sub(RING - 1));
        let mut best: f64 = 0.0;
        for i in lo..=k {
            best = best.max(self.deriv_ring[i % RING].abs());
        }
        best
    }

    fn classify_candidate(&mut self, k: usize, v: f64) {
        if let Some(last) = self.last_qrs_k {
            if k - last < REFRACTORY {
                return;
            }
        }
        let slope = self.max_slope_near(k);
        if let Some(last) = self.last_qrs_k {
            // a slow-slope peak shortly after a beat is its T wave
            if k - last < TWAVE_WINDOW && slope < 0.5 * self.last_qrs_slope {
                self.npki = 0.125 * v + 0.875 * self.npki;
                self.update_thresholds();
                self.candidates.push(Candidate {
                    k,
                    value: v,
                    is_twave: true,
                });
                return;
            }
        }
        if v > self.threshold1 {
            self.confirm_qrs(k, v, slope, false);
        } else {
            self.npki = 0.125 * v + 0.875 * self.npki;
            self.update_thresholds();
            self.candidates.push(Candidate {
                k,
                value: v,
                is_twave: false,
            });
        }
    }

    fn confirm_qrs(&mut self, k: usize, v: f64, slope: f64, from_searchback: bool) {
        if from_searchback {
            self.spki = 0.25 * v + 0.75 * self.spki;
        } else {
            self.spki = 0.125 * v + 0.875 * self.spki;
        }
        self.update_thresholds();

        if let Some(last) = self.last_qrs_k {
            let rr = (k - last) as f64;
            self.rr_history.push(rr);
            if self.rr_history.len() > 8 {
                self.rr_history.remove(0);
            }
            self.rr_avg = self.rr_history.iter().sum::<f64>() / self.rr_history.len() as f64;
        }
        self.last_qrs_k = Some(k);
        self.last_qrs_slope = slope;
        self.candidates.retain(|c| c.k > k);
        self.emit_fiducial(k);
    }

    fn maybe_search_back(&mut self, now: usize) {
        let Some(last) = self.last_qrs_k else { return };
        if self.rr_history.is_empty() || now <= self.searchback_defer_until {
            return;
        }
        let gap_limit = SEARCHBACK_FACTOR * self.rr_avg;
        if (now - last) as f64 <= gap_limit {
            return;
        }
        let mut best: Option<Candidate> = None;
        for c in &self.candidates {
            if c.is_twave || c.k <= last + REFRACTORY {
                continue;
            }
            if best.is_none_or(|b| c.value > b.value) {
                best = Some(*c);
            }
        }
        match best {
            Some(c) if c.value > self.threshold2 => {
                let slope = self.max_slope_near(c.k);
                self.confirm_qrs(c.k, c.value, slope, true);
            }
            _ => {
                // nothing eligible yet; try again after roughly one beat
                self.searchback_defer_until = now + self.rr_avg.max(REFRACTORY as f64) as usize;
            }
        }
    }

    fn emit_fiducial(&mut self, mwi_peak_k: usize) {
        // locate the R peak on the band-passed waveform behind the
        // integrator peak, then refine within +-40 ms
        let lo = mwi_peak_k
            .saturating_sub(R_SEARCH_BACK)
            .max(mwi_peak_k.saturating_sub(RING - 1));
        let mut k_bp = lo;
        let mut best = f64::NEG_INFINITY;
        for i in lo..=mwi_peak_k {
            let v = self.bp_ring[i % RING].abs();
            if v > best {
                best = v;
                k_bp = i;
            }
        }
        let r_lo = k_bp.saturating_sub(R_REFINE).max(lo);
        let r_hi = (k_bp + R_REFINE).min(self.out_count.saturating_sub(1));
        for i in r_lo..=r_hi {
            let v = self.bp_ring[i % RING].abs();
            if v > best {
                best = v;
                k_bp = i;
            }
        }

        // compensate the band-pass group delay and map to the source grid
        let k_aligned = k_bp.saturating_sub(BANDPASS_DELAY);
        let orig = (k_aligned as f64 / OUT_RATE * self.source_rate).round() as usize;
        let refractory_orig = (0.2 * self.source_rate).ceil() as usize;
        match self.last_emitted {
            Some(prev) if orig < prev + refractory_orig => {}
            _ => {
                self.fiducials.push(orig);
                self.last_emitted = Some(orig);
            }
        }
    }
}
