//! Dynamic time warping: exact distance, banded search with a pruning
//! cascade (endpoint bound, envelope lower bound, early-abandoning DP), and
//! the waiting-window rule that keeps only the best match per window.

use thiserror::Error;

use crate::timeseries::{z_normalize, Frame, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum DtwError {
    #[error("empty series")]
    EmptySeries,
    #[error("band radius {radius} excludes endpoint for lengths {len_a} and {len_b}")]
    BandExcludesEndpoint {
        radius: usize,
        len_a: usize,
        len_b: usize,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("query too long: {query} > stream {stream}")]
    QueryTooLong { query: usize, stream: usize },
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
}

/// Warping-path constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Sakoe-Chiba band: cells with |i - j| <= radius.
    Radius(usize),
    Unconstrained,
}

/// Which stages of the pruning cascade run during subsequence search.
/// All stages preserve the result set exactly; switching them off only
/// costs time, which is what makes the cascade bisectable in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pruning {
    pub endpoint_bound: bool,
    pub envelope_bound: bool,
    pub early_abandon: bool,
}

impl Pruning {
    pub fn all() -> Self {
        Pruning {
            endpoint_bound: true,
            envelope_bound: true,
            early_abandon: true,
        }
    }

    pub fn none() -> Self {
        Pruning {
            endpoint_bound: false,
            envelope_bound: false,
            early_abandon: false,
        }
    }
}

/// DTW configuration. Local cost is fixed as the squared difference, summed
/// without a square root, which keeps the lower bounds directly comparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtwConfig {
    pub band: Band,
    /// Z-normalize the query and every candidate window before the distance.
    pub normalize: bool,
    pub pruning: Pruning,
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig {
            band: Band::Unconstrained,
            normalize: false,
            pruning: Pruning::all(),
        }
    }
}

impl DtwConfig {
    /// The search default: band radius of 5% of the query length, rounded
    /// up, with normalization on.
    pub fn banded_for_query(query_len: usize) -> Self {
        DtwConfig {
            band: Band::Radius((query_len as f64 * 0.05).ceil() as usize),
            normalize: true,
            pruning: Pruning::all(),
        }
    }
}

/// One subsequence hit: the pattern index that is uplinked instead of the
/// raw samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchEvent {
    pub offset: usize,
    pub length: usize,
    pub distance: f64,
    pub query_id: String,
}

/// Exact DTW distance between two series under the configured band.
///
/// Minimum cumulative squared-difference cost over all monotone warping
/// paths from (0,0) to (n-1,m-1) with steps {(1,0),(0,1),(1,1)}.
pub fn dtw_distance(a: &[f64], b: &[f64], config: &DtwConfig) -> Result<f64, DtwError> {
    if a.is_empty() || b.is_empty() {
        return Err(DtwError::EmptySeries);
    }
    let radius = effective_radius(config.band, a.len(), b.len());
    if let Some(r) = radius {
        if a.len().abs_diff(b.len()) > r {
            return Err(DtwError::BandExcludesEndpoint {
                radius: r,
                len_a: a.len(),
                len_b: b.len(),
            });
        }
    }
    if config.normalize {
        let qa = z_normalize_or_zeros(a);
        let qb = z_normalize_or_zeros(b);
        Ok(banded_dp(&qa, &qb, radius, f64::INFINITY))
    } else {
        Ok(banded_dp(a, b, radius, f64::INFINITY))
    }
}

fn z_normalize_or_zeros(v: &[f64]) -> Vec<f64> {
    if v.len() < 2 {
        return vec![0.0; v.len()];
    }
    z_normalize(v).expect("length checked")
}

fn effective_radius(band: Band, len_a: usize, len_b: usize) -> Option<usize> {
    match band {
        Band::Unconstrained => None,
        // a radius covering the whole grid is no constraint at all
        Band::Radius(r) if r >= len_a.max(len_b) => None,
        Band::Radius(r) => Some(r),
    }
}

/// The DP core. `bound` enables early abandoning: whenever every reachable
/// cell of a row exceeds `bound`, the final distance must too, and INFINITY
/// is returned. With `bound = INFINITY` this computes the exact distance.
fn banded_dp(a: &[f64], b: &[f64], radius: Option<usize>, bound: f64) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];

    for (i, &ai) in a.iter().enumerate() {
        let (j_lo, j_hi) = match radius {
            Some(r) => (i.saturating_sub(r), (i + r).min(m - 1)),
            None => (0, m - 1),
        };
        if j_lo > 0 {
            curr[j_lo - 1] = f64::INFINITY;
        }
        let mut row_min = f64::INFINITY;
        for j in j_lo..=j_hi {
            let d = ai - b[j];
            let cost = d * d;
            let best_prev = if i == 0 && j == 0 {
                0.0
            } else {
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > j_lo { curr[j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 {
                    prev[j - 1]
                } else {
                    f64::INFINITY
                };
                up.min(left).min(diag)
            };
            curr[j] = cost + best_prev;
            row_min = row_min.min(curr[j]);
        }
        if row_min > bound {
            return f64::INFINITY;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m - 1]
}

/// Envelope lower bound on the banded DTW distance between equal-length
/// sequences. With radius 0 the envelope collapses onto the query and the
/// bound equals the squared Euclidean distance.
pub fn lb_keogh(query: &[f64], candidate: &[f64], band_radius: usize) -> Result<f64, DtwError> {
    if query.len() != candidate.len() {
        return Err(DtwError::LengthMismatch(query.len(), candidate.len()));
    }
    if query.is_empty() {
        return Err(DtwError::EmptySeries);
    }
    let (upper, lower) = envelope(query, band_radius);
    Ok(lb_keogh_with_envelope(
        &upper,
        &lower,
        candidate,
        f64::INFINITY,
    ))
}

/// Running min/max envelope of `v` over a window of +-radius.
fn envelope(v: &[f64], radius: usize) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        let mut u = f64::NEG_INFINITY;
        let mut l = f64::INFINITY;
        for &x in &v[lo..=hi] {
            u = u.max(x);
            l = l.min(x);
        }
        upper.push(u);
        lower.push(l);
    }
    (upper, lower)
}

fn lb_keogh_with_envelope(upper: &[f64], lower: &[f64], candidate: &[f64], bound: f64) -> f64 {
    let mut sum = 0.0;
    for ((&u, &l), &c) in upper.iter().zip(lower).zip(candidate) {
        if c > u {
            let d = c - u;
            sum += d * d;
        } else if c < l {
            let d = l - c;
            sum += d * d;
        }
        if sum > bound {
            return sum;
        }
    }
    sum
}

/// Finds every offset where the query matches the stream within `threshold`.
///
/// Slides a window of query length over the stream; in normalized mode both
/// query and window are z-normalized first and flat (zero-variance) windows
/// are skipped. The pruning cascade never changes the result set, only the
/// amount of DP work. Results come back sorted by offset with exact
/// distances.
pub fn subsequence_search(
    query: &Frame,
    stream: &TimeSeries,
    config: &DtwConfig,
    threshold: f64,
    query_id: &str,
) -> Result<Vec<MatchEvent>, DtwError> {
    let m = query.len();
    let n = stream.len();
    if m == 0 {
        return Err(DtwError::EmptySeries);
    }
    if m > n {
        return Err(DtwError::QueryTooLong {
            query: m,
            stream: n,
        });
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(DtwError::InvalidThreshold(threshold));
    }

    let radius = effective_radius(config.band, m, m);
    let q: Vec<f64> = if config.normalize {
        z_normalize_or_zeros(&query.values)
    } else {
        query.values.clone()
    };
    // envelope radius: unconstrained DTW is bounded by the full-width envelope
    let env_radius = radius.unwrap_or(m - 1);
    let (upper, lower) = envelope(&q, env_radius);

    let samples = stream.samples();
    let mut matches = Vec::new();
    let mut window_buf = vec![0.0; m];

    for offset in 0..=(n - m) {
        let window = &samples[offset..offset + m];
        let cand: &[f64] = if config.normalize {
            match normalize_window(window, &mut window_buf) {
                Some(()) => &window_buf,
                None => continue, // flat candidate
            }
        } else {
            window
        };

        if config.pruning.endpoint_bound {
            let d_first = q[0] - cand[0];
            let d_last = q[m - 1] - cand[m - 1];
            let bound = if m > 1 {
                d_first * d_first + d_last * d_last
            } else {
                d_first * d_first
            };
            if bound > threshold {
                continue;
            }
        }
        if config.pruning.envelope_bound
            && lb_keogh_with_envelope(&upper, &lower, cand, threshold) > threshold
        {
            continue;
        }

        let abandon_at = if config.pruning.early_abandon {
            threshold
        } else {
            f64::INFINITY
        };
        let d = banded_dp(&q, cand, radius, abandon_at);
        if d <= threshold {
            matches.push(MatchEvent {
                offset,
                length: m,
                distance: d,
                query_id: query_id.to_string(),
            });
        }
    }
    Ok(matches)
}

/// Minimum distance over every candidate offset, with the same skipping
/// rules as `subsequence_search`. Offsets inside `exclude` are not
/// considered, which is how a threshold can be derived relative to the best
/// match that is not the query's own position. Ties keep the earliest
/// offset. Returns `None` when no offset is admissible.
pub fn best_subsequence_distance(
    query: &Frame,
    stream: &TimeSeries,
    config: &DtwConfig,
    exclude: Option<std::ops::Range<usize>>,
) -> Result<Option<(usize, f64)>, DtwError> {
    let m = query.len();
    let n = stream.len();
    if m == 0 {
        return Err(DtwError::EmptySeries);
    }
    if m > n {
        return Err(DtwError::QueryTooLong {
            query: m,
            stream: n,
        });
    }
    let radius = effective_radius(config.band, m, m);
    let q: Vec<f64> = if config.normalize {
        z_normalize_or_zeros(&query.values)
    } else {
        query.values.clone()
    };
    let env_radius = radius.unwrap_or(m - 1);
    let (upper, lower) = envelope(&q, env_radius);

    let samples = stream.samples();
    let mut best: Option<(usize, f64)> = None;
    let mut bsf = f64::INFINITY;
    let mut window_buf = vec![0.0; m];

    for offset in 0..=(n - m) {
        if exclude.as_ref().is_some_and(|r| r.contains(&offset)) {
            continue;
        }
        let window = &samples[offset..offset + m];
        let cand: &[f64] = if config.normalize {
            match normalize_window(window, &mut window_buf) {
                Some(()) => &window_buf,
                None => continue,
            }
        } else {
            window
        };
        if config.pruning.envelope_bound && lb_keogh_with_envelope(&upper, &lower, cand, bsf) >= bsf
        {
            continue;
        }
        let abandon_at = if config.pruning.early_abandon {
            bsf
        } else {
            f64::INFINITY
        };
        let d = banded_dp(&q, cand, radius, abandon_at);
        if d < bsf {
            bsf = d;
            best = Some((offset, d));
        }
    }
    Ok(best)
}

/// Two-pass z-normalization of a window into `out`. Returns `None` for a
/// zero-variance window, which the search skips.
fn normalize_window(window: &[f64], out: &mut [f64]) -> Option<()> {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return None;
    }
    for (o, &w) in out.iter_mut().zip(window) {
        *o = (w - mean) / std;
    }
    Some(())
}

/// Waiting-window rule: the stream is tiled into consecutive windows of
/// `window_len` samples and only the most similar match in each tile is
/// kept. Ties go to the earlier offset.
pub fn window_dedup(matches: &[MatchEvent], window_len: usize) -> Vec<MatchEvent> {
    let window_len = window_len.max(1);
    let mut out: Vec<MatchEvent> = Vec::new();
    for m in matches {
        let tile = m.offset / window_len;
        match out.last_mut() {
            Some(last) if last.offset / window_len == tile => {
                if m.distance < last.distance {
                    *last = m.clone();
                }
            }
            _ => out.push(m.clone()),
        }
    }
    out
}
