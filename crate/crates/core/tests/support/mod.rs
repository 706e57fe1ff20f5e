//! Shared helpers for the integration suites: the MIT-format annotation
//! reader used as the reference-beat oracle, an independent full-table DTW
//! oracle, and beat-matching arithmetic.

#![allow(dead_code)]

use std::path::PathBuf;

/// One annotation: sample time and type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MitAnnotation {
    pub time: u64,
    pub code: u8,
}

/// Beat (QRS) annotation codes of the WFDB code table.
pub fn is_beat_code(code: u8) -> bool {
    matches!(code, 1..=13 | 25 | 34 | 35 | 38 | 41)
}

/// Reads MIT-format annotations: 16-bit little-endian words, 6-bit type
/// code and 10-bit time delta, with SKIP/NUM/SUB/CHN/AUX pseudo-codes.
/// SKIP carries a 4-byte PDP-11 long (high word first, words little-endian).
pub fn parse_mit_annotations(bytes: &[u8]) -> Result<Vec<MitAnnotation>, String> {
    let mut out = Vec::new();
    let mut time: u64 = 0;
    let mut pos = 0usize;
    loop {
        if pos + 2 > bytes.len() {
            break; // no explicit EOF marker; tolerate
        }
        let w = u16::from_le_bytes([bytes[pos], bytes[pos + 1]]);
        pos += 2;
        if w == 0 {
            break;
        }
        let code = (w >> 10) as u8;
        let delta = (w & 0x3FF) as u64;
        match code {
            59 => {
                // SKIP: 4-byte interval follows
                if pos + 4 > bytes.len() {
                    return Err("truncated SKIP interval".into());
                }
                let high = u16::from_le_bytes([bytes[pos], bytes[pos + 1]]) as u64;
                let low = u16::from_le_bytes([bytes[pos + 2], bytes[pos + 3]]) as u64;
                pos += 4;
                time += (high << 16) | low;
            }
            60..=62 => {
                // NUM / SUB / CHN modify the current annotation; no time change
            }
            63 => {
                // AUX: delta bytes of string, padded to even length
                let n = (delta + (delta & 1)) as usize;
                if pos + n > bytes.len() {
                    return Err("truncated AUX field".into());
                }
                pos += n;
            }
            _ => {
                time += delta;
                out.push(MitAnnotation { time, code });
            }
        }
    }
    Ok(out)
}

/// Independent MIT-format encoder used for round-trip checks and for
/// writing reference annotations of synthetic records.
pub fn encode_mit_annotations(annotations: &[MitAnnotation]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut prev: u64 = 0;
    for a in annotations {
        let delta = a.time - prev;
        prev = a.time;
        if delta > 1023 {
            // SKIP with the whole interval, then the annotation at delta 0
            out.extend_from_slice(&(59u16 << 10).to_le_bytes());
            let high = ((delta >> 16) & 0xFFFF) as u16;
            let low = (delta & 0xFFFF) as u16;
            out.extend_from_slice(&high.to_le_bytes());
            out.extend_from_slice(&low.to_le_bytes());
            out.extend_from_slice(&((a.code as u16) << 10).to_le_bytes());
        } else {
            let w = ((a.code as u16) << 10) | delta as u16;
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out.extend_from_slice(&0u16.to_le_bytes());
    out
}

/// Full-table DTW reference, written independently of the library's
/// rolling-array DP. Squared-difference local cost, optional Sakoe-Chiba
/// radius.
pub fn naive_dtw(a: &[f64], b: &[f64], radius: Option<usize>) -> f64 {
    let n = a.len();
    let m = b.len();
    let mut table = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        for j in 0..m {
            if let Some(r) = radius {
                if i.abs_diff(j) > r {
                    continue;
                }
            }
            let cost = (a[i] - b[j]) * (a[i] - b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 {
                    best = best.min(table[i - 1][j]);
                }
                if j > 0 {
                    best = best.min(table[i][j - 1]);
                }
                if i > 0 && j > 0 {
                    best = best.min(table[i - 1][j - 1]);
                }
                best
            };
            table[i][j] = cost + best;
        }
    }
    table[n - 1][m - 1]
}

/// Two-pass z-normalization for the oracle path; `None` for a flat window,
/// mirroring the search's declared skip rule.
pub fn naive_z_normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| (x - mean) / std).collect())
}

/// Brute-force subsequence scan: the full DP at every offset.
pub fn naive_subsequence_search(
    query: &[f64],
    stream: &[f64],
    radius: Option<usize>,
    normalize: bool,
    threshold: f64,
) -> Vec<(usize, f64)> {
    let m = query.len();
    let q = if normalize {
        naive_z_normalize(query).unwrap_or_else(|| vec![0.0; m])
    } else {
        query.to_vec()
    };
    let mut out = Vec::new();
    for offset in 0..=(stream.len() - m) {
        let window = &stream[offset..offset + m];
        let cand = if normalize {
            match naive_z_normalize(window) {
                Some(w) => w,
                None => continue,
            }
        } else {
            window.to_vec()
        };
        let d = naive_dtw(&q, &cand, radius);
        if d <= threshold {
            out.push((offset, d));
        }
    }
    out
}

/// Greedy nearest-match scoring of detected beats against reference beats.
/// Returns (true positives, false negatives, false positives).
pub fn match_beats(reference: &[u64], detected: &[u64], tolerance: u64) -> (usize, usize, usize) {
    let mut used = vec![false; detected.len()];
    let mut tp = 0usize;
    let mut j = 0usize;
    for &r in reference {
        while j < detected.len() && detected[j] + tolerance < r {
            j += 1;
        }
        let mut best: Option<usize> = None;
        for (k, &d) in detected.iter().enumerate().skip(j) {
            if d > r + tolerance {
                break;
            }
            if !used[k] {
                let better = match best {
                    Some(b) => d.abs_diff(r) < detected[b].abs_diff(r),
                    None => true,
                };
                if better {
                    best = Some(k);
                }
            }
        }
        if let Some(k) = best {
            used[k] = true;
            tp += 1;
        }
    }
    let fp = used.iter().filter(|u| !**u).count();
    let fnn = reference.len() - tp;
    (tp, fnn, fp)
}

/// Locates a user-supplied MIT-BIH directory: $MITDB_DIR, then
/// testdata/mitdb beside the crate, then at the workspace root.
pub fn find_mitdb() -> Option<PathBuf> {
    if let Ok(dir) = std::env::var("MITDB_DIR") {
        let p = PathBuf::from(dir);
        if p.join("100.dat").exists() {
            return Some(p);
        }
    }
    [
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata/mitdb"),
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata/mitdb"),
    ]
    .into_iter()
    .find(|base| base.join("100.dat").exists())
}

/// Unique scratch directory per test.
pub fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("biogate-acceptance-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn annotation_round_trip_including_skip() {
    let annotations = vec![
        MitAnnotation { time: 18, code: 28 },
        MitAnnotation { time: 77, code: 1 },
        MitAnnotation { time: 370, code: 1 },
        MitAnnotation {
            time: 5000,
            code: 5,
        }, // forces SKIP (delta 4630 > 1023)
        MitAnnotation {
            time: 5360,
            code: 1,
        },
    ];
    let bytes = encode_mit_annotations(&annotations);
    let back = parse_mit_annotations(&bytes).unwrap();
    assert_eq!(back, annotations);
}

#[test]
fn annotation_word_layout_matches_format() {
    // code 1 (NORMAL) at delta 77: word = (1 << 10) | 77 = 0x044D
    let bytes = [0x4D, 0x04, 0x00, 0x00];
    let anns = parse_mit_annotations(&bytes).unwrap();
    assert_eq!(anns, vec![MitAnnotation { time: 77, code: 1 }]);
}

#[test]
fn beat_matching_counts() {
    let reference = [100u64, 200, 300, 400];
    let detected = [102u64, 205, 390, 500];
    let (tp, fnn, fp) = match_beats(&reference, &detected, 18);
    assert_eq!((tp, fnn, fp), (3, 1, 1));
}
