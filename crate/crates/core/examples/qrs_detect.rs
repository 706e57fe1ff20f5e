//! Pan-Tompkins QRS detection: whole-record and streaming invocations give
//! identical fiducials, and the RR series falls out of the beat train.
//!
//!     cargo run --release -p biogate --example qrs_detect

use biogate::qrs::{pan_tompkins, rr_intervals, QrsDetector};
use biogate::synth::{ecg_like, EcgParams};

fn main() {
    let params = EcgParams {
        duration_s: 30.0,
        bpm: 72.0,
        rr_jitter: 0.04,
        ..EcgParams::default()
    };
    let (series, truth) = ecg_like(&params, 7);
    println!(
        "synthetic ECG: {} samples at {} Hz, {} true beats",
        series.len(),
        series.sample_rate_hz(),
        truth.len()
    );

    let annotations = pan_tompkins(&series).expect("detect");
    println!("whole-record pass found {} beats", annotations.len());

    // same record pushed in uneven chunks, as a live feed would arrive
    let mut detector = QrsDetector::new(series.sample_rate_hz()).unwrap();
    for chunk in series.samples().chunks(777) {
        detector.push(chunk);
    }
    let streamed = detector.finish();
    assert_eq!(
        streamed,
        annotations.fiducials(),
        "chunking must not matter"
    );
    println!("streaming pass agrees beat for beat");

    let rr = rr_intervals(&annotations).expect("rr");
    let mean_rr = rr.intervals_ms.iter().sum::<f64>() / rr.intervals_ms.len() as f64;
    println!(
        "mean RR {:.1} ms (~{:.1} bpm), first five: {:?}",
        mean_rr,
        60_000.0 / mean_rr,
        rr.intervals_ms[..5.min(rr.intervals_ms.len())]
            .iter()
            .map(|v| (v * 10.0).round() / 10.0)
            .collect::<Vec<_>>()
    );
}
