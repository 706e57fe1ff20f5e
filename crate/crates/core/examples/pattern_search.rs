//! DTW subsequence search over a stream: plant a pattern, find every
//! occurrence, show that the pruning cascade changes the time but never
//! the answer, then apply the waiting-window rule.
//!
//!     cargo run --release -p biogate --example pattern_search

use std::time::Instant;

use biogate::dtw::{subsequence_search, window_dedup, Band, DtwConfig, Pruning};
use biogate::synth::{voiced_tone, white_noise, XorShift};
use biogate::timeseries::{Frame, TimeSeries};

fn main() {
    let rate = 8000.0;
    let mut rng = XorShift::new(99);

    // a noisy stream with the same motif planted at three places, scaled
    // differently each time; z-normalized search treats them alike
    let motif = voiced_tone(140.0, rate, 320, 0.5);
    let mut stream = white_noise(24_000, 0.05, &mut rng);
    for (offset, scale) in [(4_000usize, 1.0), (12_000, 0.4), (19_000, 2.5)] {
        for (i, v) in motif.iter().enumerate() {
            stream[offset + i] = v * scale;
        }
    }
    let stream = TimeSeries::new(stream, rate, "demo-stream").unwrap();
    let query = Frame {
        start_index: 4_000,
        values: motif,
        sample_rate_hz: rate,
    };

    let config = DtwConfig {
        band: Band::Radius(16),
        normalize: true,
        pruning: Pruning::all(),
    };
    let threshold = 1.0;

    let clock = Instant::now();
    let pruned = subsequence_search(&query, &stream, &config, threshold, "motif").unwrap();
    let with_pruning = clock.elapsed();

    let slow_config = DtwConfig {
        pruning: Pruning::none(),
        ..config
    };
    let clock = Instant::now();
    let unpruned = subsequence_search(&query, &stream, &slow_config, threshold, "motif").unwrap();
    let without_pruning = clock.elapsed();

    assert_eq!(pruned, unpruned, "pruning must never change the result set");
    println!(
        "search with pruning {:?}, without {:?}, identical {} matches",
        with_pruning,
        without_pruning,
        pruned.len()
    );

    let kept = window_dedup(&pruned, query.len());
    println!(
        "waiting-window dedup keeps {} of {}:",
        kept.len(),
        pruned.len()
    );
    for m in &kept {
        println!(
            "  offset {} ({:.3} s), distance {:.6}",
            m.offset,
            m.offset as f64 / rate,
            m.distance
        );
    }
}
