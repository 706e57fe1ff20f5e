//! The clinical speech chain on one recording: low-pass, AMDF pitch with
//! median refinement, per-frame loudness, and what actually gets uplinked.
//!
//!     cargo run --release -p biogate --example speech_features -- [file.wav]

use biogate::clip::{clip_process, PitchConfig};
use biogate::gateway::{serialize_artifact, ArtifactBody, ReductionArtifact};
use biogate::ingest::{read_wav, write_wav};
use biogate::synth::{speech_like, SpeechParams};

fn main() {
    let path = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("biogate-example-speech.wav");
            write_wav(&p, &speech_like(&SpeechParams::default(), 1)).unwrap();
            println!("no input given; synthesized {}", p.display());
            p
        }
    };

    let ingested = read_wav(&path, 0).expect("decode wav");
    println!(
        "decoded {} samples at {} Hz ({} bytes on disk)",
        ingested.series.len(),
        ingested.series.sample_rate_hz(),
        ingested.source_bytes
    );

    let record = clip_process(&ingested.series, &PitchConfig::default()).expect("clip chain");
    println!(
        "avg loudness (mean per-frame RMS): {:.4}",
        record.avg_loudness
    );
    match record.avg_f0_hz {
        Some(f0) => println!("avg fundamental frequency: {f0:.1} Hz"),
        None => println!("no voiced frames found"),
    }
    println!("voiced {}/{} frames", record.n_voiced, record.n_frames);

    let artifact = ReductionArtifact::new(ArtifactBody::Features(record), "speech-demo");
    let payload = serialize_artifact(&artifact);
    let reduction = 100.0 * (1.0 - payload.len() as f64 / ingested.source_bytes as f64);
    println!(
        "uplink payload {} bytes instead of {} ({reduction:.2}% reduction)",
        payload.len(),
        ingested.source_bytes
    );
}
