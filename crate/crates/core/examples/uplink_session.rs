//! One full gateway session: ingest a recording, reduce it, write the TSV
//! session log, stage the artifact and deliver it to a filesystem sink
//! with an idempotency key. Pass an http(s) URL to post to a real endpoint
//! instead.
//!
//!     cargo run --release -p biogate --example uplink_session -- [sink-uri]

use biogate::gateway::{RetryPolicy, Session, Sink, StrategyKind};
use biogate::ingest::{write_wav, SourceDescriptor, SourceKind};
use biogate::synth::{speech_like, SpeechParams};
use biogate::ReductionStrategy;

fn main() {
    let dir = std::env::temp_dir().join("biogate-example-session");
    std::fs::create_dir_all(&dir).unwrap();
    let sink = match std::env::args().nth(1) {
        Some(uri) => Sink::parse(&uri).expect("valid sink uri"),
        None => Sink::Filesystem(dir.join("outbox")),
    };

    let wav = dir.join("exercise.wav");
    write_wav(&wav, &speech_like(&SpeechParams::default(), 42)).unwrap();

    let mut session = Session::new(&dir.join("logs"), &dir.join("staging")).expect("session");
    let desc = SourceDescriptor::new(SourceKind::Wav, &wav);
    let (report, receipt) = session
        .run(
            &desc,
            &ReductionStrategy::default_for(StrategyKind::Clip),
            &sink,
            &RetryPolicy::default(),
        )
        .expect("session run");

    println!(
        "reduced {} bytes to {} ({:.2}%) in {:.4} s",
        report.original_bytes,
        report.reduced_bytes,
        report.reduction_percent,
        report.processing_seconds
    );
    println!(
        "delivered to {} on attempt {} (idempotency key {}...)",
        receipt.destination,
        receipt.attempts,
        &receipt.idempotency_key[..16]
    );
    println!("session uplinked {} bytes total", session.bytes_uplinked());
    println!("\nsession log {}:", session.log_path().display());
    print!("{}", std::fs::read_to_string(session.log_path()).unwrap());
}
