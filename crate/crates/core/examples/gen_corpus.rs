//! Generates a synthetic corpus to stand in for patient recordings:
//! voiced speech-like WAVs and ECG-like CSV excerpts with known beats.
//!
//!     cargo run --release -p biogate --example gen_corpus -- [out-dir]

use biogate::synth::{write_ecg_csv_corpus, write_speech_corpus};

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "corpus".to_string());
    let out = std::path::PathBuf::from(out);

    let speech_dir = out.join("speech");
    let speech = write_speech_corpus(&speech_dir, 10, 0xC0FFEE).expect("write speech corpus");
    println!(
        "{} speech recordings in {}",
        speech.len(),
        speech_dir.display()
    );
    for p in &speech {
        let bytes = std::fs::metadata(p).unwrap().len();
        println!(
            "  {} ({bytes} bytes)",
            p.file_name().unwrap().to_string_lossy()
        );
    }

    let ecg_dir = out.join("ecg");
    let ecg = write_ecg_csv_corpus(&ecg_dir, 5, 0xEC6).expect("write ecg corpus");
    println!("{} ECG excerpts in {}", ecg.len(), ecg_dir.display());
    for (p, beats) in &ecg {
        let bytes = std::fs::metadata(p).unwrap().len();
        println!(
            "  {} ({bytes} bytes, {} beats)",
            p.file_name().unwrap().to_string_lossy(),
            beats.len()
        );
    }
    println!("\ntry: cargo run --release -p biogate -- bench --corpus {} --strategies clip,dtw_index,gzip", speech_dir.display());
}
