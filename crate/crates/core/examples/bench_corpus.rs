//! Reduction benchmark over a corpus: per-file rows and per-strategy
//! summaries for both the speech and the ECG sides, printed as CSV. With
//! no argument it synthesizes the corpora first.
//!
//!     cargo run --release -p biogate --example bench_corpus -- [corpus-dir]

use biogate::bench::{discover_corpus, rows_to_csv, run_bench, summaries_to_csv, BenchOptions};
use biogate::gateway::StrategyKind;
use biogate::synth::{write_ecg_csv_corpus, write_speech_corpus};

fn bench_dir(dir: &std::path::Path, strategies: &[StrategyKind], opts: &BenchOptions) {
    let corpus = discover_corpus(dir, opts).expect("readable corpus dir");
    if corpus.is_empty() {
        println!("(no files in {})", dir.display());
        return;
    }
    let out = run_bench(&corpus, strategies, opts).expect("bench run");
    print!("{}", rows_to_csv(&out.rows));
    println!();
    print!("{}", summaries_to_csv(&out.summaries));
    for s in &out.summaries {
        println!(
            "# {}: {} bytes would cross the uplink instead of {}",
            s.strategy.as_str(),
            s.total_reduced_bytes,
            s.total_original_bytes
        );
    }
    println!();
}

fn main() {
    let opts = BenchOptions {
        jobs: 4,
        ..BenchOptions::default()
    };
    match std::env::args().nth(1) {
        Some(dir) => {
            // user corpus: apply every strategy that fits mixed content
            bench_dir(
                std::path::Path::new(&dir),
                &[
                    StrategyKind::DtwIndex,
                    StrategyKind::Gzip,
                    StrategyKind::Passthrough,
                ],
                &opts,
            );
        }
        None => {
            let base = std::env::temp_dir().join("biogate-example-bench");
            let speech = base.join("speech");
            let ecg = base.join("ecg");
            write_speech_corpus(&speech, 10, 0xC0FFEE).unwrap();
            write_ecg_csv_corpus(&ecg, 5, 0xEC6).unwrap();

            println!("## speech corpus ({})", speech.display());
            bench_dir(
                &speech,
                &[
                    StrategyKind::Clip,
                    StrategyKind::DtwIndex,
                    StrategyKind::Gzip,
                ],
                &opts,
            );

            println!("## ecg corpus ({})", ecg.display());
            bench_dir(
                &ecg,
                &[
                    StrategyKind::DtwIndex,
                    StrategyKind::QrsEvents,
                    StrategyKind::Gzip,
                ],
                &opts,
            );
        }
    }
}
