//! The lossless baselines: gzip (reversible, moderate reduction) against
//! passthrough (reversible, no reduction), with exact byte accounting.
//!
//!     cargo run --release -p biogate --example gzip_baseline -- [file]

use biogate::gateway::{gzip_decompress, reduce, ArtifactBody, ReductionStrategy, StrategyKind};
use biogate::ingest::{write_adc_csv, SourceDescriptor, SourceKind};
use biogate::synth::{ecg_like, EcgParams};

fn main() {
    let path = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("biogate-example-gzip.csv");
            let (ecg, _) = ecg_like(
                &EcgParams {
                    duration_s: 20.0,
                    noise_mv: 0.001,
                    ..EcgParams::default()
                },
                11,
            );
            write_adc_csv(&p, &ecg, 200.0, 1024.0).unwrap();
            println!("no input given; synthesized {}", p.display());
            p
        }
    };
    let kind = SourceKind::from_extension(&path).unwrap_or(SourceKind::Csv);
    let desc = SourceDescriptor::new(kind, &path).with_rate(360.0);

    let (artifact, report) =
        reduce(&desc, &ReductionStrategy::default_for(StrategyKind::Gzip)).expect("gzip strategy");
    println!(
        "gzip: {} -> {} bytes ({:.2}% reduction), lossy = {}",
        report.original_bytes,
        report.reduced_bytes,
        report.reduction_percent,
        artifact.lossy()
    );
    // the round trip proves reversibility
    let ArtifactBody::GzipMember(member) = &artifact.body else {
        unreachable!()
    };
    let restored = gzip_decompress(member).expect("valid member");
    assert_eq!(restored, std::fs::read(&path).unwrap());
    println!("decompression restored the source bit-exactly");

    let (_, pass_report) = reduce(
        &desc,
        &ReductionStrategy::default_for(StrategyKind::Passthrough),
    )
    .unwrap();
    println!(
        "passthrough: {} -> {} bytes ({:.3}% — the artifact header costs a little)",
        pass_report.original_bytes, pass_report.reduced_bytes, pass_report.reduction_percent
    );
}
