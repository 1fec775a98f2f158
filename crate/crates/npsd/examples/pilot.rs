//! Desk-scale pilot: synthesize a tiny white+pink corpus, train briefly, and
//! compare the trained estimator against the minimum-statistics baseline.
//! Useful for sizing the full acceptance run.

use std::time::Instant;

use npsd::dataset::{build_training_set, load_corpus, Split, SynthConfig};
use npsd::estimator::Method;
use npsd::eval::{run_benchmark, BenchmarkConfig};
use npsd::net::{train, NetworkDims, TrainOptions};
use npsd::signals::{pink_noise, speech_like, white_noise};
use npsd::wav::write_wav_f32;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let train_secs: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(24.0);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);

    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    std::fs::create_dir_all(dir.path().join("speech")).unwrap();
    std::fs::create_dir_all(dir.path().join("noise")).unwrap();
    for i in 0..40 {
        let buf = speech_like(16000 * 15, 9000 + i);
        write_wav_f32(&dir.path().join(format!("speech/s{i:02}.wav")), &buf).unwrap();
    }
    write_wav_f32(&dir.path().join("noise/white.wav"), &white_noise(16000 * 240, 1)).unwrap();
    write_wav_f32(&dir.path().join("noise/pink.wav"), &pink_noise(16000 * 240, 2)).unwrap();
    println!("[{:6.1?}] corpus written", t0.elapsed());

    let corpus = load_corpus(
        &["speech/*.wav".into()],
        &["noise/*.wav".into()],
        [0.7, 0.1, 0.2],
        dir.path(),
    )
    .unwrap();
    let cfg = SynthConfig::default();
    let train_set =
        build_training_set(&corpus, &cfg, Split::Train, &[-3.0, 3.0, 9.0, 15.0], train_secs, 42)
            .unwrap();
    let val_set =
        build_training_set(&corpus, &cfg, Split::Validation, &[0.0, 5.0, 10.0, 15.0], 4.0, 42)
            .unwrap();
    println!(
        "[{:6.1?}] synthesized {} train / {} val sequences",
        t0.elapsed(),
        train_set.sequences.len(),
        val_set.sequences.len()
    );

    let opts = TrainOptions {
        max_epochs: epochs,
        seed: 7,
        ..TrainOptions::default()
    };
    let outcome = train(
        NetworkDims::new(3, 32, 16),
        &train_set.sequences,
        &val_set.sequences,
        &opts,
    )
    .unwrap();
    for h in &outcome.history {
        println!(
            "[{:6.1?}] epoch {}: train {:.4}, val {:.4}",
            t0.elapsed(),
            h.epoch,
            h.train_mse,
            h.val_mse
        );
    }

    let bench = BenchmarkConfig {
        seconds_per_condition: 16.0,
        seed: 99,
        ..BenchmarkConfig::default()
    };
    let report = run_benchmark(&corpus, &bench, Some(&outcome.params)).unwrap();
    for r in &report.rows {
        println!(
            "  {:8} {:6} {:>3} dB: LogErr {:6.3} dB (over {:.3} under {:.3}), SNRseg {:6.3} dB",
            r.method.label(),
            r.noise,
            r.snr_db,
            r.log_err_db,
            r.over_db,
            r.under_db,
            r.snr_seg_db
        );
    }
    let avg = |m: Method, f: &dyn Fn(&npsd::eval::SummaryRow) -> f64| -> f64 {
        let rows: Vec<f64> = report.summary.iter().filter(|s| s.method == m).map(f).collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    println!(
        "[{:6.1?}] LSTM LogErr {:.3} dB vs min-stat {:.3} dB (margin {:.3}); SNRseg {:.3} vs {:.3}",
        t0.elapsed(),
        avg(Method::Lstm, &|s| s.log_err_db),
        avg(Method::MinStat, &|s| s.log_err_db),
        avg(Method::MinStat, &|s| s.log_err_db) - avg(Method::Lstm, &|s| s.log_err_db),
        avg(Method::Lstm, &|s| s.snr_seg_db),
        avg(Method::MinStat, &|s| s.snr_seg_db),
    );
}
