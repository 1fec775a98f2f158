//! End-to-end pipeline checks on a small synthetic corpus: cache round
//! trips, benchmark report structure, determinism, and the
//! enhancement-with-exact-ground-truth sanity run.

use std::path::Path;

use npsd::dataset::{
    build_training_set, ground_truth_psd, load_corpus, read_sequences, write_sequences,
    CorpusManifest, Split, SynthConfig,
};
use npsd::dsp::{stft, WaveBuffer};
use npsd::enhance::{apply_and_resynthesize, wiener_gains, EnhanceConfig};
use npsd::estimator::{Method, MinStatConfig, NoisePsdTrack};
use npsd::eval::{
    run_benchmark, snr_seg, write_report_csv, write_summary_csv, BenchmarkConfig,
};
use npsd::net::{NetworkDims, NetworkParams};
use npsd::signals::{pink_noise, speech_like, white_noise};
use npsd::wav::write_wav_f32;

fn write_corpus(dir: &Path, n_speech: usize, speech_secs: usize, noise_secs: usize) {
    std::fs::create_dir_all(dir.join("speech")).unwrap();
    std::fs::create_dir_all(dir.join("noise")).unwrap();
    for i in 0..n_speech {
        let buf = speech_like(16000 * speech_secs, 1000 + i as u64);
        write_wav_f32(&dir.join(format!("speech/s{i:02}.wav")), &buf).unwrap();
    }
    write_wav_f32(
        &dir.join("noise/white.wav"),
        &white_noise(16000 * noise_secs, 1),
    )
    .unwrap();
    write_wav_f32(
        &dir.join("noise/pink.wav"),
        &pink_noise(16000 * noise_secs, 2),
    )
    .unwrap();
}

fn load(dir: &Path) -> CorpusManifest {
    load_corpus(
        &["speech/*.wav".into()],
        &["noise/*.wav".into()],
        [0.5, 0.2, 0.3],
        dir,
    )
    .unwrap()
}

#[test]
fn sequence_cache_roundtrips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 4, 3, 30);
    let corpus = load(dir.path());
    let cfg = SynthConfig::default();
    let ds = build_training_set(&corpus, &cfg, Split::Train, &[0.0], 3.0, 5).unwrap();
    assert!(!ds.sequences.is_empty());

    let path = dir.path().join("train.nseq");
    write_sequences(&path, &ds.sequences).unwrap();
    let back = read_sequences(&path).unwrap();
    assert_eq!(back.len(), ds.sequences.len());
    for (a, b) in ds.sequences.iter().zip(&back) {
        assert_eq!(a.k, b.k);
        assert_eq!(a.mu.to_bits(), b.mu.to_bits());
        assert_eq!(a.input, b.input);
        assert_eq!(a.target, b.target);
    }
}

#[test]
fn benchmark_report_structure_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 6, 3, 40);
    let corpus = load(dir.path());

    let params = NetworkParams::<f32>::init(NetworkDims::new(3, 6, 4), 9).unwrap();
    let cfg = BenchmarkConfig {
        snrs_db: vec![5.0],
        seconds_per_condition: 4.0,
        methods: vec![Method::Lstm, Method::MinStat],
        seed: 17,
        ..BenchmarkConfig::default()
    };

    let report = run_benchmark(&corpus, &cfg, Some(&params)).unwrap();
    // 2 noise types x 1 SNR x 2 methods.
    assert_eq!(report.rows.len(), 4);
    // Summary: one noise-type average per (method, SNR).
    assert_eq!(report.summary.len(), 2);

    // The average row equals the unweighted mean of the per-noise rows.
    for s in &report.summary {
        let rows: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.method == s.method && r.snr_db == s.snr_db)
            .collect();
        let mean = rows.iter().map(|r| r.log_err_db).sum::<f64>() / rows.len() as f64;
        assert!((mean - s.log_err_db).abs() <= 1e-12);
        let mean_snr = rows.iter().map(|r| r.snr_seg_db).sum::<f64>() / rows.len() as f64;
        assert!((mean_snr - s.snr_seg_db).abs() <= 1e-12);
    }

    // Identical seed: bit-identical CSV output.
    let report2 = run_benchmark(&corpus, &cfg, Some(&params)).unwrap();
    let a1 = dir.path().join("report1.csv");
    let a2 = dir.path().join("report2.csv");
    write_report_csv(&a1, &report).unwrap();
    write_report_csv(&a2, &report2).unwrap();
    assert_eq!(std::fs::read(&a1).unwrap(), std::fs::read(&a2).unwrap());
    let s1 = dir.path().join("summary1.csv");
    write_summary_csv(&s1, &report).unwrap();
    let text = std::fs::read_to_string(&s1).unwrap();
    assert!(text.starts_with("method,snr_db,log_err_db,snr_seg_db\n"));

    // A different seed draws different mixtures.
    let report3 = run_benchmark(
        &corpus,
        &BenchmarkConfig { seed: 18, ..cfg },
        Some(&params),
    )
    .unwrap();
    assert_ne!(
        report.rows[0].log_err_db.to_bits(),
        report3.rows[0].log_err_db.to_bits()
    );
}

#[test]
fn lstm_method_without_checkpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 4, 2, 20);
    let corpus = load(dir.path());
    let cfg = BenchmarkConfig {
        snrs_db: vec![0.0],
        seconds_per_condition: 2.0,
        ..BenchmarkConfig::default()
    };
    assert!(matches!(
        run_benchmark(&corpus, &cfg, None),
        Err(npsd::Error::Config(_))
    ));
}

#[test]
fn exact_ground_truth_track_improves_segmental_snr() {
    // Wiener enhancement driven by the exact noise PSD must not lose ground
    // against the unprocessed mixture on a stationary-noise mix.
    let speech = speech_like(16000 * 4, 77);
    let noise = white_noise(16000 * 4, 78);
    let (mix, scaled_noise) = npsd::dataset::mix_at_snr(&speech, &noise, 5.0).unwrap();

    let spec = stft(&mix, 512, 256).unwrap();
    let gt = ground_truth_psd(&stft(&scaled_noise, 512, 256).unwrap(), 0.8).unwrap();
    let track = NoisePsdTrack::from_grid(
        Method::MinStat,
        0,
        gt.lambda.clone(),
        vec![false; gt.lambda.frames()],
    )
    .unwrap();

    let gains = wiener_gains(&spec, &track, &EnhanceConfig::default()).unwrap();
    let enhanced = apply_and_resynthesize(&spec, &gains).unwrap();

    let n = enhanced.len().min(speech.len());
    let clean = WaveBuffer::new(speech.samples[..n].to_vec(), 16000);
    let noisy = WaveBuffer::new(mix.samples[..n].to_vec(), 16000);
    let processed = WaveBuffer::new(enhanced.samples[..n].to_vec(), 16000);

    let before = snr_seg(&clean, &noisy).unwrap();
    let after = snr_seg(&clean, &processed).unwrap();
    assert!(
        after >= before,
        "enhancement with exact PSD lost ground: {after:.2} dB vs {before:.2} dB"
    );
}

#[test]
fn min_stat_does_not_need_a_network() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 4, 3, 20);
    let corpus = load(dir.path());
    let cfg = BenchmarkConfig {
        snrs_db: vec![10.0],
        seconds_per_condition: 2.0,
        methods: vec![Method::MinStat],
        seed: 3,
        ..BenchmarkConfig::default()
    };
    let report = run_benchmark(&corpus, &cfg, None).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows.iter().all(|r| r.n_frames > 0));
}
