//! Generate a self-contained demo corpus (synthetic speech-like files plus
//! white and pink noise) and a matching run configuration, so the CLI can be
//! exercised without any external audio data.
//!
//! Usage: `cargo run --release -p npsd --example gen_demo_corpus -- <dir>`

use npsd::signals::{pink_noise, speech_like, white_noise};
use npsd::wav::write_wav_f32;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "demo_corpus".to_string());
    let dir = std::path::PathBuf::from(dir);
    std::fs::create_dir_all(dir.join("speech")).unwrap();
    std::fs::create_dir_all(dir.join("noise")).unwrap();

    for i in 0..40u64 {
        let buf = speech_like(16000 * 8, 8000 + i);
        write_wav_f32(&dir.join(format!("speech/s{i:02}.wav")), &buf).unwrap();
    }
    write_wav_f32(&dir.join("noise/white.wav"), &white_noise(16000 * 120, 1)).unwrap();
    write_wav_f32(&dir.join("noise/pink.wav"), &pink_noise(16000 * 120, 2)).unwrap();

    std::fs::write(
        dir.join("run.toml"),
        r#"seed = 42

[corpus]
speech = ["speech/*.wav"]
noise = ["noise/*.wav"]

[dataset]
train_seconds_per_condition = 40.0
validation_seconds_per_condition = 8.0
test_seconds_per_condition = 16.0

[net]
hidden1 = 32
hidden2 = 16

[train]
max_epochs = 3
"#,
    )
    .unwrap();

    println!(
        "demo corpus written to {}: 40 speech files (8 s each), white + pink noise, run.toml",
        dir.display()
    );
}
