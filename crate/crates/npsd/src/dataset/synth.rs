//! Mixture synthesis and training-set assembly.
//!
//! For each (noise type, SNR) condition, speech files are drawn at random
//! from the split's list and mixed with noise segments drawn from that
//! noise file's section for the split. When a drawn noise segment is too
//! short, another random offset is drawn rather than wrapping around, which
//! avoids periodicity artifacts. Every condition derives its own PRNG seed
//! from the master seed, so conditions can be synthesized in any order (or
//! in parallel) with identical results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{CorpusManifest, NoiseSource, Split};
use super::{
    extract_input_sequence, extract_target_sequence, ground_truth_psd, mix_at_snr, MixSpec,
    TrainingSequence,
};
use crate::dsp::{stft, WaveBuffer};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::wav;

#[derive(Clone, Copy, Debug)]
pub struct SynthConfig {
    pub fft_size: usize,
    pub hop: usize,
    /// Ground-truth recursive-averaging factor.
    pub alpha: f64,
    /// Sequence length T.
    pub seq_len: usize,
    /// Window-end stride between extracted sequences.
    pub stride: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            hop: 256,
            alpha: 0.8,
            seq_len: 128,
            stride: 64,
        }
    }
}

/// One synthesized mixture together with its ingredients.
#[derive(Clone, Debug)]
pub struct ConditionMix {
    pub speech: WaveBuffer,
    pub mix: WaveBuffer,
    pub scaled_noise: WaveBuffer,
    pub spec: MixSpec,
}

#[derive(Clone, Debug)]
pub struct ConditionStats {
    pub noise: String,
    pub snr_db: f64,
    pub n_mixes: usize,
    pub n_frames: usize,
    pub n_sequences: usize,
}

#[derive(Debug)]
pub struct SplitDataset {
    pub sequences: Vec<TrainingSequence>,
    pub stats: Vec<ConditionStats>,
}

/// Assemble `need` noise samples from the split's section of one noise file,
/// re-drawing a random offset whenever the remaining section is exhausted.
fn draw_noise_segment(
    rng: &mut ChaCha8Rng,
    noise_samples: &[f64],
    source: &NoiseSource,
    split: Split,
    need: usize,
) -> Result<(Vec<f64>, usize)> {
    let section = source.section(split);
    let sec = &noise_samples[section];
    if sec.is_empty() {
        return Err(Error::Config(format!(
            "noise '{}' has an empty {} section",
            source.name,
            split.label()
        )));
    }
    let mut out = Vec::with_capacity(need);
    let mut first_offset = None;
    while out.len() < need {
        let remaining = need - out.len();
        let (offset, take) = if remaining <= sec.len() {
            let offset = rng.random_range(0..=sec.len() - remaining);
            (offset, remaining)
        } else {
            let offset = rng.random_range(0..sec.len());
            (offset, sec.len() - offset)
        };
        first_offset.get_or_insert(offset);
        out.extend_from_slice(&sec[offset..offset + take]);
    }
    Ok((out, first_offset.unwrap_or(0)))
}

/// Synthesize mixtures for one (noise type, SNR) condition until at least
/// `seconds` of audio have been produced. Deterministic given the seed.
pub fn synthesize_condition(
    corpus: &CorpusManifest,
    noise_index: usize,
    snr_db: f64,
    split: Split,
    seconds: f64,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<Vec<ConditionMix>> {
    let source = corpus
        .noise
        .get(noise_index)
        .ok_or_else(|| Error::Config(format!("noise index {noise_index} out of range")))?;
    let speech_files = corpus.speech_files(split);
    if speech_files.is_empty() {
        return Err(Error::Config(format!(
            "speech {} split is empty",
            split.label()
        )));
    }

    // Preload; corpora at this scale fit comfortably in memory.
    let mut speech: Vec<(String, WaveBuffer)> = Vec::with_capacity(speech_files.len());
    for path in speech_files {
        let buf = wav::read_wav_16k(path)?;
        if buf.len() < cfg.fft_size {
            log::warn!(
                "skipping speech file {} ({} samples, shorter than one frame)",
                path.display(),
                buf.len()
            );
            continue;
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        speech.push((name, buf));
    }
    if speech.is_empty() {
        return Err(Error::Config(format!(
            "speech {} split has no usable files",
            split.label()
        )));
    }
    let noise_buf = wav::read_wav_16k(&source.path)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_samples = (seconds * 16_000.0).round() as usize;
    let mut produced = 0usize;
    let mut mixes = Vec::new();

    while produced < target_samples {
        let (speech_name, speech_buf) = &speech[rng.random_range(0..speech.len())];
        let need = speech_buf.len();
        let (noise_samples, noise_offset) =
            draw_noise_segment(&mut rng, &noise_buf.samples, source, split, need)?;
        let noise_seg = WaveBuffer::new(noise_samples, 16_000);
        let (mix, scaled_noise) = mix_at_snr(speech_buf, &noise_seg, snr_db)?;
        mixes.push(ConditionMix {
            speech: speech_buf.clone(),
            mix,
            scaled_noise,
            spec: MixSpec {
                snr_db,
                speech_id: speech_name.clone(),
                noise_id: source.name.clone(),
                noise_offset,
                duration: need,
            },
        });
        produced += need;
    }
    Ok(mixes)
}

/// Extract all training sequences from one mixture.
pub(crate) fn sequences_from_mix(
    mix: &ConditionMix,
    cfg: &SynthConfig,
) -> Result<(Vec<TrainingSequence>, usize)> {
    let spec = stft(&mix.mix, cfg.fft_size, cfg.hop)?;
    let frames = spec.frames();
    if frames < cfg.seq_len {
        log::warn!(
            "mixture of {} frames is shorter than T = {}; no sequences extracted",
            frames,
            cfg.seq_len
        );
        return Ok((Vec::new(), frames));
    }
    let mag = spec.magnitude();
    let noise_spec = stft(&mix.scaled_noise, cfg.fft_size, cfg.hop)?;
    let gt = ground_truth_psd(&noise_spec, cfg.alpha)?;

    let mut out = Vec::new();
    for k in 0..mag.bins() {
        let mut l_end = cfg.seq_len - 1;
        while l_end < frames {
            match extract_input_sequence(&mag, k, l_end, cfg.seq_len) {
                Ok((input, mu)) => {
                    let target = extract_target_sequence(&gt, k, l_end, cfg.seq_len, mu)?;
                    out.push(TrainingSequence {
                        k: k as u16,
                        l_end: l_end as u32,
                        mu: mu as f32,
                        input: input.iter().map(|&v| v as f32).collect(),
                        target: target.iter().map(|&v| v as f32).collect(),
                    });
                }
                Err(Error::DegenerateInput(_)) => {
                    // Digitally silent window; unusable as a training pair.
                    log::warn!("skipping silent window at bin {k}, frame {l_end}");
                }
                Err(e) => return Err(e),
            }
            l_end += cfg.stride;
        }
    }
    Ok((out, frames))
}

/// Build the full sequence set for one split across all (noise, SNR)
/// conditions. Sequence order is deterministic: conditions in manifest/SNR
/// order, then mixes, then bins, then window ends.
pub fn build_training_set(
    corpus: &CorpusManifest,
    cfg: &SynthConfig,
    split: Split,
    snrs_db: &[f64],
    seconds_per_condition: f64,
    master_seed: u64,
) -> Result<SplitDataset> {
    if cfg.stride < 1 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    if corpus.noise.is_empty() {
        return Err(Error::Config("manifest lists no noise files".into()));
    }
    if snrs_db.is_empty() {
        return Err(Error::Config("no SNRs configured for synthesis".into()));
    }

    let mut sequences = Vec::new();
    let mut stats = Vec::new();
    for (noise_index, source) in corpus.noise.iter().enumerate() {
        for (snr_index, &snr_db) in snrs_db.iter().enumerate() {
            let seed = derive_seed(
                master_seed,
                &[split.index() as u64, noise_index as u64, snr_index as u64],
            );
            let mixes = synthesize_condition(
                corpus,
                noise_index,
                snr_db,
                split,
                seconds_per_condition,
                cfg,
                seed,
            )?;
            let mut n_frames = 0;
            let mut n_sequences = 0;
            for mix in &mixes {
                let (seqs, frames) = sequences_from_mix(mix, cfg)?;
                n_frames += frames;
                n_sequences += seqs.len();
                sequences.extend(seqs);
            }
            stats.push(ConditionStats {
                noise: source.name.clone(),
                snr_db,
                n_mixes: mixes.len(),
                n_frames,
                n_sequences,
            });
        }
    }
    Ok(SplitDataset { sequences, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_corpus;
    use crate::wav::write_wav_f32;
    use std::path::Path;

    /// Samples for exactly `frames` STFT frames at 512/256.
    fn samples_for_frames(frames: usize) -> usize {
        (frames - 1) * 256 + 512
    }

    fn write_random_wav(path: &Path, len: usize, seed: u64, amp: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let buf = WaveBuffer::new(
            (0..len).map(|_| rng.random_range(-amp..amp)).collect(),
            16000,
        );
        write_wav_f32(path, &buf).unwrap();
    }

    fn tiny_corpus(dir: &Path, speech_frames: usize) -> CorpusManifest {
        std::fs::create_dir_all(dir.join("speech")).unwrap();
        std::fs::create_dir_all(dir.join("noise")).unwrap();
        write_random_wav(
            &dir.join("speech/s00.wav"),
            samples_for_frames(speech_frames),
            1,
            0.5,
        );
        write_random_wav(&dir.join("noise/white.wav"), 400_000, 2, 0.3);
        load_corpus(
            &["speech/*.wav".into()],
            &["noise/*.wav".into()],
            [0.7, 0.1, 0.2],
            dir,
        )
        .unwrap()
    }

    #[test]
    fn sequence_count_matches_window_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path(), 256);
        let cfg = SynthConfig::default();
        // One mix of 256 frames: window ends {127, 191, 255} -> 3 per bin.
        let ds = build_training_set(&corpus, &cfg, Split::Train, &[5.0], 0.01, 42).unwrap();
        assert_eq!(ds.stats.len(), 1);
        assert_eq!(ds.stats[0].n_mixes, 1);
        assert_eq!(ds.stats[0].n_sequences, 3 * 257);
        assert_eq!(ds.sequences.len(), 771);
    }

    #[test]
    fn exactly_t_frames_yields_one_window_per_bin() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path(), 128);
        let cfg = SynthConfig::default();
        let ds = build_training_set(&corpus, &cfg, Split::Train, &[0.0], 0.01, 7).unwrap();
        assert_eq!(ds.stats[0].n_sequences, 257);
    }

    #[test]
    fn below_minimum_length_yields_zero_sequences() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path(), 127);
        let cfg = SynthConfig::default();
        let ds = build_training_set(&corpus, &cfg, Split::Train, &[0.0], 0.01, 7).unwrap();
        assert_eq!(ds.stats[0].n_sequences, 0);
        assert!(ds.sequences.is_empty());
    }

    #[test]
    fn window_count_formula_over_lengths() {
        let cfg = SynthConfig::default();
        for frames in [128usize, 129, 191, 192, 300, 513] {
            let dir = tempfile::tempdir().unwrap();
            let corpus = tiny_corpus(dir.path(), frames);
            let ds = build_training_set(&corpus, &cfg, Split::Train, &[3.0], 0.01, 9).unwrap();
            let want = ((frames - cfg.seq_len) / cfg.stride + 1) * 257;
            assert_eq!(ds.stats[0].n_sequences, want, "frames {frames}");
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path(), 200);
        let cfg = SynthConfig::default();
        let a = build_training_set(&corpus, &cfg, Split::Train, &[0.0, 10.0], 0.5, 11).unwrap();
        let b = build_training_set(&corpus, &cfg, Split::Train, &[0.0, 10.0], 0.5, 11).unwrap();
        assert_eq!(a.sequences.len(), b.sequences.len());
        for (x, y) in a.sequences.iter().zip(&b.sequences) {
            assert_eq!(x, y);
        }
        let c = build_training_set(&corpus, &cfg, Split::Train, &[0.0, 10.0], 0.5, 12).unwrap();
        assert_ne!(
            a.sequences
                .iter()
                .map(|s| s.mu.to_bits())
                .collect::<Vec<_>>(),
            c.sequences
                .iter()
                .map(|s| s.mu.to_bits())
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn scale_equivariance_of_extracted_inputs() {
        // Scaling the mixture (and its noise) leaves normalized inputs
        // unchanged and shifts mu by the same factor.
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path(), 160);
        let cfg = SynthConfig::default();
        let mixes =
            synthesize_condition(&corpus, 0, 5.0, Split::Train, 0.01, &cfg, 33).unwrap();
        let mix = &mixes[0];
        let c = 3.7;
        let scaled = ConditionMix {
            speech: mix.speech.scaled(c),
            mix: mix.mix.scaled(c),
            scaled_noise: mix.scaled_noise.scaled(c),
            spec: mix.spec.clone(),
        };

        let spec_a = stft(&mix.mix, cfg.fft_size, cfg.hop).unwrap();
        let spec_b = stft(&scaled.mix, cfg.fft_size, cfg.hop).unwrap();
        let (mag_a, mag_b) = (spec_a.magnitude(), spec_b.magnitude());
        for k in [0usize, 64, 256] {
            let (in_a, mu_a) = extract_input_sequence(&mag_a, k, 159, cfg.seq_len).unwrap();
            let (in_b, mu_b) = extract_input_sequence(&mag_b, k, 159, cfg.seq_len).unwrap();
            assert!((mu_b / mu_a - c).abs() < 1e-9 * c);
            for (a, b) in in_a.iter().zip(&in_b) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-30));
            }

            // Identically scaled noise: normalized targets are unchanged.
            let gt_a = ground_truth_psd(
                &stft(&mix.scaled_noise, cfg.fft_size, cfg.hop).unwrap(),
                cfg.alpha,
            )
            .unwrap();
            let gt_b = ground_truth_psd(
                &stft(&scaled.scaled_noise, cfg.fft_size, cfg.hop).unwrap(),
                cfg.alpha,
            )
            .unwrap();
            let t_a = extract_target_sequence(&gt_a, k, 159, cfg.seq_len, mu_a).unwrap();
            let t_b = extract_target_sequence(&gt_b, k, 159, cfg.seq_len, mu_b).unwrap();
            for (a, b) in t_a.iter().zip(&t_b) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-9));
            }
        }
    }

    #[test]
    fn empty_split_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path(), 140);
        // One speech file: the validation split is empty.
        let err = build_training_set(
            &corpus,
            &SynthConfig::default(),
            Split::Validation,
            &[0.0],
            0.01,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
