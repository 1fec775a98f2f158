//! Dataset construction: speech+noise mixing at a target SNR, ground-truth
//! noise PSD via recursive averaging, and normalized input/target sequence
//! extraction.
//!
//! For frequency bin `k` the input feature at frame `l` is the magnitude
//! triple `[|x(k-1,l)|, |x(k,l)|, |x(k+1,l)|]` (the missing neighbour at the
//! band edges is a duplicate of bin `k`). A window of `T` consecutive frames
//! ending at `l_end` is normalized by the window mean `μ` of the center
//! column; the target is `ln(λ_u / μ²)` over the same frames.

mod cache;
mod manifest;
mod synth;

pub use cache::{read_sequences, write_sequences, SEQUENCE_CACHE_VERSION};
pub use manifest::{load_corpus, CorpusManifest, NoiseSource, Split};
pub use synth::{
    build_training_set, synthesize_condition, ConditionMix, ConditionStats, SplitDataset,
    SynthConfig,
};

use crate::dsp::{Grid, Spectrogram, WaveBuffer};
use crate::error::{Error, Result};

/// Linear-power floor applied before logarithms, preventing infinite targets
/// on digitally silent frames.
pub const PSD_FLOOR: f64 = 1e-12;

/// One normalized training pair for a single frequency bin.
///
/// `input` is a `T×3` row-major grid of normalized magnitudes, `target` the
/// `T` normalized log-PSD values, `mu` the normalizer. `l_end` is the last
/// frame index of the source window; sequence caches do not preserve it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSequence {
    pub k: u16,
    pub l_end: u32,
    pub mu: f32,
    pub input: Vec<f32>,
    pub target: Vec<f32>,
}

impl TrainingSequence {
    pub fn seq_len(&self) -> usize {
        self.target.len()
    }
}

/// Recursively averaged noise PSD, `λ_u(k,l)`, linear power units.
#[derive(Clone, Debug)]
pub struct GroundTruthPsd {
    pub lambda: Grid,
    pub alpha: f64,
}

/// Record of one synthesized mixture.
#[derive(Clone, Debug)]
pub struct MixSpec {
    pub snr_db: f64,
    pub speech_id: String,
    pub noise_id: String,
    /// First noise-segment offset drawn inside the split's section.
    pub noise_offset: usize,
    pub duration: usize,
}

/// Scale the noise so the full-signal SNR equals `snr_db`, then mix.
///
/// The gain is `g = sqrt(P_s / (P_u · 10^(snr_db/10)))` with `P` the mean
/// squared amplitude over the whole buffer. Returns the mixture and the
/// scaled noise actually contained in it.
pub fn mix_at_snr(
    speech: &WaveBuffer,
    noise: &WaveBuffer,
    snr_db: f64,
) -> Result<(WaveBuffer, WaveBuffer)> {
    if speech.len() != noise.len() {
        return Err(Error::ShapeMismatch(format!(
            "speech has {} samples, noise {}",
            speech.len(),
            noise.len()
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument("SNR must be finite".into()));
    }
    let p_s = speech.mean_power();
    let p_u = noise.mean_power();
    if p_s <= 0.0 || p_u <= 0.0 {
        return Err(Error::DegenerateInput(
            "speech and noise must both have nonzero power".into(),
        ));
    }
    let gain = (p_s / (p_u * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled_noise = noise.scaled(gain);
    let mix = WaveBuffer::new(
        speech
            .samples
            .iter()
            .zip(&scaled_noise.samples)
            .map(|(&s, &u)| s + u)
            .collect(),
        speech.sample_rate,
    );
    Ok((mix, scaled_noise))
}

/// Ground-truth noise PSD by first-order recursive averaging of the noise
/// periodogram: `λ_u(k,0) = |u(k,0)|²`,
/// `λ_u(k,l) = α·λ_u(k,l-1) + (1-α)·|u(k,l)|²`.
pub fn ground_truth_psd(noise_spec: &Spectrogram, alpha: f64) -> Result<GroundTruthPsd> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "smoothing factor must be in [0, 1), got {alpha}"
        )));
    }
    let p = crate::dsp::periodogram(noise_spec);
    let mut lambda = Grid::zeros(p.bins(), p.frames());
    for k in 0..p.bins() {
        let src = p.row(k);
        let dst = lambda.row_mut(k);
        if src.is_empty() {
            continue;
        }
        dst[0] = src[0];
        for l in 1..src.len() {
            dst[l] = alpha * dst[l - 1] + (1.0 - alpha) * src[l];
        }
    }
    Ok(GroundTruthPsd { lambda, alpha })
}

/// Gather the raw (unnormalized) `T×3` magnitude window ending at `l_end`
/// for bin `k`, plus the window mean of the center column. Band-edge
/// neighbours are duplicates of the center bin.
pub(crate) fn window_raw(
    mag: &Grid,
    k: usize,
    l_end: usize,
    seq_len: usize,
) -> Result<(Vec<f64>, f64)> {
    if l_end + 1 < seq_len {
        return Err(Error::InsufficientHistory {
            l_end,
            needed: seq_len,
        });
    }
    if k >= mag.bins() || l_end >= mag.frames() {
        return Err(Error::InvalidArgument(format!(
            "bin {k} / frame {l_end} out of range for {}x{} grid",
            mag.bins(),
            mag.frames()
        )));
    }
    let start = l_end + 1 - seq_len;
    let below = mag.row(if k == 0 { k } else { k - 1 });
    let center = mag.row(k);
    let above = mag.row(if k + 1 == mag.bins() { k } else { k + 1 });

    let mut raw = Vec::with_capacity(seq_len * 3);
    let mut mu = 0.0;
    for l in start..=l_end {
        raw.push(below[l]);
        raw.push(center[l]);
        raw.push(above[l]);
        mu += center[l];
    }
    mu /= seq_len as f64;
    Ok((raw, mu))
}

/// Normalized `T×3` input sequence and its normalizer `μ` for bin `k`,
/// window ending at `l_end`.
pub fn extract_input_sequence(
    mag: &Grid,
    k: usize,
    l_end: usize,
    seq_len: usize,
) -> Result<(Vec<f64>, f64)> {
    let (mut raw, mu) = window_raw(mag, k, l_end, seq_len)?;
    if mu <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "window mean magnitude is zero at bin {k}, frame {l_end}"
        )));
    }
    for v in &mut raw {
        *v /= mu;
    }
    Ok((raw, mu))
}

/// Normalized log-PSD target: entry `t` is
/// `ln(λ_u(k, l_end-T+1+t) / μ²)`, with `λ_u` floored at [`PSD_FLOOR`].
pub fn extract_target_sequence(
    gt: &GroundTruthPsd,
    k: usize,
    l_end: usize,
    seq_len: usize,
    mu: f64,
) -> Result<Vec<f64>> {
    if mu <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "normalizer must be positive, got {mu}"
        )));
    }
    if l_end + 1 < seq_len {
        return Err(Error::InsufficientHistory {
            l_end,
            needed: seq_len,
        });
    }
    if k >= gt.lambda.bins() || l_end >= gt.lambda.frames() {
        return Err(Error::InvalidArgument(format!(
            "bin {k} / frame {l_end} out of range for ground truth"
        )));
    }
    let mu_sq = mu * mu;
    let start = l_end + 1 - seq_len;
    let row = gt.lambda.row(k);
    Ok(row[start..=l_end]
        .iter()
        .map(|&v| (v.max(PSD_FLOOR) / mu_sq).ln())
        .collect())
}
