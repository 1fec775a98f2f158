//! Synthetic 16 kHz test signals: white and pink noise, plus a speech-like
//! generator for demos and self-contained tests.
//!
//! The speech-like signal alternates voiced segments (pulse trains through
//! two resonators with per-segment formants), fricative-like bursts
//! (high-passed noise) and silence, which gives it the sparse, nonstationary
//! character that separates speech from background noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::WaveBuffer;

pub const SAMPLE_RATE: u32 = 16_000;

pub fn white_noise(len: usize, seed: u64) -> WaveBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WaveBuffer::new(
        (0..len).map(|_| rng.random_range(-0.3..0.3)).collect(),
        SAMPLE_RATE,
    )
}

/// Pink (1/f) noise via a three-pole filter cascade on white noise.
pub fn pink_noise(len: usize, seed: u64) -> WaveBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut b0, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
    let samples = (0..len)
        .map(|_| {
            let white: f64 = rng.random_range(-1.0..1.0);
            b0 = 0.99765 * b0 + white * 0.0990460;
            b1 = 0.96300 * b1 + white * 0.2965164;
            b2 = 0.57000 * b2 + white * 1.0526913;
            0.05 * (b0 + b1 + b2 + white * 0.1848)
        })
        .collect();
    WaveBuffer::new(samples, SAMPLE_RATE)
}

/// Two-pole resonator at center frequency `freq` with the given bandwidth.
struct Resonator {
    a1: f64,
    a2: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64) -> Self {
        let r = (-std::f64::consts::PI * bandwidth / SAMPLE_RATE as f64).exp();
        let theta = std::f64::consts::TAU * freq / SAMPLE_RATE as f64;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Speech-like signal with phrase rhythm: runs of back-to-back voiced and
/// fricative syllables (phrases of roughly 0.7-2.5 s) separated by short
/// pauses, the cadence of read sentences.
pub fn speech_like(len: usize, seed: u64) -> WaveBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0.0f64; len];
    let mut pos = 0usize;
    while pos < len {
        // Inter-phrase pause: 150-450 ms.
        pos += rng.random_range(2400..7200);
        if pos >= len {
            break;
        }
        let syllables = rng.random_range(4..12);
        let phrase_amp = rng.random_range(0.08..0.3);
        let f0_base = rng.random_range(95.0..210.0);
        for _ in 0..syllables {
            if pos >= len {
                break;
            }
            let seg_len = rng.random_range(1400..3600); // 90-225 ms
            let end = (pos + seg_len).min(len);
            if rng.random_range(0.0..1.0) < 0.75 {
                // Voiced: pulse train through two formant resonators.
                let f0 = f0_base * rng.random_range(0.85..1.2);
                let period = (SAMPLE_RATE as f64 / f0) as usize;
                let mut r1 = Resonator::new(
                    rng.random_range(300.0..900.0),
                    rng.random_range(80.0..160.0),
                );
                let mut r2 = Resonator::new(
                    rng.random_range(1000.0..2600.0),
                    rng.random_range(100.0..220.0),
                );
                let amp = phrase_amp * rng.random_range(0.6..1.0);
                for (i, sample) in samples[pos..end].iter_mut().enumerate() {
                    let pulse = if i % period == 0 { 1.0 } else { 0.0 };
                    let excitation = pulse + 0.02 * rng.random_range(-1.0..1.0f64);
                    let v = r2.step(r1.step(excitation));
                    // Soft onset/offset, sustained in between.
                    let n = end - pos;
                    let ramp = 800.min(n / 2).max(1) as f64;
                    let up = (i as f64 / ramp).min(1.0);
                    let down = ((n - 1 - i) as f64 / ramp).min(1.0);
                    *sample = amp * up * down * v * 0.08;
                }
            } else {
                // Fricative: high-passed noise burst.
                let amp = phrase_amp * rng.random_range(0.15..0.4);
                let mut prev = 0.0f64;
                for sample in samples[pos..end].iter_mut() {
                    let w: f64 = rng.random_range(-1.0..1.0);
                    *sample = amp * (w - prev);
                    prev = w;
                }
            }
            pos = end;
        }
    }
    // Keep the waveform inside a sane amplitude range.
    let peak = samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    if peak > 0.9 {
        let scale = 0.9 / peak;
        for s in &mut samples {
            *s *= scale;
        }
    }
    WaveBuffer::new(samples, SAMPLE_RATE)
}
