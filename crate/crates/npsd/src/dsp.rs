//! Time-frequency analysis and synthesis.
//!
//! Frames are windowed with a periodic Hamming window and transformed with a
//! unitary DFT (scaled by `1/sqrt(N)`), so per-frame Parseval consistency
//! holds without extra factors: `sum_k weight(k)·|X(k,l)|² == sum_i (w[i]·frame[i])²`
//! with `weight(k) = 1` for DC and Nyquist and `2` for the interior bins of
//! the one-sided spectrum. The inverse applies the same window for synthesis
//! and normalizes per sample by the sum of squared overlapped windows.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Mono audio buffer. Samples are dimensionless amplitudes, nominally in [-1, 1].
#[derive(Clone, Debug)]
pub struct WaveBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl WaveBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean squared amplitude over the whole buffer.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scaled(&self, c: f64) -> WaveBuffer {
        WaveBuffer {
            samples: self.samples.iter().map(|s| s * c).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Real-valued K×L grid in bin-major layout (one contiguous row per frequency bin).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    bins: usize,
    frames: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(bins: usize, frames: usize) -> Self {
        Self {
            bins,
            frames,
            data: vec![0.0; bins * frames],
        }
    }

    pub fn from_vec(bins: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != bins * frames {
            return Err(Error::ShapeMismatch(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                bins,
                frames
            )));
        }
        Ok(Self { bins, frames, data })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn at(&self, k: usize, l: usize) -> f64 {
        debug_assert!(k < self.bins && l < self.frames);
        self.data[k * self.frames + l]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, value: f64) {
        debug_assert!(k < self.bins && l < self.frames);
        self.data[k * self.frames + l] = value;
    }

    /// All frames of bin `k` as a contiguous slice.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.frames..(k + 1) * self.frames]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.frames..(k + 1) * self.frames]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            bins: self.bins,
            frames: self.frames,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Complex STFT coefficients on a K×L grid, bin-major.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn at(&self, k: usize, l: usize) -> Complex64 {
        debug_assert!(k < self.bins && l < self.frames);
        self.data[k * self.frames + l]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, value: Complex64) {
        debug_assert!(k < self.bins && l < self.frames);
        self.data[k * self.frames + l] = value;
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.frames..(k + 1) * self.frames]
    }

    /// |X(k,l)| per bin.
    pub fn magnitude(&self) -> Grid {
        Grid {
            bins: self.bins,
            frames: self.frames,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Spectrogram {
        Spectrogram {
            data: self.data.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// First `frames` frames of the grid, metadata preserved.
    pub fn truncated(&self, frames: usize) -> Spectrogram {
        assert!(frames <= self.frames);
        let mut data = Vec::with_capacity(self.bins * frames);
        for k in 0..self.bins {
            data.extend_from_slice(&self.row(k)[..frames]);
        }
        Spectrogram {
            fft_size: self.fft_size,
            hop: self.hop,
            sample_rate: self.sample_rate,
            bins: self.bins,
            frames,
            data,
        }
    }
}

/// Periodic (DFT-even) Hamming window: `w[i] = 0.54 - 0.46·cos(2πi/n)`.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "window length must be even and >= 2, got {n}"
        )));
    }
    let step = std::f64::consts::TAU / n as f64;
    Ok((0..n)
        .map(|i| 0.54 - 0.46 * (step * i as f64).cos())
        .collect())
}

/// Number of analysis frames for a signal of `len` samples.
pub fn frame_count(len: usize, fft_size: usize, hop: usize) -> usize {
    if len < fft_size {
        0
    } else {
        (len - fft_size) / hop + 1
    }
}

/// Short-time Fourier transform. Frame `l` covers samples `[l·hop, l·hop + fft_size)`;
/// no centering, trailing samples that do not fill a frame are dropped. Bins
/// `0..fft_size/2` are retained (one-sided spectrum of the real input).
pub fn stft(signal: &WaveBuffer, fft_size: usize, hop: usize) -> Result<Spectrogram> {
    if hop == 0 {
        return Err(Error::InvalidArgument("hop must be >= 1".into()));
    }
    let window = hamming_window(fft_size)?;
    let len = signal.samples.len();
    if len < fft_size {
        return Err(Error::SignalTooShort {
            len,
            needed: fft_size,
        });
    }
    debug_assert!(signal.samples.iter().all(|s| s.is_finite()));

    let frames = frame_count(len, fft_size, hop);
    let bins = fft_size / 2 + 1;
    let scale = 1.0 / (fft_size as f64).sqrt();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_size);
    let mut buf = vec![Complex64::default(); fft_size];
    let mut data = vec![Complex64::default(); bins * frames];

    for l in 0..frames {
        let start = l * hop;
        for i in 0..fft_size {
            buf[i] = Complex64::new(signal.samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            data[k * frames + l] = buf[k] * scale;
        }
    }

    Ok(Spectrogram {
        fft_size,
        hop,
        sample_rate: signal.sample_rate,
        bins,
        frames,
        data,
    })
}

/// Inverse STFT via weighted overlap-add. The analysis Hamming window doubles
/// as the synthesis window; each output sample is normalized by the sum of
/// squared overlapped windows at that position. Interior samples of an
/// `stft`-produced spectrogram are reconstructed exactly (up to rounding).
pub fn istft(spec: &Spectrogram) -> Result<WaveBuffer> {
    let n = spec.fft_size;
    let window = hamming_window(n)?;
    if spec.bins != n / 2 + 1 {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram has {} bins, expected {} for fft_size {}",
            spec.bins,
            n / 2 + 1,
            n
        )));
    }
    let frames = spec.frames;
    let out_len = (frames.saturating_sub(1)) * spec.hop + n;

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);
    let inv_scale = 1.0 / (n as f64).sqrt();

    let mut buf = vec![Complex64::default(); n];
    let mut num = vec![0.0f64; out_len];
    let mut den = vec![0.0f64; out_len];

    for l in 0..frames {
        buf[0] = spec.at(0, l);
        for k in 1..spec.bins {
            let c = spec.at(k, l);
            buf[k] = c;
            if k != n / 2 {
                buf[n - k] = c.conj();
            }
        }
        ifft.process(&mut buf);
        let start = l * spec.hop;
        for i in 0..n {
            let frame_sample = buf[i].re * inv_scale;
            num[start + i] += window[i] * frame_sample;
            den[start + i] += window[i] * window[i];
        }
    }

    let samples = num
        .iter()
        .zip(den.iter())
        .map(|(&v, &d)| if d > 0.0 { v / d } else { 0.0 })
        .collect();

    Ok(WaveBuffer {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Squared magnitude |X(k,l)|² per bin, linear power units.
pub fn periodogram(spec: &Spectrogram) -> Grid {
    Grid {
        bins: spec.bins,
        frames: spec.frames,
        data: spec.data.iter().map(|c| c.norm_sqr()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const FFT: usize = 512;
    const HOP: usize = 256;

    fn noise_buffer(len: usize, seed: u64) -> WaveBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WaveBuffer::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 16000)
    }

    /// Naive O(n²) DFT of one windowed frame, unitary scaling. Oracle only.
    fn dft_frame_oracle(frame: &[f64], window: &[f64]) -> Vec<Complex64> {
        let n = frame.len();
        let scale = 1.0 / (n as f64).sqrt();
        (0..n / 2 + 1)
            .map(|k| {
                let mut acc = Complex64::default();
                for i in 0..n {
                    let phase = -std::f64::consts::TAU * (k * i) as f64 / n as f64;
                    acc += window[i] * frame[i] * Complex64::new(phase.cos(), phase.sin());
                }
                acc * scale
            })
            .collect()
    }

    /// Direct inverse DFT (unitary) of a one-sided spectrum. Oracle only.
    fn inverse_dft_oracle(one_sided: &[Complex64], n: usize) -> Vec<f64> {
        let scale = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|i| {
                let mut acc = Complex64::default();
                for k in 0..n {
                    let c = if k <= n / 2 {
                        one_sided[k]
                    } else {
                        one_sided[n - k].conj()
                    };
                    let phase = std::f64::consts::TAU * (k * i) as f64 / n as f64;
                    acc += c * Complex64::new(phase.cos(), phase.sin());
                }
                acc.re * scale
            })
            .collect()
    }

    #[test]
    fn hamming_closed_form_points() {
        let w = hamming_window(512).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert!((w[256] - 1.0).abs() < 1e-15);
        assert!((w[128] - 0.54).abs() < 1e-15);
    }

    #[test]
    fn hamming_rejects_bad_lengths() {
        assert!(hamming_window(0).is_err());
        assert!(hamming_window(1).is_err());
        assert!(hamming_window(511).is_err());
        assert!(hamming_window(2).is_ok());
    }

    #[test]
    fn stft_frame_count_and_dims() {
        let buf = noise_buffer(16000, 1);
        let spec = stft(&buf, FFT, HOP).unwrap();
        assert_eq!(spec.frames(), 61);
        assert_eq!(spec.bins(), 257);
    }

    #[test]
    fn stft_zero_signal_is_zero() {
        let buf = WaveBuffer::new(vec![0.0; 4096], 16000);
        let spec = stft(&buf, FFT, HOP).unwrap();
        assert!(spec.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn stft_too_short_rejected() {
        let buf = noise_buffer(511, 2);
        assert!(matches!(
            stft(&buf, FFT, HOP),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn stft_bin_center_cosine_matches_dft_oracle() {
        // Unit cosine at bin 32 of a 512-point frame (1 kHz at 16 kHz).
        let f = 32.0 * 16000.0 / 512.0;
        let buf = WaveBuffer::new(
            (0..4096)
                .map(|i| (std::f64::consts::TAU * f * i as f64 / 16000.0).cos())
                .collect(),
            16000,
        );
        let spec = stft(&buf, FFT, HOP).unwrap();
        let window = hamming_window(FFT).unwrap();

        for l in 1..spec.frames() - 1 {
            let peak = spec.at(32, l).norm();
            for k in 0..spec.bins() {
                assert!(spec.at(k, l).norm() <= peak + 1e-12, "bin {k} frame {l}");
            }
        }

        // Cross-check one frame against the naive DFT.
        let l = 3;
        let frame: Vec<f64> = buf.samples[l * HOP..l * HOP + FFT].to_vec();
        let oracle = dft_frame_oracle(&frame, &window);
        let got = spec.at(32, l).norm_sqr();
        let want = oracle[32].norm_sqr();
        assert!((got - want).abs() <= 1e-6 * want.abs());
    }

    #[test]
    fn stft_full_frame_matches_dft_oracle() {
        let buf = noise_buffer(1024, 3);
        let spec = stft(&buf, FFT, HOP).unwrap();
        let window = hamming_window(FFT).unwrap();
        let l = 1;
        let oracle = dft_frame_oracle(&buf.samples[l * HOP..l * HOP + FFT], &window);
        for k in 0..spec.bins() {
            let diff = (spec.at(k, l) - oracle[k]).norm();
            assert!(diff <= 1e-9, "bin {k}: diff {diff}");
        }
    }

    #[test]
    fn istft_roundtrip_interior_identity() {
        let buf = noise_buffer(8192, 4);
        let spec = stft(&buf, FFT, HOP).unwrap();
        let rec = istft(&spec).unwrap();
        for i in FFT..rec.len().min(buf.len()) - FFT {
            assert!(
                (rec.samples[i] - buf.samples[i]).abs() <= 1e-6,
                "sample {i}: {} vs {}",
                rec.samples[i],
                buf.samples[i]
            );
        }
    }

    #[test]
    fn istft_zero_spectrogram_is_silence() {
        let buf = WaveBuffer::new(vec![0.0; 2048], 16000);
        let spec = stft(&buf, FFT, HOP).unwrap();
        let rec = istft(&spec).unwrap();
        assert!(rec.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn istft_single_dc_frame_matches_inverse_dft_oracle() {
        // One frame of windowed DC.
        let buf = WaveBuffer::new(vec![0.25; FFT], 16000);
        let spec = stft(&buf, FFT, HOP).unwrap();
        assert_eq!(spec.frames(), 1);

        let one_sided: Vec<Complex64> = (0..spec.bins()).map(|k| spec.at(k, 0)).collect();
        let frame_oracle = inverse_dft_oracle(&one_sided, FFT);
        let window = hamming_window(FFT).unwrap();
        let rec = istft(&spec).unwrap();
        for i in 0..FFT {
            let want = window[i] * frame_oracle[i] / (window[i] * window[i]);
            assert!((rec.samples[i] - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn periodogram_values() {
        let buf = noise_buffer(1024, 5);
        let mut spec = stft(&buf, FFT, HOP).unwrap();
        spec.set(3, 0, Complex64::new(3.0, 4.0));
        spec.set(4, 0, Complex64::new(0.0, 0.0));
        let p = periodogram(&spec);
        assert_eq!(p.at(3, 0), 25.0);
        assert_eq!(p.at(4, 0), 0.0);
        // Elementwise conjugate-product oracle.
        for k in 0..spec.bins() {
            for l in 0..spec.frames() {
                let c = spec.at(k, l);
                let want = (c * c.conj()).re;
                assert!((p.at(k, l) - want).abs() <= 1e-15 * want.max(1.0));
            }
        }
    }

    #[test]
    fn frame_count_formula_holds() {
        for len in [512usize, 513, 767, 768, 769, 1024, 16000, 100_000] {
            let buf = noise_buffer(len, len as u64);
            let spec = stft(&buf, FFT, HOP).unwrap();
            assert_eq!(spec.frames(), (len - FFT) / HOP + 1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn stft_is_linear(seed1 in 0u64..1000, seed2 in 1000u64..2000,
                          a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let s1 = noise_buffer(1536, seed1);
            let s2 = noise_buffer(1536, seed2);
            let combined = WaveBuffer::new(
                s1.samples.iter().zip(&s2.samples).map(|(&x, &y)| a * x + b * y).collect(),
                16000,
            );
            let sp1 = stft(&s1, FFT, HOP).unwrap();
            let sp2 = stft(&s2, FFT, HOP).unwrap();
            let spc = stft(&combined, FFT, HOP).unwrap();
            let max_mag = spc.data.iter().map(|c| c.norm()).fold(0.0f64, f64::max).max(1e-30);
            for (i, c) in spc.data.iter().enumerate() {
                let want = a * sp1.data[i] + b * sp2.data[i];
                prop_assert!((c - want).norm() <= 1e-9 * max_mag);
            }
        }

        #[test]
        fn parseval_per_frame(seed in 0u64..1000) {
            let buf = noise_buffer(1536, seed);
            let spec = stft(&buf, FFT, HOP).unwrap();
            let window = hamming_window(FFT).unwrap();
            for l in 0..spec.frames() {
                let mut spectral = 0.0;
                for k in 0..spec.bins() {
                    let weight = if k == 0 || k == spec.bins() - 1 { 1.0 } else { 2.0 };
                    spectral += weight * spec.at(k, l).norm_sqr();
                }
                let time: f64 = (0..FFT)
                    .map(|i| {
                        let v = window[i] * buf.samples[l * HOP + i];
                        v * v
                    })
                    .sum();
                prop_assert!((spectral - time).abs() <= 1e-6 * time.abs().max(1e-30));
            }
        }

        #[test]
        fn istft_roundtrip_random(seed in 0u64..1000) {
            let buf = noise_buffer(3072, seed);
            let rec = istft(&stft(&buf, FFT, HOP).unwrap()).unwrap();
            for i in FFT..buf.len() - FFT {
                prop_assert!((rec.samples[i] - buf.samples[i]).abs() <= 1e-6);
            }
        }
    }
}
