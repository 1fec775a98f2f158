//! Speech enhancement from an estimated noise PSD track.
//!
//! Decision-directed Wiener gain: per bin, the posterior SNR is
//! `γ = |x|²/λ̂`, the a-priori SNR follows
//! `ξ(l) = α·G²(l-1)·γ(l-1) + (1-α)·max(γ(l)-1, 0)` (the recursion starts
//! from a unity prior term), and the gain is `G = max(ξ/(1+ξ), g_min)`.
//! Gains scale magnitudes only; phases pass through unchanged.

use crate::dsp::{istft, Grid, Spectrogram, WaveBuffer};
use crate::error::{Error, Result};
use crate::estimator::NoisePsdTrack;

#[derive(Clone, Copy, Debug)]
pub struct EnhanceConfig {
    /// Decision-directed smoothing factor.
    pub dd_alpha: f64,
    /// Gain floor, linear.
    pub g_min: f64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            dd_alpha: 0.98,
            g_min: 10f64.powf(-25.0 / 20.0),
        }
    }
}

/// Real gain grid bounded to `[g_min, 1]`.
#[derive(Clone, Debug)]
pub struct GainGrid {
    gains: Grid,
    pub g_min: f64,
}

impl GainGrid {
    /// Wrap a precomputed gain grid; every value must lie in [0, 1].
    pub fn from_grid(gains: Grid, g_min: f64) -> Result<Self> {
        if gains.data().iter().any(|&g| !(0.0..=1.0).contains(&g)) {
            return Err(Error::InvalidArgument(
                "gains must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { gains, g_min })
    }

    pub fn grid(&self) -> &Grid {
        &self.gains
    }
}

/// Compute Wiener gains for an aligned (same K×L) spectrogram/track pair.
pub fn wiener_gains(
    spec: &Spectrogram,
    track: &NoisePsdTrack,
    config: &EnhanceConfig,
) -> Result<GainGrid> {
    if spec.bins() != track.bins() || spec.frames() != track.frames() {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram {}x{} vs track {}x{}",
            spec.bins(),
            spec.frames(),
            track.bins(),
            track.frames()
        )));
    }
    if !(0.0..=1.0).contains(&config.dd_alpha) || !(0.0..=1.0).contains(&config.g_min) {
        return Err(Error::InvalidArgument(format!(
            "dd_alpha and g_min must lie in [0, 1], got {config:?}"
        )));
    }
    let p = crate::dsp::periodogram(spec);
    let mut gains = Grid::zeros(p.bins(), p.frames());
    let alpha = config.dd_alpha;
    for k in 0..p.bins() {
        let lambda = track.lambda().row(k);
        let power = p.row(k);
        let out = gains.row_mut(k);
        let mut prev_term = 1.0f64; // G²(-1)·γ(-1) := 1
        for l in 0..power.len() {
            let noise = lambda[l].max(f64::MIN_POSITIVE);
            let gamma = power[l] / noise;
            let xi = alpha * prev_term + (1.0 - alpha) * (gamma - 1.0).max(0.0);
            let g = (xi / (1.0 + xi)).max(config.g_min);
            out[l] = g;
            prev_term = g * g * gamma;
        }
    }
    Ok(GainGrid {
        gains,
        g_min: config.g_min,
    })
}

/// Scale each STFT coefficient by its gain (phase preserved) and
/// resynthesize with the overlap-add inverse transform.
pub fn apply_and_resynthesize(spec: &Spectrogram, gains: &GainGrid) -> Result<WaveBuffer> {
    let filtered = apply_gains(spec, gains)?;
    istft(&filtered)
}

/// The gained spectrogram itself, for callers that stay in the STFT domain.
pub fn apply_gains(spec: &Spectrogram, gains: &GainGrid) -> Result<Spectrogram> {
    if spec.bins() != gains.gains.bins() || spec.frames() != gains.gains.frames() {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram {}x{} vs gains {}x{}",
            spec.bins(),
            spec.frames(),
            gains.gains.bins(),
            gains.gains.frames()
        )));
    }
    let mut out = spec.clone();
    for k in 0..spec.bins() {
        for l in 0..spec.frames() {
            out.set(k, l, spec.at(k, l) * gains.gains.at(k, l));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft;
    use crate::estimator::{estimate_min_stat, MinStatConfig};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_buffer(len: usize, seed: u64) -> WaveBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WaveBuffer::new(
            (0..len).map(|_| rng.random_range(-0.5..0.5)).collect(),
            16000,
        )
    }

    /// A track with a fixed constant PSD on the same grid as `spec`.
    fn constant_track(spec: &Spectrogram, value: f64) -> NoisePsdTrack {
        let mut damped = spec.clone();
        let mag = value.sqrt();
        for k in 0..damped.bins() {
            for l in 0..damped.frames() {
                damped.set(k, l, num_complex::Complex64::new(mag, 0.0));
            }
        }
        // min-stat with degenerate parameters passes the periodogram through.
        estimate_min_stat(
            &damped,
            &MinStatConfig {
                beta: 0.0,
                window: 1,
                compensation: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn vanishing_noise_gives_unity_gain() {
        let spec = stft(&random_buffer(4096, 1), 512, 256).unwrap();
        let track = constant_track(&spec, 1e-30);
        let gains = wiener_gains(&spec, &track, &EnhanceConfig::default()).unwrap();
        for k in (0..spec.bins()).step_by(32) {
            for l in 0..spec.frames() {
                assert!(gains.grid().at(k, l) > 0.999_999);
            }
        }
    }

    #[test]
    fn noise_only_steady_state_floors_at_g_min() {
        // |x|² equal to λ̂ everywhere: the instantaneous term is zero and the
        // recursion decays to the floor.
        let spec = {
            let mut s = stft(&random_buffer(20 * 256 + 256, 2), 512, 256).unwrap();
            for k in 0..s.bins() {
                for l in 0..s.frames() {
                    s.set(k, l, num_complex::Complex64::new(2.0, 0.0));
                }
            }
            s
        };
        let track = constant_track(&spec, 4.0);
        let cfg = EnhanceConfig::default();
        let gains = wiener_gains(&spec, &track, &cfg).unwrap();
        let last = spec.frames() - 1;
        for k in (0..spec.bins()).step_by(64) {
            assert_eq!(gains.grid().at(k, last), cfg.g_min);
        }
    }

    #[test]
    fn instantaneous_wiener_value() {
        // dd_alpha = 0, γ = 3 -> ξ = 2, G = 2/3.
        let spec = {
            let mut s = stft(&random_buffer(1024, 3), 512, 256).unwrap();
            let mag = 3.0f64.sqrt();
            for k in 0..s.bins() {
                for l in 0..s.frames() {
                    s.set(k, l, num_complex::Complex64::new(mag, 0.0));
                }
            }
            s
        };
        let track = constant_track(&spec, 1.0);
        let cfg = EnhanceConfig {
            dd_alpha: 0.0,
            g_min: 0.0,
        };
        let gains = wiener_gains(&spec, &track, &cfg).unwrap();
        for l in 0..spec.frames() {
            assert!((gains.grid().at(5, l) - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gains_bounded_and_phase_preserved() {
        let buf = random_buffer(8192, 4);
        let spec = stft(&buf, 512, 256).unwrap();
        let track = estimate_min_stat(&spec, &MinStatConfig::default()).unwrap();
        let cfg = EnhanceConfig::default();
        let gains = wiener_gains(&spec, &track, &cfg).unwrap();
        let filtered = apply_gains(&spec, &gains).unwrap();
        for k in (0..spec.bins()).step_by(16) {
            for l in 0..spec.frames() {
                let g = gains.grid().at(k, l);
                assert!(g >= cfg.g_min && g <= 1.0);
                let a = spec.at(k, l);
                let b = filtered.at(k, l);
                if a.norm() > 1e-12 {
                    // Real nonnegative gain: phase unchanged.
                    assert!((a.arg() - b.arg()).abs() < 1e-12);
                    assert!(b.norm() <= a.norm() + 1e-15);
                }
            }
        }
    }

    fn unity_gains(spec: &Spectrogram, value: f64) -> GainGrid {
        GainGrid {
            gains: Grid::from_vec(
                spec.bins(),
                spec.frames(),
                vec![value; spec.bins() * spec.frames()],
            )
            .unwrap(),
            g_min: 0.0,
        }
    }

    #[test]
    fn unity_gain_reproduces_interior() {
        let buf = random_buffer(8192, 5);
        let spec = stft(&buf, 512, 256).unwrap();
        let out = apply_and_resynthesize(&spec, &unity_gains(&spec, 1.0)).unwrap();
        for i in 512..out.len().min(buf.len()) - 512 {
            assert!((out.samples[i] - buf.samples[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn zero_gain_silences() {
        let buf = random_buffer(2048, 6);
        let spec = stft(&buf, 512, 256).unwrap();
        let out = apply_and_resynthesize(&spec, &unity_gains(&spec, 0.0)).unwrap();
        assert!(out.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn half_gain_halves_interior_magnitudes() {
        let buf = random_buffer(16384, 7);
        let spec = stft(&buf, 512, 256).unwrap();
        let out = apply_and_resynthesize(&spec, &unity_gains(&spec, 0.5)).unwrap();
        let re_spec = stft(&out, 512, 256).unwrap();
        for k in (1..spec.bins() - 1).step_by(37) {
            for l in 2..spec.frames() - 2 {
                let want = 0.5 * spec.at(k, l).norm();
                let got = re_spec.at(k, l).norm();
                assert!(
                    (got - want).abs() <= 1e-6 * want.max(1e-9),
                    "k {k} l {l}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn misaligned_grids_rejected() {
        let spec = stft(&random_buffer(4096, 8), 512, 256).unwrap();
        let small = spec.truncated(spec.frames() - 2);
        let track = estimate_min_stat(&small, &MinStatConfig::default()).unwrap();
        assert!(matches!(
            wiener_gains(&spec, &track, &EnhanceConfig::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
