//! Block-online noise PSD estimation from a noisy spectrogram.
//!
//! The LSTM estimator slides a T-frame window over each frequency bin
//! independently. Each window is normalized by its own mean magnitude `μ`,
//! run through the network from zero state, and the predictions of the last
//! `hop_steps` steps are denormalized as `e^ŷ·μ²` and emitted for the
//! corresponding frames. The first window additionally emits all T steps so
//! every frame from 0 onward carries an estimate; those extra frames are
//! flagged as warm-up.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dataset::window_raw;
use crate::dsp::{Grid, Spectrogram};
use crate::error::{Error, Result};
use crate::net::{predict, NetworkParams};

/// Normalizer floor; keeps Eq.-style normalization defined on digital silence.
pub const MU_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Lstm,
    MinStat,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Lstm => "lstm",
            Method::MinStat => "min_stat",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(Method::Lstm),
            "min_stat" | "minstat" => Ok(Method::MinStat),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected lstm or min_stat)"
            ))),
        }
    }
}

/// Estimated noise PSD over a K×L grid, linear power units.
#[derive(Clone, Debug)]
pub struct NoisePsdTrack {
    pub method: Method,
    pub latency_frames: usize,
    lambda: Grid,
    warmup: Vec<bool>,
}

impl NoisePsdTrack {
    /// Wrap an existing estimate grid (e.g. one loaded from disk).
    pub fn from_grid(
        method: Method,
        latency_frames: usize,
        lambda: Grid,
        warmup: Vec<bool>,
    ) -> Result<Self> {
        if warmup.len() != lambda.frames() {
            return Err(Error::ShapeMismatch(format!(
                "{} warm-up flags for {} frames",
                warmup.len(),
                lambda.frames()
            )));
        }
        if lambda.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "noise PSD estimates must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            method,
            latency_frames,
            lambda,
            warmup,
        })
    }

    pub fn bins(&self) -> usize {
        self.lambda.bins()
    }

    /// Frames that received an estimate (may be fewer than the input grid).
    pub fn frames(&self) -> usize {
        self.lambda.frames()
    }

    pub fn lambda(&self) -> &Grid {
        &self.lambda
    }

    pub fn is_warmup(&self, l: usize) -> bool {
        self.warmup[l]
    }

    pub fn warmup_flags(&self) -> &[bool] {
        &self.warmup
    }
}

/// Sliding-window LSTM estimation. Windows end at
/// `l_end = T-1, T-1+hop_steps, …`; predictions for the last `hop_steps`
/// steps of each window are emitted (all T for the first window).
pub fn estimate_lstm(
    params: &NetworkParams<f32>,
    spec: &Spectrogram,
    seq_len: usize,
    hop_steps: usize,
) -> Result<NoisePsdTrack> {
    if params.dims().input != 3 {
        return Err(Error::ShapeMismatch(format!(
            "network expects input width {}, estimator provides 3",
            params.dims().input
        )));
    }
    if hop_steps < 1 || hop_steps > seq_len {
        return Err(Error::InvalidArgument(format!(
            "hop_steps must be in [1, {seq_len}], got {hop_steps}"
        )));
    }
    let frames = spec.frames();
    if frames < seq_len {
        return Err(Error::InsufficientLength {
            frames,
            needed: seq_len,
        });
    }

    let mag = spec.magnitude();
    let window_ends: Vec<usize> = (seq_len - 1..frames).step_by(hop_steps).collect();
    let emitted = window_ends.last().unwrap() + 1;
    let mut lambda = Grid::zeros(mag.bins(), emitted);

    let mut input_f32 = vec![0.0f32; seq_len * 3];
    for k in 0..mag.bins() {
        let row = lambda.row_mut(k);
        for (w, &l_end) in window_ends.iter().enumerate() {
            let (raw, mu) = window_raw(&mag, k, l_end, seq_len)?;
            let mu = mu.max(MU_FLOOR);
            for (dst, &src) in input_f32.iter_mut().zip(&raw) {
                *dst = (src / mu) as f32;
            }
            let preds = predict(params, &input_f32);
            let mu_sq = mu * mu;
            let emit_from = if w == 0 { 0 } else { seq_len - hop_steps };
            for t in emit_from..seq_len {
                let l = l_end + 1 - seq_len + t;
                row[l] = (preds[t] as f64).exp() * mu_sq;
            }
        }
    }

    // Frames ahead of the first emitted block (the last hop_steps frames of
    // the first window) come from early prediction steps; flag them.
    let warmup: Vec<bool> = (0..emitted).map(|l| l + hop_steps < seq_len).collect();
    Ok(NoisePsdTrack {
        method: Method::Lstm,
        latency_frames: if hop_steps == 1 { 0 } else { hop_steps },
        lambda,
        warmup,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MinStatConfig {
    /// Periodogram smoothing factor β.
    pub beta: f64,
    /// Minimum-search window length D, frames.
    pub window: usize,
    /// Bias compensation factor applied to the tracked minimum.
    pub compensation: f64,
}

impl Default for MinStatConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            window: 96,
            compensation: 1.5,
        }
    }
}

/// Simplified minimum-statistics baseline: smooth the noisy periodogram per
/// bin, track its minimum over the last `window` frames, and compensate.
pub fn estimate_min_stat(spec: &Spectrogram, cfg: &MinStatConfig) -> Result<NoisePsdTrack> {
    if cfg.window < 1 {
        return Err(Error::InvalidArgument("window must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.beta) {
        return Err(Error::InvalidArgument(format!(
            "beta must be in [0, 1), got {}",
            cfg.beta
        )));
    }
    let p = crate::dsp::periodogram(spec);
    let frames = p.frames();
    let mut lambda = Grid::zeros(p.bins(), frames);
    let mut smoothed = vec![0.0f64; frames];
    for k in 0..p.bins() {
        let src = p.row(k);
        if frames == 0 {
            continue;
        }
        smoothed[0] = src[0];
        for l in 1..frames {
            smoothed[l] = cfg.beta * smoothed[l - 1] + (1.0 - cfg.beta) * src[l];
        }
        let dst = lambda.row_mut(k);
        for l in 0..frames {
            let start = (l + 1).saturating_sub(cfg.window);
            let min = smoothed[start..=l]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            dst[l] = cfg.compensation * min;
        }
    }
    let warmup: Vec<bool> = (0..frames).map(|l| l + 1 < cfg.window).collect();
    Ok(NoisePsdTrack {
        method: Method::MinStat,
        latency_frames: 0,
        lambda,
        warmup,
    })
}

/// Write a track as CSV: `k,l,lambda_hat,warmup`.
pub fn write_track_csv(path: &Path, track: &NoisePsdTrack) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,l,lambda_hat,warmup")?;
    for k in 0..track.bins() {
        let row = track.lambda.row(k);
        for (l, &v) in row.iter().enumerate() {
            writeln!(w, "{k},{l},{v:e},{}", u8::from(track.warmup[l]))?;
        }
    }
    w.flush()?;
    Ok(())
}

const GRID_MAGIC: &[u8; 4] = b"NPSG";

/// Write the estimate grid in binary form: magic `NPSG`, u32 K, u32 L, then
/// f32 row-major values, all little-endian.
pub fn write_track_grid(path: &Path, track: &NoisePsdTrack) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(GRID_MAGIC)?;
    w.write_u32::<LittleEndian>(track.bins() as u32)?;
    w.write_u32::<LittleEndian>(track.frames() as u32)?;
    for k in 0..track.bins() {
        for &v in track.lambda.row(k) {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read an `NPSG` grid back as linear-power values.
pub fn read_track_grid(path: &Path) -> Result<Grid> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("grid file shorter than its header".into()))?;
    if &magic != GRID_MAGIC {
        return Err(Error::Format(format!(
            "bad grid magic {magic:?}, expected {GRID_MAGIC:?}"
        )));
    }
    let bins = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format("grid file truncated".into()))? as usize;
    let frames = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format("grid file truncated".into()))? as usize;
    let mut data = vec![0.0f64; bins * frames];
    for v in data.iter_mut() {
        *v = r
            .read_f32::<LittleEndian>()
            .map_err(|_| Error::Format("grid file truncated in data".into()))? as f64;
    }
    Grid::from_vec(bins, frames, data)
}
