//! Quantitative evaluation: symmetric segmental logarithmic error of noise
//! PSD estimates, segmental SNR of enhanced speech, and condition-wise
//! benchmark reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dataset::{
    ground_truth_psd, synthesize_condition, CorpusManifest, GroundTruthPsd, Split, SynthConfig,
    PSD_FLOOR,
};
use crate::dsp::{stft, WaveBuffer};
use crate::enhance::{apply_and_resynthesize, wiener_gains, EnhanceConfig};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_lstm, estimate_min_stat, Method, MinStatConfig, NoisePsdTrack,
};
use crate::net::NetworkParams;
use crate::seed::derive_seed;

/// Segmental-SNR clamp bounds, dB.
pub const SNR_SEG_MIN_DB: f64 = -10.0;
pub const SNR_SEG_MAX_DB: f64 = 35.0;
/// A segment is speech-active when its energy is within this many dB of the
/// loudest segment.
pub const ACTIVITY_RANGE_DB: f64 = 40.0;

/// LogErr decomposition: `total = over + under`, where `over` is the mean
/// positive part (overestimation) and `under` the mean negative part.
#[derive(Clone, Copy, Debug)]
pub struct LogErrStats {
    pub total_db: f64,
    pub over_db: f64,
    pub under_db: f64,
    pub cells: usize,
}

/// Mean absolute log-ratio in dB between an estimate and the ground truth:
/// `(1/(K·L'))·Σ |10·log10(λ̂/λ)|` over included cells. Warm-up frames are
/// excluded unless `include_warmup` is set; both grids are floored at
/// [`PSD_FLOOR`].
pub fn log_err_stats(
    track: &NoisePsdTrack,
    gt: &GroundTruthPsd,
    include_warmup: bool,
) -> Result<LogErrStats> {
    if track.bins() != gt.lambda.bins() || track.frames() > gt.lambda.frames() {
        return Err(Error::ShapeMismatch(format!(
            "track {}x{} vs ground truth {}x{}",
            track.bins(),
            track.frames(),
            gt.lambda.bins(),
            gt.lambda.frames()
        )));
    }
    let mut sum_abs = 0.0;
    let mut sum_over = 0.0;
    let mut sum_under = 0.0;
    let mut cells = 0usize;
    for k in 0..track.bins() {
        let est = track.lambda().row(k);
        let truth = gt.lambda.row(k);
        for l in 0..track.frames() {
            if !include_warmup && track.is_warmup(l) {
                continue;
            }
            let ratio_db =
                10.0 * (est[l].max(PSD_FLOOR) / truth[l].max(PSD_FLOOR)).log10();
            sum_abs += ratio_db.abs();
            sum_over += ratio_db.max(0.0);
            sum_under += (-ratio_db).max(0.0);
            cells += 1;
        }
    }
    if cells == 0 {
        return Err(Error::EmptySelection(
            "no frames left after warm-up exclusion".into(),
        ));
    }
    let n = cells as f64;
    Ok(LogErrStats {
        total_db: sum_abs / n,
        over_db: sum_over / n,
        under_db: sum_under / n,
        cells,
    })
}

/// LogErr in dB with the default policy (warm-up frames excluded).
pub fn log_err(track: &NoisePsdTrack, gt: &GroundTruthPsd) -> Result<f64> {
    Ok(log_err_stats(track, gt, false)?.total_db)
}

#[derive(Clone, Copy, Debug)]
pub struct SnrSegStats {
    pub mean_db: f64,
    pub n_segments: usize,
    /// Mean without the [-10, 35] dB clamp; may be infinite for a perfect
    /// reconstruction.
    pub mean_unclamped_db: f64,
}

/// Segmental SNR over 10 ms non-overlapping segments, clamped per segment to
/// `[-10, 35]` dB and averaged over speech-active segments only.
pub fn snr_seg_stats(clean: &WaveBuffer, enhanced: &WaveBuffer) -> Result<SnrSegStats> {
    if clean.len() != enhanced.len() {
        return Err(Error::ShapeMismatch(format!(
            "clean has {} samples, enhanced {}",
            clean.len(),
            enhanced.len()
        )));
    }
    let seg_len = (clean.sample_rate / 100) as usize;
    if seg_len == 0 || clean.len() < seg_len {
        return Err(Error::SignalTooShort {
            len: clean.len(),
            needed: seg_len.max(1),
        });
    }
    let n_segments = clean.len() / seg_len;
    let energies: Vec<f64> = (0..n_segments)
        .map(|i| {
            clean.samples[i * seg_len..(i + 1) * seg_len]
                .iter()
                .map(|s| s * s)
                .sum()
        })
        .collect();
    let e_max = energies.iter().copied().fold(0.0f64, f64::max);
    if e_max <= 0.0 {
        return Err(Error::EmptySelection("clean signal is silent".into()));
    }
    let threshold = e_max * 10f64.powf(-ACTIVITY_RANGE_DB / 10.0);

    let mut sum = 0.0;
    let mut sum_unclamped = 0.0;
    let mut active = 0usize;
    for (i, &energy) in energies.iter().enumerate() {
        if energy < threshold || energy <= 0.0 {
            continue;
        }
        let err: f64 = clean.samples[i * seg_len..(i + 1) * seg_len]
            .iter()
            .zip(&enhanced.samples[i * seg_len..(i + 1) * seg_len])
            .map(|(&s, &e)| (s - e) * (s - e))
            .sum();
        let raw = if err > 0.0 {
            10.0 * (energy / err).log10()
        } else {
            f64::INFINITY
        };
        sum += raw.clamp(SNR_SEG_MIN_DB, SNR_SEG_MAX_DB);
        sum_unclamped += raw;
        active += 1;
    }
    if active == 0 {
        return Err(Error::EmptySelection("no speech-active segments".into()));
    }
    Ok(SnrSegStats {
        mean_db: sum / active as f64,
        n_segments: active,
        mean_unclamped_db: sum_unclamped / active as f64,
    })
}

pub fn snr_seg(clean: &WaveBuffer, enhanced: &WaveBuffer) -> Result<f64> {
    Ok(snr_seg_stats(clean, enhanced)?.mean_db)
}

/// Everything `run_benchmark` needs besides the corpus itself.
#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub synth: SynthConfig,
    pub snrs_db: Vec<f64>,
    pub seconds_per_condition: f64,
    pub methods: Vec<Method>,
    pub hop_steps: usize,
    pub min_stat: MinStatConfig,
    pub enhance: EnhanceConfig,
    /// Compute enhancement + segmental SNR (on by default).
    pub with_enhancement: bool,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            snrs_db: vec![0.0, 5.0, 10.0, 15.0],
            seconds_per_condition: 20.0,
            methods: vec![Method::Lstm, Method::MinStat],
            hop_steps: 32,
            min_stat: MinStatConfig::default(),
            enhance: EnhanceConfig::default(),
            with_enhancement: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReportRow {
    pub method: Method,
    pub noise: String,
    pub snr_db: f64,
    pub log_err_db: f64,
    pub over_db: f64,
    pub under_db: f64,
    pub snr_seg_db: f64,
    pub n_frames: usize,
    pub n_segments: usize,
}

/// Per-(method, SNR) averages over noise types.
#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub method: Method,
    pub snr_db: f64,
    pub log_err_db: f64,
    pub snr_seg_db: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
}

struct MethodAccumulator {
    logerr_abs: f64,
    logerr_over: f64,
    logerr_under: f64,
    cells: usize,
    snr_sum: f64,
    segments: usize,
}

impl MethodAccumulator {
    fn new() -> Self {
        Self {
            logerr_abs: 0.0,
            logerr_over: 0.0,
            logerr_under: 0.0,
            cells: 0,
            snr_sum: 0.0,
            segments: 0,
        }
    }
}

fn estimate_with(
    method: Method,
    params: Option<&NetworkParams<f32>>,
    spec: &crate::dsp::Spectrogram,
    cfg: &BenchmarkConfig,
) -> Result<NoisePsdTrack> {
    match method {
        Method::Lstm => {
            let params = params.ok_or_else(|| {
                Error::Config("LSTM method requested without a checkpoint".into())
            })?;
            estimate_lstm(params, spec, cfg.synth.seq_len, cfg.hop_steps)
        }
        Method::MinStat => estimate_min_stat(spec, &cfg.min_stat),
    }
}

/// Run every requested method over freshly synthesized test mixtures, one
/// condition per (noise type, SNR), sharing the mixtures and ground truth
/// across methods. Deterministic for a fixed seed.
pub fn run_benchmark(
    corpus: &CorpusManifest,
    cfg: &BenchmarkConfig,
    params: Option<&NetworkParams<f32>>,
) -> Result<EvalReport> {
    if cfg.methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    if cfg.methods.contains(&Method::Lstm) && params.is_none() {
        return Err(Error::Config(
            "LSTM method requested without a checkpoint".into(),
        ));
    }

    let mut rows = Vec::new();
    for (noise_index, source) in corpus.noise.iter().enumerate() {
        for (snr_index, &snr_db) in cfg.snrs_db.iter().enumerate() {
            let seed = derive_seed(
                cfg.seed,
                &[
                    Split::Test.index() as u64,
                    noise_index as u64,
                    snr_index as u64,
                ],
            );
            let mixes = synthesize_condition(
                corpus,
                noise_index,
                snr_db,
                Split::Test,
                cfg.seconds_per_condition,
                &cfg.synth,
                seed,
            )?;

            let mut accumulators: Vec<MethodAccumulator> =
                cfg.methods.iter().map(|_| MethodAccumulator::new()).collect();
            for mix in &mixes {
                let spec = stft(&mix.mix, cfg.synth.fft_size, cfg.synth.hop)?;
                if spec.frames() < cfg.synth.seq_len {
                    log::warn!(
                        "test mixture of {} frames shorter than T = {}; skipped for all methods",
                        spec.frames(),
                        cfg.synth.seq_len
                    );
                    continue;
                }
                let noise_spec = stft(&mix.scaled_noise, cfg.synth.fft_size, cfg.synth.hop)?;
                let gt = ground_truth_psd(&noise_spec, cfg.synth.alpha)?;

                for (mi, &method) in cfg.methods.iter().enumerate() {
                    let track = estimate_with(method, params, &spec, cfg)?;
                    let stats = log_err_stats(&track, &gt, false)?;
                    let acc = &mut accumulators[mi];
                    acc.logerr_abs += stats.total_db * stats.cells as f64;
                    acc.logerr_over += stats.over_db * stats.cells as f64;
                    acc.logerr_under += stats.under_db * stats.cells as f64;
                    acc.cells += stats.cells;

                    if cfg.with_enhancement {
                        let trimmed = spec.truncated(track.frames());
                        let gains = wiener_gains(&trimmed, &track, &cfg.enhance)?;
                        let enhanced = apply_and_resynthesize(&trimmed, &gains)?;
                        let n = enhanced.len().min(mix.speech.len());
                        let clean = WaveBuffer::new(
                            mix.speech.samples[..n].to_vec(),
                            mix.speech.sample_rate,
                        );
                        let out = WaveBuffer::new(
                            enhanced.samples[..n].to_vec(),
                            enhanced.sample_rate,
                        );
                        let snr = snr_seg_stats(&clean, &out)?;
                        log::debug!(
                            "{} {} {} dB: unclamped segmental SNR {:.3} dB",
                            method.label(),
                            source.name,
                            snr_db,
                            snr.mean_unclamped_db
                        );
                        acc.snr_sum += snr.mean_db * snr.n_segments as f64;
                        acc.segments += snr.n_segments;
                    }
                }
            }

            for (mi, &method) in cfg.methods.iter().enumerate() {
                let acc = &accumulators[mi];
                if acc.cells == 0 {
                    return Err(Error::EmptySelection(format!(
                        "condition {} @ {} dB produced no evaluable frames",
                        source.name, snr_db
                    )));
                }
                rows.push(ReportRow {
                    method,
                    noise: source.name.clone(),
                    snr_db,
                    log_err_db: acc.logerr_abs / acc.cells as f64,
                    over_db: acc.logerr_over / acc.cells as f64,
                    under_db: acc.logerr_under / acc.cells as f64,
                    snr_seg_db: if acc.segments > 0 {
                        acc.snr_sum / acc.segments as f64
                    } else {
                        f64::NAN
                    },
                    n_frames: acc.cells,
                    n_segments: acc.segments,
                });
            }
        }
    }

    // Noise-type averages: unweighted mean of the per-noise rows.
    let mut summary = Vec::new();
    for &method in &cfg.methods {
        for &snr_db in &cfg.snrs_db {
            let selected: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.method == method && r.snr_db == snr_db)
                .collect();
            if selected.is_empty() {
                continue;
            }
            let n = selected.len() as f64;
            summary.push(SummaryRow {
                method,
                snr_db,
                log_err_db: selected.iter().map(|r| r.log_err_db).sum::<f64>() / n,
                snr_seg_db: selected.iter().map(|r| r.snr_seg_db).sum::<f64>() / n,
            });
        }
    }

    Ok(EvalReport { rows, summary })
}

pub fn write_report_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,noise,snr_db,log_err_db,snr_seg_db,n_frames,n_segments")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{},{}",
            r.method.label(),
            r.noise,
            r.snr_db,
            r.log_err_db,
            r.snr_seg_db,
            r.n_frames,
            r.n_segments
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Over/under-estimation decomposition of LogErr, one row per report row.
pub fn write_logerr_parts_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,noise,snr_db,over_db,under_db")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6}",
            r.method.label(),
            r.noise,
            r.snr_db,
            r.over_db,
            r.under_db
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,snr_db,log_err_db,snr_seg_db")?;
    for s in &report.summary {
        writeln!(
            w,
            "{},{},{:.6},{:.6}",
            s.method.label(),
            s.snr_db,
            s.log_err_db,
            s.snr_seg_db
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-data emission: LogErr per (noise, SNR, method), mirroring the
/// per-noise-type comparison layout.
pub fn write_fig_logerr_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "noise,snr_db,method,log_err_db")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{:.6}",
            r.noise,
            r.snr_db,
            r.method.label(),
            r.log_err_db
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-data emission: segmental SNR averaged over noise types per method.
pub fn write_fig_enhance_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "snr_db,method,snr_seg_db")?;
    for s in &report.summary {
        writeln!(w, "{},{},{:.6}", s.snr_db, s.method.label(), s.snr_seg_db)?;
    }
    w.flush()?;
    Ok(())
}
