//! `npsd` command line: dataset synthesis, training, noise PSD estimation,
//! enhancement and evaluation, wired for reproducible runs.
//!
//! Every subcommand resolves its settings as flag > config file > default,
//! derives all randomness from one master seed (drawn from OS entropy and
//! recorded when not given), and writes the fully resolved configuration to
//! `effective-config.toml` in the output directory. Re-running a subcommand
//! from that file reproduces its outputs bit-identically in single-threaded
//! mode.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use npsd::config::Settings;
use npsd::dataset::{self, build_training_set, load_corpus, CorpusManifest, Split};
use npsd::dsp::{stft, Grid};
use npsd::enhance::{apply_and_resynthesize, wiener_gains, GainGrid};
use npsd::estimator::{
    estimate_lstm, read_track_grid, write_track_csv, write_track_grid, Method, NoisePsdTrack,
};
use npsd::eval::{
    run_benchmark, write_fig_enhance_csv, write_fig_logerr_csv, write_logerr_parts_csv,
    write_report_csv, write_summary_csv, BenchmarkConfig,
};
use npsd::net::{load_checkpoint, save_checkpoint, train, Checkpoint};
use npsd::wav;

#[derive(Parser)]
#[command(
    name = "npsd",
    version,
    about = "Noise power spectral density estimation for noisy speech"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize training/validation sequences into binary caches.
    Synth(SynthArgs),
    /// Train the LSTM regressor and write a checkpoint.
    Train(TrainArgs),
    /// Estimate the noise PSD track of a noisy WAV file.
    Estimate(EstimateArgs),
    /// Wiener-enhance a noisy WAV file from a noise PSD track.
    Enhance(EnhanceArgs),
    /// Benchmark estimators on freshly synthesized test mixtures.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration TOML; omitted fields fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 is the bit-exact reference mode.
    /// Falls back to the NPSD_THREADS environment variable.
    #[arg(long)]
    threads: Option<usize>,
}

struct Resolved {
    settings: Settings,
    seed: u64,
    base_dir: PathBuf,
    out: PathBuf,
}

impl CommonArgs {
    fn resolve(&self) -> Result<Resolved> {
        let mut settings = match &self.config {
            Some(path) => Settings::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => Settings::default(),
        };
        if let Some(seed) = self.seed {
            settings.seed = Some(seed);
        }
        let seed = match settings.seed {
            Some(s) => s,
            None => {
                // Draw once from OS entropy and record it, so even unseeded
                // runs are reproducible post hoc.
                let s: u64 = rand_entropy();
                log::info!("no seed given; recorded entropy seed {s}");
                s
            }
        };
        settings.seed = Some(seed);

        let threads = self
            .threads
            .or_else(|| {
                std::env::var("NPSD_THREADS")
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .or(settings.threads)
            .unwrap_or(1);
        settings.threads = Some(threads);

        let base_dir = self
            .config
            .as_deref()
            .and_then(Path::parent)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))?;
        Ok(Resolved {
            settings,
            seed,
            base_dir,
            out: self.out.clone(),
        })
    }
}

fn rand_entropy() -> u64 {
    npsd::seed::entropy_seed()
}

fn write_effective_config(resolved: &Resolved) -> Result<()> {
    let path = resolved.out.join("effective-config.toml");
    resolved
        .settings
        .save(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_corpus_from(resolved: &Resolved) -> Result<CorpusManifest> {
    let c = &resolved.settings.corpus;
    load_corpus(&c.speech, &c.noise, c.split, &resolved.base_dir)
        .context("loading corpus manifest")
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sequence length T.
    #[arg(long)]
    seq_len: Option<usize>,
    /// Window-end stride.
    #[arg(long)]
    stride: Option<usize>,
    /// Ground-truth recursive-averaging factor.
    #[arg(long)]
    alpha: Option<f64>,
    /// Seconds of training audio per (noise, SNR) condition.
    #[arg(long)]
    train_seconds: Option<f64>,
    /// Seconds of validation audio per (noise, SNR) condition.
    #[arg(long)]
    validation_seconds: Option<f64>,
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut resolved = args.common.resolve()?;
    let s = &mut resolved.settings;
    if let Some(v) = args.seq_len {
        s.dataset.seq_len = v;
    }
    if let Some(v) = args.stride {
        s.dataset.stride = v;
    }
    if let Some(v) = args.alpha {
        s.dataset.alpha = v;
    }
    if let Some(v) = args.train_seconds {
        s.dataset.train_seconds_per_condition = v;
    }
    if let Some(v) = args.validation_seconds {
        s.dataset.validation_seconds_per_condition = v;
    }

    let corpus = load_corpus_from(&resolved)?;
    let cfg = resolved.settings.synth_config();
    let ds = &resolved.settings.dataset;

    let train_set = build_training_set(
        &corpus,
        &cfg,
        Split::Train,
        &ds.train_snrs_db,
        ds.train_seconds_per_condition,
        resolved.seed,
    )?;
    let val_set = build_training_set(
        &corpus,
        &cfg,
        Split::Validation,
        &ds.eval_snrs_db,
        ds.validation_seconds_per_condition,
        resolved.seed,
    )?;

    dataset::write_sequences(&resolved.out.join("train.nseq"), &train_set.sequences)?;
    dataset::write_sequences(&resolved.out.join("validation.nseq"), &val_set.sequences)?;

    let stats_path = resolved.out.join("synth_stats.csv");
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&stats_path)?);
        writeln!(w, "split,noise,snr_db,n_mixes,n_frames,n_sequences")?;
        for (split, stats) in [("train", &train_set.stats), ("validation", &val_set.stats)] {
            for row in stats.iter() {
                writeln!(
                    w,
                    "{split},{},{},{},{},{}",
                    row.noise, row.snr_db, row.n_mixes, row.n_frames, row.n_sequences
                )?;
            }
        }
    }
    write_effective_config(&resolved)?;
    println!(
        "synth: {} training and {} validation sequences written to {}",
        train_set.sequences.len(),
        val_set.sequences.len(),
        resolved.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding train.nseq/validation.nseq (e.g. a synth output
    /// directory). Omitted: synthesize directly from the manifest.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Continue from an existing checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    hidden1: Option<usize>,
    #[arg(long)]
    hidden2: Option<usize>,
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut resolved = args.common.resolve()?;
    let s = &mut resolved.settings;
    if let Some(v) = args.learning_rate {
        s.train.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        s.train.batch_size = v;
    }
    if let Some(v) = args.patience {
        s.train.patience = v;
    }
    if let Some(v) = args.max_epochs {
        s.train.max_epochs = v;
    }
    if let Some(v) = args.hidden1 {
        s.net.hidden1 = v;
    }
    if let Some(v) = args.hidden2 {
        s.net.hidden2 = v;
    }

    let (train_seqs, val_seqs) = match &args.cache {
        Some(dir) => {
            let train_path = dir.join("train.nseq");
            let val_path = dir.join("validation.nseq");
            (
                dataset::read_sequences(&train_path)
                    .with_context(|| format!("reading {}", train_path.display()))?,
                dataset::read_sequences(&val_path)
                    .with_context(|| format!("reading {}", val_path.display()))?,
            )
        }
        None => {
            let corpus = load_corpus_from(&resolved)?;
            let cfg = resolved.settings.synth_config();
            let ds = &resolved.settings.dataset;
            let train_set = build_training_set(
                &corpus,
                &cfg,
                Split::Train,
                &ds.train_snrs_db,
                ds.train_seconds_per_condition,
                resolved.seed,
            )?;
            let val_set = build_training_set(
                &corpus,
                &cfg,
                Split::Validation,
                &ds.eval_snrs_db,
                ds.validation_seconds_per_condition,
                resolved.seed,
            )?;
            (train_set.sequences, val_set.sequences)
        }
    };

    let mut opts = resolved.settings.train_options(resolved.seed);
    let mut dims = resolved.settings.network_dims();
    let mut checkpoint_seed = resolved.seed;
    let mut prior_steps = 0u64;
    if let Some(path) = &args.resume {
        let ck = load_checkpoint(path)
            .with_context(|| format!("loading checkpoint {}", path.display()))?;
        dims = ck.params.dims();
        checkpoint_seed = ck.seed;
        prior_steps = ck.steps;
        opts.initial_params = Some(ck.params);
    }

    let outcome = if opts.max_epochs == 0 {
        // Nothing to train; pass the initial parameters straight through.
        let params = match opts.initial_params.clone() {
            Some(p) => p,
            None => npsd::net::NetworkParams::<f32>::init(
                dims,
                npsd::seed::derive_seed(opts.seed, &[0]),
            )?,
        };
        npsd::net::TrainOutcome {
            params,
            history: Vec::new(),
            best_epoch: 0,
            steps: 0,
        }
    } else {
        train(dims, &train_seqs, &val_seqs, &opts)?
    };

    let ckpt_path = resolved.out.join("checkpoint.npsd");
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            params: outcome.params,
            steps: prior_steps + outcome.steps,
            seed: checkpoint_seed,
        },
    )?;

    let history_path = resolved.out.join("history.csv");
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&history_path)?);
        writeln!(w, "epoch,train_mse,validation_mse")?;
        for h in &outcome.history {
            writeln!(w, "{},{},{}", h.epoch, h.train_mse, h.val_mse)?;
        }
    }
    write_effective_config(&resolved)?;
    println!(
        "train: best epoch {} of {}; checkpoint written to {}",
        outcome.best_epoch,
        outcome.history.len(),
        ckpt_path.display()
    );
    Ok(())
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Noisy input WAV (16 kHz mono).
    #[arg(long)]
    input: PathBuf,
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Sliding-window moving step in frames; 1 means zero latency.
    #[arg(long)]
    hop_steps: Option<usize>,
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let mut resolved = args.common.resolve()?;
    if let Some(v) = args.hop_steps {
        resolved.settings.estimator.hop_steps = v;
    }
    let settings = &resolved.settings;

    let buf = wav::read_wav_16k(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let ck = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let spec = stft(&buf, settings.stft.fft_size, settings.stft.hop)?;
    let track = estimate_lstm(
        &ck.params,
        &spec,
        settings.dataset.seq_len,
        settings.estimator.hop_steps,
    )?;

    write_track_csv(&resolved.out.join("track.csv"), &track)?;
    write_track_grid(&resolved.out.join("track.npsg"), &track)?;
    write_effective_config(&resolved)?;
    println!(
        "estimate: {} frames ({} warm-up), latency {} frames{}",
        track.frames(),
        track.warmup_flags().iter().filter(|&&w| w).count(),
        track.latency_frames,
        if track.latency_frames == 0 {
            " (zero-latency mode)"
        } else {
            ""
        }
    );
    Ok(())
}

#[derive(Args)]
struct EnhanceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Noisy input WAV (16 kHz mono).
    #[arg(long)]
    input: PathBuf,
    /// Noise PSD track (NPSG grid written by `estimate`).
    #[arg(long)]
    track: PathBuf,
    #[arg(long)]
    dd_alpha: Option<f64>,
    #[arg(long)]
    g_min_db: Option<f64>,
}

fn cmd_enhance(args: &EnhanceArgs) -> Result<()> {
    let mut resolved = args.common.resolve()?;
    if let Some(v) = args.dd_alpha {
        resolved.settings.enhance.dd_alpha = v;
    }
    if let Some(v) = args.g_min_db {
        resolved.settings.enhance.g_min_db = v;
    }
    let settings = &resolved.settings;

    let buf = wav::read_wav_16k(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let spec = stft(&buf, settings.stft.fft_size, settings.stft.hop)?;
    let grid = read_track_grid(&args.track)
        .with_context(|| format!("reading {}", args.track.display()))?;
    if grid.bins() != spec.bins() || grid.frames() > spec.frames() {
        bail!(
            "track grid {}x{} does not align with the {}x{} spectrogram of {}",
            grid.bins(),
            grid.frames(),
            spec.bins(),
            spec.frames(),
            args.input.display()
        );
    }
    let covered = grid.frames();
    let warmup = vec![false; covered];
    let track = NoisePsdTrack::from_grid(Method::Lstm, 0, grid, warmup)?;

    // Gains over the covered frames; any trailing frames pass through.
    let trimmed = spec.truncated(covered);
    let gains = wiener_gains(&trimmed, &track, &settings.enhance_config())?;
    let mut full = Grid::zeros(spec.bins(), spec.frames());
    for k in 0..spec.bins() {
        let row = full.row_mut(k);
        for l in 0..spec.frames() {
            row[l] = if l < covered {
                gains.grid().at(k, l)
            } else {
                1.0
            };
        }
    }
    let full_gains = GainGrid::from_grid(full, gains.g_min)?;
    let enhanced = apply_and_resynthesize(&spec, &full_gains)?;

    let out_path = resolved.out.join("enhanced.wav");
    wav::write_wav_f32(&out_path, &enhanced)?;
    write_effective_config(&resolved)?;
    println!("enhance: wrote {}", out_path.display());
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trained checkpoint (required when the methods include lstm).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated methods: lstm,min_stat.
    #[arg(long, value_delimiter = ',', default_values_t = [String::from("lstm"), String::from("min_stat")])]
    methods: Vec<String>,
    /// Seconds of test audio per (noise, SNR) condition.
    #[arg(long)]
    test_seconds: Option<f64>,
    #[arg(long)]
    hop_steps: Option<usize>,
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mut resolved = args.common.resolve()?;
    if let Some(v) = args.test_seconds {
        resolved.settings.dataset.test_seconds_per_condition = v;
    }
    if let Some(v) = args.hop_steps {
        resolved.settings.estimator.hop_steps = v;
    }
    let settings = &resolved.settings;

    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<npsd::Result<_>>()?;

    let checkpoint = if methods.contains(&Method::Lstm) {
        let path = args.checkpoint.as_ref().ok_or_else(|| {
            anyhow::anyhow!("the lstm method needs --checkpoint <file>")
        })?;
        Some(
            load_checkpoint(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))?,
        )
    } else {
        None
    };

    let corpus = load_corpus_from(&resolved)?;
    let cfg = BenchmarkConfig {
        synth: settings.synth_config(),
        snrs_db: settings.dataset.eval_snrs_db.clone(),
        seconds_per_condition: settings.dataset.test_seconds_per_condition,
        methods,
        hop_steps: settings.estimator.hop_steps,
        min_stat: settings.min_stat_config(),
        enhance: settings.enhance_config(),
        with_enhancement: true,
        seed: resolved.seed,
    };
    let report = run_benchmark(&corpus, &cfg, checkpoint.as_ref().map(|c| &c.params))?;

    write_report_csv(&resolved.out.join("report.csv"), &report)?;
    write_summary_csv(&resolved.out.join("summary.csv"), &report)?;
    write_logerr_parts_csv(&resolved.out.join("logerr_parts.csv"), &report)?;
    write_fig_logerr_csv(&resolved.out.join("fig_logerr.csv"), &report)?;
    write_fig_enhance_csv(&resolved.out.join("fig_enhance.csv"), &report)?;
    write_effective_config(&resolved)?;

    for s in &report.summary {
        println!(
            "eval: {} @ {} dB: LogErr {:.3} dB, SNRseg {:.3} dB",
            s.method.label(),
            s.snr_db,
            s.log_err_db,
            s.snr_seg_db
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Enhance(args) => cmd_enhance(args),
        Command::Eval(args) => cmd_eval(args),
    }
}
