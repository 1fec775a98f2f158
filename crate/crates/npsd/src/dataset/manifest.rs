//! Corpus manifest: glob expansion, split assignment and validation.
//!
//! Speech is split by whole files so the train/validation/test speech sets
//! are disjoint. Each noise file is split into three contiguous sections by
//! sample index, so noise segments drawn for different splits never overlap.

use std::ops::Range;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::wav;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub(crate) fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// One noise recording with its per-split sample ranges.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    pub name: String,
    pub path: PathBuf,
    pub len: usize,
    pub sections: [Range<usize>; 3],
}

impl NoiseSource {
    pub fn section(&self, split: Split) -> Range<usize> {
        self.sections[split.index()].clone()
    }
}

/// Validated corpus: per-split speech file lists plus sectioned noise files.
#[derive(Clone, Debug)]
pub struct CorpusManifest {
    speech: [Vec<PathBuf>; 3],
    pub noise: Vec<NoiseSource>,
}

impl CorpusManifest {
    pub fn speech_files(&self, split: Split) -> &[PathBuf] {
        &self.speech[split.index()]
    }
}

fn expand_globs(patterns: &[String], base: &Path, what: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for pattern in patterns {
        let full = if Path::new(pattern).is_absolute() {
            pattern.clone()
        } else {
            base.join(pattern).to_string_lossy().into_owned()
        };
        let matches =
            glob::glob(&full).map_err(|e| Error::Config(format!("{what} glob {pattern}: {e}")))?;
        for entry in matches {
            let path =
                entry.map_err(|e| Error::Config(format!("{what} glob {pattern}: {e}")))?;
            if path.is_file() {
                files.push(path);
            }
        }
    }
    files.sort();
    files.dedup();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "{what} globs {patterns:?} matched no files"
        )));
    }
    Ok(files)
}

fn unique_name(path: &Path, taken: &[String]) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "noise".to_string());
    if !taken.contains(&stem) {
        return stem;
    }
    let mut n = 2;
    loop {
        let candidate = format!("{stem}_{n}");
        if !taken.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

/// Expand the speech/noise globs relative to `base`, verify every file is a
/// decodable 16 kHz mono WAV, and assign splits by the given fractions.
pub fn load_corpus(
    speech_globs: &[String],
    noise_globs: &[String],
    split_fractions: [f64; 3],
    base: &Path,
) -> Result<CorpusManifest> {
    let sum: f64 = split_fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || split_fractions.iter().any(|&f| f < 0.0) {
        return Err(Error::Config(format!(
            "split fractions must be nonnegative and sum to 1, got {split_fractions:?}"
        )));
    }

    let speech_files = expand_globs(speech_globs, base, "speech")?;
    for path in &speech_files {
        wav::probe_wav_16k(path)?;
    }
    let n = speech_files.len();
    let b1 = ((n as f64) * split_fractions[0]).round() as usize;
    let b2 = ((n as f64) * (split_fractions[0] + split_fractions[1])).round() as usize;
    let b1 = b1.min(n);
    let b2 = b2.clamp(b1, n);
    let speech = [
        speech_files[..b1].to_vec(),
        speech_files[b1..b2].to_vec(),
        speech_files[b2..].to_vec(),
    ];

    let noise_files = expand_globs(noise_globs, base, "noise")?;
    let mut noise = Vec::with_capacity(noise_files.len());
    let mut names: Vec<String> = Vec::new();
    for path in noise_files {
        let len = wav::probe_wav_16k(&path)?;
        let c1 = ((len as f64) * split_fractions[0]).round() as usize;
        let c2 = ((len as f64) * (split_fractions[0] + split_fractions[1])).round() as usize;
        let c1 = c1.min(len);
        let c2 = c2.clamp(c1, len);
        let name = unique_name(&path, &names);
        names.push(name.clone());
        noise.push(NoiseSource {
            name,
            path,
            len,
            sections: [0..c1, c1..c2, c2..len],
        });
    }

    Ok(CorpusManifest { speech, noise })
}
