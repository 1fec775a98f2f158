//! RIFF WAV input/output.
//!
//! Supported encodings: mono 16-bit signed PCM and mono IEEE-754 32-bit
//! float. PCM samples map to [-1, 1) by division by 32768.

use std::path::Path;

use crate::dsp::WaveBuffer;
use crate::error::{Error, Result};

const PIPELINE_SAMPLE_RATE: u32 = 16_000;

fn wav_err(path: &Path, source: hound::Error) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

/// Read a mono WAV file.
pub fn read_wav(path: &Path) -> Result<WaveBuffer> {
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let wav_spec = reader.spec();
    if wav_spec.channels != 1 {
        return Err(Error::WavEncoding(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            wav_spec.channels
        )));
    }
    let samples: Vec<f64> = match (wav_spec.sample_format, wav_spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (fmt, bits) => {
            return Err(Error::WavEncoding(format!(
                "{}: {fmt:?} {bits}-bit, only PCM16 and float32 are supported",
                path.display()
            )))
        }
    };
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::WavEncoding(format!(
            "{}: non-finite sample values",
            path.display()
        )));
    }
    Ok(WaveBuffer::new(samples, wav_spec.sample_rate))
}

/// Read a mono WAV file and reject anything not at the 16 kHz pipeline rate.
pub fn read_wav_16k(path: &Path) -> Result<WaveBuffer> {
    let buf = read_wav(path)?;
    if buf.sample_rate != PIPELINE_SAMPLE_RATE {
        return Err(Error::SampleRate {
            found: buf.sample_rate,
            expected: PIPELINE_SAMPLE_RATE,
        });
    }
    Ok(buf)
}

/// Number of samples in a mono WAV file, from the header alone.
pub fn wav_len(path: &Path) -> Result<usize> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    if reader.spec().channels != 1 {
        return Err(Error::WavEncoding(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            reader.spec().channels
        )));
    }
    Ok(reader.duration() as usize)
}

/// Validate the header (mono, supported encoding, 16 kHz) and return the
/// sample count without decoding the payload.
pub fn probe_wav_16k(path: &Path) -> Result<usize> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::WavEncoding(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) | (hound::SampleFormat::Float, 32) => {}
        (fmt, bits) => {
            return Err(Error::WavEncoding(format!(
                "{}: {fmt:?} {bits}-bit, only PCM16 and float32 are supported",
                path.display()
            )))
        }
    }
    if spec.sample_rate != PIPELINE_SAMPLE_RATE {
        return Err(Error::SampleRate {
            found: spec.sample_rate,
            expected: PIPELINE_SAMPLE_RATE,
        });
    }
    Ok(reader.duration() as usize)
}

/// Write a mono IEEE float32 WAV file.
pub fn write_wav_f32(path: &Path, buf: &WaveBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in &buf.samples {
        writer.write_sample(s as f32).map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))?;
    Ok(())
}

/// Write a mono 16-bit PCM WAV file, clamping to the representable range.
pub fn write_wav_pcm16(path: &Path, buf: &WaveBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in &buf.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))?;
    Ok(())
}
