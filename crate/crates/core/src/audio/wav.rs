use std::io::ErrorKind;
use std::path::Path;

use super::{AudioError, Waveform};

/// Reads a 16-bit integer PCM WAV file (mono or stereo) as a mono waveform.
///
/// Stereo frames are averaged; sample `s` maps to `s / 32768`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform, AudioError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(e, path))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(AudioError::UnsupportedEncoding(
            "floating-point samples".into(),
        ));
    }
    if spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{}-bit PCM (only 16-bit is supported)",
            spec.bits_per_sample
        )));
    }
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels",
            spec.channels
        )));
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::MalformedRiff("sample rate is zero".into()));
    }
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(|e| map_hound(e, path))?;
    let channels = spec.channels as usize;
    let samples = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f32 = frame.iter().map(|&s| s as f32).sum();
            sum / channels as f32 / 32768.0
        })
        .collect();
    Ok(Waveform::clipped(samples, spec.sample_rate))
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<(), AudioError> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(e, path))?;
    for &s in wave.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(e, path))?;
    }
    writer.finalize().map_err(|e| map_hound(e, path))
}

fn map_hound(err: hound::Error, path: &Path) -> AudioError {
    match err {
        hound::Error::IoError(e) if e.kind() == ErrorKind::NotFound => {
            AudioError::NotFound(path.to_path_buf())
        }
        hound::Error::IoError(e) if e.kind() == ErrorKind::UnexpectedEof => {
            AudioError::MalformedRiff(format!("truncated file: {e}"))
        }
        hound::Error::IoError(e) => AudioError::Io(e),
        hound::Error::FormatError(msg) => AudioError::MalformedRiff(msg.to_string()),
        hound::Error::Unsupported => {
            AudioError::UnsupportedEncoding("unsupported WAVE format".into())
        }
        hound::Error::UnfinishedSample => {
            AudioError::MalformedRiff("data chunk ends mid-sample".into())
        }
        hound::Error::InvalidSampleFormat | hound::Error::TooWide => {
            AudioError::UnsupportedEncoding("sample format does not fit 16-bit PCM".into())
        }
    }
}
