use std::path::Path;

use crate::error::{Error, Result};

pub const REQUIRED_SAMPLE_RATE: u32 = 16_000;

/// Mono audio scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        Ok(AudioSignal {
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a RIFF/WAVE PCM16 mono 16 kHz file. Anything else is rejected; there
/// is no resampling or downmixing.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedAudio(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!("channels={} unsupported", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio(format!(
            "encoding {:?}/{} bits unsupported (need PCM 16-bit)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.sample_rate != REQUIRED_SAMPLE_RATE {
        return Err(Error::UnsupportedAudio(format!(
            "sample_rate={} unsupported (need {REQUIRED_SAMPLE_RATE})",
            spec.sample_rate
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| {
            s.map(|v| v as f64 / 32768.0)
                .map_err(|e| Error::UnsupportedAudio(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    AudioSignal::new(samples, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, channels: u16, rate: u32, samples: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn one_second_of_silence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("silence.wav");
        write(&p, 1, 16_000, &vec![0; 16_000]);
        let sig = load_wav(&p).unwrap();
        assert_eq!(sig.samples.len(), 16_000);
        assert!(sig.samples.iter().all(|&x| x == 0.0));
        assert_eq!(sig.duration(), 1.0);
    }

    #[test]
    fn full_scale_square_wave() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("square.wav");
        let samples: Vec<i16> = (0..100).map(|i| if i % 2 == 0 { i16::MAX } else { i16::MIN }).collect();
        write(&p, 1, 16_000, &samples);
        let sig = load_wav(&p).unwrap();
        assert_eq!(sig.samples.len(), 100);
        for (i, &x) in sig.samples.iter().enumerate() {
            let expected = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((x - expected).abs() < 1e-4);
            assert!((-1.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn rejects_stereo_and_other_rates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stereo.wav");
        write(&p, 2, 16_000, &[0; 64]);
        let err = load_wav(&p).unwrap_err().to_string();
        assert!(err.contains("channels=2 unsupported"), "{err}");

        let p = dir.path().join("8k.wav");
        write(&p, 1, 8_000, &[0; 64]);
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedAudio(_))));
    }

    #[test]
    fn rejects_float_encoding() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("float.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedAudio(_))));
    }
}
