//! PCM audio handling: WAV decode/encode, synthetic test signals, and
//! seeded noisy-mixture synthesis at a target SNR.
//!
//! Only 16-bit mono integer WAV is accepted. Anything else is rejected
//! rather than resampled, so difficulty scores are always computed over
//! the same kind of payload.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("wav decode error: {0}")]
    Wav(#[from] hound::Error),
    #[error(
        "unsupported wav format: {channels} channel(s), {bits_per_sample}-bit {sample_format}; \
         expected 16-bit mono integer PCM"
    )]
    UnsupportedFormat {
        channels: u16,
        bits_per_sample: u16,
        sample_format: &'static str,
    },
    #[error("audio sample sequence is empty")]
    Empty,
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("channel count must be positive")]
    ZeroChannels,
    #[error("signal has zero power; SNR is undefined")]
    ZeroPowerSignal,
}

/// A block of signed 16-bit PCM samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioSample {
    samples: Vec<i16>,
    sample_rate_hz: u32,
    channel_count: u16,
}

impl AudioSample {
    /// Wraps raw samples, rejecting empty input and zero rates.
    pub fn new(samples: Vec<i16>, sample_rate_hz: u32, channel_count: u16) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        if sample_rate_hz == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if channel_count == 0 {
            return Err(AudioError::ZeroChannels);
        }
        Ok(Self { samples, sample_rate_hz, channel_count })
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channel_count(&self) -> u16 {
        self.channel_count
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Raw little-endian sample bytes. This header-free payload is what
    /// the compression-ratio score is computed over, so container
    /// metadata can never perturb difficulty rankings.
    pub fn pcm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.samples.len() * 2);
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    /// Mean squared sample value.
    pub fn power(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|&s| {
            let x = s as f64;
            x * x
        }).sum();
        sum / self.samples.len() as f64
    }
}

/// Decodes a 16-bit mono integer WAV stream.
pub fn decode_wav<R: Read>(reader: R) -> Result<AudioSample, AudioError> {
    let mut wav = hound::WavReader::new(reader)?;
    let spec = wav.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(AudioError::UnsupportedFormat {
            channels: spec.channels,
            bits_per_sample: spec.bits_per_sample,
            sample_format: match spec.sample_format {
                hound::SampleFormat::Int => "integer",
                hound::SampleFormat::Float => "float",
            },
        });
    }
    let samples = wav.samples::<i16>().collect::<Result<Vec<_>, _>>()?;
    AudioSample::new(samples, spec.sample_rate, spec.channels)
}

pub fn read_wav<P: AsRef<Path>>(path: P) -> Result<AudioSample, AudioError> {
    let file = std::fs::File::open(path)?;
    decode_wav(std::io::BufReader::new(file))
}

pub fn write_wav<P: AsRef<Path>>(path: P, audio: &AudioSample) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: audio.channel_count,
        sample_rate: audio.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &audio.samples {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Generates a seeded speech-like test signal: a frequency-wobbling tone
/// under a syllabic-rate amplitude envelope. Deterministic per seed.
pub fn speech_like_tone(seed: u64, sample_rate_hz: u32, duration_secs: f64, amplitude: f64) -> AudioSample {
    use std::f64::consts::TAU;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = (sample_rate_hz as f64 * duration_secs).round() as usize;
    let carrier_hz: f64 = rng.random_range(140.0..220.0);
    let wobble_hz: f64 = rng.random_range(20.0..60.0);
    let wobble_rate: f64 = rng.random_range(0.3..0.8);
    let syllable_rate: f64 = rng.random_range(2.0..5.0);
    let phase_a: f64 = rng.random_range(0.0..TAU);
    let phase_b: f64 = rng.random_range(0.0..TAU);

    let mut phase = 0.0_f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sample_rate_hz as f64;
        let freq = carrier_hz + wobble_hz * (TAU * wobble_rate * t + phase_a).sin();
        phase += TAU * freq / sample_rate_hz as f64;
        let envelope = 0.55 + 0.45 * (TAU * syllable_rate * t + phase_b).sin();
        let value = amplitude * envelope * phase.sin();
        samples.push(value.round().clamp(-32768.0, 32767.0) as i16);
    }
    AudioSample::new(samples, sample_rate_hz, 1).expect("tone is non-empty")
}

/// Adds seeded white Gaussian noise to `clean`, scaled so the realized
/// signal-to-noise ratio equals `snr_db`. The noise is normalized by its
/// own empirical power, so the requested SNR is met to well within
/// 0.1 dB; the mixture is clipped to the 16-bit range.
pub fn synth_noisy_mixture(clean: &AudioSample, snr_db: f64, seed: u64) -> Result<AudioSample, AudioError> {
    let signal_power = clean.power();
    if signal_power == 0.0 {
        return Err(AudioError::ZeroPowerSignal);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let noise: Vec<f64> = (0..clean.len()).map(|_| normal.sample(&mut rng)).collect();
    let raw_power: f64 = noise.iter().map(|x| x * x).sum::<f64>() / noise.len() as f64;
    let scale = (signal_power / (raw_power * 10f64.powf(snr_db / 10.0))).sqrt();

    let samples: Vec<i16> = clean
        .samples()
        .iter()
        .zip(&noise)
        .map(|(&s, n)| (s as f64 + scale * n).round().clamp(-32768.0, 32767.0) as i16)
        .collect();
    AudioSample::new(samples, clean.sample_rate_hz(), clean.channel_count())
}

/// SNR realized by a mixture relative to its clean source, in dB,
/// measured from the actual noise component (mixture minus clean).
pub fn measured_snr_db(clean: &AudioSample, mixture: &AudioSample) -> Result<f64, AudioError> {
    let signal_power = clean.power();
    if signal_power == 0.0 {
        return Err(AudioError::ZeroPowerSignal);
    }
    let noise_power: f64 = clean
        .samples()
        .iter()
        .zip(mixture.samples())
        .map(|(&c, &m)| {
            let d = m as f64 - c as f64;
            d * d
        })
        .sum::<f64>()
        / clean.len() as f64;
    Ok(10.0 * (signal_power / noise_power).log10())
}
