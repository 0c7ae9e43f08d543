//! Training-time waveform augmentations: additive noise at a target SNR,
//! band-reject filtering and a synthetic low-frequency noise source.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{rms, Waveform};
use crate::dsp::{bandstop_taps, filter_same, kaiser_beta, lowpass_taps};

/// FIR length of the band-reject and noise-shaping filters.
pub const FIR_TAPS: usize = 255;
/// Design attenuation of the band-reject filter (dB).
const BANDSTOP_ATTENUATION_DB: f64 = 45.0;
/// Cutoff of the synthetic rumble noise (Hz).
pub const NOISE_CUTOFF_HZ: f64 = 500.0;
/// RMS level of generated noise.
pub const NOISE_RMS: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid band [{low_hz}, {high_hz}] Hz for Nyquist {nyquist_hz} Hz")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        nyquist_hz: f64,
    },
    #[error("noise waveform is empty")]
    EmptyNoise,
    #[error("sample rates differ: signal {signal} Hz, noise {noise} Hz")]
    RateMismatch { signal: u32, noise: u32 },
}

/// What one augmentation draw does to an example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AugmentMode {
    Clean,
    Noise { snr_db: f64 },
    BandReject { low_hz: f64, high_hz: f64 },
}

/// Sampling policy for augmentations: one of clean, noise at each SNR, or a
/// random band-reject, chosen uniformly per example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    pub snr_db: Vec<f64>,
    pub band_center_hz: (f64, f64),
    pub band_width_hz: (f64, f64),
    pub enable_noise: bool,
    pub enable_band_reject: bool,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            snr_db: vec![5.0, 10.0, 15.0],
            band_center_hz: (500.0, 6000.0),
            band_width_hz: (200.0, 1000.0),
            enable_noise: true,
            enable_band_reject: true,
        }
    }
}

impl AugmentSpec {
    pub fn disabled() -> Self {
        Self {
            enable_noise: false,
            enable_band_reject: false,
            ..Self::default()
        }
    }

    pub fn sample_mode(&self, rng: &mut impl Rng) -> AugmentMode {
        let mut modes = vec![AugmentMode::Clean];
        if self.enable_noise {
            modes.extend(
                self.snr_db
                    .iter()
                    .map(|&snr_db| AugmentMode::Noise { snr_db }),
            );
        }
        let band = self.enable_band_reject;
        let pick = rng.gen_range(0..modes.len() + band as usize);
        if pick < modes.len() {
            return modes[pick];
        }
        let center = rng.gen_range(self.band_center_hz.0..=self.band_center_hz.1);
        let width = rng.gen_range(self.band_width_hz.0..=self.band_width_hz.1);
        AugmentMode::BandReject {
            low_hz: center - width / 2.0,
            high_hz: center + width / 2.0,
        }
    }

    /// Applies `mode`, cropping the noise at a random offset.
    pub fn apply(
        &self,
        mode: AugmentMode,
        signal: &Waveform,
        noise: &Waveform,
        rng: &mut impl Rng,
    ) -> Waveform {
        match mode {
            AugmentMode::Clean => signal.clone(),
            AugmentMode::Noise { snr_db } => {
                let offset = if noise.len() > signal.len() {
                    rng.gen_range(0..noise.len() - signal.len())
                } else {
                    0
                };
                let cropped = noise.slice(offset, noise.len());
                match mix_noise(signal, &cropped, snr_db) {
                    Ok(m) => m.waveform,
                    Err(_) => signal.clone(),
                }
            }
            AugmentMode::BandReject { low_hz, high_hz } => {
                band_reject(signal, low_hz, high_hz).unwrap_or_else(|_| signal.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixOutcome {
    pub waveform: Waveform,
    /// Amplitude factor applied to the noise.
    pub noise_gain: f64,
    /// The signal had zero RMS and was returned unchanged.
    pub silent_signal: bool,
}

/// Adds `noise` scaled so that `20 log10(rms(signal) / rms(scaled noise))`
/// equals `snr_db`. Noise shorter than the signal is tiled; longer noise is
/// cropped. The sum is clipped to the sample range.
pub fn mix_noise(
    signal: &Waveform,
    noise: &Waveform,
    snr_db: f64,
) -> Result<MixOutcome, AugmentError> {
    if noise.is_empty() {
        return Err(AugmentError::EmptyNoise);
    }
    if noise.sample_rate_hz() != signal.sample_rate_hz() {
        return Err(AugmentError::RateMismatch {
            signal: signal.sample_rate_hz(),
            noise: noise.sample_rate_hz(),
        });
    }
    let n = signal.len();
    let tiled: Vec<f32> = noise.samples().iter().copied().cycle().take(n).collect();
    let rms_signal = signal.rms();
    let rms_noise = rms(&tiled);
    if rms_signal == 0.0 || rms_noise == 0.0 {
        return Ok(MixOutcome {
            waveform: signal.clone(),
            noise_gain: 0.0,
            silent_signal: rms_signal == 0.0,
        });
    }
    let gain = rms_signal / (rms_noise * 10f64.powf(snr_db / 20.0));
    let mixed = signal
        .samples()
        .iter()
        .zip(&tiled)
        .map(|(&s, &v)| (s as f64 + gain * v as f64) as f32)
        .collect();
    Ok(MixOutcome {
        waveform: Waveform::clipped(mixed, signal.sample_rate_hz()),
        noise_gain: gain,
        silent_signal: false,
    })
}

/// Linear-phase FIR notch removing `[low_hz, high_hz]`; same length and
/// alignment as the input.
pub fn band_reject(w: &Waveform, low_hz: f64, high_hz: f64) -> Result<Waveform, AugmentError> {
    let nyquist_hz = w.sample_rate_hz() as f64 / 2.0;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist_hz) {
        return Err(AugmentError::InvalidBand {
            low_hz,
            high_hz,
            nyquist_hz,
        });
    }
    let fs = w.sample_rate_hz() as f64;
    // Kaiser transition width for this length and attenuation; the ideal
    // edges are pushed out by half of it so the whole band is attenuated.
    let transition = (BANDSTOP_ATTENUATION_DB - 7.95) / (14.36 * (FIR_TAPS - 1) as f64) * fs;
    let lo = (low_hz - transition / 2.0).max(1.0);
    let hi = (high_hz + transition / 2.0).min(nyquist_hz - 1.0);
    let taps = bandstop_taps(
        lo / fs,
        hi / fs,
        FIR_TAPS,
        kaiser_beta(BANDSTOP_ATTENUATION_DB),
    );
    Ok(Waveform::clipped(
        filter_same(w.samples(), &taps),
        w.sample_rate_hz(),
    ))
}

/// Low-passed white noise (cutoff [`NOISE_CUTOFF_HZ`]) normalized to
/// [`NOISE_RMS`], standing in for car / air-conditioning rumble.
pub fn synth_noise(len: usize, sample_rate_hz: u32, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Generate a margin so the filter's edge transients can be discarded.
    let margin = FIR_TAPS;
    let white: Vec<f32> = (0..len + 2 * margin)
        .map(|_| rng.gen_range(-1.0f32..1.0))
        .collect();
    let taps = lowpass_taps(
        NOISE_CUTOFF_HZ / sample_rate_hz as f64,
        FIR_TAPS,
        kaiser_beta(60.0),
    );
    let shaped = filter_same(&white, &taps);
    let body = &shaped[margin..margin + len];
    let level = rms(body);
    let scale = if level > 0.0 { NOISE_RMS / level } else { 0.0 };
    Waveform::clipped(
        body.iter().map(|&s| (s as f64 * scale) as f32).collect(),
        sample_rate_hz,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn tone(freq: f64, len: usize, amp: f64) -> Waveform {
        Waveform::clipped(
            (0..len)
                .map(|i| {
                    (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()) as f32
                })
                .collect(),
            16000,
        )
    }

    fn random_signal(seed: u64, len: usize, amp: f32) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::clipped((0..len).map(|_| rng.gen_range(-amp..amp)).collect(), 16000)
    }

    fn interior_rms(w: &Waveform) -> f64 {
        rms(&w.samples()[FIR_TAPS..w.len() - FIR_TAPS])
    }

    #[test]
    fn snr_definition() {
        let s = Waveform::clipped(vec![0.1, -0.1, 0.1, -0.1], 16000);
        let n = Waveform::clipped(vec![0.1, 0.1, -0.1, -0.1], 16000);
        let out = mix_noise(&s, &n, 20.0).unwrap();
        assert!((out.noise_gain - 0.1).abs() < 1e-6);
        // The corresponding noise power factor.
        assert!((out.noise_gain * out.noise_gain - 0.01).abs() < 1e-7);
        let zero_db = mix_noise(&s, &n, 0.0).unwrap();
        assert!((zero_db.noise_gain * rms(n.samples()) - s.rms()).abs() < 1e-6);
    }

    // Recompute the realized SNR from the mixture.
    #[test]
    fn realized_snr_matches_target() {
        for (seed, snr) in [(1u64, 5.0), (2, 10.0), (3, 15.0), (4, -3.0), (5, 22.5)] {
            let s = random_signal(seed, 4000, 0.2);
            let n = random_signal(seed + 100, 1500, 0.5);
            let out = mix_noise(&s, &n, snr).unwrap();
            assert_eq!(out.waveform.len(), s.len());
            let residual: Vec<f32> = out
                .waveform
                .samples()
                .iter()
                .zip(s.samples())
                .map(|(m, c)| m - c)
                .collect();
            let measured = 20.0 * (s.rms() / rms(&residual)).log10();
            assert!(
                (measured - snr).abs() < 0.1,
                "target {snr}, measured {measured}"
            );
        }
    }

    #[test]
    fn silent_signal_is_flagged() {
        let s = Waveform::silence(100, 16000);
        let out = mix_noise(&s, &random_signal(1, 100, 0.3), 10.0).unwrap();
        assert!(out.silent_signal);
        assert_eq!(out.waveform, s);
    }

    #[test]
    fn tone_in_stop_band_is_removed() {
        for (low, high) in [(1000.0, 1600.0), (2900.0, 3100.0), (5500.0, 6500.0)] {
            let w = tone((low + high) / 2.0, 16000, 0.5);
            let out = band_reject(&w, low, high).unwrap();
            let atten = 20.0 * (interior_rms(&out) / interior_rms(&w)).log10();
            assert!(atten <= -40.0, "band [{low}, {high}]: {atten} dB");
        }
    }

    #[test]
    fn tone_outside_band_is_preserved() {
        // two octaves below and above a 1000–1400 Hz band
        for f in [250.0, 5600.0] {
            let w = tone(f, 16000, 0.5);
            let out = band_reject(&w, 1000.0, 1400.0).unwrap();
            let gain = 20.0 * (interior_rms(&out) / interior_rms(&w)).log10();
            assert!(gain.abs() <= 1.0, "{f} Hz: {gain} dB");
        }
    }

    #[test]
    fn band_reject_edge_cases() {
        let z = Waveform::silence(500, 16000);
        assert_eq!(band_reject(&z, 1000.0, 2000.0).unwrap(), z);
        assert!(band_reject(&z, 2000.0, 1000.0).is_err());
        assert!(band_reject(&z, 0.0, 1000.0).is_err());
        assert!(band_reject(&z, 1000.0, 8000.0).is_err());
    }

    #[test]
    fn noise_is_deterministic_and_low_frequency() {
        let a = synth_noise(32000, 16000, 7);
        assert_eq!(a, synth_noise(32000, 16000, 7));
        assert_ne!(a, synth_noise(32000, 16000, 8));
        let level = a.rms();
        assert!((0.05..=0.2).contains(&level), "rms {level}");
        let n = a.len();
        let mut buf: Vec<Complex<f64>> = a
            .samples()
            .iter()
            .map(|&s| Complex::new(s as f64, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (mut num, mut den) = (0.0, 0.0);
        for (k, c) in buf[..n / 2].iter().enumerate() {
            let p = c.norm_sqr();
            num += p * k as f64 * 16000.0 / n as f64;
            den += p;
        }
        let centroid = num / den;
        assert!(centroid < 600.0, "centroid {centroid} Hz");
    }

    #[test]
    fn sampled_modes_cover_policy() {
        let spec = AugmentSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = [0usize; 3];
        for _ in 0..500 {
            match spec.sample_mode(&mut rng) {
                AugmentMode::Clean => seen[0] += 1,
                AugmentMode::Noise { snr_db } => {
                    assert!([5.0, 10.0, 15.0].contains(&snr_db));
                    seen[1] += 1
                }
                AugmentMode::BandReject { low_hz, high_hz } => {
                    assert!(low_hz > 0.0 && high_hz < 8000.0 && high_hz - low_hz >= 200.0 - 1e-9);
                    seen[2] += 1
                }
            }
        }
        assert!(seen.iter().all(|&c| c > 50));
        assert!(matches!(
            AugmentSpec::disabled().sample_mode(&mut rng),
            AugmentMode::Clean
        ));
    }

    #[test]
    fn augmentations_keep_length_and_finiteness() {
        let spec = AugmentSpec::default();
        let s = random_signal(3, 3000, 0.9);
        let noise = synth_noise(5000, 16000, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mode = spec.sample_mode(&mut rng);
            let out = spec.apply(mode, &s, &noise, &mut rng);
            assert_eq!(out.len(), s.len());
            assert!(out
                .samples()
                .iter()
                .all(|v| v.is_finite() && *v >= -1.0 && *v < 1.0));
        }
    }
}
