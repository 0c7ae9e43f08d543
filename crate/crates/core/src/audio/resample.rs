use crate::dsp::{bessel_i0, sinc};

use super::Waveform;

/// Kaiser window shape parameter of the interpolation kernel.
pub const KAISER_BETA: f64 = 8.6;
/// Kernel length per polyphase branch.
pub const TAPS_PER_PHASE: usize = 64;

/// Polyphase windowed-sinc resampler for a fixed rational ratio.
///
/// Output sample `n` sits at input position `n * source / target`; the
/// fractional part of that position selects one of `up` precomputed phases.
/// The cutoff is the lower of the two Nyquist frequencies.
#[derive(Debug, Clone)]
pub struct Resampler {
    source_hz: u32,
    target_hz: u32,
    up: u64,
    down: u64,
    table: Vec<f64>,
}

impl Resampler {
    pub fn new(source_hz: u32, target_hz: u32) -> Self {
        assert!(
            source_hz > 0 && target_hz > 0,
            "sample rates must be positive"
        );
        let g = gcd(source_hz as u64, target_hz as u64);
        let up = target_hz as u64 / g;
        let down = source_hz as u64 / g;
        let cutoff = (target_hz as f64 / source_hz as f64).min(1.0);
        let half = (TAPS_PER_PHASE / 2) as f64;
        let norm = bessel_i0(KAISER_BETA);
        let mut table = Vec::with_capacity(up as usize * TAPS_PER_PHASE);
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            let start = table.len();
            for k in 0..TAPS_PER_PHASE {
                // input offset relative to floor(position): -31 ..= 32
                let offset = k as f64 - (half - 1.0);
                let d = frac - offset;
                let x = d / half;
                let w = if x.abs() <= 1.0 {
                    bessel_i0(KAISER_BETA * (1.0 - x * x).sqrt()) / norm
                } else {
                    0.0
                };
                table.push(cutoff * sinc(cutoff * d) * w);
            }
            let sum: f64 = table[start..].iter().sum();
            for t in &mut table[start..] {
                *t /= sum;
            }
        }
        Self {
            source_hz,
            target_hz,
            up,
            down,
            table,
        }
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        let num = input_len as u128 * self.target_hz as u128;
        let den = self.source_hz as u128;
        ((num + den / 2) / den) as usize
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        let out_len = self.output_len(input.len());
        let half = TAPS_PER_PHASE as i64 / 2;
        let n_in = input.len() as i64;
        let mut out = Vec::with_capacity(out_len);
        for n in 0..out_len as u64 {
            let pos = n * self.down;
            let base = (pos / self.up) as i64;
            let phase = (pos % self.up) as usize;
            let taps = &self.table[phase * TAPS_PER_PHASE..(phase + 1) * TAPS_PER_PHASE];
            let first = base - (half - 1);
            let mut acc = 0f64;
            for (k, &h) in taps.iter().enumerate() {
                let j = first + k as i64;
                if j >= 0 && j < n_in {
                    acc += h * input[j as usize] as f64;
                }
            }
            out.push(acc as f32);
        }
        out
    }
}

/// Resamples `w` to `target_hz`. Equal rates return the input unchanged.
pub fn resample(w: &Waveform, target_hz: u32) -> Waveform {
    if w.sample_rate_hz() == target_hz {
        return w.clone();
    }
    let out = Resampler::new(w.sample_rate_hz(), target_hz).process(w.samples());
    Waveform::clipped(out, target_hz)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn sine(freq: f64, rate: u32, len: usize, amp: f64) -> Waveform {
        let s = (0..len)
            .map(|i| {
                (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()) as f32
            })
            .collect();
        Waveform::clipped(s, rate)
    }

    #[test]
    fn identity_when_rates_match() {
        let w = sine(440.0, 16000, 1234, 0.5);
        assert_eq!(resample(&w, 16000), w);
    }

    #[test]
    fn output_length() {
        let w = Waveform::silence(44100, 44100);
        let r = resample(&w, 16000);
        assert!((r.len() as i64 - 16000).abs() <= 1);
        assert_eq!(r.sample_rate_hz(), 16000);
        let odd = Waveform::silence(12345, 44100);
        assert_eq!(
            resample(&odd, 16000).len(),
            (12345.0f64 * 16000.0 / 44100.0).round() as usize
        );
    }

    #[test]
    fn idempotent_at_fixed_rate() {
        let w = sine(700.0, 44100, 5000, 0.3);
        let once = resample(&w, 16000);
        let twice = resample(&once, 16000);
        assert_eq!(once, twice);
    }

    #[test]
    fn dc_is_preserved_in_the_interior() {
        let w = Waveform::clipped(vec![0.25; 4410], 44100);
        let r = resample(&w, 16000);
        for &s in &r.samples()[40..r.len() - 40] {
            assert!((s - 0.25).abs() < 1e-5);
        }
    }

    // DFT oracle: the resampled 1 kHz tone must dominate bin 1 kHz and every
    // other bin outside the main lobe must be at least 40 dB down.
    #[test]
    fn sine_spectrum_is_clean() {
        let w = sine(1000.0, 44100, 44100, 0.5);
        let r = resample(&w, 16000);
        // Skip the edge transients, keep exactly 8000 samples (2 Hz bins).
        let seg = &r.samples()[4000..12000];
        let n = seg.len();
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
                Complex::new(s as f64 * hann, 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mags: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
        let peak_bin = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let bin_hz = 16000.0 / n as f64;
        assert!((peak_bin as f64 * bin_hz - 1000.0).abs() <= bin_hz);
        let peak = mags[peak_bin];
        for (k, &m) in mags.iter().enumerate() {
            if (k as i64 - peak_bin as i64).abs() > 3 {
                assert!(
                    20.0 * (m / peak).log10() <= -40.0,
                    "bin {k} only {} dB down",
                    20.0 * (m / peak).log10()
                );
            }
        }
    }
}
