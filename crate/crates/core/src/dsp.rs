//! Small FIR-design helpers shared by the resampler, augmentations and the
//! synthetic generator.

use std::f64::consts::PI;

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window evaluated at `x ∈ [-1, 1]` (0 outside).
pub fn kaiser(x: f64, beta: f64) -> f64 {
    if x.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - x * x).sqrt()) / bessel_i0(beta)
}

/// Kaiser's empirical beta for a target stop-band attenuation in dB.
pub fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db >= 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Windowed-sinc low-pass with cutoff `fc` as a fraction of the sample rate
/// (0 < fc < 0.5). `taps` must be odd.
pub fn lowpass_taps(fc: f64, taps: usize, beta: f64) -> Vec<f64> {
    assert!(taps % 2 == 1, "linear-phase design needs an odd tap count");
    let mid = (taps / 2) as f64;
    (0..taps)
        .map(|n| {
            let d = n as f64 - mid;
            2.0 * fc * sinc(2.0 * fc * d) * kaiser(d / mid, beta)
        })
        .collect()
}

/// Band-stop by spectral inversion of a windowed band-pass: `δ − (lp(high) − lp(low))`.
pub fn bandstop_taps(low: f64, high: f64, taps: usize, beta: f64) -> Vec<f64> {
    let lo = lowpass_taps(low, taps, beta);
    let hi = lowpass_taps(high, taps, beta);
    let mid = taps / 2;
    (0..taps)
        .map(|n| {
            let delta = if n == mid { 1.0 } else { 0.0 };
            delta - (hi[n] - lo[n])
        })
        .collect()
}

/// Linear-phase FIR applied with its group delay removed, so the output is
/// time-aligned with the input and has the same length. Samples outside the
/// signal are treated as zero.
pub fn filter_same(signal: &[f32], taps: &[f64]) -> Vec<f32> {
    let n = signal.len();
    let half = (taps.len() / 2) as isize;
    let mut out = vec![0f32; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0f64;
        for (k, &h) in taps.iter().enumerate() {
            let j = i as isize + half - k as isize;
            if j >= 0 && (j as usize) < n {
                acc += h * signal[j as usize] as f64;
            }
        }
        *o = acc as f32;
    }
    out
}

/// Magnitude response of `taps` at normalized frequency `f` (cycles/sample).
pub fn magnitude_response(taps: &[f64], f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &h) in taps.iter().enumerate() {
        let w = 2.0 * PI * f * n as f64;
        re += h * w.cos();
        im -= h * w.sin();
    }
    (re * re + im * im).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_known_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(8.6) - 750.461_159_563_166).abs() / 750.46 < 1e-12);
    }

    #[test]
    fn lowpass_has_unit_dc_gain() {
        let h = lowpass_taps(0.1, 101, kaiser_beta(60.0));
        let dc: f64 = h.iter().sum();
        assert!((dc - 1.0).abs() < 1e-3);
        assert!(magnitude_response(&h, 0.3) < 1e-3);
    }

    #[test]
    fn filter_same_identity() {
        let mut taps = vec![0.0; 7];
        taps[3] = 1.0;
        let x = [0.1f32, -0.2, 0.3, 0.4];
        assert_eq!(filter_same(&x, &taps), x.to_vec());
    }
}
