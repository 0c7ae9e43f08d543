//! Shared fixtures for the criterion benchmarks.

use ddkseg_core::labels::Label;
use ddkseg_core::nn::Tensor3;
use ddkseg_core::synth::{generate_trial, TrialSpec};
use ddkseg_core::Waveform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform noise tensor in `[-1, 1)`.
pub fn random_tensor(dims: (usize, usize, usize), seed: u64) -> Tensor3<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dims.0 * dims.1 * dims.2)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Tensor3::from_vec(data, dims).expect("length matches dims")
}

/// Frame labels of a synthetic trial with label noise sprinkled in, so
/// post-processing has work to do.
pub fn noisy_frames(seed: u64) -> Vec<Label> {
    let trial = generate_trial(&TrialSpec {
        seed,
        ..TrialSpec::default()
    })
    .expect("default spec is valid");
    let mut frames = trial.segments.rasterize(trial.waveform.duration_ms());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in frames.iter_mut() {
        if rng.gen_bool(0.02) {
            *f = Label::ALL[rng.gen_range(0..3)];
        }
    }
    frames
}

/// A synthetic trial at 16 kHz.
pub fn trial_waveform(seed: u64) -> Waveform {
    generate_trial(&TrialSpec {
        seed,
        ..TrialSpec::default()
    })
    .expect("default spec is valid")
    .waveform
}
