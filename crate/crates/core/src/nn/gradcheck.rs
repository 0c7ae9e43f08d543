//! Central finite-difference verification of the analytic backward passes.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    dropout, dropout_backward, leaky_relu, leaky_relu_backward, softmax_xent, BatchNorm1d, BiLstm,
    Conv1d, Linear, Mode, Param, Parameterized, Tensor3, XentOutput,
};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Smallest step tried when a probe straddles an activation kink.
pub const MIN_FD_STEP: f64 = 1e-8;

/// One forward evaluation of an objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    /// Per-frame terms whose sum is the loss.
    pub terms: Vec<f64>,
    /// Which inputs of piecewise-linear activations are negative. The loss
    /// is smooth in the parameters while this pattern stays fixed.
    pub negative: Vec<bool>,
}

impl Probe {
    pub fn smooth(terms: Vec<f64>) -> Self {
        Self {
            terms,
            negative: Vec::new(),
        }
    }
}

/// Marks the negative entries of a leaky-ReLU input.
pub fn negative_pattern(pre_activation: &Tensor3<f64>, out: &mut Vec<bool>) {
    out.extend(pre_activation.data().iter().map(|&v| v < 0.0));
}

/// A scalar loss of `f64` parameters with an analytic gradient.
pub trait Objective: Parameterized<f64> {
    /// Forward pass only.
    fn probe(&mut self) -> Probe;
    /// Zeroes gradients, runs forward and backward, returns the loss.
    fn loss_and_grad(&mut self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coverage {
    /// Every coordinate of every parameter tensor.
    All,
    /// A seeded random subset of coordinates from each tensor.
    Sampled { per_tensor: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |a − n| / max(|a|, |n|, 1e-8)` over checked coordinates.
    pub max_rel_error: f64,
    /// `(tensor, index, analytic, numeric)` at the maximum.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
    /// Coordinates whose `±FD_STEP` probe crossed an activation kink and
    /// were checked with a smaller step.
    pub reduced_step: usize,
    /// Coordinates still crossing a kink at [`MIN_FD_STEP`]; not checked.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn set_coord(obj: &mut impl Objective, tensor: usize, index: usize, value: f64) -> f64 {
    let mut i = 0;
    let mut old = 0.0;
    obj.visit_params(&mut |_, p| {
        if i == tensor {
            old = p.value[index];
            p.value[index] = value;
        }
        i += 1;
    });
    old
}

/// Compares analytic gradients with central differences of step
/// [`FD_STEP`]. A central difference is only meaningful where the loss is
/// differentiable, so when the two probes see different leaky-ReLU sign
/// patterns the step is divided by ten until they agree.
pub fn grad_check(obj: &mut impl Objective, coverage: Coverage) -> GradCheckReport {
    grad_check_where(obj, coverage, |_| true)
}

/// [`grad_check`] restricted to the parameter tensors accepted by `include`.
pub fn grad_check_where(
    obj: &mut impl Objective,
    coverage: Coverage,
    include: impl Fn(&str) -> bool,
) -> GradCheckReport {
    obj.loss_and_grad();
    let mut tensors: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    obj.visit_params(&mut |name, p: &mut Param<f64>| {
        tensors.push((name.to_string(), p.value.clone(), p.grad.clone()))
    });
    let mut rng = match coverage {
        Coverage::Sampled { seed, .. } => ChaCha8Rng::seed_from_u64(seed),
        Coverage::All => ChaCha8Rng::seed_from_u64(0),
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        reduced_step: 0,
        skipped: 0,
    };
    for (ti, (name, values, grads)) in tensors.iter().enumerate() {
        if !include(name) {
            continue;
        }
        let indices: Vec<usize> = match coverage {
            Coverage::All => (0..values.len()).collect(),
            Coverage::Sampled { per_tensor, .. } => {
                let mut v = sample(&mut rng, values.len(), per_tensor.min(values.len())).into_vec();
                v.sort_unstable();
                v
            }
        };
        for idx in indices {
            let x0 = values[idx];
            let mut h = FD_STEP;
            let numeric = loop {
                set_coord(obj, ti, idx, x0 + h);
                let plus = obj.probe();
                set_coord(obj, ti, idx, x0 - h);
                let minus = obj.probe();
                set_coord(obj, ti, idx, x0);
                if plus.negative == minus.negative {
                    // Differencing term by term keeps the rounding of the
                    // (much larger) total out of the numerator.
                    let diff: f64 = plus
                        .terms
                        .iter()
                        .zip(&minus.terms)
                        .map(|(p, m)| p - m)
                        .sum();
                    break Some(diff / (2.0 * h));
                }
                h /= 10.0;
                if h < MIN_FD_STEP * 0.5 {
                    break None;
                }
            };
            let Some(numeric) = numeric else {
                report.skipped += 1;
                continue;
            };
            if h < FD_STEP {
                report.reduced_step += 1;
            }
            let err = relative_error(grads[idx], numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), idx, grads[idx], numeric));
            }
        }
    }
    report
}

/// A per-frame linear classifier on fixed inputs.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    pub layer: Linear<f64>,
    pub input: Tensor3<f64>,
    pub targets: Vec<u8>,
}

impl Parameterized<f64> for LinearObjective {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
        self.layer.visit_params(f);
    }
}

impl Objective for LinearObjective {
    fn probe(&mut self) -> Probe {
        let y = self
            .layer
            .forward(&self.input)
            .expect("shapes fixed at construction");
        Probe::smooth(
            softmax_xent(&y, &self.targets, None)
                .expect("valid targets")
                .terms,
        )
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.zero_grads();
        let y = self
            .layer
            .forward(&self.input)
            .expect("shapes fixed at construction");
        let out = softmax_xent(&y, &self.targets, None).expect("valid targets");
        self.layer
            .backward(&self.input, &out.grad)
            .expect("shapes fixed at construction");
        out.loss
    }
}

/// conv → batchnorm → leaky ReLU → (optional dropout with a fixed mask) →
/// linear head → cross-entropy.
#[derive(Debug, Clone)]
pub struct ConvBlockObjective {
    pub conv: Conv1d<f64>,
    pub bn: BatchNorm1d<f64>,
    pub bn_mode: Mode,
    pub slope: f64,
    /// `(p, seed)`; the mask is regenerated from the same seed on every
    /// evaluation so the objective stays a deterministic function.
    pub dropout: Option<(f64, u64)>,
    pub head: Linear<f64>,
    pub input: Tensor3<f64>,
    pub targets: Vec<u8>,
}

impl Parameterized<f64> for ConvBlockObjective {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
        self.conv
            .visit_params(&mut |n, p| f(&format!("conv.{n}"), p));
        self.bn.visit_params(&mut |n, p| f(&format!("bn.{n}"), p));
        self.head
            .visit_params(&mut |n, p| f(&format!("head.{n}"), p));
    }
}

impl ConvBlockObjective {
    fn run(&mut self, backward: bool) -> (XentOutput<f64>, Tensor3<f64>) {
        // Batch statistics must not drift between finite-difference probes.
        let saved = (self.bn.running_mean.clone(), self.bn.running_var.clone());
        let z = self.conv.forward(&self.input).expect("shapes");
        let (n, cache) = self.bn.forward(&z, self.bn_mode).expect("shapes");
        self.bn.running_mean = saved.0;
        self.bn.running_var = saved.1;
        let a = leaky_relu(&n, self.slope);
        let (d, mask) = match self.dropout {
            Some((p, seed)) => dropout(&a, p, &mut ChaCha8Rng::seed_from_u64(seed), Mode::Train),
            None => (a, None),
        };
        let y = self.head.forward(&d).expect("shapes");
        let out = softmax_xent(&y, &self.targets, None).expect("valid targets");
        if backward {
            let dd = self.head.backward(&d, &out.grad).expect("shapes");
            let da = dropout_backward(&dd, mask.as_deref());
            let dn = leaky_relu_backward(&n, &da, self.slope);
            let dz = self.bn.backward(&cache, &dn).expect("shapes");
            self.conv.backward(&self.input, &dz, false).expect("shapes");
        }
        (out, n)
    }
}

impl Objective for ConvBlockObjective {
    fn probe(&mut self) -> Probe {
        let (out, n) = self.run(false);
        let mut negative = Vec::new();
        negative_pattern(&n, &mut negative);
        Probe {
            terms: out.terms,
            negative,
        }
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.zero_grads();
        self.run(true).0.loss
    }
}

/// Bidirectional LSTM stack with a linear head.
#[derive(Debug, Clone)]
pub struct BiLstmObjective {
    pub lstm: BiLstm<f64>,
    pub head: Linear<f64>,
    pub input: Tensor3<f64>,
    pub targets: Vec<u8>,
}

impl Parameterized<f64> for BiLstmObjective {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
        self.lstm
            .visit_params(&mut |n, p| f(&format!("lstm.{n}"), p));
        self.head
            .visit_params(&mut |n, p| f(&format!("head.{n}"), p));
    }
}

impl Objective for BiLstmObjective {
    fn probe(&mut self) -> Probe {
        let (h, _) = self.lstm.forward(&self.input).expect("shapes");
        let y = self.head.forward(&h).expect("shapes");
        Probe::smooth(
            softmax_xent(&y, &self.targets, None)
                .expect("valid targets")
                .terms,
        )
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.zero_grads();
        let (h, cache) = self.lstm.forward(&self.input).expect("shapes");
        let y = self.head.forward(&h).expect("shapes");
        let out = softmax_xent(&y, &self.targets, None).expect("valid targets");
        let dh = self.head.backward(&h, &out.grad).expect("shapes");
        self.lstm.backward(&cache, &dh).expect("shapes");
        out.loss
    }
}
