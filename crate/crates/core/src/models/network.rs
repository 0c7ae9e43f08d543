use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, SAMPLES_PER_FRAME};
use super::ModelError;
use crate::audio::{
    cut_windows, resample, stitch_predictions, Waveform, WindowPlan, MODEL_RATE_HZ,
};
use crate::labels::{FrameLabelSequence, Label};
use crate::nn::{
    dropout, dropout_backward,
    gradcheck::{negative_pattern, Objective, Probe},
    leaky_relu, leaky_relu_backward, softmax_xent, BatchNorm1d, BiLstm, BnCache, Conv1d, Linear,
    LstmCache, Mode, NnError, Param, Parameterized, Scalar, Tensor3,
};

/// conv → batch norm → leaky ReLU → dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    pub conv: Conv1d<T>,
    pub bn: BatchNorm1d<T>,
}

/// Raw-waveform frame classifier: `(B, 1, 16 K)` samples to `(B, 3, K)`
/// logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: ModelConfig,
    pub blocks: Vec<ConvBlock<T>>,
    pub lstm: Option<BiLstm<T>>,
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
}

struct BlockCache<T> {
    input: Tensor3<T>,
    bn: BnCache<T>,
    pre_act: Tensor3<T>,
    mask: Option<Vec<T>>,
}

/// Activations kept by [`Network::forward`] for [`Network::backward`].
pub struct ForwardCache<T> {
    blocks: Vec<BlockCache<T>>,
    lstm: Option<LstmCache<T>>,
    fc1_in: Tensor3<T>,
    fc1_out: Tensor3<T>,
    fc1_mask: Option<Vec<T>>,
    fc2_in: Tensor3<T>,
}

/// Builds a network from a fully validated config; same seed, same weights.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Network<f32>, ModelError> {
    config.validate()?;
    Ok(Network::init(config, &mut ChaCha8Rng::seed_from_u64(seed)))
}

impl<T: Scalar> Network<T> {
    /// Initializes weights; only the structural invariants are assumed.
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let blocks = config
            .conv_specs()
            .into_iter()
            .map(|spec| ConvBlock {
                conv: Conv1d::kaiming(spec, rng),
                bn: BatchNorm1d::new(spec.out_channels),
            })
            .collect();
        let conv_out = config.conv.last().map_or(1, |c| c.channels);
        let lstm = (config.lstm_layers > 0)
            .then(|| BiLstm::uniform(conv_out, config.lstm_hidden, config.lstm_layers, rng));
        Self {
            config: config.clone(),
            blocks,
            lstm,
            fc1: Linear::kaiming(config.head_input(), config.fc_hidden, rng),
            fc2: Linear::kaiming(config.fc_hidden, Label::COUNT, rng),
        }
    }

    /// Structural-only build, for reduced gradient-check clones.
    pub fn init_unchecked(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate_structure()?;
        Ok(Self::init(config, &mut ChaCha8Rng::seed_from_u64(seed)))
    }

    fn slope(&self) -> T {
        T::lit(self.config.leaky_slope)
    }

    fn check_input(&self, x: &Tensor3<T>) -> Result<(), NnError> {
        if x.channels() != 1 || !x.length().is_multiple_of(SAMPLES_PER_FRAME) {
            return Err(NnError::Shape(format!(
                "network input must be (B, 1, multiple of {SAMPLES_PER_FRAME}), got {:?}",
                x.dims()
            )));
        }
        Ok(())
    }

    /// Forward pass keeping activations. In [`Mode::Train`] batch norm uses
    /// batch statistics (updating running moments) and dropout draws masks
    /// from `rng`.
    pub fn forward(
        &mut self,
        x: &Tensor3<T>,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<(Tensor3<T>, ForwardCache<T>), NnError> {
        self.check_input(x)?;
        let slope = self.slope();
        let p = self.config.dropout;
        let mut h = x.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let z = block.conv.forward(&h)?;
            let (n, bn) = block.bn.forward(&z, mode)?;
            let (d, mask) = dropout(&leaky_relu(&n, slope), p, rng, mode);
            blocks.push(BlockCache {
                input: std::mem::replace(&mut h, d),
                bn,
                pre_act: n,
                mask,
            });
        }
        let mut lstm_cache = None;
        if let Some(lstm) = &self.lstm {
            let (y, c) = lstm.forward(&h)?;
            h = y;
            lstm_cache = Some(c);
        }
        let u = self.fc1.forward(&h)?;
        let (d, fc1_mask) = dropout(&leaky_relu(&u, slope), p, rng, mode);
        let logits = self.fc2.forward(&d)?;
        Ok((
            logits,
            ForwardCache {
                blocks,
                lstm: lstm_cache,
                fc1_in: h,
                fc1_out: u,
                fc1_mask,
                fc2_in: d,
            },
        ))
    }

    /// Accumulates parameter gradients for `dlogits`.
    pub fn backward(
        &mut self,
        cache: &ForwardCache<T>,
        dlogits: &Tensor3<T>,
    ) -> Result<(), NnError> {
        let slope = self.slope();
        let dd = self.fc2.backward(&cache.fc2_in, dlogits)?;
        let du = leaky_relu_backward(
            &cache.fc1_out,
            &dropout_backward(&dd, cache.fc1_mask.as_deref()),
            slope,
        );
        let mut dh = self.fc1.backward(&cache.fc1_in, &du)?;
        if let (Some(lstm), Some(c)) = (self.lstm.as_mut(), cache.lstm.as_ref()) {
            dh = lstm.backward(c, &dh)?;
        }
        for (i, (block, c)) in self.blocks.iter_mut().zip(&cache.blocks).enumerate().rev() {
            let dn =
                leaky_relu_backward(&c.pre_act, &dropout_backward(&dh, c.mask.as_deref()), slope);
            let dz = block.bn.backward(&c.bn, &dn)?;
            match block.conv.backward(&c.input, &dz, i > 0)? {
                Some(dx) => dh = dx,
                None => break,
            }
        }
        Ok(())
    }

    /// Sets every batch-norm running moment to the batch statistics that
    /// layer sees for `x`, the state of a converged network on its data.
    pub fn calibrate_batch_norm(&mut self, x: &Tensor3<T>) -> Result<(), NnError> {
        self.check_input(x)?;
        let slope = self.slope();
        let mut h = x.clone();
        for block in &mut self.blocks {
            let z = block.conv.forward(&h)?;
            let (batch, channels, len) = z.dims();
            let n = T::lit((batch * len) as f64);
            for c in 0..channels {
                let values = || {
                    (0..batch)
                        .flat_map(move |b| (0..len).map(move |l| (b, l)))
                        .map(|(b, l)| z.at(b, c, l))
                };
                let mean = values().fold(T::zero(), |a, v| a + v) / n;
                let var = values().fold(T::zero(), |a, v| a + (v - mean) * (v - mean)) / n;
                block.bn.running_mean[c] = mean;
                block.bn.running_var[c] = var;
            }
            h = leaky_relu(&block.bn.infer(&z)?, slope);
        }
        Ok(())
    }

    /// Eval-mode logits without caches.
    pub fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        self.check_input(x)?;
        let slope = self.slope();
        let mut h = x.clone();
        for block in &self.blocks {
            h = leaky_relu(&block.bn.infer(&block.conv.forward(&h)?)?, slope);
        }
        if let Some(lstm) = &self.lstm {
            h = lstm.forward(&h)?.0;
        }
        self.fc2.forward(&leaky_relu(&self.fc1.forward(&h)?, slope))
    }

    /// Labels and posteriors for one 16 kHz window: `floor(samples / 16)`
    /// frames. Inputs shorter than the conv receptive field are zero-padded
    /// and flagged.
    pub fn predict_window(&self, w: &Waveform) -> Result<FrameLabelSequence, ModelError> {
        if w.sample_rate_hz() != MODEL_RATE_HZ {
            return Err(ModelError::Data(format!(
                "window must be {MODEL_RATE_HZ} Hz, got {}",
                w.sample_rate_hz()
            )));
        }
        let frames = w.len() / SAMPLES_PER_FRAME;
        if frames == 0 {
            return Ok(FrameLabelSequence::default());
        }
        let used = frames * SAMPLES_PER_FRAME;
        let rf = self.config.receptive_field();
        let padded = used < rf;
        let len = if padded {
            rf.div_ceil(SAMPLES_PER_FRAME) * SAMPLES_PER_FRAME
        } else {
            used
        };
        let mut samples: Vec<T> = w.samples()[..used]
            .iter()
            .map(|&s| T::lit(s as f64))
            .collect();
        samples.resize(len, T::zero());
        let logits = self.infer(&Tensor3::from_vec(samples, (1, 1, len))?)?;
        let mut labels = Vec::with_capacity(frames);
        let mut probabilities = Vec::with_capacity(frames);
        for t in 0..frames {
            let z = [logits.at(0, 0, t), logits.at(0, 1, t), logits.at(0, 2, t)];
            let mut best = 0;
            for c in 1..Label::COUNT {
                if z[c] > z[best] {
                    best = c;
                }
            }
            labels.push(Label::from_index(best).expect("three classes"));
            let p = crate::nn::softmax(&z);
            probabilities.push([
                p[0].as_f64() as f32,
                p[1].as_f64() as f32,
                p[2].as_f64() as f32,
            ]);
        }
        Ok(FrameLabelSequence {
            labels,
            probabilities: Some(probabilities),
            padded,
        })
    }

    /// Whole-file prediction: resample to 16 kHz, cut windows, classify each
    /// and stitch. Output has exactly `duration_ms` frames.
    pub fn predict_file(
        &self,
        w: &Waveform,
        plan: &WindowPlan,
    ) -> Result<FrameLabelSequence, ModelError> {
        if w.is_empty() {
            return Ok(FrameLabelSequence::default());
        }
        let total_ms = w.duration_ms();
        let mut samples = resample(w, MODEL_RATE_HZ).into_samples();
        samples.resize(total_ms * SAMPLES_PER_FRAME, 0.0);
        let w16 = Waveform::clipped(samples, MODEL_RATE_HZ);
        let windows = cut_windows(&w16, plan)
            .into_iter()
            .map(|(start, win)| Ok((start, self.predict_window(&win)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(stitch_predictions(&windows, total_ms)?)
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| ConvBlock {
                    conv: b.conv.cast(),
                    bn: b.bn.cast(),
                })
                .collect(),
            lstm: self.lstm.as_ref().map(|l| l.cast()),
            fc1: self.fc1.cast(),
            fc2: self.fc2.cast(),
        }
    }

    /// Batch-norm running moments, in a fixed order.
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&str, &mut Vec<T>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            f(&format!("block{i}.bn.running_mean"), &mut b.bn.running_mean);
            f(&format!("block{i}.bn.running_var"), &mut b.bn.running_var);
        }
    }
}

impl<T: Scalar> Parameterized<T> for Network<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.conv
                .visit_params(&mut |n, p| f(&format!("block{i}.conv.{n}"), p));
            b.bn.visit_params(&mut |n, p| f(&format!("block{i}.bn.{n}"), p));
        }
        if let Some(lstm) = &mut self.lstm {
            lstm.visit_params(&mut |n, p| f(&format!("lstm.{n}"), p));
        }
        self.fc1.visit_params(&mut |n, p| f(&format!("fc1.{n}"), p));
        self.fc2.visit_params(&mut |n, p| f(&format!("fc2.{n}"), p));
    }
}

/// Whole-network cross-entropy on a fixed batch, in eval mode (running
/// batch-norm moments, no dropout), for gradient checking.
pub struct NetworkObjective {
    pub net: Network<f64>,
    pub input: Tensor3<f64>,
    pub targets: Vec<u8>,
    pub class_weights: Option<[f64; 3]>,
}

impl NetworkObjective {
    /// Random input of `frames` frames and random targets, with batch norm
    /// calibrated on that input.
    pub fn random(mut net: Network<f64>, batch: usize, frames: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = batch * frames * SAMPLES_PER_FRAME;
        let input = Tensor3::from_vec(
            (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            (batch, 1, n / batch),
        )
        .expect("consistent dims");
        let targets = (0..batch * frames).map(|_| rng.gen_range(0..3)).collect();
        net.calibrate_batch_norm(&input)
            .expect("input built for this network");
        Self {
            net,
            input,
            targets,
            class_weights: None,
        }
    }

    fn xent(&self, logits: &Tensor3<f64>) -> crate::nn::XentOutput<f64> {
        softmax_xent(
            logits,
            &self.targets,
            self.class_weights.as_ref().map(|w| &w[..]),
        )
        .expect("targets match frames")
    }
}

impl Parameterized<f64> for NetworkObjective {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
        self.net.visit_params(f);
    }
}

impl Objective for NetworkObjective {
    fn probe(&mut self) -> Probe {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (logits, cache) = self
            .net
            .forward(&self.input, Mode::Eval, &mut rng)
            .expect("valid input");
        let mut negative = Vec::new();
        for b in &cache.blocks {
            negative_pattern(&b.pre_act, &mut negative);
        }
        negative_pattern(&cache.fc1_out, &mut negative);
        Probe {
            terms: self.xent(&logits).terms,
            negative,
        }
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.zero_grads();
        // Eval mode draws nothing from the rng.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (logits, cache) = self
            .net
            .forward(&self.input, Mode::Eval, &mut rng)
            .expect("valid input");
        let out = self.xent(&logits);
        self.net
            .backward(&cache, &out.grad)
            .expect("shapes from forward");
        out.loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::config::Architecture;
    use crate::nn::{grad_check, Coverage};

    fn tone(len: usize) -> Waveform {
        Waveform::clipped(
            (0..len)
                .map(|i| (0.3 * (i as f64 * 0.05).sin()) as f32)
                .collect(),
            MODEL_RATE_HZ,
        )
    }

    #[test]
    fn one_second_gives_thousand_frames() {
        let net = build_model(&ModelConfig::default_for(Architecture::Lstm), 1).unwrap();
        let out = net.predict_window(&tone(16000)).unwrap();
        assert_eq!(out.len(), 1000);
        assert!(!out.padded);
        for p in out.probabilities.as_ref().unwrap() {
            assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn frame_count_is_floor_of_samples_over_16() {
        let net = build_model(&ModelConfig::compact_for(Architecture::Cnn), 1).unwrap();
        assert_eq!(net.predict_window(&tone(8000)).unwrap().len(), 500);
        assert_eq!(net.predict_window(&tone(8015)).unwrap().len(), 500);
        let short = net.predict_window(&tone(320)).unwrap();
        assert_eq!(short.len(), 20);
        assert!(
            short.padded,
            "receptive field {}",
            net.config.receptive_field()
        );
        assert!(net.predict_window(&tone(15)).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = ModelConfig::compact_for(Architecture::Lstm);
        assert_eq!(build_model(&cfg, 4).unwrap(), build_model(&cfg, 4).unwrap());
        assert_ne!(build_model(&cfg, 4).unwrap(), build_model(&cfg, 5).unwrap());
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = ModelConfig::default_for(Architecture::Cnn);
        cfg.conv.pop();
        assert!(matches!(build_model(&cfg, 0), Err(ModelError::Config(_))));
    }

    #[test]
    fn inference_is_deterministic() {
        let net = build_model(&ModelConfig::compact_for(Architecture::Lstm), 2).unwrap();
        let w = tone(12000);
        assert_eq!(
            net.predict_window(&w).unwrap(),
            net.predict_window(&w).unwrap()
        );
    }

    #[test]
    fn eval_forward_matches_infer() {
        let mut net: Network<f64> = build_model(&ModelConfig::compact_for(Architecture::Lstm), 3)
            .unwrap()
            .cast();
        let obj = NetworkObjective::random(net.clone(), 2, 20, 1);
        let a = net.infer(&obj.input).unwrap();
        let (b, _) = net
            .forward(&obj.input, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn one_second_file_matches_single_window() {
        let net = build_model(&ModelConfig::compact_for(Architecture::Lstm), 3).unwrap();
        let w = tone(16000);
        assert_eq!(
            net.predict_file(&w, &WindowPlan::default()).unwrap(),
            net.predict_window(&w).unwrap()
        );
        let long = net
            .predict_file(&tone(40000), &WindowPlan::default())
            .unwrap();
        assert_eq!(long.len(), 2500);
        assert!(net
            .predict_file(&tone(0), &WindowPlan::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn predict_file_resamples() {
        let net = build_model(&ModelConfig::compact_for(Architecture::Cnn), 3).unwrap();
        let w = Waveform::clipped(vec![0.01; 22050], 44100);
        assert_eq!(
            net.predict_file(&w, &WindowPlan::default()).unwrap().len(),
            500
        );
    }

    #[test]
    fn tiny_clones_pass_grad_check() {
        for arch in [Architecture::Lstm, Architecture::Cnn] {
            let cfg = ModelConfig::default_for(arch).tiny_clone();
            let net = Network::<f64>::init_unchecked(&cfg, 11).unwrap();
            let mut obj = NetworkObjective::random(net, 2, 4, 12);
            let r = grad_check(&mut obj, Coverage::All);
            assert!(r.max_rel_error < 1e-4, "{arch}: {r:?}");
        }
    }

    #[test]
    fn calibrated_batch_norm_standardizes_its_input() {
        let net = Network::<f64>::init_unchecked(
            &ModelConfig::default_for(Architecture::Lstm).tiny_clone(),
            3,
        )
        .unwrap();
        let obj = NetworkObjective::random(net, 2, 8, 4);
        let z = obj.net.blocks[0].conv.forward(&obj.input).unwrap();
        let y = obj.net.blocks[0].bn.infer(&z).unwrap();
        let (b, c, l) = y.dims();
        for ch in 0..c {
            let v: Vec<f64> = (0..b)
                .flat_map(|i| (0..l).map(move |t| (i, t)))
                .map(|(i, t)| y.at(i, ch, t))
                .collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            assert!(
                mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-3,
                "{mean} {var}"
            );
        }
    }

    #[test]
    fn train_mode_gradients_flow_to_every_tensor() {
        let mut net: Network<f32> =
            build_model(&ModelConfig::compact_for(Architecture::Lstm), 1).unwrap();
        let obj = NetworkObjective::random(net.cast(), 2, 10, 1);
        let x: Tensor3<f32> = obj.input.cast();
        let (logits, cache) = net
            .forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let out = softmax_xent(&logits, &obj.targets, None).unwrap();
        net.backward(&cache, &out.grad).unwrap();
        net.visit_params(&mut |name, p| {
            let norm: f32 = p.grad.iter().map(|g| g * g).sum();
            // conv biases feed straight into batch norm and get zero gradient
            if !name.ends_with("conv.bias") {
                assert!(norm > 0.0, "{name}");
            }
        });
    }
}
