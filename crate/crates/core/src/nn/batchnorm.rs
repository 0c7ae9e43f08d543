use super::{Mode, NnError, Param, Parameterized, Scalar, Tensor3};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel normalization over the batch and length axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    normalized: Tensor3<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm1d<T> {
    /// Scale 1, shift 0, running moments (0, 1).
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::filled(&[channels], T::one()),
            beta: Param::zeros(&[channels]),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::lit(BN_MOMENTUM),
            eps: T::lit(BN_EPS),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Train mode normalizes with batch statistics and updates the running
    /// moments (running variance uses the unbiased estimate); eval mode uses
    /// the running moments.
    pub fn forward(
        &mut self,
        x: &Tensor3<T>,
        mode: Mode,
    ) -> Result<(Tensor3<T>, BnCache<T>), NnError> {
        let (batch, channels, len) = x.dims();
        if channels != self.channels() {
            return Err(NnError::Shape(format!(
                "batchnorm expects {} channels, got {channels}",
                self.channels()
            )));
        }
        let count = batch * len;
        let mut normalized = Tensor3::zeros(batch, channels, len);
        let mut inv_std = vec![T::zero(); channels];
        let mut y = Tensor3::zeros(batch, channels, len);
        #[allow(clippy::needless_range_loop)]
        for c in 0..channels {
            let (mean, istd) = match mode {
                Mode::Train => {
                    let n = T::lit(count.max(1) as f64);
                    let mut sum = T::zero();
                    for b in 0..batch {
                        sum += x.item(b)[c * len..(c + 1) * len].iter().copied().sum::<T>();
                    }
                    let mean = sum / n;
                    let mut sq = T::zero();
                    for b in 0..batch {
                        for &v in &x.item(b)[c * len..(c + 1) * len] {
                            sq += (v - mean) * (v - mean);
                        }
                    }
                    let var = sq / n;
                    let m = self.momentum;
                    let unbiased = if count > 1 {
                        sq / T::lit((count - 1) as f64)
                    } else {
                        var
                    };
                    self.running_mean[c] = (T::one() - m) * self.running_mean[c] + m * mean;
                    self.running_var[c] = (T::one() - m) * self.running_var[c] + m * unbiased;
                    (mean, T::one() / (var + self.eps).sqrt())
                }
                Mode::Eval => (
                    self.running_mean[c],
                    T::one() / (self.running_var[c] + self.eps).sqrt(),
                ),
            };
            inv_std[c] = istd;
            let (g, sh) = (self.gamma.value[c], self.beta.value[c]);
            for b in 0..batch {
                let src = &x.item(b)[c * len..(c + 1) * len];
                let dst = &mut normalized.item_mut(b)[c * len..(c + 1) * len];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = (v - mean) * istd;
                }
                let out = &mut y.item_mut(b)[c * len..(c + 1) * len];
                for (o, &h) in out
                    .iter_mut()
                    .zip(&normalized.item(b)[c * len..(c + 1) * len])
                {
                    *o = g * h + sh;
                }
            }
        }
        Ok((
            y,
            BnCache {
                normalized,
                inv_std,
                mode,
            },
        ))
    }

    /// Eval-mode forward without a cache.
    pub fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let (batch, channels, len) = x.dims();
        if channels != self.channels() {
            return Err(NnError::Shape(format!(
                "batchnorm expects {} channels, got {channels}",
                self.channels()
            )));
        }
        let mut y = x.clone();
        for c in 0..channels {
            let istd = T::one() / (self.running_var[c] + self.eps).sqrt();
            let scale = self.gamma.value[c] * istd;
            let shift = self.beta.value[c] - self.running_mean[c] * scale;
            for b in 0..batch {
                for v in &mut y.item_mut(b)[c * len..(c + 1) * len] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, cache: &BnCache<T>, dy: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let (batch, channels, len) = dy.dims();
        if cache.normalized.dims() != dy.dims() {
            return Err(NnError::Shape(format!(
                "batchnorm grad dims {:?} vs cache {:?}",
                dy.dims(),
                cache.normalized.dims()
            )));
        }
        let n = T::lit((batch * len).max(1) as f64);
        let mut dx = Tensor3::zeros(batch, channels, len);
        for c in 0..channels {
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for b in 0..batch {
                let dyr = &dy.item(b)[c * len..(c + 1) * len];
                let xh = &cache.normalized.item(b)[c * len..(c + 1) * len];
                for (&d, &h) in dyr.iter().zip(xh) {
                    sum_dy += d;
                    sum_dy_xhat += d * h;
                }
            }
            self.gamma.grad[c] += sum_dy_xhat;
            self.beta.grad[c] += sum_dy;
            let g = self.gamma.value[c];
            let istd = cache.inv_std[c];
            for b in 0..batch {
                let dyr = &dy.item(b)[c * len..(c + 1) * len];
                let xh = &cache.normalized.item(b)[c * len..(c + 1) * len];
                let dxr = &mut dx.item_mut(b)[c * len..(c + 1) * len];
                match cache.mode {
                    Mode::Train => {
                        let scale = g * istd / n;
                        for ((o, &d), &h) in dxr.iter_mut().zip(dyr).zip(xh) {
                            *o = scale * (n * d - sum_dy - h * sum_dy_xhat);
                        }
                    }
                    Mode::Eval => {
                        for (o, &d) in dxr.iter_mut().zip(dyr) {
                            *o = g * istd * d;
                        }
                    }
                }
            }
        }
        Ok(dx)
    }

    pub fn cast<U: Scalar>(&self) -> BatchNorm1d<U> {
        BatchNorm1d {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self
                .running_mean
                .iter()
                .map(|v| U::lit(v.as_f64()))
                .collect(),
            running_var: self
                .running_var
                .iter()
                .map(|v| U::lit(v.as_f64()))
                .collect(),
            momentum: U::lit(self.momentum.as_f64()),
            eps: U::lit(self.eps.as_f64()),
        }
    }
}

impl<T: Scalar> Parameterized<T> for BatchNorm1d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("gamma", &mut self.gamma);
        f("beta", &mut self.beta);
    }
}
