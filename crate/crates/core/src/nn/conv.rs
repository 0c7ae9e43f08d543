use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gemm, NnError, Param, Parameterized, Scalar, Tensor3};

/// Hyperparameters of one 1D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    #[serde(default = "one")]
    pub dilation: usize,
}

fn one() -> usize {
    1
}

impl ConvSpec {
    /// Padding that maps a length divisible by `stride` to exactly
    /// `length / stride` outputs.
    pub fn same_padding(kernel: usize, stride: usize, dilation: usize) -> usize {
        let span = dilation * (kernel - 1) + 1;
        span.saturating_sub(stride).div_ceil(2)
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        let span = self.dilation * (self.kernel - 1) + 1;
        let padded = in_len + 2 * self.padding;
        if padded < span {
            0
        } else {
            (padded - span) / self.stride + 1
        }
    }
}

/// Cross-correlation `y[o, t] = b[o] + Σ_{i,k} w[o, i, k] · x[i, t·stride + k·dilation − padding]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub spec: ConvSpec,
    /// `(out, in, kernel)`
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn zeros(spec: ConvSpec) -> Self {
        Self {
            spec,
            weight: Param::zeros(&[spec.out_channels, spec.in_channels, spec.kernel]),
            bias: Param::zeros(&[spec.out_channels]),
        }
    }

    /// Kaiming-uniform weights (`±sqrt(6 / fan_in)`), zero bias.
    pub fn kaiming(spec: ConvSpec, rng: &mut impl Rng) -> Self {
        let fan_in = (spec.in_channels * spec.kernel) as f64;
        Self {
            spec,
            weight: Param::uniform(
                &[spec.out_channels, spec.in_channels, spec.kernel],
                (6.0 / fan_in).sqrt(),
                rng,
            ),
            bias: Param::zeros(&[spec.out_channels]),
        }
    }

    fn check(&self, x: &Tensor3<T>) -> Result<(), NnError> {
        if x.channels() != self.spec.in_channels {
            return Err(NnError::Shape(format!(
                "conv expects {} input channels, got {}",
                self.spec.in_channels,
                x.channels()
            )));
        }
        if self.spec.stride == 0 || self.spec.kernel == 0 || self.spec.dilation == 0 {
            return Err(NnError::Shape(
                "conv stride, kernel and dilation must be positive".into(),
            ));
        }
        Ok(())
    }

    fn im2col(&self, x: &[T], in_len: usize, out_len: usize, cols: &mut [T]) {
        let s = &self.spec;
        for ci in 0..s.in_channels {
            let xrow = &x[ci * in_len..(ci + 1) * in_len];
            for k in 0..s.kernel {
                let row =
                    &mut cols[(ci * s.kernel + k) * out_len..(ci * s.kernel + k + 1) * out_len];
                let offset = (k * s.dilation) as isize - s.padding as isize;
                for (t, c) in row.iter_mut().enumerate() {
                    let j = (t * s.stride) as isize + offset;
                    *c = if j >= 0 && (j as usize) < in_len {
                        xrow[j as usize]
                    } else {
                        T::zero()
                    };
                }
            }
        }
    }

    fn col2im(&self, cols: &[T], in_len: usize, out_len: usize, dx: &mut [T]) {
        let s = &self.spec;
        for ci in 0..s.in_channels {
            let xrow = &mut dx[ci * in_len..(ci + 1) * in_len];
            for k in 0..s.kernel {
                let row = &cols[(ci * s.kernel + k) * out_len..(ci * s.kernel + k + 1) * out_len];
                let offset = (k * s.dilation) as isize - s.padding as isize;
                for (t, &c) in row.iter().enumerate() {
                    let j = (t * s.stride) as isize + offset;
                    if j >= 0 && (j as usize) < in_len {
                        xrow[j as usize] += c;
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        self.check(x)?;
        let s = self.spec;
        let (batch, _, in_len) = x.dims();
        let out_len = s.out_len(in_len);
        let ck = s.in_channels * s.kernel;
        let mut y = Tensor3::zeros(batch, s.out_channels, out_len);
        let mut cols = vec![T::zero(); ck * out_len];
        for b in 0..batch {
            self.im2col(x.item(b), in_len, out_len, &mut cols);
            let yb = y.item_mut(b);
            for (o, row) in yb
                .chunks_mut(out_len.max(1))
                .enumerate()
                .take(s.out_channels)
            {
                row.fill(self.bias.value[o]);
            }
            gemm(
                false,
                false,
                s.out_channels,
                out_len,
                ck,
                T::one(),
                &self.weight.value,
                &cols,
                T::one(),
                yb,
            );
        }
        Ok(y)
    }

    /// Accumulates weight/bias gradients; returns the input gradient when
    /// `need_input_grad` is set.
    pub fn backward(
        &mut self,
        x: &Tensor3<T>,
        dy: &Tensor3<T>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3<T>>, NnError> {
        self.check(x)?;
        let s = self.spec;
        let (batch, _, in_len) = x.dims();
        let out_len = s.out_len(in_len);
        if dy.dims() != (batch, s.out_channels, out_len) {
            return Err(NnError::Shape(format!(
                "conv output grad has dims {:?}",
                dy.dims()
            )));
        }
        let ck = s.in_channels * s.kernel;
        let mut cols = vec![T::zero(); ck * out_len];
        let mut dcols = vec![T::zero(); ck * out_len];
        let mut dx = need_input_grad.then(|| Tensor3::zeros(batch, s.in_channels, in_len));
        for b in 0..batch {
            let dyb = dy.item(b);
            self.im2col(x.item(b), in_len, out_len, &mut cols);
            gemm(
                false,
                true,
                s.out_channels,
                ck,
                out_len,
                T::one(),
                dyb,
                &cols,
                T::one(),
                &mut self.weight.grad,
            );
            for (o, row) in dyb.chunks(out_len.max(1)).enumerate().take(s.out_channels) {
                self.bias.grad[o] += row.iter().copied().sum();
            }
            if let Some(dx) = dx.as_mut() {
                gemm(
                    true,
                    false,
                    ck,
                    out_len,
                    s.out_channels,
                    T::one(),
                    &self.weight.value,
                    dyb,
                    T::zero(),
                    &mut dcols,
                );
                self.col2im(&dcols, in_len, out_len, dx.item_mut(b));
            }
        }
        Ok(dx)
    }

    pub fn cast<U: Scalar>(&self) -> Conv1d<U> {
        Conv1d {
            spec: self.spec,
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Conv1d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(cin: usize, cout: usize, k: usize, s: usize, p: usize, d: usize) -> ConvSpec {
        ConvSpec {
            in_channels: cin,
            out_channels: cout,
            kernel: k,
            stride: s,
            padding: p,
            dilation: d,
        }
    }

    // Direct-summation oracle.
    fn naive(conv: &Conv1d<f64>, x: &Tensor3<f64>) -> Tensor3<f64> {
        let s = conv.spec;
        let (batch, _, in_len) = x.dims();
        let out_len = s.out_len(in_len);
        let mut y = Tensor3::zeros(batch, s.out_channels, out_len);
        for b in 0..batch {
            for o in 0..s.out_channels {
                for t in 0..out_len {
                    let mut acc = conv.bias.value[o];
                    for i in 0..s.in_channels {
                        for k in 0..s.kernel {
                            let j = (t * s.stride + k * s.dilation) as isize - s.padding as isize;
                            if j >= 0 && (j as usize) < in_len {
                                acc += conv.weight.value[(o * s.in_channels + i) * s.kernel + k]
                                    * x.at(b, i, j as usize);
                            }
                        }
                    }
                    *y.at_mut(b, o, t) = acc;
                }
            }
        }
        y
    }

    fn random_input(rng: &mut ChaCha8Rng, dims: (usize, usize, usize)) -> Tensor3<f64> {
        Tensor3::from_vec(
            (0..dims.0 * dims.1 * dims.2)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
            dims,
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel() {
        let mut c = Conv1d::<f64>::zeros(spec(1, 1, 1, 1, 0, 1));
        c.weight.value[0] = 1.0;
        let x = Tensor3::from_vec(vec![0.5, -0.25, 0.125], (1, 1, 3)).unwrap();
        assert_eq!(c.forward(&x).unwrap(), x);
    }

    #[test]
    fn output_length_formula() {
        assert_eq!(spec(1, 1, 4, 4, 0, 1).out_len(16), 4);
        let s = spec(1, 1, 16, 4, ConvSpec::same_padding(16, 4, 1), 1);
        assert_eq!(s.padding, 6);
        assert_eq!(s.out_len(16000), 4000);
        assert_eq!(ConvSpec::same_padding(5, 2, 1), 2);
        assert_eq!(spec(1, 1, 5, 2, 2, 1).out_len(4000), 2000);
        assert_eq!(ConvSpec::same_padding(3, 1, 8), 8);
    }

    #[test]
    fn random_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = Conv1d::<f64>::kaiming(spec(2, 3, 3, 1, 1, 1), &mut rng);
        c.bias.value = vec![0.1, -0.2, 0.3];
        let x = random_input(&mut rng, (1, 2, 8));
        let y = c.forward(&x).unwrap();
        let want = naive(&c, &x);
        for (a, b) in y.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    // Exhaustive sweep over every shape with dimensions up to 8.
    #[test]
    fn exhaustive_small_shapes_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for cin in [1, 2, 3, 8] {
            for cout in [1, 2, 5, 8] {
                for k in 1..=8 {
                    for stride in 1..=8 {
                        for pad in 0..=8 {
                            for dil in [1, 2] {
                                for len in 1..=8 {
                                    let s = spec(cin, cout, k, stride, pad, dil);
                                    if s.out_len(len) == 0 {
                                        continue;
                                    }
                                    let mut c = Conv1d::<f64>::kaiming(s, &mut rng);
                                    c.bias
                                        .value
                                        .iter_mut()
                                        .for_each(|b| *b = rng.gen_range(-1.0..1.0));
                                    let x = random_input(&mut rng, (2, cin, len));
                                    let y = c.forward(&x).unwrap();
                                    let want = naive(&c, &x);
                                    assert_eq!(y.dims(), want.dims());
                                    for (a, b) in y.data().iter().zip(want.data()) {
                                        assert!((a - b).abs() < 1e-12, "{s:?} len {len}");
                                    }
                                    checked += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 10_000);
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let c = Conv1d::<f32>::zeros(spec(2, 1, 1, 1, 0, 1));
        let x = Tensor3::zeros(1, 3, 4);
        assert!(matches!(c.forward(&x), Err(NnError::Shape(_))));
    }
}
