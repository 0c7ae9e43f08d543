use rand::Rng;

use super::{gemm, NnError, Param, Parameterized, Scalar, Tensor3};

/// Fully connected layer applied independently at every time step:
/// `(B, in, L)` → `(B, out, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `(out, in)`
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Param::zeros(&[output, input]),
            bias: Param::zeros(&[output]),
        }
    }

    /// Kaiming-uniform weights, zero bias.
    pub fn kaiming(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: Param::uniform(&[output, input], (6.0 / input as f64).sqrt(), rng),
            bias: Param::zeros(&[output]),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_size(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let (batch, c, len) = x.dims();
        if c != self.input_size() {
            return Err(NnError::Shape(format!(
                "linear expects {} features, got {c}",
                self.input_size()
            )));
        }
        let out = self.output_size();
        let mut y = Tensor3::zeros(batch, out, len);
        for b in 0..batch {
            let yb = y.item_mut(b);
            for (o, row) in yb.chunks_mut(len.max(1)).enumerate().take(out) {
                row.fill(self.bias.value[o]);
            }
            gemm(
                false,
                false,
                out,
                len,
                c,
                T::one(),
                &self.weight.value,
                x.item(b),
                T::one(),
                yb,
            );
        }
        Ok(y)
    }

    /// Single feature vector in, single vector out.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        let t = Tensor3::from_vec(x.to_vec(), (1, x.len(), 1))?;
        Ok(self.forward(&t)?.into_vec())
    }

    pub fn backward(&mut self, x: &Tensor3<T>, dy: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let (batch, c, len) = x.dims();
        let out = self.output_size();
        if dy.dims() != (batch, out, len) {
            return Err(NnError::Shape(format!(
                "linear output grad has dims {:?}",
                dy.dims()
            )));
        }
        let mut dx = Tensor3::zeros(batch, c, len);
        for b in 0..batch {
            let dyb = dy.item(b);
            gemm(
                false,
                true,
                out,
                c,
                len,
                T::one(),
                dyb,
                x.item(b),
                T::one(),
                &mut self.weight.grad,
            );
            for (o, row) in dyb.chunks(len.max(1)).enumerate().take(out) {
                self.bias.grad[o] += row.iter().copied().sum();
            }
            gemm(
                true,
                false,
                c,
                len,
                out,
                T::one(),
                &self.weight.value,
                dyb,
                T::zero(),
                dx.item_mut(b),
            );
        }
        Ok(dx)
    }

    pub fn cast<U: Scalar>(&self) -> Linear<U> {
        Linear {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Linear<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}
