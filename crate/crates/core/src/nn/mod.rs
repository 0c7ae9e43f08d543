//! Dense kernels with hand-written backward passes: 1D convolution, batch
//! normalization, leaky ReLU, dropout, bidirectional LSTM, per-frame fully
//! connected layers, softmax cross-entropy, Adam, and a finite-difference
//! gradient checker.
//!
//! Every kernel is generic over [`Scalar`] so training can run in `f32`
//! while gradient checks run the same code in `f64`.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod gemm;
pub mod gradcheck;
mod linear;
mod loss;
mod lstm;
mod tensor;

pub use activation::{dropout, dropout_backward, leaky_relu, leaky_relu_backward};
pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNorm1d, BnCache};
pub use conv::{Conv1d, ConvSpec};
pub use gemm::gemm;
pub use gradcheck::{grad_check, grad_check_where, Coverage, GradCheckReport, Objective, Probe};
pub use linear::Linear;
pub use loss::{softmax, softmax_xent, XentOutput, IGNORE_TARGET};
pub use lstm::{BiLstm, LstmCache, LstmDirection};
pub use tensor::Tensor3;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use rand::Rng;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("target {target} at position {position} is not a class index below {classes}")]
    Label {
        target: u8,
        position: usize,
        classes: usize,
    },
    #[error("non-finite gradient in `{param}` at index {index}: {value}")]
    NonFiniteGradient {
        param: String,
        index: usize,
        value: f64,
    },
}

/// Train mode uses batch statistics and active dropout; eval mode uses
/// running statistics and disables dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Floating-point element type of every kernel.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumCast
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Raw strided GEMM `C = alpha * A * B + beta * C`.
    ///
    /// # Safety
    /// Pointers and strides must describe valid `m×k`, `k×n` and `m×n`
    /// matrices, with `c` not aliasing `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub shape: Vec<usize>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            value: vec![T::zero(); n],
            grad: vec![T::zero(); n],
            shape: shape.to_vec(),
        }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        let mut p = Self::zeros(shape);
        p.value.fill(v);
        p
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(shape);
        for v in &mut p.value {
            *v = T::lit(rng.gen_range(-bound..=bound));
        }
        p
    }

    pub fn from_values(shape: &[usize], value: Vec<T>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if value.len() != n {
            return Err(NnError::Shape(format!(
                "{} values for shape {shape:?}",
                value.len()
            )));
        }
        Ok(Self {
            grad: vec![T::zero(); n],
            value,
            shape: shape.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            value: self.value.iter().map(|v| U::lit(v.as_f64())).collect(),
            grad: self.grad.iter().map(|v| U::lit(v.as_f64())).collect(),
            shape: self.shape.clone(),
        }
    }
}

/// Anything that owns named trainable tensors, visited in a fixed order.
pub trait Parameterized<T: Scalar> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>));

    fn zero_grads(&mut self) {
        self.visit_params(&mut |_, p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.len());
        n
    }
}
