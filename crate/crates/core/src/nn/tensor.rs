use super::{NnError, Scalar};

/// Dense `(batch, channels, length)` tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    data: Vec<T>,
    dims: (usize, usize, usize),
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Self {
            data: vec![T::zero(); batch * channels * length],
            dims: (batch, channels, length),
        }
    }

    pub fn from_vec(data: Vec<T>, dims: (usize, usize, usize)) -> Result<Self, NnError> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(NnError::Shape(format!(
                "{} elements for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { data, dims })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims.0
    }

    pub fn channels(&self) -> usize {
        self.dims.1
    }

    pub fn length(&self) -> usize {
        self.dims.2
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, l: usize) -> T {
        self.data[(b * self.dims.1 + c) * self.dims.2 + l]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, l: usize) -> &mut T {
        &mut self.data[(b * self.dims.1 + c) * self.dims.2 + l]
    }

    /// The `channels × length` block of one batch item.
    pub fn item(&self, b: usize) -> &[T] {
        let n = self.dims.1 * self.dims.2;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.dims.1 * self.dims.2;
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(B, C, L)` → time-major `(L, B, C)` buffer.
    pub fn to_time_major(&self) -> Vec<T> {
        let (b, c, l) = self.dims;
        let mut out = vec![T::zero(); b * c * l];
        for bi in 0..b {
            for ci in 0..c {
                let row = &self.data[(bi * c + ci) * l..(bi * c + ci + 1) * l];
                for (t, &v) in row.iter().enumerate() {
                    out[(t * b + bi) * c + ci] = v;
                }
            }
        }
        out
    }

    /// Inverse of [`Tensor3::to_time_major`].
    pub fn from_time_major(tm: &[T], batch: usize, channels: usize, length: usize) -> Self {
        let mut out = Self::zeros(batch, channels, length);
        for t in 0..length {
            for bi in 0..batch {
                let src = &tm[(t * batch + bi) * channels..(t * batch + bi + 1) * channels];
                for (ci, &v) in src.iter().enumerate() {
                    out.data[(bi * channels + ci) * length + t] = v;
                }
            }
        }
        out
    }

    /// Keeps the first `length` steps of every row.
    pub fn truncated(&self, length: usize) -> Self {
        let (b, c, l) = self.dims;
        let length = length.min(l);
        let mut out = Self::zeros(b, c, length);
        for row in 0..b * c {
            out.data[row * length..(row + 1) * length]
                .copy_from_slice(&self.data[row * l..row * l + length]);
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Tensor3<U> {
        Tensor3 {
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            dims: self.dims,
        }
    }
}
