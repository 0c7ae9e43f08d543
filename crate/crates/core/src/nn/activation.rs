use rand::Rng;

use super::{Mode, Scalar, Tensor3};

/// `x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu<T: Scalar>(x: &Tensor3<T>, slope: T) -> Tensor3<T> {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < T::zero() {
            *v *= slope;
        }
    }
    y
}

/// Gradient of [`leaky_relu`] given its input `x`.
pub fn leaky_relu_backward<T: Scalar>(x: &Tensor3<T>, dy: &Tensor3<T>, slope: T) -> Tensor3<T> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v < T::zero() {
            *d *= slope;
        }
    }
    dx
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `p` and survivors are scaled by `1 / (1 - p)`; the returned mask holds the
/// applied multipliers. Eval mode (or `p == 0`) is the identity.
pub fn dropout<T: Scalar>(
    x: &Tensor3<T>,
    p: f64,
    rng: &mut impl Rng,
    mode: Mode,
) -> (Tensor3<T>, Option<Vec<T>>) {
    assert!(
        (0.0..1.0).contains(&p),
        "dropout probability must lie in [0, 1)"
    );
    if mode == Mode::Eval || p == 0.0 {
        return (x.clone(), None);
    }
    let keep = T::lit(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.data().len())
        .map(|_| {
            if rng.gen::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let mut y = x.clone();
    for (v, &m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    (y, Some(mask))
}

pub fn dropout_backward<T: Scalar>(dy: &Tensor3<T>, mask: Option<&[T]>) -> Tensor3<T> {
    let mut dx = dy.clone();
    if let Some(mask) = mask {
        for (d, &m) in dx.data_mut().iter_mut().zip(mask) {
            *d *= m;
        }
    }
    dx
}
