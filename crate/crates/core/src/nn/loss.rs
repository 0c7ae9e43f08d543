use super::{NnError, Scalar, Tensor3};

/// Target value excluded from the loss (padding frames).
pub const IGNORE_TARGET: u8 = u8::MAX;

#[derive(Debug, Clone)]
pub struct XentOutput<T> {
    /// Mean over counted frames of `weight[target] * -log softmax(logits)[target]`.
    pub loss: T,
    /// `weight[target] * (softmax - onehot) / counted_frames`.
    pub grad: Tensor3<T>,
    pub counted: usize,
    pub correct: usize,
    /// Per counted frame, its contribution to `loss` (in frame order).
    pub terms: Vec<T>,
}

/// Numerically stable softmax over one logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Frame-wise softmax cross-entropy over logits `(B, classes, L)` with
/// targets in `b * L + l` order. `class_weights` defaults to all ones.
pub fn softmax_xent<T: Scalar>(
    logits: &Tensor3<T>,
    targets: &[u8],
    class_weights: Option<&[T]>,
) -> Result<XentOutput<T>, NnError> {
    let (batch, classes, len) = logits.dims();
    if targets.len() != batch * len {
        return Err(NnError::Shape(format!(
            "{} targets for {} frames",
            targets.len(),
            batch * len
        )));
    }
    if let Some(w) = class_weights {
        if w.len() != classes {
            return Err(NnError::Shape(format!(
                "{} class weights for {classes} classes",
                w.len()
            )));
        }
    }
    for (position, &target) in targets.iter().enumerate() {
        if target != IGNORE_TARGET && target as usize >= classes {
            return Err(NnError::Label {
                target,
                position,
                classes,
            });
        }
    }
    let counted = targets.iter().filter(|&&t| t != IGNORE_TARGET).count();
    let mut grad = Tensor3::zeros(batch, classes, len);
    if counted == 0 {
        return Ok(XentOutput {
            loss: T::zero(),
            grad,
            counted,
            correct: 0,
            terms: Vec::new(),
        });
    }
    let inv_n = T::one() / T::lit(counted as f64);
    let mut total = T::zero();
    let mut terms = Vec::with_capacity(counted);
    let mut correct = 0;
    let mut z = vec![T::zero(); classes];
    for b in 0..batch {
        for l in 0..len {
            let target = targets[b * len + l];
            if target == IGNORE_TARGET {
                continue;
            }
            let target = target as usize;
            for (c, zc) in z.iter_mut().enumerate() {
                *zc = logits.at(b, c, l);
            }
            let max = z.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = z.iter().map(|&v| (v - max).exp()).sum();
            let log_sum = max + sum.ln();
            let w = class_weights.map_or(T::one(), |w| w[target]);
            let term = w * (log_sum - z[target]);
            total += term;
            terms.push(term * inv_n);
            let mut best = 0;
            for c in 0..classes {
                if z[c] > z[best] {
                    best = c;
                }
                let p = (z[c] - log_sum).exp();
                let onehot = if c == target { T::one() } else { T::zero() };
                *grad.at_mut(b, c, l) = w * (p - onehot) * inv_n;
            }
            if best == target {
                correct += 1;
            }
        }
    }
    Ok(XentOutput {
        loss: total * inv_n,
        grad,
        counted,
        correct,
        terms,
    })
}
