use serde::{Deserialize, Serialize};

use super::{NnError, Param, Parameterized, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers follow the visitation order of the
/// optimized parameters and are created on the first step.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step_count: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step_count: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.second
    }

    /// One update of every parameter of `model`. Fails without touching any
    /// parameter if a gradient is non-finite.
    pub fn step(&mut self, model: &mut (impl Parameterized<T> + ?Sized)) -> Result<(), NnError> {
        let mut bad = None;
        model.visit_params(&mut |name, p| {
            if bad.is_none() {
                if let Some((i, g)) = p.grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
                    bad = Some(NnError::NonFiniteGradient {
                        param: name.to_string(),
                        index: i,
                        value: g.as_f64(),
                    });
                }
            }
        });
        if let Some(err) = bad {
            return Err(err);
        }
        self.step_count += 1;
        let c = self.config;
        let t = self.step_count as i32;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::lit(1.0 - c.beta1.powi(t));
        let bc2 = T::lit(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        let first = &mut self.first;
        let second = &mut self.second;
        let mut idx = 0;
        model.visit_params(&mut |_, p: &mut Param<T>| {
            if first.len() <= idx {
                first.push(vec![T::zero(); p.len()]);
                second.push(vec![T::zero(); p.len()]);
            }
            let (m, v) = (&mut first[idx], &mut second[idx]);
            for ((w, &g), (mi, vi)) in p
                .value
                .iter_mut()
                .zip(&p.grad)
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar1(Param<f64>);

    impl Parameterized<f64> for Scalar1 {
        fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
            f("w", &mut self.0);
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        // |g| well above eps so the denominator is |g| to within 1e-6.
        for g in [3.7, -0.05, 1e4] {
            let mut p = Scalar1(Param::zeros(&[1]));
            p.0.grad[0] = g;
            let mut adam = AdamState::new(AdamConfig {
                lr: 0.01,
                ..Default::default()
            });
            adam.step(&mut p).unwrap();
            let want = -0.01 * f64::signum(g);
            assert!(
                (p.0.value[0] - want).abs() < 0.01 * 1e-6,
                "g={g}: {}",
                p.0.value[0]
            );
            assert_eq!(adam.step_count, 1);
        }
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut fresh = Scalar1(Param::filled(&[2], 1.5));
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut fresh).unwrap();
        assert_eq!(fresh.0.value, vec![1.5, 1.5]);

        let mut p = Scalar1(Param::filled(&[2], 1.5));
        let mut adam = AdamState::new(AdamConfig::default());
        p.0.grad = vec![1.0, -1.0];
        adam.step(&mut p).unwrap();
        let (m0, v0) = (
            adam.first_moments()[0].clone(),
            adam.second_moments()[0].clone(),
        );
        p.0.grad = vec![0.0, 0.0];
        adam.step(&mut p).unwrap();
        for (a, b) in adam.first_moments()[0].iter().zip(&m0) {
            assert!((a - 0.9 * b).abs() < 1e-15);
        }
        for (a, b) in adam.second_moments()[0].iter().zip(&v0) {
            assert!((a - 0.999 * b).abs() < 1e-15 && *a >= 0.0);
        }
        assert_eq!(adam.step_count, 2);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = Scalar1(Param::zeros(&[1]));
        let mut adam = AdamState::new(AdamConfig {
            lr: 0.1,
            ..Default::default()
        });
        for _ in 0..200 {
            p.0.grad[0] = 2.0 * (p.0.value[0] - 3.0);
            adam.step(&mut p).unwrap();
        }
        assert!((p.0.value[0] - 3.0).abs() < 0.1, "w = {}", p.0.value[0]);
        assert_eq!(adam.step_count, 200);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = Scalar1(Param::zeros(&[3]));
        p.0.grad[1] = f64::NAN;
        let mut adam = AdamState::new(AdamConfig::default());
        let err = adam.step(&mut p).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient { index: 1, .. }));
        assert_eq!(adam.step_count, 0);
        assert_eq!(p.0.value, vec![0.0; 3]);
    }
}
