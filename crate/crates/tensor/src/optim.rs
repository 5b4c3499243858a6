//! Bias-corrected Adam.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment buffers, one per parameter tensor, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes
            .into_iter()
            .map(|n| (vec![T::zero(); n], vec![T::zero(); n]))
            .unzip();
        Self { step: 0, m, v }
    }

    pub fn matches(&self, sizes: &[usize]) -> bool {
        self.m.len() == sizes.len()
            && self.m.iter().zip(sizes).all(|(m, &n)| m.len() == n)
            && self.v.iter().zip(sizes).all(|(v, &n)| v.len() == n)
    }
}

impl Adam {
    /// One update of every parameter tensor from its gradient.
    ///
    /// Panics if the state, parameter and gradient lists disagree in shape;
    /// callers build all three from the same parameter set.
    pub fn step<T: Scalar>(&self, params: &mut [&mut [T]], grads: &[&[T]], state: &mut AdamState<T>) {
        assert_eq!(params.len(), grads.len(), "adam: one gradient per parameter");
        assert_eq!(params.len(), state.m.len(), "adam: state does not match parameters");
        state.step += 1;
        let t = state.step as i32;
        let b1 = T::from_f64_lossy(self.beta1);
        let b2 = T::from_f64_lossy(self.beta2);
        let one = T::one();
        let correction1 = one - T::from_f64_lossy(self.beta1.powi(t));
        let correction2 = one - T::from_f64_lossy(self.beta2.powi(t));
        let lr = T::from_f64_lossy(self.lr);
        let eps = T::from_f64_lossy(self.epsilon);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len(), "adam: gradient {i} has the wrong length");
            let (m, v) = (&mut state.m[i], &mut state.v[i]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
