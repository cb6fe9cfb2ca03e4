use serde::{Deserialize, Serialize};

use crate::linalg::HermitianParam;
use crate::{Error, Result};

/// Bias-corrected Adam on the packed real parameters of every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, shapes: impl IntoIterator<Item = usize>) -> Self {
        let zeros: Vec<Vec<f64>> = shapes.into_iter().map(|n| vec![0.0; n]).collect();
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn for_params(learning_rate: f64, params: &[HermitianParam]) -> Self {
        Self::new(learning_rate, params.iter().map(|h| h.packed().len()))
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn step_slices(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ParameterMismatch(format!("{} blocks, optimizer has {}", params.len(), self.m.len())));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::ParameterMismatch(format!("block {i} length")));
            }
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                p[j] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut [HermitianParam], grads: &[Vec<f64>]) -> Result<()> {
        let mut slices: Vec<&mut [f64]> = params.iter_mut().map(HermitianParam::packed_mut).collect();
        self.step_slices(&mut slices, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut adam = Adam::new(0.01, [3]);
        let mut p = vec![1.0, 1.0, 1.0];
        adam.step_slices(&mut [&mut p], &[vec![2.0, -0.5, 0.0]]).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-8);
        assert!((p[1] - 1.01).abs() < 1e-8);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut adam = Adam::new(0.1, [2]);
        let mut p = vec![0.3, -0.2];
        for _ in 0..5 {
            adam.step_slices(&mut [&mut p], &[vec![0.0, 0.0]]).unwrap();
        }
        assert_eq!(p, vec![0.3, -0.2]);
    }

    #[test]
    fn matches_reference_on_quadratic() {
        // f(x) = 0.5 * sum a_i x_i^2; reference written out independently.
        let a = [1.0, 4.0, 0.25];
        let lr = 0.1;
        let mut adam = Adam::new(lr, [3]);
        let mut x = vec![1.0, -2.0, 3.0];
        let (mut rx, mut rm, mut rv) = (x.clone(), [0.0; 3], [0.0; 3]);
        for t in 1..=10 {
            let g: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| ai * xi).collect();
            adam.step_slices(&mut [&mut x], &[g]).unwrap();
            for i in 0..3 {
                let gi = a[i] * rx[i];
                rm[i] = 0.9 * rm[i] + 0.1 * gi;
                rv[i] = 0.999 * rv[i] + 0.001 * gi * gi;
                let mhat = rm[i] / (1.0 - 0.9f64.powi(t));
                let vhat = rv[i] / (1.0 - 0.999f64.powi(t));
                rx[i] -= lr * mhat / (vhat.sqrt() + 1e-8);
            }
            for i in 0..3 {
                assert!((x[i] - rx[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = Adam::new(0.1, [2]);
        let mut p = vec![0.0; 3];
        assert!(adam.step_slices(&mut [&mut p], &[vec![0.0; 3]]).is_err());
    }
}
