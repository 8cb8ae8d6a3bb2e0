use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings: {self:?}")))
        }
    }
}

/// Moment estimates for every parameter tensor plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar = f32> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[&Tensor<T>]) -> Result<Self> {
        config.validate()?;
        let zeros = params
            .iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        })
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>, grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::mismatch("adam_step", self.m.len(), (params.len(), grads.len())));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::mismatch("adam_step", p.shape(), g.shape()));
            }
        }
        self.t += 1;
        let c = self.config;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let correct1 = T::from_f64_lossy(1.0 - c.beta1.powi(self.t as i32));
        let correct2 = T::from_f64_lossy(1.0 - c.beta2.powi(self.t as i32));
        let lr = T::from_f64_lossy(c.learning_rate);
        let eps = T::from_f64_lossy(c.epsilon);

        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((theta, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / correct1;
                let v_hat = *v / correct2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut theta = Tensor::new(&[1], vec![0.5f64]).unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), &[&theta]).unwrap();
        adam.step(vec![&mut theta], &[Tensor::new(&[1], vec![1.0]).unwrap()]).unwrap();
        assert!((0.5 - theta.data()[0] - 1e-4).abs() < 1e-9);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut theta = Tensor::new(&[3], vec![0.1f32, -2.0, 7.5]).unwrap();
        let before = theta.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &[&theta]).unwrap();
        for _ in 0..5 {
            adam.step(vec![&mut theta], &[Tensor::zeros(&[3]).unwrap()]).unwrap();
        }
        assert_eq!(theta, before);
        assert!(adam.m[0].data().iter().chain(adam.v[0].data()).all(|&x| x == 0.0));
    }

    #[test]
    fn minimises_a_parabola() {
        let config = AdamConfig::default();
        let mut theta = Tensor::new(&[1], vec![1.0f64]).unwrap();
        let mut adam = AdamState::new(config, &[&theta]).unwrap();
        let mut prev = 1.0f64;
        for _ in 0..100 {
            let g = Tensor::new(&[1], vec![2.0 * theta.data()[0]]).unwrap();
            adam.step(vec![&mut theta], &[g]).unwrap();
            let now = theta.data()[0].abs();
            assert!(now < prev);
            prev = now;
        }
        // each early step moves by about the learning rate
        assert!(prev < 1.0 - 90.0 * config.learning_rate);
    }

    #[test]
    fn shape_mismatch() {
        let mut theta = Tensor::<f32>::zeros(&[2]).unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), &[&theta]).unwrap();
        assert!(adam.step(vec![&mut theta], &[Tensor::zeros(&[3]).unwrap()]).is_err());
    }
}
