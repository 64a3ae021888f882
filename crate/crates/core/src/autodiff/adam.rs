use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates for one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        AdamState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update; `grads` is zeroed afterwards.
    pub fn step(&mut self, params: &mut ParamSet, grads: &mut Gradients) -> Result<()> {
        grads.check_matches(params)?;
        if self.m.len() != params.len() {
            return Err(Error::Autodiff(format!(
                "optimizer state tracks {} tensors, parameter set has {}",
                self.m.len(),
                params.len()
            )));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let g = grads.get(id);
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            if m.len() != g.len() {
                return Err(Error::Autodiff(format!(
                    "optimizer moments for `{}` have the wrong length",
                    params.name(id)
                )));
            }
            let w = params.get_mut(id).data_mut();
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        grads.zero();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Tape, Tensor};

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = ParamSet::new();
        p.add("w", Tensor::row(vec![0.3, -0.7]));
        let before = p.clone();
        let mut g = p.zero_grads();
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.step(&mut p, &mut g).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = ParamSet::new();
        let id = p.add("w", Tensor::row(vec![1.0, 1.0, 1.0]));
        let mut g = p.zero_grads();
        g.get_mut(id).copy_from_slice(&[0.5, -3.0, 1e-3]);
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        let mut adam = AdamState::new(&p, cfg);
        adam.step(&mut p, &mut g).unwrap();
        let w = p.get(id).data();
        assert!((w[0] - 0.99).abs() < 1e-8);
        assert!((w[1] - 1.01).abs() < 1e-8);
        assert!((w[2] - 0.99).abs() < 1e-7);
        assert_eq!(g.get(id), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn mismatched_gradients_rejected() {
        let mut p = ParamSet::new();
        p.add("w", Tensor::row(vec![1.0]));
        let mut other = ParamSet::new();
        other.add("a", Tensor::row(vec![1.0]));
        other.add("b", Tensor::row(vec![1.0]));
        let mut g = other.zero_grads();
        let mut adam = AdamState::new(&p, AdamConfig::default());
        assert!(adam.step(&mut p, &mut g).is_err());
    }

    #[test]
    fn quadratic_bowl_descends() {
        let mut p = ParamSet::new();
        let id = p.add("w", Tensor::row(vec![2.0, -1.5, 0.5]));
        let target = [0.3, 0.1, -0.2];
        let mut adam = AdamState::new(&p, AdamConfig { lr: 0.01, ..AdamConfig::default() });
        let mut losses = Vec::new();
        for _ in 0..100 {
            let mut tape = Tape::new();
            let w = tape.param(&p, id);
            let t = tape.constant(Tensor::row(target.to_vec()));
            let loss = tape.squared_error(w, t).unwrap();
            losses.push(tape.value(loss).item());
            let mut g = p.zero_grads();
            tape.backward(loss, &mut g).unwrap();
            adam.step(&mut p, &mut g).unwrap();
        }
        // strictly decreasing once the first few steps have built up momentum
        for w in losses[5..].windows(2) {
            assert!(w[1] < w[0], "{} !< {}", w[1], w[0]);
        }
        assert!(losses[99] < 0.5 * losses[0]);
    }
}
