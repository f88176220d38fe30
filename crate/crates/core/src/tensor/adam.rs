use std::collections::BTreeMap;

use super::{ParameterSet, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first and second moments, keyed by parameter name.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn moments(&self, name: &str) -> Option<(&Tensor, &Tensor)> {
        self.moments.get(name).map(|(m, v)| (m, v))
    }
}

/// One bias-corrected Adam update. Parameters without a gradient entry are
/// left untouched; a gradient without a matching parameter is an error.
pub fn adam_step(params: &mut ParameterSet, grads: &ParameterSet, state: &mut AdamState) -> Result<()> {
    for (name, g) in grads.iter() {
        let p = params
            .get(name)
            .ok_or_else(|| Error::Shape(format!("gradient for unknown parameter `{name}`")))?;
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "gradient `{name}` is {:?}, parameter is {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (name, g) in grads.iter() {
        let p = params.get_mut(name).expect("checked above");
        let (m, v) = state
            .moments
            .entry(name.to_string())
            .or_insert_with(|| (Tensor::zeros(g.rows(), g.cols()), Tensor::zeros(g.rows(), g.cols())));
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap());
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(AdamConfig::default());
        for _ in 0..50 {
            adam_step(&mut p, &g, &mut s).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_has_lr_magnitude() {
        let mut p = ParameterSet::new();
        p.insert("w", scalar(0.0));
        let mut g = ParameterSet::new();
        g.insert("w", scalar(1.0));
        let mut s = AdamState::new(AdamConfig::with_lr(0.001));
        adam_step(&mut p, &g, &mut s).unwrap();
        // m̂ = 1, v̂ = 1 → Δ = −lr / (1 + ε)
        let expect = -0.001 / (1.0 + 1e-8);
        assert!((p.get("w").unwrap().get(0, 0) - expect).abs() < 1e-15);
    }

    #[test]
    fn accepts_all_table_learning_rates() {
        for lr in [0.001, 0.0001, 0.01] {
            let mut p = ParameterSet::new();
            p.insert("w", scalar(1.0));
            let mut g = ParameterSet::new();
            g.insert("w", scalar(1.0));
            let mut s = AdamState::new(AdamConfig::with_lr(lr));
            adam_step(&mut p, &g, &mut s).unwrap();
            assert!((p.get("w").unwrap().get(0, 0) - (1.0 - lr)).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::zeros(2, 2));
        let mut g = ParameterSet::new();
        g.insert("w", Tensor::zeros(2, 3));
        let mut s = AdamState::new(AdamConfig::default());
        assert!(adam_step(&mut p, &g, &mut s).is_err());
        assert_eq!(s.step, 0);
    }
}
