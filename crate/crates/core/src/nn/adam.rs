use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments. Moment buffers are allocated on the
/// first step and must keep the same shapes afterwards.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        check_len("adam parameter groups", params.len(), grads.len())?;
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        check_len("adam moment groups", self.first.len(), params.len())?;
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            check_len("adam parameter group", p.len(), g.len())?;
            check_len("adam moment shape", m.len(), p.len())?;
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = vec![1.0, -2.0, 3.5];
        for _ in 0..5 {
            adam.step(&mut [&mut p[..]], &[&[0.0, 0.0, 0.0]]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_matches_hand_recurrence() {
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..Default::default()
        };
        let mut adam = Adam::new(cfg);
        let g = [0.3, -2.0];
        let mut p = vec![0.5, 0.5];
        adam.step(&mut [&mut p[..]], &[&g]).unwrap();
        for (i, &gi) in g.iter().enumerate() {
            // m = 0.1 g, v = 0.001 g², m̂ = g, v̂ = g²
            let m_hat = (0.1 * gi) / (1.0 - 0.9);
            let v_hat = (0.001 * gi * gi) / (1.0 - 0.999);
            let expected = 0.5 - 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
            assert!((p[i] - expected).abs() < 1e-15, "{} vs {}", p[i], expected);
        }
        assert!((p[0] - 0.49).abs() < 1e-9 && (p[1] - 0.51).abs() < 1e-9);
    }

    #[test]
    fn constant_gradient_moves_at_learning_rate() {
        let mut adam = Adam::new(AdamConfig::with_learning_rate(0.001));
        let mut p = vec![0.0, 0.0];
        let g = [4.0, -0.02];
        let mut prev = p.clone();
        for _ in 0..2000 {
            prev.copy_from_slice(&p);
            adam.step(&mut [&mut p[..]], &[&g]).unwrap();
        }
        let d0 = p[0] - prev[0];
        let d1 = p[1] - prev[1];
        assert!(d0 < 0.0 && d1 > 0.0);
        assert!((d0.abs() - 0.001).abs() < 1e-6 && (d1.abs() - 0.001).abs() < 1e-6);
    }

    #[test]
    fn shape_changes_are_rejected() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = vec![0.0; 2];
        adam.step(&mut [&mut p[..]], &[&[1.0, 1.0]]).unwrap();
        let mut q = vec![0.0; 3];
        assert!(adam.step(&mut [&mut q[..]], &[&[1.0, 1.0, 1.0]]).is_err());
    }
}
