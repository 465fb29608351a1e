use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    RmsProp,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const RMS_DECAY: f64 = 0.9;
const EPS: f64 = 1e-8;

/// First-order optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub(crate) fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        Self { kind, lr, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - BETA1.powi(self.step);
                let c2 = 1.0 - BETA2.powi(self.step);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + EPS);
                }
            }
            OptimizerKind::RmsProp => {
                for i in 0..params.len() {
                    let g = grad[i];
                    self.v[i] = RMS_DECAY * self.v[i] + (1.0 - RMS_DECAY) * g * g;
                    params[i] -= self.lr * g / (self.v[i].sqrt() + EPS);
                }
            }
        }
    }
}

/// Scales `grad` in place so its Euclidean norm is at most `max_norm`.
pub(crate) fn clip_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::RmsProp] {
            let mut opt = Optimizer::new(kind, 0.0, 3);
            let mut p = vec![0.1, -2.5, 1e-300];
            let before = p.clone();
            opt.step(&mut p, &[3.0, -1.0, 0.5]);
            assert_eq!(p, before, "{kind:?}");
        }
    }

    #[test]
    fn sgd_step_is_lr_times_gradient() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5, 2);
        let mut p = vec![1.0, 1.0];
        opt.step(&mut p, &[2.0, -2.0]);
        assert_eq!(p, vec![0.0, 2.0]);
    }

    #[test]
    fn first_adam_step_moves_each_coordinate_by_lr() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 2);
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &[5.0, -0.2]);
        assert!((p[0] + 0.01).abs() < 1e-9 && (p[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![3.0, 4.0];
        clip_norm(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut small = vec![0.3, 0.4];
        clip_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.3, 0.4]);
    }
}
