use ndarray::{Array2, Zip};

use super::params::Params;
use crate::error::{Error, Result};

/// Adam with decoupled weight decay on matrices (biases, gains and other
/// single-row tensors are not decayed).
#[derive(Clone, Debug)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    steps: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(params: &Params, lr: f64, weight_decay: f64) -> AdamW {
        let zeros = || params.tensors().iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            steps: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut Params, grads: &[Array2<f64>]) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::Shape(format!("{} gradients for {} tensors", grads.len(), self.m.len())));
        }
        if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params.tensors_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.raw_dim() != g.raw_dim() {
                return Err(Error::Shape("gradient shape differs from its tensor".into()));
            }
            let decay = if p.nrows() > 1 { self.weight_decay } else { 0.0 };
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = (*m / c1) / ((*v / c2).sqrt() + eps);
                *p -= lr * (update + decay * *p);
            });
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Array2<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flat_map(|g| g.iter()).map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|x| x * s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::GameId;
    use crate::net::NetConfig;

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![Array2::from_elem((2, 2), 3.0), Array2::from_elem((1, 1), 4.0)];
        let before = clip_global_norm(&mut g, 1.0);
        assert!((before - (36.0f64 + 16.0).sqrt()).abs() < 1e-12);
        let after: f64 = g.iter().flat_map(|a| a.iter()).map(|x| x * x).sum::<f64>().sqrt();
        assert!((after - 1.0).abs() < 1e-12);
        let mut small = vec![Array2::from_elem((1, 1), 0.5)];
        assert_eq!(clip_global_norm(&mut small, 1.0), 0.5);
        assert_eq!(small[0][[0, 0]], 0.5);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = Params::init(&NetConfig::for_game(GameId::Kuhn), 1).unwrap();
        let before = p.clone();
        let mut opt = AdamW::new(&p, 1e-3, 0.0);
        let grads: Vec<_> = p.tensors().iter().map(|t| Array2::from_elem(t.raw_dim(), 2.0)).collect();
        opt.step(&mut p, &grads).unwrap();
        for (a, b) in p.tensors().iter().zip(before.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((y - x - 1e-3).abs() < 1e-9);
            }
        }
        let bad: Vec<_> = p.tensors().iter().map(|t| Array2::from_elem(t.raw_dim(), f64::NAN)).collect();
        assert!(opt.step(&mut p, &bad).is_err());
    }
}
