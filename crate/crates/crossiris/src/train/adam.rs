//! Adam optimizer bound to a fixed parameter list.

use crate::config::AdamConfig;
use crate::error::{Error, Result};
use crate::tensor::Parameter;

pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: u64,
}

impl Adam {
    pub fn new(params: &[Parameter], cfg: AdamConfig) -> Result<Adam> {
        cfg.validate()?;
        Ok(Adam {
            cfg,
            m: params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect(),
            t: 0,
        })
    }

    /// Bias-corrected update from the accumulated gradients; gradients are
    /// zeroed afterwards. A parameter with no gradient this step is treated
    /// as having a zero gradient.
    pub fn step(&mut self, params: &[Parameter]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::arg("adam", "parameter list changed size"));
        }
        self.t += 1;
        let c1 = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.cfg.beta2.powi(self.t as i32);
        for (i, p) in params.iter().enumerate() {
            let grad = p.tensor.grad().unwrap_or_else(|| vec![0.0; p.tensor.numel()]);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGrad(p.name.clone()));
            }
            let mut data = p.tensor.to_vec();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..data.len() {
                let g = grad[j];
                m[j] = self.cfg.beta1 * m[j] + (1.0 - self.cfg.beta1) * g;
                v[j] = self.cfg.beta2 * v[j] + (1.0 - self.cfg.beta2) * g * g;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                data[j] -= self.cfg.lr * mhat / (vhat.sqrt() + self.cfg.eps);
            }
            p.tensor.set_data(&data)?;
            p.tensor.zero_grad();
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}
