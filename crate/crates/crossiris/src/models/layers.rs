//! Trainable layer building blocks. Each layer owns named Parameters and a
//! forward method; `train` selects batch-statistics / dropout behaviour.

use std::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

/// Weight initialization: zero-mean Gaussian, sigma 0.02.
pub const INIT_SIGMA: f32 = 0.02;

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, mean: f32, sigma: f32) -> Vec<f32> {
    let dist = Normal::new(mean, sigma).expect("valid normal");
    (0..n).map(|_| dist.sample(rng)).collect()
}

pub struct Conv2d {
    pub weight: Parameter,
    pub bias: Parameter,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Conv2d> {
        Ok(Conv2d {
            weight: Parameter::new(
                format!("{name}.weight"),
                &[out_c, in_c, k, k],
                gaussian(rng, out_c * in_c * k * k, 0.0, INIT_SIGMA),
            )?,
            bias: Parameter::new(format!("{name}.bias"), &[out_c], vec![0.0; out_c])?,
            stride,
            pad,
        })
    }

    /// Fan-in-scaled init (sigma = sqrt(2 / (in_c k^2))) for nets without
    /// normalization layers, where a fixed small sigma makes deep
    /// activations vanish.
    pub fn new_he(
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Conv2d> {
        let sigma = (2.0 / (in_c * k * k) as f32).sqrt();
        Ok(Conv2d {
            weight: Parameter::new(
                format!("{name}.weight"),
                &[out_c, in_c, k, k],
                gaussian(rng, out_c * in_c * k * k, 0.0, sigma),
            )?,
            bias: Parameter::new(format!("{name}.bias"), &[out_c], vec![0.0; out_c])?,
            stride,
            pad,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.conv2d(&self.weight.tensor, &self.bias.tensor, self.stride, self.pad)
    }

    pub fn params(&self) -> Vec<Parameter> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}

/// Transpose convolution with a symmetric kernel size, used for 2x2 stride-2
/// upsampling. Weight layout is [in_c, out_c, k, k]; no bias (the following
/// convolution block carries one).
pub struct ConvTranspose2d {
    pub weight: Parameter,
    pub stride: usize,
}

impl ConvTranspose2d {
    pub fn new(
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ConvTranspose2d> {
        Ok(ConvTranspose2d {
            weight: Parameter::new(
                format!("{name}.weight"),
                &[in_c, out_c, k, k],
                gaussian(rng, in_c * out_c * k * k, 0.0, INIT_SIGMA),
            )?,
            stride,
        })
    }

    /// Fan-in-scaled init, matching [`Conv2d::new_he`].
    pub fn new_he(
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ConvTranspose2d> {
        let sigma = (2.0 / (in_c * k * k) as f32).sqrt();
        Ok(ConvTranspose2d {
            weight: Parameter::new(
                format!("{name}.weight"),
                &[in_c, out_c, k, k],
                gaussian(rng, in_c * out_c * k * k, 0.0, sigma),
            )?,
            stride,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.conv2d_transpose(&self.weight.tensor, self.stride)
    }

    pub fn params(&self) -> Vec<Parameter> {
        vec![self.weight.clone()]
    }
}

/// Batch normalization with running statistics (momentum 0.1, eps 1e-5).
/// gamma is drawn from N(1, 0.02^2), beta starts at zero.
pub struct BatchNorm2d {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: RefCell<Vec<f32>>,
    pub running_var: RefCell<Vec<f32>>,
    pub momentum: f32,
    pub eps: f32,
}

impl BatchNorm2d {
    pub fn new(name: &str, c: usize, rng: &mut ChaCha8Rng) -> Result<BatchNorm2d> {
        Ok(BatchNorm2d {
            gamma: Parameter::new(format!("{name}.gamma"), &[c], gaussian(rng, c, 1.0, INIT_SIGMA))?,
            beta: Parameter::new(format!("{name}.beta"), &[c], vec![0.0; c])?,
            running_mean: RefCell::new(vec![0.0; c]),
            running_var: RefCell::new(vec![1.0; c]),
            momentum: 0.1,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        if train {
            let (y, mean, var) = x.batch_norm_train(&self.gamma.tensor, &self.beta.tensor, self.eps)?;
            let mut rm = self.running_mean.borrow_mut();
            let mut rv = self.running_var.borrow_mut();
            for c in 0..rm.len() {
                rm[c] = (1.0 - self.momentum) * rm[c] + self.momentum * mean[c];
                rv[c] = (1.0 - self.momentum) * rv[c] + self.momentum * var[c];
            }
            Ok(y)
        } else {
            x.batch_norm_eval(
                &self.gamma.tensor,
                &self.beta.tensor,
                &self.running_mean.borrow(),
                &self.running_var.borrow(),
                self.eps,
            )
        }
    }

    pub fn params(&self) -> Vec<Parameter> {
        vec![self.gamma.clone(), self.beta.clone()]
    }

    /// Running statistics as named checkpoint state buffers.
    pub fn state(&self) -> Vec<(String, Vec<f32>)> {
        let base =
            self.gamma.name.strip_suffix(".gamma").unwrap_or(&self.gamma.name).to_string();
        vec![
            (format!("{base}.running_mean"), self.running_mean.borrow().clone()),
            (format!("{base}.running_var"), self.running_var.borrow().clone()),
        ]
    }

    pub fn set_state(&self, mean: &[f32], var: &[f32]) -> Result<()> {
        if mean.len() != self.running_mean.borrow().len()
            || var.len() != self.running_var.borrow().len()
        {
            return Err(Error::arg("batch_norm", "running-stat length mismatch"));
        }
        self.running_mean.borrow_mut().copy_from_slice(mean);
        self.running_var.borrow_mut().copy_from_slice(var);
        Ok(())
    }
}

pub struct PReLU {
    pub slope: Parameter,
}

impl PReLU {
    pub fn new(name: &str, c: usize) -> Result<PReLU> {
        Ok(PReLU { slope: Parameter::new(format!("{name}.slope"), &[c], vec![0.25; c])? })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.prelu(&self.slope.tensor)
    }

    pub fn params(&self) -> Vec<Parameter> {
        vec![self.slope.clone()]
    }
}

pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn new(name: &str, in_f: usize, out_f: usize, rng: &mut ChaCha8Rng) -> Result<Dense> {
        Ok(Dense {
            weight: Parameter::new(
                format!("{name}.weight"),
                &[out_f, in_f],
                gaussian(rng, out_f * in_f, 0.0, INIT_SIGMA),
            )?,
            bias: Parameter::new(format!("{name}.bias"), &[out_f], vec![0.0; out_f])?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.dense(&self.weight.tensor, &self.bias.tensor)
    }

    pub fn params(&self) -> Vec<Parameter> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}

/// Dropout owning its own seeded stream, so forward order alone determines
/// the masks and runs stay reproducible.
pub struct Dropout {
    pub p: f32,
    rng: RefCell<ChaCha8Rng>,
}

impl Dropout {
    pub fn new(p: f32, seed: u64) -> Dropout {
        Dropout { p, rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)) }
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        if train {
            x.dropout(self.p, &mut self.rng.borrow_mut())
        } else {
            Ok(x.clone())
        }
    }

    /// Reset the mask stream (used when replaying a training run).
    pub fn reseed(&self, seed: u64) {
        *self.rng.borrow_mut() = ChaCha8Rng::seed_from_u64(seed);
    }
}

/// Scale a channel ladder by a width multiplier, never dropping below 1.
pub fn scaled(base: usize, width_multiplier: f32) -> usize {
    ((base as f32 * width_multiplier).round() as usize).max(1)
}

/// Reject duplicate parameter names — they double as checkpoint keys.
pub fn check_unique_names(params: &[Parameter]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for p in params {
        if !seen.insert(p.name.as_str()) {
            return Err(Error::arg("parameters", format!("duplicate name {}", p.name)));
        }
    }
    Ok(())
}
