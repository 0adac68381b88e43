//! Loss terms: clamped-log adversarial objectives, contrastive coupling,
//! per-element L2 reconstruction, perceptual distance through the frozen
//! feature net, and the weighted composite objectives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FeatureNet;
use crate::tensor::Tensor;

/// Clamp for log terms; keeps adversarial losses finite and nonnegative.
pub const LOG_EPS: f32 = 1e-7;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Adversarial weight in the translation objective.
    pub lambda1: f32,
    /// Perceptual weight in the translation objective.
    pub lambda2: f32,
    /// Adversarial weight in the coupled objective.
    pub lambda3: f32,
    /// Perceptual weight in the coupled objective.
    pub lambda4: f32,
    /// Reconstruction weight in the coupled objective.
    pub lambda5: f32,
    /// Contrastive margin m.
    pub margin: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 1e-6,
            lambda2: 2e-3,
            lambda3: 1.0,
            lambda4: 0.3,
            lambda5: 0.3,
            margin: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.lambda1, self.lambda2, self.lambda3, self.lambda4, self.lambda5];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::arg("loss_weights", "lambdas must be finite and >= 0"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::arg("loss_weights", "margin must be > 0"));
        }
        Ok(())
    }
}

fn one_minus(x: &Tensor) -> Result<Tensor> {
    x.scale(-1.0)?.add_scalar(1.0)
}

/// Discriminator objective on its own outputs:
/// -[mean log D(real) + mean log(1 - D(fake))].
/// `d_fake` must come from a detached generator output.
pub fn adversarial_d_loss(d_real: &Tensor, d_fake: &Tensor) -> Result<Tensor> {
    if d_real.shape() != d_fake.shape() {
        return Err(Error::shape("adversarial_d_loss", "real/fake output shapes differ"));
    }
    let real_term = d_real.log_clamped(LOG_EPS)?.mean_all()?;
    let fake_term = one_minus(d_fake)?.log_clamped(LOG_EPS)?.mean_all()?;
    real_term.add(&fake_term)?.scale(-1.0)
}

/// Non-saturating generator objective: -mean log D(fake).
pub fn adversarial_g_loss(d_fake: &Tensor) -> Result<Tensor> {
    d_fake.log_clamped(LOG_EPS)?.mean_all()?.scale(-1.0)
}

/// Contrastive loss for one embedding pair. Genuine (y = 0): Dz^2 / 2.
/// Impostor (y = 1): max(0, m - Dz)^2 / 2 with Dz the Euclidean distance.
pub fn contrastive(z1: &Tensor, z2: &Tensor, y: u8, m: f32) -> Result<Tensor> {
    if z1.shape() != z2.shape() {
        return Err(Error::shape("contrastive", "embedding lengths differ"));
    }
    if y > 1 {
        return Err(Error::arg("contrastive", "label must be 0 or 1"));
    }
    let dz2 = z1.sub(z2)?.sqr()?.sum_all()?;
    if y == 0 {
        dz2.scale(0.5)
    } else {
        let dz = dz2.sqrt_eps(1e-12)?;
        dz.scale(-1.0)?.add_scalar(m)?.relu()?.sqr()?.scale(0.5)
    }
}

/// Batched contrastive loss over embedding rows: mean over pairs of the
/// per-pair contrastive term. `labels[i]` = 0 genuine, 1 impostor. A balanced
/// batch makes this the sampled estimator of the all-pairs coupling sum.
pub fn coupling_loss(z1: &Tensor, z2: &Tensor, labels: &[u8], m: f32) -> Result<Tensor> {
    let (n, _l) = match z1.shape() {
        [n, l] => (*n, *l),
        s => return Err(Error::shape("coupling_loss", format!("expected [N,L], got {s:?}"))),
    };
    if z2.shape() != z1.shape() {
        return Err(Error::shape("coupling_loss", "embedding batch shapes differ"));
    }
    if n == 0 {
        return Err(Error::Empty("coupling_loss"));
    }
    if labels.len() != n {
        return Err(Error::shape("coupling_loss", "label count != batch size"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::arg("coupling_loss", "labels must be 0 or 1"));
    }
    let dz2 = z1.sub(z2)?.sqr()?.sum_rows()?; // [N]
    let genuine_w: Vec<f32> = labels.iter().map(|&y| if y == 0 { 1.0 } else { 0.0 }).collect();
    let impostor_w: Vec<f32> = labels.iter().map(|&y| f32::from(y)).collect();
    let genuine = dz2.mul(&Tensor::from_vec(&[n], genuine_w)?)?;
    let hinge = dz2.sqrt_eps(1e-12)?.scale(-1.0)?.add_scalar(m)?.relu()?.sqr()?;
    let impostor = hinge.mul(&Tensor::from_vec(&[n], impostor_w)?)?;
    genuine.add(&impostor)?.scale(0.5)?.mean_all()
}

/// Mean squared error over all elements.
pub fn l2_reconstruction(output: &Tensor, target: &Tensor) -> Result<Tensor> {
    if output.shape() != target.shape() {
        return Err(Error::shape("l2_reconstruction", "output/target shapes differ"));
    }
    output.sub(target)?.sqr()?.mean_all()
}

/// Mean absolute distance between frozen feature maps of output and target.
/// No parameters live inside `v`, so gradient reaches only `output`/`target`.
pub fn perceptual(output: &Tensor, target: &Tensor, v: &FeatureNet) -> Result<Tensor> {
    if output.shape() != target.shape() {
        return Err(Error::shape("perceptual", "output/target shapes differ"));
    }
    v.forward(output)?.sub(&v.forward(target)?)?.abs()?.mean_all()
}

/// Translation objective: L2 + lambda1 * adversarial + lambda2 * perceptual.
pub fn total_cgan(l2: &Tensor, adv: &Tensor, perc: &Tensor, w: &LossWeights) -> Result<Tensor> {
    l2.add(&adv.scale(w.lambda1)?)?.add(&perc.scale(w.lambda2)?)
}

/// Coupled objective:
/// coupling + lambda3 * adversarial + lambda4 * perceptual + lambda5 * L2,
/// where the adversarial term is the sum over both spectra's discriminators.
pub fn total_cpgan(
    cpl: &Tensor,
    gan: &Tensor,
    perc: &Tensor,
    l2: &Tensor,
    w: &LossWeights,
) -> Result<Tensor> {
    cpl.add(&gan.scale(w.lambda3)?)?
        .add(&perc.scale(w.lambda4)?)?
        .add(&l2.scale(w.lambda5)?)
}
