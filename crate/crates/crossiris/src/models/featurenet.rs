//! Fixed random feature extractor for the perceptual loss: three stride-2
//! conv+ReLU blocks (16/32/64 channels). Weights are seeded constants held in
//! non-leaf tensors, so no gradient ever reaches them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::models::layers::gaussian;
use crate::tensor::Tensor;

pub struct FeatureNet {
    /// (weight [O,C,3,3], bias [O]) per block; constants, not Parameters.
    layers: Vec<(Tensor, Tensor)>,
    pub seed: u64,
}

impl FeatureNet {
    pub fn build(in_channels: usize, seed: u64) -> Result<FeatureNet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut in_c = in_channels;
        for out_c in [16usize, 32, 64] {
            let w = Tensor::from_vec(
                &[out_c, in_c, 3, 3],
                gaussian(&mut rng, out_c * in_c * 9, 0.0, 0.1),
            )?;
            let b = Tensor::from_vec(&[out_c], vec![0.0; out_c])?;
            layers.push((w, b));
            in_c = out_c;
        }
        Ok(FeatureNet { layers, seed })
    }

    /// Feature map [N, 64, H/8, W/8]; input H,W must be divisible by 8.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for (w, b) in &self.layers {
            y = y.conv2d(w, b, 2, 1)?.relu()?;
        }
        Ok(y)
    }
}
