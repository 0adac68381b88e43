//! Discriminators: an eight-conv global classifier with a dense sigmoid head,
//! and a four-conv patch classifier emitting a sigmoid grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::layers::{check_unique_names, scaled, Conv2d, Dense};
use crate::tensor::{Parameter, Tensor};

/// Negative slope for every discriminator leaky-ReLU.
pub const LEAKY_SLOPE: f32 = 0.35;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorConfig {
    pub width_multiplier: f32,
    pub in_channels: usize,
    /// Input spatial size; the global head's dense layer is sized from it.
    pub input_h: usize,
    pub input_w: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { width_multiplier: 1.0, in_channels: 2, input_h: 64, input_w: 512 }
    }
}

/// Eight 3x3 convs, channels 64,64,128,128,256,256,512,512 (scaled), strides
/// alternating 1/2, each followed by leaky-ReLU; then dense -> leaky-ReLU ->
/// dense -> sigmoid. Output is [N,1] in (0,1).
pub struct GlobalDiscriminator {
    pub cfg: DiscriminatorConfig,
    convs: Vec<Conv2d>,
    dense1: Dense,
    dense2: Dense,
    flat_len: usize,
}

impl GlobalDiscriminator {
    pub fn build(cfg: &DiscriminatorConfig, seed: u64) -> Result<GlobalDiscriminator> {
        if !(cfg.width_multiplier > 0.0 && cfg.width_multiplier <= 1.0) {
            return Err(Error::arg("discriminator", "width_multiplier must be in (0,1]"));
        }
        // four stride-2 convs: each spatial extent must survive /2 four times
        if cfg.input_h % 16 != 0 || cfg.input_w % 16 != 0 || cfg.input_h < 16 || cfg.input_w < 16 {
            return Err(Error::arg(
                "discriminator",
                format!("input {}x{} not divisible by the stride-2 chain", cfg.input_h, cfg.input_w),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ladder = [64, 64, 128, 128, 256, 256, 512, 512].map(|c| scaled(c, cfg.width_multiplier));
        let mut convs = Vec::with_capacity(8);
        let mut in_c = cfg.in_channels;
        for (i, &out_c) in ladder.iter().enumerate() {
            let stride = if i % 2 == 0 { 1 } else { 2 };
            convs.push(Conv2d::new_he(&format!("d.conv{i}"), in_c, out_c, 3, stride, 1, &mut rng)?);
            in_c = out_c;
        }
        let flat_len = ladder[7] * (cfg.input_h / 16) * (cfg.input_w / 16);
        let hidden = scaled(1024, cfg.width_multiplier);
        let dense1 = Dense::new("d.dense1", flat_len, hidden, &mut rng)?;
        let dense2 = Dense::new("d.dense2", hidden, 1, &mut rng)?;
        let net = GlobalDiscriminator { cfg: cfg.clone(), convs, dense1, dense2, flat_len };
        check_unique_names(&net.params())?;
        Ok(net)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for conv in &self.convs {
            y = conv.forward(&y)?.leaky_relu(LEAKY_SLOPE)?;
        }
        let n = y.shape()[0];
        let y = y.reshape(&[n, self.flat_len])?;
        let y = self.dense1.forward(&y)?.leaky_relu(LEAKY_SLOPE)?;
        self.dense2.forward(&y)?.sigmoid()
    }

    pub fn params(&self) -> Vec<Parameter> {
        let mut p: Vec<Parameter> = self.convs.iter().flat_map(|c| c.params()).collect();
        p.extend(self.dense1.params());
        p.extend(self.dense2.params());
        p
    }
}

/// Four stride-2 3x3 convs (64,128,256,512 scaled) with leaky-ReLU, then a
/// 1x1 conv and sigmoid: one output per 16x16 receptive patch.
pub struct PatchDiscriminator {
    pub cfg: DiscriminatorConfig,
    convs: Vec<Conv2d>,
    head: Conv2d,
}

impl PatchDiscriminator {
    pub fn build(cfg: &DiscriminatorConfig, seed: u64) -> Result<PatchDiscriminator> {
        if !(cfg.width_multiplier > 0.0 && cfg.width_multiplier <= 1.0) {
            return Err(Error::arg("discriminator", "width_multiplier must be in (0,1]"));
        }
        if cfg.input_h % 16 != 0 || cfg.input_w % 16 != 0 || cfg.input_h < 16 || cfg.input_w < 16 {
            return Err(Error::arg(
                "discriminator",
                format!("input {}x{} not divisible by the stride-2 chain", cfg.input_h, cfg.input_w),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ladder = [64, 128, 256, 512].map(|c| scaled(c, cfg.width_multiplier));
        let mut convs = Vec::with_capacity(4);
        let mut in_c = cfg.in_channels;
        for (i, &out_c) in ladder.iter().enumerate() {
            convs.push(Conv2d::new_he(&format!("pd.conv{i}"), in_c, out_c, 3, 2, 1, &mut rng)?);
            in_c = out_c;
        }
        let head = Conv2d::new_he("pd.head", ladder[3], 1, 1, 1, 0, &mut rng)?;
        let net = PatchDiscriminator { cfg: cfg.clone(), convs, head };
        check_unique_names(&net.params())?;
        Ok(net)
    }

    /// Output shape [N, 1, H/16, W/16], values in (0,1).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for conv in &self.convs {
            y = conv.forward(&y)?.leaky_relu(LEAKY_SLOPE)?;
        }
        self.head.forward(&y)?.sigmoid()
    }

    pub fn params(&self) -> Vec<Parameter> {
        let mut p: Vec<Parameter> = self.convs.iter().flat_map(|c| c.params()).collect();
        p.extend(self.head.params());
        p
    }
}
