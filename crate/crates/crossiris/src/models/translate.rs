//! Residual translation generator, optionally with a sub-pixel 2x
//! super-resolution stage before the output convolution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::layers::{check_unique_names, scaled, BatchNorm2d, Conv2d, PReLU};
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TranslateConfig {
    /// Shrink factor on the 64-feature-map ladder.
    pub width_multiplier: f32,
    /// Residual block count.
    pub blocks: usize,
    /// Append conv -> pixel_shuffle(2) -> PReLU so output H,W double.
    pub super_resolve: bool,
    pub in_channels: usize,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        TranslateConfig { width_multiplier: 1.0, blocks: 16, super_resolve: false, in_channels: 1 }
    }
}

impl TranslateConfig {
    /// CPU-budget sizing used by the acceptance experiments.
    pub fn desk_scale() -> Self {
        TranslateConfig { width_multiplier: 0.25, blocks: 4, ..Default::default() }
    }
}

struct ResBlock {
    conv1: Conv2d,
    bn1: BatchNorm2d,
    act: PReLU,
    conv2: Conv2d,
    bn2: BatchNorm2d,
}

impl ResBlock {
    fn new(name: &str, c: usize, rng: &mut ChaCha8Rng) -> Result<ResBlock> {
        Ok(ResBlock {
            conv1: Conv2d::new(&format!("{name}.conv1"), c, c, 3, 1, 1, rng)?,
            bn1: BatchNorm2d::new(&format!("{name}.bn1"), c, rng)?,
            act: PReLU::new(&format!("{name}.act"), c)?,
            conv2: Conv2d::new(&format!("{name}.conv2"), c, c, 3, 1, 1, rng)?,
            bn2: BatchNorm2d::new(&format!("{name}.bn2"), c, rng)?,
        })
    }

    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.bn1.forward(&self.conv1.forward(x)?, train)?;
        let y = self.act.forward(&y)?;
        let y = self.bn2.forward(&self.conv2.forward(&y)?, train)?;
        y.add(x)
    }

    fn params(&self) -> Vec<Parameter> {
        [
            self.conv1.params(),
            self.bn1.params(),
            self.act.params(),
            self.conv2.params(),
            self.bn2.params(),
        ]
        .concat()
    }
}

/// Image-to-image generator: head conv+PReLU, B residual blocks, optional
/// sub-pixel upsampler, then a linear tail conv back to one channel. The
/// linear tail means all-zero parameters map any input to the zero image.
pub struct TranslateGenerator {
    pub cfg: TranslateConfig,
    head: Conv2d,
    head_act: PReLU,
    blocks: Vec<ResBlock>,
    sr: Option<(Conv2d, PReLU)>,
    tail: Conv2d,
}

impl TranslateGenerator {
    pub fn build(cfg: &TranslateConfig, seed: u64) -> Result<TranslateGenerator> {
        if !(cfg.width_multiplier > 0.0 && cfg.width_multiplier <= 1.0) {
            return Err(Error::arg("translate", "width_multiplier must be in (0,1]"));
        }
        if cfg.blocks == 0 {
            return Err(Error::arg("translate", "blocks must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = scaled(64, cfg.width_multiplier);
        let head = Conv2d::new("g.head", cfg.in_channels, f, 3, 1, 1, &mut rng)?;
        let head_act = PReLU::new("g.head_act", f)?;
        let blocks = (0..cfg.blocks)
            .map(|i| ResBlock::new(&format!("g.block{i}"), f, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let sr = if cfg.super_resolve {
            Some((
                Conv2d::new("g.sr_conv", f, 4 * f, 3, 1, 1, &mut rng)?,
                PReLU::new("g.sr_act", f)?,
            ))
        } else {
            None
        };
        let tail = Conv2d::new("g.tail", f, 1, 3, 1, 1, &mut rng)?;
        let net = TranslateGenerator { cfg: cfg.clone(), head, head_act, blocks, sr, tail };
        check_unique_names(&net.params())?;
        Ok(net)
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut y = self.head_act.forward(&self.head.forward(x)?)?;
        for b in &self.blocks {
            y = b.forward(&y, train)?;
        }
        if let Some((conv, act)) = &self.sr {
            y = act.forward(&conv.forward(&y)?.pixel_shuffle(2)?)?;
        }
        self.tail.forward(&y)
    }

    pub fn params(&self) -> Vec<Parameter> {
        let mut p = [self.head.params(), self.head_act.params()].concat();
        for b in &self.blocks {
            p.extend(b.params());
        }
        if let Some((conv, act)) = &self.sr {
            p.extend(conv.params());
            p.extend(act.params());
        }
        p.extend(self.tail.params());
        p
    }

    /// Batch-norm running statistics, ordered by block.
    pub fn state(&self) -> Vec<(String, Vec<f32>)> {
        self.blocks.iter().flat_map(|b| [b.bn1.state(), b.bn2.state()].concat()).collect()
    }

    /// Restore running statistics saved by [`Self::state`]; entries must
    /// match by name and order.
    pub fn set_state(&self, entries: &[(String, Vec<f32>)]) -> Result<()> {
        let own = self.state();
        if entries.len() != own.len() {
            return Err(Error::arg(
                "translate",
                format!("checkpoint has {} state buffers, net has {}", entries.len(), own.len()),
            ));
        }
        for ((name, _), (ckpt_name, _)) in own.iter().zip(entries) {
            if name != ckpt_name {
                return Err(Error::arg(
                    "translate",
                    format!("state mismatch: net {name} vs checkpoint {ckpt_name}"),
                ));
            }
        }
        for (b, pair) in self.blocks.iter().zip(entries.chunks_exact(4)) {
            b.bn1.set_state(&pair[0].1, &pair[1].1)?;
            b.bn2.set_state(&pair[2].1, &pair[3].1)?;
        }
        Ok(())
    }
}
