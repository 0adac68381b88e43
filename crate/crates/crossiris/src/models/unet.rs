//! U-Net generator: conv-conv-ReLU encoder blocks with 2x2 max-pool
//! downsampling, a bottleneck exposed as a pooled embedding, and a decoder
//! with 2x2 transpose-conv upsampling and encoder skip concatenation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::layers::{check_unique_names, Conv2d, ConvTranspose2d, Dropout};
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct UNetConfig {
    /// Downsampling steps; bottleneck spatial size is input / 2^depth.
    pub depth: usize,
    /// Channels of the first encoder block; doubled at every step.
    pub base_channels: usize,
    pub in_channels: usize,
    /// Dropout probability in the first two decoder blocks during training
    /// (the stochastic stand-in for an explicit noise input).
    pub dropout: f32,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig { depth: 4, base_channels: 16, in_channels: 1, dropout: 0.5 }
    }
}

impl UNetConfig {
    pub fn desk_scale() -> Self {
        UNetConfig { base_channels: 4, ..Default::default() }
    }

    /// Embedding length: bottleneck channel count after global pooling.
    pub fn embedding_len(&self) -> usize {
        self.base_channels << self.depth
    }
}

struct ConvBlock {
    conv1: Conv2d,
    conv2: Conv2d,
}

impl ConvBlock {
    fn new(name: &str, in_c: usize, out_c: usize, rng: &mut ChaCha8Rng) -> Result<ConvBlock> {
        Ok(ConvBlock {
            conv1: Conv2d::new_he(&format!("{name}.conv1"), in_c, out_c, 3, 1, 1, rng)?,
            conv2: Conv2d::new_he(&format!("{name}.conv2"), out_c, out_c, 3, 1, 1, rng)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.conv2.forward(&self.conv1.forward(x)?.relu()?)?.relu()
    }

    fn params(&self) -> Vec<Parameter> {
        [self.conv1.params(), self.conv2.params()].concat()
    }
}

struct DecoderStage {
    up: ConvTranspose2d,
    block: ConvBlock,
    dropout: Option<Dropout>,
}

pub struct UNetGenerator {
    pub cfg: UNetConfig,
    encoders: Vec<ConvBlock>,
    bottleneck: ConvBlock,
    decoders: Vec<DecoderStage>,
    out_conv: Conv2d,
}

impl UNetGenerator {
    /// `name` prefixes every parameter so the two coupled generators can
    /// share one checkpoint file without key collisions.
    pub fn build(cfg: &UNetConfig, name: &str, seed: u64) -> Result<UNetGenerator> {
        if cfg.depth < 2 {
            return Err(Error::arg("unet", "depth must be >= 2"));
        }
        if cfg.base_channels == 0 {
            return Err(Error::arg("unet", "base_channels must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoders = Vec::with_capacity(cfg.depth);
        let mut in_c = cfg.in_channels;
        for d in 0..cfg.depth {
            let out_c = cfg.base_channels << d;
            encoders.push(ConvBlock::new(&format!("{name}.enc{d}"), in_c, out_c, &mut rng)?);
            in_c = out_c;
        }
        let bott_c = cfg.base_channels << cfg.depth;
        let bottleneck = ConvBlock::new(&format!("{name}.bottleneck"), in_c, bott_c, &mut rng)?;
        let mut decoders = Vec::with_capacity(cfg.depth);
        let mut cur_c = bott_c;
        for d in (0..cfg.depth).rev() {
            let skip_c = cfg.base_channels << d;
            let i = cfg.depth - 1 - d; // decoder order, shallowest skip last
            let up =
                ConvTranspose2d::new_he(&format!("{name}.dec{i}.up"), cur_c, skip_c, 2, 2, &mut rng)?;
            let block =
                ConvBlock::new(&format!("{name}.dec{i}.block"), 2 * skip_c, skip_c, &mut rng)?;
            let dropout = (i < 2 && cfg.dropout > 0.0)
                .then(|| Dropout::new(cfg.dropout, seed.wrapping_add(1000 + i as u64)));
            decoders.push(DecoderStage { up, block, dropout });
            cur_c = skip_c;
        }
        let out_conv = Conv2d::new_he(&format!("{name}.out"), cur_c, 1, 1, 1, 0, &mut rng)?;
        let net = UNetGenerator { cfg: cfg.clone(), encoders, bottleneck, decoders, out_conv };
        check_unique_names(&net.params())?;
        Ok(net)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::shape("unet", "expected N,C,H,W input"));
        }
        let div = 1usize << self.cfg.depth;
        if s[2] % div != 0 || s[3] % div != 0 || s[2] < div || s[3] < div {
            return Err(Error::shape(
                "unet",
                format!("spatial dims {}x{} not divisible by 2^{}", s[2], s[3], self.cfg.depth),
            ));
        }
        Ok(())
    }

    /// Full pass returning (reconstruction, bottleneck activations).
    pub fn forward_full(&self, x: &Tensor, train: bool) -> Result<(Tensor, Tensor)> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(self.cfg.depth);
        let mut y = x.clone();
        for enc in &self.encoders {
            let f = enc.forward(&y)?;
            y = f.max_pool2d(2, 2)?;
            skips.push(f);
        }
        let bott = self.bottleneck.forward(&y)?;
        let mut y = bott.clone();
        for dec in &self.decoders {
            let up = dec.up.forward(&y)?;
            let skip = skips.pop().expect("one skip per decoder stage");
            y = dec.block.forward(&Tensor::concat_channels(&[up, skip])?)?;
            if let Some(d) = &dec.dropout {
                y = d.forward(&y, train)?;
            }
        }
        Ok((self.out_conv.forward(&y)?, bott))
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        Ok(self.forward_full(x, train)?.0)
    }

    /// Channel-wise global average pooling of the bottleneck: shape
    /// [N, base_channels * 2^depth]. Gradients flow through it, so it can sit
    /// inside the coupling loss.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut y = x.clone();
        for enc in &self.encoders {
            y = enc.forward(&y)?.max_pool2d(2, 2)?;
        }
        self.bottleneck.forward(&y)?.global_avg_pool()
    }

    pub fn params(&self) -> Vec<Parameter> {
        let mut p: Vec<Parameter> = self.encoders.iter().flat_map(|e| e.params()).collect();
        p.extend(self.bottleneck.params());
        for d in &self.decoders {
            p.extend(d.up.params());
            p.extend(d.block.params());
        }
        p.extend(self.out_conv.params());
        p
    }

    /// Reset decoder dropout streams for a reproducible replay.
    pub fn reseed_dropout(&self, seed: u64) {
        for (i, d) in self.decoders.iter().enumerate() {
            if let Some(drop) = &d.dropout {
                drop.reseed(seed.wrapping_add(1000 + i as u64));
            }
        }
    }
}
