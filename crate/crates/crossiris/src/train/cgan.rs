//! Adversarial training of the translation generator: alternating
//! discriminator/generator updates on aligned cross-spectral pairs.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::data::bicubic_resize;
use crate::data::manifest::{DatasetManifest, Resolution, Split};
use crate::data::{Image2D, Spectrum};
use crate::error::{Error, Result};
use crate::losses::{
    adversarial_d_loss, adversarial_g_loss, l2_reconstruction, perceptual, total_cgan,
};
use crate::models::{
    DiscriminatorConfig, FeatureNet, GlobalDiscriminator, TranslateConfig, TranslateGenerator,
};
use crate::tensor::Tensor;
use crate::train::adam::Adam;
use crate::train::batch::{aligned_pairs, batch_tensor, epoch_batches, AlignedPair};

fn resolution_dims(res: Resolution) -> (usize, usize) {
    match res {
        Resolution::Hr => (64, 512),
        Resolution::Lr => (32, 256),
    }
}

/// Direction and sizing of one translation training task.
#[derive(Clone, Copy, Debug)]
pub struct TranslationTask {
    pub input_spec: Spectrum,
    pub input_res: Resolution,
    pub target_spec: Spectrum,
    pub target_res: Resolution,
}

impl TranslationTask {
    pub fn super_resolve(&self) -> bool {
        self.input_res == Resolution::Lr && self.target_res == Resolution::Hr
    }
}

pub struct TrainedTranslator {
    pub gen: TranslateGenerator,
    pub disc: GlobalDiscriminator,
    pub task: TranslationTask,
    /// (step, d_loss, g_adv, l2, perceptual, total, d_accuracy) per step.
    pub log: Vec<(usize, f32, f32, f32, f32, f32, f32)>,
}

impl TrainedTranslator {
    /// Final-step training L2; used by the reduced-objective tests.
    pub fn last_l2(&self) -> f32 {
        self.log.last().map(|r| r.3).unwrap_or(f32::NAN)
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "step,d_loss,g_adv,l2,perceptual,total,d_accuracy")?;
        for (s, d, a, l2, p, t, acc) in &self.log {
            writeln!(f, "{s},{d},{a},{l2},{p},{t},{acc}")?;
        }
        Ok(())
    }
}

/// Upsample the conditioning input to the target resolution outside the
/// graph so the discriminator can see (candidate, condition) channel pairs.
fn condition_tensor(inputs: &[&Image2D], th: usize, tw: usize) -> Result<Tensor> {
    if inputs.iter().all(|i| i.h == th && i.w == tw) {
        return batch_tensor(inputs);
    }
    let resized: Vec<Image2D> = inputs.iter().map(|i| bicubic_resize(i, th, tw)).collect();
    batch_tensor(&resized.iter().collect::<Vec<_>>())
}

/// Train one translation generator with its global discriminator.
/// Deterministic in (cfg.seed, seed_offset); `seed_offset` separates the
/// stages of the two-stage pipeline.
pub fn train_cgan(
    manifest: &DatasetManifest,
    cfg: &RunConfig,
    task: TranslationTask,
    seed_offset: u64,
) -> Result<TrainedTranslator> {
    cfg.validate()?;
    let pairs = aligned_pairs(
        manifest,
        Split::Train,
        task.input_spec,
        task.input_res,
        task.target_spec,
        task.target_res,
    )?;
    if pairs.len() < cfg.batch_size {
        return Err(Error::arg(
            "train_cgan",
            format!("{} training pairs < batch size {}", pairs.len(), cfg.batch_size),
        ));
    }
    let seed = cfg.seed.wrapping_add(seed_offset);
    let gcfg = TranslateConfig { super_resolve: task.super_resolve(), ..cfg.translate.clone() };
    let gen = TranslateGenerator::build(&gcfg, seed)?;
    let (th, tw) = resolution_dims(task.target_res);
    let dcfg = DiscriminatorConfig {
        width_multiplier: cfg.disc_width,
        in_channels: 2,
        input_h: th,
        input_w: tw,
    };
    let disc = GlobalDiscriminator::build(&dcfg, seed.wrapping_add(1))?;
    let feat = FeatureNet::build(1, cfg.feature_seed)?;
    let mut opt_g = Adam::new(&gen.params(), cfg.adam)?;
    let mut opt_d = Adam::new(&disc.params(), cfg.adam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));

    let mut log = Vec::with_capacity(cfg.steps);
    let mut step = 0usize;
    'train: loop {
        for idx in epoch_batches(pairs.len(), cfg.batch_size, &mut rng) {
            if step >= cfg.steps {
                break 'train;
            }
            let sel: Vec<&AlignedPair> = idx.iter().map(|&i| &pairs[i]).collect();
            let x = batch_tensor(&sel.iter().map(|p| &p.input).collect::<Vec<_>>())?;
            let y = batch_tensor(&sel.iter().map(|p| &p.target).collect::<Vec<_>>())?;
            let cond = condition_tensor(&sel.iter().map(|p| &p.input).collect::<Vec<_>>(), th, tw)?;

            // one generator forward per step; its graph feeds the G update
            // while the D update sees only the detached copy
            let fake = gen.forward(&x, true)?;

            // a zero adversarial weight disables the discriminator entirely
            let (d_loss_v, acc, adv) = if cfg.weights.lambda1 > 0.0 {
                let d_real = disc.forward(&Tensor::concat_channels(&[y.clone(), cond.clone()])?)?;
                let d_fake_det =
                    disc.forward(&Tensor::concat_channels(&[fake.detach(), cond.clone()])?)?;
                let r = d_real.to_vec();
                let f = d_fake_det.to_vec();
                let hits = r.iter().filter(|&&v| v > 0.5).count()
                    + f.iter().filter(|&&v| v < 0.5).count();
                let acc = hits as f32 / (r.len() + f.len()) as f32;
                let d_loss = adversarial_d_loss(&d_real, &d_fake_det)?;
                let d_loss_v = d_loss.value();
                d_loss.backward()?;
                opt_d.step(&disc.params())?;

                let d_fake = disc.forward(&Tensor::concat_channels(&[fake.clone(), cond])?)?;
                (d_loss_v, acc, adversarial_g_loss(&d_fake)?)
            } else {
                (0.0, 0.5, Tensor::scalar(0.0))
            };
            let l2 = l2_reconstruction(&fake, &y)?;
            let perc = if cfg.weights.lambda2 > 0.0 {
                perceptual(&fake, &y, &feat)?
            } else {
                Tensor::scalar(0.0)
            };
            let total = total_cgan(&l2, &adv, &perc, &cfg.weights)?;
            let (adv_v, l2_v, perc_v, total_v) = (adv.value(), l2.value(), perc.value(), total.value());
            total.backward()?;
            opt_g.step(&gen.params())?;
            // the G backward also deposited gradients on D's parameters;
            // clear them so the next D step starts clean (grad isolation)
            for p in disc.params() {
                p.tensor.zero_grad();
            }

            log.push((step, d_loss_v, adv_v, l2_v, perc_v, total_v, acc));
            step += 1;
        }
    }
    Ok(TrainedTranslator { gen, disc, task, log })
}

/// Scenario task table.
pub fn s1_task() -> TranslationTask {
    TranslationTask {
        input_spec: Spectrum::Nir,
        input_res: Resolution::Hr,
        target_spec: Spectrum::Vis,
        target_res: Resolution::Hr,
    }
}

pub fn s3_task() -> TranslationTask {
    TranslationTask {
        input_spec: Spectrum::Vis,
        input_res: Resolution::Hr,
        target_spec: Spectrum::Nir,
        target_res: Resolution::Hr,
    }
}

pub fn s2a_task() -> TranslationTask {
    TranslationTask {
        input_spec: Spectrum::Nir,
        input_res: Resolution::Lr,
        target_spec: Spectrum::Vis,
        target_res: Resolution::Hr,
    }
}

/// Stage pair for the separately trained pipeline: low-resolution
/// translation, then same-spectrum 2x super-resolution.
pub fn s2b_tasks() -> (TranslationTask, TranslationTask) {
    (
        TranslationTask {
            input_spec: Spectrum::Nir,
            input_res: Resolution::Lr,
            target_spec: Spectrum::Vis,
            target_res: Resolution::Lr,
        },
        TranslationTask {
            input_spec: Spectrum::Vis,
            input_res: Resolution::Lr,
            target_spec: Spectrum::Vis,
            target_res: Resolution::Hr,
        },
    )
}

/// Train the two stages independently; composition happens at scoring time.
pub fn run_scenario_2b(
    manifest: &DatasetManifest,
    cfg: &RunConfig,
) -> Result<(TrainedTranslator, TrainedTranslator)> {
    let (t1, t2) = s2b_tasks();
    let stage1 = train_cgan(manifest, cfg, t1, 0)?;
    let stage2 = train_cgan(manifest, cfg, t2, 100)?;
    Ok((stage1, stage2))
}

/// Run a generator over one strip (adds and strips the batch axis).
pub fn translate_image(gen: &TranslateGenerator, img: &Image2D) -> Result<Image2D> {
    let x = batch_tensor(&[img])?;
    let y = gen.forward(&x, false)?;
    let s = y.shape().to_vec();
    let mut out = Image2D::from_vec(s[2], s[3], y.to_vec())?;
    out.clamp01();
    Ok(out)
}
