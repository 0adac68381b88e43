//! Coupled training: two U-Net generators reconstruct their own spectrum
//! while a contrastive loss pulls genuine cross-spectral embedding pairs
//! together and pushes impostor pairs beyond the margin.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::data::manifest::{DatasetManifest, Resolution, Split};
use crate::data::{Image2D, Spectrum};
use crate::error::{Error, Result};
use crate::losses::{
    adversarial_d_loss, adversarial_g_loss, coupling_loss, l2_reconstruction, perceptual,
    total_cpgan,
};
use crate::models::{DiscriminatorConfig, FeatureNet, PatchDiscriminator, UNetGenerator};
use crate::tensor::Tensor;
use crate::train::adam::Adam;
use crate::train::batch::{batch_tensor, load_selection, LoadedStrip, PairSampler};

pub struct TrainedCoupled {
    pub g_vis: UNetGenerator,
    pub g_nir: UNetGenerator,
    pub d_vis: PatchDiscriminator,
    pub d_nir: PatchDiscriminator,
    pub vis_res: Resolution,
    pub nir_res: Resolution,
    /// (step, d_loss, g_adv, coupling, l2, perceptual, total, d_accuracy).
    pub log: Vec<(usize, f32, f32, f32, f32, f32, f32, f32)>,
}

impl TrainedCoupled {
    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "step,d_loss,g_adv,coupling,l2,perceptual,total,d_accuracy")?;
        for (s, d, a, c, l2, p, t, acc) in &self.log {
            writeln!(f, "{s},{d},{a},{c},{l2},{p},{t},{acc}")?;
        }
        Ok(())
    }

    /// Coupling-loss value at the final step.
    pub fn last_coupling(&self) -> f32 {
        self.log.last().map(|r| r.3).unwrap_or(f32::NAN)
    }

    /// Embed one strip with the generator of its spectrum.
    pub fn embed(&self, spectrum: Spectrum, img: &Image2D) -> Result<Vec<f32>> {
        let gen = match spectrum {
            Spectrum::Vis => &self.g_vis,
            Spectrum::Nir => &self.g_nir,
        };
        Ok(gen.embed(&batch_tensor(&[img])?)?.to_vec())
    }
}

fn resolution_dims(res: Resolution) -> (usize, usize) {
    match res {
        Resolution::Hr => (64, 512),
        Resolution::Lr => (32, 256),
    }
}

/// Train the coupled pair. Supports cross-resolution coupling: the two
/// generators are built from one architecture config (equal embedding
/// length) but fed their own resolution.
pub fn train_cpgan(
    manifest: &DatasetManifest,
    cfg: &RunConfig,
    vis_res: Resolution,
    nir_res: Resolution,
) -> Result<TrainedCoupled> {
    cfg.validate()?;
    if cfg.batch_size % 2 != 0 {
        return Err(Error::arg("train_cpgan", "batch_size must be even (balanced pairs)"));
    }
    let vis = load_selection(manifest, Split::Train, Spectrum::Vis, vis_res)?;
    let nir = load_selection(manifest, Split::Train, Spectrum::Nir, nir_res)?;
    let sampler = PairSampler::new(&vis, &nir)?;

    // Both generators start from the same draw: a shared initial feature
    // space keeps genuine pairs close in embedding distance from step one,
    // which is what gives the contrastive term a usable gradient. The two
    // networks still specialize per spectrum as training proceeds.
    let g_vis = UNetGenerator::build(&cfg.unet, "vis", cfg.seed)?;
    let g_nir = UNetGenerator::build(&cfg.unet, "nir", cfg.seed)?;
    let (vh, vw) = resolution_dims(vis_res);
    let (nh, nw) = resolution_dims(nir_res);
    let d_vis = PatchDiscriminator::build(
        &DiscriminatorConfig {
            width_multiplier: cfg.disc_width,
            in_channels: 1,
            input_h: vh,
            input_w: vw,
        },
        cfg.seed.wrapping_add(2),
    )?;
    let d_nir = PatchDiscriminator::build(
        &DiscriminatorConfig {
            width_multiplier: cfg.disc_width,
            in_channels: 1,
            input_h: nh,
            input_w: nw,
        },
        cfg.seed.wrapping_add(3),
    )?;
    let feat = FeatureNet::build(1, cfg.feature_seed)?;

    let gen_params = [g_vis.params(), g_nir.params()].concat();
    let mut opt_g = Adam::new(&gen_params, cfg.adam)?;
    let mut opt_dv = Adam::new(&d_vis.params(), cfg.adam)?;
    let mut opt_dn = Adam::new(&d_nir.params(), cfg.adam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(4));

    let mut log = Vec::with_capacity(cfg.steps);
    let mut step = 0usize;
    'train: loop {
        for batch in sampler.epoch(cfg.batch_size, &mut rng)? {
            if step >= cfg.steps {
                break 'train;
            }
            let x_vis =
                batch_tensor(&batch.vis_idx.iter().map(|&i| &vis[i].image).collect::<Vec<_>>())?;
            let x_nir =
                batch_tensor(&batch.nir_idx.iter().map(|&i| &nir[i].image).collect::<Vec<_>>())?;

            let (rec_vis, bott_vis) = g_vis.forward_full(&x_vis, true)?;
            let (rec_nir, bott_nir) = g_nir.forward_full(&x_nir, true)?;

            // discriminator updates on detached reconstructions; a zero
            // adversarial weight disables both discriminators
            let mut d_loss_v = 0.0f32;
            let mut acc = 0.5f32;
            if cfg.weights.lambda3 > 0.0 {
                acc = 0.0;
                for (disc, opt, real, fake) in [
                    (&d_vis, &mut opt_dv, &x_vis, rec_vis.detach()),
                    (&d_nir, &mut opt_dn, &x_nir, rec_nir.detach()),
                ] {
                    let d_real = disc.forward(real)?;
                    let d_fake = disc.forward(&fake)?;
                    let r = d_real.to_vec();
                    let f = d_fake.to_vec();
                    acc += (r.iter().filter(|&&v| v > 0.5).count()
                        + f.iter().filter(|&&v| v < 0.5).count()) as f32
                        / (r.len() + f.len()) as f32;
                    let d_loss = adversarial_d_loss(&d_real, &d_fake)?;
                    d_loss_v += d_loss.value();
                    d_loss.backward()?;
                    opt.step(&disc.params())?;
                }
                acc /= 2.0;
            }

            // joint generator update
            let z1 = bott_vis.global_avg_pool()?;
            let z2 = bott_nir.global_avg_pool()?;
            let cpl = coupling_loss(&z1, &z2, &batch.labels, cfg.weights.margin)?;
            let adv = if cfg.weights.lambda3 > 0.0 {
                adversarial_g_loss(&d_vis.forward(&rec_vis)?)?
                    .add(&adversarial_g_loss(&d_nir.forward(&rec_nir)?)?)?
            } else {
                Tensor::scalar(0.0)
            };
            let l2 = l2_reconstruction(&rec_vis, &x_vis)?
                .add(&l2_reconstruction(&rec_nir, &x_nir)?)?;
            let perc = if cfg.weights.lambda4 > 0.0 {
                perceptual(&rec_vis, &x_vis, &feat)?.add(&perceptual(&rec_nir, &x_nir, &feat)?)?
            } else {
                Tensor::scalar(0.0)
            };
            let total = total_cpgan(&cpl, &adv, &perc, &l2, &cfg.weights)?;
            let (cpl_v, adv_v, l2_v, perc_v, total_v) =
                (cpl.value(), adv.value(), l2.value(), perc.value(), total.value());
            total.backward()?;
            opt_g.step(&gen_params)?;
            for p in d_vis.params().iter().chain(d_nir.params().iter()) {
                p.tensor.zero_grad();
            }

            log.push((step, d_loss_v, adv_v, cpl_v, l2_v, perc_v, total_v, acc));
            step += 1;
        }
    }
    Ok(TrainedCoupled { g_vis, g_nir, d_vis, d_nir, vis_res, nir_res, log })
}

/// Held-out embedding-distance audit: mean genuine Dz, mean impostor Dz, and
/// the impostor standard deviation.
pub fn embedding_audit(
    model: &TrainedCoupled,
    vis: &[LoadedStrip],
    nir: &[LoadedStrip],
) -> Result<(f64, f64, f64)> {
    let zv: Vec<Vec<f32>> =
        vis.iter().map(|v| model.embed(Spectrum::Vis, &v.image)).collect::<Result<_>>()?;
    let zn: Vec<Vec<f32>> =
        nir.iter().map(|n| model.embed(Spectrum::Nir, &n.image)).collect::<Result<_>>()?;
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (v, a) in vis.iter().zip(&zv) {
        for (n, b) in nir.iter().zip(&zn) {
            let d =
                a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt();
            if v.class_id == n.class_id {
                genuine.push(d);
            } else {
                impostor.push(d);
            }
        }
    }
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Empty("embedding audit needs both pair kinds"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mi = mean(&impostor);
    let var = impostor.iter().map(|d| (d - mi) * (d - mi)).sum::<f64>() / impostor.len() as f64;
    Ok((mean(&genuine), mi, var.sqrt()))
}
