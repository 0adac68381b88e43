//! Network definitions: residual translation generator (with optional 2x
//! super-resolution stage), global and patch discriminators, coupled U-Net
//! generators, the frozen perceptual feature net, and checkpoint I/O.

pub mod checkpoint;
pub mod discriminator;
pub mod featurenet;
pub mod layers;
pub mod translate;
pub mod unet;

pub use checkpoint::{
    load as load_checkpoint, restore, save as save_checkpoint,
    save_with_state as save_checkpoint_with_state, Checkpoint,
};
pub use discriminator::{DiscriminatorConfig, GlobalDiscriminator, PatchDiscriminator, LEAKY_SLOPE};
pub use featurenet::FeatureNet;
pub use translate::{TranslateConfig, TranslateGenerator};
pub use unet::{UNetConfig, UNetGenerator};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_input(seed: u64, n: usize, c: usize, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_vec(&[n, c, h, w], (0..n * c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn tiny_translate(sr: bool) -> TranslateConfig {
        TranslateConfig { width_multiplier: 0.0625, blocks: 1, super_resolve: sr, in_channels: 1 }
    }

    fn tiny_disc(in_c: usize, h: usize, w: usize) -> DiscriminatorConfig {
        DiscriminatorConfig { width_multiplier: 0.0625, in_channels: in_c, input_h: h, input_w: w }
    }

    #[test]
    fn translate_preserves_shape() {
        let g = TranslateGenerator::build(&tiny_translate(false), 1).unwrap();
        let y = g.forward(&rand_input(0, 1, 1, 64, 512), false).unwrap();
        assert_eq!(y.shape(), &[1, 1, 64, 512]);
    }

    #[test]
    fn translate_sr_doubles_spatial_dims() {
        let g = TranslateGenerator::build(&tiny_translate(true), 1).unwrap();
        let y = g.forward(&rand_input(0, 1, 1, 32, 256), false).unwrap();
        assert_eq!(y.shape(), &[1, 1, 64, 512]);
    }

    #[test]
    fn zero_parameters_map_zero_input_to_zero_output() {
        let g = TranslateGenerator::build(&tiny_translate(false), 1).unwrap();
        for p in g.params() {
            p.tensor.set_data(&vec![0.0; p.tensor.numel()]).unwrap();
        }
        let y = g.forward(&Tensor::zeros(&[1, 1, 16, 32]), false).unwrap();
        assert!(y.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_width_rejected() {
        let cfg = TranslateConfig { width_multiplier: 0.0, ..Default::default() };
        assert!(TranslateGenerator::build(&cfg, 1).is_err());
        let cfg = TranslateConfig { width_multiplier: 1.5, ..Default::default() };
        assert!(TranslateGenerator::build(&cfg, 1).is_err());
        let cfg = TranslateConfig { blocks: 0, ..Default::default() };
        assert!(TranslateGenerator::build(&cfg, 1).is_err());
    }

    #[test]
    fn global_discriminator_scalar_in_unit_interval() {
        let d = GlobalDiscriminator::build(&tiny_disc(2, 16, 32), 2).unwrap();
        let y = d.forward(&rand_input(1, 3, 2, 16, 32)).unwrap();
        assert_eq!(y.shape(), &[3, 1]);
        assert!(y.to_vec().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn patch_discriminator_grid_shape() {
        let d = PatchDiscriminator::build(&tiny_disc(1, 32, 64), 2).unwrap();
        let y = d.forward(&rand_input(2, 2, 1, 32, 64)).unwrap();
        assert_eq!(y.shape(), &[2, 1, 2, 4]);
        assert!(y.to_vec().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn discriminator_rejects_undersized_input() {
        assert!(GlobalDiscriminator::build(&tiny_disc(1, 8, 32), 2).is_err());
        assert!(PatchDiscriminator::build(&tiny_disc(1, 16, 24), 2).is_err());
    }

    #[test]
    fn batch_composition_does_not_change_per_sample_outputs() {
        let d = GlobalDiscriminator::build(&tiny_disc(1, 16, 32), 3).unwrap();
        let a = rand_input(10, 1, 1, 16, 32);
        let b = rand_input(11, 1, 1, 16, 32);
        let mut joint = a.to_vec();
        joint.extend(b.to_vec());
        let batch = Tensor::from_vec(&[2, 1, 16, 32], joint).unwrap();
        let yj = d.forward(&batch).unwrap().to_vec();
        let ya = d.forward(&a).unwrap().value();
        let yb = d.forward(&b).unwrap().value();
        assert!((yj[0] - ya).abs() < 1e-6 && (yj[1] - yb).abs() < 1e-6);
    }

    #[test]
    fn unet_shape_law_and_bottleneck() {
        let cfg = UNetConfig { depth: 4, base_channels: 2, in_channels: 1, dropout: 0.5 };
        let g = UNetGenerator::build(&cfg, "vis", 4).unwrap();
        let (y, bott) = g.forward_full(&rand_input(5, 1, 1, 64, 512), false).unwrap();
        assert_eq!(y.shape(), &[1, 1, 64, 512]);
        assert_eq!(bott.shape(), &[1, 32, 4, 32]);
        assert_eq!(cfg.embedding_len(), 32);
    }

    #[test]
    fn coupled_unets_share_embedding_length() {
        let cfg = UNetConfig { depth: 4, base_channels: 2, in_channels: 1, dropout: 0.0 };
        let g_vis = UNetGenerator::build(&cfg, "vis", 4).unwrap();
        let g_nir = UNetGenerator::build(&cfg, "nir", 5).unwrap();
        let e1 = g_vis.embed(&rand_input(6, 1, 1, 64, 512)).unwrap();
        let e2 = g_nir.embed(&rand_input(7, 1, 1, 32, 256)).unwrap();
        assert_eq!(e1.shape(), e2.shape());
        assert_eq!(e1.shape(), &[1, cfg.embedding_len()]);
    }

    #[test]
    fn unet_rejects_indivisible_dims() {
        let cfg = UNetConfig { depth: 4, base_channels: 2, in_channels: 1, dropout: 0.0 };
        let g = UNetGenerator::build(&cfg, "g", 4).unwrap();
        assert!(g.forward(&rand_input(0, 1, 1, 60, 512), false).is_err());
    }

    #[test]
    fn embed_deterministic_and_consistent_with_forward_full() {
        let cfg = UNetConfig { depth: 2, base_channels: 2, in_channels: 1, dropout: 0.5 };
        let g = UNetGenerator::build(&cfg, "g", 8).unwrap();
        let x = rand_input(9, 1, 1, 16, 32);
        let e1 = g.embed(&x).unwrap().to_vec();
        let e2 = g.embed(&x).unwrap().to_vec();
        assert_eq!(e1, e2);
        let (_, bott) = g.forward_full(&x, false).unwrap();
        let e3 = bott.global_avg_pool().unwrap().to_vec();
        for (a, b) in e1.iter().zip(&e3) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    /// Dead-path detector: after one backward pass, every parameter must
    /// receive a gradient with at least one nonzero entry.
    fn assert_all_params_live(params: &[crate::tensor::Parameter]) {
        for p in params {
            let g = p.tensor.grad().unwrap_or_else(|| panic!("{}: no grad", p.name));
            assert!(g.iter().any(|&v| v != 0.0), "{}: gradient identically zero", p.name);
        }
    }

    #[test]
    fn translate_gradients_reach_every_parameter() {
        let g = TranslateGenerator::build(&tiny_translate(true), 11).unwrap();
        let x = rand_input(12, 2, 1, 16, 32);
        let loss = g.forward(&x, true).unwrap().sqr().unwrap().mean_all().unwrap();
        loss.backward().unwrap();
        assert_all_params_live(&g.params());
    }

    #[test]
    fn discriminator_gradients_reach_every_parameter() {
        let d = GlobalDiscriminator::build(&tiny_disc(1, 16, 32), 13).unwrap();
        let loss = d.forward(&rand_input(14, 2, 1, 16, 32)).unwrap().mean_all().unwrap();
        loss.backward().unwrap();
        assert_all_params_live(&d.params());

        let pd = PatchDiscriminator::build(&tiny_disc(1, 16, 32), 15).unwrap();
        let loss = pd.forward(&rand_input(16, 2, 1, 16, 32)).unwrap().mean_all().unwrap();
        loss.backward().unwrap();
        assert_all_params_live(&pd.params());
    }

    #[test]
    fn unet_gradients_reach_every_parameter() {
        let cfg = UNetConfig { depth: 2, base_channels: 2, in_channels: 1, dropout: 0.0 };
        let g = UNetGenerator::build(&cfg, "g", 17).unwrap();
        let x = rand_input(18, 2, 1, 16, 32);
        let (out, bott) = g.forward_full(&x, true).unwrap();
        // out covers the decoder path, the pooled bottleneck covers embed()
        let loss = out
            .sqr()
            .unwrap()
            .mean_all()
            .unwrap()
            .add(&bott.global_avg_pool().unwrap().sqr().unwrap().mean_all().unwrap())
            .unwrap();
        loss.backward().unwrap();
        assert_all_params_live(&g.params());
    }

    #[test]
    fn forward_passes_finite_over_many_seeds() {
        // from_op rejects non-finite values, so Ok(_) means finite throughout
        for seed in 0..100u64 {
            match seed % 4 {
                0 => {
                    let g = TranslateGenerator::build(&tiny_translate(false), seed).unwrap();
                    g.forward(&rand_input(seed, 1, 1, 16, 32), false).unwrap();
                }
                1 => {
                    let d = GlobalDiscriminator::build(&tiny_disc(1, 16, 32), seed).unwrap();
                    d.forward(&rand_input(seed, 1, 1, 16, 32)).unwrap();
                }
                2 => {
                    let d = PatchDiscriminator::build(&tiny_disc(1, 16, 32), seed).unwrap();
                    d.forward(&rand_input(seed, 1, 1, 16, 32)).unwrap();
                }
                _ => {
                    let cfg = UNetConfig { depth: 2, base_channels: 2, in_channels: 1, dropout: 0.0 };
                    let g = UNetGenerator::build(&cfg, "g", seed).unwrap();
                    g.forward(&rand_input(seed, 1, 1, 16, 32), false).unwrap();
                }
            }
        }
    }

    #[test]
    fn feature_net_receives_no_gradient() {
        let v = FeatureNet::build(1, 42).unwrap();
        let x = Tensor::leaf(&[1, 1, 16, 32], vec![0.3; 512]).unwrap();
        let loss = v.forward(&x).unwrap().sqr().unwrap().mean_all().unwrap();
        loss.backward().unwrap();
        assert!(x.grad().is_some());
    }

    #[test]
    fn checkpoint_roundtrip_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let g = TranslateGenerator::build(&tiny_translate(false), 21).unwrap();
        let cfg = serde_json::to_value(&g.cfg).unwrap();
        let p1 = dir.path().join("a.ckpt");
        save_checkpoint(&p1, &cfg, &g.params()).unwrap();

        let g2 = TranslateGenerator::build(&tiny_translate(false), 99).unwrap();
        let ckpt = load_checkpoint(&p1).unwrap();
        assert_eq!(ckpt.cfg, cfg);
        restore(&ckpt, &g2.params()).unwrap();
        let p2 = dir.path().join("b.ckpt");
        save_checkpoint(&p2, &ckpt.cfg, &g2.params()).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn restore_rejects_mismatched_architecture() {
        let dir = tempfile::tempdir().unwrap();
        let g = TranslateGenerator::build(&tiny_translate(false), 21).unwrap();
        let path = dir.path().join("a.ckpt");
        save_checkpoint(&path, &serde_json::Value::Null, &g.params()).unwrap();
        let ckpt = load_checkpoint(&path).unwrap();
        let other = TranslateGenerator::build(&tiny_translate(true), 21).unwrap();
        assert!(restore(&ckpt, &other.params()).is_err());
    }
}
