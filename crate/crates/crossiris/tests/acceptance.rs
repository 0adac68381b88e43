//! Acceptance suite: one test per release criterion, so the pass/fail line
//! per criterion is the per-test line of `cargo test --test acceptance`.
//!
//! Criteria 4, 5 and 9 share one trained pipeline (five seeded end-to-end
//! rounds over every scenario), built once behind a `OnceLock`.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crossiris::config::{RunConfig, Scenario};
use crossiris::data::degrade::degrade_to_lr;
use crossiris::data::manifest::{DatasetManifest, Resolution, Split};
use crossiris::data::synth::{generate_dataset, render_sample, SynthParams};
use crossiris::data::Spectrum;
use crossiris::eval::{eer, gar_at_far, roc, ScoreSet};
use crossiris::iriscode::{hamming, IrisCode};
use crossiris::losses::{
    adversarial_d_loss, adversarial_g_loss, contrastive, coupling_loss, l2_reconstruction,
    perceptual,
};
use crossiris::models::{
    load_checkpoint, save_checkpoint_with_state, FeatureNet, TranslateConfig, TranslateGenerator,
    UNetConfig, UNetGenerator,
};
use crossiris::tensor::fd::{grad_check, rel_err};
use crossiris::tensor::{Parameter, Tensor};
use crossiris::train::{
    coupled_settings, embedding_audit, execute_run, hyperparameter_sweep, load_selection,
    sweep_table, translate_image, translation_settings,
};

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

/// Values bounded away from zero, for gradient checks of piecewise-linear
/// activations where a finite-difference step must not cross the kink.
fn rand_vec_off_kink(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    rand_vec(rng, n)
        .into_iter()
        .map(|v| if v >= 0.0 { 0.05 + 0.95 * v } else { -0.05 + 0.95 * v })
        .collect()
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_gradient_suite_every_layer_and_loss() {
    let started = Instant::now();
    let tol = 1e-3;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut check = |label: &str, shape: &[usize], init: &[f32], h: f32, f: &dyn Fn(&Tensor) -> crossiris::error::Result<Tensor>| {
            let e = grad_check(shape, init, h, f).expect(label);
            assert!(e < tol, "{label}, seed {seed}: max rel err {e}");
        };

        // convolution w.r.t. input, weight and bias
        let w = Tensor::from_vec(&[2, 2, 3, 3], rand_vec(&mut rng, 36)).unwrap();
        let b = Tensor::from_vec(&[2], rand_vec(&mut rng, 2)).unwrap();
        check("conv2d/input", &[1, 2, 4, 4], &rand_vec(&mut rng, 32), 1e-2, &|x| {
            x.conv2d(&w, &b, 1, 1)?.sqr()?.mean_all()
        });
        let xf = Tensor::from_vec(&[1, 2, 4, 4], rand_vec(&mut rng, 32)).unwrap();
        check("conv2d/weight", &[2, 2, 3, 3], &rand_vec(&mut rng, 36), 1e-2, &|w| {
            xf.conv2d(w, &b, 2, 1)?.sqr()?.mean_all()
        });
        check("conv2d/bias", &[2], &rand_vec(&mut rng, 2), 1e-2, &|b| {
            xf.conv2d(&w, b, 1, 0)?.sqr()?.mean_all()
        });

        // transposed convolution w.r.t. input and weight
        let wt = Tensor::from_vec(&[2, 1, 2, 2], rand_vec(&mut rng, 8)).unwrap();
        check("convT/input", &[1, 2, 3, 3], &rand_vec(&mut rng, 18), 1e-2, &|x| {
            x.conv2d_transpose(&wt, 2)?.sqr()?.mean_all()
        });
        let xt = Tensor::from_vec(&[1, 2, 3, 3], rand_vec(&mut rng, 18)).unwrap();
        check("convT/weight", &[2, 1, 2, 2], &rand_vec(&mut rng, 8), 1e-2, &|w| {
            xt.conv2d_transpose(w, 2)?.sqr()?.mean_all()
        });

        // dense
        let wd = Tensor::from_vec(&[3, 4], rand_vec(&mut rng, 12)).unwrap();
        let bd = Tensor::from_vec(&[3], rand_vec(&mut rng, 3)).unwrap();
        check("dense/input", &[2, 4], &rand_vec(&mut rng, 8), 1e-2, &|x| {
            x.dense(&wd, &bd)?.sqr()?.mean_all()
        });

        // activations; piecewise-linear ones are checked away from the kink
        check("relu", &[8], &rand_vec_off_kink(&mut rng, 8), 1e-3, &|x| {
            x.relu()?.sqr()?.mean_all()
        });
        check("leaky_relu", &[8], &rand_vec_off_kink(&mut rng, 8), 1e-3, &|x| {
            x.leaky_relu(0.35)?.sqr()?.mean_all()
        });
        check("sigmoid", &[8], &rand_vec(&mut rng, 8), 1e-2, &|x| {
            x.sigmoid()?.sqr()?.mean_all()
        });
        check("tanh", &[8], &rand_vec(&mut rng, 8), 1e-2, &|x| {
            x.tanh_act()?.sqr()?.mean_all()
        });
        let slope = Tensor::from_vec(&[2], vec![0.25, 0.3]).unwrap();
        check("prelu/input", &[1, 2, 2, 2], &rand_vec_off_kink(&mut rng, 8), 1e-3, &|x| {
            x.prelu(&slope)?.sqr()?.mean_all()
        });
        let xp = Tensor::from_vec(&[1, 2, 2, 2], rand_vec_off_kink(&mut rng, 8)).unwrap();
        check("prelu/slope", &[2], &[0.25, 0.3], 1e-2, &|s| xp.prelu(s)?.sqr()?.mean_all());

        // batch norm w.r.t. input, gamma and beta
        let gamma = Tensor::from_vec(&[2], vec![1.1, 0.9]).unwrap();
        let beta = Tensor::from_vec(&[2], vec![0.1, -0.2]).unwrap();
        check("batch_norm/input", &[2, 2, 2, 2], &rand_vec(&mut rng, 16), 1e-2, &|x| {
            let (y, _, _) = x.batch_norm_train(&gamma, &beta, 1e-5)?;
            y.sqr()?.mean_all()
        });
        let xb = Tensor::from_vec(&[2, 2, 2, 2], rand_vec(&mut rng, 16)).unwrap();
        check("batch_norm/gamma", &[2], &rand_vec(&mut rng, 2), 1e-2, &|g| {
            let (y, _, _) = xb.batch_norm_train(g, &beta, 1e-5)?;
            y.sqr()?.mean_all()
        });
        check("batch_norm/beta", &[2], &rand_vec(&mut rng, 2), 1e-2, &|bt| {
            let (y, _, _) = xb.batch_norm_train(&gamma, bt, 1e-5)?;
            y.sqr()?.mean_all()
        });

        // pooling and pixel shuffle; pool values spaced so argmax is stable
        let mut pool_vals: Vec<f32> = (0..16).map(|i| i as f32 * 0.07 - 0.5).collect();
        for i in 0..16 {
            let j = rng.gen_range(0..16);
            pool_vals.swap(i, j);
        }
        check("max_pool", &[1, 1, 4, 4], &pool_vals, 1e-3, &|x| {
            x.max_pool2d(2, 2)?.sqr()?.mean_all()
        });
        check("pixel_shuffle", &[1, 4, 2, 2], &rand_vec(&mut rng, 16), 1e-2, &|x| {
            x.pixel_shuffle(2)?.sqr()?.mean_all()
        });
        check("global_avg_pool", &[2, 3, 2, 4], &rand_vec(&mut rng, 48), 1e-2, &|x| {
            x.global_avg_pool()?.sqr()?.mean_all()
        });

        // loss terms; discriminator outputs kept inside (0.05, 0.95)
        let probs: Vec<f32> = (0..8).map(|_| rng.gen_range(0.05f32..0.95)).collect();
        let real = Tensor::from_vec(&[4, 1], probs[..4].to_vec()).unwrap();
        check("adversarial_d/fake", &[4, 1], &probs[4..], 1e-3, &|f| {
            adversarial_d_loss(&real, f)
        });
        check("adversarial_d/real", &[4, 1], &probs[..4], 1e-3, &|r| {
            adversarial_d_loss(r, &real)
        });
        check("adversarial_g", &[4, 1], &probs[4..], 1e-3, &|f| adversarial_g_loss(f));

        let z2 = Tensor::from_vec(&[6], rand_vec(&mut rng, 6)).unwrap();
        check("contrastive/genuine", &[6], &rand_vec(&mut rng, 6), 1e-2, &|z| {
            contrastive(z, &z2, 0, 1.0)
        });
        // margin chosen above every reachable distance so the hinge is active
        check("contrastive/impostor", &[6], &rand_vec(&mut rng, 6), 1e-3, &|z| {
            contrastive(z, &z2, 1, 8.0)
        });
        let zb = Tensor::from_vec(&[4, 6], rand_vec(&mut rng, 24)).unwrap();
        check("coupling_loss", &[4, 6], &rand_vec(&mut rng, 24), 1e-3, &|z| {
            coupling_loss(z, &zb, &[0, 1, 0, 1], 8.0)
        });

        let target = Tensor::from_vec(&[1, 1, 4, 8], rand_vec(&mut rng, 32)).unwrap();
        check("l2_reconstruction", &[1, 1, 4, 8], &rand_vec(&mut rng, 32), 1e-2, &|x| {
            l2_reconstruction(x, &target)
        });
        let feat = FeatureNet::build(1, 99).unwrap();
        check("perceptual", &[1, 1, 8, 8], &rand_vec(&mut rng, 64), 1e-2, &|x| {
            perceptual(x, &target_like(&target, 8, 8), &feat)
        });
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "gradient suite took {elapsed:?}, budget is 2 min");
}

fn target_like(src: &Tensor, h: usize, w: usize) -> Tensor {
    let data = src.to_vec();
    Tensor::from_vec(&[1, 1, h, w], data.iter().cycle().take(h * w).copied().collect()).unwrap()
}

// ---------------------------------------------------------------- criterion 2

/// Direct seven-loop convolution, the independent oracle for `conv2d`.
fn conv2d_naive(
    x: &[f32],
    (n, ci, h, wd): (usize, usize, usize, usize),
    k: &[f32],
    (co, kh, kw): (usize, usize, usize),
    bias: &[f32],
    stride: usize,
    pad: usize,
) -> (Vec<f32>, usize, usize) {
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0f32; n * co * oh * ow];
    for b in 0..n {
        for oc in 0..co {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[oc];
                    for ic in 0..ci {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    let xi = ((b * ci + ic) * h + iy as usize) * wd + ix as usize;
                                    let ki = ((oc * ci + ic) * kh + ky) * kw + kx;
                                    acc += x[xi] * k[ki];
                                }
                            }
                        }
                    }
                    out[((b * co + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    (out, oh, ow)
}

/// Brute-force accept counts at a threshold (accept iff score < t).
fn brute_counts(scores: &ScoreSet, t: f32) -> (usize, usize) {
    let ga = scores.genuine.iter().filter(|&&v| v < t).count();
    let ia = scores.impostor.iter().filter(|&&v| v < t).count();
    (ga, ia)
}

#[test]
fn criterion_2_oracle_equivalence() {
    // conv2d against the naive loop
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    for (shape, kshape, stride, pad) in [
        ((1usize, 1usize, 5usize, 7usize), (2usize, 3usize, 3usize), 1usize, 1usize),
        ((2, 3, 8, 6), (4, 3, 3), 2, 1),
        ((1, 2, 6, 6), (3, 4, 2), 1, 0),
        ((2, 2, 7, 9), (2, 5, 3), 3, 2),
    ] {
        let (n, ci, h, w) = shape;
        let (co, kh, kw) = kshape;
        let x = rand_vec(&mut rng, n * ci * h * w);
        let k = rand_vec(&mut rng, co * ci * kh * kw);
        let b = rand_vec(&mut rng, co);
        let xt = Tensor::from_vec(&[n, ci, h, w], x.clone()).unwrap();
        let kt = Tensor::from_vec(&[co, ci, kh, kw], k.clone()).unwrap();
        let bt = Tensor::from_vec(&[co], b.clone()).unwrap();
        let got = xt.conv2d(&kt, &bt, stride, pad).unwrap();
        let (want, oh, ow) = conv2d_naive(&x, shape, &k, kshape, &b, stride, pad);
        assert_eq!(got.shape(), &[n, co, oh, ow]);
        for (g, w) in got.to_vec().iter().zip(&want) {
            assert!((g - w).abs() < 1e-5, "conv2d differs from naive loop: {g} vs {w}");
        }
    }

    // ROC counts against brute-force threshold sweeps, with deliberate ties
    let quant = |v: f32| (v * 50.0).round() / 50.0;
    let genuine: Vec<f32> = (0..60).map(|_| quant(rng.gen_range(0.05f32..0.6))).collect();
    let impostor: Vec<f32> = (0..140).map(|_| quant(rng.gen_range(0.3f32..0.95))).collect();
    let scores = ScoreSet::new(genuine, impostor, "oracle check").unwrap();
    let curve = roc(&scores).unwrap();
    for p in &curve {
        let (ga, ia) = brute_counts(&scores, p.threshold);
        assert_eq!(p.gar, ga as f64 / scores.genuine.len() as f64, "GAR count mismatch");
        assert_eq!(p.far, ia as f64 / scores.impostor.len() as f64, "FAR count mismatch");
    }

    // interpolated EER against an independent scan over accept counts
    let got_eer = eer(&scores).unwrap();
    let want_eer = eer_oracle(&scores);
    assert!(
        (got_eer - want_eer).abs() < 1e-9,
        "EER {got_eer} differs from oracle {want_eer}"
    );

    // interpolated GAR@FAR against recomputation from brute-force points
    for target in [0.1, 0.01, 0.001] {
        let (got, _) = gar_at_far(&curve, target).unwrap();
        let want = gar_oracle(&scores, target);
        assert!(
            (got - want).abs() < 1e-9,
            "GAR@{target} {got} differs from oracle {want}"
        );
    }

    // coupling loss against per-pair scalar recomputation
    let m = 1.3f32;
    let z1v = rand_vec(&mut rng, 5 * 7);
    let z2v = rand_vec(&mut rng, 5 * 7);
    let labels = [0u8, 1, 1, 0, 1];
    let z1 = Tensor::from_vec(&[5, 7], z1v.clone()).unwrap();
    let z2 = Tensor::from_vec(&[5, 7], z2v.clone()).unwrap();
    let got = coupling_loss(&z1, &z2, &labels, m).unwrap().value();
    let mut want = 0.0f64;
    for (i, &y) in labels.iter().enumerate() {
        let dz2: f64 = (0..7)
            .map(|j| (z1v[i * 7 + j] as f64 - z2v[i * 7 + j] as f64).powi(2))
            .sum();
        want += if y == 0 {
            0.5 * dz2
        } else {
            0.5 * (m as f64 - dz2.sqrt()).max(0.0).powi(2)
        };
    }
    want /= labels.len() as f64;
    assert!(
        (got as f64 - want).abs() < 1e-6,
        "coupling loss {got} differs from per-pair recomputation {want}"
    );
}

/// EER recomputed from scratch with brute-force counting: FAR and FRR are
/// step functions, so scan interval representatives in threshold order and
/// linearly interpolate the sign change of FAR - FRR.
fn eer_oracle(scores: &ScoreSet) -> f64 {
    let (ng, ni) = (scores.genuine.len() as f64, scores.impostor.len() as f64);
    let mut cuts: Vec<f32> = scores.genuine.iter().chain(&scores.impostor).copied().collect();
    cuts.sort_by(f32::total_cmp);
    cuts.dedup();
    let mut reps = vec![cuts[0] - 1.0];
    for w in cuts.windows(2) {
        reps.push(0.5 * (w[0] + w[1]));
    }
    reps.push(cuts[cuts.len() - 1] + 1.0);
    let mut prev: Option<(f64, f64)> = None;
    for t in reps {
        let (ga, ia) = brute_counts(scores, t);
        let far = ia as f64 / ni;
        let frr = 1.0 - ga as f64 / ng;
        if far >= frr {
            return match prev {
                Some((pf, pr)) if far > frr => {
                    let alpha = (pr - pf) / ((far - frr) - (pf - pr));
                    (1.0 - alpha) * 0.5 * (pf + pr) + alpha * 0.5 * (far + frr)
                }
                _ => 0.5 * (far + frr),
            };
        }
        prev = Some((far, frr));
    }
    unreachable!("FAR reaches 1 above every score");
}

/// GAR@FAR recomputed from brute-force (FAR, GAR) points: take the best GAR
/// per distinct FAR and interpolate linearly between neighbours.
fn gar_oracle(scores: &ScoreSet, target: f64) -> f64 {
    let (ng, ni) = (scores.genuine.len() as f64, scores.impostor.len() as f64);
    let mut cuts: Vec<f32> = scores.genuine.iter().chain(&scores.impostor).copied().collect();
    cuts.sort_by(f32::total_cmp);
    cuts.dedup();
    let top = cuts[cuts.len() - 1];
    cuts.push(top + top.abs().max(1.0) * 1e-3);
    let mut env: Vec<(f64, f64)> = Vec::new();
    for t in cuts {
        let (ga, ia) = brute_counts(scores, t);
        let (far, gar) = (ia as f64 / ni, ga as f64 / ng);
        match env.last_mut() {
            Some((f, g)) if *f == far => *g = g.max(gar),
            _ => env.push((far, gar)),
        }
    }
    if target < env[0].0 {
        return env[0].1;
    }
    if target >= env[env.len() - 1].0 {
        return env[env.len() - 1].1;
    }
    let hi = env.partition_point(|&(f, _)| f <= target);
    let (f0, g0) = env[hi - 1];
    let (f1, g1) = env[hi];
    g0 + (target - f0) / (f1 - f0) * (g1 - g0)
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_hamming_statistics_of_random_codes() {
    let (rows, cols) = (8usize, 128usize); // 2048 bits, all valid
    let nbits = rows * cols * 2;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut code = |rng: &mut ChaCha8Rng| IrisCode {
        rows,
        cols,
        bits: (0..nbits).map(|_| rng.gen_bool(0.5)).collect(),
        mask: vec![true; nbits],
    };
    let mut mean = 0.0f64;
    for _ in 0..100 {
        let a = code(&mut rng);
        let b = code(&mut rng);
        assert!(a.valid_bits() >= 2048);
        mean += hamming(&a, &b, 0).unwrap() as f64;
    }
    mean /= 100.0;
    assert!(
        (0.48..=0.52).contains(&mean),
        "independent random codes should disagree on about half the bits, got {mean}"
    );

    let c = code(&mut rng);
    assert_eq!(hamming(&c, &c, 0).unwrap(), 0.0, "identical codes must have distance zero");
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_shape_laws() {
    let p = SynthParams::default();
    let hr = render_sample(6, 0, Spectrum::Vis, 0, &p);
    assert_eq!((hr.image.h, hr.image.w), (64, 512));

    // shape-preserving translation
    let cfg = TranslateConfig {
        width_multiplier: 0.0625,
        blocks: 1,
        super_resolve: false,
        in_channels: 1,
    };
    let gen = TranslateGenerator::build(&cfg, 60).unwrap();
    let out = translate_image(&gen, &hr.image).unwrap();
    assert_eq!((out.h, out.w), (64, 512), "translation must preserve 64x512");

    // degradation halves both dimensions
    let lr = degrade_to_lr(&hr, p.lr_sigma).unwrap();
    assert_eq!((lr.image.h, lr.image.w), (32, 256), "degradation must halve 64x512");

    // super-resolving translation doubles them back
    let sr_cfg = TranslateConfig { super_resolve: true, ..cfg };
    let sr = TranslateGenerator::build(&sr_cfg, 61).unwrap();
    let up = translate_image(&sr, &lr.image).unwrap();
    assert_eq!((up.h, up.w), (64, 512), "super-resolution must map 32x256 to 64x512");

    // coupled generators expose equally long bottleneck embeddings
    let ucfg = UNetConfig { depth: 4, base_channels: 3, in_channels: 1, dropout: 0.0 };
    let g_vis = UNetGenerator::build(&ucfg, "vis", 62).unwrap();
    let g_nir = UNetGenerator::build(&ucfg, "nir", 63).unwrap();
    let x = Tensor::from_vec(&[1, 1, 32, 256], lr.image.data.clone()).unwrap();
    let zv = g_vis.embed(&x).unwrap();
    let zn = g_nir.embed(&x).unwrap();
    assert_eq!(zv.shape(), zn.shape(), "coupled embedding lengths must match");
    assert_eq!(zv.shape()[1], ucfg.embedding_len());
}

// ---------------------------------------------------------------- criterion 7

fn walk_files(root: &std::path::Path, rel: &std::path::Path, out: &mut Vec<std::path::PathBuf>) {
    for entry in std::fs::read_dir(root.join(rel)).unwrap() {
        let entry = entry.unwrap();
        let sub = rel.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            walk_files(root, &sub, out);
        } else {
            out.push(sub);
        }
    }
}

#[test]
fn criterion_7_byte_for_byte_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams { train_instances: 2, ..SynthParams::default() };
    let manifest = generate_dataset(&dir.path().join("data"), 3, 4, 7, &params).unwrap();

    let mut cfg = RunConfig::default();
    cfg.scenario = Scenario::S1NirToVis;
    cfg.resolution = Resolution::Lr;
    cfg.translate =
        TranslateConfig { width_multiplier: 0.0625, blocks: 1, super_resolve: false, in_channels: 1 };
    cfg.disc_width = 0.0625;
    cfg.batch_size = 2;
    cfg.steps = 3;
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    execute_run(&manifest, &cfg, &run_a).unwrap();
    execute_run(&manifest, &cfg, &run_b).unwrap();

    let mut files = Vec::new();
    walk_files(&run_a, std::path::Path::new(""), &mut files);
    files.sort();
    assert!(files.len() >= 6, "run directory is missing artifacts: {files:?}");
    for rel in &files {
        let a = std::fs::read(run_a.join(rel)).unwrap();
        let b = std::fs::read(run_b.join(rel)).unwrap();
        assert_eq!(a, b, "artifact {} differs between identically seeded runs", rel.display());
    }

    // checkpoint load -> re-save reproduces the original bytes
    let ckpt_path = run_a.join("checkpoints/generator.ckpt");
    let original = std::fs::read(&ckpt_path).unwrap();
    let ckpt = load_checkpoint(&ckpt_path).unwrap();
    let params: Vec<Parameter> = ckpt
        .tensors
        .iter()
        .map(|(name, shape, data)| Parameter::new(name.clone(), shape, data.clone()).unwrap())
        .collect();
    let resaved = dir.path().join("resaved.ckpt");
    save_checkpoint_with_state(&resaved, &ckpt.cfg, &params, &ckpt.states).unwrap();
    assert_eq!(
        std::fs::read(&resaved).unwrap(),
        original,
        "checkpoint save/load round-trip is not byte-identical"
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_ablation_tables_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams { train_instances: 2, ..SynthParams::default() };
    let manifest = generate_dataset(dir.path(), 3, 4, 8, &params).unwrap();

    let mut cfg = RunConfig::default();
    cfg.scenario = Scenario::S1NirToVis;
    cfg.resolution = Resolution::Lr;
    cfg.translate =
        TranslateConfig { width_multiplier: 0.0625, blocks: 1, super_resolve: false, in_channels: 1 };
    cfg.unet = UNetConfig { depth: 3, base_channels: 2, in_channels: 1, dropout: 0.5 };
    cfg.disc_width = 0.0625;
    cfg.batch_size = 2;
    cfg.steps = 2;

    // translation-loss grid: six settings, one row each
    let grid = translation_settings(&cfg.weights);
    assert_eq!(grid.len(), 6);
    let rows = hyperparameter_sweep(&manifest, &cfg, &grid).unwrap();
    assert_eq!(rows.len(), 6, "translation table is incomplete");
    for r in &rows {
        assert!(r.eer.is_finite() && r.gar_at_far_1e2.is_finite() && r.gar_at_far_1e3.is_finite());
    }
    let again = hyperparameter_sweep(&manifest, &cfg, &grid).unwrap();
    assert_eq!(sweep_table(&rows), sweep_table(&again), "translation table not reproducible");

    // coupled-loss grid: seven settings, one row each
    cfg.scenario = Scenario::Cpgan;
    let grid = coupled_settings(&cfg.weights);
    assert_eq!(grid.len(), 7);
    let rows = hyperparameter_sweep(&manifest, &cfg, &grid).unwrap();
    assert_eq!(rows.len(), 7, "coupled table is incomplete");
    for r in &rows {
        assert!(r.eer.is_finite() && r.gar_at_far_1e2.is_finite() && r.gar_at_far_1e3.is_finite());
    }
    let again = hyperparameter_sweep(&manifest, &cfg, &grid).unwrap();
    assert_eq!(sweep_table(&rows), sweep_table(&again), "coupled table not reproducible");
}
