//! Scenario pipelines: train the networks a scenario needs, build its
//! gallery/probe score set, and write the run-directory artifacts.

use std::path::Path;

use crate::config::{RunConfig, RunDir, Scenario};
use crate::data::manifest::{DatasetManifest, Resolution, Split};
use crate::data::{BitMask, Spectrum};
use crate::error::{Error, Result};
use crate::eval::{
    report, roc, score_embeddings, score_iriscode, write_roc_csv, write_scores_csv,
    LabeledEmbedding, LabeledStrip, Report, ScoreSet, ScoredPair,
};
use crate::models::{
    load_checkpoint, restore, save_checkpoint, save_checkpoint_with_state, DiscriminatorConfig,
    PatchDiscriminator, TranslateConfig, TranslateGenerator, UNetConfig, UNetGenerator,
};
use crate::normalize::NormalizedIris;
use crate::train::batch::{load_selection, LoadedStrip};
use crate::train::cgan::{
    run_scenario_2b, s1_task, s2a_task, s3_task, train_cgan, translate_image, TrainedTranslator,
};
use crate::train::cpgan::{train_cpgan, TrainedCoupled};

/// Everything a scenario needs at scoring time.
pub enum ScenarioModels {
    Baseline,
    Translate(TrainedTranslator),
    TwoStage(Box<TrainedTranslator>, Box<TrainedTranslator>),
    Coupled(TrainedCoupled),
}

/// Train whatever `cfg.scenario` requires.
pub fn train_scenario(manifest: &DatasetManifest, cfg: &RunConfig) -> Result<ScenarioModels> {
    Ok(match cfg.scenario {
        Scenario::S1NirToVis => {
            ScenarioModels::Translate(train_cgan(manifest, cfg, s1_task(), 0)?)
        }
        Scenario::S3VisToNir => {
            ScenarioModels::Translate(train_cgan(manifest, cfg, s3_task(), 0)?)
        }
        Scenario::S2aJointSr => {
            ScenarioModels::Translate(train_cgan(manifest, cfg, s2a_task(), 0)?)
        }
        Scenario::S2bSeparate => {
            let (s1, s2) = run_scenario_2b(manifest, cfg)?;
            ScenarioModels::TwoStage(Box::new(s1), Box::new(s2))
        }
        Scenario::Cpgan => {
            ScenarioModels::Coupled(train_cpgan(manifest, cfg, cfg.resolution, cfg.resolution)?)
        }
    })
}

/// Nearest-neighbour 2x mask upscale for super-resolved galleries.
fn upscale_mask(mask: &BitMask) -> BitMask {
    let mut out = BitMask::all_valid(mask.h * 2, mask.w * 2);
    for i in 0..out.h {
        for j in 0..out.w {
            out.set(i, j, mask.at(i / 2, j / 2));
        }
    }
    out
}

fn labeled(strips: &[LoadedStrip], spectrum: Spectrum) -> Vec<LabeledStrip> {
    strips
        .iter()
        .map(|s| (s.class_id, s.label(spectrum), s.normalized()))
        .collect()
}

fn translated_gallery(
    gen: &TranslateGenerator,
    gallery: &[LoadedStrip],
    spectrum: Spectrum,
) -> Result<Vec<LabeledStrip>> {
    gallery
        .iter()
        .map(|s| {
            let img = translate_image(gen, &s.image)?;
            let mask = if img.h == s.mask.h { s.mask.clone() } else { upscale_mask(&s.mask) };
            Ok((s.class_id, s.label(spectrum), NormalizedIris { strip: img, mask }))
        })
        .collect()
}

/// Direct cross-spectral IrisCode matching (no learned model).
pub fn score_baseline(
    manifest: &DatasetManifest,
    cfg: &RunConfig,
    resolution: Resolution,
) -> Result<(ScoreSet, Vec<ScoredPair>)> {
    let probes = load_selection(manifest, Split::Test, Spectrum::Vis, resolution)?;
    let gallery = load_selection(manifest, Split::Test, Spectrum::Nir, resolution)?;
    score_iriscode(
        &labeled(&probes, Spectrum::Vis),
        &labeled(&gallery, Spectrum::Nir),
        &cfg.gabor,
        cfg.max_shift,
        &format!("baseline {resolution:?} VIS vs {resolution:?} NIR"),
    )
}

/// Score the test split for the configured scenario.
pub fn score_scenario(
    models: &ScenarioModels,
    manifest: &DatasetManifest,
    cfg: &RunConfig,
) -> Result<(ScoreSet, Vec<ScoredPair>)> {
    match (models, cfg.scenario) {
        (ScenarioModels::Baseline, _) => score_baseline(manifest, cfg, cfg.resolution),
        (ScenarioModels::Translate(t), Scenario::S1NirToVis) => {
            let probes = load_selection(manifest, Split::Test, Spectrum::Vis, cfg.resolution)?;
            let gallery = load_selection(manifest, Split::Test, Spectrum::Nir, cfg.resolution)?;
            score_iriscode(
                &labeled(&probes, Spectrum::Vis),
                &translated_gallery(&t.gen, &gallery, Spectrum::Nir)?,
                &cfg.gabor,
                cfg.max_shift,
                "S1_nir2vis synthesized gallery",
            )
        }
        (ScenarioModels::Translate(t), Scenario::S3VisToNir) => {
            let probes = load_selection(manifest, Split::Test, Spectrum::Nir, cfg.resolution)?;
            let gallery = load_selection(manifest, Split::Test, Spectrum::Vis, cfg.resolution)?;
            score_iriscode(
                &labeled(&probes, Spectrum::Nir),
                &translated_gallery(&t.gen, &gallery, Spectrum::Vis)?,
                &cfg.gabor,
                cfg.max_shift,
                "S3_vis2nir synthesized gallery",
            )
        }
        (ScenarioModels::Translate(t), Scenario::S2aJointSr) => {
            let probes = load_selection(manifest, Split::Test, Spectrum::Vis, Resolution::Hr)?;
            let gallery = load_selection(manifest, Split::Test, Spectrum::Nir, Resolution::Lr)?;
            score_iriscode(
                &labeled(&probes, Spectrum::Vis),
                &translated_gallery(&t.gen, &gallery, Spectrum::Nir)?,
                &cfg.gabor,
                cfg.max_shift,
                "S2a_joint_sr synthesized gallery",
            )
        }
        (ScenarioModels::TwoStage(s1, s2), Scenario::S2bSeparate) => {
            let probes = load_selection(manifest, Split::Test, Spectrum::Vis, Resolution::Hr)?;
            let gallery = load_selection(manifest, Split::Test, Spectrum::Nir, Resolution::Lr)?;
            let synth = gallery
                .iter()
                .map(|s| {
                    let lr_vis = translate_image(&s1.gen, &s.image)?;
                    let hr_vis = translate_image(&s2.gen, &lr_vis)?;
                    Ok((
                        s.class_id,
                        s.label(Spectrum::Nir),
                        NormalizedIris { strip: hr_vis, mask: upscale_mask(&s.mask) },
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            score_iriscode(
                &labeled(&probes, Spectrum::Vis),
                &synth,
                &cfg.gabor,
                cfg.max_shift,
                "S2b_separate composed gallery",
            )
        }
        (ScenarioModels::Coupled(m), Scenario::Cpgan) => {
            let probes = load_selection(manifest, Split::Test, Spectrum::Vis, m.vis_res)?;
            let gallery = load_selection(manifest, Split::Test, Spectrum::Nir, m.nir_res)?;
            let embed = |strips: &[LoadedStrip], spec: Spectrum| -> Result<Vec<LabeledEmbedding>> {
                strips
                    .iter()
                    .map(|s| Ok((s.class_id, s.label(spec), m.embed(spec, &s.image)?)))
                    .collect()
            };
            score_embeddings(
                &embed(&probes, Spectrum::Vis)?,
                &embed(&gallery, Spectrum::Nir)?,
                "CPGAN embedding distance",
            )
        }
        _ => Err(Error::arg("score_scenario", "models do not match the configured scenario")),
    }
}

fn translator_cfg_json(t: &TrainedTranslator) -> serde_json::Value {
    serde_json::json!({ "translate": t.gen.cfg })
}

/// Persist scenario models under the run directory's checkpoints/.
pub fn save_models(models: &ScenarioModels, rd: &RunDir, cfg: &RunConfig) -> Result<()> {
    match models {
        ScenarioModels::Baseline => Ok(()),
        ScenarioModels::Translate(t) => {
            save_checkpoint_with_state(
                &rd.checkpoint("generator"),
                &translator_cfg_json(t),
                &t.gen.params(),
                &t.gen.state(),
            )?;
            save_checkpoint(
                &rd.checkpoint("discriminator"),
                &serde_json::json!({ "disc_width": cfg.disc_width }),
                &t.disc.params(),
            )
        }
        ScenarioModels::TwoStage(s1, s2) => {
            save_checkpoint_with_state(
                &rd.checkpoint("generator_stage1"),
                &translator_cfg_json(s1),
                &s1.gen.params(),
                &s1.gen.state(),
            )?;
            save_checkpoint_with_state(
                &rd.checkpoint("generator_stage2"),
                &translator_cfg_json(s2),
                &s2.gen.params(),
                &s2.gen.state(),
            )?;
            save_checkpoint(
                &rd.checkpoint("discriminator_stage1"),
                &serde_json::json!({ "disc_width": cfg.disc_width }),
                &s1.disc.params(),
            )?;
            save_checkpoint(
                &rd.checkpoint("discriminator_stage2"),
                &serde_json::json!({ "disc_width": cfg.disc_width }),
                &s2.disc.params(),
            )
        }
        ScenarioModels::Coupled(m) => {
            let gen_params = [m.g_vis.params(), m.g_nir.params()].concat();
            save_checkpoint(
                &rd.checkpoint("coupled"),
                &serde_json::json!({
                    "unet": m.g_vis.cfg,
                    "vis_res": m.vis_res,
                    "nir_res": m.nir_res,
                    "disc_width": cfg.disc_width,
                }),
                &gen_params,
            )?;
            save_checkpoint(
                &rd.checkpoint("d_vis"),
                &serde_json::json!({ "disc_width": cfg.disc_width }),
                &m.d_vis.params(),
            )?;
            save_checkpoint(
                &rd.checkpoint("d_nir"),
                &serde_json::json!({ "disc_width": cfg.disc_width }),
                &m.d_nir.params(),
            )
        }
    }
}

/// Rebuild a translation generator from a generator checkpoint.
pub fn load_translator(path: &Path) -> Result<TranslateGenerator> {
    let ckpt = load_checkpoint(path)?;
    let cfg: TranslateConfig = serde_json::from_value(
        ckpt.cfg
            .get("translate")
            .cloned()
            .ok_or_else(|| Error::Msg(format!("{}: not a generator checkpoint", path.display())))?,
    )?;
    let gen = TranslateGenerator::build(&cfg, 0)?;
    restore(&ckpt, &gen.params())?;
    gen.set_state(&ckpt.states)?;
    Ok(gen)
}

/// Rebuild a coupled-embedding pair from a coupled checkpoint. The
/// discriminators are rebuilt untrained; only the generators matter for
/// embedding and translation at evaluation time.
pub fn load_coupled(path: &Path) -> Result<crate::train::cpgan::TrainedCoupled> {
    let ckpt = load_checkpoint(path)?;
    let field = |k: &str| {
        ckpt.cfg
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Msg(format!("{}: not a coupled checkpoint", path.display())))
    };
    let ucfg: UNetConfig = serde_json::from_value(field("unet")?)?;
    let vis_res: Resolution = serde_json::from_value(field("vis_res")?)?;
    let nir_res: Resolution = serde_json::from_value(field("nir_res")?)?;
    let disc_width: f32 = serde_json::from_value(field("disc_width")?)?;
    let g_vis = UNetGenerator::build(&ucfg, "vis", 0)?;
    let g_nir = UNetGenerator::build(&ucfg, "nir", 0)?;
    restore(&ckpt, &[g_vis.params(), g_nir.params()].concat())?;
    let dims = |r: Resolution| match r {
        Resolution::Hr => (64usize, 512usize),
        Resolution::Lr => (32, 256),
    };
    let (vh, vw) = dims(vis_res);
    let (nh, nw) = dims(nir_res);
    let d_vis = PatchDiscriminator::build(
        &DiscriminatorConfig { width_multiplier: disc_width, in_channels: 1, input_h: vh, input_w: vw },
        0,
    )?;
    let d_nir = PatchDiscriminator::build(
        &DiscriminatorConfig { width_multiplier: disc_width, in_channels: 1, input_h: nh, input_w: nw },
        0,
    )?;
    Ok(crate::train::cpgan::TrainedCoupled {
        g_vis,
        g_nir,
        d_vis,
        d_nir,
        vis_res,
        nir_res,
        log: Vec::new(),
    })
}

fn write_train_log(models: &ScenarioModels, rd: &RunDir) -> Result<()> {
    match models {
        ScenarioModels::Baseline => Ok(()),
        ScenarioModels::Translate(t) => t.write_log(&rd.train_log()),
        ScenarioModels::TwoStage(s1, s2) => {
            s1.write_log(&rd.train_log())?;
            s2.write_log(&rd.root.join("logs").join("train_stage2.csv"))
        }
        ScenarioModels::Coupled(m) => m.write_log(&rd.train_log()),
    }
}

/// Full run: train, score, and write every artifact of the run layout.
pub fn execute_run(manifest: &DatasetManifest, cfg: &RunConfig, out: &Path) -> Result<Report> {
    let rd = RunDir::create(out)?;
    cfg.save(&rd.config())?;
    let models = train_scenario(manifest, cfg)?;
    save_models(&models, &rd, cfg)?;
    write_train_log(&models, &rd)?;
    let (scores, rows) = score_scenario(&models, manifest, cfg)?;
    write_scores_csv(&rd.scores_csv(), &rows)?;
    let curve = roc(&scores)?;
    write_roc_csv(&rd.roc_csv(), &curve)?;
    let rep = report(&scores)?;
    let mut text = serde_json::to_string_pretty(&rep)?;
    text.push('\n');
    std::fs::write(rd.report_json(), text)?;
    Ok(rep)
}

/// Evaluate already-trained models on a disjoint dataset without fine-tuning.
pub fn cross_database_eval(
    models: &ScenarioModels,
    foreign: &DatasetManifest,
    cfg: &RunConfig,
    train_label: &str,
    test_label: &str,
) -> Result<Report> {
    let (scores, _) = score_scenario(models, foreign, cfg)?;
    let mut rep = report(&scores)?;
    rep.provenance = format!("{} [train={train_label} test={test_label}]", rep.provenance);
    Ok(rep)
}
