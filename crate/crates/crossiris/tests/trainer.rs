//! Training-loop behaviour on a small synthetic dataset: smoke runs,
//! determinism, reduced objectives, artifacts, and the sweep grid.

use std::sync::OnceLock;

use crossiris::config::{RunConfig, Scenario};
use crossiris::data::manifest::{DatasetManifest, Resolution, Split};
use crossiris::data::synth::{generate_dataset, SynthParams};
use crossiris::data::Spectrum;
use crossiris::losses::LossWeights;
use crossiris::models::{TranslateConfig, UNetConfig};
use crossiris::train::{
    embedding_audit, execute_run, hyperparameter_sweep, load_selection, load_translator,
    run_scenario_2b, s2b_tasks, train_cgan, train_cpgan, translate_image, translation_settings,
};

fn fixture() -> &'static (tempfile::TempDir, DatasetManifest) {
    static DATA: OnceLock<(tempfile::TempDir, DatasetManifest)> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let params = SynthParams { train_instances: 3, ..SynthParams::default() };
        let manifest =
            generate_dataset(dir.path(), 4, 5, 20260826, &params).expect("generate dataset");
        (dir, manifest)
    })
}

/// Smallest configuration that still exercises every code path.
fn tiny_cfg(scenario: Scenario, steps: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenario = scenario;
    cfg.resolution = Resolution::Lr;
    cfg.translate = TranslateConfig {
        width_multiplier: 0.0625,
        blocks: 1,
        super_resolve: false,
        in_channels: 1,
    };
    cfg.unet = UNetConfig { depth: 3, base_channels: 2, in_channels: 1, dropout: 0.5 };
    cfg.disc_width = 0.0625;
    cfg.batch_size = 2;
    cfg.steps = steps;
    cfg.seed = 11;
    cfg
}

#[test]
fn cgan_smoke_run_logs_every_step() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::S2bSeparate, 3);
    let (t1, _) = s2b_tasks();
    let trained = train_cgan(manifest, &cfg, t1, 0).expect("train");
    assert_eq!(trained.log.len(), 3);
    for (_, d, a, l2, p, t, acc) in &trained.log {
        for v in [d, a, l2, p, t] {
            assert!(v.is_finite(), "non-finite loss term in log");
        }
        assert!((0.0..=1.0).contains(acc));
    }
}

#[test]
fn cgan_is_deterministic_in_seed() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::S2bSeparate, 3);
    let (t1, _) = s2b_tasks();
    let a = train_cgan(manifest, &cfg, t1, 0).expect("first run");
    let b = train_cgan(manifest, &cfg, t1, 0).expect("second run");
    assert_eq!(a.log, b.log, "loss curves differ across identical runs");
    for (p, q) in a.gen.params().iter().zip(b.gen.params().iter()) {
        assert_eq!(p.name, q.name);
        assert_eq!(p.tensor.to_vec(), q.tensor.to_vec(), "weights diverge in {}", p.name);
    }

    let mut other = cfg.clone();
    other.seed = 12;
    let c = train_cgan(manifest, &other, t1, 0).expect("other seed");
    assert_ne!(a.log, c.log, "different seed produced an identical run");
}

#[test]
fn pure_reconstruction_objective_reduces_l2() {
    let (_, manifest) = fixture();
    let mut cfg = tiny_cfg(Scenario::S2bSeparate, 150);
    cfg.weights = LossWeights { lambda1: 0.0, lambda2: 0.0, ..cfg.weights };
    cfg.adam.lr = 2e-3;
    let (t1, _) = s2b_tasks();
    let trained = train_cgan(manifest, &cfg, t1, 0).expect("train");
    let first = trained.log[0].3;
    let last = trained.last_l2();
    assert!(
        last < 0.5 * first,
        "L2 did not halve under the pure reconstruction objective: {first} -> {last}"
    );
}

#[test]
fn stage_two_training_is_independent_of_stage_one() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::S2bSeparate, 2);
    let (s1, s2) = run_scenario_2b(manifest, &cfg).expect("two-stage run");
    assert!(s1.task.input_res == Resolution::Lr && !s1.task.super_resolve());
    assert!(s2.task.super_resolve());
    let (_, t2) = s2b_tasks();
    let solo = train_cgan(manifest, &cfg, t2, 100).expect("stage 2 alone");
    assert_eq!(solo.log, s2.log, "stage 2 depends on stage 1 having run");
}

#[test]
fn super_resolving_generator_doubles_dimensions() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::S2bSeparate, 1);
    let (_, t2) = s2b_tasks();
    let trained = train_cgan(manifest, &cfg, t2, 0).expect("train");
    let lr = load_selection(manifest, Split::Test, Spectrum::Vis, Resolution::Lr).expect("load");
    let out = translate_image(&trained.gen, &lr[0].image).expect("translate");
    assert_eq!((out.h, out.w), (64, 512));
    assert!(out.data.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn cpgan_coupling_decreases_and_embeddings_audit_finite() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::Cpgan, 40);
    let model =
        train_cpgan(manifest, &cfg, Resolution::Lr, Resolution::Lr).expect("train cpgan");
    assert_eq!(model.log.len(), 40);
    let early: f32 = model.log[..5].iter().map(|r| r.3).sum::<f32>() / 5.0;
    let late: f32 = model.log[35..].iter().map(|r| r.3).sum::<f32>() / 5.0;
    assert!(late < early, "coupling loss did not decrease: {early} -> {late}");

    let vis = load_selection(manifest, Split::Test, Spectrum::Vis, Resolution::Lr).expect("vis");
    let nir = load_selection(manifest, Split::Test, Spectrum::Nir, Resolution::Lr).expect("nir");
    let (genuine, impostor, sd) = embedding_audit(&model, &vis, &nir).expect("audit");
    assert!(genuine.is_finite() && impostor.is_finite() && sd.is_finite());
    assert!(genuine >= 0.0 && impostor >= 0.0 && sd >= 0.0);
}

#[test]
fn cpgan_is_deterministic_in_seed() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::Cpgan, 3);
    let a = train_cpgan(manifest, &cfg, Resolution::Lr, Resolution::Lr).expect("first");
    let b = train_cpgan(manifest, &cfg, Resolution::Lr, Resolution::Lr).expect("second");
    assert_eq!(a.log, b.log);
    for (p, q) in a.g_vis.params().iter().zip(b.g_vis.params().iter()) {
        assert_eq!(p.tensor.to_vec(), q.tensor.to_vec(), "weights diverge in {}", p.name);
    }
}

#[test]
fn splits_share_no_instances() {
    let (_, manifest) = fixture();
    for spectrum in [Spectrum::Vis, Spectrum::Nir] {
        let train =
            load_selection(manifest, Split::Train, spectrum, Resolution::Hr).expect("train");
        let test = load_selection(manifest, Split::Test, spectrum, Resolution::Hr).expect("test");
        for tr in &train {
            for te in &test {
                assert!(
                    (tr.class_id, tr.instance) != (te.class_id, te.instance),
                    "instance c{} i{} appears in both splits",
                    tr.class_id,
                    tr.instance
                );
            }
        }
    }
}

#[test]
fn execute_run_writes_the_full_artifact_layout() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::S1NirToVis, 2);
    let out = tempfile::tempdir().expect("tempdir");
    let run = out.path().join("run");
    let rep = execute_run(manifest, &cfg, &run).expect("run");
    assert!(rep.eer.is_finite());
    for rel in [
        "config.json",
        "checkpoints/generator.ckpt",
        "checkpoints/discriminator.ckpt",
        "logs/train.csv",
        "scores.csv",
        "roc.csv",
        "report.json",
    ] {
        assert!(run.join(rel).is_file(), "missing artifact {rel}");
    }
    let echoed = RunConfig::load(&run.join("config.json")).expect("config echo");
    assert_eq!(echoed.seed, cfg.seed);

    // a reloaded generator reproduces the trained one exactly
    let gen = load_translator(&run.join("checkpoints/generator.ckpt")).expect("load translator");
    let probe = load_selection(manifest, Split::Test, Spectrum::Nir, Resolution::Lr).expect("nir");
    let trained = crossiris::train::train_scenario(manifest, &cfg).expect("retrain");
    if let crossiris::train::ScenarioModels::Translate(t) = trained {
        let a = translate_image(&t.gen, &probe[0].image).expect("fresh");
        let b = translate_image(&gen, &probe[0].image).expect("reloaded");
        assert_eq!(a.data, b.data, "checkpoint roundtrip changed the output");
    } else {
        panic!("wrong model kind");
    }
}

#[test]
fn sweep_deduplicates_and_reports_one_row_per_setting() {
    let (_, manifest) = fixture();
    let cfg = tiny_cfg(Scenario::S1NirToVis, 2);
    let base = cfg.weights.clone();

    let grid = translation_settings(&base);
    assert_eq!(grid.len(), 6);
    assert_eq!(crossiris::train::coupled_settings(&base).len(), 7);

    // duplicate settings collapse to one trained row
    let settings = vec![grid[3].clone(), grid[3].clone()];
    let rows = hyperparameter_sweep(manifest, &cfg, &settings).expect("sweep");
    assert_eq!(rows.len(), 1);
    assert!(rows[0].eer.is_finite());

    let again = hyperparameter_sweep(manifest, &cfg, &settings).expect("sweep again");
    assert_eq!(rows[0].eer, again[0].eer, "sweep is not reproducible");
    assert_eq!(rows[0].gar_at_far_1e3, again[0].gar_at_far_1e3);
}
