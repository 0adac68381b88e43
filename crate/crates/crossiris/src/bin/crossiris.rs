//! Command-line front end. Every command is a deterministic function of
//! (config, input files, seed); exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crossiris::config::{RunConfig, Scenario};
use crossiris::data::io::{read_image, write_png};
use crossiris::data::manifest::{load_manifest, DatasetManifest, Split};
use crossiris::data::synth::{generate_dataset, SynthParams};
use crossiris::eval::{read_scores_csv, report, report_table, roc, write_roc_csv, write_scores_csv};
use crossiris::train::{
    coupled_settings, execute_run, hyperparameter_sweep, load_coupled, load_translator, s1_task,
    s2a_task, s2b_tasks, s3_task, score_baseline, score_scenario, sweep_table, translate_image,
    translation_settings, write_sweep_csv, ScenarioModels,
};

#[derive(Parser)]
#[command(name = "crossiris", version, about = "Cross-spectral iris verification experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic bi-spectral dataset with manifest.
    GenData {
        /// Number of iris classes (>= 2).
        #[arg(long)]
        classes: u32,
        /// Instances per class and spectrum (>= 2).
        #[arg(long)]
        instances: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
        /// Instances per class reserved for training (rest are test).
        #[arg(long, default_value_t = 3)]
        train_instances: u32,
    },
    /// Train a translation GAN and evaluate it (scenario from the config).
    TrainCgan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Train the coupled-embedding pair and evaluate it.
    TrainCpgan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a trained generator over one normalized strip image.
    Translate {
        /// Generator checkpoint (checkpoints/generator*.ckpt of a run).
        #[arg(long)]
        ckpt: PathBuf,
        /// Input strip (PGM or PNG).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output PNG.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the test split of a manifest and write scores.csv + roc.csv.
    Match {
        #[arg(long)]
        mode: MatchMode,
        /// Model checkpoint (unused in baseline mode).
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Second-stage generator checkpoint (separate two-stage mode only).
        #[arg(long)]
        ckpt2: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for scores.csv and roc.csv.
        #[arg(long)]
        out: PathBuf,
        /// Config providing encoder and protocol settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute EER and GAR@{0.1,0.01,0.001} from a scores CSV.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        /// Optional report.json destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the loss-weight grid, one trained run per setting.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchMode {
    /// Direct cross-spectral IrisCode, no learned model.
    Baseline,
    /// Single translation generator applied to the gallery.
    Translate,
    /// Two-stage translation + super-resolution pipeline.
    TwoStage,
    /// Coupled-embedding distance matching.
    Cpgan,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    /// Adversarial/perceptual weights of the translation objective.
    Translation,
    /// GAN/perceptual/reconstruction weights of the coupled objective.
    Coupled,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<crossiris::error::Error> for CliError {
    fn from(e: crossiris::error::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

/// Usage error if `dir` exists non-empty and `force` is not given.
fn check_out_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if !force && dir.is_dir() && std::fs::read_dir(dir).map_or(false, |mut d| d.next().is_some()) {
        return Err(usage(format!("{} exists and is not empty (use --force)", dir.display())));
    }
    Ok(())
}

fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    cfg.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn load_manifest_checked(path: &Path) -> Result<DatasetManifest, CliError> {
    let m = load_manifest(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if !m.records.iter().any(|r| r.split == Split::Test) {
        return Err(usage(format!("{}: manifest has no test split", path.display())));
    }
    Ok(m)
}

fn manifest_for(cfg: &RunConfig) -> Result<DatasetManifest, CliError> {
    load_manifest_checked(&cfg.data_dir.join("manifest.jsonl"))
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::GenData { classes, instances, seed, out, force, train_instances } => {
            if classes < 2 {
                return Err(usage("--classes must be >= 2"));
            }
            if instances < 2 || train_instances == 0 || train_instances >= instances {
                return Err(usage("--instances must be >= 2 with 0 < --train-instances < --instances"));
            }
            check_out_dir(&out, force)?;
            let params = SynthParams { train_instances, ..SynthParams::default() };
            let manifest = generate_dataset(&out, classes, instances, seed, &params)?;
            println!(
                "wrote {} records ({} classes x {} instances) to {}",
                manifest.records.len(),
                classes,
                instances,
                out.display()
            );
            Ok(())
        }
        Cmd::TrainCgan { config, out, force } => {
            let cfg = load_run_config(&config)?;
            if cfg.scenario == Scenario::Cpgan {
                return Err(usage("config selects the coupled scenario; use train-cpgan"));
            }
            check_out_dir(&out, force)?;
            let rep = execute_run(&manifest_for(&cfg)?, &cfg, &out)?;
            print!("{}", report_table(&[rep]));
            Ok(())
        }
        Cmd::TrainCpgan { config, out, force } => {
            let cfg = load_run_config(&config)?;
            if cfg.scenario != Scenario::Cpgan {
                return Err(usage("config does not select the coupled scenario; use train-cgan"));
            }
            check_out_dir(&out, force)?;
            let rep = execute_run(&manifest_for(&cfg)?, &cfg, &out)?;
            print!("{}", report_table(&[rep]));
            Ok(())
        }
        Cmd::Translate { ckpt, input, out } => {
            let gen = load_translator(&ckpt)?;
            let img = read_image(&input)?;
            let result = translate_image(&gen, &img)?;
            write_png(&out, &result)?;
            println!("{} -> {} ({}x{})", input.display(), out.display(), result.h, result.w);
            Ok(())
        }
        Cmd::Match { mode, ckpt, ckpt2, manifest, out, config } => {
            let manifest = load_manifest_checked(&manifest)?;
            let cfg = match config {
                Some(p) => load_run_config(&p)?,
                None => RunConfig::default(),
            };
            let need = |c: &Option<PathBuf>| {
                c.clone().ok_or_else(|| usage("this mode requires --ckpt"))
            };
            let (scores, rows) = match mode {
                MatchMode::Baseline => score_baseline(&manifest, &cfg, cfg.resolution)?,
                MatchMode::Translate => {
                    let gen = load_translator(&need(&ckpt)?)?;
                    let task = match cfg.scenario {
                        Scenario::S1NirToVis => s1_task(),
                        Scenario::S3VisToNir => s3_task(),
                        Scenario::S2aJointSr => s2a_task(),
                        _ => {
                            return Err(usage(
                                "translate mode needs a single-generator scenario config",
                            ))
                        }
                    };
                    let models = ScenarioModels::Translate(wrap_translator(gen, &cfg, task)?);
                    score_scenario(&models, &manifest, &cfg)?
                }
                MatchMode::TwoStage => {
                    let (t1, t2) = s2b_tasks();
                    let s1 = wrap_translator(load_translator(&need(&ckpt)?)?, &cfg, t1)?;
                    let s2 = wrap_translator(
                        load_translator(
                            &ckpt2.ok_or_else(|| usage("two-stage mode requires --ckpt2"))?,
                        )?,
                        &cfg,
                        t2,
                    )?;
                    let mut cfg2 = cfg.clone();
                    cfg2.scenario = Scenario::S2bSeparate;
                    score_scenario(
                        &ScenarioModels::TwoStage(Box::new(s1), Box::new(s2)),
                        &manifest,
                        &cfg2,
                    )?
                }
                MatchMode::Cpgan => {
                    let model = load_coupled(&need(&ckpt)?)?;
                    let mut cfg2 = cfg.clone();
                    cfg2.scenario = Scenario::Cpgan;
                    score_scenario(&ScenarioModels::Coupled(model), &manifest, &cfg2)?
                }
            };
            std::fs::create_dir_all(&out).map_err(crossiris::error::Error::from)?;
            write_scores_csv(&out.join("scores.csv"), &rows)?;
            write_roc_csv(&out.join("roc.csv"), &roc(&scores)?)?;
            let rep = report(&scores)?;
            print!("{}", report_table(&[rep]));
            Ok(())
        }
        Cmd::Eval { scores, out } => {
            let (set, _) = read_scores_csv(&scores)?;
            let rep = report(&set)?;
            if let Some(path) = out {
                let mut text = serde_json::to_string_pretty(&rep)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                text.push('\n');
                std::fs::write(path, text).map_err(crossiris::error::Error::from)?;
            }
            print!("{}", report_table(&[rep]));
            Ok(())
        }
        Cmd::Ablate { config, grid, out, force } => {
            let cfg = load_run_config(&config)?;
            check_out_dir(&out, force)?;
            std::fs::create_dir_all(&out).map_err(crossiris::error::Error::from)?;
            let settings = match grid {
                Grid::Translation => translation_settings(&cfg.weights),
                Grid::Coupled => coupled_settings(&cfg.weights),
            };
            let rows = hyperparameter_sweep(&manifest_for(&cfg)?, &cfg, &settings)?;
            write_sweep_csv(&out.join("sweep.csv"), &rows)?;
            let table = sweep_table(&rows);
            std::fs::write(out.join("sweep.txt"), &table)
                .map_err(crossiris::error::Error::from)?;
            print!("{table}");
            Ok(())
        }
    }
}

/// Wrap a reloaded generator in the scorer's trained-model shell; the
/// placeholder discriminator is never evaluated at scoring time.
fn wrap_translator(
    gen: crossiris::models::TranslateGenerator,
    cfg: &RunConfig,
    task: crossiris::train::TranslationTask,
) -> Result<crossiris::train::TrainedTranslator, CliError> {
    let (h, w) = match task.target_res {
        crossiris::data::manifest::Resolution::Hr => (64, 512),
        crossiris::data::manifest::Resolution::Lr => (32, 256),
    };
    let dcfg = crossiris::models::DiscriminatorConfig {
        width_multiplier: cfg.disc_width,
        in_channels: 2,
        input_h: h,
        input_w: w,
    };
    let disc = crossiris::models::GlobalDiscriminator::build(&dcfg, 0)?;
    Ok(crossiris::train::TrainedTranslator { gen, disc, task, log: Vec::new() })
}
