//! Run configuration: everything a training or evaluation run needs, echoed
//! as JSON into the run directory so every artifact is reproducible from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::manifest::Resolution;
use crate::error::{Error, Result};
use crate::iriscode::GaborBank;
use crate::losses::LossWeights;
use crate::models::{TranslateConfig, UNetConfig};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum Scenario {
    /// Translate the NIR gallery into synthesized VIS, match with IrisCode.
    #[serde(rename = "S1_nir2vis")]
    S1NirToVis,
    /// Jointly translate and 2x super-resolve the low-resolution NIR gallery.
    #[serde(rename = "S2a_joint_sr")]
    S2aJointSr,
    /// Separately trained translation and super-resolution stages, composed.
    #[serde(rename = "S2b_separate")]
    S2bSeparate,
    /// Reverse direction: translate the VIS gallery into synthesized NIR.
    #[serde(rename = "S3_vis2nir")]
    S3VisToNir,
    /// Coupled generators; match by embedding distance.
    #[serde(rename = "CPGAN")]
    Cpgan,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::S1NirToVis => "S1_nir2vis",
            Scenario::S2aJointSr => "S2a_joint_sr",
            Scenario::S2bSeparate => "S2b_separate",
            Scenario::S3VisToNir => "S3_vis2nir",
            Scenario::Cpgan => "CPGAN",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 2e-4, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::arg("adam", "lr must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::arg("adam", format!("{name} must be in [0,1)")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::arg("adam", "eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Directory holding manifest.jsonl and its images.
    pub data_dir: PathBuf,
    /// Operating resolution for the shape-preserving scenarios (S1, S3,
    /// CPGAN); S2a/S2b are fixed low -> high.
    pub resolution: Resolution,
    pub translate: TranslateConfig,
    pub unet: UNetConfig,
    pub disc_width: f32,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Seed of the frozen perceptual feature net (kept separate so runs with
    /// different training seeds share one perceptual metric).
    pub feature_seed: u64,
    pub gabor: GaborBank,
    pub max_shift: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::S1NirToVis,
            data_dir: PathBuf::from("data"),
            resolution: Resolution::Hr,
            translate: TranslateConfig::desk_scale(),
            unet: UNetConfig::desk_scale(),
            disc_width: 0.125,
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            batch_size: 4,
            steps: 200,
            seed: 1,
            feature_seed: 7_777,
            gabor: GaborBank::default(),
            max_shift: 8,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.weights.validate()?;
        if self.batch_size < 2 {
            return Err(Error::arg("run_config", "batch_size must be >= 2 (batch statistics)"));
        }
        if self.steps == 0 {
            return Err(Error::arg("run_config", "steps must be >= 1"));
        }
        if !(self.disc_width > 0.0 && self.disc_width <= 1.0) {
            return Err(Error::arg("run_config", "disc_width must be in (0,1]"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(std::fs::write(path, text)?)
    }
}

/// Fixed artifact layout inside a run directory.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<RunDir> {
        let root = root.into();
        std::fs::create_dir_all(root.join("checkpoints"))?;
        std::fs::create_dir_all(root.join("logs"))?;
        Ok(RunDir { root })
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{name}.ckpt"))
    }

    pub fn train_log(&self) -> PathBuf {
        self.root.join("logs").join("train.csv")
    }

    pub fn scores_csv(&self) -> PathBuf {
        self.root.join("scores.csv")
    }

    pub fn roc_csv(&self) -> PathBuf {
        self.root.join("roc.csv")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_unknown_key_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("config.json");
        let cfg = RunConfig { scenario: Scenario::Cpgan, seed: 9, ..Default::default() };
        cfg.save(&p).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap(), cfg);

        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        v["not_a_key"] = serde_json::json!(1);
        std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
        assert!(RunConfig::load(&p).is_err());
    }

    #[test]
    fn validation_catches_bad_fields() {
        assert!(RunConfig { batch_size: 1, ..Default::default() }.validate().is_err());
        assert!(RunConfig { steps: 0, ..Default::default() }.validate().is_err());
        let bad_adam = AdamConfig { lr: -1.0, ..Default::default() };
        assert!(RunConfig { adam: bad_adam, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn scenario_serde_names() {
        let s: Scenario = serde_json::from_str("\"S2a_joint_sr\"").unwrap();
        assert_eq!(s, Scenario::S2aJointSr);
        assert_eq!(serde_json::to_string(&Scenario::Cpgan).unwrap(), "\"CPGAN\"");
        assert_eq!(Scenario::S1NirToVis.to_string(), "S1_nir2vis");
    }

    #[test]
    fn run_dir_layout() {
        let dir = tempfile::tempdir().unwrap();
        let rd = RunDir::create(dir.path().join("run")).unwrap();
        assert!(rd.checkpoint("g").ends_with("checkpoints/g.ckpt"));
        assert!(rd.train_log().ends_with("logs/train.csv"));
        assert!(rd.root.join("checkpoints").is_dir());
    }
}
