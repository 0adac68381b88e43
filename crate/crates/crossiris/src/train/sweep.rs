//! Hyperparameter sweeps over the loss-weight grid, one full
//! train-and-evaluate cycle per setting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::eval::{gar_at_far, roc};
use crate::losses::LossWeights;
use crate::train::scenario::{score_scenario, train_scenario};

/// Outcome of one sweep setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub weights: LossWeights,
    pub gar_at_far_1e2: f64,
    pub gar_at_far_1e3: f64,
    pub eer: f64,
}

/// The translation-loss grid: four adversarial weights at fixed
/// perceptual weight, then two more perceptual weights at the winner.
pub fn translation_settings(base: &LossWeights) -> Vec<LossWeights> {
    [
        (1e0, 2e-3),
        (1e-2, 2e-3),
        (1e-4, 2e-3),
        (1e-6, 2e-3),
        (1e-6, 2e-2),
        (1e-6, 2e-1),
    ]
    .iter()
    .map(|&(lambda1, lambda2)| LossWeights { lambda1, lambda2, ..base.clone() })
    .collect()
}

/// The coupled-loss grid: perceptual weight descending at fixed L2
/// weight, then L2 weight varied around the winner.
pub fn coupled_settings(base: &LossWeights) -> Vec<LossWeights> {
    [
        (1.0, 1.0, 0.3),
        (1.0, 0.7, 0.3),
        (1.0, 0.5, 0.3),
        (1.0, 0.3, 0.3),
        (1.0, 0.3, 0.5),
        (1.0, 0.3, 0.7),
        (1.0, 0.3, 0.1),
    ]
    .iter()
    .map(|&(lambda3, lambda4, lambda5)| LossWeights { lambda3, lambda4, lambda5, ..base.clone() })
    .collect()
}

fn dedup(settings: &[LossWeights]) -> Vec<LossWeights> {
    let mut out: Vec<LossWeights> = Vec::new();
    for s in settings {
        let key = |w: &LossWeights| {
            (
                w.lambda1.to_bits(),
                w.lambda2.to_bits(),
                w.lambda3.to_bits(),
                w.lambda4.to_bits(),
                w.lambda5.to_bits(),
                w.margin.to_bits(),
            )
        };
        if !out.iter().any(|p| key(p) == key(s)) {
            out.push(s.clone());
        }
    }
    out
}

/// Train and evaluate one run per distinct setting, same seed and data
/// throughout, so rows differ only through the loss weights.
pub fn hyperparameter_sweep(
    manifest: &DatasetManifest,
    cfg: &RunConfig,
    settings: &[LossWeights],
) -> Result<Vec<SweepRow>> {
    let settings = dedup(settings);
    if settings.is_empty() {
        return Err(Error::arg("hyperparameter_sweep", "no settings given"));
    }
    let mut rows = Vec::with_capacity(settings.len());
    for weights in settings {
        weights.validate()?;
        let mut run_cfg = cfg.clone();
        run_cfg.weights = weights.clone();
        let models = train_scenario(manifest, &run_cfg)?;
        let (scores, _) = score_scenario(&models, manifest, &run_cfg)?;
        let curve = roc(&scores)?;
        let eer = crate::eval::eer(&scores)?;
        let (g2, _) = gar_at_far(&curve, 1e-2)?;
        let (g3, _) = gar_at_far(&curve, 1e-3)?;
        rows.push(SweepRow { weights, gar_at_far_1e2: g2, gar_at_far_1e3: g3, eer });
    }
    Ok(rows)
}

/// Render sweep rows as an aligned text table.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "lambda1   lambda2   lambda3   lambda4   lambda5   GAR@FAR=1e-2  GAR@FAR=1e-3  EER\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:<9.0e} {:<9.0e} {:<9.2} {:<9.2} {:<9.2} {:<13.4} {:<13.4} {:.4}\n",
            r.weights.lambda1,
            r.weights.lambda2,
            r.weights.lambda3,
            r.weights.lambda4,
            r.weights.lambda5,
            r.gar_at_far_1e2,
            r.gar_at_far_1e3,
            r.eer
        ));
    }
    out
}

/// Write sweep rows as CSV.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut text =
        String::from("lambda1,lambda2,lambda3,lambda4,lambda5,gar_at_far_1e2,gar_at_far_1e3,eer\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.weights.lambda1,
            r.weights.lambda2,
            r.weights.lambda3,
            r.weights.lambda4,
            r.weights.lambda5,
            r.gar_at_far_1e2,
            r.gar_at_far_1e3,
            r.eer
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}
