//! Verification protocol: all-to-all pair enumeration, dissimilarity score
//! sets, ROC / GAR@FAR / EER metrics, and the CSV / JSON report formats.
//!
//! Every score in this module is a dissimilarity (lower = more similar);
//! similarity scores must be negated before ingestion.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iriscode::{encode, hamming, GaborBank};
use crate::normalize::NormalizedIris;

/// Genuine and impostor dissimilarity scores with their origin label.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: Vec<f32>,
    pub impostor: Vec<f32>,
    pub provenance: String,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f32>, impostor: Vec<f32>, provenance: impl Into<String>) -> Result<ScoreSet> {
        if genuine.iter().chain(&impostor).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score set"));
        }
        Ok(ScoreSet { genuine, impostor, provenance: provenance.into() })
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::Empty("score set needs both genuine and impostor scores"));
        }
        Ok(())
    }
}

/// One probe x gallery comparison, kept for the scores CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPair {
    pub probe: String,
    pub gallery: String,
    pub genuine: bool,
    pub score: f32,
}

/// All-to-all pairing over class-id lists: indices into (probes, gallery)
/// plus the genuine flag.
#[derive(Clone, Debug)]
pub struct PairProtocol {
    pub pairs: Vec<(usize, usize, bool)>,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

pub fn pair_protocol(probe_classes: &[u32], gallery_classes: &[u32]) -> Result<PairProtocol> {
    if probe_classes.is_empty() || gallery_classes.is_empty() {
        return Err(Error::Empty("pair_protocol"));
    }
    let mut pairs = Vec::with_capacity(probe_classes.len() * gallery_classes.len());
    let (mut ng, mut ni) = (0usize, 0usize);
    for (i, pc) in probe_classes.iter().enumerate() {
        for (j, gc) in gallery_classes.iter().enumerate() {
            let genuine = pc == gc;
            if genuine {
                ng += 1;
            } else {
                ni += 1;
            }
            pairs.push((i, j, genuine));
        }
    }
    Ok(PairProtocol { pairs, n_genuine: ng, n_impostor: ni })
}

/// Labeled strip: (class id, display label, normalized iris).
pub type LabeledStrip = (u32, String, NormalizedIris);

/// IrisCode matching over the all-to-all protocol: encode both sides once,
/// score every pair with shift-compensated masked Hamming distance.
pub fn score_iriscode(
    probes: &[LabeledStrip],
    gallery: &[LabeledStrip],
    bank: &GaborBank,
    max_shift: usize,
    provenance: &str,
) -> Result<(ScoreSet, Vec<ScoredPair>)> {
    let pcodes = probes
        .iter()
        .map(|(_, _, s)| encode(s, bank))
        .collect::<Result<Vec<_>>>()?;
    let gcodes = gallery
        .iter()
        .map(|(_, _, s)| encode(s, bank))
        .collect::<Result<Vec<_>>>()?;
    let proto = pair_protocol(
        &probes.iter().map(|p| p.0).collect::<Vec<_>>(),
        &gallery.iter().map(|g| g.0).collect::<Vec<_>>(),
    )?;
    let mut rows = Vec::with_capacity(proto.pairs.len());
    let (mut gen, mut imp) = (Vec::new(), Vec::new());
    for (i, j, genuine) in proto.pairs {
        let score = hamming(&pcodes[i], &gcodes[j], max_shift)?;
        if genuine {
            gen.push(score);
        } else {
            imp.push(score);
        }
        rows.push(ScoredPair {
            probe: probes[i].1.clone(),
            gallery: gallery[j].1.clone(),
            genuine,
            score,
        });
    }
    Ok((ScoreSet::new(gen, imp, provenance)?, rows))
}

/// Labeled embedding: (class id, display label, latent vector).
pub type LabeledEmbedding = (u32, String, Vec<f32>);

/// Euclidean-distance matching between embeddings over the same protocol.
pub fn score_embeddings(
    probes: &[LabeledEmbedding],
    gallery: &[LabeledEmbedding],
    provenance: &str,
) -> Result<(ScoreSet, Vec<ScoredPair>)> {
    let proto = pair_protocol(
        &probes.iter().map(|p| p.0).collect::<Vec<_>>(),
        &gallery.iter().map(|g| g.0).collect::<Vec<_>>(),
    )?;
    let mut rows = Vec::with_capacity(proto.pairs.len());
    let (mut gen, mut imp) = (Vec::new(), Vec::new());
    for (i, j, genuine) in proto.pairs {
        let (a, b) = (&probes[i].2, &gallery[j].2);
        if a.len() != b.len() {
            return Err(Error::shape("score_embeddings", "embedding lengths differ"));
        }
        let score =
            a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt() as f32;
        if genuine {
            gen.push(score);
        } else {
            imp.push(score);
        }
        rows.push(ScoredPair {
            probe: probes[i].1.clone(),
            gallery: gallery[j].1.clone(),
            genuine,
            score,
        });
    }
    Ok((ScoreSet::new(gen, imp, provenance)?, rows))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f32,
    pub far: f64,
    pub gar: f64,
}

/// ROC by threshold sweep over every distinct score value (accept iff
/// score < t), plus one point past the maximum so the curve reaches (1,1).
/// Sort-based: O(n log n).
pub fn roc(scores: &ScoreSet) -> Result<Vec<RocPoint>> {
    scores.check_nonempty()?;
    let mut gen = scores.genuine.clone();
    let mut imp = scores.impostor.clone();
    gen.sort_by(f32::total_cmp);
    imp.sort_by(f32::total_cmp);
    let mut thresholds: Vec<f32> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(f32::total_cmp);
    thresholds.dedup();
    let last = *thresholds.last().expect("non-empty");
    thresholds.push(last + last.abs().max(1.0) * 1e-3);
    let frac_below = |sorted: &[f32], t: f32| {
        sorted.partition_point(|&v| v < t) as f64 / sorted.len() as f64
    };
    Ok(thresholds
        .into_iter()
        .map(|t| RocPoint { threshold: t, far: frac_below(&imp, t), gar: frac_below(&gen, t) })
        .collect())
}

/// GAR linearly interpolated at the target FAR. The flag reports
/// extrapolation: a target below the curve's smallest achievable FAR, where
/// the GAR at that smallest FAR is returned instead.
pub fn gar_at_far(curve: &[RocPoint], far_target: f64) -> Result<(f64, bool)> {
    if curve.is_empty() {
        return Err(Error::Empty("roc curve"));
    }
    // upper envelope: best (max) GAR at each distinct FAR, FARs ascending
    let mut env: Vec<(f64, f64)> = Vec::new();
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.far, p.gar)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    for (far, gar) in pts {
        match env.last_mut() {
            Some((f, g)) if *f == far => *g = g.max(gar),
            _ => env.push((far, gar)),
        }
    }
    let (min_far, min_gar) = env[0];
    if far_target < min_far {
        return Ok((min_gar, true));
    }
    let (max_far, max_gar) = *env.last().expect("non-empty");
    if far_target >= max_far {
        return Ok((max_gar, false));
    }
    let hi = env.partition_point(|&(f, _)| f <= far_target);
    let (f0, g0) = env[hi - 1];
    let (f1, g1) = env[hi];
    let alpha = (far_target - f0) / (f1 - f0);
    Ok((g0 + alpha * (g1 - g0), false))
}

/// Interpolated equal error rate: the common value where the empirical FAR
/// and FRR step curves cross, linearly interpolated between steps.
pub fn eer(scores: &ScoreSet) -> Result<f64> {
    scores.check_nonempty()?;
    let mut gen = scores.genuine.clone();
    let mut imp = scores.impostor.clone();
    gen.sort_by(f32::total_cmp);
    imp.sort_by(f32::total_cmp);
    // FAR and FRR are constant on the open intervals between distinct score
    // values; walk the intervals in increasing threshold order
    let mut cuts: Vec<f32> = gen.iter().chain(&imp).copied().collect();
    cuts.sort_by(f32::total_cmp);
    cuts.dedup();
    let far_at = |t: f32| imp.partition_point(|&v| v < t) as f64 / imp.len() as f64;
    let frr_at = |t: f32| 1.0 - gen.partition_point(|&v| v < t) as f64 / gen.len() as f64;
    // interval representatives: below all scores, between neighbours, above all
    let mut reps = Vec::with_capacity(cuts.len() + 1);
    reps.push(cuts[0] - 1.0);
    for w in cuts.windows(2) {
        reps.push(0.5 * (w[0] + w[1]));
    }
    let last = *cuts.last().expect("non-empty");
    reps.push(last + 1.0);
    // also evaluate exactly at each cut (curves are left-continuous there)
    let mut prev: Option<(f64, f64)> = None;
    for t in reps {
        let (far, frr) = (far_at(t), frr_at(t));
        if far >= frr {
            return Ok(match prev {
                // interpolate the sign change of (FAR - FRR) between intervals
                Some((pf, pr)) if far > frr => {
                    let d0 = pf - pr; // < 0
                    let d1 = far - frr; // > 0
                    let alpha = -d0 / (d1 - d0);
                    (1.0 - alpha) * 0.5 * (pf + pr) + alpha * 0.5 * (far + frr)
                }
                _ => 0.5 * (far + frr),
            });
        }
        prev = Some((far, frr));
    }
    unreachable!("FAR reaches 1 and FRR reaches 0 above all scores");
}

/// Metric block reported per scenario, mirroring the verification tables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub provenance: String,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub eer: f64,
    pub gar_at_far_0_1: f64,
    pub gar_at_far_0_01: f64,
    pub gar_at_far_0_001: f64,
    /// Targets where the ROC could not reach the requested FAR.
    pub extrapolated: Vec<String>,
}

pub fn report(scores: &ScoreSet) -> Result<Report> {
    let curve = roc(scores)?;
    let mut extrapolated = Vec::new();
    let mut at = |target: f64, name: &str| -> Result<f64> {
        let (gar, flag) = gar_at_far(&curve, target)?;
        if flag {
            extrapolated.push(name.to_string());
        }
        Ok(gar)
    };
    let g1 = at(0.1, "0.1")?;
    let g2 = at(0.01, "0.01")?;
    let g3 = at(0.001, "0.001")?;
    Ok(Report {
        provenance: scores.provenance.clone(),
        n_genuine: scores.genuine.len(),
        n_impostor: scores.impostor.len(),
        eer: eer(scores)?,
        gar_at_far_0_1: g1,
        gar_at_far_0_01: g2,
        gar_at_far_0_001: g3,
        extrapolated,
    })
}

/// Aligned text table over several reports (GAR columns in percent).
pub fn report_table(reports: &[Report]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<40} {:>12} {:>12} {:>13} {:>9}\n",
        "scenario", "GAR@FAR=0.1", "GAR@FAR=0.01", "GAR@FAR=0.001", "EER"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<40} {:>11.2}% {:>11.2}% {:>12.2}% {:>8.2}%\n",
            r.provenance,
            100.0 * r.gar_at_far_0_1,
            100.0 * r.gar_at_far_0_01,
            100.0 * r.gar_at_far_0_001,
            100.0 * r.eer
        ));
    }
    out
}

pub fn write_scores_csv(path: &Path, rows: &[ScoredPair]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "probe_id,gallery_id,genuine,score")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.probe, r.gallery, u8::from(r.genuine), r.score)?;
    }
    Ok(())
}

pub fn read_scores_csv(path: &Path) -> Result<(ScoreSet, Vec<ScoredPair>)> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let (mut gen, mut imp) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "probe_id,gallery_id,genuine,score" {
                return Err(Error::Msg(format!("{}: bad scores header", path.display())));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Msg(format!("{}:{}: expected 4 fields", path.display(), i + 1)));
        }
        let genuine = match fields[2] {
            "0" => false,
            "1" => true,
            v => return Err(Error::Msg(format!("{}:{}: bad genuine flag {v}", path.display(), i + 1))),
        };
        let score: f32 = fields[3]
            .parse()
            .map_err(|_| Error::Msg(format!("{}:{}: bad score", path.display(), i + 1)))?;
        if genuine {
            gen.push(score);
        } else {
            imp.push(score);
        }
        rows.push(ScoredPair {
            probe: fields[0].to_string(),
            gallery: fields[1].to_string(),
            genuine,
            score,
        });
    }
    Ok((ScoreSet::new(gen, imp, path.display().to_string())?, rows))
}

pub fn write_roc_csv(path: &Path, curve: &[RocPoint]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "threshold,far,gar")?;
    for p in curve {
        writeln!(f, "{},{},{}", p.threshold, p.far, p.gar)?;
    }
    Ok(())
}
