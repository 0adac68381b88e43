//! Training-set assembly: aligned cross-spectral pairs for the translation
//! networks, balanced genuine/impostor pair sampling for the coupled pair,
//! and image-to-tensor packing.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::io::{mask_path, read_image, read_mask};
use crate::data::manifest::{DatasetManifest, ManifestRecord, Resolution, Split};
use crate::data::{BitMask, Image2D, Spectrum};
use crate::error::{Error, Result};
use crate::normalize::NormalizedIris;
use crate::tensor::Tensor;

/// One loaded record: class, instance, strip and validity mask.
#[derive(Clone)]
pub struct LoadedStrip {
    pub class_id: u32,
    pub instance: u32,
    pub image: Image2D,
    pub mask: BitMask,
}

impl LoadedStrip {
    pub fn label(&self, spectrum: Spectrum) -> String {
        format!("c{:03}_i{:02}_{}", self.class_id, self.instance, spectrum)
    }

    pub fn normalized(&self) -> NormalizedIris {
        NormalizedIris { strip: self.image.clone(), mask: self.mask.clone() }
    }
}

pub fn load_selection(
    manifest: &DatasetManifest,
    split: Split,
    spectrum: Spectrum,
    resolution: Resolution,
) -> Result<Vec<LoadedStrip>> {
    let records = manifest.select(split, spectrum, resolution);
    if records.is_empty() {
        return Err(Error::Empty("manifest selection"));
    }
    records.iter().map(|r| load_record(manifest, r)).collect()
}

pub fn load_record(manifest: &DatasetManifest, r: &ManifestRecord) -> Result<LoadedStrip> {
    let path = manifest.resolve(r);
    let image = read_image(&path)?;
    let mask = if mask_path(&path).exists() {
        read_mask(&path, image.h, image.w)?
    } else {
        BitMask::all_valid(image.h, image.w)
    };
    Ok(LoadedStrip { class_id: r.class_id, instance: r.instance, image, mask })
}

/// Input/target pair aligned on (class, instance) for supervised translation.
pub struct AlignedPair {
    pub class_id: u32,
    pub input: Image2D,
    pub target: Image2D,
}

pub fn aligned_pairs(
    manifest: &DatasetManifest,
    split: Split,
    input_spec: Spectrum,
    input_res: Resolution,
    target_spec: Spectrum,
    target_res: Resolution,
) -> Result<Vec<AlignedPair>> {
    let inputs = load_selection(manifest, split, input_spec, input_res)?;
    let targets = load_selection(manifest, split, target_spec, target_res)?;
    let mut by_key: HashMap<(u32, u32), &LoadedStrip> = HashMap::new();
    for t in &targets {
        by_key.insert((t.class_id, t.instance), t);
    }
    let mut pairs = Vec::with_capacity(inputs.len());
    for i in &inputs {
        let t = by_key.get(&(i.class_id, i.instance)).ok_or_else(|| {
            Error::InvalidManifest(format!(
                "class {} instance {} has no {target_spec} {target_res:?} counterpart",
                i.class_id, i.instance
            ))
        })?;
        pairs.push(AlignedPair {
            class_id: i.class_id,
            input: i.image.clone(),
            target: t.image.clone(),
        });
    }
    Ok(pairs)
}

/// Pack images (all of one size) into an [N, 1, H, W] constant tensor.
pub fn batch_tensor(images: &[&Image2D]) -> Result<Tensor> {
    let (h, w) = match images.first() {
        Some(img) => (img.h, img.w),
        None => return Err(Error::Empty("batch")),
    };
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        if img.h != h || img.w != w {
            return Err(Error::shape("batch_tensor", "mixed image sizes in one batch"));
        }
        data.extend_from_slice(&img.data);
    }
    Tensor::from_vec(&[images.len(), 1, h, w], data)
}

/// Shuffled index batches of exactly `batch_size` (a trailing partial batch
/// is dropped so batch statistics stay well defined).
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size).filter(|c| c.len() == batch_size).map(|c| c.to_vec()).collect()
}

/// Balanced pair batch for the coupled generators: indices into the VIS and
/// NIR strip lists plus labels (0 genuine, 1 impostor).
pub struct PairBatch {
    pub vis_idx: Vec<usize>,
    pub nir_idx: Vec<usize>,
    pub labels: Vec<u8>,
}

/// Balanced sampler over one epoch: a shuffled pass over all genuine
/// (same-class) pairs, each batch topped up with freshly drawn impostor
/// pairs so |genuine - impostor| <= 1 always holds.
pub struct PairSampler {
    genuine: Vec<(usize, usize)>,
    vis_classes: Vec<u32>,
    nir_classes: Vec<u32>,
}

impl PairSampler {
    pub fn new(vis: &[LoadedStrip], nir: &[LoadedStrip]) -> Result<PairSampler> {
        let vis_classes: Vec<u32> = vis.iter().map(|s| s.class_id).collect();
        let nir_classes: Vec<u32> = nir.iter().map(|s| s.class_id).collect();
        let distinct: std::collections::HashSet<u32> =
            vis_classes.iter().chain(&nir_classes).copied().collect();
        if distinct.len() < 2 {
            return Err(Error::arg("pair_sampler", "need >= 2 classes for impostor pairs"));
        }
        let mut genuine = Vec::new();
        for (i, vc) in vis_classes.iter().enumerate() {
            for (j, nc) in nir_classes.iter().enumerate() {
                if vc == nc {
                    genuine.push((i, j));
                }
            }
        }
        if genuine.is_empty() {
            return Err(Error::Empty("no genuine cross-spectral pairs"));
        }
        Ok(PairSampler { genuine, vis_classes, nir_classes })
    }

    pub fn genuine_count(&self) -> usize {
        self.genuine.len()
    }

    /// One epoch of balanced batches; `batch_size` must be even and >= 2.
    pub fn epoch(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<PairBatch>> {
        if batch_size < 2 || batch_size % 2 != 0 {
            return Err(Error::arg("pair_sampler", "batch_size must be even and >= 2"));
        }
        let half = batch_size / 2;
        let mut order = self.genuine.clone();
        order.shuffle(rng);
        let mut batches = Vec::new();
        for chunk in order.chunks(half).filter(|c| c.len() == half) {
            let mut batch = PairBatch {
                vis_idx: Vec::with_capacity(batch_size),
                nir_idx: Vec::with_capacity(batch_size),
                labels: Vec::with_capacity(batch_size),
            };
            for &(i, j) in chunk {
                batch.vis_idx.push(i);
                batch.nir_idx.push(j);
                batch.labels.push(0);
            }
            for _ in 0..half {
                // rejection-sample a mismatched class pair
                loop {
                    let i = rng.gen_range(0..self.vis_classes.len());
                    let j = rng.gen_range(0..self.nir_classes.len());
                    if self.vis_classes[i] != self.nir_classes[j] {
                        batch.vis_idx.push(i);
                        batch.nir_idx.push(j);
                        batch.labels.push(1);
                        break;
                    }
                }
            }
            batches.push(batch);
        }
        Ok(batches)
    }
}
