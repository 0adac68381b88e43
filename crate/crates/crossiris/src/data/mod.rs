//! Dataset handling: synthetic bi-spectral generation, LR degradation and
//! image/manifest I/O.

pub mod degrade;
pub mod io;
pub mod manifest;
pub mod synth;

pub use degrade::{bicubic_resize, degrade_to_lr, gaussian_blur};
pub use io::{read_image, read_pgm, write_pgm, write_png};
pub use manifest::{load_manifest, DatasetManifest, ManifestRecord, Resolution, Split};
pub use synth::{generate_dataset, SynthParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense grayscale image, values in [0,1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2D {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Image2D {
    pub fn new(h: usize, w: usize) -> Image2D {
        Image2D { h, w, data: vec![0.0; h * w] }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f32>) -> Result<Image2D> {
        if data.len() != h * w {
            return Err(Error::shape("Image2D", format!("{h}x{w} vs {} values", data.len())));
        }
        Ok(Image2D { h, w, data })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.w + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.w + j] = v;
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Binary validity map paired with an image.
#[derive(Clone, Debug, PartialEq)]
pub struct BitMask {
    pub h: usize,
    pub w: usize,
    pub data: Vec<bool>,
}

impl BitMask {
    pub fn all_valid(h: usize, w: usize) -> BitMask {
        BitMask { h, w, data: vec![true; h * w] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> bool {
        self.data[i * self.w + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.w + j] = v;
    }

    pub fn valid_fraction(&self) -> f32 {
        self.data.iter().filter(|&&b| b).count() as f32 / self.data.len() as f32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Spectrum {
    Vis,
    Nir,
}

impl std::fmt::Display for Spectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Spectrum::Vis => write!(f, "VIS"),
            Spectrum::Nir => write!(f, "NIR"),
        }
    }
}

/// HR strips are 64x512, LR strips 32x256; nothing else is accepted.
pub const HR_DIMS: (usize, usize) = (64, 512);
pub const LR_DIMS: (usize, usize) = (32, 256);

/// One normalized iris strip with identity/spectrum labels and a mask.
#[derive(Clone, Debug)]
pub struct SpectralSample {
    pub class_id: u32,
    pub spectrum: Spectrum,
    pub instance: u32,
    pub image: Image2D,
    pub mask: BitMask,
}

impl SpectralSample {
    pub fn validate(&self) -> Result<()> {
        let dims = (self.image.h, self.image.w);
        if dims != HR_DIMS && dims != LR_DIMS {
            return Err(Error::arg(
                "SpectralSample",
                format!("strip is {}x{}, expected 64x512 or 32x256", dims.0, dims.1),
            ));
        }
        if (self.mask.h, self.mask.w) != dims {
            return Err(Error::shape("SpectralSample", "mask shape differs from image"));
        }
        if self.mask.valid_fraction() < 0.6 {
            return Err(Error::arg(
                "SpectralSample",
                format!("mask covers only {:.0}% valid pixels", self.mask.valid_fraction() * 100.0),
            ));
        }
        Ok(())
    }

    pub fn resolution(&self) -> Resolution {
        if (self.image.h, self.image.w) == HR_DIMS {
            Resolution::Hr
        } else {
            Resolution::Lr
        }
    }
}
