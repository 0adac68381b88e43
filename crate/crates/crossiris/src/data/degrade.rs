//! LR synthesis: Gaussian blur followed by bicubic 2x downsampling.
//!
//! Iris strips wrap around in the angular (column) direction, so horizontal
//! filtering is circular while vertical filtering clamps at the edges.

use crate::data::{BitMask, Image2D, SpectralSample, HR_DIMS, LR_DIMS};
use crate::error::{Error, Result};

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f32> = (0..=2 * radius)
        .map(|i| {
            let x = i as f32 - radius as f32;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f32 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

pub fn gaussian_blur(img: &Image2D, sigma: f32) -> Image2D {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let radius = k.len() / 2;
    let (h, w) = (img.h, img.w);
    // horizontal pass, circular
    let mut tmp = Image2D::new(h, w);
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                let jj = (j + w + t - radius) % w;
                acc += kv * img.at(i, jj);
            }
            tmp.set(i, j, acc);
        }
    }
    // vertical pass, clamped
    let mut out = Image2D::new(h, w);
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                let ii = (i + t).saturating_sub(radius).min(h - 1);
                acc += kv * tmp.at(ii, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// Catmull-Rom cubic kernel (a = -0.5).
fn cubic(x: f32) -> f32 {
    let a = -0.5;
    let x = x.abs();
    if x < 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Bicubic resize to arbitrary dimensions; columns wrap, rows clamp.
pub fn bicubic_resize(img: &Image2D, oh: usize, ow: usize) -> Image2D {
    let (h, w) = (img.h, img.w);
    let sy = h as f32 / oh as f32;
    let sx = w as f32 / ow as f32;
    let mut out = Image2D::new(oh, ow);
    for oi in 0..oh {
        let cy = (oi as f32 + 0.5) * sy - 0.5;
        let iy = cy.floor() as isize;
        let fy = cy - iy as f32;
        let wy: Vec<f32> = (-1..=2).map(|t| cubic(t as f32 - fy)).collect();
        for oj in 0..ow {
            let cx = (oj as f32 + 0.5) * sx - 0.5;
            let ix = cx.floor() as isize;
            let fx = cx - ix as f32;
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (ti, &wyv) in wy.iter().enumerate() {
                let yy = (iy + ti as isize - 1).clamp(0, h as isize - 1) as usize;
                for tj in -1..=2isize {
                    let wxv = cubic(tj as f32 - fx);
                    let xx = (ix + tj).rem_euclid(w as isize) as usize;
                    acc += wyv * wxv * img.at(yy, xx);
                    wsum += wyv * wxv;
                }
            }
            out.set(oi, oj, acc / wsum);
        }
    }
    out
}

/// 64x512 HR strip -> 32x256 LR strip: Gaussian blur then bicubic 2x
/// downsample; the mask keeps an LR pixel only if its whole 2x2 HR footprint
/// was valid.
pub fn degrade_to_lr(sample: &SpectralSample, sigma: f32) -> Result<SpectralSample> {
    if (sample.image.h, sample.image.w) != HR_DIMS {
        return Err(Error::arg(
            "degrade_to_lr",
            format!("input is {}x{}, expected 64x512", sample.image.h, sample.image.w),
        ));
    }
    let blurred = gaussian_blur(&sample.image, sigma);
    let mut lr = bicubic_resize(&blurred, LR_DIMS.0, LR_DIMS.1);
    lr.clamp01();
    let mut mask = BitMask::all_valid(LR_DIMS.0, LR_DIMS.1);
    for i in 0..LR_DIMS.0 {
        for j in 0..LR_DIMS.1 {
            let valid = sample.mask.at(2 * i, 2 * j)
                && sample.mask.at(2 * i + 1, 2 * j)
                && sample.mask.at(2 * i, 2 * j + 1)
                && sample.mask.at(2 * i + 1, 2 * j + 1);
            mask.set(i, j, valid);
        }
    }
    let out = SpectralSample {
        class_id: sample.class_id,
        spectrum: sample.spectrum,
        instance: sample.instance,
        image: lr,
        mask,
    };
    Ok(out)
}
