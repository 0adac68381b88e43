//! Gabor phase-code baseline matcher: 1-D log-Gabor filtering of band-averaged
//! strip rows, sign quantization to two bits per sample, and masked normalized
//! Hamming distance with rotation compensation.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::NormalizedIris;

/// 1-D log-Gabor filter bank applied per band-averaged row.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GaborBank {
    /// Center wavelengths in pixels.
    pub wavelengths: Vec<f32>,
    /// Bandwidth parameter sigma/f0.
    pub sigma_on_f: f32,
    /// Number of band-averaged row groups the strip is reduced to.
    pub bands: usize,
}

impl Default for GaborBank {
    fn default() -> Self {
        GaborBank { wavelengths: vec![18.0], sigma_on_f: 0.5, bands: 8 }
    }
}

/// Binary phase code with per-bit validity. `bits` and `mask` are laid out
/// as rows x cols x 2 (real bit, imaginary bit), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IrisCode {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<bool>,
    pub mask: Vec<bool>,
}

impl IrisCode {
    #[inline]
    fn idx(&self, r: usize, c: usize, plane: usize) -> usize {
        (r * self.cols + c) * 2 + plane
    }

    pub fn valid_bits(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Frequency response of a log-Gabor filter over an n-point circular signal.
/// Defined on positive frequencies only, which makes the impulse response the
/// analytic (complex) wavelet.
fn log_gabor_response(n: usize, wavelength: f32, sigma_on_f: f32) -> Vec<f32> {
    let f0 = 1.0 / wavelength;
    let ln_sof = sigma_on_f.ln();
    let mut h = vec![0.0f32; n];
    for (k, hv) in h.iter_mut().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f32 / n as f32;
        *hv = (-(f / f0).ln().powi(2) / (2.0 * ln_sof * ln_sof)).exp();
    }
    h
}

/// Encode a normalized strip into a phase code. Rows are averaged into
/// `bank.bands` groups; each group row is circularly filtered by every
/// wavelength in the bank.
pub fn encode(strip: &NormalizedIris, bank: &GaborBank) -> Result<IrisCode> {
    let (h, w) = (strip.strip.h, strip.strip.w);
    if bank.wavelengths.is_empty() {
        return Err(Error::Empty("GaborBank"));
    }
    if bank.bands == 0 || bank.bands > h {
        return Err(Error::arg("encode", format!("bands {} vs strip height {h}", bank.bands)));
    }
    for &wl in &bank.wavelengths {
        if wl >= w as f32 {
            return Err(Error::arg("encode", format!("wavelength {wl} wider than strip ({w})")));
        }
    }
    let group = h / bank.bands;
    let mut planner = FftPlanner::<f32>::new();
    let fft = planner.plan_fft_forward(w);
    let ifft = planner.plan_fft_inverse(w);

    let rows = bank.bands * bank.wavelengths.len();
    let mut code = IrisCode {
        rows,
        cols: w,
        bits: vec![false; rows * w * 2],
        mask: vec![false; rows * w * 2],
    };

    for band in 0..bank.bands {
        // band-average rows over valid pixels; a column is valid when at
        // least half of its group rows are valid
        let r0 = band * group;
        let r1 = if band + 1 == bank.bands { h } else { r0 + group };
        let mut signal = vec![0.0f32; w];
        let mut col_valid = vec![false; w];
        for j in 0..w {
            let mut s = 0.0f32;
            let mut nv = 0usize;
            let mut total = 0.0f32;
            for i in r0..r1 {
                total += strip.strip.at(i, j);
                if strip.mask.at(i, j) {
                    s += strip.strip.at(i, j);
                    nv += 1;
                }
            }
            col_valid[j] = nv * 2 >= r1 - r0;
            signal[j] = if nv > 0 { s / nv as f32 } else { total / (r1 - r0) as f32 };
        }
        // remove DC so filtering is odd-symmetric under negation
        let mean: f32 = signal.iter().sum::<f32>() / w as f32;
        let mut buf: Vec<Complex<f32>> =
            signal.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
        fft.process(&mut buf);
        for (wi, &wl) in bank.wavelengths.iter().enumerate() {
            let hresp = log_gabor_response(w, wl, bank.sigma_on_f);
            let mut resp: Vec<Complex<f32>> =
                buf.iter().zip(&hresp).map(|(&b, &hv)| b * hv).collect();
            ifft.process(&mut resp);
            let row = wi * bank.bands + band;
            // dilate invalid columns by half the filter wavelength so bits
            // whose support crossed invalid pixels are dropped
            let radius = (wl / 2.0).ceil() as usize;
            for j in 0..w {
                let mut ok = true;
                for d in 0..=radius {
                    if !col_valid[(j + d) % w] || !col_valid[(j + w - d) % w] {
                        ok = false;
                        break;
                    }
                }
                let re = resp[j].re;
                let im = resp[j].im;
                let bi = code.idx(row, j, 0);
                code.bits[bi] = re > 0.0;
                code.bits[bi + 1] = im > 0.0;
                code.mask[bi] = ok;
                code.mask[bi + 1] = ok;
            }
        }
    }
    Ok(code)
}

fn shifted_col(c: usize, shift: i32, cols: usize) -> usize {
    (c as i32 - shift).rem_euclid(cols as i32) as usize
}

/// Masked normalized Hamming distance, minimized over angular shifts in
/// [-max_shift, +max_shift]. Columns of `b` are circularly shifted; the
/// joint mask moves with them.
pub fn hamming(a: &IrisCode, b: &IrisCode, max_shift: usize) -> Result<f32> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::shape("hamming", "code shapes differ"));
    }
    let mut best: Option<f32> = None;
    for shift in -(max_shift as i32)..=(max_shift as i32) {
        let mut disagree = 0usize;
        let mut total = 0usize;
        for r in 0..a.rows {
            for c in 0..a.cols {
                let sc = shifted_col(c, shift, a.cols);
                for p in 0..2 {
                    let ia = a.idx(r, c, p);
                    let ib = b.idx(r, sc, p);
                    if a.mask[ia] && b.mask[ib] {
                        total += 1;
                        if a.bits[ia] != b.bits[ib] {
                            disagree += 1;
                        }
                    }
                }
            }
        }
        if total > 0 {
            let hd = disagree as f32 / total as f32;
            best = Some(best.map_or(hd, |b: f32| b.min(hd)));
        }
    }
    best.ok_or_else(|| Error::Empty("hamming: joint mask empty at every shift"))
}

/// Encode the probe once and score it against every gallery code in order.
pub fn match_gallery(
    probe: &NormalizedIris,
    gallery: &[(u32, IrisCode)],
    bank: &GaborBank,
    max_shift: usize,
) -> Result<Vec<(u32, f32)>> {
    if gallery.is_empty() {
        return Err(Error::Empty("gallery"));
    }
    let pcode = encode(probe, bank)?;
    gallery
        .iter()
        .map(|(id, code)| Ok((*id, hamming(&pcode, code, max_shift)?)))
        .collect()
}

const MAGIC: &[u8; 4] = b"IC01";

fn pack_bits(bits: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            words[i / 64] |= 1u64 << (i % 64);
        }
    }
    words
}

fn unpack_bits(words: &[u64], n: usize) -> Vec<bool> {
    (0..n).map(|i| words[i / 64] >> (i % 64) & 1 == 1).collect()
}

impl IrisCode {
    /// Binary format: magic "IC01", u32 rows, u32 cols (little endian),
    /// packed bit plane then packed mask plane as little-endian u64 words.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&(self.rows as u32).to_le_bytes())?;
        f.write_all(&(self.cols as u32).to_le_bytes())?;
        for words in [pack_bits(&self.bits), pack_bits(&self.mask)] {
            for wv in words {
                f.write_all(&wv.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<IrisCode> {
        let mut raw = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut raw)?;
        if raw.len() < 12 || &raw[0..4] != MAGIC {
            return Err(Error::Msg(format!("{}: not an IC01 file", path.display())));
        }
        let rows = u32::from_le_bytes(raw[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(raw[8..12].try_into().unwrap()) as usize;
        let nbits = rows * cols * 2;
        let nwords = nbits.div_ceil(64);
        if raw.len() != 12 + 2 * nwords * 8 {
            return Err(Error::Msg(format!("{}: truncated IC01 file", path.display())));
        }
        let mut words = Vec::with_capacity(2 * nwords);
        for chunk in raw[12..].chunks_exact(8) {
            words.push(u64::from_le_bytes(chunk.try_into().unwrap()));
        }
        Ok(IrisCode {
            rows,
            cols,
            bits: unpack_bits(&words[..nwords], nbits),
            mask: unpack_bits(&words[nwords..], nbits),
        })
    }
}
