//! Grayscale image files: PGM (P5) and PNG, 8- or 16-bit, scaled to [0,1].

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{BitMask, Image2D};
use crate::error::{Error, Result};

/// Write an 8-bit binary PGM. Deterministic byte-for-byte.
pub fn write_pgm(path: &Path, img: &Image2D) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n255\n", img.w, img.h)?;
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<Image2D> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    parse_pgm(&raw).map_err(|e| Error::Msg(format!("{}: {e}", path.display())))
}

fn parse_pgm(raw: &[u8]) -> std::result::Result<Image2D, String> {
    let mut pos = 0usize;
    let mut token = || -> std::result::Result<String, String> {
        // skip whitespace and comments
        loop {
            while pos < raw.len() && raw[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < raw.len() && raw[pos] == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&raw[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("not a P5 PGM".into());
    }
    let w: usize = token()?.parse().map_err(|_| "bad width")?;
    let h: usize = token()?.parse().map_err(|_| "bad height")?;
    let maxval: u32 = token()?.parse().map_err(|_| "bad maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    pos += 1; // single whitespace after maxval
    let npix = w * h;
    let data = if maxval < 256 {
        if raw.len() < pos + npix {
            return Err("truncated pixel data".into());
        }
        raw[pos..pos + npix].iter().map(|&b| b as f32 / maxval as f32).collect()
    } else {
        if raw.len() < pos + 2 * npix {
            return Err("truncated pixel data".into());
        }
        raw[pos..pos + 2 * npix]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / maxval as f32)
            .collect()
    };
    Ok(Image2D { h, w, data })
}

pub fn write_png(path: &Path, img: &Image2D) -> Result<()> {
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.w as u32, img.h as u32, bytes)
        .ok_or_else(|| Error::Msg("png buffer size mismatch".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Read a grayscale PGM or PNG, scaling pixel values to [0,1].
pub fn read_image(path: &Path) -> Result<Image2D> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path),
        _ => {
            let img = image::open(path)?;
            let gray = img.to_luma16();
            let (w, h) = (gray.width() as usize, gray.height() as usize);
            let data = gray.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect();
            Ok(Image2D { h, w, data })
        }
    }
}

/// Mask file convention: `<stem>_mask.pgm` next to the image; absent file
/// means all-valid.
pub fn mask_path(image_path: &Path) -> std::path::PathBuf {
    let stem = image_path.file_stem().and_then(|s| s.to_str()).unwrap_or("img");
    image_path.with_file_name(format!("{stem}_mask.pgm"))
}

pub fn read_mask(image_path: &Path, h: usize, w: usize) -> Result<BitMask> {
    let mp = mask_path(image_path);
    if !mp.exists() {
        return Ok(BitMask::all_valid(h, w));
    }
    let img = read_pgm(&mp)?;
    if (img.h, img.w) != (h, w) {
        return Err(Error::shape("read_mask", "mask dims differ from image"));
    }
    Ok(BitMask { h, w, data: img.data.iter().map(|&v| v > 0.5).collect() })
}

pub fn write_mask(image_path: &Path, mask: &BitMask) -> Result<()> {
    let img = Image2D {
        h: mask.h,
        w: mask.w,
        data: mask.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    };
    write_pgm(&mask_path(image_path), &img)
}
