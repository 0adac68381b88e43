//! Checkpoint file format: magic "CKPT", u64 JSON-header length, JSON header
//! (architecture config echo plus entry names/shapes), then raw little-endian
//! f32 buffers in header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Parameter;

const MAGIC: &[u8; 4] = b"CKPT";

#[derive(Serialize, Deserialize)]
struct Header {
    cfg: serde_json::Value,
    entries: Vec<Entry>,
    /// Non-learned buffers (e.g. batch-norm running statistics).
    #[serde(default)]
    states: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

pub fn save(path: &Path, cfg: &serde_json::Value, params: &[Parameter]) -> Result<()> {
    save_with_state(path, cfg, params, &[])
}

/// Like [`save`], with additional non-learned state buffers appended
/// after the parameter payload.
pub fn save_with_state(
    path: &Path,
    cfg: &serde_json::Value,
    params: &[Parameter],
    states: &[(String, Vec<f32>)],
) -> Result<()> {
    let header = Header {
        cfg: cfg.clone(),
        entries: params
            .iter()
            .map(|p| Entry { name: p.name.clone(), shape: p.tensor.shape().to_vec() })
            .collect(),
        states: states
            .iter()
            .map(|(name, data)| Entry { name: name.clone(), shape: vec![data.len()] })
            .collect(),
    };
    let hbytes = serde_json::to_vec(&header)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&(hbytes.len() as u64).to_le_bytes())?;
    f.write_all(&hbytes)?;
    for p in params {
        for v in p.tensor.data().iter() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    for (_, data) in states {
        for v in data {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub struct Checkpoint {
    pub cfg: serde_json::Value,
    pub tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
    pub states: Vec<(String, Vec<f32>)>,
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    if raw.len() < 12 || &raw[0..4] != MAGIC {
        return Err(Error::Msg(format!("{}: not a CKPT file", path.display())));
    }
    let hlen = u64::from_le_bytes(raw[4..12].try_into().unwrap()) as usize;
    if raw.len() < 12 + hlen {
        return Err(Error::Msg(format!("{}: truncated header", path.display())));
    }
    let header: Header = serde_json::from_slice(&raw[12..12 + hlen])?;
    let mut off = 12 + hlen;
    let mut tensors = Vec::with_capacity(header.entries.len());
    for e in header.entries {
        let n: usize = e.shape.iter().product();
        if raw.len() < off + 4 * n {
            return Err(Error::Msg(format!("{}: truncated buffer for {}", path.display(), e.name)));
        }
        let data: Vec<f32> = raw[off..off + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        off += 4 * n;
        tensors.push((e.name, e.shape, data));
    }
    let mut states = Vec::with_capacity(header.states.len());
    for e in header.states {
        let n: usize = e.shape.iter().product();
        if raw.len() < off + 4 * n {
            return Err(Error::Msg(format!("{}: truncated buffer for {}", path.display(), e.name)));
        }
        let data: Vec<f32> = raw[off..off + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        off += 4 * n;
        states.push((e.name, data));
    }
    if off != raw.len() {
        return Err(Error::Msg(format!("{}: trailing bytes", path.display())));
    }
    Ok(Checkpoint { cfg: header.cfg, tensors, states })
}

/// Copy checkpoint buffers into an already-built network's parameters,
/// matching on name and shape; every parameter must be covered exactly once.
pub fn restore(ckpt: &Checkpoint, params: &[Parameter]) -> Result<()> {
    if ckpt.tensors.len() != params.len() {
        return Err(Error::arg(
            "restore",
            format!("checkpoint has {} tensors, net has {}", ckpt.tensors.len(), params.len()),
        ));
    }
    for (p, (name, shape, data)) in params.iter().zip(&ckpt.tensors) {
        if &p.name != name || p.tensor.shape() != shape.as_slice() {
            return Err(Error::arg(
                "restore",
                format!("mismatch: net {} {:?} vs checkpoint {} {:?}", p.name, p.tensor.shape(), name, shape),
            ));
        }
        p.tensor.set_data(data)?;
    }
    Ok(())
}
