//! Binary model files.
//!
//! Layout (little endian): 4-byte magic, `u32` version, `u32` layer count, then
//! per layer a `u32`-prefixed UTF-8 name, `u32` rank, `u32` dims and raw `f64`
//! data. A trailing `u64`-prefixed JSON block carries everything else.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::autoencoder::AutoencoderModel;
use super::svdd::{SvddArch, SvddModel, SvddNetwork, TrainingMeta};
use super::tensor::Tensor;
use super::NeuralError;

pub const SVDD_MAGIC: &[u8; 4] = b"KDSV";
pub const AE_MAGIC: &[u8; 4] = b"KDAE";
pub const MODEL_VERSION: u32 = 1;
const MAX_ELEMS: u64 = 1 << 28;

fn format_err(msg: impl Into<String>) -> NeuralError {
    NeuralError::Format(msg.into())
}

fn read_u32(r: &mut impl Read) -> Result<u32, NeuralError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, NeuralError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn write_container<W: Write, M: Serialize>(
    mut w: W,
    magic: &[u8; 4],
    layers: &[(String, &Tensor)],
    meta: &M,
) -> Result<(), NeuralError> {
    w.write_all(magic)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(layers.len() as u32).to_le_bytes())?;
    for (name, t) in layers {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    let json = serde_json::to_vec(meta).map_err(|e| format_err(e.to_string()))?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.flush()?;
    Ok(())
}

fn read_container<R: Read, M: for<'de> Deserialize<'de>>(
    mut r: R,
    magic: &[u8; 4],
) -> Result<(Vec<(String, Tensor)>, M), NeuralError> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(format_err(format!("bad magic {m:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != MODEL_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut layers = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        if len > 1024 {
            return Err(format_err("layer name too long"));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| format_err("layer name is not UTF-8"))?;
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(format_err("tensor rank too large"));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut n: u64 = 1;
        for _ in 0..rank {
            let d = read_u32(&mut r)?;
            n = n.saturating_mul(d as u64);
            shape.push(d as usize);
        }
        if n > MAX_ELEMS {
            return Err(format_err("tensor too large"));
        }
        let mut data = Vec::with_capacity(n as usize);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        layers.push((name, Tensor::from_vec(&shape, data)));
    }
    let json_len = read_u64(&mut r)?;
    if json_len > MAX_ELEMS {
        return Err(format_err("metadata block too large"));
    }
    let mut json = vec![0u8; json_len as usize];
    r.read_exact(&mut json)?;
    let meta = serde_json::from_slice(&json).map_err(|e| format_err(e.to_string()))?;
    Ok((layers, meta))
}

#[derive(Serialize, Deserialize)]
struct SvddMeta {
    arch: SvddArch,
    slope: f64,
    center: Vec<f64>,
    threshold: Option<f64>,
    weight_decay: f64,
    training: TrainingMeta,
}

const SVDD_LAYERS: [&str; 3] = ["conv1", "conv2", "fc"];

pub fn write_svdd<W: Write>(model: &SvddModel, w: W) -> Result<(), NeuralError> {
    let layers: Vec<(String, &Tensor)> = SVDD_LAYERS
        .iter()
        .map(|s| s.to_string())
        .zip(model.network.params())
        .collect();
    let meta = SvddMeta {
        arch: model.network.arch,
        slope: model.network.slope,
        center: model.center.clone(),
        threshold: model.threshold,
        weight_decay: model.weight_decay,
        training: model.meta.clone(),
    };
    write_container(w, SVDD_MAGIC, &layers, &meta)
}

pub fn read_svdd<R: Read>(r: R) -> Result<SvddModel, NeuralError> {
    let (layers, meta): (_, SvddMeta) = read_container(r, SVDD_MAGIC)?;
    let mut net = SvddNetwork::new(meta.arch, 0);
    net.slope = meta.slope;
    if layers.len() != SVDD_LAYERS.len() {
        return Err(format_err(format!("expected 3 layers, found {}", layers.len())));
    }
    for ((name, t), (want, slot)) in layers.into_iter().zip(SVDD_LAYERS.iter().zip(net.params_mut())) {
        if name != *want || t.shape() != slot.shape() {
            return Err(format_err(format!("layer {name} {:?} does not match {want}", t.shape())));
        }
        *slot = t;
    }
    if meta.center.len() != meta.arch.latent {
        return Err(format_err("center length does not match latent size"));
    }
    Ok(SvddModel {
        network: net,
        center: meta.center,
        threshold: meta.threshold,
        weight_decay: meta.weight_decay,
        meta: meta.training,
    })
}

#[derive(Serialize, Deserialize)]
struct AeMeta {
    sizes: Vec<usize>,
    threshold: Option<f64>,
    training: TrainingMeta,
}

pub fn write_autoencoder<W: Write>(model: &AutoencoderModel, w: W) -> Result<(), NeuralError> {
    let layers: Vec<(String, &Tensor)> = model
        .params
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("{}{}", if i % 2 == 0 { "w" } else { "b" }, i / 2), t))
        .collect();
    let meta = AeMeta {
        sizes: model.sizes.clone(),
        threshold: model.threshold,
        training: model.meta.clone(),
    };
    write_container(w, AE_MAGIC, &layers, &meta)
}

pub fn read_autoencoder<R: Read>(r: R) -> Result<AutoencoderModel, NeuralError> {
    let (layers, meta): (Vec<(String, Tensor)>, AeMeta) = read_container(r, AE_MAGIC)?;
    if meta.sizes.len() < 2 || layers.len() != 2 * (meta.sizes.len() - 1) {
        return Err(format_err("layer count does not match sizes"));
    }
    for (l, w) in meta.sizes.windows(2).enumerate() {
        if layers[2 * l].1.shape() != [w[1], w[0]] || layers[2 * l + 1].1.shape() != [w[1]] {
            return Err(format_err(format!("layer {l} has the wrong shape")));
        }
    }
    Ok(AutoencoderModel {
        sizes: meta.sizes,
        params: layers.into_iter().map(|(_, t)| t).collect(),
        threshold: meta.threshold,
        meta: meta.training,
    })
}
