//! Parameter checkpoints: a TOML document holding the architecture, the
//! latent vector and one named array per layer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{ArchConfig, LatentVector, NetParams};
use crate::error::{Error, Result};

const FORMAT: &str = "dipinv-checkpoint v1";

#[derive(Debug, Serialize, Deserialize)]
struct NamedArray {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    format: String,
    arch: ArchConfig,
    latent: Vec<f64>,
    arrays: Vec<NamedArray>,
}

pub fn checkpoint_to_string(params: &NetParams, z: &LatentVector) -> Result<String> {
    let arrays = params
        .slots()
        .into_iter()
        .map(|s| NamedArray {
            values: params.values[s.range()].to_vec(),
            name: s.name,
            shape: s.shape,
        })
        .collect();
    let doc = Document {
        format: FORMAT.into(),
        arch: params.arch.clone(),
        latent: z.as_slice().to_vec(),
        arrays,
    };
    toml::to_string(&doc).map_err(|e| Error::Config(format!("cannot serialise checkpoint: {e}")))
}

pub fn checkpoint_from_str(text: &str) -> Result<(NetParams, LatentVector)> {
    let doc: Document =
        toml::from_str(text).map_err(|e| Error::Config(format!("malformed checkpoint: {e}")))?;
    if doc.format != FORMAT {
        return Err(Error::Config(format!("unsupported checkpoint format {:?}", doc.format)));
    }
    doc.arch.validate()?;
    let slots = doc.arch.layout().slots;
    if slots.len() != doc.arrays.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} arrays, architecture needs {}",
            doc.arrays.len(),
            slots.len()
        )));
    }
    let mut values = Vec::with_capacity(doc.arch.n_params());
    for (slot, arr) in slots.iter().zip(doc.arrays) {
        if slot.name != arr.name || slot.shape != arr.shape || arr.values.len() != slot.len() {
            return Err(Error::Config(format!(
                "checkpoint array {} {:?} ({} values) does not match layer {} {:?}",
                arr.name,
                arr.shape,
                arr.values.len(),
                slot.name,
                slot.shape
            )));
        }
        values.extend(arr.values);
    }
    if doc.latent.len() != doc.arch.latent_dim {
        return Err(Error::Config(format!(
            "checkpoint latent vector has {} values, architecture expects {}",
            doc.latent.len(),
            doc.arch.latent_dim
        )));
    }
    Ok((NetParams::new(doc.arch, values)?, LatentVector::from_values(doc.latent)?))
}

pub fn save_checkpoint(path: &Path, params: &NetParams, z: &LatentVector) -> Result<()> {
    std::fs::write(path, checkpoint_to_string(params, z)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(NetParams, LatentVector)> {
    checkpoint_from_str(&std::fs::read_to_string(path)?)
}
