//! Parameter checkpoint container.
//!
//! Layout: 8-byte magic, little-endian u32 header length, a JSON header
//! listing parameter names/shapes plus free-form hyperparameters and
//! the RNG seed, then every parameter's values as little-endian f64 in
//! header order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamSet, Tensor};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"GRCNNCK1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub hyper: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
}

pub fn save<P: ParamSet>(
    path: &Path,
    params: &P,
    hyper: BTreeMap<String, serde_json::Value>,
    seed: u64,
) -> Result<()> {
    let mut names = Vec::new();
    let mut shapes = Vec::new();
    params.visit(&mut |name, t| {
        names.push(name.to_string());
        shapes.push(t.shape().to_vec());
    });
    let header = CheckpointHeader {
        names,
        shapes,
        hyper,
        seed,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    let mut buf = Vec::with_capacity(params.param_count() * 8);
    params.visit(&mut |_, t| {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    });
    file.write_all(&buf)?;
    Ok(())
}

/// Load a checkpoint into an existing parameter set whose names and
/// shapes must match the header exactly.
pub fn load<P: ParamSet>(path: &Path, params: &mut P) -> Result<CheckpointHeader> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config(format!(
            "{} is not a checkpoint file",
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 4];
    file.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;

    let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
    params.visit(&mut |name, t| expected.push((name.to_string(), t.shape().to_vec())));
    if expected.len() != header.names.len() {
        return Err(Error::Shape(format!(
            "checkpoint holds {} tensors, model has {}",
            header.names.len(),
            expected.len()
        )));
    }
    for (i, (name, shape)) in expected.iter().enumerate() {
        if *name != header.names[i] || *shape != header.shapes[i] {
            return Err(Error::Shape(format!(
                "checkpoint tensor {i} is {}{:?}, model expects {}{:?}",
                header.names[i], header.shapes[i], name, shape
            )));
        }
    }

    let total: usize = header.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let mut data = vec![0u8; total * 8];
    file.read_exact(&mut data)?;
    let mut flat = Vec::with_capacity(total);
    for chunk in data.chunks_exact(8) {
        flat.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    params.set_from_flat(&flat)?;
    Ok(header)
}

/// Convenience wrapper for a bare list of tensors.
pub struct NamedTensors(pub Vec<(String, Tensor)>);

impl ParamSet for NamedTensors {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (name, t) in &self.0 {
            f(name, t);
        }
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (name, t) in &mut self.0 {
            f(name, t);
        }
    }
}
