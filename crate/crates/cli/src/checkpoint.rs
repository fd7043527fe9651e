//! Checkpoint directories: `manifest.txt` plus one binary file per parameter.
//!
//! ```text
//! format=coat-checkpoint
//! version=1
//! domain=maze
//! ...model config keys...
//! meta.seed=0
//! param preconv.0.kernel
//! ```
//!
//! Each `params/<name>.bin` holds the rank, the dims and the data, all
//! little-endian (`u64` rank and dims, `f32` values).

use std::collections::BTreeMap;
use std::path::Path;

use coat_core::{CoatError, Model, ModelConfig, ParamStore, Tensor};

use crate::error::{CliError, Result};
use crate::files::{read_text, write_atomic};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.txt";
const PARAM_DIR: &str = "params";

pub fn encode_tensor(t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (1 + t.shape().len()) + 4 * t.len());
    out.extend_from_slice(&(t.shape().len() as u64).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor<f32>> {
    let bad = |m: &str| CliError::Format(format!("tensor file: {m}"));
    let word = |i: usize| -> Result<u64> {
        let b = bytes.get(8 * i..8 * i + 8).ok_or_else(|| bad("truncated header"))?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    };
    let rank = word(0)? as usize;
    if rank > 8 {
        return Err(bad("implausible rank"));
    }
    let shape = (1..=rank).map(|i| word(i).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let body = &bytes[8 * (rank + 1)..];
    let n: usize = shape.iter().product();
    if body.len() != 4 * n {
        return Err(bad(&format!("expected {} data bytes, found {}", 4 * n, body.len())));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(Tensor::new(shape, data)?)
}

/// Writes every parameter file, then the manifest last so a readable
/// manifest always refers to complete files.
pub fn save(dir: &Path, model: &Model, meta: &[(&str, String)]) -> Result<()> {
    let mut manifest = format!("format=coat-checkpoint\nversion={CHECKPOINT_FORMAT_VERSION}\n");
    for (k, v) in model.config.to_pairs() {
        manifest.push_str(&format!("{k}={v}\n"));
    }
    for (k, v) in meta {
        manifest.push_str(&format!("meta.{k}={v}\n"));
    }
    for (name, _) in model.config.parameter_shapes() {
        let t = model
            .params
            .get(&name)
            .ok_or_else(|| CoatError::Config(format!("model is missing parameter {name}")))?;
        write_atomic(&dir.join(PARAM_DIR).join(format!("{name}.bin")), &encode_tensor(t))?;
        manifest.push_str(&format!("param {name}\n"));
    }
    write_atomic(&dir.join(MANIFEST), manifest.as_bytes())
}

pub struct Checkpoint {
    pub model: Model,
    pub meta: BTreeMap<String, String>,
}

pub fn load(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join(MANIFEST);
    let text = read_text(&path)?;
    parse_and_load(dir, &text).map_err(|e| e.in_file(path))
}

fn parse_and_load(dir: &Path, text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines();
    if lines.next() != Some("format=coat-checkpoint") {
        return Err(CliError::Format("not a checkpoint manifest".into()));
    }
    let version = lines
        .next()
        .and_then(|l| l.strip_prefix("version="))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| CliError::Format("manifest lacks a version line".into()))?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(CoatError::Version {
            found: version,
            expected: CHECKPOINT_FORMAT_VERSION,
        }
        .into());
    }
    let mut pairs = BTreeMap::new();
    let mut meta = BTreeMap::new();
    let mut names = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        if let Some(name) = line.strip_prefix("param ") {
            names.push(name.to_string());
        } else if let Some((k, v)) = line.split_once('=') {
            match k.strip_prefix("meta.") {
                Some(m) => meta.insert(m.to_string(), v.to_string()),
                None => pairs.insert(k.to_string(), v.to_string()),
            };
        } else {
            return Err(CliError::Format(format!("unreadable manifest line {line:?}")));
        }
    }
    let config = ModelConfig::from_pairs(&pairs)?;
    let expected = config.parameter_shapes();
    if expected.len() != names.len() || expected.iter().zip(&names).any(|((e, _), n)| e != n) {
        return Err(CoatError::Config("checkpoint parameters do not match its model config".into()).into());
    }
    let mut params = ParamStore::new();
    for (name, shape) in expected {
        let path = dir.join(PARAM_DIR).join(format!("{name}.bin"));
        let bytes = std::fs::read(&path).map_err(crate::files::io_err(&path))?;
        let t = decode_tensor(&bytes).map_err(|e| e.in_file(&path))?;
        if t.shape() != shape.as_slice() {
            return Err(CoatError::Config(format!(
                "parameter {name} has shape {:?}, config implies {shape:?}",
                t.shape()
            ))
            .into());
        }
        params.insert(name, t, true)?;
    }
    Ok(Checkpoint {
        model: Model { config, params },
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use coat_core::{build_model, DomainTag};

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let model: Model = build_model(&ModelConfig::desk(DomainTag::Sokoban), 3).unwrap();
        save(dir.path(), &model, &[("seed", "3".into())]).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back.model, model);
        assert_eq!(back.meta["seed"], "3");
    }

    #[test]
    fn rejects_unknown_version_and_mismatched_config() {
        let dir = tempfile::tempdir().unwrap();
        let model: Model = build_model(&ModelConfig::desk(DomainTag::Maze), 0).unwrap();
        save(dir.path(), &model, &[]).unwrap();
        let manifest = dir.path().join(MANIFEST);
        let text = std::fs::read_to_string(&manifest).unwrap();
        std::fs::write(&manifest, text.replace("version=1", "version=2")).unwrap();
        assert!(load(dir.path()).is_err());
        std::fs::write(&manifest, text.replace("fc1_width=64", "fc1_width=32")).unwrap();
        assert!(load(dir.path()).is_err());
    }

    #[test]
    fn tensor_bytes_round_trip() {
        let t = Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.0, 0.0, 1e-8, 7.0]).unwrap();
        assert_eq!(decode_tensor(&encode_tensor(&t)).unwrap(), t);
        assert!(decode_tensor(&encode_tensor(&t)[..20]).is_err());
    }
}
