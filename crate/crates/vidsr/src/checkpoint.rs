//! Model checkpoint files.
//!
//! Layout: an 8-byte magic string, a little-endian `u32` format version, a
//! `u64` header length, a JSON header (network specs and run metadata),
//! the payload — every parameter tensor as little-endian `f32` in declaration
//! order, followed by the optimiser's first and second moments — and a
//! trailing SHA-256 over all preceding bytes. Serialisation is fully
//! deterministic, so save/load/save produces byte-identical files.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::motion::McNetwork;
use crate::network::{NetworkSpec, SrNetwork};
use crate::optim::AdamState;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"VSRCKPT\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointKind {
    Sr,
    Mc,
    Joint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamMeta {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: CheckpointKind,
    sr_spec: Option<NetworkSpec>,
    has_mc: bool,
    epoch: usize,
    seed: u64,
    config_hash: String,
    adam: AdamMeta,
    param_lengths: Vec<usize>,
}

/// A training state snapshot: networks, optimiser moments, epoch and the
/// seed/epoch pair that reproduces the data order.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub sr: Option<SrNetwork<f32>>,
    pub mc: Option<McNetwork<f32>>,
    pub adam: AdamState<f32>,
    pub epoch: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl Checkpoint {
    /// Parameters in the declaration order the payload uses: SR network
    /// first (when present), then the compensation network.
    pub fn parameters(&self) -> Vec<Tensor<f32>> {
        let mut params = Vec::new();
        if let Some(sr) = &self.sr {
            params.extend(sr.parameters());
        }
        if let Some(mc) = &self.mc {
            params.extend(mc.parameters());
        }
        params
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let params = self.parameters();
        let header = Header {
            kind: self.kind,
            sr_spec: self.sr.as_ref().map(|n| n.spec.clone()),
            has_mc: self.mc.is_some(),
            epoch: self.epoch,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            adam: AdamMeta {
                lr: self.adam.lr as f64,
                beta1: self.adam.beta1 as f64,
                beta2: self.adam.beta2 as f64,
                eps: self.adam.eps as f64,
                step: self.adam.step,
            },
            param_lengths: params.iter().map(|p| p.numel()).collect(),
        };
        if self.adam.first_moment.len() != params.len() {
            return Err(Error::invalid(format!(
                "optimiser tracks {} tensors but the networks hold {}",
                self.adam.first_moment.len(),
                params.len()
            )));
        }

        let header_json = serde_json::to_vec(&header)?;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&header_json);
        for p in &params {
            p.with_value(|v| {
                for &x in v.data() {
                    bytes.extend_from_slice(&x.to_le_bytes());
                }
            });
        }
        for moments in [&self.adam.first_moment, &self.adam.second_moment] {
            for m in moments {
                for &x in m {
                    bytes.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        let digest = Sha256::digest(&bytes);
        bytes.extend_from_slice(&digest);

        let mut file = std::fs::File::create(path)?;
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < MAGIC.len() + 4 + 8 + 32 {
            return Err(Error::format("checkpoint file is truncated"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 32);
        let digest = Sha256::digest(body);
        if digest.as_slice() != trailer {
            return Err(Error::format("checkpoint checksum mismatch"));
        }
        if &body[..8] != MAGIC {
            return Err(Error::format("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported checkpoint version {version} (supported: {FORMAT_VERSION})"
            )));
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        if 20 + header_len > body.len() {
            return Err(Error::format("checkpoint header overruns the file"));
        }
        let header: Header = serde_json::from_slice(&body[20..20 + header_len])?;
        let mut cursor = 20 + header_len;
        let mut take = |len: usize| -> Result<Vec<f32>> {
            let need = len * 4;
            if cursor + need > body.len() {
                return Err(Error::format("checkpoint payload is truncated"));
            }
            let out = body[cursor..cursor + need]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            cursor += need;
            Ok(out)
        };

        let sr = match &header.sr_spec {
            Some(spec) => Some(SrNetwork::<f32>::init(spec.clone(), 0)?),
            None => None,
        };
        let mc = if header.has_mc {
            Some(McNetwork::<f32>::init(0)?)
        } else {
            None
        };

        let params: Vec<Tensor<f32>> = sr
            .iter()
            .flat_map(|n| n.parameters())
            .chain(mc.iter().flat_map(|n| n.parameters()))
            .collect();
        if params.len() != header.param_lengths.len() {
            return Err(Error::format(format!(
                "checkpoint lists {} tensors but the specs imply {}",
                header.param_lengths.len(),
                params.len()
            )));
        }
        for (p, &len) in params.iter().zip(&header.param_lengths) {
            if p.numel() != len {
                return Err(Error::format(format!(
                    "parameter length mismatch: file has {}, spec implies {}",
                    len,
                    p.numel()
                )));
            }
            let data = take(len)?;
            p.update_value(|v| v.data_mut().copy_from_slice(&data));
        }
        let mut adam = AdamState::new(header.adam.lr, &params);
        adam.beta1 = header.adam.beta1 as f32;
        adam.beta2 = header.adam.beta2 as f32;
        adam.eps = header.adam.eps as f32;
        adam.step = header.adam.step;
        for i in 0..params.len() {
            adam.first_moment[i] = take(header.param_lengths[i])?;
        }
        for i in 0..params.len() {
            adam.second_moment[i] = take(header.param_lengths[i])?;
        }
        if cursor != body.len() {
            return Err(Error::format("trailing bytes after the checkpoint payload"));
        }

        Ok(Checkpoint {
            kind: header.kind,
            sr,
            mc,
            adam,
            epoch: header.epoch,
            seed: header.seed,
            config_hash: header.config_hash,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{FusionKind, NetworkSpec};

    fn sample_checkpoint(seed: u64) -> Checkpoint {
        let spec = NetworkSpec::build(FusionKind::Early, 3, 3, 2, None).unwrap();
        let sr = SrNetwork::<f32>::init(spec, seed).unwrap();
        let params = sr.parameters();
        let adam = AdamState::new(1e-4, &params);
        Checkpoint {
            kind: CheckpointKind::Sr,
            sr: Some(sr),
            mc: None,
            adam,
            epoch: 7,
            seed,
            config_hash: "abc123".into(),
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.vsr");
        let p2 = dir.path().join("b.vsr");
        let ck = sample_checkpoint(5);
        ck.save(&p1).unwrap();
        let loaded = Checkpoint::load(&p1).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(loaded.epoch, 7);
        assert_eq!(loaded.config_hash, "abc123");
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.vsr");
        sample_checkpoint(9).save(&p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&p, &bytes).unwrap();
        let err = Checkpoint::load(&p).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");
    }

    #[test]
    fn joint_checkpoints_carry_both_networks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.vsr");
        let spec = NetworkSpec::build(FusionKind::Early, 3, 3, 2, None).unwrap();
        let sr = SrNetwork::<f32>::init(spec, 3).unwrap();
        let mc = McNetwork::<f32>::init(4).unwrap();
        let params: Vec<_> = sr.parameters().into_iter().chain(mc.parameters()).collect();
        let ck = Checkpoint {
            kind: CheckpointKind::Joint,
            sr: Some(sr),
            mc: Some(mc),
            adam: AdamState::new(1e-4, &params),
            epoch: 0,
            seed: 1,
            config_hash: String::new(),
        };
        ck.save(&p).unwrap();
        let loaded = Checkpoint::load(&p).unwrap();
        assert!(loaded.sr.is_some() && loaded.mc.is_some());
        // Parameter values round-trip bitwise.
        for (a, b) in ck.parameters().iter().zip(loaded.parameters()) {
            assert_eq!(a.value().data(), b.value().data());
        }
    }
}
