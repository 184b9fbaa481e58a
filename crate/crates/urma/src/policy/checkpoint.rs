//! Versioned binary checkpoints: a JSON header (architecture, config
//! echo, RNG state) followed by named parameter blocks as raw f64
//! little-endian bytes. Round-trips are bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tensorgrad::Tensor;

use crate::morphology::RobotSpec;
use crate::policy::{Architecture, PolicyError, PolicyParams};

const MAGIC: &[u8; 8] = b"URMACKP1";

/// Everything needed to restore and keep training a policy.
pub struct Checkpoint {
    pub params: PolicyParams,
    /// Run configuration echo (opaque JSON produced by the trainer).
    pub config_echo: serde_json::Value,
    /// Serialized trainer RNG state.
    pub rng_state: Vec<u8>,
    /// Robots the baselines were laid out for (head slots, task IDs).
    pub fleet: Vec<RobotSpec>,
    /// Global step at save time, so schedules resume where they left off.
    pub global_step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    arch_config: crate::policy::ArchConfig,
    config_echo: serde_json::Value,
    rng_state: Vec<u8>,
    fleet: Vec<RobotSpec>,
    global_step: u64,
    blocks: Vec<BlockMeta>,
}

#[derive(Serialize, Deserialize)]
struct BlockMeta {
    name: String,
    rows: usize,
    cols: usize,
}

fn err(msg: impl Into<String>) -> PolicyError {
    PolicyError::Checkpoint(msg.into())
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<(), PolicyError> {
    let blocks = ckpt.params.blocks();
    let header = Header {
        architecture: ckpt.params.architecture(),
        arch_config: ckpt.params.config().clone(),
        config_echo: ckpt.config_echo.clone(),
        rng_state: ckpt.rng_state.clone(),
        fleet: ckpt.fleet.clone(),
        global_step: ckpt.global_step,
        blocks: blocks
            .iter()
            .map(|(name, t)| BlockMeta {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header).map_err(|e| err(e.to_string()))?;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path.as_ref()).map_err(|e| err(e.to_string()))?,
    );
    out.write_all(MAGIC).map_err(|e| err(e.to_string()))?;
    out.write_all(&(header_json.len() as u64).to_le_bytes())
        .map_err(|e| err(e.to_string()))?;
    out.write_all(&header_json).map_err(|e| err(e.to_string()))?;
    for (_, tensor) in &blocks {
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes()).map_err(|e| err(e.to_string()))?;
        }
    }
    out.flush().map_err(|e| err(e.to_string()))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, PolicyError> {
    let mut input = std::io::BufReader::new(
        std::fs::File::open(path.as_ref()).map_err(|e| err(e.to_string()))?,
    );
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|e| err(e.to_string()))?;
    if &magic != MAGIC {
        return Err(err("not a checkpoint file (bad magic)"));
    }
    let mut len_bytes = [0u8; 8];
    input
        .read_exact(&mut len_bytes)
        .map_err(|e| err(e.to_string()))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    input
        .read_exact(&mut header_json)
        .map_err(|e| err(e.to_string()))?;
    let header: Header =
        serde_json::from_slice(&header_json).map_err(|e| err(format!("bad header: {e}")))?;

    // rebuild a parameter skeleton with the right shapes, then overwrite
    // every block with the stored bytes
    let fleet_refs: Vec<&RobotSpec> = header.fleet.iter().collect();
    let mut params = PolicyParams::new(
        header.architecture,
        header.arch_config.clone(),
        &fleet_refs,
        0,
    );

    let mut stored: Vec<(String, Tensor)> = Vec::with_capacity(header.blocks.len());
    for meta in &header.blocks {
        let mut data = vec![0.0f64; meta.rows * meta.cols];
        for v in data.iter_mut() {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(|e| err(e.to_string()))?;
            *v = f64::from_le_bytes(b);
        }
        stored.push((
            meta.name.clone(),
            Tensor::new(meta.rows, meta.cols, data).map_err(|e| err(e.to_string()))?,
        ));
    }

    let mut idx = 0;
    let mut mismatch: Option<String> = None;
    params.visit_mut(&mut |name, tensor| {
        if mismatch.is_some() {
            return;
        }
        match stored.get(idx) {
            Some((stored_name, stored_tensor))
                if *stored_name == name && stored_tensor.shape() == tensor.shape() =>
            {
                *tensor = stored_tensor.clone();
            }
            Some((stored_name, _)) => {
                mismatch = Some(format!(
                    "block {idx}: expected {name:?}, checkpoint has {stored_name:?}"
                ));
            }
            None => mismatch = Some(format!("checkpoint is missing block {name:?}")),
        }
        idx += 1;
    });
    if let Some(m) = mismatch {
        return Err(err(m));
    }
    if idx != stored.len() {
        return Err(err(format!(
            "checkpoint has {} blocks, architecture expects {idx}",
            stored.len()
        )));
    }

    Ok(Checkpoint {
        params,
        config_echo: header.config_echo,
        rng_state: header.rng_state,
        fleet: header.fleet,
        global_step: header.global_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::table_robot;
    use crate::policy::ArchConfig;

    #[test]
    fn round_trip_is_bit_exact() {
        let a1 = table_robot("A1").unwrap();
        let cassie = table_robot("Cassie").unwrap();
        let fleet = vec![a1, cassie];
        let refs: Vec<&RobotSpec> = fleet.iter().collect();
        for arch in [
            Architecture::Urma,
            Architecture::Multihead,
            Architecture::Padding,
        ] {
            let params = PolicyParams::new(arch, ArchConfig::tiny(), &refs, 7);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("ckpt.bin");
            save_checkpoint(
                &path,
                &Checkpoint {
                    params: params.clone(),
                    config_echo: serde_json::json!({"seed": 7}),
                    rng_state: vec![1, 2, 3],
                    fleet: fleet.clone(),
                    global_step: 42,
                },
            )
            .unwrap();
            let loaded = load_checkpoint(&path).unwrap();
            assert_eq!(loaded.global_step, 42);
            assert_eq!(loaded.rng_state, vec![1, 2, 3]);
            let before = params.blocks();
            let after = loaded.params.blocks();
            assert_eq!(before.len(), after.len());
            for ((n1, t1), (n2, t2)) in before.iter().zip(after.iter()) {
                assert_eq!(n1, n2);
                assert_eq!(t1.data(), t2.data(), "block {n1} changed across round trip");
            }
        }
    }
}
