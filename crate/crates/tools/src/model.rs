//! Model directories: one binary file per band plus a JSON sidecar that
//! records the network and training configuration, their hash and the
//! digest of every binary.

use std::path::{Path, PathBuf};

use asfnet_core::regressor::{decode, encode, ModelSet, NetworkConfig, NetworkParams, TrainConfig, MODEL_VERSION};
use serde::{Deserialize, Serialize};

use crate::error::{ToolError, ToolResult};
use crate::io;
use crate::manifest::config_hash;

pub const SIDECAR: &str = "model.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub frequency: f64,
    pub file: String,
    pub sha256: String,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub network: NetworkConfig,
    pub training: TrainConfig,
    /// Hash of `network` and `training` together.
    pub config_hash: String,
    pub param_count: usize,
    pub dataset_sha256: String,
    /// Seed of the train/test split the models were selected on.
    pub split_seed: u64,
    pub bands: Vec<BandEntry>,
}

pub fn model_hash(network: &NetworkConfig, training: &TrainConfig) -> ToolResult<String> {
    config_hash(&(network, training))
}

pub fn band_file(frequency: f64) -> String {
    format!("model_{frequency}.bin")
}

/// Writes every band's binary and the sidecar into `dir`. Returns the paths
/// written, sidecar last.
pub fn save(
    dir: &Path,
    models: &[(f64, &NetworkParams, usize)],
    training: &TrainConfig,
    dataset_sha256: String,
    split_seed: u64,
) -> ToolResult<Vec<PathBuf>> {
    let network = models
        .first()
        .map(|m| m.1.config().clone())
        .ok_or_else(|| ToolError::usage("no models to save"))?;
    io::ensure_dir(dir)?;
    let mut written = Vec::new();
    let mut bands = Vec::new();
    for &(f, params, best_epoch) in models {
        let bytes = encode(params, f);
        let file = band_file(f);
        let path = dir.join(&file);
        io::write_bytes(&path, &bytes)?;
        written.push(path);
        bands.push(BandEntry {
            frequency: f,
            file,
            sha256: io::sha256_hex(&bytes),
            best_epoch,
        });
    }
    let sidecar = Sidecar {
        format_version: MODEL_VERSION,
        config_hash: model_hash(&network, training)?,
        param_count: network.param_count(),
        network,
        training: training.clone(),
        dataset_sha256,
        split_seed,
        bands,
    };
    let path = dir.join(SIDECAR);
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| ToolError::usage(e.to_string()))?;
    io::write_bytes(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Loads a model directory, refusing any disagreement between the sidecar
/// and the binaries.
pub fn load(dir: &Path) -> ToolResult<(ModelSet, Sidecar)> {
    let side_path = dir.join(SIDECAR);
    let sidecar: Sidecar =
        serde_json::from_str(&io::read_text(&side_path)?).map_err(|e| ToolError::parse(&side_path, e))?;
    if sidecar.format_version != MODEL_VERSION {
        return Err(ToolError::Mismatch(format!(
            "sidecar format {} but this build reads {MODEL_VERSION}",
            sidecar.format_version
        )));
    }
    let expect = model_hash(&sidecar.network, &sidecar.training)?;
    if expect != sidecar.config_hash {
        return Err(ToolError::Mismatch(format!(
            "{}: config hash {} does not match its configuration ({expect})",
            side_path.display(),
            sidecar.config_hash
        )));
    }
    let mut set = ModelSet::new();
    for b in &sidecar.bands {
        let path = dir.join(&b.file);
        let bytes = io::read_bytes(&path)?;
        let digest = io::sha256_hex(&bytes);
        if digest != b.sha256 {
            return Err(ToolError::Mismatch(format!(
                "{}: sha256 {digest} differs from the sidecar ({})",
                path.display(),
                b.sha256
            )));
        }
        let (params, f) = decode(&bytes)?;
        if f != b.frequency || params.config() != &sidecar.network {
            return Err(ToolError::Mismatch(format!(
                "{} holds a {f} Hz model whose layout differs from the sidecar",
                path.display()
            )));
        }
        set.insert(f, params)?;
    }
    Ok((set, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkParams {
        let cfg = NetworkConfig {
            n_points: 8,
            encoder: vec![4, 5],
            head: vec![6, 16],
        };
        NetworkParams::init(cfg, 3).unwrap()
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = tiny();
        let tc = TrainConfig::default();
        save(dir.path(), &[(125.0, &p, 4), (500.0, &p, 2)], &tc, "d".into(), 7).unwrap();
        let (set, side) = load(dir.path()).unwrap();
        assert_eq!(set.frequencies(), vec![125.0, 500.0]);
        assert_eq!(set.get(500.0).unwrap().values(), p.values());
        assert_eq!(side.split_seed, 7);
        assert_eq!(side.param_count, p.param_count());
    }

    #[test]
    fn tampering_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let p = tiny();
        save(dir.path(), &[(250.0, &p, 0)], &TrainConfig::default(), "d".into(), 0).unwrap();
        let bin = dir.path().join(band_file(250.0));
        let mut bytes = std::fs::read(&bin).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 1;
        std::fs::write(&bin, bytes).unwrap();
        let e = load(dir.path()).unwrap_err();
        assert!(matches!(e, ToolError::Mismatch(_)));
        assert_eq!(e.exit_code(), 2);

        let dir2 = tempfile::tempdir().unwrap();
        save(dir2.path(), &[(250.0, &p, 0)], &TrainConfig::default(), "d".into(), 0).unwrap();
        let side = dir2.path().join(SIDECAR);
        let text = std::fs::read_to_string(&side).unwrap().replace("\"epochs\": 100", "\"epochs\": 5");
        std::fs::write(&side, text).unwrap();
        assert!(matches!(load(dir2.path()).unwrap_err(), ToolError::Mismatch(_)));
    }
}
