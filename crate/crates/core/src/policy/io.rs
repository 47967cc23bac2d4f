use std::fs;
use std::path::{Path, PathBuf};

use super::model::Policy;
use super::{GraphormerConfig, PolicyError, Result};
use crate::nn::{load_checkpoint, save_checkpoint, DType};

/// `policy.ckpt` → `policy.ckpt.json`.
pub fn sidecar_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the weights and a JSON sidecar holding the config.
pub fn save_policy(policy: &Policy, path: &Path) -> Result<()> {
    save_checkpoint(path, &policy.params, DType::F64)?;
    let json = serde_json::to_string_pretty(&policy.config).map_err(|e| PolicyError::Sidecar(e.to_string()))?;
    fs::write(sidecar_path(path), json).map_err(|e| PolicyError::Sidecar(e.to_string()))?;
    Ok(())
}

/// Rebuilds a policy from its sidecar config and checkpoint. Every tensor
/// must match the config by name and shape.
pub fn load_policy(path: &Path) -> Result<Policy> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| PolicyError::Sidecar(format!("{}: {e}", side.display())))?;
    let config: GraphormerConfig = serde_json::from_str(&text).map_err(|e| PolicyError::Sidecar(e.to_string()))?;
    let mut policy = Policy::new(config, 0)?;
    let stored = load_checkpoint(path)?;
    policy.params.assign_from(&stored)?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let cfg = GraphormerConfig { layers: 1, scalars: 2, vectors: 2, key_dim: 3, ff_hidden: 4, trunk: [4, 4, 4, 4], out_scalars: 1, head_hidden: 3, critic_hidden: 3, ..Default::default() };
        let p = Policy::new(cfg, 17).unwrap();
        save_policy(&p, &path).unwrap();
        assert_eq!(load_policy(&path).unwrap(), p);
    }

    #[test]
    fn mismatched_sidecar_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let cfg = GraphormerConfig { layers: 1, scalars: 2, vectors: 2, key_dim: 3, ff_hidden: 4, trunk: [4, 4, 4, 4], out_scalars: 1, head_hidden: 3, critic_hidden: 3, ..Default::default() };
        save_policy(&Policy::new(cfg.clone(), 1).unwrap(), &path).unwrap();
        let other = GraphormerConfig { ff_hidden: 5, ..cfg };
        std::fs::write(sidecar_path(&path), serde_json::to_string(&other).unwrap()).unwrap();
        assert!(load_policy(&path).is_err());
    }
}
