//! Writing anomaly volumes as per-level PNGs plus a JSON sidecar.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sonarwreck_core::anomaly::{AnomalyConfig, AnomalyVolume};
use sonarwreck_core::math::round_half_up;

use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub levels: usize,
    pub tau: Option<f64>,
    pub config: AnomalyConfig,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    pub files: Vec<String>,
}

pub fn config_hash(config: &AnomalyConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

/// Scores in `[0, 2]` map to `round(127.5 · A)`, clamped to 255.
pub fn score_to_pixel(a: f64) -> u8 {
    round_half_up(a * 127.5).clamp(0.0, 255.0) as u8
}

/// Write `{stem}_level{i}.png` for each level and `{stem}_anomaly.json`.
pub fn export_volume(volume: &AnomalyVolume, dir: &Path, stem: &str, tau: Option<f64>, config: &AnomalyConfig) -> Result<PathBuf> {
    let mut files = Vec::new();
    for (i, map) in volume.maps.iter().enumerate() {
        let name = format!("{stem}_level{}.png", i + 1);
        io::write_gray(&dir.join(&name), &map.map(|&a| score_to_pixel(a)))?;
        files.push(name);
    }
    let sidecar = Sidecar {
        levels: volume.depth(),
        tau,
        config: *config,
        config_hash: config_hash(config),
        files,
    };
    let path = dir.join(format!("{stem}_anomaly.json"));
    io::write_json(&path, &sidecar)?;
    Ok(path)
}
