//! JSON pipeline configuration.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sonarwreck_core::pipeline::SynthesisConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub synthesis: SynthesisConfig,
    /// Directory of `.obj` wreck meshes; the built-in hull is used when unset.
    pub mesh_dir: Option<PathBuf>,
    /// Terrain tile library, required when `real_terrain` is on.
    pub terrain_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; all cores when unset.
    pub workers: Option<usize>,
}

impl PipelineConfig {
    /// Read a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.mesh_dir, &mut cfg.terrain_dir, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
