//! Parallel dataset generation with a JSON-lines manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sonarwreck_core::mesh::TriangleMesh;
use sonarwreck_core::pipeline::{assign_splits, synthesize_sample, Provenance, SampleAssets, Split};

use crate::config::PipelineConfig;
use crate::terrain::TerrainLibrary;
use crate::{deff, io, render};

pub const MANIFEST: &str = "manifest.jsonl";
pub const FAILURES: &str = "failures.jsonl";

/// One manifest line. Paths are relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub split: Split,
    pub image: String,
    pub mask: String,
    pub deff: String,
    pub site: Option<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<Record>,
    pub failures: Vec<Failure>,
}

pub fn sample_id(index: u64) -> String {
    format!("s{index:06}")
}

/// Load the meshes and terrain a config refers to.
pub fn load_assets(cfg: &PipelineConfig) -> Result<(Vec<TriangleMesh>, Vec<sonarwreck_core::compositor::TerrainTile>)> {
    let meshes = match &cfg.mesh_dir {
        Some(dir) => io::load_mesh_dir(dir)?,
        None => Vec::new(),
    };
    let s = &cfg.synthesis;
    let terrain = if s.real_terrain {
        let Some(dir) = &cfg.terrain_dir else {
            bail!("real_terrain is on but no terrain_dir is configured");
        };
        TerrainLibrary::load(dir, (s.width, s.height))?.tiles
    } else {
        Vec::new()
    };
    Ok((meshes, terrain))
}

/// Generate `cfg.synthesis.samples` samples into `out` and write the manifest.
///
/// Failed samples are logged and listed in `failures.jsonl`; the run aborts
/// when more than 1% of samples fail.
pub fn generate_dataset(cfg: &PipelineConfig, out: &Path) -> Result<Manifest> {
    let s = &cfg.synthesis;
    s.validate()?;
    let (meshes, terrain) = load_assets(cfg)?;
    let assets = SampleAssets {
        meshes: &meshes,
        terrain: &terrain,
    };
    for sub in ["images", "masks", "fields"] {
        fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.display()))?;
    }
    let splits = assign_splits(s.master_seed, s.samples, s.split);
    let pool = render::thread_pool(cfg.workers.unwrap_or_else(rayon::current_num_threads))?;
    let results: Vec<Result<Record, Failure>> = pool.install(|| {
        (0..s.samples as u64)
            .into_par_iter()
            .map(|index| {
                write_sample(cfg, assets, out, index, splits[index as usize]).map_err(|e| {
                    log::error!("sample {index} failed: {e:#}");
                    Failure {
                        index,
                        error: format!("{e:#}"),
                    }
                })
            })
            .collect()
    });
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    if failures.len() * 100 > s.samples {
        bail!(
            "{} of {} samples failed (limit 1%); first error: {}",
            failures.len(),
            s.samples,
            failures[0].error
        );
    }
    write_jsonl(&out.join(MANIFEST), &records)?;
    if !failures.is_empty() {
        write_jsonl(&out.join(FAILURES), &failures)?;
    }
    log::info!("wrote {} samples to {}", records.len(), out.display());
    Ok(Manifest { records, failures })
}

fn write_sample(cfg: &PipelineConfig, assets: SampleAssets<'_>, out: &Path, index: u64, split: Split) -> Result<Record> {
    let sample = synthesize_sample(&cfg.synthesis, assets, index)?;
    let id = sample_id(index);
    let rec = Record {
        image: format!("images/{id}.png"),
        mask: format!("masks/{id}.png"),
        deff: format!("fields/{id}.deff"),
        site: sample.provenance.site.clone(),
        id,
        split,
        provenance: sample.provenance,
    };
    io::write_gray(&out.join(&rec.image), &sample.image)?;
    io::write_mask(&out.join(&rec.mask), &sample.mask)?;
    deff::write(&out.join(&rec.deff), &sample.field)?;
    Ok(rec)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<Record>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}
