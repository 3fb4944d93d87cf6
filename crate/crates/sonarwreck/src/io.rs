//! PNG and mesh IO.
//!
//! Label masks live in memory as 0/1 and on disk as 0/255 so they are visible
//! in an image viewer. Reading accepts either convention.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sonarwreck_core::mesh::{parse_obj, TriangleMesh};
use sonarwreck_core::{GrayImage, Grid, LabelMask, ShadowMask};

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)
        .with_context(|| format!("reading image {}", path.display()))?
        .into_luma8();
    let (w, h) = img.dimensions();
    Ok(Grid::from_vec(w as usize, h as usize, img.into_raw()).expect("luma buffer size"))
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.as_slice().to_vec())
        .expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_mask(path: &Path) -> Result<LabelMask> {
    let img = read_gray(path)?;
    if let Some((u, v, x)) = img.iter_indexed().find(|(_, _, &x)| !matches!(x, 0 | 1 | 255)) {
        bail!("{}: mask value {x} at ({u}, {v}) is neither 0 nor 255", path.display());
    }
    Ok(img.map(|&x| (x != 0) as u8))
}

pub fn write_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    write_gray(path, &mask.map(|&x| if x != 0 { 255 } else { 0 }))
}

pub fn read_shadow(path: &Path) -> Result<ShadowMask> {
    Ok(read_mask(path)?.map(|&x| x != 0))
}

pub fn write_shadow(path: &Path, shadow: &ShadowMask) -> Result<()> {
    write_gray(path, &shadow.map(|&x| if x { 255 } else { 0 }))
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path).with_context(|| format!("reading mesh {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let parsed = parse_obj(&name, &text).with_context(|| format!("parsing {}", path.display()))?;
    if parsed.degenerate_dropped > 0 {
        log::warn!("{}: dropped {} degenerate faces", path.display(), parsed.degenerate_dropped);
    }
    Ok(parsed.mesh)
}

/// Files in `dir` with extension `ext` (case-insensitive), sorted by name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let matches = path
            .extension()
            .is_some_and(|e| e.to_string_lossy().eq_ignore_ascii_case(ext));
        if path.is_file() && matches {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Every `.obj` mesh in `dir`, in file-name order.
pub fn load_mesh_dir(dir: &Path) -> Result<Vec<TriangleMesh>> {
    let files = list_files(dir, "obj")?;
    if files.is_empty() {
        bail!("no .obj meshes in {}", dir.display());
    }
    files.iter().map(|p| load_mesh(p)).collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
