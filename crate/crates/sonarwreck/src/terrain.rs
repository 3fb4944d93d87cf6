//! Terrain tile libraries.
//!
//! PNG files directly inside the library directory have no site tag. PNG
//! files inside a subdirectory are tagged with that subdirectory's name.

use std::path::Path;

use anyhow::{bail, Result};
use sonarwreck_core::compositor::TerrainTile;

use crate::io;

#[derive(Debug, Clone)]
pub struct TerrainLibrary {
    pub tiles: Vec<TerrainTile>,
}

impl TerrainLibrary {
    /// Load every tile at least `target` (width, height) in size; smaller
    /// images are skipped with a warning.
    pub fn load(dir: &Path, target: (usize, usize)) -> Result<Self> {
        let mut groups = vec![(None, dir.to_path_buf())];
        let mut subdirs: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        for d in subdirs {
            let site = d.file_name().map(|s| s.to_string_lossy().into_owned());
            groups.push((site, d));
        }
        let mut tiles = Vec::new();
        for (site, d) in groups {
            for path in io::list_files(&d, "png")? {
                let image = io::read_gray(&path)?;
                if image.width() < target.0 || image.height() < target.1 {
                    log::warn!(
                        "skipping terrain {}: {}×{} is smaller than {}×{}",
                        path.display(),
                        image.width(),
                        image.height(),
                        target.0,
                        target.1
                    );
                    continue;
                }
                let source = path
                    .strip_prefix(dir)
                    .unwrap_or(&path)
                    .to_string_lossy()
                    .replace('\\', "/");
                tiles.push(TerrainTile {
                    image,
                    source,
                    site: site.clone(),
                });
            }
        }
        if tiles.is_empty() {
            bail!("no usable terrain tiles in {}", dir.display());
        }
        Ok(Self { tiles })
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sonarwreck_core::Grid;

    #[test]
    fn loads_tiles_with_sites_and_skips_small_ones() {
        let dir = tempfile::tempdir().unwrap();
        let big = Grid::filled(40, 40, 9u8);
        io::write_gray(&dir.path().join("root.png"), &big).unwrap();
        io::write_gray(&dir.path().join("alpha/a.png"), &big).unwrap();
        io::write_gray(&dir.path().join("beta/b.png"), &big).unwrap();
        io::write_gray(&dir.path().join("beta/tiny.png"), &Grid::filled(10, 40, 0u8)).unwrap();
        let lib = TerrainLibrary::load(dir.path(), (32, 32)).unwrap();
        assert_eq!(lib.len(), 3);
        let tags: Vec<_> = lib.tiles.iter().map(|t| (t.source.as_str(), t.site.as_deref())).collect();
        assert_eq!(tags, [("root.png", None), ("alpha/a.png", Some("alpha")), ("beta/b.png", Some("beta"))]);
    }

    #[test]
    fn empty_library_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(TerrainLibrary::load(dir.path(), (8, 8)).is_err());
    }
}
