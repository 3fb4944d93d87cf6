#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonarwreck::config::PipelineConfig;
use sonarwreck::io;
use sonarwreck_core::{GrayImage, Grid};

/// Seabed-like texture: smooth relief times Rayleigh speckle.
pub fn terrain_texture(seed: u64, width: usize, height: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = 24usize;
    let (gw, gh) = (width / cell + 2, height / cell + 2);
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(0.0..1.0)).collect();
    let sigma = (2.0 / std::f64::consts::PI).sqrt();
    Grid::from_fn(width, height, |u, v| {
        let (fx, fy) = (u as f64 / cell as f64, v as f64 / cell as f64);
        let (ix, iy) = (fx as usize, fy as usize);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let at = |i: usize, j: usize| lattice[j * gw + i];
        let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
        let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
        let relief = top * (1.0 - ty) + bottom * ty;
        let speckle = sigma * (-2.0 * (1.0 - rng.random::<f64>()).ln()).sqrt();
        (70.0 + 40.0 * relief) * (0.6 + 0.4 * speckle)
    })
    .map(|&x| x.round().clamp(0.0, 255.0) as u8)
}

/// Two sites with two tiles each.
pub fn write_terrain_library(dir: &Path, size: usize) {
    for (s, site) in ["harbor", "shelf"].iter().enumerate() {
        for t in 0..2 {
            let img = terrain_texture((s * 10 + t) as u64, size + 64, size + 48);
            io::write_gray(&dir.join(site).join(format!("tile{t}.png")), &img).unwrap();
        }
    }
}

/// Config for a small dataset at `size`² with a procedural terrain library.
pub fn small_config(dir: &Path, samples: usize, size: usize, seed: u64) -> PipelineConfig {
    let terrain = dir.join("terrain");
    if !terrain.exists() {
        write_terrain_library(&terrain, size);
    }
    let mut cfg = PipelineConfig::default();
    cfg.synthesis.samples = samples;
    cfg.synthesis.height = size;
    cfg.synthesis.width = size;
    cfg.synthesis.master_seed = seed;
    cfg.terrain_dir = Some(terrain);
    cfg
}
