//! Multi-threaded scan rendering.
//!
//! Each ping is rendered independently from `(scene, params, index)` and rows
//! are stitched in index order, so output bytes do not depend on the worker
//! count.

use anyhow::Result;
use rayon::prelude::*;
use sonarwreck_core::scene::Scene;
use sonarwreck_core::sonar::{render_row, ScanOutput, SonarError, SonarParams};

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

/// Render on the current rayon pool.
pub fn render_parallel(scene: &Scene, params: &SonarParams) -> Result<ScanOutput, SonarError> {
    params.validate(scene.altitude())?;
    let rows = (0..params.pings)
        .into_par_iter()
        .map(|i| render_row(scene, params, i))
        .collect();
    Ok(ScanOutput::from_rows(params.image_width(), rows))
}

/// Render on a dedicated pool of `workers` threads.
pub fn render_with_workers(scene: &Scene, params: &SonarParams, workers: usize) -> Result<ScanOutput> {
    let pool = thread_pool(workers)?;
    Ok(pool.install(|| render_parallel(scene, params))?)
}
