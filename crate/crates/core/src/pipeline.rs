//! One seeded pass from wreck placement to a composited sample.
//!
//! Everything here is pure: a sample is a function of the configuration, the
//! loaded assets and its index. The companion crate adds file IO and runs
//! samples in parallel.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::{self, CompositeError, CompositeOptions, TerrainTile};
use crate::deformation::{self, DeformError, DeformParams, DeformationField, Fractured};
use crate::grid::{GrayImage, LabelMask, ShadowMask, SHIPWRECK};
use crate::math;
use crate::mesh::{procedural_hull, TriangleMesh};
use crate::scene::{self, build_scene, RandomizationRanges, SceneError, ScenePlacement, SeabedConfig};
use crate::seed::{self, stage};
use crate::sonar::{self, ScanOutput, SonarError, SonarParams};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no meshes available")]
    NoMeshes,
    #[error("real terrain requested but the terrain library is empty")]
    NoTerrain,
    #[error("no placement fit the swath after {0} attempts")]
    PlacementFailed(usize),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Sonar(#[from] SonarError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error("sample {index}: {source}")]
    Sample {
        index: u64,
        source: Box<PipelineError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeformSettings {
    pub n_r: usize,
    pub n_theta: usize,
    /// Pixels, rounded to `f32`; `None` means `0.15 · min(H, W)`.
    pub r_max: Option<f64>,
}

impl Default for DeformSettings {
    fn default() -> Self {
        Self {
            n_r: DeformParams::DEFAULT_N_R,
            n_theta: DeformParams::DEFAULT_N_THETA,
            r_max: None,
        }
    }
}

impl DeformSettings {
    pub fn params(&self, width: usize, height: usize) -> DeformParams {
        let base = DeformParams::for_image(width, height);
        DeformParams {
            n_r: self.n_r,
            n_theta: self.n_theta,
            r_max: self.r_max.map_or(base.r_max, |r| r as f32 as f64),
        }
    }
}

/// Dimensions of the built-in hull used when no meshes are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HullSpec {
    pub length: f64,
    pub beam: f64,
    pub depth: f64,
}

impl Default for HullSpec {
    fn default() -> Self {
        Self {
            length: 20.0,
            beam: 5.0,
            depth: 2.5,
        }
    }
}

impl HullSpec {
    pub fn mesh(&self) -> TriangleMesh {
        procedural_hull(self.length, self.beam, self.depth)
    }
}

/// The path-free part of a pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub samples: usize,
    pub height: usize,
    pub width: usize,
    /// Fraction of samples assigned to the training split.
    pub split: f64,
    /// Composite onto real terrain (otherwise onto a rendered flat seabed).
    pub real_terrain: bool,
    /// Fracture the wreck with a quadrant field.
    pub ship_fracture: bool,
    pub master_seed: u64,
    /// Sensor height above the seabed in meters.
    pub altitude: f64,
    /// Along-track distance covered by one sample.
    pub along_track_extent: f64,
    /// `pings`, `range_bins`, `along_track_spacing` and `noise_seed` are
    /// derived per sample and ignored here.
    pub sonar: SonarParams,
    pub deform: DeformSettings,
    pub ranges: RandomizationRanges,
    pub seabed: SeabedConfig,
    pub composite: CompositeOptions,
    pub hull: HullSpec,
    pub max_placement_attempts: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            height: 1728,
            width: 1728,
            split: 0.8,
            real_terrain: true,
            ship_fracture: true,
            master_seed: 0,
            altitude: 12.0,
            along_track_extent: 60.0,
            sonar: SonarParams::default(),
            deform: DeformSettings::default(),
            ranges: RandomizationRanges::default(),
            seabed: SeabedConfig::default(),
            composite: CompositeOptions::default(),
            hull: HullSpec::default(),
            max_placement_attempts: 64,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.samples == 0 {
            return Err(PipelineError::InvalidConfig("sample count must be at least 1"));
        }
        if self.height == 0 || self.width == 0 {
            return Err(PipelineError::InvalidConfig("image size must be positive"));
        }
        if self.sonar.two_sided && !self.width.is_multiple_of(2) {
            return Err(PipelineError::InvalidConfig("two-sided scans need an even width"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(PipelineError::InvalidConfig("split must lie strictly between 0 and 1"));
        }
        if !(self.along_track_extent > 0.0) {
            return Err(PipelineError::InvalidConfig("along-track extent must be positive"));
        }
        if self.max_placement_attempts == 0 {
            return Err(PipelineError::InvalidConfig("need at least one placement attempt"));
        }
        self.ranges.validate()?;
        self.deform.params(self.width, self.height).validate()?;
        self.sonar_params(0).validate(self.altitude)?;
        Ok(())
    }

    /// Sonar parameters sized to the sample image.
    pub fn sonar_params(&self, sample_seed: u64) -> SonarParams {
        let mut p = self.sonar.clone();
        p.pings = self.height;
        p.range_bins = if p.two_sided { self.width / 2 } else { self.width };
        p.along_track_spacing = self.along_track_extent / self.height as f64;
        p.noise_seed = sample_seed;
        p
    }

    pub fn deform_params(&self) -> DeformParams {
        self.deform.params(self.width, self.height)
    }
}

/// Meshes and terrain shared by every sample.
#[derive(Debug, Clone, Copy)]
pub struct SampleAssets<'a> {
    pub meshes: &'a [TriangleMesh],
    pub terrain: &'a [TerrainTile],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub index: u64,
    pub sample_seed: u64,
    pub mesh: String,
    /// Terrain source id, or `None` for a rendered background.
    pub terrain: Option<String>,
    pub crop: Option<(usize, usize)>,
    pub site: Option<String>,
    pub real_terrain: bool,
    pub ship_fracture: bool,
    pub placement: ScenePlacement,
    pub placement_attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    /// Final composite `S`.
    pub image: GrayImage,
    /// Fractured wreck mask `M_f`.
    pub mask: LabelMask,
    pub shadow: ShadowMask,
    pub field: DeformationField,
    /// Unfractured render, kept for inspection and tests.
    pub render: ScanOutput,
    pub provenance: Provenance,
}

/// Stable per-sample seed.
pub fn sample_seed(master_seed: u64, index: u64) -> u64 {
    seed::derive(master_seed, index)
}

/// Render through [`sonar::render_scan`].
pub fn synthesize_sample(config: &SynthesisConfig, assets: SampleAssets<'_>, index: u64) -> Result<SyntheticSample, PipelineError> {
    synthesize_sample_with(config, assets, index, sonar::render_scan)
}

/// Like [`synthesize_sample`] with a caller-supplied scan renderer, which must
/// produce the same bytes as [`sonar::render_scan`].
pub fn synthesize_sample_with<F>(
    config: &SynthesisConfig,
    assets: SampleAssets<'_>,
    index: u64,
    render: F,
) -> Result<SyntheticSample, PipelineError>
where
    F: Fn(&scene::Scene, &SonarParams) -> Result<ScanOutput, SonarError>,
{
    synthesize(config, assets, index, render).map_err(|e| PipelineError::Sample {
        index,
        source: Box::new(e),
    })
}

fn synthesize<F>(config: &SynthesisConfig, assets: SampleAssets<'_>, index: u64, render: F) -> Result<SyntheticSample, PipelineError>
where
    F: Fn(&scene::Scene, &SonarParams) -> Result<ScanOutput, SonarError>,
{
    config.validate()?;
    let fallback;
    let meshes = if assets.meshes.is_empty() {
        fallback = [config.hull.mesh()];
        &fallback[..]
    } else {
        assets.meshes
    };
    if config.real_terrain && assets.terrain.is_empty() {
        return Err(PipelineError::NoTerrain);
    }
    let s = sample_seed(config.master_seed, index);
    let params = config.sonar_params(s);
    let swath = params.swath(config.altitude);
    let mut seabed = config.seabed.clone();
    if seabed.noise_amplitude != 0.0 {
        seabed.noise_seed = seed::derive(s, stage::SEABED);
    }

    // Redraw until the wreck fits the swath and shows up in the render.
    let mut rng = seed::rng_from(seed::derive(s, stage::PLACEMENT));
    let mut found = None;
    for attempt in 1..=config.max_placement_attempts {
        let mesh_index = rng.random_range(0..meshes.len());
        let placement = scene::randomize_placement(mesh_index, &meshes[mesh_index], &config.ranges, &mut rng)?;
        let scene = match build_scene(seabed.clone(), swath, meshes, alloc::vec![placement.clone()]) {
            Ok(scene) => scene,
            Err(SceneError::OutsideSwath { .. } | SceneError::TooTall { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let scan = render(&scene, &params)?;
        if scan.labels.count_eq(SHIPWRECK) > 0 {
            found = Some((placement, scan, attempt));
            break;
        }
    }
    let (placement, scan, attempts) = found.ok_or(PipelineError::PlacementFailed(config.max_placement_attempts))?;

    let (w, h) = (config.width, config.height);
    let dparams = config.deform_params();
    let (field, fractured) = if config.ship_fracture {
        let mut frng = seed::rng_from(seed::derive(s, stage::FIELD));
        let field = deformation::generate_quadrant_field(&scan.labels, &dparams, &mut frng)?;
        let fractured = deformation::apply_field(&scan.image, &scan.labels, &scan.shadow, &field)?;
        (field, fractured)
    } else {
        let fractured = Fractured {
            image: scan.image.clone(),
            mask: scan.labels.clone(),
            shadow: scan.shadow.clone(),
        };
        (DeformationField::identity(w, h, &dparams), fractured)
    };

    let (background, terrain, crop, site) = if config.real_terrain {
        let mut trng = seed::rng_from(seed::derive(s, stage::TERRAIN));
        let tile = &assets.terrain[trng.random_range(0..assets.terrain.len())];
        let (x, y) = compositor::random_crop_offset(tile.image.dims(), (w, h), &mut trng)?;
        let crop = compositor::crop(&tile.image, x, y, w, h);
        (crop, Some(tile.source.clone()), Some((x, y)), tile.site.clone())
    } else {
        let empty = build_scene(seabed, swath, meshes, Vec::new())?;
        (render(&empty, &params)?.image, None, None, None)
    };
    let image = compositor::composite(&fractured, &background, &config.composite)?;

    Ok(SyntheticSample {
        image,
        mask: fractured.mask,
        shadow: fractured.shadow,
        field,
        provenance: Provenance {
            index,
            sample_seed: s,
            mesh: meshes[placement.mesh_index].name.clone(),
            terrain,
            crop,
            site,
            real_terrain: config.real_terrain,
            ship_fracture: config.ship_fracture,
            placement,
            placement_attempts: attempts,
        },
        render: scan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Number of training samples out of `n`: `round(n · fraction)`.
pub fn train_count(n: usize, fraction: f64) -> usize {
    (math::round_half_up(n as f64 * fraction) as usize).min(n)
}

/// Hash-ranked split: the `train_count` samples with the smallest seeded hash
/// of their index are train, the rest val.
pub fn assign_splits(master_seed: u64, n: usize, fraction: f64) -> Vec<Split> {
    let key = seed::derive(master_seed, stage::SPLIT);
    let mut order: Vec<(u64, usize)> = (0..n).map(|i| (seed::derive(key, i as u64), i)).collect();
    order.sort_unstable();
    let mut out = alloc::vec![Split::Val; n];
    for &(_, i) in order.iter().take(train_count(n, fraction)) {
        out[i] = Split::Train;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn small(real_terrain: bool, ship_fracture: bool) -> SynthesisConfig {
        let mut c = SynthesisConfig {
            samples: 4,
            height: 64,
            width: 64,
            real_terrain,
            ship_fracture,
            master_seed: 7,
            ..Default::default()
        };
        c.sonar.rays_per_ping = 256;
        c
    }

    fn tiles() -> Vec<TerrainTile> {
        alloc::vec![TerrainTile {
            image: Grid::from_fn(80, 90, |u, v| (40 + (u * 7 + v * 13) % 60) as u8),
            source: "t0.png".into(),
            site: Some("siteA".into()),
        }]
    }

    fn assets(t: &[TerrainTile]) -> SampleAssets<'_> {
        SampleAssets { meshes: &[], terrain: t }
    }

    #[test]
    fn split_counts() {
        for (n, train) in [(10, 8), (10_000, 8000), (1, 1), (3, 2)] {
            let s = assign_splits(5, n, 0.8);
            assert_eq!(s.iter().filter(|x| **x == Split::Train).count(), train, "n={n}");
        }
        assert_eq!(assign_splits(5, 50, 0.8), assign_splits(5, 50, 0.8));
        assert_ne!(assign_splits(5, 50, 0.8), assign_splits(6, 50, 0.8));
    }

    #[test]
    fn sample_is_deterministic() {
        let t = tiles();
        let c = small(true, true);
        let a = synthesize_sample(&c, assets(&t), 1).unwrap();
        let b = synthesize_sample(&c, assets(&t), 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.image.dims(), (64, 64));
        assert_eq!(a.provenance.site.as_deref(), Some("siteA"));
        assert_ne!(synthesize_sample(&c, assets(&t), 2).unwrap().image, a.image);
    }

    #[test]
    fn fracture_off_keeps_render_mask() {
        let t = tiles();
        let s = synthesize_sample(&small(true, false), assets(&t), 0).unwrap();
        assert!(s.field.is_identity());
        assert_eq!(s.mask, s.render.labels);
    }

    #[test]
    fn terrain_toggle_only_changes_background() {
        let t = tiles();
        let on = synthesize_sample(&small(true, true), assets(&t), 3).unwrap();
        let off = synthesize_sample(&small(false, true), assets(&t), 3).unwrap();
        assert_eq!(on.mask, off.mask);
        assert_eq!(on.shadow, off.shadow);
        for (i, (a, b)) in on.image.as_slice().iter().zip(off.image.as_slice()).enumerate() {
            if on.mask.as_slice()[i] == SHIPWRECK {
                assert_eq!(a, b);
            }
        }
        assert!(off.provenance.terrain.is_none());
    }

    #[test]
    fn missing_terrain_is_reported_with_index() {
        let err = synthesize_sample(&small(true, true), assets(&[]), 9).unwrap_err();
        assert!(matches!(err, PipelineError::Sample { index: 9, ref source } if **source == PipelineError::NoTerrain));
    }
}
