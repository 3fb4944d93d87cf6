//! SONAR-equation ray casting into waterfall images.
//!
//! Each ping casts a vertical fan of rays across track. A ray's first hit at
//! slant distance `d` on a surface with reflectance `ρ` and incidence cosine
//! `cos θ` returns
//!
//! ```text
//! RI = SL - 2·TL(d) + TS,   TL(d) = 10·log10(d),   TS = 10·log10(ρ·cos θ)
//! ```
//!
//! Returns are accumulated per slant-range bin in the linear domain and then
//! converted back to dB. Rays are spaced so that, on a flat seabed, every
//! range bin past the nadir receives the same number of rays; each ray carries
//! an equal share of its bin's footprint.
//!
//! Image rows are pings (along track), columns are slant-range bins.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Ray, Vec3};
use crate::grid::{GrayImage, Grid, LabelMask, ShadowMask, SHIPWRECK, TERRAIN};
use crate::math;
use crate::scene::{Scene, Swath};
use crate::seed;

/// TS floor for grazing incidence.
pub const TS_FLOOR_DB: f64 = -80.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SonarError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("reflectance {0} outside (0, 1]")]
    BadReflectance(f64),
    #[error("invalid sonar parameters: {0}")]
    InvalidParams(&'static str),
}

/// Transmission loss `10·log10(d)` in dB.
pub fn transmission_loss(d: f64) -> Result<f64, SonarError> {
    if d > 0.0 {
        Ok(10.0 * math::log10(d))
    } else {
        Err(SonarError::NonPositiveDistance(d))
    }
}

/// Lambertian target strength `10·log10(ρ·cos θ)`, floored at [`TS_FLOOR_DB`].
pub fn target_strength(cos_incidence: f64, reflectance: f64) -> Result<f64, SonarError> {
    if !(reflectance > 0.0 && reflectance <= 1.0) {
        return Err(SonarError::BadReflectance(reflectance));
    }
    Ok(lambertian_ts(cos_incidence, reflectance))
}

#[inline]
fn lambertian_ts(cos_incidence: f64, reflectance: f64) -> f64 {
    let x = reflectance * cos_incidence.clamp(0.0, 1.0);
    if x <= 0.0 {
        return TS_FLOOR_DB;
    }
    (10.0 * math::log10(x)).max(TS_FLOOR_DB)
}

/// Returned intensity `SL - 2·TL(d) + TS` in dB.
pub fn sonar_intensity(source_level: f64, d: f64, target_strength: f64) -> Result<f64, SonarError> {
    Ok(source_level - 2.0 * transmission_loss(d)? + target_strength)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbWindow {
    pub lo: f64,
    pub hi: f64,
}

/// Map dB onto 0..=255: affine in the window, clamped, rounded half up.
pub fn db_to_pixel(ri_db: f64, window: DbWindow) -> u8 {
    let v = 255.0 * (ri_db - window.lo) / (window.hi - window.lo);
    math::round_half_up(v.clamp(0.0, 255.0)) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SonarParams {
    /// Source level in dB.
    pub source_level: f64,
    /// Rays cast per ping and side; spread evenly over the range bins.
    pub rays_per_ping: usize,
    /// Slant-range bins per side (image columns for a single-sided scan).
    pub range_bins: usize,
    pub max_slant_range: f64,
    /// Pixel mapping window. Defaults to `(SL - 90, SL - 20)`.
    pub db_window: Option<DbWindow>,
    /// Image rows.
    pub pings: usize,
    pub along_track_spacing: f64,
    /// Render port and starboard mirrored about the nadir.
    pub two_sided: bool,
    /// Mean-one Rayleigh multiplicative speckle in the linear domain.
    pub speckle: bool,
    pub noise_seed: u64,
}

impl Default for SonarParams {
    fn default() -> Self {
        Self {
            source_level: 200.0,
            rays_per_ping: 2048,
            range_bins: 512,
            max_slant_range: 60.0,
            db_window: None,
            pings: 512,
            along_track_spacing: 60.0 / 512.0,
            two_sided: false,
            speckle: true,
            noise_seed: 0,
        }
    }
}

impl SonarParams {
    pub fn window(&self) -> DbWindow {
        self.db_window.unwrap_or(DbWindow {
            lo: self.source_level - 90.0,
            hi: self.source_level - 20.0,
        })
    }

    pub fn validate(&self, altitude: f64) -> Result<(), SonarError> {
        if !(self.source_level > 0.0) {
            return Err(SonarError::InvalidParams("source level must be positive"));
        }
        if self.range_bins == 0 || self.pings == 0 || self.rays_per_ping == 0 {
            return Err(SonarError::InvalidParams("bins, pings and rays must be at least 1"));
        }
        let w = self.window();
        if !(w.hi > w.lo) {
            return Err(SonarError::InvalidParams("dB window must have hi > lo"));
        }
        if !(self.max_slant_range > altitude) || !(altitude > 0.0) {
            return Err(SonarError::InvalidParams(
                "max slant range must exceed a positive sensor altitude",
            ));
        }
        if !(self.along_track_spacing > 0.0) {
            return Err(SonarError::InvalidParams("along-track spacing must be positive"));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        self.max_slant_range / self.range_bins as f64
    }

    pub fn rays_per_bin(&self) -> usize {
        (self.rays_per_ping / self.range_bins).max(1)
    }

    /// Image width: range bins, doubled when two-sided.
    pub fn image_width(&self) -> usize {
        if self.two_sided {
            2 * self.range_bins
        } else {
            self.range_bins
        }
    }

    pub fn swath(&self, altitude: f64) -> Swath {
        let r = self.max_slant_range;
        Swath {
            altitude,
            along_track: (self.pings.saturating_sub(1)) as f64 * self.along_track_spacing,
            max_ground_range: math::sqrt((r * r - altitude * altitude).max(0.0)),
            two_sided: self.two_sided,
        }
    }

    /// Along-track position of ping `index`.
    pub fn ping_x(&self, index: usize) -> f64 {
        index as f64 * self.along_track_spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Starboard,
    Port,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Starboard => 1.0,
            Side::Port => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    /// Along-track position in meters.
    pub x: f64,
    pub altitude: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinClass {
    Terrain,
    Shipwreck,
    /// Past the nadir gap but no ray returned: acoustic shadow.
    Shadow,
    /// Water column before the first possible seabed return.
    NoReturn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayReturn {
    pub bin: usize,
    pub distance: f64,
    pub intensity_db: f64,
    pub wreck: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PingReturn {
    /// Linear-domain energy per bin (sum of `10^(RI/10)` shares).
    pub energy: Vec<f64>,
    /// dB per bin, `None` where nothing returned.
    pub intensity_db: Vec<Option<f64>>,
    pub class: Vec<BinClass>,
    pub rays: Vec<RayReturn>,
}

/// Rays of one ping and side, in bin order.
pub fn ping_rays(params: &SonarParams, pose: SensorPose) -> impl Iterator<Item = Ray> + '_ {
    let k = params.rays_per_bin();
    let delta = params.bin_width();
    let alt = pose.altitude;
    let origin = Vec3::new(pose.x, 0.0, alt);
    let sign = pose.side.sign();
    (0..params.range_bins * k).filter_map(move |j| {
        let b = j / k;
        let i = j % k;
        let d = (b as f64 + (i as f64 + 0.5) / k as f64) * delta;
        if d < alt {
            return None;
        }
        let phi = math::acos(alt / d);
        Some(Ray {
            origin,
            dir: Vec3::new(0.0, sign * math::sin(phi), -math::cos(phi)),
        })
    })
}

pub fn trace_ping(scene: &Scene, pose: SensorPose, params: &SonarParams) -> PingReturn {
    let w = params.range_bins;
    let delta = params.bin_width();
    let share = 1.0 / params.rays_per_bin() as f64;
    let mut energy = vec![0.0f64; w];
    let mut hit_any = vec![false; w];
    let mut hit_wreck = vec![false; w];
    let mut rays = Vec::new();
    for ray in ping_rays(params, pose) {
        let Some(hit) = scene.nearest_hit(&ray, params.max_slant_range) else {
            continue;
        };
        let bin = ((hit.distance / delta) as usize).min(w - 1);
        let cos_inc = hit.normal.dot(-ray.dir);
        let ts = lambertian_ts(cos_inc, hit.reflectance);
        let ri = params.source_level - 2.0 * 10.0 * math::log10(hit.distance) + ts;
        energy[bin] += math::exp10(ri / 10.0) * share;
        hit_any[bin] = true;
        hit_wreck[bin] |= hit.is_wreck();
        rays.push(RayReturn {
            bin,
            distance: hit.distance,
            intensity_db: ri,
            wreck: hit.is_wreck(),
        });
    }
    let class = (0..w)
        .map(|b| {
            if hit_wreck[b] {
                BinClass::Shipwreck
            } else if hit_any[b] {
                BinClass::Terrain
            } else if ((b + 1) as f64) * delta <= pose.altitude {
                BinClass::NoReturn
            } else {
                BinClass::Shadow
            }
        })
        .collect();
    let intensity_db = energy
        .iter()
        .zip(&hit_any)
        .map(|(&e, &h)| h.then(|| 10.0 * math::log10(e)))
        .collect();
    PingReturn {
        energy,
        intensity_db,
        class,
        rays,
    }
}

/// One rendered image row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub shadow: Vec<bool>,
}

/// Mean-one Rayleigh sample.
fn rayleigh<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let sigma = math::sqrt(2.0 / PI);
    let u: f64 = rng.random();
    sigma * math::sqrt(-2.0 * math::ln(1.0 - u))
}

/// Render ping `index`. Output depends only on `(scene, params, index)`.
pub fn render_row(scene: &Scene, params: &SonarParams, index: usize) -> ScanRow {
    let window = params.window();
    let x = params.ping_x(index);
    let alt = scene.altitude();
    let mut rng = seed::rng_from(seed::derive(params.noise_seed ^ seed::stage::SPECKLE, index as u64));
    let sides: &[Side] = if params.two_sided {
        &[Side::Port, Side::Starboard]
    } else {
        &[Side::Starboard]
    };
    let width = params.image_width();
    let mut row = ScanRow {
        pixels: Vec::with_capacity(width),
        labels: Vec::with_capacity(width),
        shadow: Vec::with_capacity(width),
    };
    for &side in sides {
        let ping = trace_ping(scene, SensorPose { x, altitude: alt, side }, params);
        let mut push = |b: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let noise = if params.speckle { rayleigh(rng) } else { 1.0 };
            let (pix, label, shadow) = match ping.class[b] {
                BinClass::Shadow => (0, TERRAIN, true),
                BinClass::NoReturn => (0, TERRAIN, false),
                c => {
                    let e = ping.energy[b] * noise;
                    let pix = if e > 0.0 {
                        db_to_pixel(10.0 * math::log10(e), window)
                    } else {
                        0
                    };
                    let label = if c == BinClass::Shipwreck { SHIPWRECK } else { TERRAIN };
                    (pix, label, false)
                }
            };
            row.pixels.push(pix);
            row.labels.push(label);
            row.shadow.push(shadow);
        };
        match side {
            // Port is mirrored: far range at column 0, nadir in the middle.
            Side::Port => (0..params.range_bins).rev().for_each(|b| push(b, &mut rng)),
            Side::Starboard => (0..params.range_bins).for_each(|b| push(b, &mut rng)),
        }
    }
    row
}

/// Rendered image with its label and shadow masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub image: GrayImage,
    pub labels: LabelMask,
    pub shadow: ShadowMask,
}

impl ScanOutput {
    /// Stitch rows rendered in any order (row `i` = ping `i`).
    pub fn from_rows(width: usize, rows: Vec<ScanRow>) -> Self {
        let height = rows.len();
        let mut pixels = Vec::with_capacity(width * height);
        let mut labels = Vec::with_capacity(width * height);
        let mut shadow = Vec::with_capacity(width * height);
        for r in rows {
            pixels.extend(r.pixels);
            labels.extend(r.labels);
            shadow.extend(r.shadow);
        }
        Self {
            image: Grid::from_vec(width, height, pixels).expect("row width"),
            labels: Grid::from_vec(width, height, labels).expect("row width"),
            shadow: Grid::from_vec(width, height, shadow).expect("row width"),
        }
    }
}

/// Single-threaded render of the full scan.
pub fn render_scan(scene: &Scene, params: &SonarParams) -> Result<ScanOutput, SonarError> {
    params.validate(scene.altitude())?;
    let rows = (0..params.pings).map(|i| render_row(scene, params, i)).collect();
    Ok(ScanOutput::from_rows(params.image_width(), rows))
}
