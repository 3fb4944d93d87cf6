//! Compositing fractured wreck renders onto terrain, and tiling raw scans.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deformation::Fractured;
use crate::grid::{GrayImage, Grid, SHIPWRECK};
use crate::math;

/// Tile edge used by the survey scans.
pub const TILE_SIZE: usize = 1728;
/// Vertical stride between consecutive tiles.
pub const TILE_STRIDE: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompositeError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("scan width {got} does not match tile width {expected}")]
    WrongWidth { expected: usize, got: usize },
    #[error("source {source_dims:?} is smaller than target {target:?}")]
    Undersized {
        source_dims: (usize, usize),
        target: (usize, usize),
    },
    #[error("shadow gain {0} outside [0, 1]")]
    BadShadowGain(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainTile {
    pub image: GrayImage,
    pub source: String,
    pub site: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompositeOptions {
    /// Terrain attenuation inside acoustic shadow.
    pub shadow_gain: f64,
    /// Average wreck and background on the wreck's 1-pixel border.
    pub feather: bool,
    /// Remap wreck intensities onto the terrain histogram before pasting.
    pub histogram_match: bool,
}

impl Default for CompositeOptions {
    fn default() -> Self {
        Self {
            shadow_gain: 0.25,
            feather: false,
            histogram_match: false,
        }
    }
}

/// `S = I_f` on the wreck, `round(gain · T)` in shadow, `T` elsewhere.
pub fn composite(fractured: &Fractured, terrain: &GrayImage, opts: &CompositeOptions) -> Result<GrayImage, CompositeError> {
    if !fractured.image.same_shape(terrain)
        || !fractured.mask.same_shape(terrain)
        || !fractured.shadow.same_shape(terrain)
    {
        return Err(CompositeError::ShapeMismatch("fractured layers and terrain"));
    }
    if !(0.0..=1.0).contains(&opts.shadow_gain) {
        return Err(CompositeError::BadShadowGain(opts.shadow_gain));
    }
    let lut = if opts.histogram_match {
        histogram_lut(&fractured.image, &fractured.mask, terrain)
    } else {
        core::array::from_fn(|i| i as u8)
    };
    let (w, h) = terrain.dims();
    let background = |u: usize, v: usize| -> u8 {
        let t = *terrain.get(u, v);
        if *fractured.shadow.get(u, v) {
            math::round_half_up(opts.shadow_gain * t as f64) as u8
        } else {
            t
        }
    };
    let is_wreck = |u: usize, v: usize| *fractured.mask.get(u, v) == SHIPWRECK;
    Ok(Grid::from_fn(w, h, |u, v| {
        if !is_wreck(u, v) {
            return background(u, v);
        }
        let fg = lut[*fractured.image.get(u, v) as usize];
        if opts.feather {
            let border = (u > 0 && !is_wreck(u - 1, v))
                || (u + 1 < w && !is_wreck(u + 1, v))
                || (v > 0 && !is_wreck(u, v - 1))
                || (v + 1 < h && !is_wreck(u, v + 1));
            if border {
                let bg = background(u, v);
                return math::round_half_up((fg as f64 + bg as f64) / 2.0) as u8;
            }
        }
        fg
    }))
}

/// Lookup table sending wreck intensities onto the terrain CDF.
fn histogram_lut(image: &GrayImage, mask: &GrayImage, terrain: &GrayImage) -> [u8; 256] {
    let mut src = [0u64; 256];
    let mut dst = [0u64; 256];
    for (&p, &m) in image.as_slice().iter().zip(mask.as_slice()) {
        if m == SHIPWRECK {
            src[p as usize] += 1;
        }
    }
    for &p in terrain.as_slice() {
        dst[p as usize] += 1;
    }
    let cdf = |hist: &[u64; 256]| {
        let total: u64 = hist.iter().sum::<u64>().max(1);
        let mut acc = 0u64;
        let mut out = [0f64; 256];
        for (o, &c) in out.iter_mut().zip(hist) {
            acc += c;
            *o = acc as f64 / total as f64;
        }
        out
    };
    let (cs, cd) = (cdf(&src), cdf(&dst));
    core::array::from_fn(|i| {
        let target = cs[i];
        cd.iter().position(|&c| c >= target - 1e-12).unwrap_or(255) as u8
    })
}

/// Top-left offset of a uniformly random `target` window inside `source`.
pub fn random_crop_offset<R: Rng + ?Sized>(
    source: (usize, usize),
    target: (usize, usize),
    rng: &mut R,
) -> Result<(usize, usize), CompositeError> {
    if source.0 < target.0 || source.1 < target.1 {
        return Err(CompositeError::Undersized {
            source_dims: source,
            target,
        });
    }
    Ok((
        rng.random_range(0..=source.0 - target.0),
        rng.random_range(0..=source.1 - target.1),
    ))
}

pub fn crop(image: &GrayImage, x: usize, y: usize, width: usize, height: usize) -> GrayImage {
    Grid::from_fn(width, height, |u, v| *image.get(x + u, y + v))
}

/// Row index of `row` after symmetric (edge-including) reflection into `0..len`.
fn reflect(row: usize, len: usize) -> usize {
    let period = 2 * len;
    let r = row % period;
    if r < len {
        r
    } else {
        period - 1 - r
    }
}

/// Sliding-window tiles with the survey defaults (1728 square, stride 100).
pub fn tile_scan(raw: &GrayImage) -> Result<Vec<GrayImage>, CompositeError> {
    tile_scan_with(raw, TILE_SIZE, TILE_STRIDE)
}

/// Square `size` tiles stepping `stride` rows down a scan that is `size` wide.
/// Scans shorter than `size` yield one tile padded by mirroring rows.
pub fn tile_scan_with(raw: &GrayImage, size: usize, stride: usize) -> Result<Vec<GrayImage>, CompositeError> {
    if raw.width() != size {
        return Err(CompositeError::WrongWidth {
            expected: size,
            got: raw.width(),
        });
    }
    let h = raw.height();
    if h == 0 {
        return Err(CompositeError::ShapeMismatch("scan has no rows"));
    }
    if h < size {
        return Ok(alloc::vec![Grid::from_fn(size, size, |u, v| *raw.get(u, reflect(v, h)))]);
    }
    Ok(tile_offsets(h, size, stride)
        .map(|off| crop(raw, 0, off, size, size))
        .collect())
}

/// Row offsets `0, stride, 2·stride, ...` of the full tiles in a scan of `height` rows.
pub fn tile_offsets(height: usize, size: usize, stride: usize) -> impl Iterator<Item = usize> {
    let count = if height >= size {
        (height - size) / stride + 1
    } else {
        1
    };
    (0..count).map(move |i| i * stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn terrain(w: usize, h: usize) -> GrayImage {
        Grid::from_fn(w, h, |u, v| ((u * 31 + v * 7) % 251) as u8)
    }

    fn empty_fracture(w: usize, h: usize) -> Fractured {
        Fractured {
            image: Grid::new(w, h),
            mask: Grid::new(w, h),
            shadow: Grid::new(w, h),
        }
    }

    #[test]
    fn empty_masks_return_terrain() {
        let t = terrain(20, 10);
        let s = composite(&empty_fracture(20, 10), &t, &CompositeOptions::default()).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn paste_and_shadow_rules() {
        let t = Grid::filled(4, 4, 200u8);
        let mut f = empty_fracture(4, 4);
        f.image.set(1, 1, 77);
        f.mask.set(1, 1, SHIPWRECK);
        f.shadow.set(2, 2, true);
        f.shadow.set(1, 1, true);
        let s = composite(&f, &t, &CompositeOptions::default()).unwrap();
        assert_eq!(*s.get(1, 1), 77);
        assert_eq!(*s.get(2, 2), 50);
        assert_eq!(*s.get(0, 0), 200);
    }

    #[test]
    fn feathering_blends_border_only() {
        let t = Grid::filled(5, 5, 100u8);
        let mut f = empty_fracture(5, 5);
        for v in 1..4 {
            for u in 1..4 {
                f.image.set(u, v, 201);
                f.mask.set(u, v, SHIPWRECK);
            }
        }
        let opts = CompositeOptions { feather: true, ..Default::default() };
        let s = composite(&f, &t, &opts).unwrap();
        assert_eq!(*s.get(2, 2), 201);
        assert_eq!(*s.get(1, 2), 151);
        assert_eq!(*s.get(0, 0), 100);
    }

    #[test]
    fn histogram_matching_maps_onto_terrain_levels() {
        let t = Grid::from_fn(8, 8, |u, _| if u < 4 { 40u8 } else { 120 });
        let mut f = empty_fracture(8, 8);
        for u in 0..8 {
            f.image.set(u, 0, if u < 4 { 200 } else { 250 });
            f.mask.set(u, 0, SHIPWRECK);
        }
        let opts = CompositeOptions { histogram_match: true, ..Default::default() };
        let s = composite(&f, &t, &opts).unwrap();
        assert_eq!(*s.get(0, 0), 40);
        assert_eq!(*s.get(7, 0), 120);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let err = composite(&empty_fracture(4, 4), &terrain(5, 4), &CompositeOptions::default());
        assert!(matches!(err, Err(CompositeError::ShapeMismatch(_))));
    }

    #[test]
    fn crop_offsets_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut max_seen = (0, 0);
        for _ in 0..2000 {
            let (x, y) = random_crop_offset((2000, 2000), (1728, 1728), &mut rng).unwrap();
            assert!(x <= 272 && y <= 272);
            max_seen = (max_seen.0.max(x), max_seen.1.max(y));
        }
        assert!(max_seen.0 > 250 && max_seen.1 > 250);
        assert!(random_crop_offset((100, 2000), (1728, 1728), &mut rng).is_err());
    }

    #[test]
    fn tile_counts_and_offsets() {
        let offs: Vec<usize> = tile_offsets(1928, 1728, 100).collect();
        assert_eq!(offs, alloc::vec![0, 100, 200]);
        assert_eq!(tile_offsets(1728, 1728, 100).count(), 1);
        assert_eq!(tile_offsets(1827, 1728, 100).count(), 1);
    }

    #[test]
    fn small_tiles_are_reflected() {
        let raw = Grid::from_fn(8, 3, |u, v| (v * 10 + u) as u8);
        let tiles = tile_scan_with(&raw, 8, 2).unwrap();
        assert_eq!(tiles.len(), 1);
        let rows: Vec<u8> = (0..8).map(|v| *tiles[0].get(0, v)).collect();
        assert_eq!(rows, alloc::vec![0, 10, 20, 20, 10, 0, 0, 10]);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let raw: GrayImage = Grid::new(100, 2000);
        assert!(matches!(tile_scan(&raw), Err(CompositeError::WrongWidth { .. })));
    }
}
