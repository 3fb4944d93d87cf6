//! Terrain prototypes and cosine-distance anomaly volumes.
//!
//! Features come from a fixed, training-free extractor: a Gaussian pyramid
//! with a small filter bank per level. The same extractor plays two roles. Fed
//! a clean terrain tile and mean-pooled, it yields the reference prototype.
//! Fed the image under test and trim-pooled (the positions with the largest
//! feature norm are left out), it yields an inference-time prototype that is
//! robust to the objects in the image.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ChannelGrid, GrayImage, Grid, LabelMask, SHIPWRECK};
use crate::math;

/// mean, std, gradient magnitude, and edge energy at 0°, 45°, 90°, 135°.
pub const MAX_CHANNELS: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnomalyError {
    #[error("image {width}×{height} too small for {levels} pyramid levels")]
    ImageTooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },
    #[error("invalid anomaly configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("trim fraction {0} outside [0, 0.5]")]
    BadTrim(f64),
    #[error("prototype has zero norm")]
    ZeroPrototype,
    #[error("expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("prototype has {prototype} levels, pyramid has {pyramid}")]
    LevelMismatch { prototype: usize, pyramid: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    /// Pyramid depth `D_l`.
    pub levels: usize,
    /// Feature width `C`, at most [`MAX_CHANNELS`].
    pub channels: usize,
    /// Fraction of highest-norm positions dropped by the inference prototype.
    pub trim: f64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            channels: MAX_CHANNELS,
            trim: 0.1,
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<(), AnomalyError> {
        if self.levels == 0 {
            return Err(AnomalyError::InvalidConfig("at least one pyramid level"));
        }
        if self.channels == 0 || self.channels > MAX_CHANNELS {
            return Err(AnomalyError::InvalidConfig("channels must be in 1..=7"));
        }
        check_trim(self.trim)
    }
}

fn check_trim(q: f64) -> Result<(), AnomalyError> {
    if (0.0..=0.5).contains(&q) {
        Ok(())
    } else {
        Err(AnomalyError::BadTrim(q))
    }
}

/// Level `i` has `⌊H/2^i⌋ × ⌊W/2^i⌋` positions (level 0 is full resolution).
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub levels: Vec<ChannelGrid<f64>>,
}

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable 5-tap binomial filter with edge replication.
fn blur(src: &Grid<f64>) -> Grid<f64> {
    let (w, h) = src.dims();
    let horiz = Grid::from_fn(w, h, |u, v| {
        let mut acc = 0.0;
        for (k, wt) in BINOMIAL.iter().enumerate() {
            acc += wt * src.get(clamp_index(u as isize + k as isize - 2, w), v);
        }
        acc
    });
    Grid::from_fn(w, h, |u, v| {
        let mut acc = 0.0;
        for (k, wt) in BINOMIAL.iter().enumerate() {
            acc += wt * horiz.get(u, clamp_index(v as isize + k as isize - 2, h));
        }
        acc
    })
}

fn downsample(src: &Grid<f64>) -> Grid<f64> {
    let b = blur(src);
    Grid::from_fn(src.width() / 2, src.height() / 2, |u, v| *b.get(2 * u, 2 * v))
}

fn level_features(img: &Grid<f64>, channels: usize) -> ChannelGrid<f64> {
    let (w, h) = img.dims();
    let mean = blur(img);
    let sq = blur(&img.map(|x| x * x));
    let gx = Grid::from_fn(w, h, |u, v| {
        0.5 * (img.get(clamp_index(u as isize + 1, w), v) - img.get(clamp_index(u as isize - 1, w), v))
    });
    let gy = Grid::from_fn(w, h, |u, v| {
        0.5 * (img.get(u, clamp_index(v as isize + 1, h)) - img.get(u, clamp_index(v as isize - 1, h)))
    });
    let diag = core::f64::consts::FRAC_1_SQRT_2;
    let raw: [Grid<f64>; 5] = [
        Grid::from_fn(w, h, |u, v| {
            let (x, y) = (*gx.get(u, v), *gy.get(u, v));
            math::sqrt(x * x + y * y)
        }),
        gx.map(|g| math::abs(*g)),
        Grid::from_fn(w, h, |u, v| math::abs(diag * (gx.get(u, v) + gy.get(u, v)))),
        gy.map(|g| math::abs(*g)),
        Grid::from_fn(w, h, |u, v| math::abs(diag * (gy.get(u, v) - gx.get(u, v)))),
    ];
    let smoothed: Vec<Grid<f64>> = raw.iter().take(channels.saturating_sub(2)).map(blur).collect();
    let mut out = ChannelGrid::new(w, h, channels);
    for v in 0..h {
        for u in 0..w {
            let m = *mean.get(u, v);
            let var = sq.get(u, v) - m * m;
            // Rounding leaves ~1e-17 residue on flat patches.
            let std = if var > 1e-12 { math::sqrt(var) } else { 0.0 };
            let px = out.pixel_mut(u, v);
            px[0] = m;
            if channels > 1 {
                px[1] = std;
            }
            for (c, g) in smoothed.iter().enumerate() {
                px[2 + c] = *g.get(u, v);
            }
        }
    }
    out
}

pub fn feature_pyramid(image: &GrayImage, config: &AnomalyConfig) -> Result<FeaturePyramid, AnomalyError> {
    config.validate()?;
    let min_side = 1usize << (config.levels - 1);
    if image.width() < min_side || image.height() < min_side {
        return Err(AnomalyError::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            levels: config.levels,
        });
    }
    let mut current = image.map(|&p| p as f64 / 255.0);
    let mut levels = Vec::with_capacity(config.levels);
    for i in 0..config.levels {
        if i > 0 {
            current = downsample(&current);
        }
        levels.push(level_features(&current, config.channels));
    }
    Ok(FeaturePyramid { levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Pooling {
    /// Global average pooling over all positions.
    Mean,
    /// Average after dropping the `q` fraction of positions with the largest norm.
    Trimmed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    /// One `C`-vector per pyramid level.
    pub levels: Vec<Vec<f64>>,
    pub pooling: Pooling,
}

fn norm(x: &[f64]) -> f64 {
    math::sqrt(x.iter().map(|v| v * v).sum())
}

/// Pool one feature grid into a `C`-vector.
pub fn pool(features: &ChannelGrid<f64>, pooling: Pooling) -> Result<Vec<f64>, AnomalyError> {
    let n = features.width() * features.height();
    let c = features.channels();
    let keep: Vec<usize> = match pooling {
        Pooling::Mean => (0..n).collect(),
        Pooling::Trimmed(q) => {
            check_trim(q)?;
            let norms: Vec<f64> = features.pixels().map(norm).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
            let drop = math::floor(q * n as f64) as usize;
            let mut kept = order.split_off(drop.min(n));
            kept.sort_unstable();
            kept
        }
    };
    let data = features.as_slice();
    let mut column = Vec::with_capacity(keep.len());
    Ok((0..c)
        .map(|ch| {
            column.clear();
            column.extend(keep.iter().map(|&i| data[i * c + ch]));
            if column.is_empty() {
                0.0
            } else {
                math::pairwise_sum(&column) / column.len() as f64
            }
        })
        .collect())
}

pub fn terrain_prototype(pyramid: &FeaturePyramid, pooling: Pooling) -> Result<Prototype, AnomalyError> {
    let levels = pyramid
        .levels
        .iter()
        .map(|l| pool(l, pooling))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prototype { levels, pooling })
}

/// `1 - cos(a, b)`, clamped to `[0, 2]`; zero-norm `b` scores 0.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
}

/// Per-position cosine distance between a prototype vector and a feature grid.
pub fn anomaly_map(prototype: &[f64], features: &ChannelGrid<f64>) -> Result<Grid<f64>, AnomalyError> {
    if prototype.len() != features.channels() {
        return Err(AnomalyError::ChannelMismatch {
            expected: prototype.len(),
            got: features.channels(),
        });
    }
    if norm(prototype) == 0.0 {
        return Err(AnomalyError::ZeroPrototype);
    }
    let data: Vec<f64> = features.pixels().map(|f| cosine_distance(prototype, f)).collect();
    Ok(Grid::from_vec(features.width(), features.height(), data).expect("pixel count"))
}

/// Bilinear resize with half-pixel-center alignment: output pixel `x` samples
/// source coordinate `(x + 0.5)·(src/dst) - 0.5`, clamped at the borders.
pub fn bilinear_resize(src: &Grid<f64>, width: usize, height: usize) -> Grid<f64> {
    let (sw, sh) = src.dims();
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;
    let coord = |x: usize, scale: f64, n: usize| {
        let f = ((x as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = math::floor(f) as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, f - i0 as f64)
    };
    let cols: Vec<(usize, usize, f64)> = (0..width).map(|u| coord(u, sx, sw)).collect();
    let rows: Vec<(usize, usize, f64)> = (0..height).map(|v| coord(v, sy, sh)).collect();
    Grid::from_fn(width, height, |u, v| {
        let (u0, u1, fu) = cols[u];
        let (v0, v1, fv) = rows[v];
        let top = src.get(u0, v0) * (1.0 - fu) + src.get(u1, v0) * fu;
        let bottom = src.get(u0, v1) * (1.0 - fu) + src.get(u1, v1) * fu;
        top * (1.0 - fv) + bottom * fv
    })
}

/// `H × W × D_l` stack of upsampled anomaly maps.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyVolume {
    pub maps: Vec<Grid<f64>>,
}

impl AnomalyVolume {
    pub fn depth(&self) -> usize {
        self.maps.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.maps.first().map_or((0, 0), |m| m.dims())
    }

    /// Mean over depth at each pixel.
    pub fn mean_score(&self) -> Grid<f64> {
        let (w, h) = self.dims();
        let d = self.depth().max(1) as f64;
        Grid::from_fn(w, h, |u, v| self.maps.iter().map(|m| m.get(u, v)).sum::<f64>() / d)
    }

    /// Channel-last `H × W × D_l` tensor.
    pub fn to_tensor(&self) -> ChannelGrid<f64> {
        let (w, h) = self.dims();
        let d = self.depth();
        let mut t = ChannelGrid::new(w, h, d);
        for (i, m) in self.maps.iter().enumerate() {
            for (u, v, x) in m.iter_indexed() {
                t.pixel_mut(u, v)[i] = *x;
            }
        }
        t
    }
}

/// Anomaly maps of every level against the given prototype, upsampled to full size.
pub fn anomaly_volume_with(pyramid: &FeaturePyramid, prototype: &Prototype, width: usize, height: usize) -> Result<AnomalyVolume, AnomalyError> {
    if prototype.levels.len() != pyramid.levels.len() {
        return Err(AnomalyError::LevelMismatch {
            prototype: prototype.levels.len(),
            pyramid: pyramid.levels.len(),
        });
    }
    let maps = pyramid
        .levels
        .iter()
        .zip(&prototype.levels)
        .map(|(f, p)| anomaly_map(p, f).map(|a| bilinear_resize(&a, width, height)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnomalyVolume { maps })
}

/// Pyramid, trimmed self-prototype, per-level maps, upsample and stack.
pub fn anomaly_volume(image: &GrayImage, config: &AnomalyConfig) -> Result<AnomalyVolume, AnomalyError> {
    let pyramid = feature_pyramid(image, config)?;
    let prototype = terrain_prototype(&pyramid, Pooling::Trimmed(config.trim))?;
    anomaly_volume_with(&pyramid, &prototype, image.width(), image.height())
}

/// Otsu threshold of `values` over a 256-bin histogram spanning their range.
pub fn otsu_threshold(values: &[f64]) -> f64 {
    const BINS: usize = 256;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(hi > lo) {
        return if lo.is_finite() { lo } else { 0.0 };
    }
    let width = (hi - lo) / BINS as f64;
    let mut hist = [0u64; BINS];
    for &x in values {
        let b = (((x - lo) / width) as usize).min(BINS - 1);
        hist[b] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    lo + (best_t + 1) as f64 * width
}

/// Remove 8-connected foreground components smaller than `min_blob` pixels.
pub fn remove_small_blobs(mask: &mut LabelMask, min_blob: usize) {
    if min_blob <= 1 {
        return;
    }
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if seen[start] || mask.as_slice()[start] != SHIPWRECK {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            for dv in -1..=1isize {
                for du in -1..=1isize {
                    let (nu, nv) = (u + du, v + dv);
                    if nu < 0 || nv < 0 || nu >= w as isize || nv >= h as isize {
                        continue;
                    }
                    let j = nv as usize * w + nu as usize;
                    if !seen[j] && mask.as_slice()[j] == SHIPWRECK {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() < min_blob {
            for &i in &component {
                mask.as_mut_slice()[i] = 0;
            }
        }
    }
}

/// Threshold the depth-mean score at `tau` and drop blobs under `min_blob` pixels.
pub fn segment_from_anomaly(volume: &AnomalyVolume, tau: f64, min_blob: usize) -> LabelMask {
    let mut mask = volume.mean_score().map(|&s| (s > tau) as u8);
    remove_small_blobs(&mut mask, min_blob);
    mask
}
