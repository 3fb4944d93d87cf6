//! Quadrant deformation fields that fracture a wreck into four debris pieces.
//!
//! A field assigns each pixel a discretized displacement `(r_bin, θ_bin)`.
//! Generated fields split the wreck at its pixel centroid into four quadrants
//! and give every wreck pixel of a quadrant the same displacement; background
//! pixels keep `(0, 0)`, which decodes to zero displacement.
//!
//! Applying a field is a forward splat: source pixel `(u, v)` moves to
//! `(round(u + r·cos θ), round(v + r·sin θ))` with round-half-up. Collisions
//! keep the brightest value (masks OR together), so the result does not depend
//! on visiting order.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ChannelGrid, GrayImage, Grid, LabelMask, ShadowMask, SHIPWRECK};
use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeformError {
    #[error("bin ({r_bin}, {theta_bin}) out of range for {n_r}×{n_theta} bins")]
    BinOutOfRange {
        r_bin: usize,
        theta_bin: usize,
        n_r: usize,
        n_theta: usize,
    },
    #[error("invalid deformation parameters: {0}")]
    InvalidParams(&'static str),
    #[error("mask has no wreck pixels")]
    EmptyMask,
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error("one-hot tensor holds a negative or non-finite value")]
    NegativeValue,
    #[error("grid dimensions differ")]
    DimensionMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformParams {
    /// Magnitude bins over `[0, r_max]`.
    pub n_r: usize,
    /// Direction bins over `[0, 2π)`.
    pub n_theta: usize,
    /// Largest displacement in pixels.
    pub r_max: f64,
}

impl DeformParams {
    pub const DEFAULT_N_R: usize = 10;
    pub const DEFAULT_N_THETA: usize = 20;

    /// Default bins with `r_max = 0.15 · min(width, height)`, rounded to `f32`
    /// so the value survives the DEFF header.
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            n_r: Self::DEFAULT_N_R,
            n_theta: Self::DEFAULT_N_THETA,
            r_max: (0.15 * width.min(height) as f64) as f32 as f64,
        }
    }

    /// One-hot depth, `n_r + n_theta`.
    pub fn channels(&self) -> usize {
        self.n_r + self.n_theta
    }

    pub fn validate(&self) -> Result<(), DeformError> {
        if self.n_r == 0 || self.n_theta == 0 {
            return Err(DeformError::InvalidParams("bin counts must be at least 1"));
        }
        if self.n_r > 256 || self.n_theta > 256 {
            return Err(DeformError::InvalidParams("bin counts must fit in a byte"));
        }
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(DeformError::InvalidParams("r_max must be positive"));
        }
        Ok(())
    }
}

/// Displacement `(r, θ)` in pixels and radians for a bin pair.
pub fn bin_to_value(r_bin: usize, theta_bin: usize, params: &DeformParams) -> Result<(f64, f64), DeformError> {
    if r_bin >= params.n_r || theta_bin >= params.n_theta {
        return Err(DeformError::BinOutOfRange {
            r_bin,
            theta_bin,
            n_r: params.n_r,
            n_theta: params.n_theta,
        });
    }
    let r = if params.n_r == 1 {
        0.0
    } else {
        r_bin as f64 * params.r_max / (params.n_r - 1) as f64
    };
    Ok((r, theta_bin as f64 * TAU / params.n_theta as f64))
}

/// Integer pixel offset of a bin pair, rounded half up.
pub fn bin_offset(r_bin: u8, theta_bin: u8, params: &DeformParams) -> Result<(i64, i64), DeformError> {
    let (r, theta) = bin_to_value(r_bin as usize, theta_bin as usize, params)?;
    Ok((
        math::round_half_up(r * math::cos(theta)) as i64,
        math::round_half_up(r * math::sin(theta)) as i64,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeformationField {
    pub n_r: u32,
    pub n_theta: u32,
    /// Stored as raw bits so the field is `Eq` and hashes bit-exactly.
    pub r_max_bits: u64,
    /// Quadrant origin `(u_c, v_c)`.
    pub origin: (u32, u32),
    /// Per-pixel `[r_bin, θ_bin]`.
    pub bins: Grid<[u8; 2]>,
}

impl DeformationField {
    pub fn identity(width: usize, height: usize, params: &DeformParams) -> Self {
        Self {
            n_r: params.n_r as u32,
            n_theta: params.n_theta as u32,
            r_max_bits: params.r_max.to_bits(),
            origin: (0, 0),
            bins: Grid::filled(width, height, [0, 0]),
        }
    }

    pub fn params(&self) -> DeformParams {
        DeformParams {
            n_r: self.n_r as usize,
            n_theta: self.n_theta as usize,
            r_max: f64::from_bits(self.r_max_bits),
        }
    }

    pub fn width(&self) -> usize {
        self.bins.width()
    }

    pub fn height(&self) -> usize {
        self.bins.height()
    }

    /// Quadrant index of `(u, v)`: bit 0 is `u ≥ u_c`, bit 1 is `v ≥ v_c`.
    pub fn quadrant(&self, u: usize, v: usize) -> usize {
        (u >= self.origin.0 as usize) as usize + 2 * (v >= self.origin.1 as usize) as usize
    }

    /// Per-quadrant bins, taken from the first displaced pixel in each quadrant.
    /// Quadrants without one report `(0, 0)`.
    pub fn quadrant_bins(&self) -> [[u8; 2]; 4] {
        let mut out = [[0u8; 2]; 4];
        let mut seen = [false; 4];
        for (u, v, &b) in self.bins.iter_indexed() {
            let q = self.quadrant(u, v);
            if !seen[q] && b != [0, 0] {
                out[q] = b;
                seen[q] = true;
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        let p = self.params();
        self.bins
            .as_slice()
            .iter()
            .all(|&[r, t]| bin_offset(r, t, &p) == Ok((0, 0)))
    }
}

/// Random four-piece field over the wreck pixels of `mask`.
pub fn generate_quadrant_field<R: Rng + ?Sized>(
    mask: &LabelMask,
    params: &DeformParams,
    rng: &mut R,
) -> Result<DeformationField, DeformError> {
    params.validate()?;
    let (mut su, mut sv, mut n) = (0u64, 0u64, 0u64);
    for (u, v, &m) in mask.iter_indexed() {
        if m == SHIPWRECK {
            su += u as u64;
            sv += v as u64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(DeformError::EmptyMask);
    }
    let uc = math::round_half_up(su as f64 / n as f64) as u32;
    let vc = math::round_half_up(sv as f64 / n as f64) as u32;
    let mut quadrants = [[0u8; 2]; 4];
    for q in &mut quadrants {
        let r = rng.random_range(0..params.n_r) as u8;
        let t = rng.random_range(0..params.n_theta) as u8;
        *q = [r, t];
    }
    let mut field = DeformationField::identity(mask.width(), mask.height(), params);
    field.origin = (uc, vc);
    for v in 0..mask.height() {
        for u in 0..mask.width() {
            if *mask.get(u, v) == SHIPWRECK {
                let q = field.quadrant(u, v);
                field.bins.set(u, v, quadrants[q]);
            }
        }
    }
    Ok(field)
}

/// Concatenated magnitude and direction one-hot blocks, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotField {
    pub params: DeformParams,
    pub origin: (u32, u32),
    pub tensor: ChannelGrid<f32>,
}

pub fn encode_onehot(field: &DeformationField) -> OneHotField {
    let params = field.params();
    let mut tensor = ChannelGrid::new(field.width(), field.height(), params.channels());
    for (u, v, &[r, t]) in field.bins.iter_indexed() {
        let px = tensor.pixel_mut(u, v);
        px[r as usize] = 1.0;
        px[params.n_r + t as usize] = 1.0;
    }
    OneHotField {
        params,
        origin: field.origin,
        tensor,
    }
}

fn argmax_low(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// Per-pixel argmax of each block; ties go to the lower bin. Accepts exact
/// one-hot tensors and predicted distributions alike.
pub fn decode_bins(tensor: &ChannelGrid<f32>, params: &DeformParams) -> Result<Grid<[u8; 2]>, DeformError> {
    params.validate()?;
    if tensor.channels() != params.channels() {
        return Err(DeformError::ChannelCount {
            expected: params.channels(),
            got: tensor.channels(),
        });
    }
    if tensor.as_slice().iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(DeformError::NegativeValue);
    }
    let bins: Vec<[u8; 2]> = tensor
        .pixels()
        .map(|px| {
            let (mag, ang) = px.split_at(params.n_r);
            [argmax_low(mag) as u8, argmax_low(ang) as u8]
        })
        .collect();
    Ok(Grid::from_vec(tensor.width(), tensor.height(), bins).expect("pixel count"))
}

pub fn decode_onehot(onehot: &OneHotField) -> Result<DeformationField, DeformError> {
    let bins = decode_bins(&onehot.tensor, &onehot.params)?;
    Ok(DeformationField {
        n_r: onehot.params.n_r as u32,
        n_theta: onehot.params.n_theta as u32,
        r_max_bits: onehot.params.r_max.to_bits(),
        origin: onehot.origin,
        bins,
    })
}

/// Output of [`apply_field`]. Unhit image pixels are 0 and unset in both masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Fractured {
    pub image: GrayImage,
    pub mask: LabelMask,
    pub shadow: ShadowMask,
}

/// Forward-splat wreck pixels (and shadow pixels, by their quadrant) through `field`.
pub fn apply_field(
    image: &GrayImage,
    mask: &LabelMask,
    shadow: &ShadowMask,
    field: &DeformationField,
) -> Result<Fractured, DeformError> {
    if !image.same_shape(mask) || !image.same_shape(shadow) || !image.same_shape(&field.bins) {
        return Err(DeformError::DimensionMismatch);
    }
    let params = field.params();
    params.validate()?;
    let (w, h) = image.dims();
    // Offsets are cached per bin pair; a quadrant field has at most five.
    let mut cache: Vec<([u8; 2], (i64, i64))> = Vec::new();
    let mut offset = |b: [u8; 2]| -> Result<(i64, i64), DeformError> {
        if let Some(&(_, o)) = cache.iter().find(|(k, _)| *k == b) {
            return Ok(o);
        }
        let o = bin_offset(b[0], b[1], &params)?;
        cache.push((b, o));
        Ok(o)
    };
    let quadrant_bins = field.quadrant_bins();
    let mut out = Fractured {
        image: Grid::new(w, h),
        mask: Grid::new(w, h),
        shadow: Grid::new(w, h),
    };
    let target = |u: usize, v: usize, (dx, dy): (i64, i64)| {
        let tu = u as i64 + dx;
        let tv = v as i64 + dy;
        (tu >= 0 && tv >= 0 && (tu as usize) < w && (tv as usize) < h).then_some((tu as usize, tv as usize))
    };
    for v in 0..h {
        for u in 0..w {
            if *mask.get(u, v) == SHIPWRECK {
                if let Some((tu, tv)) = target(u, v, offset(*field.bins.get(u, v))?) {
                    let px = out.image.get_mut(tu, tv);
                    *px = (*px).max(*image.get(u, v));
                    out.mask.set(tu, tv, SHIPWRECK);
                }
            }
            if *shadow.get(u, v) {
                let q = field.quadrant(u, v);
                if let Some((tu, tv)) = target(u, v, offset(quadrant_bins[q])?) {
                    out.shadow.set(tu, tv, true);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(r_max: f64) -> DeformParams {
        DeformParams {
            n_r: 10,
            n_theta: 20,
            r_max,
        }
    }

    #[test]
    fn default_depth_is_thirty() {
        let p = DeformParams::for_image(1728, 1728);
        assert_eq!(p.channels(), 30);
        assert!((p.r_max - 259.2).abs() < 1e-4);
        assert_eq!(p.r_max, p.r_max as f32 as f64);
    }

    #[test]
    fn bin_values() {
        let p = params(90.0);
        assert_eq!(bin_to_value(0, 0, &p).unwrap(), (0.0, 0.0));
        assert_eq!(bin_to_value(9, 0, &p).unwrap(), (90.0, 0.0));
        let (r, t) = bin_to_value(5, 10, &p).unwrap();
        assert!((r - 50.0).abs() < 1e-12 && (t - PI).abs() < 1e-12);
        assert!(bin_to_value(10, 0, &p).is_err());
        assert!(bin_to_value(0, 20, &p).is_err());
    }

    fn blob_mask(w: usize, h: usize) -> LabelMask {
        Grid::from_fn(w, h, |u, v| {
            let du = u as i64 - 30;
            let dv = v as i64 - 28;
            (du * du / 4 + dv * dv < 120) as u8
        })
    }

    #[test]
    fn quadrant_field_has_at_most_four_pairs() {
        let mask = blob_mask(64, 64);
        for seed in 0..20 {
            let f = generate_quadrant_field(&mask, &params(9.0), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut pairs: Vec<[u8; 2]> = f
                .bins
                .iter_indexed()
                .filter(|(u, v, _)| *mask.get(*u, *v) == SHIPWRECK)
                .map(|(_, _, b)| *b)
                .collect();
            pairs.sort();
            pairs.dedup();
            assert!(pairs.len() <= 4);
            for (u, v, b) in f.bins.iter_indexed() {
                if *mask.get(u, v) != SHIPWRECK {
                    assert_eq!(*b, [0, 0]);
                }
            }
        }
    }

    #[test]
    fn single_magnitude_bin_forces_identity() {
        let p = DeformParams { n_r: 1, n_theta: 20, r_max: 9.0 };
        let f = generate_quadrant_field(&blob_mask(64, 64), &p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(f.is_identity());
    }

    #[test]
    fn empty_mask_is_an_error() {
        let mask: LabelMask = Grid::new(8, 8);
        let err = generate_quadrant_field(&mask, &params(4.0), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(err, Err(DeformError::EmptyMask));
    }

    #[test]
    fn centroid_origin_and_boundary_rule() {
        // Wreck pixels at u = 2..=5 on row 3: centroid u = 3.5 rounds to 4.
        let mut mask: LabelMask = Grid::new(8, 8);
        for u in 2..=5 {
            mask.set(u, 3, SHIPWRECK);
        }
        let f = generate_quadrant_field(&mask, &params(4.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(f.origin, (4, 3));
        assert_eq!(f.quadrant(4, 3), 3);
        assert_eq!(f.quadrant(3, 3), 2);
        assert_eq!(f.quadrant(3, 2), 0);
    }

    #[test]
    fn onehot_example_pixel() {
        let mut f = DeformationField::identity(2, 1, &params(9.0));
        f.bins.set(1, 0, [3, 17]);
        let oh = encode_onehot(&f);
        let px = oh.tensor.pixel(1, 0);
        for (c, &x) in px.iter().enumerate() {
            assert_eq!(x, if c == 3 || c == 27 { 1.0 } else { 0.0 });
        }
        assert_eq!(oh.tensor.pixel(0, 0).iter().sum::<f32>(), 2.0);
    }

    #[test]
    fn uniform_blocks_decode_to_zero_bins() {
        let p = params(9.0);
        let mut t = ChannelGrid::<f32>::new(3, 2, 30);
        for px in t.as_mut_slice().chunks_exact_mut(30) {
            px[..10].fill(0.1);
            px[10..].fill(0.05);
        }
        let bins = decode_bins(&t, &p).unwrap();
        assert!(bins.as_slice().iter().all(|b| *b == [0, 0]));
    }

    #[test]
    fn decode_rejects_bad_tensors() {
        let p = params(9.0);
        let t = ChannelGrid::<f32>::new(2, 2, 29);
        assert_eq!(
            decode_bins(&t, &p),
            Err(DeformError::ChannelCount { expected: 30, got: 29 })
        );
        let mut t = ChannelGrid::<f32>::new(2, 2, 30);
        t.as_mut_slice()[4] = -0.5;
        assert_eq!(decode_bins(&t, &p), Err(DeformError::NegativeValue));
    }

    #[test]
    fn blurred_onehot_keeps_argmax() {
        // Softmax over a peaked logit vector: peak preserved, everything positive.
        let p = params(9.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = ChannelGrid::<f32>::new(4, 4, 30);
        let mut truth = Vec::new();
        for px in t.as_mut_slice().chunks_exact_mut(30) {
            let r = rng.random_range(0..10);
            let a = rng.random_range(0..20);
            truth.push([r as u8, a as u8]);
            for (block, hot) in [(0..10, r), (10..30, 10 + a)] {
                let logits: Vec<f64> = block.clone().map(|c| if c == hot { 2.0 } else { rng.random_range(0.0..1.5) }).collect();
                let z: f64 = logits.iter().map(|l| libm::exp(*l)).sum();
                for (c, l) in block.zip(logits) {
                    px[c] = (libm::exp(l) / z) as f32;
                }
            }
        }
        let bins = decode_bins(&t, &p).unwrap();
        assert_eq!(bins.as_slice(), &truth[..]);
    }

    fn single_pixel(u: usize, v: usize, bins: [u8; 2], p: &DeformParams) -> Fractured {
        let mut img: GrayImage = Grid::new(16, 16);
        let mut mask: LabelMask = Grid::new(16, 16);
        img.set(u, v, 200);
        mask.set(u, v, SHIPWRECK);
        let mut field = DeformationField::identity(16, 16, p);
        field.bins.set(u, v, bins);
        apply_field(&img, &mask, &Grid::new(16, 16), &field).unwrap()
    }

    #[test]
    fn warp_moves_along_axes() {
        // r_max = 27 over 10 bins: bin 1 is 3 px. θ bin 5 of 20 is π/2.
        let p = params(27.0);
        let east = single_pixel(5, 5, [1, 0], &p);
        assert_eq!(*east.image.get(8, 5), 200);
        assert_eq!(*east.mask.get(8, 5), SHIPWRECK);
        assert_eq!(east.mask.count_eq(SHIPWRECK), 1);
        let south = single_pixel(5, 5, [1, 5], &p);
        assert_eq!(*south.image.get(5, 8), 200);
    }

    #[test]
    fn out_of_bounds_destinations_are_dropped() {
        let p = params(27.0);
        let gone = single_pixel(14, 5, [1, 0], &p);
        assert_eq!(gone.mask.count_eq(SHIPWRECK), 0);
    }

    #[test]
    fn collisions_keep_brightest() {
        let p = params(9.0);
        let mut img: GrayImage = Grid::new(8, 1);
        let mut mask: LabelMask = Grid::new(8, 1);
        img.set(1, 0, 50);
        img.set(2, 0, 90);
        mask.set(1, 0, 1);
        mask.set(2, 0, 1);
        let mut field = DeformationField::identity(8, 1, &p);
        field.bins.set(1, 0, [1, 0]); // +1 px
        let out = apply_field(&img, &mask, &Grid::new(8, 1), &field).unwrap();
        assert_eq!(*out.image.get(2, 0), 90);
        assert_eq!(out.mask.count_eq(1), 1);
    }

    #[test]
    fn identity_field_masks_the_image() {
        let p = params(9.0);
        let img: GrayImage = Grid::from_fn(12, 9, |u, v| (u * 17 + v * 5) as u8);
        let mask = Grid::from_fn(12, 9, |u, v| ((u + v) % 3 == 0) as u8);
        let shadow = Grid::from_fn(12, 9, |u, v| (u + v) % 3 == 1);
        let field = DeformationField::identity(12, 9, &p);
        let out = apply_field(&img, &mask, &shadow, &field).unwrap();
        let expected = Grid::from_fn(12, 9, |u, v| img.get(u, v) * mask.get(u, v));
        assert_eq!(out.image, expected);
        assert_eq!(out.mask, mask);
        assert_eq!(out.shadow, shadow);
    }

    #[test]
    fn shadow_follows_its_quadrant() {
        let p = params(27.0);
        let mut mask: LabelMask = Grid::new(16, 16);
        let mut shadow: ShadowMask = Grid::new(16, 16);
        mask.set(8, 8, 1);
        shadow.set(10, 9, true);
        let mut field = DeformationField::identity(16, 16, &p);
        field.origin = (8, 8);
        field.bins.set(8, 8, [1, 0]);
        let out = apply_field(&Grid::new(16, 16), &mask, &shadow, &field).unwrap();
        assert!(*out.shadow.get(13, 9));
        assert_eq!(out.shadow.count_true(), 1);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = params(9.0);
        let field = DeformationField::identity(4, 4, &p);
        let err = apply_field(&Grid::new(4, 4), &Grid::new(4, 5), &Grid::new(4, 4), &field);
        assert_eq!(err, Err(DeformError::DimensionMismatch));
    }
}
