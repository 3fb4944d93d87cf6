//! Closed-form training losses.
//!
//! Every reduction uses pairwise summation so results do not depend on how a
//! caller might parallelize the per-pixel terms.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ChannelGrid, Grid, LabelMask};
use crate::math;

/// Probability clamp applied before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("prediction at ({u}, {v}) sums to {sum}, not 1")]
    NotSimplex { u: usize, v: usize, sum: f64 },
    #[error("target at ({u}, {v}) is not one-hot")]
    NotOneHot { u: usize, v: usize },
    #[error("probability {value} at ({u}, {v}) outside [0, 1]")]
    BadProbability { u: usize, v: usize, value: f64 },
    #[error("mask value {value} at ({u}, {v}) is not binary")]
    NonBinaryTarget { u: usize, v: usize, value: u8 },
    #[error("loss component {name} is {value}")]
    BadComponent { name: &'static str, value: f64 },
}

/// Sum over levels of the squared Euclidean distance between prototypes.
pub fn prototype_mse(student: &[Vec<f64>], teacher: &[Vec<f64>]) -> Result<f64, LossError> {
    if student.len() != teacher.len() {
        return Err(LossError::ShapeMismatch("prototype level counts differ"));
    }
    let mut per_level = Vec::with_capacity(student.len());
    for (s, t) in student.iter().zip(teacher) {
        if s.len() != t.len() {
            return Err(LossError::ShapeMismatch("prototype widths differ"));
        }
        let sq: Vec<f64> = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).collect();
        per_level.push(math::pairwise_sum(&sq));
    }
    Ok(math::pairwise_sum(&per_level))
}

/// Mean over included pixels of `-ln p[target]`.
///
/// `pixel_mask` restricts the mean to `true` pixels; a mask selecting nothing
/// yields 0.
pub fn cross_entropy_onehot(
    pred: &ChannelGrid<f64>,
    target: &ChannelGrid<f64>,
    pixel_mask: Option<&Grid<bool>>,
) -> Result<f64, LossError> {
    let (w, h, k) = (pred.width(), pred.height(), pred.channels());
    if (target.width(), target.height(), target.channels()) != (w, h, k) {
        return Err(LossError::ShapeMismatch("prediction and target tensors differ"));
    }
    if let Some(m) = pixel_mask {
        if m.dims() != (w, h) {
            return Err(LossError::ShapeMismatch("pixel mask"));
        }
    }
    let mut terms = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let p = pred.pixel(u, v);
            let sum: f64 = p.iter().sum();
            if !((sum - 1.0).abs() <= SIMPLEX_TOL) || p.iter().any(|x| !(*x >= 0.0)) {
                return Err(LossError::NotSimplex { u, v, sum });
            }
            let t = target.pixel(u, v);
            let mut hot = None;
            for (c, &x) in t.iter().enumerate() {
                if x == 1.0 && hot.is_none() {
                    hot = Some(c);
                } else if x != 0.0 {
                    return Err(LossError::NotOneHot { u, v });
                }
            }
            let Some(class) = hot else {
                return Err(LossError::NotOneHot { u, v });
            };
            if pixel_mask.is_none_or(|m| *m.get(u, v)) {
                terms.push(-math::ln(p[class].max(PROB_FLOOR)));
            }
        }
    }
    if terms.is_empty() {
        return Ok(0.0);
    }
    Ok(math::pairwise_sum(&terms) / terms.len() as f64)
}

/// Pixel-mean binary cross entropy with `p` clamped to `[1e-12, 1 - 1e-12]`.
pub fn binary_cross_entropy(pred: &Grid<f64>, target: &LabelMask) -> Result<f64, LossError> {
    if !pred.same_shape(target) {
        return Err(LossError::ShapeMismatch("prediction and mask differ"));
    }
    let mut terms = Vec::with_capacity(pred.as_slice().len());
    for ((u, v, &p), &y) in pred.iter_indexed().zip(target.as_slice()) {
        if !(0.0..=1.0).contains(&p) {
            return Err(LossError::BadProbability { u, v, value: p });
        }
        let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        terms.push(match y {
            0 => -math::ln(1.0 - p),
            1 => -math::ln(p),
            value => return Err(LossError::NonBinaryTarget { u, v, value }),
        });
    }
    if terms.is_empty() {
        return Ok(0.0);
    }
    Ok(math::pairwise_sum(&terms) / terms.len() as f64)
}

/// Copy `len` channels starting at `start` into a standalone `f64` tensor.
///
/// Splits a concatenated magnitude/angle one-hot tensor into its two blocks.
pub fn channel_block(tensor: &ChannelGrid<f32>, start: usize, len: usize) -> Result<ChannelGrid<f64>, LossError> {
    if start + len > tensor.channels() || len == 0 {
        return Err(LossError::ShapeMismatch("channel block out of range"));
    }
    let data = tensor
        .pixels()
        .flat_map(|px| px[start..start + len].iter().map(|&x| x as f64))
        .collect();
    Ok(ChannelGrid::from_vec(tensor.width(), tensor.height(), len, data).expect("block size"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_mag: f64,
    pub l_ang: f64,
    pub l_p: f64,
    pub l_seg: f64,
    pub l_total: f64,
}

/// Unit-weighted sum of the four components.
pub fn total_loss(l_mag: f64, l_ang: f64, l_p: f64, l_seg: f64) -> Result<LossBreakdown, LossError> {
    for (name, value) in [("l_mag", l_mag), ("l_ang", l_ang), ("l_p", l_p), ("l_seg", l_seg)] {
        if !value.is_finite() || value < 0.0 {
            return Err(LossError::BadComponent { name, value });
        }
    }
    Ok(LossBreakdown {
        l_mag,
        l_ang,
        l_p,
        l_seg,
        l_total: l_mag + l_ang + l_p + l_seg,
    })
}
