//! DEFF: the on-disk deformation field format.
//!
//! Layout: `"DEFF"`, then little-endian `u32 width, u32 height, u32 n_r,
//! u32 n_theta, f32 r_max, u32 origin_u, u32 origin_v`, then `width · height`
//! pairs of `(u8 r_bin, u8 θ_bin)` in row-major order.

use std::fs;
use std::path::Path;

use anyhow::Context;
use sonarwreck_core::deformation::DeformationField;
use sonarwreck_core::Grid;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"DEFF";
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum DeffError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated: {got} bytes, expected {expected}")]
    Truncated { expected: usize, got: usize },
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("bin ({r_bin}, {theta_bin}) at index {index} exceeds {n_r}×{n_theta}")]
    BinOutOfRange {
        index: usize,
        r_bin: u8,
        theta_bin: u8,
        n_r: u32,
        n_theta: u32,
    },
    #[error("invalid header: {0}")]
    Header(&'static str),
}

pub fn encode(field: &DeformationField) -> Vec<u8> {
    let (w, h) = field.bins.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * w * h);
    out.extend_from_slice(MAGIC);
    for x in [w as u32, h as u32, field.n_r, field.n_theta] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&(f64::from_bits(field.r_max_bits) as f32).to_le_bytes());
    out.extend_from_slice(&field.origin.0.to_le_bytes());
    out.extend_from_slice(&field.origin.1.to_le_bytes());
    for b in field.bins.as_slice() {
        out.extend_from_slice(b);
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DeformationField, DeffError> {
    if bytes.len() < HEADER_LEN {
        return Err(DeffError::Truncated {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(DeffError::BadMagic(magic));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (w, h, n_r, n_theta) = (word(0), word(1), word(2), word(3));
    let r_max = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let origin = (word(5), word(6));
    if n_r == 0 || n_theta == 0 || n_r > 256 || n_theta > 256 {
        return Err(DeffError::Header("bin counts must be in 1..=256"));
    }
    if r_max <= 0.0 || !r_max.is_finite() {
        return Err(DeffError::Header("r_max must be positive"));
    }
    let pixels = (w as usize)
        .checked_mul(h as usize)
        .ok_or(DeffError::Header("dimensions overflow"))?;
    let expected = HEADER_LEN + 2 * pixels;
    if bytes.len() < expected {
        return Err(DeffError::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DeffError::Trailing(bytes.len() - expected));
    }
    let mut bins = Vec::with_capacity(pixels);
    for (index, pair) in bytes[HEADER_LEN..].chunks_exact(2).enumerate() {
        let (r_bin, theta_bin) = (pair[0], pair[1]);
        if r_bin as u32 >= n_r || theta_bin as u32 >= n_theta {
            return Err(DeffError::BinOutOfRange {
                index,
                r_bin,
                theta_bin,
                n_r,
                n_theta,
            });
        }
        bins.push([r_bin, theta_bin]);
    }
    Ok(DeformationField {
        n_r,
        n_theta,
        r_max_bits: (r_max as f64).to_bits(),
        origin,
        bins: Grid::from_vec(w as usize, h as usize, bins).expect("pixel count"),
    })
}

pub fn write(path: &Path, field: &DeformationField) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode(field)).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> anyhow::Result<DeformationField> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}
