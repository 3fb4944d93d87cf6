//! Row-major 2-D grids and channel-last 3-D tensors.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// A `height × width` row-major grid. Row index is `v`, column index is `u`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// 8-bit single-channel sonar image.
pub type GrayImage = Grid<u8>;
/// Per-pixel class over {0 = terrain, 1 = shipwreck}.
pub type LabelMask = Grid<u8>;
/// Acoustic shadow flags.
pub type ShadowMask = Grid<bool>;

pub const TERRAIN: u8 = 0;
pub const SHIPWRECK: u8 = 1;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T: Clone + Default> Grid<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::default())
    }
}

impl<T> Grid<T> {
    /// Wrap an existing buffer. Returns `None` if the length is not `width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> &T {
        &self.data[v * self.width + u]
    }

    #[inline]
    pub fn get_mut(&mut self, u: usize, v: usize) -> &mut T {
        &mut self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[v * self.width + u] = value;
    }

    pub fn row(&self, v: usize) -> &[T] {
        &self.data[v * self.width..(v + 1) * self.width]
    }

    pub fn row_mut(&mut self, v: usize) -> &mut [T] {
        &mut self.data[v * self.width..(v + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Iterate `(u, v, &value)` in row-major order.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, x)| (i % w, i / w, x))
    }
}

impl Grid<bool> {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

impl Grid<u8> {
    /// Number of pixels equal to `value`.
    pub fn count_eq(&self, value: u8) -> usize {
        self.data.iter().filter(|&&b| b == value).count()
    }
}

/// Channel-last `height × width × channels` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrid<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Clone + Default> ChannelGrid<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![T::default(); width * height * channels],
        }
    }
}

impl<T> ChannelGrid<T> {
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height * channels).then_some(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Channel vector of pixel `(u, v)`.
    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> &[T] {
        let start = (v * self.width + u) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, u: usize, v: usize) -> &mut [T] {
        let start = (v * self.width + u) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    /// Channel vectors in row-major pixel order.
    pub fn pixels(&self) -> core::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.channels)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let g = Grid::from_fn(3, 2, |u, v| (u, v));
        assert_eq!(*g.get(2, 1), (2, 1));
        assert_eq!(g.row(1), &[(0, 1), (1, 1), (2, 1)]);
        assert!(Grid::from_vec(2, 2, alloc::vec![0u8; 3]).is_none());
    }

    #[test]
    fn channel_pixel_access() {
        let mut t = ChannelGrid::<f32>::new(2, 2, 3);
        t.pixel_mut(1, 1)[2] = 5.0;
        assert_eq!(t.as_slice()[11], 5.0);
        assert_eq!(t.pixels().count(), 4);
    }
}
