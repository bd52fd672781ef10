use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.f64())).collect(),
        }
    }
}

/// Frame sequence stored channel-major: `data[c * frames + t]`.
///
/// Channel-major layout keeps each channel's time series contiguous, which is
/// what the convolution inner loops stream over.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<T> {
    pub channels: usize,
    pub frames: usize,
    pub frame_rate: f64,
    pub data: Vec<T>,
}

impl<T: Real> FeatureSequence<T> {
    pub fn zeros(channels: usize, frames: usize, frame_rate: f64) -> Self {
        FeatureSequence { channels, frames, frame_rate, data: vec![T::zero(); channels * frames] }
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.frames..(c + 1) * self.frames]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.frames..(c + 1) * self.frames]
    }

    /// Time-major copy: one row per frame.
    pub fn to_frames(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.frames, self.channels);
        for c in 0..self.channels {
            for (t, &x) in self.channel(c).iter().enumerate() {
                m.data[t * self.channels + c] = x;
            }
        }
        m
    }

    pub fn from_frames(m: &Matrix<T>, frame_rate: f64) -> Self {
        let mut s = Self::zeros(m.cols, m.rows, frame_rate);
        for t in 0..m.rows {
            for (c, &x) in m.row(t).iter().enumerate() {
                s.data[c * m.rows + t] = x;
            }
        }
        s
    }
}
