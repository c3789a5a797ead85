//! Dense 2D grids stored column-major.
//!
//! Pixel `(i, j)` (0-based) lives at linear index `rows * j + i`, which is the
//! vectorization every operator and every file in this crate assumes. Methods
//! suffixed with `1` take 1-based coordinates.

use std::ops::{Index, IndexMut};

use crate::error::{ensure_dims, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        ensure_dims!(rows > 0 && cols > 0, "image must be non-empty, got {rows}x{cols}");
        ensure_dims!(
            data.len() == rows * cols,
            "data length {} does not match {rows}x{cols}",
            data.len()
        );
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "image must be non-empty");
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        let mut img = Self::zeros(rows, cols);
        img.data.fill(value);
        img
    }

    /// Builds an image from a 0-based `(i, j)` generator.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "image must be non-empty");
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Uniform random entries in `[-1, 1)`.
    pub fn random<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| T::lit(rng.gen_range(-1.0..1.0)))
    }

    /// Builds an image from row-major nested literals; handy in tests.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        ensure_dims!(!rows.is_empty(), "no rows given");
        let cols = rows[0].as_ref().len();
        ensure_dims!(cols > 0, "empty first row");
        for r in rows {
            ensure_dims!(r.as_ref().len() == cols, "ragged rows");
        }
        Ok(Self::from_fn(rows.len(), cols, |i, j| rows[i].as_ref()[j]))
    }

    /// Standard basis image `e(p, q)` with 1-based `p`, `q`.
    pub fn basis1(rows: usize, cols: usize, p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 || p > rows || q > cols {
            return Err(Error::Domain(format!(
                "basis position ({p}, {q}) outside {rows}x{cols}"
            )));
        }
        let mut img = Self::zeros(rows, cols);
        img[(p - 1, q - 1)] = T::one();
        Ok(img)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    /// 1-based read access.
    pub fn get1(&self, i: usize, j: usize) -> T {
        self[(i - 1, j - 1)]
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        ensure_dims!(
            self.dims() == other.dims(),
            "{}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        Ok(())
    }

    /// Euclidean inner product of the vectorized images.
    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm_sq(&self) -> T {
        dot(&self.data, &self.data)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn norm_l1(&self) -> T {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element type conversion (e.g. `f64` to `f32`).
    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.as_f64()).unwrap_or_else(U::nan))
                .collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Image<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[self.rows * j + i]
    }
}

impl<T> IndexMut<(usize, usize)> for Image<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[self.rows * j + i]
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Inclusive 1-based index range `lo..=hi` inside an axis of length `total`.
///
/// Its complement in `1..=total` is the exception set on which zero padding
/// writes zeros.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexRange {
    lo: usize,
    hi: usize,
    total: usize,
}

impl IndexRange {
    pub fn new(lo: usize, hi: usize, total: usize) -> Result<Self> {
        if lo < 1 || lo > hi || hi > total {
            return Err(Error::Domain(format!(
                "range {lo}..={hi} invalid within 1..={total}"
            )));
        }
        Ok(Self { lo, hi, total })
    }

    /// The whole axis.
    pub fn full(total: usize) -> Result<Self> {
        Self::new(1, total, total)
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }

    /// 0-based offset of `lo`.
    pub(crate) fn offset(&self) -> usize {
        self.lo - 1
    }

    /// Membership test for the exception set `{1..total} \ {lo..hi}`.
    pub fn is_exception(&self, i: usize) -> bool {
        (1..=self.total).contains(&i) && !(self.lo..=self.hi).contains(&i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let img = Image::<f64>::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(img.as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        // 1-based (i, j) -> rows * (j - 1) + i
        assert_eq!(img.get1(2, 3), img.as_slice()[2 * (3 - 1) + 2 - 1]);
    }

    #[test]
    fn new_rejects_bad_length() {
        assert!(Image::<f64>::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::<f64>::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn basis_and_range_domain() {
        assert!(Image::<f64>::basis1(3, 3, 0, 1).is_err());
        assert!(Image::<f64>::basis1(3, 3, 4, 1).is_err());
        assert!(IndexRange::new(2, 1, 3).is_err());
        assert!(IndexRange::new(1, 4, 3).is_err());
        let r = IndexRange::new(2, 3, 5).unwrap();
        assert!(r.is_exception(1) && r.is_exception(4) && !r.is_exception(2));
        assert_eq!(r.width(), 2);
    }
}
