//! Boundary padding operators.
//!
//! A 1D padding matrix `P(len, radius)` is `(len + 2·radius) × len` with the
//! identity in its middle rows and mode-dependent selections in the border
//! rows. The 2D operator on column-major images is `P(n_t, n_r) ⊗ P(m_t, m_r)`.
//! With row-major vectorization the Kronecker factors would swap.

use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_dims, Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;
use crate::sparse::{kronecker, SparseOperator};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PadMode {
    Zero,
    Replicate,
    /// Mirror with the edge sample repeated: `… a2 a1 | a1 a2 …`.
    #[default]
    Symmetric,
    Circular,
}

impl PadMode {
    pub const ALL: [PadMode; 4] = [
        PadMode::Zero,
        PadMode::Replicate,
        PadMode::Symmetric,
        PadMode::Circular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PadMode::Zero => "zero",
            PadMode::Replicate => "replicate",
            PadMode::Symmetric => "symmetric",
            PadMode::Circular => "circular",
        }
    }

    /// Source sample for padded position `pos` (0-based, may lie outside
    /// `0..len`), or `None` for a zero row.
    pub fn source_index(self, pos: isize, len: usize) -> Option<usize> {
        let n = len as isize;
        if (0..n).contains(&pos) {
            return Some(pos as usize);
        }
        let idx = match self {
            PadMode::Zero => return None,
            PadMode::Replicate => pos.clamp(0, n - 1),
            PadMode::Symmetric => {
                if pos < 0 {
                    -pos - 1
                } else {
                    2 * n - 1 - pos
                }
            }
            PadMode::Circular => pos.rem_euclid(n),
        };
        Some(idx as usize)
    }

    fn check_radius(self, len: usize, radius: usize) -> Result<()> {
        if len == 0 {
            return Err(Error::Parameter("padding needs a non-empty axis".into()));
        }
        if self != PadMode::Zero && radius > len {
            return Err(Error::PadRadius {
                mode: self.name(),
                len,
                radius,
            });
        }
        Ok(())
    }
}

impl fmt::Display for PadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(PadMode::Zero),
            "replicate" => Ok(PadMode::Replicate),
            "symmetric" => Ok(PadMode::Symmetric),
            "circular" => Ok(PadMode::Circular),
            other => Err(Error::Parameter(format!("unknown pad mode {other:?}"))),
        }
    }
}

/// 1D padding matrix of size `(len + 2·radius) × len`.
pub fn make_pad_1d<T: Scalar>(len: usize, radius: usize, mode: PadMode) -> Result<SparseOperator<T>> {
    mode.check_radius(len, radius)?;
    let rows = len + 2 * radius;
    let entries = (0..rows)
        .filter_map(|r| {
            mode.source_index(r as isize - radius as isize, len)
                .map(|c| (r, c, T::one()))
        })
        .collect();
    SparseOperator::from_triplets(rows, len, entries)
}

/// 2D padding operator `P(n_t, n_r) ⊗ P(m_t, m_r)` mapping `m_t × n_t`
/// images to `(m_t + 2m_r) × (n_t + 2n_r)` images.
pub fn make_pad_2d<T: Scalar>(
    m_t: usize,
    n_t: usize,
    m_r: usize,
    n_r: usize,
    mode: PadMode,
) -> Result<SparseOperator<T>> {
    let pm = make_pad_1d(m_t, m_r, mode)?;
    let pn = make_pad_1d(n_t, n_r, mode)?;
    kronecker(&pn, &pm)
}

/// Separable padding without the Kronecker form: every column goes through
/// `P(m_t, m_r)`, then every row of the result through `P(n_t, n_r)`.
pub fn pad_separable<T: Scalar>(
    x: &Image<T>,
    col_pad: &SparseOperator<T>,
    row_pad: &SparseOperator<T>,
) -> Result<Image<T>> {
    let (m_t, n_t) = x.dims();
    ensure_dims!(col_pad.ncols() == m_t, "column pad expects {} rows", col_pad.ncols());
    ensure_dims!(row_pad.ncols() == n_t, "row pad expects {} cols", row_pad.ncols());
    let (m_p, n_p) = (col_pad.nrows(), row_pad.nrows());
    let mut tall = Image::zeros(m_p, n_t);
    for j in 0..n_t {
        let c = col_pad.apply_slice(x.col(j))?;
        tall.col_mut(j).copy_from_slice(&c);
    }
    let mut out = Image::zeros(m_p, n_p);
    let mut row = vec![T::zero(); n_t];
    for i in 0..m_p {
        for (j, v) in row.iter_mut().enumerate() {
            *v = tall[(i, j)];
        }
        for (j, v) in row_pad.apply_slice(&row)?.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Direct 2D padding on the grid by source-index lookup.
pub fn pad_image<T: Scalar>(x: &Image<T>, m_r: usize, n_r: usize, mode: PadMode) -> Result<Image<T>> {
    let (m_t, n_t) = x.dims();
    mode.check_radius(m_t, m_r)?;
    mode.check_radius(n_t, n_r)?;
    Ok(Image::from_fn(m_t + 2 * m_r, n_t + 2 * n_r, |i, j| {
        let si = mode.source_index(i as isize - m_r as isize, m_t);
        let sj = mode.source_index(j as isize - n_r as isize, n_t);
        match (si, sj) {
            (Some(a), Some(b)) => x[(a, b)],
            _ => T::zero(),
        }
    }))
}
