//! Sparse matrices in canonical sorted-triplet form.
//!
//! Only what padding operators and small-instance oracles need: construction,
//! Kronecker products, mat-vec and transposed mat-vec.

use std::fmt::Write as _;

use crate::error::{ensure_dims, Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// Sparse matrix stored as `(row, col, value)` triplets sorted by row, then
/// column. Indices are 0-based in memory and 1-based in the text format.
///
/// The matrix also records the 2D image shapes of its domain and range so
/// that applying it to a column-major [`Image`] yields an image again.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
    shape_in: (usize, usize),
    shape_out: (usize, usize),
}

impl<T: Scalar> SparseOperator<T> {
    /// Builds from unsorted triplets. Duplicates and out-of-bound indices are
    /// rejected; explicit zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        for &(r, c, _) in &entries {
            if r >= nrows || c >= ncols {
                return Err(Error::Domain(format!(
                    "entry ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Format("duplicate (row, col) entry".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            entries,
            shape_in: (ncols, 1),
            shape_out: (nrows, 1),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            entries: (0..n).map(|i| (i, i, T::one())).collect(),
            shape_in: (n, 1),
            shape_out: (n, 1),
        }
    }

    /// Attaches image shapes to the domain and range.
    pub fn with_shapes(mut self, shape_in: (usize, usize), shape_out: (usize, usize)) -> Result<Self> {
        ensure_dims!(
            shape_in.0 * shape_in.1 == self.ncols,
            "input shape {shape_in:?} does not cover {} columns",
            self.ncols
        );
        ensure_dims!(
            shape_out.0 * shape_out.1 == self.nrows,
            "output shape {shape_out:?} does not cover {} rows",
            self.nrows
        );
        self.shape_in = shape_in;
        self.shape_out = shape_out;
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn shape_in(&self) -> (usize, usize) {
        self.shape_in
    }

    pub fn shape_out(&self) -> (usize, usize) {
        self.shape_out
    }

    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    /// Entry lookup with 0-based indices; absent entries read as zero.
    pub fn get(&self, r: usize, c: usize) -> T {
        self.entries
            .binary_search_by_key(&(r, c), |&(er, ec, _)| (er, ec))
            .map(|k| self.entries[k].2)
            .unwrap_or_else(|_| T::zero())
    }

    /// Number of stored entries in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nrows];
        for &(r, _, _) in &self.entries {
            counts[r] += 1;
        }
        counts
    }

    pub fn transpose(&self) -> Self {
        let entries = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        let mut t = Self::from_triplets(self.ncols, self.nrows, entries)
            .expect("transpose of a valid matrix is valid");
        t.shape_in = self.shape_out;
        t.shape_out = self.shape_in;
        t
    }

    /// Drops stored zeros.
    pub fn pruned(mut self) -> Self {
        self.entries.retain(|e| e.2 != T::zero());
        self
    }

    /// Dense row-major copy, for small oracles.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for &(r, c, v) in &self.entries {
            d[r][c] = v;
        }
        d
    }

    pub fn apply_slice(&self, x: &[T]) -> Result<Vec<T>> {
        ensure_dims!(
            x.len() == self.ncols,
            "vector of length {} for a matrix with {} columns",
            x.len(),
            self.ncols
        );
        let mut y = vec![T::zero(); self.nrows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        Ok(y)
    }

    /// `Aᵀ x` by walking the same triplets; the transpose is never formed.
    pub fn apply_transpose_slice(&self, x: &[T]) -> Result<Vec<T>> {
        ensure_dims!(
            x.len() == self.nrows,
            "vector of length {} for a matrix with {} rows",
            x.len(),
            self.nrows
        );
        let mut y = vec![T::zero(); self.ncols];
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
        Ok(y)
    }

    pub fn apply(&self, v: &Image<T>) -> Result<Image<T>> {
        let y = self.apply_slice(v.as_slice())?;
        Image::new(self.shape_out.0, self.shape_out.1, y)
    }

    pub fn apply_transpose(&self, v: &Image<T>) -> Result<Image<T>> {
        let y = self.apply_transpose_slice(v.as_slice())?;
        Image::new(self.shape_in.0, self.shape_in.1, y)
    }

    /// Plain-text form: `sparse <nrows> <ncols> <nnz>` followed by one
    /// 1-based `row col value` line per entry in canonical order.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(16 * (self.entries.len() + 1));
        let _ = writeln!(s, "sparse {} {} {}", self.nrows, self.ncols, self.nnz());
        for &(r, c, v) in &self.entries {
            let _ = writeln!(s, "{} {} {}", r + 1, c + 1, v.as_f64());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty sparse file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "sparse" {
            return Err(Error::Format(format!("bad sparse header {header:?}")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Format(format!("{s:?}: {e}")))
        };
        let (nrows, ncols, nnz) = (parse(h[1])?, parse(h[2])?, parse(h[3])?);
        let mut entries = Vec::with_capacity(nnz);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Format(format!("bad sparse entry {line:?}")));
            }
            let (r, c) = (parse(f[0])?, parse(f[1])?);
            if r == 0 || c == 0 {
                return Err(Error::Format("sparse indices are 1-based".into()));
            }
            let v: f64 = f[2]
                .parse()
                .map_err(|e| Error::Format(format!("{:?}: {e}", f[2])))?;
            entries.push((r - 1, c - 1, T::lit(v)));
        }
        if entries.len() != nnz {
            return Err(Error::Format(format!(
                "header announces {nnz} entries, found {}",
                entries.len()
            )));
        }
        Self::from_triplets(nrows, ncols, entries)
    }
}

/// Kronecker product `A ⊗ B`: block `(i, j)` equals `A[i, j] · B`.
///
/// The result acts on column-major images of shape `B.ncols × A.ncols`,
/// i.e. `(A ⊗ B) vec(X) = vec(B X Aᵀ)`.
pub fn kronecker<T: Scalar>(a: &SparseOperator<T>, b: &SparseOperator<T>) -> Result<SparseOperator<T>> {
    let guard = |what, x: usize, y: usize| {
        x.checked_mul(y).ok_or(Error::SizeGuard {
            what,
            value: usize::MAX,
            limit: usize::MAX,
        })
    };
    let nrows = guard("kronecker rows", a.nrows, b.nrows)?;
    let ncols = guard("kronecker cols", a.ncols, b.ncols)?;
    let nnz = guard("kronecker nnz", a.nnz(), b.nnz())?;
    let mut entries = Vec::with_capacity(nnz);
    // Row-major block traversal keeps the output already sorted.
    let a_rows = row_starts(a);
    let b_rows = row_starts(b);
    for ar in 0..a.nrows {
        for br in 0..b.nrows {
            for &(_, ac, av) in &a.entries[a_rows[ar]..a_rows[ar + 1]] {
                for &(_, bc, bv) in &b.entries[b_rows[br]..b_rows[br + 1]] {
                    entries.push((ar * b.nrows + br, ac * b.ncols + bc, av * bv));
                }
            }
        }
    }
    Ok(SparseOperator {
        nrows,
        ncols,
        entries,
        shape_in: (b.ncols, a.ncols),
        shape_out: (b.nrows, a.nrows),
    })
}

fn row_starts<T>(m: &SparseOperator<T>) -> Vec<usize> {
    let mut starts = vec![0; m.nrows + 1];
    for &(r, _, _) in &m.entries {
        starts[r + 1] += 1;
    }
    for i in 0..m.nrows {
        starts[i + 1] += starts[i];
    }
    starts
}
