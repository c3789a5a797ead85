//! Convolution, rotation, window, zero-padding and circular-shift operators.
//!
//! Public index arguments (`IndexRange`, shift positions, circular
//! arithmetic) follow 1-based conventions; storage is 0-based column-major.
//! Every convolution sums kernel-major (kernel row outer, kernel column
//! inner) so independent evaluations with the same order agree bit for bit.

use crate::error::{ensure_dims, Error, Result};
use crate::image::{Image, IndexRange};
use crate::scalar::Scalar;
use crate::sparse::SparseOperator;

/// Largest number of basis columns [`materialize_operator`] will evaluate.
pub const MATERIALIZE_LIMIT: usize = 4096;

/// Valid convolution: output pixels whose kernel footprint lies entirely in
/// `a`. Output is `(m_a - m_k + 1) × (n_a - n_k + 1)`.
pub fn valid_convolve<T: Scalar>(k: &Image<T>, a: &Image<T>) -> Result<Image<T>> {
    let (mk, nk) = k.dims();
    let (ma, na) = a.dims();
    ensure_dims!(
        ma >= mk && na >= nk,
        "kernel {mk}x{nk} exceeds image {ma}x{na}"
    );
    let (mo, no) = (ma - mk + 1, na - nk + 1);
    Ok(Image::from_fn(mo, no, |i, j| {
        let mut s = T::zero();
        for p in 0..mk {
            for q in 0..nk {
                s += k[(p, q)] * a[(i + mk - 1 - p, j + nk - 1 - q)];
            }
        }
        s
    }))
}

/// Full convolution over every overlapping position. Output is
/// `(m_a + m_k - 1) × (n_a + n_k - 1)`.
pub fn full_convolve<T: Scalar>(k: &Image<T>, a: &Image<T>) -> Image<T> {
    let (mk, nk) = k.dims();
    let (ma, na) = a.dims();
    Image::from_fn(ma + mk - 1, na + nk - 1, |i, j| {
        // clamped kernel bounds, inclusive
        let (p_lo, p_hi) = ((i + 1).saturating_sub(ma), i.min(mk - 1));
        let (q_lo, q_hi) = ((j + 1).saturating_sub(na), j.min(nk - 1));
        let mut s = T::zero();
        for p in p_lo..=p_hi {
            for q in q_lo..=q_hi {
                s += k[(p, q)] * a[(i - p, j - q)];
            }
        }
        s
    })
}

/// Periodic convolution of two equally sized images.
pub fn circular_convolve<T: Scalar>(kbar: &Image<T>, abar: &Image<T>) -> Result<Image<T>> {
    kbar.check_same_dims(abar)?;
    let (m, n) = kbar.dims();
    Ok(Image::from_fn(m, n, |i, j| {
        let mut s = T::zero();
        for p in 0..m {
            let ii = (i + m - p) % m;
            for q in 0..n {
                s += kbar[(p, q)] * abar[(ii, (j + n - q) % n)];
            }
        }
        s
    }))
}

/// Circular shift `S(p, q)` with 1-based `p`, `q`; `S(1, 1)` is the identity.
/// Equivalent to circular convolution with `e(p, q)`, computed by remapping.
pub fn circular_shift<T: Scalar>(a: &Image<T>, p: usize, q: usize) -> Result<Image<T>> {
    let (m, n) = a.dims();
    if p == 0 || q == 0 || p > m || q > n {
        return Err(Error::Domain(format!("shift ({p}, {q}) outside {m}x{n}")));
    }
    let (dp, dq) = (p - 1, q - 1);
    Ok(Image::from_fn(m, n, |i, j| {
        a[((i + m - dp) % m, (j + n - dq) % n)]
    }))
}

fn check_circ_args(a: usize, b: usize, c: usize) -> Result<()> {
    if c == 0 || !(1..=c).contains(&a) || !(1..=c).contains(&b) {
        return Err(Error::Domain(format!(
            "circular arithmetic needs a, b in 1..={c}, got a={a}, b={b}"
        )));
    }
    Ok(())
}

/// Circular sum `((a + b - 2) mod c) + 1` on 1-based indices.
pub fn circ_add(a: usize, b: usize, c: usize) -> Result<usize> {
    check_circ_args(a, b, c)?;
    Ok((a + b - 2) % c + 1)
}

/// Circular difference `((a - b) mod c) + 1` on 1-based indices.
pub fn circ_sub(a: usize, b: usize, c: usize) -> Result<usize> {
    check_circ_args(a, b, c)?;
    Ok((a + c - b) % c + 1)
}

/// 180 degree rotation: index reversal along both axes.
pub fn rotate180<T: Scalar>(k: &Image<T>) -> Image<T> {
    let (m, n) = k.dims();
    Image::from_fn(m, n, |i, j| k[(m - 1 - i, n - 1 - j)])
}

/// Full-width window: keeps rows `r.lo..=r.hi` of `a`.
pub fn window_rows<T: Scalar>(a: &Image<T>, r: IndexRange) -> Result<Image<T>> {
    ensure_dims!(
        r.total() == a.rows(),
        "row range over {} rows applied to an image with {}",
        r.total(),
        a.rows()
    );
    let off = r.offset();
    Ok(Image::from_fn(r.width(), a.cols(), |i, j| a[(i + off, j)]))
}

/// Full-width zero padding: places `a` at rows `r.lo..=r.hi` of an image
/// with `r.total` rows, zero elsewhere.
pub fn zero_pad_rows<T: Scalar>(a: &Image<T>, r: IndexRange) -> Result<Image<T>> {
    ensure_dims!(
        a.rows() == r.width(),
        "image height {} does not match range width {}",
        a.rows(),
        r.width()
    );
    let mut out = Image::zeros(r.total(), a.cols());
    let off = r.offset();
    for j in 0..a.cols() {
        out.col_mut(j)[off..off + a.rows()].copy_from_slice(a.col(j));
    }
    Ok(out)
}

/// 2D crop to `rows × cols` ranges; each range's `total` must match `a`.
pub fn window_general<T: Scalar>(a: &Image<T>, rows: IndexRange, cols: IndexRange) -> Result<Image<T>> {
    ensure_dims!(
        (rows.total(), cols.total()) == a.dims(),
        "ranges over {}x{} applied to {}x{} image",
        rows.total(),
        cols.total(),
        a.rows(),
        a.cols()
    );
    let (ro, co) = (rows.offset(), cols.offset());
    Ok(Image::from_fn(rows.width(), cols.width(), |i, j| {
        a[(i + ro, j + co)]
    }))
}

/// 2D embed-with-zeros into a `rows.total × cols.total` image.
pub fn zero_pad_general<T: Scalar>(a: &Image<T>, rows: IndexRange, cols: IndexRange) -> Result<Image<T>> {
    ensure_dims!(
        (rows.width(), cols.width()) == a.dims(),
        "image {}x{} does not match range extents {}x{}",
        a.rows(),
        a.cols(),
        rows.width(),
        cols.width()
    );
    let mut out = Image::zeros(rows.total(), cols.total());
    let (ro, co) = (rows.offset(), cols.offset());
    for j in 0..a.cols() {
        out.col_mut(j + co)[ro..ro + a.rows()].copy_from_slice(a.col(j));
    }
    Ok(out)
}

/// Explicit matrix of a linear operator on `in_rows × in_cols` images.
///
/// Column `c` is `op` applied to the `c`-th column-major basis image. Stored
/// zeros are dropped. Intended for small oracle instances only.
pub fn materialize_operator<T, F>(op: F, in_rows: usize, in_cols: usize) -> Result<SparseOperator<T>>
where
    T: Scalar,
    F: Fn(&Image<T>) -> Result<Image<T>>,
{
    let ncols = in_rows * in_cols;
    if ncols > MATERIALIZE_LIMIT {
        return Err(Error::SizeGuard {
            what: "operator columns",
            value: ncols,
            limit: MATERIALIZE_LIMIT,
        });
    }
    let mut entries = Vec::new();
    let mut shape_out = None;
    let mut basis = Image::zeros(in_rows, in_cols);
    for c in 0..ncols {
        basis.as_mut_slice()[c] = T::one();
        let col = op(&basis)?;
        basis.as_mut_slice()[c] = T::zero();
        match shape_out {
            None => shape_out = Some(col.dims()),
            Some(s) => ensure_dims!(s == col.dims(), "operator output shape changed"),
        }
        entries.extend(
            col.as_slice()
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(|(r, &v)| (r, c, v)),
        );
    }
    let (mo, no) = shape_out.expect("at least one column");
    SparseOperator::from_triplets(mo * no, ncols, entries)?.with_shapes((in_rows, in_cols), (mo, no))
}
