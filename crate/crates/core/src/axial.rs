//! Axially-variant convolution model `y = H P x + n`.
//!
//! Output row `i_h` of `H` is the valid convolution of kernel `k(i_h)` with
//! rows `i_h ..= i_h + 2m_r` of the padded image. Rows are computed directly
//! (concatenation form). The adjoint is evaluated as a gather over padded
//! rows, so every output pixel is owned by exactly one task and the result
//! does not depend on the thread count.
//!
//! Both operators cost `m_k · n_k · m_t · n_t` multiply-adds and keep no
//! working storage beyond the images involved.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{ensure_dims, Error, Result};
use crate::image::Image;
use crate::noise::{self, Snr};
use crate::ops::{rotate180, MATERIALIZE_LIMIT};
use crate::padding::{make_pad_2d, PadMode};
use crate::scalar::Scalar;
use crate::sparse::SparseOperator;

/// Rows of output handled by one parallel task.
const ROW_BLOCK: usize = 64;
/// Rows accumulated together in registers.
const TILE: usize = 8;

/// Per-row kernel family `k(1) … k(m_t)`, all of size `(2m_r+1) × (2n_r+1)`.
///
/// Coefficients are stored tap-major: for every kernel tap `(p, q)` the
/// values across all rows `i_h` are contiguous, which is the access pattern
/// of both operators.
#[derive(Clone, Debug, PartialEq)]
pub struct AxialKernelStack<T> {
    m_t: usize,
    n_t: usize,
    m_r: usize,
    n_r: usize,
    taps: Vec<T>,
}

impl<T: Scalar> AxialKernelStack<T> {
    /// Builds a stack from one kernel per output row.
    pub fn from_kernels(n_t: usize, kernels: &[Image<T>]) -> Result<Self> {
        ensure_dims!(!kernels.is_empty(), "kernel stack needs at least one row");
        ensure_dims!(n_t > 0, "image width must be positive");
        let (mk, nk) = kernels[0].dims();
        ensure_dims!(
            mk % 2 == 1 && nk % 2 == 1,
            "kernel dimensions must be odd, got {mk}x{nk}"
        );
        for (i, k) in kernels.iter().enumerate() {
            ensure_dims!(
                k.dims() == (mk, nk),
                "kernel {} is {}x{}, expected {mk}x{nk}",
                i + 1,
                k.rows(),
                k.cols()
            );
        }
        let m_t = kernels.len();
        let mut taps = vec![T::zero(); m_t * mk * nk];
        for (ih, k) in kernels.iter().enumerate() {
            for q in 0..nk {
                for p in 0..mk {
                    taps[(q * mk + p) * m_t + ih] = k[(p, q)];
                }
            }
        }
        Ok(Self {
            m_t,
            n_t,
            m_r: mk / 2,
            n_r: nk / 2,
            taps,
        })
    }

    /// Builds a stack from a generator called with 1-based `i_h`.
    pub fn from_fn(
        m_t: usize,
        n_t: usize,
        mut kernel: impl FnMut(usize) -> Result<Image<T>>,
    ) -> Result<Self> {
        let kernels = (1..=m_t).map(&mut kernel).collect::<Result<Vec<_>>>()?;
        Self::from_kernels(n_t, &kernels)
    }

    /// Axially-invariant stack: the same kernel on every row.
    pub fn invariant(m_t: usize, n_t: usize, kernel: &Image<T>) -> Result<Self> {
        Self::from_kernels(n_t, &vec![kernel.clone(); m_t])
    }

    /// Kernels laid out one after another, each column-major, ordered by
    /// `i_h`.
    pub fn from_kernel_major(m_t: usize, n_t: usize, m_k: usize, n_k: usize, data: &[T]) -> Result<Self> {
        ensure_dims!(
            data.len() == m_t * m_k * n_k,
            "stack payload has {} values, expected {}",
            data.len(),
            m_t * m_k * n_k
        );
        let per = m_k * n_k;
        let kernels = data
            .chunks(per)
            .map(|c| Image::new(m_k, n_k, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_kernels(n_t, &kernels)
    }

    pub fn to_kernel_major(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.taps.len());
        for ih in 0..self.m_t {
            for q in 0..self.n_k() {
                for p in 0..self.m_k() {
                    out.push(self.taps[(q * self.m_k() + p) * self.m_t + ih]);
                }
            }
        }
        out
    }

    /// Kernel of row `i_h` (1-based).
    pub fn kernel(&self, i_h: usize) -> Result<Image<T>> {
        if i_h == 0 || i_h > self.m_t {
            return Err(Error::Domain(format!("kernel row {i_h} outside 1..={}", self.m_t)));
        }
        let (mk, m_t) = (self.m_k(), self.m_t);
        Ok(Image::from_fn(mk, self.n_k(), |p, q| {
            self.taps[(q * mk + p) * m_t + i_h - 1]
        }))
    }

    /// Same kernels applied to images of a different width.
    pub fn with_width(mut self, n_t: usize) -> Self {
        assert!(n_t > 0);
        self.n_t = n_t;
        self
    }

    pub fn m_t(&self) -> usize {
        self.m_t
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn m_r(&self) -> usize {
        self.m_r
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn m_k(&self) -> usize {
        2 * self.m_r + 1
    }
    pub fn n_k(&self) -> usize {
        2 * self.n_r + 1
    }
    pub fn m_p(&self) -> usize {
        self.m_t + 2 * self.m_r
    }
    pub fn n_p(&self) -> usize {
        self.n_t + 2 * self.n_r
    }

    /// Multiply-adds performed by one application of `H` or `Hᵀ`.
    pub fn mac_count(&self) -> u64 {
        (self.m_k() * self.n_k() * self.m_t * self.n_t) as u64
    }

    #[inline]
    fn tap(&self, p: usize, q: usize) -> &[T] {
        let off = (q * self.m_k() + p) * self.m_t;
        &self.taps[off..off + self.m_t]
    }
}

/// Output columns sharing one kernel-tap load in the inner loop.
const COLS: usize = 6;

#[inline(always)]
fn mac_tail<T: Scalar>(acc: &mut [T], k: &[T], x: &[T]) {
    for ((a, &kv), &xv) in acc.iter_mut().zip(k).zip(x) {
        *a += kv * xv;
    }
}

/// Adds `Σ_q k_q ⊙ x(col(c, q))` over `qs` into a `TILE × COLS` block of
/// `out` (columns `c0 .. c0 + COLS`, rows `o_row ..`), `q` ascending.
#[inline(always)]
fn mac_block<T: Scalar, const J: usize>(
    out: &mut [T],
    ld: usize,
    o_row: usize,
    c0: usize,
    qs: std::ops::Range<usize>,
    tap: impl Fn(usize) -> *const T,
    src: impl Fn(usize, usize) -> *const T,
) {
    let mut acc = [[T::zero(); TILE]; J];
    for (jj, a) in acc.iter_mut().enumerate() {
        a.copy_from_slice(&out[(c0 + jj) * ld + o_row..][..TILE]);
    }
    for q in qs {
        // SAFETY: callers guarantee TILE readable elements behind every
        // pointer (checked by the bounds asserts in the block functions).
        let k = unsafe { std::slice::from_raw_parts(tap(q), TILE) };
        for (jj, a) in acc.iter_mut().enumerate() {
            let x = unsafe { std::slice::from_raw_parts(src(c0 + jj, q), TILE) };
            for t in 0..TILE {
                a[t] += k[t] * x[t];
            }
        }
    }
    for (jj, a) in acc.iter().enumerate() {
        out[(c0 + jj) * ld + o_row..][..TILE].copy_from_slice(a);
    }
}

#[inline(always)]
fn forward_block_body<T: Scalar>(
    stack: &AxialKernelStack<T>,
    xp: &Image<T>,
    i0: usize,
    len: usize,
) -> (Vec<T>, u64) {
    let (mk, nk, n_t) = (stack.m_k(), stack.n_k(), stack.n_t);
    let m_p = xp.rows();
    assert!(i0 + len <= stack.m_t && xp.dims() == (stack.m_p(), stack.n_p()));
    let taps = stack.taps.as_ptr();
    let xs = xp.as_slice().as_ptr();
    let mut out = vec![T::zero(); len * n_t];
    let mut macs = 0u64;
    for p in 0..mk {
        let xrow = i0 + mk - 1 - p;
        let mut t0 = 0;
        while t0 < len {
            let w = TILE.min(len - t0);
            if w == TILE {
                let tap = |q: usize| unsafe { taps.add((q * mk + p) * stack.m_t + i0 + t0) };
                let src = |j: usize, q: usize| unsafe { xs.add((j + nk - 1 - q) * m_p + xrow + t0) };
                let mut j = 0;
                while j + COLS <= n_t {
                    mac_block::<T, COLS>(&mut out, len, t0, j, 0..nk, tap, src);
                    j += COLS;
                }
                for j in j..n_t {
                    mac_block::<T, 1>(&mut out, len, t0, j, 0..nk, tap, src);
                }
            } else {
                for j in 0..n_t {
                    let o = &mut out[j * len + t0..][..w];
                    for q in 0..nk {
                        let k = &stack.tap(p, q)[i0 + t0..][..w];
                        let x = &xp.col(j + nk - 1 - q)[xrow + t0..][..w];
                        mac_tail(o, k, x);
                    }
                }
            }
            macs += (w * nk * n_t) as u64;
            t0 += w;
        }
    }
    (out, macs)
}

#[inline(always)]
fn adjoint_block_body<T: Scalar>(
    stack: &AxialKernelStack<T>,
    r: &Image<T>,
    r0: usize,
    len: usize,
) -> (Vec<T>, u64) {
    let (mk, nk, m_t, n_t) = (stack.m_k(), stack.n_k(), stack.m_t, stack.n_t);
    let n_p = stack.n_p();
    assert!(r0 + len <= stack.m_p() && r.dims() == (m_t, n_t));
    let taps = stack.taps.as_ptr();
    let rs = r.as_slice().as_ptr();
    let mut out = vec![T::zero(); len * n_p];
    let mut macs = 0u64;
    // columns whose kernel footprint lies fully inside the residual
    let (c_in_lo, c_in_hi) = (nk - 1, n_t);
    for p in 0..mk {
        // padded row r reads residual row r - shift
        let shift = mk - 1 - p;
        let lo = r0.max(shift);
        let hi = (r0 + len).min(shift + m_t);
        let mut ra = lo;
        while ra < hi {
            let w = TILE.min(hi - ra);
            let (ia, oa) = (ra - shift, ra - r0);
            let tap = |q: usize| unsafe { taps.add((q * mk + p) * m_t + ia) };
            let src = |c: usize, q: usize| unsafe { rs.add((c + q + 1 - nk) * m_t + ia) };
            let mut c = 0;
            while c < n_p {
                if w == TILE && c >= c_in_lo && c + COLS <= c_in_hi {
                    mac_block::<T, COLS>(&mut out, len, oa, c, 0..nk, tap, src);
                    macs += (TILE * COLS * nk) as u64;
                    c += COLS;
                    continue;
                }
                let q_lo = (nk - 1).saturating_sub(c);
                let q_hi = nk.min(n_t + nk - 1 - c);
                if q_lo < q_hi {
                    if w == TILE {
                        mac_block::<T, 1>(&mut out, len, oa, c, q_lo..q_hi, tap, src);
                    } else {
                        let o = &mut out[c * len + oa..][..w];
                        for q in q_lo..q_hi {
                            let k = &stack.tap(p, q)[ia..][..w];
                            let x = &r.col(c + q + 1 - nk)[ia..][..w];
                            mac_tail(o, k, x);
                        }
                    }
                    macs += (w * (q_hi - q_lo)) as u64;
                }
                c += 1;
            }
            ra += w;
        }
    }
    (out, macs)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn forward_block_avx2<T: Scalar>(
    stack: &AxialKernelStack<T>,
    xp: &Image<T>,
    i0: usize,
    len: usize,
) -> (Vec<T>, u64) {
    forward_block_body(stack, xp, i0, len)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn adjoint_block_avx2<T: Scalar>(
    stack: &AxialKernelStack<T>,
    r: &Image<T>,
    r0: usize,
    len: usize,
) -> (Vec<T>, u64) {
    adjoint_block_body(stack, r, r0, len)
}

// Only vector width changes between the paths; mul and add stay separate
// instructions, so results are identical.
fn forward_block<T: Scalar>(
    stack: &AxialKernelStack<T>,
    xp: &Image<T>,
    i0: usize,
    len: usize,
    counter: Option<&AtomicU64>,
) -> Vec<T> {
    #[cfg(target_arch = "x86_64")]
    let (out, macs) = if std::arch::is_x86_feature_detected!("avx2") {
        unsafe { forward_block_avx2(stack, xp, i0, len) }
    } else {
        forward_block_body(stack, xp, i0, len)
    };
    #[cfg(not(target_arch = "x86_64"))]
    let (out, macs) = forward_block_body(stack, xp, i0, len);
    if let Some(c) = counter {
        c.fetch_add(macs, Ordering::Relaxed);
    }
    out
}

fn adjoint_block<T: Scalar>(
    stack: &AxialKernelStack<T>,
    r: &Image<T>,
    r0: usize,
    len: usize,
    counter: Option<&AtomicU64>,
) -> Vec<T> {
    #[cfg(target_arch = "x86_64")]
    let (out, macs) = if std::arch::is_x86_feature_detected!("avx2") {
        unsafe { adjoint_block_avx2(stack, r, r0, len) }
    } else {
        adjoint_block_body(stack, r, r0, len)
    };
    #[cfg(not(target_arch = "x86_64"))]
    let (out, macs) = adjoint_block_body(stack, r, r0, len);
    if let Some(c) = counter {
        c.fetch_add(macs, Ordering::Relaxed);
    }
    out
}

fn run_blocks<T: Scalar>(
    rows: usize,
    cols: usize,
    block: impl Fn(usize, usize) -> Vec<T> + Sync,
) -> Image<T> {
    let starts: Vec<usize> = (0..rows).step_by(ROW_BLOCK).collect();
    let parts: Vec<Vec<T>> = starts
        .par_iter()
        .map(|&s| block(s, ROW_BLOCK.min(rows - s)))
        .collect();
    let mut out = Image::zeros(rows, cols);
    for (&s, part) in starts.iter().zip(&parts) {
        let len = ROW_BLOCK.min(rows - s);
        for j in 0..cols {
            out.col_mut(j)[s..s + len].copy_from_slice(&part[j * len..(j + 1) * len]);
        }
    }
    out
}

fn forward_impl<T: Scalar>(
    stack: &AxialKernelStack<T>,
    xp: &Image<T>,
    counter: Option<&AtomicU64>,
) -> Result<Image<T>> {
    ensure_dims!(
        xp.dims() == (stack.m_p(), stack.n_p()),
        "padded image is {}x{}, stack expects {}x{}",
        xp.rows(),
        xp.cols(),
        stack.m_p(),
        stack.n_p()
    );
    Ok(run_blocks(stack.m_t, stack.n_t, |s, len| {
        forward_block(stack, xp, s, len, counter)
    }))
}

fn adjoint_impl<T: Scalar>(
    stack: &AxialKernelStack<T>,
    r: &Image<T>,
    counter: Option<&AtomicU64>,
) -> Result<Image<T>> {
    ensure_dims!(
        r.dims() == (stack.m_t, stack.n_t),
        "residual is {}x{}, stack expects {}x{}",
        r.rows(),
        r.cols(),
        stack.m_t,
        stack.n_t
    );
    Ok(run_blocks(stack.m_p(), stack.n_p(), |s, len| {
        adjoint_block(stack, r, s, len, counter)
    }))
}

/// `H xp` for a padded image `xp` of size `m_p × n_p`; returns `m_t × n_t`.
pub fn forward_h<T: Scalar>(stack: &AxialKernelStack<T>, xp: &Image<T>) -> Result<Image<T>> {
    forward_impl(stack, xp, None)
}

/// [`forward_h`] that also reports the number of multiply-adds executed.
pub fn forward_h_counted<T: Scalar>(stack: &AxialKernelStack<T>, xp: &Image<T>) -> Result<(Image<T>, u64)> {
    let c = AtomicU64::new(0);
    let y = forward_impl(stack, xp, Some(&c))?;
    Ok((y, c.into_inner()))
}

/// `Hᵀ r` for `r` of size `m_t × n_t`; returns `m_p × n_p`.
///
/// Equal to the sum over rows `i_h` of the full convolution of the rotated
/// kernel `R(k(i_h))` with row `i_h` of `r`, placed at padded rows
/// `i_h ..= i_h + 2m_r`.
pub fn adjoint_h<T: Scalar>(stack: &AxialKernelStack<T>, r: &Image<T>) -> Result<Image<T>> {
    adjoint_impl(stack, r, None)
}

pub fn adjoint_h_counted<T: Scalar>(stack: &AxialKernelStack<T>, r: &Image<T>) -> Result<(Image<T>, u64)> {
    let c = AtomicU64::new(0);
    let y = adjoint_impl(stack, r, Some(&c))?;
    Ok((y, c.into_inner()))
}

/// Explicit `(m_t n_t) × (m_p n_p)` matrix of `H`, built entry by entry from
/// the kernel taps. Small instances only.
pub fn materialize_h<T: Scalar>(stack: &AxialKernelStack<T>) -> Result<SparseOperator<T>> {
    let (m_t, n_t, m_p, n_p) = (stack.m_t, stack.n_t, stack.m_p(), stack.n_p());
    if m_p * n_p > MATERIALIZE_LIMIT {
        return Err(Error::SizeGuard {
            what: "padded pixels",
            value: m_p * n_p,
            limit: MATERIALIZE_LIMIT,
        });
    }
    let (mk, nk) = (stack.m_k(), stack.n_k());
    let mut entries = Vec::with_capacity(m_t * n_t * mk * nk);
    for j in 0..n_t {
        for i in 0..m_t {
            let k = stack.kernel(i + 1)?;
            for q in 0..nk {
                for p in 0..mk {
                    let (pi, pj) = (i + mk - 1 - p, j + nk - 1 - q);
                    entries.push((j * m_t + i, pj * m_p + pi, k[(p, q)]));
                }
            }
        }
    }
    SparseOperator::from_triplets(m_t * n_t, m_p * n_p, entries)?.with_shapes((m_p, n_p), (m_t, n_t))
}

/// Literal operator-sum form of `Hᵀ`: for every row, full correlation of
/// that row with the rotated kernel, added into the padded output. Serial
/// reference for the gather implementation.
pub fn adjoint_h_reference<T: Scalar>(stack: &AxialKernelStack<T>, r: &Image<T>) -> Result<Image<T>> {
    ensure_dims!(r.dims() == (stack.m_t, stack.n_t), "residual dimension mismatch");
    let mut out = Image::zeros(stack.m_p(), stack.n_p());
    for ih in 1..=stack.m_t {
        let row = Image::from_fn(1, stack.n_t, |_, j| r[(ih - 1, j)]);
        let band = crate::ops::full_convolve(&rotate180(&stack.kernel(ih)?), &row);
        for j in 0..band.cols() {
            for i in 0..band.rows() {
                out[(ih - 1 + i, j)] += band[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Forward model `x ↦ H P x` with its padding operator.
#[derive(Clone, Debug)]
pub struct ForwardModel<T> {
    stack: AxialKernelStack<T>,
    pad: SparseOperator<T>,
    mode: PadMode,
}

impl<T: Scalar> ForwardModel<T> {
    pub fn new(stack: AxialKernelStack<T>, mode: PadMode) -> Result<Self> {
        let pad = make_pad_2d(stack.m_t, stack.n_t, stack.m_r, stack.n_r, mode)?;
        Ok(Self { stack, pad, mode })
    }

    pub fn stack(&self) -> &AxialKernelStack<T> {
        &self.stack
    }

    pub fn pad(&self) -> &SparseOperator<T> {
        &self.pad
    }

    pub fn pad_mode(&self) -> PadMode {
        self.mode
    }

    /// TRF / RF image shape `(m_t, n_t)`.
    pub fn image_dims(&self) -> (usize, usize) {
        (self.stack.m_t, self.stack.n_t)
    }

    fn check_input(&self, x: &Image<T>, what: &str) -> Result<()> {
        ensure_dims!(
            x.dims() == self.image_dims(),
            "{what} is {}x{}, model expects {}x{}",
            x.rows(),
            x.cols(),
            self.stack.m_t,
            self.stack.n_t
        );
        Ok(())
    }

    /// `H P x`
    pub fn apply(&self, x: &Image<T>) -> Result<Image<T>> {
        self.check_input(x, "TRF")?;
        forward_h(&self.stack, &self.pad.apply(x)?)
    }

    /// `Pᵀ Hᵀ r`
    pub fn adjoint(&self, r: &Image<T>) -> Result<Image<T>> {
        self.check_input(r, "residual")?;
        self.pad.apply_transpose(&adjoint_h(&self.stack, r)?)
    }

    /// Gradient of `½‖H P x − y‖²`, i.e. `Pᵀ Hᵀ (H P x − y)`.
    pub fn gradient_datafit(&self, x: &Image<T>, y: &Image<T>) -> Result<Image<T>> {
        self.check_input(y, "observation")?;
        let r = self.apply(x)?.sub(y)?;
        self.adjoint(&r)
    }

    /// `y = H P x + n` with white Gaussian `n` at the requested SNR relative
    /// to `H P x`, deterministic in `seed`.
    pub fn simulate(&self, x: &Image<T>, snr: Snr, seed: u64) -> Result<Image<T>> {
        let clean = self.apply(x)?;
        noise::add_awgn(&clean, snr, seed)
    }

    /// Dense `H P` for small instances.
    pub fn materialize(&self) -> Result<SparseOperator<T>> {
        let h = materialize_h(&self.stack)?;
        let mut entries = Vec::new();
        let p = self.pad.to_dense();
        let ncols = self.pad.ncols();
        for r in 0..h.nrows() {
            let mut row = vec![T::zero(); ncols];
            for &(_, c, v) in h.entries().iter().filter(|e| e.0 == r) {
                for (k, &pv) in p[c].iter().enumerate() {
                    row[k] += v * pv;
                }
            }
            entries.extend(
                row.into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v != T::zero())
                    .map(|(c, v)| (r, c, v)),
            );
        }
        SparseOperator::from_triplets(h.nrows(), ncols, entries)?
            .with_shapes(self.image_dims(), self.image_dims())
    }
}
