//! Randomized identity suite for the operators: adjointness, dense-matrix
//! agreement, padding structure and the circular-convolution identities
//! behind the adjoint formula. Fourier checks use a naive DFT.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::axial::{adjoint_h, forward_h, materialize_h, AxialKernelStack, ForwardModel};
use crate::error::Result;
use crate::image::{Image, IndexRange};
use crate::ops::{
    circ_add, circular_convolve, circular_shift, full_convolve, materialize_operator, rotate180, valid_convolve,
    window_general, zero_pad_general,
};
use crate::padding::{make_pad_1d, make_pad_2d, pad_image, pad_separable, PadMode};
use crate::solver::estimate_lipschitz;
use crate::sparse::SparseOperator;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tol
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<6} {:<28} instances={:<4} max_rel_err={:.3e} tol={:.0e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.instances,
                c.max_rel_err,
                c.tol
            );
        }
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { instances: 50, seed: 2024 }
    }
}

/// `max|a − b| / max|b|` (absolute error when `b` is zero).
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "compared slices differ in length");
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn sparse_err(a: &SparseOperator<f64>, b: &SparseOperator<f64>) -> f64 {
    if (a.nrows(), a.ncols()) != (b.nrows(), b.ncols()) {
        return f64::INFINITY;
    }
    let flat = |s: &SparseOperator<f64>| s.to_dense().concat();
    rel_err(&flat(a), &flat(b))
}

/// Random model with image and kernel sizes drawn up to the given bounds;
/// radii respect the pad-radius limit of non-zero modes.
pub fn random_model(rng: &mut impl Rng, max_t: (usize, usize), max_r: (usize, usize), mode: PadMode) -> Result<ForwardModel<f64>> {
    let m_t = rng.gen_range(1..=max_t.0);
    let n_t = rng.gen_range(1..=max_t.1);
    let cap = |r: usize, t: usize| if mode == PadMode::Zero { r } else { r.min(t) };
    let m_r = rng.gen_range(0..=cap(max_r.0, m_t));
    let n_r = rng.gen_range(0..=cap(max_r.1, n_t));
    let stack = AxialKernelStack::from_fn(m_t, n_t, |_| Ok(Image::random(2 * m_r + 1, 2 * n_r + 1, rng)))?;
    ForwardModel::new(stack, mode)
}

/// Normalized adjoint mismatch
/// `|⟨HPu, v⟩ − ⟨u, PᵀHᵀv⟩| / (‖u‖ ‖v‖ ‖HP‖)` over random instances
/// cycling through every pad mode.
pub fn check_adjoint_dot(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 0..instances {
        let mode = PadMode::ALL[n % PadMode::ALL.len()];
        let model = random_model(&mut rng, (64, 64), (4, 6), mode)?;
        let (m_t, n_t) = model.image_dims();
        let u = Image::random(m_t, n_t, &mut rng);
        let v = Image::random(m_t, n_t, &mut rng);
        let lhs = model.apply(&u)?.dot(&v)?;
        let rhs = u.dot(&model.adjoint(&v)?)?;
        let op_norm = estimate_lipschitz(&model, 20)?.sqrt();
        let scale = u.norm() * v.norm() * op_norm;
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(CheckResult { name: "adjoint-dot-product", instances, max_rel_err: worst, tol: 1e-11 })
}

/// Matrix-free `H`, `Hᵀ`, `P`, `Pᵀ` against their materialized matrices.
pub fn check_dense(instances: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut h, mut ht, mut p, mut pt, mut hp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 0..instances {
        let mode = PadMode::ALL[n % PadMode::ALL.len()];
        let model = random_model(&mut rng, (12, 12), (4, 6), mode)?;
        let stack = model.stack();
        let (m_t, n_t) = model.image_dims();
        let (m_p, n_p) = (stack.m_p(), stack.n_p());
        let dense_h = materialize_h(stack)?;
        h = h.max(sparse_err(&materialize_operator(|x| forward_h(stack, x), m_p, n_p)?, &dense_h));
        ht = ht.max(sparse_err(&materialize_operator(|r| adjoint_h(stack, r), m_t, n_t)?, &dense_h.transpose()));
        let pad = make_pad_2d(m_t, n_t, stack.m_r(), stack.n_r(), mode)?;
        p = p.max(sparse_err(
            &materialize_operator(|x| pad_image(x, stack.m_r(), stack.n_r(), mode), m_t, n_t)?,
            &pad,
        ));
        pt = pt.max(sparse_err(&materialize_operator(|r| pad.apply_transpose(r), m_p, n_p)?, &pad.transpose()));
        // matrix-free H P against the product of the two dense matrices
        let x = Image::random(m_t, n_t, &mut rng);
        let dense = model.materialize()?.apply_slice(x.as_slice())?;
        hp = hp.max(rel_err(model.apply(&x)?.as_slice(), &dense));
    }
    let r = |name, err, tol| CheckResult { name, instances, max_rel_err: err, tol };
    Ok(vec![
        r("dense-forward", h, 1e-13),
        r("dense-adjoint", ht, 1e-13),
        r("dense-padding", p, 0.0),
        r("dense-padding-transpose", pt, 0.0),
        r("dense-forward-model", hp, 1e-13),
    ])
}

/// Kronecker-built 2D padding against separable column-then-row padding.
pub fn check_kronecker_padding(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 0..instances {
        let mode = PadMode::ALL[n % PadMode::ALL.len()];
        let (m_t, n_t) = (rng.gen_range(1..=10), rng.gen_range(1..=10));
        let m_r = rng.gen_range(0..=m_t.min(4));
        let n_r = rng.gen_range(0..=n_t.min(4));
        let pm = make_pad_1d(m_t, m_r, mode)?;
        let pn = make_pad_1d(n_t, n_r, mode)?;
        let kron = make_pad_2d(m_t, n_t, m_r, n_r, mode)?;
        let sep = materialize_operator(|x| pad_separable(x, &pm, &pn), m_t, n_t)?;
        worst = worst.max(sparse_err(&kron, &sep));
    }
    Ok(CheckResult { name: "kronecker-padding", instances, max_rel_err: worst, tol: 0.0 })
}

fn random_pair(rng: &mut impl Rng, max: usize) -> (Image<f64>, Image<f64>) {
    let (m, n) = (rng.gen_range(1..=max), rng.gen_range(1..=max));
    (Image::random(m, n, rng), Image::random(m, n, rng))
}

/// Shifts cumulate and factor out of circular convolutions.
pub fn check_shift_cumulation(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (k, a) = random_pair(&mut rng, 8);
        let (m, n) = k.dims();
        let (p1, q1, p2, q2) = (rng.gen_range(1..=m), rng.gen_range(1..=n), rng.gen_range(1..=m), rng.gen_range(1..=n));
        let lhs = circular_convolve(&circular_shift(&k, p1, q1)?, &circular_shift(&a, p2, q2)?)?;
        let rhs = circular_shift(&circular_convolve(&k, &a)?, circ_add(p1, p2, m)?, circ_add(q1, q2, n)?)?;
        worst = worst.max(rel_err(lhs.as_slice(), rhs.as_slice()));
    }
    Ok(CheckResult { name: "shift-cumulation", instances, max_rel_err: worst, tol: 1e-11 })
}

/// The transpose of circular convolution by `k̄` is the (2,2)-shifted
/// circular convolution by the rotated kernel.
pub fn check_circular_adjoint(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (m, n) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let k = Image::random(m, n, &mut rng);
        let ct = materialize_operator(|a| circular_convolve(&k, a), m, n)?.transpose();
        let rk = rotate180(&k);
        let rhs = materialize_operator(|a| circular_shift(&circular_convolve(&rk, a)?, 2.min(m), 2.min(n)), m, n)?;
        worst = worst.max(sparse_err(&ct, &rhs));
    }
    Ok(CheckResult { name: "circular-adjoint", instances, max_rel_err: worst, tol: 1e-11 })
}

/// Naive 2D DFT, `F(u,v) = Σ a(i,j) exp(−2πi (ui/m + vj/n))`.
pub fn dft2(a: &Image<f64>) -> Vec<Complex64> {
    let (m, n) = a.dims();
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for v in 0..n {
        for u in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                for i in 0..m {
                    let ph = -2.0 * PI * ((u * i % m) as f64 / m as f64 + (v * j % n) as f64 / n as f64);
                    s += a[(i, j)] * Complex64::from_polar(1.0, ph);
                }
            }
            out[u + v * m] = s;
        }
    }
    out
}

fn complex_rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.norm()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// `DFT(S(2,2) R(k̄)) = conj(DFT(k̄))` for real `k̄`.
pub fn check_dft_conjugate(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (m, n) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let k = Image::random(m, n, &mut rng);
        let lhs = dft2(&circular_shift(&rotate180(&k), 2.min(m), 2.min(n))?);
        let rhs: Vec<_> = dft2(&k).iter().map(|c| c.conj()).collect();
        worst = worst.max(complex_rel_err(&lhs, &rhs));
    }
    Ok(CheckResult { name: "dft-conjugate-symmetry", instances, max_rel_err: worst, tol: 1e-11 })
}

/// Circular convolution against pointwise multiplication in the DFT domain.
pub fn check_convolution_theorem(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (k, a) = random_pair(&mut rng, 6);
        let (m, n) = k.dims();
        let lhs = dft2(&circular_convolve(&k, &a)?);
        let rhs: Vec<_> = dft2(&k).iter().zip(dft2(&a)).map(|(x, y)| x * y).collect();
        worst = worst.max(complex_rel_err(&lhs, &rhs));
        debug_assert_eq!(lhs.len(), m * n);
    }
    Ok(CheckResult { name: "convolution-theorem", instances, max_rel_err: worst, tol: 1e-11 })
}

/// Valid convolution as window ∘ circular ∘ zero-pad on the image grid.
pub fn check_valid_as_circular(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (ma, na) = (rng.gen_range(1..=9), rng.gen_range(1..=9));
        let (mk, nk) = (rng.gen_range(1..=ma), rng.gen_range(1..=na));
        let k = Image::random(mk, nk, &mut rng);
        let a = Image::random(ma, na, &mut rng);
        let kbar = zero_pad_general(&k, IndexRange::new(1, mk, ma)?, IndexRange::new(1, nk, na)?)?;
        let c = circular_convolve(&kbar, &a)?;
        let lhs = window_general(&c, IndexRange::new(mk, ma, ma)?, IndexRange::new(nk, na, na)?)?;
        worst = worst.max(rel_err(lhs.as_slice(), valid_convolve(&k, &a)?.as_slice()));
    }
    Ok(CheckResult { name: "valid-as-circular", instances, max_rel_err: worst, tol: 1e-11 })
}

/// Full convolution as circular convolution of zero-padded operands.
pub fn check_full_as_circular(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (mb, nb) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
        let (mk, nk) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let (ma, na) = (mb + mk - 1, nb + nk - 1);
        let k = Image::random(mk, nk, &mut rng);
        let b = Image::random(mb, nb, &mut rng);
        let kbar = zero_pad_general(&k, IndexRange::new(1, mk, ma)?, IndexRange::new(1, nk, na)?)?;
        let bbar = zero_pad_general(&b, IndexRange::new(1, mb, ma)?, IndexRange::new(1, nb, na)?)?;
        let lhs = circular_convolve(&kbar, &bbar)?;
        worst = worst.max(rel_err(lhs.as_slice(), full_convolve(&k, &b).as_slice()));
    }
    Ok(CheckResult { name: "full-as-circular", instances, max_rel_err: worst, tol: 1e-11 })
}

/// Data-fit gradient against central differences at 20 random coordinates
/// of a 16 × 12 instance.
pub fn check_gradient(seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stack = AxialKernelStack::from_fn(16, 12, |_| Ok(Image::random(5, 7, &mut rng)))?;
    let model = ForwardModel::new(stack, PadMode::Symmetric)?;
    let x = Image::random(16, 12, &mut rng);
    let y = Image::random(16, 12, &mut rng);
    let f = |x: &Image<f64>| -> Result<f64> { Ok(0.5 * model.apply(x)?.sub(&y)?.norm_sq()) };
    let g = model.gradient_datafit(&x, &y)?;
    let h = 1e-3;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let idx = rng.gen_range(0..x.len());
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.as_mut_slice()[idx] += h;
        xm.as_mut_slice()[idx] -= h;
        let fd = (f(&xp)? - f(&xm)?) / (2.0 * h);
        let gi = g.as_slice()[idx];
        worst = worst.max((fd - gi).abs() / gi.abs().max(1e-12));
    }
    Ok(CheckResult { name: "gradient-finite-difference", instances: 20, max_rel_err: worst, tol: 1e-5 })
}

pub fn run_all(cfg: VerifyConfig) -> Result<VerifyReport> {
    let n = cfg.instances.max(1);
    let s = cfg.seed;
    let mut checks = vec![check_adjoint_dot(n, s)?];
    checks.extend(check_dense(n, s.wrapping_add(1))?);
    checks.push(check_kronecker_padding(n, s.wrapping_add(2))?);
    checks.push(check_shift_cumulation(n, s.wrapping_add(3))?);
    checks.push(check_circular_adjoint(n, s.wrapping_add(4))?);
    checks.push(check_dft_conjugate(n, s.wrapping_add(5))?);
    checks.push(check_convolution_theorem(n, s.wrapping_add(6))?);
    checks.push(check_valid_as_circular(n, s.wrapping_add(7))?);
    checks.push(check_full_as_circular(n, s.wrapping_add(8))?);
    checks.push(check_gradient(s.wrapping_add(9))?);
    Ok(VerifyReport { checks })
}
