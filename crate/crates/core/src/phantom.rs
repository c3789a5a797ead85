//! Inputs for deconvolution experiments: the depth-varying Gaussian-cosine
//! kernel family, synthetic reflectivity images and quality metrics.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::axial::AxialKernelStack;
use crate::error::{ensure_dims, Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// Transmit center frequency used by the reference experiments, in Hz.
pub const DEFAULT_F0: f64 = 3.0e6;
/// Sampling frequency used by the reference experiments, in Hz.
pub const DEFAULT_FS: f64 = 20.0e6;
/// PSNR reported when the estimate equals the reference.
pub const PSNR_CAP_DB: f64 = 300.0;

/// Parameters of the kernel family
/// `k(i_h)[i, j] = ρ(i; μ_z, σ_z) · ρ(j; μ_x, σ_x(i_h)) · cos(2π f0/fs (i − μ_z))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub m_t: usize,
    pub m_r: usize,
    pub n_r: usize,
    pub f0: f64,
    pub fs: f64,
    /// Axial SD and lateral SD at the focal row, in pixels.
    pub sigma1: f64,
    /// Lateral SD at the top and bottom rows, in pixels.
    pub sigma2: f64,
}

impl KernelParams {
    /// Reference frequencies with `σ1 = m_r/3`, `σ2 = n_r/3`.
    pub fn new(m_t: usize, m_r: usize, n_r: usize) -> Self {
        Self {
            m_t,
            m_r,
            n_r,
            f0: DEFAULT_F0,
            fs: DEFAULT_FS,
            sigma1: m_r as f64 / 3.0,
            sigma2: n_r as f64 / 3.0,
        }
    }

    pub fn m_k(&self) -> usize {
        2 * self.m_r + 1
    }

    pub fn n_k(&self) -> usize {
        2 * self.n_r + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_t == 0 {
            return Err(Error::Parameter("kernel family needs m_t >= 1".into()));
        }
        if !(self.f0 > 0.0 && self.f0 < self.fs / 2.0) {
            return Err(Error::Parameter(format!(
                "need 0 < f0 < fs/2, got f0={} fs={}",
                self.f0, self.fs
            )));
        }
        for (name, sigma, radius) in [("sigma1", self.sigma1, self.m_r), ("sigma2", self.sigma2, self.n_r)] {
            let ok = sigma.is_finite() && (sigma > 0.0 || (sigma == 0.0 && radius == 0));
            if !ok {
                return Err(Error::Parameter(format!("{name} must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Lateral SD of row `i_h` (1-based):
    /// `sqrt((2 i_h / m_t − 1)² (σ2² − σ1²) + σ1²)`.
    pub fn lateral_sd(&self, i_h: usize) -> f64 {
        let u = 2.0 * i_h as f64 / self.m_t as f64 - 1.0;
        (u * u * (self.sigma2 * self.sigma2 - self.sigma1 * self.sigma1) + self.sigma1 * self.sigma1).sqrt()
    }
}

/// Normalized Gaussian window `exp(−(x−μ)²/(2σ²)) / (σ √(2π))`.
pub fn gaussian_window<T: Scalar>(x: T, mu: T, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::Parameter(format!("window SD must be positive, got {sigma}")));
    }
    let d = (x - mu) / sigma;
    let two = T::lit(2.0);
    Ok((-(d * d) / two).exp() / (sigma * T::lit((2.0 * PI).sqrt())))
}

// Window samples along one kernel axis; a zero-radius axis is a single unit tap.
fn axis_window<T: Scalar>(radius: usize, sigma: f64) -> Result<Vec<T>> {
    if radius == 0 {
        return Ok(vec![T::one()]);
    }
    let mu = T::from_usize_lossy(radius + 1);
    (1..=2 * radius + 1)
        .map(|i| gaussian_window(T::from_usize_lossy(i), mu, T::lit(sigma)))
        .collect()
}

/// Kernel of row `i_h` (1-based), centered at `(m_r + 1, n_r + 1)`.
pub fn make_kernel<T: Scalar>(i_h: usize, p: &KernelParams) -> Result<Image<T>> {
    p.validate()?;
    if i_h == 0 || i_h > p.m_t {
        return Err(Error::Domain(format!("kernel row {i_h} outside 1..={}", p.m_t)));
    }
    let axial: Vec<T> = axis_window(p.m_r, p.sigma1)?;
    let lateral: Vec<T> = axis_window(p.n_r, p.lateral_sd(i_h))?;
    let w = T::lit(2.0 * PI * p.f0 / p.fs);
    let mu_z = T::from_usize_lossy(p.m_r + 1);
    Ok(Image::from_fn(p.m_k(), p.n_k(), |i, j| {
        let carrier = (w * (T::from_usize_lossy(i + 1) - mu_z)).cos();
        axial[i] * lateral[j] * carrier
    }))
}

/// Full stack `k(1) … k(m_t)` for images `n_t` pixels wide.
pub fn make_stack<T: Scalar>(p: &KernelParams, n_t: usize) -> Result<AxialKernelStack<T>> {
    p.validate()?;
    AxialKernelStack::from_fn(p.m_t, n_t, |ih| make_kernel(ih, p))
}

/// Image size and kernel radii of one reference experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableConfig {
    pub name: &'static str,
    pub m_t: usize,
    pub n_t: usize,
    pub m_r: usize,
    pub n_r: usize,
}

/// The three full-size reference configurations.
pub const TABLE_CONFIGS: [TableConfig; 3] = [
    TableConfig { name: "trf1", m_t: 2480, n_t: 480, m_r: 9, n_r: 50 },
    TableConfig { name: "trf2", m_t: 2598, n_t: 480, m_r: 7, n_r: 35 },
    TableConfig { name: "trf3", m_t: 2598, n_t: 480, m_r: 5, n_r: 25 },
];

pub fn table_config(name: &str) -> Option<TableConfig> {
    TABLE_CONFIGS.iter().copied().find(|c| c.name.eq_ignore_ascii_case(name))
}

/// Reflectivity generator: zero-mean Gaussian scatterers whose SD follows an
/// intensity map.
#[derive(Clone, Debug, PartialEq)]
pub struct TrfSpec<T> {
    pub intensity_map: Image<T>,
    pub seed: u64,
    /// Spacing of the scatterer grid in pixels. `1` draws one scatterer per
    /// pixel; larger values draw a coarse grid and interpolate bilinearly.
    pub scatterer_step: usize,
}

impl<T: Scalar> TrfSpec<T> {
    pub fn new(intensity_map: Image<T>, seed: u64) -> Self {
        Self {
            intensity_map,
            seed,
            scatterer_step: 1,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.intensity_map.dims()
    }
}

pub fn make_trf<T: Scalar>(spec: &TrfSpec<T>) -> Result<Image<T>> {
    let (rows, cols) = spec.dims();
    if spec.scatterer_step == 0 {
        return Err(Error::Parameter("scatterer step must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = || -> T {
        let z: f64 = StandardNormal.sample(&mut rng);
        T::lit(z)
    };
    let scatter = if spec.scatterer_step == 1 {
        Image::from_fn(rows, cols, |_, _| draw())
    } else {
        let s = spec.scatterer_step;
        let (gr, gc) = ((rows - 1) / s + 2, (cols - 1) / s + 2);
        let grid = Image::from_fn(gr, gc, |_, _| draw());
        let inv = T::one() / T::from_usize_lossy(s);
        Image::from_fn(rows, cols, |i, j| {
            let (a, b) = (i / s, j / s);
            let (fi, fj) = (T::from_usize_lossy(i % s) * inv, T::from_usize_lossy(j % s) * inv);
            let one = T::one();
            grid[(a, b)] * (one - fi) * (one - fj)
                + grid[(a + 1, b)] * fi * (one - fj)
                + grid[(a, b + 1)] * (one - fi) * fj
                + grid[(a + 1, b + 1)] * fi * fj
        })
    };
    scatter.zip_map(&spec.intensity_map, |z, m| z * m)
}

/// Synthetic intensity map in `[0, 1]`: a lateral gradient background with a
/// bright disk, an anechoic disk, a wedge and a column of point targets.
pub fn phantom_map<T: Scalar>(rows: usize, cols: usize) -> Image<T> {
    let (h, w) = (rows as f64, cols as f64);
    let disk = |i: f64, j: f64, ci: f64, cj: f64, r: f64| {
        ((i - ci) / h).powi(2) * (h / w).powi(2) + ((j - cj) / w).powi(2) <= (r / w).powi(2)
    };
    let point_rows: Vec<usize> = (1..6).map(|k| k * rows / 6).collect();
    let point_col = (cols * 4) / 5;
    Image::from_fn(rows, cols, |i, j| {
        let (fi, fj) = (i as f64, j as f64);
        let mut v = 0.25 + 0.2 * fj / w;
        if disk(fi, fj, 0.3 * h, 0.3 * w, 0.15 * w) {
            v = 1.0;
        }
        if disk(fi, fj, 0.7 * h, 0.35 * w, 0.12 * w) {
            v = 0.02;
        }
        // wedge opening downward from the top center
        let dj = (fj - 0.6 * w).abs();
        if fi > 0.1 * h && fi < 0.55 * h && dj < 0.12 * w * (fi - 0.1 * h) / (0.45 * h) {
            v = 0.6;
        }
        if j == point_col && point_rows.contains(&i) {
            v = 1.0;
        }
        T::lit(v)
    })
}

/// `‖est − ref‖₂ / ‖ref‖₂`
pub fn nrmse<T: Scalar>(reference: &Image<T>, est: &Image<T>) -> Result<f64> {
    ensure_dims!(reference.dims() == est.dims(), "metric inputs differ in size");
    let denom = reference.norm().as_f64();
    if denom == 0.0 {
        return Err(Error::Parameter("reference image has zero norm".into()));
    }
    Ok(est.sub(reference)?.norm().as_f64() / denom)
}

/// `20 log10(max|ref| / rms(est − ref))`, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(reference: &Image<T>, est: &Image<T>) -> Result<f64> {
    ensure_dims!(reference.dims() == est.dims(), "metric inputs differ in size");
    let diff = est.sub(reference)?;
    let rms = (diff.norm_sq().as_f64() / diff.len() as f64).sqrt();
    let peak = reference.max_abs().as_f64();
    if rms == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((20.0 * (peak / rms).log10()).min(PSNR_CAP_DB))
}
