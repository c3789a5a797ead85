//! B-mode display: envelope detection, log compression and PGM output.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::axial::AxialKernelStack;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.pixels[i * self.cols + j]
    }

    /// Binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_pgm())?;
        f.flush()?;
        Ok(())
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        pos += 1;
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(format!("PGM header {s:?}: {e}")));
        if fields[0] != "P5" || num(&fields[3])? != 255 {
            return Err(Error::Format("only P5 with maxval 255 is supported".into()));
        }
        let (cols, rows) = (num(&fields[1])?, num(&fields[2])?);
        let pixels = bytes.get(pos..pos + rows * cols).ok_or_else(|| Error::Format("truncated PGM data".into()))?;
        Ok(Self { rows, cols, pixels: pixels.to_vec() })
    }
}

/// Magnitude of the analytic signal of every column (DFT-based Hilbert
/// transform along the axial direction).
pub fn envelope<T: Scalar>(rf: &Image<T>) -> Image<T> {
    let m = rf.rows();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut out = Image::zeros(m, rf.cols());
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    for j in 0..rf.cols() {
        for (b, v) in buf.iter_mut().zip(rf.col(j)) {
            *b = Complex::new(v.as_f64(), 0.0);
        }
        fwd.process(&mut buf);
        // keep DC (and Nyquist), double positive frequencies, drop negative ones
        for (k, b) in buf.iter_mut().enumerate() {
            let gain = if k == 0 || 2 * k == m {
                1.0
            } else if 2 * k < m {
                2.0
            } else {
                0.0
            };
            *b *= gain;
        }
        inv.process(&mut buf);
        for (o, b) in out.col_mut(j).iter_mut().zip(&buf) {
            *o = T::lit(b.norm() / m as f64);
        }
    }
    out
}

/// Log-compresses a non-negative amplitude image to `[-dr, 0]` dB relative to
/// its maximum and maps that range linearly onto `0..=255`.
pub fn log_compress<T: Scalar>(amplitude: &Image<T>, dynamic_range_db: f64) -> Result<GrayImage> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::Parameter(format!("dynamic range must be positive, got {dynamic_range_db}")));
    }
    let peak = amplitude.max_abs().as_f64();
    if peak == 0.0 {
        return Err(Error::Parameter("cannot render an all-zero image".into()));
    }
    let (rows, cols) = amplitude.dims();
    let mut pixels = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let a = amplitude[(i, j)].as_f64().abs() / peak;
            let db = if a > 0.0 { 20.0 * a.log10() } else { f64::NEG_INFINITY };
            let level = (db.max(-dynamic_range_db) + dynamic_range_db) / dynamic_range_db;
            pixels.push((level * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(GrayImage { rows, cols, pixels })
}

/// Envelope detection followed by log compression.
pub fn bmode_render<T: Scalar>(rf: &Image<T>, dynamic_range_db: f64) -> Result<GrayImage> {
    if rf.max_abs() == T::zero() {
        return Err(Error::Parameter("cannot render an all-zero image".into()));
    }
    log_compress(&envelope(rf), dynamic_range_db)
}

/// Envelopes of `count` kernels at regularly spaced depths, each min-max
/// normalized, laid side by side with a one-pixel black gap.
pub fn kernel_preview<T: Scalar>(stack: &AxialKernelStack<T>, count: usize) -> Result<GrayImage> {
    let count = count.clamp(1, stack.m_t());
    let (mk, nk) = (stack.m_k(), stack.n_k());
    let cols = count * (nk + 1) - 1;
    let mut pixels = vec![0u8; mk * cols];
    for s in 0..count {
        // 1-based depths spread from the first to the last row
        let ih = if count == 1 { 1 } else { 1 + s * (stack.m_t() - 1) / (count - 1) };
        let env = envelope(&stack.kernel(ih)?);
        let (lo, hi) = env
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.as_f64()), hi.max(v.as_f64())));
        let span = if hi > lo { hi - lo } else { 1.0 };
        for i in 0..mk {
            for j in 0..nk {
                let v = (env[(i, j)].as_f64() - lo) / span;
                pixels[i * cols + s * (nk + 1) + j] = (v * 255.0).round() as u8;
            }
        }
    }
    Ok(GrayImage { rows: mk, cols, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_tone_has_flat_envelope() {
        // integer number of periods so the periodic Hilbert transform is exact
        let rf = Image::<f64>::from_fn(256, 3, |i, j| (1.0 + j as f64) * (2.0 * PI * 16.0 * i as f64 / 256.0).cos());
        let env = envelope(&rf);
        for j in 0..3 {
            for i in 16..240 {
                assert!((env[(i, j)] / (1.0 + j as f64) - 1.0).abs() < 0.01);
            }
        }
        let g = bmode_render(&Image::from_fn(256, 1, |i, _| (2.0 * PI * 0.15 * i as f64).cos()), 40.0).unwrap();
        for i in 32..224 {
            assert!(g.get(i, 0) > 240, "row {i}: {}", g.get(i, 0));
        }
    }

    #[test]
    fn dynamic_range_floor() {
        let amp = Image::<f64>::from_rows(&[[1.0, 0.1, 0.01, 0.001, 0.0]]).unwrap();
        let g = log_compress(&amp, 40.0).unwrap();
        assert_eq!(g.pixels, vec![255, 128, 0, 0, 0]);
    }

    #[test]
    fn rendering_is_scale_invariant() {
        let rf = Image::<f64>::from_fn(64, 8, |i, j| ((i * 7 + j * 3) as f64).sin() * (1.0 + i as f64));
        let a = bmode_render(&rf, 40.0).unwrap();
        assert_eq!(a, bmode_render(&rf.scaled(4.0), 40.0).unwrap());
        assert!(bmode_render(&Image::<f64>::zeros(4, 4), 40.0).is_err());
        assert!(bmode_render(&rf, 0.0).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let g = GrayImage { rows: 2, cols: 3, pixels: vec![0, 1, 2, 253, 254, 255] };
        let bytes = g.to_pgm();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(GrayImage::from_pgm(&bytes).unwrap(), g);
        assert!(GrayImage::from_pgm(b"P2\n1 1\n255\n0").is_err());
    }
}
