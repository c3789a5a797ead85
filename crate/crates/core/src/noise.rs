//! Additive white Gaussian noise at a prescribed signal-to-noise ratio.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// Requested signal-to-noise ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Snr {
    /// Ratio of mean signal power to mean noise power, in decibels.
    Db(f64),
    /// No noise is added.
    Infinite,
}

impl Snr {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "none" => Ok(Snr::Infinite),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Snr::Db)
                .ok_or_else(|| Error::Parameter(format!("bad SNR {s:?}"))),
        }
    }
}

impl std::str::FromStr for Snr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Db(v) => write!(f, "{v}"),
            Snr::Infinite => f.write_str("inf"),
        }
    }
}

/// Mean squared value.
pub fn power<T: Scalar>(x: &Image<T>) -> f64 {
    x.as_slice().iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / x.len() as f64
}

/// `10 log10(power(signal) / power(noise))`.
pub fn snr_db<T: Scalar>(signal: &Image<T>, noise: &Image<T>) -> f64 {
    10.0 * (power(signal) / power(noise)).log10()
}

/// Standard normal field drawn from a ChaCha stream seeded by `seed`, filled
/// in column-major order.
pub fn standard_normal<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Image<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        T::lit(z)
    })
}

/// Noise image for `signal` at the given SNR.
///
/// A standard normal draw is rescaled so that its empirical power is exactly
/// `power(signal) / 10^(snr/10)`.
pub fn noise_for<T: Scalar>(signal: &Image<T>, snr_db: f64, seed: u64) -> Result<Image<T>> {
    if !snr_db.is_finite() {
        return Err(Error::Parameter(format!("SNR must be finite, got {snr_db}")));
    }
    let ps = power(signal);
    if ps == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let z = standard_normal::<T>(signal.rows(), signal.cols(), seed);
    let target = ps / 10f64.powf(snr_db / 10.0);
    let scale = (target / power(&z)).sqrt();
    Ok(z.scaled(T::lit(scale)))
}

/// `x + n` with white Gaussian `n` at the requested SNR relative to `x`.
pub fn add_awgn<T: Scalar>(x: &Image<T>, snr: Snr, seed: u64) -> Result<Image<T>> {
    match snr {
        Snr::Infinite => Ok(x.clone()),
        Snr::Db(db) => x.add(&noise_for(x, db, seed)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_snr_is_identity() {
        let x = standard_normal::<f64>(10, 10, 3);
        assert_eq!(add_awgn(&x, Snr::Infinite, 1).unwrap(), x);
    }

    #[test]
    fn realized_snr_hits_target() {
        let x = standard_normal::<f64>(400, 300, 9).map(|v| 3.0 * v + 1.0);
        let y = add_awgn(&x, Snr::Db(40.0), 11).unwrap();
        let n = y.sub(&x).unwrap();
        assert!((snr_db(&x, &n) - 40.0).abs() < 0.05);
    }

    #[test]
    fn seeds_and_errors() {
        let x = standard_normal::<f64>(50, 40, 1);
        let a = add_awgn(&x, Snr::Db(20.0), 5).unwrap();
        assert_eq!(a, add_awgn(&x, Snr::Db(20.0), 5).unwrap());
        let b = add_awgn(&x, Snr::Db(20.0), 6).unwrap();
        assert_ne!(a, b);
        let (na, nb) = (a.sub(&x).unwrap(), b.sub(&x).unwrap());
        assert!((power(&na) / power(&nb) - 1.0).abs() < 1e-12);
        assert!(matches!(
            add_awgn(&Image::<f64>::zeros(3, 3), Snr::Db(40.0), 1),
            Err(Error::ZeroSignal)
        ));
    }

    #[test]
    fn snr_parsing() {
        assert_eq!(Snr::parse("40").unwrap(), Snr::Db(40.0));
        assert_eq!(Snr::parse("inf").unwrap(), Snr::Infinite);
        assert!(Snr::parse("abc").is_err());
        assert!(Snr::parse("NaN").is_err());
    }
}
