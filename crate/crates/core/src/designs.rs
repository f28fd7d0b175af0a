//! Deterministic node sets and seeded Gaussian noise.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Node-set recipe; the domain is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Design {
    /// `n` points including both endpoints (the midpoint when `n = 1`). 1D only.
    Equispaced { n: usize },
    /// Halton points from index `skip + 1` on, one prime base per axis.
    Halton { n: usize, skip: usize },
    /// Chebyshev–Gauss points, ascending. 1D only.
    Chebyshev { n: usize },
    /// Cartesian product of per-axis equispaced sets.
    TensorGrid { counts: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DesignKind {
    Equispaced,
    Halton,
    Chebyshev,
    Grid,
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equispaced" | "uniform" => Ok(DesignKind::Equispaced),
            "halton" => Ok(DesignKind::Halton),
            "chebyshev" => Ok(DesignKind::Chebyshev),
            "grid" | "tensor" => Ok(DesignKind::Grid),
            other => Err(Error::Config(format!("unknown design '{other}'"))),
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::Equispaced => "equispaced",
            DesignKind::Halton => "halton",
            DesignKind::Chebyshev => "chebyshev",
            DesignKind::Grid => "grid",
        })
    }
}

impl DesignKind {
    /// Design of this kind with `n` points in `dim` dimensions.
    /// For grids `n` is the per-axis count.
    pub fn with_n(self, n: usize, dim: usize) -> Design {
        match self {
            DesignKind::Equispaced => Design::Equispaced { n },
            DesignKind::Halton => Design::Halton { n, skip: 0 },
            DesignKind::Chebyshev => Design::Chebyshev { n },
            DesignKind::Grid => Design::TensorGrid { counts: vec![n; dim] },
        }
    }
}

const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    value
}

fn equispaced_axis(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

fn one_dimensional(domain: &Domain, what: &str) -> Result<(f64, f64)> {
    if domain.dim() != 1 {
        return Err(Error::Config(format!("{what} design is one-dimensional, domain has dim {}", domain.dim())));
    }
    Ok(domain.bounds()[0])
}

pub fn generate(design: &Design, domain: &Domain) -> Result<Vec<Vec<f64>>> {
    let positive = |n: usize| {
        if n == 0 {
            Err(Error::Config("design needs at least one point".into()))
        } else {
            Ok(())
        }
    };
    match design {
        Design::Equispaced { n } => {
            positive(*n)?;
            let (lo, hi) = one_dimensional(domain, "equispaced")?;
            Ok(equispaced_axis(*n, lo, hi).into_iter().map(|x| vec![x]).collect())
        }
        Design::Chebyshev { n } => {
            positive(*n)?;
            let (lo, hi) = one_dimensional(domain, "chebyshev")?;
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            // cos((2i-1) pi / 2n) for i = n..1 is ascending
            Ok((1..=*n)
                .rev()
                .map(|i| {
                    let t = ((2 * i - 1) as f64 * PI / (2 * *n) as f64).cos();
                    vec![mid + half * t]
                })
                .collect())
        }
        Design::Halton { n, skip } => {
            positive(*n)?;
            if domain.dim() > PRIMES.len() {
                return Err(Error::Config(format!("halton supports up to {} dimensions", PRIMES.len())));
            }
            Ok((1..=*n as u64)
                .map(|i| {
                    domain
                        .bounds()
                        .iter()
                        .zip(PRIMES)
                        .map(|(&(lo, hi), base)| lo + (hi - lo) * radical_inverse(i + *skip as u64, base))
                        .collect()
                })
                .collect())
        }
        Design::TensorGrid { counts } => {
            if counts.len() != domain.dim() {
                return Err(Error::DimensionMismatch {
                    expected: domain.dim(),
                    got: counts.len(),
                });
            }
            for &c in counts {
                positive(c)?;
            }
            let axes: Vec<Vec<f64>> = counts
                .iter()
                .zip(domain.bounds())
                .map(|(&c, &(lo, hi))| equispaced_axis(c, lo, hi))
                .collect();
            let mut points = vec![Vec::new()];
            for axis in &axes {
                points = points
                    .into_iter()
                    .flat_map(|p| {
                        axis.iter().map(move |&v| {
                            let mut q = p.clone();
                            q.push(v);
                            q
                        })
                    })
                    .collect();
            }
            Ok(points)
        }
    }
}

/// Seeded stream of standard normal variates, produced by applying the
/// inverse normal CDF to a ChaCha8 (counter-mode) uniform stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, 1.0).expect("standard normal"),
        }
    }

    /// Uniform in the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        self.normal.inverse_cdf(u)
    }
}

/// `y + sigma z` with `z` i.i.d. standard normal from `seed`.
pub fn add_noise(y: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("noise std must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(y.to_vec());
    }
    let mut stream = NormalStream::new(seed);
    Ok(y.iter().map(|v| v + sigma * stream.next_normal()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Domain {
        Domain::unit_cube(1)
    }

    fn flat(p: Vec<Vec<f64>>) -> Vec<f64> {
        p.into_iter().map(|v| v[0]).collect()
    }

    #[test]
    fn equispaced_six() {
        let p = flat(generate(&Design::Equispaced { n: 6 }, &unit()).unwrap());
        let expected = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        for (a, b) in p.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(flat(generate(&Design::Equispaced { n: 1 }, &unit()).unwrap()), vec![0.5]);
    }

    #[test]
    fn halton_first_points() {
        let p = flat(generate(&Design::Halton { n: 3, skip: 0 }, &unit()).unwrap());
        assert_eq!(p, vec![0.5, 0.25, 0.75]);
        let two = generate(&Design::Halton { n: 2, skip: 0 }, &Domain::unit_cube(2)).unwrap();
        assert_eq!(two[0], vec![0.5, 1.0 / 3.0]);
    }

    #[test]
    fn chebyshev_two() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let p = flat(generate(&Design::Chebyshev { n: 2 }, &d).unwrap());
        assert_relative_eq!(p[0], -0.707_106_781_2, epsilon = 1e-10);
        assert_relative_eq!(p[1], 0.707_106_781_2, epsilon = 1e-10);
        let nine = flat(generate(&Design::Chebyshev { n: 9 }, &d).unwrap());
        assert!(nine.windows(2).all(|w| w[0] < w[1]));
        assert!(nine[4].abs() < 1e-15);
    }

    #[test]
    fn tensor_grid() {
        let p = generate(&Design::TensorGrid { counts: vec![5, 5] }, &Domain::unit_cube(2)).unwrap();
        assert_eq!(p.len(), 25);
        assert_eq!(p[0], vec![0.0, 0.0]);
        assert_eq!(p[24], vec![1.0, 1.0]);
        assert_eq!(p[1], vec![0.0, 0.25]);
    }

    #[test]
    fn design_errors() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(generate(&Design::Equispaced { n: 0 }, &unit()).is_err());
        assert!(generate(&Design::Chebyshev { n: 3 }, &Domain::unit_cube(2)).is_err());
        assert!(generate(&Design::TensorGrid { counts: vec![3] }, &Domain::unit_cube(2)).is_err());
        assert!("sobol".parse::<DesignKind>().is_err());
    }

    #[test]
    fn noise_identity_and_reproducibility() {
        let y = vec![1.0, 2.0, 3.0];
        assert_eq!(add_noise(&y, 0.0, 5).unwrap(), y);
        assert_eq!(add_noise(&y, 0.3, 5).unwrap(), add_noise(&y, 0.3, 5).unwrap());
        assert_ne!(add_noise(&y, 0.3, 5).unwrap(), add_noise(&y, 0.3, 6).unwrap());
        assert!(add_noise(&y, -1.0, 5).is_err());
    }

    #[test]
    fn noise_sample_std() {
        let n = 1_000_000;
        let y = vec![0.0; n];
        let z = add_noise(&y, 0.25, 2024).unwrap();
        let mean = z.iter().sum::<f64>() / n as f64;
        let std = (z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((0.2495..=0.2505).contains(&std), "{std}");
    }
}
