//! Simple (zero-mean) Kriging.
//!
//! Everything is held in the unit-amplitude form `K_l + lambda I` with
//! `lambda = sigma_n^2 / sigma_f^2`; `sigma_f^2` only re-enters when variances
//! are reported.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::designs::NormalStream;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::kernels::{cross_matrix, gram_matrix, kernel_vector, Kernel};

/// Jitter ladder, relative to the mean diagonal: 0, then 1e-12 .. 1e-6 by x10.
const JITTER_START: f64 = 1e-12;
const JITTER_STOP: f64 = 1e-6;

/// Cholesky factor of `matrix + jitter I`, escalating the jitter on failure.
pub(crate) fn factorize_with_jitter(matrix: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = matrix.clone().cholesky() {
        return Ok((c, 0.0));
    }
    let n = matrix.nrows();
    let scale = matrix.diagonal().iter().sum::<f64>() / n as f64;
    let mut rel = JITTER_START;
    let mut last = 0.0;
    while rel <= JITTER_STOP * (1.0 + 1e-9) {
        let jitter = rel * scale;
        last = jitter;
        if jitter > 0.0 {
            let mut m = matrix.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(c) = m.cholesky() {
                return Ok((c, jitter));
            }
        }
        rel *= 10.0;
    }
    Err(Error::IllConditioned { jitter: last })
}

/// Covariance `phi(x, x') = sigma_f^2 kappa(x, x') + sigma_n^2 delta_{xx'}`.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub kernel: Kernel,
    pub sigma_f: f64,
    pub sigma_n: f64,
}

impl CovarianceModel {
    pub fn new(kernel: Kernel, sigma_f: f64, sigma_n: f64) -> Result<Self> {
        if !(sigma_f >= 0.0 && sigma_f.is_finite()) || !(sigma_n >= 0.0 && sigma_n.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_f and sigma_n must be finite and non-negative, got {sigma_f}, {sigma_n}"
            )));
        }
        Ok(CovarianceModel {
            kernel,
            sigma_f,
            sigma_n,
        })
    }

    /// Inverse signal-to-noise ratio `sigma_n^2 / sigma_f^2`.
    pub fn lambda(&self) -> f64 {
        (self.sigma_n * self.sigma_n) / (self.sigma_f * self.sigma_f)
    }

    pub fn prior_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.sigma_f * self.sigma_f * self.kernel.eval(x, x)? + self.sigma_n * self.sigma_n)
    }

    /// Training covariance `sigma_f^2 K + sigma_n^2 I`.
    pub fn covariance_matrix(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut k = gram_matrix(&self.kernel, points)? * (self.sigma_f * self.sigma_f);
        for i in 0..points.len() {
            k[(i, i)] += self.sigma_n * self.sigma_n;
        }
        Ok(k)
    }
}

/// Observed sites and values.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TrainingSet {
    /// Points must share a dimension and be pairwise distinct (1e-12 in the max norm).
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("training set needs at least one point".into()));
        }
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::Config("points need at least one coordinate".into()));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite training point {p:?}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite training value".into()));
        }
        for i in 0..points.len() {
            for j in 0..i {
                let gap = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if gap <= 1e-12 {
                    return Err(Error::Domain(format!(
                        "training points {j} and {i} coincide: {:?}",
                        points[i]
                    )));
                }
            }
        }
        Ok(TrainingSet { points, values })
    }

    pub fn within(points: Vec<Vec<f64>>, values: Vec<f64>, domain: &Domain) -> Result<Self> {
        for p in &points {
            domain.check(p)?;
        }
        TrainingSet::new(points, values)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Sample standard deviation of the values (0 for a single value).
    pub fn value_std(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.values.iter().sum::<f64>() / n as f64;
        (self.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    /// Diameter of the bounding box of the sites.
    pub fn bounding_diameter(&self) -> f64 {
        (0..self.dim())
            .map(|k| {
                let (lo, hi) = self
                    .points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
                (hi - lo) * (hi - lo)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Posterior summary at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Standard normal quantile `z_p`.
pub fn standard_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level must be in (0,1), got {p}")));
    }
    Ok(Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p))
}

/// `mean +- z_{1-alpha/2} sqrt(variance)`.
pub fn confidence_interval(mean: f64, variance: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
    }
    let z = standard_normal_quantile(1.0 - alpha / 2.0)?;
    let half = z * variance.max(0.0).sqrt();
    Ok((mean - half, mean + half))
}

/// A factorized, trained Kriging model.
#[derive(Debug)]
pub struct TrainedGp {
    model: CovarianceModel,
    data: TrainingSet,
    gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    lambda: f64,
    jitter_used: f64,
    clamped: AtomicUsize,
}

impl TrainedGp {
    pub fn train(model: CovarianceModel, data: TrainingSet) -> Result<Self> {
        let gram = gram_matrix(&model.kernel, data.points())?;
        Self::train_with_gram(model, data, gram)
    }

    /// Training with a precomputed unit-amplitude Gram matrix `K_l`.
    pub(crate) fn train_with_gram(model: CovarianceModel, data: TrainingSet, gram: DMatrix<f64>) -> Result<Self> {
        if !(model.sigma_f > 0.0) {
            return Err(Error::Config(format!("sigma_f must be positive, got {}", model.sigma_f)));
        }
        let lambda = model.lambda();
        let mut system = gram.clone();
        for i in 0..data.len() {
            system[(i, i)] += lambda;
        }
        let (factor, jitter_used) = factorize_with_jitter(&system)?;
        let y = DVector::from_column_slice(data.values());
        let alpha = factor.solve(&y);
        Ok(TrainedGp {
            model,
            data,
            gram,
            factor,
            alpha,
            lambda,
            jitter_used,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn data(&self) -> &TrainingSet {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Coefficients `(K_l + lambda I)^{-1} y`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower-triangular factor of `K_l + lambda I + jitter I`.
    pub fn factor_l(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// Unit-amplitude Gram matrix `K_l` (no noise, no jitter).
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Number of negative variances clamped to zero so far.
    pub fn clamped_variance_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    fn clamp(&self, v: f64) -> f64 {
        if v < 0.0 {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            0.0
        } else {
            v
        }
    }

    /// `k_l(x)^T (K_l + lambda I)^{-1} y`.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(kernel_vector(&self.model.kernel, self.data.points(), x)?.dot(&self.alpha))
    }

    /// `sigma_f^2 [kappa(x,x) - k^T (K + lambda I)^{-1} k]`, plus `sigma_n^2` when asked.
    pub fn posterior_variance(&self, x: &[f64], include_noise: bool) -> Result<f64> {
        let k = kernel_vector(&self.model.kernel, self.data.points(), x)?;
        let v = self.factor.l().solve_lower_triangular(&k).expect("non-singular factor");
        let latent = self.model.kernel.eval(x, x)? - v.norm_squared();
        let sf2 = self.model.sigma_f * self.model.sigma_f;
        let noise = if include_noise {
            self.model.sigma_n * self.model.sigma_n
        } else {
            0.0
        };
        Ok(self.clamp(sf2 * latent) + noise)
    }

    pub fn predict(&self, x: &[f64], alpha: f64, include_noise: bool) -> Result<Prediction> {
        let mean = self.posterior_mean(x)?;
        let variance = self.posterior_variance(x, include_noise)?;
        let (lower, upper) = confidence_interval(mean, variance, alpha)?;
        Ok(Prediction {
            mean,
            variance,
            lower,
            upper,
        })
    }

    /// Posterior means and variances at many points.
    pub fn predict_many(&self, points: &[Vec<f64>], include_noise: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        let cross = cross_matrix(&self.model.kernel, points, self.data.points())?;
        let means = (&cross * &self.alpha).iter().copied().collect();
        let l = self.factor.l();
        let sf2 = self.model.sigma_f * self.model.sigma_f;
        let noise = if include_noise {
            self.model.sigma_n * self.model.sigma_n
        } else {
            0.0
        };
        let vars = points
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let k = cross.row(i).transpose();
                let v = l.solve_lower_triangular(&k).expect("non-singular factor");
                Ok(self.clamp(sf2 * (self.model.kernel.eval(x, x)? - v.norm_squared())) + noise)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((means, vars))
    }

    /// Smoothed data `(K_l + lambda I)^{-1} K_l y = K_l alpha`.
    pub fn smoothed_data(&self) -> DVector<f64> {
        &self.gram * &self.alpha
    }

    /// Noise-free power function of the training sites.
    pub fn power_function(&self) -> Result<PowerFunction> {
        if self.lambda == 0.0 {
            return Ok(PowerFunction {
                kernel: self.model.kernel.clone(),
                points: self.data.points().to_vec(),
                factor: self.factor.clone(),
                jitter_used: self.jitter_used,
            });
        }
        PowerFunction::new(&self.model.kernel, self.data.points())
    }

    /// Max over probes of `|k^T (K + lambda I)^{-1} y - k^T K^{-1} y_hat|`.
    pub fn smoothed_interpolant_identity_check(&self, probes: &[Vec<f64>]) -> Result<f64> {
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        let (k_factor, _) = factorize_with_jitter(&self.gram)?;
        let interp_coeffs = k_factor.solve(&self.smoothed_data());
        let cross = cross_matrix(&self.model.kernel, probes, self.data.points())?;
        let direct = &cross * &self.alpha;
        let smoothed = &cross * &interp_coeffs;
        Ok((direct - smoothed).amax())
    }
}

/// `P(x) = sqrt(kappa(x,x) - k(x)^T K^{-1} k(x))` for a fixed node set.
#[derive(Debug, Clone)]
pub struct PowerFunction {
    kernel: Kernel,
    points: Vec<Vec<f64>>,
    factor: Cholesky<f64, Dyn>,
    jitter_used: f64,
}

impl PowerFunction {
    pub fn new(kernel: &Kernel, points: &[Vec<f64>]) -> Result<Self> {
        let gram = gram_matrix(kernel, points)?;
        let (factor, jitter_used) = factorize_with_jitter(&gram)?;
        Ok(PowerFunction {
            kernel: kernel.clone(),
            points: points.to_vec(),
            factor,
            jitter_used,
        })
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// `P(x)^2`, clamped at 0.
    pub fn squared(&self, x: &[f64]) -> Result<f64> {
        let k = kernel_vector(&self.kernel, &self.points, x)?;
        let v = self.factor.l().solve_lower_triangular(&k).expect("non-singular factor");
        Ok((self.kernel.eval(x, x)? - v.norm_squared()).max(0.0))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.squared(x)?.sqrt())
    }
}

/// Power function of `kernel` on `points`, evaluated at `x`.
pub fn power_function(kernel: &Kernel, points: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    PowerFunction::new(kernel, points)?.eval(x)
}

/// `count x M` sample paths of the prior, or of the posterior when `condition_on` is given.
pub fn sample_paths(
    model: &CovarianceModel,
    grid: &[Vec<f64>],
    count: usize,
    seed: u64,
    condition_on: Option<&TrainingSet>,
) -> Result<DMatrix<f64>> {
    if count == 0 || grid.is_empty() {
        return Err(Error::Config("sample_paths needs count >= 1 and a non-empty grid".into()));
    }
    let m = grid.len();
    let (mean, cov) = match condition_on {
        None => {
            if model.sigma_f == 0.0 {
                return Ok(DMatrix::zeros(count, m));
            }
            let cov = gram_matrix(&model.kernel, grid)? * (model.sigma_f * model.sigma_f);
            (DVector::zeros(m), cov)
        }
        Some(data) => {
            let gp = TrainedGp::train(model.clone(), data.clone())?;
            let cross = cross_matrix(&model.kernel, grid, data.points())?;
            let mean = &cross * gp.alpha();
            let v = gp
                .factor
                .l()
                .solve_lower_triangular(&cross.transpose())
                .expect("non-singular factor");
            let prior = gram_matrix(&model.kernel, grid)?;
            let mut cov = (prior - v.transpose() * v) * (model.sigma_f * model.sigma_f);
            // Restore exact symmetry lost to round-off.
            let sym = (&cov + cov.transpose()) * 0.5;
            cov.copy_from(&sym);
            (mean, cov)
        }
    };
    let (factor, _) = factorize_with_jitter(&cov)?;
    let l = factor.l();
    let mut normals = NormalStream::new(seed);
    let mut paths = DMatrix::zeros(count, m);
    for r in 0..count {
        let z = DVector::from_iterator(m, (0..m).map(|_| normals.next_normal()));
        let path = &mean + &l * z;
        paths.row_mut(r).copy_from(&path.transpose());
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialFamily;
    use approx::assert_relative_eq;

    fn gaussian(l: f64) -> Kernel {
        Kernel::stationary(RadialFamily::Gaussian, l).unwrap()
    }

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn single_point_training() {
        let data = TrainingSet::new(pts(&[0.0]), vec![2.0]).unwrap();
        let gp = TrainedGp::train(CovarianceModel::new(gaussian(1.0), 1.0, 0.0).unwrap(), data).unwrap();
        assert_eq!(gp.alpha().as_slice(), &[2.0]);
        assert_relative_eq!(gp.posterior_mean(&[1.0]).unwrap(), 1.213_061_319_425_267, epsilon = 1e-12);
        assert_relative_eq!(
            gp.posterior_variance(&[1.0], false).unwrap(),
            0.632_120_558_828_557_7,
            epsilon = 1e-12
        );
        assert_relative_eq!(gp.power_function().unwrap().eval(&[1.0]).unwrap(), (1.0 - (-1.0f64).exp()).sqrt(), epsilon = 1e-15);
        assert_eq!(gp.power_function().unwrap().eval(&[0.0]).unwrap(), 0.0);
        assert_relative_eq!(gp.power_function().unwrap().eval(&[50.0]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_closed_form() {
        let c = (-0.5f64).exp();
        let data = TrainingSet::new(pts(&[0.0, 1.0]), vec![1.0, 0.0]).unwrap();
        let gp = TrainedGp::train(CovarianceModel::new(gaussian(1.0), 1.0, 0.0).unwrap(), data).unwrap();
        let scale = 1.0 / (1.0 - c * c);
        assert_relative_eq!(gp.alpha()[0], scale, epsilon = 1e-13);
        assert_relative_eq!(gp.alpha()[1], -c * scale, epsilon = 1e-13);
    }

    #[test]
    fn noise_shrinks_coefficients() {
        // lambda = 1: (K + I) alpha = y with K = [[1,c],[c,1]]
        let c = (-0.5f64).exp();
        let data = TrainingSet::new(pts(&[0.0, 1.0]), vec![1.0, 0.0]).unwrap();
        let gp = TrainedGp::train(CovarianceModel::new(gaussian(1.0), 1.0, 1.0).unwrap(), data).unwrap();
        let det = 4.0 - c * c;
        assert_relative_eq!(gp.alpha()[0], 2.0 / det, epsilon = 1e-14);
        assert_relative_eq!(gp.alpha()[1], -c / det, epsilon = 1e-14);
        let y_hat = gp.smoothed_data();
        // (K + I)^{-1} K y computed by hand
        let ky = [1.0, c];
        let expected0 = (2.0 * ky[0] - c * ky[1]) / det;
        let expected1 = (-c * ky[0] + 2.0 * ky[1]) / det;
        assert_relative_eq!(y_hat[0], expected0, epsilon = 1e-14);
        assert_relative_eq!(y_hat[1], expected1, epsilon = 1e-14);
    }

    #[test]
    fn zero_noise_smoothed_data_is_data() {
        let data = TrainingSet::new(pts(&[0.0, 0.3, 0.9]), vec![1.0, -2.0, 0.5]).unwrap();
        let gp = TrainedGp::train(CovarianceModel::new(gaussian(0.4), 1.0, 0.0).unwrap(), data).unwrap();
        for (a, b) in gp.smoothed_data().iter().zip([1.0, -2.0, 0.5]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(gp.smoothed_interpolant_identity_check(&pts(&[0.5])).unwrap(), 0.0);
    }

    #[test]
    fn heavy_noise_smooths_to_zero() {
        let data = TrainingSet::new(pts(&[0.0, 0.3, 0.9]), vec![1.0, -2.0, 0.5]).unwrap();
        let gp = TrainedGp::train(CovarianceModel::new(gaussian(0.4), 1.0, 1e4).unwrap(), data).unwrap();
        assert!(gp.smoothed_data().amax() < 1e-7);
    }

    #[test]
    fn far_field_variance() {
        let data = TrainingSet::new(pts(&[0.0, 0.1]), vec![1.0, 1.0]).unwrap();
        let gp = TrainedGp::train(CovarianceModel::new(gaussian(0.1), 3.0, 0.5).unwrap(), data).unwrap();
        assert_relative_eq!(gp.posterior_variance(&[100.0], false).unwrap(), 9.0, epsilon = 1e-12);
        assert_relative_eq!(gp.posterior_variance(&[100.0], true).unwrap(), 9.25, epsilon = 1e-12);
    }

    #[test]
    fn training_set_validation() {
        assert!(TrainingSet::new(vec![], vec![]).is_err());
        assert!(TrainingSet::new(pts(&[0.0, 0.0]), vec![1.0, 2.0]).is_err());
        assert!(TrainingSet::new(pts(&[0.0, 1e-13]), vec![1.0, 2.0]).is_err());
        assert!(TrainingSet::new(pts(&[0.0]), vec![1.0, 2.0]).is_err());
        assert!(TrainingSet::within(pts(&[2.0]), vec![1.0], &Domain::unit_cube(1)).is_err());
        let zero_f = CovarianceModel::new(gaussian(1.0), 0.0, 0.1).unwrap();
        let data = TrainingSet::new(pts(&[0.0]), vec![1.0]).unwrap();
        assert!(matches!(TrainedGp::train(zero_f, data), Err(Error::Config(_))));
    }

    #[test]
    fn quantiles_and_intervals() {
        assert_relative_eq!(standard_normal_quantile(0.975).unwrap(), 1.959_963_984_540_054, epsilon = 1e-9);
        assert_relative_eq!(standard_normal_quantile(1.0 - 0.3173 / 2.0).unwrap(), 1.0, epsilon = 1e-3);
        assert_eq!(confidence_interval(1.5, 0.0, 0.05).unwrap(), (1.5, 1.5));
        assert!(confidence_interval(0.0, 1.0, 1.0).is_err());
        assert!(confidence_interval(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ill_conditioned_reports_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match factorize_with_jitter(&m) {
            Err(Error::IllConditioned { jitter }) => assert_relative_eq!(jitter, 1e-6, epsilon = 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prior_paths_degenerate_and_deterministic() {
        let grid = pts(&[0.0, 0.5, 1.0]);
        let zero = CovarianceModel::new(gaussian(1.0), 0.0, 0.0).unwrap();
        assert_eq!(sample_paths(&zero, &grid, 1, 7, None).unwrap(), DMatrix::zeros(1, 3));
        let m = CovarianceModel::new(gaussian(0.3), 2.0, 0.0).unwrap();
        let a = sample_paths(&m, &grid, 4, 11, None).unwrap();
        let b = sample_paths(&m, &grid, 4, 11, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_paths(&m, &grid, 4, 12, None).unwrap());
    }

    #[test]
    fn posterior_paths_hit_data() {
        let data = TrainingSet::new(pts(&[0.0, 0.4, 0.8]), vec![1.0, -1.0, 0.5]).unwrap();
        let m = CovarianceModel::new(Kernel::stationary(RadialFamily::MaternC2, 0.3).unwrap(), 1.0, 0.0).unwrap();
        let grid = pts(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        let paths = sample_paths(&m, &grid, 5, 3, Some(&data)).unwrap();
        for r in 0..5 {
            assert!((paths[(r, 0)] - 1.0).abs() < 1e-4);
            assert!((paths[(r, 2)] + 1.0).abs() < 1e-4);
            assert!((paths[(r, 4)] - 0.5).abs() < 1e-4);
        }
    }
}
