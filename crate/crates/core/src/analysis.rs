//! Error metrics and numerical diagnostics for variably scaled kernels.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dims, Error, Result};
use crate::gp::{PowerFunction, TrainedGp};
use crate::kernels::{gram_matrix, kernel_vector, Kernel, PaciorekKernel, SigmaField, VskKernel};
use crate::scaling_maps::TargetFunction;

/// Residuals below this are treated as round-off and left out of order fits.
pub const ROUND_OFF_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    /// Mean of the posterior standard deviation.
    pub avg_std: f64,
    pub max_std: f64,
    pub avg_var: f64,
    pub max_var: f64,
    pub m: usize,
}

/// Metrics from precomputed predictions; `mae` is the maximum absolute error.
pub fn metrics_from(mean: &[f64], truth: &[f64], variance: &[f64]) -> Result<MetricsReport> {
    if mean.is_empty() {
        return Err(Error::Config("metrics need at least one evaluation point".into()));
    }
    if mean.len() != truth.len() || mean.len() != variance.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            got: truth.len().min(variance.len()),
        });
    }
    let m = mean.len() as f64;
    let mut sq = 0.0;
    let mut mae: f64 = 0.0;
    for (p, t) in mean.iter().zip(truth) {
        let e = p - t;
        sq += e * e;
        mae = mae.max(e.abs());
    }
    let stds: Vec<f64> = variance.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(MetricsReport {
        rmse: (sq / m).sqrt(),
        mae,
        avg_std: stds.iter().sum::<f64>() / m,
        max_std: stds.iter().copied().fold(0.0, f64::max),
        avg_var: variance.iter().sum::<f64>() / m,
        max_var: variance.iter().copied().fold(0.0, f64::max),
        m: mean.len(),
    })
}

pub fn compute_metrics(
    gp: &TrainedGp,
    target: &TargetFunction,
    eval_points: &[Vec<f64>],
    include_noise: bool,
) -> Result<MetricsReport> {
    if eval_points.is_empty() {
        return Err(Error::Config("metrics need at least one evaluation point".into()));
    }
    let truth = eval_points.iter().map(|x| target.eval(x)).collect::<Result<Vec<_>>>()?;
    let (mean, var) = gp.predict_many(eval_points, include_noise)?;
    metrics_from(&mean, &truth, &var)
}

/// Log-log convergence study: residuals `e_j` at steps `h_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`; `None` when fewer than
    /// four residuals lie above the round-off floor.
    pub order: Option<f64>,
}

impl OrderEstimate {
    pub fn new(steps: Vec<f64>, residuals: Vec<f64>) -> Result<Self> {
        if steps.len() != residuals.len() {
            return Err(Error::DimensionMismatch {
                expected: steps.len(),
                got: residuals.len(),
            });
        }
        if steps.iter().any(|h| !(*h > 0.0)) || steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("step sizes must be positive and strictly decreasing".into()));
        }
        let pts: Vec<(f64, f64)> = steps
            .iter()
            .zip(&residuals)
            .filter(|(_, e)| **e >= ROUND_OFF_FLOOR)
            .map(|(h, e)| (h.ln(), e.ln()))
            .collect();
        let order = (pts.len() >= 4).then(|| {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
            sxy / sxx
        });
        Ok(OrderEstimate {
            steps,
            residuals,
            order,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// True when the last `k` residuals are strictly decreasing.
    pub fn decreasing_tail(&self, k: usize) -> bool {
        let n = self.residuals.len();
        n >= k && self.residuals[n - k..].windows(2).all(|w| w[1] < w[0])
    }
}

/// `2^{-j}` for `j` in `from..=to`.
pub fn dyadic_steps(from: u32, to: u32) -> Vec<f64> {
    (from..=to).map(|j| 0.5f64.powi(j as i32)).collect()
}

fn scalar_map(vsk: &VskKernel) -> Result<()> {
    if vsk.scaling.output_dim() != 1 {
        return Err(Error::Unsupported(format!(
            "local diagnostics need a scalar scaling map, got {} outputs",
            vsk.scaling.output_dim()
        )));
    }
    Ok(())
}

fn offset(x: &[f64], direction: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(direction).map(|(a, d)| a + h * d).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn order_study<F>(steps: &[f64], residual: F) -> Result<OrderEstimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let residuals = steps.par_iter().map(|&h| residual(h)).collect::<Result<Vec<_>>>()?;
    OrderEstimate::new(steps.to_vec(), residuals)
}

/// `|d_Psi(x, x+h)^2 - h^T Mbar h|` along `h = s * direction`.
pub fn local_metric_residual(vsk: &VskKernel, x: &[f64], direction: &[f64], steps: &[f64]) -> Result<OrderEstimate> {
    scalar_map(vsk)?;
    check_dims(x, direction)?;
    let g = vsk.scaling.gradient_vector(x)?;
    let psi_x = vsk.scaling.eval(x)?[0];
    order_study(steps, |s| {
        let y = offset(x, direction, s);
        let h: Vec<f64> = direction.iter().map(|d| s * d).collect();
        let gy = vsk.scaling.gradient_vector(&y)?;
        let dpsi = vsk.scaling.eval(&y)?[0] - psi_x;
        // |h|^2 appears on both sides and cancels exactly.
        let quad = 0.5 * (dot(&g, &h).powi(2) + dot(&gy, &h).powi(2));
        Ok((dpsi * dpsi - quad).abs())
    })
}

/// `|kappa^Psi(x, x+h) - phi(|h| / l~)|` with the root-mean-square pairing of
/// `l^Psi(x) = l / sqrt(1 + psi'(x)^2)`. One-dimensional inputs only.
pub fn gibbs_equivalence_residual(vsk: &VskKernel, x: f64, steps: &[f64]) -> Result<OrderEstimate> {
    scalar_map(vsk)?;
    let l = vsk.base.length_scale;
    let local = |p: f64| -> Result<f64> {
        let g = vsk.scaling.gradient_vector(&[p])?[0];
        Ok(l / (1.0 + g * g).sqrt())
    };
    let lx = local(x)?;
    order_study(steps, |h| {
        let y = x + h;
        let ly = local(y)?;
        let l_tilde = (0.5 * (lx * lx + ly * ly)).sqrt();
        let approx = vsk.base.family.profile(h.abs() / l_tilde);
        Ok((vsk.eval(&[x], &[y])? - approx).abs())
    })
}

/// `|Q_PS(x, x+h) - h^T Mbar h / l^2|` with the VSK-induced matrix field.
pub fn paciorek_equivalence_residual(
    vsk: &VskKernel,
    x: &[f64],
    direction: &[f64],
    steps: &[f64],
) -> Result<OrderEstimate> {
    scalar_map(vsk)?;
    check_dims(x, direction)?;
    let l = vsk.base.length_scale;
    let ps = PaciorekKernel::new(
        vsk.base.family,
        SigmaField::VskInduced {
            length_scale: l,
            scaling: vsk.scaling.clone(),
        },
    )?;
    let g = vsk.scaling.gradient_vector(x)?;
    order_study(steps, |s| {
        let y = offset(x, direction, s);
        let h: Vec<f64> = direction.iter().map(|d| s * d).collect();
        let gy = vsk.scaling.gradient_vector(&y)?;
        let mbar = dot(&h, &h) + 0.5 * (dot(&g, &h).powi(2) + dot(&gy, &h).powi(2));
        let q = ps.terms(x, &y)?.quadratic_form;
        Ok((q - mbar / (l * l)).abs())
    })
}

/// Cross-jump attenuation `kappa^Psi(a, b) / kappa(a, b)`.
pub fn decoupling_ratio(vsk: &VskKernel, x_left: &[f64], x_right: &[f64]) -> Result<f64> {
    let base = vsk.base.eval(x_left, x_right)?;
    if base == 0.0 {
        return Ok(0.0);
    }
    Ok(vsk.eval(x_left, x_right)? / base)
}

/// `kappa(., center)` on a grid.
pub fn basis_function_profile(kernel: &Kernel, center: &[f64], grid: &[Vec<f64>]) -> Result<Vec<f64>> {
    grid.par_iter().map(|x| kernel.eval(x, center)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBoundRow {
    pub probe: Vec<f64>,
    pub power_sq: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_slack: f64,
    pub upper_slack: f64,
    /// `|k^Psi(x)| <= |k(x)|` at this probe.
    pub norm_hypothesis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBoundsReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_min_vsk: f64,
    pub lambda_max_vsk: f64,
    /// Eigenvalue and kernel-vector comparisons all verified.
    pub hypotheses_met: bool,
    pub min_lower_slack: f64,
    pub min_upper_slack: f64,
    pub rows: Vec<PowerBoundRow>,
}

impl PowerBoundsReport {
    /// Both inequalities hold to within `tol` at every probe.
    pub fn holds(&self, tol: f64) -> bool {
        self.min_lower_slack >= -tol && self.min_upper_slack >= -tol
    }
}

fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

const HYPOTHESIS_TOL: f64 = 1e-12;

/// Sandwich of the VSK power function between spectral bounds built from the
/// stationary Gram matrix:
/// `kappa - |k|^2 / lmin(K) <= P^2_Psi <= kappa - |k^Psi|^2 / lmax(K)`.
/// Hypothesis failures are reported in the result, not as errors.
pub fn power_bounds_check(
    kernel: &Kernel,
    vsk_kernel: &Kernel,
    points: &[Vec<f64>],
    probes: &[Vec<f64>],
) -> Result<PowerBoundsReport> {
    if points.is_empty() || probes.is_empty() {
        return Err(Error::Config("power bound check needs nodes and probes".into()));
    }
    let (lambda_min, lambda_max) = extreme_eigenvalues(&gram_matrix(kernel, points)?);
    let (lambda_min_vsk, lambda_max_vsk) = extreme_eigenvalues(&gram_matrix(vsk_kernel, points)?);
    let power = PowerFunction::new(vsk_kernel, points)?;

    let rows = probes
        .par_iter()
        .map(|x| {
            let k = kernel_vector(kernel, points, x)?;
            let kp = kernel_vector(vsk_kernel, points, x)?;
            let kxx = vsk_kernel.eval(x, x)?;
            let power_sq = power.squared(x)?;
            let lower = kxx - k.norm_squared() / lambda_min;
            let upper = kxx - kp.norm_squared() / lambda_max;
            Ok(PowerBoundRow {
                probe: x.clone(),
                power_sq,
                lower,
                upper,
                lower_slack: power_sq - lower,
                upper_slack: upper - power_sq,
                norm_hypothesis: kp.norm() <= k.norm() * (1.0 + HYPOTHESIS_TOL),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let spectral = lambda_min_vsk >= lambda_min - HYPOTHESIS_TOL && lambda_max_vsk <= lambda_max + HYPOTHESIS_TOL;
    Ok(PowerBoundsReport {
        lambda_min,
        lambda_max,
        lambda_min_vsk,
        lambda_max_vsk,
        hypotheses_met: spectral && rows.iter().all(|r| r.norm_hypothesis),
        min_lower_slack: rows.iter().map(|r| r.lower_slack).fold(f64::INFINITY, f64::min),
        min_upper_slack: rows.iter().map(|r| r.upper_slack).fold(f64::INFINITY, f64::min),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{RadialFamily, StationaryKernel};
    use crate::scaling_maps::{CustomMap, ScalingMap};
    use approx::assert_relative_eq;

    fn vsk(family: RadialFamily, l: f64, map: ScalingMap) -> VskKernel {
        VskKernel::new(StationaryKernel::new(family, l).unwrap(), map)
    }

    fn affine() -> ScalingMap {
        ScalingMap::Custom(CustomMap::new("affine", |x: &[f64]| 0.7 * x[0] + 0.3).with_gradient(|_: &[f64]| vec![0.7]))
    }

    fn sine() -> ScalingMap {
        "sin".parse::<crate::scaling_maps::PsiSpec>()
            .unwrap()
            .resolve(TargetFunction::Jump)
    }

    #[test]
    fn metrics_trivial_cases() {
        let r = metrics_from(&[0.0; 4], &[2.0; 4], &[0.0; 4]).unwrap();
        assert_eq!((r.rmse, r.mae), (2.0, 2.0));
        let r = metrics_from(&[1.0, 2.0], &[1.0, 2.0], &[4.0, 1.0]).unwrap();
        assert_eq!((r.rmse, r.mae, r.avg_std, r.max_std, r.max_var), (0.0, 0.0, 1.5, 2.0, 4.0));
        assert!(metrics_from(&[], &[], &[]).is_err());
    }

    #[test]
    fn order_estimate_fits_slope() {
        let steps = dyadic_steps(3, 10);
        let res: Vec<f64> = steps.iter().map(|h| 5.0 * h.powi(3)).collect();
        let o = OrderEstimate::new(steps.clone(), res).unwrap();
        assert_relative_eq!(o.order.unwrap(), 3.0, epsilon = 1e-12);
        assert!(o.decreasing_tail(5));
        let zeros = OrderEstimate::new(steps, vec![0.0; 8]).unwrap();
        assert_eq!(zeros.order, None);
        assert!(OrderEstimate::new(vec![0.1, 0.2], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn affine_and_zero_maps_are_exact() {
        let steps = dyadic_steps(3, 12);
        for map in [affine(), ScalingMap::zero()] {
            let k = vsk(RadialFamily::Gaussian, 0.8, map);
            assert!(local_metric_residual(&k, &[0.3], &[1.0], &steps).unwrap().max_residual() < 1e-15);
            assert!(paciorek_equivalence_residual(&k, &[0.3], &[1.0], &steps).unwrap().max_residual() < 1e-13);
            assert!(gibbs_equivalence_residual(&k, 0.3, &steps).unwrap().max_residual() < 1e-15);
        }
    }

    #[test]
    fn sine_local_metric_order() {
        let k = vsk(RadialFamily::Gaussian, 1.0, sine());
        let o = local_metric_residual(&k, &[0.3], &[1.0], &dyadic_steps(3, 12)).unwrap();
        assert!(o.order.unwrap() >= 2.5, "{:?}", o);
    }

    #[test]
    fn decoupling_closed_form() {
        let jump = ScalingMap::jump(0.5);
        let k = vsk(RadialFamily::Gaussian, 1.0, jump.clone());
        assert_relative_eq!(decoupling_ratio(&k, &[0.4], &[0.6]).unwrap(), (-0.5f64).exp(), epsilon = 1e-14);
        assert_eq!(decoupling_ratio(&k, &[0.1], &[0.3]).unwrap(), 1.0);
        let narrow = vsk(RadialFamily::Gaussian, 0.1, jump);
        assert!(decoupling_ratio(&narrow, &[0.45], &[0.55]).unwrap() < 1e-21);
    }

    #[test]
    fn single_node_bounds_are_equalities() {
        let s = Kernel::stationary(RadialFamily::Gaussian, 1.0).unwrap();
        let r = power_bounds_check(&s, &s, &[vec![0.2]], &[vec![0.7], vec![0.0]]).unwrap();
        assert!(r.hypotheses_met);
        for row in &r.rows {
            assert_relative_eq!(row.lower, row.power_sq, epsilon = 1e-15);
            assert_relative_eq!(row.upper, row.power_sq, epsilon = 1e-15);
        }
    }

    #[test]
    fn basis_profile_center_is_one() {
        let k: Kernel = vsk(RadialFamily::Gaussian, 0.5, ScalingMap::TargetMimic(TargetFunction::ExpCos)).into();
        let p = basis_function_profile(&k, &[0.0], &[vec![-0.2], vec![0.0], vec![0.2]]).unwrap();
        assert_eq!(p[1], 1.0);
        assert!((p[0] - p[2]).abs() > 1e-3);
    }
}
