//! Hyperparameter estimation by minimizing the negative log marginal
//! likelihood over `(l, sigma_f, sigma_n)` in log space.
//!
//! The optimizer is a box-projected Nelder–Mead simplex restarted from a
//! Cranley–Patterson-rotated Halton set over the bounds. Restarts run in
//! parallel; the winner is chosen by a deterministic reduction on
//! `(nlml, parameters)` so scheduling never changes the result.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::designs::{radical_inverse, NormalStream};
use crate::error::{Error, Result};
use crate::gp::{CovarianceModel, TrainedGp, TrainingSet};
use crate::kernels::{distance_matrix, gram_matrix, Kernel, RadialFamily};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ParamBound {
    Free { lower: f64, upper: f64 },
    Fixed(f64),
}

impl ParamBound {
    fn validate(&self, name: &str, allow_zero: bool) -> Result<()> {
        match *self {
            ParamBound::Free { lower, upper } => {
                if !(lower > 0.0 && upper.is_finite() && lower < upper) {
                    return Err(Error::Config(format!(
                        "{name} bounds must satisfy 0 < lower < upper, got [{lower}, {upper}]"
                    )));
                }
            }
            ParamBound::Fixed(v) => {
                let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
                if !ok {
                    return Err(Error::Config(format!("invalid fixed {name} = {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Search box for `(l, sigma_f, sigma_n)`; fixed entries are not optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperBounds {
    pub length_scale: ParamBound,
    pub sigma_f: ParamBound,
    pub sigma_n: ParamBound,
}

impl HyperBounds {
    /// `l in [1e-3, 10] diam`, `sigma_f in [1e-3, 1e3] std(y)`, `sigma_n in [1e-6, 1] std(y)`.
    pub fn default_for(data: &TrainingSet, diameter: f64) -> Self {
        let s = data.value_std();
        let s = if s > 0.0 { s } else { 1.0 };
        let d = if diameter > 0.0 { diameter } else { 1.0 };
        HyperBounds {
            length_scale: ParamBound::Free {
                lower: 1e-3 * d,
                upper: 10.0 * d,
            },
            sigma_f: ParamBound::Free {
                lower: 1e-3 * s,
                upper: 1e3 * s,
            },
            sigma_n: ParamBound::Free {
                lower: 1e-6 * s,
                upper: s,
            },
        }
    }

    pub fn all_fixed(length_scale: f64, sigma_f: f64, sigma_n: f64) -> Self {
        HyperBounds {
            length_scale: ParamBound::Fixed(length_scale),
            sigma_f: ParamBound::Fixed(sigma_f),
            sigma_n: ParamBound::Fixed(sigma_n),
        }
    }

    /// Fixes one parameter by name: `length_scale`/`l`/`ell`, `sigma_f`, `sigma_n`.
    pub fn fix(mut self, name: &str, value: f64) -> Result<Self> {
        let slot = match name.trim() {
            "length_scale" | "lengthscale" | "l" | "ell" => &mut self.length_scale,
            "sigma_f" => &mut self.sigma_f,
            "sigma_n" => &mut self.sigma_n,
            other => return Err(Error::Config(format!("unknown hyperparameter '{other}'"))),
        };
        *slot = ParamBound::Fixed(value);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.length_scale.validate("length_scale", false)?;
        self.sigma_f.validate("sigma_f", false)?;
        self.sigma_n.validate("sigma_n", true)
    }

    fn slots(&self) -> [ParamBound; 3] {
        [self.length_scale, self.sigma_f, self.sigma_n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub length_scale: f64,
    pub sigma_f: f64,
    pub sigma_n: f64,
    pub nlml: f64,
    pub starts_tried: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn model(&self, template: &Kernel) -> Result<CovarianceModel> {
        CovarianceModel::new(template.with_length_scale(self.length_scale)?, self.sigma_f, self.sigma_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Simplex diameter (log space) below which a start has converged.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: 8,
            seed: 0,
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

fn nlml_from_gp(gp: &TrainedGp) -> f64 {
    let n = gp.data().len() as f64;
    let sf2 = gp.model().sigma_f * gp.model().sigma_f;
    let y = DVector::from_column_slice(gp.data().values());
    let quad = y.dot(gp.alpha()) / sf2;
    let l = gp.factor_l();
    let log_det = n * sf2.ln() + 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    0.5 * quad + 0.5 * log_det + 0.5 * n * (2.0 * PI).ln()
}

/// `1/2 y^T Sigma^{-1} y + 1/2 log det Sigma + N/2 log 2 pi` with
/// `Sigma = sigma_f^2 K + sigma_n^2 I`.
pub fn nlml(model: &CovarianceModel, data: &TrainingSet) -> Result<f64> {
    let gp = TrainedGp::train(model.clone(), data.clone())?;
    Ok(nlml_from_gp(&gp))
}

/// Evaluates the objective for one hyperparameter triple, reusing the
/// lifted-distance matrix for radial kernels.
struct Objective<'a> {
    template: &'a Kernel,
    data: &'a TrainingSet,
    distances: Option<(RadialFamily, DMatrix<f64>)>,
}

impl<'a> Objective<'a> {
    fn new(template: &'a Kernel, data: &'a TrainingSet) -> Result<Self> {
        let distances = match (template.family(), distance_matrix(template, data.points())) {
            (Some(f), Some(d)) => Some((f, d?)),
            _ => None,
        };
        Ok(Objective {
            template,
            data,
            distances,
        })
    }

    fn eval(&self, l: f64, sigma_f: f64, sigma_n: f64) -> Result<f64> {
        let kernel = self.template.with_length_scale(l)?;
        let gram = match &self.distances {
            Some((family, d)) => d.map(|r| family.profile(r / l)),
            None => gram_matrix(&kernel, self.data.points())?,
        };
        let model = CovarianceModel::new(kernel, sigma_f, sigma_n)?;
        let gp = TrainedGp::train_with_gram(model, self.data.clone(), gram)?;
        Ok(nlml_from_gp(&gp))
    }
}

struct Layout {
    slots: [ParamBound; 3],
    free: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Layout {
    fn new(bounds: &HyperBounds) -> Self {
        let slots = bounds.slots();
        let mut free = Vec::new();
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        for (i, s) in slots.iter().enumerate() {
            if let ParamBound::Free { lower: lo, upper: hi } = *s {
                free.push(i);
                lower.push(lo.ln());
                upper.push(hi.ln());
            }
        }
        Layout {
            slots,
            free,
            lower,
            upper,
        }
    }

    fn params(&self, z: &[f64]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (i, s) in self.slots.iter().enumerate() {
            if let ParamBound::Fixed(v) = s {
                p[i] = *v;
            }
        }
        for (k, &i) in self.free.iter().enumerate() {
            p[i] = z[k].exp();
        }
        p
    }

    fn project(&self, z: &mut [f64]) {
        for (k, v) in z.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }
}

#[derive(Debug, Clone)]
struct StartOutcome {
    z: Vec<f64>,
    value: f64,
    converged: bool,
}

fn total(a: f64) -> f64 {
    if a.is_nan() {
        f64::INFINITY
    } else {
        a
    }
}

fn nelder_mead<F>(f: &F, layout: &Layout, start: Vec<f64>, opts: &FitOptions) -> StartOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for k in 0..n {
        let mut v = start.clone();
        let step = 0.1 * (layout.upper[k] - layout.lower[k]);
        v[k] = if v[k] + step <= layout.upper[k] { v[k] + step } else { v[k] - step };
        layout.project(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| total(f(v))).collect();
    let mut converged = false;

    for _ in 0..opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < opts.tolerance {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            layout.project(&mut p);
            p
        };

        let reflected = along(-1.0);
        let fr = total(f(&reflected));
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = total(f(&expanded));
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5);
                let v = total(f(&c));
                (c, v)
            } else {
                let c = along(0.5);
                let v = total(f(&c));
                (c, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let mut p: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    layout.project(&mut p);
                    values[i] = total(f(&p));
                    simplex[i] = p;
                }
            }
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal))
        .expect("non-empty simplex");
    StartOutcome {
        z: simplex[best].clone(),
        value: values[best],
        converged,
    }
}

/// Start points: Halton set over the free box, rotated by a seeded shift.
fn start_points(layout: &Layout, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let dims = layout.free.len();
    let mut stream = NormalStream::new(seed);
    let shift: Vec<f64> = (0..dims).map(|_| stream.next_uniform()).collect();
    const BASES: [u64; 3] = [2, 3, 5];
    (1..=starts as u64)
        .map(|i| {
            (0..dims)
                .map(|k| {
                    let u = (radical_inverse(i, BASES[k]) + shift[k]).fract();
                    layout.lower[k] + u * (layout.upper[k] - layout.lower[k])
                })
                .collect()
        })
        .collect()
}

/// Multi-start bounded simplex fit; `template` supplies the kernel whose
/// length scale is optimized.
pub fn fit(template: &Kernel, data: &TrainingSet, bounds: &HyperBounds, starts: usize, seed: u64) -> Result<FitResult> {
    fit_with(
        template,
        data,
        bounds,
        &FitOptions {
            starts,
            seed,
            ..FitOptions::default()
        },
    )
}

pub fn fit_with(template: &Kernel, data: &TrainingSet, bounds: &HyperBounds, opts: &FitOptions) -> Result<FitResult> {
    bounds.validate()?;
    if opts.starts == 0 {
        return Err(Error::Config("fit needs at least one start".into()));
    }
    let objective = Objective::new(template, data)?;
    let layout = Layout::new(bounds);

    if layout.free.is_empty() {
        let [l, sf, sn] = layout.params(&[]);
        let value = objective.eval(l, sf, sn)?;
        return Ok(FitResult {
            length_scale: l,
            sigma_f: sf,
            sigma_n: sn,
            nlml: value,
            starts_tried: 0,
            converged: true,
        });
    }
    if matches!(bounds.length_scale, ParamBound::Free { .. }) && template.length_scale().is_none() {
        return Err(Error::Unsupported("kernel has no length scale to fit".into()));
    }

    let f = |z: &[f64]| {
        let [l, sf, sn] = layout.params(z);
        objective.eval(l, sf, sn).unwrap_or(f64::INFINITY)
    };
    let outcomes: Vec<StartOutcome> = start_points(&layout, opts.starts, opts.seed)
        .into_par_iter()
        .map(|z0| nelder_mead(&f, &layout, z0, opts))
        .collect();

    let best = outcomes
        .iter()
        .filter(|o| o.value.is_finite())
        .min_by(|a, b| {
            a.value
                .partial_cmp(&b.value)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.z.partial_cmp(&b.z).unwrap_or(Ordering::Equal))
        })
        .ok_or_else(|| Error::Fit(format!("all {} starts failed to factorize", opts.starts)))?;
    let [l, sf, sn] = layout.params(&best.z);
    Ok(FitResult {
        length_scale: l,
        sigma_f: sf,
        sigma_n: sn,
        nlml: best.value,
        starts_tried: opts.starts,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian() -> Kernel {
        Kernel::stationary(RadialFamily::Gaussian, 1.0).unwrap()
    }

    #[test]
    fn scalar_nlml() {
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let one = TrainingSet::new(vec![vec![0.0]], vec![0.0]).unwrap();
        let m = CovarianceModel::new(gaussian(), 1.3, 0.4).unwrap();
        assert_relative_eq!(
            nlml(&m, &one).unwrap(),
            0.5 * (1.69f64 + 0.16).ln() + half_log_2pi,
            epsilon = 1e-14
        );
        let unit = TrainingSet::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let m = CovarianceModel::new(gaussian(), 1.0, 0.0).unwrap();
        assert_relative_eq!(nlml(&m, &unit).unwrap(), 1.418_938_533_204_672_7, epsilon = 1e-13);
    }

    #[test]
    fn doubling_data_scales_quadratic_term() {
        let pts = vec![vec![0.0], vec![0.4], vec![0.9]];
        let y = vec![0.3, -1.0, 0.8];
        let m = CovarianceModel::new(gaussian().with_length_scale(0.5).unwrap(), 1.2, 0.3).unwrap();
        let base = nlml(&m, &TrainingSet::new(pts.clone(), y.clone()).unwrap()).unwrap();
        let doubled = nlml(&m, &TrainingSet::new(pts.clone(), y.iter().map(|v| 2.0 * v).collect()).unwrap()).unwrap();
        let zero = nlml(&m, &TrainingSet::new(pts, vec![0.0; 3]).unwrap()).unwrap();
        let quad = base - zero;
        assert_relative_eq!(doubled - base, 3.0 * quad, epsilon = 1e-12);
    }

    #[test]
    fn fully_fixed_returns_triple() {
        let data = TrainingSet::new(vec![vec![0.0], vec![0.5]], vec![1.0, 2.0]).unwrap();
        let b = HyperBounds::all_fixed(0.3, 2.0, 0.1);
        let r = fit(&gaussian(), &data, &b, 4, 1).unwrap();
        assert_eq!((r.length_scale, r.sigma_f, r.sigma_n, r.starts_tried), (0.3, 2.0, 0.1, 0));
        let direct = nlml(
            &CovarianceModel::new(gaussian().with_length_scale(0.3).unwrap(), 2.0, 0.1).unwrap(),
            &data,
        )
        .unwrap();
        assert_relative_eq!(r.nlml, direct, epsilon = 1e-14);
    }

    #[test]
    fn single_point_sigma_f_matches_scan() {
        // With one observation and sigma_n = 0 the optimum is sigma_f = |y|.
        let data = TrainingSet::new(vec![vec![0.2]], vec![1.7]).unwrap();
        let b = HyperBounds {
            length_scale: ParamBound::Fixed(1.0),
            sigma_f: ParamBound::Free { lower: 1e-2, upper: 1e2 },
            sigma_n: ParamBound::Fixed(0.0),
        };
        let r = fit(&gaussian(), &data, &b, 3, 9).unwrap();
        let scan = (0..=200_000)
            .map(|i| {
                let s = 1e-2 * 10f64.powf(4.0 * i as f64 / 200_000.0);
                0.5 * 1.7f64.powi(2) / (s * s) + s.ln() + 0.5 * (2.0 * PI).ln()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(r.nlml <= scan + 1e-6, "{} vs {}", r.nlml, scan);
        assert!((r.nlml - scan).abs() < 1e-6);
    }

    #[test]
    fn bound_validation() {
        let data = TrainingSet::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let mut b = HyperBounds::default_for(&data, 1.0);
        b.sigma_f = ParamBound::Free { lower: 2.0, upper: 1.0 };
        assert!(fit(&gaussian(), &data, &b, 2, 0).is_err());
        assert!(HyperBounds::default_for(&data, 1.0).fix("tau", 1.0).is_err());
        assert!(fit(&gaussian(), &data, &HyperBounds::default_for(&data, 1.0), 0, 0).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let data = TrainingSet::new(xs, y).unwrap();
        let b = HyperBounds::default_for(&data, 1.0);
        let a = fit(&gaussian(), &data, &b, 4, 3).unwrap();
        let c = fit(&gaussian(), &data, &b, 4, 3).unwrap();
        assert_eq!(a, c);
        assert!(a.nlml.is_finite());
    }
}
