//! Scaling functions `psi: Omega -> R^q` used to lift inputs for variably
//! scaled kernels, and the analytic test targets they are designed to mimic.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::domain::Domain;
use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The four benchmark targets used by the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TargetFunction {
    /// Oscillating function on `[0,1]` with a jump of height 3 at `x = 0.5`.
    Jump,
    /// Truncated two-dimensional Weierstrass sum on `[0,1]^2`.
    Weierstrass { a: f64, b: f64, terms: usize },
    /// Gaussian bump on `[0,1]` with a corner at `x = 0.5`.
    Corner,
    /// `exp(x) - cos(2 pi x)` on `[-1,1]`.
    ExpCos,
}

impl TargetFunction {
    pub const JUMP_LOCATION: f64 = 0.5;
    pub const CORNER_LOCATION: f64 = 0.5;

    pub fn weierstrass_default() -> Self {
        TargetFunction::Weierstrass {
            a: 0.5,
            b: 3.0,
            terms: 12,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            TargetFunction::Jump | TargetFunction::Corner => Domain::unit_cube(1),
            TargetFunction::Weierstrass { .. } => Domain::unit_cube(2),
            TargetFunction::ExpCos => Domain::interval(-1.0, 1.0).expect("valid interval"),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.domain().check(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match *self {
            TargetFunction::Jump => {
                let t = x[0];
                let smooth = (14.0 * PI * (t + 0.5)).cos() / (2.0 * t + 0.5) + (t - 0.5).powi(4);
                // Right branch owns the jump location.
                if t < Self::JUMP_LOCATION {
                    smooth + 3.0
                } else {
                    smooth
                }
            }
            TargetFunction::Weierstrass { a, b, terms } => weierstrass_sum(a, b, terms, x),
            TargetFunction::Corner => {
                let u = corner_argument(x[0]);
                (-0.5 * u * u).exp()
            }
            TargetFunction::ExpCos => x[0].exp() - (2.0 * PI * x[0]).cos(),
        }
    }

    /// Analytic gradient, `None` at points where the target is not differentiable.
    pub fn gradient(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        self.domain().check(x)?;
        let g = match *self {
            TargetFunction::Jump => {
                let t = x[0];
                if t == Self::JUMP_LOCATION {
                    None
                } else {
                    let w = 14.0 * PI;
                    let den = 2.0 * t + 0.5;
                    let c = (w * (t + 0.5)).cos();
                    let s = (w * (t + 0.5)).sin();
                    Some(vec![-w * s / den - 2.0 * c / (den * den) + 4.0 * (t - 0.5).powi(3)])
                }
            }
            TargetFunction::Weierstrass { a, b, terms } => Some(weierstrass_gradient(a, b, terms, x)),
            TargetFunction::Corner => {
                if x[0] == Self::CORNER_LOCATION {
                    None
                } else {
                    let u = corner_argument(x[0]);
                    Some(vec![-10.0 * u * (-0.5 * u * u).exp()])
                }
            }
            TargetFunction::ExpCos => Some(vec![x[0].exp() + 2.0 * PI * (2.0 * PI * x[0]).sin()]),
        };
        Ok(g)
    }
}

fn corner_argument(t: f64) -> f64 {
    if t >= TargetFunction::CORNER_LOCATION {
        5.0 * (2.0 * t - 1.0) - 0.5
    } else {
        5.0 * (2.0 * t - 1.0) + 0.5
    }
}

fn weierstrass_sum(a: f64, b: f64, terms: usize, x: &[f64]) -> f64 {
    let mut amp = 1.0;
    let mut freq = PI;
    let mut sum = 0.0;
    for _ in 0..=terms {
        sum += amp * (freq * x[0]).cos() * (freq * x[1]).cos();
        amp *= a;
        freq *= b;
    }
    sum
}

fn weierstrass_gradient(a: f64, b: f64, terms: usize, x: &[f64]) -> Vec<f64> {
    let mut amp = 1.0;
    let mut freq = PI;
    let mut g = vec![0.0; 2];
    for _ in 0..=terms {
        let (s1, c1) = (freq * x[0]).sin_cos();
        let (s2, c2) = (freq * x[1]).sin_cos();
        g[0] -= amp * freq * s1 * c2;
        g[1] -= amp * freq * c1 * s2;
        amp *= a;
        freq *= b;
    }
    g
}

/// A user-supplied scalar map with an optional analytic gradient.
#[derive(Clone)]
pub struct CustomMap {
    name: String,
    f: ScalarFn,
    grad: Option<GradientFn>,
}

impl CustomMap {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        CustomMap {
            name: name.into(),
            f: Arc::new(f),
            grad: None,
        }
    }

    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMap")
            .field("name", &self.name)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

/// Scaling function `psi` appended to the inputs as `Psi(x) = (x, psi(x))`.
#[derive(Debug, Clone)]
pub enum ScalingMap {
    /// `psi = 0` in `R^dim`; collapses a VSK onto its stationary base.
    Zero { dim: usize },
    /// `1` when every coordinate is at or above its threshold, else `0`.
    Jump { threshold: Vec<f64> },
    /// Compactly supported cubic bump, 1 at `center`, 0 outside `radius`.
    CornerBump { center: f64, radius: f64 },
    /// `sum_{k=0}^{terms} a^k cos(pi b^k x1) cos(pi b^k x2)`.
    WeierstrassPartial { a: f64, b: f64, terms: usize },
    /// `psi = f` for an analytic target.
    TargetMimic(TargetFunction),
    /// Piecewise-linear interpolation of samples on sorted nodes.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
    Custom(CustomMap),
}

impl ScalingMap {
    pub fn zero() -> Self {
        ScalingMap::Zero { dim: 1 }
    }

    pub fn jump(threshold: f64) -> Self {
        ScalingMap::Jump {
            threshold: vec![threshold],
        }
    }

    pub fn corner(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("corner radius must be positive, got {radius}")));
        }
        Ok(ScalingMap::CornerBump { center, radius })
    }

    /// Partial Weierstrass map with the convention that `k_vsk = 0` means `psi = 0`.
    pub fn weierstrass(a: f64, b: f64, k_vsk: usize) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) || b <= 1.0 {
            return Err(Error::Config(format!(
                "weierstrass map needs a in (0,1) and b > 1, got a={a}, b={b}"
            )));
        }
        if k_vsk == 0 {
            return Ok(ScalingMap::zero());
        }
        Ok(ScalingMap::WeierstrassPartial { a, b, terms: k_vsk })
    }

    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::Config("tabulated map needs >= 2 matching samples".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("tabulated nodes must be strictly increasing".into()));
        }
        Ok(ScalingMap::Tabulated { nodes, values })
    }

    pub fn custom<F>(name: &str, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalingMap::Custom(CustomMap::new(name, f))
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ScalingMap::Zero { dim } => *dim,
            _ => 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalingMap::Zero { .. })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScalingMap::Zero { dim } => Ok(vec![0.0; *dim]),
            _ => Ok(vec![self.eval_scalar(x)?]),
        }
    }

    /// Value of a one-output map (the zero map returns 0 for any `dim`).
    pub(crate) fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalingMap::Zero { .. } => Ok(0.0),
            ScalingMap::Jump { threshold } => {
                if threshold.len() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: threshold.len(),
                        got: x.len(),
                    });
                }
                let above = x.iter().zip(threshold).all(|(v, t)| v >= t);
                Ok(if above { 1.0 } else { 0.0 })
            }
            ScalingMap::CornerBump { center, radius } => {
                expect_dim(x, 1)?;
                let u = (x[0] - center).abs() / radius;
                if u < 1.0 {
                    Ok(1.0 - 1.5 * u + 0.5 * u * u * u)
                } else {
                    Ok(0.0)
                }
            }
            ScalingMap::WeierstrassPartial { a, b, terms } => {
                expect_dim(x, 2)?;
                Ok(weierstrass_sum(*a, *b, *terms, x))
            }
            ScalingMap::TargetMimic(t) => t.eval(x),
            ScalingMap::Tabulated { nodes, values } => {
                expect_dim(x, 1)?;
                interp_linear(nodes, values, x[0])
            }
            ScalingMap::Custom(c) => Ok((c.f)(x)),
        }
    }

    /// Squared lift distance `||psi(x) - psi(y)||^2`.
    pub(crate) fn lift_distance_sq(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let d = self.eval_scalar(x)? - self.eval_scalar(y)?;
        Ok(d * d)
    }

    /// Jacobian `q x d` at `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            ScalingMap::Zero { dim } => Ok(DMatrix::zeros(*dim, x.len())),
            _ => {
                let g = self.gradient_vector(x)?;
                Ok(DMatrix::from_row_slice(1, g.len(), &g))
            }
        }
    }

    /// Gradient of a one-output map as a `d`-vector.
    pub fn gradient_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScalingMap::Zero { .. } => Ok(vec![0.0; x.len()]),
            ScalingMap::Jump { threshold } => {
                if threshold.len() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: threshold.len(),
                        got: x.len(),
                    });
                }
                if x.iter().zip(threshold).any(|(v, t)| v == t) {
                    return Err(Error::Unsupported(format!(
                        "jump indicator is not differentiable at {x:?}"
                    )));
                }
                Ok(vec![0.0; x.len()])
            }
            ScalingMap::CornerBump { center, radius } => {
                expect_dim(x, 1)?;
                let u = x[0] - center;
                let r = *radius;
                if u == 0.0 || u.abs() == r {
                    return Err(Error::Unsupported(format!(
                        "corner bump is not differentiable at {}",
                        x[0]
                    )));
                }
                if u.abs() > r {
                    return Ok(vec![0.0]);
                }
                let s = u.signum();
                Ok(vec![s * (-1.5 / r + 1.5 * u * u / (r * r * r))])
            }
            ScalingMap::WeierstrassPartial { a, b, terms } => {
                expect_dim(x, 2)?;
                Ok(weierstrass_gradient(*a, *b, *terms, x))
            }
            ScalingMap::TargetMimic(t) => match t.gradient(x)? {
                Some(g) => Ok(g),
                None => Err(Error::Unsupported(format!(
                    "target {t:?} is not differentiable at {x:?}"
                ))),
            },
            ScalingMap::Tabulated { .. } => self.central_difference(x),
            ScalingMap::Custom(c) => match &c.grad {
                Some(g) => Ok(g(x)),
                None => self.central_difference(x),
            },
        }
    }

    fn central_difference(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut grad = Vec::with_capacity(x.len());
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let plus = self.eval_scalar(&probe);
            probe[i] = x[i] - h;
            let minus = self.eval_scalar(&probe);
            probe[i] = x[i];
            let centre = || self.eval_scalar(x);
            let g = match (plus, minus) {
                (Ok(p), Ok(m)) => (p - m) / (2.0 * h),
                (Ok(p), Err(_)) => (p - centre()?) / h,
                (Err(_), Ok(m)) => (centre()? - m) / h,
                (Err(e), Err(_)) => return Err(e),
            };
            grad.push(g);
        }
        Ok(grad)
    }
}

fn expect_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    Ok(())
}

fn interp_linear(nodes: &[f64], values: &[f64], t: f64) -> Result<f64> {
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    if !(t >= first && t <= last) {
        return Err(Error::Domain(format!(
            "{t} outside tabulated range [{first}, {last}]"
        )));
    }
    let i = match nodes.partition_point(|&n| n <= t) {
        0 => 0,
        k if k >= nodes.len() => nodes.len() - 2,
        k => k - 1,
    };
    let w = (t - nodes[i]) / (nodes[i + 1] - nodes[i]);
    Ok(values[i] + w * (values[i + 1] - values[i]))
}

/// Parsed `psi = ...` value. `target` is resolved by the experiment that
/// knows which target function is in play.
#[derive(Debug, Clone)]
pub enum PsiSpec {
    Map(ScalingMap),
    Target,
}

impl PsiSpec {
    pub fn resolve(&self, target: TargetFunction) -> ScalingMap {
        match self {
            PsiSpec::Map(m) => m.clone(),
            PsiSpec::Target => ScalingMap::TargetMimic(target),
        }
    }
}

impl FromStr for PsiSpec {
    type Err = Error;

    /// Grammar: `zero | jump(x0) | corner(x0,R) | weierstrass(a,b,K) | target | sin | expcos`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_matches('"');
        let (name, args) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(Error::Config(format!("unbalanced parentheses in psi '{s}'")));
                }
                let args = s[open + 1..s.len() - 1]
                    .split(',')
                    .filter(|a| !a.trim().is_empty())
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad number '{a}' in psi '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (s[..open].trim().to_ascii_lowercase(), args)
            }
            None => (s.to_ascii_lowercase(), Vec::new()),
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(Error::Config(format!(
                    "psi '{name}' takes {n} argument(s), got {}",
                    args.len()
                )));
            }
            Ok(())
        };
        let map = match name.as_str() {
            "zero" => {
                arity(0)?;
                ScalingMap::zero()
            }
            "target" => {
                arity(0)?;
                return Ok(PsiSpec::Target);
            }
            "jump" => {
                arity(1)?;
                ScalingMap::jump(args[0])
            }
            "corner" => {
                arity(2)?;
                ScalingMap::corner(args[0], args[1])?
            }
            "weierstrass" => {
                arity(3)?;
                let k = args[2];
                if k < 0.0 || k.fract() != 0.0 {
                    return Err(Error::Config(format!("K_vsk must be a non-negative integer, got {k}")));
                }
                ScalingMap::weierstrass(args[0], args[1], k as usize)?
            }
            "sin" => {
                arity(0)?;
                ScalingMap::Custom(
                    CustomMap::new("sin", |x: &[f64]| x[0].sin()).with_gradient(|x: &[f64]| vec![x[0].cos()]),
                )
            }
            "expcos" => {
                arity(0)?;
                ScalingMap::TargetMimic(TargetFunction::ExpCos)
            }
            other => return Err(Error::Config(format!("unknown scaling map '{other}'"))),
        };
        Ok(PsiSpec::Map(map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jump_indicator_branches() {
        let m = ScalingMap::jump(0.5);
        assert_eq!(m.eval(&[0.49]).unwrap(), vec![0.0]);
        assert_eq!(m.eval(&[0.5]).unwrap(), vec![1.0]);
        assert!(matches!(m.gradient(&[0.5]), Err(Error::Unsupported(_))));
        assert_eq!(m.gradient_vector(&[0.2]).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_map_is_zero() {
        let m = ScalingMap::Zero { dim: 3 };
        assert_eq!(m.eval(&[0.3, 0.1]).unwrap(), vec![0.0; 3]);
        assert_eq!(m.gradient(&[0.3, 0.1]).unwrap(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn corner_bump_endpoints_and_slope() {
        let m = ScalingMap::corner(0.5, 0.5).unwrap();
        assert_eq!(m.eval_scalar(&[0.5]).unwrap(), 1.0);
        assert_eq!(m.eval_scalar(&[1.0]).unwrap(), 0.0);
        assert_eq!(m.eval_scalar(&[0.0]).unwrap(), 0.0);
        assert_relative_eq!(m.gradient_vector(&[0.75]).unwrap()[0], -2.25, epsilon = 1e-14);
        assert_relative_eq!(m.gradient_vector(&[0.25]).unwrap()[0], 2.25, epsilon = 1e-14);
        assert!(m.gradient_vector(&[0.5]).is_err());
        assert!(ScalingMap::corner(0.5, 0.0).is_err());
    }

    #[test]
    fn weierstrass_single_term_at_origin() {
        let m = ScalingMap::WeierstrassPartial {
            a: 0.5,
            b: 3.0,
            terms: 0,
        };
        assert_eq!(m.eval_scalar(&[0.0, 0.0]).unwrap(), 1.0);
        assert!(ScalingMap::weierstrass(0.5, 3.0, 0).unwrap().is_zero());
    }

    #[test]
    fn expcos_gradient_at_zero() {
        let m = ScalingMap::TargetMimic(TargetFunction::ExpCos);
        assert_relative_eq!(m.gradient_vector(&[0.0]).unwrap()[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn target_values() {
        assert_relative_eq!(TargetFunction::Jump.eval(&[0.0]).unwrap(), 1.0625, epsilon = 1e-14);
        let w = TargetFunction::weierstrass_default();
        assert_relative_eq!(w.eval(&[0.0, 0.0]).unwrap(), 2.0 - 2f64.powi(-12), epsilon = 1e-14);
        assert_relative_eq!(
            TargetFunction::Corner.eval(&[0.5]).unwrap(),
            0.8824969025845955,
            epsilon = 1e-15
        );
        assert_eq!(TargetFunction::ExpCos.eval(&[0.0]).unwrap(), 0.0);
        assert!(TargetFunction::Jump.eval(&[1.5]).is_err());
        assert!(TargetFunction::ExpCos.eval(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn jump_target_step_is_three() {
        let left = (14.0 * PI * 1.0f64).cos() / 1.5 + 0.0 + 3.0;
        let at = TargetFunction::Jump.eval(&[0.5]).unwrap();
        assert_eq!(left - at, 3.0);
    }

    #[test]
    fn corner_target_is_continuous() {
        let left = (-0.5f64 * 0.25).exp();
        let x = 0.5 - 1e-15;
        let near_left = TargetFunction::Corner.eval(&[x]).unwrap();
        let right = TargetFunction::Corner.eval(&[0.5]).unwrap();
        assert!((left - right).abs() <= 1e-15);
        assert!((near_left - right).abs() < 1e-13);
    }

    #[test]
    fn full_weierstrass_map_matches_target() {
        let m = ScalingMap::weierstrass(0.5, 3.0, 12).unwrap();
        let t = TargetFunction::weierstrass_default();
        for &p in &[[0.1, 0.7], [0.33, 0.91], [1.0, 0.0]] {
            assert_eq!(m.eval_scalar(&p).unwrap(), t.eval(&p).unwrap());
        }
    }

    #[test]
    fn tabulated_interpolates_and_rejects_outside() {
        let m = ScalingMap::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(m.eval_scalar(&[0.5]).unwrap(), 1.0);
        assert_eq!(m.eval_scalar(&[2.0]).unwrap(), 0.0);
        assert!(matches!(m.eval_scalar(&[2.5]), Err(Error::Domain(_))));
        assert_relative_eq!(m.gradient_vector(&[1.5]).unwrap()[0], -2.0, epsilon = 1e-8);
        assert_relative_eq!(m.gradient_vector(&[0.0]).unwrap()[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn psi_grammar() {
        assert!(matches!("zero".parse::<PsiSpec>().unwrap(), PsiSpec::Map(ScalingMap::Zero { .. })));
        assert!(matches!("target".parse::<PsiSpec>().unwrap(), PsiSpec::Target));
        match "jump(0.5)".parse::<PsiSpec>().unwrap() {
            PsiSpec::Map(ScalingMap::Jump { threshold }) => assert_eq!(threshold, vec![0.5]),
            other => panic!("{other:?}"),
        }
        match "corner(0.5,0.5)".parse::<PsiSpec>().unwrap() {
            PsiSpec::Map(ScalingMap::CornerBump { center, radius }) => {
                assert_eq!((center, radius), (0.5, 0.5))
            }
            other => panic!("{other:?}"),
        }
        match "weierstrass(0.5,3,4)".parse::<PsiSpec>().unwrap() {
            PsiSpec::Map(ScalingMap::WeierstrassPartial { terms, .. }) => assert_eq!(terms, 4),
            other => panic!("{other:?}"),
        }
        assert!("weierstrass(0.5,3,0)".parse::<PsiSpec>().unwrap().resolve(TargetFunction::Jump).is_zero());
        assert!("jump(0.5".parse::<PsiSpec>().is_err());
        assert!("jump()".parse::<PsiSpec>().is_err());
        assert!("spline".parse::<PsiSpec>().is_err());
    }
}
