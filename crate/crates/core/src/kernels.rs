//! Radial profiles, stationary kernels, variably scaled kernels (VSKs) and the
//! classical non-stationary comparators (Gibbs, Paciorek–Schervish, linear).
//!
//! Every kernel evaluation is a pure function of its parameters and the two
//! arguments. Arguments are put in lexicographic order before evaluation, so
//! `k(x, y)` and `k(y, x)` are bitwise identical.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::scaling_maps::{PsiSpec, ScalingMap, TargetFunction};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const SQRT_5: f64 = 2.236_067_977_499_79;

/// One-dimensional radial profile `phi` with `phi(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadialFamily {
    /// `exp(-t^2 / 2)`
    Gaussian,
    /// `exp(-t)` (Matérn nu = 1/2)
    MaternC0,
    /// `(1 + sqrt3 t) exp(-sqrt3 t)` (Matérn nu = 3/2)
    MaternC2,
    /// `(1 + sqrt5 t + 5/3 t^2) exp(-sqrt5 t)` (Matérn nu = 5/2)
    MaternC4,
    /// Compactly supported Wendland function of smoothness `C^{2k}`, valid in `d <= 3`.
    Wendland { k: u8 },
    /// `(1 + t^2)^{-1/2}`
    InverseMultiquadric,
}

impl RadialFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            RadialFamily::Wendland { k } if *k > 2 => Err(Error::Config(format!(
                "Wendland smoothness index must be 0, 1 or 2, got {k}"
            ))),
            _ => Ok(()),
        }
    }

    /// `phi(r)` for `r >= 0`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        self.validate()?;
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("radial argument must be finite and >= 0, got {r}")));
        }
        Ok(self.profile(r))
    }

    #[inline]
    pub(crate) fn profile(&self, t: f64) -> f64 {
        match *self {
            RadialFamily::Gaussian => (-0.5 * t * t).exp(),
            RadialFamily::MaternC0 => (-t).exp(),
            RadialFamily::MaternC2 => {
                let s = SQRT_3 * t;
                (1.0 + s) * (-s).exp()
            }
            RadialFamily::MaternC4 => {
                let s = SQRT_5 * t;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            RadialFamily::Wendland { k } => {
                if t >= 1.0 {
                    return 0.0;
                }
                let u = 1.0 - t;
                match k {
                    0 => u * u,
                    1 => u.powi(4) * (4.0 * t + 1.0),
                    _ => u.powi(6) * (35.0 * t * t + 18.0 * t + 3.0) / 3.0,
                }
            }
            RadialFamily::InverseMultiquadric => 1.0 / (1.0 + t * t).sqrt(),
        }
    }

    /// Strict positive definiteness in `R^dim`.
    pub fn is_strictly_positive_definite(&self, dim: usize) -> bool {
        match self {
            RadialFamily::Wendland { .. } => dim <= 3,
            _ => true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RadialFamily::Gaussian => "gaussian",
            RadialFamily::MaternC0 => "maternc0",
            RadialFamily::MaternC2 => "maternc2",
            RadialFamily::MaternC4 => "maternc4",
            RadialFamily::Wendland { k: 0 } => "wendlandc0",
            RadialFamily::Wendland { k: 1 } => "wendlandc2",
            RadialFamily::Wendland { .. } => "wendlandc4",
            RadialFamily::InverseMultiquadric => "imq",
        }
    }
}

impl fmt::Display for RadialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RadialFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let family = match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "gaussian" | "se" | "sqexp" | "squaredexponential" => RadialFamily::Gaussian,
            "maternc0" | "matern12" | "exponential" => RadialFamily::MaternC0,
            "maternc2" | "matern32" => RadialFamily::MaternC2,
            "maternc4" | "matern52" => RadialFamily::MaternC4,
            "wendlandc0" => RadialFamily::Wendland { k: 0 },
            "wendland" | "wendlandc2" => RadialFamily::Wendland { k: 1 },
            "wendlandc4" => RadialFamily::Wendland { k: 2 },
            "imq" | "inversemultiquadric" => RadialFamily::InverseMultiquadric,
            other => return Err(Error::Config(format!("unknown radial family '{other}'"))),
        };
        Ok(family)
    }
}

fn check_length(l: f64) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Config(format!("length scale must be positive, got {l}")));
    }
    Ok(())
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn canonical<'a>(x: &'a [f64], y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    for (a, b) in x.iter().zip(y) {
        match a.partial_cmp(b) {
            Some(Ordering::Less) => return (x, y),
            Some(Ordering::Greater) => return (y, x),
            _ => {}
        }
    }
    (x, y)
}

/// `kappa_l(x, x') = phi(||x - x'|| / l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryKernel {
    pub family: RadialFamily,
    pub length_scale: f64,
}

impl StationaryKernel {
    pub fn new(family: RadialFamily, length_scale: f64) -> Result<Self> {
        family.validate()?;
        check_length(length_scale)?;
        Ok(StationaryKernel {
            family,
            length_scale,
        })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        let (x, y) = canonical(x, y);
        Ok(self.family.profile(squared_distance(x, y).sqrt() / self.length_scale))
    }
}

/// `kappa^Psi_l(x, x') = phi(||Psi(x) - Psi(x')|| / l)` with `Psi(x) = (x, psi(x))`.
#[derive(Debug, Clone)]
pub struct VskKernel {
    pub base: StationaryKernel,
    pub scaling: ScalingMap,
}

impl VskKernel {
    pub fn new(base: StationaryKernel, scaling: ScalingMap) -> Self {
        VskKernel { base, scaling }
    }

    /// Distance between the lifted points.
    pub fn lifted_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        let (x, y) = canonical(x, y);
        Ok((squared_distance(x, y) + self.scaling.lift_distance_sq(x, y)?).sqrt())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let r = self.lifted_distance(x, y)?;
        Ok(self.base.family.profile(r / self.base.length_scale))
    }
}

/// Spatially varying length scale `l(x)` for the Gibbs kernel.
#[derive(Clone)]
pub enum LengthField {
    Constant(f64),
    /// `l(x) = l / sqrt(1 + |grad psi(x)|^2)`, the VSK-induced local length scale.
    VskInduced { length_scale: f64, scaling: ScalingMap },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl LengthField {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let l = match self {
            LengthField::Constant(l) => *l,
            LengthField::VskInduced {
                length_scale,
                scaling,
            } => {
                let g = scaling.gradient_vector(x)?;
                length_scale / (1.0 + g.iter().map(|v| v * v).sum::<f64>()).sqrt()
            }
            LengthField::Custom(f) => f(x),
        };
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Domain(format!("length field must be positive, got {l} at {x:?}")));
        }
        Ok(l)
    }
}

impl fmt::Debug for LengthField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthField::Constant(l) => write!(f, "Constant({l})"),
            LengthField::VskInduced {
                length_scale,
                scaling,
            } => write!(f, "VskInduced({length_scale}, {scaling:?})"),
            LengthField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Gibbs kernel with spatially varying length scale.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    pub family: RadialFamily,
    pub length_field: LengthField,
}

impl GibbsKernel {
    pub fn new(family: RadialFamily, length_field: LengthField) -> Result<Self> {
        family.validate()?;
        if let LengthField::Constant(l) | LengthField::VskInduced { length_scale: l, .. } = &length_field {
            check_length(*l)?;
        }
        Ok(GibbsKernel {
            family,
            length_field,
        })
    }

    /// Normalizing prefactor `sqrt(2 l l' / (l^2 + l'^2))`.
    pub fn prefactor(lx: f64, ly: f64) -> f64 {
        (2.0 * lx * ly / (lx * lx + ly * ly)).sqrt()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        let (x, y) = canonical(x, y);
        let lx = self.length_field.eval(x)?;
        let ly = self.length_field.eval(y)?;
        let sum = lx * lx + ly * ly;
        let l_eff = (0.5 * sum).sqrt();
        Ok(Self::prefactor(lx, ly) * self.family.profile(squared_distance(x, y).sqrt() / l_eff))
    }
}

/// Field of SPD matrices `Sigma(x)` for the Paciorek–Schervish kernel.
#[derive(Clone)]
pub enum SigmaField {
    /// `Sigma = l^2 I`.
    Isotropic(f64),
    Constant(DMatrix<f64>),
    /// `Sigma(x) = l^2 (I + grad psi grad psi^T)^{-1}`.
    VskInduced { length_scale: f64, scaling: ScalingMap },
    Custom(Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>),
}

impl SigmaField {
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = x.len();
        let m = match self {
            SigmaField::Isotropic(l) => DMatrix::identity(d, d) * (l * l),
            SigmaField::Constant(m) => m.clone(),
            SigmaField::VskInduced {
                length_scale,
                scaling,
            } => {
                // Sherman–Morrison: (I + g g^T)^{-1} = I - g g^T / (1 + |g|^2)
                let g = DVector::from_vec(scaling.gradient_vector(x)?);
                let denom = 1.0 + g.norm_squared();
                (DMatrix::identity(d, d) - &g * g.transpose() / denom) * (length_scale * length_scale)
            }
            SigmaField::Custom(f) => f(x),
        };
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            });
        }
        Ok(m)
    }
}

impl fmt::Debug for SigmaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaField::Isotropic(l) => write!(f, "Isotropic({l})"),
            SigmaField::Constant(m) => write!(f, "Constant({m:?})"),
            SigmaField::VskInduced {
                length_scale,
                scaling,
            } => write!(f, "VskInduced({length_scale}, {scaling:?})"),
            SigmaField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Paciorek–Schervish kernel driven by a field of SPD matrices.
#[derive(Debug, Clone)]
pub struct PaciorekKernel {
    pub family: RadialFamily,
    pub sigma_field: SigmaField,
}

/// Determinant prefactor and quadratic form of the Paciorek–Schervish kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaciorekTerms {
    pub prefactor: f64,
    pub quadratic_form: f64,
}

impl PaciorekKernel {
    pub fn new(family: RadialFamily, sigma_field: SigmaField) -> Result<Self> {
        family.validate()?;
        Ok(PaciorekKernel {
            family,
            sigma_field,
        })
    }

    pub fn terms(&self, x: &[f64], y: &[f64]) -> Result<PaciorekTerms> {
        check_dims(x, y)?;
        let (x, y) = canonical(x, y);
        let sx = self.sigma_field.eval(x)?;
        let sy = self.sigma_field.eval(y)?;
        let spd = |m: DMatrix<f64>, what: &str| {
            m.cholesky()
                .ok_or_else(|| Error::Domain(format!("{what} is not symmetric positive definite")))
        };
        let avg = (&sx + &sy) * 0.5;
        let avg_chol = spd(avg, "averaged Sigma")?;
        let log_det = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
            2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
        };
        let ld_x = log_det(&spd(sx, "Sigma(x)")?);
        let ld_y = log_det(&spd(sy, "Sigma(x')")?);
        let ld_avg = log_det(&avg_chol);
        let h = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(a, b)| a - b));
        let z = avg_chol.l().solve_lower_triangular(&h).expect("non-singular factor");
        Ok(PaciorekTerms {
            prefactor: (0.25 * (ld_x + ld_y) - 0.5 * ld_avg).exp(),
            quadratic_form: z.norm_squared(),
        })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let t = self.terms(x, y)?;
        Ok(t.prefactor * self.family.profile(t.quadratic_form.sqrt()))
    }
}

/// `kappa(x, x') = x^T x' + psi(x)^T psi(x')`.
#[derive(Debug, Clone)]
pub struct LinearVskKernel {
    pub scaling: ScalingMap,
}

impl LinearVskKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        let (x, y) = canonical(x, y);
        let px = self.scaling.eval(x)?;
        let py = self.scaling.eval(y)?;
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        Ok(dot + px.iter().zip(&py).map(|(a, b)| a * b).sum::<f64>())
    }
}

/// Any kernel the regression engine can use.
#[derive(Debug, Clone)]
pub enum Kernel {
    Stationary(StationaryKernel),
    Vsk(VskKernel),
    Gibbs(GibbsKernel),
    Paciorek(PaciorekKernel),
    LinearVsk(LinearVskKernel),
}

impl Kernel {
    pub fn stationary(family: RadialFamily, length_scale: f64) -> Result<Self> {
        Ok(Kernel::Stationary(StationaryKernel::new(family, length_scale)?))
    }

    pub fn vsk(family: RadialFamily, length_scale: f64, scaling: ScalingMap) -> Result<Self> {
        Ok(Kernel::Vsk(VskKernel::new(
            StationaryKernel::new(family, length_scale)?,
            scaling,
        )))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Kernel::Stationary(k) => k.eval(x, y),
            Kernel::Vsk(k) => k.eval(x, y),
            Kernel::Gibbs(k) => k.eval(x, y),
            Kernel::Paciorek(k) => k.eval(x, y),
            Kernel::LinearVsk(k) => k.eval(x, y),
        }
    }

    /// Whether `kappa(x, x) = 1` everywhere.
    pub fn is_normalized(&self) -> bool {
        !matches!(self, Kernel::LinearVsk(_))
    }

    pub fn family(&self) -> Option<RadialFamily> {
        match self {
            Kernel::Stationary(k) => Some(k.family),
            Kernel::Vsk(k) => Some(k.base.family),
            Kernel::Gibbs(k) => Some(k.family),
            Kernel::Paciorek(k) => Some(k.family),
            Kernel::LinearVsk(_) => None,
        }
    }

    /// Global length scale, when the kernel has one.
    pub fn length_scale(&self) -> Option<f64> {
        match self {
            Kernel::Stationary(k) => Some(k.length_scale),
            Kernel::Vsk(k) => Some(k.base.length_scale),
            Kernel::Gibbs(GibbsKernel {
                length_field: LengthField::Constant(l) | LengthField::VskInduced { length_scale: l, .. },
                ..
            }) => Some(*l),
            Kernel::Paciorek(PaciorekKernel {
                sigma_field: SigmaField::Isotropic(l) | SigmaField::VskInduced { length_scale: l, .. },
                ..
            }) => Some(*l),
            _ => None,
        }
    }

    /// Same kernel with its global length scale replaced.
    pub fn with_length_scale(&self, l: f64) -> Result<Kernel> {
        check_length(l)?;
        let mut k = self.clone();
        match &mut k {
            Kernel::Stationary(s) => s.length_scale = l,
            Kernel::Vsk(v) => v.base.length_scale = l,
            Kernel::Gibbs(GibbsKernel {
                length_field: LengthField::Constant(old) | LengthField::VskInduced { length_scale: old, .. },
                ..
            }) => *old = l,
            Kernel::Paciorek(PaciorekKernel {
                sigma_field: SigmaField::Isotropic(old) | SigmaField::VskInduced { length_scale: old, .. },
                ..
            }) => *old = l,
            _ => {
                return Err(Error::Unsupported(
                    "kernel has no global length scale to rescale".into(),
                ))
            }
        }
        Ok(k)
    }

    /// Unscaled (lifted) distance for kernels of the form `phi(r / l)`.
    pub fn radial_distance(&self, x: &[f64], y: &[f64]) -> Option<Result<f64>> {
        match self {
            Kernel::Stationary(_) => Some(check_dims(x, y).map(|_| {
                let (x, y) = canonical(x, y);
                squared_distance(x, y).sqrt()
            })),
            Kernel::Vsk(v) => Some(v.lifted_distance(x, y)),
            _ => None,
        }
    }
}

impl From<StationaryKernel> for Kernel {
    fn from(k: StationaryKernel) -> Self {
        Kernel::Stationary(k)
    }
}

impl From<VskKernel> for Kernel {
    fn from(k: VskKernel) -> Self {
        Kernel::Vsk(k)
    }
}

fn lower_rows<F>(n: usize, entry: F) -> Result<DMatrix<f64>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| entry(i, j)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Gram matrix `K_ij = kappa(x_i, x_j)`; rows are assembled in parallel.
pub fn gram_matrix(kernel: &Kernel, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    lower_rows(points.len(), |i, j| kernel.eval(&points[i], &points[j]))
}

/// Matrix of unscaled (lifted) distances, for radial-type kernels only.
pub fn distance_matrix(kernel: &Kernel, points: &[Vec<f64>]) -> Option<Result<DMatrix<f64>>> {
    let probe = points.first()?;
    if let Err(e) = kernel.radial_distance(probe, probe)? {
        return Some(Err(e));
    }
    Some(lower_rows(points.len(), |i, j| {
        kernel
            .radial_distance(&points[i], &points[j])
            .expect("radial kernel")
    }))
}

/// Cross-covariance `C_ij = kappa(a_i, b_j)`.
pub fn cross_matrix(kernel: &Kernel, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .map(|x| b.iter().map(|y| kernel.eval(x, y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

/// Vector `k(x)_i = kappa(x, x_i)`.
pub fn kernel_vector(kernel: &Kernel, points: &[Vec<f64>], x: &[f64]) -> Result<DVector<f64>> {
    let v = points
        .iter()
        .map(|p| kernel.eval(x, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(v))
}

/// Factors of a Gaussian VSK written as an amplitude-modulated kernel:
/// `sigma_f^2 kappa^Psi(x, x') = amp_x * amp_y * modulated`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeDecomposition {
    pub amp_x: f64,
    pub amp_y: f64,
    /// `exp(<psi(x), psi(x')> / l^2) kappa_l(x, x')`
    pub modulated: f64,
}

impl AmplitudeDecomposition {
    pub fn product(&self) -> f64 {
        self.amp_x * self.amp_y * self.modulated
    }
}

pub fn amplitude_decomposition(
    k: &VskKernel,
    x: &[f64],
    y: &[f64],
    sigma_f: f64,
) -> Result<AmplitudeDecomposition> {
    if k.base.family != RadialFamily::Gaussian {
        return Err(Error::Unsupported(format!(
            "amplitude decomposition needs a Gaussian profile, got {}",
            k.base.family
        )));
    }
    let l2 = k.base.length_scale * k.base.length_scale;
    let px = k.scaling.eval(x)?;
    let py = k.scaling.eval(y)?;
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let inner: f64 = px.iter().zip(&py).map(|(a, b)| a * b).sum();
    Ok(AmplitudeDecomposition {
        amp_x: sigma_f * (-sq(&px) / (2.0 * l2)).exp(),
        amp_y: sigma_f * (-sq(&py) / (2.0 * l2)).exp(),
        modulated: (inner / l2).exp() * k.base.eval(x, y)?,
    })
}

/// Plain-text kernel fragment, e.g.
/// `{family = "maternc2", lengthscale = 0.0650, vsk = "jump(0.5)"}`.
#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
pub struct KernelConfig {
    pub family: String,
    #[serde(default = "default_length")]
    pub lengthscale: f64,
    #[serde(default)]
    pub vsk: Option<String>,
}

fn default_length() -> f64 {
    1.0
}

impl KernelConfig {
    /// Accepts either a bare family name or an inline-table fragment.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let text = text.strip_prefix("kernel").map(|t| t.trim_start()).unwrap_or(text);
        let text = text.strip_prefix('=').map(|t| t.trim_start()).unwrap_or(text);
        if !text.starts_with('{') {
            return Ok(KernelConfig {
                family: text.to_string(),
                lengthscale: default_length(),
                vsk: None,
            });
        }
        #[derive(Deserialize)]
        struct Wrapper {
            kernel: KernelConfig,
        }
        let w: Wrapper = toml::from_str(&format!("kernel = {text}"))
            .map_err(|e| Error::Config(format!("bad kernel fragment: {e}")))?;
        Ok(w.kernel)
    }

    pub fn family(&self) -> Result<RadialFamily> {
        self.family.parse()
    }

    pub fn psi(&self) -> Result<Option<PsiSpec>> {
        self.vsk.as_deref().map(str::parse).transpose()
    }

    /// Builds the kernel; `target` resolves `vsk = "target"`.
    pub fn build(&self, target: TargetFunction) -> Result<Kernel> {
        let family = self.family()?;
        match self.psi()? {
            None => Kernel::stationary(family, self.lengthscale),
            Some(p) => Kernel::vsk(family, self.lengthscale, p.resolve(target)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const ALL: [RadialFamily; 8] = [
        RadialFamily::Gaussian,
        RadialFamily::MaternC0,
        RadialFamily::MaternC2,
        RadialFamily::MaternC4,
        RadialFamily::Wendland { k: 0 },
        RadialFamily::Wendland { k: 1 },
        RadialFamily::Wendland { k: 2 },
        RadialFamily::InverseMultiquadric,
    ];

    #[test]
    fn profiles_are_normalized_and_monotone() {
        for f in ALL {
            assert_eq!(f.eval(0.0).unwrap(), 1.0, "{f}");
            let mut prev = 1.0;
            for i in 1..400 {
                let v = f.eval(i as f64 * 0.01).unwrap();
                assert!(v.is_finite() && v >= 0.0 && v <= prev + 1e-15, "{f} at {i}");
                prev = v;
            }
        }
    }

    #[test]
    fn profile_values() {
        assert_relative_eq!(
            RadialFamily::Gaussian.eval(1.0).unwrap(),
            0.606_530_659_712_633_4,
            epsilon = 1e-15
        );
        assert!(matches!(RadialFamily::Gaussian.eval(-0.1), Err(Error::Domain(_))));
        assert!(RadialFamily::Wendland { k: 3 }.eval(0.1).is_err());
        assert!("bessel".parse::<RadialFamily>().is_err());
        assert_eq!("Matern-C2".parse::<RadialFamily>().unwrap(), RadialFamily::MaternC2);
    }

    #[test]
    fn stationary_examples() {
        let k = StationaryKernel::new(RadialFamily::Gaussian, 2.0).unwrap();
        assert_relative_eq!(k.eval(&[0.0], &[2.0]).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_eq!(k.eval(&[0.3], &[0.3]).unwrap(), 1.0);
        assert_eq!(k.eval(&[0.1, 0.7], &[0.4, 0.2]).unwrap(), k.eval(&[0.4, 0.2], &[0.1, 0.7]).unwrap());
        assert!(matches!(k.eval(&[0.0], &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(StationaryKernel::new(RadialFamily::Gaussian, 0.0).is_err());
    }

    #[test]
    fn vsk_examples() {
        let base = StationaryKernel::new(RadialFamily::Gaussian, 1.0).unwrap();
        let jump = VskKernel::new(base, ScalingMap::jump(0.5));
        assert_relative_eq!(
            jump.eval(&[0.4], &[0.6]).unwrap(),
            (-0.52f64).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(jump.eval(&[0.4], &[0.6]).unwrap(), 0.594_520_547_970_7, epsilon = 1e-12);
        assert_eq!(jump.eval(&[0.7], &[0.7]).unwrap(), 1.0);
        let zero = VskKernel::new(base, ScalingMap::zero());
        for (x, y) in [(0.1, 0.9), (0.3, 0.35), (0.0, 1.0)] {
            assert_eq!(zero.eval(&[x], &[y]).unwrap(), base.eval(&[x], &[y]).unwrap());
        }
    }

    #[test]
    fn gibbs_examples() {
        let field = LengthField::Custom(Arc::new(|x: &[f64]| if x[0] < 0.5 { 1.0 } else { 2.0 }));
        let g = GibbsKernel::new(RadialFamily::Gaussian, field).unwrap();
        let expected = (0.8f64).sqrt() * (-1.0f64 / 5.0).exp();
        assert_relative_eq!(g.eval(&[0.0], &[1.0]).unwrap(), expected, epsilon = 1e-15);
        assert_eq!(g.eval(&[0.7], &[0.7]).unwrap(), 1.0);
        let constant = GibbsKernel::new(RadialFamily::MaternC2, LengthField::Constant(0.3)).unwrap();
        let s = StationaryKernel::new(RadialFamily::MaternC2, 0.3).unwrap();
        assert_relative_eq!(
            constant.eval(&[0.1], &[0.5]).unwrap(),
            s.eval(&[0.1], &[0.5]).unwrap(),
            epsilon = 1e-15
        );
        let bad = GibbsKernel::new(RadialFamily::Gaussian, LengthField::Custom(Arc::new(|_: &[f64]| -1.0))).unwrap();
        assert!(bad.eval(&[0.0], &[1.0]).is_err());
        assert_eq!(GibbsKernel::prefactor(0.4, 0.4), 1.0);
    }

    #[test]
    fn paciorek_examples() {
        let field = SigmaField::Custom(Arc::new(|x: &[f64]| {
            DMatrix::from_element(1, 1, if x[0] < 0.5 { 1.0 } else { 4.0 })
        }));
        let p = PaciorekKernel::new(RadialFamily::Gaussian, field).unwrap();
        let expected = (0.8f64).sqrt() * (-1.0f64 / 5.0).exp();
        assert_relative_eq!(p.eval(&[0.0], &[1.0]).unwrap(), expected, epsilon = 1e-15);
        let iso = PaciorekKernel::new(RadialFamily::MaternC4, SigmaField::Isotropic(0.7)).unwrap();
        let s = StationaryKernel::new(RadialFamily::MaternC4, 0.7).unwrap();
        let (x, y) = ([0.1, 0.2], [0.6, -0.3]);
        assert_relative_eq!(iso.eval(&x, &y).unwrap(), s.eval(&x, &y).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(iso.eval(&x, &x).unwrap(), 1.0, epsilon = 1e-15);
        let bad = PaciorekKernel::new(
            RadialFamily::Gaussian,
            SigmaField::Constant(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])),
        )
        .unwrap();
        assert!(matches!(bad.eval(&x, &y), Err(Error::Domain(_))));
    }

    #[test]
    fn linear_vsk_gram_is_psd() {
        let k = Kernel::LinearVsk(LinearVskKernel {
            scaling: ScalingMap::jump(0.5),
        });
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0]).collect();
        let g = gram_matrix(&k, &pts).unwrap();
        let eig = g.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12));
        assert_eq!(k.eval(&[0.6], &[0.8]).unwrap(), 0.6 * 0.8 + 1.0);
        assert!(!k.is_normalized());
    }

    #[test]
    fn gram_examples() {
        let k = Kernel::stationary(RadialFamily::Gaussian, 1.0).unwrap();
        assert_eq!(gram_matrix(&k, &[vec![0.3]]).unwrap(), DMatrix::from_element(1, 1, 1.0));
        let g = gram_matrix(&k, &[vec![0.0], vec![1.0]]).unwrap();
        let c = (-0.5f64).exp();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, c, c, 1.0]));
        let v = Kernel::vsk(RadialFamily::Gaussian, 1.0, ScalingMap::jump(0.5)).unwrap();
        let g = gram_matrix(&v, &[vec![0.4], vec![0.6]]).unwrap();
        assert_relative_eq!(g[(0, 1)], 0.594_520_548, epsilon = 1e-9);
        let d = distance_matrix(&v, &[vec![0.4], vec![0.6]]).unwrap().unwrap();
        assert_relative_eq!(d[(0, 1)], 1.04f64.sqrt(), epsilon = 1e-15);
        assert!(distance_matrix(
            &Kernel::Gibbs(GibbsKernel::new(RadialFamily::Gaussian, LengthField::Constant(1.0)).unwrap()),
            &[vec![0.0]]
        )
        .is_none());
    }

    #[test]
    fn amplitude_decomposition_examples() {
        let base = StationaryKernel::new(RadialFamily::Gaussian, 0.8).unwrap();
        let zero = VskKernel::new(base, ScalingMap::zero());
        let d = amplitude_decomposition(&zero, &[0.1], &[0.4], 2.0).unwrap();
        assert_eq!((d.amp_x, d.amp_y), (2.0, 2.0));
        assert_relative_eq!(d.modulated, base.eval(&[0.1], &[0.4]).unwrap(), epsilon = 1e-15);
        let sine = VskKernel::new(base, "sin".parse::<PsiSpec>().unwrap().resolve(TargetFunction::Jump));
        let d = amplitude_decomposition(&sine, &[0.3], &[0.3], 1.5).unwrap();
        assert_relative_eq!(d.product(), 2.25, epsilon = 1e-14);
        let matern = VskKernel::new(StationaryKernel::new(RadialFamily::MaternC2, 1.0).unwrap(), ScalingMap::zero());
        assert!(matches!(
            amplitude_decomposition(&matern, &[0.0], &[1.0], 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn length_scale_rescaling() {
        let v = Kernel::vsk(RadialFamily::MaternC4, 1.0, ScalingMap::jump(0.5)).unwrap();
        let w = v.with_length_scale(0.25).unwrap();
        assert_eq!(w.length_scale(), Some(0.25));
        let lin = Kernel::LinearVsk(LinearVskKernel {
            scaling: ScalingMap::zero(),
        });
        assert!(lin.with_length_scale(2.0).is_err());
        assert!(v.with_length_scale(-1.0).is_err());
    }

    #[test]
    fn kernel_fragment_parses() {
        let c = KernelConfig::parse(r#"kernel = {family = "maternc2", lengthscale = 0.0650, vsk = "jump(0.5)"}"#)
            .unwrap();
        assert_eq!(c.family, "maternc2");
        assert_eq!(c.lengthscale, 0.065);
        let k = c.build(TargetFunction::Jump).unwrap();
        assert!(matches!(k, Kernel::Vsk(_)));
        let bare = KernelConfig::parse("gaussian").unwrap();
        assert!(matches!(bare.build(TargetFunction::Jump).unwrap(), Kernel::Stationary(_)));
        assert!(KernelConfig::parse("{family = 3}").is_err());
        assert!(KernelConfig::parse("{family = \"nope\"}").unwrap().build(TargetFunction::Jump).is_err());
    }
}
