//! Reproducible experiment runner: the jump, Weierstrass, corner and
//! Gibbs-comparison studies, emitted as CSV tables plus a JSON manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{basis_function_profile, compute_metrics, MetricsReport};
use crate::designs::{add_noise, generate, Design, DesignKind};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::gp::{sample_paths, CovarianceModel, TrainedGp, TrainingSet};
use crate::kernels::{GibbsKernel, Kernel, LengthField, RadialFamily};
use crate::mle::{fit, FitResult, HyperBounds, ParamBound};
use crate::scaling_maps::{PsiSpec, ScalingMap, TargetFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    JumpFixed,
    JumpMle,
    Weierstrass,
    Corner,
    GibbsCompare,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::JumpFixed,
        ExperimentId::JumpMle,
        ExperimentId::Weierstrass,
        ExperimentId::Corner,
        ExperimentId::GibbsCompare,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::JumpFixed => "jump_fixed",
            ExperimentId::JumpMle => "jump_mle",
            ExperimentId::Weierstrass => "weierstrass",
            ExperimentId::Corner => "corner",
            ExperimentId::GibbsCompare => "gibbs_compare",
        }
    }

    pub fn target(&self) -> TargetFunction {
        match self {
            ExperimentId::JumpFixed | ExperimentId::JumpMle => TargetFunction::Jump,
            ExperimentId::Weierstrass => TargetFunction::weierstrass_default(),
            ExperimentId::Corner => TargetFunction::Corner,
            ExperimentId::GibbsCompare => TargetFunction::ExpCos,
        }
    }

    /// Whether the sweep runs over the scaling-map truncation rather than `N`.
    pub fn sweeps_map(&self) -> bool {
        matches!(self, ExperimentId::Weierstrass)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub design: DesignKind,
    /// Training size for single runs; per-axis count for grid designs.
    pub n: usize,
    /// `N` values, or map truncation levels for the Weierstrass study.
    pub sweep: Vec<usize>,
    pub family: RadialFamily,
    /// Hyperparameters used when not fitting, and for `--fix` defaults.
    pub length_scale: f64,
    pub sigma_f: f64,
    pub sigma_n: f64,
    /// Scaling map for the VSK model, in the `--psi` grammar.
    pub psi: Option<String>,
    pub noise_std: f64,
    pub seed: u64,
    pub fit: bool,
    pub fixed: Vec<(String, f64)>,
    pub alpha: f64,
    pub starts: usize,
    /// Evaluation points (per axis in 2D).
    pub eval_points: usize,
    pub include_noise: bool,
    pub samples: usize,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId) -> Self {
        let base = ExperimentConfig {
            experiment,
            design: DesignKind::Equispaced,
            n: 6,
            sweep: Vec::new(),
            family: RadialFamily::Gaussian,
            length_scale: 1.0,
            sigma_f: 1.0,
            sigma_n: 0.0,
            psi: None,
            noise_std: 0.0,
            seed: 0,
            fit: true,
            fixed: Vec::new(),
            alpha: 0.05,
            starts: 8,
            eval_points: 500,
            include_noise: true,
            samples: 3,
            out_dir: None,
        };
        match experiment {
            ExperimentId::JumpFixed => ExperimentConfig {
                family: RadialFamily::MaternC2,
                sigma_f: 8.0,
                psi: Some("jump(0.5)".into()),
                fit: false,
                sweep: vec![6],
                ..base
            },
            ExperimentId::JumpMle => ExperimentConfig {
                design: DesignKind::Halton,
                n: 27,
                family: RadialFamily::MaternC4,
                sigma_n: 0.25,
                psi: Some("jump(0.5)".into()),
                noise_std: 0.25,
                sweep: preset(experiment, "tables").expect("preset"),
                ..base
            },
            ExperimentId::Weierstrass => ExperimentConfig {
                design: DesignKind::Grid,
                n: 5,
                family: RadialFamily::MaternC0,
                eval_points: 50,
                sweep: preset(experiment, "paper").expect("preset"),
                ..base
            },
            ExperimentId::Corner => ExperimentConfig {
                n: 21,
                psi: Some("corner(0.5,0.5)".into()),
                sweep: preset(experiment, "quick").expect("preset"),
                ..base
            },
            ExperimentId::GibbsCompare => ExperimentConfig {
                design: DesignKind::Chebyshev,
                n: 9,
                sigma_n: 0.05,
                psi: Some("target".into()),
                noise_std: 0.05,
                sweep: vec![9],
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise std must be non-negative, got {}", self.noise_std)));
        }
        if self.experiment == ExperimentId::JumpFixed && self.fit {
            return Err(Error::Config("jump_fixed runs with fixed hyperparameters; drop --fit".into()));
        }
        if self.experiment.sweeps_map() && self.psi.is_some() {
            return Err(Error::Config("the weierstrass study sweeps the scaling map; --psi is not accepted".into()));
        }
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep is empty".into()));
        }
        if !self.experiment.sweeps_map() && self.sweep.contains(&0) {
            return Err(Error::Config("sweep values must be positive".into()));
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        if self.n == 0 || self.eval_points == 0 || self.starts == 0 {
            return Err(Error::Config("n, evaluation points and starts must be positive".into()));
        }
        self.family.validate()?;
        self.fixed_values()?;
        if let Some(p) = &self.psi {
            p.parse::<PsiSpec>()?;
        }
        Ok(())
    }

    /// Hyperparameters for non-fitted runs after applying `fixed` overrides.
    fn fixed_values(&self) -> Result<(f64, f64, f64)> {
        let mut b = HyperBounds::all_fixed(self.length_scale, self.sigma_f, self.sigma_n);
        for (k, v) in &self.fixed {
            b = b.fix(k, *v)?;
        }
        b.validate()?;
        match (b.length_scale, b.sigma_f, b.sigma_n) {
            (ParamBound::Fixed(l), ParamBound::Fixed(f), ParamBound::Fixed(n)) => Ok((l, f, n)),
            _ => unreachable!("all parameters fixed"),
        }
    }

    fn vsk_map(&self, target: TargetFunction) -> Result<ScalingMap> {
        let spec = self.psi.as_deref().unwrap_or("zero").parse::<PsiSpec>()?;
        Ok(spec.resolve(target))
    }
}

/// Named sweep lists. `paper` gives the full node families,
/// `tables` the two tabulated sizes, `quick` a short desk-scale subset.
pub fn preset(experiment: ExperimentId, name: &str) -> Result<Vec<usize>> {
    let range = |a: usize, step: usize, b: usize| (a..=b).step_by(step).collect::<Vec<_>>();
    let list = match (experiment, name) {
        (ExperimentId::JumpMle, "paper") => range(10, 20, 790),
        (ExperimentId::JumpMle, "tables") => vec![27, 81],
        (ExperimentId::JumpMle, "quick") => range(10, 20, 170),
        (ExperimentId::Corner, "paper") => range(11, 20, 791),
        (ExperimentId::Corner, "quick") => range(11, 20, 91),
        (ExperimentId::Weierstrass, "paper" | "quick") => (0..=12).collect(),
        (e, other) => {
            return Err(Error::Config(format!("no sweep preset '{other}' for {e}")));
        }
    };
    Ok(list)
}

/// Parses `start:step:stop` (inclusive), a comma list, or a preset name.
pub fn parse_sweep(text: &str, experiment: ExperimentId) -> Result<Vec<usize>> {
    let text = text.trim();
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad sweep value '{s}'")))
    };
    if text.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return preset(experiment, text);
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("range sweep must be start:step:stop, got '{text}'")));
        }
        let (a, step, b) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step == 0 || a > b {
            return Err(Error::Config(format!("empty sweep range '{text}'")));
        }
        return Ok((a..=b).step_by(step).collect());
    }
    text.split(',').map(num).collect()
}

/// One fitted (or fixed) model scored on the evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelOutcome {
    pub label: String,
    pub length_scale: f64,
    pub sigma_f: f64,
    pub sigma_n: f64,
    pub nlml: Option<f64>,
    pub fitted: bool,
    pub converged: Option<bool>,
    pub jitter: f64,
    pub clamped_variances: usize,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

impl ModelOutcome {
    fn failed(label: &str, err: &Error) -> Self {
        ModelOutcome {
            label: label.into(),
            length_scale: f64::NAN,
            sigma_f: f64::NAN,
            sigma_n: f64::NAN,
            nlml: None,
            fitted: false,
            converged: None,
            jitter: f64::NAN,
            clamped_variances: 0,
            metrics: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    /// `N`, or the map truncation level for the Weierstrass study.
    pub value: usize,
    pub n: usize,
    /// Extra configuration run alongside the sweep (not in the convergence table).
    pub spotlight: bool,
    pub models: Vec<ModelOutcome>,
}

impl SweepEntry {
    pub fn model(&self, label: &str) -> Option<&ModelOutcome> {
        self.models.iter().find(|m| m.label == label)
    }

    pub fn metrics(&self, label: &str) -> Option<&MetricsReport> {
        self.model(label).and_then(|m| m.metrics.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub entries: Vec<SweepEntry>,
    /// Scalar diagnostics keyed by name.
    pub extras: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn entry(&self, value: usize) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.value == value && !e.spotlight)
    }
}

struct Scored {
    outcome: ModelOutcome,
    gp: Option<TrainedGp>,
}

fn evaluation_grid(domain: &Domain, m: usize) -> Result<Vec<Vec<f64>>> {
    let design = match domain.dim() {
        1 => Design::Equispaced { n: m },
        d => Design::TensorGrid { counts: vec![m; d] },
    };
    generate(&design, domain)
}

fn training_set(cfg: &ExperimentConfig, target: TargetFunction, n: usize) -> Result<TrainingSet> {
    let domain = target.domain();
    let points = generate(&cfg.design.with_n(n, domain.dim()), &domain)?;
    let clean = points.iter().map(|x| target.eval(x)).collect::<Result<Vec<_>>>()?;
    let values = add_noise(&clean, cfg.noise_std, cfg.seed)?;
    TrainingSet::within(points, values, &domain)
}

fn choose_model(
    cfg: &ExperimentConfig,
    template: &Kernel,
    data: &TrainingSet,
    domain: &Domain,
) -> Result<(CovarianceModel, Option<FitResult>)> {
    if !cfg.fit {
        let (l, sf, sn) = cfg.fixed_values()?;
        let kernel = match template.length_scale() {
            Some(_) => template.with_length_scale(l)?,
            None => template.clone(),
        };
        return Ok((CovarianceModel::new(kernel, sf, sn)?, None));
    }
    let mut bounds = HyperBounds::default_for(data, domain.diameter());
    for (k, v) in &cfg.fixed {
        bounds = bounds.fix(k, *v)?;
    }
    let r = fit(template, data, &bounds, cfg.starts, cfg.seed)?;
    Ok((r.model(template)?, Some(r)))
}

fn score(
    cfg: &ExperimentConfig,
    label: &str,
    model: CovarianceModel,
    fitted: Option<FitResult>,
    data: &TrainingSet,
    target: TargetFunction,
    eval: &[Vec<f64>],
) -> Result<Scored> {
    let gp = TrainedGp::train(model, data.clone())?;
    let metrics = compute_metrics(&gp, &target, eval, cfg.include_noise)?;
    let model = gp.model();
    let outcome = ModelOutcome {
        label: label.into(),
        length_scale: model.kernel.length_scale().unwrap_or(f64::NAN),
        sigma_f: model.sigma_f,
        sigma_n: model.sigma_n,
        nlml: fitted.map(|f| f.nlml),
        fitted: fitted.is_some(),
        converged: fitted.map(|f| f.converged),
        jitter: gp.jitter_used(),
        clamped_variances: gp.clamped_variance_count(),
        metrics: Some(metrics),
        error: None,
    };
    Ok(Scored {
        outcome,
        gp: Some(gp),
    })
}

/// Fits (or fixes) hyperparameters for `template`, then scores the model.
fn fit_and_score(
    cfg: &ExperimentConfig,
    label: &str,
    template: &Kernel,
    data: &TrainingSet,
    target: TargetFunction,
    eval: &[Vec<f64>],
) -> Result<Scored> {
    let domain = target.domain();
    let (model, fitted) = choose_model(cfg, template, data, &domain)?;
    score(cfg, label, model, fitted, data, target, eval)
}

/// Like [`fit_and_score`], but a failure is recorded rather than returned.
fn fit_and_score_recorded(
    cfg: &ExperimentConfig,
    label: &str,
    template: &Kernel,
    data: &TrainingSet,
    target: TargetFunction,
    eval: &[Vec<f64>],
) -> Scored {
    fit_and_score(cfg, label, template, data, target, eval).unwrap_or_else(|e| Scored {
        outcome: ModelOutcome::failed(label, &e),
        gp: None,
    })
}

/// Scores a stationary model the same way the experiments do. Used to
/// check that a VSK with a zero map reproduces the plain kernel exactly.
pub fn score_kernel(
    cfg: &ExperimentConfig,
    label: &str,
    template: &Kernel,
    data: &TrainingSet,
) -> Result<ModelOutcome> {
    let target = cfg.experiment.target();
    let eval = evaluation_grid(&target.domain(), cfg.eval_points)?;
    Ok(fit_and_score(cfg, label, template, data, target, &eval)?.outcome)
}

/// Training data used by the experiments for size `n`.
pub fn experiment_data(cfg: &ExperimentConfig, n: usize) -> Result<TrainingSet> {
    training_set(cfg, cfg.experiment.target(), n)
}

// ---------------------------------------------------------------- output

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NaN".into())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let cols: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect())
        .collect();
    write_csv(path, &cols, &rows)
}

/// Writes the `N x N` training covariance `sigma_f^2 K + sigma_n^2 I` as CSV.
pub fn dump_covariance(model: &CovarianceModel, points: &[Vec<f64>], path: &Path) -> Result<()> {
    write_matrix(path, &model.covariance_matrix(points)?)
}

/// Reads a matrix written by [`dump_covariance`].
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let ncols = r.headers().map_err(csv_err)?.len();
    let mut values = Vec::new();
    let mut nrows = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for cell in rec.iter() {
            values.push(
                cell.parse::<f64>()
                    .map_err(|_| Error::Io(format!("bad number '{cell}' in {}", path.display())))?,
            );
        }
        nrows += 1;
    }
    if values.len() != nrows * ncols {
        return Err(Error::Io(format!("ragged matrix in {}", path.display())));
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}

struct Sink<'a> {
    dir: Option<&'a Path>,
    written: Vec<PathBuf>,
}

impl<'a> Sink<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        if let Some(d) = &cfg.out_dir {
            fs::create_dir_all(d)?;
        }
        Ok(Sink {
            dir: cfg.out_dir.as_deref(),
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.map(|d| d.join(name))
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        if let Some(p) = self.path(name) {
            write_csv(&p, header, rows)?;
            self.written.push(p);
        }
        Ok(())
    }

    fn covariance(&mut self, name: &str, model: &CovarianceModel, points: &[Vec<f64>]) -> Result<()> {
        if let Some(p) = self.path(name) {
            dump_covariance(model, points, &p)?;
            self.written.push(p);
        }
        Ok(())
    }

    fn enabled(&self) -> bool {
        self.dir.is_some()
    }
}

#[derive(Serialize)]
struct JitterRecord<'a> {
    value: usize,
    model: &'a str,
    jitter: f64,
    clamped_variances: usize,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: ExperimentId,
    version: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    jitter: Vec<JitterRecord<'a>>,
    extras: &'a BTreeMap<String, f64>,
    artifacts: Vec<String>,
}

fn finish(cfg: &ExperimentConfig, mut sink: Sink<'_>, mut report: ExperimentReport) -> Result<ExperimentReport> {
    if let Some(path) = sink.path("manifest.json") {
        let mut artifacts: Vec<String> = sink
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        artifacts.push("manifest.json".into());
        let manifest = Manifest {
            experiment: cfg.experiment,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            config: cfg,
            jitter: report
                .entries
                .iter()
                .flat_map(|e| {
                    e.models.iter().map(move |m| JitterRecord {
                        value: e.value,
                        model: &m.label,
                        jitter: m.jitter,
                        clamped_variances: m.clamped_variances,
                        error: m.error.as_deref(),
                    })
                })
                .collect(),
            extras: &report.extras,
            artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        sink.written.push(path);
    }
    report.artifacts = sink.written;
    Ok(report)
}

fn metrics_header() -> Vec<String> {
    header(&["model", "rmse", "mae", "avg_std", "max_std", "avg_var", "max_var", "m"])
}

fn metrics_row(o: &ModelOutcome) -> Vec<String> {
    let m = o.metrics.as_ref();
    vec![
        o.label.clone(),
        opt_num(m.map(|m| m.rmse)),
        opt_num(m.map(|m| m.mae)),
        opt_num(m.map(|m| m.avg_std)),
        opt_num(m.map(|m| m.max_std)),
        opt_num(m.map(|m| m.avg_var)),
        opt_num(m.map(|m| m.max_var)),
        m.map(|m| m.m.to_string()).unwrap_or_default(),
    ]
}

fn hyper_header(key: &str) -> Vec<String> {
    header(&[key, "model", "length_scale", "sigma_f", "sigma_n", "nlml", "converged", "jitter", "error"])
}

fn hyper_rows(entries: &[SweepEntry]) -> Vec<Vec<String>> {
    entries
        .iter()
        .flat_map(|e| {
            e.models.iter().map(move |m| {
                vec![
                    e.value.to_string(),
                    m.label.clone(),
                    num(m.length_scale),
                    num(m.sigma_f),
                    num(m.sigma_n),
                    opt_num(m.nlml),
                    m.converged.map(|c| c.to_string()).unwrap_or_default(),
                    num(m.jitter),
                    m.error.clone().unwrap_or_default(),
                ]
            })
        })
        .collect()
}

/// Per-point predictions for 1D models: `x, truth, mean_*, lower_*, upper_*`.
fn prediction_table(
    cfg: &ExperimentConfig,
    target: TargetFunction,
    eval: &[Vec<f64>],
    models: &[(&str, &TrainedGp)],
) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut cols = vec!["x".to_string(), "truth".to_string()];
    for (label, _) in models {
        for k in ["mean", "lower", "upper"] {
            cols.push(format!("{k}_{label}"));
        }
    }
    let preds = models
        .iter()
        .map(|(_, gp)| {
            eval.iter()
                .map(|x| gp.predict(x, cfg.alpha, cfg.include_noise))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = eval
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row: Vec<String> = x.iter().map(|v| num(*v)).collect();
            row.push(num(target.eval(x)?));
            for p in &preds {
                row.extend([num(p[i].mean), num(p[i].lower), num(p[i].upper)]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cols, rows))
}

fn training_rows(data: &TrainingSet) -> Vec<Vec<String>> {
    data.points()
        .iter()
        .zip(data.values())
        .map(|(x, y)| {
            let mut r: Vec<String> = x.iter().map(|v| num(*v)).collect();
            r.push(num(*y));
            r
        })
        .collect()
}

fn sample_table(grid: &[Vec<f64>], paths: &DMatrix<f64>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut cols = vec!["x".to_string()];
    cols.extend((0..paths.nrows()).map(|r| format!("path{r}")));
    let rows = grid
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let mut row = vec![num(x[0])];
            row.extend((0..paths.nrows()).map(|r| num(paths[(r, j)])));
            row
        })
        .collect();
    (cols, rows)
}

fn templates(cfg: &ExperimentConfig, target: TargetFunction) -> Result<(Kernel, Kernel)> {
    let standard = Kernel::stationary(cfg.family, cfg.length_scale)?;
    let vsk = Kernel::vsk(cfg.family, cfg.length_scale, cfg.vsk_map(target)?)?;
    Ok((standard, vsk))
}

// ---------------------------------------------------------------- runners

/// Fixed hyperparameters, standard against VSK, with covariance and
/// sample-path dumps.
pub fn run_jump_fixed(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let target = TargetFunction::Jump;
    let eval = evaluation_grid(&target.domain(), cfg.eval_points)?;
    let data = training_set(cfg, target, cfg.n)?;
    let (standard, vsk) = templates(cfg, target)?;
    let a = fit_and_score(cfg, "standard", &standard, &data, target, &eval)?;
    let b = fit_and_score(cfg, "vsk", &vsk, &data, target, &eval)?;

    let mut sink = Sink::new(cfg)?;
    let (ga, gb) = (a.gp.as_ref().expect("trained"), b.gp.as_ref().expect("trained"));
    sink.csv("metrics.csv", &metrics_header(), &[metrics_row(&a.outcome), metrics_row(&b.outcome)])?;
    sink.csv("training.csv", &header(&["x", "y"]), &training_rows(&data))?;
    if sink.enabled() {
        let (cols, rows) = prediction_table(cfg, target, &eval, &[("standard", ga), ("vsk", gb)])?;
        sink.csv("predictions.csv", &cols, &rows)?;
    }
    sink.covariance("cov_standard.csv", ga.model(), data.points())?;
    sink.covariance("cov_vsk.csv", gb.model(), data.points())?;
    if sink.enabled() && cfg.samples > 0 {
        for (i, (label, gp)) in [("standard", ga), ("vsk", gb)].into_iter().enumerate() {
            let seed = cfg.seed.wrapping_add(2 * i as u64);
            let prior = sample_paths(gp.model(), &eval, cfg.samples, seed, None)?;
            let post = sample_paths(gp.model(), &eval, cfg.samples, seed + 1, Some(&data))?;
            let (c, r) = sample_table(&eval, &prior);
            sink.csv(&format!("samples_prior_{label}.csv"), &c, &r)?;
            let (c, r) = sample_table(&eval, &post);
            sink.csv(&format!("samples_posterior_{label}.csv"), &c, &r)?;
        }
    }
    let report = ExperimentReport {
        experiment: cfg.experiment,
        entries: vec![SweepEntry {
            value: data.len(),
            n: data.len(),
            spotlight: false,
            models: vec![a.outcome, b.outcome],
        }],
        extras: BTreeMap::new(),
        artifacts: Vec::new(),
    };
    finish(cfg, sink, report)
}

/// Runs standard and VSK models for every `N`, in parallel, recording
/// failures per entry.
fn n_sweep(cfg: &ExperimentConfig, target: TargetFunction, values: &[(usize, bool)]) -> Result<Vec<(SweepEntry, Vec<Scored>, TrainingSet)>> {
    let eval = evaluation_grid(&target.domain(), cfg.eval_points)?;
    let (standard, vsk) = templates(cfg, target)?;
    values
        .par_iter()
        .map(|&(n, spotlight)| {
            let data = training_set(cfg, target, n)?;
            let scored = vec![
                fit_and_score_recorded(cfg, "standard", &standard, &data, target, &eval),
                fit_and_score_recorded(cfg, "vsk", &vsk, &data, target, &eval),
            ];
            let entry = SweepEntry {
                value: n,
                n: data.len(),
                spotlight,
                models: scored.iter().map(|s| s.outcome.clone()).collect(),
            };
            Ok((entry, scored, data))
        })
        .collect()
}

fn convergence_rows(entries: &[SweepEntry]) -> Vec<Vec<String>> {
    entries
        .iter()
        .filter(|e| !e.spotlight)
        .map(|e| {
            let (s, v) = (e.metrics("standard"), e.metrics("vsk"));
            let pick = |m: Option<&MetricsReport>, f: fn(&MetricsReport) -> f64| opt_num(m.map(f));
            vec![
                e.value.to_string(),
                pick(s, |m| m.rmse),
                pick(v, |m| m.rmse),
                pick(s, |m| m.mae),
                pick(v, |m| m.mae),
                pick(s, |m| m.avg_std),
                pick(v, |m| m.avg_std),
                pick(s, |m| m.max_std),
                pick(v, |m| m.max_std),
            ]
        })
        .collect()
}

fn convergence_header() -> Vec<String> {
    header(&[
        "N",
        "rmse_std",
        "rmse_vsk",
        "mae_std",
        "mae_vsk",
        "avgstd_std",
        "avgstd_vsk",
        "maxstd_std",
        "maxstd_vsk",
    ])
}

fn write_sweep_predictions(
    cfg: &ExperimentConfig,
    sink: &mut Sink<'_>,
    target: TargetFunction,
    results: &[(SweepEntry, Vec<Scored>, TrainingSet)],
) -> Result<()> {
    if !sink.enabled() {
        return Ok(());
    }
    let eval = evaluation_grid(&target.domain(), cfg.eval_points)?;
    for (entry, scored, _) in results {
        let models: Vec<(&str, &TrainedGp)> = scored
            .iter()
            .filter_map(|s| s.gp.as_ref().map(|g| (s.outcome.label.as_str(), g)))
            .collect();
        if models.is_empty() {
            continue;
        }
        let (cols, rows) = prediction_table(cfg, target, &eval, &models)?;
        sink.csv(&format!("predictions_N{}.csv", entry.value), &cols, &rows)?;
    }
    Ok(())
}

/// Hyperparameters fitted by maximum likelihood for every `N` in the sweep.
pub fn run_jump_mle(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let target = TargetFunction::Jump;
    let values: Vec<(usize, bool)> = cfg.sweep.iter().map(|&n| (n, false)).collect();
    let results = n_sweep(cfg, target, &values)?;
    let entries: Vec<SweepEntry> = results.iter().map(|r| r.0.clone()).collect();
    let mut sink = Sink::new(cfg)?;
    sink.csv("convergence.csv", &convergence_header(), &convergence_rows(&entries))?;
    sink.csv("hyperparameters.csv", &hyper_header("N"), &hyper_rows(&entries))?;
    write_sweep_predictions(cfg, &mut sink, target, &results)?;
    let report = ExperimentReport {
        experiment: cfg.experiment,
        entries,
        extras: BTreeMap::new(),
        artifacts: Vec::new(),
    };
    finish(cfg, sink, report)
}

/// Corner target with the cubic bump map, plus the `N = 20, 21` spotlight
/// runs and their covariance dumps.
pub fn run_corner(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let target = TargetFunction::Corner;
    let mut values: Vec<(usize, bool)> = cfg.sweep.iter().map(|&n| (n, false)).collect();
    values.extend([(20, true), (21, true)]);
    let results = n_sweep(cfg, target, &values)?;
    let entries: Vec<SweepEntry> = results.iter().map(|r| r.0.clone()).collect();

    let mut sink = Sink::new(cfg)?;
    sink.csv("convergence.csv", &convergence_header(), &convergence_rows(&entries))?;
    sink.csv("hyperparameters.csv", &hyper_header("N"), &hyper_rows(&entries))?;
    let spotlights: Vec<_> = results.iter().filter(|r| r.0.spotlight).collect();
    for (entry, scored, data) in &spotlights {
        for s in scored {
            if let Some(gp) = &s.gp {
                sink.covariance(
                    &format!("cov_{}_N{}.csv", s.outcome.label, entry.value),
                    gp.model(),
                    data.points(),
                )?;
            }
        }
    }
    let spot: Vec<(SweepEntry, Vec<Scored>, TrainingSet)> = results.into_iter().filter(|r| r.0.spotlight).collect();
    write_sweep_predictions(cfg, &mut sink, target, &spot)?;
    let report = ExperimentReport {
        experiment: cfg.experiment,
        entries,
        extras: BTreeMap::new(),
        artifacts: Vec::new(),
    };
    finish(cfg, sink, report)
}

/// Sweep over the truncation level of the Weierstrass scaling map; level 0
/// is the stationary baseline.
pub fn run_weierstrass(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let target = cfg.experiment.target();
    let (a, b) = match target {
        TargetFunction::Weierstrass { a, b, .. } => (a, b),
        _ => unreachable!("weierstrass target"),
    };
    let eval = evaluation_grid(&target.domain(), cfg.eval_points)?;
    let data = training_set(cfg, target, cfg.n)?;
    let results: Vec<Scored> = cfg
        .sweep
        .par_iter()
        .map(|&k| {
            let map = ScalingMap::weierstrass(a, b, k)?;
            let template = Kernel::vsk(cfg.family, cfg.length_scale, map)?;
            Ok(fit_and_score_recorded(cfg, "vsk", &template, &data, target, &eval))
        })
        .collect::<Result<Vec<_>>>()?;

    let entries: Vec<SweepEntry> = cfg
        .sweep
        .iter()
        .zip(&results)
        .map(|(&k, s)| SweepEntry {
            value: k,
            n: data.len(),
            spotlight: false,
            models: vec![s.outcome.clone()],
        })
        .collect();
    let rmse: Vec<f64> = entries
        .iter()
        .map(|e| e.metrics("vsk").map_or(f64::NAN, |m| m.rmse))
        .collect();
    let mut extras = BTreeMap::new();
    let monotone = rmse.windows(2).all(|w| w[1] <= w[0]);
    extras.insert("rmse_nonincreasing".into(), if monotone { 1.0 } else { 0.0 });

    let mut sink = Sink::new(cfg)?;
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let m = e.metrics("vsk");
            vec![
                e.value.to_string(),
                opt_num(m.map(|m| m.rmse)),
                opt_num(m.map(|m| m.mae)),
                opt_num(m.map(|m| m.avg_std)),
                opt_num(m.map(|m| m.max_std)),
            ]
        })
        .collect();
    sink.csv("convergence.csv", &header(&["K_vsk", "rmse", "mae", "avg_std", "max_std"]), &rows)?;
    sink.csv("hyperparameters.csv", &hyper_header("K_vsk"), &hyper_rows(&entries))?;
    if sink.enabled() {
        for (e, s) in entries.iter().zip(&results) {
            if let Some(gp) = &s.gp {
                let (means, vars) = gp.predict_many(&eval, cfg.include_noise)?;
                let rows = eval
                    .iter()
                    .zip(means.iter().zip(&vars))
                    .map(|(x, (m, v))| Ok(vec![num(x[0]), num(x[1]), num(target.eval(x)?), num(*m), num(v.sqrt())]))
                    .collect::<Result<Vec<_>>>()?;
                sink.csv(
                    &format!("predictions_K{}.csv", e.value),
                    &header(&["x1", "x2", "truth", "mean", "std"]),
                    &rows,
                )?;
            }
        }
    }
    let report = ExperimentReport {
        experiment: cfg.experiment,
        entries,
        extras,
        artifacts: Vec::new(),
    };
    finish(cfg, sink, report)
}

/// Stationary, VSK and the Gibbs kernel whose length field is induced by the
/// fitted VSK, on the same data; plus basis functions at the middle node.
pub fn run_gibbs_compare(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let target = TargetFunction::ExpCos;
    let eval = evaluation_grid(&target.domain(), cfg.eval_points)?;
    let data = training_set(cfg, target, cfg.n)?;
    let (standard, vsk) = templates(cfg, target)?;
    let a = fit_and_score(cfg, "standard", &standard, &data, target, &eval)?;
    let b = fit_and_score(cfg, "vsk", &vsk, &data, target, &eval)?;
    let vsk_model = b.gp.as_ref().expect("trained").model().clone();
    let l_hat = vsk_model.kernel.length_scale().expect("vsk length scale");
    let gibbs_kernel = Kernel::Gibbs(GibbsKernel::new(
        cfg.family,
        LengthField::VskInduced {
            length_scale: l_hat,
            scaling: cfg.vsk_map(target)?,
        },
    )?);
    let gibbs_model = CovarianceModel::new(gibbs_kernel, vsk_model.sigma_f, vsk_model.sigma_n)?;
    let c = score(cfg, "gibbs", gibbs_model, None, &data, target, &eval)?;

    let center = data.points()[data.len() / 2].clone();
    let kernels = [
        a.gp.as_ref().expect("trained").model().kernel.clone(),
        vsk_model.kernel.clone(),
        c.gp.as_ref().expect("trained").model().kernel.clone(),
    ];
    let profiles = kernels
        .iter()
        .map(|k| basis_function_profile(k, &center, &eval))
        .collect::<Result<Vec<_>>>()?;
    let max_diff = profiles[1]
        .iter()
        .zip(&profiles[2])
        .map(|(v, g)| (v - g).abs())
        .fold(0.0, f64::max);
    let mut extras = BTreeMap::new();
    extras.insert("basis_max_abs_diff_vsk_gibbs".into(), max_diff);
    extras.insert("basis_center".into(), center[0]);

    let mut sink = Sink::new(cfg)?;
    let outcomes = [&a.outcome, &b.outcome, &c.outcome];
    sink.csv(
        "metrics.csv",
        &metrics_header(),
        &outcomes.iter().map(|o| metrics_row(o)).collect::<Vec<_>>(),
    )?;
    sink.csv("training.csv", &header(&["x", "y"]), &training_rows(&data))?;
    sink.csv("hyperparameters.csv", &hyper_header("N"), &hyper_rows(&[SweepEntry {
        value: data.len(),
        n: data.len(),
        spotlight: false,
        models: outcomes.iter().map(|o| (*o).clone()).collect(),
    }]))?;
    if sink.enabled() {
        let gps = [("standard", &a), ("vsk", &b), ("gibbs", &c)]
            .map(|(l, s)| (l, s.gp.as_ref().expect("trained")));
        let (cols, rows) = prediction_table(cfg, target, &eval, &gps)?;
        sink.csv("reconstructions.csv", &cols, &rows)?;
        let rows: Vec<Vec<String>> = eval
            .iter()
            .enumerate()
            .map(|(i, x)| vec![num(x[0]), num(profiles[0][i]), num(profiles[1][i]), num(profiles[2][i])])
            .collect();
        sink.csv("basis.csv", &header(&["x", "standard", "vsk", "gibbs"]), &rows)?;
    }
    let report = ExperimentReport {
        experiment: cfg.experiment,
        entries: vec![SweepEntry {
            value: data.len(),
            n: data.len(),
            spotlight: false,
            models: vec![a.outcome, b.outcome, c.outcome],
        }],
        extras,
        artifacts: Vec::new(),
    };
    finish(cfg, sink, report)
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        ExperimentId::JumpFixed => run_jump_fixed(cfg),
        ExperimentId::JumpMle => run_jump_mle(cfg),
        ExperimentId::Weierstrass => run_weierstrass(cfg),
        ExperimentId::Corner => run_corner(cfg),
        ExperimentId::GibbsCompare => run_gibbs_compare(cfg),
    }
}
