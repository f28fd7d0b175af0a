use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vskgp::analysis::{
    decoupling_ratio, dyadic_steps, gibbs_equivalence_residual, local_metric_residual,
    paciorek_equivalence_residual, power_bounds_check, OrderEstimate,
};
use vskgp::designs::{generate, DesignKind};
use vskgp::experiments::{parse_sweep, run, ExperimentConfig, ExperimentId, ExperimentReport};
use vskgp::kernels::{KernelConfig, StationaryKernel, VskKernel};
use vskgp::{Error, Kernel, PsiSpec, RadialFamily, Result, TargetFunction};

#[derive(Parser)]
#[command(name = "vskgp", version, about = "Gaussian process regression with variably scaled kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the experiments and write CSV/JSON output.
    Run(RunArgs),
    /// Numerical diagnostics for the kernel theory.
    Diag(DiagArgs),
}

#[derive(Args)]
struct RunArgs {
    /// jump_fixed | jump_mle | weierstrass | corner | gibbs_compare
    experiment: String,
    /// Training size (per-axis count for grid designs).
    #[arg(long)]
    n: Option<usize>,
    /// start:step:stop, a comma list, or a preset (paper, tables, quick).
    #[arg(long)]
    sweep: Option<String>,
    /// Family name or `{family = "...", lengthscale = ..., vsk = "..."}`.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fit hyperparameters by maximum likelihood.
    #[arg(long)]
    fit: bool,
    /// Use the configured hyperparameters instead of fitting.
    #[arg(long, conflicts_with = "fit")]
    no_fit: bool,
    /// Pin a hyperparameter, e.g. `--fix sigma_n=0`.
    #[arg(long, value_name = "K=V")]
    fix: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    eval_points: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Report latent-function variance (no noise term).
    #[arg(long)]
    latent: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DiagArgs {
    /// local-metric | gibbs-equiv | paciorek-equiv | power-bounds | decoupling
    which: String,
    #[arg(long, default_value = "gaussian")]
    family: String,
    #[arg(long, default_value_t = 1.0)]
    lengthscale: f64,
    #[arg(long, default_value = "sin")]
    psi: String,
    /// Target that `--psi target` refers to (jump, corner, expcos, weierstrass).
    #[arg(long, default_value = "jump")]
    target: String,
    /// Base point, comma separated.
    #[arg(long, default_value = "0.3", allow_hyphen_values = true)]
    x: String,
    /// Step direction, comma separated (defaults to the first axis).
    #[arg(long, allow_hyphen_values = true)]
    direction: Option<String>,
    #[arg(long, default_value_t = 3)]
    from: u32,
    #[arg(long, default_value_t = 12)]
    to: u32,
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value = "equispaced")]
    design: String,
    #[arg(long, default_value_t = 500)]
    probes: usize,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    left: f64,
    #[arg(long, default_value_t = 0.6, allow_hyphen_values = true)]
    right: f64,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_target(s: &str) -> Result<TargetFunction> {
    match s.trim().to_ascii_lowercase().as_str() {
        "jump" => Ok(TargetFunction::Jump),
        "corner" => Ok(TargetFunction::Corner),
        "expcos" => Ok(TargetFunction::ExpCos),
        "weierstrass" => Ok(TargetFunction::weierstrass_default()),
        other => Err(Error::Config(format!("unknown target '{other}'"))),
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad coordinate '{v}'")))
        })
        .collect()
}

fn parse_fix(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--fix expects k=v, got '{s}'")))?;
    let v = v
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("bad value in --fix '{s}'")))?;
    Ok((k.trim().to_string(), v))
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let id: ExperimentId = a.experiment.parse()?;
    let mut cfg = ExperimentConfig::defaults(id);
    if let Some(k) = &a.kernel {
        let kc = KernelConfig::parse(k)?;
        cfg.family = kc.family()?;
        if k.contains('{') {
            cfg.length_scale = kc.lengthscale;
            if kc.vsk.is_some() {
                cfg.psi = kc.vsk.clone();
            }
        }
    }
    if let Some(p) = &a.psi {
        cfg.psi = Some(p.clone());
    }
    if let Some(d) = &a.design {
        cfg.design = d.parse::<DesignKind>()?;
    }
    if let Some(n) = a.n {
        cfg.n = n;
        if !id.sweeps_map() {
            cfg.sweep = vec![n];
        }
    }
    if let Some(s) = &a.sweep {
        cfg.sweep = parse_sweep(s, id)?;
    }
    if let Some(v) = a.noise_std {
        cfg.noise_std = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.fit {
        cfg.fit = true;
    }
    if a.no_fit {
        cfg.fit = false;
    }
    cfg.fixed = a.fix.iter().map(|s| parse_fix(s)).collect::<Result<_>>()?;
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.starts {
        cfg.starts = v;
    }
    if let Some(v) = a.eval_points {
        cfg.eval_points = v;
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    cfg.include_noise = !a.latent;
    cfg.out_dir = a.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &ExperimentReport) {
    let key = if report.experiment.sweeps_map() { "K_vsk" } else { "N" };
    println!(
        "{:>6}  {:<9} {:>12} {:>12} {:>12} {:>12}",
        key, "model", "rmse", "max_err", "avg_std", "max_std"
    );
    for e in &report.entries {
        for m in &e.models {
            match &m.metrics {
                Some(r) => println!(
                    "{:>6}  {:<9} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
                    e.value, m.label, r.rmse, r.mae, r.avg_std, r.max_std
                ),
                None => println!(
                    "{:>6}  {:<9} failed: {}",
                    e.value,
                    m.label,
                    m.error.as_deref().unwrap_or("unknown")
                ),
            }
        }
    }
    for (k, v) in &report.extras {
        println!("{k} = {v}");
    }
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let report = run(&cfg)?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?
        );
    } else {
        print_report(&report);
    }
    let failures = report
        .entries
        .iter()
        .flat_map(|e| &e.models)
        .filter(|m| m.error.is_some())
        .count();
    if failures > 0 {
        eprintln!("warning: {failures} model fit(s) failed; see hyperparameters.csv");
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, text: String) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn order_csv(o: &OrderEstimate) -> String {
    let mut s = String::from("h,residual\n");
    for (h, e) in o.steps.iter().zip(&o.residuals) {
        s.push_str(&format!("{h:.16e},{e:.16e}\n"));
    }
    s
}

fn cmd_diag(a: &DiagArgs) -> Result<()> {
    let family: RadialFamily = a.family.parse()?;
    let target = parse_target(&a.target)?;
    let map = a.psi.parse::<PsiSpec>()?.resolve(target);
    let base = StationaryKernel::new(family, a.lengthscale)?;
    let vsk = VskKernel::new(base.clone(), map);
    let x = parse_point(&a.x)?;
    let direction = match &a.direction {
        Some(d) => parse_point(d)?,
        None => {
            let mut d = vec![0.0; x.len()];
            d[0] = 1.0;
            d
        }
    };
    if a.from >= a.to {
        return Err(Error::Config("--from must be below --to".into()));
    }
    let steps = dyadic_steps(a.from, a.to);
    let report_order = |o: &OrderEstimate| match o.order {
        Some(p) => eprintln!("fitted order = {p:.4}"),
        None => eprintln!("fitted order = n/a (max residual {:.3e})", o.max_residual()),
    };
    match a.which.as_str() {
        "local-metric" => {
            let o = local_metric_residual(&vsk, &x, &direction, &steps)?;
            report_order(&o);
            emit(&a.out, order_csv(&o))
        }
        "paciorek-equiv" => {
            let o = paciorek_equivalence_residual(&vsk, &x, &direction, &steps)?;
            report_order(&o);
            emit(&a.out, order_csv(&o))
        }
        "gibbs-equiv" => {
            if x.len() != 1 {
                return Err(Error::Config("gibbs-equiv needs a one-dimensional point".into()));
            }
            let o = gibbs_equivalence_residual(&vsk, x[0], &steps)?;
            report_order(&o);
            emit(&a.out, order_csv(&o))
        }
        "power-bounds" => {
            let domain = target.domain();
            let design: DesignKind = a.design.parse()?;
            let points = generate(&design.with_n(a.n, domain.dim()), &domain)?;
            let probes = generate(&DesignKind::Equispaced.with_n(a.probes, 1), &domain)
                .or_else(|_| generate(&DesignKind::Halton.with_n(a.probes, domain.dim()), &domain))?;
            let r = power_bounds_check(&Kernel::Stationary(base), &Kernel::Vsk(vsk), &points, &probes)?;
            let mut s = String::from("probe,lower_slack,upper_slack\n");
            for row in &r.rows {
                let p: Vec<String> = row.probe.iter().map(|v| format!("{v:.16e}")).collect();
                s.push_str(&format!(
                    "{},{:.16e},{:.16e}\n",
                    p.join(" "),
                    row.lower_slack,
                    row.upper_slack
                ));
            }
            emit(&a.out, s)?;
            eprintln!(
                "hypotheses met: {}; min lower slack {:.3e}; min upper slack {:.3e}",
                r.hypotheses_met, r.min_lower_slack, r.min_upper_slack
            );
            if r.hypotheses_met && !r.holds(1e-8) {
                return Err(Error::Fit("power bounds violated although hypotheses hold".into()));
            }
            Ok(())
        }
        "decoupling" => {
            let r = decoupling_ratio(&vsk, &[a.left], &[a.right])?;
            emit(&a.out, format!("ratio\n{r:.16e}\n"))
        }
        other => Err(Error::Config(format!("unknown diagnostic '{other}'"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Diag(a) => cmd_diag(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
