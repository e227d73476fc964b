//! `ampvp`: run the AMP and ridge experiments from JSON configs.

mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use ampvp::montecarlo::{
    run_experiment, EntrywiseConfig, ExperimentConfig, ExperimentReport, Figure1Config, Figure1Report, LooRateConfig,
    OnsagerGapConfig, RidgeAmpConfig, RidgeFixedPointConfig, SeConfig, SummaryStats, TraceConfig,
};
use ampvp::ridge::{solve_fixed_point, write_fixed_point_csv};
use ampvp::trace_diag::TraceDiagnosticReport;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use output::{num, write_manifest, OutDir, Seeds};

#[derive(Parser)]
#[command(name = "ampvp", version, about = "AMP with variance profiles: state evolution, diagnostics and ridge experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Entrywise or averaged AMP statistics (config kind amp-entrywise or amp-averaged).
    AmpRun,
    /// Export the state-evolution variances σ²_{t,k}.
    Se,
    /// Leave-one-out representation error rate.
    LooCheck,
    /// Data-driven vs state-evolution Onsager terms.
    OnsagerGap,
    /// Normalized trace decay of the AMP matrix recursions.
    TraceCheck,
    /// Solve the ridge fixed-point equations and print b*.
    RidgeFixedpoint,
    /// AMP iterates converging to the closed-form ridge estimate.
    RidgeAmp,
    /// Ridge Monte Carlo with every test function and the fixed-point residuals.
    RidgeVerify,
    /// The three ridge panels: l2 error, coordinate mean and coordinate variance against λ.
    Figure1,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::AmpRun => "amp-run",
            Command::Se => "se",
            Command::LooCheck => "loo-check",
            Command::OnsagerGap => "onsager-gap",
            Command::TraceCheck => "trace-check",
            Command::RidgeFixedpoint => "ridge-fixedpoint",
            Command::RidgeAmp => "ridge-amp",
            Command::RidgeVerify => "ridge-verify",
            Command::Figure1 => "figure1",
        }
    }
}

#[derive(Args)]
struct Opts {
    /// JSON config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "ampvp-out")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Base seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (overrides AMP_THREADS; default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replicate or seed count override.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Problem size override; comma-separated where the experiment takes several.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Vec<usize>,
    /// Also render SVG figures from the CSVs.
    #[arg(long, global = true)]
    plot: bool,
}

fn threads(opts: &Opts) -> Result<usize> {
    if let Some(t) = opts.threads {
        return Ok(t);
    }
    match std::env::var("AMP_THREADS") {
        Ok(v) => v.trim().parse().with_context(|| format!("AMP_THREADS must be a thread count, got {v:?}")),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: acceptance check FAILED", cli.command.name());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let opts = &cli.opts;
    rayon::ThreadPoolBuilder::new().num_threads(threads(opts)?).build_global().context("cannot start the worker pool")?;
    let path = opts.config.as_deref();
    match cli.command {
        Command::Se => return run_se(config::load(path)?, opts),
        Command::RidgeFixedpoint => return run_fixedpoint(config::load(path)?, opts),
        _ => {}
    }
    let mut cfg = match cli.command {
        Command::AmpRun => {
            let cfg = match path {
                Some(p) => config::load_file::<ExperimentConfig>(p)?,
                None => ExperimentConfig::AmpEntrywise(EntrywiseConfig::default()),
            };
            if !matches!(cfg, ExperimentConfig::AmpEntrywise(_) | ExperimentConfig::AmpAveraged(_)) {
                bail!("amp-run needs kind amp-entrywise or amp-averaged, got {}", cfg.kind());
            }
            cfg
        }
        Command::LooCheck => ExperimentConfig::LooRate(config::load::<LooRateConfig>(path)?),
        Command::OnsagerGap => ExperimentConfig::OnsagerGap(config::load::<OnsagerGapConfig>(path)?),
        Command::TraceCheck => ExperimentConfig::TraceDecay(config::load::<TraceConfig>(path)?),
        Command::RidgeAmp => ExperimentConfig::RidgeAmpConvergence(config::load::<RidgeAmpConfig>(path)?),
        Command::RidgeVerify | Command::Figure1 => ExperimentConfig::RidgeFigure1(config::load::<Figure1Config>(path)?),
        Command::Se | Command::RidgeFixedpoint => unreachable!(),
    };
    if let Some(seed) = opts.seed {
        cfg.set_seed(seed);
    }
    if let Some(b) = opts.replicates {
        cfg.set_replicates(b)?;
    }
    if !opts.n.is_empty() {
        cfg.set_sizes(&opts.n)?;
    }
    let mut out = OutDir::new(&opts.out, opts.force)?;
    info!("{}: running {}", cli.command.name(), cfg.kind());
    let report = run_experiment(&cfg)?;
    let pass = emit(cli.command, &report, &mut out, opts.plot)?;
    write_manifest(&mut out, cli.command.name(), &cfg, seeds_of(&cfg), Some(pass))?;
    println!("{}: {}", cli.command.name(), if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn seeds_of(cfg: &ExperimentConfig) -> Seeds {
    match cfg {
        ExperimentConfig::AmpEntrywise(c) => Seeds::new(c.base_seed, c.replicates),
        ExperimentConfig::AmpAveraged(c) => Seeds::new(c.base_seed, c.seeds),
        ExperimentConfig::LooRate(c) => Seeds::new(c.base_seed, c.seeds),
        ExperimentConfig::OnsagerGap(c) => Seeds::new(c.base_seed, c.seeds),
        ExperimentConfig::TraceDecay(c) => Seeds::new(c.base_seed, c.seeds),
        ExperimentConfig::RidgeFigure1(c) => Seeds::new(c.base_seed, c.replicates),
        ExperimentConfig::RidgeAmpConvergence(c) => Seeds::new(c.base_seed, c.replicates),
    }
}

fn emit(command: Command, report: &ExperimentReport, out: &mut OutDir, plot: bool) -> Result<bool> {
    match report {
        ExperimentReport::AmpEntrywise(r) => {
            out.summary("summary.csv", &r.stats)?;
            let rows = r.ks.iter().map(|(k, sigma, c)| {
                vec![k.to_string(), num(*sigma), num(c.statistic), num(c.threshold), num(c.alpha), c.pass.to_string()]
            });
            out.csv("ks.csv", &["k", "sigma", "statistic", "threshold", "alpha", "pass"], rows)?;
            print_stats(&r.stats);
        }
        ExperimentReport::AmpAveraged(r) => {
            out.summary("summary.csv", &r.stats)?;
            print_stats(&r.stats);
        }
        ExperimentReport::LooRate(r) => {
            let rows = r.n_list.iter().zip(&r.max_errors).flat_map(|(n, errs)| {
                errs.iter().enumerate().map(move |(s, e)| vec![n.to_string(), s.to_string(), num(*e)])
            });
            out.csv("loo.csv", &["n", "seed_index", "max_error"], rows)?;
            let rows = r.n_list.iter().zip(&r.medians).map(|(n, m)| vec![n.to_string(), num(*m)]);
            out.csv("loo_medians.csv", &["n", "median_max_error"], rows)?;
            println!("t = {}: slope {:.4} ± {:.4}, t = 0 error {:e}", r.t, r.slope, r.half_width, r.t0_max_error);
        }
        ExperimentReport::OnsagerGap(r) => {
            let rows = r.gaps_small.iter().zip(&r.gaps_large).enumerate().flat_map(|(s, (a, b))| {
                a.iter().zip(b).enumerate().map(move |(t, (x, y))| vec![s.to_string(), t.to_string(), num(*x), num(*y)])
            });
            out.csv("gaps.csv", &["seed_index", "t", "gap_small", "gap_large"], rows)?;
            println!("wins {} ({:.2}), linear gap {:e}", r.wins, r.win_fraction, r.linear_max_gap);
        }
        ExperimentReport::TraceDecay(r) => {
            let cases: Vec<(&str, &TraceDiagnosticReport)> = std::iter::once(("main", &r.main)).chain(r.chebyshev.iter().map(|c| ("chebyshev", c))).collect();
            let rows = cases.iter().flat_map(|(case, rep)| {
                rep.stats.iter().map(move |s| {
                    vec![
                        case.to_string(),
                        s.n.to_string(),
                        s.d0.clone(),
                        s.s.to_string(),
                        num(s.mean_abs_trace),
                        num(s.stderr_abs),
                        num(s.mean_trace),
                        num(s.stderr),
                        s.seeds.to_string(),
                    ]
                })
            });
            out.csv("traces.csv", &["case", "n", "d0", "s", "mean_abs_trace", "stderr_abs", "mean_trace", "stderr", "seeds"], rows)?;
            let rows = cases.iter().flat_map(|(case, rep)| rep.slopes.iter().map(move |(d0, s, h)| vec![case.to_string(), d0.clone(), num(*s), num(*h)]));
            out.csv("slopes.csv", &["case", "d0", "slope", "half_width"], rows)?;
            for (d0, s, h) in &r.main.slopes {
                println!("d0 {d0}: slope {s:.4} ± {h:.4}");
            }
        }
        ExperimentReport::RidgeFigure1(r) if command == Command::Figure1 => {
            let panels = [("figure1_l2.csv", "l2 error"), ("figure1_mean.csv", "coordinate mean"), ("figure1_var.csv", "coordinate variance")];
            let pick: [fn(&ampvp::montecarlo::Figure1Row) -> &SummaryStats; 3] = [|r| &r.l2, |r| &r.coord_mean, |r| &r.coord_var];
            for ((name, _), f) in panels.iter().zip(pick) {
                let rows = r.rows.iter().map(|row| {
                    let s = f(row);
                    vec![num(row.lambda), num(s.mean), s.stderr.map(num).unwrap_or_default(), num(s.theory), s.zscore.map(num).unwrap_or_default()]
                });
                out.csv(name, &["lambda", "empirical", "stderr", "theory", "zscore"], rows)?;
            }
            if plot {
                let paths: Vec<PathBuf> = panels.iter().map(|(p, _)| out.path(p)).collect();
                let dest = out.claim("figure1.svg")?;
                plot::figure1([(&paths[0], panels[0].1), (&paths[1], panels[1].1), (&paths[2], panels[2].1)], &dest)?;
            }
            print_figure1(r);
        }
        ExperimentReport::RidgeFigure1(r) => {
            let stats: Vec<SummaryStats> =
                r.rows.iter().flat_map(|row| [row.l2.clone(), row.coord_mean.clone(), row.coord_var.clone()].into_iter().chain(row.psis.iter().cloned())).collect();
            out.summary("summary.csv", &stats)?;
            let rows = r.rows.iter().map(|row| {
                let fp = &row.fixed_point;
                vec![num(row.lambda), num(fp.residuals.1), num(fp.residuals.0), fp.b_iterations.to_string(), fp.gamma_iterations.to_string()]
            });
            out.csv("residuals.csv", &["lambda", "b_residual", "gamma_residual", "b_iterations", "gamma_iterations"], rows)?;
            print_stats(&stats);
        }
        ExperimentReport::RidgeAmpConvergence(r) => {
            let rows = r.runs.iter().flat_map(|run| run.errors.iter().enumerate().map(move |(t, e)| vec![run.seed.to_string(), t.to_string(), num(*e)]));
            out.csv("errors.csv", &["seed", "t", "error"], rows)?;
            for run in &r.runs {
                println!("seed {}: final error {:e}, tail slope {:.4}", run.seed, run.errors.last().copied().unwrap_or(f64::NAN), run.tail_slope);
            }
            if plot {
                let dest = out.claim("ridge_amp.svg")?;
                plot::ridge_amp(&out.path("errors.csv"), &dest)?;
            }
        }
    }
    if plot && !matches!(command, Command::Figure1 | Command::RidgeAmp) {
        log::warn!("{} has no figure; --plot ignored", command.name());
    }
    Ok(report.pass())
}

fn print_stats(stats: &[SummaryStats]) {
    for s in stats {
        let z = s.zscore.map(|z| format!("{z:+.2}")).unwrap_or_else(|| "n/a".into());
        println!("{:<18} {:<12} {:<22} emp {:>12.6e} theory {:>12.6e} z {z}{}", s.experiment, s.target, s.psi, s.mean, s.theory, if s.flagged { "  FLAG" } else { "" });
    }
}

fn print_figure1(r: &Figure1Report) {
    for row in &r.rows {
        let z = |s: &SummaryStats| s.zscore.map(|z| format!("{z:+.2}")).unwrap_or_else(|| "n/a".into());
        println!("lambda {:>8.4}: l2 z {}, mean z {}, var z {}", row.lambda, z(&row.l2), z(&row.coord_mean), z(&row.coord_var));
    }
}

fn run_se(mut cfg: SeConfig, opts: &Opts) -> Result<bool> {
    if let Some(&n) = opts.n.first() {
        cfg.n = n;
    }
    if opts.seed.is_some() || opts.replicates.is_some() {
        log::warn!("se is deterministic; --seed and --replicates are ignored");
    }
    let mut out = OutDir::new(&opts.out, opts.force)?;
    let (_, se) = cfg.setup.build(cfg.n, cfg.horizon)?;
    let rows = (0..=cfg.horizon).flat_map(|t| {
        let se = &se;
        (0..cfg.n).map(move |k| vec![t.to_string(), k.to_string(), num(se.variance(t, k))])
    });
    out.csv("se.csv", &["t", "k", "sigma2"], rows)?;
    write_manifest(&mut out, "se", &cfg, Seeds::none(), None)?;
    println!("se: wrote {} rows", (cfg.horizon + 1) * cfg.n);
    Ok(true)
}

fn run_fixedpoint(mut cfg: RidgeFixedPointConfig, opts: &Opts) -> Result<bool> {
    if let Some(&n) = opts.n.first() {
        cfg.problem.n = n;
    }
    if opts.seed.is_some() || opts.replicates.is_some() {
        log::warn!("ridge-fixedpoint is deterministic; --seed and --replicates are ignored");
    }
    let mut out = OutDir::new(&opts.out, opts.force)?;
    let problem = cfg.problem.problem(cfg.lambda)?;
    let fp = solve_fixed_point(&problem, &cfg.solver)?;
    let mut buf = Vec::new();
    write_fixed_point_csv(&fp, &mut buf)?;
    out.write("fixedpoint.csv", &buf)?;
    write_manifest(&mut out, "ridge-fixedpoint", &cfg, Seeds::none(), None)?;
    let (lo, hi) = fp.b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        println!("b* = {lo:.10} for every k ({} coordinates)", fp.b.len());
    } else {
        println!("b* ranges over [{lo:.10}, {hi:.10}] ({} coordinates)", fp.b.len());
    }
    println!("residuals: b {:e}, gamma {:e}", fp.residuals.1, fp.residuals.0);
    Ok(true)
}
