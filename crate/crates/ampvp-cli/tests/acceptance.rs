//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ampvp::amp::{asym_to_sym_embed, AsymmetricAmp, OnsagerMode};
use ampvp::ensembles::{sample_rectangular, ProfileKind, VarianceProfile};
use ampvp::montecarlo::*;
use ampvp::nonlinearity::{NonlinearityFamily as Nf, NonlinearitySchedule, ScalarNonlinearity};
use ampvp::quadrature::{QuadratureRule, DEFAULT_ORDER};
use ampvp::ridge::{dr_metric_vec, phi_map, psi_map, solve_b, solve_fixed_point, b_equation_residual, gamma_equation_residual, SolverOptions};
use ampvp::state_evolution::se_symmetric_with;
use ndarray::{Array1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn max_abs_diff(x: &Array1<f64>, y: &Array1<f64>) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn worst_z<'a>(stats: impl Iterator<Item = &'a SummaryStats>) -> f64 {
    stats.map(|s| s.zscore.map_or(f64::INFINITY, f64::abs)).fold(0.0, f64::max)
}

fn figure1() -> Outcome {
    let cfg = Figure1Config::default();
    assert!(cfg.replicates == 5000 && cfg.lambdas.len() == 8 && cfg.problem.m == 100 && cfg.problem.n == 200);
    let r = run_figure1(&cfg).map_err(err)?;
    let z = worst_z(r.rows.iter().flat_map(|row| [&row.l2, &row.coord_mean, &row.coord_var]));
    let in_range = r.rows.iter().all(|row| (0.1 - 1e-12..=10.0 + 1e-9).contains(&row.lambda));
    Ok((r.pass && z <= 3.0 && in_range, format!("max |z| {z:.2} over {} penalties", r.rows.len())))
}

fn scalar_oracle() -> Outcome {
    let spec = RidgeSpec { m: 100, n: 200, profile: ProfileGen::Constant { value: 1.0 }, ..Default::default() };
    let p = spec.problem(1.0).map_err(err)?;
    let opts = SolverOptions::default();
    // u² + 2u − 1 = 0 at λ = 1, n/m = 2
    let b_oracle = 1.0 - (2f64.sqrt() - 1.0);
    let sol = solve_b(&p, &opts).map_err(err)?;
    let b_err = sol.b.iter().map(|b| (b - b_oracle).abs()).fold(0.0, f64::max);
    let fp = solve_fixed_point(&p, &opts).map_err(err)?;
    let r1 = b_equation_residual(&p, fp.b.view());
    let r2 = gamma_equation_residual(&p, fp.b.view(), fp.gamma.view());
    Ok((b_err <= 1e-8 && r1 <= 1e-9 && r2 <= 1e-9, format!("b* error {b_err:.1e}, residuals {r1:.1e} / {r2:.1e}")))
}

fn loo() -> Outcome {
    let cfg = LooRateConfig::default();
    assert!(cfg.seeds >= 50 && cfg.horizon == 3 && cfg.n_list == [200, 400, 800]);
    let r = run_loo_rate(&cfg).map_err(err)?;
    Ok((r.slope <= -0.3 && r.t0_max_error == 0.0, format!("slope {:.3}, t = 0 error {:e}", r.slope, r.t0_max_error)))
}

fn entrywise() -> Outcome {
    let cfg = EntrywiseConfig::default();
    assert!(cfg.n == 500 && cfg.horizon == 3 && cfg.replicates == 2000 && cfg.coords.len() == 10 && cfg.alpha == 0.01);
    let r = run_entrywise(&cfg).map_err(err)?;
    let z = worst_z(r.stats.iter().filter(|s| s.psi == "square"));
    let ks_ok = r.ks.iter().all(|k| k.2.pass);
    let worst_ks = r.ks.iter().map(|k| k.2.statistic / k.2.threshold).fold(0.0, f64::max);
    Ok((ks_ok && z <= 3.0, format!("max |z| {z:.2}, worst KS D/threshold {worst_ks:.2}")))
}

fn averaged() -> Outcome {
    let cfg = AveragedConfig::default();
    let r = run_averaged(&cfg).map_err(err)?;
    let names: Vec<&str> = r.stats.iter().map(|s| s.psi.as_str()).collect();
    let z = worst_z(r.stats.iter());
    Ok((z <= 3.0 && names.contains(&"square") && names.contains(&"huber(1)"), format!("max |z| {z:.2} over {names:?}")))
}

fn embedding() -> Outcome {
    let mut worst = 0.0f64;
    for (m, n, horizon) in [(40, 60, 4), (100, 200, 6)] {
        let profile = VarianceProfile::iid_abs_gaussian(m, n, 1.0, 1.0, 3, ProfileKind::Rectangular).map_err(err)?;
        let f = NonlinearitySchedule::uniform(Nf::ScaledTanh { alpha: 1.0, beta: 1.0 }, horizon, n).map_err(err)?;
        let g = NonlinearitySchedule::uniform(Nf::ScaledTanh { alpha: 1.5, beta: 0.8 }, horizon + 1, m).map_err(err)?;
        let v0 = Array1::from_shape_fn(n, |i| 1.0 + 0.5 * (0.3 * i as f64).sin());
        let amp = AsymmetricAmp::new(profile, f, g, v0).map_err(err)?;
        let a = sample_rectangular(amp.profile(), 5).map_err(err)?;
        let direct = amp.run(&a, horizon, &OnsagerMode::DataDriven, None).map_err(err)?;
        let emb = asym_to_sym_embed(&amp).map_err(err)?;
        let abar = emb.embed_matrix(&a).map_err(err)?;
        let mode = emb.embed_onsager(&OnsagerMode::DataDriven).map_err(err)?;
        let embedded = emb.amp.run(&abar, emb.horizon(horizon), &mode, None).map_err(err)?;
        let proj = emb.project(&embedded).map_err(err)?;
        for t in 0..=horizon {
            worst = worst.max(max_abs_diff(&proj.v[t], &direct.v[t]));
            if t > 0 {
                worst = worst.max(max_abs_diff(&proj.u[t], &direct.u[t]));
            }
        }
    }
    Ok((worst <= 1e-12, format!("max elementwise difference {worst:.1e}")))
}

fn onsager_gap() -> Outcome {
    let cfg = OnsagerGapConfig::default();
    assert!(cfg.seeds == 50 && cfg.n_small == 200 && cfg.n_large == 800);
    let r = run_onsager_gap(&cfg).map_err(err)?;
    Ok((r.win_fraction >= 0.8 && r.linear_max_gap == 0.0, format!("{}/{} seeds shrink, linear gap {:e}", r.wins, cfg.seeds, r.linear_max_gap)))
}

fn trace_decay() -> Outcome {
    let cfg = TraceConfig::default();
    assert!(cfg.seeds == 50 && cfg.t == 3 && cfg.d0.len() == 2);
    let r = run_trace(&cfg).map_err(err)?;
    let slopes: Vec<String> = r.main.slopes.iter().map(|(d, s, _)| format!("{d} {s:.3}")).collect();
    let cheb = r.chebyshev.as_ref().ok_or("Chebyshev case missing")?;
    let cheb_z = cheb.stats.iter().filter(|s| s.s >= 1).map(|s| if s.mean_trace == 0.0 { 0.0 } else { (s.mean_trace / s.stderr).abs() }).fold(0.0, f64::max);
    let slopes_ok = r.main.slopes.len() == 2 && r.main.slopes.iter().all(|&(_, s, _)| (-0.8..=-0.25).contains(&s));
    Ok((r.pass && slopes_ok && cheb_z <= 3.0, format!("slopes [{}], Chebyshev max |mean|/stderr {cheb_z:.2}", slopes.join(", "))))
}

fn ridge_amp() -> Outcome {
    let cfg = RidgeAmpConfig::default();
    assert!(cfg.horizon == 60 && cfg.tol == 1e-6);
    let start = Instant::now();
    let r = run_ridge_amp(&cfg).map_err(err)?;
    let per = start.elapsed().as_secs_f64() / cfg.replicates as f64;
    let worst = r.runs.iter().map(|run| *run.errors.last().unwrap()).fold(0.0, f64::max);
    let slope = r.runs.iter().map(|run| run.tail_slope).fold(f64::NEG_INFINITY, f64::max);
    Ok((r.pass && worst <= 1e-6 && slope < 0.0, format!("final error {worst:.1e}, slowest tail slope {slope:.3}, {per:.2}s per replicate")))
}

fn contraction() -> Outcome {
    let p = RidgeSpec::default().problem(1.0).map_err(err)?;
    let lam = p.lambda();
    let rows = p.weights().sum_axis(Axis(1));
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut phi_worst = 0.0f64;
    for _ in 0..100 {
        // both points in the invariant box [1/(λ + rowsum), 1/λ]
        let u = rows.mapv(|r| rng.random_range(1.0 / (lam + r)..1.0 / lam));
        let w = rows.mapv(|r| rng.random_range(1.0 / (lam + r)..1.0 / lam));
        let before = dr_metric_vec(u.view(), w.view()).map_err(err)?;
        let after = dr_metric_vec(phi_map(u.view(), &p).map_err(err)?.view(), phi_map(w.view(), &p).map_err(err)?.view()).map_err(err)?;
        phi_worst = phi_worst.max(after / before);
    }
    let fp = solve_fixed_point(&p, &SolverOptions::default()).map_err(err)?;
    let bmax = fp.b.iter().copied().fold(0.0, f64::max);
    let mut psi_worst = 0.0f64;
    for _ in 0..100 {
        let z1 = Array1::from_shape_simple_fn(p.mu0().len(), || rng.random_range(0.0..10.0));
        let z2 = Array1::from_shape_simple_fn(p.mu0().len(), || rng.random_range(0.0..10.0));
        let out = psi_map(z1.view(), fp.b.view(), fp.tau.view(), &p).map_err(err)? - psi_map(z2.view(), fp.b.view(), fp.tau.view(), &p).map_err(err)?;
        let num = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let den = (&z1 - &z2).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        psi_worst = psi_worst.max(num / den);
    }
    Ok((phi_worst < 1.0 && psi_worst <= bmax + 1e-12, format!("Phi ratio {phi_worst:.4}, Psi ratio {psi_worst:.4} vs max b {bmax:.4}")))
}

fn run_cli(dir: &Path, args: &[&str], threads: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ampvp"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("AMP_THREADS", threads)
        .env("RUST_LOG", "warn")
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(err)?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("ampvp {args:?} exited with {status}"))
    }
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a).map_err(err)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>().map_err(err)?;
    names.sort();
    for name in &names {
        if std::fs::read(a.join(name)).map_err(err)? != std::fs::read(b.join(name)).map_err(err)? {
            return Err(format!("{name:?} differs between runs"));
        }
    }
    Ok(names.len())
}

fn hygiene() -> Outcome {
    // quadrature doubling on the smooth families
    let n = 40;
    let profile = VarianceProfile::<f64>::block(&[20, 20], &[20, 20], &[vec![1.0, 0.5], vec![0.5, 1.5]], ProfileKind::Symmetric).map_err(err)?;
    let z0 = Array1::from_shape_fn(n, |i| 1.0 + 0.5 * (0.7 * i as f64).sin());
    let mut quad = 0.0f64;
    for fam in [Nf::ScaledTanh { alpha: 1.0, beta: 1.0 }, Nf::Affine { a: 0.8, b: 0.2 }, Nf::RidgeProxAffine { lambda: 0.5, tau: 2.0, center: 0.3 }] {
        let sched = NonlinearitySchedule::uniform(fam, 3, n).map_err(err)?;
        let a = se_symmetric_with(&QuadratureRule::gauss_hermite(DEFAULT_ORDER), &profile, &sched, z0.view(), 3).map_err(err)?;
        let b = se_symmetric_with(&QuadratureRule::gauss_hermite(2 * DEFAULT_ORDER), &profile, &sched, z0.view(), 3).map_err(err)?;
        quad = quad.max((a.cov_all() - b.cov_all()).iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    // derivatives against central differences, every family
    let families = [
        Nf::Identity,
        Nf::Affine { a: -1.5, b: 0.4 },
        Nf::ScaledTanh { alpha: 1.3, beta: 0.7 },
        Nf::SmoothSoftThreshold { theta: 1.0, delta: 0.1 },
        Nf::RidgeProxAffine { lambda: 0.5, tau: 2.0, center: 0.3 },
    ];
    let h = 1e-5;
    let mut fd = 0.0f64;
    for f in &families {
        for i in -40..=40 {
            let x = i as f64 * 0.0997 + 0.013;
            let approx = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            fd = fd.max((approx - f.deriv(x)).abs() / f.deriv(x).abs().max(1.0));
        }
    }
    // byte-identical CLI outputs across runs and thread counts
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut files = 0;
    for (i, args) in [&["se"][..], &["ridge-amp", "--replicates", "2"][..], &["figure1", "--replicates", "50"][..]].iter().enumerate() {
        let (a, b) = (tmp.path().join(format!("{i}a")), tmp.path().join(format!("{i}b")));
        run_cli(&a, args, "1")?;
        run_cli(&b, args, "2")?;
        files += same_files(&a, &b)?;
    }
    Ok((quad <= 1e-9 && fd <= 1e-6, format!("quadrature doubling {quad:.1e}, derivative error {fd:.1e}, {files} CLI files byte-identical")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("ridge Monte Carlo vs theory (m=100, n=200, B=5000)", figure1),
        ("scalar-reduction oracle for b*", scalar_oracle),
        ("leave-one-out error rate", loo),
        ("entrywise Gaussianity", entrywise),
        ("coordinate-averaged statistics", averaged),
        ("asymmetric run equals embedded symmetric run", embedding),
        ("Onsager-mode gap", onsager_gap),
        ("normalized trace decay", trace_decay),
        ("AMP converges to closed-form ridge", ridge_amp),
        ("contraction certificates", contraction),
        ("numerical hygiene", hygiene),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!("criterion {:>2} {}: {name} ({detail}; {:.1}s)", i + 1, if ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
