//! Replicate orchestration and the statistics used to compare simulations with theory.

mod experiments;

pub use experiments::*;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{AmpError, Result};
use crate::rng::replicate_seed;

/// |z| above which a comparison is flagged.
pub const FLAG_Z: f64 = 4.0;

/// Sample mean and standard error of the mean (`NaN` error for fewer than two values).
pub fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let b = x.len();
    if b == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / b as f64;
    if b < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// Unbiased sample variance with its normal-theory standard error `s²·√(2/(B−1))`.
pub fn variance_and_stderr(x: &[f64]) -> (f64, f64) {
    let b = x.len();
    if b < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / b as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1) as f64;
    (var, var * (2.0 / (b - 1) as f64).sqrt())
}

/// One empirical-vs-theory comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub experiment: String,
    pub n: usize,
    /// Coordinate index, or `avg` for averaged statistics.
    pub target: String,
    pub psi: String,
    pub mean: f64,
    pub stderr: Option<f64>,
    pub count: usize,
    pub theory: f64,
    pub zscore: Option<f64>,
    pub flagged: bool,
}

impl SummaryStats {
    pub fn from_samples(experiment: &str, n: usize, target: &str, psi: &str, samples: &[f64], theory: f64) -> Self {
        let (mean, se) = mean_and_stderr(samples);
        Self::from_moments(experiment, n, target, psi, mean, se, samples.len(), theory)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_moments(
        experiment: &str,
        n: usize,
        target: &str,
        psi: &str,
        mean: f64,
        stderr: f64,
        count: usize,
        theory: f64,
    ) -> Self {
        let stderr = (count >= 2 && stderr.is_finite()).then_some(stderr);
        let zscore = stderr.map(|se| {
            let d = mean - theory;
            if d == 0.0 {
                0.0
            } else {
                d / se
            }
        });
        let flagged = zscore.is_some_and(|z| z.abs() > FLAG_Z);
        Self {
            experiment: experiment.into(),
            n,
            target: target.into(),
            psi: psi.into(),
            mean,
            stderr,
            count,
            theory,
            zscore,
            flagged,
        }
    }

    /// `|z| <= limit`; comparisons without a z-score pass only on exact agreement.
    pub fn within(&self, limit: f64) -> bool {
        match self.zscore {
            Some(z) => z.abs() <= limit,
            None => self.mean == self.theory,
        }
    }
}

/// Runs `f(r, seed)` for `r in 0..count` in parallel with `seed = base_seed ⊕ r`.
/// Results come back in replicate order; failures are collected with their seeds.
pub fn run_replicates<R, F>(base_seed: u64, count: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, u64) -> Result<R> + Sync,
{
    let results: Vec<(u64, Result<R>)> = (0..count)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(base_seed, r as u64);
            (seed, f(r, seed))
        })
        .collect();
    let mut ok = Vec::with_capacity(count);
    let mut failed = Vec::new();
    for (seed, res) in results {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => failed.push((seed, e.to_string())),
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(AmpError::Replicates(failed))
    }
}

/// Named test functions `ψ(x, y)`. All are pseudo-Lipschitz of order at most 2.
///
/// `Square`, `Abs` and `Huber` act on the difference `x − y`; `ProductWithTruth` is `x·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "psi", rename_all = "kebab-case")]
pub enum Psi {
    Square,
    Abs,
    ProductWithTruth,
    Huber { delta: f64 },
    Constant { value: f64 },
}

fn huber(x: f64, delta: f64) -> f64 {
    let a = x.abs();
    if a <= delta {
        0.5 * x * x
    } else {
        delta * (a - 0.5 * delta)
    }
}

impl Psi {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Psi::Huber { delta } if !(delta > 0.0) => Err(AmpError::InvalidParameter(format!("huber delta must be positive, got {delta}"))),
            Psi::Constant { value } if !value.is_finite() => Err(AmpError::InvalidParameter("constant psi must be finite".into())),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Psi::Square => "square".into(),
            Psi::Abs => "abs".into(),
            Psi::ProductWithTruth => "product-with-truth".into(),
            Psi::Huber { delta } => format!("huber({delta})"),
            Psi::Constant { value } => format!("constant({value})"),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Psi::Square => (x - y) * (x - y),
            Psi::Abs => (x - y).abs(),
            Psi::ProductWithTruth => x * y,
            Psi::Huber { delta } => huber(x - y, delta),
            Psi::Constant { value } => value,
        }
    }

    /// `E ψ(X, Y)` for jointly Gaussian `(X, Y)`; a deterministic `y` has zero variance.
    pub fn gaussian_expectation(&self, mean_x: f64, mean_y: f64, var_x: f64, var_y: f64, cov: f64) -> f64 {
        if let Psi::ProductWithTruth = self {
            return cov + mean_x * mean_y;
        }
        if let Psi::Constant { value } = *self {
            return value;
        }
        let m = mean_x - mean_y;
        let s = (var_x + var_y - 2.0 * cov).max(0.0).sqrt();
        match *self {
            Psi::Square => m * m + s * s,
            Psi::Abs => folded_normal_mean(m, s),
            Psi::Huber { delta } => huber_expectation(m, s, delta),
            Psi::ProductWithTruth | Psi::Constant { .. } => unreachable!(),
        }
    }
}

/// `E|D|` for `D ~ N(m, s²)`.
pub fn folded_normal_mean(m: f64, s: f64) -> f64 {
    if s == 0.0 {
        return m.abs();
    }
    let z = Normal::standard();
    s * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * (m / s).powi(2)).exp() + m * (1.0 - 2.0 * z.cdf(-m / s))
}

/// `(P, E[D; I], E[D²; I])` for `D ~ N(m, s²)` on the interval `I = (lo, hi)`.
fn partial_moments(m: f64, s: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    let z = Normal::standard();
    let a = (lo - m) / s;
    let b = (hi - m) / s;
    let (pa, pb) = (z.pdf(a), z.pdf(b));
    let apa = if a.is_finite() { a * pa } else { 0.0 };
    let bpb = if b.is_finite() { b * pb } else { 0.0 };
    let p = z.cdf(b) - z.cdf(a);
    let e1 = m * p + s * (pa - pb);
    let e2 = (m * m + s * s) * p + 2.0 * m * s * (pa - pb) + s * s * (apa - bpb);
    (p, e1, e2)
}

/// `E huber_δ(D)` for `D ~ N(m, s²)`, from truncated-normal moments.
pub fn huber_expectation(m: f64, s: f64, delta: f64) -> f64 {
    if s == 0.0 {
        return huber(m, delta);
    }
    let (_, _, mid2) = partial_moments(m, s, -delta, delta);
    let (p_hi, e_hi, _) = partial_moments(m, s, delta, f64::INFINITY);
    let (p_lo, e_lo, _) = partial_moments(m, s, f64::NEG_INFINITY, -delta);
    0.5 * mid2 + delta * (e_hi - e_lo) - 0.5 * delta * delta * (p_hi + p_lo)
}

/// Two-sided Kolmogorov–Smirnov distance between the sample and `N(0, σ²)`.
///
/// With `σ = 0` the reference is a point mass at zero: distance 0 if every sample is 0, else 1.
pub fn ks_statistic(samples: &[f64], sigma: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(AmpError::InvalidParameter("KS statistic of an empty sample".into()));
    }
    if !(sigma >= 0.0) {
        return Err(AmpError::InvalidParameter(format!("sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(if samples.iter().all(|&x| x == 0.0) { 0.0 } else { 1.0 });
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let dist = Normal::new(0.0, sigma).map_err(|e| AmpError::InvalidParameter(e.to_string()))?;
    let b = x.len() as f64;
    Ok(x.iter().enumerate().fold(0.0, |d: f64, (i, &v)| {
        let f = dist.cdf(v);
        d.max((i + 1) as f64 / b - f).max(f - i as f64 / b)
    }))
}

/// Outcome of a KS normality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsCheck {
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Asymptotic KS critical value `√(−ln(α/2)/2)/√B`.
pub fn ks_threshold(alpha: f64, count: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (count as f64).sqrt()
}

/// Passes iff the KS distance to `N(0, σ²)` is below the level-`α` threshold.
pub fn normality_check(samples: &[f64], sigma: f64, alpha: f64) -> Result<KsCheck> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AmpError::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let statistic = ks_statistic(samples, sigma)?;
    let threshold = ks_threshold(alpha, samples.len());
    Ok(KsCheck { statistic, threshold, alpha, pass: statistic < threshold })
}

/// Least-squares slope of `log(value)` against `log(n)` with a 95% half-width
/// (Student t on `k − 2` degrees of freedom; zero with only two sizes).
pub fn rate_slope(values: &[f64], n_list: &[usize]) -> Result<(f64, f64)> {
    if values.len() != n_list.len() || values.len() < 2 {
        return Err(AmpError::InvalidParameter(format!(
            "rate slope needs at least two sizes with one value each ({} values, {} sizes)",
            values.len(),
            n_list.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(AmpError::InvalidParameter(format!("rate slope needs positive values, got {v}")));
    }
    if n_list.contains(&0) {
        return Err(AmpError::InvalidParameter("sizes must be positive".into()));
    }
    let x: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(AmpError::InvalidParameter("rate slope needs at least two distinct sizes".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() <= 2 {
        return Ok((slope, 0.0));
    }
    let dof = k - 2.0;
    let ssr: f64 = x.iter().zip(&y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| AmpError::InvalidParameter(e.to_string()))?;
    Ok((slope, t.inverse_cdf(0.975) * se))
}

/// Median of a nonempty sample.
pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
