//! The matrix recursions `M_s^(t)`, `N_u^(s)` and the normalized-trace diagnostic.
//!
//! ```text
//! M_{−1} = 0,  M_0 = 𝖣^(t),  M_s = (M_{s−1} A − M_{s−2} 𝖡_{t−s+1}) 𝖣^(t−s)
//! N_{−1} = 0,  N_0 = I,      N_u = A 𝖣^(t−s+u) N_{u−1} − 𝖡_{t−s+u} 𝖣^(t−s+u−1) N_{u−2}
//! ```
//!
//! with `𝖣^(s) = diag(F'_s(z^(s)))` and `𝖡_s = diag(b_s)`.

use log::warn;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{AmpTrajectory, OnsagerMode, SymmetricAmp};
use crate::ensembles::{sample_symmetric, SampledMatrix};
use crate::error::{AmpError, Result};
use crate::montecarlo::{mean_and_stderr, rate_slope};
use crate::nonlinearity::NonlinearitySchedule;
use crate::rng::replicate_seed;
use crate::scalar::Scalar;
use crate::state_evolution::SePath;

fn scale_columns<T: Scalar>(m: &mut Array2<T>, d: &Array1<T>) {
    for mut row in m.rows_mut() {
        row *= d;
    }
}

fn scale_rows<T: Scalar>(m: &mut Array2<T>, d: &Array1<T>) {
    for (mut row, &x) in m.rows_mut().into_iter().zip(d.iter()) {
        row *= x;
    }
}

fn check_inputs<T: Scalar>(a: &SampledMatrix<T>, traj: &AmpTrajectory<T>, t: usize) -> Result<usize> {
    let n = traj.iterates[0].len();
    if a.dim() != (n, n) {
        return Err(AmpError::Shape(format!("matrix {:?} for trajectory of dimension {n}", a.dim())));
    }
    if traj.horizon() < t {
        return Err(AmpError::HorizonMismatch { requested: t, available: traj.horizon() });
    }
    Ok(n)
}

fn derivative<T: Scalar>(schedule: &NonlinearitySchedule<T>, traj: &AmpTrajectory<T>, s: usize) -> Result<Array1<T>> {
    schedule.deriv(s as isize, traj.iterates[s].view())
}

fn onsager<T: Scalar>(traj: &AmpTrajectory<T>, s: usize) -> Result<&Array1<T>> {
    traj.onsager.get(s).ok_or(AmpError::HorizonMismatch { requested: s + 1, available: traj.horizon() })
}

/// `M_0^(t), …, M_t^(t)`.
pub fn m_recursion<T: Scalar>(
    a: &SampledMatrix<T>,
    schedule: &NonlinearitySchedule<T>,
    traj: &AmpTrajectory<T>,
    t: usize,
) -> Result<Vec<Array2<T>>> {
    let n = check_inputs(a, traj, t)?;
    let mut out: Vec<Array2<T>> = Vec::with_capacity(t + 1);
    out.push(Array2::from_diag(&derivative(schedule, traj, t)?));
    for s in 1..=t {
        let mut next = out[s - 1].dot(&a.values);
        if s >= 2 {
            let mut back = out[s - 2].clone();
            scale_columns(&mut back, onsager(traj, t - s + 1)?);
            next -= &back;
        }
        scale_columns(&mut next, &derivative(schedule, traj, t - s)?);
        debug_assert_eq!(next.dim(), (n, n));
        out.push(next);
    }
    Ok(out)
}

/// `N_0^(s), …, N_s^(s)` relative to iteration `t` (needs `s <= t`, and `b_t` when `s >= 2`).
pub fn n_recursion<T: Scalar>(
    a: &SampledMatrix<T>,
    schedule: &NonlinearitySchedule<T>,
    traj: &AmpTrajectory<T>,
    t: usize,
    s: usize,
) -> Result<Vec<Array2<T>>> {
    let n = check_inputs(a, traj, t)?;
    if s > t {
        return Err(AmpError::InvalidParameter(format!("N recursion needs s <= t, got s = {s}, t = {t}")));
    }
    let mut out: Vec<Array2<T>> = Vec::with_capacity(s + 1);
    out.push(Array2::eye(n));
    for u in 1..=s {
        let idx = t - s + u;
        let mut scaled = out[u - 1].clone();
        scale_rows(&mut scaled, &derivative(schedule, traj, idx)?);
        let mut next = a.values.dot(&scaled);
        if u >= 2 {
            let mut back = out[u - 2].clone();
            let d = derivative(schedule, traj, idx - 1)?;
            scale_rows(&mut back, &(onsager(traj, idx)? * &d));
            next -= &back;
        }
        out.push(next);
    }
    Ok(out)
}

/// `n⁻¹ tr(diag(d0) M)`.
pub fn normalized_trace<T: Scalar>(m: &Array2<T>, d0: &Array1<T>) -> T {
    let n = d0.len();
    m.diag().iter().zip(d0.iter()).fold(T::zero(), |acc, (&x, &d)| acc + x * d) / T::of_usize(n)
}

/// Weighting vector for the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum D0Choice {
    /// `1_n`.
    Ones,
    /// Entrywise square of row `k` of the profile.
    ProfileRow(usize),
}

impl D0Choice {
    pub fn vector<T: Scalar>(&self, profile_values: &Array2<T>) -> Result<Array1<T>> {
        match *self {
            D0Choice::Ones => Ok(Array1::ones(profile_values.nrows())),
            D0Choice::ProfileRow(k) => {
                if k >= profile_values.nrows() {
                    return Err(AmpError::IndexOutOfRange { index: k, len: profile_values.nrows() });
                }
                Ok(profile_values.row(k).mapv(|v| v * v))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            D0Choice::Ones => "ones".into(),
            D0Choice::ProfileRow(k) => format!("profile-row-{k}"),
        }
    }
}

/// Across-seed statistics of `n⁻¹ tr(diag(d0) M_s^(t))` at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStat {
    pub n: usize,
    pub s: usize,
    pub d0: String,
    pub mean_abs_trace: f64,
    pub stderr_abs: f64,
    pub mean_trace: f64,
    pub stderr: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnosticReport {
    pub t: usize,
    pub stats: Vec<TraceStat>,
    /// Per `d0`: `(label, slope, half-width)` of `log max_{s ≥ 1} mean |trace|` against `log n`.
    pub slopes: Vec<(String, f64, f64)>,
}

impl TraceDiagnosticReport {
    pub fn slope(&self, d0: &str) -> Option<f64> {
        self.slopes.iter().find(|(l, _, _)| l == d0).map(|&(_, s, _)| s)
    }

    pub fn stat(&self, n: usize, s: usize, d0: &str) -> Option<&TraceStat> {
        self.stats.iter().find(|x| x.n == n && x.s == s && x.d0 == d0)
    }
}

/// One problem size of a trace experiment.
pub struct TraceSetup<T: Scalar> {
    pub amp: SymmetricAmp<T>,
    pub mode: OnsagerMode<T>,
    pub se: Option<SePath<T>>,
}

/// Normalized traces for every `s in 0..=t` and every `d0`, one row per seed.
pub fn seed_traces<T: Scalar>(setup: &TraceSetup<T>, t: usize, d0s: &[D0Choice], seed: u64) -> Result<Array2<f64>> {
    let a = sample_symmetric(setup.amp.profile(), seed)?;
    let horizon = t + 1;
    let traj = setup.amp.run(&a, horizon, &setup.mode, setup.se.as_ref())?;
    let ms = m_recursion(&a, setup.amp.schedule(), &traj, t)?;
    let vecs: Vec<Array1<T>> = d0s.iter().map(|d| d.vector(setup.amp.profile().values())).collect::<Result<_>>()?;
    Ok(Array2::from_shape_fn((t + 1, d0s.len()), |(s, j)| normalized_trace(&ms[s], &vecs[j]).as_f64()))
}

/// Runs the diagnostic over `n_list × seeds` and fits the decay slope.
///
/// `make(n)` builds the problem at size `n`; seed `r` uses `replicate_seed(base_seed, r)`.
pub fn trace_decay_test<T: Scalar, M>(
    make: M,
    t: usize,
    n_list: &[usize],
    seeds: usize,
    base_seed: u64,
    d0s: &[D0Choice],
) -> Result<TraceDiagnosticReport>
where
    M: Fn(usize) -> Result<TraceSetup<T>>,
{
    if n_list.len() < 2 || seeds < 2 || t == 0 {
        return Err(AmpError::InvalidParameter("trace test needs t >= 1, two sizes and two seeds".into()));
    }
    let mut stats = Vec::new();
    for &n in n_list {
        if (t as f64) > (n as f64).ln() / 4.0 {
            warn!("trace diagnostic: t = {t} exceeds log(n)/4 at n = {n}");
        }
        let setup = make(n)?;
        let rows: Vec<Array2<f64>> = (0..seeds as u64)
            .into_par_iter()
            .map(|r| seed_traces(&setup, t, d0s, replicate_seed(base_seed, r)))
            .collect::<Result<_>>()?;
        for s in 0..=t {
            for (j, d0) in d0s.iter().enumerate() {
                let vals: Vec<f64> = rows.iter().map(|r| r[[s, j]]).collect();
                let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
                let (mean, se) = mean_and_stderr(&vals);
                let (mean_abs, se_abs) = mean_and_stderr(&abs);
                stats.push(TraceStat {
                    n,
                    s,
                    d0: d0.label(),
                    mean_abs_trace: mean_abs,
                    stderr_abs: se_abs,
                    mean_trace: mean,
                    stderr: se,
                    seeds,
                });
            }
        }
    }
    let mut slopes = Vec::new();
    for d0 in d0s {
        let label = d0.label();
        let worst: Vec<f64> = n_list
            .iter()
            .map(|&n| {
                stats
                    .iter()
                    .filter(|x| x.n == n && x.s >= 1 && x.d0 == label)
                    .map(|x| x.mean_abs_trace)
                    .fold(0.0, f64::max)
            })
            .collect();
        let (slope, half) = rate_slope(&worst, n_list)?;
        slopes.push((label, slope, half));
    }
    Ok(TraceDiagnosticReport { t, stats, slopes })
}
