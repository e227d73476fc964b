//! Symmetric and asymmetric AMP, leave-out variants and the asymmetric-to-symmetric embedding.
//!
//! Symmetric iteration, `t = 0, 1, …`:
//!
//! ```text
//! z^(t+1) = A F_t(z^(t)) − b_t ∘ F_{t−1}(z^(t−1)),   F_{−1} ≡ 0.
//! ```
//!
//! Asymmetric iteration with `G_0 ≡ 0`:
//!
//! ```text
//! u^(t+1) = A F_t(v^(t)) − b^F_t ∘ G_t(u^(t))
//! v^(t+1) = Aᵀ G_{t+1}(u^(t+1)) − b^G_{t+1} ∘ F_t(v^(t))
//! ```

use ndarray::{Array1, Array2, Array3, ArrayView1};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_rectangular, sample_symmetric, MaskMode, MatrixScale, ProfileKind, SampledMatrix, VarianceProfile};
use crate::error::{AmpError, Result};
use crate::linalg::{masked_matvec, masked_matvec_t, matvec, matvec_t};
use crate::nonlinearity::{CoordMap, NonlinearityFamily, NonlinearitySchedule};
use crate::rng::{purpose, stream};
use crate::scalar::Scalar;
use crate::state_evolution::{se_onsager, se_onsager_f, se_onsager_g, AsymSePath, SePath};

/// Number of fresh draws averaged by [`OnsagerMode::MonteCarloOracle`] unless configured.
pub const DEFAULT_ORACLE_REPLICATES: usize = 200;

/// Where the Onsager vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", bound = "")]
pub enum OnsagerMode<T: Scalar> {
    /// `b̂_t = n⁻¹ V∘V F'_t(z^(t))` from the current iterate.
    DataDriven,
    /// `b̄_t` from a state-evolution path.
    StateEvolution,
    /// Fixed vectors `b_0, b_1, …` (symmetric runs). `b_0` is never used.
    Supplied { vectors: Vec<Array1<T>> },
    /// Fixed `b^F_t` (length `m`, `t = 0..`) and `b^G_t` (length `n`, `t = 0..`, entry 0 unused).
    SuppliedPair { f: Vec<Array1<T>>, g: Vec<Array1<T>> },
    /// Approximation of the exact oracle `E[F'_t(z^(t)) | z^(0)]` by averaging over
    /// `replicates` independent matrix draws run in lockstep.
    MonteCarloOracle { replicates: usize, seed: u64 },
}

impl<T: Scalar> OnsagerMode<T> {
    pub fn tag(&self) -> ModeTag {
        match self {
            Self::DataDriven => ModeTag::DataDriven,
            Self::StateEvolution => ModeTag::StateEvolution,
            Self::Supplied { .. } | Self::SuppliedPair { .. } => ModeTag::Supplied,
            Self::MonteCarloOracle { .. } => ModeTag::MonteCarloOracle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeTag {
    DataDriven,
    StateEvolution,
    Supplied,
    MonteCarloOracle,
}

/// Iterates `z^(0..=T)` with the Onsager vectors `b_0..b_{T−1}` that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AmpTrajectory<T: Scalar> {
    pub iterates: Vec<Array1<T>>,
    pub onsager: Vec<Array1<T>>,
    pub mode: ModeTag,
    pub seed: u64,
    /// Indices whose rows and columns were zeroed (empty for the full run).
    pub left_out: Vec<usize>,
}

impl<T: Scalar> AmpTrajectory<T> {
    pub fn horizon(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn iterate(&self, t: usize) -> &Array1<T> {
        &self.iterates[t]
    }

    pub fn last(&self) -> &Array1<T> {
        self.iterates.last().expect("trajectory holds z^(0)")
    }
}

/// Asymmetric iterates. `u[0]` is a zero placeholder, so `u[t] = u^(t)` for `t >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AsymTrajectory<T: Scalar> {
    pub u: Vec<Array1<T>>,
    pub v: Vec<Array1<T>>,
    /// `b^F_0..b^F_{T−1}`.
    pub onsager_f: Vec<Array1<T>>,
    /// `b^G_0..b^G_T`, with `b^G_0 = 0`.
    pub onsager_g: Vec<Array1<T>>,
    pub mode: ModeTag,
    pub seed: u64,
    pub left_out: Option<(MaskMode, Vec<usize>)>,
}

impl<T: Scalar> AsymTrajectory<T> {
    pub fn horizon(&self) -> usize {
        self.v.len() - 1
    }
}

fn need_schedule<T: Scalar>(sched: &NonlinearitySchedule<T>, t: usize) -> Result<()> {
    if sched.horizon() < t {
        return Err(AmpError::HorizonMismatch { requested: t, available: sched.horizon() });
    }
    Ok(())
}

fn check_left_out(p: &[usize], len: usize) -> Result<()> {
    if p.is_empty() {
        return Err(AmpError::EmptyLeaveOutSet);
    }
    match p.iter().find(|&&k| k >= len) {
        Some(&k) => Err(AmpError::IndexOutOfRange { index: k, len }),
        None => Ok(()),
    }
}

fn sup_gap<T: Scalar>(x: &Array1<T>, y: &Array1<T>) -> T {
    x.iter().zip(y.iter()).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

/// Source of `b_t` inside the iteration loop.
enum Onsager<'a, T: Scalar> {
    Data(&'a Array2<T>),
    Fixed(&'a [Array1<T>]),
}

/// The shared symmetric loop. `mv` applies the (possibly masked) matrix.
fn iterate_symmetric<T: Scalar, M: Fn(ArrayView1<T>) -> Array1<T>>(
    schedule: &NonlinearitySchedule<T>,
    z0: &Array1<T>,
    horizon: usize,
    onsager: Onsager<'_, T>,
    mv: M,
) -> Result<(Vec<Array1<T>>, Vec<Array1<T>>)> {
    let mut iterates = Vec::with_capacity(horizon + 1);
    let mut used = Vec::with_capacity(horizon);
    iterates.push(z0.clone());
    let mut f_prev = Array1::<T>::zeros(z0.len());
    for t in 0..horizon {
        let z = &iterates[t];
        let b = match onsager {
            Onsager::Data(w) => matvec(w.view(), schedule.deriv(t as isize, z.view())?.view()),
            Onsager::Fixed(bs) => bs[t].clone(),
        };
        let f = schedule.eval(t as isize, z.view())?;
        let next = mv(f.view()) - &(&b * &f_prev);
        iterates.push(next);
        used.push(b);
        f_prev = f;
    }
    Ok((iterates, used))
}

/// A symmetric AMP problem: profile, nonlinearities and initialization.
#[derive(Debug, Clone)]
pub struct SymmetricAmp<T: Scalar> {
    profile: VarianceProfile<T>,
    weights: Array2<T>,
    schedule: NonlinearitySchedule<T>,
    z0: Array1<T>,
}

impl<T: Scalar> SymmetricAmp<T> {
    pub fn new(profile: VarianceProfile<T>, schedule: NonlinearitySchedule<T>, z0: Array1<T>) -> Result<Self> {
        if profile.kind() != ProfileKind::Symmetric {
            return Err(AmpError::Shape("symmetric AMP needs a symmetric profile".into()));
        }
        let n = profile.shape().0;
        if schedule.dim() != n || z0.len() != n {
            return Err(AmpError::Shape(format!("profile {n}, schedule {}, z0 {}", schedule.dim(), z0.len())));
        }
        let weights = profile.squared_over(n);
        Ok(Self { profile, weights, schedule, z0 })
    }

    pub fn profile(&self) -> &VarianceProfile<T> {
        &self.profile
    }

    pub fn schedule(&self) -> &NonlinearitySchedule<T> {
        &self.schedule
    }

    pub fn z0(&self) -> &Array1<T> {
        &self.z0
    }

    pub fn dim(&self) -> usize {
        self.z0.len()
    }

    /// `V∘V/n`.
    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    fn check(&self, a: &SampledMatrix<T>, horizon: usize) -> Result<()> {
        let n = self.dim();
        if a.dim() != (n, n) {
            return Err(AmpError::Shape(format!("matrix {:?} for dimension {n}", a.dim())));
        }
        if horizon > 0 {
            need_schedule(&self.schedule, horizon - 1)?;
        }
        Ok(())
    }

    /// `b_0..b_{T−1}` for the non-data-driven modes.
    pub fn onsager_vectors(&self, horizon: usize, mode: &OnsagerMode<T>, se: Option<&SePath<T>>) -> Result<Option<Vec<Array1<T>>>> {
        let n = self.dim();
        Ok(match mode {
            OnsagerMode::DataDriven => None,
            OnsagerMode::StateEvolution => {
                let se = se.ok_or(AmpError::MissingStatePath)?;
                if se.dim() != n {
                    return Err(AmpError::Shape(format!("state evolution of dimension {} for AMP of dimension {n}", se.dim())));
                }
                Some((0..horizon).map(|t| se_onsager(se, &self.schedule, t)).collect::<Result<_>>()?)
            }
            OnsagerMode::Supplied { vectors } => {
                if vectors.len() < horizon {
                    return Err(AmpError::HorizonMismatch { requested: horizon, available: vectors.len() });
                }
                if let Some(b) = vectors.iter().find(|b| b.len() != n) {
                    return Err(AmpError::Shape(format!("supplied Onsager vector of length {} for dimension {n}", b.len())));
                }
                Some(vectors[..horizon].to_vec())
            }
            OnsagerMode::SuppliedPair { .. } => {
                return Err(AmpError::InvalidParameter("paired Onsager vectors apply to asymmetric AMP only".into()))
            }
            OnsagerMode::MonteCarloOracle { replicates, seed } => Some(self.oracle_onsager(horizon, *replicates, *seed)?),
        })
    }

    /// Runs `T = horizon` steps on `a`.
    pub fn run(&self, a: &SampledMatrix<T>, horizon: usize, mode: &OnsagerMode<T>, se: Option<&SePath<T>>) -> Result<AmpTrajectory<T>> {
        self.check(a, horizon)?;
        let fixed = self.onsager_vectors(horizon, mode, se)?;
        let source = match &fixed {
            Some(bs) => Onsager::Fixed(bs),
            None => Onsager::Data(&self.weights),
        };
        let (iterates, onsager) =
            iterate_symmetric(&self.schedule, &self.z0, horizon, source, |x| matvec(a.values.view(), x))?;
        Ok(AmpTrajectory { iterates, onsager, mode: mode.tag(), seed: a.seed, left_out: Vec::new() })
    }

    /// Leave-`P`-out run: rows and columns in `p` are treated as zero and the
    /// Onsager vectors of `reference` are reused unchanged.
    pub fn run_leave_out(
        &self,
        a: &SampledMatrix<T>,
        reference: &AmpTrajectory<T>,
        p: &[usize],
        horizon: usize,
    ) -> Result<AmpTrajectory<T>> {
        self.check(a, horizon)?;
        check_left_out(p, self.dim())?;
        if !reference.left_out.is_empty() || reference.iterates[0] != self.z0 || reference.seed != a.seed {
            return Err(AmpError::Inconsistent("leave-out runs need the full run on the same matrix and z0".into()));
        }
        if reference.onsager.len() < horizon {
            return Err(AmpError::HorizonMismatch { requested: horizon, available: reference.onsager.len() });
        }
        let source = Onsager::Fixed(&reference.onsager[..horizon]);
        let (iterates, onsager) =
            iterate_symmetric(&self.schedule, &self.z0, horizon, source, |x| masked_matvec(a.values.view(), x, p, p))?;
        Ok(AmpTrajectory { iterates, onsager, mode: reference.mode, seed: a.seed, left_out: p.to_vec() })
    }

    /// Monte Carlo estimate of `b_t = n⁻¹ V∘V E[F'_t(z^(t)) | z^(0)]`, `t < horizon`.
    ///
    /// Replicate matrices are regenerated from their seeds at every step instead of
    /// being stored, so memory stays at `O(R n)` vectors plus one matrix per worker.
    pub fn oracle_onsager(&self, horizon: usize, replicates: usize, seed: u64) -> Result<Vec<Array1<T>>> {
        if replicates == 0 {
            return Err(AmpError::InvalidParameter("oracle needs at least one replicate".into()));
        }
        if horizon > 0 {
            need_schedule(&self.schedule, horizon - 1)?;
        }
        let n = self.dim();
        let seeds: Vec<u64> = (0..replicates as u64).map(|r| stream(seed, purpose::ORACLE, r).next_u64()).collect();
        let mut states: Vec<(Array1<T>, Array1<T>)> = vec![(Array1::zeros(n), self.z0.clone()); replicates];
        let mut out = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mean = if self.schedule.is_affine_at(t) {
                self.schedule.deriv(t as isize, self.z0.view())?
            } else {
                let derivs: Vec<Array1<T>> = states
                    .par_iter()
                    .map(|(_, z)| self.schedule.deriv(t as isize, z.view()))
                    .collect::<Result<_>>()?;
                let mut mean = Array1::<T>::zeros(n);
                for d in &derivs {
                    mean += d;
                }
                mean / T::of_usize(replicates)
            };
            let b = matvec(self.weights.view(), mean.view());
            if t + 1 < horizon {
                states.par_iter_mut().zip(seeds.par_iter()).try_for_each(|((f_prev, z), &s)| -> Result<()> {
                    let a = sample_symmetric(&self.profile, s)?;
                    let f = self.schedule.eval(t as isize, z.view())?;
                    *z = matvec(a.values.view(), f.view()) - &(&b * &*f_prev);
                    *f_prev = f;
                    Ok(())
                })?;
            }
            out.push(b);
        }
        Ok(out)
    }

    /// Checks that `loo[k]` is the leave-`{k}`-out run belonging to `full`.
    fn check_loo(&self, full: &AmpTrajectory<T>, loo: &AmpTrajectory<T>, k: usize, t: usize) -> Result<()> {
        if loo.left_out != [k] || loo.seed != full.seed || loo.iterates[0] != full.iterates[0] {
            return Err(AmpError::Inconsistent(format!("trajectory {k} is not the leave-{k}-out run of the reference")));
        }
        if loo.horizon() < t || loo.onsager.iter().zip(&full.onsager).any(|(x, y)| x != y) {
            return Err(AmpError::Inconsistent(format!("leave-{k}-out run does not share the reference Onsager vectors")));
        }
        Ok(())
    }

    /// `|z^(t+1)_k − ⟨A_k, F_t(z^(t)_[−k])⟩|` for every `k`, from stored leave-one-out runs.
    pub fn loo_representation_error(
        &self,
        full: &AmpTrajectory<T>,
        a: &SampledMatrix<T>,
        loo: &[AmpTrajectory<T>],
        t: usize,
    ) -> Result<LooError<T>> {
        let n = self.dim();
        if loo.len() != n {
            return Err(AmpError::Inconsistent(format!("{} leave-one-out runs for dimension {n}", loo.len())));
        }
        if full.horizon() < t + 1 {
            return Err(AmpError::HorizonMismatch { requested: t + 1, available: full.horizon() });
        }
        let per: Vec<T> = (0..n)
            .map(|k| {
                self.check_loo(full, &loo[k], k, t)?;
                self.representation_gap(full, a, &loo[k], k, t)
            })
            .collect::<Result<_>>()?;
        Ok(LooError::new(t, Array1::from(per)))
    }

    fn representation_gap(&self, full: &AmpTrajectory<T>, a: &SampledMatrix<T>, loo: &AmpTrajectory<T>, k: usize, t: usize) -> Result<T> {
        let f = self.schedule.eval(t as isize, loo.iterates[t].view())?;
        Ok((full.iterates[t + 1][k] - a.values.row(k).dot(&f)).abs())
    }

    /// Same as [`Self::loo_representation_error`] but runs the `n` leave-one-out
    /// iterations itself, in parallel, without keeping them.
    pub fn loo_errors(&self, a: &SampledMatrix<T>, full: &AmpTrajectory<T>, t: usize) -> Result<LooError<T>> {
        if full.horizon() < t + 1 {
            return Err(AmpError::HorizonMismatch { requested: t + 1, available: full.horizon() });
        }
        let per: Vec<T> = (0..self.dim())
            .into_par_iter()
            .map(|k| {
                let loo = self.run_leave_out(a, full, &[k], t)?;
                self.representation_gap(full, a, &loo, k, t)
            })
            .collect::<Result<_>>()?;
        Ok(LooError::new(t, Array1::from(per)))
    }

    /// Per-iteration `ℓ∞` gaps between trajectories driven by different Onsager modes on the same `a`.
    pub fn compare_onsager_modes(
        &self,
        a: &SampledMatrix<T>,
        horizon: usize,
        se: &SePath<T>,
        oracle: Option<(usize, u64)>,
    ) -> Result<OnsagerGaps<T>> {
        let data = self.run(a, horizon, &OnsagerMode::DataDriven, None)?;
        let sev = self.run(a, horizon, &OnsagerMode::StateEvolution, Some(se))?;
        let gaps = |x: &AmpTrajectory<T>, y: &AmpTrajectory<T>| -> Vec<T> {
            x.iterates.iter().zip(&y.iterates).map(|(p, q)| sup_gap(p, q)).collect()
        };
        let (data_vs_oracle, se_vs_oracle) = match oracle {
            Some((replicates, seed)) => {
                let orc = self.run(a, horizon, &OnsagerMode::MonteCarloOracle { replicates, seed }, None)?;
                (Some(gaps(&data, &orc)), Some(gaps(&sev, &orc)))
            }
            None => (None, None),
        };
        Ok(OnsagerGaps { data_vs_se: gaps(&data, &sev), data_vs_oracle, se_vs_oracle })
    }
}

/// Leave-one-out representation error at iteration `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct LooError<T: Scalar> {
    pub t: usize,
    pub per_coord: Array1<T>,
    pub max: T,
}

impl<T: Scalar> LooError<T> {
    fn new(t: usize, per_coord: Array1<T>) -> Self {
        let max = per_coord.iter().fold(T::zero(), |m, &x| m.max(x));
        Self { t, per_coord, max }
    }
}

/// `max_k |x^(t)_k − y^(t)_k|` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct OnsagerGaps<T: Scalar> {
    pub data_vs_se: Vec<T>,
    pub data_vs_oracle: Option<Vec<T>>,
    pub se_vs_oracle: Option<Vec<T>>,
}

/// An asymmetric AMP problem with `F` acting on `ℝⁿ` and `G` on `ℝᵐ`.
#[derive(Debug, Clone)]
pub struct AsymmetricAmp<T: Scalar> {
    profile: VarianceProfile<T>,
    weights: Array2<T>,
    f: NonlinearitySchedule<T>,
    g: NonlinearitySchedule<T>,
    v0: Array1<T>,
}

enum AsymOnsager<'a, T: Scalar> {
    Data,
    Fixed(&'a [Array1<T>], &'a [Array1<T>]),
}

impl<T: Scalar> AsymmetricAmp<T> {
    pub fn new(
        profile: VarianceProfile<T>,
        f: NonlinearitySchedule<T>,
        g: NonlinearitySchedule<T>,
        v0: Array1<T>,
    ) -> Result<Self> {
        if profile.kind() != ProfileKind::Rectangular {
            return Err(AmpError::Shape("asymmetric AMP needs a rectangular profile".into()));
        }
        let (m, n) = profile.shape();
        if f.dim() != n || g.dim() != m || v0.len() != n {
            return Err(AmpError::Shape(format!(
                "profile {m}x{n}, F dim {}, G dim {}, v0 {}",
                f.dim(),
                g.dim(),
                v0.len()
            )));
        }
        let weights = profile.squared_over(m);
        Ok(Self { profile, weights, f, g, v0 })
    }

    pub fn profile(&self) -> &VarianceProfile<T> {
        &self.profile
    }

    pub fn f_schedule(&self) -> &NonlinearitySchedule<T> {
        &self.f
    }

    pub fn g_schedule(&self) -> &NonlinearitySchedule<T> {
        &self.g
    }

    pub fn v0(&self) -> &Array1<T> {
        &self.v0
    }

    /// `(m, n)`.
    pub fn shape(&self) -> (usize, usize) {
        self.profile.shape()
    }

    /// `V∘V/m`.
    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    fn check(&self, a: &SampledMatrix<T>, horizon: usize) -> Result<()> {
        if a.dim() != self.shape() {
            return Err(AmpError::Shape(format!("matrix {:?} for profile {:?}", a.dim(), self.shape())));
        }
        if horizon > 0 {
            need_schedule(&self.f, horizon - 1)?;
            need_schedule(&self.g, horizon)?;
        }
        Ok(())
    }

    fn iterate<M, N>(&self, horizon: usize, onsager: AsymOnsager<'_, T>, mv: M, mv_t: N) -> Result<AsymTrajectory<T>>
    where
        M: Fn(ArrayView1<T>) -> Array1<T>,
        N: Fn(ArrayView1<T>) -> Array1<T>,
    {
        let (m, n) = self.shape();
        let mut u = vec![Array1::<T>::zeros(m)];
        let mut v = vec![self.v0.clone()];
        let mut bf_used = Vec::with_capacity(horizon);
        let mut bg_used = vec![Array1::<T>::zeros(n)];
        let mut g_prev = Array1::<T>::zeros(m);
        for t in 0..horizon {
            let ti = t as isize;
            let bf = match onsager {
                AsymOnsager::Data => matvec(self.weights.view(), self.f.deriv(ti, v[t].view())?.view()),
                AsymOnsager::Fixed(f, _) => f[t].clone(),
            };
            let fv = self.f.eval(ti, v[t].view())?;
            let u_next = mv(fv.view()) - &(&bf * &g_prev);
            let bg = match onsager {
                AsymOnsager::Data => matvec_t(self.weights.view(), self.g.deriv(ti + 1, u_next.view())?.view()),
                AsymOnsager::Fixed(_, g) => g[t + 1].clone(),
            };
            let gu = self.g.eval(ti + 1, u_next.view())?;
            let v_next = mv_t(gu.view()) - &(&bg * &fv);
            u.push(u_next);
            v.push(v_next);
            bf_used.push(bf);
            bg_used.push(bg);
            g_prev = gu;
        }
        Ok(AsymTrajectory { u, v, onsager_f: bf_used, onsager_g: bg_used, mode: ModeTag::DataDriven, seed: 0, left_out: None })
    }

    /// `(b^F_0..b^F_{T−1}, b^G_0..b^G_T)` for the non-data-driven modes.
    #[allow(clippy::type_complexity)]
    pub fn onsager_vectors(
        &self,
        horizon: usize,
        mode: &OnsagerMode<T>,
        se: Option<&AsymSePath<T>>,
    ) -> Result<Option<(Vec<Array1<T>>, Vec<Array1<T>>)>> {
        let (m, n) = self.shape();
        Ok(match mode {
            OnsagerMode::DataDriven => None,
            OnsagerMode::StateEvolution => {
                let se = se.ok_or(AmpError::MissingStatePath)?;
                if se.shape() != (m, n) {
                    return Err(AmpError::Shape(format!("state evolution of shape {:?} for AMP of shape {:?}", se.shape(), (m, n))));
                }
                let f = (0..horizon).map(|t| se_onsager_f(se, &self.f, t)).collect::<Result<_>>()?;
                let g = (0..=horizon).map(|t| se_onsager_g(se, &self.g, t)).collect::<Result<_>>()?;
                Some((f, g))
            }
            OnsagerMode::SuppliedPair { f, g } => {
                if f.len() < horizon || g.len() < horizon + 1 {
                    return Err(AmpError::HorizonMismatch { requested: horizon, available: f.len().min(g.len().saturating_sub(1)) });
                }
                if f.iter().any(|b| b.len() != m) || g.iter().any(|b| b.len() != n) {
                    return Err(AmpError::Shape("supplied Onsager pair has wrong lengths".into()));
                }
                Some((f[..horizon].to_vec(), g[..=horizon].to_vec()))
            }
            OnsagerMode::Supplied { .. } => {
                return Err(AmpError::InvalidParameter("asymmetric AMP needs a supplied Onsager pair".into()))
            }
            OnsagerMode::MonteCarloOracle { replicates, seed } => Some(self.oracle_onsager(horizon, *replicates, *seed)?),
        })
    }

    pub fn run(&self, a: &SampledMatrix<T>, horizon: usize, mode: &OnsagerMode<T>, se: Option<&AsymSePath<T>>) -> Result<AsymTrajectory<T>> {
        self.check(a, horizon)?;
        let fixed = self.onsager_vectors(horizon, mode, se)?;
        let source = match &fixed {
            Some((f, g)) => AsymOnsager::Fixed(f, g),
            None => AsymOnsager::Data,
        };
        let vals = a.values.view();
        let mut out = self.iterate(horizon, source, |x| matvec(vals, x), |y| matvec_t(vals, y))?;
        out.mode = mode.tag();
        out.seed = a.seed;
        Ok(out)
    }

    /// Leave-row-out (`RowOnly`, indices in `[m]`) or leave-column-out (`ColumnOnly`, indices in `[n]`)
    /// run reusing the reference Onsager vectors.
    pub fn run_leave_out(
        &self,
        a: &SampledMatrix<T>,
        reference: &AsymTrajectory<T>,
        mode: MaskMode,
        p: &[usize],
        horizon: usize,
    ) -> Result<AsymTrajectory<T>> {
        self.check(a, horizon)?;
        let (m, n) = self.shape();
        let (rows, cols): (&[usize], &[usize]) = match mode {
            MaskMode::RowOnly => {
                check_left_out(p, m)?;
                (p, &[])
            }
            MaskMode::ColumnOnly => {
                check_left_out(p, n)?;
                (&[], p)
            }
            MaskMode::RowAndColumn => return Err(AmpError::Shape("row-and-column masking needs a symmetric matrix".into())),
        };
        if reference.left_out.is_some() || reference.v[0] != self.v0 || reference.seed != a.seed {
            return Err(AmpError::Inconsistent("leave-out runs need the full run on the same matrix and v0".into()));
        }
        if reference.onsager_f.len() < horizon {
            return Err(AmpError::HorizonMismatch { requested: horizon, available: reference.onsager_f.len() });
        }
        let vals = a.values.view();
        let source = AsymOnsager::Fixed(&reference.onsager_f, &reference.onsager_g);
        let mut out =
            self.iterate(horizon, source, |x| masked_matvec(vals, x, rows, cols), |y| masked_matvec_t(vals, y, rows, cols))?;
        out.mode = reference.mode;
        out.seed = a.seed;
        out.left_out = Some((mode, p.to_vec()));
        Ok(out)
    }

    /// Row errors `|u^(t+1)_k − ⟨A_k·, F_t(v^(t)_[−k])⟩|` over `k ∈ [m]`, leave-row-out runs computed internally.
    pub fn loo_row_errors(&self, a: &SampledMatrix<T>, full: &AsymTrajectory<T>, t: usize) -> Result<LooError<T>> {
        if full.horizon() < t + 1 {
            return Err(AmpError::HorizonMismatch { requested: t + 1, available: full.horizon() });
        }
        let per: Vec<T> = (0..self.shape().0)
            .into_par_iter()
            .map(|k| {
                let loo = self.run_leave_out(a, full, MaskMode::RowOnly, &[k], t)?;
                let f = self.f.eval(t as isize, loo.v[t].view())?;
                Ok((full.u[t + 1][k] - a.values.row(k).dot(&f)).abs())
            })
            .collect::<Result<_>>()?;
        Ok(LooError::new(t, Array1::from(per)))
    }

    /// Column errors `|v^(t+1)_ℓ − ⟨A_·ℓ, G_{t+1}(u^(t+1)_[−ℓ])⟩|` over `ℓ ∈ [n]`.
    pub fn loo_column_errors(&self, a: &SampledMatrix<T>, full: &AsymTrajectory<T>, t: usize) -> Result<LooError<T>> {
        if full.horizon() < t + 1 {
            return Err(AmpError::HorizonMismatch { requested: t + 1, available: full.horizon() });
        }
        let per: Vec<T> = (0..self.shape().1)
            .into_par_iter()
            .map(|l| {
                let loo = self.run_leave_out(a, full, MaskMode::ColumnOnly, &[l], t + 1)?;
                let g = self.g.eval(t as isize + 1, loo.u[t + 1].view())?;
                Ok((full.v[t + 1][l] - a.values.column(l).dot(&g)).abs())
            })
            .collect::<Result<_>>()?;
        Ok(LooError::new(t, Array1::from(per)))
    }

    /// Lockstep Monte Carlo estimate of the oracle pair.
    #[allow(clippy::type_complexity)]
    pub fn oracle_onsager(&self, horizon: usize, replicates: usize, seed: u64) -> Result<(Vec<Array1<T>>, Vec<Array1<T>>)> {
        if replicates == 0 {
            return Err(AmpError::InvalidParameter("oracle needs at least one replicate".into()));
        }
        let (m, n) = self.shape();
        let seeds: Vec<u64> = (0..replicates as u64).map(|r| stream(seed, purpose::ORACLE, r).next_u64()).collect();
        let r_count = T::of_usize(replicates);
        let average = |vs: Vec<Array1<T>>, len: usize| {
            let mut mean = Array1::<T>::zeros(len);
            for d in &vs {
                mean += d;
            }
            mean / r_count
        };
        // (G_t(u^(t)), v^(t)) per replicate
        let mut states: Vec<(Array1<T>, Array1<T>)> = vec![(Array1::zeros(m), self.v0.clone()); replicates];
        let mut bfs = Vec::with_capacity(horizon);
        let mut bgs = vec![Array1::<T>::zeros(n)];
        for t in 0..horizon {
            let ti = t as isize;
            let ef = if self.f.is_affine_at(t) {
                self.f.deriv(ti, self.v0.view())?
            } else {
                average(states.par_iter().map(|(_, v)| self.f.deriv(ti, v.view())).collect::<Result<_>>()?, n)
            };
            let bf = matvec(self.weights.view(), ef.view());
            // advance u to u^(t+1), keeping F_t(v^(t)) for the v half-step
            let half: Vec<(Array1<T>, Array1<T>)> = states
                .par_iter()
                .zip(seeds.par_iter())
                .map(|((g_prev, v), &s)| {
                    let a = sample_rectangular(&self.profile, s)?;
                    let fv = self.f.eval(ti, v.view())?;
                    let u = matvec(a.values.view(), fv.view()) - &(&bf * g_prev);
                    Ok((u, fv))
                })
                .collect::<Result<_>>()?;
            let eg = if self.g.is_affine_at(t + 1) {
                self.g.deriv(ti + 1, Array1::zeros(m).view())?
            } else {
                average(half.par_iter().map(|(u, _)| self.g.deriv(ti + 1, u.view())).collect::<Result<_>>()?, m)
            };
            let bg = matvec_t(self.weights.view(), eg.view());
            if t + 1 < horizon {
                states = half
                    .into_par_iter()
                    .zip(seeds.par_iter())
                    .map(|((u, fv), &s)| {
                        let a = sample_rectangular(&self.profile, s)?;
                        let gu = self.g.eval(ti + 1, u.view())?;
                        let v = matvec_t(a.values.view(), gu.view()) - &(&bg * &fv);
                        Ok((gu, v))
                    })
                    .collect::<Result<_>>()?;
            }
            bfs.push(bf);
            bgs.push(bg);
        }
        Ok((bfs, bgs))
    }
}

/// Symmetric problem of size `m + n` whose iterates interleave the asymmetric ones:
/// `z^(2t−1) = (u^(t), 0)` and `z^(2t) = (0, v^(t))`.
#[derive(Debug, Clone)]
pub struct Embedding<T: Scalar> {
    pub amp: SymmetricAmp<T>,
    m: usize,
    n: usize,
}

/// Builds the block profile `√(φ⁻¹+1)·[[0, V], [Vᵀ, 0]]` (`φ = m/n`), the interleaved
/// schedule `F̄_{2t} = (0, F_t)`, `F̄_{2t−1} = (G_t, 0)` and `z̄^(0) = (0, v^(0))`.
pub fn asym_to_sym_embed<T: Scalar>(asym: &AsymmetricAmp<T>) -> Result<Embedding<T>> {
    let (m, n) = asym.shape();
    let size = m + n;
    let c = (T::of_usize(n) / T::of_usize(m) + T::one()).sqrt();
    let v = asym.profile.values();
    let mut vbar = Array2::<T>::zeros((size, size));
    for k in 0..m {
        for l in 0..n {
            let x = c * v[[k, l]];
            vbar[[k, m + l]] = x;
            vbar[[m + l, k]] = x;
        }
    }
    let profile = VarianceProfile::new(vbar, ProfileKind::Symmetric)?;
    let horizon = (2 * asym.f.horizon() + 1).min(2 * asym.g.horizon());
    let zero = NonlinearityFamily::zero();
    let steps = (0..=horizon)
        .map(|s| {
            let fams: Vec<NonlinearityFamily<T>> = if s % 2 == 0 {
                let t = s / 2;
                std::iter::repeat_n(zero, m).chain((0..n).map(|l| *asym.f.family(t, l))).collect()
            } else {
                let t = s.div_ceil(2);
                (0..m).map(|k| *asym.g.family(t, k)).chain(std::iter::repeat_n(zero, n)).collect()
            };
            CoordMap::PerCoord(fams)
        })
        .collect();
    let schedule = NonlinearitySchedule::new(size, steps)?;
    let mut z0 = Array1::<T>::zeros(size);
    z0.slice_mut(ndarray::s![m..]).assign(&asym.v0);
    Ok(Embedding { amp: SymmetricAmp::new(profile, schedule, z0)?, m, n })
}

impl<T: Scalar> Embedding<T> {
    /// Asymmetric steps `T` correspond to `2T` symmetric steps.
    pub fn horizon(&self, asym_horizon: usize) -> usize {
        2 * asym_horizon
    }

    /// `[[0, A], [Aᵀ, 0]]` built from the same rectangular draw.
    pub fn embed_matrix(&self, a: &SampledMatrix<T>) -> Result<SampledMatrix<T>> {
        let (m, n) = (self.m, self.n);
        if a.dim() != (m, n) {
            return Err(AmpError::Shape(format!("matrix {:?} for embedding of {m}x{n}", a.dim())));
        }
        let mut out = Array2::<T>::zeros((m + n, m + n));
        for k in 0..m {
            for l in 0..n {
                out[[k, m + l]] = a.values[[k, l]];
                out[[m + l, k]] = a.values[[k, l]];
            }
        }
        Ok(SampledMatrix { values: out, scale: MatrixScale::SymmetricOneOverN, seed: a.seed })
    }

    /// Interleaves a supplied pair as `b̄_{2t} = (b^F_t, 0)`, `b̄_{2t+1} = (0, b^G_{t+1})`.
    pub fn embed_onsager(&self, mode: &OnsagerMode<T>) -> Result<OnsagerMode<T>> {
        Ok(match mode {
            OnsagerMode::SuppliedPair { f, g } => {
                let mut vectors = Vec::new();
                for t in 0..f.len() {
                    let mut even = Array1::zeros(self.m + self.n);
                    even.slice_mut(ndarray::s![..self.m]).assign(&f[t]);
                    vectors.push(even);
                    if let Some(gt) = g.get(t + 1) {
                        let mut odd = Array1::zeros(self.m + self.n);
                        odd.slice_mut(ndarray::s![self.m..]).assign(gt);
                        vectors.push(odd);
                    }
                }
                OnsagerMode::Supplied { vectors }
            }
            OnsagerMode::Supplied { .. } => {
                return Err(AmpError::InvalidParameter("embedding expects a supplied Onsager pair".into()))
            }
            other => other.clone(),
        })
    }

    /// Reads `u^(t) = z^(2t−1)[..m]`, `v^(t) = z^(2t)[m..]` and the matching Onsager vectors.
    pub fn project(&self, traj: &AmpTrajectory<T>) -> Result<AsymTrajectory<T>> {
        let s = traj.horizon();
        if !s.is_multiple_of(2) {
            return Err(AmpError::Inconsistent(format!("embedded run has odd horizon {s}")));
        }
        let (m, n) = (self.m, self.n);
        let top = |x: &Array1<T>| x.slice(ndarray::s![..m]).to_owned();
        let bottom = |x: &Array1<T>| x.slice(ndarray::s![m..]).to_owned();
        let horizon = s / 2;
        let mut u = vec![Array1::zeros(m)];
        let mut v = vec![bottom(&traj.iterates[0])];
        let mut onsager_f = Vec::new();
        let mut onsager_g = vec![Array1::zeros(n)];
        for t in 1..=horizon {
            u.push(top(&traj.iterates[2 * t - 1]));
            v.push(bottom(&traj.iterates[2 * t]));
            onsager_f.push(top(&traj.onsager[2 * t - 2]));
            onsager_g.push(bottom(&traj.onsager[2 * t - 1]));
        }
        Ok(AsymTrajectory { u, v, onsager_f, onsager_g, mode: traj.mode, seed: traj.seed, left_out: None })
    }

    /// Splits an embedded state-evolution path into `(Σ^U, Σ^V)`:
    /// `Σ^U_k(i,j) = Σ̄_k(2i,2j)` and `Σ^V_ℓ(i,j) = Σ̄_{m+ℓ}(2i+1,2j+1)`.
    pub fn project_se(&self, se: &SePath<T>) -> Result<(Array3<T>, Array3<T>)> {
        let h = se.horizon().div_ceil(2);
        if h == 0 {
            return Err(AmpError::HorizonMismatch { requested: 1, available: se.horizon() });
        }
        let cu = Array3::from_shape_fn((self.m, h, h), |(k, i, j)| se.cov(k)[[2 * i, 2 * j]]);
        let cv = Array3::from_shape_fn((self.n, h, h), |(l, i, j)| se.cov(self.m + l)[[2 * i + 1, 2 * j + 1]]);
        Ok((cu, cv))
    }
}

/// Free-function form of [`SymmetricAmp::run`].
#[allow(clippy::too_many_arguments)]
pub fn run_symmetric<T: Scalar>(
    a: &SampledMatrix<T>,
    profile: &VarianceProfile<T>,
    schedule: &NonlinearitySchedule<T>,
    z0: ArrayView1<T>,
    horizon: usize,
    mode: &OnsagerMode<T>,
    se: Option<&SePath<T>>,
) -> Result<AmpTrajectory<T>> {
    SymmetricAmp::new(profile.clone(), schedule.clone(), z0.to_owned())?.run(a, horizon, mode, se)
}

/// Free-function form of [`AsymmetricAmp::run`].
#[allow(clippy::too_many_arguments)]
pub fn run_asymmetric<T: Scalar>(
    a: &SampledMatrix<T>,
    profile: &VarianceProfile<T>,
    f: &NonlinearitySchedule<T>,
    g: &NonlinearitySchedule<T>,
    v0: ArrayView1<T>,
    horizon: usize,
    mode: &OnsagerMode<T>,
    se: Option<&AsymSePath<T>>,
) -> Result<AsymTrajectory<T>> {
    AsymmetricAmp::new(profile.clone(), f.clone(), g.clone(), v0.to_owned())?.run(a, horizon, mode, se)
}
