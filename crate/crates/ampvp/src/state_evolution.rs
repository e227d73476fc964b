//! High-dimensional state evolution.
//!
//! Symmetric case: Gaussian vectors `Z^(1), Z^(2), …` with independent coordinates and
//!
//! ```text
//! cov(Z^(s1+1)_k, Z^(s2+1)_k) = n⁻¹ Σ_ℓ V²_kℓ E[F_{s1,ℓ}(Z^(s1)_ℓ) F_{s2,ℓ}(Z^(s2)_ℓ)],   Z^(0) = z^(0).
//! ```
//!
//! `Σ_k[i][j]` below is `cov(Z^(i+1)_k, Z^(j+1)_k)`, so a path of horizon `T`
//! describes `Z^(1..=T+1)` and uses `F_0..F_T`.

use log::warn;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ensembles::{ProfileKind, VarianceProfile};
use crate::error::{AmpError, Result};
use crate::linalg::{matvec, matvec_t, psd_clip, psd_factor};
use crate::nonlinearity::{NonlinearitySchedule, ScalarNonlinearity};
use crate::quadrature::QuadratureRule;
use crate::rng::{purpose, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SePath<T: Scalar> {
    horizon: usize,
    cov: Array3<T>,
    weights: Array2<T>,
    z0: Array1<T>,
    max_clip: T,
}

impl<T: Scalar> SePath<T> {
    /// Assembles a path from stored blocks (e.g. read back from CSV).
    pub fn from_parts(cov: Array3<T>, weights: Array2<T>, z0: Array1<T>) -> Result<Self> {
        let (n, h, h2) = cov.dim();
        if h == 0 || h != h2 || weights.dim() != (n, n) || z0.len() != n {
            return Err(AmpError::Shape(format!("blocks {:?}, weights {:?}, z0 {}", cov.dim(), weights.dim(), z0.len())));
        }
        Ok(Self { horizon: h - 1, cov, weights, z0, max_clip: T::zero() })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.cov.dim().0
    }

    /// `Σ_k`, indexed so that entry `[i][j]` is `cov(Z^(i+1)_k, Z^(j+1)_k)`.
    pub fn cov(&self, k: usize) -> ArrayView2<'_, T> {
        self.cov.index_axis(Axis(0), k)
    }

    pub fn cov_all(&self) -> &Array3<T> {
        &self.cov
    }

    /// `Var Z^(t)_k` for `t >= 1`; zero at `t = 0`.
    pub fn variance(&self, t: usize, k: usize) -> T {
        if t == 0 {
            T::zero()
        } else {
            self.cov[[k, t - 1, t - 1]]
        }
    }

    /// `σ²_{t,k}` as a `(T+1) × n` table, row `i` holding iteration `i+1`.
    pub fn variances(&self) -> Array2<T> {
        let (n, h, _) = self.cov.dim();
        Array2::from_shape_fn((h, n), |(i, k)| self.cov[[k, i, i]])
    }

    /// The weight matrix `V∘V/n` the recursion was run with.
    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn z0(&self) -> &Array1<T> {
        &self.z0
    }

    /// Largest negative eigenvalue magnitude removed by PSD clipping.
    pub fn max_clip(&self) -> T {
        self.max_clip
    }
}

/// Asymmetric path: `Σ^U_k` (k < m) and `Σ^V_ℓ` (ℓ < n). Cross-sequence
/// covariances are left unspecified and are not represented.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymSePath<T: Scalar> {
    horizon: usize,
    cov_u: Array3<T>,
    cov_v: Array3<T>,
    weights: Array2<T>,
    v0: Array1<T>,
    max_clip: T,
}

impl<T: Scalar> AsymSePath<T> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `(m, n)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.cov_u.dim().0, self.cov_v.dim().0)
    }

    /// `Σ^U_k[i][j] = cov(U^(i+1)_k, U^(j+1)_k)`.
    pub fn cov_u(&self, k: usize) -> ArrayView2<'_, T> {
        self.cov_u.index_axis(Axis(0), k)
    }

    /// `Σ^V_ℓ[i][j] = cov(V^(i+1)_ℓ, V^(j+1)_ℓ)`.
    pub fn cov_v(&self, l: usize) -> ArrayView2<'_, T> {
        self.cov_v.index_axis(Axis(0), l)
    }

    pub fn variance_u(&self, t: usize, k: usize) -> T {
        if t == 0 {
            T::zero()
        } else {
            self.cov_u[[k, t - 1, t - 1]]
        }
    }

    pub fn variance_v(&self, t: usize, l: usize) -> T {
        if t == 0 {
            T::zero()
        } else {
            self.cov_v[[l, t - 1, t - 1]]
        }
    }

    /// `V∘V/m`.
    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn v0(&self) -> &Array1<T> {
        &self.v0
    }

    pub fn max_clip(&self) -> T {
        self.max_clip
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    /// The deterministic initialization.
    Fixed,
    /// Gaussian with covariance row/column `i` of the source Σ.
    Gauss(usize),
}

/// `e_ℓ = E[f_{ta,ℓ}(X_a) f_{tb,ℓ}(X_b)]` for every source coordinate.
#[allow(clippy::too_many_arguments)]
fn cross_moments<T: Scalar>(
    rule: &QuadratureRule<T>,
    sched: &NonlinearitySchedule<T>,
    ta: usize,
    sa: Slot,
    tb: usize,
    sb: Slot,
    init: ArrayView1<T>,
    src: &Array3<T>,
    deriv: bool,
) -> Result<Array1<T>> {
    let dim = sched.dim();
    let out: Result<Vec<T>> = (0..dim)
        .into_par_iter()
        .map(|l| {
            let fa = sched.family(ta, l);
            let fb = sched.family(tb, l);
            let ea = |x: T| if deriv { fa.deriv(x) } else { fa.eval(x) };
            let eb = |x: T| if deriv { fb.deriv(x) } else { fb.eval(x) };
            Ok(match (sa, sb) {
                (Slot::Fixed, Slot::Fixed) => ea(init[l]) * eb(init[l]),
                (Slot::Fixed, Slot::Gauss(j)) => ea(init[l]) * rule.expect(src[[l, j, j]].max(T::zero()).sqrt(), eb),
                (Slot::Gauss(i), Slot::Fixed) => eb(init[l]) * rule.expect(src[[l, i, i]].max(T::zero()).sqrt(), ea),
                (Slot::Gauss(i), Slot::Gauss(j)) if i == j => {
                    rule.expect(src[[l, i, i]].max(T::zero()).sqrt(), |x| ea(x) * eb(x))
                }
                (Slot::Gauss(i), Slot::Gauss(j)) => {
                    let c = src[[l, i, j]];
                    rule.expect_pair([[src[[l, i, i]], c], [c, src[[l, j, j]]]], ea, eb)?
                }
            })
        })
        .collect();
    Ok(Array1::from(out?))
}

/// `E F'_{t,ℓ}(X)` per coordinate, where `X = init` when `slot` is fixed.
fn derivative_means<T: Scalar>(
    rule: &QuadratureRule<T>,
    sched: &NonlinearitySchedule<T>,
    t: usize,
    slot: Slot,
    init: ArrayView1<T>,
    src: &Array3<T>,
) -> Array1<T> {
    (0..sched.dim())
        .map(|l| {
            let f = sched.family(t, l);
            match slot {
                _ if f.is_affine() => f.deriv(T::zero()),
                Slot::Fixed => f.deriv(init[l]),
                Slot::Gauss(i) => rule.expect(src[[l, i, i]].max(T::zero()).sqrt(), |x| f.deriv(x)),
            }
        })
        .collect()
}

/// Clips every block to PSD and returns the largest clipped magnitude.
fn clip_blocks<T: Scalar>(cov: &mut Array3<T>) -> Result<T> {
    let mut worst = T::zero();
    for mut block in cov.outer_iter_mut() {
        let scale = block.diag().iter().fold(T::one(), |m, &v| m.max(v.abs()));
        let (clipped, w) = psd_clip(block.view());
        if w > T::of(1e-6) * scale {
            return Err(AmpError::NotPsd { eigenvalue: -w.as_f64() });
        }
        if w > T::zero() {
            block.assign(&clipped);
            worst = worst.max(w);
        }
    }
    if worst > T::of(1e-10) {
        warn!("state evolution: clipped negative eigenvalue of magnitude {:e}", worst.as_f64());
    }
    Ok(worst)
}

fn check_horizon<T: Scalar>(sched: &NonlinearitySchedule<T>, needed: usize) -> Result<()> {
    if sched.horizon() < needed {
        return Err(AmpError::HorizonMismatch { requested: needed, available: sched.horizon() });
    }
    Ok(())
}

pub fn se_symmetric<T: Scalar>(
    profile: &VarianceProfile<T>,
    schedule: &NonlinearitySchedule<T>,
    z0: ArrayView1<T>,
    horizon: usize,
) -> Result<SePath<T>> {
    se_symmetric_with(&QuadratureRule::default(), profile, schedule, z0, horizon)
}

pub fn se_symmetric_with<T: Scalar>(
    rule: &QuadratureRule<T>,
    profile: &VarianceProfile<T>,
    schedule: &NonlinearitySchedule<T>,
    z0: ArrayView1<T>,
    horizon: usize,
) -> Result<SePath<T>> {
    if profile.kind() != ProfileKind::Symmetric {
        return Err(AmpError::Shape("se_symmetric needs a symmetric profile".into()));
    }
    let n = profile.shape().0;
    if z0.len() != n || schedule.dim() != n {
        return Err(AmpError::Shape(format!("profile {n}, z0 {}, schedule {}", z0.len(), schedule.dim())));
    }
    check_horizon(schedule, horizon)?;
    let weights = profile.squared_over(n);
    let h = horizon + 1;
    let mut cov = Array3::<T>::zeros((n, h, h));
    let slot = |s: usize| if s == 0 { Slot::Fixed } else { Slot::Gauss(s - 1) };
    for s1 in 0..h {
        for s2 in 0..=s1 {
            let e = cross_moments(rule, schedule, s1, slot(s1), s2, slot(s2), z0, &cov, false)?;
            let row = matvec(weights.view(), e.view());
            for k in 0..n {
                cov[[k, s1, s2]] = row[k];
                cov[[k, s2, s1]] = row[k];
            }
        }
    }
    let max_clip = clip_blocks(&mut cov)?;
    Ok(SePath { horizon, cov, weights, z0: z0.to_owned(), max_clip })
}

/// Alternating `U`/`V` recursions with `1/m` normalization. Needs `F_0..F_T` and `G_1..G_{T+1}`.
pub fn se_asymmetric<T: Scalar>(
    profile: &VarianceProfile<T>,
    f_schedule: &NonlinearitySchedule<T>,
    g_schedule: &NonlinearitySchedule<T>,
    v0: ArrayView1<T>,
    horizon: usize,
) -> Result<AsymSePath<T>> {
    se_asymmetric_with(&QuadratureRule::default(), profile, f_schedule, g_schedule, v0, horizon)
}

pub fn se_asymmetric_with<T: Scalar>(
    rule: &QuadratureRule<T>,
    profile: &VarianceProfile<T>,
    f_schedule: &NonlinearitySchedule<T>,
    g_schedule: &NonlinearitySchedule<T>,
    v0: ArrayView1<T>,
    horizon: usize,
) -> Result<AsymSePath<T>> {
    if profile.kind() != ProfileKind::Rectangular {
        return Err(AmpError::Shape("se_asymmetric needs a rectangular profile".into()));
    }
    let (m, n) = profile.shape();
    if v0.len() != n || f_schedule.dim() != n || g_schedule.dim() != m {
        return Err(AmpError::Shape(format!(
            "profile {m}x{n}, v0 {}, F dim {}, G dim {}",
            v0.len(),
            f_schedule.dim(),
            g_schedule.dim()
        )));
    }
    check_horizon(f_schedule, horizon)?;
    check_horizon(g_schedule, horizon + 1)?;
    let weights = profile.squared_over(m);
    let h = horizon + 1;
    let mut cov_u = Array3::<T>::zeros((m, h, h));
    let mut cov_v = Array3::<T>::zeros((n, h, h));
    let empty = Array1::<T>::zeros(m);
    let v_slot = |s: usize| if s == 0 { Slot::Fixed } else { Slot::Gauss(s - 1) };
    for s1 in 0..h {
        for s2 in 0..=s1 {
            let e = cross_moments(rule, f_schedule, s1, v_slot(s1), s2, v_slot(s2), v0, &cov_v, false)?;
            let row = matvec(weights.view(), e.view());
            for k in 0..m {
                cov_u[[k, s1, s2]] = row[k];
                cov_u[[k, s2, s1]] = row[k];
            }
        }
        for s2 in 0..=s1 {
            let e = cross_moments(
                rule,
                g_schedule,
                s1 + 1,
                Slot::Gauss(s1),
                s2 + 1,
                Slot::Gauss(s2),
                empty.view(),
                &cov_u,
                false,
            )?;
            let row = matvec_t(weights.view(), e.view());
            for l in 0..n {
                cov_v[[l, s1, s2]] = row[l];
                cov_v[[l, s2, s1]] = row[l];
            }
        }
    }
    let max_clip = clip_blocks(&mut cov_u)?.max(clip_blocks(&mut cov_v)?);
    Ok(AsymSePath { horizon, cov_u, cov_v, weights, v0: v0.to_owned(), max_clip })
}

/// `σ*^[t] = min(1, min_{s ≤ t} min_k sd(Z^(s)_k))` for `t` in `1..=T+1`.
pub fn sigma_star<T: Scalar>(se: &SePath<T>, t: usize) -> Result<T> {
    if t == 0 || t > se.horizon + 1 {
        return Err(AmpError::HorizonMismatch { requested: t, available: se.horizon + 1 });
    }
    let mut best = T::one();
    for s in 1..=t {
        for k in 0..se.dim() {
            best = best.min(se.variance(s, k).max(T::zero()).sqrt());
        }
    }
    Ok(best)
}

/// `count` i.i.d. draws of `(Z^(1)_k, …, Z^(T+1)_k)`, one per row.
pub fn sample_se_sequence<T: Scalar>(se: &SePath<T>, k: usize, count: usize, seed: u64) -> Result<Array2<T>> {
    if k >= se.dim() {
        return Err(AmpError::IndexOutOfRange { index: k, len: se.dim() });
    }
    sample_gaussian_rows(se.cov(k), count, seed, k as u64)
}

pub(crate) fn sample_gaussian_rows<T: Scalar>(cov: ArrayView2<T>, count: usize, seed: u64, index: u64) -> Result<Array2<T>> {
    let factor = psd_factor(cov);
    let d = cov.nrows();
    let mut rng = stream(seed, purpose::SE_SAMPLES, index);
    let g = Array2::from_shape_simple_fn((count, d), || T::of(rng.sample::<f64, _>(StandardNormal)));
    Ok(g.dot(&factor.t()))
}

/// `b̄_{t,k} = n⁻¹ Σ_ℓ V²_kℓ E F'_{t,ℓ}(Z^(t)_ℓ)`, needs `t <= T+1`.
pub fn se_onsager<T: Scalar>(se: &SePath<T>, schedule: &NonlinearitySchedule<T>, t: usize) -> Result<Array1<T>> {
    se_onsager_with(&QuadratureRule::default(), se, schedule, t)
}

pub fn se_onsager_with<T: Scalar>(
    rule: &QuadratureRule<T>,
    se: &SePath<T>,
    schedule: &NonlinearitySchedule<T>,
    t: usize,
) -> Result<Array1<T>> {
    if t > se.horizon + 1 {
        return Err(AmpError::HorizonMismatch { requested: t, available: se.horizon + 1 });
    }
    check_horizon(schedule, t)?;
    let slot = if t == 0 { Slot::Fixed } else { Slot::Gauss(t - 1) };
    let e = derivative_means(rule, schedule, t, slot, se.z0.view(), &se.cov);
    Ok(matvec(se.weights.view(), e.view()))
}

/// State-evolution Onsager pair `(b̄^F_t, b̄^G_t)`; `b̄^G_0` is zero.
pub fn se_onsager_asym<T: Scalar>(
    se: &AsymSePath<T>,
    f_schedule: &NonlinearitySchedule<T>,
    g_schedule: &NonlinearitySchedule<T>,
    t: usize,
) -> Result<(Array1<T>, Array1<T>)> {
    Ok((se_onsager_f(se, f_schedule, t)?, se_onsager_g(se, g_schedule, t)?))
}

/// `b̄^F_t = m⁻¹ V∘V E F'_t(V^(t))`, length `m`.
pub fn se_onsager_f<T: Scalar>(se: &AsymSePath<T>, f_schedule: &NonlinearitySchedule<T>, t: usize) -> Result<Array1<T>> {
    if t > se.horizon + 1 {
        return Err(AmpError::HorizonMismatch { requested: t, available: se.horizon + 1 });
    }
    check_horizon(f_schedule, t)?;
    let slot = if t == 0 { Slot::Fixed } else { Slot::Gauss(t - 1) };
    let ef = derivative_means(&QuadratureRule::default(), f_schedule, t, slot, se.v0.view(), &se.cov_v);
    Ok(matvec(se.weights.view(), ef.view()))
}

/// `b̄^G_t = m⁻¹ (V∘V)ᵀ E G'_t(U^(t))`, length `n`; zero at `t = 0`.
pub fn se_onsager_g<T: Scalar>(se: &AsymSePath<T>, g_schedule: &NonlinearitySchedule<T>, t: usize) -> Result<Array1<T>> {
    if t == 0 {
        return Ok(Array1::zeros(se.cov_v.dim().0));
    }
    if t > se.horizon + 1 {
        return Err(AmpError::HorizonMismatch { requested: t, available: se.horizon + 1 });
    }
    check_horizon(g_schedule, t)?;
    let empty = Array1::zeros(se.cov_u.dim().0);
    let eg = derivative_means(&QuadratureRule::default(), g_schedule, t, Slot::Gauss(t - 1), empty.view(), &se.cov_u);
    Ok(matvec_t(se.weights.view(), eg.view()))
}

/// Leading `(h+1) × (h+1)` sub-path.
pub fn truncate<T: Scalar>(se: &SePath<T>, horizon: usize) -> Result<SePath<T>> {
    if horizon > se.horizon {
        return Err(AmpError::HorizonMismatch { requested: horizon, available: se.horizon });
    }
    Ok(SePath {
        horizon,
        cov: se.cov.slice(s![.., ..=horizon, ..=horizon]).to_owned(),
        weights: se.weights.clone(),
        z0: se.z0.clone(),
        max_clip: se.max_clip,
    })
}
