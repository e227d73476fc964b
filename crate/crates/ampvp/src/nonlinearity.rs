//! Separable nonlinearities `F_t(z) = (F_{t,ℓ}(z_ℓ))` and their derivatives.
//!
//! Only named parametric families are supported, so that every run is fully
//! described by its config. Code that needs another smooth scalar map can
//! implement [`ScalarNonlinearity`] and drive the AMP recursions through it.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{AmpError, Result};
use crate::scalar::Scalar;

/// A scalar map with an analytic first derivative and a global Lipschitz bound.
pub trait ScalarNonlinearity<T> {
    fn eval(&self, x: T) -> T;
    fn deriv(&self, x: T) -> T;
    /// An upper bound on `sup |deriv|`.
    fn lipschitz(&self) -> T;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum NonlinearityFamily<T: Scalar> {
    Identity,
    /// `a z + b`
    Affine { a: T, b: T },
    /// `beta · tanh(alpha z)`
    ScaledTanh { alpha: T, beta: T },
    /// Soft threshold at `theta` with a C² blend of half-width `delta` around the kink.
    SmoothSoftThreshold { theta: T, delta: T },
    /// `(center - v)/(1 + lambda·tau) - center`: the ridge proximal step written as a map of `v`.
    RidgeProxAffine { lambda: T, tau: T, center: T },
}

pub const DEFAULT_SMOOTHING: f64 = 0.05;

impl<T: Scalar> NonlinearityFamily<T> {
    pub fn zero() -> Self {
        Self::Affine { a: T::zero(), b: T::zero() }
    }

    pub fn smooth_soft_threshold(theta: T) -> Self {
        Self::SmoothSoftThreshold { theta, delta: T::of(DEFAULT_SMOOTHING).min(theta) }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[T]| xs.iter().all(|x| x.is_finite());
        let ok = match *self {
            Self::Identity => true,
            Self::Affine { a, b } => finite(&[a, b]),
            Self::ScaledTanh { alpha, beta } => finite(&[alpha, beta]),
            Self::SmoothSoftThreshold { theta, delta } => finite(&[theta, delta]) && delta > T::zero() && delta <= theta,
            Self::RidgeProxAffine { lambda, tau, center } => {
                finite(&[lambda, tau, center]) && lambda * tau > -T::one() && lambda * tau != -T::one()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AmpError::InvalidParameter(format!("bad nonlinearity parameters {self:?}")))
        }
    }

    /// Derivative is constant, so data-driven and state-evolution Onsager terms coincide.
    pub fn is_affine(&self) -> bool {
        matches!(self, Self::Identity | Self::Affine { .. } | Self::RidgeProxAffine { .. })
    }
}

impl<T: Scalar> ScalarNonlinearity<T> for NonlinearityFamily<T> {
    fn eval(&self, x: T) -> T {
        match *self {
            Self::Identity => x,
            Self::Affine { a, b } => a * x + b,
            Self::ScaledTanh { alpha, beta } => beta * (alpha * x).tanh(),
            Self::SmoothSoftThreshold { theta, delta } => {
                let ax = x.abs();
                if ax <= theta - delta {
                    T::zero()
                } else if ax >= theta + delta {
                    x.signum() * (ax - theta)
                } else {
                    let w = (ax - theta + delta) / (delta + delta);
                    let w3 = w * w * w;
                    x.signum() * (delta + delta) * (w3 - w3 * w * T::of(0.5))
                }
            }
            Self::RidgeProxAffine { lambda, tau, center } => (center - x) / (T::one() + lambda * tau) - center,
        }
    }

    fn deriv(&self, x: T) -> T {
        match *self {
            Self::Identity => T::one(),
            Self::Affine { a, .. } => a,
            Self::ScaledTanh { alpha, beta } => {
                let t = (alpha * x).tanh();
                alpha * beta * (T::one() - t * t)
            }
            Self::SmoothSoftThreshold { theta, delta } => {
                let w = ((x.abs() - theta + delta) / (delta + delta)).max(T::zero()).min(T::one());
                w * w * (T::of(3.0) - w - w)
            }
            Self::RidgeProxAffine { lambda, tau, .. } => -T::one() / (T::one() + lambda * tau),
        }
    }

    fn lipschitz(&self) -> T {
        match *self {
            Self::Identity => T::one(),
            Self::Affine { a, .. } => a.abs(),
            Self::ScaledTanh { alpha, beta } => (alpha * beta).abs(),
            Self::SmoothSoftThreshold { .. } => T::one(),
            Self::RidgeProxAffine { lambda, tau, .. } => (T::one() / (T::one() + lambda * tau)).abs(),
        }
    }
}

/// True iff `max |deriv|` over the grid is at most `claim`.
pub fn check_lipschitz<T: Scalar, F: ScalarNonlinearity<T>>(f: &F, claim: T, grid: &[T]) -> bool {
    grid.iter().all(|&x| f.deriv(x).abs() <= claim)
}

/// Which family applies to each coordinate at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum CoordMap<T: Scalar> {
    Uniform(NonlinearityFamily<T>),
    /// Contiguous blocks; `ends` holds the exclusive end of each block.
    Blocks { ends: Vec<usize>, families: Vec<NonlinearityFamily<T>> },
    PerCoord(Vec<NonlinearityFamily<T>>),
}

impl<T: Scalar> CoordMap<T> {
    pub fn blocks(sizes: &[usize], families: Vec<NonlinearityFamily<T>>) -> Self {
        let ends = sizes
            .iter()
            .scan(0, |acc, &s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        CoordMap::Blocks { ends, families }
    }

    fn family(&self, l: usize) -> &NonlinearityFamily<T> {
        match self {
            CoordMap::Uniform(f) => f,
            CoordMap::Blocks { ends, families } => &families[ends.partition_point(|&e| e <= l)],
            CoordMap::PerCoord(fs) => &fs[l],
        }
    }

    fn families(&self) -> Box<dyn Iterator<Item = &NonlinearityFamily<T>> + '_> {
        match self {
            CoordMap::Uniform(f) => Box::new(std::iter::once(f)),
            CoordMap::Blocks { families, .. } => Box::new(families.iter()),
            CoordMap::PerCoord(fs) => Box::new(fs.iter()),
        }
    }

    fn apply(&self, z: ArrayView1<T>, deriv: bool) -> Array1<T> {
        let one = |f: &NonlinearityFamily<T>, x: T| if deriv { f.deriv(x) } else { f.eval(x) };
        match self {
            CoordMap::Uniform(f) => z.mapv(|x| one(f, x)),
            _ => z.iter().enumerate().map(|(l, &x)| one(self.family(l), x)).collect(),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            CoordMap::Uniform(_) => {}
            CoordMap::Blocks { ends, families } => {
                if ends.len() != families.len() || ends.last() != Some(&dim) || ends.windows(2).any(|w| w[0] > w[1]) {
                    return Err(AmpError::Shape(format!("coordinate blocks do not cover {dim} coordinates")));
                }
            }
            CoordMap::PerCoord(fs) => {
                if fs.len() != dim {
                    return Err(AmpError::Shape(format!("{} per-coordinate families for {dim} coordinates", fs.len())));
                }
            }
        }
        self.families().try_for_each(|f| f.validate())
    }
}

/// Table of `F_{t,ℓ}` for `t ∈ [0, horizon]`, `ℓ ∈ [0, dim)`. Index `t = -1` is the zero map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NonlinearitySchedule<T: Scalar> {
    dim: usize,
    steps: Vec<CoordMap<T>>,
}

impl<T: Scalar> NonlinearitySchedule<T> {
    pub fn new(dim: usize, steps: Vec<CoordMap<T>>) -> Result<Self> {
        if steps.is_empty() {
            return Err(AmpError::InvalidParameter("schedule needs at least one step".into()));
        }
        steps.iter().try_for_each(|s| s.check(dim))?;
        Ok(Self { dim, steps })
    }

    /// The same family at every iteration and coordinate.
    pub fn uniform(family: NonlinearityFamily<T>, horizon: usize, dim: usize) -> Result<Self> {
        Self::new(dim, vec![CoordMap::Uniform(family); horizon + 1])
    }

    /// One family per iteration, shared by all coordinates.
    pub fn per_t(families: Vec<NonlinearityFamily<T>>, dim: usize) -> Result<Self> {
        Self::new(dim, families.into_iter().map(CoordMap::Uniform).collect())
    }

    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, t: usize) -> Option<&CoordMap<T>> {
        self.steps.get(t)
    }

    pub fn family(&self, t: usize, l: usize) -> &NonlinearityFamily<T> {
        self.steps[t].family(l)
    }

    fn checked(&self, t: isize, z: ArrayView1<T>) -> Result<Option<&CoordMap<T>>> {
        if z.len() != self.dim {
            return Err(AmpError::Shape(format!("input length {} for schedule of dimension {}", z.len(), self.dim)));
        }
        if t < -1 {
            return Err(AmpError::InvalidParameter(format!("iteration index {t} < -1")));
        }
        if t == -1 {
            return Ok(None);
        }
        self.steps
            .get(t as usize)
            .map(Some)
            .ok_or(AmpError::HorizonMismatch { requested: t as usize, available: self.horizon() })
    }

    pub fn eval(&self, t: isize, z: ArrayView1<T>) -> Result<Array1<T>> {
        Ok(match self.checked(t, z)? {
            Some(step) => step.apply(z, false),
            None => Array1::zeros(self.dim),
        })
    }

    pub fn deriv(&self, t: isize, z: ArrayView1<T>) -> Result<Array1<T>> {
        Ok(match self.checked(t, z)? {
            Some(step) => step.apply(z, true),
            None => Array1::zeros(self.dim),
        })
    }

    /// Global Lipschitz bound over the whole table.
    pub fn lipschitz(&self) -> T {
        self.steps.iter().flat_map(|s| s.families()).fold(T::zero(), |m, f| m.max(f.lipschitz()))
    }

    pub fn is_affine_at(&self, t: usize) -> bool {
        self.steps[t].families().all(|f| f.is_affine())
    }

    pub fn is_affine(&self) -> bool {
        (0..self.steps.len()).all(|t| self.is_affine_at(t))
    }

    /// Keeps steps `0..=horizon`.
    pub fn truncated(&self, horizon: usize) -> Result<Self> {
        if horizon > self.horizon() {
            return Err(AmpError::HorizonMismatch { requested: horizon, available: self.horizon() });
        }
        Ok(Self { dim: self.dim, steps: self.steps[..=horizon].to_vec() })
    }
}

/// Config form of a schedule.
///
/// ```json
/// {"scope": "all", "family": "scaled-tanh", "params": {"alpha": 1, "beta": 1}}
/// {"scope": "per_t", "steps": [{"family": "identity"}, {"family": "scaled-tanh", "params": {"alpha": 1, "beta": 1}}]}
/// {"scope": "per_coord_blocks", "blocks": [{"size": 250, "family": "identity"}, {"size": 250, "family": "identity"}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "snake_case")]
pub enum ScheduleSpec {
    All {
        #[serde(flatten)]
        family: NonlinearityFamily<f64>,
    },
    PerT {
        steps: Vec<NonlinearityFamily<f64>>,
    },
    PerCoordBlocks {
        blocks: Vec<BlockSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub size: usize,
    #[serde(flatten)]
    pub family: NonlinearityFamily<f64>,
}

fn cast_family<T: Scalar>(f: &NonlinearityFamily<f64>) -> NonlinearityFamily<T> {
    use NonlinearityFamily as N;
    match *f {
        N::Identity => N::Identity,
        N::Affine { a, b } => N::Affine { a: T::of(a), b: T::of(b) },
        N::ScaledTanh { alpha, beta } => N::ScaledTanh { alpha: T::of(alpha), beta: T::of(beta) },
        N::SmoothSoftThreshold { theta, delta } => N::SmoothSoftThreshold { theta: T::of(theta), delta: T::of(delta) },
        N::RidgeProxAffine { lambda, tau, center } => {
            N::RidgeProxAffine { lambda: T::of(lambda), tau: T::of(tau), center: T::of(center) }
        }
    }
}

impl ScheduleSpec {
    pub fn build<T: Scalar>(&self, horizon: usize, dim: usize) -> Result<NonlinearitySchedule<T>> {
        match self {
            ScheduleSpec::All { family } => NonlinearitySchedule::uniform(cast_family(family), horizon, dim),
            ScheduleSpec::PerT { steps } => {
                if steps.len() < horizon + 1 {
                    return Err(AmpError::HorizonMismatch { requested: horizon, available: steps.len().saturating_sub(1) });
                }
                NonlinearitySchedule::per_t(steps[..=horizon].iter().map(cast_family).collect(), dim)
            }
            ScheduleSpec::PerCoordBlocks { blocks } => {
                let sizes: Vec<usize> = blocks.iter().map(|b| b.size).collect();
                let fams = blocks.iter().map(|b| cast_family(&b.family)).collect();
                NonlinearitySchedule::new(dim, vec![CoordMap::blocks(&sizes, fams); horizon + 1])
            }
        }
    }
}
