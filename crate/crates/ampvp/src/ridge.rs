//! Ridge regression under a variance profile: the fixed-point system for `(b*, γ*)`,
//! its contraction solvers, closed-form and AMP-form estimators, and the Gaussian
//! sequence-model predictions.
//!
//! With `𝒱 = V∘V/m` and `τ_b = (𝒱ᵀ(1 − b))⁻¹`:
//!
//! ```text
//! γ² = D²_τ 𝒱ᵀ D²_{1−b} (ξ² + 𝒱 D²_{λτ/(1+λτ)} μ0²) + D²_τ 𝒱ᵀ D²_{1−b} 𝒱 D⁻²_{1+λτ} γ²
//! b/(1 − b) = 𝒱 (τ/(1 + λτ))
//! ```
//!
//! `b` is found through `u = (1 − b)/λ`, the fixed point of
//! `Φ(u) = 1/(λ + 𝒱 (1 + 𝒱ᵀu)⁻¹)`, and `γ` through `ζ = γ²/τ`, the fixed point of
//! the affine map `Ψ(ζ) = q/τ + D_τ 𝒱ᵀ D²_{1−b} 𝒱 D_{τ/(1+λτ)²} ζ`.

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::ensembles::{ProfileKind, SampledMatrix, VarianceProfile};
use crate::error::{AmpError, Result};
use crate::linalg::{cholesky, cholesky_solve, matvec, matvec_t};
use crate::scalar::Scalar;

/// Linear model `Y = A μ0 + ξ` with `A = V∘G`, `G_ij ~ N(0, 1/m)`, and penalty `λ`.
#[derive(Debug, Clone)]
pub struct RidgeProblem<T: Scalar> {
    profile: VarianceProfile<T>,
    weights: Array2<T>,
    lambda: T,
    mu0: Array1<T>,
    xi: Array1<T>,
}

impl<T: Scalar> RidgeProblem<T> {
    pub fn new(profile: VarianceProfile<T>, lambda: T, mu0: Array1<T>, xi: Array1<T>) -> Result<Self> {
        if profile.kind() != ProfileKind::Rectangular {
            return Err(AmpError::Shape("ridge needs a rectangular profile".into()));
        }
        let (m, n) = profile.shape();
        if mu0.len() != n || xi.len() != m {
            return Err(AmpError::Shape(format!("profile {m}x{n}, mu0 {}, xi {}", mu0.len(), xi.len())));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(AmpError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !profile.has_positive_margins() {
            return Err(AmpError::InvalidProfile("every row and column of V needs a nonzero entry".into()));
        }
        let weights = profile.squared_over(m);
        Ok(Self { profile, weights, lambda, mu0, xi })
    }

    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        Self::new(self.profile.clone(), lambda, self.mu0.clone(), self.xi.clone())
    }

    pub fn profile(&self) -> &VarianceProfile<T> {
        &self.profile
    }

    /// `𝒱 = V∘V/m`.
    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn mu0(&self) -> &Array1<T> {
        &self.mu0
    }

    pub fn xi(&self) -> &Array1<T> {
        &self.xi
    }

    /// `(m, n)`.
    pub fn shape(&self) -> (usize, usize) {
        self.profile.shape()
    }

    /// `Y = A μ0 + ξ`.
    pub fn response(&self, a: &SampledMatrix<T>) -> Result<Array1<T>> {
        if a.dim() != self.shape() {
            return Err(AmpError::Shape(format!("design {:?} for problem {:?}", a.dim(), self.shape())));
        }
        Ok(matvec(a.values.view(), self.mu0.view()) + &self.xi)
    }
}

/// Picard solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop when successive iterates differ by at most this in sup-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed-point equation residual required after convergence.
    pub certify_tol: f64,
    /// Relaxation weight `ω` in `x ← (1 − ω) x + ω Φ(x)`; `None` is plain Picard.
    pub damping: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, certify_tol: 1e-9, damping: None }
    }
}

impl SolverOptions {
    fn tol<T: Scalar>(&self) -> T {
        T::of(self.tol).max(T::epsilon() * T::of(16.0))
    }

    fn certify_tol<T: Scalar>(&self) -> T {
        T::of(self.certify_tol).max(T::epsilon() * T::of(1024.0))
    }

    fn omega<T: Scalar>(&self) -> Result<T> {
        match self.damping {
            None => Ok(T::one()),
            Some(w) if w > 0.0 && w <= 1.0 => Ok(T::of(w)),
            Some(w) => Err(AmpError::InvalidParameter(format!("damping must lie in (0, 1], got {w}"))),
        }
    }
}

/// Solution of the `b`-equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct BSolution<T: Scalar> {
    pub b: Array1<T>,
    pub tau: Array1<T>,
    pub u: Array1<T>,
    pub iterations: usize,
    /// Successive-iterate sup-norm gap per iteration.
    pub gaps: Vec<T>,
    /// Sup-norm residual of `b/(1−b) − 𝒱(τ/(1+λτ))`.
    pub residual: T,
}

/// The pair `(b*, γ*)` and derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RidgeFixedPoint<T: Scalar> {
    pub lambda: T,
    pub b: Array1<T>,
    pub tau: Array1<T>,
    pub gamma: Array1<T>,
    pub zeta: Array1<T>,
    pub b_iterations: usize,
    pub gamma_iterations: usize,
    /// Sup-norm residuals of the `γ`- and `b`-equations.
    pub residuals: (T, T),
}

impl<T: Scalar> RidgeFixedPoint<T> {
    /// `λτ*`, the effective per-coordinate regularization.
    pub fn effective_regularization(&self) -> Array1<T> {
        self.tau.mapv(|t| self.lambda * t)
    }
}

/// `|x − y|²/(xy)` for positive reals.
pub fn dr_metric<T: Scalar>(x: T, y: T) -> Result<T> {
    if !(x > T::zero() && y > T::zero()) {
        return Err(AmpError::InvalidParameter(format!("d_R needs positive arguments, got ({x}, {y})")));
    }
    let d = x - y;
    Ok(d * d / (x * y))
}

/// Coordinatewise maximum of [`dr_metric`].
pub fn dr_metric_vec<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>) -> Result<T> {
    if x.len() != y.len() {
        return Err(AmpError::Shape(format!("lengths {} and {}", x.len(), y.len())));
    }
    x.iter().zip(y.iter()).try_fold(T::zero(), |m, (&a, &b)| Ok(m.max(dr_metric(a, b)?)))
}

fn check_positive<T: Scalar>(x: ArrayView1<T>, what: &str) -> Result<()> {
    match x.iter().position(|v| !(*v > T::zero()) || !v.is_finite()) {
        Some(i) => Err(AmpError::InvalidParameter(format!("{what}[{i}] = {} is not positive", x[i]))),
        None => Ok(()),
    }
}

/// `Φ(u)_k = 1/(λ + Σ_ℓ 𝒱_kℓ/(1 + (𝒱ᵀu)_ℓ))`. Needs `u > 0`.
pub fn phi_map<T: Scalar>(u: ArrayView1<T>, problem: &RidgeProblem<T>) -> Result<Array1<T>> {
    let (m, _) = problem.shape();
    if u.len() != m {
        return Err(AmpError::Shape(format!("u has length {}, expected {m}", u.len())));
    }
    check_positive(u, "u")?;
    Ok(phi_unchecked(u, problem))
}

fn phi_unchecked<T: Scalar>(u: ArrayView1<T>, problem: &RidgeProblem<T>) -> Array1<T> {
    let w = problem.weights.view();
    let inner = matvec_t(w, u).mapv(|x| T::one() / (T::one() + x));
    matvec(w, inner.view()).mapv(|x| T::one() / (problem.lambda + x))
}

/// `τ_b = 1/(𝒱ᵀ(1 − b))`.
pub fn tau_of<T: Scalar>(problem: &RidgeProblem<T>, b: ArrayView1<T>) -> Array1<T> {
    let one_minus = b.mapv(|x| T::one() - x);
    matvec_t(problem.weights.view(), one_minus.view()).mapv(|x| T::one() / x)
}

/// Sup-norm residual of `b/(1−b) = 𝒱(τ_b/(1+λτ_b))`.
pub fn b_equation_residual<T: Scalar>(problem: &RidgeProblem<T>, b: ArrayView1<T>) -> T {
    let tau = tau_of(problem, b);
    let lam = problem.lambda;
    let rhs = matvec(problem.weights.view(), tau.mapv(|t| t / (T::one() + lam * t)).view());
    b.iter().zip(rhs.iter()).fold(T::zero(), |m, (&bk, &r)| m.max((bk / (T::one() - bk) - r).abs()))
}

/// Picard iteration `u ← Φ(u)` from `u⁰ = 1/(λ + row sums of 𝒱)`, then `b = 1 − λu`.
pub fn solve_b<T: Scalar>(problem: &RidgeProblem<T>, opts: &SolverOptions) -> Result<BSolution<T>> {
    let tol = opts.tol::<T>();
    let omega = opts.omega::<T>()?;
    let lam = problem.lambda;
    let rows = problem.weights.sum_axis(ndarray::Axis(1));
    let mut u = rows.mapv(|r| T::one() / (lam + r));
    let mut gaps = Vec::new();
    let certify = opts.certify_tol::<T>();
    let mut residual = T::infinity();
    for _ in 0..opts.max_iter {
        let phi = phi_unchecked(u.view(), problem);
        let next = if omega == T::one() { phi } else { &u * (T::one() - omega) + &(phi * omega) };
        let gap = sup_diff(next.view(), u.view());
        u = next;
        gaps.push(gap);
        // the certificate can lag the step size when b is close to 1
        if gap <= tol {
            residual = b_equation_residual(problem, u.mapv(|x| T::one() - lam * x).view());
            if residual <= certify {
                break;
            }
        }
    }
    if !(residual <= certify) {
        let last = gaps.last().copied().unwrap_or(T::zero());
        return Err(AmpError::NonConvergence { iterations: gaps.len(), residual: residual.min(last).as_f64() });
    }
    let b = u.mapv(|x| T::one() - lam * x);
    let tau = tau_of(problem, b.view());
    Ok(BSolution { b, tau, u, iterations: gaps.len(), gaps, residual })
}

fn sup_diff<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>) -> T {
    x.iter().zip(y.iter()).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

/// `q/τ`, the constant part of `Ψ`.
fn psi_offset<T: Scalar>(problem: &RidgeProblem<T>, b: ArrayView1<T>, tau: ArrayView1<T>) -> Array1<T> {
    let lam = problem.lambda;
    let w = problem.weights.view();
    let shrunk = Zip::from(tau).and(&problem.mu0).map_collect(|&t, &mu| {
        let s = lam * t / (T::one() + lam * t);
        s * s * mu * mu
    });
    let mut inner = matvec(w, shrunk.view());
    Zip::from(&mut inner).and(&problem.xi).and(b).for_each(|x, &xi, &bk| {
        let c = T::one() - bk;
        *x = c * c * (*x + xi * xi);
    });
    matvec_t(w, inner.view()) * tau
}

fn psi_linear<T: Scalar>(problem: &RidgeProblem<T>, b: ArrayView1<T>, tau: ArrayView1<T>, zeta: ArrayView1<T>) -> Array1<T> {
    let lam = problem.lambda;
    let w = problem.weights.view();
    let scaled = Zip::from(tau).and(zeta).map_collect(|&t, &z| {
        let d = T::one() + lam * t;
        t / (d * d) * z
    });
    let mut inner = matvec(w, scaled.view());
    Zip::from(&mut inner).and(b).for_each(|x, &bk| *x = *x * (T::one() - bk) * (T::one() - bk));
    matvec_t(w, inner.view()) * tau
}

/// `Ψ(ζ) = q/τ + D_τ 𝒱ᵀ D²_{1−b} 𝒱 D_{τ/(1+λτ)²} ζ`.
pub fn psi_map<T: Scalar>(zeta: ArrayView1<T>, b: ArrayView1<T>, tau: ArrayView1<T>, problem: &RidgeProblem<T>) -> Result<Array1<T>> {
    let (m, n) = problem.shape();
    if zeta.len() != n || tau.len() != n || b.len() != m {
        return Err(AmpError::Shape(format!("zeta {}, tau {}, b {} for problem {m}x{n}", zeta.len(), tau.len(), b.len())));
    }
    Ok(psi_offset(problem, b, tau) + &psi_linear(problem, b, tau, zeta))
}

/// Sup-norm residual of the `γ`-equation.
pub fn gamma_equation_residual<T: Scalar>(problem: &RidgeProblem<T>, b: ArrayView1<T>, gamma: ArrayView1<T>) -> T {
    let tau = tau_of(problem, b);
    let zeta = Zip::from(gamma).and(&tau).map_collect(|&g, &t| g * g / t);
    let rhs = (psi_offset(problem, b, tau.view()) + &psi_linear(problem, b, tau.view(), zeta.view())) * &tau;
    gamma.iter().zip(rhs.iter()).fold(T::zero(), |m, (&g, &r)| m.max((g * g - r).abs()))
}

/// Picard iteration on `ζ` from `0`; returns `(γ*, ζ*, iterations)`.
pub fn solve_gamma<T: Scalar>(
    problem: &RidgeProblem<T>,
    b: ArrayView1<T>,
    tau: ArrayView1<T>,
    opts: &SolverOptions,
) -> Result<(Array1<T>, Array1<T>, usize)> {
    let tol = opts.tol::<T>();
    let omega = opts.omega::<T>()?;
    let offset = psi_offset(problem, b, tau);
    let mut zeta = Array1::zeros(tau.len());
    let certify = opts.certify_tol::<T>();
    let mut last = T::infinity();
    for it in 1..=opts.max_iter {
        let psi = &offset + &psi_linear(problem, b, tau, zeta.view());
        let next = if omega == T::one() { psi } else { &zeta * (T::one() - omega) + &(psi * omega) };
        let gap = sup_diff(next.view(), zeta.view());
        zeta = next;
        last = gap;
        if gap <= tol {
            let gamma = Zip::from(&zeta).and(tau).map_collect(|&z, &t| (z * t).max(T::zero()).sqrt());
            last = gamma_equation_residual(problem, b, gamma.view());
            if last <= certify {
                return Ok((gamma, zeta, it));
            }
        }
    }
    Err(AmpError::NonConvergence { iterations: opts.max_iter, residual: last.as_f64() })
}

/// Solves both equations and certifies the residuals.
pub fn solve_fixed_point<T: Scalar>(problem: &RidgeProblem<T>, opts: &SolverOptions) -> Result<RidgeFixedPoint<T>> {
    let bs = solve_b(problem, opts)?;
    let (gamma, zeta, gamma_iterations) = solve_gamma(problem, bs.b.view(), bs.tau.view(), opts)?;
    let gres = gamma_equation_residual(problem, bs.b.view(), gamma.view());
    if gres > opts.certify_tol::<T>() {
        return Err(AmpError::NonConvergence { iterations: gamma_iterations, residual: gres.as_f64() });
    }
    Ok(RidgeFixedPoint {
        lambda: problem.lambda,
        b: bs.b,
        tau: bs.tau,
        gamma,
        zeta,
        b_iterations: bs.iterations,
        gamma_iterations,
        residuals: (gres, bs.residual),
    })
}

/// `(AᵀA + λI)⁻¹AᵀY`, through the `m×m` dual system `Aᵀ(AAᵀ + λI)⁻¹Y` when `n > m`.
pub fn ridge_closed_form<T: Scalar>(a: &SampledMatrix<T>, y: ArrayView1<T>, lambda: T) -> Result<Array1<T>> {
    let (m, n) = a.dim();
    if y.len() != m {
        return Err(AmpError::Shape(format!("design {m}x{n}, response {}", y.len())));
    }
    if !(lambda > T::zero()) {
        return Err(AmpError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let x = a.values.view();
    if n > m {
        let gram = x.dot(&x.t());
        Ok(matvec_t(x, dual_solve(gram, y, lambda)?.view()))
    } else {
        let gram = x.t().dot(&x);
        let rhs = matvec_t(x, y);
        dual_solve(gram, rhs.view(), lambda)
    }
}

fn dual_solve<T: Scalar>(mut gram: Array2<T>, rhs: ArrayView1<T>, lambda: T) -> Result<Array1<T>> {
    gram.diag_mut().mapv_inplace(|d| d + lambda);
    let l = cholesky(gram.view())?;
    Ok(cholesky_solve(l.view(), rhs))
}

/// Ridge estimates for several penalties sharing one Gram matrix.
pub fn ridge_closed_form_path<T: Scalar>(a: &SampledMatrix<T>, y: ArrayView1<T>, lambdas: &[T]) -> Result<Vec<Array1<T>>> {
    let (m, n) = a.dim();
    if y.len() != m {
        return Err(AmpError::Shape(format!("design {m}x{n}, response {}", y.len())));
    }
    let x = a.values.view();
    let (gram, rhs) = if n > m { (x.dot(&x.t()), y.to_owned()) } else { (x.t().dot(&x), matvec_t(x, y)) };
    lambdas
        .iter()
        .map(|&lam| {
            if !(lam > T::zero()) {
                return Err(AmpError::InvalidParameter(format!("lambda must be positive, got {lam}")));
            }
            let sol = dual_solve(gram.clone(), rhs.view(), lam)?;
            Ok(if n > m { matvec_t(x, sol.view()) } else { sol })
        })
        .collect()
}

/// Iterates of the AMP recursion for ridge, with their images in the original scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct RidgeAmpTrajectory<T: Scalar> {
    pub r: Vec<Array1<T>>,
    pub theta: Vec<Array1<T>>,
    /// `R^(t) = (1 − b*)^{1/2} r^(t)`.
    pub residual: Vec<Array1<T>>,
    /// `μ^(t) = τ*^{1/2} θ^(t)`.
    pub mu: Vec<Array1<T>>,
}

/// Runs, from `r⁰ = 0`, `θ⁰ = τ^{-1/2} μ0`,
///
/// ```text
/// r^(t+1) = A_b (θ0 − θ^(t)) + ξ_b + b* ∘ r^(t)
/// θ^(t+1) = (θ^(t) + A_bᵀ r^(t+1)) / (1 + λτ*)
/// ```
///
/// with `A_b = D^{1/2}_{1−b*} A D^{1/2}_{τ*}` and `ξ_b = (1 − b*)^{1/2} ξ`.
pub fn amp_ridge_run<T: Scalar>(
    problem: &RidgeProblem<T>,
    fp: &RidgeFixedPoint<T>,
    a: &SampledMatrix<T>,
    horizon: usize,
) -> Result<RidgeAmpTrajectory<T>> {
    let (m, n) = problem.shape();
    if a.dim() != (m, n) || fp.b.len() != m || fp.tau.len() != n {
        return Err(AmpError::Shape(format!("design {:?}, b {}, tau {} for problem {m}x{n}", a.dim(), fp.b.len(), fp.tau.len())));
    }
    let lam = problem.lambda;
    let row_scale = fp.b.mapv(|b| (T::one() - b).sqrt());
    let col_scale = fp.tau.mapv(|t| t.sqrt());
    let mut ab = a.values.clone();
    for (mut row, &s) in ab.rows_mut().into_iter().zip(row_scale.iter()) {
        row *= s;
        row *= &col_scale;
    }
    let xi_b = &problem.xi * &row_scale;
    let theta0 = &problem.mu0 / &col_scale;
    let shrink = fp.tau.mapv(|t| T::one() / (T::one() + lam * t));
    let mut r = vec![Array1::zeros(m)];
    let mut theta = vec![theta0.clone()];
    for t in 0..horizon {
        let diff = &theta0 - &theta[t];
        let next_r = matvec(ab.view(), diff.view()) + &xi_b + &(&fp.b * &r[t]);
        let next_theta = (&theta[t] + &matvec_t(ab.view(), next_r.view())) * &shrink;
        r.push(next_r);
        theta.push(next_theta);
    }
    let residual = r.iter().map(|x| x * &row_scale).collect();
    let mu = theta.iter().map(|x| x * &col_scale).collect();
    Ok(RidgeAmpTrajectory { r, theta, residual, mu })
}

/// `‖μ^(t) − μ̂‖/√n` for every `t`.
pub fn amp_ridge_errors<T: Scalar>(traj: &RidgeAmpTrajectory<T>, mu_hat: ArrayView1<T>) -> Vec<T> {
    let n = T::of_usize(mu_hat.len());
    traj.mu
        .iter()
        .map(|mu| (mu.iter().zip(mu_hat.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n).sqrt())
        .collect()
}

/// Proximal map of `½λ Σ η_ℓ μ_ℓ²`: `x/(1 + λη)`.
pub fn prox_ridge<T: Scalar>(x: ArrayView1<T>, lambda: T, eta: ArrayView1<T>) -> Array1<T> {
    Zip::from(x).and(eta).map_collect(|&x, &e| x / (T::one() + lambda * e))
}

/// Mean and variance of the sequence estimate `(μ0_j + γ*_j Z)/(1 + λτ*_j)`.
pub fn seq_moments<T: Scalar>(fp: &RidgeFixedPoint<T>, mu0: ArrayView1<T>, j: usize) -> Result<(T, T)> {
    if j >= mu0.len() || j >= fp.tau.len() {
        return Err(AmpError::IndexOutOfRange { index: j, len: fp.tau.len().min(mu0.len()) });
    }
    let d = T::one() + fp.lambda * fp.tau[j];
    let s = fp.gamma[j] / d;
    Ok((mu0[j] / d, s * s))
}

/// Per-coordinate mean and variance of the population residual `R*`.
pub fn residual_moments<T: Scalar>(fp: &RidgeFixedPoint<T>, problem: &RidgeProblem<T>) -> (Array1<T>, Array1<T>) {
    let lam = problem.lambda;
    let inner = Zip::from(&fp.tau).and(&problem.mu0).and(&fp.gamma).map_collect(|&t, &mu, &g| {
        let d = T::one() + lam * t;
        t * (lam * lam * t * mu * mu + g * g / t) / (d * d)
    });
    let var = Zip::from(&matvec(problem.weights.view(), inner.view()))
        .and(&fp.b)
        .map_collect(|&v, &b| (T::one() - b) * (T::one() - b) * v);
    let mean = Zip::from(&problem.xi).and(&fp.b).map_collect(|&x, &b| (T::one() - b) * x);
    (mean, var)
}

/// `n⁻¹ Σ_j [(λτ*_j μ0_j/(1+λτ*_j))² + (γ*_j/(1+λτ*_j))²]`.
pub fn theory_l2_error<T: Scalar>(fp: &RidgeFixedPoint<T>, mu0: ArrayView1<T>) -> T {
    let lam = fp.lambda;
    let total: T = (0..mu0.len())
        .map(|j| {
            let d = T::one() + lam * fp.tau[j];
            let bias = lam * fp.tau[j] * mu0[j] / d;
            let sd = fp.gamma[j] / d;
            bias * bias + sd * sd
        })
        .sum();
    total / T::of_usize(mu0.len())
}

/// Fixed point as CSV rows `(coordinate, b, tau, gamma, zeta)`; `b` is blank past `m`, the others past `n`.
pub fn write_fixed_point_csv<T: Scalar, W: std::io::Write>(fp: &RidgeFixedPoint<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["coordinate", "b", "tau", "gamma", "zeta"])?;
    let len = fp.b.len().max(fp.tau.len());
    let cell = |x: Option<&T>| x.map(|v| format!("{:.16e}", v.as_f64())).unwrap_or_default();
    for i in 0..len {
        w.write_record([i.to_string(), cell(fp.b.get(i)), cell(fp.tau.get(i)), cell(fp.gamma.get(i)), cell(fp.zeta.get(i))])?;
    }
    w.flush()?;
    Ok(())
}
