mod common;

use ampvp::ensembles::{ProfileKind, VarianceProfile};
use ampvp::nonlinearity::{CoordMap, NonlinearityFamily as Nf, NonlinearitySchedule};
use ampvp::quadrature::QuadratureRule;
use ampvp::state_evolution::*;
use common::normal_expect;
use ndarray::{array, Array1, Array2, Array3};

fn sym_ones(n: usize) -> VarianceProfile<f64> {
    VarianceProfile::constant(n, n, 1.0, ProfileKind::Symmetric).unwrap()
}

fn tanh_schedule(h: usize, n: usize) -> NonlinearitySchedule<f64> {
    NonlinearitySchedule::uniform(Nf::ScaledTanh { alpha: 1.0, beta: 1.0 }, h, n).unwrap()
}

fn z0(n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |i| 1.0 + 0.5 * ((i as f64) * 0.7).sin())
}

#[test]
fn identity_keeps_variance_fixed() {
    let n = 10;
    let z = z0(n);
    let sched = NonlinearitySchedule::uniform(Nf::Identity, 4, n).unwrap();
    let se = se_symmetric(&sym_ones(n), &sched, z.view(), 4).unwrap();
    let s1 = z.dot(&z) / n as f64;
    for t in 1..=5 {
        for k in 0..n {
            assert!((se.variance(t, k) - s1).abs() < 1e-12);
        }
    }
}

#[test]
fn tanh_matches_scalar_recursion() {
    let n = 8;
    let z = z0(n);
    let se = se_symmetric(&sym_ones(n), &tanh_schedule(5, n), z.view(), 5).unwrap();
    let mut var = z.iter().map(|x| x.tanh().powi(2)).sum::<f64>() / n as f64;
    for t in 1..=6 {
        for k in 0..n {
            assert!((se.variance(t, k) - var).abs() < 1e-8, "t={t}: {} vs {var}", se.variance(t, k));
        }
        var = normal_expect(var, |x| x.tanh().powi(2));
    }
    let star = sigma_star(&se, 6).unwrap();
    let want = (1..=6).map(|t| se.variance(t, 0).sqrt()).fold(1.0, f64::min);
    assert!((star - want).abs() < 1e-15);
}

#[test]
fn heterogeneous_profile_one_step_map_matches_monte_carlo() {
    // Each row of Σ is checked against a Monte Carlo evaluation of the defining
    // expectation, sampling earlier iterates from the path itself.
    let v = array![[1.0, 2.0], [2.0, 0.5]];
    let profile = VarianceProfile::new(v.clone(), ProfileKind::Symmetric).unwrap();
    let steps = vec![
        CoordMap::PerCoord(vec![Nf::ScaledTanh { alpha: 1.0, beta: 1.0 }, Nf::ScaledTanh { alpha: 2.0, beta: 0.5 }]),
        CoordMap::PerCoord(vec![Nf::SmoothSoftThreshold { theta: 0.5, delta: 0.1 }, Nf::Identity]),
        CoordMap::PerCoord(vec![Nf::ScaledTanh { alpha: 0.5, beta: 2.0 }, Nf::Affine { a: 1.0, b: 0.3 }]),
    ];
    let sched = NonlinearitySchedule::new(2, steps).unwrap();
    let z = array![0.7, -1.2];
    let se = se_symmetric(&profile, &sched, z.view(), 2).unwrap();
    let b = 1_000_000;
    let draws: Vec<Array2<f64>> = (0..2).map(|l| sample_se_sequence(&se, l, b, 77).unwrap()).collect();
    let w = profile.squared_over(2);
    for s1 in 0..3 {
        for s2 in 0..=s1 {
            let mut mean = [0.0; 2];
            let mut var = [0.0; 2];
            for l in 0..2 {
                let f1 = sched.family(s1, l);
                let f2 = sched.family(s2, l);
                use ampvp::nonlinearity::ScalarNonlinearity;
                let x = |s: usize, i: usize| if s == 0 { z[l] } else { draws[l][[i, s - 1]] };
                let vals: Vec<f64> = (0..b).map(|i| f1.eval(x(s1, i)) * f2.eval(x(s2, i))).collect();
                let (m, se_) = common::mean_and_se(&vals);
                mean[l] = m;
                var[l] = se_ * se_;
            }
            for k in 0..2 {
                let mc = w[[k, 0]] * mean[0] + w[[k, 1]] * mean[1];
                let sd = (w[[k, 0]].powi(2) * var[0] + w[[k, 1]].powi(2) * var[1]).sqrt();
                let got = se.cov(k)[[s1, s2]];
                assert!((got - mc).abs() <= 3.0 * sd + 1e-10, "k={k} ({s1},{s2}): {got} vs {mc} ± {sd}");
            }
        }
    }
}

#[test]
fn asymmetric_identity_alternation() {
    let (m, n) = (30, 60);
    let profile = VarianceProfile::constant(m, n, 1.0, ProfileKind::Rectangular).unwrap();
    let f = NonlinearitySchedule::uniform(Nf::Identity, 3, n).unwrap();
    let g = NonlinearitySchedule::uniform(Nf::Identity, 4, m).unwrap();
    let v0 = z0(n);
    let se = se_asymmetric(&profile, &f, &g, v0.view(), 3).unwrap();
    let inv_phi = n as f64 / m as f64;
    let mut v = v0.dot(&v0) / n as f64;
    for t in 1..=4 {
        let u = inv_phi * v;
        v = u;
        for k in 0..m {
            assert!((se.variance_u(t, k) - u).abs() < 1e-12);
        }
        for l in 0..n {
            assert!((se.variance_v(t, l) - v).abs() < 1e-12);
        }
    }
}

#[test]
fn asymmetric_first_variance_is_deterministic_sum() {
    let profile = VarianceProfile::<f64>::iid_abs_gaussian(7, 11, 1.0, 1.0, 3, ProfileKind::Rectangular).unwrap();
    let f = NonlinearitySchedule::uniform(Nf::ScaledTanh { alpha: 1.5, beta: 1.0 }, 1, 11).unwrap();
    let g = NonlinearitySchedule::uniform(Nf::ScaledTanh { alpha: 1.0, beta: 1.0 }, 2, 7).unwrap();
    let v0 = z0(11);
    let se = se_asymmetric(&profile, &f, &g, v0.view(), 1).unwrap();
    for k in 0..7 {
        let want: f64 =
            (0..11).map(|l| profile.values()[[k, l]].powi(2) * (1.5 * v0[l]).tanh().powi(2)).sum::<f64>() / 7.0;
        assert!((se.variance_u(1, k) - want).abs() < 1e-14);
    }
}

#[test]
fn sigma_star_cap_and_minimum() {
    let mut cov: Array3<f64> = Array3::from_elem((3, 2, 2), 0.0);
    for k in 0..3 {
        cov[[k, 0, 0]] = 2.0;
        cov[[k, 1, 1]] = 3.0;
    }
    let se = SePath::from_parts(cov.clone(), Array2::zeros((3, 3)), Array1::zeros(3)).unwrap();
    assert_eq!(sigma_star(&se, 2).unwrap(), 1.0);
    cov[[1, 1, 1]] = 0.04;
    let se = SePath::from_parts(cov, Array2::zeros((3, 3)), Array1::zeros(3)).unwrap();
    assert!((sigma_star(&se, 2).unwrap() - 0.2).abs() < 1e-15);
    assert_eq!(sigma_star(&se, 1).unwrap(), 1.0);
    assert!(sigma_star(&se, 3).is_err());
}

#[test]
fn sampling_moments() {
    let b = 20_000;
    let diag = SePath::<f64>::from_parts(
        Array3::from_shape_vec((1, 2, 2), vec![2.0, 0.0, 0.0, 0.5]).unwrap(),
        Array2::zeros((1, 1)),
        Array1::zeros(1),
    )
    .unwrap();
    let x = sample_se_sequence(&diag, 0, b, 1).unwrap();
    let c = x.t().dot(&x) / b as f64;
    let corr = c[[0, 1]] / (c[[0, 0]] * c[[1, 1]]).sqrt();
    assert!(corr.abs() <= 3.0 / (b as f64).sqrt());

    let sigma = array![[1.0, 0.6, 0.2], [0.6, 1.5, -0.3], [0.2, -0.3, 0.8]];
    let full = SePath::from_parts(sigma.clone().insert_axis(ndarray::Axis(0)), Array2::zeros((1, 1)), Array1::zeros(1)).unwrap();
    let x = sample_se_sequence(&full, 0, b, 2).unwrap();
    let c = x.t().dot(&x) / b as f64;
    let frob = (&c - &sigma).iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(frob <= 5.0 / (b as f64).sqrt(), "{frob}");

    let zero = SePath::<f64>::from_parts(Array3::zeros((1, 2, 2)), Array2::zeros((1, 1)), Array1::zeros(1)).unwrap();
    assert!(sample_se_sequence(&zero, 0, 10, 3).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn onsager_from_state_evolution() {
    let n = 6;
    let profile = VarianceProfile::<f64>::iid_abs_gaussian(n, n, 1.0, 1.0, 5, ProfileKind::Symmetric).unwrap();
    let w = profile.squared_over(n);
    let z = z0(n);
    let id = NonlinearitySchedule::uniform(Nf::Identity, 3, n).unwrap();
    let se = se_symmetric(&profile, &id, z.view(), 2).unwrap();
    let b = se_onsager(&se, &id, 2).unwrap();
    for k in 0..n {
        assert!((b[k] - w.row(k).sum()).abs() < 1e-14);
    }

    let ones = sym_ones(n);
    let th = tanh_schedule(3, n);
    let se = se_symmetric(&ones, &th, z.view(), 2).unwrap();
    for t in 1..=3 {
        let b = se_onsager(&se, &th, t).unwrap();
        let want = normal_expect(se.variance(t, 0), |x| 1.0 - x.tanh().powi(2));
        assert!((b[0] - want).abs() < 1e-8);
    }

    // σ = 0 collapses to F'(0).
    let zero = Array1::zeros(n);
    let se = se_symmetric(&ones, &th, zero.view(), 2).unwrap();
    assert_eq!(se.variance(1, 0), 0.0);
    let b = se_onsager(&se, &th, 1).unwrap();
    assert!((b[0] - 1.0).abs() < 1e-15);
}

#[test]
fn identity_scaling_law() {
    // With F = id the variance at horizon t picks up a factor c² per step.
    let n = 5;
    let base = VarianceProfile::<f64>::iid_abs_gaussian(n, n, 1.0, 0.5, 8, ProfileKind::Symmetric).unwrap();
    let c = 1.7;
    let scaled = VarianceProfile::new(base.values() * c, ProfileKind::Symmetric).unwrap();
    let sched = NonlinearitySchedule::uniform(Nf::Identity, 3, n).unwrap();
    let z = z0(n);
    let a = se_symmetric(&base, &sched, z.view(), 3).unwrap();
    let b = se_symmetric(&scaled, &sched, z.view(), 3).unwrap();
    for t in 1..=4 {
        for k in 0..n {
            let ratio = b.variance(t, k) / a.variance(t, k);
            assert!((ratio / c.powi(2 * t as i32) - 1.0).abs() < 1e-12);
        }
    }
    // Hand-unrolled: σ²_1 = W z², σ²_2 = W σ²_1.
    let w = base.squared_over(n);
    let s1 = w.dot(&z.mapv(|x| x * x));
    let s2 = w.dot(&s1);
    for k in 0..n {
        assert!((a.variance(1, k) - s1[k]).abs() < 1e-14);
        assert!((a.variance(2, k) - s2[k]).abs() < 1e-14);
    }
}

#[test]
fn quadrature_order_doubling_is_stable() {
    let n = 40;
    let profile = VarianceProfile::<f64>::block(&[20, 20], &[20, 20], &[vec![1.0, 0.5], vec![0.5, 1.5]], ProfileKind::Symmetric).unwrap();
    for fam in [Nf::ScaledTanh { alpha: 1.0, beta: 1.0 }, Nf::SmoothSoftThreshold { theta: 0.5, delta: 0.05 }] {
        let sched = NonlinearitySchedule::uniform(fam, 3, n).unwrap();
        let z = z0(n);
        let q = ampvp::quadrature::DEFAULT_ORDER;
        let a = se_symmetric_with(&QuadratureRule::gauss_hermite(q), &profile, &sched, z.view(), 3).unwrap();
        let b = se_symmetric_with(&QuadratureRule::gauss_hermite(2 * q), &profile, &sched, z.view(), 3).unwrap();
        let diff = (a.cov_all() - b.cov_all()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // The soft threshold is only piecewise polynomial, so Gauss–Hermite converges algebraically.
        let tol = if matches!(fam, Nf::ScaledTanh { .. }) { 1e-9 } else { 5e-4 };
        assert!(diff <= tol, "{fam:?}: {diff:e}");
    }
}

#[test]
fn permutation_equivariance() {
    let n = 6;
    let profile = VarianceProfile::<f64>::iid_abs_gaussian(n, n, 1.0, 1.0, 9, ProfileKind::Symmetric).unwrap();
    let fams: Vec<Nf<f64>> = (0..n).map(|i| Nf::ScaledTanh { alpha: 0.5 + i as f64 * 0.3, beta: 1.0 }).collect();
    let sched = NonlinearitySchedule::new(n, vec![CoordMap::PerCoord(fams.clone()); 3]).unwrap();
    let z = z0(n);
    let perm = [3, 0, 5, 1, 4, 2];
    let pv = Array2::from_shape_fn((n, n), |(i, j)| profile.values()[[perm[i], perm[j]]]);
    let pprofile = VarianceProfile::new(pv, ProfileKind::Symmetric).unwrap();
    let psched =
        NonlinearitySchedule::new(n, vec![CoordMap::PerCoord(perm.iter().map(|&p| fams[p]).collect()); 3]).unwrap();
    let pz = Array1::from_shape_fn(n, |i| z[perm[i]]);
    let a = se_symmetric(&profile, &sched, z.view(), 2).unwrap();
    let b = se_symmetric(&pprofile, &psched, pz.view(), 2).unwrap();
    for i in 0..n {
        let d = (&b.cov(i) - &a.cov(perm[i])).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d < 1e-13);
    }
}

#[test]
fn paths_are_psd() {
    let n = 30;
    let profile = VarianceProfile::<f64>::iid_abs_gaussian(n, n, 1.0, 1.0, 2, ProfileKind::Symmetric).unwrap();
    let se = se_symmetric(&profile, &tanh_schedule(4, n), z0(n).view(), 4).unwrap();
    assert!(se.max_clip() <= 1e-8);
    for k in 0..n {
        let (vals, _) = ampvp::linalg::sym_eigen(se.cov(k));
        assert!(vals[0] >= -1e-12);
    }
}
