use boundtele::propagator::{
    asymptotic_u, bma_u, master_eq_coeffs, solve_u, stability_slack, BranchCut,
};
use boundtele::spectrum::find_bound_states;
use boundtele::{SpectralDensity, Tolerance};
use num_complex::Complex64;
use proptest::prelude::*;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn ohmic(eta: f64, omega_c: f64) -> SpectralDensity {
    SpectralDensity::ohmic(eta, 1.0, omega_c).unwrap()
}

#[test]
fn initial_decay_is_quadratic() {
    // 1 − |u(t)|² ≈ μ(0) t² at short times, with μ(0) = ηω_c² for s = 1.
    let sd = ohmic(0.2, 10.0);
    let loss = |h: f64| 1.0 - solve_u(&sd, 1.0, 4.0 * h, h, &tol()).unwrap().u[1].norm_sqr();
    let (a, b) = (loss(2e-3), loss(1e-3));
    assert!((a / b - 4.0).abs() < 0.1, "ratio {}", a / b);
    assert!((b / 1e-6 - 20.0).abs() < 0.5, "{}", b / 1e-6);
}

#[test]
fn no_bound_state_decays_to_zero() {
    let sd = ohmic(0.2, 4.0);
    let traj = solve_u(&sd, 1.0, 100.0, 5e-3, &tol()).unwrap();
    let late = traj
        .times
        .iter()
        .zip(&traj.u)
        .filter(|(&t, _)| t >= 90.0)
        .map(|(_, u)| u.norm())
        .fold(0.0, f64::max);
    assert!(late < 0.02, "{late}");
    // Envelope keeps shrinking: maxima over successive windows decrease.
    let window_max = |a: f64, b: f64| {
        traj.times
            .iter()
            .zip(&traj.u)
            .filter(|(&t, _)| t >= a && t < b)
            .map(|(_, u)| u.norm())
            .fold(0.0, f64::max)
    };
    let maxima: Vec<f64> = (0..10)
        .map(|k| window_max(10.0 * k as f64, 10.0 * (k + 1) as f64))
        .collect();
    assert!(maxima.windows(2).all(|w| w[1] < w[0]), "{maxima:?}");
}

#[test]
fn weak_coupling_follows_born_markov() {
    let sd = ohmic(0.01, 1.0);
    let traj = solve_u(&sd, 1.0, 20.0, 5e-3, &tol()).unwrap();
    for (&t, u) in traj.times.iter().zip(&traj.u).step_by(100) {
        let m = bma_u(&sd, 1.0, t, &tol()).unwrap().norm();
        assert!(
            (u.norm() - m).abs() <= 0.05 * m,
            "t={t}: {} vs {m}",
            u.norm()
        );
    }
}

#[test]
fn bma_rate_matches_spectral_density() {
    let sd = ohmic(0.2, 10.0);
    let kappa = std::f64::consts::PI * 0.2 * (-0.1f64).exp();
    for t in [0.0, 1.0, 7.5] {
        let u = bma_u(&sd, 1.0, t, &tol()).unwrap();
        assert!((u.norm() - (-kappa * t).exp()).abs() < 1e-14);
    }
    assert_eq!(
        bma_u(&sd, 1.0, 0.0, &tol()).unwrap(),
        Complex64::new(1.0, 0.0)
    );
    let gapped = SpectralDensity::semicircle(0.1, 0.08, 1.0).unwrap();
    assert!(bma_u(&gapped, 0.5, 1.0, &tol()).is_err());
}

#[test]
fn memory_produces_information_backflow() {
    let sd = ohmic(0.2, 10.0);
    let traj = solve_u(&sd, 1.0, 20.0, 2e-3, &tol()).unwrap();
    let coeffs = master_eq_coeffs(&traj).unwrap();
    assert!(coeffs.iter().any(|c| c.gamma < 0.0));
    assert!(coeffs
        .iter()
        .all(|c| c.gamma.is_finite() && c.omega.is_finite()));
}

#[test]
fn long_time_decomposition_matches_solver() {
    let sd = ohmic(0.2, 10.0);
    let bound = find_bound_states(&sd, 1.0, &tol()).unwrap();
    let traj = solve_u(&sd, 1.0, 100.0, 5e-3, &tol()).unwrap();
    for t in [50.0, 62.5, 75.0, 87.5, 100.0] {
        let a = asymptotic_u(&sd, 1.0, &bound, t, &tol()).unwrap();
        assert!((a.norm() - traj.at(t).norm()).abs() < 1e-2, "t={t}");
    }
    let cut = BranchCut::new(&sd, 1.0, 100.0, &tol()).unwrap();
    assert!(cut.eval(100.0).norm() < 1e-3);
    let total = cut.continuum_weight() + bound.iter().map(|b| b.residue).sum::<f64>();
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn decomposition_without_bound_state_vanishes() {
    let sd = ohmic(0.2, 4.0);
    let a = asymptotic_u(&sd, 1.0, &[], 100.0, &tol()).unwrap();
    assert!(a.norm() < 0.02);
    assert!(asymptotic_u(&sd, 1.0, &[], 0.0, &tol()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_stay_in_unit_disk(
        eta in 0.0..0.5f64,
        s in 0.5..3.0f64,
        omega_c in 0.5..10.0f64,
    ) {
        let sd = SpectralDensity::ohmic(eta, s, omega_c).unwrap();
        let h = 5e-3;
        let traj = solve_u(&sd, 1.0, 5.0, h, &tol()).unwrap();
        prop_assert_eq!(traj.u[0], Complex64::new(1.0, 0.0));
        let mu0 = sd.memory_kernel(0.0, &tol()).unwrap().re;
        let slack = stability_slack(h, 1.0, mu0);
        prop_assert!(traj.u.iter().all(|u| u.norm() <= 1.0 + slack));
    }
}
