use std::f64::consts::PI;

use boundtele::export::{write_fidelity, write_outcomes, write_trajectory};
use boundtele::propagator::{master_eq_coeffs, solve_u};
use boundtele::spectrum::find_bound_states;
use boundtele::teleport::cv::{
    avg_fidelity_cv, oracle_avg_fidelity_cv, CvProtocolParams, OracleGrid,
};
use boundtele::teleport::dv::{
    avg_fidelity_dv, ideal_fidelity_dv, oracle_avg_fidelity_dv, simulate_teleport_dv,
    QubitInputState,
};
use boundtele::teleport::{fidelity_series, Protocol};
use boundtele::{SpectralDensity, Tolerance};
use num_complex::Complex64;

fn tol() -> Tolerance {
    Tolerance::default()
}

#[test]
fn free_channel_series_is_ideal() {
    let sd = SpectralDensity::ohmic(0.0, 1.0, 10.0).unwrap();
    let traj = solve_u(&sd, 1.0, 10.0, 1e-3, &tol()).unwrap();
    let rows = fidelity_series(&traj, Protocol::Dv, 1.0, None, &[]).unwrap();
    for r in rows.iter().step_by(250) {
        assert!((r.exact - ideal_fidelity_dv(1.0, r.t)).abs() < 1e-5);
        assert_eq!(r.steady_envelope, 2.0 / 3.0);
        assert!(r.bma.is_none());
    }
}

#[test]
fn oracles_agree_along_a_solved_trajectory() {
    let sd = SpectralDensity::ohmic(0.2, 1.0, 10.0).unwrap();
    let traj = solve_u(&sd, 1.0, 10.0, 5e-3, &tol()).unwrap();
    let params = CvProtocolParams::new(2.0, Complex64::new(0.4, -0.3)).unwrap();
    for &t in &[0.5, 2.0, 5.0, 10.0] {
        let u = traj.at(t);
        let dv = oracle_avg_fidelity_dv(u, 16, 16).unwrap();
        assert!((dv - avg_fidelity_dv(u)).abs() < 1e-6);
        let cv = oracle_avg_fidelity_cv(u, &params, &OracleGrid::default()).unwrap();
        assert!((cv.fidelity - avg_fidelity_cv(u, 2.0).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn steady_envelope_uses_residue() {
    let sd = SpectralDensity::ohmic(0.2, 1.0, 10.0).unwrap();
    let bound = find_bound_states(&sd, 1.0, &tol()).unwrap();
    let traj = solve_u(&sd, 1.0, 2.0, 1e-2, &tol()).unwrap();
    let z = bound[0].residue;
    let rows = fidelity_series(&traj, Protocol::Cv { r: 2.0 }, 1.0, Some(0.5), &bound).unwrap();
    let expect = 1.0 / (2.0 - z * z * (1.0 - (-4.0f64).exp()));
    assert!(rows.iter().all(|r| r.steady_envelope == expect));
    assert!(rows.iter().all(|r| r.bma.is_some()));
}

#[test]
fn exports_are_deterministic_and_parse_back() {
    let sd = SpectralDensity::ohmic(0.2, 1.0, 10.0).unwrap();
    let render = || {
        let traj = solve_u(&sd, 1.0, 1.0, 1e-2, &tol()).unwrap();
        let coeffs = master_eq_coeffs(&traj).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj, Some(&coeffs)).unwrap();
        let rows = fidelity_series(&traj, Protocol::Dv, 1.0, Some(0.1), &[]).unwrap();
        write_fidelity(&mut buf, &rows).unwrap();
        (traj, buf)
    };
    let (traj, a) = render();
    let (_, b) = render();
    assert_eq!(a, b);

    let mut buf = Vec::new();
    write_trajectory(&mut buf, &traj, None).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["t", "re_u", "im_u", "abs_u"]);
    for (rec, u) in rdr.records().zip(&traj.u) {
        let rec = rec.unwrap();
        let re: f64 = rec[1].parse().unwrap();
        let im: f64 = rec[2].parse().unwrap();
        assert!((re - u.re).abs() <= 1e-12 * u.norm().max(1e-300));
        assert!((im - u.im).abs() <= 1e-12 * u.norm().max(1e-300));
    }
}

#[test]
fn outcome_dump_lists_all_bell_results() {
    let input = QubitInputState::new(PI / 3.0, 1.0).unwrap();
    let out = simulate_teleport_dv(Complex64::from_polar(0.7, 0.2), &input).unwrap();
    let mut buf = Vec::new();
    write_outcomes(&mut buf, &out).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let ks: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ks, ["1", "2", "3", "4"]);
}
