use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use boundtele::export;
use boundtele::lattice::{exact_u, ChainParams, ExcitationSpectrum};
use boundtele::propagator::{
    asymptotic_u, bma_u, master_eq_coeffs, solve_u, stability_slack, MarkovRates,
};
use boundtele::spectrum::{find_bound_states, locate_threshold, spectrum_sweep};
use boundtele::teleport::cv::{
    avg_fidelity_cv, oracle_avg_fidelity_cv, CvProtocolParams, OracleGrid,
};
use boundtele::teleport::dv::{avg_fidelity_dv, oracle_avg_fidelity_dv};
use boundtele::teleport::{fidelity_series, local_maxima, Protocol};
use boundtele::{BoundState, SpectralDensity, UTrajectory};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{BathKind, RunConfig};
use crate::{Failure, OracleArg, ProtocolArg};

#[derive(Debug, Serialize)]
struct Check {
    pass: bool,
    value: f64,
    limit: f64,
}

impl Check {
    fn at_most(value: f64, limit: f64) -> Self {
        Self {
            pass: value <= limit,
            value,
            limit,
        }
    }
}

struct Report<'a> {
    command: &'a str,
    cfg: &'a RunConfig,
    started: Instant,
    timings: BTreeMap<&'static str, f64>,
    checks: BTreeMap<&'static str, Check>,
}

impl<'a> Report<'a> {
    fn new(command: &'a str, cfg: &'a RunConfig) -> Result<Self, Failure> {
        std::fs::create_dir_all(&cfg.output.dir)?;
        Ok(Self {
            command,
            cfg,
            started: Instant::now(),
            timings: BTreeMap::new(),
            checks: BTreeMap::new(),
        })
    }

    fn lap(&mut self, name: &'static str, since: Instant) {
        self.timings.insert(name, since.elapsed().as_secs_f64());
    }

    fn csv<F>(&self, write: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> boundtele::Result<()>,
    {
        let path = self.cfg.output_path(self.command, "csv");
        let mut w = BufWriter::new(File::create(&path).map_err(|e| io_at(&path, e))?);
        write(&mut w)?;
        w.flush().map_err(|e| io_at(&path, e))
    }

    /// Writes the JSON summary, echoes it to stdout and turns failed checks
    /// into a tolerance failure.
    fn finish(mut self, results: Value) -> Result<(), Failure> {
        self.timings
            .insert("total_s", self.started.elapsed().as_secs_f64());
        let tol = self.cfg.tolerance();
        let summary = json!({
            "command": self.command,
            "config": self.cfg,
            "results": results,
            "timings": self.timings,
            "tolerances": {
                "quad_abs": tol.abs,
                "quad_rel": tol.rel,
                "max_intervals": tol.max_intervals,
                "oracle": self.cfg.numerics.oracle_tol,
                "lattice": self.cfg.numerics.lattice_tol,
                "plateau": self.cfg.numerics.plateau_tol,
            },
            "checks": self.checks,
        });
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        let path = self.cfg.output_path(self.command, "json");
        std::fs::write(&path, format!("{text}\n")).map_err(|e| io_at(&path, e))?;
        // A closed pipe on stdout must not lose the files already written.
        let _ = writeln!(std::io::stdout().lock(), "{text}");
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(name, c)| format!("{name}: {:e} exceeds {:e}", c.value, c.limit))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Tolerance(failed.join("; ")))
        }
    }
}

fn io_at(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn largest_residue(bound: &[BoundState]) -> Option<f64> {
    bound.iter().map(|b| b.residue).max_by(f64::total_cmp)
}

fn solve(cfg: &RunConfig, report: &mut Report) -> Result<(SpectralDensity, UTrajectory), Failure> {
    let sd = cfg.spectral_density()?;
    let t = Instant::now();
    let traj = solve_u(
        &sd,
        cfg.system.omega0,
        cfg.numerics.t_max,
        cfg.numerics.h,
        &cfg.tolerance(),
    )?;
    report.lap("solve_s", t);
    Ok((sd, traj))
}

pub fn u_solve(cfg: &RunConfig) -> Result<(), Failure> {
    let mut report = Report::new("u-solve", cfg)?;
    let tol = cfg.tolerance();
    let w0 = cfg.system.omega0;
    let (sd, traj) = solve(cfg, &mut report)?;
    let t = Instant::now();
    let bound = find_bound_states(&sd, w0, &tol)?;
    report.lap("spectrum_s", t);

    let coeffs = if cfg.output.coeffs {
        Some(master_eq_coeffs(&traj)?)
    } else {
        None
    };
    report.csv(|w| export::write_trajectory(w, &traj, coeffs.as_deref()))?;

    let t_end = *traj.times.last().expect("trajectory has t = 0");
    let max_abs = traj.u.iter().map(|u| u.norm()).fold(0.0, f64::max);
    let mu0 = sd.memory_kernel(0.0, &tol)?.re;
    report.checks.insert(
        "unit_disk",
        Check::at_most(max_abs, 1.0 + stability_slack(cfg.numerics.h, w0, mu0)),
    );
    let results = json!({
        "steps": traj.len() - 1,
        "final_t": t_end,
        "final_abs_u": traj.last().norm(),
        "max_abs_u": max_abs,
        "bound_state": !bound.is_empty(),
        "bound_states": bound,
        "z": largest_residue(&bound),
        "bma_final_abs_u": bma_u(&sd, w0, t_end, &tol).ok().map(|u| u.norm()),
        "asymptotic_final_abs_u": asymptotic_u(&sd, w0, &bound, t_end, &tol).ok().map(|u| u.norm()),
        "kernel_evaluations": traj.kernel_evaluations,
    });
    report.finish(results)
}

pub fn spectrum(cfg: &RunConfig) -> Result<(), Failure> {
    let mut report = Report::new("spectrum", cfg)?;
    let tol = cfg.tolerance();
    let grid = cfg.sweep_grid()?;
    let name = cfg.sweep.param.as_str();
    let family = |p: f64| {
        let c = cfg.with_param(name, p).expect("sweep parameter validated");
        Ok((c.spectral_density()?, c.system.omega0))
    };
    let t = Instant::now();
    let sweep = spectrum_sweep(name, family, &grid, &tol)?;
    report.lap("sweep_s", t);
    report.csv(|w| export::write_sweep(w, &sweep))?;

    let switch = sweep
        .points
        .windows(2)
        .find(|w| w[0].bound_states.is_empty() && !w[1].bound_states.is_empty());
    let at_onset = switch.map(|w| &w[1].bound_states[0]);
    let t = Instant::now();
    let bisected = switch
        .map(|w| locate_threshold(family, w[0].param, w[1].param, cfg.sweep.resolution, &tol))
        .transpose()?;
    report.lap("bisection_s", t);
    let results = json!({
        "parameter": name,
        "points": sweep.points.len(),
        "bound_points": sweep.points.iter().filter(|p| !p.bound_states.is_empty()).count(),
        "onset": sweep.onset(),
        "threshold_estimate": sweep.threshold_estimate(),
        "threshold_bisection": bisected,
        "branch": at_onset.map(|b| b.gap),
        "z_at_onset": at_onset.map(|b| b.residue),
    });
    report.finish(results)
}

pub fn fidelity(cfg: &RunConfig, which: ProtocolArg) -> Result<(), Failure> {
    let (command, protocol) = match which {
        ProtocolArg::Dv => ("fidelity-dv", Protocol::Dv),
        ProtocolArg::Cv => ("fidelity-cv", Protocol::Cv { r: cfg.system.r }),
    };
    let mut report = Report::new(command, cfg)?;
    let tol = cfg.tolerance();
    let w0 = cfg.system.omega0;
    let (sd, traj) = solve(cfg, &mut report)?;
    let bound = find_bound_states(&sd, w0, &tol)?;
    let kappa = MarkovRates::new(&sd, w0, &tol).ok().map(|m| m.kappa);
    let rows = fidelity_series(&traj, protocol, w0, kappa, &bound)?;
    report.csv(|w| export::write_fidelity(w, &rows))?;

    let values: Vec<f64> = rows.iter().map(|r| r.exact).collect();
    let envelope = rows[0].steady_envelope;
    let t_end = *traj.times.last().expect("trajectory has t = 0");
    let late = local_maxima(&traj.times, &values, 0.8 * t_end, t_end);
    let late_dev = late
        .iter()
        .map(|&(_, m)| (m - envelope).abs() / envelope)
        .fold(None, |acc: Option<f64>, d| {
            Some(acc.map_or(d, |a| a.max(d)))
        });
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.checks.insert(
        "fidelity_in_unit_interval",
        Check {
            pass: lo > 0.0 && hi <= 1.0 + 4.0 * f64::EPSILON,
            value: hi,
            limit: 1.0,
        },
    );
    let results = json!({
        "protocol": protocol,
        "final_fidelity": values.last(),
        "min_fidelity": lo,
        "max_fidelity": hi,
        "steady_envelope": envelope,
        "classical_limit": protocol.classical_limit(),
        "z": largest_residue(&bound),
        "kappa": kappa,
        "late_window": [0.8 * t_end, t_end],
        "late_maxima": late.len(),
        "late_max_rel_deviation": late_dev,
    });
    report.finish(results)
}

fn random_disk(cfg: &RunConfig) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.numerics.seed);
    (0..cfg.numerics.oracle_samples)
        .map(|_| {
            let rho = rng.random::<f64>().sqrt();
            Complex64::from_polar(rho, TAU * rng.random::<f64>())
        })
        .collect()
}

pub fn oracle(cfg: &RunConfig, which: OracleArg) -> Result<(), Failure> {
    match which {
        OracleArg::Dv => oracle_dv(cfg),
        OracleArg::Cv => oracle_cv(cfg),
        OracleArg::Lattice => oracle_lattice(cfg),
    }
}

fn worst(errors: &[f64], us: &[Complex64]) -> (f64, Option<[f64; 2]>) {
    errors
        .iter()
        .zip(us)
        .max_by(|a, b| a.0.total_cmp(b.0))
        .map_or((0.0, None), |(&e, u)| (e, Some([u.re, u.im])))
}

fn oracle_dv(cfg: &RunConfig) -> Result<(), Failure> {
    let mut report = Report::new("oracle-dv", cfg)?;
    let us = random_disk(cfg);
    let (n_theta, n_phi) = (cfg.numerics.theta_nodes, cfg.numerics.phi_nodes);
    let t = Instant::now();
    let errors = us
        .par_iter()
        .map(|&u| Ok((oracle_avg_fidelity_dv(u, n_theta, n_phi)? - avg_fidelity_dv(u)).abs()))
        .collect::<boundtele::Result<Vec<f64>>>()?;
    report.lap("oracle_s", t);
    let (max_err, worst_u) = worst(&errors, &us);
    report.checks.insert(
        "dv_oracle_vs_closed_form",
        Check::at_most(max_err, cfg.numerics.oracle_tol),
    );
    report.finish(json!({
        "samples": us.len(),
        "theta_nodes": n_theta,
        "phi_nodes": n_phi,
        "max_abs_error": max_err,
        "worst_u": worst_u,
    }))
}

fn oracle_cv(cfg: &RunConfig) -> Result<(), Failure> {
    let mut report = Report::new("oracle-cv", cfg)?;
    let r = cfg.system.r;
    let params =
        CvProtocolParams::new(r, Complex64::new(cfg.system.alpha_re, cfg.system.alpha_im))?;
    let grid = OracleGrid {
        half_width: (cfg.numerics.cv_half_width > 0.0).then_some(cfg.numerics.cv_half_width),
        points: cfg.numerics.cv_points,
    };
    let us = random_disk(cfg);
    let t = Instant::now();
    let runs = us
        .par_iter()
        .map(|&u| {
            let o = oracle_avg_fidelity_cv(u, &params, &grid)?;
            Ok(((o.fidelity - avg_fidelity_cv(u, r)?).abs(), o))
        })
        .collect::<boundtele::Result<Vec<_>>>()?;
    report.lap("oracle_s", t);
    let errors: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (max_err, worst_u) = worst(&errors, &us);
    let tail = runs.iter().map(|r| r.1.tail_mass).fold(0.0, f64::max);
    let width = runs.iter().map(|r| r.1.half_width).fold(0.0, f64::max);
    report.checks.insert(
        "cv_oracle_vs_closed_form",
        Check::at_most(max_err, cfg.numerics.oracle_tol),
    );
    report.finish(json!({
        "samples": us.len(),
        "r": r,
        "alpha": [params.alpha.re, params.alpha.im],
        "points": grid.points,
        "half_width": width,
        "max_tail_mass": tail,
        "max_abs_error": max_err,
        "worst_u": worst_u,
    }))
}

fn oracle_lattice(cfg: &RunConfig) -> Result<(), Failure> {
    if cfg.bath.kind != BathKind::Semicircle {
        return Err(Failure::Usage(
            "the lattice oracle needs bath.kind = \"semicircle\"".into(),
        ));
    }
    let mut report = Report::new("oracle-lattice", cfg)?;
    let tol = cfg.tolerance();
    let (b, n) = (&cfg.bath, &cfg.numerics);
    let w0 = cfg.system.omega0;
    let chain = ChainParams::new(n.sites, w0, b.omega_r, b.xi, b.g)?;
    let window = chain.revival_time().min(n.t_max);
    let horizon = (window / n.h).floor() * n.h;

    let sd = cfg.spectral_density()?;
    let t = Instant::now();
    let traj = solve_u(&sd, w0, horizon, n.h, &tol)?;
    report.lap("solve_s", t);
    let t = Instant::now();
    let spec = ExcitationSpectrum::diagonalize(&chain);
    let lattice = exact_u(&chain, &traj.times)?;
    report.lap("diagonalize_s", t);
    report.csv(|w| export::write_lattice_spectrum(w, &spec))?;

    let deviation = traj
        .u
        .iter()
        .zip(&lattice.u)
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    let (lo, hi) = chain.band();
    let isolated = spec.isolated(lo, hi);
    let bound = find_bound_states(&sd, w0, &tol)?;
    let weight_dev = if isolated.len() == bound.len() {
        isolated
            .iter()
            .zip(&bound)
            .map(|(&(_, w), b)| (w - b.residue).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    report.checks.insert(
        "lattice_vs_volterra",
        Check::at_most(deviation, n.lattice_tol),
    );
    report.checks.insert(
        "isolated_weight_vs_residue",
        Check::at_most(weight_dev, n.plateau_tol),
    );
    report.finish(json!({
        "sites": n.sites,
        "revival_time": chain.revival_time(),
        "compared_until": horizon,
        "max_modulus_deviation": deviation,
        "isolated_states": isolated.iter().map(|&(e, w)| json!({"energy": e, "weight": w})).collect::<Vec<_>>(),
        "bound_states": bound,
    }))
}
