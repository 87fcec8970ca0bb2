//! Teleportation through channels whose two halves have each been stored
//! in a dissipative mode described by the same propagator u(t).

pub mod cv;
pub mod dv;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Allowance for round-off in |u| coming from a numerical trajectory.
const UNIT_DISK_SLACK: f64 = 1e-12;

fn check_u(u: Complex64) -> Result<()> {
    let m = u.norm();
    if !m.is_finite() || m > 1.0 + UNIT_DISK_SLACK {
        return Err(Error::UnphysicalPropagator(m));
    }
    Ok(())
}

/// Mean of a Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
        }
    }
}

/// Which protocol a fidelity series refers to.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    Dv,
    Cv { r: f64 },
}

impl Protocol {
    /// Best average fidelity reachable without entanglement.
    pub fn classical_limit(&self) -> f64 {
        match self {
            Protocol::Dv => 2.0 / 3.0,
            Protocol::Cv { .. } => 0.5,
        }
    }

    pub fn avg_fidelity(&self, u: Complex64) -> Result<f64> {
        match *self {
            Protocol::Dv => {
                check_u(u)?;
                Ok(dv::avg_fidelity_dv(u))
            }
            Protocol::Cv { r } => cv::avg_fidelity_cv(u, r),
        }
    }

    pub fn bma_fidelity(&self, kappa: f64, omega0: f64, t: f64) -> f64 {
        match *self {
            Protocol::Dv => dv::bma_fidelity_dv(kappa, omega0, t),
            Protocol::Cv { r } => cv::bma_fidelity_cv(kappa, omega0, r, t),
        }
    }

    /// Long-time maximum with a bound state of residue Z.
    pub fn steady_max(&self, residue: f64) -> f64 {
        match *self {
            Protocol::Dv => dv::steady_max_dv(residue),
            Protocol::Cv { r } => cv::steady_max_cv(residue, r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FidelityRow {
    pub t: f64,
    pub exact: f64,
    /// Absent when ω_0 lies outside the support and no Markov rate exists.
    pub bma: Option<f64>,
    /// Steady-state maximum, or the classical limit when nothing survives.
    pub steady_envelope: f64,
}

/// Fidelity along a solved trajectory next to its Markovian and steady-state
/// references. With several bound states the envelope uses the largest
/// residue.
pub fn fidelity_series(
    traj: &crate::propagator::UTrajectory,
    protocol: Protocol,
    omega0: f64,
    kappa: Option<f64>,
    bound_states: &[crate::spectrum::BoundState],
) -> Result<Vec<FidelityRow>> {
    let envelope = bound_states
        .iter()
        .map(|b| b.residue)
        .max_by(f64::total_cmp)
        .map_or(protocol.classical_limit(), |z| protocol.steady_max(z));
    traj.times
        .iter()
        .zip(&traj.u)
        .map(|(&t, &u)| {
            Ok(FidelityRow {
                t,
                exact: protocol.avg_fidelity(u)?,
                bma: kappa.map(|k| protocol.bma_fidelity(k, omega0, t)),
                steady_envelope: envelope,
            })
        })
        .collect()
}

/// Local maxima of `values` restricted to indices whose time lies in
/// `[from, to]`.
pub fn local_maxima(times: &[f64], values: &[f64], from: f64, to: f64) -> Vec<(f64, f64)> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| times[i] >= from && times[i] <= to)
        .filter(|&i| values[i] >= values[i - 1] && values[i] > values[i + 1])
        .map(|i| (times[i], values[i]))
        .collect()
}
