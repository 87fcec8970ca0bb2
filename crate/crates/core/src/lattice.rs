//! Finite resonator chain with the system mode attached to its first site.
//!
//! In the single-excitation sector the model is an (N+1)×(N+1) real
//! symmetric matrix. Exact diagonalization gives u(t) = Σ_j |x_j|² e^{−iE_j t}
//! with x_j the system component of eigenvector j. For N → ∞ the end-site
//! spectral density is the semicircle, so this serves as an independent check
//! on the integro-differential solver up to the revival time N/(2ξ).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagator::{Scheme, UTrajectory};
use crate::spectral::SpectralDensity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainParams {
    pub sites: usize,
    pub omega0: f64,
    pub omega_r: f64,
    pub xi: f64,
    pub g: f64,
}

impl ChainParams {
    pub fn new(sites: usize, omega0: f64, omega_r: f64, xi: f64, g: f64) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidParameter(format!(
                "chain needs at least 2 sites, got {sites}"
            )));
        }
        if g.is_nan() || g < 0.0 {
            return Err(Error::InvalidParameter(format!("g must be >= 0, got {g}")));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidParameter(format!("xi must be > 0, got {xi}")));
        }
        if ![omega0, omega_r, g].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "chain parameters must be finite".into(),
            ));
        }
        Ok(Self {
            sites,
            omega0,
            omega_r,
            xi,
            g,
        })
    }

    /// Time at which the excitation reflected from the far end returns.
    pub fn revival_time(&self) -> f64 {
        self.sites as f64 / (2.0 * self.xi)
    }

    pub fn band(&self) -> (f64, f64) {
        (self.omega_r - 2.0 * self.xi, self.omega_r + 2.0 * self.xi)
    }

    /// Spectral density of the semi-infinite chain.
    pub fn spectral_density(&self) -> Result<SpectralDensity> {
        SpectralDensity::semicircle(self.g, self.xi, self.omega_r)
    }
}

/// ω_k = ω_r + 2ξ cos k for an infinite chain.
pub fn dispersion(omega_r: f64, xi: f64, k: f64) -> f64 {
    omega_r + 2.0 * xi * k.cos()
}

/// Basis: index 0 is the system mode, index n the n-th chain site.
pub fn build_single_excitation_hamiltonian(p: &ChainParams) -> DMatrix<f64> {
    let n = p.sites + 1;
    let mut h = DMatrix::zeros(n, n);
    h[(0, 0)] = p.omega0;
    for i in 1..n {
        h[(i, i)] = p.omega_r;
    }
    h[(0, 1)] = p.g;
    h[(1, 0)] = p.g;
    for i in 1..n - 1 {
        h[(i, i + 1)] = p.xi;
        h[(i + 1, i)] = p.xi;
    }
    h
}

/// Eigenvalues in ascending order with the system weight |x_j|² of each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcitationSpectrum {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ExcitationSpectrum {
    pub fn diagonalize(p: &ChainParams) -> Self {
        let eig = SymmetricEigen::new(build_single_excitation_hamiltonian(p));
        let mut pairs: Vec<(f64, f64)> = eig
            .eigenvalues
            .iter()
            .zip(eig.eigenvectors.row(0).iter())
            .map(|(&e, &x)| (e, x * x))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (energies, weights) = pairs.into_iter().unzip();
        Self { energies, weights }
    }

    pub fn u(&self, t: f64) -> Complex64 {
        self.energies
            .iter()
            .zip(&self.weights)
            .map(|(&e, &w)| Complex64::from_polar(w, -e * t))
            .sum()
    }

    /// Eigenpairs lying strictly outside `[lo, hi]`.
    pub fn isolated(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.energies
            .iter()
            .zip(&self.weights)
            .filter(|(&e, _)| e < lo || e > hi)
            .map(|(&e, &w)| (e, w))
            .collect()
    }
}

/// u(t) by exact diagonalization on the given grid.
///
/// Times beyond the revival window are computed but flagged in the log,
/// since they no longer represent the semi-infinite reservoir.
pub fn exact_u(p: &ChainParams, times: &[f64]) -> Result<UTrajectory> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("times must be finite".into()));
    }
    let spec = ExcitationSpectrum::diagonalize(p);
    let window = p.revival_time();
    if times.iter().any(|&t| t > window) {
        log::warn!("requested times exceed the revival window {window}");
    }
    let step = if times.len() > 1 {
        times[1] - times[0]
    } else {
        0.0
    };
    Ok(UTrajectory {
        times: times.to_vec(),
        u: times.iter().map(|&t| spec.u(t)).collect(),
        step,
        scheme: Scheme::ExactDiagonalization,
        kernel_evaluations: 0,
    })
}
