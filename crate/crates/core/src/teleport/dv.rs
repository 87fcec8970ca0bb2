//! Qubit teleportation with a Bell pair whose halves decay through
//! identical local reservoirs.
//!
//! Single-qubit basis is (|e⟩, |g⟩); two-qubit matrices use (ee, eg, ge, gg)
//! and the three-qubit register is indexed as 4·q1 + 2·q2 + q3.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::{check_u, McEstimate};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::spectrum::BoundState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// [2 + cos(2ω_0 t)]/3 for a lossless channel.
pub fn ideal_fidelity_dv(omega0: f64, t: f64) -> f64 {
    (2.0 + (2.0 * omega0 * t).cos()) / 3.0
}

/// {2 + |u|²(|u|² − 1) + Re u²}/3.
pub fn avg_fidelity_dv(u: Complex64) -> f64 {
    let p = u.norm_sqr();
    (2.0 + p * (p - 1.0) + (u * u).re) / 3.0
}

/// Born–Markov limit u = e^{−(κ + iω_0)t}.
pub fn bma_fidelity_dv(kappa: f64, omega0: f64, t: f64) -> f64 {
    let d = (-2.0 * kappa * t).exp();
    (2.0 + d * (d - 2.0 * (omega0 * t).sin().powi(2))) / 3.0
}

/// Long-time form with u → Z e^{−iE_b t}.
pub fn steady_fidelity_dv(bs: &BoundState, t: f64) -> f64 {
    let z2 = bs.residue * bs.residue;
    (2.0 + z2 * (z2 - 2.0 * (bs.energy * t).sin().powi(2))) / 3.0
}

/// Maximum over t of [`steady_fidelity_dv`], (2 + Z⁴)/3.
pub fn steady_max_dv(residue: f64) -> f64 {
    (2.0 + residue.powi(4)) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QubitInputState {
    pub theta: f64,
    pub phi: f64,
}

impl QubitInputState {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Bloch angles out of range: theta={theta}, phi={phi}"
            )));
        }
        Ok(Self {
            theta,
            phi: phi.rem_euclid(2.0 * PI),
        })
    }

    /// (cos θ/2, sin θ/2 e^{iφ}) on (|e⟩, |g⟩).
    pub fn amplitudes(&self) -> Vector2<Complex64> {
        let h = 0.5 * self.theta;
        Vector2::new(
            Complex64::new(h.cos(), 0.0),
            Complex64::from_polar(h.sin(), self.phi),
        )
    }
}

/// Two-qubit channel state after each half has decayed with propagator u.
#[derive(Debug, Clone, PartialEq)]
pub struct DvChannelState {
    pub rho: Matrix4<Complex64>,
    pub u: Complex64,
}

pub fn channel_state_dv(u: Complex64) -> Result<DvChannelState> {
    check_u(u)?;
    let p = u.norm_sqr();
    let diag = [
        p * p,
        p * (1.0 - p),
        (1.0 - p) * p,
        (1.0 - p) * (1.0 - p) + 1.0,
    ];
    let mut rho = Matrix4::from_diagonal(&Vector4::from_iterator(
        diag.iter().map(|&d| Complex64::new(0.5 * d, 0.0)),
    ));
    let coh = 0.5 * u * u;
    rho[(0, 3)] = coh;
    rho[(3, 0)] = coh.conj();
    Ok(DvChannelState { rho, u })
}

impl DvChannelState {
    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.min()
    }

    /// Reduced state of qubit 2 (`keep = 0`) or qubit 3 (`keep = 1`).
    pub fn reduced(&self, keep: usize) -> Matrix2<Complex64> {
        let mut out = Matrix2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                for s in 0..2 {
                    let (i, j) = if keep == 0 {
                        (2 * a + s, 2 * b + s)
                    } else {
                        (2 * s + a, 2 * s + b)
                    };
                    out[(a, b)] += self.rho[(i, j)];
                }
            }
        }
        out
    }
}

/// Bell outcomes of Alice's measurement in the fixed order of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];

    /// Outcome label k ∈ 1..=4.
    pub fn k(self) -> usize {
        self as usize + 1
    }

    /// Components on (ee, eg, ge, gg).
    pub fn vector(self) -> Vector4<Complex64> {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            Bell::PhiPlus => Vector4::new(s, ZERO, ZERO, s),
            Bell::PhiMinus => Vector4::new(s, ZERO, ZERO, -s),
            Bell::PsiPlus => Vector4::new(ZERO, s, s, ZERO),
            Bell::PsiMinus => Vector4::new(ZERO, s, -s, ZERO),
        }
    }

    /// Bob's correction: I, σ_z, σ_x, −iσ_y.
    pub fn correction(self) -> Matrix2<Complex64> {
        match self {
            Bell::PhiPlus => Matrix2::new(ONE, ZERO, ZERO, ONE),
            Bell::PhiMinus => Matrix2::new(ONE, ZERO, ZERO, -ONE),
            Bell::PsiPlus => Matrix2::new(ZERO, ONE, ONE, ZERO),
            Bell::PsiMinus => Matrix2::new(ZERO, -ONE, ONE, ZERO),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeleportOutcome {
    pub k: usize,
    pub bell: Bell,
    pub probability: f64,
    /// Bob's corrected, normalized state; zero when the outcome has
    /// vanishing probability.
    #[serde(skip)]
    pub output: Matrix2<Complex64>,
    pub fidelity: f64,
}

// Bob's unnormalized state after projecting qubits 1–2 on `bell`, with the
// correction applied.
fn conditional_state(
    phi: &Vector2<Complex64>,
    channel: &Matrix4<Complex64>,
    bell: Bell,
) -> Matrix2<Complex64> {
    // ρ_123[(4 i1 + 2 i2 + i3), ...] = φ_{i1} φ*_{j1} ρ_23[(2 i2 + i3), ...]
    let b = bell.vector();
    let mut r3 = Matrix2::<Complex64>::zeros();
    for a in 0..2 {
        for c in 0..2 {
            let mut acc = ZERO;
            for p in 0..4 {
                let (i1, i2) = (p / 2, p % 2);
                let bp = b[p].conj();
                if bp == ZERO {
                    continue;
                }
                for q in 0..4 {
                    let (j1, j2) = (q / 2, q % 2);
                    if b[q] == ZERO {
                        continue;
                    }
                    acc += bp * phi[i1] * phi[j1].conj() * channel[(2 * i2 + a, 2 * j2 + c)] * b[q];
                }
            }
            r3[(a, c)] = acc;
        }
    }
    let u = bell.correction();
    u * r3 * u.adjoint()
}

fn overlap(phi: &Vector2<Complex64>, rho: &Matrix2<Complex64>) -> f64 {
    (phi.adjoint() * rho * phi)[(0, 0)].re
}

/// Runs the protocol on the full three-qubit density matrix and reports
/// every Bell outcome.
pub fn simulate_teleport_dv(u: Complex64, input: &QubitInputState) -> Result<[TeleportOutcome; 4]> {
    let channel = channel_state_dv(u)?;
    let phi = input.amplitudes();
    Ok(Bell::ALL.map(|bell| {
        let unnorm = conditional_state(&phi, &channel.rho, bell);
        let probability = unnorm.trace().re;
        let (output, fidelity) = if probability > 0.0 {
            let out = unnorm / Complex64::new(probability, 0.0);
            let f = overlap(&phi, &out);
            (out, f)
        } else {
            (Matrix2::zeros(), 0.0)
        };
        TeleportOutcome {
            k: bell.k(),
            bell,
            probability,
            output,
            fidelity,
        }
    }))
}

// Σ_k P_k F_k for one input, without dividing by P_k.
fn weighted_fidelity(channel: &Matrix4<Complex64>, input: &QubitInputState) -> f64 {
    let phi = input.amplitudes();
    Bell::ALL
        .iter()
        .map(|&b| overlap(&phi, &conditional_state(&phi, channel, b)))
        .sum()
}

/// Bloch-sphere average of Σ_k P_k F_k by Gauss–Legendre in cos θ and the
/// trapezoid rule in φ.
pub fn oracle_avg_fidelity_dv(u: Complex64, n_theta: usize, n_phi: usize) -> Result<f64> {
    if n_theta < 8 || n_phi < 8 {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs at least 8 nodes per angle, got ({n_theta}, {n_phi})"
        )));
    }
    let channel = channel_state_dv(u)?;
    let (nodes, weights) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut total = 0.0;
    for (&c, &w) in nodes.iter().zip(&weights) {
        let theta = c.clamp(-1.0, 1.0).acos();
        let mut ring = 0.0;
        for j in 0..n_phi {
            let input = QubitInputState {
                theta,
                phi: j as f64 * dphi,
            };
            ring += weighted_fidelity(&channel.rho, &input);
        }
        total += w * ring * dphi;
    }
    Ok(total / (4.0 * PI))
}

/// Same average from uniformly drawn input states, with standard error.
pub fn monte_carlo_avg_fidelity_dv<R: Rng + ?Sized>(
    u: Complex64,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let channel = channel_state_dv(u)?;
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let c: f64 = rng.random_range(-1.0..=1.0);
            let input = QubitInputState {
                theta: c.acos(),
                phi: rng.random_range(0.0..2.0 * PI),
            };
            weighted_fidelity(&channel.rho, &input)
        })
        .collect();
    Ok(McEstimate::from_samples(&values))
}
