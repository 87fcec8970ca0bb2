//! The channel propagator u(t).
//!
//! u(t) obeys u̇ + iω_0 u + ∫_0^t μ(t − τ) u(τ) dτ = 0 with u(0) = 1. This
//! module solves it on a uniform grid, provides the Born–Markov closed form,
//! the long-time bound-state + branch-cut decomposition, and the
//! master-equation rates Γ(t), Ω(t) derived from a trajectory.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::spectral::SpectralDensity;
use crate::spectrum::BoundState;

/// Step used for reference runs.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Horizon used for reference runs.
pub const DEFAULT_HORIZON: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Trapezoidal product integration, implicit in the new sample.
    ImplicitTrapezoid,
    /// Exact diagonalization of a finite resonator chain.
    ExactDiagonalization,
    BornMarkov,
}

/// Sampled u(t) on a uniform grid.
#[derive(Debug, Clone)]
pub struct UTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<Complex64>,
    pub step: f64,
    pub scheme: Scheme,
    pub kernel_evaluations: usize,
}

impl UTrajectory {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn last(&self) -> Complex64 {
        *self.u.last().expect("trajectory has at least one sample")
    }

    /// Index of the sample nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let i = ((t - self.times[0]) / self.step).round();
        (i.max(0.0) as usize).min(self.u.len() - 1)
    }

    pub fn at(&self, t: f64) -> Complex64 {
        self.u[self.index_of(t)]
    }
}

/// Decay rate and renormalized frequency at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MasterEqCoeffs {
    pub t: f64,
    pub gamma: f64,
    pub omega: f64,
}

fn grid_size(horizon: f64, step: f64) -> Result<usize> {
    if !(horizon > 0.0 && step > 0.0 && horizon.is_finite() && step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon and step must be positive, got T = {horizon}, h = {step}"
        )));
    }
    let n = (horizon / step).round();
    if n < 2.0 || (n * step - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidParameter(format!(
            "T/h must be an integer >= 2, got T = {horizon}, h = {step}"
        )));
    }
    Ok(n as usize)
}

/// μ(j h) for j = 0..=n.
pub fn kernel_table(
    sd: &SpectralDensity,
    step: f64,
    n: usize,
    tol: &Tolerance,
) -> Result<Vec<Complex64>> {
    (0..=n)
        .map(|j| {
            let x = j as f64 * step;
            let m = sd.memory_kernel(x, tol)?;
            if m.re.is_finite() && m.im.is_finite() {
                Ok(m)
            } else {
                Err(Error::NonFiniteKernel(x))
            }
        })
        .collect()
}

/// Largest tolerated excess of |u| over 1 before a run is declared unstable.
pub fn stability_slack(step: f64, omega0: f64, mu0: f64) -> f64 {
    10.0 * step * step * (omega0 * omega0 + mu0.abs()) + 1e-12
}

/// Solves for u(t) on `[0, horizon]` with step `step`.
pub fn solve_u(
    sd: &SpectralDensity,
    omega0: f64,
    horizon: f64,
    step: f64,
    tol: &Tolerance,
) -> Result<UTrajectory> {
    let n = grid_size(horizon, step)?;
    let kernel = kernel_table(sd, step, n, tol)?;
    solve_u_with_kernel(&kernel, omega0, step)
}

/// Implicit trapezoidal Volterra scheme on a precomputed kernel table.
///
/// With F = u̇ and C_n = h Σ'' μ_{n−j} u_j (trapezoid weights),
/// u_{n+1} = u_n + h/2 (F_n + F_{n+1}). The new sample enters F_{n+1}
/// linearly, so the implicit equation is solved exactly.
pub fn solve_u_with_kernel(kernel: &[Complex64], omega0: f64, step: f64) -> Result<UTrajectory> {
    let m = kernel.len() - 1;
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two steps".into()));
    }
    let h = step;
    let mu0 = kernel[0];
    let iw = Complex64::new(0.0, omega0);
    let denom = Complex64::new(1.0, 0.0) + (iw + mu0 * (0.5 * h)) * (0.5 * h);

    // Kernel reversed so the history sum walks both arrays forwards.
    let mre: Vec<f64> = kernel.iter().rev().map(|c| c.re).collect();
    let mim: Vec<f64> = kernel.iter().rev().map(|c| c.im).collect();
    let mut ure = vec![0.0; m + 1];
    let mut uim = vec![0.0; m + 1];
    ure[0] = 1.0;
    let u0 = Complex64::new(1.0, 0.0);
    let mut u_prev = u0;
    let mut f_prev = -iw * u0;

    for n in 0..m {
        // Σ_{j=1}^{n} μ_{n+1−j} u_j
        let lo = m - n;
        let hist = dot_complex(&mre[lo..m], &mim[lo..m], &ure[1..=n], &uim[1..=n]);
        let s_next = (kernel[n + 1] * (0.5 * u0.re) + hist) * h;
        let u_next = (u_prev + f_prev * (0.5 * h) - s_next * (0.5 * h)) / denom;
        f_prev = -iw * u_next - s_next - mu0 * (0.5 * h) * u_next;
        u_prev = u_next;
        ure[n + 1] = u_next.re;
        uim[n + 1] = u_next.im;
    }

    let u: Vec<Complex64> = ure
        .iter()
        .zip(&uim)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect();
    let times: Vec<f64> = (0..=m).map(|j| j as f64 * h).collect();

    let slack = stability_slack(h, omega0, mu0.norm());
    if let Some((k, worst)) = u
        .iter()
        .map(|z| z.norm())
        .enumerate()
        .filter(|&(_, a)| !a.is_finite() || a > 1.0 + slack)
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        return Err(Error::Unstable {
            time: times[k],
            modulus: worst,
            slack,
        });
    }

    Ok(UTrajectory {
        times,
        u,
        step: h,
        scheme: Scheme::ImplicitTrapezoid,
        kernel_evaluations: kernel.len(),
    })
}

// Σ a_k b_k over complex numbers stored as split real/imaginary arrays,
// with independent accumulators so the loop vectorizes.
#[inline]
fn dot_complex(are: &[f64], aim: &[f64], bre: &[f64], bim: &[f64]) -> Complex64 {
    const L: usize = 8;
    let n = are.len();
    let mut sr = [0.0f64; L];
    let mut si = [0.0f64; L];
    let chunks = n / L;
    for c in 0..chunks {
        let o = c * L;
        let (ar, ai) = (&are[o..o + L], &aim[o..o + L]);
        let (br, bi) = (&bre[o..o + L], &bim[o..o + L]);
        for k in 0..L {
            sr[k] += ar[k] * br[k] - ai[k] * bi[k];
            si[k] += ar[k] * bi[k] + ai[k] * br[k];
        }
    }
    let mut re: f64 = sr.iter().sum();
    let mut im: f64 = si.iter().sum();
    for k in chunks * L..n {
        re += are[k] * bre[k] - aim[k] * bim[k];
        im += are[k] * bim[k] + aim[k] * bre[k];
    }
    Complex64::new(re, im)
}

/// Born–Markov decay rate κ = πJ(ω_0) and Lamb shift Δ_{ω_0}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovRates {
    pub kappa: f64,
    pub shift: f64,
}

impl MarkovRates {
    pub fn new(sd: &SpectralDensity, omega0: f64, tol: &Tolerance) -> Result<Self> {
        if !sd.in_interior(omega0) {
            return Err(Error::OutsideSupport(omega0));
        }
        Ok(Self {
            kappa: PI * sd.j(omega0),
            shift: sd.lamb_shift(omega0, tol)?,
        })
    }

    /// e^{−[κ + i(ω_0 + Δ)] t}
    pub fn u(&self, omega0: f64, t: f64) -> Complex64 {
        (Complex64::new(-self.kappa, -(omega0 + self.shift)) * t).exp()
    }
}

/// Born–Markov approximation to u(t).
pub fn bma_u(sd: &SpectralDensity, omega0: f64, t: f64, tol: &Tolerance) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    Ok(MarkovRates::new(sd, omega0, tol)?.u(omega0, t))
}

/// The continuum (branch-cut) part of u(t),
/// ∫ A(E) e^{−iEt} dE with A(E) = J(E)/[(E − ω_0 − Δ_E)² + (πJ(E))²].
///
/// A(E) is tabulated once on composite Gauss–Legendre panels fine enough to
/// resolve e^{−iEt} up to `t_max`, so Δ_E is computed once per node and the
/// integral is cheap to re-evaluate at many times.
#[derive(Debug, Clone)]
pub struct BranchCut {
    energies: Vec<f64>,
    weights: Vec<f64>,
    t_max: f64,
}

const PANEL_NODES: usize = 16;
// Largest phase change of e^{-iEt} across one panel.
const PANEL_PHASE: f64 = 8.0;

impl BranchCut {
    pub fn new(sd: &SpectralDensity, omega0: f64, t_max: f64, tol: &Tolerance) -> Result<Self> {
        let (gl_x, gl_w) = quad::gauss_legendre(PANEL_NODES);
        let t_eff = t_max.max(1.0);
        let mut energies = Vec::new();
        let mut jac = Vec::new();

        let mut push_panel = |a: f64, b: f64, map: &dyn Fn(f64) -> (f64, f64)| {
            let (c, hw) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in gl_x.iter().zip(&gl_w) {
                let (e, de) = map(c + hw * x);
                energies.push(e);
                jac.push(w * hw * de);
            }
        };

        let width_hint = if sd.in_interior(omega0) {
            (PI * sd.j(omega0)).max(1e-4)
        } else {
            1.0
        };

        match sd {
            SpectralDensity::Semicircle(sc) => {
                let rate = 2.0 * sc.xi;
                let dtheta = (PANEL_PHASE / (rate * t_eff))
                    .min(PI / 100.0)
                    .min(0.5 * width_hint / rate);
                let panels = (PI / dtheta).ceil() as usize;
                let step = PI / panels as f64;
                let map = |th: f64| (sc.omega_r - 2.0 * sc.xi * th.cos(), 2.0 * sc.xi * th.sin());
                for p in 0..panels {
                    push_panel(p as f64 * step, (p + 1) as f64 * step, &map);
                }
            }
            _ => {
                let (lo, _) = sd.support();
                let hi = sd.integration_upper();
                let range = hi - lo;
                let de = (PANEL_PHASE / t_eff)
                    .min(range / 200.0)
                    .min(0.5 * width_hint);
                let mut cuts = vec![lo];
                if let SpectralDensity::Tabulated(t) = sd {
                    cuts.extend_from_slice(&t.omega()[1..]);
                } else {
                    cuts.push(hi);
                }
                let identity = |e: f64| (e, 1.0);
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let panels = ((b - a) / de).ceil().max(1.0) as usize;
                    let step = (b - a) / panels as f64;
                    for p in 0..panels {
                        let pa = a + p as f64 * step;
                        let pb = pa + step;
                        if p == 0 && matches!(sd, SpectralDensity::Ohmic(_)) {
                            // Geometric grading toward E = 0 where J ~ E^s.
                            let mut right = pb;
                            for _ in 0..24 {
                                let left = 0.5 * right;
                                push_panel(left, right, &identity);
                                right = left;
                            }
                            push_panel(pa, right, &identity);
                        } else {
                            push_panel(pa, pb, &identity);
                        }
                    }
                }
            }
        }

        let mut weights = Vec::with_capacity(energies.len());
        for (e, w) in energies.iter().zip(&jac) {
            let j = sd.j(*e);
            let a = if j == 0.0 {
                0.0
            } else {
                let shift = sd.lamb_shift(*e, tol)?;
                let d = e - omega0 - shift;
                j / (d * d + (PI * j) * (PI * j))
            };
            weights.push(w * a);
        }
        Ok(Self {
            energies,
            weights,
            t_max,
        })
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        if t > self.t_max * (1.0 + 1e-12) {
            log::warn!(
                "branch cut tabulated for t <= {}, evaluated at t = {t}",
                self.t_max
            );
        }
        self.energies
            .iter()
            .zip(&self.weights)
            .fold(Complex64::new(0.0, 0.0), |acc, (e, w)| {
                acc + Complex64::from_polar(*w, -e * t)
            })
    }

    /// ∫ A(E) dE; together with the bound-state residues this sums to 1.
    pub fn continuum_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn nodes(&self) -> usize {
        self.energies.len()
    }
}

/// Long-time decomposition Σ_b Z_b e^{−iE_b t} + branch cut at time `t`.
pub fn asymptotic_u(
    sd: &SpectralDensity,
    omega0: f64,
    bound_states: &[BoundState],
    t: f64,
    tol: &Tolerance,
) -> Result<Complex64> {
    if t <= 0.0 {
        return Err(Error::InvalidParameter(format!("t must be > 0, got {t}")));
    }
    let cut = BranchCut::new(sd, omega0, t, tol)?;
    Ok(bound_part(bound_states, t) + cut.eval(t))
}

/// Σ_b Z_b e^{−iE_b t}
pub fn bound_part(bound_states: &[BoundState], t: f64) -> Complex64 {
    bound_states
        .iter()
        .map(|b| Complex64::from_polar(b.residue, -b.energy * t))
        .sum()
}

/// Γ(t) = −Re[u̇/u] and Ω(t) = −Im[u̇/u] with u̇ from second-order finite
/// differences (centered inside, one-sided at the ends).
pub fn master_eq_coeffs(traj: &UTrajectory) -> Result<Vec<MasterEqCoeffs>> {
    const FLOOR: f64 = 1e-12;
    let n = traj.len();
    if n < 3 {
        return Err(Error::InvalidParameter(
            "need at least three samples for finite differences".into(),
        ));
    }
    let h = traj.step;
    let u = &traj.u;
    (0..n)
        .map(|k| {
            if u[k].norm() < FLOOR {
                return Err(Error::CoefficientSingularity {
                    time: traj.times[k],
                    modulus: u[k].norm(),
                    threshold: FLOOR,
                });
            }
            let du = if k == 0 {
                (u[1] * 4.0 - u[0] * 3.0 - u[2]) / (2.0 * h)
            } else if k == n - 1 {
                (u[n - 1] * 3.0 - u[n - 2] * 4.0 + u[n - 3]) / (2.0 * h)
            } else {
                (u[k + 1] - u[k - 1]) / (2.0 * h)
            };
            let ratio = du / u[k];
            Ok(MasterEqCoeffs {
                t: traj.times[k],
                gamma: -ratio.re,
                omega: -ratio.im,
            })
        })
        .collect()
}
