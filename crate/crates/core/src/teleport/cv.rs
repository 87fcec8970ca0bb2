//! Coherent-state teleportation through a two-mode squeezed vacuum whose
//! modes decay through identical local reservoirs.
//!
//! Quadratures are X = (a + a†)/2 and P = (a − a†)/(2i), so the vacuum has
//! variance 1/4. The decayed channel is the Gaussian kernel
//! ⟨α_2 α_3|ρ|α'_2 α'_3⟩ ∝ a·exp[b ᾱ_2ᾱ_3 + b* α'_2α'_3 + c(ᾱ_2α'_2 + ᾱ_3α'_3)]
//! in unnormalized coherent states.

use nalgebra::{Matrix2, Matrix4, SMatrix, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use super::check_u;
use crate::error::{Error, Result};
use crate::spectrum::BoundState;

/// Truncated outcome mass above which the oracle warns.
pub const TAIL_WARNING: f64 = 1e-10;

fn check_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "squeezing r must be >= 0, got {r}"
        )));
    }
    Ok(())
}

/// (½ sech²r)/(1 − tanh r cos 2ω_0 t) for a lossless channel.
///
/// Evaluated as e/[q(e + q tanh r sin²ω_0t)] with e = e^{−2r}, q = 1 + e,
/// which avoids the cancellation in 1 − tanh r and returns (1 + e^{−2r})⁻¹
/// to rounding at the maxima.
pub fn ideal_fidelity_cv(r: f64, omega0: f64, t: f64) -> f64 {
    let e = (-2.0 * r).exp();
    let q = 1.0 + e;
    let s = (omega0 * t).sin();
    e / (q * (e + q * r.tanh() * s * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvChannelCoeffs {
    pub a: f64,
    pub b: Complex64,
    pub c: f64,
    pub x: f64,
    pub u: Complex64,
    pub r: f64,
}

pub fn channel_coeffs_cv(u: Complex64, r: f64) -> Result<CvChannelCoeffs> {
    check_u(u)?;
    check_r(r)?;
    let p = u.norm_sqr().min(1.0);
    let th = r.tanh();
    let x = 1.0 / (1.0 - (1.0 - p).powi(2) * th * th);
    Ok(CvChannelCoeffs {
        a: x / r.cosh().powi(2),
        b: -x * u * u * th,
        c: x * p * (1.0 - p) * th * th,
        x,
        u,
        r,
    })
}

impl CvChannelCoeffs {
    /// Quadratic form of the Husimi function of modes 2 and 3 in
    /// (x_2, p_2, x_3, p_3): Q ∝ exp(−½ vᵀAv).
    pub fn husimi_form(&self) -> Matrix4<f64> {
        let d = 2.0 * (1.0 - self.c);
        let (br, bi) = (self.b.re, self.b.im);
        Matrix4::new(
            d,
            0.0,
            -2.0 * br,
            -2.0 * bi, //
            0.0,
            d,
            -2.0 * bi,
            2.0 * br, //
            -2.0 * br,
            -2.0 * bi,
            d,
            0.0, //
            -2.0 * bi,
            2.0 * br,
            0.0,
            d,
        )
    }

    /// ∫ Q d²α_2 d²α_3 / π², which equals 1 for a normalized channel.
    pub fn kernel_normalization(&self) -> f64 {
        4.0 * self.a / self.husimi_form().determinant().sqrt()
    }

    /// Wigner covariance of (x_2, p_2, x_3, p_3): the Husimi covariance
    /// minus the vacuum contribution.
    pub fn wigner_covariance(&self) -> Result<Matrix4<f64>> {
        let inv = self
            .husimi_form()
            .try_inverse()
            .ok_or(Error::UnphysicalCoefficients(0.0))?;
        Ok(inv - Matrix4::identity() * 0.25)
    }
}

/// (a/2)[1 + Re b − c]⁻¹.
pub fn avg_fidelity_cv(u: Complex64, r: f64) -> Result<f64> {
    let k = channel_coeffs_cv(u, r)?;
    let denom = 1.0 + k.b.re - k.c;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::UnphysicalCoefficients(denom));
    }
    Ok(0.5 * k.a / denom)
}

/// Born–Markov limit u = e^{−(κ + iω_0)t}.
pub fn bma_fidelity_cv(kappa: f64, omega0: f64, r: f64, t: f64) -> f64 {
    let d = (-2.0 * kappa * t).exp();
    1.0 / (2.0 + (2.0 * r).sinh() * d * (r.tanh() - (2.0 * omega0 * t).cos()))
}

/// Long-time form with u → Z e^{−iE_b t}.
pub fn steady_fidelity_cv(bs: &BoundState, r: f64, t: f64) -> f64 {
    let z2 = bs.residue * bs.residue;
    1.0 / (2.0 + (2.0 * r).sinh() * z2 * (r.tanh() - (2.0 * bs.energy * t).cos()))
}

/// Maximum over t of [`steady_fidelity_cv`], [2 − Z²(1 − e^{−2r})]⁻¹.
pub fn steady_max_cv(residue: f64, r: f64) -> f64 {
    1.0 / (2.0 - residue * residue * (1.0 - (-2.0 * r).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvProtocolParams {
    pub r: f64,
    /// Teleported coherent amplitude; only the oracle depends on it.
    pub alpha: Complex64,
}

impl CvProtocolParams {
    pub fn new(r: f64, alpha: Complex64) -> Result<Self> {
        check_r(r)?;
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        Ok(Self { r, alpha })
    }
}

/// Outcome grid for the oracle. `half_width: None` picks a width that
/// covers the outcome distribution to well below [`TAIL_WARNING`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleGrid {
    pub half_width: Option<f64>,
    pub points: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            half_width: None,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvOracleResult {
    pub fidelity: f64,
    /// Outcome probability falling outside the grid.
    pub tail_mass: f64,
    pub half_width: f64,
    pub points: usize,
}

/// Average fidelity by explicit integration over Alice's homodyne results.
///
/// Alice mixes the input with mode 2 on a balanced beam splitter and reads
/// q_1 = (x_in + x_2)/√2 and q_2 = (p_2 − p_in)/√2. Bob's mode, conditioned
/// on (q_1, q_2), is Gaussian; he displaces it by (√2 q_1, −√2 q_2). The
/// fidelity with |α⟩ is weighted by the outcome density and summed with the
/// trapezoid rule.
pub fn oracle_avg_fidelity_cv(
    u: Complex64,
    params: &CvProtocolParams,
    grid: &OracleGrid,
) -> Result<CvOracleResult> {
    if grid.points < 3 {
        return Err(Error::InvalidParameter(format!(
            "oracle grid needs at least 3 points per axis, got {}",
            grid.points
        )));
    }
    let coeffs = channel_coeffs_cv(u, params.r)?;
    let w23 = coeffs.wigner_covariance()?;
    let alpha = Vector2::new(params.alpha.re, params.alpha.im);

    // Covariance of (x_in, p_in, x_2, p_2, x_3, p_3).
    let mut full = SMatrix::<f64, 6, 6>::zeros();
    full[(0, 0)] = 0.25;
    full[(1, 1)] = 0.25;
    full.fixed_view_mut::<4, 4>(2, 2).copy_from(&w23);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let map = SMatrix::<f64, 4, 6>::new(
        s, 0.0, s, 0.0, 0.0, 0.0,
        0.0, -s, 0.0, s, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    );
    let sigma = map * full * map.transpose();
    let mu_q = Vector2::new(s * alpha.x, -s * alpha.y);

    let s_qq: Matrix2<f64> = sigma.fixed_view::<2, 2>(0, 0).into();
    let s_3q: Matrix2<f64> = sigma.fixed_view::<2, 2>(2, 0).into();
    let s_33: Matrix2<f64> = sigma.fixed_view::<2, 2>(2, 2).into();
    let s_qq_inv = s_qq
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular outcome covariance".into()))?;
    let gain = s_3q * s_qq_inv;
    let cond = s_33 - gain * s_3q.transpose();
    let overlap = cond + Matrix2::identity() * 0.25;
    let overlap_inv = overlap
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular output covariance".into()))?;
    let f_norm = 1.0 / (2.0 * overlap.determinant().sqrt());
    let p_norm = 1.0 / (2.0 * std::f64::consts::PI * s_qq.determinant().sqrt());
    let shift = Matrix2::new(2f64.sqrt(), 0.0, 0.0, -(2f64.sqrt()));

    let sd_max = s_qq[(0, 0)].max(s_qq[(1, 1)]).sqrt();
    let center = mu_q.x.abs().max(mu_q.y.abs());
    let half_width = grid
        .half_width
        .unwrap_or_else(|| (5.0 + 2.0 * params.alpha.norm()).max(center + 8.0 * sd_max));
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad grid half-width {half_width}"
        )));
    }
    let m = grid.points;
    let h = 2.0 * half_width / (m - 1) as f64;
    let node = |i: usize| -half_width + i as f64 * h;
    let weight = |i: usize| if i == 0 || i == m - 1 { 0.5 } else { 1.0 };

    let integrand = |q: Vector2<f64>| {
        let dq = q - mu_q;
        let p = p_norm * (-0.5 * dq.dot(&(s_qq_inv * dq))).exp();
        let d = gain * dq + shift * q - alpha;
        let f = f_norm * (-0.5 * d.dot(&(overlap_inv * d))).exp();
        p * f
    };
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let x = node(i);
            (0..m)
                .map(|j| weight(j) * integrand(Vector2::new(x, node(j))))
                .sum::<f64>()
                * weight(i)
        })
        .collect();
    let fidelity = rows.iter().sum::<f64>() * h * h;

    let tail_mass = (0..2)
        .map(|k| {
            let sd = s_qq[(k, k)].sqrt();
            let mu = mu_q[k];
            0.5 * (erfc((half_width - mu) / (sd * 2f64.sqrt()))
                + erfc((half_width + mu) / (sd * 2f64.sqrt())))
        })
        .sum::<f64>();
    if tail_mass > TAIL_WARNING {
        log::warn!("oracle grid truncates outcome mass {tail_mass:e}");
    }
    Ok(CvOracleResult {
        fidelity,
        tail_mass,
        half_width,
        points: m,
    })
}
