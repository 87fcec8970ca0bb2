//! Single-excitation spectrum of a system mode coupled to its reservoir.
//!
//! Isolated eigenvalues solve Y(E) = E with Y(E) = ω_0 − ∫ J(ω)/(ω − E) dω.
//! Y is monotonically decreasing in every gap of the support, so each gap
//! holds at most one root. A root is a bound state with residue
//! Z = [1 + ∫ J(ω)/(E_b − ω)² dω]⁻¹, the long-time plateau of |u(t)|.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::Tolerance;
use crate::spectral::SpectralDensity;

const MAX_EXPANSIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gap {
    /// (−∞, lower edge)
    Below,
    /// (upper edge, ∞)
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundState {
    pub energy: f64,
    pub residue: f64,
    pub gap: Gap,
}

/// Y(E) = ω_0 − ∫ J(ω)/(ω − E) dω for E outside the open support.
///
/// At an edge where J does not vanish the integral diverges and the
/// corresponding infinity is returned.
pub fn y_function(sd: &SpectralDensity, omega0: f64, e: f64, tol: &Tolerance) -> Result<f64> {
    let (lo, hi) = sd.support();
    if sd.in_interior(e) {
        return Err(Error::InsideContinuum { energy: e, lo, hi });
    }
    if sd.is_zero() {
        return Ok(omega0);
    }
    // Only tabulated data can carry weight at a band edge.
    if let SpectralDensity::Tabulated(_) = sd {
        if e == lo && sd.j(lo) > 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if e == hi && sd.j(hi) > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(omega0 - sd.resolvent_moment(e, 1, tol)?.value)
}

/// Z = [1 + ∫ J(ω)/(E − ω)² dω]⁻¹ for E outside the support.
pub fn residue(sd: &SpectralDensity, e: f64, tol: &Tolerance) -> Result<f64> {
    let (lo, hi) = sd.support();
    if sd.in_interior(e) || e == lo || e == hi {
        return Err(Error::InsideContinuum { energy: e, lo, hi });
    }
    if sd.is_zero() {
        return Ok(1.0);
    }
    Ok(1.0 / (1.0 + sd.resolvent_moment(e, 2, tol)?.value))
}

/// Sign test for a root of Y(E) = E in each gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Existence {
    pub below: bool,
    pub above: bool,
    /// Y(lo) − lo; negative iff a root lies below the band.
    pub margin_below: f64,
    /// Y(hi) − hi; positive iff a root lies above the band.
    pub margin_above: Option<f64>,
    /// Ohmic family only: the published closed-form test ω_0 − 2ηω_cΓ(s) ≤ 0,
    /// reported alongside the direct evaluation (which drops the factor 2).
    pub ohmic_printed_criterion: Option<bool>,
}

impl Existence {
    pub fn any(&self) -> bool {
        self.below || self.above
    }
}

pub fn bound_state_exists(sd: &SpectralDensity, omega0: f64, tol: &Tolerance) -> Result<Existence> {
    let (lo, hi) = sd.support();
    let margin_below = y_function(sd, omega0, lo, tol)? - lo;
    let margin_above = if hi.is_finite() {
        Some(y_function(sd, omega0, hi, tol)? - hi)
    } else {
        None
    };
    let ohmic_printed_criterion = match sd {
        SpectralDensity::Ohmic(o) => Some(omega0 - 2.0 * o.inverse_moment() <= 0.0),
        _ => None,
    };
    Ok(Existence {
        below: margin_below < 0.0,
        above: margin_above.is_some_and(|m| m > 0.0),
        margin_below,
        margin_above,
        ohmic_printed_criterion,
    })
}

/// All bound states, at most one per gap, sorted by energy.
pub fn find_bound_states(
    sd: &SpectralDensity,
    omega0: f64,
    tol: &Tolerance,
) -> Result<Vec<BoundState>> {
    let tight = Tolerance::tight().min_with(tol);
    let exists = bound_state_exists(sd, omega0, &tight)?;
    let (lo, hi) = sd.support();
    let f = |e: f64| y_function(sd, omega0, e, &tight).map(|y| y - e);
    let mut out = Vec::new();

    if exists.below {
        match bracket(&f, lo, -1.0)? {
            Some(outer) => {
                let e = bisect(&f, outer, lo, lo)?;
                out.push(BoundState {
                    energy: e,
                    residue: residue(sd, e, &tight)?,
                    gap: Gap::Below,
                });
            }
            None => {
                log::warn!("no root bracketed below the band after {MAX_EXPANSIONS} expansions")
            }
        }
    }
    if exists.above {
        match bracket(&f, hi, 1.0)? {
            Some(outer) => {
                let e = bisect(&f, hi, outer, hi)?;
                out.push(BoundState {
                    energy: e,
                    residue: residue(sd, e, &tight)?,
                    gap: Gap::Above,
                });
            }
            None => {
                log::warn!("no root bracketed above the band after {MAX_EXPANSIONS} expansions")
            }
        }
    }
    Ok(out)
}

// Walks away from `edge` in direction `dir` with geometrically growing
// strides until Y − E changes sign relative to its value at the edge.
fn bracket<F: Fn(f64) -> Result<f64>>(f: &F, edge: f64, dir: f64) -> Result<Option<f64>> {
    let mut d = 1e-3_f64.max(1e-3 * edge.abs());
    for _ in 0..MAX_EXPANSIONS {
        let x = edge + dir * d;
        let v = f(x)?;
        if (dir < 0.0 && v > 0.0) || (dir > 0.0 && v < 0.0) {
            return Ok(Some(x));
        }
        if v == 0.0 {
            return Ok(Some(x));
        }
        d *= 2.0;
    }
    Ok(None)
}

// Bisection on a decreasing function with f(a) ≥ 0 ≥ f(b), never
// returning the support edge itself.
fn bisect<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64, edge: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 && a != edge {
        return Ok(a);
    }
    if fb == 0.0 && b != edge {
        return Ok(b);
    }
    for _ in 0..300 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm > 0.0 {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    // Never return the edge itself; otherwise the end with the smaller residual.
    let pick = if a == edge || (b != edge && fb.abs() < fa.abs()) {
        b
    } else {
        a
    };
    Ok(pick)
}

impl Tolerance {
    fn min_with(self, other: &Tolerance) -> Tolerance {
        Tolerance {
            abs: self.abs.min(other.abs),
            rel: self.rel.min(other.rel),
            max_intervals: self.max_intervals.max(other.max_intervals),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub param: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub bound_states: Vec<BoundState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSweep {
    pub parameter: String,
    pub points: Vec<SweepPoint>,
}

impl SpectrumSweep {
    /// First grid value at which a bound state is present.
    pub fn onset(&self) -> Option<f64> {
        self.points
            .iter()
            .find(|p| !p.bound_states.is_empty())
            .map(|p| p.param)
    }

    /// Midpoint of the first grid interval across which a bound state
    /// appears; `None` when the branch never switches on.
    pub fn threshold_estimate(&self) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            (w[0].bound_states.is_empty() && !w[1].bound_states.is_empty())
                .then(|| 0.5 * (w[0].param + w[1].param))
        })
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "sweep grid has non-finite values".into(),
        ));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::InvalidParameter(
            "sweep grid must be strictly monotone".into(),
        ));
    }
    Ok(())
}

/// Band edges and bound states over a one-parameter family.
///
/// `family` maps the control parameter to a spectral density and ω_0.
/// Grid points are evaluated in parallel; output keeps grid order.
pub fn spectrum_sweep<F>(
    parameter: &str,
    family: F,
    grid: &[f64],
    tol: &Tolerance,
) -> Result<SpectrumSweep>
where
    F: Fn(f64) -> Result<(SpectralDensity, f64)> + Sync,
{
    validate_grid(grid)?;
    let points = grid
        .par_iter()
        .map(|&p| {
            let (sd, omega0) = family(p)?;
            let (band_lo, band_hi) = sd.support();
            Ok(SweepPoint {
                param: p,
                band_lo,
                band_hi,
                bound_states: find_bound_states(&sd, omega0, tol)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumSweep {
        parameter: parameter.to_string(),
        points,
    })
}

/// Bisects the control parameter between `without` (no bound state) and
/// `with` (bound state present) until the bracket is narrower than
/// `resolution`; returns the bracket midpoint.
pub fn locate_threshold<F>(
    family: F,
    mut without: f64,
    mut with: f64,
    resolution: f64,
    tol: &Tolerance,
) -> Result<f64>
where
    F: Fn(f64) -> Result<(SpectralDensity, f64)>,
{
    let present = |p: f64| -> Result<bool> {
        let (sd, omega0) = family(p)?;
        Ok(bound_state_exists(&sd, omega0, tol)?.any())
    };
    if present(without)? || !present(with)? {
        return Err(Error::InvalidParameter(format!(
            "threshold not bracketed by [{without}, {with}]"
        )));
    }
    while (with - without).abs() > resolution {
        let mid = 0.5 * (with + without);
        if present(mid)? {
            with = mid;
        } else {
            without = mid;
        }
    }
    Ok(0.5 * (with + without))
}
