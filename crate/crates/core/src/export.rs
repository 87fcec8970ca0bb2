//! Plain-text CSV writers with fixed `%.12e` number formatting, so identical
//! inputs give byte-identical files.

use std::io::Write;

use crate::error::Result;
use crate::lattice::ExcitationSpectrum;
use crate::propagator::{MasterEqCoeffs, UTrajectory};
use crate::spectrum::SpectrumSweep;
use crate::teleport::dv::TeleportOutcome;
use crate::teleport::FidelityRow;

/// Formats like C's `%.12e`: twelve fractional digits and an exponent with
/// sign and at least two digits.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

pub fn write_trajectory<W: Write>(
    mut w: W,
    traj: &UTrajectory,
    coeffs: Option<&[MasterEqCoeffs]>,
) -> Result<()> {
    if coeffs.is_some() {
        writeln!(w, "t,re_u,im_u,abs_u,gamma,omega")?;
    } else {
        writeln!(w, "t,re_u,im_u,abs_u")?;
    }
    for (i, (t, u)) in traj.times.iter().zip(&traj.u).enumerate() {
        write!(
            w,
            "{},{},{},{}",
            sci(*t),
            sci(u.re),
            sci(u.im),
            sci(u.norm())
        )?;
        if let Some(c) = coeffs {
            write!(w, ",{},{}", sci(c[i].gamma), sci(c[i].omega))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// One row per bound state; a grid point without one gets a single row with
/// empty `E_b` and `Z`.
pub fn write_sweep<W: Write>(mut w: W, sweep: &SpectrumSweep) -> Result<()> {
    writeln!(w, "param,band_lo,band_hi,E_b,Z")?;
    for p in &sweep.points {
        let head = format!("{},{},{}", sci(p.param), sci(p.band_lo), sci(p.band_hi));
        if p.bound_states.is_empty() {
            writeln!(w, "{head},,")?;
        }
        for b in &p.bound_states {
            writeln!(w, "{head},{},{}", sci(b.energy), sci(b.residue))?;
        }
    }
    Ok(())
}

/// The `F_bma` field is empty where no Markov rate exists.
pub fn write_fidelity<W: Write>(mut w: W, rows: &[FidelityRow]) -> Result<()> {
    writeln!(w, "t,F_exact,F_bma,F_steady_envelope")?;
    for r in rows {
        let bma = r.bma.map(sci).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{}",
            sci(r.t),
            sci(r.exact),
            bma,
            sci(r.steady_envelope)
        )?;
    }
    Ok(())
}

pub fn write_outcomes<W: Write>(mut w: W, outcomes: &[TeleportOutcome]) -> Result<()> {
    writeln!(w, "k,P_k,F_k")?;
    for o in outcomes {
        writeln!(w, "{},{},{}", o.k, sci(o.probability), sci(o.fidelity))?;
    }
    Ok(())
}

/// Eigenvalues are numbered from 0 in ascending order.
pub fn write_lattice_spectrum<W: Write>(mut w: W, spec: &ExcitationSpectrum) -> Result<()> {
    writeln!(w, "j,E_j,weight")?;
    for (j, (e, x)) in spec.energies.iter().zip(&spec.weights).enumerate() {
        writeln!(w, "{j},{},{}", sci(*e), sci(*x))?;
    }
    Ok(())
}
