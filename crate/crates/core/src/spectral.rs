//! Reservoir spectral densities J(ω), the memory kernel μ(x) and
//! principal-value frequency shifts.
//!
//! Frequencies are in units of ω_0 and times in units of 1/ω_0 throughout.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{self, Estimate, QuadValue, Tolerance};

/// Relative size of e^{-ω/ω_c} at which Ohmic-family integrals are cut off.
pub const OHMIC_TAIL: f64 = 1e-16;

/// Ohmic family J(ω) = η ω^s ω_c^{1-s} e^{-ω/ω_c} on (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ohmic {
    pub eta: f64,
    pub s: f64,
    pub omega_c: f64,
}

/// Semicircle J(ω) = g²/(2πξ²) √(4ξ² − (ω − ω_r)²) on [ω_r − 2ξ, ω_r + 2ξ],
/// the end-site spectral density of a nearest-neighbour resonator chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Semicircle {
    pub g: f64,
    pub xi: f64,
    pub omega_r: f64,
}

/// Sampled J(ω), linearly interpolated between strictly increasing nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tabulated {
    omega: Vec<f64>,
    j: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralDensity {
    Ohmic(Ohmic),
    Semicircle(Semicircle),
    Tabulated(Tabulated),
}

/// Which support edges get a square-root substitution when integrating.
///
/// Used when an integrand is sharply peaked just outside an edge, e.g. the
/// residue integral for a bound state sitting close to the band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeRefine {
    pub lower: bool,
    pub upper: bool,
}

impl Ohmic {
    pub fn new(eta: f64, s: f64, omega_c: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be >= 0, got {eta}"
            )));
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Ohmicity s must be > 0, got {s}"
            )));
        }
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff omega_c must be > 0, got {omega_c}"
            )));
        }
        Ok(Self { eta, s, omega_c })
    }

    /// Upper integration limit where the exponential cutoff has fallen below
    /// [`OHMIC_TAIL`].
    pub fn omega_max(&self) -> f64 {
        self.omega_c * (1.0 / OHMIC_TAIL).ln() * self.s.max(1.0)
    }

    /// ∫ J(ω)/ω dω = η ω_c Γ(s).
    pub fn inverse_moment(&self) -> f64 {
        self.eta * self.omega_c * gamma(self.s)
    }
}

impl Semicircle {
    pub fn new(g: f64, xi: f64, omega_r: f64) -> Result<Self> {
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!("g must be >= 0, got {g}")));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidParameter(format!("xi must be > 0, got {xi}")));
        }
        if !omega_r.is_finite() {
            return Err(Error::InvalidParameter("omega_r must be finite".into()));
        }
        Ok(Self { g, xi, omega_r })
    }

    fn omega_of(&self, theta: f64) -> f64 {
        self.omega_r - 2.0 * self.xi * theta.cos()
    }

    fn theta_of(&self, omega: f64) -> f64 {
        ((self.omega_r - omega) / (2.0 * self.xi))
            .clamp(-1.0, 1.0)
            .acos()
    }
}

impl Tabulated {
    pub fn new(omega: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        if omega.len() != j.len() {
            return Err(Error::Table("omega and J columns differ in length".into()));
        }
        if omega.len() < 2 {
            return Err(Error::Table("at least two samples are required".into()));
        }
        if omega.iter().chain(&j).any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite sample".into()));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("omega must be strictly increasing".into()));
        }
        if let Some(bad) = j.iter().find(|&&v| v < 0.0) {
            return Err(Error::Table(format!("negative J sample {bad}")));
        }
        let table = Self { omega, j };
        let area = quad::trapezoid(&table.omega, &table.j);
        if !area.is_finite() {
            return Err(Error::Table("integral of J is not finite".into()));
        }
        Ok(table)
    }

    /// Reads a two-column CSV with the header `omega,J`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "omega" || &headers[1] != "J" {
            return Err(Error::Table(format!(
                "expected header `omega,J`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut omega = Vec::new();
        let mut j = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Table(format!("row {}: bad number", line + 2)))
            };
            omega.push(parse(0)?);
            j.push(parse(1)?);
        }
        Self::new(omega, j)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.j
    }

    fn eval(&self, w: f64) -> f64 {
        let n = self.omega.len();
        if w < self.omega[0] || w > self.omega[n - 1] {
            return 0.0;
        }
        let k = self.omega.partition_point(|&x| x <= w).clamp(1, n - 1);
        let (x0, x1) = (self.omega[k - 1], self.omega[k]);
        let (y0, y1) = (self.j[k - 1], self.j[k]);
        y0 + (y1 - y0) * (w - x0) / (x1 - x0)
    }
}

impl SpectralDensity {
    pub fn ohmic(eta: f64, s: f64, omega_c: f64) -> Result<Self> {
        Ohmic::new(eta, s, omega_c).map(Self::Ohmic)
    }

    pub fn semicircle(g: f64, xi: f64, omega_r: f64) -> Result<Self> {
        Semicircle::new(g, xi, omega_r).map(Self::Semicircle)
    }

    pub fn tabulated(omega: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        Tabulated::new(omega, j).map(Self::Tabulated)
    }

    /// J(ω); exactly zero outside the support.
    pub fn j(&self, w: f64) -> f64 {
        match self {
            Self::Ohmic(o) => {
                if w <= 0.0 {
                    0.0
                } else {
                    o.eta * w.powf(o.s) * o.omega_c.powf(1.0 - o.s) * (-w / o.omega_c).exp()
                }
            }
            Self::Semicircle(sc) => {
                let d = w - sc.omega_r;
                let r2 = 4.0 * sc.xi * sc.xi - d * d;
                if r2 <= 0.0 {
                    0.0
                } else {
                    sc.g * sc.g / (2.0 * PI * sc.xi * sc.xi) * r2.sqrt()
                }
            }
            Self::Tabulated(t) => t.eval(w),
        }
    }

    /// Closed support `[lo, hi]`; `hi` is infinite for the Ohmic family.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Ohmic(_) => (0.0, f64::INFINITY),
            Self::Semicircle(sc) => (sc.omega_r - 2.0 * sc.xi, sc.omega_r + 2.0 * sc.xi),
            Self::Tabulated(t) => (t.omega[0], t.omega[t.omega.len() - 1]),
        }
    }

    /// Finite upper limit used for numerical integration.
    pub fn integration_upper(&self) -> f64 {
        match self {
            Self::Ohmic(o) => o.omega_max(),
            _ => self.support().1,
        }
    }

    /// True when `w` lies in the open interior of the support.
    pub fn in_interior(&self, w: f64) -> bool {
        let (lo, hi) = self.support();
        w > lo && w < hi
    }

    /// ∫ J(ω) dω, which is also μ(0).
    pub fn total_weight(&self) -> f64 {
        match self {
            Self::Ohmic(o) => o.eta * gamma(o.s + 1.0) * o.omega_c * o.omega_c,
            Self::Semicircle(sc) => sc.g * sc.g,
            Self::Tabulated(t) => quad::trapezoid(&t.omega, &t.j),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Ohmic(o) => o.eta == 0.0,
            Self::Semicircle(sc) => sc.g == 0.0,
            Self::Tabulated(t) => t.j.iter().all(|&v| v == 0.0),
        }
    }

    /// ∫ over the support of `f(ω) dω`, where `f` already contains J.
    ///
    /// `breaks` are interior points where `f` is non-smooth (they become
    /// panel boundaries, so `f` is never evaluated exactly there). The
    /// semicircle is integrated in the angle variable ω = ω_r − 2ξ cos θ,
    /// which removes its square-root edges.
    pub fn integrate_support<T, F>(
        &self,
        f: F,
        breaks: &[f64],
        refine: EdgeRefine,
        tol: &Tolerance,
    ) -> Result<Estimate<T>>
    where
        T: QuadValue,
        F: Fn(f64) -> T,
    {
        let lo = self.support().0;
        let hi = self.integration_upper();
        let mut pts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&b| b > lo && b < hi)
            .collect();
        match self {
            Self::Semicircle(sc) => {
                let mut th: Vec<f64> = pts.iter().map(|&w| sc.theta_of(w)).collect();
                th.push(0.0);
                th.push(PI);
                sort_dedup(&mut th);
                let scale = 2.0 * sc.xi;
                quad::integrate_pieces(|t: f64| f(sc.omega_of(t)) * (scale * t.sin()), &th, tol)
            }
            Self::Ohmic(o) => {
                if o.omega_c < hi {
                    pts.push(o.omega_c);
                }
                pts.push(lo);
                pts.push(hi);
                sort_dedup(&mut pts);
                integrate_with_edges(&f, &pts, refine, tol)
            }
            Self::Tabulated(t) => {
                pts.extend_from_slice(&t.omega);
                sort_dedup(&mut pts);
                integrate_with_edges(&f, &pts, refine, tol)
            }
        }
    }

    /// μ(x) = ∫ J(ω) e^{-iωx} dω.
    ///
    /// Ohmic family: closed form. Semicircle: adaptive quadrature.
    /// Tabulated: composite trapezoid on the sample grid.
    pub fn memory_kernel(&self, x: f64, tol: &Tolerance) -> Result<Complex64> {
        if x < 0.0 {
            return self.memory_kernel(-x, tol).map(|m| m.conj());
        }
        match self {
            Self::Ohmic(o) => {
                let base = Complex64::new(1.0 / o.omega_c, x);
                Ok(
                    base.powf(-(o.s + 1.0))
                        * (o.eta * o.omega_c.powf(1.0 - o.s) * gamma(o.s + 1.0)),
                )
            }
            Self::Semicircle(_) => self.memory_kernel_quadrature(x, tol),
            Self::Tabulated(t) => {
                let ys: Vec<Complex64> = t
                    .omega
                    .iter()
                    .zip(&t.j)
                    .map(|(&w, &j)| Complex64::from_polar(j, -w * x))
                    .collect();
                Ok(quad::trapezoid(&t.omega, &ys))
            }
        }
    }

    /// μ(x) by adaptive quadrature of the defining integral, for every variant.
    pub fn memory_kernel_quadrature(&self, x: f64, tol: &Tolerance) -> Result<Complex64> {
        let est = self.integrate_support(
            |w: f64| Complex64::from_polar(self.j(w), -w * x),
            &[],
            EdgeRefine::default(),
            tol,
        )?;
        Ok(est.value)
    }

    /// Δ(E) = P∫ J(ω)/(E − ω) dω.
    ///
    /// Inside the support the principal value is taken by subtracting J(E):
    /// ∫ [J(ω) − J(E)]/(E − ω) dω + J(E) ln((E − lo)/(hi − E)). Outside it
    /// the integral is ordinary. The same function gives the Markov shift
    /// Δ_{ω_0} (E = ω_0) and the band shift Δ_E.
    pub fn lamb_shift(&self, e: f64, tol: &Tolerance) -> Result<f64> {
        if !e.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "energy must be finite, got {e}"
            )));
        }
        let (lo, hi) = self.support();
        let upper = self.integration_upper();
        if e == lo || e == hi {
            return Err(Error::SingularEndpoint { energy: e });
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        if e < lo || e >= upper {
            let est = self.integrate_support(
                |w: f64| self.j(w) / (e - w),
                &[],
                EdgeRefine::default(),
                tol,
            )?;
            return Ok(est.value);
        }
        let je = self.j(e);
        let est = self.integrate_support(
            |w: f64| (self.j(w) - je) / (e - w),
            &[e],
            EdgeRefine::default(),
            tol,
        )?;
        Ok(est.value + je * ((e - lo) / (upper - e)).ln())
    }

    /// ∫ J(ω)/(ω − E)^p dω for E outside the open support.
    ///
    /// For the semicircle the integrand is written in the angle variable with
    /// ω − E measured from the nearer band edge, which keeps full relative
    /// precision when E sits on or next to an edge.
    pub fn resolvent_moment(&self, e: f64, p: i32, tol: &Tolerance) -> Result<Estimate<f64>> {
        let (lo, hi) = self.support();
        if self.in_interior(e) {
            return Err(Error::InsideContinuum { energy: e, lo, hi });
        }
        match self {
            Self::Semicircle(sc) => {
                let (g, xi) = (sc.g, sc.xi);
                let (dlo, dhi) = (lo - e, hi - e);
                let pref = g * g / (PI * xi) * 2.0 * xi;
                let f = |t: f64| {
                    let s = t.sin();
                    let h = 0.5 * t;
                    let d = if t <= 0.5 * PI {
                        dlo + 4.0 * xi * h.sin().powi(2)
                    } else {
                        dhi - 4.0 * xi * h.cos().powi(2)
                    };
                    pref * s * s / d.powi(p)
                };
                quad::integrate_pieces(f, &[0.0, 0.5 * PI, PI], tol)
            }
            _ => {
                let refine = EdgeRefine {
                    lower: (e - lo).abs() < 1e-3,
                    upper: hi.is_finite() && (e - hi).abs() < 1e-3,
                };
                self.integrate_support(|w: f64| self.j(w) / (w - e).powi(p), &[], refine, tol)
            }
        }
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

// Integrates over consecutive pieces, mapping the first/last piece through a
// square-root substitution when requested.
fn integrate_with_edges<T, F>(
    f: &F,
    pts: &[f64],
    refine: EdgeRefine,
    tol: &Tolerance,
) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let n = pts.len();
    if n < 2 {
        return Ok(Estimate {
            value: T::default(),
            error: 0.0,
            evaluations: 0,
        });
    }
    let pieces = (n - 1) as f64;
    let piece_tol = Tolerance {
        abs: tol.abs / pieces,
        ..*tol
    };
    let mut acc = Estimate {
        value: T::default(),
        error: 0.0,
        evaluations: 0,
    };
    for (i, w) in pts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let est = if i == 0 && refine.lower {
            quad::integrate(
                |v: f64| f(a + v * v) * (2.0 * v),
                0.0,
                (b - a).sqrt(),
                &piece_tol,
            )?
        } else if i == n - 2 && refine.upper {
            quad::integrate(
                |v: f64| f(b - v * v) * (2.0 * v),
                0.0,
                (b - a).sqrt(),
                &piece_tol,
            )?
        } else {
            quad::integrate(f, a, b, &piece_tol)?
        };
        acc.value = acc.value + est.value;
        acc.error += est.error;
        acc.evaluations += est.evaluations;
    }
    Ok(acc)
}
