//! Direct spectral problem for the Dirac operator `J u' + P u = lambda u`
//! with `u2(0) = u2(1) = 0`, where `J = [[0, 1], [-1, 0]]` and `P` is real
//! symmetric.
//!
//! Solutions are integrated in polar form `u = rho (cos phi, sin phi)`:
//!
//! ```text
//! phi'     = lambda - P11 cos^2 phi - P12 sin 2phi - P22 sin^2 phi
//! log rho' = P12 cos 2phi + (P22 - P11) sin 2phi / 2
//! ```
//!
//! `phi(1; lambda)` is strictly increasing in `lambda`, and `lambda_n` is the
//! unique root of `phi(1; lambda) = pi n`. For the zero potential both
//! equations are integrated exactly, so the free spectrum `pi n` comes out
//! to rounding.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{At, Grid, GridFn, MatrixGridFn};
use crate::ode;

/// Tolerance on `|phi(1; lambda) - pi n|` for eigenvalue searches.
pub const ANGLE_TOL: f64 = 1e-10;
/// Half-width beyond which the eigenvalue bracket search gives up.
pub const MAX_BRACKET: f64 = 10.0;
const MAX_ITER: usize = 200;
/// Relative terminal residual above which a value is not accepted as an
/// eigenvalue.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-6;

/// Structural class of a Dirac potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialForm {
    /// `h I + [[q1, q2], [q2, -q1]]`.
    ShiftedAkns {
        h: f64,
    },
    /// `[[0, -v], [-v, 2p]]`, the form attached to a pencil.
    Pencil,
    General,
}

/// Real symmetric 2x2 potential with its structural tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiracRepr", into = "DiracRepr")]
pub struct DiracPotential {
    mat: MatrixGridFn,
    form: PotentialForm,
}

#[derive(Serialize, Deserialize)]
struct DiracRepr {
    m: usize,
    form: String,
    h: Option<f64>,
    e11: Vec<f64>,
    e12: Vec<f64>,
    e22: Vec<f64>,
}

impl TryFrom<DiracRepr> for DiracPotential {
    type Error = Error;

    fn try_from(r: DiracRepr) -> Result<Self> {
        let g = Grid::new(r.m)?;
        let form = match (r.form.as_str(), r.h) {
            ("shifted-akns", Some(h)) => PotentialForm::ShiftedAkns { h },
            ("shifted-akns", None) => return Err(Error::domain("shifted-akns form needs h")),
            ("pencil", _) => PotentialForm::Pencil,
            ("general", _) => PotentialForm::General,
            (other, _) => return Err(Error::domain(format!("unknown potential form {other:?}"))),
        };
        let mat = MatrixGridFn::symmetric(GridFn::new(g, r.e11)?, GridFn::new(g, r.e12)?, GridFn::new(g, r.e22)?)?;
        DiracPotential::new(mat, form)
    }
}

impl From<DiracPotential> for DiracRepr {
    fn from(p: DiracPotential) -> Self {
        let (form, h) = match p.form {
            PotentialForm::ShiftedAkns { h } => ("shifted-akns", Some(h)),
            PotentialForm::Pencil => ("pencil", None),
            PotentialForm::General => ("general", None),
        };
        DiracRepr {
            m: p.grid().intervals(),
            form: form.to_string(),
            h,
            e11: p.mat.e11.into_values(),
            e12: p.mat.e12.into_values(),
            e22: p.mat.e22.into_values(),
        }
    }
}

const FORM_TOL: f64 = 1e-8;

impl DiracPotential {
    pub fn new(mat: MatrixGridFn, form: PotentialForm) -> Result<Self> {
        let scale = 1.0 + mat.max_abs();
        let g = mat.grid();
        for j in 0..g.len() {
            let e = mat.at_node(j);
            if (e[0][1] - e[1][0]).abs() > FORM_TOL * scale {
                return Err(Error::domain(format!("potential not symmetric at node {j}")));
            }
            match form {
                PotentialForm::ShiftedAkns { h } => {
                    if (e[0][0] + e[1][1] - 2.0 * h).abs() > FORM_TOL * scale {
                        return Err(Error::domain(format!(
                            "trace at node {j} differs from 2h = {}",
                            2.0 * h
                        )));
                    }
                }
                PotentialForm::Pencil => {
                    if e[0][0].abs() > FORM_TOL * scale {
                        return Err(Error::domain(format!("pencil form needs e11 = 0 (node {j})")));
                    }
                }
                PotentialForm::General => {}
            }
        }
        Ok(DiracPotential { mat, form })
    }

    pub fn zero(grid: Grid) -> Self {
        DiracPotential {
            mat: MatrixGridFn::zeros(grid),
            form: PotentialForm::ShiftedAkns { h: 0.0 },
        }
    }

    /// `h I`.
    pub fn scalar(grid: Grid, h: f64) -> Self {
        let c = GridFn::constant(grid, h);
        let z = GridFn::zeros(grid);
        DiracPotential {
            mat: MatrixGridFn::symmetric(c.clone(), z, c).expect("same grid"),
            form: PotentialForm::ShiftedAkns { h },
        }
    }

    /// `h I + [[q1, q2], [q2, -q1]]`.
    pub fn shifted_akns(h: f64, q1: &GridFn, q2: &GridFn) -> Result<Self> {
        let e11 = q1.map(|v| h + v);
        let e22 = q1.map(|v| h - v);
        let mat = MatrixGridFn::symmetric(e11, q2.clone(), e22)?;
        mat.grid().ensure_same(&q2.grid())?;
        Ok(DiracPotential {
            mat,
            form: PotentialForm::ShiftedAkns { h },
        })
    }

    /// `[[0, -v], [-v, 2p]]`.
    pub fn pencil(p: &GridFn, v: &GridFn) -> Result<Self> {
        p.grid().ensure_same(&v.grid())?;
        let mat = MatrixGridFn::symmetric(GridFn::zeros(p.grid()), v.map(|x| -x), p.map(|x| 2.0 * x))?;
        Ok(DiracPotential {
            mat,
            form: PotentialForm::Pencil,
        })
    }

    pub fn general(e11: GridFn, e12: GridFn, e22: GridFn) -> Result<Self> {
        Self::new(MatrixGridFn::symmetric(e11, e12, e22)?, PotentialForm::General)
    }

    pub fn grid(&self) -> Grid {
        self.mat.grid()
    }

    pub fn mat(&self) -> &MatrixGridFn {
        &self.mat
    }

    pub fn form(&self) -> PotentialForm {
        self.form
    }

    pub fn into_parts(self) -> (MatrixGridFn, PotentialForm) {
        (self.mat, self.form)
    }

    /// `(1/2) * integral of tr P`, the asymptotic offset of the spectrum.
    pub fn half_trace_integral(&self) -> f64 {
        0.5 * (self.mat.e11.integrate() + self.mat.e22.integrate())
    }

    /// Shift `h` when tagged shifted-AKNS.
    pub fn shift(&self) -> Option<f64> {
        match self.form {
            PotentialForm::ShiftedAkns { h } => Some(h),
            _ => None,
        }
    }

    /// AKNS part `(q1, q2)` of `Q = h I + [[q1, q2], [q2, -q1]]`.
    pub fn akns_parts(&self) -> (GridFn, GridFn) {
        let q1 = self
            .mat
            .e11
            .zip_with(&self.mat.e22, |a, d| 0.5 * (a - d))
            .expect("same grid");
        (q1, self.mat.e12.clone())
    }

    /// Adds `delta I`; a shifted-AKNS tag moves with it.
    pub fn shifted_by(&self, delta: f64) -> Self {
        let mut mat = self.mat.clone();
        mat.e11 = mat.e11.map(|v| v + delta);
        mat.e22 = mat.e22.map(|v| v + delta);
        let form = match self.form {
            PotentialForm::ShiftedAkns { h } => PotentialForm::ShiftedAkns { h: h + delta },
            _ => PotentialForm::General,
        };
        DiracPotential { mat, form }
    }
}

/// Eigenvalue with its normalized eigenfunction `u(0) = (1, 0)`.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub n: i64,
    pub lambda: f64,
    pub alpha: f64,
    pub u1: GridFn,
    pub u2: GridFn,
    /// `|u2(1)|`.
    pub residual: f64,
}

struct Coeffs<'a> {
    p11: &'a GridFn,
    p12: &'a GridFn,
    p22: &'a GridFn,
}

impl<'a> Coeffs<'a> {
    fn of(p: &'a DiracPotential) -> Self {
        Coeffs {
            p11: &p.mat.e11,
            p12: &p.mat.e12,
            p22: &p.mat.e22,
        }
    }

    #[inline]
    fn at(&self, at: At) -> (f64, f64, f64) {
        (self.p11.sample(at), self.p12.sample(at), self.p22.sample(at))
    }
}

#[inline]
fn angle_rate(lambda: f64, (p11, p12, p22): (f64, f64, f64), phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    lambda - p11 * c * c - 2.0 * p12 * s * c - p22 * s * s
}

#[inline]
fn log_amplitude_rate((p11, p12, p22): (f64, f64, f64), phi: f64) -> f64 {
    let (s2, c2) = (2.0 * phi).sin_cos();
    p12 * c2 + 0.5 * (p22 - p11) * s2
}

fn default_substeps(p: &DiracPotential, lambda: f64) -> usize {
    ode::substeps_for(p.grid(), lambda.abs() + p.mat.max_abs())
}

fn terminal_angle_with(p: &DiracPotential, lambda: f64, substeps: usize) -> Result<f64> {
    let c = Coeffs::of(p);
    let ys = ode::rk4(p.grid(), [0.0], substeps, |at, y| [angle_rate(lambda, c.at(at), y[0])])?;
    Ok(ys[ys.len() - 1][0])
}

fn polar_solution(p: &DiracPotential, lambda: f64, substeps: usize) -> Result<Vec<[f64; 2]>> {
    let c = Coeffs::of(p);
    ode::rk4(p.grid(), [0.0, 0.0], substeps, |at, y| {
        let e = c.at(at);
        [angle_rate(lambda, e, y[0]), log_amplitude_rate(e, y[0])]
    })
}

fn polar_to_components(grid: Grid, ys: &[[f64; 2]]) -> (GridFn, GridFn) {
    let (u1, u2) = ys
        .iter()
        .map(|y| {
            let rho = y[1].exp();
            (rho * y[0].cos(), rho * y[0].sin())
        })
        .unzip();
    (GridFn::from_samples(grid, u1), GridFn::from_samples(grid, u2))
}

/// Solution of `J u' + P u = lambda u` with `u(0) = (1, 0)`.
pub fn dirac_ivp(p: &DiracPotential, lambda: f64) -> Result<(GridFn, GridFn)> {
    let ys = polar_solution(p, lambda, default_substeps(p, lambda))?;
    Ok(polar_to_components(p.grid(), &ys))
}

/// Terminal Prüfer angle `phi(1; lambda)`, with `phi(0) = 0`.
pub fn pruefer_terminal_angle(p: &DiracPotential, lambda: f64) -> Result<f64> {
    terminal_angle_with(p, lambda, default_substeps(p, lambda))
}

/// Eigenvalue `lambda_n`, the root of `phi(1; lambda) = pi n`.
pub fn eigenvalue(p: &DiracPotential, n: i64) -> Result<f64> {
    let target = PI * n as f64;
    let center = target + p.half_trace_integral();
    let substeps = default_substeps(p, center.abs() + MAX_BRACKET);
    let g = |lambda: f64| terminal_angle_with(p, lambda, substeps).map(|phi| phi - target);

    let mut half = 0.5;
    let (mut lo, mut hi) = (center - half, center + half);
    let (mut glo, mut ghi) = (g(lo)?, g(hi)?);
    while glo > 0.0 || ghi < 0.0 {
        half *= 2.0;
        if half > MAX_BRACKET {
            return Err(Error::SearchFailure { n });
        }
        if glo > 0.0 {
            lo = center - half;
            glo = g(lo)?;
        }
        if ghi < 0.0 {
            hi = center + half;
            ghi = g(hi)?;
        }
    }
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    // Exact roots occur for the zero mode of pencil-form potentials.
    if lo < 0.0 && hi > 0.0 && g(0.0)? == 0.0 {
        return Ok(0.0);
    }

    // Illinois-modified regula falsi with a bisection fallback.
    let mut side = 0i8;
    let mut root = 0.5 * (lo + hi);
    let mut groot = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let mut x = (lo * ghi - hi * glo) / (ghi - glo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x)?;
        root = x;
        groot = gx;
        if gx.abs() <= ANGLE_TOL || hi - lo <= 1e-14 * (1.0 + x.abs()) {
            break;
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    if groot.abs() > ANGLE_TOL {
        return Ok(root);
    }

    // Newton polish with a central-difference slope.
    let d = 1e-6;
    let slope = (g(root + d)? - g(root - d)?) / (2.0 * d);
    if slope > 0.0 {
        let polished = root - groot / slope;
        if (polished - root).abs() < d {
            let gp = g(polished)?;
            if gp.abs() <= groot.abs() {
                return Ok(polished);
            }
        }
    }
    Ok(root)
}

/// Norming constant `||u||^2` for an eigenvalue `lambda`.
pub fn norming_constant(p: &DiracPotential, lambda: f64) -> Result<f64> {
    let ys = polar_solution(p, lambda, default_substeps(p, lambda))?;
    norming_from_polar(p.grid(), lambda, &ys)
}

fn norming_from_polar(grid: Grid, lambda: f64, ys: &[[f64; 2]]) -> Result<f64> {
    let last = ys[ys.len() - 1];
    let residual = (last[1].exp() * last[0].sin()).abs();
    let max_norm = ys.iter().map(|y| y[1]).fold(f64::NEG_INFINITY, f64::max).exp();
    if residual > EIGEN_RESIDUAL_TOL * max_norm {
        return Err(Error::NotAnEigenvalue { lambda, residual });
    }
    let density = ys.iter().map(|y| (2.0 * y[1]).exp()).collect();
    Ok(GridFn::from_samples(grid, density).integrate())
}

/// Eigenpair with index `n`.
pub fn eigenpair(p: &DiracPotential, n: i64) -> Result<Eigenpair> {
    let lambda = eigenvalue(p, n)?;
    let ys = polar_solution(p, lambda, default_substeps(p, lambda))?;
    let alpha = norming_from_polar(p.grid(), lambda, &ys)?;
    let (u1, u2) = polar_to_components(p.grid(), &ys);
    let residual = u2[u2.values().len() - 1].abs();
    Ok(Eigenpair {
        n,
        lambda,
        alpha,
        u1,
        u2,
        residual,
    })
}

/// Eigenpairs for `n = -N..=N`, sorted by `n`.
pub fn dirac_spectral_data(p: &DiracPotential, pairs: usize) -> Result<Vec<Eigenpair>> {
    let n = pairs as i64;
    let out: Vec<Eigenpair> = (-n..=n)
        .into_par_iter()
        .map(|k| eigenpair(p, k))
        .collect::<Result<_>>()?;
    for w in out.windows(2) {
        if w[1].lambda <= w[0].lambda {
            return Err(Error::Domain(format!("eigenvalues not increasing at n = {}", w[1].n)));
        }
    }
    Ok(out)
}

/// Zero mode of a pencil-form potential: `u1 = exp(-int v)`, `u2 = 0`.
#[derive(Debug, Clone)]
pub struct ZeroMode {
    pub u1: GridFn,
    pub alpha0: f64,
}

pub fn zero_mode(p: &DiracPotential) -> Result<ZeroMode> {
    if p.form != PotentialForm::Pencil {
        return Err(Error::domain("zero mode requires a pencil-form potential"));
    }
    // v = -P12
    let u1 = p.mat.e12.antiderivative_cubic().map(f64::exp);
    let alpha0 = u1.map(|v| v * v).integrate();
    Ok(ZeroMode { u1, alpha0 })
}

/// `L2` inner product of two vector functions.
pub fn inner(a: (&GridFn, &GridFn), b: (&GridFn, &GridFn)) -> Result<f64> {
    let x = a.0.zip_with(b.0, |s, t| s * t)?;
    let y = a.1.zip_with(b.1, |s, t| s * t)?;
    Ok(x.integrate() + y.integrate())
}
