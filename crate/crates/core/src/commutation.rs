//! Double commutation at the zero eigenvalue: the rank-one deformation
//! `Q -> Q + Q*` that changes the zero-mode norming constant from `alpha0` to
//! `alpha0_tilde` and leaves the rest of the spectral data untouched.
//!
//! With `v` the zero-energy eigenfunction, `v(0) = (1, 0)`, and
//! `alpha* = 1/alpha0_tilde - 1/alpha0`,
//!
//! ```text
//! w(x) = 1 + alpha* ∫_0^x vᵗv,    Q* = -(alpha* / w) (v vᵗ J - J v vᵗ).
//! ```
//!
//! In pencil form, with `v = R (u1, 0)` and `(log w)' = alpha* u1² / w`,
//! `Q* = -(log w)' [[sin 2theta, cos 2theta], [cos 2theta, -sin 2theta]]`.

use crate::dirac::{self, DiracPotential, PotentialForm};
use crate::error::{Error, Result};
use crate::gauge::{self, GaugeAngle};
use crate::grid::{GridFn, MatrixGridFn};

/// Smallest admissible value of `w`.
pub const MIN_W: f64 = 1e-6;

/// Parameters of one commutation.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutationParams {
    pub alpha0: f64,
    pub alpha0_tilde: f64,
    pub alpha_star: f64,
    pub w: GridFn,
}

impl CommutationParams {
    /// Builds `w` from the density `vᵗv` of the zero mode.
    pub fn new(alpha0: f64, alpha0_tilde: f64, density: &GridFn) -> Result<Self> {
        for a in [alpha0, alpha0_tilde] {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::domain(format!("norming constants must be positive, got {a}")));
            }
        }
        let alpha_star = 1.0 / alpha0_tilde - 1.0 / alpha0;
        let w = density.antiderivative_cubic().map(|s| 1.0 + alpha_star * s);
        if let Some((node, &w)) = w.values().iter().enumerate().find(|(_, &w)| !(w > MIN_W)) {
            return Err(Error::SingularCommutation { node, w });
        }
        Ok(CommutationParams {
            alpha0,
            alpha0_tilde,
            alpha_star,
            w,
        })
    }

    /// `(log w)' = alpha* density / w`.
    pub fn log_w_prime(&self, density: &GridFn) -> Result<GridFn> {
        let a = self.alpha_star;
        density.zip_with(&self.w, |d, w| a * d / w)
    }
}

fn tagged_like(q: &DiracPotential, mat: MatrixGridFn) -> Result<DiracPotential> {
    // Q* is traceless, so a shifted-AKNS tag survives
    let form = match q.form() {
        f @ PotentialForm::ShiftedAkns { .. } => f,
        _ => PotentialForm::General,
    };
    DiracPotential::new(mat, form)
}

/// `Q + Q*` for an arbitrary symmetric `Q` and its zero mode `v`.
pub fn commute_general(
    q: &DiracPotential,
    v1: &GridFn,
    v2: &GridFn,
    params: &CommutationParams,
) -> Result<DiracPotential> {
    q.grid().ensure_same(&v1.grid())?;
    q.grid().ensure_same(&v2.grid())?;
    let a = params.alpha_star;
    let m = q.mat();
    let len = v1.values().len();
    let (mut e11, mut e12, mut e22) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for j in 0..len {
        let (x, y) = (v1[j], v2[j]);
        let c = -a / params.w[j];
        // v vᵗ J - J v vᵗ = [[-2xy, x² - y²], [x² - y², 2xy]]
        e11[j] = m.e11[j] - 2.0 * c * x * y;
        e12[j] = m.e12[j] + c * (x * x - y * y);
        e22[j] = m.e22[j] + 2.0 * c * x * y;
    }
    let g = q.grid();
    tagged_like(
        q,
        MatrixGridFn::symmetric(GridFn::new(g, e11)?, GridFn::new(g, e12)?, GridFn::new(g, e22)?)?,
    )
}

/// Same as [`commute_general`] for `Q = R (P + theta' I) Rᵀ` given in pencil
/// form; `w` is built from the zero mode `u1` of `P`.
pub fn commute_pencil_form(
    p: &DiracPotential,
    angle: &GaugeAngle,
    alpha0: f64,
    alpha0_tilde: f64,
) -> Result<(DiracPotential, CommutationParams)> {
    let q = gauge::p_to_q(p, angle)?;
    let zm = dirac::zero_mode(p)?;
    let density = zm.u1.map(|u| u * u);
    let params = CommutationParams::new(alpha0, alpha0_tilde, &density)?;
    let lw = params.log_w_prime(&density)?;
    let m = q.mat();
    let len = lw.values().len();
    let (mut e11, mut e12, mut e22) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for j in 0..len {
        let (s2, c2) = (2.0 * angle.theta[j]).sin_cos();
        e11[j] = m.e11[j] - lw[j] * s2;
        e12[j] = m.e12[j] - lw[j] * c2;
        e22[j] = m.e22[j] + lw[j] * s2;
    }
    let g = p.grid();
    let out = tagged_like(
        &q,
        MatrixGridFn::symmetric(GridFn::new(g, e11)?, GridFn::new(g, e12)?, GridFn::new(g, e22)?)?,
    )?;
    Ok((out, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn identity_when_alpha_unchanged() {
        let g = Grid::new(64).unwrap();
        let q =
            DiracPotential::shifted_akns(0.2, &GridFn::from_fn(g, |x| x), &GridFn::from_fn(g, |x| 1.0 - x)).unwrap();
        let (v1, v2) = dirac::dirac_ivp(&q, 0.0).unwrap();
        let density = v1.zip_with(&v2, |a, b| a * a + b * b).unwrap();
        let params = CommutationParams::new(0.7, 0.7, &density).unwrap();
        assert_eq!(params.alpha_star, 0.0);
        assert_eq!(commute_general(&q, &v1, &v2, &params).unwrap(), q);
    }

    #[test]
    fn free_closed_form() {
        let g = Grid::new(128).unwrap();
        let one = GridFn::constant(g, 1.0);
        let z = GridFn::zeros(g);
        let params = CommutationParams::new(1.0, 0.5, &one).unwrap();
        let q = commute_general(&DiracPotential::zero(g), &one, &z, &params).unwrap();
        for (j, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(q.mat().e12[j], -1.0 / (1.0 + x), epsilon = 1e-14);
            assert_eq!(q.mat().e11[j], 0.0);
            assert_eq!(q.mat().e22[j], 0.0);
        }
        assert_eq!(q.form(), PotentialForm::ShiftedAkns { h: 0.0 });
    }

    #[test]
    fn singular_commutation() {
        let g = Grid::new(64).unwrap();
        let one = GridFn::constant(g, 1.0);
        // alpha* = -2: w = 1 - 2x vanishes at x = 1/2
        let res = CommutationParams::new(1.0 / 3.0, 1.0, &one);
        match res {
            Err(Error::SingularCommutation { node, .. }) => assert_eq!(node, 32),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pencil_form_free() {
        let g = Grid::new(64).unwrap();
        let z = GridFn::zeros(g);
        let p = DiracPotential::pencil(&z, &z).unwrap();
        let angle = gauge::solve_theta(&DiracPotential::zero(g)).unwrap();
        let a_star: f64 = 1.5;
        let (q, params) = commute_pencil_form(&p, &angle, 1.0, 1.0 / (1.0 + a_star)).unwrap();
        assert_abs_diff_eq!(params.alpha_star, a_star, epsilon = 1e-15);
        for (j, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(q.mat().e12[j], -a_star / (1.0 + a_star * x), epsilon = 1e-13);
        }
    }

    #[test]
    fn pencil_form_matches_general() {
        let g = Grid::new(256).unwrap();
        let q = DiracPotential::shifted_akns(
            0.3,
            &GridFn::from_fn(g, |x| 0.5 * (PI * x).cos()),
            &GridFn::from_fn(g, |x| 0.2 - 0.4 * x),
        )
        .unwrap();
        let (v1, v2) = dirac::dirac_ivp(&q, 0.0).unwrap();
        let angle = gauge::theta_from_zero_mode(&q, &v1, &v2).unwrap();
        let p = gauge::q_to_p(&q, &angle).unwrap();
        let (a, b) = (1.3, 0.6);
        let (via_pencil, _) = commute_pencil_form(&p, &angle, a, b).unwrap();
        let u1 = dirac::zero_mode(&p).unwrap().u1;
        let w1 = u1.zip_with(&angle.theta, |u, t| u * t.cos()).unwrap();
        let w2 = u1.zip_with(&angle.theta, |u, t| -u * t.sin()).unwrap();
        let params = CommutationParams::new(a, b, &u1.map(|u| u * u)).unwrap();
        let direct = commute_general(&gauge::p_to_q(&p, &angle).unwrap(), &w1, &w2, &params).unwrap();
        let d = via_pencil.mat().l2_distance(direct.mat()).unwrap();
        assert!(d < 1e-10, "{d}");
    }
}
