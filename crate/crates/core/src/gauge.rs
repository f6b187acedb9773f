//! Rotation gauge `R = exp(theta J)` taking a symmetric potential `Q` to the
//! pencil form `P = Rᵀ Q R - theta' I` with `P11 = 0`, and extraction of the
//! pencil potentials `(p, r)` from `P`.
//!
//! `P11 = 0` is the angle equation `theta' = [Rᵀ Q R]_11`; for
//! `Q = h I + [[q1, q2], [q2, -q1]]` it reads
//! `theta' = h + q1 cos 2theta - q2 sin 2theta`, and
//!
//! ```text
//! P12 = q1 sin 2theta + q2 cos 2theta,    P22 = 2 (h - theta').
//! ```
//!
//! `R` maps solutions of the pencil-form system to solutions for `Q`, so the
//! two operators are isospectral exactly when `theta(1)` is a multiple of `pi`.

use std::f64::consts::PI;

use crate::dirac::{DiracPotential, PotentialForm};
use crate::error::{Error, Result};
use crate::grid::{At, GridFn, MatrixGridFn};
use crate::ode;
use crate::pencil::PencilPotentials;

/// Default bound on `|theta(1) - pi n|`.
pub const DEFAULT_QUANTIZATION_TOL: f64 = 1e-3;
/// Bound on `|P11|` accepted by [`q_to_p`], relative to `1 + max |Q|`.
pub const P11_TOL: f64 = 1e-8;

/// Gauge angle with the derivative it was computed with.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeAngle {
    pub theta: GridFn,
    /// `[Rᵀ Q R]_11` on the nodes, for the `Q` the angle was built from.
    pub theta_prime: GridFn,
    /// Half the mean trace of that `Q`; the shift `h` for shifted-AKNS input.
    pub h: f64,
    pub quantization_n: i64,
    pub quantization_residual: f64,
}

#[inline]
fn angle_rhs(e11: f64, e12: f64, e22: f64, theta: f64) -> f64 {
    let (s2, c2) = (2.0 * theta).sin_cos();
    0.5 * (e11 + e22) + 0.5 * (e11 - e22) * c2 - e12 * s2
}

fn angle_rhs_nodes(q: &DiracPotential, theta: &GridFn) -> GridFn {
    let m = q.mat();
    let values = (0..theta.values().len())
        .map(|j| angle_rhs(m.e11[j], m.e12[j], m.e22[j], theta[j]))
        .collect();
    GridFn::from_samples(theta.grid(), values)
}

fn finish(q: &DiracPotential, theta: GridFn) -> GaugeAngle {
    let theta_prime = angle_rhs_nodes(q, &theta);
    let end = theta[theta.values().len() - 1];
    let n = (end / PI).round();
    let m = q.mat();
    GaugeAngle {
        h: 0.5 * (m.e11.mean() + m.e22.mean()),
        quantization_n: n as i64,
        quantization_residual: (end - PI * n).abs(),
        theta,
        theta_prime,
    }
}

/// Integrates the angle equation from `theta(0) = 0`.
pub fn solve_theta(q: &DiracPotential) -> Result<GaugeAngle> {
    let g = q.grid();
    let m = q.mat();
    let substeps = ode::substeps_for(g, m.max_abs());
    let ys = ode::rk4(g, [0.0], substeps, |at: At, y| {
        [angle_rhs(m.e11.sample(at), m.e12.sample(at), m.e22.sample(at), y[0])]
    })?;
    let theta = GridFn::new(g, ys.into_iter().map(|y| y[0]).collect())?;
    Ok(finish(q, theta))
}

/// Angle read off a zero-energy solution `v` of `J v' + Q v = 0` with
/// `v(0) = (1, 0)`: `v = u1 (cos theta, -sin theta)` with `u1 > 0`.
///
/// This solves the angle equation to the accuracy of `v`, without a second
/// integration.
pub fn theta_from_zero_mode(q: &DiracPotential, v1: &GridFn, v2: &GridFn) -> Result<GaugeAngle> {
    v1.grid().ensure_same(&v2.grid())?;
    q.grid().ensure_same(&v1.grid())?;
    let mut theta = Vec::with_capacity(v1.values().len());
    let mut prev = 0.0;
    for (j, (&a, &b)) in v1.values().iter().zip(v2.values()).enumerate() {
        if a == 0.0 && b == 0.0 {
            return Err(Error::domain(format!("zero solution vanishes at node {j}")));
        }
        let raw = (-b).atan2(a);
        let t = raw + 2.0 * PI * ((prev - raw) / (2.0 * PI)).round();
        theta.push(t);
        prev = t;
    }
    Ok(finish(q, GridFn::new(v1.grid(), theta)?))
}

/// Nearest `n` with `theta(1) ≈ pi n`, if within `tol`.
pub fn check_quantization(angle: &GaugeAngle, tol: f64) -> Result<i64> {
    if !(angle.quantization_residual <= tol) {
        return Err(Error::QuantizationViolation {
            theta_end: angle.theta[angle.theta.values().len() - 1],
            n: angle.quantization_n,
            residual: angle.quantization_residual,
        });
    }
    Ok(angle.quantization_n)
}

/// `P = Rᵀ Q R - theta' I`, tagged pencil-form.
pub fn q_to_p(q: &DiracPotential, angle: &GaugeAngle) -> Result<DiracPotential> {
    q.grid().ensure_same(&angle.theta.grid())?;
    let m = q.mat();
    let len = angle.theta.values().len();
    let (mut e12, mut e22) = (Vec::with_capacity(len), Vec::with_capacity(len));
    let mut max_p11: f64 = 0.0;
    for j in 0..len {
        let (s2, c2) = (2.0 * angle.theta[j]).sin_cos();
        let mean = 0.5 * (m.e11[j] + m.e22[j]);
        let half_diff = 0.5 * (m.e11[j] - m.e22[j]);
        // R^T Q R = mean I + a sigma3 + b sigma1
        let a = half_diff * c2 - m.e12[j] * s2;
        let b = half_diff * s2 + m.e12[j] * c2;
        let tp = angle.theta_prime[j];
        max_p11 = max_p11.max((mean + a - tp).abs());
        e12.push(b);
        e22.push(mean - a - tp);
    }
    if max_p11 > P11_TOL * (1.0 + m.max_abs()) {
        return Err(Error::InconsistentAngle { max_p11 });
    }
    let g = q.grid();
    DiracPotential::new(
        MatrixGridFn::symmetric(GridFn::zeros(g), GridFn::new(g, e12)?, GridFn::new(g, e22)?)?,
        PotentialForm::Pencil,
    )
}

/// Inverse of [`q_to_p`]: `Q = R (P + theta' I) Rᵀ`, tagged shifted-AKNS with
/// the angle's `h`.
pub fn p_to_q(p: &DiracPotential, angle: &GaugeAngle) -> Result<DiracPotential> {
    p.grid().ensure_same(&angle.theta.grid())?;
    let m = p.mat();
    let len = angle.theta.values().len();
    let mut q1 = Vec::with_capacity(len);
    let mut q2 = Vec::with_capacity(len);
    for j in 0..len {
        let (s2, c2) = (2.0 * angle.theta[j]).sin_cos();
        // P + theta' I = mean I + a sigma3 + b sigma1; rotate back by -theta
        let a = 0.5 * (m.e11[j] - m.e22[j]);
        let b = m.e12[j];
        q1.push(a * c2 + b * s2);
        q2.push(-a * s2 + b * c2);
    }
    let g = p.grid();
    DiracPotential::shifted_akns(angle.h, &GridFn::new(g, q1)?, &GridFn::new(g, q2)?)
}

/// `p = P22 / 2` and `r = -P12 + ∫ P12²`, so that `q = -P12' + P12² = r'`.
pub fn extract_pq(p: &DiracPotential) -> Result<PencilPotentials> {
    if p.form() != PotentialForm::Pencil {
        return Err(Error::domain("extraction requires a pencil-form potential"));
    }
    let m = p.mat();
    let pp = m.e22.map(|v| 0.5 * v);
    let sq = m.e12.map(|v| v * v).antiderivative();
    let r = sq.zip_with(&m.e12, |a, b| a - b)?;
    PencilPotentials::new(pp, r)
}
