//! Fixed-step classical Runge-Kutta on a grid.
//!
//! The right-hand side receives an [`At`] position so coefficients stored as
//! [`GridFn`](crate::grid::GridFn) samples can be read with the cubic
//! interpolant. Each grid interval may be split into several substeps.

use crate::error::{Error, Result};
use crate::grid::{At, Grid};

/// Largest phase advance per RK4 substep for oscillatory systems.
pub(crate) const MAX_PHASE_STEP: f64 = 0.05;

/// Number of substeps per interval needed to keep `rate * h` below
/// [`MAX_PHASE_STEP`].
pub(crate) fn substeps_for(grid: Grid, rate: f64) -> usize {
    let r = rate.abs() * grid.step() / MAX_PHASE_STEP;
    if r.is_finite() {
        (r.ceil() as usize).clamp(1, 64)
    } else {
        64
    }
}

/// Integrates `y' = f(at, y)` from `x = 0`, returning the state at every node.
pub(crate) fn rk4<const D: usize, F>(grid: Grid, y0: [f64; D], substeps: usize, mut f: F) -> Result<Vec<[f64; D]>>
where
    F: FnMut(At, &[f64; D]) -> [f64; D],
{
    let k = substeps.max(1);
    let h = grid.step() / k as f64;
    let dt = 1.0 / k as f64;
    let mut out = Vec::with_capacity(grid.len());
    let mut y = y0;
    out.push(y);
    for j in 0..grid.intervals() {
        for s in 0..k {
            let t0 = s as f64 * dt;
            let at0 = At { j, t: t0 };
            let atm = At { j, t: t0 + 0.5 * dt };
            let at1 = At {
                j,
                t: if s + 1 == k { 1.0 } else { t0 + dt },
            };
            let k1 = f(at0, &y);
            let k2 = f(atm, &axpy(&y, 0.5 * h, &k1));
            let k3 = f(atm, &axpy(&y, 0.5 * h, &k2));
            let k4 = f(at1, &axpy(&y, h, &k3));
            for i in 0..D {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                node: j + 1,
                x: grid.node(j + 1),
            });
        }
        out.push(y);
    }
    Ok(out)
}

fn axpy<const D: usize>(y: &[f64; D], a: f64, k: &[f64; D]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        out[i] += a * k[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let g = Grid::new(64).unwrap();
        let ys = rk4(g, [1.0], 1, |_, y| [y[0]]).unwrap();
        assert!((ys[64][0] - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn substeps_improve_accuracy() {
        let g = Grid::new(16).unwrap();
        let err = |k| {
            let ys = rk4(g, [1.0, 0.0], k, |_, y| [-20.0 * y[1], 20.0 * y[0]]).unwrap();
            (ys[16][0] - 20f64.cos()).abs()
        };
        assert!(err(8) < err(2) / 100.0, "{} {}", err(2), err(8));
    }

    #[test]
    fn blow_up_is_reported() {
        let g = Grid::new(16).unwrap();
        let res = rk4(g, [1.0], 1, |_, y| [1e200 * y[0] * y[0]]);
        assert!(matches!(res, Err(Error::IntegrationFailure { .. })));
    }

    #[test]
    fn substep_count() {
        let g = Grid::new(1024).unwrap();
        assert_eq!(substeps_for(g, 0.0), 1);
        assert_eq!(substeps_for(g, 100.0), 2);
        assert_eq!(substeps_for(g, f64::NAN), 64);
    }
}
