//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use pencil_core::synth::{self, SynthConfig};
use pencil_core::{Grid, PencilPotentials};

/// Seeded smooth potentials from the default generator.
pub fn corpus(grid: Grid, seeds: std::ops::Range<u64>) -> Vec<(u64, PencilPotentials)> {
    seeds
        .map(|s| {
            (
                s,
                synth::random_pencil(grid, s, &SynthConfig::default()).expect("generator"),
            )
        })
        .collect()
}

/// Pencil eigenvalues of constant `p = c`, `q = 0`: roots of
/// `lambda² - 2 c lambda = (pi n)²` on the branch `sign(lambda - c) = sign(n)`.
pub fn constant_p_lambda(c: f64, n: i64) -> f64 {
    c + (n.signum() as f64) * (c * c + (PI * n as f64).powi(2)).sqrt()
}

/// Norming constants of the same model: `lambda (lambda - c) / (pi n)²`.
pub fn constant_p_alpha(c: f64, n: i64) -> f64 {
    let l = constant_p_lambda(c, n);
    l * (l - c) / (PI * n as f64).powi(2)
}

/// Four-point Lagrange interpolant of node values at `x_j + t h`, using
/// nodes `j-1..=j+2` shifted inward at the ends.
pub fn cubic(v: &[f64], j: usize, t: f64) -> f64 {
    let m = v.len() - 1;
    let base = j.saturating_sub(1).min(m - 3);
    let s = (j - base) as f64 + t;
    (0..4)
        .map(|i| {
            let w: f64 = (0..4)
                .filter(|&k| k != i)
                .map(|k| (s - k as f64) / (i as f64 - k as f64))
                .product();
            w * v[base + i]
        })
        .sum()
}

/// Pencil solution with `y(0) = 0`, `y[1](0) = lambda`, integrated with `k`
/// classical RK4 steps per interval on the quasi-derivative system
/// `y' = y[1] + r y`, `y[1]' = -r y[1] - r² y + (2 lambda p - lambda²) y`.
pub fn pencil_solution(pp: &PencilPotentials, lambda: f64, k: usize) -> Vec<f64> {
    let g = pp.grid();
    let (p, r) = (pp.p().values(), pp.r().values());
    let h = g.step() / k as f64;
    let rhs = |j: usize, t: f64, y: [f64; 2]| {
        let (pv, rv) = (cubic(p, j, t), cubic(r, j, t));
        [
            y[1] + rv * y[0],
            -rv * y[1] - rv * rv * y[0] + (2.0 * lambda * pv - lambda * lambda) * y[0],
        ]
    };
    let add = |a: [f64; 2], c: f64, b: [f64; 2]| [a[0] + c * b[0], a[1] + c * b[1]];
    let mut y = [0.0, lambda];
    let mut out = vec![0.0];
    for j in 0..g.intervals() {
        for s in 0..k {
            let (t0, dt) = (s as f64 / k as f64, 1.0 / k as f64);
            let k1 = rhs(j, t0, y);
            let k2 = rhs(j, t0 + 0.5 * dt, add(y, 0.5 * h, k1));
            let k3 = rhs(j, t0 + 0.5 * dt, add(y, 0.5 * h, k2));
            let k4 = rhs(j, t0 + dt, add(y, h, k3));
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push(y[0]);
    }
    out
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
