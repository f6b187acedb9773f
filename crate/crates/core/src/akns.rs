//! Reconstruction of a shifted-AKNS potential `Q = h I + [[q1, q2], [q2, -q1]]`
//! from augmented spectral data by the Gelfand-Levitan equation
//!
//! ```text
//! K(x, y) + F(x, y) + ∫_0^x K(x, t) F(t, y) dt = 0,   0 <= y <= x,
//! F(x, y) = Σ_n [ phi0(x, mu_n) phi0(y, mu_n)ᵗ / alpha_n - phi0(x, pi n) phi0(y, pi n)ᵗ ],
//! ```
//!
//! with `mu_n = lambda_n - h` and `phi0(x, mu) = (cos mu x, sin mu x)`. The
//! potential is read off the diagonal, `Q - h I = K(x,x) J - J K(x,x)`.
//!
//! Finitely many pairs make `F` a finite sum of products, so `K(x, ·)` lies in
//! the span of the same functions and the equation reduces at each `x` to a
//! small dense system whose matrix entries are exact integrals. This is the
//! default [`GlMethod::Separable`]. [`GlMethod::Nystrom`] discretizes the
//! integral with the trapezoid rule instead; it costs `O(m^4)` and is meant
//! for cross-checks on coarse grids.
//!
//! Treating every pair beyond `N` as free ([`TailModel::Free`]) throws away the
//! `1/n` tails of the data. These tails carry `q1(0)` and
//! `∫|Q - h I|² - (q2(1) - q2(0))`, and losing them leaves an `O(N^-1/2)`
//! boundary layer in `q1`. [`TailModel::Matched`] fits the two tail
//! coefficients,
//!
//! ```text
//! n (mu_n - pi n) -> c_mu,    n (alpha_n - 1) -> c_alpha,
//! ```
//!
//! picks a reference `Q_ref = [[a, b x], [b x, -a]]` with the same
//! coefficients, and solves the equation relative to `Q_ref`: `phi0` becomes
//! the reference solution, the `pi n` terms become reference eigenpairs, and
//! `Q - h I = Q_ref + K(x,x) J - J K(x,x)`. The reference solutions and their
//! Gram integrals are integrated together with RK4.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac::{self, DiracPotential};
use crate::error::{Error, Result};
use crate::grid::{At, Grid, GridFn};
use crate::ode;
use crate::spectral::{AugmentedSpectralData, SpectralPair};

/// Condition estimate above which a node solve is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Discretization of the Gelfand-Levitan equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlMethod {
    #[default]
    Separable,
    Nystrom,
}

/// How pairs beyond the truncation index are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailModel {
    /// Missing pairs are those of the zero potential.
    Free,
    /// Missing pairs are those of a reference potential whose `1/n` tails
    /// match the data.
    #[default]
    Matched,
}

/// One rank-one term `weight * phi0(x, mu) phi0(y, mu)ᵗ` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTerm {
    pub mu: f64,
    pub weight: f64,
}

/// The kernel `F` of the Gelfand-Levitan equation on a grid.
#[derive(Debug, Clone)]
pub struct GlSystem {
    grid: Grid,
    h: f64,
    pairs: usize,
    terms: Vec<KernelTerm>,
}

#[inline]
fn phi0(x: f64, mu: f64) -> [f64; 2] {
    let (s, c) = (mu * x).sin_cos();
    [c, s]
}

/// `∫_0^x cos(d t) dt`.
#[inline]
fn sinc_integral(d: f64, x: f64) -> f64 {
    let dx = d * x;
    if dx.abs() < 1e-4 {
        x * (1.0 - dx * dx / 6.0 * (1.0 - dx * dx / 20.0))
    } else {
        dx.sin() / d
    }
}

/// Builds the kernel, merging terms with identical frequencies.
pub fn build_gl_kernel(aug: &AugmentedSpectralData, grid: Grid) -> GlSystem {
    GlSystem {
        grid,
        h: aug.h(),
        pairs: aug.max_index(),
        terms: kernel_terms(&aug.pairs(), aug.h()),
    }
}

fn kernel_terms(pairs: &[SpectralPair], h: f64) -> Vec<KernelTerm> {
    let mut raw = Vec::new();
    for p in pairs {
        raw.push(KernelTerm {
            mu: p.lambda - h,
            weight: 1.0 / p.alpha,
        });
        raw.push(KernelTerm {
            mu: PI * p.n as f64,
            weight: -1.0,
        });
    }
    merge_terms(raw)
}

fn merge_terms(mut raw: Vec<KernelTerm>) -> Vec<KernelTerm> {
    raw.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let mut terms: Vec<KernelTerm> = Vec::with_capacity(raw.len());
    for t in raw {
        match terms.last_mut() {
            Some(last) if last.mu == t.mu => last.weight += t.weight,
            _ => terms.push(t),
        }
    }
    terms.retain(|t| t.weight != 0.0);
    terms
}

impl GlSystem {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Truncation index `N` of the data.
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    /// `F(x, y)`.
    pub fn omega(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for t in &self.terms {
            let a = phi0(x, t.mu);
            let b = phi0(y, t.mu);
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += t.weight * a[i] * b[j];
                }
            }
        }
        out
    }

    pub fn solve(&self, method: GlMethod) -> Result<GlSolution> {
        match method {
            GlMethod::Separable => self.solve_separable(),
            GlMethod::Nystrom => self.solve_nystrom(),
        }
    }

    /// Per-node coefficients `A_k(x)` of `K(x, y) = Σ_k A_k(x) phi0(y, mu_k)ᵗ`.
    fn separable_node(&self, j: usize) -> Result<(Vec<[f64; 2]>, f64)> {
        let x = self.grid.node(j);
        let m = self.terms.len();
        if m == 0 {
            return Ok((Vec::new(), 1.0));
        }
        let mut mat = DMatrix::<f64>::identity(m, m);
        let mut rhs = DMatrix::<f64>::zeros(m, 2);
        for (k, tk) in self.terms.iter().enumerate() {
            for (l, tl) in self.terms.iter().enumerate() {
                mat[(k, l)] += tk.weight * sinc_integral(tk.mu - tl.mu, x);
            }
            let g = phi0(x, tk.mu);
            rhs[(k, 0)] = -tk.weight * g[0];
            rhs[(k, 1)] = -tk.weight * g[1];
        }
        let (sol, condition) = lu_solve(mat, rhs, j)?;
        Ok(((0..m).map(|k| [sol[(k, 0)], sol[(k, 1)]]).collect(), condition))
    }

    fn solve_separable(&self) -> Result<GlSolution> {
        let nodes: Vec<(Vec<[f64; 2]>, f64)> = (0..self.grid.len())
            .into_par_iter()
            .map(|j| self.separable_node(j))
            .collect::<Result<_>>()?;
        let mut diag = Vec::with_capacity(nodes.len());
        for (j, (coef, _)) in nodes.iter().enumerate() {
            let x = self.grid.node(j);
            let mut k = [[0.0; 2]; 2];
            for (a, t) in coef.iter().zip(&self.terms) {
                let g = phi0(x, t.mu);
                for r in 0..2 {
                    for c in 0..2 {
                        k[r][c] += a[r] * g[c];
                    }
                }
            }
            diag.push(k);
        }
        let condition = nodes.iter().map(|n| n.1).fold(1.0, f64::max);
        let coefficients = nodes.into_iter().map(|n| n.0).collect();
        Ok(GlSolution {
            q: self.potential_from_diagonal(&diag)?,
            condition,
            coefficients: Some(coefficients),
            terms: self.terms.clone(),
        })
    }

    fn nystrom_node(&self, j: usize) -> Result<([[f64; 2]; 2], f64)> {
        let g = self.grid;
        let n = 2 * (j + 1);
        let step = g.step();
        let weight = |l: usize| match (j, l) {
            (0, _) => 0.0,
            (_, 0) => 0.5 * step,
            (_, l) if l == j => 0.5 * step,
            _ => step,
        };
        let mut mat = DMatrix::<f64>::identity(n, n);
        let mut rhs = DMatrix::<f64>::zeros(n, 2);
        let xj = g.node(j);
        for i in 0..=j {
            let xi = g.node(i);
            for l in 0..=j {
                let w = weight(l);
                if w == 0.0 {
                    continue;
                }
                let f = self.omega(g.node(l), xi);
                for b in 0..2 {
                    for c in 0..2 {
                        mat[(2 * i + b, 2 * l + c)] += w * f[c][b];
                    }
                }
            }
            let f = self.omega(xj, xi);
            for a in 0..2 {
                for b in 0..2 {
                    rhs[(2 * i + b, a)] = -f[a][b];
                }
            }
        }
        let (sol, condition) = lu_solve(mat, rhs, j)?;
        let mut k = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                k[a][b] = sol[(2 * j + b, a)];
            }
        }
        Ok((k, condition))
    }

    fn solve_nystrom(&self) -> Result<GlSolution> {
        let nodes: Vec<([[f64; 2]; 2], f64)> = (0..self.grid.len())
            .into_par_iter()
            .map(|j| self.nystrom_node(j))
            .collect::<Result<_>>()?;
        let diag: Vec<_> = nodes.iter().map(|n| n.0).collect();
        Ok(GlSolution {
            q: self.potential_from_diagonal(&diag)?,
            condition: nodes.iter().map(|n| n.1).fold(1.0, f64::max),
            coefficients: None,
            terms: self.terms.clone(),
        })
    }

    fn potential_from_diagonal(&self, diag: &[[[f64; 2]; 2]]) -> Result<DiracPotential> {
        // K J - J K = [[-(K12 + K21), K11 - K22], [K11 - K22, K12 + K21]]
        let q1 = diag.iter().map(|k| -(k[0][1] + k[1][0])).collect();
        let q2 = diag.iter().map(|k| k[0][0] - k[1][1]).collect();
        DiracPotential::shifted_akns(self.h, &GridFn::new(self.grid, q1)?, &GridFn::new(self.grid, q2)?)
    }
}

fn lu_solve(mat: DMatrix<f64>, rhs: DMatrix<f64>, node: usize) -> Result<(DMatrix<f64>, f64)> {
    let lu = mat.lu();
    let u = lu.u();
    let d = u.diagonal().map(f64::abs);
    let condition = d.max() / d.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::ReconstructionFailure { node, condition });
    }
    let sol = lu.solve(&rhs).ok_or(Error::ReconstructionFailure {
        node,
        condition: f64::INFINITY,
    })?;
    Ok((sol, condition))
}

/// Smallest `N` for which tail coefficients are fitted.
pub const MIN_TAIL_PAIRS: usize = 4;

/// Fitted `1/n` tail coefficients and the reference built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub c_mu: f64,
    pub c_alpha: f64,
    /// Constant `q1` of the reference.
    pub q1: f64,
    /// Slope of `q2 = slope * x` in the reference.
    pub q2_slope: f64,
}

/// Least-squares `c` in `y_n ≈ c + d / n` over `n ∈ ns`.
fn tail_constant(ns: &[f64], ys: &[f64]) -> f64 {
    if ns.len() < 2 {
        return ys.iter().sum::<f64>() / ys.len().max(1) as f64;
    }
    let k = ns.len() as f64;
    let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&n, &y) in ns.iter().zip(ys) {
        let x = 1.0 / n;
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    (sxx * sy - sx * sxy) / (k * sxx - sx * sx)
}

/// Fits `c_mu` and `c_alpha` on `N/2 < |n| <= N` and solves for the
/// reference `q1 = a`, `q2 = b x`:
/// `c_alpha = -a / pi`, `2 pi c_mu = a² + b²/3 - b`.
///
/// When no real `b` exists the minimizing `b = 3/2` is used.
pub fn fit_tails(aug: &AugmentedSpectralData) -> Result<TailFit> {
    let n_max = aug.max_index();
    if n_max < MIN_TAIL_PAIRS {
        return Err(Error::domain(format!(
            "tail fit needs N >= {MIN_TAIL_PAIRS}, got {n_max}"
        )));
    }
    let h = aug.h();
    let base = aug.base();
    let mut c = [[0.0; 2]; 2];
    for (s, sign) in [1i64, -1].into_iter().enumerate() {
        let (mut ns, mut ym, mut ya) = (Vec::new(), Vec::new(), Vec::new());
        for k in (n_max / 2 + 1)..=n_max {
            let n = sign * k as i64;
            let p = base
                .get(n)
                .ok_or_else(|| Error::domain(format!("missing pair n = {n}")))?;
            let nf = n as f64;
            ns.push(nf);
            ym.push(nf * (p.lambda - h - PI * nf));
            ya.push(nf * (p.alpha - 1.0));
        }
        c[0][s] = tail_constant(&ns, &ym);
        c[1][s] = tail_constant(&ns, &ya);
    }
    let c_mu = 0.5 * (c[0][0] + c[0][1]);
    let c_alpha = 0.5 * (c[1][0] + c[1][1]);
    let a = -PI * c_alpha;
    let disc = 1.0 - 4.0 / 3.0 * (a * a - 2.0 * PI * c_mu);
    let q2_slope = if disc >= 0.0 {
        1.5 * (1.0 - disc.sqrt())
    } else {
        log::warn!("tail coefficient c_mu = {c_mu:e} is below the reference family; using b = 3/2");
        1.5
    };
    Ok(TailFit {
        c_mu,
        c_alpha,
        q1: a,
        q2_slope,
    })
}

impl TailFit {
    /// The traceless reference `[[a, b x], [b x, -a]]`.
    pub fn reference(&self, grid: Grid) -> Result<DiracPotential> {
        let b = self.q2_slope;
        DiracPotential::shifted_akns(0.0, &GridFn::constant(grid, self.q1), &GridFn::from_fn(grid, |x| b * x))
    }
}

type NodeSolve = ([[f64; 2]; 2], f64);

/// Nodes whose Gram matrices are held in memory at once.
const REFERENCE_CHUNK: usize = 32;

/// Solves the Gelfand-Levitan equation relative to a traceless `reference`
/// whose eigenpairs stand in for the missing data.
pub fn solve_with_reference(aug: &AugmentedSpectralData, reference: &DiracPotential) -> Result<GlSolution> {
    if reference.shift() != Some(0.0) {
        return Err(Error::domain("the reference must be a traceless AKNS potential"));
    }
    let grid = reference.grid();
    let h = aug.h();
    let eig = dirac::dirac_spectral_data(reference, aug.max_index())?;
    let mut raw: Vec<KernelTerm> = aug
        .pairs()
        .iter()
        .map(|p| KernelTerm {
            mu: p.lambda - h,
            weight: 1.0 / p.alpha,
        })
        .collect();
    raw.extend(eig.iter().map(|e| KernelTerm {
        mu: e.lambda,
        weight: -1.0 / e.alpha,
    }));
    let terms = merge_terms(raw);
    let m = terms.len();
    let (r1, r2) = reference.akns_parts();
    let diag: Vec<[[f64; 2]; 2]>;
    let mut condition: f64 = 1.0;
    if m == 0 {
        diag = vec![[[0.0; 2]; 2]; grid.len()];
    } else {
        let rate = terms.iter().map(|t| t.mu.abs()).fold(0.0, f64::max) + reference.mat().max_abs();
        let (nodes, cond) = reference_nodes(grid, &terms, &r1, &r2, ode::substeps_for(grid, rate))?;
        diag = nodes;
        condition = cond;
    }
    let q1: Vec<f64> = diag
        .iter()
        .zip(r1.values())
        .map(|(k, r)| r - (k[0][1] + k[1][0]))
        .collect();
    let q2: Vec<f64> = diag
        .iter()
        .zip(r2.values())
        .map(|(k, r)| r + k[0][0] - k[1][1])
        .collect();
    Ok(GlSolution {
        q: DiracPotential::shifted_akns(h, &GridFn::new(grid, q1)?, &GridFn::new(grid, q2)?)?,
        condition,
        coefficients: None,
        terms,
    })
}

/// State of the joint integration: reference solutions `u_k` followed by the
/// packed upper triangle of `G_kl = ∫_0^x u_kᵗ u_l`.
fn reference_rhs(terms: &[KernelTerm], q1: f64, q2: f64, y: &[f64], dy: &mut [f64]) {
    let m = terms.len();
    let (u, g) = y.split_at(2 * m);
    let (du, dg) = dy.split_at_mut(2 * m);
    for (k, t) in terms.iter().enumerate() {
        let (a, b) = (u[2 * k], u[2 * k + 1]);
        // J u' = (mu - Q) u
        let w1 = (t.mu - q1) * a - q2 * b;
        let w2 = -q2 * a + (t.mu + q1) * b;
        du[2 * k] = -w2;
        du[2 * k + 1] = w1;
    }
    let mut i = 0;
    for k in 0..m {
        let (a, b) = (u[2 * k], u[2 * k + 1]);
        for l in k..m {
            dg[i] = a * u[2 * l] + b * u[2 * l + 1];
            i += 1;
        }
    }
    debug_assert_eq!(i, g.len());
}

fn reference_nodes(
    grid: Grid,
    terms: &[KernelTerm],
    r1: &GridFn,
    r2: &GridFn,
    substeps: usize,
) -> Result<(Vec<[[f64; 2]; 2]>, f64)> {
    let m = terms.len();
    let dim = 2 * m + m * (m + 1) / 2;
    let mut y = vec![0.0; dim];
    for k in 0..m {
        y[2 * k] = 1.0;
    }
    let node_solve = |j: usize, y: &[f64]| -> Result<NodeSolve> {
        let (u, g) = y.split_at(2 * m);
        let mut mat = DMatrix::<f64>::identity(m, m);
        let mut rhs = DMatrix::<f64>::zeros(m, 2);
        let mut i = 0;
        for k in 0..m {
            for l in k..m {
                mat[(k, l)] += terms[k].weight * g[i];
                if l != k {
                    mat[(l, k)] += terms[l].weight * g[i];
                }
                i += 1;
            }
            rhs[(k, 0)] = -terms[k].weight * u[2 * k];
            rhs[(k, 1)] = -terms[k].weight * u[2 * k + 1];
        }
        let (sol, condition) = lu_solve(mat, rhs, j)?;
        let mut kk = [[0.0; 2]; 2];
        for k in 0..m {
            for r in 0..2 {
                for c in 0..2 {
                    kk[r][c] += sol[(k, r)] * u[2 * k + c];
                }
            }
        }
        Ok((kk, condition))
    };

    let k = substeps.max(1);
    let step = grid.step() / k as f64;
    let dt = 1.0 / k as f64;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let f = |at: At, y: &[f64], dy: &mut [f64]| reference_rhs(terms, r1.sample(at), r2.sample(at), y, dy);

    let mut out = Vec::with_capacity(grid.len());
    let mut condition: f64 = 1.0;
    let mut chunk: Vec<(usize, Vec<f64>)> = vec![(0, y.clone())];
    let flush = |chunk: &mut Vec<(usize, Vec<f64>)>, out: &mut Vec<[[f64; 2]; 2]>| -> Result<f64> {
        let solved: Vec<NodeSolve> = chunk
            .par_iter()
            .map(|(j, y)| node_solve(*j, y))
            .collect::<Result<_>>()?;
        chunk.clear();
        let mut c: f64 = 1.0;
        for (kk, cond) in solved {
            out.push(kk);
            c = c.max(cond);
        }
        Ok(c)
    };
    for j in 0..grid.intervals() {
        for s in 0..k {
            let t0 = s as f64 * dt;
            let at0 = At { j, t: t0 };
            let atm = At { j, t: t0 + 0.5 * dt };
            let at1 = At {
                j,
                t: if s + 1 == k { 1.0 } else { t0 + dt },
            };
            f(at0, &y, &mut k1);
            axpy_into(&mut tmp, &y, 0.5 * step, &k1);
            f(atm, &tmp, &mut k2);
            axpy_into(&mut tmp, &y, 0.5 * step, &k2);
            f(atm, &tmp, &mut k3);
            axpy_into(&mut tmp, &y, step, &k3);
            f(at1, &tmp, &mut k4);
            for i in 0..dim {
                y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                node: j + 1,
                x: grid.node(j + 1),
            });
        }
        chunk.push((j + 1, y.clone()));
        if chunk.len() == REFERENCE_CHUNK {
            condition = condition.max(flush(&mut chunk, &mut out)?);
        }
    }
    if !chunk.is_empty() {
        condition = condition.max(flush(&mut chunk, &mut out)?);
    }
    Ok((out, condition))
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, &yi), &ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

/// Output of a Gelfand-Levitan solve.
#[derive(Debug, Clone)]
pub struct GlSolution {
    pub q: DiracPotential,
    /// Largest per-node condition estimate.
    pub condition: f64,
    coefficients: Option<Vec<Vec<[f64; 2]>>>,
    terms: Vec<KernelTerm>,
}

impl GlSolution {
    /// Solution of `J u' + Q u = lambda u`, `u(0) = (1, 0)`, from the
    /// transformation kernel:
    /// `u(x) = phi0(x, mu) + ∫_0^x K(x, t) phi0(t, mu) dt`, `mu = lambda - h`.
    ///
    /// Falls back to integrating the system when the kernel is not available.
    pub fn solution_at(&self, lambda: f64) -> Result<(GridFn, GridFn)> {
        let Some(coef) = &self.coefficients else {
            return dirac::dirac_ivp(&self.q, lambda);
        };
        let g = self.q.grid();
        let h = self.q.shift().unwrap_or(0.0);
        let mu = lambda - h;
        let (u1, u2) = coef
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let x = g.node(j);
                let mut u = phi0(x, mu);
                for (ak, t) in a.iter().zip(&self.terms) {
                    let s = sinc_integral(t.mu - mu, x);
                    u[0] += ak[0] * s;
                    u[1] += ak[1] * s;
                }
                (u[0], u[1])
            })
            .unzip();
        Ok((GridFn::new(g, u1)?, GridFn::new(g, u2)?))
    }

    /// The zero-energy solution, an eigenfunction when the data contain
    /// `(0, 0, alpha0)`.
    pub fn zero_mode(&self) -> Result<(GridFn, GridFn)> {
        self.solution_at(0.0)
    }
}

/// Reconstructs `Q` with the default method.
pub fn solve_gl(aug: &AugmentedSpectralData, grid: Grid) -> Result<DiracPotential> {
    Ok(build_gl_kernel(aug, grid).solve(GlMethod::Separable)?.q)
}

/// Solves with the given tail model. The fitted tail is returned for
/// [`TailModel::Matched`]; with fewer than [`MIN_TAIL_PAIRS`] pairs, or a
/// fit that yields the zero reference, the free solve is used.
pub fn solve_with_tail(
    aug: &AugmentedSpectralData,
    grid: Grid,
    tail: TailModel,
    method: GlMethod,
) -> Result<(GlSolution, Option<TailFit>)> {
    if tail == TailModel::Free || aug.max_index() < MIN_TAIL_PAIRS {
        return Ok((build_gl_kernel(aug, grid).solve(method)?, None));
    }
    if method != GlMethod::Separable {
        return Err(Error::domain(
            "the matched tail model supports only the separable solver",
        ));
    }
    let fit = fit_tails(aug)?;
    log::debug!("tail fit {fit:?}");
    if fit.q1 == 0.0 && fit.q2_slope == 0.0 {
        return Ok((build_gl_kernel(aug, grid).solve(method)?, Some(fit)));
    }
    Ok((solve_with_reference(aug, &fit.reference(grid)?)?, Some(fit)))
}

/// Largest eigenvalue and norming-constant mismatch between `sd(Q)` and the
/// data it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub max_dlambda: f64,
    pub max_dalpha: f64,
}

/// Compares the spectral data of `q` with `aug`, index by index.
pub fn spectral_mismatch(q: &DiracPotential, aug: &AugmentedSpectralData) -> Result<ContractReport> {
    let eig = dirac::dirac_spectral_data(q, aug.max_index())?;
    let mut rep = ContractReport {
        max_dlambda: 0.0,
        max_dalpha: 0.0,
    };
    for (e, p) in eig.iter().zip(aug.pairs()) {
        rep.max_dlambda = rep.max_dlambda.max((e.lambda - p.lambda).abs());
        rep.max_dalpha = rep.max_dalpha.max((e.alpha - p.alpha).abs());
    }
    Ok(rep)
}

/// [`spectral_mismatch`] turned into an error when a tolerance is exceeded.
pub fn check_contract(
    q: &DiracPotential,
    aug: &AugmentedSpectralData,
    tol_lambda: f64,
    tol_alpha: f64,
) -> Result<ContractReport> {
    let rep = spectral_mismatch(q, aug)?;
    if rep.max_dlambda > tol_lambda || rep.max_dalpha > tol_alpha {
        return Err(Error::Convention {
            max_dlambda: rep.max_dlambda,
            max_dalpha: rep.max_dalpha,
        });
    }
    Ok(rep)
}

const REFINE_ITERATIONS: usize = 8;
/// Residual cost treated as converged.
const REFINE_CONVERGED: f64 = 1e-24;
const FD_STEP: f64 = 1e-6;

fn basis(grid: Grid, size: usize) -> Vec<GridFn> {
    let mut out: Vec<GridFn> = (0..size)
        .map(|k| GridFn::from_fn(grid, move |x| (PI * k as f64 * x).cos()))
        .collect();
    out.extend((1..size).map(|k| GridFn::from_fn(grid, move |x| (PI * k as f64 * x).sin())));
    out
}

fn residuals(q: &DiracPotential, aug: &AugmentedSpectralData) -> Option<Vec<f64>> {
    let eig = dirac::dirac_spectral_data(q, aug.max_index()).ok()?;
    let mut out = Vec::with_capacity(2 * eig.len());
    for (e, p) in eig.iter().zip(aug.pairs()) {
        out.push(e.lambda - p.lambda);
        out.push(e.alpha - p.alpha);
    }
    Some(out)
}

fn perturbed(q: &DiracPotential, basis: &[GridFn], coef: &[f64]) -> DiracPotential {
    let h = q.shift().unwrap_or(0.0);
    let (mut q1, mut q2) = q.akns_parts();
    let nb = basis.len();
    for (i, b) in basis.iter().enumerate() {
        if coef[i] != 0.0 {
            q1 = q1.zip_with(b, |u, v| u + coef[i] * v).expect("same grid");
        }
        if coef[nb + i] != 0.0 {
            q2 = q2.zip_with(b, |u, v| u + coef[nb + i] * v).expect("same grid");
        }
    }
    DiracPotential::shifted_akns(h, &q1, &q2).expect("same grid")
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Gauss-Newton polish of `(q1, q2)` in a truncated cosine/sine basis,
/// minimizing `Σ_n (lambda_n(Q) - lambda_n)² + (alpha_n(Q) - alpha_n)²`.
///
/// `basis_size` cosines `cos(pi k x)`, `k < basis_size`, and sines
/// `sin(pi k x)`, `1 <= k < basis_size`, are used for each of `q1`, `q2`.
/// Returns the input unchanged if no step decreases the residual.
pub fn refine(q: &DiracPotential, aug: &AugmentedSpectralData, basis_size: usize) -> Result<DiracPotential> {
    if basis_size == 0 {
        return Ok(q.clone());
    }
    if q.shift().is_none() {
        return Err(Error::domain("refinement needs a shifted-AKNS potential"));
    }
    let b = basis(q.grid(), basis_size);
    let np = 2 * b.len();
    let Some(mut r) = residuals(q, aug) else {
        log::warn!("refinement skipped: spectral data of the input could not be computed");
        return Ok(q.clone());
    };
    let mut current = q.clone();
    let mut c = cost(&r);
    let start = c;
    for _ in 0..REFINE_ITERATIONS {
        if c <= REFINE_CONVERGED {
            break;
        }
        let cols: Vec<Option<Vec<f64>>> = (0..np)
            .into_par_iter()
            .map(|i| {
                let mut e = vec![0.0; np];
                e[i] = FD_STEP;
                residuals(&perturbed(&current, &b, &e), aug)
                    .map(|rp| rp.iter().zip(&r).map(|(a, b)| (a - b) / FD_STEP).collect())
            })
            .collect();
        let Some(cols) = cols.into_iter().collect::<Option<Vec<_>>>() else {
            break;
        };
        let jac = DMatrix::from_fn(r.len(), np, |i, j| cols[j][i]);
        let rv = DVector::from_column_slice(&r);
        let Some(step) = jac.clone().svd(true, true).solve(&(-rv), 1e-12).ok() else {
            break;
        };
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..6 {
            let coef: Vec<f64> = step.iter().map(|s| t * s).collect();
            let cand = perturbed(&current, &b, &coef);
            if let Some(rc) = residuals(&cand, aug) {
                let cc = cost(&rc);
                if cc < c {
                    current = cand;
                    r = rc;
                    c = cc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if c >= start {
        if start > REFINE_CONVERGED {
            log::warn!("refinement did not decrease the spectral residual; input returned");
        }
        return Ok(q.clone());
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralData;
    use approx::assert_abs_diff_eq;

    fn free_aug(n: usize, alpha0: f64) -> AugmentedSpectralData {
        AugmentedSpectralData::from_parts(SpectralData::free(n), alpha0, 0.0).unwrap()
    }

    #[test]
    fn free_kernel_vanishes() {
        let g = Grid::new(32).unwrap();
        let sys = build_gl_kernel(&free_aug(8, 1.0), g);
        assert!(sys.terms().is_empty());
        assert_eq!(sys.omega(0.3, 0.7), [[0.0; 2]; 2]);
        let q = solve_gl(&free_aug(8, 1.0), g).unwrap();
        assert_eq!(q.mat().max_abs(), 0.0);
    }

    #[test]
    fn shifted_free_kernel_vanishes() {
        let g = Grid::new(32).unwrap();
        let h = 0.3;
        let sd = SpectralData::from_fn(6, |n| (PI * n as f64 + h, 1.0)).unwrap();
        let aug = AugmentedSpectralData::from_parts(sd, 1.0, h).unwrap();
        // (0, 0, alpha0) is not an eigenvalue here; drop it by hand
        let sys = build_gl_kernel(&aug, g);
        assert_eq!(sys.terms().len(), 2);
        let without_zero = GlSystem { terms: vec![], ..sys };
        let sol = without_zero.solve(GlMethod::Separable).unwrap();
        assert!(sol.q.mat().e11.values().iter().all(|&v| v == h));
    }

    #[test]
    fn single_term_kernel() {
        let g = Grid::new(32).unwrap();
        let sys = build_gl_kernel(&free_aug(4, 0.5), g);
        assert_eq!(sys.terms(), &[KernelTerm { mu: 0.0, weight: 1.0 }]);
        let w = sys.omega(0.2, 0.9);
        assert_eq!(w, [[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn free_with_half_alpha0() {
        let g = Grid::new(256).unwrap();
        let sol = build_gl_kernel(&free_aug(8, 0.5), g)
            .solve(GlMethod::Separable)
            .unwrap();
        let (q1, q2) = sol.q.akns_parts();
        for (j, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(q1[j], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(q2[j], -1.0 / (1.0 + x), epsilon = 1e-14);
        }
        let (v1, v2) = sol.zero_mode().unwrap();
        for (j, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(v1[j], 1.0 / (1.0 + x), epsilon = 1e-14);
            assert_abs_diff_eq!(v2[j], 0.0, epsilon = 1e-14);
        }
        let rep = spectral_mismatch(&sol.q, &free_aug(8, 0.5)).unwrap();
        assert!(rep.max_dlambda < 1e-8 && rep.max_dalpha < 1e-5, "{rep:?}");
    }

    #[test]
    fn nystrom_agrees_with_separable() {
        let g = Grid::new(32).unwrap();
        let sd = SpectralData::constant_p(0.5, 3);
        let aug = AugmentedSpectralData::from_parts(sd, 0.8, 0.5).unwrap();
        let sys = build_gl_kernel(&aug, g);
        let a = sys.solve(GlMethod::Separable).unwrap().q;
        let b = sys.solve(GlMethod::Nystrom).unwrap().q;
        let d = a.mat().l2_distance(b.mat()).unwrap();
        assert!(d < 2e-2 * a.mat().l2_norm(), "{d}");
        let g2 = Grid::new(64).unwrap();
        let sys2 = build_gl_kernel(&aug, g2);
        let b2 = sys2.solve(GlMethod::Nystrom).unwrap().q;
        let a2 = sys2.solve(GlMethod::Separable).unwrap().q;
        let d2 = a2.mat().l2_distance(b2.mat()).unwrap();
        assert!(d2 < d / 2.0, "{d} {d2}");
    }

    #[test]
    fn shift_equivariance() {
        let g = Grid::new(64).unwrap();
        let aug = AugmentedSpectralData::from_parts(SpectralData::constant_p(0.5, 4), 0.9, 0.5).unwrap();
        let delta = 0.37;
        let moved: Vec<SpectralPair> = aug
            .pairs()
            .iter()
            .map(|p| SpectralPair {
                lambda: p.lambda + delta,
                ..*p
            })
            .collect();
        let a = solve_gl(&aug, g).unwrap();
        let sys = GlSystem {
            grid: g,
            h: aug.h() + delta,
            pairs: 4,
            terms: kernel_terms(&moved, aug.h() + delta),
        };
        let b = sys.solve(GlMethod::Separable).unwrap().q;
        let (pa, pb) = (a.mat(), b.mat());
        for j in 0..g.len() {
            assert_abs_diff_eq!(pb.e11[j], pa.e11[j] + delta, epsilon = 1e-8);
            assert_abs_diff_eq!(pb.e22[j], pa.e22[j] + delta, epsilon = 1e-8);
            assert_abs_diff_eq!(pb.e12[j], pa.e12[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn tail_fit_constant_p() {
        // lambda_n = c + sign(n) sqrt(c² + pi² n²) gives
        // n (mu_n - pi n) -> c² / (2 pi) and n (alpha_n - 1) -> c / pi
        let c = 0.5;
        let aug = AugmentedSpectralData::from_parts(SpectralData::constant_p(c, 32), 1.0, c).unwrap();
        let fit = fit_tails(&aug).unwrap();
        assert_abs_diff_eq!(fit.c_mu, c * c / (2.0 * PI), epsilon = 1e-4);
        assert_abs_diff_eq!(fit.c_alpha, c / PI, epsilon = 1e-4);
        assert_abs_diff_eq!(fit.q1, -c, epsilon = 1e-3);
        assert!(fit.q2_slope.abs() < 1e-3, "{fit:?}");
        assert!(fit_tails(&free_aug(3, 1.0)).is_err());
        let free = fit_tails(&free_aug(8, 1.0)).unwrap();
        assert_eq!((free.q1, free.q2_slope), (0.0, 0.0));
    }

    /// Spectral data of `h I + Q0` with `h` chosen so that `lambda_0 = 0`.
    fn akns_data(q0: &DiracPotential, n: usize) -> AugmentedSpectralData {
        let eig = dirac::dirac_spectral_data(q0, n).unwrap();
        let h = -eig[n].lambda;
        let alpha0 = eig[n].alpha;
        let shifted: Vec<_> = eig
            .iter()
            .filter(|e| e.n != 0)
            .map(|e| SpectralPair {
                n: e.n,
                lambda: e.lambda + h,
                alpha: e.alpha,
            })
            .collect();
        AugmentedSpectralData::from_parts(SpectralData::new(shifted, None).unwrap(), alpha0, h).unwrap()
    }

    fn smooth_akns(g: Grid) -> DiracPotential {
        DiracPotential::shifted_akns(
            0.0,
            &GridFn::from_fn(g, |x| 0.4 + 0.3 * x + 0.2 * (3.0 * x).sin()),
            &GridFn::from_fn(g, |x| -0.3 + 0.5 * x * x),
        )
        .unwrap()
    }

    #[test]
    fn exact_reference_reproduces_potential() {
        let g = Grid::new(512).unwrap();
        let q0 = smooth_akns(g);
        let aug = akns_data(&q0, 16);
        let sol = solve_with_reference(&aug, &q0).unwrap();
        let d = sol.q.shifted_by(-aug.h()).mat().l2_distance(q0.mat()).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn matched_tail_beats_free_tail() {
        let g = Grid::new(512).unwrap();
        let q0 = smooth_akns(g);
        let aug = akns_data(&q0, 32);
        let err = |tail| {
            let (sol, _) = solve_with_tail(&aug, g, tail, GlMethod::Separable).unwrap();
            sol.q.shifted_by(-aug.h()).mat().l2_distance(q0.mat()).unwrap()
        };
        let (free, matched) = (err(TailModel::Free), err(TailModel::Matched));
        assert!(free > 2e-2, "{free}");
        assert!(matched < 2e-3, "{matched}");
        assert!(solve_with_tail(&aug, g, TailModel::Matched, GlMethod::Nystrom).is_err());
    }

    #[test]
    fn refine_identity_cases() {
        let g = Grid::new(64).unwrap();
        let aug = free_aug(3, 1.0);
        let q = DiracPotential::zero(g);
        assert_eq!(refine(&q, &aug, 0).unwrap(), q);
        assert_eq!(refine(&q, &aug, 2).unwrap(), q);
    }

    #[test]
    fn refine_reduces_residual() {
        let g = Grid::new(128).unwrap();
        let aug = free_aug(4, 1.0);
        let z = GridFn::zeros(g);
        let q1 = GridFn::from_fn(g, |x| 1e-2 * (2.0 * PI * x).cos());
        let q = DiracPotential::shifted_akns(0.0, &q1, &z).unwrap();
        let before = cost(&residuals(&q, &aug).unwrap());
        let refined = refine(&q, &aug, 3).unwrap();
        let after = cost(&residuals(&refined, &aug).unwrap());
        assert!(after < before / 10.0, "{before} {after}");
    }
}
