//! End-to-end forward and inverse maps between pencil potentials and
//! spectral data, and the `alpha0`-independence check.
//!
//! Inverse steps: validate and augment the data, solve the Gelfand-Levitan
//! equation for `Q`, optionally refine, read the gauge angle off the zero mode
//! of `Q`, check `theta(1) ∈ pi Z`, rotate to pencil form and extract `(p, r)`.

use serde::{Deserialize, Serialize};

use crate::akns::{self, ContractReport, GlMethod, TailFit, TailModel};
use crate::dirac::{self, DiracPotential};
use crate::error::{Error, Result};
use crate::gauge::{self, GaugeAngle};
use crate::grid::{Grid, GridFn, DEFAULT_INTERVALS};
use crate::pencil::{self, MiuraField, PencilPotentials};
use crate::spectral::{self, AugmentedSpectralData, SpectralData, ValidationReport, ValidationTolerances};

/// Parameters of the forward and inverse pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Grid intervals.
    pub m: usize,
    /// Number of index pairs `±1..±N`.
    pub pairs: usize,
    pub alpha0: f64,
    pub tol_lambda: f64,
    pub tol_alpha: f64,
    pub tol_quant: f64,
    /// Bound on the two `L2` norms compared by the independence check.
    pub tol_independence: f64,
    pub refine: bool,
    pub refine_basis: usize,
    pub seed: u64,
    /// Shift to commit instead of estimating one from the data.
    pub shift: Option<f64>,
    pub method: GlMethod,
    pub tail: TailModel,
    pub validation: ValidationTolerances,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            m: DEFAULT_INTERVALS,
            pairs: 32,
            alpha0: 1.0,
            tol_lambda: 1e-4,
            tol_alpha: 1e-3,
            tol_quant: gauge::DEFAULT_QUANTIZATION_TOL,
            tol_independence: 1e-3,
            refine: false,
            refine_basis: 3,
            seed: 0,
            shift: None,
            method: GlMethod::Separable,
            tail: TailModel::Matched,
            validation: ValidationTolerances::default(),
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<Grid> {
        if self.pairs < 2 {
            return Err(Error::domain(format!("need N >= 2 pairs, got {}", self.pairs)));
        }
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return Err(Error::domain(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        Grid::new(self.m)
    }
}

/// Output of [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardResult {
    /// Pencil pairs `n = ±1..±N` plus the Dirac zero mode.
    pub data: SpectralData,
    pub miura: MiuraField,
    pub dirac: DiracPotential,
}

/// Spectral data of the pencil `(p, r)` through its pencil-form Dirac operator.
pub fn forward(pp: &PencilPotentials, pairs: usize) -> Result<ForwardResult> {
    let miura = pencil::miura_field(pp.r())?;
    let dirac = pencil::assemble_pencil_dirac(pp.p(), &miura)?;
    let eig = dirac::dirac_spectral_data(&dirac, pairs)?;
    Ok(ForwardResult {
        data: SpectralData::from_eigenpairs(&eig)?,
        miura,
        dirac,
    })
}

/// Diagnostics of one inverse run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub h: f64,
    pub alpha0: f64,
    pub validation: ValidationReport,
    pub gl_condition: f64,
    pub tail: Option<TailFit>,
    pub refined: bool,
    /// Mismatch between `sd(Q)` and the augmented data.
    pub contract: ContractReport,
    pub theta_end: f64,
    pub quantization_n: i64,
    pub quantization_residual: f64,
    /// Mismatch between the forward data of the result and the input.
    pub round_trip: Option<ContractReport>,
}

/// Output of [`inverse`].
#[derive(Debug, Clone)]
pub struct InverseResult {
    pub potentials: PencilPotentials,
    pub aug: AugmentedSpectralData,
    pub q: DiracPotential,
    pub pencil_form: DiracPotential,
    pub angle: GaugeAngle,
    pub report: InverseReport,
}

/// Reconstructs `(p, r)` from pencil spectral data.
///
/// The round-trip mismatch in the report needs a forward solve of the result
/// and is only computed when `round_trip` is set.
pub fn inverse(sd: &SpectralData, cfg: &PipelineConfig, round_trip: bool) -> Result<InverseResult> {
    let grid = cfg.check()?;
    let validation = spectral::validate(sd, &cfg.validation);
    let aug = spectral::augment(sd, cfg.alpha0, cfg.shift, &cfg.validation)?;
    let (sol, tail) = akns::solve_with_tail(&aug, grid, cfg.tail, cfg.method)?;
    log::debug!("GL solve: condition estimate {:e}", sol.condition);

    let (q, (v1, v2)) = if cfg.refine {
        let q = akns::refine(&sol.q, &aug, cfg.refine_basis)?;
        let v = dirac::dirac_ivp(&q, 0.0)?;
        (q, v)
    } else {
        let v = sol.zero_mode()?;
        (sol.q.clone(), v)
    };
    let contract = akns::check_contract(&q, &aug, cfg.tol_lambda, cfg.tol_alpha)?;

    let angle = gauge::theta_from_zero_mode(&q, &v1, &v2)?;
    gauge::check_quantization(&angle, cfg.tol_quant)?;
    let pencil_form = gauge::q_to_p(&q, &angle)?;
    let potentials = gauge::extract_pq(&pencil_form)?;

    let round_trip = if round_trip {
        Some(data_mismatch(&forward(&potentials, sd.max_index())?.data, sd))
    } else {
        None
    };
    let theta = angle.theta.values();
    let report = InverseReport {
        h: aug.h(),
        alpha0: aug.alpha0(),
        validation,
        gl_condition: sol.condition,
        tail,
        refined: cfg.refine,
        contract,
        theta_end: theta[theta.len() - 1],
        quantization_n: angle.quantization_n,
        quantization_residual: angle.quantization_residual,
        round_trip,
    };
    Ok(InverseResult {
        potentials,
        aug,
        q,
        pencil_form,
        angle,
        report,
    })
}

/// Largest differences of matching pencil pairs.
pub fn data_mismatch(a: &SpectralData, b: &SpectralData) -> ContractReport {
    let mut rep = ContractReport {
        max_dlambda: 0.0,
        max_dalpha: 0.0,
    };
    for (x, y) in a.pairs().iter().zip(b.pairs()) {
        rep.max_dlambda = rep.max_dlambda.max((x.lambda - y.lambda).abs());
        rep.max_dalpha = rep.max_dalpha.max((x.alpha - y.alpha).abs());
    }
    rep
}

/// Relative `L2` error of `p` and of mean-centered `r`.
pub fn potential_errors(got: &PencilPotentials, want: &PencilPotentials) -> Result<(f64, f64)> {
    let ep = got.p().l2_distance(want.p())? / want.p().l2_norm();
    let er = got.r().centered().l2_distance(&want.r().centered())? / want.r().centered().l2_norm();
    Ok((ep, er))
}

/// Result of [`verify_alpha0_independence`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub alpha0_a: f64,
    pub alpha0_b: f64,
    /// `||p_a - p_b||`.
    pub dp: f64,
    /// `||(r_a - mean) - (r_b - mean)||`.
    pub dr: f64,
    /// `max |P22_b - P22_a|`.
    pub p22_gap: f64,
    /// `max |P12_b - P12_a + (log w)'|`.
    pub p12_gap: f64,
    /// `max |theta_b - theta_a|`.
    pub theta_gap: f64,
    /// `|theta(1) - pi n|` of the two runs.
    pub quantization_residuals: [f64; 2],
    pub tol: f64,
    pub norms_ok: bool,
    pub p22_ok: bool,
    pub p12_ok: bool,
    pub theta_ok: bool,
    pub potentials_a: PencilPotentials,
    pub potentials_b: PencilPotentials,
}

/// Bound on `max |P22_b - P22_a|` and `max |theta_b - theta_a|`.
pub const P22_IDENTITY_TOL: f64 = 1e-8;
/// Bound on `max |P12_b - P12_a + (log w)'|`.
pub const P12_IDENTITY_TOL: f64 = 1e-6;

impl IndependenceReport {
    pub fn passed(&self) -> bool {
        self.norms_ok && self.p22_ok && self.p12_ok && self.theta_ok
    }

    /// Errors with an independence violation unless every check passed.
    pub fn ensure(&self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::IndependenceViolation {
                dp: self.dp,
                dr: self.dr,
            })
        }
    }
}

fn max_gap(a: &GridFn, b: &GridFn) -> Result<f64> {
    Ok(a.zip_with(b, |x, y| x - y)?.max_abs())
}

/// Runs the inverse pipeline with `alpha0 = a` and `alpha0 = b` and compares
/// the results, including the pencil-form identities `P22_b = P22_a` and
/// `P12_b = P12_a - (log w)'`.
pub fn verify_alpha0_independence(
    sd: &SpectralData,
    alpha0_a: f64,
    alpha0_b: f64,
    cfg: &PipelineConfig,
) -> Result<IndependenceReport> {
    let run = |alpha0| {
        let c = PipelineConfig { alpha0, ..cfg.clone() };
        inverse(sd, &c, false)
    };
    let (ra, rb) = rayon::join(|| run(alpha0_a), || run(alpha0_b));
    let (ra, rb) = (ra?, rb?);

    let (pa, pb) = (&ra.potentials, &rb.potentials);
    let dp = pa.p().l2_distance(pb.p())?;
    let dr = pa.r().centered().l2_distance(&pb.r().centered())?;

    let (ma, mb) = (ra.pencil_form.mat(), rb.pencil_form.mat());
    let p22_gap = max_gap(&mb.e22, &ma.e22)?;
    let theta_gap = max_gap(&rb.angle.theta, &ra.angle.theta)?;
    let u1 = dirac::zero_mode(&ra.pencil_form)?.u1;
    let density = u1.map(|u| u * u);
    let params = crate::commutation::CommutationParams::new(alpha0_a, alpha0_b, &density)?;
    let lw = params.log_w_prime(&density)?;
    let p12_gap = mb
        .e12
        .zip_with(&ma.e12, |b, a| b - a)?
        .zip_with(&lw, |d, l| d + l)?
        .max_abs();

    let tol = cfg.tol_independence;
    Ok(IndependenceReport {
        alpha0_a,
        alpha0_b,
        dp,
        dr,
        p22_gap,
        p12_gap,
        theta_gap,
        quantization_residuals: [ra.angle.quantization_residual, rb.angle.quantization_residual],
        tol,
        norms_ok: dp <= tol && dr <= tol,
        p22_ok: p22_gap <= P22_IDENTITY_TOL,
        p12_ok: p12_gap <= P12_IDENTITY_TOL,
        theta_ok: theta_gap <= P22_IDENTITY_TOL,
        potentials_a: ra.potentials,
        potentials_b: rb.potentials,
    })
}
