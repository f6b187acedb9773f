//! Spectral data `{(n, lambda_n, alpha_n)}`, `n = ±1..±N`: screening,
//! shift estimation and augmentation by the zero-mode pair `(0, 0, alpha0)`.
//!
//! Admissible data satisfy `lambda_n = pi n + h + l2` and
//! `alpha_n = 1 + l2` with strictly increasing, positive-definite entries.
//! Only finitely many pairs are ever available, so the tail conditions are
//! screened by a decay proxy rather than checked.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dirac::Eigenpair;
use crate::error::{Error, Result};

/// One eigenpair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    pub n: i64,
    pub lambda: f64,
    pub alpha: f64,
}

/// Pencil spectral data for `n = ±1..±N`, sorted by `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectralRepr", into = "SpectralRepr")]
pub struct SpectralData {
    h: Option<f64>,
    pairs: Vec<SpectralPair>,
    zero_mode: Option<SpectralPair>,
}

#[derive(Serialize, Deserialize)]
struct SpectralRepr {
    h: Option<f64>,
    pairs: Vec<SpectralPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zero_mode: Option<SpectralPair>,
}

impl TryFrom<SpectralRepr> for SpectralData {
    type Error = Error;

    fn try_from(repr: SpectralRepr) -> Result<Self> {
        let mut pairs = repr.pairs;
        // an explicit n = 0 entry is the zero mode
        let zero = pairs.iter().position(|p| p.n == 0).map(|i| pairs.remove(i));
        let mut sd = SpectralData::new(pairs, repr.h)?;
        if let Some(z) = repr.zero_mode.or(zero) {
            sd = sd.with_zero_mode(z.alpha)?;
        }
        Ok(sd)
    }
}

impl From<SpectralData> for SpectralRepr {
    fn from(sd: SpectralData) -> Self {
        SpectralRepr {
            h: sd.h,
            pairs: sd.pairs,
            zero_mode: sd.zero_mode,
        }
    }
}

impl SpectralData {
    /// Pairs must cover `±1..±N` exactly once; they are sorted by `n`.
    pub fn new(mut pairs: Vec<SpectralPair>, h: Option<f64>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::domain("spectral data is empty"));
        }
        pairs.sort_by_key(|p| p.n);
        let n = (pairs.len() / 2) as i64;
        let expected = (-n..=n).filter(|&k| k != 0);
        if !pairs.len().is_multiple_of(2) || !pairs.iter().map(|p| p.n).eq(expected) {
            return Err(Error::domain("indices must cover ±1..±N exactly once"));
        }
        if let Some(p) = pairs.iter().find(|p| !p.lambda.is_finite() || !p.alpha.is_finite()) {
            return Err(Error::domain(format!("non-finite entry at n = {}", p.n)));
        }
        if h.is_some_and(|h| !h.is_finite()) {
            return Err(Error::domain("shift must be finite"));
        }
        Ok(SpectralData {
            h,
            pairs,
            zero_mode: None,
        })
    }

    /// Builds data from `(lambda, alpha)` values given by a function of `n`.
    pub fn from_fn(pairs: usize, f: impl Fn(i64) -> (f64, f64)) -> Result<Self> {
        let n = pairs as i64;
        let pairs = (-n..=n)
            .filter(|&k| k != 0)
            .map(|k| {
                let (lambda, alpha) = f(k);
                SpectralPair { n: k, lambda, alpha }
            })
            .collect();
        Self::new(pairs, None)
    }

    /// Data of the zero potential, `(pi n, 1)`.
    pub fn free(pairs: usize) -> Self {
        Self::from_fn(pairs, |n| (PI * n as f64, 1.0)).expect("valid by construction")
    }

    /// Closed-form data of the pencil with `p = c`, `q = 0`.
    pub fn constant_p(c: f64, pairs: usize) -> Self {
        Self::from_fn(pairs, |n| {
            let pn = PI * n as f64;
            let lambda = c + (n as f64).signum() * (c * c + pn * pn).sqrt();
            (lambda, lambda * (lambda - c) / (pn * pn))
        })
        .expect("valid by construction")
    }

    /// Splits Dirac eigenpairs into pencil pairs (`n != 0`) and the zero mode.
    pub fn from_eigenpairs(eig: &[Eigenpair]) -> Result<Self> {
        let pairs = eig
            .iter()
            .filter(|e| e.n != 0)
            .map(|e| SpectralPair {
                n: e.n,
                lambda: e.lambda,
                alpha: e.alpha,
            })
            .collect();
        let mut sd = Self::new(pairs, None)?;
        sd.zero_mode = eig.iter().find(|e| e.n == 0).map(|e| SpectralPair {
            n: 0,
            lambda: e.lambda,
            alpha: e.alpha,
        });
        Ok(sd)
    }

    pub fn with_zero_mode(mut self, alpha0: f64) -> Result<Self> {
        if !(alpha0.is_finite() && alpha0 > 0.0) {
            return Err(Error::domain(format!("alpha0 must be positive, got {alpha0}")));
        }
        self.zero_mode = Some(SpectralPair {
            n: 0,
            lambda: 0.0,
            alpha: alpha0,
        });
        Ok(self)
    }

    pub fn with_shift(mut self, h: Option<f64>) -> Self {
        self.h = h;
        self
    }

    pub fn pairs(&self) -> &[SpectralPair] {
        &self.pairs
    }

    /// `N`, the largest index.
    pub fn max_index(&self) -> usize {
        self.pairs.len() / 2
    }

    pub fn h(&self) -> Option<f64> {
        self.h
    }

    pub fn zero_mode(&self) -> Option<SpectralPair> {
        self.zero_mode
    }

    pub fn get(&self, n: i64) -> Option<&SpectralPair> {
        self.pairs.iter().find(|p| p.n == n)
    }

    /// Shift implied by the enumeration alone: the unweighted mean of
    /// `lambda_n - pi n` over all indices. A mislabelled block of pairs moves
    /// it away from the tail regression by a multiple of `pi / N`.
    pub fn enumeration_shift(&self) -> f64 {
        let sum: f64 = self.pairs.iter().map(|p| p.lambda - PI * p.n as f64).sum();
        sum / self.pairs.len() as f64
    }
}

/// Thresholds of the decay proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    /// The last-quartile mean square residual may exceed the first-quartile
    /// one by at most this factor.
    pub decay_factor: f64,
    /// Absolute allowance for residuals at rounding level.
    pub decay_floor: f64,
    /// Largest accepted gap between the regression and enumeration shifts.
    pub shift_discrepancy: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        ValidationTolerances {
            decay_factor: 1.0,
            decay_floor: 1e-14,
            shift_discrepancy: 0.1,
        }
    }
}

/// Per-check outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub increasing: bool,
    pub straddles_zero: bool,
    pub positive_alpha: bool,
    pub lambda_decay: bool,
    pub alpha_decay: bool,
    /// Shift used for the residuals `lambda_n - pi n - h`.
    pub h: f64,
    pub shift_regression: Option<f64>,
    pub shift_enumeration: f64,
    pub lambda_residual_sum: f64,
    pub alpha_residual_sum: f64,
    pub lambda_quartiles: [f64; 2],
    pub alpha_quartiles: [f64; 2],
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.increasing && self.straddles_zero && self.positive_alpha && self.lambda_decay && self.alpha_decay
    }

    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        [
            (self.increasing, "eigenvalues not strictly increasing"),
            (self.straddles_zero, "lambda_-1 < 0 < lambda_1 violated"),
            (self.positive_alpha, "non-positive norming constant"),
            (self.lambda_decay, "eigenvalue residuals do not decay"),
            (self.alpha_decay, "norming-constant residuals do not decay"),
        ]
        .into_iter()
        .filter_map(|(ok, name)| (!ok).then_some(name))
        .collect()
    }
}

/// Mean squared residual over the lowest and highest quarter of `|n|`.
fn quartile_means(sd: &SpectralData, residual: impl Fn(&SpectralPair) -> f64) -> [f64; 2] {
    let n = sd.max_index();
    let q = (n / 4).max(1);
    let mean = |lo: usize, hi: usize| {
        let vals: Vec<f64> = sd
            .pairs
            .iter()
            .filter(|p| (lo..=hi).contains(&(p.n.unsigned_abs() as usize)))
            .map(|p| residual(p).powi(2))
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    [mean(1, q), mean(n + 1 - q, n)]
}

/// Screens data against the admissible class.
pub fn validate(sd: &SpectralData, tol: &ValidationTolerances) -> ValidationReport {
    let pairs = &sd.pairs;
    let n = sd.max_index();
    let shift_regression = estimate_shift(sd).ok();
    let shift_enumeration = sd.enumeration_shift();
    let h = sd.h.or(shift_regression).unwrap_or(shift_enumeration);

    let lam_res = |p: &SpectralPair| p.lambda - PI * p.n as f64 - h;
    let alpha_res = |p: &SpectralPair| p.alpha - 1.0;
    let lambda_quartiles = quartile_means(sd, lam_res);
    let alpha_quartiles = quartile_means(sd, alpha_res);
    let decays = |[first, last]: [f64; 2]| last <= tol.decay_factor * first + tol.decay_floor;

    ValidationReport {
        increasing: pairs.windows(2).all(|w| w[1].lambda > w[0].lambda),
        straddles_zero: pairs[n - 1].lambda < 0.0 && pairs[n].lambda > 0.0,
        positive_alpha: pairs.iter().all(|p| p.alpha > 0.0),
        lambda_decay: decays(lambda_quartiles),
        alpha_decay: decays(alpha_quartiles),
        h,
        shift_regression,
        shift_enumeration,
        lambda_residual_sum: pairs.iter().map(|p| lam_res(p).powi(2)).sum(),
        alpha_residual_sum: pairs.iter().map(|p| alpha_res(p).powi(2)).sum(),
        lambda_quartiles,
        alpha_quartiles,
    }
}

/// Regression estimate of `h`: the `n²`-weighted mean of `lambda_n - pi n`
/// over `|n| > N/2`. Needs `N >= 4`.
pub fn estimate_shift(sd: &SpectralData) -> Result<f64> {
    let n = sd.max_index();
    if n < 4 {
        return Err(Error::domain(format!("shift regression needs N >= 4, got {n}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for p in sd.pairs.iter().filter(|p| 2 * p.n.unsigned_abs() as usize > n) {
        let w = (p.n * p.n) as f64;
        num += w * (p.lambda - PI * p.n as f64);
        den += w;
    }
    Ok(num / den)
}

/// Spectral data with the zero-mode pair and a committed shift.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSpectralData {
    base: SpectralData,
    alpha0: f64,
    h: f64,
}

impl AugmentedSpectralData {
    pub fn base(&self) -> &SpectralData {
        &self.base
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn max_index(&self) -> usize {
        self.base.max_index()
    }

    /// All pairs including `(0, 0, alpha0)`, sorted by `n`.
    pub fn pairs(&self) -> Vec<SpectralPair> {
        let mut out = self.base.pairs.clone();
        let n = self.base.max_index();
        out.insert(
            n,
            SpectralPair {
                n: 0,
                lambda: 0.0,
                alpha: self.alpha0,
            },
        );
        out
    }

    /// Same data with another `alpha0`.
    pub fn with_alpha0(&self, alpha0: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        Ok(AugmentedSpectralData { alpha0, ..self.clone() })
    }

    /// Builds augmented data directly, bypassing validation.
    pub fn from_parts(base: SpectralData, alpha0: f64, h: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        if !h.is_finite() {
            return Err(Error::domain("shift must be finite"));
        }
        Ok(AugmentedSpectralData { base, alpha0, h })
    }
}

fn check_alpha0(alpha0: f64) -> Result<()> {
    if !(alpha0.is_finite() && alpha0 > 0.0) {
        return Err(Error::domain(format!("alpha0 must be positive, got {alpha0}")));
    }
    Ok(())
}

/// Validates `sd`, commits the shift and inserts `(0, 0, alpha0)`.
///
/// The shift is `h_override`, else the shift stored in `sd`, else the
/// regression estimate; the last is cross-checked against the enumeration
/// shift.
pub fn augment(
    sd: &SpectralData,
    alpha0: f64,
    h_override: Option<f64>,
    tol: &ValidationTolerances,
) -> Result<AugmentedSpectralData> {
    check_alpha0(alpha0)?;
    let report = validate(sd, tol);
    if !report.passed() {
        return Err(Error::Validation(report.failures().join("; ")));
    }
    let h = match h_override.or(sd.h) {
        Some(h) => h,
        None => {
            let enumeration = report.shift_enumeration;
            match report.shift_regression {
                Some(regression) => {
                    if (regression - enumeration).abs() > tol.shift_discrepancy {
                        return Err(Error::ShiftDiscrepancy {
                            regression,
                            enumeration,
                        });
                    }
                    regression
                }
                None => enumeration,
            }
        }
    };
    AugmentedSpectralData::from_parts(sd.clone(), alpha0, h)
}
