//! Proximal operators of the fraction penalty `rho_a(t) = a|t| / (a|t| + 1)`.
//!
//! Scalar level: `h(gamma)` minimizes `(beta - gamma)^2 + lam * rho_a(beta)`.
//! Above a threshold it equals the closed-form stationary value `g`, below
//! it the minimizer is zero. Two thresholds exist:
//!
//! * general regime, any `a > 0`: `lam * a / 2` when `lam <= 1/a^2`, else
//!   `sqrt(lam) - 1/(2a)`;
//! * convex regime, `a <= 1/sqrt(lam)`: the objective is strictly convex on
//!   `beta >= 0` and the threshold is `lam * a / 2`.
//!
//! Matrix level: the prox acts on singular values and keeps the singular
//! vectors, `G(Y) = U diag(h(sigma(Y))) V^T`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::par::Execution;

/// Allowed overshoot of the arccos argument before it counts as misuse.
pub const ARCCOS_SLACK: f64 = 1e-9;

/// Relative slack on `a * sqrt(lam) <= 1` for the convex regime. Adaptive
/// parameter choices sit exactly on the boundary when `tau = 1`.
pub const REGIME_SLACK: f64 = 1e-12;

/// Shape parameter `a > 0` of the fraction penalty.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct FractionPenaltyParam(f64);

impl FractionPenaltyParam {
    pub fn new(a: f64) -> Result<Self> {
        check_positive("a", a)?;
        Ok(Self(a))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    General,
    Convex,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Regime::General),
            "convex" => Ok(Regime::Convex),
            other => Err(Error::InvalidInput(format!(
                "unknown regime {other:?} (expected general or convex)"
            ))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::General => "general",
            Regime::Convex => "convex",
        })
    }
}

/// Validated `(a, lam)` pair together with its threshold.
///
/// `lam` is the effective weight of the scalar problem; inside a solver step
/// that is `lam * mu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdParams {
    pub a: f64,
    pub lam: f64,
    pub threshold: f64,
    pub regime: Regime,
}

impl ThresholdParams {
    pub fn new(a: f64, lam: f64, regime: Regime) -> Result<Self> {
        let threshold = match regime {
            Regime::General => threshold_general(a, lam)?,
            Regime::Convex => threshold_convex(a, lam)?,
        };
        Ok(Self {
            a,
            lam,
            threshold,
            regime,
        })
    }

    /// Scalar prox with these parameters. Valid for any real `gamma` in the
    /// general regime and `gamma >= 0` in the convex one.
    pub fn prox(&self, gamma: f64) -> Result<f64> {
        if self.regime == Regime::Convex && gamma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "convex-regime prox needs gamma >= 0, got {gamma}"
            )));
        }
        if gamma.abs() <= self.threshold {
            return Ok(0.0);
        }
        g_value(self.a, self.lam, gamma)
    }
}

/// Singular values sorted non-increasing, all nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "singular values must be finite and nonnegative, found {v}"
            )));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "singular values must be sorted non-increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Sorts before validating.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sigma_{i+1}` in one-based notation; zero past the end, matching the
    /// zero block of a full SVD.
    pub fn get(&self, i: usize) -> f64 {
        self.values.get(i).copied().unwrap_or(0.0)
    }

    /// Number of values strictly above `tol`.
    pub fn count_above(&self, tol: f64) -> usize {
        self.values.iter().take_while(|&&v| v > tol).count()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `P_a = sum_i a sigma_i / (a sigma_i + 1)`.
pub fn fraction_penalty(spectrum: &SingularSpectrum, a: f64) -> Result<f64> {
    check_positive("a", a)?;
    Ok(spectrum
        .values()
        .iter()
        .map(|&s| {
            let as_ = a * s;
            as_ / (as_ + 1.0)
        })
        .sum())
}

/// Threshold of the general-regime scalar prox.
pub fn threshold_general(a: f64, lam: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("lam", lam)?;
    Ok(if lam <= 1.0 / (a * a) {
        lam * a / 2.0
    } else {
        lam.sqrt() - 1.0 / (2.0 * a)
    })
}

/// Fails unless `0 < a <= 1/sqrt(lam)` (up to [`REGIME_SLACK`]).
pub fn check_convex_regime(a: f64, lam: f64) -> Result<()> {
    check_positive("a", a)?;
    check_positive("lam", lam)?;
    if a * lam.sqrt() > 1.0 + REGIME_SLACK {
        return Err(Error::RegimeViolation { a, lam });
    }
    Ok(())
}

/// Threshold of the convex-regime scalar prox, `lam * a / 2`.
pub fn threshold_convex(a: f64, lam: f64) -> Result<f64> {
    check_convex_regime(a, lam)?;
    Ok(lam * a / 2.0)
}

/// Outcome of evaluating the stationary value with clamping allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stationary {
    pub value: f64,
    /// The raw arccos argument before clamping.
    pub arccos_arg: f64,
}

impl Stationary {
    /// Whether the raw argument was outside `[-1, 1]` by more than [`ARCCOS_SLACK`].
    pub fn out_of_domain(&self) -> bool {
        !(-1.0 - ARCCOS_SLACK..=1.0 + ARCCOS_SLACK).contains(&self.arccos_arg)
    }
}

/// Stationary value `g_{a,lam}(gamma)` with the arccos argument clamped to
/// `[-1, 1]` unconditionally. Callers inspect [`Stationary::out_of_domain`].
///
/// With `w = 1 + a|gamma|` and `q = 27 lam a^2 / (4 w^3)` (so the arccos
/// argument is `q - 1`), the identity `phi/3 - pi/3 = -2 psi / 3` with
/// `psi = asin(sqrt(q / 2))` turns the closed form into
/// `|gamma| - 4 w sin^2(psi / 3) / (3a)`, which has no cancellation when
/// `a|gamma|` is small.
pub fn g_value_clamped(a: f64, lam: f64, gamma: f64) -> Stationary {
    let abs = gamma.abs();
    let w = 1.0 + a * abs;
    let q = 27.0 * lam * a * a / (4.0 * w * w * w);
    let arccos_arg = q - 1.0;
    let half_q = (q / 2.0).clamp(0.0, 1.0);
    let psi = half_q.sqrt().asin();
    let s = (psi / 3.0).sin();
    let magnitude = abs - 4.0 * w * s * s / (3.0 * a);
    let value = if gamma > 0.0 {
        magnitude
    } else if gamma < 0.0 {
        -magnitude
    } else {
        0.0
    };
    Stationary { value, arccos_arg }
}

/// Closed-form stationary value `g_{a,lam}(gamma)`.
///
/// Only meaningful at or above the active threshold; below it the arccos
/// argument exceeds 1 and an [`Error::ArccosDomain`] is returned.
pub fn g_value(a: f64, lam: f64, gamma: f64) -> Result<f64> {
    check_positive("a", a)?;
    if !(lam >= 0.0) || !lam.is_finite() {
        return Err(Error::ParameterDomain(format!("lam must be nonnegative, got {lam}")));
    }
    let st = g_value_clamped(a, lam, gamma);
    if st.out_of_domain() {
        return Err(Error::ArccosDomain {
            arg: st.arccos_arg,
            gamma,
        });
    }
    Ok(st.value)
}

/// The literal arccos / cos form of `g`. Kept for cross-checking the
/// rewritten evaluation in [`g_value_clamped`].
pub fn g_value_direct(a: f64, lam: f64, gamma: f64) -> f64 {
    let abs = gamma.abs();
    let w = 1.0 + a * abs;
    let arg = (27.0 * lam * a * a / (4.0 * w * w * w) - 1.0).clamp(-1.0, 1.0);
    let phi = arg.acos();
    let mag = w / (3.0 * a) * (1.0 + 2.0 * (phi / 3.0 - PI / 3.0).cos()) - 1.0 / a;
    mag * gamma.signum() * if gamma == 0.0 { 0.0 } else { 1.0 }
}

/// General-regime scalar prox `h_{a,lam}`. Ties at the threshold map to 0.
pub fn scalar_prox_general(a: f64, lam: f64, gamma: f64) -> Result<f64> {
    ThresholdParams::new(a, lam, Regime::General)?.prox(gamma)
}

/// Convex-regime scalar prox on `gamma >= 0`; the unique minimizer of
/// `(beta - gamma)^2 + lam a beta / (a beta + 1)` over `beta >= 0`.
pub fn scalar_prox_convex(a: f64, lam: f64, gamma: f64) -> Result<f64> {
    ThresholdParams::new(a, lam, Regime::Convex)?.prox(gamma)
}

/// Scalar prox applied to a batch of inputs.
pub fn prox_batch(
    a: f64,
    lam: f64,
    regime: Regime,
    gammas: &[f64],
    exec: Execution,
) -> Result<Vec<f64>> {
    let params = ThresholdParams::new(a, lam, regime)?;
    exec.map(gammas, |&g| params.prox(g)).into_iter().collect()
}

/// Applies the scalar prox of `regime` to every singular value.
/// `lam = 0` is the identity.
pub fn threshold_spectrum(
    spectrum: &SingularSpectrum,
    a: f64,
    lam: f64,
    regime: Regime,
) -> Result<Vec<f64>> {
    if lam == 0.0 {
        check_positive("a", a)?;
        return Ok(spectrum.values().to_vec());
    }
    let params = ThresholdParams::new(a, lam, regime)?;
    spectrum.values().iter().map(|&s| params.prox(s)).collect()
}

/// Matrix prox `G_{a,lam}(Y) = U diag(h(sigma(Y))) V^T`.
///
/// Inputs with more rows than columns are transposed around the operator.
pub fn matrix_prox(y: &DenseMatrix, a: f64, lam: f64, regime: Regime) -> Result<DenseMatrix> {
    if !(lam >= 0.0) || !lam.is_finite() {
        return Err(Error::ParameterDomain(format!("lam must be nonnegative, got {lam}")));
    }
    check_positive("a", a)?;
    if lam == 0.0 {
        return Ok(y.clone());
    }
    if y.rows() > y.cols() {
        return Ok(matrix_prox(&y.transpose(), a, lam, regime)?.transpose());
    }
    let svd = y.svd()?;
    let shrunk = threshold_spectrum(&svd.s, a, lam, regime)?;
    svd.reconstruct(&shrunk, Execution::Sequential)
}
