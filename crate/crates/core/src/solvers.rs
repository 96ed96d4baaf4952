//! Iterative singular value thresholding.
//!
//! Every scheme repeats the same step: form `B = B_mu(X^k)`, take its thin
//! SVD, shrink the singular values with the fraction-penalty prox and
//! rebuild `X^{k+1}` from the singular vectors of `B`. The schemes differ in
//! how `(lam, a)` are chosen:
//!
//! * [`isvta_fixed`]: user-supplied `lam` and `a`, general-regime prox with
//!   weight `lam * mu`. The objective decreases monotonically.
//! * [`isvta_scheme2`]: `a` fixed, `lam` picked from `sigma_r(B)` and
//!   `sigma_{r+1}(B)` each iteration ([`scheme2_lambda`]).
//! * [`aisvta`]: both picked from `sigma_{r+1}(B)` ([`adaptive_params`]) so
//!   that the convex-regime threshold lands on `sigma_{r+1}(B)`; when that
//!   value vanishes the step is the plain gradient step.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Svd};
use crate::operators::{
    gradient_step, operator_norm_sq, residual, LinearMeasurement, StepSize, POWER_ITER_MAX,
    POWER_ITER_TOL,
};
use crate::par::Execution;
use crate::thresholding::{
    check_convex_regime, fraction_penalty, g_value_clamped, threshold_spectrum, Regime,
    SingularSpectrum,
};

/// `sigma_{r+1}(B) < DEGENERACY_REL * max(1, sigma_1(B))` selects the
/// `lam = 0` step of the adaptive scheme.
pub const DEGENERACY_REL: f64 = 1e-12;

/// How `lam` (and `a`) are chosen per iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    Fixed,
    Scheme2,
    #[serde(alias = "aisvta")]
    Adaptive,
}

impl LambdaMode {
    pub fn name(self) -> &'static str {
        match self {
            LambdaMode::Fixed => "fixed",
            LambdaMode::Scheme2 => "scheme2",
            LambdaMode::Adaptive => "aisvta",
        }
    }
}

impl std::str::FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(LambdaMode::Fixed),
            "scheme2" => Ok(LambdaMode::Scheme2),
            "aisvta" | "adaptive" => Ok(LambdaMode::Adaptive),
            other => Err(Error::InvalidInput(format!(
                "unknown solver {other:?} (expected fixed, scheme2 or aisvta)"
            ))),
        }
    }
}

impl std::fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: LambdaMode,
    /// Gradient step size, `0 < mu <= 1/||A||^2`.
    pub mu: f64,
    /// Adaptive scheme: `a = tau / sqrt(lam mu)`, `tau` in `(0, 1]`.
    pub tau: f64,
    /// Scheme 2 safety margin in the second `lam` branch.
    pub xi: f64,
    /// Penalty shape for the fixed and Scheme 2 iterations.
    pub a: f64,
    /// Regularization weight of the fixed iteration.
    pub lam: f64,
    /// Rank `r` of the sought matrix (Scheme 2 and adaptive).
    pub target_rank: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Adaptive scheme: weight of `sigma_r^2` against `sigma_{r+1}^2` in `lam*`.
    pub alpha: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: LambdaMode::Adaptive,
            mu: 0.99,
            tau: 0.45,
            xi: 0.01,
            a: 1.0,
            lam: 0.0,
            target_rank: 1,
            tol: 1e-8,
            max_iter: 5000,
            alpha: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn fixed(lam: f64, a: f64) -> Self {
        Self {
            mode: LambdaMode::Fixed,
            lam,
            a,
            ..Self::default()
        }
    }

    pub fn scheme2(target_rank: usize, a: f64) -> Self {
        Self {
            mode: LambdaMode::Scheme2,
            target_rank,
            a,
            ..Self::default()
        }
    }

    pub fn adaptive(target_rank: usize, tau: f64) -> Self {
        Self {
            mode: LambdaMode::Adaptive,
            target_rank,
            tau,
            ..Self::default()
        }
    }

    /// Checks parameter ranges against a map with domain `m x n`. The step
    /// size bound needs `||A||^2`, supplied by the caller.
    pub fn validate(&self, dims: (usize, usize), norm_sq: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::ParameterDomain(msg));
        let mu = StepSize::new(self.mu)?.get();
        if norm_sq > 0.0 && mu * norm_sq > 1.0 + 1e-12 {
            return bad(format!(
                "mu = {mu} exceeds 1/||A||^2 = {}",
                1.0 / norm_sq
            ));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        let m = dims.0.min(dims.1);
        match self.mode {
            LambdaMode::Fixed => {
                if !(self.lam >= 0.0 && self.lam.is_finite()) {
                    return bad(format!("lam must be nonnegative, got {}", self.lam));
                }
                if !(self.a > 0.0 && self.a.is_finite()) {
                    return bad(format!("a must be positive, got {}", self.a));
                }
            }
            LambdaMode::Scheme2 => {
                if !(self.a > 0.0 && self.a.is_finite()) {
                    return bad(format!("a must be positive, got {}", self.a));
                }
                if !(self.xi > 0.0 && self.xi < 1.0) {
                    return bad(format!("xi must lie in (0, 1), got {}", self.xi));
                }
            }
            LambdaMode::Adaptive => {
                if !(self.tau > 0.0 && self.tau <= 1.0) {
                    return bad(format!("tau must lie in (0, 1], got {}", self.tau));
                }
                if !(0.0..1.0).contains(&self.alpha) {
                    return bad(format!("alpha must lie in [0, 1), got {}", self.alpha));
                }
            }
        }
        if self.mode != LambdaMode::Fixed && !(1..m).contains(&self.target_rank) {
            return bad(format!(
                "target rank must satisfy 1 <= r < {m}, got {}",
                self.target_rank
            ));
        }
        Ok(())
    }

    /// One `key=value` per field, in a fixed order.
    pub fn describe(&self) -> String {
        format!(
            "solver={} mu={} tau={} xi={} a={} lam={} rank={} tol={} max_iter={} alpha={}",
            self.mode,
            self.mu,
            self.tau,
            self.xi,
            self.a,
            self.lam,
            self.target_rank,
            self.tol,
            self.max_iter,
            self.alpha
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub mode: LambdaMode,
    pub x_opt: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// `C_lam(X^{k+1})` with the `(lam, a)` of that iteration.
    pub objective_trace: Vec<f64>,
    /// `(lam_k, a_k)`; degenerate adaptive steps record `(0, inf)`.
    pub param_trace: Vec<(f64, f64)>,
    /// `||X^{k+1} - X^k||_F`.
    pub step_norm_trace: Vec<f64>,
    /// `||X^{k+1} - X^k||_F / max(1, ||X^k||_F)`, the quantity the stopping
    /// rule compares against `tol`.
    pub relative_step_trace: Vec<f64>,
    /// Nonzero singular values kept by the prox; `None` on steps that skip it.
    pub retained_trace: Vec<Option<usize>>,
    /// Singular values evaluated with a clamped out-of-domain arccos argument.
    pub arccos_clamps: usize,
    pub wall_time: f64,
}

impl SolverResult {
    pub fn degenerate_steps(&self) -> usize {
        self.retained_trace.iter().filter(|r| r.is_none()).count()
    }

    /// Trace as CSV with header `iter,lambda,a,objective,step_norm`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,lambda,a,objective,step_norm")?;
        for k in 0..self.iterations {
            let (lam, a) = self.param_trace[k];
            writeln!(
                w,
                "{},{},{},{},{}",
                k + 1,
                lam,
                a,
                self.objective_trace[k],
                self.step_norm_trace[k]
            )?;
        }
        Ok(())
    }
}

/// `C_lam(X) = ||A(X) - b||^2 + lam P_a(X)`.
pub fn objective<M: LinearMeasurement + ?Sized>(
    x: &DenseMatrix,
    map: &M,
    b: &[f64],
    lam: f64,
    a: f64,
) -> Result<f64> {
    if !(lam >= 0.0) {
        return Err(Error::ParameterDomain(format!("lam must be nonnegative, got {lam}")));
    }
    let fit: f64 = residual(map, x, b)?.iter().map(|r| r * r).sum();
    if lam == 0.0 {
        return Ok(fit);
    }
    Ok(fit + lam * fraction_penalty(&x.singular_values()?, a)?)
}

/// `C_{lam,mu}(X, Z) = mu [C_lam(X) - ||A(X) - A(Z)||^2] + ||X - Z||_F^2`.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_objective<M: LinearMeasurement + ?Sized>(
    x: &DenseMatrix,
    z: &DenseMatrix,
    map: &M,
    b: &[f64],
    lam: f64,
    mu: f64,
    a: f64,
) -> Result<f64> {
    let c = objective(x, map, b, lam, a)?;
    let ax = map.forward(x)?;
    let az = map.forward(z)?;
    let gap: f64 = ax.iter().zip(&az).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(mu * (c - gap) + x.sub(z)?.frobenius_norm_sq())
}

/// Branch taken by the Scheme 2 `lam` rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme2Branch {
    /// `lam_1 = 2 sigma_{r+1} / (a mu)`, threshold `lam mu a / 2`.
    L1,
    /// `lam_2 = (1 - xi)(2 a sigma_r + 1)^2 / (4 a^2 mu)`, threshold
    /// `sqrt(lam mu) - 1/(2a)`.
    L2,
}

/// Scheme 2 choice of `lam` from `sigma_r` and `sigma_{r+1}` of `B_mu(X^k)`.
pub fn scheme2_lambda(
    sigma_r: f64,
    sigma_r1: f64,
    a: f64,
    mu: f64,
    xi: f64,
) -> Result<(f64, Scheme2Branch)> {
    if !(sigma_r1 >= 0.0 && sigma_r >= sigma_r1) {
        return Err(Error::ParameterDomain(format!(
            "need sigma_r >= sigma_r1 >= 0, got {sigma_r}, {sigma_r1}"
        )));
    }
    for (name, v) in [("a", a), ("mu", mu), ("xi", xi)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::ParameterDomain(format!("{name} must be positive, got {v}")));
        }
    }
    let lam1 = 2.0 * sigma_r1 / (a * mu);
    if lam1 <= 1.0 / (a * a * mu) {
        Ok((lam1, Scheme2Branch::L1))
    } else {
        let t = 2.0 * a * sigma_r + 1.0;
        Ok(((1.0 - xi) * t * t / (4.0 * a * a * mu), Scheme2Branch::L2))
    }
}

/// Outcome of the adaptive `(lam, a)` rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdaptiveParams {
    Active { lam: f64, a: f64 },
    /// `sigma_{r+1}` vanished: `lam = 0`, the step is `X^{k+1} = B_mu(X^k)`.
    Degenerate,
}

impl AdaptiveParams {
    /// Induced convex-regime threshold `lam mu a / 2`.
    pub fn threshold(&self, mu: f64) -> Option<f64> {
        match *self {
            AdaptiveParams::Active { lam, a } => Some(lam * mu * a / 2.0),
            AdaptiveParams::Degenerate => None,
        }
    }
}

fn adaptive_from_level(level: f64, tau: f64, mu: f64, tol: f64) -> Result<AdaptiveParams> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::ParameterDomain(format!("tau must lie in (0, 1], got {tau}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::ParameterDomain(format!("mu must be positive, got {mu}")));
    }
    if !(level >= 0.0) {
        return Err(Error::ParameterDomain(format!("singular value must be nonnegative, got {level}")));
    }
    if level < tol || level == 0.0 {
        return Ok(AdaptiveParams::Degenerate);
    }
    let lam = 4.0 / (tau * tau * mu) * level * level;
    let a = tau / (lam * mu).sqrt();
    Ok(AdaptiveParams::Active { lam, a })
}

/// `lam* = 4 sigma_{r+1}^2 / (tau^2 mu)`, `a* = tau / sqrt(lam* mu)`.
///
/// The induced threshold `lam* mu a* / 2` equals `sigma_{r+1}`. Values
/// below `1e-12` are degenerate.
pub fn adaptive_params(sigma_r1: f64, tau: f64, mu: f64) -> Result<AdaptiveParams> {
    adaptive_from_level(sigma_r1, tau, mu, DEGENERACY_REL)
}

/// Adaptive rule on a full spectrum with target rank `r` and interpolation
/// weight `alpha` (`lam*` uses `(1 - alpha) sigma_{r+1}^2 + alpha sigma_r^2`).
/// Degeneracy is relative to `max(1, sigma_1)`.
pub fn adaptive_params_for(
    spectrum: &SingularSpectrum,
    r: usize,
    tau: f64,
    mu: f64,
    alpha: f64,
) -> Result<(AdaptiveParams, f64)> {
    let s_r = spectrum.get(r.saturating_sub(1));
    let s_r1 = spectrum.get(r);
    let tol = DEGENERACY_REL * spectrum.get(0).max(1.0);
    if s_r1 < tol && alpha == 0.0 {
        return Ok((AdaptiveParams::Degenerate, 0.0));
    }
    let level = ((1.0 - alpha) * s_r1 * s_r1 + alpha * s_r * s_r).sqrt();
    Ok((adaptive_from_level(level, tau, mu, tol)?, level))
}

/// `||X^{k+1} - X^k||_F / max(1, ||X^k||_F) <= tol`.
///
/// Panics if the shapes differ.
pub fn stopping_met(x_prev: &DenseMatrix, x_next: &DenseMatrix, tol: f64) -> bool {
    let step = x_prev.distance(x_next).expect("iterates share a shape");
    step / x_prev.frobenius_norm().max(1.0) <= tol
}

/// Per-iteration decision made from the spectrum of `B_mu(X^k)`.
struct Shrink {
    /// New singular values, or `None` to take `B_mu(X^k)` unchanged.
    weights: Option<Vec<f64>>,
    lam: f64,
    a: f64,
    clamps: usize,
}

fn shrink_above(spectrum: &SingularSpectrum, a: f64, lam_mu: f64, threshold: f64) -> (Vec<f64>, usize) {
    let mut clamps = 0;
    let w = spectrum
        .values()
        .iter()
        .map(|&s| {
            if s <= threshold {
                return 0.0;
            }
            let st = g_value_clamped(a, lam_mu, s);
            if st.out_of_domain() {
                clamps += 1;
                log::debug!("arccos argument {} clamped at sigma = {s}", st.arccos_arg);
            }
            st.value
        })
        .collect();
    (w, clamps)
}

fn fixed_rule(cfg: &SolverConfig, s: &SingularSpectrum) -> Result<Shrink> {
    let lam_mu = cfg.lam * cfg.mu;
    Ok(Shrink {
        weights: Some(threshold_spectrum(s, cfg.a, lam_mu, Regime::General)?),
        lam: cfg.lam,
        a: cfg.a,
        clamps: 0,
    })
}

fn scheme2_rule(cfg: &SolverConfig, s: &SingularSpectrum) -> Result<Shrink> {
    let r = cfg.target_rank;
    let (lam, branch) = scheme2_lambda(s.get(r - 1), s.get(r), cfg.a, cfg.mu, cfg.xi)?;
    let lam_mu = lam * cfg.mu;
    let threshold = match branch {
        Scheme2Branch::L1 => lam_mu * cfg.a / 2.0,
        Scheme2Branch::L2 => lam_mu.sqrt() - 1.0 / (2.0 * cfg.a),
    };
    let (w, clamps) = shrink_above(s, cfg.a, lam_mu, threshold);
    Ok(Shrink {
        weights: Some(w),
        lam,
        a: cfg.a,
        clamps,
    })
}

fn adaptive_rule(cfg: &SolverConfig, s: &SingularSpectrum) -> Result<Shrink> {
    let (params, level) = adaptive_params_for(s, cfg.target_rank, cfg.tau, cfg.mu, cfg.alpha)?;
    match params {
        AdaptiveParams::Degenerate => Ok(Shrink {
            weights: None,
            lam: 0.0,
            a: f64::INFINITY,
            clamps: 0,
        }),
        AdaptiveParams::Active { lam, a } => {
            let lam_mu = lam * cfg.mu;
            debug_assert!(check_convex_regime(a, lam_mu).is_ok());
            // lam mu a / 2 equals `level` algebraically; rounding may put it an
            // ulp below, which would let sigma_{r+1} survive.
            let threshold = (lam_mu * a / 2.0).max(level);
            let (w, clamps) = shrink_above(s, a, lam_mu, threshold);
            Ok(Shrink {
                weights: Some(w),
                lam,
                a,
                clamps,
            })
        }
    }
}

fn drive<M, F>(
    map: &M,
    b: &[f64],
    cfg: &SolverConfig,
    x0: &DenseMatrix,
    mut rule: F,
) -> Result<SolverResult>
where
    M: LinearMeasurement + ?Sized,
    F: FnMut(&SolverConfig, &SingularSpectrum) -> Result<Shrink>,
{
    let start = Instant::now();
    map.check_domain(x0)?;
    map.check_range(b)?;
    let norm = operator_norm_sq(map, POWER_ITER_MAX, POWER_ITER_TOL)?;
    cfg.validate(map.dims(), norm.value)?;
    let mu = StepSize::new(cfg.mu)?;

    let mut out = SolverResult {
        mode: cfg.mode,
        x_opt: x0.clone(),
        iterations: 0,
        converged: false,
        objective_trace: Vec::new(),
        param_trace: Vec::new(),
        step_norm_trace: Vec::new(),
        relative_step_trace: Vec::new(),
        retained_trace: Vec::new(),
        arccos_clamps: 0,
        wall_time: 0.0,
    };

    for k in 0..cfg.max_iter {
        let step = (|| -> Result<(DenseMatrix, Shrink, Vec<f64>)> {
            let bmat = gradient_step(&out.x_opt, map, b, mu)?;
            let svd: Svd = bmat.svd()?;
            let shrink = rule(cfg, &svd.s)?;
            let (next, kept) = match &shrink.weights {
                Some(w) => (svd.reconstruct(w, Execution::Sequential)?, w.clone()),
                None => (bmat, svd.s.values().to_vec()),
            };
            Ok((next, shrink, kept))
        })();
        let (next, shrink, kept) = match step {
            Ok(v) => v,
            Err(e) => {
                out.wall_time = start.elapsed().as_secs_f64();
                return Err(Error::SolverAborted {
                    iteration: k + 1,
                    source: Box::new(e),
                    partial: Box::new(out),
                });
            }
        };

        let fit: f64 = residual(map, &next, b)?.iter().map(|r| r * r).sum();
        let penalty = if shrink.lam > 0.0 {
            shrink.lam * fraction_penalty(&SingularSpectrum::from_unsorted(kept.clone())?, shrink.a)?
        } else {
            0.0
        };
        let step_norm = out.x_opt.distance(&next)?;
        let rel = step_norm / out.x_opt.frobenius_norm().max(1.0);

        out.objective_trace.push(fit + penalty);
        out.param_trace.push((shrink.lam, shrink.a));
        out.step_norm_trace.push(step_norm);
        out.relative_step_trace.push(rel);
        out.retained_trace
            .push(shrink.weights.as_ref().map(|w| w.iter().filter(|&&v| v != 0.0).count()));
        out.arccos_clamps += shrink.clamps;
        out.iterations = k + 1;
        out.x_opt = next;

        if cfg.mode == LambdaMode::Adaptive {
            if let Some(Some(kept)) = out.retained_trace.last() {
                debug_assert!(*kept <= cfg.target_rank, "rank cap violated: {kept}");
            }
        }
        if rel <= cfg.tol {
            out.converged = true;
            break;
        }
    }
    if out.arccos_clamps > 0 {
        log::warn!(
            "{} singular values were shrunk with a clamped arccos argument",
            out.arccos_clamps
        );
    }
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Fixed-`lam` iteration `X^{k+1} = G_{a, lam mu}(B_mu(X^k))`.
pub fn isvta_fixed<M: LinearMeasurement + ?Sized>(
    map: &M,
    b: &[f64],
    cfg: &SolverConfig,
    x0: &DenseMatrix,
) -> Result<SolverResult> {
    let cfg = SolverConfig {
        mode: LambdaMode::Fixed,
        ..cfg.clone()
    };
    drive(map, b, &cfg, x0, fixed_rule)
}

/// Scheme 2: fixed `a`, `lam` re-selected every iteration.
pub fn isvta_scheme2<M: LinearMeasurement + ?Sized>(
    map: &M,
    b: &[f64],
    cfg: &SolverConfig,
    x0: &DenseMatrix,
) -> Result<SolverResult> {
    let cfg = SolverConfig {
        mode: LambdaMode::Scheme2,
        ..cfg.clone()
    };
    drive(map, b, &cfg, x0, scheme2_rule)
}

/// Adaptive iteration choosing both `lam` and `a` every step.
pub fn aisvta<M: LinearMeasurement + ?Sized>(
    map: &M,
    b: &[f64],
    cfg: &SolverConfig,
    x0: &DenseMatrix,
) -> Result<SolverResult> {
    let cfg = SolverConfig {
        mode: LambdaMode::Adaptive,
        ..cfg.clone()
    };
    drive(map, b, &cfg, x0, adaptive_rule)
}

/// Runs the scheme selected by `cfg.mode`, starting from `x0` or zero.
pub fn solve<M: LinearMeasurement + ?Sized>(
    map: &M,
    b: &[f64],
    cfg: &SolverConfig,
    x0: Option<&DenseMatrix>,
) -> Result<SolverResult> {
    let (m, n) = map.dims();
    let zero;
    let x0 = match x0 {
        Some(x) => x,
        None => {
            zero = DenseMatrix::zeros(m, n);
            &zero
        }
    };
    match cfg.mode {
        LambdaMode::Fixed => isvta_fixed(map, b, cfg, x0),
        LambdaMode::Scheme2 => isvta_scheme2(map, b, cfg, x0),
        LambdaMode::Adaptive => aisvta(map, b, cfg, x0),
    }
}
