//! Inpainting experiments and their CSV report.
//!
//! One experiment: build a ground truth `M` (seeded synthetic low-rank
//! matrix, or the rank-`r` truncation of a PGM image), sample
//! `round(sr m n)` entries, observe them with additive noise
//! `xi1 * N(0, 1)`, recover with the chosen solver from zero and score the
//! relative error. Repetition `k` uses seed `seed + k`.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::data::{
    add_noise, freedom_ratio, gen_low_rank, gen_mask, low_rank_approx, relative_error, rms,
    sample_count,
};
use super::pgm::load_grayscale;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::operators::{completion_map, SamplingMask};
use crate::par::Execution;
use crate::solvers::{solve, LambdaMode, SolverConfig, SolverResult};

/// Header of the report CSV.
pub const REPORT_HEADER: &str = "xi1,fr,solver,RE,time_s,iters,converged";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// `(m, n)`; taken from the image when `image` is set.
    #[serde(default)]
    pub dims: Option<(usize, usize)>,
    pub rank: usize,
    #[serde(alias = "sampling_ratio")]
    pub sr: f64,
    #[serde(alias = "noise_level")]
    pub xi1: f64,
    pub solver: LambdaMode,
    #[serde(default = "d::tau")]
    pub tau: f64,
    #[serde(default = "d::a")]
    pub a: f64,
    #[serde(default = "d::xi")]
    pub xi: f64,
    #[serde(default = "d::mu")]
    pub mu: f64,
    #[serde(default)]
    pub lam: f64,
    #[serde(default = "d::tol")]
    pub tol: f64,
    #[serde(default = "d::max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d::repetitions")]
    pub repetitions: usize,
    /// Rescale the synthetic ground truth to this root-mean-square entry.
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub image: Option<PathBuf>,
}

mod d {
    use crate::solvers::SolverConfig;

    pub fn tau() -> f64 {
        SolverConfig::default().tau
    }
    pub fn a() -> f64 {
        SolverConfig::default().a
    }
    pub fn xi() -> f64 {
        SolverConfig::default().xi
    }
    pub fn mu() -> f64 {
        SolverConfig::default().mu
    }
    pub fn tol() -> f64 {
        SolverConfig::default().tol
    }
    pub fn max_iter() -> usize {
        SolverConfig::default().max_iter
    }
    pub fn repetitions() -> usize {
        1
    }
}

impl ExperimentSpec {
    /// Synthetic spec with solver defaults.
    pub fn synthetic(m: usize, n: usize, rank: usize, sr: f64, xi1: f64, solver: LambdaMode) -> Self {
        let c = SolverConfig::default();
        Self {
            dims: Some((m, n)),
            rank,
            sr,
            xi1,
            solver,
            tau: c.tau,
            a: c.a,
            xi: c.xi,
            mu: c.mu,
            lam: c.lam,
            tol: c.tol,
            max_iter: c.max_iter,
            seed: 0,
            repetitions: 1,
            scale: None,
            image: None,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            mode: self.solver,
            mu: self.mu,
            tau: self.tau,
            xi: self.xi,
            a: self.a,
            lam: self.lam,
            target_rank: self.rank,
            tol: self.tol,
            max_iter: self.max_iter,
            alpha: 0.0,
        }
    }

    /// Range checks that do not need the data. Image dimensions are checked
    /// once the file is read.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ParameterDomain(msg));
        if !(0.0..=1.0).contains(&self.sr) {
            return bad(format!("sr must lie in [0, 1], got {}", self.sr));
        }
        if !(0.0..1.0).contains(&self.xi1) {
            return bad(format!("xi1 must lie in [0, 1), got {}", self.xi1));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("scale must be positive, got {s}"));
            }
        }
        match (self.dims, &self.image) {
            (None, None) => return bad("either dims or image is required".into()),
            (Some((m, n)), None) if self.rank == 0 || self.rank >= m.min(n) => {
                return bad(format!("rank must satisfy 1 <= r < min(m, n), got {} for {m}x{n}", self.rank));
            }
            _ => {}
        }
        Ok(())
    }

    fn truth(&self, seed: u64) -> Result<DenseMatrix> {
        if let Some(path) = &self.image {
            let img = load_grayscale(path)?;
            if let Some(dims) = self.dims {
                if dims != img.shape() {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{}x{}", dims.0, dims.1),
                        found: format!("{}x{} image {}", img.rows(), img.cols(), path.display()),
                    });
                }
            }
            let (m, n) = img.shape();
            if self.rank == 0 || self.rank >= m.min(n) {
                return Err(Error::ParameterDomain(format!(
                    "rank must satisfy 1 <= r < min(m, n), got {} for {m}x{n}",
                    self.rank
                )));
            }
            return low_rank_approx(&img, self.rank);
        }
        let (m, n) = self.dims.expect("validated");
        let mut truth = gen_low_rank(m, n, self.rank, seed)?;
        if let Some(target) = self.scale {
            truth = truth.scaled(target / rms(&truth));
        }
        Ok(truth)
    }
}

/// Ground truth, mask and observations of one repetition.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub truth: DenseMatrix,
    pub mask: SamplingMask,
    pub observations: Vec<f64>,
}

pub fn build_instance(spec: &ExperimentSpec, seed: u64) -> Result<ProblemInstance> {
    spec.validate()?;
    let truth = spec.truth(seed)?;
    let (m, n) = truth.shape();
    let mask = gen_mask(m, n, spec.sr, seed)?;
    let observations = add_noise(&truth, &mask, spec.xi1, seed)?;
    Ok(ProblemInstance {
        truth,
        mask,
        observations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub xi1: f64,
    pub fr: f64,
    pub solver: LambdaMode,
    pub seed: u64,
    pub re: f64,
    pub wall_time: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the run failed; `re` then scores the last iterate, or is NaN
    /// when no iterate exists.
    pub error: Option<String>,
}

/// Runs one repetition with seed `seed`, returning the row and, when the
/// solver produced one, its result.
pub fn run_once(spec: &ExperimentSpec, seed: u64) -> Result<(ExperimentRow, Option<SolverResult>)> {
    let inst = build_instance(spec, seed)?;
    let (m, n) = inst.truth.shape();
    let fr = freedom_ratio(sample_count(m, n, spec.sr), m, n, spec.rank)?;
    let map = completion_map(inst.mask);
    let mut row = ExperimentRow {
        xi1: spec.xi1,
        fr,
        solver: spec.solver,
        seed,
        re: f64::NAN,
        wall_time: 0.0,
        iterations: 0,
        converged: false,
        error: None,
    };
    let res = match solve(&map, &inst.observations, &spec.solver_config(), None) {
        Ok(res) => res,
        Err(Error::SolverAborted {
            iteration,
            source,
            partial,
        }) => {
            log::warn!("seed {seed}: solver aborted at iteration {iteration}: {source}");
            row.error = Some(format!("iteration {iteration}: {source}"));
            *partial
        }
        Err(e) => return Err(e),
    };
    row.re = relative_error(&res.x_opt, &inst.truth)?;
    row.wall_time = res.wall_time;
    row.iterations = res.iterations;
    row.converged = res.converged && row.error.is_none();
    Ok((row, Some(res)))
}

/// All repetitions of one spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ExperimentRow>> {
    spec.validate()?;
    (0..spec.repetitions)
        .map(|k| run_once(spec, spec.seed.wrapping_add(k as u64)).map(|(row, _)| row))
        .collect()
}

fn failed_row(spec: &ExperimentSpec, seed: u64, e: &Error) -> ExperimentRow {
    let fr = spec
        .dims
        .and_then(|(m, n)| freedom_ratio(sample_count(m, n, spec.sr), m, n, spec.rank).ok())
        .unwrap_or(f64::NAN);
    ExperimentRow {
        xi1: spec.xi1,
        fr,
        solver: spec.solver,
        seed,
        re: f64::NAN,
        wall_time: 0.0,
        iterations: 0,
        converged: false,
        error: Some(e.to_string()),
    }
}

/// Rows grouped by spec, in spec order.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub groups: Vec<Vec<ExperimentRow>>,
}

/// Runs every repetition of every spec. Repetitions are independent and are
/// spread over `exec`; the report order does not depend on scheduling. Specs
/// are validated up front; failures of individual runs become failed rows.
pub fn run_table(specs: &[ExperimentSpec], exec: Execution) -> Result<Report> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("no experiments given".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        s.validate()
            .map_err(|e| Error::InvalidInput(format!("experiment {}: {e}", i + 1)))?;
    }
    let jobs: Vec<(usize, u64)> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.repetitions).map(move |k| (i, s.seed.wrapping_add(k as u64))))
        .collect();
    let rows = exec.map(&jobs, |&(i, seed)| match run_once(&specs[i], seed) {
        Ok((row, _)) => row,
        Err(e) => {
            log::warn!("experiment {} seed {seed} failed: {e}", i + 1);
            failed_row(&specs[i], seed, &e)
        }
    });
    let mut groups: Vec<Vec<ExperimentRow>> = vec![Vec::new(); specs.len()];
    for (&(i, _), row) in jobs.iter().zip(rows) {
        groups[i].push(row);
    }
    Ok(Report { groups })
}

impl Report {
    /// CSV with one row per run and a `<solver>-mean` row per spec. With
    /// `timing` off the time column reads `na`, making reports of identical
    /// specs byte-identical.
    pub fn write_csv<W: Write>(&self, w: W, timing: bool) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(REPORT_HEADER.split(','))
            .map_err(csv_err)?;
        let time = |t: f64| if timing { format!("{t:.3}") } else { "na".into() };
        for group in &self.groups {
            for r in group {
                let converged = match (&r.error, r.converged) {
                    (Some(_), _) => "failed",
                    (None, true) => "true",
                    (None, false) => "false",
                };
                out.write_record([
                    format!("{}", r.xi1),
                    format!("{:.4}", r.fr),
                    r.solver.name().to_string(),
                    format!("{:.6e}", r.re),
                    time(r.wall_time),
                    r.iterations.to_string(),
                    converged.to_string(),
                ])
                .map_err(csv_err)?;
            }
            let Some(first) = group.first() else { continue };
            let k = group.len() as f64;
            let mean = |f: fn(&ExperimentRow) -> f64| group.iter().map(f).sum::<f64>() / k;
            out.write_record([
                format!("{}", first.xi1),
                format!("{:.4}", first.fr),
                format!("{}-mean", first.solver.name()),
                format!("{:.6e}", mean(|r| r.re)),
                time(mean(|r| r.wall_time)),
                format!("{:.1}", mean(|r| r.iterations as f64)),
                format!(
                    "{}/{}",
                    group.iter().filter(|r| r.converged && r.error.is_none()).count(),
                    group.len()
                ),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

/// A table file: `[[experiment]]` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentTable {
    #[serde(default)]
    pub experiment: Vec<ExperimentSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_noiseless_observation_recovers_truth() {
        for solver in [LambdaMode::Fixed, LambdaMode::Scheme2, LambdaMode::Adaptive] {
            let spec = ExperimentSpec {
                seed: 3,
                ..ExperimentSpec::synthetic(12, 10, 2, 1.0, 0.0, solver)
            };
            let rows = run_experiment(&spec).unwrap();
            assert!(rows[0].re <= 1e-6, "{solver}: {}", rows[0].re);
        }
    }

    #[test]
    fn report_layout() {
        let spec = ExperimentSpec {
            repetitions: 2,
            max_iter: 50,
            ..ExperimentSpec::synthetic(10, 9, 2, 0.6, 0.01, LambdaMode::Adaptive)
        };
        let report = run_table(&[spec], Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].contains(",aisvta-mean,"));
        assert!(lines[1].split(',').nth(4) == Some("na"));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let ok = ExperimentSpec::synthetic(10, 9, 2, 0.6, 0.01, LambdaMode::Adaptive);
        assert!(ok.validate().is_ok());
        assert!(ExperimentSpec { rank: 9, ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { sr: 1.2, ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { xi1: 1.0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { dims: None, ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { repetitions: 0, ..ok }.validate().is_err());
        assert!(run_table(&[], Execution::Sequential).is_err());
    }

    #[test]
    fn scale_sets_rms() {
        let spec = ExperimentSpec {
            scale: Some(0.5),
            ..ExperimentSpec::synthetic(20, 16, 3, 0.5, 0.0, LambdaMode::Adaptive)
        };
        let inst = build_instance(&spec, 4).unwrap();
        assert!((rms(&inst.truth) - 0.5).abs() < 1e-12);
    }
}
