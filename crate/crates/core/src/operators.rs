//! Linear measurement maps `A: R^{m x n} -> R^d`, their adjoints, the
//! gradient step `B_mu(X) = X + mu A*(b - A(X))` and step-size selection.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{Stream, StreamRng};

/// A linear map from `m x n` matrices to `d`-vectors.
pub trait LinearMeasurement: Send + Sync {
    /// `(m, n)` of the domain.
    fn dims(&self) -> (usize, usize);

    /// Number of measurements `d`.
    fn measurements(&self) -> usize;

    fn forward(&self, x: &DenseMatrix) -> Result<Vec<f64>>;

    fn adjoint(&self, y: &[f64]) -> Result<DenseMatrix>;

    fn check_domain(&self, x: &DenseMatrix) -> Result<()> {
        let (m, n) = self.dims();
        if x.shape() != (m, n) {
            return Err(Error::shape(
                format!("{m}x{n}"),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        Ok(())
    }

    fn check_range(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.measurements() {
            return Err(Error::shape(
                format!("{} measurements", self.measurements()),
                y.len(),
            ));
        }
        Ok(())
    }
}

impl<T: LinearMeasurement + ?Sized> LinearMeasurement for &T {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn measurements(&self) -> usize {
        (**self).measurements()
    }
    fn forward(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        (**self).forward(x)
    }
    fn adjoint(&self, y: &[f64]) -> Result<DenseMatrix> {
        (**self).adjoint(y)
    }
}

/// Observed index set: distinct in-range `(row, col)` pairs kept in
/// row-major order. Measurement vectors follow the same order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize)>,
}

impl SamplingMask {
    /// Sorts `entries` row-major. Out-of-range or repeated pairs are errors.
    pub fn new(rows: usize, cols: usize, mut entries: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(i, j)) = entries.iter().find(|&&(i, j)| i >= rows || j >= cols) {
            return Err(Error::InvalidInput(format!(
                "mask entry ({i}, {j}) outside {rows}x{cols}"
            )));
        }
        entries.sort_unstable();
        if let Some(w) = entries.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "mask entry ({}, {}) listed twice",
                w[0].0, w[0].1
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        let entries = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect();
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Values of `x` at the mask entries, in mask order.
    pub fn gather(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        if x.shape() != (self.rows, self.cols) {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        Ok(self.entries.iter().map(|&(i, j)| x[(i, j)]).collect())
    }

    /// Text form: header `m n s`, then one `row col` line per entry (0-based,
    /// row-major order).
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.entries.len())?;
        for &(i, j) in &self.entries {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses the text form. Entries must already be in row-major order so
    /// that an observation file written against the same listing lines up.
    pub fn read_from<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = BufReader::new(r)
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (hl, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty mask file".into()))?;
        let header = header?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(hl, format!("bad header {header:?}: {e}")))?;
        let [m, n, s] = nums[..] else {
            return Err(parse_err(hl, format!("header must be `m n s`, got {header:?}")));
        };
        let mut entries = Vec::with_capacity(s);
        for (ln, line) in lines {
            let line = line?;
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            let (Some(Ok(i)), Some(Ok(j)), None) = (it.next(), it.next(), it.next()) else {
                return Err(parse_err(ln, format!("expected `row col`, got {line:?}")));
            };
            if let Some(&prev) = entries.last() {
                if (i, j) <= prev {
                    return Err(parse_err(
                        ln,
                        format!("entry ({i}, {j}) breaks strictly increasing row-major order"),
                    ));
                }
            }
            entries.push((i, j));
        }
        if entries.len() != s {
            return Err(parse_err(
                hl,
                format!("header announces {s} entries, file has {}", entries.len()),
            ));
        }
        Self::new(m, n, entries).map_err(|e| parse_err(hl, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)?;
        Self::read_from(f, path)
    }
}

/// Entry-sampling operator of matrix completion.
#[derive(Clone, Debug)]
pub struct CompletionMap {
    mask: SamplingMask,
}

pub fn completion_map(mask: SamplingMask) -> CompletionMap {
    CompletionMap { mask }
}

impl CompletionMap {
    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }
}

impl LinearMeasurement for CompletionMap {
    fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    fn measurements(&self) -> usize {
        self.mask.len()
    }

    fn forward(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.mask.gather(x)
    }

    fn adjoint(&self, y: &[f64]) -> Result<DenseMatrix> {
        self.check_range(y)?;
        let (m, n) = self.dims();
        let mut out = DenseMatrix::zeros(m, n);
        for (&(i, j), &v) in self.mask.entries.iter().zip(y) {
            out[(i, j)] = v;
        }
        Ok(out)
    }
}

/// Generic map given by an explicit `d x (m n)` coefficient matrix acting on
/// the row-major vectorization of `X`.
#[derive(Clone, Debug)]
pub struct DenseMap {
    rows: usize,
    cols: usize,
    coeffs: DenseMatrix,
}

impl DenseMap {
    pub fn new(rows: usize, cols: usize, coeffs: DenseMatrix) -> Result<Self> {
        if coeffs.cols() != rows * cols {
            return Err(Error::shape(
                format!("coefficient matrix with {} columns", rows * cols),
                coeffs.cols(),
            ));
        }
        Ok(Self { rows, cols, coeffs })
    }

    /// `d x (m n)` map with independent standard normal coefficients.
    pub fn gaussian(rows: usize, cols: usize, d: usize, seed: u64) -> Self {
        let mut rng = StreamRng::new(seed, Stream::LeftFactor);
        let data = rng.normals(d * rows * cols);
        let coeffs = DenseMatrix::from_vec(d, rows * cols, data).expect("sized above");
        Self { rows, cols, coeffs }
    }

    pub fn coeffs(&self) -> &DenseMatrix {
        &self.coeffs
    }
}

impl LinearMeasurement for DenseMap {
    fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn measurements(&self) -> usize {
        self.coeffs.rows()
    }

    fn forward(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        let v = x.as_slice();
        Ok((0..self.coeffs.rows())
            .map(|k| self.coeffs.row(k).iter().zip(v).map(|(c, x)| c * x).sum())
            .collect())
    }

    fn adjoint(&self, y: &[f64]) -> Result<DenseMatrix> {
        self.check_range(y)?;
        let mut out = vec![0.0; self.rows * self.cols];
        for (k, &yk) in y.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.coeffs.row(k)) {
                *o += c * yk;
            }
        }
        DenseMatrix::from_vec(self.rows, self.cols, out)
    }
}

/// `c * A` for an inner map `A`.
#[derive(Clone, Debug)]
pub struct ScaledMap<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: LinearMeasurement> LinearMeasurement for ScaledMap<M> {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    fn measurements(&self) -> usize {
        self.inner.measurements()
    }

    fn forward(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        Ok(self
            .inner
            .forward(x)?
            .into_iter()
            .map(|v| v * self.factor)
            .collect())
    }

    fn adjoint(&self, y: &[f64]) -> Result<DenseMatrix> {
        Ok(self.inner.adjoint(y)?.scaled(self.factor))
    }
}

/// Gradient step size `mu > 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct StepSize(f64);

impl StepSize {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::ParameterDomain(format!("step size must be positive, got {mu}")));
        }
        Ok(Self(mu))
    }

    /// Accepts `mu` only if `mu < 1 / norm_sq`.
    pub fn strict(mu: f64, norm_sq: f64) -> Result<Self> {
        let s = Self::new(mu)?;
        if norm_sq > 0.0 && mu * norm_sq >= 1.0 {
            return Err(Error::ParameterDomain(format!(
                "step size {mu} must be below 1/||A||^2 = {}",
                1.0 / norm_sq
            )));
        }
        Ok(s)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Result of the power iteration on `A* A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    /// Estimate of `||A||_2^2`; a Rayleigh quotient, so never above the truth.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when `A* A` annihilated the iterate (zero map).
    pub degenerate: bool,
}

pub const POWER_ITER_MAX: usize = 200;
pub const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_SEED: u64 = 0x5eed;

/// Estimates `||A||_2^2` by power iteration on `X -> A*(A(X))` from a
/// fixed-seed random start.
pub fn operator_norm_sq<M: LinearMeasurement + ?Sized>(
    map: &M,
    iters: usize,
    tol: f64,
) -> Result<NormEstimate> {
    if iters == 0 {
        return Err(Error::ParameterDomain("power iteration needs iters >= 1".into()));
    }
    let (m, n) = map.dims();
    let mut rng = StreamRng::new(POWER_ITER_SEED, Stream::PowerIteration);
    let mut x = DenseMatrix::from_vec(m, n, rng.normals(m * n))?;
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Ok(NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    }
    x = x.scaled(1.0 / norm);
    let mut prev = f64::NAN;
    for k in 1..=iters {
        let ax = map.forward(&x)?;
        let estimate: f64 = ax.iter().map(|v| v * v).sum();
        let y = map.adjoint(&ax)?;
        let ny = y.frobenius_norm();
        if ny == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: k,
                converged: true,
                degenerate: true,
            });
        }
        if (estimate - prev).abs() <= tol * estimate {
            return Ok(NormEstimate {
                value: estimate,
                iterations: k,
                converged: true,
                degenerate: false,
            });
        }
        prev = estimate;
        x = y.scaled(1.0 / ny);
    }
    Ok(NormEstimate {
        value: prev,
        iterations: iters,
        converged: false,
        degenerate: false,
    })
}

/// `A(X) - b`.
pub fn residual<M: LinearMeasurement + ?Sized>(
    map: &M,
    x: &DenseMatrix,
    b: &[f64],
) -> Result<Vec<f64>> {
    map.check_range(b)?;
    let mut r = map.forward(x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    Ok(r)
}

/// `B_mu(X) = X + mu A*(b - A(X))`.
pub fn gradient_step<M: LinearMeasurement + ?Sized>(
    x: &DenseMatrix,
    map: &M,
    b: &[f64],
    mu: StepSize,
) -> Result<DenseMatrix> {
    map.check_domain(x)?;
    let mut r = residual(map, x, b)?;
    for v in r.iter_mut() {
        *v = -*v;
    }
    let mut out = x.clone();
    out.axpy(mu.get(), &map.adjoint(&r)?)?;
    Ok(out)
}
