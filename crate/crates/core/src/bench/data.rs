//! Synthetic ground truth, sampling, noise and error metrics.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::operators::SamplingMask;
use crate::rng::{Stream, StreamRng};

/// `M = L R^T` with `L` (`m x r`) and `R` (`n x r`) standard normal, drawn
/// row-major from the left- and right-factor streams of `seed`.
pub fn gen_low_rank(m: usize, n: usize, r: usize, seed: u64) -> Result<DenseMatrix> {
    if r > m.min(n) {
        return Err(Error::InvalidInput(format!(
            "rank {r} exceeds min({m}, {n})"
        )));
    }
    if r == 0 {
        return Ok(DenseMatrix::zeros(m, n));
    }
    let left = DenseMatrix::from_vec(m, r, StreamRng::new(seed, Stream::LeftFactor).normals(m * r))?;
    let right =
        DenseMatrix::from_vec(n, r, StreamRng::new(seed, Stream::RightFactor).normals(n * r))?;
    left.matmul(&right.transpose())
}

/// `round(sr m n)`, halves rounded up.
pub fn sample_count(m: usize, n: usize, sr: f64) -> usize {
    (sr * (m * n) as f64).round() as usize
}

/// Uniform sample of `round(sr m n)` distinct entries without replacement
/// (partial Fisher–Yates over the row-major index range).
pub fn gen_mask(m: usize, n: usize, sr: f64, seed: u64) -> Result<SamplingMask> {
    if !(0.0..=1.0).contains(&sr) {
        return Err(Error::ParameterDomain(format!(
            "sampling ratio must lie in [0, 1], got {sr}"
        )));
    }
    let total = m * n;
    let s = sample_count(m, n, sr).min(total);
    let mut idx: Vec<usize> = (0..total).collect();
    let mut rng = StreamRng::new(seed, Stream::Mask);
    for i in 0..s {
        let j = i + rng.below((total - i) as u64) as usize;
        idx.swap(i, j);
    }
    let entries = idx[..s].iter().map(|&k| (k / n, k % n)).collect();
    SamplingMask::new(m, n, entries)
}

/// Observations `b_k = M[mask_k] + xi1 E_k` with `E_k` standard normal from
/// the noise stream of `seed`.
pub fn add_noise(m: &DenseMatrix, mask: &SamplingMask, xi1: f64, seed: u64) -> Result<Vec<f64>> {
    if !(xi1 >= 0.0 && xi1.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "noise level must be nonnegative, got {xi1}"
        )));
    }
    let mut b = mask.gather(m)?;
    if xi1 > 0.0 {
        let mut rng = StreamRng::new(seed, Stream::Noise);
        for v in &mut b {
            *v += xi1 * rng.standard_normal();
        }
    }
    Ok(b)
}

/// `||X - M||_F / ||M||_F`.
pub fn relative_error(x: &DenseMatrix, m: &DenseMatrix) -> Result<f64> {
    let denom = m.frobenius_norm();
    let num = x.distance(m)?;
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "relative error against a zero matrix".into(),
        ));
    }
    Ok(num / denom)
}

/// `s / (r (m + n - r))`: samples per degree of freedom of a rank-`r` matrix.
pub fn freedom_ratio(s: usize, m: usize, n: usize, r: usize) -> Result<f64> {
    let dof = (r as f64) * ((m + n) as f64 - r as f64);
    if !(dof > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "r (m + n - r) must be positive, got r={r}, m={m}, n={n}"
        )));
    }
    Ok(s as f64 / dof)
}

/// Best rank-`r` approximation by truncated SVD.
pub fn low_rank_approx(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let (rows, cols) = m.shape();
    if r > rows.min(cols) {
        return Err(Error::InvalidInput(format!(
            "rank {r} exceeds min({rows}, {cols})"
        )));
    }
    let svd = m.svd()?;
    let w: Vec<f64> = svd
        .s
        .values()
        .iter()
        .enumerate()
        .map(|(i, &s)| if i < r { s } else { 0.0 })
        .collect();
    svd.reconstruct(&w, crate::par::Execution::Sequential)
}

/// Root-mean-square entry.
pub fn rms(m: &DenseMatrix) -> f64 {
    let len = m.as_slice().len();
    if len == 0 {
        0.0
    } else {
        (m.frobenius_norm_sq() / len as f64).sqrt()
    }
}
