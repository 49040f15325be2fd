//! MSE, PSNR, single-window SSIM and relative coefficient error.

use serde::Serialize;

use crate::error::{check_len, Error, Result};

pub const DEFAULT_PEAK: f64 = 255.0;

/// Value written to CSV in place of an infinite PSNR.
pub const PSNR_CSV_CAP: f64 = 99.0;

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    if x.is_empty() {
        return Err(Error::invalid("signal", "empty input"));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64)
}

/// `10 log10(peak^2 / mse)`; `+inf` when the inputs are identical.
pub fn psnr(x: &[f64], y: &[f64], peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::invalid("peak", format!("must be positive, got {peak}")));
    }
    let e = mse(x, y)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / e).log10()
    })
}

/// PSNR for CSV output, with `+inf` capped at [`PSNR_CSV_CAP`].
pub fn psnr_for_csv(v: f64) -> f64 {
    if v.is_infinite() && v > 0.0 {
        PSNR_CSV_CAP
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsimConstants {
    pub c1: f64,
    pub c2: f64,
}

impl SsimConstants {
    /// `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2`.
    pub fn for_range(dynamic_range: f64) -> Self {
        Self {
            c1: (0.01 * dynamic_range).powi(2),
            c2: (0.03 * dynamic_range).powi(2),
        }
    }
}

impl Default for SsimConstants {
    fn default() -> Self {
        Self::for_range(DEFAULT_PEAK)
    }
}

/// SSIM over the whole vector as one window, unbiased moments.
pub fn ssim_global(x: &[f64], y: &[f64], c: SsimConstants) -> Result<f64> {
    check_len(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::invalid("signal", "SSIM needs at least two samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cov += da * db;
    }
    let (vx, vy, cov) = (vx / (n - 1.0), vy / (n - 1.0), cov / (n - 1.0));
    Ok((2.0 * mx * my + c.c1) * (2.0 * cov + c.c2)
        / ((mx * mx + my * my + c.c1) * (vx + vy + c.c2)))
}

/// `||s_hat - s|| / ||s||`.
pub fn relative_error(s_hat: &[f64], s_true: &[f64]) -> Result<f64> {
    check_len(s_true.len(), s_hat.len())?;
    let norm = s_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("s_true", "relative error of a zero reference"));
    }
    let diff = s_hat
        .iter()
        .zip(s_true)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityScore {
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
    /// `None` when no ground-truth code exists.
    pub rel_err: Option<f64>,
}

/// Scores `estimate` against `reference` with the given peak and SSIM range.
pub fn score(reference: &[f64], estimate: &[f64], peak: f64, ssim: SsimConstants) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr_db: psnr(reference, estimate, peak)?,
        ssim: ssim_global(reference, estimate, ssim)?,
        mse: mse(reference, estimate)?,
        rel_err: None,
    })
}
