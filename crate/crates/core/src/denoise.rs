//! Patch-wise FIR denoising with MSE (Wiener-Hopf) and CSIM-optimal taps.
//!
//! Each patch is treated as a stationary 1-D sequence in raster order with
//! known white noise variance. Second-order statistics are estimated from the
//! noisy patch itself, then an order-`m` causal filter is applied with zero
//! padding.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{try_map_collect, Execution};
use crate::kernel::CsimParams;
use crate::signal::{extract_patches, reassemble, Image, PatchGrid};

/// Diagonal loading relative to the trace of the normal matrix.
pub const REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchStats {
    pub mu_y: f64,
    /// Autocovariance at lags `0..m`.
    pub c_yy: Vec<f64>,
    /// Toeplitz matrix built from `c_yy`.
    pub cov: DMatrix<f64>,
    pub c_xy: Vec<f64>,
    pub sigma_n_sq: f64,
    pub sigma_x_sq: f64,
    /// Set when `sigma_n_sq > c_yy[0]` and the signal power was floored at 0.
    pub floored: bool,
}

impl PatchStats {
    pub fn order(&self) -> usize {
        self.c_yy.len()
    }

    /// Statistics from a given autocovariance; `c_yy` must be a valid
    /// (positive semidefinite) sequence.
    pub fn from_autocovariance(mu_y: f64, c_yy: Vec<f64>, sigma_n_sq: f64) -> Result<Self> {
        let m = c_yy.len();
        if m == 0 {
            return Err(Error::invalid("m", "filter order must be at least 1"));
        }
        if !(sigma_n_sq >= 0.0 && sigma_n_sq.is_finite()) {
            return Err(Error::invalid("sigma_n_sq", format!("must be >= 0, got {sigma_n_sq}")));
        }
        let cov = DMatrix::from_fn(m, m, |i, j| c_yy[i.abs_diff(j)]);
        let mut c_xy = c_yy.clone();
        let raw = c_yy[0] - sigma_n_sq;
        let floored = raw < 0.0;
        c_xy[0] = raw.max(0.0);
        Ok(Self {
            mu_y,
            c_yy,
            cov,
            c_xy,
            sigma_n_sq,
            sigma_x_sq: raw.max(0.0),
            floored,
        })
    }
}

/// Sample mean and autocovariance at lags `0..m`, each lag normalized by
/// `1 / (n - 1)` so the Toeplitz estimate stays positive semidefinite.
pub fn empirical_stats(y: &[f64], m: usize, sigma_n_sq: f64) -> Result<PatchStats> {
    if m == 0 {
        return Err(Error::invalid("m", "filter order must be at least 1"));
    }
    let n = y.len();
    if n < 2 * m || n < 2 {
        return Err(Error::invalid(
            "patch",
            format!("patch length {n} is shorter than 2m = {}", 2 * m),
        ));
    }
    let mu = y.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = y.iter().map(|v| v - mu).collect();
    let norm = 1.0 / (n as f64 - 1.0);
    let c_yy = (0..m)
        .map(|k| d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() * norm)
        .collect();
    PatchStats::from_autocovariance(mu, c_yy, sigma_n_sq)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirFilter {
    pub h: Vec<f64>,
}

impl FirFilter {
    pub fn order(&self) -> usize {
        self.h.len()
    }

    /// Causal convolution, zero before the first sample.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        (0..y.len())
            .map(|i| {
                self.h
                    .iter()
                    .enumerate()
                    .take(i + 1)
                    .map(|(k, hk)| hk * y[i - k])
                    .sum()
            })
            .collect()
    }
}

fn loading(stats: &PatchStats) -> f64 {
    let m = stats.order() as f64;
    let trace = stats.cov.trace() + m * stats.mu_y * stats.mu_y;
    (REGULARIZATION * trace).max(1e-300)
}

fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let h = match a.clone().cholesky() {
        Some(c) => c.solve(b),
        None => a.lu().solve(b).ok_or(Error::Singular)?,
    };
    if h.iter().all(|v| v.is_finite()) {
        Ok(h)
    } else {
        Err(Error::Singular)
    }
}

/// Wiener-Hopf: `(C + mu^2 11^T) h = c_xy + mu^2 1`.
pub fn mse_filter(stats: &PatchStats) -> Result<FirFilter> {
    let m = stats.order();
    let mu2 = stats.mu_y * stats.mu_y;
    let eps = loading(stats);
    let r = &stats.cov + DMatrix::from_element(m, m, mu2) + DMatrix::identity(m, m) * eps;
    let rhs = DVector::from_iterator(m, stats.c_xy.iter().map(|c| c + mu2));
    Ok(FirFilter {
        h: spd_solve(r, &rhs)?.as_slice().to_vec(),
    })
}

/// CSIM-optimal taps:
/// `(C + rho mu^2 11^T) h = c_xy + rho mu^2 1`, `rho = k1 / k2`, solved as a
/// rank-one update over a solve with `C`.
pub fn csim_filter(stats: &PatchStats, params: &CsimParams) -> Result<FirFilter> {
    let m = stats.order();
    let a = params.k1() / params.k2() * stats.mu_y * stats.mu_y;
    let base = &stats.cov + DMatrix::identity(m, m) * loading(stats);
    let chol = base.clone().cholesky();
    let solve = |b: &DVector<f64>| -> Result<DVector<f64>> {
        match &chol {
            Some(c) => Ok(c.solve(b)),
            None => spd_solve(base.clone(), b),
        }
    };
    let w = solve(&DVector::from_column_slice(&stats.c_xy))?;
    let g = solve(&DVector::from_element(m, 1.0))?;
    let coef = a * (1.0 - w.sum()) / (1.0 + a * g.sum());
    let h = w + g * coef;
    if h.iter().all(|v| v.is_finite()) {
        Ok(FirFilter {
            h: h.as_slice().to_vec(),
        })
    } else {
        Err(Error::Singular)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FilterMethod {
    Mse,
    Csim(CsimParams),
}

impl FilterMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FilterMethod::Mse => "mse",
            FilterMethod::Csim(_) => "csim",
        }
    }

    pub fn design(&self, stats: &PatchStats) -> Result<FirFilter> {
        match self {
            FilterMethod::Mse => mse_filter(stats),
            FilterMethod::Csim(p) => csim_filter(stats, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutput {
    pub image: Image,
    /// Patches whose noise variance exceeded their sample variance.
    pub floored_patches: usize,
}

/// Filters every patch of `grid` independently and reassembles.
pub fn denoise_image(
    image: &Image,
    grid: &PatchGrid,
    m: usize,
    sigma_n_sq: f64,
    method: FilterMethod,
    exec: Execution,
) -> Result<DenoiseOutput> {
    let patches = extract_patches(image, grid)?;
    let filtered = try_map_collect(&patches, exec, |p| -> Result<(Vec<f64>, bool)> {
        let stats = empirical_stats(p, m, sigma_n_sq)?;
        let h = method.design(&stats)?;
        Ok((h.apply(p), stats.floored))
    })?;
    let floored_patches = filtered.iter().filter(|(_, f)| *f).count();
    let out: Vec<Vec<f64>> = filtered.into_iter().map(|(p, _)| p).collect();
    Ok(DenoiseOutput {
        image: reassemble(&out, grid)?,
        floored_patches,
    })
}
