//! The convex similarity index and its identity-plus-rank-one kernel.
//!
//! For a residual `e = x - y` of length `n` the index is
//!
//! ```text
//! CSIM(e) = k1 * mean(e)^2 + k2 / (n - 1) * ||e - mean(e) * 1||^2
//!         = e^T W e,   W = theta1 * I + theta2 * 1 1^T
//! ```
//!
//! with `theta1 = k2 / (n - 1)` and `theta2 = k1 / n^2 - k2 / (n (n - 1))`.
//! `W` has eigenvalue `k1 / n` along the all-ones direction and `k2 / (n - 1)`
//! on its orthogonal complement, so it is positive definite for positive
//! weights. Nothing in this module materializes the `n x n` matrix.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Weights of the mean and variance terms, plus the patch dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsimParams {
    k1: f64,
    k2: f64,
    n: usize,
}

impl CsimParams {
    pub fn new(k1: f64, k2: f64, n: usize) -> Result<Self> {
        if !(k1.is_finite() && k1 > 0.0) {
            return Err(Error::invalid("k1", format!("must be positive, got {k1}")));
        }
        if !(k2.is_finite() && k2 > 0.0) {
            return Err(Error::invalid("k2", format!("must be positive, got {k2}")));
        }
        if n < 2 {
            return Err(Error::invalid(
                "n",
                format!("unbiased variance needs n >= 2, got {n}"),
            ));
        }
        Ok(Self { k1, k2, n })
    }

    /// `k2 = n - 1`, `k1 = 0.25 * k2`: the empirical weights used for the
    /// recovery experiments.
    pub fn default_for(n: usize) -> Result<Self> {
        Self::with_ratio(n, 4.0)
    }

    /// `k2 = n - 1` and `k1 = k2 / ratio`.
    pub fn with_ratio(n: usize, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::invalid("ratio", format!("must be positive, got {ratio}")));
        }
        let k2 = n.saturating_sub(1) as f64;
        Self::new(k2 / ratio, k2, n)
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `k2 / k1`.
    pub fn ratio(&self) -> f64 {
        self.k2 / self.k1
    }

    /// Fails unless `k2 > k1`, the regime where noise is penalized more
    /// heavily than a uniform brightness shift.
    pub fn require_noise_biased(&self) -> Result<()> {
        if self.k2 > self.k1 {
            Ok(())
        } else {
            Err(Error::invalid(
                "k2",
                format!("noise-biased sensitivity needs k2 > k1 (k1 = {}, k2 = {})", self.k1, self.k2),
            ))
        }
    }
}

/// Implicit `W = theta1 * I + theta2 * 1 1^T` and its symmetric square root
/// `W^{1/2} = sqrt_diag * I + sqrt_rank1 * 1 1^T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsimKernel {
    params: CsimParams,
    theta1: f64,
    theta2: f64,
    sqrt_diag: f64,
    sqrt_rank1: f64,
}

impl CsimKernel {
    pub fn new(params: CsimParams) -> Self {
        let n = params.n as f64;
        let (k1, k2) = (params.k1, params.k2);
        let theta1 = k2 / (n - 1.0);
        let theta2 = k1 / (n * n) - k2 / (n * (n - 1.0));
        let sqrt_diag = theta1.sqrt();
        let sqrt_rank1 = ((k1 / n).sqrt() - sqrt_diag) / n;
        Self {
            params,
            theta1,
            theta2,
            sqrt_diag,
            sqrt_rank1,
        }
    }

    pub fn params(&self) -> &CsimParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn sqrt_diag(&self) -> f64 {
        self.sqrt_diag
    }

    pub fn sqrt_rank1(&self) -> f64 {
        self.sqrt_rank1
    }
}

impl From<CsimParams> for CsimKernel {
    fn from(params: CsimParams) -> Self {
        Self::new(params)
    }
}

/// Spectrum of `W`: `repeated` has multiplicity `n - 1`, `mean_dir` belongs
/// to the all-ones eigenvector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEigenvalues {
    pub repeated: f64,
    pub mean_dir: f64,
}

impl KernelEigenvalues {
    pub fn max(&self) -> f64 {
        self.repeated.max(self.mean_dir)
    }

    pub fn min(&self) -> f64 {
        self.repeated.min(self.mean_dir)
    }

    pub fn condition_number(&self) -> f64 {
        self.max() / self.min()
    }
}

fn mean(e: &[f64]) -> f64 {
    e.iter().sum::<f64>() / e.len() as f64
}

/// Statistical form: `k1 * mean(e)^2 + k2 / (n - 1) * ||e - mean(e)||^2`.
pub fn csim_stats(e: &[f64], params: &CsimParams) -> Result<f64> {
    check_len(params.n, e.len())?;
    let mu = mean(e);
    let centered: f64 = e.iter().map(|&v| (v - mu) * (v - mu)).sum();
    Ok(params.k1 * mu * mu + params.k2 / (params.n as f64 - 1.0) * centered)
}

/// Quadratic form `e^T W e = theta1 * ||e||^2 + theta2 * (1^T e)^2`.
pub fn quadratic_form(e: &[f64], kernel: &CsimKernel) -> Result<f64> {
    check_len(kernel.n(), e.len())?;
    let sum: f64 = e.iter().sum();
    let sq: f64 = e.iter().map(|v| v * v).sum();
    Ok(kernel.theta1 * sq + kernel.theta2 * sum * sum)
}

/// `CSIM(x, y)`, a function of `x - y` only.
pub fn csim_pair(x: &[f64], y: &[f64], params: &CsimParams) -> Result<f64> {
    check_len(x.len(), y.len())?;
    let e: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    csim_stats(&e, params)
}

/// `W e` in O(n).
pub fn apply_kernel(e: &[f64], kernel: &CsimKernel) -> Result<Vec<f64>> {
    check_len(kernel.n(), e.len())?;
    let shift = kernel.theta2 * e.iter().sum::<f64>();
    Ok(e.iter().map(|&v| kernel.theta1 * v + shift).collect())
}

/// `W^{1/2} e` in O(n).
pub fn apply_kernel_sqrt(e: &[f64], kernel: &CsimKernel) -> Result<Vec<f64>> {
    check_len(kernel.n(), e.len())?;
    let shift = kernel.sqrt_rank1 * e.iter().sum::<f64>();
    Ok(e.iter().map(|&v| kernel.sqrt_diag * v + shift).collect())
}

pub fn kernel_eigenvalues(kernel: &CsimKernel) -> KernelEigenvalues {
    let n = kernel.n() as f64;
    KernelEigenvalues {
        repeated: kernel.params.k2 / (n - 1.0),
        mean_dir: kernel.params.k1 / n,
    }
}

/// Expected CSIM of an i.i.d. `+-a` perturbation over the CSIM of a constant
/// `a` perturbation: `trace(W) / 1^T W 1 = k2 / k1 + 1 / n`.
pub fn sensitivity_ratio(params: &CsimParams) -> f64 {
    params.k2 / params.k1 + 1.0 / params.n as f64
}
