//! Single-input runs: recovery of a CSV signal or a PGM image from random
//! samples, and patch-wise denoising.

use nalgebra::DVector;
use serde::Serialize;

use super::{SolverKind, SolverOverrides};
use crate::baselines::{fista_solve_observed, iht_adaptive_solve_observed, BaselineResult};
use crate::denoise::{denoise_image, FilterMethod};
use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::exec::{try_map_collect, Execution};
use crate::kernel::CsimParams;
use crate::metrics::{psnr, score, ssim_global, QualityScore, SsimConstants, DEFAULT_PEAK};
use crate::signal::{
    add_gaussian_noise, apply_mask, extract_patches, noise_variance_for_snr, observed_count,
    random_mask_with, reassemble, substream, Image, PatchGrid, Purpose, SamplingMask,
};
use crate::solver::solve_observed;

/// Output of any of the three solvers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverRun {
    pub solver: SolverKind,
    pub s_hat: Vec<f64>,
    /// `D s_hat`.
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    /// CSIM-ALM only.
    pub converged: Option<bool>,
    /// CSIM-ALM primal residuals per iteration.
    pub residual_history: Vec<(f64, f64)>,
    pub objective_history: Vec<f64>,
}

impl SolverRun {
    fn from_baseline(solver: SolverKind, r: BaselineResult) -> Self {
        Self {
            solver,
            s_hat: r.s_hat,
            x_hat: r.x_hat,
            iterations: r.iterations,
            converged: None,
            residual_history: Vec::new(),
            objective_history: r.objective_history,
        }
    }
}

/// Runs `kind` on the observed samples `y`. `observer(t, s_t)` sees every
/// iterate, `t` starting at 1.
pub fn run_solver<F>(
    kind: SolverKind,
    y: &[f64],
    mask: &SamplingMask,
    dict: &Dictionary,
    overrides: &SolverOverrides,
    max_iter: usize,
    mut observer: F,
) -> Result<SolverRun>
where
    F: FnMut(usize, &DVector<f64>),
{
    match kind {
        SolverKind::CsimAlm => {
            let cfg = overrides.csim_alm(dict.n(), mask.m(), max_iter);
            let r = solve_observed(y, mask, dict, &cfg, |tr| observer(tr.iter, &tr.state.s))?;
            let x_hat = r.synthesized(dict);
            Ok(SolverRun {
                solver: kind,
                s_hat: r.s_hat,
                x_hat,
                iterations: r.iterations,
                converged: Some(r.converged),
                residual_history: r.residual_history,
                objective_history: r.objective_history,
            })
        }
        SolverKind::Fista => {
            let r = fista_solve_observed(y, mask, dict, &overrides.fista(max_iter), observer)?;
            Ok(SolverRun::from_baseline(kind, r))
        }
        SolverKind::Iht => {
            let r = iht_adaptive_solve_observed(y, mask, dict, &overrides.iht(max_iter), observer)?;
            Ok(SolverRun::from_baseline(kind, r))
        }
    }
}

/// Observed samples kept, the rest taken from `D s_hat`.
fn fill_missing(y: &[f64], model: &[f64], mask: &SamplingMask) -> Vec<f64> {
    model
        .iter()
        .zip(y)
        .zip(mask.flags())
        .map(|((m, y), &obs)| if obs { *y } else { *m })
        .collect()
}

fn dynamic_range(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    hi - lo
}

/// `max - min` of a signal of arbitrary scale; `1` for a constant signal.
pub(crate) fn signal_range(x: &[f64]) -> f64 {
    let l = dynamic_range(x);
    if l > 0.0 {
        l
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalRecovery {
    pub run: SolverRun,
    pub mask: SamplingMask,
    /// Observed samples kept, missing ones filled from the model.
    pub output: Vec<f64>,
    /// `||M (output - x)|| / ||M x||`.
    pub data_fidelity: f64,
    /// Against the full input, peak and SSIM range from the input's range.
    pub scores: QualityScore,
}

fn fidelity(x: &[f64], out: &[f64], mask: &SamplingMask) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &i in mask.observed() {
        num += (out[i] - x[i]).powi(2);
        den += x[i] * x[i];
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Recovers a length-`n` signal from a random subset of `round(sr n)` of its
/// samples. The mask comes from the `(seed, 0, Mask, 0)` stream.
pub fn recover_signal(
    x: &[f64],
    sr: f64,
    seed: u64,
    dict: &Dictionary,
    kind: SolverKind,
    overrides: &SolverOverrides,
    max_iter: usize,
) -> Result<SignalRecovery> {
    check_len(dict.n(), x.len())?;
    let n = x.len();
    let mask = random_mask_with(n, observed_count(n, sr)?, &mut substream(seed, 0, Purpose::Mask, 0))?;
    let y = apply_mask(x, &mask)?;
    let run = run_solver(kind, &y, &mask, dict, overrides, max_iter, |_, _| {})?;
    let output = fill_missing(&y, &run.x_hat, &mask);
    let l = signal_range(x);
    let scores = score(x, &output, l, SsimConstants::for_range(l))?;
    Ok(SignalRecovery {
        data_fidelity: fidelity(x, &output, &mask),
        run,
        mask,
        output,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecovery {
    pub image: Image,
    /// Input with the unobserved pixels zeroed.
    pub masked: Image,
    /// Observed samples summed over patches.
    pub observed_samples: usize,
    /// Iterations used per patch, in raster order.
    pub patch_iterations: Vec<usize>,
    /// Against the input, `L = 255`.
    pub scores: QualityScore,
}

/// Tiles the image with `side x side` patches (`side^2 = dict.n()`), samples
/// each patch at `sr` with its own mask stream `(seed, 0, Mask, patch)` and
/// recovers the patches independently.
pub fn recover_image(
    image: &Image,
    sr: f64,
    seed: u64,
    dict: &Dictionary,
    kind: SolverKind,
    overrides: &SolverOverrides,
    max_iter: usize,
    exec: Execution,
) -> Result<ImageRecovery> {
    let n = dict.n();
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::invalid(
            "n",
            format!("image recovery needs a square patch size, got n = {n}"),
        ));
    }
    let grid = PatchGrid::tiling(image.height, image.width, side)?;
    let patches = extract_patches(image, &grid)?;
    let m = observed_count(n, sr)?;
    let jobs: Vec<(usize, &Vec<f64>)> = patches.iter().enumerate().collect();
    let done = try_map_collect(&jobs, exec, |&(idx, patch)| -> Result<_> {
        let mask = random_mask_with(n, m, &mut substream(seed, 0, Purpose::Mask, idx as u64))?;
        let y = apply_mask(patch, &mask)?;
        let run = run_solver(kind, &y, &mask, dict, overrides, max_iter, |_, _| {})?;
        Ok((fill_missing(&y, &run.x_hat, &mask), y, run.iterations, mask.m()))
    })?;
    let mut filled = Vec::with_capacity(done.len());
    let mut masked = Vec::with_capacity(done.len());
    let mut patch_iterations = Vec::with_capacity(done.len());
    let mut observed_samples = 0;
    for (f, y, it, m) in done {
        filled.push(f);
        masked.push(y);
        patch_iterations.push(it);
        observed_samples += m;
    }
    let out = reassemble(&filled, &grid)?;
    let masked = reassemble(&masked, &grid)?;
    let scores = score(&image.data, &out.data, DEFAULT_PEAK, SsimConstants::default())?;
    Ok(ImageRecovery {
        image: out,
        masked,
        observed_samples,
        patch_iterations,
        scores,
    })
}

/// Mean single-window SSIM over a non-overlapping `8 x 8` tiling, `L = 255`.
pub fn mean_patch_ssim(reference: &Image, estimate: &Image) -> Result<f64> {
    let grid = PatchGrid::tiling(reference.height, reference.width, PatchGrid::DEFAULT_SIDE)?;
    let a = extract_patches(reference, &grid)?;
    let b = extract_patches(estimate, &grid)?;
    let c = SsimConstants::default();
    let total = a
        .iter()
        .zip(&b)
        .map(|(x, y)| ssim_global(x, y, c))
        .sum::<Result<f64>>()?;
    Ok(total / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DenoiseScores {
    pub sigma_n_sq: f64,
    pub psnr_noisy: f64,
    pub psnr_mse: f64,
    pub psnr_csim: f64,
    pub ssim_noisy: f64,
    pub ssim_mse: f64,
    pub ssim_csim: f64,
    pub floored_patches: usize,
}

/// Denoising grid: `8 x 8` patches at stride 4.
pub fn denoise_grid(image: &Image) -> Result<PatchGrid> {
    let side = PatchGrid::DEFAULT_SIDE;
    PatchGrid::new(image.height, image.width, side, side / 2)
}

/// Adds white Gaussian noise at `snr_db` (against the image variance) from
/// stream `(seed, trial, Noise, 0)`, then runs both filters of order `m`.
pub fn denoise_experiment(
    clean: &Image,
    snr_db: f64,
    m: usize,
    params: &CsimParams,
    seed: u64,
    trial: u64,
    exec: Execution,
) -> Result<DenoiseScores> {
    let sigma_n_sq = noise_variance_for_snr(&clean.data, snr_db)?;
    let mut rng = substream(seed, trial, Purpose::Noise, 0);
    let noisy = Image::new(
        clean.width,
        clean.height,
        add_gaussian_noise(&clean.data, sigma_n_sq.sqrt(), &mut rng)?,
    )?;
    let grid = denoise_grid(clean)?;
    let mse = denoise_image(&noisy, &grid, m, sigma_n_sq, FilterMethod::Mse, exec)?;
    let csim = denoise_image(&noisy, &grid, m, sigma_n_sq, FilterMethod::Csim(*params), exec)?;
    Ok(DenoiseScores {
        sigma_n_sq,
        psnr_noisy: psnr(&clean.data, &noisy.data, DEFAULT_PEAK)?,
        psnr_mse: psnr(&clean.data, &mse.image.data, DEFAULT_PEAK)?,
        psnr_csim: psnr(&clean.data, &csim.image.data, DEFAULT_PEAK)?,
        ssim_noisy: mean_patch_ssim(clean, &noisy)?,
        ssim_mse: mean_patch_ssim(clean, &mse.image)?,
        ssim_csim: mean_patch_ssim(clean, &csim.image)?,
        floored_patches: mse.floored_patches,
    })
}
