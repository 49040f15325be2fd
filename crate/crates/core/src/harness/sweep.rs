//! Synthetic sweeps over sampling ratio and iteration count.
//!
//! Trial `t` draws its sparse code from stream `(seed, t, Signal, 0)` and,
//! at the `j`-th sampling ratio, its mask from `(seed, t, Mask, j)`. Every
//! solver sees the same signal and mask, and rows come back in a fixed order
//! whatever the execution mode.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use super::recover::{run_solver, signal_range};
use super::{ExperimentSpec, SolverKind};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::exec::try_map_collect;
use crate::metrics::{psnr_for_csv, relative_error, score, SsimConstants};
use crate::signal::{
    apply_mask, observed_count, random_mask_with, substream, synth_sparse_signal_with, Purpose,
    SamplingMask, SyntheticSparseSignal,
};

pub const SWEEP_CSV_HEADER: &str = "trial,seed,solver,sr,n,p,dict,iters,psnr_db,ssim,relerr,runtime_ms";
pub const ITERS_CSV_HEADER: &str = "trial,seed,solver,sr,iter,relerr,elapsed_ms";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub trial: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub sr: f64,
    pub n: usize,
    pub p: usize,
    pub dict: String,
    pub iters: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub relerr: f64,
    /// Only measured when timing is on.
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRow {
    pub trial: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub sr: f64,
    pub iter: usize,
    pub relerr: f64,
    /// Wall-clock time since the solver started.
    pub elapsed_ms: f64,
}

struct Instance {
    signal: SyntheticSparseSignal,
    mask: SamplingMask,
    y: Vec<f64>,
}

fn instance(spec: &ExperimentSpec, dict: &Dictionary, trial: usize, sr_index: usize) -> Result<Instance> {
    let t = trial as u64;
    let signal = synth_sparse_signal_with(dict, spec.sparsity(), &mut substream(spec.seed, t, Purpose::Signal, 0))?;
    let n = dict.n();
    let m = observed_count(n, spec.srs[sr_index])?;
    let mask = random_mask_with(n, m, &mut substream(spec.seed, t, Purpose::Mask, sr_index as u64))?;
    let y = apply_mask(signal.x.as_slice(), &mask)?;
    Ok(Instance { signal, mask, y })
}

/// `(solver, sr index, trial)` in output order.
fn jobs(spec: &ExperimentSpec) -> Vec<(SolverKind, usize, usize)> {
    let mut out = Vec::with_capacity(spec.solvers.len() * spec.srs.len() * spec.trials);
    for &s in &spec.solvers {
        for j in 0..spec.srs.len() {
            for t in 0..spec.trials {
                out.push((s, j, t));
            }
        }
    }
    out
}

fn setup(spec: &ExperimentSpec) -> Result<Dictionary> {
    spec.validate()?;
    spec.dict.build(spec.n, spec.p)
}

/// One row per `(solver, sr, trial)`, scored as `D s_hat` against `D s`
/// with peak and SSIM range equal to the range of `D s`.
pub fn sweep_sr(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let dict = setup(spec)?;
    try_map_collect(&jobs(spec), spec.exec, |&(solver, j, trial)| {
        let inst = instance(spec, &dict, trial, j)?;
        let started = Instant::now();
        let run = run_solver(solver, &inst.y, &inst.mask, &dict, &spec.overrides, spec.max_iter, |_, _| {})?;
        let runtime_ms = spec.timing.then(|| started.elapsed().as_secs_f64() * 1e3);
        let x = inst.signal.x.as_slice();
        let l = signal_range(x);
        let q = score(x, &run.x_hat, l, SsimConstants::for_range(l))?;
        Ok(SweepRow {
            trial,
            seed: spec.seed,
            solver,
            sr: spec.srs[j],
            n: dict.n(),
            p: dict.p(),
            dict: spec.dict.name().to_string(),
            iters: run.iterations,
            psnr_db: q.psnr_db,
            ssim: q.ssim,
            relerr: relative_error(&run.s_hat, inst.signal.s.as_slice())?,
            runtime_ms,
        })
    })
}

/// Per-iteration relative error traces. CSIM-ALM runs without its
/// feasibility stop so every trace spans `1..=max_iter`.
pub fn sweep_iters(spec: &ExperimentSpec) -> Result<Vec<IterRow>> {
    let dict = setup(spec)?;
    let mut overrides = spec.overrides.clone();
    overrides.feasibility_tol = Some(0.0);
    let traces = try_map_collect(&jobs(spec), spec.exec, |&(solver, j, trial)| -> Result<Vec<IterRow>> {
        let inst = instance(spec, &dict, trial, j)?;
        let s_true = inst.signal.s.as_slice();
        let norm = inst.signal.s.norm();
        let mut rows = Vec::with_capacity(spec.max_iter);
        let started = Instant::now();
        run_solver(solver, &inst.y, &inst.mask, &dict, &overrides, spec.max_iter, |iter, s: &DVector<f64>| {
            let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
            let err = s
                .iter()
                .zip(s_true)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            rows.push(IterRow {
                trial,
                seed: spec.seed,
                solver,
                sr: spec.srs[j],
                iter,
                relerr: err / norm,
                elapsed_ms,
            });
        })?;
        Ok(rows)
    })?;
    Ok(traces.into_iter().flatten().collect())
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<sweep output>", e)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}").map_err(io_err)?;
    for r in rows {
        let runtime = r
            .runtime_ms
            .map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6e},{}",
            r.trial,
            r.seed,
            r.solver,
            r.sr,
            r.n,
            r.p,
            r.dict,
            r.iters,
            psnr_for_csv(r.psnr_db),
            r.ssim,
            r.relerr,
            runtime
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn write_iters_csv<W: Write>(rows: &[IterRow], mut out: W) -> Result<()> {
    writeln!(out, "{ITERS_CSV_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.6e},{:.6}",
            r.trial, r.seed, r.solver, r.sr, r.iter, r.relerr, r.elapsed_ms
        )
        .map_err(io_err)?;
    }
    Ok(())
}
