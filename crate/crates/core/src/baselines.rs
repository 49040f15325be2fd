//! Reference solvers for `min 1/2 ||M D s - y||^2 + alpha ||s||_1`:
//! ISTA, FISTA with function restart, and an IMAT-style iterative hard
//! thresholding with a decaying threshold.

use nalgebra::DVector;
use serde::Serialize;

use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::signal::SamplingMask;
use crate::solver::soft_threshold;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub s_hat: Vec<f64>,
    /// `D s_hat`.
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    /// Objective (with the `alpha` in force) per iteration; empty for IHT.
    pub objective_history: Vec<f64>,
}

/// `alpha` schedule for the proximal-gradient solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AlphaRule {
    Fixed(f64),
    /// `alpha_0 = scale * ||D^T M^T y||_inf`, then `max(eta alpha, floor)`.
    Continuation { scale: f64, eta: f64, floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FistaConfig {
    pub alpha: AlphaRule,
    /// `None` means `1 / ||D||^2`.
    pub step: Option<f64>,
    pub max_iter: usize,
    pub restart: bool,
}

/// Same continuation path as the CSIM-ALM defaults.
impl Default for FistaConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaRule::Continuation {
                scale: 0.1,
                eta: 0.95,
                floor: 1e-4,
            },
            step: None,
            max_iter: 50,
            restart: true,
        }
    }
}

impl FistaConfig {
    pub fn fixed(alpha: f64, max_iter: usize) -> Self {
        Self {
            alpha: AlphaRule::Fixed(alpha),
            max_iter,
            ..Self::default()
        }
    }
}

/// Masked least-squares pieces shared by the solvers.
struct Problem<'a> {
    dict: &'a Dictionary,
    mask: &'a SamplingMask,
    y: DVector<f64>,
}

impl<'a> Problem<'a> {
    fn new(y: &[f64], mask: &'a SamplingMask, dict: &'a Dictionary) -> Result<Self> {
        check_len(dict.n(), y.len())?;
        check_len(dict.n(), mask.n())?;
        let mut y = DVector::from_column_slice(y);
        mask.project(&mut y);
        Ok(Self { dict, mask, y })
    }

    /// `M D s - y`.
    fn residual(&self, s: &DVector<f64>) -> DVector<f64> {
        let mut r = self.dict.synthesize(s);
        self.mask.project(&mut r);
        r - &self.y
    }

    /// Gradient `D^T M^T (M D s - y)` and smooth value at `s`.
    fn grad(&self, s: &DVector<f64>) -> (DVector<f64>, f64) {
        let r = self.residual(s);
        (self.dict.analyze(&r), 0.5 * r.norm_squared())
    }

    fn objective(&self, s: &DVector<f64>, alpha: f64) -> f64 {
        0.5 * self.residual(s).norm_squared() + alpha * s.lp_norm(1)
    }

    fn correlation(&self) -> f64 {
        self.dict.analyze(&self.y).amax()
    }

    fn step(&self, step: Option<f64>) -> Result<f64> {
        let t = step.unwrap_or(1.0 / self.dict.spectral_norm_sq());
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(Error::invalid("step", format!("must be positive, got {t}")))
        }
    }

    fn finish(&self, s: DVector<f64>, iterations: usize, objective_history: Vec<f64>) -> BaselineResult {
        BaselineResult {
            x_hat: self.dict.synthesize(&s).as_slice().to_vec(),
            s_hat: s.as_slice().to_vec(),
            iterations,
            objective_history,
        }
    }
}

fn alpha_start(rule: AlphaRule, corr: f64) -> Result<f64> {
    let a = match rule {
        AlphaRule::Fixed(a) => a,
        AlphaRule::Continuation { scale, floor, eta } => {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::invalid("eta", format!("must be in (0, 1), got {eta}")));
            }
            (scale * corr).max(floor)
        }
    };
    if a >= 0.0 && a.is_finite() {
        Ok(a)
    } else {
        Err(Error::invalid("alpha", format!("must be >= 0, got {a}")))
    }
}

fn alpha_next(rule: AlphaRule, alpha: f64) -> f64 {
    match rule {
        AlphaRule::Fixed(a) => a,
        AlphaRule::Continuation { eta, floor, .. } => (eta * alpha).max(floor),
    }
}

fn check_finite(s: &DVector<f64>, solver: &'static str, iteration: usize) -> Result<()> {
    if s.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { solver, iteration })
    }
}

/// Plain proximal gradient.
pub fn ista_solve(y: &[f64], mask: &SamplingMask, dict: &Dictionary, config: &FistaConfig) -> Result<BaselineResult> {
    let prob = Problem::new(y, mask, dict)?;
    let step = prob.step(config.step)?;
    let mut alpha = alpha_start(config.alpha, prob.correlation())?;
    let mut s = DVector::zeros(dict.p());
    let mut history = Vec::with_capacity(config.max_iter);
    for t in 1..=config.max_iter {
        let (g, _) = prob.grad(&s);
        s = soft_threshold(&(&s - g * step), alpha * step)?;
        check_finite(&s, "ista", t)?;
        history.push(prob.objective(&s, alpha));
        alpha = alpha_next(config.alpha, alpha);
    }
    Ok(prob.finish(s, config.max_iter, history))
}

pub fn fista_solve(y: &[f64], mask: &SamplingMask, dict: &Dictionary, config: &FistaConfig) -> Result<BaselineResult> {
    fista_solve_observed(y, mask, dict, config, |_, _| {})
}

/// FISTA; with `restart`, a step that raises the objective resets the
/// momentum and is replaced by a plain proximal step from the last iterate.
pub fn fista_solve_observed<F>(
    y: &[f64],
    mask: &SamplingMask,
    dict: &Dictionary,
    config: &FistaConfig,
    mut observer: F,
) -> Result<BaselineResult>
where
    F: FnMut(usize, &DVector<f64>),
{
    let prob = Problem::new(y, mask, dict)?;
    let step = prob.step(config.step)?;
    let mut alpha = alpha_start(config.alpha, prob.correlation())?;
    let p = dict.p();
    let mut x_prev = DVector::zeros(p);
    let mut f_prev = prob.objective(&x_prev, alpha);
    let mut v = x_prev.clone();
    let mut t = 1.0f64;
    let mut history = Vec::with_capacity(config.max_iter);

    for it in 1..=config.max_iter {
        let (g, _) = prob.grad(&v);
        let mut x = soft_threshold(&(&v - g * step), alpha * step)?;
        let mut f = prob.objective(&x, alpha);
        if config.restart && f > f_prev {
            let (g, _) = prob.grad(&x_prev);
            x = soft_threshold(&(&x_prev - g * step), alpha * step)?;
            f = prob.objective(&x, alpha);
            t = 1.0;
            v = x.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            v = &x + (&x - &x_prev) * ((t - 1.0) / t_next);
            t = t_next;
        }
        check_finite(&x, "fista", it)?;
        history.push(f);
        observer(it, &x);
        x_prev = x;
        let next = alpha_next(config.alpha, alpha);
        if next != alpha {
            alpha = next;
            f_prev = prob.objective(&x_prev, alpha);
        } else {
            f_prev = f;
        }
    }
    Ok(prob.finish(x_prev, config.max_iter, history))
}

/// IMAT-style schedule: `tau_t = max(tau0 exp(-decay t), tau_min)` with
/// `tau0 = tau_scale * ||D^T M^T y||_inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IhtConfig {
    pub tau_scale: f64,
    pub decay: f64,
    pub tau_min: f64,
    /// `None` means `1 / ||D||^2`.
    pub step: Option<f64>,
    pub max_iter: usize,
}

impl Default for IhtConfig {
    fn default() -> Self {
        Self {
            tau_scale: 0.5,
            decay: 0.2,
            tau_min: 1e-3,
            step: None,
            max_iter: 50,
        }
    }
}

/// Zeroes entries with `|v_i| < tau`, keeps the rest exactly.
pub fn hard_threshold(v: &DVector<f64>, tau: f64) -> DVector<f64> {
    v.map(|e| if e.abs() < tau { 0.0 } else { e })
}

pub fn iht_adaptive_solve(y: &[f64], mask: &SamplingMask, dict: &Dictionary, config: &IhtConfig) -> Result<BaselineResult> {
    iht_adaptive_solve_observed(y, mask, dict, config, |_, _| {})
}

pub fn iht_adaptive_solve_observed<F>(
    y: &[f64],
    mask: &SamplingMask,
    dict: &Dictionary,
    config: &IhtConfig,
    mut observer: F,
) -> Result<BaselineResult>
where
    F: FnMut(usize, &DVector<f64>),
{
    if !(config.tau_scale >= 0.0 && config.decay >= 0.0 && config.tau_min >= 0.0) {
        return Err(Error::invalid("iht", "schedule parameters must be >= 0"));
    }
    let prob = Problem::new(y, mask, dict)?;
    let step = prob.step(config.step)?;
    let tau0 = config.tau_scale * prob.correlation();
    let mut s = DVector::zeros(dict.p());
    for t in 1..=config.max_iter {
        let tau = (tau0 * (-config.decay * t as f64).exp()).max(config.tau_min);
        let (g, _) = prob.grad(&s);
        s = hard_threshold(&(&s - g * step), tau);
        check_finite(&s, "iht", t)?;
        observer(t, &s);
    }
    Ok(prob.finish(s, config.max_iter, Vec::new()))
}
