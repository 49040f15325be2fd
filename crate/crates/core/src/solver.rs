//! CSIM-ALM: ADMM recovery of missing samples under a CSIM data term.
//!
//! Solves
//!
//! ```text
//! min  CSIM(z) + gamma ||z||^2 + alpha ||s||_1
//! s.t. x = D s,  z = M x - y
//! ```
//!
//! by alternating closed-form `x` and `z` updates, one majorized
//! soft-thresholding step on `s` with backtracking on `lambda`, and dual ascent
//! on the two multipliers. `alpha` decays geometrically when continuation is
//! on, and the observed samples of `x` can be pinned to `y` after each
//! `x` update.

use nalgebra::DVector;
use serde::Serialize;

use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::kernel::{quadratic_form, CsimKernel, CsimParams};
use crate::signal::SamplingMask;

/// Retry cap for the `lambda` backtracking loop.
pub const MAX_BACKTRACKS: usize = 64;

/// Solver hyperparameters. Build with [`SolverConfig::defaults`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    pub gamma: f64,
    /// Growth factor for `lambda` on a failed majorization test.
    pub beta: f64,
    /// Initial surrogate constant; `None` means `1.05 * ||D||^2`.
    pub lambda0: Option<f64>,
    /// Continuation decay.
    pub eta: f64,
    /// `alpha_0 = max(xi * ||D^T y||_inf, alpha_min)`.
    pub xi: f64,
    pub alpha_min: f64,
    /// Overrides the `xi` rule for the initial `alpha`.
    pub alpha0: Option<f64>,
    pub max_iter: usize,
    pub k1: f64,
    pub k2: f64,
    /// Stop once both primal residuals fall below this and the dual
    /// residual `||mu1 - M^T mu2||` falls below it relative to `1 + ||mu1||`.
    /// `0` disables.
    pub feasibility_tol: f64,
    pub continuation: bool,
    pub projection: bool,
}

impl SolverConfig {
    /// `sigma1 = 0.4 m/n`, `sigma2 = 2 m/n`, `gamma = 1`, `xi = 0.1`,
    /// `eta = 0.95`, `beta = 1.1`, `alpha_min = 1e-4`, 50 iterations,
    /// `k2 = n - 1`, `k1 = 0.25 k2`.
    pub fn defaults(n: usize, m: usize) -> Self {
        let sr = m as f64 / n as f64;
        let k2 = n as f64 - 1.0;
        Self {
            sigma1: 0.4 * sr,
            sigma2: 2.0 * sr,
            gamma: 1.0,
            beta: 1.1,
            lambda0: None,
            eta: 0.95,
            xi: 0.1,
            alpha_min: 1e-4,
            alpha0: None,
            max_iter: 50,
            k1: 0.25 * k2,
            k2,
            feasibility_tol: 1e-6,
            continuation: true,
            projection: true,
        }
    }

    /// Fixed `alpha`, no projection: the plain ADMM iteration whose limit
    /// satisfies the optimality conditions of the problem above.
    pub fn analysis(n: usize, m: usize, alpha: f64, max_iter: usize) -> Self {
        Self {
            alpha0: Some(alpha),
            alpha_min: alpha.min(1e-4),
            max_iter,
            continuation: false,
            projection: false,
            ..Self::defaults(n, m)
        }
    }

    pub fn with_params(mut self, params: &CsimParams) -> Self {
        self.k1 = params.k1();
        self.k2 = params.k2();
        self
    }

    pub fn csim_params(&self, n: usize) -> Result<CsimParams> {
        CsimParams::new(self.k1, self.k2, n)
    }

    pub fn resolved_lambda0(&self, dict: &Dictionary) -> f64 {
        self.lambda0.unwrap_or(1.05 * dict.spectral_norm_sq())
    }

    pub fn validate(&self, dict: &Dictionary) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("sigma1", self.sigma1)?;
        positive("sigma2", self.sigma2)?;
        positive("alpha_min", self.alpha_min)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be > 1, got {}", self.beta)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid("eta", format!("must be in (0, 1), got {}", self.eta)));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::invalid("xi", format!("must be >= 0, got {}", self.xi)));
        }
        if let Some(a) = self.alpha0 {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::invalid("alpha0", format!("must be >= 0, got {a}")));
            }
        }
        if !(self.feasibility_tol >= 0.0) {
            return Err(Error::invalid("feasibility_tol", "must be >= 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        let norm = dict.spectral_norm_sq();
        let l0 = self.resolved_lambda0(dict);
        if !(l0 > norm) {
            return Err(Error::invalid(
                "lambda0",
                format!("must exceed ||D||^2 = {norm}, got {l0}"),
            ));
        }
        self.csim_params(dict.n()).map(|_| ())
    }
}

/// Live iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub t: usize,
    pub zeta1: f64,
    pub zeta2: f64,
}

/// `K = zeta1 I + zeta2 11^T = sigma2 I + 2 (W + gamma I)`.
pub fn z_kernel(kernel: &CsimKernel, sigma2: f64, gamma: f64) -> (f64, f64) {
    (sigma2 + 2.0 * kernel.theta1() + 2.0 * gamma, 2.0 * kernel.theta2())
}

impl SolverState {
    /// Zero initialization.
    pub fn new(n: usize, p: usize, alpha: f64, lambda: f64, zeta: (f64, f64)) -> Self {
        Self {
            x: DVector::zeros(n),
            s: DVector::zeros(p),
            z: DVector::zeros(n),
            mu1: DVector::zeros(n),
            mu2: DVector::zeros(n),
            alpha,
            lambda,
            t: 0,
            zeta1: zeta.0,
            zeta2: zeta.1,
        }
    }
}

/// `sign(v) max(|v| - tau, 0)`.
pub fn soft_threshold(v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau", format!("must be >= 0, got {tau}")));
    }
    Ok(v.map(|e| e.signum() * (e.abs() - tau).max(0.0)))
}

/// Solve `(sigma1 I + sigma2 M^T M) x = b` with
/// `b = sigma1 D s - mu1 + M^T (sigma2 (z + y) + mu2)`.
pub fn x_update(
    ds: &DVector<f64>,
    z: &DVector<f64>,
    mu1: &DVector<f64>,
    mu2: &DVector<f64>,
    y: &DVector<f64>,
    mask: &SamplingMask,
    sigma1: f64,
    sigma2: f64,
) -> DVector<f64> {
    let mut x = DVector::zeros(ds.len());
    for i in 0..ds.len() {
        let mut b = sigma1 * ds[i] - mu1[i];
        x[i] = if mask.is_observed(i) {
            b += sigma2 * (z[i] + y[i]) + mu2[i];
            b / (sigma1 + sigma2)
        } else {
            b / sigma1
        };
    }
    x
}

/// Pins the observed samples of `x` to `y`.
pub fn projection(x: &mut DVector<f64>, y: &DVector<f64>, mask: &SamplingMask) {
    for &i in mask.observed() {
        x[i] = y[i];
    }
}

/// `K^{-1} c` with `c = sigma2 (M x - y) - mu2`.
pub fn z_update(
    x: &DVector<f64>,
    mu2: &DVector<f64>,
    y: &DVector<f64>,
    mask: &SamplingMask,
    sigma2: f64,
    zeta1: f64,
    zeta2: f64,
) -> DVector<f64> {
    let n = x.len();
    let denom = zeta1 + n as f64 * zeta2;
    assert!(zeta1 > 0.0 && denom > 0.0, "z-update kernel must be positive definite");
    let mut c = DVector::zeros(n);
    for i in 0..n {
        let mx = if mask.is_observed(i) { x[i] } else { 0.0 };
        c[i] = sigma2 * (mx - y[i]) - mu2[i];
    }
    let shift = zeta2 / denom * c.sum();
    c.map(|v| (v - shift) / zeta1)
}

/// Dual ascent on both constraints. Returns the two increments.
pub fn multipliers_update(
    state: &mut SolverState,
    ds: &DVector<f64>,
    y: &DVector<f64>,
    mask: &SamplingMask,
    sigma1: f64,
    sigma2: f64,
) -> (DVector<f64>, DVector<f64>) {
    let d1 = (&state.x - ds) * sigma1;
    let mut r2 = &state.z + y;
    for i in 0..r2.len() {
        if mask.is_observed(i) {
            r2[i] -= state.x[i];
        }
    }
    let d2 = r2 * sigma2;
    state.mu1 += &d1;
    state.mu2 += &d2;
    (d1, d2)
}

/// `max(eta alpha, alpha_min)`.
pub fn alpha_schedule(alpha: f64, eta: f64, alpha_min: f64) -> f64 {
    (eta * alpha).max(alpha_min)
}

/// Outcome of one backtracked `s` step.
#[derive(Debug, Clone, PartialEq)]
pub struct SStep {
    pub s: DVector<f64>,
    pub lambda: f64,
    pub retries: usize,
    /// Subproblem objective at the previous and the accepted `s`.
    pub objective_before: f64,
    pub objective_after: f64,
}

/// The `s` subproblem scaled by `1 / sigma1`:
/// `L(s) = 1/2 ||x + mu1/sigma1 - D s||^2 + (alpha/sigma1) ||s||_1`.
pub fn s_objective(
    s: &DVector<f64>,
    target: &DVector<f64>,
    dict: &Dictionary,
    alpha: f64,
    sigma1: f64,
) -> f64 {
    let r = target - dict.synthesize(s);
    0.5 * r.norm_squared() + alpha / sigma1 * s.lp_norm(1)
}

/// One majorize-minimize step on the `s` subproblem, growing `lambda` by
/// `beta` until the quadratic surrogate upper-bounds the smooth part.
#[allow(clippy::too_many_arguments)]
pub fn s_update_backtracking(
    s: &DVector<f64>,
    x: &DVector<f64>,
    mu1: &DVector<f64>,
    dict: &Dictionary,
    alpha: f64,
    sigma1: f64,
    lambda: f64,
    beta: f64,
) -> Result<SStep> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    let target = x + mu1 / sigma1;
    let r = &target - dict.synthesize(s);
    let g0 = 0.5 * r.norm_squared();
    let grad = -dict.analyze(&r);
    let l1_weight = alpha / sigma1;
    let objective_before = g0 + l1_weight * s.lp_norm(1);

    let mut lambda = lambda;
    for retries in 0..=MAX_BACKTRACKS {
        let cand = soft_threshold(&(s - &grad / lambda), l1_weight / lambda)?;
        let step = &cand - s;
        let g = 0.5 * (&target - dict.synthesize(&cand)).norm_squared();
        let surrogate = g0 + grad.dot(&step) + 0.5 * lambda * step.norm_squared();
        if g <= surrogate + 1e-12 * (1.0 + g0) {
            return Ok(SStep {
                objective_after: g + l1_weight * cand.lp_norm(1),
                s: cand,
                lambda,
                retries,
                objective_before,
            });
        }
        lambda *= beta;
    }
    Err(Error::BacktrackingExhausted {
        retries: MAX_BACKTRACKS,
        lambda,
    })
}

/// `CSIM(M D s - y) + alpha ||s||_1 + gamma ||M D s - y||^2`.
pub fn objective(
    s: &DVector<f64>,
    y: &DVector<f64>,
    mask: &SamplingMask,
    dict: &Dictionary,
    kernel: &CsimKernel,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let mut e = dict.synthesize(s);
    mask.project(&mut e);
    e -= y;
    quadratic_form(e.as_slice(), kernel).unwrap_or(f64::NAN) + gamma * e.norm_squared() + alpha * s.lp_norm(1)
}

/// Relative stationarity residuals of the Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `||2 (W + gamma I) z + mu2|| / (1 + ||mu2||)`
    pub z_stationarity: f64,
    /// `||mu1 - M^T mu2|| / (1 + ||mu1||)`
    pub x_stationarity: f64,
    /// Distance of `D^T mu1` from `alpha * d||s||_1`, over `1 + ||D^T mu1||`.
    pub s_stationarity: f64,
}

/// `||mu1 - M^T mu2|| / (1 + ||mu1||)`, the x-stationarity residual.
fn dual_residual(state: &SolverState, mask: &SamplingMask) -> f64 {
    let mut mmu2 = state.mu2.clone();
    mask.project(&mut mmu2);
    (&state.mu1 - mmu2).norm() / (1.0 + state.mu1.norm())
}

pub fn kkt_residuals(
    state: &SolverState,
    mask: &SamplingMask,
    dict: &Dictionary,
    kernel: &CsimKernel,
    gamma: f64,
) -> KktResiduals {
    let z = &state.z;
    let wz = z * kernel.theta1() + DVector::from_element(z.len(), kernel.theta2() * z.sum());
    let rz = (wz + z * gamma) * 2.0 + &state.mu2;
    let dmu = dict.analyze(&state.mu1);
    let alpha = state.alpha;
    let rs = DVector::from_iterator(
        dmu.len(),
        dmu.iter().zip(state.s.iter()).map(|(&g, &s)| {
            if s != 0.0 {
                g - alpha * s.signum()
            } else {
                (g.abs() - alpha).max(0.0)
            }
        }),
    );
    KktResiduals {
        z_stationarity: rz.norm() / (1.0 + state.mu2.norm()),
        x_stationarity: dual_residual(state, mask),
        s_stationarity: rs.norm() / (1.0 + dmu.norm()),
    }
}

/// Per-iteration view handed to an observer.
#[derive(Debug)]
pub struct IterationTrace<'a> {
    pub iter: usize,
    pub state: &'a SolverState,
    /// `||x - D s||`
    pub residual_x: f64,
    /// `||z - M x + y||`
    pub residual_z: f64,
    pub increment: f64,
    pub objective: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    /// Final `x` iterate.
    pub x_hat: Vec<f64>,
    /// Final sparse code.
    pub s_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `(||x - D s||, ||z - M x + y||)` per iteration.
    pub residual_history: Vec<(f64, f64)>,
    /// `||mu1 - M^T mu2|| / (1 + ||mu1||)` per iteration.
    pub dual_history: Vec<f64>,
    pub objective_history: Vec<f64>,
    /// `||ds|| + ||dz|| + ||dmu1|| + ||dmu2||` per iteration.
    pub increment_history: Vec<f64>,
    pub final_alpha: f64,
    pub final_lambda: f64,
    pub total_backtracks: usize,
    #[serde(skip)]
    pub kkt: Option<KktResiduals>,
}

impl RecoveryResult {
    /// `D s_hat`.
    pub fn synthesized(&self, dict: &Dictionary) -> Vec<f64> {
        dict.synthesize(&DVector::from_column_slice(&self.s_hat))
            .as_slice()
            .to_vec()
    }
}

/// Runs CSIM-ALM from zero initialization.
pub fn solve(y: &[f64], mask: &SamplingMask, dict: &Dictionary, config: &SolverConfig) -> Result<RecoveryResult> {
    solve_observed(y, mask, dict, config, |_| {})
}

/// [`solve`] with a callback after every iteration.
pub fn solve_observed<F>(
    y: &[f64],
    mask: &SamplingMask,
    dict: &Dictionary,
    config: &SolverConfig,
    mut observer: F,
) -> Result<RecoveryResult>
where
    F: FnMut(&IterationTrace<'_>),
{
    let (n, p) = (dict.n(), dict.p());
    check_len(n, y.len())?;
    check_len(n, mask.n())?;
    config.validate(dict)?;
    let kernel = CsimKernel::new(config.csim_params(n)?);
    let (sigma1, sigma2) = (config.sigma1, config.sigma2);

    // Unobserved entries of y carry no information.
    let mut y = DVector::from_column_slice(y);
    mask.project(&mut y);

    let alpha0 = match config.alpha0 {
        Some(a) => a,
        None => (config.xi * dict.analyze(&y).amax()).max(config.alpha_min),
    };
    let mut st = SolverState::new(
        n,
        p,
        alpha0,
        config.resolved_lambda0(dict),
        z_kernel(&kernel, sigma2, config.gamma),
    );

    let mut residual_history = Vec::with_capacity(config.max_iter);
    let mut objective_history = Vec::with_capacity(config.max_iter);
    let mut increment_history = Vec::with_capacity(config.max_iter);
    let mut dual_history = Vec::with_capacity(config.max_iter);
    let mut total_backtracks = 0;
    let mut ds = dict.synthesize(&st.s);
    let mut converged = false;

    while st.t < config.max_iter {
        st.x = x_update(&ds, &st.z, &st.mu1, &st.mu2, &y, mask, sigma1, sigma2);
        if config.projection {
            projection(&mut st.x, &y, mask);
        }

        let step = s_update_backtracking(&st.s, &st.x, &st.mu1, dict, st.alpha, sigma1, st.lambda, config.beta)?;
        total_backtracks += step.retries;
        st.lambda = step.lambda;
        let ds_norm = (&step.s - &st.s).norm();
        st.s = step.s;
        ds = dict.synthesize(&st.s);

        let z_new = z_update(&st.x, &st.mu2, &y, mask, sigma2, st.zeta1, st.zeta2);
        let dz_norm = (&z_new - &st.z).norm();
        st.z = z_new;

        let (d1, d2) = multipliers_update(&mut st, &ds, &y, mask, sigma1, sigma2);
        let residual_x = d1.norm() / sigma1;
        let residual_z = d2.norm() / sigma2;
        let increment = ds_norm + dz_norm + d1.norm() + d2.norm();
        let residual_dual = dual_residual(&st, mask);
        st.t += 1;

        if !(residual_x.is_finite() && residual_z.is_finite() && st.s.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite {
                solver: "csim-alm",
                iteration: st.t,
            });
        }
        let obj = objective(&st.s, &y, mask, dict, &kernel, st.alpha, config.gamma);
        residual_history.push((residual_x, residual_z));
        dual_history.push(residual_dual);
        objective_history.push(obj);
        increment_history.push(increment);
        observer(&IterationTrace {
            iter: st.t,
            state: &st,
            residual_x,
            residual_z,
            increment,
            objective: obj,
            backtracks: step.retries,
        });

        // The primal residuals oscillate; a one-step dip below the tolerance
        // while the iterates still move is caught by the dual residual.
        let tol = config.feasibility_tol;
        if residual_x < tol && residual_z < tol && residual_dual < tol {
            converged = true;
            break;
        }
        if config.continuation {
            st.alpha = alpha_schedule(st.alpha, config.eta, config.alpha_min);
        }
    }

    let kkt = Some(kkt_residuals(&st, mask, dict, &kernel, config.gamma));
    Ok(RecoveryResult {
        x_hat: st.x.as_slice().to_vec(),
        s_hat: st.s.as_slice().to_vec(),
        iterations: st.t,
        converged,
        residual_history,
        dual_history,
        objective_history,
        increment_history,
        final_alpha: st.alpha,
        final_lambda: st.lambda,
        total_backtracks,
        kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{dct_dictionary, normalize_columns};
    use crate::signal::{random_mask, synth_sparse_signal};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn soft_threshold_examples() {
        let v = DVector::from_vec(vec![1.2, -0.3, -1.0]);
        let out = soft_threshold(&v, 0.5).unwrap();
        let expect = [0.7, 0.0, -0.5];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(soft_threshold(&v, 0.0).unwrap(), v);
        assert!(soft_threshold(&v, -1.0).is_err());
        let l1: f64 = v.iter().map(|e| (e.abs() - 0.5).max(0.0)).sum();
        assert!((out.lp_norm(1) - l1).abs() < 1e-15);
    }

    #[test]
    fn x_update_examples() {
        let mask = SamplingMask::new(2, vec![0]).unwrap();
        // b = (2, 2) with sigma1 = sigma2 = 1 from ds = (0, 2), y = (2, 0).
        let x = x_update(
            &DVector::from_vec(vec![0.0, 2.0]),
            &DVector::zeros(2),
            &DVector::zeros(2),
            &DVector::zeros(2),
            &DVector::from_vec(vec![2.0, 0.0]),
            &mask,
            1.0,
            1.0,
        );
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn x_update_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let m = rng.random_range(1..=n);
            let mask = random_mask(n, m, rng.random()).unwrap();
            let (s1, s2) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
            let (ds, z, mu1, mu2, y) = (randn(n, &mut rng), randn(n, &mut rng), randn(n, &mut rng), randn(n, &mut rng), randn(n, &mut rng));
            let mdiag = DMatrix::from_fn(n, n, |i, j| if i == j && mask.is_observed(i) { 1.0 } else { 0.0 });
            let b = &ds * s1 - &mu1 + &mdiag * ((&z + &y) * s2 + &mu2);
            let a = DMatrix::identity(n, n) * s1 + &mdiag * s2;
            let oracle = a.lu().solve(&b).unwrap();
            let x = x_update(&ds, &z, &mu1, &mu2, &y, &mask, s1, s2);
            assert!((x - oracle).amax() < 1e-10);
        }
    }

    #[test]
    fn z_update_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let mask = random_mask(n, rng.random_range(1..=n), rng.random()).unwrap();
            let params = CsimParams::new(rng.random_range(0.1..5.0), rng.random_range(0.1..50.0), n).unwrap();
            let kernel = CsimKernel::new(params);
            let (s2, gamma) = (rng.random_range(0.1..3.0), rng.random_range(0.0..2.0));
            let (z1, z2) = z_kernel(&kernel, s2, gamma);
            let (x, mu2, y) = (randn(n, &mut rng), randn(n, &mut rng), randn(n, &mut rng));
            let k = DMatrix::identity(n, n) * z1 + DMatrix::from_element(n, n, z2);
            let mut c = DVector::zeros(n);
            for i in 0..n {
                c[i] = s2 * (if mask.is_observed(i) { x[i] } else { 0.0 } - y[i]) - mu2[i];
            }
            let oracle = k.cholesky().unwrap().solve(&c);
            let z = z_update(&x, &mu2, &y, &mask, s2, z1, z2);
            assert!((z - oracle).amax() < 1e-10);
        }
    }

    #[test]
    fn z_update_special_cases() {
        let n = 6;
        let mask = SamplingMask::full(n).unwrap();
        let (z1, z2) = (3.0, -0.2);
        let zero = DVector::zeros(n);
        assert_eq!(z_update(&zero, &zero, &zero, &mask, 1.0, z1, z2), zero);
        // c = 1 when sigma2 = 1, x = 1, y = 0, mu2 = 0.
        let ones = DVector::from_element(n, 1.0);
        let z = z_update(&ones, &zero, &zero, &mask, 1.0, z1, z2);
        let expect = 1.0 / (z1 + n as f64 * z2);
        assert!(z.iter().all(|v| (v - expect).abs() < 1e-14));
    }

    #[test]
    fn projection_pins_observed() {
        let mask = SamplingMask::new(4, vec![1, 3]).unwrap();
        let y = DVector::from_vec(vec![0.0, 5.0, 0.0, 7.0]);
        let mut x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        projection(&mut x, &y, &mask);
        assert_eq!(x.as_slice(), &[1.0, 5.0, 3.0, 7.0]);
        let once = x.clone();
        projection(&mut x, &y, &mask);
        assert_eq!(x, once);
        let full = SamplingMask::full(4).unwrap();
        projection(&mut x, &y, &full);
        assert_eq!(x, y);
    }

    #[test]
    fn multipliers_unchanged_at_feasible_point() {
        let n = 5;
        let mask = SamplingMask::new(n, vec![0, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(n, &mut rng);
        let y = DVector::from_fn(n, |i, _| if mask.is_observed(i) { 0.3 * i as f64 } else { 0.0 });
        let mut z = -&y;
        for &i in mask.observed() {
            z[i] += x[i];
        }
        let mut st = SolverState::new(n, n, 1.0, 1.0, (1.0, 0.0));
        st.x = x.clone();
        st.z = z;
        st.mu1 = randn(n, &mut rng);
        st.mu2 = randn(n, &mut rng);
        let before = (st.mu1.clone(), st.mu2.clone());
        let (d1, d2) = multipliers_update(&mut st, &x, &y, &mask, 0.7, 1.3);
        assert!(d1.amax() < 1e-15 && d2.amax() < 1e-15);
        assert_eq!((st.mu1, st.mu2), before);
    }

    #[test]
    fn alpha_schedule_examples() {
        assert_eq!(alpha_schedule(1e-4, 0.95, 1e-4), 1e-4);
        assert!((alpha_schedule(1.0, 0.95, 1e-4) - 0.95).abs() < 1e-15);
    }

    fn random_dict(n: usize, p: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        normalize_columns(DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn surrogate_majorizes_above_spectral_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..20 {
            let d = random_dict(12, 20, seed);
            let lambda = 1.0001 * d.spectral_norm_sq();
            let target = randn(12, &mut rng);
            let s0 = randn(20, &mut rng);
            let r0 = &target - d.synthesize(&s0);
            let g0 = 0.5 * r0.norm_squared();
            let grad = -d.analyze(&r0);
            for _ in 0..20 {
                let s = randn(20, &mut rng) * 3.0;
                let g = 0.5 * (&target - d.synthesize(&s)).norm_squared();
                let step = &s - &s0;
                let sur = g0 + grad.dot(&step) + 0.5 * lambda * step.norm_squared();
                assert!(g <= sur + 1e-10 * (1.0 + g0));
            }
            let st = s_update_backtracking(&s0, &target, &DVector::zeros(12), &d, 0.3, 1.0, lambda, 1.1).unwrap();
            assert_eq!(st.retries, 0);
            assert!(st.objective_after <= st.objective_before + 1e-12);
        }
    }

    #[test]
    fn backtracking_recovers_from_small_lambda() {
        let d = random_dict(10, 16, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = randn(10, &mut rng);
        let s0 = randn(16, &mut rng);
        let st = s_update_backtracking(&s0, &x, &DVector::zeros(10), &d, 0.1, 1.0, 1e-3, 2.0).unwrap();
        assert!(st.retries > 0);
        assert!(st.objective_after <= st.objective_before + 1e-12);
        assert!(matches!(
            s_update_backtracking(&s0, &x, &DVector::zeros(10), &d, 0.1, 1.0, 1e-40, 1.0001),
            Err(Error::BacktrackingExhausted { .. })
        ));
    }

    #[test]
    fn s_update_fixed_point_when_consistent() {
        let d = dct_dictionary(8, 8).unwrap();
        let s = DVector::from_vec(vec![0.0, 2.0, 0.0, -1.5, 0.0, 0.0, 1.0, 0.0]);
        let x = d.synthesize(&s);
        // x = D s, mu1 = 0 and alpha = 0: the gradient vanishes.
        let st = s_update_backtracking(&s, &x, &DVector::zeros(8), &d, 0.0, 1.0, 1.05, 1.1).unwrap();
        assert!((st.s - s).amax() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let d = dct_dictionary(16, 16).unwrap();
        let mask = random_mask(16, 10, 1).unwrap();
        let res = solve(&[0.0; 16], &mask, &d, &SolverConfig::defaults(16, 10)).unwrap();
        assert!(res.s_hat.iter().all(|v| *v == 0.0));
        assert!(res.x_hat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn full_observation_recovers_code() {
        let d = dct_dictionary(64, 64).unwrap();
        let mask = SamplingMask::full(64).unwrap();
        for seed in 0..10 {
            let sig = synth_sparse_signal(&d, 6, seed).unwrap();
            let res = solve(sig.x.as_slice(), &mask, &d, &SolverConfig::defaults(64, 64)).unwrap();
            let err = crate::metrics::relative_error(&res.s_hat, sig.s.as_slice()).unwrap();
            assert!(err <= 1e-2, "seed {seed}: rel err {err}");
            assert_eq!(res.x_hat.as_slice(), sig.x.as_slice());
            assert_eq!(res.residual_history.len(), res.iterations);
            assert_eq!(res.objective_history.len(), res.iterations);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let d = dct_dictionary(32, 64).unwrap();
        let sig = synth_sparse_signal(&d, 4, 2).unwrap();
        let mask = random_mask(32, 20, 2).unwrap();
        let y = crate::signal::apply_mask(sig.x.as_slice(), &mask).unwrap();
        let cfg = SolverConfig::defaults(32, 20);
        let a = solve(&y, &mask, &d, &cfg).unwrap();
        let b = solve(&y, &mask, &d, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let d = dct_dictionary(8, 8).unwrap();
        let ok = SolverConfig::defaults(8, 4);
        ok.validate(&d).unwrap();
        for bad in [
            SolverConfig { beta: 1.0, ..ok.clone() },
            SolverConfig { eta: 1.0, ..ok.clone() },
            SolverConfig { sigma1: 0.0, ..ok.clone() },
            SolverConfig { lambda0: Some(0.5), ..ok.clone() },
            SolverConfig { max_iter: 0, ..ok.clone() },
            SolverConfig { k1: -1.0, ..ok.clone() },
        ] {
            assert!(bad.validate(&d).is_err(), "{bad:?}");
        }
        assert!(solve(&[0.0; 7], &SamplingMask::full(8).unwrap(), &d, &ok).is_err());
    }
}
