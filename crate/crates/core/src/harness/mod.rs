//! Experiment harness: sweeps over sampling ratio and iteration count,
//! parameter reports, and single-input recovery and denoising runs.

mod config;
mod plot;
mod recover;
mod report;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use config::{parse_config, ConfigEntry};
pub use plot::{sweep_iters_plot_script, sweep_sr_plot_script};
pub use recover::{
    denoise_experiment, denoise_grid, mean_patch_ssim, recover_image, recover_signal, run_solver, DenoiseScores,
    ImageRecovery, SignalRecovery, SolverRun,
};
pub use report::{dict_info, params_report, DictInfo, ParamsReport};
pub use sweep::{
    sweep_iters, sweep_sr, write_iters_csv, write_sweep_csv, IterRow, SweepRow, ITERS_CSV_HEADER,
    SWEEP_CSV_HEADER,
};

use crate::baselines::{AlphaRule, FistaConfig, IhtConfig};
use crate::dictionary::DictionaryKind;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    CsimAlm,
    Fista,
    Iht,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::CsimAlm, SolverKind::Fista, SolverKind::Iht];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::CsimAlm => "csim-alm",
            SolverKind::Fista => "fista",
            SolverKind::Iht => "iht",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csim-alm" | "csim" | "alm" => Ok(SolverKind::CsimAlm),
            "fista" => Ok(SolverKind::Fista),
            "iht" | "imat" => Ok(SolverKind::Iht),
            other => Err(Error::invalid("solver", format!("unknown solver `{other}`"))),
        }
    }
}

/// Optional overrides on top of the per-`(n, m)` solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverOverrides {
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub xi: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha0: Option<f64>,
    pub lambda0: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    /// `k2 / k1` with `k2 = n - 1`; ignored when `k1` or `k2` is given.
    pub ratio: Option<f64>,
    pub feasibility_tol: Option<f64>,
    pub continuation: Option<bool>,
    pub projection: Option<bool>,
}

impl SolverOverrides {
    pub fn csim_alm(&self, n: usize, m: usize, max_iter: usize) -> SolverConfig {
        let mut c = SolverConfig::defaults(n, m);
        c.max_iter = max_iter;
        if let Some(r) = self.ratio {
            c.k1 = c.k2 / r;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(sigma1, sigma2, gamma, beta, eta, xi, alpha_min, k1, k2, feasibility_tol, continuation, projection);
        c.alpha0 = self.alpha0.or(c.alpha0);
        c.lambda0 = self.lambda0.or(c.lambda0);
        c
    }

    /// FISTA follows the same `alpha` path (`xi`, `eta`, `alpha_min`).
    pub fn fista(&self, max_iter: usize) -> FistaConfig {
        let d = SolverConfig::defaults(2, 1);
        let alpha = match self.alpha0 {
            Some(a) if self.continuation == Some(false) => AlphaRule::Fixed(a),
            _ => AlphaRule::Continuation {
                scale: self.xi.unwrap_or(d.xi),
                eta: self.eta.unwrap_or(d.eta),
                floor: self.alpha_min.unwrap_or(d.alpha_min),
            },
        };
        FistaConfig {
            alpha,
            max_iter,
            ..FistaConfig::default()
        }
    }

    pub fn iht(&self, max_iter: usize) -> IhtConfig {
        IhtConfig {
            max_iter,
            ..IhtConfig::default()
        }
    }
}

/// One experiment, as assembled from defaults, a config file and flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub dict: DictionaryKind,
    pub n: usize,
    pub p: usize,
    pub srs: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub max_iter: usize,
    /// Nonzeros per synthetic code; `None` means `ceil(0.1 p)`.
    pub sparsity: Option<usize>,
    pub overrides: SolverOverrides,
    /// Record wall-clock times in the CSV output.
    pub timing: bool,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dict: DictionaryKind::Dct,
            n: 64,
            p: 64,
            srs: vec![0.4, 0.6, 0.8],
            trials: 100,
            seed: 1,
            solvers: SolverKind::ALL.to_vec(),
            max_iter: 50,
            sparsity: None,
            overrides: SolverOverrides::default(),
            timing: false,
            exec: Execution::Parallel,
        }
    }
}

fn parse_num<T: FromStr>(key: &'static str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{v}`")))
}

fn parse_bool(key: &'static str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::invalid(key, format!("expected a boolean, got `{v}`"))),
    }
}

fn parse_list<T: FromStr>(key: &'static str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_num(key, t))
        .collect()
}

impl ExperimentSpec {
    /// Keys accepted by [`ExperimentSpec::set`] and config files.
    pub const KEYS: &'static [&'static str] = &[
        "dict", "n", "p", "sr", "trials", "seed", "solver", "max_iter", "k", "timing", "sigma1",
        "sigma2", "gamma", "beta", "eta", "xi", "alpha_min", "alpha0", "lambda0", "k1", "k2",
        "ratio", "feasibility_tol", "continuation", "projection",
    ];

    /// Applies one `key = value` setting. List keys take comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let o = &mut self.overrides;
        match key.trim().replace('-', "_").as_str() {
            "dict" => self.dict = value.parse()?,
            "n" => self.n = parse_num("n", value)?,
            "p" => self.p = parse_num("p", value)?,
            "sr" => self.srs = parse_list("sr", value)?,
            "trials" => self.trials = parse_num("trials", value)?,
            "seed" => self.seed = parse_num("seed", value)?,
            "solver" => {
                self.solvers = value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "max_iter" => self.max_iter = parse_num("max_iter", value)?,
            "k" => self.sparsity = Some(parse_num("k", value)?),
            "timing" => self.timing = parse_bool("timing", value)?,
            "sigma1" => o.sigma1 = Some(parse_num("sigma1", value)?),
            "sigma2" => o.sigma2 = Some(parse_num("sigma2", value)?),
            "gamma" => o.gamma = Some(parse_num("gamma", value)?),
            "beta" => o.beta = Some(parse_num("beta", value)?),
            "eta" => o.eta = Some(parse_num("eta", value)?),
            "xi" => o.xi = Some(parse_num("xi", value)?),
            "alpha_min" => o.alpha_min = Some(parse_num("alpha_min", value)?),
            "alpha0" => o.alpha0 = Some(parse_num("alpha0", value)?),
            "lambda0" => o.lambda0 = Some(parse_num("lambda0", value)?),
            "k1" => o.k1 = Some(parse_num("k1", value)?),
            "k2" => o.k2 = Some(parse_num("k2", value)?),
            "ratio" => o.ratio = Some(parse_num("ratio", value)?),
            "feasibility_tol" => o.feasibility_tol = Some(parse_num("feasibility_tol", value)?),
            "continuation" => o.continuation = Some(parse_bool("continuation", value)?),
            "projection" => o.projection = Some(parse_bool("projection", value)?),
            other => {
                return Err(Error::invalid(
                    "config",
                    format!("unknown key `{other}`; known keys: {}", Self::KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, entries: &[ConfigEntry]) -> Result<()> {
        for e in entries {
            self.set(&e.key, &e.value).map_err(|err| match err {
                Error::InvalidParameter { name, reason } => Error::InvalidParameter {
                    name,
                    reason: format!("line {}: {reason}", e.line),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "at least one trial is required"));
        }
        if self.srs.is_empty() {
            return Err(Error::invalid("sr", "at least one sampling ratio is required"));
        }
        if let Some(bad) = self.srs.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return Err(Error::invalid("sr", format!("sampling ratio {bad} is outside (0, 1]")));
        }
        if self.solvers.is_empty() {
            return Err(Error::invalid("solver", "at least one solver is required"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
            .unwrap_or_else(|| crate::signal::default_sparsity(self.p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_round_trip() {
        for s in SolverKind::ALL {
            assert_eq!(s.name().parse::<SolverKind>().unwrap(), s);
        }
        assert!("lasso".parse::<SolverKind>().is_err());
    }

    #[test]
    fn set_overrides_and_lists() {
        let mut spec = ExperimentSpec::default();
        spec.set("sr", "0.5, 1.0").unwrap();
        spec.set("solver", "fista,iht").unwrap();
        spec.set("max-iter", "20").unwrap();
        spec.set("dict", "haar-wp").unwrap();
        spec.set("sigma1", "0.3").unwrap();
        spec.set("projection", "off").unwrap();
        assert_eq!(spec.srs, vec![0.5, 1.0]);
        assert_eq!(spec.solvers, vec![SolverKind::Fista, SolverKind::Iht]);
        assert_eq!(spec.max_iter, 20);
        assert_eq!(spec.dict, DictionaryKind::HaarWp);
        let c = spec.overrides.csim_alm(64, 32, spec.max_iter);
        assert_eq!(c.sigma1, 0.3);
        assert_eq!(c.sigma2, 1.0);
        assert!(!c.projection);
        assert!(spec.set("bogus", "1").is_err());
        assert!(spec.set("trials", "x").is_err());
    }

    #[test]
    fn ratio_override_sets_k1() {
        let o = SolverOverrides {
            ratio: Some(2.0),
            ..Default::default()
        };
        let c = o.csim_alm(64, 64, 50);
        assert_eq!(c.k2, 63.0);
        assert_eq!(c.k1, 31.5);
    }

    #[test]
    fn validation() {
        let mut spec = ExperimentSpec::default();
        spec.validate().unwrap();
        spec.srs = vec![0.0];
        assert!(spec.validate().is_err());
        spec.srs = vec![1.5];
        assert!(spec.validate().is_err());
        spec = ExperimentSpec {
            trials: 0,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
