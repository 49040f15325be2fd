//! `params` and `dict-info` reports.

use std::fmt;

use serde::Serialize;

use crate::dictionary::{Dictionary, DictionaryKind};
use crate::error::Result;
use crate::kernel::{sensitivity_ratio, CsimParams};
use crate::params::{
    condition_number, select_ratio, KappaBound, KappaInfeasibility, RatioSource, RipBound,
    SelectionOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DictInfo {
    pub dict: DictionaryKind,
    pub n: usize,
    pub p: usize,
    pub mu: f64,
    pub kappa: f64,
    pub spectral_norm_sq: f64,
    /// Largest `| ||d_j|| - 1 |`.
    pub max_norm_deviation: f64,
}

pub fn dict_info(kind: DictionaryKind, dict: &Dictionary) -> Result<DictInfo> {
    let max_norm_deviation = dict
        .atoms()
        .column_iter()
        .map(|c| (c.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(DictInfo {
        dict: kind,
        n: dict.n(),
        p: dict.p(),
        mu: dict.coherence(),
        kappa: condition_number(dict.atoms())?,
        spectral_norm_sq: dict.spectral_norm_sq(),
        max_norm_deviation,
    })
}

impl fmt::Display for DictInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dictionary        {} ({} x {})", self.dict, self.n, self.p)?;
        writeln!(f, "coherence mu      {:.6}", self.mu)?;
        writeln!(f, "kappa(D)          {:.6}", self.kappa)?;
        writeln!(f, "||D||^2           {:.6}", self.spectral_norm_sq)?;
        write!(f, "max |norm - 1|    {:.3e}", self.max_norm_deviation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsReport {
    pub info: DictInfo,
    pub options: SelectionOptions,
    pub kappa_bound: std::result::Result<KappaBound, KappaInfeasibility>,
    pub rip_bound: Option<RipBound>,
    pub ratio: f64,
    pub source: RatioSource,
    pub k1: f64,
    pub k2: f64,
    /// `k2 / k1 + 1 / n`.
    pub sensitivity_ratio: f64,
    pub kappa_feasible: bool,
    pub rip_feasible: bool,
}

pub fn params_report(kind: DictionaryKind, dict: &Dictionary, options: SelectionOptions) -> Result<ParamsReport> {
    let sel = select_ratio(dict, options)?;
    let params = CsimParams::with_ratio(dict.n(), sel.ratio)?;
    let rip_feasible = sel
        .rip
        .as_ref()
        .is_some_and(|b| b.feasible() && b.ratio_upper.is_some_and(|r| r > 1.0));
    Ok(ParamsReport {
        info: dict_info(kind, dict)?,
        options,
        kappa_feasible: sel.kappa.is_ok(),
        kappa_bound: sel.kappa,
        rip_bound: sel.rip,
        rip_feasible,
        ratio: sel.ratio,
        source: sel.source,
        k1: params.k1(),
        k2: params.k2(),
        sensitivity_ratio: sensitivity_ratio(&params),
    })
}

impl fmt::Display for ParamsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.info)?;
        writeln!(
            f,
            "options           kappa_max = {}, delta = {}, k = {}",
            self.options.kappa_max, self.options.delta, self.options.k
        )?;
        match &self.kappa_bound {
            Ok(b) => writeln!(
                f,
                "kappa bound       k2/k1 <= {:.6} (xi = {:.6}, nu = {:.6})",
                b.ratio_upper, b.xi, b.nu
            )?,
            Err(why) => writeln!(f, "kappa bound       infeasible: {why}")?,
        }
        match &self.rip_bound {
            Some(b) => {
                let cap = b
                    .ratio_upper
                    .map_or_else(|| "none".to_string(), |r| format!("{r:.6}"));
                writeln!(
                    f,
                    "rip bound         k2/k1 <= {cap} (case {:?}, 2k = {}, c1 = {:.6}, c2 = {:.6})",
                    b.case, b.two_k, b.c1, b.c2
                )?;
                for v in &b.violations {
                    writeln!(f, "  violated        {v}")?;
                }
            }
            None => writeln!(f, "rip bound         not computable for these inputs")?,
        }
        writeln!(f, "feasible          kappa = {}, rip = {}", self.kappa_feasible, self.rip_feasible)?;
        writeln!(f, "selected k2/k1    {:.6} ({})", self.ratio, self.source)?;
        writeln!(f, "k1, k2            {:.6}, {:.6}", self.k1, self.k2)?;
        write!(f, "r_S               {:.6}", self.sensitivity_ratio)
    }
}
