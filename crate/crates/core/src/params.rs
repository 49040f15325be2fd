//! Choosing the weight ratio `k2 / k1`.
//!
//! A larger ratio makes the index more sensitive to noise than to brightness
//! shifts, but the weighted dictionary `W^{1/2} D` must stay well conditioned
//! and keep a usable restricted isometry constant. Two closed-form caps are
//! computed here; [`select_ratio`] takes the smaller feasible one.

use std::fmt;

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen, SVD};
use serde::Serialize;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::kernel::{apply_kernel_sqrt, CsimKernel};

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Column-norm tolerance for [`mutual_coherence`].
const COHERENCE_NORM_TOL: f64 = 1e-8;

/// Enumeration budget for [`verify_rip_bruteforce`].
pub const RIP_SUBSET_BUDGET: u128 = 100_000;

/// Ratio used when neither bound is feasible (`k1 = 0.25 k2`).
pub const FALLBACK_RATIO: f64 = 4.0;

pub const DEFAULT_KAPPA_MAX: f64 = 4.0;
pub const DEFAULT_DELTA: f64 = 0.4;

/// Largest `|d_i^T d_j|` over distinct unit-norm columns.
pub fn mutual_coherence(atoms: &DMatrix<f64>) -> Result<f64> {
    let p = atoms.ncols();
    if p < 2 {
        return Err(Error::invalid("atoms", format!("coherence needs p >= 2, got {p}")));
    }
    for (j, col) in atoms.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > COHERENCE_NORM_TOL {
            return Err(Error::invalid(
                "atoms",
                format!("column {j} has norm {norm}; normalize first"),
            ));
        }
    }
    let gram = atoms.tr_mul(atoms);
    let mut mu: f64 = 0.0;
    for j in 0..p {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Nonzero singular values (descending), using [`RANK_TOL`].
fn nonzero_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let cutoff = s.first().copied().unwrap_or(0.0) * RANK_TOL;
    s.into_iter().filter(|&v| v > cutoff).collect()
}

/// `sigma_max / sigma_min` over nonzero singular values.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let s = nonzero_singular_values(a);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if max > 0.0 => Ok(max / min),
        _ => Err(Error::invalid("matrix", "condition number of an all-zero matrix")),
    }
}

/// Why the condition-number cap on `k2 / k1` is unavailable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum KappaInfeasibility {
    /// `p > rank(D)`: weighting does not change the conditioning.
    NotFullColumnRank { rank: usize, p: usize },
    /// `xi <= 0`: the bound is vacuous or divides by zero.
    DegenerateXi { xi: f64, nu: f64 },
    /// `kappa_max <= xi + nu`.
    CapTooSmall { xi: f64, nu: f64, kappa_max: f64 },
    /// `(kappa_max - nu) / xi <= 1`.
    RatioNotAboveOne { ratio_upper: f64 },
}

impl fmt::Display for KappaInfeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotFullColumnRank { rank, p } => {
                write!(f, "dictionary is not full column rank (rank {rank} < p = {p})")
            }
            Self::DegenerateXi { xi, nu } => write!(f, "xi = {xi:.6e} <= 0 (nu = {nu:.6})"),
            Self::CapTooSmall { xi, nu, kappa_max } => {
                write!(f, "kappa_max = {kappa_max} <= xi + nu = {:.6}", xi + nu)
            }
            Self::RatioNotAboveOne { ratio_upper } => {
                write!(f, "ratio upper bound {ratio_upper:.6} <= 1")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaBound {
    pub xi: f64,
    pub nu: f64,
    pub kappa_max: f64,
    pub ratio_upper: f64,
}

/// Condition-number cap: `1 < k2/k1 <= (kappa_max - nu) / xi`.
pub fn kappa_ratio_bound(dict: &Dictionary, kappa_max: f64) -> Result<KappaBound> {
    if !(kappa_max.is_finite() && kappa_max >= 1.0) {
        return Err(Error::invalid("kappa_max", format!("must be >= 1, got {kappa_max}")));
    }
    let atoms = dict.atoms();
    let (n, p) = (dict.n(), dict.p());
    let s = nonzero_singular_values(atoms);
    if s.len() < p {
        return Err(Error::KappaInfeasible(KappaInfeasibility::NotFullColumnRank {
            rank: s.len(),
            p,
        }));
    }
    let (smax, smin) = (s[0], s[s.len() - 1]);
    let kappa = smax / smin;
    let nf = n as f64;
    // 1^T D D^T 1 = ||D^T 1||^2
    let row_sum: f64 = atoms.row_sum().iter().map(|v| v * v).sum();
    let spread = row_sum / (nf * smax * smax);
    let xi = kappa * (nf / (nf - 1.0)) * (1.0 / (kappa * kappa) - spread);
    let nu = kappa * spread;
    if xi <= RANK_TOL {
        return Err(Error::KappaInfeasible(KappaInfeasibility::DegenerateXi { xi, nu }));
    }
    if kappa_max <= xi + nu {
        return Err(Error::KappaInfeasible(KappaInfeasibility::CapTooSmall {
            xi,
            nu,
            kappa_max,
        }));
    }
    let ratio_upper = (kappa_max - nu) / xi;
    if ratio_upper <= 1.0 {
        return Err(Error::KappaInfeasible(KappaInfeasibility::RatioNotAboveOne {
            ratio_upper,
        }));
    }
    Ok(KappaBound {
        xi,
        nu,
        kappa_max,
        ratio_upper,
    })
}

/// Coherence regime of the quadratic `h(n) = n^2 (q - mu) - n + 1 - mu`,
/// `q = delta / (2k - 1)`, whose positivity is equivalent to a ratio cap
/// above one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RipCase {
    /// `mu < max(0, mu_min)`: `h` has no real roots, every `n` works.
    NoRealRoots,
    /// `max(0, mu_min) <= mu < q`: `h > 0` for `n > n_max`.
    AboveLargerRoot,
    /// `mu >= q`: only `n < n_min`, which excludes `n >= 2k`.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RipViolation {
    /// `mu >= delta / (2k - 1)`.
    CoherenceTooLarge { mu: f64, limit: f64 },
    /// `n <= n_max`.
    DimensionTooSmall { n: usize, n_max: f64 },
    /// `2k > 1 + delta / mu`.
    SparsityAboveCoherenceLimit { two_k: usize, limit: f64 },
    /// `2k > min(n, p)`.
    SparsityAboveDimension { two_k: usize, dim: usize },
    /// `delta >= sqrt(2) - 1`.
    DeltaAboveRecoveryThreshold { delta: f64 },
}

impl fmt::Display for RipViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CoherenceTooLarge { mu, limit } => {
                write!(f, "mu(D) = {mu:.6} >= delta/(2k-1) = {limit:.6}")
            }
            Self::DimensionTooSmall { n, n_max } => write!(f, "n = {n} <= n_max = {n_max:.4}"),
            Self::SparsityAboveCoherenceLimit { two_k, limit } => {
                write!(f, "2k = {two_k} > 1 + delta/mu = {limit:.4}")
            }
            Self::SparsityAboveDimension { two_k, dim } => {
                write!(f, "2k = {two_k} > min(n, p) = {dim}")
            }
            Self::DeltaAboveRecoveryThreshold { delta } => {
                write!(f, "delta = {delta} >= sqrt(2) - 1")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RipBound {
    pub c1: f64,
    pub c2: f64,
    /// Larger root of `h`; `None` when `h` has no real roots.
    pub n_max: Option<f64>,
    pub delta_target: f64,
    pub two_k: usize,
    pub mu: f64,
    pub case: RipCase,
    /// `c1 / (c2 - delta)` when `c2 > delta`.
    pub ratio_upper: Option<f64>,
    pub violations: Vec<RipViolation>,
}

impl RipBound {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// `mu_min`, the smaller root of the discriminant of `h` in `mu`.
    pub fn mu_min(&self) -> f64 {
        mu_min(self.delta_target, self.two_k)
    }
}

fn mu_min(delta: f64, two_k: usize) -> f64 {
    let q = delta / (two_k as f64 - 1.0);
    0.5 * (1.0 + q - (1.0 + (1.0 - q) * (1.0 - q)).sqrt())
}

/// Restricted-isometry cap on `k2 / k1` for `W^{1/2} D` with unit columns,
/// sparsity `k` (order `2k`) and target constant `delta`.
///
/// `delta` is accepted anywhere in `(0, 1)` so every coherence regime can be
/// examined; `delta >= sqrt(2) - 1` is reported as a violation because the
/// recovery guarantee needs the smaller constant.
pub fn rip_ratio_bound(n: usize, k: usize, mu: f64, delta: f64) -> Result<RipBound> {
    let two_k = 2 * k;
    if two_k <= 2 {
        return Err(Error::invalid("k", format!("need 2k > 2, got k = {k}")));
    }
    if n < two_k {
        return Err(Error::invalid("n", format!("need n >= 2k = {two_k}, got {n}")));
    }
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::invalid("mu", format!("need 0 <= mu < 1, got {mu}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("need 0 < delta < 1, got {delta}")));
    }
    let nf = n as f64;
    let s = two_k as f64 - 1.0;
    let c1 = s * (nf - 1.0) * (nf - 1.0 + mu) / (nf * nf);
    let c2 = s / nf * (nf - 1.0 + mu * (nf + 1.0));
    let q = delta / s;
    let lead = q - mu;

    let mut violations = Vec::new();
    if delta >= std::f64::consts::SQRT_2 - 1.0 {
        violations.push(RipViolation::DeltaAboveRecoveryThreshold { delta });
    }

    let (case, n_max) = if mu >= q {
        (RipCase::Infeasible, None)
    } else {
        let disc = 1.0 - 4.0 * lead * (1.0 - mu);
        if disc < 0.0 {
            (RipCase::NoRealRoots, None)
        } else {
            (RipCase::AboveLargerRoot, Some((1.0 + disc.sqrt()) / (2.0 * lead)))
        }
    };
    match case {
        RipCase::Infeasible => violations.push(RipViolation::CoherenceTooLarge { mu, limit: q }),
        RipCase::AboveLargerRoot => {
            let n_max = n_max.unwrap_or(f64::INFINITY);
            if nf <= n_max {
                violations.push(RipViolation::DimensionTooSmall { n, n_max });
            }
        }
        RipCase::NoRealRoots => {}
    }
    if mu > 0.0 {
        let limit = 1.0 + delta / mu;
        if two_k as f64 > limit {
            violations.push(RipViolation::SparsityAboveCoherenceLimit { two_k, limit });
        }
    }

    let ratio_upper = (c2 > delta).then(|| c1 / (c2 - delta));
    Ok(RipBound {
        c1,
        c2,
        n_max,
        delta_target: delta,
        two_k,
        mu,
        case,
        ratio_upper,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioSource {
    RipLimited,
    KappaLimited,
    DefaultFallback,
}

impl fmt::Display for RatioSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RipLimited => "rip-limited",
            Self::KappaLimited => "kappa-limited",
            Self::DefaultFallback => "default-fallback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionOptions {
    pub kappa_max: f64,
    pub delta: f64,
    pub k: usize,
}

impl SelectionOptions {
    /// `kappa_max = 4`, `delta = 0.4`, `k = floor(0.1 n)`.
    pub fn default_for(n: usize) -> Self {
        Self {
            kappa_max: DEFAULT_KAPPA_MAX,
            delta: DEFAULT_DELTA,
            k: n / 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSelection {
    pub ratio: f64,
    pub source: RatioSource,
    pub kappa_max_used: f64,
    pub delta_used: f64,
    pub k_used: usize,
    pub kappa: std::result::Result<KappaBound, KappaInfeasibility>,
    /// `None` when the RIP inputs themselves are out of range (e.g. `2k <= 2`).
    pub rip: Option<RipBound>,
}

/// Largest ratio that satisfies both caps; falls back to
/// [`FALLBACK_RATIO`] when neither is available.
pub fn select_ratio(dict: &Dictionary, opts: SelectionOptions) -> Result<RatioSelection> {
    let kappa = match kappa_ratio_bound(dict, opts.kappa_max) {
        Ok(b) => Ok(b),
        Err(Error::KappaInfeasible(why)) => Err(why),
        Err(e) => return Err(e),
    };
    let rip = rip_ratio_bound(dict.n(), opts.k, dict.coherence(), opts.delta)
        .ok()
        .map(|mut b| {
            let dim = dict.n().min(dict.p());
            if b.two_k > dim {
                b.violations
                    .push(RipViolation::SparsityAboveDimension { two_k: b.two_k, dim });
            }
            b
        });

    let rip_cap = rip
        .as_ref()
        .filter(|b| b.feasible())
        .and_then(|b| b.ratio_upper)
        .filter(|r| *r > 1.0);
    let kappa_cap = kappa.as_ref().ok().map(|b| b.ratio_upper);

    let (ratio, source) = combine_caps(rip_cap, kappa_cap);
    Ok(RatioSelection {
        ratio,
        source,
        kappa_max_used: opts.kappa_max,
        delta_used: opts.delta,
        k_used: opts.k,
        kappa,
        rip,
    })
}

/// Smaller of the available caps, or the fallback.
pub fn combine_caps(rip: Option<f64>, kappa: Option<f64>) -> (f64, RatioSource) {
    match (rip, kappa) {
        (Some(r), Some(k)) if r <= k => (r, RatioSource::RipLimited),
        (Some(_), Some(k)) => (k, RatioSource::KappaLimited),
        (Some(r), None) => (r, RatioSource::RipLimited),
        (None, Some(k)) => (k, RatioSource::KappaLimited),
        (None, None) => (FALLBACK_RATIO, RatioSource::DefaultFallback),
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Measured restricted isometry constant of `W^{1/2} D` over every
/// `two_k`-column submatrix: `max(1 - lambda_min, lambda_max - 1)` of the
/// submatrix Gram. This is the exact constant for the given order.
pub fn verify_rip_bruteforce(dict: &Dictionary, kernel: &CsimKernel, two_k: usize) -> Result<f64> {
    let (n, p) = (dict.n(), dict.p());
    if kernel.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: kernel.n(),
        });
    }
    if two_k == 0 || two_k > p {
        return Err(Error::invalid("two_k", format!("need 1 <= 2k <= p = {p}, got {two_k}")));
    }
    let subsets = binomial(p, two_k);
    if subsets > RIP_SUBSET_BUDGET {
        return Err(Error::CombinatorialBudget {
            subsets,
            budget: RIP_SUBSET_BUDGET,
        });
    }

    let mut weighted = DMatrix::zeros(n, p);
    for (j, col) in dict.atoms().column_iter().enumerate() {
        let w = apply_kernel_sqrt(col.as_slice(), kernel)?;
        weighted.column_mut(j).copy_from_slice(&w);
    }
    let gram = weighted.tr_mul(&weighted);

    let combos: Vec<Vec<usize>> = (0..p).combinations(two_k).collect();
    let worst = crate::exec::map_collect(&combos, crate::exec::Execution::default(), |subset| {
        let sub = DMatrix::from_fn(two_k, two_k, |a, b| gram[(subset[a], subset[b])]);
        let eig = SymmetricEigen::new(sub).eigenvalues;
        (1.0 - eig.min()).max(eig.max() - 1.0)
    });
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{dct_dictionary, normalize_columns};
    use crate::kernel::CsimParams;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(mutual_coherence(&DMatrix::identity(5, 5)).unwrap(), 0.0);
        let mut dup = DMatrix::<f64>::identity(4, 3);
        dup.set_column(2, &dup.column(0).clone_owned());
        assert_relative_eq!(mutual_coherence(&dup).unwrap(), 1.0);
        assert!(mutual_coherence(&DMatrix::identity(4, 1)).is_err());
        assert!(mutual_coherence(&(DMatrix::identity(3, 3) * 2.0)).is_err());

        let d = normalize_columns(random_matrix(8, 12, 1)).unwrap();
        let a = d.atoms();
        let mut oracle: f64 = 0.0;
        for i in 0..12 {
            for j in 0..12 {
                if i != j {
                    oracle = oracle.max(a.column(i).dot(&a.column(j)).abs());
                }
            }
        }
        assert_relative_eq!(mutual_coherence(a).unwrap(), oracle, epsilon = 1e-15);
    }

    #[test]
    fn condition_number_examples() {
        assert_relative_eq!(condition_number(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        assert_relative_eq!(condition_number(&d).unwrap(), 4.0, epsilon = 1e-14);
        assert!(condition_number(&DMatrix::zeros(3, 2)).is_err());

        // Rank-deficient: smallest nonzero singular value is used.
        let mut r = DMatrix::zeros(3, 3);
        r[(0, 0)] = 3.0;
        r[(1, 1)] = 1.5;
        assert_relative_eq!(condition_number(&r).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn condition_number_is_submultiplicative() {
        for seed in 0..20 {
            let a = random_matrix(5, 5, seed);
            let b = random_matrix(5, 5, seed + 100);
            let ab = &a * &b;
            let lhs = condition_number(&ab).unwrap();
            let rhs = condition_number(&a).unwrap() * condition_number(&b).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-10));
        }
    }

    #[test]
    fn kappa_bound_orthonormal_square_is_degenerate() {
        let d = dct_dictionary(8, 8).unwrap();
        match kappa_ratio_bound(&d, 4.0) {
            Err(Error::KappaInfeasible(KappaInfeasibility::DegenerateXi { xi, nu })) => {
                assert!(xi.abs() < 1e-10);
                assert_relative_eq!(nu, 1.0, epsilon = 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kappa_bound_not_full_rank_when_overcomplete() {
        let d = dct_dictionary(8, 16).unwrap();
        assert!(matches!(
            kappa_ratio_bound(&d, 4.0),
            Err(Error::KappaInfeasible(KappaInfeasibility::NotFullColumnRank { .. }))
        ));
    }

    /// Re-derives xi and nu from a thin SVD and the explicit D D^T product.
    fn kappa_terms_oracle(a: &DMatrix<f64>) -> (f64, f64) {
        let n = a.nrows() as f64;
        let svd = SVD::new(a.clone(), false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let kappa = smax / smin;
        let ones = nalgebra::DVector::from_element(a.nrows(), 1.0);
        let quad = (ones.transpose() * a * a.transpose() * &ones)[(0, 0)];
        let t = quad / (smax * smax) / n;
        (kappa * n / (n - 1.0) * (1.0 / (kappa * kappa) - t), kappa * t)
    }

    #[test]
    fn kappa_bound_matches_independent_evaluation() {
        let mut checked = 0;
        for seed in 0..50 {
            let mut a = random_matrix(16, 8, seed);
            // Zero-mean-ish columns keep xi positive.
            for mut col in a.column_iter_mut() {
                let m = col.mean();
                col.add_scalar_mut(-m);
            }
            let d = normalize_columns(a).unwrap();
            let (xi, nu) = kappa_terms_oracle(d.atoms());
            match kappa_ratio_bound(&d, 4.0) {
                Ok(b) => {
                    assert_relative_eq!(b.xi, xi, max_relative = 1e-9);
                    assert_relative_eq!(b.nu, nu, epsilon = 1e-9);
                    assert_relative_eq!(b.ratio_upper, (4.0 - nu) / xi, max_relative = 1e-9);
                    checked += 1;
                }
                Err(Error::KappaInfeasible(KappaInfeasibility::CapTooSmall { xi: x, .. })) => {
                    assert!(4.0 <= xi + nu + 1e-9);
                    assert_relative_eq!(x, xi, max_relative = 1e-9);
                }
                Err(Error::KappaInfeasible(KappaInfeasibility::RatioNotAboveOne { .. })) => {}
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(checked > 0, "no feasible instance exercised");
    }

    #[test]
    fn kappa_cap_too_small() {
        let d = normalize_columns(random_matrix(16, 8, 3)).unwrap();
        let (xi, nu) = kappa_terms_oracle(d.atoms());
        let cap = (xi + nu).max(1.0);
        assert!(matches!(
            kappa_ratio_bound(&d, cap),
            Err(Error::KappaInfeasible(_))
        ));
    }

    #[test]
    fn rip_bound_coherence_free_example() {
        let b = rip_ratio_bound(64, 3, 0.0, 0.4).unwrap();
        let c1 = 5.0 * 63.0 * 63.0 / 4096.0;
        let c2 = 5.0 * 63.0 / 64.0;
        assert_relative_eq!(b.c1, c1, epsilon = 1e-13);
        assert_relative_eq!(b.c2, c2, epsilon = 1e-13);
        assert_relative_eq!(b.ratio_upper.unwrap(), c1 / (c2 - 0.4), epsilon = 1e-13);
        assert!(b.feasible(), "{:?}", b.violations);
        assert!(b.ratio_upper.unwrap() > 1.0);
    }

    #[test]
    fn rip_bound_small_dimension_reported() {
        // q = 0.4 / 5 = 0.08, mu = 0.05 -> n_max approx 1/(q - mu) scale, well above 10.
        let b = rip_ratio_bound(10, 3, 0.05, 0.4).unwrap();
        assert_eq!(b.case, RipCase::AboveLargerRoot);
        assert!(b
            .violations
            .iter()
            .any(|v| matches!(v, RipViolation::DimensionTooSmall { .. })));
        assert!(!b.feasible());
    }

    #[test]
    fn rip_bound_high_coherence_reported() {
        let b = rip_ratio_bound(64, 3, 0.2, 0.4).unwrap();
        assert_eq!(b.case, RipCase::Infeasible);
        assert!(b
            .violations
            .iter()
            .any(|v| matches!(v, RipViolation::CoherenceTooLarge { .. })));
        assert!(b
            .violations
            .iter()
            .any(|v| matches!(v, RipViolation::SparsityAboveCoherenceLimit { .. })));
    }

    #[test]
    fn rip_case_one_needs_k2_and_large_delta() {
        // k = 2, delta > 3/4 makes mu_min positive.
        let b = rip_ratio_bound(8, 2, 0.0, 0.9).unwrap();
        assert!(b.mu_min() > 0.0);
        let mu = 0.5 * b.mu_min();
        let b = rip_ratio_bound(4, 2, mu, 0.9).unwrap();
        assert_eq!(b.case, RipCase::NoRealRoots);
        assert!(b.n_max.is_none());
        assert!(!b.violations.iter().any(|v| matches!(v, RipViolation::DimensionTooSmall { .. })));
        // Delta above the recovery threshold is still flagged.
        assert!(b
            .violations
            .iter()
            .any(|v| matches!(v, RipViolation::DeltaAboveRecoveryThreshold { .. })));
        // At the default delta, mu_min is negative for every k >= 2.
        for k in 2..10 {
            assert!(mu_min(0.4, 2 * k) < 0.0);
        }
    }

    #[test]
    fn rip_ratio_above_one_iff_h_positive() {
        for n in [8usize, 12, 20, 64, 200] {
            for k in [2usize, 3, 4] {
                if 2 * k > n {
                    continue;
                }
                for mu in [0.0, 0.01, 0.05, 0.1, 0.3] {
                    let b = rip_ratio_bound(n, k, mu, 0.4).unwrap();
                    let q = 0.4 / (2.0 * k as f64 - 1.0);
                    let nf = n as f64;
                    let h = nf * nf * (q - mu) - nf + 1.0 - mu;
                    let r = b.ratio_upper.unwrap();
                    assert_eq!(r > 1.0, h > 0.0, "n={n} k={k} mu={mu}");
                    if b.feasible() {
                        assert!(r > 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn rip_rejects_bad_inputs() {
        assert!(rip_ratio_bound(64, 1, 0.0, 0.4).is_err());
        assert!(rip_ratio_bound(4, 3, 0.0, 0.4).is_err());
        assert!(rip_ratio_bound(64, 3, 1.0, 0.4).is_err());
        assert!(rip_ratio_bound(64, 3, 0.0, 0.0).is_err());
    }

    #[test]
    fn caps_take_the_minimum() {
        assert_eq!(combine_caps(Some(2.7), Some(3.1)), (2.7, RatioSource::RipLimited));
        assert_eq!(combine_caps(Some(3.1), Some(2.7)), (2.7, RatioSource::KappaLimited));
        assert_eq!(combine_caps(Some(2.7), None), (2.7, RatioSource::RipLimited));
        assert_eq!(combine_caps(None, None), (4.0, RatioSource::DefaultFallback));
    }

    #[test]
    fn selection_on_complete_dct_is_rip_limited() {
        let d = dct_dictionary(64, 64).unwrap();
        let sel = select_ratio(&d, SelectionOptions::default_for(64)).unwrap();
        assert_eq!(sel.k_used, 6);
        assert!(sel.kappa.is_err());
        assert_eq!(sel.source, RatioSource::RipLimited);
        assert!(sel.ratio > 1.0);
    }

    #[test]
    fn selection_falls_back_when_both_infeasible() {
        let d = normalize_columns(random_matrix(12, 16, 7)).unwrap();
        let sel = select_ratio(&d, SelectionOptions { kappa_max: 4.0, delta: 0.4, k: 2 }).unwrap();
        assert_eq!(sel.source, RatioSource::DefaultFallback);
        assert_eq!(sel.ratio, 4.0);
    }

    #[test]
    fn bruteforce_is_zero_for_isometry() {
        let n = 8;
        let params = CsimParams::new(1.0, 3.0, n).unwrap();
        let kernel = CsimKernel::new(params);
        let q = dct_dictionary(n, n).unwrap();

        // W^{-1/2} = a I + b 11^T; then W^{1/2} (W^{-1/2} Q) = Q.
        let a = 1.0 / kernel.sqrt_diag();
        let b = ((n as f64 / params.k1()).sqrt() - a) / n as f64;
        let mut weighted = q.atoms().clone();
        for mut col in weighted.column_iter_mut() {
            let shift = b * col.sum();
            col.iter_mut().for_each(|v| *v = a * *v + shift);
            let w = apply_kernel_sqrt(col.as_slice(), &kernel).unwrap();
            col.copy_from_slice(&w);
        }
        let g = weighted.tr_mul(&weighted);
        assert!((g - DMatrix::identity(n, n)).abs().max() < 1e-12);

        // W^{-1/2} Q does not have unit columns, so check the enumerator with
        // the identity kernel (k1/n = k2/(n-1) = 1) on Q itself.
        let unit = CsimKernel::new(CsimParams::new(n as f64, n as f64 - 1.0, n).unwrap());
        let delta = verify_rip_bruteforce(&q, &unit, 4).unwrap();
        assert!(delta < 1e-12, "delta = {delta}");
    }

    #[test]
    fn bruteforce_below_gershgorin_bound() {
        let n = 12;
        let d = normalize_columns(random_matrix(n, 16, 21)).unwrap();
        let two_k = 4;
        for ratio in [1.5, 4.0] {
            let params = CsimParams::with_ratio(n, ratio).unwrap();
            let kernel = CsimKernel::new(params);
            let measured = verify_rip_bruteforce(&d, &kernel, two_k).unwrap();
            let (t1, t2) = (kernel.theta1(), kernel.theta2());
            let nf = n as f64;
            let s = two_k as f64 - 1.0;
            let bound = (1.0 - t1).max(t1 + nf * t2 - 1.0)
                + (nf - 1.0) * s * t2.abs()
                + (t1.abs() + t2.abs()) * s * d.coherence();
            assert!(measured <= bound + 1e-12, "measured {measured} > bound {bound}");
        }
    }

    #[test]
    fn bruteforce_budget_guard() {
        let d = dct_dictionary(64, 64).unwrap();
        let k = CsimKernel::new(CsimParams::default_for(64).unwrap());
        assert!(matches!(
            verify_rip_bruteforce(&d, &k, 6),
            Err(Error::CombinatorialBudget { .. })
        ));
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(16, 4), 1820);
        assert_eq!(binomial(64, 6), 74_974_368);
    }
}
