//! Sparsifying dictionaries: complete and oversampled DCT, Haar wavelet
//! packets. Columns are atoms and always carry unit 2-norm.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::mutual_coherence;

const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryKind {
    Dct,
    HaarWp,
}

impl DictionaryKind {
    pub fn build(self, n: usize, p: usize) -> Result<Dictionary> {
        match self {
            DictionaryKind::Dct => dct_dictionary(n, p),
            DictionaryKind::HaarWp => haar_wp_dictionary(n, p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DictionaryKind::Dct => "dct",
            DictionaryKind::HaarWp => "haar-wp",
        }
    }
}

impl fmt::Display for DictionaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DictionaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dct" => Ok(DictionaryKind::Dct),
            "haar-wp" | "haar" | "wp" => Ok(DictionaryKind::HaarWp),
            other => Err(Error::invalid("dict", format!("unknown dictionary `{other}`"))),
        }
    }
}

/// `n x p` matrix of unit-norm atoms with cached `||D||^2` and coherence.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    spectral_norm_sq: f64,
    coherence: f64,
}

impl Dictionary {
    /// Wraps an already-normalized atom matrix.
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::invalid("atoms", "dictionary must be non-empty"));
        }
        for (j, col) in atoms.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::invalid(
                    "atoms",
                    format!("column {j} has norm {norm}, expected 1"),
                ));
            }
        }
        let coherence = if atoms.ncols() < 2 {
            0.0
        } else {
            mutual_coherence(&atoms)?
        };
        let spectral_norm_sq = spectral_norm_sq(&atoms);
        Ok(Self {
            atoms,
            spectral_norm_sq,
            coherence,
        })
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn n(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn p(&self) -> usize {
        self.atoms.ncols()
    }

    /// `lambda_max(D^T D)`.
    pub fn spectral_norm_sq(&self) -> f64 {
        self.spectral_norm_sq
    }

    pub fn coherence(&self) -> f64 {
        self.coherence
    }

    /// `D s`.
    pub fn synthesize(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.atoms * s
    }

    /// `D^T x`.
    pub fn analyze(&self, x: &DVector<f64>) -> DVector<f64> {
        self.atoms.tr_mul(x)
    }

    /// Row-major CSV: a `n,p` header line, the two sizes, then `n` rows of
    /// `p` values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,p")?;
        writeln!(out, "{},{}", self.n(), self.p())?;
        for row in self.atoms.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Scales every column to unit 2-norm.
pub fn normalize_columns(mut atoms: DMatrix<f64>) -> Result<Dictionary> {
    for (j, mut col) in atoms.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("atoms", format!("column {j} has norm {norm}")));
        }
        col /= norm;
    }
    Dictionary::new(atoms)
}

/// Largest eigenvalue of `D^T D` by power iteration on the smaller Gram
/// matrix. Stops once the eigen-residual `||G v - rho v||` drops below
/// `1e-10 * rho`.
pub fn spectral_norm_sq(atoms: &DMatrix<f64>) -> f64 {
    let gram = if atoms.nrows() <= atoms.ncols() {
        atoms * atoms.transpose()
    } else {
        atoms.tr_mul(atoms)
    };
    let dim = gram.nrows();
    // Fixed, non-symmetric start vector so results are reproducible and not
    // orthogonal to the leading eigenvector for structured dictionaries.
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.754_877_666).sin());
    v.normalize_mut();
    let mut rho = 0.0;
    for _ in 0..100_000 {
        let gv = &gram * &v;
        rho = v.dot(&gv);
        let residual = (&gv - &v * rho).norm();
        let norm = gv.norm();
        if norm == 0.0 {
            return 0.0;
        }
        if residual <= 1e-10 * rho.abs() {
            break;
        }
        v = gv / norm;
    }
    rho
}

/// DCT atoms `cos(pi k (2i + 1) / (2p))`, `k = 0..p`, sampled on `n` points
/// and normalized. For `p = n` this is the orthonormal DCT-II basis; for
/// `p > n` an oversampled-frequency frame.
pub fn dct_dictionary(n: usize, p: usize) -> Result<Dictionary> {
    if n < 2 {
        return Err(Error::invalid("n", format!("need n >= 2, got {n}")));
    }
    if p < n {
        return Err(Error::invalid("p", format!("need p >= n = {n}, got {p}")));
    }
    let atoms = DMatrix::from_fn(n, p, |i, k| {
        (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * p as f64)).cos()
    });
    normalize_columns(atoms)
}

/// Haar wavelet-packet atoms. `p = n` gives the full-depth packet basis
/// (orthonormal); `p = 2n` the union of depths `log2 n` and `log2 n - 1`.
pub fn haar_wp_dictionary(n: usize, p: usize) -> Result<Dictionary> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid("n", format!("Haar packets need a power of two >= 2, got {n}")));
    }
    let depth = n.trailing_zeros() as usize;
    let atoms = if p == n {
        haar_packet_basis(n, depth)
    } else if p == 2 * n {
        let full = haar_packet_basis(n, depth);
        let coarse = haar_packet_basis(n, depth - 1);
        let mut both = DMatrix::zeros(n, 2 * n);
        both.columns_mut(0, n).copy_from(&full);
        both.columns_mut(n, n).copy_from(&coarse);
        both
    } else {
        return Err(Error::invalid("p", format!("Haar packets support p = n or 2n, got {p}")));
    };
    normalize_columns(atoms)
}

/// One level of the packet split applied to every band of `coeffs`: each band
/// of length `len` becomes `[low | high]` with halves of length `len / 2`.
fn split_bands(coeffs: &[f64], band_len: usize) -> Vec<f64> {
    let half = band_len / 2;
    let mut out = vec![0.0; coeffs.len()];
    for (band, dst) in coeffs.chunks(band_len).zip(out.chunks_mut(band_len)) {
        for i in 0..half {
            let (a, b) = (band[2 * i], band[2 * i + 1]);
            dst[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
            dst[half + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    out
}

/// Atoms of the depth-`depth` packet basis. The analysis transform `T` is
/// orthogonal, so its rows are the atoms: column `j` of the returned matrix is
/// row `j` of `T`, assembled from `T e_i`.
fn haar_packet_basis(n: usize, depth: usize) -> DMatrix<f64> {
    let mut transform = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut coeffs = vec![0.0; n];
        coeffs[i] = 1.0;
        let mut band_len = n;
        for _ in 0..depth {
            coeffs = split_bands(&coeffs, band_len);
            band_len /= 2;
        }
        transform.set_column(i, &DVector::from_vec(coeffs));
    }
    transform.transpose()
}
