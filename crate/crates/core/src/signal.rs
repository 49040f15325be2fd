//! Sampling masks, patches, synthetic signals and seeded random streams.

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};

/// Version tag for the substream derivation; bump if [`substream`] changes.
pub const RNG_STREAM_VERSION: u32 = 1;

/// What a random stream is used for. Each purpose gets an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Signal = 1,
    Mask = 2,
    Noise = 3,
    Dictionary = 4,
    Image = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `(master, trial, purpose, index)`.
pub fn substream_seed(master: u64, trial: u64, purpose: Purpose, index: u64) -> u64 {
    let mut h = splitmix64(master ^ u64::from(RNG_STREAM_VERSION) << 56);
    for word in [trial, purpose as u64, index] {
        h = splitmix64(h ^ word);
    }
    h
}

/// ChaCha8 generator on the substream `(master, trial, purpose, index)`.
pub fn substream(master: u64, trial: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, trial, purpose, index))
}

/// Observed positions of a length-`n` signal, i.e. the 0/1 diagonal `M`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SamplingMask {
    n: usize,
    observed: Vec<usize>,
    #[serde(skip)]
    flags: Vec<bool>,
}

impl SamplingMask {
    pub fn new(n: usize, mut observed: Vec<usize>) -> Result<Self> {
        observed.sort_unstable();
        observed.dedup();
        if observed.is_empty() {
            return Err(Error::invalid("mask", "at least one observed sample is required"));
        }
        if let Some(&last) = observed.last() {
            if last >= n {
                return Err(Error::invalid("mask", format!("index {last} out of range for n = {n}")));
            }
        }
        let mut flags = vec![false; n];
        for &i in &observed {
            flags[i] = true;
        }
        Ok(Self { n, observed, flags })
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, (0..n).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.observed.len()
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn sampling_ratio(&self) -> f64 {
        self.m() as f64 / self.n as f64
    }

    /// `M x` on a vector, in place.
    pub fn project(&self, x: &mut DVector<f64>) {
        for (v, &keep) in x.iter_mut().zip(&self.flags) {
            if !keep {
                *v = 0.0;
            }
        }
    }
}

/// Observation count for a sampling ratio: `round(sr * n)` clamped to `1..=n`.
pub fn observed_count(n: usize, sr: f64) -> Result<usize> {
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(Error::invalid("sr", format!("sampling ratio must be in (0, 1], got {sr}")));
    }
    Ok(((sr * n as f64).round() as usize).clamp(1, n))
}

/// Uniform `m`-subset of `0..n` from a seed.
pub fn random_mask(n: usize, m: usize, seed: u64) -> Result<SamplingMask> {
    random_mask_with(n, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_mask_with<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<SamplingMask> {
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("need 1 <= m <= n = {n}, got {m}")));
    }
    SamplingMask::new(n, index::sample(rng, n, m).into_vec())
}

/// `M ⊙ x`: zeros at unobserved positions.
pub fn apply_mask(x: &[f64], mask: &SamplingMask) -> Result<Vec<f64>> {
    check_len(mask.n(), x.len())?;
    Ok(x
        .iter()
        .zip(mask.flags())
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect())
}

/// Row-major grayscale image, values on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image", "empty image"));
        }
        check_len(width * height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Rounded and clamped to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Square patches over an image in raster order, last row/column clamped to
/// the border so every pixel is covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    height: usize,
    width: usize,
    side: usize,
    stride: usize,
    origins: Vec<(usize, usize)>,
}

fn axis_origins(len: usize, side: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=len - side).step_by(stride).collect();
    if out.last().is_some_and(|&o| o + side < len) {
        out.push(len - side);
    }
    out
}

impl PatchGrid {
    pub const DEFAULT_SIDE: usize = 8;

    pub fn new(height: usize, width: usize, side: usize, stride: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image", "empty image"));
        }
        if side == 0 || stride == 0 {
            return Err(Error::invalid("patch", "side and stride must be positive"));
        }
        if side > height || side > width {
            return Err(Error::invalid(
                "patch",
                format!("side {side} exceeds image {height}x{width}"),
            ));
        }
        let rows = axis_origins(height, side, stride);
        let cols = axis_origins(width, side, stride);
        let origins = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect();
        Ok(Self {
            height,
            width,
            side,
            stride,
            origins,
        })
    }

    /// Non-overlapping tiling.
    pub fn tiling(height: usize, width: usize, side: usize) -> Result<Self> {
        Self::new(height, width, side, side)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn patch_len(&self) -> usize {
        self.side * self.side
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Top-left `(row, col)` of each patch.
    pub fn origins(&self) -> &[(usize, usize)] {
        &self.origins
    }

    fn check(&self, image: &Image) -> Result<()> {
        check_len(self.height, image.height)?;
        check_len(self.width, image.width)
    }
}

/// Raster-scanned patch vectors.
pub fn extract_patches(image: &Image, grid: &PatchGrid) -> Result<Vec<Vec<f64>>> {
    grid.check(image)?;
    let s = grid.side;
    Ok(grid
        .origins
        .iter()
        .map(|&(r0, c0)| {
            let mut v = Vec::with_capacity(s * s);
            for r in r0..r0 + s {
                let row = r * image.width;
                v.extend_from_slice(&image.data[row + c0..row + c0 + s]);
            }
            v
        })
        .collect())
}

/// Inverse of [`extract_patches`]; overlapping pixels are averaged.
pub fn reassemble(patches: &[Vec<f64>], grid: &PatchGrid) -> Result<Image> {
    check_len(grid.len(), patches.len())?;
    let s = grid.side;
    let mut sum = vec![0.0; grid.height * grid.width];
    let mut count = vec![0u32; grid.height * grid.width];
    for (patch, &(r0, c0)) in patches.iter().zip(&grid.origins) {
        check_len(s * s, patch.len())?;
        for dr in 0..s {
            for dc in 0..s {
                let idx = (r0 + dr) * grid.width + c0 + dc;
                sum[idx] += patch[dr * s + dc];
                count[idx] += 1;
            }
        }
    }
    let data = sum
        .into_iter()
        .zip(count)
        .map(|(v, c)| v / f64::from(c))
        .collect();
    Image::new(grid.width, grid.height, data)
}

/// `x = D s` with a `k`-sparse standard normal `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSparseSignal {
    pub s: DVector<f64>,
    pub x: DVector<f64>,
    pub support: Vec<usize>,
    pub seed: u64,
}

/// `ceil(0.1 p)`.
pub fn default_sparsity(p: usize) -> usize {
    p.div_ceil(10).max(1)
}

pub fn synth_sparse_signal(dict: &Dictionary, k: usize, seed: u64) -> Result<SyntheticSparseSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sig = synth_sparse_signal_with(dict, k, &mut rng)?;
    sig.seed = seed;
    Ok(sig)
}

/// Same as [`synth_sparse_signal`] on a caller-owned stream (`seed` is left 0).
pub fn synth_sparse_signal_with<R: Rng + ?Sized>(
    dict: &Dictionary,
    k: usize,
    rng: &mut R,
) -> Result<SyntheticSparseSignal> {
    let p = dict.p();
    if k == 0 || k > p {
        return Err(Error::invalid("k", format!("need 1 <= k <= p = {p}, got {k}")));
    }
    let mut support = index::sample(rng, p, k).into_vec();
    support.sort_unstable();
    let mut s = DVector::zeros(p);
    for &i in &support {
        // A draw of exactly 0.0 would break the k-nonzero invariant.
        let mut v: f64 = StandardNormal.sample(rng);
        while v == 0.0 {
            v = StandardNormal.sample(rng);
        }
        s[i] = v;
    }
    let x = dict.synthesize(&s);
    Ok(SyntheticSparseSignal {
        s,
        x,
        support,
        seed: 0,
    })
}

/// `x + N(0, sigma^2)` per sample.
pub fn add_gaussian_noise<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    Ok(x.iter().map(|&v| v + normal.sample(rng)).collect())
}

/// Noise variance giving `snr_db` against the signal's sample variance.
pub fn noise_variance_for_snr(x: &[f64], snr_db: f64) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::invalid("signal", "need at least two samples"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var / 10f64.powf(snr_db / 10.0))
}

/// Piecewise-smooth test image: a tilted gradient with a low-frequency
/// ripple, overlaid with flat and shaded rectangles and discs.
pub fn synth_piecewise_smooth(height: usize, width: usize, seed: u64) -> Result<Image> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("image", "empty image"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);
    let gx: f64 = rng.random_range(-60.0..60.0);
    let gy: f64 = rng.random_range(-60.0..60.0);
    let fx: f64 = rng.random_range(0.5..2.0);
    let fy: f64 = rng.random_range(0.5..2.0);
    let mut data: Vec<f64> = (0..height * width)
        .map(|i| {
            let (u, v) = ((i % width) as f64 / w, (i / width) as f64 / h);
            let ripple = 12.0 * (std::f64::consts::TAU * (fx * u + fy * v)).sin();
            128.0 + gx * (u - 0.5) + gy * (v - 0.5) + ripple
        })
        .collect();

    let shapes = 6 + (height * width / 4096).min(10);
    for _ in 0..shapes {
        let level: f64 = rng.random_range(20.0..235.0);
        let shade: f64 = rng.random_range(-30.0..30.0);
        let cy = rng.random_range(0.0..h);
        let cx = rng.random_range(0.0..w);
        let ry = rng.random_range(0.08..0.3) * h;
        let rx = rng.random_range(0.08..0.3) * w;
        let disc = rng.random_bool(0.5);
        for r in 0..height {
            for c in 0..width {
                let dy = (r as f64 - cy) / ry;
                let dx = (c as f64 - cx) / rx;
                let inside = if disc {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    data[r * width + c] = level + shade * dx;
                }
            }
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 255.0);
    }
    Image::new(width, height, data)
}
