//! Logistic wavelet graphon `W(x,y) = sigmoid(c + f_S(x,y))` with a sparse,
//! band-limited, symmetric coefficient matrix `S`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{dyadic_levels, forward_haar_2d, WaveletIndex};
use crate::error::{Error, Result};
use crate::link::{check_open_probability, logit, sigmoid};

/// Unordered pair of 1D atoms in canonical orientation (`r <= s`).
pub type PairKey = (WaveletIndex, WaveletIndex);

fn canonical(r: WaveletIndex, s: WaveletIndex) -> PairKey {
    if r <= s {
        (r, s)
    } else {
        (s, r)
    }
}

/// Inclusive range of detail scales `[min, max]` allowed in a kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub min: u32,
    pub max: u32,
}

impl Band {
    pub fn new(min: u32, max: u32) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidInput(format!("band [{min}, {max}] is empty")));
        }
        Ok(Band { min, max })
    }

    pub fn contains(&self, idx: WaveletIndex) -> bool {
        idx.scale().is_none_or(|j| j >= self.min && j <= self.max)
    }

    pub fn hull(self, other: Band) -> Band {
        Band { min: self.min.min(other.min), max: self.max.max(other.max) }
    }
}

/// Offset `c` plus the symmetric coefficient matrix `S`.
///
/// Each unordered pair is stored once; reads mirror. The `(DC, DC)` entry is
/// never stored: adding to it adds to `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandCoefficients {
    c: f64,
    entries: BTreeMap<PairKey, f64>,
    band: Band,
}

impl BandCoefficients {
    pub fn new(c: f64, band: Band) -> Self {
        BandCoefficients { c, entries: BTreeMap::new(), band }
    }

    /// Zero kernel with band `[0, 0]`.
    pub fn zero() -> Self {
        Self::new(0.0, Band { min: 0, max: 0 })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn set_c(&mut self, c: f64) {
        self.c = c;
    }

    pub fn band(&self) -> Band {
        self.band
    }

    /// Widen the band; never narrows it.
    pub fn extend_band(&mut self, band: Band) {
        self.band = self.band.hull(band);
    }

    /// `s_{rs}` (equal to `s_{sr}`).
    pub fn get(&self, r: WaveletIndex, s: WaveletIndex) -> f64 {
        if r.is_dc() && s.is_dc() {
            return 0.0;
        }
        self.entries.get(&canonical(r, s)).copied().unwrap_or(0.0)
    }

    fn check_band(&self, r: WaveletIndex, s: WaveletIndex) -> Result<()> {
        for idx in [r, s] {
            if !self.band.contains(idx) {
                return Err(Error::InvalidInput(format!(
                    "index {idx} outside band [{}, {}]",
                    self.band.min, self.band.max
                )));
            }
        }
        Ok(())
    }

    /// Set `s_{rs} = s_{sr} = v`; a zero value removes the entry.
    pub fn set(&mut self, r: WaveletIndex, s: WaveletIndex, v: f64) -> Result<()> {
        if r.is_dc() && s.is_dc() {
            return Err(Error::InvalidInput("s_00 is folded into c; use set_c".into()));
        }
        self.check_band(r, s)?;
        let key = canonical(r, s);
        if v == 0.0 {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, v);
        }
        Ok(())
    }

    /// `s_{rs} += v` (symmetrically); `(DC, DC)` goes to `c`.
    pub fn add(&mut self, r: WaveletIndex, s: WaveletIndex, v: f64) -> Result<()> {
        if r.is_dc() && s.is_dc() {
            self.c += v;
            return Ok(());
        }
        let cur = self.get(r, s);
        self.set(r, s, cur + v)
    }

    /// Stored pairs in canonical orientation.
    pub fn entries(&self) -> impl Iterator<Item = (WaveletIndex, WaveletIndex, f64)> + '_ {
        self.entries.iter().map(|(&(r, s), &v)| (r, s, v))
    }

    /// Every nonzero ordered pair `(r, s)`, off-diagonal pairs appearing twice.
    pub fn ordered_entries(&self) -> impl Iterator<Item = (WaveletIndex, WaveletIndex, f64)> + '_ {
        self.entries().flat_map(|(r, s, v)| {
            let mirror = (r != s).then_some((s, r, v));
            std::iter::once((r, s, v)).chain(mirror)
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Finest detail scale present in the stored entries.
    pub fn max_scale(&self) -> Option<u32> {
        self.entries.keys().flat_map(|&(r, s)| [r.scale(), s.scale()]).flatten().max()
    }

    /// `f_S(x, y)` without the offset.
    pub fn interaction(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for (&(r, s), &v) in &self.entries {
            if r == s {
                acc += v * (r.eval(x) * r.eval(y));
            } else {
                acc += v * (r.eval(x) * s.eval(y) + s.eval(x) * r.eval(y));
            }
        }
        acc
    }

    /// `c + f_S(x, y)`.
    pub fn logit_eval(&self, x: f64, y: f64) -> f64 {
        self.c + self.interaction(x, y)
    }

    /// `#{(r, s) : s_{rs} != 0}` over ordered pairs; `c` is not counted.
    pub fn wavelet_complexity(&self) -> usize {
        self.entries.keys().map(|&(r, s)| if r == s { 1 } else { 2 }).sum()
    }

    /// `sum_{r,s} s_{rs}^2` over ordered pairs.
    pub fn interaction_energy(&self) -> f64 {
        self.ordered_entries().map(|(_, _, v)| v * v).sum()
    }

    /// Coefficient-wise sum; the band is the hull of both bands.
    pub fn plus(&self, other: &BandCoefficients) -> BandCoefficients {
        let mut out = self.clone();
        out.extend_band(other.band);
        out.c += other.c;
        for (r, s, v) in other.entries() {
            out.add(r, s, v).expect("band widened to cover both operands");
        }
        out
    }

    /// Logit values at the midpoints of a `k x k` grid, row-major.
    pub fn logit_surface(&self, k: usize) -> Vec<f64> {
        let mids: Vec<f64> = (0..k).map(|a| (a as f64 + 0.5) / k as f64).collect();
        let mut out = Vec::with_capacity(k * k);
        for &x in &mids {
            for &y in &mids {
                out.push(self.logit_eval(x, y));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&KernelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: KernelFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct KernelEntry {
    j1: i64,
    l1: u64,
    j2: i64,
    l2: u64,
    value: f64,
}

/// On-disk kernel layout: `{c, band: [Jmin, Jmax], entries: [{j1,l1,j2,l2,value}]}`.
#[derive(Serialize, Deserialize)]
struct KernelFile {
    c: f64,
    band: [u32; 2],
    entries: Vec<KernelEntry>,
}

impl From<&BandCoefficients> for KernelFile {
    fn from(k: &BandCoefficients) -> Self {
        let entries = k
            .entries()
            .map(|(r, s, value)| {
                let (j1, l1) = r.to_pair();
                let (j2, l2) = s.to_pair();
                KernelEntry { j1, l1, j2, l2, value }
            })
            .collect();
        KernelFile { c: k.c, band: [k.band.min, k.band.max], entries }
    }
}

impl TryFrom<KernelFile> for BandCoefficients {
    type Error = Error;

    fn try_from(file: KernelFile) -> Result<Self> {
        let band = Band::new(file.band[0], file.band[1])?;
        let mut out = BandCoefficients::new(file.c, band);
        for e in file.entries {
            if !e.value.is_finite() {
                return Err(Error::InvalidInput("non-finite kernel coefficient".into()));
            }
            let r = WaveletIndex::from_pair(e.j1, e.l1)?;
            let s = WaveletIndex::from_pair(e.j2, e.l2)?;
            out.add(r, s, e.value)?;
        }
        if !out.c.is_finite() {
            return Err(Error::InvalidInput("non-finite offset c".into()));
        }
        Ok(out)
    }
}

const MAX_TABLE_DEPTH: u32 = 10;

/// `W_{c,S}` together with a lookup table of its values.
///
/// A kernel whose finest detail scale is `J` is constant on the cells of the
/// `2^{J+1}` dyadic grid, so the table reproduces direct evaluation exactly.
#[derive(Clone, Debug)]
pub struct Graphon {
    coeffs: BandCoefficients,
    depth: u32,
    table: Option<Vec<f64>>,
}

impl Graphon {
    pub fn new(coeffs: BandCoefficients) -> Self {
        let depth = coeffs.max_scale().map_or(0, |j| j + 1);
        let table = (depth <= MAX_TABLE_DEPTH).then(|| {
            coeffs.logit_surface(1usize << depth).into_iter().map(sigmoid).collect()
        });
        Graphon { coeffs, depth, table }
    }

    pub fn coeffs(&self) -> &BandCoefficients {
        &self.coeffs
    }

    /// Side exponent of the grid on which the graphon is piecewise constant.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn logit(&self, x: f64, y: f64) -> f64 {
        self.coeffs.logit_eval(x, y)
    }

    /// `sigmoid(c + f_S(x, y))`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.table {
            Some(table) => {
                let k = 1usize << self.depth;
                table[cell_of(x, k) * k + cell_of(y, k)]
            }
            None => sigmoid(self.logit(x, y)),
        }
    }

    /// Probabilities at the midpoints of a `k x k` grid.
    pub fn surface(&self, k: usize) -> Vec<f64> {
        let mids: Vec<f64> = (0..k).map(|a| (a as f64 + 0.5) / k as f64).collect();
        let mut out = Vec::with_capacity(k * k);
        for &x in &mids {
            for &y in &mids {
                out.push(self.eval(x, y));
            }
        }
        out
    }
}

pub(crate) fn cell_of(x: f64, k: usize) -> usize {
    ((x * k as f64) as usize).min(k - 1)
}

pub fn graphon_eval(g: &Graphon, x: f64, y: f64) -> f64 {
    g.eval(x, y)
}

/// Two-block SBM: `c = (logit p_in + logit p_out) / 2`,
/// `s_11 = (logit p_in - logit p_out) / 2` on the first Haar wavelet.
pub fn from_two_block(p_in: f64, p_out: f64) -> Result<BandCoefficients> {
    check_open_probability("p_in", p_in)?;
    check_open_probability("p_out", p_out)?;
    let (a, b) = (logit(p_in), logit(p_out));
    let mut out = BandCoefficients::new(0.5 * (a + b), Band { min: 0, max: 0 });
    let psi1 = WaveletIndex::detail(0, 0);
    out.set(psi1, psi1, 0.5 * (a - b))?;
    Ok(out)
}

/// Erdős–Rényi kernel with edge probability `p`.
pub fn from_erdos_renyi(p: f64) -> Result<BandCoefficients> {
    check_open_probability("p", p)?;
    Ok(BandCoefficients::new(logit(p), Band { min: 0, max: 0 }))
}

/// Finite-band realisation of a symmetric `k x k` logit surface.
///
/// The DC component becomes `c`; every other coefficient is stored in `S`.
/// Coefficients below `1e-14` times the surface scale are treated as zero.
pub fn project_logit_surface(grid: &[f64], k: usize) -> Result<BandCoefficients> {
    let levels = dyadic_levels(k)?;
    if grid.len() != k * k {
        return Err(Error::Dimension(format!("grid has {} values, expected {}", grid.len(), k * k)));
    }
    let scale = grid.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for a in 0..k {
        for b in (a + 1)..k {
            if (grid[a * k + b] - grid[b * k + a]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!("logit surface is not symmetric at ({a}, {b})")));
            }
        }
    }
    let coeffs = forward_haar_2d(grid, k)?;
    let kf = k as f64;
    let band = Band { min: 0, max: levels.saturating_sub(1) };
    let mut out = BandCoefficients::new(coeffs.values[0] / kf, band);
    let cutoff = 1e-14 * scale;
    for a in 0..k {
        for b in a..k {
            if a == 0 && b == 0 {
                continue;
            }
            let v = 0.5 * (coeffs.values[a * k + b] + coeffs.values[b * k + a]) / kf;
            if v.abs() > cutoff {
                out.set(WaveletIndex::from_flat(a), WaveletIndex::from_flat(b), v)?;
            }
        }
    }
    Ok(out)
}

/// Dyadic SBM with `2^J` equal blocks and block logits `c + beta[l][k]`.
pub fn from_dyadic_sbm(levels: u32, beta: &[f64], c: f64) -> Result<BandCoefficients> {
    let k = 1usize << levels;
    if beta.len() != k * k {
        return Err(Error::Dimension(format!(
            "block matrix has {} entries, expected {k} x {k}",
            beta.len()
        )));
    }
    let mut out = project_logit_surface(beta, k)?;
    out.c += c;
    Ok(out)
}

/// Sparse vector over 1D atoms.
pub type AtomVector = Vec<(WaveletIndex, f64)>;

/// `s_{rs} = sum_k b_{k,r} b_{k,s}` (logistic RDPG).
pub fn from_low_rank(vectors: &[AtomVector]) -> Result<BandCoefficients> {
    let scales: Vec<u32> = vectors.iter().flatten().filter_map(|(w, _)| w.scale()).collect();
    let band = match (scales.iter().min(), scales.iter().max()) {
        (Some(&lo), Some(&hi)) => Band { min: lo, max: hi },
        _ => Band { min: 0, max: 0 },
    };
    let mut out = BandCoefficients::new(0.0, band);
    for vec in vectors {
        let mut dense: BTreeMap<WaveletIndex, f64> = BTreeMap::new();
        for &(w, v) in vec {
            *dense.entry(w).or_default() += v;
        }
        let items: Vec<_> = dense.into_iter().collect();
        for (i, &(r, br)) in items.iter().enumerate() {
            for &(s, bs) in &items[i..] {
                // canonical pair (r <= s) stands for both s_rs and s_sr
                out.add(r, s, br * bs)?;
            }
        }
    }
    Ok(out)
}

/// `f0 + tau * sum_{r in R} psi_r (x) psi_r`; overlapping diagonal entries add.
pub fn hierarchical_anomaly_kernel(
    f0: &BandCoefficients,
    tau: f64,
    hotspots: &[WaveletIndex],
) -> Result<BandCoefficients> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau = {tau} must be positive")));
    }
    let mut out = f0.clone();
    for &r in hotspots {
        let j = r
            .scale()
            .ok_or_else(|| Error::InvalidInput("hotspot indices must be detail atoms".into()))?;
        out.extend_band(Band { min: j, max: j });
        out.add(r, r, tau)?;
    }
    Ok(out)
}

/// All `2^j` detail atoms at scale `j`.
pub fn scale_atoms(j: u32) -> Vec<WaveletIndex> {
    (0..1u32 << j).map(|l| WaveletIndex::detail(j, l)).collect()
}

pub fn wavelet_complexity(coeffs: &BandCoefficients) -> usize {
    coeffs.wavelet_complexity()
}

/// Covariance of a Gaussian coefficient law.
#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

impl Covariance {
    fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal(d) => d.len(),
            Covariance::Full(m) => m.nrows(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Covariance::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Covariance::Full(m) => m.clone(),
        }
    }

    fn plus(&self, other: &Covariance) -> Covariance {
        match (self, other) {
            (Covariance::Diagonal(a), Covariance::Diagonal(b)) => {
                Covariance::Diagonal(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            _ => Covariance::Full(self.to_matrix() + other.to_matrix()),
        }
    }
}

/// Gaussian law `N(mean, cov)` over a fixed list of coefficient pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientLaw {
    index: Vec<PairKey>,
    mean: Vec<f64>,
    cov: Covariance,
}

impl CoefficientLaw {
    pub fn gaussian(index: Vec<PairKey>, mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        let d = index.len();
        if mean.len() != d || cov.dim() != d {
            return Err(Error::Dimension(format!(
                "index set has {d} pairs, mean {} and covariance {}",
                mean.len(),
                cov.dim()
            )));
        }
        let index: Vec<PairKey> = index.into_iter().map(|(r, s)| canonical(r, s)).collect();
        match &cov {
            Covariance::Diagonal(diag) => {
                if diag.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::InvalidInput("negative variance".into()));
                }
            }
            Covariance::Full(m) => {
                if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                    return Err(Error::InvalidInput("covariance is not symmetric".into()));
                }
                if d > 0 && m.clone().symmetric_eigen().eigenvalues.min() < -1e-10 {
                    return Err(Error::InvalidInput("covariance is not positive semidefinite".into()));
                }
            }
        }
        Ok(CoefficientLaw { index, mean, cov })
    }

    pub fn index(&self) -> &[PairKey] {
        &self.index
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    /// Coefficient vector `theta` turned into a kernel.
    pub fn kernel(&self, theta: &[f64]) -> Result<BandCoefficients> {
        kernel_from_pairs(&self.index, theta)
    }

    /// Draw `theta ~ N(mean, cov)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.index.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        match &self.cov {
            Covariance::Diagonal(diag) => {
                self.mean.iter().zip(diag).zip(&z).map(|((m, v), z)| m + v.sqrt() * z).collect()
            }
            Covariance::Full(m) => {
                // symmetric square root tolerates singular covariances
                let eig = m.clone().symmetric_eigen();
                let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
                let x = root * DVector::from_column_slice(&z);
                self.mean.iter().zip(x.iter()).map(|(m, x)| m + x).collect()
            }
        }
    }
}

/// Kernel with `theta[k]` on pair `index[k]`.
pub fn kernel_from_pairs(index: &[PairKey], theta: &[f64]) -> Result<BandCoefficients> {
    if index.len() != theta.len() {
        return Err(Error::Dimension("coefficient vector does not match index set".into()));
    }
    let scales: Vec<u32> = index.iter().flat_map(|&(r, s)| [r.scale(), s.scale()]).flatten().collect();
    let band = Band { min: scales.iter().copied().min().unwrap_or(0), max: scales.iter().copied().max().unwrap_or(0) };
    let mut out = BandCoefficients::new(0.0, band);
    for (&(r, s), &v) in index.iter().zip(theta) {
        out.add(r, s, v)?;
    }
    Ok(out)
}

/// Law of `Theta1 + Theta2` for independent Gaussian laws on the same index set.
pub fn convolve_laws(a: &CoefficientLaw, b: &CoefficientLaw) -> Result<CoefficientLaw> {
    if a.index != b.index {
        return Err(Error::InvalidInput("coefficient laws are indexed by different pairs".into()));
    }
    Ok(CoefficientLaw {
        index: a.index.clone(),
        mean: a.mean.iter().zip(&b.mean).map(|(x, y)| x + y).collect(),
        cov: a.cov.plus(&b.cov),
    })
}

/// Weighted graph `Y_ij = c + f_S(U_i, U_j)` for `i < j`, upper-triangular row order.
pub fn weighted_graph(kernel: &BandCoefficients, positions: &[f64]) -> Vec<f64> {
    let n = positions.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(kernel.logit_eval(positions[i], positions[j]));
        }
    }
    out
}

/// Weighted degrees `D_i = sum_{j != i} Y_ij` from [`weighted_graph`] output.
pub fn weighted_degrees(n: usize, upper: &[f64]) -> Vec<f64> {
    let mut deg = vec![0.0; n];
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            deg[i] += upper[idx];
            deg[j] += upper[idx];
            idx += 1;
        }
    }
    deg
}
