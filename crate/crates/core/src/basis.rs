//! Haar system on (0,1): dyadic indexing, pointwise evaluation and the
//! orthonormal tensor-product transform on `K x K` grids with `K = 2^J`.
//!
//! Flat 1D indexing: the constant atom is `0`, the detail atom at scale `j`
//! and location `l` is `2^j + l`. A grid of side `K` therefore carries exactly
//! the atoms with scale `< log2 K`.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One atom of the 1D Haar system.
///
/// The derived order puts `Dc` first, then details by `(j, l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WaveletIndex {
    Dc,
    Detail { j: u32, l: u32 },
}

impl WaveletIndex {
    /// Detail atom; panics if `l >= 2^j`.
    pub fn detail(j: u32, l: u32) -> Self {
        assert!(j < 32 && (l as u64) < (1u64 << j), "location {l} out of range at scale {j}");
        WaveletIndex::Detail { j, l }
    }

    /// Checked constructor for untrusted input.
    pub fn try_detail(j: u32, l: u32) -> Result<Self> {
        if j >= 32 || (l as u64) >= (1u64 << j) {
            return Err(Error::InvalidInput(format!("location {l} out of range at scale {j}")));
        }
        Ok(WaveletIndex::Detail { j, l })
    }

    /// Scale of a detail atom, `None` for the constant.
    pub fn scale(self) -> Option<u32> {
        match self {
            WaveletIndex::Dc => None,
            WaveletIndex::Detail { j, .. } => Some(j),
        }
    }

    pub fn is_dc(self) -> bool {
        matches!(self, WaveletIndex::Dc)
    }

    pub fn flat(self) -> usize {
        match self {
            WaveletIndex::Dc => 0,
            WaveletIndex::Detail { j, l } => (1usize << j) + l as usize,
        }
    }

    pub fn from_flat(r: usize) -> Self {
        if r == 0 {
            WaveletIndex::Dc
        } else {
            let j = usize::BITS - 1 - r.leading_zeros();
            WaveletIndex::Detail { j, l: (r - (1usize << j)) as u32 }
        }
    }

    /// `(j, l)` pair used by the CSV and JSON formats, with `(-1, 0)` for DC.
    pub fn to_pair(self) -> (i64, u64) {
        match self {
            WaveletIndex::Dc => (-1, 0),
            WaveletIndex::Detail { j, l } => (j as i64, l as u64),
        }
    }

    pub fn from_pair(j: i64, l: u64) -> Result<Self> {
        match j {
            -1 if l == 0 => Ok(WaveletIndex::Dc),
            -1 => Err(Error::InvalidInput(format!("DC index must have l = 0, got {l}"))),
            j if j >= 0 => {
                let l = u32::try_from(l).map_err(|_| Error::InvalidInput(format!("location {l} too large")))?;
                WaveletIndex::try_detail(j as u32, l)
            }
            _ => Err(Error::InvalidInput(format!("scale {j} is negative"))),
        }
    }

    /// Value of the atom at `x`.
    ///
    /// Detail atoms are `2^{j/2}` on the left child of their interval and
    /// `-2^{j/2}` on the right child, with half-open children `[a, b)`.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            WaveletIndex::Dc => 1.0,
            WaveletIndex::Detail { j, l } => {
                let t = x * (1u64 << j) as f64;
                let cell = t.floor();
                if cell != l as f64 {
                    return 0.0;
                }
                let amp = haar_amplitude(j);
                if t - cell < 0.5 {
                    amp
                } else {
                    -amp
                }
            }
        }
    }

    /// All atoms with scale `< levels`, in flat order.
    pub fn all_below(levels: u32) -> impl Iterator<Item = WaveletIndex> {
        (0..1usize << levels).map(WaveletIndex::from_flat)
    }
}

impl fmt::Display for WaveletIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveletIndex::Dc => write!(f, "dc"),
            WaveletIndex::Detail { j, l } => write!(f, "({j},{l})"),
        }
    }
}

/// `2^{j/2}`, exact for even `j`.
pub fn haar_amplitude(j: u32) -> f64 {
    let base = (1u64 << (j / 2)) as f64;
    if j % 2 == 0 {
        base
    } else {
        base * std::f64::consts::SQRT_2
    }
}

/// Free function form of [`WaveletIndex::eval`].
pub fn eval_haar(idx: WaveletIndex, x: f64) -> f64 {
    idx.eval(x)
}

/// Half-open dyadic interval `[l 2^-j, (l+1) 2^-j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub j: u32,
    pub l: u32,
}

impl DyadicInterval {
    pub fn new(j: u32, l: u32) -> Self {
        assert!((l as u64) < (1u64 << j));
        DyadicInterval { j, l }
    }

    /// The scale-`j` interval containing `x`.
    pub fn containing(j: u32, x: f64) -> Self {
        let cells = 1u64 << j;
        let l = ((x * cells as f64).floor() as u64).min(cells - 1);
        DyadicInterval { j, l: l as u32 }
    }

    pub fn lo(self) -> f64 {
        self.l as f64 / (1u64 << self.j) as f64
    }

    pub fn hi(self) -> f64 {
        (self.l as f64 + 1.0) / (1u64 << self.j) as f64
    }

    pub fn contains(self, x: f64) -> bool {
        x >= self.lo() && x < self.hi()
    }

    pub fn children(self) -> (DyadicInterval, DyadicInterval) {
        (
            DyadicInterval { j: self.j + 1, l: 2 * self.l },
            DyadicInterval { j: self.j + 1, l: 2 * self.l + 1 },
        )
    }

    pub fn parent(self) -> Option<DyadicInterval> {
        (self.j > 0).then(|| DyadicInterval { j: self.j - 1, l: self.l / 2 })
    }

    /// The Haar detail atom supported on this interval.
    pub fn wavelet(self) -> WaveletIndex {
        WaveletIndex::Detail { j: self.j, l: self.l }
    }
}

/// `log2(k)` if `k` is a power of two.
pub fn dyadic_levels(k: usize) -> Result<u32> {
    if k == 0 || !k.is_power_of_two() {
        return Err(Error::Dimension(format!("grid side {k} is not a power of two")));
    }
    Ok(k.trailing_zeros())
}

/// Square array indexed by pairs of 1D flat indices, side `K = 2^levels`.
///
/// Entry `(a, b)` sits at `values[a * K + b]`. Depending on context the array
/// holds orthonormal transform coefficients of a `K x K` grid (see
/// [`forward_haar_2d`]) or continuous-domain coefficients `<f, psi_a (x) psi_b>`;
/// for a step function on the `K x K` grid the two differ by a factor `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientGrid2D {
    pub levels: u32,
    pub values: Vec<f64>,
}

impl CoefficientGrid2D {
    pub fn zeros(levels: u32) -> Self {
        let k = 1usize << levels;
        CoefficientGrid2D { levels, values: vec![0.0; k * k] }
    }

    pub fn from_values(k: usize, values: Vec<f64>) -> Result<Self> {
        let levels = dyadic_levels(k)?;
        if values.len() != k * k {
            return Err(Error::Dimension(format!("expected {} values, got {}", k * k, values.len())));
        }
        Ok(CoefficientGrid2D { levels, values })
    }

    pub fn side(&self) -> usize {
        1usize << self.levels
    }

    pub fn get(&self, r: WaveletIndex, s: WaveletIndex) -> f64 {
        self.values[r.flat() * self.side() + s.flat()]
    }

    pub fn set(&mut self, r: WaveletIndex, s: WaveletIndex, v: f64) {
        let k = self.side();
        self.values[r.flat() * k + s.flat()] = v;
    }

    /// Iterate `(row atom, column atom, value)` in flat order.
    pub fn iter(&self) -> impl Iterator<Item = (WaveletIndex, WaveletIndex, f64)> + '_ {
        let k = self.side();
        self.values
            .iter()
            .enumerate()
            .map(move |(idx, &v)| (WaveletIndex::from_flat(idx / k), WaveletIndex::from_flat(idx % k), v))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CoefficientGrid2D { levels: self.levels, values: self.values.iter().map(|v| v * factor).collect() }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// CSV with header `j1,l1,j2,l2,value`, one row per entry, DC as `j = -1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j1,l1,j2,l2,value\n");
        for (r, s, v) in self.iter() {
            let (j1, l1) = r.to_pair();
            let (j2, l2) = s.to_pair();
            let _ = writeln!(out, "{j1},{l1},{j2},{l2},{v}");
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv). Missing entries are zero; the side
    /// is the smallest that holds every listed atom, or `min_levels` if larger.
    pub fn from_csv(text: &str, min_levels: u32) -> Result<Self> {
        let mut entries = Vec::new();
        let mut levels = min_levels;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with("j1")) {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse { line: lineno + 1, msg: msg.to_string() };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(parse_err("expected 5 fields"));
            }
            let j1: i64 = fields[0].parse().map_err(|_| parse_err("bad j1"))?;
            let l1: u64 = fields[1].parse().map_err(|_| parse_err("bad l1"))?;
            let j2: i64 = fields[2].parse().map_err(|_| parse_err("bad j2"))?;
            let l2: u64 = fields[3].parse().map_err(|_| parse_err("bad l2"))?;
            let v: f64 = fields[4].parse().map_err(|_| parse_err("bad value"))?;
            let r = WaveletIndex::from_pair(j1, l1)?;
            let s = WaveletIndex::from_pair(j2, l2)?;
            for idx in [r, s] {
                if let Some(j) = idx.scale() {
                    levels = levels.max(j + 1);
                }
            }
            entries.push((r, s, v));
        }
        if levels > 14 {
            return Err(Error::Dimension(format!("coefficient scale {} too large", levels - 1)));
        }
        let mut grid = CoefficientGrid2D::zeros(levels);
        for (r, s, v) in entries {
            grid.set(r, s, v);
        }
        Ok(grid)
    }
}

fn haar_forward_1d(data: &mut [f64], scratch: &mut [f64]) {
    let mut len = data.len();
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let (a, b) = (data[2 * i], data[2 * i + 1]);
            scratch[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
            scratch[half + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
        }
        data[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
}

fn haar_inverse_1d(data: &mut [f64], scratch: &mut [f64]) {
    let k = data.len();
    let mut len = 2;
    while len <= k {
        let half = len / 2;
        for i in 0..half {
            let (s, d) = (data[i], data[half + i]);
            scratch[2 * i] = (s + d) * std::f64::consts::FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (s - d) * std::f64::consts::FRAC_1_SQRT_2;
        }
        data[..len].copy_from_slice(&scratch[..len]);
        len *= 2;
    }
}

fn transpose(values: &mut [f64], k: usize) {
    for a in 0..k {
        for b in (a + 1)..k {
            values.swap(a * k + b, b * k + a);
        }
    }
}

fn rows_apply(values: &mut [f64], k: usize, f: fn(&mut [f64], &mut [f64])) {
    values.par_chunks_mut(k).for_each(|row| {
        let mut scratch = vec![0.0; k];
        f(row, &mut scratch);
    });
}

/// Orthonormal 2D Haar transform of a row-major `K x K` grid.
///
/// Row `a` of the grid corresponds to the first coordinate. The result holds
/// `sum_{a,b} grid[a][b] h_r[a] h_s[b]` with `h_r` the unit-norm discrete atoms,
/// so a constant grid `v` maps to a lone DC entry `v K`.
pub fn forward_haar_2d(grid: &[f64], k: usize) -> Result<CoefficientGrid2D> {
    let levels = dyadic_levels(k)?;
    if grid.len() != k * k {
        return Err(Error::Dimension(format!("grid has {} values, expected {}", grid.len(), k * k)));
    }
    let mut values = grid.to_vec();
    rows_apply(&mut values, k, haar_forward_1d);
    transpose(&mut values, k);
    rows_apply(&mut values, k, haar_forward_1d);
    transpose(&mut values, k);
    Ok(CoefficientGrid2D { levels, values })
}

/// Exact inverse (adjoint) of [`forward_haar_2d`].
pub fn inverse_haar_2d(coeffs: &CoefficientGrid2D) -> Vec<f64> {
    let k = coeffs.side();
    let mut values = coeffs.values.clone();
    rows_apply(&mut values, k, haar_inverse_1d);
    transpose(&mut values, k);
    rows_apply(&mut values, k, haar_inverse_1d);
    transpose(&mut values, k);
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_examples() {
        assert_eq!(WaveletIndex::detail(0, 0).eval(0.25), 1.0);
        assert_eq!(WaveletIndex::Dc.eval(0.9), 1.0);
        assert!((WaveletIndex::detail(1, 0).eval(0.1) - 2f64.sqrt()).abs() < 1e-15);
        // half-open boundary
        assert_eq!(WaveletIndex::detail(0, 0).eval(0.5), -1.0);
        assert_eq!(WaveletIndex::detail(1, 0).eval(0.5), 0.0);
        assert_eq!(WaveletIndex::detail(1, 1).eval(0.5), 2f64.sqrt());
    }

    #[test]
    fn flat_index_bijection() {
        for r in 0..4096 {
            assert_eq!(WaveletIndex::from_flat(r).flat(), r);
        }
        assert_eq!(WaveletIndex::from_flat(1), WaveletIndex::detail(0, 0));
        assert_eq!(WaveletIndex::from_flat(5), WaveletIndex::detail(2, 1));
        let mut sorted: Vec<_> = (0..64).map(WaveletIndex::from_flat).collect();
        sorted.sort();
        assert!(sorted.iter().enumerate().all(|(r, w)| w.flat() == r));
    }

    #[test]
    fn dyadic_intervals() {
        let iv = DyadicInterval::new(2, 1);
        assert_eq!((iv.lo(), iv.hi()), (0.25, 0.5));
        let (a, b) = iv.children();
        assert_eq!((a, b), (DyadicInterval::new(3, 2), DyadicInterval::new(3, 3)));
        assert_eq!(a.parent(), Some(iv));
        assert!(iv.contains(0.25) && !iv.contains(0.5));
        assert_eq!(DyadicInterval::containing(3, 0.3), DyadicInterval::new(3, 2));
    }

    /// Inner products against explicitly built atoms, the independent oracle
    /// for the fast transform.
    fn brute_forward(grid: &[f64], k: usize) -> Vec<f64> {
        let atoms: Vec<Vec<f64>> = (0..k)
            .map(|r| {
                let w = WaveletIndex::from_flat(r);
                (0..k).map(|a| w.eval((a as f64 + 0.5) / k as f64) / (k as f64).sqrt()).collect()
            })
            .collect();
        let mut out = vec![0.0; k * k];
        for r in 0..k {
            for s in 0..k {
                let mut acc = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        acc += grid[a * k + b] * atoms[r][a] * atoms[s][b];
                    }
                }
                out[r * k + s] = acc;
            }
        }
        out
    }

    #[test]
    fn constant_grid_maps_to_dc() {
        let grid = vec![1.5; 16];
        let c = forward_haar_2d(&grid, 4).unwrap();
        let oracle = brute_forward(&grid, 4);
        assert!((c.values[0] - 6.0).abs() < 1e-12);
        for (got, want) in c.values.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(c.values[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn forward_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grid: Vec<f64> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fast = forward_haar_2d(&grid, 8).unwrap();
        for (got, want) in fast.values.iter().zip(brute_forward(&grid, 8)) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_and_dc_inverse() {
        assert!(forward_haar_2d(&[0.0; 16], 4).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(inverse_haar_2d(&CoefficientGrid2D::zeros(3)).iter().all(|&v| v == 0.0));
        let mut c = CoefficientGrid2D::zeros(1);
        c.set(WaveletIndex::Dc, WaveletIndex::Dc, 3.0);
        for v in inverse_haar_2d(&c) {
            assert!((v - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(matches!(forward_haar_2d(&[0.0; 9], 3), Err(Error::Dimension(_))));
        assert!(matches!(forward_haar_2d(&[0.0; 3], 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid: Vec<f64> = (0..64).map(|_| rng.random_range(-10.0..10.0)).collect();
        let back = inverse_haar_2d(&forward_haar_2d(&grid, 8).unwrap());
        assert!(grid.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));

        let coeffs = CoefficientGrid2D::from_values(8, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let again = forward_haar_2d(&inverse_haar_2d(&coeffs), 8).unwrap();
        assert!(coeffs.values.iter().zip(&again.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn orthonormality_by_riemann_sums() {
        let levels = 5u32;
        let k = 1usize << levels;
        let atoms: Vec<WaveletIndex> = WaveletIndex::all_below(levels - 1).collect();
        for &r in &atoms {
            for &s in &atoms {
                let ip: f64 = (0..k).map(|a| {
                    let x = (a as f64 + 0.5) / k as f64;
                    r.eval(x) * s.eval(x)
                }).sum::<f64>() / k as f64;
                let want = if r == s { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10, "{r} {s} {ip}");
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut c = CoefficientGrid2D::zeros(2);
        c.set(WaveletIndex::Dc, WaveletIndex::detail(1, 1), 0.1 + 0.2);
        c.set(WaveletIndex::detail(0, 0), WaveletIndex::Dc, -7.25);
        let text = c.to_csv();
        assert!(text.starts_with("j1,l1,j2,l2,value\n-1,0,-1,0,0\n"));
        assert_eq!(CoefficientGrid2D::from_csv(&text, 0).unwrap(), c);
    }
}
