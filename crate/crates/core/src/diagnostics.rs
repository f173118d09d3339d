//! Edge and motif densities, band-region membership, energy spectra and a
//! cut-distance proxy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{CoefficientGrid2D, WaveletIndex};
use crate::error::{Error, Result};
use crate::estimator::pair_scale;
use crate::kernel::{Band, BandCoefficients, Graphon};
use crate::rng::stream;
use crate::sampler::{dyad_count, Adjacency};

/// `L_n = 2 E / (n (n - 1))`.
pub fn edge_density(adj: &Adjacency) -> Result<f64> {
    if adj.n() < 2 {
        return Err(Error::InvalidInput("edge density needs n >= 2".into()));
    }
    Ok(adj.edge_count() as f64 / dyad_count(adj.n()) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motif {
    Edge,
    Triangle,
    /// Path on three vertices.
    TwoStar,
}

impl Motif {
    pub const ALL: [Motif; 3] = [Motif::Edge, Motif::Triangle, Motif::TwoStar];

    pub fn name(self) -> &'static str {
        match self {
            Motif::Edge => "edge",
            Motif::Triangle => "triangle",
            Motif::TwoStar => "twostar",
        }
    }
}

/// Homomorphism density `n^{-k} sum prod A` with zero diagonal.
pub fn hom_density_graph(motif: Motif, adj: &Adjacency) -> f64 {
    let n = adj.n() as f64;
    if adj.n() == 0 {
        return 0.0;
    }
    match motif {
        Motif::Edge => 2.0 * adj.edge_count() as f64 / (n * n),
        Motif::Triangle => 6.0 * adj.triangle_count() as f64 / (n * n * n),
        Motif::TwoStar => adj.degrees().iter().map(|&d| (d * d) as f64).sum::<f64>() / (n * n * n),
    }
}

/// Midpoint-rule homomorphism density of a graphon on a `gridsize` grid.
pub fn hom_density_graphon(motif: Motif, g: &Graphon, gridsize: usize) -> Result<f64> {
    if !gridsize.is_power_of_two() {
        return Err(Error::Dimension(format!("grid size {gridsize} is not a power of two")));
    }
    let k = gridsize;
    let w = g.surface(k);
    let kf = k as f64;
    Ok(match motif {
        Motif::Edge => w.iter().sum::<f64>() / (kf * kf),
        Motif::TwoStar => (0..k).map(|a| w[a * k..(a + 1) * k].iter().sum::<f64>().powi(2)).sum::<f64>() / kf.powi(3),
        Motif::Triangle => {
            let m = nalgebra::DMatrix::from_row_slice(k, k, &w);
            (&m * &m * &m).trace() / kf.powi(3)
        }
    })
}

/// Membership in `{|c| <= B, sum s_rs^2 <= B^2, support within band}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRegion {
    pub inside: bool,
    /// `min(B - |c|, B - ||S||_F)`; negative outside the energy/offset ball.
    pub margin: f64,
    pub energy: f64,
    pub within_band: bool,
}

pub fn band_region_check(coeffs: &BandCoefficients, bound: f64, band: Band) -> BandRegion {
    let energy = coeffs.interaction_energy();
    let within_band = coeffs.entries().all(|(r, s, _)| band.contains(r) && band.contains(s));
    let margin = (bound - coeffs.c().abs()).min(bound - energy.sqrt());
    let inside = coeffs.c().abs() <= bound && energy <= bound * bound && within_band;
    BandRegion { inside, margin, energy, within_band }
}

/// Squared coefficients bucketed by `j = max(j1, j2)`, DC x DC separate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub dc: f64,
    pub scales: Vec<f64>,
}

impl EnergySpectrum {
    pub fn from_entries(entries: impl IntoIterator<Item = (WaveletIndex, WaveletIndex, f64)>) -> Self {
        let mut out = EnergySpectrum { dc: 0.0, scales: Vec::new() };
        for (r, s, v) in entries {
            match pair_scale(r, s) {
                None => out.dc += v * v,
                Some(j) => {
                    let j = j as usize;
                    if out.scales.len() <= j {
                        out.scales.resize(j + 1, 0.0);
                    }
                    out.scales[j] += v * v;
                }
            }
        }
        out
    }

    pub fn of_grid(grid: &CoefficientGrid2D) -> Self {
        let mut out = Self::from_entries(grid.iter());
        out.scales.resize(grid.levels as usize, 0.0);
        out
    }

    /// Kernel spectrum over ordered pairs, with `c` in the DC bucket.
    pub fn of_kernel(coeffs: &BandCoefficients) -> Self {
        let dc = std::iter::once((WaveletIndex::Dc, WaveletIndex::Dc, coeffs.c()));
        Self::from_entries(dc.chain(coeffs.ordered_entries()))
    }

    pub fn total(&self) -> f64 {
        self.dc + self.scales.iter().sum::<f64>()
    }

    /// CSV `scale,energy`; the DC bucket is written with scale `-1`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("scale,energy\n-1,{}\n", self.dc);
        for (j, e) in self.scales.iter().enumerate() {
            out.push_str(&format!("{j},{e}\n"));
        }
        out
    }
}

pub fn wavelet_energy_by_scale(coeffs: &BandCoefficients) -> EnergySpectrum {
    EnergySpectrum::of_kernel(coeffs)
}

/// Lower and upper bounds on the cut norm of `f1 - f2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutProxy {
    /// Best `|int_{A x B} F|` found by greedy alternation.
    pub lower: f64,
    /// `||F||_1`.
    pub upper: f64,
}

const CUT_RANDOM_STARTS: usize = 8;

/// Greedy sign-set alternation over unions of grid intervals.
pub fn cut_distance_proxy(f1: &[f64], f2: &[f64], k: usize) -> Result<CutProxy> {
    if f1.len() != k * k || f2.len() != k * k {
        return Err(Error::Dimension(format!("surfaces must both be {k} x {k}")));
    }
    let f: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| a - b).collect();
    let area = 1.0 / (k * k) as f64;
    let upper = f.iter().map(|v| v.abs()).sum::<f64>() * area;
    let mut starts: Vec<Vec<bool>> = vec![vec![true; k]];
    let mut rng = stream(0, "cut-proxy");
    for _ in 0..CUT_RANDOM_STARTS {
        starts.push((0..k).map(|_| rng.random::<bool>()).collect());
    }
    let mut best = 0.0f64;
    for sign in [1.0, -1.0] {
        for start in &starts {
            best = best.max(greedy_cut(&f, k, sign, start.clone()));
        }
    }
    Ok(CutProxy { lower: (best * area).min(upper), upper })
}

/// Alternately choose rows then columns with positive restricted sums of `sign * F`.
fn greedy_cut(f: &[f64], k: usize, sign: f64, start: Vec<bool>) -> f64 {
    let mut cols: Vec<f64> = start.iter().map(|&b| f64::from(u8::from(b))).collect();
    let mut rows = vec![0.0; k];
    let mut best = 0.0f64;
    for _ in 0..100 {
        let new_rows: Vec<f64> = f
            .chunks_exact(k)
            .map(|row| {
                let s: f64 = row.iter().zip(&cols).map(|(v, c)| v * c).sum();
                f64::from(u8::from(sign * s > 0.0))
            })
            .collect();
        let mut col_sums = vec![0.0; k];
        for (row, _) in f.chunks_exact(k).zip(&new_rows).filter(|(_, &r)| r > 0.0) {
            for (acc, v) in col_sums.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let new_cols: Vec<f64> = col_sums.iter().map(|&s| f64::from(u8::from(sign * s > 0.0))).collect();
        let value: f64 = col_sums.iter().map(|&s| (sign * s).max(0.0)).sum();
        best = best.max(value);
        if new_rows == rows && new_cols == cols {
            break;
        }
        rows = new_rows;
        cols = new_cols;
    }
    best
}

/// CSV `quantity,value` of edge density and motif densities of a graph.
pub fn graph_summary_csv(adj: &Adjacency) -> Result<String> {
    let mut out = format!("quantity,value\nedge_density,{}\n", edge_density(adj)?);
    for m in Motif::ALL {
        out.push_str(&format!("t_{},{}\n", m.name(), hom_density_graph(m, adj)));
    }
    Ok(out)
}
