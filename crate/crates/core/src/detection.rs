//! Scale-indexed community detection and standardised block scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{DyadicInterval, WaveletIndex};
use crate::error::{Error, Result};
use crate::estimator::FitReport;
use crate::kernel::{Band, BandCoefficients, Graphon};
use crate::link::{check_open_probability, logit};
use crate::sampler::{sample_edges_with, sample_positions, Adjacency, LatentGraph};

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Coarse score `T_i = sum_j A_ij psi_1(U_j)` and its sign (0 abstains).
pub fn two_block_score(lg: &LatentGraph, i: usize) -> (f64, i8) {
    let psi1 = WaveletIndex::detail(0, 0);
    let t: f64 = (0..lg.n()).filter(|&j| lg.adj.get(i, j)).map(|j| psi1.eval(lg.positions[j])).sum();
    (t, sign(t))
}

/// `SNR_j = (n / 2^{j+1}) Delta^2 / (pbar (1 - pbar))`.
pub fn snr(n: usize, j: u32, p_in: f64, p_out: f64) -> Result<f64> {
    check_open_probability("p_in", p_in)?;
    check_open_probability("p_out", p_out)?;
    let delta = p_in - p_out;
    let pbar = 0.5 * (p_in + p_out);
    Ok(n as f64 / 2f64.powi(j as i32 + 1) * delta * delta / (pbar * (1.0 - pbar)))
}

/// Fraction of vertices whose two-block sign differs from `psi_1(U_i)`.
pub fn two_block_error_rate(lg: &LatentGraph) -> f64 {
    let psi1 = WaveletIndex::detail(0, 0);
    let nbrs = lg.adj.neighbors();
    let wrong = (0..lg.n())
        .filter(|&i| {
            let t: f64 = nbrs[i].iter().map(|&j| psi1.eval(lg.positions[j])).sum();
            sign(t) as f64 != psi1.eval(lg.positions[i])
        })
        .count();
    wrong as f64 / lg.n() as f64
}

/// `labels[j][i] = +1` iff `U_i` lies in the left child of its scale-`j` interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLabels {
    pub labels: Vec<Vec<i8>>,
}

impl ScaleLabels {
    pub fn from_positions(positions: &[f64], levels: u32) -> Self {
        let labels = (0..levels)
            .map(|j| {
                positions
                    .iter()
                    .map(|&u| {
                        let child = DyadicInterval::containing(j + 1, u);
                        if child.l % 2 == 0 {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect()
            })
            .collect();
        ScaleLabels { labels }
    }

    pub fn levels(&self) -> usize {
        self.labels.len()
    }
}

/// Estimated labels per scale and their error rates against the truth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HierarchicalResult {
    pub estimates: ScaleLabels,
    pub truth: ScaleLabels,
    /// Abstentions count as errors.
    pub error_rates: Vec<f64>,
}

/// `b_j(i) = sgn(Delta_j) sgn(sum_k A_ik psi_{j, l(i,j)}(U_k))` for `j < J`.
pub fn hierarchical_classify(lg: &LatentGraph, levels: u32, deltas: &[f64]) -> Result<HierarchicalResult> {
    if deltas.len() != levels as usize {
        return Err(Error::Dimension(format!("{} deltas for {levels} scales", deltas.len())));
    }
    let n = lg.n();
    let nbrs = lg.adj.neighbors();
    let truth = ScaleLabels::from_positions(&lg.positions, levels);
    let mut estimates = Vec::with_capacity(levels as usize);
    let mut error_rates = Vec::with_capacity(levels as usize);
    for j in 0..levels {
        let est: Vec<i8> = (0..n)
            .into_par_iter()
            .map(|i| {
                let psi = DyadicInterval::containing(j, lg.positions[i]).wavelet();
                let t: f64 = nbrs[i].iter().map(|&k| psi.eval(lg.positions[k])).sum();
                sign(deltas[j as usize]) * sign(t)
            })
            .collect();
        let wrong = est.iter().zip(&truth.labels[j as usize]).filter(|(a, b)| a != b).count();
        error_rates.push(wrong as f64 / n.max(1) as f64);
        estimates.push(est);
    }
    Ok(HierarchicalResult { estimates: ScaleLabels { labels: estimates }, truth, error_rates })
}

/// Kernel whose edge probability depends only on the first scale at which
/// the two positions fall into different dyadic children.
///
/// `q[s]` is the probability for pairs first separated at scale `s < J`;
/// `q[J]` applies to pairs sharing a finest-level interval. The logit is
/// diagonal in the Haar basis with one coefficient per scale.
pub fn hierarchical_sbm_kernel(q: &[f64]) -> Result<BandCoefficients> {
    if q.len() < 2 {
        return Err(Error::InvalidInput("need at least one scale (two probabilities)".into()));
    }
    for &p in q {
        check_open_probability("q", p)?;
    }
    let levels = q.len() - 1;
    let l: Vec<f64> = q.iter().map(|&p| logit(p)).collect();
    // L_s = c + sum_{j<s} 2^j b_j - 2^s b_s,  L_J = c + sum_{j<J} 2^j b_j
    let mut beta = vec![0.0; levels];
    let mut upper = l[levels];
    for s in (0..levels).rev() {
        let two_s = 2f64.powi(s as i32);
        // upper = c + sum_{j<=s} 2^j b_j; L_s = upper - 2 * 2^s b_s
        beta[s] = (upper - l[s]) / (2.0 * two_s);
        upper -= two_s * beta[s];
    }
    let c = upper;
    let mut out = BandCoefficients::new(c, Band { min: 0, max: levels as u32 - 1 });
    for (j, &b) in beta.iter().enumerate() {
        for l in 0..1u32 << j {
            let w = WaveletIndex::detail(j as u32, l);
            out.set(w, w, b)?;
        }
    }
    Ok(out)
}

/// Effective within-parent two-block parameters at every scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfile {
    pub p_in: Vec<f64>,
    pub p_out: Vec<f64>,
    pub delta: Vec<f64>,
    pub snr: Vec<f64>,
}

/// `p_out[j] = q[j]`; `p_in[j]` averages `q` over deeper separation scales.
pub fn hierarchical_profile(q: &[f64], n: usize) -> Result<ScaleProfile> {
    let levels = q.len() - 1;
    let mut prof = ScaleProfile { p_in: vec![], p_out: vec![], delta: vec![], snr: vec![] };
    for j in 0..levels {
        let mut p_in = 0.0;
        let mut weight = 0.5;
        for &qs in &q[j + 1..levels] {
            p_in += weight * qs;
            weight *= 0.5;
        }
        p_in += 2.0 * weight * q[levels];
        prof.p_in.push(p_in);
        prof.p_out.push(q[j]);
        prof.delta.push(p_in - q[j]);
        prof.snr.push(snr(n, j as u32, p_in, q[j])?);
    }
    Ok(prof)
}

/// Score of one dyadic block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScore {
    pub j: u32,
    pub l: u32,
    pub m: usize,
    pub pairs: usize,
    pub t: f64,
    pub z: f64,
    pub detected: bool,
    pub vertices: Vec<usize>,
}

/// Standardised scan over dyadic blocks, ranked by `|Z|` then `(j, l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub blocks: Vec<BlockScore>,
    pub z_max: f64,
    pub threshold: f64,
}

impl ScanReport {
    pub fn top(&self) -> Option<&BlockScore> {
        self.blocks.first()
    }

    pub fn any_detected(&self) -> bool {
        self.z_max >= self.threshold
    }

    pub fn detections(&self) -> impl Iterator<Item = &BlockScore> {
        self.blocks.iter().filter(|b| b.detected)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,l,m,N,T,Z,detected\n");
        for b in &self.blocks {
            out.push_str(&format!("{},{},{},{},{},{},{}\n", b.j, b.l, b.m, b.pairs, b.t, b.z, u8::from(b.detected)));
        }
        out
    }

    /// JSON summary with vertex lists for detected blocks only.
    pub fn detections_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            z_max: f64,
            threshold: f64,
            detections: Vec<&'a BlockScore>,
        }
        Ok(serde_json::to_string_pretty(&Out {
            z_max: self.z_max,
            threshold: self.threshold,
            detections: self.detections().collect(),
        })?)
    }
}

/// Default scan constant `C_1`.
pub const SCAN_C1: f64 = 2.0;

/// Threshold `C_1 sqrt(ln n)`.
pub fn scan_threshold(n: usize, c1: f64) -> f64 {
    c1 * (n.max(1) as f64).ln().sqrt()
}

/// Scales `3 ..= floor(log2 n) - 2` (possibly empty).
pub fn default_scan_scales(n: usize) -> std::ops::RangeInclusive<u32> {
    let top = (n.max(1) as f64).log2().floor() as i64 - 2;
    3..=(top.max(2) as u32)
}

/// `T = mean residual over within-block pairs`, `Z = sqrt(N) T`, `Z = 0` if `m < 2`.
pub fn score_blocks<F>(adj: &Adjacency, blocks: Vec<(u32, u32, Vec<usize>)>, threshold: f64, residual: F) -> ScanReport
where
    F: Fn(usize, usize, bool) -> f64 + Sync,
{
    let mut scored: Vec<BlockScore> = blocks
        .into_par_iter()
        .map(|(j, l, vertices)| {
            let m = vertices.len();
            let pairs = m * m.saturating_sub(1) / 2;
            let (t, z) = if m < 2 {
                (0.0, 0.0)
            } else {
                let mut sum = 0.0;
                for (a, &i) in vertices.iter().enumerate() {
                    for &k in &vertices[a + 1..] {
                        sum += residual(i, k, adj.get(i, k));
                    }
                }
                let t = sum / pairs as f64;
                (t, (pairs as f64).sqrt() * t)
            };
            BlockScore { j, l, m, pairs, t, z, detected: z.abs() >= threshold, vertices }
        })
        .collect();
    scored.sort_by(|a, b| b.z.abs().total_cmp(&a.z.abs()).then((a.j, a.l).cmp(&(b.j, b.l))));
    let z_max = scored.iter().map(|b| b.z.abs()).fold(0.0, f64::max);
    ScanReport { blocks: scored, z_max, threshold }
}

/// Dyadic blocks of latent positions at the requested scales.
pub fn position_blocks(positions: &[f64], scales: std::ops::RangeInclusive<u32>) -> Vec<(u32, u32, Vec<usize>)> {
    let mut out = Vec::new();
    for j in scales {
        let mut members = vec![Vec::new(); 1usize << j];
        for (i, &u) in positions.iter().enumerate() {
            members[DyadicInterval::containing(j, u).l as usize].push(i);
        }
        out.extend(members.into_iter().enumerate().map(|(l, v)| (j, l as u32, v)));
    }
    out
}

/// Scan of `A - W0(U_i, U_k)` over dyadic latent blocks.
pub fn wavelet_scan(lg: &LatentGraph, w0: &Graphon, scales: std::ops::RangeInclusive<u32>, c1: f64) -> ScanReport {
    let pos = &lg.positions;
    let threshold = scan_threshold(lg.n(), c1);
    score_blocks(&lg.adj, position_blocks(pos, scales), threshold, |i, k, a| {
        f64::from(u8::from(a)) - w0.eval(pos[i], pos[k])
    })
}

/// Scan of `A - P_hat` over contiguous runs of fitted bins.
pub fn residual_block_scan(
    adj: &Adjacency,
    fit: &FitReport,
    scales: std::ops::RangeInclusive<u32>,
    c1: f64,
) -> Result<ScanReport> {
    let levels = fit.k.trailing_zeros();
    if *scales.end() > levels {
        return Err(Error::InvalidInput(format!("scale {} exceeds log2 K = {levels}", scales.end())));
    }
    if adj.n() != fit.n {
        return Err(Error::Dimension("fit and graph have different vertex counts".into()));
    }
    let mut blocks = Vec::new();
    for j in scales {
        let run = fit.k >> j;
        let mut members = vec![Vec::new(); 1usize << j];
        for &v in &fit.ordering {
            members[fit.bin_of[v] / run].push(v);
        }
        blocks.extend(members.into_iter().enumerate().map(|(l, v)| (j, l as u32, v)));
    }
    let threshold = scan_threshold(adj.n(), c1);
    Ok(score_blocks(adj, blocks, threshold, |i, k, a| f64::from(u8::from(a)) - fit.predict(i, k)))
}

/// Sample from `W0 + delta * 1{x, y in I_{j,l}}`.
pub fn sample_planted(w0: &Graphon, n: usize, seed: u64, j: u32, l: u32, delta: f64) -> Result<LatentGraph> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let block = DyadicInterval::new(j, l);
    let positions = sample_positions(n, seed);
    let adj = sample_edges_with(&positions, seed, |x, y| {
        let base = w0.eval(x, y);
        if block.contains(x) && block.contains(y) {
            (base + delta).clamp(0.0, 1.0)
        } else {
            base
        }
    });
    LatentGraph::new(positions, adj)
}

/// Bump height with `delta^2 N = strength * ln n` for a block of expected size `n / 2^j`.
pub fn planted_delta(n: usize, j: u32, strength: f64) -> f64 {
    let m = n as f64 / 2f64.powi(j as i32);
    let pairs = m * (m - 1.0) / 2.0;
    (strength * (n as f64).ln() / pairs).sqrt()
}
