//! Conditional exponential family given the latent positions, canonical
//! tilts, and the limiting log-MGF and rate function of the normalised
//! statistics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::WaveletIndex;
use crate::diagnostics::{edge_density, hom_density_graph, EnergySpectrum, Motif};
use crate::error::{Error, Result};
use crate::estimator::empirical_coefficients;
use crate::kernel::{BandCoefficients, Band, Graphon, PairKey};
use crate::link::{sigmoid, softplus};
use crate::sampler::{dyad_count, sample_graph, Adjacency, LatentGraph};

/// Ordered pairs `(r, s)` indexing the interaction statistics.
///
/// Closed under transposition and never contains `(DC, DC)`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StatisticIndexSet {
    pairs: Vec<PairKey>,
}

impl StatisticIndexSet {
    /// Sorts and deduplicates; the input must already be transposition-closed.
    pub fn new(mut pairs: Vec<PairKey>) -> Result<Self> {
        pairs.sort();
        pairs.dedup();
        if pairs.iter().any(|(r, s)| r.is_dc() && s.is_dc()) {
            return Err(Error::InvalidInput("(DC, DC) is confounded with the edge count".into()));
        }
        if let Some((r, s)) = pairs.iter().find(|&&(r, s)| pairs.binary_search(&(s, r)).is_err()) {
            return Err(Error::InvalidInput(format!("index set has ({r}, {s}) but not ({s}, {r})")));
        }
        Ok(StatisticIndexSet { pairs })
    }

    /// Closure of `pairs` under transposition.
    pub fn symmetric_closure(pairs: &[PairKey]) -> Result<Self> {
        Self::new(pairs.iter().flat_map(|&(r, s)| [(r, s), (s, r)]).collect())
    }

    /// Support of a kernel's interaction matrix.
    pub fn from_kernel(k: &BandCoefficients) -> Self {
        let mut pairs: Vec<PairKey> = k.ordered_entries().map(|(r, s, _)| (r, s)).collect();
        pairs.sort();
        StatisticIndexSet { pairs }
    }

    pub fn pairs(&self) -> &[PairKey] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Statistic dimension `1 + |I|`.
    pub fn dim(&self) -> usize {
        1 + self.pairs.len()
    }

    pub fn max_scale(&self) -> Option<u32> {
        self.pairs.iter().flat_map(|&(r, s)| [r.scale(), s.scale()]).flatten().max()
    }

    /// Feature vector `(1, psi_r(x) psi_s(y), ...)`.
    pub fn features(&self, x: f64, y: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(1.0);
        v.extend(self.pairs.iter().map(|(r, s)| r.eval(x) * s.eval(y)));
        v
    }

    /// `(c, s_rs, ...)`; fails if `theta` has interactions outside the set.
    pub fn natural_parameters(&self, theta: &BandCoefficients) -> Result<Vec<f64>> {
        for (r, s, _) in theta.ordered_entries() {
            if self.pairs.binary_search(&(r, s)).is_err() {
                return Err(Error::InvalidInput(format!("kernel entry ({r}, {s}) is not in the index set")));
            }
        }
        let mut v = vec![theta.c()];
        v.extend(self.pairs.iter().map(|&(r, s)| theta.get(r, s)));
        Ok(v)
    }
}

/// `(S_00, S_rs, ...)` summed over dyads `i < j`.
pub fn sufficient_statistics(lg: &LatentGraph, index: &StatisticIndexSet) -> Vec<f64> {
    let mut out = vec![0.0; index.dim()];
    for (i, j) in lg.adj.edges() {
        for (o, f) in out.iter_mut().zip(index.features(lg.positions[i], lg.positions[j])) {
            *o += f;
        }
    }
    out
}

/// `Psi_n = sum_{i<j} log(1 + exp(eta(U_i, U_j)))`.
pub fn log_partition(theta: &BandCoefficients, positions: &[f64]) -> f64 {
    let n = positions.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| softplus(theta.logit_eval(positions[i], positions[j]))).sum())
        .collect();
    rows.iter().sum()
}

/// `c S_00 + sum s_rs S_rs - Psi_n`.
pub fn conditional_loglik(lg: &LatentGraph, theta: &BandCoefficients, index: &StatisticIndexSet) -> Result<f64> {
    let params = index.natural_parameters(theta)?;
    let stats = sufficient_statistics(lg, index);
    let linear: f64 = params.iter().zip(&stats).map(|(a, b)| a * b).sum();
    Ok(linear - log_partition(theta, &lg.positions))
}

/// Largest vertex count accepted by exhaustive enumeration.
pub const ENUMERATION_LIMIT: usize = 5;

/// The whole conditional law on `n <= 5` vertices.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub n: usize,
    /// Natural parameters `(c, s_rs, ...)`.
    pub theta: Vec<f64>,
    /// Bit `d` of `configs[k]` is dyad `d` in row order.
    pub configs: Vec<u64>,
    pub log_probs: Vec<f64>,
    pub stats: Vec<Vec<f64>>,
    pub log_partition: f64,
}

impl Enumeration {
    pub fn adjacency(&self, k: usize) -> Adjacency {
        let mut a = Adjacency::empty(self.n);
        for d in 0..dyad_count(self.n) {
            a.set_index(d, self.configs[k] >> d & 1 == 1);
        }
        a
    }
}

pub fn enumerate_family(theta: &BandCoefficients, positions: &[f64], index: &StatisticIndexSet) -> Result<Enumeration> {
    let n = positions.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { n, limit: ENUMERATION_LIMIT });
    }
    let params = index.natural_parameters(theta)?;
    let mut dyad_feats = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            dyad_feats.push(index.features(positions[i], positions[j]));
        }
    }
    let dyads = dyad_feats.len();
    let psi = log_partition(theta, positions);
    let total = 1u64 << dyads;
    let mut out = Enumeration {
        n,
        theta: params.clone(),
        configs: Vec::with_capacity(total as usize),
        log_probs: Vec::with_capacity(total as usize),
        stats: Vec::with_capacity(total as usize),
        log_partition: psi,
    };
    for cfg in 0..total {
        let mut t = vec![0.0; index.dim()];
        for (d, feat) in dyad_feats.iter().enumerate() {
            if cfg >> d & 1 == 1 {
                for (acc, f) in t.iter_mut().zip(feat) {
                    *acc += f;
                }
            }
        }
        let energy: f64 = params.iter().zip(&t).map(|(a, b)| a * b).sum();
        out.configs.push(cfg);
        out.log_probs.push(energy - psi);
        out.stats.push(t);
    }
    Ok(out)
}

/// Entropy, log-partition and mean statistics of `P_theta( . | U)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxEntReport {
    pub entropy: f64,
    pub log_partition: f64,
    pub moments: Vec<f64>,
    pub theta: Vec<f64>,
}

impl MaxEntReport {
    /// `H - (Psi - <theta, m>)`.
    pub fn identity_gap(&self) -> f64 {
        let dot: f64 = self.theta.iter().zip(&self.moments).map(|(a, b)| a * b).sum();
        self.entropy - (self.log_partition - dot)
    }
}

pub fn maxent_entropy_identity(
    theta: &BandCoefficients,
    positions: &[f64],
    index: &StatisticIndexSet,
) -> Result<MaxEntReport> {
    let e = enumerate_family(theta, positions, index)?;
    let mut entropy = 0.0;
    let mut moments = vec![0.0; index.dim()];
    for (lp, t) in e.log_probs.iter().zip(&e.stats) {
        let p = lp.exp();
        entropy -= p * lp;
        for (m, v) in moments.iter_mut().zip(t) {
            *m += p * v;
        }
    }
    Ok(MaxEntReport { entropy, log_partition: e.log_partition, moments, theta: e.theta })
}

/// Symmetric tilt `lambda = (lambda_0, lambda_rs over I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltVector {
    index: StatisticIndexSet,
    /// `lambda_0` followed by one value per pair of the index set.
    coords: Vec<f64>,
}

impl TiltVector {
    pub fn new(index: StatisticIndexSet, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != index.dim() {
            return Err(Error::Dimension(format!("tilt has {} coordinates, expected {}", coords.len(), index.dim())));
        }
        for (k, &(r, s)) in index.pairs.iter().enumerate() {
            let t = index.pairs.binary_search(&(s, r)).expect("index set is transposition-closed");
            if coords[1 + k] != coords[1 + t] {
                return Err(Error::InvalidInput(format!("tilt is not symmetric at ({r}, {s})")));
            }
        }
        Ok(TiltVector { index, coords })
    }

    pub fn zero(index: StatisticIndexSet) -> Self {
        let coords = vec![0.0; index.dim()];
        TiltVector { index, coords }
    }

    /// Tilt along the edge-count direction only.
    pub fn edge(lambda0: f64) -> Self {
        TiltVector { index: StatisticIndexSet::default(), coords: vec![lambda0] }
    }

    /// Symmetrised tilt from one value per canonical pair.
    pub fn from_canonical(lambda0: f64, values: &[(WaveletIndex, WaveletIndex, f64)]) -> Result<Self> {
        let keys: Vec<PairKey> = values.iter().map(|&(r, s, _)| (r, s)).collect();
        let index = StatisticIndexSet::symmetric_closure(&keys)?;
        let mut coords = vec![0.0; index.dim()];
        coords[0] = lambda0;
        for &(r, s, v) in values {
            for key in [(r, s), (s, r)] {
                coords[1 + index.pairs.binary_search(&key).expect("pair in closure")] = v;
            }
        }
        Self::new(index, coords)
    }

    pub fn index(&self) -> &StatisticIndexSet {
        &self.index
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn lambda0(&self) -> f64 {
        self.coords[0]
    }

    pub fn scaled(&self, t: f64) -> TiltVector {
        TiltVector { index: self.index.clone(), coords: self.coords.iter().map(|v| v * t).collect() }
    }

    pub fn plus(&self, other: &TiltVector) -> Result<TiltVector> {
        if self.index != other.index {
            return Err(Error::InvalidInput("tilts use different index sets".into()));
        }
        Ok(TiltVector { index: self.index.clone(), coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect() })
    }

    /// `g_lambda` as kernel coefficients (offset `lambda_0`).
    pub fn as_coefficients(&self) -> BandCoefficients {
        let band = match self.index.max_scale() {
            Some(hi) => {
                let lo = self.index.pairs.iter().flat_map(|&(r, s)| [r.scale(), s.scale()]).flatten().min().unwrap_or(0);
                Band { min: lo, max: hi }
            }
            None => Band { min: 0, max: 0 },
        };
        let mut out = BandCoefficients::new(self.coords[0], band);
        for (k, &(r, s)) in self.index.pairs.iter().enumerate() {
            if r <= s {
                out.add(r, s, self.coords[1 + k]).expect("band covers the index set");
            }
        }
        out
    }

    /// `g_lambda(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.index.features(x, y).iter().zip(&self.coords).map(|(f, l)| f * l).sum()
    }
}

/// Kernel with logit `logit W_0 + g_lambda`.
pub fn tilted_kernel(g0: &Graphon, lambda: &TiltVector) -> Graphon {
    Graphon::new(g0.coeffs().plus(&lambda.as_coefficients()))
}

/// Limiting log-MGF with its derivatives at one tilt.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MgfReport {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `dim x dim`.
    pub hessian: Vec<f64>,
    pub min_eigenvalue: f64,
    pub gridsize: usize,
}

impl MgfReport {
    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let d = self.gradient.len();
        DMatrix::from_row_slice(d, d, &self.hessian)
    }
}

fn check_quadrature_grid(g0: &Graphon, index: &StatisticIndexSet, gridsize: usize) -> Result<()> {
    let jmax = g0.coeffs().max_scale().into_iter().chain(index.max_scale()).max();
    let need = jmax.map_or(1, |j| 1usize << (j + 2));
    if !gridsize.is_power_of_two() || gridsize < need {
        return Err(Error::Dimension(format!("quadrature grid {gridsize} must be a power of two >= {need}")));
    }
    Ok(())
}

/// Midpoint-rule `Lambda(lambda) = int softplus(eta + g) - softplus(eta)`,
/// gradient `int q v` and Hessian `int q (1 - q) v v^T`.
pub fn limiting_logmgf(g0: &Graphon, lambda: &TiltVector, gridsize: usize) -> Result<MgfReport> {
    check_quadrature_grid(g0, &lambda.index, gridsize)?;
    let d = lambda.index.dim();
    let k = gridsize;
    let mids: Vec<f64> = (0..k).map(|a| (a as f64 + 0.5) / k as f64).collect();
    let rows: Vec<(f64, Vec<f64>, Vec<f64>)> = mids
        .par_iter()
        .map(|&x| {
            let mut value = 0.0;
            let mut grad = vec![0.0; d];
            let mut hess = vec![0.0; d * d];
            for &y in &mids {
                let eta = g0.logit(x, y);
                let v = lambda.index.features(x, y);
                let g: f64 = v.iter().zip(&lambda.coords).map(|(f, l)| f * l).sum();
                value += softplus(eta + g) - softplus(eta);
                let q = sigmoid(eta + g);
                let w = q * (1.0 - q);
                for a in 0..d {
                    grad[a] += q * v[a];
                    for b in 0..d {
                        hess[a * d + b] += w * v[a] * v[b];
                    }
                }
            }
            (value, grad, hess)
        })
        .collect();
    let area = 1.0 / (k * k) as f64;
    let mut value = 0.0;
    let mut gradient = vec![0.0; d];
    let mut hessian = vec![0.0; d * d];
    for (v, g, h) in rows {
        value += v;
        gradient.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        hessian.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    value *= area;
    gradient.iter_mut().for_each(|v| *v *= area);
    hessian.iter_mut().for_each(|v| *v *= area);
    let min_eigenvalue = DMatrix::from_row_slice(d, d, &hessian).symmetric_eigen().eigenvalues.min();
    Ok(MgfReport { value, gradient, hessian, min_eigenvalue, gridsize })
}

/// Per-sample normalisation `(1/N_n) sum_{i<j} log Z_lambda(U_i, U_j)`.
pub fn conditional_logmgf(g0: &Graphon, lambda: &TiltVector, positions: &[f64]) -> Result<f64> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two vertices".into()));
    }
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let (x, y) = (positions[i], positions[j]);
                    let eta = g0.logit(x, y);
                    softplus(eta + lambda.eval(x, y)) - softplus(eta)
                })
                .sum()
        })
        .collect();
    Ok(rows.iter().sum::<f64>() / dyad_count(n) as f64)
}

/// `I(t)` and the maximiser `lambda*` with `grad Lambda(lambda*) = t`.
#[derive(Clone, Debug)]
pub struct RateReport {
    pub value: f64,
    pub lambda: TiltVector,
    pub iterations: usize,
    pub residual: f64,
}

pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_TOL: f64 = 1e-10;

/// Damped Newton on `Lambda(lambda) - <lambda, t>`.
pub fn rate_function(g0: &Graphon, index: &StatisticIndexSet, target: &[f64], gridsize: usize) -> Result<RateReport> {
    let d = index.dim();
    if target.len() != d {
        return Err(Error::Dimension(format!("target has {} entries, expected {d}", target.len())));
    }
    let t = DVector::from_column_slice(target);
    let mut lambda = TiltVector::zero(index.clone());
    let mut rep = limiting_logmgf(g0, &lambda, gridsize)?;
    let merit = |r: &MgfReport, l: &TiltVector| r.value - l.coords.iter().zip(target).map(|(a, b)| a * b).sum::<f64>();
    let residual = |r: &MgfReport| (DVector::from_column_slice(&r.gradient) - &t).norm();
    let mut res = residual(&rep);
    let mut iterations = 0;
    while res >= NEWTON_TOL {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::BoundaryMoment { iterations, residual: res });
        }
        iterations += 1;
        let grad = DVector::from_column_slice(&rep.gradient) - &t;
        let step = rep
            .hessian_matrix()
            .cholesky()
            .map(|c| c.solve(&grad))
            .ok_or(Error::BoundaryMoment { iterations, residual: res })?;
        let current = merit(&rep, &lambda);
        let mut scale = 1.0;
        loop {
            let coords: Vec<f64> = lambda.coords.iter().zip(step.iter()).map(|(l, s)| l - scale * s).collect();
            if coords.iter().any(|v| !v.is_finite()) {
                return Err(Error::BoundaryMoment { iterations, residual: res });
            }
            let cand = TiltVector { index: index.clone(), coords };
            let cand_rep = limiting_logmgf(g0, &cand, gridsize)?;
            let cand_merit = merit(&cand_rep, &cand);
            if cand_merit <= current + 1e-14 * current.abs().max(1.0) || scale < 1e-12 {
                lambda = cand;
                rep = cand_rep;
                break;
            }
            scale *= 0.5;
        }
        let new_res = residual(&rep);
        if scale < 1e-12 && new_res >= res {
            return Err(Error::BoundaryMoment { iterations, residual: new_res });
        }
        res = new_res;
    }
    let value = -merit(&rep, &lambda);
    Ok(RateReport { value, lambda, iterations, residual: res })
}

/// One row of a tilt-path table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiltPathRow {
    pub t: f64,
    pub edge_density_mean: f64,
    pub edge_density_sd: f64,
    pub triangle_density_mean: f64,
    pub triangle_density_sd: f64,
    /// Mean empirical coefficient energy per detail scale.
    pub energy_by_scale: Vec<f64>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample along `t -> tilted_kernel(g0, t * direction)` and summarise.
pub fn tilt_path_diagnostics(
    g0: &Graphon,
    direction: &TiltVector,
    ts: &[f64],
    n: usize,
    seeds: &[u64],
) -> Result<Vec<TiltPathRow>> {
    if seeds.is_empty() || n < 2 {
        return Err(Error::InvalidInput("tilt path needs n >= 2 and at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let g = tilted_kernel(g0, &direction.scaled(t));
        let levels = g.depth().max(1);
        let mut edges = Vec::new();
        let mut triangles = Vec::new();
        let mut energy = vec![0.0; levels as usize];
        for &seed in seeds {
            let lg = sample_graph(&g, n, seed)?;
            edges.push(edge_density(&lg.adj)?);
            triangles.push(hom_density_graph(Motif::Triangle, &lg.adj));
            let spec = EnergySpectrum::of_grid(&empirical_coefficients(&lg, levels - 1)?);
            for (e, s) in energy.iter_mut().zip(&spec.scales) {
                *e += s / seeds.len() as f64;
            }
        }
        let (edge_density_mean, edge_density_sd) = mean_sd(&edges);
        let (triangle_density_mean, triangle_density_sd) = mean_sd(&triangles);
        rows.push(TiltPathRow {
            t,
            edge_density_mean,
            edge_density_sd,
            triangle_density_mean,
            triangle_density_sd,
            energy_by_scale: energy,
        });
    }
    Ok(rows)
}

pub fn tilt_path_csv(rows: &[TiltPathRow]) -> String {
    let scales = rows.iter().map(|r| r.energy_by_scale.len()).max().unwrap_or(0);
    let mut out = String::from("t,edge_density_mean,edge_density_sd,triangle_density_mean,triangle_density_sd");
    for j in 0..scales {
        out.push_str(&format!(",energy_scale_{j}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.t, r.edge_density_mean, r.edge_density_sd, r.triangle_density_mean, r.triangle_density_sd
        ));
        for j in 0..scales {
            out.push_str(&format!(",{}", r.energy_by_scale.get(j).copied().unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{from_erdos_renyi, from_two_block};
    use crate::link::logit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn psi1() -> WaveletIndex {
        WaveletIndex::detail(0, 0)
    }

    fn psi1_set() -> StatisticIndexSet {
        StatisticIndexSet::new(vec![(psi1(), psi1())]).unwrap()
    }

    #[test]
    fn index_set_validation() {
        assert!(StatisticIndexSet::new(vec![(WaveletIndex::Dc, WaveletIndex::Dc)]).is_err());
        assert!(StatisticIndexSet::new(vec![(WaveletIndex::Dc, psi1())]).is_err());
        let s = StatisticIndexSet::symmetric_closure(&[(WaveletIndex::Dc, psi1())]).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn statistics_examples() {
        let lg = LatentGraph::new(vec![0.25, 0.75], Adjacency::empty(2)).unwrap();
        assert_eq!(sufficient_statistics(&lg, &psi1_set()), vec![0.0, 0.0]);
        let lg = LatentGraph::new(vec![0.25, 0.75], Adjacency::complete(2)).unwrap();
        assert_eq!(sufficient_statistics(&lg, &psi1_set()), vec![1.0, -1.0]);
    }

    #[test]
    fn statistics_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let index = StatisticIndexSet::symmetric_closure(&[
            (psi1(), psi1()),
            (WaveletIndex::Dc, WaveletIndex::detail(1, 0)),
            (WaveletIndex::detail(1, 1), psi1()),
        ])
        .unwrap();
        let pos: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..0.99)).collect();
        let mut adj = Adjacency::empty(3);
        adj.set(0, 2, true);
        adj.set(1, 2, true);
        let lg = LatentGraph::new(pos.clone(), adj.clone()).unwrap();
        let got = sufficient_statistics(&lg, &index);
        let mut want = vec![0.0; index.dim()];
        for i in 0..3 {
            for j in (i + 1)..3 {
                if adj.get(i, j) {
                    want[0] += 1.0;
                    for (k, (r, s)) in index.pairs().iter().enumerate() {
                        want[k + 1] += eval_pair(*r, *s, pos[i], pos[j]);
                    }
                }
            }
        }
        assert_eq!(got, want);
    }

    fn eval_pair(r: WaveletIndex, s: WaveletIndex, x: f64, y: f64) -> f64 {
        crate::basis::eval_haar(r, x) * crate::basis::eval_haar(s, y)
    }

    #[test]
    fn log_partition_examples() {
        let z = BandCoefficients::zero();
        assert!((log_partition(&z, &[0.1, 0.2, 0.3, 0.4]) - 6.0 * 2f64.ln()).abs() < 1e-12);
        let k = BandCoefficients::new(2.0, Band { min: 0, max: 0 });
        assert!((log_partition(&k, &[0.3, 0.6]) - 2.126_928).abs() < 1e-6);
    }

    fn random_theta(rng: &mut ChaCha8Rng) -> (BandCoefficients, StatisticIndexSet) {
        let mut k = from_two_block(0.5 + rng.random_range(-0.3..0.3), 0.4).unwrap();
        k.extend_band(Band { min: 0, max: 1 });
        k.set(WaveletIndex::Dc, WaveletIndex::detail(1, 1), rng.random_range(-1.0..1.0)).unwrap();
        let index = StatisticIndexSet::from_kernel(&k);
        (k, index)
    }

    #[test]
    fn enumeration_normalises_and_matches_product_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=4 {
            let (k, index) = random_theta(&mut rng);
            let pos: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
            let e = enumerate_family(&k, &pos, &index).unwrap();
            let total: f64 = e.log_probs.iter().map(|l| l.exp()).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for idx in [0, e.configs.len() / 3, e.configs.len() - 1] {
                let lg = LatentGraph::new(pos.clone(), e.adjacency(idx)).unwrap();
                let ll = conditional_loglik(&lg, &k, &index).unwrap();
                let mut product = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let p = sigmoid(k.logit_eval(pos[i], pos[j]));
                        product += if lg.adj.get(i, j) { p.ln() } else { (1.0 - p).ln() };
                    }
                }
                assert!((ll - product).abs() < 1e-12);
                assert!((ll - e.log_probs[idx]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_theta_loglik() {
        let lg = LatentGraph::new(vec![0.1, 0.4, 0.9], Adjacency::complete(3)).unwrap();
        let ll = conditional_loglik(&lg, &BandCoefficients::zero(), &StatisticIndexSet::default()).unwrap();
        assert!((ll + 3.0 * 2f64.ln()).abs() < 1e-12);
        let mut k = BandCoefficients::zero();
        k.set(psi1(), psi1(), 1.0).unwrap();
        assert!(conditional_loglik(&lg, &k, &StatisticIndexSet::default()).is_err());
    }

    #[test]
    fn entropy_identity() {
        let rep = maxent_entropy_identity(&BandCoefficients::zero(), &[0.2, 0.5, 0.7], &StatisticIndexSet::default())
            .unwrap();
        assert!((rep.entropy - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!(rep.identity_gap().abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (k, index) = random_theta(&mut rng);
        let rep = maxent_entropy_identity(&k, &[0.15, 0.55, 0.8], &index).unwrap();
        assert!(rep.identity_gap().abs() < 1e-10);
        assert!(matches!(
            maxent_entropy_identity(&k, &[0.1; 6], &index),
            Err(Error::EnumerationTooLarge { n: 6, .. })
        ));
    }

    #[test]
    fn tilt_examples() {
        let g = Graphon::new(from_two_block(0.7, 0.3).unwrap());
        let z = tilted_kernel(&g, &TiltVector::zero(psi1_set()));
        assert_eq!(z.coeffs(), g.coeffs());

        let er = Graphon::new(from_erdos_renyi(0.5).unwrap());
        let t = tilted_kernel(&er, &TiltVector::edge(1.0));
        assert!((t.eval(0.2, 0.9) - 0.731_059).abs() < 1e-6);

        let lam = TiltVector::from_canonical(0.0, &[(psi1(), psi1(), 0.25)]).unwrap();
        let t = tilted_kernel(&g, &lam);
        let proj = crate::kernel::project_logit_surface(&t.coeffs().logit_surface(8), 8).unwrap();
        let want = g.coeffs().get(psi1(), psi1()) + 0.25;
        assert!((proj.get(psi1(), psi1()) - want).abs() < 1e-12);

        assert!(TiltVector::new(
            StatisticIndexSet::symmetric_closure(&[(WaveletIndex::Dc, psi1())]).unwrap(),
            vec![0.0, 1.0, 2.0]
        )
        .is_err());
    }

    #[test]
    fn tilt_composition_is_exact() {
        let g = Graphon::new(from_two_block(0.625, 0.25).unwrap());
        let pairs = [(psi1(), psi1()), (WaveletIndex::Dc, WaveletIndex::detail(1, 0))];
        let l1 = TiltVector::from_canonical(0.5, &[(pairs[0].0, pairs[0].1, 0.25), (pairs[1].0, pairs[1].1, -0.125)]).unwrap();
        let l2 = TiltVector::from_canonical(-0.75, &[(pairs[0].0, pairs[0].1, 0.375), (pairs[1].0, pairs[1].1, 1.5)]).unwrap();
        let twice = tilted_kernel(&tilted_kernel(&g, &l1), &l2);
        let once = tilted_kernel(&g, &l1.plus(&l2).unwrap());
        assert_eq!(twice.coeffs(), once.coeffs());
    }

    #[test]
    fn logmgf_examples() {
        let er = Graphon::new(from_erdos_renyi(0.5).unwrap());
        let rep = limiting_logmgf(&er, &TiltVector::edge(0.0), 8).unwrap();
        assert_eq!(rep.value, 0.0);
        assert!((rep.gradient[0] - 0.5).abs() < 1e-14);
        let rep = limiting_logmgf(&er, &TiltVector::edge(3f64.ln()), 8).unwrap();
        assert!((rep.value - 2f64.ln()).abs() < 1e-12);

        let er = Graphon::new(from_erdos_renyi(0.3).unwrap());
        let rep = limiting_logmgf(&er, &TiltVector::zero(psi1_set()), 16).unwrap();
        assert!((rep.gradient[0] - 0.3).abs() < 1e-12);
        assert!(rep.gradient[1].abs() < 1e-12);
        assert!(rep.min_eigenvalue > 0.0);
        assert!(limiting_logmgf(&er, &TiltVector::zero(psi1_set()), 2).is_err());
    }

    #[test]
    fn bernoulli_rate_closed_form() {
        let p: f64 = 0.3;
        let er = Graphon::new(from_erdos_renyi(p).unwrap());
        for q in [0.05f64, 0.3, 0.6, 0.95] {
            let rep = rate_function(&er, &StatisticIndexSet::default(), &[q], 4).unwrap();
            let kl = q * (q / p).ln() + (1.0 - q) * ((1.0 - q) / (1.0 - p)).ln();
            assert!((rep.value - kl).abs() < 1e-8, "q={q}");
            assert!((rep.lambda.lambda0() - (logit(q) - logit(p))).abs() < 1e-8);
        }
        assert!(matches!(
            rate_function(&er, &StatisticIndexSet::default(), &[1.5], 4),
            Err(Error::BoundaryMoment { .. })
        ));
    }

    #[test]
    fn conditional_normalisation_tracks_limit() {
        let g = Graphon::new(from_two_block(0.7, 0.3).unwrap());
        let lam = TiltVector::from_canonical(0.3, &[(psi1(), psi1(), -0.4)]).unwrap();
        let lim = limiting_logmgf(&g, &lam, 64).unwrap().value;
        let pos = crate::sampler::sample_positions(2000, 5);
        let emp = conditional_logmgf(&g, &lam, &pos).unwrap();
        assert!((emp - lim).abs() < 0.02);
    }
}
