//! Wavelet thresholding estimators: the observed-design estimator built from
//! empirical coefficients, and the binned logit-scale fitting pipeline for
//! graphs without observed positions.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{dyadic_levels, forward_haar_2d, inverse_haar_2d, CoefficientGrid2D, WaveletIndex};
use crate::error::{Error, Result};
use crate::kernel::{cell_of, Graphon};
use crate::link::{logit, sigmoid};
use crate::rng::stream;
use crate::sampler::{dyad_count, dyad_from_index, Adjacency, LatentGraph};

/// Resolution cap `J_n` and base threshold `tau_n` for `N` dyads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPlan {
    pub j_max: u32,
    pub tau: f64,
    pub kappa: f64,
    pub dyads: usize,
}

impl ThresholdPlan {
    /// `J = max{j : 4^j <= N / ln N}`, `tau = kappa sqrt(ln N / N)`.
    /// `N <= 1` gives `J = 0`, `tau = 0`.
    pub fn for_dyads(dyads: usize, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidInput(format!("kappa = {kappa} must be a finite nonnegative number")));
        }
        if dyads <= 1 {
            return Ok(ThresholdPlan { j_max: 0, tau: 0.0, kappa, dyads });
        }
        let nf = dyads as f64;
        let ln = nf.ln();
        let ratio = nf / ln;
        let mut j = 0u32;
        while 4f64.powi(j as i32 + 1) <= ratio {
            j += 1;
        }
        Ok(ThresholdPlan { j_max: j, tau: kappa * (ln / nf).sqrt(), kappa, dyads })
    }

    /// Keep threshold `tau * 2^j` for a 2D atom of scale `j`.
    pub fn threshold_at(&self, j: u32) -> f64 {
        self.tau * 2f64.powi(j as i32)
    }
}

/// Plan for a graph on `n` vertices.
pub fn threshold_plan(n: usize, kappa: f64) -> Result<ThresholdPlan> {
    if n < 2 {
        return Err(Error::InvalidInput("threshold plan needs n >= 2".into()));
    }
    ThresholdPlan::for_dyads(dyad_count(n), kappa)
}

/// Scale of a tensor atom: the larger of the two 1D scales; `None` for DC x DC.
pub fn pair_scale(r: WaveletIndex, s: WaveletIndex) -> Option<u32> {
    r.scale().into_iter().chain(s.scale()).max()
}

/// `theta_hat = 2/(n(n-1)) sum_{i<j} A_ij (Psi(U_i,U_j) + Psi(U_j,U_i)) / 2`
/// for every tensor atom with both scales `<= j_max`.
///
/// Atoms are constant on the `2^{j_max+1}` grid, so edge counts per cell
/// suffice: the result is `K * forward(E) / (n(n-1))` with `E` the
/// symmetric cell count matrix.
pub fn empirical_coefficients(lg: &LatentGraph, j_max: u32) -> Result<CoefficientGrid2D> {
    let n = lg.n();
    if n < 2 {
        return Err(Error::InvalidInput("empirical coefficients need n >= 2".into()));
    }
    let k = 1usize << (j_max + 1);
    let cells: Vec<usize> = lg.positions.iter().map(|&u| cell_of(u, k)).collect();
    let mut counts = vec![0.0; k * k];
    for (i, j) in lg.adj.edges() {
        counts[cells[i] * k + cells[j]] += 1.0;
        counts[cells[j] * k + cells[i]] += 1.0;
    }
    let coeffs = forward_haar_2d(&counts, k)?;
    Ok(coeffs.scaled(k as f64 / (n as f64 * (n as f64 - 1.0))))
}

/// Hard thresholding; DC x DC is always kept, scales above `J_n` are zeroed.
pub fn threshold_coefficients(coeffs: &CoefficientGrid2D, plan: &ThresholdPlan) -> CoefficientGrid2D {
    let mut out = coeffs.clone();
    let k = coeffs.side();
    for a in 0..k {
        for b in 0..k {
            let v = coeffs.values[a * k + b];
            let keep = match pair_scale(WaveletIndex::from_flat(a), WaveletIndex::from_flat(b)) {
                None => true,
                Some(j) => j <= plan.j_max && v != 0.0 && v.abs() >= plan.threshold_at(j),
            };
            if !keep {
                out.values[a * k + b] = 0.0;
            }
        }
    }
    out
}

/// Probability-scale reconstruction on the `K x K` grid, clamped to `[eps, 1-eps]`.
///
/// `coeffs` are continuous-domain coefficients of `W`.
pub fn reconstruct_graphon(coeffs: &CoefficientGrid2D, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidInput(format!("clip eps = {eps} must lie in (0, 0.5)")));
    }
    let k = coeffs.side() as f64;
    let mut surface = inverse_haar_2d(&coeffs.scaled(k));
    mirror_upper(&mut surface, coeffs.side());
    Ok(surface.into_iter().map(|v| v.clamp(eps, 1.0 - eps)).collect())
}

/// Copies the upper triangle onto the lower one.
fn mirror_upper(grid: &mut [f64], k: usize) {
    for a in 0..k {
        for b in 0..a {
            grid[a * k + b] = grid[b * k + a];
        }
    }
}

/// Result of the observed-design estimator.
#[derive(Clone, Debug)]
pub struct ObservedDesignFit {
    pub plan: ThresholdPlan,
    pub coefficients: CoefficientGrid2D,
    /// `2^{J_n+1}` square probability surface.
    pub surface: Vec<f64>,
}

impl ObservedDesignFit {
    pub fn side(&self) -> usize {
        self.coefficients.side()
    }
}

/// Empirical coefficients up to `J_n`, thresholded, reconstructed and clipped.
pub fn observed_design_fit(lg: &LatentGraph, kappa: f64, eps: f64) -> Result<ObservedDesignFit> {
    let plan = threshold_plan(lg.n(), kappa)?;
    let coefficients = threshold_coefficients(&empirical_coefficients(lg, plan.j_max)?, &plan);
    let surface = reconstruct_graphon(&coefficients, eps)?;
    Ok(ObservedDesignFit { plan, coefficients, surface })
}

/// `L2((0,1)^2)` distance between a `k x k` step surface and `W`, by midpoint
/// quadrature on an `eval_k x eval_k` grid (`eval_k` a multiple of `k`).
pub fn surface_l2_error(surface: &[f64], k: usize, truth: &Graphon, eval_k: usize) -> Result<f64> {
    if surface.len() != k * k || eval_k % k != 0 {
        return Err(Error::Dimension(format!("cannot compare a {k}-grid on a {eval_k}-grid")));
    }
    let mut acc = 0.0;
    for a in 0..eval_k {
        for b in 0..eval_k {
            let (x, y) = ((a as f64 + 0.5) / eval_k as f64, (b as f64 + 0.5) / eval_k as f64);
            let d = surface[cell_of(x, k) * k + cell_of(y, k)] - truth.eval(x, y);
            acc += d * d;
        }
    }
    Ok((acc / (eval_k * eval_k) as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriationMethod {
    Degree,
    Fiedler,
}

impl std::str::FromStr for SeriationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree" => Ok(SeriationMethod::Degree),
            "fiedler" => Ok(SeriationMethod::Fiedler),
            other => Err(Error::InvalidInput(format!("unknown seriation method '{other}'"))),
        }
    }
}

impl std::fmt::Display for SeriationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeriationMethod::Degree => "degree",
            SeriationMethod::Fiedler => "fiedler",
        })
    }
}

/// Vertex ordering; `order[p]` is the vertex placed at position `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    pub order: Vec<usize>,
    /// Set when a spectral ordering had to split the graph into components.
    pub disconnected: bool,
}

pub fn seriation(adj: &Adjacency, method: SeriationMethod) -> Ordering {
    match method {
        SeriationMethod::Degree => degree_ordering(adj),
        SeriationMethod::Fiedler => fiedler_ordering(adj),
    }
}

/// Ascending degree, ties by vertex id.
pub fn degree_ordering(adj: &Adjacency) -> Ordering {
    let deg = adj.degrees();
    let mut order: Vec<usize> = (0..adj.n()).collect();
    order.sort_by_key(|&v| (deg[v], v));
    Ordering { order, disconnected: false }
}

fn components(neighbors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = neighbors.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    // largest first; ties by smallest member
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

const FIEDLER_MAX_ITER: usize = 20_000;
const FIEDLER_TOL: f64 = 1e-10;

/// Second-smallest Laplacian eigenvector of a connected vertex subset by
/// deflated power iteration on `cI - L`.
fn fiedler_vector(neighbors: &[Vec<usize>], members: &[usize]) -> Vec<f64> {
    let m = members.len();
    if m <= 2 {
        return (0..m).map(|i| i as f64).collect();
    }
    let mut local = vec![usize::MAX; neighbors.len()];
    for (p, &v) in members.iter().enumerate() {
        local[v] = p;
    }
    let adj: Vec<Vec<usize>> = members.iter().map(|&v| neighbors[v].iter().map(|&w| local[w]).collect()).collect();
    let shift = 2.0 * adj.iter().map(|a| a.len()).max().unwrap_or(0) as f64 + 1.0;
    let mut rng = stream(0, "fiedler-start");
    let mut x: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
    let deflate_normalise = |x: &mut Vec<f64>| {
        let mean = x.iter().sum::<f64>() / m as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    };
    deflate_normalise(&mut x);
    for _ in 0..FIEDLER_MAX_ITER {
        let mut y: Vec<f64> = (0..m)
            .map(|i| {
                let lx = adj[i].len() as f64 * x[i] - adj[i].iter().map(|&w| x[w]).sum::<f64>();
                shift * x[i] - lx
            })
            .collect();
        deflate_normalise(&mut y);
        let diff = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        x = y;
        if diff < FIEDLER_TOL {
            break;
        }
    }
    if x[0] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x
}

/// Spectral ordering; disconnected graphs are ordered component by component.
pub fn fiedler_ordering(adj: &Adjacency) -> Ordering {
    let neighbors = adj.neighbors();
    let comps = components(&neighbors);
    let disconnected = comps.len() > 1;
    let mut order = Vec::with_capacity(adj.n());
    for comp in comps {
        let f = fiedler_vector(&neighbors, &comp);
        let mut idx: Vec<usize> = (0..comp.len()).collect();
        idx.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(comp[a].cmp(&comp[b])));
        order.extend(idx.into_iter().map(|p| comp[p]));
    }
    Ordering { order, disconnected }
}

/// Contiguous bins along `ordering`; the first `n mod k` bins get one extra vertex.
/// Returns the bin of every vertex.
pub fn assign_bins(ordering: &[usize], k: usize) -> Vec<usize> {
    let n = ordering.len();
    let (base, extra) = (n / k, n % k);
    let mut bin_of = vec![0; n];
    let mut pos = 0;
    for b in 0..k {
        let size = base + usize::from(b < extra);
        for &v in &ordering[pos..pos + size] {
            bin_of[v] = b;
        }
        pos += size;
    }
    bin_of
}

/// Smoothed block histogram over training dyads.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub k: usize,
    pub bin_of: Vec<usize>,
    /// `k x k` smoothed cell probabilities.
    pub probs: Vec<f64>,
    pub empty_cells: usize,
    pub training_dyads: usize,
    pub global_density: f64,
}

impl Histogram {
    pub fn predict(&self, i: usize, j: usize) -> f64 {
        self.probs[self.bin_of[i] * self.k + self.bin_of[j]]
    }
}

/// Cell probabilities `(e + 0.5) / (m + 1)`; cells without training dyads
/// take the smoothed global training density.
pub fn binned_histogram(adj: &Adjacency, bin_of: &[usize], k: usize, holdout: Option<&Adjacency>) -> Result<Histogram> {
    let n = adj.n();
    let mut sizes = vec![0usize; k];
    for &b in bin_of {
        sizes[b] += 1;
    }
    let mut dyads = vec![0usize; k * k];
    for a in 0..k {
        for b in 0..k {
            dyads[a * k + b] = if a == b { sizes[a] * sizes[a].saturating_sub(1) / 2 } else { sizes[a] * sizes[b] };
        }
    }
    let mut masked = 0usize;
    let training = match holdout {
        Some(mask) => {
            if mask.n() != n {
                return Err(Error::Dimension("holdout mask size differs from graph".into()));
            }
            for idx in mask.set_indices() {
                let (i, j) = dyad_from_index(n, idx);
                let (a, b) = (bin_of[i], bin_of[j]);
                dyads[a * k + b] -= 1;
                if a != b {
                    dyads[b * k + a] -= 1;
                }
                masked += 1;
            }
            adj.without(mask)
        }
        None => adj.clone(),
    };
    let training_dyads = dyad_count(n) - masked;
    if training_dyads == 0 {
        return Err(Error::NoTrainingData);
    }
    let mut edges = vec![0usize; k * k];
    let mut total_edges = 0usize;
    for (i, j) in training.edges() {
        let (a, b) = (bin_of[i], bin_of[j]);
        edges[a * k + b] += 1;
        if a != b {
            edges[b * k + a] += 1;
        }
        total_edges += 1;
    }
    let global_density = (total_edges as f64 + 0.5) / (training_dyads as f64 + 1.0);
    let mut empty_cells = 0;
    let probs = (0..k * k)
        .map(|c| {
            if dyads[c] == 0 {
                empty_cells += 1;
                global_density
            } else {
                (edges[c] as f64 + 0.5) / (dyads[c] as f64 + 1.0)
            }
        })
        .collect();
    Ok(Histogram { k, bin_of: bin_of.to_vec(), probs, empty_cells, training_dyads, global_density })
}

/// Default pointwise clip of the fitted surface.
pub const PIPELINE_CLIP: f64 = 1e-6;

/// A thresholded coefficient that survived, continuous normalisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Survivor {
    pub j1: i64,
    pub l1: u64,
    pub j2: i64,
    pub l2: u64,
    pub value: f64,
}

/// Output of [`fit_pipeline`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub ordering: Vec<usize>,
    pub disconnected: bool,
    pub n: usize,
    pub k: usize,
    pub kappa: f64,
    pub plan: ThresholdPlan,
    pub clip: [f64; 2],
    pub training_dyads: usize,
    pub empty_cells: usize,
    pub survivors: Vec<Survivor>,
    /// Survivor counts by scale; index 0 is DC x DC, index `j + 1` is scale `j`.
    pub survivors_by_scale: Vec<usize>,
    pub bin_of: Vec<usize>,
    #[serde(skip)]
    pub surface: Vec<f64>,
}

impl FitReport {
    pub fn predict(&self, i: usize, j: usize) -> f64 {
        self.surface[self.bin_of[i] * self.k + self.bin_of[j]]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Surface as CSV `row,col,p`, shortest round-trip formatting.
    pub fn surface_csv(&self) -> String {
        let mut out = String::from("row,col,p\n");
        for a in 0..self.k {
            for b in 0..self.k {
                out.push_str(&format!("{a},{b},{}\n", self.surface[a * self.k + b]));
            }
        }
        out
    }

    /// Rebuild from the JSON metadata and the surface CSV.
    pub fn load(json: &str, surface_csv: &str) -> Result<Self> {
        let mut fit: FitReport = serde_json::from_str(json)?;
        fit.surface = read_surface_csv(surface_csv, fit.k)?;
        Ok(fit)
    }
}

pub fn read_surface_csv(text: &str, k: usize) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; k * k];
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno + 1, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err("expected row,col,p".into()));
        }
        let a: usize = fields[0].trim().parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
        let b: usize = fields[1].trim().parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
        if a >= k || b >= k {
            return Err(err(format!("cell ({a}, {b}) outside a {k} grid")));
        }
        out[a * k + b] = fields[2].trim().parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?;
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("surface CSV is missing cells".into()));
    }
    Ok(out)
}

/// Eight-step fit: seriation, binning, smoothed histogram, logit, forward
/// transform, multiscale hard threshold, inverse transform, logistic + clip.
///
/// Held-out dyads are treated as absent from every step, seriation included.
pub fn fit_pipeline(
    adj: &Adjacency,
    method: SeriationMethod,
    k: usize,
    kappa: f64,
    holdout: Option<&Adjacency>,
) -> Result<FitReport> {
    let training = match holdout {
        Some(mask) => adj.without(mask),
        None => adj.clone(),
    };
    let ordering = seriation(&training, method);
    fit_with_ordering(adj, ordering, &method.to_string(), k, kappa, holdout)
}

/// [`fit_pipeline`] with a caller-supplied ordering.
pub fn fit_with_ordering(
    adj: &Adjacency,
    ordering: Ordering,
    method: &str,
    k: usize,
    kappa: f64,
    holdout: Option<&Adjacency>,
) -> Result<FitReport> {
    let levels = dyadic_levels(k)?;
    if ordering.order.len() != adj.n() {
        return Err(Error::Dimension("ordering does not cover every vertex".into()));
    }
    let bin_of = assign_bins(&ordering.order, k);
    let hist = binned_histogram(adj, &bin_of, k, holdout)?;
    let plan = ThresholdPlan::for_dyads(hist.training_dyads, kappa)?;
    let eta: Vec<f64> = hist.probs.iter().map(|&p| logit(p)).collect();
    let kf = k as f64;
    let theta = forward_haar_2d(&eta, k)?.scaled(1.0 / kf);
    let kept = threshold_coefficients(&theta, &plan);
    let mut survivors = Vec::new();
    let mut survivors_by_scale = vec![0usize; levels as usize + 1];
    for (r, s, value) in kept.iter() {
        if value != 0.0 {
            let (j1, l1) = r.to_pair();
            let (j2, l2) = s.to_pair();
            survivors.push(Survivor { j1, l1, j2, l2, value });
            survivors_by_scale[pair_scale(r, s).map_or(0, |j| j as usize + 1)] += 1;
        }
    }
    let clip = PIPELINE_CLIP;
    let mut logits = inverse_haar_2d(&kept.scaled(kf));
    mirror_upper(&mut logits, k);
    let surface = logits
        .into_iter()
        .map(|v| sigmoid(v).clamp(clip, 1.0 - clip))
        .collect();
    Ok(FitReport {
        method: method.to_string(),
        ordering: ordering.order,
        disconnected: ordering.disconnected,
        n: adj.n(),
        k,
        kappa,
        plan,
        clip: [clip, 1.0 - clip],
        training_dyads: hist.training_dyads,
        empty_cells: hist.empty_cells,
        survivors,
        survivors_by_scale,
        bin_of,
        surface,
    })
}

/// Continuous-domain Haar coefficients of `logit(fitted surface)`.
pub fn recover_logit_coefficients(fit: &FitReport) -> Result<CoefficientGrid2D> {
    let eta: Vec<f64> = fit.surface.iter().map(|&p| logit(p)).collect();
    Ok(forward_haar_2d(&eta, fit.k)?.scaled(1.0 / fit.k as f64))
}
