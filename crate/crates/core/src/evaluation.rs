//! Strict dyad-holdout evaluation, proper scoring rules, calibration tables,
//! baselines and parameter sweeps.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{assign_bins, binned_histogram, degree_ordering, fit_pipeline, seriation, FitReport, SeriationMethod};
use crate::rng::stream;
use crate::sampler::{dyad_count, dyad_from_index, Adjacency};

/// Test dyads drawn before any fitting, plus the matching mask.
#[derive(Clone, Debug, PartialEq)]
pub struct HoldoutSplit {
    pub n: usize,
    pub fraction: f64,
    pub seed: u64,
    /// Test pairs `(i, j)`, `i < j`, in row order.
    pub test: Vec<(usize, usize)>,
    pub mask: Adjacency,
}

/// Uniform sample of `round(fraction * N)` dyads without replacement.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("holdout fraction {fraction} must lie in (0, 1)")));
    }
    let total = dyad_count(n);
    let size = (fraction * total as f64).round() as usize;
    if size == 0 {
        return Err(Error::InvalidInput(format!("fraction {fraction} of {total} dyads leaves an empty test set")));
    }
    let mut rng = stream(seed, "holdout");
    let mut idx = sample(&mut rng, total, size).into_vec();
    idx.sort_unstable();
    let mut mask = Adjacency::empty(n);
    let test = idx
        .into_iter()
        .map(|d| {
            mask.set_index(d, true);
            dyad_from_index(n, d)
        })
        .collect();
    Ok(HoldoutSplit { n, fraction, seed, test, mask })
}

impl HoldoutSplit {
    pub fn labels(&self, adj: &Adjacency) -> Vec<bool> {
        self.test.iter().map(|&(i, j)| adj.get(i, j)).collect()
    }
}

pub const CALIBRATION_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub mean_pred: f64,
    pub frac_pos: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub count: usize,
    pub positives: usize,
    pub auc: f64,
    /// AUC is undefined (reported as 0.5) because only one class is present.
    pub single_class: bool,
    pub logloss: f64,
    /// Mean held-out log-likelihood, `-logloss`.
    pub loglik: f64,
    pub brier: f64,
    pub ece: f64,
    pub ap: f64,
    /// `NaN` without positives.
    pub pos_logloss: f64,
    pub balanced_logloss: f64,
    pub reliability: Vec<ReliabilityBin>,
    pub histogram: Vec<usize>,
}

impl MetricReport {
    pub fn reliability_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,mean_pred,frac_pos,count\n");
        for b in &self.reliability {
            out.push_str(&format!("{},{},{},{},{}\n", b.lo, b.hi, b.mean_pred, b.frac_pos, b.count));
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (b, c) in self.reliability.iter().zip(&self.histogram) {
            out.push_str(&format!("{},{},{}\n", b.lo, b.hi, c));
        }
        out
    }
}

fn point_logloss(p: f64, y: bool) -> f64 {
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Rank-based AUC with average ranks for ties.
pub fn auc(preds: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && preds[idx[end + 1]] == preds[idx[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += avg * idx[start..=end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Step-wise average precision over distinct score thresholds.
pub fn average_precision(preds: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&a, &b| preds[b].total_cmp(&preds[a]));
    let (mut tp, mut seen, mut prev_recall, mut ap) = (0usize, 0usize, 0.0, 0.0);
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && preds[idx[end + 1]] == preds[idx[start]] {
            end += 1;
        }
        tp += idx[start..=end].iter().filter(|&&k| labels[k]).count();
        seen += end - start + 1;
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * tp as f64 / seen as f64;
        prev_recall = recall;
        start = end + 1;
    }
    ap
}

/// All metrics on one test set. `seed` draws the negatives for the balanced logloss.
pub fn score_predictions(preds: &[f64], labels: &[bool], seed: u64) -> Result<MetricReport> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(Error::Dimension(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if let Some(p) = preds.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::InvalidInput(format!("prediction {p} outside (0, 1)")));
    }
    let count = preds.len();
    let nf = count as f64;
    let positives = labels.iter().filter(|&&y| y).count();
    let (auc_value, single_class) = match auc(preds, labels) {
        Some(a) => (a, false),
        None => (0.5, true),
    };
    let logloss = preds.iter().zip(labels).map(|(&p, &y)| point_logloss(p, y)).sum::<f64>() / nf;
    let brier = preds.iter().zip(labels).map(|(&p, &y)| (p - f64::from(u8::from(y))).powi(2)).sum::<f64>() / nf;

    let mut sums = vec![(0.0, 0usize, 0usize); CALIBRATION_BINS];
    for (&p, &y) in preds.iter().zip(labels) {
        let b = ((p * CALIBRATION_BINS as f64) as usize).min(CALIBRATION_BINS - 1);
        sums[b].0 += p;
        sums[b].1 += usize::from(y);
        sums[b].2 += 1;
    }
    let width = 1.0 / CALIBRATION_BINS as f64;
    let reliability: Vec<ReliabilityBin> = sums
        .iter()
        .enumerate()
        .map(|(b, &(s, pos, c))| ReliabilityBin {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            mean_pred: if c > 0 { s / c as f64 } else { 0.0 },
            frac_pos: if c > 0 { pos as f64 / c as f64 } else { 0.0 },
            count: c,
        })
        .collect();
    let ece = reliability.iter().map(|b| b.count as f64 / nf * (b.mean_pred - b.frac_pos).abs()).sum();
    let histogram = reliability.iter().map(|b| b.count).collect();

    let pos_idx: Vec<usize> = (0..count).filter(|&k| labels[k]).collect();
    let neg_idx: Vec<usize> = (0..count).filter(|&k| !labels[k]).collect();
    let pos_logloss = if pos_idx.is_empty() {
        f64::NAN
    } else {
        pos_idx.iter().map(|&k| -preds[k].ln()).sum::<f64>() / pos_idx.len() as f64
    };
    let mut rng = stream(seed, "balanced-negatives");
    let take = pos_idx.len().min(neg_idx.len());
    let mut chosen: Vec<usize> = sample(&mut rng, neg_idx.len(), take).into_iter().map(|k| neg_idx[k]).collect();
    chosen.extend(&pos_idx);
    let balanced_logloss = if chosen.is_empty() {
        f64::NAN
    } else {
        chosen.iter().map(|&k| point_logloss(preds[k], labels[k])).sum::<f64>() / chosen.len() as f64
    };

    Ok(MetricReport {
        count,
        positives,
        auc: auc_value,
        single_class,
        logloss,
        loglik: -logloss,
        brier,
        ece,
        ap: average_precision(preds, labels),
        pos_logloss,
        balanced_logloss,
        reliability,
        histogram,
    })
}

/// Fitted probabilities on the test dyads.
pub fn predict_split(fit: &FitReport, split: &HoldoutSplit) -> Vec<f64> {
    split.test.iter().map(|&(i, j)| fit.predict(i, j)).collect()
}

/// Seriation, binning and smoothed cell means only.
pub fn baseline_histogram(adj: &Adjacency, method: SeriationMethod, k: usize, split: &HoldoutSplit) -> Result<Vec<f64>> {
    let training = adj.without(&split.mask);
    let ordering = seriation(&training, method);
    let bin_of = assign_bins(&ordering.order, k);
    let hist = binned_histogram(adj, &bin_of, k, Some(&split.mask))?;
    Ok(split.test.iter().map(|&(i, j)| hist.predict(i, j)).collect())
}

/// `k_blocks` contiguous blocks along the training degree order.
pub fn baseline_sbm(adj: &Adjacency, k_blocks: usize, split: &HoldoutSplit) -> Result<Vec<f64>> {
    if k_blocks == 0 {
        return Err(Error::InvalidInput("k_blocks must be at least 1".into()));
    }
    let training = adj.without(&split.mask);
    let bin_of = assign_bins(&degree_ordering(&training).order, k_blocks);
    let hist = binned_histogram(adj, &bin_of, k_blocks, Some(&split.mask))?;
    Ok(split.test.iter().map(|&(i, j)| hist.predict(i, j)).collect())
}

/// Wavelet pipeline predictions on one split.
pub fn wavelet_predictions(
    adj: &Adjacency,
    method: SeriationMethod,
    k: usize,
    kappa: f64,
    split: &HoldoutSplit,
) -> Result<Vec<f64>> {
    let fit = fit_pipeline(adj, method, k, kappa, Some(&split.mask))?;
    Ok(predict_split(&fit, split))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Metrics of one method averaged over splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub auc_mean: f64,
    pub auc_sd: f64,
    pub loglik_mean: f64,
    pub loglik_sd: f64,
    pub brier: f64,
    pub ece: f64,
    pub ap: f64,
    pub pos_logloss: f64,
    pub balanced_logloss: f64,
}

impl MethodSummary {
    pub fn from_reports(method: &str, reports: &[MetricReport]) -> Self {
        let col = |f: fn(&MetricReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
        let (auc_mean, auc_sd) = mean_sd(&col(|r| r.auc));
        let (loglik_mean, loglik_sd) = mean_sd(&col(|r| r.loglik));
        MethodSummary {
            method: method.to_string(),
            auc_mean,
            auc_sd,
            loglik_mean,
            loglik_sd,
            brier: mean_sd(&col(|r| r.brier)).0,
            ece: mean_sd(&col(|r| r.ece)).0,
            ap: mean_sd(&col(|r| r.ap)).0,
            pos_logloss: mean_sd(&col(|r| r.pos_logloss)).0,
            balanced_logloss: mean_sd(&col(|r| r.balanced_logloss)).0,
        }
    }
}

pub fn metrics_csv(dataset: &str, rows: &[MethodSummary]) -> String {
    let mut out = String::from("dataset,method,auc_mean,auc_sd,loglik_mean,loglik_sd,brier,ece,ap,pos_logloss,balanced_logloss\n");
    for r in rows {
        out.push_str(&format!(
            "{dataset},{},{},{},{},{},{},{},{},{},{}\n",
            r.method, r.auc_mean, r.auc_sd, r.loglik_mean, r.loglik_sd, r.brier, r.ece, r.ap, r.pos_logloss, r.balanced_logloss
        ));
    }
    out
}

/// One `(K, kappa)` cell of a robustness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub kappa: f64,
    pub logloss_mean: f64,
    pub logloss_sd: f64,
    pub auc_mean: f64,
    pub auc_sd: f64,
}

/// Full factorial of pipeline fits over `ks x kappas`, scored on every split.
pub fn robustness_sweep(
    adj: &Adjacency,
    method: SeriationMethod,
    ks: &[usize],
    kappas: &[f64],
    splits: &[HoldoutSplit],
) -> Result<Vec<SweepRow>> {
    let cells: Vec<(usize, f64)> = ks.iter().flat_map(|&k| kappas.iter().map(move |&kp| (k, kp))).collect();
    cells
        .par_iter()
        .map(|&(k, kappa)| {
            let mut ll = Vec::with_capacity(splits.len());
            let mut au = Vec::with_capacity(splits.len());
            for split in splits {
                let preds = wavelet_predictions(adj, method, k, kappa, split)?;
                let rep = score_predictions(&preds, &split.labels(adj), split.seed)?;
                ll.push(rep.logloss);
                au.push(rep.auc);
            }
            let (logloss_mean, logloss_sd) = mean_sd(&ll);
            let (auc_mean, auc_sd) = mean_sd(&au);
            Ok(SweepRow { k, kappa, logloss_mean, logloss_sd, auc_mean, auc_sd })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("K,kappa,logloss_mean,logloss_sd,auc_mean,auc_sd\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.k, r.kappa, r.logloss_mean, r.logloss_sd, r.auc_mean, r.auc_sd));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{from_erdos_renyi, from_two_block, Graphon};
    use crate::sampler::sample_graph;

    #[test]
    fn split_examples() {
        let s = holdout_split(100, 0.1, 3).unwrap();
        assert_eq!(s.test.len(), 495);
        assert_eq!(s.mask.edge_count(), 495);
        assert_eq!(holdout_split(100, 0.1, 3).unwrap(), s);
        assert_ne!(holdout_split(100, 0.1, 4).unwrap().test, s.test);
        assert!(holdout_split(3, 0.01, 0).is_err());
        assert!(holdout_split(30, 1.0, 0).is_err());
        assert!(s.test.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn metric_examples() {
        let r = score_predictions(&[0.5; 4], &[true, false, true, false], 0).unwrap();
        assert!((r.logloss - 2f64.ln()).abs() < 1e-15);
        assert_eq!(r.loglik, -r.logloss);
        let r = score_predictions(&[0.9, 0.1], &[true, false], 0).unwrap();
        assert!((r.logloss - 0.105_361).abs() < 1e-6);
        assert!((r.brier - 0.01).abs() < 1e-15);
        let r = score_predictions(&[0.99, 0.01], &[true, false], 0).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.ap, 1.0);
        let r = score_predictions(&[0.3, 0.2], &[false, false], 0).unwrap();
        assert!(r.single_class && r.auc == 0.5);
        assert!(score_predictions(&[1.0], &[true], 0).is_err());
    }

    #[test]
    fn auc_matches_pair_count() {
        let preds = [0.1, 0.4, 0.4, 0.8, 0.3, 0.4];
        let labels = [false, true, false, true, true, false];
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for a in 0..6 {
            for b in 0..6 {
                if labels[a] && !labels[b] {
                    pairs += 1.0;
                    wins += if preds[a] > preds[b] { 1.0 } else if preds[a] == preds[b] { 0.5 } else { 0.0 };
                }
            }
        }
        assert!((auc(&preds, &labels).unwrap() - wins / pairs).abs() < 1e-15);
    }

    #[test]
    fn ap_matches_definition() {
        let preds = [0.9, 0.8, 0.7, 0.6];
        let labels = [true, false, true, false];
        assert!((average_precision(&preds, &labels) - (0.5 * 1.0 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn calibrated_bins_have_zero_ece() {
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for (p, pos) in [(0.25, 1), (0.75, 3)] {
            for k in 0..4 {
                preds.push(p);
                labels.push(k < pos);
            }
        }
        let r = score_predictions(&preds, &labels, 0).unwrap();
        assert!(r.ece.abs() < 1e-15);
        assert_eq!(r.reliability.iter().map(|b| b.count).sum::<usize>(), 8);
        assert!(r.reliability_csv().starts_with("bin_lo,bin_hi,mean_pred,frac_pos,count\n"));
    }

    #[test]
    fn kappa_zero_matches_histogram() {
        let g = Graphon::new(from_two_block(0.6, 0.3).unwrap());
        let lg = sample_graph(&g, 400, 5).unwrap();
        let split = holdout_split(400, 0.1, 1).unwrap();
        let wl = wavelet_predictions(&lg.adj, SeriationMethod::Degree, 32, 0.0, &split).unwrap();
        let hist = baseline_histogram(&lg.adj, SeriationMethod::Degree, 32, &split).unwrap();
        for (a, b) in wl.iter().zip(&hist) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sbm_baseline() {
        let g = Graphon::new(from_erdos_renyi(0.2).unwrap());
        let lg = sample_graph(&g, 100, 2).unwrap();
        let split = holdout_split(100, 0.1, 9).unwrap();
        let preds = baseline_sbm(&lg.adj, 1, &split).unwrap();
        let train_edges = lg.adj.without(&split.mask).edge_count() as f64;
        let train_dyads = (dyad_count(100) - split.test.len()) as f64;
        let want = (train_edges + 0.5) / (train_dyads + 1.0);
        assert!(preds.iter().all(|&p| (p - want).abs() < 1e-15));
        assert_eq!(baseline_sbm(&lg.adj, 3, &split).unwrap(), baseline_sbm(&lg.adj, 3, &split).unwrap());
        assert!(baseline_sbm(&lg.adj, 0, &split).is_err());
    }

    #[test]
    fn sbm_baseline_recovers_unequal_degree_blocks() {
        use crate::kernel::from_dyadic_sbm;
        use crate::link::logit;
        let b = [0.6, 0.2, 0.2, 0.3];
        let beta: Vec<f64> = b.iter().map(|&p| logit(p)).collect();
        let g = Graphon::new(from_dyadic_sbm(1, &beta, 0.0).unwrap());
        let lg = sample_graph(&g, 600, 4).unwrap();
        let split = holdout_split(600, 0.1, 5).unwrap();
        let preds = baseline_sbm(&lg.adj, 2, &split).unwrap();
        let mut sums = [0.0; 4];
        let mut counts = [0usize; 4];
        for (&(i, j), p) in split.test.iter().zip(&preds) {
            let cell = 2 * usize::from(lg.positions[i] >= 0.5) + usize::from(lg.positions[j] >= 0.5);
            sums[cell] += p;
            counts[cell] += 1;
        }
        for c in 0..4 {
            let mean = sums[c] / counts[c] as f64;
            assert!((mean - b[c]).abs() < 0.05, "cell {c}: {mean} vs {}", b[c]);
        }
    }

    #[test]
    fn sweep_shape() {
        let g = Graphon::new(from_two_block(0.5, 0.2).unwrap());
        let lg = sample_graph(&g, 200, 1).unwrap();
        let splits = vec![holdout_split(200, 0.1, 1).unwrap()];
        let rows = robustness_sweep(&lg.adj, SeriationMethod::Degree, &[8, 16], &[0.5, 1.0, 2.0], &splits).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(sweep_csv(&rows).lines().count() == 7);
    }
}
