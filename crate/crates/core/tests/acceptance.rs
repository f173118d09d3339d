//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng;
use wlerg_core::basis::{forward_haar_2d, inverse_haar_2d, WaveletIndex};
use wlerg_core::detection::{
    default_scan_scales, hierarchical_classify, hierarchical_profile, hierarchical_sbm_kernel, planted_delta,
    sample_planted, two_block_error_rate, wavelet_scan, SCAN_C1,
};
use wlerg_core::diagnostics::cut_distance_proxy;
use wlerg_core::estimator::{observed_design_fit, surface_l2_error, SeriationMethod};
use wlerg_core::evaluation::{baseline_histogram, holdout_split, robustness_sweep, score_predictions, wavelet_predictions};
use wlerg_core::expfamily::{
    enumerate_family, limiting_logmgf, maxent_entropy_identity, rate_function, tilt_path_diagnostics, StatisticIndexSet,
    TiltVector,
};
use wlerg_core::kernel::{
    convolve_laws, from_dyadic_sbm, from_erdos_renyi, from_two_block, project_logit_surface, weighted_graph, Band,
    BandCoefficients, CoefficientLaw, Covariance, Graphon,
};
use wlerg_core::rng::stream;
use wlerg_core::sampler::{empirical_step_graphon, sample_graph, sample_positions, Adjacency};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 0 {
        0.5 * (xs[m - 1] + xs[m])
    } else {
        xs[m]
    }
}

fn psi(j: u32, l: u32) -> WaveletIndex {
    WaveletIndex::detail(j, l)
}

fn c1_exponential_family() -> Outcome {
    let mut rng = stream(1, "acceptance-1");
    let shapes: Vec<Vec<(WaveletIndex, WaveletIndex)>> = vec![
        vec![(WaveletIndex::Dc, psi(0, 0))],
        vec![(psi(0, 0), psi(0, 0))],
        vec![(psi(0, 0), psi(0, 0)), (WaveletIndex::Dc, psi(1, 1))],
        vec![(psi(1, 0), psi(1, 0)), (psi(0, 0), psi(1, 1))],
    ];
    let (mut worst_norm, mut worst_gap) = (0.0f64, 0.0f64);
    for n in 2..=4 {
        for trial in 0..25 {
            let mut theta = BandCoefficients::new(rng.random_range(-2.0..2.0), Band { min: 0, max: 1 });
            for &(r, s) in &shapes[trial % shapes.len()] {
                theta.set(r, s, rng.random_range(-1.5..1.5)).unwrap();
            }
            let index = StatisticIndexSet::from_kernel(&theta);
            assert!(index.len() <= 3);
            let positions: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..0.999)).collect();
            let e = enumerate_family(&theta, &positions, &index).unwrap();
            let total: f64 = e.log_probs.iter().map(|lp| lp.exp()).sum();
            worst_norm = worst_norm.max((total - 1.0).abs());
            let rep = maxent_entropy_identity(&theta, &positions, &index).unwrap();
            worst_gap = worst_gap.max(rep.identity_gap().abs());
        }
    }
    outcome(
        worst_norm <= 1e-12 && worst_gap <= 1e-10,
        format!("max |sum P - 1| = {worst_norm:.2e}, max entropy gap = {worst_gap:.2e}"),
    )
}

fn c2_special_cases() -> Outcome {
    let p = 0.3;
    let er = Graphon::new(from_erdos_renyi(p).unwrap());
    let target = er.eval(0.3, 0.7);
    let lg = sample_graph(&er, 2000, 2).unwrap();
    let density = lg.adj.edge_count() as f64 / (2000.0 * 1999.0 / 2.0);
    let er_err = (density - target).abs();

    let beta = [1.2, -0.4, 0.3, -1.0, -0.4, 0.8, -0.7, 0.1, 0.3, -0.7, 1.5, -0.2, -1.0, 0.1, -0.2, 0.6];
    let sbm = Graphon::new(from_dyadic_sbm(2, &beta, -0.5).unwrap());
    let lg = sample_graph(&sbm, 4096, 3).unwrap();
    let cell: Vec<usize> = lg.positions.iter().map(|&u| ((u * 4.0) as usize).min(3)).collect();
    let mut edges = [[0.0f64; 4]; 4];
    let mut sizes = [0.0f64; 4];
    for &c in &cell {
        sizes[c] += 1.0;
    }
    for (i, j) in lg.adj.edges() {
        let (a, b) = (cell[i].min(cell[j]), cell[i].max(cell[j]));
        edges[a][b] += 1.0;
    }
    let mut sbm_err = 0.0f64;
    for a in 0..4 {
        for b in a..4 {
            let pairs = if a == b { sizes[a] * (sizes[a] - 1.0) / 2.0 } else { sizes[a] * sizes[b] };
            let want = 1.0 / (1.0 + (-(-0.5 + beta[a * 4 + b])).exp());
            let model = sbm.eval((a as f64 + 0.5) / 4.0, (b as f64 + 0.5) / 4.0);
            sbm_err = sbm_err.max((edges[a][b] / pairs - want).abs()).max((model - want).abs());
        }
    }
    outcome(er_err <= 0.01 && sbm_err <= 0.02, format!("ER |dens - p| = {er_err:.4}, SBM max block error = {sbm_err:.4}"))
}

fn c3_transform() -> Outcome {
    let mut rng = stream(3, "acceptance-3");
    let (mut rt, mut pars) = (0.0f64, 0.0f64);
    let mut k = 2;
    while k <= 256 {
        let grid: Vec<f64> = (0..k * k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let coeffs = forward_haar_2d(&grid, k).unwrap();
        let back = inverse_haar_2d(&coeffs);
        rt = rt.max(grid.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let norm = grid.iter().map(|v| v * v).sum::<f64>().sqrt();
        pars = pars.max((norm - coeffs.norm_sq().sqrt()).abs());
        k *= 2;
    }
    outcome(rt < 1e-11 && pars <= 1e-10, format!("round trip max-abs = {rt:.2e}, Parseval gap = {pars:.2e}"))
}

fn c4_rate_direction() -> Outcome {
    let mut beta = vec![0.0; 64];
    for a in 0..8 {
        for b in 0..8 {
            let shared = if a == b { 2.5 } else if a / 2 == b / 2 { 0.0 } else if a / 4 == b / 4 { -1.5 } else { -3.0 };
            beta[a * 8 + b] = shared + 0.3 * (a as f64 - b as f64).abs();
        }
    }
    let truth = Graphon::new(from_dyadic_sbm(3, &beta, 0.0).unwrap());
    let sizes = [200usize, 400, 800, 1600];
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let errs = (0..10)
                .map(|seed| {
                    let lg = sample_graph(&truth, n, 100 + seed).unwrap();
                    let fit = observed_design_fit(&lg, 1.0, 1e-6).unwrap();
                    surface_l2_error(&fit.surface, fit.side(), &truth, 1024).unwrap()
                })
                .collect();
            median(errs)
        })
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let halved = medians[3] < 0.5 * medians[0];
    outcome(monotone && halved, format!("median L2 errors {medians:.4?} for n = {sizes:?}"))
}

fn c5_two_block() -> Outcome {
    let rate = |p_in: f64, p_out: f64| {
        let g = Graphon::new(from_two_block(p_in, p_out).unwrap());
        let rates: Vec<f64> = (0..5).map(|s| two_block_error_rate(&sample_graph(&g, 1024, 50 + s).unwrap())).collect();
        rates.iter().sum::<f64>() / rates.len() as f64
    };
    let strong = rate(0.6, 0.4);
    let weak = rate(0.505, 0.495);
    outcome(strong < 0.02 && weak > 0.30, format!("error at SNR 81.9 = {strong:.4}, at SNR 0.2 = {weak:.4}"))
}

fn c6_phase() -> Outcome {
    let n = 2048;
    let q = [0.25, 0.45, 0.5, 0.51];
    let prof = hierarchical_profile(&q, n).unwrap();
    let g = Graphon::new(hierarchical_sbm_kernel(&q).unwrap());
    let levels = (q.len() - 1) as u32;
    let mut err = vec![0.0; levels as usize];
    let seeds = 3;
    for s in 0..seeds {
        let lg = sample_graph(&g, n, 60 + s).unwrap();
        let res = hierarchical_classify(&lg, levels, &prof.delta).unwrap();
        for (e, r) in err.iter_mut().zip(&res.error_rates) {
            *e += r / seeds as f64;
        }
    }
    let regime = prof.snr[0] >= 10.0 * (n as f64).ln() && prof.snr[2] <= 1.0;
    outcome(
        regime && err[0] < 0.05 && err[2] > 0.30,
        format!("SNR = {:.3?}, error rates = {err:.4?}", prof.snr),
    )
}

fn c7_scan() -> Outcome {
    let n = 512;
    let w0 = Graphon::new(from_two_block(0.3, 0.15).unwrap());
    let scales = default_scan_scales(n);
    let seeds = 200u64;
    let alarms = (0..seeds)
        .filter(|&s| {
            let lg = sample_graph(&w0, n, 1000 + s).unwrap();
            wavelet_scan(&lg, &w0, scales.clone(), SCAN_C1).any_detected()
        })
        .count();
    let j = 3;
    let delta = planted_delta(n, j, 20.0);
    let (mut hits, mut located) = (0, 0);
    for s in 0..seeds {
        let l = (s % 8) as u32;
        let lg = sample_planted(&w0, n, 5000 + s, j, l, delta).unwrap();
        let rep = wavelet_scan(&lg, &w0, scales.clone(), SCAN_C1);
        if rep.any_detected() {
            hits += 1;
        }
        if rep.top().is_some_and(|b| b.j == j && b.l == l) {
            located += 1;
        }
    }
    let fa = alarms as f64 / seeds as f64;
    let power = hits as f64 / seeds as f64;
    let loc = located as f64 / seeds as f64;
    outcome(fa <= 0.05 && power >= 0.95 && loc >= 0.90, format!("false alarm = {fa:.3}, power = {power:.3}, localisation = {loc:.3}"))
}

fn c8_mgf_rate() -> Outcome {
    let mut base = from_two_block(0.55, 0.3).unwrap();
    base.extend_band(Band { min: 0, max: 1 });
    base.set(psi(1, 0), psi(1, 1), 0.4).unwrap();
    let g0 = Graphon::new(base);
    let pairs = [(WaveletIndex::Dc, psi(0, 0)), (psi(0, 0), psi(0, 0)), (psi(1, 0), psi(1, 1))];
    let index = StatisticIndexSet::symmetric_closure(&pairs).unwrap();
    let grid = 256;
    let zero = limiting_logmgf(&g0, &TiltVector::zero(index.clone()), grid).unwrap();
    let zero_ok = zero.value == 0.0;

    let mut rng = stream(8, "acceptance-8");
    let random_tilt = |rng: &mut rand_chacha::ChaCha8Rng, scale: f64| {
        let vals: Vec<_> = pairs.iter().map(|&(r, s)| (r, s, rng.random_range(-scale..scale))).collect();
        TiltVector::from_canonical(rng.random_range(-scale..scale), &vals).unwrap()
    };
    let (mut grad_err, mut min_eig, mut legendre) = (0.0f64, f64::INFINITY, 0.0f64);
    for trial in 0..20 {
        let lam = random_tilt(&mut rng, 1.0);
        let rep = limiting_logmgf(&g0, &lam, grid).unwrap();
        min_eig = min_eig.min(rep.min_eigenvalue);
        let dir = random_tilt(&mut rng, 1.0);
        let h = 1e-4;
        let up = limiting_logmgf(&g0, &lam.plus(&dir.scaled(h)).unwrap(), grid).unwrap().value;
        let down = limiting_logmgf(&g0, &lam.plus(&dir.scaled(-h)).unwrap(), grid).unwrap().value;
        let fd = (up - down) / (2.0 * h);
        let exact: f64 = rep.gradient.iter().zip(dir.coords()).map(|(a, b)| a * b).sum();
        grad_err = grad_err.max((fd - exact).abs() / exact.abs().max(1e-12));
        if trial < 5 {
            let rate = rate_function(&g0, &index, &rep.gradient, grid).unwrap();
            let gap = rate.lambda.coords().iter().zip(lam.coords()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            legendre = legendre.max(gap);
        }
    }
    let p = 0.2;
    let er = Graphon::new(from_erdos_renyi(p).unwrap());
    let mut bern = 0.0f64;
    for t in [0.05, 0.2, 0.35, 0.6, 0.9] {
        let closed = t * (t / p).ln() + (1.0 - t) * ((1.0 - t) / (1.0 - p)).ln();
        let got = rate_function(&er, &StatisticIndexSet::default(), &[t], 4).unwrap().value;
        bern = bern.max((got - closed).abs());
    }
    outcome(
        zero_ok && grad_err < 1e-5 && min_eig > 0.0 && legendre < 1e-4 && bern <= 1e-8,
        format!(
            "Lambda(0) = {}, grad rel-err = {grad_err:.2e}, min eig = {min_eig:.3e}, Legendre gap = {legendre:.2e}, Bernoulli gap = {bern:.2e}",
            zero.value
        ),
    )
}

fn c9_tilt_path() -> Outcome {
    let g0 = Graphon::new(from_erdos_renyi(0.5).unwrap());
    let dir = TiltVector::from_canonical(0.3, &[(psi(0, 0), psi(0, 0), 0.2)]).unwrap();
    let ts: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
    let seeds: Vec<u64> = (0..4).collect();
    let rows = tilt_path_diagnostics(&g0, &dir, &ts, 400, &seeds).unwrap();
    let bounded = rows.iter().all(|r| {
        (0.02..=0.98).contains(&r.edge_density_mean) && (0.02..=0.98).contains(&r.triangle_density_mean)
    });
    let monotone = rows.windows(2).all(|w| {
        w[1].edge_density_mean > w[0].edge_density_mean && w[1].triangle_density_mean > w[0].triangle_density_mean
    });
    let steps: Vec<f64> = rows.windows(2).map(|w| w[1].edge_density_mean - w[0].edge_density_mean).collect();
    let smooth = steps.iter().all(|&s| s < 0.1);
    let edge: Vec<f64> = rows.iter().map(|r| r.edge_density_mean).collect();
    let tri: Vec<f64> = rows.iter().map(|r| r.triangle_density_mean).collect();
    outcome(bounded && monotone && smooth, format!("edge densities {edge:.3?}, triangle densities {tri:.3?}"))
}

fn c10_superposition() -> Outcome {
    let mut k1 = from_two_block(0.6, 0.2).unwrap();
    k1.extend_band(Band { min: 0, max: 2 });
    k1.set(psi(2, 1), psi(2, 3), -0.7).unwrap();
    let mut k2 = BandCoefficients::new(0.4, Band { min: 0, max: 2 });
    k2.set(psi(1, 0), psi(1, 0), 0.9).unwrap();
    k2.set(psi(0, 0), psi(2, 2), 0.35).unwrap();
    let positions = sample_positions(300, 10);
    let y1 = weighted_graph(&k1, &positions);
    let y2 = weighted_graph(&k2, &positions);
    let y = weighted_graph(&k1.plus(&k2), &positions);
    let path = y.iter().zip(y1.iter().zip(&y2)).map(|(a, (b, c))| (a - b - c).abs()).fold(0.0, f64::max);

    let idx = vec![(WaveletIndex::Dc, WaveletIndex::Dc), (psi(0, 0), psi(0, 0)), (psi(0, 0), psi(1, 1))];
    let a = CoefficientLaw::gaussian(idx.clone(), vec![0.5, -0.25, 1.0], Covariance::Diagonal(vec![0.5, 0.25, 1.0])).unwrap();
    let full = nalgebra::DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 2.0, 0.25, 0.0, 0.25, 0.5]);
    let b = CoefficientLaw::gaussian(idx, vec![0.25, 0.75, -2.0], Covariance::Full(full.clone())).unwrap();
    let c = convolve_laws(&a, &b).unwrap();
    let mean_ok = c.mean() == [0.75, 0.5, -1.0];
    let want = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.25, 1.0])) + full;
    let cov_ok = c.covariance().to_matrix() == want;
    outcome(path <= 1e-12 && mean_ok && cov_ok, format!("pathwise max gap = {path:.2e}, law mean exact = {mean_ok}, covariance exact = {cov_ok}"))
}

/// Four-block coarse hierarchy, a degree gradient and eight planted fine blocks.
fn multiscale_truth() -> Graphon {
    let k = 64;
    let coarse = [[-0.4, -1.6, -2.2, -2.6], [-1.6, -0.8, -2.0, -2.4], [-2.2, -2.0, -1.2, -2.2], [-2.6, -2.4, -2.2, -1.6]];
    let planted = [1usize, 6, 12, 17, 22, 24, 28, 31];
    let mut grid = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            let (x, y) = ((a as f64 + 0.5) / k as f64, (b as f64 + 0.5) / k as f64);
            let mut v = coarse[a / 16][b / 16] + 0.6 * (x + y - 1.0);
            if a / 2 == b / 2 && planted.contains(&(a / 2)) {
                v += 2.0;
            }
            grid[a * k + b] = v;
        }
    }
    Graphon::new(project_logit_surface(&grid, k).unwrap())
}

fn multiscale_graph() -> Adjacency {
    sample_graph(&multiscale_truth(), 1500, 11).unwrap().adj
}

fn c11_value_add(adj: &Adjacency) -> Outcome {
    let mut wins = 0;
    let mut gaps = Vec::new();
    for seed in 0..10 {
        let split = holdout_split(adj.n(), 0.1, 200 + seed).unwrap();
        let labels = split.labels(adj);
        let wl = wavelet_predictions(adj, SeriationMethod::Degree, 128, 1.0, &split).unwrap();
        let hist = baseline_histogram(adj, SeriationMethod::Degree, 128, &split).unwrap();
        let a = score_predictions(&wl, &labels, split.seed).unwrap().logloss;
        let b = score_predictions(&hist, &labels, split.seed).unwrap().logloss;
        if a <= b {
            wins += 1;
        }
        gaps.push(b - a);
    }
    outcome(wins >= 8, format!("WL logloss <= histogram on {wins}/10 splits, gains {gaps:.4?}"))
}

fn c12_robustness(adj: &Adjacency) -> Outcome {
    let splits: Vec<_> = (0..10).map(|s| holdout_split(adj.n(), 0.1, 300 + s).unwrap()).collect();
    let rows = robustness_sweep(adj, SeriationMethod::Degree, &[64, 128, 256], &[0.5, 1.0, 2.0], &splits).unwrap();
    let lo = rows.iter().map(|r| r.logloss_mean).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.logloss_mean).fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    outcome(spread <= 0.10, format!("logloss range [{lo:.4}, {hi:.4}], relative spread = {spread:.4}"))
}

fn c13_cut_trend() -> Outcome {
    let beta = [1.0, -0.5, -1.0, 0.0, -0.5, 0.5, 0.0, -1.0, -1.0, 0.0, 1.5, -0.5, 0.0, -1.0, -0.5, 0.5];
    let truth = Graphon::new(from_dyadic_sbm(2, &beta, -0.2).unwrap());
    let sizes = [256usize, 512, 1024, 2048];
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let target = truth.surface(n);
            let vals = (0..10)
                .map(|s| {
                    let lg = sample_graph(&truth, n, 400 + s).unwrap();
                    cut_distance_proxy(&empirical_step_graphon(&lg), &target, n).unwrap().lower
                })
                .collect();
            median(vals)
        })
        .collect();
    let ok = medians.windows(2).all(|w| w[1] <= w[0]);
    outcome(ok, format!("median cut proxy {medians:.4?} for n = {sizes:?}"))
}

fn main() {
    let mut failures = 0;
    let mut run = |id: usize, name: &str, budget: Duration, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {:<30} {} ({:.2}s / {}s) {}",
            name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            o.detail
        );
    };
    let secs = Duration::from_secs;
    run(1, "exponential-family exactness", secs(1), &c1_exponential_family);
    run(2, "special cases", secs(10), &c2_special_cases);
    run(3, "transform correctness", secs(5), &c3_transform);
    run(4, "estimator rate direction", secs(120), &c4_rate_direction);
    run(5, "two-block classification", secs(60), &c5_two_block);
    run(6, "multiscale phase diagram", secs(120), &c6_phase);
    run(7, "scan calibration and power", secs(180), &c7_scan);
    run(8, "log-MGF and rate numerics", secs(30), &c8_mgf_rate);
    run(9, "tilt non-degeneracy", secs(120), &c9_tilt_path);
    run(10, "convolution and superposition", secs(1), &c10_superposition);
    run(11, "pipeline value-add", secs(180), &|| c11_value_add(&multiscale_graph()));
    run(12, "robustness over K and kappa", secs(300), &|| c12_robustness(&multiscale_graph()));
    run(13, "cut-distance trend", secs(120), &c13_cut_trend);
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
