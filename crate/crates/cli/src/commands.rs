use std::path::Path;

use rayon::prelude::*;
use wlerg_core::basis::{forward_haar_2d, inverse_haar_2d, CoefficientGrid2D};
use wlerg_core::detection::{
    default_scan_scales, hierarchical_classify, hierarchical_profile, residual_block_scan, wavelet_scan,
};
use wlerg_core::estimator::{fit_pipeline, read_surface_csv, FitReport, SeriationMethod};
use wlerg_core::evaluation::{
    baseline_histogram, baseline_sbm, holdout_split, metrics_csv, robustness_sweep, score_predictions, sweep_csv,
    wavelet_predictions, HoldoutSplit, MethodSummary, MetricReport,
};
use wlerg_core::expfamily::{limiting_logmgf, tilt_path_csv, tilt_path_diagnostics, TiltVector};
use wlerg_core::kernel::{BandCoefficients, Graphon};
use wlerg_core::rng::derive_seed;
use wlerg_core::sampler::{
    edge_list_vertex_hint, read_edge_list, read_positions, sample_graph, write_edge_list, write_positions, Adjacency,
    LatentGraph,
};

use crate::spec::{parse_coef, parse_kernel, parse_scales};
use crate::{
    read_input, write_output, CliError, CliResult, Command, Direction, EvalArgs, FitArgs, Manifest, PhaseArgs,
    SampleArgs, ScanArgs, TiltArgs, TransformArgs,
};

pub fn dispatch(m: &Manifest) -> CliResult<()> {
    let out = m.out.as_path();
    match &m.command {
        Command::Sample(a) => sample(a, m.seed, out),
        Command::Fit(a) => fit(a, out),
        Command::Eval(a) => eval(a, m.seed, out),
        Command::Scan(a) => scan(a, out),
        Command::Tilt(a) => tilt(a, m.seed, out),
        Command::Phase(a) => phase(a, m.seed, out),
        Command::Transform(a) => transform(a, out),
    }
}

fn method(name: &str) -> CliResult<SeriationMethod> {
    Ok(name.parse::<SeriationMethod>()?)
}

fn load_graph(path: &Path) -> CliResult<Adjacency> {
    let text = read_input(path)?;
    Ok(read_edge_list(&text, edge_list_vertex_hint(&text))?)
}

fn json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::Internal(e.to_string()))
}

fn sample(a: &SampleArgs, seed: u64, out: &Path) -> CliResult<()> {
    let g = Graphon::new(parse_kernel(&a.kernel)?);
    let lg = sample_graph(&g, a.n, derive_seed(seed, "sample"))?;
    write_output(out, "edges.txt", &write_edge_list(&lg.adj))?;
    write_output(out, "positions.csv", &write_positions(&lg.positions))
}

fn fit(a: &FitArgs, out: &Path) -> CliResult<()> {
    let adj = load_graph(&a.input)?;
    let report = fit_pipeline(&adj, method(&a.method)?, a.k, a.kappa, None)?;
    write_output(out, "fit.json", &(report.to_json()? + "\n"))?;
    write_output(out, "surface.csv", &report.surface_csv())
}

fn eval(a: &EvalArgs, seed: u64, out: &Path) -> CliResult<()> {
    if a.splits == 0 {
        return Err(CliError::Validation("--splits must be positive".into()));
    }
    let adj = load_graph(&a.input)?;
    let seriation = method(&a.method)?;
    let splits: Vec<HoldoutSplit> = (0..a.splits)
        .map(|s| holdout_split(adj.n(), a.fraction, derive_seed(seed, &format!("split-{s}"))))
        .collect::<Result<_, _>>()?;

    type Predictor<'a> = Box<dyn Fn(&HoldoutSplit) -> wlerg_core::Result<Vec<f64>> + Sync + 'a>;
    let methods: Vec<(&str, Predictor)> = vec![
        ("WL", Box::new(|s| wavelet_predictions(&adj, seriation, a.k, a.kappa, s))),
        ("Histogram", Box::new(|s| baseline_histogram(&adj, seriation, a.k, s))),
        ("SBM", Box::new(|s| baseline_sbm(&adj, a.b, s))),
    ];

    let mut summaries = Vec::new();
    for (name, predict) in &methods {
        let per_split: Vec<(Vec<f64>, Vec<bool>, MetricReport)> = splits
            .par_iter()
            .map(|split| {
                let preds = predict(split)?;
                let labels = split.labels(&adj);
                let report = score_predictions(&preds, &labels, split.seed)?;
                Ok((preds, labels, report))
            })
            .collect::<wlerg_core::Result<_>>()?;
        let reports: Vec<MetricReport> = per_split.iter().map(|(_, _, r)| r.clone()).collect();
        summaries.push(MethodSummary::from_reports(name, &reports));

        let preds: Vec<f64> = per_split.iter().flat_map(|(p, _, _)| p.iter().copied()).collect();
        let labels: Vec<bool> = per_split.iter().flat_map(|(_, l, _)| l.iter().copied()).collect();
        let pooled = score_predictions(&preds, &labels, derive_seed(seed, "pooled"))?;
        let tag = name.to_lowercase();
        write_output(out, &format!("reliability_{tag}.csv"), &pooled.reliability_csv())?;
        write_output(out, &format!("histogram_{tag}.csv"), &pooled.histogram_csv())?;
    }
    let dataset = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    write_output(out, "metrics.csv", &metrics_csv(&dataset, &summaries))?;

    if a.sweep {
        let rows = robustness_sweep(&adj, seriation, &a.sweep_k, &a.sweep_kappa, &splits)?;
        write_output(out, "sweep.csv", &sweep_csv(&rows))?;
    }
    Ok(())
}

fn scan(a: &ScanArgs, out: &Path) -> CliResult<()> {
    let adj = load_graph(&a.input)?;
    let n = adj.n();
    let explicit = a.scales.as_deref().map(parse_scales).transpose()?;
    let report = match (&a.positions, &a.kernel) {
        (Some(pos), Some(spec)) => {
            let positions = read_positions(&read_input(pos)?)?;
            let lg = LatentGraph::new(positions, adj)?;
            let w0 = Graphon::new(parse_kernel(spec)?);
            wavelet_scan(&lg, &w0, explicit.unwrap_or_else(|| default_scan_scales(n)), a.c1)
        }
        _ => {
            let fit = match &a.fit {
                Some(dir) => {
                    FitReport::load(&read_input(&dir.join("fit.json"))?, &read_input(&dir.join("surface.csv"))?)?
                }
                None => fit_pipeline(&adj, method(&a.method)?, a.k, a.kappa, None)?,
            };
            let scales = explicit.unwrap_or_else(|| {
                let d = default_scan_scales(n);
                let cap = fit.k.trailing_zeros();
                (*d.start()).min(cap)..=(*d.end()).min(cap)
            });
            residual_block_scan(&adj, &fit, scales, a.c1)?
        }
    };
    write_output(out, "scan.csv", &report.to_csv())?;
    write_output(out, "detections.json", &(report.detections_json()? + "\n"))
}

fn tilt(a: &TiltArgs, seed: u64, out: &Path) -> CliResult<()> {
    if a.steps < 2 || a.reps == 0 {
        return Err(CliError::Validation("tilt needs --steps >= 2 and --reps >= 1".into()));
    }
    let g0 = Graphon::new(parse_kernel(&a.kernel)?);
    let entries = a.coefs.iter().map(|c| parse_coef(c)).collect::<CliResult<Vec<_>>>()?;
    let direction = TiltVector::from_canonical(a.lambda0, &entries)?;
    let ts: Vec<f64> =
        (0..a.steps).map(|i| a.t_min + (a.t_max - a.t_min) * i as f64 / (a.steps - 1) as f64).collect();
    let seeds: Vec<u64> = (0..a.reps).map(|r| derive_seed(seed, &format!("tilt-{r}"))).collect();
    let rows = tilt_path_diagnostics(&g0, &direction, &ts, a.n, &seeds)?;
    write_output(out, "tilt_path.csv", &tilt_path_csv(&rows))?;
    let mgf = limiting_logmgf(&g0, &direction, a.grid)?;
    write_output(out, "mgf.json", &json(&mgf)?)
}

/// Hierarchical kernel with every detail coefficient multiplied by `factor`.
fn scaled_details(base: &BandCoefficients, factor: f64) -> CliResult<BandCoefficients> {
    let mut out = BandCoefficients::new(base.c(), base.band());
    for (r, s, v) in base.entries() {
        out.set(r, s, v * factor)?;
    }
    Ok(out)
}

/// Edge probabilities at each separation scale, read off the kernel.
fn separation_probabilities(g: &Graphon, levels: usize) -> Vec<f64> {
    let x0 = 0.5 / (1u64 << levels) as f64;
    let mut q: Vec<f64> = (0..levels).map(|j| g.eval(x0, x0 + 0.5f64.powi(j as i32 + 1))).collect();
    q.push(g.eval(x0, x0));
    q
}

fn phase(a: &PhaseArgs, seed: u64, out: &Path) -> CliResult<()> {
    if a.reps == 0 || a.multipliers.is_empty() {
        return Err(CliError::Validation("phase needs --reps >= 1 and at least one multiplier".into()));
    }
    let base = wlerg_core::detection::hierarchical_sbm_kernel(&a.q)?;
    let levels = a.q.len() - 1;
    let mut csv = String::from("multiplier,scale,snr,error_rate\n");
    for (mi, &mult) in a.multipliers.iter().enumerate() {
        let g = Graphon::new(scaled_details(&base, mult)?);
        let q = separation_probabilities(&g, levels);
        let profile = hierarchical_profile(&q, a.n)?;
        let errors: Vec<Vec<f64>> = (0..a.reps)
            .into_par_iter()
            .map(|r| {
                let lg = sample_graph(&g, a.n, derive_seed(seed, &format!("phase-{mi}-{r}")))?;
                Ok(hierarchical_classify(&lg, levels as u32, &profile.delta)?.error_rates)
            })
            .collect::<wlerg_core::Result<_>>()?;
        for j in 0..levels {
            let rate = errors.iter().map(|e| e[j]).sum::<f64>() / a.reps as f64;
            csv.push_str(&format!("{mult},{j},{},{rate}\n", profile.snr[j]));
        }
    }
    write_output(out, "phase.csv", &csv)
}

fn grid_from_csv(text: &str) -> CliResult<(Vec<f64>, usize)> {
    let cells = text.lines().skip(1).filter(|l| !l.trim().is_empty()).count();
    let k = (cells as f64).sqrt().round() as usize;
    if k * k != cells || k == 0 {
        return Err(CliError::Validation(format!("grid CSV has {cells} cells, not a square count")));
    }
    Ok((read_surface_csv(text, k)?, k))
}

fn transform(a: &TransformArgs, out: &Path) -> CliResult<()> {
    let text = read_input(&a.input)?;
    let result = match a.direction {
        Direction::Forward => {
            let (grid, k) = grid_from_csv(&text)?;
            forward_haar_2d(&grid, k)?.to_csv()
        }
        Direction::Inverse => {
            let coeffs = CoefficientGrid2D::from_csv(&text, 0)?;
            let k = coeffs.side();
            let grid = inverse_haar_2d(&coeffs);
            let mut csv = String::from("row,col,value\n");
            for r in 0..k {
                for c in 0..k {
                    csv.push_str(&format!("{r},{c},{}\n", grid[r * k + c]));
                }
            }
            csv
        }
    };
    write_output(out, "transform.csv", &result)
}
