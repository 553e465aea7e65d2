//! Acceptance suite. Runs every criterion, prints one pass/fail line per
//! criterion in order and exits non-zero if any fails.

mod common;

#[path = "../examples/make_fixtures.rs"]
#[allow(dead_code)]
mod make_fixtures;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::{char_poly_radius_2x2, naive_linear_log_likelihood, random_params, random_sequence, rel_err, rng};
use contagion::estimate::{
    grid_search_omega, spectral_radius, stochastic_nll_with_grad, FitConfig, LrSchedule, McDesign,
    OmegaMode, Optimizer,
};
use contagion::gof::{ks_statistic_exponential, rescale_times};
use contagion::intensity::{compensator_closed_form, compensator_monte_carlo, log_likelihood, CompensatorMethod};
use contagion::{fit_sgd, simulate_ogata, HawkesModel, KernelParams, LinkSpec};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bivariate() -> HawkesModel {
    HawkesModel::linear(
        vec![0.024, 0.044],
        vec![vec![0.382, 0.387], vec![0.218, 0.343]],
        0.1,
    )
    .unwrap()
}

fn adam_config(seed: u64) -> FitConfig {
    FitConfig {
        learning_rate: 0.01,
        epochs: 1000,
        mc_samples: 5000,
        seed,
        optimizer: Optimizer::adam(),
        schedule: LrSchedule::Cosine { final_factor: 0.01 },
        ..FitConfig::default()
    }
}

fn criterion_1() -> Outcome {
    let truth = bivariate();
    let mut passed = 0;
    let mut worst = Vec::new();
    for seed in 0..10u64 {
        let seq = simulate_ogata(&truth, 100_000.0, 1000 + seed).unwrap();
        let fit = fit_sgd(&seq, &adam_config(seed)).unwrap();
        let mut err_alpha: f64 = 0.0;
        let mut err_mu: f64 = 0.0;
        for k in 0..2 {
            err_mu = err_mu.max((fit.model.mu()[k] / truth.mu()[k] - 1.0).abs());
            for j in 0..2 {
                err_alpha = err_alpha.max((fit.model.alpha()[k][j] / truth.alpha()[k][j] - 1.0).abs());
            }
        }
        passed += (err_alpha <= 0.15 && err_mu <= 0.20) as usize;
        worst.push(format!("{err_alpha:.3}/{err_mu:.3}"));
    }
    outcome(
        passed >= 8,
        format!("{passed}/10 seeds within tolerance (max rel err alpha/mu: {})", worst.join(" ")),
    )
}

fn criterion_2() -> Outcome {
    let truth = bivariate();
    let mut hits = 0;
    let mut chosen = Vec::new();
    for seed in 0..10u64 {
        let seq = simulate_ogata(&truth, 100_000.0, 2000 + seed).unwrap();
        let result = grid_search_omega(&seq, &[0.01, 0.1, 1.0], &adam_config(seed), 0.15).unwrap();
        hits += (result.best_omega == 0.1) as usize;
        chosen.push(result.best_omega.to_string());
    }
    outcome(hits >= 9, format!("omega = 0.1 selected in {hits}/10 seeds ({})", chosen.join(" ")))
}

fn criterion_3() -> Outcome {
    let mut worst_quad: f64 = 0.0;
    let mut worst_naive: f64 = 0.0;
    for i in 0..50u64 {
        let mut r = rng(3000 + i);
        let m = r.gen_range(1..=3);
        let n = r.gen_range(1..=500);
        let horizon = r.gen_range(20.0..400.0);
        let p = random_params(&mut r, m, false);
        let model = HawkesModel::linear(p.mu, p.alpha, p.omega).unwrap();
        let seq = random_sequence(&mut r, m, n, horizon);
        let closed = log_likelihood(&model, &seq, CompensatorMethod::ClosedForm, None).unwrap();
        let quad = log_likelihood(&model, &seq, CompensatorMethod::Quadrature, None).unwrap();
        let naive = naive_linear_log_likelihood(&model, &seq);
        worst_quad = worst_quad.max(rel_err(closed, quad));
        worst_naive = worst_naive.max(rel_err(closed, naive));
    }
    outcome(
        worst_quad <= 1e-6 && worst_naive <= 1e-10,
        format!("max rel err quadrature {worst_quad:.2e}, naive sum {worst_naive:.2e} over 50 instances"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst_z: f64 = 0.0;
    for i in 0..20u64 {
        let mut r = rng(4000 + i);
        let m = r.gen_range(1..=3);
        let n = r.gen_range(10..=200);
        let horizon = r.gen_range(20.0..200.0);
        let p = random_params(&mut r, m, false);
        let model = HawkesModel::linear(p.mu, p.alpha, p.omega).unwrap();
        let seq = random_sequence(&mut r, m, n, horizon);
        for k in 0..m {
            let exact = compensator_closed_form(&model, &seq, k, horizon).unwrap().value;
            let reps = 1000;
            let (mut sum, mut var) = (0.0, 0.0);
            for s in 0..reps {
                let est = compensator_monte_carlo(&model, &seq, k, horizon, 200, 40_000 * i + s).unwrap();
                sum += est.value;
                var += est.std_error * est.std_error;
            }
            let mean = sum / reps as f64;
            let se = var.sqrt() / reps as f64;
            worst_z = worst_z.max((mean - exact).abs() / se);
        }
    }
    outcome(worst_z <= 4.0, format!("max |mean - closed form| = {worst_z:.2} combined SE over 20 models"))
}

fn flatten(p: &KernelParams) -> Vec<f64> {
    let mut v = p.mu.clone();
    v.extend(p.alpha.iter().flatten());
    v.push(p.omega);
    v
}

fn unflatten(v: &[f64], m: usize) -> KernelParams {
    KernelParams {
        mu: v[..m].to_vec(),
        alpha: v[m..m + m * m].chunks(m).map(<[f64]>::to_vec).collect(),
        omega: v[m + m * m],
    }
}

fn criterion_5() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..25u64 {
        let mut r = rng(5000 + i);
        let m = r.gen_range(1..=3);
        let nonlinear = i % 2 == 1;
        let (params, link) = if nonlinear {
            (random_params(&mut r, m, true), LinkSpec::floored())
        } else {
            (random_params(&mut r, m, false), LinkSpec::Identity)
        };
        let n = r.gen_range(5..=60);
        let seq = random_sequence(&mut r, m, n, 50.0);
        let design = McDesign::from_seed(6000 + i, m, 50.0, 200);
        let (_, grad) = stochastic_nll_with_grad(&params, link, &seq, &design, true);
        let grad = grad.expect("finite objective");
        let mut analytic = grad.mu.clone();
        analytic.extend(grad.alpha.iter().flatten());
        analytic.push(grad.omega);

        let theta = flatten(&params);
        for (c, &a) in analytic.iter().enumerate() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[c] += h;
            down[c] -= h;
            let f_up = stochastic_nll_with_grad(&unflatten(&up, m), link, &seq, &design, false).0;
            let f_down = stochastic_nll_with_grad(&unflatten(&down, m), link, &seq, &design, false).0;
            let fd = (f_up - f_down) / (2.0 * h);
            worst = worst.max((fd - a).abs() / a.abs().max(1.0));
        }
    }
    outcome(worst <= 1e-5, format!("max rel gradient error {worst:.2e} over 25 instances"))
}

fn all_types_pass(model: &HawkesModel, seq: &contagion::EventSequence) -> bool {
    (0..model.dim()).all(|k| {
        let taus = rescale_times(model, seq, k).unwrap().taus;
        ks_statistic_exponential(&taus).unwrap().p_value >= 0.01
    })
}

fn criterion_6() -> Outcome {
    let alpha = vec![vec![0.6, 0.1], vec![0.1, 0.6]];
    let truth = HawkesModel::linear(vec![0.1, 0.1], alpha, 0.1).unwrap();
    let misspecified = HawkesModel::linear(vec![0.1, 0.1], vec![vec![0.0; 2]; 2], 0.1).unwrap();
    let (mut calibrated, mut rejected) = (0, 0);
    for seed in 0..100u64 {
        let seq = simulate_ogata(&truth, 5000.0, 6000 + seed).unwrap();
        calibrated += all_types_pass(&truth, &seq) as usize;
        rejected += (!all_types_pass(&misspecified, &seq)) as usize;
    }
    outcome(
        calibrated >= 95 && rejected >= 80,
        format!("true model passes KS in {calibrated}/100 seeds, alpha-zeroed model fails in {rejected}/100"),
    )
}

fn criterion_7() -> Outcome {
    let alpha = bivariate().alpha().to_vec();
    let radius = spectral_radius(&alpha).unwrap();
    let oracle = char_poly_radius_2x2(&alpha);
    let identity = spectral_radius(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let zero = spectral_radius(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let pass = (radius - oracle).abs() <= 1e-6
        && (radius - 0.6536).abs() < 5e-5
        && (identity - 1.0).abs() <= 1e-12
        && zero.abs() <= 1e-12;
    outcome(
        pass,
        format!("radius {radius:.7} (characteristic root {oracle:.7}), identity {identity}, zero {zero}"),
    )
}

fn criterion_8() -> Outcome {
    let truth = HawkesModel::nonlinear(
        vec![0.1, 0.1],
        vec![vec![0.3, -0.4], vec![0.2, 0.3]],
        0.1,
        LinkSpec::floored(),
    )
    .unwrap();
    let mut negative = 0;
    let mut fitted = Vec::new();
    for seed in 0..10u64 {
        let seq = simulate_ogata(&truth, 50_000.0, 500 + seed).unwrap();
        let config = FitConfig {
            mode: contagion::Mode::Nonlinear,
            link: LinkSpec::floored(),
            omega_mode: OmegaMode::Fixed(0.1),
            ..adam_config(seed)
        };
        let a01 = fit_sgd(&seq, &config).unwrap().model.alpha()[0][1];
        negative += (a01 < 0.0) as usize;
        fitted.push(format!("{a01:.3}"));
    }
    outcome(negative >= 8, format!("fitted alpha_01 negative in {negative}/10 seeds ({})", fitted.join(" ")))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_contagion"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run_pipeline(out: &Path) -> Result<(), String> {
    let data = data_dir();
    let path = |p: &Path| p.to_str().unwrap().to_string();
    let returns: Vec<String> = ["consumer", "medical", "financial"]
        .iter()
        .map(|s| path(&data.join(format!("{s}_returns.csv"))))
        .collect();
    let events = path(&out.join("events.csv"));
    let mut extract = vec!["extract", "--seed", "7", "--out", out.to_str().unwrap(), "--returns"];
    extract.extend(returns.iter().map(String::as_str));
    cli(&extract)?;

    let fit_common = [
        "fit", "--events", &events, "--mode", "nonlinear", "--optimizer", "adam", "--schedule", "cosine",
        "--epochs", "200", "--mc-samples", "1000", "--seed", "7",
    ];
    let full = path(&out.join("fit_full.json"));
    cli(&[&fit_common[..], &["--train-omega", "--out", &full]].concat())?;
    let mut fits = vec![full.clone()];
    for period in ["3", "5"] {
        let f = path(&out.join(format!("fit_period{period}.json")));
        cli(&[&fit_common[..], &["--period", period, "--period-length", "150", "--omega", "0.702", "--out", &f]].concat())?;
        fits.push(f);
    }
    cli(&["gof", "--model", &full, "--events", &events, "--out", &path(&out.join("gof")), "--seed", "7"])?;
    let mut report = vec!["report".to_string(), "--seed".into(), "7".into(), "--out".into(), path(&out.join("report.json")), "--fits".into()];
    report.extend(fits);
    let report: Vec<&str> = report.iter().map(String::as_str).collect();
    cli(&report)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out);
        } else {
            out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
        }
    }
}

fn criterion_9() -> Outcome {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        if let Err(e) = run_pipeline(dir.path()) {
            return outcome(false, format!("pipeline failed: {e}"));
        }
    }
    let files: Vec<_> = runs
        .iter()
        .map(|d| {
            let mut v = Vec::new();
            collect_files(d.path(), d.path(), &mut v);
            v
        })
        .collect();
    let identical = files[0] == files[1];
    outcome(identical, format!("{} output files, byte-identical across runs: {identical}", files[0].len()))
}

fn criterion_10() -> Outcome {
    let data = data_dir();
    for (name, contents) in make_fixtures::fixture_files() {
        match std::fs::read_to_string(data.join(&name)) {
            Ok(on_disk) if on_disk == contents => {}
            _ => return outcome(false, format!("fixture {name} does not match its generator")),
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("fit.json");
    let report = dir.path().join("report.json");
    let run = cli(&[
        "fit", "--events", data.join("sectors_events.csv").to_str().unwrap(), "--mode", "nonlinear",
        "--train-omega", "--optimizer", "adam", "--schedule", "cosine", "--epochs", "1000",
        "--mc-samples", "5000", "--lr", "0.01", "--seed", "0", "--out", fit.to_str().unwrap(),
    ])
    .and_then(|_| cli(&["report", "--fits", fit.to_str().unwrap(), "--out", report.to_str().unwrap()]));
    if let Err(e) = run {
        return outcome(false, format!("cli failed: {e}"));
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let block = &json["reports"][0]["upward_trend_a"];
    let diag = block["diagonal_mean"].as_f64().unwrap();
    let off = block["off_diagonal_mean"].as_f64().unwrap();
    outcome(
        diag - off > 0.0,
        format!("block A diagonal mean {diag:.3} vs off-diagonal {off:.3} (contrast {:.3})", diag - off),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 10] = [
        criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8,
        criterion_9, criterion_10,
    ];
    let start = Instant::now();
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|c| {
                s.spawn(move || {
                    let t = Instant::now();
                    let o = std::panic::catch_unwind(c)
                        .unwrap_or_else(|_| outcome(false, "panicked"));
                    (o, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, (o, secs)) in results.iter().enumerate() {
        let status = if o.pass { "PASS" } else { "FAIL" };
        failed += (!o.pass) as usize;
        println!("criterion {}: {status} ({secs:.1}s) {}", i + 1, o.detail);
    }
    println!("acceptance: {}/10 passed in {:.1}s", 10 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
