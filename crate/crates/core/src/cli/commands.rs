use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{block_summary, BlockSummary};
use super::{
    Command, EventInput, ExtractArgs, FitArgs, GofArgs, IntensityArgs, LinkArg, ModeArg,
    OptimizerArg, Provenance, ReportArgs, ScheduleArg, SimulateArgs,
};
use crate::error::{Error, Result};
use crate::estimate::{
    fit_sgd, grid_search_omega, FitConfig, FitReport, GridSearchResult, LrSchedule, OmegaMode,
    Optimizer,
};
use crate::events::{
    compute_thresholds, events_to_csv, extract_events, load_events, load_returns,
    merge_sequences, segment_periods, MarkLayout, ThresholdPair,
};
use crate::gof::{
    compare_baseline, exp_qq_points, independence_scatter, ks_statistic_exponential, qq_csv,
    rescale_times, scatter_csv, BaselineComparison, KsResult,
};
use crate::intensity::intensity_path;
use crate::model::{EventSequence, HawkesModel, LinkSpec, Mode, ReturnSeries};
use crate::rng::derive_seed;
use crate::simulate::simulate_ogata;

pub(super) fn run(command: Command) -> Result<()> {
    match command {
        Command::Extract(a) => cmd_extract(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Gof(a) => cmd_gof(&a),
        Command::Intensity(a) => cmd_intensity(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn require_files(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::Io {
                path: p.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            });
        }
    }
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn prepare_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => prepare_dir(p),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Sidecar written next to every CSV output.
#[derive(Debug, Clone, Serialize)]
struct CsvMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_types: Option<usize>,
    provenance: Provenance,
}

/// The sidecar fields an event reader needs; anything else is ignored.
#[derive(Debug, Deserialize)]
struct SidecarShape {
    horizon: Option<f64>,
    num_types: Option<usize>,
}

fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_csv(path: &Path, text: &str, meta: CsvMeta) -> Result<()> {
    write_text(path, text)?;
    write_json(&meta_path(path), &meta)
}

fn read_model(path: &Path) -> Result<HawkesModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn read_events(input: &EventInput) -> Result<EventSequence> {
    let meta_file = meta_path(&input.events);
    let meta: Option<SidecarShape> = if meta_file.is_file() {
        let text = fs::read_to_string(&meta_file).map_err(io_err(&meta_file))?;
        Some(serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: meta_file.clone(),
            line: e.line() as u64,
            message: e.to_string(),
        })?)
    } else {
        None
    };
    let horizon = input.horizon.or(meta.as_ref().and_then(|m| m.horizon));
    let num_types = input.num_types.or(meta.as_ref().and_then(|m| m.num_types));
    load_events(&input.events, horizon, num_types)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Serialize)]
struct ThresholdEntry {
    input: String,
    up_mark: usize,
    down_mark: usize,
    thresholds: ThresholdPair,
    returns: usize,
    up_events: usize,
    down_events: usize,
}

#[derive(Serialize)]
struct ExtractOutput {
    q_low: f64,
    q_high: f64,
    horizon: f64,
    num_types: usize,
    inputs: Vec<ThresholdEntry>,
    provenance: Provenance,
}

fn check_aligned(series: &[(PathBuf, ReturnSeries)]) -> Result<()> {
    let (first_path, first) = &series[0];
    for (path, s) in &series[1..] {
        if s.dates() != first.dates() {
            let start = first.dates().first().max(s.dates().first());
            let end = first.dates().last().min(s.dates().last());
            let window = match (start, end) {
                (Some(a), Some(b)) if a <= b => format!("{a} to {b}"),
                _ => "empty".to_string(),
            };
            return Err(Error::InvalidArgument(format!(
                "dates of {} and {} differ; overlap window: {window}",
                first_path.display(),
                path.display()
            )));
        }
    }
    Ok(())
}

fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let inputs: Vec<&Path> = args.returns.iter().map(PathBuf::as_path).collect();
    require_files(&inputs)?;
    prepare_dir(&args.out)?;
    let provenance = Provenance::new("extract", args.common.seed, args);

    let series = args
        .returns
        .iter()
        .map(|p| Ok((p.clone(), load_returns(p)?)))
        .collect::<Result<Vec<_>>>()?;
    check_aligned(&series)?;

    let n = series.len();
    let layout = MarkLayout::up_down_blocks(n);
    let mut entries = Vec::with_capacity(n);
    let mut seqs = Vec::with_capacity(n);
    for (s, (path, returns)) in series.iter().enumerate() {
        let thresholds = compute_thresholds(returns, args.q_low, args.q_high)?;
        let seq = extract_events(returns, thresholds, 0, 1)?;
        let counts = seq.counts();
        entries.push(ThresholdEntry {
            input: file_name(path),
            up_mark: layout.maps[s][0],
            down_mark: layout.maps[s][1],
            thresholds,
            returns: returns.len(),
            up_events: counts[0],
            down_events: counts[1],
        });
        seqs.push(seq);
    }
    let merged = merge_sequences(&seqs, &layout)?;

    write_csv(
        &args.out.join("events.csv"),
        &events_to_csv(&merged),
        CsvMeta {
            horizon: Some(merged.horizon()),
            num_types: Some(merged.num_types()),
            provenance: provenance.clone(),
        },
    )?;
    write_json(
        &args.out.join("thresholds.json"),
        &ExtractOutput {
            q_low: args.q_low,
            q_high: args.q_high,
            horizon: merged.horizon(),
            num_types: merged.num_types(),
            inputs: entries,
            provenance,
        },
    )
}

fn fit_config(args: &FitArgs) -> FitConfig {
    let mode = match args.mode {
        ModeArg::Linear => Mode::Linear,
        ModeArg::Nonlinear => Mode::Nonlinear,
    };
    let link_arg = args.link.unwrap_or(match mode {
        Mode::Linear => LinkArg::Identity,
        Mode::Nonlinear => LinkArg::Floored,
    });
    let link = match link_arg {
        LinkArg::Identity => LinkSpec::Identity,
        LinkArg::Floored => LinkSpec::FlooredIdentity { floor: args.floor },
        LinkArg::Softplus => LinkSpec::Softplus,
        LinkArg::Relu => LinkSpec::Relu,
    };
    FitConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        mc_samples: args.mc_samples,
        seed: derive_seed(args.common.seed, "fit"),
        omega_mode: if args.train_omega {
            OmegaMode::Trained
        } else {
            OmegaMode::Fixed(args.omega)
        },
        mode,
        link,
        optimizer: match args.optimizer {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Adam => Optimizer::adam(),
        },
        schedule: match args.schedule {
            ScheduleArg::Constant => LrSchedule::Constant,
            ScheduleArg::Cosine => LrSchedule::Cosine {
                final_factor: args.final_lr_factor,
            },
        },
        ..FitConfig::default()
    }
}

#[derive(Serialize)]
struct PeriodInfo {
    index: usize,
    start: f64,
    partial: bool,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    #[serde(flatten)]
    report: &'a FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_search: Option<GridSearchResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    period: Option<PeriodInfo>,
    provenance: Provenance,
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    require_files(&[&args.input.events])?;
    prepare_parent(&args.out)?;
    let provenance = Provenance::new("fit", args.common.seed, args);
    let mut config = fit_config(args);
    config.validate()?;

    let mut seq = read_events(&args.input)?;
    let mut period = None;
    if let (Some(index), Some(length)) = (args.period, args.period_length) {
        let periods = segment_periods(&seq, length)?;
        let count = periods.len();
        let p = periods.into_iter().nth(index).ok_or_else(|| {
            Error::InvalidArgument(format!("period {index} out of range; {count} periods"))
        })?;
        period = Some(PeriodInfo {
            index: p.index,
            start: p.start,
            partial: p.partial,
        });
        seq = p.sequence;
    }

    let grid_search = match &args.omega_grid {
        Some(grid) => {
            let result = grid_search_omega(&seq, grid, &config, args.validation_fraction)?;
            config.omega_mode = OmegaMode::Fixed(result.best_omega);
            Some(result)
        }
        None => None,
    };
    let report = fit_sgd(&seq, &config)?;
    write_json(
        &args.out,
        &FitOutput {
            report: &report,
            grid_search,
            period,
            provenance,
        },
    )
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    require_files(&[&args.model])?;
    prepare_parent(&args.out)?;
    let provenance = Provenance::new("simulate", args.common.seed, args);
    let model = read_model(&args.model)?;
    let seq = simulate_ogata(&model, args.horizon, derive_seed(args.common.seed, "simulate"))?;
    write_csv(
        &args.out,
        &events_to_csv(&seq),
        CsvMeta {
            horizon: Some(seq.horizon()),
            num_types: Some(seq.num_types()),
            provenance,
        },
    )
}

#[derive(Serialize)]
struct GofType {
    mark: usize,
    num_events: usize,
    ks: Option<KsResult>,
    mean_tau: Option<f64>,
    lag1_rank_correlation: Option<f64>,
}

#[derive(Serialize)]
struct GofOutput {
    types: Vec<GofType>,
    provenance: Provenance,
}

#[derive(Serialize)]
struct BaselineOutput {
    #[serde(flatten)]
    comparison: BaselineComparison,
    provenance: Provenance,
}

fn cmd_gof(args: &GofArgs) -> Result<()> {
    require_files(&[&args.model, &args.input.events])?;
    prepare_dir(&args.out)?;
    let provenance = Provenance::new("gof", args.common.seed, args);
    let model = read_model(&args.model)?;
    let seq = read_events(&args.input)?;
    let meta = || CsvMeta {
        horizon: None,
        num_types: None,
        provenance: provenance.clone(),
    };

    let mut types = Vec::with_capacity(model.dim());
    for k in 0..model.dim() {
        let num_events = seq.times_of(k).len();
        let taus = match rescale_times(&model, &seq, k) {
            Ok(r) => r.taus,
            Err(Error::InsufficientData(_)) => {
                types.push(GofType {
                    mark: k,
                    num_events,
                    ks: None,
                    mean_tau: None,
                    lag1_rank_correlation: None,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let qq = exp_qq_points(&taus)?;
        let scatter = independence_scatter(&taus)?;
        write_csv(&args.out.join(format!("qq_type{k}.csv")), &qq_csv(&qq), meta())?;
        write_csv(
            &args.out.join(format!("scatter_type{k}.csv")),
            &scatter_csv(&scatter.pairs),
            meta(),
        )?;
        types.push(GofType {
            mark: k,
            num_events,
            ks: ks_statistic_exponential(&taus).ok(),
            mean_tau: Some(taus.iter().sum::<f64>() / taus.len() as f64),
            lag1_rank_correlation: scatter.rank_correlation,
        });
    }
    write_json(
        &args.out.join("ks.json"),
        &GofOutput {
            types,
            provenance: provenance.clone(),
        },
    )?;
    write_json(
        &args.out.join("baseline.json"),
        &BaselineOutput {
            comparison: compare_baseline(&seq, &model)?,
            provenance,
        },
    )
}

fn parse_grid(spec: &str, horizon: f64) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("grid must be `start:end:step`, got `{spec}`"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, end, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0 && start <= end && start.is_finite() && end.is_finite()) {
        return Err(bad());
    }
    let end = end.min(horizon);
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn cmd_intensity(args: &IntensityArgs) -> Result<()> {
    require_files(&[&args.model, &args.input.events])?;
    prepare_parent(&args.out)?;
    let provenance = Provenance::new("intensity", args.common.seed, args);
    let model = read_model(&args.model)?;
    let seq = read_events(&args.input)?;
    let grid = match &args.grid {
        Some(spec) => parse_grid(spec, seq.horizon())?,
        None => parse_grid(&format!("0:{}:1", seq.horizon()), seq.horizon())?,
    };
    let path = intensity_path(&model, &seq, &grid)?;
    write_csv(
        &args.out,
        &path.to_csv(),
        CsvMeta {
            horizon: Some(seq.horizon()),
            num_types: Some(seq.num_types()),
            provenance,
        },
    )
}

#[derive(Serialize)]
struct ReportEntry {
    input: String,
    #[serde(flatten)]
    summary: BlockSummary,
}

#[derive(Serialize)]
struct Comparison {
    contrast: Vec<f64>,
    diagonal_mean: Vec<f64>,
    off_diagonal_mean: Vec<f64>,
    omega: Vec<f64>,
}

#[derive(Serialize)]
struct ReportOutput {
    reports: Vec<ReportEntry>,
    comparison: Comparison,
    provenance: Provenance,
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let inputs: Vec<&Path> = args.fits.iter().map(PathBuf::as_path).collect();
    require_files(&inputs)?;
    prepare_parent(&args.out)?;
    let provenance = Provenance::new("report", args.common.seed, args);
    let reports = args
        .fits
        .iter()
        .map(|p| {
            Ok(ReportEntry {
                input: file_name(p),
                summary: block_summary(&read_model(p)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&BlockSummary) -> f64| reports.iter().map(|r| f(&r.summary)).collect();
    let comparison = Comparison {
        contrast: pick(|s| s.contrast),
        diagonal_mean: pick(|s| s.diagonal_mean),
        off_diagonal_mean: pick(|s| s.off_diagonal_mean),
        omega: pick(|s| s.omega),
    };
    write_json(
        &args.out,
        &ReportOutput {
            reports,
            comparison,
            provenance,
        },
    )
}
