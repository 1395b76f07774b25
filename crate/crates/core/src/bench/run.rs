use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{FamilyId, OutputFormat, RunConfig, SweepSpec};
use super::plot::{emit_plot, fmt_annotation, Curves, Heatmap, PlotData, PlotFormat};
use super::synth::gen_synthetic_spec;
use super::BenchError;
use crate::classic::{default_grid, expand_grid, fit_classic, ClassicLearner, ModelSpec, ParamSet, TrainedModel};
use crate::dataio::{load_csv, DataError, Frame};
use crate::evalbt::{backtest, classification_report, confusion_matrix, cumulative, BacktestReport, ClassificationReport};
use crate::neural::{
    decode_label, encode_label, predict_convnet, predict_lstm, save_checkpoint, train_convnet, train_lstm,
    windows_to_sequences, windows_to_tensor, ConvTimeNetLite, LstmClassifier, NetKind, NeuralLearner,
};
use crate::pipeline::{grid_search, time_series_split, Dataset, GridResult};
use crate::{seed, Matrix};

pub const MANIFEST_VERSION: u32 = 1;

/// Loads the configured input, or generates the configured synthetic frame.
pub fn load_frame(cfg: &RunConfig) -> crate::Result<Frame> {
    match (&cfg.input, &cfg.synth) {
        (Some(path), _) => Ok(load_csv(path, &cfg.schema)?),
        (None, Some(spec)) => gen_synthetic_spec(spec),
        (None, None) => Err(BenchError::Config("no input: set `input` or a `synth.*` section".into()).into()),
    }
}

/// The `[data_start, data_start + data_len)` rows of `frame`.
pub fn scenario_slice(cfg: &RunConfig, frame: &Frame) -> crate::Result<Frame> {
    let len = cfg.data_len.unwrap_or_else(|| frame.len().saturating_sub(cfg.data_start));
    Ok(frame.slice(cfg.data_start, len)?)
}

pub fn build_dataset(cfg: &RunConfig, frame: &Frame) -> crate::Result<Dataset> {
    Ok(Dataset::from_frame(frame, &cfg.features, &cfg.labels, cfg.mode, cfg.n_splits)?)
}

fn family_grid(cfg: &RunConfig, family: FamilyId) -> Vec<ParamSet> {
    match (cfg.grids.get(family.name()), family) {
        (Some(decl), _) => expand_grid(decl),
        (None, FamilyId::Classic(f)) => expand_grid(&default_grid(f)),
        (None, FamilyId::Net(_)) => vec![ParamSet::new()],
    }
}

pub fn family_seed(cfg: &RunConfig, family: FamilyId) -> u64 {
    seed::derive(cfg.seed, &[seed::hash_str(family.name())])
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Classic(TrainedModel),
    Conv(ConvTimeNetLite),
    Lstm(LstmClassifier),
}

/// Fits `family` with `params` on `(x, y)` and predicts `x_pred`.
pub fn fit_and_predict(
    cfg: &RunConfig,
    family: FamilyId,
    params: &ParamSet,
    x: &Matrix,
    y: &[i8],
    x_pred: &Matrix,
    seed_value: u64,
) -> crate::Result<(FittedModel, Vec<i8>)> {
    match family {
        FamilyId::Classic(f) => {
            let model = fit_classic(&ModelSpec { family: f, params: params.clone() }, x, y, seed_value)?;
            let pred = model.predict(x_pred)?;
            Ok((FittedModel::Classic(model), pred))
        }
        FamilyId::Net(kind) => {
            let ncfg = cfg.net.with_params(params)?;
            let yi: Vec<usize> = y.iter().map(|&l| encode_label(l)).collect::<Result<_, _>>()?;
            let (model, pred) = match kind {
                NetKind::Convtimenet => {
                    let mut net = ConvTimeNetLite::new(x.ncols(), 3, ncfg.dropout, seed_value)?;
                    train_convnet(&mut net, &windows_to_tensor(x, ncfg.window), &yi, &ncfg, seed_value)?;
                    let p = predict_convnet(&net, &windows_to_tensor(x_pred, ncfg.window))?;
                    (FittedModel::Conv(net), p)
                }
                NetKind::Lstm => {
                    let mut net = LstmClassifier::new(x.ncols(), ncfg.hidden, 3, seed_value);
                    let seqs = windows_to_sequences(x, ncfg.window);
                    train_lstm(&mut net, &seqs, &yi, ncfg.epochs, ncfg.batch_size, ncfg.lr, seed_value)?;
                    let p = predict_lstm(&net, &windows_to_sequences(x_pred, ncfg.window))?;
                    (FittedModel::Lstm(net), p)
                }
            };
            Ok((model, pred.into_iter().map(decode_label).collect()))
        }
    }
}

/// Returns of the best candidate on each fold's test block, refitted on that
/// fold's training block, chained in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub rows: usize,
    pub accuracy: f64,
    pub final_strategy: f64,
    pub final_market: f64,
}

#[derive(Debug, Clone)]
pub struct FamilyRun {
    pub family: FamilyId,
    pub grid: GridResult<ParamSet>,
    pub model: FittedModel,
    pub converged: bool,
    pub signals: Vec<i8>,
    pub train_accuracy: f64,
    pub classification: Option<ClassificationReport>,
    pub backtest: BacktestReport,
    pub held_out: Option<HeldOut>,
}

fn accuracy(y: &[i8], p: &[i8]) -> f64 {
    y.iter().zip(p).filter(|(a, b)| a == b).count() as f64 / y.len().max(1) as f64
}

/// Grid search, refit of the winner on every row, in-sample signals and their
/// backtest. Leak-free runs also score the winner on the held-out folds.
pub fn run_family(cfg: &RunConfig, data: &Dataset, family: FamilyId) -> crate::Result<FamilyRun> {
    let plan = time_series_split(data.len(), cfg.n_splits)?;
    let grid = family_grid(cfg, family);
    let fseed = family_seed(cfg, family);
    let result = match family {
        FamilyId::Classic(f) => grid_search(&ClassicLearner { family: f }, &grid, data, &plan, cfg.mode, fseed)?,
        FamilyId::Net(kind) => grid_search(&NeuralLearner { kind, base: cfg.net }, &grid, data, &plan, cfg.mode, fseed)?,
    };
    let best = result.best.params.clone();
    let (_, x) = data.scaled_all();
    let (model, signals) = fit_and_predict(cfg, family, &best, &x, &data.labels, &x, fseed)?;
    let converged = match &model {
        FittedModel::Classic(m) => m.converged,
        _ => true,
    };
    let bt = backtest(&data.next_returns, &signals, seed::derive(fseed, &[1]), cfg.mode.tag())?;
    let classification = confusion_matrix(&data.labels, &signals, &[-1i64, 0, 1])
        .and_then(|cm| classification_report(&cm))
        .ok();

    let held_out = if cfg.mode == crate::pipeline::Mode::LeakFree {
        let mut sig = Vec::new();
        let mut rets = Vec::new();
        let mut truth = Vec::new();
        for (k, fold) in plan.folds.iter().enumerate() {
            let fd = data.fold_data(&fold.train, &fold.test, cfg.mode)?;
            let (_, pred) =
                fit_and_predict(cfg, family, &best, &fd.x_train, &fd.y_train, &fd.x_test, seed::derive(fseed, &[2, k as u64]))?;
            sig.extend(pred);
            truth.extend(fd.y_test);
            rets.extend(fold.test.iter().map(|&i| data.next_returns[i]));
        }
        let strat: Vec<f64> = rets.iter().zip(&sig).map(|(r, &s)| r * s as f64).collect();
        Some(HeldOut {
            rows: sig.len(),
            accuracy: accuracy(&truth, &sig),
            final_strategy: cumulative(&strat).last().copied().unwrap_or(1.0),
            final_market: cumulative(&rets).last().copied().unwrap_or(1.0),
        })
    } else {
        None
    };

    Ok(FamilyRun {
        family,
        train_accuracy: accuracy(&data.labels, &signals),
        grid: result,
        model,
        converged,
        signals,
        classification,
        backtest: bt,
        held_out,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn curves_of(report: &BacktestReport, family: &str) -> Curves {
    Curves {
        title: format!("{family}: best model"),
        x_label: "t".into(),
        y_label: "cumulative return".into(),
        series: vec![
            ("market".into(), report.market_curve.clone()),
            ("model".into(), report.strategy_curve.clone()),
            ("random".into(), report.random_curve.clone()),
        ],
    }
}

fn report_json(cfg: &RunConfig, run: &FamilyRun) -> serde_json::Value {
    let bt = &run.backtest;
    json!({
        "family": run.family.name(),
        "mode": cfg.mode.tag(),
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "grid": run.grid,
        "best_params": run.grid.best.params,
        "converged": run.converged,
        "train_accuracy": run.train_accuracy,
        "classification": run.classification,
        "backtest": {
            "rows": bt.market_returns.len(),
            "final_market": bt.final_market,
            "final_strategy": bt.final_strategy,
            "final_random": bt.final_random,
            "sharpe_market": bt.sharpe_market,
            "sharpe_strategy": bt.sharpe_strategy,
            "sharpe_random": bt.sharpe_random,
            "random_seed": bt.seed,
        },
        "held_out": run.held_out,
    })
}

/// Writes the report, curves and model of one family; returns the file names.
pub fn write_family(cfg: &RunConfig, run: &FamilyRun, dir: &Path) -> crate::Result<Vec<String>> {
    let name = run.family.name();
    let mut files = Vec::new();
    if cfg.wants(OutputFormat::Json) {
        let p = dir.join(format!("report_{name}.json"));
        write_json(&p, &report_json(cfg, run))?;
        files.push(file_name(&p));
    }
    let curves = PlotData::Curves(curves_of(&run.backtest, name));
    for (fmt, want, ext) in [(PlotFormat::Csv, OutputFormat::Csv, "csv"), (PlotFormat::Svg, OutputFormat::Svg, "svg")] {
        if cfg.wants(want) {
            let p = dir.join(format!("curves_{name}.{ext}"));
            emit_plot(&curves, fmt, &p)?;
            files.push(file_name(&p));
        }
    }
    files.extend(write_model(run, dir)?);
    Ok(files)
}

/// `model_<family>.json`, plus tensor blobs for networks.
pub fn write_model(run: &FamilyRun, dir: &Path) -> crate::Result<Vec<String>> {
    let mut files = Vec::new();
    let stem = format!("model_{}", run.family.name());
    match &run.model {
        FittedModel::Classic(m) => {
            let p = dir.join(format!("{stem}.json"));
            std::fs::write(&p, m.to_json()?)?;
            files.push(file_name(&p));
        }
        FittedModel::Conv(net) => files.extend(checkpoint_files(net, dir, &stem)?),
        FittedModel::Lstm(net) => files.extend(checkpoint_files(net, dir, &stem)?),
    }
    Ok(files)
}

fn checkpoint_files<M: crate::neural::Parameters>(model: &M, dir: &Path, stem: &str) -> crate::Result<Vec<String>> {
    let path = save_checkpoint(model, dir, stem)?;
    let manifest: crate::neural::CheckpointManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let mut files = vec![file_name(&path)];
    files.extend(manifest.tensors.into_iter().map(|t| t.file));
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStatus {
    pub family: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub mode: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub data: serde_json::Value,
    pub families: Vec<FamilyStatus>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, command: &str, data: serde_json::Value) -> Manifest {
        let mut config = serde_json::to_value(cfg).expect("config serializes");
        if let Some(o) = config.as_object_mut() {
            o.remove("out_dir");
        }
        Manifest {
            format_version: MANIFEST_VERSION,
            tool: "tsclass".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: cfg.seed,
            mode: cfg.mode.tag().into(),
            config_hash: cfg.config_hash(),
            config,
            data,
            families: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Adds `manifest.json` itself to the artifact list and writes it.
    pub fn write(&mut self, dir: &Path) -> crate::Result<PathBuf> {
        self.artifacts.push("manifest.json".into());
        self.artifacts.sort();
        self.artifacts.dedup();
        let p = dir.join("manifest.json");
        write_json(&p, self)?;
        Ok(p)
    }
}

fn data_summary(cfg: &RunConfig, frame: &Frame, data: &Dataset) -> serde_json::Value {
    json!({
        "source": cfg.input.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "synthetic".into()),
        "start": cfg.data_start,
        "rows": frame.len(),
        "samples": data.len(),
        "features": data.feature_names,
        "thresholds": data.thresholds,
    })
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub manifest: Manifest,
    pub runs: Vec<(FamilyId, crate::Result<FamilyRun>)>,
}

/// Runs every configured family on the configured slice of `frame` and
/// writes reports, curves, models and `manifest.json` into `cfg.out_dir`.
/// A failing family is recorded in the manifest and does not stop the rest.
pub fn run_scenario(cfg: &RunConfig, frame: &Frame) -> crate::Result<ScenarioOutcome> {
    cfg.validate()?;
    let slice = scenario_slice(cfg, frame)?;
    let data = build_dataset(cfg, &slice)?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest::new(cfg, "backtest", data_summary(cfg, &slice, &data));
    let mut runs = Vec::new();
    for &family in &cfg.families {
        let outcome = run_family(cfg, &data, family);
        let status = match &outcome {
            Ok(run) => {
                let files = write_family(cfg, run, dir)?;
                manifest.artifacts.extend(files.iter().cloned());
                FamilyStatus { family: family.name().into(), status: "ok".into(), error_code: None, error: None, artifacts: files }
            }
            Err(e) => {
                log::warn!("{family}: {e}");
                FamilyStatus {
                    family: family.name().into(),
                    status: "failed".into(),
                    error_code: Some(e.code().into()),
                    error: Some(e.to_string()),
                    artifacts: Vec::new(),
                }
            }
        };
        manifest.families.push(status);
        runs.push((family, outcome));
    }
    manifest.write(dir)?;
    Ok(ScenarioOutcome { manifest, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub size: usize,
    pub family: String,
    pub code: String,
    /// Process exit code the error maps to.
    pub exit: u8,
    pub message: String,
}

/// Final in-sample cumulative return per (size, family); `None` for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sizes: Vec<usize>,
    pub families: Vec<String>,
    pub returns: Vec<Vec<Option<f64>>>,
    /// Leak-free runs only: chained held-out fold returns per cell.
    pub held_out: Option<Vec<Vec<Option<f64>>>>,
    pub failures: Vec<CellFailure>,
}

impl SweepResult {
    pub fn heatmap(&self) -> Heatmap {
        Heatmap {
            title: "Final cumulative return".into(),
            row_label: "size".into(),
            col_label: "family".into(),
            rows: self.sizes.iter().map(|s| s.to_string()).collect(),
            cols: self.families.clone(),
            values: self.returns.clone(),
        }
    }

    /// Median over the non-failed families at each size.
    pub fn median_by_size(&self) -> Vec<Option<f64>> {
        self.returns
            .iter()
            .map(|row| {
                let mut v: Vec<f64> = row.iter().flatten().copied().collect();
                if v.is_empty() {
                    return None;
                }
                v.sort_by(f64::total_cmp);
                let m = v.len() / 2;
                Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
            })
            .collect()
    }
}

/// For every size, the rows `[start_offset, start_offset + size)` go through
/// [`run_family`] for each family. Cells run in parallel; results are placed
/// by index so the output does not depend on scheduling.
pub fn size_sweep(spec: &SweepSpec, cfg: &RunConfig, frame: &Frame) -> crate::Result<SweepResult> {
    cfg.validate()?;
    let sizes = spec.sizes();
    let families: Vec<FamilyId> = if spec.families.is_empty() { cfg.families.clone() } else { spec.families.clone() };
    let need = spec.start_offset + sizes.iter().copied().max().unwrap_or(0);
    if frame.len() < need {
        return Err(DataError::TooShort { need, got: frame.len() }.into());
    }
    let datasets: Vec<crate::Result<Dataset>> = sizes
        .iter()
        .map(|&s| {
            let slice = frame.slice(spec.start_offset, s)?;
            build_dataset(cfg, &slice)
        })
        .collect();
    let cells: Vec<(usize, usize)> = (0..sizes.len()).flat_map(|i| (0..families.len()).map(move |j| (i, j))).collect();
    let outcomes: Vec<Result<(f64, Option<f64>), (String, u8, String)>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let data = datasets[i].as_ref().map_err(|e| (e.code().to_string(), e.exit_kind() as u8, e.to_string()))?;
            run_family(cfg, data, families[j])
                .map(|r| (r.backtest.final_strategy, r.held_out.map(|h| h.final_strategy)))
                .map_err(|e| (e.code().to_string(), e.exit_kind() as u8, e.to_string()))
        })
        .collect();
    let mut returns = vec![vec![None; families.len()]; sizes.len()];
    let mut held = vec![vec![None; families.len()]; sizes.len()];
    let mut failures = Vec::new();
    for (&(i, j), out) in cells.iter().zip(outcomes) {
        match out {
            Ok((r, h)) => {
                returns[i][j] = Some(r);
                held[i][j] = h;
            }
            Err((code, exit, message)) => failures.push(CellFailure {
                size: sizes[i],
                family: families[j].name().into(),
                code,
                exit,
                message,
            }),
        }
    }
    Ok(SweepResult {
        sizes,
        families: families.iter().map(|f| f.name().to_string()).collect(),
        returns,
        held_out: (cfg.mode == crate::pipeline::Mode::LeakFree).then_some(held),
        failures,
    })
}

/// `heatmap.csv`, `heatmap.json`, optional `heatmap.svg` and the manifest.
pub fn write_sweep(cfg: &RunConfig, result: &SweepResult) -> crate::Result<Manifest> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest::new(
        cfg,
        "sweep",
        json!({
            "source": cfg.input.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "synthetic".into()),
            "start_offset": cfg.sweep.start_offset,
            "sizes": result.sizes,
        }),
    );
    let heat = PlotData::Heatmap(result.heatmap());
    if cfg.wants(OutputFormat::Csv) {
        emit_plot(&heat, PlotFormat::Csv, &dir.join("heatmap.csv"))?;
        manifest.artifacts.push("heatmap.csv".into());
    }
    if cfg.wants(OutputFormat::Json) {
        let annotations: Vec<Vec<String>> = result
            .returns
            .iter()
            .map(|row| row.iter().map(|v| v.map(fmt_annotation).unwrap_or_default()).collect())
            .collect();
        write_json(
            &dir.join("heatmap.json"),
            &json!({
                "sizes": result.sizes,
                "families": result.families,
                "values": result.returns,
                "annotations": annotations,
                "median_by_size": result.median_by_size(),
                "held_out": result.held_out,
                "failures": result.failures,
            }),
        )?;
        manifest.artifacts.push("heatmap.json".into());
    }
    if cfg.wants(OutputFormat::Svg) {
        emit_plot(&heat, PlotFormat::Svg, &dir.join("heatmap.svg"))?;
        manifest.artifacts.push("heatmap.svg".into());
    }
    manifest.families = result
        .families
        .iter()
        .map(|f| {
            let failed: Vec<&CellFailure> = result.failures.iter().filter(|c| &c.family == f).collect();
            FamilyStatus {
                family: f.clone(),
                status: if failed.is_empty() { "ok".into() } else { "partial".into() },
                error_code: failed.first().map(|c| c.code.clone()),
                error: failed.first().map(|c| format!("size {}: {}", c.size, c.message)),
                artifacts: Vec::new(),
            }
        })
        .collect();
    manifest.write(dir)?;
    Ok(manifest)
}
