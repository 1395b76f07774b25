use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tsclass::bench::{
    emit_plot, gen_synthetic_spec, load_frame, parse_curves_csv, parse_heatmap_csv, run_family, run_scenario,
    scenario_slice, build_dataset, size_sweep, write_json, write_model, write_sweep, BenchError, Manifest,
    OutputFormat, PlotData, PlotFormat, RunConfig, SynthSpec,
};
use tsclass::dataio::{label_by_quantiles, shift_series, write_csv, Frame};
use tsclass::neural::{gradcheck_convnet, gradcheck_lstm, GradCheckReport};
use tsclass::Error;

#[derive(Parser)]
#[command(name = "tsclass", version, about = "Multivariate time-series classification and signal backtesting")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat key=value lines, `[section]` headers allowed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// paper | leakfree
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Input CSV (overrides `input` from the config).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Extra `key=value` setting; repeatable, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV through the column schema and write the normalised frame.
    Ingest,
    /// Quantile-label next-period returns.
    Label,
    /// Grid-search every family and save the refitted best models.
    Train {
        #[arg(long)]
        families: Option<String>,
    },
    /// Full scenario: grid search, refit, signals, backtest, reports.
    Backtest {
        #[arg(long)]
        families: Option<String>,
    },
    /// Dataset-size sweep heatmap.
    Sweep {
        #[arg(long)]
        families: Option<String>,
    },
    /// Finite-difference gradient checks of the conv net and the LSTM.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Generate a synthetic frame.
    Synth {
        /// planted_signal | regime_shift | random_walk
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Summarise a finished run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

struct Failure {
    code: String,
    exit: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: e.code().into(), exit: e.exit_kind() as u8, message: e.to_string() }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            report_failure(&Failure { code: "USAGE".into(), exit: 2, message: first.trim().to_string() });
            return ExitCode::from(2);
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report_failure(&f);
            ExitCode::from(f.exit)
        }
    }
}

fn report_failure(f: &Failure) {
    let message = serde_json::to_string(&f.message).unwrap_or_else(|_| "\"\"".into());
    eprintln!("error code={} exit={} message={}", f.code, f.exit, message);
}

fn build_config(common: &Common, families: Option<&str>) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &common.input {
        cfg.input = Some(p.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = &common.mode {
        cfg.set("mode", m)?;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(f) = &common.format {
        cfg.set("format", f)?;
    }
    if let Some(f) = families {
        cfg.set("families", f)?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult {
    let common = &cli.common;
    match &cli.command {
        Command::Ingest => ingest(&build_config(common, None)?),
        Command::Label => label(&build_config(common, None)?),
        Command::Train { families } => train(&build_config(common, families.as_deref())?),
        Command::Backtest { families } => backtest(&build_config(common, families.as_deref())?),
        Command::Sweep { families } => sweep(&build_config(common, families.as_deref())?),
        Command::Gradcheck { seeds, tolerance } => gradcheck(&build_config(common, None)?, *seeds, *tolerance),
        Command::Synth { kind, n, d } => {
            let mut cfg = build_config(common, None)?;
            let spec = cfg.synth.get_or_insert_with(|| SynthSpec { seed: cfg.seed, ..SynthSpec::default() });
            if let Some(k) = kind {
                spec.kind = k.parse()?;
            }
            if let Some(n) = n {
                spec.n = *n;
            }
            if let Some(d) = d {
                spec.d = *d;
            }
            synth(&cfg)
        }
        Command::Report { run } => report(&build_config(common, None)?, run, common.out.is_some()),
    }
}

fn out_dir(cfg: &RunConfig) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(Error::from)?;
    Ok(&cfg.out_dir)
}

fn frame_summary(frame: &Frame) -> serde_json::Value {
    json!({
        "rows": frame.len(),
        "columns": frame.column_names(),
        "labeled": frame.labels().is_some(),
        "first_timestamp": frame.timestamps().first(),
        "last_timestamp": frame.timestamps().last(),
    })
}

fn write_frame_csv(frame: &Frame, path: &Path) -> CliResult {
    let file = std::fs::File::create(path).map_err(Error::from)?;
    write_csv(frame, std::io::BufWriter::new(file)).map_err(Error::from)?;
    Ok(())
}

fn ingest(cfg: &RunConfig) -> CliResult {
    let frame = load_frame(cfg)?;
    let dir = out_dir(cfg)?;
    let mut manifest = Manifest::new(cfg, "ingest", frame_summary(&frame));
    if cfg.wants(OutputFormat::Csv) {
        write_frame_csv(&frame, &dir.join("frame.csv"))?;
        manifest.artifacts.push("frame.csv".into());
    }
    manifest.write(dir)?;
    println!("ingested {} rows, columns {:?}", frame.len(), frame.column_names());
    Ok(())
}

fn label(cfg: &RunConfig) -> CliResult {
    let frame = load_frame(cfg)?;
    let next = shift_series(frame.returns());
    let (labels, thresholds) =
        label_by_quantiles(&next, cfg.labels.q_low, cfg.labels.q_high).map_err(Error::from)?;
    let counts: Vec<usize> = [-1i8, 0, 1].iter().map(|c| labels.iter().filter(|l| *l == c).count()).collect();
    let dir = out_dir(cfg)?;
    let summary = json!({
        "rows": labels.len(),
        "q_low": cfg.labels.q_low,
        "q_high": cfg.labels.q_high,
        "thresholds": thresholds,
        "counts": {"-1": counts[0], "0": counts[1], "1": counts[2]},
    });
    let mut manifest = Manifest::new(cfg, "label", summary.clone());
    if cfg.wants(OutputFormat::Csv) {
        let mut w = csv::Writer::from_path(dir.join("labels.csv")).map_err(|e| io_failure(e.to_string()))?;
        w.write_record(["t", "timestamp", "next_return", "label"]).map_err(|e| io_failure(e.to_string()))?;
        for (t, (r, l)) in next.iter().zip(&labels).enumerate() {
            w.write_record([t.to_string(), frame.timestamps()[t].to_string(), format!("{r:?}"), l.to_string()])
                .map_err(|e| io_failure(e.to_string()))?;
        }
        w.flush().map_err(|e| io_failure(e.to_string()))?;
        manifest.artifacts.push("labels.csv".into());
    }
    if cfg.wants(OutputFormat::Json) {
        write_json(&dir.join("labels.json"), &summary)?;
        manifest.artifacts.push("labels.json".into());
    }
    manifest.write(dir)?;
    println!(
        "thresholds ({:.6}, {:.6}); counts -1:{} 0:{} 1:{}",
        thresholds.lower, thresholds.upper, counts[0], counts[1], counts[2]
    );
    Ok(())
}

fn io_failure(message: String) -> Failure {
    Failure { code: "IO".into(), exit: 3, message }
}

fn train(cfg: &RunConfig) -> CliResult {
    let frame = load_frame(cfg)?;
    let slice = scenario_slice(cfg, &frame)?;
    let data = build_dataset(cfg, &slice)?;
    let dir = out_dir(cfg)?;
    let mut manifest = Manifest::new(cfg, "train", json!({"rows": slice.len(), "samples": data.len()}));
    let mut errors = Vec::new();
    for &family in &cfg.families {
        let status = match run_family(cfg, &data, family) {
            Ok(run) => {
                let grid_file = format!("grid_{}.json", family.name());
                write_json(&dir.join(&grid_file), &run.grid)?;
                let mut files = vec![grid_file];
                files.extend(write_model(&run, dir)?);
                manifest.artifacts.extend(files.iter().cloned());
                println!("{family}: best cv accuracy {:.4} with {}", run.grid.best.mean_accuracy, json!(run.grid.best.params));
                tsclass::bench::FamilyStatus { family: family.name().into(), status: "ok".into(), error_code: None, error: None, artifacts: files }
            }
            Err(e) => {
                eprintln!("{family}: {} {e}", e.code());
                let status = tsclass::bench::FamilyStatus {
                    family: family.name().into(),
                    status: "failed".into(),
                    error_code: Some(e.code().into()),
                    error: Some(e.to_string()),
                    artifacts: Vec::new(),
                };
                errors.push(Failure::from(e));
                status
            }
        };
        manifest.families.push(status);
    }
    manifest.write(dir)?;
    all_failed(cfg, errors)
}

/// A run where every family failed reports the first family's error.
fn all_failed(cfg: &RunConfig, mut errors: Vec<Failure>) -> CliResult {
    if errors.is_empty() || errors.len() < cfg.families.len() {
        return Ok(());
    }
    Err(errors.swap_remove(0))
}

fn backtest(cfg: &RunConfig) -> CliResult {
    let frame = load_frame(cfg)?;
    let outcome = run_scenario(cfg, &frame)?;
    let mut errors = Vec::new();
    for (family, run) in outcome.runs {
        match run {
            Ok(r) => println!(
                "{family:<20} strategy {:>10.4}  market {:>10.4}  random {:>10.4}  cv acc {:.4}",
                r.backtest.final_strategy, r.backtest.final_market, r.backtest.final_random, r.grid.best.mean_accuracy
            ),
            Err(e) => {
                println!("{family:<20} failed: {} {e}", e.code());
                errors.push(Failure::from(e));
            }
        }
    }
    all_failed(cfg, errors)
}

fn sweep(cfg: &RunConfig) -> CliResult {
    let frame = load_frame(cfg)?;
    let result = size_sweep(&cfg.sweep, cfg, &frame)?;
    write_sweep(cfg, &result)?;
    let medians = result.median_by_size();
    for (i, size) in result.sizes.iter().enumerate() {
        let m = medians[i].map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
        println!("size {size:>6}: median final return {m}");
    }
    if result.returns.iter().flatten().all(Option::is_none) {
        let f = &result.failures[0];
        return Err(Failure { code: f.code.clone(), exit: f.exit, message: f.message.clone() });
    }
    Ok(())
}

fn gradcheck(cfg: &RunConfig, seeds: u64, tolerance: f64) -> CliResult {
    let mut reports: Vec<GradCheckReport> = Vec::new();
    for s in 0..seeds {
        let s = cfg.seed.wrapping_add(s);
        reports.push(gradcheck_convnet(s, 3, 4, 6, Some(64)).map_err(Error::from)?);
        reports.push(gradcheck_lstm(s, 4, 3, 5).map_err(Error::from)?);
    }
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let dir = out_dir(cfg)?;
    let mut manifest = Manifest::new(cfg, "gradcheck", json!({"seeds": seeds, "tolerance": tolerance}));
    if cfg.wants(OutputFormat::Json) {
        write_json(&dir.join("gradcheck.json"), &json!({"max_rel_error": worst, "tolerance": tolerance, "reports": reports}))?;
        manifest.artifacts.push("gradcheck.json".into());
    }
    manifest.write(dir)?;
    for r in &reports {
        println!("{:<12} seed {:>3}  max rel error {:.3e}", r.model, r.seed, r.max_rel_error);
    }
    if !(worst <= tolerance) {
        return Err(BenchError::GradCheck(worst).into());
    }
    Ok(())
}

fn synth(cfg: &RunConfig) -> CliResult {
    let spec = cfg.synth.clone().unwrap_or_default();
    let frame = gen_synthetic_spec(&spec)?;
    let dir = out_dir(cfg)?;
    let mut manifest = Manifest::new(cfg, "synth", frame_summary(&frame));
    if cfg.wants(OutputFormat::Csv) {
        write_frame_csv(&frame, &dir.join("synthetic.csv"))?;
        manifest.artifacts.push("synthetic.csv".into());
    }
    manifest.write(dir)?;
    println!("generated {} rows of {:?} data", frame.len(), spec.kind);
    Ok(())
}

fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn report(cfg: &RunConfig, run: &Path, explicit_out: bool) -> CliResult {
    let manifest: Manifest = serde_json::from_value(read_json(&run.join("manifest.json"))?).map_err(Error::from)?;
    let dest = if explicit_out { out_dir(cfg)?.to_path_buf() } else { run.to_path_buf() };
    let mut rows = Vec::new();
    for fam in manifest.families.iter().filter(|f| f.status == "ok") {
        let path = run.join(format!("report_{}.json", fam.family));
        if !path.exists() {
            continue;
        }
        let r = read_json(&path)?;
        rows.push(json!({
            "family": fam.family,
            "cv_accuracy": r["grid"]["best"]["mean_accuracy"],
            "train_accuracy": r["train_accuracy"],
            "final_strategy": r["backtest"]["final_strategy"],
            "final_market": r["backtest"]["final_market"],
            "final_random": r["backtest"]["final_random"],
            "sharpe_strategy": r["backtest"]["sharpe_strategy"],
            "held_out_final": r["held_out"]["final_strategy"],
        }));
    }
    let mut written = Vec::new();
    if cfg.wants(OutputFormat::Json) {
        write_json(&dest.join("summary.json"), &json!({"command": manifest.command, "mode": manifest.mode, "seed": manifest.seed, "families": rows}))?;
        written.push("summary.json");
    }
    let cols = ["family", "cv_accuracy", "train_accuracy", "final_strategy", "final_market", "final_random", "sharpe_strategy", "held_out_final"];
    let cell = |v: &serde_json::Value| match v {
        serde_json::Value::Number(n) => format!("{:.4}", n.as_f64().unwrap_or(f64::NAN)),
        serde_json::Value::String(s) => s.clone(),
        _ => "n/a".into(),
    };
    if cfg.wants(OutputFormat::Csv) {
        let mut text = cols.join(",") + "\n";
        for r in &rows {
            text += &(cols.iter().map(|c| cell(&r[*c])).collect::<Vec<_>>().join(",") + "\n");
        }
        std::fs::write(dest.join("summary.csv"), text).map_err(Error::from)?;
        written.push("summary.csv");
    }
    if cfg.wants(OutputFormat::Svg) {
        for a in &manifest.artifacts {
            let Some(stem) = a.strip_suffix(".csv") else { continue };
            let text = std::fs::read_to_string(run.join(a)).map_err(Error::from)?;
            let data = if stem == "heatmap" {
                PlotData::Heatmap(parse_heatmap_csv(&text)?)
            } else if stem.starts_with("curves_") {
                PlotData::Curves(parse_curves_csv(&text)?)
            } else {
                continue;
            };
            emit_plot(&data, PlotFormat::Svg, &dest.join(format!("{stem}.svg")))?;
        }
    }
    println!("{}", cols.iter().map(|c| format!("{c:>16}")).collect::<String>());
    for r in &rows {
        println!("{}", cols.iter().map(|c| format!("{:>16}", cell(&r[*c]))).collect::<String>());
    }
    if rows.is_empty() && manifest.command != "sweep" {
        return Err(Failure { code: "EMPTY_DATA".into(), exit: 3, message: format!("no family reports in {}", run.display()) });
    }
    log::info!("wrote {written:?} to {}", dest.display());
    Ok(())
}
