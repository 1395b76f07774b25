use std::collections::BTreeMap;
use std::path::Path;

use tsclass::bench::*;
use tsclass::classic::Family;
use tsclass::dataio::label_by_quantiles;
use tsclass::pipeline::Mode;

fn synth(kind: SynthKind, n: usize, seed: u64) -> SynthSpec {
    SynthSpec { kind, n, d: 5, seed, ..Default::default() }
}

fn small_cfg(dir: &Path, mode: Mode, families: &str) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.synth = Some(synth(SynthKind::PlantedSignal, 600, 3));
    cfg.data_start = 0;
    cfg.data_len = None;
    cfg.mode = mode;
    cfg.set("families", families).unwrap();
    cfg.set("grid.logistic.C", "0.1,1").unwrap();
    cfg.set("grid.decision_tree.max_depth", "3,None").unwrap();
    cfg.out_dir = dir.to_path_buf();
    cfg.formats = vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg];
    cfg
}

fn json_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn same_seed_gives_identical_frames() {
    for kind in [SynthKind::PlantedSignal, SynthKind::RegimeShift, SynthKind::RandomWalk] {
        let a = gen_synthetic(kind, 300, 4, 9).unwrap();
        let b = gen_synthetic(kind, 300, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic(kind, 300, 4, 10).unwrap());
    }
    assert!(gen_synthetic(SynthKind::PlantedSignal, 49, 2, 0).is_err());
    assert!(gen_synthetic(SynthKind::PlantedSignal, 50, 0, 0).is_err());
}

/// Thresholding the planted score at its own tertiles predicts the return
/// class about 80% of the time.
#[test]
fn planted_signal_bayes_rate_near_eighty_percent() {
    let spec = synth(SynthKind::PlantedSignal, 40_000, 5);
    let frame = gen_synthetic_spec(&spec).unwrap();
    let w = planted_weights(5, 5);
    let n = frame.len();
    let score: Vec<f64> =
        (0..n - 1).map(|t| (0..5).map(|j| w[j] * frame.column(&format!("f{j}")).unwrap()[t]).sum()).collect();
    let next = &frame.returns()[1..];
    let (truth, _) = label_by_quantiles(next, 0.33, 0.67).unwrap();
    let (guess, _) = label_by_quantiles(&score, 0.33, 0.67).unwrap();
    let acc = truth.iter().zip(&guess).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
    assert!((0.77..=0.83).contains(&acc), "{acc}");
}

#[test]
fn random_walk_held_out_accuracy_near_base_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path(), Mode::LeakFree, "logistic,gaussian_nb,decision_tree,knn");
    cfg.set("grid.knn.n_neighbors", "5").unwrap();
    cfg.set("grid.knn.weights", "uniform").unwrap();
    let frame = gen_synthetic_spec(&synth(SynthKind::RandomWalk, 3000, 1)).unwrap();
    let data = build_dataset(&cfg, &frame).unwrap();
    for &f in &cfg.families {
        let h = run_family(&cfg, &data, f).unwrap().held_out.unwrap();
        assert!((0.25..=0.42).contains(&h.accuracy), "{f}: {}", h.accuracy);
    }
}

#[test]
fn planted_signal_logistic_training_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path(), Mode::PaperFaithful, "logistic");
    let frame = gen_synthetic_spec(&synth(SynthKind::PlantedSignal, 2000, 2)).unwrap();
    let data = build_dataset(&cfg, &frame).unwrap();
    let run = run_family(&cfg, &data, FamilyId::Classic(Family::Logistic)).unwrap();
    assert!(run.train_accuracy >= 0.7, "{}", run.train_accuracy);
}

#[test]
fn constant_series_is_one_horizontal_polyline() {
    let c = Curves {
        title: "flat".into(),
        x_label: "t".into(),
        y_label: "v".into(),
        series: vec![("c".into(), vec![1.5; 20])],
    };
    let svg = render_svg(&PlotData::Curves(c)).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains("viewBox=\"0 0 900 500\""));
    let line = svg.lines().find(|l| l.contains("<polyline")).unwrap();
    let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let ys: Vec<&str> = pts.split_whitespace().map(|p| p.split(',').nth(1).unwrap()).collect();
    assert_eq!(ys.len(), 20);
    assert!(ys.iter().all(|y| *y == ys[0]));
    assert!(svg.contains(">t<") && svg.contains(">v<"));
}

#[test]
fn csv_round_trip_is_byte_identical() {
    let c = Curves {
        title: "x".into(),
        x_label: "t".into(),
        y_label: "v".into(),
        series: vec![
            ("a".into(), vec![1.0, 1.0 / 3.0, 2.5e-9, -7.123456789012345]),
            ("b".into(), vec![0.1, 1e12, 123456789.123, 0.0]),
        ],
    };
    let text = render_csv(&PlotData::Curves(c)).unwrap();
    let again = render_csv(&PlotData::Curves(parse_curves_csv(&text).unwrap())).unwrap();
    assert_eq!(text, again);
    assert!(text.contains("0.333333333333"));

    let h = Heatmap {
        title: "h".into(),
        row_label: "size".into(),
        col_label: "family".into(),
        rows: vec!["200".into(), "500".into()],
        cols: vec!["svm".into(), "knn".into()],
        values: vec![vec![Some(1.0 / 7.0), None], vec![Some(2.0), Some(0.999999999999)]],
    };
    let text = render_csv(&PlotData::Heatmap(h)).unwrap();
    let again = render_csv(&PlotData::Heatmap(parse_heatmap_csv(&text).unwrap())).unwrap();
    assert_eq!(text, again);
}

#[test]
fn empty_plot_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let empty = PlotData::Curves(Curves { title: String::new(), x_label: String::new(), y_label: String::new(), series: vec![] });
    for fmt in [PlotFormat::Csv, PlotFormat::Svg] {
        let err = emit_plot(&empty, fmt, &dir.path().join("x")).unwrap_err();
        assert_eq!(err.code(), "EMPTY_DATA");
    }
    let no_points = PlotData::Curves(Curves {
        title: String::new(),
        x_label: String::new(),
        y_label: String::new(),
        series: vec![("a".into(), vec![])],
    });
    assert!(emit_plot(&no_points, PlotFormat::Svg, &dir.path().join("y")).is_err());
}

#[test]
fn leak_free_artifacts_exist_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path(), Mode::LeakFree, "logistic,gaussian_nb");
    let frame = load_frame(&cfg).unwrap();
    let out = run_scenario(&cfg, &frame).unwrap();
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["mode"], "leakfree");
    assert_eq!(m["config_hash"].as_str().unwrap(), cfg.config_hash());
    let listed: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["manifest.json", "report_logistic.json", "curves_logistic.csv", "curves_logistic.svg", "report_gaussian_nb.json"] {
        assert!(listed.contains(&f), "{f} missing from {listed:?}");
    }
    for f in &listed {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        match Path::new(f).extension().unwrap().to_str().unwrap() {
            "json" => {
                serde_json::from_str::<serde_json::Value>(&text).unwrap();
            }
            "csv" => {
                parse_curves_csv(&text).unwrap();
            }
            "svg" => assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>")),
            other => panic!("unexpected artifact {other}"),
        }
    }
    assert!(out.runs.iter().all(|(_, r)| r.as_ref().unwrap().held_out.is_some()));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report_logistic.json")).unwrap()).unwrap();
    let cands = report["grid"]["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 2);
    assert_eq!(cands[0]["fold_accuracies"].as_array().unwrap().len(), 5);
}

#[test]
fn failing_family_is_recorded_and_others_continue() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path(), Mode::PaperFaithful, "gaussian_nb,convtimenet");
    cfg.set("grid.convtimenet.dropout", "1.5").unwrap();
    cfg.set("net.epochs", "1").unwrap();
    let frame = load_frame(&cfg).unwrap();
    let out = run_scenario(&cfg, &frame).unwrap();
    let st: Vec<(&str, &str)> = out.manifest.families.iter().map(|s| (s.family.as_str(), s.status.as_str())).collect();
    assert_eq!(st, vec![("gaussian_nb", "ok"), ("convtimenet", "failed")]);
    assert_eq!(out.manifest.families[1].error_code.as_deref(), Some("INVALID_DROPOUT"));
    assert!(dir.path().join("report_gaussian_nb.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let mut outputs = Vec::new();
    for threads in [1, 3, 1] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg(dir.path(), Mode::LeakFree, "logistic,decision_tree");
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let frame = load_frame(&cfg).unwrap();
            run_scenario(&cfg, &frame).unwrap();
        });
        outputs.push(json_files(dir.path()));
    }
    assert!(outputs[0].len() >= 3);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn in_sample_best_model_beats_market_on_planted_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path(), Mode::PaperFaithful, "logistic,gaussian_nb,decision_tree");
    let frame = load_frame(&cfg).unwrap();
    let out = run_scenario(&cfg, &frame).unwrap();
    let runs: Vec<_> = out.runs.iter().map(|(_, r)| r.as_ref().unwrap()).collect();
    let best = runs.iter().max_by(|a, b| a.train_accuracy.total_cmp(&b.train_accuracy)).unwrap();
    assert!(best.backtest.final_strategy >= best.backtest.final_market, "{:?}", best.backtest.final_strategy);
}

#[test]
fn default_sweep_columns() {
    assert_eq!(SweepSpec::default().sizes(), vec![200, 500, 800, 1100, 1400, 1700]);
    assert_eq!(SweepSpec::default().start_offset, 10000);
}

#[test]
fn single_cell_sweep_matches_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path(), Mode::PaperFaithful, "logistic");
    cfg.data_start = 50;
    cfg.data_len = Some(300);
    let spec = SweepSpec { initial_size: 300, increment: 300, steps: 1, start_offset: 50, families: vec![] };
    let frame = load_frame(&cfg).unwrap();
    let sweep = size_sweep(&spec, &cfg, &frame).unwrap();
    assert_eq!(sweep.sizes, vec![300]);
    assert_eq!(sweep.families, vec!["logistic".to_string()]);
    let out = run_scenario(&cfg, &frame).unwrap();
    let run = out.runs[0].1.as_ref().unwrap();
    assert_eq!(sweep.returns, vec![vec![Some(run.backtest.final_strategy)]]);
}

#[test]
fn sweep_needs_enough_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(dir.path(), Mode::PaperFaithful, "logistic");
    let frame = load_frame(&cfg).unwrap();
    let err = size_sweep(&SweepSpec::default(), &cfg, &frame).unwrap_err();
    assert_eq!(err.exit_kind(), tsclass::error::ExitKind::Data);
}

#[test]
fn sweep_heatmap_annotations_match_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(dir.path(), Mode::PaperFaithful, "logistic,gaussian_nb");
    cfg.sweep = SweepSpec { initial_size: 100, increment: 100, steps: 2, start_offset: 0, families: vec![] };
    let frame = load_frame(&cfg).unwrap();
    let result = size_sweep(&cfg.sweep, &cfg, &frame).unwrap();
    write_sweep(&cfg, &result).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("heatmap.json")).unwrap()).unwrap();
    let svg = std::fs::read_to_string(dir.path().join("heatmap.svg")).unwrap();
    let csv = parse_heatmap_csv(&std::fs::read_to_string(dir.path().join("heatmap.csv")).unwrap()).unwrap();
    for (i, row) in json["annotations"].as_array().unwrap().iter().enumerate() {
        for (j, a) in row.as_array().unwrap().iter().enumerate() {
            let a = a.as_str().unwrap();
            let v = result.returns[i][j].unwrap();
            assert_eq!(a, format!("{v:.4}"));
            assert!(svg.contains(&format!(">{a}<")), "{a}");
            assert!((csv.values[i][j].unwrap() - v).abs() <= 1e-11 * v.abs());
        }
    }
}
