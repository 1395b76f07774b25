use indexmap::IndexMap;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use tsclass::bench::{gen_synthetic_spec, SynthKind, SynthSpec};
use tsclass::classic::{expand_grid, ClassicLearner, Family, ParamValue};
use tsclass::dataio::Frame;
use tsclass::pipeline::*;
use tsclass::{seed, Matrix};

/// Predicts one fixed class everywhere.
struct ConstantStub;

impl Learner for ConstantStub {
    type Params = i8;
    fn fit_predict(&self, c: &i8, _: &Matrix, _: &[i8], x_test: &Matrix, _: u64) -> Result<Vec<i8>, String> {
        Ok(vec![*c; x_test.nrows()])
    }
}

/// 120 supervised rows whose every 20-row block holds eight `1`, eleven `0`
/// and one `-1`; five folds of 20 test rows each line up with the blocks.
fn block_dataset() -> Dataset {
    let n = 121;
    let block: Vec<i8> = [vec![1; 8], vec![0; 11], vec![-1]].concat();
    let labels: Vec<i8> = (0..n).map(|i| block[i % 20]).collect();
    let mut cols = IndexMap::new();
    cols.insert("x".to_string(), (0..n).map(|i| (i as f64).sin()).collect::<Vec<_>>());
    let frame = Frame::new((0..n as i64).collect(), cols, vec![0.0; n], Some(labels)).unwrap();
    let features = FeatureSpec { include_returns: false, ..Default::default() };
    Dataset::from_frame(&frame, &features, &LabelSpec::default(), Mode::PaperFaithful, 5).unwrap()
}

#[test]
fn stub_oracle_picks_higher_accuracy() {
    let data = block_dataset();
    let plan = time_series_split(data.len(), 5).unwrap();
    for mode in [Mode::PaperFaithful, Mode::LeakFree] {
        let r = grid_search(&ConstantStub, &[1, 0], &data, &plan, mode, 0).unwrap();
        assert_eq!(r.candidates[0].fold_accuracies, vec![0.40; 5]);
        assert_eq!(r.candidates[1].fold_accuracies, vec![0.55; 5]);
        assert_eq!(r.best.index, 1);
        assert_eq!(r.best.params, 0);
        assert!((r.best.mean_accuracy - 0.55).abs() < 1e-15);
    }
}

#[test]
fn single_candidate_and_ties() {
    let data = block_dataset();
    let plan = time_series_split(data.len(), 5).unwrap();
    let one = grid_search(&ConstantStub, &[-1], &data, &plan, Mode::PaperFaithful, 0).unwrap();
    assert_eq!(one.best.index, 0);
    assert!((one.best.mean_accuracy - 0.05).abs() < 1e-15);
    let tie = grid_search(&ConstantStub, &[-1, 1, 0, 0], &data, &plan, Mode::PaperFaithful, 0).unwrap();
    assert_eq!(tie.best.index, 2);
    assert!(grid_search(&ConstantStub, &[], &data, &plan, Mode::PaperFaithful, 0).is_err());
}

#[test]
fn grid_result_json_shape() {
    let data = block_dataset();
    let plan = time_series_split(data.len(), 5).unwrap();
    let r = grid_search(&ConstantStub, &[1, 0], &data, &plan, Mode::PaperFaithful, 0).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    let c = &v["candidates"][1];
    assert_eq!(c["params"], 0);
    assert_eq!(c["fold_accuracies"].as_array().unwrap().len(), 5);
    assert!(c["mean_accuracy"].is_number());
    assert_eq!(v["best"]["params"], 0);
}

fn planted(n: usize, s: u64) -> Dataset {
    let frame =
        gen_synthetic_spec(&SynthSpec { kind: SynthKind::PlantedSignal, n, d: 4, seed: s, ..Default::default() }).unwrap();
    Dataset::from_frame(&frame, &FeatureSpec::default(), &LabelSpec::default(), Mode::PaperFaithful, 5).unwrap()
}

#[test]
fn leak_modes_agree_on_stationary_data() {
    let mut grid = tsclass::classic::GridDecl::new();
    grid.push(("C".into(), vec![ParamValue::Num(1.0)]));
    let grid = expand_grid(&grid);
    for s in 0..3 {
        let data = planted(1500, s);
        let plan = time_series_split(data.len(), 5).unwrap();
        let learner = ClassicLearner { family: Family::Logistic };
        let a = grid_search(&learner, &grid, &data, &plan, Mode::PaperFaithful, s).unwrap().best.mean_accuracy;
        let b = grid_search(&learner, &grid, &data, &plan, Mode::LeakFree, s).unwrap().best.mean_accuracy;
        assert!((a - b).abs() <= 0.05, "seed {s}: {a} vs {b}");
    }
}

#[test]
fn grid_search_independent_of_thread_count() {
    let data = planted(400, 7);
    let plan = time_series_split(data.len(), 5).unwrap();
    let learner = ClassicLearner { family: Family::RandomForest };
    let mut grid = tsclass::classic::GridDecl::new();
    grid.push(("n_estimators".into(), vec![ParamValue::Num(5.0), ParamValue::Num(10.0)]));
    grid.push(("max_depth".into(), vec![ParamValue::Num(3.0), ParamValue::Null]));
    let grid = expand_grid(&grid);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| grid_search(&learner, &grid, &data, &plan, Mode::LeakFree, 3).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&run(2)).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn folds_are_chronological(k in 2usize..12, extra in 0usize..400) {
        let n = 2 * (k + 1) + extra;
        let plan = time_series_split(n, k).unwrap();
        prop_assert_eq!(plan.folds.len(), k);
        let size = plan.folds[0].test.len();
        let mut prev_end = None;
        for f in &plan.folds {
            prop_assert!(f.train.iter().max().unwrap() < f.test.iter().min().unwrap());
            prop_assert_eq!(f.test.len(), size);
            prop_assert!(f.test.windows(2).all(|w| w[1] == w[0] + 1));
            prop_assert_eq!(f.train[0], 0);
            if let Some(e) = prev_end {
                prop_assert_eq!(f.test[0], e);
            }
            prev_end = Some(f.test.last().unwrap() + 1);
        }
        prop_assert_eq!(prev_end, Some(n));
    }

    #[test]
    fn scaled_columns_are_standard(s in 0u64..500, n in 2usize..60, d in 1usize..5) {
        let mut rng = seed::rng(s);
        let mut x = Matrix::zeros(n, d + 1);
        for r in 0..n {
            for c in 0..d {
                let v: f64 = StandardNormal.sample(&mut rng);
                x.set(r, c, 3.0 * v + 5.0);
            }
            x.set(r, d, 2.5);
        }
        let (_, z) = Scaler::fit_transform(&x);
        for c in 0..=d {
            let col = z.column(c);
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
            prop_assert!(mean.abs() <= 1e-9);
            if c == d {
                prop_assert!(col.iter().all(|&v| v == 0.0));
            } else {
                prop_assert!((sd - 1.0).abs() <= 1e-9);
            }
        }
    }
}
