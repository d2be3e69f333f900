use factrf::fact::{run_fact, FactConfig};
use factrf::importance::{
    cpi, copy_design_generate, mda, mdi, permutation_scores, write_scores_csv, ImportanceMethod,
    SingleStratum, TreeStrata,
};
use factrf::sim::SimulationSpec;
use factrf::{Dataset, Error, ForestParams, RegressionForest};

fn four_points() -> Dataset {
    Dataset::from_rows(
        &[vec![0.1, 0.5], vec![0.2, 0.5], vec![0.8, 0.5], vec![0.9, 0.5]],
        vec![0.0, 0.0, 1.0, 1.0],
    )
    .unwrap()
}

#[test]
fn mdi_of_stumps_and_single_split() {
    let constant = Dataset::from_rows(&[vec![0.1], vec![0.4], vec![0.9]], vec![2.0; 3]).unwrap();
    let forest = RegressionForest::fit(&constant, &ForestParams::default().with_n_trees(5), 0).unwrap();
    assert_eq!(mdi(&forest, 1).scores, vec![0.0]);

    let params = ForestParams::default()
        .with_n_trees(1)
        .with_mtry(2)
        .with_min_node_size(1)
        .without_bootstrap();
    let forest = RegressionForest::fit(&four_points(), &params, 0).unwrap();
    let s = mdi(&forest, 2);
    assert!((s.scores[0] - 1.0).abs() < 1e-15);
    assert_eq!(s.scores[1], 0.0);
}

#[test]
fn mdi_accounts_for_every_split() {
    let data = SimulationSpec::new(150, 45, 0.3, 1.0, 1, 3).generate(0).unwrap().data;
    let forest = RegressionForest::fit(&data, &ForestParams::default().with_n_trees(30), 1).unwrap();
    let s = mdi(&forest, data.p());
    assert!(s.scores.iter().all(|&v| v >= 0.0));
    let per_tree: f64 = forest
        .trees()
        .iter()
        .map(|t| t.impurity_decrease_by_feature(data.p()).iter().sum::<f64>())
        .sum::<f64>()
        / forest.trees().len() as f64;
    let total: f64 = s.scores.iter().sum();
    assert!((total - per_tree).abs() < 1e-9 * per_tree);
}

fn with_unused_feature() -> (Dataset, RegressionForest) {
    // Column 2 is constant, so no tree can split on it.
    let base = SimulationSpec::new(120, 45, 0.0, 1.0, 1, 7).generate(0).unwrap().data;
    let data = base.with_feature_column(2, &vec![0.5; base.n()]).unwrap();
    let forest = RegressionForest::fit(&data, &ForestParams::default().with_n_trees(100), 2).unwrap();
    (data, forest)
}

#[test]
fn permuting_an_unused_feature_changes_nothing() {
    let (data, forest) = with_unused_feature();
    assert!(forest.trees().iter().all(|t| !t.uses_feature(2)));
    let est = mda(&forest, &data, 2, 200, 5).unwrap();
    assert_eq!(est.score, 0.0);
    assert_eq!(est.stderr, Some(0.0));
    let est = cpi(&forest, &data, 2, &TreeStrata::default(), 200, 5).unwrap();
    assert_eq!(est.score, 0.0);
}

#[test]
fn zero_reps_is_an_error() {
    let (data, forest) = with_unused_feature();
    assert!(matches!(mda(&forest, &data, 0, 0, 1), Err(Error::InvalidReps)));
}

#[test]
fn one_stratum_cpi_is_mda() {
    let (data, forest) = with_unused_feature();
    for j in [0, 10, 11] {
        let a = mda(&forest, &data, j, 20, 9).unwrap();
        let b = cpi(&forest, &data, j, &SingleStratum, 20, 9).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn relevant_feature_has_large_permutation_importance() {
    let data = SimulationSpec::new(200, 45, 0.0, 1.0, 1, 1).generate(0).unwrap().data;
    let forest = RegressionForest::fit(&data, &ForestParams::default().with_n_trees(100), 3).unwrap();
    let strong = mda(&forest, &data, 10, 20, 0).unwrap();
    let null = mda(&forest, &data, 5, 20, 0).unwrap();
    assert!(strong.score > 10.0 * null.score.abs().max(1e-3), "{strong:?} {null:?}");
}

#[test]
fn cpi_matches_mda_for_independent_features() {
    // Paired over 50 seeds at lambda = 0 the mean difference is within 3 stderr of 0.
    let diffs: Vec<f64> = (0..50)
        .map(|s| {
            let data = SimulationSpec::new(200, 45, 0.0, 5.0, 1, s).generate(0).unwrap().data;
            let forest =
                RegressionForest::fit(&data, &ForestParams::default().with_n_trees(100), s).unwrap();
            let a = mda(&forest, &data, 10, 20, s).unwrap().score;
            let b = cpi(&forest, &data, 10, &TreeStrata::default(), 20, s).unwrap().score;
            a - b
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn scores_table() {
    let (data, forest) = with_unused_feature();
    let all = vec![
        mdi(&forest, data.p()),
        permutation_scores(&forest, &data, ImportanceMethod::Mda, &[0, 2], 5, 1).unwrap(),
    ];
    assert_eq!(all[1].scores[2], 0.0);
    assert!(permutation_scores(&forest, &data, ImportanceMethod::Mdi, &[], 5, 1).is_err());
    let mut buf = Vec::new();
    write_scores_csv(&mut buf, &data, &all).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "feature,method,score");
    assert_eq!(lines.len(), 1 + 2 * data.p());
    assert!(lines[1].starts_with("X1,MDI,"));
    assert!(text.contains("X3,MDA,0\n"));
}

#[test]
fn copy_design_layout() {
    let n = 4000;
    let data = copy_design_generate(n, 4, 0.5, 11).unwrap();
    let mut upper = 0;
    for i in 0..n {
        let row = data.row(i);
        if row[0] > 0.7 {
            upper += 1;
            assert!(row.iter().all(|&v| v == row[0]));
        } else {
            assert!(row[1..].iter().all(|&v| v <= 0.7));
        }
    }
    let frac = upper as f64 / n as f64;
    assert!((frac - 0.3).abs() < 3.0 * (0.21 / n as f64).sqrt(), "{frac}");
    assert!(copy_design_generate(10, 1, 1.0, 0).is_err());
}

#[test]
fn copy_design_copies_are_not_flagged() {
    // X2 only duplicates X1 and is conditionally independent of Y.
    let cfg = FactConfig::default().with_forest(ForestParams::default().with_n_trees(100));
    let rejections = (0..50)
        .filter(|&s| {
            let data = copy_design_generate(2000, 5, 1.0, s).unwrap();
            let r = run_fact(1, &data, &cfg.clone().with_seed(s)).unwrap();
            r.p_value < 0.05
        })
        .count();
    assert!(rejections <= 5, "{rejections} of 50 rejected");
}

#[test]
fn strata_condition_on_correlated_covariates_only() {
    let strata = TreeStrata::default();
    let indep = SimulationSpec::new(300, 45, 0.0, 1.0, 1, 4).generate(0).unwrap().data;
    assert!(strata.conditioning_set(&indep, 11).is_empty());
    let dep = SimulationSpec::new(300, 45, 0.6, 1.0, 1, 4).generate(0).unwrap().data;
    // X12 shares a group with X11 and X13.
    assert_eq!(strata.conditioning_set(&dep, 11), vec![10, 12]);
    use factrf::importance::StrataBuilder;
    let cells = strata.strata(&dep, 11, 0).unwrap();
    assert!(cells.len() > 1);
    assert!(cells.iter().all(|c| c.len() >= 30));
    let mut all: Vec<usize> = cells.concat();
    all.sort_unstable();
    assert_eq!(all, (0..300).collect::<Vec<_>>());
}
