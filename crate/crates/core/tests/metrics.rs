use isocal::coxfit::{fit_cox, CoxConfig};
use isocal::data::SurvivalDataset;
use isocal::metrics::{
    area_to_uniform, c_index, evaluate, ibs, quantile_score, CoxPredictor, EvaluationSet,
    SurvivalPredictor,
};
use isocal::simgen::{generate, OracleCurves, OracleRole, Setting};
use isocal::Error;
use proptest::prelude::*;

/// Per-subject step curves on shared knots.
struct Curves {
    knots: Vec<f64>,
    values: Vec<Vec<f64>>,
    risks: Vec<f64>,
}

impl SurvivalPredictor for Curves {
    fn n_subjects(&self) -> usize {
        self.values.len()
    }
    fn knots(&self) -> &[f64] {
        &self.knots
    }
    fn risk(&self, subject: usize) -> f64 {
        self.risks[subject]
    }
    fn fill(&self, subject: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.values[subject]);
    }
}

fn dataset(times: &[f64], events: &[bool]) -> SurvivalDataset {
    let ids = (0..times.len()).map(|i| format!("m{i}")).collect();
    SurvivalDataset::new(ids, times.to_vec(), events.to_vec(), vec![], vec![]).unwrap()
}

/// Pairwise definition of Harrell's C.
fn c_index_pairs(risks: &[f64], times: &[f64], events: &[bool]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..risks.len() {
        for j in 0..risks.len() {
            if events[i] && times[i] < times[j] {
                den += 1.0;
                if risks[i] > risks[j] {
                    num += 1.0;
                } else if risks[i] == risks[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

#[test]
fn c_index_hand_cases() {
    // Subject 2 is censored at 2.5 and only serves as a later comparator.
    let times = [1.0, 2.0, 2.5, 4.0];
    let events = [true, true, false, true];
    let risks = [3.0, 1.0, 2.0, 0.0];
    // Comparable: (0,1) (0,2) (0,3) (1,2) (1,3); discordant: (1,2).
    assert!((c_index(&risks, &times, &events).unwrap() - 0.8).abs() < 1e-15);
    assert_eq!(c_index(&[1.0; 4], &times, &events).unwrap(), 0.5);
    assert!(matches!(
        c_index(&[1.0, 2.0], &[1.0, 2.0], &[false, false]),
        Err(Error::UndefinedMetric(_))
    ));
}

#[test]
fn ibs_matches_numerical_integration() {
    let knots = vec![0.5, 1.0, 2.0, 3.0];
    let curves = Curves {
        knots: knots.clone(),
        values: vec![vec![0.9, 0.6, 0.3, 0.1], vec![0.95, 0.9, 0.5, 0.4]],
        risks: vec![1.0, 0.0],
    };
    let true_times = [1.3, 2.7];
    let t_max = 2.5;
    let eval = EvaluationSet::oracle(&true_times, t_max).unwrap();
    let got = ibs(&curves, &eval).unwrap();
    let step = |s: usize, t: f64| match knots.iter().rposition(|k| *k <= t) {
        None => 1.0,
        Some(m) => curves.values[s][m],
    };
    let n = 250_000;
    let h = t_max / n as f64;
    let mut total = 0.0;
    for (s, y) in true_times.iter().enumerate() {
        for m in 0..n {
            let t = (m as f64 + 0.5) * h;
            let alive = if *y > t { 1.0 } else { 0.0 };
            total += (step(s, t) - alive).powi(2) * h;
        }
    }
    let expected = total / (2.0 * t_max);
    assert!((got - expected).abs() < 1e-5, "{got} vs {expected}");
}

#[test]
fn ibs_total_ignores_subjects_censored_at_time_zero() {
    let curves = Curves {
        knots: vec![1.0, 2.0],
        values: vec![vec![0.8, 0.3]; 3],
        risks: vec![0.0; 3],
    };
    let censoring = |n| {
        OracleCurves::new(
            Setting::new(1).unwrap(),
            OracleRole::Censoring,
            vec![1.0; n],
        )
    };
    let (g2, g3) = (censoring(2), censoring(3));
    let small = dataset(&[1.5, 0.7], &[true, false]);
    let large = dataset(&[1.5, 0.7, 0.0], &[true, false, false]);
    let eval_small = EvaluationSet::ipcw(&small, &g2, &[1.0, 2.0], 2.0, 1e-4).unwrap();
    let eval_large = EvaluationSet::ipcw(&large, &g3, &[1.0, 2.0], 2.0, 1e-4).unwrap();
    let a = ibs(&curves, &eval_small).unwrap() * 2.0;
    let b = ibs(&curves, &eval_large).unwrap() * 3.0;
    assert!((a - b).abs() < 1e-14, "{a} vs {b}");
}

#[test]
fn quantile_score_is_invariant_to_redundant_knots() {
    let coarse = Curves {
        knots: vec![1.0, 2.0, 4.0],
        values: vec![vec![0.7, 0.4, 0.05], vec![0.9, 0.85, 0.2]],
        risks: vec![1.0, 0.0],
    };
    // Same step functions with extra knots where nothing changes.
    let fine = Curves {
        knots: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
        values: vec![
            vec![1.0, 0.7, 0.7, 0.4, 0.4, 0.05],
            vec![1.0, 0.9, 0.9, 0.85, 0.85, 0.2],
        ],
        risks: vec![1.0, 0.0],
    };
    let eval = EvaluationSet::oracle(&[1.7, 3.5], 5.0).unwrap();
    for tau in [0.1, 0.5, 0.9] {
        let (a, ma) = quantile_score(&coarse, &eval, tau).unwrap();
        let (b, mb) = quantile_score(&fine, &eval, tau).unwrap();
        assert_eq!(ma, mb);
        assert!((a - b).abs() < 1e-14);
    }
    assert!((ibs(&coarse, &eval).unwrap() - ibs(&fine, &eval).unwrap()).abs() < 1e-14);
}

#[test]
fn joint_masks_count_every_subject_and_null_when_disjoint() {
    // Predictor A reaches 0.1 only for subject 0, predictor B only for subject 1.
    let a = Curves {
        knots: vec![1.0, 2.0],
        values: vec![vec![0.5, 0.05], vec![0.5, 0.4]],
        risks: vec![1.0, 0.0],
    };
    let b = Curves {
        knots: vec![1.0, 2.0],
        values: vec![vec![0.5, 0.4], vec![0.5, 0.05]],
        risks: vec![0.0, 1.0],
    };
    let eval = EvaluationSet::oracle(&[1.5, 2.5], 3.0).unwrap();
    let reports = evaluate(&[("A", &a), ("B", &b)], &eval, &[0.5, 0.9], "toy", Some(0)).unwrap();
    for r in &reports {
        for q in &r.quantile_scores {
            assert_eq!(q.n_included + q.n_excluded, 2);
        }
        let q5 = r.quantile(0.5).unwrap();
        assert_eq!(q5.n_included, 2);
        assert!(q5.score.is_some());
        let q9 = r.quantile(0.9).unwrap();
        assert_eq!(q9.n_included, 0);
        assert!(q9.score.is_none() && q9.reason.is_some());
    }
    let row = reports[0].csv_row();
    assert!(row.ends_with(",,0"), "{row}");
}

#[test]
fn area_to_uniform_examples() {
    let spread: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    assert!(area_to_uniform(&spread, &vec![1.0; 1000]).unwrap() < 1e-3);
    assert!((area_to_uniform(&[0.0; 5], &[1.0; 5]).unwrap() - 0.5).abs() < 1e-15);
    assert!((area_to_uniform(&[1.0; 5], &[1.0; 5]).unwrap() - 0.5).abs() < 1e-15);
    assert!((area_to_uniform(&[0.5], &[2.0]).unwrap() - 0.25).abs() < 1e-15);
}

/// Mean over seeds of |IBS_ipcw - IBS_oracle| for a Cox model on Setting 1,
/// integrated up to the 90th percentile of the training times.
fn ipcw_gap(n: usize, seeds: u64) -> f64 {
    let setting = Setting::new(1).unwrap();
    let mut total = 0.0;
    for seed in 0..seeds {
        let data = generate(1, 2 * n, 500 + seed).unwrap();
        let parts = data.split(&[n, n]).unwrap();
        let model = fit_cox(&parts[0].dataset, &CoxConfig::default()).unwrap();
        let test = &parts[1];
        let predictor = CoxPredictor::new(&model, &test.dataset).unwrap();
        let g = OracleCurves::for_dataset(setting, OracleRole::Censoring, &test.dataset);
        let mut sorted = parts[0].dataset.times().to_vec();
        sorted.sort_by(f64::total_cmp);
        let t_max = sorted[sorted.len() * 9 / 10];
        let knots: Vec<f64> = (1..=4000).map(|k| k as f64 * t_max / 4000.0).collect();
        let ipcw = EvaluationSet::ipcw(&test.dataset, &g, &knots, t_max, 1e-4).unwrap();
        let truth: Vec<f64> = test.truths.iter().map(|t| t.true_time).collect();
        let oracle = EvaluationSet::oracle(&truth, t_max).unwrap();
        total += (ibs(&predictor, &ipcw).unwrap() - ibs(&predictor, &oracle).unwrap()).abs();
    }
    total / seeds as f64
}

#[test]
fn ipcw_scores_approach_oracle_scores() {
    let small = ipcw_gap(1_000, 8);
    let large = ipcw_gap(10_000, 8);
    assert!(large < small, "{small} then {large}");
    assert!(large < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn c_index_matches_pairwise_definition(
        rows in prop::collection::vec((0u8..6, 0u8..8, any::<bool>()), 2..40)
    ) {
        let risks: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let times: Vec<f64> = rows.iter().map(|r| 1.0 + r.1 as f64).collect();
        let events: Vec<bool> = rows.iter().map(|r| r.2).collect();
        match (c_index(&risks, &times, &events), c_index_pairs(&risks, &times, &events)) {
            (Ok(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (Err(Error::UndefinedMetric(_)), None) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn c_index_ignores_increasing_transforms(
        rows in prop::collection::vec((-3.0f64..3.0, 0.1f64..5.0, any::<bool>()), 2..60)
    ) {
        let risks: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let times: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mut events: Vec<bool> = rows.iter().map(|r| r.2).collect();
        events[0] = true;
        let moved: Vec<f64> = risks.iter().map(|r| r.exp() * 7.0 - 2.0).collect();
        if let Ok(a) = c_index(&risks, &times, &events) {
            prop_assert_eq!(a, c_index(&moved, &times, &events).unwrap());
        }
    }

    #[test]
    fn area_to_uniform_lies_in_range(
        pairs in prop::collection::vec((0.0f64..1.0, 0.01f64..3.0), 1..50)
    ) {
        let (v, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = area_to_uniform(&v, &w).unwrap();
        prop_assert!((0.0..=0.5 + 1e-12).contains(&a));
    }
}
