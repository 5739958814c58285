mod common;

use common::{is_doubly_monotone, partition_projection};
use isocal::calibrate::{
    build_time_grid, dr_pseudo_outcomes, fit_surface, ht_plus_pseudo_outcomes, ht_pseudo_outcomes,
    surface_from_pseudo, CalibrationConfig, CalibrationInputs,
};
use isocal::coxfit::{fit_censoring, fit_cox, CoxConfig};
use isocal::data::{
    CalibratedSurface, CurveSource, Interpolation, Method, PseudoOutcomeMatrix, RiskScores,
    SurvivalDataset, TimeGrid,
};
use isocal::simgen::{generate, Draws, OracleCurves, OracleRole, Setting};

/// The same probability for every subject at every time.
struct Flat {
    n: usize,
    value: f64,
}

impl CurveSource for Flat {
    fn n_subjects(&self) -> usize {
        self.n
    }

    fn fill(&self, _: usize, _: &[f64], out: &mut [f64]) {
        out.fill(self.value);
    }
}

fn dataset(times: &[f64], events: &[bool]) -> SurvivalDataset {
    let ids = (0..times.len()).map(|i| format!("c{i}")).collect();
    SurvivalDataset::new(ids, times.to_vec(), events.to_vec(), vec![], vec![]).unwrap()
}

fn scores(data: &SurvivalDataset, risks: &[f64]) -> RiskScores {
    RiskScores::new(data.ids().to_vec(), risks.to_vec()).unwrap()
}

/// Interpolation in time may break exact monotonicity by rounding.
const ULP_TOL: f64 = 1e-12;

/// Setting-2 style train/cal split with fitted Cox nuisances.
struct Fitted {
    train: SurvivalDataset,
    cal: SurvivalDataset,
    test_risks: Vec<f64>,
    s: isocal::coxfit::CoxCurves,
    g: isocal::coxfit::CoxCurves,
    risks: RiskScores,
}

fn fitted(setting: u8, n: usize, seed: u64) -> Fitted {
    let data = generate(setting, 3 * n, seed).unwrap();
    let parts = data.split(&[n, n, n]).unwrap();
    let train = parts[0].dataset.clone();
    let cal = parts[1].dataset.clone();
    let event = fit_cox(&train, &CoxConfig::default()).unwrap();
    let censor = fit_censoring(&train, &CoxConfig::default()).unwrap();
    Fitted {
        s: event.curves(&cal, 1e-4).unwrap(),
        g: censor.curves(&cal, 1e-4).unwrap(),
        risks: event.risk_scores(&cal).unwrap(),
        test_risks: event
            .risk_scores(&parts[2].dataset)
            .unwrap()
            .values()
            .to_vec(),
        train,
        cal,
    }
}

#[test]
fn grid_examples() {
    let cal = dataset(&[1.0, 2.0], &[true, false]);
    let train = dataset(&[1.5], &[true]);
    assert_eq!(
        build_time_grid(&train, &cal, 4).unwrap().times(),
        &[0.5, 1.0, 1.5, 2.0]
    );
    assert_eq!(
        build_time_grid(&train, &cal, 1).unwrap().times(),
        &[1.0, 1.5, 2.0]
    );
}

#[test]
fn setting_two_grid_size() {
    let data = generate(2, 5000, 0).unwrap();
    let parts = data.split(&[2500, 2500]).unwrap();
    let (train, cal) = (&parts[0].dataset, &parts[1].dataset);
    let grid = build_time_grid(train, cal, 10_000).unwrap();
    let t_max = cal.max_time();
    let lattice: Vec<f64> = (1..10_000)
        .map(|k| k as f64 * t_max / 10_000.0)
        .chain([t_max])
        .collect();
    let mut off: Vec<f64> = train
        .times()
        .iter()
        .chain(cal.times())
        .copied()
        .filter(|t| lattice.binary_search_by(|g| g.total_cmp(t)).is_err())
        .collect();
    off.sort_by(f64::total_cmp);
    off.dedup();
    assert_eq!(grid.len(), 10_000 + off.len());
}

#[test]
fn rw_matches_hand_pava() {
    // Risk order 0 < 1 < 2 with times 1, 3, 2: at t = 1.5 the targets in
    // risk order are [0, 1, 1], which pool to 2/3.
    let cal = dataset(&[1.0, 3.0, 2.0], &[true, true, true]);
    let risks = scores(&cal, &[0.0, 1.0, 2.0]);
    let g = Flat { n: 3, value: 1.0 };
    let grid = TimeGrid::new(vec![1.0, 1.5, 2.0, 3.0]).unwrap();
    let inputs = CalibrationInputs::new(&cal, &risks, None, &g, grid).unwrap();
    let s = fit_surface(&inputs, Method::Rw, &CalibrationConfig::default()).unwrap();
    for i in 0..3 {
        assert!((s.entry(i, 1) - 2.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn ht_examples() {
    let cal = dataset(&[5.0, 2.0, 4.0], &[true, false, true]);
    let risks = scores(&cal, &[0.0, 1.0, 2.0]);
    let g = Flat { n: 3, value: 0.8 };
    let grid = TimeGrid::new(vec![2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let inputs = CalibrationInputs::new(&cal, &risks, None, &g, grid).unwrap();
    let ht = ht_pseudo_outcomes(&inputs).unwrap();
    assert!((ht.get(1, 0) - 1.25).abs() < 1e-12); // Y=5 > t=3
    assert_eq!(ht.get(4, 0), 0.0); // t=6
    assert!(ht.subject_row(1).iter().all(|v| *v == 0.0)); // censored
    let half = Flat { n: 3, value: 0.5 };
    let inputs = CalibrationInputs::new(&cal, &risks, None, &half, inputs.grid.clone()).unwrap();
    let plus = ht_plus_pseudo_outcomes(&inputs).unwrap();
    assert!((plus.get(1, 0) - 2.0).abs() < 1e-12);
}

#[test]
fn dr_pseudo_outcome_examples() {
    // S = 1 on the window and no event by t: no correction.
    let cal = dataset(&[5.0, 2.0], &[false, true]);
    let risks = scores(&cal, &[0.0, 1.0]);
    let one = Flat { n: 2, value: 1.0 };
    let grid = TimeGrid::new(vec![1.0, 2.0, 3.0, 5.0]).unwrap();
    let inputs = CalibrationInputs::new(&cal, &risks, Some(&one), &one, grid).unwrap();
    let dr = dr_pseudo_outcomes(&inputs).unwrap();
    assert!(dr.subject_row(0).iter().all(|v| (*v - 1.0).abs() < 1e-12));
    // Uncensored event at 2 with S = G = 1: 1 - 1 = 0 from then on.
    assert_eq!(dr.get(0, 1), 1.0);
    assert!((dr.get(1, 1)).abs() < 1e-12);
    assert!((dr.get(3, 1)).abs() < 1e-12);
}

#[test]
fn valid_pseudo_outcomes_are_a_fixed_point() {
    let grid = TimeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
    let values = vec![
        0.9, 0.8, 0.8, // lowest risk
        0.9, 0.5, 0.2, //
        0.7, 0.5, 0.0,
    ];
    let pseudo = PseudoOutcomeMatrix {
        grid,
        method: Method::Dr,
        n_subjects: 3,
        values: values.clone(),
    };
    let s = surface_from_pseudo(&pseudo, &[0.0, 1.0, 2.0], &CalibrationConfig::default()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((s.entry(i, j) - values[i * 3 + j]).abs() < 1e-12);
        }
    }
    // Out-of-range values are clamped after projection.
    let pseudo = PseudoOutcomeMatrix {
        values: vec![1.4, 1.2, 1.1, -0.1, -0.2, -0.5, 0.5, 0.4, 0.3],
        ..pseudo
    };
    let s = surface_from_pseudo(&pseudo, &[0.0, 1.0, 2.0], &CalibrationConfig::default()).unwrap();
    assert!((0..3).all(|i| (0..3).all(|j| (0.0..=1.0).contains(&s.entry(i, j)))));
}

#[test]
fn two_subject_toy_matches_exact_oracle() {
    // Subject-major pseudo-outcomes: subject 0 is [1, 0], subject 1 is [0, 1].
    let grid = TimeGrid::new(vec![1.0, 2.0]).unwrap();
    let pseudo = PseudoOutcomeMatrix {
        grid,
        method: Method::Ht,
        n_subjects: 2,
        values: vec![1.0, 0.0, 0.0, 1.0],
    };
    let s = surface_from_pseudo(&pseudo, &[0.0, 1.0], &CalibrationConfig::default()).unwrap();
    let oracle = partition_projection(&[1.0, 0.0, 0.0, 1.0], 2, 2);
    for i in 0..2 {
        for j in 0..2 {
            assert!((s.entry(i, j) - oracle[i * 2 + j].clamp(0.0, 1.0)).abs() < 1e-9);
        }
    }
}

#[test]
fn every_estimator_yields_a_valid_surface() {
    let f = fitted(2, 2500, 0);
    let grid = build_time_grid(&f.train, &f.cal, 10_000).unwrap();
    let inputs = CalibrationInputs::new(&f.cal, &f.risks, Some(&f.s), &f.g, grid).unwrap();
    for method in Method::ALL {
        let s = fit_surface(&inputs, method, &CalibrationConfig::default()).unwrap();
        let k = s.grid().len();
        let flat: Vec<f64> = (0..s.n_rows()).flat_map(|i| s.row(i).to_vec()).collect();
        assert!(is_doubly_monotone(&flat, s.n_rows(), k, 1e-8), "{method}");
        assert!(flat.iter().all(|v| (0.0..=1.0).contains(v)));
        s.validate().unwrap();
    }
}

#[test]
fn predict_is_monotone_on_random_query_pairs() {
    let f = fitted(3, 600, 2);
    let grid = build_time_grid(&f.train, &f.cal, 2000).unwrap();
    let inputs = CalibrationInputs::new(&f.cal, &f.risks, Some(&f.s), &f.g, grid).unwrap();
    let (lo, hi) = f
        .risks
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
            (a.min(*r), b.max(*r))
        });
    for interpolation in [Interpolation::Bilinear, Interpolation::Step] {
        let config = CalibrationConfig {
            interpolation,
            ..CalibrationConfig::default()
        };
        let s = fit_surface(&inputs, Method::Dr, &config).unwrap();
        let t_max = s.grid().t_max();
        let mut draws = Draws::new(99, 0);
        for _ in 0..10_000 {
            let r1 = lo - 1.0 + (hi - lo + 2.0) * draws.uniform();
            let r2 = lo - 1.0 + (hi - lo + 2.0) * draws.uniform();
            let t1 = 1.1 * t_max * draws.uniform();
            let t2 = 1.1 * t_max * draws.uniform();
            let (ra, rb) = (r1.min(r2), r1.max(r2));
            let (ta, tb) = (t1.min(t2), t1.max(t2));
            assert!(s.predict(ra, t1) >= s.predict(rb, t1));
            assert!(s.predict(r1, ta) >= s.predict(r1, tb) - ULP_TOL);
            let v = s.predict(r1, t1);
            assert!((0.0..=1.0).contains(&v));
        }
        assert_eq!(s.predict(lo, 0.0), 1.0);
        assert_eq!(s.predict(lo - 5.0, t_max), s.entry(0, s.grid().len() - 1));
        let node = (s.sorted_risks()[7], s.grid().times()[40]);
        assert_eq!(s.predict(node.0, node.1), s.entry(7, 40));
    }
}

#[test]
fn calibrated_rankings_refine_risk_rankings() {
    let f = fitted(4, 800, 5);
    let grid = build_time_grid(&f.train, &f.cal, 1000).unwrap();
    let inputs = CalibrationInputs::new(&f.cal, &f.risks, Some(&f.s), &f.g, grid).unwrap();
    for method in Method::ALL {
        let s = fit_surface(&inputs, method, &CalibrationConfig::default()).unwrap();
        let mut risks = f.test_risks.clone();
        risks.push(risks[0]);
        let mut order: Vec<usize> = (0..risks.len()).collect();
        order.sort_by(|a, b| risks[*a].total_cmp(&risks[*b]));
        let k = s.grid().len();
        let curves: Vec<Vec<f64>> = order
            .iter()
            .map(|i| {
                let mut c = vec![0.0; k];
                s.curve_at_grid(risks[*i], &mut c);
                c
            })
            .collect();
        for j in 1..k - 1 {
            for w in 0..curves.len() - 1 {
                assert!(
                    curves[w + 1][j] <= curves[w][j],
                    "{method} inversion at column {j}"
                );
            }
        }
        let (a, b) = (risks.len() - 1, 0);
        let mut ca = vec![0.0; k];
        let mut cb = vec![0.0; k];
        s.curve_at_grid(risks[a], &mut ca);
        s.curve_at_grid(risks[b], &mut cb);
        assert_eq!(ca, cb);
    }
}

#[test]
fn dr_is_unbiased_with_true_survival_and_wrong_censoring_at_setting_one() {
    let setting = Setting::new(1).unwrap();
    let x = [2.0];
    let n = 50_000;
    let median = setting.mu(&x).exp();
    let mut cov = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    let mut ev = Draws::new(31, 1);
    let mut ce = Draws::new(31, 2);
    for _ in 0..n {
        let t = (setting.mu(&x) + setting.sigma(&x) * ev.normal()).exp();
        let c = ce.exponential(0.1);
        times.push(t.min(c));
        events.push(t <= c);
        cov.push(x[0]);
    }
    let ids: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
    let cal = SurvivalDataset::new(ids, times, events, vec!["x1".into()], cov.clone()).unwrap();
    let s = OracleCurves::new(setting, OracleRole::Event, cov.clone());
    let g = OracleCurves::new(setting, OracleRole::Censoring, cov).with_rate_scale(0.5);
    let grid = TimeGrid::new((1..=100).map(|k| k as f64 * median / 50.0).collect()).unwrap();
    let risks = scores(&cal, &vec![0.0; n]);
    let inputs = CalibrationInputs::new(&cal, &risks, Some(&s), &g, grid).unwrap();
    let dr = dr_pseudo_outcomes(&inputs).unwrap();
    let col = inputs.grid.position(median).unwrap();
    let vals: Vec<f64> = (0..n).map(|j| dr.get(col, j)).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = sd / (n as f64).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}, se {se}");
}

/// Mean over seeds of the largest DR surface error against the truth at
/// three fixed times, over risks between the 10th and 90th percentiles.
fn dr_sup_error(n_cal: usize, seeds: u64) -> f64 {
    let setting = Setting::new(1).unwrap();
    let times = [0.5, 1.0, 3.0];
    let grid = TimeGrid::new((1..=60).map(|k| k as f64 * 0.1).collect()).unwrap();
    let mut total = 0.0;
    for seed in 0..seeds {
        let data = generate(1, n_cal, 1000 + seed).unwrap();
        let cal = &data.dataset;
        let cov: Vec<f64> = (0..cal.len()).map(|i| cal.row(i)[0]).collect();
        let risk: Vec<f64> = cov.iter().map(|x| -setting.mu(&[*x])).collect();
        let risks = scores(cal, &risk);
        let s = OracleCurves::new(setting, OracleRole::Event, cov.clone());
        let g = OracleCurves::new(setting, OracleRole::Censoring, cov);
        let inputs = CalibrationInputs::new(cal, &risks, Some(&s), &g, grid.clone()).unwrap();
        let surface: CalibratedSurface =
            fit_surface(&inputs, Method::Dr, &CalibrationConfig::default()).unwrap();
        let mut worst: f64 = 0.0;
        for q in 1..=19 {
            let x = 0.4 + 3.2 * q as f64 / 20.0;
            let r = -setting.mu(&[x]);
            for t in times {
                worst = worst.max((surface.predict(r, t) - setting.survival(&[x], t)).abs());
            }
        }
        total += worst;
    }
    total / seeds as f64
}

#[test]
fn dr_surface_error_shrinks_with_calibration_size() {
    let errors: Vec<f64> = [500, 5_000, 50_000]
        .iter()
        .map(|n| dr_sup_error(*n, 20))
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}
