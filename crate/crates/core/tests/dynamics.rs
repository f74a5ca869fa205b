mod common;

use chrono::NaiveDate;
use common::*;
use nalgebra::DMatrix;
use spillover::dynamics::*;
use spillover::freqdomain::{parse_bands, spectral_gfevd, band_measures};
use spillover::ingest::{synth_var_panel, Transform, VolatilityPanel};
use spillover::timedomain::{dy_measures, gfevd};
use spillover::varcore::{fit_var, wold, VarModel};
use spillover::Execution;

fn connected_model() -> VarModel {
    VarModel::new(
        Some(nalgebra::DVector::from_vec(vec![0.1, -0.2, 0.05])),
        vec![
            from_rows(&[&[0.4, 0.2, 0.0], &[0.1, 0.3, 0.1], &[0.0, 0.2, 0.4]]),
            from_rows(&[&[0.1, 0.0, 0.05], &[0.0, 0.1, 0.0], &[0.05, 0.0, 0.1]]),
        ],
        from_rows(&[&[1.0, 0.3, 0.2], &[0.3, 1.0, 0.3], &[0.2, 0.3, 1.0]]),
        VarModel::default_names(3),
    )
    .unwrap()
}

fn config(window: usize, step: usize) -> RollingConfig {
    RollingConfig {
        window,
        step,
        spec: MeasureSpec {
            bands: parse_bands("1:5,5:inf").unwrap(),
            n_freq: 128,
            ..MeasureSpec::default()
        },
        ..RollingConfig::default()
    }
}

fn total_key() -> MeasureKey {
    MeasureKey::new("total", TIME_DOMAIN_BAND)
}

#[test]
fn window_count_follows_step() {
    let panel = synth_var_panel(&connected_model(), 300, 1).unwrap();
    let result = rolling_connectedness(&panel, &config(200, 10)).unwrap();
    assert_eq!(result.n_windows(), 11);
    assert_eq!(result.anchor_dates[0], panel.dates()[199]);
    assert_eq!(result.anchor_dates[10], panel.dates()[299]);
    assert!(result.series.iter().all(|s| s.points.len() == 11));
}

#[test]
fn single_window_equals_full_sample() {
    let panel = synth_var_panel(&connected_model(), 400, 2).unwrap();
    let cfg = config(400, 1);
    let result = rolling_connectedness(&panel, &cfg).unwrap();
    assert_eq!(result.n_windows(), 1);
    let model = fit_var(&panel, 2, true).unwrap();
    let expected = cfg.spec.evaluate(cfg.spec.basis().unwrap().as_ref(), &model).unwrap();
    let got: Vec<Option<f64>> = result.series.iter().map(|s| s.points[0].value).collect();
    assert_eq!(got, expected);
    let seq = wold(&model, 100).unwrap();
    let total = dy_measures(&gfevd(&model, &seq, 100).unwrap()).total;
    assert_eq!(result.get(&total_key()).unwrap().points[0].value, Some(total));
}

#[test]
fn reconstruction_holds_in_every_window() {
    let panel = synth_var_panel(&connected_model(), 700, 3).unwrap();
    let mut cfg = config(500, 20);
    cfg.spec.n_freq = 512;
    let result = rolling_connectedness(&panel, &cfg).unwrap();
    let total = result.get(&total_key()).unwrap();
    let short = result.get(&MeasureKey::new("absolute_total", "1–5 days")).unwrap();
    let long = result.get(&MeasureKey::new("absolute_total", "5+ days")).unwrap();
    for w in 0..result.n_windows() {
        let sum = short.points[w].value.unwrap() + long.points[w].value.unwrap();
        assert!((sum - total.points[w].value.unwrap()).abs() < 1e-6, "window {w}");
    }
}

#[test]
fn unstable_windows_become_gaps() {
    // A random walk in the second half cannot be fit stably by every window.
    let mut values = DMatrix::zeros(400, 2);
    let mut state = 0.0f64;
    for t in 0..400 {
        let shock = ((t * 7919) % 13) as f64 / 13.0 - 0.5;
        state = if t < 200 { 0.2 * state + shock } else { state + 1.0 };
        values[(t, 0)] = state;
        values[(t, 1)] = ((t * 104_729) % 17) as f64 / 17.0;
    }
    let dates = spillover::ingest::business_days(NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(), 400);
    let panel = VolatilityPanel::new(dates, vec!["A".into(), "B".into()], values, Transform::Raw).unwrap();
    let mut cfg = config(100, 50);
    cfg.p = 1;
    let result = rolling_connectedness(&panel, &cfg).unwrap();
    assert_eq!(result.n_windows(), 7);
    assert!(!result.gaps.is_empty());
    for gap in &result.gaps {
        let point = result.get(&total_key()).unwrap().points[gap.index];
        assert_eq!(point.value, None);
        assert_eq!(gap.anchor_date, result.anchor_dates[gap.index]);
    }
}

#[test]
fn rolling_mean_centres_on_truth() {
    let model = connected_model();
    let seq = wold(&model, 100).unwrap();
    let truth = dy_measures(&gfevd(&model, &seq, 100).unwrap()).total;
    let grid = spectral_gfevd(&model, &seq, 512).unwrap();
    let bands = parse_bands("1:5,5:inf").unwrap();
    let band_total: f64 = bands.iter().map(|b| band_measures(&grid, b).unwrap().absolute_total).sum();
    assert!((band_total - truth).abs() < 1e-6);

    // Non-overlapping windows make the window estimates independent.
    let window = 2000;
    let n = 40;
    let panel = synth_var_panel(&model, window * n, 11).unwrap();
    let mut cfg = config(window, window);
    cfg.spec = MeasureSpec::total_only(100);
    let result = rolling_connectedness(&panel, &cfg).unwrap();
    let est: Vec<f64> = result.get(&total_key()).unwrap().points.iter().map(|p| p.value.unwrap()).collect();
    let mean = est.iter().sum::<f64>() / n as f64;
    let sd = (est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let se = sd / (n as f64).sqrt();
    assert!((mean - truth).abs() < 3.0 * se, "mean {mean}, truth {truth}, se {se}");
}

#[test]
fn bootstrap_is_deterministic_nested_and_covers_the_point() {
    let model = connected_model();
    let spec = MeasureSpec::total_only(100);
    let cfg = BootstrapConfig {
        replications: 400,
        significance: 0.10,
        seed: 77,
        execution: Execution::Parallel,
    };
    let a = bootstrap_draws(&model, 500, &spec, &cfg).unwrap();
    let b = bootstrap_draws(&model, 500, &spec, &BootstrapConfig { execution: Execution::Sequential, ..cfg }).unwrap();
    assert_eq!(a, b);
    let wide = a.bands(0.10);
    let narrow = a.bands(0.50);
    assert!(wide.lower[0].unwrap() <= narrow.lower[0].unwrap());
    assert!(narrow.upper[0].unwrap() <= wide.upper[0].unwrap());
    let seq = wold(&model, 100).unwrap();
    let point = dy_measures(&gfevd(&model, &seq, 100).unwrap()).total;
    assert!(wide.lower[0].unwrap() <= point && point <= wide.upper[0].unwrap());

    let other = bootstrap_draws(&model, 500, &spec, &BootstrapConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(a, other);
}

#[test]
fn bootstrap_validates_its_configuration() {
    let spec = MeasureSpec::total_only(100);
    let few = BootstrapConfig { replications: 50, ..BootstrapConfig::default() };
    assert!(bootstrap_draws(&connected_model(), 500, &spec, &few).is_err());
    let bad = BootstrapConfig { significance: 1.5, ..BootstrapConfig::default() };
    assert!(bootstrap_draws(&connected_model(), 500, &spec, &bad).is_err());
}

#[test]
fn rolling_bands_are_reproducible_and_contain_points() {
    let panel = synth_var_panel(&connected_model(), 560, 5).unwrap();
    let mut cfg = config(500, 20);
    cfg.spec.directional = false;
    cfg.bootstrap = Some(BootstrapConfig { replications: 100, seed: 3, ..BootstrapConfig::default() });
    let a = rolling_connectedness(&panel, &cfg).unwrap();
    let b = rolling_connectedness(&panel, &cfg).unwrap();
    assert_eq!(a, b);
    for s in &a.series {
        for p in &s.points {
            let (v, lo, hi) = (p.value.unwrap(), p.lower.unwrap(), p.upper.unwrap());
            assert!(lo <= v && v <= hi, "{:?}", s.key);
        }
    }
}

#[test]
fn flat_spectrum_within_ratio_is_one() {
    let model = VarModel::new(
        None,
        vec![DMatrix::zeros(2, 2)],
        from_rows(&[&[1.0, 0.6], &[0.6, 1.0]]),
        VarModel::default_names(2),
    )
    .unwrap();
    let panel = synth_var_panel(&model, 1500, 8).unwrap();
    let mut cfg = config(500, 50);
    cfg.p = 1;
    let result = rolling_connectedness(&panel, &cfg).unwrap();
    let ratios = ratio_series(
        &result,
        &MeasureKey::new("within_total", "1–5 days"),
        &MeasureKey::new("within_total", "5+ days"),
    )
    .unwrap();
    for (_, r) in &ratios {
        // Estimated lag coefficients are O(1/sqrt(500)), so so is the tilt.
        assert!((r.unwrap() - 1.0).abs() < 0.15, "{r:?}");
    }
    let mean = ratios.iter().map(|(_, r)| r.unwrap()).sum::<f64>() / ratios.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

fn toy_result(num: &[f64], den: &[f64]) -> RollingResult {
    let dates = spillover::ingest::business_days(NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(), num.len());
    let series = |name: &str, v: &[f64]| Series {
        key: MeasureKey::new("within_total", name),
        points: v.iter().map(|&x| SeriesPoint { value: Some(x), lower: None, upper: None }).collect(),
    };
    RollingResult {
        window_length: 10,
        step: 1,
        anchor_dates: dates,
        series: vec![series("short", num), series("long", den)],
        bands_used: Vec::new(),
        bootstrap_meta: None,
        gaps: Vec::new(),
        events: Vec::new(),
    }
}

#[test]
fn ratio_edge_cases_and_trend_scale_invariance() {
    let short = MeasureKey::new("within_total", "short");
    let long = MeasureKey::new("within_total", "long");
    let num = [0.2, 0.25, 0.22, 0.3, 0.28];
    let den = [0.4, 0.41, 0.39, 0.42, 0.0];
    let base = toy_result(&num, &den);
    let ratios = ratio_series(&base, &short, &long).unwrap();
    assert_eq!(ratios[4].1, None);
    let same = ratio_series(&toy_result(&num, &num), &short, &long).unwrap();
    assert!(same.iter().all(|(_, r)| *r == Some(1.0)));
    let zeros = ratio_series(&toy_result(&[0.0; 5], &den), &short, &long).unwrap();
    assert!(zeros[..4].iter().all(|(_, r)| *r == Some(0.0)));
    assert!(ratio_series(&base, &MeasureKey::new("nope", "short"), &long).is_err());

    let c = 3.7;
    let scaled = toy_result(&num.map(|v| v * c), &den.map(|v| v * c));
    let t0 = linear_trend(&ratios).unwrap();
    let t1 = linear_trend(&ratio_series(&scaled, &short, &long).unwrap()).unwrap();
    assert!((t0.slope - t1.slope).abs() < 1e-12);
    assert!((t0.intercept - t1.intercept).abs() < 1e-12);
    assert!((t0.r_squared - t1.r_squared).abs() < 1e-12);
    assert_eq!(t0.n_points, 4);
}

#[test]
fn linear_trend_hand_cases() {
    let d = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let s = |v: &[f64]| v.iter().map(|&x| (d, Some(x))).collect::<Vec<_>>();
    let fit = linear_trend(&s(&[1.0, 2.0, 3.0])).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-15 && (fit.r_squared - 1.0).abs() < 1e-15);
    let flat = linear_trend(&s(&[4.0, 4.0, 4.0])).unwrap();
    assert_eq!((flat.slope, flat.r_squared), (0.0, 0.0));
    let zigzag = linear_trend(&s(&[0.0, 1.0, 0.0, 1.0])).unwrap();
    assert!((zigzag.slope - 0.2).abs() < 1e-15 && (zigzag.intercept - 0.2).abs() < 1e-15);
    assert!(linear_trend(&[(d, None), (d, None)]).is_err());
}

#[test]
fn annotate_only_attaches_metadata() {
    let panel = synth_var_panel(&connected_model(), 320, 4).unwrap();
    let result = rolling_connectedness(&panel, &config(300, 5)).unwrap();
    let csv = format!(
        "date,label\n{},on anchor\n1990-01-01,too early\n",
        result.anchor_dates[2]
    );
    let events = read_events_csv(csv.as_bytes()).unwrap();
    let annotated = annotate(&result, &events);
    assert_eq!(annotated.series, result.series);
    assert_eq!(annotated.anchor_dates, result.anchor_dates);
    assert_eq!(annotated.events[0].anchor_index, Some(2));
    assert_eq!(annotated.events[1].anchor_index, None);
}

#[test]
fn csv_output_is_long_format() {
    let panel = synth_var_panel(&connected_model(), 310, 4).unwrap();
    let mut cfg = config(300, 5);
    cfg.spec.directional = false;
    let result = rolling_connectedness(&panel, &cfg).unwrap();
    let mut buf = Vec::new();
    write_rolling_csv(&result, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("date,measure,band,value,lower,upper"));
    assert_eq!(lines.count(), result.series.len() * result.n_windows());
}

#[test]
fn sequential_and_parallel_agree() {
    let panel = synth_var_panel(&connected_model(), 600, 6).unwrap();
    let mut cfg = config(500, 10);
    cfg.execution = Execution::Sequential;
    let seq = rolling_connectedness(&panel, &cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let par = rolling_connectedness(&panel, &cfg).unwrap();
    assert_eq!(seq, par);
}
