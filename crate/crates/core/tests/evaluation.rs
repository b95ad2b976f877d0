mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use gridcast::evalreport::{
    compute_metrics, control_model_eval, detect_heatwaves, nodewise_mae, persistence_baseline,
    Climatology, Forecasts, HeatwaveDefinition, HeatwaveMode, RunReport, Provenance,
};
use gridcast::griddata::{generate_synthetic, make_windows, GridDomain, SynthConfig};
use gridcast::train::{Experiment, ModelInputs, TargetScale};

use common::{heatwave_oracle, load_config, naive_metrics, oracle_percentile};

const UNIT: TargetScale = TargetScale { mean: 273.15, std: 1.0 };

/// Single-feature inputs whose target (°C under `UNIT`) is `f(t, node)`; hour of day is `t % 24`.
fn inputs_from(n_times: usize, n_nodes: usize, f: impl Fn(usize, usize) -> f64) -> ModelInputs {
    let target: Vec<f64> = (0..n_times)
        .flat_map(|t| (0..n_nodes).map(move |n| (t, n)))
        .map(|(t, n)| f(t, n))
        .collect();
    let hours = (0..n_times).map(|t| (t % 24) as u32).collect();
    ModelInputs::new(n_nodes, 1, target.clone(), target, UNIT, hours).unwrap()
}

#[test]
fn persistence_on_a_daily_sinusoid() {
    let amp = 3.0;
    let inputs = inputs_from(400, 2, |t, _| amp * (2.0 * PI * t as f64 / 24.0).sin());
    let idx = make_windows(0..400, 24, &[12, 24]).unwrap();
    let target = Forecasts::targets(&inputs, &idx);
    let r = compute_metrics(&persistence_baseline(&inputs, &idx), &target, UNIT, &[12, 24], "p").unwrap();
    assert!(r.mae_c[1] < 1e-12, "{}", r.mae_c[1]);
    // half a period later the sign flips: |x - (-x)| = 2|x|
    let want: f64 = idx
        .anchors
        .iter()
        .map(|&a| 2.0 * amp * (2.0 * PI * a as f64 / 24.0).sin().abs())
        .sum::<f64>()
        / idx.len() as f64;
    assert!((r.mae_c[0] - want).abs() < 1e-9);
    assert!((r.mae_c[0] - 4.0 * amp / PI).abs() < 0.05);
}

#[test]
fn persistence_repeats_the_last_value_at_every_horizon() {
    let inputs = inputs_from(120, 3, |t, n| (t * 3 + n) as f64 * 0.1);
    let idx = make_windows(0..120, 10, &[1, 5, 9]).unwrap();
    let p = persistence_baseline(&inputs, &idx);
    for (s, &a) in idx.anchors.iter().enumerate() {
        for n in 0..3 {
            for k in 0..3 {
                assert_eq!(p.get(s, k, n), inputs.target(a, n));
            }
        }
    }
    let flat = inputs_from(120, 3, |_, _| 4.0);
    let r = compute_metrics(
        &persistence_baseline(&flat, &idx),
        &Forecasts::targets(&flat, &idx),
        UNIT,
        &[1, 5, 9],
        "p",
    )
    .unwrap();
    assert!(r.mae_c.iter().all(|&m| m == 0.0));
}

fn hourly_profile(h: usize, n: usize) -> f64 {
    5.0 * (2.0 * PI * h as f64 / 24.0).cos() + n as f64
}

#[test]
fn climatology_recovers_an_exact_daily_cycle() {
    let inputs = inputs_from(24 * 30, 4, |t, n| hourly_profile(t % 24, n));
    let idx = make_windows(24 * 20..24 * 30, 24, &[1, 13, 48]).unwrap();
    let f = Climatology::fit(&inputs, 0..24 * 20).unwrap().predict(&inputs, &idx).unwrap();
    let r = compute_metrics(&f, &Forecasts::targets(&inputs, &idx), UNIT, &[1, 13, 48], "c").unwrap();
    assert!(r.mae_c.iter().all(|&m| m < 1e-12), "{:?}", r.mae_c);
}

#[test]
fn climatology_error_matches_half_normal_mean() {
    let sigma = 0.8;
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws: Vec<f64> = (0..24 * 400 * 3).map(|_| noise.sample(&mut rng)).collect();
    let inputs = inputs_from(24 * 400, 3, |t, n| hourly_profile(t % 24, n) + draws[t * 3 + n]);
    let train = 0..24 * 300;
    let idx = make_windows(24 * 300..24 * 400, 24, &[1, 6, 24]).unwrap();
    let f = Climatology::fit(&inputs, train).unwrap().predict(&inputs, &idx).unwrap();
    let r = compute_metrics(&f, &Forecasts::targets(&inputs, &idx), UNIT, &[1, 6, 24], "c").unwrap();
    let expected = sigma * (2.0 / PI).sqrt();
    for m in &r.mae_c {
        assert!((m - expected).abs() / expected < 0.10, "{m} vs {expected}");
    }
}

#[test]
fn climatology_buckets_ignore_test_values() {
    let base = inputs_from(24 * 10, 2, |t, n| hourly_profile(t % 24, n) + (t % 7) as f64);
    let changed = inputs_from(24 * 10, 2, |t, n| {
        let v = hourly_profile(t % 24, n) + (t % 7) as f64;
        if t >= 24 * 7 { v + 50.0 } else { v }
    });
    let a = Climatology::fit(&base, 0..24 * 7).unwrap();
    let b = Climatology::fit(&changed, 0..24 * 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn node_map_averages_to_the_overall_mae() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let (s, k, n) = (9, 4, 11);
    let p: Vec<f64> = (0..s * k * n).map(|_| noise.sample(&mut rng)).collect();
    let t: Vec<f64> = (0..s * k * n).map(|_| noise.sample(&mut rng)).collect();
    let (pf, tf) = (Forecasts::new(s, k, n, p).unwrap(), Forecasts::new(s, k, n, t).unwrap());
    let r = compute_metrics(&pf, &tf, UNIT, &[1, 2, 3, 4], "x").unwrap();
    let nodes = nodewise_mae(&pf, &tf, UNIT).unwrap();
    let avg = nodes.iter().sum::<f64>() / n as f64;
    assert!((avg - r.mean_mae_c).abs() < 1e-12);
}

#[test]
fn control_is_deterministic_and_near_the_mean_predictor() {
    let dom = GridDomain::region_a(12, 12).unwrap();
    let d = generate_synthetic(&dom, 700, 1, 42, &SynthConfig::default()).unwrap();
    let cfg = load_config("desk.cfg");
    let ex = Experiment::prepare(&d, &cfg).unwrap();
    let a = control_model_eval(&ex, &cfg).unwrap();
    let b = control_model_eval(&ex, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.control);
    // the training-mean forecast is the standardized zero field
    let target = Forecasts::targets(&ex.inputs, &ex.test);
    let zero = Forecasts::new(
        target.n_samples(),
        target.n_horizons(),
        target.n_nodes(),
        vec![0.0; target.values().len()],
    )
    .unwrap();
    let mean = compute_metrics(&zero, &target, ex.inputs.scale(), &cfg.horizons, "mean").unwrap();
    let rel = (a.mean_mae_c - mean.mean_mae_c).abs() / mean.mean_mae_c;
    assert!(rel < 0.20, "control {} vs mean predictor {}", a.mean_mae_c, mean.mean_mae_c);
}

#[test]
fn report_json_round_trip() {
    let inputs = inputs_from(100, 2, |t, n| (t + n) as f64 * 0.01);
    let idx = make_windows(0..100, 24, &[1, 6]).unwrap();
    let m = compute_metrics(
        &persistence_baseline(&inputs, &idx),
        &Forecasts::targets(&inputs, &idx),
        UNIT,
        &[1, 6],
        "persistence",
    )
    .unwrap();
    let r = RunReport::new(load_config("desk.cfg"), m.clone(), vec![m], Provenance::new("ab".into(), None));
    assert_eq!(RunReport::from_json(&r.to_json()).unwrap(), r);
}

fn series_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4, 1usize..30).prop_flat_map(|(nodes, days)| {
        prop::collection::vec(prop::collection::vec((40i32..72).prop_map(|v| v as f64 / 2.0), days), nodes)
    })
}

proptest! {
    #[test]
    fn metrics_match_naive_oracle(
        s in 1usize..8, k in 1usize..5, n in 1usize..9,
        mean in 250.0..310.0f64, std in 0.1..12.0f64, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.5).unwrap();
        let p: Vec<f64> = (0..s * k * n).map(|_| noise.sample(&mut rng)).collect();
        let t: Vec<f64> = (0..s * k * n).map(|_| noise.sample(&mut rng)).collect();
        let scale = TargetScale { mean, std };
        let hours: Vec<u32> = (1..=k as u32).collect();
        let r = compute_metrics(
            &Forecasts::new(s, k, n, p.clone()).unwrap(),
            &Forecasts::new(s, k, n, t.clone()).unwrap(),
            scale, &hours, "x",
        ).unwrap();
        let (mae, rmse) = naive_metrics(&p, &t, (s, k, n), mean, std);
        for i in 0..k {
            prop_assert!((r.mae_c[i] - mae[i]).abs() <= 1e-12);
            prop_assert!((r.rmse_c[i] - rmse[i]).abs() <= 1e-12);
            prop_assert!(r.rmse_c[i] >= r.mae_c[i]);
        }
    }

    #[test]
    fn absolute_heatwaves_match_enumeration(series in series_strategy(), thr in 22.0..34.0f64, d in 1usize..5) {
        let min_days = d.min(series[0].len());
        let def = HeatwaveDefinition { mode: HeatwaveMode::Absolute { threshold_c: thr }, min_days };
        let got: Vec<_> = detect_heatwaves(&series, &def, None).unwrap()
            .into_iter().map(|e| (e.node, e.start_day, e.length_days, e.peak_c)).collect();
        prop_assert_eq!(got, heatwave_oracle(&series, &vec![thr; series.len()], min_days));
    }

    #[test]
    fn percentile_heatwaves_match_enumeration(series in series_strategy(), p in 1.0..99.0f64, d in 1usize..5) {
        let min_days = d.min(series[0].len());
        let def = HeatwaveDefinition { mode: HeatwaveMode::Percentile { percentile: p }, min_days };
        let thr: Vec<f64> = series.iter().map(|s| oracle_percentile(s, p)).collect();
        let got: Vec<_> = detect_heatwaves(&series, &def, Some(&series)).unwrap()
            .into_iter().map(|e| (e.node, e.start_day, e.length_days, e.peak_c)).collect();
        prop_assert_eq!(got, heatwave_oracle(&series, &thr, min_days));
    }
}
