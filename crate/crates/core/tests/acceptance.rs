//! Release gate: runs the ten acceptance criteria in order and prints one
//! PASS/FAIL line per criterion. Set `GRIDCAST_ACCEPTANCE=3,6` to run a subset.

mod common;

use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridcast::embedpath::{
    build_embedding_dataset, encode_record, pca_fit, pca_reconstruct, pca_transform, textualize,
    Observation, PcaModel, StubEncoder,
};
use gridcast::evalreport::{
    baseline_reports, compute_metrics, control_model_eval, detect_heatwaves, evaluate_model,
    EvalReport, Forecasts, HeatwaveDefinition, HeatwaveMode,
};
use gridcast::geograph::{build_graph, normalize_adjacency, Graph};
use gridcast::griddata::{split_len, GridDomain, SplitSpec};
use gridcast::model::{init_params, loss_and_gradients, ModelConfig, Sample};
use gridcast::numcore::{grad_check, Matrix, Parameters};
use gridcast::train::{Experiment, TargetScale, TrainConfig};

use common::*;

/// Skill runs: epoch budgets fixed so each stays inside its runtime limit single-threaded.
const SKILL_EPOCHS_1H: usize = 8;
const SKILL_EPOCHS_6H: usize = 60;
const EMBED_EPOCHS: usize = 4;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit_s: u64, started: Instant) -> (bool, String) {
    let took = started.elapsed();
    (
        took <= Duration::from_secs(limit_s),
        format!("{:.1}s of {limit_s}s", took.as_secs_f64()),
    )
}

// 1

fn gradient_suite() -> Verdict {
    let started = Instant::now();
    let cfg = ModelConfig {
        n_features: 6,
        hidden: 8,
        gcn_layers: 2,
        window: 4,
        horizons: vec![1, 6, 12],
    };
    let dom = GridDomain::with_spacing_km(43.0, -81.0, 3, 3, 2.5).unwrap();
    let adj = normalize_adjacency(&build_graph(&dom, 4.0).unwrap());
    let mut worst = (0.0f64, String::new());
    for seed in [11u64, 12, 13] {
        let params = init_params(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_m = |r: usize, c: usize| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-2.0..2.0)).collect())
                .unwrap()
        };
        let batch: Vec<Sample> = (0..3)
            .map(|_| Sample {
                window: (0..4).map(|_| rand_m(9, 6)).collect(),
                target: rand_m(9, 3),
            })
            .collect();
        let (_, grads) = loss_and_gradients(&batch, &adj, &params, &cfg).unwrap();
        let names = params.names();
        let flat = params.flatten();
        let gflat = grads.flatten();
        let mut off = 0;
        for (g, tensor) in params.tensors().iter().enumerate() {
            let len = tensor.len();
            let range = off..off + len;
            off += len;
            let mut probe = params.clone();
            let mut full = flat.clone();
            let r = grad_check(
                |sub| {
                    full[range.clone()].copy_from_slice(sub);
                    probe.assign_flat(&full);
                    loss_and_gradients(&batch, &adj, &probe, &cfg).unwrap().0
                },
                &flat[range.clone()],
                &gflat[range.clone()],
                1e-5,
            )
            .unwrap();
            if r.max_rel_error >= worst.0 {
                worst = (r.max_rel_error, format!("{} seed {seed}", names[g]));
            }
        }
    }
    let (fast, took) = within(60, started);
    check(
        worst.0 < 1e-4 && fast,
        format!("every group x 3 seeds, worst {:.2e} at {}; {took}", worst.0, worst.1),
    )
}

// 2

fn graph_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut max_eig = 0.0f64;
    let mut eig_checked = 0;
    for case in 0..50 {
        let n_lat = rng.random_range(2..=8);
        let n_lon = rng.random_range(2..=8);
        let lat0 = rng.random_range(-70.0..70.0);
        let lon0 = rng.random_range(-179.0..170.0);
        let span = rng.random_range(0.02..0.6);
        let dom = GridDomain::new(
            lat0,
            lat0 + span,
            lon0,
            lon0 + span * rng.random_range(0.5..2.0),
            n_lat,
            n_lon,
        )
        .unwrap();
        let dist = rng.random_range(0.5..40.0);
        let g = build_graph(&dom, dist).unwrap();
        let got: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        let want = brute_force_edges(&dom.all_coords(), dist);
        if got != want {
            return Err(format!("case {case}: {} edges vs {} by brute force", got.len(), want.len()));
        }
        if g.node_count() <= 64 {
            let lam = dense_eigenvalues(&g);
            max_eig = lam.iter().fold(max_eig, |m, v| m.max(v.abs()));
            eig_checked += 1;
        }
    }
    let (fast, took) = within(30, started);
    check(
        max_eig <= 1.0 + 1e-10 && fast,
        format!("50 domains match, {eig_checked} spectra with max |lambda| {max_eig:.12}; {took}"),
    )
}

fn dense_eigenvalues(g: &Graph) -> Vec<f64> {
    let a = normalize_adjacency(g).csr().to_dense();
    let n = a.rows();
    let m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
}

// 3

fn split_reproduction() -> Verdict {
    let r = split_len(26_281, &SplitSpec::default()).map_err(|e| e.to_string())?;
    check(r.lens() == (18_396, 3_942, 3_943), format!("{:?}", r.lens()))
}

// 4 and 5

struct SkillRun {
    model: EvalReport,
    persistence: EvalReport,
    control: EvalReport,
}

fn skill_run(cfg: &TrainConfig) -> SkillRun {
    let ex = Experiment::prepare(&skill_dataset(), cfg).unwrap();
    let outcome = ex.train(cfg, |_| {}).unwrap();
    let model = evaluate_model(&ex, cfg, &outcome.params, "gcn-gru").unwrap();
    let persistence = baseline_reports(&ex, cfg).unwrap().remove(0);
    let control = control_model_eval(&ex, cfg).unwrap();
    SkillRun {
        model,
        persistence,
        control,
    }
}

fn hourly_config() -> TrainConfig {
    let mut cfg = load_config("region_c.cfg");
    cfg.max_epochs = SKILL_EPOCHS_1H;
    cfg
}

fn synthetic_skill(hourly: &mut Option<SkillRun>) -> Verdict {
    let started = Instant::now();
    let run = skill_run(&hourly_config());
    let (fast, took) = within(600, started);
    let m = &run.model;
    let mut ok = fast;
    let mut rows = Vec::new();
    for (k, &h) in m.horizons_hours.iter().enumerate() {
        let beats_control = m.mae_c[k] < run.control.mae_c[k];
        let beats_persistence = h < 12 || m.mae_c[k] < run.persistence.mae_c[k];
        ok &= beats_control && beats_persistence;
        rows.push(format!(
            "{h}h {:.2}/{:.2}/{:.2}",
            m.mae_c[k], run.persistence.mae_c[k], run.control.mae_c[k]
        ));
    }
    let detail = format!(
        "MAE C model/persistence/control: {}; mean {:.3} vs control {:.3}; {took}",
        rows.join(", "),
        m.mean_mae_c,
        run.control.mean_mae_c
    );
    *hourly = Some(run);
    check(ok, detail)
}

fn six_hour_variant(hourly: &mut Option<SkillRun>) -> Verdict {
    let base = match hourly {
        Some(r) => r.model.mean_mae_c,
        None => skill_run(&hourly_config()).model.mean_mae_c,
    };
    let started = Instant::now();
    let mut cfg = load_config("region_c_6hr.cfg");
    cfg.max_epochs = SKILL_EPOCHS_6H;
    let run = skill_run(&cfg);
    let (fast, took) = within(300, started);
    let horizons_ok = run.model.horizons_hours == vec![6, 12, 18, 24, 36, 48];
    let rel = (run.model.mean_mae_c - base).abs() / base;
    check(
        horizons_ok && rel <= 0.5 && fast,
        format!(
            "horizons {:?}, mean MAE {:.3} vs hourly {:.3} ({:.0}% apart); {took}",
            run.model.horizons_hours,
            run.model.mean_mae_c,
            base,
            rel * 100.0
        ),
    )
}

// 6

fn metrics_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut rmse_ok = true;
    for _ in 0..100 {
        let shape = (
            rng.random_range(1..20),
            rng.random_range(1..8),
            rng.random_range(1..30),
        );
        let len = shape.0 * shape.1 * shape.2;
        let scale = TargetScale {
            mean: rng.random_range(250.0..310.0),
            std: rng.random_range(0.5..15.0),
        };
        let pred: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let target: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let hours: Vec<u32> = (1..=shape.1 as u32).collect();
        let r = compute_metrics(
            &Forecasts::new(shape.0, shape.1, shape.2, pred.clone()).unwrap(),
            &Forecasts::new(shape.0, shape.1, shape.2, target.clone()).unwrap(),
            scale,
            &hours,
            "random",
        )
        .unwrap();
        let (mae, rmse) = naive_metrics(&pred, &target, shape, scale.mean, scale.std);
        for k in 0..shape.1 {
            worst = worst
                .max((r.mae_c[k] - mae[k]).abs())
                .max((r.rmse_c[k] - rmse[k]).abs());
            rmse_ok &= r.rmse_c[k] >= r.mae_c[k];
        }
        let mean = mae.iter().sum::<f64>() / mae.len() as f64;
        worst = worst.max((r.mean_mae_c - mean).abs());
    }
    let (fast, took) = within(10, started);
    check(
        worst <= 1e-12 && rmse_ok && fast,
        format!("100 instances, max deviation {worst:.1e}, rmse >= mae: {rmse_ok}; {took}"),
    )
}

// 7

fn embedding_pathway() -> Verdict {
    let started = Instant::now();
    let mut cfg = load_config("region_c.cfg");
    cfg.max_epochs = EMBED_EPOCHS;
    cfg.embed_components = 6;
    let ex = Experiment::prepare(&skill_dataset(), &cfg).unwrap();
    let encoder = StubEncoder::new(cfg.seed);
    let emb =
        build_embedding_dataset(&ex.dataset, &encoder, 6, &ex.splits, ex.inputs.scale()).unwrap();
    let orth = orthonormality_error(&emb.pca);
    let ev = &emb.pca.explained_variance;
    let nonincreasing = ev.windows(2).all(|w| w[0] >= w[1]);
    let ex = ex.with_inputs(emb.inputs).unwrap();
    let outcome = ex.train(&cfg, |_| {}).unwrap();
    let trained = evaluate_model(&ex, &cfg, &outcome.params, "embeddings").unwrap();
    let control = control_model_eval(&ex, &cfg).unwrap();
    let recon = full_rank_reconstruction(&ex);
    let (fast, took) = within(600, started);
    check(
        trained.mean_mae_c < control.mean_mae_c
            && orth <= 1e-10
            && nonincreasing
            && recon <= 1e-8
            && fast,
        format!(
            "mean MAE {:.3} vs control {:.3}; orthonormality {orth:.1e}, variance nonincreasing: \
             {nonincreasing}, reconstruction {recon:.1e}; {took}",
            trained.mean_mae_c, control.mean_mae_c
        ),
    )
}

fn orthonormality_error(m: &PcaModel) -> f64 {
    let c = &m.components;
    let g = c.matmul_tn(c).unwrap();
    let mut worst = 0.0f64;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g.get(i, j) - want).abs());
        }
    }
    worst
}

/// Fits as many components as the centered rows have rank and measures the round trip.
fn full_rank_reconstruction(ex: &Experiment) -> f64 {
    let encoder = StubEncoder::new(0);
    let rows: Vec<f64> = (0..24)
        .flat_map(|t| encode_record(&ex.dataset, t * 7, t % 144, &encoder).unwrap().as_slice().to_vec())
        .collect();
    let x = Matrix::from_vec(24, 768, rows).unwrap();
    let centered = DMatrix::from_fn(24, 768, |i, j| {
        let mean: f64 = (0..24).map(|r| x.get(r, j)).sum::<f64>() / 24.0;
        x.get(i, j) - mean
    });
    let sv = centered.singular_values();
    let top = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-8 * top).count();
    let m = pca_fit(&x, rank).unwrap();
    let back = pca_reconstruct(&pca_transform(&x, &m).unwrap(), &m).unwrap();
    back.zip_map(&x, |a, b| a - b).unwrap().max_abs()
}

// 8

fn heatwave_oracle_check() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut events = 0;
    for case in 0..1000 {
        let nodes = rng.random_range(1..4);
        let days = rng.random_range(1..40);
        let min_days = rng.random_range(1..=days.min(5));
        let series: Vec<Vec<f64>> = (0..nodes)
            .map(|_| (0..days).map(|_| (rng.random_range(20.0..36.0f64) * 2.0).round() / 2.0).collect())
            .collect();
        let (def, reference, thresholds) = if case % 2 == 0 {
            let t = (rng.random_range(24.0..32.0f64) * 2.0).round() / 2.0;
            let def = HeatwaveDefinition {
                mode: HeatwaveMode::Absolute { threshold_c: t },
                min_days,
            };
            (def, None, vec![t; nodes])
        } else {
            let p = rng.random_range(50.0..99.0);
            let reference: Vec<Vec<f64>> = (0..nodes)
                .map(|_| (0..rng.random_range(1..60)).map(|_| rng.random_range(18.0..34.0)).collect())
                .collect();
            let thr = reference.iter().map(|r| oracle_percentile(r, p)).collect();
            let def = HeatwaveDefinition {
                mode: HeatwaveMode::Percentile { percentile: p },
                min_days,
            };
            (def, Some(reference), thr)
        };
        let got: Vec<(usize, usize, usize, f64)> =
            detect_heatwaves(&series, &def, reference.as_deref())
                .map_err(|e| format!("case {case}: {e}"))?
                .into_iter()
                .map(|e| (e.node, e.start_day, e.length_days, e.peak_c))
                .collect();
        let want = heatwave_oracle(&series, &thresholds, min_days);
        if got != want {
            return Err(format!("case {case}: {got:?} vs oracle {want:?}"));
        }
        events += got.len();
    }
    let (fast, took) = within(10, started);
    check(fast, format!("1000 series (absolute and percentile), {events} events agree; {took}"))
}

// 9

fn cli(args: &[&str]) {
    gridcast::cli::run(args.iter().map(Into::into).collect())
        .unwrap_or_else(|e| panic!("gridcast {}: {e}", args.join(" ")));
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}

fn replay_determinism() -> Verdict {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    let desk = config_path("desk.cfg").to_string_lossy().into_owned();
    cli(&["synth", "--out", &p("synth"), "--seed", "9", "--steps", "600"]);
    cli(&["ingest", "--input", &p("synth/dataset.gcd"), "--out", &p("ingest")]);
    let data = p("ingest/dataset.gcd");
    cli(&["build-graph", "--input", &data, "--config", &desk, "--out", &p("graph")]);
    cli(&["train", "--input", &data, "--config", &desk, "--out", &p("train")]);
    let ckpt = p("train/checkpoint.gckpt");
    cli(&["evaluate", "--input", &data, "--config", &desk, "--checkpoint", &ckpt, "--out", &p("eval")]);

    let mut compared = Vec::new();
    for (stage, files) in [
        ("synth", &["dataset.gcd"][..]),
        ("ingest", &["dataset.gcd", "ingest.json"][..]),
        ("graph", &["graph.edges", "graph.json"][..]),
        ("train", &["checkpoint.gckpt", "config.cfg"][..]),
        ("eval", &["report.json", "node_mae.csv", "node_mae.pgm"][..]),
    ] {
        let again = format!("{stage}_replay");
        cli(&["replay", "--manifest", &p(&format!("{stage}/manifest.json")), "--out", &p(&again)]);
        for f in files {
            let a = tmp.path().join(stage).join(f);
            let b = tmp.path().join(&again).join(f);
            if !same_bytes(&a, &b) {
                return Err(format!("{stage}/{f} differs after replay"));
            }
            compared.push(format!("{stage}/{f}"));
        }
    }
    let took = started.elapsed().as_secs_f64();
    check(true, format!("{} artifacts byte-identical on replay; {took:.1}s", compared.len()))
}

// 10

fn textualization() -> Verdict {
    let o = Observation {
        t2m: 291.6,
        d2m: 283.7,
        u10: 4.0,
        v10: -2.1,
        sp: 99209.0,
        orog: 172.0,
    };
    let want = "temperature is 291.6 K, dew point is 283.7 K, u wind component is 4.0 m/s, \
                v wind component is -2.1 m/s, surface pressure is 99209 Pa, elevation is 172.0 meters.";
    let got = textualize(&o);
    check(got == want, got)
}

fn selected() -> Vec<usize> {
    match std::env::var("GRIDCAST_ACCEPTANCE") {
        Ok(s) if !s.trim().is_empty() => s
            .split(',')
            .map(|c| c.trim().parse().expect("criterion numbers"))
            .collect(),
        _ => (1..=10).collect(),
    }
}

/// Written straight to the process stderr so the lines survive output capture.
fn announce(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

#[test]
fn acceptance_criteria() {
    let names = [
        "gradient suite",
        "graph oracle",
        "split reproduction",
        "synthetic skill",
        "6h-stride variant",
        "metrics oracle",
        "embedding pathway",
        "heatwave detector",
        "replay determinism",
        "textualization",
    ];
    let mut hourly = None;
    let mut failed = Vec::new();
    for n in selected() {
        let outcome = catch_unwind(AssertUnwindSafe(|| match n {
            1 => gradient_suite(),
            2 => graph_oracle(),
            3 => split_reproduction(),
            4 => synthetic_skill(&mut hourly),
            5 => six_hour_variant(&mut hourly),
            6 => metrics_oracle(),
            7 => embedding_pathway(),
            8 => heatwave_oracle_check(),
            9 => replay_determinism(),
            10 => textualization(),
            _ => Err(format!("no criterion {n}")),
        }))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let name = names.get(n - 1).copied().unwrap_or("?");
        match outcome {
            Ok(detail) => announce(&format!("acceptance {n:>2} PASS  {name}: {detail}")),
            Err(detail) => {
                announce(&format!("acceptance {n:>2} FAIL  {name}: {detail}"));
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
