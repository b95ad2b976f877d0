mod common;

use chrono::{Datelike, NaiveDate};
use proptest::prelude::*;

use gridcast::geograph::{build_graph, haversine, normalize_adjacency, Graph};
use gridcast::griddata::io::{parse_csv, to_csv};
use gridcast::griddata::{
    generate_synthetic, make_windows, split_dataset, split_len, Dataset, GridDomain, LatLon,
    SplitSpec, Standardizer, SynthConfig,
};
use gridcast::numcore::{spmm, CsrMatrix, Matrix};

use common::{brute_force_edges, oracle_km};

fn six_hourly(start: NaiveDate, n_times: usize) -> Dataset {
    let cfg = SynthConfig {
        start: start.and_hms_opt(0, 0, 0).unwrap(),
        ..SynthConfig::default()
    };
    generate_synthetic(&GridDomain::region_a(2, 3).unwrap(), n_times, 6, 5, &cfg).unwrap()
}

#[test]
fn manual_split_on_year_boundaries() {
    let start = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
    let days = (365 + 365 + 366) as usize;
    let d = six_hourly(start, days * 4);
    let spec = SplitSpec::Manual {
        val_start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
        test_start: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
    };
    let r = split_dataset(&d, &spec).unwrap();
    assert_eq!(r.lens(), (365 * 4, 365 * 4, 366 * 4));
    for (range, year) in [(&r.train, 2022), (&r.val, 2023), (&r.test, 2024)] {
        assert!(range.clone().all(|t| d.timestamp(t).year() == year));
    }
    assert_eq!(r.test.end, d.n_times());
}

#[test]
fn six_hour_record_ratio_split() {
    assert_eq!(split_len(11_672, &SplitSpec::default()).unwrap().lens(), (8_170, 1_751, 1_751));
    assert_eq!(split_len(10, &SplitSpec::default()).unwrap().lens(), (7, 1, 2));
}

#[test]
fn standardizer_ignores_values_outside_train() {
    let d = six_hourly(NaiveDate::from_ymd_opt(2022, 3, 1).unwrap(), 200);
    let r = split_len(d.n_times(), &SplitSpec::default()).unwrap();
    let before = Standardizer::fit(&d, r.train.clone()).unwrap();
    let mut values = d.values().to_vec();
    let from = d.offset(r.val.start, 0, 0);
    for v in &mut values[from..] {
        *v += 20.0;
    }
    let altered = Dataset::new(
        d.domain().clone(),
        d.variables().to_vec(),
        d.start(),
        d.stride_hours(),
        d.n_times(),
        values,
    )
    .unwrap();
    assert_eq!(Standardizer::fit(&altered, r.train).unwrap(), before);
}

#[test]
fn equator_degree_and_five_by_five_grid() {
    let km = haversine(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0));
    assert!((km - 111.19).abs() < 0.01, "{km}");
    let dom = GridDomain::with_spacing_km(43.0, -81.0, 5, 5, 2.5).unwrap();
    let g = build_graph(&dom, 4.0).unwrap();
    let centre = dom.node_index(2, 2).unwrap();
    assert_eq!(g.degree(centre), 8);
    assert_eq!(build_graph(&dom, 2.4).unwrap().edges().len(), 0);
}

#[test]
fn normalized_adjacency_times_ones_gives_row_sums() {
    let coords = vec![LatLon::new(0.0, 0.0), LatLon::new(0.0, 0.01), LatLon::new(0.0, 0.02)];
    let g = Graph::from_coords(coords, 1.2).unwrap();
    let adj = normalize_adjacency(&g);
    let ones = Matrix::filled(3, 1, 1.0);
    let out = spmm(adj.csr(), &ones).unwrap();
    let dense = adj.csr().to_dense().matmul(&ones).unwrap();
    for (i, s) in adj.csr().row_sums().iter().enumerate() {
        assert!((out.get(i, 0) - s).abs() < 1e-15);
        assert!((dense.get(i, 0) - s).abs() < 1e-15);
    }
}

fn coords_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((40.0..40.3f64, -80.0..-79.7f64), 1..40)
}

proptest! {
    #[test]
    fn graph_matches_exhaustive_pairs(points in coords_strategy(), dist in 0.5..25.0f64) {
        let coords: Vec<LatLon> = points.iter().map(|&(a, b)| LatLon::new(a, b)).collect();
        let g = Graph::from_coords(coords.clone(), dist).unwrap();
        let got: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        prop_assert_eq!(got, brute_force_edges(&coords, dist));
        for e in g.edges() {
            prop_assert!((e.km - oracle_km(coords[e.i], coords[e.j])).abs() < 1e-9);
        }
    }

    #[test]
    fn normalized_entries_follow_degrees(points in coords_strategy(), dist in 0.5..25.0f64) {
        let coords: Vec<LatLon> = points.iter().map(|&(a, b)| LatLon::new(a, b)).collect();
        let g = Graph::from_coords(coords, dist).unwrap();
        let a = normalize_adjacency(&g).csr().to_dense();
        let n = g.node_count();
        for i in 0..n {
            for j in 0..n {
                let linked = i == j || g.neighbors(i).contains(&j);
                let want = if linked {
                    1.0 / (((g.degree(i) + 1) * (g.degree(j) + 1)) as f64).sqrt()
                } else {
                    0.0
                };
                prop_assert!((a.get(i, j) - want).abs() < 1e-15);
                prop_assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn sparse_product_matches_dense(
        n in 1usize..50,
        cols in 1usize..6,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let triplets: Vec<(usize, usize, f64)> = (0..3 * n)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(-1.0..1.0)))
            .collect();
        let a = CsrMatrix::from_triplets(n, n, &triplets).unwrap();
        let h = Matrix::from_vec(n, cols, (0..n * cols).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let sparse = spmm(&a, &h).unwrap();
        let mut dense = vec![0.0; n * cols];
        for &(r, c, v) in &triplets {
            for k in 0..cols {
                dense[r * cols + k] += v * h.get(c, k);
            }
        }
        for (x, y) in sparse.as_slice().iter().zip(&dense) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_split_partitions_in_order(t in 10usize..60_000) {
        let r = split_len(t, &SplitSpec::default()).unwrap();
        prop_assert_eq!(r.train.start, 0);
        prop_assert_eq!(r.train.end, r.val.start);
        prop_assert_eq!(r.val.end, r.test.start);
        prop_assert_eq!(r.test.end, t);
        prop_assert!(!r.val.is_empty() && !r.test.is_empty());
    }

    #[test]
    fn windows_stay_inside_their_split(
        start in 0usize..500,
        len in 1usize..400,
        window in 1usize..30,
        hmax in 1usize..50,
    ) {
        let horizons: Vec<usize> = (1..=hmax).step_by(7).chain([hmax]).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let range = start..start + len;
        match make_windows(range.clone(), window, &horizons) {
            Ok(idx) => {
                prop_assert_eq!(idx.len(), len + 1 - window - hmax);
                for &a in &idx.anchors {
                    prop_assert!(idx.window_start(a) >= range.start);
                    prop_assert!(a + hmax < range.end);
                }
            }
            Err(_) => prop_assert!(len < window + hmax),
        }
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n_times in 1usize..6) {
        let dom = GridDomain::region_a(2, 2).unwrap();
        let d = generate_synthetic(&dom, n_times, 1, seed, &SynthConfig::default()).unwrap();
        let back = parse_csv(&to_csv(&d)).unwrap();
        prop_assert_eq!(back.values(), d.values());
        prop_assert_eq!(back.start(), d.start());
        prop_assert_eq!(back.domain(), d.domain());
    }
}
