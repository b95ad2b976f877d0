use crate::error::{Error, Result};
use crate::geograph::Graph;
use crate::griddata::Dataset;

/// Replaces missing cells by the mean of their non-missing graph neighbours.
///
/// Neighbour means read only originally observed values, so the result does
/// not depend on visiting order. Fallbacks, in order: the mean over all
/// observed nodes at that timestep, then the variable's mean over the
/// whole record.
pub fn fill_missing(d: &Dataset, graph: &Graph) -> Result<Dataset> {
    if graph.node_count() != d.n_nodes() {
        return Err(Error::shape(
            "fill_missing",
            format!(
                "graph has {} nodes, dataset {}",
                graph.node_count(),
                d.n_nodes()
            ),
        ));
    }
    if d.missing_count() == 0 {
        return Ok(d.clone());
    }

    let (n, f) = (d.n_nodes(), d.n_vars());
    let mut global_mean = vec![0.0; f];
    for (var, gm) in global_mean.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in 0..d.n_times() {
            for node in 0..n {
                if !d.is_missing(t, node, var) {
                    sum += d.value(t, node, var);
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::Fill(format!(
                "variable `{}` is missing everywhere",
                d.variables()[var]
            )));
        }
        *gm = sum / count as f64;
    }

    let mut values = d.values().to_vec();
    for t in 0..d.n_times() {
        for var in 0..f {
            let mut step_mean: Option<f64> = None;
            for node in 0..n {
                if !d.is_missing(t, node, var) {
                    continue;
                }
                let (sum, count) = graph
                    .neighbors(node)
                    .iter()
                    .filter(|&&j| !d.is_missing(t, j, var))
                    .fold((0.0, 0usize), |(s, c), &j| (s + d.value(t, j, var), c + 1));
                let fill = if count > 0 {
                    sum / count as f64
                } else {
                    *step_mean.get_or_insert_with(|| {
                        let (s, c) = (0..n)
                            .filter(|&j| !d.is_missing(t, j, var))
                            .fold((0.0, 0usize), |(s, c), j| (s + d.value(t, j, var), c + 1));
                        if c > 0 {
                            s / c as f64
                        } else {
                            global_mean[var]
                        }
                    })
                };
                values[d.offset(t, node, var)] = fill;
            }
        }
    }
    d.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geograph::build_graph;
    use crate::griddata::{GridDomain, Variable};
    use chrono::NaiveDate;

    // 1x3 row of nodes 2.5 km apart plus a second row; threshold keeps only east-west/north-south links.
    fn setup(values: Vec<f64>, n_times: usize) -> (Dataset, Graph) {
        let dom = GridDomain::with_spacing_km(43.0, -81.0, 2, 3, 2.5).unwrap();
        let g = build_graph(&dom, 3.0).unwrap();
        let start = NaiveDate::from_ymd_opt(2022, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let d = Dataset::new(dom, vec![Variable::T2m], start, 1, n_times, values).unwrap();
        (d, g)
    }

    #[test]
    fn neighbour_mean() {
        // node 1 (row 0, middle) has neighbours 0, 2 and 4.
        let nan = f64::NAN;
        let (d, g) = setup(vec![281.0, nan, 283.0, 300.0, 282.0, 300.0], 1);
        let mut nb = g.neighbors(1).to_vec();
        nb.sort();
        assert_eq!(nb, vec![0, 2, 4]);
        let out = fill_missing(&d, &g).unwrap();
        assert_eq!(out.value(0, 1, 0), 282.0);
        assert_eq!(out.missing_count(), 0);
    }

    #[test]
    fn falls_back_to_timestep_mean() {
        let nan = f64::NAN;
        // node 0's neighbours are 1 and 3, both missing; observed nodes 2, 4, 5 average to 290.
        let (d, g) = setup(vec![nan, nan, 280.0, nan, 290.0, 300.0], 1);
        let out = fill_missing(&d, &g).unwrap();
        assert_eq!(out.value(0, 0, 0), 290.0);
    }

    #[test]
    fn fallback_matches_two_value_example() {
        let nan = f64::NAN;
        let (d, g) = setup(vec![nan, nan, 210.0, nan, nan, 220.0], 1);
        let out = fill_missing(&d, &g).unwrap();
        // node 0: neighbours 1 and 3 missing -> timestep mean of {210, 220}
        assert_eq!(out.value(0, 0, 0), 215.0);
    }

    #[test]
    fn whole_timestep_missing_uses_global_mean() {
        let nan = f64::NAN;
        let mut v = vec![nan; 6];
        v.extend([280.0, 282.0, 284.0, 286.0, 288.0, 290.0]);
        let (d, g) = setup(v, 2);
        let out = fill_missing(&d, &g).unwrap();
        assert_eq!(out.value(0, 3, 0), 285.0);
    }

    #[test]
    fn identity_and_idempotence() {
        let (d, g) = setup(vec![281.0, 282.0, 283.0, 284.0, 285.0, 286.0], 1);
        assert_eq!(fill_missing(&d, &g).unwrap(), d);
        let nan = f64::NAN;
        let (d, g) = setup(vec![281.0, nan, 283.0, nan, 285.0, 286.0], 1);
        let once = fill_missing(&d, &g).unwrap();
        assert_eq!(fill_missing(&once, &g).unwrap(), once);
    }

    #[test]
    fn entirely_missing_variable() {
        let (d, g) = setup(vec![f64::NAN; 6], 1);
        assert!(matches!(fill_missing(&d, &g), Err(Error::Fill(_))));
    }
}
