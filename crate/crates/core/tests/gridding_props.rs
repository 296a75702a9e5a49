use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use raal_core::design::generate_pool;
use raal_core::gridding::{adaptive_encode, uniform_encode, uniform_grid, xi_schedule, AdaptiveGrid, GriddingConfig};
use raal_core::stats::quantile;

fn config(bins: Vec<usize>, bounds: Vec<(f64, f64)>, eta: f64) -> GriddingConfig {
    GriddingConfig { bins_per_dim: bins, xi_max: 0.8, learning_rate: eta, bounds }
}

fn instance() -> impl Strategy<Value = (GriddingConfig, Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..4)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(1usize..7, d),
                prop::collection::vec((-3.0..3.0f64, 0.1..4.0f64), d),
                1usize..60,
            )
        })
        .prop_flat_map(|(bins, corners, n)| {
            let bounds: Vec<(f64, f64)> = corners.iter().map(|(lo, w)| (*lo, lo + w)).collect();
            let coords: Vec<_> = bounds.iter().map(|(lo, hi)| *lo..=*hi).collect();
            (
                Just(config(bins, bounds, 1.0)),
                prop::collection::vec(coords, n),
                prop::collection::vec(prop_oneof![0.0..1.0f64, Just(0.5)], n),
            )
        })
}

fn one_hot_per_block(grid: &AdaptiveGrid, cfg: &GriddingConfig) -> bool {
    grid.encodings.iter().all(|enc| {
        let chi = enc.chi();
        let mut start = 0;
        cfg.bins_per_dim.iter().all(|e| {
            let ones = chi[start..start + e].iter().filter(|v| **v == 1).count();
            start += e;
            ones == 1
        }) && chi.len() == cfg.total_bins()
    })
}

proptest! {
    #![proptest_config(fixed(500))]

    #[test]
    fn encodings_are_one_hot_per_block((cfg, points, scores) in instance(), xi in 0.0..0.99f64) {
        let uni = uniform_grid(&points, &cfg).unwrap();
        prop_assert!(one_hot_per_block(&uni, &cfg));
        let ada = adaptive_encode(&points, &scores, xi, &cfg).unwrap();
        prop_assert!(one_hot_per_block(&ada, &cfg));
        prop_assert_eq!(ada.encodings.len(), ada.retained.len());
    }

    #[test]
    fn breakpoints_are_nondecreasing((cfg, points, scores) in instance(), xi in 0.0..0.99f64) {
        let grid = adaptive_encode(&points, &scores, xi, &cfg).unwrap();
        for (q, (lo, hi)) in grid.breakpoints.iter().zip(&cfg.bounds) {
            prop_assert!(q.windows(2).all(|w| w[0] <= w[1]), "{:?}", q);
            prop_assert_eq!(q[0], *lo);
            prop_assert_eq!(*q.last().unwrap(), *hi);
        }
    }

    #[test]
    fn retained_points_clear_the_quantile((cfg, points, scores) in instance(), xi in 0.0..0.99f64) {
        let grid = adaptive_encode(&points, &scores, xi, &cfg).unwrap();
        if !grid.fell_back {
            let threshold = quantile(&scores, xi).unwrap();
            prop_assert!(grid.retained.iter().all(|i| scores[*i] >= threshold));
            let kept = (0..points.len()).filter(|i| scores[*i] >= threshold).count();
            prop_assert_eq!(kept, grid.retained.len());
        } else {
            prop_assert_eq!(grid.retained.len(), points.len());
        }
    }

    #[test]
    fn encodings_respect_breakpoints((cfg, points, scores) in instance(), xi in 0.0..0.99f64) {
        let grid = adaptive_encode(&points, &scores, xi, &cfg).unwrap();
        let mut offset = 0;
        for (j, q) in grid.breakpoints.iter().enumerate() {
            for (i, enc) in grid.retained.iter().zip(&grid.encodings) {
                let local = enc.active()[j] - offset;
                let v = points[*i][j];
                prop_assert!(q[local] <= v && v <= q[local + 1], "dim {} value {} bin {} of {:?}", j, v, local, q);
            }
            offset += cfg.bins_per_dim[j];
        }
    }

    #[test]
    fn schedule_is_monotone_and_bounded(eta in 0.0..5.0f64, xi_max in 0.0..0.99f64, max_budget in 1.0..50.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let cfg = GriddingConfig { xi_max, ..config(vec![5], vec![(0.0, 1.0)], eta) };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = xi_schedule(&cfg, lo * max_budget * 0.999, max_budget).unwrap();
        let y = xi_schedule(&cfg, hi * max_budget * 0.999, max_budget).unwrap();
        prop_assert!(0.0 <= x && x <= y && y <= xi_max, "{} {} {}", x, y, xi_max);
    }
}

fn counts(grid: &AdaptiveGrid, total: usize) -> Vec<usize> {
    let mut c = vec![0; total];
    for enc in &grid.encodings {
        for e in enc.active() {
            c[*e] += 1;
        }
    }
    c
}

#[test]
fn quantile_grid_on_uniform_coordinates_matches_equal_width() {
    for (bins, per_bin) in [(vec![5], 4), (vec![4], 7), (vec![3, 5], 6), (vec![2, 2, 4], 3)] {
        let bounds: Vec<(f64, f64)> = bins.iter().enumerate().map(|(j, _)| (-1.0 + j as f64, 2.0 + j as f64)).collect();
        let cfg = config(bins.clone(), bounds.clone(), 0.0);
        let n = bins.iter().max().unwrap() * per_bin;
        // Every coordinate of the lattice, scanned as a product grid.
        let axis = |j: usize| -> Vec<f64> {
            let (lo, hi) = bounds[j];
            (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
        };
        let mut points = vec![vec![]];
        for j in 0..bins.len() {
            points = points
                .into_iter()
                .flat_map(|p: Vec<f64>| axis(j).into_iter().map(move |v| [p.clone(), vec![v]].concat()))
                .collect();
        }
        let scores = vec![1.0; points.len()];
        let ada = adaptive_encode(&points, &scores, 0.0, &cfg).unwrap();
        let uni = uniform_grid(&points, &cfg).unwrap();
        assert!(!ada.fell_back);
        assert_eq!(ada.retained.len(), points.len());
        assert_eq!(counts(&ada, cfg.total_bins()), counts(&uni, cfg.total_bins()), "bins {bins:?}");
    }
}

fn bump(x: &[f64], c: &[f64]) -> f64 {
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    (-r2 / (2.0 * 0.08 * 0.08)).exp()
}

fn widths_near(grid: &AdaptiveGrid, modes: &[f64], dim: usize) -> f64 {
    let q = &grid.breakpoints[dim];
    modes
        .iter()
        .map(|m| {
            let k = q.windows(2).position(|w| w[0] <= *m && *m <= w[1]).unwrap();
            q[k + 1] - q[k]
        })
        .fold(0.0, f64::max)
}

#[test]
fn bimodal_scores_narrow_the_bins_at_the_modes() {
    let cfg = config(vec![5, 5], vec![(0.0, 1.0), (0.0, 1.0)], 1.0);
    let pool = generate_pool(&cfg.bounds, 500, |_| true, 7).unwrap();
    let points = pool.points().to_vec();
    let modes = [[0.25, 0.7], [0.75, 0.3]];
    let scores: Vec<f64> = points.iter().map(|x| bump(x, &modes[0]) + 0.8 * bump(x, &modes[1])).collect();

    let sharp = adaptive_encode(&points, &scores, 0.8, &cfg).unwrap();
    let flat = adaptive_encode(&points, &scores, 0.0, &cfg).unwrap();
    assert!(!sharp.fell_back);
    let threshold = quantile(&scores, 0.8).unwrap();
    assert!(sharp.retained.iter().all(|i| scores[*i] >= threshold));
    assert!(sharp.retained.len() < points.len() / 4);

    for dim in 0..2 {
        let at_modes: Vec<f64> = modes.iter().map(|m| m[dim]).collect();
        let near = widths_near(&sharp, &at_modes, dim);
        let widest_flat = flat.breakpoints[dim].windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(near < widest_flat, "dim {dim}: {near} vs {widest_flat}");
    }
}

#[test]
fn uniform_encoding_agrees_with_the_bin_formula() {
    let cfg = config(vec![5, 3], vec![(0.0, 1.0), (-2.0, 4.0)], 0.0);
    for (x, want) in [([0.3, -2.0], [1, 5]), ([1.0, 4.0], [4, 7]), ([0.2, 0.0], [1, 6]), ([0.0, 3.99], [0, 7])] {
        assert_eq!(uniform_encode(&x, &cfg).unwrap().active(), &want);
    }
}

fn fixed(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() }
}
