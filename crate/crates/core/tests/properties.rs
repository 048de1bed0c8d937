mod common;

use common::props;
use hetanova::asymptotic::{equicoordinate_quantile_of, AsymptoticCovariance};
use hetanova::bootstrap::{bootstrap_null_samples, BootstrapSettings};
use hetanova::data::{summarize, CellSummaryTable, Layout, RawDataset, Record};
use hetanova::grid::Grid;
use hetanova::mle::{fit_full, fit_null_no_interaction, fit_null_no_simple_a, SolverSettings};
use hetanova::stats::{compute, StatisticKind};
use proptest::prelude::*;

fn summary(
    a: std::ops::RangeInclusive<usize>,
    b: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = CellSummaryTable> {
    (a, b).prop_flat_map(|(a, b)| {
        let cells = a * b;
        (
            prop::collection::vec(-5.0..5.0f64, cells),
            prop::collection::vec(3usize..40, cells),
            prop::collection::vec(0.05..8.0f64, cells),
        )
            .prop_map(move |(m, n, v)| {
                CellSummaryTable::from_matrices(
                    Grid::from_row_major(a, b, m).unwrap(),
                    Grid::from_row_major(a, b, n).unwrap(),
                    Grid::from_row_major(a, b, v).unwrap(),
                )
                .unwrap()
            })
    })
}

/// Summaries drawn around the model (see `common::model_summary`).
fn modeled(
    a: std::ops::RangeInclusive<usize>,
    b: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = CellSummaryTable> {
    (a, b, any::<u64>(), any::<bool>())
        .prop_map(|(a, b, seed, rows)| common::model_summary(&mut common::rng(seed), a, b, rows))
}

fn check(r: props::Check) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coordinate_ascent_is_monotone(s in summary(2..=5, 2..=5)) {
        check(props::loglik_monotone(&s))?;
    }

    #[test]
    fn converged_fits_are_stationary(s in modeled(2..=5, 2..=5)) {
        check(props::stationarity(&s))?;
    }

    #[test]
    fn fits_match_newton_oracle(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        check(props::oracle_agreement(&common::model_summary(&mut rng, 3, 3, true), false, 1e-6))?;
        check(props::oracle_agreement(&common::model_summary(&mut rng, 3, 3, false), true, 1e-6))?;
    }

    #[test]
    fn nested_spaces_order_likelihoods(s in summary(2..=4, 2..=4)) {
        let set = SolverSettings::default();
        let full = fit_full(&s).unwrap().loglik;
        let add = fit_null_no_interaction(&s, &set).unwrap().loglik;
        let cols = fit_null_no_simple_a(&s, &set).unwrap().loglik;
        prop_assert!(full >= add - 1e-9 && add >= cols - 1e-9, "{full} {add} {cols}");
    }

    #[test]
    fn statistics_are_scale_and_shift_invariant(
        s in modeled(2..=4, 2..=4),
        c in 0.1..10.0f64,
        d in -20.0..20.0f64,
        row in prop::collection::vec(-3.0..3.0f64, 4),
        col in prop::collection::vec(-3.0..3.0f64, 4),
    ) {
        check(props::invariance(&s, c, d, &row, &col))?;
    }

    #[test]
    fn lrt_in_unit_interval_and_mct_is_max_detail(s in summary(2..=4, 2..=4)) {
        let set = SolverSettings::default();
        for kind in StatisticKind::PROPOSED {
            let v = compute(kind, &s, &set).unwrap();
            if kind.is_lrt() {
                prop_assert!(v.value > 0.0 && v.value <= 1.0, "{kind:?} = {}", v.value);
                prop_assert!(v.deviance().unwrap() >= 0.0);
            } else {
                let max = v.detail.as_ref().unwrap().iter().map(|c| c.value.abs()).fold(0.0, f64::max);
                prop_assert_eq!(v.value, max);
            }
        }
    }

    #[test]
    fn sigma_z_matches_block_layout(eta2 in (3usize..=5).prop_flat_map(|a| prop::collection::vec(0.01..20.0f64, a))) {
        check(props::block_equivalence(&eta2))?;
        check(props::covariance_shape(&eta2))?;
    }

    #[test]
    fn treatment_statistic_permutes_with_a_levels(s in modeled(3..=4, 2..=3), seed in any::<u64>()) {
        let a = s.a();
        let mut perm: Vec<usize> = (0..a).collect();
        perm.rotate_left((seed % a as u64) as usize);
        let permuted = CellSummaryTable::from_matrices(
            Grid::from_fn(a, s.b(), |i, j| s.mean(perm[i], j)),
            Grid::from_fn(a, s.b(), |i, j| s.layout().n(perm[i], j)),
            Grid::from_fn(a, s.b(), |i, j| s.var(perm[i], j)),
        ).unwrap();
        let set = SolverSettings::default();
        let t0 = compute(StatisticKind::MctTreatmentA, &s, &set).unwrap().value;
        let t1 = compute(StatisticKind::MctTreatmentA, &permuted, &set).unwrap().value;
        prop_assert!((t0 - t1).abs() <= 1e-12 * t0.max(1.0));
        let q0 = compute(StatisticKind::MctInteraction, &s, &set).unwrap().value;
        let q1 = compute(StatisticKind::MctInteraction, &s.transpose().transpose(), &set).unwrap().value;
        prop_assert_eq!(q0, q1);
    }

    #[test]
    fn affine_map_of_raw_data(ys in prop::collection::vec(-10.0..10.0f64, 12), c in 0.1..5.0f64, d in -5.0..5.0f64) {
        let layout = Layout::balanced(2, 2, 3).unwrap();
        let raw = |f: &dyn Fn(f64) -> f64| RawDataset::new(ys.iter().enumerate().map(|(k, &y)| Record {
            level_a: k / 6 + 1,
            level_b: (k / 3) % 2 + 1,
            y: f(y),
        }).collect());
        let base = summarize(&raw(&|y| y), &layout).unwrap();
        let mapped = summarize(&raw(&|y| c * y + d), &layout).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((mapped.mean(i, j) - (c * base.mean(i, j) + d)).abs() < 1e-9);
                prop_assert!((mapped.var(i, j) - c * c * base.var(i, j)).abs() < 1e-9 * (1.0 + mapped.var(i, j)));
            }
        }
        let m = base.marginals();
        let rows = m.rows.iter().sum::<f64>() / 2.0;
        let cols = m.cols.iter().sum::<f64>() / 2.0;
        prop_assert!((rows - m.grand).abs() < 1e-12 && (cols - m.grand).abs() < 1e-12);
    }

    #[test]
    fn summarize_ignores_record_order(ys in prop::collection::vec(-10.0..10.0f64, 8), shift in 0usize..8) {
        let layout = Layout::balanced(2, 2, 2).unwrap();
        let mut recs: Vec<Record> = ys.iter().enumerate().map(|(k, &y)| Record {
            level_a: k % 2 + 1,
            level_b: (k / 2) % 2 + 1,
            y,
        }).collect();
        let a = summarize(&RawDataset::new(recs.clone()), &layout).unwrap();
        recs.rotate_left(shift);
        recs.reverse();
        let b = summarize(&RawDataset::new(recs), &layout).unwrap();
        prop_assert!(a.means().max_abs_diff(b.means()) < 1e-12);
        prop_assert!(a.vars().max_abs_diff(b.vars()) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn null_draw_ignores_observed_means(s in summary(2..=3, 2..=3), shift in prop::collection::vec(-50.0..50.0f64, 9), seed in any::<u64>()) {
        let moved = s.with_means(Grid::from_fn(s.a(), s.b(), |i, j| s.mean(i, j) + shift[i * 3 + j])).unwrap();
        let set = BootstrapSettings::new(100, 0.05, seed);
        let solver = SolverSettings::default();
        let kinds = StatisticKind::PROPOSED;
        let x = bootstrap_null_samples(&s, &kinds, &set, &solver).unwrap();
        let y = bootstrap_null_samples(&moved, &kinds, &set, &solver).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn equicoordinate_quantile_decreases_in_alpha(eta2 in prop::collection::vec(0.1..5.0f64, 3..=5), seed in any::<u64>()) {
        let cov = AsymptoticCovariance::from_eta2(eta2).unwrap();
        let mut last = f64::INFINITY;
        for alpha in [0.01, 0.05, 0.1, 0.2, 0.5] {
            let d = equicoordinate_quantile_of(&cov.sigma_t, alpha, 20_000, seed).unwrap();
            prop_assert!(d <= last, "alpha {alpha}: {d} > {last}");
            last = d;
        }
    }

    #[test]
    fn threads_do_not_change_reports(s in summary(3..=3, 2..=3), seed in any::<u64>()) {
        check(props::thread_determinism(&s, seed, 4))?;
    }
}

#[test]
fn equicoordinate_quantile_grows_with_correlation() {
    // Equicorrelated q = 4: ρ → 1 collapses to the two-sided normal point.
    let q = 4;
    let mut last = 0.0;
    for rho in [0.95, 0.7, 0.4, 0.0] {
        let sigma = nalgebra::DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { rho });
        let d = equicoordinate_quantile_of(&sigma, 0.05, 200_000, 3).unwrap();
        assert!(d > last, "rho {rho}: {d} <= {last}");
        last = d;
    }
    // Independence: P(max|Z| ≤ d) = (2Φ(d) − 1)^4 = 0.95.
    let exact = common::bisect(|d| (2.0 * common::phi(d) - 1.0).powi(4) - 0.95, 0.0, 10.0);
    assert!((last - exact).abs() < 0.02, "{last} vs {exact}");
}

#[test]
fn bootstrap_matches_direct_simulation() {
    let sigma2 = Grid::from_rows(vec![vec![1.0, 4.0], vec![2.0, 0.5], vec![3.0, 1.5]]).unwrap();
    let mut rng = common::rng(11);
    for r in props::ks_closeness(&mut rng, &sigma2, 100, 2000, 6000, 5).unwrap() {
        assert!(
            r.boot_vs_direct < 0.05,
            "{:?}: {}",
            r.kind,
            r.boot_vs_direct
        );
        assert!(r.boot_vs_boot < 0.05, "{:?}: {}", r.kind, r.boot_vs_boot);
    }
}

#[test]
fn oracle_on_fixed_seeds() {
    let mut rng = common::rng(2024);
    for _ in 0..50 {
        let s = common::model_summary(&mut rng, 3, 3, true);
        props::oracle_agreement(&s, false, 1e-6).unwrap();
        let s = common::model_summary(&mut rng, 3, 3, false);
        props::oracle_agreement(&s, true, 1e-6).unwrap();
    }
}
