use chrono::NaiveDate;
use otrank::calibration::{asymptotic_pvalue_chisq, p_value, NullCache};
use otrank::ingest::{prices_to_returns, PriceSeries};
use otrank::reference::make_grid;
use otrank::rng::seeded;
use otrank::stats::{default_sigma, Kernel, Score};
use otrank::{rank_map, signed_rank_map, Execution, Generator, Points, SymmetryGroup};
use proptest::prelude::*;

fn points(n: usize, p: usize) -> impl Strategy<Value = Points> {
    prop::collection::vec(-5.0f64..5.0, n * p).prop_map(move |v| Points::new(v, n, p).unwrap())
}

fn sized_points() -> impl Strategy<Value = Points> {
    (2usize..12, 1usize..4).prop_flat_map(|(n, p)| points(n, p))
}

fn group_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["trivial", "central", "sign", "permutation", "spherical"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_follow_their_observation_under_reordering(x in sized_points(), seed in any::<u64>(), shift in 0usize..11) {
        prop_assume!(x.find_duplicate_rows().is_none());
        let grid = make_grid(&Generator::Gaussian, x.n(), x.p(), seed).unwrap();
        let order: Vec<usize> = (0..x.n()).map(|i| (i + shift) % x.n()).collect();
        let a = rank_map(&x, &grid).unwrap();
        let b = rank_map(&x.select(&order), &grid).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(b.absolute_ranks.row(k), a.absolute_ranks.row(i));
        }
        let mut used = a.permutation.clone();
        used.sort_unstable();
        prop_assert_eq!(used, (0..x.n()).collect::<Vec<_>>());
    }

    #[test]
    fn signed_ranks_lie_on_the_orbit_of_their_grid_point(x in sized_points(), desc in group_name(), seed in any::<u64>()) {
        prop_assume!(x.find_duplicate_rows().is_none());
        let group = SymmetryGroup::parse(desc, x.p()).unwrap();
        let grid = make_grid(&Generator::symmetric_default(&group), x.n(), x.p(), seed).unwrap();
        let a = signed_rank_map(&x, &grid, &group, &mut seeded(seed)).unwrap();
        let mut cost = 0.0;
        for i in 0..x.n() {
            let h = grid.row(a.permutation[i]);
            let u = a.signed_ranks.row(i);
            prop_assert!(group.orbit_cost(u, h).unwrap() < 1e-9);
            prop_assert_eq!(a.absolute_ranks.row(i), h);
            let d: f64 = x.row(i).iter().zip(u).map(|(s, t)| (s - t) * (s - t)).sum();
            prop_assert!((d - group.orbit_cost(x.row(i), h).unwrap()).abs() < 1e-8 * (1.0 + d));
            cost += d;
        }
        prop_assert!((cost - a.total_cost).abs() < 1e-9 * (1.0 + cost));
    }

    #[test]
    fn orbit_cost_is_invariant_under_the_group(x in prop::collection::vec(-3.0f64..3.0, 3), h in prop::collection::vec(-3.0f64..3.0, 3), desc in group_name(), seed in any::<u64>()) {
        let group = SymmetryGroup::parse(desc, 3).unwrap();
        let q = group.sample_element(&mut seeded(seed));
        let qx = q.apply(&group, &x);
        let c = group.orbit_cost(&x, &h).unwrap();
        prop_assert!((c - group.orbit_cost(&qx, &h).unwrap()).abs() < 1e-9 * (1.0 + c));
        prop_assert!(c >= 0.0);
    }

    #[test]
    fn transported_ranks_do_not_depend_on_a_common_translation(x in sized_points(), seed in any::<u64>(), t in -10.0f64..10.0) {
        prop_assume!(x.find_duplicate_rows().is_none());
        let grid = make_grid(&Generator::Gaussian, x.n(), x.p(), seed).unwrap();
        let moved = Points::new(x.as_slice().iter().map(|v| v + t).collect(), x.n(), x.p()).unwrap();
        prop_assert_eq!(rank_map(&x, &grid).unwrap().permutation, rank_map(&moved, &grid).unwrap().permutation);
    }

    #[test]
    fn p_values_are_valid_and_monotone(null in prop::collection::vec(-10.0f64..10.0, 1..200), a in -12.0f64..12.0, b in -12.0f64..12.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (p_value(lo, &null).unwrap(), p_value(hi, &null).unwrap());
        prop_assert!(p_hi > 0.0 && p_lo <= 1.0);
        prop_assert!(p_hi <= p_lo);
        prop_assert!(p_hi >= 1.0 / (null.len() as f64 + 1.0));
    }

    #[test]
    fn chisq_tail_is_monotone(x in 0.0f64..60.0, dx in 0.0f64..10.0, df in 1u32..20) {
        let (a, b) = (asymptotic_pvalue_chisq(x, df).unwrap(), asymptotic_pvalue_chisq(x + dx, df).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn returns_ignore_the_price_unit(prices in prop::collection::vec(1.0f64..500.0, 3..40), scale in 0.01f64..100.0) {
        let day = |k: usize| NaiveDate::from_ymd_opt(2001, 1, 1).unwrap() + chrono::Days::new(k as u64);
        let series = |c: f64, name: &str| {
            PriceSeries::new(name, prices.iter().enumerate().map(|(k, p)| (day(k), p * c)).collect()).unwrap()
        };
        let a = prices_to_returns(&[series(1.0, "a"), series(1.0, "b")]).unwrap();
        let b = prices_to_returns(&[series(scale, "a"), series(1.0, "b")]).unwrap();
        prop_assert_eq!(a.returns.n(), prices.len() - 1);
        for (u, v) in a.returns.as_slice().iter().zip(b.returns.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn null_cache_round_trip_is_bit_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..100)) {
        let dir = tempfile::tempdir().unwrap();
        let cache = NullCache::new(dir.path());
        cache.store("k", &values).unwrap();
        let back = cache.load("k").unwrap();
        prop_assert_eq!(back.len(), values.len());
        for (a, b) in back.iter().zip(&values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn parallel_and_sequential_maps_agree(n in 0usize..500, seed in any::<u64>()) {
        let f = |i: usize| ((i as u64 ^ seed).wrapping_mul(0x9e3779b97f4a7c15) >> 11) as f64;
        prop_assert_eq!(Execution::Sequential.map(n, f), Execution::Parallel.map(n, f));
        prop_assert_eq!(Execution::Sequential.sum(n, f).to_bits(), Execution::Parallel.sum(n, f).to_bits());
    }

    #[test]
    fn kernels_are_symmetric_and_bounded(u in prop::collection::vec(-4.0f64..4.0, 2), v in prop::collection::vec(-4.0f64..4.0, 2)) {
        for k in [Kernel::gaussian(default_sigma(2)).unwrap(), Kernel::from_name("laplace", None, 2).unwrap()] {
            let (a, b) = (k.eval(&u, &v), k.eval(&v, &u));
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert_eq!(k.eval(&u, &u), 1.0);
        }
    }

    #[test]
    fn normal_cdf_score_maps_into_the_unit_cube(u in prop::collection::vec(-8.0f64..8.0, 1..5)) {
        let s = Score::NormalCdf.apply(&u);
        prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(Score::Identity.apply(&u), u);
    }
}
