mod oracles;

use oracles::{bollinger_brute, ema_closed_form, macd_brute, max_abs_diff, sma_brute};
use proptest::prelude::*;
use tsf_core::indicators::{bollinger, ema, macd, pearson_matrix, sma, MacdConfig};
use tsf_core::rng::Rng;
use tsf_core::{Date, SeriesFrame};

fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    let mut p = 100.0;
    (0..n)
        .map(|_| {
            p += rng.uniform(-1.0, 1.0);
            p
        })
        .collect()
}

fn dates(n: usize) -> Vec<Date> {
    let start = Date::from_ymd_opt(2010, 1, 4).unwrap();
    (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
}

#[test]
fn rolling_indicators_match_brute_force() {
    for seed in 0..5 {
        let x = random_walk(1000, seed);
        for w in [2, 5, 10, 20, 37] {
            assert!(max_abs_diff(&sma(&x, w).unwrap(), &sma_brute(&x, w)) <= 1e-9);
            let (u, l) = bollinger(&x, w, 2.0).unwrap();
            let (bu, bl) = bollinger_brute(&x, w, 2.0);
            assert!(max_abs_diff(&u, &bu) <= 1e-9);
            assert!(max_abs_diff(&l, &bl) <= 1e-9);
        }
        for span in [1, 5, 12, 26] {
            assert!(max_abs_diff(&ema(&x, span).unwrap(), &ema_closed_form(&x, span, 1)) <= 1e-9);
        }
        let (line, signal) = macd(&x, &MacdConfig::default()).unwrap();
        let (bl, bs) = macd_brute(&x, 12, 26, 9);
        assert!(max_abs_diff(&line, &bl) <= 1e-9);
        assert!(max_abs_diff(&signal, &bs) <= 1e-9);
    }
}

#[test]
fn bollinger_hand_case() {
    let x: Vec<f64> = (1..=20).map(f64::from).collect();
    let (u, l) = bollinger(&x, 20, 2.0).unwrap();
    let sd = 33.25f64.sqrt();
    assert!((u[19] - (10.5 + 2.0 * sd)).abs() <= 1e-12);
    assert!((l[19] - (10.5 - 2.0 * sd)).abs() <= 1e-12);
    assert!(u[..19].iter().all(|v| v.is_nan()));
}

#[test]
fn correlated_moving_averages() {
    let x = random_walk(500, 42);
    let frame = SeriesFrame::new(
        dates(500),
        vec![
            ("close".into(), x.clone()),
            ("sma_5".into(), sma(&x, 5).unwrap()),
            ("sma_10".into(), sma(&x, 10).unwrap()),
        ],
    )
    .unwrap();
    let m = pearson_matrix(&frame, &["close", "sma_5", "sma_10"]).unwrap();
    assert!(m.get("sma_5", "sma_10").unwrap() > 0.85);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sma_and_bollinger_match_brute_force(
        x in prop::collection::vec(-1e3f64..1e3, 1..120),
        w in 2usize..30,
    ) {
        prop_assert!(max_abs_diff(&sma(&x, w).unwrap(), &sma_brute(&x, w)) <= 1e-9);
        let (u, _) = bollinger(&x, w, 1.5).unwrap();
        prop_assert!(max_abs_diff(&u, &bollinger_brute(&x, w, 1.5).0) <= 1e-9);
    }

    #[test]
    fn ema_span_one_is_identity(x in prop::collection::vec(-1e6f64..1e6, 1..100)) {
        prop_assert_eq!(ema(&x, 1).unwrap(), x);
    }

    #[test]
    fn macd_line_is_fast_minus_slow(x in prop::collection::vec(1f64..500.0, 1..200)) {
        let cfg = MacdConfig::default();
        let (line, _) = macd(&x, &cfg).unwrap();
        let fast = ema(&x, cfg.fast).unwrap();
        let slow = ema(&x, cfg.slow).unwrap();
        for t in 0..x.len() {
            if !line[t].is_nan() {
                prop_assert_eq!(line[t], fast[t] - slow[t]);
            } else {
                prop_assert!(t + 1 < cfg.slow);
            }
        }
    }

    #[test]
    fn rolling_indicators_are_shift_equivariant(
        x in prop::collection::vec(1f64..500.0, 40..150),
        k in 0usize..30,
        w in 2usize..10,
    ) {
        // sma and bollinger only see their window, so past the warm-up of the
        // shifted series the values agree.
        let full = sma(&x, w).unwrap();
        let tail = sma(&x[k..], w).unwrap();
        prop_assert!(max_abs_diff(&full[k + w - 1..], &tail[w - 1..]) <= 1e-9);
        let (fu, _) = bollinger(&x, w, 2.0).unwrap();
        let (tu, _) = bollinger(&x[k..], w, 2.0).unwrap();
        prop_assert!(max_abs_diff(&fu[k + w - 1..], &tu[w - 1..]) <= 1e-9);
    }

    #[test]
    fn ema_forgets_its_start(
        x in prop::collection::vec(1f64..2.0, 400..500),
        k in 1usize..20,
    ) {
        // an EMA started later differs by a term that decays geometrically;
        // after 300 steps at span 5 it is far below 1e-9.
        let full = ema(&x, 5).unwrap();
        let tail = ema(&x[k..], 5).unwrap();
        prop_assert!(max_abs_diff(&full[k + 300..], &tail[300..]) <= 1e-9);
    }

    #[test]
    fn pearson_matrix_is_symmetric_with_unit_diagonal(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let n = 60;
        let cols: Vec<(String, Vec<f64>)> = (0..4)
            .map(|c| (format!("c{c}"), (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect()))
            .collect();
        let names: Vec<String> = cols.iter().map(|(n, _)| n.clone()).collect();
        let frame = SeriesFrame::new(dates(n), cols).unwrap();
        let m = pearson_matrix(&frame, &names).unwrap();
        for i in 0..4 {
            prop_assert_eq!(m.values[i][i], 1.0);
            for j in 0..4 {
                prop_assert_eq!(m.values[i][j], m.values[j][i]);
                prop_assert!(m.values[i][j].abs() <= 1.0 + 1e-12);
            }
        }
    }
}
