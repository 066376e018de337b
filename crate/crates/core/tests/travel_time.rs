mod common;

use common::stepwise_travel;
use mttd::travel_time::{build_travel_time, SpeedProfile};
use proptest::prelude::*;

fn profile_strategy() -> impl Strategy<Value = SpeedProfile> {
    (1usize..=6, 10.0f64..500.0)
        .prop_flat_map(|(zones, span)| {
            (
                Just(span),
                prop::collection::vec(0.05f64..1.0, zones),
                prop::collection::vec(0.1f64..3.0, zones),
            )
        })
        .prop_map(|(span, widths, speeds)| {
            let total: f64 = widths.iter().sum();
            let mut b = vec![0.0];
            let mut acc = 0.0;
            for w in &widths {
                acc += w / total * span;
                b.push(acc);
            }
            *b.last_mut().unwrap() = span;
            SpeedProfile::new("random", b, speeds)
        })
}

fn named_shapes() -> Vec<SpeedProfile> {
    let b = vec![0.0, 96.0, 144.0, 336.0, 384.0, 480.0];
    vec![
        SpeedProfile::new("congested", b.clone(), vec![1.0, 0.5, 0.8, 0.5, 1.0]),
        SpeedProfile::new("moderate", b.clone(), vec![1.2, 0.7, 1.0, 0.7, 1.2]),
        SpeedProfile::new("free", b.clone(), vec![1.4, 1.0, 1.2, 1.0, 1.4]),
        SpeedProfile::new("rising", b.clone(), vec![0.4, 0.6, 0.8, 1.0, 1.2]),
        SpeedProfile::new("falling", b, vec![1.2, 1.0, 0.8, 0.6, 0.4]),
        SpeedProfile::constant("flat", 0.0, 480.0, 1.0),
    ]
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_zone_integration(p in profile_strategy(), d in 0.0f64..300.0, u in 0.0f64..1.2) {
        let span = *p.boundaries.last().unwrap();
        let t = u * span;
        let tau = build_travel_time(d, &p).unwrap();
        let got = tau.eval(t).unwrap();
        let want = stepwise_travel(&p.boundaries, &p.speeds, d, t);
        prop_assert!(close(got, want), "tau({t}) = {got}, integration gives {want}");
    }

    #[test]
    fn named_shapes_match(k in 0usize..6, d in 0.0f64..300.0, t in 0.0f64..480.0) {
        let p = &named_shapes()[k];
        let got = build_travel_time(d, p).unwrap().eval(t).unwrap();
        prop_assert!(close(got, stepwise_travel(&p.boundaries, &p.speeds, d, t)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn arrival_is_monotone(p in profile_strategy(), d in 0.0f64..300.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let span = *p.boundaries.last().unwrap();
        let tau = build_travel_time(d, &p).unwrap();
        for _ in 0..10_000 {
            let a = rng.random_range(0.0..span * 1.2);
            let b = rng.random_range(0.0..span * 1.2);
            let (t1, t2) = (a.min(b), a.max(b));
            let (r1, r2) = (t1 + tau.eval(t1).unwrap(), t2 + tau.eval(t2).unwrap());
            prop_assert!(r1 <= r2 + 1e-9 * r2.abs().max(1.0), "arrival {r1} at {t1} after {r2} at {t2}");
        }
    }

    #[test]
    fn breakpoint_count_is_bounded(p in profile_strategy(), d in 0.1f64..300.0) {
        let tau = build_travel_time(d, &p).unwrap();
        prop_assert!(tau.breakpoints().count() <= 2 * p.zones());
    }
}
