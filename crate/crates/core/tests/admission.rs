mod common;

use common::admission::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn births_never_intersect_same_class(s in stream()) {
        let tracks = track(&s, &default_config()).unwrap();
        prop_assert!(check_no_intersecting_births(&tracks).is_ok(), "{:?}", check_no_intersecting_births(&tracks));
        prop_assert!(check_cap(&tracks, 15).is_ok());
    }

    #[test]
    fn small_caps_hold(s in stream(), cap in 1usize..6) {
        let config = masktrack::pipeline::PipelineConfig { max_objects: cap, ..default_config() };
        let tracks = track(&s, &config).unwrap();
        prop_assert!(check_cap(&tracks, cap).is_ok());
    }

    #[test]
    fn crowd_keeps_fifteen_best(s in crowd()) {
        let tracks = track(&s, &default_config()).unwrap();
        let verdict = check_crowd(&s, &tracks, 15);
        prop_assert!(verdict.is_ok(), "{:?}", verdict);
    }
}
