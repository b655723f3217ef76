mod common;

use masktrack::msn::MsnArch;

#[test]
fn toy_network_gradients_match_finite_differences() {
    let report = common::finite_difference_check(MsnArch::toy(8), 21, 1e-5);
    assert_eq!(report.len(), 5);
    for r in &report {
        assert!(
            r.max_rel_error < 1e-4,
            "{}: {:e}",
            r.tensor,
            r.max_rel_error
        );
    }
}

#[test]
fn reduced_network_gradients_match_finite_differences() {
    let report = common::finite_difference_check(common::gradcheck_arch(), 7, 1e-5);
    for r in &report {
        assert!(
            r.max_rel_error < 1e-4,
            "{}: {:e}",
            r.tensor,
            r.max_rel_error
        );
    }
}
