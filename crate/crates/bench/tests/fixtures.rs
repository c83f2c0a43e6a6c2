use comamba_bench::{feature_stack, scan_fixture};
use comamba_core::ssm::{selective_scan, selective_scan_forward};

#[test]
fn scan_fixture_is_valid_and_deterministic() {
    let f = scan_fixture(64, 4, 8, 5);
    let y = selective_scan(&f.u, &f.sel, &f.a_log, &f.d_skip).unwrap();
    let (y2, _) = selective_scan_forward(&f.u, &f.sel, &f.a_log, &f.d_skip).unwrap();
    assert!(y.all_finite());
    assert!(y.max_abs_diff(&y2) < 1e-12);
    assert_eq!(scan_fixture(64, 4, 8, 5).u, f.u);
}

#[test]
fn feature_stack_depends_on_seed() {
    assert_eq!(feature_stack(2, 3, 3, 4, 1).tensor(), feature_stack(2, 3, 3, 4, 1).tensor());
    assert_ne!(feature_stack(2, 3, 3, 4, 1).tensor(), feature_stack(2, 3, 3, 4, 2).tensor());
}
