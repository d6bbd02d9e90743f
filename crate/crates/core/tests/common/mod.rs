use sebp_core::distributions::Distribution;
use sebp_core::instances::Instance;

pub fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
}

/// Two machines; jobs {0.4, 1.2}@1/2, {0.5, 0.7}@1/2, and a 0.4 point mass.
pub fn figure_instance() -> Instance {
    Instance::new(
        2,
        vec![
            Distribution::finite(vec![(0.4, 0.5), (1.2, 0.5)]).unwrap(),
            Distribution::finite(vec![(0.5, 0.5), (0.7, 0.5)]).unwrap(),
            Distribution::deterministic(0.4).unwrap(),
        ],
    )
    .unwrap()
}
