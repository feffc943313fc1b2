use dtilt::exact::block_mean;
use dtilt::montecarlo::{clt_distance_sweep, simulate, simulate_with, SimOptions, Standardization};
use dtilt::{derive_chain, variance_exact, DistortionLevel, VarianceMethod};

fn lvl(d: f64) -> DistortionLevel {
    DistortionLevel::new(d).unwrap()
}

#[test]
fn report_does_not_depend_on_thread_count() {
    let c = derive_chain(0.2, 0.5).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&c, lvl(0.15), 64, 2000, 31).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn sample_mean_within_four_standard_errors() {
    for (a, b) in [(0.1, 0.3), (0.7, 0.2), (0.9, 0.6)] {
        let c = derive_chain(a, b).unwrap();
        let d = DistortionLevel::interior(&c, 0.1).unwrap();
        let n = 40;
        let r = simulate(&c, d, n, 20_000, 3).unwrap();
        let se = (r.emp_var / r.replications as f64).sqrt();
        let want = block_mean(&c, d, n).unwrap();
        assert!(
            (r.emp_mean - want).abs() < 4.0 * se,
            "({a},{b}): {} vs {want}",
            r.emp_mean
        );
    }
}

#[test]
fn sample_variance_tracks_exact_variance() {
    let c = derive_chain(0.7, 0.2).unwrap();
    let n = 30;
    let r = simulate(&c, lvl(0.1), n, 50_000, 8).unwrap();
    let want = variance_exact(&c, n, VarianceMethod::ClosedForm).unwrap();
    assert!((r.emp_var - want).abs() < 4.0 * r.emp_var_se);
}

#[test]
fn kolmogorov_distances_are_small_for_large_samples() {
    let c = derive_chain(0.1, 0.3).unwrap();
    let r = simulate(&c, lvl(0.1), 200, 40_000, 17).unwrap();
    // DKW at 1e-6 confidence
    let dkw = ((2.0f64 / 1e-6).ln() / (2.0 * 40_000.0)).sqrt();
    assert!(r.ks_exact < dkw, "{} vs {dkw}", r.ks_exact);
    let finite = simulate_with(
        &c,
        lvl(0.1),
        200,
        40_000,
        17,
        SimOptions {
            standardization: Standardization::FiniteN,
            ..SimOptions::default()
        },
    )
    .unwrap();
    assert_eq!(finite.ks_exact, r.ks_exact);
    assert!(r.ks_normal.unwrap() < 0.1 && finite.ks_normal.unwrap() < 0.1);
}

#[test]
fn clt_sweep_shrinks() {
    let c = derive_chain(0.1, 0.3).unwrap();
    let pts = clt_distance_sweep(&c, lvl(0.1), &[25, 100, 400], 2000, 1).unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts
        .windows(2)
        .all(|w| w[1].ks_exact_normal < w[0].ks_exact_normal));
}
