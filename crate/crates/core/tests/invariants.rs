use proptest::prelude::*;

use dtilt::cgf::{
    cgf_curve, cgf_finite, cgf_limit, cgf_limit_slope, perron_root, rate_function,
    transfer_eigenvalues,
};
use dtilt::exact::{cgf_from_pmf, distortion_shift};
use dtilt::tilt::{asymptotic_variance, jtilt_generic};
use dtilt::{
    centered_cumulants, derive_chain, jtilt, occupation_pgf, occupation_pmf, variance_exact,
    ChainParams, DistortionLevel, State, VarianceMethod,
};

fn chain() -> impl Strategy<Value = ChainParams> {
    (0.02f64..0.98, 0.02f64..0.98).prop_map(|(a, b)| derive_chain(a, b).unwrap())
}

fn asymmetric_chain() -> impl Strategy<Value = ChainParams> {
    chain().prop_filter("needs a != b", |c| (c.a() - c.b()).abs() > 0.02)
}

/// A chain with an interior distortion level, given as a fraction of the limit.
fn chain_and_distortion() -> impl Strategy<Value = (ChainParams, DistortionLevel)> {
    (chain(), 0.02f64..0.98).prop_map(|(c, f)| {
        let d = DistortionLevel::interior(&c, f * c.pi0().min(c.pi1())).unwrap();
        (c, d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generic_definition_matches_closed_form((c, d) in chain_and_distortion()) {
        for x in State::ALL {
            let closed = jtilt(&c, d, x).unwrap();
            let generic = jtilt_generic(&c, d, x).unwrap();
            prop_assert!((closed - generic).abs() < 1e-10 * closed.abs().max(1.0));
        }
    }

    #[test]
    fn distortion_enters_additively((c, d) in chain_and_distortion(), g in 0.02f64..0.98) {
        let d2 = DistortionLevel::interior(&c, g * c.pi0().min(c.pi1())).unwrap();
        let shift = distortion_shift(d, d2);
        for x in State::ALL {
            let gap = jtilt(&c, d, x).unwrap() - jtilt(&c, d2, x).unwrap();
            prop_assert!((gap - shift).abs() < 1e-12);
        }
    }

    #[test]
    fn pmf_is_normalised_with_stationary_mean(c in chain(), n in 1usize..400) {
        let pmf = occupation_pmf(&c, n).unwrap();
        prop_assert!((pmf.total() - 1.0).abs() < 1e-12);
        prop_assert!(pmf.probs().iter().all(|&p| p >= 0.0));
        prop_assert!((pmf.mean() - n as f64 * c.pi1()).abs() < 1e-10 * n as f64);
    }

    #[test]
    fn pgf_matches_pmf(c in chain(), n in 1usize..200, u in 0.1f64..3.0) {
        let pmf = occupation_pmf(&c, n).unwrap();
        let direct = pmf.pgf(u);
        let transfer = occupation_pgf(&c, n, u).unwrap().value();
        prop_assert!((direct - transfer).abs() <= 1e-10 * direct.abs());
    }

    #[test]
    fn variance_formulas_agree(c in chain(), n in 1usize..5000) {
        let s = variance_exact(&c, n, VarianceMethod::DoubleSum).unwrap();
        let f = variance_exact(&c, n, VarianceMethod::ClosedForm).unwrap();
        prop_assert!((s - f).abs() <= 1e-10 * s.abs().max(f.abs()).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn pmf_variance_matches_closed_form((c, d) in chain_and_distortion(), n in 1usize..60) {
        let k2 = centered_cumulants(&c, d, n, 2).unwrap()[0];
        let f = variance_exact(&c, n, VarianceMethod::ClosedForm).unwrap();
        prop_assert!((k2 - f).abs() <= 1e-9 * f.max(1e-12));
    }

    #[test]
    fn per_letter_variance_rises_to_its_limit(c in asymmetric_chain(), n in 1usize..300) {
        prop_assume!(c.lambda2() > 0.0);
        let v = |n: usize| variance_exact(&c, n, VarianceMethod::ClosedForm).unwrap() / n as f64;
        let limit = asymptotic_variance(&c);
        prop_assert!(v(n + 1) >= v(n) * (1.0 - 1e-12));
        prop_assert!(v(n) <= limit * (1.0 + 1e-12));
    }

    #[test]
    fn cumulants_do_not_depend_on_distortion(c in chain(), f in 0.05f64..0.95, g in 0.05f64..0.95) {
        let limit = c.pi0().min(c.pi1());
        let d1 = DistortionLevel::interior(&c, f * limit).unwrap();
        let d2 = DistortionLevel::interior(&c, g * limit).unwrap();
        let k1 = centered_cumulants(&c, d1, 15, 6).unwrap();
        let k2 = centered_cumulants(&c, d2, 15, 6).unwrap();
        prop_assert_eq!(k1, k2);
    }

    #[test]
    fn transfer_cgf_matches_pmf(c in chain(), n in 1usize..64, theta in -3.0f64..3.0) {
        let pmf = occupation_pmf(&c, n).unwrap();
        let t = cgf_finite(&c, n, theta).unwrap();
        prop_assert!((t - cgf_from_pmf(&c, &pmf, theta)).abs() < 1e-10);
    }

    #[test]
    fn perron_root_dominates(c in chain(), u in 0.01f64..20.0) {
        let (hi, lo) = transfer_eigenvalues(&c, u);
        prop_assert!(hi > 0.0 && hi >= lo.abs());
        prop_assert!((hi - perron_root(&c, u)).abs() <= 1e-14 * hi);
        // trace and determinant of P diag(1, u)
        prop_assert!((hi + lo - ((1.0 - c.a()) + (1.0 - c.b()) * u)).abs() < 1e-12 * (1.0 + u));
        prop_assert!((hi * lo - c.lambda2() * u).abs() < 1e-12 * (1.0 + u));
    }

    #[test]
    fn cgfs_are_convex(c in asymmetric_chain(), n in 1usize..200) {
        let thetas: Vec<f64> = (-20..=20).map(|i| 0.1 * i as f64).collect();
        let curve = cgf_curve(&c, n, &thetas).unwrap();
        let (fin, lim) = curve.min_second_differences();
        prop_assert!(fin >= -1e-12 && lim >= -1e-12, "{} {}", fin, lim);
        prop_assert!(cgf_limit(&c, 0.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_inversion(c in asymmetric_chain(), theta in -2.0f64..2.0) {
        prop_assume!(theta.abs() > 1e-3);
        let x = cgf_limit_slope(&c, theta);
        let p = rate_function(&c, x, 1e-12).unwrap();
        prop_assert!(p.rate >= 0.0);
        let want = theta * x - cgf_limit(&c, theta);
        prop_assert!((p.rate - want).abs() < 1e-8, "{} vs {}", p.rate, want);
    }
}

#[test]
fn rate_vanishes_only_at_the_origin() {
    let c = derive_chain(0.1, 0.3).unwrap();
    assert_eq!(rate_function(&c, 0.0, 1e-10).unwrap().rate, 0.0);
    for x in [-0.3, -0.1, 0.05, 0.2, 0.8] {
        assert!(rate_function(&c, x, 1e-10).unwrap().rate > 0.0, "x={x}");
    }
    assert!(rate_function(&c, -0.5, 1e-10).is_err());
}
