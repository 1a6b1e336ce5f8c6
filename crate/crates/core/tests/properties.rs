use maxdist::diagnostics::std_normal_cdf;
use maxdist::moments::rho_from_moments;
use maxdist::{
    blocked_gram_max_sq, chen_stein_bound, chen_stein_interpoint, gaussian_profile, gaussian_z, max_interpoint,
    normalized_statistic, qnorm_pow_q_distance, regime_sequence, Atom, ChenSteinMode, DataMatrix, DistanceSpec,
    DistributionSpec, GrowthRegime, MomentProfile, ProfileSource, Threshold,
};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = DataMatrix> {
    (2usize..24, 1usize..20).prop_flat_map(|(p, n)| {
        prop::collection::vec(-10.0f64..10.0, p * n).prop_map(move |v| DataMatrix::new(p, n, v).unwrap())
    })
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(3.0), 1.0f64..4.0]
}

fn brute_force(m: &DataMatrix, q: f64) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.rows() {
        for j in i + 1..m.rows() {
            let s: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b).abs().powf(q)).sum();
            best = best.max(s);
        }
    }
    best
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn naive_matches_brute_force(m in matrix(), q in exponent()) {
        let r = max_interpoint(&m, &DistanceSpec::naive(q)).unwrap();
        prop_assert!(close(r.value_pow_q, brute_force(&m, q), 1e-12));
        let at = qnorm_pow_q_distance(m.row(r.arg_i), m.row(r.arg_j), q).unwrap();
        prop_assert_eq!(at, r.value_pow_q);
        prop_assert!(close(r.value, r.value_pow_q.powf(1.0 / q), 1e-12));
    }

    #[test]
    fn kernels_agree_at_two(m in matrix(), tile in 1usize..80) {
        let naive = max_interpoint(&m, &DistanceSpec::naive(2.0)).unwrap();
        let gram = max_interpoint(&m, &DistanceSpec::blocked_gram(tile)).unwrap();
        prop_assert!(close(naive.value_pow_q, gram.value_pow_q, 1e-9));
    }

    #[test]
    fn gram_is_tile_independent(m in matrix(), a in 1usize..70, b in 1usize..70) {
        prop_assert_eq!(blocked_gram_max_sq(&m, a).unwrap(), blocked_gram_max_sq(&m, b).unwrap());
    }

    #[test]
    fn translation_invariance(m in matrix(), shift in -50.0f64..50.0, q in exponent()) {
        let shift: Vec<f64> = (0..m.cols()).map(|k| shift * (k as f64 + 1.0).sqrt()).collect();
        let moved = m.translate(&shift).unwrap();
        let rel = 1e-9;
        for spec in [DistanceSpec::naive(q), DistanceSpec::blocked_gram(16)] {
            if spec.validate().is_err() {
                continue;
            }
            let a = max_interpoint(&m, &spec).unwrap().value_pow_q;
            let b = max_interpoint(&moved, &spec).unwrap().value_pow_q;
            prop_assert!(close(a, b, rel), "{a} vs {b}");
        }
    }

    #[test]
    fn permutation_invariance(m in matrix(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..m.rows()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = m.permute_rows(&order).unwrap();
        let a = max_interpoint(&m, &DistanceSpec::naive(2.0)).unwrap();
        let b = max_interpoint(&shuffled, &DistanceSpec::naive(2.0)).unwrap();
        prop_assert_eq!(a.value_pow_q, b.value_pow_q);
        let g = max_interpoint(&shuffled, &DistanceSpec::blocked_gram(8)).unwrap();
        prop_assert!(close(a.value_pow_q, g.value_pow_q, 1e-9));
    }

    #[test]
    fn scaling_equivariance(m in matrix(), c in prop_oneof![-8.0f64..-0.125, 0.125f64..8.0], q in exponent()) {
        let scaled = m.map(|v| c * v).unwrap();
        let a = max_interpoint(&m, &DistanceSpec::naive(q)).unwrap().value_pow_q;
        let b = max_interpoint(&scaled, &DistanceSpec::naive(q)).unwrap().value_pow_q;
        prop_assert!(close(b, c.abs().powf(q) * a, 1e-9));
    }

    #[test]
    fn extra_column_never_shrinks(m in matrix(), col in prop::collection::vec(-10.0f64..10.0, 24), q in exponent()) {
        let wider = m.append_column(&col[..m.rows()]).unwrap();
        let a = max_interpoint(&m, &DistanceSpec::naive(q)).unwrap().value_pow_q;
        let b = max_interpoint(&wider, &DistanceSpec::naive(q)).unwrap().value_pow_q;
        prop_assert!(b >= a);
    }

    #[test]
    fn pair_distance_symmetric(
        v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
        q in exponent(),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let ab = qnorm_pow_q_distance(&a, &b, q).unwrap();
        prop_assert_eq!(ab, qnorm_pow_q_distance(&b, &a, q).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(qnorm_pow_q_distance(&a, &a, q).unwrap(), 0.0);
    }

    #[test]
    fn rho_is_scale_invariant(m2 in 0.01f64..10.0, kurt in 1.0f64..20.0, c in 0.01f64..100.0) {
        let m4 = kurt * m2 * m2;
        let a = rho_from_moments(m2, m4);
        let b = rho_from_moments(c * c * m2, c.powi(4) * m4);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn z_scale_equivariance(
        m_sq in 0.0f64..5000.0,
        n in 1usize..2000,
        p in 2usize..5000,
        c in 0.01f64..100.0,
    ) {
        let base = MomentProfile::from_central_moments(0.0, 1.0, 3.0, ProfileSource::Analytic).unwrap();
        let scaled = MomentProfile::from_central_moments(0.0, c * c, 3.0 * c.powi(4), ProfileSource::Analytic).unwrap();
        let a = normalized_statistic(m_sq, n, p, &base).unwrap();
        let b = normalized_statistic(c * c * m_sq, n, p, &scaled).unwrap();
        prop_assert!((a.z - b.z).abs() <= 1e-9 * a.z.abs().max(1.0));
        // M^q is recovered from z.
        prop_assert!(close(a.center + a.scale * a.z, m_sq, 1e-12) || (a.center + a.scale * a.z - m_sq).abs() < 1e-9);
        let g = gaussian_z(m_sq, n, p).unwrap();
        prop_assert!((g - a.z).abs() <= 1e-12 * g.abs().max(1.0));
    }

    #[test]
    fn gaussian_profile_matches_closed_form_z(m_sq in 0.0f64..1e4, n in 1usize..1000, p in 2usize..1000) {
        let prof = gaussian_profile(2.0).unwrap();
        let a = normalized_statistic(m_sq, n, p, &prof).unwrap().z;
        let b = gaussian_z(m_sq, n, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn bound_is_monotone(
        l in 0.0f64..10.0, b1 in 0.0f64..5.0, b2 in 0.0f64..5.0, b3 in 0.0f64..5.0,
        d in 0.0f64..1.0, which in 0usize..3,
    ) {
        let base = chen_stein_bound(l, b1, b2, b3).unwrap();
        let bumped = match which {
            0 => chen_stein_bound(l, b1 + d, b2, b3),
            1 => chen_stein_bound(l, b1, b2 + d, b3),
            _ => chen_stein_bound(l, b1, b2, b3 + d),
        }
        .unwrap();
        prop_assert!(bumped >= base);
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn normal_cdf_monotone_and_symmetric(x in -30.0f64..30.0, d in 0.0f64..5.0) {
        prop_assert!(std_normal_cdf(x + d) >= std_normal_cdf(x));
        prop_assert!((std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))).abs() < 1e-15);
        let c = std_normal_cdf(x);
        prop_assert!((0.0..=1.0).contains(&c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bound_shrinks_with_lambda_beyond_one(l in 1.0f64..50.0, d in 0.0f64..10.0, b in 0.0f64..5.0) {
        prop_assert!(chen_stein_bound(l + d, b, b, 0.0).unwrap() <= chen_stein_bound(l, b, b, 0.0).unwrap());
    }

    #[test]
    fn passing_profiles_have_bounded_pair_sum_variance(m2 in 1e-3f64..1e3, kurt in 1.0f64..5.0) {
        let prof = MomentProfile::from_central_moments(0.0, m2, kurt * m2 * m2, ProfileSource::Analytic).unwrap();
        prop_assume!(prof.rho < 1.0 / 3.0);
        prop_assert!((prof.pair_sum_var - (2.0 + 2.0 * prof.rho)).abs() < 1e-12);
        prop_assert!(prof.pair_sum_var >= 0.0 && prof.pair_sum_var < 8.0 / 3.0);
    }

    #[test]
    fn polynomial_regime_stays_in_band(
        tau in 0.2f64..2.0,
        c1 in 0.1f64..3.0,
        width in 1.0f64..4.0,
        start in 2usize..50,
        steps in prop::collection::vec(1usize..40, 1..8),
    ) {
        let c2 = c1 * width;
        let mut n_values = vec![start];
        for s in steps {
            n_values.push(n_values.last().unwrap() + s);
        }
        let regime = GrowthRegime::Polynomial { tau, c1, c2 };
        match regime_sequence(&regime, &n_values) {
            Ok(seq) => {
                for (p, n) in seq {
                    let ratio = p as f64 / (n as f64).powf(tau);
                    prop_assert!(p >= 2);
                    prop_assert!(c1 <= ratio * (1.0 + 1e-12) && ratio <= c2 * (1.0 + 1e-12), "p={} n={}", p, n);
                }
            }
            Err(e) => prop_assert!(e.to_string().contains("no integer p")),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn correlation_condition_equals_kurtosis_condition(m2 in 1e-3f64..1e3, kurt in 1.0f64..12.0) {
        let m4 = kurt * m2 * m2;
        let rho = rho_from_moments(m2, m4);
        // Stay off the boundary where rounding decides both sides.
        prop_assume!((kurt - 5.0).abs() > 1e-9);
        prop_assert_eq!(rho < 1.0 / 3.0, m4 < 5.0 * m2 * m2);
    }
}

/// Up to three distinct atoms with probabilities in eighths, so every
/// probability sum in the enumeration is exact.
fn dyadic_discrete() -> impl Strategy<Value = DistributionSpec> {
    (2usize..=3).prop_flat_map(|k| {
        let values = prop::sample::subsequence((-6..=6).collect::<Vec<i32>>(), k).prop_shuffle();
        let cuts = prop::sample::subsequence((1..8).collect::<Vec<u32>>(), k - 1);
        (values, cuts).prop_map(|(values, cuts)| {
            let mut bounds = vec![0];
            bounds.extend(cuts);
            bounds.push(8);
            let atoms = values
                .iter()
                .zip(bounds.windows(2))
                .map(|(&v, w)| Atom {
                    value: v as f64 * 0.5,
                    prob: (w[1] - w[0]) as f64 / 8.0,
                })
                .collect();
            DistributionSpec::Discrete { atoms }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // With empty neighborhoods at p = 2 the bound collapses to b1 = b2 = 0
    // while the gap does not, so only p ≥ 3 is checked.
    #[test]
    fn exact_gap_within_bound(dist in dyadic_discrete(), p in 3usize..=4, n in 1usize..=2, t in -1.0f64..80.0) {
        let r = chen_stein_interpoint(
            &dist,
            p,
            n,
            Threshold::SquaredDistance(t),
            ChenSteinMode::ExactEnumeration,
            1 << 20,
            0,
        )
        .unwrap();
        prop_assert!(r.within_bound(0.0), "{dist:?} p={p} n={n} t={t}: gap {} bound {}", r.gap, r.bound);
        prop_assert!((0.0..=1.0).contains(&r.p_max_le_t));
    }
}
