use std::f64::consts::PI;

use maxdist::diagnostics::{eta, pair_statistics, std_normal_sf};
use maxdist::{
    analytic_profile, gaussian_profile, mdp_ratio, profile_from_data, profile_from_sampler, sample_matrix,
    std_normal_cdf, DistributionSpec, ProfileSource,
};

fn within(est: f64, se: f64, truth: f64, sigmas: f64) -> bool {
    (est - truth).abs() <= sigmas * se
}

/// Composite Simpson's rule for the standard normal density on [0, x].
fn simpson_phi(x: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    0.5 + s * h / 3.0
}

#[test]
fn normal_cdf_against_quadrature() {
    for x in [0.25, 1.0, 1.96, 3.0] {
        let oracle = simpson_phi(x);
        assert!(
            (std_normal_cdf(x) - oracle).abs() < 1e-12,
            "x = {x}: {} vs {oracle}",
            std_normal_cdf(x)
        );
        assert!((std_normal_sf(x) - (1.0 - oracle)).abs() < 1e-12);
    }
    assert!((std_normal_cdf(1.0) - 0.8413447461).abs() < 1e-9);
    assert_eq!(std_normal_cdf(0.0), 0.5);
}

#[test]
fn monte_carlo_profiles_bracket_closed_forms() {
    let cases = [
        (DistributionSpec::standard_normal(), 1.0 / 4.0, 3.0),
        (DistributionSpec::Uniform { a: -1.0, b: 1.0 }, 1.0 / 7.0, 1.0 / 5.0),
    ];
    for (dist, rho, m4) in cases {
        let est = profile_from_sampler(&dist, 2.0, 1_000_000, 2024).unwrap();
        let se = est.std_errors.unwrap();
        assert_eq!(est.source, ProfileSource::MonteCarloEstimate);
        assert!(
            within(est.rho, se.rho, rho, 3.0),
            "{dist}: rho {} ± {}",
            est.rho,
            se.rho
        );
        assert!(within(est.m4, se.m4, m4, 3.0), "{dist}: m4 {} ± {}", est.m4, se.m4);
        let exact = analytic_profile(&dist, 2.0).unwrap().unwrap();
        assert!(within(est.pair_mean_q, se.pair_mean_q, exact.pair_mean_q, 3.0));
        assert!(within(est.pair_var_q, se.pair_var_q, exact.pair_var_q, 3.0));
    }
}

#[test]
fn absolute_difference_moments_at_q_one() {
    // X − Y ~ N(0, 2): E|X−Y| = 2/√π, E|X−Y|² = 2.
    let g = gaussian_profile(1.0).unwrap();
    let se = g.std_errors.unwrap();
    assert!(within(g.pair_mean_q, se.pair_mean_q, 2.0 / PI.sqrt(), 3.0));
    assert!(within(g.pair_var_q, se.pair_var_q, 2.0 - 4.0 / PI, 3.0));

    // Uniform(−1, 1): E|X−Y| = 2/3, E|X−Y|² = 2/3.
    let u = profile_from_sampler(&DistributionSpec::Uniform { a: -1.0, b: 1.0 }, 1.0, 1_000_000, 7).unwrap();
    let se = u.std_errors.unwrap();
    assert!(within(u.pair_mean_q, se.pair_mean_q, 2.0 / 3.0, 3.0));
    assert!(within(u.pair_var_q, se.pair_var_q, 2.0 / 9.0, 3.0));
}

#[test]
fn discrete_enumeration_agrees_with_sampling() {
    let dist: DistributionSpec = "discrete:-1=0.25,0=0.25,3=0.5".parse().unwrap();
    for q in [1.0, 1.5, 3.0] {
        let exact = analytic_profile(&dist, q).unwrap().unwrap();
        let est = profile_from_sampler(&dist, q, 1_000_000, 11).unwrap();
        let se = est.std_errors.unwrap();
        assert!(
            within(est.pair_mean_q, se.pair_mean_q, exact.pair_mean_q, 3.0),
            "q = {q}"
        );
        assert!(within(est.pair_var_q, se.pair_var_q, exact.pair_var_q, 3.0), "q = {q}");
        assert!(within(est.rho, se.rho, exact.rho, 3.0), "q = {q}");
    }
}

#[test]
fn data_profiles_match_closed_forms() {
    // Standard errors of sample moments from E X⁴, E X⁸:
    // Gaussian 3 and 105, Uniform(−1, 1) 1/5 and 1/9.
    let n = 1e6f64;
    let cases = [
        (DistributionSpec::standard_normal(), 1.0, 3.0, 105.0),
        (
            DistributionSpec::Uniform { a: -1.0, b: 1.0 },
            1.0 / 3.0,
            1.0 / 5.0,
            1.0 / 9.0,
        ),
    ];
    for (dist, m2, m4, m8) in cases {
        let m = sample_matrix(&dist, 1000, 1000, 1).unwrap();
        let prof = profile_from_data(&m, 2.0).unwrap();
        assert_eq!(prof.source, ProfileSource::SampleEstimate);
        assert!(
            (prof.m2 - m2).abs() < 3.0 * ((m4 - m2 * m2) / n).sqrt(),
            "{dist}: m2 {}",
            prof.m2
        );
        assert!(
            (prof.m4 - m4).abs() < 3.0 * ((m8 - m4 * m4) / n).sqrt(),
            "{dist}: m4 {}",
            prof.m4
        );
    }
    let g = profile_from_data(
        &sample_matrix(&DistributionSpec::standard_normal(), 1000, 1000, 1).unwrap(),
        2.0,
    )
    .unwrap();
    assert!((g.m4 - 3.0).abs() < 0.05);
}

#[test]
fn sampler_marginals() {
    let sparse = sample_matrix(
        &DistributionSpec::SparseTwoPoint { a: 1.0, epsilon: 0.1 },
        1000,
        1000,
        3,
    )
    .unwrap();
    let nonzero = sparse.values().iter().filter(|&&v| v != 0.0).count() as f64 / 1e6;
    assert!(
        (nonzero - 0.1).abs() < 3.0 * (0.09f64 / 1e6).sqrt() + 1e-12,
        "{nonzero}"
    );
    let plus = sparse.values().iter().filter(|&&v| v == 1.0).count() as f64 / 1e6;
    assert!((plus - 0.05).abs() < 3.0 * (0.0475f64 / 1e6).sqrt());
    assert!(sparse.values().iter().all(|&v| v == 0.0 || v.abs() == 1.0));

    let uniform = sample_matrix(&DistributionSpec::Uniform { a: -1.0, b: 1.0 }, 1000, 1000, 4).unwrap();
    let m2 = uniform.values().iter().map(|v| v * v).sum::<f64>() / 1e6;
    // Var(X²) = 1/5 − 1/9 for Uniform(−1, 1).
    assert!((m2 - 1.0 / 3.0).abs() < 3.0 * ((1.0 / 5.0 - 1.0 / 9.0) / 1e6f64).sqrt());
    assert!(uniform.values().iter().all(|v| v.abs() < 1.0));

    let exp = sample_matrix(&DistributionSpec::CenteredExponential { rate: 2.0 }, 1000, 1000, 5).unwrap();
    let mean = exp.values().iter().sum::<f64>() / 1e6;
    assert!(mean.abs() < 3.0 * 0.5 / 1e3);
    assert!(exp.values().iter().all(|&v| v > -0.5));
}

#[test]
fn eta_is_standardized() {
    let prof = gaussian_profile(2.0).unwrap();
    let m = sample_matrix(&DistributionSpec::standard_normal(), 2, 1_000_000, 6).unwrap();
    let etas: Vec<f64> = (0..m.cols()).map(|k| eta(m.get(0, k), m.get(1, k), &prof)).collect();
    let n = etas.len() as f64;
    let mean = etas.iter().sum::<f64>() / n;
    let var = etas.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // η = (χ²₁ − 1)/√2, so E η⁴ = 15.
    assert!(mean.abs() < 3.0 / n.sqrt());
    assert!((var - 1.0).abs() < 3.0 * (14.0 / n).sqrt());
}

#[test]
fn pair_sums_reconstruct_distances() {
    let prof = gaussian_profile(2.0).unwrap();
    let m = sample_matrix(&DistributionSpec::standard_normal(), 7, 40, 8).unwrap();
    let stats = pair_statistics(&m, &prof).unwrap();
    assert_eq!(stats.len(), 21);
    for s in stats {
        let d: f64 = m.row(s.i).iter().zip(m.row(s.j)).map(|(a, b)| (a - b).powi(2)).sum();
        let back = 40.0 * prof.pair_mean_q + s.sum * prof.pair_var_q.sqrt();
        assert!((back - d).abs() < 1e-9 * d.max(1.0));
        assert!((s.normalized - s.sum / 40f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn moderate_deviation_ratio_for_normal_sums() {
    // Sums of normals are exactly normal, so the ratio is 1.
    let est = mdp_ratio(&DistributionSpec::standard_normal(), 100, 1.0, 1_000_000, 17).unwrap();
    assert!((est.ratio - 1.0).abs() < 0.02, "{est:?}");
    assert!(within(est.ratio, est.std_error, 1.0, 4.0));
    assert!(!est.low_count);
}

#[test]
fn moderate_deviation_ratio_at_zero() {
    for dist in [
        DistributionSpec::Uniform { a: -1.0, b: 1.0 },
        DistributionSpec::standard_normal(),
    ] {
        let est = mdp_ratio(&dist, 25, 0.0, 1_000_000, 23).unwrap();
        assert!((est.ratio - 1.0).abs() < 0.01, "{dist}: {}", est.ratio);
    }
}

#[test]
fn moderate_deviation_ratio_is_reproducible() {
    let dist = DistributionSpec::CenteredExponential { rate: 1.0 };
    let a = mdp_ratio(&dist, 30, 1.2, 100_000, 99).unwrap();
    let b = mdp_ratio(&dist, 30, 1.2, 100_000, 99).unwrap();
    assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
    assert_eq!(a.exceedances, b.exceedances);
}
