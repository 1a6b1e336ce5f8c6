//! Moment profiles of the entry distribution and of the pair differences
//! `|X₁ − X₂|^q`, and the admissibility condition
//! `Corr(|X₁−X₂|^q, |X₁−X₃|^q) < 1/3`.
//!
//! For `q = 2` and centered `X` with `m2 = E X²`, `m4 = E X⁴`:
//!
//! ```text
//! E|X₁−X₂|²   = 2·m2
//! Var|X₁−X₂|² = 2(m4 + m2²)
//! Cov         = m4 − m2²
//! ρ           = (m4 − m2²) / (2(m4 + m2²))
//! ```
//!
//! so `ρ < 1/3 ⟺ m4 < 5·m2²`. Other exponents have no closed form for
//! continuous families and are estimated from sampled triples.

use rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{Atom, DistributionSpec};
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::rng::{open01, stream, Domain};

/// Default number of triples for Monte Carlo profiles.
pub const DEFAULT_PROFILE_SAMPLES: u64 = 1_000_000;
/// Seed used when a profile estimate is requested without one.
pub const DEFAULT_PROFILE_SEED: u64 = 0x005E_ED0F_7A1E;
/// Seed for resampling the empirical distribution of a data matrix.
pub const DATA_RESAMPLE_SEED: u64 = 0xDA7A;
/// Fixed number of shards; each shard draws from its own stream so the
/// estimate does not depend on the thread count. Shard spread also gives
/// the batch-means standard errors.
const SHARDS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileSource {
    Analytic,
    MonteCarloEstimate,
    SampleEstimate,
}

/// Batch-means standard errors of a Monte Carlo profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileErrors {
    pub pair_mean_q: f64,
    pub pair_var_q: f64,
    pub rho: f64,
    pub rho_q2: f64,
    pub m4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub mu: f64,
    pub sigma2: f64,
    /// `E|X−μ|²`.
    pub m2: f64,
    /// `E|X−μ|⁴`.
    pub m4: f64,
    pub q: f64,
    /// `E|X₁−X₂|^q`.
    pub pair_mean_q: f64,
    /// `Var(|X₁−X₂|^q)`.
    pub pair_var_q: f64,
    /// `Corr(|X₁−X₂|^q, |X₁−X₃|^q)`.
    pub rho: f64,
    /// The same correlation at `q = 2`, which is what the correlation
    /// hypothesis is stated with for every exponent.
    pub rho_q2: f64,
    /// `Var(η₁₂ₖ + η₁₃ₖ) = 2 + 2ρ`.
    pub pair_sum_var: f64,
    pub source: ProfileSource,
    pub std_errors: Option<ProfileErrors>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

impl MomentProfile {
    /// Closed-form `q = 2` profile from the first two even central moments.
    pub fn from_central_moments(mu: f64, m2: f64, m4: f64, source: ProfileSource) -> Result<Self> {
        if !(m2 > 0.0) || !m2.is_finite() || !m4.is_finite() {
            return Err(Error::Degenerate(format!("second moment {m2} is not positive")));
        }
        let rho = rho_from_moments(m2, m4);
        Ok(Self {
            mu,
            sigma2: m2,
            m2,
            m4,
            q: 2.0,
            pair_mean_q: 2.0 * m2,
            pair_var_q: 2.0 * (m4 + m2 * m2),
            rho,
            rho_q2: rho,
            pair_sum_var: 2.0 + 2.0 * rho,
            source,
            std_errors: None,
            samples: None,
            seed: None,
        })
    }

    pub fn kurtosis_ratio(&self) -> f64 {
        self.m4 / (self.m2 * self.m2)
    }
}

/// `(m4 − m2²) / (2(m4 + m2²))`.
pub fn rho_from_moments(m2: f64, m4: f64) -> f64 {
    let s = m2 * m2;
    (m4 - s) / (2.0 * (m4 + s))
}

/// Standard normal profile. Exact at `q = 2`; other exponents fall back to
/// a Monte Carlo estimate with [`DEFAULT_PROFILE_SAMPLES`] triples and
/// [`DEFAULT_PROFILE_SEED`].
pub fn gaussian_profile(q: f64) -> Result<MomentProfile> {
    check_q(q)?;
    let normal = DistributionSpec::standard_normal();
    match analytic_profile(&normal, q)? {
        Some(profile) => Ok(profile),
        None => profile_from_sampler(&normal, q, DEFAULT_PROFILE_SAMPLES, DEFAULT_PROFILE_SEED),
    }
}

/// Exact profile when one is available: every family at `q = 2`, and
/// finite-support families at any `q` by enumerating atom triples.
pub fn analytic_profile(dist: &DistributionSpec, q: f64) -> Result<Option<MomentProfile>> {
    check_q(q)?;
    dist.validate()?;
    if let DistributionSpec::Discrete { atoms } = dist {
        return discrete_profile(dist, atoms, q).map(Some);
    }
    if q == 2.0 {
        return MomentProfile::from_central_moments(
            dist.mean(),
            dist.variance(),
            dist.central_m4(),
            ProfileSource::Analytic,
        )
        .map(Some);
    }
    match dist.atoms() {
        Some(atoms) => discrete_profile(dist, &atoms, q).map(Some),
        None => Ok(None),
    }
}

fn discrete_profile(dist: &DistributionSpec, atoms: &[Atom], q: f64) -> Result<MomentProfile> {
    let mut base =
        MomentProfile::from_central_moments(dist.mean(), dist.variance(), dist.central_m4(), ProfileSource::Analytic)?;
    let pw = |d: f64| d.abs().powf(q);
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut cross = 0.0;
    for x in atoms {
        let mut inner = 0.0;
        for y in atoms {
            let w = x.prob * y.prob;
            let d = pw(x.value - y.value);
            mean += w * d;
            second += w * d * d;
            inner += y.prob * d;
        }
        cross += x.prob * inner * inner;
    }
    let var = second - mean * mean;
    if !(var > 0.0) {
        return Err(Error::Degenerate("pair distance has zero variance".into()));
    }
    let rho = (cross - mean * mean) / var;
    base.q = q;
    base.pair_mean_q = mean;
    base.pair_var_q = var;
    base.rho = rho;
    base.pair_sum_var = 2.0 + 2.0 * rho;
    Ok(base)
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::param(format!("q must be a finite real >= 1, got {q}")));
    }
    Ok(())
}

/// Power sums over one shard of sampled triples.
#[derive(Debug, Clone, Copy, Default)]
struct TripleSums {
    count: f64,
    // Σ (x − shift)^k, k = 1..4
    x: [f64; 4],
    // pair values at the requested q: A = |X₁−X₂|^q, B = |X₁−X₃|^q
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
    // same at q = 2
    a2: f64,
    b2: f64,
    aa2: f64,
    bb2: f64,
    ab2: f64,
}

impl TripleSums {
    fn add(&mut self, t: [f64; 3], q: f64, shift: f64) {
        self.count += 1.0;
        let d = t[0] - shift;
        let d2 = d * d;
        self.x[0] += d;
        self.x[1] += d2;
        self.x[2] += d2 * d;
        self.x[3] += d2 * d2;
        let s12 = (t[0] - t[1]) * (t[0] - t[1]);
        let s13 = (t[0] - t[2]) * (t[0] - t[2]);
        let (a, b) = if q == 2.0 {
            (s12, s13)
        } else {
            ((t[0] - t[1]).abs().powf(q), (t[0] - t[2]).abs().powf(q))
        };
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.bb += b * b;
        self.ab += a * b;
        self.a2 += s12;
        self.b2 += s13;
        self.aa2 += s12 * s12;
        self.bb2 += s13 * s13;
        self.ab2 += s12 * s13;
    }

    fn merge(mut self, o: &TripleSums) -> Self {
        self.count += o.count;
        for k in 0..4 {
            self.x[k] += o.x[k];
        }
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.bb += o.bb;
        self.ab += o.ab;
        self.a2 += o.a2;
        self.b2 += o.b2;
        self.aa2 += o.aa2;
        self.bb2 += o.bb2;
        self.ab2 += o.ab2;
        self
    }

    /// Central moments of X: (mean, m2, m4).
    fn x_moments(&self, shift: f64) -> (f64, f64, f64) {
        let n = self.count;
        let [s1, s2, s3, s4] = self.x.map(|s| s / n);
        let d = s1;
        let m2 = s2 - d * d;
        let m4 = s4 - 4.0 * d * s3 + 6.0 * d * d * s2 - 3.0 * d.powi(4);
        (shift + d, m2, m4)
    }

    /// (pair mean, pair variance, correlation), treating A and B as two
    /// samples from the same law.
    fn pair(&self, q2: bool) -> (f64, f64, f64) {
        let n = self.count;
        let (a, b, aa, bb, ab) = if q2 {
            (self.a2, self.b2, self.aa2, self.bb2, self.ab2)
        } else {
            (self.a, self.b, self.aa, self.bb, self.ab)
        };
        let mean = (a + b) / (2.0 * n);
        let var = (aa + bb) / (2.0 * n) - mean * mean;
        let cov = ab / n - mean * mean;
        (mean, var, cov / var)
    }
}

fn shard_sizes(samples: u64) -> Vec<u64> {
    let shards = SHARDS.min(samples);
    (0..shards)
        .map(|s| samples / shards + u64::from(s < samples % shards))
        .collect()
}

fn estimate_from_triples<F>(
    q: f64,
    samples: u64,
    domain: Domain,
    seed: u64,
    shift: f64,
    source: ProfileSource,
    draw: F,
) -> Result<MomentProfile>
where
    F: Fn(&mut dyn RngCore, &mut [f64; 3]) + Sync,
{
    check_q(q)?;
    if samples < 2 {
        return Err(Error::param("at least 2 samples are needed"));
    }
    if samples < 10_000 {
        log::warn!("profile estimate from only {samples} triples; 10^4 or more recommended");
    }
    let sizes = shard_sizes(samples);
    let shards: Vec<TripleSums> = sizes
        .par_iter()
        .enumerate()
        .map(|(s, &size)| {
            let mut rng = stream(domain, seed, s as u64, 0);
            let mut sums = TripleSums::default();
            let mut t = [0.0; 3];
            for _ in 0..size {
                draw(&mut rng, &mut t);
                sums.add(t, q, shift);
            }
            sums
        })
        .collect();
    let total = shards.iter().fold(TripleSums::default(), |acc, s| acc.merge(s));

    let (mu, m2, m4) = total.x_moments(shift);
    let (pair_mean_q, pair_var_q, rho) = total.pair(false);
    let (_, _, rho_q2) = total.pair(true);
    if !(pair_var_q > 0.0) || !(m2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "estimated pair-distance variance {pair_var_q} is not positive"
        )));
    }

    let std_errors = (shards.len() >= 2).then(|| {
        let per: Vec<[f64; 5]> = shards
            .iter()
            .map(|s| {
                let (m, v, r) = s.pair(false);
                let (_, _, r2) = s.pair(true);
                let (_, _, m4) = s.x_moments(shift);
                [m, v, r, r2, m4]
            })
            .collect();
        let se = |k: usize| batch_std_error(per.iter().map(|v| v[k]));
        ProfileErrors {
            pair_mean_q: se(0),
            pair_var_q: se(1),
            rho: se(2),
            rho_q2: se(3),
            m4: se(4),
        }
    });

    Ok(MomentProfile {
        mu,
        sigma2: m2,
        m2,
        m4,
        q,
        pair_mean_q,
        pair_var_q,
        rho,
        rho_q2,
        pair_sum_var: 2.0 + 2.0 * rho,
        source,
        std_errors,
        samples: Some(samples),
        seed: Some(seed),
    })
}

fn batch_std_error(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let k = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / k;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

/// Plug-in profile from `samples` i.i.d. triples `(X₁, X₂, X₃)` of `dist`.
pub fn profile_from_sampler(dist: &DistributionSpec, q: f64, samples: u64, seed: u64) -> Result<MomentProfile> {
    let sampler = dist.sampler()?;
    estimate_from_triples(
        q,
        samples,
        Domain::Profile,
        seed,
        dist.mean(),
        ProfileSource::MonteCarloEstimate,
        |rng, t| sampler.fill(rng, t),
    )
}

/// Profile of the empirical distribution of all `p·n` entries, pooled as
/// one i.i.d. sample. Moments are biased (divisor `N`) sample moments about
/// the sample mean. At `q = 2` the pair quantities follow from the closed
/// forms; otherwise [`DEFAULT_PROFILE_SAMPLES`] triples are resampled with
/// replacement using [`DATA_RESAMPLE_SEED`].
pub fn profile_from_data(matrix: &DataMatrix, q: f64) -> Result<MomentProfile> {
    check_q(q)?;
    let values = matrix.values();
    let count = values.len();
    if count < 4 {
        return Err(Error::param(format!("need at least 4 entries, matrix has {count}")));
    }
    let n = count as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in values {
        let d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("sample variance is zero".into()));
    }
    let closed = MomentProfile::from_central_moments(mean, m2, m4, ProfileSource::SampleEstimate)?;
    if q == 2.0 {
        return Ok(closed);
    }
    let pick = |rng: &mut dyn RngCore| values[((open01(rng) * n) as usize).min(count - 1)];
    let resampled = estimate_from_triples(
        q,
        DEFAULT_PROFILE_SAMPLES,
        Domain::DataResample,
        DATA_RESAMPLE_SEED,
        mean,
        ProfileSource::SampleEstimate,
        |rng, t| {
            for x in t.iter_mut() {
                *x = pick(rng);
            }
        },
    )?;
    Ok(MomentProfile {
        mu: mean,
        sigma2: m2,
        m2,
        m4,
        rho_q2: closed.rho,
        ..resampled
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub q: f64,
    /// Correlation at the profile's exponent.
    pub rho: f64,
    /// `rho < 1/3`.
    pub passes: bool,
    /// Correlation at `q = 2`.
    pub rho_q2: f64,
    pub passes_q2: bool,
    /// `m4 / m2²`.
    pub kurtosis_ratio: f64,
    /// `m4 < 5·m2²`, the raw-moment form of the `q = 2` condition.
    pub equivalent_passes: bool,
    /// Moment order the polynomial regime needs finite, `q(4τ+4)` plus any
    /// positive slack, when a family and `τ` were supplied.
    pub moment_order_checked: Option<f64>,
    /// Whether the family is known to have that moment. Never inferred
    /// from data.
    pub moment_condition: Option<bool>,
}

pub fn check_condition(profile: &MomentProfile) -> ConditionReport {
    let kurtosis_ratio = profile.kurtosis_ratio();
    ConditionReport {
        q: profile.q,
        rho: profile.rho,
        passes: profile.rho < 1.0 / 3.0,
        rho_q2: profile.rho_q2,
        passes_q2: profile.rho_q2 < 1.0 / 3.0,
        kurtosis_ratio,
        equivalent_passes: profile.m4 < 5.0 * profile.m2 * profile.m2,
        moment_order_checked: None,
        moment_condition: None,
    }
}

/// [`check_condition`] plus the moment-order requirement of the polynomial
/// regime with exponent `tau`, read off the family metadata.
pub fn check_condition_for_family(
    profile: &MomentProfile,
    dist: &DistributionSpec,
    tau: f64,
) -> Result<ConditionReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau must be > 0"));
    }
    let mut report = check_condition(profile);
    report.moment_order_checked = Some(profile.q * (4.0 * tau + 4.0));
    report.moment_condition = Some(dist.admissibility().all_moments_finite);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_closed_form() {
        let g = gaussian_profile(2.0).unwrap();
        assert_eq!(g.source, ProfileSource::Analytic);
        assert_eq!((g.m2, g.m4), (1.0, 3.0));
        assert_eq!(g.pair_mean_q, 2.0);
        assert_eq!(g.pair_var_q, 8.0);
        assert_eq!(g.rho, 0.25);
        assert_eq!(g.pair_sum_var, 2.5);
    }

    #[test]
    fn uniform_rho_is_one_seventh() {
        let u = DistributionSpec::Uniform { a: -1.0, b: 1.0 };
        let p = analytic_profile(&u, 2.0).unwrap().unwrap();
        assert!((p.rho - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_enumeration_matches_closed_form_at_q2() {
        let d: DistributionSpec = "discrete:-1=0.25,0.5=0.5,3=0.25".parse().unwrap();
        let p = analytic_profile(&d, 2.0).unwrap().unwrap();
        let m2 = d.variance();
        let m4 = d.central_m4();
        assert!((p.pair_mean_q - 2.0 * m2).abs() < 1e-12);
        assert!((p.pair_var_q - 2.0 * (m4 + m2 * m2)).abs() < 1e-12);
        assert!((p.rho - rho_from_moments(m2, m4)).abs() < 1e-12);
    }

    #[test]
    fn continuous_q_other_than_two_has_no_closed_form() {
        let n = DistributionSpec::standard_normal();
        assert!(analytic_profile(&n, 1.5).unwrap().is_none());
        let s = DistributionSpec::SparseTwoPoint { a: 1.0, epsilon: 0.5 };
        assert!(analytic_profile(&s, 1.5).unwrap().is_some());
    }

    #[test]
    fn condition_examples() {
        let g = check_condition(&gaussian_profile(2.0).unwrap());
        assert!(g.passes && g.equivalent_passes);
        assert_eq!(g.kurtosis_ratio, 3.0);

        let sparse = DistributionSpec::SparseTwoPoint { a: 1.7, epsilon: 0.1 };
        let r = check_condition(&analytic_profile(&sparse, 2.0).unwrap().unwrap());
        assert!((r.kurtosis_ratio - 10.0).abs() < 1e-12);
        assert!(!r.passes && !r.equivalent_passes);

        // Boundary m4 = 5 m2² gives rho exactly 1/3.
        let edge = MomentProfile::from_central_moments(0.0, 1.0, 5.0, ProfileSource::Analytic).unwrap();
        assert_eq!(edge.rho, 1.0 / 3.0);
        let r = check_condition(&edge);
        assert!(!r.passes && !r.equivalent_passes);
    }

    #[test]
    fn family_moment_order() {
        let g = gaussian_profile(2.0).unwrap();
        let r = check_condition_for_family(&g, &DistributionSpec::standard_normal(), 1.0).unwrap();
        assert_eq!(r.moment_order_checked, Some(16.0));
        assert_eq!(r.moment_condition, Some(true));
        assert!(check_condition_for_family(&g, &DistributionSpec::standard_normal(), 0.0).is_err());
    }

    #[test]
    fn data_profile_examples() {
        let zeros = DataMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(profile_from_data(&zeros, 2.0), Err(Error::Degenerate(_))));

        let signs = DataMatrix::new(2, 2, vec![-1.0, 1.0, 1.0, -1.0]).unwrap();
        let p = profile_from_data(&signs, 2.0).unwrap();
        assert_eq!((p.m2, p.m4, p.rho), (1.0, 1.0, 0.0));
        assert_eq!(p.source, ProfileSource::SampleEstimate);

        let tiny = DataMatrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(profile_from_data(&tiny, 2.0).is_err());
    }

    #[test]
    fn point_mass_is_degenerate() {
        let d = DistributionSpec::Discrete {
            atoms: vec![Atom { value: 0.0, prob: 1.0 }],
        };
        assert!(matches!(
            profile_from_sampler(&d, 2.0, 10_000, 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn sampler_estimate_is_seed_deterministic() {
        let u = DistributionSpec::Uniform { a: -1.0, b: 1.0 };
        let a = profile_from_sampler(&u, 1.5, 20_000, 11).unwrap();
        let b = profile_from_sampler(&u, 1.5, 20_000, 11).unwrap();
        assert_eq!(a, b);
        let c = profile_from_sampler(&u, 1.5, 20_000, 12).unwrap();
        assert_ne!(a.rho, c.rho);
    }
}
