//! Numerical checks of the two probabilistic tools behind the limit law:
//! the Chen–Stein Poisson approximation for the maximum of the pair
//! statistics, and the moderate-deviation ratio
//! `P(S_n/√n ≥ x) / (1 − Φ(x))` for standardized sums.

use libm::erfc;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{Atom, DistributionSpec};
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::moments::{analytic_profile, MomentProfile};
use crate::rng::{stream, Domain};

/// `Φ(x)` via the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 − Φ(x)` without cancellation in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Normalized per-coordinate pair term
/// `η_ijk = (|X_ik − X_jk|^q − E|X₁−X₂|^q) / √Var(|X₁−X₂|^q)`.
pub fn eta(x_ik: f64, x_jk: f64, profile: &MomentProfile) -> f64 {
    let d = (x_ik - x_jk).abs();
    let dq = if profile.q == 2.0 { d * d } else { d.powf(profile.q) };
    (dq - profile.pair_mean_q) / profile.pair_var_q.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStatistic {
    pub i: usize,
    pub j: usize,
    /// `Σ_k η_ijk`.
    pub sum: f64,
    /// `sum / √n`.
    pub normalized: f64,
}

/// Pair statistics for every `i < j`, in lexicographic order.
pub fn pair_statistics(matrix: &DataMatrix, profile: &MomentProfile) -> Result<Vec<PairStatistic>> {
    matrix.require_pairs()?;
    let p = matrix.rows();
    let root_n = (matrix.cols() as f64).sqrt();
    let mut out = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            let sum: f64 = matrix
                .row(i)
                .iter()
                .zip(matrix.row(j))
                .map(|(&a, &b)| eta(a, b, profile))
                .sum();
            out.push(PairStatistic {
                i,
                j,
                sum,
                normalized: sum / root_n,
            });
        }
    }
    Ok(out)
}

/// `(1 ∧ λ⁻¹)(b₁ + b₂ + b₃)`.
pub fn chen_stein_bound(lambda: f64, b1: f64, b2: f64, b3: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("b1", b1), ("b2", b2), ("b3", b3)] {
        if !(v >= 0.0) {
            return Err(Error::param(format!("{name} must be nonnegative, got {v}")));
        }
    }
    let factor = if lambda > 1.0 { 1.0 / lambda } else { 1.0 };
    Ok(factor * (b1 + b2 + b3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChenSteinMode {
    ExactEnumeration,
    MonteCarloEstimate,
}

/// Where the exceedance threshold lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// On the squared distance `Σ_k (X_ik − X_jk)²` itself.
    SquaredDistance(f64),
    /// On the normalized pair sum `Σ_k η_ijk / √n`.
    NormalizedSum(f64),
}

impl Threshold {
    /// `√((4 − ε)·ln p)` on the normalized scale.
    pub fn default_for(p: usize, epsilon: f64) -> Self {
        Self::NormalizedSum(((4.0 - epsilon) * (p as f64).ln()).sqrt())
    }

    fn squared_distance(&self, n: usize, profile: &MomentProfile) -> f64 {
        match *self {
            Self::SquaredDistance(t) => t,
            Self::NormalizedSum(t) => {
                let nf = n as f64;
                nf * profile.pair_mean_q + t * (nf * profile.pair_var_q).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChenSteinErrors {
    pub lambda: f64,
    pub b1: f64,
    pub b2: f64,
    pub p_max_le_t: f64,
    pub gap: f64,
    pub bound: f64,
    /// Standard error of `bound − gap`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChenSteinReport {
    pub p: usize,
    pub n: usize,
    /// Threshold on the squared-distance scale.
    pub t: f64,
    pub lambda: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub bound: f64,
    pub p_max_le_t: f64,
    pub poisson_approx: f64,
    pub gap: f64,
    pub mode: ChenSteinMode,
    pub replications: Option<u64>,
    pub std_errors: Option<ChenSteinErrors>,
}

impl ChenSteinReport {
    /// Whether `gap ≤ bound`, allowing `sigmas` standard errors of slack in
    /// Monte Carlo mode. Exact reports are compared without slack.
    pub fn within_bound(&self, sigmas: f64) -> bool {
        let slack = self.std_errors.map_or(0.0, |e| sigmas * e.margin);
        self.gap <= self.bound + slack
    }
}

/// Chen–Stein quantities for `η_α = Σ_k (X_ik − X_jk)²` over
/// `I = {(i, j): i < j}` with neighborhoods
/// `B_α = {β ∈ I : β ≠ α, β shares a row with α}`.
///
/// Exchangeability reduces everything to three probabilities: a single
/// pair exceeding (`P₁`), two pairs sharing one row both exceeding (`P₂`),
/// and no pair exceeding. With `N = p(p−1)/2` pairs, each with `2(p−2)`
/// neighbors, `λ = N·P₁`, `b₁ = 2N(p−2)·P₁²` and `b₂ = 2N(p−2)·P₂`. Pairs
/// with no common row are functions of disjoint independent rows, so
/// `b₃ = 0`.
///
/// `ExactEnumeration` requires finite support and `|support|^{p·n} ≤
/// budget`. `MonteCarloEstimate` runs `budget` replications, each on its
/// own stream, and estimates all three probabilities from the same
/// replications.
pub fn chen_stein_interpoint(
    dist: &DistributionSpec,
    p: usize,
    n: usize,
    threshold: Threshold,
    mode: ChenSteinMode,
    budget: u64,
    seed: u64,
) -> Result<ChenSteinReport> {
    dist.validate()?;
    if p < 2 {
        return Err(Error::InsufficientRows { rows: p });
    }
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let profile = analytic_profile(dist, 2.0)?.expect("closed form at q = 2");
    let t = threshold.squared_distance(n, &profile);
    match mode {
        ChenSteinMode::ExactEnumeration => exact_report(dist, p, n, t, budget),
        ChenSteinMode::MonteCarloEstimate => monte_carlo_report(dist, p, n, t, budget, seed),
    }
}

fn pairs(p: usize) -> f64 {
    (p * (p - 1) / 2) as f64
}

fn neighbors(p: usize) -> f64 {
    2.0 * p.saturating_sub(2) as f64
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assemble(p: usize, n: usize, t: f64, p1: f64, p2: f64, p_max: f64) -> ChenSteinReport {
    let count = pairs(p);
    let nb = neighbors(p);
    let lambda = count * p1;
    let b1 = count * nb * p1 * p1;
    let b2 = count * nb * p2;
    let b3 = 0.0;
    let bound = chen_stein_bound(lambda, b1, b2, b3).expect("nonnegative terms");
    let poisson_approx = (-lambda).exp();
    ChenSteinReport {
        p,
        n,
        t,
        lambda,
        b1,
        b2,
        b3,
        bound,
        p_max_le_t: p_max,
        poisson_approx,
        gap: (p_max - poisson_approx).abs(),
        mode: ChenSteinMode::ExactEnumeration,
        replications: None,
        std_errors: None,
    }
}

/// Calls `visit(weight, values)` for every assignment of atoms to `len`
/// entries, in odometer order.
fn enumerate(atoms: &[Atom], len: usize, mut visit: impl FnMut(f64, &[f64])) {
    let s = atoms.len();
    let mut idx = vec![0usize; len];
    let mut values: Vec<f64> = vec![atoms[0].value; len];
    loop {
        let weight = idx.iter().map(|&k| atoms[k].prob).product();
        visit(weight, &values);
        let mut pos = 0;
        loop {
            if pos == len {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < s {
                values[pos] = atoms[idx[pos]].value;
                break;
            }
            idx[pos] = 0;
            values[pos] = atoms[0].value;
            pos += 1;
        }
    }
}

fn exact_report(dist: &DistributionSpec, p: usize, n: usize, t: f64, budget: u64) -> Result<ChenSteinReport> {
    let atoms = dist.atoms().ok_or_else(|| {
        Error::Mode(format!(
            "exact enumeration needs a finite-support distribution, got {dist}"
        ))
    })?;
    let outcomes = u32::try_from(p * n)
        .ok()
        .and_then(|e| (atoms.len() as u64).checked_pow(e));
    match outcomes {
        Some(count) if count <= budget => {}
        _ => {
            return Err(Error::Mode(format!(
                "{}^{} outcomes exceed the enumeration budget {budget}",
                atoms.len(),
                p * n
            )))
        }
    }

    let mut p1 = 0.0;
    enumerate(&atoms, 2 * n, |w, v| {
        if sq_dist(&v[..n], &v[n..]) > t {
            p1 += w;
        }
    });
    let mut p2 = 0.0;
    if p >= 3 {
        enumerate(&atoms, 3 * n, |w, v| {
            let (x1, x2, x3) = (&v[..n], &v[n..2 * n], &v[2 * n..]);
            if sq_dist(x1, x2) > t && sq_dist(x1, x3) > t {
                p2 += w;
            }
        });
    }
    let mut p_max = 0.0;
    enumerate(&atoms, p * n, |w, v| {
        let all_below =
            (0..p).all(|i| (i + 1..p).all(|j| sq_dist(&v[i * n..(i + 1) * n], &v[j * n..(j + 1) * n]) <= t));
        if all_below {
            p_max += w;
        }
    });
    Ok(assemble(p, n, t, p1, p2, p_max))
}

/// Per-replication counts.
#[derive(Debug, Clone, Copy)]
struct Replication {
    exceed: u64,
    joint: u64,
    none: bool,
}

fn replicate(sampler: &crate::distribution::Sampler, p: usize, n: usize, t: f64, seed: u64, r: u64) -> Replication {
    let mut rng = stream(Domain::ChenStein, seed, r, 0);
    let mut x = vec![0.0; p * n];
    sampler.fill(&mut rng, &mut x);
    let mut per_row = vec![0u64; p];
    let mut exceed = 0;
    for i in 0..p {
        for j in i + 1..p {
            if sq_dist(&x[i * n..(i + 1) * n], &x[j * n..(j + 1) * n]) > t {
                exceed += 1;
                per_row[i] += 1;
                per_row[j] += 1;
            }
        }
    }
    // Ordered pairs of distinct exceeding pairs that share a row.
    let joint = per_row.iter().map(|&k| k * k.saturating_sub(1)).sum();
    Replication {
        exceed,
        joint,
        none: exceed == 0,
    }
}

fn monte_carlo_report(
    dist: &DistributionSpec,
    p: usize,
    n: usize,
    t: f64,
    replications: u64,
    seed: u64,
) -> Result<ChenSteinReport> {
    if replications < 2 {
        return Err(Error::param("Monte Carlo mode needs at least 2 replications"));
    }
    let sampler = dist.sampler()?;
    let reps: Vec<Replication> = (0..replications)
        .into_par_iter()
        .map(|r| replicate(&sampler, p, n, t, seed, r))
        .collect();

    let count = pairs(p);
    let nb = neighbors(p);
    let rf = replications as f64;
    let f = |r: &Replication| r.exceed as f64 / count;
    let g = |r: &Replication| if nb > 0.0 { r.joint as f64 / (count * nb) } else { 0.0 };
    let h = |r: &Replication| if r.none { 1.0 } else { 0.0 };
    let p1 = reps.iter().map(f).sum::<f64>() / rf;
    let p2 = reps.iter().map(g).sum::<f64>() / rf;
    let p_max = reps.iter().map(h).sum::<f64>() / rf;

    let mut report = assemble(p, n, t, p1, p2, p_max);
    report.mode = ChenSteinMode::MonteCarloEstimate;
    report.replications = Some(replications);

    // Delta-method standard errors from per-replication influence values.
    let lambda = report.lambda;
    let e = report.poisson_approx;
    let sign = if p_max >= e { 1.0 } else { -1.0 };
    let k = count * nb;
    let (d_bound_p1, d_bound_p2) = if lambda > 1.0 {
        (nb * (1.0 - p2 / (p1 * p1)), nb / p1)
    } else {
        (2.0 * k * p1, k)
    };
    let se = |infl: &dyn Fn(&Replication) -> f64| {
        let mean = reps.iter().map(infl).sum::<f64>() / rf;
        let var = reps.iter().map(|r| (infl(r) - mean).powi(2)).sum::<f64>() / (rf - 1.0);
        (var / rf).sqrt()
    };
    let gap_infl = |r: &Replication| sign * (h(r) + e * count * f(r));
    let bound_infl = |r: &Replication| d_bound_p1 * f(r) + d_bound_p2 * g(r);
    report.std_errors = Some(ChenSteinErrors {
        lambda: count * se(&f),
        b1: 2.0 * k * p1 * se(&f),
        b2: k * se(&g),
        p_max_le_t: se(&h),
        gap: se(&gap_infl),
        bound: se(&bound_infl),
        margin: se(&|r: &Replication| bound_infl(r) - gap_infl(r)),
    });
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpEstimate {
    pub n: usize,
    pub x: f64,
    pub iters: u64,
    pub exceedances: u64,
    /// Monte Carlo estimate of `P(S_n/√n ≥ x)`.
    pub tail: f64,
    /// `1 − Φ(x)`.
    pub normal_tail: f64,
    pub ratio: f64,
    pub std_error: f64,
    /// Fewer than 100 expected exceedances, or none observed.
    pub low_count: bool,
    pub seed: u64,
}

const MDP_SHARD: u64 = 4096;

/// Estimates `P(S_n/√n ≥ x) / (1 − Φ(x))` where `S_n` sums `n` i.i.d.
/// draws of `dist` standardized by its exact mean and variance.
pub fn mdp_ratio(dist: &DistributionSpec, n: usize, x: f64, iters: u64, seed: u64) -> Result<MdpEstimate> {
    let sampler = dist.sampler()?;
    if n == 0 || iters == 0 {
        return Err(Error::param("n and iters must be positive"));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::param(format!("x must be finite and >= 0, got {x}")));
    }
    let mu = dist.mean();
    let sd = dist.variance().sqrt();
    let cut = x * (n as f64).sqrt();
    let normal_tail = std_normal_sf(x);
    let expected = normal_tail * iters as f64;
    if expected < 100.0 {
        log::warn!("only {expected:.1} exceedances expected; the ratio estimate is noisy");
    }

    let shards = iters.div_ceil(MDP_SHARD);
    let exceedances: u64 = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream(Domain::ModerateDeviation, seed, s, 0);
            let mut buf = vec![0.0; n];
            let len = MDP_SHARD.min(iters - s * MDP_SHARD);
            let mut hits = 0u64;
            for _ in 0..len {
                sampler.fill(&mut rng, &mut buf);
                let sum: f64 = buf.iter().map(|v| (v - mu) / sd).sum();
                hits += u64::from(sum >= cut);
            }
            hits
        })
        .sum();

    let itf = iters as f64;
    let tail = exceedances as f64 / itf;
    let std_error = (tail * (1.0 - tail) / itf).sqrt() / normal_tail;
    Ok(MdpEstimate {
        n,
        x,
        iters,
        exceedances,
        tail,
        normal_tail,
        ratio: tail / normal_tail,
        std_error,
        low_count: expected < 100.0 || exceedances == 0,
        seed,
    })
}
