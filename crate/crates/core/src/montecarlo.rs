//! Seed-deterministic sampling of random matrices and the K-iteration
//! simulation of the normalized maximum interpoint distance.
//!
//! Iteration `(pair_index, iter_index)` draws its matrix from the stream
//! keyed by `(master_seed, pair_index, iter_index)` (see [`crate::rng`]), so
//! every z value depends only on its own key. Iterations run on the rayon
//! pool and are written into pre-allocated slots; summaries are folded in
//! index order afterwards.

use rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{max_interpoint, DistanceSpec, Kernel};
use crate::distribution::{DistributionSpec, Sampler};
use crate::error::{Error, Result};
use crate::law::normalized_statistic;
use crate::matrix::DataMatrix;
use crate::moments::{
    analytic_profile, check_condition, profile_from_sampler, MomentProfile, ProfileSource, DEFAULT_PROFILE_SAMPLES,
};
use crate::rng::{stream, Domain, RNG_ID};

/// The four `(p, n)` combinations of the reference Gaussian experiment.
pub const PROTOCOL_PAIRS: [(usize, usize); 4] = [(150, 100), (200, 200), (500, 250), (600, 400)];
/// Iterations per combination in the reference experiment.
pub const PROTOCOL_ITERATIONS: usize = 300;
/// z values inside this band count toward `frac_in_band`.
pub const SUMMARY_BAND: (f64, f64) = (1.5, 2.5);

/// `p × n` i.i.d. draws from `dist`. Uses the stream keyed
/// `(seed, 0, 0)`, the same one iteration `(0, 0)` of a simulation with
/// master seed `seed` uses.
pub fn sample_matrix(dist: &DistributionSpec, p: usize, n: usize, seed: u64) -> Result<DataMatrix> {
    let sampler = dist.sampler()?;
    sample_matrix_with(&sampler, p, n, &mut stream(Domain::Matrix, seed, 0, 0))
}

pub fn sample_matrix_with<R: RngCore + ?Sized>(
    sampler: &Sampler,
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    if p == 0 || n == 0 {
        return Err(Error::param(format!("matrix must be at least 1x1, got {p}x{n}")));
    }
    let mut values = vec![0.0; p * n];
    sampler.fill(rng, &mut values);
    DataMatrix::new(p, n, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dist: DistributionSpec,
    /// `(p, n)` combinations.
    pub pairs: Vec<(usize, usize)>,
    pub iterations: usize,
    pub master_seed: u64,
    pub q: f64,
    /// `Analytic` or `MonteCarloEstimate`.
    pub profile_source: ProfileSource,
}

impl SimulationConfig {
    /// Standard normal entries over [`PROTOCOL_PAIRS`], 300 iterations each.
    pub fn gaussian_protocol(master_seed: u64) -> Self {
        Self {
            dist: DistributionSpec::standard_normal(),
            pairs: PROTOCOL_PAIRS.to_vec(),
            iterations: PROTOCOL_ITERATIONS,
            master_seed,
            q: 2.0,
            profile_source: ProfileSource::Analytic,
        }
    }

    /// Analytic profile when the family has a closed form at `q`, Monte
    /// Carlo otherwise.
    pub fn default_profile_source(dist: &DistributionSpec, q: f64) -> ProfileSource {
        match analytic_profile(dist, q) {
            Ok(Some(_)) => ProfileSource::Analytic,
            _ => ProfileSource::MonteCarloEstimate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        DistanceSpec::naive(self.q).validate()?;
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        if self.pairs.is_empty() {
            return Err(Error::param("at least one (p, n) pair is required"));
        }
        for &(p, n) in &self.pairs {
            if p < 2 {
                return Err(Error::InsufficientRows { rows: p });
            }
            if n == 0 {
                return Err(Error::param("n must be positive"));
            }
        }
        if self.profile_source == ProfileSource::SampleEstimate {
            return Err(Error::param(
                "simulations take an Analytic or MonteCarloEstimate profile",
            ));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the JSON encoding.
    pub fn hash(&self) -> String {
        crate::io::short_hash(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `K − 1`; 0 when `K = 1`).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub frac_in_band: f64,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Self {
        let k = values.len();
        let kf = k as f64;
        let mean = values.iter().sum::<f64>() / kf;
        let sd = if k > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0)).sqrt()
        } else {
            0.0
        };
        let (lo, hi) = SUMMARY_BAND;
        Self {
            k,
            mean,
            sd,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            frac_in_band: values.iter().filter(|v| (lo..=hi).contains(*v)).count() as f64 / kf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub pair_index: usize,
    pub p: usize,
    pub n: usize,
    pub z: Vec<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub master_seed: u64,
    pub distribution: String,
    pub q: f64,
    pub profile_source: ProfileSource,
    pub profile: MomentProfile,
    pub rng_id: String,
    pub kernel: Kernel,
    pub config_hash: String,
    /// Whether the configuration meets the correlation and moment
    /// hypotheses of the limit law.
    pub within_hypotheses: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub pairs: Vec<PairResult>,
    pub provenance: Provenance,
}

/// A validated configuration with its moment profile resolved.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimulationConfig,
    profile: MomentProfile,
    sampler: Sampler,
    spec: DistanceSpec,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let profile = match config.profile_source {
            ProfileSource::Analytic => analytic_profile(&config.dist, config.q)?.ok_or_else(|| {
                Error::Mode(format!(
                    "{} has no closed-form profile at q = {}; use a Monte Carlo profile",
                    config.dist, config.q
                ))
            })?,
            _ => profile_from_sampler(&config.dist, config.q, DEFAULT_PROFILE_SAMPLES, config.master_seed)?,
        };
        let sampler = config.dist.sampler()?;
        let spec = DistanceSpec::fastest(config.q);
        Ok(Self {
            config,
            profile,
            sampler,
            spec,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn profile(&self) -> &MomentProfile {
        &self.profile
    }

    fn pair(&self, pair_index: usize) -> Result<(usize, usize)> {
        self.config
            .pairs
            .get(pair_index)
            .copied()
            .ok_or_else(|| Error::param(format!("pair index {pair_index} out of range")))
    }

    /// The matrix drawn by iteration `(pair_index, iter_index)`.
    pub fn iteration_matrix(&self, pair_index: usize, iter_index: usize) -> Result<DataMatrix> {
        let (p, n) = self.pair(pair_index)?;
        if iter_index >= self.config.iterations {
            return Err(Error::param(format!("iteration {iter_index} out of range")));
        }
        let mut rng = stream(
            Domain::Matrix,
            self.config.master_seed,
            pair_index as u64,
            iter_index as u64,
        );
        sample_matrix_with(&self.sampler, p, n, &mut rng)
    }

    pub fn run_iteration(&self, pair_index: usize, iter_index: usize) -> Result<f64> {
        let matrix = self.iteration_matrix(pair_index, iter_index)?;
        let m = max_interpoint(&matrix, &self.spec)?;
        let stat = normalized_statistic(m.value_pow_q, matrix.cols(), matrix.rows(), &self.profile)?;
        Ok(stat.z)
    }

    pub fn run(&self) -> Result<SimulationResult> {
        let k = self.config.iterations;
        let mut pairs = Vec::with_capacity(self.config.pairs.len());
        for (pair_index, &(p, n)) in self.config.pairs.iter().enumerate() {
            let z = (0..k)
                .into_par_iter()
                .map(|it| self.run_iteration(pair_index, it))
                .collect::<Result<Vec<f64>>>()?;
            if let Some(bad) = z.iter().position(|v| !v.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "non-finite z at pair {pair_index}, iteration {bad}"
                )));
            }
            let summary = Summary::from_values(&z);
            pairs.push(PairResult {
                pair_index,
                p,
                n,
                z,
                summary,
            });
        }
        Ok(SimulationResult {
            config: self.config.clone(),
            pairs,
            provenance: self.provenance(),
        })
    }

    fn provenance(&self) -> Provenance {
        let report = check_condition(&self.profile);
        let adm = self.config.dist.admissibility();
        let mut notes = Vec::new();
        if !report.passes_q2 {
            notes.push(format!(
                "Corr(|X1-X2|^2, |X1-X3|^2) = {} is not below 1/3",
                report.rho_q2
            ));
        }
        if self.config.q != 2.0 && !report.passes {
            notes.push(format!(
                "Corr(|X1-X2|^q, |X1-X3|^q) = {} is not below 1/3 at q = {}",
                report.rho, self.config.q
            ));
        }
        if !adm.all_moments_finite {
            notes.push("family lacks the required moments".into());
        }
        Provenance {
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: self.config.master_seed,
            distribution: self.config.dist.to_string(),
            q: self.config.q,
            profile_source: self.profile.source,
            profile: self.profile.clone(),
            rng_id: RNG_ID.into(),
            kernel: self.spec.kernel,
            config_hash: self.config.hash(),
            within_hypotheses: notes.is_empty(),
            notes,
        }
    }
}

pub fn run_iteration(config: &SimulationConfig, pair_index: usize, iter_index: usize) -> Result<f64> {
    Simulation::new(config.clone())?.run_iteration(pair_index, iter_index)
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    Simulation::new(config.clone())?.run()
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}
