//! Maximum interpoint distance of the rows of a `p × n` random matrix with
//! i.i.d. entries, its law-of-the-logarithm normalization, and the
//! numerical diagnostics and Monte Carlo harness around it.
//!
//! ```
//! use maxdist::{max_interpoint, DataMatrix, DistanceSpec};
//!
//! let x = DataMatrix::from_rows(&[[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]]).unwrap();
//! let m = max_interpoint(&x, &DistanceSpec::naive(2.0)).unwrap();
//! assert_eq!((m.value, m.arg_i, m.arg_j), (10.0, 0, 2));
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod distance;
pub mod distribution;
pub mod error;
pub mod figures;
pub mod io;
pub mod law;
pub mod matrix;
pub mod moments;
pub mod montecarlo;
pub mod rng;

pub use diagnostics::{
    chen_stein_bound, chen_stein_interpoint, mdp_ratio, std_normal_cdf, ChenSteinMode, ChenSteinReport, MdpEstimate,
    PairStatistic, Threshold,
};
pub use distance::{
    blocked_gram_max_sq, max_interpoint, qnorm_pow_q_distance, DistanceSpec, Kernel, MaxDistanceResult,
};
pub use distribution::{Atom, DistributionSpec};
pub use error::{Error, Result};
pub use law::{gaussian_z, normalized_statistic, regime_sequence, GrowthRegime, LawStatistic};
pub use matrix::DataMatrix;
pub use moments::{
    analytic_profile, check_condition, gaussian_profile, profile_from_data, profile_from_sampler, ConditionReport,
    MomentProfile, ProfileSource,
};
pub use montecarlo::{run_iteration, run_simulation, sample_matrix, Simulation, SimulationConfig, SimulationResult};
