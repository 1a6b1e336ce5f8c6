//! Entry distributions for the i.i.d. matrix model, with closed-form
//! moments, admissibility metadata and stream-stable samplers.

use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::open01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal {
        mu: f64,
        sigma: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    /// `±a` with probability `ε/2` each, `0` otherwise.
    SparseTwoPoint {
        a: f64,
        epsilon: f64,
    },
    /// `E − 1/rate` with `E ~ Exponential(rate)`.
    CenteredExponential {
        rate: f64,
    },
    /// Finite support given as atoms.
    Discrete {
        atoms: Vec<Atom>,
    },
}

/// What the family guarantees about the hypotheses of the limit theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `Corr(|X₁−X₂|², |X₁−X₃|²)` from the closed form.
    pub rho_q2: f64,
    pub corr_below_third: bool,
    /// Largest `α ∈ (0, 1/2]` with `E exp(t₀|X|^{2α}) < ∞` for some `t₀ > 0`.
    pub tail_alpha: f64,
    /// Every absolute moment is finite, so any polynomial-regime moment
    /// order is met.
    pub all_moments_finite: bool,
    pub bounded: bool,
}

impl DistributionSpec {
    pub fn standard_normal() -> Self {
        Self::Normal { mu: 0.0, sigma: 1.0 }
    }

    pub fn fair_bernoulli() -> Self {
        Self::Discrete {
            atoms: vec![Atom { value: 0.0, prob: 0.5 }, Atom { value: 1.0, prob: 0.5 }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be finite")))
            }
        };
        match *self {
            Self::Normal { mu, sigma } => {
                finite("mu", mu)?;
                finite("sigma", sigma)?;
                if sigma <= 0.0 {
                    return Err(Error::param("normal sigma must be > 0"));
                }
            }
            Self::Uniform { a, b } => {
                finite("a", a)?;
                finite("b", b)?;
                if a >= b {
                    return Err(Error::param("uniform bounds need a < b"));
                }
            }
            Self::SparseTwoPoint { a, epsilon } => {
                finite("a", a)?;
                if a == 0.0 {
                    return Err(Error::Degenerate("sparse two-point with a = 0".into()));
                }
                if !(epsilon > 0.0 && epsilon <= 1.0) {
                    return Err(Error::param("sparse epsilon must lie in (0, 1]"));
                }
            }
            Self::CenteredExponential { rate } => {
                finite("rate", rate)?;
                if rate <= 0.0 {
                    return Err(Error::param("exponential rate must be > 0"));
                }
            }
            Self::Discrete { ref atoms } => {
                if atoms.is_empty() {
                    return Err(Error::param("discrete distribution needs at least one atom"));
                }
                for atom in atoms {
                    finite("atom value", atom.value)?;
                    if !(atom.prob > 0.0 && atom.prob <= 1.0) {
                        return Err(Error::param("atom probabilities must lie in (0, 1]"));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.prob).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param(format!("atom probabilities sum to {total}, expected 1")));
                }
                if self.variance() <= 0.0 {
                    return Err(Error::Degenerate("discrete distribution with one point".into()));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Normal { mu, .. } => mu,
            Self::Uniform { a, b } => 0.5 * (a + b),
            Self::SparseTwoPoint { .. } | Self::CenteredExponential { .. } => 0.0,
            Self::Discrete { ref atoms } => atoms.iter().map(|a| a.value * a.prob).sum(),
        }
    }

    /// `E|X − μ|²`.
    pub fn variance(&self) -> f64 {
        self.central_moment(2)
    }

    /// `E|X − μ|⁴`.
    pub fn central_m4(&self) -> f64 {
        self.central_moment(4)
    }

    fn central_moment(&self, order: i32) -> f64 {
        debug_assert!(order == 2 || order == 4);
        match *self {
            Self::Normal { sigma, .. } => {
                let s2 = sigma * sigma;
                if order == 2 {
                    s2
                } else {
                    3.0 * s2 * s2
                }
            }
            Self::Uniform { a, b } => {
                let w = b - a;
                if order == 2 {
                    w * w / 12.0
                } else {
                    w.powi(4) / 80.0
                }
            }
            Self::SparseTwoPoint { a, epsilon } => a.powi(order) * epsilon,
            Self::CenteredExponential { rate } => {
                if order == 2 {
                    1.0 / (rate * rate)
                } else {
                    9.0 / rate.powi(4)
                }
            }
            Self::Discrete { ref atoms } => {
                let mu = self.mean();
                atoms.iter().map(|a| (a.value - mu).powi(order) * a.prob).sum()
            }
        }
    }

    /// Atoms of a finite-support distribution, `None` for continuous ones.
    pub fn atoms(&self) -> Option<Vec<Atom>> {
        match *self {
            Self::SparseTwoPoint { a, epsilon } => {
                let mut atoms = vec![
                    Atom {
                        value: a,
                        prob: epsilon / 2.0,
                    },
                    Atom {
                        value: -a,
                        prob: epsilon / 2.0,
                    },
                ];
                if epsilon < 1.0 {
                    atoms.push(Atom {
                        value: 0.0,
                        prob: 1.0 - epsilon,
                    });
                }
                Some(atoms)
            }
            Self::Discrete { ref atoms } => Some(atoms.clone()),
            _ => None,
        }
    }

    pub fn admissibility(&self) -> Admissibility {
        let m2 = self.variance();
        let m4 = self.central_m4();
        let rho_q2 = (m4 - m2 * m2) / (2.0 * (m4 + m2 * m2));
        Admissibility {
            rho_q2,
            corr_below_third: rho_q2 < 1.0 / 3.0,
            // Gaussian and exponential tails both admit exp(t₀|X|) moments;
            // bounded families admit every α.
            tail_alpha: 0.5,
            all_moments_finite: true,
            bounded: !matches!(self, Self::Normal { .. } | Self::CenteredExponential { .. }),
        }
    }

    /// A sampler that fills buffers from a random stream.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(Sampler::new(self))
    }

    /// Short lowercase family name.
    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::Uniform { .. } => "uniform",
            Self::SparseTwoPoint { .. } => "sparse",
            Self::CenteredExponential { .. } => "exp",
            Self::Discrete { .. } => "discrete",
        }
    }
}

/// Draws variates with a fixed number of 64-bit words each: one per entry
/// for every family except the normal, which uses Box–Muller on two words
/// per pair of entries. Entry `m` of a buffer therefore depends only on its
/// position in the stream.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Normal { mu: f64, sigma: f64 },
    Uniform { a: f64, width: f64 },
    Exponential { rate: f64 },
    Table { cumulative: Vec<f64>, values: Vec<f64> },
}

impl Sampler {
    fn new(dist: &DistributionSpec) -> Self {
        let kind = match *dist {
            DistributionSpec::Normal { mu, sigma } => SamplerKind::Normal { mu, sigma },
            DistributionSpec::Uniform { a, b } => SamplerKind::Uniform { a, width: b - a },
            DistributionSpec::CenteredExponential { rate } => SamplerKind::Exponential { rate },
            _ => {
                let atoms = dist.atoms().expect("finite support");
                let mut acc = 0.0;
                let cumulative = atoms
                    .iter()
                    .map(|a| {
                        acc += a.prob;
                        acc
                    })
                    .collect();
                SamplerKind::Table {
                    cumulative,
                    values: atoms.iter().map(|a| a.value).collect(),
                }
            }
        };
        Self { kind }
    }

    /// Number of 64-bit words consumed by `fill` on a buffer of `len`.
    pub fn words_for(&self, len: usize) -> usize {
        match self.kind {
            SamplerKind::Normal { .. } => len.div_ceil(2) * 2,
            _ => len,
        }
    }

    pub fn fill<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.kind {
            SamplerKind::Normal { mu, sigma } => {
                for pair in out.chunks_mut(2) {
                    let (z0, z1) = box_muller(open01(rng), open01(rng));
                    pair[0] = mu + sigma * z0;
                    if let Some(second) = pair.get_mut(1) {
                        *second = mu + sigma * z1;
                    }
                }
            }
            SamplerKind::Uniform { a, width } => {
                for x in out {
                    *x = a + width * open01(rng);
                }
            }
            SamplerKind::Exponential { rate } => {
                for x in out {
                    *x = (-open01(rng).ln() - 1.0) / rate;
                }
            }
            SamplerKind::Table {
                ref cumulative,
                ref values,
            } => {
                let last = values.len() - 1;
                for x in out {
                    let u = open01(rng);
                    let k = cumulative.iter().position(|&c| u < c).unwrap_or(last);
                    *x = values[k];
                }
            }
        }
    }
}

#[inline]
fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Normal { mu, sigma } => write!(f, "normal:{mu},{sigma}"),
            Self::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
            Self::SparseTwoPoint { a, epsilon } => write!(f, "sparse:{a},{epsilon}"),
            Self::CenteredExponential { rate } => write!(f, "exp:{rate}"),
            Self::Discrete { atoms } => {
                write!(f, "discrete:")?;
                for (k, atom) in atoms.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}={}", atom.value, atom.prob)?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `family[:params]`:
/// `normal[:mu,sigma]`, `uniform[:a,b]`, `sparse[:a,eps]`, `exp[:rate]`,
/// `bernoulli`, `discrete:v=p,v=p,...`.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, params) = match s.split_once(':') {
            Some((f, p)) => (f, Some(p)),
            None => (s, None),
        };
        let numbers = |expected: usize, defaults: &[f64]| -> Result<Vec<f64>> {
            let Some(p) = params else {
                return Ok(defaults.to_vec());
            };
            let vals = p
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::param(format!("bad number {t:?} in {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != expected {
                return Err(Error::param(format!(
                    "{family} takes {expected} parameters, got {}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let spec = match family.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => {
                let v = numbers(2, &[0.0, 1.0])?;
                Self::Normal { mu: v[0], sigma: v[1] }
            }
            "uniform" => {
                let v = numbers(2, &[-1.0, 1.0])?;
                Self::Uniform { a: v[0], b: v[1] }
            }
            "sparse" => {
                let v = numbers(2, &[1.0, 0.1])?;
                Self::SparseTwoPoint { a: v[0], epsilon: v[1] }
            }
            "exp" | "exponential" => {
                let v = numbers(1, &[1.0])?;
                Self::CenteredExponential { rate: v[0] }
            }
            "bernoulli" if params.is_none() => Self::fair_bernoulli(),
            "discrete" => {
                let p = params.ok_or_else(|| Error::param("discrete needs value=prob atoms"))?;
                let atoms = p
                    .split(',')
                    .map(|tok| {
                        let (v, pr) = tok
                            .split_once('=')
                            .ok_or_else(|| Error::param(format!("atom {tok:?} is not value=prob")))?;
                        let value = v
                            .trim()
                            .parse()
                            .map_err(|_| Error::param(format!("bad atom value {v:?}")))?;
                        let prob = pr
                            .trim()
                            .parse()
                            .map_err(|_| Error::param(format!("bad atom probability {pr:?}")))?;
                        Ok(Atom { value, prob })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::Discrete { atoms }
            }
            other => return Err(Error::param(format!("unknown distribution {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
