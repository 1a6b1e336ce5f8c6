use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use maxdist::diagnostics::{chen_stein_interpoint, mdp_ratio, ChenSteinMode, Threshold};
use maxdist::distance::{max_interpoint, DistanceSpec};
use maxdist::figures::reproduce_figures;
use maxdist::io::{
    emit_scatter_svg, read_matrix_csv, read_results_csv, short_hash, write_results_csv, write_summary_json,
};
use maxdist::law::{normalized_statistic, regime_sequence, GrowthRegime};
use maxdist::moments::{
    analytic_profile, check_condition, check_condition_for_family, profile_from_data, profile_from_sampler,
    ProfileSource, DEFAULT_PROFILE_SAMPLES,
};
use maxdist::montecarlo::{Simulation, SimulationConfig};
use maxdist::{DistributionSpec, Error};

#[derive(Debug, Parser)]
#[command(
    name = "maxdist",
    version,
    about = "Maximum interpoint distance statistics for random matrices"
)]
struct Cli {
    /// Print a machine-readable JSON document on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeKind {
    Polynomial,
    Exponential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    /// Threshold on the squared distance.
    Raw,
    /// Threshold on the normalized pair sum.
    Normalized,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the K-iteration simulation over (p, n) pairs.
    Simulate {
        #[arg(long, default_value = "normal")]
        dist: String,
        /// Comma-separated p:n tokens, e.g. 150:100,200:200.
        #[arg(long)]
        pairs: String,
        #[arg(long, default_value_t = 300)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Output directory for simulate.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
        /// analytic or estimate; defaults to analytic when a closed form exists.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Maximum interpoint distance and normalized statistic of a CSV matrix.
    Stat {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// analytic:<dist> or estimate.
        #[arg(long, default_value = "estimate")]
        profile: String,
    },
    /// Correlation and kurtosis admissibility of a family or a data matrix.
    Check {
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        dist: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Polynomial-regime exponent for the moment-order report.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Chen–Stein Poisson approximation for the pair exceedances.
    Chenstein {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        /// Threshold; defaults to sqrt((4 - 0.1) ln p) on the normalized scale.
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long, value_enum, default_value = "normalized")]
        t_scale: ScaleArg,
        #[arg(long, value_enum, default_value = "mc")]
        mode: ModeArg,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Moderate-deviation ratio P(S_n/sqrt(n) >= x) / (1 - Phi(x)).
    Mdp {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 1_000_000)]
        iters: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// (p, n) sequence along a growth regime.
    Regime {
        #[arg(long, value_enum)]
        kind: RegimeKind,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Exponential prefactor in p = exp(c n^beta).
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Comma-separated increasing n values.
        #[arg(long)]
        n_values: String,
    },
    /// Run the reference Gaussian experiment and write CSV, JSON and SVG files.
    ReproduceFigures {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Scatter plot of the z column of a results CSV.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        reference: f64,
        #[arg(long)]
        out: PathBuf,
        /// Which pair to plot; defaults to the first one in the file.
        #[arg(long)]
        pair_index: Option<usize>,
    },
}

struct Output {
    seed: Option<u64>,
    text: String,
    data: Value,
}

fn parse_dist(s: &str) -> Result<DistributionSpec, Error> {
    s.parse()
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>, Error> {
    s.split(',')
        .map(|tok| {
            let bad = || Error::Parameter(format!("pair {tok:?} is not p:n"));
            let (p, n) = tok.trim().split_once(':').ok_or_else(bad)?;
            Ok((p.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
        })
        .collect()
}

fn parse_list(s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("{t:?} is not a positive integer")))
        })
        .collect()
}

fn required(v: Option<f64>, name: &str) -> Result<f64, Error> {
    v.ok_or_else(|| Error::Parameter(format!("--{name} is required for this regime")))
}

fn run(command: &Command) -> Result<Output, Error> {
    match command {
        Command::Simulate {
            dist,
            pairs,
            iters,
            seed,
            q,
            out,
            profile,
        } => {
            let dist = parse_dist(dist)?;
            let profile_source = match profile.as_deref() {
                None => SimulationConfig::default_profile_source(&dist, *q),
                Some("analytic") => ProfileSource::Analytic,
                Some("estimate") => ProfileSource::MonteCarloEstimate,
                Some(other) => return Err(Error::Parameter(format!("unknown profile {other:?}"))),
            };
            let config = SimulationConfig {
                dist,
                pairs: parse_pairs(pairs)?,
                iterations: *iters,
                master_seed: *seed,
                q: *q,
                profile_source,
            };
            let result = Simulation::new(config)?.run()?;
            std::fs::create_dir_all(out)?;
            let csv = out.join("simulate.csv");
            let summary = out.join("summary.json");
            write_results_csv(&result, &csv)?;
            write_summary_json(&result, &summary)?;
            let mut text = String::new();
            for pr in &result.pairs {
                let s = pr.summary;
                text += &format!(
                    "p={} n={} K={} mean={:.4} sd={:.4} min={:.4} max={:.4} frac_in_band={:.3}\n",
                    pr.p, pr.n, s.k, s.mean, s.sd, s.min, s.max, s.frac_in_band
                );
            }
            if !result.provenance.within_hypotheses {
                text += &format!("outside hypotheses: {}\n", result.provenance.notes.join("; "));
            }
            text += &format!("wrote {} and {}\n", csv.display(), summary.display());
            Ok(Output {
                seed: Some(*seed),
                text,
                data: json!({
                    "csv": csv,
                    "summary": summary,
                    "pairs": result.pairs.iter().map(|p| json!({"p": p.p, "n": p.n, "summary": p.summary})).collect::<Vec<_>>(),
                    "provenance": result.provenance,
                }),
            })
        }
        Command::Stat { input, q, profile } => {
            let matrix = read_matrix_csv(input)?;
            let profile = if profile == "estimate" {
                profile_from_data(&matrix, *q)?
            } else if let Some(spec) = profile.strip_prefix("analytic:") {
                let dist = parse_dist(spec)?;
                analytic_profile(&dist, *q)?
                    .ok_or_else(|| Error::Mode(format!("{dist} has no closed-form profile at q = {q}")))?
            } else {
                return Err(Error::Parameter(format!("unknown profile {profile:?}")));
            };
            let m = max_interpoint(&matrix, &DistanceSpec::fastest(*q))?;
            let stat = normalized_statistic(m.value_pow_q, matrix.cols(), matrix.rows(), &profile)?;
            let text = format!(
                "p={} n={} q={}\nM={} M^q={} pair=({}, {})\nz={} center={} scale={} profile={:?}\n",
                matrix.rows(),
                matrix.cols(),
                q,
                m.value,
                m.value_pow_q,
                m.arg_i + 1,
                m.arg_j + 1,
                stat.z,
                stat.center,
                stat.scale,
                profile.source
            );
            Ok(Output {
                seed: None,
                text,
                data: json!({ "max": m, "statistic": stat, "profile": profile, "pair_one_based": [m.arg_i + 1, m.arg_j + 1] }),
            })
        }
        Command::Check {
            dist,
            input,
            q,
            tau,
            seed,
        } => {
            let (report, profile, admissibility) = match (dist, input) {
                (Some(d), _) => {
                    let dist = parse_dist(d)?;
                    let profile = match analytic_profile(&dist, *q)? {
                        Some(p) => p,
                        None => profile_from_sampler(&dist, *q, DEFAULT_PROFILE_SAMPLES, *seed)?,
                    };
                    let report = check_condition_for_family(&profile, &dist, *tau)?;
                    (report, profile, Some(dist.admissibility()))
                }
                (None, Some(path)) => {
                    let profile = profile_from_data(&read_matrix_csv(path)?, *q)?;
                    (check_condition(&profile), profile, None)
                }
                (None, None) => return Err(Error::Parameter("pass --dist or --input".into())),
            };
            let mut text = format!(
                "rho={} passes={}\nrho_q2={} passes_q2={}\nkurtosis_ratio={} equivalent_passes={}\nsource={:?}\n",
                report.rho,
                report.passes,
                report.rho_q2,
                report.passes_q2,
                report.kurtosis_ratio,
                report.equivalent_passes,
                profile.source
            );
            if let (Some(order), Some(ok)) = (report.moment_order_checked, report.moment_condition) {
                text += &format!("moment order > {order} finite: {ok}\n");
            }
            Ok(Output {
                seed: (profile.source == ProfileSource::MonteCarloEstimate).then_some(*seed),
                text,
                data: json!({ "report": report, "profile": profile, "admissibility": admissibility }),
            })
        }
        Command::Chenstein {
            dist,
            p,
            n,
            t,
            t_scale,
            mode,
            budget,
            seed,
        } => {
            let dist = parse_dist(dist)?;
            let threshold = match (t, t_scale) {
                (None, _) => Threshold::default_for(*p, 0.1),
                (Some(t), ScaleArg::Raw) => Threshold::SquaredDistance(*t),
                (Some(t), ScaleArg::Normalized) => Threshold::NormalizedSum(*t),
            };
            let mode = match mode {
                ModeArg::Exact => ChenSteinMode::ExactEnumeration,
                ModeArg::Mc => ChenSteinMode::MonteCarloEstimate,
            };
            let r = chen_stein_interpoint(&dist, *p, *n, threshold, mode, *budget, *seed)?;
            let mut text = format!(
                "t={} lambda={} b1={} b2={} b3={}\nbound={} P(max<=t)={} exp(-lambda)={} gap={}\ngap<=bound: {}\n",
                r.t,
                r.lambda,
                r.b1,
                r.b2,
                r.b3,
                r.bound,
                r.p_max_le_t,
                r.poisson_approx,
                r.gap,
                r.within_bound(3.0)
            );
            if let Some(se) = r.std_errors {
                text += &format!("se(gap)={} se(bound)={} se(margin)={}\n", se.gap, se.bound, se.margin);
            }
            Ok(Output {
                seed: Some(*seed),
                text,
                data: serde_json::to_value(&r)?,
            })
        }
        Command::Mdp {
            dist,
            n,
            x,
            iters,
            seed,
        } => {
            let est = mdp_ratio(&parse_dist(dist)?, *n, *x, *iters, *seed)?;
            let text = format!(
                "ratio={} se={} tail={} normal_tail={} exceedances={}{}\n",
                est.ratio,
                est.std_error,
                est.tail,
                est.normal_tail,
                est.exceedances,
                if est.low_count { " (low count)" } else { "" }
            );
            Ok(Output {
                seed: Some(*seed),
                text,
                data: serde_json::to_value(est)?,
            })
        }
        Command::Regime {
            kind,
            tau,
            c1,
            c2,
            alpha,
            beta,
            c,
            n_values,
        } => {
            let regime = match kind {
                RegimeKind::Polynomial => GrowthRegime::Polynomial {
                    tau: required(*tau, "tau")?,
                    c1: required(*c1, "c1")?,
                    c2: required(*c2, "c2")?,
                },
                RegimeKind::Exponential => GrowthRegime::Exponential {
                    alpha: required(*alpha, "alpha")?,
                    beta: required(*beta, "beta")?,
                    c: *c,
                },
            };
            let seq = regime_sequence(&regime, &parse_list(n_values)?)?;
            let text = seq.iter().map(|(p, n)| format!("p={p} n={n}\n")).collect();
            Ok(Output {
                seed: None,
                text,
                data: json!({ "regime": regime, "pairs": seq.iter().map(|(p, n)| json!({"p": p, "n": n})).collect::<Vec<_>>() }),
            })
        }
        Command::ReproduceFigures { seed, out_dir } => {
            let files = reproduce_figures(*seed, out_dir)?;
            let mut text = String::new();
            for pr in &files.result.pairs {
                text += &format!(
                    "(p,n)=({},{}) mean z={:.4} sd={:.4}\n",
                    pr.p, pr.n, pr.summary.mean, pr.summary.sd
                );
            }
            for path in files.csv.iter().chain([&files.summary]).chain(&files.svg) {
                text += &format!("wrote {}\n", path.display());
            }
            Ok(Output {
                seed: Some(*seed),
                text,
                data: json!({
                    "csv": files.csv,
                    "summary": files.summary,
                    "svg": files.svg,
                    "pairs": files.result.pairs.iter().map(|p| json!({"p": p.p, "n": p.n, "summary": p.summary})).collect::<Vec<_>>(),
                }),
            })
        }
        Command::Plot {
            input,
            reference,
            out,
            pair_index,
        } => {
            let rows = read_results_csv(input)?;
            let pick = pair_index
                .or_else(|| rows.first().map(|r| r.pair_index))
                .ok_or_else(|| Error::Parameter("results file has no rows".into()))?;
            let values: Vec<f64> = rows.iter().filter(|r| r.pair_index == pick).map(|r| r.z).collect();
            if values.is_empty() {
                return Err(Error::Parameter(format!("no rows for pair index {pick}")));
            }
            emit_scatter_svg(&values, *reference, out)?;
            Ok(Output {
                seed: None,
                text: format!("wrote {} ({} points)\n", out.display(), values.len()),
                data: json!({ "out": out, "points": values.len(), "pair_index": pick }),
            })
        }
    }
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("THREADS") {
        let threads: usize = v
            .parse()
            .map_err(|_| Error::Parameter(format!("THREADS={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::ThreadPool(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let outcome = configure_threads().and_then(|()| run(&cli.command));
    match outcome {
        Ok(out) => {
            let version = env!("CARGO_PKG_VERSION");
            let hash = short_hash(format!("{:?}", cli.command).as_bytes());
            let seed = out.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
            if cli.json {
                let doc = json!({
                    "provenance": { "version": version, "seed": out.seed, "config_hash": hash },
                    "result": out.data,
                });
                println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
            } else {
                println!("# maxdist {version} seed={seed} config={hash}");
                print!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
