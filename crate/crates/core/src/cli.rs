//! Command-line front end. [`run`] does all the work and returns the exit
//! code and output text, so the binary is a thin wrapper and tests can drive
//! it in-process.
//!
//! Exit codes: 0 success, 1 usage error, 2 verification failure, 3
//! non-generic channel.

use std::ffi::OsString;
use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bounds::{dof_report, pareto_vertices, polytope_max, region_example_221, Point2, Rational};
use crate::channel::{generate_channel, AntennaProfile};
use crate::numerics::Tolerance;
use crate::simulate::{self, dominant_rate_curve, estimate_dof_slope, monte_carlo_transform};
use crate::transform::{run_variant, verify_transform, TransformError, TransformOptions, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;
pub const EXIT_NON_GENERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mimo-dof", version, about = "Sum DoF of asymmetric MIMO interference channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form bounds, exact sum DoF and regime for a profile.
    Analyze(AnalyzeArgs),
    /// Build and verify a channel transformation on one seeded channel.
    Transform(TransformArgs),
    /// Rate curve and fitted DoF slope of the dominant-user scheme.
    Slope(SlopeArgs),
    /// The (2,2,1) dimension-counting pentagon and a linear objective over it.
    Region(RegionArgs),
    /// Success rate of a transformation over many seeded channels.
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Example221,
    General3,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Example221 => Variant::Example221,
            VariantArg::General3 => Variant::General3User,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    /// Relative singular-value cutoff for numerical rank.
    #[arg(long, default_value_t = Tolerance::DEFAULT_RANK_REL_TOL)]
    pub rank_tol: f64,
    /// Relative residual below which an entry counts as neutralized.
    #[arg(long, default_value_t = Tolerance::DEFAULT_ZERO_REL_TOL)]
    pub zero_tol: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Antenna counts, comma separated.
    #[arg(long = "M")]
    pub m: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long = "M")]
    pub m: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "general3")]
    pub variant: VariantArg,
    /// Retries with fresh free columns after an invertibility failure.
    #[arg(long, default_value_t = 0)]
    pub retries: u32,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SlopeArgs {
    #[arg(long = "M")]
    pub m: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Linear transmit powers, comma separated.
    #[arg(long)]
    pub powers: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Objective weights `a,b` for `a*d + b*d'`; fractions like `3/2` allowed.
    #[arg(long, default_value = "2,1")]
    pub objective: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[arg(long = "M")]
    pub m: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "general3")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[command(flatten)]
    pub common: Common,
}

/// Exit code with the text destined for stdout (or `--out`) and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        let code = if e.is_non_generic() { EXIT_NON_GENERIC } else { EXIT_USAGE };
        Self {
            code,
            message: format!("error: {e}"),
        }
    }
}

struct Rendered {
    code: i32,
    body: String,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let mut notes = String::new();
    let (out_path, result) = match &cli.command {
        Command::Analyze(a) => (&a.common.out, analyze(a, &mut notes)),
        Command::Transform(a) => (&a.common.out, transform(a, &mut notes)),
        Command::Slope(a) => (&a.common.out, slope(a, &mut notes)),
        Command::Region(a) => (&a.common.out, region(a)),
        Command::Montecarlo(a) => (&a.common.out, montecarlo(a, &mut notes)),
    };
    match result {
        Err(f) => {
            notes.push_str(&f.message);
            notes.push('\n');
            Outcome {
                code: f.code,
                stdout: String::new(),
                stderr: notes,
            }
        }
        Ok(r) => match out_path {
            Some(path) => match std::fs::write(path, &r.body) {
                Ok(()) => Outcome {
                    code: r.code,
                    stdout: String::new(),
                    stderr: notes,
                },
                Err(e) => Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: format!("{notes}error: cannot write {}: {e}\n", path.display()),
                },
            },
            None => Outcome {
                code: r.code,
                stdout: r.body,
                stderr: notes,
            },
        },
    }
}

fn parse_profile(s: &str, notes: &mut String) -> Result<AntennaProfile, Failure> {
    let profile: AntennaProfile = s.parse().map_err(|e| Failure::usage(format!("error: --M {s:?}: {e}")))?;
    let given: Vec<&str> = s.split(',').map(str::trim).collect();
    let sorted: Vec<String> = profile.counts().iter().map(|m| m.to_string()).collect();
    if given != sorted {
        let _ = writeln!(notes, "note: profile reordered to {profile}");
    }
    Ok(profile)
}

fn parse_tolerance(t: &ToleranceArgs) -> Result<Tolerance, Failure> {
    Tolerance::new(t.rank_tol, t.zero_tol).map_err(|e| Failure::usage(format!("error: {e}")))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn reject_format(cmd: &str, f: Format) -> Failure {
    Failure::usage(format!("error: {cmd} does not support --format {f:?}").to_lowercase())
}

fn analyze(a: &AnalyzeArgs, notes: &mut String) -> Result<Rendered, Failure> {
    let profile = parse_profile(&a.m, notes)?;
    let report = dof_report(&profile).map_err(|e| Failure::usage(format!("error: {e}")))?;
    let body = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => pretty(&serde_json::to_value(&report).expect("report serializes")),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "profile      {}", report.profile);
            let _ = writeln!(s, "inner        {}", report.inner);
            match (&report.outer_coop, &report.witness) {
                (Some(v), Some(w)) => {
                    let _ = writeln!(s, "outer_coop   {v} (S = {w:?})");
                }
                _ => {
                    let _ = writeln!(s, "outer_coop   n/a (single user)");
                }
            }
            let _ = writeln!(s, "sum DoF      {}", report.theorem);
            let _ = writeln!(s, "regime       {}", report.regime);
            if let Some(p) = &report.partition {
                let _ = writeln!(s, "partition    {p:?}");
            }
            s
        }
        f => return Err(reject_format("analyze", f)),
    };
    Ok(Rendered { code: EXIT_OK, body })
}

fn transform(a: &TransformArgs, notes: &mut String) -> Result<Rendered, Failure> {
    let profile = parse_profile(&a.m, notes)?;
    let tol = parse_tolerance(&a.tol)?;
    let variant = Variant::from(a.variant);
    let ch = generate_channel(&profile, a.seed);
    let opts = TransformOptions {
        tol,
        free_seed: None,
        retries: a.retries,
    };
    let (pair, out) = run_variant(&ch, variant, &opts)?;
    let report = verify_transform(&ch, &pair, &out.pattern, &tol)?;
    let code = if report.pass { EXIT_OK } else { EXIT_VERIFICATION };
    let body = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => pretty(&json!({
            "profile": profile,
            "seed": a.seed,
            "variant": variant,
            "tolerance": tol,
            "pass": report.pass,
            "transformed": out.to_doc(),
            "verification": report,
        })),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "profile {profile} variant {variant} seed {}", a.seed);
            let _ = writeln!(s, "required zeros: {}", out.pattern.scalar_zero_count());
            s.push_str(&out.pattern.render());
            let _ = writeln!(s, "rx tx rx_block tx_block residual");
            for r in &report.residuals {
                let _ = writeln!(s, "{} {} {} {} {:.3e}", r.rx, r.tx, r.rx_block, r.tx_block, r.residual);
            }
            let fmt_cond = |c: &Option<f64>| c.map_or("singular".to_string(), |c| format!("{c:.3e}"));
            for (i, (u, v)) in report.u_conditions.iter().zip(&report.v_conditions).enumerate() {
                let _ = writeln!(s, "cond U{} {}  cond V{} {}", i + 1, fmt_cond(u), i + 1, fmt_cond(v));
            }
            let _ = writeln!(s, "{}", if report.pass { "PASS" } else { "FAIL" });
            s
        }
        f => return Err(reject_format("transform", f)),
    };
    Ok(Rendered { code, body })
}

fn parse_powers(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite() && *p > 0.0)
                .ok_or_else(|| Failure::usage(format!("error: malformed power {t:?} in --powers")))
        })
        .collect()
}

fn slope(a: &SlopeArgs, notes: &mut String) -> Result<Rendered, Failure> {
    let profile = parse_profile(&a.m, notes)?;
    let powers = match &a.powers {
        Some(p) => parse_powers(p)?,
        None => simulate::DEFAULT_POWERS.to_vec(),
    };
    let ch = generate_channel(&profile, a.seed);
    let curve = dominant_rate_curve(&ch, &powers).map_err(|e| Failure::usage(format!("error: {e}")))?;
    let slope = estimate_dof_slope(&curve).map_err(|e| Failure::usage(format!("error: {e}")))?;
    let body = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => format!("# profile {profile} seed {}\n{}slope,{slope}\n", a.seed, curve.to_csv()),
        Format::Json => pretty(&json!({
            "profile": profile,
            "seed": a.seed,
            "scheme": curve.scheme,
            "points": curve.points,
            "slope": slope,
        })),
        Format::Text => format!("profile {profile} seed {}: dominant-user slope {slope:.4}\n", a.seed),
    };
    Ok(Rendered { code: EXIT_OK, body })
}

fn parse_objective(s: &str) -> Result<(Rational, Rational), Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Failure::usage(format!("error: --objective expects `a,b`, got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a = parts[0].parse::<Rational>().map_err(|_| bad())?;
    let b = parts[1].parse::<Rational>().map_err(|_| bad())?;
    Ok((a, b))
}

fn point_json(p: &Point2) -> serde_json::Value {
    json!([p.0.to_string(), p.1.to_string()])
}

fn region(a: &RegionArgs) -> Result<Rendered, Failure> {
    let objective = parse_objective(&a.objective)?;
    let region = region_example_221();
    let (max, at) = polytope_max(&region, objective).map_err(|e| Failure::usage(format!("error: {e}")))?;
    let vertices = region.vertices();
    let body = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => pretty(&json!({
            "constraints": ["d <= 1", "d' <= 1", "d + d' <= 3/2", "d >= 0", "d' >= 0"],
            "vertices": vertices.iter().map(point_json).collect::<Vec<_>>(),
            "upper_boundary": pareto_vertices(&region).iter().map(point_json).collect::<Vec<_>>(),
            "objective": [objective.0.to_string(), objective.1.to_string()],
            "max": max,
            "argmax": point_json(&at),
        })),
        Format::Text => {
            let mut s = String::from("vertices:");
            for v in &vertices {
                let _ = write!(s, " ({},{})", v.0, v.1);
            }
            let _ = writeln!(s, "\nmax {}*d + {}*d' = {max} at ({},{})", objective.0, objective.1, at.0, at.1);
            s
        }
        f => return Err(reject_format("region", f)),
    };
    Ok(Rendered { code: EXIT_OK, body })
}

fn montecarlo(a: &MonteCarloArgs, notes: &mut String) -> Result<Rendered, Failure> {
    let profile = parse_profile(&a.m, notes)?;
    let tol = parse_tolerance(&a.tol)?;
    let report = monte_carlo_transform(&profile, a.variant.into(), a.trials, a.seed, &tol).map_err(|e| match e {
        simulate::SimulateError::Transform(t) => Failure::from(t),
        other => Failure::usage(format!("error: {other}")),
    })?;
    let code = if report.successes == report.trials {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    };
    let body = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => pretty(&serde_json::to_value(&report).expect("report serializes")),
        Format::Text => {
            let mut s = format!(
                "profile {} variant {} seed {}: {}/{} passed",
                report.profile, report.variant, report.seed, report.successes, report.trials
            );
            if let Some(r) = report.worst_residual {
                let _ = write!(s, ", worst residual {r:.3e}");
            }
            if let Some(c) = report.worst_condition {
                let _ = write!(s, ", worst condition {c:.3e}");
            }
            s.push('\n');
            for f in &report.failures {
                let _ = writeln!(s, "trial {} (channel seed {}): {}", f.trial, f.channel_seed, f.message);
            }
            s
        }
        f => return Err(reject_format("montecarlo", f)),
    };
    Ok(Rendered { code, body })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Outcome {
        run(std::iter::once("mimo-dof").chain(args.iter().copied()))
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run_args(&["frobnicate"]).code, EXIT_USAGE);
        assert_eq!(run_args(&[]).code, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let out = run_args(&["--help"]);
        assert_eq!(out.code, EXIT_OK);
        assert!(out.stdout.contains("analyze"));
    }

    #[test]
    fn bad_profile_is_usage_error() {
        let out = run_args(&["analyze", "--M", "2,x"]);
        assert_eq!(out.code, EXIT_USAGE);
        assert!(out.stderr.contains("--M"));
    }

    #[test]
    fn sorting_notice() {
        let out = run_args(&["analyze", "--M", "1,2,2"]);
        assert_eq!(out.code, EXIT_OK);
        assert!(out.stderr.contains("reordered"));
    }

    #[test]
    fn objective_parsing() {
        assert!(parse_objective("3/2,1").is_ok());
        assert!(parse_objective("1").is_err());
        assert!(parse_objective("a,b").is_err());
    }

    #[test]
    fn powers_parsing() {
        assert_eq!(parse_powers("1e4, 1e5").ok(), Some(vec![1e4, 1e5]));
        assert!(parse_powers("1e4,,1e5").is_err());
        assert!(parse_powers("-1").is_err());
    }
}
