//! `clone-sim` front end: argument definitions, config-file parsing and the
//! command implementations. `main` only prints an [`Outcome`] and exits.
//!
//! Exit codes: 0 success, 1 a tolerance gate or validation check failed,
//! 2 configuration error, 3 physics precondition or leakage failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamics::CouplingConfig;
use crate::error::{Error, Result};
use crate::hilbert::C64;
use crate::protocol::{build_uqcm_schedule, run_uqcm_with, InputQubit, RunOptions};
use crate::validate::run_validation;
use crate::verify::{clone_fidelities, sample_jitter_seed, universality_sweep, SweepOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GATE_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PHYSICS: i32 = 3;

const FIVE_SIXTHS: f64 = 5.0 / 6.0;

#[derive(Debug, Parser)]
#[command(
    name = "clone-sim",
    version,
    about = "Pulse-level simulator of a 1->2 universal quantum cloner with SQUID qutrits in a cavity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clone one input qubit and print the clone report as JSON.
    Run(CommonArgs),
    /// Clone seeded random inputs and print one CSV row per input.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of Bloch-sphere samples.
        #[arg(short = 'n', long = "samples")]
        n: Option<usize>,
        /// Also write the JSON summary of the SQUID2 fidelities here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run one input and emit the per-step state trace as JSON.
    Trace(CommonArgs),
    /// Print the pulse schedule as JSON.
    Schedule(CommonArgs),
    /// Run the built-in oracle and conformance checks.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// List every check with its deviation.
        #[arg(long)]
        verbose: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long, env = "CLONE_SIM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Bloch polar angle of the input in the {|+>, |->} basis.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Bloch azimuth of the input.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Amplitude on |+> as `re` or `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Amplitude on |-> as `re` or `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Fractional per-slot duration error.
    #[arg(long)]
    pub timing_jitter: Option<f64>,
    /// Write the step trace JSON to this path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub fock_cutoff: Option<usize>,
    /// Pass/fail tolerance for fidelities and target overlap.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

/// How the input qubit was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputSpec {
    Bloch { theta: f64, phi: f64 },
    Amplitudes { alpha: C64, beta: C64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub couplings: CouplingConfig,
    pub fock_cutoff: usize,
    pub tolerance: f64,
    pub input: InputSpec,
    pub seed: u64,
    pub jobs: usize,
    pub timing_jitter: f64,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            couplings: CouplingConfig::default(),
            fock_cutoff: crate::hilbert::BasisSpec::DEFAULT_FOCK_CUTOFF,
            tolerance: 1e-9,
            input: InputSpec::Bloch {
                theta: 0.0,
                phi: 0.0,
            },
            seed: 0,
            jobs: 0,
            timing_jitter: 0.0,
            samples: 100,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "lambda",
    "omega_ge",
    "omega_ie",
    "lambda_prime",
    "omega_gi",
    "delta",
    "fock_cutoff",
    "tolerance",
    "theta",
    "phi",
    "alpha",
    "beta",
    "seed",
    "jobs",
    "timing_jitter",
    "samples",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {}: unknown key `{key}`",
                lineno + 1
            )));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

pub fn load_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

/// `re` or `re,im`.
pub fn parse_complex(key: &str, v: &str) -> Result<C64> {
    match v.split_once(',') {
        Some((re, im)) => Ok(C64::new(parse_num(key, re)?, parse_num(key, im)?)),
        None => Ok(C64::new(parse_num(key, v)?, 0.0)),
    }
}

fn input_from(
    theta: Option<f64>,
    phi: Option<f64>,
    alpha: Option<C64>,
    beta: Option<C64>,
) -> Result<Option<InputSpec>> {
    let bloch = theta.is_some() || phi.is_some();
    let amps = alpha.is_some() || beta.is_some();
    match (bloch, amps) {
        (true, true) => Err(Error::Config(
            "give the input either as --theta/--phi or as --alpha/--beta, not both".into(),
        )),
        (true, false) => Ok(Some(InputSpec::Bloch {
            theta: theta.unwrap_or(0.0),
            phi: phi.unwrap_or(0.0),
        })),
        (false, true) => Ok(Some(InputSpec::Amplitudes {
            alpha: alpha.unwrap_or_default(),
            beta: beta.unwrap_or_default(),
        })),
        (false, false) => Ok(None),
    }
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(args: &CommonArgs, samples: Option<usize>) -> Result<RunConfig> {
        let file = match &args.config {
            Some(p) => load_config_file(p)?,
            None => BTreeMap::new(),
        };
        let mut cfg = RunConfig::default();
        let get = |k: &str| file.get(k).map(String::as_str);
        let c = &mut cfg.couplings;
        for (key, slot) in [
            ("lambda", &mut c.lambda),
            ("omega_ge", &mut c.omega_ge),
            ("omega_ie", &mut c.omega_ie),
            ("lambda_prime", &mut c.lambda_prime),
            ("omega_gi", &mut c.omega_gi),
            ("delta", &mut c.delta),
        ] {
            if let Some(v) = get(key) {
                *slot = parse_num(key, v)?;
            }
        }
        if let Some(v) = get("fock_cutoff") {
            cfg.fock_cutoff = parse_num("fock_cutoff", v)?;
        }
        if let Some(v) = get("tolerance") {
            cfg.tolerance = parse_num("tolerance", v)?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = parse_num("seed", v)?;
        }
        if let Some(v) = get("jobs") {
            cfg.jobs = parse_num("jobs", v)?;
        }
        if let Some(v) = get("timing_jitter") {
            cfg.timing_jitter = parse_num("timing_jitter", v)?;
        }
        if let Some(v) = get("samples") {
            cfg.samples = parse_num("samples", v)?;
        }
        let file_input = input_from(
            get("theta").map(|v| parse_num("theta", v)).transpose()?,
            get("phi").map(|v| parse_num("phi", v)).transpose()?,
            get("alpha")
                .map(|v| parse_complex("alpha", v))
                .transpose()?,
            get("beta").map(|v| parse_complex("beta", v)).transpose()?,
        )?;
        if let Some(input) = file_input {
            cfg.input = input;
        }

        let flag_input = input_from(
            args.theta,
            args.phi,
            args.alpha
                .as_deref()
                .map(|v| parse_complex("alpha", v))
                .transpose()?,
            args.beta
                .as_deref()
                .map(|v| parse_complex("beta", v))
                .transpose()?,
        )?;
        if let Some(input) = flag_input {
            cfg.input = input;
        }
        if let Some(v) = args.fock_cutoff {
            cfg.fock_cutoff = v;
        }
        if let Some(v) = args.tolerance {
            cfg.tolerance = v;
        }
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = args.timing_jitter {
            cfg.timing_jitter = v;
        }
        if let Some(v) = samples {
            cfg.samples = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.couplings.validate()?;
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.fock_cutoff == 0 {
            return Err(Error::Config("fock_cutoff must be >= 1".into()));
        }
        if !(self.timing_jitter.is_finite() && (0.0..1.0).contains(&self.timing_jitter)) {
            return Err(Error::Config(format!(
                "timing_jitter must lie in [0, 1), got {}",
                self.timing_jitter
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("sweep needs at least one sample".into()));
        }
        self.input_qubit().map(|_| ())
    }

    pub fn input_qubit(&self) -> Result<InputQubit> {
        match self.input {
            InputSpec::Bloch { theta, phi } => {
                if !(theta.is_finite() && phi.is_finite()) {
                    return Err(Error::Config("theta and phi must be finite".into()));
                }
                Ok(InputQubit::from_bloch(theta, phi))
            }
            InputSpec::Amplitudes { alpha, beta } => InputQubit::normalized(alpha, beta),
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            fock_cutoff: self.fock_cutoff,
            timing_jitter: self.timing_jitter,
            jitter_seed: sample_jitter_seed(self.seed, 0),
            ..RunOptions::default()
        }
    }
}

/// What a command printed and how it should exit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn from_error(err: &Error) -> Self {
        let code = if err.is_physics() {
            EXIT_PHYSICS
        } else {
            EXIT_CONFIG
        };
        Self {
            code,
            stdout: String::new(),
            stderr: format!("error: {err}\n"),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

pub fn cmd_run(args: &CommonArgs) -> Outcome {
    match run_inner(args) {
        Ok(o) => o,
        Err(e) => Outcome::from_error(&e),
    }
}

fn run_inner(args: &CommonArgs) -> Result<Outcome> {
    let cfg = RunConfig::resolve(args, None)?;
    let q = cfg.input_qubit()?;
    let (final_state, trace) = run_uqcm_with(&q, &cfg.couplings, &cfg.run_options())?;
    let report = clone_fidelities(&final_state, &q)?;
    if let Some(path) = &args.trace {
        write_file(path, &pretty(&trace.to_json()))?;
    }
    let tol = cfg.tolerance;
    let passed = (report.fidelity_squid2 - FIVE_SIXTHS).abs() <= tol
        && (report.fidelity_squid3 - FIVE_SIXTHS).abs() <= tol
        && 1.0 - report.target_overlap <= tol
        && !report.leakage_flagged;
    let mut json = report.to_json();
    json["passed"] = passed.into();
    json["tolerance"] = crate::sig12(tol).into();
    let mut out = Outcome::ok(pretty(&json));
    if !passed {
        out.code = EXIT_GATE_FAILED;
    }
    Ok(out)
}

pub fn cmd_sweep(args: &CommonArgs, n: Option<usize>, summary: Option<&Path>) -> Outcome {
    let run = || -> Result<Outcome> {
        let cfg = RunConfig::resolve(args, n)?;
        let opts = SweepOptions {
            jobs: cfg.jobs,
            timing_jitter: cfg.timing_jitter,
            fock_cutoff: cfg.fock_cutoff,
        };
        let report = universality_sweep(cfg.samples, cfg.seed, &cfg.couplings, &opts)?;
        if let Some(path) = summary {
            write_file(path, &pretty(&report.summary_json()))?;
        }
        Ok(Outcome::ok(report.to_csv()))
    };
    run().unwrap_or_else(|e| Outcome::from_error(&e))
}

pub fn cmd_trace(args: &CommonArgs) -> Outcome {
    let run = || -> Result<Outcome> {
        let cfg = RunConfig::resolve(args, None)?;
        let q = cfg.input_qubit()?;
        let (_, trace) = run_uqcm_with(&q, &cfg.couplings, &cfg.run_options())?;
        let text = pretty(&trace.to_json());
        match &args.trace {
            Some(path) => {
                write_file(path, &text)?;
                Ok(Outcome::ok(String::new()))
            }
            None => Ok(Outcome::ok(text)),
        }
    };
    run().unwrap_or_else(|e| Outcome::from_error(&e))
}

pub fn cmd_schedule(args: &CommonArgs) -> Outcome {
    let run = || -> Result<Outcome> {
        let cfg = RunConfig::resolve(args, None)?;
        let schedule = build_uqcm_schedule(&cfg.couplings)?;
        let json = serde_json::json!({
            "total_duration": crate::sig12(schedule.total_duration()),
            "slots": schedule.to_json(),
        });
        Ok(Outcome::ok(pretty(&json)))
    };
    run().unwrap_or_else(|e| Outcome::from_error(&e))
}

pub fn cmd_validate(args: &CommonArgs, verbose: bool) -> Outcome {
    let cfg = match RunConfig::resolve(args, None) {
        Ok(c) => c,
        Err(e) => return Outcome::from_error(&e),
    };
    let checks = match run_validation(&cfg.couplings) {
        Ok(c) => c,
        Err(e) => return Outcome::from_error(&e),
    };
    let mut out = String::new();
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    if verbose {
        for c in &checks {
            out.push_str(&format!(
                "{} {}::{} max_deviation={:.11e} tolerance={:.1e}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.module,
                c.op,
                c.max_deviation,
                c.tolerance
            ));
        }
    } else if let Some(c) = failed.first() {
        out.push_str(&format!(
            "FAIL {}::{} max_deviation={:.11e} tolerance={:.1e}\n",
            c.module, c.op, c.max_deviation, c.tolerance
        ));
    }
    out.push_str(&format!(
        "{} of {} checks passed\n",
        checks.len() - failed.len(),
        checks.len()
    ));
    Outcome {
        code: if failed.is_empty() {
            EXIT_OK
        } else {
            EXIT_GATE_FAILED
        },
        stdout: out,
        stderr: String::new(),
    }
}

pub fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep { common, n, summary } => cmd_sweep(common, *n, summary.as_deref()),
        Command::Trace(a) => cmd_trace(a),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Validate { common, verbose } => cmd_validate(common, *verbose),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_parsing() {
        let m = parse_config_text("# couplings\nlambda = 2.5\n\nomega_gi=30 # fast\n").unwrap();
        assert_eq!(m["lambda"], "2.5");
        assert_eq!(m["omega_gi"], "30");
        assert!(parse_config_text("lambda 2").is_err());
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(
            parse_complex("a", "0.5,-0.25").unwrap(),
            C64::new(0.5, -0.25)
        );
        assert_eq!(parse_complex("a", "-1").unwrap(), C64::new(-1.0, 0.0));
        assert!(parse_complex("a", "x").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        fs::write(&path, "lambda = 2\ntheta = 1.0\nseed = 5\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            seed: Some(9),
            alpha: Some("1".into()),
            beta: Some("0,1".into()),
            ..CommonArgs::default()
        };
        let cfg = RunConfig::resolve(&args, None).unwrap();
        assert_eq!(cfg.couplings.lambda, 2.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(
            cfg.input,
            InputSpec::Amplitudes {
                alpha: C64::new(1.0, 0.0),
                beta: C64::new(0.0, 1.0)
            }
        );
        let q = cfg.input_qubit().unwrap();
        assert!((q.alpha().norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = CommonArgs {
            tolerance: Some(0.0),
            ..CommonArgs::default()
        };
        assert!(RunConfig::resolve(&bad, None).is_err());
        let both = CommonArgs {
            theta: Some(1.0),
            alpha: Some("1".into()),
            ..CommonArgs::default()
        };
        assert!(RunConfig::resolve(&both, None).is_err());
        assert!(RunConfig::resolve(&CommonArgs::default(), Some(0)).is_err());
    }

    #[test]
    fn run_reports_five_sixths() {
        let out = cmd_run(&CommonArgs::default());
        assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["fidelity_squid2"], 0.833333333333);
        assert_eq!(v["passed"], true);
    }

    #[test]
    fn zero_lambda_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        fs::write(&path, "lambda = 0\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        assert_eq!(cmd_validate(&args, false).code, EXIT_CONFIG);
        assert_eq!(cmd_run(&args).code, EXIT_CONFIG);
    }
}
