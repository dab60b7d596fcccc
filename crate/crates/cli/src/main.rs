use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use grsreach::casestudy::{
    quadrotor_proxy, run_scenario, write_run_artifacts, QuadrotorParams, RunOptions, ScenarioId, DEFAULT_ANGLES,
    DEFAULT_HORIZON, LITERAL_PROP_MASS,
};
use grsreach::config::{ConfigError, RunConfig, RunError};
use grsreach::proxy::{GrsBoundary, MIN_DIRECTIONS};
use grsreach::synthesizer::{SynthesisError, SynthesisResult, Variant};
use grsreach::verify::{run_suite, Suite, VerifyOptions};

const OUT_ENV: &str = "GRSREACH_OUT";
const DEFAULT_OUT: &str = "grsreach-out";

#[derive(Parser)]
#[command(
    name = "grsreach",
    version,
    about = "Guaranteed reachable sets and online reachability control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the boundary of the guaranteed reachable set.
    Grs(GrsArgs),
    /// Steer the system to a boundary point, learning on the fly.
    Synth(SynthArgs),
    /// Run the property suites.
    Verify(VerifyArgs),
    /// Run several scenario/angle pairs.
    Batch(BatchArgs),
}

#[derive(Args)]
struct Source {
    /// Flat key = value run configuration.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Quadrotor scenario A, B, C or D.
    #[arg(long)]
    scenario: Option<ScenarioId>,
    /// Use the 0.1 kg propeller mass instead of 0.01 kg.
    #[arg(long)]
    literal_prop_mass: bool,
}

#[derive(Args)]
struct GrsArgs {
    #[command(flatten)]
    source: Source,
    /// Horizon T.
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<f64>,
    /// Number of boundary directions.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    source: Source,
    /// Target direction in degrees.
    #[arg(long, allow_hyphen_values = true)]
    angle: Option<f64>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long)]
    max_cycles: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write wall-clock runtime into diag.json (makes it nondeterministic).
    #[arg(long)]
    record_runtime: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    /// Multiplies every tolerance; negative values force failures.
    #[arg(long, hide = true, allow_hyphen_values = true, default_value_t = 1.0)]
    inject_tolerance: f64,
}

#[derive(Args)]
struct BatchArgs {
    /// Comma-separated scenario ids.
    #[arg(long, value_delimiter = ',', default_value = "A,B,C,D")]
    scenarios: Vec<ScenarioId>,
    /// Comma-separated target angles in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    angles: Vec<f64>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    literal_prop_mass: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn usage(err: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            err: err.into(),
        }
    }

    fn run(err: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            err: err.into(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(_) => Failure::usage(e),
            _ => Failure::run(e),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::usage(e)
    }
}

impl From<SynthesisError> for Failure {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::InvalidConfig(_) => Failure::usage(e),
            _ => Failure::run(e),
        }
    }
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(Failure::usage)
}

fn config_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "config".into())
}

fn quad_params(literal: bool) -> QuadrotorParams {
    if literal {
        QuadrotorParams::default().with_prop_mass(LITERAL_PROP_MASS)
    } else {
        QuadrotorParams::default()
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn cmd_grs(args: GrsArgs) -> Result<(), Failure> {
    let samples = args.samples.unwrap_or(grsreach::proxy::DEFAULT_DIRECTIONS);
    if samples < MIN_DIRECTIONS {
        return Err(Failure::usage(anyhow!(
            "--samples must be at least {MIN_DIRECTIONS}, got {samples}"
        )));
    }
    let (name, proxy, horizon, dir) = match (&args.source.config, args.source.scenario) {
        (Some(path), _) => {
            let cfg = load_config(path)?;
            let setup = cfg.setup()?;
            let dir = cfg.out_dir.clone();
            (config_name(path), setup.proxy, args.horizon.unwrap_or(cfg.horizon), dir)
        }
        (None, id) => {
            let name = id.map(|i| i.to_string()).unwrap_or_else(|| "quadrotor".into());
            let proxy = quadrotor_proxy(&quad_params(args.source.literal_prop_mass));
            (name, proxy, args.horizon.unwrap_or(DEFAULT_HORIZON), None)
        }
    };
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Failure::usage(anyhow!("T must be a finite number >= 0, got {horizon}")));
    }
    let boundary: GrsBoundary = proxy.grs_boundary(horizon, samples).map_err(Failure::usage)?;
    let dir = args.out.or(dir).unwrap_or_else(|| out_root().join(&name));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(Failure::run)?;
    let path = dir.join("grs.csv");
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::run)?;
    boundary
        .write_csv(std::io::BufWriter::new(file))
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::run)?;
    let (min, max) = boundary.radius_range();
    println!("directions: {}", boundary.points.len());
    println!("min boundary radius: {}", grsreach::io::fmt_num(min));
    println!("max boundary radius: {}", grsreach::io::fmt_num(max));
    let clamped = boundary.points.iter().filter(|p| p.clamped).count();
    if clamped > 0 {
        println!("clamped at the domain boundary: {clamped}");
    }
    print_paths(&[path]);
    Ok(())
}

fn report(result: &SynthesisResult) {
    println!("variant: {}", result.variant);
    println!("r: {}", grsreach::io::fmt_num(result.radius));
    println!("cycles: {}", result.cycles());
    println!("termination: {}", result.termination);
    println!("final_error: {}", grsreach::io::fmt_num(result.final_error));
    let held = result.diagnostics.iter().filter(|d| d.condition.holds).count();
    if let Some(first) = result.diagnostics.first() {
        println!(
            "condition: held on {held}/{} cycles (cycle 0: lhs {:e}, rhs {:e})",
            result.diagnostics.len(),
            first.condition.lhs,
            first.condition.rhs
        );
    }
    if let Some(g) = result.gamma {
        println!("gamma: {}", grsreach::io::fmt_num(g));
    }
    if let Some(msg) = &result.message {
        println!("note: {msg}");
    }
}

fn finish(result: &SynthesisResult) -> Result<(), Failure> {
    if result.termination.is_success() {
        Ok(())
    } else {
        Err(Failure::run(anyhow!(
            "synthesis stopped early: {}",
            result.message.clone().unwrap_or_else(|| result.termination.to_string())
        )))
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let runtime = |on: bool| on.then(|| started.elapsed().as_secs_f64());
    match (&args.source.config, args.source.scenario) {
        (Some(path), _) => {
            let mut cfg = load_config(path)?;
            if let Some(a) = args.angle {
                cfg.target = grsreach::config::TargetSpec::Angle(a);
            }
            if let Some(v) = args.variant {
                cfg.variant = Some(v);
            }
            if let Some(t) = args.horizon {
                cfg.horizon = t;
            }
            if let Some(n) = args.max_cycles {
                cfg.max_cycles = n;
            }
            let name = config_name(path);
            let run = cfg.run()?;
            report(&run.result);
            let dir = args
                .out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| out_root().join(&name));
            let paths = write_run_artifacts(
                &dir,
                &name,
                "trajectory.csv",
                &run.result,
                Some(&run.boundary),
                run.reference.as_ref(),
                runtime(args.record_runtime),
            )
            .with_context(|| format!("cannot write artifacts to {}", dir.display()))
            .map_err(Failure::run)?;
            print_paths(&paths);
            finish(&run.result)
        }
        (None, None) => Err(Failure::usage(anyhow!("one of --scenario or --config is required"))),
        (None, Some(id)) => {
            let opts = RunOptions {
                variant: args.variant,
                params: quad_params(args.source.literal_prop_mass),
                max_cycles: args.max_cycles,
                horizon: args.horizon.unwrap_or(DEFAULT_HORIZON),
                ..RunOptions::default()
            };
            let run = run_scenario(id, args.angle.unwrap_or(DEFAULT_ANGLES[0]), &opts)?;
            report(&run.result);
            let dir = args.out.unwrap_or_else(|| out_root().join(id.as_str()));
            let paths = run
                .write_artifacts(&dir, runtime(args.record_runtime))
                .with_context(|| format!("cannot write artifacts to {}", dir.display()))
                .map_err(Failure::run)?;
            print_paths(&paths);
            finish(&run.result)
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let opts = VerifyOptions {
        tolerance_scale: args.inject_tolerance,
    };
    let outcomes = run_suite(args.suite, &opts);
    let width = outcomes
        .iter()
        .map(|c| c.suite.len() + c.name.len() + 1)
        .max()
        .unwrap_or(0);
    for c in &outcomes {
        let label = format!("{}/{}", c.suite, c.name);
        println!(
            "{} {label:width$}  value {:<12.6e} tol {:<12.6e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.value,
            c.tolerance,
            c.detail
        );
    }
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::run(anyhow!("{failed} verification checks failed")))
    }
}

fn cmd_batch(args: BatchArgs) -> Result<(), Failure> {
    if args.jobs == 0 {
        return Err(Failure::usage(anyhow!("--jobs must be at least 1")));
    }
    let angles = if args.angles.is_empty() {
        DEFAULT_ANGLES.to_vec()
    } else {
        args.angles.clone()
    };
    let tasks: Vec<(ScenarioId, f64)> = args
        .scenarios
        .iter()
        .flat_map(|&id| angles.iter().map(move |&a| (id, a)))
        .collect();
    let root = args.out.clone().unwrap_or_else(out_root);
    let opts = RunOptions {
        variant: args.variant,
        params: quad_params(args.literal_prop_mass),
        ..RunOptions::default()
    };
    let next = AtomicUsize::new(0);
    let lines: Mutex<Vec<Option<(String, bool)>>> = Mutex::new(vec![None; tasks.len()]);
    std::thread::scope(|s| {
        for _ in 0..args.jobs.min(tasks.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(id, angle)) = tasks.get(i) else { break };
                let dir = root.join(id.as_str()).join(format!("angle_{angle}"));
                let line = match run_scenario(id, angle, &opts) {
                    Ok(run) => {
                        let r = &run.result;
                        let written = run.write_artifacts(&dir, None);
                        let ok = r.termination.is_success() && written.is_ok();
                        let note = written
                            .err()
                            .map(|e| format!(" (write failed: {e})"))
                            .unwrap_or_default();
                        (
                            format!(
                                "{id} {angle:>7} {:<10} r {:<10.6} cycles {:<6} error {:<10.6} {} {}{note}",
                                r.variant,
                                r.radius,
                                r.cycles(),
                                r.final_error,
                                r.termination,
                                dir.display()
                            ),
                            ok,
                        )
                    }
                    Err(e) => (format!("{id} {angle:>7} error: {e}"), false),
                };
                lines.lock().expect("no poisoned lock")[i] = Some(line);
            });
        }
    });
    let lines = lines.into_inner().expect("no poisoned lock");
    let mut failed = 0;
    for (text, ok) in lines.into_iter().flatten() {
        if !ok {
            failed += 1;
        }
        println!("{text}");
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::run(anyhow!("{failed} of {} runs failed", tasks.len())))
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Grs(a) => cmd_grs(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Batch(a) => cmd_batch(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", render(&f.err));
            ExitCode::from(f.code)
        }
    }
}
