//! `callias` — command-line driver for the trace and index formulas.
//!
//! Every subcommand resolves its configuration (flags, or `--config` with a
//! JSON file holding either a bare config or a previously emitted envelope),
//! runs the computation, and prints one JSON envelope `{manifest, result}`.
//! Tabular series additionally go to `--csv`.  Runs are serial by default;
//! `--threads` opts into parallelism, `--reproducible` pins the serial mode
//! and records it.  Exit codes: 0 success, 2 invalid input or invariant
//! violation, 3 non-convergence.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use callias_core::callias::{surface_index, SurfaceIndexConfig};
use callias_core::clifford::{build_clifford, kappa_minimal};
use callias_core::error::{CoreError, Result};
use callias_core::evolution::{propagate, EvolveOptions, Method};
use callias_core::heat_trace::{heat_trace, witten_limit, HeatTraceConfig, WittenConfig};
use callias_core::oned_oracle::{compare_sides, scalar_kink, two_channel_model};
use callias_core::potential::audit::{audit_field, AuditConfig};
use callias_core::potential::builtins;
use callias_core::potential::user_spec::load_field;
use callias_core::potential::{apply_cutoff, CutoffSpec, PotentialField, SphereField};
use callias_core::report::{fmt_f64, CsvTable, Envelope, Manifest};
use callias_core::witten_ds::{
    build_example_loop, default_regular_value, example_closed_form, ramped_hedgehog_profile,
    su2_degree, winding_density, winding_index, ClosedFormConfig, DegreeConfig, ExampleLoopSpec,
    Mollifier, WindingConfig, WINDING_VS_DEGREE,
};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "callias",
    version,
    about = "Trace and index formulas for Dirac-Schrodinger operators with matrix potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: CALLIAS_THREADS or 1; serial is the default
    /// so results are reproducible without flags).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Force the serial deterministic mode and record it in the manifest.
    #[arg(long, global = true)]
    reproducible: bool,

    /// Treat non-converged results as fatal (exit 3).
    #[arg(long, global = true)]
    strict: bool,

    /// Write the JSON envelope to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Write the tabular series to this CSV file (commands with series data).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,

    /// Load the subcommand configuration from a JSON file: either a bare
    /// config object or an envelope emitted by a previous run (its manifest
    /// command must match).  Other config flags are ignored.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Clifford representation facts for odd dimension d.
    CliffordInfo(CliffordArgs),
    /// Heat-trace difference at one or more diffusion times.
    HeatTrace(HeatTraceArgs),
    /// Large-time plateau of the heat trace for a sphere-limit field.
    WittenLimit(WittenArgs),
    /// Surface-integral index over large spheres.
    CalliasIndex(CalliasArgs),
    /// Winding index of the product-form loop unitary, with degree oracle.
    DsWitten(DsWittenArgs),
    /// Propagate a one-parameter Hermitian generator and check invariants.
    Evolve(EvolveArgs),
    /// One-dimensional lattice oracle for the resolvent trace identity.
    #[command(name = "oracle-1d")]
    Oracle1d(OracleArgs),
    /// Decay and invertibility audit of a potential field.
    Audit(AuditArgs),
}

// ---------------------------------------------------------------------------
// Subcommand argument/config structs
// ---------------------------------------------------------------------------

#[derive(Args, Serialize, Deserialize)]
struct CliffordArgs {
    /// Odd dimension.
    #[arg(long, default_value_t = 3)]
    d: usize,
}

#[derive(Args, Serialize, Deserialize)]
struct HeatTraceArgs {
    /// Built-in field name (see README for the registry).
    #[arg(long, default_value = "hedgehog")]
    field: String,
    /// JSON file with a user field spec (overrides --field).
    #[arg(long)]
    field_json: Option<PathBuf>,
    /// Diffusion times (repeatable).
    #[arg(long = "t")]
    ts: Vec<f64>,
    /// Linear time grid `a:b:n` (inclusive); appended to --t.
    #[arg(long)]
    t_grid: Option<String>,
    /// Apply a radial cutoff with this plateau radius.
    #[arg(long)]
    cutoff_r0: Option<f64>,
    /// Transition width of the radial cutoff.
    #[arg(long)]
    cutoff_width: Option<f64>,
    /// Polynomial degree of the simplex rule.
    #[arg(long, default_value_t = 7)]
    quad_degree: usize,
    #[arg(long, default_value_t = 16)]
    sphere_level: usize,
    #[arg(long, default_value_t = 60.0)]
    r_max: f64,
    #[arg(long, default_value_t = 48)]
    radial_nodes: usize,
    /// Radial panel boundaries (comma list, e.g. `1,2,4`); panels resolve
    /// fields with localized structure far better than one global rule.
    #[arg(long, default_value = "1,2")]
    radial_splits: String,
    /// Monte Carlo samples if the symmetric simplex rule is unavailable.
    #[arg(long, default_value_t = 20000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct WittenArgs {
    /// Sphere-limit field: `hedgehog` (exact limit) or any registry field,
    /// whose limit is then sampled at --r-big.
    #[arg(long, default_value = "hedgehog")]
    field: String,
    #[arg(long, default_value_t = 1e8)]
    r_big: f64,
    /// Times: comma list or geometric grid `a:r:n`.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long, default_value_t = 24)]
    sphere_level: usize,
    #[arg(long, default_value_t = 96)]
    radial_nodes: usize,
    #[arg(long, default_value_t = 0.01)]
    plateau_tol: f64,
    #[arg(long, default_value_t = 0.01)]
    quad_gate: f64,
}

#[derive(Args, Serialize, Deserialize)]
struct CalliasArgs {
    #[arg(long, default_value = "hedgehog")]
    field: String,
    /// JSON file with a user field spec (overrides --field).
    #[arg(long)]
    field_json: Option<PathBuf>,
    /// Comma-separated increasing evaluation radii.
    #[arg(long, default_value = "20,40,80")]
    radii: String,
    #[arg(long, default_value_t = 24)]
    sphere_level: usize,
    #[arg(long, default_value_t = 1e-4)]
    fd_step: f64,
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    plateau_tol: f64,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum DsMethod {
    /// Winding integral of the dual-route-verified loop unitary.
    Evolution,
    /// Closed-form candidate density with explicit zero-set exclusion.
    ClosedForm,
    /// Both, reported side by side (never reconciled).
    Both,
}

#[derive(Args, Serialize, Deserialize)]
struct DsWittenArgs {
    /// Profile spec `hedgehog:amp=<v>` (v may be `pi` or a number).
    #[arg(long = "F", default_value = "hedgehog:amp=pi")]
    f_spec: String,
    #[arg(long, value_enum, default_value_t = DsMethod::Both)]
    method: DsMethod,
    #[arg(long, default_value_t = 16)]
    sphere_level: usize,
    #[arg(long, default_value_t = 60)]
    radial_nodes: usize,
    /// Exclusion radius of the closed-form candidate around {F = 0}.
    #[arg(long, default_value_t = 0.1)]
    exclusion_eps: f64,
    /// Grid points per axis of the degree oracle's seeding scan.
    #[arg(long, default_value_t = 26)]
    grid_points: usize,
    #[arg(long, default_value_t = 13)]
    seed: u64,
    /// Density samples along the diagnostic ray for the CSV series.
    #[arg(long, default_value_t = 60)]
    ray_samples: usize,
}

#[derive(Args, Serialize, Deserialize)]
struct EvolveArgs {
    /// Generator: `commuting[:<theta>]` (fixed direction times a bump) or
    /// `slice:<x1,x2,x3>[:<amp>]` (product-form loop generator at x).
    #[arg(long, default_value = "commuting")]
    generator: String,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, default_value_t = 1.0)]
    to: f64,
    /// Scheme: `midpoint` or `cf4`.
    #[arg(long, default_value = "cf4")]
    method: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args, Serialize, Deserialize)]
struct OracleArgs {
    /// Channel count: 1 (scalar kink) or 2 (non-commuting endpoints).
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Spectral parameter off [0, inf), e.g. `-1` or `-0.7+0.3i`.
    #[arg(long, default_value = "-1", allow_hyphen_values = true)]
    z: String,
    /// Lattice points.
    #[arg(long = "N", default_value_t = 2000)]
    points: usize,
    /// Half-width of the interval.
    #[arg(long = "L", default_value_t = 40.0)]
    half_width: f64,
    /// Ramp slope of the interpolation profile.
    #[arg(long, default_value_t = 2.0)]
    sharpness: f64,
    /// Lattice-doubling refinement steps for the convergence table.
    #[arg(long, default_value_t = 2)]
    doublings: usize,
}

#[derive(Args, Serialize, Deserialize)]
struct AuditArgs {
    #[arg(long, default_value = "hedgehog")]
    field: String,
    /// JSON file with a user field spec (overrides --field).
    #[arg(long)]
    field_json: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Entry point and dispatch
// ---------------------------------------------------------------------------

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CoreError::NonConvergence(_) => 3,
                _ => 2,
            }
        }
    };
    std::process::exit(code);
}

struct RunContext {
    strict: bool,
    threads: usize,
    reproducible: bool,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    config: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    let threads = resolve_threads(cli.threads, cli.reproducible)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CoreError::InvalidInput(format!("thread pool: {e}")))?;
    let ctx = RunContext {
        strict: cli.strict,
        threads,
        reproducible: cli.reproducible,
        out: cli.out,
        csv: cli.csv,
        config: cli.config,
    };
    match cli.command {
        Command::CliffordInfo(args) => cmd_clifford(args, &ctx),
        Command::HeatTrace(args) => cmd_heat_trace(args, &ctx),
        Command::WittenLimit(args) => cmd_witten_limit(args, &ctx),
        Command::CalliasIndex(args) => cmd_callias(args, &ctx),
        Command::DsWitten(args) => cmd_ds_witten(args, &ctx),
        Command::Evolve(args) => cmd_evolve(args, &ctx),
        Command::Oracle1d(args) => cmd_oracle(args, &ctx),
        Command::Audit(args) => cmd_audit(args, &ctx),
    }
}

fn resolve_threads(flag: Option<usize>, reproducible: bool) -> Result<usize> {
    let from_env = std::env::var("CALLIAS_THREADS")
        .ok()
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| CoreError::InvalidInput(format!("CALLIAS_THREADS={v} is not a count")))
        })
        .transpose()?;
    let threads = flag.or(from_env).unwrap_or(1);
    if threads == 0 {
        return Err(CoreError::InvalidInput("--threads must be at least 1".into()));
    }
    if reproducible && threads != 1 {
        return Err(CoreError::InvalidInput(
            "--reproducible requires the serial mode (--threads 1)".into(),
        ));
    }
    Ok(threads)
}

/// Apply `--config`: a bare config object or a previous envelope.
fn resolve_config<T: Serialize + for<'de> Deserialize<'de>>(
    args: T,
    ctx: &RunContext,
    command: &str,
) -> Result<T> {
    let Some(path) = &ctx.config else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(envelope) = Envelope::from_json(&text) {
        if envelope.manifest.command != command {
            return Err(CoreError::InvalidInput(format!(
                "config envelope was written by '{}', not '{command}'",
                envelope.manifest.command
            )));
        }
        return serde_json::from_value(envelope.manifest.config)
            .map_err(|e| CoreError::InvalidInput(format!("bad config in envelope: {e}")));
    }
    serde_json::from_str(&text)
        .map_err(|e| CoreError::InvalidInput(format!("bad config file {}: {e}", path.display())))
}

fn emit(
    ctx: &RunContext,
    command: &str,
    config: &impl Serialize,
    seed: Option<u64>,
    result: &impl Serialize,
    csv: Option<CsvTable>,
) -> Result<()> {
    let manifest =
        Manifest::new(TOOL_VERSION, command, config, seed, ctx.threads, ctx.reproducible)?;
    let envelope = Envelope::new(manifest, result)?;
    let text = envelope.to_json()?;
    match &ctx.out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CoreError::InvalidInput(format!("cannot write {}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    match (&ctx.csv, csv) {
        (Some(path), Some(table)) => std::fs::write(path, table.render())
            .map_err(|e| CoreError::InvalidInput(format!("cannot write {}: {e}", path.display())))?,
        (Some(_), None) => {
            return Err(CoreError::InvalidInput(format!(
                "'{command}' has no tabular series; drop --csv"
            )));
        }
        _ => {}
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared parsing helpers
// ---------------------------------------------------------------------------

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CoreError::InvalidInput(format!("bad {what} entry '{v}'")))
        })
        .collect()
}

/// `a:b:n` inclusive linear grid.
fn parse_linear_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CoreError::InvalidInput(format!("grid '{text}' is not a:b:n")));
    }
    let a: f64 = parts[0].parse().map_err(|_| bad_grid(text))?;
    let b: f64 = parts[1].parse().map_err(|_| bad_grid(text))?;
    let n: usize = parts[2].parse().map_err(|_| bad_grid(text))?;
    if n < 2 || !(b > a) {
        return Err(bad_grid(text));
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

/// `a:r:n` geometric grid, or a plain comma list.
fn parse_time_grid(text: &str) -> Result<Vec<f64>> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(CoreError::InvalidInput(format!("grid '{text}' is not a:r:n")));
        }
        let a: f64 = parts[0].parse().map_err(|_| bad_grid(text))?;
        let r: f64 = parts[1].parse().map_err(|_| bad_grid(text))?;
        let n: usize = parts[2].parse().map_err(|_| bad_grid(text))?;
        if n < 2 || !(a > 0.0) || !(r > 1.0) {
            return Err(bad_grid(text));
        }
        Ok((0..n).map(|k| a * r.powi(k as i32)).collect())
    } else {
        parse_f64_list(text, "time")
    }
}

fn bad_grid(text: &str) -> CoreError {
    CoreError::InvalidInput(format!("cannot parse grid '{text}'"))
}

/// `-1`, `2.5`, `-0.7+0.3i`, `1i`, `-i`.
fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CoreError::InvalidInput(format!("cannot parse complex number '{text}'"));
    if let Ok(re) = s.parse::<f64>() {
        return Ok(Complex64::new(re, 0.0));
    }
    let body = s.strip_suffix('i').ok_or_else(bad)?;
    // Split at the last sign that is not leading and not an exponent sign.
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let c = bytes[k] as char;
        if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
            split = Some(k);
            break;
        }
    }
    match split {
        Some(k) => {
            let re: f64 = body[..k].parse().map_err(|_| bad())?;
            let im_text = &body[k..];
            let im: f64 = match im_text {
                "+" => 1.0,
                "-" => -1.0,
                _ => im_text.parse().map_err(|_| bad())?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            let im: f64 = match body {
                "" => 1.0,
                "-" => -1.0,
                _ => body.parse().map_err(|_| bad())?,
            };
            Ok(Complex64::new(0.0, im))
        }
    }
}

fn load_named_or_json(name: &str, json: &Option<PathBuf>) -> Result<PotentialField> {
    match json {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CoreError::InvalidInput(format!("cannot read {}: {e}", path.display()))
            })?;
            load_field(&text)
        }
        None => builtins::by_name(name),
    }
}

/// `hedgehog:amp=<v>` with `v` a number or `pi`.
fn parse_profile_spec(spec: &str) -> Result<f64> {
    let bad = || {
        CoreError::InvalidInput(format!(
            "cannot parse profile '{spec}' (expected hedgehog:amp=<value|pi>)"
        ))
    };
    let rest = match spec.strip_prefix("hedgehog") {
        Some("") => return Ok(std::f64::consts::PI),
        Some(rest) => rest,
        None => return Err(bad()),
    };
    let value = rest.strip_prefix(":amp=").ok_or_else(bad)?;
    if value == "pi" {
        return Ok(std::f64::consts::PI);
    }
    value.parse::<f64>().map_err(|_| bad())
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_clifford(args: CliffordArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "clifford-info")?;
    let rep = build_clifford(args.d)?;
    let residuals = rep.residuals();
    let kappa = kappa_minimal(args.d);
    let result = serde_json::json!({
        "d": args.d,
        "rank": rep.r,
        "kappa_re": kappa.re,
        "kappa_im": kappa.im,
        "residuals": residuals,
    });
    emit(ctx, "clifford-info", &args, None, &result, None)
}

fn cmd_heat_trace(args: HeatTraceArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "heat-trace")?;
    let mut field = load_named_or_json(&args.field, &args.field_json)?;
    match (args.cutoff_r0, args.cutoff_width) {
        (Some(r0), Some(width)) => field = apply_cutoff(&field, &CutoffSpec::new(r0, width)?),
        (None, None) => {}
        _ => {
            return Err(CoreError::InvalidInput(
                "--cutoff-r0 and --cutoff-width must be given together".into(),
            ))
        }
    }
    let mut ts = args.ts.clone();
    if let Some(grid) = &args.t_grid {
        ts.extend(parse_linear_grid(grid)?);
    }
    if ts.is_empty() {
        ts.push(1.0);
    }
    let cfg = HeatTraceConfig {
        simplex_degree: args.quad_degree,
        mc_samples: args.mc_samples,
        seed: args.seed,
        sphere_level: args.sphere_level,
        r_max: args.r_max,
        radial_nodes: args.radial_nodes,
        radial_splits: if args.radial_splits.is_empty() {
            Vec::new()
        } else {
            parse_f64_list(&args.radial_splits, "radial split")?
        },
        ..HeatTraceConfig::default()
    };
    let mut points = Vec::with_capacity(ts.len());
    for &t in &ts {
        let result = heat_trace(&field, t, &cfg)?;
        if result.realness_violated() {
            return Err(CoreError::InvariantViolation(format!(
                "heat trace at t = {t} has imaginary residual {:.3e} vs value {:.3e}",
                result.imag_residual, result.value
            )));
        }
        points.push(result);
    }
    let mut table = CsvTable::new(&["t", "value", "imag_residual", "quad_error", "tail_bound"]);
    for p in &points {
        table.push_row(vec![
            fmt_f64(p.t),
            fmt_f64(p.value),
            fmt_f64(p.imag_residual),
            fmt_f64(p.quad_error),
            fmt_f64(p.tail_bound),
        ])?;
    }
    let result = serde_json::json!({ "field": args.field, "points": points });
    emit(ctx, "heat-trace", &args, Some(args.seed), &result, Some(table))
}

fn sphere_limit_of(name: &str, r_big: f64) -> Result<SphereField> {
    match name {
        "hedgehog" | "hedgehog-limit" => builtins::hedgehog_limit(),
        other => Ok(SphereField::from_field_at(&builtins::by_name(other)?, r_big)),
    }
}

fn cmd_witten_limit(args: WittenArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "witten-limit")?;
    let sphere = sphere_limit_of(&args.field, args.r_big)?;
    let mut cfg = WittenConfig::default();
    cfg.heat.sphere_level = args.sphere_level;
    cfg.heat.radial_nodes = args.radial_nodes;
    cfg.plateau_tol = args.plateau_tol;
    cfg.quad_gate = args.quad_gate;
    if let Some(grid) = &args.t_grid {
        cfg.t_grid = parse_time_grid(grid)?;
    }
    let limit = witten_limit(&sphere, &cfg)?;
    if ctx.strict && !limit.converged {
        return Err(CoreError::NonConvergence(format!(
            "no trusted plateau (estimate {:.6}, residual {:.3e})",
            limit.estimate, limit.plateau_residual
        )));
    }
    let mut table = CsvTable::new(&["t", "value", "imag_residual", "quad_error", "tail_bound"]);
    for p in &limit.points {
        table.push_row(vec![
            fmt_f64(p.t),
            fmt_f64(p.value),
            fmt_f64(p.imag_residual),
            fmt_f64(p.quad_error),
            fmt_f64(p.tail_bound),
        ])?;
    }
    emit(ctx, "witten-limit", &args, None, &limit, Some(table))
}

fn cmd_callias(args: CalliasArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "callias-index")?;
    let field = load_named_or_json(&args.field, &args.field_json)?;
    let cfg = SurfaceIndexConfig {
        radii: parse_f64_list(&args.radii, "radius")?,
        sphere_level: args.sphere_level,
        fd_step: args.fd_step,
        gap_tol: args.gap_tol,
        plateau_tol: args.plateau_tol,
    };
    let index = surface_index(&field, &cfg)?;
    for p in &index.points {
        if p.realness_violated() {
            return Err(CoreError::InvariantViolation(format!(
                "surface integral at radius {} has imaginary residual {:.3e}",
                p.radius, p.imag_residual
            )));
        }
    }
    if ctx.strict && !index.converged {
        return Err(CoreError::NonConvergence(format!(
            "radius spread {:.3e} above tolerance {:.3e}",
            index.spread, cfg.plateau_tol
        )));
    }
    let mut table = CsvTable::new(&["radius", "value", "imag_residual", "quad_error", "min_gap"]);
    for p in &index.points {
        table.push_row(vec![
            fmt_f64(p.radius),
            fmt_f64(p.value),
            fmt_f64(p.imag_residual),
            fmt_f64(p.quad_error),
            fmt_f64(p.min_gap),
        ])?;
    }
    emit(ctx, "callias-index", &args, None, &index, Some(table))
}

fn cmd_ds_witten(args: DsWittenArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "ds-witten")?;
    let amp = parse_profile_spec(&args.f_spec)?;
    let spec = ExampleLoopSpec::ramped_hedgehog(amp)?;
    let field = build_example_loop(&spec)?;
    let wcfg = WindingConfig {
        sphere_level: args.sphere_level,
        radial_nodes: args.radial_nodes,
        ..WindingConfig::default()
    };
    let ccfg = ClosedFormConfig {
        exclusion_eps: args.exclusion_eps,
        sphere_level: args.sphere_level,
        radial_nodes: args.radial_nodes,
        ..ClosedFormConfig::default()
    };

    let winding = match args.method {
        DsMethod::Evolution | DsMethod::Both => Some(winding_index(&field, &wcfg)?),
        DsMethod::ClosedForm => None,
    };
    let closed_form = match args.method {
        DsMethod::ClosedForm | DsMethod::Both => Some(example_closed_form(&spec, &ccfg)?),
        DsMethod::Evolution => None,
    };
    if let Some(w) = &winding {
        if w.imag_residual > 1e-8 * w.value.abs() + 1e-10 {
            return Err(CoreError::InvariantViolation(format!(
                "winding integral has imaginary residual {:.3e}",
                w.imag_residual
            )));
        }
        if ctx.strict && w.integer_distance > 1e-2 {
            return Err(CoreError::NonConvergence(format!(
                "winding {:.6} is {:.3e} away from the nearest integer",
                w.value, w.integer_distance
            )));
        }
    }
    let dcfg = DegreeConfig { grid_points: args.grid_points, seed: args.seed, ..Default::default() };
    let degree = su2_degree(&field, &default_regular_value(), &dcfg)?;
    let sign_relation_holds = winding
        .as_ref()
        .map(|w| w.nearest_integer == WINDING_VS_DEGREE * degree.degree);
    let difference = match (&winding, &closed_form) {
        (Some(w), Some(c)) => Some(w.value - c.value),
        _ => None,
    };

    // Density samples along an off-axis diagnostic ray.
    let dir = {
        let v: [f64; 3] = [1.0, 0.3, 0.2];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let mut table =
        CsvTable::new(&["x1", "x2", "x3", "density_re", "density_im", "unitarity_residual"]);
    for k in 0..args.ray_samples {
        let s = wcfg.r_max * (k as f64 + 0.5) / args.ray_samples as f64;
        let x = [s * dir[0], s * dir[1], s * dir[2]];
        let (dens, res) = winding_density(&field, &x)?;
        table.push_row(vec![
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(x[2]),
            fmt_f64(dens.re),
            fmt_f64(dens.im),
            fmt_f64(res),
        ])?;
    }

    let result = serde_json::json!({
        "profile": args.f_spec,
        "amplitude": amp,
        "winding": winding,
        "closed_form": closed_form,
        "difference": difference,
        "degree": degree,
        "winding_vs_degree_sign": WINDING_VS_DEGREE,
        "sign_relation_holds": sign_relation_holds,
    });
    emit(ctx, "ds-witten", &args, Some(args.seed), &result, Some(table))
}

fn cmd_evolve(args: EvolveArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "evolve")?;
    let method = Method::from_str(&args.method)?;
    let opts = EvolveOptions { method, tol: args.tol, ..EvolveOptions::default() };
    if !(args.to > args.from) {
        return Err(CoreError::InvalidInput("--to must exceed --from".into()));
    }

    // Both generators are (sigma . v) phi(y) with a constant vector v, so the
    // exact propagator is exp(i (sigma . v) * integral of phi).
    let phi = Mollifier::standard()?;
    let v: [f64; 3] = if let Some(rest) = args.generator.strip_prefix("slice:") {
        let mut parts = rest.split(':');
        let x = parse_f64_list(parts.next().unwrap_or(""), "slice point")?;
        if x.len() != 3 {
            return Err(CoreError::InvalidInput("slice point needs 3 coordinates".into()));
        }
        let amp = match parts.next() {
            Some("pi") => std::f64::consts::PI,
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| CoreError::InvalidInput(format!("bad amplitude '{s}'")))?,
            None => std::f64::consts::PI,
        };
        let profile = ramped_hedgehog_profile(amp, &CutoffSpec::new(1.0, 1.0)?);
        profile.eval(&x)
    } else {
        let theta = match args.generator.strip_prefix("commuting") {
            Some("") => 1.3,
            Some(rest) => rest
                .strip_prefix(':')
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    CoreError::InvalidInput(format!("bad generator '{}'", args.generator))
                })?,
            None => {
                return Err(CoreError::InvalidInput(format!(
                    "unknown generator '{}' (expected commuting[:theta] or slice:x1,x2,x3[:amp])",
                    args.generator
                )))
            }
        };
        let dir: [f64; 3] = [0.42, -0.68, 0.60];
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        [theta * dir[0] / n, theta * dir[1] / n, theta * dir[2] / n]
    };

    let sigma = callias_core::clifford::pauli();
    let mut b = callias_core::CMatrix::zeros(2, 2);
    for k in 0..3 {
        b += &sigma[k] * Complex64::new(v[k], 0.0);
    }
    let bump = Arc::new(phi);
    let gen = {
        let b = b.clone();
        let bump = bump.clone();
        move |y: f64| &b * Complex64::new(bump.eval(y), 0.0)
    };

    let run = propagate(&gen, args.from, args.to, &opts)?;
    // Cocycle: splitting the interval must reproduce the propagator.
    let mid = 0.5 * (args.from + args.to);
    let left = propagate(&gen, args.from, mid, &opts)?;
    let right = propagate(&gen, mid, args.to, &opts)?;
    let cocycle_residual =
        callias_core::linalg::max_abs(&(&right.propagator * &left.propagator - &run.propagator));
    // Closed form through the commuting structure.
    let mass = {
        let (xs, ws) = callias_core::quadrature::gauss_legendre_on(args.from, args.to, 400)?;
        xs.iter().zip(&ws).map(|(&x, &w)| w * bump.eval(x)).sum::<f64>()
    };
    let exact = callias_core::witten_ds::su2_exp(&[v[0] * mass, v[1] * mass, v[2] * mass]);
    let closed_form_gap = callias_core::linalg::max_abs(&(&run.propagator - exact));
    if closed_form_gap > 1e-8 {
        return Err(CoreError::InvariantViolation(format!(
            "propagator deviates from the commuting closed form by {closed_form_gap:.3e}"
        )));
    }

    let result = serde_json::json!({
        "generator": args.generator,
        "direction_vector": v,
        "method": args.method,
        "steps": run.steps,
        "rejected": run.rejected,
        "error_estimate": run.error_estimate,
        "unitarity_residual": run.unitarity_residual,
        "cocycle_residual": cocycle_residual,
        "closed_form_gap": closed_form_gap,
    });
    emit(ctx, "evolve", &args, None, &result, None)
}

fn cmd_oracle(args: OracleArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "oracle-1d")?;
    let z = parse_complex(&args.z)?;
    let model = match args.m {
        1 => scalar_kink(args.points, args.half_width, args.sharpness)?,
        2 => two_channel_model(args.points, args.half_width, args.sharpness)?,
        other => {
            return Err(CoreError::InvalidInput(format!(
                "--m {other} is not a built-in model (1 or 2)"
            )))
        }
    };
    let comparison = compare_sides(&model, z, args.doublings)?;
    if ctx.strict {
        if let Some(rel) = comparison.relative_gap {
            if rel > 0.02 {
                return Err(CoreError::NonConvergence(format!(
                    "lattice-to-formula gap {rel:.4} exceeds 2%"
                )));
            }
        }
    }
    let mut table = CsvTable::new(&["points", "spacing", "lhs_re", "lhs_im", "gap", "ratio"]);
    for row in &comparison.refinement {
        table.push_row(vec![
            row.points.to_string(),
            fmt_f64(row.spacing),
            fmt_f64(row.lhs_re),
            fmt_f64(row.lhs_im),
            fmt_f64(row.gap),
            row.ratio.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    emit(ctx, "oracle-1d", &args, None, &comparison, Some(table))
}

fn cmd_audit(args: AuditArgs, ctx: &RunContext) -> Result<()> {
    let args = resolve_config(args, ctx, "audit")?;
    let field = load_named_or_json(&args.field, &args.field_json)?;
    let cfg = AuditConfig::default_for(field.d);
    let audit = audit_field(&field, &cfg)?;
    if ctx.strict && !audit.pass {
        return Err(CoreError::NonConvergence(format!(
            "field '{}' fails its decay/invertibility audit",
            audit.field
        )));
    }
    emit(ctx, "audit", &args, None, &audit, None)
}

// ---------------------------------------------------------------------------
