//! Scenario files, command dispatch and CSV reports for the `bestm` binary.
//!
//! Scenario files are JSON objects whose field names carry their units.
//! Everything except `cells` and the user placement has a default:
//!
//! ```json
//! {
//!   "cells": [{"tier": "macro", "position_m": [0, 0], "tx_power_dbm": 43}],
//!   "users": [{"position_m": [120, 40]}],
//!   "noise_psd_dbm_per_hz": -170, "bandwidth_hz": 5e6, "num_rb": 16,
//!   "shadowing_sigma_db": 8, "macro_radius_m": 500, "pico_radius_m": 100,
//!   "seed": 0, "interferer_keep_threshold": 0.01, "target_cell": 0
//! }
//! ```
//!
//! `users` may be replaced by `"random_users_per_drop": K`, in which case the
//! simulator places fresh users every drop and the analytic commands use one
//! placement drawn from `seed`.
//!
//! Every command writes CSV with a fixed header and numbers printed to 12
//! significant digits. Exit codes: 0 success, 2 invalid input or a failed
//! `validate` check, 1 runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{feedback_success_probability, normalizing_constants, sum_rate_asymptotic, user_rate_asymptotic};
use crate::channel::{self, drop_users, fixed_user_links, Cell, LinkProfile, ProfileKind, Scenario, Tier, UserLink, UserPlacement};
use crate::error::{Error, Result};
use crate::exact_rate::{g_k_evaluated, g_k_quadrature, sum_rate_exact, GRoute};
use crate::feedback::{xi2_convolution, xi2_recursion, BestMPoly};
use crate::planner::plan_feedback;
use crate::simulator::{simulate, simulate_profiles, Policy, RateReport, SimConfig};

/// Environment variable consulted for the seed when `--seed` is absent.
pub const SEED_ENV: &str = "BESTM_SEED";

pub const RATE_EXACT_HEADER: [&str; 8] =
    ["m", "user", "serving_cell", "kind", "num_interferers", "rho0_db", "user_rate", "sum_rate"];
pub const RATE_ASYMPTOTIC_HEADER: [&str; 8] = ["m", "user", "serving_cell", "kind", "a", "b", "user_rate", "sum_rate"];
pub const SIMULATE_HEADER: [&str; 13] = [
    "policy",
    "m",
    "num_drops",
    "slots_per_drop",
    "user",
    "user_rate",
    "user_rate_stderr",
    "sum_rate",
    "sum_rate_stderr",
    "fairness_theta",
    "fairness_theta_stderr",
    "outage_fraction",
    "outage_fraction_stderr",
];
pub const PLAN_HEADER: [&str; 8] = [
    "eta",
    "num_users",
    "num_rb",
    "m_exact",
    "m_asymptotic",
    "ratio_at_m",
    "total_feedback_exact",
    "evaluations",
];
pub const VALIDATE_HEADER: [&str; 7] = ["check", "case", "value", "reference", "error", "tolerance", "status"];

const DEFAULT_DROPS: usize = 10;
const DEFAULT_SLOTS: usize = 1000;
const DEFAULT_ETA: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Closed-form per-user and sum rates.
    RateExact,
    /// Extreme-value approximation of the same rates.
    RateAsymptotic,
    /// Monte Carlo rates, fairness and outage.
    Simulate,
    /// Smallest M reaching a fraction eta of the full-feedback rate.
    PlanFeedback,
    /// Cross-checks the closed forms against their oracles.
    Validate,
}

impl Command {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Command::RateExact => &RATE_EXACT_HEADER,
            Command::RateAsymptotic => &RATE_ASYMPTOTIC_HEADER,
            Command::Simulate => &SIMULATE_HEADER,
            Command::PlanFeedback => &PLAN_HEADER,
            Command::Validate => &VALIDATE_HEADER,
        }
    }
}

/// Command-line values that replace scenario or default settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub m: Option<u32>,
    pub eta: Option<f64>,
    pub drops: Option<usize>,
    pub slots: Option<usize>,
    pub policy: Option<Policy>,
    /// Simulator worker threads; results do not depend on it.
    pub threads: Option<usize>,
}

/// Everything needed to reproduce one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub scenario_path: PathBuf,
    pub output_path: Option<PathBuf>,
    pub overrides: Overrides,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: Command, scenario_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            scenario_path: scenario_path.into(),
            output_path: None,
            overrides: Overrides::default(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.overrides;
        if o.m == Some(0) {
            return Err(Error::Config("--M must be at least 1".into()));
        }
        if let Some(eta) = o.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Config(format!("--eta must lie in (0, 1], got {eta}")));
            }
        }
        if o.drops == Some(0) || o.slots == Some(0) {
            return Err(Error::Config("--drops and --slots must be at least 1".into()));
        }
        if let Some(out) = &self.output_path {
            let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(Error::Config(format!("output directory {} does not exist", parent.display())));
            }
        }
        Ok(())
    }

    /// Seed precedence: `--seed`, then `BESTM_SEED`, then the scenario file.
    pub fn resolve_seed(&self, scenario_seed: u64) -> Result<u64> {
        if let Some(s) = self.overrides.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer"))),
            Err(_) => Ok(scenario_seed),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CellFile {
    tier: Tier,
    position_m: [f64; 2],
    tx_power_dbm: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    cells: Option<Vec<CellFile>>,
    users: Option<Vec<UserPlacement>>,
    random_users_per_drop: Option<usize>,
    noise_psd_dbm_per_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    num_rb: Option<u32>,
    shadowing_sigma_db: Option<f64>,
    macro_radius_m: Option<f64>,
    pico_radius_m: Option<f64>,
    seed: Option<u64>,
    interferer_keep_threshold: Option<f64>,
    target_cell: Option<usize>,
}

/// Parses scenario JSON text, fills defaults and validates.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let f: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut missing = Vec::new();
    if f.cells.is_none() {
        missing.push("cells");
    }
    if f.users.is_none() && f.random_users_per_drop.is_none() {
        missing.push("users (or random_users_per_drop)");
    }
    if !missing.is_empty() {
        return Err(Error::Scenario(format!("missing required field(s): {}", missing.join(", "))));
    }
    let cells = f
        .cells
        .unwrap_or_default()
        .into_iter()
        .map(|c| Cell {
            tier: c.tier,
            position_m: c.position_m,
            tx_power_dbm: c.tx_power_dbm.unwrap_or(match c.tier {
                Tier::Macro => channel::DEFAULT_MACRO_POWER_DBM,
                Tier::Pico => channel::DEFAULT_PICO_POWER_DBM,
            }),
        })
        .collect();
    let mut s = Scenario::new(cells, f.users.unwrap_or_default());
    s.random_users_per_drop = f.random_users_per_drop;
    macro_rules! take {
        ($($field:ident),*) => { $(if let Some(v) = f.$field { s.$field = v; })* };
    }
    take!(
        noise_psd_dbm_per_hz,
        bandwidth_hz,
        num_rb,
        shadowing_sigma_db,
        macro_radius_m,
        pico_radius_m,
        seed,
        interferer_keep_threshold,
        target_cell
    );
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Links the analytic commands work on: the listed users, or one placement
/// drawn from the scenario seed when users are dropped at random.
pub fn analysis_links(scn: &Scenario) -> Result<Vec<UserLink>> {
    match scn.random_users_per_drop {
        Some(k0) => drop_users(scn, k0, &mut ChaCha8Rng::seed_from_u64(scn.seed)),
        None => fixed_user_links(scn),
    }
}

/// Formats with 12 significant digits, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        trim_zeros(format!("{:.*}", (11 - exp).max(0) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn kind_str(k: ProfileKind) -> &'static str {
    match k {
        ProfileKind::General => "general",
        ProfileKind::InterferenceLimited => "interference_limited",
        ProfileKind::NoiseLimited => "noise_limited",
    }
}

/// Exit code for an error: 2 for bad input, 1 for runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Scenario(_) | Error::Parse(_) | Error::Precondition(_) | Error::Range(_) => 2,
        _ => 1,
    }
}

struct Ctx {
    scn: Scenario,
    m: u32,
}

fn context(manifest: &RunManifest) -> Result<Ctx> {
    manifest.validate()?;
    let mut scn = load_scenario(&manifest.scenario_path)?;
    scn.seed = manifest.resolve_seed(scn.seed)?;
    let m = manifest.overrides.m.unwrap_or(scn.num_rb);
    if m > scn.num_rb {
        return Err(Error::Config(format!("--M {m} exceeds num_rb = {}", scn.num_rb)));
    }
    Ok(Ctx { scn, m })
}

fn sim_config(manifest: &RunManifest, ctx: &Ctx, policy: Policy, m: u32) -> SimConfig {
    let o = &manifest.overrides;
    SimConfig {
        num_drops: o.drops.unwrap_or(DEFAULT_DROPS),
        slots_per_drop: o.slots.unwrap_or(DEFAULT_SLOTS),
        policy,
        m,
        master_seed: ctx.scn.seed,
        threads_hint: o.threads.unwrap_or(0),
    }
}

/// Runs the command and writes its CSV to `out`. Returns whether every
/// check passed (always true for commands without checks).
pub fn execute(manifest: &RunManifest, out: &mut dyn Write) -> Result<bool> {
    let ctx = context(manifest)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(manifest.command.header())?;
    let ok = match manifest.command {
        Command::RateExact => rate_exact(&ctx, &mut w)?,
        Command::RateAsymptotic => rate_asymptotic(&ctx, &mut w)?,
        Command::Simulate => run_simulate(manifest, &ctx, &mut w)?,
        Command::PlanFeedback => plan(manifest, &ctx, &mut w)?,
        Command::Validate => validate(manifest, &ctx, &mut w)?,
    };
    w.flush()?;
    Ok(ok)
}

type CsvOut<'a> = csv::Writer<&'a mut dyn Write>;

fn profiles_of(links: &[UserLink]) -> Vec<LinkProfile> {
    links.iter().map(|l| l.profile.clone()).collect()
}

fn rate_exact(ctx: &Ctx, w: &mut CsvOut) -> Result<bool> {
    let links = analysis_links(&ctx.scn)?;
    let rates = sum_rate_exact(&profiles_of(&links), ctx.scn.num_rb, ctx.m)?;
    for (i, (l, r)) in links.iter().zip(&rates.per_user).enumerate() {
        w.write_record([
            ctx.m.to_string(),
            i.to_string(),
            l.serving_cell.to_string(),
            kind_str(l.profile.kind()).into(),
            l.profile.num_interferers().to_string(),
            fmt_num(10.0 * l.profile.rho0().log10()),
            fmt_num(*r),
            fmt_num(rates.sum_rate),
        ])?;
    }
    Ok(true)
}

fn rate_asymptotic(ctx: &Ctx, w: &mut CsvOut) -> Result<bool> {
    let links = analysis_links(&ctx.scn)?;
    let profiles = profiles_of(&links);
    let (n, k0) = (ctx.scn.num_rb, links.len() as u32);
    let sum = sum_rate_asymptotic(&profiles, n, ctx.m)?;
    for (i, l) in links.iter().enumerate() {
        let c = normalizing_constants(&l.profile, k0 as f64, n, ctx.m)?;
        w.write_record([
            ctx.m.to_string(),
            i.to_string(),
            l.serving_cell.to_string(),
            kind_str(l.profile.kind()).into(),
            fmt_num(c.a),
            fmt_num(c.b),
            fmt_num(user_rate_asymptotic(&l.profile, k0, n, ctx.m)?),
            fmt_num(sum),
        ])?;
    }
    Ok(true)
}

fn run_simulate(manifest: &RunManifest, ctx: &Ctx, w: &mut CsvOut) -> Result<bool> {
    let policy = manifest.overrides.policy.unwrap_or(Policy::Cdf);
    let rep = simulate(&ctx.scn, &sim_config(manifest, ctx, policy, ctx.m))?;
    write_report(&rep, w)?;
    Ok(true)
}

fn write_report(rep: &RateReport, w: &mut CsvOut) -> Result<()> {
    for (i, (r, se)) in rep.per_user_rate.iter().zip(&rep.per_user_rate_stderr).enumerate() {
        w.write_record([
            rep.policy.as_str().into(),
            rep.m.to_string(),
            rep.num_drops.to_string(),
            rep.slots_per_drop.to_string(),
            i.to_string(),
            fmt_num(*r),
            fmt_num(*se),
            fmt_num(rep.sum_rate),
            fmt_num(rep.sum_rate_stderr),
            opt_num(rep.fairness_theta),
            opt_num(rep.fairness_theta_stderr),
            fmt_num(rep.outage_fraction),
            fmt_num(rep.outage_fraction_stderr),
        ])?;
    }
    Ok(())
}

fn plan(manifest: &RunManifest, ctx: &Ctx, w: &mut CsvOut) -> Result<bool> {
    let eta = manifest.overrides.eta.unwrap_or(DEFAULT_ETA);
    let profiles = profiles_of(&analysis_links(&ctx.scn)?);
    let r = plan_feedback(&profiles, ctx.scn.num_rb, eta)?;
    let opt_int = |v: Option<u32>| v.map(|m| m.to_string()).unwrap_or_default();
    w.write_record([
        fmt_num(eta),
        profiles.len().to_string(),
        ctx.scn.num_rb.to_string(),
        opt_int(r.m_exact),
        opt_int(r.m_asymptotic),
        fmt_num(r.ratio_at_m),
        opt_int(r.m_exact.map(|m| m * profiles.len() as u32)),
        r.evaluations.to_string(),
    ])?;
    Ok(true)
}

struct Check {
    check: &'static str,
    case: String,
    value: f64,
    reference: f64,
    error: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

const G_EPS: [u32; 4] = [1, 4, 16, 64];
const G_TOL: f64 = 1e-8;
const MC_SIGMAS: f64 = 4.0;

fn closed_form_checks(links: &[UserLink], out: &mut Vec<Check>) -> Result<()> {
    let mut cases = vec![
        ("noise_limited".to_string(), LinkProfile::noise_limited(10.0)?),
        ("interference_limited".to_string(), LinkProfile::interference_limited(10.0, 1.0)?),
        ("general".to_string(), LinkProfile::from_scales(10.0, vec![2.0, 0.5])?),
    ];
    cases.extend(links.iter().take(3).enumerate().map(|(i, l)| (format!("user{i}"), l.profile.clone())));
    for (name, p) in &cases {
        for &eps in &G_EPS {
            let g = g_k_evaluated(p, eps)?;
            if g.route == GRoute::Quadrature {
                continue;
            }
            let q = g_k_quadrature(p, eps)?;
            out.push(Check {
                check: "closed_vs_quadrature",
                case: format!("{name} eps={eps}"),
                value: g.value,
                reference: q,
                error: ((g.value - q) / q).abs(),
                tolerance: G_TOL,
            });
        }
    }
    Ok(())
}

fn xi2_checks(n: u32, out: &mut Vec<Check>) -> Result<()> {
    for m in 1..=n.min(8) {
        let poly = BestMPoly::get(n, m)?;
        for tau0 in 1..=6 {
            let rec = xi2_recursion(poly.xi1_exact(), tau0)?;
            let conv = xi2_convolution(poly.xi1_exact(), tau0);
            let mismatches = rec.iter().zip(&conv).filter(|(a, b)| a != b).count() + rec.len().abs_diff(conv.len());
            out.push(Check {
                check: "xi2_recursion_vs_convolution",
                case: format!("N={n} M={m} tau0={tau0}"),
                value: rec.len() as f64,
                reference: conv.len() as f64,
                error: mismatches as f64,
                tolerance: 0.0,
            });
        }
    }
    Ok(())
}

fn monte_carlo_checks(manifest: &RunManifest, ctx: &Ctx, links: &[UserLink], out: &mut Vec<Check>) -> Result<()> {
    let n = ctx.scn.num_rb;
    let m = manifest.overrides.m.unwrap_or(n.min(4));
    let profiles = profiles_of(links);
    let cfg = sim_config(manifest, ctx, Policy::Cdf, m);
    let rep = simulate_profiles(&profiles, n, &cfg)?;
    let exact = sum_rate_exact(&profiles, n, m)?.sum_rate;
    out.push(Check {
        check: "monte_carlo_vs_exact",
        case: format!("sum_rate M={m} K0={}", profiles.len()),
        value: rep.sum_rate,
        reference: exact,
        error: (rep.sum_rate - exact).abs(),
        tolerance: MC_SIGMAS * rep.sum_rate_stderr,
    });
    let k0 = profiles.len() as u32;
    let p_out = 1.0 - feedback_success_probability(k0, n, m);
    let blocks = (n as usize * cfg.num_drops * cfg.slots_per_drop) as f64;
    let binomial = (p_out * (1.0 - p_out) / blocks).sqrt();
    out.push(Check {
        check: "monte_carlo_vs_exact",
        case: format!("outage M={m} K0={k0}"),
        value: rep.outage_fraction,
        reference: p_out,
        error: (rep.outage_fraction - p_out).abs(),
        tolerance: MC_SIGMAS * rep.outage_fraction_stderr.max(binomial),
    });
    Ok(())
}

fn validate(manifest: &RunManifest, ctx: &Ctx, w: &mut CsvOut) -> Result<bool> {
    let links = analysis_links(&ctx.scn)?;
    let mut checks = Vec::new();
    closed_form_checks(&links, &mut checks)?;
    xi2_checks(ctx.scn.num_rb, &mut checks)?;
    monte_carlo_checks(manifest, ctx, &links, &mut checks)?;
    for c in &checks {
        w.write_record([
            c.check.to_string(),
            c.case.clone(),
            fmt_num(c.value),
            fmt_num(c.reference),
            fmt_num(c.error),
            fmt_num(c.tolerance),
            if c.passed() { "PASS" } else { "FAIL" }.to_string(),
        ])?;
    }
    Ok(checks.iter().all(Check::passed))
}

/// Runs a manifest, writing CSV to `output_path` (plus a `.manifest.json`
/// beside it) or to stdout, and returns the process exit code.
pub fn run(manifest: &RunManifest) -> i32 {
    match run_inner(manifest) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: one or more checks failed");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run_inner(manifest: &RunManifest) -> Result<bool> {
    match &manifest.output_path {
        None => execute(manifest, &mut std::io::stdout().lock()),
        Some(path) => {
            let mut buf = Vec::new();
            let ok = execute(manifest, &mut buf)?;
            std::fs::write(path, buf)?;
            let mut side = path.clone().into_os_string();
            side.push(".manifest.json");
            let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse(e.to_string()))?;
            std::fs::write(side, json + "\n")?;
            Ok(ok)
        }
    }
}

/// Command-line interface of the `bestm` binary.
#[derive(Debug, Parser)]
#[command(name = "bestm", version, about = "Best-M feedback scheduling: exact, asymptotic and simulated rates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// CSV output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Best-M feedback size (default N; `validate` uses min(4, N)).
    #[arg(long = "M", global = true, value_name = "INT")]
    pub m: Option<u32>,
    /// Target fraction of the full-feedback rate for `plan-feedback`.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub eta: Option<f64>,
    #[arg(long, global = true, value_name = "INT")]
    pub drops: Option<usize>,
    #[arg(long, global = true, value_name = "INT")]
    pub slots: Option<usize>,
    /// cdf, greedy or round_robin.
    #[arg(long, global = true)]
    pub policy: Option<Policy>,
    /// Overrides BESTM_SEED and the scenario seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Simulator threads (0 = all cores).
    #[arg(long, global = true, value_name = "INT")]
    pub threads: Option<usize>,
}

impl Cli {
    pub fn into_manifest(self) -> Result<RunManifest> {
        let scenario = self.scenario.ok_or_else(|| Error::Config("--scenario PATH is required".into()))?;
        let mut m = RunManifest::new(self.command, scenario);
        m.output_path = self.out;
        m.overrides = Overrides {
            seed: self.seed,
            m: self.m,
            eta: self.eta,
            drops: self.drops,
            slots: self.slots,
            policy: self.policy,
            threads: self.threads,
        };
        Ok(m)
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.into_manifest() {
        Ok(m) => run(&m),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
