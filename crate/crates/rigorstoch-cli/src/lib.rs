//! Subcommand dispatch and reproducible artifact emission for the
//! rigorstoch library: path sampling, chain propagation, SDE solving, and
//! the invariant check suites. Identical configuration always produces
//! byte-identical output files.

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use rigorstoch::error::ErrorKind;
use rigorstoch::exactnum::{parse_rational, pow2, rat_to_string, Rational};
use rigorstoch::expr::parse_expr;
use rigorstoch::ito::{
    ito_isometry_check, martingale_l2_bound, submartingale_bound, DiscreteProcess, StepProcess,
    StepValue,
};
use rigorstoch::markov::{propagate, Kernel};
use rigorstoch::sde::{picard_solve, SdeProblem, SolveOpts};
use rigorstoch::space::CantorPoint;
use rigorstoch::stats::BandCheck;
use rigorstoch::valuation::{Atom, WeightedBoxValuation};
use rigorstoch::wiener::{reflection_check, sample_wiener, SampleMode};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "rigorstoch", version, about = "validated stochastic computation")]
pub struct Cli {
    /// Worker threads for ensemble loops (0 = library default).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample certified Wiener paths and write one CSV per seed.
    Wiener(WienerArgs),
    /// Propagate a finite Markov chain from a kernel file.
    Markov(MarkovArgs),
    /// Solve an SDE problem file by certified Picard iteration.
    Sde(SdeArgs),
    /// Run the statistical invariant suites and write a report.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct WienerArgs {
    #[arg(long, default_value_t = 8)]
    pub level: u32,
    #[arg(long, default_value_t = 16)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub seed0: u64,
    #[arg(long, default_value = "stratified")]
    pub mode: String,
    #[arg(long)]
    pub grid_level: Option<u32>,
    /// Quantile tolerance as a rational, e.g. 1/65536.
    #[arg(long, default_value = "1/65536")]
    pub tol: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MarkovArgs {
    /// Kernel definition file (JSON or TOML).
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SdeArgs {
    /// Problem file (TOML or JSON).
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub seed0: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// One of: isometry, reflection, martingale, all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 1024)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub seed0: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(rigorstoch::Error),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<rigorstoch::Error> for CliError {
    fn from(e: rigorstoch::Error) -> Self {
        CliError::Numeric(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(e) => match e.kind() {
                ErrorKind::Resource => 4,
                _ => 3,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m.clone()),
            CliError::Io(e) => ("config", e.to_string()),
            CliError::Numeric(e) => (
                match e.kind() {
                    ErrorKind::Resource => "resource",
                    ErrorKind::Unsupported => "unsupported",
                    ErrorKind::Contract => "contract",
                },
                e.to_string(),
            ),
        };
        serde_json::json!({ "error": msg, "kind": kind }).to_string()
    }
}

/// FNV-1a over the canonical config rendering: the reproducibility stamp.
fn config_hash(canonical: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canonical.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'a str,
    config_hash: String,
    config: serde_json::Value,
    bit_allocation: &'a str,
}

fn write_sidecar(dir: &Path, name: &str, config: serde_json::Value) -> Result<(), CliError> {
    let canonical = config.to_string();
    let sidecar = Sidecar {
        version: VERSION,
        config_hash: config_hash(&canonical),
        config,
        bit_allocation:
            "wiener: copy 0 of the seed point, coefficient channels by Cantor pairing \
             (stratum=0, linear=1, wavelet (n,k)=2+2^n-1+k); trajectory steps: copies 2^i(2j+1)-1",
    };
    let body = serde_json::to_string_pretty(&sidecar).expect("serializable");
    std::fs::write(dir.join(name), body + "\n")?;
    Ok(())
}

fn fmt_f64(x: f64) -> String {
    // shortest round-trip rendering: deterministic across runs
    format!("{x}")
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        // ignore failures: the pool may already be initialized in-process
        let _ = rayon_pool(cli.threads);
    }
    match &cli.command {
        Command::Wiener(a) => run_wiener(a),
        Command::Markov(a) => run_markov(a),
        Command::Sde(a) => run_sde(a),
        Command::Check(a) => run_check(a),
    }
}

fn rayon_pool(threads: usize) -> Result<(), String> {
    rigorstoch::build_thread_pool(threads)
}

fn run_wiener(a: &WienerArgs) -> Result<(), CliError> {
    let mode = match a.mode.as_str() {
        "stratified" => SampleMode::Stratified,
        "statistical" => SampleMode::Statistical,
        other => return Err(CliError::Config(format!("unknown mode `{other}`"))),
    };
    let tol = parse_rational(&a.tol)
        .ok_or_else(|| CliError::Config(format!("bad tolerance `{}`", a.tol)))?;
    let grid = a.grid_level.unwrap_or(a.level);
    std::fs::create_dir_all(&a.out)?;
    for i in 0..a.seeds {
        let seed = a.seed0 + i;
        let omega = CantorPoint::from_seed(seed);
        let sample = sample_wiener(&omega, a.level, mode, &tol)?;
        let path = sample.path(grid);
        let mut csv = String::from("t,lower,upper,uniform_slack\n");
        let scale = (1u64 << grid) as f64;
        for (j, v) in path.values.iter().enumerate() {
            writeln!(
                csv,
                "{},{},{},{}",
                fmt_f64(j as f64 / scale),
                fmt_f64(v.lo),
                fmt_f64(v.hi),
                fmt_f64(path.uniform_slack)
            )
            .unwrap();
        }
        std::fs::write(a.out.join(format!("path_{seed}.csv")), csv)?;
        write_sidecar(
            &a.out,
            &format!("path_{seed}.json"),
            serde_json::json!({
                "subcommand": "wiener",
                "seed": seed,
                "level": a.level,
                "grid_level": grid,
                "mode": a.mode,
                "tol": a.tol,
                "stratum": path.stratum,
                "flagged": path.flagged,
            }),
        )?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct ChainFile {
    /// State points, one vector of rationals per state.
    states: Vec<Vec<String>>,
    /// Row-stochastic transition matrix.
    matrix: Vec<Vec<String>>,
    /// Index of the initial state.
    initial: usize,
}

fn parse_chain(path: &Path) -> Result<(Kernel, WeightedBoxValuation, usize), CliError> {
    let text = std::fs::read_to_string(path)?;
    let parsed: ChainFile = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    let dim = parsed
        .states
        .first()
        .map(|s| s.len())
        .ok_or_else(|| CliError::Config("chain file has no states".into()))?;
    let mut states = Vec::new();
    for s in &parsed.states {
        if s.len() != dim {
            return Err(CliError::Config("inconsistent state dimensions".into()));
        }
        let coords: Option<Vec<Rational>> = s.iter().map(|x| parse_rational(x)).collect();
        states.push(coords.ok_or_else(|| CliError::Config("bad state coordinate".into()))?);
    }
    let mut rows = Vec::new();
    for r in &parsed.matrix {
        let w: Option<Vec<Rational>> = r.iter().map(|x| parse_rational(x)).collect();
        let w = w.ok_or_else(|| CliError::Config("bad matrix entry".into()))?;
        if w.len() != states.len() {
            return Err(CliError::Config("matrix row length mismatch".into()));
        }
        rows.push(w);
    }
    if rows.len() != states.len() {
        return Err(CliError::Config("matrix must be square".into()));
    }
    if parsed.initial >= states.len() {
        return Err(CliError::Config("initial state out of range".into()));
    }
    let mu0 = WeightedBoxValuation::new(
        dim,
        vec![(
            Atom::Point(states[parsed.initial].clone()),
            Rational::from_integer(1.into()),
        )],
    );
    Ok((Kernel::from_matrix(states, rows), mu0, parsed.initial))
}

fn run_markov(a: &MarkovArgs) -> Result<(), CliError> {
    let (kernel, mu0, initial) = parse_chain(&a.chain)?;
    let (mus, gamma) = propagate(&kernel, std::sync::Arc::new(mu0), a.steps)?;
    std::fs::create_dir_all(&a.out)?;
    let mut csv = String::from("step,atom_lower,atom_upper,weight\n");
    for (step, mu) in mus.iter().enumerate() {
        let w = mu
            .as_weighted()
            .ok_or_else(|| CliError::Config("chain produced a non-atomic distribution".into()))?;
        let mut rows: Vec<(String, String, String)> = w
            .atoms()
            .iter()
            .map(|(atom, weight)| {
                let (lo, hi) = match atom {
                    Atom::Point(p) => (rat_to_string(&p[0]), rat_to_string(&p[0])),
                    Atom::Cell(b) => (rat_to_string(b.side(0).0), rat_to_string(b.side(0).1)),
                };
                (lo, hi, rat_to_string(weight))
            })
            .collect();
        rows.sort();
        for (lo, hi, weight) in rows {
            writeln!(csv, "{step},{lo},{hi},{weight}").unwrap();
        }
    }
    std::fs::write(a.out.join("chain.csv"), csv)?;
    // marginal consistency stamp: the last marginal of the joint trajectory
    // must agree with the final propagated distribution
    let last_marginal = gamma.marginal(a.steps)?;
    let consistent = last_marginal
        .as_weighted()
        .zip(mus.last().and_then(|m| m.as_weighted()))
        .map(|(a, b)| {
            let mut xs: Vec<String> = a.atoms().iter().map(|t| format!("{t:?}")).collect();
            let mut ys: Vec<String> = b.atoms().iter().map(|t| format!("{t:?}")).collect();
            xs.sort();
            ys.sort();
            xs == ys
        })
        .unwrap_or(false);
    write_sidecar(
        &a.out,
        "chain.json",
        serde_json::json!({
            "subcommand": "markov",
            "chain_file": a.chain.display().to_string(),
            "steps": a.steps,
            "initial": initial,
            "marginal_consistent": consistent,
        }),
    )?;
    Ok(())
}

#[derive(Deserialize)]
struct ProblemFile {
    drift: String,
    diffusion: String,
    #[serde(rename = "K")]
    k: String,
    #[serde(rename = "L")]
    l: String,
    x0: String,
    horizon: String,
    tol: Option<String>,
    seeds: Option<u64>,
    seed0: Option<u64>,
    bounding_box: Option<[String; 2]>,
}

fn parse_problem(path: &Path) -> Result<(SdeProblem, Rational, u64, u64), CliError> {
    let text = std::fs::read_to_string(path)?;
    let parsed: ProblemFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    let rat_field = |s: &str, what: &str| {
        parse_rational(s).ok_or_else(|| CliError::Config(format!("bad {what} `{s}`")))
    };
    let drift = parse_expr(&parsed.drift)
        .map_err(|e| CliError::Config(format!("drift: {e}")))?;
    let diffusion = parse_expr(&parsed.diffusion)
        .map_err(|e| CliError::Config(format!("diffusion: {e}")))?;
    let bounding_box = match &parsed.bounding_box {
        None => None,
        Some([lo, hi]) => Some((rat_field(lo, "box bound")?, rat_field(hi, "box bound")?)),
    };
    let problem = SdeProblem {
        drift,
        diffusion,
        lip_drift: rat_field(&parsed.k, "K")?,
        lip_diffusion: rat_field(&parsed.l, "L")?,
        x0: rat_field(&parsed.x0, "x0")?,
        horizon: rat_field(&parsed.horizon, "horizon")?,
        bounding_box,
    };
    let tol = match &parsed.tol {
        Some(t) => rat_field(t, "tol")?,
        None => pow2(-6),
    };
    Ok((problem, tol, parsed.seeds.unwrap_or(256), parsed.seed0.unwrap_or(1)))
}

fn run_sde(a: &SdeArgs) -> Result<(), CliError> {
    let (problem, file_tol, file_seeds, file_seed0) = parse_problem(&a.problem)?;
    let tol = match &a.tol {
        Some(t) => parse_rational(t).ok_or_else(|| CliError::Config(format!("bad tol `{t}`")))?,
        None => file_tol,
    };
    let seeds = a.seeds.unwrap_or(file_seeds);
    let seed0 = a.seed0.unwrap_or(file_seed0);
    let opts = SolveOpts::default();
    let sol = picard_solve(&problem, &tol, seed0..seed0 + seeds, &opts)?;
    std::fs::create_dir_all(&a.out)?;

    let mut endpoints = String::from("seed,lower,upper,flagged,box_breach\n");
    for r in &sol.results {
        writeln!(
            endpoints,
            "{},{},{},{},{}",
            r.seed,
            fmt_f64(r.endpoint.lo),
            fmt_f64(r.endpoint.hi),
            r.flagged,
            r.box_breach
        )
        .unwrap();
    }
    std::fs::write(a.out.join("endpoints.csv"), endpoints)?;
    let scale = (1u64 << sol.grid_level) as f64;
    for r in sol.results.iter().filter(|r| r.path.is_some()) {
        let mut csv = String::from("t,lower,upper\n");
        for (j, v) in r.path.as_ref().unwrap().iter().enumerate() {
            writeln!(
                csv,
                "{},{},{}",
                fmt_f64(j as f64 / scale),
                fmt_f64(v.lo),
                fmt_f64(v.hi)
            )
            .unwrap();
        }
        std::fs::write(a.out.join(format!("sde_path_{}.csv", r.seed)), csv)?;
    }
    let cert =
        serde_json::to_string_pretty(&sol.certificate).expect("serializable certificate");
    std::fs::write(a.out.join("certificate.json"), cert + "\n")?;
    write_sidecar(
        &a.out,
        "sde_run.json",
        serde_json::json!({
            "subcommand": "sde",
            "problem_file": a.problem.display().to_string(),
            "tol": rat_to_string(&tol),
            "seeds": seeds,
            "seed0": seed0,
            "level": opts.level,
            "grid_level": opts.grid_level,
        }),
    )?;
    Ok(())
}

fn run_check(a: &CheckArgs) -> Result<(), CliError> {
    let run_iso = a.suite == "all" || a.suite == "isometry";
    let run_refl = a.suite == "all" || a.suite == "reflection";
    let run_mart = a.suite == "all" || a.suite == "martingale";
    if !(run_iso || run_refl || run_mart) {
        return Err(CliError::Config(format!("unknown suite `{}`", a.suite)));
    }
    let mut checks: Vec<BandCheck> = Vec::new();
    let tol = pow2(-16);

    if run_iso {
        let x = StepProcess::new(
            vec![
                Rational::from_integer(0.into()),
                Rational::new(1.into(), 2.into()),
                Rational::from_integer(1.into()),
            ],
            vec![
                StepValue::constant(Rational::from_integer(0.into())),
                StepValue::constant(Rational::from_integer(1.into())),
            ],
        )?;
        let rep = ito_isometry_check(&x, a.seed0..a.seed0 + a.seeds, 8, 8, &tol)?;
        checks.push(BandCheck::new(
            "isometry: E(int I[t>=1/2] dW)^2 vs 1/2",
            rep.mc_lhs,
            rep.exact_rhs,
            3.0 * rep.sigma,
        ));
    }

    if run_refl {
        let mut paths = Vec::new();
        for i in 0..a.seeds {
            let omega = CantorPoint::from_seed(a.seed0 + i);
            paths.push(sample_wiener(&omega, 10, SampleMode::Stratified, &tol)?.path(10));
        }
        let one = Rational::from_integer(1.into());
        let rep = reflection_check(&paths, &one);
        // target 2(1 - Phi(1)) from the validated CDF
        let phi1 = rigorstoch::fint::gauss_cdf(&rigorstoch::fint::FInterval::point(1.0));
        let target = 2.0 * (1.0 - phi1.mid());
        let band = 3.0 * rigorstoch::stats::binomial_sigma(target, a.seeds as usize);
        checks.push(BandCheck::new(
            "reflection: Pr(M(1) >= 1)",
            rep.p_max_ge,
            target,
            band + 0.01,
        ));
        checks.push(BandCheck::new(
            "reflection: 2 Pr(W(1) > 1)",
            rep.p_twice_end_gt,
            target,
            2.0 * band,
        ));
        checks.push(BandCheck::new(
            "reflection: indeterminate fraction",
            rep.indeterminate_frac,
            0.0,
            0.02,
        ));
    }

    if run_mart {
        let sub = submartingale_bound(
            &DiscreteProcess::abs_walk(8),
            &Rational::from_integer(2.into()),
        );
        checks.push(BandCheck::new(
            "submartingale: lambda Pr <= E X_n (exact)",
            if sub.holds { 1.0 } else { 0.0 },
            1.0,
            0.0,
        ));
        let (l2, _) = martingale_l2_bound(&DiscreteProcess::walk(8));
        checks.push(BandCheck::new(
            "martingale L2: E max^2 <= 4 E X_n^2 (exact)",
            if l2.holds { 1.0 } else { 0.0 },
            1.0,
            0.0,
        ));
    }

    std::fs::create_dir_all(&a.out)?;
    let report = serde_json::to_string_pretty(&checks).expect("serializable");
    std::fs::write(a.out.join("checks.json"), report + "\n")?;
    write_sidecar(
        &a.out,
        "checks_run.json",
        serde_json::json!({
            "subcommand": "check",
            "suite": a.suite,
            "seeds": a.seeds,
            "seed0": a.seed0,
        }),
    )?;
    if checks.iter().all(|c| c.verdict) {
        Ok(())
    } else {
        Err(CliError::Numeric(rigorstoch::Error::BoundsBreach {
            what: "a statistical check fell outside its band".into(),
        }))
    }
}

/// Drops fractional noise in horizon-derived indices deterministically.
pub fn grid_index(t: &Rational, grid_level: u32) -> Option<usize> {
    let scaled = t.clone() * pow2(grid_level as i64);
    scaled.to_integer().to_usize()
}
