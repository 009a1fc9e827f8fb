//! Command-line surface: config ingestion, residual suites, matrix export.
//!
//! Exit codes: 0 every check passed, 1 a check failed, 2 usage or config
//! error.

mod report;
mod schema;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use report::{digest, Check, RunReport};
use rw_core::config::ProblemConfig;
use rw_core::connection::{connection_matrix, flatness_residual};
use rw_core::identities::{run_suite, REL_TOL};
use rw_core::integrator::verify_ode;
use rw_core::Cx;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "rw", about = "Two-dimensional Riemann-Wirtinger integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Base seed; defaults to RW_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn get(&self) -> u64 {
        self.seed
            .or_else(|| std::env::var("RW_SEED").ok()?.parse().ok())
            .unwrap_or(0)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration against the model assumptions.
    Validate { config: PathBuf },
    /// Run the function-identity suite at random sample points.
    Identities {
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        /// Sample points per identity.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Pass threshold on the relative residual.
        #[arg(long, default_value_t = REL_TOL)]
        tol: f64,
    },
    /// Export one connection matrix A_{kp}.
    Connection {
        config: PathBuf,
        /// Derivative direction as k,p.
        #[arg(long)]
        deriv: String,
        /// Write the JSON export here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV rendering here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check flatness of the connection for derivative pairs.
    Flatness {
        config: PathBuf,
        /// "all" or a semicolon list like "1,1:2,1;1,1:1,2".
        #[arg(long, default_value = "all")]
        pairs: String,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// Pass threshold on the flatness defect.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Integrate over a product cycle and check dF = A F.
    VerifyOde {
        config: PathBuf,
        /// Cycle spec JSON (two Pochhammer loops).
        cycle: PathBuf,
        /// Derivative directions as k,p; repeatable.
        #[arg(long, default_values_t = ["1,1".to_string(), "2,1".to_string()])]
        deriv: Vec<String>,
        /// Central-difference step in t_{kp}.
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
        /// Pass threshold on the relative residual.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

fn parse_deriv(s: &str) -> Result<(usize, usize)> {
    let (k, p) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("bad direction {s:?}: want k,p"))?;
    Ok((k.trim().parse()?, p.trim().parse()?))
}

fn check_deriv(cfg: &ProblemConfig, (k, p): (usize, usize)) -> Result<()> {
    let n = match k {
        1 => cfg.n1(),
        2 => cfg.n2(),
        _ => bail!("direction k must be 1 or 2, got {k}"),
    };
    if !(1..=n).contains(&p) {
        bail!("direction p={p} out of range 1..={n} for k={k}");
    }
    Ok(())
}

fn load_valid(path: &PathBuf) -> Result<ProblemConfig> {
    let cfg = schema::load_config(path)?;
    let violations = cfg.validate();
    if !violations.is_empty() {
        bail!(
            "invalid config:\n{}",
            violations
                .iter()
                .map(|v| format!("  {v}"))
                .collect::<Vec<_>>()
                .join("\n")
        );
    }
    Ok(cfg)
}

fn cx_pair(z: Cx) -> [f64; 2] {
    [z.re, z.im]
}

fn csv_cell(z: Cx) -> String {
    format!("{:.16e}{:+.16e}i", z.re, z.im)
}

fn cmd_validate(config: &PathBuf) -> Result<i32> {
    let cfg = schema::load_config(config)?;
    let violations = cfg.validate();
    if violations.is_empty() {
        println!("ok: n1={} n2={} dim={}", cfg.n1(), cfg.n2(), cfg.dim());
        Ok(0)
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Ok(1)
    }
}

fn cmd_identities(config: &PathBuf, seed: u64, samples: usize, tol: f64) -> Result<i32> {
    let start = Instant::now();
    let cfg = load_valid(config)?;
    let mut rep = RunReport::new("identities", digest(config)?, seed);
    let results = run_suite(&cfg, seed, samples).map_err(|e| anyhow!("{e}"))?;
    for r in results {
        rep.push(Check::new(r.id, r.max_residual, tol));
    }
    rep.wall_time_s = start.elapsed().as_secs_f64();
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(if rep.pass { 0 } else { 1 })
}

fn cmd_connection(
    config: &PathBuf,
    deriv: &str,
    out: Option<&PathBuf>,
    csv: Option<&PathBuf>,
) -> Result<i32> {
    let cfg = load_valid(config)?;
    let (k, p) = parse_deriv(deriv)?;
    check_deriv(&cfg, (k, p))?;
    let a = connection_matrix(&cfg, k, p).map_err(|e| anyhow!("{e}"))?;
    let legend: Vec<String> = cfg.index_set().iter().map(|i| i.to_string()).collect();
    let matrix: Vec<Vec<[f64; 2]>> = (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|c| cx_pair(a[(r, c)])).collect())
        .collect();
    let doc = serde_json::json!({
        "deriv": [k, p],
        "legend": legend,
        "matrix": matrix,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    if let Some(path) = csv {
        let rows: Vec<String> = (0..a.nrows())
            .map(|r| {
                (0..a.ncols())
                    .map(|c| csv_cell(a[(r, c)]))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        std::fs::write(path, rows.join("\n") + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn all_pairs(cfg: &ProblemConfig) -> Vec<((usize, usize), (usize, usize))> {
    let mut dirs = Vec::new();
    for p in 1..=cfg.n1() {
        dirs.push((1, p));
    }
    for q in 1..=cfg.n2() {
        dirs.push((2, q));
    }
    let mut out = Vec::new();
    for a in 0..dirs.len() {
        for b in (a + 1)..dirs.len() {
            out.push((dirs[a], dirs[b]));
        }
    }
    out
}

fn cmd_flatness(config: &PathBuf, pairs: &str, h: f64, tol: f64) -> Result<i32> {
    let start = Instant::now();
    let cfg = load_valid(config)?;
    let list = if pairs == "all" {
        all_pairs(&cfg)
    } else {
        pairs
            .split(';')
            .map(|item| {
                let (a, b) = item
                    .split_once(':')
                    .ok_or_else(|| anyhow!("bad pair {item:?}: want k,p:k,q"))?;
                Ok((parse_deriv(a)?, parse_deriv(b)?))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let mut rep = RunReport::new("flatness", digest(config)?, 0);
    for (a, b) in list {
        check_deriv(&cfg, a)?;
        check_deriv(&cfg, b)?;
        let r = flatness_residual(&cfg, a, b, h).map_err(|e| anyhow!("{e}"))?;
        rep.push(Check::new(
            format!("flatness {},{}:{},{}", a.0, a.1, b.0, b.1),
            r,
            tol,
        ));
    }
    rep.wall_time_s = start.elapsed().as_secs_f64();
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(if rep.pass { 0 } else { 1 })
}

fn cmd_verify_ode(
    config: &PathBuf,
    cycle: &PathBuf,
    deriv: &[String],
    h: f64,
    tol: f64,
) -> Result<i32> {
    let start = Instant::now();
    let cfg = load_valid(config)?;
    let spec = schema::load_cycle(cycle)?;
    // Fail on bad geometry before spending time integrating.
    spec.build(&cfg)
        .and_then(|c| c.validate())
        .map_err(|e| anyhow!("{e}"))?;
    let mut rep = RunReport::new("verify-ode", digest(config)?, 0);
    for d in deriv {
        let (k, p) = parse_deriv(d)?;
        check_deriv(&cfg, (k, p))?;
        let build = |c: &ProblemConfig| spec.build(c);
        let r = verify_ode(&cfg, k, p, &build, h).map_err(|e| anyhow!("{e}"))?;
        rep.push(Check::new(format!("ode {k},{p}"), r, tol));
    }
    rep.wall_time_s = start.elapsed().as_secs_f64();
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(if rep.pass { 0 } else { 1 })
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Identities {
            config,
            seed,
            samples,
            tol,
        } => cmd_identities(config, seed.get(), *samples, *tol),
        Command::Connection {
            config,
            deriv,
            out,
            csv,
        } => cmd_connection(config, deriv, out.as_ref(), csv.as_ref()),
        Command::Flatness {
            config,
            pairs,
            h,
            tol,
        } => cmd_flatness(config, pairs, *h, *tol),
        Command::VerifyOde {
            config,
            cycle,
            deriv,
            h,
            tol,
        } => cmd_verify_ode(config, cycle, deriv, *h, *tol),
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
