//! Command-line front end. `run` returns the process exit code:
//! 0 all checks passed, 1 a suite failed or the run aborted, 2 usage error.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::DomainGrid;
use crate::io;
use crate::lie::Algebra;
use crate::report::{Check, RunReport, SuiteReport, Timings};
use crate::span::decompose_gauge_element;
use crate::study;
use crate::suites::{self, Mode};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const THREADS_ENV: &str = "COULOMB_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "coulomb-lab", version, about = "Numerical checks for Coulomb-gauge connections on a slab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the suites at the smallest configured resolution.
    Verify(Common),
    /// Run the convergence studies over all configured resolutions.
    Converge(Common),
    /// Small-loop holonomy against the curvature.
    Holonomy(Common),
    /// Decompose a gauge element and write a span certificate.
    Decompose(DecomposeArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Restrict to a suite; repeatable.
    #[arg(long = "suite", value_name = "NAME")]
    suites: Vec<String>,
    /// Debug: negate the mean curvature of the boundary faces.
    #[arg(long)]
    flip_tau: bool,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    common: Common,
    /// Field file to decompose (default: a built-in low-mode example).
    #[arg(long, value_name = "PATH", conflicts_with = "reload")]
    input: Option<PathBuf>,
    /// Reload and re-verify an existing certificate instead.
    #[arg(long, value_name = "CERT")]
    reload: Option<PathBuf>,
}

enum Outcome {
    Passed,
    Failed(Vec<String>),
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let res = match pool {
        Some(p) => p.install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    };
    match res {
        Ok(Outcome::Passed) => EXIT_PASS,
        Ok(Outcome::Failed(ids)) => {
            for id in ids {
                eprintln!("FAILED {id}");
            }
            EXIT_FAIL
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

fn thread_pool() -> std::result::Result<Option<rayon::ThreadPool>, String> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(None) };
    let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map(Some).map_err(|e| e.to_string())
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if !c.suites.is_empty() {
        cfg.suites = c.suites.clone();
    }
    cfg.debug.flip_tau |= c.flip_tau;
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn finish(report: &RunReport, timings: &Timings, out: Option<&Path>) -> Result<Outcome> {
    for s in &report.suites {
        let state = if s.skipped {
            "SKIP"
        } else if s.passed {
            "PASS"
        } else {
            "FAIL"
        };
        println!("{state} {}", s.name);
    }
    if let Some(dir) = out {
        report.write(dir)?;
        timings.write(dir)?;
    }
    Ok(if report.passed { Outcome::Passed } else { Outcome::Failed(report.failures()) })
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Verify(c) => suites_command("verify", &c, Mode::Verify),
        Command::Converge(c) => {
            let cfg = load_config(&c)?;
            if cfg.resolutions.len() < 2 {
                return Err(Error::Config("converge needs at least two resolutions".into()));
            }
            suites_command("converge", &c, Mode::Converge)
        }
        Command::Holonomy(c) => holonomy_command(&c),
        Command::Decompose(d) => decompose_command(&d),
    }
}

fn suites_command(name: &str, c: &Common, mode: Mode) -> Result<Outcome> {
    let cfg = load_config(c)?;
    let t = Instant::now();
    let (reports, times) = suites::run_suites(&cfg, mode);
    let mut report = RunReport::new(name, &cfg);
    for r in reports {
        report.add(r);
    }
    let timings = Timings { total_seconds: t.elapsed().as_secs_f64(), suites: times };
    finish(&report, &timings, cfg.out.as_deref())
}

fn holonomy_command(c: &Common) -> Result<Outcome> {
    let mut cfg = load_config(c)?;
    cfg.suites = vec!["cor-holonomy".into()];
    let t = Instant::now();
    let ctx = suites::Context::new(&cfg);
    let rep = suites::run_suite("cor-holonomy", &ctx, Mode::Verify);
    let mut report = RunReport::new("holonomy", &cfg);
    let mut timings = Timings { total_seconds: 0.0, suites: Default::default() };
    report.add(rep);
    timings.total_seconds = t.elapsed().as_secs_f64();
    timings.suites.insert("cor-holonomy".into(), timings.total_seconds);
    finish(&report, &timings, cfg.out.as_deref())
}

fn decompose_command(d: &DecomposeArgs) -> Result<Outcome> {
    let cfg = load_config(&d.common)?;
    let t = Instant::now();
    let mut report = RunReport::new("decompose", &cfg);
    let mut rep = SuiteReport::new("decompose");
    let file = match &d.reload {
        Some(p) => io::load_certificate(p)?,
        None => {
            let field = match &d.input {
                Some(p) => io::load_field(p)?,
                None => {
                    let (nl, nn) = cfg.resolutions()[0];
                    let g = DomainGrid::build(cfg.metric.spec(), nl, nn)?;
                    study::low_mode_field(&g, &Algebra::su2(), 0, &mut study::rng(cfg.seed, 900))?
                }
            };
            let dec = decompose_gauge_element(&field)?;
            rep.solver.solves += dec.boundary_layer.solves.len();
            let bytes = io::certificate_to_bytes(&dec)?;
            if let Some(dir) = &cfg.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("certificate.bin"), &bytes)?;
            }
            io::certificate_from_bytes(&bytes)?
        }
    };
    let v = file.reverify()?;
    let m = &file.manifest;
    let tol = &cfg.tolerances;
    rep.push(Check::info("decompose/t0-residual".into(), m.t0_residual));
    rep.push(Check::info("decompose/kernel-residual".into(), m.kernel_residual));
    rep.push(Check::info("decompose/total-residual".into(), m.total_residual));
    rep.push(Check::at_most("decompose/divergence".into(), v.divergence, tol.divergence));
    rep.push(Check::at_least("decompose/reverify-exact".into(), v.exact as u8 as f64, 1.0));
    report.details.insert("manifest".into(), serde_json::to_value(m).map_err(|e| Error::Io(std::io::Error::other(e)))?);
    report.details.insert("reverification".into(), serde_json::to_value(&v).map_err(|e| Error::Io(std::io::Error::other(e)))?);
    report.add(rep);
    let timings = Timings { total_seconds: t.elapsed().as_secs_f64(), suites: Default::default() };
    finish(&report, &timings, cfg.out.as_deref())
}
