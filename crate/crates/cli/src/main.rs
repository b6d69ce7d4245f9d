//! `mhit`: generate chains, analyze them, simulate hitting times and run the
//! verification suites.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use markov_hitting::harness::{self, ReportFormat, Suite, SuiteConfig};
use markov_hitting::spectral::{self, Grid};
use markov_hitting::{geometric, hitting, montecarlo};
use markov_hitting::{Chain, Config, Exec, Family, FamilySpec, SubsetMask};

#[derive(Parser)]
#[command(name = "mhit", version, about = "Relaxation and stationary hitting times of finite Markov chains")]
struct Cli {
    /// Chain JSON file to read.
    #[arg(long, global = true)]
    chain: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest state count for exhaustive subset enumeration.
    #[arg(long, global = true)]
    enum_cap: Option<usize>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a chain from a family and write it as JSON.
    Generate {
        family: String,
        /// Family parameter as `key=value`, repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
    },
    /// Report spectral and hitting quantities of a chain as JSON.
    Analyze {
        /// Emit the profiles at every breakpoint as CSV instead.
        #[arg(long)]
        profiles: bool,
    },
    /// Estimate a hitting time by simulation.
    Simulate {
        /// Starting state.
        #[arg(long, default_value_t = 0)]
        start: usize,
        /// Target set as a hex mask; defaults to the last state.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Step cap per trajectory.
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Run verification suites; exits nonzero when any record fails.
    Verify {
        /// Suite name or `all`.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Monte-Carlo trials per estimate.
        #[arg(long)]
        trials: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.to_string(), v))
}

fn config(cli: &Cli) -> Config {
    let mut cfg = Config::default();
    if let Some(cap) = cli.enum_cap {
        cfg = cfg.with_enum_cap(cap);
    }
    if cli.threads == Some(1) {
        cfg = cfg.with_exec(Exec::Sequential);
    }
    cfg
}

fn load_chain(cli: &Cli) -> Result<Chain> {
    let path = cli.chain.as_ref().context("--chain is required for this command")?;
    Chain::load(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// The value as JSON, or the error message when it cannot be computed.
fn field<T: serde::Serialize>(r: markov_hitting::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn analyze(c: &Chain, cfg: &Config) -> Value {
    let reversible = c.is_reversible();
    let mut out = json!({
        "n": c.n(),
        "reversible": reversible,
        "laziness": c.laziness(),
        "pi": c.pi(),
        "t_h_pi": field(hitting::t_h_pi(c, cfg).map(|h| json!({ "value": h.value, "argmax": h.argmax.hex() }))),
        "rel_geom": field(geometric::rel_geom(c, (-1.0_f64).exp())),
        "pseudo_gap": field(geometric::pseudo_gap(c, None)),
    });
    if reversible {
        out["t_rel"] = field(spectral::relaxation_time(c));
        out["half_profile"] = field(spectral::spectral_profile(c, &Grid::Points(vec![0.5]), cfg).map(|p| p.values[0]));
    }
    out
}

fn profiles_csv(c: &Chain, cfg: &Config) -> Result<String> {
    let lam = spectral::spectral_profile(c, &Grid::Auto, cfg)?;
    let grid = Grid::Points(lam.breakpoints.clone());
    let hat = spectral::spectral_profile_hat(c, &grid, cfg)?;
    let kappa = hitting::kappa_profile(c, &grid, cfg)?;
    let phi = spectral::isoperimetric_profile(c, &grid, cfg)?;
    let mut s = String::from("delta,spectral,spectral_hat,kappa,isoperimetric\n");
    for i in 0..lam.breakpoints.len() {
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            lam.breakpoints[i], lam.values[i], hat.values[i], kappa.values[i], phi.values[i]
        ));
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        markov_hitting::exec::set_threads(t);
    }
    let cfg = config(cli);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Generate { family, params } => {
            let family: Family = family.parse()?;
            let mut spec = FamilySpec::new(family, cli.seed.unwrap_or(0));
            for (k, v) in params {
                spec = spec.with(k, *v);
            }
            let chain = spec.build()?;
            write_out(out, &(chain.to_json()? + "\n"))?;
        }
        Command::Analyze { profiles } => {
            let c = load_chain(cli)?;
            let text = if *profiles {
                profiles_csv(&c, &cfg)?
            } else {
                serde_json::to_string_pretty(&analyze(&c, &cfg))? + "\n"
            };
            write_out(out, &text)?;
        }
        Command::Simulate { start, target, trials, cap } => {
            let c = load_chain(cli)?;
            if *start >= c.n() {
                bail!("start state {start} is outside 0..{}", c.n());
            }
            let target = match target {
                Some(hex) => SubsetMask::from_hex(&c, hex)?,
                None => SubsetMask::singleton(&c, c.n() - 1),
            };
            let mut law = vec![0.0; c.n()];
            law[*start] = 1.0;
            let analytic = hitting::expected_hitting(&c, &target).ok().map(|h| h.expectations[*start]);
            let cap = cap.unwrap_or_else(|| montecarlo::default_cap(&c, analytic));
            let est = montecarlo::simulate_hitting(&c, &law, &target, *trials, cli.seed.unwrap_or(0), cap, cfg.exec)?;
            let v = json!({ "estimate": est, "analytic": analytic });
            write_out(out, &(serde_json::to_string_pretty(&v)? + "\n"))?;
        }
        Command::Verify { suite, format, trials } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            };
            // Several reports go to one file each inside the --out directory.
            if let (Some(dir), true) = (out, suites.len() > 1) {
                fs::create_dir_all(dir)?;
            }
            let mut all_pass = true;
            for s in &suites {
                let mut sc = SuiteConfig::default_for(*s);
                sc.cfg = Config { exec: cfg.exec, enum_cap: cfg.enum_cap, ..sc.cfg };
                if let Some(seed) = cli.seed {
                    sc.seed = seed;
                }
                if let Some(t) = trials {
                    sc.trials = *t;
                }
                let report = harness::run_suite(*s, &sc)?;
                eprintln!("{}: {} records, {} failed", report.suite, report.summary.total, report.summary.failed);
                for r in report.failures().take(10) {
                    eprintln!("  {} lhs={:e} rhs={:e}", r.id, r.lhs, r.rhs);
                }
                all_pass &= report.all_pass();
                match out {
                    Some(dir) if suites.len() > 1 => {
                        let ext = if format == ReportFormat::Json { "json" } else { "csv" };
                        harness::report_emit(&report, format, dir.join(format!("{}.{ext}", s.name())))?;
                    }
                    Some(path) => harness::report_emit(&report, format, path)?,
                    None if format == ReportFormat::Json => write_out(None, &harness::report_json(&report))?,
                    None => harness::report_csv(&report, std::io::stdout().lock())?,
                }
            }
            return Ok(all_pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
