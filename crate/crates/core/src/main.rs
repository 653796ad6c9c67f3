#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use relayee::config::Config;
use relayee::experiments as exp;
use relayee::metrics::Mode;
use relayee::optimizer::BoundaryPolicy;
use relayee::report::Table;
use relayee::{Error, Result};

/// Delay, drop and energy-efficiency analysis of buffer-aided relaying with
/// opportunistic spectrum access.
#[derive(Debug, Parser)]
#[command(name = "relayee", version)]
struct Cli {
    /// Scenario file; the built-in reference scenario when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination (`-` for stdout).
    #[arg(short, long, global = true, default_value = "-")]
    output: PathBuf,
    /// Override the AMC boundary rule.
    #[arg(long, global = true)]
    boundaries: Option<Boundaries>,
    /// Log progress and the effective configuration to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Boundaries {
    Msre,
    Eep,
    Explicit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Relay,
    Direct,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Both modes' metrics at one operating point.
    Analyze {
        #[arg(long, default_value_t = 5.0)]
        snr_db: f64,
        #[arg(long)]
        alpha: Option<f64>,
        /// Also write the first-hop stationary distribution here.
        #[arg(long)]
        dump_chain: Option<PathBuf>,
        /// Mode whose chain `--dump-chain` writes.
        #[arg(long, value_enum, default_value_t = ModeArg::Relay)]
        dump_mode: ModeArg,
    },
    /// Relay-mode metrics against the time allocation ratio.
    SweepAlpha {
        #[arg(long, default_value_t = 5.0)]
        snr_db: f64,
        #[arg(long, value_parser = parse_grid)]
        alpha_grid: Option<Grid>,
    },
    /// Both modes against the average SNR.
    SweepSnr {
        #[command(flatten)]
        range: SnrRange,
        /// Relay α values (comma list or start:stop:step).
        #[arg(long, value_parser = parse_grid)]
        alphas: Option<Grid>,
        /// Arrival rates (comma list or start:stop:step).
        #[arg(long, value_parser = parse_grid)]
        lambdas: Option<Grid>,
    },
    /// Both modes against the SNR for several buffer sizes.
    SweepBuffer {
        #[command(flatten)]
        range: SnrRange,
        #[arg(long, value_delimiter = ',', default_value = "5,10,25,50")]
        buffers: Vec<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Energy-efficient SNR and α of each mode under a delay budget.
    Optimize {
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_parser = parse_grid)]
        alpha_grid: Option<Grid>,
        /// Also write the relay EE-vs-α curve here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Delay threshold between relay and direct transmission.
    SwitchThreshold {
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        alpha: Option<f64>,
        /// SNR of the transmit-power-dominated comparison (default: --snr-max-db).
        #[arg(long)]
        high_snr_db: Option<f64>,
        /// SNR of the idle-power-dominated comparison.
        #[arg(long, default_value_t = 0.0)]
        idle_snr_db: f64,
    },
    /// Monte-Carlo runs at the configured SNRs and seeds.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        /// Per-slot trace of a single run (one mode, SNR and seed).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Analysis against simulation; exits 1 if any check fails.
    Validate {
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
struct SnrRange {
    #[arg(long)]
    snr_min_db: Option<f64>,
    #[arg(long)]
    snr_max_db: Option<f64>,
    #[arg(long, default_value_t = 20)]
    points: usize,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Delay budget in slots.
    #[arg(long)]
    delay_budget: Option<f64>,
    #[arg(long)]
    snr_min_db: Option<f64>,
    #[arg(long)]
    snr_max_db: Option<f64>,
    /// Relative tolerance of the SNR searches.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

/// `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    let v = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h) = (num(start)?, num(stop)?, num(step)?);
            if !(h > 0.0) || b < a {
                return Err("need start <= stop and a positive step".into());
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n).map(|i| a + h * i as f64).collect()
        }
        [_] => s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?,
        _ => return Err("expected a comma list or start:stop:step".into()),
    };
    if v.is_empty() {
        return Err("empty grid".into());
    }
    Ok(Grid(v))
}

fn modes(m: ModeArg) -> Vec<Mode> {
    match m {
        ModeArg::Relay => vec![Mode::Relay],
        ModeArg::Direct => vec![Mode::Direct],
        ModeArg::Both => vec![Mode::Relay, Mode::Direct],
    }
}

fn apply_search(cfg: &mut Config, s: &SearchArgs) {
    let o = &mut cfg.optimizer;
    if s.delay_budget.is_some() {
        o.delay_budget = s.delay_budget;
    }
    o.search.snr_min_db = s.snr_min_db.unwrap_or(o.search.snr_min_db);
    o.search.snr_max_db = s.snr_max_db.unwrap_or(o.search.snr_max_db);
    o.search.tol = s.tol.unwrap_or(o.search.tol);
}

fn apply_sim(cfg: &mut Config, s: &SimArgs) {
    let c = &mut cfg.simulate;
    if let Some(v) = &s.snr_db {
        c.snr_db = v.clone();
    }
    if let Some(v) = &s.seeds {
        c.seeds = v.clone();
    }
    c.slots = s.slots.unwrap_or(c.slots);
    c.warmup = s.warmup.unwrap_or(c.warmup);
    c.alpha = s.alpha.unwrap_or(c.alpha);
}

fn snr_grid(cfg: &Config, r: &SnrRange) -> Vec<f64> {
    let lo = r.snr_min_db.unwrap_or(cfg.optimizer.search.snr_min_db);
    let hi = r.snr_max_db.unwrap_or(cfg.optimizer.search.snr_max_db);
    exp::linspace(lo, hi, r.points)
}

fn save(t: &Table, path: &Path) -> Result<()> {
    match t.save(path) {
        // a closed stdout (e.g. piped into `head`) is not an error
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn write_bytes(bytes: &[u8], path: &Path) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn set_threads() -> Result<()> {
    let Ok(v) = std::env::var("RELAYEE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config {
            key: "RELAYEE_THREADS".into(),
            reason: format!("`{v}` is not a positive integer"),
        })?;
    // a second initialization only happens in tests; keep the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the command; `Ok(false)` means it completed but its checks failed.
fn run(cli: Cli) -> Result<bool> {
    set_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::paper_default(),
    };
    if let Some(b) = cli.boundaries {
        cfg.boundaries = match b {
            Boundaries::Msre => BoundaryPolicy::Msre,
            Boundaries::Eep => BoundaryPolicy::Eep,
            Boundaries::Explicit => BoundaryPolicy::Explicit,
        };
    }
    match &cli.command {
        Command::Optimize { search, alpha_grid, .. } => {
            apply_search(&mut cfg, search);
            if let Some(g) = alpha_grid {
                cfg.optimizer.alpha_grid = g.0.clone();
            }
        }
        Command::SwitchThreshold { search, alpha, .. } => {
            apply_search(&mut cfg, search);
            cfg.optimizer.alpha = alpha.unwrap_or(cfg.optimizer.alpha);
        }
        Command::Simulate { sim, .. } | Command::Validate { sim } => apply_sim(&mut cfg, sim),
        _ => {}
    }
    cfg.validate()?;
    cfg.resolve()?;
    info!("effective configuration:\n{}", cfg.to_toml());
    let out = cli.output.as_path();
    match cli.command {
        Command::Analyze {
            snr_db,
            alpha,
            dump_chain,
            dump_mode,
        } => {
            let alpha = alpha.unwrap_or(cfg.optimizer.alpha);
            save(&exp::analyze(&cfg, snr_db, alpha)?, out)?;
            if let Some(path) = dump_chain {
                let mode = match dump_mode {
                    ModeArg::Direct => Mode::Direct,
                    _ => Mode::Relay,
                };
                save(&exp::chain_dump(&cfg, snr_db, alpha, mode)?, &path)?;
            }
        }
        Command::SweepAlpha { snr_db, alpha_grid } => {
            let grid = alpha_grid.map_or_else(|| cfg.optimizer.alpha_grid.clone(), |g| g.0);
            save(&exp::sweep_alpha(&cfg, snr_db, &grid)?, out)?;
        }
        Command::SweepSnr { range, alphas, lambdas } => {
            let alphas = alphas.map_or_else(|| vec![cfg.optimizer.alpha], |g| g.0);
            let lambdas = lambdas.map_or_else(|| vec![cfg.model.traffic.mean_rate], |g| g.0);
            save(&exp::sweep_snr(&cfg, &snr_grid(&cfg, &range), &alphas, &lambdas)?, out)?;
        }
        Command::SweepBuffer { range, buffers, alpha } => {
            let alpha = alpha.unwrap_or(cfg.optimizer.alpha);
            save(&exp::sweep_buffer(&cfg, &buffers, &snr_grid(&cfg, &range), alpha)?, out)?;
        }
        Command::Optimize { curve, .. } => {
            let r = exp::optimize(&cfg)?;
            save(&r.summary, out)?;
            if let Some(path) = curve {
                save(&r.curve, &path)?;
            }
        }
        Command::SwitchThreshold {
            high_snr_db,
            idle_snr_db,
            ..
        } => {
            let budget = cfg.optimizer.delay_budget.ok_or_else(|| Error::Config {
                key: "optimizer.delay_budget".into(),
                reason: "switch-threshold needs a delay budget (--delay-budget)".into(),
            })?;
            let high = high_snr_db.unwrap_or(cfg.optimizer.search.snr_max_db);
            save(&exp::switch_threshold(&cfg, budget, high, idle_snr_db)?, out)?;
        }
        Command::Simulate { mode, trace, .. } => match trace {
            Some(path) => {
                let s = &cfg.simulate;
                let (m, db, seed) = match (modes(mode).as_slice(), s.snr_db.as_slice(), s.seeds.as_slice()) {
                    ([m], [db], [seed]) => (*m, *db, *seed),
                    _ => {
                        return Err(Error::Config {
                            key: "--trace".into(),
                            reason: "needs a single --mode, --snr-db and --seeds value".into(),
                        })
                    }
                };
                let (t, bytes) = exp::simulate_traced(&cfg, m, db, seed)?;
                save(&t, out)?;
                write_bytes(&bytes, &path)?;
            }
            None => save(&exp::simulate(&cfg, &modes(mode))?, out)?,
        },
        Command::Validate { .. } => {
            let (t, pass) = exp::validate(&cfg)?;
            save(&t, out)?;
            return Ok(pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("relayee: some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("relayee: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
