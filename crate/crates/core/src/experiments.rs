//! Command bodies: each builds one CSV table from a configuration.

use rayon::prelude::*;

use crate::channel::{db_to_linear, linear_to_db};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_direct, evaluate_relay, snapshot, LinkMetrics, Mode};
use crate::optimizer::{
    alpha_sweep, high_snr_limit, idle_limit, optimize_direct, optimize_relay, switch_decision, PlanResult,
};
use crate::report::{Cell, Table};
use crate::simulator::{compare, run, SimOptions, SimReport, Validation};

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

const METRIC_COLUMNS: [&str; 19] = [
    "mode",
    "alpha",
    "snr_db",
    "drop_source",
    "drop_relay",
    "qlen_source",
    "qlen_relay",
    "delay_slots",
    "throughput",
    "tx_power_source_w",
    "tx_power_relay_w",
    "tx_power_direct_w",
    "mean_power_w",
    "energy_per_period_j",
    "ee",
    "p_ld",
    "p_l1",
    "p_l2",
    "p0",
];

fn metric_cells(m: &LinkMetrics, slot_s: f64) -> Vec<Cell> {
    vec![
        m.mode.as_str().into(),
        m.alpha.into(),
        linear_to_db(m.snr).into(),
        m.drop_source.into(),
        m.drop_relay.into(),
        m.qlen_source.into(),
        m.qlen_relay.into(),
        m.delay.into(),
        m.throughput.into(),
        m.tx_power_source.into(),
        m.tx_power_relay.into(),
        m.tx_power_direct.into(),
        m.mean_power(slot_s).into(),
        m.energy_per_period.into(),
        m.ee.into(),
        m.p_ld.into(),
        m.p_l1.into(),
        m.p_l2.into(),
        m.p0.into(),
    ]
}

fn with_prefix(prefix: &[&str]) -> Table {
    let cols: Vec<&str> = prefix.iter().chain(METRIC_COLUMNS.iter()).copied().collect();
    Table::new(&cols)
}

/// Relay (at `alpha`) and direct metrics at one SNR.
pub fn analyze(cfg: &Config, snr_db: f64, alpha: f64) -> Result<Table> {
    let model = &cfg.model;
    let snap = snapshot(model, db_to_linear(snr_db))?;
    let relay = evaluate_relay(model, &snap, alpha)?.metrics;
    let direct = evaluate_direct(model, &snap)?.metrics;
    let mut t = with_prefix(&[]);
    for m in [&relay, &direct] {
        t.push(metric_cells(m, model.system.slot_s));
    }
    Ok(t)
}

/// Stationary law of the first-hop chain, one row per `(channel state, buffer level)`.
pub fn chain_dump(cfg: &Config, snr_db: f64, alpha: f64, mode: Mode) -> Result<Table> {
    let model = &cfg.model;
    let snap = snapshot(model, db_to_linear(snr_db))?;
    let (chain, pi) = match mode {
        Mode::Relay => {
            let e = evaluate_relay(model, &snap, alpha)?;
            (e.source.chain, e.source.stationary.pi)
        }
        Mode::Direct => {
            let e = evaluate_direct(model, &snap)?;
            (e.queue.chain, e.queue.stationary.pi)
        }
    };
    let mut t = Table::new(&["chi_index", "buffer", "pi"]);
    for (i, p) in pi.iter().enumerate() {
        let (x, q) = chain.state(i);
        t.push(vec![x.into(), q.into(), (*p).into()]);
    }
    Ok(t)
}

/// Relay-mode metrics over an α grid at one SNR.
pub fn sweep_alpha(cfg: &Config, snr_db: f64, alphas: &[f64]) -> Result<Table> {
    let rows = alpha_sweep(&cfg.model, db_to_linear(snr_db), alphas)?;
    let mut t = with_prefix(&[]);
    for m in &rows {
        t.push(metric_cells(m, cfg.model.system.slot_s));
    }
    Ok(t)
}

/// Both modes over an SNR grid, for each arrival rate and relay α.
pub fn sweep_snr(cfg: &Config, snrs_db: &[f64], alphas: &[f64], lambdas: &[f64]) -> Result<Table> {
    let mut jobs = Vec::new();
    for &lambda in lambdas {
        for &db in snrs_db {
            for &a in alphas {
                jobs.push((lambda, db, Some(a)));
            }
            jobs.push((lambda, db, None));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(lambda, db, alpha)| {
            let model = cfg.model.with_lambda(lambda);
            let snap = snapshot(&model, db_to_linear(db))?;
            let m = match alpha {
                Some(a) => evaluate_relay(&model, &snap, a)?.metrics,
                None => evaluate_direct(&model, &snap)?.metrics,
            };
            Ok((lambda, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = with_prefix(&["lambda"]);
    for (lambda, m) in &rows {
        let mut cells = vec![Cell::from(*lambda)];
        cells.extend(metric_cells(m, cfg.model.system.slot_s));
        t.push(cells);
    }
    Ok(t)
}

/// Both modes over an SNR grid for each buffer capacity.
pub fn sweep_buffer(cfg: &Config, buffers: &[usize], snrs_db: &[f64], alpha: f64) -> Result<Table> {
    let mut jobs = Vec::new();
    for &b in buffers {
        for &db in snrs_db {
            jobs.push((b, db, Mode::Relay));
            jobs.push((b, db, Mode::Direct));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(b, db, mode)| {
            let model = cfg.model.with_buffer(b);
            let snap = snapshot(&model, db_to_linear(db))?;
            let m = match mode {
                Mode::Relay => evaluate_relay(&model, &snap, alpha)?.metrics,
                Mode::Direct => evaluate_direct(&model, &snap)?.metrics,
            };
            Ok((b, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = with_prefix(&["buffer"]);
    for (b, m) in &rows {
        let mut cells = vec![Cell::from(*b)];
        cells.extend(metric_cells(m, cfg.model.system.slot_s));
        t.push(cells);
    }
    Ok(t)
}

/// Outcome of `optimize`: the per-mode summary and the relay α curve.
pub struct Optimized {
    pub summary: Table,
    pub curve: Table,
    pub best: PlanResult,
}

fn thresholds_text(t: &[f64]) -> String {
    t.iter().map(|&x| crate::report::fmt_sig(linear_to_db(x))).collect::<Vec<_>>().join(";")
}

/// Splits infeasibility (with its minimum achievable delay) from real errors.
fn feasible(plan: Result<PlanResult>) -> Result<std::result::Result<PlanResult, f64>> {
    match plan {
        Ok(p) => Ok(Ok(p)),
        Err(Error::Infeasible { min_delay, .. }) => Ok(Err(min_delay)),
        Err(e) => Err(e),
    }
}

/// Energy-efficient operating point of each mode under the configured delay budget.
pub fn optimize(cfg: &Config) -> Result<Optimized> {
    let o = &cfg.optimizer;
    let model = &cfg.model;
    let plans = [
        (Mode::Relay, feasible(optimize_relay(model, &o.alpha_grid, o.delay_budget, &o.search))?),
        (Mode::Direct, feasible(optimize_direct(model, o.delay_budget, &o.search))?),
    ];
    let best = plans
        .iter()
        .filter_map(|(_, p)| p.as_ref().ok().filter(|p| p.feasible))
        .fold(None::<&PlanResult>, |b, p| match b {
            Some(b) if b.ee >= p.ee => Some(b),
            _ => Some(p),
        })
        .cloned();
    let Some(best) = best else {
        let min_delay = plans.iter().filter_map(|(_, p)| p.as_ref().err().copied()).fold(f64::INFINITY, f64::min);
        return Err(Error::Infeasible {
            budget: o.delay_budget.unwrap_or(f64::INFINITY),
            min_delay,
        });
    };
    let mut summary = Table::new(&[
        "mode",
        "feasible",
        "best",
        "alpha_star",
        "snr_star_db",
        "ee",
        "delay_slots",
        "min_delay_slots",
        "thresholds_db",
    ]);
    for (mode, p) in &plans {
        summary.push(match p {
            Ok(p) => vec![
                mode.as_str().into(),
                p.feasible.into(),
                (p.mode == best.mode).into(),
                p.alpha_star.unwrap_or(1.0).into(),
                linear_to_db(p.snr_star).into(),
                p.ee.into(),
                p.delay.into(),
                f64::NAN.into(),
                thresholds_text(&p.thresholds).into(),
            ],
            Err(min_delay) => vec![
                mode.as_str().into(),
                false.into(),
                false.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                (*min_delay).into(),
                thresholds_text(&model.thresholds).into(),
            ],
        });
    }
    let mut curve = Table::new(&["alpha", "snr_db", "ee", "delay_slots"]);
    if let (_, Ok(relay)) = &plans[0] {
        for pt in &relay.alpha_curve {
            curve.push(vec![pt.alpha.into(), linear_to_db(pt.snr).into(), pt.ee.into(), pt.delay.into()]);
        }
    }
    Ok(Optimized { summary, curve, best })
}

/// Delay threshold between the modes plus the limiting-regime comparisons.
pub fn switch_threshold(cfg: &Config, budget: f64, high_snr_db: f64, idle_snr_db: f64) -> Result<Table> {
    let model = &cfg.model;
    let o = &cfg.optimizer;
    let d = switch_decision(model, budget, o.alpha, &o.search)?;
    let high = high_snr_limit(model, o.alpha, db_to_linear(high_snr_db))?;
    let idle = idle_limit(model, o.alpha, db_to_linear(idle_snr_db))?;
    let mut t = Table::new(&["quantity", "value"]);
    let mut kv = |k: &str, v: Cell| t.push(vec![k.into(), v]);
    kv("alpha", o.alpha.into());
    kv("threshold_slots", d.threshold.unwrap_or(f64::NAN).into());
    kv("mode_below", d.below.as_str().into());
    kv("mode_above", d.above.as_str().into());
    kv("budget_slots", d.budget.into());
    kv("chosen", d.chosen.as_str().into());
    kv("ee_direct", d.ee_direct.unwrap_or(f64::NAN).into());
    kv("ee_relay", d.ee_relay.unwrap_or(f64::NAN).into());
    kv("access_inequality_lhs", d.access_inequality_lhs.into());
    kv("access_inequality_rhs", d.access_inequality_rhs.into());
    kv("access_convex_rhs", d.access_convex_rhs.into());
    for (name, l) in [("high_snr", &high), ("idle", &idle)] {
        kv(&format!("{name}_snr_db"), linear_to_db(l.snr).into());
        kv(&format!("{name}_closed_direct"), l.closed_direct.into());
        kv(&format!("{name}_closed_relay"), l.closed_relay.into());
        kv(&format!("{name}_model_direct"), l.model_direct.into());
        kv(&format!("{name}_model_relay"), l.model_relay.into());
        kv(&format!("{name}_idle_share_direct"), l.idle_share_direct.into());
        kv(&format!("{name}_idle_share_relay"), l.idle_share_relay.into());
        kv(&format!("{name}_closed_choice"), l.closed_choice().as_str().into());
        kv(&format!("{name}_model_choice"), l.model_choice().as_str().into());
    }
    Ok(t)
}

const SIM_COLUMNS: [&str; 21] = [
    "mode",
    "alpha",
    "snr_db",
    "seed",
    "slots",
    "arrivals",
    "delivered",
    "dropped_source",
    "dropped_relay",
    "lost_errors",
    "in_system",
    "drop_source",
    "drop_relay",
    "throughput",
    "energy_per_period_j",
    "ee",
    "ee_half_width",
    "delay_slots",
    "availability_ar",
    "availability_rd",
    "availability_ad",
];

fn sim_cells(r: &SimReport) -> Vec<Cell> {
    vec![
        r.mode.as_str().into(),
        r.alpha.into(),
        linear_to_db(r.snr).into(),
        r.seed.into(),
        r.slots.into(),
        r.arrivals.into(),
        r.delivered.into(),
        r.dropped_source.into(),
        r.dropped_relay.into(),
        r.lost_errors.into(),
        r.in_system.into(),
        r.drop_source.into(),
        r.drop_relay.into(),
        r.throughput.into(),
        r.energy_per_period.into(),
        r.ee.into(),
        r.ee_half_width().into(),
        r.delay.into(),
        r.availability[0].into(),
        r.availability[1].into(),
        r.availability[2].into(),
    ]
}

fn sim_options(cfg: &Config, mode: Mode, snr_db: f64, seed: u64) -> SimOptions {
    let s = &cfg.simulate;
    SimOptions {
        mode,
        alpha: s.alpha,
        snr: db_to_linear(snr_db),
        slots: s.slots,
        warmup: s.warmup,
        seed,
        batches: s.batches,
    }
}

/// Seeded runs for each SNR, mode and seed.
pub fn simulate(cfg: &Config, modes: &[Mode]) -> Result<Table> {
    let s = &cfg.simulate;
    let mut jobs = Vec::new();
    for &db in &s.snr_db {
        for &mode in modes {
            for &seed in &s.seeds {
                jobs.push(sim_options(cfg, mode, db, seed));
            }
        }
    }
    let reports = jobs
        .par_iter()
        .map(|o| run(&cfg.model, o, None))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&SIM_COLUMNS);
    for r in &reports {
        t.push(sim_cells(r));
    }
    Ok(t)
}

/// One traced run; returns its report row and the per-slot trace.
pub fn simulate_traced(cfg: &Config, mode: Mode, snr_db: f64, seed: u64) -> Result<(Table, Vec<u8>)> {
    let mut trace = Vec::new();
    let r = run(&cfg.model, &sim_options(cfg, mode, snr_db, seed), Some(&mut trace))?;
    let mut t = Table::new(&SIM_COLUMNS);
    t.push(sim_cells(&r));
    Ok((t, trace))
}

/// Analytic-vs-simulated ledger over the configured SNRs for both modes.
pub fn validate(cfg: &Config) -> Result<(Table, bool)> {
    let s = &cfg.simulate;
    let mut t = Table::new(&[
        "snr_db",
        "mode",
        "metric",
        "analytic",
        "simulated",
        "gap",
        "tolerance",
        "pass",
    ]);
    let mut all = true;
    for &db in &s.snr_db {
        for mode in [Mode::Relay, Mode::Direct] {
            let (_, _, v): (_, _, Validation) =
                compare(&cfg.model, &sim_options(cfg, mode, db, 0), &s.seeds, &s.tolerances)?;
            all &= v.pass();
            for c in &v.checks {
                t.push(vec![
                    db.into(),
                    mode.as_str().into(),
                    c.metric.as_str().into(),
                    c.analytic.into(),
                    c.simulated.into(),
                    c.gap.into(),
                    c.tolerance.into(),
                    c.pass.into(),
                ]);
            }
        }
    }
    Ok((t, all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 30.0, 20);
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[19], 30.0);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn analyze_has_two_rows_and_fixed_header() {
        let t = analyze(&Config::paper_default(), 5.0, 0.5).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.header.len(), METRIC_COLUMNS.len());
        assert_eq!(t.rows[0][0], "relay");
        assert_eq!(t.rows[1][0], "direct");
    }

    #[test]
    fn chain_dump_sums_to_one() {
        let cfg = Config::paper_default();
        let t = chain_dump(&cfg, 5.0, 0.5, Mode::Relay).unwrap();
        assert_eq!(t.rows.len(), 8 * 51);
        let total: f64 = t.rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sweep_buffer_shape() {
        let t = sweep_buffer(&Config::paper_default(), &[5, 10], &[5.0, 10.0], 0.5).unwrap();
        assert_eq!(t.rows.len(), 2 * 2 * 2);
        assert_eq!(t.header[0], "buffer");
    }
}
