//! Golden-section SNR search inside an α grid, delay-constrained optimization,
//! direct/relay switching and EEP boundary search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, linear_to_db};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_relay, relay_metrics, direct_metrics, snapshot, LinkMetrics, Mode};
use crate::model::{strictly_increasing, Model};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximize `f` on `[lo, hi]` by golden-section search.
///
/// The endpoints are evaluated too, so a monotone objective returns the
/// boundary. Returns the best sampled `(x, f(x))`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::invalid("bounds", format!("lo {lo} must be below hi {hi}")));
    }
    let mut best = (lo, f(lo)?);
    let f_hi = f(hi)?;
    if f_hi > best.1 {
        best = (hi, f_hi);
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iter = 0;
    while b - a > tol && iter < max_iter {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        iter += 1;
    }
    let interior = if fc >= fd { (c, fc) } else { (d, fd) };
    if interior.1 >= best.1 {
        best = interior;
    } else if best.0 != lo && best.0 != hi {
        log::warn!("golden-section bracket lost; objective may not be unimodal");
    }
    Ok(best)
}

/// `{0.01, 0.02, ..., 0.99}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Whether `values` rise (weakly) to a single peak and then fall (weakly).
pub fn is_unimodal(values: &[f64]) -> bool {
    let Some(peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    else {
        return true;
    };
    values[..=peak].windows(2).all(|w| w[0] <= w[1]) && values[peak..].windows(2).all(|w| w[0] >= w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    /// Relative tolerance on the linear SNR.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            snr_min_db: 0.0,
            snr_max_db: 30.0,
            tol: 1e-4,
            max_iter: 200,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr_min_db < self.snr_max_db) {
            return Err(Error::invalid("snr bounds", "snr_min_db must be below snr_max_db"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        Ok(())
    }

    fn tol_db(&self) -> f64 {
        10.0 * (1.0 + self.tol).log10()
    }
}

/// AMC boundaries and operating SNR one node uses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodePolicy {
    pub node: &'static str,
    /// Inner boundaries `S_1..S_N` (linear).
    pub thresholds: Vec<f64>,
    /// Operating average SNR (linear).
    pub snr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub snr: f64,
    pub ee: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    pub mode: Mode,
    pub alpha_star: Option<f64>,
    pub snr_star: f64,
    pub snr_star_relay: Option<f64>,
    pub ee: f64,
    pub delay: f64,
    pub thresholds: Vec<f64>,
    pub feasible: bool,
    pub metrics: LinkMetrics,
    /// Best point per α (relay mode only).
    pub alpha_curve: Vec<AlphaPoint>,
}

fn metrics_at(model: &Model, mode: Mode, alpha: f64, snr_db: f64) -> Result<LinkMetrics> {
    let snr = db_to_linear(snr_db);
    match mode {
        Mode::Relay => relay_metrics(model, alpha, snr),
        Mode::Direct => direct_metrics(model, snr),
    }
}

/// Smallest `S̄` (dB) in the bounds with `D_(T)(S̄) ≤ d0`, by bisection on the
/// delay, which decreases in `S̄`.
pub fn min_snr_for_delay(model: &Model, mode: Mode, alpha: f64, d0: f64, opts: &SearchOptions) -> Result<f64> {
    let delay = |db: f64| metrics_at(model, mode, alpha, db).map(|m| m.delay);
    let d_hi = delay(opts.snr_max_db)?;
    if !(d_hi <= d0) {
        return Err(Error::Infeasible {
            budget: d0,
            min_delay: d_hi,
        });
    }
    if delay(opts.snr_min_db)? <= d0 {
        return Ok(opts.snr_min_db);
    }
    let (mut lo, mut hi) = (opts.snr_min_db, opts.snr_max_db);
    let tol = opts.tol_db();
    for _ in 0..opts.max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if delay(mid)? <= d0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Best `S̄` for one mode (and `α` in relay mode), optionally under a delay budget.
fn optimize_snr(
    model: &Model,
    mode: Mode,
    alpha: f64,
    d0: Option<f64>,
    opts: &SearchOptions,
) -> Result<LinkMetrics> {
    let lo = match d0 {
        Some(d0) => min_snr_for_delay(model, mode, alpha, d0, opts)?,
        None => opts.snr_min_db,
    };
    let best = if lo < opts.snr_max_db {
        let (x, _) = golden_section_max(
            |db| metrics_at(model, mode, alpha, db).map(|m| m.ee),
            lo,
            opts.snr_max_db,
            opts.tol_db(),
            opts.max_iter,
        )?;
        x
    } else {
        lo
    };
    let mut m = metrics_at(model, mode, alpha, best)?;
    if let Some(d0) = d0 {
        if m.delay > d0 {
            // numerical wiggle in the delay curve: fall back to the bound
            m = metrics_at(model, mode, alpha, lo)?;
        }
    }
    Ok(m)
}

fn plan_from(model: &Model, m: LinkMetrics, d0: Option<f64>, alpha_curve: Vec<AlphaPoint>) -> PlanResult {
    let feasible = d0.is_none_or(|d0| m.delay <= d0 + 1e-9);
    PlanResult {
        mode: m.mode,
        alpha_star: (m.mode == Mode::Relay).then_some(m.alpha),
        snr_star: m.snr,
        snr_star_relay: (m.mode == Mode::Relay).then_some(m.snr),
        ee: m.ee,
        delay: m.delay,
        thresholds: model.thresholds.clone(),
        feasible,
        metrics: m,
        alpha_curve,
    }
}

/// Two-stage search: golden-section over `S̄` (with `S̄_R = S̄`) for every
/// `α` in the grid, then the best `α`.
pub fn optimize_relay(model: &Model, alpha_grid: &[f64], d0: Option<f64>, opts: &SearchOptions) -> Result<PlanResult> {
    opts.validate()?;
    if alpha_grid.is_empty() || alpha_grid.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::invalid("alpha_grid", "must be a nonempty subset of (0, 1)"));
    }
    let results: Vec<Result<LinkMetrics>> = alpha_grid
        .par_iter()
        .map(|&a| optimize_snr(model, Mode::Relay, a, d0, opts))
        .collect();
    let mut best: Option<LinkMetrics> = None;
    let mut curve = Vec::with_capacity(alpha_grid.len());
    let mut min_delay = f64::INFINITY;
    for r in results {
        match r {
            Ok(m) => {
                curve.push(AlphaPoint {
                    alpha: m.alpha,
                    snr: m.snr,
                    ee: m.ee,
                    delay: m.delay,
                });
                // ties go to the smaller α so the answer ignores grid order
                let better = best.as_ref().is_none_or(|b| {
                    m.ee > b.ee || (m.ee == b.ee && m.alpha < b.alpha)
                });
                if better {
                    best = Some(m);
                }
            }
            Err(Error::Infeasible { min_delay: d, .. }) => min_delay = min_delay.min(d),
            Err(e) => return Err(e),
        }
    }
    curve.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    match best {
        Some(m) => Ok(plan_from(model, m, d0, curve)),
        None => Err(Error::Infeasible {
            budget: d0.unwrap_or(f64::INFINITY),
            min_delay,
        }),
    }
}

pub fn optimize_direct(model: &Model, d0: Option<f64>, opts: &SearchOptions) -> Result<PlanResult> {
    opts.validate()?;
    let m = optimize_snr(model, Mode::Direct, 1.0, d0, opts)?;
    Ok(plan_from(model, m, d0, Vec::new()))
}

/// Relay plan at a fixed `α`.
pub fn optimize_relay_at(model: &Model, alpha: f64, d0: Option<f64>, opts: &SearchOptions) -> Result<PlanResult> {
    optimize_relay(model, &[alpha], d0, opts)
}

/// Per-node AMC policy: one for direct transmission, source and relay in relay mode.
pub fn amc_policy(plan: &PlanResult) -> Result<Vec<NodePolicy>> {
    if !plan.feasible {
        return Err(Error::Infeasible {
            budget: f64::NAN,
            min_delay: plan.delay,
        });
    }
    let node = |name, snr| NodePolicy {
        node: name,
        thresholds: plan.thresholds.clone(),
        snr,
    };
    Ok(match plan.mode {
        Mode::Direct => vec![node("source", plan.snr_star)],
        Mode::Relay => vec![
            node("source", plan.snr_star),
            node("relay", plan.snr_star_relay.unwrap_or(plan.snr_star)),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchDecision {
    /// Delay budget `D*` at which the better mode flips (slots).
    pub threshold: Option<f64>,
    /// Mode chosen for budgets below `D*` (or everywhere when there is no crossing).
    pub below: Mode,
    pub above: Mode,
    pub access_inequality_lhs: f64,
    /// `(a_{A,R} + a_{R,D}·α)/(1+α)`.
    pub access_inequality_rhs: f64,
    /// `α·a_{A,R} + (1−α)·a_{R,D}`, the form its limit argument produces.
    pub access_convex_rhs: f64,
    pub budget: f64,
    pub chosen: Mode,
    pub ee_direct: Option<f64>,
    pub ee_relay: Option<f64>,
}

/// Best EE of each mode under budget `d0`; `None` when infeasible.
struct ModeCurve<'a> {
    model: &'a Model,
    mode: Mode,
    alpha: f64,
    opts: SearchOptions,
    free: PlanResult,
}

impl<'a> ModeCurve<'a> {
    fn new(model: &'a Model, mode: Mode, alpha: f64, opts: &SearchOptions) -> Result<Self> {
        let free = match mode {
            Mode::Relay => optimize_relay_at(model, alpha, None, opts)?,
            Mode::Direct => optimize_direct(model, None, opts)?,
        };
        Ok(Self {
            model,
            mode,
            alpha,
            opts: *opts,
            free,
        })
    }

    fn min_delay(&self) -> Result<f64> {
        Ok(metrics_at(self.model, self.mode, self.alpha, self.opts.snr_max_db)?.delay)
    }

    fn ee(&self, d0: f64) -> Result<Option<f64>> {
        if self.free.delay <= d0 {
            return Ok(Some(self.free.ee));
        }
        match optimize_snr(self.model, self.mode, self.alpha, Some(d0), &self.opts) {
            Ok(m) => Ok(Some(m.ee)),
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn pick(direct: Option<f64>, relay: Option<f64>) -> Mode {
    match (direct, relay) {
        (Some(d), Some(r)) if r > d => Mode::Relay,
        (None, Some(_)) => Mode::Relay,
        _ => Mode::Direct,
    }
}

/// Delay threshold where the energy-efficient mode flips, found by scanning
/// budgets on a log grid and bisecting the first sign change.
pub fn switch_decision(model: &Model, d0: f64, alpha: f64, opts: &SearchOptions) -> Result<SwitchDecision> {
    opts.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1)"));
    }
    let direct = ModeCurve::new(model, Mode::Direct, 1.0, opts)?;
    let relay = ModeCurve::new(model, Mode::Relay, alpha, opts)?;
    let choose = |d: f64| -> Result<(Mode, Option<f64>, Option<f64>)> {
        let (ed, er) = (direct.ee(d)?, relay.ee(d)?);
        Ok((pick(ed, er), ed, er))
    };

    let lo = direct.min_delay()?.min(relay.min_delay()?);
    let hi = direct.free.delay.max(relay.free.delay);
    let (lo, hi) = (lo * 0.999, hi.max(lo * 1.001) * 1.001);
    const SCAN: usize = 24;
    let grid: Vec<f64> = (0..=SCAN)
        .map(|i| lo * (hi / lo).powf(i as f64 / SCAN as f64))
        .collect();
    let modes: Vec<Mode> = grid.iter().map(|&d| choose(d).map(|c| c.0)).collect::<Result<_>>()?;
    let flip = modes.windows(2).position(|w| w[0] != w[1]);
    let (threshold, below, above) = match flip {
        None => (None, modes[SCAN], modes[SCAN]),
        Some(i) => {
            let (mut a, mut b) = (grid[i], grid[i + 1]);
            let below = modes[i];
            while b / a - 1.0 > opts.tol {
                let mid = (a * b).sqrt();
                if choose(mid)?.0 == below {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            (Some((a * b).sqrt()), below, modes[i + 1])
        }
    };
    let (chosen, ee_direct, ee_relay) = choose(d0)?;
    let a_ad = model.direct.access.available();
    let a_ar = model.source_relay.access.available();
    let a_rd = model.relay_dest.access.available();
    Ok(SwitchDecision {
        threshold,
        below,
        above,
        access_inequality_lhs: a_ad,
        access_inequality_rhs: (a_ar + a_rd * alpha) / (1.0 + alpha),
        access_convex_rhs: alpha * a_ar + (1.0 - alpha) * a_rd,
        budget: d0,
        chosen,
        ee_direct,
        ee_relay,
    })
}

/// Closed-form mode comparison in the two limiting regimes, next to the
/// full model evaluated at the same SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitComparison {
    pub snr: f64,
    pub closed_direct: f64,
    pub closed_relay: f64,
    pub model_direct: f64,
    pub model_relay: f64,
    /// Fraction of each mode's energy per period spent idle (unavailable spectrum).
    pub idle_share_direct: f64,
    pub idle_share_relay: f64,
}

impl LimitComparison {
    pub fn closed_choice(&self) -> Mode {
        if self.closed_relay > self.closed_direct { Mode::Relay } else { Mode::Direct }
    }

    pub fn model_choice(&self) -> Mode {
        if self.model_relay > self.model_direct { Mode::Relay } else { Mode::Direct }
    }
}

/// Transmit-power-dominated limit: `λ̄/(a_{A,D}𝒫_{S,D})` against
/// `λ̄/(α a_{A,R}𝒫 + (1−α) a_{R,D}𝒫_R)`, per second.
pub fn high_snr_limit(model: &Model, alpha: f64, snr: f64) -> Result<LimitComparison> {
    let snap = snapshot(model, snr)?;
    let lambda = model.traffic.mean_rate;
    let a_ad = model.direct.access.available();
    let a_ar = model.source_relay.access.available();
    let a_rd = model.relay_dest.access.available();
    let t = model.system.slot_s;
    let closed_direct = lambda / (a_ad * snap.direct.mean_power * t);
    let closed_relay = lambda
        / ((alpha * a_ar * snap.source_relay.mean_power + (1.0 - alpha) * a_rd * snap.relay_dest.mean_power) * t);
    full_model(model, alpha, snr, &snap, closed_direct, closed_relay)
}

/// Idle-power-dominated limit: `λ̄/(a^u_{A,D}𝒫_0 T)` against
/// `λ̄/((α a^u_{A,R} + (1−α) a^u_{R,D})𝒫_0 T)`.
pub fn idle_limit(model: &Model, alpha: f64, snr: f64) -> Result<LimitComparison> {
    let lambda = model.traffic.mean_rate;
    let p0 = model.system.idle_power_w;
    let t = model.system.slot_s;
    let u_ad = model.direct.access.unavailable();
    let u_ar = model.source_relay.access.unavailable();
    let u_rd = model.relay_dest.access.unavailable();
    let snap = snapshot(model, snr)?;
    let closed_direct = lambda / (u_ad * p0 * t);
    let closed_relay = lambda / ((alpha * u_ar + (1.0 - alpha) * u_rd) * p0 * t);
    full_model(model, alpha, snr, &snap, closed_direct, closed_relay)
}

fn full_model(
    model: &Model,
    alpha: f64,
    snr: f64,
    snap: &crate::metrics::Snapshot,
    closed_direct: f64,
    closed_relay: f64,
) -> Result<LimitComparison> {
    let relay = evaluate_relay(model, snap, alpha)?.metrics;
    let direct = crate::metrics::evaluate_direct(model, snap)?.metrics;
    let idle = model.system.idle_power_w * model.system.slot_s;
    let u_relay = alpha * model.source_relay.access.unavailable() + (1.0 - alpha) * model.relay_dest.access.unavailable();
    Ok(LimitComparison {
        snr,
        closed_direct,
        closed_relay,
        model_direct: direct.ee,
        model_relay: relay.ee,
        idle_share_direct: model.direct.access.unavailable() * idle / direct.energy_per_period,
        idle_share_relay: u_relay * idle / relay.energy_per_period,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EepResult {
    pub thresholds: Vec<f64>,
    /// Objective after each coordinate sweep (the first entry is the start).
    pub history: Vec<f64>,
}

/// Check set of time splits the EEP search protects.
pub fn eep_check_alphas() -> Vec<f64> {
    vec![0.01, 0.2, 0.4, 0.6, 0.8, 0.99]
}

/// Relay EE at each α for the given inner thresholds; `None` if any fails.
fn ee_profile(model: &Model, thresholds: &[f64], snr: f64, alphas: &[f64]) -> Option<Vec<f64>> {
    let m = model.with_thresholds(thresholds.to_vec());
    let snap = snapshot(&m, snr).ok()?;
    alphas
        .iter()
        .map(|&a| evaluate_relay(&m, &snap, a).ok().map(|e| e.metrics.ee))
        .collect()
}

/// Contiguous threshold blocks searched as line-search directions: each
/// single threshold, adjacent pairs, and every prefix.
fn eep_blocks(k: usize) -> Vec<(usize, usize)> {
    let mut blocks: Vec<(usize, usize)> = (0..k).map(|n| (n, n)).collect();
    blocks.extend((1..k).map(|n| (n - 1, n)));
    blocks.extend((2..k).map(|n| (0, n)));
    blocks
}

/// Energy-efficient boundaries at `snr`, starting from the MSRE boundaries.
///
/// Each pass runs a golden-section line search on `ln S_n` for every single
/// boundary between its neighbours, then for adjacent pairs and prefixes
/// shifted together; later passes keep only the directions that improved. The objective is the worst EE ratio against MSRE over
/// `alphas`, so an accepted move never lowers EE at any of them.
pub fn eep_boundaries(model: &Model, snr: f64, alphas: &[f64]) -> Result<EepResult> {
    let start = model.msre_thresholds()?;
    if start.is_empty() {
        return Ok(EepResult {
            thresholds: start,
            history: vec![1.0],
        });
    }
    let base = ee_profile(model, &start, snr, alphas)
        .ok_or(Error::Undefined("EE at the MSRE boundaries"))?;
    let objective = |t: &[f64]| -> f64 {
        match ee_profile(model, t, snr, alphas) {
            Some(ee) => ee
                .iter()
                .zip(&base)
                .map(|(e, b)| e / b)
                .fold(f64::INFINITY, f64::min),
            None => f64::NEG_INFINITY,
        }
    };
    let mut t = start;
    let mut current = 1.0;
    let mut history = vec![current];
    let k = t.len();
    let mut active = eep_blocks(k);
    for _ in 0..20 {
        let before = current;
        let mut improved = Vec::new();
        for &(i, j) in &active {
            // log-shift range keeping the block strictly inside its neighbours
            let lo = if i == 0 { -(1e2f64.ln()) } else { (t[i - 1] / t[i]).ln() };
            let hi = if j + 1 == k { 1e2f64.ln() } else { (t[j + 1] / t[j]).ln() };
            let pad = 1e-6 * (hi - lo);
            let shifted = |u: f64| {
                let mut trial = t.clone();
                for v in &mut trial[i..=j] {
                    *v *= u.exp();
                }
                trial
            };
            let (u, val) = golden_section_max(
                |u| Ok(objective(&shifted(u))),
                lo + pad,
                hi - pad,
                5e-3,
                60,
            )?;
            if val > current + 1e-12 {
                t = strictly_increasing(shifted(u));
                current = val;
                improved.push((i, j));
            }
        }
        history.push(current);
        // later passes revisit only the directions that still paid off
        if current - before < 1e-6 || improved.is_empty() {
            break;
        }
        active = improved;
    }
    Ok(EepResult {
        thresholds: t,
        history,
    })
}

/// AMC boundary rule shared by all links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    #[default]
    Msre,
    Eep,
    Explicit,
}

/// Inner thresholds the policy produces at reference SNR `snr_ref_db`.
pub fn resolve_thresholds(model: &Model, policy: &BoundaryPolicy, snr_ref_db: f64) -> Result<Vec<f64>> {
    match policy {
        BoundaryPolicy::Msre => model.msre_thresholds(),
        BoundaryPolicy::Explicit => Ok(model.thresholds.clone()),
        BoundaryPolicy::Eep => {
            Ok(eep_boundaries(model, db_to_linear(snr_ref_db), &eep_check_alphas())?.thresholds)
        }
    }
}

/// EE of the relay mode across the α grid at a fixed SNR (shared snapshot).
pub fn alpha_sweep(model: &Model, snr: f64, alphas: &[f64]) -> Result<Vec<LinkMetrics>> {
    let snap = snapshot(model, snr)?;
    alphas
        .par_iter()
        .map(|&a| evaluate_relay(model, &snap, a).map(|e| e.metrics))
        .collect()
}

pub fn snr_db(m: &LinkMetrics) -> f64 {
    linear_to_db(m.snr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_on_quadratic() {
        let (x, f) = golden_section_max(|x| Ok(-(x - 2.0) * (x - 2.0)), 0.0, 5.0, 1e-6, 200).unwrap();
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-11);
    }

    #[test]
    fn golden_on_constant_and_monotone() {
        let (x, f) = golden_section_max(|_| Ok(3.0), 0.0, 1.0, 1e-6, 200).unwrap();
        assert!((0.0..=1.0).contains(&x));
        assert_eq!(f, 3.0);
        let (x, _) = golden_section_max(Ok, -1.0, 4.0, 1e-6, 200).unwrap();
        assert_eq!(x, 4.0);
        let (x, _) = golden_section_max(|x| Ok(-x), -1.0, 4.0, 1e-6, 200).unwrap();
        assert_eq!(x, -1.0);
    }

    #[test]
    fn golden_rejects_empty_interval() {
        assert!(golden_section_max(Ok, 1.0, 1.0, 1e-6, 10).is_err());
    }

    #[test]
    fn golden_propagates_errors() {
        let r = golden_section_max(|x| if x > 0.5 { Err(Error::Undefined("x")) } else { Ok(x) }, 0.0, 1.0, 1e-6, 10);
        assert!(r.is_err());
    }

    #[test]
    fn unimodality_scan() {
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.0, 1.0]));
        assert!(is_unimodal(&[1.0, 1.0, 1.0]));
        assert!(!is_unimodal(&[1.0, 3.0, 2.0, 3.0]));
    }

    #[test]
    fn alpha_grid_shape() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 99);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[98], 0.99);
    }
}
