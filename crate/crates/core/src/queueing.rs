//! Traffic, per-state packet service times and service rates.
//!
//! Time is measured in slots of `slot_s` seconds throughout; rates are per slot.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Probability mass function over the integers `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    /// Validates nonnegativity and unit mass (within 1e-9), then renormalizes exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("pmf", "empty support"));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("pmf", "masses must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("pmf", format!("masses sum to {total}")));
        }
        Ok(Self(probs.into_iter().map(|p| p / total).collect()))
    }

    pub fn point(k: usize) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = 1.0;
        Self(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest value in the support.
    pub fn max_value(&self) -> usize {
        self.0.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }
}

/// Markov-modulated Poisson arrivals: per-slot rate `rates[k]` while the
/// modulating chain (row-stochastic `switch`) is in state `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mmpp {
    pub rates: Vec<f64>,
    pub switch: Vec<Vec<f64>>,
}

impl Mmpp {
    pub fn validate(&self) -> Result<()> {
        let k = self.rates.len();
        if k == 0 {
            return Err(Error::invalid("mmpp.rates", "need at least one traffic state"));
        }
        if self.rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::invalid("mmpp.rates", "rates must be nonnegative"));
        }
        if self.switch.len() != k || self.switch.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("mmpp.switch", format!("must be {k}x{k}")));
        }
        for row in &self.switch {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("mmpp.switch", "rows must be probability vectors"));
            }
        }
        Ok(())
    }

    /// Stationary distribution of the modulating chain.
    pub fn stationary(&self) -> Vec<f64> {
        let k = self.rates.len();
        let mut pi = vec![1.0 / k as f64; k];
        for _ in 0..100_000 {
            let mut next = vec![0.0; k];
            for (i, row) in self.switch.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    next[j] += pi[i] * p;
                }
            }
            // lazy step keeps periodic switch matrices convergent
            let next: Vec<f64> = next.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect();
            let diff = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        pi
    }

    pub fn mean_rate(&self) -> f64 {
        self.stationary().iter().zip(&self.rates).map(|(p, r)| p * r).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Mean arrivals per slot `λ̄`.
    pub mean_rate: f64,
    /// Cap on arrivals in one slot.
    pub max_arrivals: usize,
    /// Simulator-only rate modulation; the analysis uses Poisson(`mean_rate`).
    pub mmpp: Option<Mmpp>,
}

impl TrafficModel {
    pub fn poisson(mean_rate: f64, max_arrivals: usize) -> Self {
        Self {
            mean_rate,
            max_arrivals,
            mmpp: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_rate >= 0.0 && self.mean_rate.is_finite()) {
            return Err(Error::invalid("lambda", format!("{} must be nonnegative", self.mean_rate)));
        }
        if self.max_arrivals == 0 {
            return Err(Error::invalid("max_arrivals", "must be at least 1"));
        }
        if let Some(m) = &self.mmpp {
            m.validate()?;
            let mean = m.mean_rate();
            if (mean - self.mean_rate).abs() > 1e-6 * mean.max(1.0) {
                return Err(Error::invalid(
                    "lambda",
                    format!("must equal the MMPP stationary mean {mean}"),
                ));
            }
        }
        Ok(())
    }
}

/// Fixed link-layer and power parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub packet_bits: u32,
    pub symbol_rate_hz: f64,
    /// Slot (and period `T`) length in seconds.
    pub slot_s: f64,
    /// Buffer capacity `M` in packets.
    pub buffer: usize,
    /// `N_r^max`: retransmissions allowed after the first attempt.
    pub max_tx: u32,
    pub ref_power_w: f64,
    pub idle_power_w: f64,
    pub loss_budget: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.packet_bits == 0 {
            return Err(Error::invalid("packet_bits", "must be positive"));
        }
        if !(self.symbol_rate_hz > 0.0) {
            return Err(Error::invalid("symbol_rate_hz", "must be positive"));
        }
        if !(self.slot_s > 0.0) {
            return Err(Error::invalid("slot_s", "must be positive"));
        }
        if self.max_tx == 0 {
            return Err(Error::invalid("max_tx", "must be at least 1"));
        }
        if !(self.ref_power_w > 0.0) {
            return Err(Error::invalid("ref_power_w", "must be positive"));
        }
        if !(self.idle_power_w >= 0.0) {
            return Err(Error::invalid("idle_power_w", "must be nonnegative"));
        }
        if !(self.loss_budget > 0.0 && self.loss_budget < 1.0) {
            return Err(Error::invalid("loss_budget", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Airtime in slots of one `L`-bit packet at `bits` bits/symbol on a link
    /// whose spectrum is available with probability `access`.
    pub fn airtime(&self, bits: f64, access: f64, link: &'static str) -> Result<f64> {
        if !(access > 0.0) {
            return Err(Error::StarvedLink(link));
        }
        if !(bits > 0.0) {
            return Ok(f64::INFINITY);
        }
        Ok(self.packet_bits as f64 / (bits * self.symbol_rate_hz * access * self.slot_s))
    }
}

/// Per-state transmission times of the first phase (all in slots).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketTimes {
    pub tau_direct: f64,
    pub tau_relay: f64,
    pub eps: f64,
    pub eps_bar: f64,
}

/// Everything the first-phase timing needs about the three links.
#[derive(Debug, Clone, Copy)]
pub struct SourceTiming<'a> {
    pub sys: &'a SystemParams,
    /// Bits per symbol per state `0..=N` (0 in outage).
    pub bits: &'a [u32],
    /// Source→relay state probabilities.
    pub pr_ar: &'a [f64],
    /// Direct-link state probabilities.
    pub pr_ad: &'a [f64],
    /// `b̄` of the relay→destination link.
    pub mean_bits_rd: f64,
    pub access_ad: f64,
    pub access_ar: f64,
    pub access_rd: f64,
    pub p_ld: f64,
}

fn transmitting_average(values: impl Iterator<Item = f64>, probs: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, p) in values.zip(probs).skip(1) {
        if *p > 0.0 {
            num += v * p;
            den += p;
        }
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateChannel("no transmitting state has positive probability".into()));
    }
    Ok(num / den)
}

impl SourceTiming<'_> {
    fn tau_direct(&self, n: usize) -> Result<f64> {
        self.sys.airtime(self.bits[n] as f64, self.access_ad, "A,D")
    }

    fn tau_relay(&self, n: usize) -> Result<f64> {
        Ok(self.sys.airtime(self.bits[n] as f64, self.access_ar, "A,R")?
            + self.sys.airtime(self.mean_bits_rd, self.access_rd, "R,D")?)
    }

    /// Retransmission time `ε̄`: state-probability averages of both paths
    /// over the transmitting states.
    pub fn eps_bar(&self) -> Result<f64> {
        let n_states = self.bits.len();
        let direct: Vec<f64> = (0..n_states).map(|n| self.tau_direct(n)).collect::<Result<_>>()?;
        let relay: Vec<f64> = (0..n_states).map(|n| self.tau_relay(n)).collect::<Result<_>>()?;
        let tau_bar_direct = transmitting_average(direct.into_iter(), self.pr_ad)?;
        let tau_bar_relay = transmitting_average(relay.into_iter(), self.pr_ar)?;
        Ok(tau_bar_direct * (1.0 - self.p_ld) + tau_bar_relay * self.p_ld)
    }
}

pub fn packet_times(state: usize, timing: &SourceTiming) -> Result<PacketTimes> {
    if state >= timing.bits.len() {
        return Err(Error::Shape(format!(
            "state {state} outside 0..{}",
            timing.bits.len()
        )));
    }
    let tau_direct = timing.tau_direct(state)?;
    let tau_relay = timing.tau_relay(state)?;
    let p = timing.p_ld;
    // keep exact endpoints so a perfect (or dead) direct link picks one path only
    let eps = if p == 0.0 {
        tau_direct
    } else if p == 1.0 {
        tau_relay
    } else {
        tau_direct * (1.0 - p) + tau_relay * p
    };
    Ok(PacketTimes {
        tau_direct,
        tau_relay,
        eps,
        eps_bar: timing.eps_bar()?,
    })
}

/// Distribution of the packet service time `ε + ⊤·ε̄`, `⊤ = 0..=N`, with
/// `P(⊤) = (1−p)·p^⊤`. The residual `p^{N+1}` is the dropped-after-all-retries
/// outcome, which also occupies the channel for `ε + N·ε̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceTimePmf {
    /// `(service time, probability)` for successful deliveries after `⊤` retransmissions.
    pub atoms: Vec<(f64, f64)>,
    pub dropped: f64,
}

impl ServiceTimePmf {
    /// Masses over `⊤ = 0..=N` with the dropped outcome folded into the final atom;
    /// sums to 1.
    pub fn masses(&self) -> Vec<(f64, f64)> {
        let mut m = self.atoms.clone();
        if let Some(last) = m.last_mut() {
            last.1 += self.dropped;
        }
        m
    }

    /// Expectation over the delivered outcomes (the dropped outcome contributes
    /// through the throughput loss factor instead).
    pub fn delivered_mean(&self) -> f64 {
        self.atoms.iter().map(|(t, p)| t * p).sum()
    }

    /// Mean channel occupancy per packet including the dropped outcome.
    pub fn occupancy_mean(&self) -> f64 {
        self.masses().iter().map(|(t, p)| t * p).sum()
    }
}

fn check_error_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p_err", format!("{p} is not a probability")));
    }
    if p == 1.0 {
        return Err(Error::NeverSucceeds);
    }
    Ok(())
}

pub fn service_time_pmf(eps: f64, eps_bar: f64, p_err: f64, max_tx: u32) -> Result<ServiceTimePmf> {
    check_error_probability(p_err)?;
    let atoms = (0..=max_tx)
        .map(|k| (eps + k as f64 * eps_bar, (1.0 - p_err) * p_err.powi(k as i32)))
        .collect();
    Ok(ServiceTimePmf {
        atoms,
        dropped: p_err.powi(max_tx as i32 + 1),
    })
}

/// Mean service time in closed form:
/// `[ε(1−p^{N+1})(1−p) + ε̄·p·(1 − p^N(1 + N(1−p)))] / (1−p)`.
pub fn expected_service_time(eps: f64, eps_bar: f64, p_err: f64, max_tx: u32) -> Result<f64> {
    check_error_probability(p_err)?;
    if 1.0 - p_err < 1e-12 {
        return Err(Error::Divergence(p_err));
    }
    let p = p_err;
    let n = max_tx as i32;
    let f = eps * (1.0 - p.powi(n + 1)) * (1.0 - p);
    let retx = eps_bar * p * (1.0 - p.powi(n) * (1.0 + max_tx as f64 * (1.0 - p)));
    Ok((f + retx) / (1.0 - p))
}

/// Service parameters of one node: per-state first-attempt times, retransmission
/// time, per-attempt error, retransmission cap and the share of each period the
/// node may transmit in.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceProfile {
    /// First-attempt time per channel state `0..=N` (infinite in outage).
    pub eps: Vec<f64>,
    pub eps_bar: f64,
    pub p_err: f64,
    pub max_tx: u32,
    /// `α` for the source, `1−α` for the relay, 1 for direct transmission.
    pub share: f64,
}

impl ServiceProfile {
    pub fn n_states(&self) -> usize {
        self.eps.len()
    }

    pub fn expected_service_time(&self, state: usize) -> Result<f64> {
        let eps = self.eps[state];
        if eps.is_infinite() {
            return Ok(f64::INFINITY);
        }
        expected_service_time(eps, self.eps_bar, self.p_err, self.max_tx)
    }

    /// `χ_n = share / E{δ_n}`; zero in the outage state.
    pub fn service_rate(&self, state: usize) -> Result<f64> {
        let t = self.expected_service_time(state)?;
        Ok(if t.is_infinite() { 0.0 } else { self.share / t })
    }

    pub fn service_rates(&self) -> Result<Vec<f64>> {
        (0..self.n_states()).map(|n| self.service_rate(n)).collect()
    }

    pub fn pmf(&self, state: usize) -> Result<ServiceTimePmf> {
        service_time_pmf(self.eps[state], self.eps_bar, self.p_err, self.max_tx)
    }
}

fn check_share(share: f64) -> Result<()> {
    if !(share > 0.0 && share <= 1.0) {
        return Err(Error::invalid("alpha", format!("time share {share} must lie in (0, 1]")));
    }
    Ok(())
}

/// Source service in relay mode: per-attempt error `P_1`, share `α`.
pub fn source_profile(timing: &SourceTiming, p1: f64, alpha: f64) -> Result<ServiceProfile> {
    check_share(alpha)?;
    let eps = (0..timing.bits.len())
        .map(|n| {
            if timing.bits[n] == 0 {
                Ok(f64::INFINITY)
            } else {
                packet_times(n, timing).map(|t| t.eps)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ServiceProfile {
        eps,
        eps_bar: timing.eps_bar()?,
        p_err: p1,
        max_tx: timing.sys.max_tx,
        share: alpha,
    })
}

/// Relay service: `ε'_n = L/(b_n R_s a^a_{R,D})`, `ε̄' = L/(b̄ R_s a^a_{R,D})`,
/// per-attempt error `P_L2`, share `1−α`.
pub fn relay_profile(
    sys: &SystemParams,
    bits: &[u32],
    mean_bits_rd: f64,
    access_rd: f64,
    p_l2: f64,
    alpha: f64,
) -> Result<ServiceProfile> {
    check_share(1.0 - alpha)?;
    let eps = bits
        .iter()
        .map(|&b| sys.airtime(b as f64, access_rd, "R,D"))
        .collect::<Result<Vec<_>>>()?;
    Ok(ServiceProfile {
        eps,
        eps_bar: sys.airtime(mean_bits_rd, access_rd, "R,D")?,
        p_err: p_l2,
        max_tx: sys.max_tx,
        share: 1.0 - alpha,
    })
}

/// Direct transmission: the source owns the whole period on the direct link.
pub fn direct_profile(
    sys: &SystemParams,
    bits: &[u32],
    pr_ad: &[f64],
    access_ad: f64,
    p_ld: f64,
) -> Result<ServiceProfile> {
    let eps = bits
        .iter()
        .map(|&b| sys.airtime(b as f64, access_ad, "A,D"))
        .collect::<Result<Vec<_>>>()?;
    let eps_bar = transmitting_average(eps.iter().copied(), pr_ad)?;
    Ok(ServiceProfile {
        eps,
        eps_bar,
        p_err: p_ld,
        max_tx: sys.max_tx,
        share: 1.0,
    })
}

pub fn source_service_rate(state: usize, profile: &ServiceProfile) -> Result<f64> {
    profile.service_rate(state)
}

pub fn relay_service_rate(state: usize, profile: &ServiceProfile) -> Result<f64> {
    profile.service_rate(state)
}

/// Integer packets served in one slot at mean rate `chi`:
/// `floor(χ) + Bernoulli(frac(χ))`, capped at `cap`.
pub fn service_counts(chi: f64, cap: usize) -> Vec<(usize, f64)> {
    if !(chi > 0.0) {
        return vec![(0, 1.0)];
    }
    if chi >= cap as f64 {
        return vec![(cap, 1.0)];
    }
    let k = chi.floor();
    let frac = chi - k;
    let k = k as usize;
    if frac == 0.0 {
        vec![(k, 1.0)]
    } else {
        vec![(k, 1.0 - frac), (k + 1, frac)]
    }
}

/// Poisson(`λ̄`) truncated to `0..=A` and renormalized.
pub fn arrival_pmf(traffic: &TrafficModel) -> Result<Pmf> {
    traffic.validate()?;
    Ok(truncated_poisson(traffic.mean_rate, traffic.max_arrivals))
}

pub fn truncated_poisson(lambda: f64, cap: usize) -> Pmf {
    if lambda == 0.0 {
        return Pmf(std::iter::once(1.0).chain(std::iter::repeat_n(0.0, cap)).collect());
    }
    let ln_l = lambda.ln();
    let raw: Vec<f64> = (0..=cap)
        .map(|k| (k as f64 * ln_l - lambda - ln_gamma(k as f64 + 1.0)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    Pmf(raw.into_iter().map(|p| p / z).collect())
}

/// Relay arrivals: packets the source chain serves per slot.
pub fn relay_arrival_pmf(
    source: &crate::markov::JointChain,
    stationary: &crate::markov::StationaryDistribution,
) -> Result<Pmf> {
    crate::markov::departure_pmf(&stationary.pi, source)
}

/// Relay arrivals in mixed form: the quantized source service
/// rates carry the channel-state probabilities, every other count carries the
/// Poisson(`λ̄`) mass, and the result is renormalized.
pub fn hybrid_relay_arrival_pmf(rates: &[f64], state_probs: &[f64], lambda: f64, cap: usize) -> Result<Pmf> {
    if rates.len() != state_probs.len() {
        return Err(Error::Shape("rates and state probabilities differ in length".into()));
    }
    let poisson = truncated_poisson(lambda, cap);
    let mut atoms = vec![0.0; cap + 1];
    let mut hit = vec![false; cap + 1];
    for (chi, p) in rates.iter().zip(state_probs).skip(1) {
        let k = (chi.round() as usize).min(cap);
        atoms[k] += p;
        hit[k] = true;
    }
    for k in 0..=cap {
        if !hit[k] {
            atoms[k] = poisson.get(k);
        }
    }
    let z: f64 = atoms.iter().sum();
    if !(z > 0.0) {
        return Err(Error::Undefined("hybrid relay arrival normalization"));
    }
    Pmf::new(atoms.into_iter().map(|p| p / z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sys() -> SystemParams {
        SystemParams {
            packet_bits: 100,
            symbol_rate_hz: 1e5,
            slot_s: 1.0,
            buffer: 50,
            max_tx: 6,
            ref_power_w: 1.0,
            idle_power_w: 0.1,
            loss_budget: 1e-3,
        }
    }

    #[test]
    fn airtime_hand_value() {
        // L=100, b=2, R_s=1e5, a=1 → 5e-4 s
        assert_abs_diff_eq!(sys().airtime(2.0, 1.0, "A,R").unwrap(), 5e-4, epsilon = 1e-18);
        assert!(matches!(sys().airtime(2.0, 0.0, "A,R"), Err(Error::StarvedLink("A,R"))));
    }

    fn timing<'a>(s: &'a SystemParams, p_ld: f64, pr: &'a [f64]) -> SourceTiming<'a> {
        SourceTiming {
            sys: s,
            bits: &[0, 1, 2],
            pr_ar: pr,
            pr_ad: pr,
            mean_bits_rd: 1.5,
            access_ad: 0.9,
            access_ar: 0.8,
            access_rd: 0.7,
            p_ld,
        }
    }

    #[test]
    fn packet_times_limits() {
        let s = sys();
        let pr = [0.2, 0.4, 0.4];
        let t = packet_times(2, &timing(&s, 0.0, &pr)).unwrap();
        assert_eq!(t.eps, t.tau_direct);
        let t = packet_times(2, &timing(&s, 1.0, &pr)).unwrap();
        assert_eq!(t.eps, t.tau_relay);
        assert_abs_diff_eq!(t.tau_relay, 100.0 / (2.0 * 1e5 * 0.8) + 100.0 / (1.5 * 1e5 * 0.7), epsilon = 1e-15);
    }

    #[test]
    fn pmf_examples() {
        let p = service_time_pmf(2.0, 1.0, 0.0, 6).unwrap();
        let m = p.masses();
        assert_eq!(m[0], (2.0, 1.0));
        assert!(m[1..].iter().all(|a| a.1 == 0.0));

        let p = service_time_pmf(2.0, 1.0, 0.5, 1).unwrap();
        let m = p.masses();
        assert_abs_diff_eq!(m[0].1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1].1, 0.5, epsilon = 1e-15);

        assert!(matches!(service_time_pmf(1.0, 1.0, 1.0, 3), Err(Error::NeverSucceeds)));
    }

    #[test]
    fn expected_time_examples() {
        assert_eq!(expected_service_time(3.0, 1.0, 0.0, 6).unwrap(), 3.0);
        assert!(matches!(
            expected_service_time(3.0, 1.0, 1.0 - 1e-14, 6),
            Err(Error::Divergence(_))
        ));
        // Mean channel occupancy grows with the error probability. The closed form
        // leaves out the dropped outcome, so it only grows while that mass is small.
        let mut last = (0.0, 0.0);
        for i in 0..=90 {
            let p = i as f64 / 100.0;
            let occupancy = service_time_pmf(1.0, 0.7, p, 6).unwrap().occupancy_mean();
            assert!(occupancy >= last.0, "occupancy not monotone at p={p}");
            let t = expected_service_time(1.0, 0.7, p, 6).unwrap();
            if p <= 0.3 {
                assert!(t >= last.1, "closed form not monotone at p={p}");
            }
            last = (occupancy, t);
        }
    }

    #[test]
    fn rate_limits() {
        let s = sys();
        let pr = [0.2, 0.4, 0.4];
        let src = source_profile(&timing(&s, 0.3, &pr), 0.0, 0.4).unwrap();
        assert_eq!(src.service_rate(0).unwrap(), 0.0);
        assert_abs_diff_eq!(src.service_rate(1).unwrap(), 0.4 / src.eps[1], epsilon = 1e-15);
        let rel = relay_profile(&s, &[0, 1, 2], 1.2, 0.5, 0.0, 1.0 - 1e-9).unwrap();
        assert!(rel.service_rate(2).unwrap() < 1e-5);
    }

    #[test]
    fn arrival_examples() {
        let p = arrival_pmf(&TrafficModel::poisson(0.0, 15)).unwrap();
        assert_eq!(p.get(0), 1.0);
        let p = arrival_pmf(&TrafficModel::poisson(1.0, 15)).unwrap();
        assert_abs_diff_eq!(p.get(0), (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean(), 1.0, epsilon = 1e-6);
        for l in [0.5, 2.0, 5.0] {
            let p = arrival_pmf(&TrafficModel::poisson(l, 15)).unwrap();
            assert!((p.mean() / l - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn service_count_quantization() {
        assert_eq!(service_counts(0.0, 5), vec![(0, 1.0)]);
        assert_eq!(service_counts(2.0, 5), vec![(2, 1.0)]);
        let c = service_counts(1.25, 5);
        assert_eq!(c[0], (1, 0.75));
        assert_eq!(c[1], (2, 0.25));
        assert_eq!(service_counts(9.5, 5), vec![(5, 1.0)]);
    }

    #[test]
    fn scaling_packet_and_symbol_rate_keeps_rates() {
        let s = sys();
        let scaled = SystemParams {
            packet_bits: 300,
            symbol_rate_hz: 3e5,
            ..s
        };
        let pr = [0.2, 0.4, 0.4];
        let a = source_profile(&timing(&s, 0.3, &pr), 0.1, 0.5).unwrap();
        let b = source_profile(&timing(&scaled, 0.3, &pr), 0.1, 0.5).unwrap();
        for n in 0..3 {
            assert_abs_diff_eq!(a.service_rate(n).unwrap(), b.service_rate(n).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn rates_follow_bits_and_share() {
        let s = sys();
        let pr = [0.2, 0.4, 0.4];
        let t = timing(&s, 0.3, &pr);
        let lo = source_profile(&t, 0.1, 0.3).unwrap();
        let hi = source_profile(&t, 0.1, 0.6).unwrap();
        assert!(lo.service_rate(2).unwrap() >= lo.service_rate(1).unwrap());
        assert!(hi.service_rate(1).unwrap() > lo.service_rate(1).unwrap());
        let rlo = relay_profile(&s, t.bits, 1.2, 0.7, 0.1, 0.3).unwrap();
        let rhi = relay_profile(&s, t.bits, 1.2, 0.7, 0.1, 0.6).unwrap();
        assert!(rhi.service_rate(1).unwrap() < rlo.service_rate(1).unwrap());
    }

    #[test]
    fn hybrid_pmf_is_normalized() {
        let p = hybrid_relay_arrival_pmf(&[0.0, 1.2, 2.7], &[0.1, 0.5, 0.4], 1.0, 15).unwrap();
        assert_abs_diff_eq!(p.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mmpp_mean() {
        let m = Mmpp {
            rates: vec![1.0, 2.0],
            switch: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        };
        assert_abs_diff_eq!(m.mean_rate(), 1.5, epsilon = 1e-12);
        let t = TrafficModel {
            mean_rate: 1.0,
            max_arrivals: 15,
            mmpp: Some(m),
        };
        assert!(t.validate().is_err());
    }

    proptest! {
        #[test]
        fn closed_form_matches_pmf(eps in 0.01f64..10.0, eps_bar in 0.01f64..10.0, p in 0.0f64..0.99, n in 1u32..12) {
            let pmf = service_time_pmf(eps, eps_bar, p, n).unwrap();
            let brute: f64 = (0..=n).map(|k| (eps + k as f64 * eps_bar) * (1.0 - p) * p.powi(k as i32)).sum();
            let closed = expected_service_time(eps, eps_bar, p, n).unwrap();
            prop_assert!((closed - brute).abs() <= 1e-12 * brute.max(1.0));
            prop_assert!((pmf.delivered_mean() - closed).abs() <= 1e-12 * closed.max(1.0));
            let total: f64 = pmf.masses().iter().map(|m| m.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn truncated_poisson_sums_to_one(l in 0.0f64..8.0, cap in 1usize..30) {
            let p = truncated_poisson(l, cap);
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
