//! Drop rates, queue lengths, delay, throughput, power, energy and energy
//! efficiency for relay-assisted and direct transmission.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::channel::{
    combined_error, fsmc_transitions, link_stats, link_stats_weighted, CombinedError, LinkLabel,
    LinkModel, LinkStats,
};
use crate::error::{Error, Result};
use crate::markov::{build_chain, flow, stationary, JointChain, StationaryDistribution};
use crate::model::{DirectThroughput, L1Weighting, LittleRate, Model, RelayArrivals};
use crate::quadrature::{self, ABS_TOL};
use crate::queueing::{
    arrival_pmf, direct_profile, hybrid_relay_arrival_pmf, relay_arrival_pmf, relay_profile,
    service_counts, source_profile, Pmf, ServiceProfile, SourceTiming,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Relay,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Relay => "relay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub mode: Mode,
    /// Time allocation ratio (1 in direct mode).
    pub alpha: f64,
    /// Operating average SNR `S̄` (linear).
    pub snr: f64,
    pub drop_source: f64,
    pub drop_relay: f64,
    pub qlen_source: f64,
    pub qlen_relay: f64,
    /// Mean delay in slots.
    pub delay: f64,
    /// Per-channel-state delay `D̄_n`, `n = 0..=N`.
    pub delay_per_state: Vec<f64>,
    /// Delivered packets per slot.
    pub throughput: f64,
    pub tx_power_source: f64,
    pub tx_power_relay: f64,
    pub tx_power_direct: f64,
    /// Energy per slot in joules.
    pub energy_per_period: f64,
    /// Delivered packets per joule.
    pub ee: f64,
    pub p_ld: f64,
    pub p_l1: f64,
    pub p_l2: f64,
    pub p0: f64,
}

impl LinkMetrics {
    /// Mean power drawn over a period (W).
    pub fn mean_power(&self, slot_s: f64) -> f64 {
        self.energy_per_period / slot_s
    }
}

/// `E{Δ}/E{a}`: expected overflow per slot over mean arrivals per slot.
pub fn drop_rate(pi: &[f64], chain: &JointChain) -> Result<f64> {
    let mean = chain.arrivals().mean();
    if !(mean > 0.0) {
        return Err(Error::Undefined("drop rate"));
    }
    let (_, drops) = flow(pi, chain);
    Ok((drops / mean).clamp(0.0, 1.0))
}

/// `Q̄^n = Σ_s π_{(n,s)}·s` (unnormalized per-state contribution).
pub fn avg_queue_length(pi: &[f64], chain: &JointChain, state: usize) -> f64 {
    (0..chain.levels())
        .map(|q| pi[chain.index(state, q)] * q as f64)
        .sum()
}

/// Conditional mean queue length given channel state `n`.
fn conditional_queue(pi: &[f64], chain: &JointChain, state: usize) -> f64 {
    let mass: f64 = (0..chain.levels()).map(|q| pi[chain.index(state, q)]).sum();
    if mass > 0.0 {
        avg_queue_length(pi, chain, state) / mass
    } else {
        0.0
    }
}

pub fn relay_throughput(lambda: f64, drop_source: f64, drop_relay: f64, p0: f64, max_tx: u32) -> f64 {
    lambda * (1.0 - drop_source) * (1.0 - drop_relay) * (1.0 - p0.powi(max_tx as i32))
}

pub fn direct_throughput(lambda: f64, drop: f64, p_ld: f64, max_tx: u32, form: DirectThroughput) -> f64 {
    let loss = match form {
        DirectThroughput::Consistent => p_ld.powi(max_tx as i32),
        DirectThroughput::PaperLiteral => (1.0 - p_ld).powi(max_tx as i32),
    };
    lambda * (1.0 - drop) * (1.0 - loss)
}

/// BER per bit that yields packet error `per` for `L`-bit packets.
pub fn ber_from_per(per: f64, packet_bits: u32) -> f64 {
    1.0 - (1.0 - per.clamp(0.0, 1.0)).powf(1.0 / packet_bits as f64)
}

/// `ē(2^b − 1)/(1.5 s)·ln(0.2/ϑ)`; zero when `ϑ ≥ 0.2`.
pub fn instantaneous_power(bits: u32, s: f64, nominal_w: f64, ber: f64) -> f64 {
    if bits == 0 || !(ber < 0.2) {
        return 0.0;
    }
    nominal_w * (2f64.powi(bits as i32) - 1.0) / (1.5 * s) * (0.2 / ber).ln()
}

/// `∫_{S_n}^{S_{n+1}} P_n(s) f(s) ds` for a transmitting state.
pub fn mode_power(state: usize, link: &LinkModel, ber: f64, nominal_w: f64) -> Result<f64> {
    let bits = link.amc.bits(state);
    if bits == 0 {
        return Ok(0.0);
    }
    if !(ber < 0.2) {
        log::warn!(
            "{} state {state}: BER {ber} >= 0.2 makes the power law nonpositive; using 0 W",
            link.label.as_str()
        );
        return Ok(0.0);
    }
    if !(ber > 0.0) {
        return Err(Error::invalid("ber", "must be positive"));
    }
    let (lo, hi) = link.amc.interval(state);
    let f = &link.fading;
    let pdf = |s: f64| crate::channel::gamma_pdf(s, f).unwrap_or(0.0);
    let inv = quadrature::integrate_range(|s| pdf(s) / s, lo, hi, f.scale(), ABS_TOL * 1e-2)?;
    Ok(nominal_w * (2f64.powi(bits as i32) - 1.0) / 1.5 * (0.2 / ber).ln() * inv.value)
}

/// Per-link quantities that do not depend on the time split.
#[derive(Debug, Clone)]
pub struct LinkSummary {
    pub link: LinkModel,
    pub stats: LinkStats,
    pub fsmc: DMatrix<f64>,
    /// Target BER per state (index 0 unused).
    pub ber: Vec<f64>,
    /// Nominal power `ē·S̄` (operating SNR) scaling the power law.
    pub nominal_w: f64,
    /// Average transmit power `Σ_n ∫_{I_n} P_n f ds`.
    pub mean_power: f64,
}

pub fn summarize_link(model: &Model, label: LinkLabel, snr: f64) -> Result<LinkSummary> {
    let link = model.link(label, snr)?;
    link.fading.validate()?;
    let stats = link_stats(&link.amc, &link.fading)?;
    let fsmc = fsmc_transitions(&link.amc, &link.fading)?;
    // S̄ is the transmit-power knob: a link with a weaker path gain sees a
    // lower average SNR for the same nominal power.
    let nominal_w = model.system.ref_power_w * snr;
    let mut ber = vec![0.0; link.amc.n_states()];
    let mut mean_power = 0.0;
    for n in 1..link.amc.n_states() {
        ber[n] = ber_from_per(stats.state_per[n], model.system.packet_bits);
        mean_power += mode_power(n, &link, ber[n], nominal_w)?;
    }
    Ok(LinkSummary {
        link,
        stats,
        fsmc,
        ber,
        nominal_w,
        mean_power,
    })
}

/// Everything about the three links at one operating SNR.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub snr: f64,
    pub source_relay: LinkSummary,
    pub relay_dest: LinkSummary,
    pub direct: LinkSummary,
    pub p_ld: f64,
    pub p_l1: f64,
    pub p_l2: f64,
    pub errors: CombinedError,
}

pub fn snapshot(model: &Model, snr: f64) -> Result<Snapshot> {
    let source_relay = summarize_link(model, LinkLabel::SourceRelay, snr)?;
    let relay_dest = summarize_link(model, LinkLabel::RelayDest, snr)?;
    let direct = summarize_link(model, LinkLabel::SourceDest, snr)?;
    let p_ld = direct.stats.avg_per;
    let p_l1 = match model.options.l1_weighting {
        L1Weighting::InterNode => source_relay.stats.avg_per,
        L1Weighting::Direct => {
            link_stats_weighted(
                &source_relay.link.amc,
                &source_relay.link.fading,
                Some(&direct.stats.state_probs),
            )?
            .avg_per
        }
    };
    let p_l2 = relay_dest.stats.avg_per;
    Ok(Snapshot {
        snr,
        source_relay,
        relay_dest,
        direct,
        p_ld,
        p_l1,
        p_l2,
        errors: combined_error(p_ld, p_l1, p_l2),
    })
}

/// A solved buffer: chain, stationary law and derived flow quantities.
#[derive(Debug, Clone)]
pub struct QueueSolution {
    pub profile: ServiceProfile,
    pub rates: Vec<f64>,
    pub chain: JointChain,
    pub stationary: StationaryDistribution,
    pub drop_rate: f64,
    pub mean_queue: f64,
    /// Mean packets served per slot.
    pub departures: f64,
}

pub fn solve_queue(
    arrivals: &Pmf,
    profile: ServiceProfile,
    channel: &DMatrix<f64>,
    capacity: usize,
) -> Result<QueueSolution> {
    let rates = profile.service_rates()?;
    let counts: Vec<_> = rates.iter().map(|&chi| service_counts(chi, capacity)).collect();
    let chain = build_chain(arrivals, &counts, channel, capacity)?;
    let stationary = stationary(&chain)?;
    let pi = &stationary.pi;
    let (departures, drops) = flow(pi, &chain);
    let mean = arrivals.mean();
    let drop_rate = if mean > 0.0 { (drops / mean).clamp(0.0, 1.0) } else { 0.0 };
    let mean_queue = (0..chain.n_channel())
        .map(|x| avg_queue_length(pi, &chain, x))
        .sum();
    Ok(QueueSolution {
        profile,
        rates,
        chain,
        stationary,
        drop_rate,
        mean_queue,
        departures,
    })
}

fn little_term(queue: f64, rate: f64) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(Error::Undefined("delay rate"));
    }
    if queue == 0.0 {
        Ok(0.0)
    } else if rate > 0.0 {
        Ok(queue / rate)
    } else {
        // packets wait forever when nothing ever leaves
        Ok(f64::INFINITY)
    }
}

/// Mean service time `δ̄` averaged over transmitting states.
fn mean_service_time(profile: &ServiceProfile, probs: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 1..profile.n_states() {
        if probs[n] > 0.0 {
            num += probs[n] * profile.expected_service_time(n)?;
            den += probs[n];
        }
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::DegenerateChannel("no transmitting state".into()))
    }
}

/// Per-state delay `D̄_n` and system delay `D_(T)`, in slots.
///
/// `D̄_n = E[Q_A | n]/r_A + E[Q_R | n]/r_R + E{δ_n}`, where the outage state
/// uses the mean service time. Averaging over the chain's state law gives
/// `D_(T) = E[Q_A]/r_A + E[Q_R]/r_R + δ̄`.
pub fn avg_delay(
    source: &QueueSolution,
    relay: Option<&QueueSolution>,
    source_rate: f64,
    relay_rate: f64,
    state_probs: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let delta_bar = mean_service_time(&source.profile, state_probs)?;
    let n_states = source.chain.n_channel();
    let mut per_state = Vec::with_capacity(n_states);
    for n in 0..n_states {
        let qa = conditional_queue(&source.stationary.pi, &source.chain, n);
        let qr = relay.map_or(0.0, |r| conditional_queue(&r.stationary.pi, &r.chain, n));
        let service = if n == 0 {
            delta_bar
        } else {
            source.profile.expected_service_time(n)?
        };
        per_state.push(little_term(qa, source_rate)? + little_term(qr, relay_rate)? + service);
    }
    let total = little_term(source.mean_queue, source_rate)?
        + relay.map_or(Ok(0.0), |r| little_term(r.mean_queue, relay_rate))?
        + delta_bar;
    Ok((per_state, total))
}

pub fn relay_energy(
    power_source: f64,
    power_relay: f64,
    access_ar: f64,
    access_rd: f64,
    alpha: f64,
    period_s: f64,
    idle_w: f64,
) -> f64 {
    (access_ar * power_source + (1.0 - access_ar) * idle_w) * alpha * period_s
        + (access_rd * power_relay + (1.0 - access_rd) * idle_w) * (1.0 - alpha) * period_s
}

pub fn direct_energy(power: f64, access_ad: f64, period_s: f64, idle_w: f64) -> f64 {
    (access_ad * power + (1.0 - access_ad) * idle_w) * period_s
}

/// Delivered packets per joule from packets per period over joules per period.
pub fn energy_efficiency(throughput: f64, energy: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::Undefined("energy efficiency"));
    }
    Ok(throughput / energy)
}

#[derive(Debug, Clone)]
pub struct RelayEvaluation {
    pub metrics: LinkMetrics,
    pub source: QueueSolution,
    pub relay: QueueSolution,
    pub relay_arrivals: Pmf,
}

pub fn source_timing<'a>(model: &'a Model, snap: &'a Snapshot, bits: &'a [u32]) -> SourceTiming<'a> {
    SourceTiming {
        sys: &model.system,
        bits,
        pr_ar: &snap.source_relay.stats.state_probs,
        pr_ad: &snap.direct.stats.state_probs,
        mean_bits_rd: snap.relay_dest.stats.mean_bits,
        access_ad: model.direct.access.available(),
        access_ar: model.source_relay.access.available(),
        access_rd: model.relay_dest.access.available(),
        p_ld: snap.p_ld,
    }
}

fn state_bits(link: &LinkModel) -> Vec<u32> {
    (0..link.amc.n_states()).map(|n| link.amc.bits(n)).collect()
}

pub fn evaluate_relay(model: &Model, snap: &Snapshot, alpha: f64) -> Result<RelayEvaluation> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must lie in (0, 1)")));
    }
    let sys = &model.system;
    let arrivals = arrival_pmf(&model.traffic)?;
    let bits = state_bits(&snap.source_relay.link);
    let timing = source_timing(model, snap, &bits);
    let src_profile = source_profile(&timing, snap.errors.p1, alpha)?;
    let source = solve_queue(&arrivals, src_profile, &snap.source_relay.fsmc, sys.buffer)?;

    let relay_arrivals = match model.options.relay_arrivals {
        RelayArrivals::Departures => relay_arrival_pmf(&source.chain, &source.stationary)?,
        RelayArrivals::PaperHybrid => hybrid_relay_arrival_pmf(
            &source.rates,
            &snap.source_relay.stats.state_probs,
            model.traffic.mean_rate,
            model.traffic.max_arrivals,
        )?,
    };
    let rel_bits = state_bits(&snap.relay_dest.link);
    let rel_profile = relay_profile(
        sys,
        &rel_bits,
        snap.relay_dest.stats.mean_bits,
        model.relay_dest.access.available(),
        snap.p_l2,
        alpha,
    )?;
    let relay = solve_queue(&relay_arrivals, rel_profile, &snap.relay_dest.fsmc, sys.buffer)?;

    let lambda = model.traffic.mean_rate;
    let pr = &snap.source_relay.stats.state_probs;
    let (source_rate, relay_rate) = match model.options.little_rate {
        LittleRate::Accepted => (source.departures, relay.departures),
        LittleRate::Offered => {
            let chi_bar: f64 = source.rates.iter().zip(pr).map(|(c, p)| c * p).sum();
            (lambda, chi_bar)
        }
    };
    let (delay_per_state, delay) = avg_delay(&source, Some(&relay), source_rate, relay_rate, pr)?;

    let throughput = relay_throughput(
        lambda,
        source.drop_rate,
        relay.drop_rate,
        snap.errors.p0,
        sys.max_tx,
    );
    let energy = relay_energy(
        snap.source_relay.mean_power,
        snap.relay_dest.mean_power,
        model.source_relay.access.available(),
        model.relay_dest.access.available(),
        alpha,
        sys.slot_s,
        sys.idle_power_w,
    );
    let ee = energy_efficiency(throughput, energy)?;
    let metrics = LinkMetrics {
        mode: Mode::Relay,
        alpha,
        snr: snap.snr,
        drop_source: source.drop_rate,
        drop_relay: relay.drop_rate,
        qlen_source: source.mean_queue,
        qlen_relay: relay.mean_queue,
        delay,
        delay_per_state,
        throughput,
        tx_power_source: snap.source_relay.mean_power,
        tx_power_relay: snap.relay_dest.mean_power,
        tx_power_direct: 0.0,
        energy_per_period: energy,
        ee,
        p_ld: snap.p_ld,
        p_l1: snap.p_l1,
        p_l2: snap.p_l2,
        p0: snap.errors.p0,
    };
    Ok(RelayEvaluation {
        metrics,
        source,
        relay,
        relay_arrivals,
    })
}

#[derive(Debug, Clone)]
pub struct DirectEvaluation {
    pub metrics: LinkMetrics,
    pub queue: QueueSolution,
}

pub fn evaluate_direct(model: &Model, snap: &Snapshot) -> Result<DirectEvaluation> {
    let sys = &model.system;
    let arrivals = arrival_pmf(&model.traffic)?;
    let link = &snap.direct;
    let bits = state_bits(&link.link);
    let profile = direct_profile(
        sys,
        &bits,
        &link.stats.state_probs,
        model.direct.access.available(),
        snap.p_ld,
    )?;
    let queue = solve_queue(&arrivals, profile, &link.fsmc, sys.buffer)?;
    let lambda = model.traffic.mean_rate;
    let rate = match model.options.little_rate {
        LittleRate::Accepted => queue.departures,
        LittleRate::Offered => lambda,
    };
    let (delay_per_state, delay) = avg_delay(&queue, None, rate, 0.0, &link.stats.state_probs)?;
    let throughput = direct_throughput(
        lambda,
        queue.drop_rate,
        snap.p_ld,
        sys.max_tx,
        model.options.direct_throughput,
    );
    let energy = direct_energy(
        link.mean_power,
        model.direct.access.available(),
        sys.slot_s,
        sys.idle_power_w,
    );
    let ee = energy_efficiency(throughput, energy)?;
    let metrics = LinkMetrics {
        mode: Mode::Direct,
        alpha: 1.0,
        snr: snap.snr,
        drop_source: queue.drop_rate,
        drop_relay: 0.0,
        qlen_source: queue.mean_queue,
        qlen_relay: 0.0,
        delay,
        delay_per_state,
        throughput,
        tx_power_source: 0.0,
        tx_power_relay: 0.0,
        tx_power_direct: link.mean_power,
        energy_per_period: energy,
        ee,
        p_ld: snap.p_ld,
        p_l1: 0.0,
        p_l2: 0.0,
        p0: snap.p_ld,
    };
    Ok(DirectEvaluation { metrics, queue })
}

/// Relay-mode metrics at `(α, S̄)`.
pub fn relay_metrics(model: &Model, alpha: f64, snr: f64) -> Result<LinkMetrics> {
    Ok(evaluate_relay(model, &snapshot(model, snr)?, alpha)?.metrics)
}

/// Direct-mode metrics at `S̄`.
pub fn direct_metrics(model: &Model, snr: f64) -> Result<LinkMetrics> {
    Ok(evaluate_direct(model, &snapshot(model, snr)?)?.metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn throughput_examples() {
        assert_eq!(relay_throughput(1.5, 0.0, 0.0, 0.0, 6), 1.5);
        assert_eq!(relay_throughput(1.5, 1.0, 0.0, 0.1, 6), 0.0);
        assert_abs_diff_eq!(
            relay_throughput(2.0, 0.1, 0.05, 0.2, 6),
            2.0 * 0.9 * 0.95 * (1.0 - 0.2f64.powi(6)),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(relay_throughput(2.0, 0.1, 0.05, 0.2, 6), 1.70989, epsilon = 1e-5);
    }

    #[test]
    fn energy_examples() {
        assert_abs_diff_eq!(relay_energy(2.0, 2.0, 1.0, 1.0, 0.3, 1.0, 0.1), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(relay_energy(2.0, 1.0, 0.0, 0.0, 0.3, 1.0, 0.1), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(relay_energy(2.0, 1.0, 0.8, 0.6, 0.5, 1.0, 0.1), 1.13, epsilon = 1e-15);
        assert_abs_diff_eq!(direct_energy(2.0, 0.5, 2.0, 0.1), 2.1, epsilon = 1e-15);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(energy_efficiency(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(energy_efficiency(1.0, 2.0).unwrap(), energy_efficiency(2.0, 4.0).unwrap());
        assert!(energy_efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn power_law_examples() {
        assert_eq!(instantaneous_power(2, 1.0, 1.0, 0.2), 0.0);
        assert_abs_diff_eq!(
            instantaneous_power(2, 1.0, 1.0, 0.2 / std::f64::consts::E),
            2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn drop_examples() {
        // deterministic single arrival, no service, no room
        let ch = DMatrix::identity(1, 1);
        let c = build_chain(&Pmf::point(1), &[vec![(0, 1.0)]], &ch, 0).unwrap();
        assert_eq!(drop_rate(&[1.0], &c).unwrap(), 1.0);
        // room for everything that can ever queue
        let arr = Pmf::new(vec![0.5, 0.5]).unwrap();
        let c = build_chain(&arr, &[vec![(1, 1.0)]], &ch, 1).unwrap();
        let s = stationary(&c).unwrap();
        assert_eq!(drop_rate(&s.pi, &c).unwrap(), 0.0);
        let c = build_chain(&Pmf::point(0), &[vec![(0, 1.0)]], &ch, 2).unwrap();
        assert!(drop_rate(&[1.0, 0.0, 0.0], &c).is_err());
    }

    #[test]
    fn queue_length_examples() {
        let ch = DMatrix::identity(2, 2);
        let c = build_chain(&Pmf::point(0), &[vec![(0, 1.0)], vec![(0, 1.0)]], &ch, 4).unwrap();
        let mut pi = vec![0.0; 10];
        pi[0] = 1.0;
        assert_eq!(avg_queue_length(&pi, &c, 0), 0.0);
        let uniform = vec![0.1; 10];
        assert_abs_diff_eq!(avg_queue_length(&uniform, &c, 1), 0.5 * 4.0 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_queues_leave_service_time() {
        let ch = DMatrix::identity(2, 2);
        let c = build_chain(&Pmf::point(0), &[vec![(0, 1.0)], vec![(1, 1.0)]], &ch, 3).unwrap();
        let mut pi = vec![0.0; 8];
        pi[4] = 1.0;
        let profile = ServiceProfile {
            eps: vec![f64::INFINITY, 0.4],
            eps_bar: 0.4,
            p_err: 0.0,
            max_tx: 3,
            share: 0.5,
        };
        let q = QueueSolution {
            rates: profile.service_rates().unwrap(),
            profile,
            chain: c,
            stationary: StationaryDistribution {
                pi,
                residual: 0.0,
                method: crate::markov::SolveMethod::Dense,
            },
            drop_rate: 0.0,
            mean_queue: 0.0,
            departures: 0.0,
        };
        let (per_state, total) = avg_delay(&q, None, 1.0, 1.0, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(per_state[1], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(total, 0.4, epsilon = 1e-15);
    }
}
