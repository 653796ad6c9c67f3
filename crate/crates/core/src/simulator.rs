//! Slot-level Monte Carlo simulation of the relay-assisted and direct systems.
//!
//! Channels follow each link's FSMC once per slot, with the SNR inside a
//! state drawn from the conditional Gamma law. Spectrum availability is a
//! continuous-time two-state process with exponential holding times. A
//! packet's airtime is work that only progresses while the link it is on is
//! available, inside its node's share of the period. Attempt errors are
//! independent draws with the model's per-attempt error probabilities.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::DMatrix;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Poisson};
use serde::Serialize;

use crate::channel::{FadingModel, LinkModel, SpectrumAccess};
use crate::error::{Error, Result};
use rayon::prelude::*;

use crate::metrics::{evaluate_direct, evaluate_relay, instantaneous_power, snapshot, LinkMetrics, LinkSummary, Mode, Snapshot};
use crate::model::Model;
use crate::queueing::TrafficModel;

const QUANTILES: usize = 128;

/// Conditional SNR quantiles per channel state for inverse-CDF sampling.
#[derive(Debug, Clone)]
struct SnrTable {
    table: Vec<Vec<f64>>,
}

impl SnrTable {
    fn new(link: &LinkModel) -> Self {
        let f = &link.fading;
        let table = (0..link.amc.n_states())
            .map(|n| {
                let (lo, hi) = link.amc.interval(n);
                let (q_lo, q_hi) = (f.survival(lo), f.survival(hi));
                (0..=QUANTILES)
                    .map(|k| {
                        let mut u = k as f64 / QUANTILES as f64;
                        if !hi.is_finite() {
                            // keep the unbounded top state's last node finite
                            u = u.min(1.0 - 0.5 / QUANTILES as f64);
                        }
                        let target = (1.0 - u) * q_lo + u * q_hi;
                        invert_survival(f, target, lo, hi).clamp(lo, hi)
                    })
                    .collect()
            })
            .collect();
        Self { table }
    }

    fn sample(&self, state: usize, u: f64) -> f64 {
        let t = &self.table[state];
        let x = u * QUANTILES as f64;
        let k = (x.floor() as usize).min(QUANTILES - 1);
        let w = x - k as f64;
        t[k] * (1.0 - w) + t[k + 1] * w
    }
}

/// `s` in `[lo, hi]` with survival `target`, by bisection.
fn invert_survival(f: &FadingModel, target: f64, lo: f64, hi: f64) -> f64 {
    let mut a = lo;
    let mut b = if hi.is_finite() { hi } else { lo.max(f.avg_snr) * 2.0 + 1.0 };
    while f.survival(b) > target {
        a = b;
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f.survival(m) > target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-12 * b {
            break;
        }
    }
    0.5 * (a + b)
}

/// Two-state availability process simulated in continuous time.
#[derive(Debug)]
struct Access {
    available: bool,
    /// Absolute time (s) of the next toggle; infinite for always-on spectrum.
    next: f64,
    last: f64,
    cum_available: f64,
    to_available: Option<Exp<f64>>,
    to_unavailable: Option<Exp<f64>>,
}

impl Access {
    fn new(spec: &SpectrumAccess, rng: &mut ChaCha8Rng) -> Result<Self> {
        if spec.u == 0.0 {
            return Ok(Self {
                available: true,
                next: f64::INFINITY,
                last: 0.0,
                cum_available: 0.0,
                to_available: None,
                to_unavailable: None,
            });
        }
        let exp = |rate: f64| Exp::new(rate).map_err(|_| Error::invalid("access", "rates must be positive"));
        let to_available = exp(spec.q)?;
        let to_unavailable = exp(spec.u)?;
        let available = rng.gen::<f64>() < spec.available();
        let next = if available {
            to_unavailable.sample(rng)
        } else {
            to_available.sample(rng)
        };
        Ok(Self {
            available,
            next,
            last: 0.0,
            cum_available: 0.0,
            to_available: Some(to_available),
            to_unavailable: Some(to_unavailable),
        })
    }

    /// Advance the process to absolute time `t`.
    fn sync(&mut self, t: f64, rng: &mut ChaCha8Rng) {
        if t <= self.last {
            return;
        }
        while self.next <= t {
            if self.available {
                self.cum_available += self.next - self.last;
            }
            self.last = self.next;
            self.available = !self.available;
            let d = if self.available {
                self.to_unavailable.as_ref().map(|e| e.sample(rng))
            } else {
                self.to_available.as_ref().map(|e| e.sample(rng))
            };
            self.next += d.unwrap_or(f64::INFINITY);
        }
        if self.available {
            self.cum_available += t - self.last;
        }
        self.last = t;
    }
}

/// One link's fading state and spectrum.
struct LinkSim {
    state: usize,
    snr: f64,
    fsmc: DMatrix<f64>,
    table: SnrTable,
    access: Access,
    bits: Vec<u32>,
    ber: Vec<f64>,
    nominal_w: f64,
}

impl LinkSim {
    fn new(summary: &LinkSummary, fade_rng: &mut ChaCha8Rng, access_rng: &mut ChaCha8Rng) -> Result<Self> {
        let link = &summary.link;
        let probs = &summary.stats.state_probs;
        let state = draw_index(probs, fade_rng.gen());
        let table = SnrTable::new(link);
        let snr = table.sample(state, fade_rng.gen());
        Ok(Self {
            state,
            snr,
            fsmc: summary.fsmc.clone(),
            table,
            access: Access::new(&link.access, access_rng)?,
            bits: (0..link.amc.n_states()).map(|n| link.amc.bits(n)).collect(),
            ber: summary.ber.clone(),
            nominal_w: summary.nominal_w,
        })
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) {
        let row: Vec<f64> = self.fsmc.row(self.state).iter().copied().collect();
        self.state = draw_index(&row, rng.gen());
        self.snr = self.table.sample(self.state, rng.gen());
    }

    fn power(&self) -> f64 {
        instantaneous_power(self.bits[self.state], self.snr, self.nominal_w, self.ber[self.state])
    }
}

fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    /// Absolute arrival time (s).
    born: f64,
    /// Still deliverable (no hop has given up on it).
    ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Direct,
    ToRelay,
    Forward,
}

/// Attempt in progress at the source or relay.
#[derive(Debug, Clone, Copy)]
struct Attempt {
    packet: Packet,
    stage: Stage,
    /// Remaining transmit time (s) in the current stage.
    work: f64,
    succeeded: bool,
    tries: u32,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub mode: Mode,
    pub alpha: f64,
    /// Operating SNR (linear).
    pub snr: f64,
    pub slots: u64,
    pub warmup: u64,
    pub seed: u64,
    pub batches: usize,
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub mode: Mode,
    pub alpha: f64,
    pub snr: f64,
    pub seed: u64,
    pub slots: u64,
    pub arrivals: u64,
    pub delivered: u64,
    pub dropped_source: u64,
    pub dropped_relay: u64,
    pub lost_errors: u64,
    pub in_system: u64,
    pub relay_arrivals: u64,
    pub drop_source: f64,
    pub drop_relay: f64,
    pub throughput: f64,
    pub energy_per_period: f64,
    pub ee: f64,
    /// Mean sojourn of delivered packets, in slots.
    pub delay: f64,
    /// Time-average spectrum availability for A,R / R,D / A,D.
    pub availability: [f64; 3],
    /// Joint (channel state, buffer level) occupancy of the first-hop buffer,
    /// in the analytic chain's state order.
    pub occupancy: Vec<f64>,
    pub ee_batches: Vec<f64>,
    pub conservation_ok: bool,
}

impl SimReport {
    /// Half-width of a 95% confidence interval from the batch means.
    pub fn ee_half_width(&self) -> f64 {
        let n = self.ee_batches.len() as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let mean = self.ee_batches.iter().sum::<f64>() / n;
        let var = self.ee_batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    }
}

struct Arrivals {
    pmf_cap: usize,
    poisson: Vec<Poisson<f64>>,
    switch: Vec<Vec<f64>>,
    phase: usize,
}

impl Arrivals {
    fn new(traffic: &TrafficModel, rng: &mut ChaCha8Rng) -> Result<Self> {
        let (rates, switch, phase) = match &traffic.mmpp {
            Some(m) => {
                let pi = m.stationary();
                let phase = draw_index(&pi, rng.gen());
                (m.rates.clone(), m.switch.clone(), phase)
            }
            None => (vec![traffic.mean_rate], vec![vec![1.0]], 0),
        };
        let poisson = rates
            .iter()
            .map(|&r| Poisson::new(r.max(1e-300)).map_err(|_| Error::invalid("lambda", "invalid Poisson rate")))
            .collect::<Result<_>>()?;
        Ok(Self {
            pmf_cap: traffic.max_arrivals,
            poisson,
            switch,
            phase,
        })
    }

    /// Arrivals in one slot: truncated Poisson by rejection, then the MMPP phase moves.
    fn draw(&mut self, rng: &mut ChaCha8Rng) -> usize {
        let k = loop {
            let k = self.poisson[self.phase].sample(rng) as usize;
            if k <= self.pmf_cap {
                break k;
            }
        };
        if self.switch.len() > 1 {
            self.phase = draw_index(&self.switch[self.phase], rng.gen());
        }
        k
    }
}

/// Independent random streams, one per subsystem.
struct Streams {
    arrivals: ChaCha8Rng,
    fading: [ChaCha8Rng; 3],
    access: [ChaCha8Rng; 3],
    errors: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            arrivals: stream(1),
            fading: [stream(2), stream(3), stream(4)],
            access: [stream(5), stream(6), stream(7)],
            errors: stream(8),
        }
    }
}

const AR: usize = 0;
const RD: usize = 1;
const AD: usize = 2;

struct Sim<'a> {
    model: &'a Model,
    snap: &'a Snapshot,
    opts: &'a SimOptions,
    links: [LinkSim; 3],
    streams: Streams,
    arrivals: Arrivals,
    source: VecDeque<Packet>,
    relay: VecDeque<Packet>,
    src_attempt: Option<Attempt>,
    rel_attempt: Option<Attempt>,
    src_tries: u32,
    rel_tries: u32,
    work_per_bit: f64,
    mean_bits_rd: f64,
}

/// Per-slot tallies.
#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    arrivals: u64,
    delivered: u64,
    dropped_source: u64,
    dropped_relay: u64,
    lost_errors: u64,
    relay_arrivals: u64,
    /// Relay overflows of packets the source had already given up on.
    dropped_doomed: u64,
    sojourn: f64,
    energy: f64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.arrivals += o.arrivals;
        self.delivered += o.delivered;
        self.dropped_source += o.dropped_source;
        self.dropped_relay += o.dropped_relay;
        self.lost_errors += o.lost_errors;
        self.relay_arrivals += o.relay_arrivals;
        self.dropped_doomed += o.dropped_doomed;
        self.sojourn += o.sojourn;
        self.energy += o.energy;
    }
}

impl<'a> Sim<'a> {
    fn new(model: &'a Model, snap: &'a Snapshot, opts: &'a SimOptions) -> Result<Self> {
        let mut streams = Streams::new(opts.seed);
        let summaries = [&snap.source_relay, &snap.relay_dest, &snap.direct];
        let mut links = Vec::with_capacity(3);
        for (i, s) in summaries.iter().enumerate() {
            let (f, a) = (&mut streams.fading[i], &mut streams.access[i]);
            links.push(LinkSim::new(s, f, a)?);
        }
        let links: [LinkSim; 3] = links.try_into().map_err(|_| Error::Shape("three links".into()))?;
        let arrivals = Arrivals::new(&model.traffic, &mut streams.arrivals)?;
        let sys = &model.system;
        Ok(Self {
            model,
            snap,
            opts,
            links,
            streams,
            arrivals,
            source: VecDeque::new(),
            relay: VecDeque::new(),
            src_attempt: None,
            rel_attempt: None,
            src_tries: 0,
            rel_tries: 0,
            work_per_bit: sys.packet_bits as f64 / sys.symbol_rate_hz,
            mean_bits_rd: snap.relay_dest.stats.mean_bits,
        })
    }

    fn first_hop(&self) -> usize {
        match self.opts.mode {
            Mode::Relay => AR,
            Mode::Direct => AD,
        }
    }

    fn start_source_attempt(&mut self, packet: Packet, tries: u32) -> Option<Attempt> {
        let hop = self.first_hop();
        let bits = self.links[hop].bits[self.links[hop].state];
        if bits == 0 {
            return None;
        }
        let bits = bits as f64;
        let rng = &mut self.streams.errors;
        let direct_ok = rng.gen::<f64>() >= self.snap.p_ld;
        let (stage, succeeded) = match self.opts.mode {
            Mode::Direct => (Stage::Direct, direct_ok),
            Mode::Relay if direct_ok => (Stage::Direct, true),
            Mode::Relay => (Stage::ToRelay, rng.gen::<f64>() >= self.snap.p_l1),
        };
        Some(Attempt {
            packet,
            stage,
            work: self.work_per_bit / bits,
            succeeded,
            tries,
        })
    }

    fn start_relay_attempt(&mut self, packet: Packet, tries: u32) -> Option<Attempt> {
        let bits = self.links[RD].bits[self.links[RD].state];
        if bits == 0 {
            return None;
        }
        let succeeded = self.streams.errors.gen::<f64>() >= self.snap.p_l2;
        Some(Attempt {
            packet,
            stage: Stage::Forward,
            work: self.work_per_bit / bits as f64,
            succeeded,
            tries,
        })
    }

    fn stage_link(stage: Stage) -> usize {
        match stage {
            Stage::Direct => AD,
            Stage::ToRelay => AR,
            Stage::Forward => RD,
        }
    }

    /// Progress `attempt` over `[t, end)`; returns the finish time if it completes.
    fn progress(&mut self, attempt: &mut Attempt, mut t: f64, end: f64) -> Option<f64> {
        loop {
            let li = Self::stage_link(attempt.stage);
            let link = &mut self.links[li];
            link.access.sync(t, &mut self.streams.access[li]);
            if link.access.available {
                let until = link.access.next.min(end);
                if t + attempt.work <= until {
                    t += attempt.work;
                    attempt.work = 0.0;
                    // the source's relay path continues with the forwarding leg
                    if attempt.stage == Stage::ToRelay {
                        attempt.stage = Stage::Forward;
                        attempt.work = self.work_per_bit / self.mean_bits_rd;
                        if attempt.work.is_finite() {
                            continue;
                        }
                        return None;
                    }
                    return Some(t);
                }
                attempt.work -= until - t;
                t = until;
            } else {
                t = link.access.next.min(end);
            }
            if t >= end {
                return None;
            }
        }
    }

    /// Source service inside `[start, end)`; departures go to `out`.
    fn serve_source(&mut self, start: f64, end: f64, tally: &mut Tally, out: &mut Vec<Packet>) {
        let mut t = start;
        while t < end {
            let mut attempt = match self.src_attempt.take() {
                Some(a) => a,
                None => {
                    let Some(&packet) = self.source.front() else { break };
                    match self.start_source_attempt(packet, self.src_tries + 1) {
                        Some(a) => a,
                        None => break,
                    }
                }
            };
            let Some(done) = self.progress(&mut attempt, t, end) else {
                self.src_attempt = Some(attempt);
                break;
            };
            t = done;
            if attempt.succeeded || attempt.tries > self.model.system.max_tx {
                self.source.pop_front();
                self.src_tries = 0;
                let mut packet = attempt.packet;
                if !attempt.succeeded {
                    tally.lost_errors += 1;
                    packet.ok = false;
                }
                out.push(packet);
            } else {
                self.src_tries = attempt.tries;
            }
        }
    }

    /// Relay service inside `[start, end)`.
    fn serve_relay(&mut self, start: f64, end: f64, tally: &mut Tally) {
        let mut t = start;
        while t < end {
            let mut attempt = match self.rel_attempt.take() {
                Some(a) => a,
                None => {
                    let Some(&packet) = self.relay.front() else { break };
                    match self.start_relay_attempt(packet, self.rel_tries + 1) {
                        Some(a) => a,
                        None => break,
                    }
                }
            };
            let Some(done) = self.progress(&mut attempt, t, end) else {
                self.rel_attempt = Some(attempt);
                break;
            };
            t = done;
            if attempt.succeeded || attempt.tries > self.model.system.max_tx {
                self.relay.pop_front();
                self.rel_tries = 0;
                if attempt.succeeded && attempt.packet.ok {
                    self.deliver(attempt.packet, done, tally);
                } else if !attempt.succeeded && attempt.packet.ok {
                    tally.lost_errors += 1;
                }
            } else {
                self.rel_tries = attempt.tries;
            }
        }
    }

    fn deliver(&self, packet: Packet, at: f64, tally: &mut Tally) {
        tally.delivered += 1;
        tally.sojourn += (at - packet.born) / self.model.system.slot_s;
    }

    /// Advance link `li`'s availability to `t`; returns its cumulative available time.
    fn sync(&mut self, li: usize, t: f64) -> f64 {
        let access = &mut self.links[li].access;
        access.sync(t, &mut self.streams.access[li]);
        access.cum_available
    }

    /// Energy of a window on link `li` with `on` seconds of availability.
    fn window_energy(&self, li: usize, len: f64, on: f64) -> f64 {
        on * self.links[li].power() + (len - on) * self.model.system.idle_power_w
    }

    fn slot(&mut self, k: u64, tally: &mut Tally) {
        let period = self.model.system.slot_s;
        let t0 = k as f64 * period;
        let t1 = t0 + period;
        let mut departed = Vec::new();
        match self.opts.mode {
            Mode::Relay => {
                let split = t0 + self.opts.alpha * period;
                let before = self.sync(AR, t0);
                self.serve_source(t0, split, tally, &mut departed);
                let on = self.sync(AR, split) - before;
                tally.energy += self.window_energy(AR, split - t0, on);
                let before = self.sync(RD, split);
                self.serve_relay(split, t1, tally);
                let on = self.sync(RD, t1) - before;
                tally.energy += self.window_energy(RD, t1 - split, on);
            }
            Mode::Direct => {
                let before = self.sync(AD, t0);
                self.serve_source(t0, t1, tally, &mut departed);
                let on = self.sync(AD, t1) - before;
                tally.energy += self.window_energy(AD, period, on);
                for p in departed.drain(..) {
                    if p.ok {
                        self.deliver(p, t1, tally);
                    }
                }
            }
        }
        // end of slot: the relay takes the source's departures, then new arrivals
        let cap = self.model.system.buffer;
        for p in departed {
            tally.relay_arrivals += 1;
            if self.relay.len() < cap {
                self.relay.push_back(p);
            } else {
                tally.dropped_relay += 1;
                tally.dropped_doomed += u64::from(!p.ok);
            }
        }
        let n = self.arrivals.draw(&mut self.streams.arrivals);
        tally.arrivals += n as u64;
        for _ in 0..n {
            if self.source.len() < cap {
                self.source.push_back(Packet { born: t1, ok: true });
            } else {
                tally.dropped_source += 1;
            }
        }
        for (li, link) in self.links.iter_mut().enumerate() {
            link.step(&mut self.streams.fading[li]);
        }
    }

    fn in_system(&self) -> u64 {
        (self.source.len() + self.relay.len()) as u64
    }

    /// Queued packets that can still be delivered.
    fn live(&self) -> u64 {
        (self.source.len() + self.relay.iter().filter(|p| p.ok).count()) as u64
    }
}

/// Run one seeded simulation. `trace`, when given, receives one CSV row per
/// measured slot: first-hop and relay-hop channel states and availability at
/// slot start (the first hop is A→D in direct mode), queue lengths at slot
/// end, packets delivered and energy spent in the slot.
pub fn run(model: &Model, opts: &SimOptions, mut trace: Option<&mut dyn Write>) -> Result<SimReport> {
    model.validate()?;
    if opts.slots == 0 {
        return Err(Error::invalid("slots", "must be positive"));
    }
    if opts.mode == Mode::Relay && !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("{} must lie in (0, 1)", opts.alpha)));
    }
    let snap = snapshot(model, opts.snr)?;
    let mut sim = Sim::new(model, &snap, opts)?;
    let mut scratch = Tally::default();
    for k in 0..opts.warmup {
        sim.slot(k, &mut scratch);
    }
    let levels = model.system.buffer + 1;
    let first = sim.first_hop();
    let n_states = sim.links[first].bits.len();
    let mut occupancy = vec![0.0; n_states * levels];
    let batches = opts.batches.max(1);
    let batch_len = (opts.slots / batches as u64).max(1);
    let mut ee_batches = Vec::with_capacity(batches);
    let mut batch = Tally::default();
    let mut total = Tally::default();
    let start_live = sim.live();
    let t_start = opts.warmup as f64 * model.system.slot_s;
    let avail_start = [sim.sync(AR, t_start), sim.sync(RD, t_start), sim.sync(AD, t_start)];
    let period = model.system.slot_s;
    let ee_of = |t: &Tally| if t.energy > 0.0 { t.delivered as f64 / t.energy } else { 0.0 };
    if let Some(w) = trace.as_deref_mut() {
        writeln!(w, "slot,chan_src,chan_rly,avail_ar,avail_rd,q_src,q_rly,tx_ok,energy_j").map_err(trace_err)?;
    }
    for i in 0..opts.slots {
        let k = opts.warmup + i;
        let x = sim.links[first].state;
        occupancy[x * levels + sim.source.len().min(levels - 1)] += 1.0;
        let t0 = k as f64 * period;
        let start = trace.is_some().then(|| {
            sim.sync(first, t0);
            sim.sync(RD, t0);
            (x, sim.links[RD].state, sim.links[first].access.available, sim.links[RD].access.available)
        });
        let mut t = Tally::default();
        sim.slot(k, &mut t);
        if let (Some(w), Some((xs, xr, a_src, a_rly))) = (trace.as_deref_mut(), start) {
            writeln!(
                w,
                "{k},{xs},{xr},{},{},{},{},{},{}",
                u8::from(a_src),
                u8::from(a_rly),
                sim.source.len(),
                sim.relay.len(),
                t.delivered,
                crate::report::fmt_sig(t.energy)
            )
            .map_err(trace_err)?;
        }
        batch.add(&t);
        total.add(&t);
        if (i + 1) % batch_len == 0 && ee_batches.len() < batches {
            ee_batches.push(ee_of(&batch));
            batch = Tally::default();
        }
    }
    let t_end = (opts.warmup + opts.slots) as f64 * period;
    let span = t_end - t_start;
    let availability = [
        (sim.sync(AR, t_end) - avail_start[0]) / span,
        (sim.sync(RD, t_end) - avail_start[1]) / span,
        (sim.sync(AD, t_end) - avail_start[2]) / span,
    ];
    let slots = opts.slots as f64;
    occupancy.iter_mut().for_each(|o| *o /= slots);
    let in_system = sim.in_system();
    let conserved = start_live + total.arrivals
        == total.delivered
            + total.dropped_source
            + (total.dropped_relay - total.dropped_doomed)
            + total.lost_errors
            + sim.live();
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(SimReport {
        mode: opts.mode,
        alpha: if opts.mode == Mode::Relay { opts.alpha } else { 1.0 },
        snr: opts.snr,
        seed: opts.seed,
        slots: opts.slots,
        arrivals: total.arrivals,
        delivered: total.delivered,
        dropped_source: total.dropped_source,
        dropped_relay: total.dropped_relay,
        lost_errors: total.lost_errors,
        in_system,
        relay_arrivals: total.relay_arrivals,
        drop_source: ratio(total.dropped_source, total.arrivals),
        drop_relay: ratio(total.dropped_relay, total.relay_arrivals),
        throughput: total.delivered as f64 / slots,
        energy_per_period: total.energy / slots,
        ee: ee_of(&total),
        delay: if total.delivered > 0 { total.sojourn / total.delivered as f64 } else { f64::INFINITY },
        availability,
        occupancy,
        ee_batches,
        conservation_ok: conserved,
    })
}

fn trace_err(source: std::io::Error) -> Error {
    Error::Io { path: "trace".into(), source }
}

/// Tolerances for analytic-vs-simulated comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ee_rel: f64,
    pub drop_rel: f64,
    /// Absolute drop tolerance used when the analytic drop is below `drop_floor`.
    pub drop_abs: f64,
    pub drop_floor: f64,
    pub occupancy_l1: f64,
    pub availability_abs: f64,
    pub delay_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ee_rel: 0.10,
            drop_rel: 0.10,
            drop_abs: 0.02,
            drop_floor: 0.05,
            occupancy_l1: 0.05,
            availability_abs: 0.01,
            delay_rel: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub metric: String,
    pub analytic: f64,
    pub simulated: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub checks: Vec<Check>,
}

impl Validation {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.metric.as_str()).collect()
    }
}

/// Analytic side of a comparison.
#[derive(Debug, Clone)]
pub struct Analytic {
    pub metrics: LinkMetrics,
    /// Stationary law of the first-hop chain.
    pub occupancy: Vec<f64>,
    /// Stationary availability of A,R / R,D / A,D.
    pub availability: [f64; 3],
}

impl Analytic {
    pub fn evaluate(model: &Model, mode: Mode, alpha: f64, snr: f64) -> Result<Self> {
        let snap = snapshot(model, snr)?;
        let (metrics, occupancy) = match mode {
            Mode::Relay => {
                let e = evaluate_relay(model, &snap, alpha)?;
                (e.metrics, e.source.stationary.pi)
            }
            Mode::Direct => {
                let e = evaluate_direct(model, &snap)?;
                (e.metrics, e.queue.stationary.pi)
            }
        };
        let a = |l: &LinkSummary| l.link.access.available();
        Ok(Self {
            metrics,
            occupancy,
            availability: [a(&snap.source_relay), a(&snap.relay_dest), a(&snap.direct)],
        })
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Compare analysis against seeded runs averaged over seeds.
pub fn validate(analytic: &Analytic, sims: &[SimReport], tol: &Tolerances) -> Result<Validation> {
    let m = &analytic.metrics;
    if sims.is_empty() {
        return Err(Error::Comparability("no simulation runs".into()));
    }
    for r in sims {
        let same_alpha = m.mode == Mode::Direct || (r.alpha - m.alpha).abs() <= 1e-12;
        if r.mode != m.mode || !same_alpha || (r.snr - m.snr).abs() > 1e-12 * m.snr.abs().max(1.0) {
            return Err(Error::Comparability(format!(
                "simulated {} at alpha {} snr {} vs analytic {} at alpha {} snr {}",
                r.mode.as_str(),
                r.alpha,
                r.snr,
                m.mode.as_str(),
                m.alpha,
                m.snr
            )));
        }
        if r.occupancy.len() != analytic.occupancy.len() {
            return Err(Error::Comparability(format!(
                "occupancy has {} states, analytic chain has {}",
                r.occupancy.len(),
                analytic.occupancy.len()
            )));
        }
    }
    let mut checks = Vec::new();
    let rel = |metric: &str, a: f64, s: f64, t: f64| {
        let gap = if a == s { 0.0 } else { (s - a).abs() / a.abs() };
        Check { metric: metric.into(), analytic: a, simulated: s, gap, tolerance: t, pass: gap <= t }
    };
    let drop = |metric: &str, a: f64, s: f64| {
        if a < tol.drop_floor {
            let gap = (s - a).abs();
            Check { metric: metric.into(), analytic: a, simulated: s, gap, tolerance: tol.drop_abs, pass: gap <= tol.drop_abs }
        } else {
            rel(metric, a, s, tol.drop_rel)
        }
    };
    checks.push(rel("ee", m.ee, mean(sims.iter().map(|r| r.ee)), tol.ee_rel));
    checks.push(drop("drop_source", m.drop_source, mean(sims.iter().map(|r| r.drop_source))));
    if m.mode == Mode::Relay {
        checks.push(drop("drop_relay", m.drop_relay, mean(sims.iter().map(|r| r.drop_relay))));
    }
    checks.push(rel("delay", m.delay, mean(sims.iter().map(|r| r.delay)), tol.delay_rel));
    let l1: f64 = analytic
        .occupancy
        .iter()
        .enumerate()
        .map(|(i, p)| (p - mean(sims.iter().map(|r| r.occupancy[i]))).abs())
        .sum();
    checks.push(Check {
        metric: "occupancy_l1".into(),
        analytic: 0.0,
        simulated: l1,
        gap: l1,
        tolerance: tol.occupancy_l1,
        pass: l1 <= tol.occupancy_l1,
    });
    let used: &[(usize, &str)] = match m.mode {
        Mode::Relay => &[(AR, "availability_AR"), (RD, "availability_RD")],
        Mode::Direct => &[(AD, "availability_AD")],
    };
    for &(li, name) in used {
        let a = analytic.availability[li];
        let s = mean(sims.iter().map(|r| r.availability[li]));
        let gap = (s - a).abs();
        checks.push(Check {
            metric: name.into(),
            analytic: a,
            simulated: s,
            gap,
            tolerance: tol.availability_abs,
            pass: gap <= tol.availability_abs,
        });
    }
    checks.push(Check {
        metric: "conservation".into(),
        analytic: 1.0,
        simulated: sims.iter().all(|r| r.conservation_ok) as u8 as f64,
        gap: 0.0,
        tolerance: 0.0,
        pass: sims.iter().all(|r| r.conservation_ok),
    });
    Ok(Validation { checks })
}

/// Run `seeds` simulations of `slots` slots and validate them against the analysis.
pub fn compare(
    model: &Model,
    opts: &SimOptions,
    seeds: &[u64],
    tol: &Tolerances,
) -> Result<(Analytic, Vec<SimReport>, Validation)> {
    let analytic = Analytic::evaluate(model, opts.mode, opts.alpha, opts.snr)?;
    let sims = seeds
        .par_iter()
        .map(|&seed| run(model, &SimOptions { seed, ..opts.clone() }, None))
        .collect::<Result<Vec<_>>>()?;
    let v = validate(&analytic, &sims, tol)?;
    Ok((analytic, sims, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::db_to_linear;

    fn opts(mode: Mode, db: f64, slots: u64, seed: u64) -> SimOptions {
        SimOptions {
            mode,
            alpha: 0.5,
            snr: db_to_linear(db),
            slots,
            warmup: 1_000,
            seed,
            batches: 20,
        }
    }

    #[test]
    fn availability_fraction_of_exponential_process() {
        let spec = SpectrumAccess::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = Access::new(&spec, &mut rng).unwrap();
        let horizon = 20_000.0;
        a.sync(horizon, &mut rng);
        assert!((a.cum_available / horizon - 2.0 / 3.0).abs() < 0.01, "{}", a.cum_available / horizon);
    }

    #[test]
    fn sync_never_runs_backwards() {
        let spec = SpectrumAccess::new(50.0, 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = Access::new(&spec, &mut rng).unwrap();
        a.sync(1.0, &mut rng);
        let before = a.cum_available;
        a.sync(0.5, &mut rng);
        assert_eq!(a.cum_available, before);
    }

    #[test]
    fn snr_samples_stay_in_their_state() {
        let model = Model::paper_default();
        let snap = snapshot(&model, db_to_linear(5.0)).unwrap();
        let link = &snap.source_relay.link;
        let table = SnrTable::new(link);
        for n in 0..link.amc.n_states() {
            let (lo, hi) = link.amc.interval(n);
            for k in 0..=20 {
                let s = table.sample(n, k as f64 / 20.0 * 0.999_999);
                assert!(s >= lo * (1.0 - 1e-9) && s <= hi * (1.0 + 1e-9), "state {n}: {s} not in [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn zero_arrivals_leave_counters_empty() {
        let model = Model::paper_default().with_lambda(0.0);
        let o = opts(Mode::Relay, 5.0, 50_000, 3);
        let r = run(&model, &o, None).unwrap();
        assert_eq!((r.arrivals, r.delivered, r.dropped_source, r.dropped_relay, r.lost_errors), (0, 0, 0, 0, 0));
        assert_eq!(r.in_system, 0);
        // energy is charged per active window whether or not a packet is queued
        let analytic = Model::paper_default();
        let snap = snapshot(&analytic, o.snr).unwrap();
        let e = evaluate_relay(&analytic, &snap, 0.5).unwrap().metrics.energy_per_period;
        assert!((r.energy_per_period / e - 1.0).abs() < 0.05, "{} vs {e}", r.energy_per_period);
    }

    #[test]
    fn lossless_regime_delivers_everything() {
        let mut model = Model::paper_default().with_lambda(0.3);
        for l in [&mut model.source_relay, &mut model.relay_dest, &mut model.direct] {
            l.access = SpectrumAccess::always();
        }
        for mode in [Mode::Relay, Mode::Direct] {
            let r = run(&model, &opts(mode, 30.0, 50_000, 5), None).unwrap();
            assert_eq!(r.dropped_source + r.dropped_relay, 0);
            assert!(r.delivered as f64 >= 0.999 * (r.arrivals - r.in_system) as f64);
            assert!(r.conservation_ok);
        }
    }

    #[test]
    fn same_seed_same_report() {
        let model = Model::paper_default();
        let o = opts(Mode::Relay, 10.0, 20_000, 11);
        let a = run(&model, &o, None).unwrap();
        let b = run(&model, &o, None).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let c = run(&model, &SimOptions { seed: 12, ..o }, None).unwrap();
        assert_ne!(format!("{a:?}"), format!("{c:?}"));
    }

    #[test]
    fn trace_has_one_row_per_slot() {
        let model = Model::paper_default();
        let mut buf = Vec::new();
        run(&model, &opts(Mode::Direct, 10.0, 500, 1), Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 501);
        assert!(text.starts_with("slot,"));
    }

    #[test]
    fn validate_against_itself_and_corrupted() {
        let model = Model::paper_default();
        let snr = db_to_linear(10.0);
        let analytic = Analytic::evaluate(&model, Mode::Direct, 1.0, snr).unwrap();
        let m = &analytic.metrics;
        let fake = SimReport {
            mode: Mode::Direct,
            alpha: 1.0,
            snr,
            seed: 0,
            slots: 1,
            arrivals: 0,
            delivered: 0,
            dropped_source: 0,
            dropped_relay: 0,
            lost_errors: 0,
            in_system: 0,
            relay_arrivals: 0,
            drop_source: m.drop_source,
            drop_relay: m.drop_relay,
            throughput: m.throughput,
            energy_per_period: m.energy_per_period,
            ee: m.ee,
            delay: m.delay,
            availability: analytic.availability,
            occupancy: analytic.occupancy.clone(),
            ee_batches: vec![],
            conservation_ok: true,
        };
        let tol = Tolerances::default();
        let v = validate(&analytic, std::slice::from_ref(&fake), &tol).unwrap();
        assert!(v.pass());
        assert!(v.checks.iter().all(|c| c.gap == 0.0));

        let mut bad = analytic.clone();
        bad.metrics.drop_source *= 2.0;
        let v = validate(&bad, std::slice::from_ref(&fake), &tol).unwrap();
        assert_eq!(v.failures(), vec!["drop_source"]);

        let other = SimReport { mode: Mode::Relay, alpha: 0.5, ..fake };
        assert!(matches!(validate(&analytic, &[other], &tol), Err(Error::Comparability(_))));
    }

    #[test]
    fn rejects_bad_options() {
        let model = Model::paper_default();
        let mut o = opts(Mode::Relay, 5.0, 10, 1);
        o.alpha = 1.0;
        assert!(run(&model, &o, None).is_err());
        o.alpha = 0.5;
        o.slots = 0;
        assert!(run(&model, &o, None).is_err());
    }
}
