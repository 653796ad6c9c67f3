//! Fading statistics, AMC partitioning, packet error rates, spectrum access and
//! finite-state channel dynamics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{self, ABS_TOL};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// One AMC transmission mode: modulation size plus the exponential PER curve
/// `PER(s) = α·exp(−g·s)` valid above the cutoff `s_p` (PER is 1 below it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmcMode {
    pub bits: u32,
    pub per_alpha: f64,
    pub per_g: f64,
    pub per_cutoff: f64,
}

impl AmcMode {
    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 {
            return Err(Error::InvalidTable("bits per symbol must be positive".into()));
        }
        if !(self.per_alpha > 0.0 && self.per_g > 0.0 && self.per_cutoff >= 0.0) {
            return Err(Error::InvalidTable(format!(
                "mode with b={} needs alpha > 0, g > 0, s_p >= 0",
                self.bits
            )));
        }
        let at_cutoff = self.per_alpha * (-self.per_g * self.per_cutoff).exp();
        if at_cutoff > 1.0 + 1e-9 {
            return Err(Error::InvalidTable(format!(
                "mode with b={}: PER at the cutoff is {at_cutoff} > 1",
                self.bits
            )));
        }
        Ok(())
    }

    /// Smallest SNR at which the PER curve drops to `p_target`.
    pub fn snr_for_per(&self, p_target: f64) -> f64 {
        ((self.per_alpha / p_target).ln() / self.per_g).max(self.per_cutoff).max(0.0)
    }
}

/// Modes plus the SNR partition `S_0 = 0 < S_1 < … < S_N < S_{N+1} = ∞`.
/// Interval `n` is `[S_n, S_{n+1})`; interval 0 means no transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcModeTable {
    modes: Vec<AmcMode>,
    boundaries: Vec<f64>,
}

impl AmcModeTable {
    /// Build from the full boundary list `S_0..=S_{N+1}`.
    pub fn new(modes: Vec<AmcMode>, boundaries: Vec<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidTable("at least one mode is required".into()));
        }
        for m in &modes {
            m.validate()?;
        }
        if modes.windows(2).any(|w| w[1].bits <= w[0].bits) {
            return Err(Error::InvalidTable("bits per symbol must strictly increase".into()));
        }
        if boundaries.len() != modes.len() + 2 {
            return Err(Error::InvalidTable(format!(
                "{} modes need {} boundaries, got {}",
                modes.len(),
                modes.len() + 2,
                boundaries.len()
            )));
        }
        if boundaries[0] != 0.0 || boundaries[boundaries.len() - 1] != f64::INFINITY {
            return Err(Error::InvalidTable("boundaries must start at 0 and end at +inf".into()));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTable("boundaries must strictly increase".into()));
        }
        Ok(Self { modes, boundaries })
    }

    /// Build from the inner thresholds `S_1..=S_N`.
    pub fn from_thresholds(modes: Vec<AmcMode>, thresholds: &[f64]) -> Result<Self> {
        let mut b = Vec::with_capacity(thresholds.len() + 2);
        b.push(0.0);
        b.extend_from_slice(thresholds);
        b.push(f64::INFINITY);
        Self::new(modes, b)
    }

    pub fn modes(&self) -> &[AmcMode] {
        &self.modes
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Inner thresholds `S_1..=S_N`.
    pub fn thresholds(&self) -> &[f64] {
        &self.boundaries[1..self.boundaries.len() - 1]
    }

    /// Number of transmission modes `N`.
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Number of channel states `N + 1` (including the outage state 0).
    pub fn n_states(&self) -> usize {
        self.modes.len() + 1
    }

    pub fn interval(&self, state: usize) -> (f64, f64) {
        (self.boundaries[state], self.boundaries[state + 1])
    }

    /// Mode used in channel state `n ≥ 1`.
    pub fn mode(&self, state: usize) -> Option<&AmcMode> {
        state.checked_sub(1).and_then(|i| self.modes.get(i))
    }

    /// Bits per symbol in state `n` (0 in outage).
    pub fn bits(&self, state: usize) -> u32 {
        self.mode(state).map_or(0, |m| m.bits)
    }

    pub fn state_of(&self, snr: f64) -> usize {
        // boundaries[0] = 0 <= snr always
        self.boundaries[1..].partition_point(|&b| b <= snr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    /// Nakagami shape parameter.
    pub m: f64,
    /// Average received SNR (linear).
    pub avg_snr: f64,
    pub doppler_hz: f64,
    pub frame_s: f64,
}

impl FadingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.5) {
            return Err(Error::invalid("m", format!("Nakagami shape {} must be >= 0.5", self.m)));
        }
        if !(self.avg_snr > 0.0 && self.avg_snr.is_finite()) {
            return Err(Error::invalid("avg_snr", format!("{} must be positive", self.avg_snr)));
        }
        if !(self.doppler_hz >= 0.0) {
            return Err(Error::invalid("doppler_hz", "must be nonnegative"));
        }
        if !(self.frame_s > 0.0) {
            return Err(Error::invalid("frame_s", "must be positive"));
        }
        Ok(())
    }

    /// Decay length of the SNR density tail, `S̄/m`.
    pub fn scale(&self) -> f64 {
        self.avg_snr / self.m
    }

    pub fn with_avg_snr(mut self, avg_snr: f64) -> Self {
        self.avg_snr = avg_snr;
        self
    }

    fn pdf_unchecked(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let rate = self.m / self.avg_snr;
        if s == 0.0 {
            return if self.m == 1.0 {
                rate
            } else if self.m < 1.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
        let ln = self.m * rate.ln() + (self.m - 1.0) * s.ln() - ln_gamma(self.m) - rate * s;
        ln.exp()
    }

    /// `P(S > s)`.
    pub fn survival(&self, s: f64) -> f64 {
        if s <= 0.0 {
            1.0
        } else if s.is_infinite() {
            0.0
        } else {
            gamma_ur(self.m, self.m * s / self.avg_snr)
        }
    }

    /// `P(S ≤ s)`.
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s.is_infinite() {
            1.0
        } else {
            gamma_lr(self.m, self.m * s / self.avg_snr)
        }
    }

    /// `P(lo ≤ S < hi)`, using whichever tail keeps the difference accurate.
    pub fn interval_probability(&self, lo: f64, hi: f64) -> f64 {
        if lo >= self.avg_snr {
            (self.survival(lo) - self.survival(hi)).max(0.0)
        } else {
            (self.cdf(hi) - self.cdf(lo)).max(0.0)
        }
    }

    /// Level-crossing rate (crossings per second) of the SNR process at `threshold`.
    pub fn level_crossing_rate(&self, threshold: f64) -> f64 {
        if threshold <= 0.0 || threshold.is_infinite() || self.doppler_hz == 0.0 {
            return 0.0;
        }
        let x = self.m * threshold / self.avg_snr;
        let ln = (self.m - 0.5) * x.ln() - x - ln_gamma(self.m);
        (2.0 * std::f64::consts::PI).sqrt() * self.doppler_hz * ln.exp()
    }
}

/// Two-state opportunistic access process for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAccess {
    pub q: f64,
    pub u: f64,
}

impl SpectrumAccess {
    pub fn new(q: f64, u: f64) -> Result<Self> {
        stationary_access(q, u)?;
        Ok(Self { q, u })
    }

    /// Always-available spectrum (`a^a = 1`), useful for tests.
    pub fn always() -> Self {
        Self { q: 1.0, u: 0.0 }
    }

    pub fn available(&self) -> f64 {
        if self.u == 0.0 {
            1.0
        } else {
            self.q / (self.q + self.u)
        }
    }

    pub fn unavailable(&self) -> f64 {
        1.0 - self.available()
    }
}

/// Stationary `(a^a, a^u)` of the two-state occupancy process.
pub fn stationary_access(q: f64, u: f64) -> Result<(f64, f64)> {
    if !(q > 0.0) {
        return Err(Error::invalid("q", format!("{q} must be positive")));
    }
    if !(u > 0.0) {
        return Err(Error::invalid("u", format!("{u} must be positive")));
    }
    let total = q + u;
    Ok((q / total, u / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkLabel {
    /// Source to relay.
    SourceRelay,
    /// Relay to destination.
    RelayDest,
    /// Direct source to destination.
    SourceDest,
}

impl LinkLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinkLabel::SourceRelay => "A,R",
            LinkLabel::RelayDest => "R,D",
            LinkLabel::SourceDest => "A,D",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub label: LinkLabel,
    pub fading: FadingModel,
    pub amc: AmcModeTable,
    pub access: SpectrumAccess,
}

impl LinkModel {
    pub fn with_avg_snr(&self, avg_snr: f64) -> Self {
        Self {
            fading: self.fading.with_avg_snr(avg_snr),
            ..self.clone()
        }
    }

    pub fn with_thresholds(&self, thresholds: &[f64]) -> Result<Self> {
        Ok(Self {
            amc: AmcModeTable::from_thresholds(self.amc.modes().to_vec(), thresholds)?,
            ..self.clone()
        })
    }
}

/// Nakagami-m SNR density.
pub fn gamma_pdf(s: f64, fading: &FadingModel) -> Result<f64> {
    fading.validate()?;
    if s < 0.0 {
        return Err(Error::invalid("s", "SNR must be nonnegative"));
    }
    Ok(fading.pdf_unchecked(s))
}

/// Probability of each channel state `0..=N`.
pub fn state_probabilities(amc: &AmcModeTable, fading: &FadingModel) -> Result<Vec<f64>> {
    fading.validate()?;
    let probs: Vec<f64> = (0..amc.n_states())
        .map(|n| {
            let (lo, hi) = amc.interval(n);
            fading.interval_probability(lo, hi)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Numeric {
            what: "state probabilities",
            residual: (total - 1.0).abs(),
        });
    }
    Ok(probs)
}

/// Packet error rate of `mode` at SNR `s`, clamped to `[0, 1]`.
pub fn per_at(s: f64, mode: &AmcMode) -> f64 {
    if s < mode.per_cutoff {
        1.0
    } else {
        (mode.per_alpha * (-mode.per_g * s).exp()).clamp(0.0, 1.0)
    }
}

/// `∫_{S_n}^{S_{n+1}} PER_n(s) f(s) ds` for a transmitting state `n ≥ 1`.
pub fn interval_error_mass(amc: &AmcModeTable, fading: &FadingModel, state: usize) -> Result<f64> {
    let mode = amc
        .mode(state)
        .ok_or_else(|| Error::invalid("state", "outage state has no PER"))?;
    let (lo, hi) = amc.interval(state);
    // PER is identically 1 below the cutoff.
    let split = mode.per_cutoff.clamp(lo, hi);
    let mut mass = fading.interval_probability(lo, split);
    if split < hi {
        let f = |s: f64| per_at(s, mode) * fading.pdf_unchecked(s);
        let q = quadrature::integrate_range(f, split, hi, fading.scale(), ABS_TOL)?;
        mass += q.value;
    }
    Ok(mass.max(0.0))
}

/// Per-state statistics of one link: state probabilities, conditional PERs,
/// and the rate-weighted average PER.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStats {
    pub state_probs: Vec<f64>,
    /// Conditional mean PER in each state (index 0 is the outage state, PER 1).
    pub state_per: Vec<f64>,
    pub avg_per: f64,
    /// `b̄ = Σ b_n Pr(n)`.
    pub mean_bits: f64,
}

impl LinkStats {
    /// Probability of being in a transmitting state.
    pub fn transmit_probability(&self) -> f64 {
        self.state_probs[1..].iter().sum()
    }
}

pub fn link_stats(amc: &AmcModeTable, fading: &FadingModel) -> Result<LinkStats> {
    link_stats_weighted(amc, fading, None)
}

/// As [`link_stats`], but with the rate-weighting state probabilities taken
/// from `weights` (used for the alternative source→relay weighting).
pub fn link_stats_weighted(
    amc: &AmcModeTable,
    fading: &FadingModel,
    weights: Option<&[f64]>,
) -> Result<LinkStats> {
    let state_probs = state_probabilities(amc, fading)?;
    let mut state_per = vec![1.0; amc.n_states()];
    for n in 1..amc.n_states() {
        let mass = interval_error_mass(amc, fading, n)?;
        state_per[n] = if state_probs[n] > 1e-300 {
            (mass / state_probs[n]).clamp(0.0, 1.0)
        } else {
            per_at(amc.interval(n).0, amc.mode(n).unwrap())
        };
    }
    let w = weights.unwrap_or(&state_probs);
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 1..amc.n_states() {
        let b = amc.bits(n) as f64;
        num += b * w[n] * state_per[n];
        den += b * w[n];
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateChannel(
            "channel is always in the outage state".into(),
        ));
    }
    let mean_bits = (1..amc.n_states())
        .map(|n| amc.bits(n) as f64 * state_probs[n])
        .sum();
    Ok(LinkStats {
        state_probs,
        state_per,
        avg_per: (num / den).clamp(0.0, 1.0),
        mean_bits,
    })
}

/// Rate-weighted average PER of a link (`P_LD`, `P_L1` or `P_L2`).
pub fn avg_link_per(link: &LinkModel) -> Result<f64> {
    Ok(link_stats(&link.amc, &link.fading)?.avg_per)
}

/// First-phase and overall failure probabilities of relay-assisted delivery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedError {
    /// Both destination and relay miss the packet in the first phase.
    pub p1: f64,
    /// Relay decodes, direct link fails, relay forwarding fails.
    pub p2: f64,
    pub p0: f64,
}

pub fn combined_error(p_ld: f64, p_l1: f64, p_l2: f64) -> CombinedError {
    let p1 = p_ld * p_l1;
    let p2 = p_ld * (1.0 - p_l1) * p_l2;
    CombinedError { p1, p2, p0: p1 + p2 }
}

/// Thresholds at which each mode's PER first reaches `p_target`.
/// Returns the full boundary list `S_0..=S_{N+1}`.
pub fn msre_boundaries(modes: &[AmcMode], p_target: f64) -> Result<Vec<f64>> {
    if !(p_target > 0.0 && p_target <= 1.0) {
        return Err(Error::invalid("p_target", format!("{p_target} must lie in (0, 1]")));
    }
    let mut b = vec![0.0];
    for m in modes {
        b.push(m.snr_for_per(p_target));
    }
    b.push(f64::INFINITY);
    if b.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidTable(
            "mode parameters give non-monotone MSRE thresholds".into(),
        ));
    }
    Ok(b)
}

/// Slow-fading finite-state Markov channel over states `0..=N`.
///
/// Adjacent transitions are `LCR(S_{n+1})·T_f/Pr(n)` upward and
/// `LCR(S_n)·T_f/Pr(n)` downward; all other off-diagonal entries are zero.
pub fn fsmc_transitions(amc: &AmcModeTable, fading: &FadingModel) -> Result<DMatrix<f64>> {
    let probs = state_probabilities(amc, fading)?;
    let k = amc.n_states();
    let mut p = DMatrix::<f64>::zeros(k, k);
    // Floor keeps vanishing-probability states reachable so the chain stays irreducible.
    const FLOOR: f64 = 1e-300;
    for n in 0..k {
        let (lo, hi) = amc.interval(n);
        let crossing = |level: f64| fading.level_crossing_rate(level) * fading.frame_s;
        let mut up = 0.0;
        let mut down = 0.0;
        if n + 1 < k {
            up = if probs[n] > FLOOR {
                crossing(hi) / probs[n]
            } else {
                0.0
            };
            if fading.doppler_hz > 0.0 {
                up = up.max(FLOOR);
            }
        }
        if n > 0 {
            down = if probs[n] > FLOOR {
                crossing(lo) / probs[n]
            } else if fading.doppler_hz > 0.0 {
                // Unreachable tail state: fall straight back toward the bulk.
                1.0
            } else {
                0.0
            };
            if fading.doppler_hz > 0.0 {
                down = down.max(FLOOR);
            }
        }
        if up > 1.0 || down > 1.0 || up + down > 1.0 + 1e-12 {
            let (to, probability) = if up >= down { (n + 1, up) } else { (n - 1, down) };
            return Err(Error::SlowFadingViolation {
                from: n,
                to,
                probability: probability.max(up + down),
            });
        }
        if n + 1 < k {
            p[(n, n + 1)] = up;
        }
        if n > 0 {
            p[(n, n - 1)] = down;
        }
        p[(n, n)] = (1.0 - up - down).max(0.0);
    }
    Ok(p)
}

/// Least-squares fit of the exponential PER curve to the BER model
/// `BER(s) = 0.2·exp(−1.5 s / (2^b − 1))` for `L`-bit packets.
///
/// The fit uses 200 points evenly spread in SNR between the levels where the
/// exact PER equals 0.3 and 1e-5; `s_p` is where the fitted curve reaches 1.
pub fn fit_per_curve(bits: u32, packet_bits: u32) -> AmcMode {
    let spread = 2f64.powi(bits as i32) - 1.0;
    let per_exact = |s: f64| {
        let ber = 0.2 * (-1.5 * s / spread).exp();
        1.0 - (1.0 - ber).powi(packet_bits as i32)
    };
    let snr_at = |per: f64| {
        let ber = 1.0 - (1.0 - per).powf(1.0 / packet_bits as f64);
        -spread / 1.5 * (ber / 0.2).ln()
    };
    let (lo, hi) = (snr_at(0.3), snr_at(1e-5));
    let n = 200;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let y = per_exact(s).ln();
        sx += s;
        sy += y;
        sxx += s * s;
        sxy += s * y;
    }
    let nf = n as f64;
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    let intercept = (sy - slope * sx) / nf;
    let per_alpha = intercept.exp();
    let per_g = -slope;
    let per_cutoff = if per_alpha > 1.0 {
        // nudge so that alpha·exp(−g·s_p) never exceeds 1 in floating point
        per_alpha.ln() / per_g * (1.0 + 1e-12)
    } else {
        0.0
    };
    AmcMode {
        bits,
        per_alpha,
        per_g,
        per_cutoff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fading(m: f64, avg: f64) -> FadingModel {
        FadingModel {
            m,
            avg_snr: avg,
            doppler_hz: 10.0,
            frame_s: 1e-3,
        }
    }

    fn unit_mode() -> AmcMode {
        AmcMode {
            bits: 1,
            per_alpha: 1.0,
            per_g: 1.0,
            per_cutoff: 0.0,
        }
    }

    #[test]
    fn gamma_pdf_examples() {
        assert_abs_diff_eq!(gamma_pdf(0.5, &fading(1.0, 1.0)).unwrap(), (-0.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(gamma_pdf(0.0, &fading(1.0, 2.0)).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma_pdf(1.0, &fading(2.0, 1.0)).unwrap(), 4.0 * (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn gamma_pdf_rejects_bad_parameters() {
        assert!(gamma_pdf(1.0, &fading(1.0, 0.0)).is_err());
        assert!(gamma_pdf(1.0, &fading(0.2, 1.0)).is_err());
        assert!(gamma_pdf(-1.0, &fading(1.0, 1.0)).is_err());
    }

    #[test]
    fn gamma_pdf_integrates_to_one() {
        for &(m, avg) in &[(0.5, 1.0), (1.0, 3.0), (2.0, 10.0), (3.5, 0.7)] {
            let f = fading(m, avg);
            let upper = avg * 50.0 * m;
            // split off the origin where m < 1 is singular
            let head = f.cdf(1e-6 * avg);
            let q = quadrature::integrate(|s| f.pdf_unchecked(s), 1e-6 * avg, upper, 1e-11).unwrap();
            assert_abs_diff_eq!(head + q.value + f.survival(upper), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn state_probabilities_examples() {
        let one = AmcModeTable::new(vec![unit_mode()], vec![0.0, 1e-300, f64::INFINITY]).unwrap();
        let p = state_probabilities(&one, &fading(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);

        let t = AmcModeTable::new(vec![unit_mode()], vec![0.0, 1.0, f64::INFINITY]).unwrap();
        let p = state_probabilities(&t, &fading(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p[0], 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn per_at_examples() {
        let m = AmcMode {
            bits: 2,
            per_alpha: 10.0,
            per_g: 1.0,
            per_cutoff: 10f64.ln(),
        };
        assert_eq!(per_at(0.5, &m), 1.0);
        assert_abs_diff_eq!(per_at(2.0, &unit_mode()), (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(per_at(m.per_cutoff, &m), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn combined_error_examples() {
        let c = combined_error(1.0, 1.0, 0.4);
        assert_eq!((c.p1, c.p2, c.p0), (1.0, 0.0, 1.0));
        let c = combined_error(0.0, 0.3, 0.7);
        assert_eq!((c.p1, c.p2, c.p0), (0.0, 0.0, 0.0));
        let c = combined_error(0.5, 0.2, 0.3);
        assert_abs_diff_eq!(c.p1, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.p2, 0.12, epsilon = 1e-15);
        assert_abs_diff_eq!(c.p0, 0.22, epsilon = 1e-15);
    }

    #[test]
    fn msre_examples() {
        let b = msre_boundaries(&[unit_mode()], (-3.0f64).exp()).unwrap();
        assert_abs_diff_eq!(b[1], 3.0, epsilon = 1e-12);
        let m = AmcMode {
            per_cutoff: 0.7,
            ..unit_mode()
        };
        let b = msre_boundaries(&[m], 1.0).unwrap();
        assert_abs_diff_eq!(b[1], 0.7, epsilon = 1e-15);
        assert!(msre_boundaries(&[m], 0.0).is_err());
    }

    #[test]
    fn msre_rejects_inconsistent_modes() {
        let a = AmcMode {
            bits: 1,
            per_alpha: 1.0,
            per_g: 0.1,
            per_cutoff: 0.0,
        };
        let b = AmcMode {
            bits: 2,
            per_alpha: 1.0,
            per_g: 1.0,
            per_cutoff: 0.0,
        };
        assert!(matches!(msre_boundaries(&[a, b], 0.1), Err(Error::InvalidTable(_))));
    }

    #[test]
    fn stationary_access_examples() {
        assert_eq!(stationary_access(2.0, 2.0).unwrap(), (0.5, 0.5));
        assert_eq!(stationary_access(1.0, 3.0).unwrap(), (0.25, 0.75));
        assert!(stationary_access(0.0, 1.0).is_err());
        assert!(stationary_access(1.0, -1.0).is_err());
    }

    #[test]
    fn static_channel_is_identity() {
        let t = AmcModeTable::new(vec![unit_mode()], vec![0.0, 1.0, f64::INFINITY]).unwrap();
        let mut f = fading(1.0, 1.0);
        f.doppler_hz = 0.0;
        let p = fsmc_transitions(&t, &f).unwrap();
        assert_eq!(p, DMatrix::identity(2, 2));
    }

    #[test]
    fn fast_fading_is_rejected() {
        let t = AmcModeTable::new(
            vec![unit_mode(), AmcMode { bits: 2, ..unit_mode() }],
            vec![0.0, 1.0, 1.01, f64::INFINITY],
        )
        .unwrap();
        let f = fading(1.0, 1.0);
        assert!(matches!(fsmc_transitions(&t, &f), Err(Error::SlowFadingViolation { .. })));
    }

    #[test]
    fn table_validation() {
        let m = unit_mode();
        assert!(AmcModeTable::new(vec![m], vec![0.0, 1.0]).is_err());
        assert!(AmcModeTable::new(vec![m], vec![0.0, 0.0, f64::INFINITY]).is_err());
        assert!(AmcModeTable::new(vec![m, m], vec![0.0, 1.0, 2.0, f64::INFINITY]).is_err());
        let hot = AmcMode { per_alpha: 5.0, per_cutoff: 0.0, ..m };
        assert!(AmcModeTable::new(vec![hot], vec![0.0, 1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn state_lookup() {
        let t = AmcModeTable::new(
            vec![unit_mode(), AmcMode { bits: 2, ..unit_mode() }],
            vec![0.0, 1.0, 4.0, f64::INFINITY],
        )
        .unwrap();
        assert_eq!(t.state_of(0.0), 0);
        assert_eq!(t.state_of(0.99), 0);
        assert_eq!(t.state_of(1.0), 1);
        assert_eq!(t.state_of(3.9), 1);
        assert_eq!(t.state_of(4.0), 2);
        assert_eq!(t.state_of(1e9), 2);
    }

    #[test]
    fn error_free_and_certain_failure_links() {
        // PER ≡ 0 is approximated by a very steep curve with zero cutoff.
        let clean = AmcMode {
            bits: 1,
            per_alpha: 1e-300,
            per_g: 1.0,
            per_cutoff: 0.0,
        };
        let t = AmcModeTable::new(vec![clean], vec![0.0, 0.5, f64::INFINITY]).unwrap();
        let s = link_stats(&t, &fading(1.0, 2.0)).unwrap();
        assert!(s.avg_per < 1e-290);

        // cutoff far above all the probability mass: PER ≡ 1
        let dead = AmcMode {
            bits: 1,
            per_alpha: 1.0,
            per_g: 1e-9,
            per_cutoff: 1e6,
        };
        let t = AmcModeTable::new(vec![dead], vec![0.0, 0.5, f64::INFINITY]).unwrap();
        let s = link_stats(&t, &fading(1.0, 2.0)).unwrap();
        assert_abs_diff_eq!(s.avg_per, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn outage_only_channel_is_degenerate() {
        let t = AmcModeTable::new(vec![unit_mode()], vec![0.0, 1e6, f64::INFINITY]).unwrap();
        assert!(matches!(
            link_stats(&t, &fading(1.0, 1.0)),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn closed_form_error_mass() {
        // For s ≥ s_p: ∫ α e^{−g s} f(s) ds has a closed form in incomplete gammas.
        let mode = AmcMode {
            bits: 2,
            per_alpha: 8.0,
            per_g: 0.6,
            per_cutoff: 8f64.ln() / 0.6,
        };
        for &(m, avg) in &[(1.0, 3.0), (2.0, 6.0), (0.7, 10.0)] {
            let f = fading(m, avg);
            let t = AmcModeTable::new(vec![mode], vec![0.0, 2.0, f64::INFINITY]).unwrap();
            let got = interval_error_mass(&t, &f, 1).unwrap();
            let rate = m / avg;
            let k = rate + mode.per_g;
            let sp = mode.per_cutoff;
            let below = f.interval_probability(2.0, sp);
            let above = mode.per_alpha * (rate / k).powf(m) * gamma_ur(m, k * sp);
            assert_abs_diff_eq!(got, below + above, epsilon = 1e-9);
        }
    }

    #[test]
    fn fitted_curve_tracks_ber_model() {
        for b in 1..=7 {
            let mode = fit_per_curve(b, 100);
            mode.validate().unwrap();
            let spread = 2f64.powi(b as i32) - 1.0;
            // check relative agreement in the fitted range
            for &per in &[1e-2, 1e-3, 1e-4] {
                let ber = 1.0 - (1.0f64 - per).powf(0.01);
                let s = -spread / 1.5 * (ber / 0.2).ln();
                let fitted = per_at(s, &mode);
                assert!((fitted / per - 1.0).abs() < 0.25, "b={b} per={per} fitted={fitted}");
            }
        }
    }
}
