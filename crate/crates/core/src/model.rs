//! Complete scenario description shared by analysis, optimization and simulation.

use serde::{Deserialize, Serialize};

use crate::channel::{
    db_to_linear, fit_per_curve, msre_boundaries, AmcMode, AmcModeTable, FadingModel, LinkLabel, LinkModel,
    SpectrumAccess,
};
use crate::error::{Error, Result};
use crate::queueing::{SystemParams, TrafficModel};

/// State probabilities used to weight the source→relay PER average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum L1Weighting {
    /// Direct-link state probabilities.
    Direct,
    /// The source→relay link's own state probabilities.
    #[default]
    InterNode,
}

/// Rate dividing the source queue length in the delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LittleRate {
    /// Offered rate `λ̄` for the source and `χ̄` for the relay.
    Offered,
    /// Rates of packets actually admitted to each buffer.
    #[default]
    Accepted,
}

/// Success factor of direct-mode throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DirectThroughput {
    /// `1 − P_LD^{N}`.
    #[default]
    Consistent,
    /// `1 − (1 − P_LD)^{N}`.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RelayArrivals {
    /// Per-slot departures of the solved source chain.
    #[default]
    Departures,
    /// Service-rate atoms mixed with Poisson mass, renormalized.
    PaperHybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    pub l1_weighting: L1Weighting,
    pub little_rate: LittleRate,
    pub direct_throughput: DirectThroughput,
    pub relay_arrivals: RelayArrivals,
}

/// Per-link fading and access parameters. The link's average SNR is the
/// operating SNR `S̄` shifted by `snr_offset_db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub m: f64,
    pub snr_offset_db: f64,
    pub doppler_hz: f64,
    pub access: SpectrumAccess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub system: SystemParams,
    pub traffic: TrafficModel,
    pub modes: Vec<AmcMode>,
    /// Inner AMC thresholds `S_1..S_N` (linear), shared by all links.
    pub thresholds: Vec<f64>,
    pub source_relay: LinkSpec,
    pub relay_dest: LinkSpec,
    pub direct: LinkSpec,
    pub options: ModelOptions,
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.traffic.validate()?;
        AmcModeTable::from_thresholds(self.modes.clone(), &self.thresholds)?;
        for (name, l) in [
            ("link.AR", &self.source_relay),
            ("link.RD", &self.relay_dest),
            ("link.AD", &self.direct),
        ] {
            if !(l.m >= 0.5) {
                return Err(Error::invalid("m", format!("{name}: Nakagami shape must be >= 0.5")));
            }
            if !(l.doppler_hz >= 0.0) {
                return Err(Error::invalid("doppler_hz", format!("{name}: must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn spec(&self, label: LinkLabel) -> &LinkSpec {
        match label {
            LinkLabel::SourceRelay => &self.source_relay,
            LinkLabel::RelayDest => &self.relay_dest,
            LinkLabel::SourceDest => &self.direct,
        }
    }

    pub fn amc(&self) -> Result<AmcModeTable> {
        AmcModeTable::from_thresholds(self.modes.clone(), &self.thresholds)
    }

    /// Link model at operating SNR `snr` (linear).
    pub fn link(&self, label: LinkLabel, snr: f64) -> Result<LinkModel> {
        let spec = self.spec(label);
        Ok(LinkModel {
            label,
            fading: FadingModel {
                m: spec.m,
                avg_snr: snr * db_to_linear(spec.snr_offset_db),
                doppler_hz: spec.doppler_hz,
                frame_s: self.system.slot_s,
            },
            amc: self.amc()?,
            access: spec.access,
        })
    }

    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Self {
        Self {
            thresholds,
            ..self.clone()
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut m = self.clone();
        m.traffic.mean_rate = lambda;
        m.traffic.mmpp = None;
        m
    }

    pub fn with_buffer(&self, buffer: usize) -> Self {
        let mut m = self.clone();
        m.system.buffer = buffer;
        m
    }

    /// Per-attempt target PER `0.001^{1/(N+1)}` of the MSRE baseline.
    pub fn msre_target(&self) -> f64 {
        0.001f64.powf(1.0 / (self.system.max_tx as f64 + 1.0))
    }

    pub fn msre_thresholds(&self) -> Result<Vec<f64>> {
        let b = msre_boundaries(&self.modes, self.msre_target())?;
        Ok(strictly_increasing(b[1..b.len() - 1].to_vec()))
    }
}

/// Nudge ties apart so the thresholds form a valid partition.
pub(crate) fn strictly_increasing(mut t: Vec<f64>) -> Vec<f64> {
    if let Some(first) = t.first_mut() {
        if *first <= 0.0 {
            *first = 1e-9;
        }
    }
    for i in 1..t.len() {
        if t[i] <= t[i - 1] {
            t[i] = t[i - 1] * (1.0 + 1e-9) + 1e-12;
        }
    }
    t
}

impl Model {
    /// Reference scenario: Poisson `λ̄ = 1`, `A = 15`, `M = 50`, seven
    /// square-QAM-like modes fitted for 100-bit packets, `N_r^max = 6`,
    /// 100 kbaud, Rayleigh fading on all three links.
    pub fn paper_default() -> Self {
        let packet_bits = 100;
        let modes: Vec<AmcMode> = (1..=7).map(|b| fit_per_curve(b, packet_bits)).collect();
        let system = SystemParams {
            packet_bits,
            symbol_rate_hz: 100e3,
            slot_s: 10e-3,
            buffer: 50,
            max_tx: 6,
            ref_power_w: 0.01,
            idle_power_w: 0.01,
            loss_budget: 0.05,
        };
        let link = |offset: f64, q: f64, u: f64| LinkSpec {
            m: 1.0,
            snr_offset_db: offset,
            doppler_hz: 1.0,
            access: SpectrumAccess { q, u },
        };
        let mut model = Self {
            system,
            traffic: TrafficModel::poisson(1.0, 15),
            modes,
            thresholds: Vec::new(),
            source_relay: link(0.0, 900.0, 100.0),
            relay_dest: link(0.0, 800.0, 200.0),
            direct: link(-3.0, 800.0, 200.0),
            options: ModelOptions::default(),
        };
        model.thresholds = model
            .msre_thresholds()
            .expect("reference modes have finite MSRE thresholds");
        model
    }
}
