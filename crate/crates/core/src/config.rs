//! TOML scenario files.
//!
//! Sections: `[system] [traffic] [amc] [link.AR] [link.RD] [link.AD]
//! [access.AR] [access.RD] [access.AD] [optimizer] [simulate]`. A file that
//! sets `preset = "paper-default"` inherits every key it leaves out; otherwise
//! all model keys are required. `[optimizer]` and `[simulate]` keys always
//! have defaults. Unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, fit_per_curve, linear_to_db, AmcMode, SpectrumAccess};
use crate::error::{Error, Result};
use crate::model::{strictly_increasing, DirectThroughput, L1Weighting, LinkSpec, LittleRate, Model, RelayArrivals};
use crate::optimizer::{default_alpha_grid, resolve_thresholds, BoundaryPolicy, SearchOptions};
use crate::queueing::Mmpp;
use crate::simulator::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub alpha_grid: Vec<f64>,
    pub search: SearchOptions,
    /// Delay budget `D_0` in slots; `None` means unconstrained.
    pub delay_budget: Option<f64>,
    /// Fixed α for single-point commands and the switch decision.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub slots: u64,
    pub warmup: u64,
    pub seeds: Vec<u64>,
    pub batches: usize,
    pub snr_db: Vec<f64>,
    pub alpha: f64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: Model,
    pub boundaries: BoundaryPolicy,
    /// SNR (dB) at which EEP boundaries are optimized.
    pub reference_snr_db: f64,
    pub optimizer: OptimizerConfig,
    pub simulate: SimulateConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    preset: Option<Preset>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    traffic: RawTraffic,
    #[serde(default)]
    amc: RawAmc,
    #[serde(default)]
    link: PerLink<RawLink>,
    #[serde(default)]
    access: PerLink<RawAccess>,
    #[serde(default)]
    optimizer: RawOptimizer,
    #[serde(default)]
    simulate: RawSimulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    PaperDefault,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    packet_bits: Option<u32>,
    symbol_rate_hz: Option<f64>,
    slot_s: Option<f64>,
    buffer: Option<usize>,
    max_retransmissions: Option<u32>,
    ref_power_w: Option<f64>,
    idle_power_w: Option<f64>,
    loss_budget: Option<f64>,
    l1_weighting: Option<L1Weighting>,
    little_rate: Option<LittleRate>,
    direct_throughput: Option<DirectThroughput>,
    relay_arrivals: Option<RelayArrivals>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraffic {
    lambda: Option<f64>,
    max_arrivals: Option<usize>,
    mmpp_rates: Option<Vec<f64>>,
    mmpp_switch: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAmc {
    /// Bits per symbol of modes fitted to the packet length.
    bits: Option<Vec<u32>>,
    /// Explicit mode table; overrides `bits`.
    modes: Option<Vec<AmcMode>>,
    boundaries: Option<BoundaryPolicy>,
    thresholds_db: Option<Vec<f64>>,
    reference_snr_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerLink<T> {
    #[serde(rename = "AR")]
    ar: Option<T>,
    #[serde(rename = "RD")]
    rd: Option<T>,
    #[serde(rename = "AD")]
    ad: Option<T>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    m: Option<f64>,
    snr_offset_db: Option<f64>,
    doppler_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAccess {
    q: Option<f64>,
    u: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    alpha_grid: Option<Vec<f64>>,
    snr_min_db: Option<f64>,
    snr_max_db: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    delay_budget: Option<f64>,
    alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    slots: Option<u64>,
    warmup: Option<u64>,
    seeds: Option<Vec<u64>>,
    batches: Option<usize>,
    snr_db: Option<Vec<f64>>,
    alpha: Option<f64>,
    tolerances: Option<Tolerances>,
}

impl Raw {
    /// First required model key the file leaves out.
    fn first_missing(&self) -> Option<String> {
        let s = &self.system;
        let t = &self.traffic;
        let system = [
            ("system.packet_bits", s.packet_bits.is_some()),
            ("system.symbol_rate_hz", s.symbol_rate_hz.is_some()),
            ("system.slot_s", s.slot_s.is_some()),
            ("system.buffer", s.buffer.is_some()),
            ("system.max_retransmissions", s.max_retransmissions.is_some()),
            ("system.ref_power_w", s.ref_power_w.is_some()),
            ("system.idle_power_w", s.idle_power_w.is_some()),
            ("system.loss_budget", s.loss_budget.is_some()),
            ("traffic.lambda", t.lambda.is_some() || t.mmpp_rates.is_some()),
            ("traffic.max_arrivals", t.max_arrivals.is_some()),
            ("amc.bits", self.amc.bits.is_some() || self.amc.modes.is_some()),
        ];
        if let Some((k, _)) = system.iter().find(|(_, ok)| !ok) {
            return Some(k.to_string());
        }
        for (name, link, access) in [
            ("AR", &self.link.ar, &self.access.ar),
            ("RD", &self.link.rd, &self.access.rd),
            ("AD", &self.link.ad, &self.access.ad),
        ] {
            let l = link.as_ref();
            for (key, ok) in [
                ("m", l.is_some_and(|l| l.m.is_some())),
                ("snr_offset_db", l.is_some_and(|l| l.snr_offset_db.is_some())),
                ("doppler_hz", l.is_some_and(|l| l.doppler_hz.is_some())),
            ] {
                if !ok {
                    return Some(format!("link.{name}.{key}"));
                }
            }
            let a = access.as_ref();
            for (key, ok) in [("q", a.is_some_and(|a| a.q.is_some())), ("u", a.is_some_and(|a| a.u.is_some()))] {
                if !ok {
                    return Some(format!("access.{name}.{key}"));
                }
            }
        }
        None
    }
}

impl Default for Config {
    fn default() -> Self {
        Self::paper_default()
    }
}

impl Config {
    pub fn paper_default() -> Self {
        Self {
            model: Model::paper_default(),
            boundaries: BoundaryPolicy::Msre,
            reference_snr_db: 5.0,
            optimizer: OptimizerConfig {
                alpha_grid: default_alpha_grid(),
                search: SearchOptions::default(),
                delay_budget: None,
                alpha: 0.5,
            },
            simulate: SimulateConfig {
                slots: 1_000_000,
                warmup: 10_000,
                seeds: vec![1, 2, 3],
                batches: 20,
                snr_db: vec![5.0, 10.0, 15.0],
                alpha: 0.5,
                tolerances: Tolerances::default(),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: Raw = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| text[s].to_string()).unwrap_or_default();
            Error::config(key, e.message().to_string())
        })?;
        let cfg = Self::from_raw(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_raw(raw: Raw) -> Result<Self> {
        if raw.preset.is_none() {
            if let Some(key) = raw.first_missing() {
                return Err(Error::config(key, "missing (set preset = \"paper-default\" to inherit it)"));
            }
        }
        let mut cfg = Self::paper_default();
        let m = &mut cfg.model;

        let s = raw.system;
        set(&mut m.system.packet_bits, s.packet_bits);
        set(&mut m.system.symbol_rate_hz, s.symbol_rate_hz);
        set(&mut m.system.slot_s, s.slot_s);
        set(&mut m.system.buffer, s.buffer);
        set(&mut m.system.max_tx, s.max_retransmissions);
        set(&mut m.system.ref_power_w, s.ref_power_w);
        set(&mut m.system.idle_power_w, s.idle_power_w);
        set(&mut m.system.loss_budget, s.loss_budget);
        set(&mut m.options.l1_weighting, s.l1_weighting);
        set(&mut m.options.little_rate, s.little_rate);
        set(&mut m.options.direct_throughput, s.direct_throughput);
        set(&mut m.options.relay_arrivals, s.relay_arrivals);

        let t = raw.traffic;
        set(&mut m.traffic.max_arrivals, t.max_arrivals);
        match (t.mmpp_rates, t.mmpp_switch) {
            (Some(rates), Some(switch)) => {
                let mmpp = Mmpp { rates, switch };
                mmpp.validate().map_err(rekey("traffic.mmpp_switch"))?;
                let mean = mmpp.mean_rate();
                if let Some(l) = t.lambda {
                    if (l - mean).abs() > 1e-6 * mean.max(1.0) {
                        return Err(Error::config(
                            "traffic.lambda",
                            format!("{l} differs from the MMPP stationary mean {mean}"),
                        ));
                    }
                }
                m.traffic.mean_rate = mean;
                m.traffic.mmpp = Some(mmpp);
            }
            (None, None) => set(&mut m.traffic.mean_rate, t.lambda),
            _ => {
                return Err(Error::config(
                    "traffic.mmpp_rates",
                    "mmpp_rates and mmpp_switch must be given together",
                ))
            }
        }

        let a = raw.amc;
        let refit = a.bits.is_some() || s.packet_bits.is_some();
        if let Some(modes) = a.modes {
            m.modes = modes;
        } else if refit {
            let bits = a.bits.unwrap_or_else(|| m.modes.iter().map(|x| x.bits).collect());
            m.modes = bits.iter().map(|&b| fit_per_curve(b, m.system.packet_bits)).collect();
        }
        set(&mut cfg.reference_snr_db, a.reference_snr_db);
        cfg.boundaries = a.boundaries.unwrap_or(if a.thresholds_db.is_some() {
            BoundaryPolicy::Explicit
        } else {
            BoundaryPolicy::Msre
        });
        match (&cfg.boundaries, a.thresholds_db) {
            (BoundaryPolicy::Explicit, Some(db)) => {
                if db.len() != m.modes.len() {
                    return Err(Error::config(
                        "amc.thresholds_db",
                        format!("{} thresholds for {} modes", db.len(), m.modes.len()),
                    ));
                }
                m.thresholds = db.iter().map(|&d| db_to_linear(d)).collect();
            }
            (BoundaryPolicy::Explicit, None) => {
                return Err(Error::config("amc.thresholds_db", "required when boundaries = \"explicit\""))
            }
            (_, Some(_)) => {
                return Err(Error::config("amc.thresholds_db", "only used when boundaries = \"explicit\""))
            }
            _ => m.thresholds = m.msre_thresholds().map_err(rekey("amc.modes"))?,
        }

        for (spec, l, acc) in [
            (&mut m.source_relay, raw.link.ar, raw.access.ar),
            (&mut m.relay_dest, raw.link.rd, raw.access.rd),
            (&mut m.direct, raw.link.ad, raw.access.ad),
        ] {
            apply_link(spec, l, acc);
        }

        let o = raw.optimizer;
        let opt = &mut cfg.optimizer;
        set(&mut opt.alpha_grid, o.alpha_grid);
        set(&mut opt.search.snr_min_db, o.snr_min_db);
        set(&mut opt.search.snr_max_db, o.snr_max_db);
        set(&mut opt.search.tol, o.tol);
        set(&mut opt.search.max_iter, o.max_iter);
        opt.delay_budget = o.delay_budget;
        set(&mut opt.alpha, o.alpha);

        let r = raw.simulate;
        let sim = &mut cfg.simulate;
        set(&mut sim.slots, r.slots);
        set(&mut sim.warmup, r.warmup);
        set(&mut sim.seeds, r.seeds);
        set(&mut sim.batches, r.batches);
        set(&mut sim.snr_db, r.snr_db);
        set(&mut sim.alpha, r.alpha);
        set(&mut sim.tolerances, r.tolerances);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(rekey("model"))?;
        let alpha_ok = |a: f64| a > 0.0 && a < 1.0;
        let opt = &self.optimizer;
        if opt.alpha_grid.is_empty() || !opt.alpha_grid.iter().all(|&a| alpha_ok(a)) {
            return Err(Error::config("optimizer.alpha_grid", "values must lie in (0, 1)"));
        }
        opt.search.validate().map_err(rekey("optimizer"))?;
        if let Some(d) = opt.delay_budget {
            if !(d > 0.0) {
                return Err(Error::config("optimizer.delay_budget", "must be positive"));
            }
        }
        if !alpha_ok(opt.alpha) {
            return Err(Error::config("optimizer.alpha", "must lie in (0, 1)"));
        }
        let sim = &self.simulate;
        if sim.slots == 0 {
            return Err(Error::config("simulate.slots", "must be positive"));
        }
        if sim.seeds.is_empty() {
            return Err(Error::config("simulate.seeds", "need at least one seed"));
        }
        if sim.batches < 2 || sim.slots < sim.batches as u64 {
            return Err(Error::config("simulate.batches", "need at least 2 batches and one slot per batch"));
        }
        if !alpha_ok(sim.alpha) {
            return Err(Error::config("simulate.alpha", "must lie in (0, 1)"));
        }
        if !self.reference_snr_db.is_finite() {
            return Err(Error::config("amc.reference_snr_db", "must be finite"));
        }
        Ok(())
    }

    /// Apply the boundary policy. EEP runs its search here.
    pub fn resolve(&mut self) -> Result<()> {
        let t = resolve_thresholds(&self.model, &self.boundaries, self.reference_snr_db)?;
        self.model.thresholds = strictly_increasing(t);
        Ok(())
    }

    /// The effective configuration as a self-contained TOML file.
    pub fn to_toml(&self) -> String {
        let m = &self.model;
        let sys = &m.system;
        let mut out = String::new();
        let mut line = |l: String| {
            out.push_str(&l);
            out.push('\n');
        };
        let enum_str = |v: &dyn erased::Kebab| v.kebab();
        line("[system]".into());
        line(format!("packet_bits = {}", sys.packet_bits));
        line(format!("symbol_rate_hz = {:?}", sys.symbol_rate_hz));
        line(format!("slot_s = {:?}", sys.slot_s));
        line(format!("buffer = {}", sys.buffer));
        line(format!("max_retransmissions = {}", sys.max_tx));
        line(format!("ref_power_w = {:?}", sys.ref_power_w));
        line(format!("idle_power_w = {:?}", sys.idle_power_w));
        line(format!("loss_budget = {:?}", sys.loss_budget));
        line(format!("l1_weighting = {}", enum_str(&m.options.l1_weighting)));
        line(format!("little_rate = {}", enum_str(&m.options.little_rate)));
        line(format!("direct_throughput = {}", enum_str(&m.options.direct_throughput)));
        line(format!("relay_arrivals = {}", enum_str(&m.options.relay_arrivals)));
        line(String::new());
        line("[traffic]".into());
        match &m.traffic.mmpp {
            Some(mm) => {
                line(format!("mmpp_rates = {:?}", mm.rates));
                line(format!("mmpp_switch = {:?}", mm.switch));
            }
            None => line(format!("lambda = {:?}", m.traffic.mean_rate)),
        }
        line(format!("max_arrivals = {}", m.traffic.max_arrivals));
        line(String::new());
        line("[amc]".into());
        line(format!("boundaries = {}", enum_str(&self.boundaries)));
        line("# resolved thresholds (dB)".into());
        if self.boundaries == BoundaryPolicy::Explicit {
            line(format!("thresholds_db = {:?}", self.thresholds_db()));
        } else {
            line(format!("# thresholds_db = {:?}", self.thresholds_db()));
        }
        line(format!("reference_snr_db = {:?}", self.reference_snr_db));
        for mode in &m.modes {
            line(String::new());
            line("[[amc.modes]]".into());
            line(format!("bits = {}", mode.bits));
            line(format!("per_alpha = {:?}", mode.per_alpha));
            line(format!("per_g = {:?}", mode.per_g));
            line(format!("per_cutoff = {:?}", mode.per_cutoff));
        }
        for (name, l) in [("AR", &m.source_relay), ("RD", &m.relay_dest), ("AD", &m.direct)] {
            line(String::new());
            line(format!("[link.{name}]"));
            line(format!("m = {:?}", l.m));
            line(format!("snr_offset_db = {:?}", l.snr_offset_db));
            line(format!("doppler_hz = {:?}", l.doppler_hz));
            line(String::new());
            line(format!("[access.{name}]"));
            line(format!("q = {:?}", l.access.q));
            line(format!("u = {:?}", l.access.u));
        }
        let o = &self.optimizer;
        line(String::new());
        line("[optimizer]".into());
        line(format!("alpha_grid = {:?}", o.alpha_grid));
        line(format!("snr_min_db = {:?}", o.search.snr_min_db));
        line(format!("snr_max_db = {:?}", o.search.snr_max_db));
        line(format!("tol = {:?}", o.search.tol));
        line(format!("max_iter = {}", o.search.max_iter));
        if let Some(d) = o.delay_budget {
            line(format!("delay_budget = {d:?}"));
        }
        line(format!("alpha = {:?}", o.alpha));
        let r = &self.simulate;
        line(String::new());
        line("[simulate]".into());
        line(format!("slots = {}", r.slots));
        line(format!("warmup = {}", r.warmup));
        line(format!("seeds = {:?}", r.seeds));
        line(format!("batches = {}", r.batches));
        line(format!("snr_db = {:?}", r.snr_db));
        line(format!("alpha = {:?}", r.alpha));
        line(String::new());
        line("[simulate.tolerances]".into());
        let t = &r.tolerances;
        for (k, v) in [
            ("ee_rel", t.ee_rel),
            ("drop_rel", t.drop_rel),
            ("drop_abs", t.drop_abs),
            ("drop_floor", t.drop_floor),
            ("occupancy_l1", t.occupancy_l1),
            ("availability_abs", t.availability_abs),
            ("delay_rel", t.delay_rel),
        ] {
            line(format!("{k} = {v:?}"));
        }
        out
    }

    /// Thresholds in dB, for reports.
    pub fn thresholds_db(&self) -> Vec<f64> {
        self.model.thresholds.iter().map(|&t| linear_to_db(t)).collect()
    }
}

mod erased {
    /// Quoted kebab-case name of a unit enum, via its serde form.
    pub trait Kebab {
        fn kebab(&self) -> String;
    }

    impl<T: serde::Serialize> Kebab for T {
        fn kebab(&self) -> String {
            toml::Value::try_from(self).map(|v| v.to_string()).unwrap_or_default()
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_link(spec: &mut LinkSpec, link: Option<RawLink>, access: Option<RawAccess>) {
    if let Some(l) = link {
        set(&mut spec.m, l.m);
        set(&mut spec.snr_offset_db, l.snr_offset_db);
        set(&mut spec.doppler_hz, l.doppler_hz);
    }
    if let Some(a) = access {
        spec.access = SpectrumAccess {
            q: a.q.unwrap_or(spec.access.q),
            u: a.u.unwrap_or(spec.access.u),
        };
    }
}

/// Parameter errors found while loading a file become config errors (exit 2).
fn rekey(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidParameter { name, reason } => Error::config(format!("{section}.{name}"), reason),
        Error::InvalidTable(reason) => Error::config(section, reason),
        e => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRESET: &str = "preset = \"paper-default\"\n";

    fn with_preset(body: &str) -> Result<Config> {
        Config::from_toml_str(&format!("{PRESET}{body}"))
    }

    #[test]
    fn preset_alone_is_reference_scenario() {
        assert_eq!(with_preset("").unwrap(), Config::paper_default());
    }

    #[test]
    fn missing_key_without_preset_is_named() {
        let e = Config::from_toml_str("").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "system.packet_bits"), "{e}");
        let echo = Config::paper_default().to_toml().replace("lambda = 1.0\n", "");
        let e = Config::from_toml_str(&echo).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "traffic.lambda"), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        let c = Config::paper_default();
        let back = Config::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back.model, c.model);
        assert_eq!(back, c);
        let mut mm = with_preset("[traffic]\nmmpp_rates = [1.0, 2.0]\nmmpp_switch = [[0.9, 0.1], [0.1, 0.9]]\n").unwrap();
        mm.optimizer.delay_budget = Some(12.5);
        assert_eq!(Config::from_toml_str(&mm.to_toml()).unwrap(), mm);
    }

    #[test]
    fn negative_buffer_is_rejected() {
        let e = with_preset("[system]\nbuffer = -1\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn overrides_land_in_their_fields() {
        let c = with_preset(
            r#"
            [system]
            buffer = 10
            [traffic]
            lambda = 2.0
            [link.AD]
            snr_offset_db = -6.0
            [access.RD]
            q = 2.0
            u = 1.0
            [optimizer]
            delay_budget = 20.0
            "#,
        )
        .unwrap();
        assert_eq!(c.model.system.buffer, 10);
        assert_eq!(c.model.traffic.mean_rate, 2.0);
        assert_eq!(c.model.direct.snr_offset_db, -6.0);
        assert!((c.model.relay_dest.access.available() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.optimizer.delay_budget, Some(20.0));
    }

    #[test]
    fn mmpp_sets_mean_rate() {
        let c = with_preset(
            r#"
            [traffic]
            mmpp_rates = [1.0, 2.0]
            mmpp_switch = [[0.9, 0.1], [0.1, 0.9]]
            "#,
        )
        .unwrap();
        assert!((c.model.traffic.mean_rate - 1.5).abs() < 1e-9);
        let bad = with_preset(
            r#"
            [traffic]
            lambda = 1.0
            mmpp_rates = [1.0, 2.0]
            mmpp_switch = [[0.9, 0.1], [0.1, 0.9]]
            "#,
        );
        assert!(matches!(bad, Err(Error::Config { key, .. }) if key == "traffic.lambda"));
    }

    #[test]
    fn explicit_thresholds() {
        let c = with_preset(
            r#"
            [amc]
            thresholds_db = [4.0, 9.0, 12.0, 16.0, 19.0, 22.0, 25.0]
            "#,
        )
        .unwrap();
        assert_eq!(c.boundaries, BoundaryPolicy::Explicit);
        assert!((c.thresholds_db()[1] - 9.0).abs() < 1e-12);
        let short = with_preset("[amc]\nthresholds_db = [4.0]\n");
        assert!(matches!(short, Err(Error::Config { key, .. }) if key == "amc.thresholds_db"));
    }

    #[test]
    fn errors_name_the_key() {
        let unknown = with_preset("[system]\nbuffr = 3\n").unwrap_err();
        assert_eq!(unknown.exit_code(), 2);
        assert!(unknown.to_string().contains("buffr"), "{unknown}");
        let range = with_preset("[optimizer]\nalpha = 1.5\n").unwrap_err();
        assert!(matches!(range, Error::Config { key, .. } if key == "optimizer.alpha"));
        let nested = with_preset("[link.AR]\nm = 0.2\n").unwrap_err();
        assert!(matches!(&nested, Error::Config { key, .. } if key == "model.m"), "{nested}");
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                Config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                n += 1;
            }
        }
        assert!(n >= 3);
        let reference = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper-default.toml")).unwrap();
        assert_eq!(reference, Config::paper_default());
    }
}
