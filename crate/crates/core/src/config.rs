//! Scenario configuration.
//!
//! A scenario is a TOML document with one section per subsystem. Every key
//! has a default, so the smallest useful file sets only `sim.seed` and
//! `sim.nodes`. [`ScenarioConfig::validate`] reports every violated parameter
//! boundary at once.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{ConstituentResourceMix, ResourcePowerProfile};
use crate::error::{Error, Result};
use crate::flows::{EnvironmentParams, IndividualParams, ProbabilityModelConfig, SinkParams};
use crate::radio::RadioModelParams;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sim: SimConfig,
    pub energy: EnergyConfig,
    pub flows: FlowsConfig,
    pub radio: RadioModelParams,
    pub sweep: SweepConfig,
}

/// How a handled packet is turned into joules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeMode {
    /// Per-resource costs of the resources the packet touches.
    #[default]
    Resource,
    /// The constituent's coefficient from the resource mix; makes energy an
    /// exact linear function of the constituent flows.
    Mix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub nodes: u32,
    /// Width and height of the deployment area, meters.
    pub area: [f64; 2],
    /// Sink positions. Sinks form one group at a fixed location.
    pub sinks: Vec<[f64; 2]>,
    /// Slice length, seconds.
    pub dt: f64,
    pub init_slices: u32,
    /// Slices per epoch, initialization included.
    pub total_slices: u32,
    pub epochs: u32,
    /// Collection slices between periodic maintenance rounds; 0 disables.
    pub maintenance_interval: u32,
    pub maintenance_slices: u32,
    /// Route repair reaches nodes within this many hops of a failure;
    /// unset means the whole network.
    pub repair_hop_radius: Option<u32>,
    /// Mean events per node per slice.
    pub event_rate: f64,
    /// Per-slice request/reply probe of each node's next hop.
    pub monitoring: bool,
    /// Initial battery per node, joules.
    pub initial_battery: f64,
    pub bits_per_packet: f64,
    pub charge_mode: ChargeMode,
    /// Keep the per-packet ledger in the run output.
    pub keep_ledger: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            nodes: 25,
            area: [100.0, 100.0],
            sinks: vec![[0.0, 48.0], [0.0, 50.0], [0.0, 52.0]],
            dt: 1.0,
            init_slices: 3,
            total_slices: 60,
            epochs: 1,
            maintenance_interval: 10,
            maintenance_slices: 2,
            repair_hop_radius: None,
            event_rate: 6.0,
            monitoring: true,
            initial_battery: 0.5,
            bits_per_packet: 1000.0,
            charge_mode: ChargeMode::Resource,
            keep_ledger: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub profile: ResourcePowerProfile,
    pub mix: ConstituentResourceMix,
}

/// Local-constituent settings shared by all nodes; neighbor count and
/// neighbor distance come from the topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    pub r_tx: f64,
    pub g_tx: f64,
    pub idle_power: f64,
    pub b_mon: f64,
    pub b_sec: f64,
    pub b_ohead: f64,
    pub b_retx: f64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            r_tx: 30.0,
            g_tx: 0.01,
            idle_power: 0.0,
            b_mon: 1.0,
            b_sec: 0.0,
            b_ohead: 0.0,
            b_retx: 0.0,
        }
    }
}

/// Global-constituent settings; distance to sink comes from the topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub b_sec: f64,
    pub b_topo: f64,
    pub b_rout: f64,
    pub b_ohead: f64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            b_sec: 0.0,
            b_topo: 2.0,
            b_rout: 2.0,
            b_ohead: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowsConfig {
    pub individual: IndividualParams,
    pub local: LocalConfig,
    pub global: GlobalConfig,
    pub environment: EnvironmentParams,
    pub sink: SinkParams,
    pub probabilities: ProbabilityModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Master seed; required when sweeping.
    pub seed: Option<u64>,
    pub runs: u32,
    /// Parameter name to inclusive `[low, high]` range.
    pub ranges: BTreeMap<String, [f64; 2]>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let ranges = [
            ("r_sense", [5.0, 15.0]),
            ("g_sense", [0.0, 4.0]),
            ("b_os", [1.0, 8.0]),
            ("b_sec_individual", [0.0, 2.0]),
            ("r_tx", [24.0, 40.0]),
            ("g_tx", [0.005, 0.02]),
            ("b_mon", [1.0, 3.0]),
            ("b_topo", [1.0, 3.0]),
            ("b_rout", [1.0, 3.0]),
            ("event_rate", [1.0, 6.0]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            seed: None,
            runs: 50,
            ranges,
        }
    }
}

/// Parameters a sweep may vary.
pub const SWEEP_PARAMETERS: &[&str] = &[
    "r_sense",
    "g_sense",
    "b_os",
    "b_sec_individual",
    "b_store",
    "r_tx",
    "g_tx",
    "idle_power",
    "b_mon",
    "b_sec_local",
    "b_ohead_local",
    "b_retx",
    "b_sec_global",
    "b_topo",
    "b_rout",
    "b_ohead_global",
    "nodes",
    "event_rate",
];

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Probability model with the overhearing area taken from the deployment.
    pub fn probabilities(&self) -> ProbabilityModelConfig {
        ProbabilityModelConfig {
            area_m2: self.sim.area[0] * self.sim.area[1],
            ..self.flows.probabilities
        }
    }

    /// Every violated boundary, empty when the config is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.sim;
        if s.nodes < 1 {
            out.push(format!("sim.nodes = {}: need at least one node", s.nodes));
        }
        let [w, h] = s.area;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            out.push(format!("sim.area = [{w}, {h}]: both sides must be > 0"));
        }
        if s.sinks.is_empty() {
            out.push("sim.sinks: at least one sink is required".to_string());
        }
        for (i, [x, y]) in s.sinks.iter().enumerate() {
            if !(0.0..=w).contains(x) || !(0.0..=h).contains(y) {
                out.push(format!("sim.sinks[{i}] = [{x}, {y}]: sink lies outside the area"));
            }
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            out.push(format!("sim.dt = {}: must be > 0", s.dt));
        }
        if s.init_slices < 1 {
            out.push("sim.init_slices = 0: initialization needs at least one slice".to_string());
        }
        if s.total_slices < s.init_slices {
            out.push(format!(
                "sim.total_slices = {}: must be >= sim.init_slices ({})",
                s.total_slices, s.init_slices
            ));
        }
        if s.epochs < 1 {
            out.push("sim.epochs = 0: must be >= 1".to_string());
        }
        if s.maintenance_interval > 0 && s.maintenance_slices < 1 {
            out.push("sim.maintenance_slices = 0: periodic maintenance needs at least one slice".to_string());
        }
        if !(s.event_rate >= 0.0 && s.event_rate.is_finite()) {
            out.push(format!("sim.event_rate = {}: must be >= 0", s.event_rate));
        }
        if !(s.initial_battery >= 0.0 && s.initial_battery.is_finite()) {
            out.push(format!("sim.initial_battery = {}: must be >= 0", s.initial_battery));
        }
        if !(s.bits_per_packet > 0.0 && s.bits_per_packet.is_finite()) {
            out.push(format!("sim.bits_per_packet = {}: must be > 0", s.bits_per_packet));
        }

        if let Err(e) = self.energy.profile.validate() {
            out.push(format!("energy.profile: {e}"));
        }
        if let Err(e) = self.energy.mix.validate() {
            out.push(format!("energy.mix: {e}"));
        }

        let f = &self.flows;
        out.extend(f.individual.violations());
        let l = &f.local;
        for (name, v) in [
            ("r_tx", l.r_tx),
            ("g_tx", l.g_tx),
            ("idle_power", l.idle_power),
            ("b_mon", l.b_mon),
            ("b_sec", l.b_sec),
            ("b_ohead", l.b_ohead),
            ("b_retx", l.b_retx),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("flows.local.{name} = {v}: violates boundary {name} >= 0"));
            }
        }
        let g = &f.global;
        for (name, v) in [
            ("b_sec", g.b_sec),
            ("b_topo", g.b_topo),
            ("b_rout", g.b_rout),
            ("b_ohead", g.b_ohead),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("flows.global.{name} = {v}: violates boundary {name} >= 0"));
            }
        }
        out.extend(f.environment.violations());
        out.extend(f.sink.violations());
        out.extend(self.probabilities().violations());
        out.extend(self.radio.violations());

        for (key, [lo, hi]) in &self.sweep.ranges {
            if !SWEEP_PARAMETERS.contains(&key.as_str()) {
                out.push(format!("sweep.ranges.{key}: unknown parameter"));
            } else if !(lo <= hi) {
                out.push(format!("sweep.ranges.{key} = [{lo}, {hi}]: low end exceeds high end"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Sets one sweepable parameter.
    pub fn set_parameter(&mut self, key: &str, value: f64) -> Result<()> {
        let f = &mut self.flows;
        match key {
            "r_sense" => f.individual.r_sense = value,
            "g_sense" => f.individual.g_sense = value,
            "b_os" => f.individual.b_os = value.round(),
            "b_sec_individual" => f.individual.b_sec = value.round(),
            "b_store" => f.individual.b_store = value.round(),
            "r_tx" => f.local.r_tx = value,
            "g_tx" => f.local.g_tx = value,
            "idle_power" => f.local.idle_power = value,
            "b_mon" => f.local.b_mon = value.round(),
            "b_sec_local" => f.local.b_sec = value.round(),
            "b_ohead_local" => f.local.b_ohead = value.round(),
            "b_retx" => f.local.b_retx = value.round(),
            "b_sec_global" => f.global.b_sec = value.round(),
            "b_topo" => f.global.b_topo = value.round(),
            "b_rout" => f.global.b_rout = value.round(),
            "b_ohead_global" => f.global.b_ohead = value.round(),
            "nodes" => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::arg("nodes", value, "node count must be >= 0"));
                }
                self.sim.nodes = value.round() as u32
            }
            "event_rate" => self.sim.event_rate = value,
            other => return Err(Error::Parse(format!("unknown sweep parameter '{other}'"))),
        }
        Ok(())
    }

    /// Current value of a sweepable parameter.
    pub fn parameter(&self, key: &str) -> Option<f64> {
        let f = &self.flows;
        Some(match key {
            "r_sense" => f.individual.r_sense,
            "g_sense" => f.individual.g_sense,
            "b_os" => f.individual.b_os,
            "b_sec_individual" => f.individual.b_sec,
            "b_store" => f.individual.b_store,
            "r_tx" => f.local.r_tx,
            "g_tx" => f.local.g_tx,
            "idle_power" => f.local.idle_power,
            "b_mon" => f.local.b_mon,
            "b_sec_local" => f.local.b_sec,
            "b_ohead_local" => f.local.b_ohead,
            "b_retx" => f.local.b_retx,
            "b_sec_global" => f.global.b_sec,
            "b_topo" => f.global.b_topo,
            "b_rout" => f.global.b_rout,
            "b_ohead_global" => f.global.b_ohead,
            "nodes" => f64::from(self.sim.nodes),
            "event_rate" => self.sim.event_rate,
            _ => return None,
        })
    }

    /// Checks that both ends of every sweep range give a valid scenario.
    pub fn validate_sweep_ranges(&self) -> Result<()> {
        let mut out = Vec::new();
        for (key, [lo, hi]) in &self.sweep.ranges {
            for end in [*lo, *hi] {
                let mut probe = self.clone();
                if let Err(e) = probe.set_parameter(key, end) {
                    out.push(format!("sweep.ranges.{key}: {e}"));
                    continue;
                }
                for v in probe.violations() {
                    out.push(format!("sweep.ranges.{key} endpoint {end}: {v}"));
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ScenarioConfig::from_toml_str("[sim]\nseed = 7\nnodes = 2\n").unwrap();
        assert_eq!(cfg.sim.seed, 7);
        assert_eq!(cfg.sim.nodes, 2);
        assert_eq!(cfg.flows.local.r_tx, 30.0);
        assert_eq!(cfg.sim.init_slices, 3);
    }

    #[test]
    fn zero_sensing_radius_rejected() {
        let err = ScenarioConfig::from_toml_str("[flows.individual]\nr_sense = 0.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("r_sense > 0"), "{msg}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "[sim]\nnodes = 0\ndt = -1.0\n[flows.local]\nb_mon = -2.0\n[flows.individual]\nr_sense = 0.0\n";
        match ScenarioConfig::from_toml_str(text).unwrap_err() {
            Error::InvalidConfig(v) => {
                assert_eq!(v.len(), 4, "{v:?}");
                assert!(v.iter().any(|m| m.contains("b_mon = -2")));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn sink_outside_area_rejected() {
        let err = ScenarioConfig::from_toml_str("[sim]\nsinks = [[150.0, 10.0]]\n").unwrap_err();
        assert!(err.to_string().contains("outside"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_toml_str("[sim]\nnodez = 3\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::default();
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn sweep_range_boundaries() {
        let mut cfg = ScenarioConfig::default();
        assert!(cfg.validate_sweep_ranges().is_ok());
        cfg.sweep.ranges.insert("r_sense".into(), [0.0, 5.0]);
        assert!(cfg.validate_sweep_ranges().is_err());
    }
}
