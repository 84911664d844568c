//! Per-constituent packet-flow models.
//!
//! Several constituent totals are defined in terms of themselves: a fraction
//! of the Individual flow is sensing traffic, a fraction of the Local flow is
//! collisions, overhearing and idle listening, and a fraction of the Global
//! flow is retransmission after loss. Solving `b = base + p * b` gives the
//! closed form `b = base / (1 - p)`, which is what every function here uses.
//!
//! The conditional probabilities are modeled with small monotone forms whose
//! coefficients live in [`ProbabilityModelConfig`]; every value is clamped to
//! `[0, p_cap]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominators of the closed forms below this value are rejected.
pub const DIVISION_GUARD: f64 = 1e-9;

/// Largest admissible cap; keeps the three local probabilities summing below 1.
pub const MAX_P_CAP: f64 = 0.33;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbabilityModelConfig {
    /// Coverage coefficient of the sensing probability, 1/m^2.
    pub sigma: f64,
    pub kappa_coll: f64,
    pub kappa_ohear: f64,
    pub kappa_idle: f64,
    /// Per-hop loss numerator; per-hop loss is `kappa_loss / net_dens`.
    pub kappa_loss: f64,
    /// Deployment area used by the overhearing model, m^2.
    pub area_m2: f64,
    pub p_cap: f64,
}

impl Default for ProbabilityModelConfig {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            kappa_coll: 0.05,
            kappa_ohear: 0.1,
            kappa_idle: 0.3,
            kappa_loss: 0.5,
            area_m2: 10_000.0,
            p_cap: 0.3,
        }
    }
}

impl ProbabilityModelConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("sigma", self.sigma),
            ("kappa_coll", self.kappa_coll),
            ("kappa_ohear", self.kappa_ohear),
            ("kappa_idle", self.kappa_idle),
            ("kappa_loss", self.kappa_loss),
        ] {
            if !v.is_finite() || v < 0.0 {
                out.push(format!("flows.probabilities.{name} = {v}: must be finite and >= 0"));
            }
        }
        if !self.area_m2.is_finite() || self.area_m2 <= 0.0 {
            out.push(format!("flows.probabilities.area_m2 = {}: must be > 0", self.area_m2));
        }
        if !(0.0..=MAX_P_CAP).contains(&self.p_cap) {
            out.push(format!(
                "flows.probabilities.p_cap = {}: must lie in [0, {MAX_P_CAP}]",
                self.p_cap
            ));
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

    fn clamp(&self, p: f64) -> f64 {
        p.clamp(0.0, self.p_cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndividualParams {
    pub r_sense: f64,
    pub g_sense: f64,
    pub b_os: f64,
    pub b_sec: f64,
    /// Stored packets. Carried for reporting; no flow equation uses it.
    pub b_store: f64,
}

impl Default for IndividualParams {
    fn default() -> Self {
        Self {
            r_sense: 10.0,
            g_sense: 2.0,
            b_os: 4.0,
            b_sec: 1.0,
            b_store: 0.0,
        }
    }
}

impl IndividualParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.r_sense > 0.0 && self.r_sense.is_finite()) {
            out.push(format!(
                "flows.individual.r_sense = {}: violates boundary r_sense > 0",
                self.r_sense
            ));
        }
        nonneg(&mut out, "flows.individual", "g_sense", self.g_sense);
        nonneg(&mut out, "flows.individual", "b_os", self.b_os);
        nonneg(&mut out, "flows.individual", "b_sec", self.b_sec);
        nonneg(&mut out, "flows.individual", "b_store", self.b_store);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalParams {
    /// Neighbor count.
    pub n: u32,
    /// Total nodes in the network.
    pub net_dens: u32,
    pub g_tx: f64,
    pub r_tx: f64,
    /// Distance to the neighbor in question.
    pub d_ij: f64,
    /// Idle listening cost, joules per packet.
    pub idle_power: f64,
    pub b_mon: f64,
    pub b_sec: f64,
    pub b_ohead: f64,
    pub b_retx: f64,
}

impl Default for LocalParams {
    fn default() -> Self {
        Self {
            n: 1,
            net_dens: 25,
            g_tx: 0.01,
            r_tx: 30.0,
            d_ij: 30.0,
            idle_power: 0.0,
            b_mon: 1.0,
            b_sec: 0.0,
            b_ohead: 0.0,
            b_retx: 0.0,
        }
    }
}

impl LocalParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 1 {
            out.push(format!("flows.local.n = {}: violates boundary n >= 1", self.n));
        }
        if self.net_dens < 1 {
            out.push(format!(
                "flows.local.net_dens = {}: violates boundary net_dens >= 1",
                self.net_dens
            ));
        }
        nonneg(&mut out, "flows.local", "g_tx", self.g_tx);
        nonneg(&mut out, "flows.local", "r_tx", self.r_tx);
        if !(self.d_ij > 0.0 && self.d_ij <= self.r_tx) {
            out.push(format!(
                "flows.local.d_ij = {}: violates boundary 0 < d_ij <= r_tx ({})",
                self.d_ij, self.r_tx
            ));
        }
        nonneg(&mut out, "flows.local", "idle_power", self.idle_power);
        nonneg(&mut out, "flows.local", "b_mon", self.b_mon);
        nonneg(&mut out, "flows.local", "b_sec", self.b_sec);
        nonneg(&mut out, "flows.local", "b_ohead", self.b_ohead);
        nonneg(&mut out, "flows.local", "b_retx", self.b_retx);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalParams {
    /// Distance to the nearest sink, meters.
    pub dist_to_sink: f64,
    pub net_dens: u32,
    pub b_sec: f64,
    pub b_topo: f64,
    pub b_rout: f64,
    pub b_ohead: f64,
}

impl Default for GlobalParams {
    fn default() -> Self {
        Self {
            dist_to_sink: 0.0,
            net_dens: 25,
            b_sec: 0.0,
            b_topo: 1.0,
            b_rout: 1.0,
            b_ohead: 0.0,
        }
    }
}

impl GlobalParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        nonneg(&mut out, "flows.global", "dist_to_sink", self.dist_to_sink);
        if self.net_dens < 1 {
            out.push(format!(
                "flows.global.net_dens = {}: violates boundary net_dens >= 1",
                self.net_dens
            ));
        }
        nonneg(&mut out, "flows.global", "b_sec", self.b_sec);
        nonneg(&mut out, "flows.global", "b_topo", self.b_topo);
        nonneg(&mut out, "flows.global", "b_rout", self.b_rout);
        nonneg(&mut out, "flows.global", "b_ohead", self.b_ohead);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentParams {
    /// Harvested power, watts. Not part of any flow equation.
    pub harvested_power: f64,
    pub b_ph: f64,
    pub b_sec: f64,
}

impl EnvironmentParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        nonneg(&mut out, "flows.environment", "harvested_power", self.harvested_power);
        nonneg(&mut out, "flows.environment", "b_ph", self.b_ph);
        nonneg(&mut out, "flows.environment", "b_sec", self.b_sec);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinkParams {
    pub b_ohead: f64,
    pub b_sec: f64,
}

impl SinkParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        nonneg(&mut out, "flows.sink", "b_ohead", self.b_ohead);
        nonneg(&mut out, "flows.sink", "b_sec", self.b_sec);
        out
    }
}

fn nonneg(out: &mut Vec<String>, section: &str, name: &str, v: f64) {
    if !(v.is_finite() && v >= 0.0) {
        out.push(format!("{section}.{name} = {v}: violates boundary {name} >= 0"));
    }
}

fn check(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(violations))
    }
}

/// `base / (1 - p)`, guarded against a vanishing denominator.
fn self_referential_total(constituent: &'static str, base: f64, p: f64) -> Result<f64> {
    let denom = 1.0 - p;
    if !(denom >= DIVISION_GUARD) {
        return Err(Error::Singularity {
            constituent,
            probability: p,
            guard: DIVISION_GUARD,
        });
    }
    Ok(base / denom)
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(name, p, "probability must lie in [0, 1]"));
    }
    Ok(())
}

fn check_count(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::arg(name, v, "flow count must be finite and >= 0"));
    }
    Ok(())
}

/// Probability that a packet of the Individual flow is a sensed packet:
/// `sigma r^2 / (sigma r^2 + g + 1)`, capped.
pub fn p_sense(r_sense: f64, g_sense: f64, cfg: &ProbabilityModelConfig) -> Result<f64> {
    if !(r_sense > 0.0 && r_sense.is_finite()) {
        return Err(Error::arg("r_sense", r_sense, "must be > 0"));
    }
    if !(g_sense >= 0.0 && g_sense.is_finite()) {
        return Err(Error::arg("g_sense", g_sense, "must be >= 0"));
    }
    let cover = cfg.sigma * r_sense * r_sense;
    Ok(cfg.clamp(cover / (cover + g_sense + 1.0)))
}

/// Collision probability, `kappa_c * n * g_tx * net_dens`, capped.
pub fn p_coll(n: u32, g_tx: f64, net_dens: u32, cfg: &ProbabilityModelConfig) -> Result<f64> {
    check_neighbors(n, net_dens)?;
    if !(g_tx >= 0.0 && g_tx.is_finite()) {
        return Err(Error::arg("g_tx", g_tx, "must be >= 0"));
    }
    Ok(cfg.clamp(cfg.kappa_coll * f64::from(n) * g_tx * f64::from(net_dens)))
}

/// Overhearing probability, `kappa_o * n * r_tx^2 / area`, capped.
pub fn p_ohear(n: u32, net_dens: u32, r_tx: f64, cfg: &ProbabilityModelConfig) -> Result<f64> {
    check_neighbors(n, net_dens)?;
    if !(r_tx >= 0.0 && r_tx.is_finite()) {
        return Err(Error::arg("r_tx", r_tx, "must be >= 0"));
    }
    Ok(cfg.clamp(cfg.kappa_ohear * f64::from(n) * r_tx * r_tx / cfg.area_m2))
}

/// Idle-listening probability, `kappa_i / (n + 1)`, capped.
pub fn p_idle(n: u32, cfg: &ProbabilityModelConfig) -> Result<f64> {
    if n < 1 {
        return Err(Error::arg("n", f64::from(n), "must be >= 1"));
    }
    Ok(cfg.clamp(cfg.kappa_idle / (f64::from(n) + 1.0)))
}

fn check_neighbors(n: u32, net_dens: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::arg("n", f64::from(n), "must be >= 1"));
    }
    if net_dens < 1 {
        return Err(Error::arg("net_dens", f64::from(net_dens), "must be >= 1"));
    }
    Ok(())
}

/// Loss probability over `hops` independent hops of per-hop loss `p_hop`.
pub fn loss_over_hops(p_hop: f64, hops: u32) -> f64 {
    1.0 - (1.0 - p_hop).powi(hops as i32)
}

/// Per-hop loss for a network of `net_dens` nodes.
pub fn p_hop(net_dens: u32, cfg: &ProbabilityModelConfig) -> f64 {
    (cfg.kappa_loss / f64::from(net_dens.max(1))).min(0.5)
}

/// End-to-end loss toward a sink at distance `dist`, with `ceil(dist / r_tx)` hops.
pub fn p_pktls(dist: f64, r_tx: f64, net_dens: u32, cfg: &ProbabilityModelConfig) -> Result<f64> {
    if !(dist >= 0.0 && dist.is_finite()) {
        return Err(Error::arg("dist_to_sink", dist, "must be >= 0"));
    }
    if net_dens < 1 {
        return Err(Error::arg("net_dens", f64::from(net_dens), "must be >= 1"));
    }
    if dist == 0.0 {
        return Ok(0.0);
    }
    if !(r_tx > 0.0 && r_tx.is_finite()) {
        return Err(Error::arg(
            "r_tx",
            r_tx,
            "sink unreachable with zero transmission radius",
        ));
    }
    let hops = (dist / r_tx).ceil() as u32;
    Ok(cfg.clamp(loss_over_hops(p_hop(net_dens, cfg), hops)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndividualFlow {
    pub b_individual: f64,
    pub b_sens: f64,
}

/// Individual flow for a given sensing probability.
pub fn individual_flow_given(p_sense: f64, b_os: f64, b_sec: f64) -> Result<IndividualFlow> {
    check_probability("p_sense", p_sense)?;
    check_count("b_os", b_os)?;
    check_count("b_sec", b_sec)?;
    let total = self_referential_total("individual", b_os + b_sec, p_sense)?;
    Ok(IndividualFlow {
        b_individual: total,
        b_sens: p_sense * total,
    })
}

pub fn individual_flow(params: &IndividualParams, cfg: &ProbabilityModelConfig) -> Result<IndividualFlow> {
    check(params.violations())?;
    let p = p_sense(params.r_sense, params.g_sense, cfg)?;
    individual_flow_given(p, params.b_os, params.b_sec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProbabilities {
    pub coll: f64,
    pub ohear: f64,
    pub idle: f64,
}

impl LocalProbabilities {
    pub fn sum(&self) -> f64 {
        self.coll + self.ohear + self.idle
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFlow {
    pub b_local: f64,
    pub b_coll: f64,
    pub b_idle: f64,
    pub b_ohear: f64,
}

pub fn local_probabilities(params: &LocalParams, cfg: &ProbabilityModelConfig) -> Result<LocalProbabilities> {
    Ok(LocalProbabilities {
        coll: p_coll(params.n, params.g_tx, params.net_dens, cfg)?,
        ohear: p_ohear(params.n, params.net_dens, params.r_tx, cfg)?,
        idle: p_idle(params.n, cfg)?,
    })
}

/// Local flow for given probabilities and explicit traffic
/// (`b_sec + b_mon + b_ohead`).
pub fn local_flow_given(probs: LocalProbabilities, explicit: f64) -> Result<LocalFlow> {
    check_probability("p_coll", probs.coll)?;
    check_probability("p_ohear", probs.ohear)?;
    check_probability("p_idle", probs.idle)?;
    check_count("b_sec + b_mon + b_ohead", explicit)?;
    let total = self_referential_total("local", explicit, probs.sum())?;
    Ok(LocalFlow {
        b_local: total,
        b_coll: probs.coll * total,
        b_idle: probs.idle * total,
        b_ohear: probs.ohear * total,
    })
}

pub fn local_flow(params: &LocalParams, cfg: &ProbabilityModelConfig) -> Result<LocalFlow> {
    check(params.violations())?;
    let probs = local_probabilities(params, cfg)?;
    local_flow_given(probs, params.b_sec + params.b_mon + params.b_ohead)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalFlow {
    pub b_global: f64,
    pub b_pktls: f64,
}

/// Global flow for a given loss probability and explicit traffic
/// (`b_sec + b_topo + b_rout + b_ohead`).
pub fn global_flow_given(p_pktls: f64, explicit: f64) -> Result<GlobalFlow> {
    check_probability("p_pktls", p_pktls)?;
    check_count("b_sec + b_topo + b_rout + b_ohead", explicit)?;
    let total = self_referential_total("global", explicit, p_pktls)?;
    Ok(GlobalFlow {
        b_global: total,
        b_pktls: p_pktls * total,
    })
}

/// `r_tx` sets the hop length of the loss model.
pub fn global_flow(params: &GlobalParams, r_tx: f64, cfg: &ProbabilityModelConfig) -> Result<GlobalFlow> {
    check(params.violations())?;
    let p = p_pktls(params.dist_to_sink, r_tx, params.net_dens, cfg)?;
    global_flow_given(p, params.b_sec + params.b_topo + params.b_rout + params.b_ohead)
}

pub fn environment_flow(params: &EnvironmentParams) -> Result<f64> {
    check(params.violations())?;
    Ok(params.b_sec + params.b_ph)
}

pub fn sink_flow(params: &SinkParams) -> Result<f64> {
    check(params.violations())?;
    Ok(params.b_sec + params.b_ohead)
}
