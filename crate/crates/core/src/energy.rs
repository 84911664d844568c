//! Resource-level and constituent-level energy models.
//!
//! A task's energy is the sum over hardware resources of a per-packet cost
//! times the number of packets that resource handled. Grouping packets by
//! constituent collapses this into one coefficient per constituent, so the
//! overall energy of a node is a linear form in its constituent flows.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five task categories every energy-consuming activity falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constituent {
    Individual,
    Local,
    Global,
    Environment,
    Sink,
}

impl Constituent {
    pub const ALL: [Constituent; 5] = [
        Constituent::Individual,
        Constituent::Local,
        Constituent::Global,
        Constituent::Environment,
        Constituent::Sink,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Trace column name, e.g. `b_global`.
    pub fn column(self) -> &'static str {
        match self {
            Constituent::Individual => "b_individual",
            Constituent::Local => "b_local",
            Constituent::Global => "b_global",
            Constituent::Environment => "b_environment",
            Constituent::Sink => "b_snk",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constituent::Individual => "individual",
            Constituent::Local => "local",
            Constituent::Global => "global",
            Constituent::Environment => "environment",
            Constituent::Sink => "sink",
        }
    }
}

impl fmt::Display for Constituent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constituent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "individual" | "ind" | "b_individual" | "b_ind" => Ok(Constituent::Individual),
            "local" | "b_local" => Ok(Constituent::Local),
            "global" | "b_global" => Ok(Constituent::Global),
            "environment" | "env" | "b_environment" | "b_env" => Ok(Constituent::Environment),
            "sink" | "snk" | "b_snk" | "b_sink" => Ok(Constituent::Sink),
            other => Err(Error::Parse(format!("unknown constituent '{other}'"))),
        }
    }
}

/// Per-packet energy cost of each hardware resource, in joules per packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePowerProfile {
    pub p_cpu: f64,
    pub p_mem: f64,
    pub p_rx: f64,
    pub p_tx: f64,
    pub p_sens: f64,
}

impl ResourcePowerProfile {
    pub fn new(p_cpu: f64, p_mem: f64, p_rx: f64, p_tx: f64, p_sens: f64) -> Result<Self> {
        let p = Self {
            p_cpu,
            p_mem,
            p_rx,
            p_tx,
            p_sens,
        };
        p.validate()?;
        Ok(p)
    }

    /// Costs in resource order: cpu, mem, rx, tx, sens.
    pub fn as_array(&self) -> [f64; 5] {
        [self.p_cpu, self.p_mem, self.p_rx, self.p_tx, self.p_sens]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            p_cpu: self.p_cpu * c,
            p_mem: self.p_mem * c,
            p_rx: self.p_rx * c,
            p_tx: self.p_tx * c,
            p_sens: self.p_sens * c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        const NAMES: [&str; 5] = ["p_cpu", "p_mem", "p_rx", "p_tx", "p_sens"];
        for (name, v) in NAMES.iter().zip(self.as_array()) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::arg(name, v, "resource cost must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

impl Default for ResourcePowerProfile {
    /// Synthetic defaults sized for a 1000-bit packet on a low-power radio.
    fn default() -> Self {
        Self {
            p_cpu: 1.0e-5,
            p_mem: 5.0e-6,
            p_rx: 5.0e-5,
            p_tx: 6.0e-5,
            p_sens: 2.0e-5,
        }
    }
}

/// Packets handled by each resource while executing a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResourceUsageVector {
    pub b_cpu: u64,
    pub b_mem: u64,
    pub b_rx: u64,
    pub b_tx: u64,
    pub b_sens: u64,
}

impl ResourceUsageVector {
    pub const fn new(b_cpu: u64, b_mem: u64, b_rx: u64, b_tx: u64, b_sens: u64) -> Self {
        Self {
            b_cpu,
            b_mem,
            b_rx,
            b_tx,
            b_sens,
        }
    }

    /// Builds a usage vector from real-valued counts, rejecting anything that
    /// is negative, non-finite or fractional.
    pub fn from_counts(counts: [f64; 5]) -> Result<Self> {
        const NAMES: [&str; 5] = ["b_cpu", "b_mem", "b_rx", "b_tx", "b_sens"];
        let mut out = [0u64; 5];
        for (i, (&c, name)) in counts.iter().zip(NAMES).enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::arg(name, c, "packet count must be finite and >= 0"));
            }
            if c.fract() != 0.0 || c > u64::MAX as f64 {
                return Err(Error::arg(name, c, "packet count must be an integer"));
            }
            out[i] = c as u64;
        }
        Ok(Self::new(out[0], out[1], out[2], out[3], out[4]))
    }

    pub fn as_array(&self) -> [u64; 5] {
        [self.b_cpu, self.b_mem, self.b_rx, self.b_tx, self.b_sens]
    }

    pub fn total(&self) -> u64 {
        self.as_array().iter().sum()
    }
}

impl Add for ResourceUsageVector {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            b_cpu: self.b_cpu + o.b_cpu,
            b_mem: self.b_mem + o.b_mem,
            b_rx: self.b_rx + o.b_rx,
            b_tx: self.b_tx + o.b_tx,
            b_sens: self.b_sens + o.b_sens,
        }
    }
}

impl AddAssign for ResourceUsageVector {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Per-packet resource weights for each constituent. Row `k` holds the
/// weights on (cpu, mem, rx, tx, sens) for constituent `Constituent::ALL[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstituentResourceMix(pub [[f64; 5]; 5]);

impl ConstituentResourceMix {
    pub fn new(rows: [[f64; 5]; 5]) -> Result<Self> {
        let m = Self(rows);
        m.validate()?;
        Ok(m)
    }

    pub fn row(&self, c: Constituent) -> [f64; 5] {
        self.0[c.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.0 {
            for &w in row {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::arg("lambda", w, "mix weight must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Coefficients implied by this mix under `profile`, all constituents active.
    pub fn coefficients(&self, profile: &ResourcePowerProfile) -> Result<CoefficientVector> {
        let mut alpha = [0.0; 5];
        for c in Constituent::ALL {
            alpha[c.index()] = constituent_alpha(&self.row(c), profile)?;
        }
        CoefficientVector::new(alpha, ConstituentMask::ALL)
    }
}

impl Default for ConstituentResourceMix {
    /// Average per-packet resource touches of the simulator's packet kinds.
    fn default() -> Self {
        Self([
            [1.0, 1.0, 0.0, 1.0, 1.0],
            [1.0, 0.0, 0.6, 0.4, 0.0],
            [1.0, 0.4, 0.5, 0.6, 0.0],
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 0.0],
        ])
    }
}

/// Set of constituents that take part in a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstituentMask(pub [bool; 5]);

impl ConstituentMask {
    pub const ALL: Self = Self([true; 5]);
    /// Individual, Local and Global only; the reduced model used when the
    /// sink and environment carry no traffic.
    pub const CORE: Self = Self([true, true, true, false, false]);

    pub fn contains(&self, c: Constituent) -> bool {
        self.0[c.index()]
    }

    pub fn active(&self) -> impl Iterator<Item = Constituent> + '_ {
        Constituent::ALL.into_iter().filter(|c| self.contains(*c))
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl FromStr for ConstituentMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => return Ok(Self::ALL),
            "core" => return Ok(Self::CORE),
            _ => {}
        }
        let mut mask = [false; 5];
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            mask[part.parse::<Constituent>()?.index()] = true;
        }
        if !mask.iter().any(|b| *b) {
            return Err(Error::Parse(format!("empty constituent mask '{s}'")));
        }
        Ok(Self(mask))
    }
}

impl fmt::Display for ConstituentMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.active().map(|c| c.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Energy per constituent packet, with an explicit mask of the constituents
/// that participate. Inactive entries are carried as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub alpha: [f64; 5],
    pub mask: ConstituentMask,
}

impl CoefficientVector {
    pub fn new(alpha: [f64; 5], mask: ConstituentMask) -> Result<Self> {
        let mut alpha = alpha;
        for c in Constituent::ALL {
            if mask.contains(c) {
                let v = alpha[c.index()];
                if !v.is_finite() {
                    return Err(Error::arg("alpha", v, "coefficient must be finite"));
                }
            } else {
                alpha[c.index()] = 0.0;
            }
        }
        Ok(Self { alpha, mask })
    }

    pub fn get(&self, c: Constituent) -> Option<f64> {
        self.mask.contains(c).then(|| self.alpha[c.index()])
    }
}

/// Packet-flow counts per constituent for one accounting window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstituentFlowVector(pub [f64; 5]);

impl ConstituentFlowVector {
    pub fn new(flows: [f64; 5]) -> Result<Self> {
        let v = Self(flows);
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        for &b in &self.0 {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::arg("flow", b, "flow count must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Index<Constituent> for ConstituentFlowVector {
    type Output = f64;

    fn index(&self, c: Constituent) -> &f64 {
        &self.0[c.index()]
    }
}

impl IndexMut<Constituent> for ConstituentFlowVector {
    fn index_mut(&mut self, c: Constituent) -> &mut f64 {
        &mut self.0[c.index()]
    }
}

impl Add for ConstituentFlowVector {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl AddAssign for ConstituentFlowVector {
    fn add_assign(&mut self, o: Self) {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a += b;
        }
    }
}

/// Energy spent by one task: each resource's per-packet cost times the
/// packets it handled. Transmit and receive together form the radio term.
pub fn task_energy(usage: &ResourceUsageVector, profile: &ResourcePowerProfile) -> Result<f64> {
    profile.validate()?;
    Ok(usage
        .as_array()
        .iter()
        .zip(profile.as_array())
        .map(|(&b, p)| p * b as f64)
        .sum())
}

/// Per-packet coefficient of one constituent given its resource weights.
pub fn constituent_alpha(weights: &[f64; 5], profile: &ResourcePowerProfile) -> Result<f64> {
    for &w in weights {
        if !w.is_finite() {
            return Err(Error::arg("lambda", w, "mix weight must be finite"));
        }
        if w < 0.0 {
            return Err(Error::arg("lambda", w, "mix weight must be >= 0"));
        }
    }
    profile.validate()?;
    Ok(weights.iter().zip(profile.as_array()).map(|(w, p)| w * p).sum())
}

/// Overall energy as the inner product of coefficients and flows over the
/// active constituents. A nonzero flow on an inactive constituent is an error.
pub fn overall_energy(alphas: &CoefficientVector, flows: &ConstituentFlowVector) -> Result<f64> {
    let mut total = 0.0;
    for c in Constituent::ALL {
        let b = flows[c];
        if !b.is_finite() {
            return Err(Error::arg("flow", b, "flow must be finite"));
        }
        match alphas.get(c) {
            Some(a) => {
                if !a.is_finite() {
                    return Err(Error::arg("alpha", a, "coefficient must be finite"));
                }
                total += a * b;
            }
            None if b != 0.0 => {
                return Err(Error::MaskMismatch(format!(
                    "{} has flow {b} but is not an active constituent",
                    c.column()
                )))
            }
            None => {}
        }
    }
    Ok(total)
}
