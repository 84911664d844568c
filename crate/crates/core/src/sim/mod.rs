//! Slice-stepped simulation of a sensing application.
//!
//! Nodes start up, discover neighbors and set up routes during
//! initialization, then sense events and relay data hop by hop toward the
//! nearest sink. When a next hop dies, or on a periodic schedule, the network
//! enters maintenance and floods topology and routing information to repair
//! routes. Every packet a node handles is charged against its battery and
//! tallied under one constituent; each slice yields one [`SliceRecord`].
//!
//! A run is a pure function of its [`ScenarioConfig`]: all randomness comes
//! from one seeded ChaCha stream consumed in a fixed order.

pub mod packet;
pub mod topology;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::{ChargeMode, ScenarioConfig};
use crate::energy::{task_energy, Constituent, ConstituentFlowVector, ResourcePowerProfile, ResourceUsageVector};
use crate::error::{Error, Result};
use crate::flows::{self, LocalProbabilities, ProbabilityModelConfig};

pub use packet::{classify_packet, FlowSource, Handling, OverheadKind, PacketKind};
pub use topology::{build_topology, select_next_hop, Neighbor, NextHop, Position, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Initialization,
    Collection,
    Maintenance,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Initialization => "initialization",
            Phase::Collection => "collection",
            Phase::Maintenance => "maintenance",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initialization" => Ok(Phase::Initialization),
            "collection" => Ok(Phase::Collection),
            "maintenance" => Ok(Phase::Maintenance),
            other => Err(Error::Parse(format!("unknown phase '{other}'"))),
        }
    }
}

/// Network-wide totals for one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub slice: u32,
    pub phase: Phase,
    pub flows: ConstituentFlowVector,
    /// Energy charged during the slice, joules.
    pub energy_j: f64,
    pub alive_nodes: u32,
}

/// Packet counters for one slice, kept alongside the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SliceStats {
    pub packets: u64,
    pub dropped: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Slice length, seconds.
    pub dt: f64,
    pub records: Vec<SliceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_flows(&self) -> ConstituentFlowVector {
        self.records
            .iter()
            .fold(ConstituentFlowVector::default(), |acc, r| acc + r.flows)
    }

    pub fn total_energy(&self) -> f64 {
        self.records.iter().map(|r| r.energy_j).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub slice: u32,
    pub node: usize,
    pub source: FlowSource,
    pub energy_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeOutcome {
    Charged,
    /// Dead node or not enough battery; nothing was spent.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub position: Position,
    pub battery: f64,
    pub alive: bool,
    /// Neighbor table, sorted by id.
    pub neighbors: Vec<Neighbor>,
    pub next_hop: Option<NextHop>,
    pub slice_usage: ResourceUsageVector,
    pub slice_flows: ConstituentFlowVector,
    pub total_flows: ConstituentFlowVector,
    pub dropped: u64,
    scheduled: bool,
}

impl NodeState {
    pub fn new(id: usize, position: Position, battery: f64) -> Self {
        Self {
            id,
            position,
            battery,
            alive: battery > 0.0,
            neighbors: Vec::new(),
            next_hop: None,
            slice_usage: ResourceUsageVector::default(),
            slice_flows: ConstituentFlowVector::default(),
            total_flows: ConstituentFlowVector::default(),
            dropped: 0,
            scheduled: false,
        }
    }

    /// Spends `cost` joules on one packet of `source`. A node that is dead or
    /// cannot afford the packet ignores it and counts a drop. A node whose
    /// battery reaches zero dies.
    pub fn charge(&mut self, source: FlowSource, usage: ResourceUsageVector, cost: f64) -> ChargeOutcome {
        if !self.alive || self.battery < cost {
            // An unaffordable operation exhausts the node; the stranded
            // remainder is never spent.
            self.alive = false;
            self.dropped += 1;
            return ChargeOutcome::Dropped;
        }
        self.battery -= cost;
        if self.battery <= 0.0 {
            self.battery = 0.0;
            self.alive = false;
        }
        let c = source.constituent();
        self.slice_usage += usage;
        self.slice_flows[c] += 1.0;
        self.total_flows[c] += 1.0;
        ChargeOutcome::Charged
    }

    fn update_neighbor(&mut self, id: usize, residual: f64) {
        if let Ok(i) = self.neighbors.binary_search_by_key(&id, |n| n.id) {
            self.neighbors[i].residual = residual;
        }
    }
}

/// Converts a handled packet into joules.
#[derive(Debug, Clone, Copy)]
struct Pricing {
    mode: ChargeMode,
    profile: ResourcePowerProfile,
    alpha: [f64; 5],
}

impl Pricing {
    fn cost(&self, source: FlowSource, usage: &ResourceUsageVector) -> f64 {
        match self.mode {
            ChargeMode::Resource => task_energy(usage, &self.profile).expect("profile validated at load"),
            ChargeMode::Mix => self.alpha[source.constituent().index()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub stats: Vec<SliceStats>,
    pub topology: Topology,
    pub nodes: Vec<NodeState>,
    pub ledger: Vec<LedgerEntry>,
    pub initial_battery_total: f64,
}

impl RunOutput {
    pub fn final_battery_total(&self) -> f64 {
        self.nodes.iter().map(|n| n.battery).sum()
    }

    pub fn delivered(&self) -> u64 {
        self.stats.iter().map(|s| s.delivered).sum()
    }

    pub fn dropped(&self) -> u64 {
        self.stats.iter().map(|s| s.dropped).sum()
    }
}

pub struct Simulation {
    cfg: ScenarioConfig,
    probs: ProbabilityModelConfig,
    pricing: Pricing,
    p_sense: f64,
    topo: Topology,
    nodes: Vec<NodeState>,
    rng: ChaCha8Rng,
    ledger: Vec<LedgerEntry>,
    records: Vec<SliceRecord>,
    stats: Vec<SliceStats>,
    slice: u32,
    slice_energy: f64,
    slice_stats: SliceStats,
    since_maintenance: u32,
    maintenance_left: u32,
    repair_set: Vec<usize>,
    failures: Vec<usize>,
    initial_battery_total: f64,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        let topo = build_topology(cfg, &mut rng)?;
        let probs = cfg.probabilities();
        let p_sense = flows::p_sense(cfg.flows.individual.r_sense, cfg.flows.individual.g_sense, &probs)?;
        let alpha = cfg.energy.mix.coefficients(&cfg.energy.profile)?.alpha;
        let nodes: Vec<NodeState> = topo
            .positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut n = NodeState::new(i, *p, cfg.sim.initial_battery);
                n.neighbors = topo.adjacency[i]
                    .iter()
                    .map(|&(id, distance)| Neighbor {
                        id,
                        distance,
                        residual: 0.0,
                    })
                    .collect();
                n
            })
            .collect();
        let initial_battery_total = nodes.iter().map(|n| n.battery).sum();
        Ok(Self {
            probs,
            pricing: Pricing {
                mode: cfg.sim.charge_mode,
                profile: cfg.energy.profile,
                alpha,
            },
            p_sense,
            topo,
            nodes,
            rng,
            ledger: Vec::new(),
            records: Vec::new(),
            stats: Vec::new(),
            slice: 0,
            slice_energy: 0.0,
            slice_stats: SliceStats::default(),
            since_maintenance: 0,
            maintenance_left: 0,
            repair_set: Vec::new(),
            failures: Vec::new(),
            initial_battery_total,
            cfg: cfg.clone(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn records(&self) -> &[SliceRecord] {
        &self.records
    }

    pub fn stats(&self) -> &[SliceStats] {
        &self.stats
    }

    pub fn alive_count(&self) -> u32 {
        self.nodes.iter().filter(|n| n.alive).count() as u32
    }

    fn slices_total(&self) -> u32 {
        self.cfg.sim.total_slices * self.cfg.sim.epochs
    }

    pub fn finished(&self) -> bool {
        self.slice >= self.slices_total() || self.alive_count() == 0
    }

    /// Runs one slice. Returns `None` once the schedule is exhausted or every
    /// node is dead.
    pub fn step(&mut self) -> Option<SliceRecord> {
        if self.finished() {
            return None;
        }
        let in_epoch = self.slice % self.cfg.sim.total_slices;
        for n in &mut self.nodes {
            n.slice_usage = ResourceUsageVector::default();
            n.slice_flows = ConstituentFlowVector::default();
            n.scheduled = false;
        }
        self.slice_energy = 0.0;
        self.slice_stats = SliceStats::default();

        let phase = if in_epoch < self.cfg.sim.init_slices {
            if in_epoch == 0 {
                self.since_maintenance = 0;
                self.maintenance_left = 0;
                self.failures.clear();
            }
            self.initialization_slice(in_epoch);
            Phase::Initialization
        } else {
            let phase = self.next_operating_phase();
            self.collection_work();
            if phase == Phase::Maintenance {
                self.route_repair();
            }
            phase
        };
        self.background_traffic();
        self.derived_traffic();

        let mut flows = ConstituentFlowVector::default();
        for n in &self.nodes {
            flows += n.slice_flows;
        }
        let record = SliceRecord {
            slice: self.slice,
            phase,
            flows,
            energy_j: self.slice_energy,
            alive_nodes: self.alive_count(),
        };
        self.records.push(record);
        self.stats.push(self.slice_stats);
        self.slice += 1;
        Some(record)
    }

    pub fn run_to_end(mut self) -> RunOutput {
        while self.step().is_some() {}
        RunOutput {
            trace: Trace {
                dt: self.cfg.sim.dt,
                records: self.records,
            },
            stats: self.stats,
            topology: self.topo,
            nodes: self.nodes,
            ledger: self.ledger,
            initial_battery_total: self.initial_battery_total,
        }
    }

    fn charge(&mut self, node: usize, source: FlowSource, handling: Handling) -> ChargeOutcome {
        let usage = handling.usage();
        let cost = self.pricing.cost(source, &usage);
        let outcome = self.nodes[node].charge(source, usage, cost);
        match outcome {
            ChargeOutcome::Charged => {
                self.slice_energy += cost;
                self.slice_stats.packets += 1;
                if self.cfg.sim.keep_ledger {
                    self.ledger.push(LedgerEntry {
                        slice: self.slice,
                        node,
                        source,
                        energy_j: cost,
                    });
                }
            }
            ChargeOutcome::Dropped => self.slice_stats.dropped += 1,
        }
        outcome
    }

    fn charge_n(&mut self, node: usize, source: FlowSource, handling: Handling, count: u64) {
        for _ in 0..count {
            self.charge(node, source, handling);
        }
    }

    /// Sends `count` packets of `kind` from `node` to every alive neighbor.
    /// Receivers refresh their view of the sender's residual energy.
    fn broadcast(&mut self, node: usize, kind: PacketKind, count: u64) {
        for _ in 0..count {
            if self.charge(node, FlowSource::Packet(kind), Handling::Send) == ChargeOutcome::Dropped {
                continue;
            }
            let residual = self.nodes[node].battery;
            for k in 0..self.topo.adjacency[node].len() {
                let nb = self.topo.adjacency[node][k].0;
                if !self.nodes[nb].alive {
                    continue;
                }
                if self.charge(nb, FlowSource::Packet(kind), Handling::Receive) == ChargeOutcome::Charged {
                    self.nodes[nb].update_neighbor(node, residual);
                }
            }
        }
    }

    fn alive_ids(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.alive).map(|n| n.id).collect()
    }

    fn initialization_slice(&mut self, in_epoch: u32) {
        let init = self.cfg.sim.init_slices;
        let ind = self.cfg.flows.individual;
        for stage in 0..3u32 {
            if stage * init / 3 != in_epoch {
                continue;
            }
            match stage {
                0 => {
                    for id in self.alive_ids() {
                        self.charge_n(
                            id,
                            FlowSource::Overhead(OverheadKind::Os),
                            Handling::Execute,
                            count(ind.b_os),
                        );
                        self.charge_n(
                            id,
                            FlowSource::Overhead(OverheadKind::Security(Constituent::Individual)),
                            Handling::Compute,
                            count(ind.b_sec),
                        );
                    }
                }
                1 => {
                    for id in self.alive_ids() {
                        self.broadcast(id, PacketKind::NeighborInfo, 1);
                    }
                    for id in self.alive_ids() {
                        self.charge(id, FlowSource::Packet(PacketKind::Scheduling), Handling::Send);
                    }
                }
                _ => {
                    let all = self.alive_ids();
                    self.flood(&all);
                    self.recompute_routes(&all);
                }
            }
        }
    }

    /// Decides the phase of a post-initialization slice.
    fn next_operating_phase(&mut self) -> Phase {
        if self.maintenance_left > 0 {
            self.maintenance_left -= 1;
            return Phase::Maintenance;
        }
        // A next hop that died last slice shows up as a missed probe now.
        for n in &self.nodes {
            if let (true, Some(NextHop::Node(j))) = (n.alive, n.next_hop) {
                if !self.nodes[j].alive && !self.failures.contains(&n.id) {
                    self.failures.push(n.id);
                }
            }
        }
        let periodic =
            self.cfg.sim.maintenance_interval > 0 && self.since_maintenance >= self.cfg.sim.maintenance_interval;
        if !self.failures.is_empty() || periodic {
            self.repair_set = if periodic {
                self.alive_ids()
            } else {
                let origins = std::mem::take(&mut self.failures);
                self.repair_region(&origins)
            };
            self.failures.clear();
            self.since_maintenance = 0;
            self.maintenance_left = self.cfg.sim.maintenance_slices.max(1) - 1;
            Phase::Maintenance
        } else {
            self.since_maintenance += 1;
            Phase::Collection
        }
    }

    /// Alive nodes within the repair hop radius of any origin.
    fn repair_region(&self, origins: &[usize]) -> Vec<usize> {
        let Some(radius) = self.cfg.sim.repair_hop_radius else {
            return self.alive_ids();
        };
        let mut depth = vec![u32::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        for &o in origins {
            if self.nodes[o].alive {
                depth[o] = 0;
                queue.push_back(o);
            }
        }
        while let Some(u) = queue.pop_front() {
            if depth[u] >= radius {
                continue;
            }
            for &(v, _) in &self.topo.adjacency[u] {
                if self.nodes[v].alive && depth[v] == u32::MAX {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (0..self.nodes.len()).filter(|&i| depth[i] != u32::MAX).collect()
    }

    fn flood(&mut self, participants: &[usize]) {
        let g = self.cfg.flows.global;
        for &id in participants {
            self.broadcast(id, PacketKind::TopologyInfo, count(g.b_topo));
            self.broadcast(id, PacketKind::RoutingInfo, count(g.b_rout));
            self.charge_n(
                id,
                FlowSource::Overhead(OverheadKind::Security(Constituent::Global)),
                Handling::Send,
                count(g.b_sec),
            );
            self.charge_n(
                id,
                FlowSource::Overhead(OverheadKind::ProtocolOverhead),
                Handling::Send,
                count(g.b_ohead),
            );
        }
    }

    fn recompute_routes(&mut self, participants: &[usize]) {
        for &id in participants {
            let hop = {
                let nodes = &self.nodes;
                select_next_hop(&self.topo, id, &nodes[id].neighbors, |j| nodes[j].alive)
            };
            self.nodes[id].next_hop = hop;
        }
    }

    fn route_repair(&mut self) {
        let set: Vec<usize> = self
            .repair_set
            .iter()
            .copied()
            .filter(|&i| self.nodes[i].alive)
            .collect();
        self.flood(&set);
        self.recompute_routes(&set);
    }

    fn collection_work(&mut self) {
        let l = self.cfg.flows.local;
        if self.cfg.sim.monitoring {
            for id in self.alive_ids() {
                self.probe_next_hop(id, count(l.b_mon));
                self.charge_n(
                    id,
                    FlowSource::Overhead(OverheadKind::Security(Constituent::Local)),
                    Handling::Send,
                    count(l.b_sec),
                );
                self.charge_n(
                    id,
                    FlowSource::Overhead(OverheadKind::LocalPolicy),
                    Handling::Send,
                    count(l.b_ohead),
                );
            }
        }
        let rate = self.cfg.sim.event_rate;
        if rate > 0.0 {
            let poisson = Poisson::new(rate).expect("event rate validated at load");
            for id in 0..self.nodes.len() {
                if !self.nodes[id].alive {
                    continue;
                }
                let events = poisson.sample(&mut self.rng) as u64;
                for _ in 0..events {
                    if self.rng.random::<f64>() < self.p_sense {
                        self.originate(id);
                    }
                }
            }
        }
    }

    /// Monitoring request to the next hop and its reply, which carries the
    /// next hop's residual energy. A dead next hop sends no reply.
    fn probe_next_hop(&mut self, node: usize, count: u64) {
        let kind = FlowSource::Packet(PacketKind::NeighborInfo);
        for _ in 0..count {
            if self.charge(node, kind, Handling::Send) == ChargeOutcome::Dropped {
                return;
            }
            let Some(NextHop::Node(j)) = self.nodes[node].next_hop else {
                continue;
            };
            if !self.nodes[j].alive || self.charge(j, kind, Handling::Receive) == ChargeOutcome::Dropped {
                continue;
            }
            if self.charge(j, kind, Handling::Send) == ChargeOutcome::Dropped {
                continue;
            }
            let residual = self.nodes[j].battery;
            if self.charge(node, kind, Handling::Receive) == ChargeOutcome::Charged {
                self.nodes[node].update_neighbor(j, residual);
            }
        }
    }

    /// One sensed packet created at `source` and relayed toward a sink.
    pub fn originate(&mut self, source: usize) {
        self.schedule_once(source);
        if self.charge(source, FlowSource::Packet(PacketKind::Sensed), Handling::SenseAndSend) == ChargeOutcome::Dropped
        {
            return;
        }
        let mut cur = source;
        for _ in 0..=self.nodes.len() {
            match self.nodes[cur].next_hop {
                None => {
                    self.slice_stats.dropped += 1;
                    return;
                }
                Some(NextHop::Sink(_)) => {
                    self.slice_stats.delivered += 1;
                    return;
                }
                Some(NextHop::Node(j)) => {
                    if !self.nodes[j].alive {
                        self.slice_stats.dropped += 1;
                        if !self.failures.contains(&cur) {
                            self.failures.push(cur);
                        }
                        return;
                    }
                    let relay = FlowSource::Packet(PacketKind::RelayedData);
                    if self.charge(j, relay, Handling::Receive) == ChargeOutcome::Dropped {
                        return;
                    }
                    self.schedule_once(j);
                    if self.charge(j, relay, Handling::Forward) == ChargeOutcome::Dropped {
                        return;
                    }
                    cur = j;
                }
            }
        }
        unreachable!("next hops strictly approach a sink");
    }

    /// A node negotiates a transmission slot before its first data send in a slice.
    fn schedule_once(&mut self, node: usize) {
        if !self.nodes[node].scheduled && self.nodes[node].alive {
            self.nodes[node].scheduled = true;
            self.charge(node, FlowSource::Packet(PacketKind::Scheduling), Handling::Send);
        }
    }

    /// Harvesting and sink-directed management, every slice.
    fn background_traffic(&mut self) {
        let env = count(self.cfg.flows.environment.b_sec + self.cfg.flows.environment.b_ph);
        let snk = count(self.cfg.flows.sink.b_sec + self.cfg.flows.sink.b_ohead);
        if env == 0 && snk == 0 {
            return;
        }
        for id in self.alive_ids() {
            self.charge_n(
                id,
                FlowSource::Overhead(OverheadKind::Harvesting),
                Handling::Compute,
                env,
            );
            self.charge_n(
                id,
                FlowSource::Overhead(OverheadKind::SinkManagement),
                Handling::Send,
                snk,
            );
        }
    }

    /// Collisions, idle listening, overhearing and loss retransmissions,
    /// sized from each node's explicit Local and Global traffic this slice.
    fn derived_traffic(&mut self) {
        let l = self.cfg.flows.local;
        let net_dens = self.cfg.sim.nodes;
        for id in 0..self.nodes.len() {
            if !self.nodes[id].alive {
                continue;
            }
            let local = self.nodes[id].slice_flows[Constituent::Local];
            if local > 0.0 {
                let n = (self.topo.adjacency[id].len() as u32).max(1);
                let probs = LocalProbabilities {
                    coll: flows::p_coll(n, l.g_tx, net_dens.max(n), &self.probs).unwrap_or(0.0),
                    ohear: flows::p_ohear(n, net_dens.max(n), l.r_tx, &self.probs).unwrap_or(0.0),
                    idle: flows::p_idle(n, &self.probs).unwrap_or(0.0),
                };
                if let Ok(f) = flows::local_flow_given(probs, local) {
                    let coll = self.stochastic_round(f.b_coll);
                    let idle = self.stochastic_round(f.b_idle);
                    let ohear = self.stochastic_round(f.b_ohear);
                    self.charge_n(
                        id,
                        FlowSource::Overhead(OverheadKind::Collision),
                        Handling::Resend,
                        coll,
                    );
                    self.charge_n(
                        id,
                        FlowSource::Overhead(OverheadKind::IdleListen),
                        Handling::Listen,
                        idle,
                    );
                    self.charge_n(
                        id,
                        FlowSource::Overhead(OverheadKind::Overhear),
                        Handling::Receive,
                        ohear,
                    );
                }
            }
            let global = self.nodes[id].slice_flows[Constituent::Global];
            if global > 0.0 {
                let d = self.topo.sink_distance[id];
                let p = flows::p_pktls(d, l.r_tx, net_dens, &self.probs).unwrap_or(0.0);
                if let Ok(f) = flows::global_flow_given(p, global) {
                    let lost = self.stochastic_round(f.b_pktls);
                    self.charge_n(
                        id,
                        FlowSource::Overhead(OverheadKind::PacketLoss),
                        Handling::Resend,
                        lost,
                    );
                }
            }
        }
    }

    fn stochastic_round(&mut self, x: f64) -> u64 {
        let floor = x.floor();
        let extra = self.rng.random::<f64>() < x - floor;
        floor as u64 + u64::from(extra)
    }
}

/// Configured packet counts are rounded to whole packets.
fn count(v: f64) -> u64 {
    v.max(0.0).round() as u64
}

/// Runs a scenario to completion.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    Ok(Simulation::new(cfg)?.run_to_end())
}
