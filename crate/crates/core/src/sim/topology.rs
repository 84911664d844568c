use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, o: &Position) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl From<[f64; 2]> for Position {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

/// Where a node forwards data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NextHop {
    Sink(usize),
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
    /// Residual energy last reported by this neighbor, joules.
    pub residual: f64,
}

/// Static geometry of a deployment: node and sink positions and the links
/// between every pair of nodes within transmission range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub positions: Vec<Position>,
    pub sinks: Vec<Position>,
    pub r_tx: f64,
    /// Per node, neighbors sorted by id.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Per node, distance to the nearest sink.
    pub sink_distance: Vec<f64>,
}

impl Topology {
    pub fn from_positions(positions: Vec<Position>, sinks: Vec<Position>, r_tx: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Topology("node count must be >= 1".into()));
        }
        if sinks.is_empty() {
            return Err(Error::Topology("at least one sink is required".into()));
        }
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = positions[i].distance(&positions[j]);
                if d > 0.0 && d <= r_tx {
                    adjacency[i].push((j, d));
                    adjacency[j].push((i, d));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|(id, _)| *id);
        }
        let sink_distance = positions
            .iter()
            .map(|p| sinks.iter().map(|s| p.distance(s)).fold(f64::INFINITY, f64::min))
            .collect();
        Ok(Self {
            positions,
            sinks,
            r_tx,
            adjacency,
            sink_distance,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Sinks within range of `node`, nearest first (ties by index).
    pub fn sinks_in_range(&self, node: usize) -> Vec<(usize, f64)> {
        let p = self.positions[node];
        let mut v: Vec<_> = self
            .sinks
            .iter()
            .enumerate()
            .map(|(i, s)| (i, p.distance(s)))
            .filter(|(_, d)| *d <= self.r_tx)
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Places nodes uniformly at random in the configured area and links every
/// pair within transmission range.
pub fn build_topology<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Topology> {
    let s = &cfg.sim;
    if s.nodes < 1 {
        return Err(Error::Topology("node count must be >= 1".into()));
    }
    let [w, h] = s.area;
    for [x, y] in &s.sinks {
        if !(0.0..=w).contains(x) || !(0.0..=h).contains(y) {
            return Err(Error::Topology(format!("sink at [{x}, {y}] lies outside the area")));
        }
    }
    let positions = (0..s.nodes)
        .map(|_| Position {
            x: rng.random_range(0.0..=w),
            y: rng.random_range(0.0..=h),
        })
        .collect();
    let sinks = s.sinks.iter().copied().map(Position::from).collect();
    Topology::from_positions(positions, sinks, cfg.flows.local.r_tx)
}

/// Chooses where `node` forwards data. A sink in range always wins; otherwise
/// the alive neighbor with the highest last-known residual energy among those
/// strictly closer to a sink, lowest id on ties.
pub fn select_next_hop(
    topo: &Topology,
    node: usize,
    neighbors: &[Neighbor],
    alive: impl Fn(usize) -> bool,
) -> Option<NextHop> {
    if let Some(&(sink, _)) = topo.sinks_in_range(node).first() {
        return Some(NextHop::Sink(sink));
    }
    let own = topo.sink_distance[node];
    let mut best: Option<&Neighbor> = None;
    for nb in neighbors {
        if !alive(nb.id) || topo.sink_distance[nb.id] >= own {
            continue;
        }
        best = match best {
            Some(b) if b.residual > nb.residual || (b.residual == nb.residual && b.id < nb.id) => Some(b),
            _ => Some(nb),
        };
    }
    best.map(|n| NextHop::Node(n.id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pos(x: f64, y: f64) -> Position {
        Position { x, y }
    }

    #[test]
    fn node_next_to_sink_routes_to_it() {
        let t = Topology::from_positions(vec![pos(10.0, 0.0)], vec![pos(0.0, 0.0)], 30.0).unwrap();
        assert_eq!(select_next_hop(&t, 0, &[], |_| true), Some(NextHop::Sink(0)));
    }

    #[test]
    fn distant_nodes_are_not_linked() {
        let t = Topology::from_positions(vec![pos(0.0, 0.0), pos(50.0, 0.0)], vec![pos(0.0, 0.0)], 30.0).unwrap();
        assert_eq!(t.edge_count(), 0);
    }

    #[test]
    fn empty_network_rejected() {
        assert!(Topology::from_positions(vec![], vec![pos(0.0, 0.0)], 30.0).is_err());
    }

    #[test]
    fn residual_energy_greedy_with_id_tiebreak() {
        // node 0 far from sink; nodes 1 and 2 closer; node 3 farther
        let t = Topology::from_positions(
            vec![pos(60.0, 0.0), pos(40.0, 5.0), pos(40.0, -5.0), pos(80.0, 0.0)],
            vec![pos(0.0, 0.0)],
            30.0,
        )
        .unwrap();
        let nb = |id, residual| Neighbor {
            id,
            distance: t.positions[0].distance(&t.positions[id]),
            residual,
        };
        let table = [nb(1, 1.0), nb(2, 2.0), nb(3, 9.0)];
        assert_eq!(select_next_hop(&t, 0, &table, |_| true), Some(NextHop::Node(2)));
        let tied = [nb(1, 2.0), nb(2, 2.0), nb(3, 9.0)];
        assert_eq!(select_next_hop(&t, 0, &tied, |_| true), Some(NextHop::Node(1)));
        assert_eq!(select_next_hop(&t, 0, &tied, |id| id != 1), Some(NextHop::Node(2)));
        assert_eq!(select_next_hop(&t, 0, &[nb(3, 9.0)], |_| true), None);
    }

    #[test]
    fn seeded_layout_is_reproducible() {
        let cfg = ScenarioConfig::default();
        let a = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(format!("{:?}", a.adjacency), format!("{:?}", b.adjacency));
        assert_eq!(a.len(), 25);
        for (i, list) in a.adjacency.iter().enumerate() {
            for &(j, d) in list {
                assert!(d > 0.0 && d <= a.r_tx);
                assert!(a.adjacency[j].iter().any(|&(k, _)| k == i));
            }
        }
    }
}
