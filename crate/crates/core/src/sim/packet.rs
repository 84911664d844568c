use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::{Constituent, ResourceUsageVector};

/// Protocol packets exchanged by the simulated application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PacketKind {
    Sensed,
    NeighborInfo,
    Scheduling,
    TopologyInfo,
    RoutingInfo,
    RelayedData,
}

impl PacketKind {
    pub const ALL: [PacketKind; 6] = [
        PacketKind::Sensed,
        PacketKind::NeighborInfo,
        PacketKind::Scheduling,
        PacketKind::TopologyInfo,
        PacketKind::RoutingInfo,
        PacketKind::RelayedData,
    ];
}

/// Constituent that owns a protocol packet.
pub fn classify_packet(kind: PacketKind) -> Constituent {
    match kind {
        PacketKind::Sensed => Constituent::Individual,
        PacketKind::NeighborInfo | PacketKind::Scheduling => Constituent::Local,
        PacketKind::TopologyInfo | PacketKind::RoutingInfo | PacketKind::RelayedData => Constituent::Global,
    }
}

/// Traffic that is not a protocol packet proper: node software, security,
/// and the side effects modeled by the flow probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverheadKind {
    Os,
    Security(Constituent),
    Collision,
    IdleListen,
    Overhear,
    LocalPolicy,
    PacketLoss,
    ProtocolOverhead,
    Harvesting,
    SinkManagement,
}

impl OverheadKind {
    pub fn constituent(self) -> Constituent {
        match self {
            OverheadKind::Os => Constituent::Individual,
            OverheadKind::Security(c) => c,
            OverheadKind::Collision | OverheadKind::IdleListen | OverheadKind::Overhear | OverheadKind::LocalPolicy => {
                Constituent::Local
            }
            OverheadKind::PacketLoss | OverheadKind::ProtocolOverhead => Constituent::Global,
            OverheadKind::Harvesting => Constituent::Environment,
            OverheadKind::SinkManagement => Constituent::Sink,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowSource {
    Packet(PacketKind),
    Overhead(OverheadKind),
}

impl FlowSource {
    pub fn constituent(self) -> Constituent {
        match self {
            FlowSource::Packet(k) => classify_packet(k),
            FlowSource::Overhead(o) => o.constituent(),
        }
    }
}

impl fmt::Display for FlowSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowSource::Packet(k) => write!(f, "{k:?}"),
            FlowSource::Overhead(o) => write!(f, "{o:?}"),
        }
    }
}

/// What a node does with a packet; determines the resources it touches.
/// Every handling costs one cpu unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handling {
    /// Sense, queue and transmit.
    SenseAndSend,
    /// Queue a received packet and transmit it onward.
    Forward,
    Send,
    /// Queue and retransmit.
    Resend,
    Receive,
    /// Radio on, nothing decoded.
    Listen,
    /// Processing with memory traffic only.
    Execute,
    Compute,
}

impl Handling {
    pub fn usage(self) -> ResourceUsageVector {
        match self {
            Handling::SenseAndSend => ResourceUsageVector::new(1, 1, 0, 1, 1),
            Handling::Forward => ResourceUsageVector::new(1, 1, 0, 1, 0),
            Handling::Send => ResourceUsageVector::new(1, 0, 0, 1, 0),
            Handling::Resend => ResourceUsageVector::new(1, 1, 0, 1, 0),
            Handling::Receive => ResourceUsageVector::new(1, 0, 1, 0, 0),
            Handling::Listen => ResourceUsageVector::new(0, 0, 1, 0, 0),
            Handling::Execute => ResourceUsageVector::new(1, 1, 0, 0, 0),
            Handling::Compute => ResourceUsageVector::new(1, 0, 0, 0, 0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packet_table() {
        assert_eq!(classify_packet(PacketKind::Sensed), Constituent::Individual);
        assert_eq!(classify_packet(PacketKind::NeighborInfo), Constituent::Local);
        assert_eq!(classify_packet(PacketKind::Scheduling), Constituent::Local);
        assert_eq!(classify_packet(PacketKind::TopologyInfo), Constituent::Global);
        assert_eq!(classify_packet(PacketKind::RoutingInfo), Constituent::Global);
        assert_eq!(classify_packet(PacketKind::RelayedData), Constituent::Global);
    }

    #[test]
    fn every_handling_uses_cpu_except_listening() {
        for h in [
            Handling::SenseAndSend,
            Handling::Forward,
            Handling::Send,
            Handling::Resend,
            Handling::Receive,
            Handling::Execute,
            Handling::Compute,
        ] {
            assert_eq!(h.usage().b_cpu, 1);
        }
        assert_eq!(Handling::Listen.usage().b_cpu, 0);
        assert_eq!(Handling::SenseAndSend.usage().b_sens, 1);
    }
}
