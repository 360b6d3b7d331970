//! The one-way communication graph and endpoint validation.
//!
//! Every edge is opened by its sending end, which connects to the receiver's
//! listening address. There is no edge between X and Y.

use std::collections::BTreeMap;
use std::fmt;
use std::net::SocketAddr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetRole {
    /// Source.
    O,
    /// Left randomizer.
    A,
    /// Right randomizer.
    B,
    /// Left station.
    X,
    /// Right station.
    Y,
    Collector,
    Referee,
}

impl NetRole {
    pub const ALL: [NetRole; 7] = [
        NetRole::O,
        NetRole::A,
        NetRole::B,
        NetRole::X,
        NetRole::Y,
        NetRole::Collector,
        NetRole::Referee,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NetRole::O => "O",
            NetRole::A => "A",
            NetRole::B => "B",
            NetRole::X => "X",
            NetRole::Y => "Y",
            NetRole::Collector => "collector",
            NetRole::Referee => "referee",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        NetRole::ALL.into_iter().find(|r| r.as_str().eq_ignore_ascii_case(s))
    }

    /// Roles this one sends to.
    pub fn outbound(self) -> Vec<NetRole> {
        EDGES
            .iter()
            .filter(|(from, _)| *from == self)
            .map(|(_, to)| *to)
            .collect()
    }

    /// Roles this one receives from.
    pub fn inbound(self) -> Vec<NetRole> {
        EDGES
            .iter()
            .filter(|(_, to)| *to == self)
            .map(|(from, _)| *from)
            .collect()
    }

    pub fn listens(self) -> bool {
        !self.inbound().is_empty()
    }
}

impl fmt::Display for NetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Directed edges `(sender, receiver)`.
pub const EDGES: [(NetRole, NetRole); 9] = [
    (NetRole::O, NetRole::X),
    (NetRole::O, NetRole::Y),
    (NetRole::A, NetRole::X),
    (NetRole::B, NetRole::Y),
    (NetRole::X, NetRole::Collector),
    (NetRole::Y, NetRole::Collector),
    (NetRole::A, NetRole::Referee),
    (NetRole::B, NetRole::Referee),
    (NetRole::Collector, NetRole::Referee),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("{role} has no edge to {peer}")]
    NoSuchEdge { role: NetRole, peer: NetRole },
    #[error("{role} needs an address for {peer}")]
    MissingPeer { role: NetRole, peer: NetRole },
    #[error("{role} receives connections and needs a listen address")]
    MissingListen { role: NetRole },
    #[error("{role} only sends and must not listen")]
    UnexpectedListen { role: NetRole },
}

/// Addresses one role needs: where to listen, and where each outbound peer
/// listens.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Endpoints {
    pub listen: Option<SocketAddr>,
    pub connect: BTreeMap<NetRole, SocketAddr>,
}

impl Endpoints {
    /// Rejects any address that does not correspond to an edge incident to
    /// `role`.
    pub fn validate(&self, role: NetRole) -> Result<(), TopologyError> {
        let outbound = role.outbound();
        if let Some(&peer) = self.connect.keys().find(|p| !outbound.contains(p)) {
            return Err(TopologyError::NoSuchEdge { role, peer });
        }
        if let Some(&peer) = outbound.iter().find(|p| !self.connect.contains_key(p)) {
            return Err(TopologyError::MissingPeer { role, peer });
        }
        match (role.listens(), self.listen.is_some()) {
            (true, false) => Err(TopologyError::MissingListen { role }),
            (false, true) => Err(TopologyError::UnexpectedListen { role }),
            _ => Ok(()),
        }
    }
}
