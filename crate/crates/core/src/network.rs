//! Links, networks and the network-variant transforms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u32;

/// Seconds per day.
pub const DAY: u64 = 86_400;

/// One directed transmission opportunity `host -> neighbor`.
///
/// All times are integer seconds from the start of the observation window.
/// The host stays on `[host_arrive, host_depart]`, the neighbour on
/// `[nbr_arrive, nbr_depart]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub host: NodeId,
    pub neighbor: NodeId,
    pub host_arrive: u64,
    pub host_depart: u64,
    pub nbr_arrive: u64,
    pub nbr_depart: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    /// The neighbour leaves before (or when) the host leaves.
    DirectOnly,
    /// The neighbour is present when the host leaves and stays on.
    Mixed,
    /// The neighbour arrives after the host has left.
    IndirectOnly,
}

impl Link {
    pub fn new(
        host: NodeId,
        neighbor: NodeId,
        host_arrive: u64,
        host_depart: u64,
        nbr_arrive: u64,
        nbr_depart: u64,
    ) -> Self {
        Link { host, neighbor, host_arrive, host_depart, nbr_arrive, nbr_depart }
    }

    /// Checks the per-link invariants for indirect window `delta_s`.
    pub fn validate(&self, delta_s: u64) -> Result<(), NetworkError> {
        if self.host == self.neighbor {
            return Err(NetworkError::SelfLink(self.host));
        }
        if self.host_arrive > self.host_depart || self.nbr_arrive > self.nbr_depart {
            return Err(NetworkError::Reversed(*self));
        }
        if self.nbr_arrive > self.host_depart.saturating_add(delta_s) {
            return Err(NetworkError::OutsideWindow(*self));
        }
        Ok(())
    }

    pub fn kind(&self) -> LinkKind {
        classify_link(self)
    }

    pub fn day(&self) -> u64 {
        self.nbr_arrive / DAY
    }

    fn shifted(&self, by: i64, t_end: u64) -> Link {
        let s = |t: u64| (t as i64 + by).clamp(0, t_end as i64) as u64;
        Link {
            host_arrive: s(self.host_arrive),
            host_depart: s(self.host_depart),
            nbr_arrive: s(self.nbr_arrive),
            nbr_depart: s(self.nbr_depart),
            ..*self
        }
    }
}

/// The three cases are tested in order, which makes the boundary cases
/// (`t_l' == t_l`, `t_s' == t_l`) unambiguous.
pub fn classify_link(l: &Link) -> LinkKind {
    if l.nbr_depart <= l.host_depart {
        LinkKind::DirectOnly
    } else if l.nbr_arrive < l.host_depart {
        LinkKind::Mixed
    } else {
        LinkKind::IndirectOnly
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("self link on node {0}")]
    SelfLink(NodeId),
    #[error("link {0:?} has a departure before its arrival")]
    Reversed(Link),
    #[error("link {0:?} starts after the indirect window closes")]
    OutsideWindow(Link),
    #[error("node {node} out of range for a network of {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: u32 },
    #[error("link {0:?} has a timestamp beyond the horizon")]
    BeyondHorizon(Link),
}

/// Node set plus a multiset of links, sorted by `(nbr_arrive, host, ...)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub node_count: u32,
    pub horizon_days: u32,
    /// Indirect window in seconds.
    pub delta_s: u64,
    /// Generator step in seconds (informational for ingested networks).
    pub dt_s: u64,
    links: Vec<Link>,
}

fn sort_key(l: &Link) -> (u64, NodeId, NodeId, u64, u64, u64) {
    (l.nbr_arrive, l.host, l.neighbor, l.host_arrive, l.host_depart, l.nbr_depart)
}

impl Network {
    pub fn new(
        name: impl Into<String>,
        node_count: u32,
        horizon_days: u32,
        delta_s: u64,
        dt_s: u64,
        mut links: Vec<Link>,
    ) -> Result<Self, NetworkError> {
        let t_end = horizon_days as u64 * DAY;
        for l in &links {
            l.validate(delta_s)?;
            for node in [l.host, l.neighbor] {
                if node >= node_count {
                    return Err(NetworkError::NodeOutOfRange { node, node_count });
                }
            }
            if l.host_depart > t_end || l.nbr_depart > t_end {
                return Err(NetworkError::BeyondHorizon(*l));
            }
        }
        links.sort_by_key(sort_key);
        Ok(Network { name: name.into(), node_count, horizon_days, delta_s, dt_s, links })
    }

    pub fn empty(name: impl Into<String>, node_count: u32, horizon_days: u32) -> Self {
        Network {
            name: name.into(),
            node_count,
            horizon_days,
            delta_s: 10_800,
            dt_s: 300,
            links: Vec::new(),
        }
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn t_end(&self) -> u64 {
        self.horizon_days as u64 * DAY
    }

    /// Links whose neighbour arrival falls on day `d`.
    pub fn day_slice(&self, d: u64) -> &[Link] {
        let lo = self.links.partition_point(|l| l.nbr_arrive < d * DAY);
        let hi = self.links.partition_point(|l| l.nbr_arrive < (d + 1) * DAY);
        &self.links[lo..hi]
    }

    /// Links whose neighbour arrival falls in the first `days` days.
    pub fn window(&self, days: u64) -> &[Link] {
        let hi = self.links.partition_point(|l| l.nbr_arrive < days * DAY);
        &self.links[..hi]
    }

    /// Same metadata, new link multiset. Callers guarantee validity.
    fn with_links(&self, mut links: Vec<Link>) -> Network {
        links.sort_by_key(sort_key);
        Network {
            name: self.name.clone(),
            node_count: self.node_count,
            horizon_days: self.horizon_days,
            delta_s: self.delta_s,
            dt_s: self.dt_s,
            links,
        }
    }

    /// Number of nodes that appear in no link.
    pub fn isolated_nodes(&self) -> usize {
        let mut seen = vec![false; self.node_count as usize];
        for l in &self.links {
            seen[l.host as usize] = true;
            seen[l.neighbor as usize] = true;
        }
        seen.iter().filter(|&&s| !s).count()
    }
}

/// Removes the indirect component: IndirectOnly links are dropped and Mixed
/// links are cut at the host's departure.
pub fn strip_indirect(net: &Network) -> Network {
    let links = net
        .links
        .iter()
        .filter_map(|l| match l.kind() {
            LinkKind::DirectOnly => Some(*l),
            LinkKind::Mixed => Some(Link { nbr_depart: l.nbr_depart.min(l.host_depart), ..*l }),
            LinkKind::IndirectOnly => None,
        })
        .collect();
    net.with_links(links)
}

/// Fills every day on which a host originates no link with a time-shifted copy
/// of one of its present days. Present days are used in cyclic order.
pub fn densify(net: &Network) -> Network {
    let t_end = net.t_end();
    let mut by_host: BTreeMap<NodeId, BTreeMap<u64, Vec<Link>>> = BTreeMap::new();
    for l in &net.links {
        by_host.entry(l.host).or_default().entry(l.day()).or_default().push(*l);
    }
    let mut links = net.links.clone();
    for days in by_host.values() {
        let present: Vec<u64> = days.keys().copied().collect();
        let mut next = 0usize;
        for d in 0..net.horizon_days as u64 {
            if days.contains_key(&d) {
                continue;
            }
            let src = present[next % present.len()];
            next += 1;
            let by = (d as i64 - src as i64) * DAY as i64;
            links.extend(days[&src].iter().map(|l| l.shifted(by, t_end)));
        }
    }
    net.with_links(links)
}

/// Moves the neighbour window of every IndirectOnly link back so that it
/// starts when the host arrives, keeping its duration.
///
/// A zero-length host stay cannot produce a direct overlap, so those links are
/// shrunk to a zero-length window at the host's position instead. Their
/// exposure is zero either way, since a host that stays for no time emits
/// nothing.
pub fn collapse_indirect(net: &Network) -> Network {
    let links = net
        .links
        .iter()
        .map(|l| {
            if l.kind() != LinkKind::IndirectOnly {
                return *l;
            }
            let dur = l.nbr_depart - l.nbr_arrive;
            let nbr_depart =
                if l.host_arrive == l.host_depart { l.host_arrive } else { l.host_arrive + dur };
            Link { nbr_arrive: l.host_arrive, nbr_depart, ..*l }
        })
        .collect();
    net.with_links(links)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(ts: u64, tl: u64, ts2: u64, tl2: u64) -> Link {
        Link::new(0, 1, ts, tl, ts2, tl2)
    }

    fn net(links: Vec<Link>, days: u32) -> Network {
        Network::new("t", 3, days, 10_800, 300, links).unwrap()
    }

    #[test]
    fn classify_cases() {
        assert_eq!(classify_link(&l(0, 100, 10, 50)), LinkKind::DirectOnly);
        assert_eq!(classify_link(&l(0, 100, 10, 150)), LinkKind::Mixed);
        assert_eq!(classify_link(&l(0, 100, 120, 200)), LinkKind::IndirectOnly);
        // boundaries
        assert_eq!(classify_link(&l(0, 100, 10, 100)), LinkKind::DirectOnly);
        assert_eq!(classify_link(&l(0, 100, 100, 200)), LinkKind::IndirectOnly);
    }

    #[test]
    fn strip_examples() {
        let n = net(vec![l(0, 100, 120, 200)], 1);
        let s = strip_indirect(&n);
        assert!(s.links().is_empty());
        assert_eq!(s.node_count, 3);

        let s = strip_indirect(&net(vec![l(0, 100, 10, 150)], 1));
        assert_eq!(s.links(), &[l(0, 100, 10, 100)]);

        let s = strip_indirect(&net(vec![l(0, 100, 10, 50), l(0, 100, 120, 200), l(0, 100, 10, 150)], 1));
        assert_eq!(s.links().len(), 2);
        assert!(s.links().iter().all(|x| x.kind() == LinkKind::DirectOnly));
    }

    #[test]
    fn densify_single_day() {
        let a = l(100, 200, 150, 300);
        let d = densify(&net(vec![a], 3));
        assert_eq!(d.links(), &[a, a.shifted(DAY as i64, 3 * DAY), a.shifted(2 * DAY as i64, 3 * DAY)]);
    }

    #[test]
    fn densify_cycles_present_days() {
        let a = l(100, 200, 150, 300);
        let b = l(2 * DAY + 10, 2 * DAY + 20, 2 * DAY + 15, 2 * DAY + 40);
        let d = densify(&net(vec![a, b], 4));
        let day1 = d.day_slice(1);
        let day3 = d.day_slice(3);
        assert_eq!(day1, &[a.shifted(DAY as i64, 4 * DAY)]);
        assert_eq!(day3, &[b.shifted(DAY as i64, 4 * DAY)]);
        assert!(densify(&net(vec![], 4)).links().is_empty());
    }

    #[test]
    fn collapse_example() {
        let c = collapse_indirect(&net(vec![l(0, 100, 120, 200), l(0, 100, 10, 50)], 1));
        assert_eq!(c.links(), &[l(0, 100, 0, 80), l(0, 100, 10, 50)]);
    }

    #[test]
    fn collapse_zero_length_host_stay() {
        let c = collapse_indirect(&net(vec![l(50, 50, 70, 90)], 1));
        assert_eq!(c.links(), &[l(50, 50, 50, 50)]);
        assert_ne!(c.links()[0].kind(), LinkKind::IndirectOnly);
    }

    #[test]
    fn rejects_bad_links() {
        assert!(Network::new("x", 2, 1, 100, 300, vec![Link::new(0, 0, 0, 1, 0, 1)]).is_err());
        assert!(Network::new("x", 2, 1, 100, 300, vec![Link::new(0, 1, 0, 10, 111, 200)]).is_err());
        assert!(Network::new("x", 2, 1, 100, 300, vec![Link::new(0, 2, 0, 10, 0, 10)]).is_err());
        assert!(Network::new("x", 2, 1, 100, 300, vec![Link::new(0, 1, 0, DAY + 1, 0, 10)]).is_err());
    }
}
