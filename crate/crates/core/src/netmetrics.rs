//! Static projections, degree and clustering, daily aggregates, and
//! time-respecting path centralities.

use std::collections::HashMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exposure::{link_exposure, ExposureParams};
use crate::network::{Link, Network, NodeId};
use crate::rng::{self, purpose};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),
    #[error("temporal paths support at most 128 days, got {0}")]
    TooManyDays(u32),
}

/// Directed edges `host -> neighbor` whose link dose reaches a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticProjection {
    pub node_count: u32,
    /// Sorted, without duplicates.
    pub edges: Vec<(NodeId, NodeId)>,
    pub threshold: f64,
    pub b: f64,
}

/// An edge is kept when some link has `E_l >= threshold` and `E_l > 0`.
pub fn project_links(
    node_count: u32,
    links: &[Link],
    params: &ExposureParams,
    b: f64,
    threshold: f64,
) -> Result<StaticProjection, MetricsError> {
    if !(threshold >= 0.0) {
        return Err(MetricsError::NegativeThreshold(threshold));
    }
    let mut edges: Vec<(NodeId, NodeId)> = links
        .iter()
        .filter(|l| {
            let e = link_exposure(l, params, b);
            e > 0.0 && e >= threshold
        })
        .map(|l| (l.host, l.neighbor))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(StaticProjection { node_count, edges, threshold, b })
}

pub fn static_projection(
    net: &Network,
    params: &ExposureParams,
    b: f64,
    threshold: f64,
) -> Result<StaticProjection, MetricsError> {
    project_links(net.node_count, net.links(), params, b, threshold)
}

impl StaticProjection {
    /// Symmetric closure as sorted adjacency lists.
    pub fn undirected(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.node_count as usize];
        for &(u, v) in &self.edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub in_degree: u32,
    pub out_degree: u32,
    /// Undirected degree.
    pub degree: u32,
    pub clustering: f64,
}

fn sorted_intersection(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Local clustering on an undirected adjacency: triangles / (k (k - 1) / 2).
pub fn local_clustering(adj: &[Vec<NodeId>]) -> Vec<f64> {
    (0..adj.len())
        .into_par_iter()
        .map(|v| {
            let k = adj[v].len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for &u in &adj[v] {
                links += sorted_intersection(&adj[v], &adj[u as usize]);
            }
            // every triangle edge among neighbours is seen twice
            (links as f64 / 2.0) / (k * (k - 1) / 2) as f64
        })
        .collect()
}

pub fn degree_and_clustering(proj: &StaticProjection) -> Vec<NodeMetrics> {
    let n = proj.node_count as usize;
    let mut out = vec![NodeMetrics::default(); n];
    for &(u, v) in &proj.edges {
        out[u as usize].out_degree += 1;
        out[v as usize].in_degree += 1;
    }
    let adj = proj.undirected();
    for ((m, c), a) in out.iter_mut().zip(local_clustering(&adj)).zip(&adj) {
        m.clustering = c;
        m.degree = a.len() as u32;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyAggregate {
    pub day: u32,
    /// Nodes with at least one edge that day.
    pub active_nodes: u32,
    pub mean_degree: f64,
    pub mean_clustering: f64,
}

/// Per-day projections from each day's links; `None` for days without edges.
pub fn daily_aggregates(
    net: &Network,
    params: &ExposureParams,
    b: f64,
    threshold: f64,
) -> Result<Vec<Option<DailyAggregate>>, MetricsError> {
    (0..net.horizon_days)
        .map(|d| {
            let proj = project_links(net.node_count, net.day_slice(d as u64), params, b, threshold)?;
            let adj = proj.undirected();
            let cl = local_clustering(&adj);
            let active: Vec<usize> = (0..adj.len()).filter(|&v| !adj[v].is_empty()).collect();
            if active.is_empty() {
                return Ok(None);
            }
            let k = active.len() as f64;
            Ok(Some(DailyAggregate {
                day: d,
                active_nodes: active.len() as u32,
                mean_degree: active.iter().map(|&v| adj[v].len() as f64).sum::<f64>() / k,
                mean_clustering: active.iter().map(|&v| cl[v]).sum::<f64>() / k,
            }))
        })
        .collect()
}

/// Log-spaced histogram over positive values: `(lower, upper, count)`.
pub fn log_binned(values: &[u32], bins_per_decade: u32) -> Vec<(f64, f64, u64)> {
    let Some(&max) = values.iter().max() else { return Vec::new() };
    if max == 0 {
        return Vec::new();
    }
    let step = 10f64.powf(1.0 / bins_per_decade.max(1) as f64);
    let mut edges = vec![1.0];
    while *edges.last().unwrap() <= max as f64 {
        let next = (edges.last().unwrap() * step).max(edges.last().unwrap() + 1.0).floor();
        edges.push(next);
    }
    let mut counts = vec![0u64; edges.len() - 1];
    for &v in values.iter().filter(|&&v| v > 0) {
        let i = edges.partition_point(|&e| e <= v as f64) - 1;
        counts[i] += 1;
    }
    edges.windows(2).zip(counts).map(|(w, c)| (w[0], w[1], c)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalPathConfig {
    /// Maximum day difference between consecutive links of a path.
    pub max_gap_days: u32,
    /// Use only this many randomly chosen sources (all when `None`).
    pub sample_sources: Option<(usize, u64)>,
}

impl Default for TemporalPathConfig {
    fn default() -> Self {
        TemporalPathConfig { max_gap_days: 5, sample_sources: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TemporalCentrality {
    pub betweenness: f64,
    pub closeness: f64,
}

type DaySet = u128;

/// Day-aggregated adjacency: for each node, `(neighbour, days bitmask)`.
fn day_adjacency(net: &Network) -> Vec<Vec<(NodeId, DaySet)>> {
    let mut m: Vec<HashMap<NodeId, DaySet>> = vec![HashMap::new(); net.node_count as usize];
    for l in net.links() {
        let d = l.day();
        if d < 128 {
            *m[l.host as usize].entry(l.neighbor).or_default() |= 1u128 << d;
        }
    }
    m.into_iter()
        .map(|h| {
            let mut v: Vec<(NodeId, DaySet)> = h.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect()
}

/// Days reachable one hop after any day in `d`.
fn advance(d: DaySet, max_gap: u32) -> DaySet {
    let mut r = 0;
    for g in 1..=max_gap.min(127) {
        r |= d << g;
    }
    r
}

/// Contribution of one source: betweenness increments and distances.
fn from_source(adj: &[Vec<(NodeId, DaySet)>], s: NodeId, max_gap: u32) -> (Vec<f64>, Vec<u32>) {
    let n = adj.len();
    let mut dist = vec![u32::MAX; n];
    dist[s as usize] = 0;

    // Layer k holds states (node, feasible arrival days) reached by exactly k
    // hops, with the number of distinct node sequences reaching each state.
    struct Layer {
        states: Vec<(NodeId, DaySet)>,
        sigma: Vec<f64>,
        /// Per state: children as indices into the next layer.
        children: Vec<Vec<usize>>,
    }
    let mut layers: Vec<Layer> = Vec::new();
    let mut cur_states = vec![(s, 0u128)];
    let mut cur_sigma = vec![1.0];
    let mut k = 0u32;
    loop {
        let mut index: HashMap<(NodeId, DaySet), usize> = HashMap::new();
        let mut next_states = Vec::new();
        let mut next_sigma: Vec<f64> = Vec::new();
        let mut children = Vec::with_capacity(cur_states.len());
        for (i, &(u, days)) in cur_states.iter().enumerate() {
            let reach = if k == 0 { DaySet::MAX } else { advance(days, max_gap) };
            let mut ch = Vec::new();
            for &(w, wd) in &adj[u as usize] {
                let nd = reach & wd;
                if nd == 0 {
                    continue;
                }
                let j = *index.entry((w, nd)).or_insert_with(|| {
                    next_states.push((w, nd));
                    next_sigma.push(0.0);
                    next_states.len() - 1
                });
                next_sigma[j] += cur_sigma[i];
                ch.push(j);
            }
            children.push(ch);
        }
        layers.push(Layer { states: cur_states, sigma: cur_sigma, children });
        if next_states.is_empty() {
            break;
        }
        k += 1;
        for &(w, _) in &next_states {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = k;
            }
        }
        cur_states = next_states;
        cur_sigma = next_sigma;
    }

    // omega(state): shortest-path continuations from the state to any target.
    let mut bc = vec![0.0; n];
    let mut omega_next: Vec<f64> = Vec::new();
    for (k, layer) in layers.iter().enumerate().rev() {
        let next_terminal: Vec<bool> = match layers.get(k + 1) {
            Some(nl) => nl.states.iter().map(|&(w, _)| dist[w as usize] == (k + 1) as u32).collect(),
            None => Vec::new(),
        };
        let omega: Vec<f64> = layer
            .children
            .iter()
            .map(|ch| ch.iter().map(|&j| omega_next[j] + if next_terminal[j] { 1.0 } else { 0.0 }).sum())
            .collect();
        if k > 0 {
            for (i, &(v, _)) in layer.states.iter().enumerate() {
                if v != s {
                    bc[v as usize] += layer.sigma[i] * omega[i];
                }
            }
        }
        omega_next = omega;
    }
    (bc, dist)
}

/// Temporal betweenness and closeness over day-aggregated links.
///
/// A time-respecting path uses one link per hop, each on a day 1 to
/// `max_gap_days` after the previous hop; the first hop may be on any day.
/// Path length is the hop count and the shortest paths between two nodes are
/// taken over all start days. Distinct node sequences are counted once, even
/// if several day sequences realise them. A path that passes a node twice
/// counts for that node twice.
///
/// Betweenness of `v` counts shortest paths with `v` strictly inside; closeness
/// of `v` is `sum over u of 1 / dist(u, v)`.
pub fn temporal_centralities(
    net: &Network,
    cfg: &TemporalPathConfig,
) -> Result<Vec<TemporalCentrality>, MetricsError> {
    if net.horizon_days > 128 {
        return Err(MetricsError::TooManyDays(net.horizon_days));
    }
    let n = net.node_count as usize;
    let adj = day_adjacency(net);
    let sources: Vec<NodeId> = match cfg.sample_sources {
        Some((k, seed)) if k < n => {
            let mut r = rng::stream(seed, 0, 0, purpose::RANKING);
            let mut s: Vec<NodeId> = index::sample(&mut r, n, k).into_iter().map(|x| x as NodeId).collect();
            s.sort_unstable();
            s
        }
        _ => (0..n as NodeId).collect(),
    };
    let scale = n as f64 / sources.len().max(1) as f64;
    let parts: Vec<(Vec<f64>, Vec<u32>)> =
        sources.par_iter().map(|&s| from_source(&adj, s, cfg.max_gap_days)).collect();
    let mut out = vec![TemporalCentrality::default(); n];
    for (bc, dist) in &parts {
        for v in 0..n {
            out[v].betweenness += bc[v] * scale;
            if dist[v] != u32::MAX && dist[v] > 0 {
                out[v].closeness += scale / dist[v] as f64;
            }
        }
    }
    Ok(out)
}

/// Shortest time-respecting hop distance from `s` to every node.
pub fn temporal_distances(net: &Network, s: NodeId, max_gap_days: u32) -> Vec<Option<u32>> {
    let (_, dist) = from_source(&day_adjacency(net), s, max_gap_days);
    dist.into_iter().map(|d| (d != u32::MAX).then_some(d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DAY;

    fn proj(n: u32, edges: &[(NodeId, NodeId)]) -> StaticProjection {
        StaticProjection { node_count: n, edges: edges.to_vec(), threshold: 0.0, b: 1.0 }
    }

    #[test]
    fn clustering_examples() {
        let tri = degree_and_clustering(&proj(3, &[(0, 1), (1, 2), (2, 0)]));
        assert!(tri.iter().all(|m| m.clustering == 1.0));
        let star = degree_and_clustering(&proj(4, &[(0, 1), (0, 2), (0, 3)]));
        assert!(star.iter().all(|m| m.clustering == 0.0));
        // K4 minus edge (2,3): nodes 0 and 1 have degree 3 and 2 of 3 neighbour pairs linked
        let k4m = degree_and_clustering(&proj(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]));
        assert!((k4m[0].clustering - 2.0 / 3.0).abs() < 1e-12);
        assert!((k4m[1].clustering - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(k4m[2].clustering, 1.0);
    }

    fn day_link(u: NodeId, v: NodeId, day: u64) -> Link {
        let t = day * DAY + 100;
        Link::new(u, v, t, t + 600, t, t + 600)
    }

    #[test]
    fn projection_rules() {
        let p = ExposureParams::default();
        let net = Network::new("t", 3, 1, 10_800, 300, vec![
            Link::new(0, 1, 0, 3600, 0, 3600),
            Link::new(1, 2, 0, 3600, 1800, 1800),
        ])
        .unwrap();
        let all = static_projection(&net, &p, 1.0 / 3600.0, 0.0).unwrap();
        assert_eq!(all.edges, vec![(0, 1)]);
        let high = static_projection(&net, &p, 1.0 / 3600.0, 1.0).unwrap();
        assert!(high.edges.is_empty());
        assert!(static_projection(&net, &p, 1.0, -1.0).is_err());
    }

    #[test]
    fn daily_mean_degree() {
        let p = ExposureParams::default();
        let net = Network::new("t", 2, 3, 10_800, 300, vec![day_link(0, 1, 0), day_link(0, 1, 2)]).unwrap();
        let agg = daily_aggregates(&net, &p, 1.0 / 3600.0, 0.0).unwrap();
        assert_eq!(agg[0].unwrap().mean_degree, 1.0);
        assert!(agg[1].is_none());
        assert_eq!(agg[2].unwrap().mean_degree, 1.0);
    }

    #[test]
    fn chain_paths() {
        let net = Network::new("t", 3, 10, 0, 300, vec![day_link(0, 1, 1), day_link(1, 2, 2)]).unwrap();
        let c = temporal_centralities(&net, &TemporalPathConfig::default()).unwrap();
        assert_eq!(c[1].betweenness, 1.0);
        assert_eq!(c[0].betweenness, 0.0);
        assert_eq!(temporal_distances(&net, 0, 5)[2], Some(2));
        assert!((c[2].closeness - 1.5).abs() < 1e-12);

        let far = Network::new("t", 3, 10, 0, 300, vec![day_link(0, 1, 1), day_link(1, 2, 7)]).unwrap();
        assert_eq!(temporal_distances(&far, 0, 5)[2], None);
        let c = temporal_centralities(&far, &TemporalPathConfig::default()).unwrap();
        assert_eq!(c[1].betweenness, 0.0);
        assert_eq!(c[0].closeness, 0.0);
    }

    #[test]
    fn same_day_is_not_a_path() {
        let net = Network::new("t", 3, 2, 0, 300, vec![day_link(0, 1, 1), day_link(1, 2, 1)]).unwrap();
        assert_eq!(temporal_distances(&net, 0, 5)[2], None);
    }

    #[test]
    fn log_bins() {
        let b = log_binned(&[1, 2, 3, 10, 50], 2);
        assert_eq!(b.iter().map(|x| x.2).sum::<u64>(), 5);
        assert_eq!(b[0].0, 1.0);
    }
}
