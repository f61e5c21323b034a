//! Links from location-update traces.
//!
//! A host *visit* is a run of consecutive updates that stay within `radius_m`
//! of the run's first update with no gap above `max_gap_s`. Its centre is the
//! member with the smallest summed distance to the others. Any other user
//! whose own consecutive updates stay near that centre, and who arrives before
//! the host has been gone for `delta_s`, becomes a neighbour.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{collapse_indirect, densify, strip_indirect, Link, Network, NetworkError, NodeId, DAY};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationUpdate {
    pub user: u64,
    pub lat: f64,
    pub lon: f64,
    /// Unix seconds.
    pub time: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitExtractionConfig {
    pub radius_m: f64,
    pub max_gap_s: u64,
    pub delta_s: u64,
    pub min_nbr_updates: usize,
}

impl Default for VisitExtractionConfig {
    fn default() -> Self {
        VisitExtractionConfig { radius_m: 20.0, max_gap_s: 1800, delta_s: 10_800, min_nbr_updates: 2 }
    }
}

impl VisitExtractionConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.radius_m > 0.0) || self.max_gap_s == 0 {
            return Err(IngestError::Config("radius_m and max_gap_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub user: u64,
    pub lat: f64,
    pub lon: f64,
    pub arrive: i64,
    pub depart: i64,
    /// Indices into the user's time-ordered updates.
    pub members: Vec<usize>,
}

/// Great-circle distance in metres.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

fn dist(a: &LocationUpdate, b: &LocationUpdate) -> f64 {
    haversine_m(a.lat, a.lon, b.lat, b.lon)
}

/// Visits of one user; `updates` must be sorted by time.
pub fn extract_visits(updates: &[LocationUpdate], cfg: &VisitExtractionConfig) -> Vec<Visit> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < updates.len() {
        let mut j = i + 1;
        while j < updates.len()
            && dist(&updates[i], &updates[j]) <= cfg.radius_m
            && (updates[j].time - updates[j - 1].time) as u64 <= cfg.max_gap_s
        {
            j += 1;
        }
        let members: Vec<usize> = (i..j).collect();
        let centre = members
            .iter()
            .map(|&a| (a, members.iter().map(|&b| dist(&updates[a], &updates[b])).sum::<f64>()))
            .fold((i, f64::INFINITY), |best, (a, s)| if s < best.1 { (a, s) } else { best });
        out.push(Visit {
            user: updates[i].user,
            lat: updates[centre.0].lat,
            lon: updates[centre.0].lon,
            arrive: updates[i].time,
            depart: updates[j - 1].time,
            members,
        });
        i = j;
    }
    out
}

/// Unit-sphere coordinates scaled to metres, for a uniform 3-D grid.
fn xyz(lat: f64, lon: f64) -> [f64; 3] {
    let (p, l) = (lat.to_radians(), lon.to_radians());
    [EARTH_RADIUS_M * p.cos() * l.cos(), EARTH_RADIUS_M * p.cos() * l.sin(), EARTH_RADIUS_M * p.sin()]
}

/// Grid of all updates with cell side equal to the radius. A point within the
/// radius (great-circle) is also within it in chord length, so it lies in one
/// of the 27 cells around the query.
struct Grid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<(usize, usize)>>,
}

impl Grid {
    fn key(&self, p: [f64; 3]) -> [i64; 3] {
        p.map(|x| (x / self.cell).floor() as i64)
    }

    fn new(users: &[Vec<LocationUpdate>], cell: f64) -> Self {
        let mut g = Grid { cell, cells: HashMap::new() };
        for (u, ups) in users.iter().enumerate() {
            for (i, up) in ups.iter().enumerate() {
                let k = g.key(xyz(up.lat, up.lon));
                g.cells.entry(k).or_default().push((u, i));
            }
        }
        g
    }

    fn near(&self, lat: f64, lon: f64) -> Vec<(usize, usize)> {
        let k = self.key(xyz(lat, lon));
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        out.extend_from_slice(v);
                    }
                }
            }
        }
        out
    }
}

/// Raw links before re-timing: `(host user idx, nbr user idx, t_s, t_l, t_s', t_l')`.
type RawLink = (usize, usize, i64, i64, i64, i64);

/// Links anchored at every host visit. `users[k]` holds user `k`'s updates
/// sorted by time and `visits[k]` its visits.
pub fn build_links(
    users: &[Vec<LocationUpdate>],
    visits: &[Vec<Visit>],
    cfg: &VisitExtractionConfig,
) -> Vec<RawLink> {
    let grid = Grid::new(users, cfg.radius_m);
    let per_host: Vec<Vec<RawLink>> = visits
        .par_iter()
        .enumerate()
        .map(|(h, vs)| {
            let mut out = Vec::new();
            for v in vs {
                let mut by_user: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (u, i) in grid.near(v.lat, v.lon) {
                    let up = &users[u][i];
                    if u != h && haversine_m(v.lat, v.lon, up.lat, up.lon) <= cfg.radius_m {
                        by_user.entry(u).or_default().push(i);
                    }
                }
                for (u, mut idx) in by_user {
                    idx.sort_unstable();
                    // runs of consecutive updates with small gaps
                    let mut s = 0;
                    while s < idx.len() {
                        let mut e = s + 1;
                        while e < idx.len()
                            && idx[e] == idx[e - 1] + 1
                            && (users[u][idx[e]].time - users[u][idx[e - 1]].time) as u64 <= cfg.max_gap_s
                        {
                            e += 1;
                        }
                        if e - s >= cfg.min_nbr_updates {
                            let (a, b) = (users[u][idx[s]].time, users[u][idx[e - 1]].time);
                            if a <= v.depart + cfg.delta_s as i64 && b >= v.arrive {
                                out.push((h, u, v.arrive, v.depart, a, b));
                            }
                        }
                        s = e;
                    }
                }
            }
            out
        })
        .collect();
    per_host.into_iter().flatten().collect()
}

/// Result of ingesting a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub network: Network,
    /// Raw user id of each node.
    pub user_ids: Vec<u64>,
    /// Unix time of second zero.
    pub origin: i64,
}

/// Full pipeline: group updates by user, extract visits, build links and
/// re-time them from `origin` (default: earliest update).
pub fn ingest(
    updates: &[LocationUpdate],
    cfg: &VisitExtractionConfig,
    origin: Option<i64>,
) -> Result<Ingested, IngestError> {
    cfg.validate()?;
    let mut by_user: BTreeMap<u64, Vec<LocationUpdate>> = BTreeMap::new();
    for u in updates {
        by_user.entry(u.user).or_default().push(*u);
    }
    let user_ids: Vec<u64> = by_user.keys().copied().collect();
    let mut users: Vec<Vec<LocationUpdate>> = by_user.into_values().collect();
    for u in &mut users {
        u.sort_by_key(|x| x.time);
    }
    let origin = origin.unwrap_or_else(|| updates.iter().map(|u| u.time).min().unwrap_or(0));
    if let Some(first) = updates.iter().map(|u| u.time).min() {
        if first < origin {
            return Err(IngestError::Config(format!("update at {first} precedes origin {origin}")));
        }
    }
    let visits: Vec<Vec<Visit>> = users.par_iter().map(|u| extract_visits(u, cfg)).collect();
    let raw = build_links(&users, &visits, cfg);
    let last = updates.iter().map(|u| u.time - origin).max().unwrap_or(-1);
    let horizon_days = if last < 0 { 0 } else { (last as u64 / DAY + 1) as u32 };
    let rel = |t: i64| (t - origin) as u64;
    let links: Vec<Link> = raw
        .into_iter()
        .map(|(h, u, a, b, c, d)| Link::new(h as NodeId, u as NodeId, rel(a), rel(b), rel(c), rel(d)))
        .collect();
    let network = Network::new("sdt", users.len() as u32, horizon_days, cfg.delta_s, 1, links)?;
    Ok(Ingested { network, user_ids, origin })
}

/// Parses `user_id,lat,lon,unix_time` lines. Blank lines and `#` comments are
/// skipped, as is a first line that does not parse as numbers (a header).
pub fn parse_updates(text: &str) -> Result<Vec<LocationUpdate>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let err = |msg: String| IngestError::Parse { line: i + 1, msg };
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        let parsed = (f[0].parse::<u64>(), f[1].parse::<f64>(), f[2].parse::<f64>(), f[3].parse::<i64>());
        match parsed {
            (Ok(user), Ok(lat), Ok(lon), Ok(time)) => out.push(LocationUpdate { user, lat, lon, time }),
            _ if out.is_empty() && i == 0 => continue,
            _ => return Err(err(format!("cannot parse `{t}`"))),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub links: usize,
    pub isolated: usize,
    /// Links per node that appears in at least one link.
    pub link_density: f64,
}

impl VariantStats {
    pub fn of(net: &Network) -> Self {
        let isolated = net.isolated_nodes();
        let active = net.node_count as usize - isolated;
        VariantStats {
            links: net.links().len(),
            isolated,
            link_density: if active == 0 { 0.0 } else { net.links().len() as f64 / active as f64 },
        }
    }
}

/// The six network variants derived from a raw extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct Variants {
    pub sdt: Network,
    pub sst: Network,
    pub ddt: Network,
    pub dst: Network,
    pub ldt: Network,
    pub lst: Network,
}

impl Variants {
    pub fn named(&self) -> [(&'static str, &Network); 6] {
        [
            ("sdt", &self.sdt),
            ("sst", &self.sst),
            ("ddt", &self.ddt),
            ("dst", &self.dst),
            ("ldt", &self.ldt),
            ("lst", &self.lst),
        ]
    }
}

pub fn build_network_variants(base: &Network) -> Variants {
    let rename = |mut n: Network, name: &str| {
        n.name = name.to_string();
        n
    };
    let ddt = rename(densify(base), "ddt");
    let ldt = rename(collapse_indirect(&ddt), "ldt");
    Variants {
        sdt: rename(base.clone(), "sdt"),
        sst: rename(strip_indirect(base), "sst"),
        dst: rename(strip_indirect(&ddt), "dst"),
        lst: rename(strip_indirect(&ldt), "lst"),
        ddt,
        ldt,
    }
}
