#![allow(dead_code)]

use proptest::prelude::*;
use spdt_core::network::{Link, Network, DAY};

pub const DELTA: u64 = 10_800;

/// Raw link fields: host, neighbour, day, host start, host stay, delay, stay.
pub type RawLink = (u32, u32, u64, u64, u64, u64, u64);

pub fn build(n: u32, days: u32, raw: &[RawLink]) -> Network {
    let t_end = days as u64 * DAY;
    let links: Vec<Link> = raw
        .iter()
        .filter(|r| r.0 % n != r.1 % n)
        .filter_map(|&(h, v, d, start, stay, delay, nstay)| {
            let ts = (d % days as u64) * DAY + start;
            let tl = (ts + stay).min(t_end);
            let ts2 = (ts + delay).min(tl + DELTA);
            if ts2 >= t_end {
                return None;
            }
            let tl2 = (ts2 + nstay).min(t_end);
            Some(Link::new(h % n, v % n, ts, tl, ts2, tl2))
        })
        .collect();
    Network::new("prop", n, days, DELTA, 1, links).unwrap()
}

pub fn raw_links(max: usize) -> impl Strategy<Value = Vec<RawLink>> {
    prop::collection::vec(
        (0u32..8, 0u32..8, 0u64..4, 0u64..80_000, 0u64..20_000, 0u64..30_000, 0u64..20_000),
        0..max,
    )
}

pub fn network(max_links: usize) -> impl Strategy<Value = Network> {
    (2u32..8, 1u32..5, raw_links(max_links)).prop_map(|(n, d, raw)| build(n, d, &raw))
}

pub fn sorted(mut v: Vec<Link>) -> Vec<Link> {
    v.sort_by_key(|l| (l.host, l.neighbor, l.host_arrive, l.host_depart, l.nbr_arrive, l.nbr_depart));
    v
}
