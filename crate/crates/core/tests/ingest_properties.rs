use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spdt_core::ingest::*;

const M_PER_DEG: f64 = 6_371_008.8 * std::f64::consts::PI / 180.0;

/// Update near location `loc` (locations sit 1 km apart along a meridian),
/// offset by `dn` metres north and `de` metres east.
fn at(user: u64, loc: u32, dn: f64, de: f64, time: i64) -> LocationUpdate {
    let lat = 22.3 + (loc as f64 * 1000.0 + dn) / M_PER_DEG;
    let lon = 114.1 + de / (M_PER_DEG * lat.to_radians().cos());
    LocationUpdate { user, lat, lon, time }
}

fn stay<R: Rng>(r: &mut R, user: u64, loc: u32, from: i64, to: i64) -> Vec<LocationUpdate> {
    (from..=to)
        .step_by(300)
        .map(|t| at(user, loc, r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), t))
        .collect()
}

/// Pairs `(2i, 2i+1)` share location `i` for an hour; each user also spends an
/// hour alone at a private location, and user 1000 + i passes location `i`
/// long after the pair has left.
fn planted(seed: u64) -> (Vec<LocationUpdate>, BTreeSet<(u64, u64)>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut ups = Vec::new();
    let mut pairs = BTreeSet::new();
    for i in 0..15u32 {
        let (a, b) = (2 * i as u64, 2 * i as u64 + 1);
        let t0 = r.random_range(0..50_000i64);
        ups.extend(stay(&mut r, a, i, t0, t0 + 3600));
        ups.extend(stay(&mut r, b, i, t0 + 600, t0 + 4200));
        ups.extend(stay(&mut r, a, 100 + 2 * i, t0 + 8000, t0 + 9000));
        ups.extend(stay(&mut r, b, 101 + 2 * i, t0 + 8000, t0 + 9000));
        ups.extend(stay(&mut r, 1000 + i as u64, i, t0 + 30_000, t0 + 31_000));
        pairs.insert((a, b));
        pairs.insert((b, a));
    }
    ups.shuffle(&mut r);
    (ups, pairs)
}

fn linked_pairs(ing: &Ingested) -> BTreeSet<(u64, u64)> {
    ing.network
        .links()
        .iter()
        .map(|l| (ing.user_ids[l.host as usize], ing.user_ids[l.neighbor as usize]))
        .collect()
}

#[test]
fn planted_colocations_are_found_exactly() {
    for seed in 0..5 {
        let (ups, pairs) = planted(seed);
        let ing = ingest(&ups, &VisitExtractionConfig::default(), None).unwrap();
        assert_eq!(linked_pairs(&ing), pairs, "seed {seed}");
    }
}

#[test]
fn input_order_does_not_matter() {
    let (mut ups, _) = planted(9);
    let cfg = VisitExtractionConfig::default();
    let a = ingest(&ups, &cfg, None).unwrap();
    ups.reverse();
    assert_eq!(a, ingest(&ups, &cfg, None).unwrap());
}

#[test]
fn thread_count_does_not_matter() {
    let (ups, _) = planted(4);
    let cfg = VisitExtractionConfig::default();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = one.install(|| ingest(&ups, &cfg, None).unwrap());
    assert_eq!(a, ingest(&ups, &cfg, None).unwrap());
}

#[test]
fn empty_and_degenerate_traces() {
    let cfg = VisitExtractionConfig::default();
    let none = ingest(&[], &cfg, None).unwrap();
    assert_eq!(none.network.links().len(), 0);
    assert_eq!(none.network.node_count, 0);
    let single = ingest(&[at(5, 0, 0.0, 0.0, 10)], &cfg, None).unwrap();
    assert_eq!((single.network.node_count, single.network.links().len()), (1, 0));
    assert!(ingest(&[at(5, 0, 0.0, 0.0, 10)], &cfg, Some(20)).is_err());
    let bad = VisitExtractionConfig { radius_m: 0.0, ..cfg };
    assert!(ingest(&[], &bad, None).is_err());
}

#[test]
fn parse_reports_the_offending_line() {
    let text = "user,lat,lon,time\n# note\n1,22.3,114.1,100\n2,22.3,114.1\n";
    match parse_updates(text) {
        Err(IngestError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_traces_give_consistent_variants(
        raw in prop::collection::vec((0u64..6, 0u32..3, -30.0f64..30.0, 0i64..30_000), 0..120),
    ) {
        let ups: Vec<LocationUpdate> = raw.iter().map(|&(u, loc, dn, t)| at(u, loc, dn, 0.0, t)).collect();
        let cfg = VisitExtractionConfig::default();
        let ing = ingest(&ups, &cfg, Some(0)).unwrap();
        let net = &ing.network;
        for l in net.links() {
            prop_assert!(l.host != l.neighbor);
            prop_assert!(l.nbr_arrive <= l.host_depart + cfg.delta_s);
        }
        let v = build_network_variants(net);
        prop_assert_eq!(v.ldt.links().len(), v.ddt.links().len());
        prop_assert_eq!(v.lst.links().len(), v.ldt.links().len());
        prop_assert!(v.sst.links().len() <= v.sdt.links().len());
        prop_assert!(v.dst.links().len() <= v.ddt.links().len());
        let touched = |n: &spdt_core::Network| -> BTreeSet<u32> {
            n.links().iter().flat_map(|l| [l.host, l.neighbor]).collect()
        };
        prop_assert_eq!(touched(&v.lst), touched(&v.ldt));
        let again = ingest(&ups, &cfg, Some(0)).unwrap();
        prop_assert_eq!(&again, &ing);
    }
}
