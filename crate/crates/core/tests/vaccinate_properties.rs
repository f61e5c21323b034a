mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spdt_core::epidemic::*;
use spdt_core::graphgen::{generate_network, GraphGenParams};
use spdt_core::network::{Link, Network, DAY};
use spdt_core::vaccinate::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config(seeds: SeedSelection, days: u32) -> SimConfig {
    SimConfig { disease: DiseaseParams::default(), seeds, horizon_days: days, intervention: Default::default() }
}

fn relabel(net: &Network, perm: &[u32]) -> Network {
    let links: Vec<Link> = net
        .links()
        .iter()
        .map(|l| Link { host: perm[l.host as usize], neighbor: perm[l.neighbor as usize], ..*l })
        .collect();
    Network::new("perm", net.node_count, net.horizon_days, net.delta_s, net.dt_s, links).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn vaccinated_nodes_are_never_infected(net in common::network(60), seed in any::<u64>(), p in 0.1f64..0.9) {
        let sim = Simulator::new(&net);
        let mut cfg = config(SeedSelection::Random(1), net.horizon_days);
        cfg.disease.exposure.g = 20.0;
        let seeds = sim.select_seeds(&cfg.seeds, seed).unwrap();
        let st0 = sim.initial_state(&cfg, &seeds, seed);
        let plan = plan_mass_vaccination(&st0.status, &Ranking::Random, p, 1.0, &mut rng(seed)).unwrap();
        cfg.intervention.pre_vaccinated = plan.vaccinated.clone();
        let mut st = sim.initial_state(&cfg, &seeds, seed);
        for day in 0..cfg.horizon_days {
            sim.step_day(&mut st, &cfg, day, seed);
            for &v in &plan.vaccinated {
                prop_assert_eq!(st.status[v as usize], Status::Recovered);
            }
        }
    }

    #[test]
    fn imv_follows_relabelling(net in common::network(50), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<u32> = (0..net.node_count).collect();
        perm.shuffle(&mut rng(perm_seed));
        let other = relabel(&net, &perm);
        let table = LocationClassTable::default();
        let a = rank_imv(&build_movement_profiles(&net, net.horizon_days, &table, true), &table, 0.1);
        let b = rank_imv(&build_movement_profiles(&other, net.horizon_days, &table, true), &table, 0.1);
        for v in 0..net.node_count as usize {
            prop_assert_eq!(a[v], b[perm[v] as usize]);
        }
        let da = rank_degree(&net, net.horizon_days, true);
        let db = rank_degree(&other, net.horizon_days, true);
        for v in 0..net.node_count as usize {
            prop_assert_eq!(da[v], db[perm[v] as usize]);
        }
    }

    #[test]
    fn positive_scaling_keeps_the_set(scores in prop::collection::vec(0.0f64..10.0, 2..60), k in 0.01f64..100.0, p in 0.0f64..1.0, seed in any::<u64>()) {
        let status = vec![Status::Susceptible; scores.len()];
        let scaled: Vec<f64> = scores.iter().map(|s| s * k).collect();
        let a = plan_mass_vaccination(&status, &Ranking::Scores(scores), p, 0.7, &mut rng(seed)).unwrap();
        let b = plan_mass_vaccination(&status, &Ranking::Scores(scaled), p, 0.7, &mut rng(seed)).unwrap();
        let (mut x, mut y) = (a.vaccinated, b.vaccinated);
        x.sort_unstable();
        y.sort_unstable();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn larger_p_is_a_superset(n in 2usize..200, p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, f in 0.0f64..=1.0, seed in any::<u64>(), random in any::<bool>()) {
        let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        let status = vec![Status::Susceptible; n];
        let ranking = if random { Ranking::Random } else { Ranking::Scores((0..n).map(|i| ((i * 7919) % 13) as f64).collect()) };
        let a = plan_mass_vaccination(&status, &ranking, lo, f, &mut rng(seed)).unwrap();
        let b = plan_mass_vaccination(&status, &ranking, hi, f, &mut rng(seed)).unwrap();
        for v in &a.vaccinated {
            prop_assert!(b.vaccinated.contains(v));
        }
        prop_assert_eq!(a.vaccinated.len() + a.shortfall, a.target);
    }
}

#[test]
fn rankings_are_deterministic() {
    let p = GraphGenParams { n: 400, t_days: 5, ..GraphGenParams::heterogeneous() };
    let net = generate_network(&p, 2).unwrap();
    let table = LocationClassTable::default();
    let imv = || rank_imv(&build_movement_profiles(&net, 5, &table, true), &table, 0.1);
    assert_eq!(imv(), imv());
    assert_eq!(rank_imv_exact(&net, 5, 0.1, true), rank_imv_exact(&net, 5, 0.1, true));
    assert_eq!(rank_acquaintance(&net, 5, true, &mut rng(1)), rank_acquaintance(&net, 5, true, &mut rng(1)));
    assert_eq!(rank_order(&imv()), rank_order(&imv()));
}

#[test]
fn acquaintance_scores_follow_the_friendship_paradox() {
    let p = GraphGenParams { n: 300, t_days: 4, ..GraphGenParams::heterogeneous() };
    let net = generate_network(&p, 8).unwrap();
    let adj = contact_lists(&net, 4, true);
    let mut expected = vec![0.0; adj.len()];
    for a in &adj {
        for &v in a {
            expected[v as usize] += 1.0 / a.len() as f64;
        }
    }
    let reps = 4000;
    let mut got = vec![0.0; adj.len()];
    let mut r = rng(3);
    for _ in 0..reps {
        for (g, s) in got.iter_mut().zip(rank_acquaintance(&net, 4, true, &mut r)) {
            *g += s / reps as f64;
        }
    }
    let (e, g): (f64, f64) = (expected.iter().sum(), got.iter().sum());
    assert!((g / e - 1.0).abs() < 0.05);
    let top = rank_order(&expected)[0] as usize;
    assert!((got[top] / expected[top] - 1.0).abs() < 0.05, "{} vs {}", got[top], expected[top]);
}

/// Root 0 -> children 1..=3 on day 1; each child -> two grandchildren on day 2.
fn tree() -> Network {
    let mut links = Vec::new();
    for c in 1..=3u32 {
        links.push(Link::new(0, c, DAY, DAY + 36_000, DAY, DAY + 36_000));
        for g in 0..2 {
            let gc = 4 + (c - 1) * 2 + g;
            links.push(Link::new(c, gc, 2 * DAY, 2 * DAY + 36_000, 2 * DAY, 2 * DAY + 36_000));
        }
    }
    Network::new("tree", 10, 3, common::DELTA, 1, links).unwrap()
}

#[test]
fn ring_around_a_detected_root() {
    let net = tree();
    let mut cfg = config(SeedSelection::Explicit(vec![0]), 3);
    cfg.disease.exposure.g = 100.0;
    let contacts = contact_lists(&net, 3, true);
    cfg.intervention.ring = Some(ring_config(RingMode::Eligible(vec![true; 10]), 1.0, 0, contacts).unwrap());
    for seed in 0..20 {
        let run = run_simulation(&net, &cfg, seed).unwrap();
        assert_eq!(run.outbreak_size, 1);
        assert_eq!(run.vaccinated, 3);
    }
    // Without the ring the strong emitter reaches the grandchildren.
    cfg.intervention.ring = None;
    let spread: u64 = (0..20).map(|s| run_simulation(&net, &cfg, s).unwrap().outbreak_size).sum();
    assert!(spread > 20 * 4);
}

#[test]
fn random_ring_vaccinates_a_fraction_of_contacts() {
    let mut links = Vec::new();
    for c in 1..200u32 {
        links.push(Link::new(0, c, DAY, DAY + 600, DAY + 100, DAY + 200));
    }
    let net = Network::new("star", 200, 2, common::DELTA, 1, links).unwrap();
    let contacts = contact_lists(&net, 2, true);
    let mut cfg = config(SeedSelection::Explicit(vec![0]), 2);
    for p in [0.1, 0.5, 0.9] {
        cfg.intervention.ring = Some(ring_config(RingMode::Random(p), 1.0, 0, contacts.clone()).unwrap());
        let mean = (0..200).map(|s| run_simulation(&net, &cfg, s).unwrap().vaccinated as f64).sum::<f64>() / 200.0;
        let expected = p * 199.0;
        let sd = (199.0 * p * (1.0 - p) / 200.0).sqrt();
        assert!((mean - expected).abs() < 4.0 * sd, "P={p}: {mean} vs {expected}");
    }
}

#[test]
fn undetected_cases_trigger_nothing() {
    let net = tree();
    let mut cfg = config(SeedSelection::Explicit(vec![0]), 3);
    let contacts = contact_lists(&net, 3, true);
    cfg.intervention.ring = Some(ring_config(RingMode::Eligible(vec![true; 10]), 0.0, 0, contacts).unwrap());
    assert_eq!(run_simulation(&net, &cfg, 1).unwrap().vaccinated, 0);
}

#[test]
fn class_weights_and_eligibility() {
    assert!((imv_class_weight(1, Some(1), 0.1) - 0.1).abs() < 1e-15);
    assert!((imv_class_weight(16, None, 0.1) - 0.5 * (2.0 - 0.9f64.powi(16))).abs() < 1e-15);
    let flags = ring_eligibility(&[0.1, 5.0, 3.0, 3.0], 0.5, None);
    assert_eq!(flags, vec![false, true, true, false]);
    assert!((efficiency(653.0, 139.0).unwrap() - 78.71).abs() < 0.01);
    assert!(efficiency(0.0, 1.0).is_err());
    assert!(plan_mass_vaccination(&[Status::Susceptible], &Ranking::Random, 1.5, 1.0, &mut rng(0)).is_err());
}
