//! Node rankings for vaccination and their deployment.
//!
//! IMV scores a node by how often it visits crowded places: each visit is
//! bucketed into a class by its number of distinct contacts, and each class
//! carries the average chance `1 - (1 - beta)^d` of passing the infection to
//! at least one of `d` contacts over the class bounds.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epidemic::{EpidemicError, RingConfig, RingMode, SimConfig, SimulationRun, Simulator, Status};
use crate::network::{Link, LinkKind, Network, NodeId};
use crate::rng::{self, purpose};

#[derive(Debug, Error, PartialEq)]
pub enum VaccError {
    #[error("fraction `{0}` must lie in [0, 1], got {1}")]
    Fraction(&'static str, f64),
    #[error("baseline outbreak must be positive, got {0}")]
    NoBaseline(f64),
    #[error("class bounds must be contiguous from 1 and increasing")]
    BadClasses,
    #[error(transparent)]
    Epidemic(#[from] EpidemicError),
}

/// Contact-count classes `[lo, hi]`; the last class may be unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationClassTable {
    pub classes: Vec<(u32, Option<u32>)>,
}

impl Default for LocationClassTable {
    fn default() -> Self {
        LocationClassTable {
            classes: vec![
                (1, Some(5)),
                (6, Some(15)),
                (16, Some(25)),
                (26, Some(50)),
                (51, Some(100)),
                (101, None),
            ],
        }
    }
}

impl LocationClassTable {
    pub fn new(classes: Vec<(u32, Option<u32>)>) -> Result<Self, VaccError> {
        let mut expect = 1;
        for (i, &(lo, hi)) in classes.iter().enumerate() {
            if lo != expect {
                return Err(VaccError::BadClasses);
            }
            match hi {
                Some(h) if h >= lo => expect = h + 1,
                None if i + 1 == classes.len() => {}
                _ => return Err(VaccError::BadClasses),
            }
        }
        Ok(LocationClassTable { classes })
    }

    pub fn class_of(&self, count: u32) -> Option<usize> {
        self.classes.iter().position(|&(lo, hi)| count >= lo && hi.is_none_or(|h| count <= h))
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// A host stay and the distinct neighbours it met.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Visit {
    pub host: NodeId,
    pub arrive: u64,
    pub depart: u64,
    pub neighbors: Vec<NodeId>,
}

fn counts_link(l: &Link, use_indirect: bool) -> bool {
    use_indirect || l.kind() != LinkKind::IndirectOnly
}

/// Groups window links by `(host, t_s, t_l)`.
pub fn visits(net: &Network, window_days: u32, use_indirect: bool) -> Vec<Visit> {
    let mut m: BTreeMap<(NodeId, u64, u64), Vec<NodeId>> = BTreeMap::new();
    for l in net.window(window_days as u64) {
        if counts_link(l, use_indirect) {
            m.entry((l.host, l.host_arrive, l.host_depart)).or_default().push(l.neighbor);
        }
    }
    m.into_iter()
        .map(|((host, arrive, depart), mut nb)| {
            nb.sort_unstable();
            nb.dedup();
            Visit { host, arrive, depart, neighbors: nb }
        })
        .collect()
}

/// Per node, how many visits fell into each class.
pub fn build_movement_profiles(
    net: &Network,
    window_days: u32,
    table: &LocationClassTable,
    use_indirect: bool,
) -> Vec<Vec<u32>> {
    let mut f = vec![vec![0u32; table.len()]; net.node_count as usize];
    for v in visits(net, window_days, use_indirect) {
        if let Some(c) = table.class_of(v.neighbors.len() as u32) {
            f[v.host as usize][c] += 1;
        }
    }
    f
}

/// `(1 - beta)^d`, with an unbounded class end treated as zero.
fn miss(beta: f64, d: Option<u32>) -> f64 {
    d.map_or(0.0, |d| (1.0 - beta).powi(d as i32))
}

/// Class weight `((1 - (1-beta)^lo) + (1 - (1-beta)^hi)) / 2`.
pub fn imv_class_weight(lo: u32, hi: Option<u32>, beta: f64) -> f64 {
    0.5 * (2.0 - miss(beta, Some(lo)) - miss(beta, hi))
}

/// `W = sum_i f_i w_i`.
pub fn rank_imv(profiles: &[Vec<u32>], table: &LocationClassTable, beta: f64) -> Vec<f64> {
    let w: Vec<f64> = table.classes.iter().map(|&(lo, hi)| imv_class_weight(lo, hi, beta)).collect();
    profiles.iter().map(|f| f.iter().zip(&w).map(|(&c, w)| c as f64 * w).sum()).collect()
}

/// Exact per-visit weights `1 - (1 - beta)^d`.
pub fn rank_imv_exact(net: &Network, window_days: u32, beta: f64, use_indirect: bool) -> Vec<f64> {
    let mut w = vec![0.0; net.node_count as usize];
    for v in visits(net, window_days, use_indirect) {
        w[v.host as usize] += 1.0 - miss(beta, Some(v.neighbors.len() as u32));
    }
    w
}

/// Stay-time dependent transmission probability `1.6 beta0 (1 - e^{-t / t0})`.
pub fn temporal_beta(stay_s: f64, beta0: f64, t0_s: f64) -> f64 {
    1.6 * beta0 * -(-stay_s / t0_s).exp_m1()
}

/// Exact per-visit weights with `beta` depending on the host's stay time.
pub fn rank_imv_temporal(net: &Network, window_days: u32, beta0: f64, t0_s: f64, use_indirect: bool) -> Vec<f64> {
    let mut w = vec![0.0; net.node_count as usize];
    for v in visits(net, window_days, use_indirect) {
        let beta = temporal_beta((v.depart - v.arrive) as f64, beta0, t0_s);
        w[v.host as usize] += 1.0 - miss(beta, Some(v.neighbors.len() as u32));
    }
    w
}

/// Undirected distinct-neighbour lists from the window links.
pub fn contact_lists(net: &Network, window_days: u32, use_indirect: bool) -> Vec<Vec<NodeId>> {
    let mut adj = vec![Vec::new(); net.node_count as usize];
    for l in net.window(window_days as u64) {
        if counts_link(l, use_indirect) {
            adj[l.host as usize].push(l.neighbor);
            adj[l.neighbor as usize].push(l.host);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Every node with a contact names one of them uniformly; score = times named.
pub fn rank_acquaintance<R: Rng + ?Sized>(
    net: &Network,
    window_days: u32,
    use_indirect: bool,
    rng: &mut R,
) -> Vec<f64> {
    let adj = contact_lists(net, window_days, use_indirect);
    let mut score = vec![0.0; adj.len()];
    for a in &adj {
        if !a.is_empty() {
            score[a[rng.random_range(0..a.len())] as usize] += 1.0;
        }
    }
    score
}

/// Distinct neighbours each node contacted as host in the window.
pub fn rank_degree(net: &Network, window_days: u32, use_indirect: bool) -> Vec<f64> {
    let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); net.node_count as usize];
    for l in net.window(window_days as u64) {
        if counts_link(l, use_indirect) {
            out[l.host as usize].push(l.neighbor);
        }
    }
    out.into_iter()
        .map(|mut v| {
            v.sort_unstable();
            v.dedup();
            v.len() as f64
        })
        .collect()
}

/// Node ids ordered by descending score, ties by ascending id.
pub fn rank_order(scores: &[f64]) -> Vec<NodeId> {
    let mut ids: Vec<NodeId> = (0..scores.len() as NodeId).collect();
    ids.sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b)));
    ids
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Ranking {
    Scores(Vec<f64>),
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MassPlan {
    /// In priority order.
    pub vaccinated: Vec<NodeId>,
    /// Doses wanted (`round(P N)`).
    pub target: usize,
    /// Doses not given because the pool was too small or nodes were not
    /// susceptible.
    pub shortfall: usize,
}

fn check_fraction(name: &'static str, x: f64) -> Result<(), VaccError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(VaccError::Fraction(name, x))
    }
}

/// Picks the preventive vaccination set.
///
/// A pool of `round(F N)` nodes supplies information; it is ranked (or, for
/// random vaccination, shuffled once) and the first `round(P N)` susceptible
/// pool members are chosen. The pool and its order depend only on the rng, so
/// a larger `P` always yields a superset.
pub fn plan_mass_vaccination<R: Rng + ?Sized>(
    status: &[Status],
    ranking: &Ranking,
    p: f64,
    f: f64,
    rng: &mut R,
) -> Result<MassPlan, VaccError> {
    check_fraction("P", p)?;
    check_fraction("F", f)?;
    let n = status.len();
    let pool_size = ((f * n as f64).round() as usize).min(n);
    let mut pool: Vec<NodeId> = if pool_size == n {
        (0..n as NodeId).collect()
    } else {
        let mut v: Vec<NodeId> = index::sample(rng, n, pool_size).into_iter().map(|x| x as NodeId).collect();
        v.sort_unstable();
        v
    };
    match ranking {
        Ranking::Random => pool.shuffle(rng),
        Ranking::Scores(s) => {
            pool.sort_by(|&a, &b| s[b as usize].total_cmp(&s[a as usize]).then(a.cmp(&b)))
        }
    }
    let target = (p * n as f64).round() as usize;
    let vaccinated: Vec<NodeId> = pool
        .into_iter()
        .take(target)
        .filter(|&v| status[v as usize] == Status::Susceptible)
        .collect();
    Ok(MassPlan { shortfall: target - vaccinated.len(), vaccinated, target })
}

/// Applies a plan: every listed node becomes recovered.
pub fn apply_mass_vaccination(status: &mut [Status], plan: &MassPlan) {
    for &v in &plan.vaccinated {
        if status[v as usize] == Status::Susceptible {
            status[v as usize] = Status::Recovered;
        }
    }
}

/// One replicate with a preventive plan drawn after the seeds are placed.
/// The plan uses its own stream of `seed`, so strategies compared at equal
/// seeds share seeds and infection draws.
pub fn run_with_mass_plan(
    sim: &Simulator,
    cfg: &SimConfig,
    ranking: &Ranking,
    p: f64,
    f: f64,
    seed: u64,
) -> Result<(SimulationRun, MassPlan), VaccError> {
    let seeds = sim.select_seeds(&cfg.seeds, seed)?;
    let st = sim.initial_state(cfg, &seeds, seed);
    let plan = plan_mass_vaccination(&st.status, ranking, p, f, &mut rng::stream(seed, 0, 0, purpose::MASS))?;
    let mut c = cfg.clone();
    c.intervention.pre_vaccinated = plan.vaccinated.clone();
    Ok((sim.run(&c, seed)?, plan))
}

/// Flags for ring vaccination in threshold mode: the top `ceil(P N)` nodes by
/// score, or the top `ceil(P |pool|)` of `pool` when given.
pub fn ring_eligibility(scores: &[f64], p: f64, pool: Option<&[NodeId]>) -> Vec<bool> {
    let mut flags = vec![false; scores.len()];
    let ordered: Vec<NodeId> = match pool {
        None => rank_order(scores),
        Some(pool) => {
            let mut v = pool.to_vec();
            v.sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b)));
            v
        }
    };
    let k = (p * ordered.len() as f64).ceil() as usize;
    for &v in ordered.iter().take(k) {
        flags[v as usize] = true;
    }
    flags
}

/// Ring vaccination set-up for the simulator.
pub fn ring_config(
    mode: RingMode,
    f_detect: f64,
    deploy_day: u32,
    neighbors: Vec<Vec<NodeId>>,
) -> Result<RingConfig, VaccError> {
    check_fraction("F_detect", f_detect)?;
    if let RingMode::Random(p) = mode {
        check_fraction("P", p)?;
    }
    Ok(RingConfig { mode, f_detect, deploy_day, neighbors })
}

/// Percentage reduction of the mean outbreak relative to no vaccination.
pub fn efficiency(z_ref: f64, z_vac: f64) -> Result<f64, VaccError> {
    if !(z_ref > 0.0) {
        return Err(VaccError::NoBaseline(z_ref));
    }
    Ok((z_ref - z_vac) / z_ref * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn class_lookup() {
        let t = LocationClassTable::default();
        assert_eq!(t.class_of(3), Some(0));
        assert_eq!(t.class_of(120), Some(5));
        assert_eq!(t.class_of(0), None);
        assert!(LocationClassTable::new(vec![(1, Some(5)), (7, None)]).is_err());
    }

    #[test]
    fn class_weights() {
        assert!((imv_class_weight(1, Some(1), 0.3) - 0.3).abs() < 1e-15);
        let w1 = imv_class_weight(1, Some(5), 0.1);
        assert!((w1 - 0.5 * (2.0 - 0.9 - 0.9f64.powi(5))).abs() < 1e-15);
        assert!((w1 - 0.2548).abs() < 1e-4);
        let t = LocationClassTable::default();
        let ws: Vec<f64> = t.classes.iter().map(|&(lo, hi)| imv_class_weight(lo, hi, 0.1)).collect();
        assert!(ws.windows(2).all(|w| w[0] < w[1]));
        assert!((rank_imv(&[vec![2, 0, 0, 0, 0, 0]], &t, 0.1)[0] - 0.5095).abs() < 1e-4);
    }

    #[test]
    fn temporal_beta_at_t0() {
        let b = temporal_beta(1800.0, 0.1, 1800.0);
        assert!((b - 0.1 * 1.6 * (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((b / 0.1 - 1.011).abs() < 1e-3);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency(10.0, 10.0).unwrap(), 0.0);
        assert_eq!(efficiency(10.0, 0.0).unwrap(), 100.0);
        assert!((efficiency(653.0, 139.0).unwrap() - 78.71).abs() < 0.01);
        assert!(efficiency(0.0, 1.0).is_err());
    }

    #[test]
    fn mass_plan_edge_cases() {
        let st = vec![Status::Susceptible; 10];
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let none = plan_mass_vaccination(&st, &Ranking::Random, 0.0, 1.0, &mut r).unwrap();
        assert!(none.vaccinated.is_empty());
        let all = plan_mass_vaccination(&st, &Ranking::Random, 1.0, 1.0, &mut r).unwrap();
        assert_eq!(all.vaccinated.len(), 10);
        let short = plan_mass_vaccination(&st, &Ranking::Random, 0.8, 0.5, &mut r).unwrap();
        assert_eq!((short.vaccinated.len(), short.shortfall), (5, 3));
        assert!(plan_mass_vaccination(&st, &Ranking::Random, 1.5, 0.5, &mut r).is_err());
    }
}
