//! Daily-stepped stochastic SIR over a link network.
//!
//! On day `t` every susceptible node sums the doses of all links it receives
//! that day from currently infectious hosts and is infected with probability
//! `1 - e^{-sigma E}`. Nodes infected on day `t` start transmitting on day
//! `t + 1` and stay infectious for `tau` days.
//!
//! Randomness is keyed per `(replicate seed, day, node)`, so two runs on
//! networks that differ only in some links draw the same numbers for every
//! node whose decision exists in both.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exposure::{infection_probability, link_exposure, DecayConfig, ExposureParams};
use crate::network::{LinkKind, Network, NodeId};
use crate::rng::{self, purpose};

#[derive(Debug, Error, PartialEq)]
pub enum EpidemicError {
    #[error("{requested} seeds requested from {nodes} nodes")]
    TooManySeeds { requested: usize, nodes: u32 },
    #[error("seed node {0} does not exist")]
    UnknownSeed(NodeId),
    #[error("invalid infectious period [{0}, {1}]")]
    BadTau(u32, u32),
    #[error("replicates must be at least one")]
    NoReplicates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    pub exposure: ExposureParams,
    pub decay: DecayConfig,
    /// Infectious period in days, uniform on `[tau_min, tau_max]`.
    pub tau_min: u32,
    pub tau_max: u32,
    /// Fixed infectious period for seeds, if set.
    pub seed_tau: Option<u32>,
}

impl Default for DiseaseParams {
    fn default() -> Self {
        DiseaseParams {
            exposure: ExposureParams::default(),
            decay: DecayConfig::default(),
            tau_min: 3,
            tau_max: 5,
            seed_tau: None,
        }
    }
}

impl DiseaseParams {
    pub fn tau_mean(&self) -> f64 {
        0.5 * (self.tau_min + self.tau_max) as f64
    }

    fn validate(&self) -> Result<(), EpidemicError> {
        if self.tau_min < 1 || self.tau_min > self.tau_max {
            return Err(EpidemicError::BadTau(self.tau_min, self.tau_max));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedSelection {
    Explicit(Vec<NodeId>),
    Random(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Susceptible,
    /// Infectious through the end of day `recovers_on`.
    Infectious { recovers_on: u32 },
    Recovered,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyMetrics {
    pub day: u32,
    /// New infections during the day (I_n).
    pub new_infections: u64,
    /// Infectious nodes at the end of the day (I_p).
    pub prevalence: u64,
    /// Seeds plus all infections so far (I_a).
    pub cumulative: u64,
    pub susceptible: u64,
    /// Recovered, including vaccinated nodes.
    pub recovered: u64,
    pub vaccinated: u64,
}

/// Post-outbreak ring vaccination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RingMode {
    /// A candidate is vaccinated iff flagged (e.g. within the top ranks).
    Eligible(Vec<bool>),
    /// Each candidate is vaccinated with this probability.
    Random(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingConfig {
    pub mode: RingMode,
    /// Probability that an infectious node is detected.
    pub f_detect: f64,
    /// First day on which detection happens.
    pub deploy_day: u32,
    /// Contacts known for each node.
    pub neighbors: Vec<Vec<NodeId>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    /// Moved to recovered before day 0 (if still susceptible).
    pub pre_vaccinated: Vec<NodeId>,
    pub ring: Option<RingConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub disease: DiseaseParams,
    pub seeds: SeedSelection,
    pub horizon_days: u32,
    pub intervention: Intervention,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub seed: u64,
    pub seeds: Vec<NodeId>,
    pub daily: Vec<DailyMetrics>,
    /// Cumulative infections at the horizon, seeds included.
    pub outbreak_size: u64,
    pub vaccinated: u64,
}

impl SimulationRun {
    /// Infections caused during the run, seeds excluded.
    pub fn new_infections(&self) -> u64 {
        self.outbreak_size - self.seeds.len() as u64
    }
}

/// Mutable per-run state.
#[derive(Clone, Debug)]
pub struct EpiState {
    pub status: Vec<Status>,
    pub cumulative: u64,
    pub vaccinated: u64,
    ring_done: Vec<bool>,
    pending: Vec<NodeId>,
}

impl EpiState {
    pub fn new(n: u32) -> Self {
        EpiState {
            status: vec![Status::Susceptible; n as usize],
            cumulative: 0,
            vaccinated: 0,
            ring_done: Vec::new(),
            pending: Vec::new(),
        }
    }

    pub fn counts(&self) -> (u64, u64, u64) {
        let mut c = (0, 0, 0);
        for s in &self.status {
            match s {
                Status::Susceptible => c.0 += 1,
                Status::Infectious { .. } => c.1 += 1,
                Status::Recovered => c.2 += 1,
            }
        }
        c
    }
}

/// Read-only network view prepared for simulation.
pub struct Simulator<'a> {
    net: &'a Network,
    /// Per day: link indices ordered by (neighbour, host, link order).
    incoming: Vec<Vec<u32>>,
}

fn uniform_tau<R: Rng>(p: &DiseaseParams, r: &mut R) -> u32 {
    r.random_range(p.tau_min..=p.tau_max)
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a Network) -> Self {
        let days = net.links().last().map_or(0, |l| l.day() as usize + 1);
        let mut incoming: Vec<Vec<u32>> = vec![Vec::new(); days];
        for (i, l) in net.links().iter().enumerate() {
            incoming[l.day() as usize].push(i as u32);
        }
        let links = net.links();
        for day in &mut incoming {
            day.sort_by_key(|&i| (links[i as usize].neighbor, links[i as usize].host, i));
        }
        Simulator { net, incoming }
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn select_seeds(&self, sel: &SeedSelection, seed: u64) -> Result<Vec<NodeId>, EpidemicError> {
        let n = self.net.node_count;
        let mut s = match sel {
            SeedSelection::Explicit(v) => {
                if let Some(&bad) = v.iter().find(|&&x| x >= n) {
                    return Err(EpidemicError::UnknownSeed(bad));
                }
                v.clone()
            }
            SeedSelection::Random(k) => {
                if *k > n as usize {
                    return Err(EpidemicError::TooManySeeds { requested: *k, nodes: n });
                }
                let mut r = rng::stream(seed, 0, 0, purpose::SEEDS);
                index::sample(&mut r, n as usize, *k).into_iter().map(|x| x as NodeId).collect()
            }
        };
        s.sort_unstable();
        s.dedup();
        Ok(s)
    }

    /// Fresh state with seeds infectious from day 0 and pre-vaccination applied.
    pub fn initial_state(&self, cfg: &SimConfig, seeds: &[NodeId], seed: u64) -> EpiState {
        let mut st = EpiState::new(self.net.node_count);
        for &v in seeds {
            let tau = cfg.disease.seed_tau.unwrap_or_else(|| {
                uniform_tau(&cfg.disease, &mut rng::stream(seed, 0, v as u64, purpose::SEED_TAU))
            });
            st.status[v as usize] = Status::Infectious { recovers_on: tau.max(1) - 1 };
        }
        st.cumulative = seeds.len() as u64;
        for &v in &cfg.intervention.pre_vaccinated {
            if st.status[v as usize] == Status::Susceptible {
                st.status[v as usize] = Status::Recovered;
                st.vaccinated += 1;
            }
        }
        if cfg.intervention.ring.is_some() {
            st.ring_done = vec![false; self.net.node_count as usize];
        }
        st
    }

    /// Infection draws for one susceptible node on `day`.
    fn infected_today(
        &self,
        status: &[Status],
        target: NodeId,
        group: &[u32],
        disease: &DiseaseParams,
        day: u32,
        seed: u64,
    ) -> bool {
        let links = self.net.links();
        let mut r = None;
        let mut u0 = 0.0;
        let mut e = 0.0;
        for &i in group {
            let l = &links[i as usize];
            if !matches!(status[l.host as usize], Status::Infectious { .. }) {
                continue;
            }
            let r = r.get_or_insert_with(|| {
                let mut s = rng::stream(seed, day as u64, target as u64, purpose::INFECTION);
                u0 = s.random::<f64>();
                s
            });
            let b = disease.decay.rate(r.random::<f64>());
            e += link_exposure(l, &disease.exposure, b);
        }
        if r.is_none() {
            return false;
        }
        let p = infection_probability(e, disease.exposure.sigma).unwrap_or(0.0);
        u0 < p
    }

    /// Advances `st` by one day and returns that day's metrics.
    pub fn step_day(&self, st: &mut EpiState, cfg: &SimConfig, day: u32, seed: u64) -> DailyMetrics {
        if let Some(ring) = &cfg.intervention.ring {
            if day >= ring.deploy_day {
                self.ring_detect(st, ring, seed);
            }
        }

        let links = self.net.links();
        let mut newly: Vec<NodeId> = Vec::new();
        if let Some(today) = self.incoming.get(day as usize) {
            let mut start = 0;
            while start < today.len() {
                let target = links[today[start] as usize].neighbor;
                let mut end = start + 1;
                while end < today.len() && links[today[end] as usize].neighbor == target {
                    end += 1;
                }
                if st.status[target as usize] == Status::Susceptible
                    && self.infected_today(&st.status, target, &today[start..end], &cfg.disease, day, seed)
                {
                    newly.push(target);
                }
                start = end;
            }
        }

        for s in st.status.iter_mut() {
            if let Status::Infectious { recovers_on } = *s {
                if recovers_on <= day {
                    *s = Status::Recovered;
                }
            }
        }
        for &v in &newly {
            let tau = uniform_tau(&cfg.disease, &mut rng::stream(seed, day as u64, v as u64, purpose::TAU));
            st.status[v as usize] = Status::Infectious { recovers_on: day + tau };
        }
        for v in std::mem::take(&mut st.pending) {
            if st.status[v as usize] == Status::Susceptible {
                st.status[v as usize] = Status::Recovered;
                st.vaccinated += 1;
            }
        }
        st.cumulative += newly.len() as u64;
        let (s, i, r) = st.counts();
        DailyMetrics {
            day,
            new_infections: newly.len() as u64,
            prevalence: i,
            cumulative: st.cumulative,
            susceptible: s,
            recovered: r,
            vaccinated: st.vaccinated,
        }
    }

    /// Detects infectious nodes not yet examined and queues their susceptible
    /// contacts for vaccination at the end of the day.
    fn ring_detect(&self, st: &mut EpiState, ring: &RingConfig, seed: u64) {
        for v in 0..st.status.len() {
            if st.ring_done[v] || !matches!(st.status[v], Status::Infectious { .. }) {
                continue;
            }
            st.ring_done[v] = true;
            let detected = rng::stream(seed, v as u64, 0, purpose::DETECT).random::<f64>() < ring.f_detect;
            if !detected {
                continue;
            }
            for &c in ring.neighbors.get(v).map_or(&[][..], |x| &x[..]) {
                if st.status[c as usize] != Status::Susceptible {
                    continue;
                }
                let take = match &ring.mode {
                    RingMode::Eligible(flags) => flags.get(c as usize).copied().unwrap_or(false),
                    RingMode::Random(p) => {
                        rng::stream(seed, c as u64, 0, purpose::RING).random::<f64>() < *p
                    }
                };
                if take && !st.pending.contains(&c) {
                    st.pending.push(c);
                }
            }
        }
    }

    /// Full run from the replicate seed.
    pub fn run(&self, cfg: &SimConfig, seed: u64) -> Result<SimulationRun, EpidemicError> {
        cfg.disease.validate()?;
        let seeds = self.select_seeds(&cfg.seeds, seed)?;
        let mut st = self.initial_state(cfg, &seeds, seed);
        let daily: Vec<DailyMetrics> =
            (0..cfg.horizon_days).map(|d| self.step_day(&mut st, cfg, d, seed)).collect();
        Ok(SimulationRun {
            seed,
            outbreak_size: st.cumulative,
            seeds,
            daily,
            vaccinated: st.vaccinated,
        })
    }
}

pub fn run_simulation(net: &Network, cfg: &SimConfig, seed: u64) -> Result<SimulationRun, EpidemicError> {
    Simulator::new(net).run(cfg, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub runs: Vec<SimulationRun>,
    /// Mean of each daily metric across replicates: (I_n, I_p, I_a).
    pub mean_daily: Vec<(f64, f64, f64)>,
    pub mean_outbreak: f64,
    /// 5%, 50% and 95% outbreak-size quantiles.
    pub quantiles: [f64; 3],
}

impl MonteCarlo {
    pub fn outbreak_sizes(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.outbreak_size).collect()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Replicate `i` uses seed `base_seed + i`; replicates run in parallel on the
/// current rayon pool and are returned in index order.
pub fn monte_carlo(
    sim: &Simulator,
    cfg: &SimConfig,
    replicates: usize,
    base_seed: u64,
) -> Result<MonteCarlo, EpidemicError> {
    if replicates == 0 {
        return Err(EpidemicError::NoReplicates);
    }
    let runs: Vec<SimulationRun> = (0..replicates)
        .into_par_iter()
        .map(|i| sim.run(cfg, base_seed.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;
    let days = cfg.horizon_days as usize;
    let n = replicates as f64;
    let mut mean_daily = vec![(0.0, 0.0, 0.0); days];
    for r in &runs {
        for (m, d) in mean_daily.iter_mut().zip(&r.daily) {
            m.0 += d.new_infections as f64;
            m.1 += d.prevalence as f64;
            m.2 += d.cumulative as f64;
        }
    }
    for m in &mut mean_daily {
        *m = (m.0 / n, m.1 / n, m.2 / n);
    }
    let mut sizes: Vec<f64> = runs.iter().map(|r| r.outbreak_size as f64).collect();
    let mean_outbreak = sizes.iter().sum::<f64>() / n;
    sizes.sort_by(f64::total_cmp);
    let quantiles = [quantile(&sizes, 0.05), quantile(&sizes, 0.5), quantile(&sizes, 0.95)];
    Ok(MonteCarlo { runs, mean_daily, mean_outbreak, quantiles })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproductionRate {
    /// `R(t)` for `t = 0 .. len - delta`; `None` where prevalence is zero.
    pub series: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

/// `R(t) = 1 + (tau / delta) ln(I_p(t + delta) / I_p(t))`.
pub fn reproduction_rate(prevalence: &[u64], tau_mean: f64, delta_days: usize) -> ReproductionRate {
    let delta = delta_days.max(1);
    let series: Vec<Option<f64>> = (0..prevalence.len().saturating_sub(delta))
        .map(|t| {
            let (a, b) = (prevalence[t], prevalence[t + delta]);
            (a > 0 && b > 0).then(|| 1.0 + tau_mean / delta as f64 * (b as f64 / a as f64).ln())
        })
        .collect();
    let defined: Vec<f64> = series.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    ReproductionRate { series, mean }
}

/// Nodes that originate at least one link in the first `window_days` days and
/// whose every such link is IndirectOnly.
pub fn identify_hidden_spreaders(net: &Network, window_days: u32) -> Vec<NodeId> {
    let n = net.node_count as usize;
    let mut any = vec![false; n];
    let mut direct = vec![false; n];
    for l in net.window(window_days as u64) {
        any[l.host as usize] = true;
        if l.kind() != LinkKind::IndirectOnly {
            direct[l.host as usize] = true;
        }
    }
    (0..n).filter(|&v| any[v] && !direct[v]).map(|v| v as NodeId).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeClasses {
    /// 1 to 2 distinct direct neighbours.
    pub low: Vec<NodeId>,
    /// 3 to 10.
    pub average: Vec<NodeId>,
    /// 11 to 20.
    pub high: Vec<NodeId>,
    /// More than 20.
    pub hub: Vec<NodeId>,
    /// No direct neighbour at all.
    pub none: Vec<NodeId>,
}

/// Buckets nodes by distinct neighbours reached through links with a direct
/// component that they originate in the window.
pub fn classify_nodes(net: &Network, window_days: u32) -> NodeClasses {
    let n = net.node_count as usize;
    let mut nb: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for l in net.window(window_days as u64) {
        if l.kind() != LinkKind::IndirectOnly {
            nb[l.host as usize].push(l.neighbor);
        }
    }
    let mut out = NodeClasses::default();
    for (v, list) in nb.iter_mut().enumerate() {
        list.sort_unstable();
        list.dedup();
        let bucket = match list.len() {
            0 => &mut out.none,
            1..=2 => &mut out.low,
            3..=10 => &mut out.average,
            11..=20 => &mut out.high,
            _ => &mut out.hub,
        };
        bucket.push(v as NodeId);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Link, DAY};

    fn cfg(seeds: SeedSelection, days: u32) -> SimConfig {
        SimConfig { disease: DiseaseParams::default(), seeds, horizon_days: days, intervention: Intervention::default() }
    }

    fn certain() -> DiseaseParams {
        // sigma large enough that any positive exposure infects
        DiseaseParams { exposure: ExposureParams { sigma: 1e6, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn zero_seeds_all_zero() {
        let net = Network::new("t", 3, 2, 10_800, 300, vec![Link::new(0, 1, 0, 3600, 0, 3600)]).unwrap();
        let run = run_simulation(&net, &cfg(SeedSelection::Random(0), 2), 1).unwrap();
        assert_eq!(run.outbreak_size, 0);
        assert!(run.daily.iter().all(|d| d.new_infections == 0 && d.prevalence == 0));
    }

    #[test]
    fn disconnected_net_decays() {
        let net = Network::empty("t", 1000, 10);
        let run = run_simulation(&net, &cfg(SeedSelection::Random(500), 10), 3).unwrap();
        assert_eq!(run.new_infections(), 0);
        assert_eq!(run.daily[4].prevalence, 0);
        assert!(run.daily[1].prevalence > 0);
    }

    #[test]
    fn certain_infection_next_day() {
        let net = Network::new("t", 3, 3, 10_800, 300, vec![
            Link::new(0, 1, 0, 3600, 0, 3600),
            Link::new(1, 2, DAY, DAY + 3600, DAY, DAY + 3600),
        ])
        .unwrap();
        let mut c = cfg(SeedSelection::Explicit(vec![0]), 3);
        c.disease = certain();
        let run = run_simulation(&net, &c, 9).unwrap();
        assert_eq!(run.daily[0].new_infections, 1);
        assert_eq!(run.daily[1].new_infections, 1);
        assert_eq!(run.outbreak_size, 3);
    }

    #[test]
    fn same_day_chain_does_not_propagate() {
        // 1 is infected on day 0 and cannot pass it on the same day.
        let net = Network::new("t", 3, 1, 10_800, 300, vec![
            Link::new(0, 1, 0, 3600, 0, 3600),
            Link::new(1, 2, 7200, 9000, 7200, 9000),
        ])
        .unwrap();
        let mut c = cfg(SeedSelection::Explicit(vec![0]), 1);
        c.disease = certain();
        let run = run_simulation(&net, &c, 9).unwrap();
        assert_eq!(run.outbreak_size, 2);
    }

    #[test]
    fn too_many_seeds() {
        let net = Network::empty("t", 5, 1);
        assert!(matches!(
            run_simulation(&net, &cfg(SeedSelection::Random(6), 1), 0),
            Err(EpidemicError::TooManySeeds { .. })
        ));
    }

    #[test]
    fn reproduction_examples() {
        let r = reproduction_rate(&[5, 5, 5], 4.0, 1);
        assert_eq!(r.series, vec![Some(1.0), Some(1.0)]);
        let r = reproduction_rate(&[1, 2, 4], 4.0, 1);
        assert!((r.mean.unwrap() - (1.0 + 4.0 * 2f64.ln())).abs() < 1e-12);
        let r = reproduction_rate(&[4, 2], 4.0, 1);
        assert!((r.series[0].unwrap() + 1.7726).abs() < 1e-4);
        let r = reproduction_rate(&[0, 0, 0], 4.0, 1);
        assert_eq!(r.mean, None);
    }

    #[test]
    fn hidden_and_classes() {
        let mut links = vec![
            Link::new(0, 1, 0, 100, 10, 150),
            Link::new(2, 3, 0, 100, 120, 200),
            Link::new(2, 4, 0, 100, 130, 200),
            Link::new(2, 5, 0, 100, 140, 200),
        ];
        for k in 1..=21 {
            links.push(Link::new(6, 6 + k, 0, 100, 0, 50));
            links.push(Link::new(6, 6 + k, 0, 100, 0, 60));
        }
        let net = Network::new("t", 30, 5, 10_800, 300, links).unwrap();
        assert_eq!(identify_hidden_spreaders(&net, 5), vec![2]);
        let c = classify_nodes(&net, 5);
        assert_eq!(c.low, vec![0]);
        assert_eq!(c.hub, vec![6]);
        assert!(c.none.contains(&2));
    }
}
