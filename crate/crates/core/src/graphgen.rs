//! Activity-driven generator for networks with direct and indirect links.
//!
//! Every node alternates between active periods (a stay at some location,
//! geometric with parameter `rho`) and waiting periods (geometric with `q`).
//! Each active period is an *active copy* of the node that creates `d` links.
//! A link to a neighbour starts `t_c` steps after the host arrives, which may
//! be after the host has left but within `delta` steps of leaving, and lasts
//! `t_d` steps.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Link, Network, NetworkError, NodeId, DAY};
use crate::rng::{self, purpose, StreamRng};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("at least two nodes are required, got {0}")]
    TooFewNodes(u32),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeMode {
    /// Every node uses the same `lambda`.
    Homogeneous { lambda: f64 },
    /// Per-node `lambda_i` drawn from a power law with exponent `alpha` on
    /// `[xi, psi]`.
    Heterogeneous { alpha: f64, xi: f64, psi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphGenParams {
    pub n: u32,
    pub t_days: u32,
    pub dt_s: u64,
    pub rho: f64,
    pub q: f64,
    pub degree: DegreeMode,
    pub p_c: f64,
    pub p_b: f64,
    pub delta_steps: u64,
    pub eta: f64,
    pub mu: f64,
}

impl Default for GraphGenParams {
    fn default() -> Self {
        GraphGenParams {
            n: 10_000,
            t_days: 14,
            dt_s: 300,
            rho: 0.085,
            q: 0.0048,
            degree: DegreeMode::Homogeneous { lambda: 0.32 },
            p_c: 0.02,
            p_b: 0.085,
            delta_steps: 36,
            eta: 0.1,
            mu: 0.4,
        }
    }
}

impl GraphGenParams {
    pub fn heterogeneous() -> Self {
        GraphGenParams {
            degree: DegreeMode::Heterogeneous { alpha: 2.963, xi: 0.26, psi: 0.999 },
            ..Default::default()
        }
    }

    pub fn steps_per_day(&self) -> u64 {
        DAY / self.dt_s
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Invalid(m.to_string()));
        if self.n < 2 {
            return Err(GenError::TooFewNodes(self.n));
        }
        if self.dt_s == 0 || !DAY.is_multiple_of(self.dt_s) {
            return bad("dt_s must divide one day");
        }
        for (name, p) in [("rho", self.rho), ("q", self.q), ("p_c", self.p_c), ("p_b", self.p_b)] {
            if !(p > 0.0 && p <= 1.0) {
                return bad(&format!("{name} must lie in (0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad("mu must lie in [0, 1]");
        }
        if !(self.eta >= 0.0) {
            return bad("eta must be non-negative");
        }
        match self.degree {
            DegreeMode::Homogeneous { lambda } if !(0.0..1.0).contains(&lambda) => {
                bad("lambda must lie in [0, 1)")
            }
            DegreeMode::Heterogeneous { alpha, xi, psi }
                if !(alpha > 0.0 && xi > 0.0 && xi < psi && psi < 1.0) =>
            {
                bad("power law needs alpha > 0 and 0 < xi < psi < 1")
            }
            _ => Ok(()),
        }
    }
}

/// Geometric on `{1, 2, ...}` with success probability `p`.
pub fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    // 1 - U lies in (0, 1], so the log is finite.
    let u = 1.0 - rng.random::<f64>();
    1 + (u.ln() / (-p).ln_1p()).floor() as u64
}

pub fn sample_active_period<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> u64 {
    sample_geometric(rho, rng)
}

pub fn sample_waiting_period<R: Rng + ?Sized>(q: f64, rng: &mut R) -> u64 {
    sample_geometric(q, rng)
}

pub fn sample_link_duration<R: Rng + ?Sized>(p_b: f64, rng: &mut R) -> u64 {
    sample_geometric(p_b, rng)
}

/// Stationary state of the two-state chain: `true` (active) with probability
/// `q / (q + rho)`.
pub fn initial_state<R: Rng + ?Sized>(rho: f64, q: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < q / (q + rho)
}

/// `Pr(d = k) = (1 - lambda) lambda^{k-1}`.
pub fn sample_activation_degree<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 1;
    }
    sample_geometric(1.0 - lambda, rng)
}

/// Inverse-CDF draw from `alpha l^{-(alpha+1)}` restricted to `[xi, psi]`.
pub fn sample_powerlaw_lambda<R: Rng + ?Sized>(alpha: f64, xi: f64, psi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let (a, b) = (xi.powf(-alpha), psi.powf(-alpha));
    (a - u * (a - b)).powf(-1.0 / alpha).clamp(xi, psi)
}

/// Link creation delay on `{0, .., t_a + delta - 1}` with
/// `Pr(t) ∝ p_c (1 - p_c)^t`, by inverse CDF.
pub fn sample_link_delay<R: Rng + ?Sized>(p_c: f64, t_a: u64, delta_steps: u64, rng: &mut R) -> u64 {
    let k = t_a + delta_steps;
    if k <= 1 || p_c >= 1.0 {
        return 0;
    }
    let ln_q = (-p_c).ln_1p();
    let mass = -(k as f64 * ln_q).exp_m1();
    let u: f64 = rng.random();
    let t = ((-u * mass).ln_1p() / ln_q).floor();
    (t.max(0.0) as u64).min(k - 1)
}

/// Mutable generator state shared by all nodes.
pub struct GenState {
    /// Previously contacted nodes, in order of first contact.
    pub contacts: Vec<Vec<NodeId>>,
    member: Vec<HashSet<NodeId>>,
    weights: Option<(WeightedAliasIndex<f64>, Vec<f64>)>,
    n: u32,
}

impl GenState {
    pub fn new(n: u32, lambdas: Option<&[f64]>) -> Self {
        GenState {
            contacts: vec![Vec::new(); n as usize],
            member: vec![HashSet::new(); n as usize],
            weights: lambdas.map(|l| {
                (WeightedAliasIndex::new(l.to_vec()).expect("positive weights"), l.to_vec())
            }),
            n,
        }
    }

    pub fn knows(&self, host: NodeId, other: NodeId) -> bool {
        self.member[host as usize].contains(&other)
    }

    fn add_contact(&mut self, host: NodeId, other: NodeId) {
        if self.member[host as usize].insert(other) {
            self.contacts[host as usize].push(other);
        }
    }

    /// Neighbours of neighbours of `host` that `host` has not met yet.
    pub fn two_hop(&self, host: NodeId) -> Vec<NodeId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &c in &self.contacts[host as usize] {
            for &w in &self.contacts[c as usize] {
                if w != host && !self.knows(host, w) && seen.insert(w) {
                    out.push(w);
                }
            }
        }
        out
    }

    /// A never-contacted node other than `host`, uniform or weighted by
    /// `lambda`. `None` if `host` already knows everyone.
    fn population_draw<R: Rng + ?Sized>(&self, host: NodeId, rng: &mut R) -> Option<NodeId> {
        let known = self.contacts[host as usize].len() as u32;
        if known + 1 >= self.n {
            return None;
        }
        let ok = |v: NodeId| v != host && !self.knows(host, v);
        for _ in 0..64 {
            let v = match &self.weights {
                Some((w, _)) => w.sample(rng) as NodeId,
                None => rng.random_range(0..self.n),
            };
            if ok(v) {
                return Some(v);
            }
        }
        // Nearly saturated contact set: draw from the explicit remainder.
        let rest: Vec<NodeId> = (0..self.n).filter(|&v| ok(v)).collect();
        match &self.weights {
            Some((_, lambdas)) => {
                let ws: Vec<f64> = rest.iter().map(|&v| lambdas[v as usize]).collect();
                let d = WeightedAliasIndex::new(ws).ok()?;
                Some(rest[d.sample(rng)])
            }
            None => Some(rest[rng.random_range(0..rest.len())]),
        }
    }
}

/// Picks the next neighbour of `host` within one activation.
///
/// With probability `n_t / (n_t + eta)` a known contact not yet used in this
/// activation is repeated. Otherwise, or if every contact was used, a new node
/// is chosen: with probability `mu` among neighbours of neighbours, else from
/// the whole population. New nodes join the contact set. `None` when no
/// eligible node remains.
pub fn select_neighbor<R: Rng + ?Sized>(
    state: &mut GenState,
    host: NodeId,
    used: &[NodeId],
    eta: f64,
    mu: f64,
    rng: &mut R,
) -> Option<NodeId> {
    let nt = state.contacts[host as usize].len() as f64;
    if nt > 0.0 && rng.random::<f64>() < nt / (nt + eta) {
        let unused: Vec<NodeId> =
            state.contacts[host as usize].iter().copied().filter(|c| !used.contains(c)).collect();
        if !unused.is_empty() {
            return Some(unused[rng.random_range(0..unused.len())]);
        }
    }
    let mut pick = None;
    if rng.random::<f64>() < mu {
        let cands = state.two_hop(host);
        if !cands.is_empty() {
            pick = Some(cands[rng.random_range(0..cands.len())]);
        }
    }
    if pick.is_none() {
        pick = state.population_draw(host, rng);
    }
    if let Some(v) = pick {
        state.add_contact(host, v);
    }
    pick
}

/// One stay of a node: steps `[start, start + t_a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveCopy {
    pub node: NodeId,
    pub start: u64,
    pub t_a: u64,
}

/// Alternating active/waiting timeline of one node over `steps` steps.
pub fn node_timeline<R: Rng + ?Sized>(node: NodeId, rho: f64, q: f64, steps: u64, rng: &mut R) -> Vec<ActiveCopy> {
    let mut out = Vec::new();
    let mut t = 0u64;
    let mut active = initial_state(rho, q, rng);
    while t < steps {
        if active {
            let t_a = sample_active_period(rho, rng);
            out.push(ActiveCopy { node, start: t, t_a });
            t += t_a;
        } else {
            t += sample_waiting_period(q, rng);
        }
        active = !active;
    }
    out
}

/// Draws per-node `lambda_i` (all equal in homogeneous mode).
pub fn draw_lambdas(params: &GraphGenParams, seed: u64) -> Vec<f64> {
    match params.degree {
        DegreeMode::Homogeneous { lambda } => vec![lambda; params.n as usize],
        DegreeMode::Heterogeneous { alpha, xi, psi } => {
            let mut r = rng::stream(seed, 0, 0, purpose::LAMBDA);
            (0..params.n).map(|_| sample_powerlaw_lambda(alpha, xi, psi, &mut r)).collect()
        }
    }
}

/// Builds a network from `(params, seed)`; bit-identical for equal inputs.
pub fn generate_network(params: &GraphGenParams, seed: u64) -> Result<Network, GenError> {
    params.validate()?;
    let lambdas = draw_lambdas(params, seed);
    let steps = params.t_days as u64 * params.steps_per_day();
    let dt = params.dt_s;
    let t_end = steps * dt;

    let mut copies: Vec<ActiveCopy> = (0..params.n)
        .into_par_iter()
        .flat_map_iter(|v| {
            let mut r = rng::stream(seed, v as u64, 0, purpose::TIMELINE);
            node_timeline(v, params.rho, params.q, steps, &mut r)
        })
        .collect();
    copies.sort_by_key(|c| (c.start, c.node));

    let weighted = matches!(params.degree, DegreeMode::Heterogeneous { .. });
    let mut state = GenState::new(params.n, weighted.then_some(&lambdas[..]));
    let mut r: StreamRng = rng::stream(seed, 0, 0, purpose::NEIGHBOURS);
    let mut links = Vec::new();
    let mut used = Vec::new();
    for c in &copies {
        let d = sample_activation_degree(lambdas[c.node as usize], &mut r);
        let ts = c.start * dt;
        let tl = ((c.start + c.t_a) * dt).min(t_end);
        used.clear();
        for _ in 0..d {
            let Some(v) = select_neighbor(&mut state, c.node, &used, params.eta, params.mu, &mut r)
            else {
                break;
            };
            used.push(v);
            let t_c = sample_link_delay(params.p_c, c.t_a, params.delta_steps, &mut r);
            let t_d = sample_link_duration(params.p_b, &mut r);
            let ts2 = ts + t_c * dt;
            if ts2 >= t_end {
                continue;
            }
            let tl2 = (ts2 + t_d * dt).min(t_end);
            links.push(Link::new(c.node, v, ts, tl, ts2, tl2));
        }
    }
    Ok(Network::new("generated", params.n, params.t_days, params.delta_steps * dt, dt, links)?)
}

/// Activity-driven baseline without memory or indirect links.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdnActivity {
    Homogeneous { phi: f64 },
    PowerLaw { lo: f64, hi: f64, exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdnParams {
    pub n: u32,
    pub t_days: u32,
    pub dt_s: u64,
    pub m: u32,
    pub activity: AdnActivity,
}

impl Default for AdnParams {
    fn default() -> Self {
        AdnParams {
            n: 10_000,
            t_days: 14,
            dt_s: 3000,
            m: 3,
            activity: AdnActivity::PowerLaw { lo: 0.02, hi: 0.18, exponent: 2.95 },
        }
    }
}

/// Each step every node activates with its probability `phi_i` and links to
/// `m` distinct uniformly chosen others for that one step.
pub fn generate_adn_baseline(params: &AdnParams, seed: u64) -> Result<Network, GenError> {
    if params.n < 2 {
        return Err(GenError::TooFewNodes(params.n));
    }
    if params.m >= params.n {
        return Err(GenError::Invalid("m must be below n".into()));
    }
    let mut r = rng::stream(seed, 0, 0, purpose::LAMBDA);
    let phi: Vec<f64> = match params.activity {
        AdnActivity::Homogeneous { phi } => vec![phi; params.n as usize],
        AdnActivity::PowerLaw { lo, hi, exponent } => (0..params.n)
            .map(|_| sample_powerlaw_lambda(exponent - 1.0, lo, hi, &mut r))
            .collect(),
    };
    let dt = params.dt_s;
    let steps = params.t_days as u64 * DAY / dt;
    let mut r = rng::stream(seed, 0, 0, purpose::NEIGHBOURS);
    let mut links = Vec::new();
    for s in 0..steps {
        let t = s * dt;
        for v in 0..params.n {
            if r.random::<f64>() >= phi[v as usize] {
                continue;
            }
            // m distinct others: sample from n-1 slots and skip over v.
            for k in index::sample(&mut r, params.n as usize - 1, params.m as usize) {
                let mut u = k as NodeId;
                if u >= v {
                    u += 1;
                }
                links.push(Link::new(v, u, t, t + dt, t, t + dt));
            }
        }
    }
    Ok(Network::new("adn", params.n, params.t_days, 0, dt, links)?)
}
