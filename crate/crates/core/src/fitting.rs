//! Maximum-likelihood fitting of the generator parameters, and RSE.
//!
//! The power-law exponent of the degree-parameter density is called `alpha`
//! here; the same quantity is often written `beta` in likelihood derivations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, NodeId, DAY};

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("no samples")]
    Empty,
    #[error("sample value {0} is below the support minimum {1}")]
    OutOfSupport(u64, u64),
    #[error("mean activation frequency {mean} is not below z*rho = {bound}")]
    Infeasible { mean: f64, bound: f64 },
    #[error("score has no usable value in the bracket (score({lo}) = {f_lo}, score({hi}) = {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("alternating solve did not converge after {iterations} iterations; trace: {trace:?}")]
    NoConvergence { iterations: usize, trace: Vec<(f64, f64)> },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Neumaier-compensated sum, so results do not depend on summation order
/// beyond the last few ulps.
pub fn ksum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Finds a root of `f` on `[lo, hi]` by bisection.
///
/// Stops when `|f| < ftol` or when the bracket cannot shrink further.
/// Returns `Err` with both endpoint values if `f` does not change sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, ftol: f64) -> Result<f64, FitError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(FitError::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm.abs() < ftol {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// MLE of a geometric law on `{1, 2, ...}`: `m / sum(s)`.
pub fn fit_geometric(samples: &[u64]) -> Result<f64, FitError> {
    if samples.is_empty() {
        return Err(FitError::Empty);
    }
    if let Some(&s) = samples.iter().find(|&&s| s < 1) {
        return Err(FitError::OutOfSupport(s, 1));
    }
    let total: u64 = samples.iter().sum();
    Ok(samples.len() as f64 / total as f64)
}

/// Inactive-to-active probability `q` from daily activation counts.
///
/// The expected number of activations per day of the two-state chain is
/// `z q rho / (q + rho)`, solved here for `q` at the sample mean.
pub fn fit_activation_q(freqs: &[f64], rho: f64, z: f64) -> Result<f64, FitError> {
    if freqs.is_empty() {
        return Err(FitError::Empty);
    }
    let mean = ksum(freqs.iter().copied()) / freqs.len() as f64;
    let bound = z * rho;
    if mean >= bound {
        return Err(FitError::Infeasible { mean, bound });
    }
    Ok(mean * rho / (bound - mean))
}

/// How link delays are tied to active periods in the truncated-geometric fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DelayFitMode {
    /// Each delay's truncation point is unknown and averaged over the whole
    /// set of active periods, counting only periods long enough to contain it.
    #[default]
    Quadrature,
    /// Each delay is paired with the active period of its own activation.
    Paired,
}

/// Probability mass of a link delay `t` for truncation point `k`
/// (support `0..k`).
pub fn truncated_geometric_pmf(p: f64, t: u64, k: u64) -> f64 {
    if t >= k {
        return 0.0;
    }
    let ln_q = (-p).ln_1p();
    p * (t as f64 * ln_q).exp() / -(k as f64 * ln_q).exp_m1()
}

/// MLE of the per-step link-creation probability.
///
/// `delays[i]` is a delay in steps. In paired mode `active_periods[i]` is the
/// active period of the same activation; in quadrature mode `active_periods`
/// is any sample of active periods. The truncation point is
/// `t_a + delta_steps`. When the likelihood is monotone on the bracket the
/// corresponding endpoint is returned.
pub fn fit_truncated_geometric(
    delays: &[u64],
    active_periods: &[u64],
    delta_steps: u64,
    mode: DelayFitMode,
) -> Result<f64, FitError> {
    if delays.is_empty() || active_periods.is_empty() {
        return Err(FitError::Empty);
    }
    if mode == DelayFitMode::Paired && delays.len() != active_periods.len() {
        return Err(FitError::LengthMismatch(delays.len(), active_periods.len()));
    }
    let n = delays.len() as f64;
    let total = ksum(delays.iter().map(|&t| t as f64));

    // Truncation points and their multiplicities.
    let mut k_counts: BTreeMap<u64, f64> = BTreeMap::new();
    for &ta in active_periods {
        *k_counts.entry(ta + delta_steps).or_default() += 1.0;
    }
    let ks: Vec<(u64, f64)> = k_counts.into_iter().collect();
    if let Some(&t) = delays.iter().find(|&&t| t >= ks.last().unwrap().0) {
        return Err(FitError::OutOfSupport(t, ks.last().unwrap().0));
    }

    let score = |p: f64| -> f64 {
        let q = 1.0 - p;
        let ln_q = (-p).ln_1p();
        // For one truncation point K: d/dp ln(1 - q^K)^{-1} = -K q^{K-1} / (1 - q^K).
        let one_minus = |k: u64| -(k as f64 * ln_q).exp_m1();
        let dterm = |k: u64| -(k as f64) * ((k as f64 - 1.0) * ln_q).exp();
        let base = n / p - total / q;
        match mode {
            DelayFitMode::Paired => {
                let corr = ksum(active_periods.iter().map(|&ta| {
                    let k = ta + delta_steps;
                    dterm(k) / one_minus(k)
                }));
                base + corr
            }
            DelayFitMode::Quadrature => {
                // A(t) = sum_{K > t} w_K / (1 - q^K), B(t) = dA/dp, both as
                // suffix sums over the sorted truncation points.
                let mut a_suf = vec![0.0; ks.len() + 1];
                let mut b_suf = vec![0.0; ks.len() + 1];
                for (i, &(k, w)) in ks.iter().enumerate().rev() {
                    let om = one_minus(k);
                    a_suf[i] = a_suf[i + 1] + w / om;
                    b_suf[i] = b_suf[i + 1] + w * dterm(k) / (om * om);
                }
                let corr = ksum(delays.iter().map(|&t| {
                    let i = ks.partition_point(|&(k, _)| k <= t);
                    b_suf[i] / a_suf[i]
                }));
                base + corr
            }
        }
    };

    let (lo, hi) = (1e-6, 1.0 - 1e-6);
    match bisect(score, lo, hi, 1e-8) {
        Ok(p) => Ok(p),
        Err(FitError::NoSignChange { f_lo, f_hi, .. }) if f_lo > 0.0 && f_hi > 0.0 => Ok(hi),
        Err(FitError::NoSignChange { f_lo, f_hi, .. }) if f_lo < 0.0 && f_hi < 0.0 => Ok(lo),
        Err(e) => Err(e),
    }
}

/// `(1 - xi^x) / x`, the integral of `l^{x-1}` over `[xi, 1]`.
fn g(x: f64, ln_xi: f64) -> f64 {
    if x.abs() < 1e-8 {
        -ln_xi - 0.5 * x * ln_xi * ln_xi
    } else {
        -(x * ln_xi).exp_m1() / x
    }
}

/// Derivative of `g` in `x`.
fn g_x(x: f64, ln_xi: f64) -> f64 {
    if x.abs() < 1e-5 {
        -0.5 * ln_xi * ln_xi - x * ln_xi.powi(3) / 3.0
    } else {
        let e = (x * ln_xi).exp();
        (-e * ln_xi * x + (x * ln_xi).exp_m1()) / (x * x)
    }
}

/// Probability of degree `d >= 1` when `lambda` is drawn from the power law
/// `alpha l^{-(alpha+1)} / (xi^{-alpha} - psi^{-alpha})` on `[xi, psi]` and
/// `d` is geometric `(1 - lambda) lambda^{d-1}`.
pub fn mixture_pmf(d: u64, alpha: f64, xi: f64, psi: f64) -> f64 {
    // integral over [xi, psi] of l^{x-1} dl
    let int = |x: f64| {
        if x.abs() < 1e-12 {
            (psi / xi).ln()
        } else {
            (psi.powf(x) - xi.powf(x)) / x
        }
    };
    let d = d as f64;
    alpha / (xi.powf(-alpha) - psi.powf(-alpha)) * (int(d - alpha - 1.0) - int(d - alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub xi: f64,
    pub iterations: usize,
    /// Set when a score had no root in its bracket and the estimate sits on
    /// the bracket boundary (e.g. all degrees equal to one).
    pub at_bound: bool,
}

const XI_BRACKET: (f64, f64) = (1e-4, 0.99);
const ALPHA_BRACKET: (f64, f64) = (1.0001, 20.0);

/// Degree histogram as `(degree, count)` pairs.
fn histogram(degrees: &[u64]) -> Vec<(f64, f64)> {
    let mut h: BTreeMap<u64, f64> = BTreeMap::new();
    for &d in degrees {
        *h.entry(d).or_default() += 1.0;
    }
    h.into_iter().map(|(d, c)| (d as f64, c)).collect()
}

/// Score equations of the mixture likelihood with `psi = 1`:
/// returns `(d/d alpha, d/d xi)` of the log-likelihood.
pub fn powerlaw_scores(degrees: &[u64], alpha: f64, xi: f64) -> (f64, f64) {
    scores_hist(&histogram(degrees), alpha, xi)
}

fn scores_hist(hist: &[(f64, f64)], beta: f64, xi: f64) -> (f64, f64) {
    let n: f64 = hist.iter().map(|&(_, c)| c).sum();
    let ln_xi = xi.ln();
    let xmb = xi.powf(-beta);
    let mut s_beta = n / beta + n * ln_xi * xmb / (xmb - 1.0);
    let mut s_xi = n * beta * xi.powf(-beta - 1.0) / (xmb - 1.0);
    let mut acc_b = Vec::with_capacity(hist.len());
    let mut acc_x = Vec::with_capacity(hist.len());
    for &(d, c) in hist {
        let h = g(d - beta - 1.0, ln_xi) - g(d - beta, ln_xi);
        let dh_db = -g_x(d - beta - 1.0, ln_xi) + g_x(d - beta, ln_xi);
        let dh_dxi = xi.powf(d - beta - 2.0) * (xi - 1.0);
        acc_b.push(c * dh_db / h);
        acc_x.push(c * dh_dxi / h);
    }
    s_beta += ksum(acc_b);
    s_xi += ksum(acc_x);
    (s_beta, s_xi)
}

fn loglik_hist(hist: &[(f64, f64)], beta: f64, xi: f64) -> f64 {
    let ln_xi = xi.ln();
    let norm = (beta / (xi.powf(-beta) - 1.0)).ln();
    ksum(hist.iter().map(|&(d, c)| c * (norm + (g(d - beta - 1.0, ln_xi) - g(d - beta, ln_xi)).ln())))
}

/// Solves one score in one variable, falling back to the better bracket end.
fn solve_1d<F: Fn(f64) -> f64, L: Fn(f64) -> f64>(score: F, ll: L, br: (f64, f64)) -> (f64, bool) {
    match bisect(&score, br.0, br.1, 0.0) {
        Ok(x) => (x, false),
        Err(_) => (if ll(br.0) >= ll(br.1) { br.0 } else { br.1 }, true),
    }
}

/// Alternating MLE of `(alpha, xi)` for activation degrees, with `psi = 1`.
///
/// Starting from `alpha_init`, `xi` is solved with `alpha` fixed, then `alpha`
/// with `xi` fixed, until neither moves by more than `1e-6`.
pub fn fit_powerlaw_degree(degrees: &[u64], alpha_init: f64) -> Result<PowerLawFit, FitError> {
    if degrees.is_empty() {
        return Err(FitError::Empty);
    }
    if let Some(&d) = degrees.iter().find(|&&d| d < 1) {
        return Err(FitError::OutOfSupport(d, 1));
    }
    let hist = histogram(degrees);
    let mut alpha = alpha_init;
    let mut xi = f64::NAN;
    let mut trace = Vec::new();
    let mut at_bound = false;
    for it in 1..=100 {
        let (new_xi, b1) = solve_1d(
            |x| scores_hist(&hist, alpha, x).1,
            |x| loglik_hist(&hist, alpha, x),
            XI_BRACKET,
        );
        let (new_alpha, b2) = solve_1d(
            |a| scores_hist(&hist, a, new_xi).0,
            |a| loglik_hist(&hist, a, new_xi),
            ALPHA_BRACKET,
        );
        at_bound = b1 || b2;
        let moved = (new_xi - xi).abs().max((new_alpha - alpha).abs());
        xi = new_xi;
        alpha = new_alpha;
        trace.push((alpha, xi));
        if moved < 1e-6 {
            return Ok(PowerLawFit { alpha, xi, iterations: it, at_bound });
        }
    }
    if at_bound {
        return Ok(PowerLawFit { alpha, xi, iterations: 100, at_bound });
    }
    Err(FitError::NoConvergence { iterations: 100, trace })
}

/// Root squared error between two equal-length binned distributions.
pub fn rse(observed: &[f64], reference: &[f64]) -> Result<f64, FitError> {
    if observed.len() != reference.len() {
        return Err(FitError::LengthMismatch(observed.len(), reference.len()));
    }
    Ok(ksum(observed.iter().zip(reference).map(|(x, y)| (x - y) * (x - y))).sqrt())
}

/// Unit-width bins `min..=max(samples)`, as proportions.
pub fn empirical_pmf(samples: &[u64], min: u64) -> Vec<f64> {
    let Some(&max) = samples.iter().max() else { return Vec::new() };
    let mut counts = vec![0.0; (max.max(min) - min + 1) as usize];
    for &s in samples {
        if s >= min {
            counts[(s - min) as usize] += 1.0;
        }
    }
    let n = samples.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

/// Co-location interaction samples read off a network.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CipSamples {
    /// Active periods in steps, uncensored activations only.
    pub active_periods: Vec<u64>,
    /// Waiting periods in steps between consecutive activations of a node.
    pub waiting_periods: Vec<u64>,
    /// Activations started per node per day (zeros included).
    pub activation_freqs: Vec<f64>,
    /// Links per activation.
    pub degrees: Vec<u64>,
    /// Link creation delays in steps.
    pub link_delays: Vec<u64>,
    /// Active period of the activation each delay belongs to.
    pub delay_contexts: Vec<u64>,
    /// Link durations in steps, uncensored links only.
    pub link_durations: Vec<u64>,
}

impl CipSamples {
    /// Groups links into activations by `(host, t_s, t_l)`.
    ///
    /// Activations that end at the horizon are censored: their active period,
    /// degree and delays are skipped. Activations whose indirect window runs
    /// past the horizon also lose their degree and delays, since some of their
    /// links may be missing. An activation that starts at time zero is not
    /// counted as a daily activation, because the node may already have been
    /// active before the window opened.
    pub fn from_network(net: &Network) -> Self {
        let dt = net.dt_s.max(1);
        let t_end = net.t_end();
        let mut acts: BTreeMap<(NodeId, u64, u64), Vec<usize>> = BTreeMap::new();
        for (i, l) in net.links().iter().enumerate() {
            acts.entry((l.host, l.host_arrive, l.host_depart)).or_default().push(i);
        }
        let mut out = CipSamples::default();
        let days = net.horizon_days as usize;
        let mut freq = vec![0.0; net.node_count as usize * days];
        let mut last_end: BTreeMap<NodeId, u64> = BTreeMap::new();
        for (&(host, ts, tl), idx) in &acts {
            if let Some(&prev) = last_end.get(&host) {
                if ts > prev {
                    out.waiting_periods.push((ts - prev) / dt);
                }
            }
            last_end.insert(host, tl);
            if ts > 0 && days > 0 {
                let d = ((ts / DAY) as usize).min(days - 1);
                freq[host as usize * days + d] += 1.0;
            }
            for &i in idx {
                let l = &net.links()[i];
                if l.nbr_depart < t_end {
                    out.link_durations.push((l.nbr_depart - l.nbr_arrive) / dt);
                }
            }
            if tl >= t_end {
                continue;
            }
            let ta = (tl - ts) / dt;
            out.active_periods.push(ta);
            if tl + net.delta_s <= t_end {
                out.degrees.push(idx.len() as u64);
                for &i in idx {
                    let l = &net.links()[i];
                    out.link_delays.push((l.nbr_arrive - ts) / dt);
                    out.delay_contexts.push(ta);
                }
            }
        }
        out.activation_freqs = freq;
        out
    }
}

/// Parameters recovered from a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedParams {
    pub rho: f64,
    pub q: f64,
    pub lambda: f64,
    pub p_c: f64,
    pub p_b: f64,
    pub powerlaw: Option<PowerLawFit>,
}

/// Fits every generator parameter from the samples.
pub fn fit_all(
    s: &CipSamples,
    steps_per_day: f64,
    delta_steps: u64,
    mode: DelayFitMode,
    with_powerlaw: bool,
) -> Result<FittedParams, FitError> {
    let rho = fit_geometric(&s.active_periods)?;
    let q = fit_activation_q(&s.activation_freqs, rho, steps_per_day)?;
    let lambda = 1.0 - fit_geometric(&s.degrees)?;
    let contexts = match mode {
        DelayFitMode::Paired => &s.delay_contexts,
        DelayFitMode::Quadrature => &s.active_periods,
    };
    let p_c = fit_truncated_geometric(&s.link_delays, contexts, delta_steps, mode)?;
    let p_b = fit_geometric(&s.link_durations)?;
    let powerlaw = if with_powerlaw { Some(fit_powerlaw_degree(&s.degrees, 2.5)?) } else { None };
    Ok(FittedParams { rho, q, lambda, p_c, p_b, powerlaw })
}
