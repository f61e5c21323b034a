//! Particle concentration, intake dose and dose-response.
//!
//! An infectious host emits `g` PFU/s into a well-mixed volume `V` from which
//! particles are removed at rate `b`. The neighbour inhales at rate `p` while
//! present, so its dose is `p * integral of C(t)` over its stay.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Link, LinkKind};

#[derive(Debug, Error, PartialEq)]
pub enum ExposureError {
    #[error("parameter `{0}` must be strictly positive")]
    NonPositive(&'static str),
    #[error("decay times must satisfy r_min < r_median < r_max, got {0} / {1} / {2}")]
    DecayOrder(f64, f64, f64),
    #[error("time {0} is negative")]
    NegativeTime(f64),
    #[error("exposure {0} is negative")]
    NegativeExposure(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureParams {
    /// Generation rate, PFU/s.
    pub g: f64,
    /// Pulmonary ventilation rate, m^3/s.
    pub p: f64,
    /// Proximity air volume, m^3.
    pub v: f64,
    /// Infectiousness per PFU.
    pub sigma: f64,
}

impl Default for ExposureParams {
    fn default() -> Self {
        ExposureParams { g: 0.304, p: 7.5e-3 / 60.0, v: 2512.0, sigma: 0.33 }
    }
}

impl ExposureParams {
    pub fn new(g: f64, p: f64, v: f64, sigma: f64) -> Result<Self, ExposureError> {
        let s = ExposureParams { g, p, v, sigma };
        s.validate()?;
        Ok(s)
    }

    /// `p_lpm` is in litres per minute.
    pub fn from_lpm(g: f64, p_lpm: f64, v: f64, sigma: f64) -> Result<Self, ExposureError> {
        Self::new(g, p_lpm * 1e-3 / 60.0, v, sigma)
    }

    pub fn validate(&self) -> Result<(), ExposureError> {
        for (name, x) in [("g", self.g), ("p", self.p), ("V", self.v), ("sigma", self.sigma)] {
            if !(x > 0.0) {
                return Err(ExposureError::NonPositive(name));
            }
        }
        Ok(())
    }

    /// Steady-state concentration `g / (b V)`.
    pub fn steady_state(&self, b: f64) -> f64 {
        self.g / (b * self.v)
    }
}

/// Concentration at time `t` for a host present on `[t_s, t_l]`.
pub fn concentration(
    t: f64,
    t_s: f64,
    t_l: f64,
    params: &ExposureParams,
    b: f64,
) -> Result<f64, ExposureError> {
    if t < 0.0 {
        return Err(ExposureError::NegativeTime(t));
    }
    let c_inf = params.steady_state(b);
    Ok(if t <= t_s {
        0.0
    } else if t <= t_l {
        -c_inf * (-b * (t - t_s)).exp_m1()
    } else {
        -c_inf * (-b * (t_l - t_s)).exp_m1() * (-b * (t - t_l)).exp()
    })
}

/// `x - (1 - e^{-x})`, accurate for small `x`.
fn excess(x: f64) -> f64 {
    if x < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0 + x2 * x2 / 720.0)
    } else {
        x + (-x).exp_m1()
    }
}

/// Dose inhaled by the neighbour over one link, in PFU.
///
/// If the neighbour was already there when the host arrived, the host arrival
/// is moved to the neighbour arrival first.
pub fn link_exposure(link: &Link, params: &ExposureParams, b: f64) -> f64 {
    let ts2 = link.nbr_arrive as f64;
    let tl2 = link.nbr_depart as f64;
    let tl = link.host_depart as f64;
    let ts = (link.host_arrive as f64).min(ts2);
    let kind = link.kind();
    let ti = match kind {
        LinkKind::DirectOnly => tl2,
        LinkKind::Mixed => tl,
        LinkKind::IndirectOnly => ts2,
    };
    let scale = params.g * params.p / (params.v * b * b);

    // While the host is present: a = b(t_s' - t_s), c = b(t_i - t_s').
    // b(t_i - t_s') + e^{-b(t_i - t_s)} - e^{-b(t_s' - t_s)}
    //   = c (1 - e^{-a}) + e^{-a} (c - 1 + e^{-c})
    let a = b * (ts2 - ts);
    let c = b * (ti - ts2);
    let direct = c * -(-a).exp_m1() + (-a).exp() * excess(c);

    // After the host has left: (1 - e^{-b(t_l - t_s)}) (e^{-b(t_i - t_l)} - e^{-b(t_l' - t_l)})
    let indirect = if kind == LinkKind::DirectOnly {
        0.0
    } else {
        -(-b * (tl - ts)).exp_m1() * (-b * (ti - tl)).exp() * -(-b * (tl2 - ti)).exp_m1()
    };
    scale * (direct + indirect)
}

/// Dose-response `1 - e^{-sigma E}`.
pub fn infection_probability(exposure: f64, sigma: f64) -> Result<f64, ExposureError> {
    if exposure < 0.0 {
        return Err(ExposureError::NegativeExposure(exposure));
    }
    Ok(-(-sigma * exposure).exp_m1())
}

/// Sampler for the particle decay time `r` (minutes).
///
/// Half the mass is spread uniformly on `[r_min, r_median]` and half on
/// `[r_median, r_max]`, so the median is exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub r_median: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { r_min: 7.5, r_max: 300.0, r_median: 60.0 }
    }
}

impl DecayConfig {
    pub fn new(r_min: f64, r_max: f64, r_median: f64) -> Result<Self, ExposureError> {
        let c = DecayConfig { r_min, r_max, r_median };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ExposureError> {
        if !(self.r_min > 0.0) {
            return Err(ExposureError::NonPositive("r_min"));
        }
        if !(self.r_min < self.r_median && self.r_median < self.r_max) {
            return Err(ExposureError::DecayOrder(self.r_min, self.r_median, self.r_max));
        }
        Ok(())
    }

    /// Inverse CDF of the decay time. Monotone in `u`, so two configs fed the
    /// same uniforms produce ordered decay times.
    pub fn decay_time(&self, u: f64) -> f64 {
        if u < 0.5 {
            self.r_min + 2.0 * u * (self.r_median - self.r_min)
        } else {
            self.r_median + (2.0 * u - 1.0) * (self.r_max - self.r_median)
        }
    }

    /// Per-second removal rate `1 / (60 r)` for uniform `u`.
    pub fn rate(&self, u: f64) -> f64 {
        1.0 / (60.0 * self.decay_time(u))
    }
}

pub fn sample_decay_rate<R: Rng + ?Sized>(cfg: &DecayConfig, rng: &mut R) -> f64 {
    cfg.rate(rng.random::<f64>())
}

/// Rate for a fixed decay time in minutes.
pub fn rate_for_minutes(r: f64) -> f64 {
    1.0 / (60.0 * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const B: f64 = 1.0 / 3600.0;

    #[test]
    fn concentration_limits() {
        let p = ExposureParams::default();
        assert_eq!(concentration(10.0, 10.0, 100.0, &p, B).unwrap(), 0.0);
        assert_eq!(concentration(5.0, 10.0, 100.0, &p, B).unwrap(), 0.0);
        assert!(concentration(-1.0, 0.0, 1.0, &p, B).is_err());
        let ss = p.steady_state(B);
        assert!((ss - 0.435_669).abs() < 1e-5, "{ss}");
        let long = 3600.0 * 60.0;
        let c = concentration(long + 2f64.ln() / B, 0.0, long, &p, B).unwrap();
        assert!((c / ss - 0.5).abs() < 1e-9);
    }

    #[test]
    fn steady_state_matches_euler() {
        // V dC/dt = g - b V C, integrated forward until it settles.
        let p = ExposureParams::default();
        let dt = 0.1;
        let mut c = 0.0;
        for _ in 0..(3600.0 * 40.0 / dt) as usize {
            c += dt * (p.g - B * p.v * c) / p.v;
        }
        let ss = p.steady_state(B);
        assert!(((c - ss) / ss).abs() < 1e-4);
    }

    #[test]
    fn one_hour_direct_link() {
        let p = ExposureParams::default();
        let e = link_exposure(&Link::new(0, 1, 0, 3600, 0, 3600), &p, B);
        let scale = p.g * p.p / (p.v * B * B);
        assert!((scale - 0.19605).abs() < 1e-4);
        assert!((e - scale * (-1f64).exp()).abs() < 1e-12);
        assert!((e - 0.0721).abs() < 1e-4);
        let pi = infection_probability(e, 0.33).unwrap();
        assert!((pi - 0.0235).abs() < 2e-4, "{pi}");
    }

    #[test]
    fn zero_length_neighbour_stay() {
        let p = ExposureParams::default();
        for l in [
            Link::new(0, 1, 0, 100, 50, 50),
            Link::new(0, 1, 0, 100, 100, 100),
            Link::new(0, 1, 0, 100, 500, 500),
        ] {
            assert_eq!(link_exposure(&l, &p, B), 0.0);
        }
    }

    #[test]
    fn dose_response() {
        assert_eq!(infection_probability(0.0, 0.33).unwrap(), 0.0);
        let half = infection_probability(2.1, 0.33).unwrap();
        assert!((half - 0.5).abs() < 0.01);
        assert!(infection_probability(-1.0, 0.33).is_err());
    }

    #[test]
    fn decay_sampler() {
        assert!(DecayConfig::new(45.0, 300.0, 45.0).is_err());
        let cfg = DecayConfig::new(7.5, 300.0, 45.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut r: Vec<f64> = (0..100_000)
            .map(|_| {
                let b = sample_decay_rate(&cfg, &mut rng);
                assert!((1.0 / (60.0 * 300.0)..=1.0 / (60.0 * 7.5)).contains(&b));
                1.0 / (60.0 * b)
            })
            .collect();
        r.sort_by(f64::total_cmp);
        assert!((r[50_000] - 45.0).abs() < 1.0, "{}", r[50_000]);
        // The sample median has a standard deviation near 0.8 min here; the
        // share of draws below r_t is the sharper check.
        let below = r.iter().filter(|&&x| x < 45.0).count() as f64 / r.len() as f64;
        assert!((below - 0.5).abs() < 0.005);
    }
}
