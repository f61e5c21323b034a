use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spdt_core::fitting::*;
use spdt_core::graphgen::{
    generate_network, sample_active_period, sample_link_delay, GraphGenParams,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

proptest! {
    #[test]
    fn geometric_fit_ignores_duplication(s in prop::collection::vec(1u64..500, 1..100), k in 2usize..5) {
        let once = fit_geometric(&s).unwrap();
        let many: Vec<u64> = s.iter().cycle().take(s.len() * k).copied().collect();
        prop_assert!((fit_geometric(&many).unwrap() - once).abs() < 1e-12);
        prop_assert!(once > 0.0 && once <= 1.0);
    }

    #[test]
    fn rse_is_a_distance(
        x in prop::collection::vec(0.0f64..1.0, 1..30),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut r = rng(seed);
        let y: Vec<f64> = x.iter().map(|_| r.random::<f64>()).collect();
        let z: Vec<f64> = x.iter().map(|_| r.random::<f64>()).collect();
        prop_assert_eq!(rse(&x, &x).unwrap(), 0.0);
        prop_assert!((rse(&x, &y).unwrap() - rse(&y, &x).unwrap()).abs() < 1e-15);
        prop_assert!(rse(&x, &z).unwrap() <= rse(&x, &y).unwrap() + rse(&y, &z).unwrap() + 1e-12);
        prop_assert!(rse(&x, &y[..y.len() - 1]).is_err());
    }

    #[test]
    fn empirical_pmf_sums_to_one(s in prop::collection::vec(1u64..40, 1..200)) {
        let total: f64 = empirical_pmf(&s, 1).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn active_period_rate_recovered() {
    let mut r = rng(1);
    let s: Vec<u64> = (0..1_000_000).map(|_| sample_active_period(0.085, &mut r)).collect();
    let rho = fit_geometric(&s).unwrap();
    assert!((0.0847..=0.0853).contains(&rho), "{rho}");
}

#[test]
fn link_creation_probability_recovered() {
    let mut r = rng(2);
    let ta: Vec<u64> = (0..100_000).map(|_| sample_active_period(0.085, &mut r)).collect();
    let delays: Vec<u64> = ta.iter().map(|&t| sample_link_delay(0.02, t, 36, &mut r)).collect();
    for mode in [DelayFitMode::Paired, DelayFitMode::Quadrature] {
        let p = fit_truncated_geometric(&delays, &ta, 36, mode).unwrap();
        assert!((0.018..=0.022).contains(&p), "{mode:?} {p}");
    }
}

#[test]
fn mixture_pmf_matches_quadrature() {
    let (alpha, xi, psi) = (2.963f64, 0.26f64, 0.999f64);
    let z = xi.powf(-alpha) - psi.powf(-alpha);
    let mut total = 0.0;
    for d in 1..200u64 {
        let q = simpson(|l| alpha * l.powf(-alpha - 1.0) / z * (1.0 - l) * l.powi(d as i32 - 1), xi, psi, 4000);
        let m = mixture_pmf(d, alpha, xi, psi);
        assert!((m - q).abs() < 1e-9, "d={d}: {m} vs {q}");
        total += m;
    }
    assert!(total > 0.999 && total <= 1.0 + 1e-9);
}

#[test]
fn scores_vanish_at_the_estimate() {
    let degrees: Vec<u64> = (1..=40).flat_map(|d| std::iter::repeat_n(d, (4000.0 * 0.6f64.powi(d as i32)) as usize + 1)).collect();
    let f = fit_powerlaw_degree(&degrees, 2.5).unwrap();
    if !f.at_bound {
        let (sa, sx) = powerlaw_scores(&degrees, f.alpha, f.xi);
        assert!(sa.abs() < 1e-3 * degrees.len() as f64 && sx.abs() < 1e-3 * degrees.len() as f64, "{sa} {sx}");
    }
}

#[test]
fn all_ones_hit_the_bracket() {
    let f = fit_powerlaw_degree(&[1; 500], 2.5).unwrap();
    assert!(f.at_bound);
}

#[test]
fn empty_inputs_are_errors() {
    assert!(fit_geometric(&[]).is_err());
    assert!(fit_powerlaw_degree(&[], 2.5).is_err());
    assert!(fit_truncated_geometric(&[], &[3], 36, DelayFitMode::Quadrature).is_err());
    assert!(fit_activation_q(&[], 0.085, 288.0).is_err());
}

#[test]
fn active_period_pmf_of_generated_network() {
    let p = GraphGenParams { n: 2000, t_days: 7, ..Default::default() };
    let net = generate_network(&p, 6).unwrap();
    let s = CipSamples::from_network(&net);
    let f = fit_all(&s, p.steps_per_day() as f64, p.delta_steps, DelayFitMode::Quadrature, false).unwrap();
    let emp = empirical_pmf(&s.active_periods, 1);
    let model: Vec<f64> = (1..=emp.len() as i32).map(|t| f.rho * (1.0 - f.rho).powi(t - 1)).collect();
    let e = rse(&emp, &model).unwrap();
    assert!(e < 0.09, "{e}");
    assert!((f.rho / p.rho - 1.0).abs() < 0.05, "{}", f.rho);
}

#[test]
fn scores_are_likelihood_gradients() {
    let degrees: Vec<u64> = (1..=30).flat_map(|d| std::iter::repeat_n(d, 1 + 300 / d as usize)).collect();
    let ll = |a: f64, x: f64| degrees.iter().map(|&d| mixture_pmf(d, a, x, 1.0).ln()).sum::<f64>();
    for (a, x) in [(2.5, 0.2), (2.963, 0.26), (4.0, 0.5), (1.5, 0.05)] {
        let (sa, sx) = powerlaw_scores(&degrees, a, x);
        let h = 1e-6;
        let fa = (ll(a + h, x) - ll(a - h, x)) / (2.0 * h);
        let fx = (ll(a, x + h) - ll(a, x - h)) / (2.0 * h);
        assert!((sa - fa).abs() < 1e-4 * fa.abs().max(1.0), "alpha at ({a}, {x}): {sa} vs {fa}");
        assert!((sx - fx).abs() < 1e-4 * fx.abs().max(1.0), "xi at ({a}, {x}): {sx} vs {fx}");
    }
}
