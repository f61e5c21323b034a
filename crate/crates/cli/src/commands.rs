//! The work behind each subcommand. Each stage takes a resolved config and
//! writes its tables into an output directory.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use spdt_core::epidemic::{
    monte_carlo, reproduction_rate, SeedSelection, SimConfig, SimulationRun, Simulator,
};
use spdt_core::exposure::rate_for_minutes;
use spdt_core::fitting::{fit_all, CipSamples, DelayFitMode};
use spdt_core::graphgen::{draw_lambdas, generate_adn_baseline, generate_network, DegreeMode};
use spdt_core::ingest::{build_network_variants, ingest, parse_updates, VariantStats};
use spdt_core::linkfile::{read_network, write_network};
use spdt_core::netmetrics::{
    daily_aggregates, degree_and_clustering, log_binned, static_projection, temporal_centralities,
    TemporalPathConfig,
};
use spdt_core::network::{collapse_indirect, densify, strip_indirect, Network, DAY};
use spdt_core::rng::{self, purpose};
use spdt_core::vaccinate::{
    build_movement_profiles, contact_lists, efficiency, rank_acquaintance, rank_degree, rank_imv,
    rank_imv_exact, rank_imv_temporal, rank_order, ring_config, ring_eligibility, run_with_mass_plan,
    LocationClassTable, Ranking,
};
use spdt_core::epidemic::RingMode;

use crate::config::{ExperimentConfig, STAGES};
use crate::output::{num, opt, sha256_file, Provenance, Table, Written};

/// Shared inputs of a stage.
pub struct Stage<'a> {
    pub cfg: &'a ExperimentConfig,
    pub prov: Provenance,
    pub out: PathBuf,
}

impl<'a> Stage<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: Option<u64>, out: PathBuf) -> Self {
        Stage { cfg, prov: Provenance { config_hash: cfg.hash(), seed }, out }
    }

    fn seed(&self) -> Result<u64> {
        self.prov.seed.ok_or_else(|| anyhow!("this command needs a seed"))
    }
}

pub fn read_link_file(path: &Path) -> Result<Network> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (net, _) = read_network(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    Ok(net)
}

fn link_file_text(net: &Network, extra: &[(String, String)]) -> Result<String> {
    let mut buf = Vec::new();
    write_network(BufWriter::new(&mut buf), net, extra)?;
    Ok(String::from_utf8(buf)?)
}

pub fn apply_variant(net: Network, variant: &str) -> Result<Network> {
    let mut out = match variant {
        "spdt" | "sdt" => return Ok(net),
        "spst" | "sst" => strip_indirect(&net),
        "ddt" => densify(&net),
        "dst" => strip_indirect(&densify(&net)),
        "ldt" => collapse_indirect(&densify(&net)),
        "lst" => strip_indirect(&collapse_indirect(&densify(&net))),
        other => bail!("unknown network variant `{other}` (spdt, spst, ddt, dst, ldt, lst)"),
    };
    out.name = variant.to_string();
    Ok(out)
}

/// The network a stage works on: from file, generated, or the ADN baseline,
/// followed by the configured variant transform.
pub fn source_network(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Network> {
    let net = match cfg.network.source.as_str() {
        "file" => {
            let path = cfg.network.file.as_ref().ok_or_else(|| anyhow!("network.source = file needs network.file"))?;
            read_link_file(path)?
        }
        "generate" => generate_network(&cfg.network.graph_params()?, seed.ok_or_else(|| anyhow!("generating needs a seed"))?)?,
        "adn" => generate_adn_baseline(&cfg.network.adn_params()?, seed.ok_or_else(|| anyhow!("generating needs a seed"))?)?,
        other => bail!("unknown network source `{other}`"),
    };
    apply_variant(net, &cfg.network.variant)
}

pub fn run_ingest(st: &Stage, input: &Path, w: &mut Written) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let updates = parse_updates(&text).with_context(|| format!("parsing {}", input.display()))?;
    let ing = ingest(&updates, &st.cfg.ingest.extraction(), st.cfg.ingest.origin)?;
    let variants = build_network_variants(&ing.network);
    let mut extra = st.prov.pairs();
    extra.push(("origin_unix".into(), ing.origin.to_string()));

    let mut stats = Table::new(&st.prov, &["variant", "links", "connected_users", "isolated_users", "link_density"]);
    for (name, net) in variants.named() {
        w.write(&st.out, &format!("{name}.links"), &link_file_text(net, &extra)?)?;
        let s = VariantStats::of(net);
        stats.row([
            name.to_string(),
            s.links.to_string(),
            (net.node_count as usize - s.isolated).to_string(),
            s.isolated.to_string(),
            num(s.link_density),
        ]);
    }
    let mut users = Table::new(&st.prov, &["node", "user_id"]);
    for (i, u) in ing.user_ids.iter().enumerate() {
        users.row([i.to_string(), u.to_string()]);
    }
    w.write(&st.out, "users.tsv", &users.into_string())?;
    w.write(&st.out, "variant_stats.tsv", &stats.into_string())?;
    Ok(())
}

/// Generates the configured network (or the ADN baseline) and writes it with
/// the parameters used in its header.
pub fn run_generate(st: &Stage, adn: bool, file_name: &str, w: &mut Written) -> Result<Network> {
    let seed = st.seed()?;
    let n = &st.cfg.network;
    let mut extra = st.prov.pairs();
    let net = if adn {
        let p = n.adn_params()?;
        extra.push(("model".into(), "adn".into()));
        extra.push(("param.adn".into(), format!("{p:?}")));
        generate_adn_baseline(&p, seed)?
    } else {
        let p = n.graph_params()?;
        extra.push(("model".into(), "spdt".into()));
        for (k, v) in [
            ("n", p.n.to_string()),
            ("t_days", p.t_days.to_string()),
            ("dt_s", p.dt_s.to_string()),
            ("rho", num(p.rho)),
            ("q", num(p.q)),
            ("p_c", num(p.p_c)),
            ("p_b", num(p.p_b)),
            ("delta_steps", p.delta_steps.to_string()),
            ("eta", num(p.eta)),
            ("mu", num(p.mu)),
        ] {
            extra.push((format!("param.{k}"), v));
        }
        match p.degree {
            DegreeMode::Homogeneous { lambda } => extra.push(("param.lambda".into(), num(lambda))),
            DegreeMode::Heterogeneous { alpha, xi, psi } => {
                extra.push(("param.alpha".into(), num(alpha)));
                extra.push(("param.xi".into(), num(xi)));
                extra.push(("param.psi".into(), num(psi)));
            }
        }
        let l = draw_lambdas(&p, seed);
        let (lo, hi) = l.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
        extra.push(("lambda_min".into(), num(lo)));
        extra.push(("lambda_mean".into(), num(l.iter().sum::<f64>() / l.len() as f64)));
        extra.push(("lambda_max".into(), num(hi)));
        generate_network(&p, seed)?
    };
    w.write(&st.out, file_name, &link_file_text(&net, &extra)?)?;
    Ok(net)
}

/// Refits the generator parameters and writes them as a `[network]` block.
/// Returns the updated network section.
pub fn run_fit(st: &Stage, net: &Network, w: &mut Written) -> Result<crate::config::NetworkSection> {
    if net.dt_s == 0 || !DAY.is_multiple_of(net.dt_s) {
        bail!("fitting needs a network whose step divides one day (dt_s = {})", net.dt_s);
    }
    let mode = match st.cfg.network.delay_fit.as_str() {
        "quadrature" => DelayFitMode::Quadrature,
        "paired" => DelayFitMode::Paired,
        other => bail!("unknown delay_fit `{other}` (quadrature | paired)"),
    };
    let samples = CipSamples::from_network(net);
    let heterogeneous = st.cfg.network.degree == "heterogeneous";
    let fit = fit_all(&samples, (DAY / net.dt_s) as f64, net.delta_s / net.dt_s, mode, heterogeneous)?;
    let mut sec = st.cfg.network.clone();
    sec.source = "generate".into();
    sec.file = None;
    sec.n = net.node_count;
    sec.t_days = net.horizon_days;
    sec.dt_s = net.dt_s;
    sec.delta_steps = net.delta_s / net.dt_s;
    sec.rho = fit.rho;
    sec.q = fit.q;
    sec.lambda = fit.lambda;
    sec.p_c = fit.p_c;
    sec.p_b = fit.p_b;
    if let Some(pl) = &fit.powerlaw {
        sec.alpha = pl.alpha;
        sec.xi = pl.xi;
    }
    #[derive(serde::Serialize)]
    struct Block<'a> {
        network: &'a crate::config::NetworkSection,
    }
    let mut text = st.prov.header();
    for (k, v) in [
        ("active_periods", samples.active_periods.len()),
        ("degrees", samples.degrees.len()),
        ("link_delays", samples.link_delays.len()),
        ("link_durations", samples.link_durations.len()),
        ("node_days", samples.activation_freqs.len()),
    ] {
        text.push_str(&format!("# samples.{k} = {v}\n"));
    }
    if let Some(pl) = &fit.powerlaw {
        text.push_str(&format!("# powerlaw_iterations = {}\n# powerlaw_at_bound = {}\n", pl.iterations, pl.at_bound));
    }
    text.push_str(&toml::to_string(&Block { network: &sec })?);
    w.write(&st.out, "fit.toml", &text)?;
    Ok(sec)
}

fn horizon(cfg: &ExperimentConfig, net: &Network) -> u32 {
    cfg.run.horizon_days.unwrap_or(net.horizon_days)
}

fn sim_config(cfg: &ExperimentConfig, net: &Network) -> Result<SimConfig> {
    Ok(SimConfig {
        disease: cfg.disease()?,
        seeds: SeedSelection::Random(cfg.disease.seeds),
        horizon_days: horizon(cfg, net),
        intervention: Default::default(),
    })
}

/// Per-replicate `R(t)`, averaged per day over replicates where defined.
fn mean_r_series(runs: &[SimulationRun], tau: f64, delta: usize, days: usize) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let mut sum = vec![(0.0, 0u32); days];
    let mut per_run = Vec::with_capacity(runs.len());
    for r in runs {
        let prev: Vec<u64> = r.daily.iter().map(|d| d.prevalence).collect();
        let rr = reproduction_rate(&prev, tau, delta);
        for (t, v) in rr.series.iter().enumerate() {
            if let Some(v) = v {
                sum[t].0 += v;
                sum[t].1 += 1;
            }
        }
        per_run.push(rr.mean);
    }
    (sum.into_iter().map(|(s, c)| (c > 0).then(|| s / c as f64)).collect(), per_run)
}

pub fn run_simulate(st: &Stage, net: &Network, w: &mut Written) -> Result<()> {
    let cfg = sim_config(st.cfg, net)?;
    let sim = Simulator::new(net);
    let mc = monte_carlo(&sim, &cfg, st.cfg.run.replicates, st.seed()?)?;
    let days = cfg.horizon_days as usize;
    let (r_daily, r_runs) = mean_r_series(&mc.runs, cfg.disease.tau_mean(), st.cfg.disease.r_delta_days, days);

    let mut daily = Table::new(&st.prov, &["day", "I_n", "I_p", "I_a", "R_t"]);
    for (d, m) in mc.mean_daily.iter().enumerate() {
        daily.row([d.to_string(), num(m.0), num(m.1), num(m.2), opt(r_daily.get(d).copied().flatten())]);
    }
    let mut runs = Table::new(&st.prov, &["replicate", "seed", "outbreak_size", "new_infections", "mean_R"]);
    for (i, (r, mr)) in mc.runs.iter().zip(&r_runs).enumerate() {
        runs.row([i.to_string(), r.seed.to_string(), r.outbreak_size.to_string(), r.new_infections().to_string(), opt(*mr)]);
    }
    let defined: Vec<f64> = r_runs.iter().flatten().copied().collect();
    let mean_r = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let mut summary = Table::new(&st.prov, &["key", "value"]);
    let n = mc.runs.len() as f64;
    for (k, v) in [
        ("network", net.name.clone()),
        ("replicates", mc.runs.len().to_string()),
        ("horizon_days", days.to_string()),
        ("mean_outbreak", num(mc.mean_outbreak)),
        ("mean_new_infections", num(mc.runs.iter().map(|r| r.new_infections() as f64).sum::<f64>() / n)),
        ("outbreak_q05", num(mc.quantiles[0])),
        ("outbreak_q50", num(mc.quantiles[1])),
        ("outbreak_q95", num(mc.quantiles[2])),
        ("mean_R", opt(mean_r)),
    ] {
        summary.row([k.to_string(), v]);
    }
    w.write(&st.out, "simulate_daily.tsv", &daily.into_string())?;
    w.write(&st.out, "simulate_runs.tsv", &runs.into_string())?;
    w.write(&st.out, "simulate_summary.tsv", &summary.into_string())?;
    Ok(())
}

pub fn run_metrics(st: &Stage, net: &Network, w: &mut Written) -> Result<()> {
    let m = &st.cfg.metrics;
    let params = st.cfg.exposure.params()?;
    let b = rate_for_minutes(m.r.unwrap_or(st.cfg.exposure.r_t));
    let proj = static_projection(net, &params, b, m.threshold)?;
    let nodes = degree_and_clustering(&proj);
    let temporal = if m.temporal {
        let tc = TemporalPathConfig {
            max_gap_days: m.max_gap_days,
            sample_sources: m.sample_sources.map(|k| (k, st.prov.seed.unwrap_or(0))),
        };
        Some(temporal_centralities(net, &tc)?)
    } else {
        None
    };

    let mut cols = vec!["node", "in_degree", "out_degree", "degree", "clustering"];
    if temporal.is_some() {
        cols.extend(["betweenness", "closeness"]);
    }
    let mut t = Table::new(&st.prov, &cols);
    for (v, nm) in nodes.iter().enumerate() {
        let mut row = vec![
            v.to_string(),
            nm.in_degree.to_string(),
            nm.out_degree.to_string(),
            nm.degree.to_string(),
            num(nm.clustering),
        ];
        if let Some(tc) = &temporal {
            row.push(num(tc[v].betweenness));
            row.push(num(tc[v].closeness));
        }
        t.row(row);
    }
    w.write(&st.out, "metrics_nodes.tsv", &t.into_string())?;

    let degrees: Vec<u32> = nodes.iter().map(|x| x.degree).collect();
    let n = degrees.len().max(1) as f64;
    let mut t = Table::new(&st.prov, &["lower", "upper", "count", "density"]);
    for (lo, hi, c) in log_binned(&degrees, m.bins_per_decade) {
        t.row([num(lo), num(hi), c.to_string(), num(c as f64 / ((hi - lo) * n))]);
    }
    w.write(&st.out, "metrics_degree_dist.tsv", &t.into_string())?;

    let mut hist = [0u64; 10];
    for x in nodes.iter().filter(|x| x.degree >= 2) {
        hist[((x.clustering * 10.0) as usize).min(9)] += 1;
    }
    let mut t = Table::new(&st.prov, &["lower", "upper", "count"]);
    for (i, c) in hist.iter().enumerate() {
        t.row([num(i as f64 / 10.0), num((i + 1) as f64 / 10.0), c.to_string()]);
    }
    w.write(&st.out, "metrics_clustering_dist.tsv", &t.into_string())?;

    let mut t = Table::new(&st.prov, &["day", "active_nodes", "mean_degree", "mean_clustering"]);
    for (d, a) in daily_aggregates(net, &params, b, m.threshold)?.iter().enumerate() {
        match a {
            Some(a) => t.row([d.to_string(), a.active_nodes.to_string(), num(a.mean_degree), num(a.mean_clustering)]),
            None => t.row([d.to_string(), "0".into(), "nan".into(), "nan".into()]),
        }
    }
    w.write(&st.out, "metrics_daily.tsv", &t.into_string())?;
    Ok(())
}

pub fn ranking_scores(cfg: &ExperimentConfig, net: &Network, seed: u64) -> Result<Option<Vec<f64>>> {
    let v = &cfg.vaccination;
    let (win, ind) = (v.window_days, v.use_indirect);
    Ok(match v.strategy.as_str() {
        "rv" => None,
        "av" => Some(rank_acquaintance(net, win, ind, &mut rng::stream(seed, 0, 0, purpose::RANKING))),
        "dv" => Some(rank_degree(net, win, ind)),
        "imv" => {
            let table = LocationClassTable::default();
            Some(rank_imv(&build_movement_profiles(net, win, &table, ind), &table, v.beta))
        }
        "imve" => Some(rank_imv_exact(net, win, v.beta, ind)),
        "imvt" => Some(rank_imv_temporal(net, win, v.beta, v.t0_s, ind)),
        other => bail!("unknown strategy `{other}` (rv, av, dv, imv, imve, imvt)"),
    })
}

/// Mean outbreak from a `simulate_summary.tsv`.
fn read_baseline(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .find_map(|l| l.strip_prefix("mean_outbreak\t"))
        .ok_or_else(|| anyhow!("{} has no mean_outbreak row", path.display()))?
        .trim()
        .parse()
        .with_context(|| format!("parsing mean_outbreak in {}", path.display()))
}

pub fn run_vaccinate(st: &Stage, net: &Network, w: &mut Written) -> Result<()> {
    let v = &st.cfg.vaccination;
    let seed = st.seed()?;
    let base_cfg = sim_config(st.cfg, net)?;
    let sim = Simulator::new(net);
    let scores = ranking_scores(st.cfg, net, seed)?;
    let reps = st.cfg.run.replicates;

    // (baseline outbreak, vaccinated outbreak, doses) per replicate
    let mut set: Vec<(u32, f64)> = Vec::new();
    let results: Vec<(u64, u64, u64)> = match v.mode.as_str() {
        "mass" => {
            let ranking = scores.clone().map_or(Ranking::Random, Ranking::Scores);
            let runs: Vec<Result<_>> = rayon_map(reps, |i| {
                let s = seed.wrapping_add(i as u64);
                let base = if v.baseline.is_none() { sim.run(&base_cfg, s)?.outbreak_size } else { 0 };
                let (run, plan) = run_with_mass_plan(&sim, &base_cfg, &ranking, v.p, v.f, s)?;
                Ok((base, run.outbreak_size, run.vaccinated, plan.vaccinated))
            });
            let mut out = Vec::with_capacity(reps);
            for (i, r) in runs.into_iter().enumerate() {
                let (b, z, d, vac) = r?;
                if i == 0 {
                    set = vac
                        .into_iter()
                        .map(|x| (x, scores.as_ref().map_or(f64::NAN, |s| s[x as usize])))
                        .collect();
                }
                out.push((b, z, d));
            }
            out
        }
        "ring" => {
            let mode = match &scores {
                None => RingMode::Random(v.p),
                Some(s) => {
                    let flags = ring_eligibility(s, v.p, None);
                    set = rank_order(s)
                        .into_iter()
                        .filter(|&x| flags[x as usize])
                        .map(|x| (x, s[x as usize]))
                        .collect();
                    RingMode::Eligible(flags)
                }
            };
            let ring = ring_config(mode, v.f, v.deploy_day, contact_lists(net, net.horizon_days, v.use_indirect))?;
            let mut cfg = base_cfg.clone();
            cfg.intervention.ring = Some(ring);
            let runs: Vec<Result<_>> = rayon_map(reps, |i| {
                let s = seed.wrapping_add(i as u64);
                let base = if v.baseline.is_none() { sim.run(&base_cfg, s)?.outbreak_size } else { 0 };
                let run = sim.run(&cfg, s)?;
                Ok((base, run.outbreak_size, run.vaccinated))
            });
            runs.into_iter().collect::<Result<_>>()?
        }
        other => bail!("unknown vaccination mode `{other}` (mass | ring)"),
    };

    let n = results.len() as f64;
    let z_ref = match &v.baseline {
        Some(p) => read_baseline(p)?,
        None => results.iter().map(|r| r.0 as f64).sum::<f64>() / n,
    };
    let z_vac = results.iter().map(|r| r.1 as f64).sum::<f64>() / n;
    let eta = efficiency(z_ref, z_vac).ok();

    let mut t = Table::new(&st.prov, &["rank", "node", "score"]);
    for (i, (x, s)) in set.iter().enumerate() {
        t.row([i.to_string(), x.to_string(), num(*s)]);
    }
    w.write(&st.out, "vaccinate_set.tsv", &t.into_string())?;

    let mut t = Table::new(&st.prov, &["replicate", "seed", "baseline_outbreak", "outbreak_size", "vaccinated"]);
    for (i, (b, z, d)) in results.iter().enumerate() {
        let b = if v.baseline.is_some() { "nan".to_string() } else { b.to_string() };
        t.row([i.to_string(), seed.wrapping_add(i as u64).to_string(), b, z.to_string(), d.to_string()]);
    }
    w.write(&st.out, "vaccinate_runs.tsv", &t.into_string())?;

    let mut t = Table::new(&st.prov, &["key", "value"]);
    for (k, val) in [
        ("strategy", v.strategy.clone()),
        ("mode", v.mode.clone()),
        ("P", num(v.p)),
        ("F", num(v.f)),
        ("replicates", results.len().to_string()),
        ("baseline_mean_outbreak", num(z_ref)),
        ("mean_outbreak", num(z_vac)),
        ("efficiency_percent", opt(eta)),
    ] {
        t.row([k.to_string(), val]);
    }
    w.write(&st.out, "vaccinate_summary.tsv", &t.into_string())?;
    Ok(())
}

/// Parallel map over replicate indices, returned in index order.
fn rayon_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Runs the configured stages in canonical order and writes `manifest.tsv`
/// with a SHA-256 for every file produced.
pub fn run_pipeline(cfg: &ExperimentConfig, seed: u64, out: PathBuf) -> Result<Written> {
    // Every file carries the hash of the configuration as given, even when the
    // fit stage rewrites the generator section for later stages.
    let prov = Provenance { config_hash: cfg.hash(), seed: Some(seed) };
    let mut cfg = cfg.clone();
    let mut w = Written::default();
    let mut stage_of: Vec<(String, usize)> = Vec::new();
    let wants = |s: &str| cfg.pipeline.stages.iter().any(|x| x == s);
    let (do_fit, do_gen) = (wants("fit"), wants("generate"));
    let (do_sim, do_met, do_vac) = (wants("simulate"), wants("metrics"), wants("vaccinate"));

    let st = Stage { cfg: &cfg, prov: prov.clone(), out: out.clone() };
    if do_fit {
        let path = cfg.network.file.clone().ok_or_else(|| anyhow!("stage `fit` failed: network.file is not set"))?;
        let mut run = || -> Result<_> { run_fit(&st, &read_link_file(&path)?, &mut w) };
        let sec = run().context("stage `fit` failed")?;
        stage_of.push(("fit".into(), w.files.len()));
        cfg.network = crate::config::NetworkSection { variant: cfg.network.variant.clone(), ..sec };
    }

    let st = Stage { cfg: &cfg, prov, out: out.clone() };
    let mut net = None;
    if do_gen {
        let adn = cfg.network.source == "adn";
        let g = run_generate(&st, adn, "network.links", &mut w).context("stage `generate` failed")?;
        stage_of.push(("generate".into(), w.files.len()));
        net = Some(apply_variant(g, &cfg.network.variant)?);
    }
    if do_sim || do_met || do_vac {
        let net = match net {
            Some(n) => n,
            None => source_network(&cfg, Some(seed)).context("loading the network failed")?,
        };
        for (name, on) in [("simulate", do_sim), ("metrics", do_met), ("vaccinate", do_vac)] {
            if !on {
                continue;
            }
            let r = match name {
                "simulate" => run_simulate(&st, &net, &mut w),
                "metrics" => run_metrics(&st, &net, &mut w),
                _ => run_vaccinate(&st, &net, &mut w),
            };
            r.with_context(|| format!("stage `{name}` failed"))?;
            stage_of.push((name.into(), w.files.len()));
        }
    }

    let mut t = Table::new(&st.prov, &["stage", "file", "sha256"]);
    let mut start = 0;
    for (stage, end) in &stage_of {
        for f in &w.files[start..*end] {
            let rel = f.strip_prefix(&out).unwrap_or(f);
            t.row([stage.clone(), rel.display().to_string(), sha256_file(f)?]);
        }
        start = *end;
    }
    debug_assert!(stage_of.iter().all(|(s, _)| STAGES.contains(&s.as_str())));
    w.write(&out, "manifest.tsv", &t.into_string())?;
    Ok(w)
}
