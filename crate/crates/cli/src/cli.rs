//! Command-line definition and dispatch.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{
    read_link_file, run_fit, run_generate, run_ingest, run_metrics, run_pipeline, run_simulate,
    run_vaccinate, source_network, Stage,
};
use crate::config::ExperimentConfig;
use crate::output::Written;

#[derive(Debug, Parser)]
#[command(name = "spdt", version, about = "Diffusion experiments on temporal contact networks with indirect links")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: run.out_dir, then $SPDT_OUT_DIR, then ./spdt-out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for every random draw; one is generated and recorded if absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Adn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DelayMode {
    Quadrature,
    Paired,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the six network variants from a location-update trace.
    Ingest {
        /// Lines of `user_id,lat,lon,unix_time`.
        updates: PathBuf,
        #[arg(long)]
        radius_m: Option<f64>,
        #[arg(long)]
        max_gap_s: Option<u64>,
        #[arg(long)]
        delta_s: Option<u64>,
        #[arg(long)]
        origin: Option<i64>,
    },
    /// Generate a synthetic network.
    Generate {
        /// Emit the activity-driven comparison network instead.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long)]
        nodes: Option<u32>,
        #[arg(long)]
        days: Option<u32>,
        /// `homogeneous` or `heterogeneous`.
        #[arg(long)]
        degree: Option<String>,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "network.links")]
        name: String,
    },
    /// Fit generator parameters to a link file and print a `[network]` block.
    Fit {
        network: PathBuf,
        #[arg(long, value_enum)]
        delay_mode: Option<DelayMode>,
        /// Also fit the power-law degree mixture.
        #[arg(long)]
        powerlaw: bool,
    },
    /// Monte Carlo SIR runs.
    Simulate {
        /// Link file; the configured network source when absent.
        network: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Static and temporal network measures.
    Metrics {
        network: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Also compute temporal betweenness and closeness.
        #[arg(long)]
        temporal: bool,
        #[arg(long)]
        max_gap_days: Option<u32>,
        #[arg(long)]
        sample_sources: Option<usize>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Vaccination experiments against an unvaccinated baseline.
    Vaccinate {
        network: Option<PathBuf>,
        /// rv, av, dv, imv, imve or imvt.
        #[arg(long)]
        strategy: Option<String>,
        /// mass or ring.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long = "p")]
        p: Option<f64>,
        #[arg(long = "f")]
        f: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        window_days: Option<u32>,
        /// Rank on direct contacts only.
        #[arg(long)]
        direct_only: bool,
        #[arg(long)]
        deploy_day: Option<u32>,
        /// `simulate_summary.tsv` of a reference run.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Run the configured stages and write a manifest of output hashes.
    Pipeline {
        /// Configuration file (same as --config).
        file: Option<PathBuf>,
        /// Print the resolved configuration and stop.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Debug, clap::Args)]
pub struct SimArgs {
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub horizon_days: Option<u32>,
    /// Initial infections per replicate.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// spdt, spst, ddt, dst, ldt or lst.
    #[arg(long)]
    pub variant: Option<String>,
    /// Median particle decay time, minutes.
    #[arg(long)]
    pub r_t: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl SimArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.run.replicates, self.replicates);
        if self.horizon_days.is_some() {
            cfg.run.horizon_days = self.horizon_days;
        }
        set(&mut cfg.disease.seeds, self.seeds);
        set(&mut cfg.network.variant, self.variant);
        set(&mut cfg.exposure.r_t, self.r_t);
    }
}

fn use_file(cfg: &mut ExperimentConfig, network: Option<PathBuf>) {
    if let Some(p) = network {
        cfg.network.source = "file".into();
        cfg.network.file = Some(p);
    }
}

/// Explicit seed, or one derived from the clock and announced on stderr.
fn resolve_seed(cfg: &mut ExperimentConfig) -> u64 {
    *cfg.run.seed.get_or_insert_with(|| {
        let t = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
        let s = spdt_core::rng::splitmix64(t);
        eprintln!("seed = {s} (generated)");
        s
    })
}

/// Runs one invocation; returns the files written.
pub fn run(cli: Cli) -> Result<Written> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build()?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: Cli) -> Result<Written> {
    let config_path = match &cli.command {
        Command::Pipeline { file: Some(f), .. } => Some(f.clone()),
        _ => cli.config.clone(),
    };
    let mut cfg = ExperimentConfig::load_or_default(config_path.as_deref())?;
    if cli.seed.is_some() {
        cfg.run.seed = cli.seed;
    }
    let mut w = Written::default();

    match cli.command {
        Command::Ingest { updates, radius_m, max_gap_s, delta_s, origin } => {
            set(&mut cfg.ingest.radius_m, radius_m);
            set(&mut cfg.ingest.max_gap_s, max_gap_s);
            set(&mut cfg.ingest.delta_s, delta_s);
            if origin.is_some() {
                cfg.ingest.origin = origin;
            }
            cfg.validate()?;
            let out = cfg.out_dir(cli.out_dir.as_deref());
            run_ingest(&Stage::new(&cfg, None, out), &updates, &mut w)?;
        }
        Command::Generate { baseline, nodes, days, degree, name } => {
            set(&mut cfg.network.n, nodes);
            set(&mut cfg.network.t_days, days);
            set(&mut cfg.network.degree, degree);
            if baseline.is_some() {
                cfg.network.source = "adn".into();
            }
            let seed = resolve_seed(&mut cfg);
            cfg.validate()?;
            let out = cfg.out_dir(cli.out_dir.as_deref());
            run_generate(&Stage::new(&cfg, Some(seed), out), baseline.is_some(), &name, &mut w)?;
        }
        Command::Fit { network, delay_mode, powerlaw } => {
            if let Some(m) = delay_mode {
                cfg.network.delay_fit = match m {
                    DelayMode::Quadrature => "quadrature".into(),
                    DelayMode::Paired => "paired".into(),
                };
            }
            if powerlaw {
                cfg.network.degree = "heterogeneous".into();
            }
            use_file(&mut cfg, Some(network.clone()));
            cfg.validate()?;
            let out = cfg.out_dir(cli.out_dir.as_deref());
            let net = read_link_file(&network)?;
            run_fit(&Stage::new(&cfg, None, out), &net, &mut w)?;
            print!("{}", std::fs::read_to_string(w.files.last().context("fit wrote nothing")?)?);
        }
        Command::Simulate { network, sim } => {
            use_file(&mut cfg, network);
            sim.apply(&mut cfg);
            let seed = resolve_seed(&mut cfg);
            cfg.validate()?;
            let net = source_network(&cfg, Some(seed))?;
            let out = cfg.out_dir(cli.out_dir.as_deref());
            run_simulate(&Stage::new(&cfg, Some(seed), out), &net, &mut w)?;
        }
        Command::Metrics { network, threshold, temporal, max_gap_days, sample_sources, variant } => {
            use_file(&mut cfg, network);
            set(&mut cfg.metrics.threshold, threshold);
            cfg.metrics.temporal |= temporal;
            set(&mut cfg.metrics.max_gap_days, max_gap_days);
            if sample_sources.is_some() {
                cfg.metrics.sample_sources = sample_sources;
            }
            set(&mut cfg.network.variant, variant);
            let seed = resolve_seed(&mut cfg);
            cfg.validate()?;
            let net = source_network(&cfg, Some(seed))?;
            let out = cfg.out_dir(cli.out_dir.as_deref());
            run_metrics(&Stage::new(&cfg, Some(seed), out), &net, &mut w)?;
        }
        Command::Vaccinate {
            network,
            strategy,
            mode,
            p,
            f,
            beta,
            window_days,
            direct_only,
            deploy_day,
            baseline,
            sim,
        } => {
            use_file(&mut cfg, network);
            sim.apply(&mut cfg);
            let v = &mut cfg.vaccination;
            set(&mut v.strategy, strategy);
            set(&mut v.mode, mode);
            set(&mut v.p, p);
            set(&mut v.f, f);
            set(&mut v.beta, beta);
            set(&mut v.window_days, window_days);
            set(&mut v.deploy_day, deploy_day);
            v.use_indirect &= !direct_only;
            if baseline.is_some() {
                v.baseline = baseline;
            }
            let seed = resolve_seed(&mut cfg);
            cfg.validate()?;
            let net = source_network(&cfg, Some(seed))?;
            let out = cfg.out_dir(cli.out_dir.as_deref());
            run_vaccinate(&Stage::new(&cfg, Some(seed), out), &net, &mut w)?;
        }
        Command::Pipeline { dry_run, .. } => {
            let seed = resolve_seed(&mut cfg);
            cfg.validate()?;
            if dry_run {
                print!("# config_hash = {}\n{}", cfg.hash(), cfg.to_toml());
                return Ok(w);
            }
            let out = cfg.out_dir(cli.out_dir.as_deref());
            w = run_pipeline(&cfg, seed, out)?;
        }
    }
    Ok(w)
}
