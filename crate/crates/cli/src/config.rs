//! Experiment configuration: a TOML document of flat `[section]` tables.
//!
//! Every key has a default, so an empty file is a valid configuration. The
//! resolved document (file plus command-line overrides) is hashed into the
//! header of every output.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spdt_core::epidemic::DiseaseParams;
use spdt_core::exposure::{DecayConfig, ExposureParams};
use spdt_core::graphgen::{AdnActivity, AdnParams, DegreeMode, GraphGenParams};
use spdt_core::ingest::VisitExtractionConfig;

pub const OUT_DIR_ENV: &str = "SPDT_OUT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub network: NetworkSection,
    pub exposure: ExposureSection,
    pub disease: DiseaseSection,
    pub ingest: IngestSection,
    pub metrics: MetricsSection,
    pub vaccination: VaccinationSection,
    pub pipeline: PipelineSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub replicates: usize,
    /// Simulation horizon; the network horizon when unset.
    pub horizon_days: Option<u32>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: None, replicates: 100, horizon_days: None, out_dir: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// `file`, `generate` or `adn`.
    pub source: String,
    pub file: Option<PathBuf>,
    /// Transform applied before simulation: `spdt` (none), `spst`, `ddt`,
    /// `dst`, `ldt` or `lst`.
    pub variant: String,
    pub n: u32,
    pub t_days: u32,
    pub dt_s: u64,
    pub rho: f64,
    pub q: f64,
    /// `homogeneous` or `heterogeneous`.
    pub degree: String,
    pub lambda: f64,
    pub alpha: f64,
    pub xi: f64,
    pub psi: f64,
    pub p_c: f64,
    pub p_b: f64,
    pub delta_steps: u64,
    pub eta: f64,
    pub mu: f64,
    pub adn_dt_s: u64,
    pub adn_m: u32,
    /// `powerlaw` or `homogeneous`.
    pub adn_activity: String,
    pub adn_phi: f64,
    pub adn_lo: f64,
    pub adn_hi: f64,
    pub adn_exponent: f64,
    /// Link-delay estimator used by `fit`: `quadrature` or `paired`.
    pub delay_fit: String,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let g = GraphGenParams::default();
        let DegreeMode::Homogeneous { lambda } = g.degree else { unreachable!() };
        let adn = AdnParams::default();
        let AdnActivity::PowerLaw { lo, hi, exponent } = adn.activity else { unreachable!() };
        NetworkSection {
            source: "generate".into(),
            file: None,
            variant: "spdt".into(),
            n: g.n,
            t_days: g.t_days,
            dt_s: g.dt_s,
            rho: g.rho,
            q: g.q,
            degree: "homogeneous".into(),
            lambda,
            alpha: 2.963,
            xi: 0.26,
            psi: 0.999,
            p_c: g.p_c,
            p_b: g.p_b,
            delta_steps: g.delta_steps,
            eta: g.eta,
            mu: g.mu,
            adn_dt_s: adn.dt_s,
            adn_m: adn.m,
            adn_activity: "powerlaw".into(),
            adn_phi: 0.05,
            adn_lo: lo,
            adn_hi: hi,
            adn_exponent: exponent,
            delay_fit: "quadrature".into(),
        }
    }
}

impl NetworkSection {
    pub fn graph_params(&self) -> Result<GraphGenParams> {
        let degree = match self.degree.as_str() {
            "homogeneous" => DegreeMode::Homogeneous { lambda: self.lambda },
            "heterogeneous" => DegreeMode::Heterogeneous { alpha: self.alpha, xi: self.xi, psi: self.psi },
            other => bail!("unknown degree mode `{other}` (homogeneous | heterogeneous)"),
        };
        Ok(GraphGenParams {
            n: self.n,
            t_days: self.t_days,
            dt_s: self.dt_s,
            rho: self.rho,
            q: self.q,
            degree,
            p_c: self.p_c,
            p_b: self.p_b,
            delta_steps: self.delta_steps,
            eta: self.eta,
            mu: self.mu,
        })
    }

    pub fn adn_params(&self) -> Result<AdnParams> {
        let activity = match self.adn_activity.as_str() {
            "powerlaw" => AdnActivity::PowerLaw { lo: self.adn_lo, hi: self.adn_hi, exponent: self.adn_exponent },
            "homogeneous" => AdnActivity::Homogeneous { phi: self.adn_phi },
            other => bail!("unknown ADN activity `{other}` (powerlaw | homogeneous)"),
        };
        Ok(AdnParams { n: self.n, t_days: self.t_days, dt_s: self.adn_dt_s, m: self.adn_m, activity })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureSection {
    pub g: f64,
    /// Litres per minute.
    pub p_lpm: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub sigma: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Median decay time in minutes.
    pub r_t: f64,
}

impl Default for ExposureSection {
    fn default() -> Self {
        let e = ExposureParams::default();
        let d = DecayConfig::default();
        ExposureSection {
            g: e.g,
            p_lpm: 7.5,
            v: e.v,
            sigma: e.sigma,
            r_min: d.r_min,
            r_max: d.r_max,
            r_t: d.r_median,
        }
    }
}

impl ExposureSection {
    pub fn params(&self) -> Result<ExposureParams> {
        Ok(ExposureParams::from_lpm(self.g, self.p_lpm, self.v, self.sigma)?)
    }

    pub fn decay(&self) -> Result<DecayConfig> {
        Ok(DecayConfig::new(self.r_min, self.r_max, self.r_t)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiseaseSection {
    pub tau_min: u32,
    pub tau_max: u32,
    pub seed_tau: Option<u32>,
    /// Randomly chosen initial infections per replicate.
    pub seeds: usize,
    /// Day offset used for R(t).
    pub r_delta_days: usize,
}

impl Default for DiseaseSection {
    fn default() -> Self {
        let d = DiseaseParams::default();
        DiseaseSection { tau_min: d.tau_min, tau_max: d.tau_max, seed_tau: d.seed_tau, seeds: 50, r_delta_days: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub radius_m: f64,
    pub max_gap_s: u64,
    pub delta_s: u64,
    pub min_nbr_updates: usize,
    /// Unix time of second zero; earliest update when unset.
    pub origin: Option<i64>,
}

impl Default for IngestSection {
    fn default() -> Self {
        let c = VisitExtractionConfig::default();
        IngestSection {
            radius_m: c.radius_m,
            max_gap_s: c.max_gap_s,
            delta_s: c.delta_s,
            min_nbr_updates: c.min_nbr_updates,
            origin: None,
        }
    }
}

impl IngestSection {
    pub fn extraction(&self) -> VisitExtractionConfig {
        VisitExtractionConfig {
            radius_m: self.radius_m,
            max_gap_s: self.max_gap_s,
            delta_s: self.delta_s,
            min_nbr_updates: self.min_nbr_updates,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Minimum link dose (PFU) for a static edge.
    pub threshold: f64,
    /// Decay time (minutes) used for link doses; `exposure.r_t` when unset.
    pub r: Option<f64>,
    pub bins_per_decade: u32,
    pub temporal: bool,
    pub max_gap_days: u32,
    /// Estimate temporal centralities from this many random sources.
    pub sample_sources: Option<usize>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            threshold: 0.0,
            r: None,
            bins_per_decade: 10,
            temporal: false,
            max_gap_days: 5,
            sample_sources: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaccinationSection {
    /// `rv`, `av`, `dv`, `imv`, `imve` or `imvt`.
    pub strategy: String,
    /// `mass` (preventive) or `ring` (after detection).
    pub mode: String,
    pub p: f64,
    /// Information availability.
    pub f: f64,
    pub beta: f64,
    /// Stay-time scale for `imvt`, seconds.
    pub t0_s: f64,
    /// Days of contact history used for ranking.
    pub window_days: u32,
    pub use_indirect: bool,
    pub deploy_day: u32,
    /// Outbreak summary of an unvaccinated run to compare against; when
    /// unset the baseline is simulated with the same seeds.
    pub baseline: Option<PathBuf>,
}

impl Default for VaccinationSection {
    fn default() -> Self {
        VaccinationSection {
            strategy: "imv".into(),
            mode: "mass".into(),
            p: 0.01,
            f: 1.0,
            beta: 0.1,
            t0_s: 3600.0,
            window_days: 5,
            use_indirect: true,
            deploy_day: 7,
            baseline: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Any of `fit`, `generate`, `simulate`, `metrics`, `vaccinate`; run in
    /// that order regardless of listing order.
    pub stages: Vec<String>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection { stages: vec!["generate".into(), "simulate".into()] }
    }
}

pub const STAGES: [&str; 5] = ["fit", "generate", "simulate", "metrics", "vaccinate"];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the resolved document.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn disease(&self) -> Result<DiseaseParams> {
        Ok(DiseaseParams {
            exposure: self.exposure.params()?,
            decay: self.exposure.decay()?,
            tau_min: self.disease.tau_min,
            tau_max: self.disease.tau_max,
            seed_tau: self.disease.seed_tau,
        })
    }

    /// Flag, then config, then `SPDT_OUT_DIR`, then `spdt-out`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.run.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("spdt-out"))
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.pipeline.stages {
            if !STAGES.contains(&s.as_str()) {
                bail!("unknown pipeline stage `{s}` (expected one of {})", STAGES.join(", "));
            }
        }
        if !matches!(self.network.source.as_str(), "file" | "generate" | "adn") {
            bail!("network.source must be file, generate or adn");
        }
        if self.run.replicates == 0 {
            bail!("run.replicates must be at least 1");
        }
        Ok(())
    }
}
