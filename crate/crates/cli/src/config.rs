//! Run settings: command-line flags layered over an optional TOML file of the
//! same keys.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use npgi_core::domains::{build_mav, build_rovers, MavParams};
use npgi_core::policy::DEFAULT_ENUMERATION_CAP;
use npgi_core::{parse_problem, Mode, Problem, SolverConfig};

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Problem source: `mav`, `rovers` or `file:<path>`.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Nodes per policy layer.
    #[arg(long)]
    pub width: Option<usize>,
    /// Backward-pass objective: `exact` or `lb`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Maximum backward passes per restart.
    #[arg(long)]
    pub passes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Wall-clock limit such as `90s`, `10m` or `2h`.
    #[arg(long)]
    pub time_limit: Option<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Enumeration limit for exact evaluation and the oracle.
    #[arg(long)]
    pub cap: Option<u128>,
    /// TOML file with any of the flag keys (and `mav_*` parameters).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    domain: Option<String>,
    horizon: Option<usize>,
    width: Option<usize>,
    mode: Option<String>,
    restarts: Option<usize>,
    passes: Option<usize>,
    seed: Option<u64>,
    time_limit: Option<String>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    cap: Option<u64>,
    mav_stay_prob_friendly: Option<f64>,
    mav_stay_prob_hostile: Option<f64>,
    mav_camera_accuracy: Option<[f64; 4]>,
    mav_radar_accuracy: Option<[f64; 4]>,
    mav_interference_penalty: Option<f64>,
}

/// Fully resolved settings, echoed into run manifests.
#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Settings {
    pub domain: String,
    pub horizon: Option<usize>,
    pub width: usize,
    pub mode: String,
    pub restarts: usize,
    pub passes: usize,
    pub seed: u64,
    pub time_limit: Option<String>,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub cap: u128,
    pub mav: MavSettings,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct MavSettings {
    pub stay_prob_friendly: f64,
    pub stay_prob_hostile: f64,
    pub camera_accuracy: [f64; 4],
    pub radar_accuracy: [f64; 4],
    pub interference_penalty: f64,
}

impl From<&MavSettings> for MavParams {
    fn from(m: &MavSettings) -> Self {
        MavParams {
            stay_prob_friendly: m.stay_prob_friendly,
            stay_prob_hostile: m.stay_prob_hostile,
            camera_accuracy: m.camera_accuracy,
            radar_accuracy: m.radar_accuracy,
            interference_penalty: m.interference_penalty,
        }
    }
}

pub const DEFAULT_HORIZON: usize = 2;
pub const DEFAULT_OUT: &str = "npgi-out";

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Settings> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str::<FileConfig>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let defaults = MavParams::default();
        let settings = Settings {
            domain: flags
                .domain
                .clone()
                .or(file.domain)
                .context("no problem given; pass --domain mav, rovers or file:<path>")?,
            horizon: flags.horizon.or(file.horizon),
            width: flags.width.or(file.width).unwrap_or(2),
            mode: flags
                .mode
                .clone()
                .or(file.mode)
                .unwrap_or_else(|| "lb".into()),
            restarts: flags.restarts.or(file.restarts).unwrap_or(1),
            passes: flags.passes.or(file.passes).unwrap_or(30),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            time_limit: flags.time_limit.clone().or(file.time_limit),
            jobs: flags.jobs.or(file.jobs).unwrap_or(0),
            out: flags.out.clone().or(file.out),
            cap: flags
                .cap
                .or(file.cap.map(u128::from))
                .unwrap_or(DEFAULT_ENUMERATION_CAP),
            mav: MavSettings {
                stay_prob_friendly: file
                    .mav_stay_prob_friendly
                    .unwrap_or(defaults.stay_prob_friendly),
                stay_prob_hostile: file
                    .mav_stay_prob_hostile
                    .unwrap_or(defaults.stay_prob_hostile),
                camera_accuracy: file.mav_camera_accuracy.unwrap_or(defaults.camera_accuracy),
                radar_accuracy: file.mav_radar_accuracy.unwrap_or(defaults.radar_accuracy),
                interference_penalty: file
                    .mav_interference_penalty
                    .unwrap_or(defaults.interference_penalty),
            },
        };
        settings.mode()?;
        settings.time_limit()?;
        Ok(settings)
    }

    /// Artifact directory for commands that always write results.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn mode(&self) -> Result<Mode> {
        match self.mode.as_str() {
            "exact" => Ok(Mode::Exact),
            "lb" => Ok(Mode::LowerBound),
            other => bail!("unknown mode '{other}'; expected exact or lb"),
        }
    }

    pub fn time_limit(&self) -> Result<Option<Duration>> {
        self.time_limit
            .as_deref()
            .map(|s| {
                humantime::parse_duration(s).with_context(|| format!("invalid time limit '{s}'"))
            })
            .transpose()
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig {
            mode: self.mode()?,
            max_passes: self.passes,
            time_limit: self.time_limit()?,
            rng_seed: self.seed,
            restart_count: self.restarts,
            width: self.width,
            jobs: self.jobs,
            enumeration_cap: self.cap,
        })
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_with_horizon(self.horizon)
    }

    /// Builds the configured problem, overriding the horizon when given.
    pub fn problem_with_horizon(&self, horizon: Option<usize>) -> Result<Problem> {
        let problem = match self.domain.as_str() {
            "mav" => build_mav(&(&self.mav).into(), horizon.unwrap_or(DEFAULT_HORIZON))?,
            "rovers" => build_rovers(horizon.unwrap_or(DEFAULT_HORIZON))?,
            other => match other.strip_prefix("file:") {
                Some(path) => {
                    let problem = load_problem(Path::new(path))?;
                    match horizon {
                        Some(h) if h != problem.horizon => problem.with_horizon(h),
                        _ => problem,
                    }
                }
                None => bail!("unknown domain '{other}'; expected mav, rovers or file:<path>"),
            },
        };
        Ok(problem)
    }
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_problem(&text).with_context(|| format!("loading problem {}", path.display()))
}
