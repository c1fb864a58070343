//! Experiment configuration files, output stamps and the CI manifest.
//!
//! An experiment file describes one sweep:
//!
//! ```json
//! {
//!   "kernel": "mini_video",
//!   "seed": 7,
//!   "trials": 1000,
//!   "sweep": { "mode": "rate", "target": "all", "rates": [0, 0.02, 0.04], "bits": "0-7" },
//!   "outputs": { "csv": "video_rate.csv", "svg": "video_rate.svg" }
//! }
//! ```
//!
//! [`ExperimentConfig::resolve`] validates everything and fills in defaults,
//! so the resolved value written into the `.meta.json` stamp replays the run
//! exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alu::{RegionTable, RELIABLE};
use crate::codec::Kernel;
use crate::corpus::CorpusSpec;
use crate::fault::{BitRange, FaultError, FlipModel};
use crate::io::{write_atomic, IoError};
use crate::plot::{self, Series, Show};
use crate::power::CALIBRATED_ALU_SHARE;
use crate::rng::RNG_ALGORITHM;
use crate::sweep::{
    self, check_region_names, SweepError, SweepOptions, SweepResult, Target, Workload, CI_TRIALS, DEFAULT_QUALITY,
    DEFAULT_SWEEP_RATE, DEFAULT_TRIALS,
};

/// Version tag of the config, CSV and stamp formats.
pub const FORMAT_VERSION: &str = "efid-format-1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn default_quality() -> u8 {
    DEFAULT_QUALITY
}

fn default_trials() -> u32 {
    DEFAULT_TRIALS
}

fn default_rate() -> f64 {
    DEFAULT_SWEEP_RATE
}

fn default_rate_bits() -> BitRange {
    BitRange::lsb(7).expect("valid range")
}

/// The swept parameter and its settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Fixed rate; one row per bit range (default [0,0] ... [0,31]).
    Bits {
        target: Target,
        #[serde(default = "default_rate")]
        rate: f64,
        #[serde(default)]
        ranges: Option<Vec<BitRange>>,
        #[serde(default)]
        pinned: Option<Vec<String>>,
    },
    /// Fixed bit range; one row per rate.
    Rate {
        target: Target,
        rates: Vec<f64>,
        #[serde(default = "default_rate_bits")]
        bits: BitRange,
        /// Regions held reliable. Defaults to the kernel's sensitive regions
        /// when the target is "all".
        #[serde(default)]
        pinned: Option<Vec<String>>,
    },
    /// One row for an explicit region table.
    Table { regions: RegionTable },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: Kernel,
    /// Defaults to the kernel's standard corpus input.
    #[serde(default)]
    pub corpus: Option<CorpusSpec>,
    #[serde(default = "default_quality")]
    pub quality: u8,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub model: FlipModel,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// Validates every field and fills in defaults.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let kernel = self.kernel;
        let corpus = self.corpus.take().unwrap_or_else(|| CorpusSpec::standard(kernel));
        if corpus.kernel() != kernel {
            return Err(SweepError::CorpusMismatch(kernel).into());
        }
        self.corpus = Some(corpus);
        if !(1..=100).contains(&self.quality) {
            return Err(invalid(format!("quality {} is outside 1-100", self.quality)));
        }
        if self.trials == 0 {
            return Err(SweepError::NoTrials.into());
        }
        let check_rate = |r: f64| -> Result<(), ConfigError> {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(FaultError::BadRate(r).into())
            }
        };
        let check_target = |t: &Target| match t {
            Target::All => Ok(()),
            Target::Region(r) => check_region_names(kernel, [r.as_str()]),
        };
        match &mut self.sweep {
            SweepSpec::Bits {
                target,
                rate,
                ranges,
                pinned,
            } => {
                check_target(target)?;
                check_rate(*rate)?;
                let r = ranges.get_or_insert_with(sweep::all_lsb_ranges);
                if r.is_empty() {
                    return Err(invalid("bit sweep needs at least one range"));
                }
                let p = pinned.get_or_insert_with(Vec::new);
                check_region_names(kernel, p.iter().map(String::as_str))?;
            }
            SweepSpec::Rate {
                target, rates, pinned, ..
            } => {
                check_target(target)?;
                if rates.is_empty() {
                    return Err(invalid("rate sweep needs at least one rate"));
                }
                for &r in rates.iter() {
                    check_rate(r)?;
                }
                let p = pinned.get_or_insert_with(|| sweep::default_pinned(kernel, target));
                check_region_names(kernel, p.iter().map(String::as_str))?;
            }
            SweepSpec::Table { regions } => {
                check_region_names(kernel, regions.keys().map(String::as_str).filter(|n| *n != RELIABLE))?;
            }
        }
        Ok(self)
    }

    pub fn options(&self, threads: Option<usize>) -> SweepOptions {
        SweepOptions {
            trials: self.trials,
            master_seed: self.seed,
            model: self.model,
            threads,
        }
    }

    /// Runs a resolved config.
    pub fn run(&self, threads: Option<usize>) -> Result<SweepResult, ConfigError> {
        let corpus = self.corpus.as_ref().ok_or_else(|| invalid("config is not resolved"))?;
        let w = Workload::prepare(corpus, self.quality)?;
        self.run_on(&w, threads)
    }

    /// Runs a resolved config on an already prepared workload.
    pub fn run_on(&self, w: &Workload, threads: Option<usize>) -> Result<SweepResult, ConfigError> {
        let opts = self.options(threads);
        let unresolved = || invalid("config is not resolved");
        Ok(match &self.sweep {
            SweepSpec::Bits {
                target,
                rate,
                ranges,
                pinned,
            } => sweep::bit_range_sweep(
                w,
                target,
                *rate,
                ranges.as_deref().ok_or_else(unresolved)?,
                pinned.as_deref().ok_or_else(unresolved)?,
                &opts,
            )?,
            SweepSpec::Rate {
                target,
                rates,
                bits,
                pinned,
            } => sweep::error_rate_sweep(w, target, rates, *bits, pinned.as_deref().ok_or_else(unresolved)?, &opts)?,
            SweepSpec::Table { regions } => SweepResult {
                kernel: self.kernel,
                target: Target::All,
                swept: sweep::SweptParam::Rate,
                rows: vec![sweep::table_row(w, regions, "table", &opts)?],
            },
        })
    }
}

/// Provenance written next to every output file as `<file>.meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stamp {
    pub format: &'static str,
    pub tool_version: &'static str,
    pub rng: &'static str,
    pub master_seed: u64,
    pub alu_share: f64,
    pub config: serde_json::Value,
}

impl Stamp {
    pub fn new(master_seed: u64, config: serde_json::Value) -> Self {
        Stamp {
            format: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            rng: RNG_ALGORITHM,
            master_seed,
            alu_share: CALIBRATED_ALU_SHARE,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stamp serializes");
        s.push('\n');
        s
    }
}

/// Sidecar path of an output file.
pub fn stamp_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    output.with_file_name(name)
}

/// One figure of the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub id: String,
    pub kernel: Kernel,
    pub mode: sweep::SweptParam,
    #[serde(default)]
    pub show: Show,
    pub targets: Vec<Target>,
}

/// A batch of sweeps reproducing a set of figures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ci_trials")]
    pub trials: u32,
    #[serde(default = "default_quality")]
    pub quality: u8,
    #[serde(default = "default_rate")]
    pub bit_sweep_rate: f64,
    pub rates: Vec<f64>,
    #[serde(default = "default_rate_bits")]
    pub rate_sweep_bits: BitRange,
    pub panels: Vec<Panel>,
}

fn default_ci_trials() -> u32 {
    CI_TRIALS
}

/// One sweep of a manifest, shared by every panel that plots it.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRun {
    pub file_stem: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// The bundled nine-panel manifest at CI trial counts.
    pub fn fig2_ci() -> Self {
        serde_json::from_str(include_str!("../manifests/fig2_ci.json")).expect("bundled manifest parses")
    }

    pub fn with_trials(mut self, trials: u32) -> Self {
        self.trials = trials;
        self
    }

    pub fn run_stem(kernel: Kernel, mode: sweep::SweptParam, target: &Target) -> String {
        format!("{}_{}_{}", kernel, mode.name(), target)
    }

    /// Distinct sweeps needed by the panels, resolved, in first-use order.
    pub fn runs(&self) -> Result<Vec<ManifestRun>, ConfigError> {
        let mut seen = BTreeMap::new();
        let mut runs = Vec::new();
        for p in &self.panels {
            if p.targets.is_empty() {
                return Err(invalid(format!("panel {} has no targets", p.id)));
            }
            for t in &p.targets {
                let stem = Self::run_stem(p.kernel, p.mode, t);
                if seen.insert(stem.clone(), ()).is_some() {
                    continue;
                }
                let sweep = match p.mode {
                    sweep::SweptParam::Bits => SweepSpec::Bits {
                        target: t.clone(),
                        rate: self.bit_sweep_rate,
                        ranges: None,
                        pinned: None,
                    },
                    sweep::SweptParam::Rate => SweepSpec::Rate {
                        target: t.clone(),
                        rates: self.rates.clone(),
                        bits: self.rate_sweep_bits,
                        pinned: None,
                    },
                };
                let config = ExperimentConfig {
                    kernel: p.kernel,
                    corpus: None,
                    quality: self.quality,
                    seed: self.seed,
                    trials: self.trials,
                    model: FlipModel::default(),
                    sweep,
                    outputs: Outputs {
                        csv: Some(PathBuf::from(format!("{stem}.csv"))),
                        svg: None,
                    },
                }
                .resolve()?;
                runs.push(ManifestRun { file_stem: stem, config });
            }
        }
        Ok(runs)
    }
}

/// Files written by [`Manifest::execute`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ManifestOutput {
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

impl Manifest {
    /// Runs every sweep once, then writes one CSV per sweep and one SVG per
    /// panel into `out_dir`, each with a stamp. `progress` is told the stem
    /// of every sweep as it starts.
    pub fn execute(
        &self,
        out_dir: &Path,
        threads: Option<usize>,
        mut progress: impl FnMut(&str),
    ) -> Result<ManifestOutput, ManifestError> {
        let runs = self.runs()?;
        let mut workloads: BTreeMap<Kernel, Workload> = BTreeMap::new();
        let mut results = BTreeMap::new();
        let mut out = ManifestOutput::default();
        for run in &runs {
            progress(&run.file_stem);
            let w = match workloads.entry(run.config.kernel) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    let corpus = run.config.corpus.as_ref().ok_or_else(|| invalid("config is not resolved"))?;
                    e.insert(Workload::prepare(corpus, run.config.quality).map_err(ConfigError::from)?)
                }
            };
            let result = run.config.run_on(w, threads)?;
            let csv = out_dir.join(format!("{}.csv", run.file_stem));
            write_with_stamp(&csv, sweep::summarize_csv(&result).map_err(ConfigError::from)?.as_bytes(), self.seed, &run.config)?;
            out.csv.push(csv);
            results.insert(run.file_stem.clone(), result);
        }
        for p in &self.panels {
            let series: Vec<Series> = p
                .targets
                .iter()
                .map(|t| Series {
                    name: t.to_string(),
                    rows: results[&Self::run_stem(p.kernel, p.mode, t)].rows.clone(),
                })
                .collect();
            let title = format!("Fig {}: {} {} sweep", p.id, p.kernel, p.mode.name());
            let svg = plot::plot_series(&title, p.mode, p.show, &series)?;
            let path = out_dir.join(format!("fig{}.svg", p.id));
            write_with_stamp(&path, svg.as_bytes(), self.seed, p)?;
            out.svg.push(path);
        }
        Ok(out)
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Writes `bytes` and its stamp atomically.
pub fn write_with_stamp(path: &Path, bytes: &[u8], seed: u64, config: &impl Serialize) -> Result<(), IoError> {
    let value = serde_json::to_value(config).expect("configs serialize");
    write_atomic(path, bytes)?;
    write_atomic(&stamp_path(path), Stamp::new(seed, value).to_json().as_bytes())
}
