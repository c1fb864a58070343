//! Seeded Monte-Carlo trials and the two sweep protocols.
//!
//! A trial decodes a reliably encoded workload with a [`FidelityContext`]
//! rooted at `derive_stream(master_seed, [trial_index])` and scores the
//! output against the original (pre-compression) input. Trials run in
//! parallel on a rayon pool but are collected and reduced in trial order, so
//! results do not depend on the number of threads.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alu::{FidelityContext, RegionTable, UsageError};
use crate::codec::{adpcm, jpeg, video, Bitstream, DecodeFailure, EncodeError, FailureKind, Kernel};
use crate::corpus::{CorpusSpec, Media};
use crate::fault::{BitRange, FaultError, FaultSpec, FlipModel};
use crate::media::MediaError;
use crate::metrics::{psnr, snr_seg, MetricError, QualityScore, SNRSEG_SEGMENT};
use crate::rng::derive_stream;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "EFID_THREADS";
pub const DEFAULT_TRIALS: u32 = 1000;
/// Trial count of the CI sweep profile.
pub const CI_TRIALS: u32 = 100;
pub const DEFAULT_QUALITY: u8 = 75;
pub const DEFAULT_SWEEP_RATE: f64 = 0.04;

pub const CSV_HEADER: &str = "swept_param,value,trials,successes,success_fraction,mean_quality_db,std_quality_db,fail_invalid_code,fail_index,fail_stream,fail_limit";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown region {name:?} for kernel {kernel} (expected one of: {expected})")]
    UnknownRegion {
        name: String,
        kernel: Kernel,
        expected: String,
    },
    #[error("corpus kind does not match kernel {0}")]
    CorpusMismatch(Kernel),
    #[error("sweep has no rows")]
    Empty,
    #[error("trial count must be positive")]
    NoTrials,
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("scoring failed: {0}")]
    Metric(#[from] MetricError),
    #[error("reference decode failed: {0}")]
    Reference(DecodeFailure),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// An encoded input together with the original it is scored against.
#[derive(Clone, Debug)]
pub struct Workload {
    pub kernel: Kernel,
    pub corpus: CorpusSpec,
    pub quality: u8,
    pub reference: Media,
    pub bitstream: Bitstream,
}

impl Workload {
    pub fn prepare(corpus: &CorpusSpec, quality: u8) -> Result<Self, SweepError> {
        let reference = corpus.generate()?;
        let kernel = corpus.kernel();
        let bitstream = match &reference {
            Media::Audio(a) => adpcm::encode(a)?,
            Media::Image(i) => jpeg::encode(i, quality)?,
            Media::Video(v) => video::encode(v, quality)?,
        };
        Ok(Workload {
            kernel,
            corpus: corpus.clone(),
            quality,
            reference,
            bitstream,
        })
    }

    /// The standard corpus input for `kernel` at the default quality.
    pub fn standard(kernel: Kernel) -> Self {
        Self::prepare(&CorpusSpec::standard(kernel), DEFAULT_QUALITY).expect("standard corpus encodes")
    }

    /// Decodes with `ctx` and scores the result against the original input.
    pub fn decode_and_score(&self, ctx: &mut FidelityContext) -> Result<Outcome, MetricError> {
        let bs = &self.bitstream;
        Ok(match &self.reference {
            Media::Audio(r) => match adpcm::decode(bs, ctx) {
                Ok(out) => Outcome::Success(snr_seg(r, &out, SNRSEG_SEGMENT)?),
                Err(f) => Outcome::Failure(f),
            },
            Media::Image(r) => match jpeg::decode(bs, ctx) {
                Ok(out) => Outcome::Success(psnr(r, &out)?),
                Err(f) => Outcome::Failure(f),
            },
            Media::Video(r) => match video::decode(bs, ctx) {
                Ok(out) => Outcome::Success(psnr(r, &out)?),
                Err(f) => Outcome::Failure(f),
            },
        })
    }

    /// Quality of the fault-free decode.
    pub fn baseline(&self) -> Result<QualityScore, SweepError> {
        match self.decode_and_score(&mut FidelityContext::reliable())? {
            Outcome::Success(q) => Ok(q),
            Outcome::Failure(f) => Err(SweepError::Reference(f)),
        }
    }

    /// Runs one trial.
    pub fn run_trial(&self, regions: &RegionTable, master_seed: u64, trial: u64) -> Result<Outcome, SweepError> {
        let mut ctx = FidelityContext::new(regions, derive_stream(master_seed, &[trial.into()]))?;
        Ok(self.decode_and_score(&mut ctx)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Success(QualityScore),
    Failure(DecodeFailure),
}

impl Outcome {
    pub fn quality(&self) -> Option<f64> {
        match self {
            Outcome::Success(q) => Some(q.value),
            Outcome::Failure(_) => None,
        }
    }
}

/// Everything that determines one trial's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub kernel: Kernel,
    pub corpus: CorpusSpec,
    pub quality: u8,
    pub regions: RegionTable,
    pub master_seed: u64,
    pub trial: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: u64,
    #[serde(flatten)]
    pub outcome: Outcome,
}

/// Encodes the configured input and runs one trial on it. Sweeps reuse one
/// [`Workload`] instead.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialResult, SweepError> {
    if cfg.corpus.kernel() != cfg.kernel {
        return Err(SweepError::CorpusMismatch(cfg.kernel));
    }
    check_region_names(cfg.kernel, cfg.regions.keys().map(String::as_str))?;
    let w = Workload::prepare(&cfg.corpus, cfg.quality)?;
    Ok(TrialResult {
        trial: cfg.trial,
        outcome: w.run_trial(&cfg.regions, cfg.master_seed, cfg.trial)?,
    })
}

/// Which regions a sweep injects into. Serialized as `"all"` or the region
/// name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Target {
    All,
    Region(String),
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::All => f.write_str("all"),
            Target::Region(r) => f.write_str(r),
        }
    }
}

impl From<String> for Target {
    fn from(s: String) -> Self {
        if s == "all" {
            Target::All
        } else {
            Target::Region(s)
        }
    }
}

impl From<Target> for String {
    fn from(t: Target) -> Self {
        t.to_string()
    }
}

impl std::str::FromStr for Target {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Target::from(s.to_string()))
    }
}

pub fn check_region_names<'a>(kernel: Kernel, names: impl IntoIterator<Item = &'a str>) -> Result<(), SweepError> {
    for name in names {
        if !kernel.regions().contains(&name) {
            return Err(SweepError::UnknownRegion {
                name: name.to_string(),
                kernel,
                expected: kernel.regions().join(", "),
            });
        }
    }
    Ok(())
}

/// Region table applying `spec` to the target, with `pinned` regions held
/// reliable.
pub fn region_table(kernel: Kernel, target: &Target, spec: FaultSpec, pinned: &[String]) -> Result<RegionTable, SweepError> {
    check_region_names(kernel, pinned.iter().map(String::as_str))?;
    let mut t = RegionTable::new();
    match target {
        Target::All => {
            for r in kernel.regions() {
                if !pinned.iter().any(|p| p == r) {
                    t.insert(r.to_string(), spec);
                }
            }
        }
        Target::Region(r) => {
            check_region_names(kernel, [r.as_str()])?;
            if !pinned.contains(r) {
                t.insert(r.clone(), spec);
            }
        }
    }
    Ok(t)
}

/// Default pinned regions for a rate sweep over `target`.
pub fn default_pinned(kernel: Kernel, target: &Target) -> Vec<String> {
    match target {
        Target::All => kernel.pinned_reliable().iter().map(|s| s.to_string()).collect(),
        Target::Region(_) => Vec::new(),
    }
}

/// Worker count: an explicit request, else [`THREADS_ENV`], else rayon's
/// default.
pub fn thread_count(requested: Option<usize>) -> Option<usize> {
    requested.or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok()).filter(|&n| n > 0)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, SweepError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads) {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| SweepError::Pool(e.to_string()))
}

/// Runs trials `0..trials`, returning outcomes in trial order.
pub fn run_trials(
    w: &Workload,
    regions: &RegionTable,
    master_seed: u64,
    trials: u32,
    threads: Option<usize>,
) -> Result<Vec<Outcome>, SweepError> {
    if trials == 0 {
        return Err(SweepError::NoTrials);
    }
    // Validate once up front so worker errors can only be metric errors.
    FidelityContext::new(regions, derive_stream(master_seed, &[]))?;
    pool(threads)?.install(|| {
        (0..u64::from(trials))
            .into_par_iter()
            .map(|t| w.run_trial(regions, master_seed, t))
            .collect()
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FailureCounts {
    pub invalid_code: u32,
    pub index: u32,
    pub stream: u32,
    pub limit: u32,
}

impl FailureCounts {
    pub fn add(&mut self, kind: FailureKind) {
        match kind {
            FailureKind::InvalidCode => self.invalid_code += 1,
            FailureKind::IndexOutOfRange => self.index += 1,
            FailureKind::StreamExhausted => self.stream += 1,
            FailureKind::LimitExceeded => self.limit += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.invalid_code + self.index + self.stream + self.limit
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    /// Numeric position of the row: the rate, or the top bit of the range.
    pub value: f64,
    /// How the value prints in CSV.
    pub label: String,
    pub trials: u32,
    pub successes: u32,
    pub success_fraction: f64,
    /// Over successful trials only.
    pub mean_quality_db: Option<f64>,
    pub std_quality_db: Option<f64>,
    pub failures: FailureCounts,
}

impl SweepRow {
    /// Aggregates outcomes in the given order.
    pub fn from_outcomes(value: f64, label: String, outcomes: &[Outcome]) -> Self {
        let mut failures = FailureCounts::default();
        let mut qs = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            match o {
                Outcome::Success(q) => qs.push(q.value),
                Outcome::Failure(f) => failures.add(f.kind),
            }
        }
        let n = qs.len();
        let mean = (n > 0).then(|| qs.iter().sum::<f64>() / n as f64);
        let std = mean.map(|m| {
            if n < 2 {
                0.0
            } else {
                (qs.iter().map(|q| (q - m) * (q - m)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        });
        SweepRow {
            value,
            label,
            trials: outcomes.len() as u32,
            successes: n as u32,
            success_fraction: n as f64 / outcomes.len().max(1) as f64,
            mean_quality_db: mean,
            std_quality_db: std,
            failures,
        }
    }

    pub fn failure_fraction(&self) -> f64 {
        1.0 - self.success_fraction
    }

    /// Standard error of the mean quality.
    pub fn quality_sem(&self) -> Option<f64> {
        Some(self.std_quality_db? / f64::from(self.successes).sqrt())
    }

    /// Standard error of the success fraction.
    pub fn fraction_sem(&self) -> f64 {
        let p = self.success_fraction;
        (p * (1.0 - p) / f64::from(self.trials.max(1))).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParam {
    Bits,
    Rate,
}

impl SweptParam {
    pub fn name(self) -> &'static str {
        match self {
            SweptParam::Bits => "bits",
            SweptParam::Rate => "rate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub kernel: Kernel,
    pub target: Target,
    pub swept: SweptParam,
    pub rows: Vec<SweepRow>,
}

/// Common sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub trials: u32,
    pub master_seed: u64,
    pub model: FlipModel,
    /// Worker threads; `None` defers to [`THREADS_ENV`].
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            trials: DEFAULT_TRIALS,
            master_seed: 0,
            model: FlipModel::SingleBitUniform,
            threads: None,
        }
    }
}

/// The LSB-anchored ranges [0,0], [0,1], ..., [0,31].
pub fn all_lsb_ranges() -> Vec<BitRange> {
    (0..32).map(|hi| BitRange::lsb(hi).expect("hi below 32")).collect()
}

/// Fixed rate, one row per bit range.
pub fn bit_range_sweep(
    w: &Workload,
    target: &Target,
    rate: f64,
    ranges: &[BitRange],
    pinned: &[String],
    opts: &SweepOptions,
) -> Result<SweepResult, SweepError> {
    if ranges.is_empty() {
        return Err(SweepError::Empty);
    }
    let mut rows = Vec::with_capacity(ranges.len());
    for &range in ranges {
        let spec = FaultSpec::new(rate, range, opts.model)?;
        let table = region_table(w.kernel, target, spec, pinned)?;
        let outcomes = run_trials(w, &table, opts.master_seed, opts.trials, opts.threads)?;
        rows.push(SweepRow::from_outcomes(f64::from(range.hi()), range.to_string(), &outcomes));
    }
    Ok(SweepResult {
        kernel: w.kernel,
        target: target.clone(),
        swept: SweptParam::Bits,
        rows,
    })
}

/// Fixed bit range, one row per rate.
pub fn error_rate_sweep(
    w: &Workload,
    target: &Target,
    rates: &[f64],
    range: BitRange,
    pinned: &[String],
    opts: &SweepOptions,
) -> Result<SweepResult, SweepError> {
    if rates.is_empty() {
        return Err(SweepError::Empty);
    }
    let mut rows = Vec::with_capacity(rates.len());
    for &rate in rates {
        let spec = FaultSpec::new(rate, range, opts.model)?;
        let table = region_table(w.kernel, target, spec, pinned)?;
        let outcomes = run_trials(w, &table, opts.master_seed, opts.trials, opts.threads)?;
        rows.push(SweepRow::from_outcomes(rate, format!("{rate:.6}"), &outcomes));
    }
    Ok(SweepResult {
        kernel: w.kernel,
        target: target.clone(),
        swept: SweptParam::Rate,
        rows,
    })
}

/// One row over an arbitrary region table.
pub fn table_row(w: &Workload, table: &RegionTable, label: &str, opts: &SweepOptions) -> Result<SweepRow, SweepError> {
    let outcomes = run_trials(w, table, opts.master_seed, opts.trials, opts.threads)?;
    Ok(SweepRow::from_outcomes(0.0, label.to_string(), &outcomes))
}

fn opt6(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// CSV with [`CSV_HEADER`]; mean and std are empty for rows without
/// successes.
pub fn summarize_csv(result: &SweepResult) -> Result<String, SweepError> {
    if result.rows.is_empty() {
        return Err(SweepError::Empty);
    }
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &result.rows {
        let f = &r.failures;
        writeln!(
            s,
            "{},{},{},{},{:.6},{},{},{},{},{},{}",
            result.swept.name(),
            r.label,
            r.trials,
            r.successes,
            r.success_fraction,
            opt6(r.mean_quality_db),
            opt6(r.std_quality_db),
            f.invalid_code,
            f.index,
            f.stream,
            f.limit
        )
        .expect("writing to a String");
    }
    Ok(s)
}
