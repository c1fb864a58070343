//! Error rate, supply voltage and normalized processor power.
//!
//! Between the rated voltage (no timing errors) and the critical voltage
//! (error rate `eps_max`) the per-operation error rate follows a linear or
//! exponential curve. A region tolerating rate `eps` can therefore run at
//! `v(eps)`, and its share of dynamic power scales with `(v / v_rated)^2`.
//! Only the elastic units scale, so for a workload mix
//!
//! ```text
//! P = 1 - alpha * sum_i fraction_i * (1 - (v(eps_i) / v_rated)^2)
//! ```
//!
//! where `alpha` is the share of processor dynamic power drawn by the
//! elastic units and `fraction_i` the share of dynamic instructions running
//! in region `i` at rate `eps_i`. The default `alpha` comes from
//! [`calibrate_alu_share`] over the three bundled reference workloads.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Result of [`calibrate_alu_share`] on [`table2`] with the other defaults.
pub const CALIBRATED_ALU_SHARE: f64 = 0.622_070_501_013_237;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("voltage {v} V is outside [{v_crit}, {v_rated}] V")]
    Voltage { v: f64, v_crit: f64, v_rated: f64 },
    #[error("error rate {eps} is outside [0, {eps_max}]")]
    Rate { eps: f64, eps_max: f64 },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid workload: {0}")]
    Mix(String),
    #[error("reading workload {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curve {
    Linear,
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerParams {
    pub v_rated: f64,
    pub v_crit: f64,
    pub eps_max: f64,
    pub alu_share: f64,
    pub curve: Curve,
    /// Steepness of the exponential curve.
    pub k: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            v_rated: 1.0,
            v_crit: 0.7,
            eps_max: 0.5,
            alu_share: CALIBRATED_ALU_SHARE,
            curve: Curve::Exponential,
            k: 4.0,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), PowerError> {
        let bad = |m: &str| Err(PowerError::Params(m.to_string()));
        if !(self.v_crit > 0.0 && self.v_crit < self.v_rated) {
            return bad("need 0 < v_crit < v_rated");
        }
        if !(self.eps_max > 0.0 && self.eps_max <= 1.0) {
            return bad("need 0 < eps_max <= 1");
        }
        if !(0.0..=1.0).contains(&self.alu_share) {
            return bad("need 0 <= alu_share <= 1");
        }
        if self.curve == Curve::Exponential && !(self.k > 0.0 && self.k.is_finite()) {
            return bad("need k > 0 for the exponential curve");
        }
        Ok(())
    }
}

/// Per-operation error rate at supply voltage `v`.
pub fn error_rate_at_voltage(v: f64, p: &PowerParams) -> Result<f64, PowerError> {
    p.validate()?;
    if !(p.v_crit..=p.v_rated).contains(&v) {
        return Err(PowerError::Voltage {
            v,
            v_crit: p.v_crit,
            v_rated: p.v_rated,
        });
    }
    let t = (p.v_rated - v) / (p.v_rated - p.v_crit);
    Ok(match p.curve {
        Curve::Linear => p.eps_max * t,
        Curve::Exponential => p.eps_max * (p.k * t).exp_m1() / p.k.exp_m1(),
    })
}

/// Lowest voltage at which the error rate stays at `eps`.
pub fn voltage_for_error_rate(eps: f64, p: &PowerParams) -> Result<f64, PowerError> {
    p.validate()?;
    if !(0.0..=p.eps_max).contains(&eps) {
        return Err(PowerError::Rate {
            eps,
            eps_max: p.eps_max,
        });
    }
    let t = match p.curve {
        Curve::Linear => eps / p.eps_max,
        Curve::Exponential => (eps / p.eps_max * p.k.exp_m1()).ln_1p() / p.k,
    };
    Ok(p.v_rated - t * (p.v_rated - p.v_crit))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionLoad {
    pub name: String,
    /// Share of dynamic instructions executed in this region.
    pub fraction: f64,
    /// Tolerated error rate.
    pub rate: f64,
    /// Bit range the rate was measured at. Informational only: voltage
    /// depends on rate alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadMix {
    pub regions: Vec<RegionLoad>,
}

impl WorkloadMix {
    pub fn validate(&self, p: &PowerParams) -> Result<(), PowerError> {
        let mut total = 0.0;
        for r in &self.regions {
            if !(r.fraction >= 0.0 && r.fraction <= 1.0) {
                return Err(PowerError::Mix(format!("{}: fraction {} outside [0, 1]", r.name, r.fraction)));
            }
            if !(0.0..=p.eps_max).contains(&r.rate) {
                return Err(PowerError::Mix(format!(
                    "{}: rate {} outside [0, {}]",
                    r.name, r.rate, p.eps_max
                )));
            }
            total += r.fraction;
        }
        if total > 1.0 + 1e-12 {
            return Err(PowerError::Mix(format!("fractions sum to {total}, more than 1")));
        }
        Ok(())
    }

    /// Share of dynamic instructions running at a non-zero error rate.
    pub fn elastic_fraction(&self) -> f64 {
        self.regions.iter().filter(|r| r.rate > 0.0).map(|r| r.fraction).sum()
    }
}

/// `sum_i fraction_i * (1 - (v_i / v_rated)^2)`: the power saved per unit of
/// `alpha`.
pub fn elastic_savings(mix: &WorkloadMix, p: &PowerParams) -> Result<f64, PowerError> {
    p.validate()?;
    mix.validate(p)?;
    let mut s = 0.0;
    for r in &mix.regions {
        let v = voltage_for_error_rate(r.rate, p)?;
        s += r.fraction * (1.0 - (v / p.v_rated).powi(2));
    }
    Ok(s)
}

/// Processor power relative to fully reliable operation.
pub fn normalized_power(mix: &WorkloadMix, p: &PowerParams) -> Result<f64, PowerError> {
    Ok(1.0 - p.alu_share * elastic_savings(mix, p)?)
}

/// Picks `alpha` minimizing the largest absolute error against the target
/// powers, with every other parameter taken from `p`.
pub fn calibrate_alu_share(targets: &[(WorkloadMix, f64)], p: &PowerParams) -> Result<f64, PowerError> {
    let savings = targets
        .iter()
        .map(|(m, t)| elastic_savings(m, p).map(|s| (s, *t)))
        .collect::<Result<Vec<_>, _>>()?;
    // The worst-case error is convex in alpha, so a ternary search finds the
    // minimax point.
    let worst = |a: f64| {
        savings
            .iter()
            .map(|&(s, t)| (1.0 - a * s - t).abs())
            .fold(0.0, f64::max)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if worst(m1) < worst(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// A workload file: a mix plus optional parameter overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub regions: Vec<RegionLoad>,
    #[serde(default)]
    pub params: PowerParams,
}

impl WorkloadFile {
    pub fn from_json(text: &str) -> Result<Self, PowerError> {
        let f: WorkloadFile = serde_json::from_str(text).map_err(|e| PowerError::Mix(e.to_string()))?;
        f.params.validate()?;
        f.mix().validate(&f.params)?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, PowerError> {
        let text = std::fs::read_to_string(path).map_err(|e| PowerError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn mix(&self) -> WorkloadMix {
        WorkloadMix {
            regions: self.regions.clone(),
        }
    }
}

/// The bundled reference workloads as `(name, file, reference power)`.
pub fn table2() -> [(&'static str, WorkloadFile, f64); 3] {
    let load = |s: &str| WorkloadFile::from_json(s).expect("bundled workload parses");
    [
        ("g721", load(include_str!("../workloads/table2_g721.json")), 0.89),
        ("jpeg", load(include_str!("../workloads/table2_jpeg.json")), 0.88),
        ("h263", load(include_str!("../workloads/table2_h263.json")), 0.87),
    ]
}
