//! JSON instance and allocation files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cakecut::{Allocation, CakeInstance, Interval, SinglePeakedValuation};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub peak: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceOptions {
    #[serde(default)]
    pub waste_tolerant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    /// Slope shared by every agent that gives neither a density nor a slope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub options: InstanceOptions,
}

impl InstanceFile {
    pub fn from_instance(instance: &CakeInstance) -> Self {
        Self {
            version: FORMAT_VERSION,
            slope: None,
            agents: instance
                .agents()
                .iter()
                .map(|v| AgentSpec {
                    peak: v.peak(),
                    peak_density: Some(v.peak_density()),
                    slope: None,
                })
                .collect(),
            options: InstanceOptions {
                waste_tolerant: instance.waste_tolerant(),
            },
        }
    }

    pub fn to_instance(&self, force_waste_tolerant: bool) -> Result<CakeInstance> {
        check_version(self.version)?;
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let v = match (a.peak_density, a.slope.or(self.slope)) {
                    (Some(h), None) => SinglePeakedValuation::from_peak_density(a.peak, h),
                    (None, Some(k)) => SinglePeakedValuation::from_peak_slope(a.peak, k),
                    (Some(_), Some(_)) if a.slope.is_some() => {
                        bail!("agent {}: give peak_density or slope, not both", i + 1)
                    }
                    // an explicit density wins over the shared slope
                    (Some(h), Some(_)) => SinglePeakedValuation::from_peak_density(a.peak, h),
                    (None, None) => bail!("agent {}: needs peak_density or slope", i + 1),
                };
                v.with_context(|| format!("agent {}", i + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        let tolerant = force_waste_tolerant || self.options.waste_tolerant;
        Ok(CakeInstance::build(agents, tolerant)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationFile {
    pub version: u32,
    /// `pieces[i]` lists agent `i`'s intervals as `[start, end]` pairs.
    pub pieces: Vec<Vec<[f64; 2]>>,
}

impl AllocationFile {
    pub fn from_allocation(allocation: &Allocation) -> Self {
        Self {
            version: FORMAT_VERSION,
            pieces: allocation
                .pieces()
                .iter()
                .map(|p| p.iter().map(|iv| [iv.start, iv.end]).collect())
                .collect(),
        }
    }

    pub fn to_allocation(&self) -> Result<Allocation> {
        check_version(self.version)?;
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.iter().map(|&[s, e]| Interval::new(s, e)).collect())
            .collect();
        Ok(Allocation::new(pieces)?)
    }
}

fn check_version(version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        bail!("unsupported file version {version}, expected {FORMAT_VERSION}");
    }
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Formats `x` with 12 significant digits, dropping trailing zeros.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        return format!("{}e{e}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = trim_zeros(&format!("{x:.decimals$}")).to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn sig_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| sig(x)).collect::<Vec<_>>().join(" ")
}
