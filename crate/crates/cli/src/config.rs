//! File-based run configuration. One TOML file can hold a table per
//! subcommand; command-line flags override file values, which override the
//! built-in defaults. Unknown keys are rejected rather than silently
//! ignored.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub meander: MeanderConfig,
    #[serde(default)]
    pub ibp: IbpConfig,
    #[serde(default)]
    pub sweep: SweepFileConfig,
    #[serde(default)]
    pub selftest: SelftestConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_modes: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    /// Optional nonconstant initial coefficients a_1.. (a_0 is pinned to c).
    pub x0_modes: Option<Vec<f64>>,
    /// Keep every k-th snapshot in the trajectory CSV.
    pub snapshot_every: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub m_points: Option<usize>,
    pub c: Option<f64>,
    pub eps: Option<f64>,
    pub max_proposals: Option<u64>,
    /// csv or binary
    pub format: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanderConfig {
    pub n: Option<usize>,
    pub m_points: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpConfig {
    pub identity: Option<String>,
    pub phi: Option<String>,
    pub h: Option<String>,
    pub n: Option<usize>,
    pub m_points: Option<usize>,
    pub c: Option<f64>,
    pub eps: Option<f64>,
    pub bandwidth: Option<f64>,
    pub indicator: Option<String>,
    pub check_sigmas: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFileConfig {
    pub eps_list: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub n_modes: Option<usize>,
    pub dt_over_eps: Option<f64>,
    pub t_run: Option<f64>,
    pub burn_in: Option<f64>,
    pub thin: Option<f64>,
    pub theta_probes: Option<Vec<f64>>,
    pub n_reference: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestConfig {
    pub fast: Option<bool>,
    pub only: Option<Vec<u32>>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = toml::from_str(&text)?;
        Ok(cfg)
    }
}
