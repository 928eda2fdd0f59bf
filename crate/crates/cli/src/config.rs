//! Experiment configuration files.
//!
//! Files are TOML with the unit spelled out in every dimensional key
//! (`*_per_km2`, `*_m`, `*_db`, `*_dbm`, `*_hz`). Conversion to the SI
//! quantities used by the engines happens in [`ScenarioSpec::to_params`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use riscov::geometry::LinkMode;
use riscov::params::{GreedyTarget, LengthLaw, VlosSensingPath, EQUAL_ENERGY_DEPLOYMENTS_KM2};
use riscov::units::{db_to_linear, dbm_to_watts, per_km2_to_per_m2};
use riscov::ScenarioParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Analyze,
    #[default]
    Both,
}

impl Mode {
    pub fn simulates(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both)
    }

    pub fn analyzes(self) -> bool {
        matches!(self, Mode::Analyze | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockageMode {
    Explicit,
    #[default]
    Thinning,
}

impl From<BlockageMode> for LinkMode {
    fn from(m: BlockageMode) -> Self {
        match m {
            BlockageMode::Explicit => LinkMode::Explicit,
            BlockageMode::Thinning => LinkMode::Thinning,
        }
    }
}

/// Scenario in file units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub lambda_b_per_km2: f64,
    pub lambda_r_per_km2: f64,
    pub lambda_l_per_km2: f64,
    pub lambda_u_per_km2: f64,
    pub blockage_len_m: f64,
    pub blockage_lengths: LengthLaw,
    pub bs_tx_antennas: u32,
    pub bs_rx_antennas: u32,
    pub ris_elements: u32,
    /// Side-lobe level relative to the main lobe, in power.
    pub side_lobe_db: f64,
    pub path_gain_1m_db: f64,
    pub path_loss_exponent: f64,
    pub fading_rate_direct: f64,
    pub fading_rate_cascaded: f64,
    pub fading_rate_sensing: f64,
    pub sensing_gain_db: f64,
    pub comm_noise_dbm: f64,
    pub sens_noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub window_radius_m: f64,
    pub greedy_target: GreedyTarget,
    pub vlos_sensing_path: VlosSensingPath,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            lambda_b_per_km2: 100.0,
            lambda_r_per_km2: 600.0,
            lambda_l_per_km2: 300.0,
            lambda_u_per_km2: 0.0,
            blockage_len_m: 15.0,
            blockage_lengths: LengthLaw::Fixed,
            bs_tx_antennas: 8,
            bs_rx_antennas: 8,
            ris_elements: 256,
            side_lobe_db: -20.0,
            path_gain_1m_db: -30.0,
            path_loss_exponent: 3.6,
            fading_rate_direct: 1.0,
            fading_rate_cascaded: 1.0,
            fading_rate_sensing: 1.0,
            sensing_gain_db: 20.0,
            comm_noise_dbm: -89.0,
            sens_noise_dbm: -89.0,
            bandwidth_hz: 200e6,
            window_radius_m: 3000.0,
            greedy_target: GreedyTarget::User,
            vlos_sensing_path: VlosSensingPath::Direct,
        }
    }
}

/// Engine field name to file key, for error messages.
const FIELD_KEYS: &[(&str, &str)] = &[
    ("lambda_b", "lambda_b_per_km2"),
    ("lambda_r", "lambda_r_per_km2"),
    ("lambda_l", "lambda_l_per_km2"),
    ("lambda_u", "lambda_u_per_km2"),
    ("mean_blockage_len", "blockage_len_m"),
    ("m_t", "bs_tx_antennas"),
    ("m_r", "bs_rx_antennas"),
    ("n_r_elems", "ris_elements"),
    ("side_lobe_tx", "side_lobe_db"),
    ("side_lobe_ris", "side_lobe_db"),
    ("c0", "path_gain_1m_db"),
    ("alpha", "path_loss_exponent"),
    ("rho_d", "fading_rate_direct"),
    ("rho_v", "fading_rate_cascaded"),
    ("rho_ds", "fading_rate_sensing"),
    ("p_s", "sensing_gain_db"),
    ("sigma_c2", "comm_noise_dbm"),
    ("sigma_s2", "sens_noise_dbm"),
    ("bandwidth_w", "bandwidth_hz"),
    ("window_radius", "window_radius_m"),
];

/// Keys a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "lambda_b_per_km2",
    "lambda_r_per_km2",
    "lambda_l_per_km2",
    "blockage_len_m",
    "bs_tx_antennas",
    "bs_rx_antennas",
    "ris_elements",
    "side_lobe_db",
    "path_gain_1m_db",
    "path_loss_exponent",
    "sensing_gain_db",
    "comm_noise_dbm",
    "sens_noise_dbm",
    "bandwidth_hz",
    "window_radius_m",
];

fn file_key(engine_name: &str) -> &str {
    FIELD_KEYS
        .iter()
        .find(|(e, _)| *e == engine_name)
        .map_or(engine_name, |(_, k)| k)
}

impl ScenarioSpec {
    pub fn to_params(&self) -> Result<ScenarioParams> {
        let side = db_to_linear(self.side_lobe_db);
        let p = ScenarioParams {
            lambda_b: per_km2_to_per_m2(self.lambda_b_per_km2),
            lambda_r: per_km2_to_per_m2(self.lambda_r_per_km2),
            lambda_l: per_km2_to_per_m2(self.lambda_l_per_km2),
            lambda_u: per_km2_to_per_m2(self.lambda_u_per_km2),
            mean_blockage_len: self.blockage_len_m,
            blockage_lengths: self.blockage_lengths,
            m_t: self.bs_tx_antennas,
            m_r: self.bs_rx_antennas,
            n_r_elems: self.ris_elements,
            side_lobe_tx: side * self.bs_tx_antennas as f64,
            side_lobe_ris: side.sqrt() * self.ris_elements as f64,
            c0: db_to_linear(self.path_gain_1m_db),
            alpha: self.path_loss_exponent,
            rho_d: self.fading_rate_direct,
            rho_v: self.fading_rate_cascaded,
            rho_ds: self.fading_rate_sensing,
            p_s: db_to_linear(self.sensing_gain_db),
            sigma_c2: dbm_to_watts(self.comm_noise_dbm),
            sigma_s2: dbm_to_watts(self.sens_noise_dbm),
            bandwidth_w: self.bandwidth_hz,
            window_radius: self.window_radius_m,
            greedy_target: self.greedy_target,
            vlos_sensing_path: self.vlos_sensing_path,
        };
        p.validate().map_err(|e| match e {
            riscov::Error::InvalidParameter { name, reason } => CliError::Config {
                field: format!("scenario.{}", file_key(name)),
                reason,
            },
            other => CliError::Model(other),
        })?;
        Ok(p)
    }

    /// Sets a sweepable key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<u32> {
            if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(CliError::Config {
                    field: format!("sweep.{key}"),
                    reason: format!("must be a positive integer, got {v}"),
                })
            }
        };
        match key {
            "lambda_b_per_km2" => self.lambda_b_per_km2 = value,
            "lambda_r_per_km2" => self.lambda_r_per_km2 = value,
            "lambda_l_per_km2" => self.lambda_l_per_km2 = value,
            "blockage_len_m" => self.blockage_len_m = value,
            "bs_tx_antennas" => self.bs_tx_antennas = count(value)?,
            "bs_rx_antennas" => self.bs_rx_antennas = count(value)?,
            "ris_elements" => self.ris_elements = count(value)?,
            "side_lobe_db" => self.side_lobe_db = value,
            "path_gain_1m_db" => self.path_gain_1m_db = value,
            "path_loss_exponent" => self.path_loss_exponent = value,
            "sensing_gain_db" => self.sensing_gain_db = value,
            "comm_noise_dbm" => self.comm_noise_dbm = value,
            "sens_noise_dbm" => self.sens_noise_dbm = value,
            "bandwidth_hz" => self.bandwidth_hz = value,
            "window_radius_m" => self.window_radius_m = value,
            other => {
                return Err(CliError::Config {
                    field: "sweep.parameters".into(),
                    reason: format!("`{other}` is not a sweepable scenario key (one of {})", SWEEPABLE.join(", ")),
                })
            }
        }
        Ok(())
    }
}

/// A list of scenario points, each assigning every listed parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameters: Vec<String>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub trials: u64,
    pub seed: u64,
    pub blockage_mode: BlockageMode,
    pub output_dir: PathBuf,
    /// `(eps1, eps2)` pairs in dB.
    pub thresholds_db: Vec<[f64; 2]>,
    pub scenario: ScenarioSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Both,
            trials: 20_000,
            seed: 1,
            blockage_mode: BlockageMode::Thinning,
            output_dir: PathBuf::from("out"),
            thresholds_db: threshold_grid(),
            scenario: ScenarioSpec::default(),
            sweep: None,
        }
    }
}

/// `eps1 in {-10, 0, 10}` dB crossed with `eps2 in {-50, -40, -30}` dB.
pub fn threshold_grid() -> Vec<[f64; 2]> {
    [-10.0, 0.0, 10.0]
        .iter()
        .flat_map(|&a| [-50.0, -40.0, -30.0].map(|b| [a, b]))
        .collect()
}

/// Labelled scenario of one sweep point.
#[derive(Debug, Clone)]
pub struct Point {
    pub label: Option<String>,
    pub assignments: Vec<(String, f64)>,
    pub spec: ScenarioSpec,
    pub params: ScenarioParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        // a run manifest carries the configuration under `config`
        let cfg: Self = match value.get("config") {
            Some(inner) if value.contains_key("manifest_version") => inner.clone().try_into(),
            _ => toml::Value::Table(value).try_into(),
        }
        .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode.simulates() && self.trials == 0 {
            return Err(CliError::Config {
                field: "trials".into(),
                reason: "must be at least 1 when simulating".into(),
            });
        }
        for (i, t) in self.thresholds_db.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config {
                    field: format!("thresholds_db[{i}]"),
                    reason: format!("thresholds must be finite, got {t:?}"),
                });
            }
        }
        self.points()?;
        Ok(())
    }

    /// The scenario points to run: the sweep grid if any, else the base
    /// scenario alone.
    pub fn points(&self) -> Result<Vec<Point>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![Point {
                label: None,
                assignments: Vec::new(),
                spec: self.scenario.clone(),
                params: self.scenario.to_params()?,
            }]);
        };
        if sweep.parameters.is_empty() || sweep.points.is_empty() {
            return Err(CliError::Config {
                field: "sweep".into(),
                reason: "needs at least one parameter and one point".into(),
            });
        }
        sweep
            .points
            .iter()
            .enumerate()
            .map(|(i, values)| {
                if values.len() != sweep.parameters.len() {
                    return Err(CliError::Config {
                        field: format!("sweep.points[{i}]"),
                        reason: format!("expected {} values, got {}", sweep.parameters.len(), values.len()),
                    });
                }
                let mut spec = self.scenario.clone();
                for (k, &v) in sweep.parameters.iter().zip(values) {
                    spec.set(k, v)?;
                }
                let params = spec.to_params()?;
                Ok(Point {
                    label: Some(format!("point_{i:03}")),
                    assignments: sweep.parameters.iter().cloned().zip(values.iter().copied()).collect(),
                    spec,
                    params,
                })
            })
            .collect()
    }
}

/// Built-in configurations.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    match name {
        "defaults" => {}
        "distances" => {
            cfg.mode = Mode::Simulate;
            cfg.trials = 100_000;
            cfg.sweep = Some(Sweep {
                parameters: vec!["lambda_b_per_km2".into(), "lambda_r_per_km2".into()],
                points: [50.0, 100.0]
                    .iter()
                    .flat_map(|&b| [150.0, 600.0].map(|r| vec![b, r]))
                    .collect(),
            });
        }
        "equal-energy" => {
            cfg.mode = Mode::Simulate;
            cfg.thresholds_db = vec![[0.0, -40.0]];
            cfg.sweep = Some(Sweep {
                parameters: vec!["lambda_b_per_km2".into(), "lambda_r_per_km2".into()],
                points: EQUAL_ENERGY_DEPLOYMENTS_KM2.iter().map(|&(b, r)| vec![b, r]).collect(),
            });
        }
        "coverage-grid" => {
            cfg.scenario.lambda_l_per_km2 = 600.0;
            cfg.sweep = Some(Sweep {
                parameters: vec!["lambda_r_per_km2".into()],
                points: vec![vec![0.0], vec![600.0]],
            });
        }
        other => {
            return Err(CliError::Config {
                field: "preset".into(),
                reason: format!("unknown preset `{other}` (one of {})", PRESETS.join(", ")),
            })
        }
    }
    Ok(cfg)
}

pub const PRESETS: &[&str] = &["defaults", "distances", "equal-energy", "coverage-grid"];

/// CSV column layout of every artifact, recorded in the run manifest.
pub fn artifact_columns() -> BTreeMap<String, Vec<String>> {
    let cols = |c: &[&str]| c.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    BTreeMap::from([
        (
            crate::run::COVERAGE_CSV.to_string(),
            cols(crate::run::COVERAGE_COLUMNS),
        ),
        (
            crate::run::DISTRIBUTIONS_CSV.to_string(),
            cols(crate::run::DISTRIBUTION_COLUMNS),
        ),
        (
            crate::run::RATEPAIR_CSV.to_string(),
            cols(crate::run::RATEPAIR_COLUMNS),
        ),
        (
            crate::run::VALIDATION_CSV.to_string(),
            cols(crate::run::VALIDATION_COLUMNS),
        ),
    ])
}
