//! Scenario parameters shared by the Monte Carlo and analytical engines.
//!
//! All fields are linear SI quantities (points per m², meters, watts, Hz).
//! Conversion from the dB / per-km² units used in configuration files happens
//! at the boundary, see [`crate::units`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_at_least, check_positive, invalid, Result};
use crate::units::{dbm_to_watts, db_to_linear, per_km2_to_per_m2};

/// How blockage lengths are drawn around their mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LengthLaw {
    /// Every blockage has exactly the mean length.
    #[default]
    Fixed,
    /// Uniform on `[0, 2 * mean]`.
    Uniform,
}

/// Which NLoS BS the greedy cascaded-link search picks once the nearest LoS
/// RIS is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GreedyTarget {
    /// NLoS BS nearest the user.
    #[default]
    User,
    /// NLoS BS nearest the selected RIS (shortest cascaded length through it).
    Ris,
}

/// Path used for the sensing interference of VLoS BSs while the user is
/// served over a cascaded link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VlosSensingPath {
    /// Direct BS-to-serving-BS distance with the direct beam-gain law.
    #[default]
    Direct,
    /// Reflected through the user's RIS: `(d_{B-R} * d_{R-B0})^-alpha`.
    Cascaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// BS density, per m².
    pub lambda_b: f64,
    /// RIS density, per m².
    pub lambda_r: f64,
    /// Blockage density, per m².
    pub lambda_l: f64,
    /// User density, per m². Carried for completeness; the typical user sits
    /// at the origin and no user process is sampled.
    pub lambda_u: f64,
    /// Mean blockage length, m.
    pub mean_blockage_len: f64,
    pub blockage_lengths: LengthLaw,
    /// BS transmit antennas (main-lobe gain).
    pub m_t: u32,
    /// BS receive antennas.
    pub m_r: u32,
    /// RIS elements.
    pub n_r_elems: u32,
    /// BS side-lobe gain, linear.
    pub side_lobe_tx: f64,
    /// RIS side-lobe amplitude; its square is the side-lobe power gain.
    pub side_lobe_ris: f64,
    /// Path gain at 1 m, linear.
    pub c0: f64,
    pub alpha: f64,
    /// Fading rate of direct links.
    pub rho_d: f64,
    /// Fading rate of cascaded links.
    pub rho_v: f64,
    /// Fading rate of BS-to-BS sensing interference.
    pub rho_ds: f64,
    /// Sensing post-processing gain, linear.
    pub p_s: f64,
    /// Communication noise power, W.
    pub sigma_c2: f64,
    /// Sensing noise power, W.
    pub sigma_s2: f64,
    pub bandwidth_w: f64,
    /// Radius of the simulation disk, m.
    pub window_radius: f64,
    pub greedy_target: GreedyTarget,
    pub vlos_sensing_path: VlosSensingPath,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        let m_t = 8;
        let n_r_elems = 256;
        let side_lobe_rel = db_to_linear(-20.0);
        Self {
            lambda_b: per_km2_to_per_m2(100.0),
            lambda_r: per_km2_to_per_m2(600.0),
            lambda_l: per_km2_to_per_m2(300.0),
            lambda_u: 0.0,
            mean_blockage_len: 15.0,
            blockage_lengths: LengthLaw::Fixed,
            m_t,
            m_r: 8,
            n_r_elems,
            side_lobe_tx: side_lobe_rel * m_t as f64,
            side_lobe_ris: side_lobe_rel.sqrt() * n_r_elems as f64,
            c0: db_to_linear(-30.0),
            alpha: 3.6,
            rho_d: 1.0,
            rho_v: 1.0,
            rho_ds: 1.0,
            p_s: db_to_linear(20.0),
            sigma_c2: dbm_to_watts(-89.0),
            sigma_s2: dbm_to_watts(-89.0),
            bandwidth_w: 200e6,
            window_radius: 3000.0,
            greedy_target: GreedyTarget::User,
            vlos_sensing_path: VlosSensingPath::Direct,
        }
    }
}

/// Six `(lambda_b, lambda_r)` deployments, per km², with equal total
/// infrastructure energy: each BS costs as much as roughly 7.9 RISs.
pub const EQUAL_ENERGY_DEPLOYMENTS_KM2: [(f64, f64); 6] =
    [(10.0, 421.0), (20.0, 342.0), (30.0, 262.0), (40.0, 183.0), (50.0, 104.0), (60.0, 24.0)];

/// LoS decay rate of the Boolean blockage model, `2 * lambda_l * E[L] / pi`.
pub fn beta_from_blockage(lambda_l: f64, mean_len: f64) -> Result<f64> {
    check_at_least("lambda_l", lambda_l, 0.0)?;
    check_at_least("mean_len", mean_len, 0.0)?;
    Ok(2.0 * lambda_l * mean_len / PI)
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_b", self.lambda_b),
            ("lambda_r", self.lambda_r),
            ("lambda_l", self.lambda_l),
            ("lambda_u", self.lambda_u),
            ("sigma_c2", self.sigma_c2),
            ("sigma_s2", self.sigma_s2),
        ] {
            check_at_least(name, v, 0.0)?;
        }
        for (name, v) in [
            ("mean_blockage_len", self.mean_blockage_len),
            ("side_lobe_tx", self.side_lobe_tx),
            ("side_lobe_ris", self.side_lobe_ris),
            ("c0", self.c0),
            ("rho_d", self.rho_d),
            ("rho_v", self.rho_v),
            ("rho_ds", self.rho_ds),
            ("p_s", self.p_s),
            ("bandwidth_w", self.bandwidth_w),
            ("window_radius", self.window_radius),
        ] {
            check_positive(name, v)?;
        }
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(invalid("alpha", format!("must exceed 2, got {}", self.alpha)));
        }
        for (name, v) in [
            ("m_t", self.m_t),
            ("m_r", self.m_r),
            ("n_r_elems", self.n_r_elems),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be a positive integer"));
            }
        }
        if self.side_lobe_tx >= self.m_t as f64 {
            return Err(invalid(
                "side_lobe_tx",
                format!("must be below the main-lobe gain {}", self.m_t),
            ));
        }
        if self.side_lobe_ris >= self.n_r_elems as f64 {
            return Err(invalid(
                "side_lobe_ris",
                format!("must be below the element count {}", self.n_r_elems),
            ));
        }
        Ok(())
    }

    /// Blockage-model LoS decay rate, per m.
    pub fn beta(&self) -> f64 {
        2.0 * self.lambda_l * self.mean_blockage_len / PI
    }

    /// `N_R^(2/alpha)`: the distance-to-cascaded-length exchange rate of the
    /// association rule. Direct wins iff `eta >= assoc_scale * d_bu`.
    pub fn assoc_scale(&self) -> f64 {
        (self.n_r_elems as f64).powf(2.0 / self.alpha)
    }

    /// Void probability of the LoS RIS process on the whole plane.
    pub fn los_ris_void_probability(&self) -> f64 {
        let beta = self.beta();
        if self.lambda_r == 0.0 {
            1.0
        } else if beta == 0.0 {
            0.0
        } else {
            (-2.0 * PI * self.lambda_r / (beta * beta)).exp()
        }
    }

    /// Main-lobe gain and side-lobe gain of the RIS in power terms.
    pub fn ris_power_gains(&self) -> (f64, f64) {
        let n = self.n_r_elems as f64;
        (n * n, self.side_lobe_ris * self.side_lobe_ris)
    }

    /// Same parameters with different BS / RIS / blockage densities (per km²).
    pub fn with_densities_km2(&self, lambda_b: f64, lambda_r: f64, lambda_l: f64) -> Self {
        Self {
            lambda_b: per_km2_to_per_m2(lambda_b),
            lambda_r: per_km2_to_per_m2(lambda_r),
            lambda_l: per_km2_to_per_m2(lambda_l),
            ..self.clone()
        }
    }
}
