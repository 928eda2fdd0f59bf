//! Per-drop SINRs and Monte Carlo estimators of the joint coverage and of
//! the communication / sensing rate pair.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{associate, link_distances, nearest_los_ris, LinkDistances, LinkKind, ServingLink};
use crate::channel::{
    cascaded_gain_distribution, direct_gain_distribution, exp_variate, GainDistribution,
};
use crate::distributions::los_ris_law;
use crate::error::{check_positive, invalid, Result};
use crate::geometry::{drop_rng, sample_ppp_with, sample_realization, LinkMode, NetworkRealization, Point2D};
use crate::params::{GreedyTarget, ScenarioParams, VlosSensingPath};
use crate::stats::{mean_and_se, wilson_interval, Z95};

/// Upper cap on linear SINRs when both noise and interference vanish.
pub const SINR_CAP: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrSample {
    pub gamma_c: f64,
    pub gamma_s: f64,
    pub case: LinkKind,
}

impl SinrSample {
    pub const NONE: SinrSample = SinrSample {
        gamma_c: 0.0,
        gamma_s: 0.0,
        case: LinkKind::None,
    };

    /// Both thresholds met; drops without a serving link never are.
    pub fn covered(&self, eps1: f64, eps2: f64) -> bool {
        self.case != LinkKind::None && self.gamma_c >= eps1 && self.gamma_s >= eps2
    }
}

/// Per-case coverage and association frequencies (or probabilities).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseBreakdown {
    pub zeta_d: f64,
    pub zeta_v: f64,
    /// Coverage conditional on direct association.
    pub p_d: f64,
    /// Coverage conditional on cascaded association.
    pub p_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Uncertainty {
    MonteCarlo {
        ci_low: f64,
        ci_high: f64,
        ci_halfwidth: f64,
        n_trials: u64,
    },
    Analytic {
        error_budget: f64,
        evaluations: u64,
        warnings: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub p_cs: f64,
    pub uncertainty: Uncertainty,
    pub breakdown: CaseBreakdown,
}

impl CoverageResult {
    /// Half-width of the 95% interval, or the analytic error budget.
    pub fn tolerance(&self) -> f64 {
        match &self.uncertainty {
            Uncertainty::MonteCarlo { ci_halfwidth, .. } => *ci_halfwidth,
            Uncertainty::Analytic { error_budget, .. } => *error_budget,
        }
    }
}

/// Source of the per-link random quantities. [`Pinned`] replaces every draw
/// by its mean, which turns a drop into a hand-checkable deterministic
/// computation.
pub trait Draws {
    /// Exponential fading power with the given rate.
    fn fading(&mut self, rate: f64) -> f64;
    /// Beam gain drawn from a sector distribution.
    fn gain(&mut self, dist: &GainDistribution) -> f64;
}

pub struct Sampled<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Draws for Sampled<'_, R> {
    fn fading(&mut self, rate: f64) -> f64 {
        exp_variate(self.0, rate)
    }

    fn gain(&mut self, dist: &GainDistribution) -> f64 {
        dist.sample(self.0)
    }
}

pub struct Pinned;

impl Draws for Pinned {
    fn fading(&mut self, rate: f64) -> f64 {
        1.0 / rate
    }

    fn gain(&mut self, dist: &GainDistribution) -> f64 {
        dist.mean()
    }
}

/// Gain laws and constants reused across drops.
#[derive(Debug, Clone)]
pub struct SinrContext {
    params: ScenarioParams,
    gd: GainDistribution,
    gv: GainDistribution,
}

impl SinrContext {
    pub fn new(params: &ScenarioParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            gd: direct_gain_distribution(params)?,
            gv: cascaded_gain_distribution(params)?,
            params: params.clone(),
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// SINRs of one drop for the given serving link.
    ///
    /// Communication interference comes from every LoS BS other than the
    /// server (direct path) and every NLoS BS reflected through the nearest
    /// LoS RIS. Sensing interference comes from the same BSs, attenuated over
    /// their distance to the serving BS.
    pub fn drop_sinr<D: Draws>(
        &self,
        real: &NetworkRealization,
        serving: &ServingLink,
        draws: &mut D,
    ) -> SinrSample {
        let p = &self.params;
        let (b0, desired_c, desired_s, case) = match *serving {
            ServingLink::None => return SinrSample::NONE,
            ServingLink::Direct { bs, d_bu } => {
                let pl = p.c0 * d_bu.powf(-p.alpha);
                let xi = draws.fading(p.rho_d);
                let kappa = draws.fading(1.0);
                let mt = p.m_t as f64;
                (bs, pl * xi * mt, p.p_s * pl * d_bu.powf(-p.alpha) * kappa * mt * p.m_r as f64, LinkKind::Direct)
            }
            ServingLink::Cascaded { bs, eta, .. } => {
                let pl = p.c0 * eta.powf(-p.alpha);
                let n2 = (p.n_r_elems as f64).powi(2);
                let xi = draws.fading(p.rho_v);
                let kappa = draws.fading(1.0);
                let mt = p.m_t as f64;
                let echo = p.p_s * pl * eta.powf(-p.alpha) * kappa * mt * p.m_r as f64 * n2 * n2;
                (bs, pl * xi * mt * n2, echo, LinkKind::Cascaded)
            }
        };
        let server = real.bs[b0];
        let ris = nearest_los_ris(real).map(|(i, d)| (real.ris[i], d));
        let mut i_c = 0.0;
        let mut i_s = 0.0;
        for (j, bj) in real.bs.iter().enumerate() {
            if j == b0 {
                continue;
            }
            let los = real.bs_los[j];
            if los {
                let d = bj.norm();
                i_c += p.c0 * d.powf(-p.alpha) * draws.fading(p.rho_d) * draws.gain(&self.gd);
            } else if let Some((rp, d_ru)) = ris {
                let d_br = bj.distance(&rp);
                i_c += p.c0
                    * (d_br * d_ru).powf(-p.alpha)
                    * draws.fading(p.rho_v)
                    * draws.gain(&self.gv);
            } else {
                continue;
            }
            let d_sense = match (los, p.vlos_sensing_path, ris) {
                (false, VlosSensingPath::Cascaded, Some((rp, _))) => {
                    bj.distance(&rp) * rp.distance(&server)
                }
                _ => bj.distance(&server),
            };
            i_s += p.c0 * d_sense.powf(-p.alpha) * draws.fading(p.rho_ds) * draws.gain(&self.gd);
        }
        SinrSample {
            gamma_c: capped_ratio(desired_c, i_c + p.sigma_c2),
            gamma_s: capped_ratio(desired_s, i_s + p.sigma_s2),
            case,
        }
    }

    /// One drop: geometry, association and SINRs from the drop's own stream.
    ///
    /// In thinning mode only the nearest LoS RIS can influence the SINRs, so
    /// it is drawn directly from its distance law instead of thinning the
    /// full RIS process.
    pub fn simulate_drop(&self, mode: LinkMode, master_seed: u64, index: u64) -> DropOutcome {
        let mut rng = drop_rng(master_seed, index);
        let real = sample_drop(&self.params, mode, &mut rng, index);
        let serving = associate(&real, &self.params);
        let sample = self.drop_sinr(&real, &serving, &mut Sampled(&mut rng));
        DropOutcome { real, serving, sample }
    }
}

fn capped_ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        if num > 0.0 {
            SINR_CAP
        } else {
            0.0
        }
    } else {
        (num / den).min(SINR_CAP)
    }
}

/// Geometry of one drop. Thinning mode keeps only the nearest LoS RIS.
pub fn sample_drop<R: Rng + ?Sized>(
    params: &ScenarioParams,
    mode: LinkMode,
    rng: &mut R,
    seed: u64,
) -> NetworkRealization {
    match mode {
        LinkMode::Explicit => sample_realization(params, mode, rng, seed),
        LinkMode::Thinning => {
            let radius = params.window_radius;
            let bs = sample_ppp_with(rng, params.lambda_b, radius);
            let beta = params.beta();
            let bs_los = bs
                .iter()
                .map(|p| rng.random::<f64>() < (-beta * p.norm()).exp())
                .collect();
            let y = los_ris_law(params).quantile(rng.random::<f64>());
            let ris = if y <= radius {
                vec![Point2D::from_polar(y, rng.random::<f64>() * std::f64::consts::TAU)]
            } else {
                Vec::new()
            };
            let ris_los = vec![true; ris.len()];
            NetworkRealization {
                bs,
                ris,
                blockages: Vec::new(),
                window_radius: radius,
                bs_los,
                ris_los,
                seed,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DropOutcome {
    pub real: NetworkRealization,
    pub serving: ServingLink,
    pub sample: SinrSample,
}

/// SINRs of one drop with randomness seeded by `seed`.
pub fn drop_sinr(
    realization: &NetworkRealization,
    serving: &ServingLink,
    params: &ScenarioParams,
    seed: u64,
) -> Result<SinrSample> {
    let ctx = SinrContext::new(params)?;
    let mut rng = drop_rng(seed, 0);
    Ok(ctx.drop_sinr(realization, serving, &mut Sampled(&mut rng)))
}

/// Every interferer respects the exclusion implied by the association rule.
/// In cascaded user-greedy mode the serving BS is the nearest NLoS BS, so
/// the check is on distance to the user rather than on cascaded length.
pub fn exclusion_holds(real: &NetworkRealization, serving: &ServingLink, params: &ScenarioParams) -> bool {
    match *serving {
        ServingLink::None => true,
        ServingLink::Direct { bs, d_bu } => real
            .bs
            .iter()
            .enumerate()
            .all(|(j, b)| j == bs || !real.bs_los[j] || b.norm() >= d_bu),
        ServingLink::Cascaded { bs, ris, eta, .. } => {
            let rp = real.ris[ris];
            let d_ru = rp.norm();
            let d0 = real.bs[bs].norm();
            let scale = params.assoc_scale();
            real.bs.iter().enumerate().all(|(j, b)| {
                if j == bs {
                    return true;
                }
                if real.bs_los[j] {
                    return scale * b.norm() > eta;
                }
                match params.greedy_target {
                    GreedyTarget::User => b.norm() >= d0,
                    GreedyTarget::Ris => b.distance(&rp) * d_ru >= eta,
                }
            })
        }
    }
}

/// Runs `n_trials` drops in parallel; sample `i` always comes from drop `i`.
pub fn simulate_samples(
    params: &ScenarioParams,
    mode: LinkMode,
    n_trials: u64,
    master_seed: u64,
) -> Result<Vec<SinrSample>> {
    let ctx = SinrContext::new(params)?;
    Ok((0..n_trials)
        .into_par_iter()
        .map(|i| ctx.simulate_drop(mode, master_seed, i).sample)
        .collect())
}

/// Candidate link lengths over `n_trials` drops. Unlike the SINR drops,
/// every RIS of the window is sampled and classified, so the nearest LoS RIS
/// is never drawn from its analytic law.
pub fn simulate_link_distances(
    params: &ScenarioParams,
    mode: LinkMode,
    n_trials: u64,
    master_seed: u64,
) -> Result<Vec<LinkDistances>> {
    params.validate()?;
    Ok((0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = drop_rng(master_seed, i);
            let real = sample_realization(params, mode, &mut rng, i);
            link_distances(&real, params)
        })
        .collect())
}

/// Coverage estimate from a fixed set of drops.
pub fn coverage_from_samples(samples: &[SinrSample], eps1: f64, eps2: f64) -> CoverageResult {
    let n = samples.len() as u64;
    let (mut nd, mut nv, mut cd, mut cv) = (0u64, 0u64, 0u64, 0u64);
    for s in samples {
        let hit = s.covered(eps1, eps2) as u64;
        match s.case {
            LinkKind::Direct => {
                nd += 1;
                cd += hit;
            }
            LinkKind::Cascaded => {
                nv += 1;
                cv += hit;
            }
            LinkKind::None => {}
        }
    }
    let frac = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let breakdown = CaseBreakdown {
        zeta_d: frac(nd, n),
        zeta_v: frac(nv, n),
        p_d: frac(cd, nd),
        p_v: frac(cv, nv),
    };
    let (lo, hi) = wilson_interval(cd + cv, n, Z95);
    CoverageResult {
        p_cs: breakdown.zeta_d * breakdown.p_d + breakdown.zeta_v * breakdown.p_v,
        uncertainty: Uncertainty::MonteCarlo {
            ci_low: lo,
            ci_high: hi,
            ci_halfwidth: 0.5 * (hi - lo),
            n_trials: n,
        },
        breakdown,
    }
}

fn check_thresholds(eps1: f64, eps2: f64, n_trials: u64) -> Result<()> {
    check_positive("eps1", eps1)?;
    check_positive("eps2", eps2)?;
    if n_trials == 0 {
        return Err(invalid("n_trials", "must be at least 1"));
    }
    Ok(())
}

/// Monte Carlo coverage with link states drawn by independent thinning.
pub fn estimate_coverage(
    params: &ScenarioParams,
    eps1: f64,
    eps2: f64,
    n_trials: u64,
    master_seed: u64,
) -> Result<CoverageResult> {
    estimate_coverage_mode(params, LinkMode::Thinning, eps1, eps2, n_trials, master_seed)
}

pub fn estimate_coverage_mode(
    params: &ScenarioParams,
    mode: LinkMode,
    eps1: f64,
    eps2: f64,
    n_trials: u64,
    master_seed: u64,
) -> Result<CoverageResult> {
    check_thresholds(eps1, eps2, n_trials)?;
    let samples = simulate_samples(params, mode, n_trials, master_seed)?;
    Ok(coverage_from_samples(&samples, eps1, eps2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    /// Mean of `W log2(1 + gamma_c)`, bit/s.
    pub comm_rate: f64,
    pub comm_se: f64,
    /// Mean of `W log2(1 + gamma_s)`, bit/s.
    pub sens_rate: f64,
    pub sens_se: f64,
    pub n_trials: u64,
}

/// Shannon rate `W log2(1 + gamma)`.
pub fn shannon_rate(bandwidth: f64, gamma: f64) -> f64 {
    bandwidth * gamma.ln_1p() / std::f64::consts::LN_2
}

/// Rate pair averaged over all drops; drops without a serving link
/// contribute zero.
pub fn rate_pair_from_samples(samples: &[SinrSample], bandwidth: f64) -> RatePair {
    let comm: Vec<f64> = samples.iter().map(|s| shannon_rate(bandwidth, s.gamma_c)).collect();
    let sens: Vec<f64> = samples.iter().map(|s| shannon_rate(bandwidth, s.gamma_s)).collect();
    let (comm_rate, comm_se) = mean_and_se(&comm);
    let (sens_rate, sens_se) = mean_and_se(&sens);
    RatePair {
        comm_rate,
        comm_se,
        sens_rate,
        sens_se,
        n_trials: samples.len() as u64,
    }
}

pub fn estimate_rate_pair(params: &ScenarioParams, n_trials: u64, master_seed: u64) -> Result<RatePair> {
    if n_trials == 0 {
        return Err(invalid("n_trials", "must be at least 1"));
    }
    let samples = simulate_samples(params, LinkMode::Thinning, n_trials, master_seed)?;
    Ok(rate_pair_from_samples(&samples, params.bandwidth_w))
}
