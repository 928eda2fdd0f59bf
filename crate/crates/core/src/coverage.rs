//! Analytical coverage: interference Laplace functionals of the four
//! interferer classes, the conditional coverage of each association case and
//! the marginal coverage.
//!
//! Every functional has the form `exp(-int (1 - K_comm K_sens) lambda dA)`
//! where the kernels are [`laplace_fading_gain`] evaluated at
//! `s * C0 * pathloss`. For a serving link with average received power `G`,
//! the communication argument is `s = rho * eps1 / G` and the sensing one is
//! `s = eps2 / G_echo`. The sensing kernel depends on the BS-to-serving-BS
//! distance `sqrt(x^2 + r^2 - 2 x r cos(phi))` with `phi` uniform and
//! independent of the RIS geometry, so it enters through its `phi`-average.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::channel::{
    cascaded_gain_distribution, direct_gain_distribution, laplace_fading_complement,
    GainDistribution,
};
use crate::distributions::{
    analytic_association, lens_angle, los_bs_law, los_ris_law, nlos_bs_law,
    AssociationProbabilities, CascadedLengthLaw, RadialNearest,
};
use crate::error::{invalid, Error, Result};
use crate::params::{ScenarioParams, VlosSensingPath};
use crate::quadrature::{integrate_1d_with, Adaptive, DecayHint, GaussLegendre, KronrodRule, QuadratureReport};
use crate::sinr::{CaseBreakdown, CoverageResult, Uncertainty};

/// Interferer exclusion regions implied by the association rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExclusionRegion {
    /// VLoS interferers while served directly at distance `x`: cascaded
    /// length through the RIS at `y` at least `x N_R^(2/alpha)`.
    S1 { x: f64, y: f64, assoc_scale: f64 },
    /// LoS interferers while served through a RIS with length `eta`:
    /// distance at least `eta / N_R^(2/alpha)`.
    S2 { eta: f64, assoc_scale: f64 },
    /// VLoS interferers while served through a RIS with length `eta`:
    /// cascaded length through the RIS at `y` at least `eta`.
    S3 { eta: f64, y: f64 },
}

impl ExclusionRegion {
    /// Radius of the excluded disk around the RIS (`S1`, `S3`).
    pub fn lens_radius(&self) -> Option<f64> {
        match *self {
            ExclusionRegion::S1 { x, y, assoc_scale } => Some(x * assoc_scale / y),
            ExclusionRegion::S3 { eta, y } => Some(eta / y),
            ExclusionRegion::S2 { .. } => None,
        }
    }

    fn ris_distance(&self) -> f64 {
        match *self {
            ExclusionRegion::S1 { y, .. } | ExclusionRegion::S3 { y, .. } => y,
            ExclusionRegion::S2 { .. } => 0.0,
        }
    }

    /// Whether an interferer at distance `r` and angle `theta` (measured from
    /// the RIS direction) may be present.
    pub fn contains(&self, r: f64, theta: f64) -> bool {
        match *self {
            ExclusionRegion::S2 { eta, assoc_scale } => r >= eta / assoc_scale,
            _ => {
                let y = self.ris_distance();
                let rho = self.lens_radius().unwrap_or(0.0);
                r * r + y * y - 2.0 * r * y * theta.cos() >= rho * rho
            }
        }
    }

    /// Smallest admissible `|theta|` at distance `r` (lens regions).
    pub fn theta_start(&self, r: f64) -> f64 {
        match self.lens_radius() {
            Some(rho) => lens_angle(r, self.ris_distance(), rho),
            None => 0.0,
        }
    }

    /// Radii where the admissible angular range changes shape.
    pub fn radial_breaks(&self) -> Vec<f64> {
        match *self {
            ExclusionRegion::S2 { eta, assoc_scale } => vec![eta / assoc_scale],
            _ => {
                let y = self.ris_distance();
                let rho = self.lens_radius().unwrap_or(0.0);
                vec![(y - rho).abs(), y + rho]
            }
        }
    }
}

/// Laplace arguments (already multiplied by `C0`) of one serving link.
#[derive(Debug, Clone, Copy)]
struct LinkScales {
    comm: f64,
    sens: f64,
}

/// Tolerances of the radial integrals, of the expectations over serving-BS
/// and RIS distances, and of the outermost coverage integrals.
const R_REL_TOL: f64 = 3e-5;
const R_ABS_TOL: f64 = 1e-9;
const MID_REL_TOL: f64 = 3e-4;
const MID_ABS_TOL: f64 = 1e-8;
const MID: Adaptive = Adaptive::new(MID_REL_TOL, MID_ABS_TOL).with_rule(KronrodRule::Gk15);

/// Success probabilities below this are treated as zero and booked as error.
const NEGLIGIBLE: f64 = 1e-12;
const NEGLIGIBLE_WEIGHTED: f64 = 1e-10;

const ANGULAR_NODES: usize = 32;
const MIN_ANGULAR_SCALE: f64 = 1e-4;

/// Accumulates the error estimates and evaluation counts of inner
/// integrals evaluated at the nodes of an outer rule.
#[derive(Default)]
struct Inner {
    err_sum: f64,
    nodes: u64,
    evals: u64,
    failed: bool,
}

impl Inner {
    fn absorb(&mut self, rep: QuadratureReport) -> f64 {
        self.err_sum += rep.abs_error_estimate;
        self.nodes += 1;
        self.evals += rep.evaluations;
        self.failed |= !rep.converged;
        rep.value
    }

    /// Outer report with the mean inner error added (the outer weights sum
    /// to the interval length, which is one for all callers).
    fn finish(self, mut outer: QuadratureReport) -> QuadratureReport {
        outer.abs_error_estimate += self.err_sum / self.nodes.max(1) as f64;
        outer.evaluations += self.evals;
        outer.converged &= !self.failed;
        outer
    }
}

/// One minus the `phi`-averaged sensing kernel around a serving BS at distance `x`,
/// tabulated against `v = asinh((r - x) / w)` and interpolated with
/// Catmull-Rom cubics. Beyond the table it is evaluated directly.
type ProfileCache = HashMap<u64, SensingProfile>;

struct SensingProfile {
    x: f64,
    s: f64,
    w: f64,
    v0: f64,
    dv: f64,
    r_end: f64,
    vals: Vec<f64>,
}

impl SensingProfile {
    const POINTS: usize = 400;

    fn new(model: &AnalyticModel, s: f64, x: f64) -> Self {
        let mut me = SensingProfile { x, s, w: 1.0, v0: 0.0, dv: 1.0, r_end: 0.0, vals: Vec::new() };
        if s == 0.0 {
            return me;
        }
        let alpha = model.params.alpha;
        let g_max = model.gd.levels()[0].gain;
        let d_star = (s * g_max).powf(1.0 / alpha);
        me.w = d_star.clamp(1e-3 * x, x);
        // the profile is even in r, so the table starts at negative r and
        // the cubic stencil is complete on all of [0, r_end]
        me.v0 = ((-1.25 * x) / me.w).asinh();
        let v1 = ((29.0 * x + 30.0 * d_star) / me.w).asinh();
        me.dv = (v1 - me.v0) / (Self::POINTS - 1) as f64;
        me.r_end = x + me.w * (v1 - 2.0 * me.dv).sinh();
        me.vals = (0..Self::POINTS)
            .map(|i| {
                let r = x + me.w * (me.v0 + i as f64 * me.dv).sinh();
                model.sensing_miss_average(s, r.abs(), x)
            })
            .collect();
        me
    }

    fn eval(&self, model: &AnalyticModel, r: f64) -> f64 {
        if self.s == 0.0 {
            return 0.0;
        }
        if r >= self.r_end {
            return model.sensing_miss_average(self.s, r, self.x);
        }
        let t = (((r - self.x) / self.w).asinh() - self.v0) / self.dv;
        let n = self.vals.len();
        let i = (t.floor().max(0.0) as usize).min(n - 2);
        let f = t - i as f64;
        let p1 = self.vals[i];
        let p2 = self.vals[i + 1];
        if i == 0 || i + 2 >= n {
            return p1 + f * (p2 - p1);
        }
        let p0 = self.vals[i - 1];
        let p3 = self.vals[i + 2];
        let v = p1
            + 0.5
                * f
                * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
        v.clamp(0.0, 1.0)
    }
}

/// Angle at which the distance `sqrt(gap^2 + 4 rr sin^2(phi/2))` leaves the
/// disk of radius `reach`; zero if it starts outside.
fn plateau(reach: f64, gap: f64, rr: f64) -> f64 {
    let excess = reach * reach - gap * gap;
    if excess <= 0.0 || rr <= 0.0 {
        0.0
    } else {
        2.0 * (0.5 * (excess / rr).sqrt()).min(1.0).asin()
    }
}

/// Analytical engine bound to one parameter set.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    params: ScenarioParams,
    gd: GainDistribution,
    gv: GainDistribution,
    los: RadialNearest,
    nlos: RadialNearest,
    ris: RadialNearest,
    casc: CascadedLengthLaw,
    rule: GaussLegendre,
    c: f64,
    assoc: OnceLock<AssociationProbabilities>,
    eta_window: OnceLock<(f64, f64)>,
    /// Relative tolerance of the outermost integrals.
    pub outer_rel_tol: f64,
}

impl AnalyticModel {
    pub fn new(params: &ScenarioParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            gd: direct_gain_distribution(params)?,
            gv: cascaded_gain_distribution(params)?,
            los: los_bs_law(params),
            nlos: nlos_bs_law(params),
            ris: los_ris_law(params),
            casc: CascadedLengthLaw::new(params),
            rule: GaussLegendre::new(ANGULAR_NODES),
            c: params.assoc_scale(),
            params: params.clone(),
            assoc: OnceLock::new(),
            eta_window: OnceLock::new(),
            outer_rel_tol: 1e-3,
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    fn direct_scales(&self, x: f64, eps1: f64, eps2: f64) -> LinkScales {
        let p = &self.params;
        let xa = x.powf(p.alpha);
        LinkScales {
            comm: p.rho_d * eps1 * xa / p.m_t as f64,
            sens: eps2 * xa * xa / (p.p_s * p.m_t as f64 * p.m_r as f64),
        }
    }

    fn cascaded_scales(&self, eta: f64, eps1: f64, eps2: f64) -> LinkScales {
        let p = &self.params;
        let n2 = (p.n_r_elems as f64).powi(2);
        let ea = eta.powf(p.alpha);
        LinkScales {
            comm: p.rho_v * eps1 * ea / (p.m_t as f64 * n2),
            sens: eps2 * ea * ea / (p.p_s * p.m_t as f64 * p.m_r as f64 * n2 * n2),
        }
    }

    fn noise_factor(&self, s: LinkScales) -> f64 {
        let p = &self.params;
        (-(s.comm * p.sigma_c2 + s.sens * p.sigma_s2) / p.c0).exp()
    }

    // Miss probabilities `1 - E[exp(-s h D d^-alpha)]` of the three kernels.

    fn miss_direct(&self, s: f64, r: f64) -> f64 {
        laplace_fading_complement(s * r.powf(-self.params.alpha), &self.gd, self.params.rho_d)
    }

    fn miss_cascaded(&self, s: f64, len: f64) -> f64 {
        laplace_fading_complement(s * len.powf(-self.params.alpha), &self.gv, self.params.rho_v)
    }

    fn miss_sensing(&self, s: f64, d: f64) -> f64 {
        laplace_fading_complement(s * d.powf(-self.params.alpha), &self.gd, self.params.rho_ds)
    }

    /// `int_a^b g` with `theta = a + delta sinh(tau)` and a fixed Gauss rule
    /// in `tau`: resolves every feature scale between `delta` and `b - a`
    /// and varies smoothly with `delta`.
    fn sinh_rule(&self, a: f64, b: f64, delta: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let delta = delta.clamp(MIN_ANGULAR_SCALE, PI);
        let t_max = ((b - a) / delta).asinh();
        self.rule
            .mapped(0.0, t_max)
            .map(|(t, w)| w * delta * t.cosh() * g(a + delta * t.sinh()))
            .sum()
    }

    /// `1 - (1/pi) int_0^pi K_sens(sqrt(x^2 + r^2 - 2 x r cos phi)) dphi`.
    fn sensing_miss_average(&self, s: f64, r: f64, x: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let scale = (r / x).ln().abs().max(plateau(self.kernel_reach(s, &self.gd), r - x, r * x));
        let acc = self.sinh_rule(0.0, PI, scale, |phi| {
            let d2 = (x - r) * (x - r) + 4.0 * x * r * (0.5 * phi).sin().powi(2);
            self.miss_sensing(s, d2.sqrt())
        });
        (acc / PI).clamp(0.0, 1.0)
    }

    /// `int_{theta0}^{pi} g(theta) dtheta`, concentrated near the start where
    /// the distance to the RIS is smallest.
    fn angular_integral(&self, r: f64, y: f64, theta0: f64, reach: f64, g: impl FnMut(f64) -> f64) -> f64 {
        if theta0 >= PI {
            return 0.0;
        }
        let scale = theta0.hypot((r / y).ln()).max(plateau(reach, r - y, r * y) - theta0);
        self.sinh_rule(theta0, PI, scale, g)
    }

    /// Distance below which the kernel with argument `s d^-alpha` is
    /// saturated for every gain level.
    fn kernel_reach(&self, s: f64, dist: &GainDistribution) -> f64 {
        let weakest = dist.levels().last().expect("non-empty").gain;
        (s * weakest).powf(1.0 / self.params.alpha)
    }

    /// `int_a^inf f(r) dr`, adaptive on `[a, last break]`, mapped tail beyond.
    fn half_line(
        &self,
        mut f: impl FnMut(f64) -> f64,
        a: f64,
        extra: &[f64],
        los_decay: bool,
    ) -> QuadratureReport {
        let mut breaks: Vec<f64> = std::iter::once(a)
            .chain(extra.iter().copied().filter(|&b| b > a && b.is_finite()))
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let last = *breaks.last().expect("non-empty");
        let beta = self.params.beta();
        let far = last.max(a + 1.0) + if beta > 0.0 { 2.0 / beta } else { last.max(100.0) };
        breaks.push(far);
        let cfg = Adaptive::new(R_REL_TOL, R_ABS_TOL).with_rule(KronrodRule::Gk15);
        // segment k is traversed by s in [k, k + 1] with a cosine map, which
        // smooths the square-root behaviour of lens angles at the breaks
        let mut mapped = |s: f64| {
            let k = (s.floor() as usize).min(breaks.len() - 2);
            let (lo, hi) = (breaks[k], breaks[k + 1]);
            let half = 0.5 * (hi - lo);
            let t = PI * (s - k as f64);
            f(lo + half * (1.0 - t.cos())) * half * PI * t.sin()
        };
        let unit: Vec<f64> = (0..breaks.len()).map(|k| k as f64).collect();
        let mut rep = integrate_1d_with(&mut mapped, &unit, cfg);
        let decay = if los_decay && beta > 0.0 {
            DecayHint::Exponential { scale: 1.0 / beta }
        } else {
            // interference terms fall off as r^(1 - alpha)
            DecayHint::PowerLaw { scale: far, exponent: self.params.alpha - 1.0 }
        };
        let mut g = |t: f64| {
            let (r, jac) = decay.map(far, t);
            let v = f(r) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let tail = integrate_1d_with(&mut g, &[0.0, 1.0], cfg);
        rep.value += tail.value;
        rep.abs_error_estimate += tail.abs_error_estimate;
        rep.evaluations += tail.evaluations;
        rep.converged &= tail.converged;
        rep.warnings.extend(tail.warnings);
        rep
    }

    fn sensing_profile(&self, s: f64, x: f64) -> SensingProfile {
        SensingProfile::new(self, s, x)
    }

    /// Exponent of the LoS functional for a serving BS at distance `x` from
    /// the user, with LoS interferers restricted to `r >= r_min`.
    fn los_exponent(&self, s: LinkScales, profile: &SensingProfile, r_min: f64) -> QuadratureReport {
        let f = |r: f64| {
            if r <= 0.0 {
                return 0.0;
            }
            let mc = self.miss_direct(s.comm, r);
            let ms = profile.eval(self, r);
            let bracket = mc + (1.0 - mc) * ms;
            debug_assert!((-1e-9..=1.0 + 1e-9).contains(&bracket), "{bracket}");
            2.0 * PI * bracket * self.los.intensity(r) * r
        };
        self.half_line(f, r_min, &[profile.x], true)
    }

    /// `int_{theta0}^{pi} (1 - K_comm(y d(r, theta))) dtheta`.
    fn comm_angular(&self, s_comm: f64, r: f64, y: f64, theta0: f64) -> f64 {
        let reach = self.kernel_reach(s_comm, &self.gv) / y;
        self.angular_integral(r, y, theta0, reach, |th| {
            let d = (r * r + y * y - 2.0 * r * y * th.cos()).max(0.0).sqrt();
            self.miss_cascaded(s_comm, y * d)
        })
    }

    /// Exponent of the VLoS functional: NLoS interferers reflected through
    /// the RIS at distance `y`, outside the lens of `region`, sensed at the
    /// serving BS (or through the RIS when configured). `memo` caches the
    /// communication part, which does not depend on the serving BS.
    fn vlos_exponent(
        &self,
        s: LinkScales,
        profile: &SensingProfile,
        y: f64,
        region: ExclusionRegion,
        mut memo: Option<&mut HashMap<(u64, u64), f64>>,
    ) -> QuadratureReport {
        let cached = memo.is_some();
        let through_ris = match (self.params.vlos_sensing_path, region) {
            (VlosSensingPath::Cascaded, ExclusionRegion::S3 { eta, y }) => Some(eta / y),
            _ => None,
        };
        let f = |r: f64| {
            if r <= 0.0 {
                return 0.0;
            }
            let theta0 = region.theta_start(r);
            if theta0 >= PI {
                return 0.0;
            }
            let reach_through = |ris_to_bs: f64| {
                (self.kernel_reach(s.comm, &self.gv) / y).max(self.kernel_reach(s.sens, &self.gd) / ris_to_bs)
            };
            let area = match through_ris {
                None => {
                    let ms = profile.eval(self, r);
                    let j = match memo.as_deref_mut() {
                        Some(m) => *m
                            .entry((y.to_bits(), r.to_bits()))
                            .or_insert_with(|| self.comm_angular(s.comm, r, y, theta0)),
                        None => self.comm_angular(s.comm, r, y, theta0),
                    };
                    (PI - theta0) * ms + (1.0 - ms) * j
                }
                Some(ris_to_bs) => self.angular_integral(r, y, theta0, reach_through(ris_to_bs), |th| {
                    let d = (r * r + y * y - 2.0 * r * y * th.cos()).max(0.0).sqrt();
                    let mc = self.miss_cascaded(s.comm, y * d);
                    mc + (1.0 - mc) * self.miss_sensing(s.sens, d * ris_to_bs)
                }),
            };
            2.0 * area * self.nlos.intensity(r) * r
        };
        // the serving-BS break would defeat the cache, whose entries are
        // shared across serving-BS distances
        let mut breaks = region.radial_breaks();
        if !cached {
            breaks.push(profile.x);
        }
        self.half_line(f, 0.0, &breaks, false)
    }

    /// Position of RIS distance `y` on the normalised quantile scale.
    fn ris_u(&self, y: f64) -> f64 {
        (self.ris.cdf(y) / self.ris.total_mass()).clamp(0.0, 1.0)
    }

    fn thresholds_ok(eps1: f64, eps2: f64) -> Result<()> {
        for (name, v) in [("eps1", eps1), ("eps2", eps2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("threshold must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// LoS-interferer functional when served by a LoS BS at distance `x`.
    pub fn xi1_los(&self, x: f64, eps1: f64, eps2: f64) -> Result<QuadratureReport> {
        Self::thresholds_ok(eps1, eps2)?;
        if (eps1 == 0.0 && eps2 == 0.0) || self.params.lambda_b == 0.0 {
            return Ok(exact(1.0));
        }
        let s = self.direct_scales(x, eps1, eps2);
        let profile = self.sensing_profile(s.sens, x);
        Ok(exp_of(self.los_exponent(s, &profile, x)))
    }

    /// VLoS-interferer functional when served by a LoS BS at distance `x`.
    pub fn gamma1_vlos(&self, x: f64, eps1: f64, eps2: f64) -> Result<QuadratureReport> {
        Self::thresholds_ok(eps1, eps2)?;
        let ris_mass = self.ris.total_mass();
        if (eps1 == 0.0 && eps2 == 0.0) || ris_mass == 0.0 || self.nlos.total_mass() == 0.0 {
            return Ok(exact(1.0));
        }
        let s = self.direct_scales(x, eps1, eps2);
        let profile = self.sensing_profile(s.sens, x);
        let mut inner = Inner::default();
        let mut f = |u: f64| {
            let y = self.ris.normalized_quantile(u);
            let region = ExclusionRegion::S1 { x, y, assoc_scale: self.c };
            inner.absorb(exp_of(self.vlos_exponent(s, &profile, y, region, None)))
        };
        // the lens boundary passes through the user at y = sqrt(c x)
        let kink = self.ris_u((self.c * x).sqrt());
        let rep = unit_quantile_integral(&mut f, kink, MID);
        let mut rep = inner.finish(rep);
        rep.value = (1.0 - ris_mass) + ris_mass * rep.value;
        rep.abs_error_estimate *= ris_mass;
        Ok(rep)
    }

    /// LoS-interferer functional when served through a RIS with length `eta`.
    pub fn xi2_los(&self, eta: f64, eps1: f64, eps2: f64) -> Result<QuadratureReport> {
        Self::thresholds_ok(eps1, eps2)?;
        Ok(self.xi2_cached(eta, eps1, eps2, &mut HashMap::new()))
    }

    /// VLoS-interferer functional when served through a RIS with length
    /// `eta`: an expectation over the serving-BS distance (outer) and the
    /// RIS distance (inner).
    pub fn gamma2_vlos(&self, eta: f64, eps1: f64, eps2: f64) -> Result<QuadratureReport> {
        Self::thresholds_ok(eps1, eps2)?;
        Ok(self.gamma2_cached(eta, eps1, eps2, &mut HashMap::new()))
    }

    fn xi2_cached(&self, eta: f64, eps1: f64, eps2: f64, profiles: &mut ProfileCache) -> QuadratureReport {
        if (eps1 == 0.0 && eps2 == 0.0)
            || self.params.lambda_b == 0.0
            || self.nlos.total_mass() == 0.0
        {
            return exact(1.0);
        }
        let s = self.cascaded_scales(eta, eps1, eps2);
        let r_min = eta / self.c;
        let mut inner = Inner::default();
        let mut f = |u: f64| {
            let x = self.nlos.normalized_quantile(u);
            let profile = profiles
                .entry(x.to_bits())
                .or_insert_with(|| self.sensing_profile(s.sens, x));
            inner.absorb(exp_of(self.los_exponent(s, profile, r_min)))
        };
        let rep = unit_quantile_integral(&mut f, 0.5, MID);
        inner.finish(rep)
    }

    fn gamma2_cached(&self, eta: f64, eps1: f64, eps2: f64, profiles: &mut ProfileCache) -> QuadratureReport {
        if (eps1 == 0.0 && eps2 == 0.0)
            || self.ris.total_mass() == 0.0
            || self.nlos.total_mass() == 0.0
        {
            return exact(1.0);
        }
        let s = self.cascaded_scales(eta, eps1, eps2);
        let kink = self.ris_u(eta.sqrt());
        let mut memo = HashMap::new();
        let mut outer_inner = Inner::default();
        let mut f = |ux: f64| {
            let x = self.nlos.normalized_quantile(ux);
            let profile = profiles
                .entry(x.to_bits())
                .or_insert_with(|| self.sensing_profile(s.sens, x));
            let mut inner = Inner::default();
            let mut g = |uy: f64| {
                let y = self.ris.normalized_quantile(uy);
                let region = ExclusionRegion::S3 { eta, y };
                inner.absorb(exp_of(self.vlos_exponent(s, profile, y, region, Some(&mut memo))))
            };
            let rep = unit_quantile_integral(&mut g, kink, MID);
            outer_inner.absorb(inner.finish(rep))
        };
        let rep = unit_quantile_integral(&mut f, 0.5, MID);
        outer_inner.finish(rep)
    }

    /// Communication-plus-sensing success probability given a direct link at
    /// distance `x`.
    fn direct_integrand(&self, x: f64, eps1: f64, eps2: f64) -> Result<(f64, f64, u64, bool)> {
        let s = self.direct_scales(x, eps1, eps2);
        let noise = self.noise_factor(s);
        if noise < NEGLIGIBLE {
            return Ok((0.0, noise, 1, true));
        }
        let xi = self.xi1_los(x, eps1, eps2)?;
        let ga = self.gamma1_vlos(x, eps1, eps2)?;
        let v = noise * xi.value * ga.value;
        let err = noise * (xi.abs_error_estimate + ga.abs_error_estimate);
        Ok((v, err, xi.evaluations + ga.evaluations, xi.converged && ga.converged))
    }

    /// `weight` multiplies the result in the caller; when the weighted value
    /// is below [`NEGLIGIBLE_WEIGHTED`] even with the VLoS factor at its upper
    /// bound of one, that factor is skipped and the bound booked as error.
    fn cascaded_integrand(&self, eta: f64, eps1: f64, eps2: f64, weight: f64) -> Result<(f64, f64, u64, bool)> {
        let s = self.cascaded_scales(eta, eps1, eps2);
        let noise = self.noise_factor(s);
        if noise < NEGLIGIBLE {
            return Ok((0.0, noise, 1, true));
        }
        let mut profiles = HashMap::new();
        let xi = self.xi2_cached(eta, eps1, eps2, &mut profiles);
        if noise * xi.value * weight < NEGLIGIBLE_WEIGHTED {
            return Ok((0.0, noise * (xi.value + xi.abs_error_estimate), xi.evaluations, xi.converged));
        }
        let ga = self.gamma2_cached(eta, eps1, eps2, &mut profiles);
        let v = noise * xi.value * ga.value;
        let err = noise * (xi.abs_error_estimate + ga.abs_error_estimate);
        Ok((v, err, xi.evaluations + ga.evaluations, xi.converged && ga.converged))
    }

    /// `P(covered, direct association)`: the direct term of the marginal
    /// coverage.
    pub fn direct_term(&self, eps1: f64, eps2: f64) -> Result<QuadratureReport> {
        Self::thresholds_ok(eps1, eps2)?;
        let zbar = self.los.total_mass();
        if zbar == 0.0 {
            return Ok(exact(0.0));
        }
        let mut failure = None;
        let mut inner_err = 0.0;
        let mut evals = 0;
        let mut ok = true;
        let mut f = |u: f64| {
            if failure.is_some() {
                return 0.0;
            }
            let x = self.los.normalized_quantile(u);
            let weight = 1.0 - self.casc.cdf(self.c * x);
            if weight <= 0.0 {
                return 0.0;
            }
            match self.direct_integrand(x, eps1, eps2) {
                Ok((v, e, n, c)) => {
                    inner_err += e * weight;
                    evals += n;
                    ok &= c;
                    v * weight
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        };
        let mut rep = unit_quantile_integral(&mut f, 0.5, Adaptive::new(self.outer_rel_tol * 0.3, 1e-7).with_rule(KronrodRule::Gk15));
        if let Some(e) = failure {
            return Err(e);
        }
        let n_nodes = rep.evaluations.max(1) as f64;
        rep.value *= zbar;
        rep.abs_error_estimate = zbar * (rep.abs_error_estimate + inner_err / n_nodes);
        rep.evaluations += evals;
        rep.converged &= ok;
        Ok(rep)
    }

    /// Range `[lo, hi]` of cascaded lengths holding all but `tail` of the
    /// mass of `eta0` on each side.
    fn eta_range(&self, tail: f64) -> (f64, f64) {
        let mass = self.casc.total_mass();
        let lo_target = tail * mass;
        let hi_target = (1.0 - tail) * mass;
        let mut hi = 1.0;
        while self.casc.cdf(hi) < hi_target && hi < self.casc.support_end() {
            hi *= 2.0;
        }
        let mut lo = hi;
        while self.casc.cdf(lo) > lo_target && lo > 1e-6 {
            lo *= 0.5;
        }
        let in_log = |target: f64, a: f64, b: f64| {
            let (mut a, mut b) = (a.ln(), b.ln());
            for _ in 0..40 {
                let m = 0.5 * (a + b);
                if self.casc.cdf(m.exp()) < target {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let lo_t = in_log(lo_target, lo, hi);
        let hi_t = in_log(hi_target, lo_t.exp(), hi);
        (lo_t.exp(), hi_t.exp())
    }

    /// `P(covered, cascaded association)`: the cascaded term of the marginal
    /// coverage.
    pub fn cascaded_term(&self, eps1: f64, eps2: f64) -> Result<QuadratureReport> {
        Self::thresholds_ok(eps1, eps2)?;
        if self.casc.total_mass() == 0.0 {
            return Ok(exact(0.0));
        }
        let tail = 1e-7;
        let (lo, hi) = *self.eta_window.get_or_init(|| self.eta_range(tail));
        let mut failure = None;
        let mut inner_err = 0.0;
        let mut evals = 0;
        let mut ok = true;
        let mut f = |t: f64| {
            if failure.is_some() {
                return 0.0;
            }
            let eta = t.exp();
            let weight = 1.0 - self.los.cdf(eta / self.c);
            let dens = self.casc.pdf_report(eta);
            ok &= dens.converged;
            let w = weight * dens.value * eta;
            if w <= 0.0 {
                return 0.0;
            }
            match self.cascaded_integrand(eta, eps1, eps2, w) {
                Ok((v, e, n, c)) => {
                    inner_err += e * w + v * eta * weight * dens.abs_error_estimate;
                    evals += n + dens.evaluations;
                    ok &= c;
                    v * w
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        };
        let (a, b) = (lo.ln(), hi.ln());
        let breaks = [a, 0.5 * (a + b), b];
        let mut rep = integrate_1d_with(&mut f, &breaks, Adaptive::new(self.outer_rel_tol * 0.3, 1e-7).with_rule(KronrodRule::Gk15));
        if let Some(e) = failure {
            return Err(e);
        }
        let n_nodes = rep.evaluations.max(1) as f64;
        rep.abs_error_estimate += inner_err * (b - a) / n_nodes + 2.0 * tail * self.casc.total_mass();
        rep.evaluations += evals;
        rep.converged &= ok;
        Ok(rep)
    }

    pub fn association(&self) -> Result<AssociationProbabilities> {
        if let Some(a) = self.assoc.get() {
            return Ok(a.clone());
        }
        let a = analytic_association(&self.params)?;
        Ok(self.assoc.get_or_init(|| a).clone())
    }

    /// Coverage conditional on direct association.
    pub fn coverage_given_los(&self, eps1: f64, eps2: f64) -> Result<f64> {
        let a = self.association()?;
        let t = require_converged(self.direct_term(eps1, eps2)?, "direct-case coverage")?;
        Ok(conditional(t.value, a.zeta_d))
    }

    /// Coverage conditional on cascaded association.
    pub fn coverage_given_vlos(&self, eps1: f64, eps2: f64) -> Result<f64> {
        let a = self.association()?;
        let t = require_converged(self.cascaded_term(eps1, eps2)?, "cascaded-case coverage")?;
        Ok(conditional(t.value, a.zeta_v))
    }

    /// Marginal coverage: sum of the two association-weighted terms, with an
    /// error budget aggregated from all quadrature layers.
    pub fn marginal_coverage(&self, eps1: f64, eps2: f64) -> Result<CoverageResult> {
        let a = self.association()?;
        let d = self.direct_term(eps1, eps2)?;
        let v = self.cascaded_term(eps1, eps2)?;
        let mut warnings = d.warnings.clone();
        warnings.extend(v.warnings.iter().cloned());
        let converged = d.converged && v.converged;
        if !converged {
            return Err(Error::NonConvergence {
                context: format!("marginal coverage at eps1={eps1}, eps2={eps2}"),
                value: d.value + v.value,
                abs_error: d.abs_error_estimate + v.abs_error_estimate,
            });
        }
        Ok(CoverageResult {
            p_cs: (d.value + v.value).clamp(0.0, 1.0),
            uncertainty: Uncertainty::Analytic {
                error_budget: d.abs_error_estimate + v.abs_error_estimate + a.abs_error,
                evaluations: d.evaluations + v.evaluations,
                warnings,
            },
            breakdown: CaseBreakdown {
                zeta_d: a.zeta_d,
                zeta_v: a.zeta_v,
                p_d: conditional(d.value, a.zeta_d),
                p_v: conditional(v.value, a.zeta_v),
            },
        })
    }
}

/// `int_0^1 f(u) du` for `f` evaluated through a distance quantile. The
/// smoothstep substitution `u = 3v^2 - 2v^3` flattens the square-root and
/// logarithmic behaviour of quantiles at both ends; `kink` is an interior
/// point in `u` where `f` is known to have a derivative jump.
fn unit_quantile_integral(f: &mut impl FnMut(f64) -> f64, kink: f64, cfg: Adaptive) -> QuadratureReport {
    let smoothstep = |v: f64| v * v * (3.0 - 2.0 * v);
    // smoothstep is increasing on [0, 1]; invert by bisection
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if smoothstep(mid) < kink {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_kink = 0.5 * (lo + hi);
    let mut g = |v: f64| {
        let w = 6.0 * v * (1.0 - v);
        if w == 0.0 {
            0.0
        } else {
            f(smoothstep(v)) * w
        }
    };
    integrate_1d_with(&mut g, &[0.0, v_kink, 1.0], cfg)
}

fn conditional(joint: f64, prob: f64) -> f64 {
    if prob > 0.0 {
        (joint / prob).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn require_converged(rep: QuadratureReport, context: &str) -> Result<QuadratureReport> {
    if rep.converged {
        Ok(rep)
    } else {
        Err(Error::NonConvergence {
            context: context.into(),
            value: rep.value,
            abs_error: rep.abs_error_estimate,
        })
    }
}

fn exact(value: f64) -> QuadratureReport {
    QuadratureReport {
        value,
        abs_error_estimate: 0.0,
        evaluations: 1,
        converged: true,
        warnings: Vec::new(),
    }
}

/// `exp(-E)` with the exponent's error carried through.
fn exp_of(e: QuadratureReport) -> QuadratureReport {
    let v = (-e.value.max(0.0)).exp();
    QuadratureReport {
        value: v,
        abs_error_estimate: v * e.abs_error_estimate,
        ..e
    }
}

fn value_of(rep: Result<QuadratureReport>, context: &str) -> Result<f64> {
    require_converged(rep?, context).map(|r| r.value)
}

pub fn xi1_los(x: f64, eps1: f64, eps2: f64, params: &ScenarioParams) -> Result<f64> {
    value_of(AnalyticModel::new(params)?.xi1_los(x, eps1, eps2), "LoS functional")
}

pub fn gamma1_vlos(x: f64, eps1: f64, eps2: f64, params: &ScenarioParams) -> Result<f64> {
    value_of(AnalyticModel::new(params)?.gamma1_vlos(x, eps1, eps2), "VLoS functional")
}

pub fn xi2_los(eta: f64, eps1: f64, eps2: f64, params: &ScenarioParams) -> Result<f64> {
    value_of(AnalyticModel::new(params)?.xi2_los(eta, eps1, eps2), "LoS functional")
}

pub fn gamma2_vlos(eta: f64, eps1: f64, eps2: f64, params: &ScenarioParams) -> Result<f64> {
    value_of(AnalyticModel::new(params)?.gamma2_vlos(eta, eps1, eps2), "VLoS functional")
}

pub fn coverage_given_los(eps1: f64, eps2: f64, params: &ScenarioParams) -> Result<f64> {
    AnalyticModel::new(params)?.coverage_given_los(eps1, eps2)
}

pub fn coverage_given_vlos(eps1: f64, eps2: f64, params: &ScenarioParams) -> Result<f64> {
    AnalyticModel::new(params)?.coverage_given_vlos(eps1, eps2)
}

pub fn marginal_coverage(eps1: f64, eps2: f64, params: &ScenarioParams) -> Result<CoverageResult> {
    AnalyticModel::new(params)?.marginal_coverage(eps1, eps2)
}
