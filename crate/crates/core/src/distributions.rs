//! Nearest-point distance laws, the cascaded path-length law and the
//! association probabilities built on them.
//!
//! Radial laws use the closed-form cumulative intensities of the thinned
//! processes. The cascaded length `eta = d_BR * d_RU` is handled by
//! conditioning on the nearest LoS RIS distance `y`; its conditional CDF is a
//! one-dimensional integral and its density is a central finite difference of
//! that CDF.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{GreedyTarget, ScenarioParams};
use crate::quadrature::{integrate_1d_with, Adaptive, QuadratureReport};

/// `1 - e^{-t}(1 + t)`, accurate for small `t`.
fn g_los(t: f64) -> f64 {
    if t < 0.05 {
        let mut term = t * t / 2.0;
        let mut sum = 0.0;
        // sum_{k>=2} (-1)^k (k-1)/k! t^k
        for k in 2..30u32 {
            let c = (k - 1) as f64;
            sum += if k % 2 == 0 { c * term } else { -c * term };
            term *= t / (k + 1) as f64;
        }
        sum
    } else {
        -(-t).exp_m1() - t * (-t).exp()
    }
}

/// `t^2/2 - (1 - e^{-t}(1 + t))`, accurate for small `t`.
fn h_nlos(t: f64) -> f64 {
    if t < 0.5 {
        // -sum_{k>=3} (-1)^k (k-1)/k! t^k
        let mut term = t * t * t / 6.0;
        let mut sum = 0.0;
        for k in 3..40u32 {
            let c = (k - 1) as f64;
            sum += if k % 2 == 1 { c * term } else { -c * term };
            term *= t / (k + 1) as f64;
        }
        sum
    } else {
        0.5 * t * t - g_los(t)
    }
}

/// Whether a radial law follows the LoS or the NLoS thinning of its base
/// process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Los,
    Nlos,
}

/// Distance from the origin to the nearest point of a radially thinned PPP
/// with intensity `base * e^{-beta r}` (LoS) or `base * (1 - e^{-beta r})`
/// (NLoS), optionally scaled by an independent existence probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialNearest {
    pub base: f64,
    pub beta: f64,
    pub visibility: Visibility,
    /// Probability of an independent event that must also hold for the point
    /// to count (1 for plain nearest-point laws).
    pub existence: f64,
}

impl RadialNearest {
    pub fn new(base: f64, beta: f64, visibility: Visibility) -> Self {
        Self {
            base,
            beta,
            visibility,
            existence: 1.0,
        }
    }

    pub fn intensity(&self, r: f64) -> f64 {
        match self.visibility {
            Visibility::Los => self.base * (-self.beta * r).exp(),
            Visibility::Nlos => self.base * (-(-self.beta * r).exp_m1()),
        }
    }

    /// `2 pi int_0^x intensity(r) r dr`.
    pub fn cumulative(&self, x: f64) -> f64 {
        let b = self.beta;
        match self.visibility {
            Visibility::Los if b == 0.0 => PI * self.base * x * x,
            Visibility::Los => 2.0 * PI * self.base * g_los(b * x) / (b * b),
            Visibility::Nlos if b == 0.0 => 0.0,
            Visibility::Nlos => 2.0 * PI * self.base * h_nlos(b * x) / (b * b),
        }
    }

    /// `2 pi int_0^inf intensity(r) r dr` (possibly infinite).
    pub fn cumulative_total(&self) -> f64 {
        match self.visibility {
            Visibility::Los if self.beta == 0.0 => {
                if self.base > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Visibility::Los => 2.0 * PI * self.base / (self.beta * self.beta),
            Visibility::Nlos if self.beta == 0.0 || self.base == 0.0 => 0.0,
            Visibility::Nlos => f64::INFINITY,
        }
    }

    /// Cumulative intensity beyond `x`, without cancellation.
    fn cumulative_tail(&self, x: f64) -> f64 {
        match self.visibility {
            Visibility::Los if self.beta > 0.0 => {
                let t = self.beta * x;
                2.0 * PI * self.base * (-t).exp() * (1.0 + t) / (self.beta * self.beta)
            }
            _ => self.cumulative_total() - self.cumulative(x),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.existence * -(-self.cumulative_total()).exp_m1()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.existence * -(-self.cumulative(x)).exp_m1()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.existence * 2.0 * PI * self.intensity(x) * x * (-self.cumulative(x)).exp()
    }

    /// Probability mass beyond `x`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        let tail = self.cumulative_tail(x);
        if tail.is_infinite() {
            return self.existence * (-self.cumulative(x)).exp();
        }
        self.existence * (-self.cumulative(x)).exp() * -(-tail).exp_m1()
    }

    /// Smallest `x` whose tail mass is below `e^-40`.
    pub fn truncation_radius(&self) -> f64 {
        let limit = (-40.0f64).exp();
        if self.total_mass() <= limit {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.tail_mass(hi) > limit {
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        bisect(|x| self.tail_mass(x) <= limit, 0.0, hi)
    }

    /// Inverse CDF for `p` in `[0, total_mass)`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if self.existence <= 0.0 {
            return f64::INFINITY;
        }
        let target = -(-(p / self.existence)).ln_1p();
        if !target.is_finite() || target >= self.cumulative_total() {
            return f64::INFINITY;
        }
        let mut hi = 1.0;
        while self.cumulative(hi) < target {
            hi *= 2.0;
        }
        bisect(|x| self.cumulative(x) >= target, 0.0, hi)
    }

    /// Quantile of the law normalised to unit mass.
    pub fn normalized_quantile(&self, u: f64) -> f64 {
        self.quantile(u.min(1.0 - 1e-15) * self.total_mass())
    }
}

/// Smallest point of `[lo, hi]` where the monotone predicate turns true,
/// to floating-point resolution.
pub(crate) fn bisect(pred: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Nearest LoS BS from the typical user.
pub fn los_bs_law(params: &ScenarioParams) -> RadialNearest {
    RadialNearest::new(params.lambda_b, params.beta(), Visibility::Los)
}

/// Nearest NLoS BS from the typical user.
pub fn nlos_bs_law(params: &ScenarioParams) -> RadialNearest {
    RadialNearest::new(params.lambda_b, params.beta(), Visibility::Nlos)
}

/// Nearest LoS RIS from the typical user.
pub fn los_ris_law(params: &ScenarioParams) -> RadialNearest {
    RadialNearest::new(params.lambda_r, params.beta(), Visibility::Los)
}

/// Nearest VLoS BS: the nearest NLoS BS, counted only when a LoS RIS exists.
pub fn vlos_bs_law(params: &ScenarioParams) -> RadialNearest {
    let mut law = nlos_bs_law(params);
    law.existence = if params.lambda_r > 0.0 {
        1.0 - params.los_ris_void_probability()
    } else {
        0.0
    };
    law
}

/// Law of the cascaded length `eta0 = d_BR * d_RU` of the greedy cascaded
/// candidate.
#[derive(Debug, Clone)]
pub struct CascadedLengthLaw {
    ris: RadialNearest,
    nlos: RadialNearest,
    target: GreedyTarget,
    y_max: f64,
    x_max: f64,
}

impl CascadedLengthLaw {
    pub fn new(params: &ScenarioParams) -> Self {
        let ris = los_ris_law(params);
        let nlos = nlos_bs_law(params);
        Self {
            y_max: ris.truncation_radius(),
            x_max: nlos.truncation_radius(),
            ris,
            nlos,
            target: params.greedy_target,
        }
    }

    pub fn ris_law(&self) -> &RadialNearest {
        &self.ris
    }

    pub fn nlos_law(&self) -> &RadialNearest {
        &self.nlos
    }

    /// Probability that a cascaded candidate exists.
    pub fn total_mass(&self) -> f64 {
        self.ris.total_mass() * self.nlos.total_mass()
    }

    /// Upper bound on the support: `eta <= y (x + y)` for both greedy rules.
    pub fn support_end(&self) -> f64 {
        self.y_max * (self.x_max + self.y_max)
    }

    /// `P(eta0 <= eta | d_RU = y)`.
    pub fn conditional_cdf(&self, eta: f64, y: f64) -> f64 {
        if eta <= 0.0 || y <= 0.0 || self.nlos.total_mass() == 0.0 {
            return 0.0;
        }
        let rho = eta / y;
        let lo = (y - rho).abs();
        let hi = y + rho;
        match self.target {
            GreedyTarget::User => {
                // nearest NLoS BS within distance rho of the RIS
                let inside = if rho > y { self.nlos.cdf(rho - y) } else { 0.0 };
                let upper = hi.min(self.x_max.max(lo));
                if upper <= lo {
                    return inside;
                }
                let rep = lens_integral(lo, upper, |x| self.nlos.pdf(x) * lens_angle(x, y, rho) / PI);
                (inside + rep).min(1.0)
            }
            GreedyTarget::Ris => {
                // void probability of the NLoS process in the disk of radius
                // rho around the RIS
                let inside = if rho > y { self.nlos.cumulative(rho - y) } else { 0.0 };
                let rep = lens_integral(lo, hi, |r| 2.0 * self.nlos.intensity(r) * r * lens_angle(r, y, rho));
                -(-(inside + rep)).exp_m1()
            }
        }
    }

    /// `P(eta0 <= eta)` (defective: total mass is [`Self::total_mass`]).
    pub fn cdf_report(&self, eta: f64) -> QuadratureReport {
        let mass = self.ris.total_mass();
        let mut f = |u: f64| {
            let y = self.ris.normalized_quantile(u);
            self.conditional_cdf(eta, y)
        };
        let kink = self.ris.cdf(eta.sqrt()) / mass;
        let mut rep = integrate_1d_with(&mut f, &[0.0, kink, 1.0], Adaptive::new(1e-8, 1e-12));
        rep.value *= mass;
        rep.abs_error_estimate *= mass;
        rep
    }

    pub fn cdf(&self, eta: f64) -> f64 {
        if eta <= 0.0 || self.total_mass() == 0.0 {
            return 0.0;
        }
        self.cdf_report(eta).value
    }

    fn fd_step(eta: f64) -> f64 {
        (1e-3 * eta).max(1e-2)
    }

    fn pdf_with_step(&self, eta: f64, h: f64) -> QuadratureReport {
        let mass = self.ris.total_mass();
        let (a, b) = ((eta - h).max(0.0), eta + h);
        let mut f = |u: f64| {
            let y = self.ris.normalized_quantile(u);
            (self.conditional_cdf(b, y) - self.conditional_cdf(a, y)) / (b - a)
        };
        let mut breaks = vec![0.0, self.ris.cdf(a.sqrt()) / mass, self.ris.cdf(b.sqrt()) / mass, 1.0];
        breaks.dedup();
        let mut rep = integrate_1d_with(&mut f, &breaks, Adaptive::new(1e-6, 1e-16));
        rep.value *= mass;
        rep.abs_error_estimate *= mass;
        rep
    }

    /// Density of `eta0` by central differences of the conditional CDF,
    /// Richardson-extrapolated from steps `h` and `h/2`. The reported error
    /// includes the step-halving discrepancy.
    pub fn pdf_report(&self, eta: f64) -> QuadratureReport {
        if eta <= 0.0 || self.total_mass() == 0.0 {
            return QuadratureReport {
                value: 0.0,
                abs_error_estimate: 0.0,
                evaluations: 1,
                converged: true,
                warnings: Vec::new(),
            };
        }
        let h = Self::fd_step(eta);
        let coarse = self.pdf_with_step(eta, h);
        let fine = self.pdf_with_step(eta, 0.5 * h);
        let value = ((4.0 * fine.value - coarse.value) / 3.0).max(0.0);
        let step_error = (fine.value - coarse.value).abs() / 3.0;
        let mut rep = fine;
        rep.abs_error_estimate += step_error;
        rep.value = value;
        rep.evaluations += coarse.evaluations;
        rep.converged &= coarse.converged;
        rep
    }

    pub fn pdf(&self, eta: f64) -> f64 {
        self.pdf_report(eta).value
    }
}

/// `int_lo^hi g`, for integrands with square-root behaviour at both ends:
/// the substitution `x = lo + (hi - lo)(1 - cos t)/2` makes them smooth.
fn lens_integral(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let half = 0.5 * (hi - lo);
    let mut f = |t: f64| g(lo + half * (1.0 - t.cos())) * half * t.sin();
    integrate_1d_with(&mut f, &[0.0, PI], Adaptive::new(1e-10, 1e-15)).value
}

/// Angle `theta_max in [0, pi]` such that a point at distance `r` from the
/// origin and angle `theta` from the direction of a point at distance `y`
/// lies within `rho` of it iff `|theta| <= theta_max`.
pub(crate) fn lens_angle(r: f64, y: f64, rho: f64) -> f64 {
    if r <= 0.0 || y <= 0.0 {
        return if (r - y).abs() <= rho { PI } else { 0.0 };
    }
    let c = (r * r + y * y - rho * rho) / (2.0 * r * y);
    c.clamp(-1.0, 1.0).acos()
}

/// Which of the three nearest-link laws a [`DistanceDistribution`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    NearestLosBs,
    NearestVlosBs,
    CascadedLength,
}

impl DistanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::NearestLosBs => "nearest_los_bs",
            DistanceKind::NearestVlosBs => "nearest_vlos_bs",
            DistanceKind::CascadedLength => "cascaded_length",
        }
    }
}

#[derive(Debug, Clone)]
enum Law {
    Radial(RadialNearest),
    Cascaded(Box<CascadedLengthLaw>),
}

/// Density / CDF object of a (possibly defective) distance law.
#[derive(Debug, Clone)]
pub struct DistanceDistribution {
    kind: DistanceKind,
    law: Law,
    support: (f64, f64),
}

impl DistanceDistribution {
    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    /// `(0, truncation point)`; mass beyond it is below `e^-40` for the
    /// radial laws and zero for the cascaded length.
    pub fn support_hint(&self) -> (f64, f64) {
        self.support
    }

    pub fn total_mass(&self) -> f64 {
        match &self.law {
            Law::Radial(l) => l.total_mass(),
            Law::Cascaded(l) => l.total_mass(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Radial(l) => l.pdf(x),
            Law::Cascaded(l) => l.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Radial(l) => l.cdf(x),
            Law::Cascaded(l) => l.cdf(x),
        }
    }

    /// CDF tabulated at `points` log-spaced abscissae over six decades below
    /// the support end and linearly interpolated in `ln x`, for callers that
    /// need many evaluations of an expensive law.
    pub fn tabulated_cdf(&self, points: usize) -> TabulatedCdf {
        let end = self.support.1;
        let n = points.max(2);
        let xs: Vec<f64> = (0..n).map(|k| end * 1e-6f64.powf(1.0 - k as f64 / (n - 1) as f64)).collect();
        let fs = xs.iter().map(|&x| self.cdf(x)).collect();
        TabulatedCdf { xs, fs }
    }

    /// Density with non-convergence surfaced as an error naming `x`.
    pub fn try_pdf(&self, x: f64) -> Result<f64> {
        match &self.law {
            Law::Radial(l) => Ok(l.pdf(x)),
            Law::Cascaded(l) => {
                let rep = l.pdf_report(x);
                if rep.converged {
                    Ok(rep.value)
                } else {
                    Err(Error::NonConvergence {
                        context: format!("{} density at {x}", self.kind.name()),
                        value: rep.value,
                        abs_error: rep.abs_error_estimate,
                    })
                }
            }
        }
    }
}

/// Piecewise-linear (in `ln x`) interpolant of a CDF; see
/// [`DistanceDistribution::tabulated_cdf`].
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl TabulatedCdf {
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] {
            // CDFs vanish at zero; interpolate linearly in x below the grid
            return self.fs[0] * (x / self.xs[0]).max(0.0);
        }
        if x >= self.xs[last] {
            return self.fs[last];
        }
        let k = self.xs.partition_point(|&g| g <= x) - 1;
        let t = (x / self.xs[k]).ln() / (self.xs[k + 1] / self.xs[k]).ln();
        self.fs[k] + t * (self.fs[k + 1] - self.fs[k])
    }
}

/// Distance from the user to the nearest LoS BS.
pub fn nearest_los_bs_dist(params: &ScenarioParams) -> Result<DistanceDistribution> {
    params.validate()?;
    let law = los_bs_law(params);
    Ok(DistanceDistribution {
        kind: DistanceKind::NearestLosBs,
        support: (0.0, law.truncation_radius()),
        law: Law::Radial(law),
    })
}

/// Distance from the user to the nearest VLoS BS. The law is that of the
/// nearest NLoS BS, defective by the probability that no LoS RIS exists.
pub fn nearest_vlos_bs_dist(params: &ScenarioParams) -> Result<DistanceDistribution> {
    params.validate()?;
    let law = vlos_bs_law(params);
    Ok(DistanceDistribution {
        kind: DistanceKind::NearestVlosBs,
        support: (0.0, law.truncation_radius()),
        law: Law::Radial(law),
    })
}

/// Cascaded length of the greedy cascaded candidate.
pub fn cascaded_length_dist(params: &ScenarioParams) -> Result<DistanceDistribution> {
    params.validate()?;
    let law = CascadedLengthLaw::new(params);
    Ok(DistanceDistribution {
        kind: DistanceKind::CascadedLength,
        support: (0.0, law.support_end()),
        law: Law::Cascaded(Box::new(law)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationProbabilities {
    /// Probability of associating with a LoS BS.
    pub zeta_d: f64,
    /// Probability of associating through a RIS.
    pub zeta_v: f64,
    /// Probability that a LoS BS exists.
    pub zbar_d: f64,
    /// Probability that a cascaded candidate exists.
    pub zbar_v: f64,
    pub abs_error: f64,
}

/// `zeta_d = int f_L(x) (1 - F_eta0(c x)) dx` with `c = N_R^(2/alpha)` and
/// the two laws taken as independent; `zeta_v` follows from the same
/// integral because both candidates' existence events are known.
pub fn analytic_association(params: &ScenarioParams) -> Result<AssociationProbabilities> {
    params.validate()?;
    let los = los_bs_law(params);
    let casc = CascadedLengthLaw::new(params);
    let zbar_d = los.total_mass();
    let zbar_v = casc.total_mass();
    let c = params.assoc_scale();
    let (zeta_d, err) = if zbar_d == 0.0 {
        (0.0, 0.0)
    } else if zbar_v == 0.0 {
        (zbar_d, 0.0)
    } else {
        let mut f = |u: f64| {
            let x = los.normalized_quantile(u);
            1.0 - casc.cdf(c * x)
        };
        let rep = integrate_1d_with(&mut f, &[0.0, 1.0], Adaptive::new(1e-7, 1e-10));
        if !rep.converged {
            return Err(Error::NonConvergence {
                context: "association probability".into(),
                value: rep.value,
                abs_error: rep.abs_error_estimate,
            });
        }
        (zbar_d * rep.value, zbar_d * rep.abs_error_estimate)
    };
    let zeta_v = (zbar_v * (1.0 - zbar_d) + (zbar_d - zeta_d)).max(0.0);
    Ok(AssociationProbabilities {
        zeta_d: zeta_d.clamp(0.0, 1.0),
        zeta_v: zeta_v.min(1.0 - zeta_d.clamp(0.0, 1.0)),
        zbar_d,
        zbar_v,
        abs_error: err,
    })
}
