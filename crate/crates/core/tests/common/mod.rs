//! Brute-force reference implementations of the interference functionals.
//!
//! These deliberately share nothing with the production quadrature: every
//! exponent is a plain low-discrepancy average over the full interferer
//! domain (radius, angle around the RIS, angle around the serving BS) with
//! an indicator for the exclusion region, and every outer expectation is a
//! midpoint rule on a square-root-stretched quantile grid.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riscov::channel::{cascaded_gain_distribution, direct_gain_distribution, GainDistribution};
use riscov::distributions::{los_bs_law, los_ris_law, nlos_bs_law, CascadedLengthLaw};
use riscov::units::db_to_linear;
use riscov::ScenarioParams;

/// Additive recurrence with the generalised golden ratio of dimension `d`.
pub struct R2 {
    alpha: Vec<f64>,
}

impl R2 {
    pub fn new(d: usize) -> Self {
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
        }
        Self {
            alpha: (1..=d).map(|i| (1.0 / phi.powi(i as i32)).fract()).collect(),
        }
    }

    pub fn point(&self, n: u64, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.alpha) {
            *o = (0.5 + a * n as f64).fract();
        }
    }
}

fn success(s: f64, levels: &[(f64, f64)], rate: f64) -> f64 {
    levels.iter().map(|&(a, b)| b * rate / (rate + s * a)).sum()
}

fn table(g: &GainDistribution) -> Vec<(f64, f64)> {
    g.levels().iter().map(|l| (l.gain, l.prob)).collect()
}

/// Oracle bound to one scenario and one threshold pair.
pub struct Oracle {
    p: ScenarioParams,
    gd: Vec<(f64, f64)>,
    gv: Vec<(f64, f64)>,
    eps1: f64,
    eps2: f64,
    /// Points per exponent.
    pub inner_points: u64,
    /// Nodes per outer expectation.
    pub outer_nodes: usize,
}

impl Oracle {
    pub fn new(p: &ScenarioParams, eps1: f64, eps2: f64) -> Self {
        Self {
            p: p.clone(),
            gd: table(&direct_gain_distribution(p).unwrap()),
            gv: table(&cascaded_gain_distribution(p).unwrap()),
            eps1,
            eps2,
            inner_points: 1 << 15,
            outer_nodes: 96,
        }
    }

    fn beta(&self) -> f64 {
        2.0 * self.p.lambda_l * self.p.mean_blockage_len / PI
    }

    fn los(&self, r: f64) -> f64 {
        self.p.lambda_b * (-self.beta() * r).exp()
    }

    fn nlos(&self, r: f64) -> f64 {
        self.p.lambda_b * (1.0 - (-self.beta() * r).exp())
    }

    /// `(comm, sens)` scales of a direct link of length `x`.
    fn direct(&self, x: f64) -> (f64, f64) {
        let p = &self.p;
        let mt = p.m_t as f64;
        (
            p.rho_d * self.eps1 * x.powf(p.alpha) / mt,
            self.eps2 * x.powf(2.0 * p.alpha) / (p.p_s * mt * p.m_r as f64),
        )
    }

    /// `(comm, sens)` scales of a cascaded link of length `eta`.
    fn cascaded(&self, eta: f64) -> (f64, f64) {
        let p = &self.p;
        let mt = p.m_t as f64;
        let n2 = (p.n_r_elems as f64).powi(2);
        (
            p.rho_v * self.eps1 * eta.powf(p.alpha) / (mt * n2),
            self.eps2 * eta.powf(2.0 * p.alpha) / (p.p_s * mt * p.m_r as f64 * n2 * n2),
        )
    }

    /// Average of `f(u)` over the unit interval for `f` defined through a
    /// distance quantile: midpoint rule in `v` with `u = v^2`.
    fn outer(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let n = self.outer_nodes;
        (0..n)
            .map(|i| {
                let v = (i as f64 + 0.5) / n as f64;
                2.0 * v * f(v * v)
            })
            .sum::<f64>()
            / n as f64
    }

    /// Radius from `t` in `[0, 1)` with scale `len`, and its Jacobian.
    fn radius(start: f64, len: f64, t: f64) -> (f64, f64) {
        (start + len * t / (1.0 - t), len / ((1.0 - t) * (1.0 - t)))
    }

    /// Exponent of a LoS-interferer functional: interferers at `r >= r_min`
    /// around the user, serving BS at `x`.
    fn los_exponent(&self, comm: f64, sens: f64, x: f64, r_min: f64) -> f64 {
        let alpha = self.p.alpha;
        let seq = R2::new(2);
        let mut pt = [0.0; 2];
        let len = r_min.max(1.0 / self.beta().max(1e-6));
        let mut acc = 0.0;
        for n in 0..self.inner_points {
            seq.point(n, &mut pt);
            let (r, jac) = Self::radius(r_min, len, pt[0]);
            let phi = 2.0 * PI * pt[1];
            let d_b = (x * x + r * r - 2.0 * x * r * phi.cos()).max(1e-300).sqrt();
            let k = success(comm * r.powf(-alpha), &self.gd, self.p.rho_d)
                * success(sens * d_b.powf(-alpha), &self.gd, self.p.rho_ds);
            acc += 2.0 * PI * self.los(r) * r * (1.0 - k) * jac;
        }
        acc / self.inner_points as f64
    }

    /// Exponent of a VLoS-interferer functional with the RIS at `y`;
    /// `excluded(d_ris)` flags interferers inside the exclusion region.
    fn vlos_exponent(&self, comm: f64, sens: f64, x: f64, y: f64, excluded: impl Fn(f64) -> bool) -> f64 {
        let alpha = self.p.alpha;
        let seq = R2::new(3);
        let mut pt = [0.0; 3];
        let len = y.max(x).max(1.0 / self.beta().max(1e-6));
        let mut acc = 0.0;
        for n in 0..self.inner_points {
            seq.point(n, &mut pt);
            let (r, jac) = Self::radius(0.0, len, pt[0]);
            let theta = 2.0 * PI * pt[1];
            let d_r = (r * r + y * y - 2.0 * r * y * theta.cos()).max(0.0).sqrt();
            if excluded(d_r) {
                continue;
            }
            let phi = 2.0 * PI * pt[2];
            let d_b = (x * x + r * r - 2.0 * x * r * phi.cos()).max(1e-300).sqrt();
            let k = success(comm * (y * d_r).powf(-alpha), &self.gv, self.p.rho_v)
                * success(sens * d_b.powf(-alpha), &self.gd, self.p.rho_ds);
            acc += 2.0 * PI * self.nlos(r) * r * (1.0 - k) * jac;
        }
        acc / self.inner_points as f64
    }

    pub fn xi1(&self, x: f64) -> f64 {
        let (c, s) = self.direct(x);
        (-self.los_exponent(c, s, x, x)).exp()
    }

    pub fn gamma1(&self, x: f64) -> f64 {
        let (c, s) = self.direct(x);
        let ris = los_ris_law(&self.p);
        let scale = self.p.assoc_scale();
        let mean = self.outer(|u| {
            let y = ris.normalized_quantile(u);
            (-self.vlos_exponent(c, s, x, y, |d| y * d < scale * x)).exp()
        });
        let m = ris.total_mass();
        (1.0 - m) + m * mean
    }

    pub fn xi2(&self, eta: f64) -> f64 {
        let (c, s) = self.cascaded(eta);
        let bs = nlos_bs_law(&self.p);
        let r_min = eta / self.p.assoc_scale();
        self.outer(|u| {
            let x = bs.normalized_quantile(u);
            (-self.los_exponent(c, s, x, r_min)).exp()
        })
    }

    pub fn gamma2(&self, eta: f64) -> f64 {
        let (c, s) = self.cascaded(eta);
        let bs = nlos_bs_law(&self.p);
        let ris = los_ris_law(&self.p);
        self.outer(|ux| {
            let x = bs.normalized_quantile(ux);
            self.outer(|uy| {
                let y = ris.normalized_quantile(uy);
                (-self.vlos_exponent(c, s, x, y, |d| d < eta / y)).exp()
            })
        })
    }
}

/// A randomised scenario, threshold pair and evaluation points.
#[derive(Debug, Clone)]
pub struct RandomPoint {
    pub params: ScenarioParams,
    pub eps1: f64,
    pub eps2: f64,
    pub x: f64,
    pub eta: f64,
}

/// Draws a scenario with moderate densities and thresholds, a direct link
/// length from the middle of the LoS law and a cascaded length from the
/// middle of the cascaded law.
pub fn random_point(seed: u64) -> RandomPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ScenarioParams::default().with_densities_km2(
        rng.random_range(50.0..150.0),
        rng.random_range(150.0..900.0),
        rng.random_range(200.0..600.0),
    );
    let eps1 = db_to_linear(rng.random_range(-10.0..10.0));
    let eps2 = db_to_linear(rng.random_range(-50.0..-30.0));
    let x = los_bs_law(&params).normalized_quantile(rng.random_range(0.2..0.8));
    let casc = CascadedLengthLaw::new(&params);
    let target = rng.random_range(0.2..0.8) * casc.total_mass();
    let (mut lo, mut hi) = (1e-3f64, 1e6f64);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if casc.cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    RandomPoint { params, eps1, eps2, x, eta: (lo * hi).sqrt() }
}

pub fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-300)
}
