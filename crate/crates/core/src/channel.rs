//! Path loss, small-scale fading and the sector beam-gain model.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, invalid, Result};
use crate::params::ScenarioParams;

/// `c0 * d^-alpha`.
pub fn path_loss_direct(d: f64, c0: f64, alpha: f64) -> Result<f64> {
    check_positive("d", d)?;
    Ok(c0 * d.powf(-alpha))
}

/// `c0 * (d1 * d2)^-alpha` for the BS -> RIS -> user path.
pub fn path_loss_cascaded(d1: f64, d2: f64, c0: f64, alpha: f64) -> Result<f64> {
    check_positive("d1", d1)?;
    check_positive("d2", d2)?;
    Ok(c0 * (d1 * d2).powf(-alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainLevel {
    pub gain: f64,
    pub prob: f64,
}

/// Discrete beam-gain law: levels sorted by descending gain, probabilities
/// summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainDistribution {
    levels: Vec<GainLevel>,
}

impl GainDistribution {
    /// Sorts the levels, merges equal gains and checks the probabilities.
    pub fn new(mut levels: Vec<GainLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("levels", "at least one level is required"));
        }
        for l in &levels {
            if !(l.gain.is_finite() && l.gain > 0.0) {
                return Err(invalid("levels", format!("gain must be > 0, got {}", l.gain)));
            }
            if !(0.0..=1.0).contains(&l.prob) {
                return Err(invalid("levels", format!("probability out of range: {}", l.prob)));
            }
        }
        levels.sort_by(|a, b| b.gain.total_cmp(&a.gain));
        let mut merged: Vec<GainLevel> = Vec::with_capacity(levels.len());
        for l in levels {
            match merged.last_mut() {
                Some(last) if (last.gain - l.gain).abs() <= 1e-12 * last.gain => last.prob += l.prob,
                _ => merged.push(l),
            }
        }
        let total: f64 = merged.iter().map(|l| l.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("levels", format!("probabilities sum to {total}")));
        }
        Ok(Self { levels: merged })
    }

    pub fn levels(&self) -> &[GainLevel] {
        &self.levels
    }

    pub fn mean(&self) -> f64 {
        self.levels.iter().map(|l| l.gain * l.prob).sum()
    }

    /// Inverse-CDF draw from a uniform variate.
    pub fn sample_with(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for l in &self.levels {
            acc += l.prob;
            if u < acc {
                return l.gain;
            }
        }
        self.levels[self.levels.len() - 1].gain
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_with(rng.random::<f64>())
    }
}

/// Probability that a uniformly random direction falls in the main lobe of an
/// `n`-element array, `arcsin(1/n) / pi`.
pub fn main_lobe_probability(n: f64) -> f64 {
    (1.0 / n).asin() / PI
}

/// Two-level BS beam gain: `main` with the main-lobe probability, `side`
/// otherwise.
pub fn direct_gain_levels(main: u32, side: f64) -> Result<GainDistribution> {
    if main == 0 {
        return Err(invalid("m_t", "must be >= 1"));
    }
    let p = main_lobe_probability(main as f64);
    GainDistribution::new(vec![
        GainLevel {
            gain: main as f64,
            prob: p,
        },
        GainLevel {
            gain: side,
            prob: 1.0 - p,
        },
    ])
}

/// Four-level BS x RIS beam gain of the cascaded link. `ris_side` is the RIS
/// side-lobe amplitude; gains use its square.
pub fn cascaded_gain_levels(
    main: u32,
    side: f64,
    ris_elems: u32,
    ris_side: f64,
) -> Result<GainDistribution> {
    if main == 0 || ris_elems == 0 {
        return Err(invalid("n_r_elems", "antenna counts must be >= 1"));
    }
    let a_m = (1.0 / main as f64).asin();
    let a_n = (1.0 / ris_elems as f64).asin();
    let pi2 = PI * PI;
    let n2 = (ris_elems as f64).powi(2);
    let s2 = ris_side * ris_side;
    let m = main as f64;
    GainDistribution::new(vec![
        GainLevel {
            gain: m * n2,
            prob: a_n * a_m / pi2,
        },
        GainLevel {
            gain: m * s2,
            prob: (PI - a_n) * a_m / pi2,
        },
        GainLevel {
            gain: side * n2,
            prob: (PI - a_m) * a_n / pi2,
        },
        GainLevel {
            gain: side * s2,
            prob: (PI - a_m) * (PI - a_n) / pi2,
        },
    ])
}

pub fn direct_gain_distribution(params: &ScenarioParams) -> Result<GainDistribution> {
    direct_gain_levels(params.m_t, params.side_lobe_tx)
}

pub fn cascaded_gain_distribution(params: &ScenarioParams) -> Result<GainDistribution> {
    cascaded_gain_levels(
        params.m_t,
        params.side_lobe_tx,
        params.n_r_elems,
        params.side_lobe_ris,
    )
}

/// `sin(m u / 2) / sin(u / 2)`, continuous at `u = 0`.
fn dirichlet_kernel(u: f64, m: u32) -> f64 {
    let m = m as f64;
    if u.abs() < 1e-9 {
        m * (1.0 - (m * m - 1.0) * u * u / 24.0)
    } else {
        (0.5 * m * u).sin() / (0.5 * u).sin()
    }
}

/// Uniform linear array factor between directions `theta1` and `theta2`.
pub fn exact_array_factor_g1(theta1: f64, theta2: f64, m: u32) -> f64 {
    dirichlet_kernel(theta1.sin() - theta2.sin(), m)
}

/// RIS array factor with the reflection phase `phi`.
pub fn exact_array_factor_g2(theta1: f64, theta2: f64, phi: f64, n: u32) -> f64 {
    dirichlet_kernel(theta1.sin() - theta2.sin() + phi, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingDraw {
    pub value: f64,
    pub rate: f64,
}

/// Exponential power-fading draw, deterministic for a given seed.
pub fn sample_fading(rate: f64, seed: u64) -> Result<FadingDraw> {
    check_positive("rate", rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(FadingDraw {
        value: exp_variate(&mut rng, rate),
        rate,
    })
}

/// Exp(`rate`) by inversion.
#[inline]
pub fn exp_variate<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // 1 - u lies in (0, 1], so the log is finite
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// `E[exp(-s |xi|^2 D)]` for `|xi|^2 ~ Exp(rate)` independent of the discrete
/// beam gain `D`: `sum_k b_k rate / (rate + s a_k)`.
#[inline]
pub fn laplace_fading_gain(s: f64, dist: &GainDistribution, rate: f64) -> f64 {
    dist.levels
        .iter()
        .map(|l| l.prob * rate / (rate + s * l.gain))
        .sum()
}

/// `1 - laplace_fading_gain(s, dist, rate)` without cancellation for small
/// `s`.
#[inline]
pub fn laplace_fading_complement(s: f64, dist: &GainDistribution, rate: f64) -> f64 {
    dist.levels
        .iter()
        .map(|l| {
            let sa = s * l.gain;
            l.prob * sa / (rate + sa)
        })
        .sum()
}
