//! Point processes, blockage segments and line-of-sight classification.
//!
//! The typical user sits at the origin. BSs and RISs are homogeneous PPPs on a
//! disk of radius `window_radius`; blockages are segments whose centres form a
//! PPP on a slightly larger disk so that links near the window edge see an
//! unbiased blockage field.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_at_least, check_positive, invalid, Error, Result};
use crate::params::{LengthLaw, ScenarioParams};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const ORIGIN: Point2D = Point2D { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: r * c, y: r * s }
    }

    /// Distance to the origin.
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn angle(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageSegment {
    pub center: Point2D,
    pub length: f64,
    /// Radians in `[0, pi)`.
    pub orientation: f64,
}

impl BlockageSegment {
    pub fn endpoints(&self) -> (Point2D, Point2D) {
        let h = 0.5 * self.length;
        let (s, c) = self.orientation.sin_cos();
        (
            Point2D::new(self.center.x - h * c, self.center.y - h * s),
            Point2D::new(self.center.x + h * c, self.center.y + h * s),
        )
    }
}

/// How LoS flags are assigned to BSs and RISs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// Segment intersection against the sampled blockages.
    Explicit,
    /// Independent Bernoulli thinning with probability `exp(-beta r)`.
    #[default]
    Thinning,
}

impl FromStr for LinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(LinkMode::Explicit),
            "thinning" => Ok(LinkMode::Thinning),
            other => Err(invalid(
                "blockage_mode",
                format!("unknown mode `{other}` (expected `explicit` or `thinning`)"),
            )),
        }
    }
}

/// One sampled network drop around the typical user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub bs: Vec<Point2D>,
    pub ris: Vec<Point2D>,
    pub blockages: Vec<BlockageSegment>,
    pub window_radius: f64,
    /// Parallel to `bs`.
    pub bs_los: Vec<bool>,
    /// Parallel to `ris`.
    pub ris_los: Vec<bool>,
    pub seed: u64,
}

impl NetworkRealization {
    /// Builds an unclassified realization from explicit point sets; all LoS
    /// flags start out `false`.
    pub fn from_points(bs: Vec<Point2D>, ris: Vec<Point2D>, window_radius: f64) -> Self {
        let bs_los = vec![false; bs.len()];
        let ris_los = vec![false; ris.len()];
        Self {
            bs,
            ris,
            blockages: Vec::new(),
            window_radius,
            bs_los,
            ris_los,
            seed: 0,
        }
    }
}

/// Per-drop generator derived from `(master_seed, drop_index)`; the stream is
/// independent of the order in which drops are evaluated.
pub fn drop_rng(master_seed: u64, drop_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(drop_index);
    rng
}

fn check_window(window_radius: f64) -> Result<()> {
    check_positive("window_radius", window_radius)
}

/// Homogeneous PPP of the given intensity on the disk of radius
/// `window_radius` centred at the origin.
pub fn sample_ppp(density: f64, window_radius: f64, seed: u64) -> Result<Vec<Point2D>> {
    check_at_least("density", density, 0.0)?;
    check_window(window_radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_ppp_with(&mut rng, density, window_radius))
}

/// Same as [`sample_ppp`] but drawing from a caller-supplied generator.
/// Inputs are assumed validated.
pub fn sample_ppp_with<R: Rng + ?Sized>(rng: &mut R, density: f64, radius: f64) -> Vec<Point2D> {
    let mean = density * PI * radius * radius;
    let count = poisson_count(rng, mean);
    (0..count)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            Point2D::from_polar(r, a)
        })
        .collect()
}

fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let n: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    n as usize
}

/// Blockage segments with PPP centres on a disk of radius
/// `window_radius + mean_len`, uniform orientations and fixed lengths.
pub fn sample_blockages(
    lambda_l: f64,
    mean_len: f64,
    window_radius: f64,
    seed: u64,
) -> Result<Vec<BlockageSegment>> {
    sample_blockages_law(lambda_l, mean_len, LengthLaw::Fixed, window_radius, seed)
}

pub fn sample_blockages_law(
    lambda_l: f64,
    mean_len: f64,
    law: LengthLaw,
    window_radius: f64,
    seed: u64,
) -> Result<Vec<BlockageSegment>> {
    check_at_least("lambda_l", lambda_l, 0.0)?;
    check_positive("mean_len", mean_len)?;
    check_window(window_radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_blockages_with(&mut rng, lambda_l, mean_len, law, window_radius))
}

pub fn sample_blockages_with<R: Rng + ?Sized>(
    rng: &mut R,
    lambda_l: f64,
    mean_len: f64,
    law: LengthLaw,
    window_radius: f64,
) -> Vec<BlockageSegment> {
    let centers = sample_ppp_with(rng, lambda_l, window_radius + mean_len);
    centers
        .into_iter()
        .map(|center| {
            let orientation = PI * rng.random::<f64>();
            let length = match law {
                LengthLaw::Fixed => mean_len,
                // (0, 2 * mean]: never a degenerate zero-length segment
                LengthLaw::Uniform => 2.0 * mean_len * (1.0 - rng.random::<f64>()),
            };
            BlockageSegment {
                center,
                length,
                orientation,
            }
        })
        .collect()
}

pub fn los_probability(r: f64, beta: f64) -> Result<f64> {
    check_at_least("r", r, 0.0)?;
    check_at_least("beta", beta, 0.0)?;
    Ok((-beta * r).exp())
}

fn cross(o: &Point2D, a: &Point2D, b: &Point2D) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Proper crossing of segments `(a, b)` and `(c, d)`. Touching and collinear
/// overlap are measure-zero events and count as no crossing.
fn segments_cross(a: &Point2D, b: &Point2D, c: &Point2D, d: &Point2D) -> bool {
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// True iff the segment `(a, b)` crosses none of the blockages.
pub fn is_los_explicit(a: Point2D, b: Point2D, blockages: &[BlockageSegment]) -> bool {
    blockages.iter().all(|s| {
        let (p, q) = s.endpoints();
        !segments_cross(&a, &b, &p, &q)
    })
}

/// Angular bucket index over blockages for LoS queries from the origin. Each
/// segment is registered in every bucket its angular span touches, so a query
/// only tests the segments of one bucket.
pub struct OriginLosIndex {
    segments: Vec<(Point2D, Point2D)>,
    buckets: Vec<Vec<u32>>,
}

impl OriginLosIndex {
    pub fn new(blockages: &[BlockageSegment]) -> Self {
        let n_buckets = (blockages.len() / 2).clamp(64, 8192);
        let width = 2.0 * PI / n_buckets as f64;
        let mut buckets = vec![Vec::new(); n_buckets];
        let segments: Vec<(Point2D, Point2D)> = blockages.iter().map(|s| s.endpoints()).collect();
        let bucket_of = |a: f64| -> usize {
            let t = (a + PI) / width;
            (t.floor() as isize).rem_euclid(n_buckets as isize) as usize
        };
        for (i, (p, q)) in segments.iter().enumerate() {
            let a0 = p.angle();
            let mut span = q.angle() - a0;
            // the segment subtends the short arc unless it passes the origin
            if span > PI {
                span -= 2.0 * PI;
            } else if span < -PI {
                span += 2.0 * PI;
            }
            let (start, span) = if span >= 0.0 { (a0, span) } else { (a0 + span, -span) };
            let first = bucket_of(start);
            let count = ((span / width).ceil() as usize + 1).min(n_buckets);
            for k in 0..count {
                buckets[(first + k) % n_buckets].push(i as u32);
            }
        }
        Self { segments, buckets }
    }

    /// LoS status of the link between the origin and `p`.
    pub fn is_los(&self, p: &Point2D) -> bool {
        let n = self.buckets.len();
        let width = 2.0 * PI / n as f64;
        let t = (p.angle() + PI) / width;
        let b = (t.floor() as isize).rem_euclid(n as isize) as usize;
        self.buckets[b].iter().all(|&i| {
            let (a, c) = &self.segments[i as usize];
            !segments_cross(&Point2D::ORIGIN, p, a, c)
        })
    }
}

/// Fills the LoS flags of every BS and RIS with respect to the user at the
/// origin.
pub fn classify_links(
    realization: &NetworkRealization,
    params: &ScenarioParams,
    mode: LinkMode,
    seed: u64,
) -> NetworkRealization {
    let mut out = realization.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    classify_in_place(&mut out, params, mode, &mut rng);
    out
}

pub(crate) fn classify_in_place<R: Rng + ?Sized>(
    real: &mut NetworkRealization,
    params: &ScenarioParams,
    mode: LinkMode,
    rng: &mut R,
) {
    match mode {
        LinkMode::Thinning => {
            let beta = params.beta();
            let mut flag = |p: &Point2D| rng.random::<f64>() < (-beta * p.norm()).exp();
            real.bs_los = real.bs.iter().map(&mut flag).collect();
            real.ris_los = real.ris.iter().map(&mut flag).collect();
        }
        LinkMode::Explicit => {
            let index = OriginLosIndex::new(&real.blockages);
            real.bs_los = real.bs.iter().map(|p| index.is_los(p)).collect();
            real.ris_los = real.ris.iter().map(|p| index.is_los(p)).collect();
        }
    }
}

/// Samples and classifies one drop. Blockages are only materialised in
/// explicit mode.
pub fn sample_realization<R: Rng + ?Sized>(
    params: &ScenarioParams,
    mode: LinkMode,
    rng: &mut R,
    seed: u64,
) -> NetworkRealization {
    let radius = params.window_radius;
    let bs = sample_ppp_with(rng, params.lambda_b, radius);
    let ris = sample_ppp_with(rng, params.lambda_r, radius);
    let blockages = match mode {
        LinkMode::Explicit => sample_blockages_with(
            rng,
            params.lambda_l,
            params.mean_blockage_len,
            params.blockage_lengths,
            radius,
        ),
        LinkMode::Thinning => Vec::new(),
    };
    let mut real = NetworkRealization {
        bs,
        ris,
        blockages,
        window_radius: radius,
        bs_los: Vec::new(),
        ris_los: Vec::new(),
        seed,
    };
    classify_in_place(&mut real, params, mode, rng);
    real
}

/// Density of BSs that are NLoS but reachable through a LoS RIS,
/// `lambda_b (1 - e^{-beta r}) (1 - P_void)`.
pub fn vlos_bs_density(r: f64, params: &ScenarioParams) -> f64 {
    let beta = params.beta();
    if beta == 0.0 || params.lambda_r == 0.0 {
        return 0.0;
    }
    nlos_bs_density(r, params) * (1.0 - params.los_ris_void_probability())
}

/// `lambda_b (1 - e^{-beta r})`.
pub fn nlos_bs_density(r: f64, params: &ScenarioParams) -> f64 {
    params.lambda_b * (-(-params.beta() * r).exp_m1())
}

pub fn los_bs_density(r: f64, params: &ScenarioParams) -> f64 {
    params.lambda_b * (-params.beta() * r).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ppp_at_zero_density() {
        assert!(sample_ppp(0.0, 3000.0, 7).unwrap().is_empty());
        assert!(sample_blockages(0.0, 15.0, 1000.0, 7).unwrap().is_empty());
    }

    #[test]
    fn ppp_is_deterministic_and_inside_window() {
        let a = sample_ppp(100e-6, 500.0, 11).unwrap();
        let b = sample_ppp(100e-6, 500.0, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.norm() <= 500.0));
        let c = sample_ppp(100e-6, 500.0, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ppp_rejects_bad_inputs() {
        assert!(sample_ppp(-1.0, 10.0, 0).is_err());
        assert!(sample_ppp(f64::NAN, 10.0, 0).is_err());
        assert!(sample_ppp(1.0, 0.0, 0).is_err());
        assert!(sample_blockages(1e-4, 0.0, 10.0, 0).is_err());
    }

    #[test]
    fn blockage_endpoints() {
        let s = BlockageSegment {
            center: Point2D::new(5.0, 0.0),
            length: 2.0,
            orientation: PI / 2.0,
        };
        let (p, q) = s.endpoints();
        assert!((p.x - 5.0).abs() < 1e-12 && (p.y + 1.0).abs() < 1e-12);
        assert!((q.x - 5.0).abs() < 1e-12 && (q.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_los_examples() {
        let a = Point2D::new(0.0, 0.0);
        let b = Point2D::new(10.0, 0.0);
        assert!(is_los_explicit(a, b, &[]));
        let mut blk = BlockageSegment {
            center: Point2D::new(5.0, 0.0),
            length: 2.0,
            orientation: PI / 2.0,
        };
        assert!(!is_los_explicit(a, b, &[blk]));
        assert!(!is_los_explicit(b, a, &[blk]));
        blk.center = Point2D::new(5.0, 5.0);
        assert!(is_los_explicit(a, b, &[blk]));
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(0.0, 2.86479e-3).unwrap(), 1.0);
        assert_eq!(los_probability(123.0, 0.0).unwrap(), 1.0);
        let p = los_probability(100.0, 2.86479e-3).unwrap();
        assert!((p - 0.75090).abs() < 5e-6, "{p}");
        assert!(los_probability(-1.0, 0.1).is_err());
    }

    #[test]
    fn unknown_mode_rejected() {
        assert_eq!("thinning".parse::<LinkMode>().unwrap(), LinkMode::Thinning);
        assert_eq!("explicit".parse::<LinkMode>().unwrap(), LinkMode::Explicit);
        assert!("fancy".parse::<LinkMode>().is_err());
    }

    #[test]
    fn index_agrees_with_brute_force() {
        let blk = sample_blockages(2e-3, 15.0, 200.0, 5).unwrap();
        let index = OriginLosIndex::new(&blk);
        let pts = sample_ppp(5e-3, 200.0, 6).unwrap();
        for p in &pts {
            assert_eq!(index.is_los(p), is_los_explicit(Point2D::ORIGIN, *p, &blk));
        }
    }

    #[test]
    fn thinning_without_blockage_keeps_everything() {
        let mut params = ScenarioParams::default();
        params.lambda_l = 0.0;
        params.window_radius = 800.0;
        let real = NetworkRealization::from_points(
            sample_ppp(1e-4, 800.0, 1).unwrap(),
            sample_ppp(5e-4, 800.0, 2).unwrap(),
            800.0,
        );
        let c = classify_links(&real, &params, LinkMode::Thinning, 9);
        assert!(c.bs_los.iter().all(|&f| f));
        assert!(c.ris_los.iter().all(|&f| f));
        assert_eq!(c.bs_los.len(), c.bs.len());
    }

    #[test]
    fn vlos_density_values() {
        let mut p = ScenarioParams::default();
        let d = vlos_bs_density(200.0, &p);
        assert!((d - 4.362e-5).abs() < 1e-8, "{d}");
        p.lambda_r = 0.0;
        assert_eq!(vlos_bs_density(200.0, &p), 0.0);
        let mut p = ScenarioParams::default();
        p.lambda_l = 0.0;
        assert_eq!(vlos_bs_density(200.0, &p), 0.0);
    }
}
