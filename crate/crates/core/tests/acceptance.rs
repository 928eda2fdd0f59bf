//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL`
//! line with the measured figures; the process exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riscov::association::{direct_wins, LinkDistances};
use riscov::channel::{direct_gain_distribution, exp_variate, laplace_fading_gain};
use riscov::coverage::AnalyticModel;
use riscov::distributions::{cascaded_length_dist, nearest_los_bs_dist, nearest_vlos_bs_dist};
use riscov::geometry::{is_los_explicit, sample_blockages, LinkMode, Point2D};
use riscov::params::EQUAL_ENERGY_DEPLOYMENTS_KM2;
use riscov::sinr::{coverage_from_samples, rate_pair_from_samples, simulate_link_distances, simulate_samples};
use riscov::stats::{ks_distance, mean_and_se};
use riscov::units::db_to_linear;
use riscov::ScenarioParams;

use common::{random_point, rel_err, Oracle};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn los_fraction() -> Outcome {
    let lambda_l = 300e-6;
    let mean_len = 15.0;
    let beta = ScenarioParams::default().with_densities_km2(100.0, 0.0, 300.0).beta();
    let radii: Vec<f64> = (1..=30).map(|k| 10.0 * k as f64).collect();
    let realizations = 400u64;
    let links_per_radius = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = vec![0u64; radii.len()];
    for seed in 0..realizations {
        let blockages = sample_blockages(lambda_l, mean_len, 310.0, seed).unwrap();
        for (k, &r) in radii.iter().enumerate() {
            for _ in 0..links_per_radius {
                let end = Point2D::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU);
                hits[k] += is_los_explicit(Point2D::new(0.0, 0.0), end, &blockages) as u64;
            }
        }
    }
    let per_radius = realizations * links_per_radius;
    let worst = radii
        .iter()
        .zip(&hits)
        .map(|(&r, &h)| (h as f64 / per_radius as f64 - (-beta * r).exp()).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 0.02,
        format!("max |empirical - exp(-beta r)| = {worst:.4} over {} link tests", per_radius * radii.len() as u64),
    )
}

/// Location of the maximum of a unimodal `pdf`: coarse log-spaced scan,
/// then golden-section refinement in `ln x`.
fn mode(pdf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 60;
    let grid: Vec<f64> = (0..=n).map(|i| lo.ln() + (hi / lo).ln() * i as f64 / n as f64).collect();
    let k = (0..=n)
        .map(|i| (i, pdf(grid[i].exp())))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
        .0;
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..30 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if pdf(c.exp()) > pdf(d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    (0.5 * (a + b)).exp()
}

fn distance_laws() -> (Outcome, Option<(f64, f64)>) {
    let mut worst: f64 = 0.0;
    let mut shifts = Vec::new();
    let mut defaults_sample = None;
    for lambda_b in [50.0, 100.0] {
        let mut modes = Vec::new();
        for lambda_r in [150.0, 600.0] {
            let p = ScenarioParams::default().with_densities_km2(lambda_b, lambda_r, 300.0);
            let draws = simulate_link_distances(&p, LinkMode::Thinning, 100_000, 3).unwrap();
            let los = nearest_los_bs_dist(&p).unwrap();
            let vlos = nearest_vlos_bs_dist(&p).unwrap();
            let casc = cascaded_length_dist(&p).unwrap();
            let casc_cdf = casc.tabulated_cdf(800);
            let mut a: Vec<f64> = draws.iter().map(|d| d.los_bs).collect();
            let mut b: Vec<f64> = draws.iter().map(|d| d.vlos_bs).collect();
            let mut c: Vec<f64> = draws.iter().map(|d| d.cascaded).collect();
            worst = worst
                .max(ks_distance(&mut a, |x| los.cdf(x)))
                .max(ks_distance(&mut b, |x| vlos.cdf(x)))
                .max(ks_distance(&mut c, |x| casc_cdf.eval(x)));
            modes.push(mode(|x| casc.pdf(x), 10.0, casc.support_hint().1));
            if lambda_b == 100.0 && lambda_r == 600.0 {
                let direct = |d: &LinkDistances| {
                    d.los_bs.is_finite() && (!d.cascaded.is_finite() || direct_wins(d.los_bs, d.cascaded, &p))
                };
                let n = draws.len() as f64;
                let zd = draws.iter().filter(|d| direct(d)).count() as f64 / n;
                let zv = draws.iter().filter(|d| d.cascaded.is_finite() && !direct(d)).count() as f64 / n;
                defaults_sample = Some((zd, zv));
            }
        }
        let alpha = ScenarioParams::default().alpha;
        shifts.push(10.0 * alpha * (modes[1] / modes[0]).log10());
    }
    let shift_ok = shifts.iter().all(|s| (s + 9.68).abs() <= 1.5);
    (
        Outcome::new(
            worst < 0.02 && shift_ok,
            format!(
                "max KS = {worst:.4}; modal cascaded path-loss shift for 4x RIS density = {:.2} dB (lambda_b=50), {:.2} dB (lambda_b=100)",
                shifts[0], shifts[1]
            ),
        ),
        defaults_sample,
    )
}

fn association(mc: (f64, f64)) -> Outcome {
    let a = AnalyticModel::new(&ScenarioParams::default()).unwrap().association().unwrap();
    let dd = (a.zeta_d - mc.0).abs();
    let dv = (a.zeta_v - mc.1).abs();
    Outcome::new(
        dd <= 0.01 && dv <= 0.01,
        format!(
            "zeta_d {:.4} vs {:.4}, zeta_v {:.4} vs {:.4} over 1e5 drops",
            a.zeta_d, mc.0, a.zeta_v, mc.1
        ),
    )
}

fn cross_validation() -> Outcome {
    let grid: Vec<(f64, f64)> = [-10.0, 0.0, 10.0]
        .iter()
        .flat_map(|&e1| [-50.0, -40.0, -30.0].map(|e2| (e1, e2)))
        .collect();
    let mut worst: f64 = 0.0;
    let mut endpoints = Vec::new();
    for lambda_r in [0.0, 600.0] {
        let p = ScenarioParams::default().with_densities_km2(100.0, lambda_r, 600.0);
        let model = AnalyticModel::new(&p).unwrap();
        let samples = simulate_samples(&p, LinkMode::Thinning, 20_000, 5).unwrap();
        for &(e1, e2) in &grid {
            let (eps1, eps2) = (db_to_linear(e1), db_to_linear(e2));
            let analytic = model.marginal_coverage(eps1, eps2).unwrap().p_cs;
            let mc = coverage_from_samples(&samples, eps1, eps2).p_cs;
            worst = worst.max((analytic - mc).abs());
            if (e1, e2) == (0.0, -40.0) {
                endpoints.push(analytic);
            }
        }
    }
    let mut sweep = vec![endpoints[0]];
    for lambda_r in [150.0, 300.0] {
        let p = ScenarioParams::default().with_densities_km2(100.0, lambda_r, 600.0);
        let v = AnalyticModel::new(&p)
            .unwrap()
            .marginal_coverage(1.0, db_to_linear(-40.0))
            .unwrap()
            .p_cs;
        sweep.push(v);
    }
    sweep.push(endpoints[1]);
    let monotone = sweep.windows(2).all(|w| w[1] > w[0]);
    let ends_ok = (endpoints[0] - 0.671).abs() <= 0.05 && (endpoints[1] - 0.922).abs() <= 0.05;
    Outcome::new(
        worst <= 0.03 && ends_ok && monotone,
        format!(
            "max |analytic - MC| = {worst:.4}; endpoints {:.4} (target 0.671) and {:.4} (target 0.922); \
             coverage over lambda_r = 0, 150, 300, 600: {:?}",
            endpoints[0],
            endpoints[1],
            sweep.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

/// True when consecutive differences never fall below `-2` combined
/// standard errors.
fn non_decreasing(v: &[(f64, f64)]) -> bool {
    v.windows(2).all(|w| w[1].0 - w[0].0 > -2.0 * w[0].1.hypot(w[1].1))
}

/// True when the maximum sits strictly inside and beats both ends by more
/// than two combined standard errors.
fn interior_peak(v: &[(f64, f64)]) -> bool {
    let (k, &(top, se)) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .unwrap();
    let beats = |&(x, s): &(f64, f64)| top - x > 2.0 * se.hypot(s);
    k > 0 && k + 1 < v.len() && beats(&v[0]) && beats(&v[v.len() - 1])
}

fn rate_trends() -> Outcome {
    let mut curves = Vec::new();
    for lambda_l in [300.0, 600.0] {
        let (mut comm, mut sens) = (Vec::new(), Vec::new());
        for &(lb, lr) in &EQUAL_ENERGY_DEPLOYMENTS_KM2 {
            let p = ScenarioParams::default().with_densities_km2(lb, lr, lambda_l);
            let samples = simulate_samples(&p, LinkMode::Thinning, 100_000, 7).unwrap();
            let r = rate_pair_from_samples(&samples, p.bandwidth_w);
            comm.push((r.comm_rate, r.comm_se));
            sens.push((r.sens_rate, r.sens_se));
        }
        curves.push((comm, sens));
    }
    let sens_300 = non_decreasing(&curves[0].1);
    let comm_300 = interior_peak(&curves[0].0);
    let sens_600 = interior_peak(&curves[1].1);
    let fmt = |v: &[(f64, f64)]| v.iter().map(|x| format!("{:.3e}", x.0)).collect::<Vec<_>>().join(" ");
    Outcome::new(
        sens_300 && comm_300 && sens_600,
        format!(
            "lambda_l=300: sensing non-decreasing {sens_300} [{}], comm interior peak {comm_300} [{}]; \
             lambda_l=600: sensing interior peak {sens_600} [{}]",
            fmt(&curves[0].1),
            fmt(&curves[0].0),
            fmt(&curves[1].1)
        ),
    )
}

fn oracles() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in [101, 202, 303] {
        let pt = random_point(seed);
        let model = AnalyticModel::new(&pt.params).unwrap();
        let fine = Oracle::new(&pt.params, pt.eps1, pt.eps2);
        let mut cascaded = Oracle::new(&pt.params, pt.eps1, pt.eps2);
        cascaded.outer_nodes = 192;
        cascaded.inner_points = 1 << 14;
        let pairs = [
            (model.xi1_los(pt.x, pt.eps1, pt.eps2).unwrap().value, fine.xi1(pt.x)),
            (model.gamma1_vlos(pt.x, pt.eps1, pt.eps2).unwrap().value, fine.gamma1(pt.x)),
            (model.xi2_los(pt.eta, pt.eps1, pt.eps2).unwrap().value, fine.xi2(pt.eta)),
            (model.gamma2_vlos(pt.eta, pt.eps1, pt.eps2).unwrap().value, cascaded.gamma2(pt.eta)),
        ];
        for (a, o) in pairs {
            worst = worst.max(rel_err(a, o));
        }
    }
    Outcome::new(worst < 3e-3, format!("max relative error {worst:.2e} over 4 functionals at 3 points"))
}

fn invariants() -> Outcome {
    let mut failures = Vec::new();
    let p = ScenarioParams::default();
    let model = AnalyticModel::new(&p).unwrap();
    let a = model.association().unwrap();

    let zero = model.marginal_coverage(0.0, 0.0).unwrap().p_cs;
    if (zero - (a.zeta_d + a.zeta_v)).abs() > 1e-6 {
        failures.push(format!("zero thresholds: {zero} vs {}", a.zeta_d + a.zeta_v));
    }

    let (x, eta, e1, e2) = (80.0, 3000.0, 1.0, 1e-4);
    let no_ris = AnalyticModel::new(&p.with_densities_km2(100.0, 0.0, 300.0)).unwrap();
    let no_bs = AnalyticModel::new(&p.with_densities_km2(0.0, 600.0, 300.0)).unwrap();
    for (name, v) in [
        ("gamma1 without RIS", no_ris.gamma1_vlos(x, e1, e2).unwrap().value),
        ("gamma2 without RIS", no_ris.gamma2_vlos(eta, e1, e2).unwrap().value),
        ("xi1 without BS", no_bs.xi1_los(x, e1, e2).unwrap().value),
        ("xi2 without BS", no_bs.xi2_los(eta, e1, e2).unwrap().value),
    ] {
        if v != 1.0 {
            failures.push(format!("{name}: {v}"));
        }
    }

    let gains = direct_gain_distribution(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for s in [0.01, 0.3, 2.0] {
        let draws: Vec<f64> = (0..200_000)
            .map(|_| (-s * gains.sample(&mut rng) * exp_variate(&mut rng, p.rho_d)).exp())
            .collect();
        let (mean, se) = mean_and_se(&draws);
        let exact = laplace_fading_gain(s, &gains, p.rho_d);
        if (mean - exact).abs() > 4.0 * se + 1e-12 {
            failures.push(format!("Laplace kernel at s={s}: MC {mean} vs {exact}"));
        }
    }

    let xs = [0.1, 1.0, 10.0].map(|e| model.xi1_los(x, e, 1e-4).unwrap().value);
    let gs = [1e-5, 1e-4, 1e-3].map(|e| model.gamma2_vlos(eta, 1.0, e).unwrap().value);
    if !(xs.windows(2).all(|w| w[1] <= w[0]) && gs.windows(2).all(|w| w[1] <= w[0])) {
        failures.push(format!("threshold monotonicity: {xs:?} {gs:?}"));
    }
    let samples = simulate_samples(&p, LinkMode::Thinning, 2_000, 23).unwrap();
    let mc: Vec<f64> = [-10.0, 0.0, 10.0]
        .iter()
        .map(|&e| coverage_from_samples(&samples, db_to_linear(e), 1e-4).p_cs)
        .collect();
    if !mc.windows(2).all(|w| w[1] <= w[0]) {
        failures.push(format!("MC threshold monotonicity: {mc:?}"));
    }

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pair = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    let one = single.install(|| simulate_samples(&p, LinkMode::Explicit, 200, 29).unwrap());
    let two = pair.install(|| simulate_samples(&p, LinkMode::Explicit, 200, 29).unwrap());
    if one != two {
        failures.push("explicit-mode drops differ across thread counts".into());
    }
    if samples != simulate_samples(&p, LinkMode::Thinning, 2_000, 23).unwrap() {
        failures.push("thinning-mode drops differ between runs".into());
    }

    let pass = failures.is_empty();
    Outcome::new(pass, if pass { "all invariants hold".into() } else { failures.join("; ") })
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: usize, limit_s: f64, name: &str, started: Instant, o: Outcome| {
        let elapsed = started.elapsed().as_secs_f64();
        let pass = o.pass && elapsed < limit_s;
        all &= pass;
        println!(
            "criterion {n} [{}] {name}: {} ({elapsed:.0} s, limit {limit_s:.0} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    let t = Instant::now();
    report(1, 60.0, "blockage-model LoS fraction", t, los_fraction());
    let t = Instant::now();
    let (laws, freqs) = distance_laws();
    report(2, 600.0, "link-distance laws", t, laws);
    let t = Instant::now();
    report(3, 600.0, "association probabilities", t, association(freqs.expect("defaults sampled")));
    let t = Instant::now();
    report(4, 1800.0, "coverage cross-validation", t, cross_validation());
    let t = Instant::now();
    report(5, 1800.0, "rate trends over equal-energy deployments", t, rate_trends());
    let t = Instant::now();
    report(6, 600.0, "oracle equivalence", t, oracles());
    let t = Instant::now();
    report(7, 300.0, "invariants", t, invariants());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
