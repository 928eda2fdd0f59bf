use proptest::prelude::*;
use riscov::channel::{cascaded_gain_distribution, direct_gain_distribution, laplace_fading_complement, laplace_fading_gain};
use riscov::coverage::AnalyticModel;
use riscov::distributions::{los_bs_law, nlos_bs_law, vlos_bs_law, CascadedLengthLaw};
use riscov::geometry::LinkMode;
use riscov::sinr::{coverage_from_samples, simulate_samples};
use riscov::units::db_to_linear;
use riscov::ScenarioParams;

fn scenario() -> impl Strategy<Value = ScenarioParams> {
    (20.0..200.0f64, 0.0..900.0f64, 100.0..700.0f64)
        .prop_map(|(b, r, l)| ScenarioParams::default().with_densities_km2(b, r, l))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplace_kernel_is_a_decreasing_probability(s in 1e-4..50.0f64, ds in 1e-3..5.0f64, rate in 0.2..3.0f64) {
        let p = ScenarioParams::default();
        for g in [direct_gain_distribution(&p).unwrap(), cascaded_gain_distribution(&p).unwrap()] {
            let a = laplace_fading_gain(s, &g, rate);
            let b = laplace_fading_gain(s + ds, &g, rate);
            prop_assert!(0.0 < b && b < a && a <= 1.0);
            prop_assert!((laplace_fading_complement(s, &g, rate) - (1.0 - a)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_interferer_processes_give_unit_functionals(
        p in scenario(), x in 5.0..400.0f64, eta in 100.0..2e4f64, e1 in -20.0..20.0f64, e2 in -60.0..-20.0f64,
    ) {
        let (eps1, eps2) = (db_to_linear(e1), db_to_linear(e2));
        let no_ris = AnalyticModel::new(&ScenarioParams { lambda_r: 0.0, ..p.clone() }).unwrap();
        prop_assert_eq!(no_ris.gamma1_vlos(x, eps1, eps2).unwrap().value, 1.0);
        prop_assert_eq!(no_ris.gamma2_vlos(eta, eps1, eps2).unwrap().value, 1.0);
        let no_bs = AnalyticModel::new(&ScenarioParams { lambda_b: 0.0, ..p }).unwrap();
        prop_assert_eq!(no_bs.xi1_los(x, eps1, eps2).unwrap().value, 1.0);
        prop_assert_eq!(no_bs.xi2_los(eta, eps1, eps2).unwrap().value, 1.0);
    }

    #[test]
    fn zero_thresholds_give_unit_functionals(p in scenario(), x in 5.0..400.0f64, eta in 100.0..2e4f64) {
        let m = AnalyticModel::new(&p).unwrap();
        prop_assert_eq!(m.xi1_los(x, 0.0, 0.0).unwrap().value, 1.0);
        prop_assert_eq!(m.gamma1_vlos(x, 0.0, 0.0).unwrap().value, 1.0);
        prop_assert_eq!(m.xi2_los(eta, 0.0, 0.0).unwrap().value, 1.0);
        prop_assert_eq!(m.gamma2_vlos(eta, 0.0, 0.0).unwrap().value, 1.0);
    }

    #[test]
    fn radial_pdfs_integrate_to_their_cdfs(p in scenario(), u in 0.05..0.95f64) {
        for law in [los_bs_law(&p), nlos_bs_law(&p), vlos_bs_law(&p)] {
            if law.total_mass() == 0.0 {
                continue;
            }
            let x = law.normalized_quantile(u);
            let integral = simpson(|t| law.pdf(t), 0.0, x, 2000);
            prop_assert!((integral - law.cdf(x)).abs() < 1e-6, "{} vs {}", integral, law.cdf(x));
        }
    }

    #[test]
    fn more_bs_means_closer_los_bs(p in scenario(), factor in 1.05..3.0f64, r in 1.0..500.0f64) {
        let denser = ScenarioParams { lambda_b: p.lambda_b * factor, ..p.clone() };
        prop_assert!(los_bs_law(&denser).cdf(r) >= los_bs_law(&p).cdf(r));
    }

    #[test]
    fn monte_carlo_is_bit_reproducible(seed in any::<u64>()) {
        let p = ScenarioParams::default();
        let a = simulate_samples(&p, LinkMode::Thinning, 64, seed).unwrap();
        let b = simulate_samples(&p, LinkMode::Thinning, 64, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn functionals_decrease_in_thresholds(
        p in scenario(), u in 0.2..0.8f64, e1 in -10.0..10.0f64, d1 in 1.0..10.0f64, e2 in -50.0..-30.0f64,
    ) {
        let m = AnalyticModel::new(&p).unwrap();
        let x = los_bs_law(&p).normalized_quantile(u);
        let (a, b) = (db_to_linear(e1), db_to_linear(e1 + d1));
        let eps2 = db_to_linear(e2);
        prop_assert!(m.xi1_los(x, b, eps2).unwrap().value <= m.xi1_los(x, a, eps2).unwrap().value);
        prop_assert!(m.xi1_los(x, 1.0, db_to_linear(e2 + d1)).unwrap().value <= m.xi1_los(x, 1.0, eps2).unwrap().value);
        prop_assert!(m.gamma1_vlos(x, b, eps2).unwrap().value <= m.gamma1_vlos(x, a, eps2).unwrap().value);
    }

    #[test]
    fn monte_carlo_coverage_decreases_in_thresholds(seed in any::<u64>(), e1 in -15.0..15.0f64, e2 in -60.0..-20.0f64, d in 0.5..10.0f64) {
        let samples = simulate_samples(&ScenarioParams::default(), LinkMode::Thinning, 300, seed).unwrap();
        let base = coverage_from_samples(&samples, db_to_linear(e1), db_to_linear(e2)).p_cs;
        prop_assert!(coverage_from_samples(&samples, db_to_linear(e1 + d), db_to_linear(e2)).p_cs <= base);
        prop_assert!(coverage_from_samples(&samples, db_to_linear(e1), db_to_linear(e2 + d)).p_cs <= base);
        let all = coverage_from_samples(&samples, 0.0, 0.0);
        prop_assert!((all.p_cs - (all.breakdown.zeta_d + all.breakdown.zeta_v)).abs() < 1e-12);
    }

    #[test]
    fn cascaded_pdf_integrates_to_cdf(b in 50.0..150.0f64, r in 150.0..900.0f64, u in 0.2..0.8f64) {
        let p = ScenarioParams::default().with_densities_km2(b, r, 300.0);
        let law = CascadedLengthLaw::new(&p);
        let target = u * law.total_mass();
        let (mut lo, mut hi) = (1.0f64, law.support_end());
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if law.cdf(mid) < target { lo = mid } else { hi = mid }
        }
        let eta = 0.5 * (lo + hi);
        // the density is smooth on a log scale
        let integral = simpson(|t| { let e = t.exp(); law.pdf(e) * e }, 0.0, eta.ln(), 400);
        prop_assert!((integral - law.cdf(eta)).abs() < 2e-4, "{} vs {}", integral, law.cdf(eta));
    }
}

#[test]
fn zero_thresholds_give_total_association() {
    for lambda_r in [0.0, 600.0] {
        let p = ScenarioParams::default().with_densities_km2(100.0, lambda_r, 300.0);
        let m = AnalyticModel::new(&p).unwrap();
        let a = m.association().unwrap();
        let c = m.marginal_coverage(0.0, 0.0).unwrap();
        assert!((c.p_cs - (a.zeta_d + a.zeta_v)).abs() < 1e-6, "{} vs {}", c.p_cs, a.zeta_d + a.zeta_v);
    }
}
