use dashu_int::IBig;
use dashu_ratio::RBig;
use proptest::prelude::*;

use bestm_sched::asymptotics::{feedback_success_probability, normalizing_constants};
use bestm_sched::channel::LinkProfile;
use bestm_sched::exact_rate::{g_k, sum_rate_exact, user_rate_exact};
use bestm_sched::feedback::{bestm_cdf, xi2_convolution, xi2_recursion};
use bestm_sched::planner::min_feedback_exact;
use bestm_sched::simulator::{best_m_select, fairness_theta, simulate_profiles, Policy, SimConfig};
use bestm_sched::specfun::{exp_integral_e1, exp_integral_e1_scaled, hyp2f1_unit_params};

fn general_profile() -> impl Strategy<Value = LinkProfile> {
    (-0.5f64..3.0, -2.0f64..0.5, prop::collection::vec(0.2f64..1.0, 0..3)).prop_map(|(lr0, first, gaps)| {
        let rho0 = 10f64.powf(lr0);
        let mut u = first;
        let mut int = vec![rho0 * 10f64.powf(u)];
        for g in gaps {
            u -= g;
            int.push(rho0 * 10f64.powf(u));
        }
        LinkProfile::from_scales(rho0, int).unwrap()
    })
}

fn any_profile() -> impl Strategy<Value = LinkProfile> {
    prop_oneof![
        (-0.5f64..3.0).prop_map(|l| LinkProfile::noise_limited(10f64.powf(l)).unwrap()),
        (-0.5f64..3.0, -1.5f64..1.5).prop_map(|(l, r)| {
            let rho0 = 10f64.powf(l);
            LinkProfile::interference_limited(rho0, rho0 * 10f64.powf(r)).unwrap()
        }),
        general_profile(),
    ]
}

fn n_and_m() -> impl Strategy<Value = (u32, u32)> {
    (1u32..=24).prop_flat_map(|n| (Just(n), 1..=n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn e1_positive_and_decreasing(x in 1e-3f64..50.0, dx in 1e-3f64..5.0) {
        let a = exp_integral_e1(x).unwrap();
        let b = exp_integral_e1(x + dx).unwrap();
        prop_assert!(a > 0.0 && b < a);
        prop_assert!(exp_integral_e1_scaled(x + dx).unwrap() < exp_integral_e1_scaled(x).unwrap());
    }

    #[test]
    fn hyp2f1_at_least_one_and_increasing(c in 2u32..40, z in 0.0f64..0.98, dz in 1e-4f64..0.02) {
        let a = hyp2f1_unit_params(c, z).unwrap();
        prop_assert!(a >= 1.0);
        prop_assert_eq!(hyp2f1_unit_params(c, 0.0).unwrap(), 1.0);
        prop_assert!(hyp2f1_unit_params(c, (z + dz).min(0.999)).unwrap() >= a);
    }

    #[test]
    fn sinr_cdf_is_a_distribution(p in any_profile(), x in 0.0f64..1e4, dx in 0.0f64..100.0) {
        let f = p.cdf(x);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(p.cdf(x + dx) >= f);
        prop_assert_eq!(p.cdf(0.0), 0.0);
        prop_assert_eq!(p.cdf(-1.0), 0.0);
        prop_assert!(p.survival(1e16 * p.rho0()) < 1e-12);
    }

    #[test]
    fn bestm_cdf_bounds_and_monotone_in_m(p in any_profile(), (n, m) in n_and_m(), x in 0.0f64..200.0) {
        let f = p.cdf(x);
        let y = bestm_cdf(&p, n, m, x).unwrap();
        prop_assert!((0.0..=1.0).contains(&y));
        prop_assert!(y <= f + 1e-12);
        prop_assert!(y >= f.powi(n as i32) - 1e-12);
        if m < n {
            prop_assert!(bestm_cdf(&p, n, m + 1, x).unwrap() >= y - 1e-12);
        }
    }

    #[test]
    fn xi2_recursion_matches_convolution_for_any_coefficients(
        coeffs in prop::collection::vec((-20i64..20, 1u64..9), 1..6),
        tau in 1u32..6,
    ) {
        let a: Vec<RBig> = coeffs.iter().map(|&(p, q)| RBig::from_parts(IBig::from(p), q.into())).collect();
        prop_assert_eq!(xi2_recursion(&a, tau).unwrap(), xi2_convolution(&a, tau));
    }

    #[test]
    fn outage_factor_in_unit_interval((n, m) in n_and_m(), k0 in 1u32..200) {
        let s = feedback_success_probability(k0, n, m);
        prop_assert!(s > 0.0 && s <= 1.0);
        if m == n {
            prop_assert_eq!(s, 1.0);
        } else if k0 as f64 * (1.0 - m as f64 / n as f64).ln() > -30.0 {
            // below e^-37 the outage term is under half an ulp of 1
            prop_assert!(s < 1.0);
        }
    }

    #[test]
    fn scale_constant_positive(p in any_profile(), k in 20.0f64..500.0, m in 1u32..=16) {
        let c = normalizing_constants(&p, k, 16, m).unwrap();
        prop_assert!(c.b > 0.0);
    }

    #[test]
    fn best_m_select_returns_the_largest(cqi in prop::collection::vec(0.0f64..100.0, 1..32), m in 1usize..32) {
        let sel = best_m_select(&cqi, m);
        prop_assert_eq!(sel.len(), m.min(cqi.len()));
        let chosen: std::collections::HashSet<usize> = sel.iter().map(|s| s.0).collect();
        prop_assert_eq!(chosen.len(), sel.len());
        prop_assert!(sel.windows(2).all(|w| w[0].1 >= w[1].1));
        if let Some(last) = sel.last() {
            for (i, &v) in cqi.iter().enumerate() {
                if !chosen.contains(&i) {
                    prop_assert!(v <= last.1);
                }
            }
        }
    }

    #[test]
    fn fairness_in_unit_interval(counts in prop::collection::vec(0u64..1000, 2..40)) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let t = fairness_theta(&counts).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t));
        let equal = vec![counts[0].max(1); counts.len()];
        prop_assert_eq!(fairness_theta(&equal).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn g_increasing_with_shrinking_steps(p in any_profile()) {
        let g: Vec<f64> = (1..=12).map(|e| g_k(&p, e).unwrap()).collect();
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
        let d: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
        prop_assert!(d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }

    #[test]
    fn sum_rate_nondecreasing_in_m_and_k0(p in any_profile(), q in any_profile(), r in any_profile()) {
        let n = 8;
        let cell = vec![p, q, r];
        let mut prev = 0.0;
        for m in 1..=n {
            let c = sum_rate_exact(&cell, n, m).unwrap().sum_rate;
            prop_assert!(c >= prev * (1.0 - 1e-9), "M = {m}: {c} < {prev}");
            prev = c;
        }
        // multiuser diversity: more statistically identical users
        for m in [1, 3, n] {
            let mut prev = 0.0;
            for k0 in 1..=5 {
                let c = sum_rate_exact(&vec![cell[0].clone(); k0], n, m).unwrap().sum_rate;
                prop_assert!(c >= prev * (1.0 - 1e-9), "K0 = {k0}, M = {m}: {c} < {prev}");
                prev = c;
            }
        }
    }

    #[test]
    fn faint_interference_is_noise_limited(p in general_profile(), k0 in 1u32..6, m in 1u32..=16) {
        let faint = p.with_interference_scaled(1e-6).unwrap();
        let nl = LinkProfile::noise_limited(p.rho0()).unwrap();
        let a = user_rate_exact(&faint, k0, 16, m).unwrap();
        let b = user_rate_exact(&nl, k0, 16, m).unwrap();
        prop_assert!(((a - b) / b).abs() <= 1e-3);
    }

    #[test]
    fn planner_answer_is_minimal(p in any_profile(), q in any_profile(), eta in 0.5f64..0.999) {
        let n = 8;
        let cell = vec![p, q];
        let scan = min_feedback_exact(&cell, n, eta).unwrap();
        let full = sum_rate_exact(&cell, n, n).unwrap().sum_rate;
        let at = sum_rate_exact(&cell, n, scan.m).unwrap().sum_rate;
        prop_assert!(at / full >= eta);
        if scan.m > 1 {
            let below = sum_rate_exact(&cell, n, scan.m - 1).unwrap().sum_rate;
            prop_assert!(below / full < eta);
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), threads in 1usize..4) {
        let cell = vec![LinkProfile::noise_limited(5.0).unwrap(), LinkProfile::from_scales(20.0, vec![3.0]).unwrap()];
        let cfg = |t| SimConfig { num_drops: 3, slots_per_drop: 50, policy: Policy::Cdf, m: 2, master_seed: seed, threads_hint: t };
        let a = simulate_profiles(&cell, 8, &cfg(1)).unwrap();
        let b = simulate_profiles(&cell, 8, &cfg(threads)).unwrap();
        prop_assert_eq!(a, b);
    }
}
