use landau_levels::landau_basis::{cross_overlap, overlap};
use landau_levels::perturbation::first_order;
use landau_levels::radial_potential::{build_vt, radii};
use landau_levels::sector_solver::eigenvalue_near_level;
use landau_levels::specfun::{interval_gamma_log, laguerre, reg_lower_gamma, LogWeight};
use landau_levels::{Annulus, ConstructionParams, CouplingVector, StepPotential};
use proptest::prelude::*;

fn annulus(max_r: f64, max_h: f64) -> impl Strategy<Value = Annulus> {
    (0.0..max_r, 0.05..max_r, -max_h..max_h).prop_map(|(lo, w, h)| Annulus::new(lo, lo + w, h).unwrap())
}

fn step_potential(max_annuli: usize, max_r: f64, max_h: f64) -> impl Strategy<Value = StepPotential> {
    prop::collection::vec(annulus(max_r, max_h), 0..=max_annuli).prop_map(|a| StepPotential::new(a).unwrap())
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

proptest! {
    #[test]
    fn reg_lower_gamma_nondecreasing(a in 0.1f64..200.0, x in 0.0f64..300.0, dx in 0.0f64..5.0) {
        let lo = reg_lower_gamma(a, x).unwrap();
        let hi = reg_lower_gamma(a, x + dx).unwrap();
        prop_assert!(hi >= lo - 1e-15, "a={} x={} dx={}: {} > {}", a, x, dx, lo, hi);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn interval_gamma_is_additive(a in 0.5f64..60.0, u in 0.0f64..40.0, d1 in 0.0f64..20.0, d2 in 0.0f64..20.0) {
        let (v, w) = (u + d1, u + d1 + d2);
        let whole = interval_gamma_log(a, u, w).unwrap();
        let parts = LogWeight::sum([interval_gamma_log(a, u, v).unwrap(), interval_gamma_log(a, v, w).unwrap()]);
        prop_assert_eq!(whole.sign(), parts.sign());
        if !whole.is_zero() {
            prop_assert!((whole.log_mag() - parts.log_mag()).abs() <= 1e-9);
        }
    }

    #[test]
    fn log_weight_arithmetic_matches_floats(x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let (a, b) = (LogWeight::from_value(x), LogWeight::from_value(y));
        prop_assert!(((a * b).value() - x * y).abs() <= 1e-12 * (x * y).abs().max(1e-300));
        let sum = (a + b).value();
        prop_assert!((sum - (x + y)).abs() <= 1e-12 * (x.abs() + y.abs()));
    }

    #[test]
    fn overlap_grows_with_the_annulus(q in 0u64..6, m in 0u64..12, b in 0.3f64..3.0,
                                     lo in 0.0f64..3.0, w in 0.0f64..3.0, shrink in 0.0f64..1.0, grow in 0.0f64..2.0) {
        let hi = lo + w;
        let inner = overlap(q, m, b, lo + shrink * w * 0.5, hi - shrink * w * 0.5).unwrap();
        let outer = overlap(q, m, b, (lo - grow).max(0.0), hi + grow).unwrap();
        prop_assert!(outer >= inner - 1e-14, "{} < {}", outer, inner);
    }

    #[test]
    fn lowest_level_disk_mass_decreases_with_m(b in 0.3f64..3.0, r in 0.2f64..3.0, m in 0u64..40) {
        // lowest level: the mass is P(m + 1, b r^2 / 2), decreasing in m
        let here = overlap(0, m, b, 0.0, r).unwrap();
        let next = overlap(0, m + 1, b, 0.0, r).unwrap();
        prop_assert!(next <= here, "m={}: {} then {}", m, here, next);
    }

    #[test]
    fn cross_overlap_is_symmetric(q1 in 0u64..8, q2 in 0u64..8, m in 0u64..8, b in 0.3f64..3.0, lo in 0.0f64..2.0, w in 0.0f64..3.0) {
        prop_assert_eq!(cross_overlap(q1, q2, m, b, lo, lo + w).unwrap(), cross_overlap(q2, q1, m, b, lo, lo + w).unwrap());
    }

    #[test]
    fn area_integral_matches_piecewise_sum(v in step_potential(5, 3.0, 1.0), lo in 0.0f64..2.0, w in 0.0f64..4.0) {
        let hi = lo + w;
        let mut cuts: Vec<f64> = v.breakpoints().into_iter().filter(|&r| r > lo && r < hi).collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        let riemann: f64 = cuts
            .windows(2)
            .map(|c| v.evaluate(0.5 * (c[0] + c[1])) * std::f64::consts::PI * (c[1] * c[1] - c[0] * c[0]))
            .sum();
        let direct = v.integrate_area(lo, hi);
        let by_annulus: f64 = v.annuli.iter().map(|a| {
            let (l, h) = (a.r_inner.max(lo), a.r_outer.min(hi));
            if h > l { a.height * std::f64::consts::PI * (h * h - l * l) } else { 0.0 }
        }).sum();
        prop_assert!((direct - riemann).abs() <= 1e-10, "{} vs {}", direct, riemann);
        prop_assert!((direct - by_annulus).abs() <= 1e-10, "{} vs {}", direct, by_annulus);
    }

    #[test]
    fn construction_stays_inside_unit_disk(n in 4u32..8, pairs in 1usize..3, seed in prop::collection::vec(-0.49f64..0.49, 4)) {
        let t = CouplingVector(seed[..2 * pairs].to_vec());
        let v = build_vt(&ConstructionParams { n, pairs, t: t.clone() }, 1.0).unwrap();
        for a in &v.annuli {
            prop_assert!(a.r_outer < 1.0 && a.r_inner > 0.0);
        }
        let bound = (0..pairs).map(|j| t.0[2 * j].abs() + t.0[2 * j + 1].abs()).fold(0.0, f64::max);
        prop_assert!(v.sup_norm() <= bound + 1e-15 && v.sup_norm() < 1.0);
        let (lo, hi) = radii(n, 1);
        prop_assert!(lo < hi);
    }

    #[test]
    fn positive_odd_and_even_couplings_change_sign(n in 4u32..7, odd in 0.01f64..0.49, even in 0.01f64..0.49) {
        let v = build_vt(&ConstructionParams { n, pairs: 1, t: CouplingVector(vec![odd, even]) }, 1.0).unwrap();
        prop_assert!(v.min_value() < 0.0 && v.max_value() > 0.0);
        prop_assert!(v.is_sign_indefinite());
    }

    #[test]
    fn first_order_is_linear(q in 0u64..4, m in -3i64..8, v1 in step_potential(3, 4.0, 0.5), v2 in step_potential(3, 4.0, 0.5)) {
        prop_assume!(q as i64 >= -m);
        let both = StepPotential::new(v1.annuli.iter().chain(&v2.annuli).copied().collect()).unwrap();
        let lhs = first_order(q, m, 1.0, &both).unwrap();
        let rhs = first_order(q, m, 1.0, &v1).unwrap() + first_order(q, m, 1.0, &v2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12, "{} vs {}", lhs, rhs);
    }
}

#[test]
fn laguerre_at_origin_is_binomial() {
    for q in 0..=10 {
        for m in 0..=10 {
            assert_eq!(laguerre(q, m, 0.0).round() as u64, binomial(q + m, q));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigenvalue_is_monotone_in_the_potential(q in 0u64..3, m in -2i64..10, b in 0.5f64..2.0,
                                               v in step_potential(3, 3.0, 0.2), bump in annulus(3.0, 0.2)) {
        prop_assume!(q as i64 >= -m);
        let bump = Annulus { height: bump.height.abs(), ..bump };
        let scaled = |p: &StepPotential| p.scaled(b);
        let lower = scaled(&v);
        let upper = scaled(&StepPotential::new(v.annuli.iter().copied().chain([bump]).collect()).unwrap());
        prop_assume!(upper.sup_norm() < b);
        let e1 = eigenvalue_near_level(b, q, m, &lower, 1e-10 * b).unwrap().energy;
        let e2 = eigenvalue_near_level(b, q, m, &upper, 1e-10 * b).unwrap().energy;
        prop_assert!(e1 <= e2 + 1e-10 * b, "{} > {}", e1, e2);
    }

    #[test]
    fn shift_is_bounded_by_sup_norm(q in 0u64..3, m in -2i64..12, b in 0.5f64..2.0, v in step_potential(4, 4.0, 0.45)) {
        prop_assume!(q as i64 >= -m);
        let v = v.scaled(b);
        prop_assume!(v.sup_norm() < b);
        let e = eigenvalue_near_level(b, q, m, &v, 1e-10 * b).unwrap().energy;
        prop_assert!((e - 2.0 * b * q as f64).abs() <= v.sup_norm() + 1e-12);
    }

    #[test]
    fn potential_json_roundtrip(v in step_potential(6, 5.0, 2.0)) {
        prop_assert_eq!(StepPotential::from_json(&v.to_json()).unwrap(), v);
    }
}
