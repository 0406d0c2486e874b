use std::f64::consts::{PI, TAU};

use ghostlab::kspace::biphoton_amplitude;
use ghostlab::measurement::{conditional_idler_prob, kappa_visibility, mismatch_visibility, outcome_probabilities};
use ghostlab::quadrature::QuadOptions;
use ghostlab::{BellEprState, BiphotonParams, Grid, KVector, PhaseProfile, Setting};
use ghostlab::analysis::{correlation_map, pixel_phasors, CorrelationMap};
use ghostlab::montecarlo::FrameSet;
use proptest::prelude::*;

fn k() -> impl Strategy<Value = KVector> {
    (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| KVector::new(x, y))
}

fn linear_state(a: f64, b: f64) -> BellEprState {
    BellEprState::new(BiphotonParams::default(), PhaseProfile::linear(0.0, a, 0.0), PhaseProfile::linear(0.0, b, 0.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn amplitude_is_exchange_and_parity_symmetric(ks in k(), ki in k(), sigma in 0.01..2.0f64, kappa in 1.0..10.0f64) {
        let p = BiphotonParams { sigma, kappa, ..Default::default() };
        let a = biphoton_amplitude(ks, ki, &p).unwrap();
        let b = biphoton_amplitude(ki, ks, &p).unwrap();
        let c = biphoton_amplitude(-ks, -ki, &p).unwrap();
        prop_assert!((a - b).norm() <= 1e-15 * a.norm().max(1e-300));
        prop_assert!((a - c).norm() <= 1e-15 * a.norm().max(1e-300));
        prop_assert!(a.norm() <= sigma / (PI * kappa) * (1.0 + 1e-15));
    }

    #[test]
    fn outcome_sum_is_setting_independent(ki in k(), ts in 0.0..TAU, ti in 0.0..TAU, a in -0.05..0.05f64) {
        let st = linear_state(a, -0.45);
        let o = QuadOptions::default();
        let p = outcome_probabilities(&st, &Setting::new(ts, ti), ki, &o).unwrap();
        let q = outcome_probabilities(&st, &Setting::new(0.0, 0.0), ki, &o).unwrap();
        prop_assert!(p[0] >= 0.0 && p[1] >= 0.0);
        prop_assert!(((p[0] + p[1]) - (q[0] + q[1])).abs() < 1e-5 * (q[0] + q[1]));
    }

    #[test]
    fn idler_rotation_by_pi_swaps_channels(ki in k(), ts in 0.0..TAU, ti in 0.0..TAU) {
        let st = linear_state(0.0124, -0.45);
        let o = QuadOptions::default();
        let p = outcome_probabilities(&st, &Setting::new(ts, ti), ki, &o).unwrap();
        let q = outcome_probabilities(&st, &Setting::new(ts, ti + PI), ki, &o).unwrap();
        prop_assert!((p[0] - q[1]).abs() < 1e-6 && (p[1] - q[0]).abs() < 1e-6);
    }

    #[test]
    fn visibility_factors_are_monotone(x in 0.0..0.3f64, dx in 0.0..0.1f64, kappa in 1.0..10.0f64) {
        prop_assert!(kappa_visibility(x + dx, kappa) <= kappa_visibility(x, kappa));
        prop_assert!(kappa_visibility(x, kappa) <= 1.0);
        prop_assert!(mismatch_visibility(10.0 * (x + dx), kappa) <= mismatch_visibility(10.0 * x, kappa));
    }

    #[test]
    fn joint_phase_is_additive(ks in k(), ki in k(), a in -1.0..1.0f64, b in -1.0..1.0f64, c in -3.0..3.0f64) {
        let st = BellEprState::new(
            BiphotonParams::default(),
            PhaseProfile::linear(a, b, c),
            PhaseProfile::linear(b, a, -c),
        ).unwrap();
        let s = linear_state(0.0, 0.0);
        let j = st.joint_phase(ks, ki).unwrap();
        let direct = (a * ks.kx + b * ks.ky + c) - (b * ki.kx + a * ki.ky - c);
        prop_assert!((j - direct).abs() < 1e-12);
        prop_assert_eq!(s.joint_phase(ks, ki).unwrap(), 0.0);
    }

    #[test]
    fn conditional_probability_is_a_probability(ki in k(), ts in -10.0..10.0f64, ti in -10.0..10.0f64, v in 0.01..1.0f64, xi in 0.0..20.0f64) {
        let st = linear_state(0.0124, -0.45);
        let q = conditional_idler_prob(&st, &Setting::new(ts, ti), ki, xi, v).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        let m = conditional_idler_prob(&st, &Setting::marginal(ti), ki, xi, v).unwrap();
        prop_assert_eq!(m, 0.5);
    }

    #[test]
    fn correlation_is_even_in_the_phase(d in 0.0..PI, v in 0.1..1.0f64) {
        let st = linear_state(0.0, 0.0);
        let c = |delta: f64| 2.0 * conditional_idler_prob(&st, &Setting::new(delta, 0.0), KVector::zero(), 0.0, v).unwrap() - 1.0;
        prop_assert!((c(d) - c(-d)).abs() < 1e-14);
        prop_assert!((c(d) - v * d.cos()).abs() < 1e-14);
    }

    #[test]
    fn pixel_phasors_follow_pixel_permutations(slope in 0.1..1.0f64, seed in any::<u64>()) {
        // permuting the counts of pixels with equal phase leaves the map's
        // pooled statistics and the phasors of the moved pixels unchanged
        let g = Grid::new(8, 8, 10.0).unwrap();
        let ph = pixel_phasors(&g, |k| slope * k.ky);
        let mut fs = FrameSet::empty(Setting::new(0.0, 0.0), g);
        for (i, z) in ph.iter().enumerate() {
            fs.plus[i] = (500.0 * (1.0 + 0.8 * z.re)) as u32;
            fs.minus[i] = (500.0 * (1.0 - 0.8 * z.re)) as u32;
        }
        let mut swapped = fs.clone();
        let row = (seed % 8) as usize;
        let (a, b) = ((seed >> 8) as usize % 8, (seed >> 16) as usize % 8);
        prop_assert!((ph[g.index(a, row)] - ph[g.index(b, row)]).norm() < 1e-12);
        swapped.plus.swap(g.index(a, row), g.index(b, row));
        swapped.minus.swap(g.index(a, row), g.index(b, row));
        let p1 = correlation_map(&fs).pooled().unwrap();
        let p2 = correlation_map(&swapped).pooled().unwrap();
        prop_assert!((p1.0 - p2.0).abs() < 1e-12 && (p1.1 - p2.1).abs() < 1e-12);
    }

    #[test]
    fn correlation_map_values_are_bounded(plus in prop::collection::vec(0u64..1000, 16), minus in prop::collection::vec(0u64..1000, 16)) {
        let m = CorrelationMap::from_counts(Grid::new(4, 4, 1.0).unwrap(), Setting::new(0.0, 0.0), &plus, &minus).unwrap();
        for i in 0..16 {
            if m.is_masked(i) {
                prop_assert!(m.values[i].is_nan());
            } else {
                prop_assert!(m.values[i].abs() <= 1.0);
            }
        }
    }
}
