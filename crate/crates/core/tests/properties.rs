// SPDX-License-Identifier: MIT OR Apache-2.0

use boundedcp::bar_model::{rho_lower_bound, simulate_bar, transition_matrix, InitialState};
use boundedcp::estimation::{clamp_to_box, cls_estimate, BOX_MARGIN};
use boundedcp::evaluation::{distance_d, zeta};
use boundedcp::rng::stream_rng;
use boundedcp::segmentation::{max_feasible_changepoints, mdl_penalty, min_spacing, segment_ranges};
use boundedcp::{BarParams, BoundedSeries};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = BarParams> {
    (0.01f64..0.99, 0.0f64..1.0).prop_map(|(p, u)| {
        let lo = rho_lower_bound(p);
        BarParams::new(p, lo + (0.999 - lo) * u.clamp(1e-3, 0.999)).unwrap()
    })
}

fn location_set() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.99, 1..6)
}

fn brute_zeta(a: &[f64], b: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for &y in b {
        let mut inf = f64::INFINITY;
        for &x in a {
            inf = inf.min((x - y).abs());
        }
        sup = sup.max(inf);
    }
    sup
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn domain_is_exactly_the_admissible_set(p in -0.2f64..1.2, rho in -3.0f64..1.2) {
        let admissible = p > 0.0 && p < 1.0 && rho < 1.0 && rho > rho_lower_bound(p);
        prop_assert_eq!(BarParams::new(p, rho).is_ok(), admissible);
    }

    #[test]
    fn thinning_probabilities_are_valid(q in params()) {
        prop_assert!((0.0..=1.0).contains(&q.alpha()));
        prop_assert!((0.0..=1.0).contains(&q.beta()));
        prop_assert!((q.alpha() - q.beta() - q.rho()).abs() < 1e-15);
    }

    #[test]
    fn kernel_rows_are_distributions(q in params(), nb in 1u32..=12, h in 1u32..=3) {
        let k = transition_matrix(&q, nb, h);
        let w = (nb + 1) as usize;
        for i in 0..w {
            let row = &k[i * w..(i + 1) * w];
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn simulation_stays_in_support(q in params(), nb in 1u32..=30, seed in any::<u64>()) {
        let s = simulate_bar(&q, nb, 200, &mut stream_rng(seed, 0), InitialState::Stationary).unwrap();
        prop_assert_eq!(s.len(), 200);
        prop_assert!(s.counts().iter().all(|&x| x <= nb));
    }

    #[test]
    fn clamped_estimates_are_interior(p in -1.0f64..2.0, rho in -5.0f64..3.0) {
        let (q, flagged) = clamp_to_box(p, rho);
        prop_assert!(q.p() >= BOX_MARGIN - 1e-15 && q.p() <= 1.0 - BOX_MARGIN + 1e-15);
        prop_assert!(q.rho() <= 1.0 - BOX_MARGIN + 1e-15);
        prop_assert!(q.rho() >= rho_lower_bound(q.p()) + BOX_MARGIN - 1e-12);
        if !flagged {
            prop_assert!((q.p() - p).abs() < 1e-15 && (q.rho() - rho).abs() < 1e-15);
        }
    }

    /// Relabelling `x ↦ N − x` swaps the roles of survivors and recruits:
    /// ρ is unchanged and p becomes 1 − p.
    #[test]
    fn cls_is_equivariant_under_reflection(q in params(), seed in any::<u64>()) {
        let nb = 10;
        let s = simulate_bar(&q, nb, 150, &mut stream_rng(seed, 0), InitialState::Stationary).unwrap();
        let flipped = BoundedSeries::new(s.counts().iter().map(|&x| nb - x).collect(), nb).unwrap();
        if let (Ok(a), Ok(b)) = (cls_estimate(&s), cls_estimate(&flipped)) {
            if !a.clamped && !b.clamped {
                prop_assert!((a.params.rho() - b.params.rho()).abs() < 1e-9);
                prop_assert!((a.params.p() - (1.0 - b.params.p())).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zeta_matches_brute_force(a in location_set(), b in location_set()) {
        let z = zeta(&a, &b).unwrap();
        prop_assert_eq!(z, brute_zeta(&a, &b));
        prop_assert!(z >= 0.0);
        // order of the inputs is irrelevant, and so is a reflection of both
        let (mut ra, mut rb) = (a.clone(), b.clone());
        ra.reverse();
        rb.reverse();
        prop_assert_eq!(zeta(&ra, &rb).unwrap(), z);
        let fa: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
        let fb: Vec<f64> = b.iter().map(|x| 1.0 - x).collect();
        prop_assert!((zeta(&fa, &fb).unwrap() - z).abs() < 1e-12);
        prop_assert_eq!(zeta(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn distance_is_mean_of_nearest(est in location_set(), truth in location_set()) {
        let d = distance_d(&est, &truth).unwrap();
        let brute: f64 = truth
            .iter()
            .map(|&t| est.iter().map(|&e| (e - t).abs()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / truth.len() as f64;
        prop_assert!((d - brute).abs() < 1e-15);
        // mean of pointwise infima never exceeds their supremum
        prop_assert!(d <= zeta(&est, &truth).unwrap() + 1e-15);
        prop_assert_eq!(distance_d(&truth, &truth).unwrap(), 0.0);
    }

    #[test]
    fn segments_partition_the_series(n in 2usize..400, raw in prop::collection::btree_set(1usize..399, 0..6)) {
        let taus: Vec<usize> = raw.into_iter().filter(|&t| t < n).collect();
        let r = segment_ranges(n, &taus);
        prop_assert_eq!(r.len(), taus.len() + 1);
        prop_assert_eq!(r[0].0, 1);
        prop_assert_eq!(r.last().unwrap().1, n);
        for w in r.windows(2) {
            prop_assert_eq!(w[0].1 + 1, w[1].0);
        }
    }

    #[test]
    fn penalty_formula(n in 20usize..2000, raw in prop::collection::btree_set(1usize..1999, 1..5)) {
        let taus: Vec<usize> = raw.into_iter().filter(|&t| t < n).collect();
        prop_assume!(!taus.is_empty());
        let m = taus.len() as f64;
        let lens: f64 = segment_ranges(n, &taus).iter().map(|(a, b)| ((b - a + 1) as f64).ln()).sum();
        let want = m.ln() + (m + 1.0) * (n as f64).ln() + lens;
        prop_assert!((mdl_penalty(n, &taus) - want).abs() < 1e-9);
    }

    #[test]
    fn feasible_levels_fit(n in 10usize..3000, eps in 0.001f64..0.5, cap in 1usize..12) {
        let g = min_spacing(n, eps);
        let m = max_feasible_changepoints(n, eps, cap);
        prop_assert!(g >= 2);
        prop_assert!(m <= cap);
        prop_assert!(m == 0 || (m + 1) * g <= n);
    }
}
