//! Invariants over generated inputs.

use std::collections::BTreeSet;

use hlab::denoise::{cumulative_hardness, MassTransform};
use hlab::dynamics::{DynamicsLog, EnsembleHardness, EpochMatrix, Estimator};
use hlab::pruning::{clp_plan, dlp_plan, overlap, PruneMode, PruningPlan};
use hlab::rank::round_half_up;
use hlab::resampling::{build_resampling_plan, resampling_targets, scale_ratios, target_counts, weight_function, RatioVector, ResamplingConfig};
use hlab::stability::{mid_ranks, pruning_stability, spearman};
use proptest::prelude::*;

fn estimator() -> impl Strategy<Value = Estimator> {
    prop_oneof![Just(Estimator::Aum), Just(Estimator::El2n), Just(Estimator::Forgetting)]
}

/// Labels covering every class, with per-sample hardness.
fn labelled(max_k: usize, max_n: usize) -> impl Strategy<Value = (usize, Vec<usize>, Vec<f64>)> {
    (1..=max_k).prop_flat_map(move |k| {
        (k..=max_n.max(k)).prop_flat_map(move |n| {
            (
                Just(k),
                proptest::collection::vec(0..k, n - k),
                proptest::collection::vec(0.01f64..10.0, n),
            )
                .prop_map(move |(k, tail, h)| {
                    let mut labels: Vec<usize> = (0..k).collect();
                    labels.extend(tail);
                    (k, labels, h)
                })
        })
    })
}

fn ens(estimator: Estimator, values: Vec<f64>) -> EnsembleHardness {
    EnsembleHardness {
        estimator,
        ensemble_size: 1,
        values,
    }
}

proptest! {
    #[test]
    fn targets_conserve_and_stay_near_quota(
        sizes in proptest::collection::vec(1usize..200, 1..40),
        ratios in proptest::collection::vec(0.01f64..50.0, 40),
    ) {
        let rv = RatioVector { values: ratios[..sizes.len()].to_vec(), alpha: 1.0 };
        let counts = target_counts(&rv, &sizes).unwrap();
        let n: usize = sizes.iter().sum();
        prop_assert_eq!(counts.total(), n);
        let w: Vec<f64> = sizes.iter().zip(&rv.values).map(|(&s, &r)| s as f64 * r).collect();
        let ws: f64 = w.iter().sum();
        for (c, &s) in counts.values.iter().enumerate() {
            prop_assert!((s as f64 - n as f64 * w[c] / ws).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn weight_function_bounded_and_decreasing(a in 0.0f64..=1.0, b in 0.0f64..=1.0, beta in 0.1f64..20.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let wl = weight_function(lo, beta).unwrap();
        let wh = weight_function(hi, beta).unwrap();
        prop_assert!((0.5..=1.0).contains(&wl) && (0.5..=1.0).contains(&wh));
        prop_assert!(wl >= wh);
    }

    #[test]
    fn alpha_scaling_preserves_mean(ratios in proptest::collection::vec(1.0f64..5.0, 2..20), alpha in 0.0f64..1.2) {
        let rv = RatioVector { values: ratios, alpha: 1.0 };
        let scaled = scale_ratios(&rv, alpha).unwrap();
        prop_assert!((scaled.mean() - rv.mean()).abs() < 1e-9);
    }

    #[test]
    fn resampling_plan_matches_counts((k, labels, h) in labelled(6, 120), est in estimator(), seed in any::<u64>()) {
        let e = ens(est, h);
        let (_, _, _, counts) = resampling_targets(&e, &labels, k, 1.0).unwrap();
        let cfg = ResamplingConfig { seed, ..ResamplingConfig::default() };
        let plan = build_resampling_plan(&e, &labels, k, None, &cfg).unwrap();
        prop_assert_eq!(plan.total(), counts.total());
        for cp in &plan.classes {
            prop_assert_eq!(cp.target, counts.values[cp.class_id]);
        }
        let again = build_resampling_plan(&e, &labels, k, None, &cfg).unwrap();
        prop_assert_eq!(plan, again);
    }

    #[test]
    fn pruning_quotas_and_nesting((k, labels, h) in labelled(5, 150), est in estimator(), r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let e = ens(est, h);
        let n = labels.len();
        let d_lo = dlp_plan(&e, &labels, lo).unwrap();
        let d_hi = dlp_plan(&e, &labels, hi).unwrap();
        prop_assert_eq!(d_lo.len(), round_half_up(lo * n as f64));
        prop_assert!(d_lo.pruned_ids.iter().all(|i| d_hi.pruned_ids.binary_search(i).is_ok()));

        let c_lo = clp_plan(&e, &labels, k, lo).unwrap();
        let c_hi = clp_plan(&e, &labels, k, hi).unwrap();
        let sizes = hlab::geometry::class_sizes(&labels, k);
        for (c, &m) in c_lo.removed_per_class(&labels, k).iter().enumerate() {
            prop_assert_eq!(m, round_half_up(lo * sizes[c] as f64));
        }
        prop_assert!(c_lo.pruned_ids.iter().all(|i| c_hi.pruned_ids.binary_search(i).is_ok()));
        prop_assert!(c_hi.pruned_ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn stability_and_overlap_bounds(
        a in proptest::collection::btree_set(0usize..300, 1..100),
        b in proptest::collection::btree_set(0usize..300, 1..100),
    ) {
        let mk = |s: &BTreeSet<usize>| PruningPlan {
            mode: PruneMode::Clp,
            rate: 0.0,
            estimator: Estimator::El2n,
            n_samples: 300,
            pruned_ids: s.iter().copied().collect(),
        };
        let (pa, pb) = (mk(&a), mk(&b));
        let s = pruning_stability(&pa, &pb).unwrap();
        prop_assert!(s >= 0.0 && s <= 100.0 * b.len() as f64 / a.len() as f64 + 1e-9);
        let o = overlap(&pa, &pb).unwrap();
        let r = overlap(&pb, &pa).unwrap();
        prop_assert_eq!(o.intersection, a.intersection(&b).count());
        prop_assert_eq!((o.a_in_b, o.b_in_a), (r.b_in_a, r.a_in_b));
    }

    #[test]
    fn mid_ranks_sum_and_spearman_bounds(a in proptest::collection::vec(0i32..6, 3..12), b in proptest::collection::vec(-1e3f64..1e3, 12)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b = &b[..a.len()];
        let k = a.len() as f64;
        prop_assert!((mid_ranks(&a).iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < 1e-9);
        if let Ok(s) = spearman(&a, b) {
            let t = spearman(b, &a).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s.rho));
            prop_assert!((s.rho - t.rho).abs() < 1e-12);
            prop_assert!(s.p_value > 0.0 && s.p_value <= 1.0);
        }
    }

    #[test]
    fn cumulative_curve_is_monotone(values in proptest::collection::vec(-5.0f64..5.0, 2..300), est in estimator()) {
        if let Ok(c) = cumulative_hardness(&ens(est, values.clone()), MassTransform::Shifted) {
            prop_assert!(c.y.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*c.y.last().unwrap(), 1.0);
            prop_assert_eq!(c.order.iter().copied().collect::<BTreeSet<_>>().len(), values.len());
        }
    }

    #[test]
    fn hdyn_bytes_round_trip(n in 1usize..30, e in 1usize..10, seed in any::<u64>(), with in 0u8..16) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = |r: &mut rand_chacha::ChaCha8Rng, lo: f32| EpochMatrix::new(e, n, (0..n * e).map(|_| lo + r.random::<f32>() * 4.0).collect()).unwrap();
        let mut log = DynamicsLog::new(format!("m{seed}"), n, e);
        if with & 1 != 0 { log = log.with_margin(m(&mut r, -2.0)).unwrap(); }
        if with & 2 != 0 { log = log.with_loss(m(&mut r, 0.0)).unwrap(); }
        if with & 4 != 0 {
            log = log.with_correct(EpochMatrix::new(e, n, (0..n * e).map(|_| r.random::<bool>()).collect()).unwrap()).unwrap();
        }
        if with & 8 != 0 { log = log.with_errnorm(m(&mut r, 0.0)).unwrap(); }
        prop_assert_eq!(DynamicsLog::from_bytes(&log.to_bytes()).unwrap(), log);
    }
}
