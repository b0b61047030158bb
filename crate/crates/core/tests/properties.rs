//! Randomized invariants of sequences, operators and averages.

use ergoseq::dsop::{random_doubly_stochastic, random_ds, DsOperator, SignMode};
use ergoseq::ergodic::{coordinate_averages, isometry_identity_defect, maximal_function, run_averaging, AverageState};
use ergoseq::seqcore::{Tail, TruncatedSequence};
use ergoseq::spaces::{Membership, SpaceDescriptor};
use proptest::prelude::*;

fn finite_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 0..max_len)
}

fn seq(max_len: usize) -> impl Strategy<Value = TruncatedSequence> {
    finite_vec(max_len).prop_map(TruncatedSequence::finite)
}

fn operator() -> impl Strategy<Value = DsOperator> {
    (1usize..9, 0.1..1.0f64, any::<bool>(), any::<u64>()).prop_map(|(dim, density, signed, seed)| {
        let mode = if signed { SignMode::Signed } else { SignMode::Nonnegative };
        random_ds(dim, density, mode, seed)
    })
}

fn operator_and_input() -> impl Strategy<Value = (DsOperator, TruncatedSequence)> {
    operator().prop_flat_map(|op| {
        let dim = op.dim().unwrap();
        (Just(op), prop::collection::vec(-5.0..5.0f64, dim).prop_map(TruncatedSequence::finite))
    })
}

fn within(a: f64, b: f64, rel: f64) -> bool {
    a <= b + rel * (1.0 + b.abs())
}

proptest! {
    #[test]
    fn rearrangement_is_idempotent(x in seq(24)) {
        let once = x.rearrange().unwrap();
        prop_assert_eq!(once.rearrange().unwrap(), once.clone());
        for w in once.values().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn rearrangement_is_sup_contraction(x in seq(16), y in seq(16)) {
        let (xs, ys) = (x.rearrange().unwrap(), y.rearrange().unwrap());
        let dist = x.sub(&y).sup_norm();
        let len = xs.len().max(ys.len());
        for n in 1..=len {
            let gap = (xs.get(n).unwrap_or(0.0) - ys.get(n).unwrap_or(0.0)).abs();
            prop_assert!(gap <= dist, "n={} gap={} dist={}", n, gap, dist);
        }
    }

    #[test]
    fn majorization_is_reflexive_and_transitive(x in seq(12), y in seq(12), z in seq(12)) {
        prop_assert!(x.majorized_by(&x).unwrap());
        prop_assert!(x.majorized_by(&x.rearrange().unwrap()).unwrap());
        let x_leq_y = x.majorization_gap(&y).unwrap() <= 0.0;
        let y_leq_z = y.majorization_gap(&z).unwrap() <= 0.0;
        if x_leq_y && y_leq_z {
            prop_assert!(x.majorization_gap(&z).unwrap() <= 1e-12 * (1.0 + z.norm(1.0).unwrap()));
        }
    }

    #[test]
    fn split_reconstructs(x in seq(24), k in 1u64..200) {
        let split = x.split_c0(k).unwrap();
        prop_assert_eq!(split.head.add(&split.tail_part).trimmed(), x.trimmed());
        prop_assert!(split.bound < 1.0 / k as f64);
        prop_assert!(split.head.values().iter().rev().take(1).all(|v| v.abs() >= 1.0 / k as f64));
    }

    #[test]
    fn norm_chain(x in seq(24), p in 1.0..4.0f64, dq in 0.0..4.0f64) {
        let q = p + dq;
        let (np, nq, ninf) = (x.norm(p).unwrap(), x.norm(q).unwrap(), x.sup_norm());
        prop_assert!(within(ninf, nq, 1e-12));
        prop_assert!(within(nq, np, 1e-12));
    }

    #[test]
    fn averages_contract((op, x) in operator_and_input(), n in 1u64..40) {
        let mut state = AverageState::new(op, &x).unwrap();
        for _ in 0..n {
            state.step().unwrap();
        }
        let avg = state.average();
        prop_assert!(within(avg.sup_norm(), x.sup_norm(), 1e-12));
        prop_assert!(within(avg.norm(1.0).unwrap(), x.norm(1.0).unwrap(), 1e-12));
    }

    #[test]
    fn constructions_stay_certified(a in operator(), b in operator(), w in 0.0..1.0f64, e in 1u32..5) {
        let dim = a.dim().unwrap().max(b.dim().unwrap());
        let (a, b) = (a.to_matrix(dim).unwrap(), b.to_matrix(dim).unwrap());
        let mix = DsOperator::convex_combination(vec![w, 1.0 - w], vec![a.clone(), b.clone()]).unwrap();
        let comp = DsOperator::compose(vec![a.clone(), b]).unwrap();
        let pow = DsOperator::power(a, e).unwrap();
        for op in [mix, comp, pow] {
            let flat = op.to_matrix(dim).unwrap();
            let m = flat.matrix().unwrap();
            prop_assert!(m.max_abs_row_sum() <= 1.0 + 1e-12);
            prop_assert!(m.max_abs_col_sum() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn modulus_dominates_powers((op, x) in operator_and_input(), k in 0u32..8) {
        let modulus = op.modulus().unwrap();
        let lhs = op.apply_power(&x, k).unwrap().abs();
        let rhs = modulus.apply_power(&x.abs(), k).unwrap();
        for s in 1..=op.dim().unwrap() {
            let (l, r) = (lhs.get(s).unwrap(), rhs.get(s).unwrap());
            prop_assert!(l <= r + 1e-12 * (1.0 + r), "s={} {} > {}", s, l, r);
        }
    }

    #[test]
    fn maximal_function_grows_with_horizon((op, x) in operator_and_input(), h1 in 1u64..30, dh in 0u64..30) {
        let small = maximal_function(&op, &x, h1).unwrap();
        let large = maximal_function(&op, &x, h1 + dh).unwrap();
        for s in 1..=op.dim().unwrap() {
            prop_assert!(small.get(s).unwrap() <= large.get(s).unwrap());
        }
    }

    #[test]
    fn domination_transfers((op, x) in operator_and_input(), shift in -1.0..1.0f64, h in 1u64..40) {
        let x2 = x.scale(shift).add(&TruncatedSequence::finite(vec![shift; op.dim().unwrap()]));
        let diff = x.sub(&x2);
        let lhs = maximal_function(&op, &diff, h).unwrap();
        let rhs = maximal_function(&op.modulus().unwrap(), &diff.abs(), h).unwrap();
        for s in 1..=op.dim().unwrap() {
            let (l, r) = (lhs.get(s).unwrap(), rhs.get(s).unwrap());
            prop_assert!(l <= r + 1e-12 * (1.0 + r));
        }
    }

    #[test]
    fn isometry_identity_on_transpose_fixed(dim in 1usize..12, parts in 1usize..4, seed in any::<u64>(), c in -3.0..3.0f64) {
        // Constants are fixed by the transpose of any doubly stochastic matrix.
        let op = random_doubly_stochastic(dim, parts, seed);
        let y = vec![c; dim];
        prop_assert!(isometry_identity_defect(op.matrix().unwrap(), &y) <= 1e-10);
    }

    #[test]
    fn coordinate_traces_share_the_limit(
        dim in 1usize..10,
        cycles in prop::collection::vec(prop::sample::select(vec![1usize, 2, 4]), 10),
        v in prop::collection::vec(-2.0..2.0f64, 10),
    ) {
        // Permutations whose cycles have length 1, 2 or 4 converge exactly
        // once n is a multiple of 4.
        let mut images: Vec<usize> = (1..=dim).collect();
        let mut start = 0;
        for &len in &cycles {
            if start >= dim {
                break;
            }
            let len = len.min(dim - start);
            let len = if len == 3 { 2 } else { len };
            images[start..start + len].rotate_left(1 % len);
            start += len;
        }
        let op = DsOperator::permutation(&images).unwrap();
        let x = TruncatedSequence::finite(v[..dim].to_vec());
        let report = run_averaging(&op, &x, 1 << 8, 1e-8, 3).unwrap();
        prop_assert!(report.converged);
        let h = 64;
        for s in 1..=dim {
            let trace = coordinate_averages(&op, &x, s, h).unwrap();
            let limit = report.limit_estimate.get(s).unwrap();
            for n in [16, 32, 64] {
                prop_assert!((trace[n - 1] - limit).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn uiet_matches_unit_membership(p in 1.0..10.0f64) {
        for space in [SpaceDescriptor::Lp { p }, SpaceDescriptor::C0, SpaceDescriptor::Linf] {
            prop_assert_eq!(space.uiet(), !space.contains_one());
            prop_assert_eq!(space.contains(&TruncatedSequence::ones()) == Membership::Member, space.contains_one());
        }
    }

    #[test]
    fn membership_chain(v in finite_vec(8), tail in prop_oneof![Just(Tail::Zero), (-2.0..2.0f64).prop_map(Tail::Constant), (0.0..2.0f64).prop_map(Tail::Bounded)], p in 1.0..5.0f64) {
        let x = TruncatedSequence::new(v, tail).unwrap();
        let chain = [SpaceDescriptor::Lp { p }, SpaceDescriptor::Lp { p: p + 1.0 }, SpaceDescriptor::C0, SpaceDescriptor::Linf];
        for pair in chain.windows(2) {
            if pair[0].contains(&x) == Membership::Member {
                prop_assert_eq!(pair[1].contains(&x), Membership::Member);
            }
        }
    }
}
