//! Property tests over randomly generated instances and arbitrary bid
//! profiles: every mechanism outcome must be well-formed, individually
//! rational, and budget-feasible, and cutting a winner's bid must be
//! invisible.

use proptest::prelude::*;

use bfm_core::{
    arrival_order, gen_constraint, gen_instance, mix_seed, run_mechanism, ConstraintKind, Family,
    GenParams, Instance, MechanismId, RandomTape,
};

fn any_instance() -> impl Strategy<Value = Instance> {
    (0usize..3, 1usize..9, any::<u64>(), 0usize..4).prop_map(|(f, n, seed, c)| {
        let family = Family::ALL[f];
        let mut inst = gen_instance(family, n, &GenParams::default(), seed);
        inst.constraint = gen_constraint(ConstraintKind::ALL[c], n, mix_seed(&[seed, 5]));
        inst
    })
}

/// Per-agent multipliers turn the cost vector into an arbitrary bid profile.
fn bids_for(inst: &Instance, factors: &[f64]) -> Vec<f64> {
    inst.costs
        .iter()
        .enumerate()
        .map(|(i, c)| c * factors[i % factors.len()])
        .collect()
}

fn applicable(id: MechanismId, inst: &Instance) -> bool {
    run_mechanism(
        id,
        inst,
        &inst.costs,
        Some(&arrival_order(inst.n, 1)),
        &RandomTape::draw(1, inst.n),
    )
    .is_ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outcomes_are_well_formed_for_any_bids(
        inst in any_instance(),
        tape_seed in any::<u64>(),
        factors in proptest::collection::vec(0.25f64..4.0, 1..9),
    ) {
        let bids = bids_for(&inst, &factors);
        let tape = RandomTape::draw(tape_seed, inst.n);
        let order = arrival_order(inst.n, mix_seed(&[tape_seed, 7]));
        for id in MechanismId::ALL {
            if !applicable(id, &inst) {
                continue;
            }
            let out = run_mechanism(id, &inst, &bids, Some(&order), &tape).unwrap();
            // The cost-oblivious mode reads the recorded costs, not `bids`.
            let effective = if id == MechanismId::Sks { &inst.costs } else { &bids };
            prop_assert_eq!(out.payments.len(), inst.n);
            prop_assert!(out.winners.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(out.winners.iter().all(|&i| i < inst.n));
            prop_assert!(out.value.is_finite());
            let mut total = 0.0;
            for i in 0..inst.n {
                let pay = out.payments[i];
                prop_assert!(pay.is_finite());
                if out.is_winner(i) {
                    prop_assert!(pay >= effective[i] - 1e-12, "winner {} paid {} below bid {}", i, pay, effective[i]);
                } else {
                    prop_assert_eq!(pay, 0.0, "loser {} was paid {}", i, pay);
                }
                total += pay;
            }
            prop_assert!(total <= inst.budget * (1.0 + 1e-9), "payments {} exceed budget {}", total, inst.budget);
        }
    }

    #[test]
    fn cutting_a_winning_bid_changes_nothing(
        inst in any_instance(),
        tape_seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
        cut in 0.0f64..1.0,
    ) {
        let tape = RandomTape::draw(tape_seed, inst.n);
        let order = arrival_order(inst.n, mix_seed(&[tape_seed, 7]));
        for id in MechanismId::MECHANISMS {
            if !applicable(id, &inst) {
                continue;
            }
            let base = run_mechanism(id, &inst, &inst.costs, Some(&order), &tape).unwrap();
            if base.winners.is_empty() {
                continue;
            }
            let winner = base.winners[pick.index(base.winners.len())];
            let mut bids = inst.costs.clone();
            bids[winner] *= cut;
            let lowered = run_mechanism(id, &inst, &bids, Some(&order), &tape).unwrap();
            prop_assert_eq!(&base.winners, &lowered.winners);
            prop_assert_eq!(&base.payments, &lowered.payments);
        }
    }
}
