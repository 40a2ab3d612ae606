mod support;

use std::sync::Arc;

use decpomdp::bench::build_named;
use decpomdp::dp::{plan, Algorithm, PlannerConfig};
use decpomdp::policy::{policy_from_json, policy_to_json};
use decpomdp::{
    evaluate, mdp_value_at, rollout, value_at, value_iteration, Belief, Error, JointPolicy,
    PolicyTree, TreePool,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

fn random_tree(rng: &mut ChaCha8Rng, actions: usize, obs: usize, depth: usize) -> Arc<PolicyTree> {
    if depth == 0 {
        return PolicyTree::empty();
    }
    let children = (0..obs)
        .map(|_| random_tree(rng, actions, obs, depth - 1))
        .collect();
    PolicyTree::node(rng.gen_range(0..actions), children).unwrap()
}

fn random_policy(rng: &mut ChaCha8Rng, m: &decpomdp::DecPomdp, depth: usize) -> JointPolicy {
    JointPolicy::new(
        (0..m.num_agents())
            .map(|i| random_tree(rng, m.num_actions(i), m.num_observations(i), depth))
            .collect(),
    )
    .unwrap()
}

#[test]
fn dec_tiger_listen_alpha() {
    let m = build_named("dec-tiger").unwrap();
    let listen = |d| PolicyTree::constant(2, 2, d);
    let q = JointPolicy::new(vec![listen(1), listen(1)]).unwrap();
    let alpha = evaluate(&m, &q, &mut TreePool::new()).unwrap();
    assert_eq!(alpha.values(), &[-2.0, -2.0]);

    let q2 = JointPolicy::new(vec![listen(2), listen(2)]).unwrap();
    let (mean, se) = rollout(&m, &q2, m.initial_belief(), 1000, 1).unwrap();
    assert_eq!((mean, se), (-4.0, 0.0));
}

#[test]
fn evaluation_agrees_with_rollouts_at_random_beliefs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["dec-tiger", "firefighting"] {
        let m = build_named(name).unwrap();
        let q = random_policy(&mut rng, &m, 3);
        let alpha = evaluate(&m, &q, &mut TreePool::new()).unwrap();
        for k in 0..5 {
            let b = random_belief(&mut rng, m.num_states());
            let exact = value_at(&alpha, &b);
            let (mean, se) = rollout(&m, &q, &b, 200_000, k).unwrap();
            assert!(
                (exact - mean).abs() <= 3.0 * se,
                "{name}: {exact} vs {mean} (se {se})"
            );
        }
    }
}

#[test]
fn planned_policies_agree_with_rollouts() {
    let m = build_named("dec-tiger").unwrap();
    for alg in [Algorithm::PbipBefs, Algorithm::PsmbdpBefs] {
        let out = plan(&m, &PlannerConfig::new(alg, 6, 3)).unwrap();
        let (mean, se) = rollout(&m, &out.policy, m.initial_belief(), 100_000, 5).unwrap();
        assert!((out.value - mean).abs() <= 3.0 * se);
    }
}

#[test]
fn local_execution_ignores_other_observations() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = build_named("firefighting-modified").unwrap();
    let q = random_policy(&mut rng, &m, 4);
    for _ in 0..50 {
        let own: Vec<usize> = (0..3).map(|_| rng.gen_range(0..4)).collect();
        let other_a: Vec<usize> = (0..3).map(|_| rng.gen_range(0..4)).collect();
        let other_b: Vec<usize> = (0..3).map(|_| rng.gen_range(0..4)).collect();
        // Walk the joint policy on joint observations and read off agent 0.
        let walk = |other: &[usize]| {
            let mut nodes: Vec<&Arc<PolicyTree>> = q.trees().iter().collect();
            let mut acts = vec![nodes[0].action().unwrap()];
            for t in 0..3 {
                let joint = m.joint_observation(&[own[t], other[t]]).components;
                nodes = nodes.iter().zip(&joint).map(|(n, &o)| n.child(o)).collect();
                acts.push(nodes[0].action().unwrap());
            }
            acts
        };
        assert_eq!(walk(&other_a), walk(&other_b));
        assert_eq!(walk(&other_a), q.local_actions(0, &own));
    }
}

#[test]
fn json_round_trip_and_mismatch() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let m = build_named("box-pushing").unwrap();
    let q = random_policy(&mut rng, &m, 3);
    let text = policy_to_json(&m, &q).unwrap();
    let back = policy_from_json(&m, &text).unwrap();
    let v = |p: &JointPolicy| {
        value_at(
            &evaluate(&m, p, &mut TreePool::new()).unwrap(),
            m.initial_belief(),
        )
    };
    assert_eq!(v(&q), v(&back));
    let tiger = build_named("dec-tiger").unwrap();
    assert!(matches!(
        policy_from_json(&tiger, &text),
        Err(Error::PolicyModelMismatch(_))
    ));
    assert!(matches!(
        evaluate(&tiger, &q, &mut TreePool::new()),
        Err(Error::PolicyModelMismatch(_))
    ));
}

#[test]
fn mdp_bound_dominates_all_small_policies() {
    let m = build_named("dec-tiger").unwrap();
    let horizon = 3;
    let values = value_iteration(&m.underlying_mdp(), horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let beliefs: Vec<Belief> = (0..5).map(|_| random_belief(&mut rng, 2)).collect();
    for depth in 1..=2 {
        let trees = all_trees(3, 2, depth);
        for a in &trees {
            for b in &trees {
                let alpha = naive_alpha(&m, &[a, b]);
                for bel in &beliefs {
                    let v: f64 = alpha.iter().zip(bel.probs()).map(|(x, p)| x * p).sum();
                    assert!(mdp_value_at(&values, bel, horizon - depth) >= v - 1e-9);
                }
            }
        }
    }
    for _ in 0..2000 {
        let q = random_policy(&mut rng, &m, 3);
        let alpha = evaluate(&m, &q, &mut TreePool::new()).unwrap();
        for bel in &beliefs {
            assert!(mdp_value_at(&values, bel, 0) >= value_at(&alpha, bel) - 1e-9);
        }
    }
    assert_eq!(values, value_iteration(&m.underlying_mdp(), horizon));
}

#[test]
fn planned_stage_trees_respect_the_stage_bound() {
    let m = build_named("firefighting").unwrap();
    let horizon = 5;
    let values = value_iteration(&m.underlying_mdp(), horizon);
    let out = plan(&m, &PlannerConfig::new(Algorithm::PsmbdpBefs, horizon, 3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let beliefs: Vec<Belief> = (0..10)
        .map(|_| random_belief(&mut rng, m.num_states()))
        .collect();
    let mut below = vec![vec![PolicyTree::empty()], vec![PolicyTree::empty()]];
    for (t, sets) in out.sets.iter().enumerate().rev() {
        let trees = materialize(sets, &below);
        for x in &trees[0] {
            for y in &trees[1] {
                let q = JointPolicy::new(vec![x.clone(), y.clone()]).unwrap();
                let alpha = evaluate(&m, &q, &mut TreePool::new()).unwrap();
                for b in &beliefs {
                    assert!(mdp_value_at(&values, b, t) >= value_at(&alpha, b) - 1e-6);
                }
            }
        }
        below = trees;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluate_matches_naive_recursion(seed in any::<u64>(), depth in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_small_model(&mut rng);
        let q = random_policy(&mut rng, &m, depth);
        let mut pool = TreePool::new();
        let alpha = evaluate(&m, &q, &mut pool).unwrap();
        let naive = naive_alpha(&m, &q.trees().iter().map(|t| &**t).collect::<Vec<_>>());
        for (x, y) in alpha.values().iter().zip(&naive) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        // The memo does not change results.
        let again = evaluate(&m, &q, &mut pool).unwrap();
        pool.clear_memo();
        let fresh = evaluate(&m, &q, &mut pool).unwrap();
        prop_assert_eq!(alpha.values(), again.values());
        for (x, y) in alpha.values().iter().zip(fresh.values()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
