mod support;

use decpomdp::bench::build_named;
use decpomdp::dp::{exact_prune, exhaustive_backup, mbdp_prune, plan, Algorithm, PlannerConfig};
use decpomdp::model::{Agent, ModelParts};
use decpomdp::stage::{stage_alphas, JointAlphas, StageSets};
use decpomdp::{evaluate, value_at, Belief, DecPomdp, Error, PolicyTree, TreePool};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::*;

fn one_agent_three_vectors() -> DecPomdp {
    DecPomdp::new(ModelParts {
        agents: vec![Agent {
            name: "solo".into(),
            actions: vec!["left".into(), "right".into(), "hedge".into()],
            observations: vec!["none".into()],
        }],
        states: vec!["a".into(), "b".into()],
        transition: [[1.0, 0.0, 0.0, 1.0]; 3].concat(),
        observation: vec![1.0; 6],
        reward: vec![1.0, 0.0, 0.0, 1.0, 0.4, 0.4],
        initial_belief: vec![0.5, 0.5],
        default_horizon: 1,
        discount: 1.0,
    })
    .unwrap()
}

#[test]
fn dominated_hedge_is_pruned() {
    let m = one_agent_three_vectors();
    let candidates = exhaustive_backup(&m, &StageSets::terminal(1), u64::MAX).unwrap();
    assert_eq!(candidates.sizes(), vec![3]);
    let pruned = exact_prune(&m, &candidates, &JointAlphas::terminal(&m)).unwrap();
    let kept: Vec<_> = pruned.sets[0].iter().map(|t| t.action.unwrap()).collect();
    assert_eq!(kept, vec![0, 1]);
    // On a 0.01 grid the hedge never beats both corners.
    for k in 0..=100 {
        let p = k as f64 / 100.0;
        assert!(p.max(1.0 - p) >= 0.4);
    }
}

#[test]
fn last_stage_selection_matches_enumeration() {
    let m = build_named("dec-tiger").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let depth1 = all_trees(3, 2, 1);
    for _ in 0..20 {
        let b = random_belief(&mut rng, 2);
        let kept = mbdp_prune(
            &m,
            &StageSets::terminal(2),
            &JointAlphas::terminal(&m),
            std::slice::from_ref(&b),
            u64::MAX,
        )
        .unwrap();
        assert_eq!(kept.sizes(), vec![1, 1]);
        let comps = [
            kept.sets[0][0].action.unwrap(),
            kept.sets[1][0].action.unwrap(),
        ];
        let chosen = naive_value(&m, &[&depth1[comps[0]], &depth1[comps[1]]], &b);
        let best = depth1
            .iter()
            .flat_map(|x| depth1.iter().map(move |y| (x, y)))
            .map(|(x, y)| naive_value(&m, &[x, y], &b))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((chosen - best).abs() < 1e-9);
    }
}

#[test]
fn mbdp_keeps_candidates_only_and_respects_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let m = random_small_model(&mut rng);
        let depth1 = exhaustive_backup(&m, &StageSets::terminal(2), u64::MAX).unwrap();
        let alphas = stage_alphas(&m, &depth1, &JointAlphas::terminal(&m));
        let candidates = exhaustive_backup(&m, &depth1, u64::MAX).unwrap();
        let points: Vec<Belief> = (0..3)
            .map(|_| random_belief(&mut rng, m.num_states()))
            .collect();
        let kept = mbdp_prune(&m, &depth1, &alphas, &points, u64::MAX).unwrap();
        for i in 0..2 {
            assert!(kept.sets[i].len() <= points.len());
            assert!(kept.sets[i].iter().all(|t| candidates.sets[i].contains(t)));
        }
    }
}

#[test]
fn exact_pruning_ignores_candidate_order() {
    let m = build_named("dec-tiger").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let empty = vec![vec![PolicyTree::empty()], vec![PolicyTree::empty()]];
    let depth1 = exhaustive_backup(&m, &StageSets::terminal(2), u64::MAX).unwrap();
    let alphas = stage_alphas(&m, &depth1, &JointAlphas::terminal(&m));
    let trees1 = materialize(&depth1, &empty);
    let candidates = exhaustive_backup(&m, &depth1, u64::MAX).unwrap();
    let best_at = |sets: &StageSets, b: &Belief| {
        let trees = materialize(sets, &trees1);
        let mut best = f64::NEG_INFINITY;
        for x in &trees[0] {
            for y in &trees[1] {
                best = best.max(naive_value(&m, &[x, y], b));
            }
        }
        best
    };
    let reference = exact_prune(&m, &candidates, &alphas).unwrap();
    let mut shuffled = candidates.clone();
    for set in shuffled.sets.iter_mut() {
        set.shuffle(&mut rng);
    }
    let other = exact_prune(&m, &shuffled, &alphas).unwrap();
    for b in std::iter::once(m.initial_belief().clone())
        .chain((0..10).map(|_| random_belief(&mut rng, 2)))
    {
        assert!((best_at(&reference, &b) - best_at(&other, &b)).abs() < 1e-9);
    }
}

#[test]
fn capacity_guard_trips() {
    let m = build_named("box-pushing").unwrap();
    let depth1 = exhaustive_backup(&m, &StageSets::terminal(2), u64::MAX).unwrap();
    let err = exhaustive_backup(&m, &depth1, 100).unwrap_err();
    assert!(matches!(err, Error::CapacityExceeded { .. }));
    assert!(err.is_resource_limit());
    // 4 * 4^5 = 4096 per agent passes, 4096^2 joint trees do not.
    let err = exhaustive_backup(&m, &depth1, 10_000).unwrap_err();
    assert!(matches!(
        err,
        Error::JointCapacityExceeded {
            requested: 16_777_216,
            ..
        }
    ));
    assert!(err.is_resource_limit());
}

#[test]
fn reported_value_is_the_policy_value() {
    let m = build_named("firefighting").unwrap();
    for alg in Algorithm::ALL {
        let horizon = if alg == Algorithm::Exact { 2 } else { 6 };
        let out = plan(&m, &PlannerConfig::new(alg, horizon, 3)).unwrap();
        let alpha = evaluate(&m, &out.policy, &mut TreePool::new()).unwrap();
        assert!(
            (value_at(&alpha, m.initial_belief()) - out.value).abs() < 1e-9,
            "{alg}"
        );
        assert_eq!(out.policy.depth(), horizon);
        assert_eq!(out.sets.len(), horizon);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let m = build_named("dec-tiger").unwrap();
    let mut c = PlannerConfig::new(Algorithm::Psmbdp, 3, 0);
    assert!(matches!(plan(&m, &c), Err(Error::InvalidConfig(_))));
    c.width = 2;
    c.heuristics = vec![];
    assert!(plan(&m, &c).is_err());
}
