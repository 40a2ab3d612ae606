mod support;

use decpomdp::bench::build_named;
use decpomdp::bnb::{best_joint, node_bound, Exclusions, SearchNode, SearchStrategy};
use decpomdp::psmbdp::{
    criterion_score, psmbdp_operator, AgentOrder, SelectionMode, SelectionState,
};
use decpomdp::stage::{stage_alphas, CandidateSpace, JointAlphas, LocalId, PointValues, StageSets};
use decpomdp::{Belief, DecPomdp, PolicyTree};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

/// A model with full depth-1 sets as the previous stage.
fn setup(m: &DecPomdp) -> (StageSets, JointAlphas) {
    let s1 = CandidateSpace::new(m, &StageSets::terminal(2)).unwrap();
    let all = (0..2).map(|i| (0..s1.count(i)).collect()).collect();
    let prev = s1.stage_sets(1, all);
    let alphas = stage_alphas(m, &prev, &JointAlphas::terminal(m));
    (prev, alphas)
}

#[test]
fn bound_tightens_along_refinements() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 1000 {
        let m = random_small_model(&mut rng);
        let (prev, alphas) = setup(&m);
        let space = CandidateSpace::new(&m, &prev).unwrap();
        let pv = PointValues::new(&m, &random_belief(&mut rng, m.num_states()), &alphas);
        let mut node = SearchNode::root(&space);
        let mut parent = node_bound(&m, &pv, &node);
        let mut slots: Vec<(usize, Option<usize>)> = (0..2)
            .flat_map(|i| {
                std::iter::once((i, None))
                    .chain((0..space.num_observations(i)).map(move |o| (i, Some(o))))
            })
            .collect();
        slots.shuffle(&mut rng);
        for (i, slot) in slots {
            match slot {
                None => node.actions[i] = Some(rng.gen_range(0..space.num_actions(i))),
                Some(o) => {
                    node.assignments[i][o] = Some(rng.gen_range(0..space.prev_size(i)) as u32)
                }
            }
            let child = node_bound(&m, &pv, &node);
            assert!(child <= parent + 1e-12, "child {child} > parent {parent}");
            parent = child;
            checked += 1;
        }
    }
}

#[test]
fn strategies_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..200 {
        let m = random_small_model(&mut rng);
        let (prev, alphas) = setup(&m);
        let space = CandidateSpace::new(&m, &prev).unwrap();
        let pv = PointValues::new(&m, &random_belief(&mut rng, m.num_states()), &alphas);
        let excl = Exclusions::new(2);
        let d = best_joint(&m, &space, &pv, &excl, SearchStrategy::DepthFirst, u64::MAX).unwrap();
        let b = best_joint(&m, &space, &pv, &excl, SearchStrategy::BestFirst, u64::MAX).unwrap();
        assert!((d.value - b.value).abs() < 1e-9);
        assert_eq!(d.locals, b.locals);
    }
}

#[test]
fn exclusion_yields_second_best() {
    let m = build_named("dec-tiger").unwrap();
    let empty = vec![vec![PolicyTree::empty()], vec![PolicyTree::empty()]];
    let (prev, alphas) = setup(&m);
    let trees1 = materialize(&prev, &empty);
    let space = CandidateSpace::new(&m, &prev).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..10 {
        let b = random_belief(&mut rng, 2);
        let pv = PointValues::new(&m, &b, &alphas);
        let mut values: Vec<(Vec<LocalId>, f64)> = Vec::new();
        for x in 0..space.count(0) {
            for y in 0..space.count(1) {
                let tx = candidate_tree(&space, 0, x, &trees1[0]);
                let ty = candidate_tree(&space, 1, y, &trees1[1]);
                values.push((vec![x, y], naive_value(&m, &[&tx, &ty], &b)));
            }
        }
        let mut excl = Exclusions::new(2);
        let first =
            best_joint(&m, &space, &pv, &excl, SearchStrategy::BestFirst, u64::MAX).unwrap();
        let top = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        assert!((first.value - top).abs() < 1e-9);
        excl.joint.insert(first.locals.clone());
        let second =
            best_joint(&m, &space, &pv, &excl, SearchStrategy::DepthFirst, u64::MAX).unwrap();
        let runner_up = values
            .iter()
            .filter(|v| v.0 != first.locals)
            .map(|v| v.1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((second.value - runner_up).abs() < 1e-9);
        assert_ne!(second.locals, first.locals);
    }
}

#[test]
fn criterion_of_depth_one_sets_matches_enumeration() {
    let m = build_named("dec-tiger").unwrap();
    let space = CandidateSpace::new(&m, &StageSets::terminal(2)).unwrap();
    let terminal = JointAlphas::terminal(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let beliefs: Vec<Belief> = (0..10).map(|_| random_belief(&mut rng, 2)).collect();
    let pvs: Vec<PointValues> = beliefs
        .iter()
        .map(|b| PointValues::new(&m, b, &terminal))
        .collect();
    let score = criterion_score(&m, &space, &[vec![0, 1, 2], vec![0, 1, 2]], &pvs);
    let trees = all_trees(3, 2, 1);
    let expected: f64 = beliefs
        .iter()
        .map(|b| {
            let mut best = f64::NEG_INFINITY;
            for x in &trees {
                for y in &trees {
                    best = best.max(naive_value(&m, &[x, y], b));
                }
            }
            best
        })
        .sum::<f64>()
        / beliefs.len() as f64;
    assert!((score - expected).abs() < 1e-9);
}

#[test]
fn incremental_gain_matches_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..200 {
        let m = random_small_model(&mut rng);
        let (prev, alphas) = setup(&m);
        let space = CandidateSpace::new(&m, &prev).unwrap();
        let pvs: Vec<PointValues> = (0..5)
            .map(|_| PointValues::new(&m, &random_belief(&mut rng, m.num_states()), &alphas))
            .collect();
        let sets: Vec<Vec<LocalId>> = (0..2)
            .map(|i| {
                let mut ids: Vec<LocalId> = (0..space.count(i)).collect();
                ids.shuffle(&mut rng);
                ids.truncate(rng.gen_range(1..=3.min(ids.len())));
                ids
            })
            .collect();
        let mut state = SelectionState::new(&m, &space, &pvs, &[sets[0][0], sets[1][0]]);
        for (i, set) in sets.iter().enumerate() {
            for &id in &set[1..] {
                state.add(i, id);
            }
        }
        let agent = rng.gen_range(0..2);
        let cand = rng.gen_range(0..space.count(agent));
        let gain = state.marginal_gain(agent, cand) / pvs.len() as f64;
        let mut grown = sets.clone();
        grown[agent].push(cand);
        let direct = criterion_score(&m, &space, &grown, &pvs);
        assert!((gain - direct).abs() < 1e-9, "{gain} vs {direct}");
    }
}

/// Round-robin greedy selection by scanning every candidate's marginal gain.
fn replay(
    m: &DecPomdp,
    space: &CandidateSpace,
    pvs: &[PointValues],
    anchor: &[LocalId],
    width: usize,
) -> (Vec<Vec<LocalId>>, Vec<f64>) {
    let mut state = SelectionState::new(m, space, pvs, anchor);
    let n = pvs.len() as f64;
    let mut trace = vec![state.score() / n];
    loop {
        let mut added = false;
        for i in 0..2 {
            if state.selected().iter().all(|s| s.len() >= width) {
                break;
            }
            if state.selected()[i].len() >= width {
                continue;
            }
            let gains: Vec<(LocalId, f64)> = (0..space.count(i))
                .filter(|id| !state.selected()[i].contains(id))
                .map(|id| (id, state.marginal_gain(i, id)))
                .collect();
            let Some(best) = gains.iter().map(|g| g.1).reduce(f64::max) else {
                continue;
            };
            let (id, f) = *gains.iter().find(|g| g.1 >= best - 1e-9).unwrap();
            if f > state.score() + 1e-9 {
                state.add(i, id);
                trace.push(state.score() / n);
                added = true;
            }
        }
        if !added || state.selected().iter().all(|s| s.len() >= width) {
            break;
        }
    }
    let mut sets = state.selected().to_vec();
    sets.iter_mut().for_each(|s| s.sort_unstable());
    (sets, trace)
}

#[test]
fn greedy_selection_matches_a_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let mut models: Vec<DecPomdp> = (0..30).map(|_| random_small_model(&mut rng)).collect();
    models.push(build_named("dec-tiger").unwrap());
    for m in &models {
        let (prev, alphas) = setup(m);
        let space = CandidateSpace::new(m, &prev).unwrap();
        let points: Vec<Belief> = (0..8)
            .map(|_| random_belief(&mut rng, m.num_states()))
            .collect();
        let pvs: Vec<PointValues> = points
            .iter()
            .map(|b| PointValues::new(m, b, &alphas))
            .collect();
        let width = rng.gen_range(1..=4);
        let mean = PointValues::new(m, &Belief::mean(&points), &alphas);
        let anchor = best_joint(
            m,
            &space,
            &mean,
            &Exclusions::new(2),
            SearchStrategy::BestFirst,
            u64::MAX,
        )
        .unwrap();
        let (sets, trace) = replay(m, &space, &pvs, &anchor.locals, width);
        for mode in [SelectionMode::Exhaustive, SelectionMode::BestFirst] {
            let out = psmbdp_operator(
                m,
                &prev,
                &alphas,
                &points,
                width,
                mode,
                AgentOrder::RoundRobin,
                u64::MAX,
                u64::MAX,
            )
            .unwrap();
            assert_eq!(out.anchor, anchor.locals);
            assert_eq!(out.sets, space.stage_sets(2, sets.clone()), "{mode:?}");
            assert_eq!(out.trace.len(), trace.len());
            for (x, y) in out.trace.iter().zip(&trace) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
