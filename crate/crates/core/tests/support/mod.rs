//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use decpomdp::model::{Agent, ModelParts};
use decpomdp::stage::{CandidateSpace, LocalId, StageSets};
use decpomdp::{Belief, DecPomdp, JointPolicy, PolicyTree};
use rand::Rng;

/// Random row-stochastic vector, with some entries forced to zero.
pub fn random_distribution<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let sum: f64 = v.iter().sum();
        if sum > 1e-3 {
            v.iter_mut().for_each(|x| *x /= sum);
            return v;
        }
    }
}

/// A random two-agent model with the given dimensions.
pub fn random_model<R: Rng>(
    rng: &mut R,
    states: usize,
    actions: [usize; 2],
    obs: [usize; 2],
) -> DecPomdp {
    let na = actions[0] * actions[1];
    let no = obs[0] * obs[1];
    let mut transition = Vec::with_capacity(na * states * states);
    let mut observation = Vec::with_capacity(na * states * no);
    for _ in 0..na * states {
        transition.extend(random_distribution(rng, states));
        observation.extend(random_distribution(rng, no));
    }
    let reward = (0..na * states)
        .map(|_| rng.gen_range(-10.0..10.0))
        .collect();
    let agents = (0..2)
        .map(|i| Agent {
            name: format!("agent{i}"),
            actions: (0..actions[i]).map(|a| format!("act{a}")).collect(),
            observations: (0..obs[i]).map(|o| format!("obs{o}")).collect(),
        })
        .collect();
    DecPomdp::new(ModelParts {
        agents,
        states: (0..states).map(|s| format!("s{s}")).collect(),
        transition,
        observation,
        reward,
        initial_belief: random_distribution(rng, states),
        default_horizon: 3,
        discount: 1.0,
    })
    .expect("random model is valid")
}

pub fn random_small_model<R: Rng>(rng: &mut R) -> DecPomdp {
    let s = rng.gen_range(1..=4);
    let a = [rng.gen_range(1..=3), rng.gen_range(1..=3)];
    let o = [rng.gen_range(1..=2), rng.gen_range(1..=2)];
    random_model(rng, s, a, o)
}

pub fn random_belief<R: Rng>(rng: &mut R, states: usize) -> Belief {
    Belief::new(random_distribution(rng, states)).unwrap()
}

/// Value of the joint trees from state `s`, by recursion over the model.
pub fn naive_value_from(model: &DecPomdp, trees: &[&PolicyTree], s: usize) -> f64 {
    if trees[0].depth() == 0 {
        return 0.0;
    }
    let comps: Vec<usize> = trees.iter().map(|t| t.action().unwrap()).collect();
    let a = model.joint_action(&comps).flat_index;
    let mut v = model.reward(s, a);
    for s2 in 0..model.num_states() {
        let p = model.transition(s, a, s2);
        if p == 0.0 {
            continue;
        }
        for o in 0..model.num_joint_observations() {
            let q = model.observation(a, s2, o);
            if q == 0.0 {
                continue;
            }
            let oc = model.joint_observation_at(o).components;
            let next: Vec<&PolicyTree> = trees
                .iter()
                .zip(&oc)
                .map(|(t, &oi)| &**t.child(oi))
                .collect();
            v += p * q * naive_value_from(model, &next, s2);
        }
    }
    v
}

pub fn naive_alpha(model: &DecPomdp, trees: &[&PolicyTree]) -> Vec<f64> {
    (0..model.num_states())
        .map(|s| naive_value_from(model, trees, s))
        .collect()
}

pub fn naive_value(model: &DecPomdp, trees: &[&PolicyTree], b: &Belief) -> f64 {
    naive_alpha(model, trees)
        .iter()
        .zip(b.probs())
        .map(|(v, p)| v * p)
        .sum()
}

pub fn naive_policy_value(model: &DecPomdp, q: &JointPolicy, b: &Belief) -> f64 {
    let trees: Vec<&PolicyTree> = q.trees().iter().map(|t| &**t).collect();
    naive_value(model, &trees, b)
}

/// Every local policy tree of the given depth.
pub fn all_trees(actions: usize, observations: usize, depth: usize) -> Vec<Arc<PolicyTree>> {
    if depth == 0 {
        return vec![PolicyTree::empty()];
    }
    let below = all_trees(actions, observations, depth - 1);
    let mut out = Vec::new();
    let combos = below.len().pow(observations as u32);
    for a in 0..actions {
        for mut c in 0..combos {
            let mut children = Vec::with_capacity(observations);
            for _ in 0..observations {
                children.push(below[c % below.len()].clone());
                c /= below.len();
            }
            out.push(PolicyTree::node(a, children).unwrap());
        }
    }
    out
}

/// Optimal value at the initial belief by enumerating all joint policies of
/// a two-agent model.
pub fn brute_force_optimum(model: &DecPomdp, horizon: usize) -> f64 {
    let t0 = all_trees(model.num_actions(0), model.num_observations(0), horizon);
    let t1 = all_trees(model.num_actions(1), model.num_observations(1), horizon);
    let mut best = f64::NEG_INFINITY;
    for a in &t0 {
        for b in &t1 {
            best = best.max(naive_value(model, &[a, b], model.initial_belief()));
        }
    }
    best
}

/// Policy trees of a stage's kept sets, given the trees of the stage below.
pub fn materialize(sets: &StageSets, below: &[Vec<Arc<PolicyTree>>]) -> Vec<Vec<Arc<PolicyTree>>> {
    sets.sets
        .iter()
        .enumerate()
        .map(|(i, set)| {
            set.iter()
                .map(|t| {
                    let children = t
                        .children
                        .iter()
                        .map(|&c| below[i][c as usize].clone())
                        .collect();
                    PolicyTree::node(t.action.unwrap(), children).unwrap()
                })
                .collect()
        })
        .collect()
}

/// Policy tree of a candidate id, given the trees of the previous stage.
pub fn candidate_tree(
    space: &CandidateSpace,
    agent: usize,
    id: LocalId,
    below: &[Arc<PolicyTree>],
) -> Arc<PolicyTree> {
    let t = space.decode(agent, id);
    let children = t
        .children
        .iter()
        .map(|&c| below[c as usize].clone())
        .collect();
    PolicyTree::node(t.action.unwrap(), children).unwrap()
}
