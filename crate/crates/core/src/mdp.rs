//! Finite-horizon value iteration on the underlying MDP.

use crate::belief::Belief;
use crate::model::Mdp;

/// Optimal values of the underlying MDP for every stage.
///
/// `values[t][s]` is the optimal value with `H - t` steps to go, so
/// `values[H]` is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StageValues {
    pub horizon: usize,
    pub values: Vec<Vec<f64>>,
    pub greedy: Vec<Vec<usize>>,
    q: Vec<Vec<f64>>,
    num_actions: usize,
}

impl StageValues {
    /// Q^t(s,a) = R(s,a) + sum_s' T(s'|s,a) V^{t+1}(s').
    pub fn q(&self, t: usize, s: usize, a: usize) -> f64 {
        self.q[t][s * self.num_actions + a]
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Q-MDP action at a belief: the lowest-indexed maximizer of b . Q^t(., a).
    pub fn greedy_at(&self, belief: &Belief, t: usize) -> usize {
        let q = &self.q[t];
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for a in 0..self.num_actions {
            let v: f64 = belief
                .probs()
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(s, &p)| p * q[s * self.num_actions + a])
                .sum();
            if v > best_v {
                best_v = v;
                best = a;
            }
        }
        best
    }
}

pub fn value_iteration(mdp: &Mdp, horizon: usize) -> StageValues {
    let ns = mdp.num_states();
    let na = mdp.num_actions();
    let mut values = vec![vec![0.0; ns]; horizon + 1];
    let mut greedy = vec![vec![0; ns]; horizon];
    let mut q = vec![vec![0.0; ns * na]; horizon];
    for t in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut(t + 1);
        let next = &tail[0];
        let cur = &mut head[t];
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for a in 0..na {
                let future: f64 = mdp
                    .successors(s, a)
                    .iter()
                    .map(|&(s2, p)| p * next[s2])
                    .sum();
                let v = mdp.reward(s, a) + future;
                q[t][s * na + a] = v;
                if v > best {
                    best = v;
                    arg = a;
                }
            }
            cur[s] = best;
            greedy[t][s] = arg;
        }
    }
    StageValues {
        horizon,
        values,
        greedy,
        q,
        num_actions: na,
    }
}

/// Expected optimal MDP value under `belief` at stage `t`.
pub fn mdp_value_at(values: &StageValues, belief: &Belief, t: usize) -> f64 {
    belief.dot(&values.values[t])
}
