//! Per-stage bookkeeping shared by the DP operators.
//!
//! A stage's kept trees refer to the previous stage's kept trees by position.
//! Candidate trees of a backup are numbered by a local id: the root action
//! followed by one child position per local observation, read as a mixed-radix
//! number with observation 0 most significant. Comparing local ids therefore
//! compares (action, children) lexicographically.

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::model::DecPomdp;

pub type LocalId = u64;

/// A tree of one stage: root action plus positions of its children in the
/// previous stage's kept list. The empty tree has no action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalTree {
    pub action: Option<usize>,
    pub children: Vec<u32>,
}

/// Kept per-agent trees at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSets {
    pub depth: usize,
    pub sets: Vec<Vec<LocalTree>>,
}

impl StageSets {
    /// The horizon stage: a single empty tree per agent.
    pub fn terminal(num_agents: usize) -> Self {
        StageSets {
            depth: 0,
            sets: vec![
                vec![LocalTree {
                    action: None,
                    children: Vec::new(),
                }];
                num_agents
            ],
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(|s| s.len()).collect()
    }
}

/// The implicit backup set A_i x (Q_i)^{Omega_i} for every agent.
#[derive(Debug, Clone)]
pub struct CandidateSpace {
    actions: Vec<usize>,
    observations: Vec<usize>,
    prev: Vec<usize>,
    blocks: Vec<u64>,
    counts: Vec<u64>,
}

impl CandidateSpace {
    /// Fails with `CapacityExceeded` when an agent's count overflows `u64`.
    pub fn new(model: &DecPomdp, prev: &StageSets) -> Result<Self> {
        let n = model.num_agents();
        let mut blocks = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for i in 0..n {
            let m = prev.sets[i].len() as u64;
            let k = model.num_observations(i) as u32;
            let na = model.num_actions(i) as u64;
            let overflow = || Error::CapacityExceeded {
                agent: i,
                requested: (na as u128).saturating_mul((m as u128).saturating_pow(k)),
                limit: u64::MAX as u128,
            };
            let block = if prev.depth == 0 {
                1
            } else {
                m.checked_pow(k).ok_or_else(overflow)?
            };
            blocks.push(block);
            counts.push(block.checked_mul(na).ok_or_else(overflow)?);
        }
        Ok(CandidateSpace {
            actions: (0..n).map(|i| model.num_actions(i)).collect(),
            observations: (0..n).map(|i| model.num_observations(i)).collect(),
            prev: prev.sets.iter().map(|s| s.len()).collect(),
            blocks,
            counts,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn count(&self, agent: usize) -> u64 {
        self.counts[agent]
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.actions[agent]
    }

    pub fn num_observations(&self, agent: usize) -> usize {
        self.observations[agent]
    }

    /// Size of the previous kept set for `agent`.
    pub fn prev_size(&self, agent: usize) -> usize {
        self.prev[agent]
    }

    /// Number of assignments per root action.
    pub fn block(&self, agent: usize) -> u64 {
        self.blocks[agent]
    }

    pub fn action_of(&self, agent: usize, id: LocalId) -> usize {
        (id / self.blocks[agent]) as usize
    }

    /// Decodes the child positions of a candidate into `out`.
    pub fn children_into(&self, agent: usize, id: LocalId, out: &mut [u32]) {
        let m = self.prev[agent] as u64;
        let mut rem = id % self.blocks[agent];
        if self.blocks[agent] == 1 {
            out.iter_mut().for_each(|c| *c = 0);
            return;
        }
        for c in out.iter_mut().rev() {
            *c = (rem % m) as u32;
            rem /= m;
        }
    }

    pub fn encode(&self, agent: usize, action: usize, children: &[u32]) -> LocalId {
        let m = self.prev[agent] as u64;
        let assign = if self.blocks[agent] == 1 {
            0
        } else {
            children.iter().fold(0u64, |acc, &c| acc * m + c as u64)
        };
        action as u64 * self.blocks[agent] + assign
    }

    /// Kept sets made of the given candidates, sorted by id with duplicates removed.
    pub fn stage_sets(&self, depth: usize, mut locals: Vec<Vec<LocalId>>) -> StageSets {
        let sets = locals
            .iter_mut()
            .enumerate()
            .map(|(i, ids)| {
                ids.sort_unstable();
                ids.dedup();
                ids.iter().map(|&id| self.decode(i, id)).collect()
            })
            .collect();
        StageSets { depth, sets }
    }

    pub fn decode(&self, agent: usize, id: LocalId) -> LocalTree {
        let mut children = vec![0; self.observations[agent]];
        self.children_into(agent, id, &mut children);
        LocalTree {
            action: Some(self.action_of(agent, id)),
            children,
        }
    }
}

/// Mixed-radix layout of joint tuples over per-agent kept sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleIndexer {
    pub sizes: Vec<usize>,
    pub strides: Vec<usize>,
    pub count: usize,
}

impl TupleIndexer {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let count = sizes.iter().product();
        TupleIndexer {
            sizes,
            strides,
            count,
        }
    }

    pub fn encode(&self, parts: &[usize]) -> usize {
        parts.iter().zip(&self.strides).map(|(p, s)| p * s).sum()
    }

    pub fn decode_into(&self, mut flat: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = flat / s;
            flat %= s;
        }
    }
}

/// Alpha-vectors of every joint tuple of kept trees, stored state-major:
/// `data[s * count + p]`.
#[derive(Debug, Clone)]
pub struct JointAlphas {
    pub index: TupleIndexer,
    pub num_states: usize,
    data: Vec<f64>,
}

impl JointAlphas {
    pub fn terminal(model: &DecPomdp) -> Self {
        JointAlphas {
            index: TupleIndexer::new(vec![1; model.num_agents()]),
            num_states: model.num_states(),
            data: vec![0.0; model.num_states()],
        }
    }

    pub fn count(&self) -> usize {
        self.index.count
    }

    /// Values of all tuples at state `s`.
    #[inline]
    pub fn at_state(&self, s: usize) -> &[f64] {
        let c = self.index.count;
        &self.data[s * c..(s + 1) * c]
    }

    pub fn get(&self, s: usize, p: usize) -> f64 {
        self.data[s * self.index.count + p]
    }

    pub fn alpha(&self, p: usize) -> Vec<f64> {
        (0..self.num_states).map(|s| self.get(s, p)).collect()
    }

    /// Value of tuple `p` at a belief.
    pub fn value(&self, p: usize, b: &Belief) -> f64 {
        b.probs()
            .iter()
            .enumerate()
            .map(|(s, &q)| q * self.get(s, p))
            .sum()
    }
}

/// Previous-stage tuple index reached under each joint observation when the
/// agents play the given children.
pub fn child_tuples(model: &DecPomdp, prev: &TupleIndexer, children: &[&[u32]], out: &mut [usize]) {
    let obs = model.observations();
    for (o, slot) in out.iter_mut().enumerate() {
        let comps = obs.decode(o);
        *slot = comps
            .iter()
            .enumerate()
            .map(|(i, &oi)| children[i][oi] as usize * prev.strides[i])
            .sum();
    }
}

/// alpha(s) = R(s,a) + sum_s' T(s'|s,a) sum_o O(o|a,s') alpha_prev[p(o)](s').
pub fn backup_alpha(
    model: &DecPomdp,
    prev: &JointAlphas,
    a: usize,
    child_p: &[usize],
    out: &mut [f64],
) {
    let ns = model.num_states();
    let mut w = vec![0.0; ns];
    for (s2, ws) in w.iter_mut().enumerate() {
        let row = prev.at_state(s2);
        *ws = model
            .observation_row(a, s2)
            .iter()
            .zip(child_p)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, &c)| p * row[c])
            .sum();
    }
    for (s, v) in out.iter_mut().enumerate() {
        *v = model.reward(s, a)
            + model
                .successors(s, a)
                .iter()
                .map(|&(s2, p)| p * w[s2])
                .sum::<f64>();
    }
}

/// Alpha-vectors of every joint tuple of `sets`, built from `prev`.
pub fn stage_alphas(model: &DecPomdp, sets: &StageSets, prev: &JointAlphas) -> JointAlphas {
    let n = model.num_agents();
    let ns = model.num_states();
    let index = TupleIndexer::new(sets.sizes());
    let count = index.count;
    let mut data = vec![0.0; ns * count];
    let mut parts = vec![0; n];
    let mut actions = vec![0; n];
    let mut child_p = vec![0; model.num_joint_observations()];
    let mut alpha = vec![0.0; ns];
    for p in 0..count {
        index.decode_into(p, &mut parts);
        let trees: Vec<&LocalTree> = (0..n).map(|i| &sets.sets[i][parts[i]]).collect();
        for i in 0..n {
            actions[i] = trees[i].action.expect("stage trees have actions");
        }
        let a = model.actions().encode(&actions);
        let children: Vec<&[u32]> = trees.iter().map(|t| t.children.as_slice()).collect();
        child_tuples(model, &prev.index, &children, &mut child_p);
        backup_alpha(model, prev, a, &child_p, &mut alpha);
        for s in 0..ns {
            data[s * count + p] = alpha[s];
        }
    }
    JointAlphas {
        index,
        num_states: ns,
        data,
    }
}

/// Projection of a belief through one step: for joint action `a`, joint
/// observation `o` and previous tuple `p`,
/// `terms[(a, o, p)] = sum_s' beta_a(s') O(o|a,s') alpha_p(s')`
/// with `beta_a = b T_a`. A joint candidate's value at the belief is
/// `rewards[a] + sum_o terms[(a, o, p(o))]`.
#[derive(Debug, Clone)]
pub struct PointValues {
    pub num_actions: usize,
    pub num_observations: usize,
    pub num_tuples: usize,
    pub rewards: Vec<f64>,
    obs_probs: Vec<f64>,
    terms: Vec<f64>,
    full_max: Vec<f64>,
    single_max: Vec<Vec<f64>>,
    strides: Vec<usize>,
    obs_components: Vec<usize>,
    num_agents: usize,
}

impl PointValues {
    pub fn new(model: &DecPomdp, b: &Belief, prev: &JointAlphas) -> Self {
        let na = model.num_joint_actions();
        let no = model.num_joint_observations();
        let np = prev.count();
        let n = model.num_agents();
        let mut terms = vec![0.0; na * no * np];
        let mut rewards = vec![0.0; na];
        let mut obs_probs = vec![0.0; na * no];
        let mut beta = vec![0.0; model.num_states()];
        for a in 0..na {
            rewards[a] = b.dot(model.reward_row(a));
            beta.iter_mut().for_each(|x| *x = 0.0);
            for (s, &q) in b.probs().iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                for &(s2, t) in model.successors(s, a) {
                    beta[s2] += q * t;
                }
            }
            for (s2, &bs) in beta.iter().enumerate() {
                if bs == 0.0 {
                    continue;
                }
                let alpha = prev.at_state(s2);
                for (o, &po) in model.observation_row(a, s2).iter().enumerate() {
                    if po == 0.0 {
                        continue;
                    }
                    let w = bs * po;
                    obs_probs[a * no + o] += w;
                    let dst = &mut terms[(a * no + o) * np..(a * no + o + 1) * np];
                    for (d, x) in dst.iter_mut().zip(alpha) {
                        *d += w * x;
                    }
                }
            }
        }
        let strides = prev.index.strides.clone();
        let sizes = &prev.index.sizes;
        let mut full_max = vec![f64::NEG_INFINITY; na * no];
        let mut single_max: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![f64::NEG_INFINITY; na * no * sizes[i]])
            .collect();
        let mut parts = vec![0; n];
        for ao in 0..na * no {
            let row = &terms[ao * np..(ao + 1) * np];
            for (p, &v) in row.iter().enumerate() {
                if v > full_max[ao] {
                    full_max[ao] = v;
                }
                prev.index.decode_into(p, &mut parts);
                for i in 0..n {
                    let slot = &mut single_max[i][ao * sizes[i] + parts[i]];
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        }
        let obs_components = (0..no)
            .flat_map(|o| model.observations().decode(o).to_vec())
            .collect();
        PointValues {
            num_actions: na,
            num_observations: no,
            num_tuples: np,
            rewards,
            obs_probs,
            terms,
            full_max,
            single_max,
            strides,
            obs_components,
            num_agents: n,
        }
    }

    /// O(o|b,a).
    #[inline]
    pub fn obs_prob(&self, a: usize, o: usize) -> f64 {
        self.obs_probs[a * self.num_observations + o]
    }

    #[inline]
    pub fn term(&self, a: usize, o: usize, p: usize) -> f64 {
        self.terms[(a * self.num_observations + o) * self.num_tuples + p]
    }

    /// All previous tuples' terms for `(a, o)`.
    #[inline]
    pub fn terms_row(&self, a: usize, o: usize) -> &[f64] {
        let np = self.num_tuples;
        let r = a * self.num_observations + o;
        &self.terms[r * np..(r + 1) * np]
    }

    /// Local observation of `agent` inside joint observation `o`.
    #[inline]
    pub fn obs_component(&self, o: usize, agent: usize) -> usize {
        self.obs_components[o * self.num_agents + agent]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Exact value of the joint candidate with action `a` and per-agent children.
    pub fn leaf_value(&self, a: usize, children: &[&[u32]]) -> f64 {
        let mut v = self.rewards[a];
        for o in 0..self.num_observations {
            let mut p = 0;
            for (i, ch) in children.iter().enumerate() {
                p += ch[self.obs_component(o, i)] as usize * self.strides[i];
            }
            v += self.term(a, o, p);
        }
        v
    }

    /// Max of `term(a, o, p)` over tuples `p` consistent with the fixed
    /// components in `fixed`.
    pub fn consistent_max(&self, a: usize, o: usize, fixed: &[Option<u32>]) -> f64 {
        let ao = a * self.num_observations + o;
        let known = fixed.iter().filter(|f| f.is_some()).count();
        if known == 0 {
            return self.full_max[ao];
        }
        if known == self.num_agents {
            let p = fixed
                .iter()
                .zip(&self.strides)
                .map(|(f, s)| f.unwrap() as usize * s)
                .sum();
            return self.term(a, o, p);
        }
        if known == 1 {
            let (i, v) = fixed
                .iter()
                .enumerate()
                .find_map(|(i, f)| f.map(|v| (i, v)))
                .unwrap();
            let size = self.single_max[i].len() / (self.num_actions * self.num_observations);
            return self.single_max[i][ao * size + v as usize];
        }
        let row = self.terms_row(a, o);
        let mut best = f64::NEG_INFINITY;
        'tuples: for (p, &v) in row.iter().enumerate() {
            let mut rem = p;
            for (f, &s) in fixed.iter().zip(&self.strides) {
                let part = rem / s;
                rem %= s;
                if let Some(x) = f {
                    if *x as usize != part {
                        continue 'tuples;
                    }
                }
            }
            best = best.max(v);
        }
        best
    }
}
