//! Policy trees, alpha-vectors, evaluation and a Monte-Carlo rollout oracle.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{trajectory_rng, Belief};
use crate::error::{Error, Result};
use crate::model::DecPomdp;

/// A local policy tree. Depth 0 is the empty tree; otherwise the root carries
/// an action and one child of depth `depth - 1` per local observation.
///
/// Children are shared through `Arc`, so trees built by dynamic programming
/// stay linear in size even for long horizons.
#[derive(Debug, Clone)]
pub struct PolicyTree {
    depth: usize,
    action: Option<usize>,
    children: Vec<Arc<PolicyTree>>,
}

impl PolicyTree {
    pub fn empty() -> Arc<Self> {
        Arc::new(PolicyTree {
            depth: 0,
            action: None,
            children: Vec::new(),
        })
    }

    /// Builds a node. All children must have the same depth.
    pub fn node(action: usize, children: Vec<Arc<PolicyTree>>) -> Result<Arc<Self>> {
        let Some(first) = children.first() else {
            return Err(Error::InvalidConfig("a policy node needs children".into()));
        };
        let depth = first.depth;
        if children.iter().any(|c| c.depth != depth) {
            return Err(Error::InvalidConfig("children differ in depth".into()));
        }
        Ok(Arc::new(PolicyTree {
            depth: depth + 1,
            action: Some(action),
            children,
        }))
    }

    /// A tree of the given depth that plays `action` after every history.
    pub fn constant(action: usize, num_observations: usize, depth: usize) -> Arc<Self> {
        let mut tree = Self::empty();
        for _ in 0..depth {
            tree = Arc::new(PolicyTree {
                depth: tree.depth + 1,
                action: Some(action),
                children: vec![tree; num_observations],
            });
        }
        tree
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn action(&self) -> Option<usize> {
        self.action
    }

    pub fn children(&self) -> &[Arc<PolicyTree>] {
        &self.children
    }

    pub fn child(&self, observation: usize) -> &Arc<PolicyTree> {
        &self.children[observation]
    }
}

/// One local tree per agent, all of equal depth.
#[derive(Debug, Clone)]
pub struct JointPolicy {
    trees: Vec<Arc<PolicyTree>>,
}

impl JointPolicy {
    pub fn new(trees: Vec<Arc<PolicyTree>>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidConfig("joint policy without agents".into()));
        }
        if trees.iter().any(|t| t.depth != trees[0].depth) {
            return Err(Error::InvalidConfig("local trees differ in depth".into()));
        }
        Ok(JointPolicy { trees })
    }

    pub fn trees(&self) -> &[Arc<PolicyTree>] {
        &self.trees
    }

    pub fn depth(&self) -> usize {
        self.trees[0].depth
    }

    /// Actions agent `agent` takes along its own observation history.
    pub fn local_actions(&self, agent: usize, observations: &[usize]) -> Vec<usize> {
        let mut node = &self.trees[agent];
        let mut out = Vec::new();
        if let Some(a) = node.action {
            out.push(a);
        }
        for &o in observations {
            if node.depth <= 1 {
                break;
            }
            node = node.child(o);
            out.push(node.action.expect("non-empty tree has an action"));
        }
        out
    }

    fn check_model(&self, model: &DecPomdp) -> Result<()> {
        if self.trees.len() != model.num_agents() {
            return Err(Error::PolicyModelMismatch(format!(
                "policy has {} agents, model has {}",
                self.trees.len(),
                model.num_agents()
            )));
        }
        Ok(())
    }
}

/// State-conditional values of a joint policy.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector(pub Vec<f64>);

impl AlphaVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// V_q(b) = b . alpha_q.
pub fn value_at(alpha: &AlphaVector, b: &Belief) -> f64 {
    b.dot(&alpha.0)
}

#[derive(Default)]
struct AgentPool {
    by_key: HashMap<(Option<usize>, Vec<u32>), u32>,
    by_ptr: HashMap<usize, u32>,
    // Canonical representative per id, in post-order.
    trees: Vec<Arc<PolicyTree>>,
    // Keeps duplicate trees alive so their pointer keys stay valid.
    aliases: Vec<Arc<PolicyTree>>,
}

impl AgentPool {
    fn intern(&mut self, tree: &Arc<PolicyTree>) -> u32 {
        let ptr = Arc::as_ptr(tree) as usize;
        if let Some(&id) = self.by_ptr.get(&ptr) {
            return id;
        }
        let children: Vec<u32> = tree.children.iter().map(|c| self.intern(c)).collect();
        let key = (tree.action, children);
        let id = match self.by_key.get(&key) {
            Some(&id) => {
                self.aliases.push(tree.clone());
                id
            }
            None => {
                let id = self.trees.len() as u32;
                self.by_key.insert(key, id);
                self.trees.push(tree.clone());
                id
            }
        };
        self.by_ptr.insert(ptr, id);
        id
    }
}

/// Interns local trees per agent and memoizes alpha-vectors per joint id tuple.
#[derive(Default)]
pub struct TreePool {
    agents: Vec<AgentPool>,
    memo: HashMap<Vec<u32>, Arc<AlphaVector>>,
}

impl TreePool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stable id of a local tree; structurally equal trees share an id.
    pub fn intern(&mut self, agent: usize, tree: &Arc<PolicyTree>) -> u32 {
        if self.agents.len() <= agent {
            self.agents.resize_with(agent + 1, AgentPool::default);
        }
        self.agents[agent].intern(tree)
    }

    pub fn tree(&self, agent: usize, id: u32) -> &Arc<PolicyTree> {
        &self.agents[agent].trees[id as usize]
    }

    pub fn clear_memo(&mut self) {
        self.memo.clear();
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    fn alpha_of(&mut self, model: &DecPomdp, ids: &[u32]) -> Arc<AlphaVector> {
        if let Some(a) = self.memo.get(ids) {
            return a.clone();
        }
        let ns = model.num_states();
        let nodes: Vec<Arc<PolicyTree>> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| self.tree(i, id).clone())
            .collect();
        let alpha = if nodes[0].depth == 0 {
            AlphaVector(vec![0.0; ns])
        } else {
            let actions: Vec<usize> = nodes.iter().map(|t| t.action.unwrap()).collect();
            let a = model.actions().encode(&actions);
            let no = model.num_joint_observations();
            let mut child_alphas = Vec::with_capacity(no);
            for o in 0..no {
                let comps = model.observations().decode(o);
                let child_ids: Vec<u32> = comps
                    .iter()
                    .enumerate()
                    .map(|(i, &oi)| {
                        let child = nodes[i].child(oi).clone();
                        self.intern(i, &child)
                    })
                    .collect();
                child_alphas.push(self.alpha_of(model, &child_ids));
            }
            let w: Vec<f64> = (0..ns)
                .map(|s2| {
                    model
                        .observation_row(a, s2)
                        .iter()
                        .zip(&child_alphas)
                        .filter(|(p, _)| **p > 0.0)
                        .map(|(p, c)| p * c.0[s2])
                        .sum()
                })
                .collect();
            AlphaVector(
                (0..ns)
                    .map(|s| {
                        model.reward(s, a)
                            + model
                                .successors(s, a)
                                .iter()
                                .map(|&(s2, p)| p * w[s2])
                                .sum::<f64>()
                    })
                    .collect(),
            )
        };
        let alpha = Arc::new(alpha);
        self.memo.insert(ids.to_vec(), alpha.clone());
        alpha
    }
}

/// Alpha-vector of a joint policy by the value recursion, memoized in `pool`.
pub fn evaluate(model: &DecPomdp, q: &JointPolicy, pool: &mut TreePool) -> Result<AlphaVector> {
    q.check_model(model)?;
    validate_against(model, q)?;
    let ids: Vec<u32> = q
        .trees
        .iter()
        .enumerate()
        .map(|(i, t)| pool.intern(i, t))
        .collect();
    Ok(pool.alpha_of(model, &ids).as_ref().clone())
}

fn validate_against(model: &DecPomdp, q: &JointPolicy) -> Result<()> {
    fn walk(
        t: &Arc<PolicyTree>,
        na: usize,
        no: usize,
        seen: &mut std::collections::HashSet<usize>,
    ) -> Result<()> {
        if !seen.insert(Arc::as_ptr(t) as usize) {
            return Ok(());
        }
        if t.depth == 0 {
            return Ok(());
        }
        let a = t.action.unwrap_or(usize::MAX);
        if a >= na || t.children.len() != no {
            return Err(Error::PolicyModelMismatch(
                "tree action or branching does not fit the model".into(),
            ));
        }
        t.children.iter().try_for_each(|c| walk(c, na, no, seen))
    }
    for (i, t) in q.trees.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        walk(
            t,
            model.num_actions(i),
            model.num_observations(i),
            &mut seen,
        )?;
    }
    Ok(())
}

fn sample_index(weights: impl Iterator<Item = (usize, f64)>, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Simulates `episodes` executions of `q` from `b0`. Each agent descends its
/// own tree using only its own observation component.
///
/// Returns the sample mean and standard error of the total reward.
pub fn rollout(
    model: &DecPomdp,
    q: &JointPolicy,
    b0: &Belief,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    q.check_model(model)?;
    validate_against(model, q)?;
    if episodes == 0 {
        return Err(Error::InvalidConfig(
            "rollout needs at least one episode".into(),
        ));
    }
    let n = model.num_agents();
    // Welford accumulation; the naive sum of squares cancels badly.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut actions = vec![0; n];
    for ep in 0..episodes {
        let mut rng = trajectory_rng(seed, ep as u64);
        let mut s = sample_index(b0.probs().iter().copied().enumerate(), &mut rng);
        let mut nodes: Vec<&Arc<PolicyTree>> = q.trees.iter().collect();
        let mut total = 0.0;
        while nodes[0].depth > 0 {
            for (i, t) in nodes.iter().enumerate() {
                actions[i] = t.action.unwrap();
            }
            let a = model.actions().encode(&actions);
            total += model.reward(s, a);
            let s2 = sample_index(model.successors(s, a).iter().copied(), &mut rng);
            let o = sample_index(
                model.observation_row(a, s2).iter().copied().enumerate(),
                &mut rng,
            );
            let comps = model.observations().decode(o);
            for (i, node) in nodes.iter_mut().enumerate() {
                *node = node.child(comps[i]);
            }
            s = s2;
        }
        let delta = total - mean;
        mean += delta / (ep + 1) as f64;
        m2 += delta * (total - mean);
    }
    let k = episodes as f64;
    let var = if episodes > 1 { m2 / (k - 1.0) } else { 0.0 };
    Ok((mean, (var / k).sqrt()))
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyDocument {
    agents: Vec<AgentDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentDocument {
    agent: String,
    root: usize,
    nodes: Vec<NodeDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDocument {
    action: Option<String>,
    children: Vec<ChildLink>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChildLink {
    observation: String,
    node: usize,
}

/// Serializes a joint policy as JSON. Each agent's tree is written as a DAG in
/// post-order, so shared subtrees appear once and child ids precede parents.
pub fn policy_to_json(model: &DecPomdp, q: &JointPolicy) -> Result<String> {
    q.check_model(model)?;
    validate_against(model, q)?;
    let mut agents = Vec::new();
    for (i, tree) in q.trees.iter().enumerate() {
        let agent = &model.agents()[i];
        let mut pool = AgentPool::default();
        let root = pool.intern(tree) as usize;
        let mut nodes = Vec::with_capacity(pool.trees.len());
        let mut ids = HashMap::new();
        for t in &pool.trees {
            ids.insert(Arc::as_ptr(t) as usize, nodes.len());
            let children = t
                .children
                .iter()
                .enumerate()
                .map(|(o, c)| ChildLink {
                    observation: agent.observations[o].clone(),
                    node: pool.by_ptr[&(Arc::as_ptr(c) as usize)] as usize,
                })
                .collect();
            nodes.push(NodeDocument {
                action: t.action.map(|a| agent.actions[a].clone()),
                children,
            });
        }
        agents.push(AgentDocument {
            agent: agent.name.clone(),
            root,
            nodes,
        });
    }
    serde_json::to_string_pretty(&PolicyDocument { agents })
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Reads a joint policy written by [`policy_to_json`] and checks it against the model.
pub fn policy_from_json(model: &DecPomdp, text: &str) -> Result<JointPolicy> {
    let mismatch = |m: String| Error::PolicyModelMismatch(m);
    let doc: PolicyDocument =
        serde_json::from_str(text).map_err(|e| mismatch(format!("malformed policy: {e}")))?;
    if doc.agents.len() != model.num_agents() {
        return Err(mismatch(format!(
            "policy has {} agents, model has {}",
            doc.agents.len(),
            model.num_agents()
        )));
    }
    let mut trees = Vec::new();
    for (i, ad) in doc.agents.iter().enumerate() {
        let agent = &model.agents()[i];
        let mut built: Vec<Arc<PolicyTree>> = Vec::with_capacity(ad.nodes.len());
        for (idx, nd) in ad.nodes.iter().enumerate() {
            let tree = match &nd.action {
                None => {
                    if !nd.children.is_empty() {
                        return Err(mismatch(format!("node {idx} has children but no action")));
                    }
                    PolicyTree::empty()
                }
                Some(name) => {
                    let a = agent
                        .actions
                        .iter()
                        .position(|x| x == name)
                        .ok_or_else(|| mismatch(format!("unknown action `{name}`")))?;
                    let mut children: Vec<Option<Arc<PolicyTree>>> =
                        vec![None; agent.observations.len()];
                    for link in &nd.children {
                        let o = agent
                            .observations
                            .iter()
                            .position(|x| *x == link.observation)
                            .ok_or_else(|| {
                                mismatch(format!("unknown observation `{}`", link.observation))
                            })?;
                        if link.node >= idx {
                            return Err(mismatch(format!(
                                "node {idx} refers forward to node {}",
                                link.node
                            )));
                        }
                        children[o] = Some(built[link.node].clone());
                    }
                    let children = children
                        .into_iter()
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| mismatch(format!("node {idx} misses an observation")))?;
                    PolicyTree::node(a, children).map_err(|e| mismatch(e.to_string()))?
                }
            };
            built.push(tree);
        }
        let root = built
            .get(ad.root)
            .ok_or_else(|| mismatch(format!("root {} out of range", ad.root)))?;
        trees.push(root.clone());
    }
    JointPolicy::new(trees).map_err(|e| mismatch(e.to_string()))
}
