//! Branch-and-bound search for the best decentralisable joint tree at a belief.
//!
//! A node fixes some agents' root actions and some per-agent child
//! assignments. Because assignments are made per local observation, every
//! completion is a tuple of local trees by construction. The bound replaces
//! each joint observation's contribution by its best value over previous
//! tuples consistent with what is already fixed.
//!
//! The search runs in two phases. The first (depth-first or best-first) finds
//! the optimal value. The second walks candidates in increasing local-id order
//! and returns the first one within 1e-9 of that value, so both strategies and
//! the exhaustive enumerations elsewhere agree on the same representative.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::model::DecPomdp;
use crate::stage::{CandidateSpace, JointAlphas, LocalId, PointValues, StageSets};

pub const DEFAULT_NODE_LIMIT: u64 = 100_000_000;
const PRUNE_EPS: f64 = 1e-12;
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStrategy {
    DepthFirst,
    BestFirst,
}

/// Candidates a search must not return: whole joint trees, or any joint tree
/// using one of the listed local trees.
#[derive(Debug, Clone, Default)]
pub struct Exclusions {
    pub joint: HashSet<Vec<LocalId>>,
    pub local: Vec<HashSet<LocalId>>,
}

impl Exclusions {
    pub fn new(num_agents: usize) -> Self {
        Exclusions {
            joint: HashSet::new(),
            local: vec![HashSet::new(); num_agents],
        }
    }

    pub fn excludes(&self, ids: &[LocalId]) -> bool {
        self.joint.contains(ids)
            || ids
                .iter()
                .zip(&self.local)
                .any(|(id, set)| set.contains(id))
    }
}

/// A set of joint candidates: per-agent root actions and child assignments
/// that are fixed so far, with the bound of the set.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub actions: Vec<Option<usize>>,
    pub assignments: Vec<Vec<Option<u32>>>,
    pub bound: f64,
}

impl SearchNode {
    pub fn root(space: &CandidateSpace) -> Self {
        let n = space.num_agents();
        SearchNode {
            actions: vec![None; n],
            assignments: (0..n)
                .map(|i| vec![None; space.num_observations(i)])
                .collect(),
            bound: f64::INFINITY,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.actions.iter().all(Option::is_some)
            && self
                .assignments
                .iter()
                .all(|a| a.iter().all(Option::is_some))
    }

    fn children(&self, agent: usize) -> Vec<u32> {
        self.assignments[agent].iter().map(|c| c.unwrap()).collect()
    }

    /// Local ids of a complete node.
    pub fn local_ids(&self, space: &CandidateSpace) -> Vec<LocalId> {
        (0..self.actions.len())
            .map(|i| space.encode(i, self.actions[i].unwrap(), &self.children(i)))
            .collect()
    }
}

/// Bound of `node` under joint action `a`, whose components must agree with
/// the node's fixed actions.
fn bound_for_action(model: &DecPomdp, pv: &PointValues, node: &SearchNode, a: usize) -> f64 {
    let n = node.actions.len();
    let mut fixed = vec![None; n];
    let mut f = pv.rewards[a];
    for o in 0..pv.num_observations {
        let comps = model.observations().decode(o);
        for i in 0..n {
            fixed[i] = node.assignments[i][comps[i]];
        }
        f += pv.consistent_max(a, o, &fixed);
    }
    f
}

fn consistent_actions<'a>(
    model: &'a DecPomdp,
    actions: &'a [Option<usize>],
) -> impl Iterator<Item = usize> + 'a {
    (0..model.num_joint_actions()).filter(move |&a| {
        model
            .actions()
            .decode(a)
            .iter()
            .zip(actions)
            .all(|(c, f)| f.is_none_or(|x| x == *c))
    })
}

/// The relaxation bound f of a node: the exact value for complete nodes, and
/// the maximum over consistent joint actions when root actions are open.
pub fn node_bound(model: &DecPomdp, pv: &PointValues, node: &SearchNode) -> f64 {
    consistent_actions(model, &node.actions)
        .map(|a| bound_for_action(model, pv, node, a))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Convenience form of [`node_bound`] that projects `b` first.
pub fn node_bound_at(
    model: &DecPomdp,
    node: &SearchNode,
    b: &Belief,
    prev_alphas: &JointAlphas,
) -> f64 {
    node_bound(model, &PointValues::new(model, b, prev_alphas), node)
}

/// A selected joint tree.
#[derive(Debug, Clone, PartialEq)]
pub struct JointChoice {
    pub action: usize,
    pub locals: Vec<LocalId>,
    pub value: f64,
}

struct HeapItem {
    bound: f64,
    seq: u64,
    node: SearchNode,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Observer invoked on every expanded node.
pub type NodeObserver<'o> = &'o mut dyn FnMut(&SearchNode);

struct Search<'a, 'o> {
    model: &'a DecPomdp,
    space: &'a CandidateSpace,
    pv: &'a PointValues,
    excl: &'a Exclusions,
    node_limit: u64,
    expanded: u64,
    // Per joint action, (agent, local observation) pairs by decreasing probability.
    orders: Vec<Vec<(usize, usize)>>,
    observer: Option<NodeObserver<'o>>,
}

impl<'a, 'o> Search<'a, 'o> {
    fn new(
        model: &'a DecPomdp,
        space: &'a CandidateSpace,
        pv: &'a PointValues,
        excl: &'a Exclusions,
        node_limit: u64,
        observer: Option<NodeObserver<'o>>,
    ) -> Self {
        let n = model.num_agents();
        let orders = (0..model.num_joint_actions())
            .map(|a| {
                let mut vars: Vec<(usize, usize, f64)> = Vec::new();
                for i in 0..n {
                    for oi in 0..model.num_observations(i) {
                        let p: f64 = (0..pv.num_observations)
                            .filter(|&o| pv.obs_component(o, i) == oi)
                            .map(|o| pv.obs_prob(a, o))
                            .sum();
                        vars.push((i, oi, p));
                    }
                }
                vars.sort_by(|x, y| y.2.total_cmp(&x.2));
                vars.into_iter().map(|(i, o, _)| (i, o)).collect()
            })
            .collect();
        Search {
            model,
            space,
            pv,
            excl,
            node_limit,
            expanded: 0,
            orders,
            observer,
        }
    }

    fn expand(&mut self, node: &SearchNode) -> Result<()> {
        self.expanded += 1;
        if self.expanded > self.node_limit {
            return Err(Error::NodeLimitExceeded(self.node_limit));
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(node);
        }
        Ok(())
    }

    fn excluded(&self, node: &SearchNode) -> bool {
        self.excl.excludes(&node.local_ids(self.space))
    }

    /// Children in the value-finding phase: the joint action first, then
    /// assignments in decreasing observation probability.
    fn children_by_bound(&self, node: &SearchNode) -> Vec<SearchNode> {
        let mut out = Vec::new();
        if node.actions.iter().any(Option::is_none) {
            for a in 0..self.model.num_joint_actions() {
                let mut child = node.clone();
                for (i, &c) in self.model.actions().decode(a).iter().enumerate() {
                    child.actions[i] = Some(c);
                }
                child.bound = bound_for_action(self.model, self.pv, &child, a);
                out.push(child);
            }
        } else {
            let actions: Vec<usize> = node.actions.iter().map(|x| x.unwrap()).collect();
            let a = self.model.actions().encode(&actions);
            let Some(&(i, oi)) = self.orders[a]
                .iter()
                .find(|&&(i, oi)| node.assignments[i][oi].is_none())
            else {
                return out;
            };
            for v in 0..self.space.prev_size(i) as u32 {
                let mut child = node.clone();
                child.assignments[i][oi] = Some(v);
                child.bound = bound_for_action(self.model, self.pv, &child, a);
                out.push(child);
            }
        }
        // Stable sort keeps lower indices first among equal bounds.
        out.sort_by(|x, y| y.bound.total_cmp(&x.bound));
        out
    }

    fn dfs(&mut self, node: &SearchNode, best: &mut f64) -> Result<()> {
        self.expand(node)?;
        if node.is_complete() {
            if !self.excluded(node) && node.bound > *best {
                *best = node.bound;
            }
            return Ok(());
        }
        for child in self.children_by_bound(node) {
            if child.bound <= *best + PRUNE_EPS {
                continue;
            }
            self.dfs(&child, best)?;
        }
        Ok(())
    }

    fn befs(&mut self, root: SearchNode) -> Result<f64> {
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(HeapItem {
            bound: root.bound,
            seq,
            node: root,
        });
        while let Some(HeapItem { node, .. }) = heap.pop() {
            if node.is_complete() {
                if self.excluded(&node) {
                    continue;
                }
                return Ok(node.bound);
            }
            self.expand(&node)?;
            for child in self.children_by_bound(&node) {
                seq += 1;
                heap.push(HeapItem {
                    bound: child.bound,
                    seq,
                    node: child,
                });
            }
        }
        Ok(f64::NEG_INFINITY)
    }

    /// Next open variable in local-id order: agent 0's action, then its
    /// children by observation, then agent 1, and so on.
    fn lex_children(&self, node: &SearchNode) -> Vec<SearchNode> {
        for i in 0..node.actions.len() {
            if node.actions[i].is_none() {
                return (0..self.space.num_actions(i))
                    .map(|ai| {
                        let mut child = node.clone();
                        child.actions[i] = Some(ai);
                        child.bound = node_bound(self.model, self.pv, &child);
                        child
                    })
                    .collect();
            }
            if let Some(oi) = node.assignments[i].iter().position(Option::is_none) {
                return (0..self.space.prev_size(i) as u32)
                    .map(|v| {
                        let mut child = node.clone();
                        child.assignments[i][oi] = Some(v);
                        child.bound = node_bound(self.model, self.pv, &child);
                        child
                    })
                    .collect();
            }
        }
        Vec::new()
    }

    fn lex_first(&mut self, node: &SearchNode, threshold: f64) -> Result<Option<SearchNode>> {
        self.expand(node)?;
        if node.is_complete() {
            return Ok((!self.excluded(node)).then(|| node.clone()));
        }
        for child in self.lex_children(node) {
            if child.bound < threshold {
                continue;
            }
            if let Some(found) = self.lex_first(&child, threshold)? {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }

    fn run(&mut self, strategy: SearchStrategy) -> Result<JointChoice> {
        let mut root = SearchNode::root(self.space);
        root.bound = node_bound(self.model, self.pv, &root);
        let best = match strategy {
            SearchStrategy::DepthFirst => {
                let mut best = f64::NEG_INFINITY;
                self.dfs(&root, &mut best)?;
                best
            }
            SearchStrategy::BestFirst => self.befs(root.clone())?,
        };
        if best == f64::NEG_INFINITY {
            return Err(Error::SearchSpaceExhausted);
        }
        let leaf = self
            .lex_first(&root, best - TIE_EPS)?
            .ok_or(Error::SearchSpaceExhausted)?;
        let actions: Vec<usize> = leaf.actions.iter().map(|x| x.unwrap()).collect();
        Ok(JointChoice {
            action: self.model.actions().encode(&actions),
            locals: leaf.local_ids(self.space),
            value: leaf.bound,
        })
    }
}

/// The best joint candidate at the projected belief `pv` outside `excl`.
pub fn best_joint(
    model: &DecPomdp,
    space: &CandidateSpace,
    pv: &PointValues,
    excl: &Exclusions,
    strategy: SearchStrategy,
    node_limit: u64,
) -> Result<JointChoice> {
    Search::new(model, space, pv, excl, node_limit, None).run(strategy)
}

/// [`best_joint`] that reports every expanded node to `observer`.
pub fn best_joint_observed(
    model: &DecPomdp,
    space: &CandidateSpace,
    pv: &PointValues,
    excl: &Exclusions,
    strategy: SearchStrategy,
    node_limit: u64,
    observer: NodeObserver<'_>,
) -> Result<JointChoice> {
    Search::new(model, space, pv, excl, node_limit, Some(observer)).run(strategy)
}

/// PBIP stage operator: one best joint tree per point, each distinct from
/// those already selected, with the local trees of all selections kept.
///
/// Selection stops early once every joint tree has been selected.
pub fn pbip_operator(
    model: &DecPomdp,
    prev: &StageSets,
    prev_alphas: &JointAlphas,
    points: &[Belief],
    strategy: SearchStrategy,
    node_limit: u64,
) -> Result<StageSets> {
    let space = CandidateSpace::new(model, prev)?;
    let n = model.num_agents();
    let mut excl = Exclusions::new(n);
    let mut locals = vec![Vec::new(); n];
    for b in points {
        let pv = PointValues::new(model, b, prev_alphas);
        match best_joint(model, &space, &pv, &excl, strategy, node_limit) {
            Ok(choice) => {
                for (i, &id) in choice.locals.iter().enumerate() {
                    locals[i].push(id);
                }
                excl.joint.insert(choice.locals);
            }
            Err(Error::SearchSpaceExhausted) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(space.stage_sets(prev.depth + 1, locals))
}
