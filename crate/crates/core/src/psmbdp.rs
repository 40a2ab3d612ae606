//! Greedy selection of bounded tree sets that maximize the summed best joint
//! value over a sample of beliefs.
//!
//! The stage starts from the best joint tree at the mean belief. It then adds,
//! one agent at a time, the candidate local tree with the largest criterion
//! value, as long as that value beats the current score by more than 1e-9.

use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::bnb::{best_joint, Exclusions, SearchStrategy};
use crate::error::{Error, Result};
use crate::model::DecPomdp;
use crate::stage::{CandidateSpace, JointAlphas, LocalId, PointValues, StageSets, TupleIndexer};

const GAIN_EPS: f64 = 1e-9;
const TIE_EPS: f64 = 1e-9;

/// How the best candidate of an agent is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMode {
    /// Scan every tree of the materialized backup.
    Exhaustive,
    /// Best-first branch-and-bound over the implicit backup.
    BestFirst,
}

/// Which agent grows next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentOrder {
    /// Agents take turns starting from agent 0.
    RoundRobin,
    /// Every agent proposes its best candidate and the largest score wins.
    GreedyBest,
}

impl std::str::FromStr for AgentOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round-robin" => Ok(AgentOrder::RoundRobin),
            "greedy-best" => Ok(AgentOrder::GreedyBest),
            _ => Err(Error::InvalidConfig(format!("unknown agent order `{s}`"))),
        }
    }
}

/// Decoded candidate: root action and child positions.
#[derive(Debug, Clone)]
struct Decoded {
    action: usize,
    children: Vec<u32>,
}

/// Current selection with the per-point best joint value.
pub struct SelectionState<'a> {
    model: &'a DecPomdp,
    space: &'a CandidateSpace,
    points: &'a [PointValues],
    selected: Vec<Vec<LocalId>>,
    decoded: Vec<Vec<Decoded>>,
    best_value_at: Vec<f64>,
    score: f64,
}

impl<'a> SelectionState<'a> {
    /// Starts from one local tree per agent.
    pub fn new(
        model: &'a DecPomdp,
        space: &'a CandidateSpace,
        points: &'a [PointValues],
        initial: &[LocalId],
    ) -> Self {
        let n = model.num_agents();
        let mut state = SelectionState {
            model,
            space,
            points,
            selected: vec![Vec::new(); n],
            decoded: vec![Vec::new(); n],
            best_value_at: vec![f64::NEG_INFINITY; points.len()],
            score: f64::NEG_INFINITY,
        };
        for (i, &id) in initial.iter().enumerate() {
            state.push(i, id);
        }
        state.best_value_at = points
            .iter()
            .map(|pv| state.joint_value(pv, initial))
            .collect();
        state.score = state.best_value_at.iter().sum();
        state
    }

    fn push(&mut self, agent: usize, id: LocalId) {
        self.selected[agent].push(id);
        let t = self.space.decode(agent, id);
        self.decoded[agent].push(Decoded {
            action: t.action.unwrap(),
            children: t.children,
        });
    }

    fn joint_value(&self, pv: &PointValues, ids: &[LocalId]) -> f64 {
        let n = ids.len();
        let trees: Vec<_> = (0..n).map(|i| self.space.decode(i, ids[i])).collect();
        let actions: Vec<usize> = trees.iter().map(|t| t.action.unwrap()).collect();
        let children: Vec<&[u32]> = trees.iter().map(|t| t.children.as_slice()).collect();
        pv.leaf_value(self.model.actions().encode(&actions), &children)
    }

    pub fn selected(&self) -> &[Vec<LocalId>] {
        &self.selected
    }

    pub fn best_value_at(&self) -> &[f64] {
        &self.best_value_at
    }

    /// Sum over points of the best joint value among selected tuples.
    pub fn score(&self) -> f64 {
        self.score
    }

    /// Best value at each point over tuples using `candidate` for `agent` and
    /// selected trees for everyone else.
    fn candidate_values(&self, agent: usize, candidate: LocalId) -> Vec<f64> {
        let n = self.selected.len();
        let others = TupleIndexer::new(
            (0..n)
                .map(|j| {
                    if j == agent {
                        1
                    } else {
                        self.selected[j].len()
                    }
                })
                .collect(),
        );
        let cand = self.space.decode(agent, candidate);
        let mut parts = vec![0; n];
        let mut actions = vec![0; n];
        self.points
            .iter()
            .map(|pv| {
                let mut best = f64::NEG_INFINITY;
                for tau in 0..others.count {
                    others.decode_into(tau, &mut parts);
                    let mut children: Vec<&[u32]> = Vec::with_capacity(n);
                    for j in 0..n {
                        if j == agent {
                            actions[j] = cand.action.unwrap();
                            children.push(&cand.children);
                        } else {
                            let d = &self.decoded[j][parts[j]];
                            actions[j] = d.action;
                            children.push(&d.children);
                        }
                    }
                    let v = pv.leaf_value(self.model.actions().encode(&actions), &children);
                    best = best.max(v);
                }
                best
            })
            .collect()
    }

    /// Criterion value after adding `candidate` to `agent`'s set.
    pub fn marginal_gain(&self, agent: usize, candidate: LocalId) -> f64 {
        self.candidate_values(agent, candidate)
            .iter()
            .zip(&self.best_value_at)
            .map(|(v, c)| v.max(*c))
            .sum()
    }

    /// Adds a candidate and updates the per-point cache.
    pub fn add(&mut self, agent: usize, candidate: LocalId) {
        if self.selected[agent].contains(&candidate) {
            return;
        }
        let values = self.candidate_values(agent, candidate);
        for (c, v) in self.best_value_at.iter_mut().zip(values) {
            *c = c.max(v);
        }
        self.push(agent, candidate);
        self.score = self.best_value_at.iter().sum();
    }
}

/// Per-agent lookup tables for scoring candidates against the current selection.
///
/// For point `b`, co-player tuple `tau`, own action `ai`, own observation `oi`
/// and child position `v`, `h` holds the contribution of every joint
/// observation with component `oi`; `reward` holds R(b, a).
struct AgentTables {
    num_tuples: usize,
    num_actions: usize,
    num_obs: usize,
    prev: usize,
    reward: Vec<f64>,
    h: Vec<f64>,
    hmax: Vec<f64>,
}

impl AgentTables {
    fn build(state: &SelectionState, agent: usize) -> Self {
        let model = state.model;
        let space = state.space;
        let n = state.selected.len();
        let others = TupleIndexer::new(
            (0..n)
                .map(|j| {
                    if j == agent {
                        1
                    } else {
                        state.selected[j].len()
                    }
                })
                .collect(),
        );
        let na = space.num_actions(agent);
        let k = space.num_observations(agent);
        let m = space.prev_size(agent);
        let nb = state.points.len();
        let nt = others.count;
        let no = model.num_joint_observations();
        let mut reward = vec![0.0; nb * nt * na];
        let mut h = vec![0.0; nb * nt * na * k * m];
        let mut hmax = vec![f64::NEG_INFINITY; nb * nt * na * k];
        let mut parts = vec![0; n];
        let mut comps = vec![0; n];
        let strides = state
            .points
            .first()
            .map(|p| p.strides().to_vec())
            .unwrap_or_default();
        for tau in 0..nt {
            others.decode_into(tau, &mut parts);
            let base: Vec<usize> = (0..no)
                .map(|o| {
                    let oc = model.observations().decode(o);
                    (0..n)
                        .filter(|&j| j != agent)
                        .map(|j| state.decoded[j][parts[j]].children[oc[j]] as usize * strides[j])
                        .sum()
                })
                .collect();
            let joint: Vec<usize> = (0..na)
                .map(|ai| {
                    for j in 0..n {
                        comps[j] = if j == agent {
                            ai
                        } else {
                            state.decoded[j][parts[j]].action
                        };
                    }
                    model.actions().encode(&comps)
                })
                .collect();
            for (b, pv) in state.points.iter().enumerate() {
                for ai in 0..na {
                    let a = joint[ai];
                    let cell = (b * nt + tau) * na + ai;
                    reward[cell] = pv.rewards[a];
                    for (o, &bo) in base.iter().enumerate() {
                        let oi = pv.obs_component(o, agent);
                        let row = pv.terms_row(a, o);
                        let dst = &mut h[(cell * k + oi) * m..(cell * k + oi + 1) * m];
                        for (v, d) in dst.iter_mut().enumerate() {
                            *d += row[bo + v * strides[agent]];
                        }
                    }
                    for oi in 0..k {
                        let row = &h[(cell * k + oi) * m..(cell * k + oi + 1) * m];
                        hmax[cell * k + oi] = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    }
                }
            }
        }
        AgentTables {
            num_tuples: nt,
            num_actions: na,
            num_obs: k,
            prev: m,
            reward,
            h,
            hmax,
        }
    }

    /// Upper bound (exact when fully assigned) of the criterion for the
    /// candidates matching `action` and `assign`.
    fn bound(&self, cache: &[f64], action: Option<usize>, assign: &[Option<u32>]) -> f64 {
        let nt = self.num_tuples;
        let na = self.num_actions;
        let k = self.num_obs;
        let m = self.prev;
        let actions = match action {
            Some(a) => a..a + 1,
            None => 0..na,
        };
        let mut total = 0.0;
        for (b, &c) in cache.iter().enumerate() {
            let mut best = c;
            for tau in 0..nt {
                for ai in actions.clone() {
                    let cell = (b * nt + tau) * na + ai;
                    let mut v = self.reward[cell];
                    for (oi, slot) in assign.iter().enumerate().take(k) {
                        v += match slot {
                            Some(x) => self.h[(cell * k + oi) * m + *x as usize],
                            None => self.hmax[cell * k + oi],
                        };
                    }
                    if v > best {
                        best = v;
                    }
                }
            }
            total += best;
        }
        total
    }
}

#[derive(Clone)]
struct LocalNode {
    bound: f64,
    seq: u64,
    action: Option<usize>,
    assign: Vec<Option<u32>>,
}

impl PartialEq for LocalNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for LocalNode {}
impl PartialOrd for LocalNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for LocalNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.seq.cmp(&other.seq))
    }
}

struct LocalSearch<'t> {
    tables: &'t AgentTables,
    cache: &'t [f64],
    space: &'t CandidateSpace,
    agent: usize,
    taken: HashSet<LocalId>,
    node_limit: u64,
    expanded: u64,
}

impl LocalSearch<'_> {
    fn id_of(&self, node: &LocalNode) -> LocalId {
        let children: Vec<u32> = node.assign.iter().map(|x| x.unwrap()).collect();
        self.space
            .encode(self.agent, node.action.unwrap(), &children)
    }

    fn complete(node: &LocalNode) -> bool {
        node.action.is_some() && node.assign.iter().all(Option::is_some)
    }

    fn tick(&mut self) -> Result<()> {
        self.expanded += 1;
        if self.expanded > self.node_limit {
            return Err(Error::NodeLimitExceeded(self.node_limit));
        }
        Ok(())
    }

    /// Children in local-id order.
    fn children(&self, node: &LocalNode) -> Vec<LocalNode> {
        let make = |action: Option<usize>, assign: Vec<Option<u32>>| {
            let bound = self.tables.bound(self.cache, action, &assign);
            LocalNode {
                bound,
                seq: 0,
                action,
                assign,
            }
        };
        if node.action.is_none() {
            return (0..self.tables.num_actions)
                .map(|a| make(Some(a), node.assign.clone()))
                .collect();
        }
        match node.assign.iter().position(Option::is_none) {
            Some(oi) => (0..self.tables.prev as u32)
                .map(|v| {
                    let mut assign = node.assign.clone();
                    assign[oi] = Some(v);
                    make(node.action, assign)
                })
                .collect(),
            None => Vec::new(),
        }
    }

    fn root(&self) -> LocalNode {
        let assign = vec![None; self.tables.num_obs];
        LocalNode {
            bound: self.tables.bound(self.cache, None, &assign),
            seq: 0,
            action: None,
            assign,
        }
    }

    fn best_value(&mut self) -> Result<Option<f64>> {
        let mut heap = BinaryHeap::new();
        heap.push(self.root());
        let mut seq = 0;
        while let Some(node) = heap.pop() {
            if Self::complete(&node) {
                if self.taken.contains(&self.id_of(&node)) {
                    continue;
                }
                return Ok(Some(node.bound));
            }
            self.tick()?;
            for mut child in self.children(&node) {
                seq += 1;
                child.seq = seq;
                heap.push(child);
            }
        }
        Ok(None)
    }

    fn lex_first(&mut self, node: &LocalNode, threshold: f64) -> Result<Option<(LocalId, f64)>> {
        self.tick()?;
        if Self::complete(node) {
            let id = self.id_of(node);
            return Ok((!self.taken.contains(&id)).then_some((id, node.bound)));
        }
        for child in self.children(node) {
            if child.bound < threshold {
                continue;
            }
            if let Some(found) = self.lex_first(&child, threshold)? {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }
}

/// The candidate of `agent` maximizing the criterion, skipping trees already
/// selected. Ties go to the lowest local id within 1e-9.
fn best_candidate(
    state: &SelectionState,
    agent: usize,
    mode: SelectionMode,
    node_limit: u64,
) -> Result<Option<(LocalId, f64)>> {
    let tables = AgentTables::build(state, agent);
    let taken: HashSet<LocalId> = state.selected[agent].iter().copied().collect();
    match mode {
        SelectionMode::Exhaustive => {
            let count = state.space.count(agent);
            let k = state.space.num_observations(agent);
            let mut children = vec![0u32; k];
            let mut assign = vec![None; k];
            let mut scores = Vec::with_capacity(count as usize);
            for id in 0..count {
                if taken.contains(&id) {
                    scores.push(f64::NEG_INFINITY);
                    continue;
                }
                state.space.children_into(agent, id, &mut children);
                for (slot, &c) in assign.iter_mut().zip(&children) {
                    *slot = Some(c);
                }
                let a = state.space.action_of(agent, id);
                scores.push(tables.bound(&state.best_value_at, Some(a), &assign));
            }
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best == f64::NEG_INFINITY {
                return Ok(None);
            }
            let id = scores.iter().position(|&s| s >= best - TIE_EPS).unwrap();
            Ok(Some((id as LocalId, scores[id])))
        }
        SelectionMode::BestFirst => {
            let mut search = LocalSearch {
                tables: &tables,
                cache: &state.best_value_at,
                space: state.space,
                agent,
                taken,
                node_limit,
                expanded: 0,
            };
            let Some(best) = search.best_value()? else {
                return Ok(None);
            };
            let root = search.root();
            search.lex_first(&root, best - TIE_EPS)
        }
    }
}

/// Result of one PSMBDP stage.
#[derive(Debug, Clone)]
pub struct PsmbdpOutcome {
    pub sets: StageSets,
    /// Criterion value (mean over points) after the anchor and after each
    /// accepted addition.
    pub trace: Vec<f64>,
    /// Local ids of the mean-belief anchor.
    pub anchor: Vec<LocalId>,
}

/// Criterion value of the given local sets: the mean over points of the best
/// joint value.
pub fn criterion_score(
    model: &DecPomdp,
    space: &CandidateSpace,
    sets: &[Vec<LocalId>],
    points: &[PointValues],
) -> f64 {
    let mut state = SelectionState::new(
        model,
        space,
        points,
        &sets.iter().map(|s| s[0]).collect::<Vec<_>>(),
    );
    for (i, set) in sets.iter().enumerate() {
        for &id in &set[1..] {
            state.add(i, id);
        }
    }
    state.score() / points.len() as f64
}

#[allow(clippy::too_many_arguments)]
pub fn psmbdp_operator(
    model: &DecPomdp,
    prev: &StageSets,
    prev_alphas: &JointAlphas,
    points: &[Belief],
    width: usize,
    mode: SelectionMode,
    order: AgentOrder,
    node_limit: u64,
    capacity_limit: u64,
) -> Result<PsmbdpOutcome> {
    if points.is_empty() || width == 0 {
        return Err(Error::InvalidConfig(
            "PSMBDP needs points and a positive width".into(),
        ));
    }
    let space = CandidateSpace::new(model, prev)?;
    let n = model.num_agents();
    if mode == SelectionMode::Exhaustive {
        for i in 0..n {
            if space.count(i) > capacity_limit {
                return Err(Error::CapacityExceeded {
                    agent: i,
                    requested: space.count(i) as u128,
                    limit: capacity_limit as u128,
                });
            }
        }
    }
    let mean = PointValues::new(model, &Belief::mean(points), prev_alphas);
    let strategy = match mode {
        SelectionMode::Exhaustive => SearchStrategy::DepthFirst,
        SelectionMode::BestFirst => SearchStrategy::BestFirst,
    };
    let anchor = best_joint(
        model,
        &space,
        &mean,
        &Exclusions::new(n),
        strategy,
        node_limit,
    )?;
    let pvs: Vec<PointValues> = points
        .iter()
        .map(|b| PointValues::new(model, b, prev_alphas))
        .collect();
    let mut state = SelectionState::new(model, &space, &pvs, &anchor.locals);
    let scale = 1.0 / points.len() as f64;
    let mut trace = vec![state.score() * scale];
    let full = |s: &SelectionState| s.selected.iter().all(|x| x.len() >= width);
    match order {
        AgentOrder::RoundRobin => loop {
            let mut added = false;
            for i in 0..n {
                if full(&state) {
                    break;
                }
                if state.selected[i].len() >= width {
                    continue;
                }
                if let Some((id, f)) = best_candidate(&state, i, mode, node_limit)? {
                    if f > state.score() + GAIN_EPS {
                        state.add(i, id);
                        trace.push(state.score() * scale);
                        added = true;
                    }
                }
            }
            if !added || full(&state) {
                break;
            }
        },
        AgentOrder::GreedyBest => loop {
            let mut pick: Option<(usize, LocalId, f64)> = None;
            for i in 0..n {
                if state.selected[i].len() >= width {
                    continue;
                }
                if let Some((id, f)) = best_candidate(&state, i, mode, node_limit)? {
                    if pick.is_none_or(|p| f > p.2 + TIE_EPS) {
                        pick = Some((i, id, f));
                    }
                }
            }
            match pick {
                Some((i, id, f)) if f > state.score() + GAIN_EPS => {
                    state.add(i, id);
                    trace.push(state.score() * scale);
                }
                _ => break,
            }
        },
    }
    let sets = space.stage_sets(prev.depth + 1, state.selected.clone());
    Ok(PsmbdpOutcome {
        sets,
        trace,
        anchor: anchor.locals,
    })
}
