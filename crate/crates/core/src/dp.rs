//! The bottom-up dynamic-programming loop and the exact and MBDP operators.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::belief::{
    sample_point_sets, sample_state_prior_sets, Belief, HeuristicPolicy, HeuristicSpace,
};
use crate::bnb::{self, best_joint, Exclusions, SearchStrategy, DEFAULT_NODE_LIMIT};
use crate::error::{Error, Result};
use crate::lp::max_min_margin;
use crate::mdp::value_iteration;
use crate::model::DecPomdp;
use crate::policy::{JointPolicy, PolicyTree};
use crate::psmbdp::{psmbdp_operator, AgentOrder, SelectionMode};
use crate::stage::{stage_alphas, CandidateSpace, JointAlphas, LocalId, PointValues, StageSets};

pub const DEFAULT_CAPACITY_LIMIT: u64 = 10_000_000;
/// Largest candidate product MBDP enumerates directly before switching to search.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;
const DOMINANCE_EPS: f64 = 1e-6;
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Exact,
    Mbdp,
    PbipDfs,
    PbipBefs,
    Psmbdp,
    PsmbdpBefs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Exact,
        Algorithm::Mbdp,
        Algorithm::PbipDfs,
        Algorithm::PbipBefs,
        Algorithm::Psmbdp,
        Algorithm::PsmbdpBefs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Mbdp => "mbdp",
            Algorithm::PbipDfs => "pbip-dfs",
            Algorithm::PbipBefs => "pbip-befs",
            Algorithm::Psmbdp => "psmbdp",
            Algorithm::PsmbdpBefs => "psmbdp-befs",
        }
    }

    /// Point space used when the configuration does not choose one.
    pub fn default_space(self) -> HeuristicSpace {
        match self {
            Algorithm::Psmbdp | Algorithm::PsmbdpBefs => HeuristicSpace::Belief,
            _ => HeuristicSpace::StatePrior,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Heuristic policy named in a sampling mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    Mdp,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub width: usize,
    pub samples: usize,
    pub seed: u64,
    pub heuristics: Vec<(HeuristicKind, f64)>,
    /// `None` picks [`Algorithm::default_space`].
    pub heuristic_space: Option<HeuristicSpace>,
    /// Particles per state-prior point.
    pub prior_particles: usize,
    pub node_limit: u64,
    pub capacity_limit: u64,
    pub agent_order: AgentOrder,
}

pub const DEFAULT_PRIOR_PARTICLES: usize = 4;

impl PlannerConfig {
    pub fn new(algorithm: Algorithm, horizon: usize, width: usize) -> Self {
        PlannerConfig {
            algorithm,
            horizon,
            width,
            samples: 100,
            seed: 0,
            heuristics: vec![(HeuristicKind::Mdp, 0.5), (HeuristicKind::Random, 0.5)],
            heuristic_space: None,
            prior_particles: DEFAULT_PRIOR_PARTICLES,
            node_limit: DEFAULT_NODE_LIMIT,
            capacity_limit: DEFAULT_CAPACITY_LIMIT,
            agent_order: AgentOrder::RoundRobin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.width == 0 {
            return bad("width must be at least 1");
        }
        if self.samples == 0 {
            return bad("samples must be at least 1");
        }
        if self.heuristics.is_empty() {
            return bad("heuristic mix is empty");
        }
        let total: f64 = self.heuristics.iter().map(|h| h.1).sum();
        if (total - 1.0).abs() > 1e-9 || self.heuristics.iter().any(|h| h.1 < 0.0) {
            return bad("heuristic fractions must be nonnegative and sum to 1");
        }
        Ok(())
    }

    pub fn space(&self) -> HeuristicSpace {
        self.heuristic_space
            .unwrap_or_else(|| self.algorithm.default_space())
    }
}

/// All candidates of the backup A_i x (Q_i)^{Omega_i}, materialized.
///
/// `limit` bounds each agent's count and also the number of joint trees,
/// since pruning evaluates every joint combination.
pub fn exhaustive_backup(model: &DecPomdp, prev: &StageSets, limit: u64) -> Result<StageSets> {
    let space = CandidateSpace::new(model, prev)?;
    let mut joint: u128 = 1;
    for i in 0..model.num_agents() {
        if space.count(i) > limit {
            return Err(Error::CapacityExceeded {
                agent: i,
                requested: space.count(i) as u128,
                limit: limit as u128,
            });
        }
        joint = joint.saturating_mul(space.count(i) as u128);
    }
    if joint > limit as u128 {
        return Err(Error::JointCapacityExceeded {
            requested: joint,
            limit: limit as u128,
        });
    }
    let locals = (0..model.num_agents())
        .map(|i| (0..space.count(i)).collect())
        .collect();
    Ok(space.stage_sets(prev.depth + 1, locals))
}

/// Iterated LP dominance pruning over state and co-player tree distributions.
///
/// `prev_alphas` must be the joint alphas of the stage the candidates were
/// backed up from. Trees are tested in decreasing index order, so among
/// equivalent trees the lowest index survives.
pub fn exact_prune(
    model: &DecPomdp,
    candidates: &StageSets,
    prev_alphas: &JointAlphas,
) -> Result<StageSets> {
    let n = model.num_agents();
    let ns = model.num_states();
    let alphas = stage_alphas(model, candidates, prev_alphas);
    let index = &alphas.index;
    let mut alive: Vec<Vec<bool>> = candidates
        .sets
        .iter()
        .map(|s| vec![true; s.len()])
        .collect();
    let mut parts = vec![0usize; n];
    // A tree that survived a check stays undominated until a co-player loses a
    // tree; removing its own alternatives only helps it.
    let mut verified: Vec<Vec<bool>> = alive.iter().map(|a| vec![false; a.len()]).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for q in (0..alive[i].len()).rev() {
                if !alive[i][q] || verified[i][q] {
                    continue;
                }
                let others: Vec<usize> = (0..alive[i].len())
                    .filter(|&k| k != q && alive[i][k])
                    .collect();
                if others.is_empty() {
                    continue;
                }
                // Co-player tuples: flat indices with agent i's slot set to zero.
                let mut tuples = Vec::new();
                'tuples: for p in 0..index.count {
                    index.decode_into(p, &mut parts);
                    if parts[i] != 0 {
                        continue;
                    }
                    for j in 0..n {
                        if j != i && !alive[j][parts[j]] {
                            continue 'tuples;
                        }
                    }
                    tuples.push(p);
                }
                let stride = index.strides[i];
                let num_vars = ns * tuples.len();
                let diffs: Vec<Vec<f64>> = others
                    .iter()
                    .map(|&alt| {
                        let mut row = Vec::with_capacity(num_vars);
                        for s in 0..ns {
                            let vals = alphas.at_state(s);
                            for &t in &tuples {
                                row.push(vals[t + q * stride] - vals[t + alt * stride]);
                            }
                        }
                        row
                    })
                    .collect();
                // A single tree at least as good everywhere settles it without an LP.
                let dominated = if diffs
                    .iter()
                    .any(|row| row.iter().all(|&d| d <= DOMINANCE_EPS))
                {
                    true
                } else if (0..num_vars).any(|v| diffs.iter().all(|row| row[v] > DOMINANCE_EPS)) {
                    // A corner where `q` beats every alternative by a margin.
                    false
                } else {
                    max_min_margin(&diffs, num_vars)? <= DOMINANCE_EPS
                };
                if dominated {
                    alive[i][q] = false;
                    changed = true;
                    for (j, v) in verified.iter_mut().enumerate() {
                        if j != i {
                            v.iter_mut().for_each(|x| *x = false);
                        }
                    }
                } else {
                    verified[i][q] = true;
                }
            }
        }
    }
    let sets = candidates
        .sets
        .iter()
        .zip(&alive)
        .map(|(set, keep)| {
            set.iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(t, _)| t.clone())
                .collect()
        })
        .collect();
    Ok(StageSets {
        depth: candidates.depth,
        sets,
    })
}

/// Lexicographically smallest remaining joint candidate within `TIE_EPS` of
/// the best value at `pv`, found by direct enumeration.
fn enumerate_best(
    model: &DecPomdp,
    space: &CandidateSpace,
    pv: &PointValues,
    remaining: &[Vec<LocalId>],
) -> (Vec<LocalId>, f64) {
    let n = remaining.len();
    let children: Vec<Vec<Vec<u32>>> = remaining
        .iter()
        .enumerate()
        .map(|(i, ids)| {
            ids.iter()
                .map(|&id| {
                    let mut c = vec![0; space.num_observations(i)];
                    space.children_into(i, id, &mut c);
                    c
                })
                .collect()
        })
        .collect();
    let actions: Vec<Vec<usize>> = remaining
        .iter()
        .enumerate()
        .map(|(i, ids)| ids.iter().map(|&id| space.action_of(i, id)).collect())
        .collect();
    let total: usize = remaining.iter().map(|r| r.len()).product();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    let mut comps = vec![0usize; n];
    for _ in 0..total {
        for i in 0..n {
            comps[i] = actions[i][idx[i]];
        }
        let a = model.actions().encode(&comps);
        let ch: Vec<&[u32]> = (0..n).map(|i| children[i][idx[i]].as_slice()).collect();
        values.push(pv.leaf_value(a, &ch));
        for i in (0..n).rev() {
            idx[i] += 1;
            if idx[i] < remaining[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pos = values.iter().position(|&v| v >= best - TIE_EPS).unwrap();
    let mut rem = pos;
    let mut ids = vec![0; n];
    for i in (0..n).rev() {
        ids[i] = remaining[i][rem % remaining[i].len()];
        rem /= remaining[i].len();
    }
    (ids, values[pos])
}

/// MBDP operator: for each point, the best joint candidate among trees not yet
/// selected; its local trees move to the kept sets. Stops early once some
/// agent has no candidates left.
pub fn mbdp_prune(
    model: &DecPomdp,
    prev: &StageSets,
    prev_alphas: &JointAlphas,
    points: &[Belief],
    node_limit: u64,
) -> Result<StageSets> {
    let space = CandidateSpace::new(model, prev)?;
    let n = model.num_agents();
    let mut removed: Vec<HashSet<LocalId>> = vec![HashSet::new(); n];
    let mut locals = vec![Vec::new(); n];
    for b in points {
        let left: Vec<u64> = (0..n)
            .map(|i| space.count(i) - removed[i].len() as u64)
            .collect();
        if left.contains(&0) {
            break;
        }
        let pv = PointValues::new(model, b, prev_alphas);
        let product: u128 = left.iter().map(|&c| c as u128).product();
        let ids = if product <= ENUMERATION_LIMIT {
            let remaining: Vec<Vec<LocalId>> = (0..n)
                .map(|i| {
                    (0..space.count(i))
                        .filter(|id| !removed[i].contains(id))
                        .collect()
                })
                .collect();
            enumerate_best(model, &space, &pv, &remaining).0
        } else {
            let excl = Exclusions {
                joint: HashSet::new(),
                local: removed.clone(),
            };
            best_joint(
                model,
                &space,
                &pv,
                &excl,
                SearchStrategy::DepthFirst,
                node_limit,
            )?
            .locals
        };
        for (i, id) in ids.into_iter().enumerate() {
            removed[i].insert(id);
            locals[i].push(id);
        }
    }
    Ok(space.stage_sets(prev.depth + 1, locals))
}

/// Progress of one DP stage.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: usize,
    pub sizes: Vec<usize>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    /// Kept sets per stage `t`, from the first decision (`t = 0`) to the last.
    pub sets: Vec<StageSets>,
    pub policy: JointPolicy,
    /// Exact value of `policy` at the initial belief.
    pub value: f64,
    /// Selection-score traces of PSMBDP, one per stage in planning order.
    pub score_traces: Vec<Vec<f64>>,
}

impl PlanOutcome {
    pub fn stage_sizes(&self) -> Vec<Vec<usize>> {
        self.sets.iter().map(|s| s.sizes()).collect()
    }
}

/// Belief points for each stage, or `None` for the exact operator.
pub fn sample_points(model: &DecPomdp, config: &PlannerConfig) -> Result<Option<Vec<Vec<Belief>>>> {
    let count = match config.algorithm {
        Algorithm::Exact => return Ok(None),
        Algorithm::Mbdp | Algorithm::PbipDfs | Algorithm::PbipBefs => config.width,
        Algorithm::Psmbdp | Algorithm::PsmbdpBefs => config.samples,
    };
    let values = value_iteration(&model.underlying_mdp(), config.horizon);
    let mix: Vec<(HeuristicPolicy, f64)> = config
        .heuristics
        .iter()
        .map(|&(k, f)| match k {
            HeuristicKind::Mdp => (HeuristicPolicy::MdpGreedy(&values), f),
            HeuristicKind::Random => (HeuristicPolicy::Random, f),
        })
        .collect();
    let sets = match config.space() {
        HeuristicSpace::Belief => {
            sample_point_sets(model, &mix, config.horizon, count, config.seed)?
        }
        HeuristicSpace::StatePrior => sample_state_prior_sets(
            model,
            &mix,
            config.horizon,
            count,
            config.prior_particles,
            config.seed,
        )?,
    };
    Ok(Some(sets.points_at))
}

pub fn plan(model: &DecPomdp, config: &PlannerConfig) -> Result<PlanOutcome> {
    plan_with_observer(model, config, &mut |_| {})
}

/// Runs the DP from the last stage to the first, reporting each stage.
pub fn plan_with_observer(
    model: &DecPomdp,
    config: &PlannerConfig,
    observer: &mut dyn FnMut(&StageReport),
) -> Result<PlanOutcome> {
    config.validate()?;
    let start = Instant::now();
    let points = sample_points(model, config)?;
    let h = config.horizon;
    let mut prev = StageSets::terminal(model.num_agents());
    let mut prev_alphas = JointAlphas::terminal(model);
    let mut history = Vec::with_capacity(h);
    let mut score_traces = Vec::new();
    for t in (0..h).rev() {
        let pts = points.as_ref().map(|p| p[t].as_slice()).unwrap_or(&[]);
        let sets = match config.algorithm {
            Algorithm::Exact => {
                let candidates = exhaustive_backup(model, &prev, config.capacity_limit)?;
                exact_prune(model, &candidates, &prev_alphas)?
            }
            Algorithm::Mbdp => mbdp_prune(model, &prev, &prev_alphas, pts, config.node_limit)?,
            Algorithm::PbipDfs | Algorithm::PbipBefs => {
                let strategy = if config.algorithm == Algorithm::PbipDfs {
                    SearchStrategy::DepthFirst
                } else {
                    SearchStrategy::BestFirst
                };
                bnb::pbip_operator(model, &prev, &prev_alphas, pts, strategy, config.node_limit)?
            }
            Algorithm::Psmbdp | Algorithm::PsmbdpBefs => {
                let mode = if config.algorithm == Algorithm::Psmbdp {
                    SelectionMode::Exhaustive
                } else {
                    SelectionMode::BestFirst
                };
                let out = psmbdp_operator(
                    model,
                    &prev,
                    &prev_alphas,
                    pts,
                    config.width,
                    mode,
                    config.agent_order,
                    config.node_limit,
                    config.capacity_limit,
                )?;
                score_traces.push(out.trace);
                out.sets
            }
        };
        let alphas = stage_alphas(model, &sets, &prev_alphas);
        observer(&StageReport {
            stage: t,
            sizes: sets.sizes(),
            elapsed: start.elapsed(),
        });
        history.push(sets.clone());
        prev = sets;
        prev_alphas = alphas;
    }
    history.reverse();

    let b0 = model.initial_belief();
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for p in 0..prev_alphas.count() {
        let v = prev_alphas.value(p, b0);
        if v > best_v + TIE_EPS {
            best_v = v;
            best = p;
        }
    }
    let mut parts = vec![0; model.num_agents()];
    prev_alphas.index.decode_into(best, &mut parts);
    let policy = build_policy(model, &history, &parts)?;
    Ok(PlanOutcome {
        sets: history,
        policy,
        value: best_v,
        score_traces,
    })
}

/// Materializes the joint policy rooted at positions `roots` of stage 0.
pub fn build_policy(
    model: &DecPomdp,
    history: &[StageSets],
    roots: &[usize],
) -> Result<JointPolicy> {
    let n = model.num_agents();
    let mut below: Vec<Vec<Arc<PolicyTree>>> = vec![vec![PolicyTree::empty()]; n];
    for stage in history.iter().rev() {
        below = (0..n)
            .map(|i| {
                stage.sets[i]
                    .iter()
                    .map(|t| {
                        let children = t
                            .children
                            .iter()
                            .map(|&c| below[i][c as usize].clone())
                            .collect();
                        PolicyTree::node(t.action.expect("stage trees have actions"), children)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
    }
    JointPolicy::new(
        roots
            .iter()
            .enumerate()
            .map(|(i, &r)| below[i][r].clone())
            .collect(),
    )
}
