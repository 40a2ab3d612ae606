//! Beliefs, the Bayesian update and Monte-Carlo sampling of belief points.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::StageValues;
use crate::model::{DecPomdp, PROB_TOLERANCE};

/// A probability distribution over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Semantic("belief over an empty state set".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Semantic("belief has a negative entry".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::Semantic(format!("belief sums to {sum}")));
        }
        Ok(Belief(probs))
    }

    /// Normalizes a nonnegative weight vector. The caller guarantees a positive sum.
    pub(crate) fn from_weights(mut w: Vec<f64>) -> Self {
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|p| *p /= sum);
        Belief(w)
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn degenerate(n: usize, s: usize) -> Self {
        let mut v = vec![0.0; n];
        v[s] = 1.0;
        Belief(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(p, x)| p * x).sum()
    }

    /// Average of a nonempty multiset of beliefs.
    pub fn mean(points: &[Belief]) -> Belief {
        let n = points[0].len();
        let mut m = vec![0.0; n];
        for b in points {
            for (acc, p) in m.iter_mut().zip(&b.0) {
                *acc += p;
            }
        }
        let k = points.len() as f64;
        m.iter_mut().for_each(|p| *p /= k);
        Belief(m)
    }
}

/// Predicted next-state distribution sum_s b(s) T(s'|s,a).
pub fn predict(model: &DecPomdp, b: &Belief, a: usize) -> Vec<f64> {
    let mut out = vec![0.0; model.num_states()];
    for (s, &p) in b.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for &(s2, t) in model.successors(s, a) {
            out[s2] += p * t;
        }
    }
    out
}

/// O(o|b,a) for every joint observation `o`.
pub fn obs_marginal(model: &DecPomdp, b: &Belief, a: usize) -> Vec<f64> {
    marginal_from_prediction(model, &predict(model, b, a), a)
}

fn marginal_from_prediction(model: &DecPomdp, beta: &[f64], a: usize) -> Vec<f64> {
    let mut out = vec![0.0; model.num_joint_observations()];
    for (s2, &p) in beta.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (acc, q) in out.iter_mut().zip(model.observation_row(a, s2)) {
            *acc += p * q;
        }
    }
    out
}

fn posterior(model: &DecPomdp, beta: &[f64], a: usize, o: usize) -> Option<Belief> {
    let w: Vec<f64> = beta
        .iter()
        .enumerate()
        .map(|(s2, &p)| p * model.observation(a, s2, o))
        .collect();
    let z: f64 = w.iter().sum();
    (z > 0.0).then(|| Belief::from_weights(w))
}

/// The Bayesian update: b'(s') proportional to sum_s b(s) T(s'|s,a) O(o|a,s').
pub fn belief_update(model: &DecPomdp, b: &Belief, a: usize, o: usize) -> Result<Belief> {
    posterior(model, &predict(model, b, a), a, o).ok_or(Error::ZeroProbabilityObservation {
        action: a,
        observation: o,
    })
}

/// Policy used to drive the simulations that generate belief points.
#[derive(Debug, Clone, Copy)]
pub enum HeuristicPolicy<'a> {
    /// Uniformly random joint actions.
    Random,
    /// Greedy with respect to the optimal values of the underlying MDP.
    MdpGreedy(&'a StageValues),
}

impl HeuristicPolicy<'_> {
    /// Stage index into the MDP tables when `steps_left` steps remain.
    fn stage(values: &StageValues, steps_left: usize) -> usize {
        values.horizon - steps_left
    }

    fn act_on_belief(&self, b: &Belief, steps_left: usize, na: usize, rng: &mut impl Rng) -> usize {
        match self {
            HeuristicPolicy::Random => rng.gen_range(0..na),
            HeuristicPolicy::MdpGreedy(v) => v.greedy_at(b, Self::stage(v, steps_left)),
        }
    }

    fn act_on_state(&self, s: usize, steps_left: usize, na: usize, rng: &mut impl Rng) -> usize {
        match self {
            HeuristicPolicy::Random => rng.gen_range(0..na),
            HeuristicPolicy::MdpGreedy(v) => v.greedy[Self::stage(v, steps_left)][s],
        }
    }
}

/// Where sampled points live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeuristicSpace {
    /// Beliefs of the underlying POMDP reached along simulated trajectories.
    Belief,
    /// Empirical state distributions of particles simulated in the underlying MDP.
    StatePrior,
}

/// Belief points for each stage `t` in `0..horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSets {
    pub horizon: usize,
    pub points_at: Vec<Vec<Belief>>,
}

fn trajectory_counts(fractions: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = fractions
        .iter()
        .map(|f| (f * n as f64).floor() as usize)
        .collect();
    let used: usize = counts.iter().sum();
    if let Some(first) = counts.first_mut() {
        *first += n.saturating_sub(used);
    }
    counts
}

fn check_mix(heuristics: &[(HeuristicPolicy, f64)], horizon: usize, n: usize) -> Result<()> {
    if heuristics.is_empty() || n == 0 {
        return Err(Error::InvalidConfig(
            "sampling needs at least one heuristic and one sample".into(),
        ));
    }
    let total: f64 = heuristics.iter().map(|(_, f)| f).sum();
    if (total - 1.0).abs() > 1e-9 || heuristics.iter().any(|(_, f)| *f < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "heuristic fractions sum to {total}, expected 1"
        )));
    }
    for (h, _) in heuristics {
        if let HeuristicPolicy::MdpGreedy(v) = h {
            if v.horizon < horizon {
                return Err(Error::InvalidConfig(format!(
                    "MDP values cover {} stages, planning needs {horizon}",
                    v.horizon
                )));
            }
        }
    }
    Ok(())
}

/// Generator for trajectory `k` under base seed `seed`.
pub fn trajectory_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Samples `n` beliefs per stage by simulating the heuristic mix in the
/// underlying POMDP. Trajectory `k` draws from its own stream of `seed`.
pub fn sample_point_sets(
    model: &DecPomdp,
    heuristics: &[(HeuristicPolicy, f64)],
    horizon: usize,
    n: usize,
    seed: u64,
) -> Result<PointSets> {
    check_mix(heuristics, horizon, n)?;
    let counts = trajectory_counts(&heuristics.iter().map(|h| h.1).collect::<Vec<_>>(), n);
    let na = model.num_joint_actions();
    let mut points_at = vec![Vec::with_capacity(n); horizon];
    let mut k = 0u64;
    for ((policy, _), &count) in heuristics.iter().zip(&counts) {
        for _ in 0..count {
            let mut rng = trajectory_rng(seed, k);
            k += 1;
            let mut b = model.initial_belief().clone();
            for (t, slot) in points_at.iter_mut().enumerate() {
                slot.push(b.clone());
                if t + 1 == horizon {
                    break;
                }
                let a = policy.act_on_belief(&b, horizon - t, na, &mut rng);
                let beta = predict(model, &b, a);
                let marginal = marginal_from_prediction(model, &beta, a);
                let o = WeightedIndex::new(&marginal)
                    .expect("observation marginal is a distribution")
                    .sample(&mut rng);
                b = posterior(model, &beta, a, o).expect("sampled observation has mass");
            }
        }
    }
    Ok(PointSets { horizon, points_at })
}

/// Samples `n` points per stage, each the empirical state distribution of
/// `particles` independent runs of the heuristic in the underlying MDP.
pub fn sample_state_prior_sets(
    model: &DecPomdp,
    heuristics: &[(HeuristicPolicy, f64)],
    horizon: usize,
    n: usize,
    particles: usize,
    seed: u64,
) -> Result<PointSets> {
    check_mix(heuristics, horizon, n)?;
    if particles == 0 {
        return Err(Error::InvalidConfig(
            "state-prior sampling needs particles".into(),
        ));
    }
    let counts = trajectory_counts(&heuristics.iter().map(|h| h.1).collect::<Vec<_>>(), n);
    let ns = model.num_states();
    let na = model.num_joint_actions();
    let start = WeightedIndex::new(model.initial_belief().probs()).expect("b0 is a distribution");
    let rows: Vec<WeightedIndex<f64>> = (0..na * ns)
        .map(|r| {
            let (a, s) = (r / ns, r % ns);
            WeightedIndex::new(model.successors(s, a).iter().map(|x| x.1))
                .expect("transition row is a distribution")
        })
        .collect();
    let mut points_at = vec![Vec::with_capacity(n); horizon];
    let mut k = 0u64;
    for ((policy, _), &count) in heuristics.iter().zip(&counts) {
        for _ in 0..count {
            let mut rng = trajectory_rng(seed, k);
            k += 1;
            let mut states: Vec<usize> = (0..particles).map(|_| start.sample(&mut rng)).collect();
            for (t, slot) in points_at.iter_mut().enumerate() {
                let mut w = vec![0.0; ns];
                for &s in &states {
                    w[s] += 1.0;
                }
                slot.push(Belief::from_weights(w));
                if t + 1 == horizon {
                    break;
                }
                for s in states.iter_mut() {
                    let a = policy.act_on_state(*s, horizon - t, na, &mut rng);
                    let succ = model.successors(*s, a);
                    *s = succ[rows[a * ns + *s].sample(&mut rng)].0;
                }
            }
        }
    }
    Ok(PointSets { horizon, points_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Agent, ModelParts};

    fn coin() -> DecPomdp {
        // Two states that never change; the observation ignores the state.
        DecPomdp::new(ModelParts {
            agents: vec![Agent {
                name: "a".into(),
                actions: vec!["x".into(), "y".into()],
                observations: vec!["u".into(), "v".into()],
            }],
            states: vec!["h".into(), "t".into()],
            transition: vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            observation: vec![0.5; 8],
            reward: vec![0.0; 4],
            initial_belief: vec![0.3, 0.7],
            default_horizon: 3,
            discount: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn uninformative_update_keeps_belief() {
        let m = coin();
        let b = m.initial_belief().clone();
        let b2 = belief_update(&m, &b, 1, 0).unwrap();
        for (x, y) in b.probs().iter().zip(b2.probs()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn belief_validation() {
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert_eq!(Belief::new(vec![0.25, 0.75]).unwrap().dot(&[4.0, 8.0]), 7.0);
    }

    #[test]
    fn counts_give_remainder_to_first() {
        assert_eq!(trajectory_counts(&[0.5, 0.5], 7), vec![4, 3]);
        assert_eq!(trajectory_counts(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
    }

    #[test]
    fn first_stage_points_are_b0() {
        let m = coin();
        let ps = sample_point_sets(&m, &[(HeuristicPolicy::Random, 1.0)], 3, 5, 9).unwrap();
        assert_eq!(ps.points_at.len(), 3);
        assert!(ps.points_at.iter().all(|p| p.len() == 5));
        assert!(ps.points_at[0].iter().all(|b| b == m.initial_belief()));
    }

    #[test]
    fn rejects_bad_fractions() {
        let m = coin();
        let mix = [(HeuristicPolicy::Random, 0.4)];
        assert!(sample_point_sets(&m, &mix, 3, 5, 0).is_err());
    }
}
