//! Dec-POMDP model representation, validation and the centralized views.

mod format;

pub use format::{parse_model, serialize_model};

use crate::belief::Belief;
use crate::error::{Error, Result};

/// Tolerance on probability sums accepted at construction time.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Mixed-radix encoder for joint indices. Agent 0 is the most significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointIndexer {
    radices: Vec<usize>,
    size: usize,
    table: Vec<usize>,
}

impl JointIndexer {
    pub fn new(radices: Vec<usize>) -> Self {
        let size = radices.iter().product();
        let n = radices.len();
        let mut table = vec![0; size * n];
        for flat in 0..size {
            let mut rem = flat;
            for i in (0..n).rev() {
                table[flat * n + i] = rem % radices[i];
                rem /= radices[i];
            }
        }
        JointIndexer {
            radices,
            size,
            table,
        }
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_components(&self) -> usize {
        self.radices.len()
    }

    pub fn encode(&self, components: &[usize]) -> usize {
        debug_assert_eq!(components.len(), self.radices.len());
        components
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&c, &r)| {
                debug_assert!(c < r);
                acc * r + c
            })
    }

    pub fn decode(&self, flat: usize) -> &[usize] {
        let n = self.radices.len();
        &self.table[flat * n..(flat + 1) * n]
    }

    pub fn component(&self, flat: usize, agent: usize) -> usize {
        self.table[flat * self.radices.len() + agent]
    }
}

/// A joint action as per-agent components together with its flat index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointAction {
    pub components: Vec<usize>,
    pub flat_index: usize,
}

/// A joint observation as per-agent components together with its flat index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointObservation {
    pub components: Vec<usize>,
    pub flat_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub name: String,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
}

/// Raw ingredients of a model before validation.
///
/// Tensors are dense and flat:
/// `transition[(a * S + s) * S + s']`, `observation[(a * S + s') * O + o]`
/// and `reward[a * S + s]`, with `a` and `o` joint flat indices.
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub agents: Vec<Agent>,
    pub states: Vec<String>,
    pub transition: Vec<f64>,
    pub observation: Vec<f64>,
    pub reward: Vec<f64>,
    pub initial_belief: Vec<f64>,
    pub default_horizon: usize,
    pub discount: f64,
}

/// A validated, immutable Dec-POMDP.
#[derive(Debug, Clone)]
pub struct DecPomdp {
    agents: Vec<Agent>,
    states: Vec<String>,
    actions: JointIndexer,
    observations: JointIndexer,
    transition: Vec<f64>,
    observation: Vec<f64>,
    reward: Vec<f64>,
    initial_belief: Belief,
    default_horizon: usize,
    discount: f64,
    successors: Vec<Vec<(usize, f64)>>,
}

fn check_names(kind: &str, names: &[String]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::Semantic(format!("{kind} list is empty")));
    }
    let mut seen = std::collections::HashSet::new();
    for name in names {
        if name.is_empty()
            || name == "*"
            || name
                .chars()
                .any(|c| c.is_whitespace() || c == ':' || c == '#')
        {
            return Err(Error::Semantic(format!("invalid {kind} name `{name}`")));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Semantic(format!("duplicate {kind} name `{name}`")));
        }
    }
    Ok(())
}

/// Checks that `row` is a distribution and renormalizes it when the sum is
/// off by more than rounding noise but still within tolerance.
fn check_distribution(row: &mut [f64], what: impl FnOnce() -> String) -> Result<()> {
    let mut sum = 0.0;
    for &p in row.iter() {
        if !p.is_finite() || !(0.0..=1.0 + PROB_TOLERANCE).contains(&p) {
            return Err(Error::Semantic(format!(
                "{}: entry {p} outside [0, 1]",
                what()
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::Semantic(format!("{} sums to {sum}", what())));
    }
    if (sum - 1.0).abs() > 1e-12 {
        row.iter_mut().for_each(|p| *p /= sum);
    }
    for p in row.iter_mut() {
        *p = p.min(1.0);
    }
    Ok(())
}

impl DecPomdp {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let ModelParts {
            agents,
            states,
            mut transition,
            mut observation,
            reward,
            initial_belief,
            default_horizon,
            discount,
        } = parts;
        if agents.is_empty() {
            return Err(Error::Semantic("model has no agents".into()));
        }
        check_names("state", &states)?;
        check_names(
            "agent",
            &agents.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        )?;
        for agent in &agents {
            check_names(&format!("action of agent {}", agent.name), &agent.actions)?;
            check_names(
                &format!("observation of agent {}", agent.name),
                &agent.observations,
            )?;
        }
        if default_horizon == 0 {
            return Err(Error::Semantic("default horizon must be positive".into()));
        }
        let actions = JointIndexer::new(agents.iter().map(|a| a.actions.len()).collect());
        let observations = JointIndexer::new(agents.iter().map(|a| a.observations.len()).collect());
        let ns = states.len();
        let na = actions.size();
        let no = observations.size();
        let expect = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Semantic(format!(
                    "{name} has {got} entries, expected {want}"
                )))
            }
        };
        expect("transition tensor", transition.len(), na * ns * ns)?;
        expect("observation tensor", observation.len(), na * ns * no)?;
        expect("reward table", reward.len(), na * ns)?;
        expect("initial belief", initial_belief.len(), ns)?;
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(Error::Semantic(format!("non-finite reward {r}")));
        }

        for a in 0..na {
            for s in 0..ns {
                let row = &mut transition[(a * ns + s) * ns..(a * ns + s + 1) * ns];
                check_distribution(row, || {
                    format!("transition row (action {a}, state {})", states[s])
                })?;
                let row = &mut observation[(a * ns + s) * no..(a * ns + s + 1) * no];
                check_distribution(row, || {
                    format!("observation row (action {a}, next state {})", states[s])
                })?;
            }
        }
        let mut b0 = initial_belief;
        check_distribution(&mut b0, || "initial belief".to_string())?;
        let initial_belief = Belief::new(b0)?;

        let successors = (0..na * ns)
            .map(|row| {
                transition[row * ns..(row + 1) * ns]
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(s2, &p)| (s2, p))
                    .collect()
            })
            .collect();

        Ok(DecPomdp {
            agents,
            states,
            actions,
            observations,
            transition,
            observation,
            reward,
            initial_belief,
            default_horizon,
            discount,
            successors,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.actions.size()
    }

    pub fn num_joint_observations(&self) -> usize {
        self.observations.size()
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.agents[agent].actions.len()
    }

    pub fn num_observations(&self, agent: usize) -> usize {
        self.agents[agent].observations.len()
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &JointIndexer {
        &self.actions
    }

    pub fn observations(&self) -> &JointIndexer {
        &self.observations
    }

    pub fn joint_action(&self, components: &[usize]) -> JointAction {
        JointAction {
            components: components.to_vec(),
            flat_index: self.actions.encode(components),
        }
    }

    pub fn joint_action_at(&self, flat_index: usize) -> JointAction {
        JointAction {
            components: self.actions.decode(flat_index).to_vec(),
            flat_index,
        }
    }

    pub fn joint_observation(&self, components: &[usize]) -> JointObservation {
        JointObservation {
            components: components.to_vec(),
            flat_index: self.observations.encode(components),
        }
    }

    pub fn joint_observation_at(&self, flat_index: usize) -> JointObservation {
        JointObservation {
            components: self.observations.decode(flat_index).to_vec(),
            flat_index,
        }
    }

    /// T(s'|s,a).
    #[inline]
    pub fn transition(&self, s: usize, a: usize, s2: usize) -> f64 {
        let ns = self.states.len();
        self.transition[(a * ns + s) * ns + s2]
    }

    /// The row T(·|s,a).
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.states.len();
        &self.transition[(a * ns + s) * ns..(a * ns + s + 1) * ns]
    }

    /// Nonzero entries of T(·|s,a) as `(s', p)` pairs.
    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[a * self.states.len() + s]
    }

    /// O(o|a,s'). Observations depend on the joint action and the reached state.
    #[inline]
    pub fn observation(&self, a: usize, s2: usize, o: usize) -> f64 {
        let no = self.observations.size();
        self.observation[(a * self.states.len() + s2) * no + o]
    }

    /// The row O(·|a,s').
    #[inline]
    pub fn observation_row(&self, a: usize, s2: usize) -> &[f64] {
        let no = self.observations.size();
        let row = a * self.states.len() + s2;
        &self.observation[row * no..(row + 1) * no]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[a * self.states.len() + s]
    }

    /// The vector R(·,a).
    #[inline]
    pub fn reward_row(&self, a: usize) -> &[f64] {
        let ns = self.states.len();
        &self.reward[a * ns..(a + 1) * ns]
    }

    pub fn initial_belief(&self) -> &Belief {
        &self.initial_belief
    }

    pub fn default_horizon(&self) -> usize {
        self.default_horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn with_default_horizon(mut self, horizon: usize) -> Self {
        self.default_horizon = horizon.max(1);
        self
    }

    pub(crate) fn raw_transition(&self) -> &[f64] {
        &self.transition
    }

    pub(crate) fn raw_observation(&self) -> &[f64] {
        &self.observation
    }

    pub(crate) fn raw_reward(&self) -> &[f64] {
        &self.reward
    }

    /// Centralized single-agent POMDP over joint actions and joint observations.
    pub fn underlying_pomdp(&self) -> DecPomdp {
        if self.agents.len() == 1 {
            return self.clone();
        }
        let join = |names: Vec<String>| names.join("_");
        let actions = (0..self.actions.size())
            .map(|a| {
                join(
                    self.actions
                        .decode(a)
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| self.agents[i].actions[c].clone())
                        .collect(),
                )
            })
            .collect();
        let observations = (0..self.observations.size())
            .map(|o| {
                join(
                    self.observations
                        .decode(o)
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| self.agents[i].observations[c].clone())
                        .collect(),
                )
            })
            .collect();
        let agent = Agent {
            name: "joint".into(),
            actions,
            observations,
        };
        DecPomdp {
            agents: vec![agent],
            states: self.states.clone(),
            actions: JointIndexer::new(vec![self.actions.size()]),
            observations: JointIndexer::new(vec![self.observations.size()]),
            transition: self.transition.clone(),
            observation: self.observation.clone(),
            reward: self.reward.clone(),
            initial_belief: self.initial_belief.clone(),
            default_horizon: self.default_horizon,
            discount: self.discount,
            successors: self.successors.clone(),
        }
    }

    /// Fully observable MDP over states and joint actions.
    pub fn underlying_mdp(&self) -> Mdp {
        Mdp {
            num_states: self.states.len(),
            num_actions: self.actions.size(),
            transition: self.transition.clone(),
            reward: self.reward.clone(),
            successors: self.successors.clone(),
        }
    }
}

/// The underlying MDP of a Dec-POMDP. Layout matches [`DecPomdp`].
#[derive(Debug, Clone)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn transition(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[(a * self.num_states + s) * self.num_states + s2]
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[a * self.num_states + s]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[a * self.num_states + s]
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelParts {
        ModelParts {
            agents: vec![Agent {
                name: "a".into(),
                actions: vec!["x".into()],
                observations: vec!["z".into()],
            }],
            states: vec!["s".into()],
            transition: vec![1.0],
            observation: vec![1.0],
            reward: vec![3.0],
            initial_belief: vec![1.0],
            default_horizon: 1,
            discount: 1.0,
        }
    }

    #[test]
    fn indexer_round_trip() {
        let ix = JointIndexer::new(vec![3, 2, 4]);
        assert_eq!(ix.size(), 24);
        for flat in 0..ix.size() {
            assert_eq!(ix.encode(ix.decode(flat)), flat);
        }
        assert_eq!(ix.encode(&[1, 0, 0]), 8);
    }

    #[test]
    fn tiny_model_is_valid() {
        let m = DecPomdp::new(tiny()).unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.reward(0, 0), 3.0);
        assert_eq!(m.successors(0, 0), &[(0, 1.0)]);
    }

    #[test]
    fn rejects_bad_rows_and_names() {
        let mut p = tiny();
        p.transition = vec![0.9];
        assert!(matches!(DecPomdp::new(p), Err(Error::Semantic(_))));
        let mut p = tiny();
        p.states = vec!["a b".into()];
        assert!(DecPomdp::new(p).is_err());
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let mut p = tiny();
        p.initial_belief = vec![1.0 + 5e-10];
        let m = DecPomdp::new(p).unwrap();
        assert_eq!(m.initial_belief().probs()[0], 1.0);
    }
}
