//! Firefighting (Oliehoek et al., 2008).
//!
//! Houses stand in a line, each with a fire level in `0..levels`. Every agent
//! picks a house to fight fire at. Per house, independently:
//! - no agent: the level rises by one with probability 0.8 if a neighbour
//!   burns, otherwise with 0.4 if the house itself burns (a house that is not
//!   burning and has no burning neighbour stays at 0);
//! - one agent: the level drops by one with probability 1, or 0.6 if a
//!   neighbour burns;
//! - two or more agents: the fire is extinguished.
//!
//! The reward is minus the expected total fire level after the transition.
//! An agent observes flames at its house with probability 0.2, 0.5 or 0.8 for
//! level 0, 1 or at least 2 of the reached state. The modified variant
//! instead observes that level exactly. The start is uniform over states.

use crate::error::Result;
use crate::model::{Agent, DecPomdp, ModelParts};

const P_SPREAD: f64 = 0.8;
const P_GROW: f64 = 0.4;
const P_ONE_AGENT_NEAR_FIRE: f64 = 0.6;

fn flames_prob(level: usize) -> f64 {
    match level {
        0 => 0.2,
        1 => 0.5,
        _ => 0.8,
    }
}

fn decode(mut s: usize, houses: usize, levels: usize) -> Vec<usize> {
    let mut out = vec![0; houses];
    for h in (0..houses).rev() {
        out[h] = s % levels;
        s /= levels;
    }
    out
}

/// Distribution of one house's next level.
fn house_step(fire: &[usize], h: usize, agents_here: usize, levels: usize) -> Vec<(usize, f64)> {
    let f = fire[h];
    let near = (h > 0 && fire[h - 1] > 0) || (h + 1 < fire.len() && fire[h + 1] > 0);
    match agents_here {
        0 => {
            let p = if near {
                P_SPREAD
            } else if f > 0 {
                P_GROW
            } else {
                0.0
            };
            vec![((f + 1).min(levels - 1), p), (f, 1.0 - p)]
        }
        1 => {
            let p = if near { P_ONE_AGENT_NEAR_FIRE } else { 1.0 };
            vec![(f.saturating_sub(1), p), (f, 1.0 - p)]
        }
        _ => vec![(0, 1.0)],
    }
}

pub fn build(houses: usize, levels: usize, observe_level: bool) -> Result<DecPomdp> {
    let n = 2;
    let ns = levels.pow(houses as u32);
    let na = houses * houses;
    let k = if observe_level { levels } else { 2 };
    let no = k * k;
    let fires: Vec<Vec<usize>> = (0..ns).map(|s| decode(s, houses, levels)).collect();
    let total: Vec<f64> = fires
        .iter()
        .map(|f| f.iter().sum::<usize>() as f64)
        .collect();

    let mut transition = vec![0.0; na * ns * ns];
    let mut reward = vec![0.0; na * ns];
    let mut observation = vec![0.0; na * ns * no];
    for a in 0..na {
        let targets = [a / houses, a % houses];
        for s in 0..ns {
            let per_house: Vec<Vec<(usize, f64)>> = (0..houses)
                .map(|h| {
                    let here = targets.iter().filter(|&&t| t == h).count();
                    house_step(&fires[s], h, here, levels)
                })
                .collect();
            let mut dist = vec![(0usize, 1.0f64)];
            for outcomes in &per_house {
                let mut next = Vec::with_capacity(dist.len() * 2);
                for &(prefix, p) in &dist {
                    for &(lvl, q) in outcomes {
                        if q > 0.0 {
                            next.push((prefix * levels + lvl, p * q));
                        }
                    }
                }
                dist = next;
            }
            let row = &mut transition[(a * ns + s) * ns..(a * ns + s + 1) * ns];
            for (s2, p) in dist {
                row[s2] += p;
            }
            reward[a * ns + s] = -row.iter().zip(&total).map(|(p, c)| p * c).sum::<f64>();
        }
        for s2 in 0..ns {
            let local: Vec<Vec<f64>> = targets
                .iter()
                .map(|&h| {
                    let lvl = fires[s2][h];
                    if observe_level {
                        (0..levels)
                            .map(|l| if l == lvl { 1.0 } else { 0.0 })
                            .collect()
                    } else {
                        let p = flames_prob(lvl);
                        vec![1.0 - p, p]
                    }
                })
                .collect();
            for o in 0..no {
                observation[(a * ns + s2) * no + o] = local[0][o / k] * local[1][o % k];
            }
        }
    }

    let agent = |i: usize| Agent {
        name: format!("agent{}", i + 1),
        actions: (0..houses).map(|h| format!("house{h}")).collect(),
        observations: if observe_level {
            (0..levels).map(|l| format!("level{l}")).collect()
        } else {
            vec!["no-flames".into(), "flames".into()]
        },
    };
    DecPomdp::new(ModelParts {
        agents: (0..n).map(agent).collect(),
        states: fires
            .iter()
            .map(|f| format!("f{}", f.iter().map(|l| l.to_string()).collect::<String>()))
            .collect(),
        transition,
        observation,
        reward,
        initial_belief: vec![1.0 / ns as f64; ns],
        default_horizon: if observe_level { 100 } else { 50 },
        discount: 1.0,
    })
}
