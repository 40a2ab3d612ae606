//! Dec-Tiger (Nair et al., 2003).
//!
//! A tiger sits behind the left or right door. Listening keeps the state and
//! each agent hears the tiger's side correctly with probability 0.85,
//! independently. Any door opening resets the tiger uniformly and yields
//! uninformative observations.

use crate::error::Result;
use crate::model::{Agent, DecPomdp, ModelParts};

const OPEN_LEFT: usize = 0;
const OPEN_RIGHT: usize = 1;
const LISTEN: usize = 2;
const HEAR_CORRECT: f64 = 0.85;

/// Joint reward when the tiger is on the left; the right case mirrors it.
fn reward_tiger_left(a1: usize, a2: usize) -> f64 {
    let mut acts = [a1, a2];
    acts.sort_unstable();
    match acts {
        [LISTEN, LISTEN] => -2.0,
        [OPEN_RIGHT, OPEN_RIGHT] => 20.0,
        [OPEN_LEFT, OPEN_LEFT] => -50.0,
        [OPEN_LEFT, OPEN_RIGHT] => -100.0,
        [OPEN_RIGHT, LISTEN] => 9.0,
        [OPEN_LEFT, LISTEN] => -101.0,
        _ => unreachable!(),
    }
}

fn mirror(a: usize) -> usize {
    match a {
        OPEN_LEFT => OPEN_RIGHT,
        OPEN_RIGHT => OPEN_LEFT,
        x => x,
    }
}

pub fn build() -> Result<DecPomdp> {
    let agent = |name: &str| Agent {
        name: name.into(),
        actions: vec!["open-left".into(), "open-right".into(), "listen".into()],
        observations: vec!["hear-left".into(), "hear-right".into()],
    };
    let ns = 2;
    let na = 9;
    let no = 4;
    let mut transition = vec![0.0; na * ns * ns];
    let mut observation = vec![0.0; na * ns * no];
    let mut reward = vec![0.0; na * ns];
    for a in 0..na {
        let (a1, a2) = (a / 3, a % 3);
        let listen = a1 == LISTEN && a2 == LISTEN;
        for s in 0..ns {
            for s2 in 0..ns {
                transition[(a * ns + s) * ns + s2] = match (listen, s == s2) {
                    (true, true) => 1.0,
                    (true, false) => 0.0,
                    (false, _) => 0.5,
                };
            }
            for o in 0..no {
                let (o1, o2) = (o / 2, o % 2);
                let hear = |oi: usize| {
                    if oi == s {
                        HEAR_CORRECT
                    } else {
                        1.0 - HEAR_CORRECT
                    }
                };
                // Here `s` is the reached state.
                observation[(a * ns + s) * no + o] =
                    if listen { hear(o1) * hear(o2) } else { 0.25 };
            }
            reward[a * ns + s] = if s == 0 {
                reward_tiger_left(a1, a2)
            } else {
                reward_tiger_left(mirror(a1), mirror(a2))
            };
        }
    }
    DecPomdp::new(ModelParts {
        agents: vec![agent("agent1"), agent("agent2")],
        states: vec!["tiger-left".into(), "tiger-right".into()],
        transition,
        observation,
        reward,
        initial_belief: vec![0.5, 0.5],
        default_horizon: 100,
        discount: 1.0,
    })
}
