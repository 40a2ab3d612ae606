//! Writes the bundled Cooperative Box Pushing model to stdout.
//!
//! Two agents stand in a four-cell corridor (columns 0..3, agent 1 always
//! left of agent 2). Above columns 0 and 3 sit small boxes; the large box
//! covers columns 1 and 2. Agents turn left, turn right, move forward or
//! stay; turns and moves succeed with probability 0.9.
//!
//! Rewards: -0.1 per agent and step, -5 for walking into a wall, +10 per
//! pushed small box, +100 when both agents push the large box together and
//! -5 to an agent pushing it alone. Any successful push resets the agents to
//! column 0 facing east and column 3 facing west. Each agent observes what is
//! in front of it afterwards: empty, wall, agent, small box or large box.
//!
//! Usage: `cargo run --example gen_box_pushing > src/bench/data/box_pushing.dpomdp`

use std::collections::BTreeMap;
use std::fmt::Write;

const COLS: usize = 4;
const P_SUCCESS: f64 = 0.9;
const STEP: f64 = -0.1;
const BUMP: f64 = -5.0;
const SMALL: f64 = 10.0;
const LARGE: f64 = 100.0;
const ALONE: f64 = -5.0;

const ACTIONS: [&str; 4] = ["turn-left", "turn-right", "move", "stay"];
const OBSERVATIONS: [&str; 5] = ["empty", "wall", "agent", "small-box", "large-box"];
const HEADINGS: [char; 4] = ['N', 'E', 'S', 'W'];

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct State {
    pos: [usize; 2],
    heading: [usize; 2],
}

impl State {
    fn name(&self) -> String {
        format!(
            "c{}{}-c{}{}",
            self.pos[0], HEADINGS[self.heading[0]], self.pos[1], HEADINGS[self.heading[1]]
        )
    }

    fn in_front(&self, i: usize) -> usize {
        let c = self.pos[i];
        match self.heading[i] {
            0 if c == 0 || c == COLS - 1 => 3,
            0 => 4,
            2 => 1,
            h => {
                let next = if h == 1 {
                    c as isize + 1
                } else {
                    c as isize - 1
                };
                if next < 0 || next >= COLS as isize {
                    1
                } else if next as usize == self.pos[1 - i] {
                    2
                } else {
                    0
                }
            }
        }
    }
}

const START: State = State {
    pos: [0, COLS - 1],
    heading: [1, 3],
};

fn states() -> Vec<State> {
    let mut out = Vec::new();
    for c1 in 0..COLS {
        for c2 in c1 + 1..COLS {
            for h1 in 0..4 {
                for h2 in 0..4 {
                    out.push(State {
                        pos: [c1, c2],
                        heading: [h1, h2],
                    });
                }
            }
        }
    }
    out
}

#[derive(PartialEq)]
enum Push {
    Small,
    Large,
}

/// One outcome given which agents' actions succeed.
fn outcome(s: State, acts: [usize; 2], ok: [bool; 2]) -> (State, f64) {
    let mut reward = 2.0 * STEP;
    let mut next = s;
    let mut pushes = [None, None];
    for i in 0..2 {
        if acts[i] == 2 && s.heading[i] == 0 {
            if ok[i] {
                let c = s.pos[i];
                pushes[i] = Some(if c == 0 || c == COLS - 1 {
                    Push::Small
                } else {
                    Push::Large
                });
            }
            continue;
        }
        if !ok[i] {
            continue;
        }
        match acts[i] {
            0 => next.heading[i] = (s.heading[i] + 3) % 4,
            1 => next.heading[i] = (s.heading[i] + 1) % 4,
            2 => {
                let h = s.heading[i];
                if h == 2 {
                    reward += BUMP;
                } else {
                    let c = if h == 1 {
                        s.pos[i] as isize + 1
                    } else {
                        s.pos[i] as isize - 1
                    };
                    if c < 0 || c >= COLS as isize {
                        reward += BUMP;
                    } else if c as usize != s.pos[1 - i] {
                        next.pos[i] = c as usize;
                    }
                }
            }
            _ => {}
        }
    }
    if next.pos[0] >= next.pos[1] {
        next.pos = s.pos;
    }
    let large = pushes.iter().filter(|p| **p == Some(Push::Large)).count();
    let small = pushes.iter().filter(|p| **p == Some(Push::Small)).count();
    if large == 2 {
        return (START, reward + LARGE);
    }
    reward += ALONE * large as f64;
    if small > 0 {
        return (START, reward + SMALL * small as f64);
    }
    (next, reward)
}

fn success_prob(action: usize) -> f64 {
    if action == 3 {
        1.0
    } else {
        P_SUCCESS
    }
}

pub fn document() -> String {
    let states = states();
    let mut out = String::new();
    let w = &mut out;
    writeln!(
        w,
        "# Cooperative Box Pushing, generated by examples/gen_box_pushing.rs"
    )
    .unwrap();
    writeln!(w, "agents: 2").unwrap();
    writeln!(w, "discount: 1").unwrap();
    writeln!(w, "values: reward").unwrap();
    let names: Vec<String> = states.iter().map(State::name).collect();
    writeln!(w, "states: {}", names.join(" ")).unwrap();
    writeln!(w, "start: {}", START.name()).unwrap();
    writeln!(w, "actions:").unwrap();
    for _ in 0..2 {
        writeln!(w, "{}", ACTIONS.join(" ")).unwrap();
    }
    writeln!(w, "observations:").unwrap();
    for _ in 0..2 {
        writeln!(w, "{}", OBSERVATIONS.join(" ")).unwrap();
    }
    for a1 in 0..4 {
        for a2 in 0..4 {
            let p = [success_prob(a1), success_prob(a2)];
            for &s in &states {
                let mut dist: BTreeMap<State, f64> = BTreeMap::new();
                let mut expected = 0.0;
                for ok1 in [true, false] {
                    for ok2 in [true, false] {
                        let q = (if ok1 { p[0] } else { 1.0 - p[0] })
                            * (if ok2 { p[1] } else { 1.0 - p[1] });
                        if q == 0.0 {
                            continue;
                        }
                        let (next, r) = outcome(s, [a1, a2], [ok1, ok2]);
                        *dist.entry(next).or_default() += q;
                        expected += q * r;
                    }
                }
                let act = format!("{} {}", ACTIONS[a1], ACTIONS[a2]);
                let mut targets: Vec<_> = dist.into_iter().collect();
                targets.sort_by_key(|(t, _)| states.iter().position(|x| x == t));
                for (t, q) in targets {
                    writeln!(w, "T: {act} : {} : {} : {q}", s.name(), t.name()).unwrap();
                }
                writeln!(w, "R: {act} : {} : * : * : {expected}", s.name()).unwrap();
            }
        }
    }
    for s in &states {
        writeln!(
            w,
            "O: * : {} : {} {} : 1",
            s.name(),
            OBSERVATIONS[s.in_front(0)],
            OBSERVATIONS[s.in_front(1)]
        )
        .unwrap();
    }
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", document());
}
